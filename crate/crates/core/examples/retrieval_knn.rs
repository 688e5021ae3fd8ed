//! Retrieval top-k and the k-NN probe on a synthetic scenario. Queries are
//! noisy copies of gallery items, so retrieval degrades as the noise grows.
//!
//! Run with `cargo run --release --example retrieval_knn`.

use std::collections::HashMap;

use tactile_evalkit::baseline::knn::knn_probe;
use tactile_evalkit::baseline::retrieval::retrieval_topk;
use tactile_evalkit::leakage::make_noleak_split;
use tactile_evalkit::rng::{standard_normal, stream};
use tactile_evalkit::synth::{generate_scenario, split_sets, Scenario, ScenarioSpec};
use tactile_evalkit::EmbeddingSet;

fn main() -> tactile_evalkit::Result<()> {
    let out = generate_scenario(&ScenarioSpec::new(Scenario::Clean, 0))?;
    let gallery = &out.embeddings;

    println!("{:>6}  {:>6}  {:>6}", "noise", "top1", "top5");
    for noise in [0.05, 0.2, 0.5, 1.0] {
        let mut rng = stream(7, 0);
        let rows: Vec<f64> = gallery
            .data()
            .iter()
            .map(|&x| x as f64 + noise * standard_normal(&mut rng))
            .collect();
        let ids: Vec<String> = gallery.ids().iter().map(|id| format!("q_{id}")).collect();
        let pairing: HashMap<String, String> = ids.iter().cloned().zip(gallery.ids().iter().cloned()).collect();
        let queries = EmbeddingSet::from_f64_rows(ids, &rows, gallery.dim())?;
        let r = retrieval_topk(&queries, gallery, &pairing, &[1, 5])?;
        println!("{noise:>6.2}  {:>6.3}  {:>6.3}", r.top1().unwrap(), r.top5().unwrap());
    }

    // Class probe on a video-grouped split.
    let split = make_noleak_split(&out.meta, 0.2, 0, true)?;
    let meta = split.apply(&out.meta);
    let (train, test) = split_sets(gallery, &meta)?;
    let labels = |set: &EmbeddingSet| -> Vec<String> {
        set.ids()
            .iter()
            .map(|id| meta.get(id).and_then(|r| r.class_label.clone()).unwrap_or_default())
            .collect()
    };
    for k in [1, 5, 15] {
        let acc = knn_probe(&train, &labels(&train), &test, &labels(&test), k)?;
        println!("knn k={k:<2} accuracy = {acc:.4}");
    }
    Ok(())
}
