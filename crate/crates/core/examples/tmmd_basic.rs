//! TMMD between two Gaussian clouds as their means drift apart, with a
//! fixed bandwidth and with the median heuristic.
//!
//! Run with `cargo run --release --example tmmd_basic`.

use rand_distr::{Distribution, StandardNormal};
use tactile_evalkit::rng::stream;
use tactile_evalkit::{tmmd, EmbeddingSet, MmdConfig};

fn cloud(n: usize, dim: usize, shift: f64, seed: u64) -> tactile_evalkit::Result<EmbeddingSet> {
    let mut rng = stream(seed, 0);
    let rows: Vec<f64> = (0..n * dim)
        .map(|i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z + if i % dim == 0 { shift } else { 0.0 }
        })
        .collect();
    let ids = (0..n).map(|i| format!("s{i:04}")).collect();
    EmbeddingSet::from_f64_rows(ids, &rows, dim)
}

fn main() -> tactile_evalkit::Result<()> {
    let reference = cloud(500, 8, 0.0, 1)?;
    let fixed = MmdConfig::fixed(2.0)?;
    let median = MmdConfig::median();
    println!("{:>6}  {:>12}  {:>12}  {:>7}", "shift", "sigma=2", "median", "sigma");
    for shift in [0.0, 0.25, 0.5, 1.0, 2.0] {
        let generated = cloud(500, 8, shift, 2)?;
        let a = tmmd(&generated, &reference, &fixed)?;
        let b = tmmd(&generated, &reference, &median)?;
        println!(
            "{shift:>6.2}  {:>12.6}  {:>12.6}  {:>7.3}",
            a.value,
            b.value,
            b.sigma.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
