//! Video-grouped train/test split of a metadata file, with and without
//! class stratification. Prints achieved fractions per class.
//!
//! `cargo run --release --example noleak_split [meta.jsonl] [test_fraction]`;
//! without a file a synthetic scenario's metadata is used.

use std::collections::BTreeMap;

use tactile_evalkit::leakage::make_noleak_split;
use tactile_evalkit::synth::{generate_scenario, Scenario, ScenarioSpec};
use tactile_evalkit::{load_meta, Split};

fn main() -> tactile_evalkit::Result<()> {
    let mut args = std::env::args().skip(1);
    let meta = match args.next() {
        Some(path) => load_meta(path)?,
        None => generate_scenario(&ScenarioSpec::new(Scenario::Clean, 0))?.meta,
    };
    let tf: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.2);
    println!(
        "{} samples in {} videos, target test fraction {tf}",
        meta.len(),
        meta.videos().len()
    );

    for stratify in [false, true] {
        let split = make_noleak_split(&meta, tf, 0, stratify)?;
        let mut per_class: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for r in meta.rows() {
            let e = per_class
                .entry(r.class_label.clone().unwrap_or_else(|| "-".into()))
                .or_default();
            e.1 += 1;
            if split.assignments[&r.sample_id] == Split::Test {
                e.0 += 1;
            }
        }
        println!("\nstratify = {stratify}: achieved {:.4}", split.achieved_test_fraction);
        for (class, (test, total)) in per_class {
            println!("  {class:<8} {test:>4}/{total:<4} = {:.3}", test as f64 / total as f64);
        }
        for w in &split.warnings {
            println!("  warning: {w}");
        }
    }
    Ok(())
}
