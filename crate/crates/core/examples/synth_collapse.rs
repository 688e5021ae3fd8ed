//! D-TMMD and I-TMMD on a well-separated scenario and on a collapsed one,
//! where every class shares a single distribution.
//!
//! Run with `cargo run --release --example synth_collapse [seed]`.

use tactile_evalkit::synth::{generate_scenario, Scenario, ScenarioSpec};
use tactile_evalkit::{d_tmmd, i_tmmd, partition_by_class, MmdConfig, SplitStrategy};

fn main() -> tactile_evalkit::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = MmdConfig::median();
    let strategy = SplitStrategy::default();
    for scenario in [Scenario::Clean, Scenario::Collapse] {
        let spec = ScenarioSpec::new(scenario, seed);
        let out = generate_scenario(&spec)?;
        let classes = partition_by_class(&out.embeddings, &out.meta)?;
        let d = d_tmmd(&out.embeddings, &classes, &cfg, &strategy)?;
        let i = i_tmmd(&out.embeddings, &cfg, &strategy)?;
        println!(
            "{scenario:<9} d_tmmd = {:.4} (1/C = {:.4})  i_tmmd = {:.5}  sigma = {:.3}",
            d.value,
            1.0 / spec.classes as f64,
            i.value,
            d.sigma.unwrap_or(f64::NAN)
        );
        for (class, ratio) in &d.per_class {
            println!("    {class}: {ratio:.4}");
        }
    }
    Ok(())
}
