//! The reference-free metrics on one synthetic scenario: I-TMMD over the
//! whole set, CI-TMMD per class, and the class divergence matrix behind
//! D-TMMD.
//!
//! Run with `cargo run --release --example reference_free [seed]`.

use tactile_evalkit::synth::{generate_scenario, Scenario, ScenarioSpec};
use tactile_evalkit::{ci_tmmd, divergence_matrix, i_tmmd, partition_by_class, MmdConfig, SplitStrategy};

fn main() -> tactile_evalkit::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let spec = ScenarioSpec::new(Scenario::Clean, seed);
    let out = generate_scenario(&spec)?;
    let classes = partition_by_class(&out.embeddings, &out.meta)?;
    let cfg = MmdConfig::median();
    let strategy = SplitStrategy::SeededRandom { seed, repeats: 5 };

    let i = i_tmmd(&out.embeddings, &cfg, &strategy)?;
    println!("i_tmmd  = {:.6}", i.value);
    let ci = ci_tmmd(&out.embeddings, &classes, &cfg, &strategy)?;
    println!("ci_tmmd = {:.6}", ci.value);

    let m = divergence_matrix(&out.embeddings, &classes, &cfg, &strategy)?;
    println!("\ndivergence matrix (sigma {:.3}):", m.sigma);
    print!("{:>6}", "");
    for c in &m.classes {
        print!("{c:>9}");
    }
    println!();
    for (c, row) in m.classes.iter().zip(&m.raw) {
        print!("{c:>6}");
        for v in row {
            print!("{v:>9.4}");
        }
        println!();
    }
    println!("\nd_tmmd  = {:.6}", m.d_tmmd()?);
    Ok(())
}
