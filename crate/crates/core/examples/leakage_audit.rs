//! Audits a frame-interleaved split, which leaks every video across the
//! boundary, next to a video-grouped split of the same data.
//!
//! Run with `cargo run --release --example leakage_audit`.

use tactile_evalkit::leakage::{audit_split, frame_interleaved_split, make_noleak_split, DEFAULT_TAU};
use tactile_evalkit::synth::{generate_scenario, Scenario, ScenarioSpec};

fn main() -> tactile_evalkit::Result<()> {
    let out = generate_scenario(&ScenarioSpec::new(Scenario::Clean, 0))?;
    let splits = [
        ("interleaved", frame_interleaved_split(&out.meta, 0.2)?),
        (
            "video-grouped",
            make_noleak_split(&out.meta, 0.2, 0, true)?.apply(&out.meta),
        ),
    ];
    for (name, meta) in splits {
        let audit = audit_split(&meta, Some(&out.embeddings), DEFAULT_TAU)?;
        println!(
            "{name:<14} leakage rate {:.3}  overlapping videos {:>3}  near-duplicates {:>5}",
            audit.leakage_rate,
            audit.video_overlap.len(),
            audit.near_duplicates.len()
        );
        if let Some((video, gap)) = audit.min_frame_gap.iter().next() {
            println!("{:<14} e.g. {video}: closest train/test frames are {gap} apart", "");
        }
        if let Some(d) = audit.near_duplicates.first() {
            println!(
                "{:<14} most similar pair {} / {} at {:.4}",
                "", d.train_id, d.test_id, d.similarity
            );
        }
    }
    Ok(())
}
