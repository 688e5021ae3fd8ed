//! Writes a small embedding set as TEMB and CSV plus its metadata as JSONL,
//! reads everything back and checks the values agree.
//!
//! Run with `cargo run --example file_formats [out_dir]`.

use std::path::PathBuf;

use tactile_evalkit::embedding::{load_any, load_embeddings_csv};
use tactile_evalkit::meta::write_meta;
use tactile_evalkit::synth::{generate_scenario, Scenario, ScenarioSpec};
use tactile_evalkit::{load_embeddings, load_meta};

fn main() -> tactile_evalkit::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("tactile-evalkit-formats"));
    std::fs::create_dir_all(&dir)?;

    let mut spec = ScenarioSpec::new(Scenario::Clean, 0);
    spec.videos_per_class = 2;
    spec.frames_per_video = 3;
    spec.dim = 6;
    let out = generate_scenario(&spec)?;

    let temb = dir.join("embeddings.temb");
    let csv = dir.join("embeddings.csv");
    let meta = dir.join("meta.jsonl");
    out.embeddings.write_temb(&temb)?;
    let mut w = csv::Writer::from_path(&csv)?;
    let header: Vec<String> = (0..out.embeddings.dim()).map(|j| format!("e{j}")).collect();
    w.write_record(std::iter::once("sample_id".to_string()).chain(header))?;
    for (i, id) in out.embeddings.ids().iter().enumerate() {
        let values = out.embeddings.row(i).iter().map(|v| v.to_string());
        w.write_record(std::iter::once(id.clone()).chain(values))?;
    }
    w.flush()?;
    write_meta(&out.meta, &meta)?;

    let a = load_embeddings(&temb)?;
    let b = load_embeddings_csv(&csv)?;
    let c = load_any(&csv)?;
    let m = load_meta(&meta)?;
    println!("wrote {} rows x {} dims to {}", a.len(), a.dim(), dir.display());
    println!("temb == csv: {}", a == b && b == c);
    println!("meta rows: {}, first: {:?}", m.len(), m.rows()[0]);
    Ok(())
}
