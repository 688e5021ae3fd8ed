//! Fixture files shared by the command-line tests and the acceptance run.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use tactile_evalkit::baseline::image::{encode_png, ImageGray};
use tactile_evalkit::meta::write_meta;
use tactile_evalkit::{EmbeddingSet, MetaRow, MetaTable, Split};

pub const E2: f64 = 0.1353352832366127;

pub fn ids(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn set(names: &[&str], vals: &[f64], dim: usize) -> EmbeddingSet {
    EmbeddingSet::from_f64_rows(ids(names), vals, dim).unwrap()
}

pub fn row(id: &str, video: &str, frame: u64, class: Option<&str>, split: Split) -> MetaRow {
    MetaRow {
        sample_id: id.into(),
        video_id: video.into(),
        frame_index: frame,
        class_label: class.map(str::to_owned),
        split,
    }
}

/// Paths of every fixture, written once into a temporary directory.
pub struct Fixtures {
    pub dir: PathBuf,
    pub g2: PathBuf,
    pub r2: PathBuf,
    pub pair: PathBuf,
    pub g4: PathBuf,
    pub two_class: PathBuf,
    pub two_class_meta: PathBuf,
    pub png_zero: PathBuf,
    pub png_ten: PathBuf,
    pub png_ramp: PathBuf,
    pub queries: PathBuf,
    pub gallery: PathBuf,
    pub pairs: PathBuf,
    pub knn_train: PathBuf,
    pub knn_test: PathBuf,
    pub knn_meta: PathBuf,
    pub leaked_meta: PathBuf,
    pub clean_meta: PathBuf,
    pub dup_meta: PathBuf,
    pub dup_emb: PathBuf,
    pub split_meta: PathBuf,
}

impl Fixtures {
    pub fn write(dir: &Path) -> Fixtures {
        let p = |name: &str| dir.join(name);
        let f = Fixtures {
            dir: dir.to_owned(),
            g2: p("g2.temb"),
            r2: p("r2.temb"),
            pair: p("pair.temb"),
            g4: p("g4.temb"),
            two_class: p("two_class.temb"),
            two_class_meta: p("two_class.jsonl"),
            png_zero: p("zero.png"),
            png_ten: p("ten.png"),
            png_ramp: p("ramp.png"),
            queries: p("queries.temb"),
            gallery: p("gallery.temb"),
            pairs: p("pairs.jsonl"),
            knn_train: p("knn_train.temb"),
            knn_test: p("knn_test.temb"),
            knn_meta: p("knn.jsonl"),
            leaked_meta: p("leaked.jsonl"),
            clean_meta: p("clean.jsonl"),
            dup_meta: p("dup.jsonl"),
            dup_emb: p("dup.temb"),
            split_meta: p("split.jsonl"),
        };

        // Two-point sets: G = {0, 0}, R = {2, 2}.
        set(&["g0", "g1"], &[0.0, 0.0], 1).write_temb(&f.g2).unwrap();
        set(&["r0", "r1"], &[2.0, 2.0], 1).write_temb(&f.r2).unwrap();
        // Identical-set fixture {0, 2}.
        set(&["p0", "p1"], &[0.0, 2.0], 1).write_temb(&f.pair).unwrap();
        // Interleave halves of a,b,c,d = 0,0,2,2 are {0,2} and {0,2}.
        set(&["a", "b", "c", "d"], &[0.0, 0.0, 2.0, 2.0], 1)
            .write_temb(&f.g4)
            .unwrap();

        let tc: Vec<String> = (0..8).map(|i| format!("s{i}")).collect();
        let vals = [0.0, 0.0, 0.0, 0.0, 1000.0, 1000.0, 1000.0, 1000.0];
        EmbeddingSet::from_f64_rows(tc.clone(), &vals, 1)
            .unwrap()
            .write_temb(&f.two_class)
            .unwrap();
        let rows = tc
            .iter()
            .enumerate()
            .map(|(i, id)| row(id, id, 0, Some(if i < 4 { "a" } else { "b" }), Split::Unassigned))
            .collect();
        write_meta(&MetaTable::new(rows).unwrap(), &f.two_class_meta).unwrap();

        fs::write(&f.png_zero, encode_png(&ImageGray::filled(16, 16, 0))).unwrap();
        fs::write(&f.png_ten, encode_png(&ImageGray::filled(16, 16, 10))).unwrap();
        let ramp = (0..24 * 20).map(|i| ((i * 37) % 251) as u8).collect();
        fs::write(&f.png_ramp, encode_png(&ImageGray::new(24, 20, ramp).unwrap())).unwrap();

        // Gallery on the unit circle; query i sits nearest gallery item
        // (i + shift) so its true pair lands at a known rank.
        let angles: Vec<f64> = (0..8).map(|i| i as f64 * std::f64::consts::PI / 4.0).collect();
        let gallery: Vec<f64> = angles.iter().flat_map(|a| [a.cos(), a.sin()]).collect();
        let gnames: Vec<String> = (0..8).map(|i| format!("g{i}")).collect();
        EmbeddingSet::from_f64_rows(gnames.clone(), &gallery, 2)
            .unwrap()
            .write_temb(&f.gallery)
            .unwrap();
        let qnames: Vec<String> = (0..8).map(|i| format!("q{i}")).collect();
        let queries: Vec<f64> = (0..8)
            .flat_map(|i| {
                let a = angles[i]
                    + if i % 2 == 0 {
                        0.1
                    } else {
                        std::f64::consts::PI / 4.0 + 0.1
                    };
                [a.cos(), a.sin()]
            })
            .collect();
        EmbeddingSet::from_f64_rows(qnames.clone(), &queries, 2)
            .unwrap()
            .write_temb(&f.queries)
            .unwrap();
        let pairs: String = qnames
            .iter()
            .zip(&gnames)
            .map(|(q, g)| format!("{{\"query\":\"{q}\",\"gallery\":\"{g}\"}}\n"))
            .collect();
        fs::write(&f.pairs, pairs).unwrap();

        let train_ids: Vec<String> = (0..10).map(|i| format!("tr{i}")).collect();
        let test_ids: Vec<String> = (0..4).map(|i| format!("te{i}")).collect();
        let train: Vec<f64> = (0..10)
            .flat_map(|i| [i as f64 * 0.3, if i < 5 { 0.0 } else { 4.0 }])
            .collect();
        let test = [1.0, 0.2, 0.5, -0.1, 2.0, 4.1, 2.5, 3.9];
        EmbeddingSet::from_f64_rows(train_ids.clone(), &train, 2)
            .unwrap()
            .write_temb(&f.knn_train)
            .unwrap();
        EmbeddingSet::from_f64_rows(test_ids.clone(), &test, 2)
            .unwrap()
            .write_temb(&f.knn_test)
            .unwrap();
        let mut rows: Vec<MetaRow> = train_ids
            .iter()
            .enumerate()
            .map(|(i, id)| row(id, id, 0, Some(if i < 5 { "low" } else { "high" }), Split::Train))
            .collect();
        rows.extend(
            test_ids
                .iter()
                .enumerate()
                .map(|(i, id)| row(id, id, 0, Some(if i < 2 { "low" } else { "high" }), Split::Test)),
        );
        write_meta(&MetaTable::new(rows).unwrap(), &f.knn_meta).unwrap();

        let leaked = vec![
            row("hct_169", "hct_07", 169, Some("fabric"), Split::Train),
            row("hct_170", "hct_07", 170, Some("fabric"), Split::Test),
            row("hct_171", "hct_07", 171, Some("fabric"), Split::Train),
            row("tag_0001", "tag_01", 1, Some("wood"), Split::Test),
        ];
        write_meta(&MetaTable::new(leaked).unwrap(), &f.leaked_meta).unwrap();
        let clean = vec![
            row("a1", "v1", 1, None, Split::Train),
            row("a2", "v1", 2, None, Split::Train),
            row("b1", "v2", 1, None, Split::Test),
        ];
        write_meta(&MetaTable::new(clean).unwrap(), &f.clean_meta).unwrap();

        let dup = vec![
            row("x", "v1", 0, None, Split::Train),
            row("y", "v2", 0, None, Split::Test),
            row("z", "v3", 0, None, Split::Test),
        ];
        write_meta(&MetaTable::new(dup).unwrap(), &f.dup_meta).unwrap();
        set(&["x", "y", "z"], &[1.0, 0.0, 0.9999, 0.001, 0.0, 1.0], 2)
            .write_temb(&f.dup_emb)
            .unwrap();

        let split_rows = (0..12)
            .flat_map(|v| {
                (0..5).map(move |t| {
                    let id = format!("v{v:02}_f{t}");
                    let class = if v % 2 == 0 { "even" } else { "odd" };
                    row(&id, &format!("v{v:02}"), t, Some(class), Split::Unassigned)
                })
            })
            .collect();
        write_meta(&MetaTable::new(split_rows).unwrap(), &f.split_meta).unwrap();
        f
    }

    /// One invocation per command, covering every subcommand.
    pub fn commands(&self) -> Vec<Vec<String>> {
        let s = |p: &PathBuf| p.display().to_string();
        let out = |name: &str| self.dir.join(name).display().to_string();
        let v = |parts: &[&str]| parts.iter().map(|p| p.to_string()).collect::<Vec<_>>();
        vec![
            v(&[
                "metrics",
                "tmmd",
                "--generated",
                &s(&self.g2),
                "--reference",
                &s(&self.r2),
                "--sigma",
                "1",
            ]),
            v(&[
                "metrics",
                "embedding-mmd",
                "--generated",
                &s(&self.two_class),
                "--reference",
                &s(&self.g4),
            ]),
            v(&[
                "metrics",
                "itmmd",
                "--generated",
                &s(&self.g4),
                "--split-mode",
                "interleave",
                "--sigma",
                "1",
            ]),
            v(&[
                "metrics",
                "itmmd",
                "--generated",
                &s(&self.two_class),
                "--seed",
                "3",
                "--splits",
                "4",
            ]),
            v(&[
                "metrics",
                "citmmd",
                "--generated",
                &s(&self.two_class),
                "--meta",
                &s(&self.two_class_meta),
                "--sigma",
                "1",
            ]),
            v(&[
                "metrics",
                "dtmmd",
                "--generated",
                &s(&self.two_class),
                "--meta",
                &s(&self.two_class_meta),
                "--sigma",
                "1",
            ]),
            v(&["baseline", "fid", "--a", &s(&self.two_class), "--b", &s(&self.g4)]),
            v(&["baseline", "ssim", "--a", &s(&self.png_ramp), "--b", &s(&self.png_ramp)]),
            v(&["baseline", "psnr", "--a", &s(&self.png_zero), "--b", &s(&self.png_ten)]),
            v(&[
                "baseline",
                "retrieval",
                "--queries",
                &s(&self.queries),
                "--gallery",
                &s(&self.gallery),
                "--pairs",
                &s(&self.pairs),
                "--k",
                "1,5",
            ]),
            v(&[
                "baseline",
                "knn",
                "--train",
                &s(&self.knn_train),
                "--test",
                &s(&self.knn_test),
                "--meta",
                &s(&self.knn_meta),
                "--k",
                "3",
            ]),
            v(&["audit", "--meta", &s(&self.leaked_meta)]),
            v(&[
                "audit",
                "--meta",
                &s(&self.dup_meta),
                "--embeddings",
                &s(&self.dup_emb),
                "--tau",
                "0.99",
            ]),
            v(&[
                "split",
                "--meta",
                &s(&self.split_meta),
                "--test-frac",
                "0.2",
                "--seed",
                "7",
                "--stratify",
                "--out-dir",
                &out("split_out"),
            ]),
            v(&[
                "synth",
                "--scenario",
                "collapse",
                "--seed",
                "1",
                "--videos-per-class",
                "2",
                "--frames-per-video",
                "10",
                "--out-dir",
                &out("synth_out"),
            ]),
            v(&[
                "study",
                "--seed",
                "2",
                "--videos-per-class",
                "5",
                "--frames-per-video",
                "20",
            ]),
        ]
    }
}

/// Runs the command line in-process; returns (exit code, stdout, stderr).
pub fn run_cli<S: AsRef<str>>(args: &[S]) -> (i32, String, String) {
    let mut full = vec!["tactile-evalkit".to_string()];
    full.extend(args.iter().map(|a| a.as_ref().to_string()));
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = tactile_evalkit::cli::run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

pub fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap_or_else(|e| panic!("bad json ({e}): {text}"))
}
