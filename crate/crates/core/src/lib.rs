//! Evaluation toolkit for embedding-based generative models, built around
//! tactile image generation.
//!
//! * [`kernel`]: Gaussian kernel, bandwidth selection, unbiased MMD².
//! * [`metrics`]: TMMD, I-TMMD, CI-TMMD, D-TMMD and the divergence matrix.
//! * [`baseline`]: FID, SSIM, PSNR, retrieval top-k, k-NN probe.
//! * [`leakage`]: train/test leakage audit and video-grouped splits.
//! * [`synth`]: seeded synthetic scenarios and the leak study.
//! * [`embedding`], [`meta`]: file formats and in-memory sets.
//! * [`cli`]: the `tactile-evalkit` command line.

pub mod baseline;
pub mod cli;
pub mod embedding;
pub mod error;
pub mod kernel;
pub mod leakage;
pub mod meta;
pub mod metrics;
pub mod report;
pub mod rng;
pub mod synth;

pub use embedding::{load_embeddings, EmbeddingSet};
pub use error::{Error, Result};
pub use kernel::{mmd2_unbiased, Bandwidth, MmdConfig, MmdValue};
pub use meta::{load_meta, partition_by_class, ClassPartition, MetaRow, MetaTable, Split};
pub use metrics::{ci_tmmd, d_tmmd, divergence_matrix, i_tmmd, tmmd, DivergenceMatrix, SplitStrategy};
pub use report::MetricReport;
