//! Comparison metrics: FID, SSIM and PSNR, retrieval top-k and a k-NN
//! classification probe. `embedding_mmd` is the TMMD estimator under a
//! generic label.

pub mod fid;
pub mod image;
pub mod knn;
pub mod retrieval;

pub use crate::metrics::embedding_mmd;
pub use fid::{fid, fit_gaussian, GaussianFit};
pub use image::{load_png, psnr, ssim, ImageGray};
pub use knn::knn_probe;
pub use retrieval::{retrieval_topk, RetrievalResult};
