//! Gaussian RBF kernel and the unbiased MMD² estimator.
//!
//! Kernel sums are accumulated over 64×64 tiles visited in row-major tile
//! order. Each tile is reduced pairwise, then the per-tile partial sums are
//! reduced pairwise in tile order. Tiles may be evaluated on any number of
//! threads; the reduction tree is fixed, so results are bit-identical.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TILE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed(f64),
    MedianHeuristic,
}

impl Bandwidth {
    pub fn policy_name(&self) -> &'static str {
        match self {
            Bandwidth::Fixed(_) => "fixed",
            Bandwidth::MedianHeuristic => "median",
        }
    }
}

/// Only the Gaussian RBF kernel and the diagonal-free unbiased estimator
/// exist; the config still names them so reports are self-describing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmdConfig {
    pub bandwidth: Bandwidth,
}

impl MmdConfig {
    pub fn fixed(sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Self {
            bandwidth: Bandwidth::Fixed(sigma),
        })
    }

    pub fn median() -> Self {
        Self {
            bandwidth: Bandwidth::MedianHeuristic,
        }
    }

    pub const KERNEL: &'static str = "gaussian_rbf";
    pub const ESTIMATOR: &'static str = "unbiased_no_diagonal";
}

impl Default for MmdConfig {
    fn default() -> Self {
        Self::median()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmdValue {
    /// May be negative: the estimator is unbiased.
    pub value: f64,
    pub m: usize,
    pub n: usize,
    pub sigma_used: f64,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth(sigma))
    }
}

#[inline]
fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
fn gauss(sq: f64, inv_two_sigma_sq: f64) -> f64 {
    (-sq * inv_two_sigma_sq).exp()
}

/// `exp(-‖x − y‖² / 2σ²)`.
pub fn rbf_kernel(x: &[f64], y: &[f64], sigma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    check_sigma(sigma)?;
    Ok(gauss(sq_dist(x, y), 1.0 / (2.0 * sigma * sigma)))
}

/// Row-major contiguous view of a point set.
#[derive(Clone, Copy)]
struct Points<'a> {
    data: &'a [f64],
    dim: usize,
    len: usize,
}

impl<'a> Points<'a> {
    fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn standard<'a>(a: &'a ArrayView2<'_, f64>, buf: &'a mut Option<Array2<f64>>) -> Points<'a> {
    let (len, dim) = a.dim();
    let data = match a.as_slice() {
        Some(s) => s,
        None => {
            let owned: &'a Array2<f64> = buf.insert(a.as_standard_layout().into_owned());
            owned.as_slice().expect("standard layout")
        }
    };
    Points { data, dim, len }
}

fn check_dims(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Result<()> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            found: b.ncols(),
        });
    }
    Ok(())
}

/// Median of all pairwise Euclidean distances between distinct rows (lower
/// median for an even number of pairs).
pub fn median_heuristic_sigma(points: ArrayView2<f64>) -> Result<f64> {
    let mut buf = None;
    let p = standard(&points, &mut buf);
    if p.len < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: p.len,
        });
    }
    let mut dists: Vec<f64> = (0..p.len)
        .into_par_iter()
        .flat_map_iter(|i| (i + 1..p.len).map(move |j| sq_dist(p.row(i), p.row(j))))
        .collect();
    let mid = (dists.len() - 1) / 2;
    let (_, median, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let sigma = median.sqrt();
    if sigma > 0.0 {
        Ok(sigma)
    } else {
        Err(Error::DegenerateBandwidth)
    }
}

pub fn kernel_matrix(a: ArrayView2<f64>, b: ArrayView2<f64>, sigma: f64) -> Result<Array2<f64>> {
    check_dims(&a, &b)?;
    check_sigma(sigma)?;
    let (mut ba, mut bb) = (None, None);
    let pa = standard(&a, &mut ba);
    let pb = standard(&b, &mut bb);
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut out = Array2::zeros((pa.len, pb.len));
    if pb.len > 0 {
        out.as_slice_mut()
            .unwrap()
            .par_chunks_mut(pb.len)
            .enumerate()
            .for_each(|(i, row)| {
                for (j, slot) in row.iter_mut().enumerate() {
                    *slot = gauss(sq_dist(pa.row(i), pb.row(j)), inv);
                }
            });
    }
    Ok(out)
}

/// Pairwise (cascade) summation with a fixed split point.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Σ_i Σ_j k(a_i, b_j), skipping i = j when `skip_diagonal` (a and b are then
/// the same set).
fn tiled_kernel_sum(a: Points, b: Points, inv: f64, skip_diagonal: bool) -> f64 {
    let row_tiles = a.len.div_ceil(TILE);
    let col_tiles = b.len.div_ceil(TILE);
    let partials: Vec<f64> = (0..row_tiles * col_tiles)
        .into_par_iter()
        .map(|t| {
            let (ti, tj) = (t / col_tiles, t % col_tiles);
            let rows = ti * TILE..((ti + 1) * TILE).min(a.len);
            let cols = tj * TILE..((tj + 1) * TILE).min(b.len);
            let mut buf = [0.0f64; TILE * TILE];
            let mut k = 0;
            for i in rows {
                let x = a.row(i);
                for j in cols.clone() {
                    if skip_diagonal && i == j {
                        continue;
                    }
                    buf[k] = gauss(sq_dist(x, b.row(j)), inv);
                    k += 1;
                }
            }
            pairwise_sum(&buf[..k])
        })
        .collect();
    pairwise_sum(&partials)
}

/// Orders two point sets canonically so the cross term is evaluated the
/// same way whichever argument comes first.
fn canonical<'a>(x: Points<'a>, y: Points<'a>) -> (Points<'a>, Points<'a>) {
    let bits = |p: &Points<'a>| p.data.iter().map(|v| v.to_bits()).collect::<Vec<u64>>();
    let swap = match x.len.cmp(&y.len) {
        std::cmp::Ordering::Equal => bits(&x) > bits(&y),
        o => o.is_gt(),
    };
    if swap {
        (y, x)
    } else {
        (x, y)
    }
}

/// Resolves the bandwidth for a pair of sets: the fixed value, or the
/// median heuristic over their union.
pub fn resolve_sigma(g: ArrayView2<f64>, r: ArrayView2<f64>, bandwidth: Bandwidth) -> Result<f64> {
    match bandwidth {
        Bandwidth::Fixed(s) => {
            check_sigma(s)?;
            Ok(s)
        }
        Bandwidth::MedianHeuristic => {
            check_dims(&g, &r)?;
            let union = ndarray::concatenate(ndarray::Axis(0), &[g, r]).expect("dimensions checked");
            median_heuristic_sigma(union.view())
        }
    }
}

/// Unbiased MMD² between `g` and `r`:
///
/// `1/(m(m−1)) Σ_{i≠j} k(gᵢ,gⱼ) + 1/(n(n−1)) Σ_{i≠j} k(rᵢ,rⱼ) − 2/(mn) Σᵢⱼ k(gᵢ,rⱼ)`
pub fn mmd2_unbiased(g: ArrayView2<f64>, r: ArrayView2<f64>, cfg: &MmdConfig) -> Result<MmdValue> {
    check_dims(&g, &r)?;
    for len in [g.nrows(), r.nrows()] {
        if len < 2 {
            return Err(Error::TooFewSamples { needed: 2, found: len });
        }
    }
    let sigma = resolve_sigma(g, r, cfg.bandwidth)?;
    let (mut bg, mut br) = (None, None);
    let pg = standard(&g, &mut bg);
    let pr = standard(&r, &mut br);
    let inv = 1.0 / (2.0 * sigma * sigma);

    let (m, n) = (pg.len as f64, pr.len as f64);
    let within_g = tiled_kernel_sum(pg, pg, inv, true) / (m * (m - 1.0));
    let within_r = tiled_kernel_sum(pr, pr, inv, true) / (n * (n - 1.0));
    let (first, second) = canonical(pg, pr);
    let cross = 2.0 * tiled_kernel_sum(first, second, inv, false) / (m * n);

    Ok(MmdValue {
        value: within_g + within_r - cross,
        m: pg.len,
        n: pr.len,
        sigma_used: sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const E2: f64 = 0.1353352832366127; // e^-2

    #[test]
    fn rbf_values() {
        assert_eq!(rbf_kernel(&[1.5, -2.0], &[1.5, -2.0], 1.0).unwrap(), 1.0);
        assert!((rbf_kernel(&[0.0], &[2.0], 1.0).unwrap() - 0.1353353).abs() < 1e-7);
        assert!((rbf_kernel(&[3.0, 4.0], &[0.0, 0.0], 5.0).unwrap() - 0.6065307).abs() < 1e-7);
    }

    #[test]
    fn rbf_rejects_bad_input() {
        assert!(matches!(
            rbf_kernel(&[0.0], &[0.0, 1.0], 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            rbf_kernel(&[0.0], &[1.0], 0.0),
            Err(Error::InvalidBandwidth(_))
        ));
        assert!(matches!(
            rbf_kernel(&[0.0], &[1.0], -1.0),
            Err(Error::InvalidBandwidth(_))
        ));
    }

    #[test]
    fn median_heuristic_cases() {
        assert_eq!(median_heuristic_sigma(array![[0.0], [2.0]].view()).unwrap(), 2.0);
        assert_eq!(median_heuristic_sigma(array![[0.0], [1.0], [3.0]].view()).unwrap(), 2.0);
        // four distances {1,2,3,4,5,6} -> lower median 3
        assert_eq!(
            median_heuristic_sigma(array![[0.0], [1.0], [3.0], [6.0]].view()).unwrap(),
            3.0
        );
        assert!(matches!(
            median_heuristic_sigma(array![[0.0], [0.0]].view()),
            Err(Error::DegenerateBandwidth)
        ));
    }

    #[test]
    fn kernel_matrix_cases() {
        let k = kernel_matrix(array![[0.0]].view(), array![[0.0]].view(), 1.0).unwrap();
        assert_eq!(k, array![[1.0]]);
        let k = kernel_matrix(array![[0.0], [2.0]].view(), array![[0.0]].view(), 1.0).unwrap();
        assert_eq!(k[[0, 0]], 1.0);
        assert!((k[[1, 0]] - E2).abs() < 1e-15);
        assert!(kernel_matrix(array![[0.0]].view(), array![[0.0, 1.0]].view(), 1.0).is_err());
    }

    #[test]
    fn kernel_matrix_is_exactly_symmetric() {
        let a = array![[0.1, 0.7], [-1.3, 2.2], [4.0, 0.0], [0.3, 0.3]];
        let k = kernel_matrix(a.view(), a.view(), 0.8).unwrap();
        assert_eq!(k, k.t());
        assert!(k.diag().iter().all(|&d| d == 1.0));
    }

    #[test]
    fn mmd_hand_fixtures() {
        let cfg = MmdConfig::fixed(1.0).unwrap();
        let v = mmd2_unbiased(array![[0.0], [0.0]].view(), array![[2.0], [2.0]].view(), &cfg).unwrap();
        assert!((v.value - (2.0 - 2.0 * E2)).abs() < 1e-15);
        assert!((v.value - 1.7293294).abs() < 1e-7);

        let same = array![[0.0], [2.0]];
        let v = mmd2_unbiased(same.view(), same.view(), &cfg).unwrap();
        assert!((v.value - (E2 - 1.0)).abs() < 1e-15);

        let far = mmd2_unbiased(array![[0.0], [0.0]].view(), array![[1e6], [1e6]].view(), &cfg).unwrap();
        assert!((far.value - 2.0).abs() < 1e-12);
        assert_eq!((far.m, far.n, far.sigma_used), (2, 2, 1.0));
    }

    #[test]
    fn mmd_preconditions() {
        let cfg = MmdConfig::fixed(1.0).unwrap();
        assert!(matches!(
            mmd2_unbiased(array![[0.0]].view(), array![[0.0], [1.0]].view(), &cfg),
            Err(Error::TooFewSamples { needed: 2, found: 1 })
        ));
        assert!(matches!(
            mmd2_unbiased(array![[0.0], [1.0]].view(), array![[0.0, 0.0], [1.0, 1.0]].view(), &cfg),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            mmd2_unbiased(
                array![[1.0], [1.0]].view(),
                array![[1.0], [1.0]].view(),
                &MmdConfig::median()
            ),
            Err(Error::DegenerateBandwidth)
        ));
    }

    #[test]
    fn median_policy_uses_union() {
        // union {0, 0, 2, 2}: distances {0, 2, 2, 2, 2, 0} -> lower median 2
        let v = mmd2_unbiased(
            array![[0.0], [0.0]].view(),
            array![[2.0], [2.0]].view(),
            &MmdConfig::median(),
        )
        .unwrap();
        assert_eq!(v.sigma_used, 2.0);
    }

    #[test]
    fn strided_views_match_contiguous() {
        let a = array![[0.0, 9.0], [1.0, 9.0], [3.0, 9.0]];
        let b = array![[0.5, 9.0], [2.0, 9.0]];
        let cfg = MmdConfig::fixed(1.3).unwrap();
        let col_a = a.slice(ndarray::s![.., 0..1]);
        let col_b = b.slice(ndarray::s![.., 0..1]);
        let strided = mmd2_unbiased(col_a, col_b, &cfg).unwrap().value;
        let owned = mmd2_unbiased(col_a.to_owned().view(), col_b.to_owned().view(), &cfg)
            .unwrap()
            .value;
        assert_eq!(strided, owned);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 4950.0);
    }
}
