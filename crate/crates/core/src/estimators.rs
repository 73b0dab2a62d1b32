//! Histogram entropy estimators, in bits.
//!
//! The general plug-in estimate over bins with counts `n_i` and volumes `v_i`
//! is `-sum (n_i/N) log2(n_i / (N v_i))`. On an equiprobable tree partition
//! with `B = 2^(s*d)` bins this collapses to `2^(-s*d) sum log2 v_i + s*d`,
//! so only the bin volumes matter.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Rotation, SampleSet};
use crate::partition::{build_equiprobable, default_cycle_order, Partition};

/// Depths above this trigger a warning for bivariate data.
pub const BIVARIATE_DEPTH_GUIDANCE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Naive,
    MarginalEquiquantised,
    Equiprobable,
    RotatedEquiprobable,
    Ensemble,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::MarginalEquiquantised => "marginal_equiquantised",
            Method::Equiprobable => "equiprobable",
            Method::RotatedEquiprobable => "rotated_equiprobable",
            Method::Ensemble => "ensemble",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    /// Entropy in bits.
    pub value: f64,
    pub method: Method,
    /// Tree depth `s` for tree methods, bins per dimension for grid methods.
    pub depth: usize,
    pub bin_count: usize,
    pub rotation: Option<Rotation>,
    pub degenerate_bins: usize,
}

/// Output of [`entropy_histogram`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramEntropy {
    pub bits: f64,
    /// Occupied bins of zero volume, left out of the sum.
    pub degenerate_bins: usize,
}

/// Plug-in histogram entropy. Empty bins contribute nothing.
pub fn entropy_histogram(counts: &[usize], volumes: &[f64], n: usize) -> Result<HistogramEntropy> {
    if counts.len() != volumes.len() {
        return Err(Error::LengthMismatch {
            counts: counts.len(),
            volumes: volumes.len(),
        });
    }
    let sum: usize = counts.iter().sum();
    if sum != n || n == 0 {
        return Err(Error::CountMismatch { sum, n });
    }
    if let Some(v) = volumes.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "bin volumes must be non-negative, got {v}"
        )));
    }

    let total = n as f64;
    let mut bits = 0.0;
    let mut degenerate_bins = 0;
    for (&c, &v) in counts.iter().zip(volumes) {
        if c == 0 {
            continue;
        }
        if v == 0.0 {
            degenerate_bins += 1;
            continue;
        }
        let p = c as f64 / total;
        bits += p * (v.log2() - p.log2());
    }
    Ok(HistogramEntropy {
        bits,
        degenerate_bins,
    })
}

/// Volume-only entropy of an equiprobable tree partition.
pub fn entropy_equiprobable(p: &Partition) -> Result<f64> {
    let degenerate = p.zero_volume_bins();
    if degenerate > 0 {
        return Err(Error::DegeneratePartition(degenerate));
    }
    let levels = (p.depth() * p.dims()) as f64;
    let mean_log: f64 = p.bins().iter().map(|b| b.volume.log2()).sum::<f64>() / p.len() as f64;
    Ok(mean_log + levels)
}

/// Entropy of an already built partition; falls back to the plug-in form
/// when some bins have zero volume.
pub(crate) fn estimate_partition(
    p: &Partition,
    method: Method,
    rotation: Option<Rotation>,
) -> Result<EntropyEstimate> {
    let (value, degenerate_bins) = match entropy_equiprobable(p) {
        Ok(v) => (v, 0),
        Err(Error::DegeneratePartition(_)) => {
            let h = entropy_histogram(&p.counts(), &p.volumes(false), p.sample_count())?;
            (h.bits, h.degenerate_bins)
        }
        Err(e) => return Err(e),
    };
    Ok(EntropyEstimate {
        value,
        method,
        depth: p.depth(),
        bin_count: p.len(),
        rotation,
        degenerate_bins,
    })
}

pub(crate) fn warn_on_depth(depth: usize, dims: usize) {
    if dims == 2 && depth > BIVARIATE_DEPTH_GUIDANCE {
        log::warn!(
            "depth {depth} exceeds the usual guidance of {BIVARIATE_DEPTH_GUIDANCE} for bivariate data"
        );
    }
}

/// Unrotated equiprobable estimate with an explicit cycle order.
pub fn estimate_equiprobable(
    samples: &SampleSet,
    depth: usize,
    cycle_order: &[usize],
) -> Result<EntropyEstimate> {
    warn_on_depth(depth, samples.dims());
    let p = build_equiprobable(samples, depth, cycle_order)?;
    estimate_partition(&p, Method::Equiprobable, None)
}

fn grid_bin_count(k: usize, dims: usize) -> Result<usize> {
    u32::try_from(dims)
        .ok()
        .and_then(|d| k.checked_pow(d))
        .ok_or_else(|| Error::InvalidParameter(format!("{k}^{dims} bins overflow")))
}

/// Plug-in entropy over a product grid, given each point's slab per
/// dimension and the slab widths. Flat cell indices are sorted so the sum
/// runs in a fixed order.
fn grid_entropy(slabs: &[Vec<usize>], widths: &[Vec<f64>], n: usize) -> f64 {
    let dims = widths.len();
    let mut cells: Vec<usize> = (0..n)
        .map(|i| {
            (0..dims).fold(0usize, |acc, k| acc * widths[k].len() + slabs[k][i])
        })
        .collect();
    cells.sort_unstable();

    let total = n as f64;
    let mut bits = 0.0;
    for run in cells.chunk_by(|a, b| a == b) {
        let mut flat = run[0];
        let mut log_volume = 0.0;
        for k in (0..dims).rev() {
            let m = widths[k].len();
            log_volume += widths[k][flat % m].log2();
            flat /= m;
        }
        let p = run.len() as f64 / total;
        bits += p * (log_volume - p.log2());
    }
    bits
}

/// Equal-width grid of `k^d` cells over the bounding box.
pub fn entropy_naive(samples: &SampleSet, bins_per_dim: usize) -> Result<EntropyEstimate> {
    if bins_per_dim == 0 {
        return Err(Error::InvalidParameter("bins_per_dim must be >= 1".into()));
    }
    let dims = samples.dims();
    let bin_count = grid_bin_count(bins_per_dim, dims)?;
    let bb = samples.bounding_box();
    if let Some(dim) = bb.degenerate_dim() {
        return Err(Error::DegenerateSupport(dim));
    }

    let k = bins_per_dim as f64;
    let slabs: Vec<Vec<usize>> = (0..dims)
        .map(|dim| {
            let (lo, w) = (bb.lower[dim], bb.width(dim));
            (0..samples.len())
                .map(|i| {
                    let cell = ((samples.coord(i, dim) - lo) / w * k).floor() as usize;
                    cell.min(bins_per_dim - 1)
                })
                .collect()
        })
        .collect();
    let widths: Vec<Vec<f64>> = (0..dims)
        .map(|dim| vec![bb.width(dim) / k; bins_per_dim])
        .collect();

    Ok(EntropyEstimate {
        value: grid_entropy(&slabs, &widths, samples.len()),
        method: Method::Naive,
        depth: bins_per_dim,
        bin_count,
        rotation: None,
        degenerate_bins: 0,
    })
}

/// Slab assignment and widths for one marginal cut at the empirical
/// quantiles `j/k`. Zero-width slabs are folded into a neighbour; returns the
/// number folded.
fn equiquantise_marginal(
    samples: &SampleSet,
    dim: usize,
    k: usize,
) -> Result<(Vec<usize>, Vec<f64>, usize)> {
    let n = samples.len();
    let coord = |i: usize| samples.coord(i, dim);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| coord(a).total_cmp(&coord(b)).then(a.cmp(&b)));

    // Slab j holds ranks [starts[j], starts[j+1]), with starts[j] = ceil(jN/k).
    let starts: Vec<usize> = (0..=k).map(|j| (j * n).div_ceil(k)).collect();
    let bb = samples.bounding_box();
    let mut edges = Vec::with_capacity(k + 1);
    edges.push(bb.lower[dim]);
    for &r in &starts[1..k] {
        edges.push(0.5 * coord(order[r - 1]) + 0.5 * coord(order[r]));
    }
    edges.push(bb.upper[dim]);
    let raw_widths: Vec<f64> = edges.windows(2).map(|e| e[1] - e[0]).collect();

    // Fold zero-width slabs into the previous kept slab, or the next one
    // when nothing has been kept yet.
    let mut group_of = vec![0usize; k];
    let mut widths: Vec<f64> = Vec::with_capacity(k);
    let mut pending = Vec::new();
    for (j, &w) in raw_widths.iter().enumerate() {
        if w > 0.0 {
            widths.push(w);
            let g = widths.len() - 1;
            group_of[j] = g;
            for p in pending.drain(..) {
                group_of[p] = g;
            }
        } else if widths.is_empty() {
            pending.push(j);
        } else {
            group_of[j] = widths.len() - 1;
        }
    }
    if widths.is_empty() {
        return Err(Error::DegenerateSupport(dim));
    }
    let merged = k - widths.len();

    let mut slab_of = vec![0usize; n];
    for j in 0..k {
        for &i in &order[starts[j]..starts[j + 1]] {
            slab_of[i] = group_of[j];
        }
    }
    Ok((slab_of, widths, merged))
}

/// Product grid of per-marginal quantile cuts.
pub fn entropy_marginal_equiquantised(
    samples: &SampleSet,
    bins_per_dim: usize,
) -> Result<EntropyEstimate> {
    if bins_per_dim == 0 {
        return Err(Error::InvalidParameter("bins_per_dim must be >= 1".into()));
    }
    let n = samples.len();
    if n < bins_per_dim {
        return Err(Error::InvalidParameter(format!(
            "N = {n} < bins_per_dim = {bins_per_dim}"
        )));
    }
    let dims = samples.dims();
    let bin_count = grid_bin_count(bins_per_dim, dims)?;

    let mut slabs = Vec::with_capacity(dims);
    let mut widths = Vec::with_capacity(dims);
    let mut degenerate_bins = 0;
    for dim in 0..dims {
        let (s, w, merged) = equiquantise_marginal(samples, dim, bins_per_dim)?;
        slabs.push(s);
        widths.push(w);
        degenerate_bins += merged;
    }

    Ok(EntropyEstimate {
        value: grid_entropy(&slabs, &widths, n),
        method: Method::MarginalEquiquantised,
        depth: bins_per_dim,
        bin_count,
        rotation: None,
        degenerate_bins,
    })
}

/// Clips every coordinate to `mean +/- k_sigma * std` of its marginal
/// (unbiased standard deviation).
pub fn winsorise(samples: &SampleSet, k_sigma: f64) -> Result<SampleSet> {
    if !(k_sigma > 0.0) || !k_sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "k_sigma must be positive, got {k_sigma}"
        )));
    }
    let mean = samples.barycentre().to_vec();
    let std = samples.std_devs();
    let (lo, hi): (Vec<f64>, Vec<f64>) = mean
        .iter()
        .zip(&std)
        .map(|(m, s)| (m - k_sigma * s, m + k_sigma * s))
        .unzip();
    samples.map_points(|p, q| {
        for k in 0..p.len() {
            q[k] = p[k].clamp(lo[k], hi[k]);
        }
    })
}

/// Cyclic shifts of `(0..d)`: bisection starting from each dimension.
pub fn cyclic_orders(dims: usize) -> Vec<Vec<usize>> {
    (0..dims)
        .map(|start| (0..dims).map(|k| (start + k) % dims).collect())
        .collect()
}

/// Mean of equiprobable estimates over several cycle orders.
pub fn ensemble_estimate(
    samples: &SampleSet,
    depth: usize,
    orders: &[Vec<usize>],
) -> Result<EntropyEstimate> {
    ensemble_with(samples, depth, orders, None)
}

pub(crate) fn ensemble_with(
    samples: &SampleSet,
    depth: usize,
    orders: &[Vec<usize>],
    rotation: Option<Rotation>,
) -> Result<EntropyEstimate> {
    if orders.is_empty() {
        return Err(Error::InvalidParameter("ensemble needs at least one cycle order".into()));
    }
    let mut sum = 0.0;
    let mut degenerate_bins = 0;
    let mut bin_count = 0;
    for order in orders {
        let e = estimate_equiprobable(samples, depth, order)?;
        sum += e.value;
        degenerate_bins += e.degenerate_bins;
        bin_count = e.bin_count;
    }
    Ok(EntropyEstimate {
        value: sum / orders.len() as f64,
        method: Method::Ensemble,
        depth,
        bin_count,
        rotation,
        degenerate_bins,
    })
}

/// Unrotated equiprobable estimate with the default cycle order.
pub fn entropy_equiprobable_samples(samples: &SampleSet, depth: usize) -> Result<EntropyEstimate> {
    estimate_equiprobable(samples, depth, &default_cycle_order(samples.dims()))
}
