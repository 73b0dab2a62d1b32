//! Equiprobable k-d tree partitions built by recursive marginal-median
//! bisection.
//!
//! Every recursion level bisects every dimension once, in `cycle_order`, so a
//! partition of depth `s` over `d` dimensions has `2^(s*d)` leaves. Cells are
//! split at the midpoint of the two order statistics straddling the median,
//! and the lower child takes the larger half when a cell has an odd count.
//! Ties are ranked by input index, which makes the split sets deterministic.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, SampleSet};

/// Largest `s*d` accepted; `2^40` leaves is already far beyond any sample.
pub const MAX_LEVELS: usize = 40;

/// A leaf cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub bounds: BoundingBox,
    pub count: usize,
    pub volume: f64,
}

/// An internal node of the tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPlane {
    pub dim: usize,
    pub coordinate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    bins: Vec<Bin>,
    splits: Vec<SplitPlane>,
    depth: usize,
    cycle_order: Vec<usize>,
    support: BoundingBox,
    n: usize,
}

/// Result of [`median_split`] on a plain coordinate list.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianSplit {
    /// Indices into the input, in ascending rank.
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub coordinate: f64,
}

/// Splits `values` at their median: the lower `ceil(m/2)` ranks go left.
pub fn median_split(values: &[f64]) -> Result<MedianSplit> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let (k, coordinate) = median_split_in_place(&mut idx, |i| values[i])?;
    let mut left = idx[..k].to_vec();
    let mut right = idx[k..].to_vec();
    let by_rank = |a: &usize, b: &usize| rank_cmp(values[*a], *a, values[*b], *b);
    left.sort_by(by_rank);
    right.sort_by(by_rank);
    Ok(MedianSplit {
        left,
        right,
        coordinate,
    })
}

#[inline]
fn rank_cmp(xa: f64, a: usize, xb: f64, b: usize) -> Ordering {
    xa.total_cmp(&xb).then(a.cmp(&b))
}

/// Reorders `idx` so that its first `k = ceil(m/2)` entries are the lowest
/// ranked by `coord`, and returns `k` with the split coordinate.
pub fn median_split_in_place<F>(idx: &mut [usize], coord: F) -> Result<(usize, f64)>
where
    F: Fn(usize) -> f64,
{
    let m = idx.len();
    if m < 2 {
        return Err(Error::SplitTooSmall(m));
    }
    let k = m.div_ceil(2);
    idx.select_nth_unstable_by(k - 1, |&a, &b| rank_cmp(coord(a), a, coord(b), b));
    let below = coord(idx[k - 1]);
    let above = idx[k..]
        .iter()
        .map(|&i| coord(i))
        .fold(f64::INFINITY, f64::min);
    Ok((k, 0.5 * below + 0.5 * above))
}

/// `(0, 1, ..., d-1)`.
pub fn default_cycle_order(dims: usize) -> Vec<usize> {
    (0..dims).collect()
}

fn validate_cycle_order(order: &[usize], dims: usize) -> Result<()> {
    let mut seen = vec![false; dims];
    let ok = order.len() == dims
        && order.iter().all(|&k| {
            let fresh = k < dims && !seen[k];
            if fresh {
                seen[k] = true;
            }
            fresh
        });
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidCycleOrder {
            order: order.to_vec(),
            dims,
        })
    }
}

/// `2^(depth*dims)`, or an error if that would not fit.
pub fn bin_count(depth: usize, dims: usize) -> Result<usize> {
    let levels = depth
        .checked_mul(dims)
        .filter(|&l| l <= MAX_LEVELS)
        .ok_or(Error::DepthTooLarge { depth, dims })?;
    Ok(1usize << levels)
}

struct Cell {
    start: usize,
    end: usize,
    bounds: BoundingBox,
}

/// Builds the equiprobable partition of `samples` to `depth` levels.
pub fn build_equiprobable(
    samples: &SampleSet,
    depth: usize,
    cycle_order: &[usize],
) -> Result<Partition> {
    let dims = samples.dims();
    validate_cycle_order(cycle_order, dims)?;
    let bins = bin_count(depth, dims)?;
    let n = samples.len();
    if n < bins {
        return Err(Error::InsufficientSamples {
            n,
            bins,
            depth,
            dims,
        });
    }

    let support = samples.bounding_box().clone();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut cells = vec![Cell {
        start: 0,
        end: n,
        bounds: support.clone(),
    }];
    let mut splits = Vec::with_capacity(bins - 1);

    // Breadth-first, so `splits` ends up in heap order and the final cells
    // are the leaves from left to right.
    for level in 0..depth * dims {
        let dim = cycle_order[level % dims];
        let mut next = Vec::with_capacity(cells.len() * 2);
        for cell in cells {
            let (k, coordinate) =
                median_split_in_place(&mut idx[cell.start..cell.end], |i| samples.coord(i, dim))?;
            splits.push(SplitPlane { dim, coordinate });

            let mut lower = cell.bounds.clone();
            lower.upper[dim] = coordinate;
            let mut upper = cell.bounds;
            upper.lower[dim] = coordinate;
            next.push(Cell {
                start: cell.start,
                end: cell.start + k,
                bounds: lower,
            });
            next.push(Cell {
                start: cell.start + k,
                end: cell.end,
                bounds: upper,
            });
        }
        cells = next;
    }

    let bins = cells
        .into_iter()
        .map(|c| Bin {
            volume: c.bounds.volume(),
            count: c.end - c.start,
            bounds: c.bounds,
        })
        .collect();
    Ok(Partition {
        bins,
        splits,
        depth,
        cycle_order: cycle_order.to_vec(),
        support,
        n,
    })
}

impl Partition {
    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dims(&self) -> usize {
        self.support.dims()
    }

    pub fn cycle_order(&self) -> &[usize] {
        &self.cycle_order
    }

    pub fn support(&self) -> &BoundingBox {
        &self.support
    }

    /// Internal split planes in heap order: node `i` has children `2i+1` and
    /// `2i+2`, and leaf `j` is heap node `B - 1 + j`.
    pub fn splits(&self) -> &[SplitPlane] {
        &self.splits
    }

    pub fn sample_count(&self) -> usize {
        self.n
    }

    pub fn counts(&self) -> Vec<usize> {
        self.bins.iter().map(|b| b.count).collect()
    }

    /// Bin volumes, optionally divided by the support volume so they sum to
    /// one. A zero-volume support normalises to all zeros.
    pub fn volumes(&self, normalize: bool) -> Vec<f64> {
        let raw = self.bins.iter().map(|b| b.volume);
        if !normalize {
            return raw.collect();
        }
        let total = self.support.volume();
        if total > 0.0 {
            raw.map(|v| v / total).collect()
        } else {
            vec![0.0; self.bins.len()]
        }
    }

    pub fn zero_volume_bins(&self) -> usize {
        self.bins.iter().filter(|b| b.volume <= 0.0).count()
    }

    /// Leaf index for `point`, descending through the split planes with
    /// closed-open cells (`x < c` goes to the lower child).
    ///
    /// For points lying exactly on a split plane (only possible with tied
    /// coordinates) this can disagree with the rank-based counts.
    pub fn locate(&self, point: &[f64]) -> usize {
        let mut node = 0;
        while node < self.splits.len() {
            let s = self.splits[node];
            node = if point[s.dim] < s.coordinate {
                2 * node + 1
            } else {
                2 * node + 2
            };
        }
        node - self.splits.len()
    }
}

/// Free-function form of [`Partition::volumes`].
pub fn bin_volumes(p: &Partition, normalize: bool) -> Vec<f64> {
    p.volumes(normalize)
}
