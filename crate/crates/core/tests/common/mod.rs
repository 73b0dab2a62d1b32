//! Data generators and brute-force oracles shared by the integration tests.
//! Nothing here calls into the code paths it is used to check.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use eqpart::{planar_variance, BoundingBox, SampleSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `Y = X + N(0, 0.5)`, `X ~ N(0, 1)`.
pub fn linear_sample(seed: u64, n: usize) -> SampleSet {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let rows: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            let x: f64 = r.sample(StandardNormal);
            [x, x + noise.sample(&mut r)]
        })
        .collect();
    SampleSet::from_rows(&rows).unwrap()
}

/// `Y = X^2 + N(0, 0.5)`, `X ~ N(0, 1)`.
pub fn parabola_sample(seed: u64, n: usize) -> SampleSet {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let rows: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            let x: f64 = r.sample(StandardNormal);
            [x, x * x + noise.sample(&mut r)]
        })
        .collect();
    SampleSet::from_rows(&rows).unwrap()
}

pub fn gaussian_sample(seed: u64, n: usize, d: usize) -> SampleSet {
    let mut r = rng(seed);
    let data: Vec<f64> = (0..n * d).map(|_| r.sample(StandardNormal)).collect();
    SampleSet::new(data, d).unwrap()
}

pub fn uniform_sample(seed: u64, n: usize, d: usize) -> SampleSet {
    let mut r = rng(seed);
    let data: Vec<f64> = (0..n * d).map(|_| r.random::<f64>()).collect();
    SampleSet::new(data, d).unwrap()
}

/// `k x k` lattice spanning the unit square, corners included.
pub fn lattice(k: usize) -> SampleSet {
    let step = 1.0 / (k - 1) as f64;
    let mut rows = Vec::new();
    for i in 0..k {
        for j in 0..k {
            rows.push([i as f64 * step, j as f64 * step]);
        }
    }
    SampleSet::from_rows(&rows).unwrap()
}

/// Closed-open box membership, with the support's upper faces closed.
pub fn in_leaf(point: &[f64], leaf: &BoundingBox, support: &BoundingBox) -> bool {
    point.iter().enumerate().all(|(k, &x)| {
        let lo = leaf.lower[k];
        let hi = leaf.upper[k];
        x >= lo && (x < hi || (hi == support.upper[k] && x <= hi))
    })
}

/// Counts per leaf by testing every point against every leaf box.
pub fn brute_force_counts(points: &SampleSet, leaves: &[BoundingBox], support: &BoundingBox) -> Vec<usize> {
    let mut counts = vec![0; leaves.len()];
    for p in points.points() {
        let hits: Vec<usize> = (0..leaves.len())
            .filter(|&j| in_leaf(p, &leaves[j], support))
            .collect();
        assert_eq!(hits.len(), 1, "point {p:?} is in {} leaves", hits.len());
        counts[hits[0]] += 1;
    }
    counts
}

/// Equal-width gridding by explicit cell enumeration: for each of the
/// `k^d` cells, count the points inside it.
pub fn brute_force_naive(samples: &SampleSet, k: usize) -> f64 {
    let d = samples.dims();
    let bb = samples.bounding_box();
    let widths: Vec<f64> = (0..d).map(|a| bb.width(a) / k as f64).collect();
    let volume: f64 = widths.iter().product();
    let n = samples.len() as f64;
    let mut h = 0.0;
    let cells = k.pow(d as u32);
    for cell in 0..cells {
        let mut idx = vec![0; d];
        let mut c = cell;
        for a in (0..d).rev() {
            idx[a] = c % k;
            c /= k;
        }
        let count = samples
            .points()
            .filter(|p| {
                (0..d).all(|a| {
                    let lo = bb.lower[a] + idx[a] as f64 * widths[a];
                    let hi = bb.lower[a] + (idx[a] + 1) as f64 * widths[a];
                    let last = idx[a] == k - 1;
                    p[a] >= lo && (p[a] < hi || (last && p[a] <= bb.upper[a]))
                })
            })
            .count();
        if count > 0 {
            let p = count as f64 / n;
            h -= p * (p / volume).log2();
        }
    }
    h
}

/// Planar objective on an `m`-point uniform angle grid.
pub fn grid_values(samples: &SampleSet, depth: usize, m: usize) -> Vec<(f64, f64)> {
    (0..m)
        .map(|j| {
            let t = TAU * j as f64 / m as f64;
            (t, planar_variance(samples, t, depth, &[0, 1]).unwrap())
        })
        .collect()
}

pub fn grid_min(samples: &SampleSet, depth: usize, m: usize) -> f64 {
    grid_values(samples, depth, m)
        .into_iter()
        .map(|(_, v)| v)
        .fold(f64::INFINITY, f64::min)
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(x: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
        let mut r = vec![0.0; x.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Multiset of values, for comparisons that ignore order.
pub fn multiset(counts: &[usize]) -> BTreeMap<usize, usize> {
    let mut m = BTreeMap::new();
    for &c in counts {
        *m.entry(c).or_insert(0) += 1;
    }
    m
}
