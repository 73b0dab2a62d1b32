//! Search for the partition orientation that minimises the variance of the
//! normalised bin volumes.
//!
//! The objective is piecewise smooth with jumps wherever rotated points cross
//! a median, so no gradients are used. In the plane each of `starts`
//! equispaced angles owns an arc of width `2pi / starts`, which is scanned at
//! `scan_points` angles before golden-section refinement around the best
//! scan point. In three dimensions
//! each start seeds a Nelder-Mead simplex over the MRP vector. Every
//! evaluated point competes for the final answer, so the result is never
//! worse than any start.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{estimate_partition, warn_on_depth, EntropyEstimate, Method};
use crate::geometry::{rotate, Rotation, SampleSet};
use crate::partition::{bin_count, build_equiprobable, default_cycle_order, Partition};

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Number of multi-start points.
    pub starts: usize,
    /// Iteration cap for each local search.
    pub max_iterations: usize,
    /// Stop a local search once it improves the objective by less than this.
    pub tolerance: f64,
    /// Evaluations in the initial scan around each planar start.
    pub scan_points: usize,
    /// Adds the leading sample-covariance eigenvector orientation as a start.
    pub eigen_warm_start: bool,
    /// Bisection order used inside the objective; defaults to `(0..d)`.
    pub cycle_order: Option<Vec<usize>>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            starts: 16,
            max_iterations: 100,
            tolerance: 1e-10,
            scan_points: 64,
            eigen_warm_start: false,
            cycle_order: None,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<()> {
        if self.starts == 0 {
            return Err(Error::InvalidParameter("starts must be >= 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be > 0".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        Ok(())
    }

    fn order(&self, dims: usize) -> Vec<usize> {
        self.cycle_order
            .clone()
            .unwrap_or_else(|| default_cycle_order(dims))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEvaluation {
    pub rotation: Rotation,
    /// Population variance of the normalised bin volumes.
    pub variance: f64,
    pub partition: Option<Partition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationOptimum {
    pub rotation: Rotation,
    pub evaluation: ObjectiveEvaluation,
    /// False if any local search hit `max_iterations`.
    pub converged: bool,
    pub evaluations: usize,
}

/// Population variance of `volumes`, which sum to one.
fn variance_of(volumes: &[f64]) -> f64 {
    let b = volumes.len() as f64;
    let mean = volumes.iter().sum::<f64>() / b;
    volumes.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / b
}

fn objective(samples: &SampleSet, rot: &Rotation, depth: usize, order: &[usize]) -> Result<(f64, Partition)> {
    let rotated = rotate(samples, rot)?;
    let p = build_equiprobable(&rotated, depth, order)?;
    let variance = if p.support().volume() > 0.0 {
        variance_of(&p.volumes(true))
    } else {
        // A flat support is as unequal as the volumes can get.
        let b = p.len() as f64;
        (b - 1.0) / (b * b)
    };
    Ok((variance, p))
}

/// Rotates, partitions and scores one orientation.
pub fn volume_variance(
    samples: &SampleSet,
    rot: &Rotation,
    depth: usize,
    cycle_order: &[usize],
) -> Result<ObjectiveEvaluation> {
    let (variance, p) = objective(samples, rot, depth, cycle_order)?;
    Ok(ObjectiveEvaluation {
        rotation: *rot,
        variance,
        partition: Some(p),
    })
}

/// Planar objective as a function of the angle.
pub fn planar_variance(samples: &SampleSet, theta: f64, depth: usize, cycle_order: &[usize]) -> Result<f64> {
    let rot = Rotation::planar(theta)?;
    objective(samples, &rot, depth, cycle_order).map(|(v, _)| v)
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    key: f64,
    value: f64,
}

impl Candidate {
    /// Lower value wins; exact ties go to the smaller key.
    fn better_than(&self, other: &Candidate) -> bool {
        self.value < other.value || (self.value == other.value && self.key < other.key)
    }
}

struct LocalResult<T> {
    best: T,
    best_value: f64,
    evaluations: usize,
    converged: bool,
}

fn check_preconditions(samples: &SampleSet, depth: usize, config: &OptimizerConfig) -> Result<()> {
    config.validate()?;
    let d = samples.dims();
    if !(2..=3).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    let bins = bin_count(depth, d)?;
    if samples.len() < bins {
        return Err(Error::InsufficientSamples {
            n: samples.len(),
            bins,
            depth,
            dims: d,
        });
    }
    if let Some(order) = &config.cycle_order {
        // surfaces a bad order before any work is done
        build_equiprobable(samples, 0, order)?;
    }
    Ok(())
}

/// Finds the orientation with the smallest bin-volume variance.
pub fn optimise_rotation(
    samples: &SampleSet,
    depth: usize,
    config: &OptimizerConfig,
) -> Result<RotationOptimum> {
    check_preconditions(samples, depth, config)?;
    let order = config.order(samples.dims());
    let rotation = if samples.dims() == 2 {
        let r = optimise_planar(samples, depth, &order, config)?;
        (Rotation::planar(r.best)?, r.evaluations, r.converged)
    } else {
        let r = optimise_spatial(samples, depth, &order, config)?;
        (r.best, r.evaluations, r.converged)
    };
    let (rot, evaluations, converged) = rotation;
    let evaluation = volume_variance(samples, &rot, depth, &order)?;
    Ok(RotationOptimum {
        rotation: rot,
        evaluation,
        converged,
        evaluations,
    })
}

fn leading_eigenvectors(samples: &SampleSet) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::new(samples.covariance())
}

/// Angle that turns the leading covariance eigenvector onto the x axis.
fn planar_warm_start(samples: &SampleSet) -> f64 {
    let eig = leading_eigenvectors(samples);
    let lead = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(lead);
    (-v[1].atan2(v[0])).rem_euclid(TAU) % TAU
}

fn optimise_planar(
    samples: &SampleSet,
    depth: usize,
    order: &[usize],
    config: &OptimizerConfig,
) -> Result<LocalResult<f64>> {
    let step = TAU / config.starts as f64;
    let mut starts: Vec<f64> = (0..config.starts).map(|j| j as f64 * step).collect();
    if config.eigen_warm_start {
        starts.push(planar_warm_start(samples));
    }

    let locals = starts
        .par_iter()
        .map(|&centre| planar_local(samples, depth, order, config, centre, 0.5 * step))
        .collect::<Result<Vec<_>>>()?;

    let mut best = Candidate {
        key: f64::INFINITY,
        value: f64::INFINITY,
    };
    let mut evaluations = 0;
    let mut converged = true;
    for local in locals {
        evaluations += local.evaluations;
        converged &= local.converged;
        let c = Candidate {
            key: local.best,
            value: local.best_value,
        };
        if c.better_than(&best) {
            best = c;
        }
    }
    Ok(LocalResult {
        best: best.key,
        best_value: best.value,
        evaluations,
        converged,
    })
}

/// Scans `[centre - half, centre + half)` then refines the best scan point
/// by golden-section search within one scan spacing either side.
fn planar_local(
    samples: &SampleSet,
    depth: usize,
    order: &[usize],
    config: &OptimizerConfig,
    centre: f64,
    half: f64,
) -> Result<LocalResult<f64>> {
    let wrap = |t: f64| {
        let w = t.rem_euclid(TAU);
        if w >= TAU {
            0.0
        } else {
            w
        }
    };
    let mut evaluations = 0;
    let mut best = Candidate {
        key: f64::INFINITY,
        value: f64::INFINITY,
    };
    let mut eval = |t: f64, best: &mut Candidate| -> Result<f64> {
        let t = wrap(t);
        let v = planar_variance(samples, t, depth, order)?;
        evaluations += 1;
        let c = Candidate { key: t, value: v };
        if c.better_than(best) {
            *best = c;
        }
        Ok(v)
    };

    let at_centre = eval(centre, &mut best)?;
    let scan = config.scan_points.max(1);
    let spacing = 2.0 * half / scan as f64;
    let mut scan_best = (0.0, f64::INFINITY);
    for j in 0..scan {
        let offset = -half + j as f64 * spacing;
        let v = if j * 2 == scan { at_centre } else { eval(centre + offset, &mut best)? };
        if v < scan_best.1 {
            scan_best = (offset, v);
        }
    }

    // Golden-section on the bracket around the best scan offset.
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut a = centre + scan_best.0 - spacing;
    let mut b = centre + scan_best.0 + spacing;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c, &mut best)?;
    let mut fd = eval(d, &mut best)?;
    let mut converged = false;
    let mut last_best = best.value;
    let mut stalls = 0;
    for _ in 0..config.max_iterations {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c, &mut best)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d, &mut best)?;
        }
        if last_best - best.value < config.tolerance {
            stalls += 1;
        } else {
            stalls = 0;
        }
        last_best = best.value;
        // a handful of non-improving steps, or a bracket below angular noise
        if stalls >= 8 || b - a < 1e-9 {
            converged = true;
            break;
        }
    }

    Ok(LocalResult {
        best: best.key,
        best_value: best.value,
        evaluations,
        converged,
    })
}

/// Deterministic start points spread through the unit MRP ball, which
/// covers every rotation up to angle pi. The first start is the identity.
fn spatial_starts(count: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut out = vec![[0.0; 3]];
    let rest = count.saturating_sub(1);
    for j in 0..rest {
        let z = 1.0 - 2.0 * (j as f64 + 0.5) / rest as f64;
        let r = (1.0 - z * z).sqrt();
        let phi = golden * j as f64;
        let radius = ((j + 1) as f64 / rest as f64).cbrt();
        out.push([radius * r * phi.cos(), radius * r * phi.sin(), radius * z]);
    }
    out
}

fn spatial_warm_start(samples: &SampleSet) -> [f64; 3] {
    let eig = leading_eigenvectors(samples);
    let mut cols: Vec<usize> = (0..3).collect();
    cols.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut e = Matrix3::from_fn(|i, j| eig.eigenvectors[(i, cols[j])]);
    if e.determinant() < 0.0 {
        e.column_mut(2).neg_mut();
    }
    // maps each eigenvector onto its coordinate axis
    Rotation::from_matrix(&e.transpose()).mrp()
}

fn optimise_spatial(
    samples: &SampleSet,
    depth: usize,
    order: &[usize],
    config: &OptimizerConfig,
) -> Result<LocalResult<Rotation>> {
    let mut starts = spatial_starts(config.starts);
    if config.eigen_warm_start {
        starts.push(spatial_warm_start(samples));
    }
    let locals = starts
        .par_iter()
        .map(|s| nelder_mead(samples, depth, order, config, *s))
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<(Rotation, f64)> = None;
    let mut evaluations = 0;
    let mut converged = true;
    for local in locals {
        evaluations += local.evaluations;
        converged &= local.converged;
        let better = match best {
            None => true,
            Some((r, v)) => {
                local.best_value < v
                    || (local.best_value == v && local.best.angle() < r.angle())
            }
        };
        if better {
            best = Some((local.best, local.best_value));
        }
    }
    let (rot, value) = best.expect("at least one start");
    Ok(LocalResult {
        best: rot,
        best_value: value,
        evaluations,
        converged,
    })
}

fn nelder_mead(
    samples: &SampleSet,
    depth: usize,
    order: &[usize],
    config: &OptimizerConfig,
    start: [f64; 3],
) -> Result<LocalResult<Rotation>> {
    let mut evaluations = 0;
    let mut f = |x: &[f64; 3]| -> Result<f64> {
        evaluations += 1;
        let rot = Rotation::from_mrp(*x)?.canonical();
        objective(samples, &rot, depth, order).map(|(v, _)| v)
    };

    let step = 0.15;
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    simplex.push((start, f(&start)?));
    for k in 0..3 {
        let mut x = start;
        x[k] += step;
        simplex.push((x, f(&x)?));
    }

    let combine = |a: &[f64; 3], b: &[f64; 3], t: f64| -> [f64; 3] {
        [
            a[0] + t * (b[0] - a[0]),
            a[1] + t * (b[1] - a[1]),
            a[2] + t * (b[2] - a[2]),
        ]
    };

    let mut converged = false;
    for _ in 0..config.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[3].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread < config.tolerance && size < 1e-6 {
            converged = true;
            break;
        }

        let mut centroid = [0.0; 3];
        for (x, _) in &simplex[..3] {
            for k in 0..3 {
                centroid[k] += x[k] / 3.0;
            }
        }
        let worst = simplex[3];
        let reflected = combine(&centroid, &worst.0, -1.0);
        let fr = f(&reflected)?;
        if fr < simplex[0].1 {
            let expanded = combine(&centroid, &worst.0, -2.0);
            let fe = f(&expanded)?;
            simplex[3] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (reflected, fr);
        } else {
            let (target, ft) = if fr < worst.1 { (reflected, fr) } else { worst };
            let contracted = combine(&centroid, &target, 0.5);
            let fc = f(&contracted)?;
            if fc < ft {
                simplex[3] = (contracted, fc);
            } else {
                let best = simplex[0].0;
                for entry in simplex.iter_mut().skip(1) {
                    let x = combine(&best, &entry.0, 0.5);
                    *entry = (x, f(&x)?);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex[0];
    Ok(LocalResult {
        best: Rotation::from_mrp(x)?.canonical(),
        best_value: v,
        evaluations,
        converged,
    })
}

/// Rotated-equiprobable entropy: optimise the orientation, then estimate on
/// the partition of the rotated sample.
pub fn entropy_rotated(
    samples: &SampleSet,
    depth: usize,
    config: &OptimizerConfig,
) -> Result<EntropyEstimate> {
    warn_on_depth(depth, samples.dims());
    let opt = optimise_rotation(samples, depth, config)?;
    let p = opt
        .evaluation
        .partition
        .as_ref()
        .expect("optimum carries its partition");
    estimate_partition(p, Method::RotatedEquiprobable, Some(opt.rotation))
}
