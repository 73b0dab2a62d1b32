//! Sample containers and rigid rotations of sample frames about their
//! barycentre, parameterised by Modified Rodrigues Parameters (MRP).
//!
//! An MRP is a three-vector along the rotation axis with magnitude
//! `tan(theta / 4)`. In the plane only the z component is used.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned closed box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidParameter(
                "bounding box needs lower <= upper in every dimension".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, dim: usize) -> f64 {
        self.upper[dim] - self.lower[dim]
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l)
    }

    pub fn volume(&self) -> f64 {
        self.widths().product()
    }

    /// Closed containment test.
    pub fn contains(&self, point: &[f64]) -> bool {
        point
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (l, u))| l <= x && x <= u)
    }

    /// Index of the first dimension with zero width, if any.
    pub fn degenerate_dim(&self) -> Option<usize> {
        self.widths().position(|w| w <= 0.0)
    }
}

/// N observations of a d-dimensional variable, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    data: Vec<f64>,
    dims: usize,
    barycentre: Vec<f64>,
    bounds: BoundingBox,
}

impl SampleSet {
    /// Builds a sample set from row-major `data` with `dims` columns.
    pub fn new(data: Vec<f64>, dims: usize) -> Result<Self> {
        if dims == 0 {
            return Err(Error::ZeroDimensions);
        }
        if data.len() % dims != 0 {
            return Err(Error::RaggedRow {
                row: data.len() / dims,
                got: data.len() % dims,
                expected: dims,
            });
        }
        let n = data.len() / dims;
        if n < 2 {
            return Err(Error::TooFewSamples(n));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dims,
                col: pos % dims,
            });
        }

        let mut lower = vec![f64::INFINITY; dims];
        let mut upper = vec![f64::NEG_INFINITY; dims];
        for row in data.chunks_exact(dims) {
            for (k, &x) in row.iter().enumerate() {
                lower[k] = lower[k].min(x);
                upper[k] = upper[k].max(x);
            }
        }
        let barycentre = column_means(&data, dims);
        Ok(Self {
            data,
            dims,
            barycentre,
            bounds: BoundingBox { lower, upper },
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dims = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dims);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dims {
                return Err(Error::RaggedRow {
                    row: i,
                    got: row.len(),
                    expected: dims,
                });
            }
            data.extend_from_slice(row);
        }
        if rows.len() < 2 {
            return Err(Error::TooFewSamples(rows.len()));
        }
        Self::new(data, dims)
    }

    /// Converts an N×d matrix (one observation per row).
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let dims = m.ncols();
        let mut data = Vec::with_capacity(m.len());
        for row in m.row_iter() {
            data.extend(row.iter().copied());
        }
        Self::new(data, dims)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    #[inline]
    pub fn coord(&self, i: usize, dim: usize) -> f64 {
        self.data[i * self.dims + dim]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dims)
    }

    pub fn barycentre(&self) -> &[f64] {
        &self.barycentre
    }

    pub fn bounding_box(&self) -> &BoundingBox {
        &self.bounds
    }

    /// Applies `f` to every row, producing a new sample set.
    pub fn map_points<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let mut out = vec![0.0; self.data.len()];
        for (src, dst) in self.points().zip(out.chunks_exact_mut(self.dims)) {
            f(src, dst);
        }
        Self::new(out, self.dims)
    }

    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        self.check_dims(shift.len())?;
        self.map_points(|p, q| {
            for ((q, x), s) in q.iter_mut().zip(p).zip(shift) {
                *q = x + s;
            }
        })
    }

    pub fn scaled(&self, factors: &[f64]) -> Result<Self> {
        self.check_dims(factors.len())?;
        self.map_points(|p, q| {
            for ((q, x), a) in q.iter_mut().zip(p).zip(factors) {
                *q = x * a;
            }
        })
    }

    /// Unbiased (n - 1) sample covariance.
    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.dims;
        let mut cov = DMatrix::zeros(d, d);
        for p in self.points() {
            for a in 0..d {
                let da = p[a] - self.barycentre[a];
                for b in a..d {
                    cov[(a, b)] += da * (p[b] - self.barycentre[b]);
                }
            }
        }
        let denom = (self.len() - 1) as f64;
        for a in 0..d {
            for b in a..d {
                cov[(a, b)] /= denom;
                cov[(b, a)] = cov[(a, b)];
            }
        }
        cov
    }

    /// Per-dimension unbiased standard deviation.
    pub fn std_devs(&self) -> Vec<f64> {
        let cov = self.covariance();
        (0..self.dims).map(|k| cov[(k, k)].sqrt()).collect()
    }

    fn check_dims(&self, got: usize) -> Result<()> {
        if got != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                got,
            });
        }
        Ok(())
    }
}

fn column_means(data: &[f64], dims: usize) -> Vec<f64> {
    let n = (data.len() / dims) as f64;
    let mut sums = vec![0.0; dims];
    for row in data.chunks_exact(dims) {
        for (s, x) in sums.iter_mut().zip(row) {
            *s += x;
        }
    }
    sums.into_iter().map(|s| s / n).collect()
}

/// A rotation encoded as Modified Rodrigues Parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    mrp: [f64; 3],
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub const fn identity() -> Self {
        Self { mrp: [0.0; 3] }
    }

    /// Wraps an MRP vector. Any finite vector encodes a rotation.
    pub fn from_mrp(mrp: [f64; 3]) -> Result<Self> {
        if mrp.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "MRP components must be finite, got {mrp:?}"
            )));
        }
        Ok(Self { mrp })
    }

    /// Planar rotation about z by `theta`, which must lie in `[0, 2pi)`.
    pub fn from_angle_2d(theta: f64) -> Result<Self> {
        if !(0.0..TAU).contains(&theta) {
            return Err(Error::AngleOutOfRange(theta));
        }
        Ok(Self {
            mrp: [0.0, 0.0, (theta / 4.0).tan()],
        })
    }

    /// Planar rotation with `theta` reduced modulo 2pi first.
    pub fn planar(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::AngleOutOfRange(theta));
        }
        let mut t = theta.rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU for tiny negative inputs
        if t >= TAU {
            t = 0.0;
        }
        Self::from_angle_2d(t)
    }

    /// Converts an orthogonal matrix with determinant +1.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*m));
        let (w, v) = if q.w < 0.0 {
            (-q.w, -q.imag())
        } else {
            (q.w, q.imag())
        };
        let denom = 1.0 + w;
        Self {
            mrp: [v.x / denom, v.y / denom, v.z / denom],
        }
    }

    pub fn mrp(&self) -> [f64; 3] {
        self.mrp
    }

    pub fn norm(&self) -> f64 {
        self.mrp.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Unsigned rotation angle `4 atan |R|`, in `[0, 2pi)`.
    pub fn angle(&self) -> f64 {
        4.0 * self.norm().atan()
    }

    pub fn is_planar(&self) -> bool {
        self.mrp[0] == 0.0 && self.mrp[1] == 0.0
    }

    /// Signed planar angle reduced to `[0, 2pi)`.
    pub fn planar_angle(&self) -> Result<f64> {
        if !self.is_planar() {
            return Err(Error::NonPlanarRotation(self.mrp));
        }
        let t = (4.0 * self.mrp[2].atan()).rem_euclid(TAU);
        Ok(if t >= TAU { 0.0 } else { t })
    }

    /// The equivalent MRP with norm at most 1 (rotation angle at most pi).
    pub fn canonical(&self) -> Self {
        let sq: f64 = self.mrp.iter().map(|x| x * x).sum();
        if sq <= 1.0 {
            *self
        } else {
            Self {
                mrp: self.mrp.map(|x| -x / sq),
            }
        }
    }

    fn matrix3(&self) -> Matrix3<f64> {
        let s = Vector3::from(self.mrp);
        let sq = s.norm_squared();
        let cross = s.cross_matrix();
        let denom = (1.0 + sq) * (1.0 + sq);
        Matrix3::identity() + (cross * cross * 8.0 + cross * (4.0 * (1.0 - sq))) / denom
    }

    /// Active rotation matrix for `d`-dimensional points.
    pub fn matrix(&self, d: usize) -> Result<DMatrix<f64>> {
        match d {
            2 => {
                let theta = self.planar_angle()?;
                let (s, c) = theta.sin_cos();
                Ok(DMatrix::from_row_slice(2, 2, &[c, -s, s, c]))
            }
            3 => {
                let m = self.matrix3();
                Ok(DMatrix::from_fn(3, 3, |i, j| m[(i, j)]))
            }
            _ => Err(Error::UnsupportedDimension(d)),
        }
    }
}

/// Free-function form of [`Rotation::from_angle_2d`].
pub fn mrp_from_angle_2d(theta: f64) -> Result<Rotation> {
    Rotation::from_angle_2d(theta)
}

/// Free-function form of [`Rotation::matrix`].
pub fn rotation_matrix(rot: &Rotation, d: usize) -> Result<DMatrix<f64>> {
    rot.matrix(d)
}

/// Translates the barycentre to the origin and applies `rot` to every row.
///
/// The result stays centred at the origin. One-dimensional samples are only
/// centred.
pub fn rotate(samples: &SampleSet, rot: &Rotation) -> Result<SampleSet> {
    let d = samples.dims();
    let centre = samples.barycentre().to_vec();
    if d == 1 {
        return samples.map_points(|p, q| q[0] = p[0] - centre[0]);
    }
    if d > 3 {
        return Err(Error::UnsupportedDimension(d));
    }
    let m = rot.matrix(d)?;
    let mut shifted = vec![0.0; d];
    samples.map_points(|p, q| {
        for k in 0..d {
            shifted[k] = p[k] - centre[k];
        }
        for (i, qi) in q.iter_mut().enumerate() {
            *qi = (0..d).map(|j| m[(i, j)] * shifted[j]).sum();
        }
    })
}
