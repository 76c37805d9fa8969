//! Shared value types: point clouds, directions, index vectors.
//!
//! Everything here is an immutable value type. Constructors validate their
//! invariants so downstream algorithms can assume them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the norm of a [`UnitVector`].
pub const UNIT_NORM_TOL: f64 = 1e-12;
/// Relative tolerance (w.r.t. the largest singular value) of the rank test.
pub const RANK_TOL: f64 = 1e-10;
/// Default residual tolerance of the quantile solver.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Numerical tolerances shared across modules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub unit_norm: f64,
    pub rank: f64,
    pub residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            unit_norm: UNIT_NORM_TOL,
            rank: RANK_TOL,
            residual: RESIDUAL_TOL,
        }
    }
}

/// An `n x d` sample standing in for the distribution of `X`.
///
/// Points are stored row-major. The cloud is validated on construction:
/// every coordinate is finite, `d >= 2`, and the centered sample has affine
/// rank at least two (the empirical version of "not supported on a line").
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl PointCloud {
    /// Validates rows of equal length and builds a cloud.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::Parse(format!(
                "row {bad} has {} columns, expected {d}",
                rows[bad].len()
            )));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::from_flat(data, d)
    }

    /// Builds a cloud from row-major data with `d` columns.
    pub fn from_flat(data: Vec<f64>, d: usize) -> Result<Self> {
        Self::from_flat_with_tol(data, d, RANK_TOL)
    }

    pub fn from_flat_with_tol(data: Vec<f64>, d: usize, rank_tol: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::DimensionMismatch {
                got: d,
                expected: ">= 2".into(),
            });
        }
        if data.len() % d != 0 {
            return Err(Error::Parse(format!(
                "{} values do not split into rows of {d}",
                data.len()
            )));
        }
        let n = data.len() / d;
        if n < 3 {
            return Err(Error::TooFewPoints { got: n, need: 3 });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: pos / d });
        }
        let cloud = PointCloud { data, n, d };
        let rank = cloud.affine_rank(rank_tol);
        if rank <= 1 {
            return Err(Error::DegenerateSupport { rank });
        }
        Ok(cloud)
    }

    /// Affine rank of the sample: the number of singular values of the
    /// centered data matrix above `rel_tol` times the largest one.
    pub fn affine_rank(&self, rel_tol: f64) -> usize {
        let mean = self.mean();
        let centered = DMatrix::from_fn(self.n, self.d, |i, j| self.point(i)[j] - mean[j]);
        let sv = if self.n > self.d {
            // Singular values of R match those of the tall matrix.
            centered.qr().r().singular_values()
        } else {
            centered.singular_values()
        };
        let max = sv.iter().cloned().fold(0.0_f64, f64::max);
        if max == 0.0 {
            return 0;
        }
        sv.iter().filter(|&&s| s > rel_tol * max).count()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// The `i`-th sample point.
    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    /// Row-major coordinate buffer.
    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.points().map(|p| p.to_vec()).collect()
    }

    /// Sample mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for p in self.points() {
            for (acc, v) in m.iter_mut().zip(p) {
                *acc += v;
            }
        }
        let n = self.n as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Coordinate-wise median (lower median for even `n`).
    pub fn coordinate_median(&self) -> Vec<f64> {
        (0..self.d)
            .map(|j| {
                let mut col: Vec<f64> = self.points().map(|p| p[j]).collect();
                let mid = (col.len() - 1) / 2;
                let (_, m, _) = col.select_nth_unstable_by(mid, f64::total_cmp);
                *m
            })
            .collect()
    }

    /// Euclidean norms of all points.
    pub fn norms(&self) -> Vec<f64> {
        self.points().map(norm).collect()
    }

    /// Applies `x -> m x + t` to every point (m given row-major, `d x d`).
    pub fn affine_image(&self, m: &[f64], t: &[f64]) -> Result<PointCloud> {
        let d = self.d;
        let mut out = Vec::with_capacity(self.data.len());
        for p in self.points() {
            for r in 0..d {
                out.push(dot(&m[r * d..(r + 1) * d], p) + t[r]);
            }
        }
        PointCloud::from_flat(out, d)
    }
}

/// A direction on the unit sphere.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Normalizes `v`; fails on the zero vector or non-finite input.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row: 0 });
        }
        let nrm = norm(&v);
        if nrm == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(UnitVector(v.into_iter().map(|x| x / nrm).collect()))
    }

    /// The `k`-th standard basis vector of `R^d`.
    pub fn axis(d: usize, k: usize) -> Self {
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        UnitVector(v)
    }

    /// Direction at angle `phi` in the plane.
    pub fn from_angle(phi: f64) -> Self {
        UnitVector(vec![phi.cos(), phi.sin()])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn neg(&self) -> Self {
        UnitVector(self.0.iter().map(|x| -x).collect())
    }
}

impl AsRef<[f64]> for UnitVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl<'de> Deserialize<'de> for UnitVector {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(de)?;
        UnitVector::new(v).map_err(serde::de::Error::custom)
    }
}

/// The index vector `alpha * u` with `0 <= alpha < 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexVector {
    alpha: f64,
    direction: UnitVector,
}

impl IndexVector {
    pub fn new(alpha: f64, direction: UnitVector) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in [0, 1), got {alpha}"
            )));
        }
        Ok(IndexVector { alpha, direction })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn direction(&self) -> &UnitVector {
        &self.direction
    }

    /// `alpha * u` as a plain vector.
    pub fn vector(&self) -> Vec<f64> {
        self.direction.0.iter().map(|x| self.alpha * x).collect()
    }
}

/// A point of `R^d` with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row: 0 });
        }
        Ok(Point(coords))
    }

    pub fn origin(d: usize) -> Self {
        Point(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(de)?;
        Point::new(v).map_err(serde::de::Error::custom)
    }
}

/// How a [`GammaConstant`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaMethod {
    AnalyticRotinv,
    MonteCarlo,
}

/// The cap-mass constant `M_gamma` together with its `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaConstant {
    pub gamma: f64,
    pub m_gamma: f64,
    pub method: GammaMethod,
}

impl GammaConstant {
    pub fn new(gamma: f64, m_gamma: f64, method: GammaMethod) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must lie in (0, 1), got {gamma}"
            )));
        }
        if !(m_gamma > 0.0 && m_gamma < 1.0 && m_gamma <= 1.0 - gamma) {
            return Err(Error::InvalidParameter(format!(
                "M_gamma = {m_gamma} outside (0, 1 - gamma]"
            )));
        }
        Ok(GammaConstant {
            gamma,
            m_gamma,
            method,
        })
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
