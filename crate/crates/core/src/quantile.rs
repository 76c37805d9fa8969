//! Empirical geometric (spatial) quantiles.
//!
//! For an index vector `alpha * u` the quantile `q` minimizes
//!
//! ```text
//! f(q) = (1/n) sum_i (|x_i - q| - |x_i|) - alpha <u, q>
//! ```
//!
//! and, away from sample points, is characterized by the sign-vector
//! equation `(1/n) sum_i (x_i - q)/|x_i - q| = -alpha u`. The solver drives
//! the residual `|mean_u + alpha u|` below tolerance.
//!
//! Two iterations are available. [`SolverMethod::Weiszfeld`] is the modified
//! Weiszfeld fixed point
//!
//! ```text
//! q+ = (sum_i x_i / r_i + n alpha u) / (sum_i 1 / r_i),   r_i = |x_i - q|
//! ```
//!
//! with damping that halves on objective increase. It contracts at a rate
//! close to one for extreme `alpha`, so the default
//! [`SolverMethod::Newton`] takes safeguarded Newton steps on the same
//! objective and falls back to the damped Weiszfeld step whenever the line
//! search cannot make progress.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::types::{dist, dot, norm, IndexVector, Point, PointCloud, UnitVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    /// Damped Newton with Weiszfeld fallback.
    #[default]
    Newton,
    /// Pure (damped) Weiszfeld fixed-point iteration.
    Weiszfeld,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub residual_tol: f64,
    /// Initial Weiszfeld damping in `(0, 1]`.
    pub damping: f64,
    /// Distance below which an iterate is considered to sit on a sample point.
    pub singular_eps: f64,
    pub method: SolverMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 10_000,
            residual_tol: 1e-8,
            damping: 1.0,
            singular_eps: 1e-12,
            method: SolverMethod::Newton,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidParameter("residual_tol must be > 0".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter("damping must lie in (0, 1]".into()));
        }
        if !(self.singular_eps >= 0.0) {
            return Err(Error::InvalidParameter("singular_eps must be >= 0".into()));
        }
        Ok(())
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.residual_tol = tol;
        self
    }
}

/// Lower bound on the Weiszfeld damping after repeated halving.
const DAMPING_FLOOR: f64 = 0.1;
/// Armijo sufficient-decrease constant.
const ARMIJO: f64 = 1e-4;
/// Number of perturbations off non-optimal atoms before giving up.
const MAX_ATOM_ESCAPES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIters,
    AtomHit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub q: Point,
    pub residual: f64,
    pub iters: usize,
    pub status: SolveStatus,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// Mean of the unit vectors `(x_i - q)/|x_i - q|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignVectorStats {
    pub mean_u: Vec<f64>,
    pub norm_mean_u: f64,
}

/// Evaluates `f_{alpha u}(q)`.
pub fn objective(cloud: &PointCloud, index: &IndexVector, q: &[f64]) -> f64 {
    let n = cloud.n();
    let s = par::sum(n, |i| {
        let x = cloud.point(i);
        dist(x, q) - norm(x)
    });
    s / n as f64 - index.alpha() * dot(index.direction().as_slice(), q)
}

/// Computes `(1/n) sum_i (x_i - q)/|x_i - q|`.
///
/// Fails with [`Error::AtomHit`] when `q` lies within `singular_eps` of a
/// sample point, where the sign vector is undefined.
pub fn sign_expectation(cloud: &PointCloud, q: &[f64], singular_eps: f64) -> Result<SignVectorStats> {
    let d = cloud.dim();
    check_dim(cloud, q.len())?;
    let (sum, atom) = par::fold_chunks(
        cloud.n(),
        || (vec![0.0; d], None::<usize>),
        |(acc, atom), i| {
            let x = cloud.point(i);
            let r = dist(x, q);
            if r <= singular_eps {
                atom.get_or_insert(i);
                return;
            }
            for k in 0..d {
                acc[k] += (x[k] - q[k]) / r;
            }
        },
        |(a, atom_a), (b, atom_b)| {
            a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            if atom_a.is_none() {
                *atom_a = atom_b;
            }
        },
    );
    if let Some(index) = atom {
        return Err(Error::AtomHit {
            q: q.to_vec(),
            index,
        });
    }
    let n = cloud.n() as f64;
    let mean_u: Vec<f64> = sum.into_iter().map(|v| v / n).collect();
    let norm_mean_u = norm(&mean_u).min(1.0);
    Ok(SignVectorStats {
        mean_u,
        norm_mean_u,
    })
}

/// Sign-vector mean with the sample points coinciding with `q` left out
/// (their subgradient contribution is the ball of radius `1/n` each).
pub(crate) fn sign_expectation_excluding_atoms(
    cloud: &PointCloud,
    q: &[f64],
    singular_eps: f64,
) -> (Vec<f64>, usize) {
    let d = cloud.dim();
    let (sum, atoms) = par::fold_chunks(
        cloud.n(),
        || (vec![0.0; d], 0usize),
        |(acc, atoms), i| {
            let x = cloud.point(i);
            let r = dist(x, q);
            if r <= singular_eps {
                *atoms += 1;
                return;
            }
            for k in 0..d {
                acc[k] += (x[k] - q[k]) / r;
            }
        },
        |(a, na), (b, nb)| {
            a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            *na += nb;
        },
    );
    let n = cloud.n() as f64;
    (sum.into_iter().map(|v| v / n).collect(), atoms)
}

fn check_dim(cloud: &PointCloud, d: usize) -> Result<()> {
    if d != cloud.dim() {
        return Err(Error::DimensionMismatch {
            got: d,
            expected: cloud.dim().to_string(),
        });
    }
    Ok(())
}

/// Everything one pass over the sample yields at a point `q`.
struct Eval {
    /// Objective value.
    f: f64,
    /// `mean_u + alpha u`; the gradient of `f` is `-resid`.
    resid: Vec<f64>,
    resid_norm: f64,
    /// `(1/n) sum_i (I - u_i u_i^T)/r_i`, row-major.
    hess: Vec<f64>,
    /// `sum_i x_i / r_i` and `sum_i 1/r_i` for the Weiszfeld map.
    sum_x_over_r: Vec<f64>,
    sum_inv_r: f64,
    nearest: usize,
    nearest_dist: f64,
    atom: Option<usize>,
}

struct Acc {
    f: f64,
    su: Vec<f64>,
    hess: Vec<f64>,
    sx: Vec<f64>,
    sinv: f64,
    nearest: usize,
    nearest_dist: f64,
    atom: Option<usize>,
}

fn evaluate(cloud: &PointCloud, au: &[f64], q: &[f64], eps: f64) -> Eval {
    let d = cloud.dim();
    let acc = par::fold_chunks(
        cloud.n(),
        || Acc {
            f: 0.0,
            su: vec![0.0; d],
            hess: vec![0.0; d * d],
            sx: vec![0.0; d],
            sinv: 0.0,
            nearest: usize::MAX,
            nearest_dist: f64::INFINITY,
            atom: None,
        },
        |a, i| {
            let x = cloud.point(i);
            let mut diff = [0.0f64; 16];
            let diff = if d <= 16 { &mut diff[..d] } else { unreachable_dim(d) };
            for k in 0..d {
                diff[k] = x[k] - q[k];
            }
            let r = norm(diff);
            a.f += r - norm(x);
            if r < a.nearest_dist {
                a.nearest_dist = r;
                a.nearest = i;
            }
            if r <= eps {
                a.atom.get_or_insert(i);
                return;
            }
            let inv = 1.0 / r;
            a.sinv += inv;
            for k in 0..d {
                let uk = diff[k] * inv;
                a.su[k] += uk;
                a.sx[k] += x[k] * inv;
                for l in 0..d {
                    let ul = diff[l] * inv;
                    let id = if k == l { 1.0 } else { 0.0 };
                    a.hess[k * d + l] += (id - uk * ul) * inv;
                }
            }
        },
        |a, b| {
            a.f += b.f;
            a.su.iter_mut().zip(&b.su).for_each(|(x, y)| *x += y);
            a.hess.iter_mut().zip(&b.hess).for_each(|(x, y)| *x += y);
            a.sx.iter_mut().zip(&b.sx).for_each(|(x, y)| *x += y);
            a.sinv += b.sinv;
            if b.nearest_dist < a.nearest_dist {
                a.nearest_dist = b.nearest_dist;
                a.nearest = b.nearest;
            }
            if a.atom.is_none() {
                a.atom = b.atom;
            }
        },
    );
    let n = cloud.n() as f64;
    let resid: Vec<f64> = acc.su.iter().zip(au).map(|(s, a)| s / n + a).collect();
    Eval {
        f: acc.f / n - dot(au, q),
        resid_norm: norm(&resid),
        resid,
        hess: acc.hess.into_iter().map(|h| h / n).collect(),
        sum_x_over_r: acc.sx,
        sum_inv_r: acc.sinv,
        nearest: acc.nearest,
        nearest_dist: acc.nearest_dist,
        atom: acc.atom,
    }
}

#[cold]
fn unreachable_dim(d: usize) -> &'static mut [f64] {
    panic!("dimension {d} exceeds the supported maximum of 16")
}

/// Subgradient residual at the sample point `x_j`: the distance from zero
/// to the subdifferential, `max(0, |R| - m/n)` with `m` the multiplicity.
fn atom_residual(cloud: &PointCloud, au: &[f64], j: usize, eps: f64) -> f64 {
    let x = cloud.point(j);
    let (mean_u, atoms) = sign_expectation_excluding_atoms(cloud, x, eps);
    let r: Vec<f64> = mean_u.iter().zip(au).map(|(m, a)| m + a).collect();
    (norm(&r) - atoms as f64 / cloud.n() as f64).max(0.0)
}

/// Solves for the geometric quantile at `index`, starting from the
/// coordinate-wise median.
pub fn solve_quantile(cloud: &PointCloud, index: &IndexVector, cfg: &SolverConfig) -> Result<SolveReport> {
    solve_quantile_from(cloud, index, cfg, None)
}

/// Solves for the geometric quantile at `index` from an optional warm start.
pub fn solve_quantile_from(
    cloud: &PointCloud,
    index: &IndexVector,
    cfg: &SolverConfig,
    init: Option<&[f64]>,
) -> Result<SolveReport> {
    cfg.validate()?;
    check_dim(cloud, index.direction().dim())?;
    let d = cloud.dim();
    if d > 16 {
        return Err(Error::DimensionMismatch {
            got: d,
            expected: "<= 16".into(),
        });
    }
    let mut q = match init {
        Some(p) => {
            check_dim(cloud, p.len())?;
            p.to_vec()
        }
        None => cloud.coordinate_median(),
    };
    let au = index.vector();
    let n = cloud.n() as f64;
    let eps = cfg.singular_eps;
    // Typical spread, used to scale safeguards.
    let spread = {
        let m = cloud.coordinate_median();
        par::sum(cloud.n(), |i| dist(cloud.point(i), &m)) / n
    }
    .max(f64::MIN_POSITIVE);

    let mut ev = evaluate(cloud, &au, &q, eps);
    let mut best = (q.clone(), f64::INFINITY);
    let mut damping = cfg.damping;
    let mut last_step = f64::INFINITY;
    let mut escapes = 0;
    let mut iters = 0;

    while iters < cfg.max_iters {
        if let Some(j) = ev.atom {
            let res = atom_residual(cloud, &au, j, eps);
            if res <= cfg.residual_tol {
                return Ok(SolveReport {
                    q: Point::new(cloud.point(j).to_vec())?,
                    residual: res,
                    iters,
                    status: SolveStatus::Converged,
                });
            }
            escapes += 1;
            if escapes > MAX_ATOM_ESCAPES {
                return Ok(SolveReport {
                    q: Point::new(q)?,
                    residual: res,
                    iters,
                    status: SolveStatus::AtomHit,
                });
            }
            // Step off the atom along the residual direction (the descent
            // direction of the smooth part).
            let x = cloud.point(j);
            let (mean_u, _) = sign_expectation_excluding_atoms(cloud, x, eps);
            let mut dir: Vec<f64> = mean_u.iter().zip(&au).map(|(m, a)| m + a).collect();
            let dn = norm(&dir);
            if dn == 0.0 {
                dir = vec![0.0; d];
                dir[0] = 1.0;
            } else {
                dir.iter_mut().for_each(|v| *v /= dn);
            }
            let h = (eps * (1.0 + norm(x))).max(f64::EPSILON * (1.0 + norm(x)));
            q = x.iter().zip(&dir).map(|(xi, di)| xi + h * di).collect();
            ev = evaluate(cloud, &au, &q, eps);
            iters += 1;
            continue;
        }

        if ev.resid_norm < best.1 {
            best = (q.clone(), ev.resid_norm);
        }
        if ev.resid_norm <= cfg.residual_tol {
            return Ok(SolveReport {
                q: Point::new(q)?,
                residual: ev.resid_norm,
                iters,
                status: SolveStatus::Converged,
            });
        }

        // The minimizer may sit on a sample point, where the smooth
        // iterations only approach it linearly. Test the nearest one.
        if ev.nearest_dist <= 2.0 * last_step.min(spread) {
            let res = atom_residual(cloud, &au, ev.nearest, eps);
            if res <= cfg.residual_tol {
                return Ok(SolveReport {
                    q: Point::new(cloud.point(ev.nearest).to_vec())?,
                    residual: res,
                    iters,
                    status: SolveStatus::Converged,
                });
            }
        }

        iters += 1;
        let mut next = None;
        if cfg.method == SolverMethod::Newton {
            next = newton_step(cloud, &au, &q, &ev, eps, spread);
        }
        let (q_new, ev_new) = match next {
            Some(s) => s,
            None => {
                let (qn, en, dmp) = weiszfeld_step(cloud, &au, &q, &ev, eps, damping, n);
                damping = dmp;
                (qn, en)
            }
        };
        last_step = dist(&q_new, &q);
        q = q_new;
        ev = ev_new;
        if last_step == 0.0 && ev.atom.is_none() {
            // No representable progress left.
            break;
        }
    }

    if ev.atom.is_none() && ev.resid_norm < best.1 {
        best = (q, ev.resid_norm);
    }
    let status = if best.1 <= cfg.residual_tol {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxIters
    };
    Ok(SolveReport {
        q: Point::new(best.0)?,
        residual: best.1,
        iters,
        status,
    })
}

/// Newton step with backtracking; `None` when no acceptable step is found.
fn newton_step(
    cloud: &PointCloud,
    au: &[f64],
    q: &[f64],
    ev: &Eval,
    eps: f64,
    spread: f64,
) -> Option<(Vec<f64>, Eval)> {
    let d = q.len();
    let h = DMatrix::from_row_slice(d, d, &ev.hess);
    let chol = h.cholesky()?;
    let step = chol.solve(&DVector::from_column_slice(&ev.resid));
    let mut s: Vec<f64> = step.iter().copied().collect();
    if s.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let cap = 4.0 * (norm(q) + spread);
    let sn = norm(&s);
    if sn > cap {
        s.iter_mut().for_each(|v| *v *= cap / sn);
    }
    // Directional derivative of f along s is -<resid, s>.
    let slope = -dot(&ev.resid, &s);
    if slope >= 0.0 {
        return None;
    }
    let roundoff = 1e-14 * (ev.f.abs() + norm(q) + spread);
    let mut t = 1.0;
    while t > 1e-12 {
        let cand: Vec<f64> = q.iter().zip(&s).map(|(a, b)| a + t * b).collect();
        let ec = evaluate(cloud, au, &cand, eps);
        let armijo = ec.f <= ev.f + ARMIJO * t * slope;
        let flat = ec.f <= ev.f + roundoff && ec.resid_norm < ev.resid_norm;
        if ec.atom.is_some() || armijo || flat {
            return Some((cand, ec));
        }
        t *= 0.5;
    }
    None
}

/// Damped Weiszfeld step; halves the damping while the objective increases.
fn weiszfeld_step(
    cloud: &PointCloud,
    au: &[f64],
    q: &[f64],
    ev: &Eval,
    eps: f64,
    mut damping: f64,
    n: f64,
) -> (Vec<f64>, Eval, f64) {
    let target: Vec<f64> = ev
        .sum_x_over_r
        .iter()
        .zip(au)
        .map(|(sx, a)| (sx + n * a) / ev.sum_inv_r)
        .collect();
    loop {
        let cand: Vec<f64> = q
            .iter()
            .zip(&target)
            .map(|(qk, tk)| (1.0 - damping) * qk + damping * tk)
            .collect();
        let ec = evaluate(cloud, au, &cand, eps);
        if ec.f <= ev.f || ec.atom.is_some() || damping <= DAMPING_FLOOR {
            return (cand, ec, damping);
        }
        damping = (damping * 0.5).max(DAMPING_FLOOR);
    }
}

/// One entry of [`quantile_norm_curve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormCurvePoint {
    pub alpha: f64,
    pub norm: f64,
    pub report: SolveReport,
}

/// Solves along an increasing ladder of `alpha` in direction `u`, warm
/// starting each solve from the previous quantile.
pub fn quantile_norm_curve(
    cloud: &PointCloud,
    u: &UnitVector,
    alphas: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<NormCurvePoint>> {
    check_increasing(alphas, 1)?;
    let mut out: Vec<NormCurvePoint> = Vec::with_capacity(alphas.len());
    let mut warm: Option<Vec<f64>> = None;
    for &alpha in alphas {
        let index = IndexVector::new(alpha, u.clone())?;
        let report = solve_quantile_from(cloud, &index, cfg, warm.as_deref())?;
        let nrm = report.q.norm();
        if let Some(prev) = out.last() {
            if nrm < prev.norm {
                log::warn!(
                    "quantile norm decreased from {} to {} between alpha {} and {}",
                    prev.norm,
                    nrm,
                    prev.alpha,
                    alpha
                );
            }
        }
        warm = Some(report.q.as_slice().to_vec());
        out.push(NormCurvePoint {
            alpha,
            norm: nrm,
            report,
        });
    }
    Ok(out)
}

/// Checks that `alphas` is strictly increasing inside `[0, 1)` and has at
/// least `min_len` entries.
pub(crate) fn check_increasing(alphas: &[f64], min_len: usize) -> Result<()> {
    if alphas.len() < min_len {
        return Err(Error::InvalidParameter(format!(
            "need at least {min_len} alpha values, got {}",
            alphas.len()
        )));
    }
    if alphas.iter().any(|a| !(0.0..1.0).contains(a)) {
        return Err(Error::InvalidParameter("alphas must lie in [0, 1)".into()));
    }
    if alphas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "alphas must be strictly increasing".into(),
        ));
    }
    Ok(())
}
