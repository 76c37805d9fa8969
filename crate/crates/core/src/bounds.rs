//! Upper bounds on extreme quantile norms, the depth-region inclusion and the
//! projected-quantile lower bound, each evaluated on an empirical measure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depth::{depth_region_boundary_with, tukey_median_with, DepthConfig, DepthEvaluator};
use crate::directional::{
    m_gamma_estimate, min_projected_quantile, quantile_index, DirectionSearch,
};
use crate::error::{Error, Result};
use crate::quantile::{sign_expectation_excluding_atoms, solve_quantile, SolveStatus, SolverConfig};
use crate::types::{dist, dot, norm, GammaConstant, IndexVector, Point, PointCloud, UnitVector};

/// Tolerance added to `alpha` in the `|E U_q| <= alpha` membership test.
pub const INCLUSION_SLACK: f64 = 0.01;

fn tail_fraction(cloud: &PointCloud, k: f64) -> f64 {
    cloud.points().filter(|x| norm(x) > k).count() as f64 / cloud.n() as f64
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    Ok(())
}

/// `2 k P(|X| <= k) / (1 - alpha - 2 P(|X| > k))` with empirical probabilities.
pub fn upper_bound_ub1(cloud: &PointCloud, alpha: f64, k_alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(k_alpha > 0.0 && k_alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("k_alpha must be positive, got {k_alpha}")));
    }
    let p = tail_fraction(cloud, k_alpha);
    let limit = (1.0 - alpha) / 2.0;
    let denom = 1.0 - alpha - 2.0 * p;
    if !(p < limit) || denom <= 0.0 {
        return Err(Error::InvalidThreshold {
            k: k_alpha,
            tail: p,
            limit,
        });
    }
    Ok(2.0 * k_alpha * (1.0 - p) / denom)
}

/// `2 E|X| / (1 - alpha)`.
pub fn upper_bound_ub2(cloud: &PointCloud, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let mean = cloud.norms().iter().sum::<f64>() / cloud.n() as f64;
    Ok(2.0 * mean / (1.0 - alpha))
}

/// Smallest sample norm `k` with `P(|X| > k) <= (1 - alpha)/2 - epsilon`;
/// `epsilon` defaults to `(1 - alpha)/10`.
pub fn auto_k_alpha(cloud: &PointCloud, alpha: f64, epsilon: Option<f64>) -> Result<f64> {
    check_alpha(alpha)?;
    let eps = epsilon.unwrap_or((1.0 - alpha) / 10.0);
    let target = (1.0 - alpha) / 2.0 - eps;
    if !(target > 0.0) {
        return Err(Error::Infeasible { target });
    }
    let mut r = cloud.norms();
    r.sort_by(f64::total_cmp);
    let n = r.len();
    // tail above r[k] is at most n - k - 1 (fewer with ties); scan the
    // first candidate and step over ties.
    let allowed = (target * n as f64).floor() as usize;
    let mut k = n.saturating_sub(allowed + 1);
    while k + 1 < n && r[k + 1] == r[k] {
        k += 1;
    }
    let k_alpha = r[k];
    if k_alpha <= 0.0 || tail_fraction(cloud, k_alpha) > target {
        return Err(Error::Infeasible { target });
    }
    Ok(k_alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundReport {
    pub alpha: f64,
    pub direction: UnitVector,
    pub k_alpha: f64,
    /// Empirical `P(|X| > k_alpha)`.
    pub tail_mass: f64,
    pub ub1: Option<f64>,
    pub ub2: Option<f64>,
    pub observed_norm: f64,
    pub solve_status: SolveStatus,
    pub ub1_satisfied: Option<bool>,
    pub ub2_satisfied: Option<bool>,
}

/// Solves for `q(alpha u)` and compares its norm with both upper bounds.
///
/// `k_alpha = None` selects the threshold with [`auto_k_alpha`]. The second
/// bound needs a finite first moment, which only the caller can vouch for.
pub fn upper_bound_report(
    cloud: &PointCloud,
    index: &IndexVector,
    k_alpha: Option<f64>,
    finite_mean: bool,
    cfg: &SolverConfig,
) -> Result<UpperBoundReport> {
    let alpha = index.alpha();
    check_alpha(alpha)?;
    let k = match k_alpha {
        Some(k) => k,
        None => auto_k_alpha(cloud, alpha, None)?,
    };
    let ub1 = upper_bound_ub1(cloud, alpha, k)?;
    let ub2 = if finite_mean {
        Some(upper_bound_ub2(cloud, alpha)?)
    } else {
        None
    };
    let sol = solve_quantile(cloud, index, cfg)?;
    let observed = sol.q.norm();
    let ok = |ub: f64| observed <= ub + 10.0 * cfg.residual_tol * (1.0 + ub);
    Ok(UpperBoundReport {
        alpha,
        direction: index.direction().clone(),
        k_alpha: k,
        tail_mass: tail_fraction(cloud, k),
        ub1: Some(ub1),
        ub2,
        observed_norm: observed,
        solve_status: sol.status,
        ub1_satisfied: Some(ok(ub1)),
        ub2_satisfied: ub2.map(ok),
    })
}

/// Depth threshold `(1 - alpha^2)/M_gamma`, the maximal-depth bound in force
/// (`1/(d+1)`, or `1/2` for halfspace-symmetric laws) and whether alpha is
/// admissible, i.e. the threshold lies below that bound.
pub fn admissibility(m_gamma: f64, alpha: f64, d: usize, symmetric: bool) -> (f64, f64, bool) {
    let tau = (1.0 - alpha * alpha) / m_gamma;
    let bound = if symmetric { 0.5 } else { 1.0 / (d as f64 + 1.0) };
    (tau, bound, alpha < 1.0 && tau < bound)
}

/// Smallest admissible alpha: `sqrt(1 - M_gamma bound)`.
pub fn admissible_alpha_min(m_gamma: f64, d: usize, symmetric: bool) -> f64 {
    let bound = if symmetric { 0.5 } else { 1.0 / (d as f64 + 1.0) };
    (1.0 - m_gamma * bound).max(0.0).sqrt()
}

/// Alpha whose square sits at the midpoint of the admissible range
/// `(1 - M_gamma bound, 1)`.
pub fn mid_admissible_alpha(m_gamma: f64, d: usize, symmetric: bool) -> f64 {
    let bound = if symmetric { 0.5 } else { 1.0 / (d as f64 + 1.0) };
    (1.0 - 0.5 * m_gamma * bound).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InclusionConfig {
    pub n_probe: usize,
    pub seed: u64,
    pub symmetric: bool,
    /// Directions used to estimate `M_gamma`.
    pub gamma_dirs: usize,
    /// Rays used to find the bounding box of the depth region.
    pub rays: usize,
    pub depth: DepthConfig,
}

impl Default for InclusionConfig {
    fn default() -> Self {
        InclusionConfig {
            n_probe: 200,
            seed: 7,
            symmetric: false,
            gamma_dirs: 720,
            rays: 64,
            depth: DepthConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub gamma: f64,
    pub m_gamma: f64,
    pub alpha: f64,
    pub depth_threshold: f64,
    pub max_depth_bound: f64,
    pub admissible: bool,
    /// Probe candidates drawn from the bounding box.
    pub n_candidates: usize,
    pub n_tested: usize,
    pub n_violations: usize,
    pub max_norm_mean_u: f64,
}

/// Checks that points of depth at least `(1 - alpha^2)/M_gamma` satisfy
/// `|E U_q| <= alpha`, i.e. lie inside the quantile contour of level alpha.
///
/// An inadmissible alpha yields a report with `admissible = false` and no
/// probes.
pub fn check_inclusion(
    cloud: &PointCloud,
    gamma: f64,
    alpha: f64,
    cfg: &InclusionConfig,
) -> Result<InclusionReport> {
    let m = m_gamma_estimate(cloud, gamma, &DirectionSearch::new(cfg.gamma_dirs, cfg.seed))?;
    check_inclusion_with(cloud, &m, alpha, cfg)
}

/// As [`check_inclusion`] with a precomputed `M_gamma`.
pub fn check_inclusion_with(
    cloud: &PointCloud,
    m: &GammaConstant,
    alpha: f64,
    cfg: &InclusionConfig,
) -> Result<InclusionReport> {
    check_alpha(alpha)?;
    let (tau, bound, admissible) = admissibility(m.m_gamma, alpha, cloud.dim(), cfg.symmetric);
    let mut report = InclusionReport {
        gamma: m.gamma,
        m_gamma: m.m_gamma,
        alpha,
        depth_threshold: tau,
        max_depth_bound: bound,
        admissible,
        n_candidates: 0,
        n_tested: 0,
        n_violations: 0,
        max_norm_mean_u: 0.0,
    };
    if !admissible {
        return Ok(report);
    }
    let eval = DepthEvaluator::new(cloud, &cfg.depth);
    let (center, center_depth) = tukey_median_with(&eval, cfg.depth.median_refinements)?;
    if tau > center_depth {
        // The empirical region is empty; the inclusion holds vacuously.
        return Ok(report);
    }
    let region = depth_region_boundary_with(&eval, tau, cfg.rays.max(8), &center, center_depth, &cfg.depth)?;
    let (lo, hi) = region.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut probes = Vec::with_capacity(cfg.n_probe);
    let max_candidates = 10 * cfg.n_probe;
    while probes.len() < cfg.n_probe && report.n_candidates < max_candidates {
        let p: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect();
        report.n_candidates += 1;
        if eval.depth(&p) >= tau {
            probes.push(p);
        }
    }
    let n = cloud.n() as f64;
    let norms: Vec<f64> = probes
        .par_iter()
        .map(|q| {
            let (mean, atoms) = sign_expectation_excluding_atoms(cloud, q, 1e-12);
            // at a sample point the smallest subgradient norm is what counts
            (norm(&mean) - atoms as f64 / n).max(0.0)
        })
        .collect();
    report.n_tested = probes.len();
    report.n_violations = norms.iter().filter(|&&v| v > alpha + INCLUSION_SLACK).count();
    report.max_norm_mean_u = norms.iter().cloned().fold(0.0, f64::max);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundConfig {
    pub seed: u64,
    pub symmetric: bool,
    pub gamma_dirs: usize,
    /// Directions searched for the smallest projected quantile.
    pub quantile_dirs: usize,
    pub depth: DepthConfig,
}

impl Default for LowerBoundConfig {
    fn default() -> Self {
        LowerBoundConfig {
            seed: 7,
            symmetric: false,
            gamma_dirs: 720,
            quantile_dirs: 360,
            depth: DepthConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub alpha: f64,
    pub direction: UnitVector,
    pub gamma: f64,
    pub m_gamma: f64,
    /// Projection level `1 - (1 - alpha^2)/M_gamma`.
    pub beta: f64,
    pub theta: Point,
    pub theta_depth: f64,
    pub lower_bound: f64,
    /// Direction attaining the smallest projected quantile.
    pub lower_bound_direction: UnitVector,
    pub observed_displacement: f64,
    pub solve_status: SolveStatus,
    pub slack: f64,
    pub satisfied: bool,
}

/// Compares `|q(alpha u) - theta|` with
/// `min_v |Q_{<v,X>}(1 - (1 - alpha^2)/M_gamma) - <v, theta>|`.
pub fn lower_bound_check(
    cloud: &PointCloud,
    gamma: f64,
    alpha: f64,
    u: &UnitVector,
    solver: &SolverConfig,
    cfg: &LowerBoundConfig,
) -> Result<LowerBoundReport> {
    let m = m_gamma_estimate(cloud, gamma, &DirectionSearch::new(cfg.gamma_dirs, cfg.seed))?;
    lower_bound_check_with(cloud, &m, alpha, u, solver, cfg)
}

/// As [`lower_bound_check`] with a precomputed `M_gamma`.
pub fn lower_bound_check_with(
    cloud: &PointCloud,
    m: &GammaConstant,
    alpha: f64,
    u: &UnitVector,
    solver: &SolverConfig,
    cfg: &LowerBoundConfig,
) -> Result<LowerBoundReport> {
    check_alpha(alpha)?;
    let (tau, bound, admissible) = admissibility(m.m_gamma, alpha, cloud.dim(), cfg.symmetric);
    if !admissible {
        return Err(Error::NotAdmissible {
            alpha,
            threshold: tau,
            bound,
        });
    }
    let beta = 1.0 - tau;
    let eval = DepthEvaluator::new(cloud, &cfg.depth);
    let (theta, theta_depth) = tukey_median_with(&eval, cfg.depth.median_refinements)?;
    let (v, lower) = min_projected_quantile(
        cloud,
        beta,
        &theta,
        &DirectionSearch::new(cfg.quantile_dirs, cfg.seed),
    )?;
    let slack = 2.0 * quantile_standard_error(cloud, &v, beta);
    let sol = solve_quantile(cloud, &IndexVector::new(alpha, u.clone())?, solver)?;
    let observed = dist(sol.q.as_slice(), theta.as_slice());
    Ok(LowerBoundReport {
        alpha,
        direction: u.clone(),
        gamma: m.gamma,
        m_gamma: m.m_gamma,
        beta,
        theta,
        theta_depth,
        lower_bound: lower,
        lower_bound_direction: v,
        observed_displacement: observed,
        solve_status: sol.status,
        slack,
        satisfied: observed >= lower - slack,
    })
}

/// Standard error of the level-`beta` sample quantile of `<v, X>`, read off
/// the order statistics one binomial standard deviation to either side.
pub fn quantile_standard_error(cloud: &PointCloud, v: &UnitVector, beta: f64) -> f64 {
    let mut s: Vec<f64> = cloud.points().map(|x| dot(v.as_slice(), x)).collect();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let k = quantile_index(n, beta);
    let m = (n as f64 * beta * (1.0 - beta)).sqrt().ceil().max(1.0) as usize;
    let lo = k.saturating_sub(m);
    let hi = (k + m).min(n - 1);
    (s[hi] - s[lo]) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_circle(n: usize) -> PointCloud {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
        PointCloud::from_rows(&rows).unwrap()
    }

    #[test]
    fn ub1_without_tail_mass() {
        let c = unit_circle(12);
        let v = upper_bound_ub1(&c, 0.5, 2.0).unwrap();
        assert!((v - 2.0 * 2.0 / 0.5).abs() < 1e-12);
    }

    #[test]
    fn ub1_threshold_violation() {
        let c = unit_circle(12);
        // all mass lies above 0.5
        assert!(matches!(
            upper_bound_ub1(&c, 0.1, 0.5),
            Err(Error::InvalidThreshold { .. })
        ));
    }

    #[test]
    fn ub2_on_unit_circle() {
        let c = unit_circle(12);
        assert!((upper_bound_ub2(&c, 0.5).unwrap() - 4.0).abs() < 1e-12);
        assert!((upper_bound_ub2(&c, 0.0).unwrap() - 2.0).abs() < 1e-12);
        for a in [0.1, 0.5, 0.9, 0.999] {
            let ub = upper_bound_ub2(&c, a).unwrap();
            assert!((ub * (1.0 - a) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn auto_threshold_meets_target() {
        let rows: Vec<Vec<f64>> = (1..=100).map(|k| vec![k as f64, (k % 3) as f64]).collect();
        let c = PointCloud::from_rows(&rows).unwrap();
        for a in [0.0, 0.5, 0.9] {
            let k = auto_k_alpha(&c, a, None).unwrap();
            let target = (1.0 - a) / 2.0 - (1.0 - a) / 10.0;
            assert!(tail_fraction(&c, k) <= target);
            // no smaller sample norm qualifies
            let smaller = c.norms().into_iter().filter(|&r| r < k).fold(0.0, f64::max);
            if smaller > 0.0 {
                assert!(tail_fraction(&c, smaller) > target);
            }
        }
        assert!(matches!(auto_k_alpha(&c, 0.5, Some(0.25)), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn admissible_range() {
        let (tau, bound, ok) = admissibility(0.1, 0.9, 2, false);
        assert!((tau - 1.9).abs() < 1e-12 && (bound - 1.0 / 3.0).abs() < 1e-15 && !ok);
        let a = admissible_alpha_min(0.1, 2, false);
        assert!(!admissibility(0.1, a - 1e-9, 2, false).2);
        assert!(admissibility(0.1, a + 1e-9, 2, false).2);
        assert!(admissible_alpha_min(0.1, 2, true) < a);
    }
}
