//! The three-contour comparison: a geometric quantile contour, the largest
//! depth region it contains, and the depth region guaranteed to lie inside it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{admissibility, INCLUSION_SLACK};
use crate::depth::{depth_region_along, tukey_median_with, DepthConfig, DepthEvaluator, DepthRegion};
use crate::directional::{m_gamma_estimate, DirectionSearch};
use crate::error::{Error, Result};
use crate::quantile::{sign_expectation_excluding_atoms, solve_quantile_from, SolveStatus, SolverConfig};
use crate::sphere::sphere_directions;
use crate::types::{dist, norm, IndexVector, Point, PointCloud, UnitVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourConfig {
    /// Rays per depth region.
    pub n_rays: usize,
    /// Directions used to estimate `M_gamma`.
    pub gamma_dirs: usize,
    pub symmetric: bool,
    pub depth: DepthConfig,
}

impl Default for ContourConfig {
    fn default() -> Self {
        ContourConfig {
            n_rays: 360,
            gamma_dirs: 720,
            symmetric: false,
            depth: DepthConfig::default(),
        }
    }
}

/// Pointwise check that the theoretical region's boundary lies in the
/// quantile region `{q : |E U_q| <= alpha}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Containment {
    pub slack: f64,
    pub n_checked: usize,
    pub n_violations: usize,
    pub max_norm_mean_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourBundle {
    pub alpha: f64,
    pub gamma: f64,
    pub m_gamma: f64,
    /// Points `q(alpha u)` over the direction fan, in fan order.
    pub g_alpha: Vec<Point>,
    pub g_status: Vec<SolveStatus>,
    /// Largest estimated depth over `g_alpha`.
    pub alpha_best: f64,
    /// Level of `d_best`: `alpha_best`, raised to `1/n` when the contour
    /// leaves the sample hull (depth 0 describes the whole space).
    pub best_level: f64,
    pub d_best: DepthRegion,
    /// `(1 - alpha^2)/m_gamma`.
    pub theory_level: f64,
    pub d_theory: DepthRegion,
    pub theta: Point,
    pub theta_depth: f64,
    pub containment: Containment,
    /// Max over min distance of `g_alpha` from `theta`.
    pub eccentricity: f64,
}

impl ContourBundle {
    /// The theoretical region may not exceed the best-fitting one: its level
    /// is at least `alpha_best`, up to `slack` for depth estimation noise.
    pub fn levels_consistent(&self, slack: f64) -> bool {
        self.theory_level >= self.alpha_best - slack
    }
}

/// Max over min distance of `points` from `center`.
pub fn eccentricity(points: &[Point], center: &Point) -> f64 {
    let r: Vec<f64> = points.iter().map(|p| dist(p.as_slice(), center.as_slice())).collect();
    let max = r.iter().cloned().fold(0.0, f64::max);
    let min = r.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Fan of quantiles `q(alpha u)`, each solve warm-started from its neighbor.
pub fn quantile_contour(
    cloud: &PointCloud,
    alpha: f64,
    dirs: &[UnitVector],
    cfg: &SolverConfig,
) -> Result<Vec<(Point, SolveStatus)>> {
    let mut out = Vec::with_capacity(dirs.len());
    let mut warm: Option<Vec<f64>> = None;
    for u in dirs {
        let idx = IndexVector::new(alpha, u.clone())?;
        let rep = solve_quantile_from(cloud, &idx, cfg, warm.as_deref())?;
        if !rep.converged() {
            log::warn!(
                "quantile in direction {:?} stopped with status {:?} (residual {:e})",
                u.as_slice(),
                rep.status,
                rep.residual
            );
        }
        warm = Some(rep.q.as_slice().to_vec());
        out.push((rep.q, rep.status));
    }
    Ok(out)
}

pub fn contour_experiment(
    cloud: &PointCloud,
    alpha: f64,
    gamma: f64,
    n_dirs: usize,
    solver: &SolverConfig,
    seed: u64,
) -> Result<ContourBundle> {
    let cfg = ContourConfig {
        depth: DepthConfig {
            seed,
            ..Default::default()
        },
        ..Default::default()
    };
    contour_experiment_with(cloud, alpha, gamma, n_dirs, solver, seed, &cfg)
}

pub fn contour_experiment_with(
    cloud: &PointCloud,
    alpha: f64,
    gamma: f64,
    n_dirs: usize,
    solver: &SolverConfig,
    seed: u64,
    cfg: &ContourConfig,
) -> Result<ContourBundle> {
    if n_dirs < 1 {
        return Err(Error::InvalidParameter("n_dirs must be >= 1".into()));
    }
    if cfg.n_rays < 8 {
        return Err(Error::InvalidParameter("n_rays must be >= 8".into()));
    }
    let d = cloud.dim();
    let m = m_gamma_estimate(cloud, gamma, &DirectionSearch::new(cfg.gamma_dirs, seed))?;
    let (theory_level, bound, admissible) = admissibility(m.m_gamma, alpha, d, cfg.symmetric);
    if !admissible {
        return Err(Error::NotAdmissible {
            alpha,
            threshold: theory_level,
            bound,
        });
    }

    let fan = sphere_directions(d, n_dirs, seed);
    let contour = quantile_contour(cloud, alpha, &fan, solver)?;
    let (g_alpha, g_status): (Vec<Point>, Vec<SolveStatus>) = contour.into_iter().unzip();

    let eval = DepthEvaluator::new(cloud, &cfg.depth);
    let (theta, theta_depth) = tukey_median_with(&eval, cfg.depth.median_refinements)?;
    let depths: Vec<f64> = g_alpha.par_iter().map(|q| eval.depth(q.as_slice())).collect();
    let alpha_best = depths.iter().cloned().fold(0.0, f64::max);
    let best_level = alpha_best.max(1.0 / cloud.n() as f64).min(theta_depth);

    let rays = sphere_directions(d, cfg.n_rays, seed);
    let d_best = depth_region_along(&eval, best_level, rays.clone(), &theta, theta_depth, &cfg.depth)?;
    let d_theory = depth_region_along(&eval, theory_level, rays, &theta, theta_depth, &cfg.depth)?;

    let n = cloud.n() as f64;
    let norms: Vec<f64> = d_theory
        .boundary
        .par_iter()
        .map(|q| {
            let (mean, atoms) = sign_expectation_excluding_atoms(cloud, q.as_slice(), solver.singular_eps);
            (norm(&mean) - atoms as f64 / n).max(0.0)
        })
        .collect();
    let containment = Containment {
        slack: INCLUSION_SLACK,
        n_checked: norms.len(),
        n_violations: norms.iter().filter(|&&v| v > alpha + INCLUSION_SLACK).count(),
        max_norm_mean_u: norms.iter().cloned().fold(0.0, f64::max),
    };
    let eccentricity = eccentricity(&g_alpha, &theta);
    Ok(ContourBundle {
        alpha,
        gamma,
        m_gamma: m.m_gamma,
        g_alpha,
        g_status,
        alpha_best,
        best_level,
        d_best,
        theory_level,
        d_theory,
        theta,
        theta_depth,
        containment,
        eccentricity,
    })
}
