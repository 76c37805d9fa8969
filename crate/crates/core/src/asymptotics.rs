//! Finite-alpha diagnostics for the asymptotic behavior of extreme quantiles:
//! the first- and third-order norm expansions, the direction expansion and
//! log-log growth-rate fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::quantile::{check_increasing, quantile_norm_curve, SolveStatus, SolverConfig};
use crate::types::{dot, PointCloud, UnitVector};

fn check_dir(cloud: &PointCloud, u: &UnitVector) -> Result<()> {
    if u.dim() != cloud.dim() {
        return Err(Error::DimensionMismatch {
            got: u.dim(),
            expected: cloud.dim().to_string(),
        });
    }
    Ok(())
}

/// Empirical covariance (divisor `n`), row-major `d x d`.
pub fn covariance(cloud: &PointCloud) -> Vec<f64> {
    let d = cloud.dim();
    let mu = cloud.mean();
    let s = par::fold_chunks(
        cloud.n(),
        || vec![0.0; d * d],
        |acc, i| {
            let x = cloud.point(i);
            for a in 0..d {
                let xa = x[a] - mu[a];
                for b in a..d {
                    acc[a * d + b] += xa * (x[b] - mu[b]);
                }
            }
        },
        |a, b| a.iter_mut().zip(&b).for_each(|(x, y)| *x += y),
    );
    let n = cloud.n() as f64;
    let mut out = vec![0.0; d * d];
    for a in 0..d {
        for b in a..d {
            out[a * d + b] = s[a * d + b] / n;
            out[b * d + a] = out[a * d + b];
        }
    }
    out
}

fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let d = v.len();
    (0..d).map(|i| dot(&m[i * d..(i + 1) * d], v)).collect()
}

/// `(I - u u^T) v`.
fn project_out(u: &[f64], v: &[f64]) -> Vec<f64> {
    let p = dot(u, v);
    v.iter().zip(u).map(|(a, b)| a - p * b).collect()
}

/// `(tr S - <S u, u>)/2` for the empirical covariance `S`.
pub fn first_order_limit(cloud: &PointCloud, u: &UnitVector) -> Result<f64> {
    check_dir(cloud, u)?;
    let d = cloud.dim();
    let s = covariance(cloud);
    let tr: f64 = (0..d).map(|i| s[i * d + i]).sum();
    let u = u.as_slice();
    Ok(0.5 * (tr - dot(&mat_vec(&s, u), u)))
}

/// Limit of `|q| (|q|^2 (1 - alpha) - first_order_limit)` as alpha -> 1, as
/// `E(<X,u> |X - <X,u>u|^2) - <(2S + A) u, (I - u u^T) E X>` with two
/// readings of `A`: `u u^T` and `mu mu^T`. The two agree for centered data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThirdOrderRhs {
    /// `E(<X,u> |X - <X,u>u|^2)`.
    pub skew_term: f64,
    /// `<(2S + u u^T) u, (I - u u^T) mu>`.
    pub mean_term_uu: f64,
    /// `<(2S + mu mu^T) u, (I - u u^T) mu>`.
    pub mean_term_mumu: f64,
    pub rhs_uu: f64,
    pub rhs_mumu: f64,
}

pub fn third_order_rhs(cloud: &PointCloud, u: &UnitVector) -> Result<ThirdOrderRhs> {
    check_dir(cloud, u)?;
    let uu = u.as_slice();
    let n = cloud.n() as f64;
    let skew = par::sum(cloud.n(), |i| {
        let x = cloud.point(i);
        let t = dot(x, uu);
        let perp2: f64 = x.iter().zip(uu).map(|(a, b)| (a - t * b).powi(2)).sum();
        t * perp2
    }) / n;
    let mu = cloud.mean();
    let s = covariance(cloud);
    let su = mat_vec(&s, uu);
    let mu_perp = project_out(uu, &mu);
    let two_su: Vec<f64> = su.iter().map(|v| 2.0 * v).collect();
    let with_uu: Vec<f64> = two_su.iter().zip(uu).map(|(a, b)| a + b).collect();
    let mu_u = dot(&mu, uu);
    let with_mumu: Vec<f64> = two_su.iter().zip(&mu).map(|(a, m)| a + m * mu_u).collect();
    let mean_term_uu = dot(&with_uu, &mu_perp);
    let mean_term_mumu = dot(&with_mumu, &mu_perp);
    Ok(ThirdOrderRhs {
        skew_term: skew,
        mean_term_uu,
        mean_term_mumu,
        rhs_uu: skew - mean_term_uu,
        rhs_mumu: skew - mean_term_mumu,
    })
}

/// `E(X - <X,u> u)`, the mean of the component orthogonal to `u`.
fn mean_perp(cloud: &PointCloud, u: &[f64]) -> Vec<f64> {
    project_out(u, &cloud.mean())
}

/// Limit of the direction gap `|q| (q - |q| u - E(X - <X,u>u))`:
/// `-|E(X - <X,u>u)|^2 u / 2 + (I - u u^T) S u`.
pub fn direction_gap_limit(cloud: &PointCloud, u: &UnitVector) -> Result<Vec<f64>> {
    check_dir(cloud, u)?;
    let uu = u.as_slice();
    let m = mean_perp(cloud, uu);
    let m2 = dot(&m, &m);
    let s = covariance(cloud);
    let t = project_out(uu, &mat_vec(&s, uu));
    Ok(t.iter().zip(uu).map(|(a, b)| a - 0.5 * m2 * b).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub u: UnitVector,
    pub alphas: Vec<f64>,
    pub norms: Vec<f64>,
    pub statuses: Vec<SolveStatus>,
    /// `|q|^2 (1 - alpha)`.
    pub first_order_values: Vec<f64>,
    pub first_order_limit: f64,
    /// `|q| (|q|^2 (1 - alpha) - first_order_limit)`.
    pub third_order_values: Vec<f64>,
    pub third_order_limit_rhs: ThirdOrderRhs,
    /// `|q| (q - |q| u - E(X - <X,u>u))`.
    pub direction_gaps: Vec<Vec<f64>>,
    pub direction_gap_limit: Vec<f64>,
}

/// Solves along the alpha ladder (warm-started) and tabulates both sides of
/// the norm and direction expansions.
pub fn expansion_sweep(
    cloud: &PointCloud,
    u: &UnitVector,
    alphas: &[f64],
    cfg: &SolverConfig,
) -> Result<ExpansionReport> {
    check_dir(cloud, u)?;
    check_increasing(alphas, 1)?;
    let fol = first_order_limit(cloud, u)?;
    let rhs = third_order_rhs(cloud, u)?;
    let gap_limit = direction_gap_limit(cloud, u)?;
    let uu = u.as_slice();
    let m = mean_perp(cloud, uu);
    let curve = quantile_norm_curve(cloud, u, alphas, cfg)?;
    let mut rep = ExpansionReport {
        u: u.clone(),
        alphas: alphas.to_vec(),
        norms: Vec::with_capacity(alphas.len()),
        statuses: Vec::with_capacity(alphas.len()),
        first_order_values: Vec::with_capacity(alphas.len()),
        first_order_limit: fol,
        third_order_values: Vec::with_capacity(alphas.len()),
        third_order_limit_rhs: rhs,
        direction_gaps: Vec::with_capacity(alphas.len()),
        direction_gap_limit: gap_limit,
    };
    for pt in curve {
        let r = pt.norm;
        let q = pt.report.q.as_slice();
        let first = r * r * (1.0 - pt.alpha);
        rep.norms.push(r);
        rep.statuses.push(pt.report.status);
        rep.first_order_values.push(first);
        rep.third_order_values.push(r * (first - fol));
        rep.direction_gaps.push(
            q.iter()
                .zip(uu)
                .zip(&m)
                .map(|((qk, uk), mk)| r * (qk - r * uk - mk))
                .collect(),
        );
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub alphas: Vec<f64>,
    pub norms: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `y` on `x`: `(slope, intercept, r^2)`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

/// Fits `log |q(alpha u)|` against `log(1/(1 - alpha))`.
pub fn rate_fit(cloud: &PointCloud, u: &UnitVector, alphas: &[f64], cfg: &SolverConfig) -> Result<RateFit> {
    check_dir(cloud, u)?;
    check_increasing(alphas, 3)?;
    let curve = quantile_norm_curve(cloud, u, alphas, cfg)?;
    let norms: Vec<f64> = curve.iter().map(|p| p.norm).collect();
    if norms.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidParameter(
            "quantile at the origin; log-log fit undefined".into(),
        ));
    }
    let x: Vec<f64> = alphas.iter().map(|a| -(1.0 - a).ln()).collect();
    let y: Vec<f64> = norms.iter().map(|r| r.ln()).collect();
    let (slope, intercept, r_squared) = ols(&x, &y);
    Ok(RateFit {
        alphas: alphas.to_vec(),
        norms,
        slope,
        intercept,
        r_squared,
    })
}
