//! Seeded generators for the synthetic families used in experiments.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::t_quantile_from_normal_score;
use crate::types::PointCloud;

/// A family and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `N(mean, covariance)`.
    Gaussian {
        covariance: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<Vec<f64>>,
    },
    /// Elliptical Student-t: `mean + Z / sqrt(W / nu)` with `Z ~ N(0, scale)`
    /// and `W ~ chi^2_nu` shared across coordinates.
    StudentT {
        nu: f64,
        scale: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<Vec<f64>>,
    },
    /// Elliptical Cauchy (Student-t with one degree of freedom).
    Cauchy {
        scale: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<Vec<f64>>,
    },
    /// Student-t margins with degrees of freedom `nu[k]`, joined by a
    /// Gaussian copula with all pairwise correlations equal to `rho`.
    #[serde(alias = "gaussian_copula_t")]
    GaussianCopulaTMargins { rho: f64, nu: Vec<f64> },
    /// Independent `Exp(1) - 1` coordinates (mean zero, skewed).
    ExponentialCentered { d: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    #[serde(flatten)]
    pub family: Family,
    pub n: usize,
    pub seed: u64,
}

/// Named experimental setups.
pub const PRESETS: [&str; 3] = ["fig1a", "fig1b-text", "fig1b-caption"];

impl DistributionSpec {
    pub fn new(family: Family, n: usize, seed: u64) -> Self {
        DistributionSpec { family, n, seed }
    }

    /// `fig1a`: bivariate Gaussian, unit variances, correlation 0.7.
    /// `fig1b-text`: t margins with 1.2 and 2.2 degrees of freedom, Gaussian
    /// copula with correlation 0.7. `fig1b-caption`: the same with 3 and 10.
    pub fn preset(name: &str, n: usize, seed: u64) -> Result<Self> {
        let family = match name {
            "fig1a" => Family::Gaussian {
                covariance: vec![vec![1.0, 0.7], vec![0.7, 1.0]],
                mean: None,
            },
            "fig1b-text" => Family::GaussianCopulaTMargins {
                rho: 0.7,
                nu: vec![1.2, 2.2],
            },
            "fig1b-caption" => Family::GaussianCopulaTMargins {
                rho: 0.7,
                nu: vec![3.0, 10.0],
            },
            other => {
                return Err(Error::BadParams(format!(
                    "unknown preset {other:?} (known: {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(DistributionSpec::new(family, n, seed))
    }

    pub fn dim(&self) -> usize {
        match &self.family {
            Family::Gaussian { covariance, .. } => covariance.len(),
            Family::StudentT { scale, .. } | Family::Cauchy { scale, .. } => scale.len(),
            Family::GaussianCopulaTMargins { nu, .. } => nu.len(),
            Family::ExponentialCentered { d } => *d,
        }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::BadParams(msg.into())
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
fn cholesky(m: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = m.len();
    if d < 2 || m.iter().any(|r| r.len() != d) {
        return Err(bad(format!("covariance must be a square matrix of size >= 2, got {d} rows")));
    }
    let a = DMatrix::from_fn(d, d, |i, j| m[i][j]);
    if a.iter().any(|v| !v.is_finite()) {
        return Err(bad("covariance has non-finite entries"));
    }
    for i in 0..d {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * (1.0 + a[(i, j)].abs()) {
                return Err(bad("covariance is not symmetric"));
            }
        }
    }
    a.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| bad("covariance is not positive definite"))
}

fn check_mean(mean: &Option<Vec<f64>>, d: usize) -> Result<Vec<f64>> {
    match mean {
        None => Ok(vec![0.0; d]),
        Some(m) if m.len() == d && m.iter().all(|v| v.is_finite()) => Ok(m.clone()),
        Some(m) => Err(bad(format!("mean has length {} (expected {d}) or is not finite", m.len()))),
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(bad(format!("degrees of freedom must be positive, got {nu}")));
    }
    Ok(())
}

fn correlated_normal(rng: &mut ChaCha8Rng, l: &DMatrix<f64>, out: &mut [f64]) {
    let d = out.len();
    let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    for i in 0..d {
        out[i] = (0..=i).map(|j| l[(i, j)] * z[j]).sum();
    }
}

/// Draws `spec.n` points. The same spec always yields the same cloud.
pub fn sample(spec: &DistributionSpec) -> Result<PointCloud> {
    let d = spec.dim();
    if d < 2 {
        return Err(bad(format!("dimension must be >= 2, got {d}")));
    }
    if spec.n < d + 1 {
        return Err(bad(format!("need n >= d + 1 = {}, got {}", d + 1, spec.n)));
    }
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut data = vec![0.0; n * d];
    match &spec.family {
        Family::Gaussian { covariance, mean } => {
            let l = cholesky(covariance)?;
            let mu = check_mean(mean, d)?;
            for row in data.chunks_mut(d) {
                correlated_normal(&mut rng, &l, row);
                row.iter_mut().zip(&mu).for_each(|(x, m)| *x += m);
            }
        }
        Family::StudentT { nu, scale, mean } => elliptical_t(&mut rng, *nu, scale, mean, &mut data, d)?,
        Family::Cauchy { scale, mean } => elliptical_t(&mut rng, 1.0, scale, mean, &mut data, d)?,
        Family::GaussianCopulaTMargins { rho, nu } => {
            if !(*rho > -1.0 / (d as f64 - 1.0) && *rho < 1.0) {
                return Err(bad(format!("equicorrelation {rho} is not positive definite in dimension {d}")));
            }
            nu.iter().try_for_each(|&v| check_nu(v))?;
            let corr: Vec<Vec<f64>> = (0..d)
                .map(|i| (0..d).map(|j| if i == j { 1.0 } else { *rho }).collect())
                .collect();
            let l = cholesky(&corr)?;
            for row in data.chunks_mut(d) {
                correlated_normal(&mut rng, &l, row);
                for (x, &v) in row.iter_mut().zip(nu) {
                    *x = t_quantile_from_normal_score(*x, v)?;
                }
            }
        }
        Family::ExponentialCentered { .. } => {
            for x in data.iter_mut() {
                let e: f64 = rng.sample(Exp1);
                *x = e - 1.0;
            }
        }
    }
    PointCloud::from_flat(data, d)
}

fn elliptical_t(
    rng: &mut ChaCha8Rng,
    nu: f64,
    scale: &[Vec<f64>],
    mean: &Option<Vec<f64>>,
    data: &mut [f64],
    d: usize,
) -> Result<()> {
    check_nu(nu)?;
    let l = cholesky(scale)?;
    let mu = check_mean(mean, d)?;
    let chi = ChiSquared::new(nu).map_err(|e| bad(e.to_string()))?;
    for row in data.chunks_mut(d) {
        correlated_normal(rng, &l, row);
        let w: f64 = chi.sample(rng);
        let s = (w / nu).sqrt();
        row.iter_mut().zip(&mu).for_each(|(x, m)| *x = *x / s + m);
    }
    Ok(())
}

/// Identity matrix as nested rows.
pub fn identity(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}
