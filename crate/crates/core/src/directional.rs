//! Quantiles of one-dimensional projections and the cap-mass constant `M_gamma`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::beta_reg;
use crate::sphere::sphere_directions;
use crate::types::{dot, norm, GammaConstant, GammaMethod, Point, PointCloud, UnitVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedQuantile {
    pub direction: UnitVector,
    pub beta: f64,
    pub value: f64,
}

/// Index into the sorted projections of the level-`beta` quantile
/// `inf { t : #{s_i > t}/n < 1 - beta }`.
///
/// With distinct values `#{s_i > s_k} = n - k - 1` (0-based), and ties
/// cannot move the infimum off that order statistic. The threshold
/// `(1 - beta) n` is snapped to an integer when within rounding of one, so
/// decimal levels such as 0.95 with n = 100 behave as written.
pub fn quantile_index(n: usize, beta: f64) -> usize {
    let mut t = (1.0 - beta) * n as f64;
    let r = t.round();
    if (t - r).abs() <= 1e-9 * r.max(1.0) {
        t = r;
    }
    // smallest integer k strictly above n - 1 - t
    let x = n as f64 - 1.0 - t;
    let k = if x < 0.0 { 0 } else { x.floor() as usize + 1 };
    k.min(n - 1)
}

/// Empirical quantile of a sample in place (reorders `values`).
pub fn empirical_quantile(values: &mut [f64], beta: f64) -> f64 {
    let k = quantile_index(values.len(), beta);
    *values.select_nth_unstable_by(k, f64::total_cmp).1
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!("beta must lie in [0, 1), got {beta}")));
    }
    Ok(())
}

fn check_dim(cloud: &PointCloud, got: usize) -> Result<()> {
    if got != cloud.dim() {
        return Err(Error::DimensionMismatch {
            got,
            expected: cloud.dim().to_string(),
        });
    }
    Ok(())
}

fn projections(cloud: &PointCloud, u: &[f64]) -> Vec<f64> {
    cloud.points().map(|x| dot(u, x)).collect()
}

pub fn projected_quantile(cloud: &PointCloud, u: &UnitVector, beta: f64) -> Result<ProjectedQuantile> {
    check_beta(beta)?;
    check_dim(cloud, u.dim())?;
    let mut s = projections(cloud, u.as_slice());
    Ok(ProjectedQuantile {
        direction: u.clone(),
        beta,
        value: empirical_quantile(&mut s, beta),
    })
}

/// How directions are searched when minimizing over the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionSearch {
    pub n_dirs: usize,
    pub seed: u64,
    /// Rounds of local refinement around the best grid direction; each round
    /// halves the step.
    pub refine_rounds: usize,
}

impl DirectionSearch {
    pub fn new(n_dirs: usize, seed: u64) -> Self {
        DirectionSearch {
            n_dirs,
            seed,
            refine_rounds: 16,
        }
    }

    pub fn without_refinement(mut self) -> Self {
        self.refine_rounds = 0;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_dirs == 0 {
            return Err(Error::InvalidParameter("n_dirs must be >= 1".into()));
        }
        Ok(())
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

/// Minimizes `f` over a direction grid, then refines locally. Ties in the grid
/// are broken toward the lexicographically smallest direction, so the result
/// does not depend on evaluation order.
pub fn minimize_over_sphere<F>(d: usize, search: &DirectionSearch, f: F) -> (UnitVector, f64)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dirs = sphere_directions(d, search.n_dirs, search.seed);
    let vals: Vec<f64> = dirs.par_iter().map(|u| f(u.as_slice())).collect();
    let mut best = 0;
    for i in 1..dirs.len() {
        let better = vals[i] < vals[best]
            || (vals[i] == vals[best] && lex_less(dirs[i].as_slice(), dirs[best].as_slice()));
        if better {
            best = i;
        }
    }
    let mut u = dirs[best].as_slice().to_vec();
    let mut fu = vals[best];
    if search.refine_rounds == 0 || search.n_dirs < 2 {
        return (dirs[best].clone(), fu);
    }
    let mut h = 2.0 * std::f64::consts::PI / (search.n_dirs as f64).powf(1.0 / (d as f64 - 1.0));
    for _ in 0..search.refine_rounds {
        let basis = tangent_basis(&u);
        let cands: Vec<Vec<f64>> = basis
            .iter()
            .flat_map(|b| [1.0, -1.0].map(|s| u.iter().zip(b).map(|(a, c)| a + s * h * c).collect()))
            .collect();
        let cvals: Vec<(Vec<f64>, f64)> = cands
            .into_par_iter()
            .map(|c| {
                let nc = norm(&c);
                let c: Vec<f64> = c.iter().map(|v| v / nc).collect();
                let v = f(&c);
                (c, v)
            })
            .collect();
        for (c, v) in cvals {
            if v < fu {
                u = c;
                fu = v;
            }
        }
        h *= 0.5;
    }
    (UnitVector::new(u).expect("unit direction"), fu)
}

/// Orthonormal basis of the tangent space at `u`.
fn tangent_basis(u: &[f64]) -> Vec<Vec<f64>> {
    let d = u.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    for k in 0..d {
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        let mut against: Vec<&[f64]> = vec![u];
        against.extend(basis.iter().map(|b| b.as_slice()));
        for w in against {
            let p = dot(&v, w);
            v.iter_mut().zip(w).for_each(|(a, b)| *a -= p * b);
        }
        let nv = norm(&v);
        if nv > 1e-6 {
            basis.push(v.iter().map(|a| a / nv).collect());
        }
        if basis.len() == d - 1 {
            break;
        }
    }
    basis
}

/// Minimizes `|Q_{<u,X>}(beta) - <u, theta>|` over directions.
pub fn min_projected_quantile(
    cloud: &PointCloud,
    beta: f64,
    theta: &Point,
    search: &DirectionSearch,
) -> Result<(UnitVector, f64)> {
    check_beta(beta)?;
    check_dim(cloud, theta.dim())?;
    search.validate()?;
    let th = theta.as_slice();
    Ok(minimize_over_sphere(cloud.dim(), search, |u| {
        let mut s = projections(cloud, u);
        (empirical_quantile(&mut s, beta) - dot(u, th)).abs()
    }))
}

/// Monte Carlo estimate of `M_gamma = (1 - gamma) inf_u P(<u, X> >= |X| sqrt(1 - gamma^2))`.
///
/// Points at the origin carry no direction and are dropped with a warning.
pub fn m_gamma_estimate(cloud: &PointCloud, gamma: f64, search: &DirectionSearch) -> Result<GammaConstant> {
    Ok(m_gamma_estimate_with_direction(cloud, gamma, search)?.0)
}

/// As [`m_gamma_estimate`], also returning the minimizing direction and
/// the number of points that were used.
pub fn m_gamma_estimate_with_direction(
    cloud: &PointCloud,
    gamma: f64,
    search: &DirectionSearch,
) -> Result<(GammaConstant, UnitVector, usize)> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    search.validate()?;
    let signs: Vec<Vec<f64>> = cloud
        .points()
        .filter_map(|x| {
            let r = norm(x);
            (r > 0.0).then(|| x.iter().map(|v| v / r).collect())
        })
        .collect();
    let dropped = cloud.n() - signs.len();
    if dropped > 0 {
        log::warn!("dropped {dropped} points at the origin while estimating M_gamma");
    }
    if signs.is_empty() {
        return Err(Error::ZeroMass { gamma });
    }
    let c = (1.0 - gamma * gamma).sqrt();
    let (u, count) = minimize_over_sphere(cloud.dim(), search, |u| {
        signs.iter().filter(|s| dot(u, s) >= c).count() as f64
    });
    if count == 0.0 {
        return Err(Error::ZeroMass { gamma });
    }
    let m = (1.0 - gamma) * count / signs.len() as f64;
    Ok((GammaConstant::new(gamma, m, GammaMethod::MonteCarlo)?, u, signs.len()))
}

/// `M_gamma` of a rotationally invariant law in `R^d`:
/// `((1 - gamma)/2) I_{gamma^2}((d - 1)/2, 1/2)`.
pub fn m_gamma_rotinv(d: usize, gamma: f64) -> Result<GammaConstant> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("dimension must be >= 2, got {d}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let m = 0.5 * (1.0 - gamma) * beta_reg((d as f64 - 1.0) / 2.0, 0.5, gamma * gamma);
    GammaConstant::new(gamma, m, GammaMethod::AnalyticRotinv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn line_cloud(vals: &[f64]) -> PointCloud {
        let mut rows: Vec<Vec<f64>> = vals.iter().map(|&v| vec![v, 0.0]).collect();
        rows.push(vec![0.0, 1.0]);
        PointCloud::from_rows(&rows).unwrap()
    }

    /// Brute-force reading of `inf { t : #{s_i > t}/n < 1 - beta }` over the
    /// sample values, in exact integer arithmetic with `beta = num/den`.
    fn quantile_by_definition(s: &[f64], num: usize, den: usize) -> f64 {
        let n = s.len();
        let mut cands = s.to_vec();
        cands.sort_by(f64::total_cmp);
        for t in cands {
            let above = s.iter().filter(|&&v| v > t).count();
            // above / n < (den - num) / den
            if above * den < (den - num) * n {
                return t;
            }
        }
        unreachable!()
    }

    #[test]
    fn hand_enumerated_convention() {
        let mut s = vec![4.0, 2.0, 1.0, 3.0];
        assert_eq!(empirical_quantile(&mut s, 0.5), 3.0);
        let mut s = vec![4.0, 2.0, 1.0, 3.0];
        assert_eq!(empirical_quantile(&mut s, 0.0), 1.0);
    }

    #[test]
    fn index_matches_definition_on_decimal_levels() {
        let s: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).collect();
        for num in [0usize, 5, 50, 90, 95, 99] {
            let mut v = s.clone();
            let got = empirical_quantile(&mut v, num as f64 / 100.0);
            assert_eq!(got, quantile_by_definition(&s, num, 100), "beta = {num}/100");
        }
        let ties = [1.0, 1.0, 2.0, 2.0, 2.0, 5.0, 5.0];
        for (num, den) in [(0, 7), (2, 7), (3, 7), (4, 7), (5, 7), (6, 7), (1, 2)] {
            let mut v = ties.to_vec();
            assert_eq!(
                empirical_quantile(&mut v, num as f64 / den as f64),
                quantile_by_definition(&ties, num, den)
            );
        }
    }

    #[test]
    fn projected_quantile_of_line() {
        let c = line_cloud(&[1.0, 2.0, 3.0, 4.0]);
        let q = projected_quantile(&c, &UnitVector::axis(2, 0), 0.5).unwrap();
        // five projections {0, 1, 2, 3, 4}
        assert_eq!(q.value, 2.0);
        assert!(projected_quantile(&c, &UnitVector::axis(2, 0), 1.0).is_err());
    }

    #[test]
    fn single_direction_search_returns_its_value() {
        let c = line_cloud(&[1.0, 2.0, 3.0, 4.0]);
        let s = DirectionSearch::new(1, 0);
        let (u, v) = min_projected_quantile(&c, 0.5, &Point::origin(2), &s).unwrap();
        assert_eq!(u.as_slice(), &[1.0, 0.0]);
        assert_eq!(v, 2.0);
    }

    #[test]
    fn rotinv_closed_forms() {
        let m = m_gamma_rotinv(2, 0.5).unwrap();
        assert!((m.m_gamma - 1.0 / 12.0).abs() < 1e-12);
        for g in [0.01, 0.3, 0.5, 0.9] {
            // d = 2: (1 - g) asin(g) / pi
            let m2 = m_gamma_rotinv(2, g).unwrap().m_gamma;
            assert!((m2 - (1.0 - g) * (g as f64).asin() / PI).abs() < 1e-12);
            // d = 3: cap of height 1 - sqrt(1 - g^2) has mass (1 - sqrt(1 - g^2))/2
            let m3 = m_gamma_rotinv(3, g).unwrap().m_gamma;
            assert!((m3 - (1.0 - g) * (1.0 - (1.0 - g * g).sqrt()) / 2.0).abs() < 1e-12);
        }
    }

    /// Mass of the cap `{s : s_1 >= sqrt(1 - g^2)}` under the uniform law on
    /// `S^{d-1}`, by integrating the marginal density of `s_1`,
    /// proportional to `(1 - t^2)^{(d-3)/2}`. Substituting `t = cos(phi)`
    /// gives `sin(phi)^{d-2} dphi` on `[0, pi]`.
    fn cap_mass_by_integration(d: usize, g: f64) -> f64 {
        let m = 200_000;
        let f = |phi: f64| phi.sin().powi(d as i32 - 2);
        let integ = |hi: f64| {
            let h = hi / m as f64;
            (0..m).map(|k| f((k as f64 + 0.5) * h)).sum::<f64>() * h
        };
        integ(g.asin()) / integ(PI)
    }

    #[test]
    fn beta_form_equals_cap_probability() {
        for d in [2usize, 3, 5, 10] {
            for g in [0.1, 0.5, 0.8] {
                let m = m_gamma_rotinv(d, g).unwrap().m_gamma;
                let cap = cap_mass_by_integration(d, g);
                assert!(((1.0 - g) * cap - m).abs() < 1e-8, "d = {d}, g = {g}");
            }
        }
    }

    #[test]
    fn rotinv_decreases_with_dimension() {
        let vals: Vec<f64> = [2usize, 5, 10, 20]
            .iter()
            .map(|&d| m_gamma_rotinv(d, 0.5).unwrap().m_gamma)
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
        assert!(vals[3] < 1e-3);
        assert!(m_gamma_rotinv(2, 1e-12).unwrap().m_gamma < 1e-11);
    }

    #[test]
    fn estimate_drops_origin_and_reports_zero_mass() {
        let c = PointCloud::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, 0.0],
        ])
        .unwrap();
        // Three unit directions 90 degrees apart leave a gap where a narrow
        // cap catches nothing.
        assert!(matches!(
            m_gamma_estimate(&c, 0.1, &DirectionSearch::new(360, 0)),
            Err(Error::ZeroMass { .. })
        ));
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        let u = [0.6, 0.0, 0.8];
        let b = tangent_basis(&u);
        assert_eq!(b.len(), 2);
        for v in &b {
            assert!(dot(v, &u).abs() < 1e-12);
            assert!((norm(v) - 1.0).abs() < 1e-12);
        }
        assert!(dot(&b[0], &b[1]).abs() < 1e-12);
    }
}
