#![allow(dead_code)]

use geoquant::{sample, DistributionSpec, Family, PointCloud};

pub fn gaussian(cov: Vec<Vec<f64>>, n: usize, seed: u64) -> PointCloud {
    sample(&DistributionSpec::new(Family::Gaussian { covariance: cov, mean: None }, n, seed)).unwrap()
}

pub fn std_gaussian(d: usize, n: usize, seed: u64) -> PointCloud {
    gaussian(geoquant::samplers::identity(d), n, seed)
}

pub fn student_t(nu: f64, d: usize, n: usize, seed: u64) -> PointCloud {
    sample(&DistributionSpec::new(
        Family::StudentT {
            nu,
            scale: geoquant::samplers::identity(d),
            mean: None,
        },
        n,
        seed,
    ))
    .unwrap()
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Brute-force halfplane depth count of `x`. Candidate normals are the
/// perpendiculars of every `x_i - x` (each nudged to both sides, which is
/// where the count can drop) and of every pair difference `x_j - x_i`.
pub fn brute_depth_count(rows: &[Vec<f64>], x: &[f64]) -> usize {
    let a: Vec<[f64; 2]> = rows.iter().map(|r| [r[0] - x[0], r[1] - x[1]]).collect();
    let same = a.iter().filter(|p| p[0] * p[0] + p[1] * p[1] <= 1e-24).count();
    let rest: Vec<[f64; 2]> = a
        .iter()
        .copied()
        .filter(|p| p[0] * p[0] + p[1] * p[1] > 1e-24)
        .collect();
    let mut best = rows.len();
    for ai in &rest {
        for sgn in [1.0, -1.0] {
            let mut strict = 0;
            let (mut fwd, mut back) = (0, 0);
            for aj in &rest {
                let c = sgn * cross(*ai, *aj);
                if c > 0.0 {
                    strict += 1;
                } else if c == 0.0 {
                    let dp = ai[0] * aj[0] + ai[1] * aj[1];
                    if dp > 0.0 {
                        fwd += 1;
                    } else {
                        back += 1;
                    }
                }
            }
            best = best.min(same + strict + fwd.min(back));
        }
    }
    // pair normals: plain closed halfplanes through x
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            let e = [rows[j][0] - rows[i][0], rows[j][1] - rows[i][1]];
            if e == [0.0, 0.0] {
                continue;
            }
            for sgn in [1.0, -1.0] {
                let c = a.iter().filter(|p| sgn * cross(e, **p) >= 0.0).count();
                best = best.min(c);
            }
        }
    }
    best
}

/// Halfplane count of `x` in the closed halfplane with inner normal `w`.
pub fn halfplane_count(rows: &[Vec<f64>], x: &[f64], w: &[f64]) -> usize {
    rows.iter()
        .filter(|r| {
            let p = [r[0] - x[0], r[1] - x[1]];
            p[0] * p[0] + p[1] * p[1] <= 1e-24 || w[0] * p[0] + w[1] * p[1] >= 0.0
        })
        .count()
}

pub fn rotation_2d(phi: f64) -> Vec<f64> {
    let (s, c) = phi.sin_cos();
    vec![c, -s, s, c]
}

pub fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let d = v.len();
    (0..d).map(|i| (0..d).map(|j| m[i * d + j] * v[j]).sum()).collect()
}

pub fn mat_t_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let d = v.len();
    (0..d).map(|j| (0..d).map(|i| m[i * d + j] * v[i]).sum()).collect()
}
