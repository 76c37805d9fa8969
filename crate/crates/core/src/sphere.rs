//! Direction sets on the unit sphere.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::types::{norm, UnitVector};

/// `n` equally spaced directions in the plane, starting at `e_1`.
pub fn circle_directions(n: usize) -> Vec<UnitVector> {
    (0..n)
        .map(|k| UnitVector::from_angle(2.0 * std::f64::consts::PI * k as f64 / n as f64))
        .collect()
}

/// `n` i.i.d. uniform directions in `R^d`.
pub fn random_directions(d: usize, n: usize, seed: u64) -> Vec<UnitVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(u) = UnitVector::new(v) {
            out.push(u);
        }
    }
    out
}

/// A low-discrepancy set of `n` directions.
///
/// `d = 2` gives the equally spaced circle grid, `d = 3` a Fibonacci lattice,
/// and higher dimensions a Halton sequence pushed through the normal quantile
/// function. For `d >= 3` the set is rotated by a random orthogonal matrix
/// drawn from `seed`.
pub fn sphere_directions(d: usize, n: usize, seed: u64) -> Vec<UnitVector> {
    match d {
        2 => circle_directions(n),
        3 => rotate(fibonacci_sphere(n), seed),
        _ => rotate(halton_sphere(d, n), seed),
    }
}

fn fibonacci_sphere(n: usize) -> Vec<Vec<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * k as f64;
            vec![r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

fn halton_sphere(d: usize, n: usize) -> Vec<Vec<f64>> {
    let normal = Normal::standard();
    (1..=n as u64)
        .map(|k| {
            (0..d)
                .map(|j| normal.inverse_cdf(radical_inverse(k, PRIMES[j % PRIMES.len()])))
                .collect()
        })
        .collect()
}

/// Haar-random orthogonal matrix (QR of a Gaussian matrix, sign-corrected).
pub fn random_orthogonal(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            out.push(q[(i, j)]);
        }
    }
    out
}

fn rotate(points: Vec<Vec<f64>>, seed: u64) -> Vec<UnitVector> {
    let d = points.first().map(|p| p.len()).unwrap_or(0);
    let m = random_orthogonal(d, seed);
    points
        .into_iter()
        .filter(|p| norm(p) > 0.0)
        .map(|p| {
            let v: Vec<f64> = (0..d)
                .map(|i| (0..d).map(|j| m[i * d + j] * p[j]).sum())
                .collect();
            UnitVector::new(v).expect("rotation of a nonzero vector")
        })
        .collect()
}
