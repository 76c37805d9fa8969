//! Halfspace (Tukey) depth, the Tukey median and central-region boundaries.
//!
//! Closed halfspaces `{y : <v, y - x> >= 0}` are used throughout, so sample
//! points on the boundary hyperplane count toward the halfspace.
//!
//! In the plane depth is computed exactly by an angular sweep. In higher
//! dimension it is approximated from above by minimizing over a finite set of
//! random directions.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{random_directions, sphere_directions};
use crate::types::{dist, dot, Point, PointCloud, UnitVector};

/// Sample points closer than this to the query are treated as coinciding.
pub const COINCIDENCE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthValue {
    pub value: f64,
    /// Number of sample points in the minimizing halfspace.
    pub count: usize,
    /// Normal of a minimizing halfspace, when one is available.
    pub witness_direction: Option<UnitVector>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthConfig {
    /// Random directions used when `d >= 3`.
    pub approx_dirs: usize,
    pub seed: u64,
    /// Grid refinements of the Tukey median search.
    pub median_refinements: usize,
    /// Bisection tolerance of the ray search, in the ray parameter.
    pub bisection_tol: f64,
}

impl Default for DepthConfig {
    fn default() -> Self {
        DepthConfig {
            approx_dirs: 1000,
            seed: 7,
            median_refinements: 20,
            bisection_tol: 1e-6,
        }
    }
}

fn require_2d(cloud: &PointCloud, x: &[f64]) -> Result<()> {
    if cloud.dim() != 2 || x.len() != 2 {
        return Err(Error::DimensionMismatch {
            got: if cloud.dim() != 2 { cloud.dim() } else { x.len() },
            expected: "2".into(),
        });
    }
    Ok(())
}

#[inline]
fn cross(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

/// 0 for angles in `[0, pi)`, 1 for `[pi, 2 pi)`.
#[inline]
fn half(v: (f64, f64)) -> u8 {
    if v.1 > 0.0 || (v.1 == 0.0 && v.0 > 0.0) {
        0
    } else {
        1
    }
}

fn angle_cmp(a: &(f64, f64), b: &(f64, f64)) -> Ordering {
    half(*a).cmp(&half(*b)).then_with(|| {
        let c = cross(*a, *b);
        if c > 0.0 {
            Ordering::Less
        } else if c < 0.0 {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    })
}

/// Monotone stand-in for the polar angle with range `[0, 4)`.
#[inline]
fn pseudo_angle(v: (f64, f64)) -> f64 {
    let (x, y) = v;
    if y > 0.0 || (y == 0.0 && x > 0.0) {
        if x >= 0.0 {
            y / (x + y)
        } else {
            1.0 - x / (y - x)
        }
    } else if x < 0.0 {
        2.0 - y / (-x - y)
    } else {
        3.0 + x / (x - y)
    }
}

/// Sorts by the pseudo-angle quantized to 32 bits (LSD radix sort, four
/// byte passes), then repairs the order among near-ties with an insertion
/// pass under the exact comparator.
fn sort_by_angle(dirs: &mut Vec<(f64, f64)>) {
    let n = dirs.len();
    let scale = (1u64 << 30) as f64;
    let mut keys: Vec<(u32, u32)> = dirs
        .iter()
        .enumerate()
        .map(|(i, &v)| (((pseudo_angle(v) * scale) as u64).min(u32::MAX as u64) as u32, i as u32))
        .collect();
    let mut tmp = vec![(0u32, 0u32); n];
    for pass in 0..4 {
        let shift = 8 * pass;
        let mut counts = [0usize; 257];
        for &(k, _) in &keys {
            counts[((k >> shift) & 0xff) as usize + 1] += 1;
        }
        for b in 0..256 {
            counts[b + 1] += counts[b];
        }
        for &e in &keys {
            let b = ((e.0 >> shift) & 0xff) as usize;
            tmp[counts[b]] = e;
            counts[b] += 1;
        }
        std::mem::swap(&mut keys, &mut tmp);
    }
    let sorted: Vec<(f64, f64)> = keys.iter().map(|&(_, i)| dirs[i as usize]).collect();
    *dirs = sorted;
    for i in 1..n {
        let mut j = i;
        while j > 0 && angle_cmp(&dirs[j - 1], &dirs[j]) == Ordering::Greater {
            dirs.swap(j - 1, j);
            j -= 1;
        }
    }
}

/// `b` lies in the half-open angular range `(angle(a), angle(a) + pi]`.
#[inline]
fn in_upper_half(a: (f64, f64), b: (f64, f64)) -> bool {
    let c = cross(a, b);
    c > 0.0 || (c == 0.0 && a.0 * b.0 + a.1 * b.1 < 0.0)
}

/// Exact planar halfspace depth by an `O(n log n)` angular sweep.
///
/// Sorting the directions `x_i - x` by angle, every minimal closed halfplane
/// through `x` can be rotated until its boundary has just passed some
/// direction `theta_i`; it then holds exactly the points with angle in
/// `(theta_i, theta_i + pi]`. The depth is the least such count plus the
/// points coinciding with `x`.
pub fn depth_exact_2d(cloud: &PointCloud, x: &[f64]) -> Result<DepthValue> {
    require_2d(cloud, x)?;
    let n = cloud.n();
    let (count, minimizer) = sweep(cloud, x);
    Ok(DepthValue {
        value: count as f64 / n as f64,
        count,
        witness_direction: minimizer.map(|(reps, i)| witness(&reps, i)),
    })
}

/// Minimal closed-halfplane count, with the sorted direction clusters and
/// the index of a minimizing cluster (absent when every point coincides
/// with `x`).
fn sweep(cloud: &PointCloud, x: &[f64]) -> (usize, Option<(Vec<(f64, f64)>, usize)>) {
    let n = cloud.n();
    let eps2 = COINCIDENCE_EPS * COINCIDENCE_EPS;
    let mut coincident = 0usize;
    let mut dirs: Vec<(f64, f64)> = Vec::with_capacity(n);
    for p in cloud.points() {
        let v = (p[0] - x[0], p[1] - x[1]);
        if v.0 * v.0 + v.1 * v.1 <= eps2 {
            coincident += 1;
        } else {
            dirs.push(v);
        }
    }
    if dirs.is_empty() {
        return (n, None);
    }
    sort_by_angle(&mut dirs);

    // Collapse identical directions into clusters with multiplicities.
    let mut reps: Vec<(f64, f64)> = Vec::new();
    let mut mult: Vec<usize> = Vec::new();
    for v in dirs {
        match reps.last() {
            Some(&r) if half(r) == half(v) && cross(r, v) == 0.0 => *mult.last_mut().unwrap() += 1,
            _ => {
                reps.push(v);
                mult.push(1);
            }
        }
    }
    let k = reps.len();
    let mut best = (usize::MAX, 0usize);
    let mut end = 1usize; // exclusive window end, in unrolled indices
    let mut window = 0usize;
    for i in 0..k {
        if end <= i {
            end = i + 1;
            window = 0;
        }
        while end < i + k && in_upper_half(reps[i], reps[end % k]) {
            window += mult[end % k];
            end += 1;
        }
        if window < best.0 {
            best = (window, i);
        }
        // Cluster i + 1 leaves the window before the next step.
        if end > i + 1 {
            window -= mult[(i + 1) % k];
        }
    }
    (coincident + best.0, Some((reps, best.1)))
}

/// Normal of an open halfplane realizing the minimal count for cluster `i`:
/// boundary rotated a little past `reps[i]`, staying clear of other events.
fn witness(reps: &[(f64, f64)], i: usize) -> UnitVector {
    let ang = |v: (f64, f64)| v.1.atan2(v.0);
    let tau = std::f64::consts::TAU;
    let base = ang(reps[i]);
    let mut gap = std::f64::consts::PI;
    for &r in reps {
        // angular distances from base and from base + pi, measured forward
        for origin in [base, base + std::f64::consts::PI] {
            let delta = (ang(r) - origin).rem_euclid(tau);
            if delta > 0.0 && delta < gap {
                gap = delta;
            }
        }
    }
    let psi = base + 0.5 * gap;
    UnitVector::from_angle(psi + std::f64::consts::FRAC_PI_2)
}

/// Random-projection depth: the least closed-halfspace mass over `n_dirs`
/// uniform directions. Never smaller than the true depth.
pub fn depth_approx(cloud: &PointCloud, x: &[f64], n_dirs: usize, seed: u64) -> Result<DepthValue> {
    if x.len() != cloud.dim() {
        return Err(Error::DimensionMismatch {
            got: x.len(),
            expected: cloud.dim().to_string(),
        });
    }
    if n_dirs == 0 {
        return Err(Error::InvalidParameter("n_dirs must be >= 1".into()));
    }
    let dirs = random_directions(cloud.dim(), n_dirs, seed);
    Ok(min_over_directions(cloud, x, dirs))
}

/// Least closed-halfspace count over the given normals.
pub fn min_over_directions(cloud: &PointCloud, x: &[f64], dirs: Vec<UnitVector>) -> DepthValue {
    let counts: Vec<usize> = dirs
        .par_iter()
        .map(|v| {
            let v = v.as_slice();
            let vx = dot(v, x);
            cloud
                .points()
                .filter(|p| {
                    let s: f64 = p.iter().zip(v).map(|(a, b)| a * b).sum();
                    s - vx >= 0.0
                })
                .count()
        })
        .collect();
    let (arg, &count) = counts
        .iter()
        .enumerate()
        .min_by_key(|(_, c)| **c)
        .expect("at least one direction");
    DepthValue {
        value: count as f64 / cloud.n() as f64,
        count,
        witness_direction: Some(dirs[arg].clone()),
    }
}

/// Evaluates depth repeatedly on one cloud: exact in the plane, otherwise by
/// projection onto a fixed direction set with presorted projections, so each
/// query costs `O(n_dirs log n)` and the depth function is deterministic.
pub struct DepthEvaluator<'a> {
    cloud: &'a PointCloud,
    projections: Option<(Vec<UnitVector>, Vec<Vec<f64>>)>,
}

impl<'a> DepthEvaluator<'a> {
    pub fn new(cloud: &'a PointCloud, cfg: &DepthConfig) -> Self {
        if cloud.dim() == 2 {
            return DepthEvaluator {
                cloud,
                projections: None,
            };
        }
        let dirs = random_directions(cloud.dim(), cfg.approx_dirs.max(1), cfg.seed);
        let sorted = dirs
            .par_iter()
            .map(|v| {
                let mut p: Vec<f64> = cloud.points().map(|x| dot(v.as_slice(), x)).collect();
                p.sort_by(f64::total_cmp);
                p
            })
            .collect();
        DepthEvaluator {
            cloud,
            projections: Some((dirs, sorted)),
        }
    }

    pub fn cloud(&self) -> &PointCloud {
        self.cloud
    }

    pub fn is_exact(&self) -> bool {
        self.projections.is_none()
    }

    pub fn depth(&self, x: &[f64]) -> f64 {
        self.depth_count(x) as f64 / self.cloud.n() as f64
    }

    pub fn depth_count(&self, x: &[f64]) -> usize {
        match &self.projections {
            None => sweep(self.cloud, x).0,
            Some((dirs, sorted)) => dirs
                .iter()
                .zip(sorted)
                .map(|(v, p)| {
                    let t = dot(v.as_slice(), x);
                    p.len() - p.partition_point(|&s| s < t)
                })
                .min()
                .unwrap_or(0),
        }
    }
}

/// Tukey median by grid search with the default [`DepthConfig`].
pub fn tukey_median(cloud: &PointCloud, grid_refinements: usize) -> Result<Point> {
    let cfg = DepthConfig {
        median_refinements: grid_refinements,
        ..Default::default()
    };
    Ok(tukey_median_with(&DepthEvaluator::new(cloud, &cfg), grid_refinements)?.0)
}

/// Sample points examined when seeding the median search.
const MEDIAN_SEED_CANDIDATES: usize = 400;

/// Maximizes depth: start from the deepest sample point near the
/// coordinate-wise median, then refine on grids that halve in size each
/// round. Ties at the maximal depth are replaced by their mean when that
/// mean is at least as deep. Returns the point and its depth.
pub fn tukey_median_with(eval: &DepthEvaluator<'_>, grid_refinements: usize) -> Result<(Point, f64)> {
    let cloud = eval.cloud();
    let d = cloud.dim();
    let center = cloud.coordinate_median();
    let mut order: Vec<(f64, usize)> = (0..cloud.n())
        .map(|i| (dist(cloud.point(i), &center), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.truncate(MEDIAN_SEED_CANDIDATES);
    let seeds: Vec<Vec<f64>> = order.iter().map(|&(_, i)| cloud.point(i).to_vec()).collect();
    let (mut incumbent, mut best) = pick_deepest(eval, seeds);

    let mut spread: Vec<f64> = cloud.points().map(|p| dist(p, &incumbent)).collect();
    let mid = spread.len() / 2;
    let mut h = 0.25 * *spread.select_nth_unstable_by(mid, f64::total_cmp).1;
    for _ in 0..grid_refinements {
        let mut grid = Vec::new();
        if d == 2 {
            for i in -2i32..=2 {
                for j in -2i32..=2 {
                    grid.push(vec![
                        incumbent[0] + h * i as f64,
                        incumbent[1] + h * j as f64,
                    ]);
                }
            }
        } else {
            grid.push(incumbent.clone());
            for k in 0..d {
                for s in [-1.0, 1.0] {
                    let mut p = incumbent.clone();
                    p[k] += s * h;
                    grid.push(p);
                }
            }
        }
        let (cand, depth) = pick_deepest(eval, grid);
        if depth >= best {
            incumbent = cand;
            best = depth;
        }
        h *= 0.5;
    }
    Ok((Point::new(incumbent)?, best))
}

/// Deepest of `cands`; exact ties collapse to their mean when it is at
/// least as deep.
fn pick_deepest(eval: &DepthEvaluator<'_>, cands: Vec<Vec<f64>>) -> (Vec<f64>, f64) {
    let counts: Vec<usize> = cands.par_iter().map(|c| eval.depth_count(c)).collect();
    let max = *counts.iter().max().expect("nonempty candidate set");
    let tied: Vec<&Vec<f64>> = cands
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c == max)
        .map(|(p, _)| p)
        .collect();
    let n = eval.cloud().n() as f64;
    if tied.len() > 1 {
        let d = tied[0].len();
        let mut mean = vec![0.0; d];
        for p in &tied {
            for k in 0..d {
                mean[k] += p[k];
            }
        }
        mean.iter_mut().for_each(|v| *v /= tied.len() as f64);
        let c = eval.depth_count(&mean);
        if c >= max {
            return (mean, c as f64 / n);
        }
    }
    (tied[0].clone(), max as f64 / n)
}

/// A central region `D(tau)` sampled along rays from the Tukey median.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthRegion {
    pub tau: f64,
    /// Boundary points, ordered by ray (a closed polyline in the plane).
    pub boundary: Vec<Point>,
    pub directions: Vec<UnitVector>,
    pub center: Point,
    pub center_depth: f64,
}

impl DepthRegion {
    /// Coordinate-wise bounding box of the boundary sample.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.center.dim();
        let mut lo = self.center.as_slice().to_vec();
        let mut hi = lo.clone();
        for b in &self.boundary {
            for k in 0..d {
                lo[k] = lo[k].min(b.as_slice()[k]);
                hi[k] = hi[k].max(b.as_slice()[k]);
            }
        }
        (lo, hi)
    }

    /// Distances of the boundary points from the center.
    pub fn radii(&self) -> Vec<f64> {
        self.boundary
            .iter()
            .map(|b| dist(b.as_slice(), self.center.as_slice()))
            .collect()
    }
}

/// Boundary of `D(tau)` with default settings.
pub fn depth_region_boundary(cloud: &PointCloud, tau: f64, n_rays: usize) -> Result<DepthRegion> {
    let cfg = DepthConfig::default();
    let eval = DepthEvaluator::new(cloud, &cfg);
    let (center, depth) = tukey_median_with(&eval, cfg.median_refinements)?;
    depth_region_boundary_with(&eval, tau, n_rays, &center, depth, &cfg)
}

/// Boundary of `D(tau)` by bisection along `n_rays` rays from `center`
/// (whose depth is `center_depth`). Depth is nonincreasing along rays from
/// the deepest point, so the largest `t` with `HD(center + t v) >= tau` is
/// well defined.
pub fn depth_region_boundary_with(
    eval: &DepthEvaluator<'_>,
    tau: f64,
    n_rays: usize,
    center: &Point,
    center_depth: f64,
    cfg: &DepthConfig,
) -> Result<DepthRegion> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!("tau must lie in (0, 1), got {tau}")));
    }
    if n_rays < 8 {
        return Err(Error::InvalidParameter("n_rays must be >= 8".into()));
    }
    let dirs = sphere_directions(eval.cloud().dim(), n_rays, cfg.seed);
    depth_region_along(eval, tau, dirs, center, center_depth, cfg)
}

/// As [`depth_region_boundary_with`] along caller-supplied directions.
pub fn depth_region_along(
    eval: &DepthEvaluator<'_>,
    tau: f64,
    dirs: Vec<UnitVector>,
    center: &Point,
    center_depth: f64,
    cfg: &DepthConfig,
) -> Result<DepthRegion> {
    if tau > center_depth {
        return Err(Error::EmptyRegion {
            tau,
            max_depth: center_depth,
        });
    }
    let cloud = eval.cloud();
    let c = center.as_slice();
    let mut radii: Vec<f64> = cloud.points().map(|p| dist(p, c)).collect();
    let mid = radii.len() / 2;
    let start = radii.select_nth_unstable_by(mid, f64::total_cmp).1.max(cfg.bisection_tol);
    let boundary: Vec<Point> = dirs
        .par_iter()
        .map(|v| {
            let v = v.as_slice();
            let at = |t: f64| -> Vec<f64> { c.iter().zip(v).map(|(a, b)| a + t * b).collect() };
            // Depth vanishes outside the hull, so doubling terminates.
            let (mut lo, mut hi) = (0.0, start);
            while eval.depth(&at(hi)) >= tau {
                lo = hi;
                hi *= 2.0;
            }
            while hi - lo > cfg.bisection_tol {
                let mid = 0.5 * (lo + hi);
                if eval.depth(&at(mid)) >= tau {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Point::new(at(lo))
        })
        .collect::<Result<_>>()?;
    Ok(DepthRegion {
        tau,
        boundary,
        directions: dirs,
        center: center.clone(),
        center_depth,
    })
}
