mod common;

use common::*;
use geoquant::bounds::upper_bound_ub2;
use geoquant::depth::min_over_directions;
use geoquant::directional::projected_quantile;
use geoquant::sphere::{random_directions, random_orthogonal};
use geoquant::{
    depth_approx, depth_exact_2d, m_gamma_estimate, objective, sign_expectation, solve_quantile, tukey_median,
    DirectionSearch, IndexVector, PointCloud, SolverConfig, UnitVector,
};
use proptest::prelude::*;

fn cloud_strategy(nmin: usize, nmax: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), nmin..=nmax)
}

fn int_cloud_strategy(nmax: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec((-4i32..=4).prop_map(f64::from), 2), 3..=nmax)
}

fn unit(d: usize) -> impl Strategy<Value = UnitVector> {
    prop::collection::vec(-1.0f64..1.0, d)
        .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
        .prop_map(|v| UnitVector::new(v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn variance_identity(rows in cloud_strategy(3, 120, 3), q in prop::collection::vec(-12.0f64..12.0, 3)) {
        let Ok(cloud) = PointCloud::from_rows(&rows) else { return Ok(()) };
        prop_assume!(rows.iter().all(|r| r.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>() > 1e-12));
        let stats = sign_expectation(&cloud, &q, 1e-12).unwrap();
        let us: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let diff: Vec<f64> = r.iter().zip(&q).map(|(a, b)| a - b).collect();
                let l = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
                diff.iter().map(|v| v / l).collect()
            })
            .collect();
        let n = us.len() as f64;
        let mut pair = 0.0;
        for a in &us {
            for b in &us {
                pair += a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
            }
        }
        let rhs = 1.0 - pair / (2.0 * n * n);
        prop_assert!((stats.norm_mean_u.powi(2) - rhs).abs() <= 1e-10);
    }

    #[test]
    fn converged_solves_meet_the_residual(
        rows in cloud_strategy(5, 300, 2),
        alpha in 0.0f64..0.99,
        u in unit(2),
    ) {
        let Ok(cloud) = PointCloud::from_rows(&rows) else { return Ok(()) };
        let idx = IndexVector::new(alpha, u.clone()).unwrap();
        let rep = solve_quantile(&cloud, &idx, &SolverConfig::default()).unwrap();
        prop_assert!(rep.converged());
        prop_assert!(rep.residual <= 1e-8);
    }

    #[test]
    fn quantile_affine_equivariance(
        rows in cloud_strategy(10, 200, 2),
        alpha in 0.0f64..0.95,
        u in unit(2),
        phi in 0.0f64..6.283,
        t in prop::collection::vec(-5.0f64..5.0, 2),
    ) {
        let Ok(cloud) = PointCloud::from_rows(&rows) else { return Ok(()) };
        let r = rotation_2d(phi);
        let moved = cloud.affine_image(&r, &t).unwrap();
        let cfg = SolverConfig::default().with_tol(1e-11);
        let ru = UnitVector::new(mat_vec(&r, u.as_slice())).unwrap();
        let a = solve_quantile(&moved, &IndexVector::new(alpha, ru).unwrap(), &cfg).unwrap();
        let b = solve_quantile(&cloud, &IndexVector::new(alpha, u).unwrap(), &cfg).unwrap();
        let mapped: Vec<f64> = mat_vec(&r, b.q.as_slice()).iter().zip(&t).map(|(x, s)| x + s).collect();
        for (x, y) in a.q.as_slice().iter().zip(&mapped) {
            prop_assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn solved_quantile_minimizes_the_objective(
        rows in cloud_strategy(5, 150, 3),
        alpha in 0.0f64..0.9,
        u in unit(3),
        probes in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 100),
    ) {
        let Ok(cloud) = PointCloud::from_rows(&rows) else { return Ok(()) };
        let idx = IndexVector::new(alpha, u).unwrap();
        let rep = solve_quantile(&cloud, &idx, &SolverConfig::default()).unwrap();
        let q = rep.q.as_slice();
        let f0 = objective(&cloud, &idx, q);
        for p in &probes {
            let near: Vec<f64> = q.iter().zip(p).map(|(a, b)| a + 0.01 * b).collect();
            prop_assert!(f0 <= objective(&cloud, &idx, p) + 1e-9);
            prop_assert!(f0 <= objective(&cloud, &idx, &near) + 1e-9);
        }
    }

    #[test]
    fn exact_depth_matches_brute_force(rows in cloud_strategy(3, 120, 2), x in prop::collection::vec(-10.0f64..10.0, 2), pick in 0usize..200) {
        let Ok(cloud) = PointCloud::from_rows(&rows) else { return Ok(()) };
        // query both a free point and a sample point
        for q in [x.clone(), rows[pick % rows.len()].clone()] {
            let dv = depth_exact_2d(&cloud, &q).unwrap();
            prop_assert_eq!(dv.count, brute_depth_count(&rows, &q));
            if let Some(w) = dv.witness_direction {
                prop_assert_eq!(halfplane_count(&rows, &q, w.as_slice()), dv.count);
            }
        }
    }

    #[test]
    fn exact_depth_matches_brute_force_with_ties(rows in int_cloud_strategy(60), x in prop::collection::vec((-5i32..=5).prop_map(f64::from), 2)) {
        let Ok(cloud) = PointCloud::from_rows(&rows) else { return Ok(()) };
        let dv = depth_exact_2d(&cloud, &x).unwrap();
        prop_assert_eq!(dv.count, brute_depth_count(&rows, &x));
    }

    #[test]
    fn depth_counts_survive_rotation(
        rows in cloud_strategy(3, 100, 2),
        x in prop::collection::vec(-10.0f64..10.0, 2),
        phi in 0.0f64..6.283,
        t in prop::collection::vec(-5.0f64..5.0, 2),
    ) {
        let Ok(cloud) = PointCloud::from_rows(&rows) else { return Ok(()) };
        let r = rotation_2d(phi);
        let moved = cloud.affine_image(&r, &t).unwrap();
        let rx: Vec<f64> = mat_vec(&r, &x).iter().zip(&t).map(|(a, b)| a + b).collect();
        prop_assert_eq!(depth_exact_2d(&cloud, &x).unwrap().count, depth_exact_2d(&moved, &rx).unwrap().count);
    }

    #[test]
    fn depth_counts_survive_exact_symmetries(rows in int_cloud_strategy(60), x in prop::collection::vec((-5i32..=5).prop_map(f64::from), 2), k in 0usize..8) {
        let Ok(cloud) = PointCloud::from_rows(&rows) else { return Ok(()) };
        // the eight signed permutation matrices of the plane, with an integer shift
        let (sx, sy) = (if k & 1 == 0 { 1.0 } else { -1.0 }, if k & 2 == 0 { 1.0 } else { -1.0 });
        let r = if k & 4 == 0 { vec![sx, 0.0, 0.0, sy] } else { vec![0.0, sx, sy, 0.0] };
        let t = [3.0, -2.0];
        let moved = cloud.affine_image(&r, &t).unwrap();
        let rx: Vec<f64> = mat_vec(&r, &x).iter().zip(&t).map(|(a, b)| a + b).collect();
        prop_assert_eq!(depth_exact_2d(&cloud, &x).unwrap().count, depth_exact_2d(&moved, &rx).unwrap().count);
    }

    #[test]
    fn approximate_depth_never_undercuts(rows in cloud_strategy(3, 150, 2), x in prop::collection::vec(-10.0f64..10.0, 2), seed in any::<u64>()) {
        let Ok(cloud) = PointCloud::from_rows(&rows) else { return Ok(()) };
        let exact = depth_exact_2d(&cloud, &x).unwrap();
        let approx = depth_approx(&cloud, &x, 200, seed).unwrap();
        prop_assert!(approx.count >= exact.count);
    }

    #[test]
    fn depth_decreases_along_rays(rows in cloud_strategy(10, 150, 2), phi in 0.0f64..6.283, t1 in 0.0f64..15.0, dt in 0.0f64..15.0) {
        let Ok(cloud) = PointCloud::from_rows(&rows) else { return Ok(()) };
        let theta = tukey_median(&cloud, 8).unwrap();
        let th = theta.as_slice();
        let v = [phi.cos(), phi.sin()];
        let at = |t: f64| depth_exact_2d(&cloud, &[th[0] + t * v[0], th[1] + t * v[1]]).unwrap().value;
        let slack = 2.0 / cloud.n() as f64;
        prop_assert!(at(t1 + dt) <= at(t1) + slack);
    }

    #[test]
    fn depth_vanishes_far_out(rows in cloud_strategy(3, 150, 3), x in prop::collection::vec(-1.0f64..1.0, 3)) {
        let Ok(cloud) = PointCloud::from_rows(&rows) else { return Ok(()) };
        prop_assume!(x.iter().map(|v| v * v).sum::<f64>() > 1e-4);
        let far: Vec<f64> = x.iter().map(|v| v * 1e4).collect();
        // the direction of far itself separates it from the cloud
        let mut dirs = random_directions(3, 50, 1);
        dirs.push(UnitVector::new(far.clone()).unwrap());
        prop_assert_eq!(min_over_directions(&cloud, &far, dirs).count, 0);
        let rows2: Vec<Vec<f64>> = rows.iter().map(|r| r[..2].to_vec()).collect();
        if let Ok(c2) = PointCloud::from_rows(&rows2) {
            prop_assert_eq!(depth_exact_2d(&c2, &far[..2]).unwrap().count, 0);
        }
    }

    #[test]
    fn projected_quantile_is_monotone_in_beta(rows in cloud_strategy(3, 200, 2), u in unit(2), b1 in 0.0f64..0.999, b2 in 0.0f64..0.999) {
        let Ok(cloud) = PointCloud::from_rows(&rows) else { return Ok(()) };
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        let a = projected_quantile(&cloud, &u, lo).unwrap().value;
        let b = projected_quantile(&cloud, &u, hi).unwrap().value;
        prop_assert!(a <= b);
    }

    #[test]
    fn projected_quantile_translates_exactly_on_axes(rows in int_cloud_strategy(80), beta in 0.0f64..0.999, t in prop::collection::vec((-50i32..50).prop_map(f64::from), 2), axis in 0usize..2) {
        let Ok(cloud) = PointCloud::from_rows(&rows) else { return Ok(()) };
        let u = UnitVector::axis(2, axis);
        let moved = cloud.affine_image(&[1.0, 0.0, 0.0, 1.0], &t).unwrap();
        let a = projected_quantile(&moved, &u, beta).unwrap().value;
        let b = projected_quantile(&cloud, &u, beta).unwrap().value;
        prop_assert_eq!(a, b + t[axis]);
    }

    #[test]
    fn projected_quantile_translates(rows in cloud_strategy(3, 200, 3), u in unit(3), beta in 0.0f64..0.999, t in prop::collection::vec(-5.0f64..5.0, 3)) {
        let Ok(cloud) = PointCloud::from_rows(&rows) else { return Ok(()) };
        let eye = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let moved = cloud.affine_image(&eye, &t).unwrap();
        let a = projected_quantile(&moved, &u, beta).unwrap().value;
        let b = projected_quantile(&cloud, &u, beta).unwrap().value;
        let shift: f64 = u.as_slice().iter().zip(&t).map(|(x, y)| x * y).sum();
        prop_assert!((a - (b + shift)).abs() <= 1e-12 * (1.0 + b.abs() + shift.abs()));
    }

    #[test]
    fn m_gamma_estimate_stays_in_range(rows in cloud_strategy(20, 200, 2), gamma in 0.3f64..0.99) {
        let Ok(cloud) = PointCloud::from_rows(&rows) else { return Ok(()) };
        match m_gamma_estimate(&cloud, gamma, &DirectionSearch::new(90, 3)) {
            Ok(m) => prop_assert!(m.m_gamma > 0.0 && m.m_gamma <= 1.0 - gamma),
            Err(geoquant::Error::ZeroMass { .. }) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn ub2_times_gap_is_flat(rows in cloud_strategy(3, 100, 2), a1 in 0.0f64..0.9999, a2 in 0.0f64..0.9999) {
        let Ok(cloud) = PointCloud::from_rows(&rows) else { return Ok(()) };
        let x = upper_bound_ub2(&cloud, a1).unwrap() * (1.0 - a1);
        let y = upper_bound_ub2(&cloud, a2).unwrap() * (1.0 - a2);
        prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
    }
}

#[test]
fn affine_equivariance_in_three_dimensions() {
    let cloud = std_gaussian(3, 400, 11);
    let cfg = SolverConfig::default().with_tol(1e-11);
    for seed in 0..10u64 {
        let r = random_orthogonal(3, seed);
        let t = [0.5 * seed as f64, -1.0, 2.0];
        let moved = cloud.affine_image(&r, &t).unwrap();
        let u = UnitVector::new(vec![1.0, seed as f64 - 4.5, 0.3]).unwrap();
        let ru = UnitVector::new(mat_vec(&r, u.as_slice())).unwrap();
        let a = solve_quantile(&moved, &IndexVector::new(0.8, ru).unwrap(), &cfg).unwrap();
        let b = solve_quantile(&cloud, &IndexVector::new(0.8, u).unwrap(), &cfg).unwrap();
        let back = mat_t_vec(&r, &a.q.as_slice().iter().zip(&t).map(|(x, s)| x - s).collect::<Vec<_>>());
        for (x, y) in back.iter().zip(b.q.as_slice()) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}

#[test]
fn lower_bound_grows_with_alpha() {
    use geoquant::bounds::admissibility;
    use geoquant::directional::min_projected_quantile;
    let cloud = std_gaussian(2, 3000, 5);
    let theta = tukey_median(&cloud, 10).unwrap();
    let m = 1.0 / 12.0;
    let search = DirectionSearch::new(180, 2).without_refinement();
    let mut prev = 0.0;
    for alpha in [0.987, 0.99, 0.993, 0.996, 0.999] {
        let (tau, _, ok) = admissibility(m, alpha, 2, false);
        assert!(ok);
        let (_, lb) = min_projected_quantile(&cloud, 1.0 - tau, &theta, &search).unwrap();
        assert!(lb >= prev, "{lb} < {prev} at alpha {alpha}");
        prev = lb;
    }
}
