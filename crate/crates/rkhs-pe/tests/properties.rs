//! Property tests for the structural invariants: kernel symmetry and
//! positivity, closed-form/Bessel agreement, quadrature consistency, pencil
//! sharpness, and the estimator's error-dynamics and Lyapunov structure.

use nalgebra::{dvector, DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rkhs_pe::dynamics::{self, integrate, Trajectory, VectorField};
use rkhs_pe::estimator::{run_estimator, EstimatorConfig, PlantSpec};
use rkhs_pe::kernels::{matern_profile_via_bessel, Kernel};
use rkhs_pe::linalg;
use rkhs_pe::persistence::{self, IndexingSet};

fn matern32() -> Kernel {
    Kernel::matern(1.5, 0.5).unwrap()
}

proptest! {
    #[test]
    fn kernel_symmetric_in_arguments(
        ax in -5.0f64..5.0, ay in -5.0f64..5.0,
        bx in -5.0f64..5.0, by in -5.0f64..5.0,
        nu in prop::sample::select(vec![0.5, 1.5, 2.5, 0.8, 3.7]),
    ) {
        let k = Kernel::matern(nu, 0.7).unwrap();
        let a = dvector![ax, ay];
        let b = dvector![bx, by];
        let kab = k.eval(&a, &b).unwrap();
        let kba = k.eval(&b, &a).unwrap();
        prop_assert!((kab - kba).abs() <= 1e-12 * kab.abs().max(1.0));
    }

    #[test]
    fn matern_profile_monotone_decreasing(
        xi1 in 0.0f64..15.0, gap in 1e-6f64..15.0,
        nu in prop::sample::select(vec![0.5, 1.5, 2.5, 0.7, 4.0]),
    ) {
        let k = Kernel::matern(nu, 1.0).unwrap();
        let lo = k.eval_radial(xi1).unwrap();
        let hi = k.eval_radial(xi1 + gap).unwrap();
        prop_assert!(hi <= lo + 1e-14, "profile increased: 𝔎({xi1}) = {lo}, 𝔎({}) = {hi}", xi1 + gap);
    }

    #[test]
    fn matern_closed_forms_match_bessel_route(
        xi in 1e-6f64..20.0,
        nu in prop::sample::select(vec![0.5, 1.5, 2.5]),
    ) {
        let k = Kernel::matern(nu, 1.0).unwrap();
        let closed = k.eval_radial(xi).unwrap();
        let bessel = matern_profile_via_bessel(nu, xi).unwrap();
        prop_assert!((closed - bessel).abs() <= 1e-10 * closed.abs().max(1e-300),
            "ν = {nu}, ξ = {xi}: closed {closed:e} vs Bessel {bessel:e}");
    }

    #[test]
    fn gram_is_positive_semidefinite(
        pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 2..7),
    ) {
        let centers: Vec<DVector<f64>> = pts.iter().map(|&(x, y)| dvector![x, y]).collect();
        // skip near-coincident draws: coincident centers are rejected by design
        let mut min_sep = f64::INFINITY;
        for i in 0..centers.len() {
            for j in (i + 1)..centers.len() {
                min_sep = min_sep.min((&centers[i] - &centers[j]).norm());
            }
        }
        prop_assume!(min_sep > 1e-3);
        let gram = matern32().gram(&centers).unwrap();
        let eigs = gram.matrix().clone().symmetric_eigenvalues();
        let bound = -1e-10 * gram.matrix().norm();
        prop_assert!(eigs.iter().all(|&e| e >= bound), "min eig {:e}", eigs.min());
    }

    #[test]
    fn reproducing_consistency_at_centers(
        pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 2..7),
        seed in 0u64..1000,
    ) {
        let centers: Vec<DVector<f64>> = pts.iter().map(|&(x, y)| dvector![x, y]).collect();
        let mut min_sep = f64::INFINITY;
        for i in 0..centers.len() {
            for j in (i + 1)..centers.len() {
                min_sep = min_sep.min((&centers[i] - &centers[j]).norm());
            }
        }
        prop_assume!(min_sep > 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = centers.len();
        let alpha = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
        let omega = IndexingSet::new(matern32(), centers).unwrap();
        // f = Σ α_j 𝔎(c_j,·) evaluated at c_i must equal (Kα)_i
        let want = omega.gram().matrix() * &alpha;
        for (i, c) in omega.centers().iter().enumerate() {
            let got = omega.regressor(c).unwrap().dot(&alpha);
            prop_assert!((got - want[i]).abs() <= 1e-10 * want[i].abs().max(1.0));
        }
    }
}

#[test]
fn hopf_attracts_random_initial_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let vf = VectorField::hopf();
    for _ in 0..20 {
        let r0 = rng.gen_range(0.05..3.0);
        let th = rng.gen_range(0.0..std::f64::consts::TAU);
        let x0 = dvector![r0 * th.cos(), r0 * th.sin()];
        let traj = integrate(&vf, &x0, 100.0, 1e-3).unwrap();
        let r = traj.final_state().norm();
        assert!((r - 1.0).abs() < 1e-3, "from r0 = {r0}: final radius {r}");
    }
}

#[test]
fn limit_set_respects_requested_spacing() {
    let traj = integrate(&VectorField::hopf(), &dvector![0.1, 0.0], 120.0, 1e-3).unwrap();
    for delta_s in [0.1, 0.2, 0.35, 0.5] {
        let est = dynamics::extract_limit_set(&traj, 60.0, delta_s).unwrap();
        let pts = est.points();
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let d = (&pts[i] - &pts[j]).norm();
                assert!(
                    d >= delta_s,
                    "spacing {d} < {delta_s} between retained points {i}, {j}"
                );
            }
        }
    }
}

#[test]
fn singleton_window_matches_scalar_quadrature_random_windows() {
    let traj = integrate(&VectorField::hopf(), &dvector![0.1, 0.0], 60.0, 1e-3).unwrap();
    let k = matern32();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..25 {
        let c = dvector![rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
        let omega = IndexingSet::new(k.clone(), vec![c.clone()]).unwrap();
        let t = rng.gen_range(0.0..30.0);
        let delta = rng.gen_range(0.5..20.0);
        let g = persistence::pe_window_integral(&traj, &omega, t, delta).unwrap();

        // independent trapezoid over the scalar integrand 𝔎²(|x(τ) − c|)
        let times = traj.times();
        let locate = |target: f64| {
            let hi = times.partition_point(|&x| x < target);
            if hi == 0 {
                0
            } else if hi >= times.len() {
                times.len() - 1
            } else if (times[hi] - target).abs() < (target - times[hi - 1]).abs() {
                hi
            } else {
                hi - 1
            }
        };
        let (i0, i1) = (locate(t), locate(t + delta));
        let f = |i: usize| {
            let s = traj.state(i);
            let d = ((s[0] - c[0]).powi(2) + (s[1] - c[1]).powi(2)).sqrt();
            let v = k.eval_radial(d).unwrap();
            v * v
        };
        let mut acc = 0.0;
        for idx in i0..i1 {
            acc += 0.5 * (times[idx + 1] - times[idx]) * (f(idx) + f(idx + 1));
        }
        assert!(
            (g[(0, 0)] - acc).abs() < 1e-12 * acc.max(1.0),
            "window ({t}, {delta}): {:.17e} vs {acc:.17e}",
            g[(0, 0)]
        );
    }
}

#[test]
fn pencil_extremes_are_sharp_rayleigh_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..100 {
        let n = rng.gen_range(2..6);
        // G PSD, K SPD, both random
        let m1 = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let g = &m1 * m1.transpose();
        let m2 = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let k = &m2 * m2.transpose() + DMatrix::identity(n, n) * 0.5;
        let (lo, hi) = linalg::pencil_extremes(&g, &k).unwrap();
        let scale = hi.abs().max(1.0);
        for _ in 0..100 {
            let alpha = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let num = (alpha.transpose() * &g * &alpha)[(0, 0)];
            let den = (alpha.transpose() * &k * &alpha)[(0, 0)];
            if den <= 1e-12 {
                continue;
            }
            let q = num / den;
            assert!(
                q >= lo - 1e-9 * scale && q <= hi + 1e-9 * scale,
                "Rayleigh quotient {q} outside [{lo}, {hi}]"
            );
        }
    }
}

#[test]
fn window_integral_monotone_in_delta() {
    let traj = integrate(&VectorField::hopf(), &dvector![0.1, 0.0], 60.0, 1e-3).unwrap();
    let centers = vec![
        dvector![1.0, 0.0],
        dvector![0.0, 1.0],
        dvector![-1.0, 0.0],
    ];
    let omega = IndexingSet::new(matern32(), centers).unwrap();
    let t = 20.0;
    let mut prev: Option<DMatrix<f64>> = None;
    for steps in 1..=6 {
        let delta = 2.0 * steps as f64;
        let g = persistence::pe_window_integral(&traj, &omega, t, delta).unwrap();
        if let Some(p) = prev {
            let diff = &g - &p;
            let min_eig = diff.symmetric_eigenvalues().min();
            assert!(
                min_eig >= -1e-10 * g.norm(),
                "G not monotone in Δ: min eig of increment {min_eig:e}"
            );
        }
        prev = Some(g);
    }
}

#[test]
fn classical_pe_matrix_is_psd_on_random_windows() {
    let traj = integrate(&VectorField::fish(0.0), &dvector![0.5, 0.0], 40.0, 1e-3).unwrap();
    let centers = vec![dvector![0.3, 0.1], dvector![0.6, -0.1], dvector![0.1, -0.2]];
    let omega = IndexingSet::new(matern32(), centers).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..40 {
        let t = rng.gen_range(0.0..20.0);
        let delta = rng.gen_range(0.5..15.0);
        let g = rkhs_pe::estimator::classical_pe_matrix(&traj, &omega, t, delta).unwrap();
        let min_eig = g.clone().symmetric_eigenvalues().min();
        assert!(min_eig >= -1e-10 * g.norm(), "min eig {min_eig:e}");
    }
}

/// Scalar in-span plant used for the error-dynamics and Lyapunov checks:
/// ẋ = −x + 𝔎(x, 1), truth exactly the kernel section at the single center.
fn scalar_toy() -> (PlantSpec, EstimatorConfig) {
    let k = matern32();
    let kf = k.clone();
    let plant = PlantSpec::new(
        DMatrix::from_element(1, 1, -1.0),
        dvector![1.0],
        move |x: &DVector<f64>| kf.eval_radial((x[0] - 1.0).abs()).unwrap(),
    )
    .unwrap();
    let omega = IndexingSet::new(k, vec![dvector![1.0]]).unwrap();
    let cfg = EstimatorConfig::new(1, omega);
    (plant, cfg)
}

/// Max residual of central finite differences of (x̃, α̃) against the error
/// ODE x̃̇ = Ax̃ + BΦᵀ(x)α̃, α̃̇ = −Γ⁻¹Φ(x)BᵀPx̃, sampled at interior points.
fn error_dynamics_residual(h: f64) -> f64 {
    let (plant, cfg) = scalar_toy();
    let run = run_estimator(
        &plant,
        &cfg,
        &dvector![0.3],
        &dvector![0.0],
        &dvector![0.0],
        4.0,
        h,
        1,
    )
    .unwrap();
    let p = run.p()[(0, 0)];
    let gamma = run.gamma()[(0, 0)];
    let a = -1.0;
    let astar = run.alpha_star()[0];
    let omega = run.omega().clone();
    let mut worst: f64 = 0.0;
    for i in 1..run.len() - 1 {
        let xt = |j: usize| run.x_at(j)[0] - run.xhat_at(j)[0];
        let at = |j: usize| astar - run.alphahat_at(j)[0];
        let x = DVector::from_column_slice(run.x_at(i));
        let phi = omega.regressor(&x).unwrap()[0];
        let xt_dot = a * xt(i) + phi * at(i);
        let at_dot = -(1.0 / gamma) * phi * p * xt(i);
        let fd_xt = (xt(i + 1) - xt(i - 1)) / (2.0 * h);
        let fd_at = (at(i + 1) - at(i - 1)) / (2.0 * h);
        worst = worst.max((fd_xt - xt_dot).abs().max((fd_at - at_dot).abs()));
    }
    worst
}

#[test]
fn error_dynamics_consistency_is_second_order() {
    let r1 = error_dynamics_residual(2e-2);
    let r2 = error_dynamics_residual(1e-2);
    let ratio = r1 / r2;
    assert!(
        (3.0..=5.5).contains(&ratio),
        "halving ratio {ratio} (residuals {r1:e}, {r2:e}) not ~4"
    );
}

#[test]
fn lyapunov_function_non_increasing_in_span() {
    let (plant, cfg) = scalar_toy();
    let run = run_estimator(
        &plant,
        &cfg,
        &dvector![0.3],
        &dvector![0.0],
        &dvector![0.0],
        5.0,
        1e-3,
        1,
    )
    .unwrap();
    let mut prev = run.lyapunov_value(0);
    for i in 1..run.len() {
        let v = run.lyapunov_value(i);
        assert!(v <= prev + 1e-6, "V increased at step {i}: {prev} → {v}");
        prev = v;
    }
}

#[test]
fn trajectory_csv_roundtrip_is_exact() {
    let traj = integrate(&VectorField::hopf(), &dvector![0.1, 0.0], 2.0, 1e-2).unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut times = Vec::new();
    let mut states = Vec::new();
    for line in text.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        times.push(cols[0]);
        states.push(dvector![cols[1], cols[2]]);
    }
    let back = Trajectory::from_samples(times, states).unwrap();
    assert_eq!(back.len(), traj.len());
    for i in 0..traj.len() {
        assert_eq!(back.time(i), traj.time(i), "time {i} not bit-identical");
        assert_eq!(back.state(i), traj.state(i), "state {i} not bit-identical");
    }
}
