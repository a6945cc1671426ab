//! Property tests for the linear algebra, nonlinearities, plant model and
//! Lyapunov analysis.

mod common;

use common::RawPiecewise;
use lurekit::certify::check_lds;
use lurekit::densemat::{dot, inverse, lambda_min, norm, solve, sym_eigen, sym_eigenvalues};
use lurekit::lyapunov::{
    clarke_sup_directional, finite_time_constants, lie_derivative_set, lie_sup_bound, value,
    w_decrease_bound, NU_CAP,
};
use lurekit::presets;
use lurekit::{LureSystem, LyapunovData, Matrix, PiecewiseFn};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn symmetric(n: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-5.0..5.0f64, n * n).prop_map(move |v| {
        let m = Matrix::new(n, n, v).unwrap();
        m.sym_sum().unwrap().scale(0.5)
    })
}

fn any_symmetric() -> impl Strategy<Value = Matrix> {
    (1usize..7).prop_flat_map(symmetric)
}

/// Strictly diagonally dominant, hence well conditioned.
fn dominant() -> impl Strategy<Value = Matrix> {
    (1usize..7).prop_flat_map(|n| {
        (prop::collection::vec(-1.0..1.0f64, n * n), prop::collection::vec(prop::bool::ANY, n)).prop_map(
            move |(v, signs)| {
                let mut m = Matrix::new(n, n, v).unwrap();
                for i in 0..n {
                    let s = if signs[i] { 1.0 } else { -1.0 };
                    m[(i, i)] = s * (n as f64 + 1.0);
                }
                m
            },
        )
    })
}

fn systems() -> Vec<(LureSystem, LyapunovData)> {
    let (ex1, ex1_lyap) = presets::example1();
    let (cnn, cert) = presets::preset("cnn-demo").unwrap();
    let cnn_lyap = LyapunovData::new(cert.p, cert.gamma).unwrap();
    let rotor = presets::rotor();
    let rc = presets::rotor_certificate();
    let rotor_lyap = LyapunovData::new(rc.p, rc.gamma).unwrap();
    vec![(ex1, ex1_lyap), (cnn, cnn_lyap), (rotor, rotor_lyap)]
}

/// Random point, with output coordinates zeroed at random so that the
/// switching surfaces are hit (every preset's `C` selects coordinates).
fn point_on_or_off_surfaces(sys: &LureSystem, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x: Vec<f64> = (0..sys.n()).map(|_| rng.gen_range(-2.0..2.0)).collect();
    for i in 0..sys.p() {
        if rng.gen_bool(0.4) {
            for j in 0..sys.n() {
                if sys.c()[(i, j)] != 0.0 {
                    x[j] = 0.0;
                }
            }
        }
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn eigenvalues_sum_to_trace(s in any_symmetric()) {
        let ev = sym_eigenvalues(&s).unwrap();
        let trace: f64 = s.diag().iter().sum();
        prop_assert!((ev.iter().sum::<f64>() - trace).abs() <= 1e-8 * (1.0 + s.max_abs()));
        prop_assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eigen_reconstruction(s in any_symmetric()) {
        let (ev, v) = sym_eigen(&s).unwrap();
        let n = s.rows();
        let mut r = Matrix::zeros(n, n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    r[(i, j)] += ev[k] * v[(i, k)] * v[(j, k)];
                }
            }
        }
        prop_assert!(r.sub(&s).unwrap().max_abs() <= 1e-8 * (1.0 + s.max_abs()));
    }

    #[test]
    fn eigenvalues_shift_with_identity(s in any_symmetric(), c in -10.0..10.0f64) {
        let ev = sym_eigenvalues(&s).unwrap();
        let shifted = sym_eigenvalues(&s.add(&Matrix::identity(s.rows()).scale(c)).unwrap()).unwrap();
        for (a, b) in ev.iter().zip(&shifted) {
            prop_assert!((a + c - b).abs() <= 1e-9 * (1.0 + s.max_abs() + c.abs()));
        }
    }

    #[test]
    fn double_inverse_is_identity(a in dominant()) {
        let back = inverse(&inverse(&a).unwrap()).unwrap();
        prop_assert!(back.sub(&a).unwrap().max_abs() <= 1e-8);
    }

    #[test]
    fn solve_satisfies_system(a in dominant(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..a.rows()).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let x = solve(&a, &b).unwrap();
        let r = a.mul_vec(&x).unwrap();
        prop_assert!(r.iter().zip(&b).all(|(u, v)| (u - v).abs() <= 1e-10));
    }

    #[test]
    fn krasovskii_contains_value_and_limits(seed in any::<u64>(), s in -3.0..3.0f64, snap in prop::bool::ANY) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = RawPiecewise::random(&mut rng);
        let f = raw.build();
        // evaluate exactly at a breakpoint half of the time
        let s = if snap && !raw.breakpoints.is_empty() {
            raw.breakpoints[rng.gen_range(0..raw.breakpoints.len())]
        } else {
            s
        };
        let k = f.krasovskii(s);
        let (l, r) = f.one_sided_limits(s);
        let tol = 1e-12 * (1.0 + k.lo.abs().max(k.hi.abs()));
        prop_assert!(k.contains(f.eval(s), tol));
        prop_assert!(k.contains(l, tol) && k.contains(r, tol));
    }

    #[test]
    fn integral_is_lipschitz(seed in any::<u64>(), y in -2.5..2.5f64, h in -0.1..0.1f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = RawPiecewise::random(&mut rng);
        let f = raw.build();
        let (a, b) = if h >= 0.0 { (y, y + h) } else { (y + h, y) };
        // sup |f| on [a, b]: samples plus the largest step between neighbours,
        // and the one-sided limits at interior breakpoints
        let vals: Vec<f64> = (0..=2000).map(|k| f.eval(a + (b - a) * k as f64 / 2000.0)).collect();
        let pad = vals.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        let mut bound = vals.iter().map(|v| v.abs()).fold(0.0, f64::max) + pad;
        for &t in f.breakpoints().iter().filter(|&&t| t >= a && t <= b) {
            let (l, r) = f.one_sided_limits(t);
            bound = bound.max(l.abs() + pad).max(r.abs() + pad);
        }
        let diff = (f.integral(y + h) - f.integral(y)).abs();
        prop_assert!(diff <= bound * h.abs() + 1e-12, "diff {diff}, bound {}", bound * h.abs());
    }

    #[test]
    fn integral_matches_quadrature(seed in any::<u64>(), y in -2.5..2.5f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = RawPiecewise::random(&mut rng);
        let exact = raw.build().integral(y);
        prop_assert!((exact - raw.integral_oracle(y, 1e-13)).abs() <= 1e-8);
    }

    #[test]
    fn drift_is_homogeneous(seed in any::<u64>(), alpha in -5.0..5.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (sys, _) in systems() {
            let x = point_on_or_off_surfaces(&sys, &mut rng);
            let ax: Vec<f64> = x.iter().map(|v| alpha * v).collect();
            let d = sys.drift(&x);
            let da = sys.inclusion_at(&ax).unwrap().drift;
            for (u, v) in d.iter().zip(&da) {
                prop_assert!((alpha * u - v).abs() <= 1e-12 * (1.0 + v.abs()));
            }
        }
    }

    #[test]
    fn inputs_satisfy_sector_inequality(seed in any::<u64>(), slope in 0.0..3.0f64, extra in 0.0..2.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cases: Vec<LureSystem> = systems().into_iter().map(|(s, _)| s).collect();
        // finite sector bound ζ ≥ slope
        cases.push(
            LureSystem::new(
                Matrix::from_rows(&[[-1.0, 2.0], [0.5, -3.0]]).unwrap(),
                Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap(),
                Matrix::from_rows(&[[1.0, -1.0], [0.3, 1.0]]).unwrap(),
                vec![PiecewiseFn::linear(slope), PiecewiseFn::relay(-0.5, 2.0)],
                vec![slope + extra, f64::INFINITY],
            )
            .unwrap(),
        );
        for sys in &cases {
            let x = point_on_or_off_surfaces(sys, &mut rng);
            let inc = sys.inclusion_at(&x).unwrap();
            let y = sys.output(&x);
            let z = sys.z_matrix();
            for u in inc.input_box.vertices() {
                let zu = z.mul_vec(&u).unwrap();
                let s: f64 = u.iter().zip(&zu).zip(&y).map(|((ui, zi), yi)| ui * (zi + yi)).sum();
                prop_assert!(s <= 1e-10, "u {u:?} at x {x:?}: {s}");
            }
        }
    }

    #[test]
    fn v_bounded_below_by_quadratic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (sys, lyap) in systems() {
            let x = point_on_or_off_surfaces(&sys, &mut rng);
            let lower = 0.5 * lambda_min(&lyap.p).unwrap() * dot(&x, &x);
            prop_assert!(value(&sys, &lyap, &x).unwrap() >= lower - 1e-12);
        }
    }

    #[test]
    fn certified_lie_bound_decreases(x1 in -3.0..3.0f64, x2 in -3.0..3.0f64, on_surface in prop::bool::ANY) {
        let (sys, cert) = presets::example1_certificate();
        let lyap = LyapunovData::new(cert.p, cert.gamma).unwrap();
        let x = [if on_surface { 0.0 } else { x1 }, x2];
        let bound = lie_sup_bound(&sys, &lyap, &x).unwrap().value;
        prop_assert!(bound <= -0.5 * cert.eta * dot(&x, &x) + 1e-8);
    }
}

#[test]
fn lie_set_bound_clarke_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (sys, lyap) in systems() {
        for _ in 0..1000 {
            let x = point_on_or_off_surfaces(&sys, &mut rng);
            let bound = lie_sup_bound(&sys, &lyap, &x).unwrap().value;
            let clarke = clarke_sup_directional(&sys, &lyap, &x).unwrap();
            let tol = 1e-9 * (1.0 + bound.abs());
            assert!(bound <= clarke + tol, "x {x:?}: bound {bound} > clarke {clarke}");
            match lie_derivative_set(&sys, &lyap, &x).unwrap().sup() {
                Some(s) => {
                    assert!(s.is_finite());
                    assert!(s <= bound + tol, "x {x:?}: lie sup {s} > bound {bound}");
                }
                None => {}
            }
        }
    }
}

#[test]
fn w_bound_negative_near_origin() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (ex1, _) = presets::example1();
    let (cnn, _) = presets::preset("cnn-demo").unwrap();
    for sys in [ex1, cnn] {
        let gb = check_lds(&sys.cb()).unwrap().gamma_bar;
        let k = finite_time_constants(&sys, &gb, NU_CAP).unwrap();
        let mut checked = 0;
        while checked < 500 {
            let x: Vec<f64> = (0..sys.n()).map(|_| rng.gen_range(-k.mu..k.mu)).collect();
            if norm(&x) >= k.mu || norm(&sys.output(&x)) == 0.0 {
                continue;
            }
            let w = w_decrease_bound(&sys, &gb, &x).unwrap().value;
            assert!(w <= -k.c * k.omega, "x {x:?}: {w} > {}", -k.c * k.omega);
            checked += 1;
        }
    }
}
