//! Lur'e-Postnikov function `V(x) = ½xᵀPx + Σ γ_i ∫₀^{C_i x} ψ_i`, its Clarke
//! gradient, set-valued Lie derivative and decrease bounds, plus the output
//! function `W` used for finite-time arguments.

use serde::Serialize;

use crate::batch::{self, Execution};
use crate::boxqp::{box_quad_max, check_box_dim, BoxQpMax};
use crate::densemat::{dot, lambda_min, solve_unique, spectral_norm, Matrix};
use crate::error::{Error, Result};
use crate::luresys::{check_positive_diag, IntervalBox, LureSystem};

/// Samples per side used when validating a radius `ν`.
pub const NU_SAMPLES: usize = 1000;
/// Default upper bound of the `ν` search.
pub const NU_CAP: f64 = 1.0;
const NU_FLOOR: f64 = 1e-6;
/// Safety factor keeping `μ` strictly below `cλ1/(2λ2)`.
pub const MU_SAFETY: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovData {
    pub p: Matrix,
    pub gamma: Vec<f64>,
}

impl LyapunovData {
    /// Validates symmetry and positive definiteness of `P` and positivity of `Γ`.
    pub fn new(p: Matrix, gamma: Vec<f64>) -> Result<Self> {
        let lmin = lambda_min(&p)?;
        if lmin <= 0.0 {
            return Err(Error::Parameter(format!(
                "P must be positive definite, smallest eigenvalue {lmin:e}"
            )));
        }
        check_positive_diag(&gamma, gamma.len(), "Gamma")?;
        Ok(Self { p, gamma })
    }

    pub fn check_dims(&self, sys: &LureSystem) -> Result<()> {
        if self.p.shape() != (sys.n(), sys.n()) {
            return Err(Error::Dimension(format!(
                "P is {:?}, system has n = {}",
                self.p.shape(),
                sys.n()
            )));
        }
        check_positive_diag(&self.gamma, sys.p(), "Gamma")
    }
}

/// `∂V(x) = {base + spread·ψ : ψ ∈ box}`.
#[derive(Debug, Clone)]
pub struct GradientSet {
    pub base: Vec<f64>,
    pub spread: Matrix,
    pub feedback: IntervalBox,
}

/// Set-valued Lie derivative at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LieSet {
    Empty,
    Singleton { value: f64 },
    Interval { lo: f64, hi: f64 },
}

impl LieSet {
    pub fn sup(&self) -> Option<f64> {
        match *self {
            LieSet::Empty => None,
            LieSet::Singleton { value } => Some(value),
            LieSet::Interval { hi, .. } => Some(hi),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, LieSet::Empty)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiniteTimeConstants {
    pub c: f64,
    pub nu: f64,
    pub mu: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub omega: f64,
}

fn prepare(sys: &LureSystem, lyap: &LyapunovData, x: &[f64]) -> Result<()> {
    sys.check_state(x)?;
    lyap.check_dims(sys)?;
    check_box_dim(sys.p())
}

pub fn value(sys: &LureSystem, lyap: &LyapunovData, x: &[f64]) -> Result<f64> {
    sys.check_state(x)?;
    lyap.check_dims(sys)?;
    let quad = 0.5 * dot(x, &lyap.p.mul_vec(x)?);
    let y = sys.output(x);
    let integral: f64 = sys
        .psi()
        .iter()
        .zip(&y)
        .zip(&lyap.gamma)
        .map(|((f, &yi), g)| g * f.integral(yi))
        .sum();
    Ok(quad + integral)
}

pub fn gradient_set(sys: &LureSystem, lyap: &LyapunovData, x: &[f64]) -> Result<GradientSet> {
    sys.check_state(x)?;
    lyap.check_dims(sys)?;
    Ok(GradientSet {
        base: lyap.p.mul_vec(x)?,
        spread: sys.c().transpose().matmul(&Matrix::from_diag(&lyap.gamma))?,
        feedback: sys.feedback_box(x),
    })
}

/// `max ⟨v, f⟩` over `v ∈ ∂V(x)` and `f ∈ F(x)`.
///
/// The objective is bilinear in `(ψ, u)`. For each vertex `ψ` of `Ψ(Cx)` the
/// inner maximum over the `u` box is taken coordinatewise.
pub fn clarke_sup_directional(sys: &LureSystem, lyap: &LyapunovData, x: &[f64]) -> Result<f64> {
    prepare(sys, lyap, x)?;
    let grad = gradient_set(sys, lyap, x)?;
    let drift = sys.drift(x);
    let ubox = grad.feedback.neg();
    let mut best = f64::NEG_INFINITY;
    for psi in grad.feedback.vertices() {
        let mut v = grad.base.clone();
        for (vi, s) in v.iter_mut().zip(grad.spread.mul_vec(&psi)?) {
            *vi += s;
        }
        let g = sys.b().tr_mul_vec(&v)?;
        let inner: f64 = g
            .iter()
            .zip(&ubox.0)
            .map(|(&gi, iv)| (gi * iv.lo).max(gi * iv.hi))
            .sum();
        best = best.max(dot(&v, &drift) + inner);
    }
    Ok(best)
}

/// `sup_{u ∈ −Ψ(Cx)} (xᵀP − uᵀΓC)(Ax + Bu)`, solved exactly as a box QP.
pub fn lie_sup_bound(sys: &LureSystem, lyap: &LyapunovData, x: &[f64]) -> Result<BoxQpMax> {
    prepare(sys, lyap, x)?;
    let px = lyap.p.mul_vec(x)?;
    let ax = sys.drift(x);
    let gcb = sys.cb().scale_rows(&lyap.gamma)?;
    let q = gcb.sym_sum()?.scale(-0.5);
    let gcax = sys.ca().scale_rows(&lyap.gamma)?.mul_vec(x)?;
    let b: Vec<f64> = sys
        .b()
        .tr_mul_vec(&px)?
        .iter()
        .zip(&gcax)
        .map(|(a, c)| a - c)
        .collect();
    box_quad_max(&q, &b, dot(&px, &ax), &sys.feedback_box(x).neg())
}

/// `lie_sup_bound` values over a batch of points.
pub fn lie_sup_grid(
    sys: &LureSystem,
    lyap: &LyapunovData,
    points: &[Vec<f64>],
    exec: Execution,
) -> Result<Vec<f64>> {
    batch::map(exec, points, |x| lie_sup_bound(sys, lyap, x).map(|r| r.value))
        .into_iter()
        .collect()
}

/// The set `{a : ∃f ∈ F(x), ⟨v, f⟩ = a ∀v ∈ ∂V(x)}`.
///
/// With `K` the channels whose feedback interval is nondegenerate, the
/// admissible inputs form the polytope `{u ∈ −Ψ(Cx) : (C(Ax + Bu))_K = 0}`,
/// on which the Lie value is affine in `u`. Its range is therefore spanned
/// by the polytope vertices, which are enumerated exactly: each vertex pins
/// some coordinates to bounds and solves for the rest, whose constraint
/// columns must be linearly independent.
pub fn lie_derivative_set(sys: &LureSystem, lyap: &LyapunovData, x: &[f64]) -> Result<LieSet> {
    prepare(sys, lyap, x)?;
    let ubox = sys.feedback_box(x).neg();
    let kset = ubox.free_coords();
    let cb = sys.cb();
    let cax = sys.ca().mul_vec(x)?;
    let px = lyap.p.mul_vec(x)?;
    let gc = sys.c().scale_rows(&lyap.gamma)?;

    // (Px − CᵀΓu)·(Ax + Bu)
    let lie_value = |u: &[f64]| -> f64 {
        let mut v = px.clone();
        let ct_gu = gc.tr_mul_vec(u).expect("p-vector");
        for (vi, s) in v.iter_mut().zip(ct_gu) {
            *vi -= s;
        }
        dot(&v, &sys.flow(x, u))
    };

    let k = kset.len();
    let bound_scale = ubox.0.iter().fold(1.0_f64, |m, i| m.max(i.lo.abs()).max(i.hi.abs()));
    let eq_scale = 1.0 + cax.iter().fold(0.0_f64, |m, v| m.max(v.abs())) + cb.max_abs() * bound_scale;
    let eq_tol = 1e-10 * eq_scale;
    let box_tol = 1e-10 * bound_scale;

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut u = ubox.lower();
    for code in 0..3usize.pow(k as u32) {
        let mut c = code;
        let mut free = Vec::new();
        for &i in &kset {
            match c % 3 {
                0 => u[i] = ubox[i].lo,
                1 => u[i] = ubox[i].hi,
                _ => {
                    u[i] = 0.0;
                    free.push(i);
                }
            }
            c /= 3;
        }
        // (CB)_{K,·} u = −(CAx)_K with free coordinates currently zero
        let cbu = cb.mul_vec(&u)?;
        let rhs: Vec<f64> = kset.iter().map(|&r| -cax[r] - cbu[r]).collect();
        if free.is_empty() {
            if rhs.iter().any(|v| v.abs() > eq_tol) {
                continue;
            }
        } else {
            let Some(sol) = solve_unique(&cb.select(&kset, &free), &rhs) else {
                continue;
            };
            if free.iter().zip(&sol).any(|(&i, &v)| !ubox[i].contains(v, box_tol)) {
                continue;
            }
            for (&i, &v) in free.iter().zip(&sol) {
                u[i] = ubox[i].clamp(v);
            }
        }
        let a = lie_value(&u);
        lo = lo.min(a);
        hi = hi.max(a);
    }
    if lo > hi {
        return Ok(LieSet::Empty);
    }
    if hi - lo <= 1e-12 * (1.0 + hi.abs()) {
        return Ok(LieSet::Singleton { value: hi });
    }
    Ok(LieSet::Interval { lo, hi })
}

/// `W(Cx) = 2 Σ γ̄_i ∫₀^{C_i x} ψ_i`.
pub fn output_w(sys: &LureSystem, gamma_bar: &[f64], x: &[f64]) -> Result<f64> {
    sys.check_state(x)?;
    check_positive_diag(gamma_bar, sys.p(), "GammaBar")?;
    let y = sys.output(x);
    Ok(2.0
        * sys
            .psi()
            .iter()
            .zip(&y)
            .zip(gamma_bar)
            .map(|((f, &yi), g)| g * f.integral(yi))
            .sum::<f64>())
}

/// `sup_{u ∈ −Ψ(Cx)} −2uᵀΓ̄C(Ax + Bu)`, the decrease bound for `W`.
pub fn w_decrease_bound(sys: &LureSystem, gamma_bar: &[f64], x: &[f64]) -> Result<BoxQpMax> {
    sys.check_state(x)?;
    check_positive_diag(gamma_bar, sys.p(), "GammaBar")?;
    check_box_dim(sys.p())?;
    let q = sys.cb().scale_rows(gamma_bar)?.sym_sum()?.scale(-1.0);
    let b: Vec<f64> = sys
        .ca()
        .scale_rows(gamma_bar)?
        .mul_vec(x)?
        .iter()
        .map(|v| -2.0 * v)
        .collect();
    box_quad_max(&q, &b, 0.0, &sys.feedback_box(x).neg())
}

/// Constants `c, ν, μ, λ1, λ2, ω` of the finite-time argument, with `ν`
/// searched over `[1e-6, nu_cap]`.
pub fn finite_time_constants(
    sys: &LureSystem,
    gamma_bar: &[f64],
    nu_cap: f64,
) -> Result<FiniteTimeConstants> {
    check_positive_diag(gamma_bar, sys.p(), "GammaBar")?;
    if !(nu_cap.is_finite() && nu_cap >= NU_FLOOR) {
        return Err(Error::Parameter(format!("nu_cap {nu_cap} must be at least {NU_FLOOR}")));
    }
    let c = 0.5
        * sys
            .psi()
            .iter()
            .map(|f| {
                let (l, r) = f.one_sided_limits(0.0);
                l.abs().min(r.abs())
            })
            .fold(f64::INFINITY, f64::min);
    if !(c > 0.0) {
        return Err(Error::Nonlinearity(
            "some channel has a zero one-sided limit at the origin".into(),
        ));
    }

    let bounded_away = |nu: f64| {
        sys.psi().iter().all(|f| {
            let sampled = (1..=NU_SAMPLES).all(|k| {
                let s = nu * k as f64 / NU_SAMPLES as f64;
                f.eval(s).abs() >= c && f.eval(-s).abs() >= c
            });
            let jumps = f
                .breakpoints()
                .iter()
                .filter(|&&b| b != 0.0 && b.abs() <= nu)
                .all(|&b| {
                    let i = f.krasovskii(b);
                    i.lo >= c || i.hi <= -c
                });
            sampled && jumps
        })
    };
    let nu = if bounded_away(nu_cap) {
        nu_cap
    } else if !bounded_away(NU_FLOOR) {
        return Err(Error::Nonlinearity(format!(
            "|psi| drops below c = {c} within {NU_FLOOR} of the origin"
        )));
    } else {
        let (mut lo, mut hi) = (NU_FLOOR, nu_cap);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if bounded_away(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };

    let lambda1 = lambda_min(&sys.cb().scale_rows(gamma_bar)?.sym_sum()?)?;
    if lambda1 <= 0.0 {
        return Err(Error::LdsViolation(lambda1));
    }
    let lambda2 = spectral_norm(&sys.ca().scale_rows(gamma_bar)?)?;
    let mu = if lambda2 == 0.0 {
        nu
    } else {
        nu.min(MU_SAFETY * c * lambda1 / (2.0 * lambda2))
    };
    let omega = lambda1 * (c - 2.0 * mu * lambda2 / lambda1);
    Ok(FiniteTimeConstants {
        c,
        nu,
        mu,
        lambda1,
        lambda2,
        omega,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pwfun::PiecewiseFn;
    use crate::presets;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn value_examples() {
        let (sys, lyap) = presets::example1();
        assert_eq!(value(&sys, &lyap, &[0.0, 0.0]).unwrap(), 0.0);
        assert!(close(value(&sys, &lyap, &[1.0, 0.0]).unwrap(), 1.5, 1e-15));
        assert!(close(value(&sys, &lyap, &[-1.0, 1.0]).unwrap(), 1.25, 1e-15));
    }

    #[test]
    fn clarke_sup_example1() {
        let (sys, lyap) = presets::example1();
        assert!(close(clarke_sup_directional(&sys, &lyap, &[0.0, 0.5]).unwrap(), 0.125, 1e-15));
    }

    #[test]
    fn clarke_sup_smooth_point_is_directional_derivative() {
        let (sys, lyap) = presets::example1();
        let x = [1.0, 0.0];
        // ψ(1) = 1, u = −1: ∇V = (2, 0), f = (−2, 1)
        assert!(close(clarke_sup_directional(&sys, &lyap, &x).unwrap(), -4.0, 1e-15));
    }

    #[test]
    fn lie_bound_example1() {
        let (sys, lyap) = presets::example1();
        let r = lie_sup_bound(&sys, &lyap, &[0.0, 0.5]).unwrap();
        assert!(close(r.value, -3.0 / 16.0, 1e-15));
        assert!(close(r.argmax[0], 0.25, 1e-15));
        let r0 = lie_sup_bound(&sys, &lyap, &[0.0, 0.0]).unwrap();
        assert_eq!((r0.value, r0.argmax[0]), (0.0, 0.0));
    }

    #[test]
    fn lie_set_example1() {
        let (sys, lyap) = presets::example1();
        assert_eq!(lie_derivative_set(&sys, &lyap, &[0.0, 0.5]).unwrap(), LieSet::Empty);
        assert_eq!(
            lie_derivative_set(&sys, &lyap, &[0.0, 0.0]).unwrap(),
            LieSet::Singleton { value: 0.0 }
        );
        // off the surface the set is the gradient product
        let LieSet::Singleton { value } = lie_derivative_set(&sys, &lyap, &[1.0, 0.0]).unwrap() else {
            panic!("expected singleton");
        };
        assert!(close(value, -4.0, 1e-15));
    }

    #[test]
    fn lie_set_singular_constraint_gives_interval() {
        // CB = 0 and CAx = 0 on the surface: every u is admissible
        let sys = LureSystem::new(
            Matrix::from_rows(&[[-1.0, 0.0], [0.0, -1.0]]).unwrap(),
            Matrix::column(&[0.0, 1.0]),
            Matrix::row_vector(&[1.0, 0.0]),
            vec![PiecewiseFn::sign()],
            vec![f64::INFINITY],
        )
        .unwrap();
        let lyap = LyapunovData::new(Matrix::identity(2), vec![1.0]).unwrap();
        // x = (0, 1): value (Px − Cᵀu)·(Ax + Bu) = 1·(−1 + u), u ∈ [−1, 1]
        assert_eq!(
            lie_derivative_set(&sys, &lyap, &[0.0, 1.0]).unwrap(),
            LieSet::Interval { lo: -2.0, hi: 0.0 }
        );
    }

    #[test]
    fn w_examples() {
        let (sys, _) = presets::example1();
        assert_eq!(output_w(&sys, &[1.0], &[0.0, 3.0]).unwrap(), 0.0);
        assert!(close(output_w(&sys, &[1.0], &[1.0, 0.0]).unwrap(), 2.0, 1e-15));
        assert!(close(output_w(&sys, &[1.0], &[-1.0, 5.0]).unwrap(), 0.5, 1e-15));
    }

    #[test]
    fn finite_time_constants_example1() {
        let (sys, _) = presets::example1();
        let k = finite_time_constants(&sys, &[1.0], NU_CAP).unwrap();
        assert!(close(k.c, 0.125, 1e-15));
        assert!(close(k.lambda1, 2.0, 1e-12));
        assert!(close(k.lambda2, 2f64.sqrt(), 1e-12));
        assert!(close(k.mu, 0.9 / (8.0 * 2f64.sqrt()), 1e-12));
        assert!(close(k.omega, 2.0 * (0.125 - k.mu * 2f64.sqrt()), 1e-12));
        assert!(k.omega > 0.0 && k.mu <= k.nu);
    }

    #[test]
    fn finite_time_constants_sign_scalar() {
        let sys = LureSystem::new(
            Matrix::from_diag(&[-1.0]),
            Matrix::identity(1),
            Matrix::identity(1),
            vec![PiecewiseFn::sign()],
            vec![f64::INFINITY],
        )
        .unwrap();
        let k = finite_time_constants(&sys, &[1.0], NU_CAP).unwrap();
        assert_eq!((k.c, k.lambda1), (0.5, 2.0));
    }

    #[test]
    fn finite_time_constants_errors() {
        let cont = LureSystem::new(
            Matrix::from_diag(&[-1.0]),
            Matrix::identity(1),
            Matrix::identity(1),
            vec![PiecewiseFn::linear(1.0)],
            vec![f64::INFINITY],
        )
        .unwrap();
        assert!(matches!(finite_time_constants(&cont, &[1.0], 1.0), Err(Error::Nonlinearity(_))));
        let neg_cb = LureSystem::new(
            Matrix::from_diag(&[-1.0]),
            Matrix::from_diag(&[-1.0]),
            Matrix::identity(1),
            vec![PiecewiseFn::sign()],
            vec![f64::INFINITY],
        )
        .unwrap();
        assert!(matches!(finite_time_constants(&neg_cb, &[1.0], 1.0), Err(Error::LdsViolation(_))));
    }
}
