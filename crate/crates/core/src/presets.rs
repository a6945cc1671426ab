//! Builders for the reference systems: a planar relay example, a rotor with
//! friction, and cellular neural networks.

use serde::{Deserialize, Serialize};

use crate::certify::{check_lds, check_network_shape, lemma4_certificate, Certificate};
use crate::densemat::Matrix;
use crate::error::{Error, Result};
use crate::luresys::LureSystem;
use crate::lyapunov::LyapunovData;
use crate::pwfun::{Expr, PiecewiseFn, Term};

/// Planar system with `ψ = 1` for `s > 0`, `−1/4` for `s < 0`, `ψ(0) = 0`,
/// with its Lyapunov data `P = I`, `Γ = 1`.
pub fn example1() -> (LureSystem, LyapunovData) {
    let sys = LureSystem::new(
        Matrix::from_rows(&[[-1.0, -1.0], [1.0, -1.0]]).expect("2x2"),
        Matrix::column(&[1.0, 0.0]),
        Matrix::row_vector(&[1.0, 0.0]),
        vec![PiecewiseFn::relay(-0.25, 1.0)],
        vec![f64::INFINITY],
    )
    .expect("consistent dimensions");
    let lyap = LyapunovData::new(Matrix::identity(2), vec![1.0]).expect("P = I");
    (sys, lyap)
}

/// `example1` with the passivity certificate `P = I`, `Γ = 1`, `η = 1`.
pub fn example1_certificate() -> (LureSystem, Certificate) {
    let (sys, _) = example1();
    (sys, Certificate::passivity(Matrix::identity(2), vec![1.0], 1.0))
}

/// Rotor parameters; units are SI (N m, kg m², rad/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotorParams {
    pub b: f64,
    pub fu0: f64,
    pub dfu: f64,
    pub fl0: f64,
    pub dfl: f64,
    pub ju: f64,
    pub jl: f64,
    pub ku: f64,
    pub ktheta: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub q4: f64,
    /// State feedback gain `v_p = Kx`.
    pub k: [f64; 3],
    /// Loop shift moved from the nonlinearity into `A`.
    pub m: f64,
    /// Scale the `m` shift by `1/J_u` instead of `1/J_ℓ`.
    #[serde(default)]
    pub shift_by_upper_inertia: bool,
}

impl RotorParams {
    pub fn reference() -> Self {
        Self {
            b: 0.0,
            fu0: 0.38,
            dfu: -0.006,
            fl0: 0.0009,
            dfl: 0.68,
            ju: 0.4765,
            jl: 0.035,
            ku: 4.3228,
            ktheta: 0.075,
            q1: 2.4245,
            q2: -0.0084,
            q3: 0.05,
            q4: 0.26,
            k: [-12.8282, 3.7216, -8.4816],
            m: 0.052,
            shift_by_upper_inertia: false,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("J_u", self.ju), ("J_l", self.jl), ("k_u", self.ku), ("k_theta", self.ktheta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.b >= 0.0) {
            return Err(Error::Parameter(format!("damping b must be nonnegative, got {}", self.b)));
        }
        Ok(())
    }
}

/// Lower-disc friction plus the loop shift: `ψ(s) = T_fℓ(s) + m s`.
pub fn rotor_friction(params: &RotorParams) -> PiecewiseFn {
    let slope = params.q4 + params.m;
    let decay = params.dfl - params.fl0;
    let pos = Expr::new(vec![
        Term::constant(params.fl0),
        Term::new(decay, 0, -params.q3),
        Term::new(slope, 1, 0.0),
    ]);
    let neg = Expr::new(vec![
        Term::constant(-params.fl0),
        Term::new(-decay, 0, params.q3),
        Term::new(slope, 1, 0.0),
    ]);
    PiecewiseFn::new(vec![0.0], vec![neg, pos], None).expect("single breakpoint")
}

/// Rotor in Lur'e form with state `(α, ω_u, ω_ℓ)` and output `ω_ℓ`.
pub fn build_rotor(params: &RotorParams) -> Result<LureSystem> {
    params.validate()?;
    let RotorParams { b, ju, jl, ku, ktheta, k, m, .. } = *params;
    let shift = if params.shift_by_upper_inertia { m / ju } else { m / jl };
    let a = Matrix::from_rows(&[
        [0.0, 1.0, -1.0],
        [-ktheta / ju + ku * k[0] / ju, -b / ju + ku * k[1] / ju, b / ju + ku * k[2] / ju],
        [ktheta / jl, b / jl, -b / jl + shift],
    ])?;
    LureSystem::new(
        a,
        Matrix::column(&[0.0, 0.0, 1.0 / jl]),
        Matrix::row_vector(&[0.0, 0.0, 1.0]),
        vec![rotor_friction(params)],
        vec![f64::INFINITY],
    )
}

pub fn rotor() -> LureSystem {
    build_rotor(&RotorParams::reference()).expect("reference parameters are valid")
}

/// Published rotor certificate (`P` printed to four decimals).
pub fn rotor_certificate() -> Certificate {
    let p = Matrix::from_rows(&[
        [0.5636, 0.0340, 0.3793],
        [0.0340, 0.0062, 0.0186],
        [0.3793, 0.0186, 0.2642],
    ])
    .expect("3x3");
    Certificate::passivity(p, vec![10.0], 8.492)
}

/// Network `ẋ = Ax − Bψ(x)` with `C = I`, `ζ = ∞` and the same activation
/// on every coordinate.
pub fn build_cnn(a: Matrix, b: Matrix, act: PiecewiseFn) -> Result<LureSystem> {
    let n = a.rows();
    let sys = LureSystem::new(a, b, Matrix::identity(n), vec![act; n], vec![f64::INFINITY; n])
        .map_err(|e| Error::Hypothesis(e.to_string()))?;
    check_network_shape(&sys)?;
    let lds = check_lds(sys.b())?;
    if !lds.passed {
        return Err(Error::Hypothesis(format!(
            "B is not diagonally stable (best lambda_min {:e})",
            lds.lambda_min
        )));
    }
    Ok(sys)
}

/// `A = −I₂`, `B = [[1, 0.5], [−0.5, 1]]`, `ψ = sign`.
pub fn cnn_demo() -> LureSystem {
    build_cnn(
        Matrix::from_diag(&[-1.0, -1.0]),
        Matrix::from_rows(&[[1.0, 0.5], [-0.5, 1.0]]).expect("2x2"),
        PiecewiseFn::sign(),
    )
    .expect("demo network satisfies the preconditions")
}

pub const PRESET_NAMES: [&str; 3] = ["example1", "rotor", "cnn-demo"];

/// Named preset with its reference certificate.
pub fn preset(name: &str) -> Result<(LureSystem, Certificate)> {
    match name {
        "example1" => Ok(example1_certificate()),
        "rotor" => Ok((rotor(), rotor_certificate())),
        "cnn-demo" => {
            let sys = cnn_demo();
            let cert = lemma4_certificate(&sys)?;
            Ok((sys, cert))
        }
        other => Err(Error::Parameter(format!(
            "unknown preset '{other}', expected one of {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}
