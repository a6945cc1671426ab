//! Hypothesis checks, constructive certificates and stability classification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::batch::{self, Execution};
use crate::densemat::{inverse, lambda_max, lambda_min, sym_eigenvalues, Matrix, PSD_REL_TOL};
use crate::error::{Error, Result};
use crate::luresys::{check_positive_diag, LureSystem};
use crate::lyapunov::{finite_time_constants, FiniteTimeConstants, NU_CAP};
use crate::pwfun::{Interval, SectorVerdict, DEFAULT_SECTOR_SAMPLES};

/// Strict positivity threshold for diagonal-stability witnesses.
pub const EPS_PD: f64 = 1e-8;
/// Tolerance on `ΓCA = HC`.
pub const H_TOL: f64 = 1e-9;

/// Which matrix inequality a certificate targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    /// Passivity inequality with off-diagonal block `PB − (C + ΓCA)ᵀ`.
    Passivity,
    /// Off-diagonal block `PB` together with `ΓCA = HC`.
    Structural,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub p: Matrix,
    pub gamma: Vec<f64>,
    pub eta: f64,
    pub kind: CertificateKind,
    /// Diagonal of `H`, required for `Structural`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
}

impl Certificate {
    pub fn passivity(p: Matrix, gamma: Vec<f64>, eta: f64) -> Self {
        Self {
            p,
            gamma,
            eta,
            kind: CertificateKind::Passivity,
            h: None,
        }
    }

    pub fn structural(p: Matrix, gamma: Vec<f64>, eta: f64, h: Vec<f64>) -> Self {
        Self {
            p,
            gamma,
            eta,
            kind: CertificateKind::Structural,
            h: Some(h),
        }
    }

    fn check_dims(&self, sys: &LureSystem) -> Result<()> {
        if self.p.shape() != (sys.n(), sys.n()) {
            return Err(Error::Dimension(format!(
                "certificate P is {:?}, system has n = {}",
                self.p.shape(),
                sys.n()
            )));
        }
        check_positive_diag(&self.gamma, sys.p(), "Gamma")?;
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::Parameter(format!("eta must be positive, got {}", self.eta)));
        }
        Ok(())
    }
}

/// Outcome of a matrix inequality `M ≤ 0` together with `P ≻ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatrixCheck {
    pub lambda_max: f64,
    pub norm: f64,
    pub tolerance: f64,
    pub p_lambda_min: f64,
    pub passed: bool,
}

fn matrix_check(m: &Matrix, p: &Matrix, rel_tol: f64) -> Result<MatrixCheck> {
    let ev = sym_eigenvalues(m)?;
    let norm = ev.iter().fold(0.0_f64, |a, e| a.max(e.abs()));
    let lmax = *ev.last().expect("nonempty spectrum");
    let tolerance = rel_tol * norm.max(1.0);
    let p_lambda_min = lambda_min(p)?;
    Ok(MatrixCheck {
        lambda_max: lmax,
        norm,
        tolerance,
        p_lambda_min,
        passed: lmax <= tolerance && p_lambda_min > 0.0,
    })
}

fn lower_right(sys: &LureSystem, gamma: &[f64]) -> Result<Matrix> {
    let gcb = sys.cb().scale_rows(gamma)?;
    Ok(gcb.sym_sum()?.add(&sys.z_matrix().scale(2.0))?.scale(-1.0))
}

fn upper_left(a: &Matrix, p: &Matrix, eta: f64) -> Result<Matrix> {
    p.matmul(a)?.sym_sum()?.add(&Matrix::identity(a.rows()).scale(eta))
}

/// Passivity matrix with blocks `PA + AᵀP + ηI`, `PB − C̄ᵀ`, `−2Z − ΓCB − (ΓCB)ᵀ`.
pub fn passivity_matrix(sys: &LureSystem, cert: &Certificate) -> Result<Matrix> {
    cert.check_dims(sys)?;
    let lt = sys.loop_transform(&cert.gamma)?;
    let tl = upper_left(sys.a(), &cert.p, cert.eta)?;
    let off = cert.p.matmul(sys.b())?.sub(&lt.cbar.transpose())?;
    Matrix::block2(&tl, &off, &off.transpose(), &lower_right(sys, &cert.gamma)?)
}

/// Structural matrix with off-diagonal block `PB`.
pub fn structural_matrix(sys: &LureSystem, cert: &Certificate) -> Result<Matrix> {
    cert.check_dims(sys)?;
    let tl = upper_left(sys.a(), &cert.p, cert.eta)?;
    let off = cert.p.matmul(sys.b())?;
    Matrix::block2(&tl, &off, &off.transpose(), &lower_right(sys, &cert.gamma)?)
}

/// Passivity inequality: pass iff `λ_max(M) ≤ rel_tol·max(1, |M|)` and `P ≻ 0`.
pub fn check_assumption2(sys: &LureSystem, cert: &Certificate, rel_tol: f64) -> Result<MatrixCheck> {
    let m = passivity_matrix(sys, cert)?;
    matrix_check(&m, &cert.p, rel_tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Property1Check {
    pub matrix: MatrixCheck,
    /// `max |ΓCA − HC|`.
    pub h_residual: f64,
    pub h_sign_ok: bool,
    pub passed: bool,
}

/// Structural route: `M̄ ≤ 0`, `ΓCA = HC`, and each `h_i ≤ −1` or
/// (`h_i ≤ 0` with `Z = 0`).
pub fn check_property1(sys: &LureSystem, cert: &Certificate, h: &[f64]) -> Result<Property1Check> {
    if h.len() != sys.p() {
        return Err(Error::Dimension(format!("H has {} entries, expected {}", h.len(), sys.p())));
    }
    let m = structural_matrix(sys, cert)?;
    let matrix = matrix_check(&m, &cert.p, PSD_REL_TOL)?;
    let gca = sys.ca().scale_rows(&cert.gamma)?;
    let hc = sys.c().scale_rows(h)?;
    let diff = gca.sub(&hc)?;
    let h_residual = diff.max_abs();
    let z_zero = sys.z_matrix().max_abs() == 0.0;
    let h_sign_ok = h.iter().all(|&hi| hi <= -1.0 || (hi <= 0.0 && z_zero));
    let h_ok = h_residual <= H_TOL * gca.max_abs().max(1.0);
    Ok(Property1Check {
        passed: matrix.passed && h_ok && h_sign_ok,
        matrix,
        h_residual,
        h_sign_ok,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdsOptions {
    pub starts: usize,
    pub iterations: usize,
    pub seed: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for LdsOptions {
    fn default() -> Self {
        Self {
            starts: 50,
            iterations: 200,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdsResult {
    pub passed: bool,
    /// Witness `Γ̄`, normalized to trace `p`.
    pub gamma_bar: Vec<f64>,
    pub lambda_min: f64,
}

fn lds_margin(m: &Matrix, d: &[f64]) -> f64 {
    let s = m.scale_rows(d).and_then(|dm| dm.sym_sum()).expect("square input");
    lambda_min(&s).unwrap_or(f64::NEG_INFINITY)
}

fn normalize_trace(d: &mut [f64]) {
    let t: f64 = d.iter().sum();
    let k = d.len() as f64 / t;
    d.iter_mut().for_each(|v| *v *= k);
}

fn lds_ascent(m: &Matrix, start: Vec<f64>, iterations: usize) -> (Vec<f64>, f64) {
    let mut z: Vec<f64> = start.iter().map(|v| v.ln()).collect();
    let eval = |z: &[f64]| {
        let mut d: Vec<f64> = z.iter().map(|v| v.exp()).collect();
        normalize_trace(&mut d);
        (lds_margin(m, &d), d)
    };
    let (mut best, _) = eval(&z);
    let mut step = 1.0;
    for _ in 0..iterations {
        let mut improved = false;
        for i in 0..z.len() {
            for dir in [1.0, -1.0] {
                let mut trial = z.clone();
                trial[i] += dir * step;
                let (f, _) = eval(&trial);
                if f > best {
                    best = f;
                    z = trial;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
        }
    }
    let (f, d) = eval(&z);
    (d, f)
}

/// Searches a positive diagonal `Γ̄` maximizing `λ_min(Γ̄M + MᵀΓ̄)`.
pub fn check_lds(m: &Matrix) -> Result<LdsResult> {
    check_lds_with(m, &LdsOptions::default())
}

pub fn check_lds_with(m: &Matrix, opts: &LdsOptions) -> Result<LdsResult> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("LDS test needs a square matrix, got {:?}", m.shape())));
    }
    let p = m.rows();
    let runs = batch::map_range(opts.execution, opts.starts + 1, |k| {
        let start = if k == 0 {
            vec![1.0; p]
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k as u64));
            (0..p).map(|_| rng.gen_range(-2.0f64..2.0).exp()).collect()
        };
        lds_ascent(m, start, opts.iterations)
    });
    let (gamma_bar, lambda_min) = runs
        .into_iter()
        .fold((vec![1.0; p], f64::NEG_INFINITY), |best, run| {
            if run.1 > best.1 {
                run
            } else {
                best
            }
        });
    Ok(LdsResult {
        passed: lambda_min > EPS_PD,
        gamma_bar,
        lambda_min,
    })
}

/// Sampled nondecreasing check range used for the network preconditions.
const MONOTONE_RANGE: f64 = 10.0;

/// Constructive structural certificate for networks with diagonal Hurwitz
/// `A`, diagonally stable `B`, `C = I`, `ζ = ∞` and nondecreasing
/// nonlinearities that jump at the origin.
pub fn lemma4_certificate(sys: &LureSystem) -> Result<Certificate> {
    check_network_shape(sys)?;
    let lds = check_lds(sys.b())?;
    if !lds.passed {
        return Err(Error::Hypothesis(format!(
            "B is not diagonally stable (best lambda_min {:e})",
            lds.lambda_min
        )));
    }
    let a = sys.a().diag();
    let s = lds
        .gamma_bar
        .iter()
        .zip(&a)
        .map(|(g, ai)| 1.0 / (g * ai.abs()))
        .fold(1.0_f64, f64::max);
    let gamma: Vec<f64> = lds.gamma_bar.iter().map(|g| g * s).collect();
    let sigma = sys.b().scale_rows(&gamma)?.sym_sum()?;
    let sigma_inv = inverse(&sigma)?;
    let pi = sys.a().scale(2.0);
    let bsb = sys.b().matmul(&sigma_inv)?.matmul(&sys.b().transpose())?;
    let mut alpha = 1.0_f64;
    loop {
        let schur = pi.scale(alpha).add(&bsb)?;
        if lambda_max(&symmetrize(&schur))? < 0.0 {
            break;
        }
        alpha *= 2.0;
        if alpha > 1e18 {
            return Err(Error::Hypothesis("no alpha renders the Schur complement negative".into()));
        }
    }
    let p = Matrix::identity(sys.n()).scale(1.0 / alpha);
    let tl = p.matmul(sys.a())?.sym_sum()?;
    let pb = p.matmul(sys.b())?;
    let mt = Matrix::block2(&tl, &pb, &pb.transpose(), &sigma.scale(-1.0))?;
    let eta = -lambda_max(&mt)? / 2.0;
    if !(eta > 0.0) {
        return Err(Error::Hypothesis(format!("constructed matrix is not negative definite (eta {eta:e})")));
    }
    let h: Vec<f64> = gamma.iter().zip(&a).map(|(g, ai)| g * ai).collect();
    Ok(Certificate::structural(p, gamma, eta, h))
}

fn symmetrize(m: &Matrix) -> Matrix {
    m.sym_sum().expect("square").scale(0.5)
}

/// Verifies the structural preconditions of `lemma4_certificate` except
/// diagonal stability of `B`.
pub fn check_network_shape(sys: &LureSystem) -> Result<()> {
    let (n, p) = (sys.n(), sys.p());
    if n != p || sys.c() != &Matrix::identity(n) {
        return Err(Error::Hypothesis("network form needs C = I".into()));
    }
    let a = sys.a();
    for i in 0..n {
        for j in 0..n {
            if i != j && a[(i, j)] != 0.0 {
                return Err(Error::Hypothesis(format!("A is not diagonal (entry ({i},{j}))")));
            }
        }
        if !(a[(i, i)] < 0.0) {
            return Err(Error::Hypothesis(format!("A[{i}][{i}] = {} is not negative", a[(i, i)])));
        }
    }
    if sys.zeta().iter().any(|z| z.is_finite()) {
        return Err(Error::Hypothesis("network form needs zeta = inf on every channel".into()));
    }
    let range = Interval::new(-MONOTONE_RANGE, MONOTONE_RANGE).expect("ordered");
    for (i, f) in sys.psi().iter().enumerate() {
        if !f.is_nondecreasing(range, DEFAULT_SECTOR_SAMPLES) {
            return Err(Error::Hypothesis(format!("psi[{i}] is not nondecreasing")));
        }
        if !f.discontinuous_at_origin() {
            return Err(Error::Hypothesis(format!("psi[{i}] does not jump across zero at the origin")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifyOptions {
    pub sector_range: Interval,
    pub sector_samples: usize,
    pub passivity_rel_tol: f64,
    pub nu_cap: f64,
    pub lds: LdsOptions,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            sector_range: Interval::new(-10.0, 10.0).expect("ordered"),
            sector_samples: DEFAULT_SECTOR_SAMPLES,
            passivity_rel_tol: PSD_REL_TOL,
            nu_cap: NU_CAP,
            lds: LdsOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "route", rename_all = "snake_case")]
pub enum CertificateOutcome {
    Passivity(MatrixCheck),
    Structural(Property1Check),
}

impl CertificateOutcome {
    pub fn passed(&self) -> bool {
        match self {
            CertificateOutcome::Passivity(m) => m.passed,
            CertificateOutcome::Structural(c) => c.passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub sector_ok: bool,
    pub sector: Vec<SectorVerdict>,
    pub certificate: Option<CertificateOutcome>,
    pub lds: LdsResult,
    /// `λ_min(Γ̄CB + (CB)ᵀΓ̄)` recomputed from the witness.
    pub lds_recheck: f64,
    pub discontinuous_at_origin: bool,
    pub c_invertible: bool,
    pub finite_time: Option<FiniteTimeConstants>,
    pub gas: Verdict,
    pub ogas: Verdict,
    pub siolas: Verdict,
    pub ofts: Verdict,
    pub sfts: Verdict,
}

/// Combines the hypothesis checks into the stability verdicts.
///
/// GAS needs the sector condition plus a passing certificate. Output
/// finite-time stability additionally needs `CB` diagonally stable and
/// every nonlinearity to jump across zero at the origin; state finite-time
/// stability then holds exactly when `C` is invertible. When those output
/// hypotheses hold and `C` is singular the answer is `No` regardless of the
/// GAS verdict: without GAS there is no SFTS by definition, and with it the
/// equivalence applies.
pub fn classify(
    sys: &LureSystem,
    cert: Option<&Certificate>,
    opts: &ClassifyOptions,
) -> Result<StabilityReport> {
    let sector = sys.check_sectors(opts.sector_range, opts.sector_samples);
    let sector_ok = sector.iter().all(SectorVerdict::passed);

    let certificate = match cert {
        None => None,
        Some(c) => Some(match c.kind {
            CertificateKind::Passivity => {
                CertificateOutcome::Passivity(check_assumption2(sys, c, opts.passivity_rel_tol)?)
            }
            CertificateKind::Structural => {
                let h = c.h.as_ref().ok_or_else(|| {
                    Error::Parameter("structural certificate needs the diagonal of H".into())
                })?;
                CertificateOutcome::Structural(check_property1(sys, c, h)?)
            }
        }),
    };
    let cert_ok = certificate.as_ref().is_some_and(CertificateOutcome::passed);

    let cb = sys.cb();
    let lds = check_lds_with(&cb, &opts.lds)?;
    let lds_recheck = lds_margin(&cb, &lds.gamma_bar);
    let lds_ok = lds.passed && lds_recheck > EPS_PD;
    let discontinuous = sys.psi().iter().all(|f| f.discontinuous_at_origin());
    let c_invertible = sys.c().is_square() && inverse(sys.c()).is_ok();
    let finite_time = if lds_ok && discontinuous {
        finite_time_constants(sys, &lds.gamma_bar, opts.nu_cap).ok()
    } else {
        None
    };

    let gas = if sector_ok && cert_ok { Verdict::Yes } else { Verdict::Unknown };
    let output_hyp = sector_ok && lds_ok && discontinuous;
    let ofts = if output_hyp && gas == Verdict::Yes {
        Verdict::Yes
    } else {
        Verdict::Unknown
    };
    let sfts = if output_hyp && !c_invertible {
        Verdict::No
    } else if output_hyp && gas == Verdict::Yes {
        Verdict::Yes
    } else {
        Verdict::Unknown
    };

    Ok(StabilityReport {
        sector_ok,
        sector,
        certificate,
        lds,
        lds_recheck,
        discontinuous_at_origin: discontinuous,
        c_invertible,
        finite_time,
        gas,
        ogas: gas,
        siolas: ofts,
        ofts,
        sfts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub starts: usize,
    pub iterations: usize,
    pub seed: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            starts: 16,
            iterations: 400,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub certificate: Certificate,
    pub check: MatrixCheck,
}

/// Best-effort randomized search for a passivity certificate.
///
/// Coordinate descent on `λ_max(M)` over the lower Cholesky factor of `P`,
/// `log Γ` and `log η`, from several seeded starts. No completeness claim:
/// a failing result says nothing about infeasibility.
pub fn search_certificate(sys: &LureSystem, opts: &SearchOptions) -> Result<SearchResult> {
    let (n, p) = (sys.n(), sys.p());
    let tri: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..=i).map(move |j| (i, j))).collect();
    let dim = tri.len() + p + 1;
    let decode = |theta: &[f64]| -> Certificate {
        let mut l = Matrix::zeros(n, n);
        for (k, &(i, j)) in tri.iter().enumerate() {
            l[(i, j)] = theta[k];
        }
        let pm = symmetrize(&l.matmul(&l.transpose()).expect("square"))
            .add(&Matrix::identity(n).scale(1e-9))
            .expect("same shape");
        let gamma = theta[tri.len()..tri.len() + p].iter().map(|v| v.exp()).collect();
        Certificate::passivity(pm, gamma, theta[dim - 1].exp())
    };
    let objective = |theta: &[f64]| -> f64 {
        passivity_matrix(sys, &decode(theta))
            .and_then(|m| lambda_max(&m))
            .unwrap_or(f64::INFINITY)
    };
    let runs = batch::map_range(opts.execution, opts.starts.max(1), |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k as u64));
        let mut theta = vec![0.0; dim];
        for (t, &(i, j)) in tri.iter().enumerate() {
            theta[t] = if i == j { 1.0 } else { 0.0 } + if k == 0 { 0.0 } else { rng.gen_range(-0.5..0.5) };
        }
        for v in theta[tri.len()..].iter_mut() {
            *v = if k == 0 { 0.0 } else { rng.gen_range(-2.0..2.0) };
        }
        let mut best = objective(&theta);
        let mut step = 0.5;
        for _ in 0..opts.iterations {
            let mut improved = false;
            for i in 0..dim {
                for dir in [1.0, -1.0] {
                    theta[i] += dir * step;
                    let f = objective(&theta);
                    if f < best {
                        best = f;
                        improved = true;
                        break;
                    }
                    theta[i] -= dir * step;
                }
            }
            if !improved {
                step *= 0.5;
                if step < 1e-10 {
                    break;
                }
            }
        }
        (theta, best)
    });
    let (theta, _) = runs
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one start");
    let certificate = decode(&theta);
    let check = check_assumption2(sys, &certificate, PSD_REL_TOL)?;
    Ok(SearchResult { certificate, check })
}
