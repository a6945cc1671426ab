//! Verb implementations. Each returns a serializable result; rendering to
//! text is separate so the JSON form carries the same content.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use lurekit::certify::{classify, search_certificate, ClassifyOptions, LdsOptions, SearchOptions};
use lurekit::densemat::norm;
use lurekit::krasim::{detect_finite_time, simulate_batch, FiniteTime, Projection};
use lurekit::lyapunov::{clarke_sup_directional, lie_derivative_set, lie_sup_bound, value};
use lurekit::{Certificate, Execution, LieSet, LyapunovData, StabilityReport, Trajectory, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{check_state, Loaded};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateSource {
    Config,
    Search,
    None,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifyOutput {
    pub n: usize,
    pub p: usize,
    pub certificate_source: CertificateSource,
    pub certificate: Option<Certificate>,
    pub report: StabilityReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub x0: Vec<f64>,
    pub end_time: f64,
    pub samples: usize,
    pub events: usize,
    pub output_convergence: FiniteTime,
    pub state_convergence: FiniteTime,
    pub final_state: Vec<f64>,
    pub final_norm: f64,
    pub final_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateOutput {
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointOutput {
    pub x: Vec<f64>,
    pub v: f64,
    pub clarke_sup: f64,
    pub lie_sup_bound: f64,
    pub lie_set: LieSet,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportOutput {
    pub certify: CertifyOutput,
    pub simulation: Option<SimulateOutput>,
}

fn lyapunov_data(cert: &Certificate) -> Option<LyapunovData> {
    LyapunovData::new(cert.p.clone(), cert.gamma.clone()).ok()
}

pub fn certify(cfg: &Loaded, seed: u64, search: bool) -> CliResult<CertifyOutput> {
    let sys = &cfg.system;
    let (certificate, source) = match (&cfg.certificate, search) {
        (Some(c), _) => (Some(c.clone()), CertificateSource::Config),
        (None, true) => {
            let found = search_certificate(sys, &SearchOptions { seed, ..SearchOptions::default() })
                .map_err(CliError::from_analysis)?;
            (Some(found.certificate), CertificateSource::Search)
        }
        (None, false) => (None, CertificateSource::None),
    };
    let opts = ClassifyOptions {
        sector_range: cfg.sector_range,
        lds: LdsOptions { seed, ..LdsOptions::default() },
        ..ClassifyOptions::default()
    };
    let report = classify(sys, certificate.as_ref(), &opts).map_err(CliError::from_analysis)?;
    Ok(CertifyOutput {
        n: sys.n(),
        p: sys.p(),
        certificate_source: source,
        certificate,
        report,
    })
}

fn summarize(cfg: &Loaded, x0: &[f64], traj: &Trajectory, csv: Option<PathBuf>) -> RunSummary {
    let hold = cfg.sim.hold_window;
    let eps = cfg.sim.eps_zero;
    let final_state = traj.final_state().to_vec();
    let final_v = cfg
        .certificate
        .as_ref()
        .and_then(lyapunov_data)
        .and_then(|l| value(&cfg.system, &l, &final_state).ok());
    RunSummary {
        x0: x0.to_vec(),
        end_time: traj.times.last().copied().unwrap_or(0.0),
        samples: traj.len(),
        events: traj.events.len(),
        output_convergence: detect_finite_time(traj, Projection::Output, eps, hold),
        state_convergence: detect_finite_time(traj, Projection::State, eps, hold),
        final_norm: norm(&final_state),
        final_state,
        final_v,
        csv,
    }
}

fn write_csv(path: &Path, traj: &Trajectory) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    traj.write_csv(BufWriter::new(file))?;
    Ok(())
}

/// `out` for a single run, `stem_k.ext` for run `k` of a batch.
fn batch_path(out: &Path, k: usize) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectory");
    let name = match out.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_{k}.{ext}"),
        None => format!("{stem}_{k}"),
    };
    out.with_file_name(name)
}

pub struct SimulateArgs<'a> {
    pub x0: Option<&'a [f64]>,
    pub horizon: Option<f64>,
    pub out: Option<&'a Path>,
    pub batch: Option<usize>,
    pub seed: u64,
}

pub fn simulate(cfg: &Loaded, args: &SimulateArgs) -> CliResult<SimulateOutput> {
    let n = cfg.system.n();
    let x0: Vec<f64> = match (args.x0, &cfg.x0) {
        (Some(x), _) => {
            check_state("--x0", x, n)?;
            x.to_vec()
        }
        (None, Some(x)) => x.clone(),
        (None, None) => return Err(CliError::config("sim.x0", "no initial state; pass --x0 or set sim.x0")),
    };
    let mut opts = cfg.sim;
    if let Some(h) = args.horizon {
        opts.horizon = h;
        opts.hold_window = opts.hold_window.min(h);
        opts.validate().map_err(|e| CliError::config("--horizon", e))?;
    }

    let starts = match args.batch {
        None => vec![x0],
        Some(0) => return Err(CliError::config("--batch", "must be at least 1")),
        Some(count) => {
            // first run from x0, the rest uniform in the ball of radius |x0|
            let radius = norm(&x0).max(f64::MIN_POSITIVE);
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let mut starts = vec![x0];
            while starts.len() < count {
                let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                if norm(&v) <= 1.0 {
                    starts.push(v.iter().map(|c| c * radius).collect());
                }
            }
            starts
        }
    };

    let results = simulate_batch(&cfg.system, &starts, &opts, Execution::default());
    let mut runs = Vec::with_capacity(starts.len());
    for (k, (x0, res)) in starts.iter().zip(results).enumerate() {
        let traj = res.map_err(CliError::from_analysis)?;
        let csv = args.out.map(|o| if args.batch.is_some() { batch_path(o, k) } else { o.to_path_buf() });
        if let Some(path) = &csv {
            write_csv(path, &traj)?;
        }
        runs.push(summarize(cfg, x0, &traj, csv));
    }
    Ok(SimulateOutput { runs })
}

pub fn analyze_point(cfg: &Loaded, x: &[f64]) -> CliResult<PointOutput> {
    let cert = cfg
        .certificate
        .as_ref()
        .ok_or_else(|| CliError::config("certificate", "analyze-point needs a certificate (P, Gamma)"))?;
    check_state("--x", x, cfg.system.n())?;
    let lyap = LyapunovData::new(cert.p.clone(), cert.gamma.clone())
        .map_err(|e| CliError::config("certificate", e))?;
    let sys = &cfg.system;
    let an = |e| CliError::from_analysis(e);
    Ok(PointOutput {
        x: x.to_vec(),
        v: value(sys, &lyap, x).map_err(an)?,
        clarke_sup: clarke_sup_directional(sys, &lyap, x).map_err(an)?,
        lie_sup_bound: lie_sup_bound(sys, &lyap, x).map_err(an)?.value,
        lie_set: lie_derivative_set(sys, &lyap, x).map_err(an)?,
    })
}

pub fn report(cfg: &Loaded, seed: u64, search: bool, sim: &SimulateArgs) -> CliResult<ReportOutput> {
    let certify = certify(cfg, seed, search)?;
    let simulation = if sim.x0.is_some() || cfg.x0.is_some() {
        Some(simulate(cfg, sim)?)
    } else {
        None
    };
    Ok(ReportOutput { certify, simulation })
}

fn verdict(v: Verdict) -> &'static str {
    match v {
        Verdict::Yes => "yes",
        Verdict::No => "no",
        Verdict::Unknown => "unknown",
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_finite_time(f: &FiniteTime) -> String {
    match f {
        FiniteTime::Converged { t } => format!("{t:.6}"),
        FiniteTime::Inconclusive { t } => format!("inconclusive (within tolerance from {t:.6}, run too short)"),
        FiniteTime::NotConverged => "not reached".into(),
    }
}

pub fn render_certify(o: &CertifyOutput) -> String {
    use lurekit::certify::CertificateOutcome;
    let r = &o.report;
    let mut s = String::new();
    let _ = writeln!(s, "system: n = {}, p = {}", o.n, o.p);
    let _ = writeln!(s, "sector condition (sampled): {}", if r.sector_ok { "pass" } else { "fail" });
    match &r.certificate {
        None => {
            let _ = writeln!(s, "certificate: none");
        }
        Some(CertificateOutcome::Passivity(m)) => {
            let _ = writeln!(
                s,
                "passivity certificate ({:?}): {} (lambda_max {:.6e}, tolerance {:.3e}, lambda_min(P) {:.6e})",
                o.certificate_source,
                if m.passed { "pass" } else { "fail" },
                m.lambda_max,
                m.tolerance,
                m.p_lambda_min
            );
        }
        Some(CertificateOutcome::Structural(c)) => {
            let _ = writeln!(
                s,
                "structural certificate ({:?}): {} (lambda_max {:.6e}, H residual {:.3e}, H signs {})",
                o.certificate_source,
                if c.passed { "pass" } else { "fail" },
                c.matrix.lambda_max,
                c.h_residual,
                if c.h_sign_ok { "ok" } else { "violated" }
            );
        }
    }
    let _ = writeln!(
        s,
        "CB diagonally stable: {} (witness {}, lambda_min {:.6e}, recheck {:.6e})",
        if r.lds.passed { "yes" } else { "no" },
        fmt_vec(&r.lds.gamma_bar),
        r.lds.lambda_min,
        r.lds_recheck
    );
    let _ = writeln!(s, "jump at origin on every channel: {}", if r.discontinuous_at_origin { "yes" } else { "no" });
    let _ = writeln!(s, "C invertible: {}", if r.c_invertible { "yes" } else { "no" });
    if let Some(k) = &r.finite_time {
        let _ = writeln!(
            s,
            "finite-time constants: c = {:.6e}, nu = {:.6e}, mu = {:.6e}, lambda1 = {:.6e}, lambda2 = {:.6e}, omega = {:.6e}",
            k.c, k.nu, k.mu, k.lambda1, k.lambda2, k.omega
        );
    }
    let _ = writeln!(
        s,
        "GAS: {}  OGAS: {}  SIoLAS: {}  OFTS: {}  SFTS: {}",
        verdict(r.gas),
        verdict(r.ogas),
        verdict(r.siolas),
        verdict(r.ofts),
        verdict(r.sfts)
    );
    s
}

pub fn render_simulate(o: &SimulateOutput) -> String {
    let mut s = String::new();
    for (k, r) in o.runs.iter().enumerate() {
        let _ = writeln!(
            s,
            "run {k}: x0 = {}, t_end = {:.6}, samples = {}, events = {}",
            fmt_vec(&r.x0),
            r.end_time,
            r.samples,
            r.events
        );
        let _ = writeln!(
            s,
            "  output convergence T = {}, state convergence T = {}",
            fmt_finite_time(&r.output_convergence),
            fmt_finite_time(&r.state_convergence)
        );
        let v = r.final_v.map_or("n/a".to_string(), |v| format!("{v:.6e}"));
        let _ = writeln!(s, "  |x(t_end)| = {:.6e}, V(x(t_end)) = {v}", r.final_norm);
        if let Some(p) = &r.csv {
            let _ = writeln!(s, "  trajectory: {}", p.display());
        }
    }
    s
}

pub fn render_point(o: &PointOutput) -> String {
    let set = match o.lie_set {
        LieSet::Empty => "empty".to_string(),
        LieSet::Singleton { value } => format!("{{{value:.12}}}"),
        LieSet::Interval { lo, hi } => format!("[{lo:.12}, {hi:.12}]"),
    };
    format!(
        "x = {}\nV(x) = {:.12}\nClarke sup = {:.12}\nLie sup bound = {:.12}\nLie derivative set = {set}\n",
        fmt_vec(&o.x),
        o.v,
        o.clarke_sup,
        o.lie_sup_bound
    )
}

pub fn render_report(o: &ReportOutput) -> String {
    let mut s = render_certify(&o.certify);
    if let Some(sim) = &o.simulation {
        s.push_str(&render_simulate(sim));
    }
    s
}
