//! JSON system description and its validation into library types.

use std::path::Path;

use lurekit::certify::CertificateKind;
use lurekit::{presets, Certificate, Expr, Interval, LureSystem, Matrix, PiecewiseFn, SimOptions, Term};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    pub nonlinearities: Vec<NonlinearitySpec>,
    pub zeta: Vec<Bound>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector_range: Option<[f64; 2]>,
}

/// A number, or one of `"inf"`, `"+inf"`, `"-inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Number(f64),
    Named(String),
}

impl Bound {
    pub fn from_f64(v: f64) -> Self {
        if v == f64::INFINITY {
            Bound::Named("inf".into())
        } else if v == f64::NEG_INFINITY {
            Bound::Named("-inf".into())
        } else {
            Bound::Number(v)
        }
    }

    pub fn value(&self, path: &str) -> CliResult<f64> {
        match self {
            Bound::Number(v) if v.is_finite() => Ok(*v),
            Bound::Number(v) => Err(CliError::config(path, format!("{v} is not finite"))),
            Bound::Named(s) => match s.trim() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(CliError::config(path, format!("expected a number or \"inf\", found \"{other}\""))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NonlinearitySpec {
    /// `"sign"`, `"relay(a,b)"` or `"linear(k)"`.
    Named(String),
    Explicit(ExplicitFn),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitFn {
    #[serde(default)]
    pub breakpoints: Vec<f64>,
    pub segments: Vec<SegmentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub terms: Vec<TermSpec>,
    /// Optional `[lo, hi]`, checked against the breakpoints.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<[Bound; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coef: f64,
    #[serde(default)]
    pub power: u32,
    #[serde(default)]
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSpec {
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(rename = "Gamma")]
    pub gamma: Vec<f64>,
    pub eta: f64,
    #[serde(default = "default_kind")]
    pub kind: CertificateKind,
    #[serde(rename = "H", default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
}

fn default_kind() -> CertificateKind {
    CertificateKind::Passivity
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hold_window: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_surface: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_zero: Option<f64>,
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub system: LureSystem,
    pub certificate: Option<Certificate>,
    pub sim: SimOptions,
    pub x0: Option<Vec<f64>>,
    pub sector_range: Interval,
}

pub fn parse(text: &str) -> CliResult<SystemConfig> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
}

pub fn read(path: &Path) -> CliResult<SystemConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> CliResult<Matrix> {
    let Some(first) = rows.first() else {
        return Err(CliError::config(name, "matrix has no rows"));
    };
    if first.is_empty() {
        return Err(CliError::config(&format!("{name}[0]"), "row is empty"));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != first.len() {
            return Err(CliError::config(
                &format!("{name}[{i}]"),
                format!("expected {} entries, found {}", first.len(), row.len()),
            ));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(CliError::config(&format!("{name}[{i}][{j}]"), "entry is not finite"));
        }
    }
    Matrix::from_rows(rows).map_err(|e| CliError::config(name, e))
}

fn parse_levels(path: &str, body: &str, count: usize) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = body.split(',').map(str::trim).collect();
    if parts.len() != count {
        return Err(CliError::config(path, format!("expected {count} argument(s), found {}", parts.len())));
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::config(path, format!("cannot parse '{p}' as a number")))
        })
        .collect()
}

fn named_fn(path: &str, name: &str) -> CliResult<PiecewiseFn> {
    let name = name.trim();
    if name == "sign" {
        return Ok(PiecewiseFn::sign());
    }
    let call = |prefix: &str| name.strip_prefix(prefix).and_then(|r| r.strip_suffix(')'));
    if let Some(body) = call("relay(") {
        let v = parse_levels(path, body, 2)?;
        if !(v[0] < 0.0 && v[1] > 0.0) {
            return Err(CliError::config(path, "relay(a,b) needs a < 0 < b"));
        }
        return Ok(PiecewiseFn::relay(v[0], v[1]));
    }
    if let Some(body) = call("linear(") {
        return Ok(PiecewiseFn::linear(parse_levels(path, body, 1)?[0]));
    }
    Err(CliError::config(
        path,
        format!("unknown nonlinearity \"{name}\", expected \"sign\", \"relay(a,b)\", \"linear(k)\" or an explicit definition"),
    ))
}

fn explicit_fn(path: &str, spec: &ExplicitFn) -> CliResult<PiecewiseFn> {
    let bp = &spec.breakpoints;
    if spec.segments.len() != bp.len() + 1 {
        return Err(CliError::config(
            &format!("{path}.segments"),
            format!("{} breakpoints need {} segments, found {}", bp.len(), bp.len() + 1, spec.segments.len()),
        ));
    }
    let mut segs = Vec::with_capacity(spec.segments.len());
    for (k, seg) in spec.segments.iter().enumerate() {
        let spath = format!("{path}.segments[{k}]");
        if let Some([lo, hi]) = &seg.interval {
            let want_lo = if k == 0 { f64::NEG_INFINITY } else { bp[k - 1] };
            let want_hi = bp.get(k).copied().unwrap_or(f64::INFINITY);
            let got = (lo.value(&format!("{spath}.interval[0]"))?, hi.value(&format!("{spath}.interval[1]"))?);
            if got != (want_lo, want_hi) {
                return Err(CliError::config(
                    &format!("{spath}.interval"),
                    format!("expected [{want_lo}, {want_hi}] from the breakpoints, found [{}, {}]", got.0, got.1),
                ));
            }
        }
        for (j, t) in seg.terms.iter().enumerate() {
            if !(t.coef.is_finite() && t.rate.is_finite()) {
                return Err(CliError::config(&format!("{spath}.terms[{j}]"), "coef and rate must be finite"));
            }
        }
        segs.push(Expr::new(seg.terms.iter().map(|t| Term::new(t.coef, t.power, t.rate)).collect()));
    }
    PiecewiseFn::new(bp.clone(), segs, spec.point_values.clone()).map_err(|e| CliError::config(path, e))
}

fn certificate(spec: &CertificateSpec, n: usize, p: usize) -> CliResult<Certificate> {
    let pm = matrix("certificate.P", &spec.p)?;
    if pm.shape() != (n, n) {
        return Err(CliError::config("certificate.P", format!("expected {n}x{n}, found {}x{}", pm.rows(), pm.cols())));
    }
    if spec.gamma.len() != p {
        return Err(CliError::config("certificate.Gamma", format!("expected {p} entries, found {}", spec.gamma.len())));
    }
    if let Some(i) = spec.gamma.iter().position(|g| !(g.is_finite() && *g > 0.0)) {
        return Err(CliError::config(&format!("certificate.Gamma[{i}]"), "must be positive"));
    }
    if !(spec.eta.is_finite() && spec.eta > 0.0) {
        return Err(CliError::config("certificate.eta", "must be positive"));
    }
    match (spec.kind, &spec.h) {
        (CertificateKind::Structural, None) => {
            Err(CliError::config("certificate.H", "required for kind \"structural\""))
        }
        (_, Some(h)) if h.len() != p => {
            Err(CliError::config("certificate.H", format!("expected {p} entries, found {}", h.len())))
        }
        _ => Ok(Certificate {
            p: pm,
            gamma: spec.gamma.clone(),
            eta: spec.eta,
            kind: spec.kind,
            h: spec.h.clone(),
        }),
    }
}

fn sim_options(spec: &SimSpec) -> CliResult<SimOptions> {
    let mut opts = SimOptions::with_horizon(spec.horizon.unwrap_or(10.0));
    if let Some(v) = spec.dt_max {
        opts.dt_max = v;
    }
    if let Some(v) = spec.hold_window {
        opts.hold_window = v;
    }
    if let Some(t) = &spec.tolerances {
        opts.dt_min = t.dt_min.unwrap_or(opts.dt_min);
        opts.eps_surface = t.eps_surface.unwrap_or(opts.eps_surface);
        opts.eps_zero = t.eps_zero.unwrap_or(opts.eps_zero);
    }
    opts.validate().map_err(|e| CliError::config("sim", e))?;
    Ok(opts)
}

impl SystemConfig {
    /// Validates every field and builds the library objects.
    pub fn load(&self) -> CliResult<Loaded> {
        let a = matrix("A", &self.a)?;
        if !a.is_square() {
            return Err(CliError::config("A", format!("must be square, found {}x{}", a.rows(), a.cols())));
        }
        let n = a.rows();
        let b = matrix("B", &self.b)?;
        if b.rows() != n {
            return Err(CliError::config("B", format!("expected {n} rows to match A, found {}", b.rows())));
        }
        let p = b.cols();
        let c = matrix("C", &self.c)?;
        if c.shape() != (p, n) {
            return Err(CliError::config("C", format!("expected {p}x{n}, found {}x{}", c.rows(), c.cols())));
        }
        if self.nonlinearities.len() != p {
            return Err(CliError::config(
                "nonlinearities",
                format!("expected {p} entries (one per input), found {}", self.nonlinearities.len()),
            ));
        }
        let psi = self
            .nonlinearities
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let path = format!("nonlinearities[{i}]");
                match spec {
                    NonlinearitySpec::Named(name) => named_fn(&path, name),
                    NonlinearitySpec::Explicit(e) => explicit_fn(&path, e),
                }
            })
            .collect::<CliResult<Vec<_>>>()?;
        if self.zeta.len() != p {
            return Err(CliError::config("zeta", format!("expected {p} entries, found {}", self.zeta.len())));
        }
        let zeta = self
            .zeta
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let path = format!("zeta[{i}]");
                let v = z.value(&path)?;
                if v > 0.0 {
                    Ok(v)
                } else {
                    Err(CliError::config(&path, "must be positive or \"inf\""))
                }
            })
            .collect::<CliResult<Vec<_>>>()?;
        let system = LureSystem::new(a, b, c, psi, zeta).map_err(|e| CliError::config("system", e))?;
        let certificate = self.certificate.as_ref().map(|c| certificate(c, n, p)).transpose()?;
        let sim_spec = self.sim.clone().unwrap_or_default();
        let sim = sim_options(&sim_spec)?;
        if let Some(x0) = &sim_spec.x0 {
            check_state("sim.x0", x0, n)?;
        }
        let sector_range = match self.sector_range {
            None => Interval::new(-10.0, 10.0).expect("ordered"),
            Some([lo, hi]) if lo.is_finite() && hi.is_finite() && lo < 0.0 && hi > 0.0 => {
                Interval::new(lo, hi).expect("ordered")
            }
            Some(_) => return Err(CliError::config("sector_range", "expected [lo, hi] with lo < 0 < hi")),
        };
        Ok(Loaded {
            system,
            certificate,
            sim,
            x0: sim_spec.x0,
            sector_range,
        })
    }

    /// Emits a configuration equivalent to the given objects; every
    /// nonlinearity is written in explicit form.
    pub fn from_parts(sys: &LureSystem, cert: Option<&Certificate>, sim: Option<SimSpec>) -> Self {
        let nonlinearities = sys
            .psi()
            .iter()
            .map(|f| {
                NonlinearitySpec::Explicit(ExplicitFn {
                    breakpoints: f.breakpoints().to_vec(),
                    segments: f
                        .segments()
                        .iter()
                        .map(|e| SegmentSpec {
                            terms: e
                                .terms
                                .iter()
                                .map(|t| TermSpec { coef: t.coef, power: t.power, rate: t.rate })
                                .collect(),
                            interval: None,
                        })
                        .collect(),
                    point_values: (!f.breakpoints().is_empty()).then(|| f.point_values().to_vec()),
                })
            })
            .collect();
        SystemConfig {
            a: sys.a().to_rows(),
            b: sys.b().to_rows(),
            c: sys.c().to_rows(),
            nonlinearities,
            zeta: sys.zeta().iter().map(|&z| Bound::from_f64(z)).collect(),
            certificate: cert.map(|c| CertificateSpec {
                p: c.p.to_rows(),
                gamma: c.gamma.clone(),
                eta: c.eta,
                kind: c.kind,
                h: c.h.clone(),
            }),
            sim,
            sector_range: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is serializable")
    }
}

pub fn check_state(path: &str, x: &[f64], n: usize) -> CliResult<()> {
    if x.len() != n {
        return Err(CliError::config(path, format!("expected {n} entries, found {}", x.len())));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(CliError::config(&format!("{path}[{i}]"), "not finite"));
    }
    Ok(())
}

/// Default initial state and horizon of each preset.
fn preset_sim(name: &str) -> SimSpec {
    let (x0, horizon) = match name {
        "rotor" => (vec![0.5, 1.0, 1.0], 60.0),
        "cnn-demo" => (vec![0.6, -0.3], 5.0),
        _ => (vec![1.0, 1.0], 10.0),
    };
    SimSpec { x0: Some(x0), horizon: Some(horizon), ..SimSpec::default() }
}

/// Configuration of a named preset, including its reference certificate.
pub fn preset_config(name: &str) -> CliResult<SystemConfig> {
    let (sys, cert) = presets::preset(name).map_err(|e| CliError::config("--preset", e))?;
    Ok(SystemConfig::from_parts(&sys, Some(&cert), Some(preset_sim(name))))
}
