//! Simulation of Krasovskii solutions `ẋ ∈ Ax − BΨ(Cx)`.
//!
//! Between switching surfaces the flow is integrated with classical RK4,
//! each channel using the closed form of its current segment. Leaving a
//! segment (or losing sliding feasibility) triggers a bisection event
//! search. On surfaces the next mode is picked among sliding subsets,
//! with the sliding inputs given by the equivalent control.

use std::io::{self, Write};

use serde::Serialize;

use crate::batch::{self, Execution};
use crate::densemat::{dot, inverse, norm, solve, Matrix};
use crate::error::{Error, Result};
use crate::luresys::LureSystem;

/// States with a larger norm are treated as diverged.
pub const DIVERGENCE_NORM: f64 = 1e12;
const MAX_BISECTIONS: usize = 60;
const MAX_STALLED_EVENTS: usize = 1000;
const FEAS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimOptions {
    pub dt_max: f64,
    pub dt_min: f64,
    pub eps_surface: f64,
    pub eps_zero: f64,
    pub horizon: f64,
    pub hold_window: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self::with_horizon(10.0)
    }
}

impl SimOptions {
    /// Defaults with the hold window at 10% of `horizon`.
    pub fn with_horizon(horizon: f64) -> Self {
        Self {
            dt_max: 1e-2,
            dt_min: 1e-12,
            eps_surface: 1e-9,
            eps_zero: 1e-6,
            horizon,
            hold_window: 0.1 * horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt_max", self.dt_max),
            ("dt_min", self.dt_min),
            ("eps_surface", self.eps_surface),
            ("eps_zero", self.eps_zero),
            ("horizon", self.horizon),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
        }
        if self.dt_min > self.dt_max {
            return Err(Error::Parameter(format!(
                "dt_min {} exceeds dt_max {}",
                self.dt_min, self.dt_max
            )));
        }
        if !(self.hold_window >= 0.0) {
            return Err(Error::Parameter(format!("hold_window {} is negative", self.hold_window)));
        }
        Ok(())
    }
}

/// Mode decision taken at a switching surface.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEvent {
    pub t: f64,
    /// Channels on a surface when the decision was taken.
    pub on_surface: Vec<usize>,
    /// Channels selected to slide.
    pub sliding: Vec<usize>,
    /// `(channel, side)` for channels crossing, side `+1` towards larger outputs.
    pub crossing: Vec<(usize, i8)>,
    /// Set when no candidate satisfied every condition and the least
    /// violating one was used.
    pub fallback_violation: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    /// Sliding channels at each sample.
    pub modes: Vec<Vec<usize>>,
    /// Selected inputs `u ∈ −Ψ(Cx)` at each sample.
    pub controls: Vec<Vec<f64>>,
    pub events: Vec<SimEvent>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    fn push(&mut self, t: f64, x: &[f64], y: Vec<f64>, sliding: Vec<usize>, u: Vec<f64>) {
        if self.times.last().is_some_and(|&last| t <= last) {
            self.times.pop();
            self.states.pop();
            self.outputs.pop();
            self.modes.pop();
            self.controls.pop();
        }
        self.times.push(t);
        self.states.push(x.to_vec());
        self.outputs.push(y);
        self.modes.push(sliding);
        self.controls.push(u);
    }

    /// CSV with header `t,x1..xn,y1..yp,mode_bitmask`, one row per sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.states.first().map_or(0, Vec::len);
        let p = self.outputs.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=p).map(|i| format!("y{i}")));
        header.push("mode_bitmask".into());
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mask: u64 = self.modes[k].iter().map(|&i| 1u64 << i).sum();
            let mut row = vec![format!("{:e}", self.times[k])];
            row.extend(self.states[k].iter().map(|v| format!("{v:e}")));
            row.extend(self.outputs[k].iter().map(|v| format!("{v:e}")));
            row.push(mask.to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn rk4_with<F>(x: &[f64], dt: f64, f: F) -> Option<Vec<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p + s * q).collect() };
    let k1 = f(x)?;
    let k2 = f(&add(x, &k1, 0.5 * dt))?;
    let k3 = f(&add(x, &k2, 0.5 * dt))?;
    let k4 = f(&add(x, &k3, dt))?;
    Some(
        (0..x.len())
            .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect(),
    )
}

/// One RK4 step of `ẋ = Ax − Bψ(Cx)` with the single-valued `ψ`.
pub fn step_smooth(sys: &LureSystem, x: &[f64], dt: f64) -> Vec<f64> {
    rk4_with(x, dt, |z| {
        let y = sys.output(z);
        let u: Vec<f64> = sys.psi().iter().zip(&y).map(|(f, &yi)| -f.eval(yi)).collect();
        Some(sys.flow(z, &u))
    })
    .expect("smooth field is always defined")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlidingDynamics {
    pub feasible: bool,
    pub u_eq: Vec<f64>,
    pub xdot: Vec<f64>,
}

/// Equivalent control keeping `(Cẋ)_I = 0`; channels outside `I` use `−ψ(C_j x)`.
pub fn sliding_dynamics(sys: &LureSystem, x: &[f64], sliding: &[usize]) -> Result<SlidingDynamics> {
    sys.check_state(x)?;
    if let Some(&i) = sliding.iter().find(|&&i| i >= sys.p()) {
        return Err(Error::Dimension(format!("channel {i} out of range for p = {}", sys.p())));
    }
    let y = sys.output(x);
    let mut u: Vec<f64> = sys.psi().iter().zip(&y).map(|(f, &yi)| -f.eval(yi)).collect();
    let cb = sys.cb();
    let cax = sys.ca().mul_vec(x)?;
    if !sliding.is_empty() {
        for &i in sliding {
            u[i] = 0.0;
        }
        let cbu = cb.mul_vec(&u)?;
        let rhs: Vec<f64> = sliding.iter().map(|&i| -cax[i] - cbu[i]).collect();
        let sol = solve(&cb.select(sliding, sliding), &rhs)?;
        for (&i, v) in sliding.iter().zip(sol) {
            u[i] = v;
        }
    }
    let feasible = sliding.iter().all(|&i| {
        let set = sys.psi()[i].krasovskii(y[i]).neg();
        set.contains(u[i], FEAS_TOL * (1.0 + set.lo.abs().max(set.hi.abs())))
    });
    let xdot = sys.flow(x, &u);
    Ok(SlidingDynamics { feasible, u_eq: u, xdot })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Channel {
    /// Flowing inside segment `k`.
    Segment(usize),
    /// Sliding on breakpoint `k`.
    Sliding(usize),
}

struct Sim<'a> {
    sys: &'a LureSystem,
    cb: Matrix,
    ca: Matrix,
    opts: SimOptions,
}

impl<'a> Sim<'a> {
    fn new(sys: &'a LureSystem, opts: SimOptions) -> Self {
        Self {
            sys,
            cb: sys.cb(),
            ca: sys.ca(),
            opts,
        }
    }

    fn sliding_set(mode: &[Channel]) -> Vec<usize> {
        mode.iter()
            .enumerate()
            .filter(|(_, c)| matches!(c, Channel::Sliding(_)))
            .map(|(i, _)| i)
            .collect()
    }

    /// Inputs under `mode`; `None` when the equivalent control is singular.
    fn controls(&self, x: &[f64], mode: &[Channel]) -> Option<Vec<f64>> {
        let y = self.sys.output(x);
        let mut u = vec![0.0; mode.len()];
        let mut sliding = Vec::new();
        for (j, ch) in mode.iter().enumerate() {
            match *ch {
                Channel::Segment(k) => u[j] = -self.sys.psi()[j].eval_segment(k, y[j]),
                Channel::Sliding(_) => sliding.push(j),
            }
        }
        if !sliding.is_empty() {
            let cax = self.ca.mul_vec(x).ok()?;
            let cbu = self.cb.mul_vec(&u).ok()?;
            let rhs: Vec<f64> = sliding.iter().map(|&i| -cax[i] - cbu[i]).collect();
            let sol = solve(&self.cb.select(&sliding, &sliding), &rhs).ok()?;
            for (&i, v) in sliding.iter().zip(sol) {
                u[i] = v;
            }
        }
        Some(u)
    }

    fn field(&self, x: &[f64], mode: &[Channel]) -> Option<Vec<f64>> {
        let u = self.controls(x, mode)?;
        Some(self.sys.flow(x, &u))
    }

    fn step(&self, x: &[f64], mode: &[Channel], dt: f64) -> Option<Vec<f64>> {
        let mut next = rk4_with(x, dt, |z| self.field(z, mode))?;
        self.project(&mut next, &self.surface_targets(mode));
        Some(next)
    }

    fn surface_targets(&self, mode: &[Channel]) -> Vec<(usize, f64)> {
        mode.iter()
            .enumerate()
            .filter_map(|(i, c)| match *c {
                Channel::Sliding(k) => Some((i, self.sys.psi()[i].breakpoints()[k])),
                Channel::Segment(_) => None,
            })
            .collect()
    }

    /// Least-norm correction onto `{C_i x = b_i}` for the given targets.
    fn project(&self, x: &mut [f64], targets: &[(usize, f64)]) {
        if targets.is_empty() {
            return;
        }
        let rows: Vec<usize> = targets.iter().map(|t| t.0).collect();
        let all: Vec<usize> = (0..self.sys.n()).collect();
        let cs = self.sys.c().select(&rows, &all);
        let Ok(g) = cs.matmul(&cs.transpose()).and_then(|g| inverse(&g)) else {
            return;
        };
        let r: Vec<f64> = targets
            .iter()
            .map(|&(i, b)| dot(self.sys.c().row(i), x) - b)
            .collect();
        let w = g.mul_vec(&r).expect("square");
        let corr = cs.tr_mul_vec(&w).expect("shape");
        for (xi, c) in x.iter_mut().zip(corr) {
            *xi -= c;
        }
    }

    fn segment_gap(&self, j: usize, k: usize, yj: f64) -> f64 {
        let bp = self.sys.psi()[j].breakpoints();
        let lo = if k == 0 { f64::INFINITY } else { yj - bp[k - 1] };
        let hi = bp.get(k).map_or(f64::INFINITY, |b| b - yj);
        lo.min(hi)
    }

    /// True when `x` lies outside the region where `mode` is valid.
    fn violates(&self, x: &[f64], mode: &[Channel]) -> bool {
        let y = self.sys.output(x);
        let Some(u) = self.controls(x, mode) else {
            return true;
        };
        mode.iter().enumerate().any(|(j, ch)| match *ch {
            Channel::Segment(k) => self.segment_gap(j, k, y[j]) < -1e-12 * (1.0 + y[j].abs()),
            Channel::Sliding(k) => {
                let f = &self.sys.psi()[j];
                let set = f.krasovskii(f.breakpoints()[k]).neg();
                set.margin(u[j]) < -FEAS_TOL * (1.0 + set.lo.abs().max(set.hi.abs()))
            }
        })
    }

    /// Channels within `eps_surface` of a breakpoint, with that breakpoint.
    fn near_surfaces(&self, x: &[f64]) -> Vec<(usize, usize)> {
        let y = self.sys.output(x);
        let mut out = Vec::new();
        for (j, f) in self.sys.psi().iter().enumerate() {
            let best = f
                .breakpoints()
                .iter()
                .enumerate()
                .map(|(k, b)| (k, (y[j] - b).abs()))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((k, d)) = best {
                if d <= self.opts.eps_surface {
                    out.push((j, k));
                }
            }
        }
        out
    }

    fn output_rates(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        self.sys.output(&self.sys.flow(x, u))
    }

    /// Picks the mode at `x` given the channels on surfaces.
    ///
    /// Sliding subsets are tried largest first; the rest of the surface
    /// channels cross, trying the preferred side first. A candidate is
    /// valid when every equivalent input lies in its regularized set and
    /// every crossing channel moves into its chosen segment.
    fn select_mode(
        &self,
        x: &[f64],
        surfaces: &[(usize, usize)],
        prefs: &[(usize, i8)],
        t: f64,
    ) -> (Vec<Channel>, SimEvent) {
        let y = self.sys.output(x);
        let mut base: Vec<Channel> = self
            .sys
            .psi()
            .iter()
            .zip(&y)
            .map(|(f, &yj)| Channel::Segment(f.locate(yj).unwrap_or_else(|k| k + 1)))
            .collect();
        let s = surfaces.len();
        let preferred = |j: usize| prefs.iter().find(|p| p.0 == j).map_or(1, |p| p.1);

        let mut masks: Vec<usize> = (0..1usize << s).collect();
        masks.sort_by_key(|m| std::cmp::Reverse(m.count_ones()));

        let mut fallback: Option<(f64, Vec<Channel>)> = None;
        for mask in masks {
            let crossing: Vec<usize> = (0..s).filter(|b| mask >> b & 1 == 0).collect();
            for sides in 0..1usize << crossing.len() {
                let mut mode = base.clone();
                let mut cross_sides = Vec::new();
                for (b, &(j, k)) in surfaces.iter().enumerate() {
                    if mask >> b & 1 == 1 {
                        mode[j] = Channel::Sliding(k);
                    }
                }
                for (c, &b) in crossing.iter().enumerate() {
                    let (j, k) = surfaces[b];
                    let pref = preferred(j);
                    let side = if sides >> c & 1 == 0 { pref } else { -pref };
                    mode[j] = Channel::Segment(if side > 0 { k + 1 } else { k });
                    cross_sides.push((j, side));
                }
                let Some(u) = self.controls(x, &mode) else { continue };
                let ydot = self.output_rates(x, &u);
                let mut violation: f64 = 0.0;
                let mut valid = true;
                for &(j, k) in surfaces {
                    if let Channel::Sliding(_) = mode[j] {
                        let f = &self.sys.psi()[j];
                        let set = f.krasovskii(f.breakpoints()[k]).neg();
                        let m = set.margin(u[j]);
                        if m < -FEAS_TOL * (1.0 + set.lo.abs().max(set.hi.abs())) {
                            valid = false;
                        }
                        violation = violation.max(-m);
                    }
                }
                for &(j, side) in &cross_sides {
                    let r = side as f64 * ydot[j];
                    if r <= 0.0 {
                        valid = false;
                    }
                    violation = violation.max(-r);
                }
                if valid {
                    let event = self.event(t, surfaces, &mode, cross_sides, None);
                    return (mode, event);
                }
                if fallback.as_ref().is_none_or(|f| violation < f.0) {
                    fallback = Some((violation, mode));
                }
            }
        }
        let (violation, mode) = fallback.unwrap_or_else(|| {
            for &(j, k) in surfaces {
                base[j] = Channel::Segment(if preferred(j) > 0 { k + 1 } else { k });
            }
            (f64::INFINITY, base)
        });
        let sides = surfaces
            .iter()
            .filter_map(|&(j, k)| match mode[j] {
                Channel::Segment(seg) => Some((j, if seg > k { 1 } else { -1 })),
                Channel::Sliding(_) => None,
            })
            .collect();
        let event = self.event(t, surfaces, &mode, sides, Some(violation));
        (mode, event)
    }

    fn event(
        &self,
        t: f64,
        surfaces: &[(usize, usize)],
        mode: &[Channel],
        crossing: Vec<(usize, i8)>,
        fallback_violation: Option<f64>,
    ) -> SimEvent {
        SimEvent {
            t,
            on_surface: surfaces.iter().map(|s| s.0).collect(),
            sliding: Self::sliding_set(mode),
            crossing,
            fallback_violation,
        }
    }

    fn numerical(t: f64, x: &[f64], reason: &str) -> Error {
        Error::Numerical {
            t,
            state: x.to_vec(),
            reason: reason.into(),
        }
    }

    fn check_state(&self, t: f64, x: &[f64]) -> Result<()> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Self::numerical(t, x, "non-finite state"));
        }
        if norm(x) > DIVERGENCE_NORM {
            return Err(Self::numerical(t, x, "state diverged"));
        }
        Ok(())
    }

    fn record(&self, traj: &mut Trajectory, t: f64, x: &[f64], mode: &[Channel]) {
        let u = self.controls(x, mode).unwrap_or_else(|| vec![f64::NAN; mode.len()]);
        traj.push(t, x, self.sys.output(x), Self::sliding_set(mode), u);
    }

    /// Channels leaving their segment at `x`, with the breakpoint and side.
    fn crossings(&self, x: &[f64], mode: &[Channel]) -> Vec<(usize, usize, i8)> {
        let y = self.sys.output(x);
        let mut out = Vec::new();
        for (j, ch) in mode.iter().enumerate() {
            if let Channel::Segment(k) = *ch {
                let bp = self.sys.psi()[j].breakpoints();
                if k < bp.len() && y[j] > bp[k] {
                    out.push((j, k, 1));
                } else if k > 0 && y[j] < bp[k - 1] {
                    out.push((j, k - 1, -1));
                }
            }
        }
        out
    }

    fn run(&self, x0: &[f64]) -> Result<Trajectory> {
        self.sys.check_state(x0)?;
        self.opts.validate()?;
        let mut traj = Trajectory::default();
        let mut x = x0.to_vec();
        let mut t = 0.0;
        self.check_state(t, &x)?;

        let surfaces = self.near_surfaces(&x);
        let targets: Vec<(usize, f64)> = surfaces
            .iter()
            .map(|&(j, k)| (j, self.sys.psi()[j].breakpoints()[k]))
            .collect();
        self.project(&mut x, &targets);
        let (mut mode, ev) = self.select_mode(&x, &surfaces, &[], t);
        if !surfaces.is_empty() {
            traj.events.push(ev);
        }
        self.record(&mut traj, t, &x, &mode);

        let mut zero_since: Option<f64> = None;
        let mut stalled = 0usize;
        let time_eps = |t: f64| 4.0 * f64::EPSILON * t.max(1.0);
        while t < self.opts.horizon - time_eps(self.opts.horizon) {
            let dt = self.opts.dt_max.min(self.opts.horizon - t);
            let full = self
                .step(&x, &mode, dt)
                .ok_or_else(|| Self::numerical(t, &x, "singular equivalent control"))?;
            if !self.violates(&full, &mode) {
                x = full;
                t += dt;
                self.check_state(t, &x)?;
                self.record(&mut traj, t, &x, &mode);
                stalled = 0;
            } else {
                let (mut lo, mut hi) = (0.0, dt);
                for _ in 0..MAX_BISECTIONS {
                    if hi - lo <= time_eps(t) {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    match self.step(&x, &mode, mid) {
                        Some(z) if !self.violates(&z, &mode) => lo = mid,
                        _ => hi = mid,
                    }
                }
                let mut xe = self
                    .step(&x, &mode, hi)
                    .ok_or_else(|| Self::numerical(t, &x, "singular equivalent control"))?;
                t += hi;
                self.check_state(t, &xe)?;

                let crossed = self.crossings(&xe, &mode);
                let mut surfaces: Vec<(usize, usize)> = mode
                    .iter()
                    .enumerate()
                    .filter_map(|(j, c)| match *c {
                        Channel::Sliding(k) => Some((j, k)),
                        Channel::Segment(_) => None,
                    })
                    .collect();
                for &(j, k, _) in &crossed {
                    surfaces.push((j, k));
                }
                for s in self.near_surfaces(&xe) {
                    if !surfaces.iter().any(|o| o.0 == s.0) {
                        surfaces.push(s);
                    }
                }
                surfaces.sort_unstable();
                let targets: Vec<(usize, f64)> = surfaces
                    .iter()
                    .map(|&(j, k)| (j, self.sys.psi()[j].breakpoints()[k]))
                    .collect();
                self.project(&mut xe, &targets);
                let prefs: Vec<(usize, i8)> = crossed.iter().map(|&(j, _, s)| (j, s)).collect();
                let (next, ev) = self.select_mode(&xe, &surfaces, &prefs, t);
                traj.events.push(ev);
                mode = next;
                x = xe;
                self.record(&mut traj, t, &x, &mode);

                if hi < self.opts.dt_min {
                    stalled += 1;
                    if stalled > MAX_STALLED_EVENTS {
                        return Err(Self::numerical(t, &x, "stiffness: events without time progress"));
                    }
                } else {
                    stalled = 0;
                }
            }

            if norm(&x) <= self.opts.eps_zero {
                let since = *zero_since.get_or_insert(t);
                if t - since >= self.opts.hold_window {
                    break;
                }
            } else {
                zero_since = None;
            }
        }
        Ok(traj)
    }
}

/// Integrates one Krasovskii solution from `x0`.
pub fn integrate(sys: &LureSystem, x0: &[f64], opts: &SimOptions) -> Result<Trajectory> {
    Sim::new(sys, *opts).run(x0)
}

/// Independent runs from each initial condition.
pub fn simulate_batch(
    sys: &LureSystem,
    x0s: &[Vec<f64>],
    opts: &SimOptions,
    exec: Execution,
) -> Vec<Result<Trajectory>> {
    batch::map(exec, x0s, |x0| integrate(sys, x0, opts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    Output,
    State,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FiniteTime {
    /// Within `ε` on `[t, t + hold]`.
    Converged { t: f64 },
    /// Within `ε` from `t` to the end, but the end comes before `t + hold`.
    Inconclusive { t: f64 },
    NotConverged,
}

impl FiniteTime {
    pub fn time(&self) -> Option<f64> {
        match *self {
            FiniteTime::Converged { t } => Some(t),
            _ => None,
        }
    }
}

/// Earliest sample time after which the projection stays within `eps` for `hold`.
pub fn detect_finite_time(traj: &Trajectory, proj: Projection, eps: f64, hold: f64) -> FiniteTime {
    let Some(&end) = traj.times.last() else {
        return FiniteTime::NotConverged;
    };
    let good: Vec<bool> = (0..traj.len())
        .map(|k| {
            let v = match proj {
                Projection::Output => &traj.outputs[k],
                Projection::State => &traj.states[k],
            };
            norm(v) <= eps
        })
        .collect();
    // next_bad[k]: first index ≥ k outside the threshold
    let mut next_bad = vec![None; traj.len() + 1];
    for k in (0..traj.len()).rev() {
        next_bad[k] = if good[k] { next_bad[k + 1] } else { Some(k) };
    }
    let mut tail = None;
    for k in 0..traj.len() {
        if !good[k] {
            continue;
        }
        let tk = traj.times[k];
        match next_bad[k] {
            Some(b) if traj.times[b] <= tk + hold => continue,
            Some(_) => return FiniteTime::Converged { t: tk },
            None if end - tk >= hold => return FiniteTime::Converged { t: tk },
            None => {
                tail.get_or_insert(tk);
            }
        }
    }
    tail.map_or(FiniteTime::NotConverged, |t| FiniteTime::Inconclusive { t })
}
