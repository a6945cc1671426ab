//! Scalar piecewise continuous nonlinearities.
//!
//! Each open segment between consecutive breakpoints carries a closed-form
//! expression built from terms `coef * s^power * exp(rate * s)`. That grammar
//! covers relays, sign-type maps and exponential friction laws while keeping
//! antiderivatives analytic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `coef * s^power * exp(rate * s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    pub power: u32,
    pub rate: f64,
}

impl Term {
    pub fn new(coef: f64, power: u32, rate: f64) -> Self {
        Self { coef, power, rate }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(c, 0, 0.0)
    }

    pub fn eval(&self, s: f64) -> f64 {
        let mut v = self.coef * s.powi(self.power as i32);
        if self.rate != 0.0 {
            v *= (self.rate * s).exp();
        }
        v
    }

    /// `∫_a^b term(s) ds`.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        if a == b || self.coef == 0.0 {
            return 0.0;
        }
        self.coef * integrate_monomial_exp(self.power, self.rate, a, b)
    }
}

// ∫_a^b s^n e^{r s} ds
fn integrate_monomial_exp(n: u32, r: f64, a: f64, b: f64) -> f64 {
    let span = a.abs().max(b.abs());
    if r == 0.0 {
        let k = (n + 1) as i32;
        return (b.powi(k) - a.powi(k)) / k as f64;
    }
    if n == 0 {
        // e^{ra} (e^{r(b-a)} - 1) / r, stable for small r
        return (r * a).exp() * (r * (b - a)).exp_m1() / r;
    }
    if (r * span).abs() < 0.5 {
        // power series of e^{rs}; converges fast for |r s| < 1/2
        let mut sum = 0.0;
        let mut coef = 1.0; // r^k / k!
        for k in 0..80u32 {
            let e = (n + k + 1) as i32;
            let term = coef * (b.powi(e) - a.powi(e)) / e as f64;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs().max(f64::MIN_POSITIVE) && k > 2 {
                break;
            }
            coef *= r / (k + 1) as f64;
        }
        return sum;
    }
    antiderivative(n, r, b) - antiderivative(n, r, a)
}

// e^{rs} Σ_{k=0}^{n} (-1)^k n!/(n-k)! s^{n-k} / r^{k+1}
fn antiderivative(n: u32, r: f64, s: f64) -> f64 {
    let mut acc = 0.0;
    let mut falling = 1.0; // n!/(n-k)!
    let mut rk = r;
    for k in 0..=n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * falling * s.powi((n - k) as i32) / rk;
        falling *= (n - k) as f64;
        rk *= r;
    }
    (r * s).exp() * acc
}

/// Finite sum of [`Term`]s.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Expr {
    pub terms: Vec<Term>,
}

impl Expr {
    pub fn new(terms: Vec<Term>) -> Self {
        Self { terms }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![Term::constant(c)])
    }

    pub fn linear(slope: f64) -> Self {
        Self::new(vec![Term::new(slope, 1, 0.0)])
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.terms.iter().map(|t| t.eval(s)).sum()
    }

    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        self.terms.iter().map(|t| t.integrate(a, b)).sum()
    }

    pub fn is_finite_at(&self, s: f64) -> bool {
        self.eval(s).is_finite()
    }
}

/// Closed interval `[lo, hi]`, possibly degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::Parameter(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    /// Hull of a nonempty set of values.
    pub fn hull(values: &[f64]) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { lo, hi }
    }

    /// `-[a, b] = [-b, -a]`.
    #[allow(clippy::should_implement_trait)]
    pub fn neg(self) -> Self {
        Self {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }

    /// Signed distance to the boundary: positive inside, negative outside.
    pub fn margin(&self, v: f64) -> f64 {
        (v - self.lo).min(self.hi - v)
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Outcome of a sampled sector check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SectorVerdict {
    Pass,
    /// Worst sampled violation of the sector inequality.
    Fail { y: f64, psi: f64, excess: f64 },
}

impl SectorVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, SectorVerdict::Pass)
    }
}

/// Default sample count of [`PiecewiseFn::check_sector`].
pub const DEFAULT_SECTOR_SAMPLES: usize = 10_000;

/// Scalar piecewise continuous function.
///
/// `segments[k]` is active on the open interval between `breakpoints[k-1]`
/// and `breakpoints[k]` (with unbounded tails at both ends), and
/// `point_values[k]` is the value exactly at `breakpoints[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseFn {
    breakpoints: Vec<f64>,
    segments: Vec<Expr>,
    point_values: Vec<f64>,
}

impl PiecewiseFn {
    /// Builds a function; missing point values default to zero.
    pub fn new(
        breakpoints: Vec<f64>,
        segments: Vec<Expr>,
        point_values: Option<Vec<f64>>,
    ) -> Result<Self> {
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::Parameter("breakpoints must be finite".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if segments.len() != breakpoints.len() + 1 {
            return Err(Error::Dimension(format!(
                "{} breakpoints need {} segments, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                segments.len()
            )));
        }
        let point_values = point_values.unwrap_or_else(|| vec![0.0; breakpoints.len()]);
        if point_values.len() != breakpoints.len() {
            return Err(Error::Dimension(format!(
                "{} breakpoints need {} point values, got {}",
                breakpoints.len(),
                breakpoints.len(),
                point_values.len()
            )));
        }
        for (k, &b) in breakpoints.iter().enumerate() {
            if !segments[k].is_finite_at(b) || !segments[k + 1].is_finite_at(b) {
                return Err(Error::Parameter(format!(
                    "one-sided limit at breakpoint {b} is not finite"
                )));
            }
        }
        Ok(Self {
            breakpoints,
            segments,
            point_values,
        })
    }

    /// Continuous function given by one expression.
    pub fn smooth(expr: Expr) -> Self {
        Self {
            breakpoints: Vec::new(),
            segments: vec![expr],
            point_values: Vec::new(),
        }
    }

    pub fn linear(slope: f64) -> Self {
        Self::smooth(Expr::linear(slope))
    }

    pub fn zero() -> Self {
        Self::smooth(Expr::default())
    }

    /// `neg` for `s < 0`, `pos` for `s > 0`, zero at the origin.
    pub fn relay(neg: f64, pos: f64) -> Self {
        Self {
            breakpoints: vec![0.0],
            segments: vec![Expr::constant(neg), Expr::constant(pos)],
            point_values: vec![0.0],
        }
    }

    pub fn sign() -> Self {
        Self::relay(-1.0, 1.0)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[Expr] {
        &self.segments
    }

    pub fn point_values(&self) -> &[f64] {
        &self.point_values
    }

    /// Index of the segment containing `s`, or `Err(k)` when `s` is breakpoint `k`.
    pub fn locate(&self, s: f64) -> std::result::Result<usize, usize> {
        match self.breakpoints.binary_search_by(|b| b.total_cmp(&s)) {
            Ok(k) => Err(k),
            Err(k) => Ok(k),
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self.locate(s) {
            Ok(seg) => self.segments[seg].eval(s),
            Err(k) => self.point_values[k],
        }
    }

    /// Value of segment `seg`'s expression, extended past its interval.
    pub fn eval_segment(&self, seg: usize, s: f64) -> f64 {
        self.segments[seg].eval(s)
    }

    pub fn one_sided_limits(&self, s: f64) -> (f64, f64) {
        match self.locate(s) {
            Ok(seg) => {
                let v = self.segments[seg].eval(s);
                (v, v)
            }
            Err(k) => (self.segments[k].eval(s), self.segments[k + 1].eval(s)),
        }
    }

    /// Krasovskii regularization: the closed convex hull of nearby values.
    pub fn krasovskii(&self, s: f64) -> Interval {
        match self.locate(s) {
            Ok(seg) => Interval::point(self.segments[seg].eval(s)),
            Err(k) => {
                let (l, r) = (self.segments[k].eval(s), self.segments[k + 1].eval(s));
                Interval::hull(&[l, r, self.point_values[k]])
            }
        }
    }

    /// `∫_0^y f(σ) dσ`, integrated segment by segment in closed form.
    pub fn integral(&self, y: f64) -> f64 {
        if y == 0.0 {
            return 0.0;
        }
        let (a, b, sign) = if y > 0.0 { (0.0, y, 1.0) } else { (y, 0.0, -1.0) };
        let mut total = 0.0;
        let mut left = a;
        let first = match self.locate(a) {
            Ok(seg) => seg,
            Err(k) => k + 1,
        };
        for seg in first..self.segments.len() {
            let right = self.breakpoints.get(seg).copied().unwrap_or(f64::INFINITY).min(b);
            if right > left {
                total += self.segments[seg].integrate(left, right);
            }
            left = right;
            if left >= b {
                break;
            }
        }
        sign * total
    }

    /// True iff the right limit at 0 is positive and the left limit is negative.
    pub fn discontinuous_at_origin(&self) -> bool {
        let (left, right) = self.one_sided_limits(0.0);
        right > 0.0 && left < 0.0
    }

    /// Sampled check of `ψ(y)(ψ(y) − ζ y) ≤ 0` over `range`; `ζ = ∞` checks `−ψ(y) y ≤ 0`.
    ///
    /// Samples a uniform grid, every breakpoint inside the range, and both
    /// one-sided limits at those breakpoints. This is sampled verification,
    /// not a proof.
    pub fn check_sector(&self, zeta: f64, range: Interval, samples: usize) -> SectorVerdict {
        let samples = samples.max(2);
        let mut worst: Option<(f64, f64, f64)> = None;
        let mut probe = |y: f64, psi: f64| {
            let (lhs, scale) = if zeta.is_infinite() {
                (-psi * y, 1.0 + (psi * y).abs())
            } else {
                (psi * (psi - zeta * y), 1.0 + psi * psi + (zeta * psi * y).abs())
            };
            if lhs > 1e-12 * scale && worst.is_none_or(|(_, _, e)| lhs > e) {
                worst = Some((y, psi, lhs));
            }
        };
        let step = range.width() / (samples - 1) as f64;
        for i in 0..samples {
            let y = if i + 1 == samples { range.hi } else { range.lo + step * i as f64 };
            probe(y, self.eval(y));
        }
        for (k, &b) in self.breakpoints.iter().enumerate() {
            if range.contains(b, 0.0) {
                probe(b, self.point_values[k]);
                let (l, r) = self.one_sided_limits(b);
                probe(b, l);
                probe(b, r);
            }
        }
        match worst {
            None => SectorVerdict::Pass,
            Some((y, psi, excess)) => SectorVerdict::Fail { y, psi, excess },
        }
    }

    /// Sampled monotonicity check over `range`, including jumps at breakpoints.
    pub fn is_nondecreasing(&self, range: Interval, samples: usize) -> bool {
        let samples = samples.max(2);
        let mut pts: Vec<f64> = (0..samples)
            .map(|i| range.lo + range.width() * i as f64 / (samples - 1) as f64)
            .collect();
        pts.extend(self.breakpoints.iter().copied().filter(|b| range.contains(*b, 0.0)));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut values = Vec::with_capacity(pts.len() * 3);
        for &s in &pts {
            match self.locate(s) {
                Ok(_) => values.push(self.eval(s)),
                Err(k) => {
                    let (l, r) = self.one_sided_limits(s);
                    values.extend([l, self.point_values[k], r]);
                }
            }
        }
        values.windows(2).all(|w| w[1] >= w[0] - 1e-12 * (1.0 + w[0].abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example1() -> PiecewiseFn {
        PiecewiseFn::relay(-0.25, 1.0)
    }

    #[test]
    fn eval_relay_and_sign() {
        let f = example1();
        assert_eq!(f.eval(2.0), 1.0);
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(-1.0), -0.25);
        assert_eq!(PiecewiseFn::sign().eval(-3.0), -1.0);
    }

    #[test]
    fn limits_and_regularization() {
        let f = example1();
        assert_eq!(f.one_sided_limits(0.0), (-0.25, 1.0));
        assert_eq!(f.one_sided_limits(0.7), (1.0, 1.0));
        assert_eq!(PiecewiseFn::sign().one_sided_limits(0.0), (-1.0, 1.0));
        assert_eq!(f.krasovskii(0.0), Interval::new(-0.25, 1.0).unwrap());
        assert_eq!(PiecewiseFn::sign().krasovskii(0.0), Interval::new(-1.0, 1.0).unwrap());
        assert_eq!(f.krasovskii(0.5), Interval::point(1.0));
    }

    #[test]
    fn point_value_outside_limits_widens_the_hull() {
        let f = PiecewiseFn::new(
            vec![0.0],
            vec![Expr::constant(-1.0), Expr::constant(1.0)],
            Some(vec![3.0]),
        )
        .unwrap();
        assert_eq!(f.krasovskii(0.0), Interval::new(-1.0, 3.0).unwrap());
    }

    #[test]
    fn sector_checks() {
        let range = Interval::new(-10.0, 10.0).unwrap();
        assert!(example1().check_sector(f64::INFINITY, range, 1000).passed());
        match PiecewiseFn::linear(-1.0).check_sector(f64::INFINITY, Interval::new(0.0, 1.0).unwrap(), 11) {
            SectorVerdict::Fail { y, psi, .. } => {
                assert_eq!(y, 1.0);
                assert_eq!(psi, -1.0);
            }
            SectorVerdict::Pass => panic!("-s violates the sector"),
        }
        assert!(PiecewiseFn::linear(1.0).check_sector(1.0, range, 1000).passed());
        assert!(!PiecewiseFn::linear(2.0).check_sector(1.0, range, 1000).passed());
        assert!(PiecewiseFn::linear(0.5).check_sector(1.0, range, 1000).passed());
    }

    #[test]
    fn sector_check_sees_one_sided_limits() {
        // wrong-signed jump only visible through the left limit at 1
        let f = PiecewiseFn::new(
            vec![1.0],
            vec![Expr::linear(1.0), Expr::constant(2.0)],
            Some(vec![1.0]),
        )
        .unwrap();
        assert!(f.check_sector(f64::INFINITY, Interval::new(-2.0, 2.0).unwrap(), 5).passed());
        assert!(!f.check_sector(1.5, Interval::new(0.9, 1.0).unwrap(), 2).passed());
    }

    #[test]
    fn integrals_of_constant_pieces() {
        let f = example1();
        assert_eq!(f.integral(1.0), 1.0);
        assert_eq!(f.integral(-1.0), 0.25);
        assert_eq!(PiecewiseFn::sign().integral(-2.0), 2.0);
        assert_eq!(f.integral(0.0), 0.0);
    }

    #[test]
    fn integral_across_several_breakpoints() {
        let f = PiecewiseFn::new(
            vec![-1.0, 2.0],
            vec![Expr::constant(3.0), Expr::linear(1.0), Expr::constant(-1.0)],
            None,
        )
        .unwrap();
        // ∫_0^3 = ∫_0^2 s ds + ∫_2^3 (-1) = 2 - 1
        assert!((f.integral(3.0) - 1.0).abs() < 1e-15);
        // ∫_0^{-2} = -(∫_{-2}^{-1} 3 + ∫_{-1}^0 s) = -(3 - 0.5)
        assert!((f.integral(-2.0) + 2.5).abs() < 1e-15);
    }

    #[test]
    fn exponential_terms_integrate_in_closed_form() {
        let t = Term::new(1.5, 2, -0.7);
        // d/ds of the antiderivative must reproduce the integrand
        let h = 1e-5;
        for s in [-2.0, 0.3, 4.0] {
            let d = (t.integrate(0.0, s + h) - t.integrate(0.0, s - h)) / (2.0 * h);
            assert!((d - t.eval(s)).abs() < 1e-7, "{d} vs {}", t.eval(s));
        }
        // small rate falls back to the power series
        let small = Term::new(1.0, 1, 1e-9);
        assert!((small.integrate(0.0, 2.0) - 2.0).abs() < 1e-8);
        let zero_power = Term::new(2.0, 0, 0.05);
        let exact = 2.0 * ((0.05f64 * 3.0).exp() - 1.0) / 0.05;
        assert!((zero_power.integrate(0.0, 3.0) - exact).abs() < 1e-13);
    }

    #[test]
    fn discontinuity_at_origin() {
        assert!(PiecewiseFn::sign().discontinuous_at_origin());
        assert!(!PiecewiseFn::linear(1.0).discontinuous_at_origin());
        assert!(example1().discontinuous_at_origin());
        assert!(!PiecewiseFn::relay(0.0, 1.0).discontinuous_at_origin());
    }

    #[test]
    fn construction_errors() {
        assert!(PiecewiseFn::new(vec![1.0, 0.0], vec![Expr::default(); 3], None).is_err());
        assert!(PiecewiseFn::new(vec![0.0], vec![Expr::default()], None).is_err());
        assert!(PiecewiseFn::new(vec![0.0], vec![Expr::default(); 2], Some(vec![])).is_err());
        assert!(Interval::new(1.0, 0.0).is_err());
    }

    #[test]
    fn monotonicity() {
        let r = Interval::new(-3.0, 3.0).unwrap();
        assert!(PiecewiseFn::sign().is_nondecreasing(r, 100));
        assert!(!PiecewiseFn::relay(1.0, -1.0).is_nondecreasing(r, 100));
        assert!(!PiecewiseFn::linear(-1.0).is_nondecreasing(r, 100));
    }

    #[test]
    fn interval_negation_swaps_endpoints() {
        let i = Interval::new(-0.25, 1.0).unwrap().neg();
        assert_eq!((i.lo, i.hi), (-1.0, 0.25));
        assert_eq!(i.margin(0.0), 0.25);
        assert!(i.margin(0.5) < 0.0);
    }
}
