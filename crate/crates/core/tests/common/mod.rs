//! Independent oracles shared by the integration suites.

#![allow(dead_code)]

use lurekit::pwfun::{Expr, PiecewiseFn, Term};
use lurekit::Matrix;
use rand::Rng;

/// `uᵀQu + bᵀu + c0` computed from raw rows.
pub fn quad(q: &[Vec<f64>], b: &[f64], c0: f64, u: &[f64]) -> f64 {
    let mut v = c0;
    for i in 0..u.len() {
        v += b[i] * u[i];
        for j in 0..u.len() {
            v += u[i] * q[i][j] * u[j];
        }
    }
    v
}

fn grid_points(lo: &[f64], hi: &[f64], per_dim: usize) -> Vec<Vec<f64>> {
    let mut pts = vec![Vec::new()];
    for d in 0..lo.len() {
        let mut next = Vec::with_capacity(pts.len() * per_dim);
        for p in &pts {
            for k in 0..per_dim {
                let t = if per_dim == 1 { 0.5 } else { k as f64 / (per_dim - 1) as f64 };
                let mut q = p.clone();
                q.push(lo[d] + t * (hi[d] - lo[d]));
                next.push(q);
            }
        }
        pts = next;
    }
    pts
}

/// Grid search with successive zooming around the best candidates.
/// Always a feasible lower bound of the true maximum.
pub fn grid_box_max(q: &[Vec<f64>], b: &[f64], c0: f64, lo: &[f64], hi: &[f64]) -> f64 {
    let p = lo.len();
    let per_dim = match p {
        1 => 201,
        2 => 61,
        _ => 25,
    };
    let mut cands: Vec<(f64, Vec<f64>)> = grid_points(lo, hi, per_dim)
        .into_iter()
        .map(|u| (quad(q, b, c0, &u), u))
        .collect();
    let mut step: Vec<f64> = (0..p).map(|d| (hi[d] - lo[d]) / (per_dim - 1) as f64).collect();
    for _ in 0..30 {
        cands.sort_by(|a, b| b.0.total_cmp(&a.0));
        cands.truncate(4);
        let mut next = cands.clone();
        for (_, c) in &cands {
            let l: Vec<f64> = (0..p).map(|d| (c[d] - step[d]).max(lo[d])).collect();
            let h: Vec<f64> = (0..p).map(|d| (c[d] + step[d]).min(hi[d])).collect();
            for u in grid_points(&l, &h, 9) {
                next.push((quad(q, b, c0, &u), u));
            }
        }
        cands = next;
        for s in &mut step {
            *s /= 4.0;
        }
    }
    cands.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max)
}

pub fn to_matrix(rows: &[Vec<f64>]) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adapt(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adapt(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of a smooth integrand on `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adapt(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Raw description of a random piecewise function.
#[derive(Debug, Clone)]
pub struct RawPiecewise {
    pub breakpoints: Vec<f64>,
    /// `(coef, power, rate)` per term, per segment.
    pub segments: Vec<Vec<(f64, u32, f64)>>,
}

impl RawPiecewise {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let nb = rng.gen_range(0..4);
        let mut breakpoints: Vec<f64> = (0..nb).map(|_| rng.gen_range(-2.5..2.5)).collect();
        if rng.gen_bool(0.5) {
            breakpoints.push(0.0);
        }
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        let segments = (0..=breakpoints.len())
            .map(|_| {
                (0..rng.gen_range(1..4))
                    .map(|_| {
                        let rate = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(-1.5..1.5) };
                        (rng.gen_range(-2.0..2.0), rng.gen_range(0..3u32), rate)
                    })
                    .collect()
            })
            .collect();
        Self { breakpoints, segments }
    }

    pub fn build(&self) -> PiecewiseFn {
        let segs = self
            .segments
            .iter()
            .map(|ts| Expr::new(ts.iter().map(|&(c, p, r)| Term::new(c, p, r)).collect()))
            .collect();
        PiecewiseFn::new(self.breakpoints.clone(), segs, None).unwrap()
    }

    pub fn eval_segment(&self, k: usize, s: f64) -> f64 {
        self.segments[k]
            .iter()
            .map(|&(c, p, r)| c * s.powi(p as i32) * (r * s).exp())
            .sum()
    }

    /// `∫₀^y` by adaptive Simpson on each smooth piece.
    pub fn integral_oracle(&self, y: f64, tol: f64) -> f64 {
        let (a, b, sign) = if y >= 0.0 { (0.0, y, 1.0) } else { (y, 0.0, -1.0) };
        let mut cuts = vec![a];
        cuts.extend(self.breakpoints.iter().copied().filter(|&t| t > a && t < b));
        cuts.push(b);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let k = self.breakpoints.iter().filter(|&&t| t < mid).count();
            total += adaptive_simpson(&|s| self.eval_segment(k, s), w[0], w[1], tol);
        }
        sign * total
    }
}
