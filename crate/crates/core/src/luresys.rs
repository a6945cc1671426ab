//! Lur'e plant `ẋ = Ax + Bu, y = Cx, u = −ψ(y)` and its Krasovskii
//! regularization `ẋ ∈ Ax − BΨ(Cx)`.

use serde::Serialize;

use crate::densemat::Matrix;
use crate::error::{Error, Result};
use crate::pwfun::{Interval, PiecewiseFn, SectorVerdict};

/// Product of closed intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalBox(pub Vec<Interval>);

impl IntervalBox {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|i| i.neg()).collect())
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        v.len() == self.0.len() && self.0.iter().zip(v).all(|(i, &x)| i.contains(x, tol))
    }

    /// Indices of coordinates with a nondegenerate interval.
    pub fn free_coords(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| !self.0[i].is_degenerate()).collect()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.0.iter().map(|i| i.lo).collect()
    }

    /// All vertices (2^k for k nondegenerate coordinates).
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let free = self.free_coords();
        let base = self.lower();
        (0..1usize << free.len())
            .map(|mask| {
                let mut v = base.clone();
                for (bit, &i) in free.iter().enumerate() {
                    if mask >> bit & 1 == 1 {
                        v[i] = self.0[i].hi;
                    }
                }
                v
            })
            .collect()
    }
}

impl std::ops::Index<usize> for IntervalBox {
    type Output = Interval;

    fn index(&self, i: usize) -> &Interval {
        &self.0[i]
    }
}

/// Lur'e system with decentralized nonlinearities `ψ_i` and sector slopes `ζ_i ∈ (0, ∞]`.
#[derive(Debug, Clone)]
pub struct LureSystem {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    psi: Vec<PiecewiseFn>,
    zeta: Vec<f64>,
}

/// `F(x) = drift + gain · input_box`.
#[derive(Debug, Clone)]
pub struct InclusionValue {
    pub drift: Vec<f64>,
    pub input_box: IntervalBox,
    pub gain: Matrix,
}

/// Matrices of the multiplier loop transformation.
#[derive(Debug, Clone)]
pub struct LoopTransform {
    pub gamma: Vec<f64>,
    pub z: Matrix,
    pub cbar: Matrix,
    pub dbar: Matrix,
}

impl LureSystem {
    pub fn new(
        a: Matrix,
        b: Matrix,
        c: Matrix,
        psi: Vec<PiecewiseFn>,
        zeta: Vec<f64>,
    ) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() {
            return Err(Error::Dimension(format!("A must be square, got {:?}", a.shape())));
        }
        if b.rows() != n {
            return Err(Error::Dimension(format!("B has {} rows, expected {n}", b.rows())));
        }
        let p = b.cols();
        if c.shape() != (p, n) {
            return Err(Error::Dimension(format!(
                "C is {:?}, expected ({p}, {n})",
                c.shape()
            )));
        }
        if psi.len() != p {
            return Err(Error::Dimension(format!(
                "{} nonlinearities for {p} channels",
                psi.len()
            )));
        }
        if zeta.len() != p {
            return Err(Error::Dimension(format!("{} sector slopes for {p} channels", zeta.len())));
        }
        if let Some(z) = zeta.iter().find(|z| z.is_nan() || **z <= 0.0) {
            return Err(Error::Parameter(format!("sector slope {z} must lie in (0, inf]")));
        }
        Ok(Self { a, b, c, psi, zeta })
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn p(&self) -> usize {
        self.b.cols()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn psi(&self) -> &[PiecewiseFn] {
        &self.psi
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn output(&self, x: &[f64]) -> Vec<f64> {
        self.c.mul_vec(x).expect("state dimension checked by caller")
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        self.a.mul_vec(x).expect("state dimension checked by caller")
    }

    /// `Ψ(Cx)`, the regularized feedback values.
    pub fn feedback_box(&self, x: &[f64]) -> IntervalBox {
        let y = self.output(x);
        IntervalBox(self.psi.iter().zip(&y).map(|(f, &yi)| f.krasovskii(yi)).collect())
    }

    pub fn inclusion_at(&self, x: &[f64]) -> Result<InclusionValue> {
        self.check_state(x)?;
        Ok(InclusionValue {
            drift: self.drift(x),
            input_box: self.feedback_box(x).neg(),
            gain: self.b.clone(),
        })
    }

    /// `Ax + Bu`.
    pub fn flow(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut f = self.drift(x);
        let bu = self.b.mul_vec(u).expect("input dimension checked by caller");
        for (fi, v) in f.iter_mut().zip(bu) {
            *fi += v;
        }
        f
    }

    /// `Z = diag(1/ζ_i)` with `1/∞ = 0`.
    pub fn z_matrix(&self) -> Matrix {
        Matrix::from_diag(&self.zeta.iter().map(|z| 1.0 / z).collect::<Vec<_>>())
    }

    pub fn cb(&self) -> Matrix {
        self.c.matmul(&self.b).expect("shapes checked at construction")
    }

    pub fn ca(&self) -> Matrix {
        self.c.matmul(&self.a).expect("shapes checked at construction")
    }

    pub fn loop_transform(&self, gamma: &[f64]) -> Result<LoopTransform> {
        check_positive_diag(gamma, self.p(), "Gamma")?;
        let z = self.z_matrix();
        let cbar = self.c.add(&self.ca().scale_rows(gamma)?)?;
        let dbar = self.cb().scale_rows(gamma)?.add(&z)?;
        Ok(LoopTransform {
            gamma: gamma.to_vec(),
            z,
            cbar,
            dbar,
        })
    }

    /// Sampled sector check of every channel over `range`.
    pub fn check_sectors(&self, range: Interval, samples: usize) -> Vec<SectorVerdict> {
        self.psi
            .iter()
            .zip(&self.zeta)
            .map(|(f, &z)| f.check_sector(z, range, samples))
            .collect()
    }

    pub fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::Dimension(format!(
                "state has {} entries, system has n = {}",
                x.len(),
                self.n()
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_positive_diag(d: &[f64], len: usize, name: &str) -> Result<()> {
    if d.len() != len {
        return Err(Error::Dimension(format!("{name} has {} entries, expected {len}", d.len())));
    }
    if let Some(v) = d.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Parameter(format!("{name} entries must be positive, got {v}")));
    }
    Ok(())
}
