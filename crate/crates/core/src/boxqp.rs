//! Exact maximization of a quadratic over a box by face enumeration.

use crate::densemat::{dot, solve, Matrix};
use crate::error::{Error, Result};
use crate::luresys::IntervalBox;

/// Largest box dimension accepted by the enumerators (3^12 faces).
pub const MAX_BOX_DIM: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxQpMax {
    pub value: f64,
    pub argmax: Vec<f64>,
}

#[derive(Clone, Copy)]
enum Face {
    Lo,
    Hi,
    Free,
}

pub(crate) fn check_box_dim(dim: usize) -> Result<()> {
    if dim > MAX_BOX_DIM {
        return Err(Error::Size(format!(
            "box dimension {dim} exceeds the enumeration limit {MAX_BOX_DIM}"
        )));
    }
    Ok(())
}

pub fn quad_value(q: &Matrix, b: &[f64], c0: f64, u: &[f64]) -> f64 {
    let qu = q.mul_vec(u).expect("dimensions checked by caller");
    dot(u, &qu) + dot(b, u) + c0
}

/// Maximizes `uᵀQu + bᵀu + c0` over `bx`.
///
/// Every face of the box is visited: coordinates are pinned to a bound or
/// left free, and the stationary point of the restriction is kept when it
/// lies inside the box. Faces whose restricted Hessian is singular are
/// skipped; their maximum is then attained on a lower-dimensional face.
pub fn box_quad_max(q: &Matrix, b: &[f64], c0: f64, bx: &IntervalBox) -> Result<BoxQpMax> {
    let p = bx.dim();
    if q.shape() != (p, p) || b.len() != p {
        return Err(Error::Dimension(format!(
            "box QP with Q {:?}, b of length {}, box of dimension {p}",
            q.shape(),
            b.len()
        )));
    }
    check_box_dim(p)?;
    let q = &q.sym_sum()?.scale(0.5);
    let free = bx.free_coords();
    let k = free.len();
    let scale = bx.0.iter().fold(1.0_f64, |m, i| m.max(i.lo.abs()).max(i.hi.abs()));
    let tol = 1e-12 * scale;

    let mut best: Option<BoxQpMax> = None;
    let mut faces = vec![Face::Lo; k];
    let total = 3usize.pow(k as u32);
    let mut u = bx.lower();
    for code in 0..total {
        let mut c = code;
        for f in faces.iter_mut() {
            *f = match c % 3 {
                0 => Face::Lo,
                1 => Face::Hi,
                _ => Face::Free,
            };
            c /= 3;
        }
        let fset: Vec<usize> = free
            .iter()
            .zip(&faces)
            .filter(|(_, f)| matches!(f, Face::Free))
            .map(|(&i, _)| i)
            .collect();
        for (&i, f) in free.iter().zip(&faces) {
            match f {
                Face::Lo => u[i] = bx[i].lo,
                Face::Hi => u[i] = bx[i].hi,
                Face::Free => u[i] = 0.0,
            }
        }
        if !fset.is_empty() {
            // 2 Q_FF u_F = -(b_F + 2 Q_F· u) with u_F = 0 in the product
            let qu = q.mul_vec(&u).expect("square Q");
            let qs = q.select(&fset, &fset).scale(2.0);
            let rhs: Vec<f64> = fset.iter().map(|&i| -(b[i] + 2.0 * qu[i])).collect();
            let Ok(sol) = solve(&qs, &rhs) else { continue };
            if fset
                .iter()
                .zip(&sol)
                .any(|(&i, &v)| !v.is_finite() || !bx[i].contains(v, tol))
            {
                continue;
            }
            for (&i, &v) in fset.iter().zip(&sol) {
                u[i] = bx[i].clamp(v);
            }
        }
        let value = quad_value(q, b, c0, &u);
        if best.as_ref().is_none_or(|m| value > m.value) {
            best = Some(BoxQpMax {
                value,
                argmax: u.clone(),
            });
        }
    }
    Ok(best.expect("the all-lower vertex is always a candidate"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pwfun::Interval;

    fn bx(bounds: &[(f64, f64)]) -> IntervalBox {
        IntervalBox(bounds.iter().map(|&(a, b)| Interval::new(a, b).unwrap()).collect())
    }

    #[test]
    fn concave_interior() {
        let r = box_quad_max(&Matrix::from_diag(&[-1.0]), &[0.0], 0.0, &bx(&[(-2.0, 3.0)])).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.argmax, vec![0.0]);
    }

    #[test]
    fn convex_vertex() {
        let r = box_quad_max(&Matrix::from_diag(&[1.0]), &[0.0], 0.0, &bx(&[(-2.0, 3.0)])).unwrap();
        assert_eq!(r.value, 9.0);
        assert_eq!(r.argmax, vec![3.0]);
    }

    #[test]
    fn degenerate_coordinates_stay_fixed() {
        let q = Matrix::from_diag(&[-1.0, -1.0]);
        let r = box_quad_max(&q, &[0.0, 0.0], 1.0, &bx(&[(0.5, 0.5), (-1.0, 1.0)])).unwrap();
        assert_eq!(r.argmax, vec![0.5, 0.0]);
        assert!((r.value - 0.75).abs() < 1e-15);
    }

    #[test]
    fn singular_hessian_handled_by_faces() {
        // linear objective: Q = 0
        let r = box_quad_max(&Matrix::zeros(2, 2), &[1.0, -2.0], 0.0, &bx(&[(-1.0, 1.0), (-1.0, 1.0)]))
            .unwrap();
        assert_eq!(r.value, 3.0);
        assert_eq!(r.argmax, vec![1.0, -1.0]);
    }

    #[test]
    fn oversized_box_rejected() {
        let p = MAX_BOX_DIM + 1;
        let b = bx(&vec![(0.0, 1.0); p]);
        let r = box_quad_max(&Matrix::zeros(p, p), &vec![0.0; p], 0.0, &b);
        assert!(matches!(r, Err(Error::Size(_))));
    }
}
