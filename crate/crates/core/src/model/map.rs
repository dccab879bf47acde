//! Smooth vector- and matrix-valued maps stored as dual-arithmetic closures.
//! One evaluation with coordinate seeds yields value and Jacobian together.

use crate::dual::Dual;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

type DualFn = Arc<dyn Fn(&[Dual], &mut [Dual]) + Send + Sync>;

/// A C^2 map R^n -> R^m written in dual arithmetic.
#[derive(Clone)]
pub struct SmoothMap {
    pub dim_in: usize,
    pub dim_out: usize,
    f: DualFn,
}

impl std::fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SmoothMap(R^{} -> R^{})", self.dim_in, self.dim_out)
    }
}

impl SmoothMap {
    pub fn new(
        dim_in: usize,
        dim_out: usize,
        f: impl Fn(&[Dual], &mut [Dual]) + Send + Sync + 'static,
    ) -> Self {
        SmoothMap { dim_in, dim_out, f: Arc::new(f) }
    }

    /// Map with constant value `v`.
    pub fn constant(dim_in: usize, v: DVector<f64>) -> Self {
        let dim_out = v.len();
        SmoothMap::new(dim_in, dim_out, move |_, out| {
            for (o, &c) in out.iter_mut().zip(v.iter()) {
                *o = Dual::constant(c);
            }
        })
    }

    pub fn eval_dual(&self, x: &[Dual], out: &mut [Dual]) {
        debug_assert_eq!(x.len(), self.dim_in);
        debug_assert_eq!(out.len(), self.dim_out);
        (self.f)(x, out);
    }

    pub fn eval(&self, x: &[f64]) -> DVector<f64> {
        assert_eq!(x.len(), self.dim_in, "input dimension mismatch");
        let xd: Vec<Dual> = x.iter().map(|&v| Dual::constant(v)).collect();
        let mut out = vec![Dual::constant(0.0); self.dim_out];
        (self.f)(&xd, &mut out);
        DVector::from_iterator(self.dim_out, out.iter().map(|d| d.re))
    }

    /// Jacobian via one forward pass, coordinate `i` seeded with `e_i`.
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        self.eval_with_jacobian(x).1
    }

    pub fn eval_with_jacobian(&self, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        assert_eq!(x.len(), self.dim_in, "input dimension mismatch");
        let n = self.dim_in;
        let xd: Vec<Dual> =
            x.iter().enumerate().map(|(i, &v)| Dual::variable(v, i, n)).collect();
        let mut out = vec![Dual::constant(0.0); self.dim_out];
        (self.f)(&xd, &mut out);
        let val = DVector::from_iterator(self.dim_out, out.iter().map(|d| d.re));
        let mut j = DMatrix::zeros(self.dim_out, n);
        for (r, o) in out.iter().enumerate() {
            for c in 0..n {
                j[(r, c)] = o.deriv(c);
            }
        }
        (val, j)
    }
}

/// Jacobian of `map` at `x` via dual-number forward evaluation.
pub fn jacobian(map: &SmoothMap, x: &[f64]) -> DMatrix<f64> {
    map.jacobian(x)
}

/// Central-difference Jacobian, used as an independent cross-check of the
/// dual-number route and for fields without dual closures.
pub fn central_difference_jacobian(
    f: &dyn Fn(&[f64]) -> DVector<f64>,
    x: &[f64],
    step: f64,
) -> DMatrix<f64> {
    let n = x.len();
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    let f0 = f(x);
    let m = f0.len();
    let mut j = DMatrix::zeros(m, n);
    for c in 0..n {
        let h = step * (1.0 + x[c].abs());
        xp[c] = x[c] + h;
        xm[c] = x[c] - h;
        let fp = f(&xp);
        let fm = f(&xm);
        for r in 0..m {
            j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
        xp[c] = x[c];
        xm[c] = x[c];
    }
    j
}

/// A matrix-valued map R^n -> R^{rows x cols}; the closure fills the output
/// buffer in column-major order.
#[derive(Clone)]
pub struct SmoothMatMap {
    pub dim_in: usize,
    pub rows: usize,
    pub cols: usize,
    f: DualFn,
}

impl SmoothMatMap {
    pub fn new(
        dim_in: usize,
        rows: usize,
        cols: usize,
        f: impl Fn(&[Dual], &mut [Dual]) + Send + Sync + 'static,
    ) -> Self {
        SmoothMatMap { dim_in, rows, cols, f: Arc::new(f) }
    }

    /// Constant matrix (the structural-decomposition case).
    pub fn from_constant(dim_in: usize, m: DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        SmoothMatMap::new(dim_in, rows, cols, move |_, out| {
            for (o, &c) in out.iter_mut().zip(m.iter()) {
                *o = Dual::constant(c);
            }
        })
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        assert_eq!(x.len(), self.dim_in, "input dimension mismatch");
        let xd: Vec<Dual> = x.iter().map(|&v| Dual::constant(v)).collect();
        let mut out = vec![Dual::constant(0.0); self.rows * self.cols];
        (self.f)(&xd, &mut out);
        DMatrix::from_iterator(self.rows, self.cols, out.iter().map(|d| d.re))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rational_map() -> SmoothMap {
        // f(x) = ((x0^2 x1 - x1)/(1 + x0^2), x0 x1)
        SmoothMap::new(2, 2, |x, out| {
            let x0 = &x[0];
            let x1 = &x[1];
            out[0] = &(&(&(x0 * x0) * x1) - x1) / &(x0 * x0 + 1.0);
            out[1] = x0 * x1;
        })
    }

    #[test]
    fn linear_map_jacobian_is_exact() {
        let m = SmoothMap::new(2, 2, |x, out| {
            out[0] = &(&x[0] * 2.0) + &(&x[1] * 3.0);
            out[1] = &x[0] - &x[1];
        });
        let j = m.jacobian(&[0.7, -0.3]);
        assert_eq!(j[(0, 0)], 2.0);
        assert_eq!(j[(0, 1)], 3.0);
        assert_eq!(j[(1, 0)], 1.0);
        assert_eq!(j[(1, 1)], -1.0);
    }

    #[test]
    fn dual_jacobian_matches_central_differences() {
        let m = rational_map();
        for &x in &[[0.3, 0.9], [1.2, -0.4], [0.0, 2.0]] {
            let jd = m.jacobian(&x);
            let jf = central_difference_jacobian(&|p| m.eval(p), &x, 1e-6);
            for r in 0..2 {
                for c in 0..2 {
                    assert!(
                        (jd[(r, c)] - jf[(r, c)]).abs() <= 1e-8 * (1.0 + jd[(r, c)].abs()),
                        "entry ({r},{c}): dual {} vs fd {}",
                        jd[(r, c)],
                        jf[(r, c)]
                    );
                }
            }
        }
    }

    #[test]
    fn matrix_map_column_major_fill() {
        let m = SmoothMatMap::new(1, 2, 2, |x, out| {
            out[0] = x[0].clone(); // (0,0)
            out[1] = Dual::constant(2.0); // (1,0)
            out[2] = Dual::constant(3.0); // (0,1)
            out[3] = &x[0] * &x[0]; // (1,1)
        });
        let a = m.eval(&[5.0]);
        assert_eq!(a[(0, 0)], 5.0);
        assert_eq!(a[(1, 0)], 2.0);
        assert_eq!(a[(0, 1)], 3.0);
        assert_eq!(a[(1, 1)], 25.0);
    }
}
