//! System model: perturbed vector fields `h(x, eps) = h0 + eps h1 + eps^2 h*`,
//! smooth maps evaluated in dual arithmetic, and compact polytope regions.

mod map;
mod polytope;

pub use map::{central_difference_jacobian, jacobian, SmoothMap, SmoothMatMap};
pub use polytope::{Membership, Polytope, PolytopeError};

use crate::dual::Dual;
use nalgebra::DVector;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Second-order remainder term `h*(x, eps)`, evaluated in dual arithmetic in
/// `x`; `eps` enters as a plain parameter.
pub type EpsMap = Arc<dyn Fn(&[Dual], f64, &mut [Dual]) + Send + Sync>;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("state dimension {got} does not match system dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("component {index} of {term} is not finite at the evaluation point")]
    NonFinite { term: &'static str, index: usize },
    #[error("eps = {0} is negative")]
    NegativeEps(f64),
}

/// Autonomous system `x' = h(x, eps) = h0(x) + eps h1(x) + eps^2 h*(x, eps)`.
///
/// `h0` carries the fast part (its zero set contains the slow manifold), `h1`
/// the leading slow part. `hstar` is `None` when the eps dependence is at most
/// linear, which holds for every built-in example.
pub struct PerturbedSystem {
    pub name: String,
    pub dim: usize,
    pub h0: SmoothMap,
    pub h1: SmoothMap,
    pub hstar: Option<EpsMap>,
    /// Named parameter values the system was built with.
    pub params: BTreeMap<String, f64>,
    /// Largest eps for which the model and its region claims are intended.
    pub eps_max: f64,
}

impl PerturbedSystem {
    /// Evaluates `h(x, eps)`. At `eps = 0` this returns `h0(x)` exactly
    /// (no arithmetic with the other terms is performed).
    pub fn eval_h(&self, x: &[f64], eps: f64) -> Result<DVector<f64>, ModelError> {
        if x.len() != self.dim {
            return Err(ModelError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let h0 = self.h0.eval(x);
        check_finite(&h0, "h0")?;
        if eps == 0.0 {
            return Ok(h0);
        }
        let h1 = self.h1.eval(x);
        check_finite(&h1, "h1")?;
        let mut h = h0 + eps * h1;
        if let Some(hs) = &self.hstar {
            let xd: Vec<Dual> = x.iter().map(|&v| Dual::constant(v)).collect();
            let mut out = vec![Dual::constant(0.0); self.dim];
            hs(&xd, eps, &mut out);
            for (i, o) in out.iter().enumerate() {
                if !o.re.is_finite() {
                    return Err(ModelError::NonFinite { term: "hstar", index: i });
                }
                h[i] += eps * eps * o.re;
            }
        }
        check_finite(&h, "h")?;
        Ok(h)
    }

    /// Evaluates `h(x, eps)` in dual arithmetic (for Jacobians of the
    /// combined field). `hstar` contributes with eps as a constant factor.
    pub fn eval_h_dual(&self, x: &[Dual], eps: f64, out: &mut [Dual]) {
        let mut tmp = vec![Dual::constant(0.0); self.dim];
        self.h0.eval_dual(x, out);
        if eps == 0.0 {
            return;
        }
        self.h1.eval_dual(x, &mut tmp);
        for i in 0..self.dim {
            out[i] = &out[i] + &(&tmp[i] * eps);
        }
        if let Some(hs) = &self.hstar {
            hs(x, eps, &mut tmp);
            for i in 0..self.dim {
                out[i] = &out[i] + &(&tmp[i] * (eps * eps));
            }
        }
    }

    /// Jacobian `D_x h(x, eps)` via one dual-number pass.
    pub fn jacobian_h(&self, x: &[f64], eps: f64) -> nalgebra::DMatrix<f64> {
        let n = self.dim;
        let xd: Vec<Dual> = x.iter().enumerate().map(|(i, &v)| Dual::variable(v, i, n)).collect();
        let mut out = vec![Dual::constant(0.0); n];
        self.eval_h_dual(&xd, eps, &mut out);
        let mut j = nalgebra::DMatrix::zeros(n, n);
        for (r, o) in out.iter().enumerate() {
            for c in 0..n {
                j[(r, c)] = o.deriv(c);
            }
        }
        j
    }
}

/// Stepwise construction of a `PerturbedSystem`. `h0` and `h1` are
/// mandatory; everything else has defaults (`hstar` zero, `eps_max` 0.1).
pub struct SystemBuilder {
    name: String,
    dim: usize,
    h0: Option<SmoothMap>,
    h1: Option<SmoothMap>,
    hstar: Option<EpsMap>,
    params: BTreeMap<String, f64>,
    eps_max: f64,
}

impl SystemBuilder {
    pub fn new(name: &str, dim: usize) -> Self {
        SystemBuilder {
            name: name.into(),
            dim,
            h0: None,
            h1: None,
            hstar: None,
            params: BTreeMap::new(),
            eps_max: 0.1,
        }
    }

    pub fn h0(mut self, f: impl Fn(&[Dual], &mut [Dual]) + Send + Sync + 'static) -> Self {
        self.h0 = Some(SmoothMap::new(self.dim, self.dim, f));
        self
    }

    pub fn h1(mut self, f: impl Fn(&[Dual], &mut [Dual]) + Send + Sync + 'static) -> Self {
        self.h1 = Some(SmoothMap::new(self.dim, self.dim, f));
        self
    }

    pub fn hstar(mut self, f: impl Fn(&[Dual], f64, &mut [Dual]) + Send + Sync + 'static) -> Self {
        self.hstar = Some(Arc::new(f));
        self
    }

    pub fn param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.into(), value);
        self
    }

    pub fn eps_max(mut self, v: f64) -> Self {
        self.eps_max = v;
        self
    }

    pub fn build(self) -> PerturbedSystem {
        PerturbedSystem {
            name: self.name,
            dim: self.dim,
            h0: self.h0.expect("h0 must be set"),
            h1: self.h1.expect("h1 must be set"),
            hstar: self.hstar,
            params: self.params,
            eps_max: self.eps_max,
        }
    }
}

fn check_finite(v: &DVector<f64>, term: &'static str) -> Result<(), ModelError> {
    for (i, &c) in v.iter().enumerate() {
        if !c.is_finite() {
            return Err(ModelError::NonFinite { term, index: i });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::Dual;

    /// h0 = (0, -x2), h1 = (-x1, 0): the decoupled linear slow-fast model.
    fn linear_toy() -> PerturbedSystem {
        PerturbedSystem {
            name: "linear_toy".into(),
            dim: 2,
            h0: SmoothMap::new(2, 2, |x, out| {
                out[0] = Dual::constant(0.0);
                out[1] = -&x[1];
            }),
            h1: SmoothMap::new(2, 2, |x, out| {
                out[0] = -&x[0];
                out[1] = Dual::constant(0.0);
            }),
            hstar: None,
            params: BTreeMap::new(),
            eps_max: 0.5,
        }
    }

    #[test]
    fn toy_field_values() {
        let sys = linear_toy();
        let h = sys.eval_h(&[1.0, 2.0], 0.0).unwrap();
        assert_eq!(h.as_slice(), &[0.0, -2.0]);
        let h = sys.eval_h(&[1.0, 2.0], 0.5).unwrap();
        assert_eq!(h.as_slice(), &[-0.5, -2.0]);
    }

    #[test]
    fn eval_at_zero_eps_is_h0_exactly() {
        let sys = linear_toy();
        for &x in &[[0.3, -0.7], [1e-8, 5.0], [2.0, 0.0]] {
            let h = sys.eval_h(&x, 0.0).unwrap();
            let h0 = sys.h0.eval(&x);
            assert_eq!(h, h0);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let sys = linear_toy();
        assert!(matches!(
            sys.eval_h(&[1.0], 0.1),
            Err(ModelError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn non_finite_component_is_named() {
        let sys = PerturbedSystem {
            name: "bad".into(),
            dim: 1,
            h0: SmoothMap::new(1, 1, |x, out| out[0] = 1.0 / &x[0]),
            h1: SmoothMap::new(1, 1, |_, out| out[0] = Dual::constant(0.0)),
            hstar: None,
            params: BTreeMap::new(),
            eps_max: 1.0,
        };
        match sys.eval_h(&[0.0], 0.0) {
            Err(ModelError::NonFinite { term: "h0", index: 0 }) => {}
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn combined_jacobian_matches_parts() {
        let sys = linear_toy();
        let j = sys.jacobian_h(&[0.4, 0.8], 0.25);
        assert_eq!(j[(0, 0)], -0.25);
        assert_eq!(j[(0, 1)], 0.0);
        assert_eq!(j[(1, 0)], 0.0);
        assert_eq!(j[(1, 1)], -1.0);
    }
}
