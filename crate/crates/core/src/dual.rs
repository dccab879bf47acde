//! Forward-mode dual scalars carrying a value and seeded directional
//! derivatives. Seeding the i-th coordinate with the unit vector e_i and
//! evaluating a map once yields the full Jacobian row by row; an empty seed
//! vector represents a constant and propagates no derivatives.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Value plus directional sensitivities. `eps` is either empty (constant) or
/// has the common seed width of the evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub eps: Vec<f64>,
}

impl Dual {
    /// Constant: value only, no sensitivities.
    pub fn constant(v: f64) -> Self {
        Dual { re: v, eps: Vec::new() }
    }

    /// Variable seeded as coordinate `i` out of `n`.
    pub fn variable(v: f64, i: usize, n: usize) -> Self {
        let mut eps = vec![0.0; n];
        eps[i] = 1.0;
        Dual { re: v, eps }
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.eps.iter().all(|d| d.is_finite())
    }

    /// Derivative with respect to seed `i`, zero if unseeded.
    pub fn deriv(&self, i: usize) -> f64 {
        self.eps.get(i).copied().unwrap_or(0.0)
    }

    pub fn sqrt(&self) -> Dual {
        let r = self.re.sqrt();
        let scale = 0.5 / r;
        Dual { re: r, eps: self.eps.iter().map(|d| d * scale).collect() }
    }

    pub fn exp(&self) -> Dual {
        let r = self.re.exp();
        Dual { re: r, eps: self.eps.iter().map(|d| d * r).collect() }
    }

    pub fn powi(&self, n: i32) -> Dual {
        let r = self.re.powi(n);
        let scale = f64::from(n) * self.re.powi(n - 1);
        Dual { re: r, eps: self.eps.iter().map(|d| d * scale).collect() }
    }
}

fn zip(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => Vec::new(),
        (false, true) => a.iter().map(|&x| f(x, 0.0)).collect(),
        (true, false) => b.iter().map(|&y| f(0.0, y)).collect(),
        (false, false) => {
            debug_assert_eq!(a.len(), b.len(), "mismatched dual seed widths");
            a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
        }
    }
}

impl Add for &Dual {
    type Output = Dual;
    fn add(self, rhs: &Dual) -> Dual {
        Dual { re: self.re + rhs.re, eps: zip(&self.eps, &rhs.eps, |x, y| x + y) }
    }
}

impl Sub for &Dual {
    type Output = Dual;
    fn sub(self, rhs: &Dual) -> Dual {
        Dual { re: self.re - rhs.re, eps: zip(&self.eps, &rhs.eps, |x, y| x - y) }
    }
}

impl Mul for &Dual {
    type Output = Dual;
    fn mul(self, rhs: &Dual) -> Dual {
        Dual {
            re: self.re * rhs.re,
            eps: zip(&self.eps, &rhs.eps, |x, y| x * rhs.re + self.re * y),
        }
    }
}

impl Div for &Dual {
    type Output = Dual;
    fn div(self, rhs: &Dual) -> Dual {
        let inv = 1.0 / rhs.re;
        Dual {
            re: self.re * inv,
            eps: zip(&self.eps, &rhs.eps, |x, y| (x - self.re * inv * y) * inv),
        }
    }
}

impl Neg for &Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual { re: -self.re, eps: self.eps.iter().map(|d| -d).collect() }
    }
}

// Owned and mixed-ownership forms delegate to the reference implementations.
macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<Dual> for Dual {
            type Output = Dual;
            fn $method(self, rhs: Dual) -> Dual {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Dual> for Dual {
            type Output = Dual;
            fn $method(self, rhs: &Dual) -> Dual {
                (&self).$method(rhs)
            }
        }
        impl $trait<Dual> for &Dual {
            type Output = Dual;
            fn $method(self, rhs: Dual) -> Dual {
                self.$method(&rhs)
            }
        }
        impl $trait<f64> for &Dual {
            type Output = Dual;
            fn $method(self, rhs: f64) -> Dual {
                self.$method(&Dual::constant(rhs))
            }
        }
        impl $trait<f64> for Dual {
            type Output = Dual;
            fn $method(self, rhs: f64) -> Dual {
                (&self).$method(&Dual::constant(rhs))
            }
        }
        impl $trait<&Dual> for f64 {
            type Output = Dual;
            fn $method(self, rhs: &Dual) -> Dual {
                (&Dual::constant(self)).$method(rhs)
            }
        }
        impl $trait<Dual> for f64 {
            type Output = Dual;
            fn $method(self, rhs: Dual) -> Dual {
                (&Dual::constant(self)).$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        -&self
    }
}
