//! Second-order forward-mode differentiation.
//!
//! Each node evaluates to a [`Dual2`] carrying the value, the gradient and
//! the (dense, symmetric) Hessian with respect to the active variables. A
//! unary map `f(u)` propagates as
//!
//! ```text
//! grad = f'(u) * grad u
//! hess = f'(u) * hess u + f''(u) * (grad u)(grad u)^T
//! ```
//!
//! Only the upper triangle is computed; the lower triangle is mirrored, so
//! the Hessian is exactly symmetric.

use nalgebra::DMatrix;

use super::{domain, subexpression, BinOp, EvalError, Func, Node};

#[derive(Debug, Clone, PartialEq)]
pub struct Dual2 {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major `m x m`.
    hessian: Vec<f64>,
}

impl Dual2 {
    pub fn constant(value: f64, m: usize) -> Self {
        Dual2 {
            value,
            gradient: vec![0.0; m],
            hessian: vec![0.0; m * m],
        }
    }

    pub fn variable(value: f64, slot: usize, m: usize) -> Self {
        let mut d = Dual2::constant(value, m);
        d.gradient[slot] = 1.0;
        d
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.hessian[i * self.dim() + j]
    }

    pub fn hessian(&self) -> DMatrix<f64> {
        let m = self.dim();
        DMatrix::from_row_slice(m, m, &self.hessian)
    }

    fn mirror(&mut self) {
        let m = self.dim();
        for i in 0..m {
            for j in 0..i {
                self.hessian[i * m + j] = self.hessian[j * m + i];
            }
        }
    }

    /// `f(self)` given `f(u)`, `f'(u)`, `f''(u)`.
    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Dual2 {
        let m = self.dim();
        let g = &self.gradient;
        let mut out = Dual2 {
            value: f0,
            gradient: g.iter().map(|gi| f1 * gi).collect(),
            hessian: vec![0.0; m * m],
        };
        for i in 0..m {
            for j in i..m {
                out.hessian[i * m + j] = f1 * self.hessian[i * m + j] + f2 * g[i] * g[j];
            }
        }
        out.mirror();
        out
    }

    fn add(&self, other: &Dual2, sign: f64) -> Dual2 {
        Dual2 {
            value: self.value + sign * other.value,
            gradient: self
                .gradient
                .iter()
                .zip(&other.gradient)
                .map(|(a, b)| a + sign * b)
                .collect(),
            hessian: self
                .hessian
                .iter()
                .zip(&other.hessian)
                .map(|(a, b)| a + sign * b)
                .collect(),
        }
    }

    fn mul(&self, other: &Dual2) -> Dual2 {
        let m = self.dim();
        let (a, b) = (self, other);
        let mut out = Dual2 {
            value: a.value * b.value,
            gradient: a
                .gradient
                .iter()
                .zip(&b.gradient)
                .map(|(ga, gb)| a.value * gb + b.value * ga)
                .collect(),
            hessian: vec![0.0; m * m],
        };
        for i in 0..m {
            for j in i..m {
                let k = i * m + j;
                out.hessian[k] = a.value * b.hessian[k]
                    + b.value * a.hessian[k]
                    + a.gradient[i] * b.gradient[j]
                    + b.gradient[i] * a.gradient[j];
            }
        }
        out.mirror();
        out
    }

    fn neg(&self) -> Dual2 {
        Dual2 {
            value: -self.value,
            gradient: self.gradient.iter().map(|g| -g).collect(),
            hessian: self.hessian.iter().map(|h| -h).collect(),
        }
    }

    fn powi(&self, n: i32) -> Dual2 {
        let m = self.dim();
        match n {
            0 => Dual2::constant(1.0, m),
            1 => self.clone(),
            _ => {
                let u = self.value;
                let nf = n as f64;
                self.chain(u.powi(n), nf * u.powi(n - 1), nf * (nf - 1.0) * u.powi(n - 2))
            }
        }
    }
}

pub(crate) fn eval_node(
    node: &Node,
    x: &[f64],
    slot: &[Option<usize>],
    m: usize,
    names: &[String],
) -> Result<Dual2, EvalError> {
    let eval = |n: &Node| eval_node(n, x, slot, m, names);
    let out = match node {
        Node::Const(c) => Dual2::constant(*c, m),
        Node::Var(i) => match slot[*i] {
            Some(k) => Dual2::variable(x[*i], k, m),
            None => Dual2::constant(x[*i], m),
        },
        Node::Neg(a) => eval(a)?.neg(),
        Node::Binary(op, a, b) => {
            let (a, b) = (eval(a)?, eval(b)?);
            match op {
                BinOp::Add => a.add(&b, 1.0),
                BinOp::Sub => a.add(&b, -1.0),
                BinOp::Mul => a.mul(&b),
                BinOp::Div => {
                    let d = b.value;
                    if d == 0.0 {
                        return Err(domain("division", d, node, names));
                    }
                    let mut q = a.mul(&b.chain(1.0 / d, -1.0 / (d * d), 2.0 / (d * d * d)));
                    q.value = a.value / d;
                    q
                }
            }
        }
        Node::PowInt(a, n) => {
            let a = eval(a)?;
            if a.value == 0.0 && *n < 0 {
                return Err(domain("negative power", a.value, node, names));
            }
            a.powi(*n)
        }
        Node::Pow(a, b) => {
            let (a, b) = (eval(a)?, eval(b)?);
            if a.value <= 0.0 {
                return Err(domain("real power", a.value, node, names));
            }
            let u = a.value;
            let ln_a = a.chain(u.ln(), 1.0 / u, -1.0 / (u * u));
            let t = b.mul(&ln_a);
            let et = t.value.exp();
            let mut out = t.chain(et, et, et);
            out.value = u.powf(b.value);
            out
        }
        Node::Call(f, a) => {
            let a = eval(a)?;
            let u = a.value;
            match f {
                Func::Sin => a.chain(u.sin(), u.cos(), -u.sin()),
                Func::Cos => a.chain(u.cos(), -u.sin(), -u.cos()),
                Func::Tan => {
                    let t = u.tan();
                    let sec2 = 1.0 + t * t;
                    a.chain(t, sec2, 2.0 * t * sec2)
                }
                Func::Exp => {
                    let ex = u.exp();
                    a.chain(ex, ex, ex)
                }
                Func::Ln => {
                    if u <= 0.0 {
                        return Err(domain("ln", u, node, names));
                    }
                    a.chain(u.ln(), 1.0 / u, -1.0 / (u * u))
                }
                Func::Sqrt => {
                    // derivatives blow up at 0, so the closed domain of eval is not enough here
                    if u <= 0.0 {
                        return Err(domain("sqrt", u, node, names));
                    }
                    let s = u.sqrt();
                    a.chain(s, 0.5 / s, -0.25 / (u * s))
                }
            }
        }
    };
    if !out.value.is_finite()
        || out.gradient.iter().any(|g| !g.is_finite())
        || out.hessian.iter().any(|h| !h.is_finite())
    {
        return Err(EvalError::NonFinite {
            subexpression: subexpression(node, names),
        });
    }
    Ok(out)
}
