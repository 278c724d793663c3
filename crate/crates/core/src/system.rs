//! Lagrangian systems and their sampling domains.

use rand::Rng;
use serde::Serialize;

use crate::expr::{function_variables, lagrangian_variables, Dual2, EvalError, Expression, ParseError};

#[derive(Debug, thiserror::Error)]
pub enum SystemError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("domain axis `{axis}` is empty or not finite: [{lo}, {hi}]")]
    InvalidDomain { axis: String, lo: f64, hi: f64 },
    #[error("domain has {found} axes, expected {expected}")]
    DomainDimension { expected: usize, found: usize },
    #[error("dimension must be positive")]
    ZeroDimension,
}

/// Closed axis-aligned box, one interval per variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(intervals: &[(f64, f64)]) -> Result<Self, SystemError> {
        for (i, &(lo, hi)) in intervals.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(SystemError::InvalidDomain {
                    axis: format!("#{i}"),
                    lo,
                    hi,
                });
            }
        }
        Ok(DomainBox {
            lo: intervals.iter().map(|i| i.0).collect(),
            hi: intervals.iter().map(|i| i.1).collect(),
        })
    }

    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self, SystemError> {
        DomainBox::new(&vec![(lo, hi); dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lo
    }

    pub fn upper(&self) -> &[f64] {
        &self.hi
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (lo, hi))| lo <= x && x <= hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&lo, &hi)| rng.gen_range(lo..=hi))
            .collect()
    }

    /// Restriction to the axes `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> DomainBox {
        DomainBox {
            lo: self.lo[range.clone()].to_vec(),
            hi: self.hi[range].to_vec(),
        }
    }
}

/// A scalar function of passive parameters `q` and active variables `v`.
///
/// For a Lagrangian the variable table is `q1..qn, v1..vn` and both blocks
/// have length `n`. A free-standing function `F(x1..xn)` has an empty
/// passive block; everything downstream treats it as a Lagrangian without
/// coordinates.
#[derive(Debug, Clone)]
pub struct LagrangianSystem {
    n: usize,
    q_dim: usize,
    lagrangian: Expression,
    domain: DomainBox,
}

impl LagrangianSystem {
    /// Lagrangian `L(q, v)`; `domain` lists the `q` axes then the `v` axes.
    pub fn new(n: usize, source: &str, domain: DomainBox) -> Result<Self, SystemError> {
        if n == 0 {
            return Err(SystemError::ZeroDimension);
        }
        let lagrangian = Expression::parse(source, &lagrangian_variables(n))?;
        Self::assemble(n, n, lagrangian, domain)
    }

    /// Function `F(x)` with no passive parameters.
    pub fn function(n: usize, source: &str, domain: DomainBox) -> Result<Self, SystemError> {
        if n == 0 {
            return Err(SystemError::ZeroDimension);
        }
        let lagrangian = Expression::parse(source, &function_variables(n))?;
        Self::assemble(n, 0, lagrangian, domain)
    }

    fn assemble(
        n: usize,
        q_dim: usize,
        lagrangian: Expression,
        domain: DomainBox,
    ) -> Result<Self, SystemError> {
        if domain.dim() != q_dim + n {
            return Err(SystemError::DomainDimension {
                expected: q_dim + n,
                found: domain.dim(),
            });
        }
        Ok(LagrangianSystem {
            n,
            q_dim,
            lagrangian,
            domain,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Length of the passive block: `n` for Lagrangians, `0` for functions.
    pub fn q_dim(&self) -> usize {
        self.q_dim
    }

    pub fn is_lagrangian(&self) -> bool {
        self.q_dim == self.n
    }

    pub fn lagrangian(&self) -> &Expression {
        &self.lagrangian
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn q_domain(&self) -> DomainBox {
        self.domain.slice(0..self.q_dim)
    }

    pub fn v_domain(&self) -> DomainBox {
        self.domain.slice(self.q_dim..self.q_dim + self.n)
    }

    /// Positions of the active variables in the expression's variable table.
    pub fn velocity_slots(&self) -> Vec<usize> {
        (self.q_dim..self.q_dim + self.n).collect()
    }

    pub fn all_slots(&self) -> Vec<usize> {
        (0..self.q_dim + self.n).collect()
    }

    pub fn point(&self, q: &[f64], v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(q.len(), self.q_dim);
        debug_assert_eq!(v.len(), self.n);
        q.iter().chain(v).copied().collect()
    }

    pub fn eval(&self, q: &[f64], v: &[f64]) -> Result<f64, EvalError> {
        self.lagrangian.eval(&self.point(q, v))
    }

    /// Derivatives with respect to the velocities only.
    pub fn velocity_dual(&self, q: &[f64], v: &[f64]) -> Result<Dual2, EvalError> {
        self.lagrangian
            .eval_dual2(&self.point(q, v), &self.velocity_slots())
    }

    /// Derivatives with respect to `(q, v)` in table order.
    pub fn full_dual(&self, q: &[f64], v: &[f64]) -> Result<Dual2, EvalError> {
        self.lagrangian.eval_dual2(&self.point(q, v), &self.all_slots())
    }

    pub fn variable_name(&self, slot: usize) -> &str {
        &self.lagrangian.variables()[slot]
    }

    /// Name of the `i`-th active variable, `v{i+1}` or `x{i+1}`.
    pub fn velocity_name(&self, i: usize) -> &str {
        self.variable_name(self.q_dim + i)
    }
}
