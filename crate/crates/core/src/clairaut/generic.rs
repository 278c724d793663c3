//! Transform of a free-standing function `F(x)` with no passive parameters.

use super::{MixedHamiltonian, SolveError};
use crate::expr::{EvalError, Expression};
use crate::linalg::dot;
use crate::partition::{partition_with, HessianPartition, PartitionError, PartitionSettings};
use crate::system::{DomainBox, LagrangianSystem, SystemError};

#[derive(Debug, thiserror::Error)]
pub enum TransformError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Member `p . c - F(c)` of the general solution family.
pub fn general_solution(f: &Expression, p: &[f64], c: &[f64]) -> Result<f64, SolveError> {
    let dim = f.variables().len();
    super::check_len("p", p, dim)?;
    super::check_len("c", c, dim)?;
    Ok(dot(p, c) - f.eval(c).map_err(SolveError::from)?)
}

/// Mixed envelope solution `G(p1, p2, c2) = p1 . X + p2 . c2 - F(X, c2)` of
/// a function over a box.
#[derive(Debug, Clone)]
pub struct GenericTransform {
    inner: MixedHamiltonian,
}

impl GenericTransform {
    pub fn new(n: usize, source: &str, domain: DomainBox) -> Result<Self, TransformError> {
        Self::with_settings(n, source, domain, PartitionSettings::default())
    }

    pub fn with_settings(
        n: usize,
        source: &str,
        domain: DomainBox,
        settings: PartitionSettings,
    ) -> Result<Self, TransformError> {
        let system = LagrangianSystem::function(n, source, domain)?;
        let partition = partition_with(&system, settings)?;
        Ok(GenericTransform {
            inner: MixedHamiltonian::new(system, partition),
        })
    }

    pub fn partition(&self) -> &HessianPartition {
        self.inner.partition()
    }

    pub fn mixed(&self) -> &MixedHamiltonian {
        &self.inner
    }

    pub fn eval(&self, p: &[f64], c2: &[f64]) -> Result<f64, SolveError> {
        self.inner.mixed_hamiltonian(&[], p, c2)
    }

    /// Regular block `X(p1, c2)` of the stationary point.
    pub fn stationary_point(&self, p1: &[f64], c2: &[f64]) -> Result<Vec<f64>, SolveError> {
        self.inner.solve_envelope(&[], p1, c2)
    }

    pub fn general_solution(&self, p: &[f64], c: &[f64]) -> Result<f64, SolveError> {
        general_solution(self.inner.system().lagrangian(), p, c)
    }
}

/// One-shot `G(p, c2)` for `F` over `domain`.
pub fn generic_transform(
    n: usize,
    source: &str,
    domain: DomainBox,
    p: &[f64],
    c2: &[f64],
) -> Result<f64, TransformError> {
    Ok(GenericTransform::new(n, source, domain)?.eval(p, c2)?)
}

impl From<EvalError> for TransformError {
    fn from(e: EvalError) -> Self {
        TransformError::Solve(e.into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::function_variables;

    fn unit(n: usize) -> DomainBox {
        DomainBox::uniform(n, -1.0, 1.0).unwrap()
    }

    #[test]
    fn general_solution_examples() {
        let f = Expression::parse("0.5*x1^2", &function_variables(1)).unwrap();
        assert_eq!(general_solution(&f, &[2.0], &[3.0]).unwrap(), 1.5);
        let f = Expression::parse("sin(x1)*x2", &function_variables(2)).unwrap();
        assert_eq!(general_solution(&f, &[4.0, -1.0], &[0.0, 0.0]).unwrap(), 0.0);
        let f = Expression::parse("0.5*(x1+x2)^2", &function_variables(2)).unwrap();
        assert_eq!(general_solution(&f, &[1.0, 2.0], &[1.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn generic_examples() {
        assert!((generic_transform(1, "0.5*x1^2", unit(1), &[3.0], &[]).unwrap() - 4.5).abs() < 1e-12);

        let g = GenericTransform::new(2, "0.5*(x1+x2)^2", unit(2)).unwrap();
        assert_eq!(g.partition().nonregular, vec![1]);
        for (p1, p2, c) in [(1.0, 2.0, 0.3), (-0.5, 4.0, -1.0)] {
            let want = 0.5 * p1 * p1 + c * (p2 - p1);
            assert!((g.eval(&[p1, p2], &[c]).unwrap() - want).abs() < 1e-12);
        }

        let dom = DomainBox::uniform(1, -2.0, 2.0).unwrap();
        let g = GenericTransform::new(1, "exp(x1)", dom).unwrap();
        assert!((g.eval(&[1.0], &[]).unwrap() + 1.0).abs() < 1e-12);
        assert!(g.stationary_point(&[1.0], &[]).unwrap()[0].abs() < 1e-12);
    }

    #[test]
    fn rank_change_is_rejected() {
        let err = GenericTransform::new(1, "x1^3", unit(1)).unwrap_err();
        assert!(matches!(
            err,
            TransformError::Partition(PartitionError::RankNotConstant { .. })
        ));
    }
}
