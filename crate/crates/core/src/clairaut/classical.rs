//! Classical Legendre transform of a regular Lagrangian, kept separate from
//! the mixed machinery so the two can be checked against each other.

use nalgebra::DVector;

use super::SolveError;
use crate::system::LagrangianSystem;

/// `H(q, p) = p . v - L(q, v)` with `p = dL/dv (q, v)` solved by undamped
/// Newton on all velocities from `v0`.
pub fn classical_hamiltonian(
    sys: &LagrangianSystem,
    q: &[f64],
    p: &[f64],
    v0: &[f64],
) -> Result<f64, SolveError> {
    let n = sys.n();
    super::check_len("q", q, sys.q_dim())?;
    super::check_len("p", p, n)?;
    super::check_len("v0", v0, n)?;
    let p = DVector::from_column_slice(p);
    let mut v = DVector::from_column_slice(v0);
    let mut history = Vec::new();
    for _ in 0..100 {
        let d = sys.velocity_dual(q, v.as_slice())?;
        let r = &p - DVector::from_column_slice(&d.gradient);
        let norm = r.amax();
        history.push(norm);
        if norm <= 1e-13 * (1.0 + p.amax()) {
            return Ok(p.dot(&v) - d.value);
        }
        let step = d.hessian().lu().solve(&r).ok_or_else(|| SolveError::SingularJacobian {
            iterate: v.as_slice().to_vec(),
            sigma_min: 0.0,
            scale: 0.0,
        })?;
        v += step;
    }
    Err(SolveError::NewtonDiverged {
        residual_history: history,
        iterate: v.as_slice().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::DomainBox;

    #[test]
    fn free_particle_and_saddle() {
        let d = DomainBox::uniform(2, -1.0, 1.0).unwrap();
        let sys = LagrangianSystem::new(1, "0.5*v1^2 - 0.5*q1^2", d).unwrap();
        let h = classical_hamiltonian(&sys, &[0.5], &[2.0], &[0.0]).unwrap();
        assert!((h - (2.0 + 0.125)).abs() < 1e-14);

        let d = DomainBox::uniform(4, -1.0, 1.0).unwrap();
        let sys = LagrangianSystem::new(2, "v1*v2", d).unwrap();
        let h = classical_hamiltonian(&sys, &[0.0, 0.0], &[3.0, -2.0], &[0.0, 0.0]).unwrap();
        assert!((h + 6.0).abs() < 1e-13);
    }
}
