use nalgebra::DMatrix;

use super::{check_len, ham::ham_rhs, rk4, time_grid, DynamicsError, GaugeChoice, Trajectory};
use crate::clairaut::{MixedHamiltonian, SolveError};
use crate::linalg::{norm_inf, pick, sigma_max, solve, submatrix};

/// Euler-Lagrange right-hand side at `(q, v1)` with `v2 = C2(q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElRhs {
    pub accel1: Vec<f64>,
    /// `W21 a1 + W22 dv2/dt - K2`, monitored but not solved.
    pub i2_residual: Vec<f64>,
    /// Full velocity `(v1, C2(q))` in original order.
    pub v: Vec<f64>,
    pub v2dot: Vec<f64>,
    /// `dL/dv` at `(q, v)`.
    pub momentum: Vec<f64>,
}

pub fn el_rhs(h: &MixedHamiltonian, gauge: &GaugeChoice, q: &[f64], v1: &[f64]) -> Result<ElRhs, DynamicsError> {
    let sys = h.system();
    let part = h.partition();
    let n = sys.n();
    if !sys.is_lagrangian() {
        return Err(DynamicsError::NotLagrangian);
    }
    gauge.check(n, n - part.k)?;
    check_len("q", q, n)?;
    check_len("v1", v1, part.k)?;

    let (c2, jac) = gauge.jet(q)?;
    let v = part.merge(v1, &c2);
    let d = sys.full_dual(q, &v)?;
    let full = d.hessian();
    let w = full.view((n, n), (n, n)).clone_owned();
    // K_i = dL/dq_i - sum_j v_j d2L/dv_i dq_j
    let k: Vec<f64> = (0..n)
        .map(|i| d.gradient[i] - (0..n).map(|j| v[j] * full[(n + i, j)]).sum::<f64>())
        .collect();
    let v2dot: Vec<f64> = (jac * nalgebra::DVector::from_column_slice(&v)).iter().copied().collect();

    let reg = &part.regular;
    let non = &part.nonregular;
    let w12 = submatrix(&w, reg, non);
    let rhs1: Vec<f64> = reg
        .iter()
        .enumerate()
        .map(|(a, &i)| k[i] - (0..non.len()).map(|b| w12[(a, b)] * v2dot[b]).sum::<f64>())
        .collect();
    let accel1 = solve(&part.w11(&w), &rhs1).ok_or_else(|| SolveError::SingularJacobian {
        iterate: v.clone(),
        sigma_min: 0.0,
        scale: sigma_max(&w),
    })?;
    let w21 = submatrix(&w, non, reg);
    let w22: DMatrix<f64> = submatrix(&w, non, non);
    let i2_residual = non
        .iter()
        .enumerate()
        .map(|(a, &i)| {
            let row1: f64 = (0..reg.len()).map(|b| w21[(a, b)] * accel1[b]).sum();
            let row2: f64 = (0..non.len()).map(|b| w22[(a, b)] * v2dot[b]).sum();
            row1 + row2 - k[i]
        })
        .collect();
    Ok(ElRhs {
        accel1,
        i2_residual,
        momentum: d.gradient[n..].to_vec(),
        v,
        v2dot,
    })
}

/// RK4 on `(q, v1)` from `t0` to `t1`.
pub fn integrate_el(
    h: &MixedHamiltonian,
    gauge: &GaugeChoice,
    q0: &[f64],
    v10: &[f64],
    t_span: (f64, f64),
    dt: f64,
) -> Result<Trajectory, DynamicsError> {
    let part = h.partition();
    let n = h.system().n();
    let k = part.k;
    let grid = time_grid(t_span.0, t_span.1, dt)?;
    el_rhs(h, gauge, q0, v10)?;

    let mut traj = Trajectory::new(n, part.regular.clone(), grid.len());
    let y0: Vec<f64> = q0.iter().chain(v10).copied().collect();
    rk4(
        &grid,
        y0,
        |y| {
            let r = el_rhs(h, gauge, &y[..n], &y[n..])?;
            Ok(r.v.into_iter().chain(r.accel1).collect())
        },
        |t, y| {
            let (q, v1) = (&y[..n], &y[n..n + k]);
            let r = el_rhs(h, gauge, q, v1)?;
            let p1 = pick(&r.momentum, &part.regular);
            let p2 = pick(&r.momentum, &part.nonregular);
            let phi = h.phi(q, &r.momentum)?;
            let psi = h.psi(q, &p1, &pick(&r.v, &part.nonregular))?;
            let phi0: Vec<f64> = p2.iter().zip(&psi).map(|(a, b)| a - b).collect();
            let hs3 = ham_rhs(h, gauge, q, &p1, &phi0, true)?.hs3_residual;
            traj.times.push(t);
            traj.q.push(q.to_vec());
            traj.el_i2_res.push(norm_inf(&r.i2_residual));
            traj.v.push(r.v);
            traj.p.push(r.momentum);
            traj.phi.push(phi);
            traj.hs3_res.push(hs3);
            Ok(())
        },
    )?;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::partition_indices;
    use crate::system::{DomainBox, LagrangianSystem};

    fn mixed(n: usize, src: &str) -> MixedHamiltonian {
        let sys = LagrangianSystem::new(n, src, DomainBox::uniform(2 * n, -1.0, 1.0).unwrap()).unwrap();
        let part = partition_indices(&sys, 32, 0).unwrap();
        MixedHamiltonian::new(sys, part)
    }

    #[test]
    fn rhs_examples() {
        let h = mixed(2, "0.5*(v1+v2)^2");
        let r = el_rhs(&h, &GaugeChoice::constant(2, &[1.0]), &[0.3, -0.2], &[0.7]).unwrap();
        assert_eq!(r.accel1, vec![0.0]);
        assert_eq!(r.i2_residual, vec![0.0]);

        let h = mixed(1, "0.5*v1^2 - 0.5*q1^2");
        let r = el_rhs(&h, &GaugeChoice::empty(1), &[0.4], &[0.0]).unwrap();
        assert!((r.accel1[0] + 0.4).abs() < 1e-15);
        assert!(r.i2_residual.is_empty());

        // the nonregular row reads d/dt(q1) - 0 = v1
        let h = mixed(2, "0.5*v1^2 + q1*v2");
        let r = el_rhs(&h, &GaugeChoice::constant(2, &[0.0]), &[0.1, 0.2], &[0.8]).unwrap();
        assert!((r.i2_residual[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn free_drift() {
        let h = mixed(2, "0.5*(v1+v2)^2");
        let traj = integrate_el(&h, &GaugeChoice::constant(2, &[0.0]), &[0.0, 0.0], &[1.0], (0.0, 2.0), 1e-2).unwrap();
        for (t, q) in traj.times.iter().zip(&traj.q) {
            assert!((q[0] - t).abs() < 1e-9);
            assert!(q[1].abs() < 1e-12);
        }
        assert!(traj.max_phi() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let h = mixed(2, "0.5*(v1+v2)^2");
        let g = GaugeChoice::constant(2, &[0.0]);
        assert!(matches!(
            integrate_el(&h, &g, &[0.0, 0.0], &[1.0], (0.0, 1.0), 0.0),
            Err(DynamicsError::InvalidStep(_))
        ));
        assert!(matches!(
            integrate_el(&h, &GaugeChoice::empty(2), &[0.0, 0.0], &[1.0], (0.0, 1.0), 0.1),
            Err(DynamicsError::GaugeDimension { expected: 1, found: 0 })
        ));
    }
}
