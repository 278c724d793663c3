use nalgebra::DVector;

use super::{check_len, el::el_rhs, rk4, time_grid, DynamicsError, GaugeChoice, Trajectory};
use crate::clairaut::MixedHamiltonian;
use crate::linalg::{norm_inf, pick, submatrix};

/// Largest `|Phi0|` accepted when the primary constraints are enforced.
pub const PRIMARY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamOptions {
    /// Include the `Phi . dC2/dq` terms in the regular momentum equation.
    /// Turning them off is only useful as a negative control.
    pub r_terms: bool,
    pub enforce_primary: bool,
}

impl Default for HamOptions {
    fn default() -> Self {
        HamOptions {
            r_terms: true,
            enforce_primary: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamRhs {
    /// `(V, C2(q))` in original order.
    pub qdot: Vec<f64>,
    pub p1dot: Vec<f64>,
    /// `Psi(q, p1) + Phi0`.
    pub p2: Vec<f64>,
    /// `d/dt Psi` along the flow.
    pub p2dot: Vec<f64>,
    /// `Phi . dC2/dq`, one entry per coordinate.
    pub r: Vec<f64>,
    pub hs3_residual: f64,
}

/// Mixed Hamiltonian equations at `(q, p1)` with constraint offset `phi0`.
///
/// At fixed `v2` the coordinate gradient of `H` is `-dL/dq` at the envelope
/// point. Along `v2 = C2(q)` the total gradient picks up
/// `R = Phi . dC2/dq`, so `dp1/dt = -dH/dq1 + R1` reduces to `dL/dq1`.
pub fn ham_rhs(
    h: &MixedHamiltonian,
    gauge: &GaugeChoice,
    q: &[f64],
    p1: &[f64],
    phi0: &[f64],
    r_terms: bool,
) -> Result<HamRhs, DynamicsError> {
    let sys = h.system();
    let part = h.partition();
    let n = sys.n();
    let m = n - part.k;
    if !sys.is_lagrangian() {
        return Err(DynamicsError::NotLagrangian);
    }
    gauge.check(n, m)?;
    check_len("q", q, n)?;
    check_len("p1", p1, part.k)?;
    check_len("phi0", phi0, m)?;

    let (c2, jac) = gauge.jet(q)?;
    let jet = h.envelope_jet(q, p1, &c2)?;
    let reg = &part.regular;
    let non = &part.nonregular;

    let psi = pick(&jet.grad_v, non);
    let p2: Vec<f64> = psi.iter().zip(phi0).map(|(a, b)| a + b).collect();
    let r: Vec<f64> = (jac.transpose() * DVector::from_column_slice(phi0)).iter().copied().collect();
    // total dH/dq along the gauge
    let dh_dq: Vec<f64> = (0..n).map(|i| -jet.grad_q[i] + r[i]).collect();

    let p1dot: Vec<f64> = reg
        .iter()
        .map(|&i| if r_terms { -dh_dq[i] + r[i] } else { -dh_dq[i] })
        .collect();

    let qdot = jet.v.clone();
    let w21 = submatrix(&jet.w, non, reg);
    let l_v2q = submatrix(&jet.l_vq, non, &(0..n).collect::<Vec<_>>());
    let dpsi_dq = l_v2q + &w21 * &jet.dv_dq;
    let dv1_dt = h.solve_w11(&jet.w, &p1dot, &jet.v)?;
    let p2dot: Vec<f64> = (dpsi_dq * DVector::from_column_slice(&qdot)
        + &w21 * DVector::from_column_slice(&dv1_dt))
        .iter()
        .copied()
        .collect();

    let hs3: Vec<f64> = non
        .iter()
        .enumerate()
        .map(|(a, &i)| dh_dq[i] - (-p2dot[a] + r[i]))
        .collect();
    Ok(HamRhs {
        qdot,
        p1dot,
        p2,
        p2dot,
        r,
        hs3_residual: norm_inf(&hs3),
    })
}

/// RK4 on `(q, p1)`; `p2` is rebuilt from `Psi` plus the initial offset.
pub fn integrate_ham(
    h: &MixedHamiltonian,
    gauge: &GaugeChoice,
    q0: &[f64],
    p0: &[f64],
    t_span: (f64, f64),
    dt: f64,
    options: HamOptions,
) -> Result<Trajectory, DynamicsError> {
    let part = h.partition();
    let n = h.system().n();
    let k = part.k;
    if !h.system().is_lagrangian() {
        return Err(DynamicsError::NotLagrangian);
    }
    gauge.check(n, n - k)?;
    check_len("q0", q0, n)?;
    check_len("p0", p0, n)?;
    let grid = time_grid(t_span.0, t_span.1, dt)?;

    let p10 = pick(p0, &part.regular);
    let psi0 = h.psi(q0, &p10, &gauge.eval(q0)?)?;
    let phi0: Vec<f64> = pick(p0, &part.nonregular).iter().zip(&psi0).map(|(a, b)| a - b).collect();
    if options.enforce_primary && norm_inf(&phi0) > PRIMARY_TOL {
        return Err(DynamicsError::PrimaryViolated {
            phi: phi0,
            tol: PRIMARY_TOL,
        });
    }

    let mut traj = Trajectory::new(n, part.regular.clone(), grid.len());
    let y0: Vec<f64> = q0.iter().chain(&p10).copied().collect();
    rk4(
        &grid,
        y0,
        |y| {
            let r = ham_rhs(h, gauge, &y[..n], &y[n..], &phi0, options.r_terms)?;
            Ok(r.qdot.into_iter().chain(r.p1dot).collect())
        },
        |t, y| {
            let (q, p1) = (&y[..n], &y[n..n + k]);
            let r = ham_rhs(h, gauge, q, p1, &phi0, options.r_terms)?;
            let p = part.merge(p1, &r.p2);
            let v1 = pick(&r.qdot, &part.regular);
            let el = el_rhs(h, gauge, q, &v1)?;
            traj.times.push(t);
            traj.q.push(q.to_vec());
            traj.phi.push(h.phi(q, &p)?);
            traj.p.push(p);
            traj.v.push(r.qdot);
            traj.el_i2_res.push(norm_inf(&el.i2_residual));
            traj.hs3_res.push(r.hs3_residual);
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
        let c = 0.4;
        let r = ham_rhs(&h, &GaugeChoice::constant(2, &[c]), &[0.1, 0.2], &[1.5], &[0.0], true).unwrap();
        assert!((r.qdot[0] - (1.5 - c)).abs() < 1e-12);
        assert!((r.qdot[1] - c).abs() < 1e-15);
        assert_eq!(r.p1dot, vec![0.0]);
        assert_eq!(r.r, vec![0.0, 0.0]);

        let h = mixed(2, "0.5*v1^2 + q1*v2");
        let r = ham_rhs(&h, &GaugeChoice::constant(2, &[0.3]), &[0.5, 0.0], &[0.9], &[0.0], true).unwrap();
        assert!((r.p2dot[0] - 0.9).abs() < 1e-12);
        assert!((r.p2[0] - 0.5).abs() < 1e-12);

        let h = mixed(1, "0.5*v1^2 - 0.5*q1^2");
        let r = ham_rhs(&h, &GaugeChoice::empty(1), &[0.6], &[0.2], &[], true).unwrap();
        assert!((r.qdot[0] - 0.2).abs() < 1e-12);
        assert!((r.p1dot[0] + 0.6).abs() < 1e-12);
        assert!(r.p2.is_empty());
    }

    #[test]
    fn constrained_drift() {
        let h = mixed(2, "0.5*(v1+v2)^2");
        let g = GaugeChoice::constant(2, &[1.0]);
        let opts = HamOptions {
            enforce_primary: true,
            ..HamOptions::default()
        };
        let traj = integrate_ham(&h, &g, &[0.0, 0.0], &[2.0, 2.0], (0.0, 1.0), 1e-2, opts).unwrap();
        for i in 0..traj.len() {
            let t = traj.times[i];
            assert!((traj.q[i][0] - t).abs() < 1e-9);
            assert!((traj.q[i][1] - t).abs() < 1e-9);
            assert!((traj.p[i][0] - 2.0).abs() < 1e-12);
            assert!(traj.phi[i][0].abs() < 1e-9);
        }
        let err = integrate_ham(&h, &g, &[0.0, 0.0], &[2.0, 5.0], (0.0, 1.0), 1e-2, opts).unwrap_err();
        match err {
            DynamicsError::PrimaryViolated { phi, .. } => assert!((phi[0] - 3.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        let free = integrate_ham(&h, &g, &[0.0, 0.0], &[2.0, 5.0], (0.0, 1.0), 1e-2, HamOptions::default()).unwrap();
        assert!((free.max_phi() - 3.0).abs() < 1e-9);
    }
}
