//! The Legendre-Clairaut transform.
//!
//! For a Lagrangian `L(q, v)` with velocity indices split into a regular
//! block `v1` and a nonregular block `v2`, the mixed Hamiltonian is
//!
//! ```text
//! H(q, p, v2) = p1 . V + p2 . v2 - L(q, V, v2)
//! ```
//!
//! where `V = V(q, p1, v2)` solves the stationarity condition
//! `p1 = dL/dv1 (q, V, v2)`. The regular block is an envelope, the
//! nonregular velocities stay free parameters. When the partition is full
//! (`k = n`) this is the classical Legendre transform.
//!
//! The stationary point is not required to be a maximum: saddles are
//! admitted, so non-convex Lagrangians such as `v1*v2` are handled by plain
//! Newton iteration on the gradient. With several stationary points the
//! solver converges to the one in the basin of its initial guess.

mod classical;
mod generic;
mod newton;

use nalgebra::DMatrix;

pub use classical::classical_hamiltonian;
pub use generic::{general_solution, generic_transform, GenericTransform, TransformError};
pub use newton::NewtonSettings;

use crate::expr::EvalError;
use crate::linalg::{dot, norm_inf, pick, sigma_max, solve};
use crate::partition::HessianPartition;
use crate::system::LagrangianSystem;
use newton::{damped_newton, Linearization};

/// Relative step for the finite-difference momentum derivatives used by
/// [`MixedHamiltonian::clairaut_residual`].
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("Newton iteration did not converge (residual history {residual_history:?})")]
    NewtonDiverged {
        residual_history: Vec<f64>,
        iterate: Vec<f64>,
    },
    #[error("singular Jacobian at {iterate:?}: smallest singular value {sigma_min:e} vs scale {scale:e}")]
    SingularJacobian {
        iterate: Vec<f64>,
        sigma_min: f64,
        scale: f64,
    },
    #[error("{what} has length {found}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub(crate) fn check_len(what: &'static str, v: &[f64], expected: usize) -> Result<(), SolveError> {
    if v.len() != expected {
        return Err(SolveError::Dimension {
            what,
            expected,
            found: v.len(),
        });
    }
    Ok(())
}

/// Where Newton starts for the regular velocities.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    Zero,
    DomainCenter,
    User(Vec<f64>),
}

/// Solves `p1 = dL/dv1 (q, v1, c2)` for `v1`.
#[derive(Debug, Clone)]
pub struct EnvelopeSolver {
    pub settings: NewtonSettings,
    pub initial_guess: InitialGuess,
    center: Vec<f64>,
}

impl EnvelopeSolver {
    pub fn new(system: &LagrangianSystem, partition: &HessianPartition) -> Self {
        EnvelopeSolver {
            settings: NewtonSettings::default(),
            initial_guess: InitialGuess::DomainCenter,
            center: pick(&system.v_domain().center(), &partition.regular),
        }
    }

    pub fn with_settings(mut self, settings: NewtonSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn with_initial_guess(mut self, guess: InitialGuess) -> Self {
        self.initial_guess = guess;
        self
    }

    fn start(&self) -> Vec<f64> {
        match &self.initial_guess {
            InitialGuess::Zero => vec![0.0; self.center.len()],
            InitialGuess::DomainCenter => self.center.clone(),
            InitialGuess::User(v) => v.clone(),
        }
    }
}

/// Everything known at a solved envelope point.
#[derive(Debug, Clone)]
pub struct EnvelopePoint {
    /// Regular velocities `V(q, p1, c2)`.
    pub v1: Vec<f64>,
    /// Full velocity vector `(V, c2)` in original index order.
    pub v: Vec<f64>,
    pub lagrangian: f64,
    /// `dL/dv` at the point, original order.
    pub momentum: Vec<f64>,
    pub hessian: DMatrix<f64>,
}

/// Mixed Hamiltonian of a partitioned system.
#[derive(Debug, Clone)]
pub struct MixedHamiltonian {
    system: LagrangianSystem,
    partition: HessianPartition,
    solver: EnvelopeSolver,
}

impl MixedHamiltonian {
    pub fn new(system: LagrangianSystem, partition: HessianPartition) -> Self {
        let solver = EnvelopeSolver::new(&system, &partition);
        MixedHamiltonian {
            system,
            partition,
            solver,
        }
    }

    pub fn with_solver(mut self, solver: EnvelopeSolver) -> Self {
        self.solver = solver;
        self
    }

    pub fn system(&self) -> &LagrangianSystem {
        &self.system
    }

    pub fn partition(&self) -> &HessianPartition {
        &self.partition
    }

    pub fn solver(&self) -> &EnvelopeSolver {
        &self.solver
    }

    fn n(&self) -> usize {
        self.system.n()
    }

    fn check_q(&self, q: &[f64]) -> Result<(), SolveError> {
        check_len("q", q, self.system.q_dim())
    }

    /// Default value for the free velocities when a result must not depend
    /// on them: the centre of their domain.
    pub fn default_probe(&self) -> Vec<f64> {
        pick(&self.system.v_domain().center(), &self.partition.nonregular)
    }

    pub fn solve_envelope(&self, q: &[f64], p1: &[f64], c2: &[f64]) -> Result<Vec<f64>, SolveError> {
        self.solve_envelope_from(q, p1, c2, self.solver.start())
    }

    pub fn solve_envelope_from(
        &self,
        q: &[f64],
        p1: &[f64],
        c2: &[f64],
        guess: Vec<f64>,
    ) -> Result<Vec<f64>, SolveError> {
        let part = &self.partition;
        self.check_q(q)?;
        check_len("p1", p1, part.k)?;
        check_len("v2", c2, self.n() - part.k)?;
        check_len("initial guess", &guess, part.k)?;
        let outcome = damped_newton(guess, &self.solver.settings, |v1| {
            let v = part.merge(v1, c2);
            let d = self.system.velocity_dual(q, &v)?;
            let w = d.hessian();
            let residual = part
                .regular
                .iter()
                .zip(p1)
                .map(|(&i, p)| p - d.gradient[i])
                .collect();
            Ok(Linearization {
                residual,
                jacobian: -part.w11(&w),
                scale: sigma_max(&w),
            })
        })?;
        Ok(outcome.x)
    }

    pub fn envelope_point(&self, q: &[f64], p1: &[f64], c2: &[f64]) -> Result<EnvelopePoint, SolveError> {
        let v1 = self.solve_envelope(q, p1, c2)?;
        let v = self.partition.merge(&v1, c2);
        let d = self.system.velocity_dual(q, &v)?;
        Ok(EnvelopePoint {
            v1,
            v,
            lagrangian: d.value,
            hessian: d.hessian(),
            momentum: d.gradient,
        })
    }

    fn split(&self, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (
            pick(p, &self.partition.regular),
            pick(p, &self.partition.nonregular),
        )
    }

    /// `p1 . V + p2 . v2 - L(q, V, v2)`.
    pub fn mixed_hamiltonian(&self, q: &[f64], p: &[f64], v2: &[f64]) -> Result<f64, SolveError> {
        check_len("p", p, self.n())?;
        let (p1, p2) = self.split(p);
        let pt = self.envelope_point(q, &p1, v2)?;
        Ok(dot(&p1, &pt.v1) + dot(&p2, v2) - pt.lagrangian)
    }

    /// `dL/dv2` at the envelope point reached with the given free velocities.
    pub fn psi(&self, q: &[f64], p1: &[f64], v2_probe: &[f64]) -> Result<Vec<f64>, SolveError> {
        let pt = self.envelope_point(q, p1, v2_probe)?;
        Ok(pick(&pt.momentum, &self.partition.nonregular))
    }

    /// Primary constraints `p2 - Psi(q, p1)`.
    pub fn phi(&self, q: &[f64], p: &[f64]) -> Result<Vec<f64>, SolveError> {
        check_len("p", p, self.n())?;
        let (p1, p2) = self.split(p);
        let psi = self.psi(q, &p1, &self.default_probe())?;
        Ok(p2.iter().zip(&psi).map(|(a, b)| a - b).collect())
    }

    pub fn h_zero(&self, q: &[f64], p1: &[f64]) -> Result<f64, SolveError> {
        self.h_zero_with_probe(q, p1, &self.default_probe())
    }

    /// `p1 . V + c2 . Psi - L(q, V, c2)`.
    pub fn h_zero_with_probe(&self, q: &[f64], p1: &[f64], c2: &[f64]) -> Result<f64, SolveError> {
        let pt = self.envelope_point(q, p1, c2)?;
        let psi = pick(&pt.momentum, &self.partition.nonregular);
        Ok(dot(p1, &pt.v1) + dot(c2, &psi) - pt.lagrangian)
    }

    /// Momentum gradient of `H` at fixed `v2` by central differences with
    /// step `FD_STEP * (1 + |p_i|)`.
    pub fn momentum_gradient_fd(&self, q: &[f64], p: &[f64], v2: &[f64]) -> Result<Vec<f64>, SolveError> {
        check_len("p", p, self.n())?;
        let mut grad = Vec::with_capacity(p.len());
        let mut shifted = p.to_vec();
        for i in 0..p.len() {
            let h = FD_STEP * (1.0 + p[i].abs());
            shifted[i] = p[i] + h;
            let up = self.mixed_hamiltonian(q, &shifted, v2)?;
            shifted[i] = p[i] - h;
            let down = self.mixed_hamiltonian(q, &shifted, v2)?;
            shifted[i] = p[i];
            grad.push((up - down) / (2.0 * h));
        }
        Ok(grad)
    }

    /// Central-difference Hessian of `H` in all momenta at fixed `v2`, step
    /// `rel_step * (1 + |p_i|)`.
    pub fn momentum_hessian_fd(&self, q: &[f64], p: &[f64], v2: &[f64], rel_step: f64) -> Result<DMatrix<f64>, SolveError> {
        check_len("p", p, self.n())?;
        let n = p.len();
        let step: Vec<f64> = p.iter().map(|x| rel_step * (1.0 + x.abs())).collect();
        let mut w = DMatrix::zeros(n, n);
        let mut x = p.to_vec();
        for i in 0..n {
            for j in i..n {
                let mut corner = |si: f64, sj: f64| {
                    x.copy_from_slice(p);
                    x[i] += si * step[i];
                    x[j] += sj * step[j];
                    self.mixed_hamiltonian(q, &x, v2)
                };
                let val = (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)? + corner(-1.0, -1.0)?)
                    / (4.0 * step[i] * step[j]);
                w[(i, j)] = val;
                w[(j, i)] = val;
            }
        }
        Ok(w)
    }

    /// `|H - p . dH/dp + L(q, dH/dp)|` with finite-difference momentum
    /// derivatives.
    pub fn clairaut_residual(&self, q: &[f64], p: &[f64], v2: &[f64]) -> Result<f64, SolveError> {
        let h = self.mixed_hamiltonian(q, p, v2)?;
        let grad = self.momentum_gradient_fd(q, p, v2)?;
        let l = self.system.eval(q, &grad)?;
        Ok((h - dot(p, &grad) + l).abs())
    }

    /// `dH/dq` at fixed `v2`. By stationarity in `v1` this is `-dL/dq` at the
    /// envelope point.
    pub fn dh_dq(&self, q: &[f64], p1: &[f64], v2: &[f64]) -> Result<Vec<f64>, SolveError> {
        let v1 = self.solve_envelope(q, p1, v2)?;
        let v = self.partition.merge(&v1, v2);
        let d = self.system.full_dual(q, &v)?;
        Ok(d.gradient[..self.system.q_dim()].iter().map(|g| -g).collect())
    }

    /// Mixed Lagrangian `v1 . P + v2 . p2 - H(q, (P, p2), v2)` where `P`
    /// solves `v1 = dH/dp1 (q, (P, p2), v2)`.
    pub fn inverse_transform(&self, q: &[f64], v: &[f64], p2: &[f64]) -> Result<f64, SolveError> {
        Ok(self.inverse_point(q, v, p2)?.0)
    }

    /// Mixed Lagrangian value together with the regular momenta `P`.
    pub fn inverse_point(&self, q: &[f64], v: &[f64], p2: &[f64]) -> Result<(f64, Vec<f64>), SolveError> {
        let part = &self.partition;
        self.check_q(q)?;
        check_len("v", v, self.n())?;
        check_len("p2", p2, self.n() - part.k)?;
        let (v1, v2) = self.split(v);

        // dH/dp1 = V by stationarity, and dV/dp1 = W11^-1
        let start = {
            let center = part.merge(&self.solver.center, &v2);
            pick(&self.system.velocity_dual(q, &center)?.gradient, &part.regular)
        };
        let outcome = damped_newton(start, &self.solver.settings, |p1| {
            let pt = self.envelope_point(q, p1, &v2)?;
            let w11 = part.w11(&pt.hessian);
            let inv = w11
                .clone()
                .try_inverse()
                .ok_or_else(|| SolveError::SingularJacobian {
                    iterate: p1.to_vec(),
                    sigma_min: 0.0,
                    scale: sigma_max(&pt.hessian),
                })?;
            let scale = sigma_max(&inv);
            Ok(Linearization {
                residual: pt.v1.iter().zip(&v1).map(|(a, b)| a - b).collect(),
                jacobian: inv,
                scale,
            })
        })?;
        let big_p = outcome.x;
        let p = part.merge(&big_p, p2);
        let h = self.mixed_hamiltonian(q, &p, &v2)?;
        Ok((dot(&v1, &big_p) + dot(&v2, p2) - h, big_p))
    }

    /// Regular velocities `V` and the derivatives `dV/dp1 = W11^-1`,
    /// `dV/dq = -W11^-1 d2L/dv1dq` at fixed `v2`, plus the full `(q, v)`
    /// second derivatives of `L` there.
    pub(crate) fn envelope_jet(&self, q: &[f64], p1: &[f64], v2: &[f64]) -> Result<EnvelopeJet, SolveError> {
        let part = &self.partition;
        let qd = self.system.q_dim();
        let v1 = self.solve_envelope(q, p1, v2)?;
        let v = part.merge(&v1, v2);
        let d = self.system.full_dual(q, &v)?;
        let full = d.hessian();
        let w = full.view((qd, qd), (self.n(), self.n())).clone_owned();
        // rows: velocities, cols: coordinates
        let l_vq = full.view((qd, 0), (self.n(), qd)).clone_owned();
        let w11 = part.w11(&w);
        let l_v1q = DMatrix::from_fn(part.k, qd, |i, j| l_vq[(part.regular[i], j)]);
        let dv_dq = if part.k == 0 {
            DMatrix::zeros(0, qd)
        } else {
            let lu = w11.clone().lu();
            -lu.solve(&l_v1q).ok_or_else(|| SolveError::SingularJacobian {
                iterate: v1.clone(),
                sigma_min: 0.0,
                scale: sigma_max(&w),
            })?
        };
        Ok(EnvelopeJet {
            v,
            grad_q: d.gradient[..qd].to_vec(),
            grad_v: d.gradient[qd..].to_vec(),
            w,
            l_vq,
            dv_dq,
        })
    }

    pub(crate) fn solve_w11(&self, w: &DMatrix<f64>, rhs: &[f64], at: &[f64]) -> Result<Vec<f64>, SolveError> {
        solve(&self.partition.w11(w), rhs).ok_or_else(|| SolveError::SingularJacobian {
            iterate: at.to_vec(),
            sigma_min: 0.0,
            scale: sigma_max(w),
        })
    }

    /// Largest `|Psi(probe) - Psi(reference)|` over the given probes.
    pub fn psi_spread(&self, q: &[f64], p1: &[f64], probes: &[Vec<f64>]) -> Result<f64, SolveError> {
        let reference = self.psi(q, p1, &self.default_probe())?;
        let mut worst = 0.0_f64;
        for probe in probes {
            let psi = self.psi(q, p1, probe)?;
            let diff: Vec<f64> = psi.iter().zip(&reference).map(|(a, b)| a - b).collect();
            worst = worst.max(norm_inf(&diff));
        }
        Ok(worst)
    }
}

/// Local data around an envelope point used by the equations of motion.
#[derive(Debug, Clone)]
pub(crate) struct EnvelopeJet {
    pub v: Vec<f64>,
    pub grad_q: Vec<f64>,
    pub grad_v: Vec<f64>,
    pub w: DMatrix<f64>,
    pub l_vq: DMatrix<f64>,
    /// `k x q_dim`.
    pub dv_dq: DMatrix<f64>,
}
