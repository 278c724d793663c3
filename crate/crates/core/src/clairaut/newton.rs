use nalgebra::DMatrix;

use super::SolveError;
use crate::linalg::{norm_inf, sigma_max, sigma_min, solve};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    /// Convergence threshold on the infinity norm of the residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Step halvings tried when a full step does not reduce the residual.
    pub max_halvings: usize,
    /// A Jacobian whose smallest singular value is at most `singular_tol`
    /// times the problem scale is treated as singular.
    pub singular_tol: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tol: 1e-10,
            max_iter: 50,
            max_halvings: 20,
            singular_tol: crate::partition::DEFAULT_RANK_TOL,
        }
    }
}

/// Residual and Jacobian at one iterate. `scale` is the magnitude the
/// Jacobian's conditioning is measured against.
pub(crate) struct Linearization {
    pub residual: Vec<f64>,
    pub jacobian: DMatrix<f64>,
    pub scale: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonOutcome {
    pub x: Vec<f64>,
}

pub(crate) fn damped_newton<F>(
    x0: Vec<f64>,
    settings: &NewtonSettings,
    mut linearize: F,
) -> Result<NewtonOutcome, SolveError>
where
    F: FnMut(&[f64]) -> Result<Linearization, SolveError>,
{
    let mut x = x0;
    let mut current = linearize(&x)?;
    let mut history = vec![norm_inf(&current.residual)];
    for iter in 0.. {
        let r = *history.last().unwrap();
        if r <= settings.tol {
            return Ok(NewtonOutcome { x });
        }
        if iter == settings.max_iter {
            break;
        }
        let jac = &current.jacobian;
        let smin = sigma_min(jac);
        let scale = current.scale.max(sigma_max(jac));
        if !(smin > settings.singular_tol * scale) {
            return Err(SolveError::SingularJacobian {
                iterate: x,
                sigma_min: smin,
                scale,
            });
        }
        let neg_r: Vec<f64> = current.residual.iter().map(|v| -v).collect();
        let step = solve(jac, &neg_r).ok_or_else(|| SolveError::SingularJacobian {
            iterate: x.clone(),
            sigma_min: smin,
            scale,
        })?;

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=settings.max_halvings {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a + t * d).collect();
            // a trial point outside the evaluation domain counts as a failed step
            if let Ok(lin) = linearize(&trial) {
                let rt = norm_inf(&lin.residual);
                if rt < r {
                    accepted = Some((trial, lin, rt));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((trial, lin, rt)) => {
                x = trial;
                current = lin;
                history.push(rt);
            }
            None => break,
        }
    }
    Err(SolveError::NewtonDiverged {
        residual_history: history,
        iterate: x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn solves_a_scalar_cubic() {
        let out = damped_newton(vec![3.0], &NewtonSettings::default(), |x| {
            Ok(Linearization {
                residual: vec![x[0].powi(3) - 2.0],
                jacobian: dmatrix![3.0 * x[0] * x[0]],
                scale: 1.0,
            })
        })
        .unwrap();
        assert!((out.x[0].powi(3) - 2.0).abs() <= 1e-10);
        assert!((out.x[0] - 2f64.cbrt()).abs() < 1e-10);
    }

    #[test]
    fn damping_rescues_arctan() {
        // undamped Newton on atan(x) diverges from |x0| > 1.39
        let out = damped_newton(vec![5.0], &NewtonSettings::default(), |x| {
            Ok(Linearization {
                residual: vec![x[0].atan()],
                jacobian: dmatrix![1.0 / (1.0 + x[0] * x[0])],
                scale: 1.0,
            })
        })
        .unwrap();
        assert!(out.x[0].abs() < 1e-10);
    }

    #[test]
    fn reports_divergence_with_history() {
        // every damped trial increases x^2 + 1 away from 0
        let err = damped_newton(vec![0.0], &NewtonSettings::default(), |x| {
            Ok(Linearization {
                residual: vec![x[0] * x[0] + 1.0],
                jacobian: dmatrix![1.0],
                scale: 1.0,
            })
        })
        .unwrap_err();
        match err {
            SolveError::NewtonDiverged {
                residual_history, ..
            } => assert!(!residual_history.is_empty()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn singular_jacobian_is_detected() {
        let err = damped_newton(vec![0.0, 0.0], &NewtonSettings::default(), |x| {
            Ok(Linearization {
                residual: vec![x[0] + x[1] - 1.0, x[0] + x[1] - 2.0],
                jacobian: dmatrix![1.0, 1.0; 1.0, 1.0],
                scale: 2.0,
            })
        })
        .unwrap_err();
        assert!(matches!(err, SolveError::SingularJacobian { .. }));
    }

    #[test]
    fn empty_system_converges_immediately() {
        let out = damped_newton(Vec::new(), &NewtonSettings::default(), |_| {
            Ok(Linearization {
                residual: Vec::new(),
                jacobian: DMatrix::zeros(0, 0),
                scale: 0.0,
            })
        })
        .unwrap();
        assert!(out.x.is_empty());
    }
}
