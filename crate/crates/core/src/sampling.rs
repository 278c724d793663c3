//! Seeded random phase-space points for property checks.

use rand::Rng;

use crate::clairaut::{MixedHamiltonian, SolveError};

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    /// Velocities drawn from the box.
    pub v: Vec<f64>,
    /// The nonregular part of `v`.
    pub v2: Vec<f64>,
    /// `dL/dv` at `(q, v)`, with the nonregular components shifted off the
    /// constraint surface by `offset`.
    pub p: Vec<f64>,
    pub offset: Vec<f64>,
}

/// Draws `(q, v)` uniformly from the domain box and builds momenta from it,
/// so the regular momenta are always reachable by the envelope solver.
pub fn phase_point<R: Rng + ?Sized>(h: &MixedHamiltonian, rng: &mut R) -> Result<PhasePoint, SolveError> {
    let sys = h.system();
    let part = h.partition();
    let q = sys.q_domain().sample(rng);
    let v = sys.v_domain().sample(rng);
    let mut p = sys.velocity_dual(&q, &v)?.gradient;
    let mut offset = Vec::with_capacity(part.nonregular.len());
    for &i in &part.nonregular {
        let s = rng.gen_range(-1.0..=1.0);
        p[i] += s;
        offset.push(s);
    }
    let v2 = part.nonregular.iter().map(|&i| v[i]).collect();
    Ok(PhasePoint { q, v, v2, p, offset })
}

/// A fresh value for the free velocities, drawn from their box.
pub fn probe<R: Rng + ?Sized>(h: &MixedHamiltonian, rng: &mut R) -> Vec<f64> {
    let v = h.system().v_domain().sample(rng);
    h.partition().nonregular.iter().map(|&i| v[i]).collect()
}
