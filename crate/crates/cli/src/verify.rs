use std::fmt::Write as _;
use std::path::Path;

use clairaut_core::clairaut::classical_hamiltonian;
use clairaut_core::partition::numerical_rank;
use clairaut_core::sampling::{phase_point, probe, PhasePoint};
use clairaut_core::{MixedHamiltonian, SolveError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{CliError, EXIT_VERIFY};
use crate::problem::Problem;
use crate::Output;

const PROBES: usize = 10;
const CONSTRAINT_TOL: f64 = 1e-8;
const REDUCTION_TOL: f64 = 1e-9;
const CONVEXITY_STEP: f64 = 1e-4;
const CONVEXITY_RANK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
enum Status {
    Pass,
    Fail,
    Vacuous,
}

#[derive(Debug, Clone, Serialize)]
struct Property {
    name: &'static str,
    status: Status,
    worst: Option<f64>,
    tol: f64,
    note: Option<String>,
}

#[derive(Serialize)]
struct VerifyReport {
    seed: u64,
    samples: usize,
    k: usize,
    n: usize,
    properties: Vec<Property>,
    failed: Vec<&'static str>,
}

type Check<'a> = Box<dyn FnMut(&PhasePoint, &mut ChaCha8Rng) -> Result<f64, SolveError> + 'a>;

struct Spec<'a> {
    name: &'static str,
    tol: f64,
    vacuous: Option<&'static str>,
    check: Check<'a>,
}

fn p1_of(h: &MixedHamiltonian, p: &[f64]) -> Vec<f64> {
    h.partition().regular.iter().map(|&i| p[i]).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn specs<'a>(h: &'a MixedHamiltonian, tol_residual: f64, tol_involution: f64) -> Vec<Spec<'a>> {
    let part = h.partition();
    let constrained = if part.is_regular() { Some("vacuous (k = n)") } else { None };
    let singular = if part.is_regular() { None } else { Some("not applicable (k < n)") };
    let sys = h.system();
    vec![
        Spec {
            name: "clairaut_residual",
            tol: tol_residual,
            vacuous: None,
            check: Box::new(|pt, _| h.clairaut_residual(&pt.q, &pt.p, &pt.v2)),
        },
        Spec {
            name: "envelope_gradient_p1",
            tol: tol_residual,
            vacuous: None,
            check: Box::new(|pt, _| {
                let grad = h.momentum_gradient_fd(&pt.q, &pt.p, &pt.v2)?;
                let v1 = h.solve_envelope(&pt.q, &p1_of(h, &pt.p), &pt.v2)?;
                Ok(part.regular.iter().zip(&v1).map(|(&i, v)| (grad[i] - v).abs()).fold(0.0, f64::max))
            }),
        },
        Spec {
            name: "envelope_gradient_p2",
            tol: CONSTRAINT_TOL,
            vacuous: constrained,
            check: Box::new(|pt, _| {
                let grad = h.momentum_gradient_fd(&pt.q, &pt.p, &pt.v2)?;
                Ok(part.nonregular.iter().zip(&pt.v2).map(|(&i, v)| (grad[i] - v).abs()).fold(0.0, f64::max))
            }),
        },
        Spec {
            name: "psi_independence",
            tol: CONSTRAINT_TOL,
            vacuous: constrained,
            check: Box::new(|pt, rng| {
                let p1 = p1_of(h, &pt.p);
                let reference = h.psi(&pt.q, &p1, &pt.v2)?;
                let scale = 1.0 + max_abs(&reference);
                let mut worst = 0.0_f64;
                for _ in 0..PROBES {
                    let psi = h.psi(&pt.q, &p1, &probe(h, rng))?;
                    let d: Vec<f64> = psi.iter().zip(&reference).map(|(a, b)| a - b).collect();
                    worst = worst.max(max_abs(&d) / scale);
                }
                Ok(worst)
            }),
        },
        Spec {
            name: "h0_independence",
            tol: CONSTRAINT_TOL,
            vacuous: constrained,
            check: Box::new(|pt, rng| {
                let p1 = p1_of(h, &pt.p);
                let reference = h.h_zero_with_probe(&pt.q, &p1, &pt.v2)?;
                let mut worst = 0.0_f64;
                for _ in 0..PROBES {
                    let v = h.h_zero_with_probe(&pt.q, &p1, &probe(h, rng))?;
                    worst = worst.max((v - reference).abs() / (1.0 + reference.abs()));
                }
                Ok(worst)
            }),
        },
        Spec {
            name: "decomposition",
            tol: CONSTRAINT_TOL,
            vacuous: constrained,
            check: Box::new(|pt, _| {
                let full = h.mixed_hamiltonian(&pt.q, &pt.p, &pt.v2)?;
                let h0 = h.h_zero(&pt.q, &p1_of(h, &pt.p))?;
                let phi = h.phi(&pt.q, &pt.p)?;
                let gauge: f64 = pt.v2.iter().zip(&phi).map(|(a, b)| a * b).sum();
                Ok((full - h0 - gauge).abs() / (1.0 + full.abs()))
            }),
        },
        Spec {
            name: "involutivity",
            tol: tol_involution,
            vacuous: None,
            check: Box::new(|pt, rng| {
                let p2: Vec<f64> = (0..pt.v2.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let back = h.inverse_transform(&pt.q, &pt.v, &p2)?;
                let l = sys.eval(&pt.q, &pt.v)?;
                Ok((back - l).abs() / (1.0 + l.abs()))
            }),
        },
        Spec {
            name: "regular_reduction",
            tol: REDUCTION_TOL,
            vacuous: singular,
            check: Box::new(|pt, _| {
                let mixed = h.mixed_hamiltonian(&pt.q, &pt.p, &[])?;
                let classical = classical_hamiltonian(sys, &pt.q, &pt.p, &pt.v)?;
                Ok((mixed - classical).abs() / (1.0 + classical.abs()))
            }),
        },
        Spec {
            name: "convexity_rank",
            tol: 0.0,
            vacuous: None,
            // reports the rank mismatch, zero when the momentum Hessian has rank k
            check: Box::new(|pt, _| {
                let w = h.momentum_hessian_fd(&pt.q, &pt.p, &pt.v2, CONVEXITY_STEP)?;
                Ok((numerical_rank(&w, CONVEXITY_RANK_TOL) as f64 - part.k as f64).abs())
            }),
        },
    ]
}

pub fn run(path: &Path, seed: Option<u64>, out: &Output) -> Result<u8, CliError> {
    let problem = Problem::load(path, seed)?;
    let h = &problem.mixed;
    let settings = problem.file.verify;
    if settings.samples == 0 {
        return Err(CliError::problem("verify.samples must be positive"));
    }

    let mut points = Vec::with_capacity(settings.samples);
    let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);
    for _ in 0..settings.samples {
        points.push(phase_point(h, &mut rng)?);
    }

    let mut properties = Vec::new();
    for (index, mut spec) in specs(h, settings.tol_residual, settings.tol_involution).into_iter().enumerate() {
        if let Some(note) = spec.vacuous {
            properties.push(Property {
                name: spec.name,
                status: Status::Vacuous,
                worst: None,
                tol: spec.tol,
                note: Some(note.into()),
            });
            continue;
        }
        // every property has its own stream so results do not depend on order
        let mut rng = ChaCha8Rng::seed_from_u64(problem.seed.wrapping_add(1 + index as u64));
        let mut worst = 0.0_f64;
        let mut note = None;
        for (i, pt) in points.iter().enumerate() {
            match (spec.check)(pt, &mut rng) {
                Ok(r) if r.is_finite() => worst = worst.max(r),
                Ok(r) => {
                    worst = f64::INFINITY;
                    note.get_or_insert_with(|| format!("non-finite value {r} at sample {i}"));
                }
                Err(e) => {
                    worst = f64::INFINITY;
                    note.get_or_insert_with(|| format!("sample {i}: {e}"));
                }
            }
        }
        properties.push(Property {
            name: spec.name,
            status: if worst <= spec.tol { Status::Pass } else { Status::Fail },
            worst: Some(worst),
            tol: spec.tol,
            note,
        });
    }

    let failed: Vec<&'static str> = properties
        .iter()
        .filter(|p| matches!(p.status, Status::Fail))
        .map(|p| p.name)
        .collect();
    let part = problem.partition();
    let report = VerifyReport {
        seed: problem.seed,
        samples: settings.samples,
        k: part.k,
        n: part.n,
        properties,
        failed: failed.clone(),
    };

    let mut text = String::new();
    writeln!(text, "n = {}, k = {}, seed {}, {} samples", report.n, report.k, report.seed, report.samples).unwrap();
    for p in &report.properties {
        match p.status {
            Status::Vacuous => {
                writeln!(text, "{:<8} {:<22} {}", "VACUOUS", p.name, p.note.as_deref().unwrap_or("")).unwrap()
            }
            ref s => {
                let tag = if matches!(s, Status::Pass) { "PASS" } else { "FAIL" };
                write!(text, "{tag:<8} {:<22} worst {:e}, tol {:e}", p.name, p.worst.unwrap_or(f64::NAN), p.tol).unwrap();
                if let Some(n) = &p.note {
                    write!(text, " ({n})").unwrap();
                }
                writeln!(text).unwrap();
            }
        }
    }
    out.report("verify", &text, &report)?;
    if failed.is_empty() {
        Ok(0)
    } else {
        eprintln!("error: failed properties: {}", failed.join(", "));
        Ok(EXIT_VERIFY)
    }
}
