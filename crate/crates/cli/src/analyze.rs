use std::fmt::Write;
use std::path::Path;

use clairaut_core::sampling::phase_point;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::CliError;
use crate::problem::Problem;
use crate::Output;

/// Points shown when the file lists none.
const SAMPLED_POINTS: usize = 5;

#[derive(Serialize)]
struct PointReport {
    q: Vec<f64>,
    p: Vec<f64>,
    psi: Vec<f64>,
    phi: Vec<f64>,
    h0: f64,
}

#[derive(Serialize)]
struct AnalyzeReport {
    n: usize,
    kind: &'static str,
    expression: String,
    seed: u64,
    rank_samples: usize,
    rank_tolerance: f64,
    newton_tolerance: f64,
    k: usize,
    regular: Vec<String>,
    nonregular: Vec<String>,
    det_w11_range: [f64; 2],
    constraints: Vec<String>,
    points: Vec<PointReport>,
}

fn fmt_vec(v: &[f64]) -> String {
    let cells: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", cells.join(", "))
}

pub fn run(path: &Path, seed: Option<u64>, out: &Output) -> Result<u8, CliError> {
    let problem = Problem::load(path, seed)?;
    let h = &problem.mixed;
    let part = problem.partition();
    let sys = h.system();
    let n = sys.n();

    let inputs: Vec<(Vec<f64>, Vec<f64>)> = if problem.file.points.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);
        (0..SAMPLED_POINTS)
            .map(|_| phase_point(h, &mut rng).map(|pt| (pt.q, pt.p)))
            .collect::<Result<_, _>>()?
    } else {
        problem.file.points.iter().map(|pt| (pt.q.clone(), pt.p.clone())).collect()
    };
    let mut points = Vec::with_capacity(inputs.len());
    for (q, p) in inputs {
        if q.len() != sys.q_dim() || p.len() != n {
            return Err(CliError::problem(format!(
                "point needs {} coordinates and {n} momenta, got {} and {}",
                sys.q_dim(),
                q.len(),
                p.len()
            )));
        }
        let p1: Vec<f64> = part.regular.iter().map(|&i| p[i]).collect();
        let psi = h.psi(&q, &p1, &h.default_probe())?;
        let phi = h.phi(&q, &p)?;
        let h0 = h.h_zero(&q, &p1)?;
        points.push(PointReport { q, p, psi, phi, h0 });
    }

    let regular = problem.velocity_names(&part.regular);
    let nonregular = problem.velocity_names(&part.nonregular);
    let p1_names: Vec<String> = part.regular.iter().map(|i| format!("p{}", i + 1)).collect();
    let constraints: Vec<String> = part
        .nonregular
        .iter()
        .enumerate()
        .map(|(a, i)| format!("Phi_{} = p{} - Psi_{}(q, {})", a + 1, i + 1, a + 1, p1_names.join(", ")))
        .collect();
    let kind = if problem.file.is_function() { "function" } else { "lagrangian" };
    let report = AnalyzeReport {
        n,
        kind,
        expression: sys.lagrangian().to_string(),
        seed: problem.seed,
        rank_samples: part.samples_checked,
        rank_tolerance: part.rank_tolerance,
        newton_tolerance: h.solver().settings.tol,
        k: part.k,
        regular,
        nonregular,
        det_w11_range: [part.det_range.0, part.det_range.1],
        constraints,
        points,
    };

    let mut text = String::new();
    let label = if kind == "function" { "F(x)" } else { "L(q, v)" };
    writeln!(text, "n = {n}, {label} = {}", report.expression).unwrap();
    writeln!(
        text,
        "seed {}, {} rank samples, rank tolerance {:e}, Newton tolerance {:e}",
        report.seed, report.rank_samples, report.rank_tolerance, report.newton_tolerance
    )
    .unwrap();
    writeln!(text, "rank k = {}", report.k).unwrap();
    let list = |v: &[String]| if v.is_empty() { "(none)".to_string() } else { v.join(", ") };
    writeln!(text, "regular:    {}", list(&report.regular)).unwrap();
    writeln!(text, "nonregular: {}", list(&report.nonregular)).unwrap();
    writeln!(
        text,
        "|det W11| over samples: [{:e}, {:e}]",
        report.det_w11_range[0], report.det_w11_range[1]
    )
    .unwrap();
    if report.constraints.is_empty() {
        writeln!(text, "no primary constraints (k = n)").unwrap();
    } else {
        writeln!(text, "primary constraints:").unwrap();
        for c in &report.constraints {
            writeln!(text, "  {c}").unwrap();
        }
    }
    writeln!(text, "points:").unwrap();
    for pt in &report.points {
        write!(text, " ").unwrap();
        if !pt.q.is_empty() {
            write!(text, " q = {}", fmt_vec(&pt.q)).unwrap();
        }
        write!(text, " p = {}", fmt_vec(&pt.p)).unwrap();
        if !pt.psi.is_empty() {
            write!(text, "  Psi = {}  Phi = {}", fmt_vec(&pt.psi), fmt_vec(&pt.phi)).unwrap();
        }
        writeln!(text, "  H0 = {}", pt.h0).unwrap();
    }
    out.report("analyze", &text, &report)?;
    Ok(0)
}
