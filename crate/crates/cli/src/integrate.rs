use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use clairaut_core::dynamics::{compare_trajectories, integrate_el, integrate_ham, Comparison, HamOptions};
use clairaut_core::Trajectory;
use serde::Serialize;

use crate::error::{CliError, EXIT_EQUIVALENCE};
use crate::problem::Problem;
use crate::{Method, Output};

#[derive(Serialize)]
struct RunSummary {
    file: String,
    points: usize,
    final_q: Vec<f64>,
    final_p: Vec<f64>,
    max_phi: f64,
    max_el_i2_res: f64,
    max_hs3_res: f64,
}

#[derive(Serialize)]
struct ComparisonReport {
    #[serde(flatten)]
    cmp: Comparison,
    max: f64,
    tol_equiv: f64,
    pass: bool,
}

#[derive(Serialize)]
struct IntegrateReport {
    seed: u64,
    t0: f64,
    t1: f64,
    dt: f64,
    enforce_primary: bool,
    newton_tolerance: f64,
    el: Option<RunSummary>,
    ham: Option<RunSummary>,
    comparison: Option<ComparisonReport>,
}

fn write_trajectory(out: &Output, name: &str, traj: &Trajectory) -> Result<RunSummary, CliError> {
    let path = out.dir_or_cwd().join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    traj.write_csv(&mut w)?;
    Ok(RunSummary {
        file: path.display().to_string(),
        points: traj.len(),
        final_q: traj.last_q().to_vec(),
        final_p: traj.p.last().cloned().unwrap_or_default(),
        max_phi: traj.max_phi(),
        max_el_i2_res: traj.max_el_i2_res(),
        max_hs3_res: traj.max_hs3_res(),
    })
}

pub fn run(path: &Path, seed: Option<u64>, method: Method, out: &Output) -> Result<u8, CliError> {
    let problem = Problem::load(path, seed)?;
    if problem.file.is_function() {
        return Err(CliError::problem("integrate needs a `lagrangian`, not a `function`"));
    }
    let settings = problem
        .file
        .integrate
        .ok_or_else(|| CliError::problem("missing `integrate` section"))?;
    let initial = problem
        .file
        .initial
        .clone()
        .ok_or_else(|| CliError::problem("missing `initial` section"))?;
    let h = &problem.mixed;
    let part = problem.partition();
    let n = h.system().n();
    let gauge = problem.file.gauge(part)?;

    let q0 = initial.q;
    if q0.len() != n {
        return Err(CliError::problem(format!("initial.q needs {n} entries, got {}", q0.len())));
    }
    for (what, v) in [("initial.v", &initial.v), ("initial.p", &initial.p)] {
        if let Some(v) = v {
            if v.len() != n {
                return Err(CliError::problem(format!("{what} needs {n} entries, got {}", v.len())));
            }
        }
    }
    let c2 = gauge.eval(&q0).map_err(|e| CliError::from(clairaut_core::SolveError::from(e)))?;
    let v10: Vec<f64> = match (&initial.v, &initial.p) {
        (Some(v), _) => part.regular.iter().map(|&i| v[i]).collect(),
        (None, Some(p)) => {
            let p1: Vec<f64> = part.regular.iter().map(|&i| p[i]).collect();
            h.solve_envelope(&q0, &p1, &c2)?
        }
        (None, None) => return Err(CliError::problem("initial needs `v` or `p`")),
    };
    if let Some(v) = &initial.v {
        for (a, &i) in part.nonregular.iter().enumerate() {
            if (v[i] - c2[a]).abs() > 1e-12 * (1.0 + c2[a].abs()) {
                eprintln!(
                    "warning: initial {} = {} is replaced by the gauge value {}",
                    h.system().velocity_name(i),
                    v[i],
                    c2[a]
                );
            }
        }
    }
    let p0 = match &initial.p {
        Some(p) => p.clone(),
        None => h.system().velocity_dual(&q0, &part.merge(&v10, &c2)).map_err(clairaut_core::SolveError::from)?.gradient,
    };

    out.ensure_dir()?;
    let span = (settings.t0, settings.t1);
    let el = match method {
        Method::El | Method::Both => Some(integrate_el(h, &gauge, &q0, &v10, span, settings.dt)?),
        Method::Ham => None,
    };
    let ham = match method {
        Method::Ham | Method::Both => {
            let opts = HamOptions {
                enforce_primary: settings.enforce_primary,
                ..HamOptions::default()
            };
            Some(integrate_ham(h, &gauge, &q0, &p0, span, settings.dt, opts)?)
        }
        Method::El => None,
    };
    let tol = problem.file.verify.tol_equiv;
    let comparison = match (&el, &ham) {
        (Some(a), Some(b)) => {
            let cmp = compare_trajectories(a, b)?;
            Some(ComparisonReport {
                cmp,
                max: cmp.max(),
                tol_equiv: tol,
                pass: cmp.passes(tol),
            })
        }
        _ => None,
    };
    let report = IntegrateReport {
        seed: problem.seed,
        t0: settings.t0,
        t1: settings.t1,
        dt: settings.dt,
        enforce_primary: settings.enforce_primary,
        newton_tolerance: h.solver().settings.tol,
        el: el.as_ref().map(|t| write_trajectory(out, "trajectory_el.csv", t)).transpose()?,
        ham: ham.as_ref().map(|t| write_trajectory(out, "trajectory_ham.csv", t)).transpose()?,
        comparison,
    };
    if let Some(c) = &report.comparison {
        let body = serde_json::to_string_pretty(c).expect("comparison serializes") + "\n";
        std::fs::write(out.dir_or_cwd().join("comparison.json"), body)?;
    }

    let mut text = String::new();
    writeln!(
        text,
        "t in [{}, {}], dt = {}, enforce_primary = {}, seed {}, Newton tolerance {:e}",
        report.t0, report.t1, report.dt, report.enforce_primary, report.seed, report.newton_tolerance
    )
    .unwrap();
    for (label, run) in [("euler-lagrange", &report.el), ("hamiltonian", &report.ham)] {
        if let Some(r) = run {
            writeln!(text, "{label}: {} points -> {}", r.points, r.file).unwrap();
            writeln!(text, "  final q = {:?}, final p = {:?}", r.final_q, r.final_p).unwrap();
            writeln!(
                text,
                "  max |Phi| = {:e}, max el_i2_res = {:e}, max hs3_res = {:e}",
                r.max_phi, r.max_el_i2_res, r.max_hs3_res
            )
            .unwrap();
        }
    }
    if let Some(c) = &report.comparison {
        writeln!(
            text,
            "comparison: q {:e}, v {:e}, p1 {:e}; max {:e} vs tol_equiv {:e}: {}",
            c.cmp.q,
            c.cmp.v,
            c.cmp.p1,
            c.max,
            c.tol_equiv,
            if c.pass { "PASS" } else { "FAIL" }
        )
        .unwrap();
    }
    out.report("integrate", &text, &report)?;
    match &report.comparison {
        Some(c) if !c.pass => {
            eprintln!("error: trajectories differ by {:e} (tolerance {:e})", c.max, c.tol_equiv);
            Ok(EXIT_EQUIVALENCE)
        }
        _ => Ok(0),
    }
}
