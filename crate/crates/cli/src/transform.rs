use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, EXIT_DOMAIN, EXIT_SOLVER};
use crate::problem::Problem;
use crate::Output;

/// One swept or fixed axis.
#[derive(Debug, Clone, PartialEq)]
struct Axis {
    name: String,
    values: Vec<f64>,
}

fn parse_number(s: &str, spec: &str) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::problem(format!("bad number `{s}` in `{spec}`")))
}

fn parse_grid(spec: &str) -> Result<Axis, CliError> {
    let (name, range) = spec
        .split_once('=')
        .ok_or_else(|| CliError::problem(format!("grid `{spec}` must look like name=lo:hi:count")))?;
    let parts: Vec<&str> = range.split(':').collect();
    let [lo, hi, count] = parts[..] else {
        return Err(CliError::problem(format!("grid `{spec}` must look like name=lo:hi:count")));
    };
    let (lo, hi) = (parse_number(lo, spec)?, parse_number(hi, spec)?);
    let count: usize = count
        .trim()
        .parse()
        .ok()
        .filter(|&c| c > 0)
        .ok_or_else(|| CliError::problem(format!("grid `{spec}` needs a positive count")))?;
    let values = if count == 1 {
        vec![lo]
    } else {
        (0..count)
            .map(|i| if i + 1 == count { hi } else { lo + (hi - lo) * i as f64 / (count - 1) as f64 })
            .collect()
    };
    Ok(Axis {
        name: name.trim().to_string(),
        values,
    })
}

fn parse_point(spec: &str) -> Result<Axis, CliError> {
    let (name, value) = spec
        .split_once('=')
        .ok_or_else(|| CliError::problem(format!("point `{spec}` must look like name=value")))?;
    Ok(Axis {
        name: name.trim().to_string(),
        values: vec![parse_number(value, spec)?],
    })
}

#[derive(Serialize)]
struct Row {
    q: Vec<f64>,
    p: Vec<f64>,
    v2: Vec<f64>,
    h: Option<f64>,
    h0: Option<f64>,
    phi: Option<Vec<f64>>,
    status: String,
}

pub fn run(path: &Path, seed: Option<u64>, grids: &[String], points: &[String], out: &Output) -> Result<u8, CliError> {
    let problem = Problem::load(path, seed)?;
    let h = &problem.mixed;
    let sys = h.system();
    let part = problem.partition();
    let n = sys.n();
    let qd = sys.q_dim();

    let q_names: Vec<String> = (1..=qd).map(|i| format!("q{i}")).collect();
    let p_names: Vec<String> = (1..=n).map(|i| format!("p{i}")).collect();
    let v2_names = problem.velocity_names(&part.nonregular);

    let mut axes = Vec::new();
    for g in grids {
        axes.push(parse_grid(g)?);
    }
    for p in points {
        axes.push(parse_point(p)?);
    }
    for (i, a) in axes.iter().enumerate() {
        if !q_names.contains(&a.name) && !p_names.contains(&a.name) && !v2_names.contains(&a.name) {
            return Err(CliError::problem(format!(
                "unknown transform axis `{}` (expected one of {:?})",
                a.name,
                q_names.iter().chain(&p_names).chain(&v2_names).collect::<Vec<_>>()
            )));
        }
        if axes[..i].iter().any(|b| b.name == a.name) {
            return Err(CliError::problem(format!("axis `{}` given twice", a.name)));
        }
    }

    let q_box = sys.q_domain();
    let v_box = sys.v_domain();
    let base_q = q_box.center();
    let base_v2 = h.default_probe();

    // cartesian product, first axis slowest
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    let mut rows = Vec::with_capacity(total);
    let (mut any_domain, mut any_solver) = (false, false);
    for flat in 0..total {
        let mut q = base_q.clone();
        let mut p = vec![0.0; n];
        let mut v2 = base_v2.clone();
        let mut rem = flat;
        for a in axes.iter().rev() {
            let val = a.values[rem % a.values.len()];
            rem /= a.values.len();
            if let Some(i) = q_names.iter().position(|s| *s == a.name) {
                q[i] = val;
            } else if let Some(i) = p_names.iter().position(|s| *s == a.name) {
                p[i] = val;
            } else if let Some(i) = v2_names.iter().position(|s| *s == a.name) {
                v2[i] = val;
            }
        }
        let in_box = q_box.contains(&q)
            && part.nonregular.iter().zip(&v2).all(|(&i, x)| {
                let (lo, hi) = (v_box.lower()[i], v_box.upper()[i]);
                lo <= *x && *x <= hi
            });
        let mut row = Row {
            q,
            p,
            v2,
            h: None,
            h0: None,
            phi: None,
            status: "ok".into(),
        };
        if !in_box {
            row.status = "out_of_domain".into();
            any_domain = true;
        } else {
            let p1: Vec<f64> = part.regular.iter().map(|&i| row.p[i]).collect();
            let res = (|| {
                Ok::<_, clairaut_core::SolveError>((
                    h.mixed_hamiltonian(&row.q, &row.p, &row.v2)?,
                    h.h_zero(&row.q, &p1)?,
                    h.phi(&row.q, &row.p)?,
                ))
            })();
            match res {
                Ok((hv, h0, phi)) => {
                    row.h = Some(hv);
                    row.h0 = Some(h0);
                    row.phi = Some(phi);
                }
                Err(e) => {
                    row.status = format!("solver_failure: {e}");
                    any_solver = true;
                }
            }
        }
        rows.push(row);
    }

    let m = part.nonregular.len();
    let body = if out.json {
        serde_json::to_string_pretty(&serde_json::json!({
            "seed": problem.seed,
            "rank_tolerance": part.rank_tolerance,
            "newton_tolerance": h.solver().settings.tol,
            "rows": rows,
        }))
        .expect("rows serialize")
            + "\n"
    } else {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = q_names.iter().chain(&p_names).chain(&v2_names).cloned().collect();
        header.extend(["H".to_string(), "H0".to_string()]);
        header.extend((1..=m).map(|i| format!("phi_{i}")));
        header.push("status".into());
        w.write_record(&header).map_err(|e| CliError::new(crate::error::EXIT_IO, e.to_string()))?;
        let num = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &rows {
            let mut rec: Vec<String> = r.q.iter().chain(&r.p).chain(&r.v2).map(|x| x.to_string()).collect();
            rec.push(num(r.h));
            rec.push(num(r.h0));
            for a in 0..m {
                rec.push(num(r.phi.as_ref().map(|f| f[a])));
            }
            rec.push(r.status.clone());
            w.write_record(&rec).map_err(|e| CliError::new(crate::error::EXIT_IO, e.to_string()))?;
        }
        String::from_utf8(w.into_inner().map_err(|e| CliError::new(crate::error::EXIT_IO, e.to_string()))?)
            .expect("csv is utf-8")
    };
    match &out.dir {
        Some(d) => {
            out.ensure_dir()?;
            let name = if out.json { "transform.json" } else { "transform.csv" };
            std::fs::write(d.join(name), &body)?;
        }
        None => print!("{body}"),
    }
    eprintln!(
        "transform: {} rows, seed {}, rank tolerance {:e}, Newton tolerance {:e}",
        rows.len(),
        problem.seed,
        part.rank_tolerance,
        h.solver().settings.tol
    );
    if any_domain {
        eprintln!("error: some grid points lie outside the domain box");
        return Ok(EXIT_DOMAIN);
    }
    if any_solver {
        eprintln!("error: the envelope solve failed at some grid points");
        return Ok(EXIT_SOLVER);
    }
    Ok(0)
}
