//! Equations of motion on the Lagrangian and mixed Hamiltonian sides.
//!
//! Nonregular velocities are fixed by a gauge `v2 = C2(q)`. The
//! Euler-Lagrange side integrates `(q, v1)`; the Hamiltonian side integrates
//! `(q, p1)` and rebuilds `p2 = Psi(q, p1) + Phi0` at every step.

mod el;
mod ham;

use std::io::{self, Write};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::clairaut::SolveError;
use crate::expr::{coordinate_variables, EvalError, Expression, ParseError};
use crate::linalg::norm_inf;

pub use el::{el_rhs, integrate_el, ElRhs};
pub use ham::{ham_rhs, integrate_ham, HamOptions, HamRhs, PRIMARY_TOL};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("gauge has {found} functions, expected {expected} (one per nonregular velocity)")]
    GaugeDimension { expected: usize, found: usize },
    #[error("{what} has length {found}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("the system has no coordinates; equations of motion need a Lagrangian")]
    NotLagrangian,
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("time span [{t0}, {t1}] is empty or not finite")]
    InvalidSpan { t0: f64, t1: f64 },
    #[error("integration produced a non-finite state at t = {t}")]
    StepFailure { t: f64 },
    #[error("initial data violate the primary constraints: Phi = {phi:?} (tolerance {tol:e})")]
    PrimaryViolated { phi: Vec<f64>, tol: f64 },
    #[error("time grids differ ({left} vs {right} points)")]
    GridMismatch { left: usize, right: usize },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

impl From<EvalError> for DynamicsError {
    fn from(e: EvalError) -> Self {
        DynamicsError::Solve(e.into())
    }
}

pub(crate) fn check_len(what: &'static str, v: &[f64], expected: usize) -> Result<(), DynamicsError> {
    if v.len() != expected {
        return Err(DynamicsError::Dimension {
            what,
            expected,
            found: v.len(),
        });
    }
    Ok(())
}

/// Functions `C2(q)`, one per nonregular velocity, in nonregular order.
#[derive(Debug, Clone)]
pub struct GaugeChoice {
    n: usize,
    exprs: Vec<Expression>,
}

impl GaugeChoice {
    pub fn new<S: AsRef<str>>(n: usize, sources: &[S]) -> Result<Self, ParseError> {
        let vars = coordinate_variables(n);
        let exprs = sources
            .iter()
            .map(|s| Expression::parse(s.as_ref(), &vars))
            .collect::<Result<_, _>>()?;
        Ok(GaugeChoice { n, exprs })
    }

    pub fn constant(n: usize, values: &[f64]) -> Self {
        let sources: Vec<String> = values.iter().map(|c| format!("{c:e}")).collect();
        GaugeChoice::new(n, &sources).expect("a float literal parses")
    }

    /// Gauge for a system without nonregular velocities.
    pub fn empty(n: usize) -> Self {
        GaugeChoice { n, exprs: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.exprs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exprs.is_empty()
    }

    pub fn expressions(&self) -> &[Expression] {
        &self.exprs
    }

    pub fn eval(&self, q: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.exprs.iter().map(|e| e.eval(q)).collect()
    }

    /// Values and `dC2/dq` as a `len x n` matrix.
    pub fn jet(&self, q: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>), EvalError> {
        let active: Vec<usize> = (0..self.n).collect();
        let mut values = Vec::with_capacity(self.len());
        let mut jac = DMatrix::zeros(self.len(), self.n);
        for (a, e) in self.exprs.iter().enumerate() {
            let d = e.eval_dual2(q, &active)?;
            values.push(d.value);
            for (i, g) in d.gradient.iter().enumerate() {
                jac[(a, i)] = *g;
            }
        }
        Ok((values, jac))
    }

    pub(crate) fn check(&self, n: usize, nonregular: usize) -> Result<(), DynamicsError> {
        if self.n != n || self.len() != nonregular {
            return Err(DynamicsError::GaugeDimension {
                expected: nonregular,
                found: self.len(),
            });
        }
        Ok(())
    }
}

/// Uniform grid from `t0` to `t1` whose last point is exactly `t1`. The
/// step is `dt` when it divides the span (up to rounding), otherwise the
/// nearest smaller step that does.
pub fn time_grid(t0: f64, t1: f64, dt: f64) -> Result<Vec<f64>, DynamicsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(DynamicsError::InvalidSpan { t0, t1 });
    }
    let ratio = (t1 - t0) / dt;
    let steps = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
        ratio.round()
    } else {
        ratio.ceil()
    }
    .max(1.0) as usize;
    let h = (t1 - t0) / steps as f64;
    let mut grid: Vec<f64> = (0..steps).map(|i| t0 + i as f64 * h).collect();
    grid.push(t1);
    Ok(grid)
}

/// Classical fourth-order Runge-Kutta over `grid`, calling `record` at every
/// grid point including the first.
pub(crate) fn rk4<F, R>(grid: &[f64], y0: Vec<f64>, mut f: F, mut record: R) -> Result<(), DynamicsError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, DynamicsError>,
    R: FnMut(f64, &[f64]) -> Result<(), DynamicsError>,
{
    let axpy = |y: &[f64], a: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(y, k)| y + a * k).collect() };
    let mut y = y0;
    record(grid[0], &y)?;
    for w in grid.windows(2) {
        let h = w[1] - w[0];
        let k1 = f(&y)?;
        let k2 = f(&axpy(&y, 0.5 * h, &k1))?;
        let k3 = f(&axpy(&y, 0.5 * h, &k2))?;
        let k4 = f(&axpy(&y, h, &k3))?;
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if y.iter().any(|x| !x.is_finite()) {
            return Err(DynamicsError::StepFailure { t: w[1] });
        }
        record(w[1], &y)?;
    }
    Ok(())
}

/// Sampled solution with diagnostic channels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub n: usize,
    pub regular: Vec<usize>,
    pub times: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    /// Primary constraints `p2 - Psi(q, p1)`.
    pub phi: Vec<Vec<f64>>,
    /// Infinity norm of the nonregular Euler-Lagrange rows.
    pub el_i2_res: Vec<f64>,
    /// Infinity norm of the algebraic `p2` equation.
    pub hs3_res: Vec<f64>,
}

impl Trajectory {
    fn new(n: usize, regular: Vec<usize>, capacity: usize) -> Self {
        Trajectory {
            n,
            regular,
            times: Vec::with_capacity(capacity),
            q: Vec::with_capacity(capacity),
            v: Vec::with_capacity(capacity),
            p: Vec::with_capacity(capacity),
            phi: Vec::with_capacity(capacity),
            el_i2_res: Vec::with_capacity(capacity),
            hs3_res: Vec::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_q(&self) -> &[f64] {
        self.q.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn last_v(&self) -> &[f64] {
        self.v.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn max_phi(&self) -> f64 {
        self.phi.iter().map(|f| norm_inf(f)).fold(0.0, f64::max)
    }

    pub fn max_el_i2_res(&self) -> f64 {
        self.el_i2_res.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_hs3_res(&self) -> f64 {
        self.hs3_res.iter().copied().fold(0.0, f64::max)
    }

    pub fn csv_header(&self) -> String {
        let mut cols = vec!["t".to_string()];
        for prefix in ["q", "v", "p"] {
            cols.extend((1..=self.n).map(|i| format!("{prefix}{i}")));
        }
        cols.extend((1..=self.n - self.regular.len()).map(|i| format!("phi_{i}")));
        cols.push("el_i2_res".into());
        cols.push("hs3_res".into());
        cols.join(",")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", self.csv_header())?;
        for i in 0..self.len() {
            let row = std::iter::once(self.times[i])
                .chain(self.q[i].iter().copied())
                .chain(self.v[i].iter().copied())
                .chain(self.p[i].iter().copied())
                .chain(self.phi[i].iter().copied())
                .chain([self.el_i2_res[i], self.hs3_res[i]]);
            let cells: Vec<String> = row.map(|x| format!("{x:.16e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Largest discrepancies between two trajectories on the same grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub q: f64,
    pub v: f64,
    pub p1: f64,
    pub points: usize,
}

impl Comparison {
    pub fn max(&self) -> f64 {
        self.q.max(self.v).max(self.p1)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

pub fn compare_trajectories(a: &Trajectory, b: &Trajectory) -> Result<Comparison, DynamicsError> {
    let mismatch = DynamicsError::GridMismatch {
        left: a.len(),
        right: b.len(),
    };
    if a.len() != b.len() || a.n != b.n || a.regular != b.regular {
        return Err(mismatch);
    }
    let span = a.times.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
    if a
        .times
        .iter()
        .zip(&b.times)
        .any(|(s, t)| (s - t).abs() > 1e-12 * (1.0 + span))
    {
        return Err(mismatch);
    }
    let diff = |x: &[Vec<f64>], y: &[Vec<f64>], idx: Option<&[usize]>| -> f64 {
        x.iter()
            .zip(y)
            .map(|(u, w)| match idx {
                Some(idx) => idx.iter().map(|&i| (u[i] - w[i]).abs()).fold(0.0, f64::max),
                None => u.iter().zip(w).map(|(s, t)| (s - t).abs()).fold(0.0, f64::max),
            })
            .fold(0.0, f64::max)
    };
    Ok(Comparison {
        q: diff(&a.q, &b.q, None),
        v: diff(&a.v, &b.v, None),
        p1: diff(&a.p, &b.p, Some(&a.regular)),
        points: a.len(),
    })
}
