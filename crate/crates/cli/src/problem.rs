//! Problem files.
//!
//! ```json
//! {
//!   "n": 2,
//!   "lagrangian": "0.5*(v1+v2)^2",
//!   "domain": {"q1": [-1, 1], "v2": [-2, 2]},
//!   "gauge": {"v2": "q1"},
//!   "initial": {"q": [0, 0], "v": [0.8, 0]},
//!   "integrate": {"t0": 0, "t1": 10, "dt": 0.001, "enforce_primary": false},
//!   "verify": {"samples": 200, "seed": 0, "tol_residual": 1e-6,
//!              "tol_involution": 1e-7, "tol_equiv": 1e-6}
//! }
//! ```
//!
//! `function` may replace `lagrangian` to transform a plain `F(x1..xn)`.
//! Axes missing from `domain` default to `[-1, 1]`.

use std::collections::BTreeMap;
use std::path::Path;

use clairaut_core::dynamics::GaugeChoice;
use clairaut_core::partition::{partition_with, PartitionSettings};
use clairaut_core::{DomainBox, HessianPartition, LagrangianSystem, MixedHamiltonian};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    #[serde(default)]
    pub lagrangian: Option<String>,
    #[serde(default)]
    pub function: Option<String>,
    #[serde(default)]
    pub domain: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    pub gauge: BTreeMap<String, String>,
    #[serde(default)]
    pub initial: Option<Initial>,
    #[serde(default)]
    pub integrate: Option<IntegrateSettings>,
    #[serde(default)]
    pub verify: VerifySettings,
    /// Phase points reported by `analyze`.
    #[serde(default)]
    pub points: Vec<PhaseInput>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Initial {
    pub q: Vec<f64>,
    #[serde(default)]
    pub v: Option<Vec<f64>>,
    #[serde(default)]
    pub p: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrateSettings {
    #[serde(default)]
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    #[serde(default)]
    pub enforce_primary: bool,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySettings {
    pub samples: usize,
    pub seed: u64,
    pub tol_residual: f64,
    pub tol_involution: f64,
    pub tol_equiv: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            samples: 200,
            seed: 0,
            tol_residual: 1e-6,
            tol_involution: 1e-7,
            tol_equiv: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseInput {
    #[serde(default)]
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

/// A loaded problem with its partition.
pub struct Problem {
    pub file: ProblemFile,
    pub seed: u64,
    pub mixed: MixedHamiltonian,
}

impl ProblemFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::problem(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let file: ProblemFile =
            serde_json::from_str(text).map_err(|e| CliError::problem(format!("invalid problem file: {e}")))?;
        if file.n == 0 {
            return Err(CliError::problem("n must be positive"));
        }
        Ok(file)
    }

    pub fn is_function(&self) -> bool {
        self.function.is_some()
    }

    pub fn source(&self) -> Result<&str, CliError> {
        match (&self.lagrangian, &self.function) {
            (Some(l), None) => Ok(l),
            (None, Some(f)) => Ok(f),
            (Some(_), Some(_)) => Err(CliError::problem("give either `lagrangian` or `function`, not both")),
            (None, None) => Err(CliError::problem("missing `lagrangian`")),
        }
    }

    /// Axis names in domain order.
    pub fn axes(&self) -> Vec<String> {
        if self.is_function() {
            (1..=self.n).map(|i| format!("x{i}")).collect()
        } else {
            ["q", "v"]
                .iter()
                .flat_map(|p| (1..=self.n).map(move |i| format!("{p}{i}")))
                .collect()
        }
    }

    pub fn domain_box(&self) -> Result<DomainBox, CliError> {
        let axes = self.axes();
        if let Some(bad) = self.domain.keys().find(|k| !axes.contains(k)) {
            return Err(CliError::problem(format!("unknown domain axis `{bad}`")));
        }
        let intervals: Vec<(f64, f64)> = axes
            .iter()
            .map(|a| self.domain.get(a).map_or((-1.0, 1.0), |[lo, hi]| (*lo, *hi)))
            .collect();
        DomainBox::new(&intervals).map_err(|e| {
            let msg = e.to_string();
            // report the axis by name rather than position
            match intervals.iter().position(|(lo, hi)| !(lo < hi && lo.is_finite() && hi.is_finite())) {
                Some(i) => CliError::problem(format!("domain axis `{}` is empty or not finite", axes[i])),
                None => CliError::problem(msg),
            }
        })
    }

    pub fn system(&self) -> Result<LagrangianSystem, CliError> {
        let domain = self.domain_box()?;
        let source = self.source()?;
        let sys = if self.is_function() {
            LagrangianSystem::function(self.n, source, domain)
        } else {
            LagrangianSystem::new(self.n, source, domain)
        };
        sys.map_err(|e| CliError::problem(e.to_string()))
    }

    /// Gauge functions ordered like the nonregular indices.
    pub fn gauge(&self, partition: &HessianPartition) -> Result<GaugeChoice, CliError> {
        let expected: Vec<String> = partition.nonregular.iter().map(|i| format!("v{}", i + 1)).collect();
        let mut given: Vec<&String> = self.gauge.keys().collect();
        given.sort();
        let mut want: Vec<&String> = expected.iter().collect();
        want.sort();
        if given != want {
            return Err(CliError::problem(format!(
                "gauge must define exactly the nonregular velocities {expected:?}, got {:?}",
                self.gauge.keys().collect::<Vec<_>>()
            )));
        }
        let sources: Vec<&str> = expected.iter().map(|k| self.gauge[k].as_str()).collect();
        GaugeChoice::new(self.n, &sources).map_err(|e| CliError::problem(format!("gauge: {e}")))
    }
}

impl Problem {
    pub fn load(path: &Path, seed: Option<u64>) -> Result<Self, CliError> {
        let file = ProblemFile::read(path)?;
        Self::from_file(file, seed)
    }

    pub fn from_file(file: ProblemFile, seed: Option<u64>) -> Result<Self, CliError> {
        let seed = seed.unwrap_or(file.verify.seed);
        let system = file.system()?;
        let partition = partition_with(
            &system,
            PartitionSettings {
                seed,
                ..PartitionSettings::default()
            },
        )?;
        Ok(Problem {
            file,
            seed,
            mixed: MixedHamiltonian::new(system, partition),
        })
    }

    pub fn partition(&self) -> &HessianPartition {
        self.mixed.partition()
    }

    pub fn velocity_names(&self, idx: &[usize]) -> Vec<String> {
        idx.iter().map(|&i| self.mixed.system().velocity_name(i).to_string()).collect()
    }
}
