//! Rank partition of the velocity Hessian.
//!
//! The Hessian `W_ij = d2L/dv_i dv_j` is sampled over the domain box. Its
//! numerical rank `k` must be the same at every sample, and so must its
//! inertia (counts of positive and negative eigenvalues): eigenvalues of a
//! symmetric matrix depend continuously on the entries, so two samples with
//! different inertia force a rank drop somewhere on the segment joining them.
//! A regular index set of size `k` is then chosen so that `W` restricted to
//! it is nonsingular at every sample.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::expr::EvalError;
use crate::linalg::{sigma_max, sigma_min, singular_values, submatrix};
use crate::system::LagrangianSystem;

pub const DEFAULT_RANK_TOL: f64 = 1e-9;
pub const DEFAULT_SAMPLES: usize = 64;

/// Relative gap below which two pivot candidates count as tied.
const PIVOT_TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
}

impl Inertia {
    pub fn rank(&self) -> usize {
        self.positive + self.negative
    }
}

/// One sampled point and what the Hessian looked like there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankSample {
    pub index: usize,
    /// `(q, v)` in variable-table order.
    pub point: Vec<f64>,
    pub rank: usize,
    pub inertia: Inertia,
}

#[derive(Debug, thiserror::Error)]
pub enum PartitionError {
    #[error(
        "Hessian rank or signature is not constant: sample {} at {:?} has rank {} (+{}/-{}), sample {} at {:?} has rank {} (+{}/-{})",
        .first.index, .first.point, .first.rank, .first.inertia.positive, .first.inertia.negative,
        .second.index, .second.point, .second.rank, .second.inertia.positive, .second.inertia.negative
    )]
    RankNotConstant {
        first: Box<RankSample>,
        second: Box<RankSample>,
    },
    #[error("regular block {regular:?} is singular at sample {sample} ({point:?}): smallest singular value {sigma_min:e}")]
    NoValidMinor {
        regular: Vec<usize>,
        sample: usize,
        point: Vec<f64>,
        sigma_min: f64,
    },
    #[error("at least one sample is required")]
    NoSamples,
    #[error("invalid regular index set {0:?}")]
    InvalidIndexSet(Vec<usize>),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSettings {
    pub samples: usize,
    pub seed: u64,
    pub rank_tol: f64,
}

impl Default for PartitionSettings {
    fn default() -> Self {
        PartitionSettings {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

/// Split of velocity indices (0-based) into regular and nonregular blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HessianPartition {
    pub n: usize,
    pub k: usize,
    /// `regular` followed by `nonregular`.
    pub sigma: Vec<usize>,
    pub regular: Vec<usize>,
    pub nonregular: Vec<usize>,
    pub rank_tolerance: f64,
    pub samples_checked: usize,
    /// Smallest and largest `|det W11|` over the checked samples.
    pub det_range: (f64, f64),
}

impl HessianPartition {
    /// Partition with an explicitly chosen regular set, unchecked.
    pub fn from_regular(n: usize, regular: &[usize], rank_tol: f64) -> Result<Self, PartitionError> {
        let mut reg = regular.to_vec();
        reg.sort_unstable();
        reg.dedup();
        if reg.len() != regular.len() || reg.iter().any(|&i| i >= n) {
            return Err(PartitionError::InvalidIndexSet(regular.to_vec()));
        }
        let nonregular: Vec<usize> = (0..n).filter(|i| !reg.contains(i)).collect();
        Ok(HessianPartition {
            n,
            k: reg.len(),
            sigma: reg.iter().chain(&nonregular).copied().collect(),
            regular: reg,
            nonregular,
            rank_tolerance: rank_tol,
            samples_checked: 0,
            det_range: (f64::NAN, f64::NAN),
        })
    }

    pub fn is_regular(&self) -> bool {
        self.k == self.n
    }

    pub fn w11(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        submatrix(w, &self.regular, &self.regular)
    }

    pub fn w12(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        submatrix(w, &self.regular, &self.nonregular)
    }

    pub fn w21(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        submatrix(w, &self.nonregular, &self.regular)
    }

    pub fn w22(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        submatrix(w, &self.nonregular, &self.nonregular)
    }

    /// `W` with rows and columns reordered by `sigma`.
    pub fn permuted(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        submatrix(w, &self.sigma, &self.sigma)
    }

    /// Scatters block vectors back to a full vector in original order.
    pub fn merge(&self, regular: &[f64], nonregular: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (&i, &x) in self.regular.iter().zip(regular) {
            out[i] = x;
        }
        for (&i, &x) in self.nonregular.iter().zip(nonregular) {
            out[i] = x;
        }
        out
    }

    /// Whether `W11` counts as nonsingular relative to the scale of `W`.
    pub fn minor_is_regular(&self, w: &DMatrix<f64>) -> bool {
        self.k == 0 || sigma_min(&self.w11(w)) > self.rank_tolerance * sigma_max(w)
    }
}

/// Velocity Hessian at `(q, v)`.
pub fn hessian(sys: &LagrangianSystem, q: &[f64], v: &[f64]) -> Result<DMatrix<f64>, EvalError> {
    Ok(sys.velocity_dual(q, v)?.hessian())
}

/// Count of singular values above `rel_tol` times the largest one.
pub fn numerical_rank(w: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(w);
    let Some(&top) = s.first() else { return 0 };
    s.iter().filter(|&&x| x > rel_tol * top).count()
}

pub fn inertia(w: &DMatrix<f64>, rel_tol: f64) -> Inertia {
    if w.nrows() == 0 {
        return Inertia {
            positive: 0,
            negative: 0,
        };
    }
    let eig = SymmetricEigen::new(w.clone()).eigenvalues;
    let top = eig.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let cut = rel_tol * top;
    Inertia {
        positive: eig.iter().filter(|&&x| x > cut).count(),
        negative: eig.iter().filter(|&&x| x < -cut).count(),
    }
}

pub fn partition_indices(
    sys: &LagrangianSystem,
    num_samples: usize,
    seed: u64,
) -> Result<HessianPartition, PartitionError> {
    partition_with(
        sys,
        PartitionSettings {
            samples: num_samples,
            seed,
            rank_tol: DEFAULT_RANK_TOL,
        },
    )
}

pub fn partition_with(
    sys: &LagrangianSystem,
    settings: PartitionSettings,
) -> Result<HessianPartition, PartitionError> {
    let samples = sample_hessians(sys, settings)?;
    let (first, rest) = samples.split_first().ok_or(PartitionError::NoSamples)?;
    for s in rest {
        if s.info.rank != first.info.rank || s.info.inertia != first.info.inertia {
            return Err(PartitionError::RankNotConstant {
                first: Box::new(first.info.clone()),
                second: Box::new(s.info.clone()),
            });
        }
    }
    let k = first.info.rank;
    let n = sys.n();

    let mut avg = DMatrix::zeros(n, n);
    for s in &samples {
        avg += &s.w;
    }
    avg /= samples.len() as f64;

    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..n).filter(|j| !chosen.contains(j)) {
            let mut cand = chosen.clone();
            cand.push(j);
            let s = sigma_min(&submatrix(&avg, &cand, &cand));
            let better = match best {
                None => true,
                Some((_, b)) => s > b + PIVOT_TIE * b.abs().max(f64::MIN_POSITIVE),
            };
            if better {
                best = Some((j, s));
            }
        }
        chosen.push(best.expect("k <= n").0);
    }

    let mut partition = HessianPartition::from_regular(n, &chosen, settings.rank_tol)?;
    check_partition(&mut partition, &samples)?;
    Ok(partition)
}

/// Checks a user-chosen regular set against fresh samples.
pub fn validate_partition(
    sys: &LagrangianSystem,
    partition: &mut HessianPartition,
    settings: PartitionSettings,
) -> Result<(), PartitionError> {
    let samples = sample_hessians(sys, settings)?;
    for s in &samples {
        if s.info.rank != partition.k {
            return Err(PartitionError::NoValidMinor {
                regular: partition.regular.clone(),
                sample: s.info.index,
                point: s.info.point.clone(),
                sigma_min: 0.0,
            });
        }
    }
    check_partition(partition, &samples)
}

struct HessianSample {
    info: RankSample,
    w: DMatrix<f64>,
}

fn sample_hessians(
    sys: &LagrangianSystem,
    settings: PartitionSettings,
) -> Result<Vec<HessianSample>, PartitionError> {
    if settings.samples == 0 {
        return Err(PartitionError::NoSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let q_dim = sys.q_dim();
    (0..settings.samples)
        .map(|index| {
            let point = sys.domain().sample(&mut rng);
            let w = hessian(sys, &point[..q_dim], &point[q_dim..])?;
            let info = RankSample {
                index,
                rank: numerical_rank(&w, settings.rank_tol),
                inertia: inertia(&w, settings.rank_tol),
                point,
            };
            Ok(HessianSample { info, w })
        })
        .collect()
}

fn check_partition(
    partition: &mut HessianPartition,
    samples: &[HessianSample],
) -> Result<(), PartitionError> {
    let mut det_lo = f64::INFINITY;
    let mut det_hi = 0.0_f64;
    for s in samples {
        if !partition.minor_is_regular(&s.w) {
            return Err(PartitionError::NoValidMinor {
                regular: partition.regular.clone(),
                sample: s.info.index,
                point: s.info.point.clone(),
                sigma_min: sigma_min(&partition.w11(&s.w)),
            });
        }
        let det = if partition.k == 0 {
            1.0
        } else {
            partition.w11(&s.w).determinant().abs()
        };
        det_lo = det_lo.min(det);
        det_hi = det_hi.max(det);
    }
    partition.samples_checked = samples.len();
    partition.det_range = (det_lo, det_hi);
    Ok(())
}
