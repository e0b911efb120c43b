//! Direct iteration of the learning recursion `x_{j+1} = M·x_j`.
//!
//! Transients can grow by hundreds of orders of magnitude before decaying,
//! so the vector is renormalized after every step and only `ln ‖x_j‖` is
//! kept.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{IlcError, Result};
use crate::lifted::{top_singular_pair, LiftedOperators};

/// Default iteration budget.
pub const DEFAULT_ITERATIONS: usize = 800;

/// Default seed for the pseudo-random initial vectors.
pub const DEFAULT_SEED: u64 = 20_160_517;

/// A step counts as an increase only above this change in `ln ‖x‖`.
pub const INCREASE_TOL: f64 = 1e-12;

/// Log-norm drop recorded per step once the vector is annihilated exactly
/// (larger than the whole `f64` exponent range).
const VANISHED_DROP: f64 = 1500.0;

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    /// `ln ‖x_j‖` for `j = 0..=j_max`.
    pub log_norms: Vec<f64>,
    /// First step index `j` at which `‖x_{j+1}‖ ≤ ‖x_j‖`.
    pub mc_start: Option<usize>,
    /// First step index after `mc_start` at which the norm grows again.
    pub mc_stop: Option<usize>,
    /// `log10(‖x_J‖/‖x_0‖)`; negative means converged.
    pub ac_log_ratio: f64,
}

impl IterationTrace {
    /// Monotone from the first step on and never increasing afterwards.
    pub fn is_monotone(&self) -> bool {
        self.mc_start == Some(0) && self.mc_stop.is_none()
    }

    /// Growth somewhere before or after the monotone phase.
    pub fn has_transient(&self) -> bool {
        self.mc_start != Some(0) || self.mc_stop.is_some()
    }

    pub fn first_step_increases(&self) -> bool {
        self.log_norms[1] - self.log_norms[0] > INCREASE_TOL
    }

    /// Largest `log10(‖x_j‖/‖x_0‖)` along the trace.
    pub fn peak_log_ratio(&self) -> f64 {
        let l0 = self.log_norms[0];
        self.log_norms
            .iter()
            .fold(f64::NEG_INFINITY, |acc, l| acc.max(l - l0))
            / std::f64::consts::LN_10
    }
}

/// Runs `j_max` learning iterations from `x0`.
pub fn iterate(ops: &LiftedOperators, x0: &[f64], j_max: usize) -> Result<IterationTrace> {
    if x0.len() != ops.n {
        return Err(IlcError::InvalidParameter {
            name: "x0.len",
            value: x0.len() as f64,
            reason: "must equal the trial length",
        });
    }
    if j_max == 0 {
        return Err(IlcError::InvalidParameter {
            name: "j_max",
            value: 0.0,
            reason: "must be >= 1",
        });
    }
    let norm0 = l2(x0);
    if norm0 == 0.0 || !norm0.is_finite() {
        return Err(IlcError::ZeroInitialVector);
    }

    let mut x: Vec<f64> = x0.iter().map(|v| v / norm0).collect();
    let mut next = vec![0.0; ops.n];
    let mut log_norms = Vec::with_capacity(j_max + 1);
    let mut log_norm = norm0.ln();
    log_norms.push(log_norm);
    let mut vanished = false;
    for _ in 0..j_max {
        if vanished {
            log_norm -= VANISHED_DROP;
            log_norms.push(log_norm);
            continue;
        }
        ops.apply(&x, &mut next);
        let s = l2(&next);
        if s == 0.0 {
            vanished = true;
            log_norm -= VANISHED_DROP;
        } else {
            log_norm += s.ln();
            for (xi, ni) in x.iter_mut().zip(&next) {
                *xi = ni / s;
            }
        }
        log_norms.push(log_norm);
    }

    let increasing = |j: usize| log_norms[j + 1] - log_norms[j] > INCREASE_TOL;
    let mc_start = (0..j_max).find(|&j| !increasing(j));
    let mc_stop = mc_start.and_then(|s| (s + 1..j_max).find(|&j| increasing(j)));
    let ac_log_ratio = (log_norms[j_max] - log_norms[0]) / std::f64::consts::LN_10;
    Ok(IterationTrace {
        log_norms,
        mc_start,
        mc_stop,
        ac_log_ratio,
    })
}

fn l2(x: &[f64]) -> f64 {
    // Scaled sum of squares: the entries can be tiny after renormalization.
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * x.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
}

/// Which initial vectors to iterate from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedSpec {
    /// Right singular vector of `M` for `σ_max`: worst first-step growth.
    pub singular_vector: bool,
    /// `e_0`.
    pub impulse: bool,
    pub ones: bool,
    /// Number of pseudo-random unit vectors.
    pub random: usize,
    pub seed: u64,
}

impl Default for SeedSpec {
    fn default() -> Self {
        Self {
            singular_vector: true,
            impulse: true,
            ones: true,
            random: 4,
            seed: DEFAULT_SEED,
        }
    }
}

impl SeedSpec {
    pub fn impulse_only() -> Self {
        Self {
            singular_vector: false,
            impulse: true,
            ones: false,
            random: 0,
            seed: DEFAULT_SEED,
        }
    }

    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if self.singular_vector {
            parts.push("singular-vector".to_string());
        }
        if self.impulse {
            parts.push("impulse".to_string());
        }
        if self.ones {
            parts.push("ones".to_string());
        }
        if self.random > 0 {
            parts.push(format!("random x{} (seed {})", self.random, self.seed));
        }
        parts.join(", ")
    }

    fn is_empty(&self) -> bool {
        !self.singular_vector && !self.impulse && !self.ones && self.random == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedKind {
    SingularVector,
    Impulse,
    Ones,
    Random(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationVerdict {
    /// Every trace is monotone from the first step.
    pub mc: bool,
    /// Every trace ends below its starting norm.
    pub ac: bool,
    pub traces: Vec<(SeedKind, IterationTrace)>,
    pub seed_info: String,
}

impl IterationVerdict {
    /// The trace with the largest final log ratio.
    pub fn worst(&self) -> &IterationTrace {
        &self
            .traces
            .iter()
            .max_by(|a, b| a.1.ac_log_ratio.total_cmp(&b.1.ac_log_ratio))
            .expect("at least one seed")
            .1
    }

    /// Any trace grows before or after its monotone phase.
    pub fn has_transient(&self) -> bool {
        self.traces.iter().any(|(_, t)| t.has_transient())
    }

    pub fn trace(&self, kind: SeedKind) -> Option<&IterationTrace> {
        self.traces.iter().find(|(k, _)| *k == kind).map(|(_, t)| t)
    }
}

/// Iterates from each seed of the ensemble and combines the verdicts.
pub fn iteration_verdict(ops: &LiftedOperators, j_max: usize, seeds: &SeedSpec) -> Result<IterationVerdict> {
    let singular = if seeds.singular_vector {
        Some(top_singular_pair(&ops.m)?.1)
    } else {
        None
    };
    iteration_verdict_with(ops, j_max, seeds, singular.as_ref())
}

/// As [`iteration_verdict`], reusing an already computed top right singular
/// vector.
pub fn iteration_verdict_with(
    ops: &LiftedOperators,
    j_max: usize,
    seeds: &SeedSpec,
    singular: Option<&DVector<f64>>,
) -> Result<IterationVerdict> {
    if seeds.is_empty() {
        return Err(IlcError::InvalidConfig("seed ensemble is empty".into()));
    }
    let n = ops.n;
    let mut starts: Vec<(SeedKind, Vec<f64>)> = Vec::new();
    if seeds.singular_vector {
        let v = match singular {
            Some(v) => v.clone(),
            None => top_singular_pair(&ops.m)?.1,
        };
        starts.push((SeedKind::SingularVector, v.iter().copied().collect()));
    }
    if seeds.impulse {
        let mut e0 = vec![0.0; n];
        e0[0] = 1.0;
        starts.push((SeedKind::Impulse, e0));
    }
    if seeds.ones {
        starts.push((SeedKind::Ones, vec![1.0; n]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.seed);
    for r in 0..seeds.random {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        starts.push((SeedKind::Random(r), v));
    }

    let traces = starts
        .into_iter()
        .map(|(k, x0)| iterate(ops, &x0, j_max).map(|t| (k, t)))
        .collect::<Result<Vec<_>>>()?;
    let mc = traces.iter().all(|(_, t)| t.is_monotone());
    let ac = traces.iter().all(|(_, t)| t.ac_log_ratio < 0.0);
    Ok(IterationVerdict {
        mc,
        ac,
        traces,
        seed_info: seeds.describe(),
    })
}
