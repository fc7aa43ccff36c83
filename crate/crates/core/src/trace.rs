//! Solver output shared by the random-walk and reference solvers.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::Scales;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    RandomWalk,
    Reference,
}

impl SolverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::RandomWalk => "random_walk",
            SolverKind::Reference => "reference",
        }
    }
}

/// Concentration profile at one time slice, already normalized by `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    /// Time the snapshot was asked for.
    pub requested: f64,
    /// Time of the slice actually stored.
    pub tau: f64,
    /// Front position at `tau`.
    pub h: f64,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
}

/// Summary of every evaluated reaction probability.
///
/// `histogram[0]` counts `P_b < 0`, `histogram[1..=10]` split `[0, 1)` into
/// tenths and `histogram[11]` counts `P_b >= 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PbStats {
    pub evaluations: u64,
    pub min: f64,
    pub max: f64,
    pub histogram: [u64; 12],
}

impl Default for PbStats {
    fn default() -> Self {
        PbStats {
            evaluations: 0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            histogram: [0; 12],
        }
    }
}

impl PbStats {
    #[inline]
    pub fn record(&mut self, pb: f64) {
        self.evaluations += 1;
        self.min = self.min.min(pb);
        self.max = self.max.max(pb);
        let bin = if pb < 0.0 {
            0
        } else if pb >= 1.0 {
            11
        } else {
            1 + ((pb * 10.0) as usize).min(9)
        };
        self.histogram[bin] += 1;
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub pb: PbStats,
    /// Walkers that attempted to step past the node next to the front.
    pub front_arrivals: u64,
    pub adsorbed: u64,
    pub violators: u64,
    /// Largest single-walker front increment applied.
    pub max_increment: f64,
    /// Largest evaluated `counts_at_k − σ̃` (stored-count units).
    pub realized_u_max: f64,
    /// Whether the step-size condition holds for `realized_u_max`.
    pub realized_condition_ok: bool,
    pub injected_left: u64,
    pub absorbed_left: u64,
    pub steps: usize,
    /// The front reached the node before the far end of the domain.
    pub reached_end: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionTrace {
    pub solver: SolverKind,
    /// Recorded times; front, mass and left-boundary series share this axis.
    pub tau: Vec<f64>,
    pub front: Vec<f64>,
    pub mass: Vec<f64>,
    /// Concentration at the fixed boundary.
    pub left: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: Diagnostics,
    pub wall_time: f64,
    /// Final time of the problem that produced the trace.
    pub final_time: f64,
    pub seed: Option<u64>,
    /// Hash identifying the physical problem (problem and left boundary).
    pub problem_hash: String,
    pub config_echo: String,
    pub scales: Option<Scales>,
    pub dimensional: bool,
}

impl SolutionTrace {
    pub fn final_front(&self) -> f64 {
        *self.front.last().expect("trace holds at least the initial state")
    }

    pub fn final_mass(&self) -> f64 {
        *self.mass.last().expect("trace holds at least the initial state")
    }

    pub fn final_tau(&self) -> f64 {
        *self.tau.last().expect("trace holds at least the initial state")
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.tau).collect()
    }

    /// Index of the recorded time nearest to `tau`.
    pub fn nearest_index(&self, tau: f64) -> usize {
        let idx = self.tau.partition_point(|&t| t < tau);
        if idx == 0 {
            0
        } else if idx == self.tau.len() {
            idx - 1
        } else if (self.tau[idx] - tau).abs() < (tau - self.tau[idx - 1]).abs() {
            idx
        } else {
            idx - 1
        }
    }
}

/// Hex SHA-256 of `text`.
pub fn digest(text: &str) -> String {
    let hash = Sha256::digest(text.as_bytes());
    hash.iter().map(|b| format!("{b:02x}")).collect()
}
