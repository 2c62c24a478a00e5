//! Per-episode traces shared by all learners.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// 1-based episode index.
    pub episode: usize,
    /// `(V̄₁ − V̲₁)(s₁)` for the optimistic learners, `Ṽ₁(s₁)` for exploration.
    pub optimistic_gap: f64,
    /// Running minimum `Δ` after this episode.
    pub best_gap: f64,
    /// Exact gap of this episode's policy, filled at evaluation points only.
    pub exact_gap: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub seed: u64,
    pub records: Vec<EpisodeRecord>,
    /// Episode whose policy (or model snapshot) is the output.
    pub output_episode: usize,
    /// Equilibrium solves performed and the largest certificate residual seen.
    pub solver_calls: usize,
    pub max_certificate_residual: f64,
}

impl RunLog {
    pub fn new(seed: u64) -> Self {
        RunLog { seed, ..Default::default() }
    }

    /// `Σ_{k ≤ K} optimistic_gap_k`.
    pub fn cumulative_gap(&self, episodes: usize) -> f64 {
        self.records.iter().take(episodes).map(|r| r.optimistic_gap).sum()
    }

    pub fn final_best_gap(&self) -> Option<f64> {
        self.records.last().map(|r| r.best_gap)
    }

    pub fn record_pass(&mut self, solves: usize, max_residual: f64) {
        self.solver_calls += solves;
        self.max_certificate_residual = self.max_certificate_residual.max(max_residual);
    }
}
