//! Executable checks of the scheme's estimates: energy audits of
//! trajectories, the interpolant identity, randomized geometry suites, the
//! single-sweep equivalence check and convergence studies.
//!
//! Randomized suites draw every trial from its own RNG stream keyed by
//! `(seed, trial)`, so reports do not depend on trial order.

mod convergence;
mod energy;
mod equivalence;
mod geometry;
pub mod sampling;

pub use convergence::{
    convergence_study, initial_state, ConvergenceAxis, ConvergenceRow, ConvergenceTable, StudySetup,
};
pub use energy::{
    energy_audit, interpolant_gap, interpolant_gap_formula, interpolant_gap_of, AuditViolation, EnergyReport,
    EnergyStep,
};
pub use equivalence::equivalence_test;
pub use geometry::{curvature_suite, projection_regularity_suite, tangency_suite};

/// Relative slack granted to a bound before a sample counts as a violation.
pub const BOUND_SLACK_REL: f64 = 1e-9;

/// Worst-case record of one property over all trials.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyStat {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    /// Largest `(observed - round_off)^+ / bound`.
    pub worst_ratio: f64,
    /// Observed value at the worst ratio.
    pub worst_observed: f64,
    /// Trial index at the worst ratio.
    pub worst_trial: usize,
}

impl PropertyStat {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            trials: 0,
            violations: 0,
            worst_ratio: 0.0,
            worst_observed: 0.0,
            worst_trial: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub seed: u64,
    pub stats: Vec<PropertyStat>,
}

impl PropertyReport {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            stats: Vec::new(),
        }
    }

    /// Records `observed <= bound` for `trial`. `round_off` is an absolute
    /// allowance for bounds that vanish (e.g. `v = u` in curvature bounds).
    pub fn record(&mut self, name: &str, trial: usize, observed: f64, bound: f64, round_off: f64) {
        let idx = match self.stats.iter().position(|s| s.name == name) {
            Some(i) => i,
            None => {
                self.stats.push(PropertyStat::new(name));
                self.stats.len() - 1
            }
        };
        let stat = &mut self.stats[idx];
        stat.trials += 1;
        // the round-off allowance is subtracted so that passing samples have
        // ratio <= 1 + BOUND_SLACK_REL
        let excess = (observed - round_off).max(0.0);
        let ratio = if bound > 0.0 {
            excess / bound
        } else if excess == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let violated = !(observed <= bound * (1.0 + BOUND_SLACK_REL) + round_off);
        if violated {
            stat.violations += 1;
        }
        if ratio > stat.worst_ratio || ratio.is_nan() || (stat.trials == 1 && ratio >= stat.worst_ratio) {
            stat.worst_ratio = ratio;
            stat.worst_observed = observed;
            stat.worst_trial = trial;
        }
    }

    pub fn stat(&self, name: &str) -> Option<&PropertyStat> {
        self.stats.iter().find(|s| s.name == name)
    }

    pub fn total_violations(&self) -> usize {
        self.stats.iter().map(|s| s.violations).sum()
    }

    pub fn passed(&self) -> bool {
        !self.stats.is_empty() && self.total_violations() == 0
    }

    /// Merges another report (counts add, worst cases take the maximum).
    pub fn merge(&mut self, other: &PropertyReport) {
        for s in &other.stats {
            match self.stats.iter_mut().find(|x| x.name == s.name) {
                Some(x) => {
                    x.trials += s.trials;
                    x.violations += s.violations;
                    if s.worst_ratio > x.worst_ratio {
                        x.worst_ratio = s.worst_ratio;
                        x.worst_observed = s.worst_observed;
                        x.worst_trial = s.worst_trial;
                    }
                }
                None => self.stats.push(s.clone()),
            }
        }
    }
}
