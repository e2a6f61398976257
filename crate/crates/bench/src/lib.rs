//! Fixtures shared by the criterion benchmarks.

use tdcfdr_core::montecarlo::{generate_trial, Level, Redundancy, Scenario, ScoreModel};
use tdcfdr_core::{ControlPolicy, EstimatorConfig, RankedList};

/// A fig-2 style scenario with `n_correct` correct identifications.
pub fn scenario(n_correct: usize, trials: u64) -> Scenario {
    Scenario {
        id: "bench".into(),
        n_correct,
        n_incorrect_peptides: 200,
        redundancy: Redundancy::Empirical { mean: 1.837 },
        r: 1.0,
        score_model: ScoreModel::CorrectShifted { separation: 0.5 },
        level: Level::Peptide,
        policy: ControlPolicy::tdc(0.05, EstimatorConfig::plus_one()).expect("valid alpha"),
        trials,
        seed: 1,
        sweep_n_correct: None,
    }
}

pub fn ranked_list(n_correct: usize) -> RankedList {
    generate_trial(&scenario(n_correct, 1), 0).expect("valid scenario")
}
