//! Seeded synthetic experiments: generate identification lists with known
//! truth, filter them, and average the false discovery proportion.
//!
//! Every trial draws from its own ChaCha8 stream (key from the scenario seed,
//! stream number = trial index), and outcomes are aggregated in trial order,
//! so results do not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{next_below_is_decoy, select, ControlPolicy, Method};
use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::psm::{rank, rank_order, CountProfile, Identification, Origin, RankedList, Truth};

pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64(seed), stream = trial index";

const BATCH: u64 = 512;

/// Spectra per incorrect peptide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Redundancy {
    Constant(u32),
    /// `1 + Geometric(1/mean)`, which has the given mean.
    Empirical {
        mean: f64,
    },
}

impl Default for Redundancy {
    fn default() -> Self {
        Redundancy::Constant(1)
    }
}

impl Redundancy {
    pub fn mean(&self) -> f64 {
        match *self {
            Redundancy::Constant(k) => k as f64,
            Redundancy::Empirical { mean } => mean,
        }
    }
}

/// How scores are drawn. Incorrect identifications always score U(0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScoreModel {
    /// Correct identifications score U(s, 1 + s).
    CorrectShifted { separation: f64 },
    /// Correct identifications score U(0, 1) as well.
    #[default]
    Interleaved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    #[default]
    Peptide,
    Spectrum,
}

impl Level {
    pub fn name(&self) -> &'static str {
        match self {
            Level::Peptide => "peptide",
            Level::Spectrum => "spectrum",
        }
    }
}

fn default_id() -> String {
    "scenario".to_string()
}

fn default_r() -> f64 {
    1.0
}

fn default_trials() -> u64 {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_id")]
    pub id: String,
    pub n_correct: usize,
    pub n_incorrect_peptides: usize,
    #[serde(default)]
    pub redundancy: Redundancy,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default)]
    pub score_model: ScoreModel,
    #[serde(default)]
    pub level: Level,
    pub policy: ControlPolicy,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    /// When present, `n_correct` values for a sweep instead of a single run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_n_correct: Option<Vec<usize>>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.r.is_finite() && self.r > 0.0) {
            return bad(format!("r must be positive, got {}", self.r));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        match self.redundancy {
            Redundancy::Constant(0) => return bad("constant redundancy must be at least 1".into()),
            Redundancy::Empirical { mean } if !(mean.is_finite() && mean >= 1.0) => {
                return bad(format!("redundancy mean must be >= 1, got {mean}"))
            }
            _ => {}
        }
        if let ScoreModel::CorrectShifted { separation } = self.score_model {
            if !separation.is_finite() {
                return bad("separation must be finite".into());
            }
        }
        if self.n_correct + self.n_incorrect_peptides > u32::MAX as usize / 2 {
            return bad("too many identifications".into());
        }
        Ok(())
    }
}

/// Compact identification used in the simulation hot path.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SimPsm {
    score: f64,
    origin: Origin,
    correct: bool,
    peptide: u32,
    spectrum: u32,
}

fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

/// Draw one trial's identifications in rank order.
fn draw(scenario: &Scenario, trial_index: u64, out: &mut Vec<SimPsm>) {
    let mut rng = trial_rng(scenario.seed, trial_index);
    out.clear();
    let shift = match scenario.score_model {
        ScoreModel::CorrectShifted { separation } => separation,
        ScoreModel::Interleaved => 0.0,
    };
    let mut spectrum = 0u32;
    for peptide in 0..scenario.n_correct as u32 {
        out.push(SimPsm {
            score: shift + rng.random::<f64>(),
            origin: Origin::Target,
            correct: true,
            peptide,
            spectrum,
        });
        spectrum += 1;
    }
    let p_decoy = scenario.r / (1.0 + scenario.r);
    let geometric = match scenario.redundancy {
        Redundancy::Empirical { mean } => Some(Geometric::new(1.0 / mean).expect("validated mean")),
        Redundancy::Constant(_) => None,
    };
    for j in 0..scenario.n_incorrect_peptides as u32 {
        // all spectra of a peptide share its origin
        let origin = if rng.random_bool(p_decoy) {
            Origin::Decoy
        } else {
            Origin::Target
        };
        let copies = match (scenario.redundancy, &geometric) {
            (Redundancy::Constant(k), _) => k as u64,
            (_, Some(g)) => 1 + g.sample(&mut rng),
            (_, None) => unreachable!(),
        };
        for _ in 0..copies {
            out.push(SimPsm {
                score: rng.random::<f64>(),
                origin,
                correct: false,
                peptide: scenario.n_correct as u32 + j,
                spectrum,
            });
            spectrum += 1;
        }
    }
    out.sort_unstable_by(|a, b| rank_order(a.score, a.origin, b.score, b.origin).then(a.spectrum.cmp(&b.spectrum)));
}

/// Generate trial `trial_index` as a validated [`RankedList`] with truth labels.
pub fn generate_trial(scenario: &Scenario, trial_index: u64) -> Result<RankedList> {
    scenario.validate()?;
    let mut psms = Vec::new();
    draw(scenario, trial_index, &mut psms);
    rank(psms.into_iter().map(|p| {
        let key = if p.correct {
            format!("C{}", p.peptide)
        } else {
            format!("I{}", p.peptide)
        };
        let truth = if p.correct { Truth::Correct } else { Truth::Incorrect };
        Identification::new(format!("S{:08}", p.spectrum), key, p.score, p.origin).with_truth(truth)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub fdp: f64,
    pub n_retained: usize,
    pub threshold_found: bool,
    /// Whether the selection broke the rule that the best identification
    /// below a `+c` (c > 0) threshold is a decoy.
    pub invariant_violated: bool,
}

fn profile_of(psms: &[SimPsm], level: Level, seen: &mut Vec<bool>) -> CountProfile {
    let triple = |p: &SimPsm| (p.score, p.origin, Some(!p.correct));
    match level {
        Level::Spectrum => CountProfile::from_ranked(psms.iter().map(triple)),
        Level::Peptide => {
            seen.clear();
            seen.resize(psms.len() + 1, false);
            CountProfile::from_ranked(
                psms.iter()
                    .filter(|p| {
                        let slot = &mut seen[p.peptide as usize];
                        !std::mem::replace(slot, true)
                    })
                    .map(triple),
            )
        }
    }
}

fn evaluate(profile: &CountProfile, policy: &ControlPolicy) -> TrialOutcome {
    match select(profile, policy) {
        None => TrialOutcome {
            fdp: 0.0,
            n_retained: 0,
            threshold_found: false,
            invariant_violated: false,
        },
        Some(t) => {
            let checked = policy.method() == Method::TdcPlusC && policy.cfg().c() > 0.0;
            TrialOutcome {
                fdp: t.fdp().unwrap_or(0.0),
                n_retained: t.n_tar,
                threshold_found: true,
                invariant_violated: checked && next_below_is_decoy(profile, &t) == Some(false),
            }
        }
    }
}

/// Mean FDP over trials, with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdrMeasurement {
    pub mean_fdp: f64,
    /// Sample standard deviation over `sqrt(trials)`; undefined for one trial.
    pub std_error: Option<f64>,
    pub trials: u64,
    pub mean_retained: f64,
    pub found_fraction: f64,
    pub invariant_violations: u64,
}

impl FdrMeasurement {
    pub fn from_outcomes(outcomes: &[TrialOutcome]) -> Self {
        let n = outcomes.len() as f64;
        let mean = outcomes.iter().map(|o| o.fdp).sum::<f64>() / n;
        let std_error = (outcomes.len() > 1).then(|| {
            let ss: f64 = outcomes.iter().map(|o| (o.fdp - mean).powi(2)).sum();
            (ss / (n - 1.0)).sqrt() / n.sqrt()
        });
        FdrMeasurement {
            mean_fdp: mean,
            std_error,
            trials: outcomes.len() as u64,
            mean_retained: outcomes.iter().map(|o| o.n_retained as f64).sum::<f64>() / n,
            found_fraction: outcomes.iter().filter(|o| o.threshold_found).count() as f64 / n,
            invariant_violations: outcomes.iter().filter(|o| o.invariant_violated).count() as u64,
        }
    }

    /// Standard error, or 0 when undefined.
    pub fn se(&self) -> f64 {
        self.std_error.unwrap_or(0.0)
    }
}

/// Run `scenario.trials` trials, evaluating every `(policy, level)` pair on
/// the same generated lists. The scenario's own policy and level are ignored.
pub fn simulate(scenario: &Scenario, criteria: &[(ControlPolicy, Level)]) -> Result<Vec<FdrMeasurement>> {
    scenario.validate()?;
    let trials = scenario.trials;
    let batches: Vec<Vec<Vec<TrialOutcome>>> = (0..trials.div_ceil(BATCH))
        .into_par_iter()
        .map(|batch| {
            let mut psms = Vec::new();
            let mut seen = Vec::new();
            let end = ((batch + 1) * BATCH).min(trials);
            (batch * BATCH..end)
                .map(|trial| {
                    draw(scenario, trial, &mut psms);
                    let peptide = criteria
                        .iter()
                        .any(|(_, l)| *l == Level::Peptide)
                        .then(|| profile_of(&psms, Level::Peptide, &mut seen));
                    let spectrum = criteria
                        .iter()
                        .any(|(_, l)| *l == Level::Spectrum)
                        .then(|| profile_of(&psms, Level::Spectrum, &mut seen));
                    criteria
                        .iter()
                        .map(|(policy, level)| {
                            let profile = match level {
                                Level::Peptide => peptide.as_ref(),
                                Level::Spectrum => spectrum.as_ref(),
                            };
                            evaluate(profile.expect("profile built for every requested level"), policy)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let per_trial: Vec<Vec<TrialOutcome>> = batches.into_iter().flatten().collect();
    Ok((0..criteria.len())
        .map(|k| {
            let column: Vec<TrialOutcome> = per_trial.iter().map(|row| row[k]).collect();
            FdrMeasurement::from_outcomes(&column)
        })
        .collect())
}

/// Outcome of every trial under the scenario's own policy and level.
pub fn trial_outcomes(scenario: &Scenario) -> Result<Vec<TrialOutcome>> {
    scenario.validate()?;
    let mut psms = Vec::new();
    let mut seen = Vec::new();
    Ok((0..scenario.trials)
        .map(|trial| {
            draw(scenario, trial, &mut psms);
            evaluate(&profile_of(&psms, scenario.level, &mut seen), &scenario.policy)
        })
        .collect())
}

pub fn run(scenario: &Scenario) -> Result<FdrMeasurement> {
    Ok(simulate(scenario, &[(scenario.policy, scenario.level)])?[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_correct: usize,
    pub c: f64,
    pub level: Level,
    pub measurement: FdrMeasurement,
}

impl SweepRow {
    pub fn criterion(&self) -> String {
        format!("tdc_c{}", self.c)
    }
}

/// The `{c = 0, c = 1} x {peptide, spectrum}` grid at each number of correct
/// identifications. All rows share the base seed.
pub fn sweep_curve(base: &Scenario, n_correct_values: &[usize]) -> Result<Vec<SweepRow>> {
    let alpha = base.policy.alpha();
    let r = base.policy.cfg().r();
    let mut criteria = Vec::new();
    for c in [0.0, 1.0] {
        let policy = ControlPolicy::tdc(alpha, EstimatorConfig::new(r, c)?)?;
        for level in [Level::Peptide, Level::Spectrum] {
            criteria.push((policy, level));
        }
    }
    let mut rows = Vec::new();
    for &n_correct in n_correct_values {
        let scenario = Scenario {
            n_correct,
            sweep_n_correct: None,
            ..base.clone()
        };
        let measurements = simulate(&scenario, &criteria)?;
        for ((policy, level), measurement) in criteria.iter().zip(measurements) {
            rows.push(SweepRow {
                n_correct,
                c: policy.cfg().c(),
                level: *level,
                measurement,
            });
        }
    }
    Ok(rows)
}
