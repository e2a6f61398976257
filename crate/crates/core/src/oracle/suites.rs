//! Exhaustive verification sweeps built on the enumeration oracle.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    closed_form_t1, exact_conditional_t1, exact_expected_estimates, exact_expected_t1, exact_true_fdrs,
    martingale_check, total_probability, undercorrection_witness, AssignmentSpace, Rule, MAX_MARTINGALE,
};
use crate::controller::ControlPolicy;
use crate::error::Result;
use crate::estimator::EstimatorConfig;

/// Absolute slack allowed for floating-point equalities and for inequalities
/// that are tight in exact arithmetic.
pub const TOLERANCE: f64 = 1e-12;

pub const DECOY_RATIOS: [f64; 3] = [0.5, 1.0, 2.0];
pub const ALPHAS: [f64; 3] = [0.01, 0.05, 0.2];

/// Result of one sweep. `worst_margin` is the smallest slack seen; it is
/// negative exactly when some check failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub spaces: usize,
    pub checks: usize,
    pub violations: usize,
    pub worst_margin: f64,
    pub notes: Vec<String>,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        SuiteReport {
            name: name.to_string(),
            spaces: 0,
            checks: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
            notes: Vec::new(),
        }
    }

    fn record(&mut self, margin: f64, ok: bool) -> bool {
        self.checks += 1;
        self.worst_margin = self.worst_margin.min(margin);
        if !ok {
            self.violations += 1;
        }
        ok
    }

    /// Record one check whose slack must be at least `-allowed`.
    fn check(&mut self, margin: f64, allowed: f64) -> bool {
        self.record(margin, margin >= -allowed)
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Spaces with `n` incorrect identifications interleaved at random with
/// 0..=12 correct ones, all at distinct scores.
pub fn random_placements(n: usize, r: f64, count: usize, rng: &mut impl Rng) -> Result<Vec<AssignmentSpace>> {
    (0..count)
        .map(|_| {
            let n_correct = rng.random_range(0..=12usize);
            let mut is_correct: Vec<bool> = std::iter::repeat_n(true, n_correct)
                .chain(std::iter::repeat_n(false, n))
                .collect();
            is_correct.shuffle(rng);
            let total = is_correct.len();
            let (mut correct, mut incorrect) = (Vec::new(), Vec::new());
            for (pos, c) in is_correct.into_iter().enumerate() {
                let score = (total - pos) as f64;
                if c {
                    correct.push(score);
                } else {
                    incorrect.push(score);
                }
            }
            AssignmentSpace::new(r, correct, incorrect)
        })
        .collect()
}

/// Every sweep space: for each `n <= max_n` and each decoy ratio, the
/// all-correct-on-top and all-correct-at-bottom layouts plus `placements`
/// random interleavings.
fn sweep_spaces(max_n: usize, placements: usize, seed: u64) -> Result<Vec<AssignmentSpace>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spaces = Vec::new();
    for n in 0..=max_n {
        for r in DECOY_RATIOS {
            let k = 4;
            let top = (0..k).map(|i| (n + k - i) as f64).collect();
            let incorrect_low: Vec<f64> = (0..n).map(|i| (n - i) as f64).collect();
            spaces.push(AssignmentSpace::new(r, top, incorrect_low)?);
            let bottom = (0..k).map(|i| (k - i) as f64).collect();
            let incorrect_high: Vec<f64> = (0..n).map(|i| (n + k - i) as f64).collect();
            spaces.push(AssignmentSpace::new(r, bottom, incorrect_high)?);
            spaces.extend(random_placements(n, r, placements, &mut rng)?);
        }
    }
    Ok(spaces)
}

/// Conservativeness: at every observed threshold, `E[N_dec/(r N_tar)]` is at
/// least the exact FDR.
pub fn theorem1(max_n: usize, placements: usize, seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("theorem1");
    for space in sweep_spaces(max_n, placements, seed)? {
        report.spaces += 1;
        let cfg = EstimatorConfig::new(space.r(), 0.0)?;
        let thresholds = space.observed_scores();
        let expected = exact_expected_estimates(&space, &thresholds, &cfg);
        let rules: Vec<Rule> = thresholds.iter().map(|&x| Rule::FixedThreshold(x)).collect();
        let fdr = exact_true_fdrs(&space, &rules);
        for ((x, e), f) in thresholds.iter().zip(&expected).zip(&fdr) {
            if !report.check(e - f, TOLERANCE) {
                report.notes.push(format!(
                    "n={} r={} x={x}: E[estimate]={e} < FDR={f}",
                    space.n_incorrect(),
                    space.r()
                ));
            }
        }
    }
    Ok(report)
}

/// FDR control of the `+1` criterion: exact FDR strictly below `alpha`.
pub fn theorem2(max_n: usize, placements: usize, seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("theorem2");
    let mut max_fdr_ratio: f64 = 0.0;
    for space in sweep_spaces(max_n, placements, seed)? {
        report.spaces += 1;
        let cfg = EstimatorConfig::new(space.r(), 1.0)?;
        let rules = ALPHAS
            .iter()
            .map(|&a| ControlPolicy::tdc(a, cfg).map(Rule::Criterion))
            .collect::<Result<Vec<_>>>()?;
        let fdr = exact_true_fdrs(&space, &rules);
        for (alpha, f) in ALPHAS.iter().zip(&fdr) {
            max_fdr_ratio = max_fdr_ratio.max(f / alpha);
            if !report.record(alpha - f, f < alpha) {
                report.notes.push(format!(
                    "n={} r={} alpha={alpha}: FDR={f}",
                    space.n_incorrect(),
                    space.r()
                ));
            }
        }
    }
    report.notes.push(format!("max FDR/alpha = {max_fdr_ratio:.6}"));
    Ok(report)
}

/// The `c = 0.5` counter-example: exact FDR above `alpha`.
pub fn theorem3() -> Result<SuiteReport> {
    let mut report = SuiteReport::new("theorem3");
    let w = undercorrection_witness(0.5, 1.0)?;
    report.spaces = 1;
    // the witness must break control, so the slack is exact FDR - alpha
    report.record(w.margin(), w.margin() > 0.0);
    report.notes.push(format!(
        "c={} r={} n={} m={} alpha={:.6} exact FDR={:.6} bound={:.6} margin={:.6}",
        w.c,
        w.r,
        w.n,
        w.m,
        w.alpha,
        w.exact_fdr,
        w.lower_bound,
        w.margin()
    ));
    Ok(report)
}

/// Closed forms for `E[T_1]`, the conditional expectation `a/(b+1)` and
/// probability normalisation.
pub fn lemmas(max_n: usize) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("lemmas");
    for r in DECOY_RATIOS {
        for n in 0..=max_n {
            let space = AssignmentSpace::incorrect_only(r, n)?;
            report.spaces += 1;
            let t1 = exact_expected_t1(&space);
            let closed = closed_form_t1(r, n);
            report.check(TOLERANCE - (t1.value - closed).abs(), 0.0);
            if r == 1.0 {
                report.check(TOLERANCE - (t1.value - (1.0 - 0.5f64.powi(n as i32))).abs(), 0.0);
            }
            report.check(TOLERANCE - (total_probability(&space) - 1.0).abs(), 0.0);
            if (t1.value - closed).abs() > TOLERANCE {
                report
                    .notes
                    .push(format!("E[T1] n={n} r={r}: {} vs {closed}", t1.value));
            }
        }
    }
    let cond_n = max_n.min(10);
    for r in [1.0, 2.0] {
        for total in 0..=cond_n {
            for n in [total, total + 1] {
                let space = AssignmentSpace::incorrect_only(r, n)?;
                report.spaces += 1;
                for a in 0..=total {
                    let res = exact_conditional_t1(&space, a, total - a)?;
                    let closed = res.closed_form.unwrap_or(f64::NAN);
                    report.check(TOLERANCE - (res.value - closed).abs(), 0.0);
                }
            }
        }
    }
    Ok(report)
}

pub fn martingale(max_n: usize) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("martingale");
    let mut worst: f64 = 0.0;
    for r in [1.0, 2.0] {
        for n in 0..=max_n.min(MAX_MARTINGALE) {
            report.spaces += 1;
            let dev = martingale_check(&AssignmentSpace::incorrect_only(r, n)?)?.value;
            worst = worst.max(dev);
            report.check(TOLERANCE - dev, 0.0);
        }
    }
    report.notes.push(format!("max deviation = {worst:e}"));
    Ok(report)
}
