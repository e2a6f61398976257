//! Exact expectations by enumerating every target/decoy assignment of the
//! incorrect identifications.
//!
//! Correct identifications are fixed targets. Each incorrect identification is
//! independently a decoy with probability `r / (1 + r)` and a target with
//! probability `1 / (1 + r)`. An outcome is a bit mask over the incorrect
//! identifications in rank order, bit `i` set meaning decoy. Sums run over
//! fixed-size chunks of mask indices with compensated summation, so results do
//! not depend on how chunks are spread over threads.

pub mod suites;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{select, ControlPolicy};
use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::psm::{rank_order, CountProfile, Origin};

/// Largest number of incorrect identifications enumerated exhaustively.
pub const MAX_ENUMERATION: usize = 24;
/// Largest space accepted by [`martingale_check`].
pub const MAX_MARTINGALE: usize = 20;

const CHUNK: u64 = 1 << 12;

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentSpace {
    r: f64,
    correct_scores: Vec<f64>,
    incorrect_scores: Vec<f64>,
}

impl AssignmentSpace {
    pub fn new(r: f64, mut correct_scores: Vec<f64>, mut incorrect_scores: Vec<f64>) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidConfig(format!("decoy ratio r must be positive, got {r}")));
        }
        if incorrect_scores.len() > MAX_ENUMERATION {
            return Err(Error::EnumerationTooLarge {
                n: incorrect_scores.len(),
                max: MAX_ENUMERATION,
            });
        }
        if let Some(bad) = correct_scores.iter().chain(&incorrect_scores).find(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite score {bad}")));
        }
        correct_scores.sort_by(|a, b| b.total_cmp(a));
        incorrect_scores.sort_by(|a, b| b.total_cmp(a));
        Ok(AssignmentSpace {
            r,
            correct_scores,
            incorrect_scores,
        })
    }

    /// `n` incorrect identifications with scores `n, n-1, ..., 1` and no
    /// correct ones.
    pub fn incorrect_only(r: f64, n: usize) -> Result<Self> {
        Self::new(r, Vec::new(), (1..=n).rev().map(|s| s as f64).collect())
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn n_incorrect(&self) -> usize {
        self.incorrect_scores.len()
    }

    pub fn correct_scores(&self) -> &[f64] {
        &self.correct_scores
    }

    pub fn incorrect_scores(&self) -> &[f64] {
        &self.incorrect_scores
    }

    pub fn p_target(&self) -> f64 {
        1.0 / (1.0 + self.r)
    }

    pub fn p_decoy(&self) -> f64 {
        self.r / (1.0 + self.r)
    }

    /// Every distinct score in the space, best first.
    pub fn observed_scores(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .correct_scores
            .iter()
            .chain(&self.incorrect_scores)
            .copied()
            .collect();
        all.sort_by(|a, b| b.total_cmp(a));
        all.dedup();
        all
    }

    fn n_outcomes(&self) -> u64 {
        1u64 << self.n_incorrect()
    }

    fn weights(&self) -> Weights {
        let n = self.n_incorrect();
        let mut pt = vec![1.0; n + 1];
        let mut pd = vec![1.0; n + 1];
        for k in 1..=n {
            pt[k] = pt[k - 1] * self.p_target();
            pd[k] = pd[k - 1] * self.p_decoy();
        }
        Weights { n, pt, pd }
    }

    fn origin(mask: u64, i: usize) -> Origin {
        if mask >> i & 1 == 1 {
            Origin::Decoy
        } else {
            Origin::Target
        }
    }

    /// Count profile of one outcome.
    pub fn profile(&self, mask: u64) -> CountProfile {
        let mut items: Vec<(f64, Origin, bool, usize)> = self
            .correct_scores
            .iter()
            .map(|&s| (s, Origin::Target, false))
            .chain(
                self.incorrect_scores
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| (s, Self::origin(mask, i), true)),
            )
            .enumerate()
            .map(|(k, (s, o, inc))| (s, o, inc, k))
            .collect();
        items.sort_by(|a, b| rank_order(a.0, a.1, b.0, b.1).then(a.3.cmp(&b.3)));
        CountProfile::from_ranked(items.into_iter().map(|(s, o, inc, _)| (s, o, Some(inc))))
    }

    /// Origins of the incorrect identifications in rank order for one outcome.
    fn incorrect_sequence(&self, mask: u64) -> Vec<Origin> {
        let mut seq: Vec<(f64, Origin, usize)> = self
            .incorrect_scores
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, Self::origin(mask, i), i))
            .collect();
        seq.sort_by(|a, b| rank_order(a.0, a.1, b.0, b.1).then(a.2.cmp(&b.2)));
        seq.into_iter().map(|(_, o, _)| o).collect()
    }

    /// Sum `weight * f(mask)` over all outcomes, componentwise. The last entry
    /// of the result is the total probability mass.
    fn expectation<F>(&self, width: usize, f: F) -> Vec<f64>
    where
        F: Fn(u64, &mut [f64]) + Sync,
    {
        let weights = self.weights();
        let total = self.n_outcomes();
        let n_chunks = total.div_ceil(CHUNK);
        let partials: Vec<Vec<CompensatedSum>> = (0..n_chunks)
            .into_par_iter()
            .map(|chunk| {
                let mut acc = vec![CompensatedSum::default(); width + 1];
                let mut scratch = vec![0.0; width];
                let end = ((chunk + 1) * CHUNK).min(total);
                for mask in chunk * CHUNK..end {
                    let w = weights.of(mask);
                    scratch.iter_mut().for_each(|v| *v = 0.0);
                    f(mask, &mut scratch);
                    for (a, v) in acc.iter_mut().zip(&scratch) {
                        a.add(w * v);
                    }
                    acc[width].add(w);
                }
                acc
            })
            .collect();
        let mut out = vec![CompensatedSum::default(); width + 1];
        for part in &partials {
            for (o, p) in out.iter_mut().zip(part) {
                o.add(p.sum);
                o.add(p.compensation);
            }
        }
        out.iter().map(CompensatedSum::value).collect()
    }
}

struct Weights {
    n: usize,
    pt: Vec<f64>,
    pd: Vec<f64>,
}

impl Weights {
    fn of(&self, mask: u64) -> f64 {
        let decoys = mask.count_ones() as usize;
        self.pt[self.n - decoys] * self.pd[decoys]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    ExpectedEstimate,
    TrueFdr,
    ExpectedT1,
    ConditionalT1,
    MartingaleCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactResult {
    pub quantity: Quantity,
    pub value: f64,
    /// Threshold the quantity refers to, if any.
    pub at: Option<f64>,
    /// Closed-form counterpart, where one exists.
    pub closed_form: Option<f64>,
}

impl ExactResult {
    fn new(quantity: Quantity, value: f64) -> Self {
        ExactResult {
            quantity,
            value,
            at: None,
            closed_form: None,
        }
    }
}

/// How a threshold is chosen in each outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    FixedThreshold(f64),
    Criterion(ControlPolicy),
}

/// Total probability over all outcomes; 1 up to rounding.
pub fn total_probability(space: &AssignmentSpace) -> f64 {
    space.expectation(0, |_, _| {})[0]
}

/// `E[estimate at x]` for each `x` in `thresholds`.
pub fn exact_expected_estimates(space: &AssignmentSpace, thresholds: &[f64], cfg: &EstimatorConfig) -> Vec<f64> {
    let mut out = space.expectation(thresholds.len(), |mask, vals| {
        let profile = space.profile(mask);
        for (v, &x) in vals.iter_mut().zip(thresholds) {
            let p = profile.at(x);
            *v = cfg.evaluate(p.n_tar, p.n_dec);
        }
    });
    out.pop();
    out
}

pub fn exact_expected_estimate(space: &AssignmentSpace, x: f64, cfg: &EstimatorConfig) -> ExactResult {
    let value = exact_expected_estimates(space, &[x], cfg)[0];
    ExactResult {
        at: Some(x),
        ..ExactResult::new(Quantity::ExpectedEstimate, value)
    }
}

fn fdp_under(profile: &CountProfile, rule: &Rule) -> f64 {
    let point = match rule {
        Rule::FixedThreshold(x) => Some(profile.at(*x)),
        Rule::Criterion(policy) => select(profile, policy).map(|t| profile.at(t.score)),
    };
    point
        .and_then(|p| p.n_inc.map(|inc| inc as f64 / p.n_tar.max(1) as f64))
        .unwrap_or(0.0)
}

/// Exact FDR of each rule, computed in one pass over the outcomes.
pub fn exact_true_fdrs(space: &AssignmentSpace, rules: &[Rule]) -> Vec<f64> {
    let mut out = space.expectation(rules.len(), |mask, vals| {
        let profile = space.profile(mask);
        for (v, rule) in vals.iter_mut().zip(rules) {
            *v = fdp_under(&profile, rule);
        }
    });
    out.pop();
    out
}

pub fn exact_true_fdr(space: &AssignmentSpace, rule: &Rule) -> ExactResult {
    let value = exact_true_fdrs(space, std::slice::from_ref(rule))[0];
    let at = match rule {
        Rule::FixedThreshold(x) => Some(*x),
        Rule::Criterion(_) => None,
    };
    ExactResult {
        at,
        ..ExactResult::new(Quantity::TrueFdr, value)
    }
}

/// Targets ahead of the first decoy (all targets when there is none).
fn leading_targets(seq: &[Origin]) -> usize {
    seq.iter().take_while(|&&o| o == Origin::Target).count()
}

/// `1/r - 1/(r (1+r)^n)`: expected incorrect targets ahead of the best decoy.
pub fn closed_form_t1(r: f64, n: usize) -> f64 {
    1.0 / r - 1.0 / (r * (1.0 + r).powi(n as i32))
}

/// `E[T_1]` by enumeration, with the closed form alongside.
pub fn exact_expected_t1(space: &AssignmentSpace) -> ExactResult {
    let value = space.expectation(1, |mask, vals| {
        vals[0] = leading_targets(&space.incorrect_sequence(mask)) as f64;
    })[0];
    ExactResult {
        closed_form: Some(closed_form_t1(space.r(), space.n_incorrect())),
        ..ExactResult::new(Quantity::ExpectedT1, value)
    }
}

/// `E[T_1 | a targets and b decoys among the first a+b incorrect
/// identifications, followed by a decoy or the end of the list]`.
/// The closed form is `a / (b + 1)`.
pub fn exact_conditional_t1(space: &AssignmentSpace, a: usize, b: usize) -> Result<ExactResult> {
    let n = space.n_incorrect();
    if a + b > n {
        return Err(Error::ZeroProbabilityEvent(format!(
            "a + b = {} exceeds the {n} incorrect identifications",
            a + b
        )));
    }
    let sums = space.expectation(2, |mask, vals| {
        let seq = space.incorrect_sequence(mask);
        let head = &seq[..a + b];
        let targets = head.iter().filter(|&&o| o == Origin::Target).count();
        let closed = a + b == n || seq[a + b] == Origin::Decoy;
        if targets == a && closed {
            vals[0] = 1.0;
            vals[1] = leading_targets(&seq) as f64;
        }
    });
    let (mass, weighted) = (sums[0], sums[1]);
    if mass <= 0.0 {
        return Err(Error::ZeroProbabilityEvent(format!("a = {a}, b = {b}")));
    }
    Ok(ExactResult {
        closed_form: Some(a as f64 / (b as f64 + 1.0)),
        ..ExactResult::new(Quantity::ConditionalT1, weighted / mass)
    })
}

/// `T_i` for `i = 1..=D+1`: incorrect targets ahead of the i-th decoy, or all
/// incorrect targets when there are fewer than `i` decoys.
pub fn t_statistics(seq: &[Origin]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut targets = 0;
    for o in seq {
        match o {
            Origin::Target => targets += 1,
            Origin::Decoy => out.push(targets),
        }
    }
    out.push(targets);
    out
}

/// Largest deviation of `E[T_{i-1}/(i-1) | D, T_i, ..., T_{D+1}]` from
/// `T_i / i` over all `1 < i <= D+1` and all conditioning values.
pub fn martingale_check(space: &AssignmentSpace) -> Result<ExactResult> {
    let n = space.n_incorrect();
    if n > MAX_MARTINGALE {
        return Err(Error::EnumerationTooLarge { n, max: MAX_MARTINGALE });
    }
    let weights = space.weights();
    // key: (D, i, packed T_i..T_{D+1}); value: (mass, mass * T_{i-1})
    let mut groups: HashMap<(usize, usize, u128), (CompensatedSum, CompensatedSum)> = HashMap::new();
    for mask in 0..space.n_outcomes() {
        let w = weights.of(mask);
        let t = t_statistics(&space.incorrect_sequence(mask));
        let d = t.len() - 1;
        let mut packed: u128 = 0;
        // walk i from D+1 down to 2, extending the packed suffix
        for i in (2..=d + 1).rev() {
            packed = packed << 5 | t[i - 1] as u128;
            let entry = groups.entry((d, i, packed)).or_default();
            entry.0.add(w);
            entry.1.add(w * t[i - 2] as f64);
        }
    }
    let mut worst: f64 = 0.0;
    for ((_, i, packed), (mass, weighted)) in &groups {
        let t_i = (*packed & 0x1f) as f64;
        let lhs = weighted.value() / mass.value() / (*i as f64 - 1.0);
        worst = worst.max((lhs - t_i / *i as f64).abs());
    }
    Ok(ExactResult::new(Quantity::MartingaleCheck, worst))
}

/// Parameters and outcome of the counter-example showing `c < 1` fails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UndercorrectionWitness {
    pub c: f64,
    pub r: f64,
    /// Incorrect identifications, ranked below all correct ones.
    pub n: usize,
    /// Correct identifications at the top of the list.
    pub m: usize,
    pub alpha: f64,
    pub exact_fdr: f64,
    /// `(1 - (1+r)^-n) / (r (m+n))`, a lower bound on the exact FDR.
    pub lower_bound: f64,
}

impl UndercorrectionWitness {
    pub fn margin(&self) -> f64 {
        self.exact_fdr - self.alpha
    }
}

/// Build the counter-example for `c < 1`: `n = ceil(-log_{1+r}(0.4 - 0.4c))`
/// incorrect identifications under `m = ceil(2cn / (1-c))` correct ones, with
/// `alpha = c / (r m)`, and compute its exact FDR under the `+c` criterion.
pub fn undercorrection_witness(c: f64, r: f64) -> Result<UndercorrectionWitness> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidConfig(format!("witness needs 0 < c < 1, got {c}")));
    }
    let n = (-(0.4 - 0.4 * c).ln() / (1.0 + r).ln()).ceil() as usize;
    let m = (2.0 * c * n as f64 / (1.0 - c)).ceil() as usize;
    let alpha = c / (r * m as f64);
    let correct = (0..m).map(|k| (n + m - k) as f64).collect();
    let incorrect = (0..n).map(|k| (n - k) as f64).collect();
    let space = AssignmentSpace::new(r, correct, incorrect)?;
    let policy = ControlPolicy::tdc(alpha, EstimatorConfig::new(r, c)?)?;
    let exact_fdr = exact_true_fdr(&space, &Rule::Criterion(policy)).value;
    let lower_bound = (1.0 - (1.0 + r).powi(-(n as i32))) / (r * (m + n) as f64);
    Ok(UndercorrectionWitness {
        c,
        r,
        n,
        m,
        alpha,
        exact_fdr,
        lower_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1.0);
        for _ in 0..10 {
            s.add(1e-17);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-16).abs() < 1e-30);
    }

    #[test]
    fn refuses_oversized_spaces() {
        let err = AssignmentSpace::incorrect_only(1.0, 25).unwrap_err();
        assert_eq!(err, Error::EnumerationTooLarge { n: 25, max: 24 });
        let space = AssignmentSpace::incorrect_only(1.0, 21).unwrap();
        assert!(matches!(
            martingale_check(&space),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn probabilities_sum_to_one() {
        for r in [0.5, 1.0, 2.0, 3.0] {
            for n in [0, 1, 5, 12] {
                let space = AssignmentSpace::incorrect_only(r, n).unwrap();
                assert!((total_probability(&space) - 1.0).abs() < TOL);
            }
        }
    }

    #[test]
    fn expected_estimate_hand_enumerations() {
        let cfg = EstimatorConfig::plain();
        let one = AssignmentSpace::incorrect_only(1.0, 1).unwrap();
        assert_eq!(exact_expected_estimate(&one, 0.5, &cfg).value, 0.5);

        // TT -> 0, TD/DT -> 1/1, DD -> 2/max(0, 1); the FDP is 1 unless DD
        let two = AssignmentSpace::incorrect_only(1.0, 2).unwrap();
        assert_eq!(exact_expected_estimate(&two, 0.5, &cfg).value, 1.0);
        assert_eq!(exact_true_fdr(&two, &Rule::FixedThreshold(0.5)).value, 0.75);
        // threshold above the lower one: only the top identification counts
        assert_eq!(exact_expected_estimate(&two, 2.0, &cfg).value, 0.5);
        assert_eq!(exact_true_fdr(&two, &Rule::FixedThreshold(2.0)).value, 0.5);

        // two correct above, no incorrect: deterministic c / (r * n_cor)
        let fixed = AssignmentSpace::new(2.0, vec![3.0, 2.0], vec![]).unwrap();
        let cfg = EstimatorConfig::new(2.0, 1.0).unwrap();
        assert_eq!(exact_expected_estimate(&fixed, 0.0, &cfg).value, 0.25);
    }

    #[test]
    fn true_fdr_of_two_incorrect_no_correct() {
        // outcomes TT, TD, DT, DD; FDP is 1 whenever a target passes
        let two = AssignmentSpace::incorrect_only(1.0, 2).unwrap();
        assert_eq!(exact_true_fdr(&two, &Rule::FixedThreshold(1.0)).value, 0.75);
        assert_eq!(exact_true_fdr(&two, &Rule::FixedThreshold(2.0)).value, 0.5);
    }

    #[test]
    fn plain_ratio_fails_on_incorrect_only_space() {
        let policy = ControlPolicy::tdc(0.01, EstimatorConfig::plain()).unwrap();
        for n in [1, 3, 10] {
            let space = AssignmentSpace::incorrect_only(1.0, n).unwrap();
            assert!(exact_true_fdr(&space, &Rule::Criterion(policy)).value >= 0.5);
        }
    }

    #[test]
    fn empty_space_has_zero_fdr() {
        let space = AssignmentSpace::incorrect_only(1.0, 0).unwrap();
        let policy = ControlPolicy::tdc(0.05, EstimatorConfig::plus_one()).unwrap();
        assert_eq!(exact_true_fdr(&space, &Rule::Criterion(policy)).value, 0.0);
        assert_eq!(exact_true_fdr(&space, &Rule::FixedThreshold(0.0)).value, 0.0);
    }

    #[test]
    fn expected_t1_values() {
        let t1 = exact_expected_t1(&AssignmentSpace::incorrect_only(1.0, 3).unwrap());
        assert_eq!(t1.value, 0.875);
        assert_eq!(t1.closed_form, Some(0.875));
        assert_eq!(
            exact_expected_t1(&AssignmentSpace::incorrect_only(1.0, 0).unwrap()).value,
            0.0
        );
        let t1 = exact_expected_t1(&AssignmentSpace::incorrect_only(2.0, 4).unwrap());
        let expected = 0.5 - 1.0 / (2.0 * 81.0);
        assert!((t1.value - expected).abs() < TOL);
        assert!((t1.closed_form.unwrap() - expected).abs() < TOL);
        assert!((expected - 0.493_827_160_493_827).abs() < 1e-12);
    }

    #[test]
    fn conditional_t1_values() {
        let space = AssignmentSpace::incorrect_only(1.0, 6).unwrap();
        let r = exact_conditional_t1(&space, 2, 1).unwrap();
        assert!((r.value - 1.0).abs() < TOL);
        for b in 0..4 {
            assert_eq!(exact_conditional_t1(&space, 0, b).unwrap().value, 0.0);
        }
        // the ten orderings of TTTDD have 3,2,2,1,1,1,0,0,0,0 leading targets
        let r = exact_conditional_t1(&space, 3, 2).unwrap();
        assert!((r.value - 1.0).abs() < TOL);
        let r = exact_conditional_t1(&AssignmentSpace::incorrect_only(1.0, 5).unwrap(), 3, 2).unwrap();
        assert!((r.value - 1.0).abs() < TOL);
        assert!(matches!(
            exact_conditional_t1(&space, 4, 3),
            Err(Error::ZeroProbabilityEvent(_))
        ));
    }

    #[test]
    fn t_statistics_example() {
        use Origin::{Decoy as D, Target as T};
        assert_eq!(t_statistics(&[T, T, D, T, D]), vec![2, 3, 3]);
        assert_eq!(t_statistics(&[]), vec![0]);
        assert_eq!(t_statistics(&[D]), vec![0, 0]);
    }

    #[test]
    fn martingale_small_spaces() {
        let r = martingale_check(&AssignmentSpace::incorrect_only(1.0, 4).unwrap()).unwrap();
        assert!(r.value <= TOL);
        let r = martingale_check(&AssignmentSpace::incorrect_only(1.0, 1).unwrap()).unwrap();
        assert!(r.value <= TOL);
        let r = martingale_check(&AssignmentSpace::incorrect_only(2.0, 6).unwrap()).unwrap();
        assert!(r.value <= TOL);
    }

    #[test]
    fn undercorrection_witness_parameters() {
        let w = undercorrection_witness(0.5, 1.0).unwrap();
        assert_eq!((w.n, w.m), (3, 6));
        assert_eq!(w.alpha, 0.5 / 6.0);
        assert!(w.exact_fdr >= w.lower_bound - TOL);
        assert!(w.lower_bound > w.alpha);
        assert!(w.margin() > 0.0);
    }

    #[test]
    fn ties_use_decoy_first_order() {
        // one correct and one incorrect at the same score
        let space = AssignmentSpace::new(1.0, vec![1.0], vec![1.0]).unwrap();
        let seq = space.incorrect_sequence(1);
        assert_eq!(seq, vec![Origin::Decoy]);
        let profile = space.profile(1);
        assert_eq!((profile.at(1.0).n_tar, profile.at(1.0).n_dec), (1, 1));
    }
}
