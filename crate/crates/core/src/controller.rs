//! Score-threshold selection for FDR control.
//!
//! [`Method::TdcPlusC`] picks the lowest observed score `x` whose estimate
//! `(N_dec(x) + c) / (r * max(N_tar(x), 1))` is at most `alpha`. With `c = 1`
//! this controls the FDR after peptide-level rollup; with `c < 1` it does not.
//! [`Method::BenjaminiHochberg`] is the step-up rule on empirical p-values
//! `(N_dec(x) + 1) / (N_dec + 1)`, kept for comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::psm::{count_profile, CountProfile, Identification, ProfilePoint, RankedList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[serde(alias = "tdc")]
    TdcPlusC,
    #[serde(alias = "bh")]
    BenjaminiHochberg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolicy")]
pub struct ControlPolicy {
    alpha: f64,
    cfg: EstimatorConfig,
    method: Method,
}

#[derive(Deserialize)]
struct RawPolicy {
    alpha: f64,
    cfg: EstimatorConfig,
    #[serde(default = "default_method")]
    method: Method,
}

fn default_method() -> Method {
    Method::TdcPlusC
}

impl TryFrom<RawPolicy> for ControlPolicy {
    type Error = Error;

    fn try_from(raw: RawPolicy) -> Result<Self> {
        ControlPolicy::new(raw.alpha, raw.cfg, raw.method)
    }
}

impl ControlPolicy {
    pub fn new(alpha: f64, cfg: EstimatorConfig, method: Method) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(ControlPolicy { alpha, cfg, method })
    }

    pub fn tdc(alpha: f64, cfg: EstimatorConfig) -> Result<Self> {
        Self::new(alpha, cfg, Method::TdcPlusC)
    }

    pub fn bh(alpha: f64) -> Result<Self> {
        Self::new(alpha, EstimatorConfig::plus_one(), Method::BenjaminiHochberg)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn cfg(&self) -> &EstimatorConfig {
        &self.cfg
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn with_cfg(mut self, cfg: EstimatorConfig) -> Self {
        self.cfg = cfg;
        self
    }
}

/// A chosen score threshold and the counts at it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub score: f64,
    pub n_tar: usize,
    pub n_dec: usize,
    pub n_inc: Option<usize>,
    pub estimated_fdr: f64,
}

impl Threshold {
    fn at(point: &ProfilePoint, cfg: &EstimatorConfig) -> Self {
        Threshold {
            score: point.score,
            n_tar: point.n_tar,
            n_dec: point.n_dec,
            n_inc: point.n_inc,
            estimated_fdr: cfg.evaluate(point.n_tar, point.n_dec),
        }
    }

    /// False discovery proportion of the retained targets, if truth is known.
    pub fn fdp(&self) -> Option<f64> {
        self.n_inc.map(|inc| inc as f64 / self.n_tar.max(1) as f64)
    }
}

/// Outcome of filtering a list: the threshold (if any score qualified) and
/// the target identifications scoring at or above it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub threshold: Option<Threshold>,
    pub retained: Vec<Identification>,
}

impl ThresholdReport {
    pub fn found(&self) -> bool {
        self.threshold.is_some()
    }
}

/// Lowest observed score passing the `+c` criterion of `policy`.
pub fn select_threshold(profile: &CountProfile, policy: &ControlPolicy) -> Option<Threshold> {
    let cfg = policy.cfg();
    profile
        .points()
        .iter()
        .rev()
        .find(|p| cfg.evaluate(p.n_tar, p.n_dec) <= policy.alpha())
        .map(|p| Threshold::at(p, cfg))
}

/// Empirical p-value of a threshold: `(N_dec(x) + 1) / (N_dec + 1)`.
pub fn empirical_p_value(n_dec_at: usize, n_dec_total: usize) -> f64 {
    (n_dec_at as f64 + 1.0) / (n_dec_total as f64 + 1.0)
}

/// Lowest observed score with `p(x) <= N_tar(x) * alpha / N_tar`.
pub fn select_threshold_bh(profile: &CountProfile, policy: &ControlPolicy) -> Option<Threshold> {
    let totals = profile.totals();
    if totals.n_tar == 0 {
        return None;
    }
    let alpha = policy.alpha();
    profile
        .points()
        .iter()
        .rev()
        .find(|p| empirical_p_value(p.n_dec, totals.n_dec) <= p.n_tar as f64 * alpha / totals.n_tar as f64)
        .map(|p| Threshold::at(p, policy.cfg()))
}

/// Dispatch on the policy's method.
pub fn select(profile: &CountProfile, policy: &ControlPolicy) -> Option<Threshold> {
    match policy.method() {
        Method::TdcPlusC => select_threshold(profile, policy),
        Method::BenjaminiHochberg => select_threshold_bh(profile, policy),
    }
}

/// Targets scoring at or above `threshold`, in rank order.
pub fn retain(list: &RankedList, threshold: Option<&Threshold>) -> Vec<Identification> {
    match threshold {
        None => Vec::new(),
        Some(t) => list
            .iter()
            .take_while(|id| id.score >= t.score)
            .filter(|id| id.is_target())
            .cloned()
            .collect(),
    }
}

/// Count, select and retain in one step.
pub fn control(list: &RankedList, policy: &ControlPolicy) -> ThresholdReport {
    let threshold = select(&count_profile(list), policy);
    let retained = retain(list, threshold.as_ref());
    ThresholdReport { threshold, retained }
}

/// Proportion of incorrect identifications among the retained targets.
pub fn fdp_of(report: &ThresholdReport) -> Result<f64> {
    let mut incorrect = 0usize;
    for id in &report.retained {
        if id
            .is_incorrect()
            .ok_or_else(|| Error::MissingTruth(id.spectrum_id.clone()))?
        {
            incorrect += 1;
        }
    }
    Ok(incorrect as f64 / report.retained.len().max(1) as f64)
}

/// Whether the best identification strictly below the threshold is a decoy.
/// `None` when nothing was selected or nothing lies below it.
pub fn next_below_is_decoy(profile: &CountProfile, threshold: &Threshold) -> Option<bool> {
    let points = profile.points();
    let idx = points.partition_point(|p| p.score >= threshold.score);
    // with decoy-first ranking the first item below is a decoy iff the next
    // score level adds at least one decoy
    points.get(idx).map(|next| next.n_dec > threshold.n_dec)
}
