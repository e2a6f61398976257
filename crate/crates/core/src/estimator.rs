//! Point FDR estimates of the form `(N_dec(x) + c) / (r * max(N_tar(x), 1))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psm::{CountProfile, ProfilePoint};

/// Decoy ratio `r`, correction constant `c` and whether to cap at 1.
///
/// `r = 1, c = 0` is the classic decoy/target ratio; `c = 1` gives the
/// "+1" corrected form used for threshold control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct EstimatorConfig {
    r: f64,
    c: f64,
    clamp: bool,
}

#[derive(Deserialize)]
struct RawConfig {
    r: f64,
    c: f64,
    #[serde(default)]
    clamp: bool,
}

impl TryFrom<RawConfig> for EstimatorConfig {
    type Error = Error;

    fn try_from(raw: RawConfig) -> Result<Self> {
        Ok(EstimatorConfig::new(raw.r, raw.c)?.clamped(raw.clamp))
    }
}

impl EstimatorConfig {
    pub fn new(r: f64, c: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidConfig(format!("decoy ratio r must be positive, got {r}")));
        }
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "correction c must be nonnegative, got {c}"
            )));
        }
        Ok(EstimatorConfig { r, c, clamp: false })
    }

    /// `N_dec / N_tar`.
    pub fn plain() -> Self {
        EstimatorConfig {
            r: 1.0,
            c: 0.0,
            clamp: false,
        }
    }

    /// `(N_dec + 1) / N_tar`.
    pub fn plus_one() -> Self {
        EstimatorConfig {
            r: 1.0,
            c: 1.0,
            clamp: false,
        }
    }

    pub fn clamped(mut self, clamp: bool) -> Self {
        self.clamp = clamp;
        self
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn clamp(&self) -> bool {
        self.clamp
    }

    pub fn evaluate(&self, n_tar: usize, n_dec: usize) -> f64 {
        let value = (n_dec as f64 + self.c) / (self.r * n_tar.max(1) as f64);
        if self.clamp {
            value.min(1.0)
        } else {
            value
        }
    }
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self::plain()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdrEstimate {
    pub threshold: f64,
    pub n_tar: usize,
    pub n_dec: usize,
    pub value: f64,
}

impl FdrEstimate {
    fn from_point(threshold: f64, point: &ProfilePoint, cfg: &EstimatorConfig) -> Self {
        FdrEstimate {
            threshold,
            n_tar: point.n_tar,
            n_dec: point.n_dec,
            value: cfg.evaluate(point.n_tar, point.n_dec),
        }
    }
}

/// Estimate over all identifications scoring at least `x`.
pub fn estimate_at(profile: &CountProfile, x: f64, cfg: &EstimatorConfig) -> FdrEstimate {
    FdrEstimate::from_point(x, &profile.at(x), cfg)
}

/// One estimate per distinct observed score, best score first.
pub fn estimate_curve(profile: &CountProfile, cfg: &EstimatorConfig) -> Vec<FdrEstimate> {
    profile
        .points()
        .iter()
        .map(|p| FdrEstimate::from_point(p.score, p, cfg))
        .collect()
}

/// Running minimum from the lowest threshold upwards: `out[i]` is the smallest
/// estimate at or below `curve[i].threshold`.
pub fn monotone_min_fdr(curve: &[FdrEstimate]) -> Vec<f64> {
    let mut out = vec![0.0; curve.len()];
    let mut running = f64::INFINITY;
    for (slot, est) in out.iter_mut().zip(curve).rev() {
        running = running.min(est.value);
        *slot = running;
    }
    out
}
