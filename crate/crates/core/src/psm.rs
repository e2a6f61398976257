//! Identifications, deterministic ranking and per-threshold counting.
//!
//! Scores are larger-is-better. At equal score, decoys rank ahead of targets,
//! so a tied decoy is always counted together with the targets it ties with.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    // Declared first so the derived order puts decoys ahead on ties.
    Decoy,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truth {
    Correct,
    Incorrect,
}

/// One scored spectrum match coming out of a concatenated target+decoy search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub spectrum_id: String,
    pub peptide_key: String,
    pub score: f64,
    pub origin: Origin,
    /// Ground truth, known only for simulated or oracle data.
    pub truth: Option<Truth>,
}

impl Identification {
    pub fn new(spectrum_id: impl Into<String>, peptide_key: impl Into<String>, score: f64, origin: Origin) -> Self {
        Identification {
            spectrum_id: spectrum_id.into(),
            peptide_key: peptide_key.into(),
            score,
            origin,
            truth: None,
        }
    }

    pub fn with_truth(mut self, truth: Truth) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn is_target(&self) -> bool {
        self.origin == Origin::Target
    }

    /// Whether this is an incorrect identification. Decoys are incorrect by
    /// construction; targets need a truth label.
    pub fn is_incorrect(&self) -> Option<bool> {
        match (self.origin, self.truth) {
            (Origin::Decoy, _) => Some(true),
            (Origin::Target, Some(t)) => Some(t == Truth::Incorrect),
            (Origin::Target, None) => None,
        }
    }

    /// Sign encoding used by the proofs: 0 correct, 1 incorrect target,
    /// -1 decoy.
    pub fn sign(&self) -> Option<i8> {
        match (self.origin, self.truth) {
            (Origin::Decoy, _) => Some(-1),
            (Origin::Target, Some(Truth::Correct)) => Some(0),
            (Origin::Target, Some(Truth::Incorrect)) => Some(1),
            (Origin::Target, None) => None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.score.is_finite() {
            return Err(Error::NonFiniteScore {
                spectrum_id: self.spectrum_id.clone(),
                score: self.score,
            });
        }
        if self.origin == Origin::Decoy && self.truth == Some(Truth::Correct) {
            return Err(Error::CorrectDecoy(self.spectrum_id.clone()));
        }
        Ok(())
    }
}

/// Rank order on (score, origin): higher score first, decoy before target on
/// equal score. Callers break any remaining tie on their own stable key.
pub fn rank_order(a_score: f64, a_origin: Origin, b_score: f64, b_origin: Origin) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_origin.cmp(&b_origin))
}

fn full_order(a: &Identification, b: &Identification) -> Ordering {
    rank_order(a.score, a.origin, b.score, b.origin).then_with(|| a.spectrum_id.cmp(&b.spectrum_id))
}

/// Identifications in rank order. Only constructible through [`rank`] or
/// [`rollup_peptide_level`], so the ordering invariant always holds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankedList {
    items: Vec<Identification>,
}

impl RankedList {
    pub fn items(&self) -> &[Identification] {
        &self.items
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Identification> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn into_vec(self) -> Vec<Identification> {
        self.items
    }

    /// True when every target carries a truth label.
    pub fn has_truth(&self) -> bool {
        self.items.iter().all(|id| id.is_incorrect().is_some())
    }
}

impl<'a> IntoIterator for &'a RankedList {
    type Item = &'a Identification;
    type IntoIter = std::slice::Iter<'a, Identification>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

/// Validate and sort identifications into a [`RankedList`].
///
/// Rejects non-finite scores, duplicate spectrum ids and decoys labelled
/// correct.
pub fn rank(items: impl IntoIterator<Item = Identification>) -> Result<RankedList> {
    let mut items: Vec<Identification> = items.into_iter().collect();
    let mut seen = HashSet::with_capacity(items.len());
    for id in &items {
        id.validate()?;
        if !seen.insert(id.spectrum_id.as_str()) {
            return Err(Error::DuplicateSpectrum(id.spectrum_id.clone()));
        }
    }
    items.sort_by(full_order);
    Ok(RankedList { items })
}

/// Keep the best-ranked identification of every peptide, preserving order.
pub fn rollup_peptide_level(list: &RankedList) -> RankedList {
    let mut seen = HashSet::with_capacity(list.len());
    let items = list
        .iter()
        .filter(|id| seen.insert(id.peptide_key.as_str()))
        .cloned()
        .collect();
    RankedList { items }
}

/// Cumulative counts over all identifications scoring at least `score`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub score: f64,
    pub n_tar: usize,
    pub n_dec: usize,
    /// Incorrect targets; present only when truth is known for every target.
    pub n_inc: Option<usize>,
}

impl ProfilePoint {
    pub fn n_cor(&self) -> Option<usize> {
        self.n_inc.map(|inc| self.n_tar - inc)
    }

    /// Counts below every observed score.
    pub fn empty(has_truth: bool) -> Self {
        ProfilePoint {
            score: f64::INFINITY,
            n_tar: 0,
            n_dec: 0,
            n_inc: has_truth.then_some(0),
        }
    }
}

/// Target/decoy tallies at every distinct observed score, best score first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CountProfile {
    points: Vec<ProfilePoint>,
    has_truth: bool,
}

impl CountProfile {
    /// Build from `(score, origin, incorrect)` triples already in rank order.
    /// `incorrect` is `None` when a target's truth is unknown; truth counts
    /// are kept only if it is known for every item.
    pub fn from_ranked<I>(items: I) -> Self
    where
        I: IntoIterator<Item = (f64, Origin, Option<bool>)>,
    {
        let mut points: Vec<ProfilePoint> = Vec::new();
        let (mut n_tar, mut n_dec, mut n_inc) = (0usize, 0usize, 0usize);
        let mut has_truth = true;
        let mut current: Option<f64> = None;
        for (score, origin, incorrect) in items {
            if let Some(prev) = current {
                debug_assert!(score <= prev, "items must be in rank order");
                if score != prev {
                    points.push(ProfilePoint {
                        score: prev,
                        n_tar,
                        n_dec,
                        n_inc: Some(n_inc),
                    });
                }
            }
            current = Some(score);
            match origin {
                Origin::Target => n_tar += 1,
                Origin::Decoy => n_dec += 1,
            }
            match incorrect {
                Some(true) if origin == Origin::Target => n_inc += 1,
                Some(_) => {}
                None => has_truth = false,
            }
        }
        if let Some(score) = current {
            points.push(ProfilePoint {
                score,
                n_tar,
                n_dec,
                n_inc: Some(n_inc),
            });
        }
        if !has_truth {
            for p in &mut points {
                p.n_inc = None;
            }
        }
        CountProfile { points, has_truth }
    }

    pub fn points(&self) -> &[ProfilePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn has_truth(&self) -> bool {
        self.has_truth
    }

    /// Counts over the whole list.
    pub fn totals(&self) -> ProfilePoint {
        self.points
            .last()
            .copied()
            .unwrap_or_else(|| ProfilePoint::empty(self.has_truth))
    }

    /// Counts over identifications with score >= `x`.
    pub fn at(&self, x: f64) -> ProfilePoint {
        // points are sorted by descending score
        let idx = self.points.partition_point(|p| p.score >= x);
        if idx == 0 {
            ProfilePoint {
                score: x,
                ..ProfilePoint::empty(self.has_truth)
            }
        } else {
            self.points[idx - 1]
        }
    }
}

pub fn count_profile(list: &RankedList) -> CountProfile {
    CountProfile::from_ranked(list.iter().map(|id| (id.score, id.origin, id.is_incorrect())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RedundancyFilter {
    All,
    IncorrectOnly,
}

/// Spectra per distinct peptide among the filtered identifications.
pub fn mean_redundancy(list: &RankedList, filter: RedundancyFilter) -> Result<f64> {
    let mut spectra = 0usize;
    let mut peptides = HashSet::new();
    for id in list {
        let keep = match filter {
            RedundancyFilter::All => true,
            RedundancyFilter::IncorrectOnly => id
                .is_incorrect()
                .ok_or_else(|| Error::MissingTruth(id.spectrum_id.clone()))?,
        };
        if keep {
            spectra += 1;
            peptides.insert(id.peptide_key.as_str());
        }
    }
    if peptides.is_empty() {
        return Ok(0.0);
    }
    Ok(spectra as f64 / peptides.len() as f64)
}
