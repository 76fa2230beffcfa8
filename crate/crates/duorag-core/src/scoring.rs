//! Confidence scores over first-position token log-probabilities and the
//! threshold-gated pre-check / post-check decisions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Token set whose summed probability mass defines the confidence score.
/// Membership is case-sensitive; leading-space variants are distinct tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AffirmativeSet {
    pub tokens: BTreeSet<String>,
}

impl AffirmativeSet {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(tokens: I) -> Result<Self, ScoreError> {
        let tokens: BTreeSet<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() {
            return Err(ScoreError::InvalidArgument("empty affirmative set".into()));
        }
        Ok(Self { tokens })
    }

    /// `yes` variants, with the leading-space forms subword vocabularies emit.
    pub fn yes_tokens() -> Self {
        Self::new(["yes", "Yes", " yes", " Yes"]).unwrap()
    }

    /// `no` variants; the default post-check scoring set.
    pub fn no_tokens() -> Self {
        Self::new(["no", "No", " no", " No"]).unwrap()
    }
}

/// Gating thresholds and the retrieval-round cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Pre-check threshold: retrieval starts when the score exceeds it.
    pub delta1: f64,
    /// Post-check threshold: another round runs when the score exceeds it.
    pub delta4: f64,
    /// Hard cap on retrieval rounds per session.
    pub max_iterations: u32,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { delta1: -2.0, delta4: -3.0, max_iterations: 3 }
    }
}

/// How a check maps "score exceeded the threshold" onto its decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckPolarity {
    /// Exceeding the threshold means proceed (retrieve / continue).
    AffirmativeMeansProceed,
    /// Exceeding the threshold means stand down (skip / stop).
    AffirmativeMeansStop,
}

impl CheckPolarity {
    /// Applies the polarity to the raw threshold comparison.
    pub fn proceed(self, exceeds_threshold: bool) -> bool {
        match self {
            CheckPolarity::AffirmativeMeansProceed => exceeds_threshold,
            CheckPolarity::AffirmativeMeansStop => !exceeds_threshold,
        }
    }
}

/// Scoring configuration for one check phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub tokens: AffirmativeSet,
    pub polarity: CheckPolarity,
}

impl CheckConfig {
    /// Pre-check default: `yes` means "I do not understand a term", so
    /// affirmative mass argues for retrieval.
    pub fn pre_check_default() -> Self {
        Self {
            tokens: AffirmativeSet::yes_tokens(),
            polarity: CheckPolarity::AffirmativeMeansProceed,
        }
    }

    /// Post-check default: the prompt's `yes` means "context is sufficient",
    /// so the score is taken over the `no` tokens and high mass argues for
    /// another round.
    pub fn post_check_default() -> Self {
        Self {
            tokens: AffirmativeSet::no_tokens(),
            polarity: CheckPolarity::AffirmativeMeansProceed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreDecision {
    Retrieve,
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostDecision {
    Continue,
    Stop,
}

/// Log of the probability mass the scored set holds at one position:
/// `log(sum_{t in S} exp(logprob_t))` over the tokens present in the map.
///
/// An empty intersection yields negative infinity — the mass is
/// unobservably small among the reported top-K tokens, and the strict
/// threshold comparisons then naturally read it as skip/stop.
pub fn affirmative_score(
    position_logprobs: &BTreeMap<String, f64>,
    set: &AffirmativeSet,
) -> Result<f64, ScoreError> {
    if position_logprobs.is_empty() {
        return Err(ScoreError::InvalidArgument("empty logprob map".into()));
    }
    let members: Vec<f64> = position_logprobs
        .iter()
        .filter(|(token, _)| set.tokens.contains(*token))
        .map(|(_, lp)| *lp)
        .collect();
    if members.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    // log-sum-exp anchored at the max member for numerical stability
    let max = members.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = members.iter().map(|lp| (lp - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Retrieval is triggered iff `score0 > delta1` (strict).
pub fn pre_check(score0: f64, thresholds: &Thresholds) -> PreDecision {
    if score0 > thresholds.delta1 {
        PreDecision::Retrieve
    } else {
        PreDecision::Skip
    }
}

/// Another round runs iff `score_k > delta4` (strict) and the round cap is
/// not yet reached. The cap dominates regardless of score.
pub fn post_check(score_k: f64, k: u32, thresholds: &Thresholds) -> PostDecision {
    if score_k > thresholds.delta4 && k < thresholds.max_iterations {
        PostDecision::Continue
    } else {
        PostDecision::Stop
    }
}

/// [`pre_check`] with the configured polarity applied to the comparison.
pub fn pre_check_with_polarity(
    score0: f64,
    thresholds: &Thresholds,
    polarity: CheckPolarity,
) -> PreDecision {
    if polarity.proceed(score0 > thresholds.delta1) {
        PreDecision::Retrieve
    } else {
        PreDecision::Skip
    }
}

/// [`post_check`] with the configured polarity; the iteration cap still
/// dominates.
pub fn post_check_with_polarity(
    score_k: f64,
    k: u32,
    thresholds: &Thresholds,
    polarity: CheckPolarity,
) -> PostDecision {
    if polarity.proceed(score_k > thresholds.delta4) && k < thresholds.max_iterations {
        PostDecision::Continue
    } else {
        PostDecision::Stop
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(t, lp)| (t.to_string(), *lp)).collect()
    }

    #[test]
    fn singleton_intersection_passes_through() {
        let s = AffirmativeSet::new(["yes"]).unwrap();
        let score = affirmative_score(&map(&[("yes", -0.5), ("no", -1.5)]), &s).unwrap();
        assert_eq!(score, -0.5);
    }

    #[test]
    fn two_member_mass_sums_in_probability_space() {
        let s = AffirmativeSet::new(["yes", "Yes"]).unwrap();
        let score = affirmative_score(
            &map(&[("yes", 0.5_f64.ln()), ("Yes", 0.25_f64.ln())]),
            &s,
        )
        .unwrap();
        // brute-force oracle: sum probabilities, then log
        let oracle = (0.5_f64 + 0.25).ln();
        assert!((score - oracle).abs() < 1e-12, "{score} vs {oracle}");
        assert!((score - (-0.28768207245178085)).abs() < 1e-12);
    }

    #[test]
    fn empty_intersection_is_negative_infinity() {
        let s = AffirmativeSet::new(["yes"]).unwrap();
        let score = affirmative_score(&map(&[("maybe", -0.1)]), &s).unwrap();
        assert_eq!(score, f64::NEG_INFINITY);
    }

    #[test]
    fn empty_map_is_invalid() {
        let s = AffirmativeSet::new(["yes"]).unwrap();
        assert!(affirmative_score(&BTreeMap::new(), &s).is_err());
    }

    #[test]
    fn pre_check_strict_inequality() {
        let th = Thresholds::default();
        assert_eq!(pre_check(-1.5, &th), PreDecision::Retrieve);
        assert_eq!(pre_check(-2.5, &th), PreDecision::Skip);
        assert_eq!(pre_check(-2.0, &th), PreDecision::Skip); // boundary
    }

    #[test]
    fn post_check_threshold_and_cap() {
        let th = Thresholds::default();
        assert_eq!(post_check(-2.0, 1, &th), PostDecision::Continue);
        assert_eq!(post_check(-2.0, 3, &th), PostDecision::Stop); // cap dominates
        assert_eq!(post_check(-3.0, 1, &th), PostDecision::Stop); // boundary
        assert_eq!(post_check(f64::NEG_INFINITY, 1, &th), PostDecision::Stop);
    }

    #[test]
    fn polarity_inverts_the_comparison() {
        let th = Thresholds::default();
        assert_eq!(
            pre_check_with_polarity(-1.0, &th, CheckPolarity::AffirmativeMeansStop),
            PreDecision::Skip
        );
        assert_eq!(
            pre_check_with_polarity(-3.0, &th, CheckPolarity::AffirmativeMeansStop),
            PreDecision::Retrieve
        );
        // the cap dominates even under inverted polarity
        assert_eq!(
            post_check_with_polarity(-9.0, 3, &th, CheckPolarity::AffirmativeMeansStop),
            PostDecision::Stop
        );
    }

    proptest! {
        /// Growing the token set never lowers the score.
        #[test]
        fn monotone_in_set(
            probs in proptest::collection::vec(1e-6_f64..0.2, 2..6),
            split in 1usize..5,
        ) {
            let tokens: Vec<String> = (0..probs.len()).map(|i| format!("t{i}")).collect();
            let lp: BTreeMap<String, f64> = tokens
                .iter()
                .zip(&probs)
                .map(|(t, p)| (t.clone(), p.ln()))
                .collect();
            let split = split.min(tokens.len());
            let small = AffirmativeSet::new(tokens[..split].to_vec()).unwrap();
            let large = AffirmativeSet::new(tokens.clone()).unwrap();
            let a = affirmative_score(&lp, &small).unwrap();
            let b = affirmative_score(&lp, &large).unwrap();
            prop_assert!(a <= b + 1e-12);
        }

        /// Raising delta1 never flips skip into retrieve; raising delta4
        /// never flips stop into continue.
        #[test]
        fn monotone_in_thresholds(score in -10.0_f64..0.0, d in -5.0_f64..0.0, bump in 0.0_f64..3.0) {
            let low = Thresholds { delta1: d, delta4: d, max_iterations: 3 };
            let high = Thresholds { delta1: d + bump, delta4: d + bump, max_iterations: 3 };
            if pre_check(score, &low) == PreDecision::Skip {
                prop_assert_eq!(pre_check(score, &high), PreDecision::Skip);
            }
            if post_check(score, 1, &low) == PostDecision::Stop {
                prop_assert_eq!(post_check(score, 1, &high), PostDecision::Stop);
            }
        }

        /// Scores never exceed zero when the map holds a valid distribution.
        #[test]
        fn score_upper_bound(probs in proptest::collection::vec(1e-9_f64..0.2, 1..5)) {
            let lp: BTreeMap<String, f64> = probs
                .iter()
                .enumerate()
                .map(|(i, p)| (format!("t{i}"), p.ln()))
                .collect();
            let all = AffirmativeSet::new(lp.keys().cloned().collect::<Vec<_>>()).unwrap();
            prop_assert!(affirmative_score(&lp, &all).unwrap() <= 0.0);
        }
    }
}
