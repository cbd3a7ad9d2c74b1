//! Closed-form belief dynamics.
//!
//! Behavior follows the posterior belief in a binary concept `c` (versus its
//! complement `c'`). The log posterior odds decompose into a steering term that
//! is linear in the magnitude `m`, a prior term `b`, and an evidence term that
//! grows sub-linearly with the number of in-context shots `N`:
//!
//! ```text
//! log o(c|x) = a·m + b + γ·N^(1−α)
//! p(c|x)     = σ(log o(c|x))
//! ```
//!
//! Every function here is a pure function of its arguments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four scalars of the belief-dynamics model.
///
/// `gamma` absorbs the power-law constant of the per-example loss curve
/// (`γ = A / (1 − α)`), so `A` never appears on its own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct BeliefParams {
    a: f64,
    b: f64,
    gamma: f64,
    alpha: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    a: f64,
    b: f64,
    gamma: f64,
    alpha: f64,
}

impl TryFrom<RawParams> for BeliefParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        BeliefParams::new(raw.a, raw.b, raw.gamma, raw.alpha)
    }
}

impl From<BeliefParams> for RawParams {
    fn from(p: BeliefParams) -> Self {
        RawParams {
            a: p.a,
            b: p.b,
            gamma: p.gamma,
            alpha: p.alpha,
        }
    }
}

impl BeliefParams {
    pub fn new(a: f64, b: f64, gamma: f64, alpha: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid("belief params", "a and b must be finite"));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::invalid(
                "belief params",
                format!("gamma must be finite and > 0, got {gamma}"),
            ));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::invalid(
                "belief params",
                format!("alpha must lie in [0, 1), got {alpha}"),
            ));
        }
        Ok(BeliefParams { a, b, gamma, alpha })
    }

    /// Builds parameters from `[a, b, gamma, alpha]`.
    pub fn from_array(v: [f64; 4]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.a, self.b, self.gamma, self.alpha]
    }

    /// Log-odds shift per unit steering magnitude.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Baseline log prior odds.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Evidence-accumulation rate.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Sub-linearity exponent.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// A point in intervention space: shot count and steering magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterventionPoint {
    pub shots: u32,
    pub magnitude: f64,
}

impl InterventionPoint {
    pub fn new(shots: u32, magnitude: f64) -> Self {
        InterventionPoint { shots, magnitude }
    }
}

/// Observed labels paired with the labels concept `c` would have produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSequence {
    observed: Vec<bool>,
    concept_consistent: Vec<bool>,
}

impl LabelSequence {
    pub fn new(observed: Vec<bool>, concept_consistent: Vec<bool>) -> Result<Self> {
        if observed.len() != concept_consistent.len() {
            return Err(Error::LengthMismatch {
                what: "observed vs concept-consistent labels",
                left: observed.len(),
                right: concept_consistent.len(),
            });
        }
        Ok(LabelSequence {
            observed,
            concept_consistent,
        })
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }
}

/// `N^(1−α)` for real `N ≥ 0`, with `0^(1−α) = 0`.
pub fn evidence_scale(shots: f64, alpha: f64) -> f64 {
    if shots == 0.0 {
        0.0
    } else {
        shots.powf(1.0 - alpha)
    }
}

/// Log posterior odds of the concept at an intervention point.
pub fn log_odds(params: &BeliefParams, point: InterventionPoint) -> f64 {
    log_odds_continuous(params, f64::from(point.shots), point.magnitude)
}

/// [`log_odds`] with `N` treated as a non-negative real.
pub fn log_odds_continuous(params: &BeliefParams, shots: f64, magnitude: f64) -> f64 {
    steering_offset(params, magnitude) + log_bayes_factor(shots, params.gamma, params.alpha)
}

/// The context-free part of the log odds, `a·m + b`.
fn steering_offset(params: &BeliefParams, magnitude: f64) -> f64 {
    params.a * magnitude + params.b
}

/// Probability of concept-consistent behavior, `σ(log o)`.
pub fn posterior(params: &BeliefParams, point: InterventionPoint) -> f64 {
    sigmoid(log_odds(params, point))
}

/// `1 − posterior`, computed without cancellation as `σ(−log o)`.
pub fn posterior_complement(params: &BeliefParams, point: InterventionPoint) -> f64 {
    sigmoid(-log_odds(params, point))
}

/// Logistic function, evaluated without overflow for either sign.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Context length `N*` at which belief in `c` overtakes `c'` for a fixed
/// steering magnitude. Returns 0 when `c` already dominates without context.
pub fn transition_point(params: &BeliefParams, magnitude: f64) -> f64 {
    let offset = steering_offset(params, magnitude);
    if offset >= 0.0 {
        return 0.0;
    }
    (-offset / params.gamma).powf(1.0 / (1.0 - params.alpha))
}

/// Goodman-style log likelihood: minus the number of mismatched labels.
pub fn mismatch_log_likelihood(seq: &LabelSequence) -> i64 {
    let mismatches = seq
        .observed
        .iter()
        .zip(&seq.concept_consistent)
        .filter(|(l, y)| l != y)
        .count();
    -(mismatches as i64)
}

/// Discounted log Bayes factor after `N` concept-consistent shots, `γ·N^(1−α)`.
pub fn log_bayes_factor(shots: f64, gamma: f64, alpha: f64) -> f64 {
    gamma * evidence_scale(shots, alpha)
}

/// Discount factor as the exact finite average `(1/N)·Σ_{n=1..N} A·n^(−α)`.
///
/// This is the quantity the closed form [`discount_factor_closed_form`]
/// approximates by an integral.
pub fn discount_factor_numeric(shots: u64, scale: f64, alpha: f64) -> f64 {
    assert!(shots >= 1, "discount factor needs at least one shot");
    // Summing smallest terms first keeps the rounding error flat in N.
    let sum: f64 = (1..=shots).rev().map(|n| (n as f64).powf(-alpha)).sum();
    scale * sum / shots as f64
}

/// Closed-form discount factor `(A / (1 − α))·N^(−α)`.
pub fn discount_factor_closed_form(shots: u64, scale: f64, alpha: f64) -> f64 {
    scale / (1.0 - alpha) * (shots as f64).powf(-alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference() -> BeliefParams {
        BeliefParams::new(1.0, -4.0, 0.8, 0.3).unwrap()
    }

    #[test]
    fn rejects_bad_params() {
        assert!(BeliefParams::new(f64::NAN, 0.0, 1.0, 0.5).is_err());
        assert!(BeliefParams::new(0.0, f64::INFINITY, 1.0, 0.5).is_err());
        assert!(BeliefParams::new(0.0, 0.0, 0.0, 0.5).is_err());
        assert!(BeliefParams::new(0.0, 0.0, -1.0, 0.5).is_err());
        assert!(BeliefParams::new(0.0, 0.0, 1.0, 1.0).is_err());
        assert!(BeliefParams::new(0.0, 0.0, 1.0, -0.1).is_err());
        assert!(BeliefParams::new(0.0, 0.0, 1.0, f64::NAN).is_err());
        assert!(BeliefParams::new(0.0, 0.0, 1.0, 0.0).is_ok());
    }

    #[test]
    fn serde_validates() {
        let ok: BeliefParams =
            serde_json::from_str(r#"{"a":1,"b":-4,"gamma":0.8,"alpha":0.3}"#).unwrap();
        assert_eq!(ok, reference());
        assert!(
            serde_json::from_str::<BeliefParams>(r#"{"a":1,"b":-4,"gamma":0.8,"alpha":1.0}"#)
                .is_err()
        );
    }

    #[test]
    fn log_odds_examples() {
        let p = reference();
        assert_eq!(log_odds(&p, InterventionPoint::new(0, 0.0)), -4.0);
        // 1 − 4 + 0.8·16^0.7, evaluated with 16^0.7 = 2^2.8 = 6.964404506368993
        assert_relative_eq!(
            log_odds(&p, InterventionPoint::new(16, 1.0)),
            2.571523605095194,
            max_relative = 1e-12
        );

        let linear = BeliefParams::new(0.7, -2.5, 0.3, 0.0).unwrap();
        for n in [0u32, 1, 7, 128] {
            let m = 1.5;
            assert_eq!(
                log_odds(&linear, InterventionPoint::new(n, m)),
                0.7 * m + -2.5 + 0.3 * f64::from(n)
            );
        }
    }

    #[test]
    fn posterior_examples() {
        let p = reference();
        assert_relative_eq!(
            posterior(&p, InterventionPoint::new(0, 0.0)),
            0.017_986_209_962_091_56,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            posterior(&p, InterventionPoint::new(16, 1.0)),
            0.9290062489208287,
            max_relative = 1e-14
        );
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!(sigmoid(-700.0) > 0.0);
    }

    #[test]
    fn transition_examples() {
        let p = reference();
        assert_relative_eq!(
            transition_point(&p, 0.0),
            5f64.powf(1.0 / 0.7),
            max_relative = 1e-14
        );
        assert_relative_eq!(transition_point(&p, 0.0), 9.966, epsilon = 1e-3);
        assert_eq!(transition_point(&p, 4.0), 0.0);
        assert_eq!(transition_point(&p, 10.0), 0.0);

        let unit = BeliefParams::new(0.0, -0.8, 0.8, 0.3).unwrap();
        assert_eq!(transition_point(&unit, 3.0), 1.0);
    }

    #[test]
    fn mismatch_examples() {
        let all = vec![true, false, true, true];
        let seq = LabelSequence::new(all.clone(), all.clone()).unwrap();
        assert_eq!(mismatch_log_likelihood(&seq), 0);

        let flipped = all.iter().map(|l| !l).collect();
        let seq = LabelSequence::new(all, flipped).unwrap();
        assert_eq!(mismatch_log_likelihood(&seq), -4);

        let seq = LabelSequence::new(
            vec![true, true, true, true, true],
            vec![false, true, false, true, false],
        )
        .unwrap();
        assert_eq!(mismatch_log_likelihood(&seq), -3);

        assert!(LabelSequence::new(vec![true], vec![]).is_err());
        let empty = LabelSequence::new(vec![], vec![]).unwrap();
        assert_eq!(mismatch_log_likelihood(&empty), 0);
    }

    #[test]
    fn bayes_factor_examples() {
        assert_eq!(log_bayes_factor(0.0, 3.0, 0.4), 0.0);
        assert_eq!(log_bayes_factor(1.0, 3.0, 0.4), 3.0);
        assert_eq!(log_bayes_factor(4.0, 2.0, 0.5), 4.0);
        assert_eq!(log_bayes_factor(37.0, 0.25, 0.0), 0.25 * 37.0);
    }

    #[test]
    fn discount_examples() {
        assert_eq!(discount_factor_numeric(1, 1.0, 0.5), 1.0);
        let numeric = discount_factor_numeric(100, 1.0, 0.5);
        assert_relative_eq!(numeric, 0.18589603824784153, max_relative = 1e-13);
        assert_relative_eq!(discount_factor_closed_form(100, 1.0, 0.5), 0.2);
    }
}
