//! A toy linear-representation world.
//!
//! Concepts are directions `d_i` in `ℝⁿ`, a representation is an additive
//! mixture `v = Σ βᵢ dᵢ`, and belief in concept `i` is read out linearly as
//! `k·(dᵢ·v) + bias`. Steering adds `m·dᵢ` to `v`, which shifts that readout by
//! exactly `k·m·‖dᵢ‖²` whatever `v` was. The functions here build such worlds
//! and measure the shift, and estimate directions by difference of means.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn cosine(x: &[f64], y: &[f64]) -> f64 {
    dot(x, y) / (norm(x) * norm(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceMode {
    /// Unit directions, orthogonalized to working precision.
    ExactOrthogonal,
    /// Independent standard Gaussian directions; nearly orthogonal in high dimension.
    RandomNearOrthogonal,
}

/// Concept directions sharing one ambient space.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptSpace {
    dim: usize,
    directions: Vec<Vec<f64>>,
    orthogonality_tol: f64,
}

/// Orthogonality tolerance used for spaces built in exact mode.
pub const EXACT_TOL: f64 = 1e-12;

impl ConceptSpace {
    /// Wraps explicit directions, checking `|dᵢ·dⱼ| ≤ tol·‖dᵢ‖·‖dⱼ‖` for `i ≠ j`.
    pub fn new(directions: Vec<Vec<f64>>, orthogonality_tol: f64) -> Result<ConceptSpace> {
        let dim = directions.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::invalid("concept space", "need at least one non-empty direction"));
        }
        for d in &directions {
            if d.len() != dim {
                return Err(Error::LengthMismatch {
                    what: "concept direction dimension",
                    left: d.len(),
                    right: dim,
                });
            }
            if d.iter().any(|v| !v.is_finite()) || norm(d) == 0.0 {
                return Err(Error::invalid("concept space", "directions must be finite and non-zero"));
            }
        }
        let space = ConceptSpace {
            dim,
            directions,
            orthogonality_tol,
        };
        let coherence = space.max_abs_cosine();
        if coherence > orthogonality_tol {
            return Err(Error::invalid(
                "concept space",
                format!("max |cos| {coherence:e} exceeds tolerance {orthogonality_tol:e}"),
            ));
        }
        Ok(space)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn direction(&self, i: usize) -> &[f64] {
        &self.directions[i]
    }

    pub fn orthogonality_tol(&self) -> f64 {
        self.orthogonality_tol
    }

    /// Largest `|cos|` between two distinct directions (0 for a single direction).
    pub fn max_abs_cosine(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.directions.len() {
            for j in i + 1..self.directions.len() {
                worst = worst.max(cosine(&self.directions[i], &self.directions[j]).abs());
            }
        }
        worst
    }

    pub fn gram(&self) -> Vec<Vec<f64>> {
        self.directions
            .iter()
            .map(|x| self.directions.iter().map(|y| dot(x, y)).collect())
            .collect()
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.directions.len() {
            Ok(())
        } else {
            Err(Error::invalid(
                "concept index",
                format!("{i} out of range for {} concepts", self.directions.len()),
            ))
        }
    }
}

fn gaussian_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Orthonormalizes in place by modified Gram-Schmidt with a second
/// re-orthogonalization pass.
fn orthonormalize(vectors: &mut [Vec<f64>]) {
    for i in 0..vectors.len() {
        let (done, rest) = vectors.split_at_mut(i);
        let v = &mut rest[0];
        for _ in 0..2 {
            for u in done.iter() {
                let c = dot(u, v);
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = norm(v);
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Builds a space of `n_concepts` directions in `ℝ^dim`.
///
/// Exact mode returns orthonormal directions. Random mode returns unnormalized
/// standard Gaussian directions; its tolerance is the realized mutual coherence.
pub fn make_concept_space(
    dim: usize,
    n_concepts: usize,
    mode: SpaceMode,
    seed: u64,
) -> Result<ConceptSpace> {
    if dim == 0 || n_concepts == 0 {
        return Err(Error::invalid("concept space", "dim and concept count must be positive"));
    }
    if mode == SpaceMode::ExactOrthogonal && n_concepts > dim {
        return Err(Error::invalid(
            "concept space",
            format!("{n_concepts} orthogonal directions do not fit in {dim} dimensions"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut directions: Vec<Vec<f64>> = (0..n_concepts)
        .map(|_| gaussian_vector(dim, &mut rng))
        .collect();
    match mode {
        SpaceMode::ExactOrthogonal => {
            orthonormalize(&mut directions);
            ConceptSpace::new(directions, EXACT_TOL)
        }
        SpaceMode::RandomNearOrthogonal => {
            let probe = ConceptSpace {
                dim,
                directions,
                orthogonality_tol: 1.0,
            };
            let tol = probe.max_abs_cosine();
            Ok(ConceptSpace {
                orthogonality_tol: tol,
                ..probe
            })
        }
    }
}

/// A representation and the mixture coefficients it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    pub betas: Vec<f64>,
    pub vector: Vec<f64>,
}

/// `v = Σ βᵢ dᵢ`.
pub fn embed(betas: &[f64], space: &ConceptSpace) -> Result<Representation> {
    if betas.len() != space.len() {
        return Err(Error::LengthMismatch {
            what: "betas vs concepts",
            left: betas.len(),
            right: space.len(),
        });
    }
    let mut vector = vec![0.0; space.dim];
    for (beta, d) in betas.iter().zip(&space.directions) {
        vector.iter_mut().zip(d).for_each(|(v, x)| *v += beta * x);
    }
    Ok(Representation {
        betas: betas.to_vec(),
        vector,
    })
}

/// `v + m·dᵢ`, with the mixture coefficient of concept `i` moved by `m`.
pub fn steer(
    rep: &Representation,
    space: &ConceptSpace,
    concept: usize,
    magnitude: f64,
) -> Result<Representation> {
    space.check_index(concept)?;
    let d = &space.directions[concept];
    let vector = rep
        .vector
        .iter()
        .zip(d)
        .map(|(v, x)| v + magnitude * x)
        .collect();
    let mut betas = rep.betas.clone();
    if let Some(beta) = betas.get_mut(concept) {
        *beta += magnitude;
    }
    Ok(Representation { betas, vector })
}

/// Coefficients recovered by projection, `(dᵢ·v)/‖dᵢ‖²`. These equal the
/// mixture coefficients only when the directions are orthogonal.
pub fn recover_betas(vector: &[f64], space: &ConceptSpace) -> Vec<f64> {
    space
        .directions
        .iter()
        .map(|d| dot(d, vector) / dot(d, d))
        .collect()
}

/// Linear belief readout for one concept with weight `k·dᵢ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    pub concept_index: usize,
    pub weight_scale: f64,
    pub bias: f64,
    /// `‖dᵢ‖²`.
    pub a_coeff: f64,
}

impl Readout {
    pub fn new(space: &ConceptSpace, concept: usize, weight_scale: f64, bias: f64) -> Result<Readout> {
        space.check_index(concept)?;
        let d = space.direction(concept);
        Ok(Readout {
            concept_index: concept,
            weight_scale,
            bias,
            a_coeff: dot(d, d),
        })
    }

    /// Re-checks a deserialized readout against a space.
    pub fn validate(&self, space: &ConceptSpace) -> Result<()> {
        space.check_index(self.concept_index)?;
        let d = space.direction(self.concept_index);
        let expected = dot(d, d);
        if (self.a_coeff - expected).abs() > 1e-12 * expected {
            return Err(Error::invalid(
                "readout",
                format!("a_coeff {} but ‖d‖² = {expected}", self.a_coeff),
            ));
        }
        Ok(())
    }
}

/// Log odds of concept `i` over its complement, `k·(dᵢ·v) + bias`.
pub fn readout_log_odds(rep: &Representation, readout: &Readout, space: &ConceptSpace) -> f64 {
    readout.weight_scale * dot(space.direction(readout.concept_index), &rep.vector) + readout.bias
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeringFit {
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
}

/// Least-squares line through `(m, readout_log_odds(steer(rep, m)))`.
pub fn verify_steering_shift(
    space: &ConceptSpace,
    readout: &Readout,
    rep: &Representation,
    magnitudes: &[f64],
) -> Result<SteeringFit> {
    readout.validate(space)?;
    if magnitudes.len() < 2 {
        return Err(Error::invalid("steering sweep", "need at least two magnitudes"));
    }
    let points = magnitudes
        .iter()
        .map(|&m| Ok((m, readout_log_odds(&steer(rep, space, readout.concept_index, m)?, readout, space))))
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("steering sweep", "magnitudes must not all be equal"));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = points
        .iter()
        .map(|&(m, y)| (y - (intercept + slope * m)).abs())
        .fold(0.0, f64::max);
    Ok(SteeringFit {
        slope,
        intercept,
        max_residual,
    })
}

/// Running difference of means between two sample populations.
#[derive(Debug, Clone, PartialEq)]
pub struct CaaAccumulator {
    positive_sum: Vec<f64>,
    negative_sum: Vec<f64>,
    positive_count: usize,
    negative_count: usize,
}

impl CaaAccumulator {
    pub fn new(dim: usize) -> Self {
        CaaAccumulator {
            positive_sum: vec![0.0; dim],
            negative_sum: vec![0.0; dim],
            positive_count: 0,
            negative_count: 0,
        }
    }

    fn add(sum: &mut [f64], sample: &[f64]) -> Result<()> {
        if sample.len() != sum.len() {
            return Err(Error::LengthMismatch {
                what: "sample dimension",
                left: sample.len(),
                right: sum.len(),
            });
        }
        sum.iter_mut().zip(sample).for_each(|(s, x)| *s += x);
        Ok(())
    }

    pub fn push_positive(&mut self, sample: &[f64]) -> Result<()> {
        Self::add(&mut self.positive_sum, sample)?;
        self.positive_count += 1;
        Ok(())
    }

    pub fn push_negative(&mut self, sample: &[f64]) -> Result<()> {
        Self::add(&mut self.negative_sum, sample)?;
        self.negative_count += 1;
        Ok(())
    }

    /// `mean(positive) − mean(negative)`.
    pub fn estimate(&self) -> Result<Vec<f64>> {
        if self.positive_count == 0 || self.negative_count == 0 {
            return Err(Error::NoData("difference of means needs both sample sets"));
        }
        let (np, nn) = (self.positive_count as f64, self.negative_count as f64);
        Ok(self
            .positive_sum
            .iter()
            .zip(&self.negative_sum)
            .map(|(p, n)| p / np - n / nn)
            .collect())
    }
}

/// Contrastive activation addition: the difference of sample means.
pub fn caa_estimate(positive: &[Vec<f64>], negative: &[Vec<f64>]) -> Result<Vec<f64>> {
    let dim = positive
        .first()
        .or(negative.first())
        .map_or(0, Vec::len);
    let mut acc = CaaAccumulator::new(dim);
    for s in positive {
        acc.push_positive(s)?;
    }
    for s in negative {
        acc.push_negative(s)?;
    }
    acc.estimate()
}

/// Gaussian generative setup: samples `±β·dᵢ + noise·ε` with isotropic noise,
/// half of them positive, accumulated without storing the samples.
pub fn simulate_caa(
    direction: &[f64],
    beta: f64,
    noise: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = CaaAccumulator::new(direction.len());
    let mut sample = vec![0.0; direction.len()];
    for i in 0..samples {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        for (s, d) in sample.iter_mut().zip(direction) {
            let eps: f64 = StandardNormal.sample(&mut rng);
            *s = sign * beta * d + noise * eps;
        }
        if sign > 0.0 {
            acc.push_positive(&sample)?;
        } else {
            acc.push_negative(&sample)?;
        }
    }
    acc.estimate()
}
