use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::fit::loss::Objective;
use crate::fit::FitConfig;

/// Gaussian step size as a fraction of each bound's width.
pub const STEP_FRACTION: f64 = 0.1;
/// Metropolis temperature on the loss scale.
pub const TEMPERATURE: f64 = 1.0;

/// A proposed starting point and its loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub index: usize,
    pub x: [f64; 4],
    pub loss: f64,
}

/// Runs a basin-hopping walk and returns every visited proposal.
///
/// The walk starts from a uniform draw within the bounds; each step perturbs
/// the current point by a Gaussian (clipped to the bounds) and accepts by the
/// Metropolis rule. Exactly `config.basin_hop_iterations` candidates are
/// returned, the first being the uniform start.
pub fn propose_starts(objective: &Objective, config: &FitConfig) -> Vec<Candidate> {
    let bounds = config.parameter_bounds.as_array();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let steps: Vec<Normal<f64>> = bounds
        .iter()
        .map(|(lo, hi)| Normal::new(0.0, STEP_FRACTION * (hi - lo)).expect("finite bounds"))
        .collect();

    let mut current: [f64; 4] = std::array::from_fn(|i| rng.random_range(bounds[i].0..bounds[i].1));
    let mut current_loss = objective.loss(&current);
    let mut candidates = Vec::with_capacity(config.basin_hop_iterations);
    candidates.push(Candidate {
        index: 0,
        x: current,
        loss: current_loss,
    });

    for index in 1..config.basin_hop_iterations {
        let x: [f64; 4] = std::array::from_fn(|i| {
            (current[i] + steps[i].sample(&mut rng)).clamp(bounds[i].0, bounds[i].1)
        });
        let loss = objective.loss(&x);
        candidates.push(Candidate { index, x, loss });
        let u: f64 = rng.random();
        if loss <= current_loss || u < (-(loss - current_loss) / TEMPERATURE).exp() {
            current = x;
            current_loss = loss;
        }
    }
    candidates
}
