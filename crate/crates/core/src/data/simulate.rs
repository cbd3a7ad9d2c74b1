use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{posterior, BeliefParams, InterventionPoint};
use crate::data::grid::canonical_magnitude;
use crate::data::records::{BehaviorRecord, Outcome};
use crate::error::{Error, Result};

/// Magnitude and shot-count axes of an experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxes {
    pub magnitudes: Vec<f64>,
    pub shot_values: Vec<u32>,
}

/// Shot counts of the reference many-shot experiment.
pub const STANDARD_SHOTS: [u32; 25] = [
    0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 14, 16, 20, 24, 28, 32, 40, 48, 56, 64, 80, 96, 112, 128,
];

impl GridAxes {
    /// The reference 33 × 25 experiment grid: magnitudes in steps of 0.1 over
    /// [−1, 1] plus ±{1.5, 2, 2.5, 3, 5, 10}, and 25 shot counts from 0 to 128.
    pub fn standard() -> GridAxes {
        let coarse = [1.5, 2.0, 2.5, 3.0, 5.0, 10.0];
        let mut magnitudes: Vec<f64> = coarse.iter().map(|m| -m).collect();
        magnitudes.extend((-10..=10).map(|i| f64::from(i) / 10.0));
        magnitudes.extend(coarse);
        magnitudes.sort_by(f64::total_cmp);
        GridAxes {
            magnitudes,
            shot_values: STANDARD_SHOTS.to_vec(),
        }
    }

    pub fn new(mut magnitudes: Vec<f64>, mut shot_values: Vec<u32>) -> Result<GridAxes> {
        if magnitudes.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("grid axes", "magnitudes must be finite"));
        }
        magnitudes.iter_mut().for_each(|m| *m = canonical_magnitude(*m));
        magnitudes.sort_by(f64::total_cmp);
        magnitudes.dedup();
        shot_values.sort_unstable();
        shot_values.dedup();
        Ok(GridAxes {
            magnitudes,
            shot_values,
        })
    }

    pub fn points(&self) -> impl Iterator<Item = InterventionPoint> + '_ {
        self.magnitudes.iter().flat_map(move |&m| {
            self.shot_values
                .iter()
                .map(move |&n| InterventionPoint::new(n, m))
        })
    }

    pub fn len(&self) -> usize {
        self.magnitudes.len() * self.shot_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Labels stamped on simulated records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordLabels {
    pub dataset_id: String,
    pub model_id: String,
    pub layer: i64,
}

impl Default for RecordLabels {
    fn default() -> Self {
        RecordLabels {
            dataset_id: "synthetic".into(),
            model_id: "belief-model".into(),
            layer: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulationMode {
    /// Concept-consistent counts drawn from a binomial per cell.
    Binomial,
    /// The infinite-trial limit: each record carries the exact posterior.
    Exact,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Per-cell stream key; depends only on the cell, never on visiting order.
pub(crate) fn cell_seed(seed: u64, dataset: &str, magnitude: f64, shots: u32) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ fnv1a(dataset.as_bytes()));
    h = splitmix64(h ^ canonical_magnitude(magnitude).to_bits());
    splitmix64(h ^ u64::from(shots))
}

/// Draws behavioral records from the belief model over a grid.
///
/// Each cell uses its own generator keyed by `(seed, dataset, m, N)`, so the
/// output is identical however the cells are scheduled.
pub fn simulate_grid(
    params: &BeliefParams,
    axes: &GridAxes,
    trials: u64,
    seed: u64,
    mode: SimulationMode,
    labels: &RecordLabels,
) -> Result<Vec<BehaviorRecord>> {
    if trials == 0 {
        return Err(Error::invalid("simulation", "trials must be at least 1"));
    }
    let points: Vec<InterventionPoint> = axes.points().collect();
    let records = points
        .par_iter()
        .map(|&point| {
            let p = posterior(params, point);
            let outcome = match mode {
                SimulationMode::Exact => Outcome::MeanP(p),
                SimulationMode::Binomial => {
                    let key = cell_seed(seed, &labels.dataset_id, point.magnitude, point.shots);
                    let mut rng = ChaCha8Rng::seed_from_u64(key);
                    let draw = Binomial::new(trials, p).expect("posterior is a probability");
                    Outcome::Count(draw.sample(&mut rng))
                }
            };
            BehaviorRecord {
                dataset_id: labels.dataset_id.clone(),
                model_id: labels.model_id.clone(),
                layer: labels.layer,
                magnitude: point.magnitude,
                shots: point.shots,
                trials,
                outcome,
            }
        })
        .collect();
    Ok(records)
}
