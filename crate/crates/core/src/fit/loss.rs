//! Weighted binary cross-entropy between the belief model and a behavior grid,
//! with its analytic gradient.

use std::collections::BTreeMap;

use crate::belief::{evidence_scale, BeliefParams};
use crate::data::emit::plot_shots;
use crate::data::BehaviorGrid;
use crate::error::{Error, Result};

/// Lower clamp on predicted probabilities (upper clamp is `1 − ε`).
pub const PROB_EPSILON: f64 = 1e-12;

/// Per-shot-count loss weights.
pub type ShotWeights = BTreeMap<u32, f64>;

/// Equal-width bins over `log₂ N` (with `N = 0` placed at `log₂ 0.6`); each shot
/// value is weighted by one over the number of distinct shot values sharing its bin.
pub fn bin_weights(grid: &BehaviorGrid, n_bins: usize) -> ShotWeights {
    assert!(n_bins >= 1, "need at least one bin");
    let shots = grid.shot_values();
    let Some((&first, &last)) = shots.first().zip(shots.last()) else {
        return ShotWeights::new();
    };
    let lo = plot_shots(first).log2();
    let width = (plot_shots(last).log2() - lo) / n_bins as f64;
    let bin_of = |n: u32| {
        if width > 0.0 {
            (((plot_shots(n).log2() - lo) / width).floor() as usize).min(n_bins - 1)
        } else {
            0
        }
    };
    let mut occupancy = vec![0usize; n_bins];
    for &n in shots {
        occupancy[bin_of(n)] += 1;
    }
    shots
        .iter()
        .map(|&n| (n, 1.0 / occupancy[bin_of(n)] as f64))
        .collect()
}

/// Logit at which a prediction reaches the `1 − ε` clamp.
fn logit_clamp() -> f64 {
    ((1.0 - PROB_EPSILON) / PROB_EPSILON).ln()
}

/// `ln(1 + eˣ)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy)]
struct PreparedCell {
    magnitude: f64,
    shots: f64,
    ln_shots: f64,
    target: f64,
    weight: f64,
}

/// A grid flattened for repeated loss and gradient evaluation.
#[derive(Debug, Clone)]
pub struct Objective {
    cells: Vec<PreparedCell>,
    clamp: f64,
}

impl Objective {
    pub fn new(grid: &BehaviorGrid, weights: &ShotWeights) -> Result<Objective> {
        if grid.is_empty() {
            return Err(Error::NoData("behavior grid has no cells"));
        }
        let cells = grid
            .cells()
            .iter()
            .map(|c| {
                let weight = *weights.get(&c.shots).ok_or_else(|| {
                    Error::invalid("loss weights", format!("no weight for N = {}", c.shots))
                })?;
                let shots = f64::from(c.shots);
                Ok(PreparedCell {
                    magnitude: c.magnitude,
                    shots,
                    ln_shots: if c.shots == 0 { 0.0 } else { shots.ln() },
                    target: c.mean_p,
                    weight,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Objective {
            cells,
            clamp: logit_clamp(),
        })
    }

    /// Loss at raw parameters `[a, b, γ, α]`.
    ///
    /// Parameters outside the model domain are evaluated as given; callers keep
    /// them inside the fitting bounds.
    pub fn loss(&self, x: &[f64; 4]) -> f64 {
        let [a, b, gamma, alpha] = *x;
        let mut total = 0.0;
        for c in &self.cells {
            let z = a * c.magnitude + b + gamma * evidence_scale(c.shots, alpha);
            let z = z.clamp(-self.clamp, self.clamp);
            // −p̄·ln σ(z) − (1−p̄)·ln σ(−z)
            total += c.weight * (c.target * softplus(-z) + (1.0 - c.target) * softplus(z));
        }
        total
    }

    /// Loss and gradient at raw parameters. Cells whose prediction sits on the
    /// probability clamp contribute no gradient.
    pub fn loss_and_gradient(&self, x: &[f64; 4]) -> (f64, [f64; 4]) {
        let [a, b, gamma, alpha] = *x;
        let mut total = 0.0;
        let mut grad = [0.0; 4];
        for c in &self.cells {
            let s = evidence_scale(c.shots, alpha);
            let z = a * c.magnitude + b + gamma * s;
            let zc = z.clamp(-self.clamp, self.clamp);
            total += c.weight * (c.target * softplus(-zc) + (1.0 - c.target) * softplus(zc));
            if z.abs() >= self.clamp {
                continue;
            }
            let q = crate::belief::sigmoid(z);
            let dz = c.weight * (q - c.target);
            grad[0] += dz * c.magnitude;
            grad[1] += dz;
            grad[2] += dz * s;
            grad[3] -= dz * gamma * c.ln_shots * s;
        }
        (total, grad)
    }
}

/// Weighted BCE between the model posterior and each cell's mean rate.
pub fn weighted_bce_loss(
    params: &BeliefParams,
    grid: &BehaviorGrid,
    weights: &ShotWeights,
) -> Result<f64> {
    Ok(Objective::new(grid, weights)?.loss(&params.to_array()))
}

/// Gradient of [`weighted_bce_loss`] with respect to `(a, b, γ, α)`.
pub fn loss_gradient(
    params: &BeliefParams,
    grid: &BehaviorGrid,
    weights: &ShotWeights,
) -> Result<[f64; 4]> {
    Ok(Objective::new(grid, weights)?
        .loss_and_gradient(&params.to_array())
        .1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{posterior, posterior_complement, InterventionPoint};
    use crate::data::{GridAxes, GridCell};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_with_shots(shots: &[u32]) -> BehaviorGrid {
        BehaviorGrid::from_cells(shots.iter().map(|&n| GridCell {
            magnitude: 0.0,
            shots: n,
            mean_p: 0.5,
            trials: 1,
        }))
        .unwrap()
    }

    /// Per-cell BCE with literal probability clamping.
    fn oracle_loss(params: &BeliefParams, grid: &BehaviorGrid, weights: &ShotWeights) -> f64 {
        grid.cells()
            .iter()
            .map(|c| {
                let point = InterventionPoint::new(c.shots, c.magnitude);
                let q = posterior(params, point).clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
                let not_q =
                    posterior_complement(params, point).clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
                weights[&c.shots] * (-c.mean_p * q.ln() - (1.0 - c.mean_p) * not_q.ln())
            })
            .sum()
    }

    fn random_grid(rng: &mut ChaCha8Rng) -> BehaviorGrid {
        let cells = [-2.0, -0.5, 0.0, 0.3, 1.0, 2.5].iter().flat_map(|&m| {
            [0u32, 1, 2, 5, 8, 16, 40, 100]
                .map(|n| (m, n))
                .into_iter()
        });
        let cells: Vec<GridCell> = cells
            .map(|(m, n)| GridCell {
                magnitude: m,
                shots: n,
                mean_p: rng.random(),
                trials: 100,
            })
            .collect();
        BehaviorGrid::from_cells(cells).unwrap()
    }

    #[test]
    fn singleton_bins_weigh_one() {
        let w = bin_weights(&grid_with_shots(&[0, 1, 2, 4]), 15);
        assert!(w.values().all(|&x| x == 1.0));
        let w = bin_weights(&grid_with_shots(&[7]), 15);
        assert_eq!(w[&7], 1.0);
    }

    #[test]
    fn upper_shots_share_bins() {
        // Bin edges by hand: lo = log2(0.6), width = (7 − lo)/15.
        let lo = 0.6f64.log2();
        let width = (7.0 - lo) / 15.0;
        let hand_bin = |n: f64| (((n.log2() - lo) / width).floor() as usize).min(14);
        assert_eq!(hand_bin(64.0), 13);
        assert_eq!(hand_bin(80.0), 13);
        assert_eq!(hand_bin(96.0), 14);
        assert_eq!(hand_bin(112.0), 14);
        assert_eq!(hand_bin(128.0), 14);

        let axes = GridAxes::standard();
        let w = bin_weights(&grid_with_shots(&axes.shot_values), 15);
        assert_eq!(w[&64], 0.5);
        assert_eq!(w[&80], 0.5);
        for n in [96, 112, 128] {
            assert_eq!(w[&n], 1.0 / 3.0);
        }
    }

    #[test]
    fn fair_coin_loss() {
        let params = BeliefParams::new(0.0, 0.0, 1e-300, 0.5).unwrap();
        let grid = BehaviorGrid::from_cells([0u32, 1].map(|n| GridCell {
            magnitude: 0.0,
            shots: n,
            mean_p: 0.5,
            trials: 10,
        }))
        .unwrap();
        let mut weights = ShotWeights::new();
        weights.insert(0, 1.0);
        weights.insert(1, 0.25);
        let loss = weighted_bce_loss(&params, &grid, &weights).unwrap();
        assert!((loss - 1.25 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn saturated_targets_stay_finite() {
        let params = BeliefParams::new(10.0, 30.0, 5.0, 0.1).unwrap();
        let grid = BehaviorGrid::from_cells([(0.0, 1.0), (-10.0, 0.0), (10.0, 0.0)].map(
            |(m, p)| GridCell {
                magnitude: m,
                shots: 3,
                mean_p: p,
                trials: 10,
            },
        ))
        .unwrap();
        let weights = bin_weights(&grid, 15);
        let loss = weighted_bce_loss(&params, &grid, &weights).unwrap();
        assert!(loss.is_finite());
        // The m = 10 cell is clamped at 1 − ε against a target of 0.
        assert!(loss > -(PROB_EPSILON.ln()) - 1e-6);
    }

    #[test]
    fn empty_grid_is_an_error() {
        let params = BeliefParams::new(0.0, 0.0, 1.0, 0.5).unwrap();
        let grid = BehaviorGrid::default();
        assert!(matches!(
            weighted_bce_loss(&params, &grid, &ShotWeights::new()),
            Err(Error::NoData(_))
        ));
    }

    #[test]
    fn matches_per_cell_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let grid = random_grid(&mut rng);
            let weights = bin_weights(&grid, 15);
            let params = BeliefParams::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(0.01..2.0),
                rng.random_range(0.0..0.9),
            )
            .unwrap();
            let got = weighted_bce_loss(&params, &grid, &weights).unwrap();
            let want = oracle_loss(&params, &grid, &weights);
            assert!((got - want).abs() <= 1e-9 * want.abs(), "{got} vs {want}");
        }
    }

    #[test]
    fn zero_shot_grid_has_no_evidence_gradient() {
        let grid = BehaviorGrid::from_cells([-1.0, 0.0, 2.0].map(|m| GridCell {
            magnitude: m,
            shots: 0,
            mean_p: 0.3,
            trials: 10,
        }))
        .unwrap();
        let params = BeliefParams::new(0.4, -1.0, 2.0, 0.3).unwrap();
        let g = loss_gradient(&params, &grid, &bin_weights(&grid, 15)).unwrap();
        assert_eq!(g[2], 0.0);
        assert_eq!(g[3], 0.0);
        assert!(g[0] != 0.0 && g[1] != 0.0);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let grid = random_grid(&mut rng);
        let objective = Objective::new(&grid, &bin_weights(&grid, 15)).unwrap();
        for _ in 0..20 {
            let x = [
                rng.random_range(-2.0..2.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(0.05..2.0),
                rng.random_range(0.05..0.9),
            ];
            let (_, g) = objective.loss_and_gradient(&x);
            for k in 0..4 {
                let h = 1e-6;
                let (mut up, mut down) = (x, x);
                up[k] += h;
                down[k] -= h;
                let fd = (objective.loss(&up) - objective.loss(&down)) / (2.0 * h);
                let rel = (g[k] - fd).abs() / g[k].abs().max(fd.abs()).max(1.0);
                assert!(rel < 1e-5, "component {k}: {} vs {fd}", g[k]);
            }
        }
    }
}
