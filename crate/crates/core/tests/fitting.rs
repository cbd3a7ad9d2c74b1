use belief_dynamics::belief::posterior;
use belief_dynamics::data::{aggregate, simulate_grid, RecordLabels, SimulationMode};
use belief_dynamics::fit::{bin_weights, fit, pearson_r, Objective};
use belief_dynamics::{BehaviorGrid, BeliefParams, FitConfig, GridAxes};

fn reference() -> BeliefParams {
    BeliefParams::new(1.0, -4.0, 0.8, 0.3).unwrap()
}

fn simulated(mode: SimulationMode, seed: u64) -> BehaviorGrid {
    let records = simulate_grid(&reference(), &GridAxes::standard(), 100, seed, mode, &RecordLabels::default()).unwrap();
    aggregate(&records).into_values().next().unwrap()
}

#[test]
fn noiseless_optimum_satisfies_first_order_condition() {
    let grid = simulated(SimulationMode::Exact, 0);
    let config = FitConfig::default();
    let result = fit(&grid, &config).unwrap();
    assert!(result.converged, "{:?}", result.termination);
    let objective = Objective::new(&grid, &bin_weights(&grid, config.n_bins)).unwrap();
    let (_, grad) = objective.loss_and_gradient(&result.params.to_array());
    let norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    assert!(norm < config.gradient_tolerance, "gradient {norm:e}");
}

#[test]
fn noisy_fit_reproduces_the_true_surface() {
    let grid = simulated(SimulationMode::Binomial, 21);
    let config = FitConfig {
        basin_hop_iterations: 300,
        refine_top_k: 20,
        ..FitConfig::default()
    };
    let result = fit(&grid, &config).unwrap();
    let (fitted, truth): (Vec<f64>, Vec<f64>) = GridAxes::standard()
        .points()
        .map(|p| (posterior(&result.params, p), posterior(&reference(), p)))
        .unzip();
    let r = pearson_r(&fitted, &truth).unwrap();
    assert!(r >= 0.99, "r = {r}");
}

#[test]
fn final_loss_is_the_best_refined_loss() {
    let grid = simulated(SimulationMode::Binomial, 4);
    let config = FitConfig {
        basin_hop_iterations: 100,
        refine_top_k: 10,
        seed: 17,
        ..FitConfig::default()
    };
    let result = fit(&grid, &config).unwrap();
    assert_eq!(result.candidate_losses.len(), 10);
    let best = result.candidate_losses.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(result.final_loss <= best + 1e-12);
}
