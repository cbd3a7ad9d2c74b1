// Simulate a noiseless grid from known parameters and fit it back.

use std::time::Instant;

use belief_dynamics::data::{aggregate, simulate_grid, RecordLabels, SimulationMode};
use belief_dynamics::fit::{bin_weights, fit, Objective};
use belief_dynamics::{BeliefParams, FitConfig, GridAxes};

fn main() -> belief_dynamics::Result<()> {
    let truth = BeliefParams::new(1.0, -4.0, 0.8, 0.3)?;
    let axes = GridAxes::standard();
    let records = simulate_grid(&truth, &axes, 100, 0, SimulationMode::Exact, &RecordLabels::default())?;
    let grid = aggregate(&records).into_values().next().expect("one grid");

    let config = FitConfig::default();
    let started = Instant::now();
    let result = fit(&grid, &config)?;
    let elapsed = started.elapsed();

    for (name, (got, want)) in ["a", "b", "gamma", "alpha"]
        .iter()
        .zip(result.params.to_array().iter().zip(truth.to_array()))
    {
        println!("{name:>6}: fitted {got:.8}, true {want}, error {:.2e}", (got - want).abs());
    }
    let objective = Objective::new(&grid, &bin_weights(&grid, config.n_bins))?;
    let (_, gradient) = objective.loss_and_gradient(&result.params.to_array());
    let gradient_norm = gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    println!(
        "loss {:.10} after {} iterations ({:?}), converged={}, |grad|={:.2e}, {:.2?}",
        result.final_loss, result.iterations_used, result.termination, result.converged, gradient_norm, elapsed
    );
    Ok(())
}
