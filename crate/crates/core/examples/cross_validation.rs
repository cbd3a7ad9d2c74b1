// Held-out prediction across magnitude folds on a noisy simulated grid.

use belief_dynamics::data::{aggregate, simulate_grid, RecordLabels, SimulationMode};
use belief_dynamics::fit::cross_validate;
use belief_dynamics::{BeliefParams, FitConfig, GridAxes};

fn main() -> belief_dynamics::Result<()> {
    let truth = BeliefParams::new(1.0, -4.0, 0.8, 0.3)?;
    let records = simulate_grid(
        &truth,
        &GridAxes::standard(),
        100,
        7,
        SimulationMode::Binomial,
        &RecordLabels::default(),
    )?;
    let grid = aggregate(&records).into_values().next().expect("one grid");
    let config = FitConfig {
        basin_hop_iterations: 300,
        refine_top_k: 20,
        ..FitConfig::default()
    };
    let report = cross_validate(&grid, &config, 10)?;
    for (i, fold) in report.per_fold.iter().enumerate() {
        println!(
            "fold {i}: held out {:?}, alpha {:.4}",
            fold.held_out_magnitudes,
            fold.fit.params.alpha()
        );
    }
    println!("pooled held-out r = {:.5}", report.pooled_r()?);
    println!("mean alpha = {:.5}", report.mean_alpha);
    Ok(())
}
