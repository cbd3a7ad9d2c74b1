// Context length at which belief in the concept overtakes its complement.

use belief_dynamics::belief::{log_odds_continuous, transition_point};
use belief_dynamics::data::PhaseBoundary;
use belief_dynamics::BeliefParams;

fn main() -> belief_dynamics::Result<()> {
    let params = BeliefParams::new(1.0, -4.0, 0.8, 0.3)?;
    let magnitudes: Vec<f64> = (-4..=8).map(|i| f64::from(i) * 0.5).collect();
    let boundary = PhaseBoundary::from_params(&params, &magnitudes)?;

    println!("{:>6} {:>14} {:>14}", "m", "N*", "log-odds at N*");
    for entry in &boundary.entries {
        let at = log_odds_continuous(&params, entry.n_star, entry.magnitude);
        println!("{:>6} {:>14.4} {:>14.2e}", entry.magnitude, entry.n_star, at);
    }
    println!(
        "without steering the model switches after {:.3} examples",
        transition_point(&params, 0.0)
    );
    Ok(())
}
