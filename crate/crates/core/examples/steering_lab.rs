// Steering along a concept direction shifts a linear belief readout by a
// constant per unit magnitude, whatever the starting representation.

use belief_dynamics::lrh::{
    embed, make_concept_space, readout_log_odds, steer, verify_steering_shift, Readout, SpaceMode,
};

fn main() -> belief_dynamics::Result<()> {
    let magnitudes: Vec<f64> = (-10..=10).map(f64::from).collect();
    for mode in [SpaceMode::ExactOrthogonal, SpaceMode::RandomNearOrthogonal] {
        let space = make_concept_space(32, 6, mode, 5)?;
        let readout = Readout::new(&space, 2, 1.5, -0.25)?;
        println!("{mode:?}: max |cos| between directions {:.3e}", space.max_abs_cosine());
        for betas in [[0.0; 6], [1.0, -2.0, 0.5, 3.0, 0.0, -1.0]] {
            let rep = embed(&betas, &space)?;
            let fit = verify_steering_shift(&space, &readout, &rep, &magnitudes)?;
            println!(
                "  start {:+.3}: slope {:.12} (k*|d|^2 = {:.12}), max residual {:.1e}",
                readout_log_odds(&rep, &readout, &space),
                fit.slope,
                readout.weight_scale * readout.a_coeff,
                fit.max_residual
            );
        }
        // Steering a different concept leaves this readout alone only when directions are orthogonal.
        let rep = embed(&[0.0; 6], &space)?;
        let off = readout_log_odds(&steer(&rep, &space, 0, 5.0)?, &readout, &space)
            - readout_log_odds(&rep, &readout, &space);
        println!("  cross-talk from steering concept 0 by 5: {off:.3e}");
    }
    Ok(())
}
