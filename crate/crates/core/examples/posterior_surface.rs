// Posterior belief over steering magnitude and shot count.

use belief_dynamics::belief::{log_odds, posterior};
use belief_dynamics::{BeliefParams, InterventionPoint};

fn main() -> belief_dynamics::Result<()> {
    let params = BeliefParams::new(1.0, -4.0, 0.8, 0.3)?;
    let magnitudes = [-2.0, -1.0, 0.0, 1.0, 2.0, 4.0];
    let shots = [0u32, 1, 4, 16, 64, 128];

    print!("{:>6}", "m \\ N");
    for n in shots {
        print!("{n:>8}");
    }
    println!();
    for m in magnitudes {
        print!("{m:>6}");
        for n in shots {
            print!("{:>8.4}", posterior(&params, InterventionPoint::new(n, m)));
        }
        println!();
    }

    // Steering adds a·m to the log-odds at every context length.
    let n = 16;
    let base = log_odds(&params, InterventionPoint::new(n, 0.0));
    for m in [0.5, 1.0, 3.0] {
        let shift = log_odds(&params, InterventionPoint::new(n, m)) - base;
        println!("N={n}, m={m}: log-odds shift {shift:.6} (a*m = {:.6})", params.a() * m);
    }
    Ok(())
}
