// Difference-of-means direction estimates converge on the true direction.

use belief_dynamics::lrh::{cosine, make_concept_space, simulate_caa, SpaceMode};

fn main() -> belief_dynamics::Result<()> {
    let space = make_concept_space(64, 1, SpaceMode::ExactOrthogonal, 3)?;
    let direction = space.direction(0);
    for samples in [100, 1_000, 10_000, 100_000, 1_000_000] {
        let estimate = simulate_caa(direction, 1.0, 1.0, samples, 42)?;
        println!("{samples:>9} samples: cosine {:.6}", cosine(&estimate, direction));
    }
    Ok(())
}
