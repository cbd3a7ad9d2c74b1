// Averaged power-law discount against its integral approximation.

use belief_dynamics::belief::{discount_factor_closed_form, discount_factor_numeric};

fn main() {
    let (scale, alpha) = (1.0, 0.5);
    println!("{:>8} {:>14} {:>14} {:>10}", "N", "numeric", "closed form", "rel. gap");
    for n in [1u64, 10, 100, 1_000, 10_000, 100_000] {
        let numeric = discount_factor_numeric(n, scale, alpha);
        let closed = discount_factor_closed_form(n, scale, alpha);
        let gap = (numeric - closed).abs() / closed;
        println!("{n:>8} {numeric:>14.8} {closed:>14.8} {gap:>10.4}");
    }
}
