//! Maximum-likelihood fitting of [`BeliefParams`] to a behavior grid.
//!
//! The protocol: weight cells by log-shot bin, propose multi-start candidates
//! with a basin-hopping walk, refine the best candidates with a bounded
//! quasi-Newton method using analytic gradients, and keep the lowest loss.

pub mod basin;
pub mod cv;
pub mod loss;
pub mod optimize;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::BeliefParams;
use crate::data::BehaviorGrid;
use crate::error::{Error, Result};

pub use basin::{propose_starts, Candidate};
pub use cv::{cross_validate, make_cv_plan, pearson_r, CvPlan, CvReport, FoldReport, HeldOutCell};
pub use loss::{bin_weights, loss_gradient, weighted_bce_loss, Objective, ShotWeights};
pub use optimize::{minimize_bounded, BoundedOptions, Minimum, Termination};

/// Losses closer than this are treated as tied when picking the best candidate.
pub const LOSS_TIE: f64 = 1e-12;

/// Box constraints for `(a, b, γ, α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub a: (f64, f64),
    pub b: (f64, f64),
    pub gamma: (f64, f64),
    pub alpha: (f64, f64),
}

impl Default for ParamBounds {
    fn default() -> Self {
        ParamBounds {
            a: (-50.0, 50.0),
            b: (-50.0, 50.0),
            gamma: (1e-6, 100.0),
            alpha: (0.0, 0.999),
        }
    }
}

impl ParamBounds {
    pub fn as_array(&self) -> [(f64, f64); 4] {
        [self.a, self.b, self.gamma, self.alpha]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in ["a", "b", "gamma", "alpha"].iter().zip(self.as_array()) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(
                    "parameter bounds",
                    format!("{name}: need finite low < high, got ({lo}, {hi})"),
                ));
            }
        }
        if self.gamma.0 <= 0.0 {
            return Err(Error::invalid("parameter bounds", "gamma must stay positive"));
        }
        if self.alpha.0 < 0.0 || self.alpha.1 >= 1.0 {
            return Err(Error::invalid("parameter bounds", "alpha must stay within [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub function_tolerance: f64,
    pub basin_hop_iterations: usize,
    pub refine_top_k: usize,
    pub n_bins: usize,
    pub parameter_bounds: ParamBounds,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iterations: 1000,
            gradient_tolerance: 1e-10,
            function_tolerance: 1e-10,
            basin_hop_iterations: 1000,
            refine_top_k: 100,
            n_bins: 15,
            parameter_bounds: ParamBounds::default(),
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("max_iterations", self.max_iterations),
            ("basin_hop_iterations", self.basin_hop_iterations),
            ("refine_top_k", self.refine_top_k),
            ("n_bins", self.n_bins),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid("fit config", format!("{name} must be positive")));
        }
        for (name, tol) in [
            ("gradient_tolerance", self.gradient_tolerance),
            ("function_tolerance", self.function_tolerance),
        ] {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(Error::invalid("fit config", format!("{name} must be positive")));
            }
        }
        self.parameter_bounds.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: BeliefParams,
    pub final_loss: f64,
    /// Projected gradient at `params` is within 10× the gradient tolerance.
    pub converged: bool,
    pub iterations_used: usize,
    pub termination: Termination,
    /// Final losses of every refined candidate, in refinement order.
    pub candidate_losses: Vec<f64>,
}

/// Fits the belief model to `grid` by multi-start bounded quasi-Newton descent.
///
/// Refinements run on the current rayon pool; the winner is chosen by a
/// deterministic reduction, so results do not depend on scheduling.
pub fn fit(grid: &BehaviorGrid, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    if grid.len() < 4 {
        return Err(Error::invalid(
            "behavior grid",
            format!("need at least 4 cells to fit 4 parameters, got {}", grid.len()),
        ));
    }
    let weights = bin_weights(grid, config.n_bins);
    let objective = Objective::new(grid, &weights)?;
    let bounds = config.parameter_bounds.as_array();

    let mut starts = propose_starts(&objective, config);
    starts.sort_by(|x, y| x.loss.total_cmp(&y.loss).then(x.index.cmp(&y.index)));
    starts.truncate(config.refine_top_k);

    let options = BoundedOptions {
        max_iterations: config.max_iterations,
        gradient_tolerance: config.gradient_tolerance,
        function_tolerance: config.function_tolerance,
    };
    let refined: Vec<Minimum<4>> = starts
        .par_iter()
        .map(|start| {
            minimize_bounded(
                |x| objective.loss_and_gradient(x),
                start.x,
                &bounds,
                &options,
            )
        })
        .collect();

    let candidate_losses: Vec<f64> = refined.iter().map(|m| m.value).collect();
    let best_loss = candidate_losses
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !best_loss.is_finite() {
        return Err(Error::Diverged {
            candidates: refined.iter().map(|m| m.x).collect(),
        });
    }
    let winner = refined
        .iter()
        .enumerate()
        .filter(|(_, m)| m.value.is_finite() && m.value - best_loss <= LOSS_TIE)
        .min_by_key(|(i, m)| (m.iterations, *i))
        .map(|(_, m)| m.clone())
        .expect("at least one finite candidate");

    // The relative-decrease stop fires long before the loss stops resolving
    // progress; finish the winner on the gradient criterion alone.
    let polish = BoundedOptions {
        function_tolerance: 0.0,
        ..options
    };
    let polished = minimize_bounded(|x| objective.loss_and_gradient(x), winner.x, &bounds, &polish);
    let (best, extra) = if polished.value.is_finite() && polished.value - winner.value <= LOSS_TIE {
        let extra = polished.iterations;
        (polished, extra)
    } else {
        (winner.clone(), 0)
    };
    let termination = if extra == 0 { winner.termination } else { best.termination };

    Ok(FitResult {
        params: BeliefParams::from_array(best.x)?,
        final_loss: best.value,
        converged: best.projected_gradient_norm(&bounds) <= 10.0 * config.gradient_tolerance,
        iterations_used: winner.iterations + extra,
        termination,
        candidate_losses,
    })
}
