//! Cross-validation over contiguous blocks of steering magnitudes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{posterior, InterventionPoint};
use crate::data::BehaviorGrid;
use crate::error::{Error, Result};
use crate::fit::{fit, FitConfig, FitResult};

/// Held-out folds as index sets into the sorted magnitude list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub folds: Vec<Vec<usize>>,
}

impl CvPlan {
    pub fn sizes(&self) -> Vec<usize> {
        self.folds.iter().map(Vec::len).collect()
    }
}

/// Splits `n_magnitudes` sorted magnitudes into `k` contiguous folds whose
/// sizes differ by at most one; the larger folds come first.
pub fn make_cv_plan(n_magnitudes: usize, k: usize) -> Result<CvPlan> {
    if k == 0 || n_magnitudes < k {
        return Err(Error::TooFewMagnitudes {
            folds: k,
            magnitudes: n_magnitudes,
        });
    }
    let base = n_magnitudes / k;
    let extra = n_magnitudes % k;
    let mut start = 0;
    let folds = (0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let fold = (start..start + len).collect();
            start += len;
            fold
        })
        .collect();
    Ok(CvPlan { folds })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeldOutCell {
    pub magnitude: f64,
    pub shots: u32,
    pub predicted: f64,
    pub observed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub held_out_magnitudes: Vec<f64>,
    pub fit: FitResult,
    pub cells: Vec<HeldOutCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub per_fold: Vec<FoldReport>,
    /// Pearson r over all held-out (prediction, observation) pairs; `None`
    /// when either series is constant.
    pub pooled_pearson_r: Option<f64>,
    pub mean_alpha: f64,
}

impl CvReport {
    /// The pooled correlation, or [`Error::ZeroVariance`] when it is undefined.
    pub fn pooled_r(&self) -> Result<f64> {
        self.pooled_pearson_r
            .ok_or(Error::ZeroVariance("held-out predictions or observations"))
    }

    pub fn fold_alphas(&self) -> Vec<f64> {
        self.per_fold.iter().map(|f| f.fit.params.alpha()).collect()
    }
}

/// Fold seeds are derived from the configured seed so folds do not share a walk.
fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_add((fold as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Fits on all but one block of magnitudes at a time and predicts the held-out block.
pub fn cross_validate(grid: &BehaviorGrid, config: &FitConfig, k: usize) -> Result<CvReport> {
    let magnitudes = grid.magnitudes();
    let plan = make_cv_plan(magnitudes.len(), k)?;

    let per_fold = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(fold, indices)| {
            let held: Vec<f64> = indices.iter().map(|&i| magnitudes[i]).collect();
            let is_held = |m: f64| held.iter().any(|h| h.to_bits() == m.to_bits());
            let training = grid.filter_magnitudes(|m| !is_held(m));
            let fold_config = FitConfig {
                seed: fold_seed(config.seed, fold),
                ..config.clone()
            };
            let result = fit(&training, &fold_config).map_err(|e| Error::Fold {
                fold,
                source: Box::new(e),
            })?;
            let cells = grid
                .cells()
                .iter()
                .filter(|c| is_held(c.magnitude))
                .map(|c| HeldOutCell {
                    magnitude: c.magnitude,
                    shots: c.shots,
                    predicted: posterior(&result.params, InterventionPoint::new(c.shots, c.magnitude)),
                    observed: c.mean_p,
                })
                .collect();
            Ok(FoldReport {
                held_out_magnitudes: held,
                fit: result,
                cells,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (predicted, observed): (Vec<f64>, Vec<f64>) = per_fold
        .iter()
        .flat_map(|f| f.cells.iter().map(|c| (c.predicted, c.observed)))
        .unzip();
    let pooled_pearson_r = match pearson_r(&predicted, &observed) {
        Ok(r) => Some(r),
        Err(Error::ZeroVariance(_)) => None,
        Err(e) => return Err(e),
    };
    let mean_alpha =
        per_fold.iter().map(|f| f.fit.params.alpha()).sum::<f64>() / per_fold.len() as f64;
    Ok(CvReport {
        per_fold,
        pooled_pearson_r,
        mean_alpha,
    })
}

/// Sample Pearson correlation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            what: "correlation series",
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::invalid("correlation", "need at least two pairs"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("first series"));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("second series"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
