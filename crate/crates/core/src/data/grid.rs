use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::records::{BehaviorRecord, Outcome};
use crate::error::{Error, Result};

/// One aggregated observation: the mean concept-consistent rate at `(m, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub magnitude: f64,
    pub shots: u32,
    pub mean_p: f64,
    pub trials: u64,
}

/// Observed behavior indexed by steering magnitude and shot count.
///
/// Cells are kept sorted by `(magnitude, shots)`; keys are unique.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BehaviorGrid {
    cells: Vec<GridCell>,
    magnitudes: Vec<f64>,
    shot_values: Vec<u32>,
}

fn key_cmp(a: (f64, u32), b: (f64, u32)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Folds `-0.0` onto `0.0` so both land on the same key.
pub(crate) fn canonical_magnitude(m: f64) -> f64 {
    if m == 0.0 {
        0.0
    } else {
        m
    }
}

impl BehaviorGrid {
    pub fn from_cells(cells: impl IntoIterator<Item = GridCell>) -> Result<Self> {
        let mut cells: Vec<GridCell> = cells
            .into_iter()
            .map(|mut c| {
                c.magnitude = canonical_magnitude(c.magnitude);
                c
            })
            .collect();
        for c in &cells {
            if !c.magnitude.is_finite() {
                return Err(Error::invalid("grid cell", "magnitude must be finite"));
            }
            if !(0.0..=1.0).contains(&c.mean_p) {
                return Err(Error::invalid(
                    "grid cell",
                    format!(
                        "mean_p {} at (m={}, N={}) outside [0, 1]",
                        c.mean_p, c.magnitude, c.shots
                    ),
                ));
            }
        }
        cells.sort_by(|x, y| key_cmp((x.magnitude, x.shots), (y.magnitude, y.shots)));
        if let Some(w) = cells
            .windows(2)
            .find(|w| key_cmp((w[0].magnitude, w[0].shots), (w[1].magnitude, w[1].shots)).is_eq())
        {
            return Err(Error::invalid(
                "grid",
                format!("duplicate cell (m={}, N={})", w[0].magnitude, w[0].shots),
            ));
        }
        let mut magnitudes: Vec<f64> = cells.iter().map(|c| c.magnitude).collect();
        magnitudes.dedup();
        let mut shot_values: Vec<u32> = cells.iter().map(|c| c.shots).collect();
        shot_values.sort_unstable();
        shot_values.dedup();
        Ok(BehaviorGrid {
            cells,
            magnitudes,
            shot_values,
        })
    }

    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    /// Sorted distinct magnitudes.
    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    /// Sorted distinct shot counts.
    pub fn shot_values(&self) -> &[u32] {
        &self.shot_values
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, magnitude: f64, shots: u32) -> Option<&GridCell> {
        let key = (canonical_magnitude(magnitude), shots);
        self.cells
            .binary_search_by(|c| key_cmp((c.magnitude, c.shots), key))
            .ok()
            .map(|i| &self.cells[i])
    }

    /// The sub-grid whose magnitudes satisfy `keep`.
    pub fn filter_magnitudes(&self, mut keep: impl FnMut(f64) -> bool) -> BehaviorGrid {
        let cells = self
            .cells
            .iter()
            .filter(|c| keep(c.magnitude))
            .copied()
            .collect::<Vec<_>>();
        // Already validated and sorted; only the axes need recomputing.
        BehaviorGrid::from_cells(cells).expect("subset of a valid grid is valid")
    }
}

/// Identifies the grid a record belongs to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridId {
    pub dataset_id: String,
    pub model_id: String,
}

/// Pools records into one grid per `(dataset_id, model_id)`.
///
/// Duplicate `(m, N)` rows are merged by pooling successes and trials. The
/// contributions of each cell are summed in a canonical order, so the result
/// does not depend on record order.
pub fn aggregate(records: &[BehaviorRecord]) -> BTreeMap<GridId, BehaviorGrid> {
    type CellKey = (u64, u32);
    let mut pools: BTreeMap<GridId, BTreeMap<CellKey, Vec<(u64, Outcome)>>> = BTreeMap::new();
    for r in records {
        let id = GridId {
            dataset_id: r.dataset_id.clone(),
            model_id: r.model_id.clone(),
        };
        let key = (canonical_magnitude(r.magnitude).to_bits(), r.shots);
        pools
            .entry(id)
            .or_default()
            .entry(key)
            .or_default()
            .push((r.trials, r.outcome));
    }

    pools
        .into_iter()
        .map(|(id, cells)| {
            let cells = cells.into_iter().map(|((bits, shots), mut parts)| {
                parts.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.canonical_cmp(&y.1)));
                let trials: u64 = parts.iter().map(|p| p.0).sum();
                let mean_p = match parts.as_slice() {
                    [(t, outcome)] => outcome.mean_p(*t),
                    _ => pooled_mean(&parts, trials),
                };
                GridCell {
                    magnitude: f64::from_bits(bits),
                    shots,
                    mean_p,
                    trials,
                }
            });
            let grid = BehaviorGrid::from_cells(cells.collect::<Vec<_>>())
                .expect("validated records aggregate to a valid grid");
            (id, grid)
        })
        .collect()
}

fn pooled_mean(parts: &[(u64, Outcome)], trials: u64) -> f64 {
    let counts: Option<u64> = parts
        .iter()
        .map(|(_, o)| match o {
            Outcome::Count(c) => Some(*c),
            Outcome::MeanP(_) => None,
        })
        .sum();
    let successes = match counts {
        Some(c) => c as f64,
        None => parts
            .iter()
            .map(|&(t, o)| match o {
                Outcome::Count(c) => c as f64,
                Outcome::MeanP(p) => t as f64 * p,
            })
            .sum(),
    };
    (successes / trials as f64).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(m: f64, n: u32, trials: u64, outcome: Outcome) -> BehaviorRecord {
        BehaviorRecord {
            dataset_id: "psychopathy".into(),
            model_id: "toy".into(),
            layer: 12,
            magnitude: m,
            shots: n,
            trials,
            outcome,
        }
    }

    #[test]
    fn pools_duplicate_cells() {
        let records = [
            rec(0.5, 4, 50, Outcome::Count(10)),
            rec(0.5, 4, 50, Outcome::Count(30)),
        ];
        let grids = aggregate(&records);
        assert_eq!(grids.len(), 1);
        let grid = grids.values().next().unwrap();
        let cell = grid.get(0.5, 4).unwrap();
        assert_eq!(cell.trials, 100);
        assert!((cell.mean_p - 0.4).abs() < 1e-15);
    }

    #[test]
    fn single_row_mean() {
        let grids = aggregate(&[rec(-1.0, 0, 7, Outcome::Count(3))]);
        let cell = *grids.values().next().unwrap().get(-1.0, 0).unwrap();
        assert_eq!(cell.mean_p, 3.0 / 7.0);
    }

    #[test]
    fn mean_p_rows_pool_by_trials() {
        let records = [
            rec(0.0, 1, 10, Outcome::MeanP(0.2)),
            rec(0.0, 1, 30, Outcome::MeanP(0.6)),
        ];
        let grids = aggregate(&records);
        let cell = grids.values().next().unwrap().get(0.0, 1).unwrap();
        assert!((cell.mean_p - 0.5).abs() < 1e-15);
    }

    #[test]
    fn separates_datasets_and_models() {
        let mut other = rec(0.0, 1, 10, Outcome::Count(1));
        other.model_id = "other".into();
        let grids = aggregate(&[rec(0.0, 1, 10, Outcome::Count(1)), other]);
        assert_eq!(grids.len(), 2);
    }

    #[test]
    fn negative_zero_magnitude_is_zero() {
        let grids = aggregate(&[
            rec(-0.0, 2, 10, Outcome::Count(1)),
            rec(0.0, 2, 10, Outcome::Count(3)),
        ]);
        let grid = grids.values().next().unwrap();
        assert_eq!(grid.len(), 1);
        assert_eq!(grid.get(0.0, 2).unwrap().trials, 20);
    }

    #[test]
    fn grid_rejects_duplicates_and_bad_means() {
        let c = GridCell {
            magnitude: 0.0,
            shots: 1,
            mean_p: 0.5,
            trials: 1,
        };
        assert!(BehaviorGrid::from_cells([c, c]).is_err());
        let bad = GridCell { mean_p: 1.5, ..c };
        assert!(BehaviorGrid::from_cells([bad]).is_err());
    }

    #[test]
    fn axes_follow_cells() {
        let cells = [(1.0, 4), (-1.0, 0), (1.0, 0), (0.0, 16)].map(|(m, n)| GridCell {
            magnitude: m,
            shots: n,
            mean_p: 0.1,
            trials: 1,
        });
        let grid = BehaviorGrid::from_cells(cells).unwrap();
        assert_eq!(grid.magnitudes(), &[-1.0, 0.0, 1.0]);
        assert_eq!(grid.shot_values(), &[0, 4, 16]);
        let sub = grid.filter_magnitudes(|m| m > 0.5);
        assert_eq!(sub.magnitudes(), &[1.0]);
        assert_eq!(sub.shot_values(), &[0, 4]);
    }
}
