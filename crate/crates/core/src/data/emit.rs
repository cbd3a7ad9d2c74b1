//! Tables derived from fitted parameters: posterior heatmaps, long-format
//! curves, and phase-boundary tables. All files are UTF-8 CSV with LF endings.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::belief::{posterior, transition_point, BeliefParams, InterventionPoint};
use crate::data::grid::BehaviorGrid;
use crate::data::records::{BehaviorRecord, Outcome};
use crate::data::simulate::{GridAxes, RecordLabels};
use crate::error::{Error, Result};

/// Stand-in for `N = 0` on logarithmic shot axes.
pub const ZERO_SHOT_PLOT_VALUE: f64 = 0.6;

/// Renders a real with 17 significant digits, enough to read back the same bits.
pub fn render_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Shot count as plotted on a log axis (0 becomes [`ZERO_SHOT_PLOT_VALUE`]).
pub fn plot_shots(shots: u32) -> f64 {
    if shots == 0 {
        ZERO_SHOT_PLOT_VALUE
    } else {
        f64::from(shots)
    }
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for line in lines {
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Posterior surface over a grid: one row per magnitude, one column per shot count.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub magnitudes: Vec<f64>,
    pub shot_values: Vec<u32>,
    /// Row-major, `values[i][j]` at `(magnitudes[i], shot_values[j])`.
    pub values: Vec<Vec<f64>>,
}

impl Heatmap {
    pub fn from_params(params: &BeliefParams, axes: &GridAxes) -> Heatmap {
        let values = axes
            .magnitudes
            .iter()
            .map(|&m| {
                axes.shot_values
                    .iter()
                    .map(|&n| posterior(params, InterventionPoint::new(n, m)))
                    .collect()
            })
            .collect();
        Heatmap {
            magnitudes: axes.magnitudes.clone(),
            shot_values: axes.shot_values.clone(),
            values,
        }
    }

    pub fn read_csv(path: &Path) -> Result<Heatmap> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty heatmap".into()))?;
        let shot_values = header
            .split(',')
            .skip(1)
            .map(|s| s.parse().map_err(|e| bad(format!("shot header {s:?}: {e}"))))
            .collect::<Result<Vec<u32>>>()?;
        let mut magnitudes = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let mut fields = line.split(',');
            let m = fields.next().unwrap_or_default();
            magnitudes.push(m.parse().map_err(|e| bad(format!("row {}: {m:?}: {e}", i + 1)))?);
            let row = fields
                .map(|s| s.parse().map_err(|e| bad(format!("row {}: {s:?}: {e}", i + 1))))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != shot_values.len() {
                return Err(bad(format!("row {} has {} cells", i + 1, row.len())));
            }
            values.push(row);
        }
        Ok(Heatmap {
            magnitudes,
            shot_values,
            values,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header = std::iter::once("magnitude".to_string())
            .chain(self.shot_values.iter().map(u32::to_string))
            .collect::<Vec<_>>()
            .join(",");
        let rows = self.magnitudes.iter().zip(&self.values).map(|(m, row)| {
            std::iter::once(m.to_string())
                .chain(row.iter().map(|&v| render_real(v)))
                .collect::<Vec<_>>()
                .join(",")
        });
        write_lines(path, std::iter::once(header).chain(rows))
    }
}

/// Writes the posterior heatmap of `params` over `axes` to `destination`.
pub fn emit_heatmap(params: &BeliefParams, axes: &GridAxes, destination: &Path) -> Result<Heatmap> {
    let heatmap = Heatmap::from_params(params, axes);
    heatmap.write_csv(destination)?;
    Ok(heatmap)
}

/// Long-format model curves with both raw and plot-axis shot columns.
pub fn emit_curves(params: &BeliefParams, axes: &GridAxes, destination: &Path) -> Result<()> {
    let header = "magnitude,shots,shots_plot,posterior".to_string();
    let rows = axes.points().map(|p| {
        format!(
            "{},{},{},{}",
            p.magnitude,
            p.shots,
            plot_shots(p.shots),
            render_real(posterior(params, p))
        )
    });
    write_lines(destination, std::iter::once(header).chain(rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEntry {
    pub magnitude: f64,
    pub n_star: f64,
}

/// Crossover context length `N*` for each magnitude, sorted by magnitude.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseBoundary {
    pub entries: Vec<BoundaryEntry>,
}

impl PhaseBoundary {
    pub fn from_params(params: &BeliefParams, magnitudes: &[f64]) -> Result<PhaseBoundary> {
        let mut entries: Vec<BoundaryEntry> = magnitudes
            .iter()
            .map(|&magnitude| BoundaryEntry {
                magnitude,
                n_star: transition_point(params, magnitude),
            })
            .collect();
        entries.sort_by(|x, y| x.magnitude.total_cmp(&y.magnitude));
        if let Some(e) = entries.iter().find(|e| !e.n_star.is_finite()) {
            return Err(Error::invalid(
                "phase boundary",
                format!("N* overflows at m = {}", e.magnitude),
            ));
        }
        Ok(PhaseBoundary { entries })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows = self
            .entries
            .iter()
            .map(|e| format!("{},{}", e.magnitude, render_real(e.n_star)));
        write_lines(path, std::iter::once("magnitude,n_star".to_string()).chain(rows))
    }

    pub fn read_csv(path: &Path) -> Result<PhaseBoundary> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let entries = text
            .lines()
            .skip(1)
            .enumerate()
            .map(|(i, line)| {
                let (m, n) = line
                    .split_once(',')
                    .ok_or_else(|| bad(format!("row {}: expected two columns", i + 1)))?;
                Ok(BoundaryEntry {
                    magnitude: m.parse().map_err(|e| bad(format!("row {}: {e}", i + 1)))?,
                    n_star: n.parse().map_err(|e| bad(format!("row {}: {e}", i + 1)))?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(PhaseBoundary { entries })
    }
}

/// Computes the phase boundary for `magnitudes` and writes it to `destination`.
pub fn emit_phase_boundary(
    params: &BeliefParams,
    magnitudes: &[f64],
    destination: &Path,
) -> Result<PhaseBoundary> {
    let boundary = PhaseBoundary::from_params(params, magnitudes)?;
    boundary.write_csv(destination)?;
    Ok(boundary)
}

/// One mean-valued record per grid cell, for writing a grid back to disk.
pub fn grid_to_records(grid: &BehaviorGrid, labels: &RecordLabels) -> Vec<BehaviorRecord> {
    grid.cells()
        .iter()
        .map(|c| BehaviorRecord {
            dataset_id: labels.dataset_id.clone(),
            model_id: labels.model_id.clone(),
            layer: labels.layer,
            magnitude: c.magnitude,
            shots: c.shots,
            trials: c.trials,
            outcome: Outcome::MeanP(c.mean_p),
        })
        .collect()
}
