//! Behavioral data: record files, aggregation into grids, synthetic grids, and
//! emitted tables.

pub mod emit;
pub mod grid;
pub mod records;
pub mod simulate;

pub use emit::{
    emit_curves, emit_heatmap, emit_phase_boundary, grid_to_records, BoundaryEntry, Heatmap,
    PhaseBoundary,
};
pub use grid::{aggregate, BehaviorGrid, GridCell, GridId};
pub use records::{load_records, write_records, BehaviorRecord, Ingest, IngestWarning, Outcome, RecordFormat};
pub use simulate::{simulate_grid, GridAxes, RecordLabels, SimulationMode};
