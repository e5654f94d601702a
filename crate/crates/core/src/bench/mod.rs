//! Experiment harness: runs grids of paired conventional and boosted runs
//! and derives the comparison tables from them.
//!
//! Every table is a pure function of [`GridResults`], which in turn only
//! holds numbers read off the per-run traces.

mod analysis;
mod grid;
mod output;
mod run;

pub use analysis::{
    baseline, bond_sweep, cell, cell_results, class_counts, compare_spaces, convergence_curves,
    heatmap, relative_tables, sign_test, Baseline, BaselineKind, BondRow, CellResult,
    ClassCounts, Curve, DeltaClass, HeatmapRow, Marker, PairedComparison, RelativeRow,
};
pub use grid::{run_seed, ExperimentGrid, GeoSettings, SeedRole, SpaceKey, Variant};
pub use output::{summarize, write_outputs, Summary};
pub use run::{
    brute_force, read_trace_bests, run_grid, BoostedRuns, BruteForce, GridResults, RunRecord,
    SkippedSpace, SolverRuns, SpaceResult, TraceDir, TraceSink,
};
