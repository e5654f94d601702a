use std::path::Path;

use serde::Serialize;

use super::analysis::{
    baseline, bond_sweep, cell_results, class_counts, compare_spaces, convergence_curves, heatmap,
    relative_tables, Baseline, BondRow, CellResult, ClassCounts, PairedComparison, RelativeRow,
};
use super::grid::{ExperimentGrid, SpaceKey, Variant};
use super::run::{BruteForce, GridResults, SkippedSpace, SolverRuns};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct SpaceSummary {
    pub key: SpaceKey,
    pub size: u64,
    pub optimum: Option<BruteForce>,
    pub baseline: Baseline,
    pub solvers: Vec<SolverRuns>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantCounts {
    pub variant: Variant,
    pub counts: ClassCounts,
}

/// Everything `summary.json` holds.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub grid: ExperimentGrid,
    pub spaces: Vec<SpaceSummary>,
    pub skipped: Vec<SkippedSpace>,
    pub cells: Vec<CellResult>,
    pub class_counts: Vec<VariantCounts>,
    pub bond_sweep: Option<Vec<BondRow>>,
    /// Each 3-body space against the 12-body runs, when both exist.
    pub formulation_comparisons: Vec<PairedComparison>,
}

impl Summary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

pub fn summarize(results: &GridResults) -> Summary {
    let cells = cell_results(results);
    let mut variants: Vec<Variant> = Vec::new();
    for c in &cells {
        if !variants.contains(&c.variant) {
            variants.push(c.variant);
        }
    }
    let twelve = results.space(&SpaceKey::TwelveBody);
    Summary {
        grid: results.grid.clone(),
        spaces: results
            .spaces
            .iter()
            .map(|s| SpaceSummary {
                key: s.key,
                size: s.size,
                optimum: s.optimum.clone(),
                baseline: baseline(s),
                solvers: s.solvers.clone(),
            })
            .collect(),
        skipped: results.skipped.clone(),
        class_counts: variants
            .iter()
            .map(|&v| VariantCounts {
                variant: v,
                counts: class_counts(cells.iter().filter(|c| c.variant == v)),
            })
            .collect(),
        bond_sweep: results
            .grid
            .bond_sweep
            .then(|| bond_sweep(&cells, &results.grid.chi_list)),
        formulation_comparisons: twelve
            .map(|t| {
                results
                    .spaces
                    .iter()
                    .filter(|s| s.key != SpaceKey::TwelveBody)
                    .flat_map(|s| compare_spaces(s, t))
                    .collect()
            })
            .unwrap_or_default(),
        cells,
    }
}

fn space_columns(key: &SpaceKey) -> [String; 3] {
    match key {
        SpaceKey::ThreeBody { margin, dev } => [key.label(), dev.to_string(), margin.to_string()],
        SpaceKey::TwelveBody => [key.label(), String::new(), String::new()],
    }
}

fn csv_file(dir: &Path, name: &str) -> Result<csv::Writer<std::fs::File>> {
    let path = dir.join(name);
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_relative(dir: &Path, name: &str, rows: &[RelativeRow]) -> Result<()> {
    let mut w = csv_file(dir, name)?;
    w.write_record(["space", "dev", "margin", "scheme", "chi", "solver", "gap"])?;
    for r in rows {
        let [a, b, c] = space_columns(&r.space);
        w.write_record([
            a,
            b,
            c,
            r.variant.scheme.to_string(),
            r.variant.chi.to_string(),
            r.solver.to_string(),
            r.gap.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(dir.join(name), e))
}

/// Writes `summary.json`, `heatmap_<scheme>.csv`, `relative_conv.csv`,
/// `relative_geo.csv`, `convergence_<formulation>.csv` and, for bond
/// sweeps, `bond_sweep.csv` into `dir`.
pub fn write_outputs(results: &GridResults, dir: &Path) -> Result<Summary> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let summary = summarize(results);
    let path = dir.join("summary.json");
    std::fs::write(&path, summary.to_json()).map_err(|e| Error::io(&path, e))?;

    let chi = results.grid.chi;
    let main: Vec<CellResult> = summary
        .cells
        .iter()
        .filter(|c| c.variant.chi == chi)
        .cloned()
        .collect();
    for &scheme in &results.grid.schemes {
        let variant = Variant { scheme, chi };
        let name = format!("heatmap_{scheme}.csv");
        let mut w = csv_file(dir, &name)?;
        w.write_record([
            "space", "dev", "margin", "solver", "runs", "conv_best", "geo_best", "delta", "class",
            "best_marker", "worst_marker",
        ])?;
        for row in heatmap(&main, variant) {
            let c = &row.cell;
            let [a, b, m] = space_columns(&c.space);
            w.write_record([
                a,
                b,
                m,
                c.solver.to_string(),
                c.runs.to_string(),
                c.conv_best.to_string(),
                c.geo_best.to_string(),
                c.delta.to_string(),
                row.class.name().to_string(),
                row.best.label().to_string(),
                row.worst.label().to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(dir.join(&name), e))?;
    }

    let (conv, geo) = relative_tables(&main);
    write_relative(dir, "relative_conv.csv", &conv)?;
    write_relative(dir, "relative_geo.csv", &geo)?;

    if let Some(rows) = &summary.bond_sweep {
        let mut w = csv_file(dir, "bond_sweep.csv")?;
        w.write_record(["chi", "improved", "tie_or_improved", "total", "pct_improved", "pct_tie_or_improved"])?;
        for r in rows {
            w.write_record([
                r.chi.to_string(),
                r.improved.to_string(),
                r.tie_or_improved.to_string(),
                r.total.to_string(),
                r.pct_improved.to_string(),
                r.pct_tie_or_improved.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(dir.join("bond_sweep.csv"), e))?;
    }

    for formulation in ["3body", "12body"] {
        let spaces: Vec<_> = results
            .spaces
            .iter()
            .filter(|s| (s.key == SpaceKey::TwelveBody) == (formulation == "12body"))
            .collect();
        if spaces.is_empty() {
            continue;
        }
        let name = format!("convergence_{formulation}.csv");
        let mut w = csv_file(dir, &name)?;
        w.write_record([
            "space", "dev", "margin", "solver", "family", "eval_index", "mean_best", "gap", "baseline",
            "baseline_kind",
        ])?;
        for space in spaces {
            let base = baseline(space);
            let kind = serde_json::to_value(base.kind).expect("kind serializes");
            let kind = kind.as_str().unwrap_or_default().to_string();
            for curve in convergence_curves(space, chi) {
                for (i, v) in curve.mean_best.iter().enumerate() {
                    let [a, b, m] = space_columns(&space.key);
                    w.write_record([
                        a,
                        b,
                        m,
                        curve.solver.to_string(),
                        curve.family.clone(),
                        (i + 1).to_string(),
                        v.to_string(),
                        (v - base.cost).to_string(),
                        base.cost.to_string(),
                        kind.clone(),
                    ])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(dir.join(&name), e))?;
    }
    Ok(summary)
}
