use serde::Serialize;
use statrs::distribution::{Binomial, DiscreteCDF};

use super::grid::{SpaceKey, Variant};
use super::run::{GridResults, RunRecord, SpaceResult};
use crate::solvers::SolverKind;

fn best_of(runs: &[RunRecord]) -> f64 {
    runs.iter().map(|r| r.best).fold(f64::INFINITY, f64::min)
}

fn mean_best(runs: &[RunRecord]) -> f64 {
    runs.iter().map(|r| r.best).sum::<f64>() / runs.len() as f64
}

/// Conventional vs boosted outcome of one solver on one space and variant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub space: SpaceKey,
    pub variant: Variant,
    pub solver: SolverKind,
    pub runs: usize,
    pub conv_best: f64,
    pub geo_best: f64,
    /// `conv_best - geo_best`; positive when boosting found a lower cost.
    pub delta: f64,
    pub conv_mean: f64,
    pub geo_mean: f64,
}

impl CellResult {
    pub fn class(&self) -> DeltaClass {
        DeltaClass::of(self.delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaClass {
    Improved,
    Tie,
    Worse,
}

impl DeltaClass {
    /// Exact comparison: costs are deterministic.
    pub fn of(delta: f64) -> Self {
        if delta > 0.0 {
            DeltaClass::Improved
        } else if delta == 0.0 {
            DeltaClass::Tie
        } else {
            DeltaClass::Worse
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DeltaClass::Improved => "improved",
            DeltaClass::Tie => "tie",
            DeltaClass::Worse => "worse",
        }
    }
}

/// One cell per 3-body space, boost variant and solver, in grid order.
pub fn cell_results(results: &GridResults) -> Vec<CellResult> {
    let mut out = Vec::new();
    for space in results.spaces.iter().filter(|s| s.key != SpaceKey::TwelveBody) {
        for solver in &space.solvers {
            for boosted in &solver.boosted {
                out.push(cell(space.key, boosted.variant, solver.solver, &solver.conventional, &boosted.runs));
            }
        }
    }
    out
}

pub fn cell(space: SpaceKey, variant: Variant, solver: SolverKind, conv: &[RunRecord], geo: &[RunRecord]) -> CellResult {
    assert_eq!(conv.len(), geo.len(), "paired run counts");
    let (conv_best, geo_best) = (best_of(conv), best_of(geo));
    CellResult {
        space,
        variant,
        solver,
        runs: conv.len(),
        conv_best,
        geo_best,
        delta: conv_best - geo_best,
        conv_mean: mean_best(conv),
        geo_mean: mean_best(geo),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub improved: usize,
    pub tie: usize,
    pub worse: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.improved + self.tie + self.worse
    }

    pub fn tie_or_improved(&self) -> usize {
        self.improved + self.tie
    }
}

pub fn class_counts<'a>(cells: impl IntoIterator<Item = &'a CellResult>) -> ClassCounts {
    let mut c = ClassCounts::default();
    for cell in cells {
        match cell.class() {
            DeltaClass::Improved => c.improved += 1,
            DeltaClass::Tie => c.tie += 1,
            DeltaClass::Worse => c.worse += 1,
        }
    }
    c
}

/// Which families of a row hold the extreme value of their space.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Marker {
    pub conv: bool,
    pub geo: bool,
}

impl Marker {
    pub fn label(&self) -> &'static str {
        match (self.conv, self.geo) {
            (true, true) => "conv+geo",
            (true, false) => "conv",
            (false, true) => "geo",
            (false, false) => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatmapRow {
    pub cell: CellResult,
    pub class: DeltaClass,
    pub best: Marker,
    pub worst: Marker,
}

/// Rows for one variant. Best and worst markers compare the 2 x solvers
/// minima of each space; ties mark every holder.
pub fn heatmap(cells: &[CellResult], variant: Variant) -> Vec<HeatmapRow> {
    let rows: Vec<&CellResult> = cells.iter().filter(|c| c.variant == variant).collect();
    rows.iter()
        .map(|c| {
            let group = rows.iter().filter(|o| o.space == c.space);
            let values = group.flat_map(|o| [o.conv_best, o.geo_best]);
            let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            HeatmapRow {
                cell: (*c).clone(),
                class: c.class(),
                best: Marker {
                    conv: c.conv_best == lo,
                    geo: c.geo_best == lo,
                },
                worst: Marker {
                    conv: c.conv_best == hi,
                    geo: c.geo_best == hi,
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelativeRow {
    pub space: SpaceKey,
    pub variant: Variant,
    pub solver: SolverKind,
    /// Solver's best-of-runs minus the best of its family on the space.
    pub gap: f64,
}

/// Gaps to the best conventional solver and to the best boosted solver of
/// each space and variant.
pub fn relative_tables(cells: &[CellResult]) -> (Vec<RelativeRow>, Vec<RelativeRow>) {
    let table = |pick: fn(&CellResult) -> f64| {
        cells
            .iter()
            .map(|c| {
                let best = cells
                    .iter()
                    .filter(|o| o.space == c.space && o.variant == c.variant)
                    .map(pick)
                    .fold(f64::INFINITY, f64::min);
                RelativeRow {
                    space: c.space,
                    variant: c.variant,
                    solver: c.solver,
                    gap: pick(c) - best,
                }
            })
            .collect()
    };
    (table(|c| c.conv_best), table(|c| c.geo_best))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BondRow {
    pub chi: usize,
    pub improved: usize,
    pub tie_or_improved: usize,
    pub total: usize,
    pub pct_improved: f64,
    pub pct_tie_or_improved: f64,
}

/// Improved-case counts of the PGGray cells at every bond dimension in
/// `chi_list`.
pub fn bond_sweep(cells: &[CellResult], chi_list: &[usize]) -> Vec<BondRow> {
    chi_list
        .iter()
        .map(|&chi| {
            let counts = class_counts(
                cells
                    .iter()
                    .filter(|c| c.variant.scheme == crate::encoding::SchemeKind::Pggray && c.variant.chi == chi),
            );
            let total = counts.total();
            let pct = |n: usize| if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 };
            BondRow {
                chi,
                improved: counts.improved,
                tie_or_improved: counts.tie_or_improved(),
                total,
                pct_improved: pct(counts.improved),
                pct_tie_or_improved: pct(counts.tie_or_improved()),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    BruteForce,
    BestObserved,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Baseline {
    pub cost: f64,
    pub kind: BaselineKind,
}

/// Brute-force optimum when known, else the lowest cost any run found.
pub fn baseline(space: &SpaceResult) -> Baseline {
    match &space.optimum {
        Some(o) => Baseline {
            cost: o.cost,
            kind: BaselineKind::BruteForce,
        },
        None => Baseline {
            cost: space
                .solvers
                .iter()
                .flat_map(|s| s.conventional.iter().chain(s.boosted.iter().flat_map(|b| &b.runs)))
                .map(|r| r.best)
                .fold(f64::INFINITY, f64::min),
            kind: BaselineKind::BestObserved,
        },
    }
}

/// Mean best-so-far of one solver family on one space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub space: SpaceKey,
    pub solver: SolverKind,
    /// `conv` or the boost variant label.
    pub family: String,
    pub mean_best: Vec<f64>,
}

/// Curves of the conventional runs and of every variant at `chi`.
pub fn convergence_curves(space: &SpaceResult, chi: usize) -> Vec<Curve> {
    let mean_curve = |runs: &[RunRecord]| -> Vec<f64> {
        let len = runs.iter().map(|r| r.curve.len()).min().unwrap_or(0);
        (0..len)
            .map(|i| runs.iter().map(|r| r.curve[i]).sum::<f64>() / runs.len() as f64)
            .collect()
    };
    let mut out = Vec::new();
    for s in &space.solvers {
        out.push(Curve {
            space: space.key,
            solver: s.solver,
            family: "conv".into(),
            mean_best: mean_curve(&s.conventional),
        });
        for b in s.boosted.iter().filter(|b| b.variant.chi == chi) {
            out.push(Curve {
                space: space.key,
                solver: s.solver,
                family: b.variant.to_string(),
                mean_best: mean_curve(&b.runs),
            });
        }
    }
    out
}

/// Paired comparison of one solver's best costs on two formulations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedComparison {
    pub solver: SolverKind,
    pub first: SpaceKey,
    pub second: SpaceKey,
    pub runs: usize,
    pub mean_first: f64,
    pub mean_second: f64,
    pub first_wins: usize,
    pub second_wins: usize,
    pub ties: usize,
    /// One-sided sign-test p-value for "first is lower", ties dropped.
    pub p_value: f64,
}

/// One-sided exact sign test: probability of at least `wins` successes in
/// `wins + losses` fair coin flips.
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = (wins + losses) as u64;
    if n == 0 || wins == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, n).expect("valid binomial");
    b.sf(wins as u64 - 1)
}

/// Compares conventional runs of every solver present on both spaces,
/// pairing runs by index.
pub fn compare_spaces(first: &SpaceResult, second: &SpaceResult) -> Vec<PairedComparison> {
    first
        .solvers
        .iter()
        .filter_map(|a| second.solver(a.solver).map(|b| (a, b)))
        .map(|(a, b)| {
            let n = a.conventional.len().min(b.conventional.len());
            let (xa, xb) = (&a.conventional[..n], &b.conventional[..n]);
            let first_wins = xa.iter().zip(xb).filter(|(p, q)| p.best < q.best).count();
            let second_wins = xa.iter().zip(xb).filter(|(p, q)| p.best > q.best).count();
            PairedComparison {
                solver: a.solver,
                first: first.key,
                second: second.key,
                runs: n,
                mean_first: mean_best(xa),
                mean_second: mean_best(xb),
                first_wins,
                second_wins,
                ties: n - first_wins - second_wins,
                p_value: sign_test(first_wins, second_wins),
            }
        })
        .collect()
}
