use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::Serialize;

use super::grid::{run_seed, ExperimentGrid, SeedRole, SpaceKey, Variant};
use crate::catalog::ProblemCatalog;
use crate::encoding::{Codec, SchemeKind, TripleCodec, TwelveBodyCodec};
use crate::error::{Error, Result};
use crate::evaluator::{Evaluator, MemoEvaluator, SimEvaluator};
use crate::freestage::reduce_space;
use crate::geo::{boost, GeoParams};
use crate::simulator::LineConfig;
use crate::solvers::{run_solver, RunOptions, SolverKind, Trace};
use crate::space::{SearchSpace, TwelveBodySpace};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteForce {
    pub point: Vec<u32>,
    pub config: LineConfig,
    pub cost: f64,
}

/// Exhaustive minimum; ties go to the lowest row-major position.
pub fn brute_force<S, E>(space: &S, evaluator: &E, cap: u64) -> Result<BruteForce>
where
    S: SearchSpace + ?Sized,
    E: Evaluator + ?Sized,
{
    let size = space.total_size();
    if size > cap {
        return Err(Error::OverCap { size, cap });
    }
    let mut best: Option<BruteForce> = None;
    for flat in 0..size {
        let point = space.point_at(flat);
        let config = space.config(&point);
        let cost = evaluator.evaluate(&config).total;
        if best.as_ref().is_none_or(|b| cost < b.cost) {
            best = Some(BruteForce {
                point,
                config,
                cost,
            });
        }
    }
    best.ok_or_else(|| Error::Config("space is empty".into()))
}

/// Receives every trace a grid produces.
pub trait TraceSink: Sync {
    fn record(&self, space: &SpaceKey, solver: SolverKind, run: usize, variant: Option<Variant>, trace: &Trace) -> Result<()>;
}

impl TraceSink for () {
    fn record(&self, _: &SpaceKey, _: SolverKind, _: usize, _: Option<Variant>, _: &Trace) -> Result<()> {
        Ok(())
    }
}

/// Writes `traces/<space>/<solver>/conv_<run>.csv` and
/// `traces/<space>/<solver>/<scheme>_chi<chi>_<run>.csv` under a root.
pub struct TraceDir {
    root: PathBuf,
}

impl TraceDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path_for(&self, space: &SpaceKey, solver: SolverKind, run: usize, variant: Option<Variant>) -> PathBuf {
        let name = match variant {
            None => format!("conv_{run:03}.csv"),
            Some(v) => format!("{v}_{run:03}.csv"),
        };
        self.root
            .join("traces")
            .join(space.label())
            .join(solver.name())
            .join(name)
    }
}

impl TraceSink for TraceDir {
    fn record(&self, space: &SpaceKey, solver: SolverKind, run: usize, variant: Option<Variant>, trace: &Trace) -> Result<()> {
        let path = self.path_for(space, solver, run, variant);
        let dir = path.parent().expect("trace path has a parent");
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        trace.write_csv(std::io::BufWriter::new(file))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub evaluations: usize,
    pub best: f64,
    /// Best-so-far at every evaluation index up to the budget; a run that
    /// stopped early keeps its last value.
    #[serde(skip)]
    pub curve: Vec<f64>,
}

impl RunRecord {
    pub fn from_trace(run: usize, trace: &Trace, budget: usize) -> Self {
        let curve = (0..budget)
            .map(|i| {
                trace
                    .entries
                    .get(i.min(trace.len().saturating_sub(1)))
                    .map_or(f64::INFINITY, |e| e.best_so_far)
            })
            .collect();
        Self {
            run,
            seed: trace.seed,
            evaluations: trace.len(),
            best: trace.best_cost(),
            curve,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoostedRuns {
    pub variant: Variant,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverRuns {
    pub solver: SolverKind,
    pub conventional: Vec<RunRecord>,
    pub boosted: Vec<BoostedRuns>,
}

impl SolverRuns {
    pub fn boosted(&self, variant: Variant) -> Option<&[RunRecord]> {
        self.boosted
            .iter()
            .find(|b| b.variant == variant)
            .map(|b| b.runs.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceResult {
    pub key: SpaceKey,
    pub size: u64,
    /// Brute-force optimum when the space is under the cap.
    pub optimum: Option<BruteForce>,
    pub solvers: Vec<SolverRuns>,
}

impl SpaceResult {
    pub fn solver(&self, kind: SolverKind) -> Option<&SolverRuns> {
        self.solvers.iter().find(|s| s.solver == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedSpace {
    pub key: SpaceKey,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResults {
    pub grid: ExperimentGrid,
    pub spaces: Vec<SpaceResult>,
    pub skipped: Vec<SkippedSpace>,
}

impl GridResults {
    pub fn space(&self, key: &SpaceKey) -> Option<&SpaceResult> {
        self.spaces.iter().find(|s| s.key == *key)
    }
}

struct PreparedSpace<'c> {
    key: SpaceKey,
    space: Arc<dyn SearchSpace>,
    codecs: Vec<(Variant, Arc<dyn Codec>)>,
    evaluator: MemoEvaluator<SimEvaluator<'c>>,
}

/// Runs every conventional solver `runs_per_cell` times on every space of
/// the grid and boosts each run's prefix with every variant. Traces go to
/// `sink` as they are produced.
pub fn run_grid(grid: &ExperimentGrid, catalog: &ProblemCatalog, sink: &dyn TraceSink) -> Result<GridResults> {
    grid.validate()?;
    let variants = grid.variants();

    let mut prepared: Vec<PreparedSpace> = Vec::new();
    let mut skipped = Vec::new();
    for &dev in &grid.dev_modes {
        for &margin in &grid.margins {
            let key = SpaceKey::ThreeBody { margin, dev };
            match reduce_space(catalog, margin, dev) {
                Ok(space) => {
                    let space = Arc::new(space);
                    let codecs = variants
                        .iter()
                        .map(|&v| {
                            let codec: Arc<dyn Codec> =
                                Arc::new(TripleCodec::new(space.clone(), v.scheme, grid.geo.pg_key));
                            (v, codec)
                        })
                        .collect();
                    prepared.push(PreparedSpace {
                        key,
                        space,
                        codecs,
                        evaluator: MemoEvaluator::new(SimEvaluator::new(catalog)),
                    });
                }
                Err(e @ Error::InfeasibleMargin { .. }) => skipped.push(SkippedSpace {
                    key,
                    reason: e.to_string(),
                }),
                Err(e) => return Err(e),
            }
        }
    }
    if grid.twelve_body {
        // twelve-body bitstrings have a single, Gray-coded layout
        let codec: Arc<dyn Codec> = Arc::new(TwelveBodyCodec::new(catalog));
        let variant = Variant {
            scheme: SchemeKind::Gray,
            chi: grid.chi,
        };
        let codecs = vec![(variant, codec)];
        prepared.push(PreparedSpace {
            key: SpaceKey::TwelveBody,
            space: Arc::new(TwelveBodySpace::new(catalog)),
            codecs,
            evaluator: MemoEvaluator::new(SimEvaluator::new(catalog)),
        });
    }

    let optima: Vec<Option<BruteForce>> = prepared
        .iter()
        .map(|p| {
            (p.space.total_size() <= grid.brute_force_cap)
                .then(|| brute_force(&*p.space, &p.evaluator, grid.brute_force_cap))
                .transpose()
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, SolverKind, usize)> = prepared
        .iter()
        .enumerate()
        .flat_map(|(i, _)| {
            grid.solvers
                .iter()
                .flat_map(move |&s| (0..grid.runs_per_cell).map(move |r| (i, s, r)))
        })
        .collect();
    let outputs: Vec<Mutex<Option<Result<JobOutput>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let j = next.fetch_add(1, Ordering::Relaxed);
        let Some(&(i, solver, run)) = jobs.get(j) else {
            break;
        };
        let out = run_job(grid, &prepared[i], solver, run, sink);
        let failed = out.is_err();
        *outputs[j].lock().unwrap() = Some(out);
        if failed {
            next.store(jobs.len(), Ordering::Relaxed);
        }
    };
    let threads = grid.threads.max(1);
    if threads == 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(worker);
            }
        });
    }

    let mut spaces: Vec<SpaceResult> = prepared
        .iter()
        .zip(optima)
        .map(|(p, optimum)| SpaceResult {
            key: p.key,
            size: p.space.total_size(),
            optimum,
            solvers: grid
                .solvers
                .iter()
                .map(|&solver| SolverRuns {
                    solver,
                    conventional: Vec::new(),
                    boosted: p
                        .codecs
                        .iter()
                        .map(|(v, _)| BoostedRuns {
                            variant: *v,
                            runs: Vec::new(),
                        })
                        .collect(),
                })
                .collect(),
        })
        .collect();
    for (&(i, solver, _), out) in jobs.iter().zip(outputs) {
        let out = out.into_inner().unwrap().unwrap_or_else(|| {
            Err(Error::Config("grid run was abandoned after an earlier failure".into()))
        })?;
        let runs = spaces[i]
            .solvers
            .iter_mut()
            .find(|s| s.solver == solver)
            .expect("solver slot");
        runs.conventional.push(out.conventional);
        for (slot, rec) in runs.boosted.iter_mut().zip(out.boosted) {
            slot.runs.push(rec);
        }
    }
    Ok(GridResults {
        grid: grid.clone(),
        spaces,
        skipped,
    })
}

struct JobOutput {
    conventional: RunRecord,
    boosted: Vec<RunRecord>,
}

fn run_job(grid: &ExperimentGrid, p: &PreparedSpace<'_>, solver: SolverKind, run: usize, sink: &dyn TraceSink) -> Result<JobOutput> {
    let seed = run_seed(grid.master_seed, &p.key, solver, run, SeedRole::Conventional);
    let opts = RunOptions {
        budget: grid.budget,
        seed,
        cache: grid.cache,
    };
    let conv = run_solver(solver, &*p.space, opts, &p.evaluator)?;
    sink.record(&p.key, solver, run, None, &conv)?;
    // a run that stopped early seeds the booster with all it has
    let seed_evals = grid.seed_evals.min(conv.len());
    let prefix = conv.prefix(seed_evals);
    let mut boosted = Vec::with_capacity(p.codecs.len());
    for (variant, codec) in &p.codecs {
        let params = GeoParams {
            seed_evals,
            ..grid.geo_params(variant.chi)
        };
        let bseed = run_seed(grid.master_seed, &p.key, solver, run, SeedRole::Boost(*variant));
        let out = boost(&prefix, &**codec, &*p.space, &params, &p.evaluator, bseed)?;
        sink.record(&p.key, solver, run, Some(*variant), &out.trace)?;
        boosted.push(RunRecord::from_trace(run, &out.trace, grid.budget));
    }
    Ok(JobOutput {
        conventional: RunRecord::from_trace(run, &conv, grid.budget),
        boosted,
    })
}

/// Reads the `best_so_far` column of a trace CSV.
pub fn read_trace_bests(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h == "best_so_far")
        .ok_or_else(|| Error::parse(path.display().to_string(), "no best_so_far column"))?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            rec[col]
                .parse()
                .map_err(|_| Error::parse(path.display().to_string(), "bad best_so_far value"))
        })
        .collect()
}
