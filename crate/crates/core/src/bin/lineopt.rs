use std::error::Error as StdError;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use lineopt::bench::{run_grid, write_outputs, ExperimentGrid, TraceDir};
use lineopt::catalog::{default_catalog, load_catalog, ProblemCatalog};
use lineopt::encoding::{BitString, Codec, SchemeKind, TripleCodec, TwelveBodyCodec};
use lineopt::evaluator::SimEvaluator;
use lineopt::freestage::{pgco_search, reduce_space, DevMode, PgKey, ReducedSpace};
use lineopt::geo::{boost, GeoParams, Selection};
use lineopt::mpsgen::{MpsModel, TrainParams};
use lineopt::simulator::{evaluate, simulate_observed, cost, CsvTrace, LineConfig};
use lineopt::solvers::{run_solver, RunOptions, SolverKind, Trace};
use lineopt::space::{SearchSpace, TwelveBodySpace};

type CliResult<T = ()> = Result<T, Box<dyn StdError>>;

#[derive(Parser)]
#[command(name = "lineopt", version, about = "Production-line planning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a catalog in canonical form.
    Dump {
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Simulate one configuration and print its cost.
    Simulate {
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// "s1,r1,...,s6,r6", 1-based ids.
        #[arg(long)]
        config: String,
        /// Per-step CSV trace.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Build a reduced 3-body search space.
    Reduce {
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        margin: f64,
        #[arg(long)]
        dev: DevMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode a triple of stage indices as a bitstring.
    Encode {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        scheme: SchemeKind,
        #[arg(long)]
        triple: String,
        #[arg(long)]
        pg_chain: bool,
    },
    /// Decode a bitstring into a triple of stage indices.
    Decode {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        scheme: SchemeKind,
        #[arg(long)]
        bits: String,
        #[arg(long)]
        pg_chain: bool,
    },
    /// Run one conventional solver.
    Solve {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long)]
        solver: SolverKind,
        #[arg(long, default_value_t = 240)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Count every evaluation, repeats included.
        #[arg(long)]
        no_cache: bool,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a solver for the seed evaluations, then boost with the MPS model.
    Boost {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long, default_value = "pggray")]
        scheme: SchemeKind,
        #[arg(long)]
        solver: SolverKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 240)]
        budget: usize,
        #[arg(long, default_value_t = 100)]
        seed_evals: usize,
        #[arg(long, default_value_t = 6)]
        chi: usize,
        #[arg(long, default_value = "probability")]
        select: Selection,
        #[arg(long)]
        warm_start: bool,
        #[arg(long)]
        pg_chain: bool,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Problem-guided forest search over a reduced space.
    Pgco {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long, default_value_t = 3)]
        roots: usize,
        #[arg(long, default_value_t = 3)]
        branches: usize,
        #[arg(long)]
        pg_chain: bool,
    },
    /// MPS model files.
    Mps {
        #[command(subcommand)]
        command: MpsCommand,
    },
    /// Run an experiment grid and write its tables.
    Bench {
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum MpsCommand {
    /// Write a randomly initialised model.
    Init {
        #[arg(long)]
        sites: usize,
        #[arg(long, default_value_t = 6)]
        chi: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = MpsFormat::Binary)]
        format: MpsFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a model (text or binary) as text.
    Dump { model: PathBuf },
    /// Read a model (text or binary) and write it in the chosen format.
    Load {
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = MpsFormat::Binary)]
        format: MpsFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw bitstrings from a model, one per line.
    Sample {
        model: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MpsFormat {
    Text,
    Binary,
}

#[derive(Args)]
struct SpaceArgs {
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    space: PathBuf,
}

#[derive(Args)]
struct TargetArgs {
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Reduced space file; required for the 3-body formulation.
    #[arg(long)]
    space: Option<PathBuf>,
    #[arg(long, default_value = "3body")]
    formulation: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Dump { catalog } => {
            print!("{}", catalog_from(catalog.as_deref())?.dump());
            Ok(())
        }
        Command::Simulate { catalog, config, trace } => simulate_cmd(catalog.as_deref(), &config, trace.as_deref()),
        Command::Reduce {
            catalog,
            margin,
            dev,
            out,
        } => {
            let catalog = catalog_from(catalog.as_deref())?;
            let space = reduce_space(&catalog, margin, dev)?;
            write_file(&out, space.to_json().as_bytes())?;
            let sizes = space.stage_sizes();
            println!(
                "{}",
                json!({ "stage_sizes": sizes, "total_size": space.total_size() })
            );
            Ok(())
        }
        Command::Encode {
            space,
            scheme,
            triple,
            pg_chain,
        } => {
            let (_, space) = load_space(&space)?;
            let codec = TripleCodec::new(Arc::new(space), scheme, pg_key(pg_chain));
            let point = parse_list(&triple)?;
            println!("{}", codec.try_encode(&point)?);
            Ok(())
        }
        Command::Decode {
            space,
            scheme,
            bits,
            pg_chain,
        } => {
            let (_, space) = load_space(&space)?;
            let codec = TripleCodec::new(Arc::new(space), scheme, pg_key(pg_chain));
            let point = codec.decode(&bits.parse::<BitString>()?)?;
            let text: Vec<String> = point.iter().map(|v| v.to_string()).collect();
            println!("{}", text.join(","));
            Ok(())
        }
        Command::Solve {
            target,
            solver,
            budget,
            seed,
            no_cache,
            trace,
        } => {
            let (catalog, space) = load_target(&target)?;
            let evaluator = SimEvaluator::new(&catalog);
            let opts = RunOptions {
                budget,
                seed,
                cache: !no_cache,
            };
            let result = run_solver(solver, space.as_ref(), opts, &evaluator)?;
            finish_trace(&result, trace.as_deref())
        }
        Command::Boost {
            target,
            scheme,
            solver,
            seed,
            budget,
            seed_evals,
            chi,
            select,
            warm_start,
            pg_chain,
            trace,
        } => {
            let (catalog, space) = load_target(&target)?;
            let codec: Box<dyn Codec> = match &space {
                Target::Three(s) => Box::new(TripleCodec::new(s.clone(), scheme, pg_key(pg_chain))),
                Target::Twelve(_) => {
                    if scheme != SchemeKind::Gray {
                        return Err("the 12-body formulation only has the gray encoding".into());
                    }
                    Box::new(TwelveBodyCodec::new(&catalog))
                }
            };
            let evaluator = SimEvaluator::new(&catalog);
            let prefix = run_solver(solver, space.as_ref(), RunOptions::new(seed_evals, seed), &evaluator)?;
            let params = GeoParams {
                seed_evals: seed_evals.min(prefix.len()),
                total_budget: budget,
                train: TrainParams {
                    max_bond: chi,
                    ..TrainParams::default()
                },
                warm_start,
                selection: select,
                ..GeoParams::default()
            };
            let outcome = boost(&prefix, codec.as_ref(), space.as_ref(), &params, &evaluator, seed)?;
            eprintln!(
                "iterations={} samples={} fallback={}",
                outcome.stats.iterations, outcome.stats.samples_drawn, outcome.stats.fallback_evals
            );
            finish_trace(&outcome.trace, trace.as_deref())
        }
        Command::Pgco {
            space,
            roots,
            branches,
            pg_chain,
        } => {
            let (catalog, space) = load_space(&space)?;
            let evaluator = SimEvaluator::new(&catalog);
            let r = pgco_search(&space, roots, branches, pg_key(pg_chain), &evaluator)?;
            println!(
                "{}",
                json!({
                    "config": r.best.to_string(),
                    "triple": r.triple,
                    "cost": r.cost,
                    "explored": r.explored,
                })
            );
            Ok(())
        }
        Command::Mps { command } => mps_cmd(command),
        Command::Bench { grid, catalog, out } => {
            let catalog = catalog_from(catalog.as_deref())?;
            let grid = match grid {
                Some(path) => ExperimentGrid::from_toml(&read_text(&path)?)?,
                None => ExperimentGrid::default(),
            };
            let results = run_grid(&grid, &catalog, &TraceDir::new(&out))?;
            let summary = write_outputs(&results, &out)?;
            for s in &summary.skipped {
                eprintln!("skipped {}: {}", s.key, s.reason);
            }
            println!(
                "{} spaces, {} cells, written to {}",
                summary.spaces.len(),
                summary.cells.len(),
                out.display()
            );
            Ok(())
        }
    }
}

fn simulate_cmd(catalog: Option<&Path>, config: &str, trace: Option<&Path>) -> CliResult {
    let catalog = catalog_from(catalog)?;
    let config: LineConfig = config.parse()?;
    config.validate(&catalog)?;
    let value = match trace {
        Some(path) => {
            let mut observer = CsvTrace::new(BufWriter::new(create(path)?))?;
            let result = simulate_observed(&catalog, &config, &mut observer);
            observer.finish()?;
            cost(&result, &catalog)
        }
        None => evaluate(&catalog, &config),
    };
    println!("{}", serde_json::to_string(&value)?);
    Ok(())
}

fn mps_cmd(command: MpsCommand) -> CliResult {
    match command {
        MpsCommand::Init {
            sites,
            chi,
            seed,
            format,
            out,
        } => {
            let params = TrainParams {
                max_bond: chi,
                ..TrainParams::default()
            };
            let model = MpsModel::random(sites, &params, &mut ChaCha8Rng::seed_from_u64(seed))?;
            write_model(&model, format, &out)
        }
        MpsCommand::Dump { model } => {
            print!("{}", read_model(&model)?.to_text());
            Ok(())
        }
        MpsCommand::Load { model, format, out } => write_model(&read_model(&model)?, format, &out),
        MpsCommand::Sample { model, count, seed } => {
            let mut model = read_model(&model)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for bits in model.sample(count, &mut rng) {
                writeln!(out, "{bits}")?;
            }
            Ok(())
        }
    }
}

fn read_model(path: &Path) -> CliResult<MpsModel> {
    let mut bytes = Vec::new();
    BufReader::new(open(path)?).read_to_end(&mut bytes)?;
    if bytes.starts_with(b"MPSB") {
        Ok(MpsModel::read_binary(bytes.as_slice())?)
    } else {
        Ok(MpsModel::from_text(std::str::from_utf8(&bytes)?)?)
    }
}

fn write_model(model: &MpsModel, format: MpsFormat, path: &Path) -> CliResult {
    match format {
        MpsFormat::Text => write_file(path, model.to_text().as_bytes()),
        MpsFormat::Binary => {
            let mut out = BufWriter::new(create(path)?);
            model.write_binary(&mut out)?;
            out.flush()?;
            Ok(())
        }
    }
}

enum Target {
    Three(Arc<ReducedSpace>),
    Twelve(TwelveBodySpace),
}

impl AsRef<dyn SearchSpace> for Target {
    fn as_ref(&self) -> &(dyn SearchSpace + 'static) {
        match self {
            Target::Three(s) => s.as_ref(),
            Target::Twelve(s) => s,
        }
    }
}

fn load_target(args: &TargetArgs) -> CliResult<(ProblemCatalog, Target)> {
    let catalog = catalog_from(args.catalog.as_deref())?;
    let target = match args.formulation.as_str() {
        "3body" => {
            let path = args.space.as_ref().ok_or("the 3-body formulation needs --space")?;
            Target::Three(Arc::new(ReducedSpace::from_json(&catalog, &read_text(path)?)?))
        }
        "12body" => Target::Twelve(TwelveBodySpace::new(&catalog)),
        other => return Err(format!("unknown formulation {other:?} (expected 3body or 12body)").into()),
    };
    Ok((catalog, target))
}

fn load_space(args: &SpaceArgs) -> CliResult<(ProblemCatalog, ReducedSpace)> {
    let catalog = catalog_from(args.catalog.as_deref())?;
    let space = ReducedSpace::from_json(&catalog, &read_text(&args.space)?)?;
    Ok((catalog, space))
}

fn catalog_from(path: Option<&Path>) -> CliResult<ProblemCatalog> {
    Ok(match path {
        Some(p) => load_catalog(p)?,
        None => default_catalog(),
    })
}

fn finish_trace(trace: &Trace, path: Option<&Path>) -> CliResult {
    if let Some(path) = path {
        trace.write_csv(BufWriter::new(create(path)?))?;
    }
    let best = trace.best().ok_or("run made no evaluations")?;
    println!(
        "{}",
        json!({
            "solver": trace.solver,
            "seed": trace.seed,
            "evaluations": trace.len(),
            "best_cost": best.cost,
            "best_config": best.config.to_string(),
            "best_point": best.point,
        })
    );
    Ok(())
}

fn pg_key(chain: bool) -> PgKey {
    if chain {
        PgKey::Chained
    } else {
        PgKey::FirstStage
    }
}

fn parse_list(text: &str) -> CliResult<Vec<u32>> {
    text.split(',')
        .map(|s| s.trim().parse::<u32>().map_err(|e| format!("bad index {s:?}: {e}").into()))
        .collect()
}

fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| format!("cannot open {}: {e}", path.display()).into())
}

fn create(path: &Path) -> CliResult<File> {
    File::create(path).map_err(|e| format!("cannot create {}: {e}", path.display()).into())
}

fn read_text(path: &Path) -> CliResult<String> {
    let mut s = String::new();
    open(path)?.read_to_string(&mut s)?;
    Ok(s)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    let mut f = create(path)?;
    f.write_all(bytes)?;
    Ok(())
}
