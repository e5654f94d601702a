//! Conventional black-box solvers: three GA variants, simulated annealing and
//! parallel tempering. All of them spend a fixed evaluation budget and
//! record every evaluation in a [`Trace`].
//!
//! Within a run, repeated points are served from a per-run cache and do not
//! consume budget unless caching is turned off.

mod ga;
mod pt;
mod sa;
mod trace;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use ga::{run_ga, CrossoverKind, GaParams};
pub use pt::{pt_betas, pt_swap_probability, run_pt, PtParams};
pub use sa::{run_sa, sa_acceptance, SaParams};
pub use trace::{Trace, TraceEntry};

use crate::error::{Error, Result};
use crate::evaluator::Evaluator;
use crate::space::SearchSpace;

/// Consecutive cache hits after which a run is considered stuck.
const STALL_LIMIT: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Ga1,
    Ga2,
    Gau,
    Sa,
    Pt,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [
        SolverKind::Ga1,
        SolverKind::Ga2,
        SolverKind::Gau,
        SolverKind::Sa,
        SolverKind::Pt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Ga1 => "ga1",
            SolverKind::Ga2 => "ga2",
            SolverKind::Gau => "gau",
            SolverKind::Sa => "sa",
            SolverKind::Pt => "pt",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::parse("solver", format!("unknown solver {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub budget: usize,
    pub seed: u64,
    /// Serve repeated points from the run cache without spending budget.
    pub cache: bool,
}

impl RunOptions {
    pub fn new(budget: usize, seed: u64) -> Self {
        Self {
            budget,
            seed,
            cache: true,
        }
    }
}

/// Runs `kind` with its default parameters.
pub fn run_solver<S, E>(kind: SolverKind, space: &S, opts: RunOptions, evaluator: &E) -> Result<Trace>
where
    S: SearchSpace + ?Sized,
    E: Evaluator + ?Sized,
{
    match kind {
        SolverKind::Ga1 => run_ga(space, &GaParams::new(CrossoverKind::OnePoint), opts, evaluator),
        SolverKind::Ga2 => run_ga(space, &GaParams::new(CrossoverKind::TwoPoint), opts, evaluator),
        SolverKind::Gau => run_ga(space, &GaParams::new(CrossoverKind::Uniform), opts, evaluator),
        SolverKind::Sa => run_sa(space, &SaParams::default(), opts, evaluator),
        SolverKind::Pt => run_pt(space, &PtParams::default(), opts, evaluator),
    }
}

pub(crate) fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Budget, cache and trace bookkeeping shared by all solvers.
pub(crate) struct Budgeted<'a, S: ?Sized, E: ?Sized> {
    space: &'a S,
    evaluator: &'a E,
    opts: RunOptions,
    seen: HashMap<Vec<u32>, f64>,
    trace: Trace,
    hits_in_a_row: usize,
}

impl<'a, S, E> Budgeted<'a, S, E>
where
    S: SearchSpace + ?Sized,
    E: Evaluator + ?Sized,
{
    pub(crate) fn new(solver: &str, space: &'a S, evaluator: &'a E, opts: RunOptions) -> Self {
        Self {
            trace: Trace::new(
                solver,
                opts.seed,
                space.formulation().to_string(),
                space.describe(),
            ),
            space,
            evaluator,
            opts,
            seen: HashMap::new(),
            hits_in_a_row: 0,
        }
    }

    pub(crate) fn space(&self) -> &S {
        self.space
    }

    /// Cost of `point`, or `None` once the run has to stop.
    pub(crate) fn eval(&mut self, point: &[u32]) -> Option<f64> {
        if self.done() {
            return None;
        }
        if self.opts.cache {
            if let Some(&c) = self.seen.get(point) {
                self.hits_in_a_row += 1;
                return Some(c);
            }
        }
        let config = self.space.config(point);
        let cost = self.evaluator.evaluate(&config).total;
        self.seen.insert(point.to_vec(), cost);
        self.hits_in_a_row = 0;
        self.trace.push(point.to_vec(), config, cost);
        Some(cost)
    }

    /// Budget spent, every state of the space seen, or no new point found
    /// for a long time.
    pub(crate) fn done(&self) -> bool {
        self.trace.len() >= self.opts.budget
            || (self.opts.cache && self.seen.len() as u64 >= self.space.total_size())
            || self.hits_in_a_row >= STALL_LIMIT
    }

    pub(crate) fn finish(self) -> Trace {
        self.trace
    }
}
