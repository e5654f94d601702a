//! Cost evaluators. Solvers take an injected evaluator so callers can count
//! or memoize simulator calls without the solver knowing.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use crate::catalog::ProblemCatalog;
use crate::simulator::{self, CostValue, LineConfig};

pub trait Evaluator: Sync {
    fn evaluate(&self, config: &LineConfig) -> CostValue;
}

impl<F> Evaluator for F
where
    F: Fn(&LineConfig) -> CostValue + Sync,
{
    fn evaluate(&self, config: &LineConfig) -> CostValue {
        self(config)
    }
}

/// Runs the time-domain simulation for every call.
#[derive(Clone, Copy)]
pub struct SimEvaluator<'a> {
    catalog: &'a ProblemCatalog,
}

impl<'a> SimEvaluator<'a> {
    pub fn new(catalog: &'a ProblemCatalog) -> Self {
        Self { catalog }
    }
}

impl Evaluator for SimEvaluator<'_> {
    fn evaluate(&self, config: &LineConfig) -> CostValue {
        simulator::evaluate(self.catalog, config)
    }
}

/// Counts calls passing through to the inner evaluator.
pub struct CountingEvaluator<E> {
    inner: E,
    calls: AtomicU64,
}

impl<E: Evaluator> CountingEvaluator<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }
}

impl<E: Evaluator> Evaluator for CountingEvaluator<E> {
    fn evaluate(&self, config: &LineConfig) -> CostValue {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.evaluate(config)
    }
}

/// Shares results across runs. The simulator is deterministic, so this only
/// changes wall time, never a trace.
pub struct MemoEvaluator<E> {
    inner: E,
    memo: Mutex<HashMap<LineConfig, CostValue>>,
}

impl<E: Evaluator> MemoEvaluator<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.memo.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<E: Evaluator> Evaluator for MemoEvaluator<E> {
    fn evaluate(&self, config: &LineConfig) -> CostValue {
        if let Some(v) = self.memo.lock().unwrap().get(config) {
            return *v;
        }
        let v = self.inner.evaluate(config);
        self.memo.lock().unwrap().insert(*config, v);
        v
    }
}
