use std::io::Write;

use crate::error::{Error, Result};
use crate::simulator::LineConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    /// 1-based, dense.
    pub eval_index: usize,
    pub point: Vec<u32>,
    pub config: LineConfig,
    pub cost: f64,
    pub best_so_far: f64,
}

/// Every cost evaluation of one run, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub solver: String,
    pub seed: u64,
    pub formulation: String,
    pub space: String,
    pub entries: Vec<TraceEntry>,
}

impl Trace {
    pub fn new(solver: impl Into<String>, seed: u64, formulation: String, space: String) -> Self {
        Self {
            solver: solver.into(),
            seed,
            formulation,
            space,
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn best(&self) -> Option<&TraceEntry> {
        self.entries
            .iter()
            .fold(None, |best: Option<&TraceEntry>, e| match best {
                Some(b) if b.cost <= e.cost => Some(b),
                _ => Some(e),
            })
    }

    pub fn best_cost(&self) -> f64 {
        self.entries.last().map_or(f64::INFINITY, |e| e.best_so_far)
    }

    pub fn push(&mut self, point: Vec<u32>, config: LineConfig, cost: f64) {
        let best_so_far = self.best_cost().min(cost);
        self.entries.push(TraceEntry {
            eval_index: self.entries.len() + 1,
            point,
            config,
            cost,
            best_so_far,
        });
    }

    /// The first `n` entries as a trace of their own.
    pub fn prefix(&self, n: usize) -> Trace {
        Trace {
            entries: self.entries[..n.min(self.entries.len())].to_vec(),
            ..self.clone_header()
        }
    }

    pub(crate) fn clone_header(&self) -> Trace {
        Trace {
            solver: self.solver.clone(),
            seed: self.seed,
            formulation: self.formulation.clone(),
            space: self.space.clone(),
            entries: Vec::new(),
        }
    }

    /// CSV with columns eval_index, config, cost, best_so_far.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["eval_index", "config", "cost", "best_so_far"])?;
        for e in &self.entries {
            w.write_record([
                e.eval_index.to_string(),
                e.config.to_string(),
                e.cost.to_string(),
                e.best_so_far.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("trace", e))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}
