//! Half-hour time-domain simulation of the three-stage, six-shop line and
//! the weighted cost function.
//!
//! Servicing order per step is downstream first (assembly, paint, body) and
//! shop 1 before shop 2 inside a stage. Shops carry fractional progress;
//! buffers only ever hold whole cars. The year starts with empty buffers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{ProblemCatalog, HOURS_PER_SLOT, MONTHS, SHOPS, SLOTS_PER_DAY, STAGES};
use crate::error::{Error, Result};

/// Shift and rate of one shop, both 1-based catalog ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ShopState {
    pub shift: u8,
    pub rate: u8,
}

impl ShopState {
    pub const fn new(shift: u8, rate: u8) -> Self {
        Self { shift, rate }
    }

    pub fn is_valid_for(&self, catalog: &ProblemCatalog) -> bool {
        (1..=catalog.n_shifts()).contains(&(self.shift as usize))
            && (1..=catalog.n_rates()).contains(&(self.rate as usize))
    }
}

/// Full line state, shops ordered body1, body2, paint1, paint2, asm1, asm2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LineConfig {
    pub shops: [ShopState; SHOPS],
}

impl LineConfig {
    pub fn new(shops: [ShopState; SHOPS]) -> Self {
        Self { shops }
    }

    /// The twelve integers s1, r1, ..., s6, r6.
    pub fn to_twelve(&self) -> [u8; 12] {
        let mut out = [0; 12];
        for (j, s) in self.shops.iter().enumerate() {
            out[2 * j] = s.shift;
            out[2 * j + 1] = s.rate;
        }
        out
    }

    pub fn from_twelve(v: [u8; 12]) -> Self {
        let mut shops = [ShopState::new(1, 1); SHOPS];
        for (j, s) in shops.iter_mut().enumerate() {
            *s = ShopState::new(v[2 * j], v[2 * j + 1]);
        }
        Self { shops }
    }

    pub fn stage(&self, stage: usize) -> [ShopState; 2] {
        [self.shops[2 * stage], self.shops[2 * stage + 1]]
    }

    pub fn validate(&self, catalog: &ProblemCatalog) -> Result<()> {
        match self.shops.iter().position(|s| !s.is_valid_for(catalog)) {
            None => Ok(()),
            Some(j) => Err(Error::Config(format!(
                "shop {} state {:?} outside the catalog",
                j + 1,
                self.shops[j]
            ))),
        }
    }
}

impl fmt::Display for LineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.to_twelve();
        for (i, x) in v.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

impl Serialize for LineConfig {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl FromStr for LineConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .split(',')
            .map(|t| t.trim().parse::<u8>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse("line config", e))?;
        let arr: [u8; 12] = values.try_into().map_err(|v: Vec<u8>| {
            Error::parse("line config", format!("expected 12 integers, found {}", v.len()))
        })?;
        Ok(Self::from_twelve(arr))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Cars leaving assembly per month.
    pub monthly_production: [u64; MONTHS],
    /// Idle hours per shop (outer) and month (inner).
    pub idle_hours: [[f64; MONTHS]; SHOPS],
    pub final_buffers: [u32; 2],
    /// Whole cars completed by the body shops over the year.
    pub body_output: u64,
    /// Fractional progress left in each shop at year end.
    pub in_progress: [f64; SHOPS],
}

impl SimResult {
    pub fn annual_production(&self) -> u64 {
        self.monthly_production.iter().sum()
    }

    pub fn total_idle_hours(&self) -> f64 {
        self.idle_hours.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostValue {
    pub total: f64,
    pub production_term: f64,
    pub idle_term: f64,
}

/// Per-step hook; `()` observes nothing.
pub trait StepObserver {
    fn on_step(&mut self, step: &StepRecord<'_>);
}

impl StepObserver for () {
    #[inline(always)]
    fn on_step(&mut self, _: &StepRecord<'_>) {}
}

pub struct StepRecord<'a> {
    pub step: usize,
    /// Hours since the start of the year at the beginning of the step.
    pub time_hours: f64,
    pub produced: &'a [u32; SHOPS],
    pub idle: &'a [f64; SHOPS],
    pub buffers: [u32; 2],
}

pub fn simulate(catalog: &ProblemCatalog, config: &LineConfig) -> SimResult {
    simulate_observed(catalog, config, &mut ())
}

pub fn simulate_observed<O: StepObserver>(
    catalog: &ProblemCatalog,
    config: &LineConfig,
    observer: &mut O,
) -> SimResult {
    let calendar = catalog.calendar();
    let caps = catalog.buffer_capacities();
    let patterns: [&[bool]; SHOPS] =
        std::array::from_fn(|j| catalog.shift(config.shops[j].shift).pattern());
    let per_step: [f64; SHOPS] =
        std::array::from_fn(|j| catalog.rate(config.shops[j].rate) * HOURS_PER_SLOT);

    let mut buffers = [0u32; 2];
    let mut progress = [0.0f64; SHOPS];
    let mut monthly_production = [0u64; MONTHS];
    let mut idle_hours = [[0.0f64; MONTHS]; SHOPS];
    let mut body_output = 0u64;
    let mut produced = [0u32; SHOPS];
    let mut idle = [0.0f64; SHOPS];

    let mut step = 0usize;
    for (day, month) in calendar.day_months().into_iter().enumerate() {
        let week_offset = calendar.weekday(day as u32) * SLOTS_PER_DAY;
        for slot in 0..SLOTS_PER_DAY {
            let slot_of_week = week_offset + slot;
            for stage in (0..STAGES).rev() {
                for j in [2 * stage, 2 * stage + 1] {
                    produced[j] = 0;
                    idle[j] = 0.0;
                    if !patterns[j][slot_of_week] {
                        continue;
                    }
                    let attempted = per_step[j];
                    let reachable = progress[j] + attempted;
                    let whole = reachable.floor() as u32;
                    let available = if stage == 0 { u32::MAX } else { buffers[stage - 1] };
                    let room = if stage + 1 == STAGES {
                        u32::MAX
                    } else {
                        caps[stage] - buffers[stage]
                    };
                    let made = whole.min(available).min(room);
                    if made == whole {
                        progress[j] = reachable - whole as f64;
                    } else {
                        // starved or blocked: work only as long as needed for `made`
                        idle[j] = HOURS_PER_SLOT * (1.0 - made as f64 / attempted);
                        idle_hours[j][month] += idle[j];
                    }
                    produced[j] = made;
                    if stage > 0 {
                        buffers[stage - 1] -= made;
                    }
                    if stage + 1 < STAGES {
                        buffers[stage] += made;
                        debug_assert!(buffers[stage] <= caps[stage]);
                    } else {
                        monthly_production[month] += made as u64;
                    }
                    if stage == 0 {
                        body_output += made as u64;
                    }
                }
            }
            observer.on_step(&StepRecord {
                step,
                time_hours: step as f64 * HOURS_PER_SLOT,
                produced: &produced,
                idle: &idle,
                buffers,
            });
            step += 1;
        }
    }

    SimResult {
        monthly_production,
        idle_hours,
        final_buffers: buffers,
        body_output,
        in_progress: progress,
    }
}

pub fn cost(result: &SimResult, catalog: &ProblemCatalog) -> CostValue {
    let production_term: f64 = catalog
        .monthly_targets()
        .iter()
        .zip(&result.monthly_production)
        .map(|(&t, &p)| (t - p as f64).abs())
        .sum();
    let idle_term = catalog.idle_weight() * result.total_idle_hours();
    CostValue {
        total: production_term + idle_term,
        production_term,
        idle_term,
    }
}

/// Simulate then cost: the unit counted against evaluation budgets.
pub fn evaluate(catalog: &ProblemCatalog, config: &LineConfig) -> CostValue {
    cost(&simulate(catalog, config), catalog)
}

/// Observer writing one CSV row per step.
pub struct CsvTrace<W: std::io::Write> {
    writer: csv::Writer<W>,
    error: Option<csv::Error>,
}

impl<W: std::io::Write> CsvTrace<W> {
    pub fn new(inner: W) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(inner);
        let mut header = vec!["step".to_string(), "slot_time".to_string()];
        header.extend((1..=SHOPS).map(|j| format!("produced_{j}")));
        header.extend((1..=SHOPS).map(|j| format!("idle_{j}")));
        header.push("buffer1".into());
        header.push("buffer2".into());
        writer.write_record(&header)?;
        Ok(Self {
            writer,
            error: None,
        })
    }

    pub fn finish(mut self) -> Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e.into());
        }
        self.writer
            .flush()
            .map_err(|e| Error::io("simulation trace", e))
    }
}

impl<W: std::io::Write> StepObserver for CsvTrace<W> {
    fn on_step(&mut self, r: &StepRecord<'_>) {
        if self.error.is_some() {
            return;
        }
        let mut row = Vec::with_capacity(4 + 2 * SHOPS);
        row.push(r.step.to_string());
        row.push(r.time_hours.to_string());
        row.extend(r.produced.iter().map(|p| p.to_string()));
        row.extend(r.idle.iter().map(|&i| if i > 0.0 { "1" } else { "0" }.to_string()));
        row.push(r.buffers[0].to_string());
        row.push(r.buffers[1].to_string());
        if let Err(e) = self.writer.write_record(&row) {
            self.error = Some(e);
        }
    }
}
