//! Problem instance: shift calendars, production rates, monthly targets,
//! buffer capacities and the idle-hour weight.
//!
//! A catalog is immutable once built. Shift schedules are weekly patterns
//! of 336 half-hour slots, Monday 00:00 first, which matches the simulation
//! timestep so no interpolation is needed anywhere.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SLOTS_PER_DAY: usize = 48;
pub const SLOTS_PER_WEEK: usize = 7 * SLOTS_PER_DAY;
pub const HOURS_PER_SLOT: f64 = 0.5;
pub const MONTHS: usize = 12;
pub const STAGES: usize = 3;
pub const SHOPS_PER_STAGE: usize = 2;
pub const SHOPS: usize = STAGES * SHOPS_PER_STAGE;

pub const REQUIRED_SHIFTS: usize = 15;
pub const REQUIRED_RATES: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftSchedule {
    id: u8,
    pattern: Vec<bool>,
    // true-slot count per weekday, Monday first
    day_slots: [u32; 7],
}

impl ShiftSchedule {
    pub fn new(id: u8, pattern: Vec<bool>) -> Result<Self> {
        if pattern.len() != SLOTS_PER_WEEK {
            return Err(Error::Validation(format!(
                "shift {id}: weekly pattern must have {SLOTS_PER_WEEK} slots, found {}",
                pattern.len()
            )));
        }
        if !pattern.iter().any(|&b| b) {
            return Err(Error::Validation(format!(
                "shift {id}: schedule has no working slots"
            )));
        }
        Ok(Self::from_pattern_unchecked(id, pattern))
    }

    /// Builds a schedule without the non-empty check. Only the pattern length
    /// is enforced; used for degenerate test lines (e.g. a stage that never
    /// works).
    pub fn from_pattern_unchecked(id: u8, pattern: Vec<bool>) -> Self {
        assert_eq!(pattern.len(), SLOTS_PER_WEEK);
        let mut day_slots = [0u32; 7];
        for (day, chunk) in pattern.chunks(SLOTS_PER_DAY).enumerate() {
            day_slots[day] = chunk.iter().filter(|&&b| b).count() as u32;
        }
        Self {
            id,
            pattern,
            day_slots,
        }
    }

    /// Schedule that works the given half-open `[start, end)` hour blocks on
    /// each listed weekday (0 = Monday). Blocks ending past midnight spill
    /// into the next day, wrapping Sunday into Monday.
    pub fn from_blocks(id: u8, days: &[u8], blocks: &[(f64, f64)]) -> Result<Self> {
        let mut pattern = vec![false; SLOTS_PER_WEEK];
        for &day in days {
            if day >= 7 {
                return Err(Error::Validation(format!(
                    "shift {id}: weekday {day} out of range 0..6"
                )));
            }
            for &(start, end) in blocks {
                let s = hours_to_slot(start, id)?;
                let mut e = hours_to_slot(end, id)?;
                if e <= s {
                    e += SLOTS_PER_DAY;
                }
                for slot in s..e {
                    pattern[(day as usize * SLOTS_PER_DAY + slot) % SLOTS_PER_WEEK] = true;
                }
            }
        }
        Self::new(id, pattern)
    }

    pub fn id(&self) -> u8 {
        self.id
    }

    pub fn pattern(&self) -> &[bool] {
        &self.pattern
    }

    #[inline]
    pub fn is_active(&self, slot_of_week: usize) -> bool {
        self.pattern[slot_of_week]
    }

    pub fn weekly_slots(&self) -> u32 {
        self.day_slots.iter().sum()
    }

    pub fn weekly_hours(&self) -> f64 {
        self.weekly_slots() as f64 * HOURS_PER_SLOT
    }

    pub fn pattern_string(&self) -> String {
        self.pattern.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

fn hours_to_slot(hours: f64, id: u8) -> Result<usize> {
    let slots = hours * 2.0;
    if !(0.0..=24.0).contains(&hours) || slots.fract() != 0.0 {
        return Err(Error::Validation(format!(
            "shift {id}: block boundary {hours} is not a half-hour in 0..24"
        )));
    }
    Ok(slots as usize % SLOTS_PER_DAY)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateOption {
    pub id: u8,
    pub cars_per_hour: f64,
}

/// Month lengths and the weekday of the first day of the year.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calendar {
    pub month_days: [u32; MONTHS],
    /// 0 = Monday.
    pub first_weekday: u32,
}

impl Calendar {
    /// Calendar year 2023 (1 January was a Sunday).
    pub fn year_2023() -> Self {
        Self {
            month_days: [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31],
            first_weekday: 6,
        }
    }

    /// Twelve 28-day months starting on a Monday: every month is exactly four
    /// whole weeks.
    pub fn aligned() -> Self {
        Self {
            month_days: [28; MONTHS],
            first_weekday: 0,
        }
    }

    pub fn total_days(&self) -> u32 {
        self.month_days.iter().sum()
    }

    pub fn month_start_day(&self, month: usize) -> u32 {
        self.month_days[..month].iter().sum()
    }

    #[inline]
    pub fn weekday(&self, day_of_year: u32) -> usize {
        ((self.first_weekday + day_of_year) % 7) as usize
    }

    /// Month index (0-based) of every day of the year.
    pub fn day_months(&self) -> Vec<usize> {
        self.month_days
            .iter()
            .enumerate()
            .flat_map(|(m, &d)| std::iter::repeat_n(m, d as usize))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.first_weekday >= 7 {
            return Err(Error::Validation(format!(
                "calendar first_weekday {} out of range 0..6",
                self.first_weekday
            )));
        }
        if self.month_days.iter().any(|&d| d == 0 || d > 31) {
            return Err(Error::Validation(
                "calendar month lengths must be in 1..31".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemCatalog {
    shifts: Vec<ShiftSchedule>,
    rates: Vec<RateOption>,
    nominal_rate_id: u8,
    monthly_targets: [f64; MONTHS],
    buffer_capacities: [u32; 2],
    idle_weight: f64,
    calendar: Calendar,
    // scheduled hours per (shift, month)
    monthly_hours: Vec<[f64; MONTHS]>,
}

/// Parts of a catalog, before validation.
#[derive(Debug, Clone)]
pub struct CatalogParts {
    pub shifts: Vec<ShiftSchedule>,
    pub rates: Vec<RateOption>,
    pub nominal_rate_id: u8,
    pub monthly_targets: [f64; MONTHS],
    pub buffer_capacities: [u32; 2],
    pub idle_weight: f64,
    pub calendar: Calendar,
}

impl ProblemCatalog {
    /// Builds a catalog with the standard option counts (15 shifts, 5 rates).
    pub fn new(parts: CatalogParts) -> Result<Self> {
        if parts.shifts.len() != REQUIRED_SHIFTS {
            return Err(Error::Validation(format!(
                "expected {REQUIRED_SHIFTS} shift schedules, found {}",
                parts.shifts.len()
            )));
        }
        if parts.rates.len() != REQUIRED_RATES {
            return Err(Error::Validation(format!(
                "expected {REQUIRED_RATES} rate options, found {}",
                parts.rates.len()
            )));
        }
        Self::custom(parts)
    }

    /// Builds a catalog with arbitrary (non-zero) option counts. Used for
    /// small instances where exhaustive oracles are affordable.
    pub fn custom(mut parts: CatalogParts) -> Result<Self> {
        if parts.shifts.is_empty() || parts.rates.is_empty() {
            return Err(Error::Validation(
                "catalog needs at least one shift and one rate".into(),
            ));
        }
        if parts.shifts.len() > u8::MAX as usize || parts.rates.len() > u8::MAX as usize {
            return Err(Error::Validation("too many options".into()));
        }
        parts.shifts.sort_by_key(|s| s.id);
        parts.rates.sort_by_key(|r| r.id);
        for (i, s) in parts.shifts.iter().enumerate() {
            if s.id as usize != i + 1 {
                return Err(Error::Validation(format!(
                    "shift ids must be exactly 1..{}, found id {}",
                    parts.shifts.len(),
                    s.id
                )));
            }
        }
        for (i, r) in parts.rates.iter().enumerate() {
            if r.id as usize != i + 1 {
                return Err(Error::Validation(format!(
                    "rate ids must be exactly 1..{}, found id {}",
                    parts.rates.len(),
                    r.id
                )));
            }
            if !(r.cars_per_hour.is_finite() && r.cars_per_hour > 0.0) {
                return Err(Error::Validation(format!(
                    "rate {} must be a positive number of cars per hour",
                    r.id
                )));
            }
        }
        if parts
            .rates
            .windows(2)
            .any(|w| w[1].cars_per_hour <= w[0].cars_per_hour)
        {
            return Err(Error::Validation(
                "rates must be strictly increasing by id".into(),
            ));
        }
        if parts.nominal_rate_id == 0 || parts.nominal_rate_id as usize > parts.rates.len() {
            return Err(Error::Validation(format!(
                "nominal_rate_id {} is not a rate id",
                parts.nominal_rate_id
            )));
        }
        if parts
            .monthly_targets
            .iter()
            .any(|t| !(t.is_finite() && *t > 0.0))
        {
            return Err(Error::Validation("monthly targets must be positive".into()));
        }
        if parts.buffer_capacities.contains(&0) {
            return Err(Error::Validation("buffer capacities must be positive".into()));
        }
        if !(parts.idle_weight.is_finite() && parts.idle_weight > 0.0) {
            return Err(Error::Validation("idle weight must be positive".into()));
        }
        parts.calendar.validate()?;

        let monthly_hours = parts
            .shifts
            .iter()
            .map(|s| monthly_hours_of(s, &parts.calendar))
            .collect();
        Ok(Self {
            shifts: parts.shifts,
            rates: parts.rates,
            nominal_rate_id: parts.nominal_rate_id,
            monthly_targets: parts.monthly_targets,
            buffer_capacities: parts.buffer_capacities,
            idle_weight: parts.idle_weight,
            calendar: parts.calendar,
            monthly_hours,
        })
    }

    pub fn into_parts(self) -> CatalogParts {
        CatalogParts {
            shifts: self.shifts,
            rates: self.rates,
            nominal_rate_id: self.nominal_rate_id,
            monthly_targets: self.monthly_targets,
            buffer_capacities: self.buffer_capacities,
            idle_weight: self.idle_weight,
            calendar: self.calendar,
        }
    }

    pub fn shifts(&self) -> &[ShiftSchedule] {
        &self.shifts
    }

    pub fn rates(&self) -> &[RateOption] {
        &self.rates
    }

    pub fn n_shifts(&self) -> usize {
        self.shifts.len()
    }

    pub fn n_rates(&self) -> usize {
        self.rates.len()
    }

    /// Shift by 1-based id.
    pub fn shift(&self, id: u8) -> &ShiftSchedule {
        &self.shifts[id as usize - 1]
    }

    /// Cars per hour of a 1-based rate id.
    pub fn rate(&self, id: u8) -> f64 {
        self.rates[id as usize - 1].cars_per_hour
    }

    pub fn nominal_rate_id(&self) -> u8 {
        self.nominal_rate_id
    }

    pub fn monthly_targets(&self) -> &[f64; MONTHS] {
        &self.monthly_targets
    }

    /// Sum of the monthly targets.
    pub fn annual_target(&self) -> f64 {
        self.monthly_targets.iter().sum()
    }

    pub fn buffer_capacities(&self) -> [u32; 2] {
        self.buffer_capacities
    }

    pub fn idle_weight(&self) -> f64 {
        self.idle_weight
    }

    pub fn calendar(&self) -> &Calendar {
        &self.calendar
    }

    /// Scheduled hours of a shift (1-based id) in each month.
    pub fn monthly_hours(&self, shift_id: u8) -> &[f64; MONTHS] {
        &self.monthly_hours[shift_id as usize - 1]
    }

    /// Canonical text form; `load_catalog` of this text returns an equal
    /// catalog.
    pub fn dump(&self) -> String {
        let file = CatalogFile {
            nominal_rate_id: self.nominal_rate_id,
            idle_weight: self.idle_weight,
            targets: self.monthly_targets.to_vec(),
            buffers: self.buffer_capacities.to_vec(),
            calendar: self.calendar.clone(),
            shifts: self
                .shifts
                .iter()
                .map(|s| ShiftEntry {
                    id: s.id,
                    pattern: Some(s.pattern_string()),
                    days: None,
                    blocks: None,
                })
                .collect(),
            rates: self.rates.clone(),
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# Production line catalog. Patterns: 336 half-hour slots, Monday 00:00 first."
        );
        out.push_str(&toml::to_string(&file).expect("catalog serializes"));
        out
    }
}

fn monthly_hours_of(shift: &ShiftSchedule, calendar: &Calendar) -> [f64; MONTHS] {
    let mut hours = [0.0; MONTHS];
    for (m, h) in hours.iter_mut().enumerate() {
        let start = calendar.month_start_day(m);
        let slots: u32 = (start..start + calendar.month_days[m])
            .map(|d| shift.day_slots[calendar.weekday(d)])
            .sum();
        *h = slots as f64 * HOURS_PER_SLOT;
    }
    hours
}

/// Hours a shift is scheduled in `month` (1..=12), tiling the weekly
/// pattern over the month's calendar days.
pub fn scheduled_hours(shift: &ShiftSchedule, month: usize, catalog: &ProblemCatalog) -> f64 {
    assert!((1..=MONTHS).contains(&month), "month {month} out of 1..12");
    monthly_hours_of(shift, &catalog.calendar)[month - 1]
}

/// The shipped catalog: 15 synthetic shift schedules, rates 40..60 cars/h
/// (nominal 50), 30000 cars/month, buffers (500, 700), W = 1000, calendar
/// year 2023.
pub fn default_catalog() -> ProblemCatalog {
    ProblemCatalog::new(default_parts(Calendar::year_2023())).expect("default catalog is valid")
}

/// The default catalog on the aligned 12 x 28-day calendar.
pub fn default_catalog_aligned() -> ProblemCatalog {
    ProblemCatalog::new(default_parts(Calendar::aligned())).expect("default catalog is valid")
}

fn default_parts(calendar: Calendar) -> CatalogParts {
    // shifts/day x block length; three 8.5 h blocks do not fit in a day.
    const BLOCKS: [(u32, f64); 8] = [
        (1, 7.0),
        (1, 8.0),
        (1, 8.5),
        (2, 7.0),
        (2, 8.0),
        (2, 8.5),
        (3, 7.0),
        (3, 8.0),
    ];
    let mut candidates: Vec<(f64, u8, u32, f64)> = Vec::new();
    for days in [5u8, 6] {
        for &(per_day, len) in &BLOCKS {
            // round-the-clock six-day operation is left out to keep 15 options
            if per_day == 3 && len == 8.0 && days == 6 {
                continue;
            }
            candidates.push((days as f64 * per_day as f64 * len, days, per_day, len));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));

    let shifts = candidates
        .iter()
        .enumerate()
        .map(|(i, &(_, days, per_day, len))| {
            let day_list: Vec<u8> = (0..days).collect();
            let blocks: Vec<(f64, f64)> = (0..per_day)
                .map(|k| {
                    let start = 6.0 + k as f64 * len;
                    (start % 24.0, (start + len) % 24.0)
                })
                .collect();
            ShiftSchedule::from_blocks(i as u8 + 1, &day_list, &blocks)
                .expect("default shift blocks are valid")
        })
        .collect();

    let rates = [40.0, 45.0, 50.0, 55.0, 60.0]
        .iter()
        .enumerate()
        .map(|(i, &c)| RateOption {
            id: i as u8 + 1,
            cars_per_hour: c,
        })
        .collect();

    CatalogParts {
        shifts,
        rates,
        nominal_rate_id: 3,
        monthly_targets: [30000.0; MONTHS],
        buffer_capacities: [500, 700],
        idle_weight: 1000.0,
        calendar,
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    nominal_rate_id: u8,
    idle_weight: f64,
    targets: Vec<f64>,
    buffers: Vec<u32>,
    calendar: Calendar,
    shifts: Vec<ShiftEntry>,
    rates: Vec<RateOption>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShiftEntry {
    id: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pattern: Option<String>,
    /// Shorthand: weekdays (0 = Monday) ...
    #[serde(skip_serializing_if = "Option::is_none")]
    days: Option<Vec<u8>>,
    /// ... and "HH:MM-HH:MM" blocks worked on each of them.
    #[serde(skip_serializing_if = "Option::is_none")]
    blocks: Option<Vec<String>>,
}

impl ShiftEntry {
    fn into_schedule(self) -> Result<ShiftSchedule> {
        let id = self.id;
        match (self.pattern, self.days, self.blocks) {
            (Some(p), None, None) => {
                let pattern = p
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        other => Err(Error::parse(
                            format!("shift {id} pattern"),
                            format!("unexpected character {other:?}, expected 0 or 1"),
                        )),
                    })
                    .collect::<Result<Vec<_>>>()?;
                ShiftSchedule::new(id, pattern)
            }
            (None, Some(days), Some(blocks)) => {
                let blocks = blocks
                    .iter()
                    .map(|b| parse_block(b).ok_or_else(|| {
                        Error::parse(format!("shift {id} blocks"), format!("bad block {b:?}, expected HH:MM-HH:MM"))
                    }))
                    .collect::<Result<Vec<_>>>()?;
                ShiftSchedule::from_blocks(id, &days, &blocks)
            }
            _ => Err(Error::parse(
                format!("shift {id}"),
                "give either `pattern` or both `days` and `blocks`",
            )),
        }
    }
}

fn parse_block(s: &str) -> Option<(f64, f64)> {
    let (a, b) = s.split_once('-')?;
    Some((parse_clock(a.trim())?, parse_clock(b.trim())?))
}

fn parse_clock(s: &str) -> Option<f64> {
    let (h, m) = s.split_once(':')?;
    let h: u32 = h.parse().ok()?;
    let m: u32 = m.parse().ok()?;
    if h > 24 || m >= 60 {
        return None;
    }
    Some(h as f64 + m as f64 / 60.0)
}

/// Parses catalog text (the format written by [`ProblemCatalog::dump`]).
pub fn parse_catalog(text: &str, context: &str) -> Result<ProblemCatalog> {
    let file: CatalogFile = toml::from_str(text).map_err(|e| Error::parse(context, e))?;
    let monthly_targets: [f64; MONTHS] = file.targets.try_into().map_err(|v: Vec<f64>| {
        Error::Validation(format!("expected {MONTHS} monthly targets, found {}", v.len()))
    })?;
    let buffer_capacities: [u32; 2] = file.buffers.try_into().map_err(|v: Vec<u32>| {
        Error::Validation(format!("expected 2 buffer capacities, found {}", v.len()))
    })?;
    let shifts = file
        .shifts
        .into_iter()
        .map(ShiftEntry::into_schedule)
        .collect::<Result<Vec<_>>>()?;
    ProblemCatalog::new(CatalogParts {
        shifts,
        rates: file.rates,
        nominal_rate_id: file.nominal_rate_id,
        monthly_targets,
        buffer_capacities,
        idle_weight: file.idle_weight,
        calendar: file.calendar,
    })
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<ProblemCatalog> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_catalog(&text, &path.display().to_string())
}
