//! Free-stage approximation: stages are estimated independently of each
//! other, which gives an upper bound on the production of any line state.
//! The estimates drive the margin-based space reduction, the production
//! guided orderings and the PGCO forest search.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{ProblemCatalog, MONTHS, SHOPS, STAGES};
use crate::error::{Error, Result};
use crate::evaluator::Evaluator;
use crate::simulator::{CostValue, LineConfig, ShopState};

/// Whether shop rates are pinned to the nominal option (`No`) or free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DevMode {
    No,
    Yes,
}

impl fmt::Display for DevMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DevMode::No => "noDev",
            DevMode::Yes => "yesDev",
        })
    }
}

impl FromStr for DevMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "no" | "nodev" => Ok(DevMode::No),
            "yes" | "yesdev" => Ok(DevMode::Yes),
            other => Err(Error::parse("dev mode", format!("unknown mode {other:?}"))),
        }
    }
}

/// State of the two shops of a stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StageState {
    pub shops: [ShopState; 2],
}

impl StageState {
    pub fn new(a: ShopState, b: ShopState) -> Self {
        Self { shops: [a, b] }
    }

    /// Cars per week with every scheduled hour worked.
    pub fn ideal_output(&self, catalog: &ProblemCatalog) -> f64 {
        self.shops
            .iter()
            .map(|s| catalog.shift(s.shift).weekly_hours() * catalog.rate(s.rate))
            .sum()
    }

    /// (shift1, shift2, rate1, rate2)
    pub fn tuple(&self) -> [u8; 4] {
        [
            self.shops[0].shift,
            self.shops[1].shift,
            self.shops[0].rate,
            self.shops[1].rate,
        ]
    }

    pub fn from_tuple(t: [u8; 4]) -> Self {
        Self::new(ShopState::new(t[0], t[2]), ShopState::new(t[1], t[3]))
    }
}

/// All stage states of a dev mode, sorted by ideal output.
#[derive(Debug, Clone)]
pub struct StageIndexer {
    dev_mode: DevMode,
    states: Vec<StageState>,
    lookup: HashMap<StageState, u32>,
}

pub fn build_indexer(catalog: &ProblemCatalog, dev_mode: DevMode) -> StageIndexer {
    let rates: Vec<u8> = match dev_mode {
        DevMode::No => vec![catalog.nominal_rate_id()],
        DevMode::Yes => (1..=catalog.n_rates() as u8).collect(),
    };
    let shifts = 1..=catalog.n_shifts() as u8;
    let mut keyed = Vec::with_capacity(shifts.len().pow(2) * rates.len().pow(2));
    // generated in (shift1, rate1, shift2, rate2) order so the stable sort
    // leaves ties in that order
    for s1 in shifts.clone() {
        for &r1 in &rates {
            for s2 in shifts.clone() {
                for &r2 in &rates {
                    let st = StageState::new(ShopState::new(s1, r1), ShopState::new(s2, r2));
                    keyed.push((st.ideal_output(catalog), st));
                }
            }
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let states: Vec<StageState> = keyed.into_iter().map(|(_, s)| s).collect();
    let lookup = states
        .iter()
        .enumerate()
        .map(|(i, s)| (*s, i as u32))
        .collect();
    StageIndexer {
        dev_mode,
        states,
        lookup,
    }
}

impl StageIndexer {
    pub fn dev_mode(&self) -> DevMode {
        self.dev_mode
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[StageState] {
        &self.states
    }

    pub fn state(&self, index: u32) -> StageState {
        self.states[index as usize]
    }

    pub fn index_of(&self, state: &StageState) -> Option<u32> {
        self.lookup.get(state).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageEstimate {
    pub monthly: [f64; MONTHS],
    pub annual: f64,
}

/// Free-stage production of one stage: scheduled hours times rate, summed
/// over the stage's two shops. The formula is the same for every stage.
pub fn estimate_production(
    catalog: &ProblemCatalog,
    stage: usize,
    state: &StageState,
) -> StageEstimate {
    debug_assert!(stage < STAGES);
    let mut monthly = [0.0; MONTHS];
    for shop in &state.shops {
        let hours = catalog.monthly_hours(shop.shift);
        let rate = catalog.rate(shop.rate);
        for (m, h) in monthly.iter_mut().zip(hours) {
            *m += h * rate;
        }
    }
    StageEstimate {
        monthly,
        annual: monthly.iter().sum(),
    }
}

/// Minimum over stages of the annual free-stage estimate: an upper bound on
/// what the simulated line can produce in a year.
pub fn line_estimate(catalog: &ProblemCatalog, config: &LineConfig) -> f64 {
    (0..STAGES)
        .map(|n| {
            let [a, b] = config.stage(n);
            estimate_production(catalog, n, &StageState::new(a, b)).annual
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllowedState {
    /// Position in the dev mode's [`StageIndexer`].
    pub index: u32,
    pub state: StageState,
    pub annual_estimate: f64,
}

/// Per-stage allowed states for a margin. A triple addresses one state per
/// stage by its position in the stage's list.
#[derive(Debug, Clone)]
pub struct ReducedSpace {
    margin: f64,
    dev_mode: DevMode,
    annual_target: f64,
    stages: [Vec<AllowedState>; STAGES],
    positions: [HashMap<StageState, u32>; STAGES],
}

impl ReducedSpace {
    /// Builds a space from explicit per-stage lists.
    pub fn from_lists(
        margin: f64,
        dev_mode: DevMode,
        annual_target: f64,
        stages: [Vec<AllowedState>; STAGES],
    ) -> Result<Self> {
        for (k, list) in stages.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::InfeasibleMargin {
                    stage: k + 1,
                    margin,
                });
            }
        }
        let positions = std::array::from_fn(|k| {
            stages[k]
                .iter()
                .enumerate()
                .map(|(i, a)| (a.state, i as u32))
                .collect()
        });
        Ok(Self {
            margin,
            dev_mode,
            annual_target,
            stages,
            positions,
        })
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn dev_mode(&self) -> DevMode {
        self.dev_mode
    }

    pub fn annual_target(&self) -> f64 {
        self.annual_target
    }

    pub fn stage(&self, k: usize) -> &[AllowedState] {
        &self.stages[k]
    }

    pub fn stage_sizes(&self) -> [usize; STAGES] {
        std::array::from_fn(|k| self.stages[k].len())
    }

    pub fn total_size(&self) -> u64 {
        self.stages.iter().map(|s| s.len() as u64).product()
    }

    pub fn config(&self, triple: [u32; STAGES]) -> LineConfig {
        let mut shops = [ShopState::new(1, 1); SHOPS];
        for k in 0..STAGES {
            let st = self.stages[k][triple[k] as usize].state;
            shops[2 * k] = st.shops[0];
            shops[2 * k + 1] = st.shops[1];
        }
        LineConfig::new(shops)
    }

    pub fn triple_of(&self, config: &LineConfig) -> Option<[u32; STAGES]> {
        let mut out = [0; STAGES];
        for (k, slot) in out.iter_mut().enumerate() {
            let [a, b] = config.stage(k);
            *slot = *self.positions[k].get(&StageState::new(a, b))?;
        }
        Some(out)
    }

    pub fn to_json(&self) -> String {
        let file = SpaceFile {
            margin: self.margin,
            dev_mode: self.dev_mode,
            annual_target: self.annual_target,
            total_size: self.total_size(),
            stages: self
                .stages
                .iter()
                .map(|l| l.iter().map(|a| a.state.tuple()).collect())
                .collect(),
        };
        serde_json::to_string(&file).expect("space serializes")
    }

    /// Reads the form written by [`ReducedSpace::to_json`], re-deriving
    /// indices and estimates from the catalog.
    pub fn from_json(catalog: &ProblemCatalog, text: &str) -> Result<Self> {
        let file: SpaceFile = serde_json::from_str(text)?;
        let indexer = build_indexer(catalog, file.dev_mode);
        let lists: Vec<Vec<AllowedState>> = file
            .stages
            .iter()
            .enumerate()
            .map(|(k, list)| {
                list.iter()
                    .map(|&t| {
                        let state = StageState::from_tuple(t);
                        let index = indexer.index_of(&state).ok_or_else(|| {
                            Error::Config(format!(
                                "stage {} state {t:?} is not in the {} state set",
                                k + 1,
                                file.dev_mode
                            ))
                        })?;
                        Ok(AllowedState {
                            index,
                            state,
                            annual_estimate: estimate_production(catalog, k, &state).annual,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let stages: [Vec<AllowedState>; STAGES] = lists
            .try_into()
            .map_err(|_| Error::Config("space file must list exactly 3 stages".into()))?;
        let space = Self::from_lists(file.margin, file.dev_mode, file.annual_target, stages)?;
        if space.total_size() != file.total_size {
            return Err(Error::Config(format!(
                "space file total_size {} does not match its lists ({})",
                file.total_size,
                space.total_size()
            )));
        }
        Ok(space)
    }
}

#[derive(Serialize, Deserialize)]
struct SpaceFile {
    margin: f64,
    dev_mode: DevMode,
    annual_target: f64,
    total_size: u64,
    /// Per stage, (shift1, shift2, rate1, rate2) tuples in indexer order.
    stages: Vec<Vec<[u8; 4]>>,
}

/// Margin at or above which no state is filtered out.
pub const UNREDUCED: f64 = 1.0;

/// Keeps the stage states whose annual estimate lies within `margin` of the
/// annual target. A margin of 1.0 or more keeps every state.
pub fn reduce_space(catalog: &ProblemCatalog, margin: f64, dev_mode: DevMode) -> Result<ReducedSpace> {
    let indexer = build_indexer(catalog, dev_mode);
    reduce_with_indexer(catalog, &indexer, margin)
}

pub fn reduce_with_indexer(
    catalog: &ProblemCatalog,
    indexer: &StageIndexer,
    margin: f64,
) -> Result<ReducedSpace> {
    if margin.is_nan() || margin <= 0.0 {
        return Err(Error::Config(format!("margin must be positive, got {margin}")));
    }
    let target = catalog.annual_target();
    let stages: [Vec<AllowedState>; STAGES] = std::array::from_fn(|k| {
        indexer
            .states()
            .iter()
            .enumerate()
            .filter_map(|(i, st)| {
                let annual = estimate_production(catalog, k, st).annual;
                let ratio = annual / target;
                let keep = margin >= UNREDUCED || (1.0 - margin <= ratio && ratio <= 1.0 + margin);
                keep.then_some(AllowedState {
                    index: i as u32,
                    state: *st,
                    annual_estimate: annual,
                })
            })
            .collect()
    });
    ReducedSpace::from_lists(margin, indexer.dev_mode(), target, stages)
}

/// Which estimate the third-stage ordering is keyed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PgKey {
    /// Stages 2 and 3 are both ordered by closeness to the stage-1 estimate.
    #[default]
    FirstStage,
    /// Stage 3 is ordered by closeness to the chosen stage-2 estimate.
    Chained,
}

/// Positions of `list` sorted by `|estimate - key|`, ties by position.
pub fn closeness_order(list: &[AllowedState], key: f64) -> Vec<u32> {
    let mut order: Vec<u32> = (0..list.len() as u32).collect();
    order.sort_by(|&a, &b| {
        let da = (list[a as usize].annual_estimate - key).abs();
        let db = (list[b as usize].annual_estimate - key).abs();
        da.total_cmp(&db).then(a.cmp(&b))
    });
    order
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgcoResult {
    pub best: LineConfig,
    pub triple: [u32; STAGES],
    pub cost: CostValue,
    pub explored: usize,
}

/// Forest search: `roots` stage-1 states closest to the target, `branches`
/// stage-2 states per root closest to the root's estimate, `branches`
/// stage-3 states per branch keyed per `key`; every leaf triple is
/// evaluated and the first minimum wins.
pub fn pgco_search<E: Evaluator + ?Sized>(
    space: &ReducedSpace,
    roots: usize,
    branches: usize,
    key: PgKey,
    evaluator: &E,
) -> Result<PgcoResult> {
    if roots == 0 || branches == 0 {
        return Err(Error::Config("PGCO needs at least one root and one branch".into()));
    }
    let root_order = closeness_order(space.stage(0), space.annual_target());
    let mut best: Option<PgcoResult> = None;
    let mut explored = 0;
    for &r in root_order.iter().take(roots) {
        let root_est = space.stage(0)[r as usize].annual_estimate;
        let second = closeness_order(space.stage(1), root_est);
        let first_keyed_third = closeness_order(space.stage(2), root_est);
        for &b in second.iter().take(branches) {
            let chained;
            let third = match key {
                PgKey::FirstStage => &first_keyed_third,
                PgKey::Chained => {
                    chained = closeness_order(space.stage(2), space.stage(1)[b as usize].annual_estimate);
                    &chained
                }
            };
            for &l in third.iter().take(branches) {
                let triple = [r, b, l];
                let config = space.config(triple);
                let cost = evaluator.evaluate(&config);
                explored += 1;
                if best.as_ref().is_none_or(|cur| cost.total < cur.cost.total) {
                    best = Some(PgcoResult {
                        best: config,
                        triple,
                        cost,
                        explored: 0,
                    });
                }
            }
        }
    }
    let mut best = best.expect("at least one triple evaluated");
    best.explored = explored;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::default_catalog;
    use crate::evaluator::SimEvaluator;

    #[test]
    fn indexer_sizes_and_order() {
        let c = default_catalog();
        let yes = build_indexer(&c, DevMode::Yes);
        let no = build_indexer(&c, DevMode::No);
        assert_eq!(yes.len(), 5625);
        assert_eq!(no.len(), 225);
        for ix in [&yes, &no] {
            let outs: Vec<f64> = ix.states().iter().map(|s| s.ideal_output(&c)).collect();
            assert!(outs.windows(2).all(|w| w[0] <= w[1]));
            for (i, s) in ix.states().iter().enumerate() {
                assert_eq!(ix.index_of(s), Some(i as u32));
            }
        }
        assert!(no.states().iter().all(|s| s.shops.iter().all(|p| p.rate == 3)));
    }

    #[test]
    fn estimate_examples() {
        let c = default_catalog();
        let st = StageState::new(ShopState::new(4, 3), ShopState::new(9, 1));
        let e = estimate_production(&c, 1, &st);
        for m in 0..MONTHS {
            let expect = c.monthly_hours(4)[m] * 50.0 + c.monthly_hours(9)[m] * 40.0;
            assert_eq!(e.monthly[m], expect);
        }
        assert_eq!(e.annual, e.monthly.iter().sum::<f64>());
        assert_eq!(estimate_production(&c, 0, &st), estimate_production(&c, 2, &st));
    }

    #[test]
    fn unreduced_sizes() {
        let c = default_catalog();
        assert_eq!(reduce_space(&c, 1.0, DevMode::No).unwrap().total_size(), 11_390_625);
        assert_eq!(
            reduce_space(&c, 1.0, DevMode::Yes).unwrap().total_size(),
            177_978_515_625
        );
    }

    #[test]
    fn reduction_respects_margin_and_order() {
        let c = default_catalog();
        let space = reduce_space(&c, 0.05, DevMode::Yes).unwrap();
        for k in 0..STAGES {
            let list = space.stage(k);
            assert!(list.windows(2).all(|w| w[0].index < w[1].index));
            for a in list {
                let ratio = a.annual_estimate / 360000.0;
                assert!((0.95..=1.05).contains(&ratio));
            }
        }
    }

    #[test]
    fn infeasible_margin_is_an_error() {
        let c = default_catalog();
        let err = reduce_space(&c, 1e-9, DevMode::No).unwrap_err();
        assert!(matches!(err, Error::InfeasibleMargin { stage: 1, .. }), "{err}");
        assert!(reduce_space(&c, 0.0, DevMode::No).is_err());
    }

    #[test]
    fn space_json_round_trip() {
        let c = default_catalog();
        let space = reduce_space(&c, 0.025, DevMode::Yes).unwrap();
        let back = ReducedSpace::from_json(&c, &space.to_json()).unwrap();
        assert_eq!(back.stage_sizes(), space.stage_sizes());
        for k in 0..STAGES {
            assert_eq!(back.stage(k), space.stage(k));
        }
        let triple = [1, 2, 0];
        assert_eq!(space.triple_of(&space.config(triple)), Some(triple));
    }

    #[test]
    fn pgco_single_leaf() {
        let c = default_catalog();
        let space = reduce_space(&c, 0.02, DevMode::No).unwrap();
        let r = pgco_search(&space, 1, 1, PgKey::FirstStage, &SimEvaluator::new(&c)).unwrap();
        assert_eq!(r.explored, 1);
        let root = closeness_order(space.stage(0), 360000.0)[0];
        assert_eq!(r.triple[0], root);
    }

    #[test]
    fn pgco_counts_leaves() {
        let c = default_catalog();
        let space = reduce_space(&c, 0.05, DevMode::No).unwrap();
        let eval = |_: &LineConfig| CostValue {
            total: 1.0,
            production_term: 1.0,
            idle_term: 0.0,
        };
        let r = pgco_search(&space, 3, 2, PgKey::Chained, &eval).unwrap();
        assert_eq!(r.explored, 3 * 2 * 2);
        // all equal: the first leaf wins
        let root = closeness_order(space.stage(0), 360000.0)[0];
        assert_eq!(r.triple[0], root);
    }
}
