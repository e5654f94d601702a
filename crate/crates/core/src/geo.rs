//! Generator-enhanced optimization: a conventional run's first evaluations
//! seed an MPS Born machine, which is retrained and sampled in rounds to
//! propose the remaining candidates.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{BitString, Codec};
use crate::error::{Error, Result};
use crate::evaluator::Evaluator;
use crate::mpsgen::{MpsModel, TrainParams, WeightedDataset};
use crate::solvers::Trace;
use crate::space::SearchSpace;

/// Smallest temperature used by [`reweight`].
pub const TEMPERATURE_FLOOR: f64 = 1e-9;

/// Spaces up to this size are enumerated when falling back to unseen states.
const ENUMERATION_LIMIT: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// Highest model probability first.
    #[default]
    Probability,
    Random,
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selection::Probability => "probability",
            Selection::Random => "random",
        })
    }
}

impl FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "probability" => Ok(Selection::Probability),
            "random" => Ok(Selection::Random),
            other => Err(Error::parse("selection", format!("unknown rule {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoParams {
    pub seed_evals: usize,
    pub total_budget: usize,
    pub batch_size: usize,
    /// Samples drawn per candidate still needed.
    pub oversample_factor: usize,
    /// Sampling rounds before topping up with uniform unseen states.
    pub resample_rounds: usize,
    pub train: TrainParams,
    /// Keep training the previous model instead of starting fresh.
    pub warm_start: bool,
    pub selection: Selection,
}

impl Default for GeoParams {
    fn default() -> Self {
        Self {
            seed_evals: 100,
            total_budget: 240,
            batch_size: 10,
            oversample_factor: 20,
            resample_rounds: 3,
            train: TrainParams::default(),
            warm_start: false,
            selection: Selection::Probability,
        }
    }
}

impl GeoParams {
    pub fn validate(&self) -> Result<()> {
        if self.seed_evals == 0 || self.seed_evals > self.total_budget {
            return Err(Error::Config(format!(
                "seed evaluations ({}) must be in 1..={}",
                self.seed_evals, self.total_budget
            )));
        }
        if self.batch_size == 0 || self.oversample_factor == 0 || self.resample_rounds == 0 {
            return Err(Error::Config(
                "batch size, oversample factor and resample rounds must be positive".into(),
            ));
        }
        if self.train.max_bond == 0 {
            return Err(Error::Config("max bond dimension must be at least 1".into()));
        }
        Ok(())
    }
}

/// `w_i ∝ exp(-(C_i - C_min) / T)` with `T` the population standard
/// deviation of `costs` (floored at [`TEMPERATURE_FLOOR`]), normalized.
pub fn reweight(costs: &[f64]) -> Vec<f64> {
    if costs.is_empty() {
        return Vec::new();
    }
    let n = costs.len() as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
    reweight_with_temperature(costs, var.sqrt())
}

pub fn reweight_with_temperature(costs: &[f64], temperature: f64) -> Vec<f64> {
    let t = temperature.max(TEMPERATURE_FLOOR);
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = costs.iter().map(|c| (-(c - min) / t).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRecord {
    pub bits: BitString,
    pub point: Vec<u32>,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BoostStats {
    pub iterations: usize,
    pub samples_drawn: usize,
    pub pruned_seen: usize,
    pub pruned_invalid: usize,
    pub model_evals: usize,
    pub fallback_evals: usize,
    /// Final training loss of each iteration.
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BoostOutcome {
    pub trace: Trace,
    pub seed_set: Vec<SeedRecord>,
    pub stats: BoostStats,
}

/// Continues a conventional run from its first `seed_evals` evaluations.
///
/// The returned trace starts with that prefix unchanged; every later entry
/// is a new state proposed by the model (or, when the model only proposes
/// seen or invalid states, a uniformly drawn unseen one). Only those later
/// entries call `evaluator`.
pub fn boost<S, E>(
    prefix: &Trace,
    codec: &dyn Codec,
    space: &S,
    params: &GeoParams,
    evaluator: &E,
    seed: u64,
) -> Result<BoostOutcome>
where
    S: SearchSpace + ?Sized,
    E: Evaluator + ?Sized,
{
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = Trace::new(
        format!("{}+geo", prefix.solver),
        seed,
        prefix.formulation.clone(),
        prefix.space.clone(),
    );
    let mut seeds: Vec<SeedRecord> = Vec::new();
    let mut seen: HashSet<BitString> = HashSet::new();
    let total = space.total_size();

    let used = prefix.len().min(params.seed_evals);
    if used < params.seed_evals && (used as u64) < total {
        return Err(Error::Config(format!(
            "prefix has {} evaluations, {} required",
            prefix.len(),
            params.seed_evals
        )));
    }
    for e in &prefix.entries[..used] {
        if !space.contains(&e.point) {
            return Err(Error::Config("prefix point lies outside the space".into()));
        }
        let bits = codec
            .try_encode(&e.point)
            .ok()
            .filter(|b| b.len() == codec.n_bits())
            .filter(|b| codec.decode(b).is_ok_and(|p| p == e.point))
            .ok_or_else(|| Error::Config("encoding does not match the space".into()))?;
        trace.push(e.point.clone(), e.config, e.cost);
        if seen.insert(bits.clone()) {
            seeds.push(SeedRecord {
                bits,
                point: e.point.clone(),
                cost: e.cost,
            });
        }
    }

    let mut stats = BoostStats::default();
    let mut model: Option<MpsModel> = None;
    while trace.len() < params.total_budget && (seen.len() as u64) < total {
        let need = params.batch_size.min(params.total_budget - trace.len());
        let costs: Vec<f64> = seeds.iter().map(|r| r.cost).collect();
        let data = WeightedDataset::new(
            seeds
                .iter()
                .zip(reweight(&costs))
                .map(|(r, w)| (r.bits.clone(), w))
                .collect(),
        )?;
        let mut m = match model.take() {
            Some(m) if params.warm_start => m,
            _ => MpsModel::random(codec.n_bits(), &params.train, &mut rng)?,
        };
        let report = m.train(&data, &params.train)?;
        stats.losses.push(*report.loss_history.last().expect("loss history"));
        stats.iterations += 1;

        let mut pool: Vec<(BitString, Vec<u32>, f64)> = Vec::new();
        let mut in_pool: HashSet<BitString> = HashSet::new();
        for _ in 0..params.resample_rounds {
            let draws = m.sample(need * params.oversample_factor, &mut rng);
            stats.samples_drawn += draws.len();
            for bits in draws {
                if seen.contains(&bits) {
                    stats.pruned_seen += 1;
                    continue;
                }
                if in_pool.contains(&bits) {
                    continue;
                }
                let point = match codec.decode(&bits) {
                    Ok(p) if space.contains(&p) => p,
                    _ => {
                        stats.pruned_invalid += 1;
                        continue;
                    }
                };
                let p = m.probability(&bits)?;
                in_pool.insert(bits.clone());
                pool.push((bits, point, p));
            }
            if pool.len() >= need {
                break;
            }
        }
        match params.selection {
            Selection::Probability => {
                pool.sort_by(|a, b| b.2.total_cmp(&a.2));
            }
            Selection::Random => pool.shuffle(&mut rng),
        }
        pool.truncate(need);
        let mut batch: Vec<(BitString, Vec<u32>)> =
            pool.into_iter().map(|(b, p, _)| (b, p)).collect();
        stats.model_evals += batch.len();
        if batch.len() < need {
            let extra = unseen_uniform(
                space,
                codec,
                &seen,
                &batch,
                need - batch.len(),
                &mut rng,
            );
            stats.fallback_evals += extra.len();
            batch.extend(extra);
        }
        if batch.is_empty() {
            break;
        }
        for (bits, point) in batch {
            let config = space.config(&point);
            let cost = evaluator.evaluate(&config).total;
            trace.push(point.clone(), config, cost);
            seen.insert(bits.clone());
            seeds.push(SeedRecord { bits, point, cost });
        }
        if params.warm_start {
            model = Some(m);
        }
    }
    Ok(BoostOutcome {
        trace,
        seed_set: seeds,
        stats,
    })
}

/// Up to `count` distinct states drawn uniformly from those neither seen nor
/// already chosen.
fn unseen_uniform<S: SearchSpace + ?Sized>(
    space: &S,
    codec: &dyn Codec,
    seen: &HashSet<BitString>,
    chosen: &[(BitString, Vec<u32>)],
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(BitString, Vec<u32>)> {
    let taken: HashSet<&BitString> = chosen.iter().map(|(b, _)| b).collect();
    let free = |b: &BitString| !seen.contains(b) && !taken.contains(b);
    let total = space.total_size();
    let mut out: Vec<(BitString, Vec<u32>)> = Vec::new();
    if total <= ENUMERATION_LIMIT {
        let mut unseen: Vec<(BitString, Vec<u32>)> = (0..total)
            .map(|flat| space.point_at(flat))
            .map(|p| (codec.encode(&p), p))
            .filter(|(b, _)| free(b))
            .collect();
        let (picked, _) = unseen.partial_shuffle(rng, count);
        out.extend(picked.iter().cloned());
        return out;
    }
    let mut picked: HashSet<BitString> = HashSet::new();
    while out.len() < count {
        let p = space.random_point(rng);
        let b = codec.encode(&p);
        if free(&b) && picked.insert(b.clone()) {
            out.push((b, p));
        }
    }
    out
}
