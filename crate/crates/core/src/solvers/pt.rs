use rand::Rng;

use super::sa::sa_acceptance;
use super::{rng_for, Budgeted, RunOptions, Trace};
use crate::error::{Error, Result};
use crate::evaluator::Evaluator;
use crate::space::SearchSpace;

#[derive(Debug, Clone, PartialEq)]
pub struct PtParams {
    pub replicas: usize,
    pub updates_per_swap: usize,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for PtParams {
    fn default() -> Self {
        Self {
            replicas: 5,
            updates_per_swap: 4,
            beta_min: 0.1,
            beta_max: 10.0,
        }
    }
}

/// Inverse temperatures evenly spaced in log space, increasing.
pub fn pt_betas(params: &PtParams) -> Vec<f64> {
    let n = params.replicas;
    if n == 1 {
        return vec![params.beta_min];
    }
    let (lo, hi) = (params.beta_min.ln(), params.beta_max.ln());
    (0..n)
        .map(|r| (lo + (hi - lo) * r as f64 / (n - 1) as f64).exp())
        .collect()
}

/// min{1, exp((C_r - C_{r+1}) (beta_r - beta_{r+1}))}
pub fn pt_swap_probability(cost_r: f64, cost_next: f64, beta_r: f64, beta_next: f64) -> f64 {
    ((cost_r - cost_next) * (beta_r - beta_next)).exp().min(1.0)
}

/// Replica-exchange annealing: every replica takes `updates_per_swap`
/// Metropolis steps at its own temperature, then neighbouring replicas try
/// to swap states, lowest index first.
pub fn run_pt<S, E>(space: &S, params: &PtParams, opts: RunOptions, evaluator: &E) -> Result<Trace>
where
    S: SearchSpace + ?Sized,
    E: Evaluator + ?Sized,
{
    if params.replicas == 0 || opts.budget < params.replicas {
        return Err(Error::Config(format!(
            "PT budget {} is below the replica count {}",
            opts.budget, params.replicas
        )));
    }
    let betas = pt_betas(params);
    if betas.windows(2).any(|w| w[1] <= w[0]) && betas.len() > 1 {
        return Err(Error::Config("PT betas must be strictly increasing".into()));
    }
    let mut rng = rng_for(opts.seed);
    let mut run = Budgeted::new("pt", space, evaluator, opts);

    let mut states = Vec::with_capacity(params.replicas);
    let mut costs = Vec::with_capacity(params.replicas);
    for _ in 0..params.replicas {
        let p = space.random_point(&mut rng);
        let Some(c) = run.eval(&p) else {
            return Ok(run.finish());
        };
        states.push(p);
        costs.push(c);
    }

    'outer: while !run.done() {
        for r in 0..params.replicas {
            let temperature = 1.0 / betas[r];
            for _ in 0..params.updates_per_swap {
                let mut proposal = states[r].clone();
                let field = rng.random_range(0..space.n_fields());
                proposal[field] = rng.random_range(0..space.field_size(field));
                let Some(cost) = run.eval(&proposal) else {
                    break 'outer;
                };
                let p = sa_acceptance(costs[r], cost, temperature);
                if p >= 1.0 || rng.random::<f64>() < p {
                    states[r] = proposal;
                    costs[r] = cost;
                }
            }
        }
        for r in 0..params.replicas - 1 {
            let p = pt_swap_probability(costs[r], costs[r + 1], betas[r], betas[r + 1]);
            if p >= 1.0 || rng.random::<f64>() < p {
                states.swap(r, r + 1);
                costs.swap(r, r + 1);
            }
        }
    }
    Ok(run.finish())
}
