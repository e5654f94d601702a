use rand::Rng;

use super::{rng_for, Budgeted, RunOptions, Trace};
use crate::error::{Error, Result};
use crate::evaluator::Evaluator;
use crate::space::SearchSpace;

#[derive(Debug, Clone, PartialEq)]
pub struct SaParams {
    pub initial_temperature: f64,
    /// Temperature is divided by this after every iteration.
    pub cooling_factor: f64,
}

impl Default for SaParams {
    fn default() -> Self {
        Self {
            initial_temperature: 50.0,
            cooling_factor: 1.2,
        }
    }
}

/// min{1, exp((C_prev - C_new) / T)}
pub fn sa_acceptance(prev_cost: f64, new_cost: f64, temperature: f64) -> f64 {
    ((prev_cost - new_cost) / temperature).exp().min(1.0)
}

/// Single-site simulated annealing with geometric cooling.
pub fn run_sa<S, E>(space: &S, params: &SaParams, opts: RunOptions, evaluator: &E) -> Result<Trace>
where
    S: SearchSpace + ?Sized,
    E: Evaluator + ?Sized,
{
    if opts.budget == 0 {
        return Err(Error::Config("SA budget must be at least 1".into()));
    }
    if !(params.initial_temperature > 0.0 && params.cooling_factor > 1.0) {
        return Err(Error::Config(
            "SA needs a positive initial temperature and cooling factor > 1".into(),
        ));
    }
    let mut rng = rng_for(opts.seed);
    let mut run = Budgeted::new("sa", space, evaluator, opts);

    let mut current = space.random_point(&mut rng);
    let Some(mut current_cost) = run.eval(&current) else {
        return Ok(run.finish());
    };
    let mut temperature = params.initial_temperature;
    while !run.done() {
        let mut proposal = current.clone();
        let field = rng.random_range(0..run.space().n_fields());
        proposal[field] = rng.random_range(0..run.space().field_size(field));
        let Some(cost) = run.eval(&proposal) else {
            break;
        };
        let p = sa_acceptance(current_cost, cost, temperature);
        if p >= 1.0 || rng.random::<f64>() < p {
            current = proposal;
            current_cost = cost;
        }
        temperature /= params.cooling_factor;
    }
    Ok(run.finish())
}
