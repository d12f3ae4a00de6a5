//! Posterior predictive epidemic curves.

use rand::Rng;
use rayon::prelude::*;

use crate::diagnostics::quantile_sorted;
use crate::error::{Error, Result};
use crate::model::{epidemic_curve, simulate_with_rng, InitialInfectives, ModelSpec};
use crate::num::Real;
use crate::population::{EventHistory, Population};
use crate::rng::{stream_rng, Stream};

/// Per-step quantiles of new infections across predictive replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveEnvelope {
    pub median: Vec<f64>,
    pub q025: Vec<f64>,
    pub q975: Vec<f64>,
    pub replicates: usize,
}

impl PredictiveEnvelope {
    pub fn len(&self) -> usize {
        self.median.len()
    }

    pub fn is_empty(&self) -> bool {
        self.median.is_empty()
    }

    /// Envelope of a set of equal-length curves.
    pub fn from_curves(curves: &[Vec<usize>]) -> Result<Self> {
        let Some(first) = curves.first() else {
            return Err(Error::input("no predictive curves"));
        };
        let len = first.len();
        if curves.iter().any(|c| c.len() != len) {
            return Err(Error::input("predictive curves differ in length"));
        }
        let mut env = PredictiveEnvelope {
            median: Vec::with_capacity(len),
            q025: Vec::with_capacity(len),
            q975: Vec::with_capacity(len),
            replicates: curves.len(),
        };
        let mut column = Vec::with_capacity(curves.len());
        for t in 0..len {
            column.clear();
            column.extend(curves.iter().map(|c| c[t] as f64));
            column.sort_by(|a, b| a.partial_cmp(b).unwrap());
            env.median.push(quantile_sorted(&column, 0.5));
            env.q025.push(quantile_sorted(&column, 0.025));
            env.q975.push(quantile_sorted(&column, 0.975));
        }
        Ok(env)
    }
}

/// Simulated curves for `replicates` parameter vectors drawn uniformly with
/// replacement from `draws`. Each replicate simulates from time 0 with the
/// observed initial infectives over the observed horizon, on its own random
/// stream of `seed`.
pub fn predictive_curves<F: Real>(
    draws: &[Vec<F>],
    observed: &EventHistory,
    population: &Population<F>,
    model: &ModelSpec<F>,
    replicates: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if draws.is_empty() {
        return Err(Error::input("no posterior draws to predict from"));
    }
    if replicates == 0 {
        return Err(Error::input("at least one predictive replicate is needed"));
    }
    if observed.len() != population.len() {
        return Err(Error::input("observed history and population differ in size"));
    }
    let initial = InitialInfectives::Ids(observed.initial_infected());
    let horizon = observed.horizon();
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, Stream::Replicate(r as u32));
            let theta = &draws[rng.random_range(0..draws.len())];
            let history = simulate_with_rng(population, model, theta, horizon, &initial, &mut rng)?;
            Ok(epidemic_curve(&history))
        })
        .collect()
}

pub fn predict<F: Real>(
    draws: &[Vec<F>],
    observed: &EventHistory,
    population: &Population<F>,
    model: &ModelSpec<F>,
    replicates: usize,
    seed: u64,
) -> Result<PredictiveEnvelope> {
    PredictiveEnvelope::from_curves(&predictive_curves(draws, observed, population, model, replicates, seed)?)
}

/// Fraction of steps at which `observed` lies inside the 95% band.
pub fn coverage(envelope: &PredictiveEnvelope, observed: &[usize]) -> Result<f64> {
    if envelope.len() != observed.len() {
        return Err(Error::input(format!(
            "envelope has {} steps, observed curve {}",
            envelope.len(),
            observed.len()
        )));
    }
    if observed.is_empty() {
        return Err(Error::input("empty epidemic curve"));
    }
    let inside = observed
        .iter()
        .enumerate()
        .filter(|&(t, &y)| envelope.q025[t] <= y as f64 && y as f64 <= envelope.q975[t])
        .count();
    Ok(inside as f64 / observed.len() as f64)
}
