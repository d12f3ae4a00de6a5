//! Posterior summaries, Geweke and Gelman-Rubin diagnostics, and DIC.

use crate::error::{Error, Result};
use crate::mcmc::ChainOutput;
use crate::num::{mean, sample_variance, Real};

/// Type-7 quantile (linear interpolation between order statistics) of
/// already sorted data.
pub fn quantile_sorted<F: Real>(sorted: &[F], p: f64) -> F {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = F::of(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn quantile<F: Real>(xs: &[F], p: f64) -> Result<F> {
    if xs.is_empty() {
        return Err(Error::input("quantile of empty sample"));
    }
    let mut sorted = xs.to_vec();
    sort(&mut sorted)?;
    Ok(quantile_sorted(&sorted, p))
}

fn sort<F: Real>(xs: &mut [F]) -> Result<()> {
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::input("NaN in draws"));
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSummary<F> {
    pub mean: F,
    pub median: F,
    pub q025: F,
    pub q975: F,
}

impl<F: Real> ParamSummary<F> {
    pub fn covers(&self, x: F) -> bool {
        self.q025 <= x && x <= self.q975
    }
}

/// Summary of one column of draws.
pub fn summarize_column<F: Real>(xs: &[F]) -> Result<ParamSummary<F>> {
    if xs.is_empty() {
        return Err(Error::input("nothing to summarize: no draws"));
    }
    let mut sorted = xs.to_vec();
    sort(&mut sorted)?;
    Ok(ParamSummary {
        mean: mean(xs),
        median: quantile_sorted(&sorted, 0.5),
        q025: quantile_sorted(&sorted, 0.025),
        q975: quantile_sorted(&sorted, 0.975),
    })
}

/// Per-parameter summaries of a draw matrix (rows are draws).
pub fn summarize<F: Real>(draws: &[Vec<F>]) -> Result<Vec<ParamSummary<F>>> {
    let Some(first) = draws.first() else {
        return Err(Error::input("nothing to summarize: no draws"));
    };
    (0..first.len())
        .map(|k| summarize_column(&draws.iter().map(|r| r[k]).collect::<Vec<_>>()))
        .collect()
}

/// Draws of several chains stacked in chain order.
pub fn pooled_draws<F: Real>(chains: &[ChainOutput<F>]) -> Vec<Vec<F>> {
    chains.iter().flat_map(|c| c.draws.iter().cloned()).collect()
}

/// Variance of the mean of `xs` by non-overlapping batch means with
/// `floor(sqrt(n))` batches.
pub fn batch_means_variance<F: Real>(xs: &[F]) -> F {
    let n = xs.len();
    let batches = ((n as f64).sqrt().floor() as usize).max(2);
    let size = n / batches;
    if size == 0 {
        return sample_variance(xs) / F::count(n);
    }
    let means: Vec<F> = (0..batches).map(|b| mean(&xs[b * size..(b + 1) * size])).collect();
    sample_variance(&means) / F::count(batches)
}

/// Geweke z-score comparing the mean of the first `first` fraction with the
/// mean of the last `last` fraction of a chain.
pub fn geweke<F: Real>(xs: &[F], first: f64, last: f64) -> Result<F> {
    let n = xs.len();
    let na = (first * n as f64).floor() as usize;
    let nb = (last * n as f64).floor() as usize;
    if na < 20 || nb < 20 {
        return Err(Error::input(format!(
            "chain of {n} draws is too short for Geweke windows of {na} and {nb}; need 20 each"
        )));
    }
    if first + last > 1.0 {
        return Err(Error::input("Geweke windows overlap"));
    }
    let a = &xs[..na];
    let b = &xs[n - nb..];
    let diff = mean(a) - mean(b);
    let var = batch_means_variance(a) + batch_means_variance(b);
    if var == F::zero() {
        return Ok(if diff == F::zero() { F::zero() } else { diff.signum() * F::infinity() });
    }
    Ok(diff / var.sqrt())
}

/// Geweke z per parameter with the usual 10% / 50% windows.
pub fn geweke_chain<F: Real>(chain: &ChainOutput<F>) -> Result<Vec<F>> {
    (0..chain.dim()).map(|k| geweke(&chain.column(k), 0.1, 0.5)).collect()
}

/// Potential scale reduction factor of one parameter across chains.
pub fn psrf<F: Real>(chains: &[Vec<F>]) -> Result<F> {
    if chains.len() < 2 {
        return Err(Error::input("Gelman-Rubin needs at least 2 chains"));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::input("Gelman-Rubin chains differ in length"));
    }
    if n < 20 {
        return Err(Error::input(format!("Gelman-Rubin needs at least 20 draws per chain, got {n}")));
    }
    let means: Vec<F> = chains.iter().map(|c| mean(c)).collect();
    let nf = F::count(n);
    let b = nf * sample_variance(&means);
    let w = mean(&chains.iter().map(|c| sample_variance(c)).collect::<Vec<_>>());
    let v = (nf - F::one()) / nf * w + b / nf;
    if w == F::zero() {
        return Ok(if b == F::zero() { F::one() } else { F::infinity() });
    }
    Ok((v / w).sqrt())
}

/// PSRF per parameter.
pub fn gelman_rubin<F: Real>(chains: &[ChainOutput<F>]) -> Result<Vec<F>> {
    let Some(first) = chains.first() else {
        return Err(Error::input("Gelman-Rubin needs at least 2 chains"));
    };
    (0..first.dim())
        .map(|k| psrf(&chains.iter().map(|c| c.column(k)).collect::<Vec<_>>()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlugIn<F> {
    PosteriorMean(Vec<F>),
    /// The posterior mean fell outside the support; the highest-posterior
    /// draw was used instead.
    HighestPosteriorDraw(Vec<F>),
}

impl<F> PlugIn<F> {
    pub fn point(&self) -> &[F] {
        match self {
            PlugIn::PosteriorMean(p) | PlugIn::HighestPosteriorDraw(p) => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DicReport<F> {
    pub mean_deviance: F,
    pub deviance_at_plug_in: F,
    pub p_d: F,
    pub dic: F,
    pub plug_in: PlugIn<F>,
}

/// Deviance information criterion from posterior draws.
///
/// `log_likelihood` evaluates each draw; `log_posterior` (up to a constant)
/// checks the posterior mean for support and ranks draws for the fallback.
pub fn dic<F: Real>(
    draws: &[Vec<F>],
    log_posterior_of_draws: &[F],
    log_likelihood: impl Fn(&[F]) -> F,
    log_posterior: impl Fn(&[F]) -> F,
) -> Result<DicReport<F>> {
    if draws.is_empty() {
        return Err(Error::input("DIC needs at least one draw"));
    }
    if draws.len() != log_posterior_of_draws.len() {
        return Err(Error::input("draws and log posterior trace differ in length"));
    }
    let deviances: Vec<F> = draws.iter().map(|d| F::of(-2.0) * log_likelihood(d)).collect();
    if deviances.iter().any(|d| !d.is_finite()) {
        return Err(Error::evaluation("a posterior draw has non-finite deviance"));
    }
    let mean_deviance = mean(&deviances);
    let dim = draws[0].len();
    let theta_bar: Vec<F> = (0..dim).map(|k| mean(&draws.iter().map(|r| r[k]).collect::<Vec<_>>())).collect();
    let plug_in = if log_posterior(&theta_bar).is_finite() {
        PlugIn::PosteriorMean(theta_bar)
    } else {
        let best = (0..draws.len())
            .max_by(|&a, &b| log_posterior_of_draws[a].partial_cmp(&log_posterior_of_draws[b]).unwrap())
            .unwrap();
        PlugIn::HighestPosteriorDraw(draws[best].clone())
    };
    let deviance_at_plug_in = F::of(-2.0) * log_likelihood(plug_in.point());
    if !deviance_at_plug_in.is_finite() {
        return Err(Error::evaluation("deviance at the plug-in point is not finite"));
    }
    let p_d = mean_deviance - deviance_at_plug_in;
    Ok(DicReport { mean_deviance, deviance_at_plug_in, p_d, dic: mean_deviance + p_d, plug_in })
}
