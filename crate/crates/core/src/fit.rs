//! Model fitting: pilot run, proposal blocking and multiple chains.

use crate::diagnostics::{gelman_rubin, geweke_chain, pooled_draws, summarize, ParamSummary};
use crate::error::{Error, Result};
use crate::likelihood::Posterior;
use crate::mcmc::{correlation, pilot_covariance, run_chain, run_multichain, ChainOutput, ChainSettings, Init, ProposalPlan};
use crate::num::Real;
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings<F> {
    pub chain: ChainSettings,
    pub chains: usize,
    pub seed: u64,
    /// Single-parameter pilot used to tune steps and, for linear kernels,
    /// estimate (alpha_l, beta_l) covariances. `None` skips it.
    pub pilot: Option<ChainSettings>,
    /// Pair a linear piece's parameters when the pilot correlation exceeds this.
    pub pair_threshold: f64,
    pub pair_scale: f64,
    /// Starting point for every chain; `None` draws each from the prior.
    pub init: Option<Vec<F>>,
    /// Initial proposal steps; `None` derives them from the priors.
    pub steps: Option<Vec<F>>,
}

impl<F: Real> Default for FitSettings<F> {
    fn default() -> Self {
        FitSettings {
            chain: ChainSettings::default(),
            chains: 3,
            seed: 1,
            pilot: Some(ChainSettings { iterations: 6_000, burn_in: 3_000, thin: 2, ..ChainSettings::default() }),
            pair_threshold: 0.5,
            pair_scale: 2.38 * 2.38 / 2.0,
            init: None,
            steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedBlock<F> {
    pub indices: (usize, usize),
    pub pilot_correlation: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutput<F> {
    pub names: Vec<String>,
    pub chains: Vec<ChainOutput<F>>,
    pub pilot: Option<ChainOutput<F>>,
    /// Plan the main chains started from.
    pub plan: ProposalPlan<F>,
    pub paired: Vec<PairedBlock<F>>,
}

impl<F: Real> FitOutput<F> {
    pub fn pooled(&self) -> Vec<Vec<F>> {
        pooled_draws(&self.chains)
    }

    pub fn pooled_log_posterior(&self) -> Vec<F> {
        self.chains.iter().flat_map(|c| c.log_density.iter().copied()).collect()
    }

    pub fn summary(&self) -> Result<Vec<ParamSummary<F>>> {
        summarize(&self.pooled())
    }
}

fn initial_plan<F: Real>(posterior: &Posterior<F>, steps: Option<&[F]>) -> Result<ProposalPlan<F>> {
    let plan = match steps {
        Some(s) => ProposalPlan::singles(s),
        None => ProposalPlan::singles(&posterior.priors().priors.iter().map(|p| p.initial_step()).collect::<Vec<_>>()),
    };
    plan.check(posterior.names().len())?;
    Ok(plan)
}

fn init_for<F: Real>(settings: &FitSettings<F>) -> Init<F> {
    match &settings.init {
        Some(theta) => Init::Fixed(theta.clone()),
        None => Init::Random,
    }
}

pub fn fit<F: Real>(posterior: &Posterior<F>, settings: &FitSettings<F>) -> Result<FitOutput<F>> {
    if settings.chains == 0 {
        return Err(Error::input("at least one chain is needed"));
    }
    if settings.chain.iterations <= settings.chain.burn_in {
        return Err(Error::input("nothing to summarize: no iterations after burn-in"));
    }
    let mut plan = initial_plan(posterior, settings.steps.as_deref())?;
    let mut paired = Vec::new();
    let mut pilot_out = None;
    if let Some(pilot) = &settings.pilot {
        let out = run_chain(posterior, &init_for(settings), &plan, pilot, settings.seed, Stream::Pilot(0))?;
        // start the main chains from the pilot's tuned steps
        plan = out.plan.clone();
        for pair in posterior.layout().linear_pairs() {
            let r = correlation(&out, pair);
            if r.abs() > F::of(settings.pair_threshold) {
                let cov = pilot_covariance(&out, pair, F::of(settings.pair_scale))?;
                plan.pair_up(pair, cov, F::one());
                paired.push(PairedBlock { indices: pair, pilot_correlation: r });
            }
        }
        pilot_out = Some(out);
    }
    let inits = vec![init_for(settings); settings.chains];
    let chains = run_multichain(posterior, &inits, &plan, &settings.chain, settings.seed)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(FitOutput { names: posterior.names().to_vec(), chains, pilot: pilot_out, plan, paired })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Convergence<F> {
    /// Geweke z per chain, per parameter.
    pub geweke: Vec<Vec<F>>,
    /// PSRF per parameter; `None` with a single chain.
    pub psrf: Option<Vec<F>>,
    /// Parameters failing both checks (any chain's |z| >= 1.96 and PSRF >= 1.1).
    pub suspect: Vec<usize>,
}

impl<F: Real> Convergence<F> {
    pub fn ok(&self) -> bool {
        self.psrf.is_some() && self.suspect.is_empty()
    }
}

/// Convergence verdict. A single chain can never pass: without PSRF a
/// Geweke failure cannot be cross-checked.
pub fn convergence<F: Real>(chains: &[ChainOutput<F>]) -> Result<Convergence<F>> {
    let geweke = chains.iter().map(geweke_chain).collect::<Result<Vec<_>>>()?;
    let psrf = if chains.len() >= 2 { Some(gelman_rubin(chains)?) } else { None };
    let dim = chains.first().map_or(0, |c| c.dim());
    let suspect = (0..dim)
        .filter(|&k| {
            let z_fail = geweke.iter().any(|z| !(z[k].abs() < F::of(1.96)));
            let r_fail = psrf.as_ref().is_none_or(|r| !(r[k] < F::of(1.1)));
            z_fail && r_fail
        })
        .collect();
    Ok(Convergence { geweke, psrf, suspect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::likelihood::LikelihoodData;
    use crate::model::{simulate, ModelSpec, SimulationConfig};
    use crate::population::Population;
    use crate::prior::PriorSpec;
    use crate::rng::stream_rng;

    fn posterior(spec: KernelSpec<f64>, theta: &[f64], seed: u64) -> Posterior<f64> {
        let pop = Population::uniform_square(120, 10.0, &mut stream_rng(seed, Stream::Population)).unwrap();
        let model = ModelSpec::si(spec);
        let mut cfg = SimulationConfig::new(15, seed);
        cfg.min_final_size = 10;
        let history = simulate(&pop, &model, theta, &cfg).unwrap();
        let data = LikelihoodData::new(&history, &pop, &model).unwrap();
        let priors = PriorSpec::vague(&model.layout(), &[]).unwrap();
        Posterior::new(data, priors).unwrap()
    }

    fn short() -> FitSettings<f64> {
        FitSettings {
            chain: ChainSettings { iterations: 3_000, burn_in: 1_000, thin: 2, ..Default::default() },
            chains: 2,
            seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn fit_is_reproducible() {
        let post = posterior(KernelSpec::piecewise_constant(vec![2.0]), &[0.1, 0.004], 2);
        let a = fit(&post, &short()).unwrap();
        let b = fit(&post, &short()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.chains.len(), 2);
        assert_eq!(a.pooled().len(), 2_000);
        assert!(a.paired.is_empty());
        for c in &a.chains {
            assert!(c.log_density.iter().all(|l| l.is_finite()));
        }
    }

    #[test]
    fn no_kept_iterations_is_an_error() {
        let post = posterior(KernelSpec::piecewise_constant(vec![2.0]), &[0.1, 0.004], 2);
        let mut s = short();
        s.chain.iterations = 0;
        s.chain.burn_in = 0;
        assert!(fit(&post, &s).is_err());
    }

    #[test]
    fn linear_pieces_get_paired_when_correlated() {
        let spec = KernelSpec::piecewise_linear(vec![3.0]);
        let post = posterior(spec, &[0.3, -0.08, 0.01, -0.0005], 4);
        let mut s = short();
        s.pair_threshold = 0.0;
        let out = fit(&post, &s).unwrap();
        assert_eq!(out.paired.len(), 2);
        out.plan.check(4).unwrap();
    }

    #[test]
    fn single_chain_never_passes() {
        let post = posterior(KernelSpec::piecewise_constant(vec![2.0]), &[0.1, 0.004], 2);
        let mut s = short();
        s.chains = 1;
        let out = fit(&post, &s).unwrap();
        let c = convergence(&out.chains).unwrap();
        assert!(c.psrf.is_none() && !c.ok());
    }
}
