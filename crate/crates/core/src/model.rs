//! Infection probabilities and forward simulation of discrete-time ILMs.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::{validate, Kernel, KernelFamily, KernelSpec};
use crate::num::Real;
use crate::params::ParamLayout;
use crate::rng::{stream_rng, Stream};
use crate::population::{Compartment, CompartmentIndex, EventHistory, EventRecord, Framework, Population, Time};

/// Model structure: kernel, compartments and fixed sojourn times.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec<F> {
    pub kernel: KernelSpec<F>,
    pub framework: Framework,
    /// Latent period `mu_E`, SEIR only.
    pub latent_period: Option<Time>,
    /// Default infectious period `mu_I`; observed removal times take precedence.
    pub infectious_period: Option<Time>,
    pub sparks: bool,
}

impl<F: Real> ModelSpec<F> {
    /// SI model with the given kernel and no sparks.
    pub fn si(kernel: KernelSpec<F>) -> Self {
        ModelSpec { kernel, framework: Framework::SI, latent_period: None, infectious_period: None, sparks: false }
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(&self.kernel, self.sparks)
    }

    pub fn kernel(&self, theta: &[F]) -> Kernel<F> {
        self.layout().kernel(&self.kernel, theta)
    }

    pub fn check(&self) -> Result<()> {
        if self.framework == Framework::SEIR && !self.latent_period.is_some_and(|m| m >= 1) {
            return Err(Error::input("SEIR models need a latent period of at least 1"));
        }
        if self.infectious_period == Some(0) {
            return Err(Error::input("the infectious period must be at least 1"));
        }
        if self.kernel.family == KernelFamily::PowerLaw && !self.kernel.change_points.is_empty() {
            return Err(Error::input("a power-law kernel has no change points"));
        }
        Ok(())
    }

    /// Rejects parameter vectors that break the kernel's structural or sign
    /// constraints, or a negative sparks rate.
    pub fn check_params(&self, theta: &[F]) -> Result<()> {
        let layout = self.layout();
        if theta.len() != layout.len() {
            return Err(Error::input(format!(
                "expected {} parameters ({}), got {}",
                layout.len(),
                layout.names().join(", "),
                theta.len()
            )));
        }
        if let Err(violations) = validate(&self.kernel, &layout.kernel(&self.kernel, theta)) {
            let msg: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::input(msg.join("; ")));
        }
        if layout.sparks(theta) < F::zero() {
            return Err(Error::input("epsilon must be non-negative"));
        }
        Ok(())
    }
}

/// `1 - exp(-(sum_{j in I(t)} k(i, j) + epsilon))` for susceptible `i` at time `t`.
pub fn infection_probability<F: Real>(
    i: usize,
    t: Time,
    state: &CompartmentIndex,
    population: &Population<F>,
    kernel: &Kernel<F>,
    sparks: F,
) -> Result<F> {
    if t > state.horizon() {
        return Err(Error::input(format!("time {t} is outside the history")));
    }
    if state.state(i, t) != Compartment::Susceptible {
        return Err(Error::contract(format!("individual {i} is not susceptible at time {t}")));
    }
    let row = population.row(i);
    let mut pressure = sparks;
    for &j in state.infectious_at(t) {
        pressure = pressure + kernel.try_rate(row[j])?;
    }
    Ok(-(-pressure).exp_m1())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitialInfectives {
    /// This many individuals chosen uniformly at random.
    Count(usize),
    Ids(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulationConfig {
    pub horizon: Time,
    pub initial: InitialInfectives,
    pub seed: u64,
    /// Re-draw epidemics whose final size is below this (0 disables).
    pub min_final_size: usize,
    pub max_redraws: usize,
}

impl SimulationConfig {
    pub fn new(horizon: Time, seed: u64) -> Self {
        SimulationConfig { horizon, initial: InitialInfectives::Count(1), seed, min_final_size: 0, max_redraws: 100 }
    }
}

/// Forward-simulates an epidemic on the simulation stream of `config.seed`.
pub fn simulate<F: Real>(
    population: &Population<F>,
    model: &ModelSpec<F>,
    theta: &[F],
    config: &SimulationConfig,
) -> Result<EventHistory> {
    let mut rng = stream_rng(config.seed, Stream::Simulation);
    let mut attempt = 0;
    loop {
        let history = simulate_with_rng(population, model, theta, config.horizon, &config.initial, &mut rng)?;
        if history.final_size() >= config.min_final_size {
            return Ok(history);
        }
        attempt += 1;
        if attempt > config.max_redraws {
            return Err(Error::evaluation(format!(
                "no epidemic reached {} infections in {} draws",
                config.min_final_size, attempt
            )));
        }
    }
}

/// One forward simulation.
///
/// Each step, every susceptible is infected independently with
/// [`infection_probability`]; a susceptible infected during step `t` joins its
/// next compartment at `t + 1`. Later transitions follow the fixed sojourns.
/// Event times past the horizon are not recorded.
pub fn simulate_with_rng<F: Real, R: Rng + ?Sized>(
    population: &Population<F>,
    model: &ModelSpec<F>,
    theta: &[F],
    horizon: Time,
    initial: &InitialInfectives,
    rng: &mut R,
) -> Result<EventHistory> {
    model.check()?;
    model.check_params(theta)?;
    let n = population.len();
    if model.framework.has_removed() && model.infectious_period.is_none() {
        return Err(Error::input("SIR/SEIR simulation needs an infectious period"));
    }
    let kernel = model.kernel(theta);
    if kernel.family() == KernelFamily::PowerLaw && !population.coincident_pairs().is_empty() {
        return Err(Error::evaluation("power-law kernel with coincident individuals"));
    }
    let sparks = model.layout().sparks(theta);

    let seeds = match initial {
        InitialInfectives::Count(0) => return Err(Error::input("at least one initial infective is needed")),
        InitialInfectives::Count(k) if *k > n => {
            return Err(Error::input("more initial infectives than individuals"))
        }
        InitialInfectives::Count(k) => sample(rng, n, *k).into_vec(),
        InitialInfectives::Ids(ids) => {
            if ids.is_empty() {
                return Err(Error::input("at least one initial infective is needed"));
            }
            if let Some(&bad) = ids.iter().find(|&&i| i >= n) {
                return Err(Error::input(format!("initial infective {bad} is not in the population")));
            }
            ids.clone()
        }
    };

    let within = |t: Time| if t <= horizon { Some(t) } else { None };
    let mu_e = model.latent_period.unwrap_or(0);
    let mu_i = model.infectious_period.unwrap_or(0);
    let mut records = vec![EventRecord::default(); n];
    for &s in &seeds {
        records[s].infectious = Some(0);
        if model.framework.has_removed() {
            records[s].removed = within(mu_i);
        }
    }

    let mut susceptible = vec![true; n];
    for &s in &seeds {
        susceptible[s] = false;
    }
    let mut infectious = Vec::with_capacity(n);
    let mut newly = Vec::new();
    for t in 0..horizon {
        infectious.clear();
        infectious.extend((0..n).filter(|&j| {
            let r = &records[j];
            r.infectious.is_some_and(|s| s <= t) && !r.removed.is_some_and(|e| e <= t)
        }));
        if infectious.is_empty() && sparks == F::zero() {
            continue;
        }
        newly.clear();
        for i in 0..n {
            if !susceptible[i] {
                continue;
            }
            let row = population.row(i);
            let pressure = infectious.iter().fold(sparks, |acc, &j| acc + kernel.rate(row[j]));
            let p = -(-pressure).exp_m1();
            let u: f64 = rng.random();
            if F::of(u) < p {
                newly.push(i);
            }
        }
        let at = t + 1;
        for &i in &newly {
            susceptible[i] = false;
            let r = &mut records[i];
            match model.framework {
                Framework::SI => r.infectious = Some(at),
                Framework::SIR => {
                    r.infectious = Some(at);
                    r.removed = within(at + mu_i);
                }
                Framework::SEIR => {
                    r.exposed = Some(at);
                    r.infectious = within(at + mu_e);
                    r.removed = r.infectious.and_then(|s| within(s + mu_i));
                }
            }
        }
    }
    EventHistory::new(model.framework, records, horizon)
}

/// New infections per step: entry `t` counts individuals newly infected
/// (newly exposed under SEIR) at `t + 1`. Length equals the horizon; steps
/// before the history's start are zero.
pub fn epidemic_curve(history: &EventHistory) -> Vec<usize> {
    let horizon = history.horizon();
    let mut curve = vec![0usize; horizon as usize];
    for i in 0..history.len() {
        if let Some(t) = history.infection_time(i) {
            if t > history.start() && t <= horizon {
                curve[(t - 1) as usize] += 1;
            }
        }
    }
    curve
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line_population(xs: &[f64]) -> Population<f64> {
        Population::new(xs.iter().map(|&x| (x, 0.0)).collect()).unwrap()
    }

    fn si_history(infectious: &[Option<Time>], horizon: Time) -> EventHistory {
        let records = infectious
            .iter()
            .map(|&t| EventRecord { infectious: t, ..Default::default() })
            .collect();
        EventHistory::new(Framework::SI, records, horizon).unwrap()
    }

    #[test]
    fn probability_with_one_neighbour() {
        let pop = line_population(&[0.0, 1.0]);
        let h = si_history(&[None, Some(0)], 5);
        let idx = CompartmentIndex::new(&h);
        let k = Kernel::PiecewiseConstant { levels: vec![0.10, 0.0004], change_points: vec![2.0] };
        let p = infection_probability(0, 0, &idx, &pop, &k, 0.0).unwrap();
        assert_abs_diff_eq!(p, 0.095_162_581_964_040_48, epsilon = 1e-15);
    }

    #[test]
    fn probability_power_law() {
        let pop = line_population(&[0.0, 2.0]);
        let h = si_history(&[None, Some(0)], 5);
        let idx = CompartmentIndex::new(&h);
        let k = Kernel::PowerLaw { alpha: 0.30, beta: 2.0 };
        let p = infection_probability(0, 0, &idx, &pop, &k, 0.0).unwrap();
        assert_abs_diff_eq!(p, 0.072_256_513_671_447_14, epsilon = 1e-15);
    }

    #[test]
    fn probability_edge_cases() {
        let pop = line_population(&[0.0, 0.0, 5.0]);
        let h = si_history(&[None, Some(1), Some(3)], 5);
        let idx = CompartmentIndex::new(&h);
        let k = Kernel::PiecewiseConstant { levels: vec![0.5, 0.1], change_points: vec![2.0] };
        assert_eq!(infection_probability(0, 0, &idx, &pop, &k, 0.0).unwrap(), 0.0);
        assert!(matches!(infection_probability(1, 2, &idx, &pop, &k, 0.0), Err(Error::Contract(_))));
        let pl = Kernel::PowerLaw { alpha: 0.3, beta: 2.0 };
        assert!(matches!(infection_probability(0, 1, &idx, &pop, &pl, 0.0), Err(Error::Evaluation(_))));
        let with_sparks = infection_probability(0, 0, &idx, &pop, &k, 0.2).unwrap();
        assert_abs_diff_eq!(with_sparks, 1.0 - (-0.2f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn zero_kernel_never_infects() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pop = Population::uniform_square(50, 10.0, &mut rng).unwrap();
        let model = ModelSpec::si(KernelSpec::piecewise_constant(vec![2.0]));
        let h = simulate(&pop, &model, &[0.0, 0.0], &SimulationConfig::new(20, 1)).unwrap();
        assert_eq!(h.final_size(), 1);
        assert!(epidemic_curve(&h).iter().all(|&c| c == 0));
    }

    #[test]
    fn saturating_kernel_infects_everyone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pop = Population::uniform_square(50, 10.0, &mut rng).unwrap();
        let model = ModelSpec::si(KernelSpec::piecewise_constant(vec![100.0]));
        let h = simulate(&pop, &model, &[1e3, 0.0], &SimulationConfig::new(5, 9)).unwrap();
        assert_eq!(h.final_size(), 50);
        let curve = epidemic_curve(&h);
        assert_eq!(curve[0], 49);
        assert_eq!(curve.iter().sum::<usize>() + 1, 50);
    }

    #[test]
    fn seeded_runs_repeat() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pop = Population::uniform_square(100, 10.0, &mut rng).unwrap();
        let model = ModelSpec::si(KernelSpec::piecewise_constant(vec![2.0]));
        let cfg = SimulationConfig::new(20, 77);
        let a = simulate(&pop, &model, &[0.10, 0.0004], &cfg).unwrap();
        let b = simulate(&pop, &model, &[0.10, 0.0004], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seir_sojourns_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pop = Population::uniform_square(80, 5.0, &mut rng).unwrap();
        let model = ModelSpec {
            kernel: KernelSpec::piecewise_constant(vec![2.0]),
            framework: Framework::SEIR,
            latent_period: Some(5),
            infectious_period: Some(4),
            sparks: true,
        };
        let cfg = SimulationConfig { initial: InitialInfectives::Ids(vec![0, 1]), ..SimulationConfig::new(40, 11) };
        let h = simulate(&pop, &model, &[0.3, 0.01, 0.001], &cfg).unwrap();
        assert!(h.final_size() > 2);
        for r in h.records() {
            if let (Some(e), Some(i)) = (r.exposed, r.infectious) {
                assert_eq!(i, e + 5);
            }
            if let (Some(i), Some(x)) = (r.infectious, r.removed) {
                assert_eq!(x, i + 4);
            }
        }
        let curve = epidemic_curve(&h);
        assert_eq!(curve.iter().sum::<usize>() + 2, h.final_size());
    }

    #[test]
    fn curve_indexing() {
        let h = si_history(&[Some(0), None, None], 8);
        assert_eq!(epidemic_curve(&h), vec![0; 8]);
        let h = si_history(&[Some(0), Some(6), None], 8);
        assert_eq!(epidemic_curve(&h), vec![0, 0, 0, 0, 0, 1, 0, 0]);
    }

    #[test]
    fn min_size_redraw() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pop = Population::uniform_square(60, 10.0, &mut rng).unwrap();
        let model = ModelSpec::si(KernelSpec::piecewise_constant(vec![2.0]));
        let cfg = SimulationConfig { min_final_size: 61, max_redraws: 3, ..SimulationConfig::new(10, 1) };
        assert!(simulate(&pop, &model, &[0.1, 0.0], &cfg).is_err());
    }

    #[test]
    fn bernoulli_frequency_matches_probability() {
        // frozen state: individual 0 susceptible, 1 and 2 infectious
        let pop = line_population(&[0.0, 1.0, 3.0]);
        let kernel = Kernel::PiecewiseConstant { levels: vec![0.3, 0.05], change_points: vec![2.0] };
        let model = ModelSpec::si(KernelSpec::piecewise_constant(vec![2.0]));
        let h = si_history(&[None, Some(0), Some(0)], 1);
        let p = infection_probability(0, 0, &CompartmentIndex::new(&h), &pop, &kernel, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 100_000;
        let init = InitialInfectives::Ids(vec![1, 2]);
        let hits = (0..draws)
            .filter(|_| {
                let h = simulate_with_rng(&pop, &model, &[0.3, 0.05], 1, &init, &mut rng).unwrap();
                h.records()[0].infectious.is_some()
            })
            .count();
        let freq = hits as f64 / draws as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((freq - p).abs() < 3.0 * se, "freq {freq} vs p {p}");
    }
}
