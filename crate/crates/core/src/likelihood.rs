//! Exact discrete-time ILM likelihood and the log-posterior.
//!
//! For each step `t` in the modelled window, every newly infected individual
//! (newly exposed under SEIR) contributes `log P(i, t)` and every individual
//! still susceptible at `t + 1` contributes `log(1 - P(i, t)) = -lambda(i, t)`,
//! where `lambda` is the summed kernel pressure plus sparks.
//!
//! The survival part is linear in the kernel, so all susceptible/infectious
//! pairs across all steps collapse into one distance profile weighted by the
//! number of steps each pair overlaps. Every infection event keeps its own
//! profile of distances to the individuals infectious at that step. Profiles
//! are sorted by distance with prefix sums, so piecewise kernels evaluate in
//! `O(n log m)` per profile however large the population.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelFamily};
use crate::model::ModelSpec;
use crate::num::{log_one_minus_exp_neg, Real};
use crate::params::ParamLayout;
use crate::population::{EventHistory, Population, Time};
use crate::prior::PriorSpec;

/// Distances with multiplicities, sorted ascending.
#[derive(Debug, Clone, Default)]
struct Profile<F> {
    dist: Vec<F>,
    ln_dist: Vec<F>,
    weight: Vec<F>,
    cum_w: Vec<F>,
    cum_wd: Vec<F>,
}

impl<F: Real> Profile<F> {
    fn new(mut entries: Vec<(F, F)>) -> Self {
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("distances are finite"));
        let mut p = Profile {
            dist: Vec::with_capacity(entries.len()),
            ln_dist: Vec::with_capacity(entries.len()),
            weight: Vec::with_capacity(entries.len()),
            cum_w: Vec::with_capacity(entries.len() + 1),
            cum_wd: Vec::with_capacity(entries.len() + 1),
        };
        let (mut w_acc, mut wd_acc) = (F::zero(), F::zero());
        p.cum_w.push(w_acc);
        p.cum_wd.push(wd_acc);
        for (d, w) in entries {
            w_acc = w_acc + w;
            wd_acc = wd_acc + w * d;
            p.dist.push(d);
            p.ln_dist.push(d.ln());
            p.weight.push(w);
            p.cum_w.push(w_acc);
            p.cum_wd.push(wd_acc);
        }
        p
    }

    fn len(&self) -> usize {
        self.dist.len()
    }

    /// First index whose distance is `>= x`.
    #[inline]
    fn lower(&self, x: F) -> usize {
        self.dist.partition_point(|&d| d < x)
    }

    /// First index whose distance is `> x`.
    #[inline]
    fn upper(&self, x: F) -> usize {
        self.dist.partition_point(|&d| d <= x)
    }

    #[inline]
    fn w(&self, lo: usize, hi: usize) -> F {
        self.cum_w[hi] - self.cum_w[lo]
    }

    #[inline]
    fn wd(&self, lo: usize, hi: usize) -> F {
        self.cum_wd[hi] - self.cum_wd[lo]
    }

    /// `sum_k w_k * kernel(d_k)`.
    fn kernel_sum(&self, kernel: &Kernel<F>) -> F {
        if self.dist.is_empty() {
            return F::zero();
        }
        match kernel {
            Kernel::PowerLaw { alpha, beta } => {
                let s: F = self
                    .ln_dist
                    .iter()
                    .zip(&self.weight)
                    .fold(F::zero(), |acc, (&ld, &w)| acc + w * (-*beta * ld).exp());
                *alpha * s
            }
            Kernel::PiecewiseConstant { levels, change_points } => {
                let mut total = F::zero();
                let mut lo = 0;
                for (l, &level) in levels.iter().enumerate() {
                    let hi = change_points.get(l).map_or(self.len(), |&c| self.lower(c).max(lo));
                    if hi > lo && level != F::zero() {
                        total = total + level * self.w(lo, hi);
                    }
                    lo = hi;
                }
                total
            }
            Kernel::PiecewiseLinear { intercepts, slopes, change_points } => {
                let mut total = F::zero();
                let mut lo = 0;
                for l in 0..intercepts.len() {
                    let hi = change_points.get(l).map_or(self.len(), |&c| self.lower(c).max(lo));
                    if hi > lo {
                        let (a, b) = (intercepts[l], slopes[l]);
                        // sub-range of [lo, hi) where a + b d > 0
                        let (from, to) = if b < F::zero() {
                            (lo, self.lower(-a / b).clamp(lo, hi))
                        } else if b > F::zero() {
                            (self.upper(-a / b).clamp(lo, hi), hi)
                        } else if a > F::zero() {
                            (lo, hi)
                        } else {
                            (lo, lo)
                        };
                        if to > from {
                            total = total + a * self.w(from, to) + b * self.wd(from, to);
                        }
                    }
                    lo = hi;
                }
                total
            }
        }
    }
}

/// Everything the likelihood needs from the data, precomputed once for a
/// model and window; evaluating a parameter vector then only touches the
/// compact distance profiles.
#[derive(Debug, Clone)]
pub struct LikelihoodData<F> {
    model: ModelSpec<F>,
    layout: ParamLayout,
    window: (Time, Time),
    survival: Profile<F>,
    /// Number of (individual, step) survival terms, each paying `epsilon`.
    survival_steps: F,
    events: Vec<Profile<F>>,
}

impl<F: Real> LikelihoodData<F> {
    /// Precomputes over the history's own window.
    pub fn new(history: &EventHistory, population: &Population<F>, model: &ModelSpec<F>) -> Result<Self> {
        Self::with_window(history, population, model, history.window())
    }

    /// Precomputes for steps `t_min <= t < t_max`.
    pub fn with_window(
        history: &EventHistory,
        population: &Population<F>,
        model: &ModelSpec<F>,
        window: (Time, Time),
    ) -> Result<Self> {
        model.check()?;
        let (t_min, t_max) = window;
        if t_min >= t_max || t_max > history.horizon() {
            return Err(Error::input(format!(
                "window ({t_min}, {t_max}) is not inside [0, {}]",
                history.horizon()
            )));
        }
        if history.len() != population.len() {
            return Err(Error::input(format!(
                "history has {} individuals but the population has {}",
                history.len(),
                population.len()
            )));
        }
        if history.framework() != model.framework {
            return Err(Error::input("history and model use different compartment frameworks"));
        }
        let n = population.len();
        let (lo_t, hi_t) = (t_min as i64, t_max as i64);
        let never = i64::MAX / 4;

        // i in S(t + 1) for t < s_i - 1; j in I(t) for a_j <= t < b_j
        let leaves: Vec<i64> = (0..n).map(|i| history.leaves_susceptible(i).map_or(never, |t| t as i64)).collect();
        let infectious: Vec<Option<(i64, i64)>> = (0..n)
            .map(|j| {
                history
                    .infectious_interval(j)
                    .map(|(a, b)| (a as i64, b.map_or(never, |b| b as i64)))
            })
            .collect();
        let sources: Vec<usize> = (0..n).filter(|&j| infectious[j].is_some()).collect();

        let mut survival = Vec::new();
        let mut survival_steps = 0i64;
        for i in 0..n {
            let s_end = (leaves[i] - 1).min(hi_t);
            if s_end <= lo_t {
                continue;
            }
            survival_steps += s_end - lo_t;
            let row = population.row(i);
            for &j in &sources {
                let (a, b) = infectious[j].expect("sources are infectious");
                let overlap = s_end.min(b) - lo_t.max(a);
                if overlap > 0 && i != j {
                    survival.push((row[j], F::of(overlap as f64)));
                }
            }
        }

        let mut events = Vec::new();
        for i in 0..n {
            let Some(tau) = history.infection_time(i) else { continue };
            let t = tau as i64 - 1;
            if t < lo_t || t >= hi_t {
                continue;
            }
            let row = population.row(i);
            let entries: Vec<(F, F)> = sources
                .iter()
                .filter(|&&j| {
                    let (a, b) = infectious[j].expect("sources are infectious");
                    a <= t && t < b && j != i
                })
                .map(|&j| (row[j], F::one()))
                .collect();
            events.push(Profile::new(entries));
        }

        if model.kernel.family == KernelFamily::PowerLaw {
            let zero = |p: &Profile<F>| p.dist.first().is_some_and(|&d| d == F::zero());
            if zero(&Profile::new(survival.clone())) || events.iter().any(zero) {
                return Err(Error::evaluation(
                    "power-law kernel with a susceptible-infectious pair at distance 0",
                ));
            }
        }

        Ok(LikelihoodData {
            layout: model.layout(),
            model: model.clone(),
            window,
            survival: Profile::new(survival),
            survival_steps: F::of(survival_steps as f64),
            events,
        })
    }

    pub fn model(&self) -> &ModelSpec<F> {
        &self.model
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn window(&self) -> (Time, Time) {
        self.window
    }

    /// Number of infection events inside the window.
    pub fn n_events(&self) -> usize {
        self.events.len()
    }

    pub fn log_likelihood(&self, theta: &[F]) -> F {
        let kernel = self.layout.kernel(&self.model.kernel, theta);
        self.log_likelihood_kernel(&kernel, self.layout.sparks(theta))
    }

    pub fn log_likelihood_kernel(&self, kernel: &Kernel<F>, sparks: F) -> F {
        let pressure = self.survival.kernel_sum(kernel) + sparks * self.survival_steps;
        let mut total = -pressure;
        for event in &self.events {
            let lambda = event.kernel_sum(kernel) + sparks;
            total = total + log_one_minus_exp_neg(lambda);
        }
        if total.is_nan() {
            F::neg_infinity()
        } else {
            total
        }
    }
}

/// One-shot likelihood evaluation; build [`LikelihoodData`] once when
/// evaluating repeatedly.
pub fn log_likelihood<F: Real>(
    history: &EventHistory,
    population: &Population<F>,
    model: &ModelSpec<F>,
    theta: &[F],
    window: (Time, Time),
) -> Result<F> {
    let expected = model.layout().len();
    if theta.len() != expected {
        return Err(Error::input(format!("expected {expected} parameters, got {}", theta.len())));
    }
    Ok(LikelihoodData::with_window(history, population, model, window)?.log_likelihood(theta))
}

/// Log posterior kernel: prior plus likelihood.
#[derive(Debug)]
pub struct Posterior<F> {
    data: LikelihoodData<F>,
    priors: PriorSpec<F>,
    likelihood_evaluations: AtomicUsize,
}

impl<F: Real> Posterior<F> {
    pub fn new(data: LikelihoodData<F>, priors: PriorSpec<F>) -> Result<Self> {
        let kernel = &data.model.kernel;
        priors.check(&data.layout, kernel.family, kernel.n_steps())?;
        Ok(Posterior { data, priors, likelihood_evaluations: AtomicUsize::new(0) })
    }

    pub fn data(&self) -> &LikelihoodData<F> {
        &self.data
    }

    pub fn priors(&self) -> &PriorSpec<F> {
        &self.priors
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.data.layout
    }

    pub fn names(&self) -> &[String] {
        self.data.layout.names()
    }

    pub fn log_prior(&self, theta: &[F]) -> F {
        let kernel = self.data.layout.kernel(&self.data.model.kernel, theta);
        self.priors.log_prior(theta, &kernel)
    }

    pub fn log_likelihood(&self, theta: &[F]) -> F {
        self.likelihood_evaluations.fetch_add(1, Ordering::Relaxed);
        self.data.log_likelihood(theta)
    }

    /// `-inf` without touching the likelihood when the prior rules `theta` out.
    pub fn log_posterior(&self, theta: &[F]) -> F {
        let lp = self.log_prior(theta);
        if lp == F::neg_infinity() {
            return lp;
        }
        lp + self.log_likelihood(theta)
    }

    pub fn likelihood_evaluations(&self) -> usize {
        self.likelihood_evaluations.load(Ordering::Relaxed)
    }
}
