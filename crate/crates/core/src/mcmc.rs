//! Random-walk Metropolis-Hastings with single-parameter and bivariate
//! Gaussian block proposals.
//!
//! Blocks are updated in order within an iteration. Step sizes adapt during
//! burn-in towards an acceptance rate of 20-45% and are frozen afterwards,
//! so the kept draws come from a fixed, symmetric-proposal MH kernel.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::num::{mean, Real};
use crate::rng::{stream_rng, Stream};

/// Unnormalised log density the sampler explores. `-inf` marks points
/// outside the support.
pub trait LogDensity<F>: Sync {
    fn log_density(&self, theta: &[F]) -> F;

    /// A random starting point, when the target can supply one.
    fn draw_initial(&self, _rng: &mut dyn rand::RngCore) -> Option<Vec<F>> {
        None
    }
}

impl<F: Real> LogDensity<F> for crate::likelihood::Posterior<F> {
    fn log_density(&self, theta: &[F]) -> F {
        self.log_posterior(theta)
    }

    fn draw_initial(&self, rng: &mut dyn rand::RngCore) -> Option<Vec<F>> {
        Some(self.priors().sample(rng))
    }
}

/// 2x2 symmetric matrix `[[a, b], [b, c]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cov2<F> {
    pub a: F,
    pub b: F,
    pub c: F,
}

impl<F: Real> Cov2<F> {
    pub fn is_positive_definite(&self) -> bool {
        self.a > F::zero() && self.a * self.c - self.b * self.b > F::zero()
    }

    /// Lower Cholesky factor `(l11, l21, l22)`.
    pub fn cholesky(&self) -> Option<(F, F, F)> {
        if !self.is_positive_definite() {
            return None;
        }
        let l11 = self.a.sqrt();
        let l21 = self.b / l11;
        let l22 = (self.c - l21 * l21).sqrt();
        Some((l11, l21, l22))
    }

    pub fn scaled(&self, s: F) -> Self {
        Cov2 { a: self.a * s, b: self.b * s, c: self.c * s }
    }

    pub fn correlation(&self) -> F {
        self.b / (self.a * self.c).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Block<F> {
    Single { index: usize, step: F },
    /// Joint Gaussian step `scale * L z` for two parameters, `L L^T = cov`.
    Pair { indices: (usize, usize), cov: Cov2<F>, scale: F },
}

impl<F: Real> Block<F> {
    pub fn indices(&self) -> Vec<usize> {
        match self {
            Block::Single { index, .. } => vec![*index],
            Block::Pair { indices, .. } => vec![indices.0, indices.1],
        }
    }

    fn scale_mut(&mut self) -> &mut F {
        match self {
            Block::Single { step, .. } => step,
            Block::Pair { scale, .. } => scale,
        }
    }
}

/// Ordered proposal blocks covering every parameter exactly once.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalPlan<F> {
    pub blocks: Vec<Block<F>>,
}

impl<F: Real> ProposalPlan<F> {
    /// One single-parameter block per parameter.
    pub fn singles(steps: &[F]) -> Self {
        ProposalPlan {
            blocks: steps.iter().enumerate().map(|(index, &step)| Block::Single { index, step }).collect(),
        }
    }

    pub fn check(&self, dim: usize) -> Result<()> {
        let mut seen = vec![0usize; dim];
        for b in &self.blocks {
            for i in b.indices() {
                if i >= dim {
                    return Err(Error::input(format!("block refers to parameter {i} of {dim}")));
                }
                seen[i] += 1;
            }
            match b {
                Block::Single { step, .. } if !(*step > F::zero()) => {
                    return Err(Error::input("proposal steps must be positive"))
                }
                Block::Pair { cov, scale, .. } if !cov.is_positive_definite() || !(*scale > F::zero()) => {
                    return Err(Error::input("pair proposal covariance must be positive definite"))
                }
                _ => {}
            }
        }
        if let Some(i) = seen.iter().position(|&k| k != 1) {
            return Err(Error::input(format!("parameter {i} appears in {} blocks", seen[i])));
        }
        Ok(())
    }

    /// Replaces the single blocks of `pair` with one bivariate block placed
    /// where the first of them was.
    pub fn pair_up(&mut self, pair: (usize, usize), cov: Cov2<F>, scale: F) {
        let first = self.blocks.iter().position(|b| b.indices().contains(&pair.0) || b.indices().contains(&pair.1));
        self.blocks.retain(|b| !(b.indices().contains(&pair.0) || b.indices().contains(&pair.1)));
        let at = first.unwrap_or(self.blocks.len()).min(self.blocks.len());
        self.blocks.insert(at, Block::Pair { indices: pair, cov, scale });
    }
}

/// Current position of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState<F> {
    pub theta: Vec<F>,
    pub log_density: F,
}

/// One sweep over all blocks. Returns the accept flag of each block.
pub fn mh_step<F: Real, T: LogDensity<F> + ?Sized, R: Rng + ?Sized>(
    state: &mut ChainState<F>,
    plan: &ProposalPlan<F>,
    target: &T,
    rng: &mut R,
) -> Vec<bool> {
    let mut accepted = Vec::with_capacity(plan.blocks.len());
    let mut proposal = state.theta.clone();
    for block in &plan.blocks {
        match block {
            Block::Single { index, step } => {
                let z: f64 = StandardNormal.sample(rng);
                proposal[*index] = state.theta[*index] + *step * F::of(z);
            }
            Block::Pair { indices: (i, j), cov, scale } => {
                let (l11, l21, l22) = cov.cholesky().expect("plan covariances are positive definite");
                let z1: f64 = StandardNormal.sample(rng);
                let z2: f64 = StandardNormal.sample(rng);
                let (z1, z2) = (F::of(z1), F::of(z2));
                proposal[*i] = state.theta[*i] + *scale * l11 * z1;
                proposal[*j] = state.theta[*j] + *scale * (l21 * z1 + l22 * z2);
            }
        }
        let candidate = target.log_density(&proposal);
        let u: f64 = rng.random();
        let accept = candidate.is_finite() && (F::of(u).ln() < candidate - state.log_density);
        if accept {
            state.theta.copy_from_slice(&proposal);
            state.log_density = candidate;
        } else {
            proposal.copy_from_slice(&state.theta);
        }
        accepted.push(accept);
    }
    accepted
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSettings {
    /// Total iterations including burn-in.
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Tune step sizes during burn-in.
    pub adapt: bool,
    /// Iterations between step-size updates.
    pub adapt_interval: usize,
    pub max_init_attempts: usize,
}

impl Default for ChainSettings {
    fn default() -> Self {
        ChainSettings {
            iterations: 60_000,
            burn_in: 10_000,
            thin: 10,
            adapt: true,
            adapt_interval: 50,
            max_init_attempts: 1_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init<F> {
    Fixed(Vec<F>),
    /// Draw from the target's initial distribution until the density is finite.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BlockAcceptance {
    pub accepted: usize,
    pub proposed: usize,
}

impl BlockAcceptance {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Kept draws of one chain plus bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput<F> {
    /// Iteration number of each kept draw (0-based, counting burn-in).
    pub iterations: Vec<usize>,
    /// One row per kept draw.
    pub draws: Vec<Vec<F>>,
    pub log_density: Vec<F>,
    /// Over all iterations, per block of `plan`.
    pub acceptance: Vec<BlockAcceptance>,
    /// Over post-burn-in iterations only.
    pub acceptance_after_burn_in: Vec<BlockAcceptance>,
    /// The plan as frozen at the end of burn-in.
    pub plan: ProposalPlan<F>,
    pub seed: u64,
    pub stream: u64,
    pub burn_in: usize,
    pub thin: usize,
    pub initial: Vec<F>,
}

impl<F: Real> ChainOutput<F> {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.initial.len()
    }

    /// Draws of parameter `k`.
    pub fn column(&self, k: usize) -> Vec<F> {
        self.draws.iter().map(|row| row[k]).collect()
    }
}

fn initial_state<F: Real, T: LogDensity<F> + ?Sized, R: rand::RngCore>(
    target: &T,
    init: &Init<F>,
    max_attempts: usize,
    rng: &mut R,
) -> Result<ChainState<F>> {
    match init {
        Init::Fixed(theta) => {
            let ld = target.log_density(theta);
            if !ld.is_finite() {
                return Err(Error::Initialization(format!("log density at {theta:?} is {ld}")));
            }
            Ok(ChainState { theta: theta.clone(), log_density: ld })
        }
        Init::Random => {
            for _ in 0..max_attempts.max(1) {
                let Some(theta) = target.draw_initial(rng) else {
                    return Err(Error::Initialization("target cannot draw starting points".into()));
                };
                let ld = target.log_density(&theta);
                if ld.is_finite() {
                    return Ok(ChainState { theta, log_density: ld });
                }
            }
            Err(Error::Initialization(format!("no finite starting point in {max_attempts} draws")))
        }
    }
}

/// Multiplicative step update targeting 30% acceptance; stays inside
/// `[0.5, 2]` per update so one unlucky batch cannot wreck the scale.
fn adapt_factor(rate: f64) -> f64 {
    (2.0 * (rate - 0.3)).exp().clamp(0.5, 2.0)
}

/// Runs one chain on stream `stream` of `seed`.
pub fn run_chain<F: Real, T: LogDensity<F> + ?Sized>(
    target: &T,
    init: &Init<F>,
    plan: &ProposalPlan<F>,
    settings: &ChainSettings,
    seed: u64,
    stream: Stream,
) -> Result<ChainOutput<F>> {
    if settings.thin == 0 {
        return Err(Error::input("thin must be at least 1"));
    }
    let mut rng = stream_rng(seed, stream);
    let mut state = initial_state(target, init, settings.max_init_attempts, &mut rng)?;
    plan.check(state.theta.len())?;
    let mut plan = plan.clone();
    let initial = state.theta.clone();
    let n_blocks = plan.blocks.len();
    let mut acceptance = vec![BlockAcceptance::default(); n_blocks];
    let mut after = vec![BlockAcceptance::default(); n_blocks];
    let mut batch = vec![0usize; n_blocks];
    let kept = settings.iterations.saturating_sub(settings.burn_in).div_ceil(settings.thin);
    let mut out_iters = Vec::with_capacity(kept);
    let mut draws = Vec::with_capacity(kept);
    let mut log_density = Vec::with_capacity(kept);

    for it in 0..settings.iterations {
        let flags = mh_step(&mut state, &plan, target, &mut rng);
        let burning = it < settings.burn_in;
        for (b, &ok) in flags.iter().enumerate() {
            acceptance[b].proposed += 1;
            acceptance[b].accepted += ok as usize;
            if burning {
                batch[b] += ok as usize;
            } else {
                after[b].proposed += 1;
                after[b].accepted += ok as usize;
            }
        }
        if burning && settings.adapt && (it + 1) % settings.adapt_interval == 0 {
            for (b, block) in plan.blocks.iter_mut().enumerate() {
                let rate = batch[b] as f64 / settings.adapt_interval as f64;
                let s = block.scale_mut();
                *s = *s * F::of(adapt_factor(rate));
                batch[b] = 0;
            }
        }
        if !burning && (it - settings.burn_in) % settings.thin == 0 {
            out_iters.push(it);
            draws.push(state.theta.clone());
            log_density.push(state.log_density);
        }
    }

    Ok(ChainOutput {
        iterations: out_iters,
        draws,
        log_density,
        acceptance,
        acceptance_after_burn_in: after,
        plan,
        seed,
        stream: stream.id(),
        burn_in: settings.burn_in,
        thin: settings.thin,
        initial,
    })
}

/// Runs `inits.len()` independent chains in parallel; chain `k` uses stream
/// `Stream::Chain(k)` of `seed`.
pub fn run_multichain<F: Real, T: LogDensity<F> + ?Sized>(
    target: &T,
    inits: &[Init<F>],
    plan: &ProposalPlan<F>,
    settings: &ChainSettings,
    seed: u64,
) -> Vec<Result<ChainOutput<F>>> {
    inits
        .par_iter()
        .enumerate()
        .map(|(k, init)| run_chain(target, init, plan, settings, seed, Stream::Chain(k as u32)))
        .collect()
}

/// Scaled sample covariance of two parameters from a pilot chain.
///
/// A covariance that is not positive definite is jittered on the diagonal
/// until it is.
pub fn pilot_covariance<F: Real>(pilot: &ChainOutput<F>, pair: (usize, usize), scale: F) -> Result<Cov2<F>> {
    if pilot.len() < 100 {
        return Err(Error::input(format!(
            "pilot run has {} kept draws; at least 100 are needed",
            pilot.len()
        )));
    }
    let x = pilot.column(pair.0);
    let y = pilot.column(pair.1);
    let (mx, my) = (mean(&x), mean(&y));
    let n1 = F::count(x.len() - 1);
    let mut sxx = F::zero();
    let mut syy = F::zero();
    let mut sxy = F::zero();
    for (&a, &b) in x.iter().zip(&y) {
        sxx = sxx + (a - mx) * (a - mx);
        syy = syy + (b - my) * (b - my);
        sxy = sxy + (a - mx) * (b - my);
    }
    let (vx, vy) = (sxx / n1, syy / n1);
    if !(vx > F::zero()) || !(vy > F::zero()) {
        return Err(Error::input(
            "pilot run shows no movement in a paired parameter; run a longer pilot",
        ));
    }
    let mut cov = Cov2 { a: vx, b: sxy / n1, c: vy };
    let mut jitter = F::of(1e-8) * vx.max(vy);
    while !cov.is_positive_definite() {
        cov.a = cov.a + jitter;
        cov.c = cov.c + jitter;
        jitter = jitter * F::of(10.0);
    }
    Ok(cov.scaled(scale))
}

/// Sample correlation of two parameters in a chain.
pub fn correlation<F: Real>(chain: &ChainOutput<F>, pair: (usize, usize)) -> F {
    let x = chain.column(pair.0);
    let y = chain.column(pair.1);
    let (mx, my) = (mean(&x), mean(&y));
    let mut sxx = F::zero();
    let mut syy = F::zero();
    let mut sxy = F::zero();
    for (&a, &b) in x.iter().zip(&y) {
        sxx = sxx + (a - mx) * (a - mx);
        syy = syy + (b - my) * (b - my);
        sxy = sxy + (a - mx) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}
