//! Brute-force likelihood oracle and random small instances.
//!
//! The oracle shares nothing with the library's likelihood code: it walks
//! every (i, t) pair, reads compartments straight off the event records and
//! sums kernel values over all infectious individuals.
#![allow(dead_code)]

use pwilm::rng::{stream_rng, Stream};
use pwilm::{simulate, EventHistory, Framework, InitialInfectives, Kernel, KernelSpec, ModelSpec, Population, SimulationConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    S,
    E,
    I,
    R,
}

fn state(h: &EventHistory, i: usize, t: u32) -> State {
    let r = &h.records()[i];
    let at = |x: Option<u32>| matches!(x, Some(x) if x <= t);
    match h.framework() {
        Framework::SI => {
            if at(r.infectious) {
                State::I
            } else {
                State::S
            }
        }
        Framework::SIR => {
            if at(r.removed) {
                State::R
            } else if at(r.infectious) {
                State::I
            } else {
                State::S
            }
        }
        Framework::SEIR => {
            if at(r.removed) {
                State::R
            } else if at(r.infectious) {
                State::I
            } else if at(r.exposed) {
                State::E
            } else {
                State::S
            }
        }
    }
}

pub fn oracle_kernel(kernel: &Kernel<f64>, d: f64) -> f64 {
    match kernel {
        Kernel::PowerLaw { alpha, beta } => alpha * d.powf(-beta),
        Kernel::PiecewiseConstant { levels, change_points } => {
            let mut l = 0;
            while l < change_points.len() && d >= change_points[l] {
                l += 1;
            }
            levels[l]
        }
        Kernel::PiecewiseLinear { intercepts, slopes, change_points } => {
            let mut l = 0;
            while l < change_points.len() && d >= change_points[l] {
                l += 1;
            }
            (intercepts[l] + slopes[l] * d).max(0.0)
        }
    }
}

/// Naive triple loop over t, susceptible i and infectious j.
pub fn oracle_log_likelihood(
    h: &EventHistory,
    pop: &Population<f64>,
    model: &ModelSpec<f64>,
    theta: &[f64],
    window: (u32, u32),
) -> f64 {
    let kernel = model.kernel(theta);
    let eps = if model.sparks { theta[theta.len() - 1] } else { 0.0 };
    let newly = if model.framework == Framework::SEIR { State::E } else { State::I };
    let n = pop.len();
    let xy = pop.coords();
    let mut total = 0.0;
    for t in window.0..window.1 {
        for i in 0..n {
            if state(h, i, t) != State::S {
                continue;
            }
            let next = state(h, i, t + 1);
            if next != State::S && next != newly {
                continue;
            }
            let mut lambda = eps;
            for j in 0..n {
                if state(h, j, t) == State::I {
                    let d = ((xy[i].0 - xy[j].0).powi(2) + (xy[i].1 - xy[j].1).powi(2)).sqrt();
                    lambda += oracle_kernel(&kernel, d);
                }
            }
            let p = 1.0 - (-lambda).exp();
            total += if next == State::S { (1.0 - p).ln() } else { p.ln() };
        }
    }
    total
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

pub struct Instance {
    pub population: Population<f64>,
    pub model: ModelSpec<f64>,
    pub theta: Vec<f64>,
    pub history: EventHistory,
    pub window: (u32, u32),
}

fn random_theta(model: &ModelSpec<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let spec = &model.kernel;
    let n = spec.n_steps();
    let mut theta = Vec::new();
    match spec.family {
        pwilm::KernelFamily::PowerLaw => {
            theta.push(rng.random_range(0.05..0.8));
            theta.push(rng.random_range(0.5..3.0));
        }
        pwilm::KernelFamily::PiecewiseConstant => {
            let mut level = rng.random_range(0.1..0.6);
            for _ in 0..n {
                theta.push(level);
                level *= rng.random_range(0.05..0.9);
            }
        }
        pwilm::KernelFamily::PiecewiseLinear => {
            let mut a = rng.random_range(0.2..0.8);
            for _ in 0..n {
                let b = -rng.random_range(0.0..0.15);
                theta.push(a);
                theta.push(b);
                a *= rng.random_range(0.05..0.6);
            }
        }
    }
    theta.extend(spec.change_points.iter().filter(|_| spec.estimate_change_points));
    if model.sparks {
        theta.push(rng.random_range(0.0005..0.02));
    }
    theta
}

/// A random small epidemic (N <= 30, T <= 10) and a random parameter vector,
/// usually different from the one that generated it.
pub fn random_instance(k: u64) -> Instance {
    let mut rng = stream_rng(1000 + k, Stream::Simulation);
    let n = rng.random_range(5..=30);
    let horizon: u32 = rng.random_range(2..=10);
    let population = Population::uniform_square(n, 5.0, &mut rng).unwrap();
    let family = k % 3;
    let n_cp = rng.random_range(1..=3);
    let mut cps: Vec<f64> = (0..n_cp).map(|_| rng.random_range(0.3..5.0)).collect();
    cps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let kernel = match family {
        0 => KernelSpec::power_law(),
        1 => KernelSpec::piecewise_constant(cps),
        _ => KernelSpec::piecewise_linear(cps),
    };
    let kernel = if family != 0 && rng.random_bool(0.3) { kernel.estimated() } else { kernel };
    let framework = [Framework::SI, Framework::SIR, Framework::SEIR][rng.random_range(0..3)];
    let model = ModelSpec {
        kernel,
        framework,
        latent_period: (framework == Framework::SEIR).then(|| rng.random_range(1..=2)),
        infectious_period: (framework != Framework::SI).then(|| rng.random_range(1..=4)),
        sparks: (k / 3) % 2 == 1,
    };
    let truth = random_theta(&model, &mut rng);
    let seeds = rng.random_range(1..=3.min(n));
    let history = pwilm::model::simulate_with_rng(
        &population,
        &model,
        &truth,
        horizon,
        &InitialInfectives::Count(seeds),
        &mut rng,
    )
    .unwrap();
    let theta = if rng.random_bool(0.8) { random_theta(&model, &mut rng) } else { truth };
    let window = if rng.random_bool(0.5) {
        (0, horizon)
    } else {
        let a = rng.random_range(0..horizon);
        (a, rng.random_range(a + 1..=horizon))
    };
    Instance { population, model, theta, history, window }
}

/// SI epidemic on a fresh uniform population.
pub fn si_epidemic(
    n: usize,
    side: f64,
    kernel: KernelSpec<f64>,
    theta: &[f64],
    horizon: u32,
    min_size: usize,
    seed: u64,
) -> (Population<f64>, ModelSpec<f64>, EventHistory) {
    let population = Population::uniform_square(n, side, &mut stream_rng(seed, Stream::Population)).unwrap();
    let model = ModelSpec::si(kernel);
    let mut cfg = SimulationConfig::new(horizon, seed);
    cfg.min_final_size = min_size;
    let history = simulate(&population, &model, theta, &cfg).unwrap();
    (population, model, history)
}
