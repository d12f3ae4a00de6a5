//! Prior distributions over model parameters, including the smoothing prior
//! on gaps between adjacent linear kernel pieces.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelFamily};
use crate::num::Real;
use crate::params::{ParamKind, ParamLayout};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior<F> {
    /// Normal(0, variance) folded onto `[0, inf)`.
    PositiveHalfNormal { variance: F },
    /// Normal(0, variance) folded onto `(-inf, 0]`.
    NegativeHalfNormal { variance: F },
    Uniform { lower: F, upper: F },
}

impl<F: Real> Prior<F> {
    /// The vague `N+(0, 1e5)` prior.
    pub fn vague_positive() -> Self {
        Prior::PositiveHalfNormal { variance: F::of(1e5) }
    }

    /// The vague `N-(0, 1e5)` prior.
    pub fn vague_negative() -> Self {
        Prior::NegativeHalfNormal { variance: F::of(1e5) }
    }

    pub fn check(&self) -> Result<()> {
        match *self {
            Prior::PositiveHalfNormal { variance } | Prior::NegativeHalfNormal { variance } => {
                if !(variance > F::zero()) || !variance.is_finite() {
                    return Err(Error::input(format!("half-normal variance must be positive, got {variance}")));
                }
            }
            Prior::Uniform { lower, upper } => {
                if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
                    return Err(Error::input(format!("uniform bounds must satisfy lower < upper, got ({lower}, {upper})")));
                }
            }
        }
        Ok(())
    }

    pub fn log_density(&self, x: F) -> F {
        match *self {
            Prior::PositiveHalfNormal { variance } => half_normal_log_density(x, variance),
            Prior::NegativeHalfNormal { variance } => half_normal_log_density(-x, variance),
            Prior::Uniform { lower, upper } => {
                if x >= lower && x <= upper {
                    -(upper - lower).ln()
                } else {
                    F::neg_infinity()
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> F {
        match *self {
            Prior::PositiveHalfNormal { variance } => {
                let z: f64 = StandardNormal.sample(rng);
                F::of(z.abs()) * variance.sqrt()
            }
            Prior::NegativeHalfNormal { variance } => {
                let z: f64 = StandardNormal.sample(rng);
                -F::of(z.abs()) * variance.sqrt()
            }
            Prior::Uniform { lower, upper } => {
                let u: f64 = rng.random();
                lower + (upper - lower) * F::of(u)
            }
        }
    }

    /// Starting random-walk step: 10% of the prior standard deviation,
    /// or 5% of a uniform prior's range.
    pub fn initial_step(&self) -> F {
        match *self {
            Prior::PositiveHalfNormal { variance } | Prior::NegativeHalfNormal { variance } => {
                F::of(0.1) * variance.sqrt()
            }
            Prior::Uniform { lower, upper } => F::of(0.05) * (upper - lower),
        }
    }
}

fn half_normal_log_density<F: Real>(x: F, variance: F) -> F {
    if x < F::zero() || x.is_nan() {
        return F::neg_infinity();
    }
    let two = F::of(2.0);
    two.ln() - F::of(0.5) * (two * F::PI() * variance).ln() - x * x / (two * variance)
}

/// Per-parameter priors in [`ParamLayout`] order, plus an optional smoothing
/// prior `d_l ~ Exp(mean D_l)` on the gap at each change point of a linear
/// kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec<F> {
    pub priors: Vec<Prior<F>>,
    pub smoothing: Option<Vec<F>>,
}

impl<F: Real> PriorSpec<F> {
    /// Vague half-normal priors on kernel levels, slopes and sparks, with
    /// the given uniform bounds for estimated change points (in order).
    pub fn vague(layout: &ParamLayout, change_point_bounds: &[(F, F)]) -> Result<Self> {
        let priors = layout
            .kinds()
            .iter()
            .map(|k| match *k {
                ParamKind::Alpha(_) | ParamKind::Sparks => Ok(Prior::vague_positive()),
                ParamKind::Beta(_) => Ok(if layout.names()[0] == "alpha" {
                    Prior::vague_positive()
                } else {
                    Prior::vague_negative()
                }),
                ParamKind::ChangePoint(l) => change_point_bounds
                    .get(l)
                    .map(|&(lower, upper)| Prior::Uniform { lower, upper })
                    .ok_or_else(|| Error::config(format!("no prior bounds given for delta_{}", l + 1))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PriorSpec { priors, smoothing: None })
    }

    pub fn with_smoothing(mut self, scales: Vec<F>) -> Self {
        self.smoothing = Some(scales);
        self
    }

    pub fn check(&self, layout: &ParamLayout, family: KernelFamily, n_steps: usize) -> Result<()> {
        if self.priors.len() != layout.len() {
            return Err(Error::config(format!(
                "{} priors given for {} parameters",
                self.priors.len(),
                layout.len()
            )));
        }
        for (p, name) in self.priors.iter().zip(layout.names()) {
            p.check().map_err(|e| Error::config(format!("prior for {name}: {e}")))?;
        }
        if let Some(scales) = &self.smoothing {
            if family != KernelFamily::PiecewiseLinear {
                return Err(Error::config("smoothing priors apply to piecewise linear kernels only"));
            }
            if scales.len() != n_steps - 1 {
                return Err(Error::config(format!(
                    "{} smoothing scales given for {} change points",
                    scales.len(),
                    n_steps - 1
                )));
            }
            if scales.iter().any(|&d| !(d > F::zero())) {
                return Err(Error::config("smoothing scales must be positive"));
            }
        }
        Ok(())
    }

    /// Log prior density of `theta` under `kernel` (the kernel `theta`
    /// describes). `-inf` outside the support, including unordered change
    /// points and negative smoothing gaps.
    pub fn log_prior(&self, theta: &[F], kernel: &Kernel<F>) -> F {
        let mut total = F::zero();
        for (p, &x) in self.priors.iter().zip(theta) {
            let lp = p.log_density(x);
            if lp == F::neg_infinity() {
                return lp;
            }
            total = total + lp;
        }
        let mut prev = F::zero();
        for &c in kernel.change_points() {
            if !(c > prev) {
                return F::neg_infinity();
            }
            prev = c;
        }
        if let (Some(scales), Ok(gaps)) = (&self.smoothing, kernel.continuity_gaps()) {
            for (&d, &gap) in scales.iter().zip(&gaps) {
                total = total + smoothing_log_density(gap, d);
            }
        }
        total
    }

    /// Draws a parameter vector from the independent per-parameter priors.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<F> {
        self.priors.iter().map(|p| p.sample(rng)).collect()
    }
}

/// `log(1/D) - gap/D` for `gap >= 0`, `-inf` otherwise.
pub fn smoothing_log_density<F: Real>(gap: F, scale: F) -> F {
    if gap < F::zero() || gap.is_nan() {
        return F::neg_infinity();
    }
    -scale.ln() - gap / scale
}
