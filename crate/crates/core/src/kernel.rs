//! Spatial infection kernels: power law, piecewise constant and piecewise
//! linear in the pairwise distance.
//!
//! Piecewise kernels split `[0, inf)` into half-open bins
//! `[delta_{l-1}, delta_l)` with `delta_0 = 0` and the last bin unbounded, so a
//! distance sitting exactly on a change point belongs to the bin to its right.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    PowerLaw,
    PiecewiseConstant,
    PiecewiseLinear,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelFamily::PowerLaw => "power-law",
            KernelFamily::PiecewiseConstant => "piecewise-constant",
            KernelFamily::PiecewiseLinear => "piecewise-linear",
        })
    }
}

/// Structure of a kernel: its family and change points.
///
/// When `estimate_change_points` is set, `change_points` only fixes how many
/// there are (and serves as a starting value); the sampled values live in the
/// parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec<F> {
    pub family: KernelFamily,
    pub change_points: Vec<F>,
    pub estimate_change_points: bool,
}

impl<F: Real> KernelSpec<F> {
    pub fn power_law() -> Self {
        KernelSpec { family: KernelFamily::PowerLaw, change_points: Vec::new(), estimate_change_points: false }
    }

    pub fn piecewise_constant(change_points: Vec<F>) -> Self {
        KernelSpec { family: KernelFamily::PiecewiseConstant, change_points, estimate_change_points: false }
    }

    pub fn piecewise_linear(change_points: Vec<F>) -> Self {
        KernelSpec { family: KernelFamily::PiecewiseLinear, change_points, estimate_change_points: false }
    }

    pub fn estimated(mut self) -> Self {
        self.estimate_change_points = true;
        self
    }

    /// Number of pieces `n`; a power law counts as one.
    pub fn n_steps(&self) -> usize {
        match self.family {
            KernelFamily::PowerLaw => 1,
            _ => self.change_points.len() + 1,
        }
    }
}

/// A fully parameterised kernel, ready to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel<F> {
    /// `alpha * d^-beta`.
    PowerLaw { alpha: F, beta: F },
    /// `levels[l]` on bin `l`.
    PiecewiseConstant { levels: Vec<F>, change_points: Vec<F> },
    /// `max(0, intercepts[l] + slopes[l] * d)` on bin `l`.
    PiecewiseLinear { intercepts: Vec<F>, slopes: Vec<F>, change_points: Vec<F> },
}

/// Bin holding distance `d`: the number of change points `<= d`.
#[inline]
pub fn bin_index<F: Real>(change_points: &[F], d: F) -> usize {
    change_points.partition_point(|&c| c <= d)
}

fn check_distance<F: Real>(d: F) -> Result<()> {
    if d.is_nan() || d < F::zero() {
        return Err(Error::input(format!("distance must be non-negative, got {d}")));
    }
    Ok(())
}

/// `d^-beta`. The susceptibility factor `alpha` multiplies the summed
/// pressure, not the individual term.
pub fn eval_power_law<F: Real>(beta: F, d: F) -> Result<F> {
    check_distance(d)?;
    if d == F::zero() {
        return Err(Error::evaluation("power-law kernel is singular at distance 0"));
    }
    Ok(d.powf(-beta))
}

pub fn eval_piecewise_constant<F: Real>(levels: &[F], change_points: &[F], d: F) -> Result<F> {
    check_distance(d)?;
    if levels.len() != change_points.len() + 1 {
        return Err(Error::input("piecewise constant kernel needs one more level than change points"));
    }
    Ok(levels[bin_index(change_points, d)])
}

/// Linear piece of the bin holding `d`, clamped at zero.
pub fn eval_piecewise_linear<F: Real>(intercepts: &[F], slopes: &[F], change_points: &[F], d: F) -> Result<F> {
    check_distance(d)?;
    if intercepts.len() != change_points.len() + 1 || slopes.len() != intercepts.len() {
        return Err(Error::input("piecewise linear kernel needs one more piece than change points"));
    }
    let l = bin_index(change_points, d);
    Ok((intercepts[l] + slopes[l] * d).max(F::zero()))
}

impl<F: Real> Kernel<F> {
    pub fn family(&self) -> KernelFamily {
        match self {
            Kernel::PowerLaw { .. } => KernelFamily::PowerLaw,
            Kernel::PiecewiseConstant { .. } => KernelFamily::PiecewiseConstant,
            Kernel::PiecewiseLinear { .. } => KernelFamily::PiecewiseLinear,
        }
    }

    pub fn change_points(&self) -> &[F] {
        match self {
            Kernel::PowerLaw { .. } => &[],
            Kernel::PiecewiseConstant { change_points, .. } | Kernel::PiecewiseLinear { change_points, .. } => {
                change_points
            }
        }
    }

    /// Kernel value at distance `d`, including the power-law `alpha`.
    ///
    /// Unchecked: `d` must be non-negative, and positive for a power law.
    #[inline]
    pub fn rate(&self, d: F) -> F {
        match self {
            Kernel::PowerLaw { alpha, beta } => *alpha * d.powf(-*beta),
            Kernel::PiecewiseConstant { levels, change_points } => levels[bin_index(change_points, d)],
            Kernel::PiecewiseLinear { intercepts, slopes, change_points } => {
                let l = bin_index(change_points, d);
                (intercepts[l] + slopes[l] * d).max(F::zero())
            }
        }
    }

    /// Checked version of [`Kernel::rate`].
    pub fn try_rate(&self, d: F) -> Result<F> {
        match self {
            Kernel::PowerLaw { alpha, beta } => Ok(*alpha * eval_power_law(*beta, d)?),
            Kernel::PiecewiseConstant { levels, change_points } => eval_piecewise_constant(levels, change_points, d),
            Kernel::PiecewiseLinear { intercepts, slopes, change_points } => {
                eval_piecewise_linear(intercepts, slopes, change_points, d)
            }
        }
    }

    /// Signed gap `d_l = (alpha_{l-1} - alpha_l) + delta_{l-1} (beta_{l-1} - beta_l)`
    /// between adjacent linear pieces at change point `delta_{l-1}`, for
    /// `2 <= l <= n` (1-based piece numbering).
    pub fn continuity_gap(&self, l: usize) -> Result<F> {
        let Kernel::PiecewiseLinear { intercepts, slopes, change_points } = self else {
            return Err(Error::input("continuity gaps are defined for piecewise linear kernels only"));
        };
        let n = intercepts.len();
        if l < 2 || l > n {
            return Err(Error::input(format!("gap index {l} outside 2..={n}")));
        }
        let (lo, hi) = (l - 2, l - 1);
        let at = change_points[l - 2];
        Ok((intercepts[lo] - intercepts[hi]) + at * (slopes[lo] - slopes[hi]))
    }

    /// All gaps `d_2, ..., d_n`.
    pub fn continuity_gaps(&self) -> Result<Vec<F>> {
        let n = match self {
            Kernel::PiecewiseLinear { intercepts, .. } => intercepts.len(),
            _ => return Err(Error::input("continuity gaps are defined for piecewise linear kernels only")),
        };
        (2..=n).map(|l| self.continuity_gap(l)).collect()
    }
}

/// One structural problem found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `change_points[index]` is not strictly above its predecessor (or not positive).
    ChangePointOrder { index: usize },
    /// Parameter vector length disagrees with the spec.
    PieceCount { expected: usize, found: usize },
    /// A parameter lies outside its sign constraint.
    Sign { name: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ChangePointOrder { index } => {
                write!(f, "change point {} is not strictly increasing from 0", index + 1)
            }
            Violation::PieceCount { expected, found } => {
                write!(f, "expected {expected} kernel pieces, found {found}")
            }
            Violation::Sign { name } => write!(f, "{name} violates its sign constraint"),
        }
    }
}

/// Checks change-point ordering, piece counts and sign constraints
/// (`alpha, beta > 0` for a power law; `alpha_l >= 0`, and `beta_l <= 0` for
/// linear pieces). Every problem is reported.
pub fn validate<F: Real>(spec: &KernelSpec<F>, kernel: &Kernel<F>) -> std::result::Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    if spec.family != kernel.family() {
        out.push(Violation::PieceCount { expected: spec.n_steps(), found: 0 });
        return Err(out);
    }
    let mut prev = F::zero();
    for (index, &c) in kernel.change_points().iter().enumerate() {
        if !(c > prev) {
            out.push(Violation::ChangePointOrder { index });
        }
        prev = prev.max(c);
    }
    let sign = |name: String, ok: bool, out: &mut Vec<Violation>| {
        if !ok {
            out.push(Violation::Sign { name });
        }
    };
    match kernel {
        Kernel::PowerLaw { alpha, beta } => {
            sign("alpha".into(), *alpha > F::zero(), &mut out);
            sign("beta".into(), *beta > F::zero(), &mut out);
        }
        Kernel::PiecewiseConstant { levels, change_points } => {
            if levels.len() != change_points.len() + 1 || levels.len() != spec.n_steps() {
                out.push(Violation::PieceCount { expected: spec.n_steps(), found: levels.len() });
            }
            for (l, &a) in levels.iter().enumerate() {
                sign(format!("alpha_{}", l + 1), a >= F::zero(), &mut out);
            }
        }
        Kernel::PiecewiseLinear { intercepts, slopes, change_points } => {
            if intercepts.len() != change_points.len() + 1
                || slopes.len() != intercepts.len()
                || intercepts.len() != spec.n_steps()
            {
                out.push(Violation::PieceCount { expected: spec.n_steps(), found: intercepts.len() });
            }
            for (l, (&a, &b)) in intercepts.iter().zip(slopes).enumerate() {
                sign(format!("alpha_{}", l + 1), a >= F::zero(), &mut out);
                sign(format!("beta_{}", l + 1), b <= F::zero(), &mut out);
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
