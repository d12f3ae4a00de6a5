//! Flat parameter vectors and the naming/layout that maps them onto a model.

use crate::kernel::{Kernel, KernelFamily, KernelSpec};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamKind {
    /// Power-law susceptibility, or the level/intercept of piece `l` (0-based).
    Alpha(usize),
    /// Power-law distance exponent, or the slope of linear piece `l`.
    Beta(usize),
    /// Estimated change point `delta_{l+1}`.
    ChangePoint(usize),
    /// Constant sparks rate.
    Sparks,
}

/// Order and meaning of the entries of a parameter vector.
///
/// Power law: `alpha, beta`. Piecewise constant: `alpha_1..alpha_n`.
/// Piecewise linear: `alpha_1, beta_1, ..., alpha_n, beta_n`. Estimated
/// change points `delta_1..delta_{n-1}` follow, then `epsilon` when sparks
/// are enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    family: KernelFamily,
    kinds: Vec<ParamKind>,
    names: Vec<String>,
}

impl ParamLayout {
    pub fn new<F: Real>(spec: &KernelSpec<F>, sparks: bool) -> Self {
        let n = spec.n_steps();
        let mut kinds = Vec::new();
        match spec.family {
            KernelFamily::PowerLaw => kinds.extend([ParamKind::Alpha(0), ParamKind::Beta(0)]),
            KernelFamily::PiecewiseConstant => kinds.extend((0..n).map(ParamKind::Alpha)),
            KernelFamily::PiecewiseLinear => {
                kinds.extend((0..n).flat_map(|l| [ParamKind::Alpha(l), ParamKind::Beta(l)]))
            }
        }
        if spec.estimate_change_points && spec.family != KernelFamily::PowerLaw {
            kinds.extend((0..n - 1).map(ParamKind::ChangePoint));
        }
        if sparks {
            kinds.push(ParamKind::Sparks);
        }
        let names = kinds
            .iter()
            .map(|k| match (spec.family, k) {
                (KernelFamily::PowerLaw, ParamKind::Alpha(_)) => "alpha".to_string(),
                (KernelFamily::PowerLaw, ParamKind::Beta(_)) => "beta".to_string(),
                (_, ParamKind::Alpha(l)) => format!("alpha_{}", l + 1),
                (_, ParamKind::Beta(l)) => format!("beta_{}", l + 1),
                (_, ParamKind::ChangePoint(l)) => format!("delta_{}", l + 1),
                (_, ParamKind::Sparks) => "epsilon".to_string(),
            })
            .collect();
        ParamLayout { family: spec.family, kinds, names }
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kinds(&self) -> &[ParamKind] {
        &self.kinds
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn has_sparks(&self) -> bool {
        self.kinds.last() == Some(&ParamKind::Sparks)
    }

    /// Indices of `(alpha_l, beta_l)` for every linear piece.
    pub fn linear_pairs(&self) -> Vec<(usize, usize)> {
        if self.family != KernelFamily::PiecewiseLinear {
            return Vec::new();
        }
        let mut pairs = Vec::new();
        for (i, k) in self.kinds.iter().enumerate() {
            if let ParamKind::Alpha(l) = *k {
                if let Some(j) = self.kinds.iter().position(|&k| k == ParamKind::Beta(l)) {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    /// Builds the kernel a parameter vector describes.
    pub fn kernel<F: Real>(&self, spec: &KernelSpec<F>, theta: &[F]) -> Kernel<F> {
        debug_assert_eq!(theta.len(), self.len());
        let mut alphas = Vec::new();
        let mut betas = Vec::new();
        let mut cps = Vec::new();
        for (k, &v) in self.kinds.iter().zip(theta) {
            match k {
                ParamKind::Alpha(_) => alphas.push(v),
                ParamKind::Beta(_) => betas.push(v),
                ParamKind::ChangePoint(_) => cps.push(v),
                ParamKind::Sparks => {}
            }
        }
        let change_points = if spec.estimate_change_points { cps } else { spec.change_points.clone() };
        match self.family {
            KernelFamily::PowerLaw => Kernel::PowerLaw { alpha: alphas[0], beta: betas[0] },
            KernelFamily::PiecewiseConstant => Kernel::PiecewiseConstant { levels: alphas, change_points },
            KernelFamily::PiecewiseLinear => {
                Kernel::PiecewiseLinear { intercepts: alphas, slopes: betas, change_points }
            }
        }
    }

    /// Sparks rate, zero when the model has none.
    pub fn sparks<F: Real>(&self, theta: &[F]) -> F {
        if self.has_sparks() {
            theta[self.len() - 1]
        } else {
            F::zero()
        }
    }

    /// Inverse of [`ParamLayout::kernel`].
    pub fn flatten<F: Real>(&self, kernel: &Kernel<F>, sparks: F) -> Vec<F> {
        self.kinds
            .iter()
            .map(|k| match (kernel, *k) {
                (Kernel::PowerLaw { alpha, .. }, ParamKind::Alpha(_)) => *alpha,
                (Kernel::PowerLaw { beta, .. }, ParamKind::Beta(_)) => *beta,
                (Kernel::PiecewiseConstant { levels, .. }, ParamKind::Alpha(l)) => levels[l],
                (Kernel::PiecewiseLinear { intercepts, .. }, ParamKind::Alpha(l)) => intercepts[l],
                (Kernel::PiecewiseLinear { slopes, .. }, ParamKind::Beta(l)) => slopes[l],
                (_, ParamKind::ChangePoint(l)) => kernel.change_points()[l],
                (_, ParamKind::Sparks) => sparks,
                (_, ParamKind::Beta(_)) => F::nan(),
            })
            .collect()
    }
}
