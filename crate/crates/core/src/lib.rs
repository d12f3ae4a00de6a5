//! Spatial individual-level epidemic models (ILMs) with power-law,
//! piecewise constant and piecewise linear infection kernels.
//!
//! The crate covers the whole workflow: forward simulation, the exact
//! discrete-time likelihood, random-walk Metropolis-Hastings fitting with
//! optional bivariate block proposals, convergence diagnostics, DIC model
//! comparison and posterior predictive epidemic curves.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below fix the scalar to `f64`, which is what the CLI uses.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod fit;
pub mod io;
pub mod kernel;
pub mod likelihood;
pub mod mcmc;
pub mod model;
pub mod num;
pub mod predictive;
pub mod params;
pub mod population;
pub mod prior;
pub mod rng;

pub use error::{Error, Result};
pub use kernel::{Kernel, KernelFamily, KernelSpec};
pub use likelihood::{LikelihoodData, Posterior};
pub use model::{epidemic_curve, infection_probability, simulate, InitialInfectives, ModelSpec, SimulationConfig};
pub use num::Real;
pub use params::{ParamKind, ParamLayout};
pub use population::{Compartment, CompartmentIndex, EventHistory, EventRecord, Framework, Population, Time};
pub use prior::{Prior, PriorSpec};

pub type Population64 = Population<f64>;
pub type Population32 = Population<f32>;
pub type Kernel64 = Kernel<f64>;
pub type KernelSpec64 = KernelSpec<f64>;
pub type ModelSpec64 = ModelSpec<f64>;
pub type PriorSpec64 = PriorSpec<f64>;
pub type LikelihoodData64 = LikelihoodData<f64>;
pub type Posterior64 = Posterior<f64>;
