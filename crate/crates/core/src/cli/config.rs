//! Run configuration files (TOML).
//!
//! Relative paths inside a config are resolved against the directory of the
//! config file. See the README for the full grammar.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::FitSettings;
use crate::kernel::{KernelFamily, KernelSpec};
use crate::mcmc::ChainSettings;
use crate::model::{InitialInfectives, ModelSpec, SimulationConfig};
use crate::params::{ParamKind, ParamLayout};
use crate::population::{Framework, Time};
use crate::prior::{Prior, PriorSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub model: ModelConfig,
    /// Parameter values used by `simulate`, by name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub priors: PriorsConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub population: Option<PopulationConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dic: Option<DicConfig>,
    #[serde(default)]
    pub predict: PredictConfig,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_framework")]
    pub framework: Framework,
    pub kernel: KernelFamily,
    #[serde(default)]
    pub change_points: Vec<f64>,
    #[serde(default)]
    pub estimate_change_points: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latent_period: Option<Time>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub infectious_period: Option<Time>,
    #[serde(default)]
    pub sparks: bool,
}

fn default_framework() -> Framework {
    Framework::SI
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorConfig {
    PositiveHalfNormal { variance: f64 },
    NegativeHalfNormal { variance: f64 },
    Uniform { lower: f64, upper: f64 },
}

impl From<PriorConfig> for Prior<f64> {
    fn from(p: PriorConfig) -> Self {
        match p {
            PriorConfig::PositiveHalfNormal { variance } => Prior::PositiveHalfNormal { variance },
            PriorConfig::NegativeHalfNormal { variance } => Prior::NegativeHalfNormal { variance },
            PriorConfig::Uniform { lower, upper } => Prior::Uniform { lower, upper },
        }
    }
}

/// Priors by parameter name, plus smoothing scales for linear kernels.
/// Kernel parameters and sparks left out get vague half-normal priors;
/// estimated change points must be given.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PriorsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<Vec<f64>>,
    #[serde(flatten)]
    pub params: BTreeMap<String, PriorConfig>,
}

/// Either a CSV file or a uniform random layout on `[0, side]^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub side: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    pub horizon: Time,
    #[serde(default = "default_initial")]
    pub initial_infectives: usize,
    /// Fixed initial infectives; overrides `initial_infectives`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_ids: Option<Vec<usize>>,
    #[serde(default)]
    pub min_final_size: usize,
    #[serde(default = "default_redraws")]
    pub max_redraws: usize,
}

fn default_initial() -> usize {
    1
}

fn default_redraws() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub population: PathBuf,
    pub events: PathBuf,
    pub horizon: Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    /// Pair a linear piece's parameters when the pilot shows strong correlation.
    Auto,
    Never,
    Always,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    pub adapt_interval: usize,
    pub pilot: bool,
    pub pilot_iterations: usize,
    pub pilot_burn_in: usize,
    pub pairing: Pairing,
    pub pair_threshold: f64,
    pub pair_scale: f64,
    /// Fixed starting values by name; chains start from prior draws otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<BTreeMap<String, f64>>,
    /// Initial proposal steps by name; unnamed parameters get 10% of their
    /// prior scale.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<BTreeMap<String, f64>>,
}

impl Default for McmcConfig {
    fn default() -> Self {
        let fit = FitSettings::<f64>::default();
        let pilot = fit.pilot.unwrap();
        McmcConfig {
            iterations: fit.chain.iterations,
            burn_in: fit.chain.burn_in,
            thin: fit.chain.thin,
            chains: fit.chains,
            adapt_interval: fit.chain.adapt_interval,
            pilot: true,
            pilot_iterations: pilot.iterations,
            pilot_burn_in: pilot.burn_in,
            pairing: Pairing::Auto,
            pair_threshold: fit.pair_threshold,
            pair_scale: fit.pair_scale,
            init: None,
            steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DicConfig {
    /// Output directories of earlier `fit` runs.
    pub runs: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictConfig {
    pub replicates: usize,
    /// Directory holding the fit's draws; defaults to the output directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws_dir: Option<PathBuf>,
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig { replicates: 500, draws_dir: None }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Reads a config and makes its relative paths absolute with respect to
    /// the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base)?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) -> Result<()> {
        let fix = |p: &mut PathBuf| -> Result<()> {
            if p.is_relative() {
                *p = std::path::absolute(base.join(&*p))?;
            }
            Ok(())
        };
        if let Some(file) = self.population.as_mut().and_then(|p| p.file.as_mut()) {
            fix(file)?;
        }
        if let Some(d) = self.data.as_mut() {
            fix(&mut d.population)?;
            fix(&mut d.events)?;
        }
        fix(&mut self.output.dir)?;
        if let Some(d) = self.dic.as_mut() {
            for r in &mut d.runs {
                fix(r)?;
            }
        }
        if let Some(d) = self.predict.draws_dir.as_mut() {
            fix(d)?;
        }
        Ok(())
    }

    pub fn model_spec(&self) -> Result<ModelSpec<f64>> {
        let m = &self.model;
        let kernel = KernelSpec {
            family: m.kernel,
            change_points: m.change_points.clone(),
            estimate_change_points: m.estimate_change_points,
        };
        let spec = ModelSpec {
            kernel,
            framework: m.framework,
            latent_period: m.latent_period,
            infectious_period: m.infectious_period,
            sparks: m.sparks,
        };
        spec.check().map_err(|e| Error::config(e.to_string()))?;
        if m.estimate_change_points && m.kernel == KernelFamily::PowerLaw {
            return Err(Error::config("a power-law kernel has no change points to estimate"));
        }
        Ok(spec)
    }

    /// Values of `map` in layout order; every name must be present and no
    /// others.
    fn by_layout(layout: &ParamLayout, map: &BTreeMap<String, f64>, block: &str) -> Result<Vec<f64>> {
        if let Some(unknown) = map.keys().find(|k| layout.index_of(k).is_none()) {
            return Err(Error::config(format!(
                "[{block}] names unknown parameter `{unknown}`; the model has {}",
                layout.names().join(", ")
            )));
        }
        layout
            .names()
            .iter()
            .map(|n| map.get(n).copied().ok_or_else(|| Error::config(format!("[{block}] is missing `{n}`"))))
            .collect()
    }

    /// Parameter vector from `[params]`.
    pub fn theta(&self) -> Result<Vec<f64>> {
        let model = self.model_spec()?;
        let layout = model.layout();
        let theta = Self::by_layout(&layout, &self.params, "params")?;
        model.check_params(&theta).map_err(|e| Error::config(e.to_string()))?;
        Ok(theta)
    }

    pub fn prior_spec(&self) -> Result<PriorSpec<f64>> {
        let model = self.model_spec()?;
        let layout = model.layout();
        if let Some(unknown) = self.priors.params.keys().find(|k| layout.index_of(k).is_none()) {
            return Err(Error::config(format!(
                "[priors] names unknown parameter `{unknown}`; the model has {}",
                layout.names().join(", ")
            )));
        }
        let power_law = model.kernel.family == KernelFamily::PowerLaw;
        let priors = layout
            .names()
            .iter()
            .zip(layout.kinds())
            .map(|(name, kind)| match (self.priors.params.get(name), kind) {
                (Some(&p), _) => Ok(p.into()),
                (None, ParamKind::Beta(_)) if !power_law => Ok(Prior::vague_negative()),
                (None, ParamKind::ChangePoint(_)) => {
                    Err(Error::config(format!("[priors] needs a prior for the estimated change point `{name}`")))
                }
                (None, _) => Ok(Prior::vague_positive()),
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = PriorSpec { priors, smoothing: self.priors.smoothing.clone() };
        spec.check(&layout, model.kernel.family, model.kernel.n_steps())?;
        Ok(spec)
    }

    pub fn simulation_config(&self) -> Result<SimulationConfig> {
        let s = self.simulation.as_ref().ok_or_else(|| Error::config("missing [simulation] block"))?;
        let initial = match &s.initial_ids {
            Some(ids) => InitialInfectives::Ids(ids.clone()),
            None => InitialInfectives::Count(s.initial_infectives),
        };
        Ok(SimulationConfig {
            horizon: s.horizon,
            initial,
            seed: self.seed,
            min_final_size: s.min_final_size,
            max_redraws: s.max_redraws,
        })
    }

    pub fn fit_settings(&self) -> Result<FitSettings<f64>> {
        let m = &self.mcmc;
        if m.chains == 0 {
            return Err(Error::config("[mcmc] chains must be at least 1"));
        }
        if m.thin == 0 || m.adapt_interval == 0 {
            return Err(Error::config("[mcmc] thin and adapt_interval must be at least 1"));
        }
        if m.iterations <= m.burn_in {
            return Err(Error::config("[mcmc] iterations must exceed burn_in: nothing to summarize"));
        }
        let chain = ChainSettings {
            iterations: m.iterations,
            burn_in: m.burn_in,
            thin: m.thin,
            adapt_interval: m.adapt_interval,
            ..ChainSettings::default()
        };
        let pilot = m.pilot.then(|| ChainSettings {
            iterations: m.pilot_iterations,
            burn_in: m.pilot_burn_in,
            thin: 1,
            adapt_interval: m.adapt_interval,
            ..ChainSettings::default()
        });
        let pair_threshold = match m.pairing {
            Pairing::Auto => m.pair_threshold,
            Pairing::Never => f64::INFINITY,
            Pairing::Always => -1.0,
        };
        let init = match &m.init {
            Some(map) => Some(Self::by_layout(&self.model_spec()?.layout(), map, "mcmc.init")?),
            None => None,
        };
        let steps = match &m.steps {
            Some(map) => {
                let layout = self.model_spec()?.layout();
                if let Some(unknown) = map.keys().find(|k| layout.index_of(k).is_none()) {
                    return Err(Error::config(format!("[mcmc.steps] names unknown parameter `{unknown}`")));
                }
                if let Some((n, _)) = map.iter().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
                    return Err(Error::config(format!("[mcmc.steps] `{n}` must be positive")));
                }
                let priors = self.prior_spec()?;
                let steps = layout.names().iter().zip(&priors.priors).map(|(n, p)| map.get(n).copied().unwrap_or(p.initial_step()));
                Some(steps.collect())
            }
            None => None,
        };
        Ok(FitSettings {
            chain,
            chains: m.chains,
            seed: self.seed,
            pilot,
            pair_threshold,
            pair_scale: m.pair_scale,
            init,
            steps,
        })
    }
}
