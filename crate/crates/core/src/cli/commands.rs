//! The `simulate`, `fit`, `diagnose`, `dic` and `predict` subcommands.
//!
//! Every command reads and checks all of its inputs before it creates the
//! output directory, so a failing run leaves no partial outputs behind.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::RunConfig;
use crate::diagnostics::{dic, summarize, PlugIn};
use crate::error::{Error, Result};
use crate::fit::{convergence, fit, FitOutput};
use crate::io;
use crate::likelihood::{LikelihoodData, Posterior};
use crate::mcmc::{Block, ChainOutput};
use crate::model::{epidemic_curve, simulate};
use crate::population::{EventHistory, Population};
use crate::predictive::{coverage, predict};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Fit,
    Diagnose,
    Dic,
    Predict,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    /// Lines for standard output.
    pub report: Vec<String>,
    pub convergence_warning: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.convergence_warning {
            5
        } else {
            0
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::Input(_) | Error::Io(_) | Error::Csv(_) => 3,
        Error::Evaluation(_) | Error::Initialization(_) | Error::Contract(_) => 4,
    }
}

/// Loads `config_path`, applies the overrides and runs `command`.
pub fn run(command: Command, config_path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<Outcome> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(dir) = out {
        cfg.output.dir = std::path::absolute(dir)?;
    }
    match command {
        Command::Simulate => cmd_simulate(&cfg),
        Command::Fit => cmd_fit(&cfg),
        Command::Diagnose => cmd_diagnose(&cfg),
        Command::Dic => cmd_dic(&cfg),
        Command::Predict => cmd_predict(&cfg),
    }
}

/// Output files collected in memory and written together at the end.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Outputs { dir: dir.to_path_buf(), files: Vec::new() }
    }

    fn add(&mut self, name: impl Into<String>, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.files.push((name.into(), buf));
        Ok(())
    }

    fn commit(self) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        for (name, bytes) in self.files {
            fs::write(self.dir.join(name), bytes)?;
        }
        Ok(())
    }
}

fn simulation_population(cfg: &RunConfig) -> Result<Population<f64>> {
    let p = cfg.population.as_ref().ok_or_else(|| Error::config("missing [population] block"))?;
    match (&p.file, p.n, p.side) {
        (Some(file), None, None) => io::read_population(io::open(file)?),
        (None, Some(n), Some(side)) => {
            let mut rng = stream_rng(cfg.seed, Stream::Population);
            Population::uniform_square(n, side, &mut rng).map_err(|e| Error::config(e.to_string()))
        }
        _ => Err(Error::config("[population] needs either `file` or both `n` and `side`")),
    }
}

fn observed_data(cfg: &RunConfig) -> Result<(Population<f64>, EventHistory)> {
    let d = cfg.data.as_ref().ok_or_else(|| Error::config("missing [data] block"))?;
    let framework = cfg.model.framework;
    let population = io::read_population(io::open(&d.population)?)?;
    let events = io::read_events(io::open(&d.events)?, framework, d.horizon)?;
    if events.len() != population.len() {
        return Err(Error::input(format!(
            "{} lists {} individuals but {} lists {}",
            d.events.display(),
            events.len(),
            d.population.display(),
            population.len()
        )));
    }
    Ok((population, events))
}

fn posterior(cfg: &RunConfig, population: &Population<f64>, events: &EventHistory) -> Result<Posterior<f64>> {
    let model = cfg.model_spec()?;
    let priors = cfg.prior_spec()?;
    let data = LikelihoodData::new(events, population, &model)?;
    Posterior::new(data, priors)
}

fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.model_spec()?;
    let theta = cfg.theta()?;
    let sim = cfg.simulation_config()?;
    let population = simulation_population(cfg)?;
    let history = simulate(&population, &model, &theta, &sim)?;
    let curve = epidemic_curve(&history);
    let mut out = Outputs::new(&cfg.output.dir);
    out.add("population.csv", |w| io::write_population(&population, w))?;
    out.add("events.csv", |w| io::write_events(&history, w))?;
    out.add("curve.csv", |w| io::write_curve(&curve, w))?;
    out.commit()?;
    Ok(Outcome {
        report: vec![format!(
            "simulated {} individuals over {} steps; final size {}",
            population.len(),
            history.horizon(),
            history.final_size()
        )],
        convergence_warning: false,
    })
}

#[derive(Serialize)]
struct Manifest {
    seed: u64,
    chains: usize,
    iterations: usize,
    burn_in: usize,
    thin: usize,
    parameters: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pilot: Option<PilotEntry>,
    paired: Vec<PairEntry>,
    chain: Vec<ChainEntry>,
}

#[derive(Serialize)]
struct PilotEntry {
    stream: u64,
    iterations: usize,
    burn_in: usize,
}

#[derive(Serialize)]
struct PairEntry {
    params: [String; 2],
    pilot_correlation: f64,
}

#[derive(Serialize)]
struct ChainEntry {
    index: usize,
    stream: u64,
    kept_draws: usize,
    file: String,
    blocks: Vec<String>,
    acceptance: Vec<f64>,
}

fn block_label(block: &Block<f64>, names: &[String]) -> String {
    block.indices().iter().map(|&i| names[i].as_str()).collect::<Vec<_>>().join("+")
}

fn draws_file(k: usize) -> String {
    format!("draws_chain{k}.csv")
}

fn manifest(cfg: &RunConfig, out: &FitOutput<f64>) -> Manifest {
    let names = &out.names;
    Manifest {
        seed: cfg.seed,
        chains: out.chains.len(),
        iterations: cfg.mcmc.iterations,
        burn_in: cfg.mcmc.burn_in,
        thin: cfg.mcmc.thin,
        parameters: names.clone(),
        pilot: out.pilot.as_ref().map(|p| PilotEntry {
            stream: p.stream,
            iterations: cfg.mcmc.pilot_iterations,
            burn_in: cfg.mcmc.pilot_burn_in,
        }),
        paired: out
            .paired
            .iter()
            .map(|p| PairEntry {
                params: [names[p.indices.0].clone(), names[p.indices.1].clone()],
                pilot_correlation: p.pilot_correlation,
            })
            .collect(),
        chain: out
            .chains
            .iter()
            .enumerate()
            .map(|(k, c)| ChainEntry {
                index: k,
                stream: c.stream,
                kept_draws: c.len(),
                file: draws_file(k),
                blocks: c.plan.blocks.iter().map(|b| block_label(b, names)).collect(),
                acceptance: c.acceptance_after_burn_in.iter().map(|a| a.rate()).collect(),
            })
            .collect(),
    }
}

/// Diagnostics table plus convergence verdict for a set of chains.
fn diagnostics_table(names: &[String], chains: &[ChainOutput<f64>], out: &mut Outputs) -> Result<Outcome> {
    let pooled: Vec<Vec<f64>> = chains.iter().flat_map(|c| c.draws.iter().cloned()).collect();
    let summary = summarize(&pooled)?;
    let verdict = convergence(chains);
    let (geweke, psrf): (Vec<Option<f64>>, Vec<Option<f64>>) = match &verdict {
        Ok(v) => (
            (0..names.len())
                .map(|k| {
                    v.geweke.iter().map(|z| z[k]).max_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
                })
                .collect(),
            (0..names.len()).map(|k| v.psrf.as_ref().map(|r| r[k])).collect(),
        ),
        Err(_) => (vec![None; names.len()], vec![None; names.len()]),
    };
    out.add("diagnostics.csv", |w| io::write_diagnostics(names, &summary, &geweke, &psrf, w))?;

    let mut report: Vec<String> = names
        .iter()
        .zip(&summary)
        .map(|(n, s)| format!("{n}: mean {:.6} median {:.6} 95% PI ({:.6}, {:.6})", s.mean, s.median, s.q025, s.q975))
        .collect();
    let warning = match &verdict {
        Ok(v) if v.ok() => false,
        Ok(v) if v.psrf.is_none() => {
            report.push("warning: a single chain cannot be checked with Gelman-Rubin".into());
            true
        }
        Ok(v) => {
            let bad: Vec<&str> = v.suspect.iter().map(|&k| names[k].as_str()).collect();
            report.push(format!("warning: convergence not established for {}", bad.join(", ")));
            true
        }
        Err(e) => {
            report.push(format!("warning: convergence diagnostics unavailable: {e}"));
            true
        }
    };
    Ok(Outcome { report, convergence_warning: warning })
}

fn cmd_fit(cfg: &RunConfig) -> Result<Outcome> {
    let settings = cfg.fit_settings()?;
    let (population, events) = observed_data(cfg)?;
    let post = posterior(cfg, &population, &events)?;
    let result = fit(&post, &settings)?;

    let mut out = Outputs::new(&cfg.output.dir);
    for (k, chain) in result.chains.iter().enumerate() {
        out.add(draws_file(k), |w| io::write_draws(chain, &result.names, w))?;
    }
    let outcome = diagnostics_table(&result.names, &result.chains, &mut out)?;
    let manifest = toml::to_string(&manifest(cfg, &result)).map_err(|e| Error::config(e.to_string()))?;
    out.add("manifest.toml", |w| {
        w.extend_from_slice(manifest.as_bytes());
        Ok(())
    })?;
    // later `dic` and `predict` runs rebuild the model from this copy
    let resolved = cfg.to_toml()?;
    out.add("config.toml", |w| {
        w.extend_from_slice(resolved.as_bytes());
        Ok(())
    })?;
    out.commit()?;
    Ok(outcome)
}

/// Reads `draws_chain0.csv`, `draws_chain1.csv`, ... from `dir`.
fn read_chains(dir: &Path) -> Result<(Vec<String>, Vec<ChainOutput<f64>>)> {
    let mut chains = Vec::new();
    let mut names: Option<Vec<String>> = None;
    for k in 0.. {
        let path = dir.join(draws_file(k));
        if !path.exists() {
            break;
        }
        let table: io::DrawTable<f64> = io::read_draws(io::open(&path)?)?;
        match &names {
            Some(n) if *n != table.names => {
                return Err(Error::input(format!("{} names different parameters", path.display())))
            }
            _ => names = Some(table.names.clone()),
        }
        let dim = table.names.len();
        chains.push(ChainOutput {
            iterations: table.iterations,
            draws: table.draws,
            log_density: table.log_post,
            acceptance: Vec::new(),
            acceptance_after_burn_in: Vec::new(),
            plan: crate::mcmc::ProposalPlan { blocks: Vec::new() },
            seed: 0,
            stream: 0,
            burn_in: 0,
            thin: 1,
            initial: vec![0.0; dim],
        });
    }
    match names {
        Some(n) => Ok((n, chains)),
        None => Err(Error::input(format!("no draws files ({}) in {}", draws_file(0), dir.display()))),
    }
}

fn cmd_diagnose(cfg: &RunConfig) -> Result<Outcome> {
    let (names, chains) = read_chains(&cfg.output.dir)?;
    let mut out = Outputs::new(&cfg.output.dir);
    let outcome = diagnostics_table(&names, &chains, &mut out)?;
    out.commit()?;
    Ok(outcome)
}

struct DicRow {
    run: String,
    kernel: String,
    change_points: String,
    report: crate::diagnostics::DicReport<f64>,
}

fn cmd_dic(cfg: &RunConfig) -> Result<Outcome> {
    let runs = &cfg.dic.as_ref().ok_or_else(|| Error::config("missing [dic] block"))?.runs;
    if runs.is_empty() {
        return Err(Error::config("[dic] runs is empty"));
    }
    let mut rows = Vec::new();
    for dir in runs {
        let run_cfg = RunConfig::load(&dir.join("config.toml"))?;
        let (population, events) = observed_data(&run_cfg)?;
        let post = posterior(&run_cfg, &population, &events)?;
        let (names, chains) = read_chains(dir)?;
        if names != post.names() {
            return Err(Error::input(format!("draws in {} do not match its model", dir.display())));
        }
        let draws: Vec<Vec<f64>> = chains.iter().flat_map(|c| c.draws.iter().cloned()).collect();
        let trace: Vec<f64> = chains.iter().flat_map(|c| c.log_density.iter().copied()).collect();
        let report = dic(&draws, &trace, |t| post.log_likelihood(t), |t| post.log_posterior(t))?;
        let m = &run_cfg.model;
        rows.push(DicRow {
            run: dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned()),
            kernel: m.kernel.to_string(),
            change_points: if m.estimate_change_points {
                "estimated".into()
            } else {
                m.change_points.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";")
            },
            report,
        });
    }
    rows.sort_by(|a, b| a.report.dic.total_cmp(&b.report.dic).then_with(|| a.run.cmp(&b.run)));

    let mut out = Outputs::new(&cfg.output.dir);
    out.add("dic.csv", |w| {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["run", "kernel", "change_points", "mean_deviance", "deviance_at_plug_in", "p_d", "dic", "plug_in"])?;
        for r in &rows {
            let plug = match r.report.plug_in {
                PlugIn::PosteriorMean(_) => "posterior-mean",
                PlugIn::HighestPosteriorDraw(_) => "highest-posterior-draw",
            };
            w.write_record([
                r.run.clone(),
                r.kernel.clone(),
                r.change_points.clone(),
                r.report.mean_deviance.to_string(),
                r.report.deviance_at_plug_in.to_string(),
                r.report.p_d.to_string(),
                r.report.dic.to_string(),
                plug.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    out.commit()?;
    Ok(Outcome {
        report: rows.iter().map(|r| format!("{}: DIC {:.2} (p_D {:.2})", r.run, r.report.dic, r.report.p_d)).collect(),
        convergence_warning: false,
    })
}

fn cmd_predict(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.model_spec()?;
    let (population, events) = observed_data(cfg)?;
    let dir = cfg.predict.draws_dir.as_ref().unwrap_or(&cfg.output.dir);
    let (names, chains) = read_chains(dir)?;
    if names != model.layout().names() {
        return Err(Error::input(format!("draws in {} do not match the model", dir.display())));
    }
    let draws: Vec<Vec<f64>> = chains.iter().flat_map(|c| c.draws.iter().cloned()).collect();
    let env = predict(&draws, &events, &population, &model, cfg.predict.replicates, cfg.seed)?;
    let observed = epidemic_curve(&events);
    let cov = coverage(&env, &observed)?;
    let line = format!("coverage {cov}");
    let mut out = Outputs::new(&cfg.output.dir);
    out.add("envelope.csv", |w| io::write_envelope(&env, w))?;
    out.add("coverage.txt", |w| {
        w.extend_from_slice(format!("{line}\n").as_bytes());
        Ok(())
    })?;
    out.commit()?;
    Ok(Outcome { report: vec![line], convergence_warning: false })
}

