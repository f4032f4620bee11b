//! Command-line front end shared by the `bdcert` binary.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bounds::{ergodicity_report, DecayEnvelope, ErgodicityReport, ReportOptions, WeightSequence};
use crate::error::{Error, Result};
use crate::mc::{simulate, SimConfig};
use crate::model::IntensityModel;
use crate::presets::{self, Preset};
use crate::profile::Profile;
use crate::report::{preset_report, profile_table};
use crate::solver::{integrate, limiting_regime, IntegrateOptions, ProbabilityVector, RegimeOptions};
use crate::truncation::{
    certificate_at, select_truncation, BoundCertificate, Constants, Criterion, TruncationSetup, DEFAULT_LEVEL_CAP,
};

#[derive(Debug, Parser)]
#[command(name = "bdcert", version, about = "Certified truncation bounds for periodic birth-death processes with catastrophes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Contraction rates, decay envelopes and bound constants.
    Bounds(Common),
    /// Smallest truncation level meeting the target over the window.
    Truncate(Common),
    /// Integrate the truncated forward equations.
    Solve(SolveArgs),
    /// One period of the limiting regime with its certificate.
    Regime(Common),
    /// Monte Carlo estimates by thinning.
    Simulate(SimulateArgs),
    /// Computed constants against the published ones.
    Report(Common),
    /// Write a model description as a config file.
    Config(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Built-in model: example1 .. example4.
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// JSON model description.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-5)]
    pub target: f64,
    /// Number of servers in `Pr(X <= S)`.
    #[arg(long = "S")]
    pub servers: Option<usize>,
    /// unit | linear | geometric:R | geometric-linear:R:N0 | explicit:d0,d1,...
    #[arg(long)]
    pub weights: Option<String>,
    /// Time window `a,b`.
    #[arg(long, value_parser = parse_window)]
    pub window: Option<[f64; 2]>,
    #[arg(long)]
    pub step: Option<f64>,
    /// Use the published constants of the preset instead of self-certified ones.
    #[arg(long)]
    pub paper_constants: bool,
    /// tv | mean | both
    #[arg(long)]
    pub criterion: Option<Criterion>,
    /// Initial state.
    #[arg(long, default_value_t = 0)]
    pub initial: usize,
    /// Nodes per period for sampled profiles.
    #[arg(long, default_value_t = crate::bounds::DEFAULT_PROFILE_GRID)]
    pub grid: usize,
    /// Output directory for JSON and CSV artifacts.
    #[arg(long, env = "BDCERT_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    /// Truncation level; chosen from the target when omitted.
    #[arg(long)]
    pub level: Option<usize>,
    /// End time; defaults to the window end.
    #[arg(long)]
    pub until: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Observation times `t1,t2,...`; defaults to 11 points across the window.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
}

fn parse_window(s: &str) -> std::result::Result<[f64; 2], String> {
    let (a, b) = s
        .split_once(',')
        .or_else(|| s.split_once(':'))
        .ok_or_else(|| format!("window must be `a,b`, got `{s}`"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok([a, b])
}

/// Model file: either a bare model or a model with run defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub model: IntensityModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub servers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let mut c: ConfigFile = if v.get("model").is_some() {
            serde_json::from_value(v)?
        } else {
            ConfigFile {
                model: serde_json::from_value(v)?,
                weights: None,
                servers: None,
                window: None,
            }
        };
        c.model.validate()?;
        Ok(c)
    }

    pub fn from_preset(p: &Preset) -> Self {
        ConfigFile {
            model: p.model.clone(),
            weights: Some(p.weights.to_string()),
            servers: Some(p.servers),
            window: Some(p.window),
        }
    }
}

/// Model and run defaults resolved from the flags.
pub struct Resolved {
    pub name: String,
    pub model: IntensityModel,
    pub weights: WeightSequence,
    pub servers: usize,
    pub window: Option<[f64; 2]>,
    pub preset: Option<Preset>,
}

impl Common {
    pub fn resolve(&self) -> Result<Resolved> {
        let (name, model, weights, servers, window, preset) = match (&self.preset, &self.config) {
            (Some(p), _) => {
                let p = presets::by_name(p)?;
                (
                    p.name.clone(),
                    p.model.clone(),
                    p.weights.clone(),
                    p.servers,
                    Some(p.window),
                    Some(p),
                )
            }
            (None, Some(path)) => {
                let c = ConfigFile::parse(&fs::read_to_string(path)?)?;
                let weights = match &c.weights {
                    Some(w) => w.parse()?,
                    None => WeightSequence::unit(),
                };
                let name = path.file_stem().map_or("config".into(), |s| s.to_string_lossy().into_owned());
                (name, c.model, weights, c.servers.unwrap_or(0), c.window, None)
            }
            (None, None) => return Err(Error::InvalidArgument("give --preset or --config".into())),
        };
        let weights = match &self.weights {
            Some(w) => w.parse()?,
            None => weights,
        };
        Ok(Resolved {
            name,
            model,
            weights,
            servers: self.servers.unwrap_or(servers),
            window: self.window.or(window),
            preset,
        })
    }

    fn report_options(&self) -> ReportOptions {
        ReportOptions {
            grid: self.grid,
            probe: None,
        }
    }

    fn published(&self, r: &Resolved) -> Result<Option<Preset>> {
        if !self.paper_constants {
            return Ok(None);
        }
        r.preset
            .clone()
            .map(Some)
            .ok_or_else(|| Error::InvalidArgument("--paper-constants needs --preset".into()))
    }
}

struct Sink<'a> {
    out: Option<PathBuf>,
    stdout: &'a mut dyn Write,
}

impl Sink<'_> {
    fn file(&self, name: &str) -> Result<Option<PathBuf>> {
        match &self.out {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                Ok(Some(dir.join(name)))
            }
            None => Ok(None),
        }
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        writeln!(self.stdout, "{text}")?;
        if let Some(p) = self.file(name)? {
            fs::write(p, &text)?;
        }
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<Option<PathBuf>> {
        let Some(path) = self.file(name)? else {
            return Ok(None);
        };
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(Some(path))
    }
}

/// Replaces the self-certified envelopes and `beta**` with published values.
fn pin_report(rep: &mut ErgodicityReport, p: &Preset) {
    let c = &p.published;
    rep.envelope = DecayEnvelope::pinned(c.m, c.a, "beta_star");
    rep.diagonal_bound.declared = Some(c.l);
    rep.theta = c.theta;
    if let Some(w) = rep.weighted.as_mut() {
        w.envelope = DecayEnvelope::pinned(c.m1, c.a1, "beta_double_star");
        w.beta_double_star = Profile::closed(c.beta_double_star.clone());
    }
}

fn constants(c: &Common, r: &Resolved) -> Result<(Constants, ErgodicityReport)> {
    let mut rep = ergodicity_report(&r.model, Some(&r.weights), &c.report_options())?;
    if let Some(p) = c.published(r)? {
        pin_report(&mut rep, &p);
        return Ok((p.published.constants(), rep));
    }
    Ok((Constants::from_report(&rep)?, rep))
}

/// First integer time at which `2 exp(-int beta*)` is at most `target`.
fn default_window(rep: &ErgodicityReport, period: f64, target: f64) -> [f64; 2] {
    let mut t = 0.0;
    while crate::bounds::ergodicity_bound(&rep.beta_star, &rep.envelope, t).best() > target && t < 1e5 {
        t += 1.0;
    }
    [t, t + period]
}

fn truncate(c: &Common, r: &Resolved) -> Result<(BoundCertificate, ErgodicityReport)> {
    let (k, rep) = constants(c, r)?;
    let window = r.window.unwrap_or_else(|| default_window(&rep, r.model.period, c.target));
    let setup = TruncationSetup::new(&r.model, r.weights.clone(), k, c.initial)?;
    let criterion = c.criterion.unwrap_or_default();
    let cert = if c.paper_constants && c.window.is_none() {
        let p = c.published(r)?.expect("published constants imply a preset");
        certificate_at(&setup, p.published.level, p.published.window, criterion, c.target)?
    } else {
        select_truncation(&setup, c.target, window, criterion, DEFAULT_LEVEL_CAP)?
    };
    Ok((cert, rep))
}

/// Runs one command, writing the primary JSON to `stdout`. Returns whether
/// every requested certificate met its target.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<bool> {
    match &cli.command {
        Command::Bounds(c) => {
            let r = c.resolve()?;
            let mut rep = ergodicity_report(&r.model, Some(&r.weights), &c.report_options())?;
            if let Some(p) = c.published(&r)? {
                pin_report(&mut rep, &p);
            }
            let mut sink = Sink { out: c.out.clone(), stdout };
            sink.csv(
                "beta_star.csv",
                &["t", "beta_star"],
                profile_table(&rep.beta_star, 200).into_iter().map(|x| x.to_vec()),
            )?;
            if let Some(w) = &rep.weighted {
                sink.csv(
                    "beta_double_star.csv",
                    &["t", "beta_double_star"],
                    profile_table(&w.beta_double_star, 200).into_iter().map(|x| x.to_vec()),
                )?;
            }
            sink.json("bounds.json", &rep)?;
            Ok(true)
        }
        Command::Truncate(c) => {
            let r = c.resolve()?;
            let (cert, _) = truncate(c, &r)?;
            let met = cert.met;
            Sink { out: c.out.clone(), stdout }.json("certificate.json", &cert)?;
            Ok(met)
        }
        Command::Solve(s) => {
            let c = &s.common;
            let r = c.resolve()?;
            let level = match s.level {
                Some(n) => n,
                None => truncate(c, &r)?.0.level,
            };
            let until = s.until.or(r.window.map(|w| w[1])).unwrap_or(r.model.period);
            let opts = IntegrateOptions {
                step: c.step,
                ..Default::default()
            };
            let traj = integrate(&r.model, &ProbabilityVector::delta(c.initial, level)?, until, &opts)?;
            let mut sink = Sink { out: c.out.clone(), stdout };
            let rows = traj.states.iter().map(|p| {
                let q = p.clamped();
                vec![p.time, q.values[0], q.at_most(r.servers), q.mean(), p.total()]
            });
            sink.csv("trajectory.csv", &["t", "p0", "p_le_s", "mean", "mass"], rows)?;
            let last = traj.last().clamped();
            sink.json(
                "solve.json",
                &serde_json::json!({
                    "model": r.name,
                    "level": level,
                    "step": traj.step,
                    "error_estimate": traj.error_estimate,
                    "final": { "t": last.time, "p0": last.values[0], "p_le_s": last.at_most(r.servers), "mean": last.mean() },
                }),
            )?;
            Ok(true)
        }
        Command::Regime(c) => {
            let r = c.resolve()?;
            let published = c.published(&r)?;
            let opts = RegimeOptions {
                constants: published.as_ref().map(|p| p.published.constants()),
                window_start: r.window.map(|w| w[0]),
                integrate: IntegrateOptions {
                    step: c.step,
                    ..Default::default()
                },
                report: c.report_options(),
                criterion: c.criterion.unwrap_or(crate::truncation::Criterion::Both),
                ..Default::default()
            };
            let reg = limiting_regime(&r.model, &r.weights, c.target, r.servers, &opts)?;
            let met = reg.met && reg.periodicity_ok;
            let mut sink = Sink { out: c.out.clone(), stdout };
            let rows = (0..reg.times.len()).map(|k| {
                vec![
                    reg.times[k],
                    reg.p0[k],
                    reg.at_most_servers[k],
                    reg.mean[k],
                    reg.tv_bound[k],
                    reg.mean_bound[k].unwrap_or(f64::NAN),
                ]
            });
            sink.csv("regime.csv", &["t", "p0", "p_le_s", "mean", "tv_bound", "mean_bound"], rows)?;
            sink.json("regime.json", &reg)?;
            Ok(met)
        }
        Command::Simulate(s) => {
            let c = &s.common;
            let r = c.resolve()?;
            let w = r.window.unwrap_or([0.0, r.model.period]);
            let times = s
                .times
                .clone()
                .unwrap_or_else(|| (0..=10).map(|k| w[0] + (w[1] - w[0]) * k as f64 / 10.0).collect());
            let cfg = SimConfig {
                paths: s.paths,
                seed: s.seed,
                initial_state: c.initial,
                majorant: None,
                servers: r.servers,
            };
            let res = simulate(&r.model, &cfg, &times)?;
            let mut sink = Sink { out: c.out.clone(), stdout };
            if let Some(p) = sink.file("simulation.csv")? {
                res.write_csv(&p)?;
            }
            sink.json("simulation.json", &res)?;
            Ok(true)
        }
        Command::Report(c) => {
            let list = match &c.preset {
                Some(name) => vec![presets::by_name(name)?],
                None => presets::all(),
            };
            let mut reports = Vec::new();
            for p in &list {
                let rep = preset_report(p, &c.report_options())?;
                write!(stdout, "{}", rep.to_table())?;
                reports.push(rep);
            }
            let sink = Sink { out: c.out.clone(), stdout };
            if let Some(p) = sink.file("report.json")? {
                fs::write(p, serde_json::to_string_pretty(&reports)?)?;
            }
            Ok(true)
        }
        Command::Config(c) => {
            let r = c.resolve()?;
            let cfg = ConfigFile {
                model: r.model.clone(),
                weights: Some(r.weights.to_string()),
                servers: Some(r.servers),
                window: r.window,
            };
            Sink { out: c.out.clone(), stdout }.json(&format!("{}.json", r.name), &cfg)?;
            Ok(true)
        }
    }
}

/// Machine-readable error object.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "message": e.to_string() }).to_string()
}
