//! `elond simulate`: Monte Carlo batteries written to trajectory and summary CSVs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use elond::eprocess::PValueSource;
use elond::simlab::covariate::run_wcs_trial;
use elond::simlab::fcr::run_fcr_trial;
use elond::simlab::local_dep::run_local_dep_trial;
use elond::simlab::sharpness::run_sharpness_trial;
use elond::simlab::wor::{run_wor_trial, WorPopulations};
use elond::simlab::{summarize, GateSettings, TrialOutput};
use elond::{run_trials, DiscountSequence, DrawMode, Execution, ProcedureKind};

use crate::config::{resolve_out_dir, FileConfig, SeedSpec, DEFAULT_SEED, DEFAULT_TRIALS};

pub const TRAJECTORY_SCHEMA: &str = "# elond trajectory v1";
pub const SUMMARY_SCHEMA: &str = "# elond summary v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    LocalDep,
    Wor,
    Sharpness,
    Wcs,
    Fcr,
}

impl Scenario {
    fn slug(self) -> &'static str {
        match self {
            Scenario::LocalDep => "local-dep",
            Scenario::Wor => "wor",
            Scenario::Sharpness => "sharpness",
            Scenario::Wcs => "wcs",
            Scenario::Fcr => "fcr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PSourceArg {
    Stopped,
    FullBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DrawModeArg {
    Shared,
    Independent,
}

impl From<DrawModeArg> for DrawMode {
    fn from(m: DrawModeArg) -> Self {
        match m {
            DrawModeArg::Shared => DrawMode::Shared,
            DrawModeArg::Independent => DrawMode::Independent,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(value_enum)]
    pub scenario: Scenario,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Master seed, or `random` to draw one from the OS.
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Output directory. Falls back to `ELOND_OUT_DIR`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run trials on one thread.
    #[arg(long)]
    pub sequential: bool,
    /// Comma-separated procedure names.
    #[arg(long, value_delimiter = ',')]
    pub procedures: Option<Vec<String>>,
    /// LORD* initial wealth.
    #[arg(long)]
    pub w0: Option<f64>,
    /// Dependence lag; also the LORD* conflict lag.
    #[arg(long)]
    pub lag: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, value_enum)]
    pub p_value_source: Option<PSourceArg>,
    #[arg(long, value_enum)]
    pub draw_mode: Option<DrawModeArg>,
    /// Comma-separated steps reported in the summary file.
    #[arg(long, value_delimiter = ',')]
    pub summary_horizons: Option<Vec<usize>>,
}

/// Paths written by one run.
#[derive(Debug)]
pub struct SimulationOutput {
    pub seed: u64,
    pub trajectory: PathBuf,
    pub summary: PathBuf,
}

struct Common {
    execution: Execution,
    alpha: Option<f64>,
    lag: Option<usize>,
    horizon: Option<usize>,
    procedures: Option<Vec<String>>,
    w0: Option<f64>,
    p_value_source: PValueSource,
    draw_mode: DrawMode,
    discount: Option<DiscountSequence>,
}

impl Common {
    fn gate_settings(&self, default_alpha: f64, lag: usize) -> Result<GateSettings> {
        let mut settings = GateSettings::standard(self.alpha.unwrap_or(default_alpha), lag);
        if let Some(names) = &self.procedures {
            settings.procedures = names
                .iter()
                .map(|n| ProcedureKind::parse(n.trim()))
                .collect::<elond::Result<_>>()?;
        }
        for kind in &mut settings.procedures {
            if let ProcedureKind::LordStar { w0, lag: l } = kind {
                *l = lag;
                if let Some(v) = self.w0 {
                    *w0 = v;
                }
            }
        }
        if let Some(d) = &self.discount {
            settings.discount = d.clone();
        }
        settings.p_value_source = self.p_value_source;
        settings.draw_mode = self.draw_mode;
        settings.validate()?;
        for &kind in &settings.procedures {
            elond::OnlineProcedure::new(kind, settings.alpha, settings.discount.clone())?;
        }
        Ok(settings)
    }

    fn no_procedure_choice(&self, scenario: Scenario) -> Result<()> {
        if self.procedures.is_some() || self.w0.is_some() {
            bail!("the {} scenario runs a fixed set of procedures", scenario.slug());
        }
        Ok(())
    }
}

pub fn run(args: SimulateArgs) -> Result<SimulationOutput> {
    let cfg = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let seed = match &args.seed {
        Some(s) => SeedSpec::parse(s)?,
        None => cfg.seed()?.unwrap_or(SeedSpec::Fixed(DEFAULT_SEED)),
    }
    .resolve();
    let trials = args.trials.or(cfg.trials).unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        bail!("trials must be positive");
    }
    let alpha = args.alpha.or(cfg.alpha);
    if let Some(a) = alpha {
        if !(a > 0.0 && a < 1.0) {
            bail!("α must lie in (0, 1), got {a}");
        }
    }
    if let Some(d) = &cfg.discount {
        d.validate()?;
    }
    let common = Common {
        execution: if args.sequential {
            Execution::Sequential
        } else {
            cfg.execution.unwrap_or_default()
        },
        alpha,
        lag: args.lag,
        horizon: args.horizon,
        procedures: args.procedures.clone().or(cfg.procedures.clone()),
        w0: args.w0.or(cfg.w0),
        p_value_source: match args.p_value_source {
            Some(PSourceArg::Stopped) => PValueSource::Stopped,
            Some(PSourceArg::FullBudget) => PValueSource::FullBudget,
            None => cfg.p_value_source.unwrap_or_default(),
        },
        draw_mode: args.draw_mode.map(Into::into).or(cfg.draw_mode).unwrap_or_default(),
        discount: cfg.discount.clone(),
    };

    let outputs = match args.scenario {
        Scenario::LocalDep => {
            let mut sc = cfg.local_dep.clone();
            sc.horizon = common.horizon.unwrap_or(sc.horizon);
            sc.lag = common.lag.unwrap_or(sc.lag);
            sc.validate()?;
            let settings = common.gate_settings(0.3, sc.lag)?;
            run_trials(trials, seed, common.execution, |_, s| run_local_dep_trial(&sc, &settings, s))?
        }
        Scenario::Wor => {
            let mut sc = cfg.wor.clone();
            sc.horizon = common.horizon.unwrap_or(sc.horizon);
            sc.validate()?;
            let settings = common.gate_settings(0.05, common.lag.unwrap_or(0))?;
            let pops = WorPopulations::build(&sc)?;
            run_trials(trials, seed, common.execution, |_, s| run_wor_trial(&sc, &pops, &settings, s))?
        }
        Scenario::Sharpness => {
            common.no_procedure_choice(args.scenario)?;
            let mut sc = cfg.sharpness.clone();
            sc.horizon = common.horizon.unwrap_or(sc.horizon);
            sc.alpha = common.alpha.unwrap_or(sc.alpha);
            if let Some(d) = &common.discount {
                sc.discount = d.clone();
            }
            sc.validate()?;
            run_trials(trials, seed, common.execution, |_, s| run_sharpness_trial(&sc, s))?
        }
        Scenario::Fcr => {
            common.no_procedure_choice(args.scenario)?;
            let mut sc = cfg.fcr.clone();
            sc.horizon = common.horizon.unwrap_or(sc.horizon);
            sc.lag = common.lag.unwrap_or(sc.lag);
            sc.validate()?;
            let alpha = common.alpha.unwrap_or(0.1);
            let discount = common.discount.clone().unwrap_or_default();
            let draw_mode = common.draw_mode;
            run_trials(trials, seed, common.execution, |_, s| {
                run_fcr_trial(&sc, alpha, &discount, draw_mode, s).map(|(out, _)| out)
            })?
        }
        Scenario::Wcs => {
            let mut sc = cfg.wcs.clone();
            sc.horizon = common.horizon.unwrap_or(sc.horizon);
            sc.validate()?;
            let settings = common.gate_settings(0.1, common.lag.unwrap_or(0))?;
            run_trials(trials, seed, common.execution, |_, s| {
                run_wcs_trial(&sc, &settings, s).map(|(out, _, _)| out)
            })?
        }
    };

    let horizon = outputs[0][0].records.len();
    let horizons = summary_horizons(args.summary_horizons.or(cfg.summary_horizons), horizon)?;
    let dir = resolve_out_dir(args.out, cfg.out_dir);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let trajectory = dir.join(format!("{}-trajectory.csv", args.scenario.slug()));
    let summary = dir.join(format!("{}-summary.csv", args.scenario.slug()));
    write_trajectory(&trajectory, &outputs)?;
    write_summary(&summary, &outputs, &horizons)?;
    Ok(SimulationOutput {
        seed,
        trajectory,
        summary,
    })
}

fn summary_horizons(requested: Option<Vec<usize>>, horizon: usize) -> Result<Vec<usize>> {
    let mut hs = requested.unwrap_or_else(|| vec![horizon / 4, horizon / 2, horizon]);
    hs.retain(|&h| h > 0);
    if let Some(&bad) = hs.iter().find(|&&h| h > horizon) {
        bail!("summary horizon {bad} exceeds the stream length {horizon}");
    }
    hs.sort_unstable();
    hs.dedup();
    if hs.is_empty() {
        bail!("no positive summary horizons");
    }
    Ok(hs)
}

fn csv_writer(path: &Path, schema: &str) -> Result<csv::Writer<BufWriter<File>>> {
    let mut file = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(file, "{schema}")?;
    Ok(csv::Writer::from_writer(file))
}

// `{}` on f64 prints the shortest string that round-trips.
fn num(x: f64) -> String {
    format!("{x}")
}

fn write_trajectory(path: &Path, outputs: &[TrialOutput]) -> Result<()> {
    let mut w = csv_writer(path, TRAJECTORY_SCHEMA)?;
    w.write_record(["trial", "t", "procedure", "alpha_t", "statistic", "rejected", "is_null"])?;
    for (trial, out) in outputs.iter().enumerate() {
        for run in out {
            for r in &run.records {
                w.write_record([
                    trial.to_string(),
                    r.index.to_string(),
                    run.procedure.clone(),
                    num(r.level.get()),
                    num(r.statistic.value()),
                    r.rejected.to_string(),
                    r.is_null.map(|b| b.to_string()).unwrap_or_default(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_summary(path: &Path, outputs: &[TrialOutput], horizons: &[usize]) -> Result<()> {
    let mut w = csv_writer(path, SUMMARY_SCHEMA)?;
    w.write_record(["procedure", "horizon", "FDR", "FDR_SE", "power", "power_SE"])?;
    for (name, s) in summarize(outputs)? {
        for &h in horizons {
            let (f, p) = (s.fdr_at(h), s.power_at(h));
            w.write_record([name.clone(), h.to_string(), num(f.mean), num(f.se), num(p.mean), num(p.se)])?;
        }
    }
    w.flush()?;
    Ok(())
}
