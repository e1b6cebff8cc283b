//! `qblow`: command-line driver for the blowup pipeline.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use quintic_blowup::duhamel::{find_blowup_time, FixedPointSolver, NoForcing, SolveConfig};
use quintic_blowup::ensemble::{self, normalized_template, Ensemble, EnsembleConfig, Template};
use quintic_blowup::free_wave::{CauchyData, FreeWaveEvaluator};
use quintic_blowup::nlw_direct::{estimate_blowup_time, evolve, perturbed_ode_state, write_trace_csv, DirectConfig};
use quintic_blowup::randomization::{CoefficientLaw, RandomSeed};
use quintic_blowup::similarity::TauGrid;

#[derive(Parser)]
#[command(name = "qblow", version, about = "Stable ODE blowup of the quintic wave equation under randomized data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline for one sample and print its record.
    Sample {
        #[command(flatten)]
        opts: Options,
        /// Sample index within the master seed's stream.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Direct Cartesian evolution of the perturbed ODE blowup.
    Evolve {
        #[command(flatten)]
        opts: Options,
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Solve the modified Duhamel equation, at a given blowup time or with
    /// blowup-time selection.
    Fixedpoint {
        #[command(flatten)]
        opts: Options,
        #[arg(long, default_value_t = 0)]
        index: u64,
        /// Trial blowup time; omit to search `[1−δ, 1+δ]`.
        #[arg(long)]
        blowup_time: Option<f64>,
    },
    /// Run an ensemble over the `eps × delta` grid, appending JSONL records.
    Ensemble {
        #[command(flatten)]
        opts: Options,
    },
    /// Summarize a JSONL record file into CSV and SVG.
    Report {
        /// Records written by `ensemble`.
        records: PathBuf,
        #[command(flatten)]
        opts: Options,
    },
}

/// Flags shared by all subcommands. Every field can also be set in the
/// `--config` TOML file; flags take precedence.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Options {
    /// TOML file with any of the keys below.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Master seed of the coefficient streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Perturbation size(s) in the H^s × H^{s−1} norm (comma separated).
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Bracket half-width(s) around T = 1 (comma separated).
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<f64>>,
    /// Sobolev index of the perturbation.
    #[arg(long)]
    s: Option<f64>,
    /// bump, oscillatory or rough.
    #[arg(long)]
    template: Option<String>,
    /// standard-gaussian, rademacher, uniform-symmetric or identity.
    #[arg(long)]
    law: Option<String>,
    /// Radial resolution: nodes on the unit ball for the similarity solver,
    /// intervals on [0, 4] for `evolve`.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    tau_max: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output file or directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Samples per cell for `ensemble`.
    #[arg(long)]
    samples: Option<usize>,
}

impl Options {
    /// Fills unset flags from the config file.
    fn resolve(self) -> Result<Options> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let file: Options = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(Options {
            config: self.config,
            seed: self.seed.or(file.seed),
            eps: self.eps.or(file.eps),
            delta: self.delta.or(file.delta),
            s: self.s.or(file.s),
            template: self.template.or(file.template),
            law: self.law.or(file.law),
            grid: self.grid.or(file.grid),
            tau_max: self.tau_max.or(file.tau_max),
            workers: self.workers.or(file.workers),
            out: self.out.or(file.out),
            samples: self.samples.or(file.samples),
        })
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn eps_list(&self) -> Vec<f64> {
        self.eps.clone().unwrap_or_else(|| vec![1e-3])
    }

    fn delta_list(&self) -> Vec<f64> {
        self.delta.clone().unwrap_or_else(|| vec![0.1])
    }

    fn eps(&self) -> f64 {
        self.eps_list()[0]
    }

    fn delta(&self) -> f64 {
        self.delta_list()[0]
    }

    fn s(&self) -> f64 {
        self.s.unwrap_or(0.71)
    }

    fn template(&self) -> Result<Template> {
        Ok(self.template.as_deref().unwrap_or("bump").parse()?)
    }

    fn law(&self) -> Result<CoefficientLaw> {
        Ok(self.law.as_deref().unwrap_or("standard-gaussian").parse()?)
    }

    fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
    }

    fn ensemble_config(&self) -> Result<EnsembleConfig> {
        let mut cfg = EnsembleConfig {
            template: self.template()?,
            s: self.s(),
            law: self.law()?,
            master_seed: self.seed(),
            ..EnsembleConfig::default()
        };
        cfg.solve = self.solve_config(cfg.solve)?;
        Ok(cfg)
    }

    fn solve_config(&self, base: SolveConfig) -> Result<SolveConfig> {
        let tau_max = self.tau_max.unwrap_or(base.taus.tau_max);
        let per_unit = base.taus.n_steps as f64 / base.taus.tau_max;
        let taus = TauGrid::new(tau_max, (tau_max * per_unit).round().max(4.0) as usize)?;
        Ok(SolveConfig {
            delta: self.delta(),
            rho_nodes: self.grid.unwrap_or(base.rho_nodes),
            taus,
            ..base
        })
    }

    fn perturbation(&self, index: u64) -> Result<CauchyData> {
        let unit = normalized_template(self.template()?, self.s(), 1.0)?;
        Ok(unit.randomized(self.law()?, RandomSeed::new(self.seed(), index))?.scaled(self.eps()))
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run_sample(opts: Options, index: u64) -> Result<()> {
    let mut cfg = opts.ensemble_config()?;
    cfg.direct_check = true;
    let ens = Ensemble::new(cfg)?;
    let record = ens.run_sample(opts.eps(), opts.delta(), index);
    write_or_print(opts.out.as_deref(), &serde_json::to_string_pretty(&record)?)
}

fn run_evolve(opts: Options, index: u64) -> Result<()> {
    let data = opts.perturbation(index)?;
    let cfg = DirectConfig { n_intervals: opts.grid.unwrap_or(DirectConfig::default().n_intervals), ..DirectConfig::default() };
    let evo = evolve(perturbed_ode_state(&data, cfg.grid()?)?, &cfg, &[], |_| {})?;
    if let Some(p) = &opts.out {
        write_trace_csv(p, &evo.trace)?;
    }
    let estimate = estimate_blowup_time(&evo.times(), &evo.origin_values())?;
    let summary = serde_json::json!({
        "blowup": evo.blowup,
        "steps": evo.trace.len(),
        "energy_drift_rate": evo.energy_drift_rate_until(0.9),
        "drift_window_end": 0.9,
        "estimate": estimate,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn run_fixedpoint(opts: Options, index: u64, blowup_time: Option<f64>) -> Result<()> {
    let solver = FixedPointSolver::new(opts.solve_config(SolveConfig::default())?)?;
    let data = opts.perturbation(index)?;
    let zero = opts.eps() == 0.0;
    let evaluator = FreeWaveEvaluator::new(&data)?;
    let forcing: &dyn quintic_blowup::duhamel::ForcingSource = if zero { &NoForcing } else { &evaluator };
    let value = match blowup_time {
        Some(t) => {
            let fp = solver.unstable_coefficient(t, forcing)?;
            serde_json::json!({ "blowup_time": t, "solve": fp.summary() })
        }
        None => {
            let bt = find_blowup_time(&solver, forcing)?;
            serde_json::json!({
                "blowup_time": bt.blowup_time,
                "bisection_steps": bt.bisection_steps,
                "solve": bt.fixed_point.summary(),
            })
        }
    };
    write_or_print(opts.out.as_deref(), &serde_json::to_string_pretty(&value)?)
}

fn run_ensemble(opts: Options) -> Result<()> {
    let n = opts.samples.unwrap_or(100);
    if n == 0 {
        bail!("need at least one sample per cell");
    }
    let ens = Ensemble::new(opts.ensemble_config()?)?;
    let cells: Vec<(f64, f64)> = opts
        .eps_list()
        .iter()
        .flat_map(|e| opts.delta_list().into_iter().map(move |d| (*e, d)))
        .collect();
    let sink = opts.out.clone().unwrap_or_else(|| PathBuf::from("records.jsonl"));
    let (records, report) = ens.run(&cells, n, opts.workers(), Some(&sink))?;
    print!("{}", ensemble::summary_csv(&report));
    eprintln!(
        "{} records in {}; fit {:?}; monotone {}",
        records.len(),
        sink.display(),
        report.fit.map(|f| (f.slope, f.r_squared)),
        report.is_monotone()
    );
    Ok(())
}

fn run_report(records: &Path, opts: Options) -> Result<()> {
    let out = opts.out.clone().unwrap_or_else(|| PathBuf::from("report"));
    let res = ensemble::report(records, &out, EnsembleConfig::default().norm_constant)?;
    eprintln!(
        "{} records, {} malformed lines skipped, summary in {}",
        res.records,
        res.skipped_lines,
        out.join("summary.csv").display()
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Sample { opts, index } => run_sample(opts.resolve()?, index),
        Command::Evolve { opts, index } => run_evolve(opts.resolve()?, index),
        Command::Fixedpoint { opts, index, blowup_time } => run_fixedpoint(opts.resolve()?, index, blowup_time),
        Command::Ensemble { opts } => run_ensemble(opts.resolve()?),
        Command::Report { records, opts } => run_report(&records, opts.resolve()?),
    }
}
