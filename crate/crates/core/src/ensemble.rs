//! Monte Carlo driver: randomized perturbations of the ODE blowup, the full
//! similarity pipeline per sample, persistence, and aggregate statistics.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::mixed_norm;
use crate::duhamel::{find_blowup_time, FixedPointSolver, SolveConfig, SolveSummary};
use crate::error::{Error, Result};
use crate::free_wave::{CauchyData, FreeWaveEvaluator};
use crate::nlw_direct::{estimate_blowup_time, evolve, perturbed_ode_state, DirectConfig};
use crate::numerics::{linear_fit, smooth_cutoff, wilson_interval, LinearFit};
use crate::radial_spectral::{bracket, forward_transform, RadialGrid, RadialProfile};
use crate::randomization::{coefficients, CoefficientLaw, Component, RandomSeed};
use crate::similarity::TauGrid;

/// Perturbation shapes shipped with the driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Template {
    /// `e^{−4r²}`.
    Bump,
    /// `e^{−r²} cos(32 r)`.
    Oscillatory,
    /// `f̂(ν) = ⟨ν⟩^{−(s + 3/2 + 0.01)}`, barely in `H^s`, with a smooth
    /// spectral cutoff at `ν ≈ 48`.
    Rough,
}

impl Template {
    pub const ALL: [Template; 3] = [Template::Bump, Template::Oscillatory, Template::Rough];

    pub fn name(self) -> &'static str {
        match self {
            Template::Bump => "bump",
            Template::Oscillatory => "oscillatory",
            Template::Rough => "rough",
        }
    }
}

impl FromStr for Template {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Template::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown template {s:?}")))
    }
}

/// Spectral grid the templates live on.
pub const TEMPLATE_GRID: (f64, usize) = (16.0, 2048);

/// Templates are multiplied by a cutoff equal to 1 on `r ≤ 6` and 0 on `r ≥ 10`.
pub const LOCALIZATION: (f64, f64) = (6.0, 10.0);

/// Unnormalized template data `(f, f)` on [`TEMPLATE_GRID`].
pub fn template_data(template: Template, s: f64) -> Result<CauchyData> {
    let grid = RadialGrid::new(TEMPLATE_GRID.0, TEMPLATE_GRID.1)?;
    let raw = match template {
        Template::Bump => RadialProfile::from_fn(grid, |r| (-4.0 * r * r).exp())?,
        Template::Oscillatory => RadialProfile::from_fn(grid, |r| (-r * r).exp() * (32.0 * r).cos())?,
        Template::Rough => {
            let decay = s + 1.5 + 0.01;
            RadialProfile::from_spectral_fn(grid, |nu| bracket(nu).powf(-decay) * (-(nu / 48.0).powi(8)).exp())?
        }
    };
    let localized: Vec<f64> = raw
        .values()
        .iter()
        .enumerate()
        .map(|(j, v)| v * smooth_cutoff(grid.r(j), LOCALIZATION.0, LOCALIZATION.1))
        .collect();
    let f = forward_transform(&RadialProfile::from_values(grid, localized)?)?;
    CauchyData::new(f.clone(), f)
}

/// Template rescaled to `‖(f₁, f₂)‖_{H^s × H^{s−1}} = eps`.
pub fn normalized_template(template: Template, s: f64, eps: f64) -> Result<CauchyData> {
    let data = template_data(template, s)?;
    let norm = data.norm(s)?;
    Ok(data.scaled(eps / norm))
}

/// Driver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub template: Template,
    pub s: f64,
    pub law: CoefficientLaw,
    pub master_seed: u64,
    /// Solver settings; `delta` is overridden per cell.
    pub solve: SolveConfig,
    /// Also run the direct Cartesian solver and record its blowup time.
    pub direct_check: bool,
    pub direct: DirectConfig,
    /// Ensemble-wide constant `K` of the bound `norms ≤ Kδ`.
    pub norm_constant: f64,
    pub max_delta: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            template: Template::Bump,
            s: 0.71,
            law: CoefficientLaw::StandardGaussian,
            master_seed: 0,
            solve: SolveConfig {
                rho_nodes: 33,
                taus: TauGrid { tau_max: 8.0, n_steps: 128 },
                ..SolveConfig::default()
            },
            direct_check: false,
            direct: DirectConfig { n_intervals: 512, ..DirectConfig::default() },
            norm_constant: 1.0,
            max_delta: 0.5,
        }
    }
}

/// Exhaustive classification of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleStatus {
    Stable,
    BracketFailure,
    PicardDivergence,
    SolverError,
}

impl SampleStatus {
    /// Bracket failure or loss of contraction.
    pub fn is_failure(self) -> bool {
        matches!(self, SampleStatus::BracketFailure | SampleStatus::PicardDivergence)
    }

    fn of_error(e: &Error) -> Self {
        match e {
            Error::BracketFailure { .. } => SampleStatus::BracketFailure,
            Error::Divergence { .. } | Error::NonContraction { .. } | Error::PicardBudget { .. } => {
                SampleStatus::PicardDivergence
            }
            _ => SampleStatus::SolverError,
        }
    }
}

/// Number of leading annulus coefficients stored per component.
pub const RECORDED_COEFFICIENTS: usize = 4;

/// Outcome of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupRecord {
    pub sample_index: u64,
    pub master_seed: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub s: f64,
    pub template: Template,
    pub status: SampleStatus,
    pub blowup_time: Option<f64>,
    pub direct_blowup_time: Option<f64>,
    /// `‖(T−t)^{−3/4}(u − u^{(T)})‖_{L²L⁴}` over the cone.
    pub weighted_l2_l4: Option<f64>,
    /// `‖u − u^{(T)}‖_{L⁵L¹⁰}` over the cone.
    pub l5_l10: Option<f64>,
    pub bisection_steps: Option<usize>,
    pub solve: Option<SolveSummary>,
    pub position_coefficients: Vec<f64>,
    pub velocity_coefficients: Vec<f64>,
    pub error: Option<String>,
    pub wall_time: f64,
}

impl BlowupRecord {
    pub fn norm_sum(&self) -> Option<f64> {
        Some(self.weighted_l2_l4? + self.l5_l10?)
    }

    fn cell_key(&self) -> (u64, u64) {
        (self.epsilon.to_bits(), self.delta.to_bits())
    }
}

/// Template plus prebuilt operators; shared by all samples.
#[derive(Debug, Clone)]
pub struct Ensemble {
    cfg: EnsembleConfig,
    unit_data: CauchyData,
    solver: FixedPointSolver,
}

impl Ensemble {
    pub fn new(cfg: EnsembleConfig) -> Result<Self> {
        let unit_data = normalized_template(cfg.template, cfg.s, 1.0)?;
        let solver = FixedPointSolver::new(cfg.solve)?;
        Ok(Self { cfg, unit_data, solver })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.cfg
    }

    /// Randomize, pull back, solve the fixed point with blowup-time
    /// selection, optionally cross-check with the direct solver. Errors are
    /// captured into the record.
    pub fn run_sample(&self, epsilon: f64, delta: f64, sample_index: u64) -> BlowupRecord {
        let start = Instant::now();
        let seed = RandomSeed::new(self.cfg.master_seed, sample_index);
        let mut record = BlowupRecord {
            sample_index,
            master_seed: self.cfg.master_seed,
            epsilon,
            delta,
            s: self.cfg.s,
            template: self.cfg.template,
            status: SampleStatus::SolverError,
            blowup_time: None,
            direct_blowup_time: None,
            weighted_l2_l4: None,
            l5_l10: None,
            bisection_steps: None,
            solve: None,
            position_coefficients: coefficients(self.cfg.law, seed, Component::Position, RECORDED_COEFFICIENTS),
            velocity_coefficients: coefficients(self.cfg.law, seed, Component::Velocity, RECORDED_COEFFICIENTS),
            error: None,
            wall_time: 0.0,
        };
        if let Err(e) = self.fill(&mut record, seed) {
            record.status = SampleStatus::of_error(&e);
            record.error = Some(e.to_string());
        }
        record.wall_time = start.elapsed().as_secs_f64();
        record
    }

    fn fill(&self, record: &mut BlowupRecord, seed: RandomSeed) -> Result<()> {
        if !(record.delta > 0.0 && record.delta <= self.cfg.max_delta) {
            return Err(Error::InvalidArgument(format!(
                "delta {} outside (0, {}]",
                record.delta, self.cfg.max_delta
            )));
        }
        if !(record.epsilon >= 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be nonnegative, got {}", record.epsilon)));
        }
        let data = self.unit_data.randomized(self.cfg.law, seed)?.scaled(record.epsilon);
        let solver = self.solver.with_delta(record.delta)?;
        let evaluator = FreeWaveEvaluator::new(&data)?;
        let bt = find_blowup_time(&solver, &evaluator)?;
        let t_star = bt.blowup_time;
        let taus = solver.taus();
        let rhos = solver.grid();
        let forcing = evaluator.pull_to_cone(t_star, taus, rhos)?;
        // u − u^{(T)} in similarity variables is f^T + φ₁; both norms are
        // scale invariant, so the (T−t) weights cancel exactly.
        let sol = &bt.fixed_point.solution;
        let rows: Vec<Vec<f64>> = (0..taus.n_nodes())
            .map(|i| forcing.row(i).iter().zip(sol.first(i)).map(|(a, b)| a + b).collect())
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let ones = vec![1.0; refs.len()];
        record.weighted_l2_l4 = Some(mixed_norm(&refs, &ones, taus, rhos, 2.0, 4.0).0);
        record.l5_l10 = Some(mixed_norm(&refs, &ones, taus, rhos, 5.0, 10.0).0);
        record.blowup_time = Some(t_star);
        record.bisection_steps = Some(bt.bisection_steps);
        record.solve = Some(bt.fixed_point.summary());
        record.status = SampleStatus::Stable;
        if self.cfg.direct_check {
            record.direct_blowup_time = self.direct_blowup_time(&data).ok();
        }
        Ok(())
    }

    fn direct_blowup_time(&self, data: &CauchyData) -> Result<f64> {
        let state = perturbed_ode_state(data, self.cfg.direct.grid()?)?;
        let evo = evolve(state, &self.cfg.direct, &[], |_| {})?;
        if evo.blowup.is_none() {
            return Err(Error::NoBlowup { t_final: evo.state.time() });
        }
        Ok(estimate_blowup_time(&evo.times(), &evo.origin_values())?.blowup_time)
    }

    /// Runs `n_per_cell` samples for every `(ε, δ)` cell on `workers`
    /// threads. Sample `i` uses the same random draw in every cell. With a
    /// sink, records already present are skipped and new ones are appended
    /// one line at a time.
    pub fn run(
        &self,
        cells: &[(f64, f64)],
        n_per_cell: usize,
        workers: usize,
        sink: Option<&Path>,
    ) -> Result<(Vec<BlowupRecord>, EnsembleReport)> {
        let mut records = Vec::new();
        let mut done = HashSet::new();
        if let Some(path) = sink {
            if path.exists() {
                let (existing, _) = read_records(path)?;
                for r in existing {
                    if r.master_seed == self.cfg.master_seed {
                        done.insert((r.cell_key(), r.sample_index));
                        records.push(r);
                    }
                }
            }
        }
        let tasks: Vec<(f64, f64, u64)> = cells
            .iter()
            .flat_map(|&(e, d)| (0..n_per_cell as u64).map(move |i| (e, d, i)))
            .filter(|&(e, d, i)| !done.contains(&((e.to_bits(), d.to_bits()), i)))
            .collect();
        let file = match sink {
            Some(path) => Some(Mutex::new(
                OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?,
            )),
            None => None,
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
        let fresh: Vec<Result<BlowupRecord>> = pool.install(|| {
            tasks
                .par_iter()
                .map(|&(e, d, i)| {
                    let record = self.run_sample(e, d, i);
                    if let (Some(f), Some(path)) = (&file, sink) {
                        let mut line = serde_json::to_string(&record)
                            .map_err(|err| Error::Format(format!("record encoding: {err}")))?;
                        line.push('\n');
                        let mut f = f.lock().expect("sink lock");
                        f.write_all(line.as_bytes()).map_err(|err| Error::io(path, err))?;
                    }
                    Ok(record)
                })
                .collect()
        });
        for r in fresh {
            records.push(r?);
        }
        let wanted: HashSet<(u64, u64)> = cells.iter().map(|(e, d)| (e.to_bits(), d.to_bits())).collect();
        records.retain(|r| wanted.contains(&r.cell_key()) && (r.sample_index as usize) < n_per_cell);
        sort_records(&mut records);
        let report = EnsembleReport::from_records(&records, self.cfg.norm_constant);
        Ok((records, report))
    }
}

/// Sort by cell then sample index, so aggregation is schedule independent.
pub fn sort_records(records: &mut [BlowupRecord]) {
    records.sort_by(|a, b| {
        a.epsilon
            .total_cmp(&b.epsilon)
            .then(a.delta.total_cmp(&b.delta))
            .then(a.sample_index.cmp(&b.sample_index))
    });
}

/// Reads a JSONL file; returns the records and the number of malformed lines.
pub fn read_records(path: &Path) -> Result<(Vec<BlowupRecord>, usize)> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut skipped = 0;
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<BlowupRecord>(&line) {
            Ok(r) => records.push(r),
            Err(_) => skipped += 1,
        }
    }
    Ok((records, skipped))
}

/// Minimum samples per cell for a reported confidence interval.
pub const MIN_CELL_SAMPLES: usize = 30;

/// Minimum failures for a cell to enter the exponent fit.
pub const MIN_FIT_FAILURES: usize = 5;

/// Aggregate statistics of one `(ε, δ)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub epsilon: f64,
    pub delta: f64,
    /// `δ²/ε²` (infinite when `ε = 0`).
    pub ratio: f64,
    pub n: usize,
    pub stable: usize,
    pub bracket_failures: usize,
    pub picard_failures: usize,
    pub solver_errors: usize,
    pub failure_rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub under_populated: bool,
    pub mean_blowup_time: Option<f64>,
    /// Largest `(weighted L²L⁴ + L⁵L¹⁰)/δ` over stable samples.
    pub max_norm_over_delta: Option<f64>,
}

impl CellStats {
    fn failures(&self) -> usize {
        self.bracket_failures + self.picard_failures
    }
}

/// Ensemble-level statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub cells: Vec<CellStats>,
    /// Fit of `ln(failure rate)` against `δ²/ε²` over cells with enough failures.
    pub fit: Option<LinearFit>,
    /// Largest `norms/δ` over all stable samples (measured `K`).
    pub measured_constant: Option<f64>,
    pub norm_constant: f64,
    /// Stable samples that violate `T* ∈ [1−δ, 1+δ]` or `norms ≤ Kδ`.
    pub bound_violations: usize,
}

/// 95% two-sided normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

impl EnsembleReport {
    pub fn from_records(records: &[BlowupRecord], norm_constant: f64) -> Self {
        let mut groups: BTreeMap<(u64, u64), Vec<&BlowupRecord>> = BTreeMap::new();
        for r in records {
            groups.entry(r.cell_key()).or_default().push(r);
        }
        let mut cells: Vec<CellStats> = groups.values().map(|g| cell_stats(g)).collect();
        cells.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon).then(a.delta.total_cmp(&b.delta)));
        let fit_cells: Vec<&CellStats> =
            cells.iter().filter(|c| c.failures() >= MIN_FIT_FAILURES && c.ratio.is_finite()).collect();
        let xs: Vec<f64> = fit_cells.iter().map(|c| c.ratio).collect();
        let ys: Vec<f64> = fit_cells.iter().map(|c| c.failure_rate.ln()).collect();
        let fit = linear_fit(&xs, &ys);
        let mut measured: Option<f64> = None;
        let mut bound_violations = 0;
        for r in records.iter().filter(|r| r.status == SampleStatus::Stable) {
            if let (Some(t), Some(n)) = (r.blowup_time, r.norm_sum()) {
                let k = n / r.delta;
                measured = Some(measured.map_or(k, |m| m.max(k)));
                if (t - 1.0).abs() > r.delta || n > norm_constant * r.delta {
                    bound_violations += 1;
                }
            }
        }
        Self { cells, fit, measured_constant: measured, norm_constant, bound_violations }
    }

    /// Failure rates are nonincreasing in `δ²/ε²` up to confidence width:
    /// for every pair of cells with `ratio_a < ratio_b`, the Wilson interval
    /// of `b` starts below the upper end of `a`.
    pub fn is_monotone(&self) -> bool {
        self.cells.iter().all(|a| {
            self.cells
                .iter()
                .filter(|b| b.ratio > a.ratio)
                .all(|b| b.wilson_low <= a.wilson_high)
        })
    }

    pub fn total_samples(&self) -> usize {
        self.cells.iter().map(|c| c.n).sum()
    }

    pub fn stable_fraction(&self) -> f64 {
        let n = self.total_samples();
        if n == 0 {
            return 0.0;
        }
        self.cells.iter().map(|c| c.stable).sum::<usize>() as f64 / n as f64
    }
}

fn cell_stats(group: &[&BlowupRecord]) -> CellStats {
    let first = group[0];
    let n = group.len();
    let count = |s: SampleStatus| group.iter().filter(|r| r.status == s).count();
    let stable = count(SampleStatus::Stable);
    let bracket_failures = count(SampleStatus::BracketFailure);
    let picard_failures = count(SampleStatus::PicardDivergence);
    let solver_errors = count(SampleStatus::SolverError);
    let failures = bracket_failures + picard_failures;
    let (wilson_low, wilson_high) = wilson_interval(failures, n, Z95);
    let times: Vec<f64> = group.iter().filter_map(|r| r.blowup_time).collect();
    let mean_blowup_time = if times.is_empty() { None } else { Some(times.iter().sum::<f64>() / times.len() as f64) };
    let max_norm_over_delta = group
        .iter()
        .filter_map(|r| r.norm_sum().map(|v| v / r.delta))
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    CellStats {
        epsilon: first.epsilon,
        delta: first.delta,
        ratio: if first.epsilon > 0.0 { (first.delta / first.epsilon).powi(2) } else { f64::INFINITY },
        n,
        stable,
        bracket_failures,
        picard_failures,
        solver_errors,
        failure_rate: failures as f64 / n as f64,
        wilson_low,
        wilson_high,
        under_populated: n < MIN_CELL_SAMPLES,
        mean_blowup_time,
        max_norm_over_delta,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.6e}"))
}

/// CSV summary: one row per cell, sorted by `(ε, δ)`, fixed float format.
pub fn summary_csv(report: &EnsembleReport) -> String {
    let mut out = String::from(
        "epsilon,delta,ratio,n,stable,bracket_failures,picard_failures,solver_errors,failure_rate,wilson_low,wilson_high,mean_blowup_time,max_norm_over_delta\n",
    );
    for c in &report.cells {
        let _ = writeln!(
            out,
            "{:.6e},{:.6e},{:.6e},{},{},{},{},{},{:.6e},{:.6e},{:.6e},{},{}",
            c.epsilon,
            c.delta,
            c.ratio,
            c.n,
            c.stable,
            c.bracket_failures,
            c.picard_failures,
            c.solver_errors,
            c.failure_rate,
            c.wilson_low,
            c.wilson_high,
            fmt_opt(c.mean_blowup_time),
            fmt_opt(c.max_norm_over_delta),
        );
    }
    out
}

/// What [`report`] produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutput {
    pub records: usize,
    pub skipped_lines: usize,
    pub report: EnsembleReport,
}

/// Reads records and writes `summary.csv`, `failure_map.svg`,
/// `blowup_times.svg` and `norms.svg` into `out_dir`.
pub fn report(records_path: &Path, out_dir: &Path, norm_constant: f64) -> Result<ReportOutput> {
    let (mut records, skipped) = read_records(records_path)?;
    if records.is_empty() {
        return Err(Error::InsufficientSamples { required: 1, got: 0 });
    }
    sort_records(&mut records);
    let rep = EnsembleReport::from_records(&records, norm_constant);
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let write = |name: &str, body: String| -> Result<()> {
        let p = out_dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
    };
    write("summary.csv", summary_csv(&rep))?;
    write("failure_map.svg", failure_map_svg(&rep))?;
    write("blowup_times.svg", histogram_svg(&records))?;
    write("norms.svg", norms_svg(&records, norm_constant))?;
    Ok(ReportOutput { records: records.len(), skipped_lines: skipped, report: rep })
}

const SVG_W: f64 = 480.0;
const SVG_H: f64 = 360.0;
const MARGIN: f64 = 50.0;

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n",
        SVG_W / 2.0
    )
}

fn svg_axes(out: &mut String, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <text x=\"{cx}\" y=\"{ly}\" text-anchor=\"middle\">{x_label}</text>\n\
         <text x=\"14\" y=\"{cy}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {cy})\">{y_label}</text>",
        m = MARGIN,
        b = SVG_H - MARGIN,
        r = SVG_W - MARGIN,
        cx = SVG_W / 2.0,
        ly = SVG_H - 15.0,
        cy = SVG_H / 2.0,
    );
}

/// Heat map of failure rate on the `(ε, δ)` grid.
pub fn failure_map_svg(rep: &EnsembleReport) -> String {
    let mut eps: Vec<f64> = rep.cells.iter().map(|c| c.epsilon).collect();
    let mut del: Vec<f64> = rep.cells.iter().map(|c| c.delta).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    del.sort_by(f64::total_cmp);
    del.dedup();
    let mut out = svg_open("failure rate");
    svg_axes(&mut out, "delta", "epsilon");
    let w = (SVG_W - 2.0 * MARGIN) / del.len().max(1) as f64;
    let h = (SVG_H - 2.0 * MARGIN) / eps.len().max(1) as f64;
    for c in &rep.cells {
        let i = del.iter().position(|d| *d == c.delta).unwrap_or(0);
        let j = eps.iter().position(|e| *e == c.epsilon).unwrap_or(0);
        let shade = (255.0 * (1.0 - c.failure_rate)).round() as u8;
        let x = MARGIN + i as f64 * w;
        let y = SVG_H - MARGIN - (j + 1) as f64 * h;
        let _ = writeln!(
            out,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"rgb(255,{shade},{shade})\" stroke=\"gray\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{:.2}</text>",
            x + w / 2.0,
            y + h / 2.0,
            c.failure_rate
        );
    }
    for (i, d) in del.iter().enumerate() {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{d:.1e}</text>",
            MARGIN + (i as f64 + 0.5) * w,
            SVG_H - MARGIN + 14.0
        );
    }
    for (j, e) in eps.iter().enumerate() {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{e:.1e}</text>",
            MARGIN - 4.0,
            SVG_H - MARGIN - (j as f64 + 0.5) * h
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Histogram of `T*` over stable records.
pub fn histogram_svg(records: &[BlowupRecord]) -> String {
    let times: Vec<f64> = records.iter().filter_map(|r| r.blowup_time).collect();
    let mut out = svg_open("blowup time");
    svg_axes(&mut out, "T*", "count");
    if let (Some(lo), Some(hi)) = (
        times.iter().cloned().reduce(f64::min),
        times.iter().cloned().reduce(f64::max),
    ) {
        let bins = 30;
        let span = if hi > lo { hi - lo } else { 1e-12 };
        let mut counts = vec![0usize; bins];
        for t in &times {
            let b = (((t - lo) / span) * bins as f64).floor() as usize;
            counts[b.min(bins - 1)] += 1;
        }
        let top = *counts.iter().max().unwrap_or(&1) as f64;
        let w = (SVG_W - 2.0 * MARGIN) / bins as f64;
        for (i, c) in counts.iter().enumerate() {
            let h = (SVG_H - 2.0 * MARGIN) * *c as f64 / top;
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{h:.2}\" fill=\"steelblue\"/>",
                MARGIN + i as f64 * w,
                SVG_H - MARGIN - h,
                w * 0.9
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{MARGIN}\" y=\"{:.2}\">{lo:.6}</text>\n<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{hi:.6}</text>",
            SVG_H - MARGIN + 14.0,
            SVG_W - MARGIN,
            SVG_H - MARGIN + 14.0
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Scatter of the bound's left side against `δ`, with the line `Kδ`.
pub fn norms_svg(records: &[BlowupRecord], norm_constant: f64) -> String {
    let pts: Vec<(f64, f64)> = records.iter().filter_map(|r| r.norm_sum().map(|n| (r.delta, n))).collect();
    let mut out = svg_open("norms against delta");
    svg_axes(&mut out, "delta", "norm");
    let dmax = pts.iter().map(|p| p.0).fold(0.0, f64::max);
    let nmax = pts.iter().map(|p| p.1).fold(norm_constant * dmax, f64::max);
    if dmax > 0.0 && nmax > 0.0 {
        let sx = (SVG_W - 2.0 * MARGIN) / dmax;
        let sy = (SVG_H - 2.0 * MARGIN) / nmax;
        let _ = writeln!(
            out,
            "<line x1=\"{MARGIN}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"red\" stroke-dasharray=\"4\"/>",
            SVG_H - MARGIN,
            MARGIN + dmax * sx,
            SVG_H - MARGIN - norm_constant * dmax * sy
        );
        for (d, n) in &pts {
            let _ = writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"black\"/>",
                MARGIN + d * sx,
                SVG_H - MARGIN - n * sy
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> EnsembleConfig {
        let mut cfg = EnsembleConfig::default();
        cfg.solve.rho_nodes = 17;
        cfg.solve.taus = TauGrid { tau_max: 8.0, n_steps: 64 };
        cfg.solve.tol_f = 1e-6;
        cfg
    }

    #[test]
    fn templates_are_normalized() {
        for t in Template::ALL {
            let d = normalized_template(t, 0.8, 1e-3).unwrap();
            assert!((d.norm(0.8).unwrap() - 1e-3).abs() < 1e-12, "{t:?}");
        }
        assert_eq!("rough".parse::<Template>().unwrap(), Template::Rough);
    }

    #[test]
    fn zero_perturbation_is_stable_at_one() {
        let ens = Ensemble::new(quick()).unwrap();
        let r = ens.run_sample(0.0, 0.1, 3);
        assert_eq!(r.status, SampleStatus::Stable, "{:?}", r.error);
        assert_eq!(r.blowup_time, Some(1.0));
        assert_eq!(r.norm_sum(), Some(0.0));
    }

    #[test]
    fn replay_is_identical() {
        let ens = Ensemble::new(quick()).unwrap();
        let mut a = ens.run_sample(1e-3, 0.05, 11);
        let mut b = ens.run_sample(1e-3, 0.05, 11);
        a.wall_time = 0.0;
        b.wall_time = 0.0;
        assert_eq!(a, b);
        assert_eq!(a.status, SampleStatus::Stable);
    }

    #[test]
    fn invalid_delta_is_recorded() {
        let ens = Ensemble::new(quick()).unwrap();
        let r = ens.run_sample(1e-3, 0.9, 0);
        assert_eq!(r.status, SampleStatus::SolverError);
        assert!(r.error.is_some());
    }
}
