//! Direct method-of-lines solver for the radial focusing quintic wave
//! equation `∂_t²u − ∂_r²u − (2/r)∂_r u = u⁵` in Cartesian coordinates.
//!
//! With `w = r·u` the equation becomes `∂_t²w = ∂_r²w + w⁵/r⁴`, discretized
//! by the three-point Laplacian on `r_j = j·h`, `w_0 = 0` (parity) and a
//! Dirichlet wall at `r_max`, and advanced by classical RK4. The semi-discrete
//! system is Hamiltonian for
//!
//! ```text
//! E_h = 4π h [ Σ_{j=1}^{n−1} (½ẇ_j² − w_j⁶/(6r_j⁴)) + Σ_{j=0}^{n−1} ½((w_{j+1} − w_j)/h)² ]
//! ```
//!
//! so energy drift measures the time integrator only.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::duhamel::{find_blowup_time, BlowupTime, FixedPointSolver};
use crate::error::{Error, Result};
use crate::free_wave::{CauchyData, FreeWaveEvaluator};
use crate::numerics::{linear_fit, smooth_cutoff, LinearFit};
use crate::radial_spectral::{RadialGrid, RadialProfile};
use crate::KAPPA;

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectConfig {
    pub r_max: f64,
    /// Grid intervals on `[0, r_max]`.
    pub n_intervals: usize,
    /// `Δt ≤ cfl·h`; must not exceed 0.5.
    pub cfl: f64,
    /// `Δt ≤ nonlinear_factor / max|u|²` near blowup.
    pub nonlinear_factor: f64,
    /// Evolution stops once `max|u|` reaches this value.
    pub blowup_threshold: f64,
    pub t_final: f64,
    /// Keep a full-field snapshot every this many steps (0 disables).
    pub snapshot_stride: usize,
}

impl Default for DirectConfig {
    fn default() -> Self {
        Self {
            r_max: 4.0,
            n_intervals: 2048,
            cfl: 0.5,
            nonlinear_factor: 0.1,
            blowup_threshold: 1e3,
            t_final: 2.0,
            snapshot_stride: 0,
        }
    }
}

impl DirectConfig {
    pub fn grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.r_max, self.n_intervals)
    }
}

/// Snapshot of the evolution: `w = r·u` and `∂_t w` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    grid: RadialGrid,
    t: f64,
    w: Vec<f64>,
    wt: Vec<f64>,
    initial_energy: f64,
    blown_up: bool,
    steps: usize,
}

/// Buffers reused across RK4 steps.
#[derive(Debug, Clone)]
struct Stages {
    k: [(Vec<f64>, Vec<f64>); 4],
    tmp: (Vec<f64>, Vec<f64>),
}

impl EvolutionState {
    /// From `u(0)` and `∂_t u(0)` sampled at the grid nodes.
    pub fn new(grid: RadialGrid, u0: &[f64], u1: &[f64]) -> Result<Self> {
        let n = grid.n_points() + 1;
        if u0.len() != n || u1.len() != n {
            return Err(Error::InvalidArgument(format!("initial data needs {n} samples per component")));
        }
        let mut w: Vec<f64> = (0..n).map(|j| grid.r(j) * u0[j]).collect();
        let mut wt: Vec<f64> = (0..n).map(|j| grid.r(j) * u1[j]).collect();
        w[n - 1] = 0.0;
        wt[n - 1] = 0.0;
        let mut s = Self { grid, t: 0.0, w, wt, initial_energy: 0.0, blown_up: false, steps: 0 };
        s.initial_energy = s.energy();
        Ok(s)
    }

    pub fn from_fns(grid: RadialGrid, u0: impl Fn(f64) -> f64, u1: impl Fn(f64) -> f64) -> Result<Self> {
        let nodes = grid.nodes();
        let a: Vec<f64> = nodes.iter().map(|r| u0(*r)).collect();
        let b: Vec<f64> = nodes.iter().map(|r| u1(*r)).collect();
        Self::new(grid, &a, &b)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_blown_up(&self) -> bool {
        self.blown_up
    }

    pub fn initial_energy(&self) -> f64 {
        self.initial_energy
    }

    /// `u(t, 0)` from `w ≈ a r + b r³` near the origin.
    pub fn u_at_origin(&self) -> f64 {
        (8.0 * self.w[1] - self.w[2]) / (6.0 * self.grid.h())
    }

    /// `u` at every node.
    pub fn u(&self) -> Vec<f64> {
        let mut u: Vec<f64> = self.w.iter().enumerate().map(|(j, w)| if j == 0 { 0.0 } else { w / self.grid.r(j) }).collect();
        u[0] = self.u_at_origin();
        u
    }

    /// `∂_t u` at every node.
    pub fn u_t(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.wt.iter().enumerate().map(|(j, w)| if j == 0 { 0.0 } else { w / self.grid.r(j) }).collect();
        v[0] = (8.0 * self.wt[1] - self.wt[2]) / (6.0 * self.grid.h());
        v
    }

    pub fn u_max(&self) -> f64 {
        let interior = self.w.iter().enumerate().skip(1).fold(0.0f64, |m, (j, w)| m.max((w / self.grid.r(j)).abs()));
        interior.max(self.u_at_origin().abs())
    }

    /// Cubic interpolation of `u(t, r)`, using the even extension across `r = 0`.
    pub fn value_at(&self, r: f64) -> f64 {
        let h = self.grid.h();
        let n = self.grid.n_points();
        let u = |j: isize| -> f64 {
            let j = j.unsigned_abs();
            if j == 0 {
                self.u_at_origin()
            } else {
                self.w[j] / self.grid.r(j)
            }
        };
        let x = r / h;
        let base = (x.floor() as isize - 1).min(n as isize - 3);
        let s = x - base as f64;
        let weights = [
            -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0,
            s * (s - 2.0) * (s - 3.0) / 2.0,
            -s * (s - 1.0) * (s - 3.0) / 2.0,
            s * (s - 1.0) * (s - 2.0) / 6.0,
        ];
        (0..4).map(|q| weights[q] * u(base + q as isize)).sum()
    }

    /// Discrete energy `E_h`.
    pub fn energy(&self) -> f64 {
        let h = self.grid.h();
        let n = self.grid.n_points();
        let mut e = 0.0;
        for j in 1..n {
            let r4 = self.grid.r(j).powi(4);
            e += 0.5 * self.wt[j] * self.wt[j] - self.w[j].powi(6) / (6.0 * r4);
        }
        for j in 0..n {
            let d = (self.w[j + 1] - self.w[j]) / h;
            e += 0.5 * d * d;
        }
        4.0 * std::f64::consts::PI * h * e
    }

    /// `∂_t²w` for the given `w`.
    fn acceleration(grid: &RadialGrid, w: &[f64], out: &mut [f64]) {
        let n = grid.n_points();
        let inv_h2 = 1.0 / (grid.h() * grid.h());
        out[0] = 0.0;
        out[n] = 0.0;
        for j in 1..n {
            let r = grid.r(j);
            let wr = w[j] / r;
            let wr2 = wr * wr;
            out[j] = (w[j + 1] - 2.0 * w[j] + w[j - 1]) * inv_h2 + r * wr2 * wr2 * wr;
        }
    }

    /// Residual `∂_t²w − (D²w + w⁵/r⁴)` of a prescribed trajectory, given
    /// its `w` and exact `∂_t²w` at one instant.
    pub fn operator_residual(grid: &RadialGrid, w: &[f64], w_tt: &[f64]) -> f64 {
        let mut acc = vec![0.0; w.len()];
        Self::acceleration(grid, w, &mut acc);
        (1..grid.n_points()).fold(0.0f64, |m, j| m.max((w_tt[j] - acc[j]).abs()))
    }

    fn stages(&self) -> Stages {
        let n = self.w.len();
        let pair = || (vec![0.0; n], vec![0.0; n]);
        Stages { k: [pair(), pair(), pair(), pair()], tmp: pair() }
    }

    fn step_with(&mut self, dt: f64, st: &mut Stages) -> Result<()> {
        if self.blown_up {
            return Err(Error::InvalidArgument(format!("state blew up at t = {}", self.t)));
        }
        let limit = 0.5 * self.grid.h();
        if !(dt > 0.0 && dt <= limit * (1.0 + 1e-12)) {
            return Err(Error::Cfl { dt, limit });
        }
        let grid = self.grid;
        let n = self.w.len();
        let coeffs = [0.0, 0.5, 0.5, 1.0];
        for s in 0..4 {
            let (tw, tv) = &mut st.tmp;
            if s == 0 {
                tw.copy_from_slice(&self.w);
                tv.copy_from_slice(&self.wt);
            } else {
                let (kw, kv) = &st.k[s - 1];
                let c = coeffs[s] * dt;
                for j in 0..n {
                    tw[j] = self.w[j] + c * kw[j];
                    tv[j] = self.wt[j] + c * kv[j];
                }
            }
            let (kw, kv) = &mut st.k[s];
            kw.copy_from_slice(tv);
            Self::acceleration(&grid, tw, kv);
        }
        let previous = (self.w.clone(), self.wt.clone());
        for j in 0..n {
            let dw = st.k[0].0[j] + 2.0 * st.k[1].0[j] + 2.0 * st.k[2].0[j] + st.k[3].0[j];
            let dv = st.k[0].1[j] + 2.0 * st.k[1].1[j] + 2.0 * st.k[2].1[j] + st.k[3].1[j];
            self.w[j] += dt / 6.0 * dw;
            self.wt[j] += dt / 6.0 * dv;
        }
        if self.w.iter().chain(&self.wt).any(|v| !v.is_finite()) {
            self.w = previous.0;
            self.wt = previous.1;
            self.blown_up = true;
            return Ok(());
        }
        self.t += dt;
        self.steps += 1;
        Ok(())
    }

    /// One RK4 step. Requires `Δt ≤ h/2`. Overflow leaves the last valid
    /// state in place and sets the blowup flag.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let mut st = self.stages();
        self.step_with(dt, &mut st)
    }

    /// `min(cfl·h, nonlinear_factor / max|u|²)`.
    pub fn stable_dt(&self, cfg: &DirectConfig) -> f64 {
        let um = self.u_max();
        let linear = cfg.cfl.min(0.5) * self.grid.h();
        if um > 0.0 {
            linear.min(cfg.nonlinear_factor / (um * um))
        } else {
            linear
        }
    }
}

/// One row of the central trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub u_origin: f64,
    pub energy: f64,
}

/// Output of [`evolve`].
#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub trace: Vec<TracePoint>,
    pub state: EvolutionState,
    /// Last valid time when the threshold or overflow stopped the run.
    pub blowup: Option<f64>,
    pub snapshots: Vec<(f64, RadialProfile)>,
}

impl Evolution {
    /// Largest `|E(t) − E(0)|/t` over the whole trace.
    pub fn energy_drift_rate(&self) -> f64 {
        self.energy_drift_rate_until(f64::INFINITY)
    }

    /// Largest `|E(t) − E(0)|/t` over `0 < t ≤ t_max`.
    pub fn energy_drift_rate_until(&self, t_max: f64) -> f64 {
        let e0 = self.state.initial_energy();
        self.trace
            .iter()
            .filter(|p| p.t > 0.0 && p.t <= t_max)
            .fold(0.0f64, |m, p| m.max((p.energy - e0).abs() / p.t))
    }

    pub fn times(&self) -> Vec<f64> {
        self.trace.iter().map(|p| p.t).collect()
    }

    pub fn origin_values(&self) -> Vec<f64> {
        self.trace.iter().map(|p| p.u_origin).collect()
    }
}

/// Evolves until `t_final` or blowup. Steps land exactly on each of
/// `sample_times` (sorted), where `on_sample` sees the state.
pub fn evolve(
    mut state: EvolutionState,
    cfg: &DirectConfig,
    sample_times: &[f64],
    mut on_sample: impl FnMut(&EvolutionState),
) -> Result<Evolution> {
    if !(cfg.cfl > 0.0 && cfg.cfl <= 0.5) {
        return Err(Error::Cfl { dt: cfg.cfl * state.grid.h(), limit: 0.5 * state.grid.h() });
    }
    let mut st = state.stages();
    let mut trace = vec![TracePoint { t: state.t, u_origin: state.u_at_origin(), energy: state.energy() }];
    let mut snapshots = Vec::new();
    let mut next_sample = sample_times.iter().position(|t| *t >= state.t).unwrap_or(sample_times.len());
    while next_sample < sample_times.len() && sample_times[next_sample] == state.t {
        on_sample(&state);
        next_sample += 1;
    }
    let mut blowup = None;
    while state.t < cfg.t_final {
        let mut dt = state.stable_dt(cfg).min(cfg.t_final - state.t);
        let hit = next_sample < sample_times.len() && state.t + dt >= sample_times[next_sample];
        if hit {
            dt = sample_times[next_sample] - state.t;
        }
        if dt <= 0.0 {
            break;
        }
        state.step_with(dt, &mut st)?;
        if state.blown_up {
            blowup = Some(state.t);
            break;
        }
        if hit {
            state.t = sample_times[next_sample];
            on_sample(&state);
            next_sample += 1;
        }
        trace.push(TracePoint { t: state.t, u_origin: state.u_at_origin(), energy: state.energy() });
        if cfg.snapshot_stride > 0 && state.steps % cfg.snapshot_stride == 0 {
            snapshots.push((state.t, RadialProfile::from_values(state.grid, state.u())?));
        }
        if state.u_max() >= cfg.blowup_threshold {
            blowup = Some(state.t);
            state.blown_up = true;
            break;
        }
    }
    Ok(Evolution { trace, state, blowup, snapshots })
}

/// Writes `t,u0,energy` rows.
pub fn write_trace_csv(path: &Path, trace: &[TracePoint]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = String::from("t,u0,energy\n");
    for p in trace {
        out.push_str(&format!("{:?},{:?},{:?}\n", p.t, p.u_origin, p.energy));
    }
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Data of the ODE blowup `κ(T − t)^{−1/2}` at `t = 0`, switched off
/// smoothly between `inner` and `outer` so the outer wall sees zero data.
pub fn ode_blowup_data(blowup_time: f64, inner: f64, outer: f64) -> (impl Fn(f64) -> f64, impl Fn(f64) -> f64) {
    let a = KAPPA * blowup_time.powf(-0.5);
    let b = 0.5 * KAPPA * blowup_time.powf(-1.5);
    (move |r| a * smooth_cutoff(r, inner, outer), move |r| b * smooth_cutoff(r, inner, outer))
}

/// Default cutoff radii for [`ode_blowup_data`] on `r_max = 4`.
pub const BUFFER: (f64, f64) = (2.5, 3.5);

/// Initial state `u(0) = χ(κ + f₁)`, `∂_t u(0) = χ(κ/2 + f₂)` with `χ` the
/// [`BUFFER`] cutoff, sampling the spectral perturbation at the grid nodes.
pub fn perturbed_ode_state(perturbation: &CauchyData, grid: RadialGrid) -> Result<EvolutionState> {
    let zeros = RadialProfile::zeros(perturbation.grid());
    let sample = |p: &RadialProfile| -> Result<Vec<f64>> {
        let ev = FreeWaveEvaluator::new(&CauchyData::new(p.clone(), zeros.clone())?)?;
        Ok(ev.eval_many(0.0, &grid.nodes()))
    };
    let f1 = sample(&perturbation.position)?;
    let f2 = sample(&perturbation.velocity)?;
    let (a, b) = ode_blowup_data(1.0, BUFFER.0, BUFFER.1);
    let nodes = grid.nodes();
    let cut = |r: f64| smooth_cutoff(r, BUFFER.0, BUFFER.1);
    let u0: Vec<f64> = nodes.iter().zip(&f1).map(|(r, f)| a(*r) + f * cut(*r)).collect();
    let u1: Vec<f64> = nodes.iter().zip(&f2).map(|(r, f)| b(*r) + f * cut(*r)).collect();
    EvolutionState::new(grid, &u0, &u1)
}

/// Affine fit of `u(t, 0)^{−2}` against `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupEstimate {
    pub blowup_time: f64,
    /// One standard error of the fitted root.
    pub width: f64,
    pub slope: f64,
    /// `slope / (−1/κ²)`.
    pub slope_ratio: f64,
    /// `rms residual / max y` over the window.
    pub relative_residual: f64,
    pub window: usize,
    pub window_start: f64,
    pub fit: LinearFit,
}

/// Tolerance on the relative fit residual before a fit is rejected.
pub const FIT_TOLERANCE: f64 = 0.05;

/// Fits `u^{−2} = κ^{−2}(T − t)` over the last decade of `T − t`, i.e. the
/// trailing samples with `u ≥ u_last/√10`.
pub fn estimate_blowup_time(times: &[f64], values: &[f64]) -> Result<BlowupEstimate> {
    let n = times.len().min(values.len());
    if n < 3 {
        return Err(Error::InsufficientSamples { required: 3, got: n });
    }
    let last = values[n - 1];
    if !(last > 0.0) {
        return Err(Error::PoorFit("trace is not positive at its end".into()));
    }
    let floor = last / 10f64.sqrt();
    let mut start = n - 1;
    while start > 0 && values[start - 1] >= floor {
        start -= 1;
    }
    let window = n - start;
    if window < 3 {
        return Err(Error::InsufficientSamples { required: 3, got: window });
    }
    let x = &times[start..n];
    let y: Vec<f64> = values[start..n].iter().map(|u| u.powi(-2)).collect();
    let fit = linear_fit(x, &y).ok_or_else(|| Error::PoorFit("degenerate fit window".into()))?;
    let ymax = y.iter().cloned().fold(0.0, f64::max);
    let relative_residual = fit.rms_residual / ymax;
    if !(fit.slope < 0.0) || relative_residual > FIT_TOLERANCE {
        return Err(Error::PoorFit(format!(
            "slope {:e}, relative residual {relative_residual:e}",
            fit.slope
        )));
    }
    let root = fit.root();
    let nf = window as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|t| (t - mx).powi(2)).sum();
    let dof = (nf - 2.0).max(1.0);
    let sigma = fit.rms_residual * (nf / dof).sqrt();
    let width = sigma / fit.slope.abs() * (1.0 / nf + (root - mx).powi(2) / sxx).sqrt();
    Ok(BlowupEstimate {
        blowup_time: root,
        width,
        slope: fit.slope,
        slope_ratio: fit.slope / (-1.0 / (KAPPA * KAPPA)),
        relative_residual,
        window,
        window_start: x[0],
        fit,
    })
}

/// Sample points `(τ, ρ)` of the similarity grid used to compare pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonPoints {
    pub taus: Vec<f64>,
    pub rhos: Vec<f64>,
}

impl Default for ComparisonPoints {
    fn default() -> Self {
        Self { taus: vec![0.25, 0.5, 1.0, 1.5], rhos: vec![0.0, 0.25, 0.5, 0.75] }
    }
}

/// Comparison of the similarity pipeline with the direct solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub pipeline_blowup_time: f64,
    pub direct_blowup_time: Option<f64>,
    pub direct_width: Option<f64>,
    pub sup_discrepancy: f64,
    /// Root-mean-square discrepancy over the sample set.
    pub l2_discrepancy: f64,
    pub n_points: usize,
}

impl CrossValidation {
    pub fn blowup_gap(&self) -> Option<f64> {
        self.direct_blowup_time.map(|t| (t - self.pipeline_blowup_time).abs())
    }
}

/// Runs both pipelines on `u(0) = κ + f₁`, `∂_t u(0) = κ/2 + f₂` (with the
/// far-field buffer applied) and compares them strictly inside the cone.
pub fn cross_validate(
    perturbation: &CauchyData,
    solver: &FixedPointSolver,
    cfg: &DirectConfig,
    points: &ComparisonPoints,
) -> Result<(CrossValidation, BlowupTime)> {
    let evaluator = FreeWaveEvaluator::new(perturbation)?;
    let bt = find_blowup_time(solver, &evaluator)?;
    let t_star = bt.blowup_time;
    let taus = solver.taus();
    let rhos = solver.grid();
    let node = |value: f64, step: f64, count: usize| -> Result<usize> {
        let idx = (value / step).round();
        if (idx * step - value).abs() > 1e-9 || idx < 0.0 || idx as usize >= count {
            return Err(Error::InvalidArgument(format!("comparison point {value} is not a grid node")));
        }
        Ok(idx as usize)
    };
    let tau_idx: Vec<usize> = points.taus.iter().map(|t| node(*t, taus.dtau(), taus.n_nodes())).collect::<Result<_>>()?;
    let rho_idx: Vec<usize> = points.rhos.iter().map(|r| node(*r, rhos.h(), rhos.n_nodes())).collect::<Result<_>>()?;
    if points.rhos.iter().any(|r| *r >= 1.0) {
        return Err(Error::InvalidArgument("comparison points must lie strictly inside the cone".into()));
    }
    let forcing = evaluator.pull_to_cone(t_star, taus, rhos)?;
    let sol = &bt.fixed_point.solution;

    let state = perturbed_ode_state(perturbation, cfg.grid()?)?;

    let mut order: Vec<usize> = (0..tau_idx.len()).collect();
    order.sort_by(|i, j| tau_idx[*i].cmp(&tau_idx[*j]));
    let sample_times: Vec<f64> = order.iter().map(|i| t_star * (1.0 - (-taus.tau(tau_idx[*i])).exp())).collect();
    let mut direct_rows: Vec<Vec<f64>> = Vec::new();
    let evo = evolve(state, cfg, &sample_times, |s| {
        let gap = t_star - s.time();
        direct_rows.push(rho_idx.iter().map(|j| s.value_at(rhos.rho(*j) * gap)).collect());
    })?;
    if direct_rows.len() != sample_times.len() {
        return Err(Error::NoBlowup { t_final: evo.state.time() });
    }
    let mut sup = 0.0f64;
    let mut sq = 0.0;
    let mut count = 0;
    for (row, i) in direct_rows.iter().zip(&order) {
        let ti = tau_idx[*i];
        let gap = t_star * (-taus.tau(ti)).exp();
        for (col, j) in rho_idx.iter().enumerate() {
            let pipeline = (KAPPA + forcing.value(ti, *j) + sol.first(ti)[*j]) / gap.sqrt();
            let d = pipeline - row[col];
            sup = sup.max(d.abs());
            sq += d * d;
            count += 1;
        }
    }
    let estimate = estimate_blowup_time(&evo.times(), &evo.origin_values()).ok();
    Ok((
        CrossValidation {
            pipeline_blowup_time: t_star,
            direct_blowup_time: estimate.map(|e| e.blowup_time),
            direct_width: estimate.map(|e| e.width),
            sup_discrepancy: sup,
            l2_discrepancy: (sq / count as f64).sqrt(),
            n_points: count,
        },
        bt,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_data_stays_zero() {
        let grid = RadialGrid::new(4.0, 256).unwrap();
        let state = EvolutionState::from_fns(grid, |_| 0.0, |_| 0.0).unwrap();
        let cfg = DirectConfig { t_final: 1.0, ..DirectConfig::default() };
        let evo = evolve(state, &cfg, &[], |_| {}).unwrap();
        assert!(evo.blowup.is_none());
        assert_eq!(evo.state.u_max(), 0.0);
    }

    #[test]
    fn cfl_violation() {
        let grid = RadialGrid::new(4.0, 64).unwrap();
        let mut s = EvolutionState::from_fns(grid, |_| 0.0, |_| 0.0).unwrap();
        assert!(matches!(s.step(grid.h()), Err(Error::Cfl { .. })));
    }

    #[test]
    fn exact_affine_inversion() {
        let t: Vec<f64> = vec![0.5, 0.6, 0.7, 0.8, 0.9];
        let u: Vec<f64> = t.iter().map(|t| KAPPA * (0.97 - t).powf(-0.5)).collect();
        let e = estimate_blowup_time(&t, &u).unwrap();
        assert!((e.blowup_time - 0.97).abs() < 1e-13);
        assert!((e.slope + 2.0 / 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(e.window, 5);
    }

    #[test]
    fn noisy_inversion() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let t: Vec<f64> = (0..60).map(|i| 0.5 + 0.46 * i as f64 / 59.0).collect();
        let u: Vec<f64> = t
            .iter()
            .map(|t| KAPPA * (0.97 - t).powf(-0.5) * (1.0 + 0.01 * (2.0 * rng.random::<f64>() - 1.0)))
            .collect();
        let e = estimate_blowup_time(&t, &u).unwrap();
        assert!((e.blowup_time - 0.97).abs() < 5e-3, "{e:?}");
    }

    #[test]
    fn ode_solution_solves_discrete_operator() {
        let grid = RadialGrid::new(4.0, 128).unwrap();
        let t: f64 = 0.3;
        let u = KAPPA * (1.0 - t).powf(-0.5);
        let utt = 0.75 * KAPPA * (1.0 - t).powf(-2.5);
        let mut w: Vec<f64> = grid.nodes().iter().map(|r| r * u).collect();
        let w_tt: Vec<f64> = grid.nodes().iter().map(|r| r * utt).collect();
        let last = w.len() - 1;
        w[last] = grid.r(last) * u;
        let resid = EvolutionState::operator_residual(&grid, &w, &w_tt);
        assert!(resid < 1e-10 * utt * grid.r_max(), "{resid}");
    }

    #[test]
    fn interpolation_is_exact_on_cubics_in_r_squared() {
        let grid = RadialGrid::new(4.0, 64).unwrap();
        let s = EvolutionState::from_fns(grid, |r| 1.0 + 0.5 * r * r, |_| 0.0).unwrap();
        for r in [0.0, 0.01, 0.7, 2.33] {
            assert!((s.value_at(r) - (1.0 + 0.5 * r * r)).abs() < 1e-12, "{r}");
        }
    }
}
