//! The linearization around the blowup profile in similarity coordinates,
//! its semigroup, and the rank-one projection onto the growing mode.
//!
//! The operator acts on pairs on the unit ball by
//!
//! ```text
//! φ₁ ↦ −ρφ₁′ − φ₁/2 + φ₂
//! φ₂ ↦ φ₁″ + (2/ρ)φ₁′ − ρφ₂′ − (3/2)φ₂ + (15/4)φ₁
//! ```
//!
//! where the last term is present only in the full operator. The constant pair
//! `g = (2, 3)` is an eigenfunction with eigenvalue 1.
//!
//! Stencils: centered differences in the interior; at `ρ = 0` the Laplacian is
//! closed by `3φ₁″(0)` (even symmetry); at `ρ = 1` first derivatives use the
//! second-order backward formula and the second derivative the shifted
//! three-point formula. All stencils differentiate constants exactly, so the
//! eigen-identity `Lg = g` holds to round-off on every grid.

use serde::{Deserialize, Serialize};

use crate::cone::mixed_norm;
use crate::error::{Error, Result};
use crate::numerics::linear_fit;
use crate::similarity::{h1_norm, FieldPair, TauGrid, UnitGrid};

/// The growing mode `g = (2, 3)`.
pub const UNSTABLE_MODE: (f64, f64) = (2.0, 3.0);

pub fn unstable_mode(grid: UnitGrid) -> FieldPair {
    FieldPair::constant(grid, UNSTABLE_MODE.0, UNSTABLE_MODE.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    /// The free part, without the potential term.
    Free,
    /// Only the potential term `(0, (15/4)φ₁)`.
    Potential,
    /// Free part plus potential.
    Full,
}

/// A discretized operator on stacked states `[φ₁; φ₂]`, stored as CSR.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    kind: OperatorKind,
    grid: UnitGrid,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl LinearOperator {
    pub fn new(kind: OperatorKind, grid: UnitGrid) -> Self {
        let m = grid.n_nodes();
        let h = grid.h();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); 2 * m];
        let with_free = kind != OperatorKind::Potential;
        let with_potential = kind != OperatorKind::Free;
        // First derivative stencil at node j: list of (offset node, weight).
        let d1 = |j: usize| -> Vec<(usize, f64)> {
            if j == 0 {
                vec![]
            } else if j == m - 1 {
                vec![(j, 1.5 / h), (j - 1, -2.0 / h), (j - 2, 0.5 / h)]
            } else {
                vec![(j + 1, 0.5 / h), (j - 1, -0.5 / h)]
            }
        };
        for j in 0..m {
            let rho = grid.rho(j);
            if with_free {
                let r1 = &mut rows[j];
                for (c, w) in d1(j) {
                    r1.push((c, -rho * w));
                }
                r1.push((j, -0.5));
                r1.push((m + j, 1.0));

                let r2 = &mut rows[m + j];
                let h2 = h * h;
                if j == 0 {
                    r2.push((0, -6.0 / h2));
                    r2.push((1, 6.0 / h2));
                } else if j == m - 1 {
                    r2.push((j, 1.0 / h2));
                    r2.push((j - 1, -2.0 / h2));
                    r2.push((j - 2, 1.0 / h2));
                    for (c, w) in d1(j) {
                        r2.push((c, 2.0 / rho * w));
                    }
                } else {
                    r2.push((j + 1, 1.0 / h2));
                    r2.push((j, -2.0 / h2));
                    r2.push((j - 1, 1.0 / h2));
                    for (c, w) in d1(j) {
                        r2.push((c, 2.0 / rho * w));
                    }
                }
                for (c, w) in d1(j) {
                    r2.push((m + c, -rho * w));
                }
                r2.push((m + j, -1.5));
            }
            if with_potential {
                rows[m + j].push((j, 3.75));
            }
        }
        let mut row_start = Vec::with_capacity(2 * m + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_start.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (c, w) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += w,
                    _ => merged.push((c, w)),
                }
            }
            for (c, w) in merged {
                cols.push(c);
                vals.push(w);
            }
            row_start.push(cols.len());
        }
        Self { kind, grid, row_start, cols, vals }
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn grid(&self) -> UnitGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        2 * self.grid.n_nodes()
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_start[i]..self.row_start[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(x, &mut out);
        out
    }

    pub fn apply_transpose_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, xi) in x.iter().enumerate() {
            for k in self.row_start[i]..self.row_start[i + 1] {
                out[self.cols[k]] += self.vals[k] * xi;
            }
        }
    }

    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_transpose_into(x, &mut out);
        out
    }

    pub fn apply_pair(&self, phi: &FieldPair) -> FieldPair {
        FieldPair::from_state(self.grid, &self.apply(&phi.to_state()))
    }
}

/// Applies the full linearized operator on the grid of `phi`.
pub fn apply_l(phi: &FieldPair) -> FieldPair {
    LinearOperator::new(OperatorKind::Full, phi.grid()).apply_pair(phi)
}

/// Maximum characteristic speed of the similarity flow on `[0, 1]` (`ρ + 1` at `ρ = 1`).
pub const MAX_CHARACTERISTIC_SPEED: f64 = 2.0;

pub const DEFAULT_CFL: f64 = 0.5;

/// RK4 time stepping of `∂_τφ = Lφ (+ forcing)`.
///
/// The step is `1/steps_per_unit` with `steps_per_unit` the smallest power of
/// two satisfying `Δτ ≤ cfl · h / 2`, so unit and dyadic τ-intervals are hit
/// exactly.
#[derive(Debug, Clone)]
pub struct Semigroup {
    op: LinearOperator,
    cfl: f64,
    steps_per_unit: usize,
}

impl Semigroup {
    pub fn new(grid: UnitGrid) -> Self {
        Self::with_cfl(LinearOperator::new(OperatorKind::Full, grid), DEFAULT_CFL).expect("default CFL is valid")
    }

    pub fn with_cfl(op: LinearOperator, cfl: f64) -> Result<Self> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::InvalidArgument(format!("CFL number must lie in (0, 1], got {cfl}")));
        }
        let limit = cfl * op.grid().h() / MAX_CHARACTERISTIC_SPEED;
        let steps_per_unit = (1.0 / limit).ceil().max(1.0) as usize;
        Ok(Self { op, cfl, steps_per_unit: steps_per_unit.next_power_of_two() })
    }

    pub fn operator(&self) -> &LinearOperator {
        &self.op
    }

    pub fn grid(&self) -> UnitGrid {
        self.op.grid()
    }

    pub fn cfl(&self) -> f64 {
        self.cfl
    }

    pub fn steps_per_unit(&self) -> usize {
        self.steps_per_unit
    }

    pub fn dtau(&self) -> f64 {
        1.0 / self.steps_per_unit as f64
    }

    /// Largest admissible step for this CFL number.
    pub fn step_limit(&self) -> f64 {
        self.cfl * self.grid().h() / MAX_CHARACTERISTIC_SPEED
    }

    /// Amplification of the mode `g` over one homogeneous step of size `dt`
    /// (the RK4 stability polynomial at 1).
    pub fn mode_growth(dt: f64) -> f64 {
        1.0 + dt * (1.0 + dt / 2.0 * (1.0 + dt / 3.0 * (1.0 + dt / 4.0)))
    }

    /// One homogeneous RK4 step in nested form `y + dtL(y + dt/2 L(y + dt/3 L(y + dt/4 Ly)))`.
    pub fn step_homogeneous(&self, y: &mut [f64], dt: f64, scratch: &mut [Vec<f64>; 2]) {
        self.nested_step(y, dt, scratch, false)
    }

    /// Adjoint of [`Semigroup::step_homogeneous`].
    pub fn step_adjoint(&self, y: &mut [f64], dt: f64, scratch: &mut [Vec<f64>; 2]) {
        self.nested_step(y, dt, scratch, true)
    }

    fn nested_step(&self, y: &mut [f64], dt: f64, scratch: &mut [Vec<f64>; 2], transpose: bool) {
        let [a, b] = scratch;
        a.copy_from_slice(y);
        for div in [4.0, 3.0, 2.0, 1.0] {
            if transpose {
                self.op.apply_transpose_into(a, b);
            } else {
                self.op.apply_into(a, b);
            }
            let c = dt / div;
            for ((ai, bi), yi) in a.iter_mut().zip(b.iter()).zip(y.iter()) {
                *ai = yi + c * bi;
            }
        }
        y.copy_from_slice(a);
    }

    /// One classical RK4 step of `y′ = Ly + F(σ)` given the forcing at the
    /// start, midpoint and end of the step.
    pub fn step_forced(&self, y: &mut [f64], dt: f64, forcing: [&[f64]; 3], work: &mut ForcedWork) {
        let n = y.len();
        let ForcedWork { k1, k2, k3, k4, tmp } = work;
        self.op.apply_into(y, k1);
        for i in 0..n {
            k1[i] += forcing[0][i];
            tmp[i] = y[i] + 0.5 * dt * k1[i];
        }
        self.op.apply_into(tmp, k2);
        for i in 0..n {
            k2[i] += forcing[1][i];
            tmp[i] = y[i] + 0.5 * dt * k2[i];
        }
        self.op.apply_into(tmp, k3);
        for i in 0..n {
            k3[i] += forcing[1][i];
            tmp[i] = y[i] + dt * k3[i];
        }
        self.op.apply_into(tmp, k4);
        for i in 0..n {
            k4[i] += forcing[2][i];
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    /// `S(τ)φ`, stepping with the largest step `≤ Δτ` that divides `τ`.
    pub fn propagate(&self, phi: &FieldPair, tau: f64) -> Result<FieldPair> {
        if tau < 0.0 || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!("propagation time must be >= 0, got {tau}")));
        }
        let n = (tau / self.dtau() - 1e-9).ceil().max(0.0) as usize;
        if n == 0 {
            return Ok(phi.clone());
        }
        self.propagate_with_step(phi, n, tau / n as f64)
    }

    /// `n_steps` homogeneous steps of size `dt`; rejects steps above the CFL limit.
    pub fn propagate_with_step(&self, phi: &FieldPair, n_steps: usize, dt: f64) -> Result<FieldPair> {
        if dt > self.step_limit() * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt, limit: self.step_limit() });
        }
        let mut y = phi.to_state();
        let mut scratch = [vec![0.0; y.len()], vec![0.0; y.len()]];
        for _ in 0..n_steps {
            self.step_homogeneous(&mut y, dt, &mut scratch);
        }
        Ok(FieldPair::from_state(self.grid(), &y))
    }

    /// Samples `S(τ)φ` at every node of `taus`, stepping at `Δτ`.
    pub fn trajectory(&self, phi: &FieldPair, taus: TauGrid) -> Result<Vec<FieldPair>> {
        let stride = self.stride(taus)?;
        let mut y = phi.to_state();
        let mut scratch = [vec![0.0; y.len()], vec![0.0; y.len()]];
        let mut out = Vec::with_capacity(taus.n_nodes());
        out.push(phi.clone());
        for _ in 0..taus.n_steps {
            for _ in 0..stride {
                self.step_homogeneous(&mut y, self.dtau(), &mut scratch);
            }
            out.push(FieldPair::from_state(self.grid(), &y));
        }
        Ok(out)
    }

    /// Number of internal steps per output interval of `taus`.
    pub fn stride(&self, taus: TauGrid) -> Result<usize> {
        let ratio = taus.dtau() / self.dtau();
        let stride = ratio.round();
        if stride < 1.0 || (ratio - stride).abs() > 1e-9 * ratio {
            return Err(Error::InvalidArgument(format!(
                "output spacing {} is not a multiple of the internal step {}",
                taus.dtau(),
                self.dtau()
            )));
        }
        Ok(stride as usize)
    }
}

/// Scratch buffers for [`Semigroup::step_forced`].
#[derive(Debug, Clone)]
pub struct ForcedWork {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl ForcedWork {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }
}

/// `S(τ)φ` with the default CFL number on the grid of `phi`.
pub fn propagate_s(phi: &FieldPair, tau: f64) -> Result<FieldPair> {
    Semigroup::new(phi.grid()).propagate(phi, tau)
}

/// The probe functional: mean of `φ₂` over `ρ ∈ [0, 1/4]` (trapezoid), divided by 3.
/// It takes the value 1 on `g`.
pub fn probe_functional(grid: UnitGrid) -> Vec<f64> {
    let m = grid.n_nodes();
    let last = (0..m).take_while(|&j| grid.rho(j) <= 0.25 + 1e-12).last().unwrap_or(0).max(1);
    let mut c = vec![0.0; 2 * m];
    let mut total = 0.0;
    for j in 0..=last {
        let w = if j == 0 || j == last { 0.5 } else { 1.0 };
        c[m + j] = w;
        total += w;
    }
    for v in &mut c[m..] {
        *v /= 3.0 * total;
    }
    c
}

pub const DEFAULT_TAU_DEFLATE: f64 = 12.0;

/// The projection `Pφ = ℓ(φ) g`, with `ℓ` obtained by propagating the probe
/// functional backwards through the adjoint steps for `τ_deflate` and
/// normalizing so that `ℓ(g) = 1`.
#[derive(Debug, Clone)]
pub struct UnstableProjection {
    grid: UnitGrid,
    functional: Vec<f64>,
    tau_deflate: f64,
}

impl UnstableProjection {
    pub fn new(semigroup: &Semigroup, tau_deflate: f64) -> Result<Self> {
        if tau_deflate <= 0.0 {
            return Err(Error::InvalidArgument(format!("tau_deflate must be positive, got {tau_deflate}")));
        }
        let grid = semigroup.grid();
        let n = (tau_deflate / semigroup.dtau()).round() as usize;
        let dt = tau_deflate / n as f64;
        let growth = Semigroup::mode_growth(dt);
        let mut ell = probe_functional(grid);
        let mut scratch = [vec![0.0; ell.len()], vec![0.0; ell.len()]];
        for _ in 0..n {
            semigroup.step_adjoint(&mut ell, dt, &mut scratch);
            // Divide by the mode's growth each step to keep the functional O(1).
            ell.iter_mut().for_each(|v| *v /= growth);
        }
        let g = unstable_mode(grid).to_state();
        let at_g: f64 = ell.iter().zip(&g).map(|(a, b)| a * b).sum();
        ell.iter_mut().for_each(|v| *v /= at_g);
        Ok(Self { grid, functional: ell, tau_deflate })
    }

    pub fn tau_deflate(&self) -> f64 {
        self.tau_deflate
    }

    pub fn functional(&self) -> &[f64] {
        &self.functional
    }

    /// `ℓ(φ)` on a stacked state.
    pub fn coefficient_of_state(&self, state: &[f64]) -> f64 {
        self.functional.iter().zip(state).map(|(a, b)| a * b).sum()
    }

    pub fn coefficient(&self, phi: &FieldPair) -> f64 {
        self.coefficient_of_state(&phi.to_state())
    }

    pub fn project(&self, phi: &FieldPair) -> FieldPair {
        unstable_mode(self.grid).scaled(self.coefficient(phi))
    }

    /// `(I − P)φ`.
    pub fn remainder(&self, phi: &FieldPair) -> FieldPair {
        phi.axpy(-self.coefficient(phi), &unstable_mode(self.grid))
    }

    /// `(I − P)` applied to a stacked state in place.
    pub fn remove_mode(&self, state: &mut [f64]) {
        let a = self.coefficient_of_state(state);
        let m = self.grid.n_nodes();
        for v in &mut state[..m] {
            *v -= a * UNSTABLE_MODE.0;
        }
        for v in &mut state[m..] {
            *v -= a * UNSTABLE_MODE.1;
        }
    }
}

/// Result of the forward deflation route.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coefficient: f64,
    pub remainder: FieldPair,
    /// First integer τ at which the coefficient estimate settled.
    pub settled_at: f64,
}

/// Computes `Pφ` by forward deflation: `α(τ) = ℓ₀(S(τ)φ) / ℓ₀(S(τ)g)` with
/// the probe functional `ℓ₀`, checked at every unit of τ until two
/// consecutive estimates agree to `tolerance` (relative to `max(|α|, ‖φ‖/‖g‖)`).
pub fn project_unstable(semigroup: &Semigroup, phi: &FieldPair, tau_deflate: f64, tolerance: f64) -> Result<Projection> {
    let grid = semigroup.grid();
    let probe = probe_functional(grid);
    let dt = semigroup.dtau();
    let growth = Semigroup::mode_growth(dt);
    let scale = h1_norm(phi) / 7f64.sqrt();
    let mut y = phi.to_state();
    let mut scratch = [vec![0.0; y.len()], vec![0.0; y.len()]];
    let mut previous: Option<f64> = None;
    let units = tau_deflate.floor() as usize;
    for unit in 1..=units {
        for _ in 0..semigroup.steps_per_unit() {
            semigroup.step_homogeneous(&mut y, dt, &mut scratch);
            y.iter_mut().for_each(|v| *v /= growth);
        }
        let alpha: f64 = probe.iter().zip(&y).map(|(a, b)| a * b).sum();
        if let Some(prev) = previous {
            if (alpha - prev).abs() <= tolerance * alpha.abs().max(scale) {
                let remainder = phi.axpy(-alpha, &unstable_mode(grid));
                return Ok(Projection { coefficient: alpha, remainder, settled_at: unit as f64 });
            }
        }
        previous = Some(alpha);
    }
    if scale == 0.0 {
        return Ok(Projection { coefficient: 0.0, remainder: phi.clone(), settled_at: 0.0 });
    }
    Err(Error::ProjectionNotConverged { tau: tau_deflate, tolerance })
}

/// Twenty smooth pairs on the unit ball used to probe the linear flow:
/// polynomials, bumps and oscillations in either component.
pub fn standard_battery(grid: UnitGrid) -> Vec<FieldPair> {
    use std::f64::consts::PI;
    let bump = |c: f64, w: f64| move |r: f64| (-((r - c) / w).powi(2)).exp();
    let mut out = Vec::with_capacity(20);
    out.push(FieldPair::from_fn(grid, |_| 1.0, |_| 0.0));
    out.push(FieldPair::from_fn(grid, |_| 0.0, |_| 1.0));
    out.push(FieldPair::from_fn(grid, |r| r * r, |_| 0.0));
    out.push(FieldPair::from_fn(grid, |_| 0.0, |r| r * r));
    out.push(FieldPair::from_fn(grid, |r| 1.0 - r * r, |r| r * r * r));
    out.push(FieldPair::from_fn(grid, bump(0.5, 0.1), |_| 0.0));
    out.push(FieldPair::from_fn(grid, |_| 0.0, bump(0.5, 0.1)));
    out.push(FieldPair::from_fn(grid, bump(0.0, 0.3), bump(0.0, 0.3)));
    out.push(FieldPair::from_fn(grid, bump(0.8, 0.1), |_| 0.0));
    out.push(FieldPair::from_fn(grid, |_| 0.0, bump(0.25, 0.05)));
    out.push(FieldPair::from_fn(grid, |r| (PI * r).cos(), |_| 0.0));
    out.push(FieldPair::from_fn(grid, |_| 0.0, |r| (PI * r).cos()));
    out.push(FieldPair::from_fn(grid, |r| (3.0 * PI * r).cos(), |r| (2.0 * PI * r).sin()));
    out.push(FieldPair::from_fn(grid, |r| (5.0 * PI * r * r).cos(), |_| 0.0));
    out.push(FieldPair::from_fn(grid, |r| (-r * r).exp(), |r| -2.0 * r * r * (-r * r).exp()));
    out.push(FieldPair::from_fn(grid, |_| 2.0, |_| -5.0));
    out.push(FieldPair::from_fn(grid, |r| r.powi(4) - 0.5, |r| 1.0 - r));
    out.push(FieldPair::from_fn(grid, |r| (4.0 * r).sin() / (1.0 + r), |r| r * (1.0 - r)));
    out.push(FieldPair::from_fn(grid, |_| 2.0, |_| 3.0).axpy(1.0, &FieldPair::from_fn(grid, bump(0.5, 0.1), |_| 0.0)));
    out.push(FieldPair::from_fn(grid, |r| (r - 0.3).abs().powi(3), |r| (7.0 * r).cos()));
    out
}

/// One battery entry of [`strichartz_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrichartzRow {
    pub id: usize,
    pub remainder_norm: f64,
    /// `sup_τ ‖S(τ)(I−P)φ₀‖ / ‖(I−P)φ₀‖`.
    pub sup_ratio: f64,
    /// Slope of `log‖S(τ)(I−P)φ₀‖` against `τ`.
    pub log_norm_slope: f64,
    /// `‖(S(τ)(I−P)φ₀)₁‖_{L^q L^p} / ‖(I−P)φ₀‖` for each requested pair.
    pub strichartz_ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrichartzReport {
    pub pairs: Vec<(f64, f64)>,
    pub rows: Vec<StrichartzRow>,
    /// Battery entries skipped because `(I−P)φ₀` vanishes.
    pub skipped: Vec<usize>,
}

impl StrichartzReport {
    pub fn max_sup_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.sup_ratio).fold(0.0, f64::max)
    }

    pub fn max_log_norm_slope(&self) -> f64 {
        self.rows.iter().map(|r| r.log_norm_slope).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_strichartz_ratio(&self, pair_index: usize) -> f64 {
        self.rows.iter().map(|r| r.strichartz_ratios[pair_index]).fold(0.0, f64::max)
    }

    /// Rows `(test id, τ_max, norm, ratio)` as CSV, one line per battery entry and pair.
    pub fn to_csv(&self, tau_max: f64) -> String {
        let mut out = String::from("test_id,tau,norm,ratio\n");
        for row in &self.rows {
            out.push_str(&format!("{},{:.6e},{:.6e},{:.6e}\n", row.id, tau_max, row.remainder_norm, row.sup_ratio));
            for r in &row.strichartz_ratios {
                out.push_str(&format!("{},{:.6e},{:.6e},{:.6e}\n", row.id, tau_max, row.remainder_norm, r));
            }
        }
        out
    }
}

/// Checks `1/q + 3/p = 1/2`.
pub fn is_admissible(q: f64, p: f64) -> bool {
    let inv = |x: f64| if x.is_infinite() { 0.0 } else { 1.0 / x };
    (inv(q) + 3.0 * inv(p) - 0.5).abs() < 1e-12
}

/// Measures boundedness and Strichartz ratios of `S(τ)(I − P)` over a battery.
pub fn strichartz_check(
    semigroup: &Semigroup,
    projection: &UnstableProjection,
    battery: &[FieldPair],
    pairs: &[(f64, f64)],
    taus: TauGrid,
) -> Result<StrichartzReport> {
    for &(q, p) in pairs {
        if !is_admissible(q, p) {
            return Err(Error::InvalidArgument(format!("(q, p) = ({q}, {p}) violates 1/q + 3/p = 1/2")));
        }
    }
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (id, phi0) in battery.iter().enumerate() {
        let rem = projection.remainder(phi0);
        let rem_norm = h1_norm(&rem);
        if rem_norm <= 1e-12 * h1_norm(phi0).max(1e-300) {
            skipped.push(id);
            continue;
        }
        let traj = semigroup.trajectory(&rem, taus)?;
        let norms: Vec<f64> = traj.iter().map(h1_norm).collect();
        let sup_ratio = norms.iter().fold(0.0f64, |m, v| m.max(*v)) / rem_norm;
        let xs = taus.nodes();
        let ys: Vec<f64> = norms.iter().map(|v| (v / rem_norm).max(1e-300).ln()).collect();
        let slope = linear_fit(&xs, &ys).map(|f| f.slope).unwrap_or(0.0);
        let firsts: Vec<&[f64]> = traj.iter().map(|p| p.first.as_slice()).collect();
        let ones = vec![1.0; firsts.len()];
        let strichartz_ratios = pairs
            .iter()
            .map(|&(q, p)| mixed_norm(&firsts, &ones, taus, semigroup.grid(), q, p).0 / rem_norm)
            .collect();
        rows.push(StrichartzRow { id, remainder_norm: rem_norm, sup_ratio, log_norm_slope: slope, strichartz_ratios });
    }
    Ok(StrichartzReport { pairs: pairs.to_vec(), rows, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> UnitGrid {
        UnitGrid::new(n).unwrap()
    }

    #[test]
    fn operator_examples() {
        let g = grid(65);
        let lg = apply_l(&unstable_mode(g));
        assert!(lg.first.iter().all(|v| (v - 2.0).abs() < 1e-10));
        assert!(lg.second.iter().all(|v| (v - 3.0).abs() < 1e-10));
        assert_eq!(apply_l(&FieldPair::zeros(g)).max_abs(), 0.0);
        let c = 0.7;
        let out = apply_l(&FieldPair::constant(g, c, c / 2.0));
        assert!(out.first.iter().all(|v| v.abs() < 1e-10));
        assert!(out.second.iter().all(|v| (v - 3.0 * c).abs() < 1e-10));
    }

    #[test]
    fn full_is_free_plus_potential() {
        let g = grid(33);
        let phi = FieldPair::from_fn(g, |r| (3.0 * r).sin() + 1.0, |r| r * r - 0.2);
        let full = LinearOperator::new(OperatorKind::Full, g).apply_pair(&phi);
        let free = LinearOperator::new(OperatorKind::Free, g).apply_pair(&phi);
        let pot = LinearOperator::new(OperatorKind::Potential, g).apply_pair(&phi);
        let sum = free.axpy(1.0, &pot);
        assert!(full.sub(&sum).max_abs() < 1e-9);
        assert!(pot.first.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn transpose_is_adjoint() {
        let op = LinearOperator::new(OperatorKind::Full, grid(17));
        let x: Vec<f64> = (0..34).map(|i| (i as f64 * 0.7).sin()).collect();
        let y: Vec<f64> = (0..34).map(|i| (i as f64 * 1.3).cos()).collect();
        let lhs: f64 = op.apply(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(op.apply_transpose(&y)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn interior_consistency_second_order() {
        let err = |n: usize| {
            let g = grid(n);
            let phi = FieldPair::from_fn(g, |r| (r * r).cos(), |r| r.exp());
            let out = apply_l(&phi);
            let exact2 = |r: f64| {
                // φ₁ = cos ρ², φ₁′ = −2ρ sin ρ², φ₁″ = −2 sin ρ² − 4ρ² cos ρ²
                let d1 = -2.0 * r * (r * r).sin();
                let d2 = -2.0 * (r * r).sin() - 4.0 * r * r * (r * r).cos();
                let lap = if r == 0.0 { 3.0 * d2 } else { d2 + 2.0 / r * d1 };
                lap - r * r.exp() - 1.5 * r.exp() + 3.75 * (r * r).cos()
            };
            (1..n - 1).map(|j| (out.second[j] - exact2(g.rho(j))).abs()).fold(0.0, f64::max)
        };
        let (a, b) = (err(33), err(65));
        assert!(a / b > 3.5, "ratio {}", a / b);
    }

    #[test]
    fn zero_stays_zero_and_cfl_is_enforced() {
        let sg = Semigroup::new(grid(33));
        assert_eq!(sg.propagate(&FieldPair::zeros(grid(33)), 2.0).unwrap().max_abs(), 0.0);
        assert!(matches!(
            sg.propagate_with_step(&FieldPair::zeros(grid(33)), 1, 1.0),
            Err(Error::Cfl { .. })
        ));
    }

    #[test]
    fn unstable_mode_grows_exponentially() {
        let g = grid(129);
        let out = propagate_s(&unstable_mode(g), 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!(out.first.iter().all(|v| (v - 2.0 * e).abs() < 1e-8));
        assert!(out.second.iter().all(|v| (v - 3.0 * e).abs() < 1e-8));
    }

    #[test]
    fn flow_property() {
        let g = grid(65);
        let sg = Semigroup::new(g);
        let phi = FieldPair::from_fn(g, |r| (-10.0 * (r - 0.4).powi(2)).exp(), |r| r.cos());
        let a = sg.propagate(&sg.propagate(&phi, 0.5).unwrap(), 0.75).unwrap();
        let b = sg.propagate(&phi, 1.25).unwrap();
        assert!(a.sub(&b).max_abs() < 1e-10 * b.max_abs());
    }

    #[test]
    fn projection_contract() {
        let g = grid(65);
        let sg = Semigroup::new(g);
        let p = UnstableProjection::new(&sg, DEFAULT_TAU_DEFLATE).unwrap();
        assert!((p.coefficient(&unstable_mode(g)) - 1.0).abs() < 1e-14);
        let phi = FieldPair::from_fn(g, |r| r.sin() + 0.3, |r| 1.0 - r * r);
        let once = p.project(&phi);
        let twice = p.project(&once);
        assert!(once.sub(&twice).max_abs() < 1e-13);
        let fwd = project_unstable(&sg, &phi, DEFAULT_TAU_DEFLATE, 1e-6).unwrap();
        assert!((fwd.coefficient - p.coefficient(&phi)).abs() < 1e-6 * fwd.coefficient.abs().max(1.0));
        // Constant pairs: (a, b) = α g + β (2, −5) gives α = (5a + 2b)/16 exactly.
        let (a, b) = (0.4, -0.3);
        let exact = (5.0 * a + 2.0 * b) / 16.0;
        assert!((p.coefficient(&FieldPair::constant(g, a, b)) - exact).abs() < 1e-6);
    }

    #[test]
    fn projection_commutes_with_flow() {
        let g = grid(65);
        let sg = Semigroup::new(g);
        let p = UnstableProjection::new(&sg, DEFAULT_TAU_DEFLATE).unwrap();
        let phi = FieldPair::from_fn(g, |r| (-20.0 * (r - 0.5).powi(2)).exp(), |r| r);
        let tau = 1.5;
        let after = p.project(&sg.propagate(&phi, tau).unwrap());
        let before = sg.propagate(&p.project(&phi), tau).unwrap();
        assert!(after.sub(&before).max_abs() < 1e-6 * before.max_abs().max(1.0));
    }

    #[test]
    fn bump_perturbation_deflates_to_one() {
        let g = grid(65);
        let sg = Semigroup::new(g);
        let phi = unstable_mode(g).axpy(0.1, &FieldPair::from_fn(g, |r| (-100.0 * (r - 0.5).powi(2)).exp(), |_| 0.0));
        let base = project_unstable(&sg, &unstable_mode(g), 8.0, 1e-4).unwrap().coefficient;
        let pert = project_unstable(&sg, &phi, 8.0, 1e-4).unwrap().coefficient;
        assert!((base - 1.0).abs() < 1e-12);
        assert!((pert - 1.0).abs() < 1e-2);
    }

    #[test]
    fn admissibility() {
        assert!(is_admissible(2.0, f64::INFINITY));
        assert!(is_admissible(5.0, 10.0));
        assert!(!is_admissible(2.0, 4.0));
    }
}
