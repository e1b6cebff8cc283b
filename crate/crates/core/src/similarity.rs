//! Similarity coordinates on the backward lightcone, the ODE blowup profile,
//! unit-ball field pairs and their H¹-type norm.
//!
//! With `τ = −log(T−t) + log T` and `ρ = r/(T−t)`, the lightcone
//! `{r ≤ T − t}` becomes the half-cylinder `[0, ∞) × [0, 1]` and the blowup
//! solution `κ(T−t)^{-1/2}` becomes the constant `κ`.

use serde::{Deserialize, Serialize};

use crate::cone::ConeField;
use crate::error::{Error, Result};
use crate::numerics::{simpson, simpson_weights};
use crate::KAPPA;

/// The ODE blowup solution `u(t) = κ (T−t)^{-1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupProfile {
    pub blowup_time: f64,
}

impl BlowupProfile {
    pub fn new(blowup_time: f64) -> Self {
        Self { blowup_time }
    }

    pub fn value(&self, t: f64) -> f64 {
        KAPPA * (self.blowup_time - t).powf(-0.5)
    }

    pub fn time_derivative(&self, t: f64) -> f64 {
        0.5 * KAPPA * (self.blowup_time - t).powf(-1.5)
    }

    pub fn second_time_derivative(&self, t: f64) -> f64 {
        0.75 * KAPPA * (self.blowup_time - t).powf(-2.5)
    }

    /// `∂_t²u − u⁵`, zero for the exact profile.
    pub fn ode_residual(&self, t: f64) -> f64 {
        self.second_time_derivative(t) - self.value(t).powi(5)
    }
}

/// `(t, r) ↦ (τ, ρ)`; errors outside the cone `0 ≤ t < T`, `0 ≤ r ≤ T − t`.
pub fn to_similarity(t: f64, r: f64, blowup_time: f64) -> Result<(f64, f64)> {
    let gap = blowup_time - t;
    if !(t >= 0.0 && gap > 0.0 && r >= 0.0 && r <= gap * (1.0 + 1e-14)) {
        return Err(Error::InvalidArgument(format!(
            "(t, r) = ({t}, {r}) is outside the cone of T = {blowup_time}"
        )));
    }
    Ok((blowup_time.ln() - gap.ln(), (r / gap).min(1.0)))
}

/// `(τ, ρ) ↦ (t, r)`.
pub fn from_similarity(tau: f64, rho: f64, blowup_time: f64) -> (f64, f64) {
    let gap = blowup_time * (-tau).exp();
    (blowup_time - gap, rho * gap)
}

/// Uniform grid on `ρ ∈ [0, 1]` with an odd number of nodes (for Simpson).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitGrid {
    n_nodes: usize,
}

impl UnitGrid {
    pub const DEFAULT_NODES: usize = 513;

    pub fn new(n_nodes: usize) -> Result<Self> {
        if n_nodes < 5 || n_nodes % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "unit grid needs an odd node count >= 5, got {n_nodes}"
            )));
        }
        Ok(Self { n_nodes })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n_nodes - 1) as f64
    }

    pub fn rho(&self, j: usize) -> f64 {
        j as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes).map(|j| self.rho(j)).collect()
    }

    /// The grid with half the spacing.
    pub fn refined(&self) -> Self {
        Self { n_nodes: 2 * self.n_nodes - 1 }
    }
}

impl Default for UnitGrid {
    fn default() -> Self {
        Self { n_nodes: Self::DEFAULT_NODES }
    }
}

/// Uniform grid on `τ ∈ [0, τ_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauGrid {
    pub tau_max: f64,
    /// Number of intervals; there are `n_steps + 1` nodes.
    pub n_steps: usize,
}

impl TauGrid {
    pub fn new(tau_max: f64, n_steps: usize) -> Result<Self> {
        if !(tau_max > 0.0 && tau_max.is_finite()) || n_steps == 0 {
            return Err(Error::InvalidArgument(format!("bad tau grid ({tau_max}, {n_steps})")));
        }
        Ok(Self { tau_max, n_steps })
    }

    pub fn dtau(&self) -> f64 {
        self.tau_max / self.n_steps as f64
    }

    pub fn tau(&self, i: usize) -> f64 {
        i as f64 * self.dtau()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.tau(i)).collect()
    }
}

/// A pair `(φ₁, φ₂)` of radial functions on the unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    grid: UnitGrid,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl FieldPair {
    pub fn new(grid: UnitGrid, first: Vec<f64>, second: Vec<f64>) -> Result<Self> {
        if first.len() != grid.n_nodes || second.len() != grid.n_nodes {
            return Err(Error::InvalidArgument(format!(
                "field pair lengths ({}, {}) do not match {} nodes",
                first.len(),
                second.len(),
                grid.n_nodes
            )));
        }
        Ok(Self { grid, first, second })
    }

    pub fn zeros(grid: UnitGrid) -> Self {
        Self::constant(grid, 0.0, 0.0)
    }

    pub fn constant(grid: UnitGrid, a: f64, b: f64) -> Self {
        Self { grid, first: vec![a; grid.n_nodes], second: vec![b; grid.n_nodes] }
    }

    pub fn from_fn(grid: UnitGrid, f1: impl Fn(f64) -> f64, f2: impl Fn(f64) -> f64) -> Self {
        let nodes = grid.nodes();
        Self {
            grid,
            first: nodes.iter().map(|&r| f1(r)).collect(),
            second: nodes.iter().map(|&r| f2(r)).collect(),
        }
    }

    /// Builds a pair from a stacked state `[φ₁; φ₂]`.
    pub fn from_state(grid: UnitGrid, state: &[f64]) -> Self {
        let m = grid.n_nodes;
        Self { grid, first: state[..m].to_vec(), second: state[m..2 * m].to_vec() }
    }

    /// Stacked state `[φ₁; φ₂]`.
    pub fn to_state(&self) -> Vec<f64> {
        let mut s = self.first.clone();
        s.extend_from_slice(&self.second);
        s
    }

    pub fn grid(&self) -> UnitGrid {
        self.grid
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            first: self.first.iter().map(|v| c * v).collect(),
            second: self.second.iter().map(|v| c * v).collect(),
        }
    }

    /// `self + c · other`.
    pub fn axpy(&self, c: f64, other: &FieldPair) -> Self {
        Self {
            grid: self.grid,
            first: self.first.iter().zip(&other.first).map(|(a, b)| a + c * b).collect(),
            second: self.second.iter().zip(&other.second).map(|(a, b)| a + c * b).collect(),
        }
    }

    pub fn sub(&self, other: &FieldPair) -> Self {
        self.axpy(-1.0, other)
    }

    pub fn max_abs(&self) -> f64 {
        self.first.iter().chain(&self.second).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Second-order finite-difference derivative on a uniform grid with
/// one-sided three-point closures at both ends.
pub fn derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        return d;
    }
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    for j in 1..n - 1 {
        d[j] = (values[j + 1] - values[j - 1]) / (2.0 * h);
    }
    d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
    d
}

/// `(∫₀¹ ((ρφ₁)′)² + (ρφ₂)² dρ)^{1/2}`.
pub fn h1_norm(phi: &FieldPair) -> f64 {
    h1_norm_squared(phi).sqrt()
}

pub fn h1_norm_squared(phi: &FieldPair) -> f64 {
    let g = phi.grid;
    let h = g.h();
    let w: Vec<f64> = phi.first.iter().enumerate().map(|(j, v)| g.rho(j) * v).collect();
    let dw = derivative(&w, h);
    let integrand: Vec<f64> = dw
        .iter()
        .zip(&phi.second)
        .enumerate()
        .map(|(j, (d, p))| {
            let rp = g.rho(j) * p;
            d * d + rp * rp
        })
        .collect();
    simpson(&integrand, h)
}

/// The equivalent form `(∫₀¹ ((φ₁′)² + φ₂²)ρ² dρ + φ₁(1)²)^{1/2}`.
///
/// Integrating `2ρφ₁φ₁′` by parts leaves the boundary term at `ρ = 1`, so the
/// point value is taken at the edge of the ball, not at the centre.
pub fn h1_norm_weighted(phi: &FieldPair) -> f64 {
    let g = phi.grid;
    let h = g.h();
    let d = derivative(&phi.first, h);
    let integrand: Vec<f64> = d
        .iter()
        .zip(&phi.second)
        .enumerate()
        .map(|(j, (a, b))| (a * a + b * b) * g.rho(j).powi(2))
        .collect();
    (simpson(&integrand, h) + phi.first[g.n_nodes - 1].powi(2)).sqrt()
}

/// `‖h‖_{L^p(B³)} = (4π ∫₀¹ |h|^p ρ² dρ)^{1/p}`; `p = ∞` gives the max.
pub fn ball_lp_norm(values: &[f64], grid: UnitGrid, p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let w = simpson_weights(grid.n_nodes, grid.h());
    let s: f64 = values
        .iter()
        .zip(&w)
        .enumerate()
        .map(|(j, (v, wj))| wj * v.abs().powf(p) * grid.rho(j).powi(2))
        .sum();
    (4.0 * std::f64::consts::PI * s).powf(1.0 / p)
}

/// The perturbation of the rescaled blowup data at trial time `T`:
/// `κ (T^{1/2} − 1, (T^{3/2} − 1)/2)`, constant in `ρ`.
pub fn initial_perturbation(blowup_time: f64, grid: UnitGrid) -> FieldPair {
    let (a, b) = initial_perturbation_values(blowup_time);
    FieldPair::constant(grid, a, b)
}

pub fn initial_perturbation_values(blowup_time: f64) -> (f64, f64) {
    (
        KAPPA * (blowup_time.sqrt() - 1.0),
        0.5 * KAPPA * (blowup_time.powf(1.5) - 1.0),
    )
}

/// Amplitude-weighted pullback `ψ(τ, ρ) = (T−t)^{1/2} v(t, r)` of a field
/// given in Cartesian form.
pub fn psi_from_v(
    v: impl Fn(f64, f64) -> f64,
    blowup_time: f64,
    taus: TauGrid,
    rhos: UnitGrid,
) -> ConeField {
    ConeField::from_fn(blowup_time, taus, rhos, |tau, rho| {
        let (t, r) = from_similarity(tau, rho, blowup_time);
        (blowup_time - t).sqrt() * v(t, r)
    })
}

/// `(ψ₁, ψ₂) = (ψ, (∂_τ + ρ∂_ρ + 1/2)ψ)` at every τ node, by second-order
/// finite differences in both variables.
pub fn first_order_vars(psi: &ConeField) -> Vec<FieldPair> {
    let taus = psi.tau_grid();
    let rhos = psi.rho_grid();
    let nt = taus.n_nodes();
    let m = rhos.n_nodes();
    let column = |j: usize| -> Vec<f64> { (0..nt).map(|i| psi.value(i, j)).collect() };
    let dtau: Vec<Vec<f64>> = (0..m).map(|j| derivative(&column(j), taus.dtau())).collect();
    (0..nt)
        .map(|i| {
            let row = psi.row(i).to_vec();
            let drho = derivative(&row, rhos.h());
            let second = (0..m)
                .map(|j| dtau[j][i] + rhos.rho(j) * drho[j] + 0.5 * row[j])
                .collect();
            FieldPair { grid: rhos, first: row, second }
        })
        .collect()
}
