//! Uniform radial grids, the 3D radial Fourier transform, Sobolev norms and
//! frequency projections for radial functions.
//!
//! A radial function `f(|x|)` on ℝ³ has a radial Fourier transform given by a
//! sine transform of `w(r) = r f(r)`:
//!
//! ```text
//! ν f̂(ν) = √(2/π) ∫₀^∞ sin(rν) r f(r) dr,      r f(r) = √(2/π) ∫₀^∞ sin(rν) ν f̂(ν) dν.
//! ```
//!
//! On the grid `r_j = j h` (`h = r_max / n`) with frequencies `ν_k = kπ / r_max`
//! both integrals become the same type-I DST, and the discrete pair is an
//! exact inverse pair.

mod dst;
pub mod io;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::smoothstep;

pub use dst::dst1;

/// Default relative tolerance on `|f(r_max)| / max|f|` for the forward transform.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-8;

/// Uniform grid `r_j = j·h`, `j = 0..=n_points`, on `[0, r_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    r_max: f64,
    n_points: usize,
}

impl RadialGrid {
    pub fn new(r_max: f64, n_points: usize) -> Result<Self> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::InvalidArgument(format!("r_max must be positive, got {r_max}")));
        }
        if n_points < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 grid intervals, got {n_points}"
            )));
        }
        Ok(Self { r_max, n_points })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Number of intervals; there are `n_points + 1` nodes.
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn h(&self) -> f64 {
        self.r_max / self.n_points as f64
    }

    pub fn r(&self, j: usize) -> f64 {
        j as f64 * self.h()
    }

    /// Nodes `r_0 .. r_n`.
    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_points).map(|j| self.r(j)).collect()
    }

    /// Frequency spacing `π / r_max`.
    pub fn dnu(&self) -> f64 {
        PI / self.r_max
    }

    /// Frequency `ν_k` for `k = 1..=n_points`.
    pub fn nu(&self, k: usize) -> f64 {
        k as f64 * self.dnu()
    }

    /// Frequencies `ν_1 .. ν_n`; entry `i` holds `ν_{i+1}`.
    pub fn frequencies(&self) -> Vec<f64> {
        (1..=self.n_points).map(|k| self.nu(k)).collect()
    }

    /// Largest frequency on the dual grid.
    pub fn nu_max(&self) -> f64 {
        self.nu(self.n_points)
    }

    /// 3D radial spectral measure `4π ν_k² Δν` of mode `k`.
    pub fn spectral_weight(&self, k: usize) -> f64 {
        let nu = self.nu(k);
        4.0 * PI * nu * nu * self.dnu()
    }
}

/// A radial function sampled on a [`RadialGrid`], with an optional spectral view.
///
/// `values[j] = f(r_j)` for `j = 0..=n`; `spectral[k-1] = f̂(ν_k)` for
/// `k = 1..=n`. The top mode `k = n` is invisible to the grid (its sine
/// vanishes at every node) and is always zero in transforms produced here.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    grid: RadialGrid,
    values: Vec<f64>,
    spectral: Option<Vec<f64>>,
}

impl RadialProfile {
    pub fn from_values(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points + 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.n_points + 1,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite sample at node {bad}")));
        }
        Ok(Self { grid, values, spectral: None })
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().into_iter().map(f).collect();
        Self::from_values(grid, values)
    }

    /// Builds a profile from spectral samples and fills the physical view.
    pub fn from_spectral(grid: RadialGrid, spectral: Vec<f64>) -> Result<Self> {
        if spectral.len() != grid.n_points {
            return Err(Error::InvalidArgument(format!(
                "expected {} spectral samples, got {}",
                grid.n_points,
                spectral.len()
            )));
        }
        let values = synthesize(&grid, &spectral);
        Ok(Self { grid, values, spectral: Some(spectral) })
    }

    pub fn from_spectral_fn(grid: RadialGrid, fhat: impl Fn(f64) -> f64) -> Result<Self> {
        let mut spectral: Vec<f64> = grid.frequencies().into_iter().map(fhat).collect();
        if let Some(last) = spectral.last_mut() {
            *last = 0.0;
        }
        Self::from_spectral(grid, spectral)
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_points + 1],
            spectral: Some(vec![0.0; grid.n_points]),
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spectral(&self) -> Option<&[f64]> {
        self.spectral.as_deref()
    }

    pub fn spectral_or_err(&self) -> Result<&[f64]> {
        self.spectral.as_deref().ok_or(Error::MissingSpectral)
    }

    pub fn value_at_origin(&self) -> f64 {
        self.values[0]
    }

    /// `(4π ∫ f² r² dr)^{1/2}` by the trapezoid rule (exact Plancherel partner
    /// of [`RadialProfile::spectral_l2_norm`]).
    pub fn physical_l2_norm(&self) -> f64 {
        let h = self.grid.h();
        let s: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let w = self.grid.r(j) * v;
                w * w
            })
            .sum();
        (4.0 * PI * h * s).sqrt()
    }

    pub fn spectral_l2_norm(&self) -> Result<f64> {
        sobolev_norm(self, 0.0)
    }

    /// Returns a copy with the spectral view replaced and the physical view resynthesized.
    pub fn with_spectral(&self, spectral: Vec<f64>) -> Result<Self> {
        Self::from_spectral(self.grid, spectral)
    }

    /// Multiplies the spectrum by `m(ν_k)`.
    pub fn spectral_multiply(&self, m: impl Fn(f64) -> f64) -> Result<Self> {
        let spec = self.spectral_or_err()?;
        let out = spec
            .iter()
            .enumerate()
            .map(|(i, v)| v * m(self.grid.nu(i + 1)))
            .collect();
        self.with_spectral(out)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
            spectral: self.spectral.as_ref().map(|s| s.iter().map(|v| c * v).collect()),
        }
    }
}

/// Physical samples from spectral samples.
fn synthesize(grid: &RadialGrid, spectral: &[f64]) -> Vec<f64> {
    let n = grid.n_points;
    let dnu = grid.dnu();
    let c = (2.0 / PI).sqrt() * dnu;
    let weighted: Vec<f64> = (1..n).map(|k| grid.nu(k) * spectral[k - 1]).collect();
    let w = dst1(&weighted);
    let mut values = vec![0.0; n + 1];
    for j in 1..n {
        values[j] = c * w[j - 1] / grid.r(j);
    }
    // w(r)/r → w'(0) = √(2/π) Σ ν_k² f̂_k Δν.
    values[0] = c * (1..n).map(|k| grid.nu(k) * weighted[k - 1]).sum::<f64>();
    values
}

/// Forward radial transform with the default tail tolerance.
pub fn forward_transform(f: &RadialProfile) -> Result<RadialProfile> {
    forward_transform_with_tolerance(f, DEFAULT_TAIL_TOLERANCE)
}

/// Forward radial transform; `tail_tolerance` bounds `|f(r_max)|` relative to `max|f|`.
pub fn forward_transform_with_tolerance(f: &RadialProfile, tail_tolerance: f64) -> Result<RadialProfile> {
    let grid = f.grid;
    let n = grid.n_points;
    let peak = f.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tail = f.values[n].abs();
    if peak > 0.0 && tail > tail_tolerance * peak {
        return Err(Error::Truncation { value: tail, tolerance: tail_tolerance * peak });
    }
    let h = grid.h();
    let w: Vec<f64> = (1..n).map(|j| grid.r(j) * f.values[j]).collect();
    let s = dst1(&w);
    let c = (2.0 / PI).sqrt() * h;
    let mut spectral = vec![0.0; n];
    for k in 1..n {
        spectral[k - 1] = c * s[k - 1] / grid.nu(k);
    }
    Ok(RadialProfile { grid, values: f.values.clone(), spectral: Some(spectral) })
}

/// Inverse radial transform: fills the physical view from the spectral view.
pub fn inverse_transform(f: &RadialProfile) -> Result<RadialProfile> {
    let spec = f.spectral_or_err()?;
    let values = synthesize(&f.grid, spec);
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite value at node {bad} after synthesis")));
    }
    Ok(RadialProfile { grid: f.grid, values, spectral: Some(spec.to_vec()) })
}

/// Japanese bracket `⟨ν⟩ = (1 + ν²)^{1/2}`.
pub fn bracket(nu: f64) -> f64 {
    (1.0 + nu * nu).sqrt()
}

/// `‖f‖_{H^s(ℝ³)} = (Σ_k ⟨ν_k⟩^{2s} f̂_k² · 4πν_k²Δν)^{1/2}`.
pub fn sobolev_norm(f: &RadialProfile, s: f64) -> Result<f64> {
    let spec = f.spectral_or_err()?;
    let g = &f.grid;
    let total: f64 = spec
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let k = i + 1;
            let nu = g.nu(k);
            (1.0 + nu * nu).powf(s) * v * v * g.spectral_weight(k)
        })
        .sum();
    Ok(total.sqrt())
}

/// Annulus index `⌊ν⌋` of a frequency, half-open `[n, n+1)`.
pub fn annulus_index(nu: f64) -> usize {
    nu.floor() as usize
}

/// Keeps only modes with `ν_k ∈ [n, n+1)`.
pub fn annulus_project(f: &RadialProfile, n: usize) -> Result<RadialProfile> {
    let spec = f.spectral_or_err()?;
    let out = spec
        .iter()
        .enumerate()
        .map(|(i, v)| if annulus_index(f.grid.nu(i + 1)) == n { *v } else { 0.0 })
        .collect();
    f.with_spectral(out)
}

/// Contributions `Σ_{ν_k ∈ [n,n+1)} ⟨ν_k⟩^{2s} f̂_k² μ_k` for every annulus
/// `n = 0..=⌊ν_max⌋`; they sum to `‖f‖²_{H^s}`.
pub fn annulus_energies(f: &RadialProfile, s: f64) -> Result<Vec<f64>> {
    let spec = f.spectral_or_err()?;
    let g = &f.grid;
    let mut out = vec![0.0; annulus_index(g.nu_max()) + 1];
    for (i, v) in spec.iter().enumerate() {
        let k = i + 1;
        let nu = g.nu(k);
        out[annulus_index(nu)] += (1.0 + nu * nu).powf(s) * v * v * g.spectral_weight(k);
    }
    Ok(out)
}

/// Smooth cutoff: 1 on `[0, 1/2]`, 0 on `[1, ∞)`, quintic smoothstep between.
pub fn lp_cutoff(x: f64) -> f64 {
    1.0 - smoothstep(2.0 * x.abs() - 1.0)
}

/// Littlewood–Paley multiplier at dyadic scale `scale` (1, 2, 4, ...).
/// Supported in `ν < 1` for scale 1 and `N/4 < ν < N` otherwise.
pub fn lp_multiplier(nu: f64, scale: u64) -> f64 {
    let n = scale as f64;
    if scale <= 1 {
        lp_cutoff(nu)
    } else {
        lp_cutoff(nu / n) - lp_cutoff(2.0 * nu / n)
    }
}

/// Littlewood–Paley projection `Q_N`.
pub fn littlewood_paley(f: &RadialProfile, scale: u64) -> Result<RadialProfile> {
    if !scale.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("scale {scale} is not a power of two")));
    }
    f.spectral_multiply(|nu| lp_multiplier(nu, scale))
}
