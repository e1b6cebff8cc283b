//! Free radial waves: the spectral propagator, evaluation on the backward
//! lightcone in similarity variables, and mixed space-time norms.
//!
//! Mode by mode the free flow is exact:
//! `f̂(t, ν) = cos(tν) f̂₁(ν) + sin(tν)/ν f̂₂(ν)`.
//! Cone samples are evaluated straight from the sine series (no spatial
//! interpolation) with Clenshaw's recurrence.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cone::{mixed_norm, Chart, ConeField};
use crate::error::{Error, Result};
use crate::numerics::linear_fit;
use crate::radial_spectral::{annulus_project, sobolev_norm, RadialGrid, RadialProfile};
use crate::randomization::{randomize_component, CoefficientLaw, Component, RandomSeed};
use crate::similarity::{TauGrid, UnitGrid};

/// Cauchy data `(u(0), ∂_t u(0))` on a common radial grid, with spectral views.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyData {
    pub position: RadialProfile,
    pub velocity: RadialProfile,
}

impl CauchyData {
    pub fn new(position: RadialProfile, velocity: RadialProfile) -> Result<Self> {
        if position.grid() != velocity.grid() {
            return Err(Error::InvalidArgument("Cauchy components live on different grids".into()));
        }
        position.spectral_or_err()?;
        velocity.spectral_or_err()?;
        Ok(Self { position, velocity })
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        Self { position: RadialProfile::zeros(grid), velocity: RadialProfile::zeros(grid) }
    }

    pub fn grid(&self) -> RadialGrid {
        *self.position.grid()
    }

    /// `‖(f₁, f₂)‖_{H^s × H^{s−1}}`.
    pub fn norm(&self, s: f64) -> Result<f64> {
        let a = sobolev_norm(&self.position, s)?;
        let b = sobolev_norm(&self.velocity, s - 1.0)?;
        Ok((a * a + b * b).sqrt())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { position: self.position.scaled(c), velocity: self.velocity.scaled(c) }
    }

    /// Randomizes both components with independent coefficient sequences.
    pub fn randomized(&self, law: CoefficientLaw, seed: RandomSeed) -> Result<Self> {
        Ok(Self {
            position: randomize_component(&self.position, law, seed, Component::Position)?,
            velocity: randomize_component(&self.velocity, law, seed, Component::Velocity)?,
        })
    }
}

/// Relative `L²` mass of the data in `r ≥ r_min`.
fn tail_fraction(data: &CauchyData, r_min: f64) -> f64 {
    let g = data.grid();
    let mut total = 0.0;
    let mut tail = 0.0;
    for p in [&data.position, &data.velocity] {
        for (j, v) in p.values().iter().enumerate() {
            let w = (g.r(j) * v).powi(2);
            total += w;
            if g.r(j) >= r_min {
                tail += w;
            }
        }
    }
    if total > 0.0 {
        (tail / total).sqrt()
    } else {
        0.0
    }
}

/// Relative data mass allowed within `|t|` of the outer boundary.
pub const CAUSALITY_TOLERANCE: f64 = 1e-6;

fn check_time(data: &CauchyData, t: f64) -> Result<()> {
    if !(t.abs() <= 2.0) {
        return Err(Error::InvalidArgument(format!("free propagation needs |t| <= 2, got {t}")));
    }
    let tail = tail_fraction(data, data.grid().r_max() - t.abs());
    if tail > CAUSALITY_TOLERANCE {
        return Err(Error::Causality { t, tail });
    }
    Ok(())
}

/// Position and velocity at time `t` (negative `t` runs the flow backwards).
pub fn propagate_free_pair(data: &CauchyData, t: f64) -> Result<CauchyData> {
    check_time(data, t)?;
    let g = data.grid();
    let a = data.position.spectral_or_err()?;
    let b = data.velocity.spectral_or_err()?;
    let mut pos = Vec::with_capacity(a.len());
    let mut vel = Vec::with_capacity(a.len());
    for k in 1..=a.len() {
        let nu = g.nu(k);
        let (s, c) = (t * nu).sin_cos();
        pos.push(c * a[k - 1] + s / nu * b[k - 1]);
        vel.push(-nu * s * a[k - 1] + c * b[k - 1]);
    }
    Ok(CauchyData {
        position: RadialProfile::from_spectral(g, pos)?,
        velocity: RadialProfile::from_spectral(g, vel)?,
    })
}

/// The free solution `cos(t|∇|) f₁ + sin(t|∇|)/|∇| f₂` at time `t`.
pub fn propagate_free(data: &CauchyData, t: f64) -> Result<RadialProfile> {
    Ok(propagate_free_pair(data, t)?.position)
}

/// `∫ (∂_t u)² + |∇u|² dx`, computed spectrally.
pub fn free_energy(data: &CauchyData) -> Result<f64> {
    let g = data.grid();
    let a = data.position.spectral_or_err()?;
    let b = data.velocity.spectral_or_err()?;
    Ok((1..=a.len())
        .map(|k| {
            let nu = g.nu(k);
            (nu * nu * a[k - 1] * a[k - 1] + b[k - 1] * b[k - 1]) * g.spectral_weight(k)
        })
        .sum())
}

/// Evaluates the free solution at arbitrary `(t, r)` from its sine series.
#[derive(Debug, Clone)]
pub struct FreeWaveEvaluator {
    dnu: f64,
    nus: Vec<f64>,
    /// `√(2/π) Δν ν_k f̂₁(ν_k)` and `√(2/π) Δν f̂₂(ν_k)` for the retained modes.
    pos: Vec<f64>,
    vel: Vec<f64>,
}

/// Relative weight of discarded modes in the sup-norm bound of the series.
pub const MODE_TRIM_TOLERANCE: f64 = 1e-13;

impl FreeWaveEvaluator {
    pub fn new(data: &CauchyData) -> Result<Self> {
        let g = data.grid();
        let a = data.position.spectral_or_err()?;
        let b = data.velocity.spectral_or_err()?;
        let n = a.len();
        let dnu = g.dnu();
        let c = (2.0 / PI).sqrt() * dnu;
        // |sin(νr)/r| ≤ ν bounds each mode's contribution to |u| by ν(ν|f̂₁| + |f̂₂|)Δν.
        let weight: Vec<f64> = (1..=n)
            .map(|k| {
                let nu = g.nu(k);
                nu * (nu * a[k - 1].abs() + b[k - 1].abs())
            })
            .collect();
        let total: f64 = weight.iter().sum();
        let mut keep = n;
        let mut tail = 0.0;
        while keep > 0 && tail + weight[keep - 1] <= MODE_TRIM_TOLERANCE * total {
            tail += weight[keep - 1];
            keep -= 1;
        }
        let nus: Vec<f64> = (1..=keep).map(|k| g.nu(k)).collect();
        let pos = (0..keep).map(|i| c * nus[i] * a[i]).collect();
        let vel = (0..keep).map(|i| c * b[i]).collect();
        Ok(Self { dnu, nus, pos, vel })
    }

    pub fn n_modes(&self) -> usize {
        self.nus.len()
    }

    /// Series coefficients of `r·u(t, r) = Σ_k a_k sin(ν_k r)` at time `t`.
    pub fn amplitudes(&self, t: f64) -> Vec<f64> {
        self.nus
            .iter()
            .zip(self.pos.iter().zip(&self.vel))
            .map(|(nu, (p, v))| {
                let (s, c) = (t * nu).sin_cos();
                c * p + s * v
            })
            .collect()
    }

    /// `u(t, r)` for every `r` in `radii`, sharing the amplitudes at time `t`.
    pub fn eval_many(&self, t: f64, radii: &[f64]) -> Vec<f64> {
        let a = self.amplitudes(t);
        radii.iter().map(|&r| clenshaw_sine_over_r(&a, self.dnu, r)).collect()
    }

    pub fn eval(&self, t: f64, r: f64) -> f64 {
        self.eval_many(t, &[r])[0]
    }

    /// The similarity pullback `f^T(τ, ρ) = (T − t)^{1/2} u(t, ρ(T − t))`.
    pub fn pull_to_cone(&self, blowup_time: f64, taus: TauGrid, rhos: UnitGrid) -> Result<ConeField> {
        if !(0.5..=1.5).contains(&blowup_time) {
            return Err(Error::InvalidArgument(format!("T = {blowup_time} outside [1/2, 3/2]")));
        }
        let m = rhos.n_nodes();
        let mut values = Vec::with_capacity(taus.n_nodes() * m);
        let mut radii = vec![0.0; m];
        for i in 0..taus.n_nodes() {
            let gap = blowup_time * (-taus.tau(i)).exp();
            let t = blowup_time - gap;
            for (j, r) in radii.iter_mut().enumerate() {
                *r = rhos.rho(j) * gap;
            }
            let w = gap.sqrt();
            values.extend(self.eval_many(t, &radii).into_iter().map(|v| w * v));
        }
        ConeField::new(blowup_time, Chart::Similarity, taus, rhos, values)
    }
}

/// `(1/r) Σ_{k≥1} a_k sin(k x)` with `x = Δν r`, via Clenshaw:
/// `Σ a_k sin(kx) = b_1 sin x` where `b_k = a_k + 2 cos x b_{k+1} − b_{k+2}`.
fn clenshaw_sine_over_r(a: &[f64], dnu: f64, r: f64) -> f64 {
    let x = dnu * r;
    let two_cos = 2.0 * x.cos();
    let (mut b1, mut b2) = (0.0, 0.0);
    for ak in a.iter().rev() {
        let b0 = ak + two_cos * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    let sinc = if r == 0.0 { dnu } else { x.sin() / r };
    b1 * sinc
}

/// Cone field of the free evolution of `data` for blowup time `T`.
pub fn pull_to_cone(data: &CauchyData, blowup_time: f64, taus: TauGrid, rhos: UnitGrid) -> Result<ConeField> {
    FreeWaveEvaluator::new(data)?.pull_to_cone(blowup_time, taus, rhos)
}

/// Exponent of `(T − t)` turning the Cartesian `L^q_t L^p_x` norm of `u` into
/// the similarity `L^q_τ L^p_y` norm: `1/2 − 1/q − 3/p`.
pub fn weight_exponent(q: f64, p: f64) -> f64 {
    let inv = |x: f64| if x.is_infinite() { 0.0 } else { 1.0 / x };
    0.5 - inv(q) - 3.0 * inv(p)
}

/// Largest share of the norm the last tenth of the τ range may carry.
pub const HORIZON_TAIL_LIMIT: f64 = 0.01;

/// Mixed norm of a cone field and the share of it carried by the last tenth
/// of the τ range.
///
/// With `weighted = true` this is the similarity-chart norm
/// `‖f^T‖_{L^q_τ L^p_y}`, equal to the Cartesian norm of
/// `(T−t)^{1/2−1/q−3/p} u`; with `weighted = false` it is the plain
/// Cartesian `‖u‖_{L^q_t L^p_x}` over the sampled part of the cone.
pub fn strichartz_norm_unchecked(field: &ConeField, q: f64, p: f64, weighted: bool) -> (f64, f64) {
    let sim = field.to_similarity();
    let taus = sim.tau_grid();
    let rows: Vec<&[f64]> = (0..taus.n_nodes()).map(|i| sim.row(i)).collect();
    let weights: Vec<f64> = if weighted {
        vec![1.0; rows.len()]
    } else {
        let e = -weight_exponent(q, p);
        (0..taus.n_nodes())
            .map(|i| (sim.blowup_time() * (-taus.tau(i)).exp()).powf(e))
            .collect()
    };
    mixed_norm(&rows, &weights, taus, sim.rho_grid(), q, p)
}

/// As [`strichartz_norm_unchecked`], but signals a truncated horizon.
pub fn strichartz_norm(field: &ConeField, q: f64, p: f64, weighted: bool) -> Result<f64> {
    let (norm, fraction) = strichartz_norm_unchecked(field, q, p, weighted);
    if fraction > HORIZON_TAIL_LIMIT {
        return Err(Error::HorizonTruncation { fraction, limit: HORIZON_TAIL_LIMIT });
    }
    Ok(norm)
}

/// `‖P_n f‖_∞ / ‖P_n f‖_{L²}` for the annulus projection `P_n`; `None` if the
/// annulus carries no mass.
pub fn annulus_sup_ratio(f: &RadialProfile, n: usize) -> Result<Option<f64>> {
    let p = annulus_project(f, n)?;
    let l2 = sobolev_norm(&p, 0.0)?;
    if l2 == 0.0 {
        return Ok(None);
    }
    let sup = p.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(Some(sup / l2))
}

/// Settings for [`strichartz_statistics`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticsConfig {
    /// Uniform T-grid on `[1/2, 3/2]`.
    pub t_points: usize,
    /// Re-sample 11 points around the best grid point at a tenth of the spacing.
    pub refine: bool,
    pub taus: TauGrid,
    pub rhos: UnitGrid,
    pub master_seed: u64,
}

impl Default for StatisticsConfig {
    fn default() -> Self {
        Self {
            t_points: 101,
            refine: true,
            taus: TauGrid { tau_max: 8.0, n_steps: 256 },
            rhos: UnitGrid::new(65).expect("odd"),
            master_seed: 0,
        }
    }
}

/// `sup_{T ∈ [a, b]} ‖f^T‖_{L^q L^p}` on a uniform grid plus local refinement.
pub fn sup_over_blowup_times(
    evaluator: &FreeWaveEvaluator,
    (q, p): (f64, f64),
    t_range: (f64, f64),
    cfg: &StatisticsConfig,
) -> Result<f64> {
    let norm_at = |t: f64| -> Result<f64> {
        let field = evaluator.pull_to_cone(t, cfg.taus, cfg.rhos)?;
        Ok(strichartz_norm_unchecked(&field, q, p, true).0)
    };
    let (a, b) = t_range;
    let n = cfg.t_points.max(2);
    let spacing = (b - a) / (n - 1) as f64;
    let mut best = (f64::NEG_INFINITY, a);
    for i in 0..n {
        let t = a + spacing * i as f64;
        let v = norm_at(t)?;
        if v > best.0 {
            best = (v, t);
        }
    }
    if cfg.refine {
        for i in 0..11 {
            let t = (best.1 + spacing * (i as f64 - 5.0) / 10.0).clamp(a, b);
            let v = norm_at(t)?;
            if v > best.0 {
                best = (v, t);
            }
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStatistics {
    pub q: f64,
    pub p: f64,
    /// `(r, (E sup_T ‖f^{T,ω}‖^r)^{1/r})` for `r ∈ {2, 4, 8}`.
    pub moments: Vec<(u32, f64)>,
    /// Moment divided by `√r ‖(f₁, f₂)‖_{H^s × H^{s−1}}`.
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrichartzStatistics {
    pub data_norm: f64,
    pub n_samples: usize,
    pub pairs: Vec<PairStatistics>,
    /// `(n, ‖P_n f₁‖_∞ / ‖P_n f₁‖_{L²})` over annuli `n ∈ {4, 8, 16, 32}` that carry mass.
    pub annulus_ratios: Vec<(usize, f64)>,
    /// Slope of `log ratio` against `log n`; at most 1 under a linear-in-n bound.
    pub annulus_log_slope: Option<f64>,
    /// `max_n ratio / n`.
    pub annulus_constant: f64,
}

/// Probabilistic Strichartz measurements over `n_samples` randomizations of `data`.
pub fn strichartz_statistics(
    data: &CauchyData,
    law: CoefficientLaw,
    s: f64,
    n_samples: usize,
    pairs: &[(f64, f64)],
    cfg: &StatisticsConfig,
) -> Result<StrichartzStatistics> {
    if n_samples < 100 {
        return Err(Error::InsufficientSamples { required: 100, got: n_samples });
    }
    let data_norm = data.norm(s)?;
    let mut sups = vec![Vec::with_capacity(n_samples); pairs.len()];
    for i in 0..n_samples as u64 {
        let sample = data.randomized(law, RandomSeed::new(cfg.master_seed, i))?;
        let ev = FreeWaveEvaluator::new(&sample)?;
        for (k, &pair) in pairs.iter().enumerate() {
            sups[k].push(sup_over_blowup_times(&ev, pair, (0.5, 1.5), cfg)?);
        }
    }
    let pair_stats = pairs
        .iter()
        .zip(&sups)
        .map(|(&(q, p), values)| {
            let mut moments = Vec::new();
            let mut ratios = Vec::new();
            for r in [2u32, 4, 8] {
                let m = (values.iter().map(|v| v.powi(r as i32)).sum::<f64>() / values.len() as f64)
                    .powf(1.0 / r as f64);
                moments.push((r, m));
                ratios.push(if data_norm > 0.0 { m / ((r as f64).sqrt() * data_norm) } else { 0.0 });
            }
            PairStatistics { q, p, moments, ratios }
        })
        .collect();
    let (annulus_ratios, annulus_log_slope, annulus_constant) = annulus_amplification(&data.position, &[4, 8, 16, 32])?;
    Ok(StrichartzStatistics {
        data_norm,
        n_samples,
        pairs: pair_stats,
        annulus_ratios,
        annulus_log_slope,
        annulus_constant,
    })
}

/// Sup-norm amplification of annulus projections of `f` and the log-log slope in `n`.
pub fn annulus_amplification(
    f: &RadialProfile,
    annuli: &[usize],
) -> Result<(Vec<(usize, f64)>, Option<f64>, f64)> {
    let mut ratios = Vec::new();
    for &n in annuli {
        if let Some(r) = annulus_sup_ratio(f, n)? {
            ratios.push((n, r));
        }
    }
    let xs: Vec<f64> = ratios.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = ratios.iter().map(|(_, r)| r.ln()).collect();
    let slope = linear_fit(&xs, &ys).map(|f| f.slope);
    let constant = ratios.iter().map(|(n, r)| r / *n as f64).fold(0.0, f64::max);
    Ok((ratios, slope, constant))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial_spectral::forward_transform;

    fn data_from(grid: RadialGrid, f1: impl Fn(f64) -> f64, f2: impl Fn(f64) -> f64) -> CauchyData {
        let p = forward_transform(&RadialProfile::from_fn(grid, f1).unwrap()).unwrap();
        let v = forward_transform(&RadialProfile::from_fn(grid, f2).unwrap()).unwrap();
        CauchyData::new(p, v).unwrap()
    }

    #[test]
    fn time_zero_is_identity() {
        let g = RadialGrid::new(12.0, 512).unwrap();
        let d = data_from(g, |r| (-r * r).exp(), |r| r * (-r * r).exp());
        let u = propagate_free(&d, 0.0).unwrap();
        assert_eq!(u.spectral(), d.position.spectral());
    }

    #[test]
    fn dalembert_value_at_origin() {
        // w₀ = r e^{−r²}; u(t, 0) = w₀′(t) = (1 − 2t²) e^{−t²}.
        let g = RadialGrid::new(12.0, 1024).unwrap();
        let d = data_from(g, |r| (-r * r).exp(), |_| 0.0);
        let u = propagate_free(&d, 1.0).unwrap();
        assert!((u.value_at_origin() + (-1f64).exp()).abs() < 1e-10);
        let ev = FreeWaveEvaluator::new(&d).unwrap();
        assert!((ev.eval(1.0, 0.0) + (-1f64).exp()).abs() < 1e-10);
        // Off the origin: u(t, r) = [w₀(r + t) + w₀(r − t)] / (2r), odd extension.
        let w0 = |x: f64| x * (-x * x).exp();
        for r in [0.3, 1.1, 2.5] {
            let exact = (w0(r + 1.0) + w0(r - 1.0)) / (2.0 * r);
            assert!((ev.eval(1.0, r) - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn energy_and_reversibility() {
        let g = RadialGrid::new(12.0, 512).unwrap();
        let d = data_from(g, |r| (-2.0 * r * r).exp(), |r| (1.0 - r * r) * (-r * r).exp());
        let e0 = free_energy(&d).unwrap();
        let mid = propagate_free_pair(&d, 1.7).unwrap();
        assert!((free_energy(&mid).unwrap() - e0).abs() < 1e-12 * e0);
        let back = propagate_free_pair(&mid, -1.7).unwrap();
        for (a, b) in back.position.spectral().unwrap().iter().zip(d.position.spectral().unwrap()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn causality_margin_is_enforced() {
        let g = RadialGrid::new(5.0, 256).unwrap();
        let d = data_from(g, |r| (-(r - 3.0) * (r - 3.0) * 16.0).exp(), |_| 0.0);
        assert!(matches!(propagate_free(&d, 2.0), Err(Error::Causality { .. })));
        assert!(propagate_free(&d, 0.5).is_ok());
        assert!(propagate_free(&d, 3.0).is_err());
    }

    #[test]
    fn constant_plateau_pulls_back_to_weight() {
        let g = RadialGrid::new(16.0, 1024).unwrap();
        let c = 0.3;
        let d = data_from(g, |r| c * crate::numerics::smooth_cutoff(r, 2.0, 6.0), |_| 0.0);
        let taus = TauGrid::new(4.0, 16).unwrap();
        let rhos = UnitGrid::new(9).unwrap();
        let field = pull_to_cone(&d, 1.2, taus, rhos).unwrap();
        for i in 0..taus.n_nodes() {
            let expected = c * (1.2 * (-taus.tau(i)).exp()).sqrt();
            for v in field.row(i) {
                assert!((v - expected).abs() < 1e-9, "{v} vs {expected}");
            }
        }
    }

    #[test]
    fn cone_matches_grid_propagation() {
        let g = RadialGrid::new(12.0, 768).unwrap();
        let d = data_from(g, |r| (-r * r).exp() * (3.0 * r).cos(), |r| (-2.0 * r * r).exp());
        let taus = TauGrid::new(2.0, 4).unwrap();
        let rhos = UnitGrid::new(5).unwrap();
        let field = pull_to_cone(&d, 1.0, taus, rhos).unwrap().to_cartesian();
        // Points where ρ(T − t) lands on a grid node: compare with grid synthesis.
        let (t, _) = field.point(0, 0);
        let u = propagate_free(&d, t).unwrap();
        for j in 0..5 {
            let (_, r) = field.point(0, j);
            let node = (r / g.h()).round() as usize;
            assert!((field.value(0, j) - u.values()[node]).abs() < 1e-11);
        }
    }

    #[test]
    fn weight_exponents() {
        assert!((weight_exponent(2.0, 4.0) + 0.75).abs() < 1e-15);
        assert!(weight_exponent(5.0, 10.0).abs() < 1e-15);
        assert!((weight_exponent(1.0, 2.0) + 2.0).abs() < 1e-15);
        assert!(weight_exponent(2.0, f64::INFINITY).abs() < 1e-15);
    }

    #[test]
    fn unit_slab_norm() {
        // Indicator of τ ∈ [0, ln 2] on a grid whose nodes include ln 2.
        let taus = TauGrid::new(8.0 * std::f64::consts::LN_2, 256).unwrap();
        let rhos = UnitGrid::new(33).unwrap();
        let cut = std::f64::consts::LN_2 + 1e-12;
        let field = ConeField::from_fn(1.0, taus, rhos, |tau, _| if tau <= cut { 1.0 } else { 0.0 });
        let (norm, _) = strichartz_norm_unchecked(&field, 1.0, 2.0, true);
        let exact = std::f64::consts::LN_2 * (4.0 * PI / 3.0).sqrt();
        // Simpson on a jump: first-order in the τ spacing.
        assert!((norm - exact).abs() < 2.0 * taus.dtau() * exact);
        assert_eq!(strichartz_norm(&ConeField::zeros(1.0, taus, rhos), 2.0, 4.0, true).unwrap(), 0.0);
    }

    #[test]
    fn weighted_similarity_norm_equals_cartesian() {
        let g = RadialGrid::new(12.0, 512).unwrap();
        let d = data_from(g, |r| (-r * r).exp(), |_| 0.0);
        let taus = TauGrid::new(8.0, 256).unwrap();
        let rhos = UnitGrid::new(33).unwrap();
        let field = pull_to_cone(&d, 1.0, taus, rhos).unwrap();
        let (q, p) = (5.0, 10.0);
        // Exponent 0: weighted and unweighted coincide.
        let a = strichartz_norm_unchecked(&field, q, p, true).0;
        let b = strichartz_norm_unchecked(&field, q, p, false).0;
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn horizon_truncation_is_flagged() {
        let taus = TauGrid::new(8.0, 64).unwrap();
        let rhos = UnitGrid::new(9).unwrap();
        let field = ConeField::from_fn(1.0, taus, rhos, |_, _| 1.0);
        assert!(matches!(strichartz_norm(&field, 2.0, 4.0, true), Err(Error::HorizonTruncation { .. })));
    }

    #[test]
    fn annulus_sup_ratio_oracle() {
        // f̂ = 1 on [n, n+1): sup at the origin equals √(2/π) Σ ν_k² Δν.
        let g = RadialGrid::new(40.0, 4096).unwrap();
        let f = RadialProfile::from_spectral_fn(g, |nu| if (16.0..17.0).contains(&nu) { 1.0 } else { 0.0 }).unwrap();
        let ratio = annulus_sup_ratio(&f, 16).unwrap().unwrap();
        let sum: f64 = (1..4096).map(|k| g.nu(k)).filter(|nu| (16.0..17.0).contains(nu)).map(|nu| nu * nu).sum();
        let sup = (2.0 / PI).sqrt() * sum * g.dnu();
        let l2 = (4.0 * PI * sum * g.dnu()).sqrt();
        assert!((ratio - sup / l2).abs() < 1e-10 * ratio);
        assert!(annulus_sup_ratio(&f, 3).unwrap().is_none());
    }
}
