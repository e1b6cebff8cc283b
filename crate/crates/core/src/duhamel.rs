//! The modified Duhamel equation in similarity variables, its Picard
//! iteration, and selection of the blowup time.
//!
//! Writing the solution as `κ + f^T + φ₁` in similarity variables, the
//! perturbation obeys `∂_τφ = Lφ + (0, N(φ₁, f^T))` with
//! `N(φ₁, f) = (κ + f + φ₁)⁵ − κ⁵ − 5κ⁴φ₁`. The growing mode is removed by
//! solving the modified fixed-point problem
//!
//! ```text
//! K(φ)(τ) = (I−P)[S(τ)φ₀ + ∫₀^τ S(τ−σ)𝒩(σ) dσ] − g ∫_τ^∞ e^{τ−σ} ℓ(𝒩(σ)) dσ
//! ```
//!
//! whose solution solves the original equation exactly when the scalar
//! `F(T) = ℓ(φ₀^T) + ∫₀^∞ e^{−σ} ℓ(𝒩(σ)) dσ` vanishes.
//!
//! The causal integral is computed by co-evolving `Φ′ = LΦ + (I−P)𝒩` with RK4
//! (forcing interpolated by cubic Lagrange polynomials between output
//! nodes); the tail integral by a backward recursion with exact exponential
//! weights for piecewise-linear integrands. Picard iterates are formed
//! incrementally, `φ^{k+1} = φ^k + K(φ^k) − K(φ^{k−1})`, where the difference
//! only involves the increment of `N`; this keeps contraction ratios
//! measurable far below the round-off level of `φ` itself.

use serde::{Deserialize, Serialize};

use crate::cone::{mixed_norm, Chart, ConeField};
use crate::error::{Error, Result};
use crate::free_wave::FreeWaveEvaluator;
use crate::numerics::simpson;
use crate::semigroup::{
    unstable_mode, ForcedWork, LinearOperator, OperatorKind, Semigroup, UnstableProjection, UNSTABLE_MODE,
};
use crate::similarity::{h1_norm, initial_perturbation, FieldPair, TauGrid, UnitGrid};
use crate::KAPPA;

/// `N(φ₁, f) = (κ + f + φ₁)⁵ − κ⁵ − 5κ⁴φ₁`, evaluated in the expanded form
/// `5[(κ+f)⁴ − κ⁴]φ₁ + 10(κ+f)³φ₁² + 10(κ+f)²φ₁³ + 5(κ+f)φ₁⁴ + φ₁⁵ + (κ+f)⁵ − κ⁵`,
/// which avoids cancelling against `κ⁵` when both arguments are small.
pub fn nonlinearity(phi1: f64, f: f64) -> f64 {
    let a = KAPPA + f;
    let k4 = KAPPA.powi(4);
    // (κ+f)⁴ − κ⁴ and (κ+f)⁵ − κ⁵ through their factored forms.
    let d4 = f * (a * a * a + a * a * KAPPA + a * KAPPA * KAPPA + KAPPA.powi(3));
    let d5 = f * (a.powi(4) + a.powi(3) * KAPPA + a * a * KAPPA * KAPPA + a * KAPPA.powi(3) + k4);
    let p = phi1;
    5.0 * d4 * p + p * p * (10.0 * a.powi(3) + p * (10.0 * a * a + p * (5.0 * a + p))) + d5
}

/// `N(a, f) − N(b, f) = (a − b)[Σ_{j=0}^{4} (κ+f+a)^j (κ+f+b)^{4−j} − 5κ⁴]`.
pub fn nonlinearity_increment(a: f64, b: f64, f: f64) -> f64 {
    let x = KAPPA + f + a;
    let y = KAPPA + f + b;
    // Σ x^j y^{4−j} − 5κ⁴ written as a sum of differences so it stays
    // accurate when x, y ≈ κ.
    let s = x.powi(4) + x.powi(3) * y + x * x * y * y + x * y.powi(3) + y.powi(4);
    let k4 = KAPPA.powi(4);
    let small = s - 5.0 * k4;
    (a - b) * small
}

/// Configuration of the fixed-point solve and blowup-time search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Smallness parameter; also the half-width of the bracket `[1−δ, 1+δ]`.
    pub delta: f64,
    /// Forcing smallness: `‖f‖_{L¹L²}, ‖f‖_{L⁵L¹⁰} ≤ cδ`.
    pub c: f64,
    pub picard_max_iter: usize,
    /// Iterate at least this many times even if the tolerance is met earlier.
    pub picard_min_iter: usize,
    /// Tolerance on `‖φ^{k+1} − φ^k‖_Z`.
    pub picard_tol: f64,
    /// Tolerance on `|F(T*)|`.
    pub tol_f: f64,
    pub taus: TauGrid,
    /// Nodes of the unit-ball grid (odd).
    pub rho_nodes: usize,
    pub cfl: f64,
    pub tau_deflate: f64,
    /// Constant `C` of the ball `𝒵_{Cδ}`; iterates beyond `10Cδ` count as divergent.
    pub ball_constant: f64,
    /// Reject forcing or data violating the smallness condition before iterating.
    pub enforce_smallness: bool,
    pub max_bisection_steps: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            c: 0.1,
            picard_max_iter: 50,
            picard_min_iter: 1,
            picard_tol: 1e-9,
            tol_f: 1e-8,
            taus: TauGrid { tau_max: 8.0, n_steps: 256 },
            rho_nodes: 129,
            cfl: crate::semigroup::DEFAULT_CFL,
            tau_deflate: crate::semigroup::DEFAULT_TAU_DEFLATE,
            ball_constant: 4.0,
            enforce_smallness: false,
            max_bisection_steps: 60,
        }
    }
}

/// Norms of the forcing entering the smallness condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingNorms {
    pub l1_l2: f64,
    pub l5_l10: f64,
}

impl ForcingNorms {
    pub fn of(f: &ConeField) -> Self {
        let taus = f.tau_grid();
        let rows: Vec<&[f64]> = (0..taus.n_nodes()).map(|i| f.row(i)).collect();
        let ones = vec![1.0; rows.len()];
        Self {
            l1_l2: mixed_norm(&rows, &ones, taus, f.rho_grid(), 1.0, 2.0).0,
            l5_l10: mixed_norm(&rows, &ones, taus, f.rho_grid(), 5.0, 10.0).0,
        }
    }
}

/// A trajectory `τ ↦ φ(τ)` on the output grid with its Z-norm parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ZNormed {
    pub taus: TauGrid,
    pub grid: UnitGrid,
    /// Stacked states `[φ₁; φ₂]` at each output node.
    pub states: Vec<Vec<f64>>,
    /// `sup_τ ‖φ(τ)‖_{H¹-type}`.
    pub sup_h1: f64,
    /// `‖φ₁‖_{L²_τ L^∞_y}`.
    pub l2_linf: f64,
}

impl ZNormed {
    pub fn new(taus: TauGrid, grid: UnitGrid, states: Vec<Vec<f64>>) -> Self {
        let (sup_h1, l2_linf) = z_parts(&states, taus, grid);
        Self { taus, grid, states, sup_h1, l2_linf }
    }

    pub fn z_norm(&self) -> f64 {
        self.sup_h1 + self.l2_linf
    }

    pub fn pair(&self, i: usize) -> FieldPair {
        FieldPair::from_state(self.grid, &self.states[i])
    }

    pub fn first(&self, i: usize) -> &[f64] {
        &self.states[i][..self.grid.n_nodes()]
    }
}

fn z_parts(states: &[Vec<f64>], taus: TauGrid, grid: UnitGrid) -> (f64, f64) {
    let m = grid.n_nodes();
    let mut sup = 0.0f64;
    let mut sq = Vec::with_capacity(states.len());
    for s in states {
        sup = sup.max(h1_norm(&FieldPair::from_state(grid, s)));
        let linf = s[..m].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        sq.push(linf * linf);
    }
    (sup, simpson(&sq, taus.dtau()).max(0.0).sqrt())
}

/// `‖φ‖_Z = sup_τ ‖φ(τ)‖_{H¹-type} + ‖φ₁‖_{L²_τ L^∞_y}`.
pub fn z_norm(states: &[Vec<f64>], taus: TauGrid, grid: UnitGrid) -> f64 {
    let (a, b) = z_parts(states, taus, grid);
    a + b
}

/// Converged fixed point with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub solution: ZNormed,
    /// `F(T)`: coefficient of the growing mode that the modification removed.
    pub unstable_coefficient: f64,
    pub iterations: usize,
    /// `‖φ^{k+1} − φ^k‖_Z` per iteration.
    pub differences: Vec<f64>,
    /// Successive ratios of `differences`.
    pub ratios: Vec<f64>,
    /// `‖K(φ*) − φ*‖_Z`.
    pub residual: f64,
    /// `‖𝒩(φ₁*, f)‖_{L¹_τ H}` over the τ horizon.
    pub nonlinearity_l1h: f64,
    /// `e^{−τ_max} max_σ |ℓ(𝒩(σ))|`: bound on the truncated part of the tail integral.
    pub truncation_bound: f64,
    /// Set when the cut mass, estimated as `e^{−τ_max}|ℓ(𝒩(τ_max))|`, exceeds
    /// `1e−3` of the tail integral.
    pub truncation_warning: bool,
    pub forcing: ForcingNorms,
    pub data_norm: f64,
}

/// Serializable digest of a fixed-point solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub unstable_coefficient: f64,
    pub iterations: usize,
    pub ratios: Vec<f64>,
    pub residual: f64,
    pub z_norm: f64,
    pub sup_h1: f64,
    pub l2_linf: f64,
    pub nonlinearity_l1h: f64,
    pub truncation_bound: f64,
    pub truncation_warning: bool,
    pub forcing_l1_l2: f64,
    pub forcing_l5_l10: f64,
    pub data_norm: f64,
}

impl FixedPoint {
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            unstable_coefficient: self.unstable_coefficient,
            iterations: self.iterations,
            ratios: self.ratios.clone(),
            residual: self.residual,
            z_norm: self.solution.z_norm(),
            sup_h1: self.solution.sup_h1,
            l2_linf: self.solution.l2_linf,
            nonlinearity_l1h: self.nonlinearity_l1h,
            truncation_bound: self.truncation_bound,
            truncation_warning: self.truncation_warning,
            forcing_l1_l2: self.forcing.l1_l2,
            forcing_l5_l10: self.forcing.l5_l10,
            data_norm: self.data_norm,
        }
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().cloned().fold(0.0, f64::max)
    }
}

/// Output of the linear part of `K` for a given forcing history.
struct LinearResponse {
    states: Vec<Vec<f64>>,
    /// `∫₀^{τ_max} e^{−σ} ℓ(𝒩(σ)) dσ`.
    tail0: f64,
    /// `ℓ((0, n_i))` at every output node.
    coefficients: Vec<f64>,
}

/// Lagrange weights at `x` for nodes `0, 1, 2, 3`.
fn cubic_weights(x: f64) -> [f64; 4] {
    [
        -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0,
        x * (x - 2.0) * (x - 3.0) / 2.0,
        -x * (x - 1.0) * (x - 3.0) / 2.0,
        x * (x - 1.0) * (x - 2.0) / 6.0,
    ]
}

/// Builds operators once and solves the modified equation for any forcing.
#[derive(Debug, Clone)]
pub struct FixedPointSolver {
    cfg: SolveConfig,
    grid: UnitGrid,
    semigroup: Semigroup,
    projection: UnstableProjection,
    stride: usize,
}

impl FixedPointSolver {
    pub fn new(cfg: SolveConfig) -> Result<Self> {
        if !(cfg.delta > 0.0 && cfg.delta <= 1.0 && cfg.c > 0.0 && cfg.c <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta and c must lie in (0, 1], got ({}, {})",
                cfg.delta, cfg.c
            )));
        }
        let grid = UnitGrid::new(cfg.rho_nodes)?;
        let semigroup = Semigroup::with_cfl(LinearOperator::new(OperatorKind::Full, grid), cfg.cfl)?;
        let projection = UnstableProjection::new(&semigroup, cfg.tau_deflate)?;
        let stride = semigroup.stride(cfg.taus)?;
        Ok(Self { cfg, grid, semigroup, projection, stride })
    }

    pub fn config(&self) -> &SolveConfig {
        &self.cfg
    }

    pub fn grid(&self) -> UnitGrid {
        self.grid
    }

    pub fn taus(&self) -> TauGrid {
        self.cfg.taus
    }

    pub fn semigroup(&self) -> &Semigroup {
        &self.semigroup
    }

    pub fn projection(&self) -> &UnstableProjection {
        &self.projection
    }

    /// Returns a solver sharing the operators but with a different bracket
    /// half-width `delta`.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidArgument(format!("delta must lie in (0, 1], got {delta}")));
        }
        let mut out = self.clone();
        out.cfg.delta = delta;
        Ok(out)
    }

    fn check_forcing(&self, f: &ConeField) -> Result<()> {
        if f.chart() != Chart::Similarity {
            return Err(Error::InvalidArgument("forcing must be in the similarity chart".into()));
        }
        if f.rho_grid() != self.grid || f.tau_grid() != self.cfg.taus {
            return Err(Error::InvalidArgument("forcing is sampled on a different grid than the solver".into()));
        }
        Ok(())
    }

    /// Evaluates the linear part of `K` for forcing history `forcing[i] = n(τ_i)`
    /// (second-component values) and optional initial data.
    fn linear_response(&self, phi0: Option<&[f64]>, forcing: &[Vec<f64>]) -> LinearResponse {
        let m = self.grid.n_nodes();
        let dim = 2 * m;
        let taus = self.cfg.taus;
        let n_out = taus.n_nodes();
        let ell = self.projection.functional();
        let (g1, g2) = UNSTABLE_MODE;

        let coefficients: Vec<f64> = forcing
            .iter()
            .map(|n| ell[m..].iter().zip(n).map(|(a, b)| a * b).sum())
            .collect();
        // (I − P)(0, n_i)
        let projected: Vec<Vec<f64>> = forcing
            .iter()
            .zip(&coefficients)
            .map(|(n, c)| {
                let mut v = vec![0.0; dim];
                for j in 0..m {
                    v[j] = -c * g1;
                    v[m + j] = n[j] - c * g2;
                }
                v
            })
            .collect();
        let any_forcing = forcing.iter().any(|n| n.iter().any(|v| *v != 0.0));

        let mut y = match phi0 {
            Some(s) => {
                let mut s = s.to_vec();
                self.projection.remove_mode(&mut s);
                s
            }
            None => vec![0.0; dim],
        };
        let mut states = Vec::with_capacity(n_out);
        states.push(y.clone());
        let dt = self.semigroup.dtau();
        let s = self.stride as f64;
        let mut work = ForcedWork::new(dim);
        let mut scratch = [vec![0.0; dim], vec![0.0; dim]];
        let mut stage = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
        for i in 0..n_out - 1 {
            // Stencil of four output nodes around the interval [τ_i, τ_{i+1}].
            let base = if i == 0 { 0 } else if i + 2 >= n_out { n_out.saturating_sub(4) } else { i - 1 };
            let offset = (i - base) as f64;
            for k in 0..self.stride {
                if any_forcing {
                    let xs = [k as f64 / s, (k as f64 + 0.5) / s, (k as f64 + 1.0) / s];
                    for (buf, x) in stage.iter_mut().zip(xs) {
                        let w = cubic_weights(offset + x);
                        for (idx, v) in buf.iter_mut().enumerate() {
                            *v = w[0] * projected[base][idx]
                                + w[1] * projected[base + 1][idx]
                                + w[2] * projected[base + 2][idx]
                                + w[3] * projected[base + 3][idx];
                        }
                    }
                    self.semigroup
                        .step_forced(&mut y, dt, [&stage[0], &stage[1], &stage[2]], &mut work);
                } else {
                    self.semigroup.step_homogeneous(&mut y, dt, &mut scratch);
                }
            }
            states.push(y.clone());
        }

        // tail_i = ∫_{τ_i}^{τ_max} e^{τ_i − σ} c(σ) dσ, c piecewise linear.
        let h = taus.dtau();
        let e = (-h).exp();
        let w_right = (1.0 - e * (1.0 + h)) / h;
        let w_left = (1.0 - e) - w_right;
        let mut tail = vec![0.0; n_out];
        for i in (0..n_out - 1).rev() {
            tail[i] = e * tail[i + 1] + w_left * coefficients[i] + w_right * coefficients[i + 1];
        }
        for (st, t) in states.iter_mut().zip(&tail) {
            for v in &mut st[..m] {
                *v -= t * g1;
            }
            for v in &mut st[m..] {
                *v -= t * g2;
            }
        }
        LinearResponse { states, tail0: tail[0], coefficients }
    }

    fn forcing_rows(f: &ConeField) -> Vec<&[f64]> {
        (0..f.tau_grid().n_nodes()).map(|i| f.row(i)).collect()
    }

    /// One direct application of `K` to a trajectory (non-incremental).
    /// Returns `K(φ)` and `F = ℓ(φ₀) + ∫₀^∞ e^{−σ}ℓ(𝒩(φ₁, f)) dσ`.
    pub fn apply_k(&self, phi: &ZNormed, phi0: &FieldPair, f: &ConeField) -> Result<(ZNormed, f64)> {
        self.check_forcing(f)?;
        let m = self.grid.n_nodes();
        let rows = Self::forcing_rows(f);
        let forcing: Vec<Vec<f64>> = phi
            .states
            .iter()
            .zip(&rows)
            .map(|(s, fr)| (0..m).map(|j| nonlinearity(s[j], fr[j])).collect())
            .collect();
        let phi0_state = phi0.to_state();
        let lr = self.linear_response(Some(&phi0_state), &forcing);
        let coefficient = self.projection.coefficient(phi0) + lr.tail0;
        Ok((ZNormed::new(self.cfg.taus, self.grid, lr.states), coefficient))
    }

    pub fn zero_trajectory(&self) -> ZNormed {
        let n = self.cfg.taus.n_nodes();
        ZNormed::new(self.cfg.taus, self.grid, vec![vec![0.0; 2 * self.grid.n_nodes()]; n])
    }

    /// Picard iteration `φ^{k+1} = K(φ^k)` from `φ^0 = 0`.
    pub fn picard_solve(&self, phi0: &FieldPair, f: &ConeField) -> Result<FixedPoint> {
        self.check_forcing(f)?;
        let cfg = &self.cfg;
        let m = self.grid.n_nodes();
        let taus = cfg.taus;
        let data_norm = h1_norm(phi0);
        let forcing_norms = ForcingNorms::of(f);
        if cfg.enforce_smallness {
            let bound = cfg.c * cfg.delta;
            if data_norm > cfg.delta {
                return Err(Error::Smallness(format!("‖φ₀‖ = {data_norm:e} > δ = {:e}", cfg.delta)));
            }
            if forcing_norms.l1_l2 > bound || forcing_norms.l5_l10 > bound {
                return Err(Error::Smallness(format!(
                    "forcing norms ({:e}, {:e}) exceed cδ = {bound:e}",
                    forcing_norms.l1_l2, forcing_norms.l5_l10
                )));
            }
        }
        let rows = Self::forcing_rows(f);
        let limit = 10.0 * cfg.ball_constant * cfg.delta;

        // φ^1 = K(0).
        let n0: Vec<Vec<f64>> = rows.iter().map(|fr| fr.iter().map(|fv| nonlinearity(0.0, *fv)).collect()).collect();
        let phi0_state = phi0.to_state();
        let lr = self.linear_response(Some(&phi0_state), &n0);
        let mut coefficient = self.projection.coefficient(phi0) + lr.tail0;
        let mut last_coefficients = lr.coefficients;
        let mut prev: Vec<Vec<f64>> = vec![vec![0.0; 2 * m]; taus.n_nodes()];
        let mut current = lr.states;
        let mut differences = vec![z_norm(&current, taus, self.grid)];
        let mut ratios = Vec::new();
        let mut streak = 0;
        let mut iterations = 1;

        let increment = |cur: &[Vec<f64>], old: &[Vec<f64>]| -> Vec<Vec<f64>> {
            cur.iter()
                .zip(old)
                .zip(&rows)
                .map(|((a, b), fr)| (0..m).map(|j| nonlinearity_increment(a[j], b[j], fr[j])).collect())
                .collect()
        };

        loop {
            let d = *differences.last().expect("nonempty");
            let converged = d < cfg.picard_tol && iterations >= cfg.picard_min_iter;
            if converged || d == 0.0 {
                break;
            }
            if iterations >= cfg.picard_max_iter {
                return Err(Error::PicardBudget { iterations });
            }
            let dn = increment(&current, &prev);
            let lr = self.linear_response(None, &dn);
            coefficient += lr.tail0;
            for (c, dc) in last_coefficients.iter_mut().zip(&lr.coefficients) {
                *c += dc;
            }
            let next: Vec<Vec<f64>> = current
                .iter()
                .zip(&lr.states)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect();
            let diff = z_norm(&lr.states, taus, self.grid);
            let ratio = if d > 0.0 { diff / d } else { 0.0 };
            ratios.push(ratio);
            differences.push(diff);
            iterations += 1;
            prev = std::mem::replace(&mut current, next);
            let norm = z_norm(&current, taus, self.grid);
            if norm > limit {
                return Err(Error::Divergence { norm, limit });
            }
            streak = if ratio > 0.9 { streak + 1 } else { 0 };
            if streak >= 3 {
                return Err(Error::NonContraction { iteration: iterations, ratios });
            }
        }

        // Residual ‖K(φ*) − φ*‖_Z: one more increment, not folded into φ*.
        let dn = increment(&current, &prev);
        let lr = self.linear_response(None, &dn);
        let residual = z_norm(&lr.states, taus, self.grid);
        coefficient += lr.tail0;
        for (c, dc) in last_coefficients.iter_mut().zip(&lr.coefficients) {
            *c += dc;
        }

        // ‖𝒩(φ₁*, f)‖_{L¹H} with 𝒩 = (0, N) and ‖(0, n)‖² = ∫(ρn)².
        let nl_rows: Vec<f64> = current
            .iter()
            .zip(&rows)
            .map(|(s, fr)| {
                let sq: Vec<f64> = (0..m)
                    .map(|j| (self.grid.rho(j) * nonlinearity(s[j], fr[j])).powi(2))
                    .collect();
                simpson(&sq, self.grid.h()).sqrt()
            })
            .collect();
        let nonlinearity_l1h = simpson(&nl_rows, taus.dtau());
        let max_c = last_coefficients.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let truncation_bound = (-taus.tau_max).exp() * max_c;
        let tail_size = (coefficient - self.projection.coefficient(phi0)).abs();
        let cut_estimate = (-taus.tau_max).exp() * last_coefficients.last().map_or(0.0, |c| c.abs());
        let truncation_warning = cut_estimate > 1e-3 * tail_size;

        Ok(FixedPoint {
            solution: ZNormed::new(taus, self.grid, current),
            unstable_coefficient: coefficient,
            iterations,
            differences,
            ratios,
            residual,
            nonlinearity_l1h,
            truncation_bound,
            truncation_warning,
            forcing: forcing_norms,
            data_norm,
        })
    }

    /// Solves at trial blowup time `T`: data `φ₀^T`, forcing `f^T` from `forcing`.
    /// The returned fixed point carries `F(T)`.
    pub fn unstable_coefficient(&self, blowup_time: f64, forcing: &dyn ForcingSource) -> Result<FixedPoint> {
        let phi0 = initial_perturbation(blowup_time, self.grid);
        let f = forcing.cone(blowup_time, self.cfg.taus, self.grid)?;
        self.picard_solve(&phi0, &f)
    }

    /// Reconstructs `φ` from the original (unmodified) Duhamel formula with
    /// the fixed point's nonlinearity and returns `sup_τ ‖φ_orig − φ*‖_{H¹}`.
    /// Small when `F(T) = 0`; grows like `|F| e^τ` otherwise.
    pub fn original_duhamel_defect(&self, fp: &FixedPoint, phi0: &FieldPair, f: &ConeField) -> Result<f64> {
        self.check_forcing(f)?;
        let m = self.grid.n_nodes();
        let dim = 2 * m;
        let rows = Self::forcing_rows(f);
        let forcing: Vec<Vec<f64>> = fp
            .solution
            .states
            .iter()
            .zip(&rows)
            .map(|(s, fr)| {
                let mut v = vec![0.0; dim];
                for j in 0..m {
                    v[m + j] = nonlinearity(s[j], fr[j]);
                }
                v
            })
            .collect();
        let n_out = self.cfg.taus.n_nodes();
        let mut y = phi0.to_state();
        let mut work = ForcedWork::new(dim);
        let dt = self.semigroup.dtau();
        let s = self.stride as f64;
        let mut stage = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
        let mut worst = h1_norm(&FieldPair::from_state(self.grid, &y).sub(&fp.solution.pair(0)));
        for i in 0..n_out - 1 {
            let base = if i == 0 { 0 } else if i + 2 >= n_out { n_out.saturating_sub(4) } else { i - 1 };
            let offset = (i - base) as f64;
            for k in 0..self.stride {
                let xs = [k as f64 / s, (k as f64 + 0.5) / s, (k as f64 + 1.0) / s];
                for (buf, x) in stage.iter_mut().zip(xs) {
                    let w = cubic_weights(offset + x);
                    for (idx, v) in buf.iter_mut().enumerate() {
                        *v = (0..4).map(|q| w[q] * forcing[base + q][idx]).sum();
                    }
                }
                self.semigroup.step_forced(&mut y, dt, [&stage[0], &stage[1], &stage[2]], &mut work);
            }
            let diff = FieldPair::from_state(self.grid, &y).sub(&fp.solution.pair(i + 1));
            worst = worst.max(h1_norm(&diff));
        }
        Ok(worst)
    }
}

/// Something that yields the similarity-chart forcing `f^T` for a trial `T`.
pub trait ForcingSource {
    fn cone(&self, blowup_time: f64, taus: TauGrid, rhos: UnitGrid) -> Result<ConeField>;
}

/// The unperturbed problem, `f ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoForcing;

impl ForcingSource for NoForcing {
    fn cone(&self, blowup_time: f64, taus: TauGrid, rhos: UnitGrid) -> Result<ConeField> {
        Ok(ConeField::zeros(blowup_time, taus, rhos))
    }
}

impl ForcingSource for FreeWaveEvaluator {
    fn cone(&self, blowup_time: f64, taus: TauGrid, rhos: UnitGrid) -> Result<ConeField> {
        self.pull_to_cone(blowup_time, taus, rhos)
    }
}

/// Bisection trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Bisection<X> {
    pub root: f64,
    pub value: f64,
    pub steps: usize,
    /// Bracket width after each step.
    pub widths: Vec<f64>,
    pub payload: X,
}

/// Bisection of `F` on `[lo, hi]` until `|F(mid)| < tol_f` or the bracket is
/// narrower than `tol_t`. `F(lo) < 0 < F(hi)` is required; otherwise a
/// [`Error::BracketFailure`] is returned. `eval` returns `F(T)` and a payload.
pub fn bisect<X>(
    lo: f64,
    hi: f64,
    tol_f: f64,
    tol_t: f64,
    max_steps: usize,
    mut eval: impl FnMut(f64) -> Result<(f64, X)>,
) -> Result<Bisection<X>> {
    let (f_lo, x_lo) = eval(lo)?;
    let (f_hi, x_hi) = eval(hi)?;
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::BracketFailure { lo, hi, f_lo, f_hi });
    }
    if f_lo.abs() < tol_f {
        return Ok(Bisection { root: lo, value: f_lo, steps: 0, widths: vec![hi - lo], payload: x_lo });
    }
    if f_hi.abs() < tol_f {
        return Ok(Bisection { root: hi, value: f_hi, steps: 0, widths: vec![hi - lo], payload: x_hi });
    }
    let (mut a, mut b) = (lo, hi);
    let mut widths = vec![b - a];
    let mut best: Option<(f64, f64, X)> = None;
    for step in 1..=max_steps {
        let mid = 0.5 * (a + b);
        let (fm, xm) = eval(mid)?;
        if fm < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        widths.push(b - a);
        let done = fm.abs() < tol_f || b - a < tol_t;
        if done {
            return Ok(Bisection { root: mid, value: fm, steps: step, widths, payload: xm });
        }
        best = Some((mid, fm, xm));
    }
    let (root, value, payload) = best.expect("at least one step");
    Ok(Bisection { root, value, steps: max_steps, widths, payload })
}

/// Smallest bracket width bisection is allowed to reach.
pub const BISECTION_WIDTH_FLOOR: f64 = 1e-13;

/// Result of blowup-time selection.
#[derive(Debug, Clone, PartialEq)]
pub struct BlowupTime {
    pub blowup_time: f64,
    pub fixed_point: FixedPoint,
    pub bisection_steps: usize,
    pub widths: Vec<f64>,
}

/// Bisection for `F(T) = 0` on `[1−δ, 1+δ]`, re-solving the fixed point at each trial `T`.
pub fn find_blowup_time(solver: &FixedPointSolver, forcing: &dyn ForcingSource) -> Result<BlowupTime> {
    let cfg = solver.config();
    let out = bisect(
        1.0 - cfg.delta,
        1.0 + cfg.delta,
        cfg.tol_f,
        BISECTION_WIDTH_FLOOR,
        cfg.max_bisection_steps,
        |t| {
            let fp = solver.unstable_coefficient(t, forcing)?;
            Ok((fp.unstable_coefficient, fp))
        },
    )?;
    Ok(BlowupTime {
        blowup_time: out.root,
        fixed_point: out.payload,
        bisection_steps: out.steps,
        widths: out.widths,
    })
}

/// `‖g‖` in the H¹-type norm, `√7`.
pub fn unstable_mode_norm(grid: UnitGrid) -> f64 {
    h1_norm(&unstable_mode(grid))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> SolveConfig {
        SolveConfig { rho_nodes: 33, taus: TauGrid::new(8.0, 128).unwrap(), ..SolveConfig::default() }
    }

    #[test]
    fn nonlinearity_examples() {
        assert_eq!(nonlinearity(0.0, 0.0), 0.0);
        // Oracle: (κ + 0.1)⁵ − κ⁵ by direct expansion in extended steps.
        let expected = (KAPPA + 0.1).powi(5) - KAPPA.powi(5);
        assert!((nonlinearity(0.0, 0.1) - expected).abs() < 1e-14);
        assert!((nonlinearity(0.0, 0.1) - 0.46473).abs() < 5e-6);
        let p = 1e-4;
        assert!(nonlinearity(p, 0.0).abs() < 10.0 * KAPPA.powi(3) * p * p * 1.01);
    }

    #[test]
    fn expansion_identity() {
        for (p, f) in [(0.3, -0.2), (-0.7, 0.5), (1e-3, 2e-3), (0.9, 0.9)] {
            let lhs = nonlinearity(p, f) + 5.0 * KAPPA.powi(4) * p + KAPPA.powi(5);
            let rhs = (KAPPA + f + p).powi(5);
            assert!((lhs - rhs).abs() < 1e-13 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn increment_matches_difference() {
        for (a, b, f) in [(0.3, 0.1, -0.2), (1e-3, -2e-3, 0.05), (0.5, 0.5, 0.0)] {
            let d = nonlinearity(a, f) - nonlinearity(b, f);
            assert!((nonlinearity_increment(a, b, f) - d).abs() < 1e-14);
        }
    }

    #[test]
    fn cubic_weights_reproduce_cubics() {
        let p = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x * x;
        for x in [0.25, 1.5, 2.75] {
            let w = cubic_weights(x);
            let v: f64 = (0..4).map(|i| w[i] * p(i as f64)).sum();
            assert!((v - p(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_problem_is_trivial() {
        let solver = FixedPointSolver::new(small_cfg()).unwrap();
        let g = solver.grid();
        let f = ConeField::zeros(1.0, solver.taus(), g);
        let fp = solver.picard_solve(&FieldPair::zeros(g), &f).unwrap();
        assert_eq!(fp.iterations, 1);
        assert_eq!(fp.solution.z_norm(), 0.0);
        assert_eq!(fp.unstable_coefficient, 0.0);
    }

    #[test]
    fn linear_case_is_projected_evolution() {
        let solver = FixedPointSolver::new(small_cfg()).unwrap();
        let g = solver.grid();
        let bump = FieldPair::from_fn(g, |r| 1e-6 * (-50.0 * (r - 0.5).powi(2)).exp(), |_| 0.0);
        let phi0 = solver.projection().remainder(&bump);
        let f = ConeField::zeros(1.0, solver.taus(), g);
        let (k, coeff) = solver.apply_k(&solver.zero_trajectory(), &phi0, &f).unwrap();
        assert!(coeff.abs() < 1e-18);
        let direct = solver.semigroup().propagate(&phi0, 2.0).unwrap();
        let idx = (2.0 / solver.taus().dtau()).round() as usize;
        assert!(k.pair(idx).sub(&direct).max_abs() < 1e-15);
    }

    #[test]
    fn incremental_and_direct_k_agree() {
        let solver = FixedPointSolver::new(small_cfg()).unwrap();
        let g = solver.grid();
        let phi0 = initial_perturbation(1.02, g);
        let f = ConeField::from_fn(1.02, solver.taus(), g, |tau, rho| 1e-3 * (-tau).exp() * (1.0 - rho * rho));
        let fp = solver.picard_solve(&phi0, &f).unwrap();
        let (k, coeff) = solver.apply_k(&fp.solution, &phi0, &f).unwrap();
        let diff: Vec<Vec<f64>> = k
            .states
            .iter()
            .zip(&fp.solution.states)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        let resid = z_norm(&diff, solver.taus(), g);
        assert!(resid < 1e-12, "{resid}");
        assert!((coeff - fp.unstable_coefficient).abs() < 1e-12);
    }

    #[test]
    fn bisection_contract() {
        let a0 = 0.004;
        let out = bisect(0.9, 1.1, 1e-15, 1e-10, 60, |t| Ok((KAPPA / 4.0 * (t - 1.0) + a0, ()))).unwrap();
        assert!((out.root - (1.0 - 4.0 * a0 / KAPPA)).abs() < 1e-10);
        for w in out.widths.windows(2) {
            assert!((w[1] - w[0] / 2.0).abs() < 1e-15);
        }
        assert!(out.steps <= 40);
        let fail = bisect(0.9, 1.1, 1e-12, 1e-12, 60, |t| Ok((KAPPA / 4.0 * (t - 1.0) + 1.0, ())));
        assert!(matches!(fail, Err(Error::BracketFailure { .. })));
    }

    #[test]
    fn unperturbed_blowup_time() {
        let cfg = SolveConfig { delta: 0.05, ..small_cfg() };
        let solver = FixedPointSolver::new(cfg).unwrap();
        let lo = solver.unstable_coefficient(0.95, &NoForcing).unwrap().unstable_coefficient;
        let hi = solver.unstable_coefficient(1.05, &NoForcing).unwrap().unstable_coefficient;
        assert!(lo < 0.0 && hi > 0.0);
        let bt = find_blowup_time(&solver, &NoForcing).unwrap();
        assert!((bt.blowup_time - 1.0).abs() < 1e-6);
    }
}
