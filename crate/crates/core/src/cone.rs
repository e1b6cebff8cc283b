//! Space-time fields on the backward lightcone `{r ≤ T − t}`.
//!
//! A [`ConeField`] is sampled on a tensor grid `(τ_i, ρ_j)`; the Cartesian
//! point of a node is `t_i = T(1 − e^{−τ_i})`, `r = ρ_j (T − t_i)`. The
//! similarity chart stores `(T−t)^{1/2}·u`, the Cartesian chart stores `u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radial_spectral::io::{decode_f64s, decode_header, encode_header};
use crate::similarity::{from_similarity, TauGrid, UnitGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    Similarity,
    Cartesian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeField {
    blowup_time: f64,
    chart: Chart,
    taus: TauGrid,
    rhos: UnitGrid,
    /// Row-major: `values[i * n_rho + j]`.
    values: Vec<f64>,
}

pub const CONE_MAGIC: [u8; 4] = *b"RCNF";

impl ConeField {
    pub fn new(blowup_time: f64, chart: Chart, taus: TauGrid, rhos: UnitGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != taus.n_nodes() * rhos.n_nodes() {
            return Err(Error::InvalidArgument(format!(
                "cone field needs {} values, got {}",
                taus.n_nodes() * rhos.n_nodes(),
                values.len()
            )));
        }
        Ok(Self { blowup_time, chart, taus, rhos, values })
    }

    /// Similarity-chart field from `f(τ, ρ)`.
    pub fn from_fn(blowup_time: f64, taus: TauGrid, rhos: UnitGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(taus.n_nodes() * rhos.n_nodes());
        for i in 0..taus.n_nodes() {
            let tau = taus.tau(i);
            for j in 0..rhos.n_nodes() {
                values.push(f(tau, rhos.rho(j)));
            }
        }
        Self { blowup_time, chart: Chart::Similarity, taus, rhos, values }
    }

    pub fn zeros(blowup_time: f64, taus: TauGrid, rhos: UnitGrid) -> Self {
        Self::from_fn(blowup_time, taus, rhos, |_, _| 0.0)
    }

    pub fn blowup_time(&self) -> f64 {
        self.blowup_time
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn tau_grid(&self) -> TauGrid {
        self.taus
    }

    pub fn rho_grid(&self) -> UnitGrid {
        self.rhos
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.rhos.n_nodes() + j]
    }

    /// All `ρ` samples at the `i`-th time node.
    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.rhos.n_nodes();
        &self.values[i * m..(i + 1) * m]
    }

    /// Cartesian coordinates `(t, r)` of node `(i, j)`.
    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        from_similarity(self.taus.tau(i), self.rhos.rho(j), self.blowup_time)
    }

    fn reweighted(&self, chart: Chart, exponent: f64) -> Self {
        let m = self.rhos.n_nodes();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(idx, v)| {
                let (t, _) = self.point(idx / m, idx % m);
                v * (self.blowup_time - t).powf(exponent)
            })
            .collect();
        Self { chart, values, ..self.clone() }
    }

    /// Removes the `(T−t)^{1/2}` amplitude.
    pub fn to_cartesian(&self) -> Self {
        match self.chart {
            Chart::Cartesian => self.clone(),
            Chart::Similarity => self.reweighted(Chart::Cartesian, -0.5),
        }
    }

    pub fn to_similarity(&self) -> Self {
        match self.chart {
            Chart::Similarity => self.clone(),
            Chart::Cartesian => self.reweighted(Chart::Similarity, 0.5),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Binary layout: header `b"RCNF"`, `n_rho: u32`, `T: f64`; block
    /// `n_tau: u32`, `chart: u32` (0 similarity, 1 Cartesian), `τ_max: f64`;
    /// then the row-major `f64` values. All little-endian.
    pub fn encode_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.values.len());
        out.extend_from_slice(&encode_header(CONE_MAGIC, self.rhos.n_nodes() as u32, self.blowup_time));
        out.extend_from_slice(&(self.taus.n_nodes() as u32).to_le_bytes());
        let chart: u32 = match self.chart {
            Chart::Similarity => 0,
            Chart::Cartesian => 1,
        };
        out.extend_from_slice(&chart.to_le_bytes());
        out.extend_from_slice(&self.taus.tau_max.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode_binary(bytes: &[u8]) -> Result<Self> {
        let (n_rho, blowup_time) = decode_header(bytes, CONE_MAGIC)?;
        if bytes.len() < 32 {
            return Err(Error::Format("truncated cone header".into()));
        }
        let n_tau = u32::from_le_bytes(bytes[16..20].try_into().expect("4 bytes")) as usize;
        let chart = match u32::from_le_bytes(bytes[20..24].try_into().expect("4 bytes")) {
            0 => Chart::Similarity,
            1 => Chart::Cartesian,
            c => return Err(Error::Format(format!("unknown chart code {c}"))),
        };
        let tau_max = f64::from_le_bytes(bytes[24..32].try_into().expect("8 bytes"));
        if n_tau < 2 {
            return Err(Error::Format("cone field needs at least two time nodes".into()));
        }
        let taus = TauGrid::new(tau_max, n_tau - 1)?;
        let rhos = UnitGrid::new(n_rho as usize)?;
        let values = decode_f64s(&bytes[32..], n_tau * n_rho as usize)?;
        Self::new(blowup_time, chart, taus, rhos, values)
    }
}

/// Mixed norm `‖·‖_{L^q_τ L^p_y([0, τ_max] × B³)}` of a sequence of radial
/// rows, with each row's spatial norm multiplied by `weights[i]` (pass ones
/// for the plain norm). Returns `(norm, fraction of the q-th power carried by
/// the last tenth of the τ range)`.
pub fn mixed_norm(
    rows: &[&[f64]],
    weights: &[f64],
    taus: TauGrid,
    rhos: UnitGrid,
    q: f64,
    p: f64,
) -> (f64, f64) {
    let spatial: Vec<f64> = rows
        .iter()
        .zip(weights)
        .map(|(row, w)| w * crate::similarity::ball_lp_norm(row, rhos, p))
        .collect();
    if q.is_infinite() {
        let total = spatial.iter().fold(0.0f64, |m, v| m.max(*v));
        let cut = (0.9 * taus.n_steps as f64).floor() as usize;
        let tail = spatial[cut..].iter().fold(0.0f64, |m, v| m.max(*v));
        let fraction = if total > 0.0 { tail / total } else { 0.0 };
        return (total, fraction);
    }
    let powered: Vec<f64> = spatial.iter().map(|v| v.powf(q)).collect();
    let h = taus.dtau();
    let total = crate::numerics::simpson(&powered, h);
    let cut = (0.9 * taus.n_steps as f64).floor() as usize;
    let tail = crate::numerics::simpson(&powered[cut..], h);
    let fraction = if total > 0.0 { tail / total } else { 0.0 };
    (total.powf(1.0 / q), fraction)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_round_trip() {
        let taus = TauGrid::new(3.0, 12).unwrap();
        let rhos = UnitGrid::new(9).unwrap();
        let f = ConeField::from_fn(1.2, taus, rhos, |tau, rho| tau.sin() + rho);
        let back = f.to_cartesian().to_similarity();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn binary_round_trip() {
        let taus = TauGrid::new(2.0, 4).unwrap();
        let rhos = UnitGrid::new(5).unwrap();
        let f = ConeField::from_fn(0.9, taus, rhos, |tau, rho| tau * rho).to_cartesian();
        let g = ConeField::decode_binary(&f.encode_binary()).unwrap();
        assert_eq!(f, g);
    }
}
