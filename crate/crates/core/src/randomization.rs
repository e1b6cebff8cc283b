//! Radial randomization: every unit frequency annulus `[n, n+1)` of a profile
//! is multiplied by an independent zero-mean, unit-variance sub-gaussian
//! coefficient `X_n`.
//!
//! Coefficients are counter-based: `X_n` is a pure function of
//! `(master seed, sample index, component, n)`, so any sample can be replayed
//! in isolation and ensembles need no stream coordination.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{linear_fit, mean_and_stderr};
use crate::radial_spectral::{annulus_energies, annulus_index, RadialProfile};

/// Distribution of the annulus coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientLaw {
    StandardGaussian,
    Rademacher,
    /// Uniform on `[-√3, √3]`.
    UniformSymmetric,
    /// Every coefficient equals 1. Degenerate; for tests only.
    Identity,
}

impl CoefficientLaw {
    pub const RANDOM: [CoefficientLaw; 3] = [
        CoefficientLaw::StandardGaussian,
        CoefficientLaw::Rademacher,
        CoefficientLaw::UniformSymmetric,
    ];

    fn draw(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            CoefficientLaw::StandardGaussian => rng.sample(StandardNormal),
            CoefficientLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            CoefficientLaw::UniformSymmetric => {
                let s = 3f64.sqrt();
                rng.random_range(-s..s)
            }
            CoefficientLaw::Identity => 1.0,
        }
    }
}

impl std::str::FromStr for CoefficientLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard-gaussian" | "gaussian" => Ok(Self::StandardGaussian),
            "rademacher" => Ok(Self::Rademacher),
            "uniform-symmetric" | "uniform" => Ok(Self::UniformSymmetric),
            "identity" => Ok(Self::Identity),
            other => Err(Error::InvalidArgument(format!("unknown coefficient law {other:?}"))),
        }
    }
}

/// Identifies one random sample `ω`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomSeed {
    pub master: u64,
    pub sample: u64,
}

impl RandomSeed {
    pub fn new(master: u64, sample: u64) -> Self {
        Self { master, sample }
    }
}

/// Which Cauchy component a coefficient sequence belongs to. Position and
/// velocity data are randomized with independent sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    Position,
    Velocity,
}

impl Component {
    fn tag(self) -> u32 {
        match self {
            Component::Position => 0x706f_7331,
            Component::Velocity => 0x76656c31,
        }
    }
}

const DOMAIN_TAG: u32 = 0x616e_6e31;

fn stream(seed: RandomSeed, component: Component, n: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.master.to_le_bytes());
    key[8..16].copy_from_slice(&seed.sample.to_le_bytes());
    key[16..24].copy_from_slice(&n.to_le_bytes());
    key[24..28].copy_from_slice(&component.tag().to_le_bytes());
    key[28..].copy_from_slice(&DOMAIN_TAG.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// The coefficient `X_n` of sample `seed` for `component`.
pub fn coefficient(law: CoefficientLaw, seed: RandomSeed, component: Component, n: u64) -> f64 {
    if law == CoefficientLaw::Identity {
        return 1.0;
    }
    law.draw(&mut stream(seed, component, n))
}

/// `X_0 .. X_{count-1}`.
pub fn coefficients(law: CoefficientLaw, seed: RandomSeed, component: Component, count: usize) -> Vec<f64> {
    (0..count as u64).map(|n| coefficient(law, seed, component, n)).collect()
}

/// Randomizes the position component: `f̂^ω(ν_k) = X_{⌊ν_k⌋} f̂(ν_k)`.
pub fn randomize(f: &RadialProfile, law: CoefficientLaw, seed: RandomSeed) -> Result<RadialProfile> {
    randomize_component(f, law, seed, Component::Position)
}

pub fn randomize_component(
    f: &RadialProfile,
    law: CoefficientLaw,
    seed: RandomSeed,
    component: Component,
) -> Result<RadialProfile> {
    let spec = f.spectral_or_err()?;
    let grid = *f.grid();
    let xs = coefficients(law, seed, component, annulus_index(grid.nu_max()) + 1);
    let out = spec
        .iter()
        .enumerate()
        .map(|(i, v)| xs[annulus_index(grid.nu(i + 1))] * v)
        .collect();
    f.with_spectral(out)
}

/// Empirical moments of `‖f^ω‖_{H^s}` against the sub-gaussian scaling `√r ‖f‖_{H^s}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub norm: f64,
    pub n_samples: usize,
    /// `(r, (E‖f^ω‖^r)^{1/r})` for `r ∈ {2, 4, 8}`.
    pub moments: Vec<(u32, f64)>,
    /// `moment_r / (√r ‖f‖_{H^s})`, zero when `‖f‖ = 0`.
    pub ratios: Vec<f64>,
    /// Mean and standard error of `‖f^ω‖²_{H^s}`.
    pub mean_square: f64,
    pub mean_square_stderr: f64,
}

/// Default bound on the moment ratios; a gaussian coefficient gives at most `1/√2`.
pub const DEFAULT_MOMENT_RATIO_BOUND: f64 = 1.0;

impl MomentReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().cloned().fold(0.0, f64::max)
    }

    pub fn violates(&self, bound: f64) -> bool {
        self.max_ratio() > bound
    }
}

/// Samples `‖f^ω‖_{H^s}` for `n_samples` seeds `(master, 0..n_samples)`.
///
/// Uses `‖f^ω‖²_{H^s} = Σ_n X_n² E_n` with the annulus energies `E_n`, which
/// is exact by orthogonality of the annuli.
pub fn hs_norm_samples(
    f: &RadialProfile,
    s: f64,
    law: CoefficientLaw,
    n_samples: usize,
    master: u64,
) -> Result<Vec<f64>> {
    let energies = annulus_energies(f, s)?;
    Ok((0..n_samples as u64)
        .map(|i| {
            let seed = RandomSeed::new(master, i);
            energies
                .iter()
                .enumerate()
                .filter(|(_, e)| **e > 0.0)
                .map(|(n, e)| coefficient(law, seed, Component::Position, n as u64).powi(2) * e)
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}

pub fn hs_norm_statistics(
    f: &RadialProfile,
    s: f64,
    law: CoefficientLaw,
    n_samples: usize,
    master: u64,
) -> Result<MomentReport> {
    if n_samples < 100 {
        return Err(Error::InsufficientSamples { required: 100, got: n_samples });
    }
    let norm = crate::radial_spectral::sobolev_norm(f, s)?;
    let samples = hs_norm_samples(f, s, law, n_samples, master)?;
    let squares: Vec<f64> = samples.iter().map(|v| v * v).collect();
    let (mean_square, mean_square_stderr) = mean_and_stderr(&squares);
    let mut moments = Vec::new();
    let mut ratios = Vec::new();
    for r in [2u32, 4, 8] {
        let m = (samples.iter().map(|v| v.powi(r as i32)).sum::<f64>() / n_samples as f64).powf(1.0 / r as f64);
        moments.push((r, m));
        ratios.push(if norm > 0.0 { m / ((r as f64).sqrt() * norm) } else { 0.0 });
    }
    Ok(MomentReport { norm, n_samples, moments, ratios, mean_square, mean_square_stderr })
}

/// Empirical exceedance probability and the fitted decay exponent of its logarithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub threshold: f64,
    pub probability: f64,
    pub stderr: f64,
    pub exceedances: usize,
    /// Slope of `log P(sample ≥ λ')` against `λ'²` over `λ' ∈ [λ/2, λ]`;
    /// absent when `λ = 0`.
    pub slope: Option<f64>,
}

pub fn tail_estimate_check(samples: &[f64], threshold: f64) -> Result<TailReport> {
    const MIN_SAMPLES: usize = 1000;
    const MIN_EXCEEDANCES: usize = 10;
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { required: MIN_SAMPLES, got: samples.len() });
    }
    let n = samples.len() as f64;
    let count = |l: f64| samples.iter().filter(|v| **v >= l).count();
    let exceedances = count(threshold);
    if threshold > 0.0 && exceedances < MIN_EXCEEDANCES {
        return Err(Error::InsufficientExceedances { required: MIN_EXCEEDANCES, got: exceedances });
    }
    let probability = exceedances as f64 / n;
    let stderr = (probability * (1.0 - probability) / n).sqrt();
    let slope = if threshold > 0.0 {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..8 {
            let l = threshold * (0.5 + 0.5 * i as f64 / 7.0);
            let c = count(l);
            if c > 0 {
                xs.push(l * l);
                ys.push((c as f64 / n).ln());
            }
        }
        linear_fit(&xs, &ys).map(|f| f.slope)
    } else {
        None
    };
    Ok(TailReport { threshold, probability, stderr, exceedances, slope })
}

/// Sub-gaussian moment proxy for a fixed vector `a`:
/// `max_{1≤r≤8} (E|Σ a_n X_n|^r)^{1/r} / (√r ‖a‖_{ℓ²})`.
pub fn khintchine_ratio(a: &[f64], law: CoefficientLaw, n_samples: usize, master: u64) -> f64 {
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    let sums: Vec<f64> = (0..n_samples as u64)
        .map(|i| {
            let seed = RandomSeed::new(master, i);
            a.iter()
                .enumerate()
                .map(|(n, v)| v * coefficient(law, seed, Component::Position, n as u64))
                .sum::<f64>()
                .abs()
        })
        .collect();
    (1..=8)
        .map(|r| {
            let m = (sums.iter().map(|v| v.powi(r)).sum::<f64>() / n_samples as f64).powf(1.0 / r as f64);
            m / ((r as f64).sqrt() * norm)
        })
        .fold(0.0, f64::max)
}

/// `E max_{n<J} |X_n| / √log(2 + J)` estimated from `n_samples` seeds.
pub fn max_ratio(law: CoefficientLaw, j: usize, n_samples: usize, master: u64) -> f64 {
    let total: f64 = (0..n_samples as u64)
        .map(|i| {
            let seed = RandomSeed::new(master, i);
            (0..j as u64)
                .map(|n| coefficient(law, seed, Component::Position, n).abs())
                .fold(0.0, f64::max)
        })
        .sum();
    total / n_samples as f64 / (2.0 + j as f64).ln().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial_spectral::{forward_transform, RadialGrid};

    fn bump() -> RadialProfile {
        let g = RadialGrid::new(12.0, 512).unwrap();
        forward_transform(&RadialProfile::from_fn(g, |r| (-r * r).exp()).unwrap()).unwrap()
    }

    #[test]
    fn draws_are_replayable_and_distinct() {
        let s = RandomSeed::new(7, 3);
        for law in CoefficientLaw::RANDOM {
            let a = coefficients(law, s, Component::Position, 20);
            assert_eq!(a, coefficients(law, s, Component::Position, 20));
            assert_ne!(a, coefficients(law, s, Component::Velocity, 20));
            assert_ne!(a, coefficients(law, RandomSeed::new(7, 4), Component::Position, 20));
        }
    }

    #[test]
    fn laws_have_expected_support() {
        let s = RandomSeed::new(1, 1);
        let r = coefficients(CoefficientLaw::Rademacher, s, Component::Position, 100);
        assert!(r.iter().all(|v| v.abs() == 1.0));
        let u = coefficients(CoefficientLaw::UniformSymmetric, s, Component::Position, 100);
        assert!(u.iter().all(|v| v.abs() <= 3f64.sqrt()));
    }

    #[test]
    fn identity_law_is_exact() {
        let f = bump();
        let g = randomize(&f, CoefficientLaw::Identity, RandomSeed::new(0, 0)).unwrap();
        assert_eq!(f.spectral(), g.spectral());
    }

    #[test]
    fn single_annulus_scales() {
        let g = RadialGrid::new(20.0, 512).unwrap();
        let f = RadialProfile::from_spectral_fn(g, |nu| if (3.0..4.0).contains(&nu) { (nu - 3.0).sin() } else { 0.0 })
            .unwrap();
        let seed = RandomSeed::new(11, 2);
        let x = coefficient(CoefficientLaw::StandardGaussian, seed, Component::Position, 3);
        let fw = randomize(&f, CoefficientLaw::StandardGaussian, seed).unwrap();
        for (a, b) in fw.spectral().unwrap().iter().zip(f.spectral().unwrap()) {
            assert_eq!(*a, x * b);
        }
    }

    #[test]
    fn second_moment_is_preserved() {
        let f = bump();
        for law in CoefficientLaw::RANDOM {
            let rep = hs_norm_statistics(&f, 0.8, law, 2000, 5).unwrap();
            let target = rep.norm * rep.norm;
            assert!((rep.mean_square - target).abs() <= 3.0 * rep.mean_square_stderr + 1e-12 * target, "{law:?}");
            assert!(!rep.violates(DEFAULT_MOMENT_RATIO_BOUND));
        }
    }

    #[test]
    fn zero_profile_has_zero_moments() {
        let g = RadialGrid::new(12.0, 64).unwrap();
        let rep = hs_norm_statistics(&RadialProfile::zeros(g), 0.5, CoefficientLaw::StandardGaussian, 100, 0).unwrap();
        assert!(rep.moments.iter().all(|(_, m)| *m == 0.0));
        assert!(hs_norm_statistics(&RadialProfile::zeros(g), 0.5, CoefficientLaw::Rademacher, 99, 0).is_err());
    }

    #[test]
    fn tail_check_contract() {
        let samples: Vec<f64> = (0..20_000u64)
            .map(|i| coefficient(CoefficientLaw::StandardGaussian, RandomSeed::new(9, i), Component::Position, 0).abs())
            .collect();
        let at0 = tail_estimate_check(&samples, 0.0).unwrap();
        assert_eq!(at0.probability, 1.0);
        assert!(at0.slope.is_none());
        let rep = tail_estimate_check(&samples, 2.0).unwrap();
        // Oracle: 2(1 − Φ(2)) from the complementary error function.
        let exact = 2.0 * crate::numerics::normal_upper_tail(2.0);
        assert!((rep.probability - exact).abs() < 3.0 * rep.stderr);
        assert!(rep.slope.unwrap() <= -0.4);
        assert!(matches!(tail_estimate_check(&samples, 6.0), Err(Error::InsufficientExceedances { .. })));
        assert!(tail_estimate_check(&samples[..999], 1.0).is_err());
    }

    #[test]
    fn annuli_are_uncorrelated() {
        let n = 4000;
        let (mut s01, mut s05) = (0.0, 0.0);
        for i in 0..n as u64 {
            let x = coefficients(CoefficientLaw::StandardGaussian, RandomSeed::new(3, i), Component::Position, 6);
            s01 += x[0] * x[1];
            s05 += x[0] * x[5];
        }
        let tol = 3.0 / (n as f64).sqrt();
        assert!((s01 / n as f64).abs() < tol);
        assert!((s05 / n as f64).abs() < tol);
    }
}
