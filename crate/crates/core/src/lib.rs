//! Numerical laboratory for stable self-similar blowup of the radial focusing
//! quintic wave equation `∂_t²u − Δu = u⁵` on ℝ³ under randomized initial data.

pub mod cone;
pub mod duhamel;
pub mod ensemble;
pub mod error;
pub mod free_wave;
pub mod nlw_direct;
pub mod numerics;
pub mod radial_spectral;
pub mod randomization;
pub mod semigroup;
pub mod similarity;

pub use error::{Error, Result};

/// `κ = (3/4)^{1/4}`, amplitude of the ODE blowup solution `κ (T−t)^{-1/2}`.
pub const KAPPA: f64 = 0.930_604_859_102_099_6;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/radial-transform.md")]
    mod radial_transform {}
    #[doc = include_str!("../../../book/src/randomization.md")]
    mod randomization {}
    #[doc = include_str!("../../../book/src/linear-flow.md")]
    mod linear_flow {}
    #[doc = include_str!("../../../book/src/duhamel.md")]
    mod duhamel {}
    #[doc = include_str!("../../../book/src/direct-solver.md")]
    mod direct_solver {}
    #[doc = include_str!("../../../book/src/ensembles.md")]
    mod ensembles {}
    #[doc = include_str!("../../../book/src/acceptance.md")]
    mod acceptance {}
}
