//! Concentration experiments for empirical spectral distributions of
//! Hermitian random matrices with block-dependent entries.
//!
//! The guide in `book/` walks through the modules with runnable examples.

pub mod approx;
pub mod conditions;
pub mod ensembles;
pub mod entries;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod measures;
pub mod spectra;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ensembles.md")]
    mod ensembles {}
    #[doc = include_str!("../../../book/src/spectra.md")]
    mod spectra {}
    #[doc = include_str!("../../../book/src/measures.md")]
    mod measures {}
    #[doc = include_str!("../../../book/src/approximation.md")]
    mod approximation {}
    #[doc = include_str!("../../../book/src/conditions.md")]
    mod conditions {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
