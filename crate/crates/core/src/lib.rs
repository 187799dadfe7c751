//! Numerical checks of the correspondence between critical maps `M³ → S²` of
//! the σ₂ energy with a potential and steady Euler flows on `M³`.
//!
//! The guide in `book/` walks through each module with runnable examples.

pub mod chart;
pub mod error;
pub mod field_maps;
pub mod fluid;
pub mod integration;
pub mod profile;
pub mod runner;
pub mod sampling;
pub mod spline;
pub mod topology;
pub mod variational;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/maps.md")]
    mod maps {}
    #[doc = include_str!("../../../book/src/energy.md")]
    mod energy {}
    #[doc = include_str!("../../../book/src/flows.md")]
    mod flows {}
    #[doc = include_str!("../../../book/src/topology.md")]
    mod topology {}
    #[doc = include_str!("../../../book/src/profiles.md")]
    mod profiles {}
    #[doc = include_str!("../../../book/src/quadrature.md")]
    mod quadrature {}
    #[doc = include_str!("../../../book/src/running.md")]
    mod running {}
}
