//! Spectral-Galerkin laboratory for the strongly dissipative Schrödinger
//! operator `A = -Δ_D + i a (-Δ_D)^{1/2} a` on planar obstacle domains.
//!
//! The pipeline is: [`geometry`] (scene, Ikawa checks, grid mask) →
//! [`laplacian`] (finite-difference Dirichlet eigenbasis) → [`calculus`]
//! (Sobolev scale and Galerkin matrices) → [`damped_operator`] → [`resolvent`]
//! and [`evolution`].

pub mod calculus;
pub mod damped_operator;
pub mod error;
pub mod evolution;
pub mod geometry;
pub mod laplacian;
pub mod resolvent;

pub use error::{Error, Result};
