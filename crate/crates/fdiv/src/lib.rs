//! # fdiv
//!
//! f-divergence calculus for studying GAN training objectives:
//!
//! - divergences represented by their defining functions, with dual
//!   (log-ratio) coordinates and symmetry-preserving curves
//!   ([`divergence`]);
//! - operators that build new divergences from old (reverse, symmetrize,
//!   soften, non-saturating partner) plus numeric tail-weight and
//!   boundedness classification ([`algebra`]);
//! - analytic Gaussian/mixture densities with exact quadrature-based
//!   divergence evaluation and closed-form or numeric fits ([`dist`]);
//! - variational lower bounds, saturating/non-saturating generator losses
//!   and critic objectives ([`variational`]);
//! - a small dense critic network with exact gradients ([`net`]);
//! - an alternating-SGD trainer for a 1D Gaussian generator against a
//!   bimodal target, under saturating, non-saturating and hybrid schemes
//!   ([`trainer`]);
//! - pushforward densities of critic outputs and the one-dimensional
//!   reformulation of f-divergences ([`pushforward`]);
//! - contour surfaces over generator parameters ([`contour`]).
//!
//! The `fdiv` binary exposes all of this as subcommands emitting CSV/JSON.

pub mod algebra;
pub mod contour;
pub mod dist;
pub mod divergence;
pub mod net;
pub mod pushforward;
pub mod quad;
pub mod report;
pub mod rng;
pub mod trainer;
pub mod util;
pub mod variational;

pub use algebra::{bounds, ns_partner, reverse, soften_p, soften_q, symmetrize, tail_weights};
pub use divergence::{Builtin, Divergence, DualCoords, Evaluation};
pub use dist::Density;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown divergence `{name}`; valid names: {valid}")]
    UnknownDivergence { name: String, valid: String },

    #[error("{what} out of domain: {value}")]
    DomainError { what: &'static str, value: f64 },

    #[error("not a defining function: f''({u}) = {value} (must be strictly positive)")]
    NotADefiningFunction { u: f64, value: f64 },

    #[error("invalid integration interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("quadrature did not reach tolerance (achieved error estimate {achieved:e})")]
    QuadratureFailed { achieved: f64 },

    #[error("no power-law tail on the {side} side: log-slopes {slopes:?} do not settle")]
    NoPowerLawTail { side: &'static str, slopes: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid density: {reason}")]
    InvalidDensity { reason: String },

    #[error("fit did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    FitDidNotConverge {
        iterations: usize,
        grad_norm: f64,
        last_params: Vec<f64>,
    },

    #[error("invalid network widths: {reason}")]
    InvalidWidths { reason: String },

    #[error("training diverged at step {step} (mu = {mu}, sigma = {sigma})")]
    TrainingDiverged {
        step: usize,
        mu: f64,
        sigma: f64,
        partial: Box<trainer::TrainTrace>,
    },

    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },

    #[error("empty sample batch")]
    EmptyBatch,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("malformed {format}: {reason}")]
    Parse { format: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
