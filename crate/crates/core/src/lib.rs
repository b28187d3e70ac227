//! Cooperative-feedback precoding for the two-user MIMO interference channel.
//!
//! Each link splits its precoder into an inner part, which nulls the
//! interference it causes at the other receiver and is fed back over a
//! finite-rate channel, and an outer part, which diagonalizes the remaining
//! data channel. Residual interference left by quantizing the inner precoder
//! is regulated by scalar interference-power-control (IPC) feedback.
//!
//! Module map:
//!
//! - [`numerics`]: dense complex matrices, Jacobi SVD, orthonormalization.
//! - [`channel`]: system parameters and Rayleigh block-fading realizations.
//! - [`quantization`]: random semi-unitary codebooks and subspace quantization.
//! - [`precoding`]: inner/outer precoder and equalizer design.
//! - [`ipc`]: the margin, gradient-ascent and outage-targeted power controls.
//! - [`metrics`]: SINR, throughput, outage, aggregation, asymptotic estimators.
//! - [`simulator`]: reproducible parallel Monte Carlo sweeps.
//! - [`report`]: CSV rendering of sweep results.
//!
//! Links are indexed `0` and `1` throughout; `other(m)` is the interferer of
//! receiver `m`.

pub mod channel;
pub mod error;
pub mod ipc;
pub mod metrics;
pub mod numerics;
pub mod precoding;
pub mod quantization;
pub mod report;
pub mod simulator;

pub use error::{Error, Result};

/// Index of the other link in a two-link network.
#[inline]
pub const fn other(link: usize) -> usize {
    1 - link
}
