//! Inner/outer precoder and equalizer design.
//!
//! Receiver `m` and the interfering transmitter `n` share the SVD of the
//! cross channel `H_mn = V Σ U†`. The inner equalizer takes the last `N` left
//! singular vectors (the weakest `N` modes) and the inner precoder the first
//! `M` right singular vectors, so `G^i† H_mn F^i = 0` exactly and the
//! quantization-induced leakage is bounded by the largest of the `N` weakest
//! eigenvalues, `λ_mn^[L-N+1]`.
//!
//! The outer pair diagonalizes the `N×M` effective data channel
//! `G^i† H_mm F^i`.

use crate::channel::{NetworkRealization, SystemParams};
use crate::error::{Error, Result};
use crate::numerics::{frobenius_norm_sq, svd, ComplexMatrix};
use crate::other;
use crate::quantization::{quantize, Codebook, QuantizationOutcome};

/// Inner pair designed from one cross channel `H_mn`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerPair {
    /// G^i_m, L×N, orthonormal columns (used by receiver `m`).
    pub g_inner: ComplexMatrix,
    /// F^i_n, L×M, orthonormal columns (used by transmitter `n`).
    pub f_inner: ComplexMatrix,
    /// Eigenvalues of `H_mn H_mn†`, descending.
    pub lambda_cross: Vec<f64>,
}

impl InnerPair {
    /// `λ_mn^[L-N+1]`, the largest eigenvalue among the `N` the equalizer sees.
    pub fn cross_tail(&self) -> f64 {
        let l = self.lambda_cross.len();
        self.lambda_cross[l - self.g_inner.cols()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterPair {
    /// N×M, orthonormal columns.
    pub g_outer: ComplexMatrix,
    /// M×M unitary.
    pub f_outer: ComplexMatrix,
    /// Eigenvalues of the effective channel `H^o H^o†` (top M), descending.
    pub lambda_direct: Vec<f64>,
}

pub fn design_inner(h_cross: &ComplexMatrix, params: &SystemParams) -> Result<InnerPair> {
    params.validate()?;
    let l = params.l_antennas;
    if h_cross.rows() != l || h_cross.cols() != l {
        return Err(Error::invalid(format!(
            "cross channel must be {l}x{l}, got {}x{}",
            h_cross.rows(),
            h_cross.cols()
        )));
    }
    let (m, n) = (params.m_streams, params.n_inner);
    let dec = svd(h_cross)?;
    Ok(InnerPair {
        g_inner: dec.left.select_columns(l - n..l),
        f_inner: dec.right.select_columns(0..m),
        lambda_cross: dec.squared_singular_values(),
    })
}

/// Outer pair from the effective channel `g_inner† · h_direct · f_inner_applied`.
pub fn design_outer(
    h_direct: &ComplexMatrix,
    g_inner: &ComplexMatrix,
    f_inner_applied: &ComplexMatrix,
) -> Result<OuterPair> {
    if g_inner.rows() != h_direct.rows() || f_inner_applied.rows() != h_direct.cols() {
        return Err(Error::invalid("inner pair does not match the direct channel"));
    }
    let m = f_inner_applied.cols();
    if g_inner.cols() < m {
        return Err(Error::invalid("inner equalizer narrower than the stream count"));
    }
    let effective = g_inner.adjoint_mul(&h_direct.matmul(f_inner_applied));
    let dec = svd(&effective)?;
    let lambda_direct = dec.squared_singular_values();
    Ok(OuterPair {
        g_outer: dec.left.select_columns(0..m),
        f_outer: dec.right,
        lambda_direct,
    })
}

/// How the transmitters learn their inner precoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeedbackMode {
    /// Quantized cooperative feedback through the per-link codebooks.
    #[default]
    Quantized,
    /// Unquantized inner precoders, ε = 0.
    Perfect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AssembleOptions {
    pub feedback: FeedbackMode,
    /// Design the outer pair on the true inner precoder instead of the one
    /// the transmitter actually applies.
    pub outer_from_true_inner: bool,
}

/// All precoders and equalizers for one fading block.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    /// `inner[m]` comes from `H_mn`: it holds `G^i_m` and the true `F^i_n`.
    pub inner: [InnerPair; 2],
    /// Feedback outcome for transmitter `n`; `None` under perfect feedback.
    pub feedback: [Option<QuantizationOutcome>; 2],
    /// Inner precoder transmitter `n` actually applies (F̂^i_n).
    pub applied_inner: [ComplexMatrix; 2],
    /// ε_n per transmitter.
    pub epsilon: [f64; 2],
    pub outer: [OuterPair; 2],
    /// F_n = F̂^i_n F^o_n, L×M.
    pub precoder: [ComplexMatrix; 2],
    /// G_m = G^i_m G^o_m, L×M.
    pub equalizer: [ComplexMatrix; 2],
}

impl PrecoderSet {
    /// True (unquantized) inner precoder of transmitter `n`.
    pub fn true_inner(&self, n: usize) -> &ComplexMatrix {
        &self.inner[other(n)].f_inner
    }

    /// `λ_mn^[L-N+1]` for receiver `m`.
    pub fn cross_tail(&self, m: usize) -> f64 {
        self.inner[m].cross_tail()
    }
}

/// Designs both links for one realization. `codebooks[n]` quantizes the inner
/// precoder of transmitter `n`; it is ignored under perfect feedback.
pub fn assemble(
    realization: &NetworkRealization,
    codebooks: &[Codebook; 2],
    params: &SystemParams,
    opts: AssembleOptions,
) -> Result<PrecoderSet> {
    let inner = [
        design_inner(realization.cross(0), params)?,
        design_inner(realization.cross(1), params)?,
    ];

    let feedback: [Option<QuantizationOutcome>; 2] = match opts.feedback {
        FeedbackMode::Quantized => [0, 1].map(|n| Some(quantize(&inner[other(n)].f_inner, &codebooks[n]))),
        FeedbackMode::Perfect => [None, None],
    };
    let applied_inner: [ComplexMatrix; 2] = [0, 1].map(|n| match &feedback[n] {
        Some(q) => q.quantized.clone(),
        None => inner[other(n)].f_inner.clone(),
    });
    let epsilon = [0, 1].map(|n| feedback[n].as_ref().map_or(0.0, |q| q.epsilon));

    let mut outer = Vec::with_capacity(2);
    for n in 0..2 {
        let f_for_design = if opts.outer_from_true_inner {
            &inner[other(n)].f_inner
        } else {
            &applied_inner[n]
        };
        outer.push(design_outer(realization.direct(n), &inner[n].g_inner, f_for_design)?);
    }
    let outer: [OuterPair; 2] = outer.try_into().expect("two links");

    let precoder = [0, 1].map(|n| applied_inner[n].matmul(&outer[n].f_outer));
    let equalizer = [0, 1].map(|m| inner[m].g_inner.matmul(&outer[m].g_outer));

    Ok(PrecoderSet {
        inner,
        feedback,
        applied_inner,
        epsilon,
        outer,
        precoder,
        equalizer,
    })
}

/// Per-stream residual interference `I_mn^[ℓ]` at each receiver `m`:
/// `P_n ν ‖[G^o_m]_ℓ† G^i_m† H_mn F̂^i_n F^o_n‖²`.
pub fn residual_interference(
    set: &PrecoderSet,
    realization: &NetworkRealization,
    powers: [f64; 2],
) -> [Vec<f64>; 2] {
    [0, 1].map(|m| {
        let n = other(m);
        if powers[n] == 0.0 {
            return vec![0.0; set.outer[m].g_outer.cols()];
        }
        // G_m† H_mn F_n, M×M; row ℓ is stream ℓ's leakage.
        let leak = set.equalizer[m].adjoint_mul(&realization.cross(m).matmul(&set.precoder[n]));
        (0..leak.rows())
            .map(|l| {
                let row = ComplexMatrix::from_fn(1, leak.cols(), |_, j| leak[(l, j)]);
                powers[n] * realization.nu * frobenius_norm_sq(&row)
            })
            .collect()
    })
}

#[cfg(test)]
#[path = "../tests/common/oracles.rs"]
mod oracles;
