//! Random semi-unitary codebooks and subspace quantization of inner precoders.
//!
//! # Text format
//!
//! Codebooks can be dumped to and loaded from a line-oriented text format so
//! that other implementations can quantize against the exact same codewords:
//!
//! ```text
//! coopfb-codebook v1
//! bits 6
//! rows 6
//! cols 2
//! seed 1234
//! codeword 0
//! <re> <im> <re> <im>        # one line per row, `cols` complex entries
//! ...
//! codeword 1
//! ...
//! ```
//!
//! Numbers are written with Rust's shortest round-trip `f64` formatting, so a
//! dump/load cycle is bit-exact. Blank lines and text after `#` are ignored.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{gaussian_matrix, SystemParams};
use crate::error::{Error, Result};
use crate::numerics::{frobenius_norm_sq, orthonormal_columns, ComplexMatrix, NumericsError};

const FORMAT_TAG: &str = "coopfb-codebook v1";

/// `2^B` L×M matrices with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    entries: Vec<ComplexMatrix>,
    b_bits: u32,
    seed: u64,
}

impl Codebook {
    /// Wraps explicit codewords. The count must be a power of two and all
    /// codewords must share a shape.
    pub fn from_entries(entries: Vec<ComplexMatrix>, seed: u64) -> Result<Self> {
        let count = entries.len();
        if count < 2 || !count.is_power_of_two() {
            return Err(Error::invalid(format!(
                "codebook size must be 2^B with B >= 1, got {count}"
            )));
        }
        let (rows, cols) = (entries[0].rows(), entries[0].cols());
        if entries.iter().any(|w| w.rows() != rows || w.cols() != cols) {
            return Err(Error::invalid("codewords differ in shape"));
        }
        Ok(Self {
            b_bits: count.trailing_zeros(),
            entries,
            seed,
        })
    }

    pub fn entries(&self) -> &[ComplexMatrix] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn b_bits(&self) -> u32 {
        self.b_bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rows(&self) -> usize {
        self.entries[0].rows()
    }

    pub fn cols(&self) -> usize {
        self.entries[0].cols()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{FORMAT_TAG}");
        let _ = writeln!(out, "bits {}", self.b_bits);
        let _ = writeln!(out, "rows {}", self.rows());
        let _ = writeln!(out, "cols {}", self.cols());
        let _ = writeln!(out, "seed {}", self.seed);
        for (k, w) in self.entries.iter().enumerate() {
            let _ = writeln!(out, "codeword {k}");
            for i in 0..w.rows() {
                let row: Vec<String> = (0..w.cols())
                    .map(|j| format!("{:?} {:?}", w[(i, j)].re, w[(i, j)].im))
                    .collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let fail = |line: usize, message: String| Error::CodebookFormat { line, message };
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| fail(0, format!("unexpected end of input, expected {what}")))
        };

        let (n, tag) = next("header")?;
        if tag != FORMAT_TAG {
            return Err(fail(n, format!("expected `{FORMAT_TAG}`, found `{tag}`")));
        }
        let mut header = |key: &str| -> Result<u64> {
            let (n, l) = next(key)?;
            let mut it = l.split_whitespace();
            match (it.next(), it.next(), it.next()) {
                (Some(k), Some(v), None) if k == key => v
                    .parse::<u64>()
                    .map_err(|e| fail(n, format!("bad value for `{key}`: {e}"))),
                _ => Err(fail(n, format!("expected `{key} <integer>`, found `{l}`"))),
            }
        };
        let bits = header("bits")?;
        let rows = header("rows")? as usize;
        let cols = header("cols")? as usize;
        let seed = header("seed")?;
        if bits == 0 || bits > crate::channel::MAX_FEEDBACK_BITS as u64 {
            return Err(fail(0, format!("unsupported bit count {bits}")));
        }
        if rows == 0 || cols == 0 {
            return Err(fail(0, "codeword dimensions must be positive".into()));
        }

        let count = 1usize << bits;
        let mut entries = Vec::with_capacity(count);
        for k in 0..count {
            let (n, l) = next("codeword")?;
            if l != format!("codeword {k}") {
                return Err(fail(n, format!("expected `codeword {k}`, found `{l}`")));
            }
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (n, l) = next("codeword row")?;
                let values = l
                    .split_whitespace()
                    .map(|v| v.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| fail(n, format!("bad number: {e}")))?;
                if values.len() != 2 * cols {
                    return Err(fail(n, format!("expected {} numbers, found {}", 2 * cols, values.len())));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(fail(n, "non-finite entry".into()));
                }
                data.extend(values.chunks(2).map(|p| Complex64::new(p[0], p[1])));
            }
            entries.push(ComplexMatrix::from_row_major(rows, cols, data));
        }
        if let Some((n, l)) = lines.next() {
            return Err(fail(n, format!("trailing content `{l}`")));
        }
        Self::from_entries(entries, seed)
    }
}

/// Result of quantizing one inner precoder.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationOutcome {
    pub index: usize,
    /// The selected codeword F̂.
    pub quantized: ComplexMatrix,
    /// ε = 1 − ‖F†F̂‖²_F / M, in [0, 1].
    pub epsilon: f64,
}

/// Draws `2^B` codewords as orthonormalized i.i.d. Gaussian L×M matrices.
pub fn generate_codebook(params: &SystemParams, seed: u64) -> Result<Codebook> {
    generate_codebook_with(params.b_bits, params.l_antennas, params.m_streams, seed)
}

pub fn generate_codebook_with(b_bits: u32, rows: usize, cols: usize, seed: u64) -> Result<Codebook> {
    if b_bits == 0 || b_bits > crate::channel::MAX_FEEDBACK_BITS {
        return Err(Error::invalid(format!("unsupported bit count {b_bits}")));
    }
    if rows < cols || cols == 0 {
        return Err(Error::invalid(format!("codewords need L >= M >= 1, got {rows}x{cols}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = 1usize << b_bits;
    let mut entries = Vec::with_capacity(count);
    while entries.len() < count {
        match orthonormal_columns(&gaussian_matrix(&mut rng, rows, cols)) {
            Ok(w) => entries.push(w),
            Err(NumericsError::RankDeficient { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Codebook::from_entries(entries, seed)
}

/// ε between an inner precoder and a candidate codeword, clamped to [0, 1].
pub fn quantization_error(f_inner: &ComplexMatrix, codeword: &ComplexMatrix) -> f64 {
    let m = f_inner.cols() as f64;
    (1.0 - frobenius_norm_sq(&f_inner.adjoint_mul(codeword)) / m).clamp(0.0, 1.0)
}

/// Exhaustive search for the codeword with the largest subspace correlation
/// `‖F†W‖²_F`; ties go to the lowest index.
pub fn quantize(f_inner: &ComplexMatrix, codebook: &Codebook) -> QuantizationOutcome {
    assert_eq!(
        (f_inner.rows(), f_inner.cols()),
        (codebook.rows(), codebook.cols()),
        "inner precoder and codebook shapes differ"
    );
    let mut best = 0;
    let mut best_corr = f64::NEG_INFINITY;
    for (k, w) in codebook.entries.iter().enumerate() {
        let corr = frobenius_norm_sq(&f_inner.adjoint_mul(w));
        if corr > best_corr {
            best = k;
            best_corr = corr;
        }
    }
    let quantized = codebook.entries[best].clone();
    let epsilon = quantization_error(f_inner, &quantized);
    QuantizationOutcome {
        index: best,
        quantized,
        epsilon,
    }
}

#[cfg(test)]
#[path = "../tests/common/oracles.rs"]
mod oracles;
