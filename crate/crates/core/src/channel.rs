//! System parameters and i.i.d. Rayleigh block-fading realizations.
//!
//! Every trial owns its own ChaCha stream keyed by `(seed, trial_index)`, so a
//! trial's channel does not depend on which worker draws it or in what order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;
use crate::other;

/// Largest supported codebook size exponent.
pub const MAX_FEEDBACK_BITS: u32 = 20;

/// How the interference margin τ is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauMode {
    Fixed(f64),
    /// τ = c · P_max.
    Proportional(f64),
}

impl TauMode {
    pub fn tau(&self, p_max: f64) -> f64 {
        match *self {
            TauMode::Fixed(t) => t,
            TauMode::Proportional(c) => c * p_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Antennas at every node (L).
    pub l_antennas: usize,
    /// Spatial streams per link (M).
    pub m_streams: usize,
    /// Inner equalizer width (N).
    pub n_inner: usize,
    /// Feedback bits per inner precoder (B).
    pub b_bits: u32,
    /// Cross-link power coupling ν.
    pub nu: f64,
    /// Per-transmitter power cap, linear, noise power 1.
    pub p_max: f64,
    /// SINR decoding threshold θ (linear).
    pub theta: f64,
    pub tau_mode: TauMode,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            l_antennas: 6,
            m_streams: 2,
            n_inner: 3,
            b_bits: 6,
            nu: 0.2,
            p_max: 100.0,
            theta: 1.0,
            tau_mode: TauMode::Fixed(2.0),
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let (l, m, n) = (self.l_antennas, self.m_streams, self.n_inner);
        if m == 0 {
            return Err(Error::invalid("M must be at least 1"));
        }
        if l < 2 * m {
            return Err(Error::invalid(format!("L >= 2M is required (L={l}, M={m})")));
        }
        if n < m || n + m > l {
            return Err(Error::invalid(format!(
                "M <= N <= L-M is required (L={l}, M={m}, N={n})"
            )));
        }
        if self.b_bits == 0 || self.b_bits > MAX_FEEDBACK_BITS {
            return Err(Error::invalid(format!(
                "B must be in [1, {MAX_FEEDBACK_BITS}], got {}",
                self.b_bits
            )));
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::invalid(format!("nu must be in (0, 1], got {}", self.nu)));
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(Error::invalid(format!("P_max must be positive and finite, got {}", self.p_max)));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::invalid(format!("theta must be positive, got {}", self.theta)));
        }
        let tau = self.tau();
        if tau.is_nan() || tau <= 0.0 {
            return Err(Error::invalid(format!("tau must be positive, got {tau}")));
        }
        Ok(())
    }

    /// The interference margin at the current `p_max`.
    pub fn tau(&self) -> f64 {
        self.tau_mode.tau(self.p_max)
    }

    /// Index `L-N` of the largest cross-channel eigenvalue seen by the inner
    /// equalizer (`λ^[L-N+1]` in one-based terms).
    pub fn cross_tail_index(&self) -> usize {
        self.l_antennas - self.n_inner
    }

    pub fn with_p_max(&self, p_max: f64) -> Self {
        Self {
            p_max,
            ..self.clone()
        }
    }
}

/// One fading block: the four L×L channels and the coupling factor.
///
/// `channels[m][n]` is the fading from transmitter `n` to receiver `m`, stored
/// unscaled; ν enters the metric formulas as a power factor.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRealization {
    pub channels: [[ComplexMatrix; 2]; 2],
    pub nu: f64,
}

impl NetworkRealization {
    pub fn new(channels: [[ComplexMatrix; 2]; 2], nu: f64) -> Self {
        Self { channels, nu }
    }

    /// H_mm.
    pub fn direct(&self, m: usize) -> &ComplexMatrix {
        &self.channels[m][m]
    }

    /// H_mn with n the other link: interferer to receiver `m`.
    pub fn cross(&self, m: usize) -> &ComplexMatrix {
        &self.channels[m][other(m)]
    }

    pub fn h(&self, m: usize, n: usize) -> &ComplexMatrix {
        &self.channels[m][n]
    }
}

/// ChaCha stream for one trial. `seed` selects the key, `trial_index` the
/// stream, so streams never overlap.
pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

/// SplitMix64 finalizer over `(base, tag)` for deriving independent seeds.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One CN(0, 1) sample: independent real and imaginary parts of variance 1/2.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// rows×cols matrix of i.i.d. CN(0, 1) entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Draws H_11, H_12, H_21, H_22 (in that order) from the trial's own stream.
pub fn sample_realization(params: &SystemParams, seed: u64, trial_index: u64) -> NetworkRealization {
    let mut rng = trial_rng(seed, trial_index);
    sample_realization_from(params, &mut rng)
}

pub fn sample_realization_from<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> NetworkRealization {
    let l = params.l_antennas;
    let h11 = gaussian_matrix(rng, l, l);
    let h12 = gaussian_matrix(rng, l, l);
    let h21 = gaussian_matrix(rng, l, l);
    let h22 = gaussian_matrix(rng, l, l);
    NetworkRealization::new([[h11, h12], [h21, h22]], params.nu)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_are_valid() {
        SystemParams::default().validate().unwrap();
    }

    #[test]
    fn constraint_violations_are_rejected() {
        let base = SystemParams::default();
        let cases = [
            SystemParams { l_antennas: 3, ..base.clone() },
            SystemParams { n_inner: 1, ..base.clone() },
            SystemParams { n_inner: 5, ..base.clone() },
            SystemParams { b_bits: 0, ..base.clone() },
            SystemParams { nu: 0.0, ..base.clone() },
            SystemParams { nu: 1.5, ..base.clone() },
            SystemParams { p_max: -1.0, ..base.clone() },
            SystemParams { theta: 0.0, ..base.clone() },
            SystemParams { tau_mode: TauMode::Fixed(0.0), ..base.clone() },
        ];
        for p in cases {
            assert!(p.validate().is_err(), "{p:?} should be invalid");
        }
    }

    #[test]
    fn proportional_tau_scales_with_p_max() {
        let p = SystemParams {
            tau_mode: TauMode::Proportional(0.4),
            p_max: 1000.0,
            ..Default::default()
        };
        assert!((p.tau() - 400.0).abs() < 1e-12);
    }

    #[test]
    fn same_seed_and_trial_is_bit_identical() {
        let p = SystemParams::default();
        assert_eq!(sample_realization(&p, 42, 7), sample_realization(&p, 42, 7));
        assert_ne!(sample_realization(&p, 42, 7), sample_realization(&p, 42, 8));
        assert_ne!(sample_realization(&p, 43, 7), sample_realization(&p, 42, 7));
    }

    #[test]
    fn unit_average_power() {
        let p = SystemParams::default();
        let mut sum = 0.0;
        let mut count = 0usize;
        for t in 0..700 {
            let r = sample_realization(&p, 1, t);
            for row in &r.channels {
                for h in row {
                    sum += h.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>();
                    count += h.as_slice().len();
                }
            }
        }
        assert!(count >= 100_000);
        let mean = sum / count as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean |h|^2 = {mean}");
    }

    #[test]
    fn direct_and_cross_entries_uncorrelated() {
        let p = SystemParams::default();
        let n = 20_000u64;
        let (mut sxy, mut sxx, mut syy) = (Complex64::new(0.0, 0.0), 0.0, 0.0);
        for t in 0..n {
            let r = sample_realization(&p, 9, t);
            let x = r.h(0, 0)[(0, 0)];
            let y = r.h(0, 1)[(0, 0)];
            sxy += x * y.conj();
            sxx += x.norm_sqr();
            syy += y.norm_sqr();
        }
        let rho = sxy.norm() / (sxx * syy).sqrt();
        assert!(rho < 0.02, "correlation {rho}");
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(5, 3), derive_seed(5, 3));
    }
}
