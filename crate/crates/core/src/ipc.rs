//! Interference power control (IPC): scalar feedback that sets each
//! transmitter's power from the quantization errors and channel eigenvalues
//! of the current block.
//!
//! Three schemes:
//!
//! - interference margin: cap the bound on per-stream residual interference
//!   at τ ([`margin_power`]);
//! - sum-throughput ascent on the lower bound `A(P_1, P_2)` ([`algorithm1`]);
//! - minimum powers meeting an SINR target on the weakest stream of each link
//!   ([`algorithm2`]).
//!
//! All of them work from the residual-interference bound
//! `I_mn ≤ M ν P_n λ_mn^[L-N+1] ε_n`; [`IpcInputs::interference_coeff`] is the
//! coefficient multiplying `P_n` there.

use std::f64::consts::{LN_2, LOG2_E};

use crate::channel::SystemParams;
use crate::other;
use crate::precoding::PrecoderSet;

/// Quantization errors below this are treated as exactly zero.
pub const EPSILON_FLOOR: f64 = 1e-12;

/// Interference-bound coefficients below this count as no interference.
const COEFF_FLOOR: f64 = 1e-15;

#[inline]
fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

#[inline]
fn effective_epsilon(eps: f64) -> f64 {
    if eps < EPSILON_FLOOR {
        0.0
    } else {
        eps
    }
}

/// Per-block scalars the IPC schemes act on.
#[derive(Debug, Clone, PartialEq)]
pub struct IpcInputs {
    pub m_streams: usize,
    pub nu: f64,
    pub p_max: f64,
    pub theta: f64,
    pub tau: f64,
    /// `λ_mn^[L-N+1]` at receiver `m`.
    pub cross_tail: [f64; 2],
    /// `ε_n` for transmitter `n`.
    pub epsilon: [f64; 2],
    /// `λ_mm^[1..M]`, descending.
    pub lambda_direct: [Vec<f64>; 2],
}

impl IpcInputs {
    pub fn from_precoders(set: &PrecoderSet, params: &SystemParams) -> Self {
        Self {
            m_streams: params.m_streams,
            nu: params.nu,
            p_max: params.p_max,
            theta: params.theta,
            tau: params.tau(),
            cross_tail: [set.cross_tail(0), set.cross_tail(1)],
            epsilon: set.epsilon,
            lambda_direct: [set.outer[0].lambda_direct.clone(), set.outer[1].lambda_direct.clone()],
        }
    }

    /// `M ν λ_mn^[L-N+1] ε_n`: bound on per-stream interference at receiver
    /// `m` per unit of the interferer's power.
    pub fn interference_coeff(&self, m: usize) -> f64 {
        let n = other(m);
        self.m_streams as f64 * self.nu * self.cross_tail[m] * effective_epsilon(self.epsilon[n])
    }

    /// Weakest data eigenvalue `λ_mm^[M]`.
    pub fn weakest_direct(&self, m: usize) -> f64 {
        *self.lambda_direct[m].last().expect("at least one stream")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PowerScheme {
    Margin,
    Algorithm1,
    Algorithm2,
    FullPower,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerDecision {
    /// `(P_1, P_2)`, each in `[0, P_max]`.
    pub powers: [f64; 2],
    pub scheme: PowerScheme,
    /// Whether the outage-targeted powers existed (always true for the other
    /// schemes).
    pub feasible: bool,
    /// Gradient iterations performed (zero outside algorithm 1).
    pub iterations: usize,
}

impl PowerDecision {
    pub fn full_power(p_max: f64) -> Self {
        Self {
            powers: [p_max, p_max],
            scheme: PowerScheme::FullPower,
            feasible: true,
            iterations: 0,
        }
    }
}

/// Margin signal `η_n = τ / (M ν λ_mn^[L-N+1] ε_n)`; infinite when the
/// interference bound vanishes.
pub fn margin_signal(inputs: &IpcInputs, n: usize) -> f64 {
    let coeff = inputs.interference_coeff(other(n));
    if coeff < COEFF_FLOOR {
        f64::INFINITY
    } else {
        inputs.tau / coeff
    }
}

/// `P_n = min(η_n, P_max)` for both transmitters.
pub fn margin_power(inputs: &IpcInputs) -> PowerDecision {
    PowerDecision {
        powers: [0, 1].map(|n| margin_signal(inputs, n).min(inputs.p_max)),
        scheme: PowerScheme::Margin,
        feasible: true,
        iterations: 0,
    }
}

/// Achievable throughput of the margin scheme:
/// `Σ_m Σ_ℓ log2(1 + P_m λ_mm^[ℓ] / (1 + τ))` with the decision's powers.
pub fn achievable_throughput_margin(inputs: &IpcInputs, decision: &PowerDecision) -> f64 {
    (0..2)
        .map(|m| {
            inputs.lambda_direct[m]
                .iter()
                .map(|&l| log2_1p(decision.powers[m] * l / (1.0 + inputs.tau)))
                .sum::<f64>()
        })
        .sum()
}

/// Lower bound `A(P_1, P_2)` on the instantaneous sum throughput obtained by
/// replacing each stream's interference with its bound.
pub fn throughput_lower_bound(inputs: &IpcInputs, powers: [f64; 2]) -> f64 {
    (0..2)
        .map(|m| {
            let n = other(m);
            let denom = 1.0 + powers[n] * inputs.interference_coeff(m);
            inputs.lambda_direct[m]
                .iter()
                .map(|&l| log2_1p(powers[m] * l / denom))
                .sum::<f64>()
        })
        .sum()
}

/// The three parts of `∂A/∂P_m = μ_m + ψ_m − ρ_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slope {
    /// Gain on link `m` itself.
    pub mu: f64,
    /// Interference-bound term on link `n` (positive part).
    pub psi: f64,
    /// Interference-bound term on link `n` (negative part).
    pub rho: f64,
}

impl Slope {
    pub fn total(&self) -> f64 {
        self.mu + self.psi - self.rho
    }
}

pub fn slope(inputs: &IpcInputs, powers: [f64; 2], m: usize) -> Slope {
    let n = other(m);
    let big_m = inputs.m_streams as f64;
    // Interference coefficient at receiver m (from n) and at n (from m).
    let c_m = inputs.interference_coeff(m);
    let d_m = inputs.interference_coeff(n);

    let mu = LOG2_E
        * inputs.lambda_direct[m]
            .iter()
            .map(|&l| l / (1.0 + c_m * powers[n] + l * powers[m]))
            .sum::<f64>();
    let psi = LOG2_E
        * inputs.lambda_direct[n]
            .iter()
            .map(|&l| d_m / (1.0 + d_m * powers[m] + l * powers[n]))
            .sum::<f64>();
    let rho = LOG2_E * big_m * d_m / (1.0 + d_m * powers[m]);
    Slope { mu, psi, rho }
}

pub fn gradient(inputs: &IpcInputs, powers: [f64; 2]) -> [f64; 2] {
    [slope(inputs, powers, 0).total(), slope(inputs, powers, 1).total()]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alg1Options {
    /// Step Δγ as a fraction of `P_max` per unit of initial gradient norm.
    pub step_fraction: f64,
    pub max_iters: usize,
    /// Stop when `|ΔP_1| + |ΔP_2| < tol_fraction · P_max`.
    pub tol_fraction: f64,
    pub start: Alg1Start,
}

/// Where the ascent starts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Alg1Start {
    /// The best of `(P_max/2, P_max/2)`, `(P_max, P_max)`, `(P_max, 0)` and
    /// `(0, P_max)` under `A`. The bound is not concave and single-link
    /// corners are often the better basin.
    #[default]
    BestCandidate,
    Midpoint,
    At([f64; 2]),
}

impl Alg1Start {
    fn resolve(&self, inputs: &IpcInputs) -> [f64; 2] {
        let p = inputs.p_max;
        match *self {
            Alg1Start::Midpoint => [0.5 * p; 2],
            Alg1Start::At(x) => x,
            Alg1Start::BestCandidate => {
                let mut best = [0.5 * p; 2];
                let mut best_value = throughput_lower_bound(inputs, best);
                for cand in [[p, p], [p, 0.0], [0.0, p]] {
                    let v = throughput_lower_bound(inputs, cand);
                    if v > best_value {
                        best = cand;
                        best_value = v;
                    }
                }
                best
            }
        }
    }
}

impl Default for Alg1Options {
    fn default() -> Self {
        Self {
            step_fraction: 0.05,
            max_iters: 200,
            tol_fraction: 1e-4,
            start: Alg1Start::default(),
        }
    }
}

/// Max number of step halvings tried in one iteration.
const MAX_HALVINGS: usize = 40;

/// Projected gradient ascent on `A(P_1, P_2)` over `[0, P_max]²`:
/// `P_m ← min{[P_m + ∂A/∂P_m · Δγ]^+, P_max}`.
///
/// A step that would lower `A` is halved until it does not, so the objective
/// never decreases from its starting value.
pub fn algorithm1(inputs: &IpcInputs, opts: &Alg1Options) -> PowerDecision {
    let p_max = inputs.p_max;
    let project = |p: f64| p.clamp(0.0, p_max);
    let mut powers = opts.start.resolve(inputs).map(project);
    let mut value = throughput_lower_bound(inputs, powers);

    let g0 = gradient(inputs, powers);
    let g0_norm = g0[0].hypot(g0[1]);
    let step = if g0_norm > 0.0 {
        opts.step_fraction * p_max / g0_norm
    } else {
        opts.step_fraction * p_max
    };
    let tol = opts.tol_fraction * p_max;

    let mut iterations = 0;
    for _ in 0..opts.max_iters {
        let g = gradient(inputs, powers);
        let mut s = step;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate = [project(powers[0] + g[0] * s), project(powers[1] + g[1] * s)];
            let v = throughput_lower_bound(inputs, candidate);
            if v >= value {
                accepted = Some((candidate, v));
                break;
            }
            s *= 0.5;
        }
        iterations += 1;
        let Some((candidate, v)) = accepted else {
            break;
        };
        let change = (candidate[0] - powers[0]).abs() + (candidate[1] - powers[1]).abs();
        powers = candidate;
        value = v;
        if change < tol {
            break;
        }
    }

    PowerDecision {
        powers,
        scheme: PowerScheme::Algorithm1,
        feasible: true,
        iterations,
    }
}

/// What algorithm 2 does when no feasible power pair exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alg2Fallback {
    #[default]
    PMax,
    Zero,
    Margin,
}

/// Constraint coefficients `P_m ≥ a_m + b_mn P_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alg2Coefficients {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

/// `a_m = θ / λ_mm^[M]`, `b_mn = M ν λ_mn^[L-N+1] ε_n θ / λ_mm^[M]`.
/// `None` when a weakest eigenvalue is zero.
pub fn alg2_coefficients(inputs: &IpcInputs) -> Option<Alg2Coefficients> {
    let mut a = [0.0; 2];
    let mut b = [0.0; 2];
    for m in 0..2 {
        let weakest = inputs.weakest_direct(m);
        if weakest.is_nan() || weakest <= 0.0 {
            return None;
        }
        a[m] = inputs.theta / weakest;
        b[m] = inputs.interference_coeff(m) * inputs.theta / weakest;
    }
    Some(Alg2Coefficients { a, b })
}

/// The element-wise minimal pair meeting both constraints with equality,
/// `P_m = (a_m + b_mn a_n) / (1 − b_mn b_nm)`, or `None` when the
/// denominator is not positive.
pub fn minimum_powers(coeffs: &Alg2Coefficients) -> Option<[f64; 2]> {
    let det = 1.0 - coeffs.b[0] * coeffs.b[1];
    if det.is_nan() || det <= 0.0 {
        return None;
    }
    Some([0, 1].map(|m| (coeffs.a[m] + coeffs.b[m] * coeffs.a[other(m)]) / det))
}

/// Outage-targeted power control. Feasible when the minimal pair exists and
/// fits under `P_max`; otherwise the fallback powers are used.
pub fn algorithm2(inputs: &IpcInputs, fallback: Alg2Fallback) -> PowerDecision {
    let candidate = alg2_coefficients(inputs).and_then(|c| minimum_powers(&c));
    match candidate {
        Some(p) if p[0] <= inputs.p_max && p[1] <= inputs.p_max => PowerDecision {
            powers: p,
            scheme: PowerScheme::Algorithm2,
            feasible: true,
            iterations: 0,
        },
        _ => {
            let powers = match fallback {
                Alg2Fallback::PMax => [inputs.p_max; 2],
                Alg2Fallback::Zero => [0.0; 2],
                Alg2Fallback::Margin => margin_power(inputs).powers,
            };
            PowerDecision {
                powers,
                scheme: PowerScheme::Algorithm2,
                feasible: false,
                iterations: 0,
            }
        }
    }
}
