//! Property checks run by `coopfb validate`.

use coopfb::channel::{derive_seed, sample_realization, trial_rng, SystemParams};
use coopfb::ipc::{algorithm2, gradient, throughput_lower_bound, Alg2Fallback, IpcInputs};
use coopfb::metrics::{sinr, weakest_sinr_tilde};
use coopfb::precoding::{assemble, residual_interference, AssembleOptions, FeedbackMode, PrecoderSet};
use coopfb::quantization::Codebook;
use coopfb::{other, Result};
use rand::Rng;

use crate::config::Fault;

pub const LEMMA1_SLACK: f64 = 1e-9;
pub const GRADIENT_TOLERANCE: f64 = 1e-5;
pub const ALG2_TOLERANCE: f64 = 1e-9;
pub const DECOUPLING_INTERFERENCE: f64 = 1e-9;
pub const DECOUPLING_SINR: f64 = 1e-8;
const ALG2_GRID: usize = 101;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

pub struct CheckContext<'a> {
    pub params: &'a SystemParams,
    pub codebooks: &'a [Codebook; 2],
    pub seed: u64,
    pub trials: u64,
    pub points: usize,
    pub fault: Fault,
}

impl CheckContext<'_> {
    fn quantized(&self, tag: u64, t: u64) -> Result<(coopfb::channel::NetworkRealization, PrecoderSet)> {
        let r = sample_realization(self.params, derive_seed(self.seed, tag), t);
        let set = assemble(&r, self.codebooks, self.params, AssembleOptions::default())?;
        Ok((r, set))
    }
}

/// Residual interference never exceeds `M ν P_n λ_mn^[L-N+1] ε_n`.
pub fn lemma1(ctx: &CheckContext) -> Result<CheckOutcome> {
    let p = ctx.params;
    let powers = [p.p_max; 2];
    let mut violations = 0u64;
    let mut worst = 0.0f64;
    for t in 0..ctx.trials {
        let (r, mut set) = ctx.quantized(1, t)?;
        if ctx.fault == Fault::SkipQuantization {
            for n in 0..2 {
                set.precoder[n] = ctx.codebooks[n].entries()[0].matmul(&set.outer[n].f_outer);
            }
        }
        let interference = residual_interference(&set, &r, powers);
        for m in 0..2 {
            let n = other(m);
            let bound = p.m_streams as f64 * p.nu * powers[n] * set.cross_tail(m) * set.epsilon[n];
            for &i in &interference[m] {
                if i > bound + LEMMA1_SLACK {
                    violations += 1;
                }
                if bound > 0.0 {
                    worst = worst.max(i / bound);
                }
            }
        }
    }
    Ok(CheckOutcome {
        name: "lemma1",
        passed: violations == 0,
        detail: format!(
            "{violations} violations over {} realizations, max interference/bound {worst:.6}",
            ctx.trials
        ),
    })
}

/// Analytic slope of the throughput bound against central differences.
pub fn gradient_check(ctx: &CheckContext) -> Result<CheckOutcome> {
    let mut rng = trial_rng(derive_seed(ctx.seed, 2), 0);
    let mut worst = 0.0f64;
    for t in 0..ctx.points as u64 {
        let p_max = 10f64.powf(rng.random_range(0.0..3.0));
        let params = ctx.params.with_p_max(p_max);
        let r = sample_realization(&params, derive_seed(ctx.seed, 3), t);
        let set = assemble(&r, ctx.codebooks, &params, AssembleOptions::default())?;
        let inputs = IpcInputs::from_precoders(&set, &params);
        let powers = [rng.random_range(0.0..p_max), rng.random_range(0.0..p_max)];
        let g = gradient(&inputs, powers);
        for k in 0..2 {
            let h = 1e-6 * powers[k].max(1.0);
            let mut up = powers;
            let mut down = powers;
            up[k] += h;
            down[k] -= h;
            let fd = (throughput_lower_bound(&inputs, up) - throughput_lower_bound(&inputs, down)) / (2.0 * h);
            let scale = g[k].abs().max(fd.abs()).max(1e-12);
            worst = worst.max((fd - g[k]).abs() / scale);
        }
    }
    Ok(CheckOutcome {
        name: "gradient",
        passed: worst < GRADIENT_TOLERANCE,
        detail: format!(
            "max relative error {worst:.3e} over {} points (threshold {GRADIENT_TOLERANCE:e})",
            ctx.points
        ),
    })
}

/// Returned powers put the weakest stream exactly at θ, and no feasible grid
/// pair lies below them in either coordinate.
pub fn alg2_check(ctx: &CheckContext) -> Result<CheckOutcome> {
    let params = ctx.params;
    let mut feasible = 0usize;
    let mut worst_binding = 0.0f64;
    let mut dominated = 0usize;
    for t in 0..ctx.points as u64 {
        let (_, set) = ctx.quantized(4, t)?;
        let inputs = IpcInputs::from_precoders(&set, params);
        let d = algorithm2(&inputs, Alg2Fallback::PMax);
        if !d.feasible {
            continue;
        }
        feasible += 1;
        let w = weakest_sinr_tilde(&inputs, d.powers);
        worst_binding = worst_binding.max((w - params.theta).abs() / params.theta);

        let lam = [inputs.weakest_direct(0), inputs.weakest_direct(1)];
        let coeff = [inputs.interference_coeff(0), inputs.interference_coeff(1)];
        let step = params.p_max / (ALG2_GRID - 1) as f64;
        'grid: for i in 0..ALG2_GRID {
            let q0 = i as f64 * step;
            for j in 0..ALG2_GRID {
                let q1 = j as f64 * step;
                let ok0 = q0 * lam[0] / (1.0 + q1 * coeff[0]) >= params.theta;
                let ok1 = q1 * lam[1] / (1.0 + q0 * coeff[1]) >= params.theta;
                let below = q0 < d.powers[0] * (1.0 - ALG2_TOLERANCE) || q1 < d.powers[1] * (1.0 - ALG2_TOLERANCE);
                if ok0 && ok1 && below {
                    dominated += 1;
                    break 'grid;
                }
            }
        }
    }
    let passed = feasible > 0 && worst_binding <= ALG2_TOLERANCE && dominated == 0;
    Ok(CheckOutcome {
        name: "alg2",
        passed,
        detail: format!(
            "{feasible}/{} feasible, max |SINR/θ - 1| {worst_binding:.3e}, {dominated} instances with a smaller feasible grid pair",
            ctx.points
        ),
    })
}

/// With unquantized inner precoders the links do not interfere and each
/// stream sees `P λ`.
pub fn decoupling(ctx: &CheckContext) -> Result<CheckOutcome> {
    let params = ctx.params;
    let opts = AssembleOptions {
        feedback: FeedbackMode::Perfect,
        ..Default::default()
    };
    let powers = [params.p_max; 2];
    let mut max_interference = 0.0f64;
    let mut max_sinr_error = 0.0f64;
    for t in 0..ctx.trials {
        let r = sample_realization(params, derive_seed(ctx.seed, 5), t);
        let set = assemble(&r, ctx.codebooks, params, opts)?;
        for v in residual_interference(&set, &r, powers).iter().flatten() {
            max_interference = max_interference.max(*v);
        }
        let s = sinr(&set, &r, powers);
        for m in 0..2 {
            for (l, &x) in s[m].iter().enumerate() {
                let expect = powers[m] * set.outer[m].lambda_direct[l];
                max_sinr_error = max_sinr_error.max((x - expect).abs() / expect);
            }
        }
    }
    Ok(CheckOutcome {
        name: "decoupling",
        passed: max_interference < DECOUPLING_INTERFERENCE && max_sinr_error <= DECOUPLING_SINR,
        detail: format!(
            "max interference {max_interference:.3e}, max relative SINR error {max_sinr_error:.3e} over {} realizations",
            ctx.trials
        ),
    })
}

pub fn run(name: &str, ctx: &CheckContext) -> Result<CheckOutcome> {
    match name {
        "lemma1" => lemma1(ctx),
        "gradient" => gradient_check(ctx),
        "alg2" => alg2_check(ctx),
        "decoupling" => decoupling(ctx),
        _ => unreachable!("check names are validated with the configuration"),
    }
}
