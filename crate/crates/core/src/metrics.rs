//! Per-trial SINR, throughput and outage, their aggregation over trials, and
//! Monte Carlo estimators of the large-`P_max` behaviour of the margin scheme.

use std::f64::consts::LN_2;

use crate::channel::{gaussian_matrix, trial_rng, NetworkRealization, SystemParams};
use crate::error::{Error, Result};
use crate::ipc::{
    achievable_throughput_margin, throughput_lower_bound, IpcInputs, PowerDecision, PowerScheme,
};
use crate::numerics::{frobenius_norm_sq, svd, ComplexMatrix};
use crate::other;
use crate::precoding::{design_inner, residual_interference, PrecoderSet};
use crate::quantization::{quantize, Codebook};

/// Two-sided 95% normal quantile used for the outage interval.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

#[inline]
fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

/// Receive SINR per link and stream, noise power 1:
/// `P_m |g_ℓ† H_mm f_ℓ|² / (1 + P_n ν ‖g_ℓ† H_mn F_n‖²)`.
pub fn sinr(set: &PrecoderSet, realization: &NetworkRealization, powers: [f64; 2]) -> [Vec<f64>; 2] {
    [0, 1].map(|m| {
        let n = other(m);
        let g = &set.equalizer[m];
        let signal = g.adjoint_mul(&realization.direct(m).matmul(&set.precoder[m]));
        let leak = g.adjoint_mul(&realization.cross(m).matmul(&set.precoder[n]));
        (0..g.cols())
            .map(|l| {
                let s = powers[m] * signal[(l, l)].norm_sqr();
                let row = ComplexMatrix::from_fn(1, leak.cols(), |_, j| leak[(l, j)]);
                let i = powers[n] * realization.nu * frobenius_norm_sq(&row);
                s / (1.0 + i)
            })
            .collect()
    })
}

/// SINR lower bound with interference replaced by its bound:
/// `P_m λ_mm^[ℓ] / (1 + P_n M ν λ_mn^[L-N+1] ε_n)`.
pub fn sinr_tilde(inputs: &IpcInputs, powers: [f64; 2]) -> [Vec<f64>; 2] {
    [0, 1].map(|m| {
        let denom = 1.0 + powers[other(m)] * inputs.interference_coeff(m);
        inputs.lambda_direct[m].iter().map(|&l| powers[m] * l / denom).collect()
    })
}

/// `(min over links of the weakest-stream SINR bound)`.
pub fn weakest_sinr_tilde(inputs: &IpcInputs, powers: [f64; 2]) -> f64 {
    sinr_tilde(inputs, powers)
        .iter()
        .map(|v| *v.last().expect("at least one stream"))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    pub sinr: [Vec<f64>; 2],
    /// `Σ log2(1 + SINR)` over both links and all streams.
    pub throughput: f64,
    /// Some stream fell below θ.
    pub outage: bool,
    pub interference: [Vec<f64>; 2],
    pub decision: PowerDecision,
    pub epsilon: [f64; 2],
    /// The scheme's analytic lower bound for this block: the margin formula
    /// for margin decisions, `A(P_1, P_2)` otherwise.
    pub achievable: f64,
}

pub fn evaluate_trial(
    set: &PrecoderSet,
    realization: &NetworkRealization,
    inputs: &IpcInputs,
    decision: PowerDecision,
) -> TrialMetrics {
    let sinr = sinr(set, realization, decision.powers);
    let throughput = sinr.iter().flatten().map(|&s| log2_1p(s)).sum();
    let outage = sinr.iter().flatten().any(|&s| s < inputs.theta);
    let interference = residual_interference(set, realization, decision.powers);
    let achievable = match decision.scheme {
        PowerScheme::Margin => achievable_throughput_margin(inputs, &decision),
        _ => throughput_lower_bound(inputs, decision.powers),
    };
    TrialMetrics {
        sinr,
        throughput,
        outage,
        interference,
        epsilon: set.epsilon,
        achievable,
        decision,
    }
}

/// Aggregated statistics for one (scheme, grid point).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub trials: u64,
    pub throughput: f64,
    pub throughput_stderr: f64,
    pub outage: f64,
    pub outage_lo: f64,
    pub outage_hi: f64,
    /// Mean of `(P_1 + P_2) / 2`, linear.
    pub mean_tx_power: f64,
    pub tx_power_stderr: f64,
    pub avg_tx_snr_db: f64,
    pub mean_epsilon: f64,
    pub mean_achievable: f64,
    pub achievable_stderr: f64,
    /// Fraction of trials where algorithm 2 found feasible powers.
    pub feasibility_rate: Option<f64>,
    /// Mean gradient iterations of algorithm 1.
    pub mean_iterations: Option<f64>,
}

impl SweepPoint {
    pub fn outage_stderr(&self) -> f64 {
        let n = self.trials as f64;
        (self.outage * (1.0 - self.outage) / n).sqrt()
    }
}

/// Running sums; merging is associative so trials can be folded in any
/// partition.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointAccumulator {
    n: u64,
    sum_throughput: f64,
    sum_throughput_sq: f64,
    outages: u64,
    sum_power: f64,
    sum_power_sq: f64,
    sum_epsilon: f64,
    sum_achievable: f64,
    sum_achievable_sq: f64,
    alg2_trials: u64,
    alg2_feasible: u64,
    alg1_trials: u64,
    alg1_iterations: u64,
}

impl PointAccumulator {
    pub fn push(&mut self, t: &TrialMetrics) {
        self.n += 1;
        self.sum_throughput += t.throughput;
        self.sum_throughput_sq += t.throughput * t.throughput;
        self.outages += u64::from(t.outage);
        let power = 0.5 * (t.decision.powers[0] + t.decision.powers[1]);
        self.sum_power += power;
        self.sum_power_sq += power * power;
        self.sum_epsilon += 0.5 * (t.epsilon[0] + t.epsilon[1]);
        self.sum_achievable += t.achievable;
        self.sum_achievable_sq += t.achievable * t.achievable;
        match t.decision.scheme {
            PowerScheme::Algorithm2 => {
                self.alg2_trials += 1;
                self.alg2_feasible += u64::from(t.decision.feasible);
            }
            PowerScheme::Algorithm1 => {
                self.alg1_trials += 1;
                self.alg1_iterations += t.decision.iterations as u64;
            }
            _ => {}
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.n += other.n;
        self.sum_throughput += other.sum_throughput;
        self.sum_throughput_sq += other.sum_throughput_sq;
        self.outages += other.outages;
        self.sum_power += other.sum_power;
        self.sum_power_sq += other.sum_power_sq;
        self.sum_epsilon += other.sum_epsilon;
        self.sum_achievable += other.sum_achievable;
        self.sum_achievable_sq += other.sum_achievable_sq;
        self.alg2_trials += other.alg2_trials;
        self.alg2_feasible += other.alg2_feasible;
        self.alg1_trials += other.alg1_trials;
        self.alg1_iterations += other.alg1_iterations;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn finish(&self) -> Result<SweepPoint> {
        if self.n == 0 {
            return Err(Error::EmptyAggregate);
        }
        let n = self.n as f64;
        let (throughput, throughput_stderr) = mean_and_stderr(self.sum_throughput, self.sum_throughput_sq, n);
        let (mean_achievable, achievable_stderr) =
            mean_and_stderr(self.sum_achievable, self.sum_achievable_sq, n);
        let (outage_lo, outage_hi) = wilson_interval(self.outages, self.n, WILSON_Z);
        let (mean_tx_power, tx_power_stderr) = mean_and_stderr(self.sum_power, self.sum_power_sq, n);
        Ok(SweepPoint {
            trials: self.n,
            throughput,
            throughput_stderr,
            outage: self.outages as f64 / n,
            outage_lo,
            outage_hi,
            mean_tx_power,
            tx_power_stderr,
            avg_tx_snr_db: 10.0 * mean_tx_power.log10(),
            mean_epsilon: self.sum_epsilon / n,
            mean_achievable,
            achievable_stderr,
            feasibility_rate: (self.alg2_trials > 0).then(|| self.alg2_feasible as f64 / self.alg2_trials as f64),
            mean_iterations: (self.alg1_trials > 0).then(|| self.alg1_iterations as f64 / self.alg1_trials as f64),
        })
    }
}

fn mean_and_stderr(sum: f64, sum_sq: f64, n: f64) -> (f64, f64) {
    let mean = sum / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let kf = k as f64;
    let n = n as f64;
    let p = kf / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if kf == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

pub fn aggregate(trials: &[TrialMetrics]) -> Result<SweepPoint> {
    let mut acc = PointAccumulator::default();
    for t in trials {
        acc.push(t);
    }
    acc.finish()
}

/// Monte Carlo estimates of the margin scheme's large-`P_max` limits.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoteEstimate {
    pub trials: u64,
    /// `2 Σ_ℓ E[log2(1 + τ λ́_ℓ / ((1+τ) M ν λ̌_{L-N+1} ε))]`.
    pub throughput: f64,
    pub throughput_stderr: f64,
    /// `2 Pr(τ/(1+τ) · λ́_M / (M ν λ̌_{L-N+1} ε) < θ)`, in `[0, 2]`.
    pub outage_bound: f64,
    pub outage_bound_stderr: f64,
}

impl AsymptoteEstimate {
    /// The outage bound capped at one.
    pub fn outage_probability_bound(&self) -> f64 {
        self.outage_bound.min(1.0)
    }
}

/// Samples, per trial, an L×L cross channel (giving `λ̌_{L-N+1}` and, through
/// the inner design and the codebook, `ε`) and an independent N×M effective
/// data channel (giving `λ́`). `tau` and `theta` are taken as given.
pub fn estimate_asymptotes(
    params: &SystemParams,
    codebook: &Codebook,
    tau: f64,
    theta: f64,
    trials: u64,
    seed: u64,
) -> Result<AsymptoteEstimate> {
    if trials == 0 {
        return Err(Error::EmptyAggregate);
    }
    let (l, m, n) = (params.l_antennas, params.m_streams, params.n_inner);
    let big_m = m as f64;
    let share = if tau.is_infinite() { 1.0 } else { tau / (1.0 + tau) };

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut hits = 0u64;
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let cross = gaussian_matrix(&mut rng, l, l);
        let inner = design_inner(&cross, params)?;
        let eps = quantize(&inner.f_inner, codebook).epsilon;
        let effective = gaussian_matrix(&mut rng, n, m);
        let lambda = svd(&effective)?.squared_singular_values();

        let scale = share / (big_m * params.nu * inner.cross_tail() * eps);
        let value: f64 = 2.0 * lambda.iter().map(|&x| log2_1p(scale * x)).sum::<f64>();
        sum += value;
        sum_sq += value * value;
        if scale * lambda[m - 1] < theta {
            hits += 1;
        }
    }
    let nf = trials as f64;
    let (throughput, throughput_stderr) = mean_and_stderr(sum, sum_sq, nf);
    let p = hits as f64 / nf;
    Ok(AsymptoteEstimate {
        trials,
        throughput,
        throughput_stderr,
        outage_bound: 2.0 * p,
        outage_bound_stderr: 2.0 * (p * (1.0 - p) / nf).sqrt(),
    })
}

/// First-order large-`P_max` achievable throughput of the margin scheme.
pub fn lemma2_asymptote(params: &SystemParams, codebook: &Codebook, trials: u64, seed: u64) -> Result<f64> {
    Ok(estimate_asymptotes(params, codebook, params.tau(), params.theta, trials, seed)?.throughput)
}

/// Large-`P_max` outage upper bound of the margin scheme, uncapped (in `[0, 2]`).
pub fn lemma3_asymptote(
    params: &SystemParams,
    codebook: &Codebook,
    theta: f64,
    trials: u64,
    seed: u64,
) -> Result<f64> {
    Ok(estimate_asymptotes(params, codebook, params.tau(), theta, trials, seed)?.outage_bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_realization, TauMode};
    use crate::ipc::{algorithm2, margin_power, Alg2Fallback};
    use crate::precoding::{assemble, AssembleOptions, FeedbackMode};
    use crate::quantization::generate_codebook;
    use num_complex::Complex64;

    fn setup(seed: u64) -> (SystemParams, [Codebook; 2]) {
        let p = SystemParams::default();
        let cbs = [generate_codebook(&p, seed).unwrap(), generate_codebook(&p, seed + 1).unwrap()];
        (p, cbs)
    }

    #[test]
    fn zero_power_gives_zero_sinr() {
        let (p, cbs) = setup(1);
        let r = sample_realization(&p, 2, 0);
        let set = assemble(&r, &cbs, &p, AssembleOptions::default()).unwrap();
        assert!(sinr(&set, &r, [0.0, 0.0]).iter().flatten().all(|&s| s == 0.0));
    }

    #[test]
    fn perfect_feedback_sinr_is_power_times_eigenvalue() {
        let (p, cbs) = setup(2);
        let opts = AssembleOptions {
            feedback: FeedbackMode::Perfect,
            ..Default::default()
        };
        for t in 0..50 {
            let r = sample_realization(&p, 3, t);
            let set = assemble(&r, &cbs, &p, opts).unwrap();
            let powers = [10.0, 40.0];
            let s = sinr(&set, &r, powers);
            for m in 0..2 {
                for (l, &x) in s[m].iter().enumerate() {
                    let expect = powers[m] * set.outer[m].lambda_direct[l];
                    assert!((x - expect).abs() <= 1e-8 * expect);
                }
            }
            let x = IpcInputs::from_precoders(&set, &p);
            let tilde = sinr_tilde(&x, powers);
            for m in 0..2 {
                for (a, b) in tilde[m].iter().zip(&s[m]) {
                    assert!((a - b).abs() <= 1e-8 * b);
                }
            }
        }
    }

    #[test]
    fn interference_term_matches_columnwise_expansion() {
        let (p, cbs) = setup(3);
        let r = sample_realization(&p, 4, 1);
        let set = assemble(&r, &cbs, &p, AssembleOptions::default()).unwrap();
        let powers = [20.0, 30.0];
        let s = sinr(&set, &r, powers);
        for m in 0..2 {
            let n = other(m);
            for l in 0..2 {
                let g: Vec<Complex64> = set.equalizer[m].column(l);
                let sig: Complex64 = {
                    let hf = r.direct(m).matmul(&set.precoder[m]);
                    (0..6).map(|i| g[i].conj() * hf[(i, l)]).sum()
                };
                // Sum over interferer streams k of |g† H_mn f_k|^2.
                let mut interf = 0.0;
                for k in 0..2 {
                    let f = set.precoder[n].column(k);
                    let mut z = Complex64::new(0.0, 0.0);
                    for i in 0..6 {
                        for j in 0..6 {
                            z += g[i].conj() * r.cross(m)[(i, j)] * f[j];
                        }
                    }
                    interf += z.norm_sqr();
                }
                let expect = powers[m] * sig.norm_sqr() / (1.0 + powers[n] * p.nu * interf);
                assert!((s[m][l] - expect).abs() <= 1e-10 * expect.max(1.0));
            }
        }
    }

    #[test]
    fn sinr_tilde_never_exceeds_sinr() {
        let (p, cbs) = setup(4);
        for t in 0..200 {
            let r = sample_realization(&p, 5, t);
            let set = assemble(&r, &cbs, &p, AssembleOptions::default()).unwrap();
            let x = IpcInputs::from_precoders(&set, &p);
            let powers = [50.0, 80.0];
            let s = sinr(&set, &r, powers);
            let st = sinr_tilde(&x, powers);
            for m in 0..2 {
                for (a, b) in st[m].iter().zip(&s[m]) {
                    assert!(*a <= b + 1e-9);
                }
            }
        }
    }

    #[test]
    fn algorithm2_powers_put_weakest_bound_at_threshold() {
        let (p, cbs) = setup(5);
        let p = SystemParams { theta: 1.5, ..p };
        let mut checked = 0;
        for t in 0..100 {
            let r = sample_realization(&p, 6, t);
            let set = assemble(&r, &cbs, &p, AssembleOptions::default()).unwrap();
            let x = IpcInputs::from_precoders(&set, &p);
            let d = algorithm2(&x, Alg2Fallback::PMax);
            if d.feasible {
                checked += 1;
                let w = weakest_sinr_tilde(&x, d.powers);
                assert!((w - p.theta).abs() <= 1e-9 * p.theta);
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn outage_flag_matches_min_sinr() {
        let (p, cbs) = setup(6);
        for t in 0..100 {
            let r = sample_realization(&p, 7, t);
            let set = assemble(&r, &cbs, &p, AssembleOptions::default()).unwrap();
            let x = IpcInputs::from_precoders(&set, &p);
            let tm = evaluate_trial(&set, &r, &x, margin_power(&x));
            let min = tm.sinr.iter().flatten().copied().fold(f64::INFINITY, f64::min);
            assert_eq!(tm.outage, min < p.theta);
            assert!(tm.throughput >= 0.0);
        }
    }

    fn fake_trial(throughput: f64, outage: bool, powers: [f64; 2]) -> TrialMetrics {
        TrialMetrics {
            sinr: [vec![1.0], vec![1.0]],
            throughput,
            outage,
            interference: [vec![0.0], vec![0.0]],
            decision: PowerDecision {
                powers,
                scheme: PowerScheme::Margin,
                feasible: true,
                iterations: 0,
            },
            epsilon: [0.1, 0.3],
            achievable: throughput,
        }
    }

    #[test]
    fn single_trial_aggregate() {
        let t = fake_trial(7.5, false, [10.0, 30.0]);
        let a = aggregate(std::slice::from_ref(&t)).unwrap();
        assert_eq!(a.trials, 1);
        assert_eq!(a.throughput, 7.5);
        assert_eq!(a.throughput_stderr, 0.0);
        assert_eq!(a.outage, 0.0);
        assert!((a.avg_tx_snr_db - 13.010299956639813).abs() < 1e-12);
        assert!((a.mean_epsilon - 0.2).abs() < 1e-15);
        assert_eq!(a.feasibility_rate, None);
    }

    #[test]
    fn all_outage_gives_probability_one() {
        let trials: Vec<_> = (0..20).map(|i| fake_trial(i as f64, true, [1.0, 1.0])).collect();
        let a = aggregate(&trials).unwrap();
        assert_eq!(a.outage, 1.0);
        assert_eq!(a.outage_hi, 1.0);
        assert!(a.outage_lo > 0.8 && a.outage_lo < 1.0);
    }

    #[test]
    fn empty_aggregate_is_an_error() {
        assert!(matches!(aggregate(&[]), Err(Error::EmptyAggregate)));
    }

    #[test]
    fn aggregate_is_permutation_and_partition_invariant() {
        let trials: Vec<_> = (0..101)
            .map(|i| fake_trial((i * 37 % 17) as f64 * 0.7, i % 3 == 0, [i as f64, 2.0]))
            .collect();
        let a = aggregate(&trials).unwrap();
        let mut rev = trials.clone();
        rev.reverse();
        let b = aggregate(&rev).unwrap();
        let mut left = PointAccumulator::default();
        let mut right = PointAccumulator::default();
        for (i, t) in trials.iter().enumerate() {
            if i % 2 == 0 { left.push(t) } else { right.push(t) }
        }
        left.merge(&right);
        let c = left.finish().unwrap();
        for other in [b, c] {
            assert_eq!(a.trials, other.trials);
            assert_eq!(a.outage, other.outage);
            assert!((a.throughput - other.throughput).abs() < 1e-12);
            assert!((a.throughput_stderr - other.throughput_stderr).abs() < 1e-12);
            assert!((a.avg_tx_snr_db - other.avg_tx_snr_db).abs() < 1e-12);
        }
    }

    #[test]
    fn wilson_interval_contains_estimate() {
        let (lo, hi) = wilson_interval(10, 100, WILSON_Z);
        assert!(lo < 0.1 && 0.1 < hi);
        // Reference values for k=10, n=100.
        assert!((lo - 0.05522854).abs() < 1e-6, "{lo}");
        assert!((hi - 0.17436566).abs() < 1e-6, "{hi}");
        assert_eq!(wilson_interval(0, 50, WILSON_Z).0, 0.0);
    }

    #[test]
    fn asymptote_behaviour_in_tau_and_theta() {
        let p = SystemParams {
            tau_mode: TauMode::Fixed(2.0),
            ..Default::default()
        };
        let cb = generate_codebook(&p, 11).unwrap();
        let tiny = estimate_asymptotes(&p, &cb, 1e-12, 1.0, 500, 3).unwrap();
        assert!(tiny.throughput < 1e-6);
        let t1 = estimate_asymptotes(&p, &cb, 1.0, 1.0, 500, 3).unwrap();
        let t10 = estimate_asymptotes(&p, &cb, 10.0, 1.0, 500, 3).unwrap();
        assert!(t10.throughput >= t1.throughput);
        assert!(t10.outage_bound <= t1.outage_bound);

        assert_eq!(estimate_asymptotes(&p, &cb, 2.0, 1e-300, 500, 3).unwrap().outage_bound, 0.0);
        let huge = estimate_asymptotes(&p, &cb, 2.0, 1e300, 500, 3).unwrap();
        assert_eq!(huge.outage_bound, 2.0);
        assert_eq!(huge.outage_probability_bound(), 1.0);

        let l2 = lemma2_asymptote(&p, &cb, 500, 3).unwrap();
        assert_eq!(l2, estimate_asymptotes(&p, &cb, 2.0, p.theta, 500, 3).unwrap().throughput);
        let l3 = lemma3_asymptote(&p, &cb, 0.5, 500, 3).unwrap();
        assert_eq!(l3, estimate_asymptotes(&p, &cb, 2.0, 0.5, 500, 3).unwrap().outage_bound);
    }
}
