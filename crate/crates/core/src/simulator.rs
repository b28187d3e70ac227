//! Reproducible Monte Carlo sweeps over the `P_max` grid.
//!
//! At each grid point every scheme sees the same channel realizations and
//! codebooks (paired trials). Trials run on a rayon pool and are folded in
//! trial order afterwards, so results do not depend on the worker count.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::channel::{derive_seed, sample_realization, SystemParams, TauMode};
use crate::error::{Error, Result};
use crate::ipc::{algorithm1, algorithm2, margin_power, Alg1Options, Alg2Fallback, IpcInputs, PowerDecision};
use crate::metrics::{evaluate_trial, PointAccumulator, SweepPoint, TrialMetrics};
use crate::precoding::{assemble, AssembleOptions, FeedbackMode};
use crate::quantization::{generate_codebook, Codebook};

const CODEBOOK_TAG: u64 = 0xC0DE_B00C;
const TRIAL_CODEBOOK_TAG: u64 = 0x7C0D_EB00;

/// A power-control scheme as it appears in a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// Interference margin with a constant τ.
    MarginFixed { tau: f64 },
    /// Interference margin with τ = `coeff` · P_max.
    MarginProportional { coeff: f64 },
    Algorithm1,
    Algorithm2,
    /// Unquantized inner precoders at full power.
    PerfectFeedback,
    /// Quantized inner precoders at full power, no IPC.
    FullPower,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::MarginFixed { .. } => "margin-fixed",
            Scheme::MarginProportional { .. } => "margin-proportional",
            Scheme::Algorithm1 => "algorithm1",
            Scheme::Algorithm2 => "algorithm2",
            Scheme::PerfectFeedback => "perfect-feedback",
            Scheme::FullPower => "full-power",
        }
    }

    pub fn feedback(&self) -> FeedbackMode {
        match self {
            Scheme::PerfectFeedback => FeedbackMode::Perfect,
            _ => FeedbackMode::Quantized,
        }
    }

    /// The margin τ this scheme uses at the given `P_max`, if any.
    pub fn tau(&self, p_max: f64) -> Option<f64> {
        match *self {
            Scheme::MarginFixed { tau } => Some(TauMode::Fixed(tau).tau(p_max)),
            Scheme::MarginProportional { coeff } => Some(TauMode::Proportional(coeff).tau(p_max)),
            _ => None,
        }
    }

    /// Parses a scheme name, filling margin parameters from the defaults.
    pub fn parse_with(name: &str, fixed_tau: f64, proportional_coeff: f64) -> Result<Self> {
        Ok(match name.trim() {
            "margin-fixed" => Scheme::MarginFixed { tau: fixed_tau },
            "margin-proportional" => Scheme::MarginProportional {
                coeff: proportional_coeff,
            },
            "algorithm1" => Scheme::Algorithm1,
            "algorithm2" => Scheme::Algorithm2,
            "perfect-feedback" => Scheme::PerfectFeedback,
            "full-power" => Scheme::FullPower,
            other => return Err(Error::invalid(format!("unknown scheme '{other}'"))),
        })
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    /// Default margins: τ = 2 fixed, τ = 0.4 · P_max proportional.
    fn from_str(s: &str) -> Result<Self> {
        Scheme::parse_with(s, 2.0, 0.4)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// `p_max` and `tau_mode` are overridden per point and scheme.
    pub params: SystemParams,
    pub p_max_grid_db: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub trials_per_point: u64,
    pub master_seed: u64,
    /// Worker threads; 0 uses the global rayon pool.
    pub workers: usize,
    pub alg1: Alg1Options,
    pub alg2_fallback: Alg2Fallback,
    /// Draw fresh codebooks every trial instead of one pair per sweep.
    pub per_trial_codebook: bool,
    /// Use these codebooks instead of generating them from the seed.
    pub codebooks: Option<[Codebook; 2]>,
    pub outer_from_true_inner: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            params: SystemParams::default(),
            p_max_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            schemes: vec![
                Scheme::MarginFixed { tau: 2.0 },
                Scheme::MarginProportional { coeff: 0.4 },
                Scheme::Algorithm1,
                Scheme::PerfectFeedback,
            ],
            trials_per_point: 10_000,
            master_seed: 1,
            workers: 0,
            alg1: Alg1Options::default(),
            alg2_fallback: Alg2Fallback::default(),
            per_trial_codebook: false,
            codebooks: None,
            outer_from_true_inner: false,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p_max_grid_db.is_empty() {
            return Err(Error::invalid("the P_max grid is empty"));
        }
        if let Some(x) = self.p_max_grid_db.iter().find(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("P_max grid entry {x} is not finite")));
        }
        if self.schemes.is_empty() {
            return Err(Error::invalid("no schemes selected"));
        }
        if self.trials_per_point == 0 {
            return Err(Error::invalid("trials per point must be at least 1"));
        }
        for s in &self.schemes {
            let bad = match *s {
                Scheme::MarginFixed { tau } => !(tau > 0.0 && tau.is_finite()),
                Scheme::MarginProportional { coeff } => !(coeff > 0.0 && coeff.is_finite()),
                _ => false,
            };
            if bad {
                return Err(Error::invalid(format!("{s}: the margin must be positive")));
            }
        }
        for &db in &self.p_max_grid_db {
            self.params.with_p_max(db_to_linear(db)).validate()?;
        }
        if let Some(cbs) = &self.codebooks {
            if self.per_trial_codebook {
                return Err(Error::invalid("per-trial codebooks cannot be combined with imported codebooks"));
            }
            for (link, cb) in cbs.iter().enumerate() {
                let p = &self.params;
                if cb.rows() != p.l_antennas || cb.cols() != p.m_streams || cb.b_bits() != p.b_bits {
                    return Err(Error::invalid(format!(
                        "codebook of link {link} is {}x{} with {} bits, expected {}x{} with {} bits",
                        cb.rows(),
                        cb.cols(),
                        cb.b_bits(),
                        p.l_antennas,
                        p.m_streams,
                        p.b_bits
                    )));
                }
            }
        }
        Ok(())
    }

    /// Seed of grid point `point`; trial `t` there uses stream `t` of it.
    pub fn point_seed(&self, point: usize) -> u64 {
        derive_seed(self.master_seed, point as u64)
    }

    /// The codebook pair shared by every trial of the sweep.
    pub fn shared_codebooks(&self) -> Result<[Codebook; 2]> {
        if let Some(cbs) = &self.codebooks {
            return Ok(cbs.clone());
        }
        Ok([
            generate_codebook(&self.params, derive_seed(self.master_seed, CODEBOOK_TAG))?,
            generate_codebook(&self.params, derive_seed(self.master_seed, CODEBOOK_TAG + 1))?,
        ])
    }

    fn trial_codebooks(&self, point_seed: u64, trial: u64) -> Result<[Codebook; 2]> {
        let base = derive_seed(derive_seed(point_seed, TRIAL_CODEBOOK_TAG), trial);
        Ok([
            generate_codebook(&self.params, derive_seed(base, 0))?,
            generate_codebook(&self.params, derive_seed(base, 1))?,
        ])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub p_max_db: f64,
    pub point: SweepPoint,
}

/// Rows ordered by scheme (in spec order), then by grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub master_seed: u64,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn row(&self, scheme: &str, p_max_db: f64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.scheme.name() == scheme && r.p_max_db == p_max_db)
    }

    /// The points of one scheme across the grid.
    pub fn curve(&self, scheme: &str) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.scheme.name() == scheme).collect()
    }
}

/// Runs every scheme on trial `trial` of grid point `point`.
pub fn run_trial(spec: &SweepSpec, shared: &[Codebook; 2], point: usize, trial: u64) -> Result<Vec<TrialMetrics>> {
    let point_seed = spec.point_seed(point);
    run_trial_inner(spec, shared, point, trial).map_err(|e| Error::Trial {
        seed: point_seed,
        trial,
        source: Box::new(e),
    })
}

fn run_trial_inner(spec: &SweepSpec, shared: &[Codebook; 2], point: usize, trial: u64) -> Result<Vec<TrialMetrics>> {
    let point_seed = spec.point_seed(point);
    let p_max = db_to_linear(spec.p_max_grid_db[point]);
    let params = spec.params.with_p_max(p_max);
    let realization = sample_realization(&params, point_seed, trial);

    let owned;
    let codebooks = if spec.per_trial_codebook {
        owned = spec.trial_codebooks(point_seed, trial)?;
        &owned
    } else {
        shared
    };

    let design = |feedback| {
        let opts = AssembleOptions {
            feedback,
            outer_from_true_inner: spec.outer_from_true_inner,
        };
        assemble(&realization, codebooks, &params, opts)
    };
    let needs = |mode: FeedbackMode| spec.schemes.iter().any(|s| s.feedback() == mode);
    let quantized = needs(FeedbackMode::Quantized).then(|| design(FeedbackMode::Quantized)).transpose()?;
    let perfect = needs(FeedbackMode::Perfect).then(|| design(FeedbackMode::Perfect)).transpose()?;

    spec.schemes
        .iter()
        .map(|scheme| {
            let set = match scheme.feedback() {
                FeedbackMode::Quantized => quantized.as_ref(),
                FeedbackMode::Perfect => perfect.as_ref(),
            }
            .expect("designed above");
            let mut inputs = IpcInputs::from_precoders(set, &params);
            if let Some(tau) = scheme.tau(p_max) {
                inputs.tau = tau;
            }
            let decision = match scheme {
                Scheme::MarginFixed { .. } | Scheme::MarginProportional { .. } => margin_power(&inputs),
                Scheme::Algorithm1 => algorithm1(&inputs, &spec.alg1),
                Scheme::Algorithm2 => algorithm2(&inputs, spec.alg2_fallback),
                Scheme::PerfectFeedback | Scheme::FullPower => PowerDecision::full_power(p_max),
            };
            let metrics = evaluate_trial(set, &realization, &inputs, decision);
            if !metrics.throughput.is_finite() {
                return Err(Error::invalid(format!("{scheme}: non-finite throughput")));
            }
            Ok(metrics)
        })
        .collect()
}

/// Runs all trials of one grid point and aggregates them per scheme.
pub fn run_point(spec: &SweepSpec, shared: &[Codebook; 2], point: usize) -> Result<Vec<SweepPoint>> {
    let per_trial: Vec<Result<Vec<TrialMetrics>>> = (0..spec.trials_per_point)
        .into_par_iter()
        .map(|t| run_trial(spec, shared, point, t))
        .collect();
    let mut acc = vec![PointAccumulator::default(); spec.schemes.len()];
    for trial in per_trial {
        for (a, m) in acc.iter_mut().zip(trial?) {
            a.push(&m);
        }
    }
    acc.iter().map(PointAccumulator::finish).collect()
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let shared = spec.shared_codebooks()?;
    let per_point = with_workers(spec.workers, || {
        (0..spec.p_max_grid_db.len())
            .map(|p| run_point(spec, &shared, p))
            .collect::<Result<Vec<_>>>()
    })??;

    let mut rows = Vec::with_capacity(spec.schemes.len() * spec.p_max_grid_db.len());
    for (s, scheme) in spec.schemes.iter().enumerate() {
        for (p, &db) in spec.p_max_grid_db.iter().enumerate() {
            rows.push(SweepRow {
                scheme: *scheme,
                p_max_db: db,
                point: per_point[p][s].clone(),
            });
        }
    }
    Ok(SweepResult {
        master_seed: spec.master_seed,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub n_inner: usize,
    pub row: SweepRow,
}

/// Repeats the sweep for each inner width `N`.
pub fn scan_n(spec: &SweepSpec, n_values: &[usize]) -> Result<Vec<ScanRow>> {
    if n_values.is_empty() {
        return Err(Error::invalid("no N values to scan"));
    }
    let (l, m) = (spec.params.l_antennas, spec.params.m_streams);
    for &n in n_values {
        if n < m || n + m > l {
            return Err(Error::invalid(format!("N={n} is outside [M, L-M] = [{m}, {}]", l.saturating_sub(m))));
        }
    }
    let mut out = Vec::new();
    for &n in n_values {
        let mut s = spec.clone();
        s.params.n_inner = n;
        for row in run_sweep(&s)?.rows {
            out.push(ScanRow { n_inner: n, row });
        }
    }
    Ok(out)
}
