//! CSV rendering of sweep, scan and asymptote results.
//!
//! Floats use Rust's shortest round-trip formatting, so equal results always
//! render to equal bytes.

use std::fmt::Write as _;

use crate::metrics::SweepPoint;
use crate::simulator::{ScanRow, SweepResult, SweepRow};

pub const SWEEP_HEADER: &str = "scheme,p_max_db,throughput,throughput_stderr,outage,outage_lo,outage_hi,\
avg_tx_snr_db,mean_epsilon,feasibility_rate,trials,seed";

pub const ASYMPTOTE_HEADER: &str = "tau,asymptote_throughput,asymptote_stderr,outage_bound,\
p_max_db,simulated_throughput,simulated_stderr,simulated_achievable,simulated_achievable_stderr,\
simulated_outage,trials,seed";

/// Which throughput the `throughput` columns carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThroughputColumn {
    /// Mean of the per-trial `Σ log2(1 + SINR)`.
    #[default]
    Ergodic,
    /// Mean of each scheme's analytic lower bound.
    Achievable,
}

impl ThroughputColumn {
    fn pick(self, p: &SweepPoint) -> (f64, f64) {
        match self {
            ThroughputColumn::Ergodic => (p.throughput, p.throughput_stderr),
            ThroughputColumn::Achievable => (p.mean_achievable, p.achievable_stderr),
        }
    }
}

fn sweep_fields(out: &mut String, row: &SweepRow, seed: u64, column: ThroughputColumn) {
    let p = &row.point;
    let (thr, se) = column.pick(p);
    let feas = p.feasibility_rate.map(|f| f.to_string()).unwrap_or_default();
    let _ = write!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        row.scheme.name(),
        row.p_max_db,
        thr,
        se,
        p.outage,
        p.outage_lo,
        p.outage_hi,
        p.avg_tx_snr_db,
        p.mean_epsilon,
        feas,
        p.trials,
        seed
    );
}

pub fn sweep_csv(result: &SweepResult, column: ThroughputColumn) -> String {
    let mut out = String::with_capacity(128 * (result.rows.len() + 1));
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for row in &result.rows {
        sweep_fields(&mut out, row, result.master_seed, column);
        out.push('\n');
    }
    out
}

/// The sweep columns prefixed by `n`.
pub fn scan_csv(rows: &[ScanRow], seed: u64, column: ThroughputColumn) -> String {
    let mut out = String::from("n,");
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},", r.n_inner);
        sweep_fields(&mut out, &r.row, seed, column);
        out.push('\n');
    }
    out
}

/// One line of the asymptote table: the large-`P_max` estimate at `tau`
/// next to the margin scheme simulated at the top grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoteRow {
    pub tau: f64,
    pub asymptote: f64,
    pub asymptote_stderr: f64,
    /// Outage upper bound, capped at one.
    pub outage_bound: f64,
    pub p_max_db: f64,
    pub simulated: SweepPoint,
}

pub fn asymptote_csv(rows: &[AsymptoteRow], seed: u64) -> String {
    let mut out = String::from(ASYMPTOTE_HEADER);
    out.push('\n');
    for r in rows {
        let s = &r.simulated;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.tau,
            r.asymptote,
            r.asymptote_stderr,
            r.outage_bound,
            r.p_max_db,
            s.throughput,
            s.throughput_stderr,
            s.mean_achievable,
            s.achievable_stderr,
            s.outage,
            s.trials,
            seed
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::Scheme;

    fn point(feas: Option<f64>) -> SweepPoint {
        SweepPoint {
            trials: 10,
            throughput: 12.5,
            throughput_stderr: 0.25,
            outage: 0.1,
            outage_lo: 0.05,
            outage_hi: 0.2,
            mean_tx_power: 10.0,
            tx_power_stderr: 1.0,
            avg_tx_snr_db: 10.0,
            mean_epsilon: 0.375,
            mean_achievable: 9.0,
            achievable_stderr: 0.5,
            feasibility_rate: feas,
            mean_iterations: None,
        }
    }

    #[test]
    fn header_has_twelve_fixed_columns() {
        let cols: Vec<&str> = SWEEP_HEADER.split(',').collect();
        assert_eq!(cols.len(), 12);
        assert_eq!(cols[0], "scheme");
        assert_eq!(cols[9], "feasibility_rate");
        assert_eq!(cols[11], "seed");
        assert_eq!(ASYMPTOTE_HEADER.split(',').count(), 12);
    }

    #[test]
    fn rows_render_with_empty_feasibility_outside_algorithm2() {
        let result = SweepResult {
            master_seed: 7,
            rows: vec![
                SweepRow {
                    scheme: Scheme::MarginFixed { tau: 2.0 },
                    p_max_db: 30.0,
                    point: point(None),
                },
                SweepRow {
                    scheme: Scheme::Algorithm2,
                    p_max_db: 30.0,
                    point: point(Some(0.75)),
                },
            ],
        };
        let csv = sweep_csv(&result, ThroughputColumn::Ergodic);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SWEEP_HEADER);
        assert_eq!(lines[1], "margin-fixed,30,12.5,0.25,0.1,0.05,0.2,10,0.375,,10,7");
        assert_eq!(lines[2], "algorithm2,30,12.5,0.25,0.1,0.05,0.2,10,0.375,0.75,10,7");
        let ach = sweep_csv(&result, ThroughputColumn::Achievable);
        assert!(ach.lines().nth(1).unwrap().starts_with("margin-fixed,30,9,0.5,"));
    }

    #[test]
    fn scan_and_asymptote_tables() {
        let row = SweepRow {
            scheme: Scheme::PerfectFeedback,
            p_max_db: 10.0,
            point: point(None),
        };
        let csv = scan_csv(&[ScanRow { n_inner: 3, row }], 1, ThroughputColumn::Ergodic);
        assert!(csv.starts_with("n,scheme,"));
        assert!(csv.lines().nth(1).unwrap().starts_with("3,perfect-feedback,10,"));

        let a = asymptote_csv(
            &[AsymptoteRow {
                tau: 2.0,
                asymptote: 8.5,
                asymptote_stderr: 0.1,
                outage_bound: 1.0,
                p_max_db: 30.0,
                simulated: point(None),
            }],
            3,
        );
        assert_eq!(a.lines().nth(1).unwrap(), "2,8.5,0.1,1,30,12.5,0.25,9,0.5,0.1,10,3");
    }
}
