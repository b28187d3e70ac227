use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str =
    "scheme,p_max_db,throughput,throughput_stderr,outage,outage_lo,outage_hi,avg_tx_snr_db,mean_epsilon,feasibility_rate,trials,seed";

fn coopfb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coopfb"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn sweep_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig.csv");
    let o = coopfb(&[
        "sweep",
        "--trials",
        "20",
        "--sweep.p_max_db=0,10",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], HEADER);
    // Four default schemes, two grid points.
    assert_eq!(lines.len(), 9);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 12));

    let sidecar = std::fs::read_to_string(dir.path().join("fig.csv.config")).unwrap();
    assert!(sidecar.contains("trials = 20"));
    assert!(sidecar.contains("p_max_db = [0.0, 10.0]"));
}

#[test]
fn sidecar_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let o = coopfb(&[
        "sweep",
        "--trials",
        "5",
        "--seed",
        "11",
        "--system.nu=0.05",
        "--ipc.scheme=algorithm2,margin-fixed",
        "--sweep.p_max_db=20",
        "--output",
        a.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let side = dir.path().join("a.csv.config");
    let o = coopfb(&["sweep", "--config", side.to_str().unwrap(), "--output", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn repeated_runs_are_byte_identical_across_workers() {
    let base = ["sweep", "--trials", "1", "--seed", "7"];
    let first = coopfb(&base);
    let second = coopfb(&base);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);

    let one = coopfb(&["sweep", "--trials", "30", "--workers", "1", "--sweep.p_max_db=10,30"]);
    let many = coopfb(&["sweep", "--trials", "30", "--workers", "4", "--sweep.p_max_db=10,30"]);
    assert_eq!(stdout(&one), stdout(&many));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[system]\nnu = 0.05\ntheta = 1.5\n\n[sweep]\np_max_db = [30]\ntrials = 10\n\n[ipc]\nscheme = [\"algorithm2\"]\n",
    )
    .unwrap();
    let o = coopfb(&["sweep", "--config", cfg.to_str().unwrap(), "--sweep.trials=4"]);
    assert!(o.status.success());
    let csv = stdout(&o);
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "algorithm2");
    assert!(!row[9].is_empty(), "feasibility rate is reported for algorithm 2");
    assert_eq!(row[10], "4");
}

#[test]
fn config_errors_exit_with_two_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    let out_s = out.to_str().unwrap();
    for args in [
        vec!["sweep", "--system.bogus=1", "--output", out_s],
        vec!["sweep", "--system.n=5", "--output", out_s],
        vec!["sweep", "--system.nu=0", "--output", out_s],
        vec!["sweep", "--system.l=3", "--output", out_s],
        vec!["sweep", "--system.b=0", "--output", out_s],
        vec!["sweep", "--ipc.scheme=nope", "--output", out_s],
        vec!["sweep", "--system.nu", "--output", out_s],
        vec!["sweep", "--config", "/nonexistent/run.toml"],
        vec!["frobnicate"],
    ] {
        let o = coopfb(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
    }
    assert!(!Path::new(&out).exists());
}

#[test]
fn validate_passes_on_stock_config() {
    let o = coopfb(&["validate", "--validate.trials=500", "--points", "200"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report = stdout(&o);
    for check in ["lemma1", "gradient", "alg2", "decoupling"] {
        assert!(report.contains(&format!("PASS {check}")), "{report}");
    }
}

#[test]
fn gradient_check_prints_max_error() {
    let o = coopfb(&["validate", "--check", "gradient", "--points", "1000"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("max relative error"));
}

#[test]
fn injected_fault_fails_lemma1() {
    let o = coopfb(&["validate", "--check", "lemma1", "--inject-fault", "skip-quantization"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL lemma1"));
}

#[test]
fn asymptote_table_has_a_comparison_per_tau() {
    let o = coopfb(&[
        "asymptote",
        "--trials",
        "50",
        "--asymptote.trials=400",
        "--asymptote.tau=1,2,5,10,1e6",
    ]);
    assert!(o.status.success());
    let csv = stdout(&o);
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    for w in rows.windows(2) {
        assert!(w[1][1] >= w[0][1], "asymptote column is nondecreasing in tau");
    }
    assert!(rows.iter().all(|r| r[5].is_finite() && r[7].is_finite()));
}

#[test]
fn scan_n_covers_every_value() {
    let o = coopfb(&["scan-n", "--trials", "5", "--sweep.p_max_db=10", "--ipc.scheme=perfect-feedback"]);
    assert!(o.status.success());
    let ns: Vec<String> = stdout(&o).lines().skip(1).map(|l| l.split(',').next().unwrap().to_string()).collect();
    assert_eq!(ns, ["2", "3", "4"]);
}

#[test]
fn codebook_export_import_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cb0 = dir.path().join("cb0.txt");
    let cb1 = dir.path().join("cb1.txt");
    for (link, path) in [("0", &cb0), ("1", &cb1)] {
        let o = coopfb(&["codebook", "--link", link, "--output", path.to_str().unwrap()]);
        assert!(o.status.success());
    }
    assert!(std::fs::read_to_string(&cb0).unwrap().starts_with("coopfb-codebook v1"));

    let args = ["sweep", "--trials", "6", "--sweep.p_max_db=20"];
    let generated = coopfb(&args);
    let imported_arg = format!("--quantization.codebooks={},{}", cb0.display(), cb1.display());
    let imported = coopfb(&[&args[..], &[imported_arg.as_str()]].concat());
    assert!(imported.status.success(), "{}", String::from_utf8_lossy(&imported.stderr));
    assert_eq!(generated.stdout, imported.stdout);

    let swapped_arg = format!("--quantization.codebooks={},{}", cb1.display(), cb0.display());
    let swapped = coopfb(&[&args[..], &[swapped_arg.as_str()]].concat());
    assert_ne!(generated.stdout, swapped.stdout);

    let o = coopfb(&["sweep", "--system.b=3", &imported_arg]);
    assert_eq!(o.status.code(), Some(2));
}
