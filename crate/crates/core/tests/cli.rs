use std::path::PathBuf;
use std::process::{Command, Output};

fn cellgeom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellgeom"))
        .args(args)
        .env_remove("CELLGEOM_SEED")
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

fn text(b: &[u8]) -> String {
    String::from_utf8(b.to_vec()).unwrap()
}

#[test]
fn ccdf_with_both_engines_is_byte_identical() {
    let args = [
        "ccdf", "--lambda", "100", "--los", "quadexp", "--L", "82.5m", "--engine", "both", "--seed", "7", "--trials", "5000",
    ];
    let a = cellgeom(&args);
    let b = cellgeom(&args);
    assert!(a.status.success(), "{}", text(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let out = text(&a.stdout);
    let rows = data_rows(&out);
    assert_eq!(rows[0], "threshold_db,analytic_ccdf,mc_ccdf,mc_ci");
    assert_eq!(rows.len(), 102);
    assert!(!out.contains('\r'));
    assert!(out.contains("# seed=7\n"));
    assert!(out.contains("# L=82.5m\n"));
}

#[test]
fn three_gpp_analytic_curve() {
    let o = cellgeom(&["ccdf", "--los", "3gpp", "--engine", "analytic", "--thresholds", "-10,0,10"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let out = text(&o.stdout);
    assert!(out.contains("3gpp(d0=156m,d1=30m)"));
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 4);
    let c: Vec<f64> = rows[1..].iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(c[0] > c[1] && c[1] > c[2]);
}

#[test]
fn invalid_density_exits_with_usage_code() {
    let o = cellgeom(&["ccdf", "--lambda", "-5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("lambda must be positive"));
    assert!(o.stdout.is_empty());
}

#[test]
fn malformed_metric_token_is_echoed() {
    let o = cellgeom(&["sweep", "--metrics", "se,outage@-5dbm"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("outage@-5dbm"));
}

#[test]
fn density_sweep_has_one_row_per_value() {
    let o = cellgeom(&["sweep", "--var", "lambda", "--values", "1:10000:log17", "--metrics", "se,ase,outage@-5dB"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let out = text(&o.stdout);
    let rows = data_rows(&out);
    assert_eq!(rows[0], "lambda,se,ase,outage@-5dB");
    assert_eq!(rows.len(), 18);
    for r in &rows[1..] {
        let v: Vec<f64> = r.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[2] - v[0] * v[1]).abs() <= 1e-12 * v[2]);
    }
    assert!(out.contains("# content_sha256: "));
}

#[test]
fn length_scale_sweep_has_one_series_per_value() {
    let csv = scratch("outage_l.csv");
    let plot = scratch("outage_l.gp");
    let o = cellgeom(&[
        "sweep",
        "--var",
        "L",
        "--values",
        "40m,82.5m,120m",
        "--metrics",
        "outage@-10dB",
        "--output",
        csv.to_str().unwrap(),
        "--plot",
        plot.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert!(o.stdout.is_empty());
    let out = std::fs::read_to_string(&csv).unwrap();
    let rows = data_rows(&out);
    assert_eq!(rows[0], "lambda,outage@-10dB[L=40m],outage@-10dB[L=82.5m],outage@-10dB[L=120m]");
    assert_eq!(rows.len(), 18);
    let script = std::fs::read_to_string(&plot).unwrap();
    assert!(script.contains(csv.to_str().unwrap()));
    assert_eq!(script.matches("using 1:").count(), 3);
}

#[test]
fn plot_without_output_is_rejected() {
    let o = cellgeom(&["sweep", "--metrics", "ccdf", "--values", "10", "--plot", "x.gp"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn partial_failures_exit_one_and_are_reported() {
    // a single trial cannot give a standard error
    let o = cellgeom(&["sweep", "--engine", "montecarlo", "--trials", "1", "--values", "10,100", "--metrics", "se"]);
    assert_eq!(o.status.code(), Some(1));
    let out = text(&o.stdout);
    assert_eq!(out.lines().filter(|l| l.starts_with("# failed:")).count(), 2);
    assert!(text(&o.stderr).contains("cell failed"));
}

#[test]
fn losprob_table() {
    let o = cellgeom(&["losprob"]);
    assert!(o.status.success());
    let out = text(&o.stdout);
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 502);
    assert!(out.contains("within one step: true"));
    let last: Vec<f64> = rows[501].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[0], 500.0);
    assert_eq!(cellgeom(&["losprob"]).stdout, o.stdout);
    let o = cellgeom(&["losprob", "--models", "quadexp,always", "--dmax", "0.1km", "--step", "10"]);
    assert_eq!(data_rows(&text(&o.stdout)).len(), 12);
}

#[test]
fn config_file_and_flag_precedence() {
    let cfg = scratch("net.cfg");
    std::fs::write(&cfg, "# deployment\nlambda = 1000\nlos = always\nthresholds = 0\n").unwrap();
    let from_file = cellgeom(&["ccdf", "--config", cfg.to_str().unwrap()]);
    assert!(from_file.status.success(), "{}", text(&from_file.stderr));
    let out = text(&from_file.stdout);
    assert!(out.contains("# lambda=1000\n") && out.contains("# los=always\n"));

    let overridden = cellgeom(&["ccdf", "--config", cfg.to_str().unwrap(), "--lambda", "10"]);
    let out2 = text(&overridden.stdout);
    assert!(out2.contains("# lambda=10\n"));
    // single slope: the coverage itself does not move with density
    let last = |s: &str| data_rows(s)[1].to_string();
    let (a, b): (f64, f64) = (
        last(&out).split(',').nth(1).unwrap().parse().unwrap(),
        last(&out2).split(',').nth(1).unwrap().parse().unwrap(),
    );
    assert!((a - b).abs() < 1e-4);

    std::fs::write(&cfg, "lambda=10\ncolour=blue\n").unwrap();
    let bad = cellgeom(&["ccdf", "--config", cfg.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(text(&bad.stderr).contains("unknown key 'colour'"));
}

#[test]
fn seed_environment_fallback() {
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_cellgeom"));
        c.args(["ccdf", "--engine", "montecarlo", "--trials", "500", "--thresholds", "0"]).args(extra);
        match env {
            Some(v) => c.env("CELLGEOM_SEED", v),
            None => c.env_remove("CELLGEOM_SEED"),
        };
        c.output().unwrap()
    };
    let a = run(Some("42"), &[]);
    let b = run(None, &["--seed", "42"]);
    let c = run(Some("42"), &["--seed", "43"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    assert_eq!(run(Some("x"), &[]).status.code(), Some(2));
}

#[test]
fn timestamp_is_opt_in() {
    let plain = text(&cellgeom(&["losprob", "--dmax", "10"]).stdout);
    assert!(!plain.contains("timestamp"));
    let stamped = text(&cellgeom(&["losprob", "--dmax", "10", "--timestamp"]).stdout);
    assert!(stamped.contains("# timestamp: unix:"));
}
