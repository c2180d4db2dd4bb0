use std::fs;
use std::process::{Command, Output};

fn gravdec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gravdec")).args(args).env_remove("GRAVDEC_WORKERS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn region_examples() {
    let o = gravdec(&["region", "--lc", "1", "--mass", "0.5mc", "--sigma", "30sb"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("region: RegionII"));
    assert!(text.contains("t_F = 1144.12"), "{text}");
    assert!(text.contains("[planck]"));

    let o = gravdec(&["region", "--lc", "1", "--mass", "1.5mc", "--sigma", "30sb"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("BeyondCut"));

    let o = gravdec(&["region", "--lc", "1", "--mass", "1mc", "--sigma", "-1lp"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn purity_anchor_and_determinism() {
    let args = ["purity", "--lc", "1", "--mass", "1mc", "--sigma", "30sb", "--seed", "7"];
    let a = gravdec(&args);
    assert_eq!(a.status.code(), Some(0));
    let text = stdout(&a);
    let eta: f64 = text.split("eta = ").nth(1).unwrap().split(' ').next().unwrap().parse().unwrap();
    assert!((eta - 0.78).abs() <= 0.03, "{text}");
    let b = gravdec(&[&args[..], &["--workers", "2"]].concat());
    assert_eq!(a.stdout, b.stdout);

    let o = gravdec(&["purity", "--mass", "1mc", "--sigma", "30sb", "--t", "0"]);
    assert!(stdout(&o).contains("eta = 1 ± 0"));
}

#[test]
fn purity_refusals_and_shortfall() {
    let o = gravdec(&["purity", "--mass", "0.5mc", "--sigma", "2sb", "--t", "1e9"]);
    assert_eq!(o.status.code(), Some(3));
    let o = gravdec(&["purity", "--mass", "0.5mc", "--sigma", "0.9sb"]);
    assert_eq!(o.status.code(), Some(3));
    let o = gravdec(&["purity", "--mass", "0.5mc", "--sigma", "0.9sb", "--t", "10", "--force", "--samples", "1000"]);
    assert_eq!(o.status.code(), Some(0));
    let o = gravdec(&["purity", "--mass", "0.5mc", "--sigma", "30sb", "--target-se", "1e-9", "--n-cap", "4096"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn purity_csv_appends_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("p.csv");
    let c = csv.to_str().unwrap();
    for t in ["100", "200"] {
        let o = gravdec(&["purity", "--mass", "0.5mc", "--sigma", "30sb", "--t", t, "--samples", "4096", "--csv", c]);
        assert_eq!(o.status.code(), Some(0));
    }
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t_planck,t_over_tF,eta,eta_se,n_samples");
    assert_eq!(lines.len(), 3);
}

#[test]
fn figure_time_two_curves_and_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = gravdec(&[
        "figure", "purity-time", "--sigma", "30sb,60sb", "--grid", "0.25,0.5,1", "--samples", "65536", "--out", out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let a = fs::read_to_string(dir.path().join("purity_time_lc1_mu0p5_sigma30sb.csv")).unwrap();
    let b = fs::read_to_string(dir.path().join("purity_time_lc1_mu0p5_sigma60sb.csv")).unwrap();
    assert!(a.starts_with("t_planck,t_over_tF,eta,eta_se,n_samples\n"));
    // Absolute time to a common purity: the narrower packet gets there first.
    let last_t = |s: &str| -> f64 { s.lines().last().unwrap().split(',').next().unwrap().parse().unwrap() };
    assert!(last_t(&a) < last_t(&b));

    let manifest = dir.path().join("purity_time.manifest");
    let text = fs::read_to_string(&manifest).unwrap();
    assert!(text.contains("figure=purity_time\n"));
    let o = gravdec(&["rerun", manifest.to_str().unwrap(), "--out", dir.path().join("again").to_str().unwrap(), "--workers", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("eta identical"));
    assert_eq!(fs::read(dir.path().join("again/purity_time_lc1_mu0p5_sigma30sb.csv")).unwrap(), a.as_bytes());
}

#[test]
fn figure_region_map_power_law() {
    let dir = tempfile::tempdir().unwrap();
    let o = gravdec(&["figure", "region-map", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("region_map_lc1.csv")).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .filter(|l| l.starts_with("sigma_b,"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert!(rows.len() >= 2);
    for w in rows.windows(2) {
        let slope = (w[1].1 / w[0].1).ln() / (w[1].0 / w[0].0).ln();
        assert!((slope + 2.0).abs() < 1e-10);
    }
}

#[test]
fn figure_io_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = gravdec(&["figure", "region-map", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn verify_filter_and_fault() {
    let o = gravdec(&["verify", "--only", "msq"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("PASS msq.grid"));
    assert!(!text.contains("tf.rootfind"));
    let o = gravdec(&["verify", "--only", "msq,tf", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(1));
    let o = gravdec(&["verify", "--only", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn convert_examples() {
    let o = gravdec(&["convert", "--mass", "1mp"]);
    assert!(stdout(&o).contains("2.176434e-8 kg"));
    let o = gravdec(&["convert", "--length", "1lp"]);
    assert!(stdout(&o).contains("1.616255e-35 m"));
    let o = gravdec(&["convert", "--time", "0"]);
    assert!(stdout(&o).contains("0e0 s"));
}

#[test]
fn workers_env_is_honoured() {
    let o = Command::new(env!("CARGO_BIN_EXE_gravdec"))
        .args(["purity", "--mass", "0.5mc", "--sigma", "30sb", "--samples", "8192"])
        .env("GRAVDEC_WORKERS", "1")
        .output()
        .unwrap();
    let p = gravdec(&["purity", "--mass", "0.5mc", "--sigma", "30sb", "--samples", "8192"]);
    assert_eq!(o.stdout, p.stdout);
    let bad = Command::new(env!("CARGO_BIN_EXE_gravdec"))
        .args(["region", "--mass", "1mc", "--sigma", "30sb"])
        .env("GRAVDEC_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn help_lists_figure_defaults() {
    let o = gravdec(&["figure", "--help"]);
    let text = stdout(&o);
    assert!(text.contains("30sb"));
    assert!(text.contains("region-map"));
}
