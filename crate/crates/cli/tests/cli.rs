use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_inflow-bias"));
    c.env_remove("INFLOW_BIAS_OUTPUT_DIR");
    c
}

/// Positive seasonal series with irregular wiggles, 1931-01 onward.
fn write_csv(dir: &Path, label: &str, months: usize, phase: f64) -> PathBuf {
    let mut text = String::from("date,value\n");
    for t in 0..months {
        let (year, month) = (1931 + t / 12, t % 12 + 1);
        let x = t as f64;
        let v = 1000.0
            + 300.0 * (2.0 * std::f64::consts::PI * x / 12.0 + phase).sin()
            + 80.0 * (1.7 * x).sin() * (0.37 * x + phase).cos()
            + 40.0 * (0.11 * x * x).sin();
        text.push_str(&format!("{year}-{month:02},{v}\n"));
    }
    let path = dir.join(format!("{label}.csv"));
    fs::write(&path, text).unwrap();
    path
}

fn data_args(dir: &Path) -> Vec<String> {
    let se = write_csv(dir, "SE", 70 * 12, 0.0);
    let ne = write_csv(dir, "NE", 70 * 12, 1.3);
    vec![
        "--data".into(),
        format!("SE={}", se.display()),
        "--data".into(),
        format!("NE={}", ne.display()),
    ]
}

fn backtest(dir: &Path, out: &str, threads: usize) -> Output {
    bin()
        .arg("backtest")
        .args(data_args(dir))
        .args(["--span-start", "1995-01", "--span-end", "1998-12", "--scenarios", "50"])
        .args(["--forecaster", "official_parpa", "--forecaster", "seasonal_naive"])
        .args(["--threads", &threads.to_string()])
        .arg("--output-dir")
        .arg(dir.join(out))
        .output()
        .unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn backtest_output_does_not_depend_on_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let a = backtest(tmp.path(), "one", 1);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = backtest(tmp.path(), "four", 4);
    assert!(b.status.success());
    assert_eq!(a.stdout, b.stdout);
    let stdout = String::from_utf8(a.stdout).unwrap();
    assert!(stdout.contains("== SE (average GW) =="), "{stdout}");
    assert!(stdout.contains("forecaster,k1,k6,k12,k24,cumulative,pct_of_reference"));

    // Manifests echo their own output directory; everything else matches.
    let (fa, fb) = (files(&tmp.path().join("one")), files(&tmp.path().join("four")));
    assert_eq!(fa.len(), fb.len());
    for ((na, xa), (nb, xb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        if na != "manifest.json" {
            assert!(xa == xb, "{na} differs");
        }
    }
}

#[test]
fn validation_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("backtest")
        .args(data_args(tmp.path()))
        .args(["--span-start", "1995-01", "--span-end", "1996-12", "--horizon", "61"])
        .arg("--output-dir")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizon"));

    let gap = tmp.path().join("gap.csv");
    fs::write(&gap, "date,value\n2000-01,1\n2000-02,2\n2000-04,3\n").unwrap();
    let out = bin().arg("fit").arg("--data").arg(&gap).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("2000-03"),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = bin()
        .args(["fit", "--forecaster", "weighted_parpa:w=0.5"])
        .args(data_args(tmp.path()))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fit_prints_one_model_per_subsystem() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("fit")
        .args(data_args(tmp.path()))
        .args(["--origin", "1990-06"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let models = v.as_array().unwrap();
    assert_eq!(models.len(), 2);
    assert_eq!(models[0]["subsystem"], "SE");
    assert_eq!(models[1]["origin"], "1990-06");
    assert_eq!(models[0]["model"]["phi"].as_array().unwrap().len(), 12);
}

#[test]
fn simulate_writes_scenarios_under_the_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("simulate")
        .args(data_args(tmp.path()))
        .args(["--steps", "6", "--scenarios", "7", "--seed", "3"])
        .env("INFLOW_BIAS_OUTPUT_DIR", tmp.path().join("env_out"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("env_out/scenarios.csv")).unwrap();
    // header plus 7 scenarios x 6 steps x 2 subsystems
    assert_eq!(text.lines().count(), 1 + 7 * 6 * 2);

    let stdout = bin()
        .arg("simulate")
        .args(data_args(tmp.path()))
        .args(["--steps", "6", "--scenarios", "7", "--seed", "3", "--out", "-"])
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(stdout.stdout).unwrap(), text);
}

#[test]
fn report_rebuilds_tables_from_a_finished_run() {
    let tmp = tempfile::tempdir().unwrap();
    let run = backtest(tmp.path(), "run", 2);
    assert!(run.status.success());
    let dir = tmp.path().join("run");
    let before = files(&dir);
    let out = bin()
        .arg("report")
        .arg("--run-dir")
        .arg(&dir)
        .arg("--published")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(files(&dir), before);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("-- published reference values --"));
    assert!(stdout.starts_with(&String::from_utf8(run.stdout).unwrap()[..20]));

    let out = bin()
        .arg("report")
        .arg("--run-dir")
        .arg(&dir)
        .args(["--pct-bias", "mean-of-ratios"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let changed = files(&dir)
        .iter()
        .zip(&before)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.clone())
        .collect::<Vec<_>>();
    assert!(changed.iter().all(|n| n.starts_with("bias_")), "{changed:?}");
    assert!(!changed.is_empty());
}
