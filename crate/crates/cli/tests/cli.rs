use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

fn sploc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sploc"))
        .args(args)
        .env_remove("SPLOC_OUT")
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn sploc")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small dataset shared by the tests: the four functional molecules and the
/// four FbF molecules, 300 frames each.
fn dataset() -> &'static (TempDir, PathBuf) {
    static DATA: OnceLock<(TempDir, PathBuf)> = OnceLock::new();
    DATA.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let out = dir.path().join("data");
        let o = sploc(&[
            "--out",
            p(&out),
            "--seed",
            "5",
            "gen-data",
            "--codes",
            "EbL,FbF",
            "--frames",
            "300",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let manifest = out.join("manifest.json");
        (dir, manifest)
    })
}

fn train(out: &Path, extra: &[&str]) -> Output {
    let manifest = &dataset().1;
    let mut args = vec![
        "--out",
        p(out),
        "--seed",
        "1",
        "train",
        "--manifest",
        p(manifest),
        "--scenario",
        "FbF",
        "--max-sweeps",
        "3",
    ];
    args.extend_from_slice(extra);
    sploc(&args)
}

#[test]
fn gen_data_single_code_splits_in_two() {
    let dir = TempDir::new().unwrap();
    let o = sploc(&["--out", p(dir.path()), "gen-data", "--codes", "EFL", "--frames", "100"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    let packets = manifest["packets"].as_array().unwrap();
    assert_eq!(packets.len(), 2);
    for pk in packets {
        let file = dir.path().join(pk["path"].as_str().unwrap());
        let rows = fs::read_to_string(file)
            .unwrap()
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .count();
        assert_eq!(rows, 50);
    }
}

#[test]
fn gen_data_all_codes_gives_48_packets() {
    let dir = TempDir::new().unwrap();
    let o = sploc(&["--out", p(dir.path()), "--seed", "7", "gen-data", "--frames", "20", "--format", "binary"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(manifest["packets"].as_array().unwrap().len(), 48);
}

#[test]
fn invalid_code_is_a_usage_error_naming_letters() {
    let dir = TempDir::new().unwrap();
    let o = sploc(&["--out", p(dir.path()), "gen-data", "--codes", "EXQ"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("F, L, S or T"), "{}", stderr(&o));
}

#[test]
fn unknown_bias_lists_the_accepted_spellings() {
    let dir = TempDir::new().unwrap();
    let o = train(&dir.path().join("t"), &["--bias", "+3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("{-2,-1,0-,0,0+,+1,+2}"), "{}", stderr(&o));
}

#[test]
fn help_exits_zero_and_missing_inputs_exit_one() {
    assert_eq!(sploc(&["--help"]).status.code(), Some(0));
    assert_eq!(sploc(&["frobnicate"]).status.code(), Some(1));
    let dir = TempDir::new().unwrap();
    let o = sploc(&["--out", p(dir.path()), "train", "--manifest", p(&dir.path().join("absent.json"))]);
    assert_eq!(o.status.code(), Some(1));
    let o = sploc(&["--out", p(dir.path()), "msip", "--bundles", p(&dir.path().join("nothing"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn nonfunctional_flag_requires_custom_scenario() {
    let dir = TempDir::new().unwrap();
    let o = train(&dir.path().join("t"), &["--nonfunctional", "FFF"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_writes_a_complete_bundle_and_summary_line() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("t");
    let o = train(&out, &["--bias", "-2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fields: Vec<String> = stdout(&o).split_whitespace().map(String::from).collect();
    assert_eq!(fields.len(), 4);
    let counts: usize = fields[..3].iter().map(|f| f.parse::<usize>().unwrap()).sum();
    assert_eq!(counts, 58);
    assert!(fields[3].parse::<f64>().unwrap().is_finite());
    for f in ["basis.csv", "spectrum.csv", "history.csv", "config.json", "summary.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["converged"], serde_json::Value::Bool(false));
    assert!(summary["warning"].is_string());
}

#[test]
fn config_echo_reproduces_the_run() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("a");
    assert!(train(&first, &["--bias", "0+"]).status.success());
    let second = dir.path().join("b");
    let o = sploc(&[
        "--out",
        p(&second),
        "train",
        "--config",
        p(&first.join("config.json")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["basis.csv", "spectrum.csv", "history.csv", "config.json"] {
        assert_eq!(
            fs::read(first.join(f)).unwrap(),
            fs::read(second.join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn spectrum_prints_every_mode() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("t");
    assert!(train(&out, &[]).status.success());
    let o = sploc(&["spectrum", "--bundle", p(&out)]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1 + 58 + 1);
    assert!(text.lines().last().unwrap().starts_with("nD="));
}

#[test]
fn msip_of_bundle_with_itself_has_unit_diagonal() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("t");
    assert!(train(&out, &[]).status.success());
    let an = dir.path().join("an");
    let o = sploc(&["--out", p(&an), "msip", "--bundles", p(&out), "--svg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(an.join("msip.svg").is_file());
    let csv = fs::read_to_string(an.join("msip.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("resultA,resultB,blockA,blockB,value"));
    let mut diagonal = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let v: f64 = f[4].parse().unwrap();
        if f[2] == f[3] {
            diagonal += 1;
            assert!((v - 1.0).abs() < 1e-9 || v == 0.0, "{line}");
        } else {
            assert!(v < 1e-9, "{line}");
        }
    }
    assert_eq!(diagonal, 3);
}

#[test]
fn rmsf_full_basis_matches_plain_fluctuation() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("t");
    assert!(train(&out, &[]).status.success());
    let full = dir.path().join("full");
    let o = sploc(&["--out", p(&full), "rmsf", "--bundle", p(&out), "--subspace", "full", "--svg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(full.join("rmsf.svg").is_file());
    let text = fs::read_to_string(full.join("rmsf.csv")).unwrap();
    // 16 packets of 29 atoms.
    assert_eq!(text.lines().count(), 1 + 16 * 29);

    // The three class subspaces split the total squared fluctuation.
    let total = |t: &str| -> f64 {
        t.lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap().powi(2))
            .sum()
    };
    let mut parts = 0.0;
    for s in ["D", "U", "I"] {
        let d = dir.path().join(s);
        let o = sploc(&["--out", p(&d), "rmsf", "--bundle", p(&out), "--subspace", s]);
        assert!(o.status.success(), "{}", stderr(&o));
        parts += total(&fs::read_to_string(d.join("rmsf.csv")).unwrap());
    }
    let whole = total(&text);
    assert!((parts - whole).abs() < 1e-9 * whole.max(1.0), "{parts} vs {whole}");
}

#[test]
fn replicate_bookkeeping() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("rep");
    let manifest = &dataset().1;
    let o = sploc(&[
        "--out",
        p(&out),
        "--seed",
        "2",
        "--jobs",
        "4",
        "replicate",
        "--manifest",
        p(manifest),
        "--scenario",
        "FbF",
        "--replicates",
        "2",
        "--max-sweeps",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut bundles = 0;
    for b in ["-2", "0-", "0", "0+", "+2"] {
        for k in 0..2 {
            let d = out.join(format!("bias_{b}")).join(format!("rep_{k}"));
            assert!(d.join("basis.csv").is_file(), "{}", d.display());
            bundles += 1;
        }
    }
    assert_eq!(bundles, 10);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(rows.len(), 6);
    assert!(rows[0].starts_with("bias,replicates,failed,mean_nD,se_nD"));
    for row in &rows[1..] {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[1], "2");
        assert_eq!(f[2], "0");
        for v in &f[3..] {
            assert!(v.parse::<f64>().unwrap().is_finite(), "{row}");
        }
    }
    let fig = fs::read_to_string(out.join("class_counts.csv")).unwrap();
    assert_eq!(fig.lines().count(), 1 + 5 * 3);
    let runs = fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 10);
}
