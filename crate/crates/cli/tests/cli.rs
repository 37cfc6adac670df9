use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn auctionlab(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_auctionlab"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> Vec<Vec<(String, String)>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    r.records()
        .map(|rec| {
            header
                .iter()
                .cloned()
                .zip(rec.unwrap().iter().map(String::from))
                .collect()
        })
        .collect()
}

fn field<'a>(row: &'a [(String, String)], key: &str) -> &'a str {
    &row.iter()
        .find(|(k, _)| k == key)
        .unwrap_or_else(|| panic!("no column {key}"))
        .1
}

fn float(row: &[(String, String)], key: &str) -> f64 {
    field(row, key).parse().unwrap()
}

#[test]
fn fees_match_closed_form_on_eight_uniform_items() {
    let dir = tempfile::tempdir().unwrap();
    let out = auctionlab(&["fees"], &configs().join("sp_uniform_2x8.toml"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&dir.path().join("sp-uniform-2x8_fees.csv"));
    assert_eq!(rows.len(), 2);
    for row in &rows {
        // u(t) = t^2 / 2, so r_ij = max_s s^2 (1 - s) / 2 = 2/27 and, as u < r_i
        // everywhere, core = 8 E[t^2 / 2] = 4/3; the fee is 4/3 - 2 * 16/27.
        assert!((float(row, "r_i") - 16.0 / 27.0).abs() < 1e-4);
        assert!((float(row, "core_sum") - 4.0 / 3.0).abs() < 1e-4);
        assert!((float(row, "fee") - 4.0 / 27.0).abs() < 1e-4);
        assert_eq!(field(row, "provenance"), "formula");
        assert_eq!(field(row, "pass"), "true");
    }
}

#[test]
fn revenue_row_splits_into_fees_and_items() {
    let dir = tempfile::tempdir().unwrap();
    let out = auctionlab(&["revenue"], &configs().join("ghost_efp_manual.toml"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rows = read_csv(&dir.path().join("ghost-efp-manual_revenue.csv"));
    let row = &rows[0];
    assert_eq!(field(row, "mechanism"), "ghost-EFP");
    let (total, ef, item) = (float(row, "total"), float(row, "ef"), float(row, "item"));
    assert!((total - ef - item).abs() < 1e-6);
    assert!(ef >= float(row, "ef_rev") - 3.0 * float(row, "ef_stderr") - 1e-9);
}

#[test]
fn reruns_are_byte_identical_and_seed_override_applies() {
    let cfg = configs().join("fp_uniform_2x2.toml");
    let (a, b, c) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    for d in [&a, &b] {
        assert_eq!(auctionlab(&["revenue"], &cfg, d.path()).status.code(), Some(0));
    }
    assert_eq!(
        auctionlab(&["revenue", "--seed-override", "99"], &cfg, c.path())
            .status
            .code(),
        Some(0)
    );
    let name = "fp-uniform-2x2_revenue.csv";
    let x = std::fs::read(a.path().join(name)).unwrap();
    assert_eq!(x, std::fs::read(b.path().join(name)).unwrap());
    let z = std::fs::read(c.path().join(name)).unwrap();
    assert_ne!(x, z);
    assert_eq!(field(&read_csv(&c.path().join(name))[0], "seed"), "99");
}

#[test]
fn config_errors_exit_two_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "seed = 1\n\n[instance]\nn = 2\nm = 1\ndist = \"uniform(0,2)\"\nH = 1.0\n",
    )
    .unwrap();
    let out = auctionlab(&["fees"], &cfg, dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 6"), "{err}");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);

    let missing = auctionlab(&["fees"], &dir.path().join("nope.toml"), dir.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn failed_expectation_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("credibility/efp_pair_priced_out.toml")).unwrap();
    assert!(text.contains("expect = \"exploitable\""));
    let cfg = dir.path().join("wrong.toml");
    std::fs::write(&cfg, text.replace("expect = \"exploitable\"", "expect = \"credible\"")).unwrap();
    let out = auctionlab(&["credibility"], &cfg, dir.path());
    assert_eq!(out.status.code(), Some(1));
    let rows = read_csv(&dir.path().join("efp-pair-priced-out_credibility.csv"));
    assert_eq!(field(&rows[0], "pass"), "false");
    assert_eq!(field(&rows[0], "replay_pass"), "true");
}

#[test]
fn equilibrium_table_tracks_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = auctionlab(
        &["equilibrium"],
        &configs().join("equilibrium_ap_uniform.toml"),
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let rows = read_csv(&dir.path().join("equilibrium-ap-uniform_equilibrium.csv"));
    assert_eq!(rows.len(), 101);
    for row in &rows {
        let t = float(row, "t");
        assert!((float(row, "bid") - t * t / 2.0).abs() < 1e-4);
    }
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_auctionlab"))
        .arg("frobnicate")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
