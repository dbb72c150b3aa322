use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qillum::cli::{ChernoffRow, CompareRow, ProbsRow};
use qillum::discrimination::{analytic_q_unentangled, SweepRow};
use qillum::imaging::ReflectivityMap;
use qillum::montecarlo::CampaignRow;
use serde::de::DeserializeOwned;

fn qillum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qillum"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = qillum(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn csv_rows<T: DeserializeOwned>(text: &str) -> Vec<T> {
    assert!(text.starts_with("# qillum "));
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap()
}

fn json_rows<T: DeserializeOwned>(text: &str) -> Vec<T> {
    serde_json::from_str(text).unwrap()
}

#[test]
fn chernoff_with_no_object_gives_unit_q_for_both_kinds() {
    let rows: Vec<ChernoffRow> = csv_rows(&stdout(&["chernoff", "--eta", "0", "--b", "0.01", "--d", "4"]));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].kind, "unentangled");
    assert_eq!(rows[1].kind, "entangled");
    for r in rows {
        assert_eq!(r.q_numeric, 1.0);
        assert_eq!(r.q_analytic, 1.0);
    }
}

#[test]
fn entangled_sweep_matches_reduced_noise_closed_form() {
    // b = 0.1 would put d*b past 0.5 for d >= 8
    let text = stdout(&["sweep", "--eta", "0.01", "--b", "0.03", "--d", "1,2,4,8,16", "--kind", "entangled"]);
    let rows: Vec<SweepRow> = csv_rows(&text);
    assert_eq!(rows.iter().map(|r| r.d).collect::<Vec<_>>(), vec![1, 2, 4, 8, 16]);
    for r in &rows {
        let want = analytic_q_unentangled(0.01, 0.03 / r.d as f64).unwrap().q;
        assert_eq!(r.q_analytic, want, "d = {}", r.d);
    }
}

#[test]
fn sweep_header_is_exact() {
    let text = stdout(&["sweep", "--eta", "0.05", "--b", "0.01", "--d", "2"]);
    assert_eq!(
        text.lines().nth(1).unwrap(),
        "eta,b,d,kind,regime,q_numeric,s_star,q_analytic,q_regime_approx,helstrom_error,trials_eps01"
    );
}

#[test]
fn probs_rows_for_four_modes() {
    let rows: Vec<ProbsRow> = csv_rows(&stdout(&["probs", "--eta", "0.1", "--b", "0.01", "--d", "4"]));
    let got: Vec<(f64, f64)> = rows.iter().map(|r| (r.p_yes_absent, r.p_yes_present)).collect();
    let want = [(0.01, 0.109), (0.0025, 0.10225)];
    for ((a, p), (wa, wp)) in got.iter().zip(want) {
        assert!((a - wa).abs() < 1e-15 && (p - wp).abs() < 1e-15, "{got:?}");
    }
}

#[test]
fn exit_codes() {
    let usage = qillum(&["chernoff", "--eta", "0.1", "--b", "0.01", "--d", "1", "--nonsense", "3"]);
    assert_eq!(usage.status.code(), Some(2));
    let missing = qillum(&["helstrom", "--eta", "0.1", "--d", "1"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("b:"));
    let no_seed = qillum(&["simulate", "--eta", "0.1", "--b", "0.01", "--d", "1"]);
    assert_eq!(no_seed.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&no_seed.stderr).contains("seed"));
    let domain = qillum(&["chernoff", "--eta", "0.1", "--b", "0.2", "--d", "4"]);
    assert_eq!(domain.status.code(), Some(3));
    let bad_eta = qillum(&["probs", "--eta", "1.5", "--b", "0.01", "--d", "1"]);
    assert_eq!(bad_eta.status.code(), Some(3));
    for out in [usage, missing, no_seed, domain, bad_eta] {
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    }
}

#[test]
fn config_file_errors_and_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.cfg");
    fs::write(&cfg, "# scenario\neta = 0.1\nb = 0.01\nd = 4\n").unwrap();
    let c = cfg.to_str().unwrap();
    let from_file: Vec<ProbsRow> = csv_rows(&stdout(&["probs", "--config", c, "--kind", "unentangled"]));
    assert!((from_file[0].p_yes_present - 0.109).abs() < 1e-15);
    let overridden: Vec<ProbsRow> = csv_rows(&stdout(&["probs", "--config", c, "--b", "0.02", "--kind", "unentangled"]));
    assert_eq!(overridden[0].b, 0.02);

    fs::write(&cfg, "eta = 0.1\nbandwidth = 3\n").unwrap();
    let out = qillum(&["probs", "--config", c]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bandwidth") && err.trim_end().lines().count() == 1, "{err}");
}

#[test]
fn csv_and_json_mirror_each_other() {
    let args = ["sweep", "--eta", "0,0.013,0.2", "--b", "0.001,0.07", "--d", "1,3"];
    let csv: Vec<SweepRow> = csv_rows(&stdout(&args));
    let mut json_args = args.to_vec();
    json_args.extend(["--format", "json"]);
    let json: Vec<SweepRow> = json_rows(&stdout(&json_args));
    assert_eq!(csv.len(), 24);
    assert_eq!(csv, json);
    assert!(csv.iter().any(|r| r.trials_eps01.is_none()));

    let sim = ["simulate", "--eta", "0.05", "--b", "0.01", "--d", "1,4", "--seed", "11", "--replicas", "40"];
    let csv: Vec<CampaignRow> = csv_rows(&stdout(&sim));
    let mut json_args = sim.to_vec();
    json_args.extend(["--format", "json"]);
    let json: Vec<CampaignRow> = json_rows(&stdout(&json_args));
    assert_eq!(csv.len(), 8);
    assert_eq!(csv, json);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let sim = ["simulate", "--eta", "0.02", "--b", "0.05", "--d", "1,8", "--seed", "3", "--replicas", "60"];
    assert_eq!(stdout(&sim), stdout(&sim));
    let mut other_seed = sim.to_vec();
    other_seed[8] = "4";
    assert_ne!(stdout(&sim), stdout(&other_seed));
}

fn write_map(dir: &Path) -> String {
    let map = ReflectivityMap::checkerboard(6, 5, 0.0, 0.1).unwrap();
    let path = dir.join("map.txt");
    fs::write(&path, map.to_text()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn image_writes_pgm_grid_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let map = write_map(dir.path());
    let pgm = dir.path().join("scan.pgm");
    let grid = dir.path().join("scan.txt");
    let out = dir.path().join("scan.csv");
    let args = [
        "image", "--map", &map, "--b", "0.01", "--d", "8", "--shots", "400", "--seed", "5",
        "--kind", "entangled", "--pgm", pgm.to_str().unwrap(), "--grid", grid.to_str().unwrap(),
        "--output", out.to_str().unwrap(),
    ];
    stdout(&args);
    let pgm_text = fs::read_to_string(&pgm).unwrap();
    assert!(pgm_text.starts_with("P2\n6 5\n255\n"));
    let grid_text = fs::read_to_string(&grid).unwrap();
    assert!(grid_text.starts_with("6 5\n"));
    assert!(grid_text.lines().last().unwrap().starts_with("pixel_error_rate="));
    let first = fs::read(&out).unwrap();
    stdout(&args);
    assert_eq!(first, fs::read(&out).unwrap());

    let missing_seed = qillum(&["image", "--map", &map, "--b", "0.01", "--d", "8", "--shots", "400"]);
    assert_eq!(missing_seed.status.code(), Some(2));
}

#[test]
fn image_compare_emits_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let map = write_map(dir.path());
    let text = stdout(&["image", "--map", &map, "--b", "0.01", "--d", "8", "--shots", "800", "--seed", "1", "--compare"]);
    let rows: Vec<CompareRow> = csv_rows(&text);
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].shots_unentangled, rows[0].shots_entangled), (800, 100));
}

#[test]
fn dump_states_writes_parseable_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h.csv");
    stdout(&[
        "helstrom", "--eta", "0.1", "--b", "0.01", "--d", "3", "--dump-states", "--output",
        out.to_str().unwrap(),
    ]);
    for (kind, dim) in [("unentangled", 4), ("entangled", 12)] {
        for which in ["rho0", "rho1"] {
            let path = dir.path().join(format!("h.csv.{kind}.{which}.txt"));
            let m = qillum::hilbert::parse_dump(&fs::read_to_string(path).unwrap()).unwrap();
            assert_eq!(m.nrows(), dim);
            let trace: f64 = (0..dim).map(|i| m[(i, i)].re).sum();
            assert!((trace - 1.0).abs() < 1e-12);
        }
    }
    let grid = qillum(&["helstrom", "--eta", "0.1,0.2", "--b", "0.01", "--d", "3", "--dump-states"]);
    assert_eq!(grid.status.code(), Some(2));
}
