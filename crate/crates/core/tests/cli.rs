use std::fs;
use std::path::Path;
use std::process::Command;

use jcq::cli::output::read_results_csv;
use jcq::quasiprob::read_field_csv;
use jcq::semiclassical::read_branch_csv;

const MODEL: &str = r#"
[model]
g = 2.0
kappa = 1.0
gamma = 0.5
delta_omega_c = 0.0
delta = 0.0
eps_d = 0.5
"#;

fn jcq(dir: &Path, config: &str, args: &[&str]) -> (i32, std::path::PathBuf) {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_jcq"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .env("RUST_LOG", "off")
        .status()
        .unwrap();
    (status.code().unwrap(), out)
}

fn two_axis() -> String {
    format!(
        "truncation = 10\n{MODEL}\n[[axes]]\nname = \"eps_d\"\nmin = 0.0\nmax = 1.0\ncount = 5\n\n[[axes]]\nname = \"delta_omega_c\"\nmin = -1.0\nmax = 1.0\ncount = 5\n"
    )
}

#[test]
fn sweep_grid_has_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = jcq(dir.path(), &two_axis(), &["sweep", "--threads", "3"]);
    assert_eq!(code, 0);
    let table = read_results_csv(&fs::read_to_string(out.join("results.csv")).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 25);
    let eps = table.values("eps_d").unwrap();
    let n = table.values("mean_n").unwrap();
    // the undriven line is the vacuum
    for (e, n) in eps.iter().zip(&n) {
        if e.unwrap() == 0.0 {
            assert!(n.unwrap().abs() < 1e-12);
        }
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["points"].as_array().unwrap().len(), 25);
    assert_eq!(manifest["points"][7]["n_fock"], 10);
    assert_eq!(manifest["command"], "sweep");
    assert_eq!(manifest["config"]["model"]["g"], 2.0);
}

#[test]
fn reruns_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (_, oa) = jcq(a.path(), &two_axis(), &["sweep", "--threads", "1"]);
    let (_, ob) = jcq(b.path(), &two_axis(), &["sweep", "--threads", "4"]);
    assert_eq!(
        fs::read(oa.join("results.csv")).unwrap(),
        fs::read(ob.join("results.csv")).unwrap()
    );
}

#[test]
fn field_and_branch_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "truncation = 10\noutputs = [\"mean_n\", \"qfield\", \"wfield_numeric\", \"branches\"]\n{MODEL}\n[grid]\nx_min = -2.0\nx_max = 2.0\ny_min = -2.0\ny_max = 2.0\nnx = 21\nny = 21\n[[axes]]\nname = \"eps_d\"\nmin = 0.5\nmax = 1.0\ncount = 2\n"
    );
    let (code, out) = jcq(dir.path(), &cfg, &["sweep"]);
    assert_eq!(code, 0);
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let files: Vec<&str> = m["csv_files"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(files.len(), 1 + 2 * 3);
    let (q, header) = read_field_csv(&fs::read_to_string(out.join("qfield_00001.csv")).unwrap()).unwrap();
    assert_eq!(q.values.dim(), (21, 21));
    assert_eq!(header.params_hash.as_deref(), m["points"][1]["params_hash"].as_str());
    let rows = read_branch_csv(&fs::read_to_string(out.join("branches_00000.csv")).unwrap()).unwrap();
    assert!(!rows.is_empty());
}

#[test]
fn subcommands_select_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = jcq(dir.path(), &two_axis(), &["entropy"]);
    assert_eq!(code, 0);
    let t = read_results_csv(&fs::read_to_string(out.join("results.csv")).unwrap()).unwrap();
    assert!(t.column("entropy").is_some() && t.column("g2").is_none());

    let (code, out) = jcq(dir.path(), &two_axis(), &["steady"]);
    assert_eq!(code, 0);
    let t = read_results_csv(&fs::read_to_string(out.join("results.csv")).unwrap()).unwrap();
    assert_eq!(t.rows.len(), 1);

    let (code, out) = jcq(dir.path(), &two_axis(), &["semiclassical"]);
    assert_eq!(code, 0);
    assert!(out.join("branches_00024.csv").exists());
}

#[test]
fn truncation_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = jcq(dir.path(), &two_axis(), &["steady", "--truncation", "7"]);
    assert_eq!(code, 0);
    let t = read_results_csv(&fs::read_to_string(out.join("results.csv")).unwrap()).unwrap();
    assert_eq!(t.values("n_fock").unwrap(), vec![Some(7.0)]);
    let (code, _) = jcq(dir.path(), &two_axis(), &["steady", "--truncation", "many"]);
    assert_eq!(code, 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = jcq(dir.path(), "[model]\ng = 1.0\n", &["sweep"]);
    assert_eq!(code, 2);
    let (code, _) = jcq(dir.path(), &format!("bogus = 1\n{MODEL}"), &["sweep"]);
    assert_eq!(code, 2);

    // degenerate point: no coupling and no qubit decay
    let degenerate = "truncation = 6\n[model]\ng = 0.0\nkappa = 1.0\ngamma = 0.0\ndelta_omega_c = 0.0\ndelta = 0.0\neps_d = 0.5\n";
    let (code, out) = jcq(dir.path(), degenerate, &["steady"]);
    assert_eq!(code, 3);
    let t = read_results_csv(&fs::read_to_string(out.join("results.csv")).unwrap()).unwrap();
    assert!(t.values("mean_n").unwrap()[0].is_none());

    // partial failure: the Kerr equation is undefined at zero detuning
    let partial = format!(
        "truncation = 6\noutputs = [\"mean_n\", \"branches\"]\nbranch_equations = [\"kerr\"]\n{MODEL}\n[[axes]]\nname = \"delta_over_g\"\nmin = 0.0\nmax = 5.0\ncount = 2\n"
    );
    let (code, out) = jcq(dir.path(), &partial, &["sweep"]);
    assert_eq!(code, 1);
    let t = read_results_csv(&fs::read_to_string(out.join("results.csv")).unwrap()).unwrap();
    let err = t.column("error").unwrap();
    assert!(matches!(&t.rows[0][err], jcq::cli::output::Cell::Text(s) if s.contains("kerr")));
    assert_eq!(t.rows[1][err], jcq::cli::output::Cell::Empty);
}
