//! Result files: `results.csv`, `manifest.json`, and per-point field,
//! branch and Liouvillian files.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lindblad::ModelParams;
use crate::numfmt::{parse_f64, sci17};
use crate::quasiprob::write_field_csv;
use crate::semiclassical::write_branch_csv;

use super::config::{Output, SweepConfig, Truncation};
use super::sweep::ResultRow;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed results file at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// SHA-256 of the parameter set and truncation, as lowercase hex.
pub fn params_hash(p: &ModelParams, n_fock: Option<usize>) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(p).expect("params serialize"));
    if let Some(n) = n_fock {
        h.update(n.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Scalar columns produced by a requested output.
fn scalar_columns(out: Output) -> &'static [&'static str] {
    match out {
        Output::MeanA => &["re_mean_a", "im_mean_a"],
        Output::MeanN => &["mean_n"],
        Output::SigmaMinus => &["re_sigma_minus", "im_sigma_minus"],
        Output::SigmaZ => &["sigma_z"],
        Output::Entropy => &["entropy"],
        Output::G2 => &["g2"],
        _ => &[],
    }
}

fn scalar_values(out: Output, row: &ResultRow) -> Vec<String> {
    let Some(s) = row.summary.as_ref() else {
        return vec![String::new(); scalar_columns(out).len()];
    };
    let v: Vec<f64> = match out {
        Output::MeanA => vec![s.mean_a.re, s.mean_a.im],
        Output::MeanN => vec![s.mean_n],
        Output::SigmaMinus => vec![s.sigma_minus.re, s.sigma_minus.im],
        Output::SigmaZ => vec![s.sigma_z],
        Output::Entropy => vec![s.entropy],
        Output::G2 => vec![s.g2.unwrap_or(f64::NAN)],
        _ => vec![],
    };
    v.into_iter().map(sci17).collect()
}

fn file_column(out: Output) -> Option<String> {
    (out.is_field() || out == Output::Branches).then(|| format!("{}_file", out.tag()))
}

fn point_file(out: Output, index: usize) -> String {
    format!("{}_{index:05}.csv", out.tag())
}

fn dump_file(index: usize) -> String {
    format!("liouvillian_{index:05}.bin")
}

/// Single-line cell without separators.
fn clean(s: &str) -> String {
    s.replace([',', '\n', '\r'], " ")
}

pub fn results_header(cfg: &SweepConfig) -> Vec<String> {
    let mut cols = vec!["index".to_string()];
    cols.extend(cfg.axes.iter().map(|a| a.name.tag().to_string()));
    for out in &cfg.outputs {
        cols.extend(scalar_columns(*out).iter().map(|c| c.to_string()));
    }
    if cfg.needs_steady_state() {
        cols.push("n_fock".into());
        cols.push("residual".into());
    }
    cols.extend(cfg.outputs.iter().filter_map(|o| file_column(*o)));
    if cfg.dump_liouvillian && cfg.needs_steady_state() {
        cols.push("liouvillian_file".into());
    }
    cols.push("error".into());
    cols
}

fn results_row(cfg: &SweepConfig, row: &ResultRow) -> Vec<String> {
    let mut cells = vec![row.index.to_string()];
    cells.extend(row.coords.iter().map(|v| sci17(*v)));
    for out in &cfg.outputs {
        cells.extend(scalar_values(*out, row));
    }
    if cfg.needs_steady_state() {
        cells.push(row.n_fock.map(|n| n.to_string()).unwrap_or_default());
        cells.push(row.residual.map(sci17).unwrap_or_default());
    }
    for out in cfg.outputs.iter().filter(|o| file_column(**o).is_some()) {
        let present = if *out == Output::Branches {
            !row.branches.is_empty()
        } else {
            row.fields.iter().any(|(o, _)| o == out)
        };
        cells.push(if present { point_file(*out, row.index) } else { String::new() });
    }
    if cfg.dump_liouvillian && cfg.needs_steady_state() {
        cells.push(row.dump.as_ref().map(|_| dump_file(row.index)).unwrap_or_default());
    }
    cells.push(row.error.as_deref().map(clean).unwrap_or_default());
    cells
}

pub fn results_csv(cfg: &SweepConfig, rows: &[ResultRow]) -> String {
    let mut out = results_header(cfg).join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&results_row(cfg, row).join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct PointRecord {
    pub index: usize,
    pub axis_index: Vec<usize>,
    pub n_fock: Option<usize>,
    pub params_hash: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub code_version: String,
    pub command: String,
    pub unit: String,
    pub config: SweepConfig,
    pub truncation: Truncation,
    pub threads: Option<usize>,
    pub csv_files: Vec<String>,
    pub binary_files: Vec<String>,
    pub points: Vec<PointRecord>,
    pub failed_points: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct RunInfo {
    pub command: String,
    pub threads: Option<usize>,
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    fs::write(path, bytes).map_err(io_err(path))
}

/// Writes every output of a finished sweep into `out_dir`.
pub fn write_outputs(
    rows: &[ResultRow],
    cfg: &SweepConfig,
    out_dir: &Path,
    info: &RunInfo,
) -> Result<Manifest, OutputError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut csv_files = vec!["results.csv".to_string()];
    let mut binary_files = Vec::new();

    write(&out_dir.join("results.csv"), results_csv(cfg, rows).as_bytes())?;
    for row in rows {
        let hash = params_hash(&row.params, row.n_fock);
        for (out, field) in &row.fields {
            let name = point_file(*out, row.index);
            write(&out_dir.join(&name), write_field_csv(field, Some(&hash)).as_bytes())?;
            csv_files.push(name);
        }
        if !row.branches.is_empty() {
            let name = point_file(Output::Branches, row.index);
            write(&out_dir.join(&name), write_branch_csv(&row.branches).as_bytes())?;
            csv_files.push(name);
        }
        if let Some(d) = &row.dump {
            let name = dump_file(row.index);
            write(&out_dir.join(&name), d)?;
            binary_files.push(name);
        }
    }

    let mut notes = vec![
        "<a> uses the master-equation drive convention; an empty linear cavity gives eps_d/(kappa - i delta_omega_c). Mean-field branch amplitudes are in the -i eps_d convention (multiply by i to compare).".to_string(),
    ];
    if rows
        .iter()
        .flat_map(|r| &r.branches)
        .any(|b| b.labels_assumed)
    {
        notes.push(
            "branch stability follows the S-curve rule (outer branches stable, middle unstable), not a linear stability analysis".to_string(),
        );
    }
    if cfg.outputs.contains(&Output::G2) {
        notes.push("g2 is NaN where <n> vanishes".to_string());
    }

    let manifest = Manifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        command: info.command.clone(),
        unit: cfg.unit.clone(),
        config: cfg.clone(),
        truncation: cfg.truncation,
        threads: info.threads,
        csv_files,
        binary_files,
        points: rows
            .iter()
            .map(|r| PointRecord {
                index: r.index,
                axis_index: r.axis_index.clone(),
                n_fock: r.n_fock,
                params_hash: params_hash(&r.params, r.n_fock),
                error: r.error.clone(),
            })
            .collect(),
        failed_points: rows.iter().filter(|r| r.failed()).count(),
        notes,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write(&out_dir.join("manifest.json"), json.as_bytes())?;
    Ok(manifest)
}

/// One cell of a parsed results file.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Empty,
    Number(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Self::Number(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultsTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn values(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.column(name)?;
        Some(self.rows.iter().map(|r| r[k].as_f64()).collect())
    }
}

/// Parses a `results.csv` back into cells; numeric columns round-trip exactly.
pub fn read_results_csv(text: &str) -> Result<ResultsTable, OutputError> {
    let err = |line: usize, msg: String| OutputError::Parse { line, msg };
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| err(1, "empty input".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    if header.first().map(String::as_str) != Some("index") || header.last().map(String::as_str) != Some("error") {
        return Err(err(1, "header must start with `index` and end with `error`".into()));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != header.len() {
            return Err(err(
                lineno,
                format!("expected {} columns, got {}", header.len(), cols.len()),
            ));
        }
        if cols[0].trim().parse::<usize>().is_err() {
            return Err(err(lineno, format!("invalid index `{}`", cols[0])));
        }
        rows.push(
            cols.iter()
                .map(|c| {
                    if c.is_empty() {
                        Cell::Empty
                    } else if let Some(v) = parse_f64(c) {
                        Cell::Number(v)
                    } else {
                        Cell::Text(c.to_string())
                    }
                })
                .collect(),
        );
    }
    Ok(ResultsTable { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::parse_config;
    use crate::cli::sweep::{run_sweep, RunOptions};

    fn run(text: &str) -> (SweepConfig, Vec<ResultRow>) {
        let cfg = parse_config(text).unwrap();
        let rows = run_sweep(&cfg, RunOptions { threads: Some(2) }).unwrap();
        (cfg, rows)
    }

    const SCALAR: &str = r#"
truncation = 8
[model]
g = 2.0
kappa = 1.0
delta_omega_c = 0.5
delta = 0.0
eps_d = 0.3
[[axes]]
name = "eps_d"
min = 0.0
max = 0.4
count = 3
"#;

    #[test]
    fn scalar_sweep_writes_one_csv() {
        let (cfg, rows) = run(SCALAR);
        let dir = tempfile::tempdir().unwrap();
        let m = write_outputs(&rows, &cfg, dir.path(), &RunInfo::default()).unwrap();
        assert_eq!(m.csv_files, vec!["results.csv"]);
        assert!(m.binary_files.is_empty());
        assert!(dir.path().join("manifest.json").exists());
        assert_eq!(m.points.len(), 3);
        assert!(m.points.iter().all(|p| p.n_fock == Some(8)));
    }

    #[test]
    fn field_points_get_one_file_each() {
        let text = format!("outputs = [\"mean_n\", \"qfield\"]\n{SCALAR}").replacen("count = 3", "count = 2", 1);
        let mut cfg = parse_config(&text).unwrap();
        cfg.grid = Some(crate::quasiprob::PhaseSpaceGrid::square(2.0, 11).unwrap());
        let rows = run_sweep(&cfg, RunOptions { threads: Some(1) }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let m = write_outputs(&rows, &cfg, dir.path(), &RunInfo::default()).unwrap();
        assert_eq!(m.csv_files, vec!["results.csv", "qfield_00000.csv", "qfield_00001.csv"]);
        let f = fs::read_to_string(dir.path().join("qfield_00001.csv")).unwrap();
        let back = crate::quasiprob::read_field_csv(&f).unwrap();
        assert_eq!(back.0.values, rows[1].fields[0].1.values);
    }

    #[test]
    fn results_round_trip_exactly() {
        let (cfg, rows) = run(SCALAR);
        let text = results_csv(&cfg, &rows);
        let t = read_results_csv(&text).unwrap();
        assert_eq!(t.header, results_header(&cfg));
        let n = t.values("mean_n").unwrap();
        for (r, v) in rows.iter().zip(n) {
            assert_eq!(v.unwrap().to_bits(), r.summary.as_ref().unwrap().mean_n.to_bits());
        }
        let g2 = t.column("g2").unwrap();
        // eps_d = 0 has no photons
        assert!(matches!(t.rows[0][g2], Cell::Number(v) if v.is_nan()));
    }

    #[test]
    fn output_is_thread_count_independent() {
        let cfg = parse_config(SCALAR).unwrap();
        let a = run_sweep(&cfg, RunOptions { threads: Some(1) }).unwrap();
        let b = run_sweep(&cfg, RunOptions { threads: Some(3) }).unwrap();
        assert_eq!(results_csv(&cfg, &a), results_csv(&cfg, &b));
    }

    #[test]
    fn malformed_results_rejected() {
        assert!(read_results_csv("").is_err());
        assert!(read_results_csv("a,b\n").is_err());
        assert!(read_results_csv("index,error\n1,x,y\n").is_err());
        assert!(read_results_csv("index,error\nq,\n").is_err());
    }

    #[test]
    fn hash_depends_on_truncation() {
        let p = ModelParams::resonant(1.0, 1.0, 1.0, 0.0, crate::C64::new(0.5, 0.0));
        assert_ne!(params_hash(&p, Some(10)), params_hash(&p, Some(11)));
        assert_eq!(params_hash(&p, None).len(), 64);
    }
}
