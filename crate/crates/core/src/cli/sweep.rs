//! Evaluation of every sweep point.

use rayon::prelude::*;
use thiserror::Error;

use crate::dispersive::{duffing_params, wigner_analytic_field};
use crate::hilbert::HilbertDims;
use crate::lindblad::{
    build_liouvillian, solve_adaptive, solve_steady_state, write_dump, ModelParams, SteadyState,
};
use crate::observables::{reduced_cavity, summarize, Summary};
use crate::quasiprob::{q_function, wigner_numeric, PhaseSpaceGrid, QuasiDistField};
use crate::semiclassical::{
    solve_duffing, solve_full, solve_kerr, solve_phase_bistability, solve_split_lorentzian,
    BranchSet, Equation,
};

use super::config::{Output, SweepConfig, Truncation};

/// Outcome of one sweep point.
#[derive(Debug, Clone)]
pub struct ResultRow {
    /// Position in the output order.
    pub index: usize,
    pub axis_index: Vec<usize>,
    pub coords: Vec<f64>,
    pub params: ModelParams,
    /// Truncation of the accepted steady state.
    pub n_fock: Option<usize>,
    pub residual: Option<f64>,
    pub summary: Option<Summary>,
    pub fields: Vec<(Output, QuasiDistField)>,
    pub branches: Vec<BranchSet>,
    pub dump: Option<Vec<u8>>,
    pub error: Option<String>,
}

impl ResultRow {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("all {} sweep points failed; first error: {}", rows.len(), rows.first().and_then(|r| r.error.clone()).unwrap_or_default())]
    AllFailed { rows: Vec<ResultRow> },
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker count; `None` uses the rayon default.
    pub threads: Option<usize>,
}

/// Evaluates all points of the sweep, in parallel over points.
///
/// The sparse factorizations are switched to sequential mode so each point
/// is computed identically regardless of scheduling; rows are returned in
/// lexicographic axis order.
pub fn run_sweep(cfg: &SweepConfig, opts: RunOptions) -> Result<Vec<ResultRow>, SweepError> {
    faer::set_global_parallelism(faer::Par::Seq);
    let points = cfg.points();
    let work = || -> Vec<ResultRow> {
        let mut rows: Vec<ResultRow> = points
            .par_iter()
            .enumerate()
            .map(|(index, (axis_index, coords, p))| {
                evaluate_point(cfg, index, axis_index.clone(), coords.clone(), *p)
            })
            .collect();
        rows.sort_by_key(|r| r.index);
        rows
    };
    let rows = match opts.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| SweepError::Pool(e.to_string()))?
            .install(work),
        None => work(),
    };
    if !rows.is_empty() && rows.iter().all(ResultRow::failed) {
        return Err(SweepError::AllFailed { rows });
    }
    Ok(rows)
}

fn solve_point(
    cfg: &SweepConfig,
    p: &ModelParams,
) -> Result<(SteadyState, usize, Option<Vec<u8>>), String> {
    let n = match cfg.truncation {
        Truncation::Fixed(n) => n,
        Truncation::Auto => solve_adaptive(p, &cfg.adaptive).map_err(|e| e.to_string())?.n_fock,
    };
    let dims = HilbertDims::new(n).map_err(|e| e.to_string())?;
    let l = build_liouvillian(p, dims).map_err(|e| e.to_string())?;
    let dump = if cfg.dump_liouvillian {
        let mut buf = Vec::new();
        write_dump(&l, &mut buf).map_err(|e| e.to_string())?;
        Some(buf)
    } else {
        None
    };
    let state = solve_steady_state(&l).map_err(|e| e.to_string())?;
    Ok((state, n, dump))
}

fn branches_for(eq: Equation, p: &ModelParams) -> Result<BranchSet, String> {
    let r = match eq {
        Equation::Full => solve_full(p),
        Equation::Kerr => solve_kerr(p),
        Equation::Duffing => solve_duffing(p),
        Equation::SplitLorentzian => solve_split_lorentzian(p),
        Equation::Phase => solve_phase_bistability(p).map(|ph| ph.to_branch_set(p)),
    };
    r.map_err(|e| format!("{eq}: {e}"))
}

/// Window for field outputs: the configured grid, or an automatic square
/// covering the mean-field amplitudes and the quantum photon number.
fn field_grid(cfg: &SweepConfig, p: &ModelParams, branches: &[BranchSet], summary: Option<&Summary>) -> Result<PhaseSpaceGrid, String> {
    if let Some(g) = cfg.grid {
        return Ok(g);
    }
    let mut alpha_max = summary.map(|s| s.mean_n.max(0.0).sqrt()).unwrap_or(0.0);
    let full;
    let sets: Vec<&BranchSet> = if branches.iter().any(|b| b.equation == Equation::Full) {
        branches.iter().collect()
    } else {
        full = solve_full(p).ok();
        branches.iter().chain(full.as_ref()).collect()
    };
    for set in sets {
        for b in &set.branches {
            alpha_max = alpha_max.max(b.alpha.norm());
        }
    }
    PhaseSpaceGrid::auto(alpha_max).map_err(|e| e.to_string())
}

fn evaluate_point(
    cfg: &SweepConfig,
    index: usize,
    axis_index: Vec<usize>,
    coords: Vec<f64>,
    p: ModelParams,
) -> ResultRow {
    let mut errors: Vec<String> = Vec::new();
    let mut row = ResultRow {
        index,
        axis_index,
        coords,
        params: p,
        n_fock: None,
        residual: None,
        summary: None,
        fields: Vec::new(),
        branches: Vec::new(),
        dump: None,
        error: None,
    };

    let mut rho_c = None;
    if cfg.needs_steady_state() {
        match solve_point(cfg, &p) {
            Ok((state, n, dump)) => {
                row.n_fock = Some(n);
                row.residual = Some(state.residual);
                row.dump = dump;
                match summarize(&state.rho) {
                    Ok(s) => row.summary = Some(s),
                    Err(e) => errors.push(e.to_string()),
                }
                match reduced_cavity(&state.rho) {
                    Ok(r) => rho_c = Some(r),
                    Err(e) => errors.push(e.to_string()),
                }
            }
            Err(e) => errors.push(e),
        }
    }

    if cfg.outputs.contains(&Output::Branches) {
        for &eq in &cfg.branch_equations {
            match branches_for(eq, &p) {
                Ok(set) => row.branches.push(set),
                Err(e) => errors.push(e),
            }
        }
    }

    if cfg.has_fields() {
        match field_grid(cfg, &p, &row.branches, row.summary.as_ref()) {
            Ok(grid) => {
                for out in cfg.outputs.iter().filter(|o| o.is_field()) {
                    let field = match out {
                        Output::Qfield => rho_c
                            .as_ref()
                            .map(|r| q_function(r, &grid).map_err(|e| e.to_string())),
                        Output::WfieldNumeric => rho_c
                            .as_ref()
                            .map(|r| wigner_numeric(r, &grid).map_err(|e| e.to_string())),
                        Output::WfieldAnalytic => Some(
                            duffing_params(&p)
                                .and_then(|dp| wigner_analytic_field(&dp, &grid))
                                .map_err(|e| e.to_string()),
                        ),
                        _ => None,
                    };
                    match field {
                        Some(Ok(f)) => row.fields.push((*out, f)),
                        Some(Err(e)) => errors.push(format!("{}: {e}", out.tag())),
                        // no steady state; already reported
                        None => {}
                    }
                }
            }
            Err(e) => errors.push(e),
        }
    }

    if !errors.is_empty() {
        row.error = Some(errors.join("; "));
    }
    row
}
