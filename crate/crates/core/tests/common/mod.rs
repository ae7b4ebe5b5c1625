#![allow(dead_code)]

pub mod ddouble;

use jcq::hilbert::{HERMITICITY_TOL, POSITIVITY_TOL, TRACE_TOL};
use jcq::lindblad::{SteadyState, RESIDUAL_TOL};
use jcq::observables::Summary;

/// Worst violations of the steady-state bounds over many solves.
#[derive(Debug, Default, Clone)]
pub struct Invariants {
    pub states: usize,
    pub trace_err: f64,
    pub herm_err: f64,
    pub min_eig: f64,
    pub residual: f64,
    pub entropy_violation: f64,
}

impl Invariants {
    pub fn record(&mut self, s: &SteadyState, summary: &Summary) {
        self.states += 1;
        self.trace_err = self.trace_err.max((s.rho.trace().re - 1.0).abs().max(s.rho.trace().im.abs()));
        self.herm_err = self.herm_err.max(s.rho.hermiticity_error());
        self.min_eig = self.min_eig.min(s.min_eigenvalue);
        self.residual = self.residual.max(s.residual);
        let ln2 = std::f64::consts::LN_2;
        let over = (summary.entropy - ln2).max(-summary.entropy).max(0.0);
        self.entropy_violation = self.entropy_violation.max(over);
    }

    pub fn ok(&self) -> bool {
        self.trace_err <= TRACE_TOL
            && self.herm_err <= HERMITICITY_TOL
            && self.min_eig >= -POSITIVITY_TOL
            && self.residual <= RESIDUAL_TOL
            && self.entropy_violation == 0.0
    }

    pub fn describe(&self) -> String {
        format!(
            "{} states: |tr-1| {:.1e}, herm {:.1e}, min eig {:.1e}, residual {:.1e}, entropy excess {:.1e}",
            self.states, self.trace_err, self.herm_err, self.min_eig, self.residual, self.entropy_violation
        )
    }
}
