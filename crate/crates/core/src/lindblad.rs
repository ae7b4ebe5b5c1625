//! Liouvillian of the driven dissipative Jaynes-Cummings master equation and
//! its steady state.
//!
//! In the frame rotating at the drive frequency the generator reads
//!
//! ```text
//! dρ/dt = iΔω_c[a†a, ρ] + iΔω_q[σ₊σ₋, ρ] + g[a†σ₋ − aσ₊, ρ] + [ε_d a† − ε_d* a, ρ]
//!       + κ(2aρa† − ρa†a − a†aρ) + (γ/2)(2σ₋ρσ₊ − ρσ₊σ₋ − σ₊σ₋ρ)
//! ```
//!
//! and acts on column-stacked density matrices: `vec(ρ)[i + D·j] = ρ_ij`
//! with `D = 2·n_fock`, so that `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`.
//!
//! With this drive term an empty linear cavity relaxes to ⟨a⟩ = ε_d/(κ − iΔω_c).
//! The mean-field formulas in [`crate::semiclassical`] are written for a drive
//! that lags by a quarter period; [`crate::semiclassical::to_master_equation_frame`]
//! converts between the two.

use std::io::{self, Read, Write};

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hilbert::{
    DensityMatrix, HilbertDims, HilbertError, JointOps, Operator, Space, POSITIVITY_TOL,
};

/// Residual ‖L vec ρ‖₂ accepted for a steady state.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Unnormalized solutions larger than this indicate a rank-deficient system.
const DEGENERACY_NORM: f64 = 1e6;

#[derive(Debug, Error)]
pub enum LindbladError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error("invalid shape: Liouvillian acts on dimension {expected}, got {got}")]
    InvalidShape { expected: usize, got: usize },
    #[error("steady-state solver did not converge (residual {residual:.3e})")]
    NonConvergence { residual: f64 },
    #[error("steady state is not unique ({0})")]
    Multiplicity(String),
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("truncation did not converge up to {max_fock} Fock levels (relative change {change:.3e})")]
    Truncation { max_fock: usize, change: f64 },
    #[error("malformed Liouvillian dump: {0}")]
    Dump(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Physical rates and detunings of the model, all in one unit system.
///
/// `delta_omega_c = ω_d − ω_c` and `delta_omega_q = ω_d − ω_q`; the photon loss
/// rate is `2·kappa` and the qubit emission rate is `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub delta_omega_c: f64,
    pub delta_omega_q: f64,
    pub eps_d: C64,
}

impl ModelParams {
    /// Parameters with the qubit detuned *below* the cavity by `delta`
    /// (ω_q = ω_c − δ, so Δω_q = Δω_c + δ). In this configuration the dressed
    /// cavity resonance sits at Δω_c = g²/δ > 0.
    pub fn dispersive(
        g: f64,
        kappa: f64,
        gamma: f64,
        delta: f64,
        delta_omega_c: f64,
        eps_d: C64,
    ) -> Self {
        Self {
            g,
            kappa,
            gamma,
            delta_omega_c,
            delta_omega_q: delta_omega_c + delta,
            eps_d,
        }
    }

    /// Resonant qubit and cavity (δ = 0).
    pub fn resonant(g: f64, kappa: f64, gamma: f64, delta_omega_c: f64, eps_d: C64) -> Self {
        Self::dispersive(g, kappa, gamma, 0.0, delta_omega_c, eps_d)
    }

    pub fn validate(&self) -> Result<(), LindbladError> {
        let fields = [
            ("g", self.g),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("delta_omega_c", self.delta_omega_c),
            ("delta_omega_q", self.delta_omega_q),
            ("eps_d.re", self.eps_d.re),
            ("eps_d.im", self.eps_d.im),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(LindbladError::InvalidParams(format!("{name} is not finite")));
        }
        if self.kappa <= 0.0 {
            return Err(LindbladError::InvalidParams("kappa must be > 0".into()));
        }
        if self.gamma < 0.0 {
            return Err(LindbladError::InvalidParams("gamma must be >= 0".into()));
        }
        if self.g < 0.0 {
            return Err(LindbladError::InvalidParams("g must be >= 0".into()));
        }
        Ok(())
    }

    /// Qubit-cavity detuning δ = |Δω_q − Δω_c| = |ω_c − ω_q|.
    pub fn delta(&self) -> f64 {
        (self.delta_omega_q - self.delta_omega_c).abs()
    }

    /// C = g²/(κγ), defined for γ > 0.
    pub fn cooperativity(&self) -> Option<f64> {
        (self.gamma > 0.0).then(|| self.g * self.g / (self.kappa * self.gamma))
    }

    pub fn with_drive(self, eps_d: C64) -> Self {
        Self { eps_d, ..self }
    }

    /// Shifts the drive frequency: both detunings move together, δ is kept.
    pub fn with_drive_detuning(self, delta_omega_c: f64) -> Self {
        let shift = delta_omega_c - self.delta_omega_c;
        Self {
            delta_omega_c,
            delta_omega_q: self.delta_omega_q + shift,
            ..self
        }
    }
}

/// Sparse superoperator acting on column-stacked density matrices.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    dims: HilbertDims,
    params: Option<ModelParams>,
    matrix: SparseColMat<usize, C64>,
}

impl Liouvillian {
    pub fn dims(&self) -> HilbertDims {
        self.dims
    }

    /// Side length `(2·n_fock)²` of the superoperator.
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// Parameters the generator was built from; `None` for a loaded dump.
    pub fn params(&self) -> Option<&ModelParams> {
        self.params.as_ref()
    }

    pub fn matrix(&self) -> &SparseColMat<usize, C64> {
        &self.matrix
    }

    pub fn nnz(&self) -> usize {
        self.matrix.as_ref().val().len()
    }

    /// Iterates stored entries as `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        let m = self.matrix.as_ref();
        let sym = m.symbolic();
        let col_ptr = sym.col_ptr();
        let row_idx = sym.row_idx();
        let val = m.val();
        (0..m.ncols()).flat_map(move |j| {
            (col_ptr[j]..col_ptr[j + 1]).map(move |k| (row_idx[k], j, val[k]))
        })
    }

    /// `L · x`.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.size()];
        for (i, j, v) in self.entries() {
            y[i] += v * x[j];
        }
        y
    }

    /// Frobenius norm of the stored entries.
    pub fn frobenius_norm(&self) -> f64 {
        self.matrix
            .as_ref()
            .val()
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// ‖vec(1)† · L‖₂: vanishes when the generator preserves the trace.
    pub fn trace_preservation_residual(&self) -> f64 {
        let d = self.dims.total();
        let mut colsum = vec![C64::new(0.0, 0.0); self.size()];
        for (i, j, v) in self.entries() {
            if i % (d + 1) == 0 {
                colsum[j] += v;
            }
        }
        colsum.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Dense copy (small instances only).
    pub fn to_dense(&self) -> Array2<C64> {
        let n = self.size();
        let mut out = Array2::zeros((n, n));
        for (i, j, v) in self.entries() {
            out[[i, j]] += v;
        }
        out
    }

    fn from_triplets(
        dims: HilbertDims,
        triplets: &[Triplet<usize, usize, C64>],
    ) -> Result<Self, LindbladError> {
        let n = dims.total() * dims.total();
        let matrix = SparseColMat::try_new_from_triplets(n, n, triplets)
            .map_err(|e| LindbladError::Factorization(format!("{e:?}")))?;
        Ok(Self {
            dims,
            params: None,
            matrix,
        })
    }
}

pub fn vectorize(rho: &Array2<C64>) -> Vec<C64> {
    let d = rho.nrows();
    let mut v = Vec::with_capacity(d * d);
    for j in 0..d {
        for i in 0..d {
            v.push(rho[[i, j]]);
        }
    }
    v
}

pub fn unvectorize(v: &[C64], d: usize) -> Array2<C64> {
    Array2::from_shape_fn((d, d), |(i, j)| v[i + d * j])
}

/// Assembles the Liouvillian of the model on the given truncation.
///
/// Writing the coherent and anticommutator parts as ρ ↦ Kρ + ρK† with
/// K = −iH − ½Σ r c†c, the superoperator is
/// `1 ⊗ K + conj(K) ⊗ 1 + Σ r conj(c) ⊗ c`.
pub fn build_liouvillian(p: &ModelParams, dims: HilbertDims) -> Result<Liouvillian, LindbladError> {
    p.validate()?;
    let ops = JointOps::new(dims);
    let d = dims.total();
    let a = &ops.a;
    let ad = a.dagger();
    let sm = &ops.sigma_minus;
    let sp = sm.dagger();
    let i = C64::new(0.0, 1.0);
    let re = |x: f64| C64::new(x, 0.0);

    let n_op = ad.dot(a)?;
    let e_op = sp.dot(sm)?;
    // H = −Δω_c a†a − Δω_q σ₊σ₋ + ig(a†σ₋ − aσ₊) + i(ε a† − ε* a)
    let h = n_op
        .scale(re(-p.delta_omega_c))
        .add(&e_op.scale(re(-p.delta_omega_q)))?
        .add(&ad.dot(sm)?.sub(&a.dot(&sp)?)?.scale(i * p.g))?
        .add(&ad.scale(i * p.eps_d).sub(&a.scale(i * p.eps_d.conj()))?)?;

    let jumps: [(f64, &Operator, &Operator); 2] =
        [(2.0 * p.kappa, a, &n_op), (p.gamma, sm, &e_op)];

    let mut k_eff = h.scale(-i);
    for (rate, _, cdc) in &jumps {
        k_eff = k_eff.sub(&cdc.scale(re(0.5 * rate)))?;
    }

    let k_trip = k_eff.triplets();
    let mut triplets = Vec::with_capacity(2 * d * k_trip.len() + 4 * d * d);
    for &(r, c, v) in &k_trip {
        for blk in 0..d {
            // 1 ⊗ K
            triplets.push(Triplet::new(blk * d + r, blk * d + c, v));
            // conj(K) ⊗ 1
            triplets.push(Triplet::new(r * d + blk, c * d + blk, v.conj()));
        }
    }
    for (rate, c, _) in &jumps {
        if *rate == 0.0 {
            continue;
        }
        let ct = c.triplets();
        for &(k, l, x) in &ct {
            for &(r, s, y) in &ct {
                triplets.push(Triplet::new(k * d + r, l * d + s, re(*rate) * x.conj() * y));
            }
        }
    }
    let mut l = Liouvillian::from_triplets(dims, &triplets)?;
    l.params = Some(*p);
    Ok(l)
}

/// How a steady state was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMethod {
    /// Sparse LU of the generator with one population row replaced by the trace.
    TraceRowLu,
    /// Inverse iteration on a slightly shifted generator.
    ShiftInvert,
}

/// Steady state with solver diagnostics.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    pub residual: f64,
    pub min_eigenvalue: f64,
    pub replaced_row: usize,
    pub method: SolveMethod,
}

/// Population row (among `vec` indices `k·(D+1)`) with the largest diagonal
/// magnitude; ties go to the lowest index.
///
/// Only population rows can carry the trace constraint: the rows of L are
/// linearly dependent through the trace functional alone, so dropping a
/// coherence row would leave the system singular.
pub fn trace_row(l: &Liouvillian) -> usize {
    let d = l.dims.total();
    let mut diag = vec![0.0f64; d];
    for (i, j, v) in l.entries() {
        if i == j && i % (d + 1) == 0 {
            diag[i / (d + 1)] += v.norm();
        }
    }
    let mut best = 0;
    for (k, &m) in diag.iter().enumerate() {
        if m > diag[best] {
            best = k;
        }
    }
    best * (d + 1)
}

fn solve_col(lu: &impl Solve<C64>, rhs: &[C64]) -> Vec<C64> {
    let mut b = Mat::<C64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    lu.solve_in_place(b.as_mut());
    (0..rhs.len()).map(|i| b[(i, 0)]).collect()
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn finalize(l: &Liouvillian, x: &[C64]) -> Result<(Array2<C64>, f64), LindbladError> {
    let d = l.dims.total();
    let raw = unvectorize(x, d);
    let herm = Array2::from_shape_fn((d, d), |(i, j)| 0.5 * (raw[[i, j]] + raw[[j, i]].conj()));
    let tr = herm.diag().sum().re;
    if !tr.is_finite() || tr.abs() < 1e-300 {
        return Err(LindbladError::Multiplicity(
            "solution has vanishing trace".into(),
        ));
    }
    let rho = herm.mapv(|z| z / tr);
    let residual = norm2(&l.apply(&vectorize(&rho)));
    Ok((rho, residual))
}

/// Steady state ρ_ss with L vec(ρ_ss) = 0 and Tr ρ_ss = 1.
pub fn steady_state(l: &Liouvillian) -> Result<DensityMatrix, LindbladError> {
    Ok(solve_steady_state(l)?.rho)
}

/// Steady state with diagnostics; see [`steady_state`].
pub fn solve_steady_state(l: &Liouvillian) -> Result<SteadyState, LindbladError> {
    let dims = l.dims;
    let d = dims.total();
    let n = l.size();
    if let Some(p) = l.params() {
        if p.g == 0.0 && p.gamma == 0.0 {
            return Err(LindbladError::Multiplicity(
                "qubit is decoupled and undamped".into(),
            ));
        }
    }
    let r = trace_row(l);

    let mut triplets: Vec<Triplet<usize, usize, C64>> = l
        .entries()
        .filter(|&(i, _, _)| i != r)
        .map(|(i, j, v)| Triplet::new(i, j, v))
        .collect();
    for k in 0..d {
        triplets.push(Triplet::new(r, k * (d + 1), C64::new(1.0, 0.0)));
    }
    let constrained = SparseColMat::<usize, C64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| LindbladError::Factorization(format!("{e:?}")))?;
    let lu = constrained.sp_lu().map_err(|e| match e {
        faer::sparse::linalg::LuError::SymbolicSingular { index } => {
            LindbladError::Multiplicity(format!("structurally singular at pivot {index}"))
        }
        other => LindbladError::Factorization(format!("{other:?}")),
    })?;

    let mut b = vec![C64::new(0.0, 0.0); n];
    b[r] = C64::new(1.0, 0.0);
    let mut x = solve_col(&lu, &b);
    let xn = norm2(&x);
    if !xn.is_finite() || xn > DEGENERACY_NORM {
        return Err(LindbladError::Multiplicity(format!(
            "constrained system is singular (|x| = {xn:.3e})"
        )));
    }
    // two rounds of iterative refinement on the constrained system
    for _ in 0..2 {
        let mx = constrained_apply(l, r, d, &x);
        let res: Vec<C64> = b.iter().zip(&mx).map(|(bi, mi)| bi - mi).collect();
        let dx = solve_col(&lu, &res);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
    }

    let (mut rho, mut residual) = finalize(l, &x)?;
    let mut method = SolveMethod::TraceRowLu;
    if residual.is_nan() || residual > RESIDUAL_TOL {
        log::debug!("direct solve residual {residual:.3e}; falling back to shift-invert");
        let (r2, res2) = shift_invert(l, &x)?;
        if res2 < residual {
            rho = r2;
            residual = res2;
            method = SolveMethod::ShiftInvert;
        }
    }
    if residual.is_nan() || residual > RESIDUAL_TOL {
        return Err(LindbladError::NonConvergence { residual });
    }

    let rho = DensityMatrix::new_unchecked(Space::Joint(dims), rho);
    let min_eigenvalue = rho.min_eigenvalue()?;
    if min_eigenvalue < -POSITIVITY_TOL {
        log::warn!("steady state has eigenvalue {min_eigenvalue:.3e} below -{POSITIVITY_TOL:e}");
    }
    Ok(SteadyState {
        rho,
        residual,
        min_eigenvalue,
        replaced_row: r,
        method,
    })
}

/// Row-replaced product without materializing the modified matrix.
fn constrained_apply(l: &Liouvillian, r: usize, d: usize, x: &[C64]) -> Vec<C64> {
    let mut y = l.apply(x);
    y[r] = (0..d).map(|k| x[k * (d + 1)]).sum();
    y
}

/// Inverse iteration with (L − σ)⁻¹ for a small negative shift σ.
fn shift_invert(l: &Liouvillian, start: &[C64]) -> Result<(Array2<C64>, f64), LindbladError> {
    let n = l.size();
    let d = l.dims.total();
    let scale = l
        .entries()
        .filter(|(i, j, _)| i == j)
        .map(|(_, _, v)| v.norm())
        .fold(0.0, f64::max)
        .max(1.0);
    let sigma = -1e-7 * scale;
    let mut triplets: Vec<Triplet<usize, usize, C64>> = l
        .entries()
        .map(|(i, j, v)| Triplet::new(i, j, v))
        .collect();
    for k in 0..n {
        triplets.push(Triplet::new(k, k, C64::new(-sigma, 0.0)));
    }
    let shifted = SparseColMat::<usize, C64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| LindbladError::Factorization(format!("{e:?}")))?;
    let lu = shifted
        .sp_lu()
        .map_err(|e| LindbladError::Factorization(format!("{e:?}")))?;

    let mut x: Vec<C64> = if start.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        start.to_vec()
    } else {
        vectorize(&Array2::eye(d))
    };
    let mut best: Option<(Array2<C64>, f64)> = None;
    for _ in 0..30 {
        x = solve_col(&lu, &x);
        let nx = norm2(&x);
        if !nx.is_finite() || nx == 0.0 {
            break;
        }
        x.iter_mut().for_each(|z| *z /= nx);
        if let Ok((rho, res)) = finalize(l, &x) {
            let better = best.as_ref().is_none_or(|(_, b)| res < *b);
            if better {
                best = Some((rho, res));
            }
            if res <= RESIDUAL_TOL {
                break;
            }
        }
    }
    best.ok_or(LindbladError::NonConvergence {
        residual: f64::INFINITY,
    })
}

/// ‖L vec(ρ)‖₂.
pub fn residual_norm(l: &Liouvillian, rho: &DensityMatrix) -> Result<f64, LindbladError> {
    let d = l.dims.total();
    if rho.dim() != d {
        return Err(LindbladError::InvalidShape {
            expected: d,
            got: rho.dim(),
        });
    }
    Ok(norm2(&l.apply(&vectorize(rho.matrix()))))
}

/// Build and solve in one step.
pub fn solve(p: &ModelParams, dims: HilbertDims) -> Result<SteadyState, LindbladError> {
    solve_steady_state(&build_liouvillian(p, dims)?)
}

/// Adaptive truncation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveTruncation {
    /// Starting level count; `None` uses [`default_start_fock`].
    pub start: Option<usize>,
    /// Largest level count the doubling may reach. The LU fill of the
    /// generator grows steeply: N = 128 needs about 1 GB, N = 256 over 5 GB.
    pub max_fock: usize,
    /// Accepted relative change of ⟨a†a⟩ between N and 2N.
    pub rel_tol: f64,
}

impl Default for AdaptiveTruncation {
    fn default() -> Self {
        Self {
            start: None,
            max_fock: 128,
            rel_tol: 1e-3,
        }
    }
}

/// Upper bound applied to the heuristic starting level count.
pub const MAX_START_FOCK: usize = 64;

/// Starting truncation: max(20, ⌈8·n_scale⌉) in the dispersive regime (δ > g),
/// max(20, ⌈4(|ε_d|/κ)²⌉) otherwise, capped at [`MAX_START_FOCK`].
pub fn default_start_fock(p: &ModelParams) -> usize {
    let delta = p.delta();
    let estimate = if p.g > 0.0 && delta > p.g {
        8.0 * delta * delta / (4.0 * p.g * p.g)
    } else {
        4.0 * (p.eps_d.norm() / p.kappa).powi(2)
    };
    let n = if estimate.is_finite() {
        estimate.ceil() as usize
    } else {
        MAX_START_FOCK
    };
    n.clamp(20, MAX_START_FOCK)
}

/// Steady state at the accepted truncation N, for which ⟨a†a⟩ at N and 2N
/// agree to `rel_tol`.
#[derive(Debug, Clone)]
pub struct ConvergedSteadyState {
    pub state: SteadyState,
    pub n_fock: usize,
    pub mean_n: f64,
    pub mean_n_doubled: f64,
}

fn mean_photons(rho: &DensityMatrix) -> f64 {
    let d = rho.dim();
    (0..d).map(|k| (k / 2) as f64 * rho.matrix()[[k, k]].re).sum()
}

pub fn solve_adaptive(
    p: &ModelParams,
    opts: &AdaptiveTruncation,
) -> Result<ConvergedSteadyState, LindbladError> {
    let mut n = opts.start.unwrap_or_else(|| default_start_fock(p)).max(2);
    let mut current = solve(p, HilbertDims::new(n)?)?;
    let mut change = f64::INFINITY;
    while 2 * n <= opts.max_fock {
        let doubled = solve(p, HilbertDims::new(2 * n)?)?;
        let m1 = mean_photons(&current.rho);
        let m2 = mean_photons(&doubled.rho);
        change = (m2 - m1).abs() / m2.abs().max(1e-300);
        if (m2 - m1).abs() <= opts.rel_tol * m2.abs() + 1e-10 {
            return Ok(ConvergedSteadyState {
                state: current,
                n_fock: n,
                mean_n: m1,
                mean_n_doubled: m2,
            });
        }
        n *= 2;
        current = doubled;
    }
    Err(LindbladError::Truncation {
        max_fock: opts.max_fock,
        change,
    })
}

const DUMP_MAGIC: &[u8; 8] = b"JCQLIOU1";
/// Largest superoperator side accepted when reading a dump.
const DUMP_MAX_SIZE: u64 = 1 << 24;

/// Writes the Liouvillian in coordinate format, little-endian:
///
/// ```text
/// magic  8 bytes  "JCQLIOU1"
/// size   u64      side length (2·n_fock)²
/// nnz    u64      number of entries
/// nnz × { row u64, col u64, re f64, im f64 }
/// ```
pub fn write_dump<W: Write>(l: &Liouvillian, mut w: W) -> Result<(), LindbladError> {
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&(l.size() as u64).to_le_bytes())?;
    w.write_all(&(l.nnz() as u64).to_le_bytes())?;
    for (i, j, v) in l.entries() {
        w.write_all(&(i as u64).to_le_bytes())?;
        w.write_all(&(j as u64).to_le_bytes())?;
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

fn take_u64(buf: &[u8], pos: &mut usize) -> Result<u64, LindbladError> {
    let bytes = buf
        .get(*pos..*pos + 8)
        .ok_or_else(|| LindbladError::Dump("unexpected end of data".into()))?;
    *pos += 8;
    Ok(u64::from_le_bytes(bytes.try_into().expect("8 bytes")))
}

/// Parses a dump produced by [`write_dump`].
pub fn read_dump(buf: &[u8]) -> Result<Liouvillian, LindbladError> {
    if buf.len() < 24 || &buf[..8] != DUMP_MAGIC {
        return Err(LindbladError::Dump("bad magic".into()));
    }
    let mut pos = 8;
    let size = take_u64(buf, &mut pos)?;
    let nnz = take_u64(buf, &mut pos)?;
    if size == 0 || size > DUMP_MAX_SIZE {
        return Err(LindbladError::Dump(format!("unsupported size {size}")));
    }
    let side = (size as f64).sqrt().round() as u64;
    if side * side != size || !side.is_multiple_of(2) || side < 4 {
        return Err(LindbladError::Dump(format!(
            "size {size} is not (2·n_fock)² with n_fock >= 2"
        )));
    }
    let body = (buf.len() - pos) as u64;
    if nnz.checked_mul(32) != Some(body) {
        return Err(LindbladError::Dump(format!(
            "expected {nnz} entries, found {body} payload bytes"
        )));
    }
    let dims = HilbertDims::new((side / 2) as usize)?;
    let mut triplets = Vec::with_capacity(nnz as usize);
    for _ in 0..nnz {
        let row = take_u64(buf, &mut pos)?;
        let col = take_u64(buf, &mut pos)?;
        let re = f64::from_bits(take_u64(buf, &mut pos)?);
        let im = f64::from_bits(take_u64(buf, &mut pos)?);
        if row >= size || col >= size {
            return Err(LindbladError::Dump(format!("entry ({row}, {col}) out of range")));
        }
        if !re.is_finite() || !im.is_finite() {
            return Err(LindbladError::Dump("non-finite entry".into()));
        }
        triplets.push(Triplet::new(row as usize, col as usize, C64::new(re, im)));
    }
    Liouvillian::from_triplets(dims, &triplets)
        .map_err(|e| LindbladError::Dump(e.to_string()))
}

pub fn read_dump_from<R: Read>(mut r: R) -> Result<Liouvillian, LindbladError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    read_dump(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{annihilation, fock_state, qubit_ground, Operator};

    fn driven() -> ModelParams {
        ModelParams {
            g: 2.0,
            kappa: 0.7,
            gamma: 0.3,
            delta_omega_c: 0.4,
            delta_omega_q: -0.9,
            eps_d: C64::new(0.8, 0.3),
        }
    }

    /// Right-hand side of the master equation evaluated densely.
    fn rhs_dense(p: &ModelParams, dims: HilbertDims, rho: &Array2<C64>) -> Array2<C64> {
        let ops = JointOps::new(dims);
        let a = ops.a.matrix().clone();
        let ad = ops.a.dagger().matrix().clone();
        let sm = ops.sigma_minus.matrix().clone();
        let sp = ops.sigma_minus.dagger().matrix().clone();
        let i = C64::new(0.0, 1.0);
        let comm = |x: &Array2<C64>| x.dot(rho) - rho.dot(x);
        let n = ad.dot(&a);
        let e = sp.dot(&sm);
        let hop = ad.dot(&sm) - a.dot(&sp);
        let drive = ad.mapv(|z| z * p.eps_d) - a.mapv(|z| z * p.eps_d.conj());
        comm(&n).mapv(|z| z * i * p.delta_omega_c)
            + comm(&e).mapv(|z| z * i * p.delta_omega_q)
            + comm(&hop).mapv(|z| z * p.g)
            + comm(&drive)
            + (a.dot(rho).dot(&ad).mapv(|z| 2.0 * z) - rho.dot(&n) - n.dot(rho))
                .mapv(|z| z * p.kappa)
            + (sm.dot(rho).dot(&sp).mapv(|z| 2.0 * z) - rho.dot(&e) - e.dot(rho))
                .mapv(|z| z * 0.5 * p.gamma)
    }

    #[test]
    fn size_is_square_of_joint_dimension() {
        let l = build_liouvillian(&driven(), HilbertDims::new(3).unwrap()).unwrap();
        assert_eq!(l.size(), 36);
        assert_eq!(l.to_dense().dim(), (36, 36));
    }

    #[test]
    fn matches_dense_master_equation() {
        let dims = HilbertDims::new(4).unwrap();
        let p = driven();
        let l = build_liouvillian(&p, dims).unwrap();
        let d = dims.total();
        // arbitrary non-Hermitian test matrix
        let x = Array2::from_shape_fn((d, d), |(i, j)| {
            C64::new((i * 7 + j * 3) as f64 % 5.0 - 2.0, (i + 2 * j) as f64 % 3.0 - 1.0)
        });
        let lhs = unvectorize(&l.apply(&vectorize(&x)), d);
        let rhs = rhs_dense(&p, dims, &x);
        let err = (&lhs - &rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "max deviation {err}");
    }

    #[test]
    fn dark_state_is_annihilated() {
        let dims = HilbertDims::new(5).unwrap();
        let p = driven().with_drive(C64::new(0.0, 0.0));
        let l = build_liouvillian(&p, dims).unwrap();
        let ground = DensityMatrix::ground(dims);
        assert!(residual_norm(&l, &ground).unwrap() <= 1e-12);
        let ss = steady_state(&l).unwrap();
        let err = (ss.matrix() - ground.matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-8);
    }

    #[test]
    fn trace_preserving() {
        let l = build_liouvillian(&driven(), HilbertDims::new(5).unwrap()).unwrap();
        assert!(l.trace_preservation_residual() < 1e-10 * l.frobenius_norm().max(1.0));
    }

    #[test]
    fn mixed_state_has_positive_residual() {
        let dims = HilbertDims::new(4).unwrap();
        let l = build_liouvillian(&driven(), dims).unwrap();
        let mixed = DensityMatrix::maximally_mixed(Space::Joint(dims));
        assert!(residual_norm(&l, &mixed).unwrap() > 1e-3);
    }

    #[test]
    fn residual_rejects_wrong_shape() {
        let l = build_liouvillian(&driven(), HilbertDims::new(4).unwrap()).unwrap();
        let rho = DensityMatrix::ground(HilbertDims::new(3).unwrap());
        assert!(matches!(
            residual_norm(&l, &rho),
            Err(LindbladError::InvalidShape { .. })
        ));
    }

    #[test]
    fn steady_state_satisfies_invariants() {
        let dims = HilbertDims::new(12).unwrap();
        let ss = solve(&driven(), dims).unwrap();
        assert!(ss.residual <= RESIDUAL_TOL);
        assert!((ss.rho.trace().re - 1.0).abs() < 1e-10);
        assert!(ss.rho.hermiticity_error() < 1e-10);
        assert!(ss.min_eigenvalue > -1e-8);
        assert_eq!(ss.method, SolveMethod::TraceRowLu);
        assert_eq!(ss.replaced_row % (dims.total() + 1), 0);
    }

    #[test]
    fn linear_cavity_is_coherent() {
        let n = 30;
        let dims = HilbertDims::new(n).unwrap();
        let p = ModelParams {
            g: 0.0,
            kappa: 1.3,
            gamma: 1.0,
            delta_omega_c: 0.8,
            delta_omega_q: 0.1,
            eps_d: C64::new(1.1, -0.4),
        };
        let ss = solve(&p, dims).unwrap();
        let expected = p.eps_d / C64::new(p.kappa, -p.delta_omega_c);
        let a = annihilation(n).unwrap().on_cavity().unwrap();
        let mean: C64 = (ss.rho.matrix().dot(a.matrix())).diag().sum();
        assert!((mean - expected).norm() / expected.norm() < 1e-6);
    }

    #[test]
    fn undamped_decoupled_qubit_is_degenerate() {
        let p = ModelParams {
            g: 0.0,
            kappa: 1.0,
            gamma: 0.0,
            delta_omega_c: 0.5,
            delta_omega_q: 0.3,
            eps_d: C64::new(0.5, 0.0),
        };
        let err = solve(&p, HilbertDims::new(6).unwrap()).unwrap_err();
        assert!(
            matches!(err, LindbladError::Multiplicity(_)),
            "unexpected {err:?}"
        );
    }

    #[test]
    fn spectrum_in_left_half_plane() {
        let l = build_liouvillian(&driven(), HilbertDims::new(3).unwrap()).unwrap();
        let dense = l.to_dense();
        let n = dense.nrows();
        let m = Mat::<C64>::from_fn(n, n, |i, j| dense[[i, j]]);
        let eig = m.eigenvalues().unwrap();
        assert!(eig.iter().all(|z| z.re <= 1e-9));
        assert!(eig.iter().any(|z| z.norm() < 1e-9));
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = driven();
        p.kappa = 0.0;
        assert!(build_liouvillian(&p, HilbertDims::new(3).unwrap()).is_err());
        p.kappa = 1.0;
        p.gamma = -1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn derived_quantities() {
        let p = ModelParams::dispersive(3.0, 2.0, 0.5, 10.0, 1.0, C64::new(0.0, 0.0));
        assert_eq!(p.delta(), 10.0);
        assert_eq!(p.cooperativity(), Some(9.0));
        let shifted = p.with_drive_detuning(4.0);
        assert_eq!(shifted.delta(), 10.0);
        assert_eq!(shifted.delta_omega_q, 14.0);
    }

    #[test]
    fn dump_round_trip() {
        let l = build_liouvillian(&driven(), HilbertDims::new(3).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_dump(&l, &mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 32 * l.nnz());
        let back = read_dump(&buf).unwrap();
        assert_eq!(back.dims(), l.dims());
        let a: Vec<_> = l.entries().collect();
        let b: Vec<_> = back.entries().collect();
        assert_eq!(a, b);
        assert!(read_dump(&buf[..buf.len() - 1]).is_err());
        assert!(read_dump(b"JCQLIOU0aaaaaaaaaaaaaaaa").is_err());
    }

    #[test]
    fn ground_product_state_is_joint() {
        let dims = HilbertDims::new(3).unwrap();
        let psi = fock_state(0, 3).unwrap().tensor(&qubit_ground()).unwrap();
        let rho = DensityMatrix::from_pure(&psi);
        assert_eq!(rho, DensityMatrix::ground(dims));
        let _ = Operator::identity(Space::Joint(dims));
    }
}
