//! Operators and states on the truncated cavity ⊗ qubit Hilbert space.
//!
//! Basis ordering is cavity-major, qubit-minor: the joint basis state
//! |n⟩⊗|q⟩ sits at row `2n + q`, with `q = 0` the qubit ground state |g⟩ and
//! `q = 1` the excited state |e⟩. Every joint-space matrix in the crate uses
//! this ordering.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Tolerance on max |ρ − ρ†| accepted for a density matrix.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Tolerance on |Tr ρ − 1| accepted for a density matrix.
pub const TRACE_TOL: f64 = 1e-10;
/// Most negative eigenvalue still treated as numerical noise.
pub const POSITIVITY_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HilbertError {
    #[error("invalid dimension: n_fock = {0}, need at least 2 Fock levels")]
    InvalidDimension(usize),
    #[error("invalid shape: expected a square {expected}x{expected} matrix, got {rows}x{cols}")]
    InvalidShape {
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error("operator is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch { left: Space, right: Space },
    #[error("not a density matrix: {0}")]
    InvalidState(String),
    #[error("eigenvalue decomposition failed")]
    Eigen,
}

/// Dimensions of the truncated cavity (`n_fock` levels) ⊗ qubit space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HilbertDims {
    n_fock: usize,
}

impl HilbertDims {
    pub fn new(n_fock: usize) -> Result<Self, HilbertError> {
        if n_fock < 2 {
            return Err(HilbertError::InvalidDimension(n_fock));
        }
        Ok(Self { n_fock })
    }

    pub fn n_fock(&self) -> usize {
        self.n_fock
    }

    pub fn n_qubit(&self) -> usize {
        2
    }

    pub fn total(&self) -> usize {
        2 * self.n_fock
    }

    /// Joint-basis row of |n⟩⊗|q⟩.
    #[inline]
    pub fn index(&self, n: usize, q: usize) -> usize {
        debug_assert!(n < self.n_fock && q < 2);
        2 * n + q
    }
}

/// The space an operator or state lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Space {
    /// Cavity ⊗ qubit.
    Joint(HilbertDims),
    /// Cavity alone, with the given number of Fock levels.
    Cavity(usize),
    /// The two-level qubit.
    Qubit,
    /// Anything else (products of arbitrary factors).
    Generic(usize),
}

impl Space {
    pub fn dim(&self) -> usize {
        match self {
            Space::Joint(d) => d.total(),
            Space::Cavity(n) => *n,
            Space::Qubit => 2,
            Space::Generic(d) => *d,
        }
    }

    /// Number of Fock levels when the space contains the cavity.
    pub fn n_fock(&self) -> Option<usize> {
        match self {
            Space::Joint(d) => Some(d.n_fock()),
            Space::Cavity(n) => Some(*n),
            _ => None,
        }
    }
}

/// A square complex matrix tagged with the space it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: Space,
    data: Array2<C64>,
}

fn check_square(space: Space, data: &Array2<C64>) -> Result<(), HilbertError> {
    let (rows, cols) = data.dim();
    if rows != cols {
        return Err(HilbertError::NotSquare { rows, cols });
    }
    if rows != space.dim() {
        return Err(HilbertError::InvalidShape {
            expected: space.dim(),
            rows,
            cols,
        });
    }
    Ok(())
}

impl Operator {
    pub fn new(space: Space, data: Array2<C64>) -> Result<Self, HilbertError> {
        check_square(space, &data)?;
        Ok(Self { space, data })
    }

    /// Wraps a square matrix as an operator on a [`Space::Generic`] space.
    pub fn from_matrix(data: Array2<C64>) -> Result<Self, HilbertError> {
        let (rows, cols) = data.dim();
        if rows != cols {
            return Err(HilbertError::NotSquare { rows, cols });
        }
        Ok(Self {
            space: Space::Generic(rows),
            data,
        })
    }

    pub fn identity(space: Space) -> Self {
        Self {
            space,
            data: Array2::eye(space.dim()),
        }
    }

    pub fn zeros(space: Space) -> Self {
        let d = space.dim();
        Self {
            space,
            data: Array2::zeros((d, d)),
        }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[[row, col]]
    }

    pub fn dagger(&self) -> Self {
        Self {
            space: self.space,
            data: self.data.t().mapv(|z| z.conj()),
        }
    }

    fn check_same(&self, other: &Self) -> Result<(), HilbertError> {
        if self.dim() != other.dim() {
            return Err(HilbertError::DimensionMismatch {
                left: self.space,
                right: other.space,
            });
        }
        Ok(())
    }

    /// Matrix product `self · other`.
    pub fn dot(&self, other: &Self) -> Result<Self, HilbertError> {
        self.check_same(other)?;
        Ok(Self {
            space: self.space,
            data: self.data.dot(&other.data),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self, HilbertError> {
        self.check_same(other)?;
        Ok(Self {
            space: self.space,
            data: &self.data + &other.data,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, HilbertError> {
        self.check_same(other)?;
        Ok(Self {
            space: self.space,
            data: &self.data - &other.data,
        })
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            space: self.space,
            data: self.data.mapv(|z| z * factor),
        }
    }

    /// `[self, other]`.
    pub fn commutator(&self, other: &Self) -> Result<Self, HilbertError> {
        self.dot(other)?.sub(&other.dot(self)?)
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector, HilbertError> {
        if state.len() != self.dim() {
            return Err(HilbertError::DimensionMismatch {
                left: self.space,
                right: state.space,
            });
        }
        Ok(StateVector {
            space: self.space,
            amplitudes: self.data.dot(&state.amplitudes),
        })
    }

    /// Largest elementwise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Nonzero entries as `(row, col, value)` triplets.
    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        self.data
            .indexed_iter()
            .filter(|(_, v)| **v != ZERO)
            .map(|((i, j), v)| (i, j, *v))
            .collect()
    }

    /// Promotes a cavity operator to the joint space as `op ⊗ 1_qubit`.
    pub fn on_cavity(&self) -> Result<Self, HilbertError> {
        let n = match self.space {
            Space::Cavity(n) => n,
            other => {
                return Err(HilbertError::DimensionMismatch {
                    left: other,
                    right: Space::Cavity(self.dim()),
                })
            }
        };
        let dims = HilbertDims::new(n)?;
        let mut out = tensor_product(self, &Operator::identity(Space::Qubit))?;
        out.space = Space::Joint(dims);
        Ok(out)
    }

    /// Promotes a qubit operator to the joint space as `1_cavity ⊗ op`.
    pub fn on_qubit(&self, dims: HilbertDims) -> Result<Self, HilbertError> {
        if self.space != Space::Qubit {
            return Err(HilbertError::DimensionMismatch {
                left: self.space,
                right: Space::Qubit,
            });
        }
        let mut out = tensor_product(&Operator::identity(Space::Cavity(dims.n_fock())), self)?;
        out.space = Space::Joint(dims);
        Ok(out)
    }
}

/// Kronecker product `a ⊗ b`.
///
/// A cavity factor followed by a qubit factor yields a [`Space::Joint`]
/// operator; every other combination is [`Space::Generic`].
pub fn tensor_product(a: &Operator, b: &Operator) -> Result<Operator, HilbertError> {
    for op in [a, b] {
        let (rows, cols) = op.data.dim();
        if rows != cols {
            return Err(HilbertError::NotSquare { rows, cols });
        }
    }
    let (da, db) = (a.dim(), b.dim());
    let mut data = Array2::zeros((da * db, da * db));
    for ((i, j), &x) in a.data.indexed_iter() {
        if x == ZERO {
            continue;
        }
        for ((k, l), &y) in b.data.indexed_iter() {
            data[[i * db + k, j * db + l]] = x * y;
        }
    }
    let space = match (a.space, b.space) {
        (Space::Cavity(n), Space::Qubit) => Space::Joint(HilbertDims::new(n)?),
        _ => Space::Generic(da * db),
    };
    Ok(Operator { space, data })
}

/// Cavity annihilation operator with ⟨m−1|a|m⟩ = √m.
pub fn annihilation(n_fock: usize) -> Result<Operator, HilbertError> {
    if n_fock < 2 {
        return Err(HilbertError::InvalidDimension(n_fock));
    }
    let mut data = Array2::zeros((n_fock, n_fock));
    for m in 1..n_fock {
        data[[m - 1, m]] = C64::new((m as f64).sqrt(), 0.0);
    }
    Ok(Operator {
        space: Space::Cavity(n_fock),
        data,
    })
}

pub fn creation(n_fock: usize) -> Result<Operator, HilbertError> {
    Ok(annihilation(n_fock)?.dagger())
}

/// Photon number a†a, diagonal in the Fock basis.
pub fn number(n_fock: usize) -> Result<Operator, HilbertError> {
    if n_fock < 2 {
        return Err(HilbertError::InvalidDimension(n_fock));
    }
    let data = Array2::from_diag(&Array1::from_iter(
        (0..n_fock).map(|m| C64::new(m as f64, 0.0)),
    ));
    Ok(Operator {
        space: Space::Cavity(n_fock),
        data,
    })
}

/// Qubit lowering, raising and inversion operators `(σ₋, σ₊, σ_z)`, with
/// σ_z = 2σ₊σ₋ − 1.
pub fn qubit_ops() -> (Operator, Operator, Operator) {
    let mut lower = Array2::zeros((2, 2));
    lower[[0, 1]] = ONE;
    let lower = Operator {
        space: Space::Qubit,
        data: lower,
    };
    let raise = lower.dagger();
    let sz = raise
        .dot(&lower)
        .expect("2x2")
        .scale(C64::new(2.0, 0.0))
        .sub(&Operator::identity(Space::Qubit))
        .expect("2x2");
    (lower, raise, sz)
}

/// Joint-space operators used to assemble the master equation, all with
/// cavity-major ordering.
#[derive(Debug, Clone)]
pub struct JointOps {
    pub dims: HilbertDims,
    /// a ⊗ 1
    pub a: Operator,
    /// 1 ⊗ σ₋
    pub sigma_minus: Operator,
    /// 1 ⊗ σ_z
    pub sigma_z: Operator,
}

impl JointOps {
    pub fn new(dims: HilbertDims) -> Self {
        let a = annihilation(dims.n_fock())
            .and_then(|a| a.on_cavity())
            .expect("validated dims");
        let (sm, _, sz) = qubit_ops();
        Self {
            dims,
            a,
            sigma_minus: sm.on_qubit(dims).expect("qubit op"),
            sigma_z: sz.on_qubit(dims).expect("qubit op"),
        }
    }
}

/// A pure state on one of the [`Space`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    space: Space,
    amplitudes: Array1<C64>,
}

impl StateVector {
    pub fn new(space: Space, amplitudes: Array1<C64>) -> Result<Self, HilbertError> {
        if amplitudes.len() != space.dim() {
            return Err(HilbertError::InvalidShape {
                expected: space.dim(),
                rows: amplitudes.len(),
                cols: 1,
            });
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(HilbertError::InvalidState("non-finite amplitude".into()));
        }
        Ok(Self { space, amplitudes })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Probability weight lost to truncation, `1 − ‖ψ‖²`.
    pub fn truncation_loss(&self) -> f64 {
        1.0 - self.norm_sqr()
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            space: self.space,
            amplitudes: self.amplitudes.mapv(|z| z * factor),
        }
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        self.scale(C64::new(1.0 / n, 0.0))
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Self) -> C64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `self ⊗ other` with the same space tagging rules as [`tensor_product`].
    pub fn tensor(&self, other: &Self) -> Result<Self, HilbertError> {
        let db = other.len();
        let mut amps = Array1::zeros(self.len() * db);
        for (i, a) in self.amplitudes.iter().enumerate() {
            for (k, b) in other.amplitudes.iter().enumerate() {
                amps[i * db + k] = a * b;
            }
        }
        let space = match (self.space, other.space) {
            (Space::Cavity(n), Space::Qubit) => Space::Joint(HilbertDims::new(n)?),
            _ => Space::Generic(amps.len()),
        };
        Ok(Self {
            space,
            amplitudes: amps,
        })
    }
}

/// Fock state |n⟩ on `n_fock` levels.
pub fn fock_state(n: usize, n_fock: usize) -> Result<StateVector, HilbertError> {
    if n_fock < 2 {
        return Err(HilbertError::InvalidDimension(n_fock));
    }
    if n >= n_fock {
        return Err(HilbertError::InvalidShape {
            expected: n_fock,
            rows: n + 1,
            cols: 1,
        });
    }
    let mut amps = Array1::zeros(n_fock);
    amps[n] = ONE;
    Ok(StateVector {
        space: Space::Cavity(n_fock),
        amplitudes: amps,
    })
}

pub fn qubit_ground() -> StateVector {
    StateVector {
        space: Space::Qubit,
        amplitudes: Array1::from_vec(vec![ONE, ZERO]),
    }
}

pub fn qubit_excited() -> StateVector {
    StateVector {
        space: Space::Qubit,
        amplitudes: Array1::from_vec(vec![ZERO, ONE]),
    }
}

/// Truncated coherent-state amplitudes e^{−|α|²/2} αᵐ/√(m!), m < n.
pub(crate) fn coherent_amplitudes(alpha: C64, n: usize) -> Array1<C64> {
    let mut amps = Array1::zeros(n);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for (m, slot) in amps.iter_mut().enumerate() {
        if m > 0 {
            c = c * alpha / (m as f64).sqrt();
        }
        *slot = c;
    }
    amps
}

/// Coherent state |α⟩ truncated to `n_fock` levels (not renormalized; the
/// missing weight is [`StateVector::truncation_loss`]).
pub fn coherent_state(alpha: C64, n_fock: usize) -> Result<StateVector, HilbertError> {
    if n_fock < 2 {
        return Err(HilbertError::InvalidDimension(n_fock));
    }
    if alpha.norm_sqr() > n_fock as f64 / 2.0 {
        log::warn!(
            "coherent state |α|² = {:.3} exceeds half the truncation ({n_fock} levels)",
            alpha.norm_sqr()
        );
    }
    Ok(StateVector {
        space: Space::Cavity(n_fock),
        amplitudes: coherent_amplitudes(alpha, n_fock),
    })
}

/// A density matrix tagged with its space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: Space,
    data: Array2<C64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(space: Space, data: Array2<C64>) -> Result<Self, HilbertError> {
        check_square(space, &data)?;
        let rho = Self { space, data };
        let herm = rho.hermiticity_error();
        if herm > HERMITICITY_TOL {
            return Err(HilbertError::InvalidState(format!(
                "not Hermitian (max |ρ − ρ†| = {herm:.3e})"
            )));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(HilbertError::InvalidState(format!("trace = {tr}")));
        }
        let min = rho.min_eigenvalue()?;
        if min < -POSITIVITY_TOL {
            return Err(HilbertError::InvalidState(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(rho)
    }

    /// Wraps a matrix known to be a valid state (produced internally).
    pub(crate) fn new_unchecked(space: Space, data: Array2<C64>) -> Self {
        Self { space, data }
    }

    /// |ψ⟩⟨ψ| of the normalized state.
    pub fn from_pure(psi: &StateVector) -> Self {
        let psi = psi.normalized();
        let v = psi.amplitudes();
        let d = v.len();
        let data = Array2::from_shape_fn((d, d), |(i, j)| v[i] * v[j].conj());
        Self {
            space: psi.space(),
            data,
        }
    }

    /// |0⟩⟨0| ⊗ |g⟩⟨g|.
    pub fn ground(dims: HilbertDims) -> Self {
        let mut data = Array2::zeros((dims.total(), dims.total()));
        data[[0, 0]] = ONE;
        Self {
            space: Space::Joint(dims),
            data,
        }
    }

    /// 1/d on the whole space.
    pub fn maximally_mixed(space: Space) -> Self {
        let d = space.dim();
        Self {
            space,
            data: Array2::eye(d).mapv(|z: C64| z / d as f64),
        }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn trace(&self) -> C64 {
        self.data.diag().sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.data[[i, j]] - self.data[[j, i]].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>, HilbertError> {
        let d = self.dim();
        let m = faer::Mat::<C64>::from_fn(d, d, |i, j| {
            0.5 * (self.data[[i, j]] + self.data[[j, i]].conj())
        });
        m.self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|_| HilbertError::Eigen)
    }

    pub fn min_eigenvalue(&self) -> Result<f64, HilbertError> {
        Ok(self
            .eigenvalues()?
            .first()
            .copied()
            .unwrap_or(f64::INFINITY))
    }

    /// Tr ρ².
    pub fn purity(&self) -> f64 {
        // Tr(ρρ) = Σ_ij ρ_ij ρ_ji = Σ_ij |ρ_ij|² for Hermitian ρ
        self.data
            .indexed_iter()
            .map(|((i, j), v)| (v * self.data[[j, i]]).re)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn ladder_action() {
        let a = annihilation(4).unwrap();
        let out = a.apply(&fock_state(2, 4).unwrap()).unwrap();
        let expected = fock_state(1, 4).unwrap().scale(c(2f64.sqrt(), 0.0));
        for (x, y) in out.amplitudes().iter().zip(expected.amplitudes()) {
            assert!((x - y).norm() < 1e-15);
        }
        let vac = a.apply(&fock_state(0, 4).unwrap()).unwrap();
        assert_eq!(vac.norm_sqr(), 0.0);
    }

    #[test]
    fn commutator_identity_below_top_level() {
        let n = 6;
        let a = annihilation(n).unwrap();
        let comm = a.commutator(&a.dagger()).unwrap();
        for i in 0..n {
            for j in 0..n {
                let expected = if i == j {
                    if i == n - 1 {
                        -((n - 1) as f64)
                    } else {
                        1.0
                    }
                } else {
                    0.0
                };
                assert!((comm.get(i, j) - c(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_single_level() {
        assert_eq!(
            annihilation(1).unwrap_err(),
            HilbertError::InvalidDimension(1)
        );
        assert!(HilbertDims::new(1).is_err());
    }

    #[test]
    fn pauli_algebra() {
        let (sm, sp, sz) = qubit_ops();
        let g = qubit_ground();
        let out = sz.apply(&g).unwrap();
        assert_eq!(out.amplitudes()[0], c(-1.0, 0.0));
        let anti = sp.dot(&sm).unwrap().add(&sm.dot(&sp).unwrap()).unwrap();
        assert!(anti.max_abs_diff(&Operator::identity(Space::Qubit)) < 1e-15);
        assert_eq!(sz.get(1, 1), c(1.0, 0.0));
        assert_eq!(sz.get(0, 0), c(-1.0, 0.0));
        let lowered = sm.apply(&qubit_excited()).unwrap();
        assert_eq!(lowered, g);
    }

    #[test]
    fn kron_dims_and_identity() {
        let i3 = Operator::identity(Space::Generic(3));
        let i2 = Operator::identity(Space::Generic(2));
        let i6 = tensor_product(&i3, &i2).unwrap();
        assert!(i6.max_abs_diff(&Operator::identity(Space::Generic(6))) == 0.0);
        let a = annihilation(4).unwrap();
        let (sm, _, _) = qubit_ops();
        let j = tensor_product(&a, &sm).unwrap();
        assert_eq!(j.dim(), 8);
        assert_eq!(j.space(), Space::Joint(HilbertDims::new(4).unwrap()));
    }

    #[test]
    fn kron_rejects_non_square() {
        let bad = Operator {
            space: Space::Generic(2),
            data: Array2::zeros((2, 3)),
        };
        let ok = Operator::identity(Space::Qubit);
        assert!(matches!(
            tensor_product(&bad, &ok),
            Err(HilbertError::NotSquare { .. })
        ));
        assert!(Operator::from_matrix(Array2::zeros((2, 3))).is_err());
    }

    #[test]
    fn basis_ordering_is_cavity_major() {
        let dims = HilbertDims::new(3).unwrap();
        let psi = fock_state(2, 3)
            .unwrap()
            .tensor(&qubit_excited())
            .unwrap();
        assert_eq!(psi.amplitudes()[dims.index(2, 1)], ONE);
        assert_eq!(dims.index(2, 1), 5);
    }

    #[test]
    fn coherent_state_limits() {
        let vac = coherent_state(C64::new(0.0, 0.0), 10).unwrap();
        assert_eq!(vac, fock_state(0, 10).unwrap());
        let psi = coherent_state(c(1.0, 0.0), 30).unwrap();
        assert!(psi.truncation_loss().abs() < 1e-10);
    }

    #[test]
    fn coherent_state_is_eigenstate() {
        let n = 60;
        let alpha = c(0.8, -0.6);
        let psi = coherent_state(alpha, n).unwrap();
        let lhs = annihilation(n).unwrap().apply(&psi).unwrap();
        let rhs = psi.scale(alpha);
        let err: f64 = lhs
            .amplitudes()
            .iter()
            .zip(rhs.amplitudes())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err / rhs.norm_sqr().sqrt() < 1e-6);
    }

    #[test]
    fn truncation_loss_decreases_with_levels() {
        let alpha = c(1.5, 0.7);
        let mut prev = f64::INFINITY;
        for n in 2..30 {
            let loss = coherent_state(alpha, n).unwrap().truncation_loss();
            assert!(loss <= prev + 1e-16);
            prev = loss;
        }
    }

    #[test]
    fn density_matrix_validation() {
        let dims = HilbertDims::new(3).unwrap();
        let g = DensityMatrix::ground(dims);
        assert!(DensityMatrix::new(g.space(), g.matrix().clone()).is_ok());
        let mut bad = g.matrix().clone();
        bad[[0, 1]] = c(0.1, 0.0);
        assert!(DensityMatrix::new(g.space(), bad).is_err());
        let mut neg = Array2::zeros((2, 2));
        neg[[0, 0]] = c(1.5, 0.0);
        neg[[1, 1]] = c(-0.5, 0.0);
        assert!(DensityMatrix::new(Space::Qubit, neg).is_err());
        let mixed = DensityMatrix::maximally_mixed(Space::Qubit);
        assert!((mixed.purity() - 0.5).abs() < 1e-15);
    }
}
