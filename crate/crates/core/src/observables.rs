//! Expectation values, reduced states, qubit-cavity entanglement entropy and
//! zero-delay photon correlations.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hilbert::{DensityMatrix, HilbertDims, HilbertError, JointOps, Operator, Space};

/// Slack on the reduced-qubit invariants.
pub const QUBIT_TOL: f64 = 1e-10;
/// Largest eigenvalue excursion outside [0, 1] absorbed by clipping.
pub const CLIP_TOL: f64 = 1e-8;
/// ⟨n⟩ at or below this leaves g²(0) undefined.
pub const MIN_PHOTONS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ObservablesError {
    #[error("shape mismatch: state on {state:?}, operator on {op:?}")]
    ShapeMismatch { state: Space, op: Space },
    #[error("expected a joint cavity-qubit state, got {0:?}")]
    NotJoint(Space),
    #[error("unknown subsystem `{0}` (expected `cavity` or `qubit`)")]
    InvalidSubsystem(String),
    #[error("invalid reduced qubit state: {0}")]
    InvalidState(String),
    #[error("g2(0) undefined for <n> = {0:.3e}")]
    Undefined(f64),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}

/// Tr(ρ·op).
pub fn expectation(rho: &DensityMatrix, op: &Operator) -> Result<C64, ObservablesError> {
    if rho.dim() != op.dim() || !compatible(rho.space(), op.space()) {
        return Err(ObservablesError::ShapeMismatch {
            state: rho.space(),
            op: op.space(),
        });
    }
    let r = rho.matrix();
    let o = op.matrix();
    let d = rho.dim();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += r[[i, j]] * o[[j, i]];
        }
    }
    Ok(acc)
}

fn compatible(a: Space, b: Space) -> bool {
    matches!((a, b), (Space::Generic(_), _) | (_, Space::Generic(_))) || a == b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subsystem {
    Cavity,
    Qubit,
}

impl FromStr for Subsystem {
    type Err = ObservablesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cavity" | "c" => Ok(Self::Cavity),
            "qubit" | "q" => Ok(Self::Qubit),
            _ => Err(ObservablesError::InvalidSubsystem(s.to_string())),
        }
    }
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cavity => "cavity",
            Self::Qubit => "qubit",
        })
    }
}

/// Reduced qubit state in the {|g⟩, |e⟩} basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitReduced {
    pub rho_gg: f64,
    pub rho_ee: f64,
    /// ⟨g|ρ_q|e⟩
    pub rho_ge: C64,
}

impl QubitReduced {
    pub fn new(rho_gg: f64, rho_ee: f64, rho_ge: C64) -> Result<Self, ObservablesError> {
        let q = Self {
            rho_gg,
            rho_ee,
            rho_ge,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<(), ObservablesError> {
        let bad = |msg: String| Err(ObservablesError::InvalidState(msg));
        if ![self.rho_gg, self.rho_ee, self.rho_ge.re, self.rho_ge.im]
            .iter()
            .all(|v| v.is_finite())
        {
            return bad("non-finite entry".into());
        }
        if (self.rho_gg + self.rho_ee - 1.0).abs() > QUBIT_TOL {
            return bad(format!("trace {}", self.rho_gg + self.rho_ee));
        }
        for (name, v) in [("rho_gg", self.rho_gg), ("rho_ee", self.rho_ee)] {
            if !(-QUBIT_TOL..=1.0 + QUBIT_TOL).contains(&v) {
                return bad(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if self.rho_ge.norm_sqr() > self.rho_gg * self.rho_ee + QUBIT_TOL {
            return bad(format!(
                "|rho_ge|^2 = {} exceeds rho_gg*rho_ee = {}",
                self.rho_ge.norm_sqr(),
                self.rho_gg * self.rho_ee
            ));
        }
        Ok(())
    }

    /// λ₁,₂ = ½[1 ± √((ρ_gg − ρ_ee)² + 4|ρ_ge|²)], largest first.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let root = ((self.rho_gg - self.rho_ee).powi(2) + 4.0 * self.rho_ge.norm_sqr()).sqrt();
        (0.5 * (1.0 + root), 0.5 * (1.0 - root))
    }

    pub fn purity(&self) -> f64 {
        self.rho_gg.powi(2) + self.rho_ee.powi(2) + 2.0 * self.rho_ge.norm_sqr()
    }

    /// ⟨σ₋⟩ = ⟨e|ρ_q|g⟩.
    pub fn sigma_minus(&self) -> C64 {
        self.rho_ge.conj()
    }

    /// ⟨σ_z⟩ = ρ_ee − ρ_gg.
    pub fn sigma_z(&self) -> f64 {
        self.rho_ee - self.rho_gg
    }

    pub fn to_density_matrix(&self) -> DensityMatrix {
        let m = ndarray::array![
            [C64::new(self.rho_gg, 0.0), self.rho_ge],
            [self.rho_ge.conj(), C64::new(self.rho_ee, 0.0)]
        ];
        DensityMatrix::new_unchecked(Space::Qubit, m)
    }
}

#[derive(Debug, Clone)]
pub enum Reduced {
    Cavity(DensityMatrix),
    Qubit(QubitReduced),
}

fn joint_dims(rho: &DensityMatrix) -> Result<HilbertDims, ObservablesError> {
    match rho.space() {
        Space::Joint(d) => Ok(d),
        other => Err(ObservablesError::NotJoint(other)),
    }
}

/// Keeps one subsystem and traces out the other.
pub fn partial_trace(rho: &DensityMatrix, keep: Subsystem) -> Result<Reduced, ObservablesError> {
    Ok(match keep {
        Subsystem::Cavity => Reduced::Cavity(reduced_cavity(rho)?),
        Subsystem::Qubit => Reduced::Qubit(reduced_qubit(rho)?),
    })
}

/// ρ_c[n, m] = Σ_q ρ[(n, q), (m, q)].
pub fn reduced_cavity(rho: &DensityMatrix) -> Result<DensityMatrix, ObservablesError> {
    let dims = joint_dims(rho)?;
    let n = dims.n_fock();
    let r = rho.matrix();
    let out = Array2::from_shape_fn((n, n), |(i, j)| {
        (0..2)
            .map(|q| r[[dims.index(i, q), dims.index(j, q)]])
            .sum::<C64>()
    });
    Ok(DensityMatrix::new_unchecked(Space::Cavity(n), out))
}

/// ρ_q[q, q'] = Σ_n ρ[(n, q), (n, q')].
pub fn reduced_qubit(rho: &DensityMatrix) -> Result<QubitReduced, ObservablesError> {
    let dims = joint_dims(rho)?;
    let r = rho.matrix();
    let block = |q: usize, qp: usize| -> C64 {
        (0..dims.n_fock())
            .map(|k| r[[dims.index(k, q), dims.index(k, qp)]])
            .sum()
    };
    QubitReduced::new(block(0, 0).re, block(1, 1).re, block(0, 1))
}

/// Von Neumann entropy −Σ λ ln λ of the reduced qubit state (natural log).
pub fn entanglement_entropy(rq: &QubitReduced) -> Result<f64, ObservablesError> {
    rq.validate()?;
    let (l1, l2) = rq.eigenvalues();
    let mut s = 0.0;
    for l in [l1, l2] {
        if !(-CLIP_TOL..=1.0 + CLIP_TOL).contains(&l) {
            return Err(ObservablesError::InvalidState(format!(
                "eigenvalue {l} outside [0, 1]"
            )));
        }
        let l = l.clamp(0.0, 1.0);
        if l > 0.0 {
            s -= l * l.ln();
        }
    }
    Ok(s.max(0.0))
}

/// Photon-number distribution p_n of a joint or cavity state.
pub fn photon_distribution(rho: &DensityMatrix) -> Result<Vec<f64>, ObservablesError> {
    let r = rho.matrix();
    match rho.space() {
        Space::Joint(d) => Ok((0..d.n_fock())
            .map(|n| r[[d.index(n, 0), d.index(n, 0)]].re + r[[d.index(n, 1), d.index(n, 1)]].re)
            .collect()),
        Space::Cavity(n) => Ok((0..n).map(|k| r[[k, k]].re).collect()),
        other => Err(ObservablesError::NotJoint(other)),
    }
}

/// ⟨a†a⟩.
pub fn mean_photon_number(rho: &DensityMatrix) -> Result<f64, ObservablesError> {
    Ok(photon_distribution(rho)?
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum())
}

/// g²(0) = ⟨a†a†aa⟩/⟨a†a⟩²; both operators are diagonal in the Fock basis.
pub fn g2_zero(rho: &DensityMatrix) -> Result<f64, ObservablesError> {
    let p = photon_distribution(rho)?;
    let (mut n1, mut n2) = (0.0, 0.0);
    for (n, pn) in p.iter().enumerate() {
        let n = n as f64;
        n1 += n * pn;
        n2 += n * (n - 1.0) * pn;
    }
    if n1 <= MIN_PHOTONS {
        return Err(ObservablesError::Undefined(n1));
    }
    Ok((n2 / (n1 * n1)).max(0.0))
}

/// Scalar observables of a joint steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean_a: C64,
    pub mean_n: f64,
    pub sigma_minus: C64,
    pub sigma_z: f64,
    pub entropy: f64,
    /// `None` when ⟨n⟩ vanishes.
    pub g2: Option<f64>,
}

pub fn summarize(rho: &DensityMatrix) -> Result<Summary, ObservablesError> {
    let dims = joint_dims(rho)?;
    let ops = JointOps::new(dims);
    let rq = reduced_qubit(rho)?;
    let g2 = match g2_zero(rho) {
        Ok(v) => Some(v),
        Err(ObservablesError::Undefined(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(Summary {
        mean_a: expectation(rho, &ops.a)?,
        mean_n: mean_photon_number(rho)?,
        sigma_minus: rq.sigma_minus(),
        sigma_z: rq.sigma_z(),
        entropy: entanglement_entropy(&rq)?,
        g2,
    })
}
