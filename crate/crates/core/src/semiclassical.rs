//! Mean-field and neoclassical steady states of the driven cavity.
//!
//! Every solver reduces its fixed-point equation α = F(|α|²) to a scalar
//! root problem in n = |α|² and maps each root back to α = F(n).
//!
//! Amplitudes here follow the usual mean-field convention in which an empty
//! linear cavity responds as α = −iε_d/(κ − iΔω_c). The master equation in
//! [`crate::lindblad`] uses a drive term that leads by a quarter period, so
//! the corresponding quantum amplitude is iα; see [`to_master_equation_frame`].
//!
//! The detuning δ entering the dispersive formulas is signed,
//! δ = Δω_q − Δω_c = ω_c − ω_q, positive when the qubit lies below the cavity.
//! This is the sign for which the large-detuning limit of [`solve_full`]
//! reproduces [`solve_kerr`].

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lindblad::ModelParams;
use crate::numfmt::{parse_f64, sci17};

/// Lower end of the logarithmic bracketing grid.
pub const SCAN_MIN: f64 = 1e-8;
/// Intervals of the bracketing grid.
pub const SCAN_POINTS: usize = 4000;
pub const BISECT_REL_TOL: f64 = 1e-12;
/// Roots closer than this (relative) are one double root.
pub const MERGE_REL_TOL: f64 = 1e-9;
/// Fixed-point residual |α − F(|α|²)| ≤ RESIDUAL_TOL·(1 + |α|).
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemiclassicalError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("root finding failed on [{lo:e}, {hi:e}] (f = {f_lo:e}, {f_hi:e})")]
    RootFinding {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("malformed branch file at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Full,
    Kerr,
    Duffing,
    SplitLorentzian,
    Phase,
}

impl Equation {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Kerr => "kerr",
            Self::Duffing => "duffing",
            Self::SplitLorentzian => "split_lorentzian",
            Self::Phase => "phase",
        }
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Equation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Self::Full,
            Self::Kerr,
            Self::Duffing,
            Self::SplitLorentzian,
            Self::Phase,
        ]
        .into_iter()
        .find(|e| e.tag() == s)
        .ok_or_else(|| format!("unknown equation tag `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Unknown,
}

impl Stability {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::Stable => "stable",
            Self::Unstable => "unstable",
            Self::Unknown => "unknown",
        }
    }
}

impl FromStr for Stability {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stable" => Ok(Self::Stable),
            "unstable" => Ok(Self::Unstable),
            "unknown" => Ok(Self::Unknown),
            _ => Err(format!("unknown stability `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub alpha: C64,
    /// |α|²
    pub n: f64,
    pub stability: Stability,
    /// ∓ choice of the split-Lorentzian and phase equations (−1 or +1).
    pub sign: Option<i8>,
    /// |α − F(|α|²)|
    pub residual: f64,
}

impl Branch {
    /// Amplitude in the convention of the master equation, iα.
    pub fn master_equation_alpha(&self) -> C64 {
        to_master_equation_frame(self.alpha)
    }
}

/// Mean-field amplitude → ⟨a⟩ convention of [`crate::lindblad`].
pub fn to_master_equation_frame(alpha: C64) -> C64 {
    C64::new(0.0, 1.0) * alpha
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSet {
    pub equation: Equation,
    /// Ordered by n.
    pub branches: Vec<Branch>,
    /// Stability follows the S-curve rule rather than a linear stability analysis.
    pub labels_assumed: bool,
}

impl BranchSet {
    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.branches.iter().map(|b| b.residual).fold(0.0, f64::max)
    }

    /// Whether every branch satisfies the residual bound.
    pub fn residuals_ok(&self) -> bool {
        self.branches
            .iter()
            .all(|b| b.residual <= RESIDUAL_TOL * (1.0 + b.alpha.norm()))
    }

    pub fn n_values(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.n).collect()
    }
}

/// δ²/(4g²).
pub fn n_scale(p: &ModelParams) -> Result<f64, SemiclassicalError> {
    let delta = p.delta();
    if p.g <= 0.0 || delta <= 0.0 {
        return Err(SemiclassicalError::Domain(
            "n_scale needs g > 0 and a nonzero detuning".into(),
        ));
    }
    Ok(delta * delta / (4.0 * p.g * p.g))
}

fn signed_delta(p: &ModelParams) -> Result<f64, SemiclassicalError> {
    let d = p.delta_omega_q - p.delta_omega_c;
    if d == 0.0 {
        return Err(SemiclassicalError::Domain(
            "dispersive equations need a nonzero qubit-cavity detuning".into(),
        ));
    }
    Ok(d)
}

fn check(p: &ModelParams) -> Result<(), SemiclassicalError> {
    p.validate()
        .map_err(|e| SemiclassicalError::Domain(e.to_string()))
}

fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64, SemiclassicalError> {
    let mut flo = f(lo);
    let fhi = f(hi);
    let fail = |lo, hi, f_lo, f_hi| SemiclassicalError::RootFinding { lo, hi, f_lo, f_hi };
    if !flo.is_finite() || !fhi.is_finite() || flo * fhi > 0.0 {
        return Err(fail(lo, hi, flo, fhi));
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= BISECT_REL_TOL * hi || mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if !fm.is_finite() {
            return Err(fail(lo, hi, flo, fm));
        }
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Nonnegative roots of `f`, which must satisfy f(0) ≤ 0, found by sign
/// changes on a logarithmic grid up to `n_hi`.
pub fn scan_roots(f: &dyn Fn(f64) -> f64, n_hi: f64) -> Result<Vec<f64>, SemiclassicalError> {
    let f0 = f(0.0);
    if f0 == 0.0 {
        return Ok(vec![0.0]);
    }
    let n_hi = n_hi.max(10.0 * SCAN_MIN);
    let ratio = (n_hi / SCAN_MIN).ln();
    let grid: Vec<f64> = (0..=SCAN_POINTS)
        .map(|k| SCAN_MIN * (ratio * k as f64 / SCAN_POINTS as f64).exp())
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&n| f(n)).collect();
    let mut roots = Vec::new();
    if (f0 < 0.0) != (vals[0] < 0.0) && vals[0] != 0.0 {
        roots.push(bisect(f, 0.0, grid[0])?);
    }
    for k in 0..SCAN_POINTS {
        let (a, b) = (vals[k], vals[k + 1]);
        if a == 0.0 {
            roots.push(grid[k]);
        } else if a * b < 0.0 {
            roots.push(bisect(f, grid[k], grid[k + 1])?);
        }
    }
    if vals[SCAN_POINTS] == 0.0 {
        roots.push(grid[SCAN_POINTS]);
    }
    Ok(merge_roots(roots))
}

fn merge_roots(mut roots: Vec<f64>) -> Vec<f64> {
    roots.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(roots.len());
    for r in roots {
        match out.last_mut() {
            Some(last) if (r - *last).abs() <= MERGE_REL_TOL * r.abs().max(last.abs()) => {
                *last = 0.5 * (*last + r);
            }
            _ => out.push(r),
        }
    }
    out
}

/// Labels for S-curve equations, branches ordered by n.
fn s_curve_labels(count: usize) -> Vec<Stability> {
    match count {
        1 => vec![Stability::Stable],
        3 => vec![Stability::Stable, Stability::Unstable, Stability::Stable],
        k => vec![Stability::Unknown; k],
    }
}

fn scan_upper(p: &ModelParams) -> f64 {
    let linear = (p.eps_d.norm() / p.kappa).powi(2);
    let ns = n_scale(p).unwrap_or(0.0);
    10.0 * ns.max(linear)
}

fn build_set(
    equation: Equation,
    roots: &[f64],
    rhs: &dyn Fn(f64) -> C64,
    labels: Vec<Stability>,
    labels_assumed: bool,
) -> BranchSet {
    let mut branches: Vec<Branch> = roots
        .iter()
        .zip(labels)
        .map(|(&n, stability)| {
            let alpha = rhs(n);
            let n_alpha = alpha.norm_sqr();
            Branch {
                alpha,
                n: n_alpha,
                stability,
                sign: None,
                residual: (alpha - rhs(n_alpha)).norm(),
            }
        })
        .collect();
    branches.sort_by(|a, b| a.n.total_cmp(&b.n));
    BranchSet {
        equation,
        branches,
        labels_assumed,
    }
}

fn s_curve(
    equation: Equation,
    p: &ModelParams,
    rhs: &dyn Fn(f64) -> C64,
) -> Result<BranchSet, SemiclassicalError> {
    let f = |n: f64| rhs(n).norm_sqr() - n;
    let roots = scan_roots(&f, scan_upper(p))?;
    let labels = s_curve_labels(roots.len());
    Ok(build_set(equation, &roots, rhs, labels, true))
}

/// Right-hand side of the full mean-field fixed point, equation tag `full`.
pub fn full_rhs(p: &ModelParams, n: f64) -> C64 {
    let i = C64::new(0.0, 1.0);
    let kt = C64::new(p.kappa, -p.delta_omega_c);
    let dq = p.delta_omega_q;
    let coupling = 2.0 * p.g * p.g / (kt * C64::new(p.gamma, -2.0 * dq));
    let saturation = 1.0 + 8.0 * p.g * p.g * n / (p.gamma * p.gamma + 4.0 * dq * dq);
    -i * p.eps_d / (kt * (1.0 + coupling / saturation))
}

/// Mean-field steady states of the full Maxwell-Bloch equations.
pub fn solve_full(p: &ModelParams) -> Result<BranchSet, SemiclassicalError> {
    check(p)?;
    if p.gamma <= 0.0 && p.delta_omega_q == 0.0 && p.g > 0.0 {
        return Err(SemiclassicalError::Domain(
            "saturation term is singular for gamma = 0 at zero qubit detuning".into(),
        ));
    }
    s_curve(Equation::Full, p, &|n| full_rhs(p, n))
}

pub fn kerr_rhs(p: &ModelParams, delta: f64, n: f64) -> C64 {
    let shift = p.g * p.g / delta * (1.0 + 4.0 * p.g * p.g * n / (delta * delta)).powf(-0.5);
    let i = C64::new(0.0, 1.0);
    -i * p.eps_d / C64::new(p.kappa, -(p.delta_omega_c - shift))
}

/// Neoclassical (γ = 0) dispersive steady states.
pub fn solve_kerr(p: &ModelParams) -> Result<BranchSet, SemiclassicalError> {
    check(p)?;
    let delta = signed_delta(p)?;
    s_curve(Equation::Kerr, p, &|n| kerr_rhs(p, delta, n))
}

pub fn duffing_rhs(p: &ModelParams, delta: f64, n: f64) -> C64 {
    let shift = p.g * p.g / delta * (1.0 - 2.0 * p.g * p.g * n / (delta * delta));
    let i = C64::new(0.0, 1.0);
    -i * p.eps_d / C64::new(p.kappa, -(p.delta_omega_c - shift))
}

/// Coefficients (a, b, c, d) of a n³ + b n² + c n + d = 0 for the Duffing
/// steady state.
pub fn duffing_cubic(p: &ModelParams) -> Result<[f64; 4], SemiclassicalError> {
    let delta = signed_delta(p)?;
    let s = p.g * p.g / delta;
    let a0 = p.delta_omega_c - s;
    let b0 = 2.0 * s * p.g * p.g / (delta * delta);
    Ok([
        b0 * b0,
        2.0 * a0 * b0,
        p.kappa * p.kappa + a0 * a0,
        -p.eps_d.norm_sqr(),
    ])
}

/// Discriminant 18abcd − 4b³d + b²c² − 4ac³ − 27a²d²: positive exactly when
/// the cubic has three distinct real roots.
pub fn cubic_discriminant([a, b, c, d]: [f64; 4]) -> f64 {
    18.0 * a * b * c * d - 4.0 * b.powi(3) * d + b * b * c * c
        - 4.0 * a * c.powi(3)
        - 27.0 * a * a * d * d
}

/// Real roots of a cubic with a ≠ 0, polished by Newton steps.
fn cubic_real_roots([a, b, c, d]: [f64; 4]) -> Vec<f64> {
    let (b, c, d) = (b / a, c / a, d / a);
    // depressed t³ + pt + q with n = t − b/3
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b.powi(3) / 27.0 - b * c / 3.0 + d;
    let disc = -(4.0 * p.powi(3) + 27.0 * q * q);
    let mut roots = if disc > 0.0 {
        let m = 2.0 * (-p / 3.0).sqrt();
        let theta = (3.0 * q / (p * m)).clamp(-1.0, 1.0).acos() / 3.0;
        (0..3)
            .map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - shift)
            .collect::<Vec<_>>()
    } else {
        let s = (q * q / 4.0 + p.powi(3) / 27.0).max(0.0).sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt() - shift]
    };
    for r in &mut roots {
        for _ in 0..4 {
            let f = ((*r + b) * *r + c) * *r + d;
            let df = (3.0 * *r + 2.0 * b) * *r + c;
            if df == 0.0 {
                break;
            }
            let step = f / df;
            if !step.is_finite() {
                break;
            }
            *r -= step;
        }
    }
    roots
}

/// Lowest-order expansion of the Kerr equation, solved as an exact cubic.
pub fn solve_duffing(p: &ModelParams) -> Result<BranchSet, SemiclassicalError> {
    check(p)?;
    let delta = signed_delta(p)?;
    let rhs = |n: f64| duffing_rhs(p, delta, n);
    let coeffs = duffing_cubic(p)?;
    let roots = if coeffs[3] == 0.0 {
        vec![0.0]
    } else if coeffs[0] == 0.0 {
        // g = 0: linear in n
        vec![-coeffs[3] / coeffs[2]]
    } else {
        let mut r: Vec<f64> = cubic_real_roots(coeffs)
            .into_iter()
            .filter(|&n| n > 0.0)
            .collect();
        r = merge_roots(r);
        r
    };
    let labels = s_curve_labels(roots.len());
    Ok(build_set(Equation::Duffing, &roots, &rhs, labels, true))
}

fn split_rhs(p: &ModelParams, sign: f64, n: f64) -> C64 {
    let i = C64::new(0.0, 1.0);
    let det = p.delta_omega_c - sign * p.g / (2.0 * n.sqrt());
    -i * p.eps_d / C64::new(p.kappa, -det)
}

/// |α|² = ε_d²/(κ² + [Δω_c ∓ g/(2|α|)]²) for both signs. With r = |α| each
/// sign is a quadratic in r.
pub fn solve_split_lorentzian(p: &ModelParams) -> Result<BranchSet, SemiclassicalError> {
    check(p)?;
    let eps2 = p.eps_d.norm_sqr();
    let k2d2 = p.kappa * p.kappa + p.delta_omega_c * p.delta_omega_c;
    let mut branches = Vec::new();
    for sign in [-1.0f64, 1.0] {
        // (κ² + Δ²) r² − s g Δ r + g²/4 − ε² = 0
        let b = -sign * p.g * p.delta_omega_c;
        let c = p.g * p.g / 4.0 - eps2;
        let disc = b * b - 4.0 * k2d2 * c;
        if disc < 0.0 {
            continue;
        }
        // cancellation-free pair; r = 0 is excluded (g/(2r) diverges there)
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let mut rs = if q == 0.0 {
            vec![(-c / k2d2).max(0.0).sqrt()]
        } else {
            vec![q / k2d2, c / q]
        };
        rs.retain(|&r| r > 0.0);
        let ns = merge_roots(rs.into_iter().map(|r| r * r).collect());
        for n in ns {
            let alpha = split_rhs(p, sign, n);
            let na = alpha.norm_sqr();
            branches.push(Branch {
                alpha,
                n: na,
                stability: Stability::Unknown,
                sign: Some(sign as i8),
                residual: (alpha - split_rhs(p, sign, na)).norm(),
            });
        }
    }
    branches.sort_by(|a, b| (a.sign, a.n).partial_cmp(&(b.sign, b.n)).expect("finite"));
    Ok(BranchSet {
        equation: Equation::SplitLorentzian,
        branches,
        labels_assumed: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseBranch {
    pub alpha: C64,
    /// ⟨σ₋⟩ = ±α/(2|α|)
    pub nu: C64,
    /// ⟨σ_z⟩
    pub zeta: f64,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseBistability {
    /// Empty below threshold, otherwise the `−` and `+` states.
    pub branches: Vec<PhaseBranch>,
}

impl PhaseBistability {
    pub fn to_branch_set(&self, p: &ModelParams) -> BranchSet {
        let branches = self
            .branches
            .iter()
            .map(|b| {
                let a = b.alpha.norm();
                let rhs = phase_rhs(p, b.sign as f64, a);
                Branch {
                    alpha: b.alpha,
                    n: b.alpha.norm_sqr(),
                    stability: Stability::Unknown,
                    sign: Some(b.sign),
                    residual: (b.alpha - rhs).norm(),
                }
            })
            .collect();
        BranchSet {
            equation: Equation::Phase,
            branches,
            labels_assumed: false,
        }
    }
}

fn phase_rhs(p: &ModelParams, sign: f64, abs_alpha: f64) -> C64 {
    let i = C64::new(0.0, 1.0);
    -i * p.eps_d / C64::new(p.kappa, sign * p.g / (2.0 * abs_alpha))
}

/// Threshold solution at resonance: two states of equal amplitude
/// |α|² = (ε_d² − g²/4)/κ² and opposite phase above ε_d = g/2. A complex drive
/// is handled through the gauge rotation α → α·e^{i arg ε_d}.
pub fn solve_phase_bistability(p: &ModelParams) -> Result<PhaseBistability, SemiclassicalError> {
    check(p)?;
    if p.delta() != 0.0 || p.delta_omega_c != 0.0 {
        log::debug!("phase bistability evaluated away from resonance; detunings ignored");
    }
    let eps = p.eps_d.norm();
    let half_g = 0.5 * p.g;
    if eps <= half_g {
        return Ok(PhaseBistability { branches: vec![] });
    }
    let r = ((eps * eps - half_g * half_g).max(0.0)).sqrt() / p.kappa;
    let real = p.with_drive(C64::new(eps, 0.0));
    let rot = if eps > 0.0 { p.eps_d / eps } else { C64::new(1.0, 0.0) };
    let branches = [-1i8, 1]
        .into_iter()
        .map(|sign| {
            let alpha = phase_rhs(&real, sign as f64, r) * rot;
            PhaseBranch {
                alpha,
                nu: sign as f64 * alpha / (2.0 * alpha.norm()),
                zeta: 0.0,
                sign,
            }
        })
        .collect();
    Ok(PhaseBistability { branches })
}

/// Endpoints of the ε_d values (taken from `eps_grid`) with three branches.
pub fn bistable_interval(
    solver: fn(&ModelParams) -> Result<BranchSet, SemiclassicalError>,
    p: &ModelParams,
    eps_grid: &[f64],
) -> Result<Option<(f64, f64)>, SemiclassicalError> {
    let mut lo = None;
    let mut hi = None;
    for &e in eps_grid {
        let set = solver(&p.with_drive(C64::new(e, 0.0)))?;
        if set.len() == 3 {
            lo.get_or_insert(e);
            hi = Some(e);
        }
    }
    Ok(lo.zip(hi))
}

pub const BRANCH_CSV_HEADER: &str = "equation,branch,re_alpha,im_alpha,n,stability";

/// One row per branch per set.
pub fn write_branch_csv(sets: &[BranchSet]) -> String {
    let mut out = String::from(BRANCH_CSV_HEADER);
    out.push('\n');
    for set in sets {
        for (k, b) in set.branches.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                set.equation,
                k,
                sci17(b.alpha.re),
                sci17(b.alpha.im),
                sci17(b.n),
                b.stability.tag()
            ));
        }
    }
    out
}

/// A parsed branch row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchRow {
    pub equation: Equation,
    pub index: usize,
    pub alpha: C64,
    pub n: f64,
    pub stability: Stability,
}

pub fn read_branch_csv(text: &str) -> Result<Vec<BranchRow>, SemiclassicalError> {
    let err = |line: usize, msg: String| SemiclassicalError::Parse { line, msg };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(BRANCH_CSV_HEADER) {
        return Err(err(1, "missing header".into()));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(err(lineno, format!("expected 6 columns, got {}", cols.len())));
        }
        let num = |s: &str| parse_f64(s).ok_or_else(|| err(lineno, format!("invalid number `{s}`")));
        rows.push(BranchRow {
            equation: cols[0].parse().map_err(|e| err(lineno, e))?,
            index: cols[1]
                .trim()
                .parse()
                .map_err(|_| err(lineno, format!("invalid index `{}`", cols[1])))?,
            alpha: C64::new(num(cols[2])?, num(cols[3])?),
            n: num(cols[4])?,
            stability: cols[5].trim().parse().map_err(|e| err(lineno, e))?,
        });
    }
    Ok(rows)
}
