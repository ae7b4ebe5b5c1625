//! Hypergeometric series with complex parameters and the closed-form Wigner
//! function of the dressed Duffing oscillator.
//!
//! Far from resonance the qubit stays close to its ground state (σ_z = −1)
//! and dresses the cavity with a Kerr term χ a†²a², χ = (g⁴/δ³)σ_z. The
//! steady-state Wigner function of the resulting Duffing oscillator is
//!
//! ```text
//! W(α) = (2/π) e^{−2|α|²} |₀F₁(c; 2ε̃ α*)|² / ₀F₂(c, c*; 2|ε̃|²)
//! ```
//!
//! with c = (κ − iΔω_c′)/(iχ), ε̃ = ε_d/(iχ) and the shifted detuning
//! Δω_c′ = Δω_c + (g²/δ)σ_z − (g⁴/δ³)(2σ_z + 1).

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lindblad::ModelParams;
use crate::quasiprob::{PhaseSpaceGrid, QuasiDistField, QuasiError, QuasiKind};

/// Distance from a non-positive integer treated as a pole.
pub const POLE_TOL: f64 = 1e-12;
/// Relative size below which a term counts as negligible.
pub const TERM_TOL: f64 = 1e-16;
/// Consecutive negligible terms required to stop.
pub const SMALL_RUN: usize = 8;
pub const MAX_TERMS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispersiveError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("series did not converge within {terms} terms")]
    Convergence { terms: usize },
    #[error("{0}")]
    Grid(String),
}

impl From<QuasiError> for DispersiveError {
    fn from(e: QuasiError) -> Self {
        Self::Grid(e.to_string())
    }
}

/// Kahan-compensated complex accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: C64,
    comp: C64,
}

impl Kahan {
    fn add(&mut self, x: C64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

fn check_poles(b: &[C64]) -> Result<(), DispersiveError> {
    for c in b {
        if !(c.re.is_finite() && c.im.is_finite()) {
            return Err(DispersiveError::Domain(format!("parameter {c} is not finite")));
        }
        let k = c.re.round();
        if k <= 0.0 && (c - C64::new(k, 0.0)).norm() < POLE_TOL {
            return Err(DispersiveError::Domain(format!(
                "parameter {c} is a non-positive integer"
            )));
        }
    }
    Ok(())
}

/// ₀F_q(; b₁…b_q; z) = Σ_k z^k / ((b₁)_k ⋯ (b_q)_k k!).
pub fn hyp0fq(b: &[C64], z: C64) -> Result<C64, DispersiveError> {
    check_poles(b)?;
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(DispersiveError::Domain(format!("argument {z} is not finite")));
    }
    if z == C64::new(0.0, 0.0) {
        return Ok(C64::new(1.0, 0.0));
    }
    let mut acc = Kahan::default();
    let mut term = C64::new(1.0, 0.0);
    let mut small = 0;
    for k in 0..MAX_TERMS {
        acc.add(term);
        if term.norm() < TERM_TOL * acc.sum.norm() {
            small += 1;
            if small >= SMALL_RUN {
                return Ok(acc.sum);
            }
        } else {
            small = 0;
        }
        let kf = k as f64;
        let mut den = C64::new(kf + 1.0, 0.0);
        for c in b {
            den *= c + kf;
        }
        term = term * z / den;
        if !(term.re.is_finite() && term.im.is_finite()) {
            return Err(DispersiveError::Convergence { terms: k + 1 });
        }
    }
    Err(DispersiveError::Convergence { terms: MAX_TERMS })
}

pub fn hyp0f1(c: C64, z: C64) -> Result<C64, DispersiveError> {
    hyp0fq(&[c], z)
}

pub fn hyp0f2(c1: C64, c2: C64, z: C64) -> Result<C64, DispersiveError> {
    hyp0fq(&[c1, c2], z)
}

/// Parameters of the dressed Duffing oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuffingParams {
    pub chi: f64,
    pub c: C64,
    pub eps_tilde: C64,
    pub delta_omega_c_prime: f64,
    pub sigma_z: f64,
    pub kappa: f64,
    /// g²/δ
    pub dispersive_shift: f64,
}

impl DuffingParams {
    /// c·(iχ) + iΔω_c′, which equals κ.
    pub fn kappa_recovered(&self) -> C64 {
        self.c * C64::new(0.0, self.chi) + C64::new(0.0, self.delta_omega_c_prime)
    }
}

/// Duffing parameters for a qubit frozen in its ground state.
pub fn duffing_params(p: &ModelParams) -> Result<DuffingParams, DispersiveError> {
    duffing_params_with_sigma_z(p, -1.0)
}

pub fn duffing_params_with_sigma_z(
    p: &ModelParams,
    sigma_z: f64,
) -> Result<DuffingParams, DispersiveError> {
    p.validate()
        .map_err(|e| DispersiveError::Domain(e.to_string()))?;
    let delta = p.delta();
    if delta <= 0.0 {
        return Err(DispersiveError::Domain(
            "the dispersive transformation needs a nonzero qubit-cavity detuning".into(),
        ));
    }
    if p.g <= 0.0 {
        return Err(DispersiveError::Domain("g must be > 0".into()));
    }
    let shift = p.g * p.g / delta;
    let quartic = shift * shift / delta;
    let chi = quartic * sigma_z;
    if chi == 0.0 || !chi.is_finite() {
        return Err(DispersiveError::Domain(format!("chi = {chi}")));
    }
    let dwp = p.delta_omega_c + shift * sigma_z - quartic * (2.0 * sigma_z + 1.0);
    let i_chi = C64::new(0.0, chi);
    Ok(DuffingParams {
        chi,
        c: C64::new(p.kappa, -dwp) / i_chi,
        eps_tilde: p.eps_d / i_chi,
        delta_omega_c_prime: dwp,
        sigma_z,
        kappa: p.kappa,
        dispersive_shift: shift,
    })
}

/// ₀F₂(c, c*; 2|ε̃|²), real by conjugate pairing.
pub fn wigner_normalization(dp: &DuffingParams) -> Result<f64, DispersiveError> {
    Ok(hyp0f2(dp.c, dp.c.conj(), C64::new(2.0 * dp.eps_tilde.norm_sqr(), 0.0))?.re)
}

pub fn wigner_analytic(dp: &DuffingParams, alpha: C64) -> Result<f64, DispersiveError> {
    let norm = wigner_normalization(dp)?;
    wigner_with_norm(dp, alpha, norm)
}

fn wigner_with_norm(dp: &DuffingParams, alpha: C64, norm: f64) -> Result<f64, DispersiveError> {
    let num = hyp0f1(dp.c, 2.0 * dp.eps_tilde * alpha.conj())?;
    let w = 2.0 / PI * (-2.0 * alpha.norm_sqr()).exp() * num.norm_sqr() / norm;
    if !w.is_finite() {
        return Err(DispersiveError::Domain(format!("non-finite W at {alpha}")));
    }
    Ok(w)
}

/// Largest order of the explicit-product series before giving up.
const SERIES_MAX_ORDER: usize = 160;

/// Same function through the numerator expansion Σ_m u^m/(m!·D_m) with
/// D_m = c(c+1)⋯(c+m−1), where u = −z²/4 and z = √(−8ε̃α*). Powers, D_m and
/// m! are accumulated as separate products.
pub fn wigner_analytic_series(dp: &DuffingParams, alpha: C64) -> Result<f64, DispersiveError> {
    check_poles(&[dp.c])?;
    let z = (-8.0 * dp.eps_tilde * alpha.conj()).sqrt();
    let u = -z * z / 4.0;
    let mut acc = Kahan::default();
    let mut power = C64::new(1.0, 0.0);
    let mut d_m = C64::new(1.0, 0.0);
    let mut fact = 1.0f64;
    let mut small = 0;
    let mut converged = false;
    for m in 0..SERIES_MAX_ORDER {
        if m > 0 {
            power *= u;
            d_m *= dp.c + (m - 1) as f64;
            fact *= m as f64;
        }
        let term = power / (d_m * fact);
        if !(term.re.is_finite() && term.im.is_finite()) {
            break;
        }
        acc.add(term);
        if term.norm() < TERM_TOL * acc.sum.norm() || term.norm() == 0.0 {
            small += 1;
            if small >= SMALL_RUN {
                converged = true;
                break;
            }
        } else {
            small = 0;
        }
    }
    if !converged {
        return Err(DispersiveError::Convergence {
            terms: SERIES_MAX_ORDER,
        });
    }
    let norm = wigner_normalization(dp)?;
    Ok(2.0 / PI * (-2.0 * alpha.norm_sqr()).exp() * acc.sum.norm_sqr() / norm)
}

/// Analytic Wigner function sampled on a grid.
pub fn wigner_analytic_field(
    dp: &DuffingParams,
    grid: &PhaseSpaceGrid,
) -> Result<QuasiDistField, DispersiveError> {
    let norm = wigner_normalization(dp)?;
    QuasiDistField::try_from_fn(*grid, QuasiKind::W, |a| wigner_with_norm(dp, a, norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strong_dispersive(eps_over_kappa: f64) -> ModelParams {
        let g = 3347.0;
        let kappa = 6.0;
        ModelParams::dispersive(
            g,
            kappa,
            1.0,
            g / 0.14,
            72.5 * kappa,
            C64::new(eps_over_kappa * kappa, 0.0),
        )
    }

    fn rel(a: C64, b: C64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn zero_argument_is_one() {
        assert_eq!(hyp0f1(C64::new(0.3, 2.0), C64::new(0.0, 0.0)).unwrap(), C64::new(1.0, 0.0));
        assert_eq!(
            hyp0f2(C64::new(1.0, 1.0), C64::new(2.0, -1.0), C64::new(0.0, 0.0)).unwrap(),
            C64::new(1.0, 0.0)
        );
    }

    #[test]
    fn bessel_identity() {
        // ₀F₁(;1;1) = I₀(2)
        let v = hyp0f1(C64::new(1.0, 0.0), C64::new(1.0, 0.0)).unwrap();
        assert!(rel(v, C64::new(2.2795853023360673, 0.0)) < 1e-15);
        // ₀F₁(;3/2;−x²/4) = sin(x)/x
        let x: f64 = 7.3;
        let v = hyp0f1(C64::new(1.5, 0.0), C64::new(-x * x / 4.0, 0.0)).unwrap();
        assert!((v.re - x.sin() / x).abs() < 1e-13);
    }

    #[test]
    fn poles_rejected() {
        for c in [0.0, -1.0, -7.0] {
            assert!(matches!(
                hyp0f1(C64::new(c, 0.0), C64::new(1.0, 0.0)),
                Err(DispersiveError::Domain(_))
            ));
        }
        assert!(hyp0f1(C64::new(-2.0, 1e-6), C64::new(1.0, 0.0)).is_ok());
    }

    #[test]
    fn conjugate_pair_is_real() {
        let c = C64::new(0.7, -3.1);
        for x in [0.1, 4.0, 55.0] {
            let v = hyp0f2(c, c.conj(), C64::new(x, 0.0)).unwrap();
            assert!(v.im.abs() <= 1e-14 * v.norm());
        }
    }

    #[test]
    fn strong_dispersive_duffing_params() {
        let dp = duffing_params(&strong_dispersive(2.17)).unwrap();
        assert!((dp.chi / -9.18 - 1.0).abs() < 5e-3);
        assert!((dp.dispersive_shift / 468.6 - 1.0).abs() < 5e-3);
        assert!((dp.delta_omega_c_prime / -24.4 - 1.0).abs() < 5e-3);
        assert!(dp.chi < 0.0);
        assert!((dp.kappa_recovered() - C64::new(6.0, 0.0)).norm() < 1e-12 * 6.0);
    }

    #[test]
    fn resonance_is_a_domain_error() {
        let p = ModelParams::resonant(1.0, 1.0, 1.0, 0.0, C64::new(1.0, 0.0));
        assert!(matches!(duffing_params(&p), Err(DispersiveError::Domain(_))));
    }

    #[test]
    fn undriven_is_vacuum() {
        let dp = duffing_params(&strong_dispersive(0.0)).unwrap();
        assert!((wigner_analytic(&dp, C64::new(0.0, 0.0)).unwrap() - 2.0 / PI).abs() < 1e-15);
        let a = C64::new(0.4, -0.3);
        let expect = 2.0 / PI * (-2.0 * a.norm_sqr()).exp();
        assert!((wigner_analytic(&dp, a).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn series_path_agrees() {
        for e in [2.17, 2.33, 2.50, 2.67] {
            let dp = duffing_params(&strong_dispersive(e)).unwrap();
            for a in [
                C64::new(0.0, 0.0),
                C64::new(1.2, -0.7),
                C64::new(-2.0, 1.5),
                C64::new(3.1, 2.2),
            ] {
                let w5 = wigner_analytic(&dp, a).unwrap();
                let w6 = wigner_analytic_series(&dp, a).unwrap();
                assert!((w5 - w6).abs() <= 1e-10 * w5.abs().max(1e-300), "{e} {a}: {w5} {w6}");
            }
        }
    }

    #[test]
    fn normalized_and_bounded() {
        let dp = duffing_params(&strong_dispersive(2.5)).unwrap();
        let grid = PhaseSpaceGrid::square(6.0, 161).unwrap();
        let f = wigner_analytic_field(&dp, &grid).unwrap();
        assert!((f.integral() - 1.0).abs() < 1e-2, "integral {}", f.integral());
        assert!(f.within_bounds());
    }

    proptest! {
        #[test]
        fn conjugation_symmetry(cr in -5.0f64..5.0, ci in 0.5f64..5.0, zr in -20.0f64..20.0, zi in -20.0f64..20.0) {
            let c = C64::new(cr, ci);
            let z = C64::new(zr, zi);
            let f = hyp0f1(c, z).unwrap();
            let g = hyp0f1(c.conj(), z.conj()).unwrap();
            prop_assert!((f.conj() - g).norm() <= 1e-12 * f.norm().max(1e-300));
            let f2 = hyp0f2(c, C64::new(1.5, -ci), z).unwrap();
            let g2 = hyp0f2(c.conj(), C64::new(1.5, ci), z.conj()).unwrap();
            prop_assert!((f2.conj() - g2).norm() <= 1e-12 * f2.norm().max(1e-300));
        }

        #[test]
        fn real_and_above_lower_bound(x in -4.0f64..4.0, y in -4.0f64..4.0) {
            let dp = duffing_params(&strong_dispersive(2.33)).unwrap();
            let w = wigner_analytic(&dp, C64::new(x, y)).unwrap();
            prop_assert!(w.is_finite() && w >= -2.0 / PI);
        }

        #[test]
        fn phase_covariance(x in -3.0f64..3.0, y in -3.0f64..3.0, phi in 0.0f64..6.3) {
            let p = strong_dispersive(2.5);
            let rot = C64::from_polar(1.0, phi);
            let dp = duffing_params(&p).unwrap();
            let dpr = duffing_params(&p.with_drive(p.eps_d * rot)).unwrap();
            let a = C64::new(x, y);
            let w = wigner_analytic(&dp, a).unwrap();
            let wr = wigner_analytic(&dpr, a * rot).unwrap();
            prop_assert!((w - wr).abs() <= 1e-10 * w.abs().max(1e-12));
        }
    }
}
