//! Q and Wigner functions of the reduced cavity state on a rectangular
//! phase-space grid, peak detection, and a CSV representation of the fields.
//!
//! A phase-space point α = x + iy is the coherent-state label. Field values are
//! stored with the x index major: `values[[i, j]]` is the value at `(x_i, y_j)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hilbert::{coherent_amplitudes, DensityMatrix, Space};
use crate::numfmt::{parse_f64, sci17};

/// Slack on the pointwise Q and W bounds.
pub const BOUND_TOL: f64 = 1e-12;
/// Default noise floor for peak detection, relative to the global maximum.
pub const DEFAULT_NOISE_FLOOR: f64 = 0.01;

#[derive(Debug, Error)]
pub enum QuasiError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("expected a cavity-only density matrix, got {0:?}")]
    InvalidShape(Space),
    #[error("malformed field file at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpaceGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl PhaseSpaceGrid {
    pub fn new(
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
        nx: usize,
        ny: usize,
    ) -> Result<Self, QuasiError> {
        let g = Self {
            x_min,
            x_max,
            y_min,
            y_max,
            nx,
            ny,
        };
        g.validate()?;
        Ok(g)
    }

    /// Square grid centred on the origin.
    pub fn square(half_width: f64, n: usize) -> Result<Self, QuasiError> {
        Self::new(-half_width, half_width, -half_width, half_width, n, n)
    }

    /// 201 × 201 window of half-width 1.5·`alpha_max` plus three vacuum widths.
    pub fn auto(alpha_max: f64) -> Result<Self, QuasiError> {
        Self::square(1.5 * alpha_max.abs() + 3.0, 201)
    }

    pub fn validate(&self) -> Result<(), QuasiError> {
        if self.nx < 2 || self.ny < 2 {
            return Err(QuasiError::InvalidGrid(format!(
                "need at least 2 points per axis, got {}x{}",
                self.nx, self.ny
            )));
        }
        if ![self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(QuasiError::InvalidGrid("bounds must be finite".into()));
        }
        if !(self.x_max > self.x_min && self.y_max > self.y_min) {
            return Err(QuasiError::InvalidGrid("max must exceed min".into()));
        }
        // coordinates are rebuilt from the bounds on read-back; keep the point
        // count within what a field file can reasonably hold
        if self.nx.checked_mul(self.ny).is_none_or(|n| n > 1 << 26) {
            return Err(QuasiError::InvalidGrid("too many points".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        if j + 1 == self.ny {
            self.y_max
        } else {
            self.y_min + j as f64 * self.dy()
        }
    }

    pub fn alpha(&self, i: usize, j: usize) -> C64 {
        C64::new(self.x(i), self.y(j))
    }

    /// Largest |α|² on the grid.
    pub fn max_norm_sqr(&self) -> f64 {
        let x = self.x_min.abs().max(self.x_max.abs());
        let y = self.y_min.abs().max(self.y_max.abs());
        x * x + y * y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuasiKind {
    Q,
    W,
}

impl fmt::Display for QuasiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Q => "Q",
            Self::W => "W",
        })
    }
}

impl FromStr for QuasiKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Q" | "q" => Ok(Self::Q),
            "W" | "w" => Ok(Self::W),
            _ => Err(format!("unknown field kind `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiDistField {
    pub grid: PhaseSpaceGrid,
    pub values: Array2<f64>,
    pub kind: QuasiKind,
}

impl QuasiDistField {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    /// 2-D trapezoid rule over the grid.
    pub fn integral(&self) -> f64 {
        let g = &self.grid;
        let mut s = 0.0;
        for i in 0..g.nx {
            let wx = if i == 0 || i + 1 == g.nx { 0.5 } else { 1.0 };
            for j in 0..g.ny {
                let wy = if j == 0 || j + 1 == g.ny { 0.5 } else { 1.0 };
                s += wx * wy * self.values[[i, j]];
            }
        }
        s * g.dx() * g.dy()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Whether every value respects the pointwise bound of its kind.
    pub fn within_bounds(&self) -> bool {
        let (lo, hi) = match self.kind {
            QuasiKind::Q => (0.0, 1.0 / PI),
            QuasiKind::W => (-2.0 / PI, 2.0 / PI),
        };
        self.values
            .iter()
            .all(|&v| v >= lo - BOUND_TOL && v <= hi + BOUND_TOL)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Option<f64> {
        (self.values.dim() == other.values.dim()).then(|| {
            self.values
                .iter()
                .zip(other.values.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
    }

    /// Builds a field by evaluating `f` pointwise, in parallel over x.
    pub fn from_fn<F>(grid: PhaseSpaceGrid, kind: QuasiKind, f: F) -> Result<Self, QuasiError>
    where
        F: Fn(C64) -> f64 + Sync,
    {
        grid.validate()?;
        let rows: Vec<Vec<f64>> = (0..grid.nx)
            .into_par_iter()
            .map(|i| (0..grid.ny).map(|j| f(grid.alpha(i, j))).collect())
            .collect();
        let values = Array2::from_shape_fn((grid.nx, grid.ny), |(i, j)| rows[i][j]);
        Ok(Self { grid, values, kind })
    }

    /// As [`QuasiDistField::from_fn`] for a fallible evaluator.
    pub fn try_from_fn<F, E>(grid: PhaseSpaceGrid, kind: QuasiKind, f: F) -> Result<Self, E>
    where
        F: Fn(C64) -> Result<f64, E> + Sync,
        E: Send + From<QuasiError>,
    {
        grid.validate()?;
        let rows: Vec<Vec<f64>> = (0..grid.nx)
            .into_par_iter()
            .map(|i| (0..grid.ny).map(|j| f(grid.alpha(i, j))).collect())
            .collect::<Result<_, E>>()?;
        let values = Array2::from_shape_fn((grid.nx, grid.ny), |(i, j)| rows[i][j]);
        Ok(Self { grid, values, kind })
    }
}

fn cavity_dim(rho_c: &DensityMatrix) -> Result<usize, QuasiError> {
    match rho_c.space() {
        Space::Cavity(n) => Ok(n),
        other => Err(QuasiError::InvalidShape(other)),
    }
}

fn warn_truncation(grid: &PhaseSpaceGrid, n: usize) {
    if grid.max_norm_sqr() > n as f64 / 2.0 {
        log::warn!(
            "grid reaches |α|² = {:.2}, beyond half the truncation ({n} levels)",
            grid.max_norm_sqr()
        );
    }
}

/// Q(α) = ⟨α|ρ_c|α⟩/π.
pub fn q_function(rho_c: &DensityMatrix, grid: &PhaseSpaceGrid) -> Result<QuasiDistField, QuasiError> {
    let n = cavity_dim(rho_c)?;
    warn_truncation(grid, n);
    let r = rho_c.matrix();
    QuasiDistField::from_fn(*grid, QuasiKind::Q, |alpha| {
        let c = coherent_amplitudes(alpha, n);
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..n {
            let mut row = C64::new(0.0, 0.0);
            for l in 0..n {
                row += r[[k, l]] * c[l];
            }
            acc += c[k].conj() * row;
        }
        (acc.re / PI).max(0.0)
    })
}

/// W(α) = (2/π) Tr[D(−α) ρ_c D(α) Π], evaluated term by term from the
/// displaced-parity matrix elements
/// ⟨m|D(α)ΠD(−α)|n⟩ ∝ (2α)^{n−m} L_m^{n−m}(4|α|²) e^{−2|α|²},
/// generated by a stable three-term recursion.
pub fn wigner_numeric(
    rho_c: &DensityMatrix,
    grid: &PhaseSpaceGrid,
) -> Result<QuasiDistField, QuasiError> {
    let n = cavity_dim(rho_c)?;
    warn_truncation(grid, n);
    let r = rho_c.matrix();
    QuasiDistField::from_fn(*grid, QuasiKind::W, |alpha| wigner_point(r, n, alpha))
}

fn wigner_point(r: &Array2<C64>, n: usize, a: C64) -> f64 {
    let sq: Vec<f64> = (0..n).map(|k| (k as f64).sqrt()).collect();
    let mut wl = vec![C64::new(0.0, 0.0); n];
    wl[0] = C64::new((-2.0 * a.norm_sqr()).exp() / PI, 0.0);
    let mut w = r[[0, 0]].re * wl[0].re;
    for k in 1..n {
        wl[k] = 2.0 * a * wl[k - 1] / sq[k];
        w += 2.0 * (r[[0, k]] * wl[k]).re;
    }
    for m in 1..n {
        let mut temp = wl[m];
        wl[m] = (2.0 * a.conj() * temp - sq[m] * wl[m - 1]) / sq[m];
        w += (r[[m, m]] * wl[m]).re;
        for k in m + 1..n {
            let next = (2.0 * a * wl[k - 1] - sq[m] * temp) / sq[k];
            temp = wl[k];
            wl[k] = next;
            w += 2.0 * (r[[m, k]] * wl[k]).re;
        }
    }
    2.0 * w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub x: f64,
    pub y: f64,
    pub height: f64,
}

impl Peak {
    pub fn alpha(&self) -> C64 {
        C64::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BimodalityMetrics {
    /// Local maxima above the noise floor, highest first.
    pub peaks: Vec<Peak>,
    /// r = (h₁ − h₂)/h₁ for the two highest peaks.
    pub r: Option<f64>,
    /// (h_outer − h_inner)/max(h₁, h₂), ordering the two highest peaks by
    /// distance from the origin; changes sign where the peaks are equal.
    pub radial_balance: Option<f64>,
}

pub fn bimodality_metrics(field: &QuasiDistField) -> BimodalityMetrics {
    bimodality_metrics_with_floor(field, DEFAULT_NOISE_FLOOR)
}

pub fn bimodality_metrics_with_floor(field: &QuasiDistField, floor: f64) -> BimodalityMetrics {
    let peaks = find_peaks(field, floor);
    let (r, radial_balance) = match peaks.as_slice() {
        [p1, p2, ..] => {
            let r = (p1.height - p2.height) / p1.height;
            let (inner, outer) = if p1.alpha().norm() <= p2.alpha().norm() {
                (p1, p2)
            } else {
                (p2, p1)
            };
            (Some(r), Some((outer.height - inner.height) / p1.height))
        }
        _ => (None, None),
    };
    BimodalityMetrics {
        peaks,
        r,
        radial_balance,
    }
}

/// 8-neighbour interior maxima with separable quadratic refinement.
pub fn find_peaks(field: &QuasiDistField, floor: f64) -> Vec<Peak> {
    let v = &field.values;
    let (nx, ny) = v.dim();
    let g = &field.grid;
    let global = field.max_value();
    if !global.is_finite() || global <= 0.0 || nx < 3 || ny < 3 {
        return Vec::new();
    }
    let threshold = floor * global;
    let mut peaks = Vec::new();
    for i in 1..nx - 1 {
        for j in 1..ny - 1 {
            let c = v[[i, j]];
            if !c.is_finite() || c < threshold {
                continue;
            }
            let mut is_max = true;
            'nb: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let o = v[[(i as i64 + di) as usize, (j as i64 + dj) as usize]];
                    // plateaus: the first cell in scan order wins
                    let earlier = di < 0 || (di == 0 && dj < 0);
                    if o > c || (earlier && o == c) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if !is_max {
                continue;
            }
            let (ox, hx) = refine(v[[i - 1, j]], c, v[[i + 1, j]]);
            let (oy, hy) = refine(v[[i, j - 1]], c, v[[i, j + 1]]);
            peaks.push(Peak {
                x: g.x(i) + ox * g.dx(),
                y: g.y(j) + oy * g.dy(),
                height: c + hx + hy,
            });
        }
    }
    peaks.sort_by(|a, b| b.height.total_cmp(&a.height));
    peaks
}

/// Vertex offset (in cells) and height gain of the parabola through three samples.
fn refine(l: f64, c: f64, r: f64) -> (f64, f64) {
    let curv = l - 2.0 * c + r;
    if curv >= 0.0 || !curv.is_finite() {
        return (0.0, 0.0);
    }
    let off = (0.5 * (l - r) / curv).clamp(-0.5, 0.5);
    (off, -0.25 * (l - r) * off)
}

/// Header line of a field file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub kind: QuasiKind,
    pub grid: PhaseSpaceGrid,
    pub params_hash: Option<String>,
}

/// Field file: one `# {json header}` line, a `x,y,value` header, then one row
/// per grid point with x major.
pub fn write_field_csv(field: &QuasiDistField, params_hash: Option<&str>) -> String {
    let header = FieldHeader {
        kind: field.kind,
        grid: field.grid,
        params_hash: params_hash.map(str::to_string),
    };
    let g = &field.grid;
    let mut out = String::with_capacity(64 * g.nx * g.ny + 256);
    out.push_str("# ");
    out.push_str(&serde_json::to_string(&header).expect("header serializes"));
    out.push_str("\nx,y,value\n");
    for i in 0..g.nx {
        for j in 0..g.ny {
            out.push_str(&sci17(g.x(i)));
            out.push(',');
            out.push_str(&sci17(g.y(j)));
            out.push(',');
            out.push_str(&sci17(field.values[[i, j]]));
            out.push('\n');
        }
    }
    out
}

pub fn read_field_csv(text: &str) -> Result<(QuasiDistField, FieldHeader), QuasiError> {
    let err = |line: usize, msg: &str| QuasiError::Parse {
        line,
        msg: msg.to_string(),
    };
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| err(1, "empty input"))?;
    let json = first
        .strip_prefix('#')
        .ok_or_else(|| err(1, "missing JSON header"))?;
    let header: FieldHeader =
        serde_json::from_str(json.trim()).map_err(|e| err(1, &e.to_string()))?;
    let g = header.grid;
    g.validate().map_err(|e| err(1, &e.to_string()))?;
    if lines.next().map(str::trim) != Some("x,y,value") {
        return Err(err(2, "expected column header `x,y,value`"));
    }
    let total = g.nx * g.ny;
    let mut values = Vec::with_capacity(total.min(1 << 20));
    for (k, line) in lines.enumerate() {
        let lineno = k + 3;
        if line.trim().is_empty() {
            continue;
        }
        if values.len() == total {
            return Err(err(lineno, "more rows than grid points"));
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(err(lineno, "expected 3 columns"));
        }
        let nums: Option<Vec<f64>> = cols.iter().map(|c| parse_f64(c)).collect();
        let nums = nums.ok_or_else(|| err(lineno, "invalid number"))?;
        let idx = values.len();
        let (i, j) = (idx / g.ny, idx % g.ny);
        let tol = 1e-9 * (1.0 + g.x(i).abs().max(g.y(j).abs()));
        if (nums[0] - g.x(i)).abs() > tol || (nums[1] - g.y(j)).abs() > tol {
            return Err(err(lineno, "coordinates do not match the grid"));
        }
        values.push(nums[2]);
    }
    if values.len() != total {
        return Err(err(text.lines().count(), "fewer rows than grid points"));
    }
    let values = Array2::from_shape_vec((g.nx, g.ny), values).expect("length checked");
    Ok((
        QuasiDistField {
            grid: g,
            values,
            kind: header.kind,
        },
        header,
    ))
}
