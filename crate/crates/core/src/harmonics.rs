//! Real orthonormal spherical harmonics on the grid and band-limited reconstruction.
//!
//! `Y_l^0 = P_l^0(cos u)` and, for `m > 0`, `Y_l^m = sqrt(2) P_l^m(cos u) cos(m v)`,
//! `Y_l^-m = sqrt(2) P_l^m(cos u) sin(m v)`, where the fully normalized
//! associated Legendre functions (no Condon-Shortley phase) satisfy
//!
//! ```text
//! P_0^0 = 1 / sqrt(4 pi)
//! P_m^m = sqrt((2m + 1) / (2m)) sin(u) P_{m-1}^{m-1}
//! P_{m+1}^m = sqrt(2m + 3) cos(u) P_m^m
//! P_l^m = a (cos(u) P_{l-1}^m - b P_{l-2}^m),
//!     a = sqrt((4l^2 - 1) / (l^2 - m^2)), b = sqrt(((l-1)^2 - m^2) / (4(l-1)^2 - 1))
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::surface::{Grid, Surface, Vec3};

/// One harmonic sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Harmonic {
    pub l: usize,
    pub m: i64,
    pub values: Vec<f64>,
}

/// Fully normalized `P_l^m(cos u)` for `0 <= m <= l <= n`, indexed `[l][m]`.
fn legendre(n: usize, u: f64) -> Vec<Vec<f64>> {
    let (x, s) = (u.cos(), u.sin());
    let mut p = vec![vec![0.0; n + 1]; n + 1];
    p[0][0] = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
    for m in 1..=n {
        let mf = m as f64;
        p[m][m] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * p[m - 1][m - 1];
    }
    for m in 0..n {
        p[m + 1][m] = (2.0 * m as f64 + 3.0).sqrt() * x * p[m][m];
    }
    for m in 0..=n {
        for l in m + 2..=n {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[l][m] = a * (x * p[l - 1][m] - b * p[l - 2][m]);
        }
    }
    p
}

/// All real harmonics of degree `<= n`, ordered by `l` then `m = -l..=l`.
pub fn real_harmonics(n: usize, grid: &Grid) -> Vec<Harmonic> {
    let rows: Vec<Vec<Vec<f64>>> = (0..grid.n_u).map(|i| legendre(n, grid.u(i))).collect();
    let mut out = Vec::with_capacity((n + 1) * (n + 1));
    let root2 = std::f64::consts::SQRT_2;
    for l in 0..=n {
        for m in -(l as i64)..=(l as i64) {
            let am = m.unsigned_abs() as usize;
            let mut values = Vec::with_capacity(grid.len());
            for row in &rows {
                let p = row[l][am];
                for j in 0..grid.n_v {
                    let phase = am as f64 * grid.v(j);
                    values.push(match m {
                        0 => p,
                        m if m > 0 => root2 * p * phase.cos(),
                        _ => root2 * p * phase.sin(),
                    });
                }
            }
            out.push(Harmonic { l, m, values });
        }
    }
    out
}

/// Quadrature weights `band_weight(i) * dv`; they sum to `4 pi` and integrate constants exactly.
pub fn sphere_weights(grid: &Grid) -> Vec<f64> {
    let dv = grid.dv();
    (0..grid.len()).map(|k| grid.band_weight(k / grid.n_v) * dv).collect()
}

/// Degree-`n` least-squares truncation of each coordinate function.
///
/// Coefficients solve the discrete normal equations, so a surface whose
/// coordinates are band-limited to degree `n` is reproduced up to rounding.
pub fn reconstruct(s: &Surface, n: usize) -> Result<Surface> {
    let g = s.grid();
    let basis = real_harmonics(n, &g);
    let w = sphere_weights(&g);
    let k = basis.len();
    let gram = DMatrix::<f64>::from_fn(k, k, |a, b| {
        basis[a].values.iter().zip(&basis[b].values).zip(&w).map(|((x, y), w)| x * y * w).sum()
    });
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::InvalidConfig(format!("degree {n} is not resolved by a {}x{} grid", g.n_u, g.n_v)))?;
    let mut coords = [vec![0.0; g.len()], vec![0.0; g.len()], vec![0.0; g.len()]];
    for (axis, out) in coords.iter_mut().enumerate() {
        let rhs = DVector::<f64>::from_fn(k, |a, _| {
            basis[a]
                .values
                .iter()
                .zip(s.points())
                .zip(&w)
                .map(|((y, p), w)| y * p[axis] * w)
                .sum()
        });
        let c = chol.solve(&rhs);
        for (h, coef) in basis.iter().zip(c.iter()) {
            for (o, y) in out.iter_mut().zip(&h.values) {
                *o += coef * y;
            }
        }
    }
    let points = (0..g.len()).map(|q| Vec3::new(coords[0][q], coords[1][q], coords[2][q])).collect();
    Surface::new(g, points)
}
