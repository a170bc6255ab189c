//! Finite-difference derivatives, fundamental forms and curvature on the grid.
//!
//! Derivatives use second-order central differences: periodic in `v`, and
//! one-sided second-order stencils on the two pole rows in `u`.
//!
//! Curvature sign: the shape operator is taken with respect to the inward
//! normal `-n`, so a round sphere of radius `R` has `k1 = k2 = H = 1/R`. The
//! unit normal `n = f_u x f_v / |f_u x f_v|` itself points outward for the
//! standard grid orientation. Only squares of curvatures enter the energies.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};
use crate::surface::{Grid, PoleMargin, Surface, TangentField, Vec3};

/// Default immersion threshold on `|f_u x f_v|`.
pub const IMMERSION_EPS: f64 = 1e-10;

/// Radicands of `H^2 - K` in `[-UMBILIC_CLAMP, 0)` are treated as zero.
pub const UMBILIC_CLAMP: f64 = 1e-12;

pub(crate) trait Field: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {}
impl<T> Field for T where T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T> {}

#[inline]
pub(crate) fn d_u<T: Field>(g: &Grid, data: &[T], i: usize, j: usize) -> T {
    let h = g.du();
    let at = |r: usize| data[g.idx(r, j)];
    let n = g.n_u;
    if i == 0 {
        (at(1) * 4.0 - at(0) * 3.0 - at(2)) * (0.5 / h)
    } else if i == n - 1 {
        (at(n - 1) * 3.0 - at(n - 2) * 4.0 + at(n - 3)) * (0.5 / h)
    } else {
        (at(i + 1) - at(i - 1)) * (0.5 / h)
    }
}

#[inline]
pub(crate) fn d_v<T: Field>(g: &Grid, data: &[T], i: usize, j: usize) -> T {
    let h = g.dv();
    (data[g.idx(i, g.wrap(j, 1))] - data[g.idx(i, g.wrap(j, -1))]) * (0.5 / h)
}

#[inline]
pub(crate) fn d_uu<T: Field>(g: &Grid, data: &[T], i: usize, j: usize) -> T {
    let h2 = g.du() * g.du();
    let at = |r: usize| data[g.idx(r, j)];
    let n = g.n_u;
    if i == 0 {
        (at(0) * 2.0 - at(1) * 5.0 + at(2) * 4.0 - at(3)) * (1.0 / h2)
    } else if i == n - 1 {
        (at(n - 1) * 2.0 - at(n - 2) * 5.0 + at(n - 3) * 4.0 - at(n - 4)) * (1.0 / h2)
    } else {
        (at(i + 1) - at(i) * 2.0 + at(i - 1)) * (1.0 / h2)
    }
}

#[inline]
pub(crate) fn d_vv<T: Field>(g: &Grid, data: &[T], i: usize, j: usize) -> T {
    let h2 = g.dv() * g.dv();
    (data[g.idx(i, g.wrap(j, 1))] - data[g.idx(i, j)] * 2.0 + data[g.idx(i, g.wrap(j, -1))]) * (1.0 / h2)
}

#[inline]
pub(crate) fn d_uv<T: Field>(g: &Grid, data: &[T], i: usize, j: usize) -> T {
    let h = g.du();
    let dv_row = |r: usize| d_v(g, data, r, j);
    let n = g.n_u;
    if i == 0 {
        (dv_row(1) * 4.0 - dv_row(0) * 3.0 - dv_row(2)) * (0.5 / h)
    } else if i == n - 1 {
        (dv_row(n - 1) * 3.0 - dv_row(n - 2) * 4.0 + dv_row(n - 3)) * (0.5 / h)
    } else {
        (dv_row(i + 1) - dv_row(i - 1)) * (0.5 / h)
    }
}

/// First partial derivatives `(f_u, f_v)` at every node.
pub fn partials(s: &Surface) -> (TangentField, TangentField) {
    let g = s.grid();
    let p = s.points();
    (
        TangentField::from_fn(g, |i, j| d_u(&g, p, i, j)),
        TangentField::from_fn(g, |i, j| d_v(&g, p, i, j)),
    )
}

/// Partial derivatives of a scalar field with the same stencils as [`partials`].
pub fn scalar_partials(g: &Grid, phi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut pu = Vec::with_capacity(g.len());
    let mut pv = Vec::with_capacity(g.len());
    for i in 0..g.n_u {
        for j in 0..g.n_v {
            pu.push(d_u(g, phi, i, j));
            pv.push(d_v(g, phi, i, j));
        }
    }
    (pu, pv)
}

/// Unit normals from first derivatives. Pole rows, where `f_u x f_v`
/// collapses, take the normalized mean of the adjacent row's normals.
pub(crate) fn normals_from(g: &Grid, f_u: &[Vec3], f_v: &[Vec3]) -> Vec<Vec3> {
    let mut n: Vec<Vec3> = f_u
        .iter()
        .zip(f_v)
        .map(|(a, b)| {
            let c = a.cross(b);
            let len = c.norm();
            if len > 0.0 {
                c / len
            } else {
                Vec3::zeros()
            }
        })
        .collect();
    for (pole, next) in [(0, 1), (g.n_u - 1, g.n_u - 2)] {
        let mut mean = Vec3::zeros();
        for j in 0..g.n_v {
            mean += n[g.idx(next, j)];
        }
        let len = mean.norm();
        let val = if len > 0.0 { mean / len } else { Vec3::zeros() };
        for j in 0..g.n_v {
            n[g.idx(pole, j)] = val;
        }
    }
    n
}

/// Principal curvatures from Gauss and mean curvature, `k1 >= k2`.
#[inline]
pub fn principal_from(gauss: f64, mean: f64) -> (f64, f64) {
    let mut rad = mean * mean - gauss;
    if rad < 0.0 {
        if rad < -UMBILIC_CLAMP {
            log::trace!("H^2 - K = {rad:e} below umbilic clamp");
        }
        rad = 0.0;
    }
    let r = rad.sqrt();
    (mean + r, mean - r)
}

/// Curvature fields. Entries outside the computed rows are zero.
#[derive(Debug, Clone)]
pub struct Curvatures {
    pub gauss: Vec<f64>,
    pub mean: Vec<f64>,
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
}

impl Curvatures {
    pub(crate) fn zeros(n: usize) -> Self {
        Curvatures {
            gauss: vec![0.0; n],
            mean: vec![0.0; n],
            k1: vec![0.0; n],
            k2: vec![0.0; n],
        }
    }

    /// Shape index `2/pi * atan((k1 + k2) / (k1 - k2))`; umbilics map to `+-1`.
    pub fn shape_index(&self) -> Vec<f64> {
        self.k1
            .iter()
            .zip(&self.k2)
            .map(|(a, b)| std::f64::consts::FRAC_2_PI * (a + b).atan2(a - b))
            .map(|x| if x > 1.0 { 2.0 - x } else if x < -1.0 { -2.0 - x } else { x })
            .collect()
    }
}

/// Per-node first and (optionally) second fundamental form data.
#[derive(Debug, Clone)]
pub struct FundamentalForms {
    pub grid: Grid,
    /// Rows on which the immersion check ran and curvature was computed.
    pub margin: PoleMargin,
    pub f_u: Vec<Vec3>,
    pub f_v: Vec<Vec3>,
    /// `E = f_u . f_u`.
    pub big_e: Vec<f64>,
    /// `F = f_u . f_v`.
    pub big_f: Vec<f64>,
    /// `G = f_v . f_v`.
    pub big_g: Vec<f64>,
    pub normal: Vec<Vec3>,
    /// `sqrt(EG - F^2)`.
    pub area: Vec<f64>,
    /// Second-form coefficients `(e, f, g)` when computed from derivatives.
    pub second: Option<Vec<[f64; 3]>>,
    pub curvature: Option<Curvatures>,
}

impl FundamentalForms {
    #[inline]
    pub fn det(&self, k: usize) -> f64 {
        self.big_e[k] * self.big_g[k] - self.big_f[k] * self.big_f[k]
    }

    /// `(a, b) g^{-1} (c, d)^T` at node `k`.
    #[inline]
    pub fn inverse_metric_pair(&self, k: usize, a: f64, b: f64, c: f64, d: f64) -> f64 {
        let (e, f, g) = (self.big_e[k], self.big_f[k], self.big_g[k]);
        (a * (g * c - f * d) + b * (e * d - f * c)) / (e * g - f * f)
    }

    /// Quadrature of `phi` against the area element over the margin rows.
    pub fn integrate(&self, phi: &[f64], m: PoleMargin) -> f64 {
        let g = self.grid;
        let mut total = 0.0;
        for i in m.rows(&g) {
            let mut row = 0.0;
            for j in 0..g.n_v {
                let k = g.idx(i, j);
                row += phi[k] * self.area[k];
            }
            total += row;
        }
        total * g.du() * g.dv()
    }

    pub fn curvature(&self) -> Result<&Curvatures> {
        self.curvature
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("curvature has not been computed".into()))
    }
}

/// First fundamental form, normals and area element; immersion checked on rows `1..n_u-1`.
pub fn first_form(s: &Surface) -> Result<FundamentalForms> {
    first_form_rows(s, PoleMargin(1))
}

/// As [`first_form`], with the immersion check restricted to the margin rows.
pub fn first_form_rows(s: &Surface, m: PoleMargin) -> Result<FundamentalForms> {
    let g = s.grid();
    m.check(&g)?;
    let (fu, fv) = partials(s);
    let f_u = fu.values().to_vec();
    let f_v = fv.values().to_vec();
    let n = g.len();
    let mut big_e = Vec::with_capacity(n);
    let mut big_f = Vec::with_capacity(n);
    let mut big_g = Vec::with_capacity(n);
    let mut area = Vec::with_capacity(n);
    for k in 0..n {
        let (a, b) = (&f_u[k], &f_v[k]);
        let (e, f, gg) = (a.dot(a), a.dot(b), b.dot(b));
        big_e.push(e);
        big_f.push(f);
        big_g.push(gg);
        area.push((e * gg - f * f).max(0.0).sqrt());
    }
    let min_det = IMMERSION_EPS * IMMERSION_EPS;
    for i in m.rows(&g) {
        for j in 0..g.n_v {
            let k = g.idx(i, j);
            let det = big_e[k] * big_g[k] - big_f[k] * big_f[k];
            if !(det > min_det) {
                return Err(Error::DegenerateMetric {
                    frame: None,
                    row: i,
                    col: j,
                    det,
                });
            }
        }
    }
    let normal = normals_from(&g, &f_u, &f_v);
    Ok(FundamentalForms {
        grid: g,
        margin: m,
        f_u,
        f_v,
        big_e,
        big_f,
        big_g,
        normal,
        area,
        second: None,
        curvature: None,
    })
}

/// Second fundamental form and curvatures from second differences, on the margin rows.
pub fn second_form_direct(s: &Surface, m: PoleMargin) -> Result<FundamentalForms> {
    let mut forms = first_form_rows(s, m)?;
    let g = s.grid();
    let p = s.points();
    let mut second = vec![[0.0; 3]; g.len()];
    let mut curv = Curvatures::zeros(g.len());
    for i in m.rows(&g) {
        for j in 0..g.n_v {
            let k = g.idx(i, j);
            let n = forms.normal[k];
            let e = d_uu(&g, p, i, j).dot(&n);
            let f = d_uv(&g, p, i, j).dot(&n);
            let gg = d_vv(&g, p, i, j).dot(&n);
            second[k] = [e, f, gg];
            let (ee, ff, g2) = (forms.big_e[k], forms.big_f[k], forms.big_g[k]);
            let det = ee * g2 - ff * ff;
            let gauss = (e * gg - f * f) / det;
            // Inward normal convention: negate the outward-normal mean curvature.
            let mean = -0.5 * (e * g2 + gg * ee - 2.0 * f * ff) / det;
            let (k1, k2) = principal_from(gauss, mean);
            curv.gauss[k] = gauss;
            curv.mean[k] = mean;
            curv.k1[k] = k1;
            curv.k2[k] = k2;
        }
    }
    forms.second = Some(second);
    forms.curvature = Some(curv);
    Ok(forms)
}

/// Split `delta_f` into tangential and normal parts relative to the surface normals.
pub fn decompose(s: &Surface, df: &TangentField) -> Result<(TangentField, TangentField)> {
    let g = s.grid();
    df.check_grid(&g)?;
    let (fu, fv) = partials(s);
    let normals = normals_from(&g, fu.values(), fv.values());
    Ok(decompose_with(&normals, df))
}

pub(crate) fn decompose_with(normals: &[Vec3], df: &TangentField) -> (TangentField, TangentField) {
    let g = df.grid();
    let mut tangent = Vec::with_capacity(g.len());
    let mut normal = Vec::with_capacity(g.len());
    for (v, n) in df.values().iter().zip(normals) {
        let perp = n * v.dot(n);
        normal.push(perp);
        tangent.push(v - perp);
    }
    (
        TangentField::new(g, tangent).expect("finite"),
        TangentField::new(g, normal).expect("finite"),
    )
}

/// `sum phi * sqrt(EG - F^2) * du * dv` over rows `m ..= n_u - 1 - m`.
pub fn integrate_scalar(s: &Surface, phi: &[f64], m: PoleMargin) -> Result<f64> {
    let g = s.grid();
    m.check(&g)?;
    if phi.len() != g.len() {
        return Err(Error::InvalidConfig(format!(
            "scalar field has {} entries, grid has {}",
            phi.len(),
            g.len()
        )));
    }
    let p = s.points();
    let mut total = 0.0;
    for i in m.rows(&g) {
        let mut row = 0.0;
        for j in 0..g.n_v {
            let a: Vec3 = d_u(&g, p, i, j);
            let b: Vec3 = d_v(&g, p, i, j);
            row += phi[g.idx(i, j)] * a.cross(&b).norm();
        }
        total += row;
    }
    Ok(total * g.du() * g.dv())
}
