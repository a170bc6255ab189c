//! Principal curvatures from local quadratic fits.
//!
//! At each node a grid neighborhood is moved rigidly so the node sits at the
//! origin with the averaged facet normal on the `z`
//! axis, and `z = a1 x^2 + a2 y^2 + a3 xy + a4 x + a5 y + a6` is fitted by
//! least squares through its 6x6 normal equations. Then `K = 4 a1 a2 - a3^2`,
//! `H = a1 + a2` and `k1,2 = a1 + a2 +- sqrt((a1 - a2)^2 + a3^2)`.
//!
//! The neighborhood spans `k` rows on either side. Its column half-width is
//! chosen per node so that it reaches the same surface distance as the rows
//! (`k |f_u| du / (|f_v| dv)`, at least 1): a square index block would be
//! twice as wide along the equator as along the meridian, and the extra
//! reach biases the fitted curvature upward by about `2.4 h^2` relative.

use nalgebra::{Matrix6, SymmetricEigen, Vector6};

use crate::error::{Error, Result};
use crate::forms::{first_form_rows, Curvatures, FundamentalForms};
use crate::surface::{Grid, PoleMargin, Surface, Vec3};

/// Neighborhood radius used unless configured otherwise.
pub const DEFAULT_NEIGHBORHOOD: usize = 3;

/// Fits whose normal matrix is worse conditioned than this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Node index reached by stepping `di` rows and `dj` columns from `(i, j)`.
///
/// Rows past a pole continue on the opposite meridian (`v + pi`), which is a
/// grid column when `n_v` is even; otherwise the row index is clamped.
pub(crate) fn neighbor(g: &Grid, i: usize, j: usize, di: isize, dj: isize) -> usize {
    let last = (g.n_u - 1) as isize;
    let mut r = i as isize + di;
    let mut c = j as isize + dj;
    let half = if g.n_v.is_multiple_of(2) { (g.n_v / 2) as isize } else { 0 };
    if r < 0 {
        if half > 0 {
            r = -r;
            c += half;
        } else {
            r = 0;
        }
    } else if r > last {
        if half > 0 {
            r = 2 * last - r;
            c += half;
        } else {
            r = last;
        }
    }
    g.idx(r as usize, c.rem_euclid(g.n_v as isize) as usize)
}

/// Area-weighted normal of the four triangles fanning around each node.
pub fn facet_normals(s: &Surface) -> Vec<Vec3> {
    let g = s.grid();
    let p = s.points();
    let mut out = vec![Vec3::zeros(); g.len()];
    for i in 0..g.n_u {
        for j in 0..g.n_v {
            let c = p[g.idx(i, j)];
            let ring = [
                p[neighbor(&g, i, j, 1, 0)] - c,
                p[neighbor(&g, i, j, 0, 1)] - c,
                p[neighbor(&g, i, j, -1, 0)] - c,
                p[neighbor(&g, i, j, 0, -1)] - c,
            ];
            let mut sum = Vec3::zeros();
            for q in 0..4 {
                sum += ring[q].cross(&ring[(q + 1) % 4]);
            }
            let len = sum.norm();
            out[g.idx(i, j)] = if len > 0.0 { sum / len } else { Vec3::zeros() };
        }
    }
    // Pole rows collapse the fan; reuse the first-row mean as in the derivative normals.
    for (pole, next) in [(0, 1), (g.n_u - 1, g.n_u - 2)] {
        let mut mean = Vec3::zeros();
        for j in 0..g.n_v {
            mean += out[g.idx(next, j)];
        }
        let len = mean.norm();
        let val = if len > 0.0 { mean / len } else { Vec3::zeros() };
        for j in 0..g.n_v {
            out[g.idx(pole, j)] = val;
        }
    }
    out
}

/// Coefficients `[a1..a6]` of the least-squares quadratic through `pts`
/// (already expressed in the local frame).
pub fn fit_quadratic(pts: &[Vec3]) -> std::result::Result<[f64; 6], f64> {
    let scale = pts
        .iter()
        .map(|q| q.x.abs().max(q.y.abs()))
        .fold(0.0, f64::max);
    if scale <= 0.0 {
        return Err(f64::INFINITY);
    }
    let inv = 1.0 / scale;
    let mut normal = Matrix6::<f64>::zeros();
    let mut rhs = Vector6::<f64>::zeros();
    for q in pts {
        let (x, y) = (q.x * inv, q.y * inv);
        let b = Vector6::new(x * x, y * y, x * y, x, y, 1.0);
        normal += b * b.transpose();
        rhs += b * q.z;
    }
    let eig = SymmetricEigen::new(normal);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &e in eig.eigenvalues.iter() {
        lo = lo.min(e.abs());
        hi = hi.max(e.abs());
    }
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(condition);
    }
    // Solve through the eigen-decomposition already at hand.
    let proj = eig.eigenvectors.transpose() * rhs;
    let scaled = eig.eigenvectors * Vector6::from_fn(|r, _| proj[r] / eig.eigenvalues[r]);
    let s2 = inv * inv;
    Ok([
        scaled[0] * s2,
        scaled[1] * s2,
        scaled[2] * s2,
        scaled[3] * inv,
        scaled[4] * inv,
        scaled[5],
    ])
}

/// Curvatures from quadratic fits over `k`-neighborhoods on the margin rows.
pub fn second_form_polyfit(s: &Surface, k: usize, m: PoleMargin) -> Result<FundamentalForms> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("neighborhood radius {k} < 2")));
    }
    let mut forms = first_form_rows(s, m)?;
    let g = s.grid();
    if 2 * k + 1 > g.n_v {
        return Err(Error::InvalidConfig(format!(
            "neighborhood radius {k} too large for {} columns",
            g.n_v
        )));
    }
    let p = s.points();
    let normals = facet_normals(s);
    let mut curv = Curvatures::zeros(g.len());
    let kk = k as isize;
    let max_cols = (g.n_v / 2).saturating_sub(1).max(1);
    let mut local = Vec::new();
    for i in m.rows(&g) {
        for j in 0..g.n_v {
            let idx = g.idx(i, j);
            let reach = k as f64 * forms.big_e[idx].sqrt() * g.du();
            let step = forms.big_g[idx].sqrt() * g.dv();
            let kc = ((reach / step).round() as usize).clamp(1, max_cols) as isize;
            let c = p[idx];
            // Inward axis so that convex shapes have positive curvature.
            let z = -normals[idx];
            let mut t1 = p[g.idx(i, g.wrap(j, 1))] - p[g.idx(i, g.wrap(j, -1))];
            t1 -= z * t1.dot(&z);
            if t1.norm() < 1e-300 {
                t1 = p[neighbor(&g, i, j, 1, 0)] - p[neighbor(&g, i, j, -1, 0)];
                t1 -= z * t1.dot(&z);
            }
            let t1 = t1.normalize();
            let t2 = z.cross(&t1);
            local.clear();
            for di in -kk..=kk {
                for dj in -kc..=kc {
                    let q = p[neighbor(&g, i, j, di, dj)] - c;
                    local.push(Vec3::new(q.dot(&t1), q.dot(&t2), q.dot(&z)));
                }
            }
            let a = fit_quadratic(&local).map_err(|condition| Error::SingularFit {
                row: i,
                col: j,
                condition,
            })?;
            let gauss = 4.0 * a[0] * a[1] - a[2] * a[2];
            let mean = a[0] + a[1];
            let r = ((a[0] - a[1]).powi(2) + a[2] * a[2]).sqrt();
            curv.gauss[idx] = gauss;
            curv.mean[idx] = mean;
            curv.k1[idx] = mean + r;
            curv.k2[idx] = mean - r;
        }
    }
    forms.curvature = Some(curv);
    Ok(forms)
}
