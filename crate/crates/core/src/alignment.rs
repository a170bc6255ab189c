//! Scale, translation and rotation normalization through inscribed-volume moments.
//!
//! Each grid quad `(i,j), (i+1,j), (i,j+1), (i+1,j+1)` is cut into two
//! triangles that, together with the origin, span signed tetrahedra. Their
//! volumes, centroids and exact second moments are summed to give the
//! volume, center of mass and moment tensor of the enclosed solid.

use log::{debug, warn};
use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::energy::{path_energy, Evaluator};
use crate::error::{Error, Result};
use crate::metric::ElasticParams;
use crate::path::Path;
use crate::surface::{PoleMargin, Surface, Vec3};

/// Volumes below this magnitude cannot be normalized.
pub const MIN_VOLUME: f64 = 1e-12;

/// Smallest relative eigenvalue gap accepted by [`fit_ellipsoid`].
pub const TRIAXIAL_GAP: f64 = 1e-6;

/// Signed tetrahedron volumes of the two triangles of every quad.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeCells {
    /// Tetrahedra `0, f(i,j), f(i+1,j), f(i,j+1)`, row-major over `(n_u - 1) x n_v` quads.
    pub vol1: Vec<f64>,
    /// Tetrahedra `0, f(i+1,j+1), f(i+1,j), f(i,j+1)`.
    pub vol2: Vec<f64>,
    pub total: f64,
}

/// The three quad corners shared by both tetrahedra plus the far corner.
fn quads(s: &Surface) -> impl Iterator<Item = (usize, [Vec3; 4])> + '_ {
    let g = s.grid();
    let p = s.points();
    (0..g.n_u - 1).flat_map(move |i| {
        (0..g.n_v).map(move |j| {
            let jn = g.wrap(j, 1);
            let q = [p[g.idx(i, j)], p[g.idx(i + 1, j)], p[g.idx(i, jn)], p[g.idx(i + 1, jn)]];
            (i * g.n_v + j, q)
        })
    })
}

#[inline]
fn det3(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    a.dot(&b.cross(c))
}

/// Signed volume enclosed by `s`, positive for the outward orientation of the
/// standard grid (normal `f_u x f_v`).
pub fn inscribed_volume(s: &Surface) -> VolumeCells {
    let g = s.grid();
    let n = (g.n_u - 1) * g.n_v;
    let mut vol1 = vec![0.0; n];
    let mut vol2 = vec![0.0; n];
    for (c, [a, b, d, e]) in quads(s) {
        vol1[c] = det3(&(b - a), &(d - a), &a) / 6.0;
        vol2[c] = det3(&(d - e), &(b - e), &e) / 6.0;
    }
    let total = vol1.iter().zip(&vol2).map(|(x, y)| x + y).sum();
    VolumeCells { vol1, vol2, total }
}

/// Centroid of the enclosed solid.
pub fn center_of_mass(s: &Surface, cells: &VolumeCells) -> Result<Vec3> {
    if !(cells.total.abs() >= MIN_VOLUME) {
        return Err(Error::ZeroVolume { volume: cells.total });
    }
    let mut sum = Vec3::zeros();
    for (c, [a, b, d, e]) in quads(s) {
        sum += (a + b + d) * (0.25 * cells.vol1[c]) + (e + b + d) * (0.25 * cells.vol2[c]);
    }
    Ok(sum / cells.total)
}

/// `int x x^T dvol` over the enclosed solid, taken about the origin.
pub fn second_moments(s: &Surface, cells: &VolumeCells) -> Matrix3<f64> {
    let pair = |x: Vec3, y: Vec3| {
        let t = x + y;
        t * t.transpose()
    };
    let mut m = Matrix3::zeros();
    for (c, [a, b, d, e]) in quads(s) {
        let m1 = (pair(a, d) + pair(a, b) + pair(b, d)) / 20.0;
        let m2 = (pair(b, d) + pair(e, b) + pair(e, d)) / 20.0;
        m += m1 * cells.vol1[c] + m2 * cells.vol2[c];
    }
    // Symmetrize away rounding.
    (m + m.transpose()) * 0.5
}

/// Principal axes and moment ellipsoid of a moment tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidFit {
    /// Columns are the principal axes by decreasing eigenvalue; `det U = +1`.
    pub u: Matrix3<f64>,
    pub eigenvalues: [f64; 3],
    /// `(4 pi / 15)^(1/5) det(M)^(-1/10) U sqrt(S) U^T`.
    pub a: Matrix3<f64>,
    /// Relative gaps `(s1 - s2) / s1` and `(s2 - s3) / s1`.
    pub gaps: [f64; 2],
}

pub fn fit_ellipsoid(m: &Matrix3<f64>) -> Result<EllipsoidFit> {
    let eig = SymmetricEigen::new(*m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let s = order.map(|k| eig.eigenvalues[k]);
    let scale = s[0].abs();
    let gaps = if scale > 0.0 {
        [(s[0] - s[1]) / scale, (s[1] - s[2]) / scale]
    } else {
        [0.0, 0.0]
    };
    if !(s[2] > 0.0) || gaps[0] < TRIAXIAL_GAP || gaps[1] < TRIAXIAL_GAP {
        return Err(Error::NotTriaxial { gaps });
    }
    let mut u = Matrix3::zeros();
    for (col, &k) in order.iter().enumerate() {
        let mut axis = eig.eigenvectors.column(k).into_owned();
        let lead = axis.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if lead < 0.0 {
            axis = -axis;
        }
        u.set_column(col, &axis);
    }
    if u.determinant() < 0.0 {
        let flipped = -u.column(2);
        u.set_column(2, &flipped);
    }
    let root = Matrix3::from_diagonal(&Vec3::new(s[0].sqrt(), s[1].sqrt(), s[2].sqrt()));
    let factor = (4.0 * std::f64::consts::PI / 15.0).powf(0.2) * (s[0] * s[1] * s[2]).powf(-0.1);
    let a = u * root * u.transpose() * factor;
    Ok(EllipsoidFit {
        u,
        eigenvalues: s,
        a,
        gaps,
    })
}

/// The four axis-sign changes with determinant `+1`, in tie-break order.
pub const SIGN_HYPOTHESES: [[f64; 3]; 4] = [
    [1.0, 1.0, 1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
];

/// Everything [`align_pair`] measured on the way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignReport {
    pub vol1: f64,
    pub vol2: f64,
    /// Centers after scaling to unit volume.
    pub center1: Vec3,
    pub center2: Vec3,
    #[serde(rename = "U1")]
    pub u1: Matrix3<f64>,
    #[serde(rename = "U2")]
    pub u2: Matrix3<f64>,
    pub hypothesis_chosen: usize,
    pub hypothesis_energies: [f64; 4],
    pub axis_gaps: [[f64; 2]; 2],
}

/// Scale to unit volume and move the center of mass to the origin.
pub fn normalize(s: &Surface) -> Result<(Surface, f64, Vec3)> {
    let cells = inscribed_volume(s);
    let vol = cells.total;
    if !(vol.abs() >= MIN_VOLUME) {
        return Err(Error::ZeroVolume { volume: vol });
    }
    if vol < 0.0 {
        warn!("surface is inward oriented (volume {vol:e})");
    }
    let scaled = s.scaled(1.0 / vol.abs().cbrt());
    let cells = inscribed_volume(&scaled);
    let center = center_of_mass(&scaled, &cells)?;
    Ok((scaled.translated(&-center), vol, center))
}

/// Align with the default metric weights and pole margin.
pub fn align_pair(s1: &Surface, s2: &Surface) -> Result<(Surface, Surface, AlignReport)> {
    align_pair_with(s1, s2, &ElasticParams::default(), PoleMargin::default())
}

/// Normalize both surfaces and rotate the second so its principal axes match the first.
///
/// The axis signs are only defined up to the four determinant-preserving
/// flips; the flip giving the lowest two-frame triangle-evaluator energy wins,
/// earlier hypotheses winning ties.
pub fn align_pair_with(
    s1: &Surface,
    s2: &Surface,
    p: &ElasticParams,
    m: PoleMargin,
) -> Result<(Surface, Surface, AlignReport)> {
    if s1.grid() != s2.grid() {
        return Err(crate::surface::shape_mismatch(&s1.grid(), &s2.grid()));
    }
    let (f1, vol1, center1) = normalize(s1)?;
    let (f2, vol2, center2) = normalize(s2)?;
    let fit1 = fit_ellipsoid(&second_moments(&f1, &inscribed_volume(&f1)))?;
    let fit2 = fit_ellipsoid(&second_moments(&f2, &inscribed_volume(&f2)))?;
    let mut best: Option<(usize, Surface)> = None;
    let mut energies = [f64::INFINITY; 4];
    for (h, signs) in SIGN_HYPOTHESES.iter().enumerate() {
        let d = Matrix3::from_diagonal(&Vec3::from(*signs));
        let r = fit1.u * d * fit2.u.transpose();
        let cand = f2.rotated(&r);
        let path = Path::new(vec![f1.clone(), cand.clone()])?;
        energies[h] = match path_energy(&path, p, m, Evaluator::Triangle) {
            Ok(b) => b.total,
            Err(e) => {
                debug!("sign hypothesis {h} rejected: {e}");
                f64::INFINITY
            }
        };
        let better = match &best {
            None => true,
            Some((b, _)) => energies[h] < energies[*b],
        };
        if better {
            best = Some((h, cand));
        }
    }
    let (chosen, f2) = best.expect("at least one hypothesis");
    let mut sorted = energies;
    sorted.sort_by(f64::total_cmp);
    debug!("sign hypothesis {chosen} chosen, energy gap to runner-up {:e}", sorted[1] - sorted[0]);
    let report = AlignReport {
        vol1,
        vol2,
        center1,
        center2,
        u1: fit1.u,
        u2: fit2.u,
        hypothesis_chosen: chosen,
        hypothesis_energies: energies,
        axis_gaps: [fit1.gaps, fit2.gaps],
    };
    Ok((f1, f2, report))
}
