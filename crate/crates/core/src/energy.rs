//! Path energy and length under the gauge-invariant elastic metric.
//!
//! The velocity of frame `k` is the forward difference
//! `v_k = (Psi_{k+1} - Psi_k) (T - 1)`, projected onto the normals of frame
//! `k`. Each evaluator turns `v_k` into a kinetic value, and the energy is the
//! left-endpoint sum `sum_k kinetic_k dt`.
//!
//! * [`Evaluator::I2`] works on the metric variation directly. With
//!   `V = v_perp`, `E' = 2 V_u.f_u`, `F' = V_u.f_v + f_u.V_v`, `G' = 2 V_v.f_v`,
//!   `D = EG - F^2`, `Q = G E' - 2 F F' + E G'`, `w = V_u x f_v + f_u x V_v` and
//!   `B = G^2 E'^2 + 2(EG + F^2) F'^2 + E^2 G'^2 - 4FG E'F' + 2F^2 E'G' - 4EF F'G'`,
//!   the density is `a B D^-3/2 + (lambda/2 + c/4) Q^2 D^-3/2 - c Q (n.w) D^-1 + c |w|^2 D^-1/2`.
//!   The four summands are reported as the terms `E1..E4`.
//! * [`Evaluator::K1K2`] and [`Evaluator::Polyfit`] evaluate the curvature form
//!   with derivative-based and fitted principal curvatures. Their terms are the
//!   `a (k1 - k2)^2`, `b (k1 + k2)^2` and gradient parts in slots `E1`, `E2`, `E4`;
//!   `E3` is zero.
//! * [`Evaluator::Triangle`] is the fitted-curvature density integrated against
//!   vertex areas of the triangulated grid instead of `|g|^1/2 du dv`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{d_u, d_v, first_form_rows, scalar_partials, FundamentalForms};
use crate::metric::{curvature_density, CurvatureSource, ElasticParams};
use crate::path::Path;
use crate::surface::{PoleMargin, Surface, TangentField, Vec3};

/// Discretization of the kinetic term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Evaluator {
    I2,
    K1K2,
    Polyfit,
    Triangle,
}

impl Evaluator {
    pub const ALL: [Evaluator; 4] = [
        Evaluator::I2,
        Evaluator::K1K2,
        Evaluator::Polyfit,
        Evaluator::Triangle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Evaluator::I2 => "i2",
            Evaluator::K1K2 => "k1k2",
            Evaluator::Polyfit => "polyfit",
            Evaluator::Triangle => "triangle",
        }
    }
}

impl fmt::Display for Evaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Evaluator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "i2" | "i_ii" | "iii" => Ok(Evaluator::I2),
            "k1k2" => Ok(Evaluator::K1K2),
            "polyfit" | "poly" => Ok(Evaluator::Polyfit),
            "triangle" | "tri" => Ok(Evaluator::Triangle),
            other => Err(Error::InvalidConfig(format!("unknown evaluator '{other}'"))),
        }
    }
}

/// Energy total with its per-term and per-frame split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub evaluator: Evaluator,
    pub total: f64,
    pub terms: [f64; 4],
    /// Kinetic value of each of the `T - 1` velocity frames.
    pub per_frame: Vec<f64>,
}

/// JSON energy report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub evaluator: Evaluator,
    pub a: f64,
    pub lambda: f64,
    pub c: f64,
    pub pole_margin: usize,
    pub total: f64,
    pub terms: [f64; 4],
    pub per_frame: Vec<f64>,
}

impl EnergyReport {
    pub fn new(b: &EnergyBreakdown, p: &ElasticParams, m: PoleMargin) -> Self {
        EnergyReport {
            evaluator: b.evaluator,
            a: p.a,
            lambda: p.lambda,
            c: p.c,
            pole_margin: m.0,
            total: b.total,
            terms: b.terms,
            per_frame: b.per_frame.clone(),
        }
    }
}

/// Sum in a fixed binary-tree order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let (l, r) = xs.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}

/// `32 pi (a + lambda) (R2 - R1)^2`: energy of the radial path between concentric spheres.
pub fn theoretical_sphere_energy(r1: f64, r2: f64, p: &ElasticParams) -> f64 {
    32.0 * std::f64::consts::PI * (p.a + p.lambda) * (r2 - r1) * (r2 - r1)
}

/// Lumped vertex areas: each grid quad is split along its `(i,j)-(i+1,j+1)`
/// diagonal and every triangle gives a third of its area to each corner.
pub fn vertex_areas(s: &Surface) -> Vec<f64> {
    let g = s.grid();
    let p = s.points();
    let mut out = vec![0.0; g.len()];
    for i in 0..g.n_u - 1 {
        for j in 0..g.n_v {
            let jn = g.wrap(j, 1);
            let a = g.idx(i, j);
            let b = g.idx(i + 1, j);
            let c = g.idx(i + 1, jn);
            let d = g.idx(i, jn);
            for [x, y, z] in [[a, b, c], [a, c, d]] {
                let third = (p[y] - p[x]).cross(&(p[z] - p[x])).norm() / 6.0;
                out[x] += third;
                out[y] += third;
                out[z] += third;
            }
        }
    }
    out
}

fn normal_part(normals: &[Vec3], v: &TangentField) -> Vec<Vec3> {
    v.values().iter().zip(normals).map(|(x, n)| n * x.dot(n)).collect()
}

fn i2_kinetic(forms: &FundamentalForms, v: &TangentField, p: &ElasticParams, m: PoleMargin) -> [f64; 4] {
    let g = forms.grid;
    let vp = normal_part(&forms.normal, v);
    let w2 = 0.5 * p.lambda + 0.25 * p.c;
    let mut terms = [0.0; 4];
    for i in m.rows(&g) {
        let mut row = [0.0; 4];
        for j in 0..g.n_v {
            let k = g.idx(i, j);
            let vu: Vec3 = d_u(&g, &vp, i, j);
            let vv: Vec3 = d_v(&g, &vp, i, j);
            let (fu, fv) = (forms.f_u[k], forms.f_v[k]);
            let (e, f, gg) = (forms.big_e[k], forms.big_f[k], forms.big_g[k]);
            let ed = 2.0 * vu.dot(&fu);
            let fd = vu.dot(&fv) + fu.dot(&vv);
            let gd = 2.0 * vv.dot(&fv);
            let det = e * gg - f * f;
            let b = gg * gg * ed * ed + 2.0 * (e * gg + f * f) * fd * fd + e * e * gd * gd
                - 4.0 * f * gg * ed * fd
                + 2.0 * f * f * ed * gd
                - 4.0 * e * f * fd * gd;
            let q = gg * ed - 2.0 * f * fd + e * gd;
            let w = vu.cross(&fv) + fu.cross(&vv);
            let root = det.sqrt();
            let d32 = det * root;
            row[0] += p.a * b / d32;
            row[1] += w2 * q * q / d32;
            if p.c != 0.0 {
                row[2] -= p.c * q * forms.normal[k].dot(&w) / det;
                row[3] += p.c * w.dot(&w) / root;
            }
        }
        for t in 0..4 {
            terms[t] += row[t];
        }
    }
    let cell = g.du() * g.dv();
    terms.map(|t| t * cell)
}

fn curvature_kinetic(
    forms: &FundamentalForms,
    v: &TangentField,
    p: &ElasticParams,
    m: PoleMargin,
    weights: Option<&[f64]>,
) -> Result<[f64; 4]> {
    let g = forms.grid;
    let curv = forms.curvature()?;
    let h: Vec<f64> = v.values().iter().zip(&forms.normal).map(|(x, n)| x.dot(n)).collect();
    let (hu, hv) = scalar_partials(&g, &h);
    let cell = g.du() * g.dv();
    let mut terms = [0.0; 4];
    for i in m.rows(&g) {
        let mut row = [0.0; 3];
        for j in 0..g.n_v {
            let k = g.idx(i, j);
            let grad = (hu[k], hv[k]);
            let d = curvature_density(p, forms, curv, k, h[k] * h[k], grad, grad);
            let wt = match weights {
                Some(w) => w[k],
                None => forms.area[k] * cell,
            };
            for t in 0..3 {
                row[t] += d[t] * wt;
            }
        }
        terms[0] += row[0];
        terms[1] += row[1];
        terms[3] += row[2];
    }
    Ok(terms)
}

/// Kinetic terms `E1..E4` of velocity `v` attached to `frame`.
pub fn frame_kinetic(
    frame: &Surface,
    v: &TangentField,
    p: &ElasticParams,
    m: PoleMargin,
    evaluator: Evaluator,
) -> Result<[f64; 4]> {
    v.check_grid(&frame.grid())?;
    match evaluator {
        Evaluator::I2 => {
            let forms = first_form_rows(frame, m)?;
            Ok(i2_kinetic(&forms, v, p, m))
        }
        Evaluator::K1K2 => {
            let forms = CurvatureSource::Direct.forms(frame, m)?;
            curvature_kinetic(&forms, v, p, m, None)
        }
        Evaluator::Polyfit => {
            let forms = CurvatureSource::polyfit().forms(frame, m)?;
            curvature_kinetic(&forms, v, p, m, None)
        }
        Evaluator::Triangle => {
            let forms = CurvatureSource::polyfit().forms(frame, m)?;
            let areas = vertex_areas(frame);
            curvature_kinetic(&forms, v, p, m, Some(&areas))
        }
    }
}

fn per_frame_terms(path: &Path, p: &ElasticParams, m: PoleMargin, evaluator: Evaluator) -> Result<Vec<[f64; 4]>> {
    p.validate()?;
    m.check(&path.grid())?;
    (0..path.len() - 1)
        .into_par_iter()
        .map(|k| {
            let v = path.velocity(k);
            if v.values().iter().all(|x| *x == Vec3::zeros()) {
                return Ok([0.0; 4]);
            }
            frame_kinetic(path.frame(k), &v, p, m, evaluator).map_err(|e| e.in_frame(k))
        })
        .collect()
}

/// Energy `sum_k kinetic_k dt` of a discrete path.
pub fn path_energy(path: &Path, p: &ElasticParams, m: PoleMargin, evaluator: Evaluator) -> Result<EnergyBreakdown> {
    let frames = per_frame_terms(path, p, m, evaluator)?;
    let dt = path.dt();
    let per_frame: Vec<f64> = frames.iter().map(|t| t.iter().sum()).collect();
    let mut terms = [0.0; 4];
    for (t, slot) in terms.iter_mut().enumerate() {
        let col: Vec<f64> = frames.iter().map(|f| f[t]).collect();
        *slot = pairwise_sum(&col) * dt;
    }
    Ok(EnergyBreakdown {
        evaluator,
        total: pairwise_sum(&per_frame) * dt,
        terms,
        per_frame,
    })
}

/// Length `sum_k sqrt(kinetic_k) dt` of a discrete path.
pub fn path_length(path: &Path, p: &ElasticParams, m: PoleMargin, evaluator: Evaluator) -> Result<f64> {
    let frames = per_frame_terms(path, p, m, evaluator)?;
    let speeds: Vec<f64> = frames.iter().map(|t| t.iter().sum::<f64>().max(0.0).sqrt()).collect();
    Ok(pairwise_sum(&speeds) * path.dt())
}
