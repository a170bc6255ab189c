//! The elastic metric on surface perturbations and its gauge-invariant restriction.
//!
//! For a perturbation `df` of `f`, the induced metric changes by
//! `dg = [[2 f_u.df_u, f_u.df_v + df_u.f_v], [.., 2 f_v.df_v]]` and the unit
//! normal by `dn = (w - n (n.w)) / |f_u x f_v|` with `w = df_u x f_v + f_u x df_v`.
//! The metric pairs two perturbations as
//!
//! ```text
//! int |g|^1/2 { a Tr((g^-1 dg1)_0 (g^-1 dg2)_0) + b Tr(g^-1 dg1) Tr(g^-1 dg2) + c dn1.dn2 }
//! ```
//!
//! with `b = (lambda + a) / 2` and `A_0` the traceless part. The gauge
//! pairing applies it to normal components only; for normal fields `h n`,
//! `k n` it reduces to the curvature form evaluated by [`curvature_pair`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{
    d_u, d_v, decompose_with, first_form_rows, scalar_partials, second_form_direct, Curvatures,
    FundamentalForms,
};
use crate::polyfit::{second_form_polyfit, DEFAULT_NEIGHBORHOOD};
use crate::surface::{PoleMargin, Surface, TangentField, Vec3};

/// Weights of the elastic metric. `b` is always derived from `a` and `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticParams {
    pub a: f64,
    pub lambda: f64,
    pub c: f64,
}

impl Default for ElasticParams {
    fn default() -> Self {
        ElasticParams {
            a: 1.0,
            lambda: 0.125,
            c: 0.125,
        }
    }
}

impl ElasticParams {
    pub fn new(a: f64, lambda: f64, c: f64) -> Result<Self> {
        let p = ElasticParams { a, lambda, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ElasticParams { a, lambda, c } = *self;
        if !(a.is_finite() && lambda.is_finite() && c.is_finite()) {
            return Err(Error::InvalidConfig("metric weights must be finite".into()));
        }
        if a < 0.0 || c < 0.0 {
            return Err(Error::InvalidConfig(format!("need a >= 0 and c >= 0, got a={a}, c={c}")));
        }
        if !(a + lambda > 0.0 || c > 0.0) {
            return Err(Error::InvalidConfig("metric is identically zero".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn b(&self) -> f64 {
        0.5 * (self.lambda + self.a)
    }
}

/// Where principal curvatures come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureSource {
    Direct,
    Polyfit { neighborhood: usize },
}

impl CurvatureSource {
    pub fn polyfit() -> Self {
        CurvatureSource::Polyfit {
            neighborhood: DEFAULT_NEIGHBORHOOD,
        }
    }

    pub fn forms(&self, s: &Surface, m: PoleMargin) -> Result<FundamentalForms> {
        match *self {
            CurvatureSource::Direct => second_form_direct(s, m),
            CurvatureSource::Polyfit { neighborhood } => second_form_polyfit(s, neighborhood, m),
        }
    }
}

/// Metric variation `(dE, dF, dG)` and normal variation produced by a field at node `(i, j)`.
#[inline]
pub(crate) fn variation(
    forms: &FundamentalForms,
    field: &[Vec3],
    i: usize,
    j: usize,
) -> ([f64; 3], Vec3) {
    let g = &forms.grid;
    let k = g.idx(i, j);
    let du: Vec3 = d_u(g, field, i, j);
    let dv: Vec3 = d_v(g, field, i, j);
    let (fu, fv) = (forms.f_u[k], forms.f_v[k]);
    let dg = [2.0 * fu.dot(&du), fu.dot(&dv) + du.dot(&fv), 2.0 * fv.dot(&dv)];
    let w = du.cross(&fv) + fu.cross(&dv);
    (dg, w)
}

/// `g^{-1} dg` as a row-major 2x2 matrix.
#[inline]
fn shape_change(e: f64, f: f64, g: f64, dg: &[f64; 3]) -> [f64; 4] {
    let det = e * g - f * f;
    let [de, df, dgg] = *dg;
    [
        (g * de - f * df) / det,
        (g * df - f * dgg) / det,
        (e * df - f * de) / det,
        (e * dgg - f * df) / det,
    ]
}

/// Pointwise metric density (without the area element) for two variations.
#[inline]
pub(crate) fn pair_density(
    p: &ElasticParams,
    forms: &FundamentalForms,
    k: usize,
    v1: &([f64; 3], Vec3),
    v2: &([f64; 3], Vec3),
) -> f64 {
    let (e, f, g) = (forms.big_e[k], forms.big_f[k], forms.big_g[k]);
    let a1 = shape_change(e, f, g, &v1.0);
    let a2 = shape_change(e, f, g, &v2.0);
    let tr1 = a1[0] + a1[3];
    let tr2 = a2[0] + a2[3];
    let tr12 = a1[0] * a2[0] + a1[1] * a2[2] + a1[2] * a2[1] + a1[3] * a2[3];
    let traceless = tr12 - 0.5 * tr1 * tr2;
    let mut out = p.a * traceless + p.b() * tr1 * tr2;
    if p.c != 0.0 {
        let n = forms.normal[k];
        let area = forms.area[k];
        let dn1 = (v1.1 - n * n.dot(&v1.1)) / area;
        let dn2 = (v2.1 - n * n.dot(&v2.1)) / area;
        out += p.c * dn1.dot(&dn2);
    }
    out
}

fn check_fields(s: &Surface, fields: &[&TangentField]) -> Result<()> {
    for f in fields {
        f.check_grid(&s.grid())?;
    }
    Ok(())
}

/// Full elastic metric between two perturbations of `s`.
pub fn metric_pair(
    s: &Surface,
    df1: &TangentField,
    df2: &TangentField,
    p: &ElasticParams,
    m: PoleMargin,
) -> Result<f64> {
    check_fields(s, &[df1, df2])?;
    let forms = first_form_rows(s, m)?;
    Ok(metric_pair_with(&forms, df1, df2, p, m))
}

pub(crate) fn metric_pair_with(
    forms: &FundamentalForms,
    df1: &TangentField,
    df2: &TangentField,
    p: &ElasticParams,
    m: PoleMargin,
) -> f64 {
    let g = forms.grid;
    let mut density = vec![0.0; g.len()];
    for i in m.rows(&g) {
        for j in 0..g.n_v {
            let k = g.idx(i, j);
            let v1 = variation(forms, df1.values(), i, j);
            let v2 = variation(forms, df2.values(), i, j);
            density[k] = pair_density(p, forms, k, &v1, &v2);
        }
    }
    forms.integrate(&density, m)
}

/// Elastic metric applied to the normal components of both perturbations.
pub fn gauge_pair(
    s: &Surface,
    df1: &TangentField,
    df2: &TangentField,
    p: &ElasticParams,
    m: PoleMargin,
) -> Result<f64> {
    check_fields(s, &[df1, df2])?;
    let forms = first_form_rows(s, m)?;
    let (_, n1) = decompose_with(&forms.normal, df1);
    let (_, n2) = decompose_with(&forms.normal, df2);
    Ok(metric_pair_with(&forms, &n1, &n2, p, m))
}

/// Pointwise curvature-form density (without area element) for normal amplitudes.
#[inline]
pub(crate) fn curvature_density(
    p: &ElasticParams,
    forms: &FundamentalForms,
    curv: &Curvatures,
    k: usize,
    hk: f64,
    grad_h: (f64, f64),
    grad_k: (f64, f64),
) -> [f64; 3] {
    let (k1, k2) = (curv.k1[k], curv.k2[k]);
    let diff = k1 - k2;
    let sum = k1 + k2;
    let bend = if p.c != 0.0 {
        p.c * forms.inverse_metric_pair(k, grad_h.0, grad_h.1, grad_k.0, grad_k.1)
    } else {
        0.0
    };
    [hk * 2.0 * p.a * diff * diff, hk * 4.0 * p.b() * sum * sum, bend]
}

/// Gauge metric between the normal fields `h n` and `k n`, written through
/// the principal curvatures.
pub fn curvature_pair(
    s: &Surface,
    h: &[f64],
    k: &[f64],
    p: &ElasticParams,
    m: PoleMargin,
    source: CurvatureSource,
) -> Result<f64> {
    let g = s.grid();
    if h.len() != g.len() || k.len() != g.len() {
        return Err(Error::InvalidConfig("scalar fields do not match the grid".into()));
    }
    let forms = source.forms(s, m)?;
    let curv = forms.curvature()?;
    let (hu, hv) = scalar_partials(&g, h);
    let (ku, kv) = scalar_partials(&g, k);
    let mut density = vec![0.0; g.len()];
    for i in m.rows(&g) {
        for j in 0..g.n_v {
            let n = g.idx(i, j);
            let d = curvature_density(p, &forms, curv, n, h[n] * k[n], (hu[n], hv[n]), (ku[n], kv[n]));
            density[n] = d[0] + d[1] + d[2];
        }
    }
    Ok(forms.integrate(&density, m))
}
