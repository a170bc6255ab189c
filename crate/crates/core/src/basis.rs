//! Perturbation basis for path straightening.
//!
//! Each real harmonic `Y_l^m` of degree `<= N` is copied onto the three
//! coordinate axes. The resulting vector fields are Gram-Schmidt
//! orthonormalized (two passes) under the H1 product
//!
//! ```text
//! (B1, B2) = int_{S^2} B1.B2 + B1_u.B2_u + B1_v.B2_v
//! ```
//!
//! on the round sphere, and each spatial field is paired with the time
//! profiles `P_j(t) = sin(pi j t) / 4`, `j = 1..=J`, which vanish at both
//! endpoints. Elements are ordered by `(l, m, axis, j)`.

use std::fs;
use std::path::{Path as FsPath, PathBuf};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{d_u, d_v};
use crate::harmonics::{real_harmonics, sphere_weights};
use crate::io::digest;
use crate::surface::{Grid, Surface, Vec3};

/// Relative pivot norm below which a field counts as dependent.
pub const PIVOT_TOL: f64 = 1e-10;

/// Environment variable naming the cache root.
pub const CACHE_ENV: &str = "ELASTICA_CACHE";

/// Degree and time-mode counts, optionally truncated to a prefix of the ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HarmonicSpec {
    pub degree: usize,
    pub time_modes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_elements: Option<usize>,
}

impl Default for HarmonicSpec {
    fn default() -> Self {
        HarmonicSpec {
            degree: 5,
            time_modes: 4,
            max_elements: None,
        }
    }
}

impl HarmonicSpec {
    pub fn new(degree: usize, time_modes: usize) -> Result<Self> {
        let s = HarmonicSpec {
            degree,
            time_modes,
            max_elements: None,
        };
        s.validate()?;
        Ok(s)
    }

    /// Smallest `degree` with `J = 4` time modes that reaches `count`
    /// elements, truncated to exactly `count`. Gives `(2, 4)` cut to 52,
    /// `(5, 4)` for 432 and `(11, 4)` for 1728.
    pub fn for_count(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidConfig("basis must have at least one element".into()));
        }
        let j = 4;
        let mut n = 1;
        while 3 * (n + 1) * (n + 1) * j < count {
            n += 1;
        }
        let mut s = HarmonicSpec::new(n, j)?;
        if s.full_count() != count {
            s.max_elements = Some(count);
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree < 1 || self.time_modes < 1 {
            return Err(Error::InvalidConfig(format!(
                "need degree >= 1 and time modes >= 1, got {} and {}",
                self.degree, self.time_modes
            )));
        }
        if self.max_elements == Some(0) {
            return Err(Error::InvalidConfig("basis must have at least one element".into()));
        }
        Ok(())
    }

    /// `3 (N + 1)^2 J`.
    pub fn full_count(&self) -> usize {
        3 * (self.degree + 1) * (self.degree + 1) * self.time_modes
    }

    pub fn count(&self) -> usize {
        self.max_elements.map_or(self.full_count(), |m| m.min(self.full_count()))
    }
}

/// `(l, m, axis, j)` label of a basis element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ElementId {
    pub l: usize,
    pub m: i64,
    pub axis: usize,
    pub j: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisElement {
    pub id: ElementId,
    /// Index of the spatial field in [`Basis::spatial`].
    pub spatial: usize,
}

/// `sin(pi x)`, exactly zero at integers.
fn sin_pi(x: f64) -> f64 {
    let r = x.rem_euclid(2.0);
    if r == 0.0 || r == 1.0 {
        0.0
    } else {
        (std::f64::consts::PI * r).sin()
    }
}

/// Time profile `P_j(t) = sin(pi j t) / 4`.
pub fn time_profile(j: usize, t: f64) -> f64 {
    0.25 * sin_pi(j as f64 * t)
}

/// Discrete H1 product of two vector fields on the round sphere.
pub fn h1_inner(grid: &Grid, a: &[Vec3], b: &[Vec3]) -> f64 {
    let w = sphere_weights(grid);
    let mut total = 0.0;
    for i in 0..grid.n_u {
        for j in 0..grid.n_v {
            let k = grid.idx(i, j);
            let au: Vec3 = d_u(grid, a, i, j);
            let bu: Vec3 = d_u(grid, b, i, j);
            let av: Vec3 = d_v(grid, a, i, j);
            let bv: Vec3 = d_v(grid, b, i, j);
            total += w[k] * (a[k].dot(&b[k]) + au.dot(&bu) + av.dot(&bv));
        }
    }
    total
}

/// A field together with its `u` and `v` derivatives, flattened, so the H1
/// product becomes a weighted dot product that commutes with linear combination.
struct Jet(Vec<f64>);

impl Jet {
    fn new(grid: &Grid, f: &[Vec3]) -> Self {
        let mut data = Vec::with_capacity(9 * grid.len());
        for i in 0..grid.n_u {
            for j in 0..grid.n_v {
                let k = grid.idx(i, j);
                let du: Vec3 = d_u(grid, f, i, j);
                let dv: Vec3 = d_v(grid, f, i, j);
                data.extend_from_slice(f[k].as_slice());
                data.extend_from_slice(du.as_slice());
                data.extend_from_slice(dv.as_slice());
            }
        }
        Jet(data)
    }

    fn dot(&self, other: &Jet, w: &[f64]) -> f64 {
        self.0
            .chunks_exact(9)
            .zip(other.0.chunks_exact(9))
            .zip(w)
            .map(|((a, b), w)| w * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum()
    }

    fn axpy(&mut self, alpha: f64, x: &Jet) {
        for (a, b) in self.0.iter_mut().zip(&x.0) {
            *a += alpha * b;
        }
    }

    fn values(&self) -> Vec<Vec3> {
        self.0.chunks_exact(9).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
    }
}

/// Result of [`orthonormalize_h1`].
#[derive(Debug, Clone)]
pub struct Orthonormalized {
    pub fields: Vec<Vec<Vec3>>,
    /// Indices (into the input) of the fields that kept their place.
    pub kept: Vec<usize>,
    /// Indices of inputs dropped as linearly dependent.
    pub dropped: Vec<usize>,
}

/// Modified Gram-Schmidt with reorthogonalization under the H1 product.
///
/// Inputs whose residual norm falls below [`PIVOT_TOL`] times their own norm
/// are dropped with a warning.
pub fn orthonormalize_h1(grid: &Grid, fields: &[Vec<Vec3>]) -> Orthonormalized {
    let w = sphere_weights(grid);
    let mut basis: Vec<Jet> = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (idx, f) in fields.iter().enumerate() {
        let mut x = Jet::new(grid, f);
        let start = x.dot(&x, &w).sqrt();
        for _ in 0..2 {
            for q in &basis {
                let c = x.dot(q, &w);
                x.axpy(-c, q);
            }
        }
        let norm = x.dot(&x, &w).sqrt();
        if !(norm > PIVOT_TOL * start) {
            let err = Error::RankDeficient { index: idx, norm };
            warn!("dropping basis field: {err}");
            dropped.push(idx);
            continue;
        }
        for v in x.0.iter_mut() {
            *v /= norm;
        }
        basis.push(x);
        kept.push(idx);
    }
    Orthonormalized {
        fields: basis.iter().map(Jet::values).collect(),
        kept,
        dropped,
    }
}

/// Orthonormal spatial fields tensored with time profiles.
#[derive(Debug, Clone)]
pub struct Basis {
    spec: HarmonicSpec,
    grid: Grid,
    spatial: Vec<Vec<Vec3>>,
    /// `(l, m, axis)` of each spatial field.
    spatial_ids: Vec<(usize, i64, usize)>,
    elements: Vec<BasisElement>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheManifest {
    degree: usize,
    time_modes: usize,
    n_u: usize,
    n_v: usize,
    spatial: Vec<(usize, i64, usize)>,
    ordering: Vec<ElementId>,
    data_file: String,
    digest: String,
}

impl Basis {
    pub fn build(spec: HarmonicSpec, grid: Grid) -> Result<Basis> {
        spec.validate()?;
        let harmonics = real_harmonics(spec.degree, &grid);
        let mut raw = Vec::with_capacity(3 * harmonics.len());
        let mut ids = Vec::with_capacity(3 * harmonics.len());
        for h in &harmonics {
            for axis in 0..3 {
                let mut e = Vec3::zeros();
                e[axis] = 1.0;
                raw.push(h.values.iter().map(|&y| e * y).collect::<Vec<_>>());
                ids.push((h.l, h.m, axis));
            }
        }
        let ortho = orthonormalize_h1(&grid, &raw);
        let spatial_ids = ortho.kept.iter().map(|&k| ids[k]).collect();
        Ok(Basis::assemble(spec, grid, ortho.fields, spatial_ids))
    }

    fn assemble(spec: HarmonicSpec, grid: Grid, spatial: Vec<Vec<Vec3>>, spatial_ids: Vec<(usize, i64, usize)>) -> Basis {
        let mut elements = Vec::new();
        'outer: for (s, &(l, m, axis)) in spatial_ids.iter().enumerate() {
            for j in 1..=spec.time_modes {
                if elements.len() == spec.count() {
                    break 'outer;
                }
                elements.push(BasisElement {
                    id: ElementId { l, m, axis, j },
                    spatial: s,
                });
            }
        }
        Basis {
            spec,
            grid,
            spatial,
            spatial_ids,
            elements,
        }
    }

    pub fn spec(&self) -> HarmonicSpec {
        self.spec
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[BasisElement] {
        &self.elements
    }

    pub fn spatial(&self) -> &[Vec<Vec3>] {
        &self.spatial
    }

    pub fn field(&self, e: &BasisElement) -> &[Vec3] {
        &self.spatial[e.spatial]
    }

    /// `frame + eps P_j(t) B` for element `e`.
    pub fn perturb(&self, frame: &Surface, e: &BasisElement, t: f64, eps: f64) -> Surface {
        let w = eps * time_profile(e.id.j, t);
        if w == 0.0 {
            return frame.clone();
        }
        let pts = frame.points().iter().zip(self.field(e)).map(|(p, b)| p + b * w).collect();
        Surface::new(frame.grid(), pts).expect("finite perturbation")
    }

    fn cache_stem(spec: &HarmonicSpec, grid: &Grid) -> String {
        format!("basis-n{}-j{}-{}x{}", spec.degree, spec.time_modes, grid.n_u, grid.n_v)
    }

    /// Cache root from `ELASTICA_CACHE`, defaulting to `./.cache`.
    pub fn default_cache_root() -> PathBuf {
        std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".cache"))
    }

    /// Load from `root` if a valid entry exists, otherwise build and store it.
    pub fn load_or_build(spec: HarmonicSpec, grid: Grid, root: &FsPath) -> Result<Basis> {
        spec.validate()?;
        let full = HarmonicSpec {
            max_elements: None,
            ..spec
        };
        match Basis::load(&full, &grid, root) {
            Ok(Some(b)) => {
                debug!("basis loaded from cache {}", root.display());
                return Ok(Basis::assemble(spec, grid, b.spatial, b.spatial_ids));
            }
            Ok(None) => {}
            Err(e) => warn!("ignoring unreadable basis cache: {e}"),
        }
        let b = Basis::build(full, grid)?;
        if let Err(e) = b.store(root) {
            warn!("could not write basis cache: {e}");
        }
        Ok(Basis::assemble(spec, grid, b.spatial, b.spatial_ids))
    }

    fn load(spec: &HarmonicSpec, grid: &Grid, root: &FsPath) -> Result<Option<Basis>> {
        let stem = Basis::cache_stem(spec, grid);
        let manifest_path = root.join(format!("{stem}.json"));
        if !manifest_path.exists() {
            return Ok(None);
        }
        let manifest: CacheManifest = serde_json::from_slice(&fs::read(&manifest_path)?)?;
        let bytes = fs::read(root.join(&manifest.data_file))?;
        if format!("{:016x}", digest(&bytes)) != manifest.digest
            || manifest.degree != spec.degree
            || manifest.time_modes != spec.time_modes
            || manifest.n_u != grid.n_u
            || manifest.n_v != grid.n_v
            || bytes.len() != manifest.spatial.len() * grid.len() * 24
        {
            return Err(Error::InvalidConfig(format!("stale cache entry {}", manifest_path.display())));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let spatial = values
            .chunks_exact(3 * grid.len())
            .map(|f| f.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect())
            .collect();
        Ok(Some(Basis::assemble(*spec, *grid, spatial, manifest.spatial)))
    }

    fn store(&self, root: &FsPath) -> Result<()> {
        fs::create_dir_all(root)?;
        let stem = Basis::cache_stem(&self.spec, &self.grid);
        let mut bytes = Vec::with_capacity(self.spatial.len() * self.grid.len() * 24);
        for f in &self.spatial {
            for v in f {
                for c in v.iter() {
                    bytes.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
        let data_file = format!("{stem}.bin");
        fs::write(root.join(&data_file), &bytes)?;
        let manifest = CacheManifest {
            degree: self.spec.degree,
            time_modes: self.spec.time_modes,
            n_u: self.grid.n_u,
            n_v: self.grid.n_v,
            spatial: self.spatial_ids.clone(),
            ordering: self.elements.iter().map(|e| e.id).collect(),
            data_file,
            digest: format!("{:016x}", digest(&bytes)),
        };
        fs::write(root.join(format!("{stem}.json")), serde_json::to_vec_pretty(&manifest)?)?;
        Ok(())
    }
}
