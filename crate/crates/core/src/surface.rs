//! Grid-sampled spherical surfaces and the vector fields that live on them.
//!
//! A surface is an `n_u x n_v` array of points. Row `i` sits at polar angle
//! `u_i = pi * i / (n_u - 1)`, so rows `0` and `n_u - 1` are the two poles;
//! column `j` sits at azimuth `v_j = 2 pi j / n_v` and wraps periodically.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Smallest grid accepted in either direction.
pub const MIN_GRID: usize = 8;

/// Shape of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    pub n_u: usize,
    pub n_v: usize,
}

impl Grid {
    pub fn new(n_u: usize, n_v: usize) -> Result<Self> {
        if n_u < MIN_GRID || n_v < MIN_GRID {
            return Err(Error::InvalidSurface(format!(
                "grid {n_u}x{n_v} is smaller than {MIN_GRID}x{MIN_GRID}"
            )));
        }
        Ok(Grid { n_u, n_v })
    }

    pub fn square(n: usize) -> Result<Self> {
        Grid::new(n, n)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_u * self.n_v
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn du(&self) -> f64 {
        PI / (self.n_u - 1) as f64
    }

    #[inline]
    pub fn dv(&self) -> f64 {
        2.0 * PI / self.n_v as f64
    }

    #[inline]
    pub fn u(&self, i: usize) -> f64 {
        PI * i as f64 / (self.n_u - 1) as f64
    }

    #[inline]
    pub fn v(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_v as f64
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_v + j
    }

    /// Column `j + offset` with periodic wrap.
    #[inline]
    pub fn wrap(&self, j: usize, offset: isize) -> usize {
        (j as isize + offset).rem_euclid(self.n_v as isize) as usize
    }

    /// Unit-sphere point for node `(i, j)`.
    pub fn sphere_point(&self, i: usize, j: usize) -> Vec3 {
        let (u, v) = (self.u(i), self.v(j));
        Vec3::new(u.sin() * v.cos(), u.sin() * v.sin(), u.cos())
    }

    /// Area of the unit-sphere band that row `i` represents, per unit of `v`.
    ///
    /// Summing `band_weight(i) * dv` over the whole grid gives exactly `4 pi`.
    pub fn band_weight(&self, i: usize) -> f64 {
        let half = 0.5 * self.du();
        let lo = (self.u(i) - half).max(0.0);
        let hi = (self.u(i) + half).min(PI);
        lo.cos() - hi.cos()
    }
}

/// Number of grid rows dropped next to each pole in every surface integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PoleMargin(pub usize);

impl Default for PoleMargin {
    fn default() -> Self {
        PoleMargin(3)
    }
}

impl PoleMargin {
    pub fn check(&self, grid: &Grid) -> Result<()> {
        if self.0 < 1 || 2 * self.0 >= grid.n_u {
            return Err(Error::InvalidConfig(format!(
                "pole margin {} is invalid for {} rows",
                self.0, grid.n_u
            )));
        }
        Ok(())
    }

    /// Rows that take part in integrals.
    pub fn rows(&self, grid: &Grid) -> std::ops::RangeInclusive<usize> {
        self.0..=grid.n_u - 1 - self.0
    }
}

/// A sampled embedding of the sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    grid: Grid,
    points: Vec<Vec3>,
}

impl Surface {
    pub fn new(grid: Grid, points: Vec<Vec3>) -> Result<Self> {
        Grid::new(grid.n_u, grid.n_v)?;
        if points.len() != grid.len() {
            return Err(Error::InvalidSurface(format!(
                "expected {} points, got {}",
                grid.len(),
                points.len()
            )));
        }
        if let Some(k) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidSurface(format!(
                "non-finite coordinate at row {}, column {}",
                k / grid.n_v,
                k % grid.n_v
            )));
        }
        Ok(Surface { grid, points })
    }

    /// Sample `f(u, v)` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> Vec3) -> Result<Self> {
        let mut points = Vec::with_capacity(grid.len());
        for i in 0..grid.n_u {
            for j in 0..grid.n_v {
                points.push(f(grid.u(i), grid.v(j)));
            }
        }
        Surface::new(grid, points)
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Vec3 {
        self.points[self.grid.idx(i, j)]
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }

    pub fn map(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<Surface> {
        Surface::new(self.grid, self.points.iter().map(f).collect())
    }

    pub fn scaled(&self, beta: f64) -> Surface {
        Surface {
            grid: self.grid,
            points: self.points.iter().map(|p| p * beta).collect(),
        }
    }

    pub fn translated(&self, t: &Vec3) -> Surface {
        Surface {
            grid: self.grid,
            points: self.points.iter().map(|p| p + t).collect(),
        }
    }

    pub fn rotated(&self, r: &nalgebra::Matrix3<f64>) -> Surface {
        Surface {
            grid: self.grid,
            points: self.points.iter().map(|p| r * p).collect(),
        }
    }

    /// `self + eps * field`.
    pub fn displaced(&self, field: &TangentField, eps: f64) -> Result<Surface> {
        field.check_grid(&self.grid)?;
        Surface::new(
            self.grid,
            self.points
                .iter()
                .zip(&field.values)
                .map(|(p, d)| p + d * eps)
                .collect(),
        )
    }

    /// Convex combination `self + t * (other - self)`; exact at both ends and for equal inputs.
    pub fn lerp(&self, other: &Surface, t: f64) -> Result<Surface> {
        if self.grid != other.grid {
            return Err(shape_mismatch(&self.grid, &other.grid));
        }
        Ok(Surface {
            grid: self.grid,
            points: self
                .points
                .iter()
                .zip(&other.points)
                .map(|(a, b)| if t == 1.0 { *b } else { a + (b - a) * t })
                .collect(),
        })
    }

    /// Cyclic shift of the column index: new column `j` holds old column `j - shift`.
    pub fn shift_v(&self, shift: i64) -> Surface {
        let g = self.grid;
        let mut points = Vec::with_capacity(g.len());
        for i in 0..g.n_u {
            for j in 0..g.n_v {
                points.push(self.at(i, g.wrap(j, -(shift as isize))));
            }
        }
        Surface { grid: g, points }
    }

    /// Largest distance between two samples, estimated from the bounding box diagonal.
    pub fn diameter(&self) -> f64 {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in &self.points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (hi - lo).norm()
    }

    /// Field of differences `other - self`.
    pub fn difference(&self, other: &Surface) -> Result<TangentField> {
        if self.grid != other.grid {
            return Err(shape_mismatch(&self.grid, &other.grid));
        }
        Ok(TangentField {
            grid: self.grid,
            values: self
                .points
                .iter()
                .zip(&other.points)
                .map(|(a, b)| b - a)
                .collect(),
        })
    }
}

pub(crate) fn shape_mismatch(expected: &Grid, found: &Grid) -> Error {
    Error::ShapeMismatch {
        expected_u: expected.n_u,
        expected_v: expected.n_v,
        found_u: found.n_u,
        found_v: found.n_v,
    }
}

/// A 3D vector attached to every node of a surface grid (a perturbation `delta f`).
#[derive(Debug, Clone, PartialEq)]
pub struct TangentField {
    grid: Grid,
    values: Vec<Vec3>,
}

impl TangentField {
    pub fn new(grid: Grid, values: Vec<Vec3>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidSurface(format!(
                "expected {} vectors, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidSurface("non-finite field value".into()));
        }
        Ok(TangentField { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        TangentField {
            grid,
            values: vec![Vec3::zeros(); grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(usize, usize) -> Vec3) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n_u {
            for j in 0..grid.n_v {
                values.push(f(i, j));
            }
        }
        TangentField { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [Vec3] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Vec3 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if &self.grid != grid {
            return Err(shape_mismatch(grid, &self.grid));
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> TangentField {
        TangentField {
            grid: self.grid,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn shift_v(&self, shift: i64) -> TangentField {
        let g = self.grid;
        TangentField::from_fn(g, |i, j| self.at(i, g.wrap(j, -(shift as isize))))
    }

    /// Pointwise dot product with another field.
    pub fn dot(&self, other: &TangentField) -> Vec<f64> {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.dot(b))
            .collect()
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

impl Add for &TangentField {
    type Output = TangentField;
    fn add(self, rhs: &TangentField) -> TangentField {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        TangentField {
            grid: self.grid,
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &TangentField {
    type Output = TangentField;
    fn sub(self, rhs: &TangentField) -> TangentField {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        TangentField {
            grid: self.grid,
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul<f64> for &TangentField {
    type Output = TangentField;
    fn mul(self, rhs: f64) -> TangentField {
        self.scaled(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_weights_cover_the_sphere() {
        for n in [8usize, 33, 100] {
            let g = Grid::square(n).unwrap();
            let total: f64 = (0..g.n_u).map(|i| g.band_weight(i)).sum::<f64>() * g.dv() * g.n_v as f64;
            assert!((total - 4.0 * PI).abs() < 1e-12, "{total}");
        }
    }

    #[test]
    fn rejects_small_grids_and_nan() {
        assert!(Grid::new(7, 20).is_err());
        let g = Grid::square(8).unwrap();
        let mut pts = vec![Vec3::zeros(); g.len()];
        pts[5].x = f64::NAN;
        assert!(matches!(Surface::new(g, pts), Err(Error::InvalidSurface(_))));
    }

    #[test]
    fn v_shift_round_trips() {
        let g = Grid::new(10, 12).unwrap();
        let s = Surface::from_fn(g, |u, v| Vec3::new(u, v, u * v)).unwrap();
        assert_eq!(s.shift_v(7).shift_v(-7), s);
        assert_eq!(s.shift_v(12), s);
        assert_eq!(s.shift_v(1).at(3, 1), s.at(3, 0));
    }

    #[test]
    fn pole_margin_bounds() {
        let g = Grid::square(10).unwrap();
        assert!(PoleMargin(0).check(&g).is_err());
        assert!(PoleMargin(5).check(&g).is_err());
        assert!(PoleMargin(4).check(&g).is_ok());
        assert_eq!(PoleMargin(3).rows(&g), 3..=6);
    }
}
