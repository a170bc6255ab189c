//! Reparameterizations of the sphere and their action `f -> f o gamma^-1` on sampled surfaces.
//!
//! Möbius maps act on the Riemann sphere through stereographic projection
//! from the north pole, `zeta = (x + i y) / (1 - z)`, so the north pole is
//! `zeta = infinity` and is fixed by every affine map `zeta -> alpha zeta + beta`.
//!
//! Resampling evaluates the input grid at `gamma^-1` of every node. Away from
//! the integer lattice this needs interpolation in `(u, v)`: `v` is periodic,
//! and rows beyond a pole continue on the opposite meridian `v + pi`.

use std::f64::consts::PI;

use nalgebra::{Rotation3, Unit};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::Path;
use crate::polyfit::neighbor;
use crate::surface::{Grid, Surface, Vec3};

/// An orientation-preserving diffeomorphism of the parameter sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReparamRecipe {
    /// Rotation of the parameter sphere by `angle` about `axis`.
    SphereRotation { axis: [f64; 3], angle: f64 },
    /// `zeta -> alpha zeta + beta` with real `alpha > 0` and complex `beta = [re, im]`.
    Moebius {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_beta")]
        beta: [f64; 2],
    },
    /// Rotation about the polar axis by exactly `j` grid columns.
    VShift { j: i64 },
}

fn default_alpha() -> f64 {
    0.4
}

fn default_beta() -> [f64; 2] {
    [0.5, 0.0]
}

impl ReparamRecipe {
    pub fn moebius_default() -> Self {
        ReparamRecipe::Moebius {
            alpha: default_alpha(),
            beta: default_beta(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ReparamRecipe::SphereRotation { axis, angle } => {
                let n = Vec3::from(*axis).norm();
                if !(n > 0.0 && n.is_finite() && angle.is_finite()) {
                    return Err(Error::InvalidConfig("rotation needs a nonzero axis and finite angle".into()));
                }
            }
            ReparamRecipe::Moebius { alpha, beta } => {
                if !(*alpha > 0.0 && alpha.is_finite() && beta.iter().all(|b| b.is_finite())) {
                    return Err(Error::InvalidConfig(format!("Möbius map needs alpha > 0, got {alpha}")));
                }
            }
            ReparamRecipe::VShift { .. } => {}
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        match self {
            ReparamRecipe::SphereRotation { angle, .. } => *angle == 0.0,
            ReparamRecipe::Moebius { alpha, beta } => *alpha == 1.0 && *beta == [0.0, 0.0],
            ReparamRecipe::VShift { j } => *j == 0,
        }
    }

    /// The recipe a fraction `s` of the way from the identity.
    pub fn scaled(&self, s: f64) -> ReparamRecipe {
        match self {
            ReparamRecipe::SphereRotation { axis, angle } => ReparamRecipe::SphereRotation {
                axis: *axis,
                angle: angle * s,
            },
            ReparamRecipe::Moebius { alpha, beta } => ReparamRecipe::Moebius {
                alpha: 1.0 + s * (alpha - 1.0),
                beta: [beta[0] * s, beta[1] * s],
            },
            ReparamRecipe::VShift { j } => ReparamRecipe::VShift {
                j: (*j as f64 * s).round() as i64,
            },
        }
    }

    /// `gamma^-1(x)` for a unit vector `x`.
    pub fn inverse_point(&self, x: &Vec3, grid: &Grid) -> Vec3 {
        match self {
            ReparamRecipe::SphereRotation { axis, angle } => {
                let r = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::from(*axis)), *angle);
                r.inverse() * x
            }
            ReparamRecipe::Moebius { alpha, beta } => {
                let d = 1.0 - x.z;
                if d <= 1e-15 {
                    return Vec3::new(0.0, 0.0, 1.0);
                }
                let (a, b) = ((x.x / d - beta[0]) / alpha, (x.y / d - beta[1]) / alpha);
                let r2 = a * a + b * b;
                Vec3::new(2.0 * a, 2.0 * b, r2 - 1.0) / (r2 + 1.0)
            }
            ReparamRecipe::VShift { j } => {
                let r = Rotation3::from_axis_angle(&Vec3::z_axis(), -(*j as f64) * grid.dv());
                r * x
            }
        }
    }
}

/// Scheme used to evaluate a grid surface between nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Continuous only; finite-difference curvature of the result does not
    /// converge under refinement.
    Bilinear,
    /// Catmull-Rom cubic convolution on the 4x4 surrounding nodes.
    #[default]
    Bicubic,
}

fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Value of the sampled surface at parameter `(u, v)`.
pub fn sample(s: &Surface, u: f64, v: f64, scheme: Interpolation) -> Vec3 {
    let g = s.grid();
    let p = s.points();
    let fu = (u / g.du()).clamp(0.0, (g.n_u - 1) as f64);
    let fv = (v / g.dv()).rem_euclid(g.n_v as f64);
    let i0 = (fu.floor() as usize).min(g.n_u - 2);
    let j0 = (fv.floor() as usize).min(g.n_v - 1);
    let (tu, tv) = (fu - i0 as f64, fv - j0 as f64);
    match scheme {
        Interpolation::Bilinear => {
            let at = |di, dj| p[neighbor(&g, i0, j0, di, dj)];
            at(0, 0) * ((1.0 - tu) * (1.0 - tv)) + at(1, 0) * (tu * (1.0 - tv)) + at(0, 1) * ((1.0 - tu) * tv) + at(1, 1) * (tu * tv)
        }
        Interpolation::Bicubic => {
            let wu = catmull_rom(tu);
            let wv = catmull_rom(tv);
            let mut out = Vec3::zeros();
            for (a, wa) in wu.iter().enumerate() {
                let mut row = Vec3::zeros();
                for (b, wb) in wv.iter().enumerate() {
                    row += p[neighbor(&g, i0, j0, a as isize - 1, b as isize - 1)] * *wb;
                }
                out += row * *wa;
            }
            out
        }
    }
}

/// Spherical coordinates `(u, v)` of a unit vector, `v` in `[0, 2 pi)`.
pub fn angles(x: &Vec3) -> (f64, f64) {
    let u = x.z.clamp(-1.0, 1.0).acos();
    let v = x.y.atan2(x.x).rem_euclid(2.0 * PI);
    (u, v)
}

/// `s o gamma^-1` with the default interpolation.
pub fn reparameterize(s: &Surface, r: &ReparamRecipe) -> Result<Surface> {
    reparameterize_with(s, r, Interpolation::default())
}

pub fn reparameterize_with(s: &Surface, r: &ReparamRecipe, scheme: Interpolation) -> Result<Surface> {
    r.validate()?;
    if r.is_identity() {
        return Ok(s.clone());
    }
    if let ReparamRecipe::VShift { j } = r {
        return Ok(s.shift_v(*j));
    }
    let g = s.grid();
    let mut pts = Vec::with_capacity(g.len());
    for i in 0..g.n_u {
        for j in 0..g.n_v {
            let y = r.inverse_point(&g.sphere_point(i, j), &g);
            let (u, v) = angles(&y);
            pts.push(sample(s, u, v, scheme));
        }
    }
    Surface::new(g, pts)
}

/// Time profile of a gauge schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// The full recipe on every frame.
    Constant,
    /// Fraction `t` of the recipe at time `t`.
    Linear,
    /// Fraction `sin(pi t)`, identity at both ends.
    Sine,
}

impl Profile {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Profile::Constant => 1.0,
            Profile::Linear => t,
            Profile::Sine => {
                if t == 0.0 || t == 1.0 {
                    0.0
                } else {
                    (PI * t).sin()
                }
            }
        }
    }
}

/// A reparameterization that varies along a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeSchedule {
    pub recipe: ReparamRecipe,
    pub profile: Profile,
}

impl GaugeSchedule {
    pub fn at(&self, t: f64) -> ReparamRecipe {
        self.recipe.scaled(self.profile.at(t))
    }
}

/// Reparameterize frame `k` by the schedule evaluated at `t_k`.
pub fn gauge_transform_path(path: &Path, schedule: &GaugeSchedule) -> Result<Path> {
    gauge_transform_path_with(path, schedule, Interpolation::default())
}

pub fn gauge_transform_path_with(path: &Path, schedule: &GaugeSchedule, scheme: Interpolation) -> Result<Path> {
    let times = path.times();
    path.map_frames(|k, s| reparameterize_with(s, &schedule.at(times[k]), scheme))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::{generate, ShapeRecipe};

    fn sphere(n: usize) -> Surface {
        generate(&ShapeRecipe::Sphere { radius: 1.0 }, Grid::square(n).unwrap()).unwrap()
    }

    #[test]
    fn stereographic_moebius_inverse() {
        let g = Grid::square(10).unwrap();
        let r = ReparamRecipe::moebius_default();
        // zeta = 0 (south pole) comes from zeta = -beta / alpha = -1.25.
        let y = r.inverse_point(&Vec3::new(0.0, 0.0, -1.0), &g);
        let z = Vec3::new(-2.5, 0.0, 1.5625 - 1.0) / 2.5625;
        assert!((y - z).norm() < 1e-14);
        assert_eq!(r.inverse_point(&Vec3::new(0.0, 0.0, 1.0), &g), Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn v_shift_is_an_exact_group_action() {
        let g = Grid::square(16).unwrap();
        let s = generate(&ShapeRecipe::Ellipsoid { a: 1.0, b: 2.0, c: 0.5 }, g).unwrap();
        let there = reparameterize(&s, &ReparamRecipe::VShift { j: 7 }).unwrap();
        let back = reparameterize(&there, &ReparamRecipe::VShift { j: -7 }).unwrap();
        assert_eq!(back, s);
        // Agrees with the interpolated rotation about the polar axis.
        let rot = ReparamRecipe::SphereRotation {
            axis: [0.0, 0.0, 1.0],
            angle: 7.0 * g.dv(),
        };
        let interp = reparameterize(&s, &rot).unwrap();
        for (a, b) in there.points().iter().zip(interp.points()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let g = Grid::square(12).unwrap();
        let s = generate(&ShapeRecipe::Ellipsoid { a: 1.0, b: 2.0, c: 0.5 }, g).unwrap();
        for scheme in [Interpolation::Bilinear, Interpolation::Bicubic] {
            for i in 0..g.n_u {
                for j in 0..g.n_v {
                    let p = sample(&s, g.u(i), g.v(j), scheme);
                    assert!((p - s.at(i, j)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rotated_sphere_is_the_same_point_set() {
        let s = sphere(60);
        let r = ReparamRecipe::SphereRotation {
            axis: [1.0, 0.0, 0.0],
            angle: -0.75 * PI,
        };
        let t = reparameterize_with(&s, &r, Interpolation::Bilinear).unwrap();
        // Bilinear chords sag below the sphere by about (du^2 + dv^2) / 8.
        let g = s.grid();
        let sag = (g.du().powi(2) + g.dv().powi(2)) / 4.0;
        for p in t.points() {
            assert!(p.norm() <= 1.0 + 1e-12 && p.norm() > 1.0 - sag, "{}", p.norm());
        }
        let t = reparameterize(&s, &r).unwrap();
        for p in t.points() {
            assert!((p.norm() - 1.0).abs() < 1e-4, "{}", p.norm());
        }
    }

    #[test]
    fn identity_schedules_are_bit_identical() {
        let s = sphere(12);
        let path = Path::linear(&s, &s.scaled(2.0), 4).unwrap();
        for recipe in [
            ReparamRecipe::SphereRotation {
                axis: [0.0, 1.0, 0.0],
                angle: 0.0,
            },
            ReparamRecipe::VShift { j: 0 },
            ReparamRecipe::Moebius {
                alpha: 1.0,
                beta: [0.0, 0.0],
            },
        ] {
            let sched = GaugeSchedule {
                recipe,
                profile: Profile::Constant,
            };
            assert_eq!(gauge_transform_path(&path, &sched).unwrap(), path);
        }
        let sine = GaugeSchedule {
            recipe: ReparamRecipe::moebius_default(),
            profile: Profile::Sine,
        };
        let out = gauge_transform_path(&path, &sine).unwrap();
        assert_eq!(out.frame(0), path.frame(0));
        assert_eq!(out.frame(3), path.frame(3));
    }
}
