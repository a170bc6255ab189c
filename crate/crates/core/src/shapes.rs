//! Analytic test shapes sampled on the grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surface::{Grid, Surface, Vec3};

/// A closed-form surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeRecipe {
    Sphere {
        radius: f64,
    },
    Ellipsoid {
        a: f64,
        b: f64,
        c: f64,
    },
    /// Sphere of radius `radius + amplitude * S_l^m(u, v)`, with `S` the
    /// Schmidt semi-normalized real harmonic (`|S| <= 1`); negative `order`
    /// selects the `sin(|m| v)` harmonic.
    BumpSphere {
        radius: f64,
        amplitude: f64,
        degree: usize,
        order: i64,
    },
    /// Pointwise `(1 - t) first + t second`.
    LinearBlend {
        first: Box<ShapeRecipe>,
        second: Box<ShapeRecipe>,
        t: f64,
    },
}

impl ShapeRecipe {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        match self {
            ShapeRecipe::Sphere { radius } if !(*radius > 0.0 && radius.is_finite()) => bad(format!("sphere radius {radius}")),
            ShapeRecipe::Ellipsoid { a, b, c } if !([a, b, c].iter().all(|x| **x > 0.0 && x.is_finite())) => {
                bad(format!("ellipsoid axes {a}, {b}, {c}"))
            }
            ShapeRecipe::BumpSphere {
                radius,
                amplitude,
                degree,
                order,
            } => {
                if !(*radius > 0.0 && radius.is_finite() && amplitude.is_finite()) || amplitude.abs() >= *radius {
                    return bad(format!("bump sphere needs |amplitude| < radius, got {amplitude} and {radius}"));
                }
                if order.unsigned_abs() as usize > *degree {
                    return bad(format!("harmonic order {order} exceeds degree {degree}"));
                }
                Ok(())
            }
            ShapeRecipe::LinearBlend { first, second, t } => {
                if !t.is_finite() {
                    return bad("blend weight must be finite".into());
                }
                first.validate()?;
                second.validate()
            }
            _ => Ok(()),
        }
    }

    /// Point at parameter `(u, v)`.
    pub fn eval(&self, u: f64, v: f64) -> Vec3 {
        let dir = Vec3::new(u.sin() * v.cos(), u.sin() * v.sin(), u.cos());
        match self {
            ShapeRecipe::Sphere { radius } => dir * *radius,
            ShapeRecipe::Ellipsoid { a, b, c } => Vec3::new(a * dir.x, b * dir.y, c * dir.z),
            ShapeRecipe::BumpSphere {
                radius,
                amplitude,
                degree,
                order,
            } => dir * (radius + amplitude * schmidt_harmonic(*degree, *order, u, v)),
            ShapeRecipe::LinearBlend { first, second, t } => first.eval(u, v) * (1.0 - t) + second.eval(u, v) * *t,
        }
    }
}

/// Schmidt semi-normalized real harmonic `S_l^m(u, v)`, bounded by 1 in magnitude.
pub fn schmidt_harmonic(l: usize, m: i64, u: f64, v: f64) -> f64 {
    let am = m.unsigned_abs() as usize;
    let (x, s) = (u.cos(), u.sin());
    // Unnormalized P_l^m by the standard recurrences, then the Schmidt factor.
    let mut pmm = 1.0;
    for k in 1..=am {
        pmm *= (2 * k - 1) as f64 * s;
    }
    let p = if l == am {
        pmm
    } else {
        let mut prev = pmm;
        let mut cur = (2 * am + 1) as f64 * x * pmm;
        for ll in am + 2..=l {
            let next = ((2 * ll - 1) as f64 * x * cur - (ll + am - 1) as f64 * prev) / (ll - am) as f64;
            prev = cur;
            cur = next;
        }
        cur
    };
    let norm = if am == 0 {
        1.0
    } else {
        // sqrt(2 (l - m)! / (l + m)!)
        let mut ratio = 1.0;
        for k in l - am + 1..=l + am {
            ratio /= k as f64;
        }
        (2.0 * ratio).sqrt()
    };
    let phase = match m {
        0 => 1.0,
        m if m > 0 => (am as f64 * v).cos(),
        _ => (am as f64 * v).sin(),
    };
    norm * p * phase
}

/// Sample `recipe` on `grid`.
pub fn generate(recipe: &ShapeRecipe, grid: Grid) -> Result<Surface> {
    recipe.validate()?;
    Surface::from_fn(grid, |u, v| recipe.eval(u, v))
}
