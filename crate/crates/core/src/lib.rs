//! Gauge-invariant elastic shape analysis of spherically parameterized surfaces.
//!
//! Surfaces are sampled on a regular `(u, v)` grid of the sphere. The crate
//! provides discrete differential geometry on that grid, the elastic metric
//! restricted to normal deformations, four path-energy evaluators, rigid
//! alignment through inscribed-volume moments, a spherical-harmonic
//! deformation basis and a path-straightening geodesic solver.

pub mod alignment;
pub mod basis;
pub mod energy;
pub mod error;
pub mod forms;
pub mod harmonics;
pub mod io;
pub mod metric;
pub mod path;
pub mod polyfit;
pub mod reparam;
pub mod shapes;
pub mod straighten;
pub mod surface;

pub use energy::{path_energy, path_length, EnergyBreakdown, Evaluator};
pub use error::{Error, Result};
pub use metric::{CurvatureSource, ElasticParams};
pub use path::Path;
pub use surface::{Grid, PoleMargin, Surface, TangentField, Vec3};
