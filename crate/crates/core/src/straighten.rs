//! Path straightening: gradient descent of the path energy over a finite
//! perturbation basis with the endpoint frames held fixed.
//!
//! Each iteration estimates the directional derivative along every basis
//! element by a forward difference, moves the path against the assembled
//! gradient `sum_i dE(i) B(i)`, and backtracks (halving the step) whenever the
//! energy would not decrease or the path stops being an immersion.

use std::time::Instant;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::align_pair_with;
use crate::basis::{time_profile, Basis, BasisElement, HarmonicSpec};
use crate::energy::{path_energy, path_length, Evaluator};
use crate::error::{Error, Result};
use crate::metric::ElasticParams;
use crate::path::Path;
use crate::surface::{PoleMargin, Surface, Vec3};

/// Consecutive rejected updates tolerated before giving up.
pub const MAX_FAILURES: usize = 20;

/// How directional derivatives are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difference {
    #[default]
    Forward,
    /// Twice the cost; for verification.
    Central,
}

/// Optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Finite-difference step.
    pub eps1: f64,
    /// Initial descent step.
    pub eps2: f64,
    /// Smallest descent step before stopping.
    pub min_step: f64,
    /// Stop once `|grad E|^2` falls to this value.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Factor applied to the step after an accepted update (1 keeps it fixed).
    pub step_growth: f64,
    pub evaluator: Evaluator,
    pub params: ElasticParams,
    pub pole_margin: PoleMargin,
    pub harmonics: HarmonicSpec,
    /// Number of frames `T` of the initial linear path.
    pub frames: usize,
    /// Align the endpoints before solving.
    pub align: bool,
    pub difference: Difference,
    /// Keep the path of every recorded iteration in the trace.
    pub keep_snapshots: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps1: 1e-4,
            eps2: 1e-2,
            min_step: 1e-6,
            grad_tol: 1e-3,
            max_iter: 800,
            step_growth: 1.1,
            evaluator: Evaluator::I2,
            params: ElasticParams::default(),
            pole_margin: PoleMargin::default(),
            harmonics: HarmonicSpec::default(),
            frames: 7,
            align: true,
            difference: Difference::Forward,
            keep_snapshots: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [("eps1", self.eps1), ("eps2", self.eps2), ("grad_tol", self.grad_tol), ("min_step", self.min_step)];
        for (name, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {x}")));
            }
        }
        if !(self.step_growth >= 1.0 && self.step_growth.is_finite()) {
            return Err(Error::InvalidConfig(format!("step growth must be >= 1, got {}", self.step_growth)));
        }
        if self.frames < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 frames, got {}", self.frames)));
        }
        self.params.validate()?;
        self.harmonics.validate()
    }
}

/// Why the optimizer stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    StepFloor,
    TooManyFailures,
}

/// State at the start of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: f64,
    pub grad_norm2: f64,
    /// Step used for the update that followed (after any backtracking).
    pub step: f64,
    /// Seconds since the solve started.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub basis_size: usize,
    pub harmonics: HarmonicSpec,
    /// Path at the start of each record, when requested.
    #[serde(skip)]
    pub snapshots: Vec<Path>,
}

impl SolveTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }
}

fn energy(path: &Path, cfg: &SolverConfig) -> Result<f64> {
    Ok(path_energy(path, &cfg.params, cfg.pole_margin, cfg.evaluator)?.total)
}

fn lost(e: Error) -> Error {
    match e {
        Error::DegenerateMetric { .. } => Error::ImmersionLost(e.to_string()),
        other => other,
    }
}

/// `path + eps b`, with frame `k` moved by `eps P_j(t_k) B`.
pub fn perturb(path: &Path, basis: &Basis, e: &BasisElement, eps: f64) -> Result<Path> {
    let times = path.times();
    path.map_frames(|k, s| Ok(basis.perturb(s, e, times[k], eps)))
}

/// Finite-difference derivative of the energy along `e`.
///
/// `base` is `E(path)` when already known.
pub fn directional_derivative(
    path: &Path,
    basis: &Basis,
    e: &BasisElement,
    cfg: &SolverConfig,
    base: Option<f64>,
) -> Result<f64> {
    let h = cfg.eps1;
    let plus = energy(&perturb(path, basis, e, h)?, cfg).map_err(lost)?;
    match cfg.difference {
        Difference::Forward => {
            let e0 = match base {
                Some(v) => v,
                None => energy(path, cfg)?,
            };
            Ok((plus - e0) / h)
        }
        Difference::Central => {
            let minus = energy(&perturb(path, basis, e, -h)?, cfg).map_err(lost)?;
            Ok((plus - minus) / (2.0 * h))
        }
    }
}

/// `path - step sum_i grad_i P_j(t_k) B_i`, assembled in basis order.
fn descend(path: &Path, basis: &Basis, grad: &[f64], step: f64) -> Result<Path> {
    let times = path.times();
    let last = path.len() - 1;
    let n = path.grid().len();
    path.map_frames(|k, s| {
        if k == 0 || k == last {
            return Ok(s.clone());
        }
        let mut update = vec![Vec3::zeros(); n];
        for (e, g) in basis.elements().iter().zip(grad) {
            let w = g * time_profile(e.id.j, times[k]);
            if w == 0.0 {
                continue;
            }
            for (u, b) in update.iter_mut().zip(basis.field(e)) {
                *u += b * w;
            }
        }
        let pts = s.points().iter().zip(&update).map(|(p, u)| p - u * step).collect();
        Surface::new(s.grid(), pts)
    })
}

/// Build the basis for `cfg` on the path grid and straighten.
pub fn straighten(path: &Path, cfg: &SolverConfig) -> Result<(Path, SolveTrace)> {
    let basis = Basis::build(cfg.harmonics, path.grid())?;
    straighten_with_basis(path, cfg, &basis)
}

pub fn straighten_with_basis(path: &Path, cfg: &SolverConfig, basis: &Basis) -> Result<(Path, SolveTrace)> {
    cfg.validate()?;
    if basis.grid() != path.grid() {
        return Err(crate::surface::shape_mismatch(&path.grid(), &basis.grid()));
    }
    let start = Instant::now();
    let mut psi = path.clone();
    let mut e = energy(&psi, cfg)?;
    let initial = e;
    let mut step = cfg.eps2;
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut stop = StopReason::MaxIterations;
    let mut converged = false;
    for iteration in 0..cfg.max_iter {
        let grad: Vec<f64> = basis
            .elements()
            .par_iter()
            .map(|el| directional_derivative(&psi, basis, el, cfg, Some(e)))
            .collect::<Result<_>>()?;
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        let mut record = IterationRecord {
            iteration,
            energy: e,
            grad_norm2: g2,
            step,
            wall_time: start.elapsed().as_secs_f64(),
        };
        if cfg.keep_snapshots {
            snapshots.push(psi.clone());
        }
        if g2 <= cfg.grad_tol {
            records.push(record);
            stop = StopReason::Converged;
            converged = true;
            break;
        }
        let mut failures = 0;
        let accepted = loop {
            let outcome = descend(&psi, basis, &grad, step).and_then(|p| {
                let v = energy(&p, cfg).map_err(lost)?;
                Ok((p, v))
            });
            match outcome {
                Ok((p, v)) if v < e => break Some((p, v)),
                Ok((_, v)) => debug!("iteration {iteration}: energy {v} >= {e} at step {step:e}"),
                Err(Error::ImmersionLost(msg)) => debug!("iteration {iteration}: {msg} at step {step:e}"),
                Err(other) => return Err(other),
            }
            failures += 1;
            step *= 0.5;
            if step < cfg.min_step {
                stop = StopReason::StepFloor;
                break None;
            }
            if failures >= MAX_FAILURES {
                stop = StopReason::TooManyFailures;
                break None;
            }
        };
        record.step = step;
        records.push(record);
        match accepted {
            Some((p, v)) => {
                psi = p;
                e = v;
                step *= cfg.step_growth;
            }
            None => break,
        }
        if iteration % 10 == 0 {
            info!("iteration {iteration}: energy {e:.6}, |grad|^2 {g2:.3e}, step {step:.2e}");
        }
    }
    let trace = SolveTrace {
        records,
        initial_energy: initial,
        final_energy: e,
        converged,
        stop_reason: stop,
        basis_size: basis.len(),
        harmonics: basis.spec(),
        snapshots,
    };
    Ok((psi, trace))
}

/// Result of [`geodesic_distance`].
#[derive(Debug, Clone)]
pub struct Geodesic {
    pub distance: f64,
    pub path: Path,
    pub trace: SolveTrace,
}

/// Length of the straightened path between `s1` and `s2`.
pub fn geodesic_distance(s1: &Surface, s2: &Surface, cfg: &SolverConfig) -> Result<Geodesic> {
    let basis = Basis::build(cfg.harmonics, s1.grid())?;
    geodesic_distance_with_basis(s1, s2, cfg, &basis)
}

pub fn geodesic_distance_with_basis(s1: &Surface, s2: &Surface, cfg: &SolverConfig, basis: &Basis) -> Result<Geodesic> {
    cfg.validate()?;
    let (a, b) = if cfg.align {
        let (a, b, _) = align_pair_with(s1, s2, &cfg.params, cfg.pole_margin)?;
        (a, b)
    } else {
        (s1.clone(), s2.clone())
    };
    let init = Path::linear(&a, &b, cfg.frames)?;
    let (path, trace) = straighten_with_basis(&init, cfg, basis)?;
    let distance = path_length(&path, &cfg.params, cfg.pole_margin, cfg.evaluator)?;
    Ok(Geodesic { distance, path, trace })
}

/// Geodesic distances between every ordered pair of shapes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceMatrix {
    /// `raw[i][j]` is the length of the solved path from shape `i` to shape `j`.
    pub raw: Vec<Vec<f64>>,
    /// Solver stop reason for each off-diagonal entry.
    pub stops: Vec<Vec<Option<StopReason>>>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// `(d_ij + d_ji) / 2`.
    pub fn symmetrized(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n)
            .map(|i| (0..n).map(|j| 0.5 * (self.raw[i][j] + self.raw[j][i])).collect())
            .collect()
    }

    /// Largest `|d_ij - d_ji| / mean(d_ij, d_ji)` over pairs with a nonzero mean.
    pub fn max_asymmetry(&self) -> f64 {
        let n = self.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let mean = 0.5 * (self.raw[i][j] + self.raw[j][i]);
                if mean > 0.0 {
                    worst = worst.max((self.raw[i][j] - self.raw[j][i]).abs() / mean);
                }
            }
        }
        worst
    }

    /// Index of the closest other shape in the symmetrized matrix.
    pub fn nearest(&self, i: usize) -> Option<usize> {
        let sym = self.symmetrized();
        (0..self.len()).filter(|&j| j != i).min_by(|&a, &b| sym[i][a].total_cmp(&sym[i][b]))
    }
}

/// Solve every ordered pair (both directions, so asymmetry can be reported).
///
/// Pairs run in parallel and share one basis; the diagonal solves each shape
/// against itself.
pub fn distance_matrix(shapes: &[Surface], cfg: &SolverConfig) -> Result<DistanceMatrix> {
    cfg.validate()?;
    let Some(first) = shapes.first() else {
        return Ok(DistanceMatrix {
            raw: Vec::new(),
            stops: Vec::new(),
        });
    };
    for s in shapes {
        if s.grid() != first.grid() {
            return Err(crate::surface::shape_mismatch(&first.grid(), &s.grid()));
        }
    }
    let basis = Basis::build(cfg.harmonics, first.grid())?;
    distance_matrix_with_basis(shapes, cfg, &basis)
}

pub fn distance_matrix_with_basis(shapes: &[Surface], cfg: &SolverConfig, basis: &Basis) -> Result<DistanceMatrix> {
    let n = shapes.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let solved: Vec<(f64, Option<StopReason>)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let g = geodesic_distance_with_basis(&shapes[i], &shapes[j], cfg, basis)?;
            info!("pair ({i}, {j}): distance {:.6}", g.distance);
            Ok((g.distance, Some(g.trace.stop_reason)))
        })
        .collect::<Result<_>>()?;
    let mut raw = vec![vec![0.0; n]; n];
    let mut stops = vec![vec![None; n]; n];
    for (&(i, j), (d, s)) in pairs.iter().zip(solved) {
        raw[i][j] = d;
        stops[i][j] = s;
    }
    Ok(DistanceMatrix { raw, stops })
}
