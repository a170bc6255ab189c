use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use elastica::alignment::align_pair_with;
use elastica::basis::Basis;
use elastica::energy::EnergyReport;
use elastica::io::{read_path, read_surface, write_obj, write_path, write_surface};
use elastica::reparam::{gauge_transform_path, reparameterize, GaugeSchedule, ReparamRecipe};
use elastica::shapes::{generate, ShapeRecipe};
use elastica::straighten::{distance_matrix_with_basis, geodesic_distance_with_basis, SolverConfig, StopReason};
use elastica::{path_energy, path_length, CurvatureSource, Error, Evaluator, Grid, Path, Surface};

use crate::args::{
    AlignArgs, Cli, Command, Common, CurvatureArgs, DistmatArgs, EnergyArgs, Estimator, ExportObjArgs, GenArgs,
    GeodesicArgs, Scalar,
};
use crate::manifest::Recorder;

/// Why a command failed, mapped onto the exit code.
#[derive(Debug)]
pub enum Failure {
    Core(Error),
    Usage(String),
    NotConverged(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Core(e) if e.is_validation() => 2,
            Failure::Core(_) => 3,
            Failure::Usage(_) => 2,
            Failure::NotConverged(_) => 4,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Core(Error::Json(e))
    }
}

type Outcome = std::result::Result<(), Failure>;

pub fn run(cli: &Cli) -> Outcome {
    let cfg = solver_config(&cli.common)?;
    match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Align(a) => align(a, &cfg),
        Command::Energy(a) => energy(a, &cli.common, &cfg),
        Command::Geodesic(a) => geodesic(a, &cfg),
        Command::Distmat(a) => distmat(a, &cfg),
        Command::Curvature(a) => curvature(a, &cfg),
        Command::ExportObj(a) => export_obj(a, &cfg),
    }
}

/// `--config` file (or defaults) with the individual flags applied on top.
pub fn solver_config(c: &Common) -> std::result::Result<SolverConfig, Failure> {
    let mut cfg: SolverConfig = match &c.config {
        Some(p) => serde_json::from_slice(&fs::read(p)?)?,
        None => SolverConfig::default(),
    };
    if let Some(x) = c.a {
        cfg.params.a = x;
    }
    if let Some(x) = c.lambda {
        cfg.params.lambda = x;
    }
    if let Some(x) = c.c {
        cfg.params.c = x;
    }
    if let Some(x) = c.pole_margin {
        cfg.pole_margin.0 = x;
    }
    if let Some(x) = c.frames {
        cfg.frames = x;
    }
    if let Some(x) = c.evaluator {
        cfg.evaluator = x;
    }
    if let Some(x) = c.harmonics_degree {
        cfg.harmonics.degree = x;
    }
    if let Some(x) = c.time_modes {
        cfg.harmonics.time_modes = x;
    }
    if let Some(x) = c.eps1 {
        cfg.eps1 = x;
    }
    if let Some(x) = c.eps2 {
        cfg.eps2 = x;
    }
    if let Some(x) = c.grad_tol {
        cfg.grad_tol = x;
    }
    if let Some(x) = c.max_iter {
        cfg.max_iter = x;
    }
    if c.no_align {
        cfg.align = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn config_echo(cfg: &SolverConfig, extra: Value) -> Value {
    json!({ "solver": cfg, "command": extra })
}

fn is_path_file(p: &FsPath) -> bool {
    p.extension().is_some_and(|e| e == "gip1")
}

fn write_json(p: &FsPath, v: &impl Serialize) -> std::result::Result<(), Failure> {
    fs::write(p, serde_json::to_vec_pretty(v)?)?;
    Ok(())
}

/// Shape or path to sample.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Recipe {
    Path {
        waypoints: Vec<ShapeRecipe>,
        frames: usize,
        #[serde(default)]
        gauge: Option<GaugeSchedule>,
    },
    Surface {
        shape: ShapeRecipe,
        #[serde(default)]
        reparam: Option<ReparamRecipe>,
    },
    Bare(ShapeRecipe),
}

fn gen(a: &GenArgs) -> Outcome {
    let mut rec = Recorder::new("gen");
    let text = if a.recipe.trim_start().starts_with('{') {
        a.recipe.clone()
    } else {
        let p = PathBuf::from(&a.recipe);
        rec.input(&p)?;
        fs::read_to_string(&p)?
    };
    let recipe: Recipe = serde_json::from_str(&text)?;
    let grid = Grid::new(a.grid, a.n_v.unwrap_or(a.grid))?;
    match &recipe {
        Recipe::Path {
            waypoints,
            frames,
            gauge,
        } => {
            let shapes = waypoints.iter().map(|w| generate(w, grid)).collect::<elastica::Result<Vec<_>>>()?;
            let mut path = Path::piecewise_linear(&shapes, *frames)?;
            if let Some(s) = gauge {
                path = gauge_transform_path(&path, s)?;
            }
            write_path(&a.out, &path)?;
        }
        Recipe::Surface { shape, reparam } => {
            let mut s = generate(shape, grid)?;
            if let Some(r) = reparam {
                s = reparameterize(&s, r)?;
            }
            write_surface(&a.out, &s)?;
        }
        Recipe::Bare(shape) => write_surface(&a.out, &generate(shape, grid)?)?,
    }
    let recipe_json: Value = serde_json::from_str(&text)?;
    rec.finish(
        json!({ "recipe": recipe_json, "n_u": grid.n_u, "n_v": grid.n_v }),
        std::slice::from_ref(&a.out),
        Value::Null,
    )?;
    Ok(())
}

fn align(a: &AlignArgs, cfg: &SolverConfig) -> Outcome {
    let mut rec = Recorder::new("align");
    rec.input(&a.first)?;
    rec.input(&a.second)?;
    let s1 = read_surface(&a.first)?;
    let s2 = read_surface(&a.second)?;
    let (f1, f2, report) = align_pair_with(&s1, &s2, &cfg.params, cfg.pole_margin)?;
    write_surface(&a.out_first, &f1)?;
    write_surface(&a.out_second, &f2)?;
    let mut outputs = vec![a.out_first.clone(), a.out_second.clone()];
    if let Some(p) = &a.report {
        write_json(p, &report)?;
        outputs.push(p.clone());
    }
    rec.finish(config_echo(cfg, Value::Null), &outputs, serde_json::to_value(&report)?)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvaluatorResult {
    #[serde(flatten)]
    report: EnergyReport,
    length: f64,
    /// Seconds spent on the energy and length evaluation.
    wall_time: f64,
}

fn evaluate(path: &Path, cfg: &SolverConfig, ev: Evaluator) -> std::result::Result<EvaluatorResult, Failure> {
    let start = Instant::now();
    let b = path_energy(path, &cfg.params, cfg.pole_margin, ev)?;
    let length = path_length(path, &cfg.params, cfg.pole_margin, ev)?;
    Ok(EvaluatorResult {
        report: EnergyReport::new(&b, &cfg.params, cfg.pole_margin),
        length,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn energy(a: &EnergyArgs, common: &Common, cfg: &SolverConfig) -> Outcome {
    let mut rec = Recorder::new("energy");
    for p in &a.inputs {
        rec.input(p)?;
    }
    let path = match a.inputs.as_slice() {
        [p] if is_path_file(p) => read_path(p)?,
        [_] => return Err(Failure::Usage("energy needs one GIP1 path or at least two GIS1 frames".into())),
        many => Path::new(many.iter().map(|p| read_surface(p)).collect::<elastica::Result<Vec<_>>>()?)?,
    };
    let out = if a.all_evaluators {
        let rows = Evaluator::ALL
            .iter()
            .map(|&ev| evaluate(&path, cfg, ev))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let totals: Vec<f64> = rows.iter().map(|r| r.report.total).collect();
        let hi = totals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = totals.iter().cloned().fold(f64::INFINITY, f64::min);
        let spread = if hi > 0.0 { (hi - lo) / hi } else { 0.0 };
        json!({ "frames": path.len(), "evaluators": rows, "relative_spread": spread })
    } else {
        let ev = common.evaluator.unwrap_or(cfg.evaluator);
        json!({ "frames": path.len(), "evaluators": [evaluate(&path, cfg, ev)?] })
    };
    match &a.out {
        Some(p) => {
            write_json(p, &out)?;
            rec.finish(
                config_echo(cfg, json!({ "all_evaluators": a.all_evaluators })),
                std::slice::from_ref(p),
                Value::Null,
            )?;
        }
        None => println!("{}", serde_json::to_string_pretty(&out)?),
    }
    Ok(())
}

fn mismatch(expected: Grid, found: Grid) -> Failure {
    Failure::Core(Error::ShapeMismatch {
        expected_u: expected.n_u,
        expected_v: expected.n_v,
        found_u: found.n_u,
        found_v: found.n_v,
    })
}

fn basis_for(cfg: &SolverConfig, grid: Grid) -> elastica::Result<Basis> {
    Basis::load_or_build(cfg.harmonics, grid, &Basis::default_cache_root())
}

fn geodesic(a: &GeodesicArgs, cfg: &SolverConfig) -> Outcome {
    let mut rec = Recorder::new("geodesic");
    rec.input(&a.first)?;
    rec.input(&a.second)?;
    let s1 = read_surface(&a.first)?;
    let s2 = read_surface(&a.second)?;
    if s1.grid() != s2.grid() {
        return Err(mismatch(s1.grid(), s2.grid()));
    }
    let basis = basis_for(cfg, s1.grid())?;
    let g = geodesic_distance_with_basis(&s1, &s2, cfg, &basis)?;
    write_path(&a.out, &g.path)?;
    let mut outputs = vec![a.out.clone()];
    if let Some(p) = &a.trace {
        write_json(p, &g.trace)?;
        outputs.push(p.clone());
    }
    if let Some(dir) = &a.obj_dir {
        fs::create_dir_all(dir)?;
        for (k, f) in g.path.frames().iter().enumerate() {
            let p = dir.join(format!("frame_{k:03}.obj"));
            let mut w = BufWriter::new(fs::File::create(&p)?);
            write_obj(&mut w, f, None)?;
            w.flush()?;
            outputs.push(p);
        }
    }
    let t = &g.trace;
    info!("distance {:.6} after {} iterations ({:?})", g.distance, t.iterations(), t.stop_reason);
    let notes = json!({
        "distance": g.distance,
        "initial_energy": t.initial_energy,
        "final_energy": t.final_energy,
        "iterations": t.iterations(),
        "stop_reason": t.stop_reason,
        "basis_size": t.basis_size,
    });
    rec.finish(config_echo(cfg, Value::Null), &outputs, notes)?;
    println!("{}", g.distance);
    check_stop(t.stop_reason, "geodesic")
}

/// Exit 4 when the iteration cap was hit; other early stops only warn.
fn check_stop(reason: StopReason, what: &str) -> Outcome {
    match reason {
        StopReason::Converged => Ok(()),
        StopReason::MaxIterations => Err(Failure::NotConverged(format!(
            "{what}: iteration cap reached before the gradient tolerance"
        ))),
        other => {
            warn!("{what}: stopped early ({other:?}); the step could not reduce the energy further");
            Ok(())
        }
    }
}

fn distmat(a: &DistmatArgs, cfg: &SolverConfig) -> Outcome {
    let mut rec = Recorder::new("distmat");
    let mut files: Vec<PathBuf> = fs::read_dir(&a.dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "gis1"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::Usage(format!("no .gis1 files in {}", a.dir.display())));
    }
    let mut shapes = Vec::with_capacity(files.len());
    for p in &files {
        rec.input(p)?;
        shapes.push(read_surface(p)?);
    }
    let grid = shapes[0].grid();
    if let Some(s) = shapes.iter().find(|s| s.grid() != grid) {
        return Err(mismatch(grid, s.grid()));
    }
    let basis = basis_for(cfg, grid)?;
    let m = distance_matrix_with_basis(&shapes, cfg, &basis)?;
    let names: Vec<String> = files
        .iter()
        .map(|p| p.file_stem().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    let sym = m.symmetrized();
    let mut w = BufWriter::new(fs::File::create(&a.out)?);
    writeln!(w, "name,{}", names.join(","))?;
    for (name, row) in names.iter().zip(&sym) {
        let cells: Vec<String> = row.iter().map(|d| format!("{d:.12e}")).collect();
        writeln!(w, "{name},{}", cells.join(","))?;
    }
    w.flush()?;
    let capped = m.stops.iter().flatten().filter(|s| **s == Some(StopReason::MaxIterations)).count();
    let notes = json!({
        "names": names,
        "raw": m.raw,
        "stops": m.stops,
        "max_asymmetry": m.max_asymmetry(),
    });
    rec.finish(config_echo(cfg, Value::Null), std::slice::from_ref(&a.out), notes)?;
    if capped > 0 {
        return Err(Failure::NotConverged(format!("distmat: {capped} pair solves hit the iteration cap")));
    }
    Ok(())
}

fn curvature(a: &CurvatureArgs, cfg: &SolverConfig) -> Outcome {
    let mut rec = Recorder::new("curvature");
    rec.input(&a.surface)?;
    let s = read_surface(&a.surface)?;
    let source = match a.estimator {
        Estimator::Direct => CurvatureSource::Direct,
        Estimator::Polyfit => CurvatureSource::Polyfit {
            neighborhood: a.neighborhood,
        },
    };
    let forms = source.forms(&s, cfg.pole_margin)?;
    let k = forms.curvature()?;
    let si = k.shape_index();
    let g = s.grid();
    let mut w = BufWriter::new(fs::File::create(&a.out)?);
    writeln!(w, "i,j,u,v,k1,k2,H,K,shape_index")?;
    for i in cfg.pole_margin.rows(&g) {
        for j in 0..g.n_v {
            let n = g.idx(i, j);
            writeln!(
                w,
                "{i},{j},{},{},{},{},{},{},{}",
                g.u(i),
                g.v(j),
                k.k1[n],
                k.k2[n],
                k.mean[n],
                k.gauss[n],
                si[n]
            )?;
        }
    }
    w.flush()?;
    rec.finish(
        config_echo(cfg, json!({ "estimator": format!("{:?}", a.estimator), "neighborhood": a.neighborhood })),
        std::slice::from_ref(&a.out),
        Value::Null,
    )?;
    Ok(())
}

/// Per-vertex scalar; curvature is zero on the pole rows excluded by the margin.
fn scalar_field(s: &Surface, scalar: Scalar, cfg: &SolverConfig) -> elastica::Result<Option<Vec<f64>>> {
    let pick = |f: fn(&elastica::forms::Curvatures) -> &Vec<f64>| -> elastica::Result<Option<Vec<f64>>> {
        let forms = CurvatureSource::Direct.forms(s, cfg.pole_margin)?;
        Ok(Some(f(forms.curvature()?).clone()))
    };
    match scalar {
        Scalar::None => Ok(None),
        Scalar::K1 => pick(|k| &k.k1),
        Scalar::K2 => pick(|k| &k.k2),
        Scalar::Mean => pick(|k| &k.mean),
        Scalar::Gauss => pick(|k| &k.gauss),
        Scalar::PoleDistance => {
            let pole = s.at(0, 0);
            Ok(Some(s.points().iter().map(|p| (p - pole).norm()).collect()))
        }
    }
}

fn write_mesh(p: &FsPath, s: &Surface, scalar: Scalar, cfg: &SolverConfig) -> Outcome {
    let field = scalar_field(s, scalar, cfg)?;
    let mut w = BufWriter::new(fs::File::create(p)?);
    write_obj(&mut w, s, field.as_deref())?;
    w.flush()?;
    Ok(())
}

fn export_obj(a: &ExportObjArgs, cfg: &SolverConfig) -> Outcome {
    let mut rec = Recorder::new("export-obj");
    rec.input(&a.input)?;
    let outputs = if is_path_file(&a.input) {
        let path = read_path(&a.input)?;
        fs::create_dir_all(&a.out)?;
        let mut outs = Vec::with_capacity(path.len());
        for (k, f) in path.frames().iter().enumerate() {
            let p = a.out.join(format!("frame_{k:03}.obj"));
            write_mesh(&p, f, a.scalar, cfg)?;
            outs.push(p);
        }
        outs
    } else {
        write_mesh(&a.out, &read_surface(&a.input)?, a.scalar, cfg)?;
        vec![a.out.clone()]
    };
    rec.finish(
        config_echo(cfg, json!({ "scalar": format!("{:?}", a.scalar) })),
        &outputs,
        Value::Null,
    )?;
    Ok(())
}
