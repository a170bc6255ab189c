//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails. Pass substrings as arguments to run a subset.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::Rotation3;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use elastica::alignment::{align_pair, inscribed_volume, second_moments};
use elastica::basis::{Basis, HarmonicSpec};
use elastica::energy::{path_energy, theoretical_sphere_energy};
use elastica::forms::{decompose, second_form_direct, FundamentalForms};
use elastica::polyfit::second_form_polyfit;
use elastica::reparam::{gauge_transform_path, reparameterize, GaugeSchedule, Profile, ReparamRecipe};
use elastica::shapes::{generate, ShapeRecipe};
use elastica::straighten::{distance_matrix, straighten_with_basis, SolverConfig};
use elastica::{ElasticParams, Evaluator, Grid, Path, PoleMargin, Surface, TangentField, Vec3};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail }
    }
}

fn shape(r: ShapeRecipe, n: usize) -> Surface {
    generate(&r, Grid::square(n).unwrap()).unwrap()
}

fn sphere(r: f64, n: usize) -> Surface {
    shape(ShapeRecipe::Sphere { radius: r }, n)
}

fn table_params() -> ElasticParams {
    ElasticParams::new(1.0, 0.125, 0.0).unwrap()
}

fn spheres_path(n: usize) -> Path {
    Path::linear(&sphere(1.0, n), &sphere(2.5, n), 10).unwrap()
}

fn total(path: &Path, p: &ElasticParams, ev: Evaluator) -> f64 {
    path_energy(path, p, PoleMargin::default(), ev).unwrap().total
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn table_reproduction() -> Outcome {
    let p = table_params();
    let th = theoretical_sphere_energy(1.0, 2.5, &p);
    let mut pass = true;
    let mut detail = format!("E_th {th:.4};");
    let path = spheres_path(100);
    for ev in Evaluator::ALL {
        let t = Instant::now();
        let e = total(&path, &p, ev);
        let secs = t.elapsed().as_secs_f64();
        let tol = if ev == Evaluator::I2 { 0.04 } else { 0.05 };
        pass &= rel(e, th) < tol && secs <= 60.0;
        detail += &format!(" 100² {ev} {e:.2} ({:+.2}%, {secs:.1}s);", 100.0 * (e - th) / th);
    }
    let path = spheres_path(200);
    let fine: Vec<f64> = Evaluator::ALL.iter().map(|ev| total(&path, &p, *ev)).collect();
    let (lo, hi) = fine.iter().fold((f64::MAX, f64::MIN), |(l, h), x| (l.min(*x), h.max(*x)));
    for e in &fine {
        pass &= rel(*e, th) < 0.03;
    }
    pass &= (hi - lo) / th < 0.03;
    detail += &format!(" 200² range {lo:.2}..{hi:.2}");
    Outcome::new(pass, detail)
}

fn gauge_invariance() -> Outcome {
    let p = table_params();
    let path = spheres_path(100);
    let base: Vec<f64> = Evaluator::ALL.iter().map(|ev| total(&path, &p, *ev)).collect();
    let mut pass = true;
    let shifted = gauge_transform_path(
        &path,
        &GaugeSchedule {
            recipe: ReparamRecipe::VShift { j: 7 },
            profile: Profile::Constant,
        },
    )
    .unwrap();
    let mut worst_shift = 0.0f64;
    for (ev, e0) in Evaluator::ALL.iter().zip(&base) {
        worst_shift = worst_shift.max(rel(total(&shifted, &p, *ev), *e0));
    }
    pass &= worst_shift < 1e-8;
    let mut detail = format!("v_shift max rel {worst_shift:.1e};");
    let schedules = [
        (
            "sine 0.2 rad",
            GaugeSchedule {
                recipe: ReparamRecipe::SphereRotation {
                    axis: [1.0, 0.3, 0.0],
                    angle: 0.2,
                },
                profile: Profile::Sine,
            },
        ),
        (
            "linear 0.3 rad",
            GaugeSchedule {
                recipe: ReparamRecipe::SphereRotation {
                    axis: [1.0, 0.0, 0.2],
                    angle: 0.3,
                },
                profile: Profile::Linear,
            },
        ),
    ];
    for (name, sched) in schedules {
        let q = gauge_transform_path(&path, &sched).unwrap();
        for (i, ev) in [(3, Evaluator::Triangle), (1, Evaluator::K1K2)] {
            let r = rel(total(&q, &p, ev), base[i]);
            pass &= r < 0.03;
            detail += &format!(" {name} {ev} {:.2}%;", 100.0 * r);
        }
    }
    Outcome::new(pass, detail)
}

fn blob(n: usize) -> Surface {
    shape(
        ShapeRecipe::LinearBlend {
            first: Box::new(ShapeRecipe::Ellipsoid { a: 1.3, b: 1.0, c: 0.8 }),
            second: Box::new(ShapeRecipe::BumpSphere {
                radius: 1.0,
                amplitude: 0.15,
                degree: 3,
                order: 2,
            }),
            t: 0.5,
        },
        n,
    )
}

fn same_shape_path() -> Outcome {
    let p = ElasticParams::default();
    let s = blob(100);
    let still = Path::new(vec![s.clone(); 10]).unwrap();
    let other = shape(ShapeRecipe::Ellipsoid { a: 1.5, b: 1.0, c: 0.7 }, 100);
    let reference = total(&Path::linear(&other, &s, 10).unwrap(), &p, Evaluator::Triangle);
    let mut pass = true;
    let mut detail = format!("reference {reference:.4};");
    let schedules = [
        (
            "rotation",
            GaugeSchedule {
                recipe: ReparamRecipe::SphereRotation {
                    axis: [0.2, 1.0, 0.4],
                    angle: 0.5,
                },
                profile: Profile::Linear,
            },
        ),
        (
            "moebius",
            GaugeSchedule {
                recipe: ReparamRecipe::Moebius {
                    alpha: 0.8,
                    beta: [0.1, 0.0],
                },
                profile: Profile::Linear,
            },
        ),
    ];
    for (name, sched) in schedules {
        let e = total(&gauge_transform_path(&still, &sched).unwrap(), &p, Evaluator::Triangle);
        pass &= e < 0.01 * reference;
        detail += &format!(" {name} {e:.4} ({:.2}%);", 100.0 * e / reference);
    }
    Outcome::new(pass, detail)
}

fn collapse() -> Outcome {
    let n = 24;
    let start = sphere(1.0, n);
    let end = reparameterize(
        &start,
        &ReparamRecipe::SphereRotation {
            axis: [1.0, 0.0, 0.0],
            angle: 0.4,
        },
    )
    .unwrap();
    let path = Path::piecewise_linear(&[start, blob(n), end], 7).unwrap();
    let cfg = SolverConfig {
        harmonics: HarmonicSpec::for_count(432).unwrap(),
        max_iter: 800,
        ..Default::default()
    };
    let basis = Basis::build(cfg.harmonics, path.grid()).unwrap();
    let (_, trace) = straighten_with_basis(&path, &cfg, &basis).unwrap();
    let decrease = 1.0 - trace.final_energy / trace.initial_energy;
    Outcome::new(
        decrease >= 0.95 && trace.iterations() <= 800 && basis.len() == 432,
        format!(
            "{} elements, E {:.4} -> {:.4} ({:.2}% decrease) in {} iterations, {:?}",
            basis.len(),
            trace.initial_energy,
            trace.final_energy,
            100.0 * decrease,
            trace.iterations(),
            trace.stop_reason
        ),
    )
}

/// Max `|k - 1/R|` over both principal curvatures on the margin rows.
fn curvature_error(forms: &FundamentalForms, r: f64) -> f64 {
    let g = forms.grid;
    let c = forms.curvature().unwrap();
    let mut worst = 0.0f64;
    for i in forms.margin.rows(&g) {
        for j in 0..g.n_v {
            let k = g.idx(i, j);
            worst = worst.max((c.k1[k] - 1.0 / r).abs()).max((c.k2[k] - 1.0 / r).abs());
        }
    }
    worst
}

fn curvature_accuracy() -> Outcome {
    let m = PoleMargin::default();
    let mut pass = true;
    let mut detail = String::new();
    for r in [1.0, 2.5] {
        let s = sphere(r, 100);
        let d = curvature_error(&second_form_direct(&s, m).unwrap(), r) * r;
        let f = curvature_error(&second_form_polyfit(&s, 3, m).unwrap(), r) * r;
        pass &= d < 0.01 && f < 0.01;
        detail += &format!(" R={r}: direct {:.3}%, polyfit {:.3}%;", 100.0 * d, 100.0 * f);
    }
    // Orders from grid spacing, not point count.
    let errs: Vec<(f64, f64, f64)> = [50, 100, 200]
        .iter()
        .map(|&n| {
            let s = sphere(1.0, n);
            (
                s.grid().du(),
                curvature_error(&second_form_direct(&s, m).unwrap(), 1.0),
                curvature_error(&second_form_polyfit(&s, 3, m).unwrap(), 1.0),
            )
        })
        .collect();
    let mut orders = Vec::new();
    for w in errs.windows(2) {
        let h = (w[0].0 / w[1].0).ln();
        orders.push((w[0].1 / w[1].1).ln() / h);
        orders.push((w[0].2 / w[1].2).ln() / h);
    }
    let min_order = orders.iter().copied().fold(f64::MAX, f64::min);
    pass &= min_order >= 2.0 - 0.05;
    detail += &format!(" min convergence order {min_order:.3}");
    Outcome::new(pass, detail)
}

fn alignment_recovery() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2024);
    let s1 = shape(ShapeRecipe::Ellipsoid { a: 1.5, b: 1.0, c: 0.7 }, 40);
    let r = *Rotation3::from_euler_angles(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)).matrix();
    let t = Vec3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
    let beta = rng.gen_range(0.5..2.0);
    let s2 = s1.scaled(beta).rotated(&r).translated(&t);
    let (f1, f2, _) = align_pair(&s1, &s2).unwrap();
    let err = f1.points().iter().zip(f2.points()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let ball = sphere(1.0, 100);
    let m = second_moments(&ball, &inscribed_volume(&ball));
    let target = 4.0 * PI / 15.0;
    let moment_err = (m - nalgebra::Matrix3::identity() * target).abs().max() / target;
    Outcome::new(
        err < 1e-6 && moment_err < 0.01,
        format!("max pointwise {err:.2e}; unit-ball moments off by {:.3}%", 100.0 * moment_err),
    )
}

fn geometry_oracles() -> Outcome {
    let s = sphere(1.0, 100);
    let vol = inscribed_volume(&s).total;
    let vol_err = rel(vol, 4.0 * PI / 3.0);
    let m = PoleMargin::default();
    let forms = second_form_direct(&s, m).unwrap();
    let k_int = forms.integrate(&forms.curvature().unwrap().gauss, m);
    let g = s.grid();
    let cap_edge = g.u(m.0) - 0.5 * g.du();
    let caps = 2.0 * 2.0 * PI * (1.0 - cap_edge.cos());
    let gb_err = rel(k_int + caps, 4.0 * PI);
    let bumpy = blob(60);
    let gg = bumpy.grid();
    let df = TangentField::from_fn(gg, |i, j| {
        let (u, v) = (gg.u(i), gg.v(j));
        Vec3::new((3.0 * v).sin() + u, u.cos() * v.cos(), 0.5 - (2.0 * u).sin())
    });
    let (tan, nor) = decompose(&bumpy, &df).unwrap();
    let mut worst = 0.0f64;
    for ((a, b), x) in tan.values().iter().zip(nor.values()).zip(df.values()) {
        let s2 = x.norm_squared().max(1e-300);
        worst = worst.max(a.dot(b).abs() / s2).max((a + b - x).norm() / s2.sqrt());
    }
    let (tan2, nor2) = decompose(&bumpy, &nor).unwrap();
    for ((a, b), x) in tan2.values().iter().zip(nor2.values()).zip(nor.values()) {
        let scale = x.norm().max(1e-300);
        worst = worst.max((b - x).norm() / scale).max(a.norm() / scale);
    }
    Outcome::new(
        vol_err < 0.005 && gb_err < 0.03 && worst <= 1e-12,
        format!(
            "volume {:.3}%, Gauss-Bonnet {:.3}%, decomposition/idempotence {worst:.1e}",
            100.0 * vol_err,
            100.0 * gb_err
        ),
    )
}

fn basis_count_monotonicity() -> Outcome {
    let n = 24;
    let g = Grid::square(n).unwrap();
    let a = shape(ShapeRecipe::Ellipsoid { a: 1.3, b: 1.0, c: 0.8 }, n);
    let mid = shape(
        ShapeRecipe::BumpSphere {
            radius: 1.0,
            amplitude: 0.2,
            degree: 3,
            order: 2,
        },
        n,
    );
    let b = shape(
        ShapeRecipe::LinearBlend {
            first: Box::new(ShapeRecipe::Ellipsoid { a: 1.0, b: 1.2, c: 0.9 }),
            second: Box::new(ShapeRecipe::BumpSphere {
                radius: 1.0,
                amplitude: 0.15,
                degree: 2,
                order: -1,
            }),
            t: 0.5,
        },
        n,
    );
    let b = reparameterize(
        &b,
        &ReparamRecipe::SphereRotation {
            axis: [0.0, 1.0, 0.0],
            angle: 0.3,
        },
    )
    .unwrap();
    let path = Path::piecewise_linear(&[a, mid, b], 7).unwrap();
    let mut finals = Vec::new();
    let mut detail = String::new();
    for count in [52, 432, 1728] {
        let cfg = SolverConfig {
            harmonics: HarmonicSpec::for_count(count).unwrap(),
            max_iter: 60,
            ..Default::default()
        };
        let basis = Basis::build(cfg.harmonics, g).unwrap();
        let (_, trace) = straighten_with_basis(&path, &cfg, &basis).unwrap();
        detail += &format!(" {}: {:.5};", basis.len(), trace.final_energy);
        finals.push(trace.final_energy);
    }
    let pass = finals.windows(2).all(|w| w[1] <= w[0] + 1e-6);
    Outcome::new(pass, format!("final energies after 60 iterations:{detail}"))
}

fn distance_matrix_sanity() -> Outcome {
    let n = 20;
    let names = ["sphere", "near-sphere", "ellipsoid", "bump-sphere"];
    let shapes = [
        sphere(1.0, n),
        shape(ShapeRecipe::Ellipsoid { a: 1.05, b: 1.0, c: 0.97 }, n),
        shape(ShapeRecipe::Ellipsoid { a: 1.5, b: 1.0, c: 0.7 }, n),
        shape(
            ShapeRecipe::BumpSphere {
                radius: 1.0,
                amplitude: 0.25,
                degree: 3,
                order: 1,
            },
            n,
        ),
    ];
    let cfg = SolverConfig {
        align: false,
        frames: 15,
        harmonics: HarmonicSpec::for_count(52).unwrap(),
        max_iter: 30,
        ..Default::default()
    };
    let dm = distance_matrix(&shapes, &cfg).unwrap();
    let diag = (0..4).map(|i| dm.raw[i][i]).fold(0.0, f64::max);
    let asym = dm.max_asymmetry();
    let nearest = (dm.nearest(0), dm.nearest(1));
    let pass = asym <= 0.02 && diag < 1e-3 && nearest == (Some(1), Some(0));
    let sym = dm.symmetrized();
    let rows: Vec<String> = sym
        .iter()
        .zip(names)
        .map(|(r, name)| format!("{name} [{}]", r.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")))
        .collect();
    Outcome::new(
        pass,
        format!(
            "asymmetry {:.2}%, max diagonal {diag:.1e}, nearest(sphere) {}, nearest(near-sphere) {}; {}",
            100.0 * asym,
            nearest.0.map_or("-", |i| names[i]),
            nearest.1.map_or("-", |i| names[i]),
            rows.join(", ")
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("table reproduction", table_reproduction),
        ("gauge invariance", gauge_invariance),
        ("same-shape path", same_shape_path),
        ("path-straightening collapse", collapse),
        ("curvature accuracy", curvature_accuracy),
        ("alignment recovery", alignment_recovery),
        ("geometry oracles", geometry_oracles),
        ("basis-count monotonicity", basis_count_monotonicity),
        ("distance-matrix sanity", distance_matrix_sanity),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let out = run();
        if !out.pass {
            failed += 1;
        }
        println!(
            "criterion {} {} [{name}] {} ({:.1}s)",
            k + 1,
            if out.pass { "PASS" } else { "FAIL" },
            out.detail,
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
