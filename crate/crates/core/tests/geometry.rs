use elastica::forms::{first_form, second_form_direct};
use elastica::harmonics::reconstruct;
use elastica::polyfit::second_form_polyfit;
use elastica::shapes::{generate, ShapeRecipe};
use elastica::{Grid, PoleMargin, Surface};

fn sphere(n: usize, r: f64) -> Surface {
    generate(&ShapeRecipe::Sphere { radius: r }, Grid::square(n).unwrap()).unwrap()
}

/// Max interior errors of `E`, `G`, and `k1` (direct and fitted) on the unit sphere.
fn sphere_errors(n: usize) -> [f64; 4] {
    let s = sphere(n, 1.0);
    let g = s.grid();
    let m = PoleMargin::default();
    let first = first_form(&s).unwrap();
    let direct = second_form_direct(&s, m).unwrap();
    let fitted = second_form_polyfit(&s, 3, m).unwrap();
    let mut err = [0.0f64; 4];
    for i in m.rows(&g) {
        let su = g.u(i).sin();
        for j in 0..g.n_v {
            let k = g.idx(i, j);
            err[0] = err[0].max((first.big_e[k] - 1.0).abs());
            err[1] = err[1].max((first.big_g[k] - su * su).abs());
            err[2] = err[2].max((direct.curvature().unwrap().k1[k] - 1.0).abs());
            err[3] = err[3].max((fitted.curvature().unwrap().k1[k] - 1.0).abs());
        }
    }
    err
}

#[test]
fn sphere_quantities_converge_at_second_order() {
    let e = [sphere_errors(50), sphere_errors(100), sphere_errors(200)];
    for q in 0..4 {
        for w in e.windows(2) {
            let order = (w[0][q] / w[1][q]).log2();
            // The rows shrink by (n - 1) / (2n - 1) rather than 1/2, so allow a little slack.
            assert!(order >= 1.9, "quantity {q}: {:e} -> {:e}, order {order}", w[0][q], w[1][q]);
        }
    }
}

#[test]
fn reconstruction_error_is_monotone_in_degree() {
    let g = Grid::square(40).unwrap();
    let shapes = [
        ShapeRecipe::Ellipsoid { a: 1.3, b: 1.0, c: 0.7 },
        ShapeRecipe::BumpSphere {
            radius: 1.0,
            amplitude: 0.2,
            degree: 4,
            order: -3,
        },
        ShapeRecipe::LinearBlend {
            first: Box::new(ShapeRecipe::Ellipsoid { a: 1.0, b: 1.5, c: 1.0 }),
            second: Box::new(ShapeRecipe::BumpSphere {
                radius: 1.0,
                amplitude: 0.3,
                degree: 6,
                order: 2,
            }),
            t: 0.5,
        },
    ];
    for r in &shapes {
        let s = generate(r, g).unwrap();
        let mut prev = f64::INFINITY;
        for n in 0..=8 {
            let rec = reconstruct(&s, n).unwrap();
            let err = l2_error(&s, &rec);
            assert!(err <= prev * (1.0 + 1e-9) + 1e-12, "{r:?}: degree {n} error {err} after {prev}");
            prev = err;
        }
    }
}

/// Quadrature L2 distance with round-sphere weights.
fn l2_error(a: &Surface, b: &Surface) -> f64 {
    let g = a.grid();
    let mut total = 0.0;
    for i in 0..g.n_u {
        for j in 0..g.n_v {
            let k = g.idx(i, j);
            total += (a.points()[k] - b.points()[k]).norm_squared() * g.band_weight(i);
        }
    }
    (total * g.dv()).sqrt()
}

#[test]
fn band_limited_bump_is_recovered_only_at_its_degree() {
    let g = Grid::square(60).unwrap();
    let r = ShapeRecipe::BumpSphere {
        radius: 1.0,
        amplitude: 0.1,
        degree: 4,
        order: 2,
    };
    // A degree-4 radial profile times the degree-1 direction: coordinates of degree 5.
    let s = generate(&r, g).unwrap();
    let e3 = l2_error(&s, &reconstruct(&s, 3).unwrap());
    let e5 = l2_error(&s, &reconstruct(&s, 5).unwrap());
    assert!(e5 < 1e-3, "{e5}");
    assert!(e3 > e5 + 1e-3, "{e3} {e5}");
}
