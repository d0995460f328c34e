use proptest::prelude::*;
use wlab::grid::{make_grid, PeriodicGrid, VolumeForm};
use wlab::samples::{random_metric, random_sym2, random_volume, SeedStream};
use wlab::space_of_metrics::{
    big_g_inner, commutator_norm_sq, curvature_g, curve_length, distance_g, gamma_g, geodesic_at, sectional_g,
    Geodesic, MetricCurve,
};
use wlab::tensor::{Mat, MetricField, Sym2Field};
use wlab::variations::{central_difference, FdOrder};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn c(grid: PeriodicGrid, rows: &[f64]) -> Sym2Field {
    let m = grid.dim();
    Sym2Field::constant(grid, &Mat::from_row_slice(m, m, rows))
}

fn data(seed: u64) -> (MetricField, Sym2Field, Sym2Field, VolumeForm) {
    let grid = make_grid(2, 8).unwrap();
    let mut s = SeedStream::new(seed);
    let g = random_metric(grid, &mut s, 0.2).unwrap();
    let u = random_sym2(grid, &mut s, 0.5).unwrap();
    let v = random_sym2(grid, &mut s, 0.5).unwrap();
    let omega = random_volume(grid, &mut s, 0.3).unwrap();
    (g, u, v, omega)
}

#[test]
fn big_g_examples() {
    let grid = make_grid(2, 8).unwrap();
    let (g, _, _, omega) = data(1);
    let om = omega.normalized();
    assert!((big_g_inner(&g, g.as_sym2(), g.as_sym2(), &om).unwrap() - 2.0).abs() < 1e-13);
    let flat = MetricField::flat(grid);
    let unit = VolumeForm::unit(grid);
    assert_eq!(big_g_inner(&flat, &c(grid, &[1.0, 0.0, 0.0, 0.0]), &c(grid, &[0.0, 1.0, 1.0, 0.0]), &unit).unwrap(), 0.0);
}

#[test]
fn christoffel_of_g_examples() {
    let grid = make_grid(2, 4).unwrap();
    let flat = MetricField::flat(grid);
    let id = Sym2Field::identity(grid);
    assert!(gamma_g(&flat, &id, &id).unwrap().sub(&id.scale(-1.0)).unwrap().max_abs() < 1e-15);
    assert_eq!(gamma_g(&flat, &Sym2Field::zeros(grid), &id).unwrap().max_abs(), 0.0);
    let (g, u, v, _) = data(2);
    assert_eq!(gamma_g(&g, &u, &v).unwrap(), gamma_g(&g, &v, &u).unwrap());
}

#[test]
fn geodesic_examples() {
    let grid = make_grid(2, 4).unwrap();
    let flat = MetricField::flat(grid);
    let (a, b, t): (f64, f64, f64) = (0.3, -0.7, 1.3);
    let g = geodesic_at(&flat, &c(grid, &[a, 0.0, 0.0, b]), t).unwrap();
    assert!((g.at(0) - Mat::from_row_slice(2, 2, &[(a * t).exp(), 0.0, 0.0, (b * t).exp()])).amax() < 1e-14);
    let (g0, _, v, _) = data(3);
    assert_eq!(geodesic_at(&g0, &v, 0.0).unwrap(), g0);
}

#[test]
fn geodesic_equation_and_constant_endomorphism() {
    let (g0, _, v, _) = data(4);
    let geo = Geodesic::new(&g0, &v).unwrap();
    let t = 0.7;
    let gt = geo.metric_at(t).unwrap();
    let vel = geo.velocity_at(t);
    let rhs = gamma_g(&gt, &vel, &vel).unwrap().scale(-1.0);
    let (mut ode, mut inv) = (0.0f64, 0.0f64);
    let e0 = |p: usize| g0.inv_at(p) * v.at(p);
    for p in 0..g0.grid().len() {
        for i in 0..2 {
            for j in 0..2 {
                let comp = |h: f64| Ok(geo.velocity_at(t + h).at(p)[(i, j)]);
                let (acc, _) = central_difference(comp, FdOrder::First, &[1e-2, 5e-3]).unwrap();
                ode = ode.max((acc - rhs.at(p)[(i, j)]).abs());
                let endo = |h: f64| {
                    let g = geo.metric_at(t + h)?;
                    Ok((g.inv_at(p) * geo.velocity_at(t + h).at(p))[(i, j)])
                };
                // g_t^{-1} dg_t/dt is constant in t: its derivative vanishes.
                let (de, _) = central_difference(endo, FdOrder::First, &[1e-2, 5e-3]).unwrap();
                inv = inv.max(de.abs()).max(((gt.inv_at(p) * vel.at(p)) - e0(p)).amax());
            }
        }
    }
    assert!(ode < 1e-8, "{ode}");
    assert!(inv < 1e-9, "{inv}");
}

#[test]
fn distance_examples() {
    let grid = make_grid(2, 4).unwrap();
    let flat = MetricField::flat(grid);
    let unit = VolumeForm::unit(grid);
    let (a, b): (f64, f64) = (0.8, -0.3);
    let g1 = MetricField::new(c(grid, &[a.exp(), 0.0, 0.0, b.exp()])).unwrap();
    assert!((distance_g(&flat, &g1, &unit).unwrap() - (a * a + b * b).sqrt()).abs() < 1e-12);
    let (g0, _, v, omega) = data(5);
    assert!(distance_g(&g0, &g0, &omega).unwrap() < 1e-7);
    let geo = Geodesic::new(&g0, &v).unwrap();
    let end = geo.metric_at(1.0).unwrap();
    let len = curve_length(&MetricCurve::Geodesic(geo), &omega, 0.0, 1.0, 64).unwrap();
    assert!(rel(distance_g(&g0, &end, &omega).unwrap(), len) < 1e-8);
}

#[test]
fn distance_along_a_ray_is_the_log_difference() {
    let (g0, _, v, omega) = data(6);
    let geo = Geodesic::new(&g0, &v).unwrap();
    for (k, l) in [(0.5, 0.25), (1.0, 1.5), (0.2, 2.0)] {
        let d = distance_g(&geo.metric_at(k).unwrap(), &geo.metric_at(k + l).unwrap(), &omega).unwrap();
        // log(g0^{-1} g_t) = t g0^{-1} v along the ray.
        let norm = big_g_inner(&g0, &v, &v, &omega).unwrap().sqrt();
        assert!(rel(d, l * norm) < 1e-10, "{d} {}", l * norm);
    }
}

#[test]
fn curvature_operator_examples() {
    let grid = make_grid(2, 4).unwrap();
    let flat = MetricField::flat(grid);
    let unit = VolumeForm::unit(grid);
    let u = c(grid, &[0.0, 1.0, 1.0, 0.0]);
    let v = c(grid, &[1.0, 0.0, 0.0, -1.0]);
    let (um, vm) = (u.at(0), v.at(0));
    let br = &um * &vm - &vm * &um;
    let expected = (&br * &um - &um * &br) * -0.25;
    assert!((curvature_g(&flat, &u, &v, &u).unwrap().at(0) - expected).amax() < 1e-15);
    assert!((sectional_g(&flat, &u, &v, &unit).unwrap() + 2.0).abs() < 1e-12);
    let d1 = c(grid, &[1.0, 0.0, 0.0, 2.0]);
    let d2 = c(grid, &[-3.0, 0.0, 0.0, 0.5]);
    assert_eq!(curvature_g(&flat, &d1, &d2, &u).unwrap().max_abs(), 0.0);
    assert_eq!(sectional_g(&flat, &d1, &d2, &unit).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sectional_curvature_is_non_positive(seed in any::<u64>()) {
        let (g, u, v, omega) = data(seed);
        let sigma = sectional_g(&g, &u, &v, &omega).unwrap();
        prop_assert!(sigma <= 0.0);
        let comm = commutator_norm_sq(&g, &u, &v).unwrap().into_iter().fold(0.0, f64::max);
        prop_assert_eq!(sigma == 0.0, comm <= 1e-12);
        let r = curvature_g(&g, &u, &v, &v).unwrap();
        prop_assert!(rel(big_g_inner(&g, &r, &u, &omega).unwrap(), sigma) <= 1e-10);
    }

    #[test]
    fn curvature_is_antisymmetric(seed in any::<u64>()) {
        let (g, u, v, _) = data(seed);
        let w = random_sym2(g.grid(), &mut SeedStream::new(seed ^ 9), 0.5).unwrap();
        let a = curvature_g(&g, &u, &v, &w).unwrap();
        let b = curvature_g(&g, &v, &u, &w).unwrap();
        prop_assert_eq!(a.add(&b).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn cauchy_schwarz(seed in any::<u64>()) {
        let (g, u, v, omega) = data(seed);
        let uv = big_g_inner(&g, &u, &v, &omega).unwrap();
        let uu = big_g_inner(&g, &u, &u, &omega).unwrap();
        let vv = big_g_inner(&g, &v, &v, &omega).unwrap();
        prop_assert!(uv * uv <= uu * vv * (1.0 + 1e-14));
    }

    #[test]
    fn distance_is_symmetric_and_satisfies_the_triangle_inequality(seed in any::<u64>()) {
        let grid = make_grid(2, 8).unwrap();
        let mut s = SeedStream::new(seed);
        let a = random_metric(grid, &mut s, 0.4).unwrap();
        let b = random_metric(grid, &mut s, 0.4).unwrap();
        let c = random_metric(grid, &mut s, 0.4).unwrap();
        let omega = random_volume(grid, &mut s, 0.3).unwrap();
        let ab = distance_g(&a, &b, &omega).unwrap();
        prop_assert!(rel(ab, distance_g(&b, &a, &omega).unwrap()) <= 1e-12);
        let ac = distance_g(&a, &c, &omega).unwrap();
        let cb = distance_g(&c, &b, &omega).unwrap();
        prop_assert!(ab <= ac + cb + 1e-12);
    }
}
