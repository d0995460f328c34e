use proptest::prelude::*;
use wlab::geometry::Geometry;
use wlab::grid::{make_grid, ScalarField, VolumeForm};
use wlab::samples::{flat_hessian, kahler_potential, random_volume, smooth_scalar, Scenario, SeedStream};
use wlab::space_of_metrics::geodesic_at;
use wlab::tensor::{Mat, MetricField, Sym2Field};
use wlab::variations::{
    fd_oracle, first_variation, first_variation_report, hessian_f, hessian_f_lower_bound, hessian_report,
    hessian_riemannian, min_ricci_eigenvalue, w_functional, w_functional_laplacian, w_omega, w_omega_trace_form,
    FdOrder, DEFAULT_STEPS,
};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn diag(d: &[f64]) -> Mat {
    Mat::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { 0.0 })
}

#[test]
fn w_functional_on_flat_torus() {
    let grid = make_grid(2, 8).unwrap();
    let flat = MetricField::flat(grid);
    assert!((w_functional(&flat, &ScalarField::zeros(grid)).unwrap() + 2.0).abs() < 1e-14);
    for m in 1..=3 {
        let grid = make_grid(m, 8).unwrap();
        let c: f64 = 0.7;
        let w = w_functional(&MetricField::flat(grid), &ScalarField::constant(grid, c)).unwrap();
        assert!((w - (2.0 * c - m as f64) * (-c).exp()).abs() < 1e-14);
    }
}

#[test]
fn w_functional_integration_by_parts() {
    let grid = make_grid(2, 32).unwrap();
    let mut s = SeedStream::new(1);
    let sc = Scenario::from_stream(grid, &mut s, [0.1, 0.2, 0.5]).unwrap();
    let f = smooth_scalar(grid, &mut s, 0.5).unwrap();
    let a = w_functional(&sc.g, &f).unwrap();
    let b = w_functional_laplacian(&sc.g, &f).unwrap();
    assert!(rel(a, b) < 1e-10, "{a} {b}");
}

#[test]
fn w_omega_along_diagonal_geodesic_is_linear() {
    let grid = make_grid(2, 8).unwrap();
    let flat = MetricField::flat(grid);
    let unit = VolumeForm::unit(grid);
    assert!((w_omega(&flat, &unit).unwrap() + 2.0).abs() < 1e-14);
    let (a, b) = (0.4, -0.9);
    let v = Sym2Field::constant(grid, &diag(&[a, b]));
    for t in [0.0, 0.5, 1.0] {
        let w = w_omega(&geodesic_at(&flat, &v, t).unwrap(), &unit).unwrap();
        assert!((w - (t * (a + b) - 2.0)).abs() < 1e-13, "t={t}: {w}");
    }
    // The stencil is exact on a linear profile, so only roundoff (eps |W| / h^2)
    // remains; at the default h = 1e-3 that alone is about 1e-9.
    let fd = fd_oracle(&flat, &unit, &v, FdOrder::Second, &[1e-2, 5e-3]).unwrap();
    assert!(fd.abs() < 1e-9, "{fd}");
    let h = hessian_riemannian(&flat, &unit, &v).unwrap();
    assert!(h.abs() < 1e-14);
    let fd1 = fd_oracle(&flat, &unit, &Sym2Field::zeros(grid), FdOrder::First, &DEFAULT_STEPS).unwrap();
    assert_eq!(fd1, 0.0);
}

#[test]
fn first_variation_examples() {
    let grid = make_grid(2, 8).unwrap();
    let flat = MetricField::flat(grid);
    let unit = VolumeForm::unit(grid);
    let v = Sym2Field::constant(grid, &diag(&[0.3, 1.1]));
    assert!((first_variation(&flat, &unit, &v).unwrap() - 1.4).abs() < 1e-14);
    assert_eq!(first_variation(&flat, &unit, &Sym2Field::zeros(grid)).unwrap(), 0.0);
}

#[test]
fn scaling_direction_hessian() {
    let grid = make_grid(2, 32).unwrap();
    let sc = Scenario::generic(grid, 2).unwrap();
    let v = sc.g.as_sym2().clone();
    let r = hessian_report(&sc.g, &sc.omega, &v, 2, &DEFAULT_STEPS).unwrap();
    assert!(r.rel_residual < 1e-4, "{r:?}");
    let geo = Geometry::new(&sc.g);
    let trace = wlab::tensor::trace_g(&geo.bakry_emery(&sc.omega).unwrap(), &sc.g).unwrap();
    let expected = wlab::grid::integrate(&trace, &sc.omega).unwrap();
    assert!(rel(r.formula_value, expected) < 1e-12);
}

#[test]
fn second_order_oracle_self_convergence() {
    let grid = make_grid(2, 32).unwrap();
    let sc = Scenario::generic(grid, 3).unwrap();
    let a = fd_oracle(&sc.g, &sc.omega, &sc.v, FdOrder::Second, &[1e-3, 5e-4]).unwrap();
    let b = fd_oracle(&sc.g, &sc.omega, &sc.v, FdOrder::Second, &[2e-3, 1e-3]).unwrap();
    assert!(rel(a, b) < 1e-6, "{a} {b}");
}

#[test]
fn f_space_hessian_on_parallel_directions() {
    let grid = make_grid(2, 32).unwrap();
    let flat = MetricField::flat(grid);
    let v = Sym2Field::constant(grid, &Mat::from_row_slice(2, 2, &[0.4, -0.2, -0.2, 0.1]));
    assert!(hessian_f(&flat, &VolumeForm::unit(grid), &v).unwrap().abs() < 1e-14);
    for seed in 0..10 {
        let omega = random_volume(grid, &mut SeedStream::new(seed), 0.3).unwrap();
        let a = hessian_f(&flat, &omega, &v).unwrap();
        let b = hessian_riemannian(&flat, &omega, &v).unwrap();
        assert!(rel(a, b) < 1e-8, "seed {seed}: {a} {b}");
        let eps = min_ricci_eigenvalue(&flat, &omega).unwrap();
        assert!(a >= hessian_f_lower_bound(&flat, &omega, &v, eps).unwrap() - 1e-12);
    }
}

#[test]
fn f_space_hessian_rejects_non_codazzi_directions() {
    let grid = make_grid(2, 16).unwrap();
    let sc = Scenario::generic(grid, 4).unwrap();
    let err = hessian_f(&sc.g, &sc.omega, &sc.v).unwrap_err();
    assert!(matches!(err, wlab::Error::Precondition { .. }), "{err}");
}

#[test]
fn f_space_hessian_on_codazzi_directions() {
    let grid = make_grid(2, 32).unwrap();
    let flat = MetricField::flat(grid);
    for seed in 0..5 {
        let mut s = SeedStream::new(seed);
        let omega = random_volume(grid, &mut s, 0.3).unwrap();
        let v = flat_hessian(&kahler_potential(grid, &mut s, 0.5).unwrap());
        let a = hessian_f(&flat, &omega, &v).unwrap();
        let b = hessian_riemannian(&flat, &omega, &v).unwrap();
        assert!(rel(a, b) < 1e-8, "seed {seed}: {a} {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn first_variation_matches_line_derivative(seed in any::<u64>()) {
        let grid = make_grid(2, 16).unwrap();
        let sc = Scenario::generic(grid, seed).unwrap();
        let r = first_variation_report(&sc.g, &sc.omega, &sc.v, seed, &DEFAULT_STEPS).unwrap();
        prop_assert!(r.rel_residual <= 1e-6, "{:?}", r);
    }

    #[test]
    fn hessian_matches_geodesic_second_derivative(seed in any::<u64>()) {
        let grid = make_grid(2, 16).unwrap();
        let sc = Scenario::generic(grid, seed).unwrap();
        let r = hessian_report(&sc.g, &sc.omega, &sc.v, seed, &DEFAULT_STEPS).unwrap();
        prop_assert!(r.rel_residual <= 1e-4, "{:?}", r);
    }

    #[test]
    fn trace_form_of_w_agrees(seed in any::<u64>()) {
        let grid = make_grid(2, 32).unwrap();
        let sc = Scenario::generic(grid, seed).unwrap();
        let a = w_omega(&sc.g, &sc.omega).unwrap();
        let b = w_omega_trace_form(&sc.g, &sc.omega).unwrap();
        prop_assert!(rel(a, b) <= 1e-8);
    }

    #[test]
    fn f_space_lower_bound_holds(seed in any::<u64>()) {
        let grid = make_grid(2, 16).unwrap();
        let flat = MetricField::flat(grid);
        let mut s = SeedStream::new(seed);
        let omega = random_volume(grid, &mut s, 0.3).unwrap();
        let c = Mat::from_fn(2, 2, |_, _| s.uniform());
        let v = Sym2Field::constant(grid, &(&c + c.transpose()))
            .add(&flat_hessian(&kahler_potential(grid, &mut s, 0.5).unwrap()))
            .unwrap();
        let eps = min_ricci_eigenvalue(&flat, &omega).unwrap();
        let h = hessian_f(&flat, &omega, &v).unwrap();
        prop_assert!(h >= hessian_f_lower_bound(&flat, &omega, &v, eps).unwrap() - 1e-12 * h.abs().max(1.0));
    }
}
