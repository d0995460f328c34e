use std::f64::consts::PI;

use proptest::prelude::*;
use wlab::grid::{band_limited_field, integrate, make_grid, spectral_partial, ScalarField, VolumeForm};

/// 8th-order centered difference along `axis`.
fn fd8(s: &ScalarField, axis: usize) -> Vec<f64> {
    let grid = s.grid();
    let n = grid.points_per_axis();
    let h = grid.spacing();
    let w = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    let stride = n.pow((grid.dim() - 1 - axis) as u32);
    (0..grid.len())
        .map(|p| {
            let k = grid.index_along(p, axis);
            let shift = |d: isize| {
                let kk = (k as isize + d).rem_euclid(n as isize) as usize;
                s.values()[p + kk * stride - k * stride]
            };
            (1..=4).map(|j| w[j - 1] * (shift(j as isize) - shift(-(j as isize)))).sum::<f64>() / h
        })
        .collect()
}

#[test]
fn make_grid_examples() {
    let g = make_grid(2, 32).unwrap();
    assert_eq!(g.len(), 1024);
    assert_eq!(g.spacing(), 1.0 / 32.0);
    assert_eq!(make_grid(1, 4).unwrap().len(), 4);
    assert!(make_grid(2, 33).is_err());
    assert!(make_grid(5, 8).is_err());
    assert!(make_grid(2, 2).is_err());
    assert!(make_grid(1, 258).is_err());
}

#[test]
fn coordinates_are_lexicographic() {
    let g = make_grid(2, 4).unwrap();
    assert_eq!(g.coords(0), vec![0.0, 0.0]);
    assert_eq!(g.coords(1), vec![0.0, 0.25]);
    assert_eq!(g.coords(4), vec![0.25, 0.0]);
}

#[test]
fn band_limited_derivative_matches_high_order_fd() {
    let grid = make_grid(2, 64).unwrap();
    let s = band_limited_field(grid, 3, 2, 1.0).unwrap();
    for axis in 0..2 {
        let d = spectral_partial(&s, axis).unwrap();
        let fd = fd8(&s, axis);
        let err = d.values().iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        // O(h^8) with h = 1/64 and derivatives of size (4 pi)^9.
        assert!(err < 1e-5, "axis {axis}: {err}");
    }
}

#[test]
fn cross_partials_commute() {
    let grid = make_grid(3, 8).unwrap();
    let s = band_limited_field(grid, 11, 2, 1.0).unwrap();
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let ab = spectral_partial(&spectral_partial(&s, a).unwrap(), b).unwrap();
        let ba = spectral_partial(&spectral_partial(&s, b).unwrap(), a).unwrap();
        let diff = ab.zip_with(&ba, |x, y| x - y).unwrap().max_abs();
        assert!(diff < 1e-12 * ab.max_abs().max(1.0), "{diff}");
    }
}

#[test]
fn sine_integrals() {
    let g1 = make_grid(1, 16).unwrap();
    let unit = VolumeForm::unit(g1);
    let s2 = ScalarField::from_fn(g1, |x| (2.0 * PI * x[0]).sin().powi(2));
    assert!((integrate(&s2, &unit).unwrap() - 0.5).abs() < 1e-14);
    let g2 = make_grid(2, 16).unwrap();
    let s = ScalarField::from_fn(g2, |x| (2.0 * PI * x[0]).sin());
    assert!(integrate(&s, &VolumeForm::unit(g2)).unwrap().abs() < 1e-14);
    assert!((integrate(&ScalarField::constant(g2, 1.0), &VolumeForm::unit(g2)).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn integrate_rejects_grid_mismatch() {
    let a = make_grid(2, 8).unwrap();
    let b = make_grid(2, 16).unwrap();
    assert!(integrate(&ScalarField::zeros(a), &VolumeForm::unit(b)).is_err());
}

#[test]
fn band_limited_seed_sensitivity() {
    let grid = make_grid(2, 16).unwrap();
    let a = band_limited_field(grid, 7, 2, 0.1).unwrap();
    let b = band_limited_field(grid, 7, 2, 0.1).unwrap();
    let c = band_limited_field(grid, 8, 2, 0.1).unwrap();
    assert_eq!(a.values(), b.values());
    assert_ne!(a.values(), c.values());
    assert!((a.max_abs() - 0.1).abs() < 1e-15);
    assert_eq!(band_limited_field(grid, 7, 2, 0.0).unwrap().max_abs(), 0.0);
    assert!(band_limited_field(grid, 7, 8, 0.1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn derivative_integrates_to_zero(seed in any::<u64>(), axis in 0usize..2, n in prop::sample::select(vec![8usize, 16, 32])) {
        let grid = make_grid(2, n).unwrap();
        let s = band_limited_field(grid, seed, n / 4, 1.0).unwrap();
        let d = spectral_partial(&s, axis).unwrap();
        prop_assert!(integrate(&d, &VolumeForm::unit(grid)).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn constants_have_zero_derivative(c in -10.0f64..10.0, axis in 0usize..3) {
        let grid = make_grid(3, 8).unwrap();
        let d = spectral_partial(&ScalarField::constant(grid, c), axis).unwrap();
        prop_assert_eq!(d.max_abs(), 0.0);
    }

    #[test]
    fn integration_is_deterministic(seed in any::<u64>()) {
        let grid = make_grid(2, 16).unwrap();
        let s = band_limited_field(grid, seed, 4, 1.0).unwrap();
        let vol = VolumeForm::from_log_density(&band_limited_field(grid, seed ^ 1, 4, 0.3).unwrap());
        prop_assert_eq!(integrate(&s, &vol).unwrap().to_bits(), integrate(&s, &vol).unwrap().to_bits());
    }
}
