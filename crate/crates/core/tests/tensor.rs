use proptest::prelude::*;
use wlab::grid::make_grid;
use wlab::samples::{random_metric, random_sym2, SeedStream};
use wlab::tensor::{
    decomposable, endomorphism_of, g_transpose, gram_formula, induced_inner_p, inner_sym2, project_alternating,
    project_symmetric, tensor_inner, trace_g, EndField, Mat, MetricField, Sym2Field, TensorKind,
};

fn spd(seed: u64, m: usize) -> Mat {
    let mut s = SeedStream::new(seed);
    let a = Mat::from_fn(m, m, |_, _| s.uniform());
    &a * a.transpose() + Mat::identity(m, m) * 0.5
}

fn sym(seed: u64, m: usize) -> Mat {
    let mut s = SeedStream::new(seed);
    let a = Mat::from_fn(m, m, |_, _| s.uniform());
    (&a + a.transpose()) * 0.5
}

fn diag(d: &[f64]) -> Mat {
    Mat::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { 0.0 })
}

fn point_metric(g: &Mat) -> MetricField {
    let grid = make_grid(g.nrows(), 4).unwrap();
    MetricField::new(Sym2Field::constant(grid, g)).unwrap()
}

#[test]
fn endomorphism_examples() {
    let g = point_metric(&diag(&[2.0, 1.0]));
    let v = Sym2Field::constant(g.grid(), &diag(&[2.0, 3.0]));
    let e = endomorphism_of(&v, &g).unwrap();
    assert!((e.at(0) - diag(&[1.0, 3.0])).amax() < 1e-15);

    let gm = spd(1, 3);
    let vm = sym(2, 3);
    let e = endomorphism_of(&Sym2Field::constant(make_grid(3, 4).unwrap(), &vm), &point_metric(&gm)).unwrap();
    let oracle = gm.clone().lu().solve(&vm).unwrap();
    assert!((e.at(0) - oracle).amax() < 1e-12);
}

#[test]
fn endomorphism_of_metric_is_identity() {
    let grid = make_grid(2, 8).unwrap();
    let g = random_metric(grid, &mut SeedStream::new(4), 0.2).unwrap();
    let e = endomorphism_of(g.as_sym2(), &g).unwrap();
    assert!(e.sub(&EndField::identity(grid)).unwrap().max_abs() < 1e-14);
}

#[test]
fn g_transpose_pairing() {
    let gm = spd(5, 3);
    let g = point_metric(&gm);
    let mut s = SeedStream::new(6);
    let a = Mat::from_fn(3, 3, |_, _| s.uniform());
    let at = g_transpose(&EndField::constant(g.grid(), &a), &g).unwrap().at(0);
    let xi = Mat::from_fn(3, 1, |_, _| s.uniform());
    let eta = Mat::from_fn(3, 1, |_, _| s.uniform());
    let lhs = ((&a * &xi).transpose() * &gm * &eta)[(0, 0)];
    let rhs = (xi.transpose() * &gm * (&at * &eta))[(0, 0)];
    assert!((lhs - rhs).abs() < 1e-12);
    // g-symmetric endomorphisms are fixed points.
    let e = endomorphism_of(&Sym2Field::constant(g.grid(), &sym(7, 3)), &g).unwrap();
    assert!(g_transpose(&e, &g).unwrap().sub(&e).unwrap().max_abs() < 1e-12);
}

#[test]
fn inner_product_examples() {
    let grid = make_grid(2, 4).unwrap();
    let g = random_metric(grid, &mut SeedStream::new(8), 0.2).unwrap();
    let gg = inner_sym2(g.as_sym2(), g.as_sym2(), &g).unwrap();
    assert!(gg.values().iter().all(|x| (x - 2.0).abs() < 1e-13));
    let flat = MetricField::flat(grid);
    let u = Sym2Field::constant(grid, &diag(&[1.0, 0.0]));
    let v = Sym2Field::constant(grid, &diag(&[0.0, 1.0]));
    assert_eq!(inner_sym2(&u, &v, &flat).unwrap().max_abs(), 0.0);
}

#[test]
fn inner_product_index_sum_oracle() {
    let m = 3;
    let (gm, um, vm) = (spd(9, m), sym(10, m), sym(11, m));
    let gi = gm.clone().try_inverse().unwrap();
    let mut oracle = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    oracle += um[(i, j)] * gi[(i, k)] * gi[(j, l)] * vm[(k, l)];
                }
            }
        }
    }
    let g = point_metric(&gm);
    let c = |a: &Mat| Sym2Field::constant(g.grid(), a);
    let val = inner_sym2(&c(&um), &c(&vm), &g).unwrap().values()[0];
    assert!((val - oracle).abs() < 1e-12);
}

#[test]
fn trace_matches_eigenvalue_sum() {
    let (gm, vm) = (spd(12, 3), sym(13, 3));
    let g = point_metric(&gm);
    let tr = trace_g(&Sym2Field::constant(g.grid(), &vm), &g).unwrap().values()[0];
    let e = gm.clone().try_inverse().unwrap() * &vm;
    let sum: f64 = e.complex_eigenvalues().iter().map(|z| z.re).sum();
    assert!((tr - sum).abs() < 1e-12);
    let grid = make_grid(2, 4).unwrap();
    let v = Sym2Field::constant(grid, &diag(&[0.3, -1.2]));
    assert!((trace_g(&v, &MetricField::flat(grid)).unwrap().values()[0] + 0.9).abs() < 1e-15);
}

#[test]
fn symmetric_projection_is_permutation_invariant() {
    let m = 3;
    let mut s = SeedStream::new(14);
    let t: Vec<f64> = (0..27).map(|_| s.uniform()).collect();
    let st = project_symmetric(m, 3, &t).unwrap();
    let idx = |i: usize, j: usize, k: usize| (i * m + j) * m + k;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let x = st[idx(i, j, k)];
                for y in [idx(i, k, j), idx(j, i, k), idx(j, k, i), idx(k, i, j), idx(k, j, i)] {
                    assert!((x - st[y]).abs() < 1e-14);
                }
            }
        }
    }
    assert!(project_alternating(m, 3, &st).unwrap().iter().all(|x| x.abs() < 1e-14));
    assert!(project_symmetric(m, 4, &vec![0.0; 81]).is_err());
}

#[test]
fn projectors_are_idempotent_up_to_factorial() {
    let m = 3;
    let mut s = SeedStream::new(15);
    let t: Vec<f64> = (0..27).map(|_| s.uniform()).collect();
    let a = project_alternating(m, 3, &t).unwrap();
    let aa = project_alternating(m, 3, &a).unwrap();
    assert!(a.iter().zip(&aa).all(|(x, y)| (6.0 * x - y).abs() < 1e-13));
    let sy = project_symmetric(m, 3, &t).unwrap();
    let ss = project_symmetric(m, 3, &sy).unwrap();
    assert!(sy.iter().zip(&ss).all(|(x, y)| (6.0 * x - y).abs() < 1e-13));
}

#[test]
fn induced_metric_examples() {
    let id = Mat::identity(2, 2);
    let e = |i: usize| (0..2).map(|k| if k == i { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
    let w = decomposable(2, &[e(0), e(1)], TensorKind::Alternating).unwrap();
    assert!((induced_inner_p(2, 2, &w, &w, &id, TensorKind::Alternating).unwrap() - 2.0).abs() < 1e-15);
    let s = decomposable(2, &[e(0), e(0)], TensorKind::Symmetric).unwrap();
    assert!((induced_inner_p(2, 2, &s, &s, &id, TensorKind::Symmetric).unwrap() - 4.0).abs() < 1e-15);
    assert!(induced_inner_p(2, 2, &s, &s, &id, TensorKind::Alternating).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn induced_metric_restricts_tensor_product_metric(seed in any::<u64>(), p in 2usize..=3, alt in any::<bool>(), repeat in any::<bool>()) {
        let m = 3;
        let kind = if alt { TensorKind::Alternating } else { TensorKind::Symmetric };
        let gi = spd(seed, m).try_inverse().unwrap();
        let mut s = SeedStream::new(seed ^ 0xabc);
        let mut cov = || (0..m).map(|_| s.uniform()).collect::<Vec<f64>>();
        let a: Vec<Vec<f64>> = (0..p).map(|_| cov()).collect();
        let mut b: Vec<Vec<f64>> = (0..p).map(|_| cov()).collect();
        if repeat {
            b[1] = b[0].clone();
        }
        let ta = decomposable(m, &a, kind).unwrap();
        let tb = decomposable(m, &b, kind).unwrap();
        let lhs = induced_inner_p(m, p, &ta, &tb, &gi, kind).unwrap();
        let rhs = gram_formula(&a, &b, &gi, kind);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        prop_assert!((tensor_inner(m, p, &ta, &tb, &gi) - lhs).abs() == 0.0);
    }

    #[test]
    fn g_transpose_is_an_involution(seed in any::<u64>()) {
        let grid = make_grid(3, 4).unwrap();
        let mut s = SeedStream::new(seed);
        let g = random_metric(grid, &mut s, 0.3).unwrap();
        let mats: Vec<Mat> = (0..grid.len()).map(|_| Mat::from_fn(3, 3, |_, _| s.uniform())).collect();
        let a = EndField::from_fn(grid, |p| mats[p].clone());
        let tt = g_transpose(&g_transpose(&a, &g).unwrap(), &g).unwrap();
        prop_assert!(tt.sub(&a).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn inner_product_is_symmetric(seed in any::<u64>()) {
        let grid = make_grid(2, 8).unwrap();
        let mut s = SeedStream::new(seed);
        let g = random_metric(grid, &mut s, 0.3).unwrap();
        let u = random_sym2(grid, &mut s, 1.0).unwrap();
        let v = random_sym2(grid, &mut s, 1.0).unwrap();
        let a = inner_sym2(&u, &v, &g).unwrap();
        let b = inner_sym2(&v, &u, &g).unwrap();
        prop_assert!(a.zip_with(&b, |x, y| x - y).unwrap().max_abs() <= 1e-15);
    }
}
