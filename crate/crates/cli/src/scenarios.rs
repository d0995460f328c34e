//! The verification suites. Each check is identified by `<kind>/<label>`; the
//! tolerance of a kind can be overridden in the config under `[tolerances]`.

use wlab::geometry::{adjoint_consistency_check, Geometry, RicciPath};
use wlab::grid::{PeriodicGrid, VolumeForm};
use wlab::kahler::{
    closedness_residual, cx_decomposition_check, evolve_j_sampled, hessian_invariant, hessian_kahler,
    hessian_kahler_f, kahler_identity_checks, membership_report, ricci_form, ComplexStructure,
};
use wlab::samples::{
    ddbar_direction, flat_hessian, j_anti_invariant_part, kahler_potential, potential_metric, random_metric,
    random_sym2, random_volume, standard_j_matrix, Scenario, SeedStream,
};
use wlab::space_of_metrics::{
    curvature_g, curve_length, distance_g, gamma_g, big_g_inner, sectional_g, Geodesic, MetricCurve,
};
use wlab::tensor::{
    decomposable, gram_formula, tensor_inner, Mat, MetricField, Sym2Field, TensorKind,
};
use wlab::variations::{
    central_difference, first_variation_report, fd_oracle, hessian_f, hessian_f_lower_bound,
    hessian_report, hessian_riemannian_with, min_ricci_eigenvalue, w_omega, w_omega_trace_form, FdOrder,
};

use crate::config::{ScenarioConfig, ScenarioName};
use crate::report::{CheckRecord, RunReport};

/// `(formula, oracle, residual)`.
type Outcome = wlab::Result<(f64, f64, f64)>;

fn rel(formula: f64, oracle: f64) -> (f64, f64, f64) {
    (formula, oracle, (formula - oracle).abs() / oracle.abs().max(1.0))
}

/// A residual that should vanish.
fn zero(residual: f64) -> (f64, f64, f64) {
    (residual, 0.0, residual)
}

struct Suite<'a> {
    cfg: &'a ScenarioConfig,
    checks: Vec<CheckRecord>,
}

impl<'a> Suite<'a> {
    fn grid(&self) -> PeriodicGrid {
        self.cfg.grid()
    }

    fn seeds(&self) -> impl Iterator<Item = u64> {
        let s = self.cfg.seed;
        (0..self.cfg.samples as u64).map(move |k| s.wrapping_add(k))
    }

    fn stream(&self, seed: u64) -> SeedStream {
        let s = SeedStream::new(seed);
        match self.cfg.max_freq {
            Some(k) => s.with_max_freq(k),
            None => s,
        }
    }

    fn record(&mut self, kind: &str, label: &str, anchor: &str, default_tol: f64, outcome: Outcome) {
        let tol = self.cfg.tolerances.get(kind).copied().unwrap_or(default_tol) * self.cfg.tol_scale;
        let id = format!("{kind}/{label}");
        self.checks.push(match outcome {
            Ok((f, o, r)) => CheckRecord::new(id, anchor, f, o, r, tol),
            Err(e) => CheckRecord::failed(id, anchor, tol, e.to_string()),
        });
    }
}

/// Runs the configured suite.
pub fn run_scenario(cfg: &ScenarioConfig) -> RunReport {
    let mut suite = Suite {
        cfg,
        checks: Vec::new(),
    };
    match cfg.scenario {
        ScenarioName::FirstVariation => first_variation(&mut suite),
        ScenarioName::SecondVariation => second_variation(&mut suite),
        ScenarioName::FSpace => f_space(&mut suite),
        ScenarioName::KahlerFixedJ => kahler_fixed_j(&mut suite),
        ScenarioName::KahlerMain => kahler_main(&mut suite),
        ScenarioName::RicciVariation => ricci_variation(&mut suite),
        ScenarioName::MetricSpace => metric_space(&mut suite),
        ScenarioName::Adjoints => adjoints(&mut suite),
        ScenarioName::JOde => j_ode(&mut suite),
        ScenarioName::ComplexDecomposition => complex_decomposition(&mut suite),
    }
    RunReport {
        scenario: cfg.scenario.as_str().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        wall_time_s: None,
        checks: suite.checks,
    }
}

fn generic(s: &Suite, seed: u64) -> wlab::Result<Scenario> {
    Scenario::from_stream(s.grid(), &mut s.stream(seed), [s.cfg.amplitude, 0.2, 0.5])
}

fn first_variation(s: &mut Suite) {
    for seed in s.seeds().collect::<Vec<_>>() {
        let label = format!("seed-{seed}");
        let sc = generic(s, seed);
        let out = sc.as_ref().map_err(Clone::clone).and_then(|sc| {
            let r = first_variation_report(&sc.g, &sc.omega, &sc.v, seed, &s.cfg.fd_steps)?;
            Ok((r.formula_value, r.oracle_value, r.rel_residual))
        });
        s.record("first-variation", &label, "first-variation/gradient-form", 1e-6, out);
        let out = sc.and_then(|sc| Ok(rel(w_omega_trace_form(&sc.g, &sc.omega)?, w_omega(&sc.g, &sc.omega)?)));
        s.record("w-functional", &label, "w-functional/integration-by-parts", 1e-10, out);
    }
}

fn second_variation(s: &mut Suite) {
    for seed in s.seeds().collect::<Vec<_>>() {
        let out = generic(s, seed).and_then(|sc| {
            let r = hessian_report(&sc.g, &sc.omega, &sc.v, seed, &s.cfg.fd_steps)?;
            Ok((r.formula_value, r.oracle_value, r.rel_residual))
        });
        s.record("second-variation", &format!("seed-{seed}"), "second-variation/riemannian", 1e-4, out);
    }
}

fn random_constant_sym(seeds: &mut SeedStream, m: usize, size: f64) -> Mat {
    let c = Mat::from_fn(m, m, |_, _| seeds.uniform() * size);
    (&c + c.transpose()) * 0.5
}

fn f_space(s: &mut Suite) {
    let grid = s.grid();
    let m = grid.dim();
    let g = MetricField::flat(grid);
    let geo = Geometry::new(&g);
    for seed in s.seeds().collect::<Vec<_>>() {
        let label = format!("seed-{seed}");
        let mut seeds = s.stream(seed);
        let omega = match random_volume(grid, &mut seeds, 0.3) {
            Ok(o) => o,
            Err(e) => {
                s.record("f-space", &label, "second-variation/f-space", 1e-8, Err(e));
                continue;
            }
        };
        let parallel = Sym2Field::constant(grid, &random_constant_sym(&mut seeds, m, 0.5));
        let codazzi = kahler_potential(grid, &mut seeds, 0.5)
            .and_then(|psi| parallel.add(&flat_hessian(&psi)));
        for (name, v) in [("parallel", Ok(parallel.clone())), ("codazzi", codazzi)] {
            let out = v.clone().and_then(|v| {
                Ok(rel(hessian_f(&g, &omega, &v)?, hessian_riemannian_with(&geo, &omega, &v)?))
            });
            s.record("f-space", &format!("{label}/{name}"), "second-variation/f-space", 1e-8, out);
            let out = v.and_then(|v| {
                let eps = min_ricci_eigenvalue(&g, &omega)?;
                let h = hessian_f(&g, &omega, &v)?;
                let bound = hessian_f_lower_bound(&g, &omega, &v, eps)?;
                Ok((h, bound, ((bound - h) / h.abs().max(1.0)).max(0.0)))
            });
            s.record("f-space-bound", &format!("{label}/{name}"), "second-variation/f-space-lower-bound", 1e-12, out);
        }
    }
}

/// Potential metric, volume form and the seed stream they came from.
fn kahler_data(s: &Suite, seed: u64) -> wlab::Result<(MetricField, VolumeForm, SeedStream)> {
    let grid = s.grid();
    let mut seeds = s.stream(seed);
    let jm = standard_j_matrix(grid.dim());
    let g = potential_metric(&kahler_potential(grid, &mut seeds, s.cfg.amplitude)?, &jm)?;
    let omega = random_volume(grid, &mut seeds, 0.2)?;
    Ok((g, omega, seeds))
}

fn kahler_fixed_j(s: &mut Suite) {
    let grid = s.grid();
    for seed in s.seeds().collect::<Vec<_>>() {
        let label = format!("seed-{seed}");
        let data = ComplexStructure::standard(grid).and_then(|j| {
            let (g, omega, mut seeds) = kahler_data(s, seed)?;
            let jm = standard_j_matrix(grid.dim());
            let v = ddbar_direction(&kahler_potential(grid, &mut seeds, 0.5)?, &jm);
            Ok((j, g, omega, v))
        });
        let (j, g, omega, v) = match data {
            Ok(d) => d,
            Err(e) => {
                s.record("kahler-invariant", &label, "kahler/invariant-directions", 1e-6, Err(e));
                continue;
            }
        };
        let geo = Geometry::new(&g);
        let out = (|| Ok(rel(hessian_invariant(&geo, &j, &omega, &v)?, hessian_riemannian_with(&geo, &omega, &v)?)))();
        s.record("kahler-invariant", &format!("{label}/ddbar"), "kahler/invariant-directions", 1e-6, out);
        let out = (|| {
            let d = g.as_sym2().clone();
            Ok(rel(hessian_invariant(&geo, &j, &omega, &d)?, hessian_riemannian_with(&geo, &omega, &d)?))
        })();
        s.record("kahler-invariant", &format!("{label}/scaling"), "kahler/invariant-directions", 1e-6, out);
        let out = (|| {
            let fd = fd_oracle(&g, &omega, &v, FdOrder::Second, &s.cfg.fd_steps)?;
            Ok(rel(hessian_invariant(&geo, &j, &omega, &v)?, fd))
        })();
        s.record("kahler-invariant-fd", &label, "kahler/invariant-directions", 1e-4, out);
        let out = closedness_residual(&v, &j).map(zero);
        s.record("membership-dhat", &label, "kahler/tangent-space", 1e-8, out);
    }
}

fn kahler_main(s: &mut Suite) {
    let grid = s.grid();
    let m = grid.dim();
    for seed in s.seeds().collect::<Vec<_>>() {
        let label = format!("seed-{seed}");
        let data = ComplexStructure::standard(grid).and_then(|j| {
            let (g, omega, mut seeds) = kahler_data(s, seed)?;
            let jm = standard_j_matrix(m);
            let geo = Geometry::new(&g);
            let b = ddbar_direction(&kahler_potential(grid, &mut seeds, 0.5)?, &jm);
            let a = j_anti_invariant_part(&geo.hessian(&kahler_potential(grid, &mut seeds, 0.5)?)?, &jm);
            let c = random_constant_sym(&mut seeds, m, 0.5);
            let f = Sym2Field::constant(grid, &c).add(&flat_hessian(&kahler_potential(grid, &mut seeds, 0.5)?))?;
            Ok((j, geo, omega, b.add(&a)?, f))
        });
        let (j, geo, omega, v, f) = match data {
            Ok(d) => d,
            Err(e) => {
                s.record("kahler-main", &label, "kahler/second-variation", 1e-6, Err(e));
                continue;
            }
        };
        let out = membership_report(&geo, &j, &v).map(|r| zero(r.d));
        s.record("membership-d", &label, "kahler/d-space", 1e-8, out);
        let out = (|| Ok(rel(hessian_kahler(&geo, &j, &omega, &v)?, hessian_riemannian_with(&geo, &omega, &v)?)))();
        s.record("kahler-main", &label, "kahler/second-variation", 1e-6, out);

        let flat = Geometry::new(&MetricField::flat(grid));
        let out = membership_report(&flat, &j, &f).map(|r| zero(r.f.max(r.kah_f).max(r.sup_kh_sm)));
        s.record("membership-f", &label, "kahler/f-space", 1e-8, out);
        let out = (|| Ok(rel(hessian_kahler_f(&flat, &j, &omega, &f)?, hessian_f(flat.metric(), &omega, &f)?)))();
        s.record("kahler-f", &format!("{label}/vs-f-space"), "kahler/second-variation-f-space", 1e-6, out);
        let out = (|| Ok(rel(hessian_kahler_f(&flat, &j, &omega, &f)?, hessian_riemannian_with(&flat, &omega, &f)?)))();
        s.record("kahler-f", &format!("{label}/vs-riemannian"), "kahler/second-variation-f-space", 1e-6, out);
        let out = (|| Ok(rel(hessian_kahler(&flat, &j, &omega, &f)?, hessian_riemannian_with(&flat, &omega, &f)?)))();
        s.record("kahler-f", &format!("{label}/via-d-space"), "kahler/second-variation", 1e-6, out);
    }
}

fn ricci_variation(s: &mut Suite) {
    for seed in s.seeds().collect::<Vec<_>>() {
        let label = format!("seed-{seed}");
        let sc = match generic(s, seed) {
            Ok(sc) => sc,
            Err(e) => {
                s.record("ricci-variation-paths", &label, "ricci-variation/two-path", 1e-8, Err(e));
                continue;
            }
        };
        let geo = Geometry::new(&sc.g);
        let paths = (|| {
            let a = geo.ricci_variation(&sc.omega, &sc.v, RicciPath::Divergence)?;
            let b = geo.ricci_variation(&sc.omega, &sc.v, RicciPath::Adjoint)?;
            Ok((a, b))
        })();
        let out = paths.clone().and_then(|(a, b)| {
            let scale = b.max_abs();
            Ok((scale, scale, a.sub(&b)?.max_abs() / scale.max(1.0)))
        });
        s.record("ricci-variation-paths", &label, "ricci-variation/two-path", 1e-8, out);
        let out = paths.and_then(|(a, _)| {
            let fd = fd_ricci(&sc, &s.cfg.fd_steps)?;
            let scale = fd.max_abs();
            Ok((a.max_abs(), scale, a.sub(&fd)?.max_abs() / scale.max(1.0)))
        });
        s.record("ricci-variation-fd", &label, "ricci-variation/finite-difference", 1e-6, out);
    }
}

/// Richardson-extrapolated central difference of `Ric_g(Omega)` along `g + t v`.
fn fd_ricci(sc: &Scenario, steps: &[f64]) -> wlab::Result<Sym2Field> {
    let ric = |h: f64| -> wlab::Result<Sym2Field> {
        let g = MetricField::new(sc.g.as_sym2().axpy(h, &sc.v)?)?;
        Geometry::new(&g).bakry_emery(&sc.omega)
    };
    let diff = |h: f64| -> wlab::Result<Sym2Field> { Ok(ric(h)?.sub(&ric(-h)?)?.scale(0.5 / h)) };
    let mut acc = diff(steps[0])?;
    for k in 1..steps.len() {
        let r = (steps[k - 1] / steps[k]).powi(2);
        acc = diff(steps[k])?.scale(r).sub(&acc)?.scale(1.0 / (r - 1.0));
    }
    Ok(acc)
}

fn metric_space(s: &mut Suite) {
    let grid = s.grid();
    let m = grid.dim();
    let unit = VolumeForm::unit(grid);
    for seed in s.seeds().collect::<Vec<_>>() {
        let label = format!("seed-{seed}");
        let mut seeds = s.stream(seed);
        let data = (|| {
            let g0 = random_metric(grid, &mut seeds, s.cfg.amplitude)?;
            let u = random_sym2(grid, &mut seeds, 0.5)?;
            let v = random_sym2(grid, &mut seeds, 0.5)?;
            let omega = random_volume(grid, &mut seeds, 0.2)?;
            Ok((g0, u, v, omega))
        })();
        let (g0, u, v, omega) = match data {
            Ok(d) => d,
            Err(e) => {
                s.record("geodesic-ode", &label, "metric-space/geodesic", 1e-8, Err(e));
                continue;
            }
        };
        let out = geodesic_ode_residual(&g0, &v, 0.5);
        s.record("geodesic-ode", &label, "metric-space/geodesic", 1e-8, out);

        let out = (|| {
            let geo = Geodesic::new(&g0, &v)?;
            let g1 = geo.metric_at(1.0)?;
            let len = curve_length(&MetricCurve::Geodesic(geo), &omega, 0.0, 1.0, 64)?;
            Ok(rel(distance_g(&g0, &g1, &omega)?, len))
        })();
        s.record("distance-arclength", &label, "metric-space/distance", 1e-8, out);

        let (a, b) = (seeds.uniform(), seeds.uniform());
        let out = (|| {
            let mut d = Mat::identity(m, m);
            d[(0, 0)] = a.exp();
            d[(m - 1, m - 1)] = b.exp();
            let g1 = MetricField::new(Sym2Field::constant(grid, &d))?;
            let expected = if m == 1 { (a + b).abs() } else { (a * a + b * b).sqrt() };
            let dist = distance_g(&MetricField::flat(grid), &g1, &unit)?;
            Ok((dist, expected, (dist - expected).abs()))
        })();
        s.record("distance-closed-form", &label, "metric-space/distance", 1e-12, out);

        let out = sectional_g(&g0, &u, &v, &omega).map(|sig| (sig, 0.0, sig.max(0.0)));
        s.record("sectional-sign", &label, "metric-space/curvature", 0.0, out);
        let out = (|| {
            let r = curvature_g(&g0, &u, &v, &v)?;
            Ok(rel(big_g_inner(&g0, &r, &u, &omega)?, sectional_g(&g0, &u, &v, &omega)?))
        })();
        s.record("curvature-two-path", &label, "metric-space/curvature", 1e-10, out);
    }
    if m >= 2 {
        let out = (|| {
            let mut x = Mat::zeros(m, m);
            x[(0, 1)] = 1.0;
            x[(1, 0)] = 1.0;
            let mut y = Mat::zeros(m, m);
            y[(0, 0)] = 1.0;
            y[(1, 1)] = -1.0;
            let flat = MetricField::flat(grid);
            let sig = sectional_g(&flat, &Sym2Field::constant(grid, &x), &Sym2Field::constant(grid, &y), &unit)?;
            Ok((sig, -2.0, (sig + 2.0).abs()))
        })();
        s.record("sectional-example", "2x2", "metric-space/curvature", 1e-12, out);
    }
}

/// `g'' = g' g^{-1} g'` at time `t`, with `g''` from central differences of
/// the exact velocity.
fn geodesic_ode_residual(g0: &MetricField, v: &Sym2Field, t: f64) -> Outcome {
    let geo = Geodesic::new(g0, v)?;
    let gt = geo.metric_at(t)?;
    let rhs = gamma_g(&gt, &geo.velocity_at(t), &geo.velocity_at(t))?.scale(-1.0);
    let mut worst = 0.0f64;
    for p in 0..g0.grid().len() {
        for i in 0..g0.dim() {
            for k in i..g0.dim() {
                let comp = |h: f64| Ok(geo.velocity_at(t + h).at(p)[(i, k)]);
                let (acc, _) = central_difference(comp, FdOrder::First, &[1e-2, 5e-3])?;
                worst = worst.max((acc - rhs.at(p)[(i, k)]).abs());
            }
        }
    }
    let scale = rhs.max_abs();
    Ok((scale, scale, worst / scale.max(1.0)))
}

fn adjoints(s: &mut Suite) {
    let grid = s.grid();
    let m = grid.dim();
    for seed in s.seeds().collect::<Vec<_>>() {
        let label = format!("seed-{seed}");
        let mut seeds = s.stream(seed);
        let data = (|| {
            let g = random_metric(grid, &mut seeds, s.cfg.amplitude)?;
            let omega = random_volume(grid, &mut seeds, 0.2)?;
            Ok((g, omega))
        })();
        let (g, omega) = match data {
            Ok(d) => d,
            Err(e) => {
                s.record("adjoint-consistency", &label, "adjoints/symmetrized-derivative", 1e-10, Err(e));
                continue;
            }
        };
        for p in [2usize, 3] {
            for (kind, name) in [(TensorKind::Alternating, "alternating"), (TensorKind::Symmetric, "symmetric")] {
                let out = adjoint_consistency_check(p, kind, &g, &omega, seeds.next_seed())
                    .map(|r| (r.scale, r.scale, r.pointwise / r.scale.max(1.0)));
                s.record("adjoint-consistency", &format!("{label}/{name}-{p}"), "adjoints/symmetrized-derivative", 1e-10, out);

                let ginv = g.inv_at(seeds.next_seed() as usize % grid.len());
                let mut cov = |_| (0..m).map(|_| seeds.uniform()).collect::<Vec<f64>>();
                let a: Vec<Vec<f64>> = (0..p).map(&mut cov).collect();
                let mut b: Vec<Vec<f64>> = (0..p).map(&mut cov).collect();
                if kind == TensorKind::Symmetric {
                    b[1] = b[0].clone();
                }
                let out = (|| {
                    let lhs = tensor_inner(m, p, &decomposable(m, &a, kind)?, &decomposable(m, &b, kind)?, &ginv);
                    Ok(rel(gram_formula(&a, &b, &ginv, kind), lhs))
                })();
                s.record("induced-metric", &format!("{label}/{name}-{p}"), "adjoints/induced-metric", 1e-10, out);
            }
        }
        let out = (|| {
            let geo = Geometry::new(&g);
            let v = random_sym2(grid, &mut seeds, 0.5)?;
            let t = wlab::samples::random_tensor(grid, 3, &mut seeds, 0.5)?;
            let lhs = wlab::grid::integrate(&wlab::tensor::inner_tensor(&geo.hat_nabla(&v)?, &t, &g)?, &omega)?;
            let rhs = wlab::grid::integrate(&wlab::tensor::inner_sym2(&v, &geo.omega_adjoint_hat(&t, &omega)?, &g)?, &omega)?;
            Ok(rel(lhs, rhs))
        })();
        s.record("hat-adjoint-duality", &label, "adjoints/symmetrized-derivative", 1e-10, out);
    }
}

fn j_ode(s: &mut Suite) {
    let grid = s.grid();
    let m = grid.dim();
    let steps = s.cfg.ode_steps;
    let a = 0.3;
    let closed = ComplexStructure::standard(grid).and_then(|j0| {
        let mut d = Mat::zeros(m, m);
        for k in 0..m / 2 {
            d[(2 * k, 2 * k)] = a;
            d[(2 * k + 1, 2 * k + 1)] = -a;
        }
        let g0 = MetricField::flat(grid);
        let curve = MetricCurve::geodesic(&g0, &Sym2Field::constant(grid, &d))?;
        let tr = evolve_j_sampled(&curve, &j0, 1.0, steps, steps)?;
        let jf = tr.final_structure();
        let mut exact = Mat::zeros(m, m);
        for k in 0..m / 2 {
            exact[(2 * k, 2 * k + 1)] = -(-a).exp();
            exact[(2 * k + 1, 2 * k)] = a.exp();
        }
        let g1 = curve.metric_at(1.0)?;
        let jm = standard_j_matrix(m);
        let (mut dev, mut omega_dev) = (0.0f64, 0.0f64);
        for p in 0..grid.len() {
            dev = dev.max((jf.at(p) - &exact).amax());
            // g(J xi, eta) as a matrix: J^t g, constant and equal to J_0^t.
            omega_dev = omega_dev.max((jf.at(p).transpose() * g1.at(p) - jm.transpose()).amax());
        }
        Ok((dev, omega_dev))
    });
    s.record("j-closed-form", "diag", "j-transport/closed-form", 1e-8, closed.clone().map(|(d, _)| zero(d)));
    s.record("kahler-form-constant", "diag", "j-transport/closed-form", 1e-9, closed.map(|(_, w)| zero(w)));

    for seed in s.seeds().collect::<Vec<_>>() {
        let label = format!("seed-{seed}");
        let mut seeds = s.stream(seed);
        let run = ComplexStructure::standard(grid).and_then(|j0| {
            let c = random_constant_sym(&mut seeds, m, 0.6);
            let curve = MetricCurve::geodesic(&MetricField::flat(grid), &Sym2Field::constant(grid, &c))?;
            evolve_j_sampled(&curve, &j0, 1.0, steps, (steps / 10).max(1))
        });
        let checks: [(&str, fn(&wlab::kahler::JDiagnostics) -> f64); 8] = [
            ("j-square", |d| d.compat.sq),
            ("j-skew", |d| d.compat.skew),
            ("j-parallel", |d| d.compat.parallel),
            ("j-nijenhuis", |d| d.compat.nijenhuis),
            ("j-transpose-identity", |d| d.der_j_inv_t),
            ("j-invariance-derivative", |d| d.der_j_inv),
            ("j-dbar-velocity", |d| d.dbar_jdot),
            ("j-velocity-split", |d| d.j_jdot),
        ];
        for (kind, f) in checks {
            let out = run.as_ref().map(|tr| zero(tr.max_of(f))).map_err(Clone::clone);
            s.record(kind, &label, "j-transport/f-velocity", 1e-7, out);
        }
    }
}

fn complex_decomposition(s: &mut Suite) {
    let grid = s.grid();
    let m = grid.dim();
    for seed in s.seeds().collect::<Vec<_>>() {
        let label = format!("seed-{seed}");
        let data = ComplexStructure::standard(grid).and_then(|j| {
            let (g, omega, mut seeds) = kahler_data(s, seed)?;
            let jm = standard_j_matrix(m);
            let geo = Geometry::new(&g);
            let b = ddbar_direction(&kahler_potential(grid, &mut seeds, 0.5)?, &jm);
            let a = j_anti_invariant_part(&geo.hessian(&kahler_potential(grid, &mut seeds, 0.5)?)?, &jm);
            let c = random_constant_sym(&mut seeds, m, 0.5);
            let f = Sym2Field::constant(grid, &c).add(&flat_hessian(&kahler_potential(grid, &mut seeds, 0.5)?))?;
            Ok((j, geo, omega, b.add(&a)?, f))
        });
        let (j, geo, omega, v, f) = match data {
            Ok(d) => d,
            Err(e) => {
                s.record("cx-ricci", &label, "complex-decomposition/ricci", 1e-7, Err(e));
                continue;
            }
        };
        let cx = cx_decomposition_check(&geo, &j, &omega);
        s.record("cx-ricci", &label, "complex-decomposition/ricci", 1e-7, cx.as_ref().map(|c| zero(c.ricci)).map_err(Clone::clone));
        s.record("cx-hessian", &label, "complex-decomposition/hessian", 1e-7, cx.as_ref().map(|c| zero(c.hessian)).map_err(Clone::clone));
        let out = (|| {
            let rf = ricci_form(&j, &geo.metric().volume_form())?;
            let ric = geo.curvature().ricci;
            let jm = j.constant_matrix()?;
            let mut worst = 0.0f64;
            for p in 0..grid.len() {
                let w = Mat::from_row_slice(m, m, &rf.at(p));
                worst = worst.max((w - jm.transpose() * ric.at(p)).amax());
            }
            Ok(zero(worst))
        })();
        s.record("ricci-form-volume", &label, "complex-decomposition/ricci-form", 1e-7, out);

        let ids = kahler_identity_checks(&geo, &j, &v, &omega);
        let names = ["orth-der", "der-a-del-a", "b-split"];
        for (k, name) in names.iter().enumerate() {
            let out = ids.as_ref().map_err(Clone::clone).map(|c| {
                let pair = [c.orth_der, c.der_a_del_a, c.b_split][k];
                (pair.0, pair.1, (pair.0 - pair.1).abs())
            });
            s.record(&format!("identity-{name}"), &label, "kahler/identities", 1e-7, out);
        }
        let flat = Geometry::new(&MetricField::flat(grid));
        let out = kahler_identity_checks(&flat, &j, &f, &omega).map(|c| (c.f_chain.0, c.f_chain.1, (c.f_chain.0 - c.f_chain.1).abs()));
        s.record("identity-f-chain", &label, "kahler/identities", 1e-7, out);
    }
}
