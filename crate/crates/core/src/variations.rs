//! The W-functional, its first variation and its Hessian on the space of
//! metrics, plus finite-difference oracles along straight lines and geodesics.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::grid::{integrate_raw, PeriodicGrid, ScalarField, VolumeForm};
use crate::space_of_metrics::{Geodesic, MetricCurve};
use crate::tensor::{inner_sym2, inner_tensor, Mat, MetricField, Sym2Field};

/// Membership tolerance for `F_g`.
pub const F_TOL: f64 = 1e-8;

/// Default finite-difference step ladder.
pub const DEFAULT_STEPS: [f64; 2] = [1e-3, 5e-4];

fn weighted(g: &MetricField, f: &ScalarField, integrand: &ScalarField) -> f64 {
    let w: Vec<f64> = f
        .values()
        .iter()
        .zip(g.sqrt_det_raw())
        .map(|(f, s)| (-f).exp() * s)
        .collect();
    integrate_raw(g.grid(), integrand.values(), &w)
}

/// `W(g, f) = int (|df|^2 + Scal + 2f - m) e^{-f} dV_g`.
pub fn w_functional(g: &MetricField, f: &ScalarField) -> Result<f64> {
    let geo = Geometry::new(g);
    let scal = geo.curvature().scalar;
    let grad = geo.grad_norm_sq(f)?;
    let m = g.dim() as f64;
    let integrand = ScalarField::new(
        g.grid(),
        (0..g.grid().len())
            .map(|p| grad.values()[p] + scal.values()[p] + 2.0 * f.values()[p] - m)
            .collect(),
    )?;
    Ok(weighted(g, f, &integrand))
}

/// `W(g, f)` with `|df|^2` replaced by `Delta f` (equal after integration by parts).
pub fn w_functional_laplacian(g: &MetricField, f: &ScalarField) -> Result<f64> {
    let geo = Geometry::new(g);
    let scal = geo.curvature().scalar;
    let lap = geo.laplacian(f)?;
    let m = g.dim() as f64;
    let integrand = ScalarField::new(
        g.grid(),
        (0..g.grid().len())
            .map(|p| lap.values()[p] + scal.values()[p] + 2.0 * f.values()[p] - m)
            .collect(),
    )?;
    Ok(weighted(g, f, &integrand))
}

/// `W_Omega(g) = W(g, log(dV_g / Omega))`.
pub fn w_omega(g: &MetricField, omega: &VolumeForm) -> Result<f64> {
    let f = crate::geometry::log_density(g, omega)?;
    let geo = Geometry::new(g);
    let scal = geo.curvature().scalar;
    let grad = geo.grad_norm_sq(&f)?;
    let m = g.dim() as f64;
    let integrand: Vec<f64> = (0..g.grid().len())
        .map(|p| grad.values()[p] + scal.values()[p] + 2.0 * f.values()[p] - m)
        .collect();
    Ok(integrate_raw(g.grid(), &integrand, omega.density()))
}

/// `W_Omega(g) = int (Tr_g(Ric_g(Omega) - g) + 2 log(dV_g/Omega)) Omega`.
pub fn w_omega_trace_form(g: &MetricField, omega: &VolumeForm) -> Result<f64> {
    let f = crate::geometry::log_density(g, omega)?;
    let geo = Geometry::new(g);
    let h = geo.bakry_emery(omega)?.sub(g.as_sym2())?;
    let tr = crate::tensor::trace_g(&h, g)?;
    let integrand: Vec<f64> = (0..g.grid().len())
        .map(|p| tr.values()[p] + 2.0 * f.values()[p])
        .collect();
    Ok(integrate_raw(g.grid(), &integrand, omega.density()))
}

/// `D W_Omega(v) = int <v, g - Ric_g(Omega)>_g Omega`.
pub fn first_variation(g: &MetricField, omega: &VolumeForm, v: &Sym2Field) -> Result<f64> {
    let geo = Geometry::new(g);
    let h = g.as_sym2().sub(&geo.bakry_emery(omega)?)?;
    crate::grid::integrate(&inner_sym2(v, &h, g)?, omega)
}

/// `int Tr[(v*)^2 Ric*_g(Omega)] Omega`, the curvature term shared by all
/// Hessian formulas.
pub fn ricci_coupling(geo: &Geometry, omega: &VolumeForm, v: &Sym2Field) -> Result<f64> {
    let g = geo.metric();
    let ric = geo.bakry_emery(omega)?;
    let vals: Vec<f64> = (0..g.grid().len())
        .map(|p| {
            let gi = g.inv_at(p);
            let vs = &gi * v.at(p);
            let rs = &gi * ric.at(p);
            (&vs * &vs * rs).trace()
        })
        .collect();
    Ok(integrate_raw(g.grid(), &vals, omega.density()))
}

fn integrate_field(s: &ScalarField, omega: &VolumeForm) -> Result<f64> {
    crate::grid::integrate(s, omega)
}

/// Hessian of `W_Omega` at `g` in the direction `v`:
/// `int Tr[(v*)^2 Ric*] Omega + int (|hat nabla v|^2 / 6 - |nabla v|^2) Omega`.
pub fn hessian_riemannian(g: &MetricField, omega: &VolumeForm, v: &Sym2Field) -> Result<f64> {
    let geo = Geometry::new(g);
    hessian_riemannian_with(&geo, omega, v)
}

pub fn hessian_riemannian_with(geo: &Geometry, omega: &VolumeForm, v: &Sym2Field) -> Result<f64> {
    let g = geo.metric();
    let n = geo.nabla_sym2(v)?;
    let hat = geo.hat_nabla(v)?;
    let n2 = inner_tensor(&n, &n, g)?;
    let h2 = inner_tensor(&hat, &hat, g)?;
    let d = h2.zip_with(&n2, |h, n| h / 6.0 - n)?;
    Ok(ricci_coupling(geo, omega, v)? + integrate_field(&d, omega)?)
}

/// Sup norm of the antisymmetrization of `nabla v` in its first two slots,
/// which vanishes exactly on `F_g`.
pub fn f_space_residual(geo: &Geometry, v: &Sym2Field) -> Result<f64> {
    let n = geo.nabla_sym2(v)?;
    Ok(n.sub(&n.permuted(&[1, 0, 2]))?.max_abs())
}

/// Hessian for `v` in `F_g`: `int [Tr((v*)^2 Ric*) + 1/2 |nabla v|^2] Omega`.
pub fn hessian_f(g: &MetricField, omega: &VolumeForm, v: &Sym2Field) -> Result<f64> {
    let geo = Geometry::new(g);
    let residual = f_space_residual(&geo, v)?;
    if residual > F_TOL {
        return Err(Error::Precondition {
            what: "v in F_g",
            residual,
            tol: F_TOL,
        });
    }
    let n = geo.nabla_sym2(v)?;
    let n2 = inner_tensor(&n, &n, g)?;
    Ok(ricci_coupling(&geo, omega, v)? + 0.5 * integrate_field(&n2, omega)?)
}

/// Right-hand side `int [eps |v|^2 + 1/2 |nabla v|^2] Omega` of the lower bound.
pub fn hessian_f_lower_bound(
    g: &MetricField,
    omega: &VolumeForm,
    v: &Sym2Field,
    eps: f64,
) -> Result<f64> {
    let geo = Geometry::new(g);
    let n = geo.nabla_sym2(v)?;
    let n2 = inner_tensor(&n, &n, g)?;
    let v2 = inner_sym2(v, v, g)?;
    let s = v2.zip_with(&n2, |a, b| eps * a + 0.5 * b)?;
    integrate_field(&s, omega)
}

/// Smallest eigenvalue of `g^{-1} Ric_g(Omega)` over the lattice; the bound
/// `Ric_g(Omega) >= eps g` holds on the grid iff this is at least `eps`.
pub fn min_ricci_eigenvalue(g: &MetricField, omega: &VolumeForm) -> Result<f64> {
    let ric = Geometry::new(g).bakry_emery(omega)?;
    let mut lo = f64::INFINITY;
    for p in 0..g.grid().len() {
        let chol = g.at(p).cholesky().ok_or(Error::NotPositiveDefinite {
            point: p,
            min_eig: f64::NAN,
        })?;
        let li = chol.l().try_inverse().ok_or(Error::Eigen("singular factor".into()))?;
        let c: Mat = &li * ric.at(p) * li.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let e = SymmetricEigen::new(c);
        lo = lo.min(e.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    Ok(lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdOrder {
    /// First derivative along the straight line `g + t v`.
    First,
    /// Second derivative along the geodesic with initial velocity `v`.
    Second,
}

/// Richardson-extrapolated central difference of `phi` at 0.
///
/// `steps` must be decreasing; each value is combined with the previous one.
/// Returns `(estimate, steps_used)`. A step is halved (all steps together)
/// when `phi` leaves its domain, signalled by [`Error::LeftCone`] or
/// [`Error::NotPositiveDefinite`].
pub fn central_difference(
    phi: impl Fn(f64) -> Result<f64>,
    order: FdOrder,
    steps: &[f64],
) -> Result<(f64, Vec<f64>)> {
    assert!(steps.len() >= 2, "need two steps for extrapolation");
    let mut steps = steps.to_vec();
    for _ in 0..12 {
        match try_ladder(&phi, order, &steps) {
            Ok(v) => return Ok((v, steps)),
            Err(Error::LeftCone(_)) | Err(Error::NotPositiveDefinite { .. }) => {
                steps.iter_mut().for_each(|h| *h *= 0.5);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::LeftCone(steps[0]))
}

fn try_ladder(phi: &impl Fn(f64) -> Result<f64>, order: FdOrder, steps: &[f64]) -> Result<f64> {
    let center = if order == FdOrder::Second { Some(phi(0.0)?) } else { None };
    let mut est = Vec::with_capacity(steps.len());
    for &h in steps {
        let d = match order {
            FdOrder::First => (phi(h)? - phi(-h)?) / (2.0 * h),
            FdOrder::Second => {
                let c = center.expect("computed above");
                (-phi(2.0 * h)? + 16.0 * phi(h)? - 30.0 * c + 16.0 * phi(-h)? - phi(-2.0 * h)?)
                    / (12.0 * h * h)
            }
        };
        est.push(d);
    }
    let power = match order {
        FdOrder::First => 2,
        FdOrder::Second => 4,
    };
    let mut acc = est[0];
    for k in 1..steps.len() {
        let r = (steps[k - 1] / steps[k]).powi(power);
        acc = (r * est[k] - acc) / (r - 1.0);
    }
    Ok(acc)
}

/// Finite-difference estimate of `d/dt W_Omega(g + t v)` (first order) or of
/// `d^2/dt^2 W_Omega(g_t)` along the G-geodesic with `g_0 = g`, `dg_0 = v`.
pub fn fd_oracle(
    g: &MetricField,
    omega: &VolumeForm,
    v: &Sym2Field,
    order: FdOrder,
    steps: &[f64],
) -> Result<f64> {
    let curve = match order {
        FdOrder::First => MetricCurve::line(g, v)?,
        FdOrder::Second => MetricCurve::Geodesic(Geodesic::new(g, v)?),
    };
    let phi = |t: f64| w_omega(&curve.metric_at(t)?, omega);
    Ok(central_difference(phi, order, steps)?.0)
}

/// A formula value checked against an oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationReport {
    pub formula_value: f64,
    pub oracle_value: f64,
    pub abs_residual: f64,
    /// `abs_residual / max(1, |oracle|)`.
    pub rel_residual: f64,
    pub seed: u64,
    pub grid: PeriodicGrid,
    pub steps: Vec<f64>,
}

impl VariationReport {
    pub fn new(formula: f64, oracle: f64, seed: u64, grid: PeriodicGrid, steps: Vec<f64>) -> Self {
        let abs = (formula - oracle).abs();
        Self {
            formula_value: formula,
            oracle_value: oracle,
            abs_residual: abs,
            rel_residual: abs / oracle.abs().max(1.0),
            seed,
            grid,
            steps,
        }
    }
}

/// First variation against the order-1 oracle.
pub fn first_variation_report(
    g: &MetricField,
    omega: &VolumeForm,
    v: &Sym2Field,
    seed: u64,
    steps: &[f64],
) -> Result<VariationReport> {
    let formula = first_variation(g, omega, v)?;
    let curve = MetricCurve::line(g, v)?;
    let (oracle, used) =
        central_difference(|t| w_omega(&curve.metric_at(t)?, omega), FdOrder::First, steps)?;
    Ok(VariationReport::new(formula, oracle, seed, g.grid(), used))
}

/// Riemannian Hessian against the order-2 geodesic oracle.
pub fn hessian_report(
    g: &MetricField,
    omega: &VolumeForm,
    v: &Sym2Field,
    seed: u64,
    steps: &[f64],
) -> Result<VariationReport> {
    let formula = hessian_riemannian(g, omega, v)?;
    let curve = MetricCurve::Geodesic(Geodesic::new(g, v)?);
    let (oracle, used) =
        central_difference(|t| w_omega(&curve.metric_at(t)?, omega), FdOrder::Second, steps)?;
    Ok(VariationReport::new(formula, oracle, seed, g.grid(), used))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn flat_w_values() {
        let grid = make_grid(2, 8).unwrap();
        let g = MetricField::flat(grid);
        assert!((w_functional(&g, &ScalarField::zeros(grid)).unwrap() + 2.0).abs() < 1e-14);
        let c = 0.7;
        let w = w_functional(&g, &ScalarField::constant(grid, c)).unwrap();
        assert!((w - (2.0 * c - 2.0) * (-c).exp()).abs() < 1e-14);
        assert!((w_omega(&g, &g.volume_form()).unwrap() + 2.0).abs() < 1e-14);
    }

    #[test]
    fn first_variation_flat_constant() {
        let grid = make_grid(2, 8).unwrap();
        let g = MetricField::flat(grid);
        let v = Sym2Field::constant(grid, &Mat::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.5]));
        let omega = g.volume_form();
        assert!((first_variation(&g, &omega, &v).unwrap() - 0.8).abs() < 1e-14);
        assert_eq!(first_variation(&g, &omega, &Sym2Field::zeros(grid)).unwrap(), 0.0);
    }

    #[test]
    fn richardson_on_polynomials() {
        let (d1, _) = central_difference(|t| Ok(t.powi(3) + 2.0 * t), FdOrder::First, &DEFAULT_STEPS).unwrap();
        assert!((d1 - 2.0).abs() < 1e-12);
        let (d2, _) = central_difference(|t| Ok(t.powi(5) + 3.0 * t * t), FdOrder::Second, &[1e-2, 5e-3]).unwrap();
        assert!((d2 - 6.0).abs() < 1e-8);
    }

    #[test]
    fn steps_shrink_outside_the_domain() {
        let phi = |t: f64| if t.abs() > 1e-4 { Err(Error::LeftCone(t)) } else { Ok(t) };
        let (d, used) = central_difference(phi, FdOrder::First, &DEFAULT_STEPS).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        assert!(used[0] <= 1e-4);
    }
}
