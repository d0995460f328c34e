//! The space of metrics with the `L^2` metric `G_g(u, v) = int <u, v>_g Omega`:
//! its Christoffel operator, explicit geodesics, distance and curvature.
//!
//! Matrix functions of the g-symmetric endomorphism `g_0^{-1} v_0` are taken
//! through the symmetric conjugate `g_0^{-1/2} v_0 g_0^{-1/2}`.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::grid::{integrate_raw, VolumeForm};
use crate::tensor::{inner_sym2, Mat, MetricField, Sym2Field};

fn check(g: &MetricField, v: &Sym2Field) -> Result<()> {
    if g.grid() == v.grid() {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// `G_g(u, v)`.
pub fn big_g_inner(g: &MetricField, u: &Sym2Field, v: &Sym2Field, omega: &VolumeForm) -> Result<f64> {
    let s = inner_sym2(u, v, g)?;
    crate::grid::integrate(&s, omega)
}

/// Christoffel operator `Gamma_G(u, v) = -1/2 (u v* + v u*)`.
pub fn gamma_g(g: &MetricField, u: &Sym2Field, v: &Sym2Field) -> Result<Sym2Field> {
    check(g, u)?;
    check(g, v)?;
    Ok(Sym2Field::from_fn(g.grid(), |p| {
        let gi = g.inv_at(p);
        let (a, b) = (u.at(p), v.at(p));
        (&a * &gi * &b + &b * &gi * &a) * -0.5
    }))
}

/// Square root and inverse square root of an SPD matrix.
fn spd_sqrt(a: &Mat) -> Result<(Mat, Mat)> {
    let eig = SymmetricEigen::new(a.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Eigen("matrix is not positive definite".into()));
    }
    let q = &eig.eigenvectors;
    let s = q * Mat::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * q.transpose();
    let si = q * Mat::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt())) * q.transpose();
    Ok((s, si))
}

/// The geodesic `g_t = g_0 exp(t g_0^{-1} v_0)`, pre-factored per point as
/// `g_t = P e^{t Lambda} P^t`.
#[derive(Debug, Clone)]
pub struct Geodesic {
    g0: MetricField,
    v0: Sym2Field,
    frames: Vec<Mat>,
    rates: Vec<Vec<f64>>,
}

impl Geodesic {
    pub fn new(g0: &MetricField, v0: &Sym2Field) -> Result<Self> {
        check(g0, v0)?;
        let n = g0.grid().len();
        let mut frames = Vec::with_capacity(n);
        let mut rates = Vec::with_capacity(n);
        for p in 0..n {
            let (s, si) = spd_sqrt(&g0.at(p))?;
            let mut c = &si * v0.at(p) * &si;
            c = (&c + c.transpose()) * 0.5;
            let eig = SymmetricEigen::new(c);
            frames.push(&s * &eig.eigenvectors);
            rates.push(eig.eigenvalues.iter().cloned().collect());
        }
        Ok(Self {
            g0: g0.clone(),
            v0: v0.clone(),
            frames,
            rates,
        })
    }

    pub fn base(&self) -> &MetricField {
        &self.g0
    }

    pub fn initial_velocity(&self) -> &Sym2Field {
        &self.v0
    }

    /// k-th time derivative of `g_t`, with `k = 0` giving `g_t` itself.
    pub fn derivative_at(&self, t: f64, k: i32) -> Sym2Field {
        Sym2Field::from_fn(self.g0.grid(), |p| {
            let f = &self.frames[p];
            let d = Mat::from_diagonal(&nalgebra::DVector::from_iterator(
                self.rates[p].len(),
                self.rates[p].iter().map(|&l| l.powi(k) * (t * l).exp()),
            ));
            let a = f * d * f.transpose();
            (&a + a.transpose()) * 0.5
        })
    }

    pub fn metric_at(&self, t: f64) -> Result<MetricField> {
        if t == 0.0 {
            return Ok(self.g0.clone());
        }
        MetricField::new(self.derivative_at(t, 0))
    }

    pub fn velocity_at(&self, t: f64) -> Sym2Field {
        self.derivative_at(t, 1)
    }
}

pub fn geodesic_at(g0: &MetricField, v0: &Sym2Field, t: f64) -> Result<MetricField> {
    Geodesic::new(g0, v0)?.metric_at(t)
}

/// A curve of metrics with known velocity.
#[derive(Debug, Clone)]
pub enum MetricCurve {
    Geodesic(Geodesic),
    /// The straight segment `g_0 + t v`.
    Line { g0: MetricField, v: Sym2Field },
}

impl MetricCurve {
    pub fn geodesic(g0: &MetricField, v0: &Sym2Field) -> Result<Self> {
        Ok(Self::Geodesic(Geodesic::new(g0, v0)?))
    }

    pub fn line(g0: &MetricField, v: &Sym2Field) -> Result<Self> {
        check(g0, v)?;
        Ok(Self::Line {
            g0: g0.clone(),
            v: v.clone(),
        })
    }

    pub fn base(&self) -> &MetricField {
        match self {
            Self::Geodesic(geo) => geo.base(),
            Self::Line { g0, .. } => g0,
        }
    }

    pub fn metric_at(&self, t: f64) -> Result<MetricField> {
        let out = match self {
            Self::Geodesic(geo) => geo.metric_at(t),
            Self::Line { g0, v } => MetricField::new(g0.as_sym2().axpy(t, v)?),
        };
        out.map_err(|e| match e {
            Error::NotPositiveDefinite { .. } => Error::LeftCone(t),
            other => other,
        })
    }

    pub fn velocity_at(&self, t: f64) -> Sym2Field {
        match self {
            Self::Geodesic(geo) => geo.velocity_at(t),
            Self::Line { v, .. } => v.clone(),
        }
    }
}

/// `d_G(g_0, g_1) = [int Tr(log(g_0^{-1} g_1))^2 Omega]^{1/2}`.
///
/// Pointwise, `g_0` and `g_1` are joined by the unique geodesic
/// `g_0 exp(t log(g_0^{-1} g_1))` of the positive cone, so the formula applies
/// to arbitrary pairs, not only to pairs on a common ray.
pub fn distance_g(g0: &MetricField, g1: &MetricField, omega: &VolumeForm) -> Result<f64> {
    if g0.grid() != g1.grid() || g0.grid() != omega.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = g0.grid();
    let mut sq = Vec::with_capacity(grid.len());
    for p in 0..grid.len() {
        let (_, si) = spd_sqrt(&g0.at(p))?;
        let mut c = &si * g1.at(p) * &si;
        c = (&c + c.transpose()) * 0.5;
        let eig = SymmetricEigen::new(c);
        sq.push(eig.eigenvalues.iter().map(|l| l.ln().powi(2)).sum::<f64>());
    }
    Ok(integrate_raw(grid, &sq, omega.density()).sqrt())
}

/// G-length of a curve over `[t0, t1]` by composite Simpson quadrature.
pub fn curve_length(
    curve: &MetricCurve,
    omega: &VolumeForm,
    t0: f64,
    t1: f64,
    panels: usize,
) -> Result<f64> {
    let panels = panels.max(1) * 2;
    let h = (t1 - t0) / panels as f64;
    let mut acc = 0.0;
    for k in 0..=panels {
        let t = t0 + k as f64 * h;
        let g = curve.metric_at(t)?;
        let v = curve.velocity_at(t);
        let speed = big_g_inner(&g, &v, &v, omega)?.sqrt();
        let w = if k == 0 || k == panels {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * speed;
    }
    Ok(acc * h / 3.0)
}

/// `R_G(u, v) w = -1/4 g [[u*, v*], w*]`.
pub fn curvature_g(g: &MetricField, u: &Sym2Field, v: &Sym2Field, w: &Sym2Field) -> Result<Sym2Field> {
    check(g, u)?;
    check(g, v)?;
    check(g, w)?;
    Ok(Sym2Field::from_fn(g.grid(), |p| {
        let gi = g.inv_at(p);
        let (a, b, c) = (&gi * u.at(p), &gi * v.at(p), &gi * w.at(p));
        let ab = &a * &b - &b * &a;
        let x = g.at(p) * (&ab * &c - &c * &ab) * -0.25;
        (&x + x.transpose()) * 0.5
    }))
}

/// `sigma_G(u, v) = -1/4 int |[u*, v*]|^2_g Omega`.
pub fn sectional_g(g: &MetricField, u: &Sym2Field, v: &Sym2Field, omega: &VolumeForm) -> Result<f64> {
    let sq = commutator_norm_sq(g, u, v)?;
    Ok(-0.25 * integrate_raw(g.grid(), &sq, omega.density()))
}

/// Pointwise `|[u*, v*]|^2_g = Tr(X X^T_g)`.
pub fn commutator_norm_sq(g: &MetricField, u: &Sym2Field, v: &Sym2Field) -> Result<Vec<f64>> {
    check(g, u)?;
    check(g, v)?;
    Ok((0..g.grid().len())
        .map(|p| {
            let gi = g.inv_at(p);
            let (a, b) = (&gi * u.at(p), &gi * v.at(p));
            let x = &a * &b - &b * &a;
            (&x * &gi * x.transpose() * g.at(p)).trace()
        })
        .collect())
}
