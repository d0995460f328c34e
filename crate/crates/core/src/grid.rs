//! Uniform periodic lattices on the flat torus `T^m = R^m / Z^m`, spectral
//! differentiation and lattice quadrature.
//!
//! Points are ordered lexicographically with axis 0 most significant, so the
//! flat index of `(k_0, .., k_{m-1})` is `((k_0 N + k_1) N + ..) N + k_{m-1}`.

use std::cell::RefCell;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PeriodicGrid {
    dim: usize,
    n: usize,
}

impl PeriodicGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=4).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=4")));
        }
        if n % 2 != 0 || !(4..=256).contains(&n) {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and in 4..=256, got {n}"
            )));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume of one lattice cell, `spacing^m`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    /// Integer lattice index of `point` along `axis`.
    pub fn index_along(&self, point: usize, axis: usize) -> usize {
        (point / self.stride(axis)) % self.n
    }

    /// Coordinates of a lattice point in `[0, 1)^m`.
    pub fn coords(&self, point: usize) -> Vec<f64> {
        (0..self.dim)
            .map(|a| self.index_along(point, a) as f64 * self.spacing())
            .collect()
    }

    pub(crate) fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.dim {
            Err(Error::AxisOutOfRange {
                axis,
                dim: self.dim,
            })
        } else {
            Ok(())
        }
    }
}

pub fn make_grid(m: usize, n: usize) -> Result<PeriodicGrid> {
    PeriodicGrid::new(m, n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec(grid: PeriodicGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: PeriodicGrid, c: f64) -> Self {
        Self::from_vec(grid, vec![c; grid.len()])
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f` at every lattice point.
    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|p| f(&grid.coords(p))).collect();
        Self::from_vec(grid, values)
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec(self.grid, self.values.iter().map(|&x| f(x)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self::from_vec(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// A positive density `Omega = rho dx` against the coordinate measure.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeForm {
    grid: PeriodicGrid,
    density: Vec<f64>,
}

impl VolumeForm {
    pub fn new(density: ScalarField) -> Result<Self> {
        if let Some((point, &value)) = density
            .values
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v > 0.0 && v.is_finite()))
        {
            return Err(Error::NonPositiveDensity { point, value });
        }
        Ok(Self {
            grid: density.grid,
            density: density.values,
        })
    }

    /// The coordinate measure `dx`, of unit mass.
    pub fn unit(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            density: vec![1.0; grid.len()],
        }
    }

    /// `Omega = e^{s} dx`.
    pub fn from_log_density(s: &ScalarField) -> Self {
        Self {
            grid: s.grid,
            density: s.values.iter().map(|x| x.exp()).collect(),
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn density_field(&self) -> ScalarField {
        ScalarField::from_vec(self.grid, self.density.clone())
    }

    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Rescaled copy with unit total mass.
    pub fn normalized(&self) -> Self {
        let mass = self.mass();
        Self {
            grid: self.grid,
            density: self.density.iter().map(|d| d / mass).collect(),
        }
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Spectral derivative of raw lattice values along `axis`. The Nyquist mode is
/// dropped, which makes the operator real and skew-symmetric.
pub(crate) fn partial_raw(grid: PeriodicGrid, values: &[f64], axis: usize) -> Vec<f64> {
    let n = grid.n;
    let stride = grid.stride(axis);
    let lines = grid.len() / n;
    let line_starts = (0..grid.len()).filter(|&p| grid.index_along(p, axis) == 0);

    let mut buf = Vec::with_capacity(grid.len());
    let mut starts = Vec::with_capacity(lines);
    for s in line_starts {
        starts.push(s);
        buf.extend((0..n).map(|k| Complex64::new(values[s + k * stride], 0.0)));
    }

    let (fwd, inv) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    });
    fwd.process(&mut buf);
    let half = n / 2;
    let norm = 2.0 * PI / n as f64;
    for line in buf.chunks_mut(n) {
        for (k, c) in line.iter_mut().enumerate() {
            let freq = if k < half {
                k as f64
            } else if k == half {
                0.0
            } else {
                k as f64 - n as f64
            };
            *c = Complex64::new(-c.im, c.re) * (freq * norm);
        }
    }
    inv.process(&mut buf);

    let mut out = vec![0.0; grid.len()];
    for (line, &s) in buf.chunks(n).zip(&starts) {
        for (k, c) in line.iter().enumerate() {
            out[s + k * stride] = c.re;
        }
    }
    out
}

pub fn spectral_partial(s: &ScalarField, axis: usize) -> Result<ScalarField> {
    s.grid.check_axis(axis)?;
    Ok(ScalarField::from_vec(
        s.grid,
        partial_raw(s.grid, &s.values, axis),
    ))
}

/// Lattice quadrature `sum s rho h^m`, accumulated in point order.
pub fn integrate(s: &ScalarField, vol: &VolumeForm) -> Result<f64> {
    if s.grid != vol.grid {
        return Err(Error::GridMismatch);
    }
    Ok(integrate_raw(s.grid, &s.values, &vol.density))
}

pub(crate) fn integrate_raw(grid: PeriodicGrid, values: &[f64], density: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (v, d) in values.iter().zip(density) {
        acc += v * d;
    }
    acc * grid.cell_volume()
}

/// Seeded real trigonometric polynomial with all modes `|k|_inf <= max_freq`,
/// scaled so its maximum modulus on the lattice equals `amplitude`.
pub fn band_limited_field(
    grid: PeriodicGrid,
    seed: u64,
    max_freq: usize,
    amplitude: f64,
) -> Result<ScalarField> {
    let half = grid.n / 2;
    if max_freq >= half {
        return Err(Error::FrequencyTooHigh { max_freq, half });
    }
    if amplitude == 0.0 {
        return Ok(ScalarField::zeros(grid));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes = half_space_modes(grid.dim, max_freq as i64);
    let coeffs: Vec<(f64, f64)> = modes
        .iter()
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();

    let mut values = vec![0.0; grid.len()];
    for (p, out) in values.iter_mut().enumerate() {
        let x = grid.coords(p);
        let mut acc = 0.0;
        for (k, (a, b)) in modes.iter().zip(&coeffs) {
            let phase: f64 = 2.0 * PI * k.iter().zip(&x).map(|(&ki, xi)| ki as f64 * xi).sum::<f64>();
            if k.iter().all(|&ki| ki == 0) {
                acc += a;
            } else {
                acc += a * phase.cos() + b * phase.sin();
            }
        }
        *out = acc;
    }
    let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if sup > 0.0 { amplitude / sup } else { 0.0 };
    values.iter_mut().for_each(|v| *v *= scale);
    Ok(ScalarField::from_vec(grid, values))
}

/// Integer vectors in `[-k, k]^m` whose first nonzero entry is positive, plus zero.
fn half_space_modes(dim: usize, k: i64) -> Vec<Vec<i64>> {
    let side = (2 * k + 1) as usize;
    let mut out = Vec::new();
    for code in 0..side.pow(dim as u32) {
        let mut c = code;
        let mut mode = vec![0i64; dim];
        for slot in mode.iter_mut().rev() {
            *slot = (c % side) as i64 - k;
            c /= side;
        }
        match mode.iter().find(|&&x| x != 0) {
            None => out.push(mode),
            Some(&x) if x > 0 => out.push(mode),
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        let g = make_grid(2, 32).unwrap();
        assert_eq!(g.len(), 1024);
        assert_eq!(g.spacing(), 1.0 / 32.0);
        assert_eq!(make_grid(1, 4).unwrap().len(), 4);
        assert!(make_grid(2, 33).is_err());
        assert!(make_grid(5, 8).is_err());
        assert!(make_grid(1, 2).is_err());
        assert!(make_grid(1, 258).is_err());
    }

    #[test]
    fn sine_derivative() {
        let g = make_grid(2, 32).unwrap();
        let s = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin());
        let d = spectral_partial(&s, 0).unwrap();
        let err = d
            .values()
            .iter()
            .enumerate()
            .map(|(p, v)| (v - 2.0 * PI * (2.0 * PI * g.coords(p)[0]).cos()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-12, "{err}");
        assert!(spectral_partial(&s, 1).unwrap().max_abs() <= 1e-12);
        assert!(spectral_partial(&s, 2).is_err());
    }

    #[test]
    fn constant_has_zero_derivative() {
        let g = make_grid(3, 8).unwrap();
        let s = ScalarField::constant(g, 3.5);
        for a in 0..3 {
            assert_eq!(spectral_partial(&s, a).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn quadrature_examples() {
        let g = make_grid(2, 16).unwrap();
        let unit = VolumeForm::unit(g);
        assert!((integrate(&ScalarField::constant(g, 1.0), &unit).unwrap() - 1.0).abs() < 1e-15);
        let s = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin());
        assert!(integrate(&s, &unit).unwrap().abs() <= 1e-14);
        let g1 = make_grid(1, 16).unwrap();
        let s2 = ScalarField::from_fn(g1, |x| (2.0 * PI * x[0]).sin().powi(2));
        assert!((integrate(&s2, &VolumeForm::unit(g1)).unwrap() - 0.5).abs() < 1e-15);
        let other = make_grid(2, 8).unwrap();
        assert_eq!(
            integrate(&ScalarField::zeros(other), &unit),
            Err(Error::GridMismatch)
        );
    }

    #[test]
    fn band_limited_determinism_and_scaling() {
        let g = make_grid(2, 16).unwrap();
        let a = band_limited_field(g, 7, 2, 0.1).unwrap();
        let b = band_limited_field(g, 7, 2, 0.1).unwrap();
        let c = band_limited_field(g, 8, 2, 0.1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!((a.max_abs() - 0.1).abs() < 1e-15);
        assert_eq!(band_limited_field(g, 7, 2, 0.0).unwrap().max_abs(), 0.0);
        assert!(band_limited_field(g, 7, 8, 0.1).is_err());
    }

    #[test]
    fn mode_enumeration_is_a_half_space() {
        let modes = half_space_modes(2, 1);
        assert_eq!(modes.len(), 5);
        assert!(modes.contains(&vec![0, 0]));
        assert!(modes.contains(&vec![1, -1]));
        assert!(!modes.contains(&vec![-1, 1]));
    }

    #[test]
    fn negative_density_rejected() {
        let g = make_grid(1, 8).unwrap();
        assert!(VolumeForm::new(ScalarField::constant(g, -1.0)).is_err());
        assert!(VolumeForm::new(ScalarField::constant(g, 2.0)).is_ok());
    }
}
