//! Seeded generators of smooth test data: metrics, volume forms, directions,
//! and the Kahler potential families on flat complex tori.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::{band_limited_field, PeriodicGrid, ScalarField, VolumeForm};
use crate::tensor::{
    project_alternating, project_symmetric, EndField, Mat, MetricField, Sym2Field, TensorField,
    TensorKind,
};

/// Deterministic source of sub-seeds derived from one scenario seed, plus the
/// highest Fourier mode used by the generators drawing from it.
#[derive(Debug, Clone)]
pub struct SeedStream {
    rng: ChaCha8Rng,
    max_freq: Option<usize>,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            max_freq: None,
        }
    }

    /// Overrides [`default_max_freq`] for every field generated from this stream.
    pub fn with_max_freq(mut self, max_freq: usize) -> Self {
        self.max_freq = Some(max_freq);
        self
    }

    pub fn max_freq(&self, grid: PeriodicGrid) -> usize {
        self.max_freq.unwrap_or_else(|| default_max_freq(grid))
    }

    pub fn next_seed(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform sample in `[-1, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }
}

/// Highest mode used by the generators: at most `N/4` so that products of two
/// generated fields stay below the Nyquist mode.
pub fn default_max_freq(grid: PeriodicGrid) -> usize {
    (grid.points_per_axis() / 4).clamp(1, 2)
}

pub fn smooth_scalar(grid: PeriodicGrid, seeds: &mut SeedStream, amplitude: f64) -> Result<ScalarField> {
    let k = seeds.max_freq(grid);
    band_limited_field(grid, seeds.next_seed(), k, amplitude)
}

pub fn random_sym2(grid: PeriodicGrid, seeds: &mut SeedStream, amplitude: f64) -> Result<Sym2Field> {
    let m = grid.dim();
    let mut fields = Vec::new();
    for _ in 0..m * (m + 1) / 2 {
        fields.push(smooth_scalar(grid, seeds, amplitude)?);
    }
    let mut it = fields.into_iter();
    let mut table = vec![vec![None; m]; m];
    for (i, row) in table.iter_mut().enumerate() {
        for slot in row.iter_mut().skip(i) {
            *slot = it.next();
        }
    }
    Sym2Field::from_components(grid, |i, j| table[i][j].clone().expect("filled above"))
}

/// `I + h` with `h` a random symmetric field of entrywise size `amplitude`.
/// Positive definite whenever `m * amplitude < 1`.
pub fn random_metric(grid: PeriodicGrid, seeds: &mut SeedStream, amplitude: f64) -> Result<MetricField> {
    let h = random_sym2(grid, seeds, amplitude)?;
    MetricField::new(Sym2Field::identity(grid).add(&h)?)
}

/// `Omega = e^u dx` with `u` band-limited of size `amplitude`.
pub fn random_volume(grid: PeriodicGrid, seeds: &mut SeedStream, amplitude: f64) -> Result<VolumeForm> {
    Ok(VolumeForm::from_log_density(&smooth_scalar(grid, seeds, amplitude)?))
}

/// Random covariant tensor with band-limited components.
pub fn random_tensor(
    grid: PeriodicGrid,
    rank: usize,
    seeds: &mut SeedStream,
    amplitude: f64,
) -> Result<TensorField> {
    let n = grid.dim().pow(rank as u32);
    let mut comps = Vec::with_capacity(n);
    for _ in 0..n {
        comps.push(smooth_scalar(grid, seeds, amplitude)?.into_values());
    }
    Ok(TensorField::from_comps(grid, rank, comps))
}

/// Random tensor projected onto the alternating or symmetric subspace.
pub fn random_tensor_of_kind(
    grid: PeriodicGrid,
    rank: usize,
    kind: TensorKind,
    seeds: &mut SeedStream,
    amplitude: f64,
) -> Result<TensorField> {
    let t = random_tensor(grid, rank, seeds, amplitude)?;
    if rank < 2 {
        return Ok(t);
    }
    let m = grid.dim();
    let fact = (1..=rank).product::<usize>() as f64;
    let mut err = None;
    let out = TensorField::from_points(grid, rank, |p, out| {
        let proj = match kind {
            TensorKind::Alternating => project_alternating(m, rank, &t.at(p)),
            TensorKind::Symmetric => project_symmetric(m, rank, &t.at(p)),
        };
        match proj {
            Ok(v) => out.iter_mut().zip(v).for_each(|(o, x)| *o = x / fact),
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// A seeded `(g, Omega, v)` triple on the torus.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub g: MetricField,
    pub omega: VolumeForm,
    pub v: Sym2Field,
}

impl Scenario {
    /// Band-limited data with metric perturbation 0.1, log-density 0.2 and
    /// direction 0.5.
    pub fn generic(grid: PeriodicGrid, seed: u64) -> Result<Self> {
        Self::with_amplitudes(grid, seed, [0.1, 0.2, 0.5])
    }

    /// Amplitudes of the metric perturbation, the log-density and the direction.
    pub fn with_amplitudes(grid: PeriodicGrid, seed: u64, amplitudes: [f64; 3]) -> Result<Self> {
        Self::from_stream(grid, &mut SeedStream::new(seed), amplitudes)
    }

    pub fn from_stream(grid: PeriodicGrid, seeds: &mut SeedStream, amplitudes: [f64; 3]) -> Result<Self> {
        Ok(Self {
            g: random_metric(grid, seeds, amplitudes[0])?,
            omega: random_volume(grid, seeds, amplitudes[1])?,
            v: random_sym2(grid, seeds, amplitudes[2])?,
        })
    }
}

/// Standard complex structure on `R^{2n}` with coordinates `(x_1, y_1, .., x_n, y_n)`:
/// `J d/dx_k = d/dy_k`.
pub fn standard_j_matrix(m: usize) -> Mat {
    let mut j = Mat::zeros(m, m);
    for k in 0..m / 2 {
        j[(2 * k + 1, 2 * k)] = 1.0;
        j[(2 * k, 2 * k + 1)] = -1.0;
    }
    j
}

/// Flat Hessian matrix field `d_i d_j psi`.
pub fn flat_hessian(psi: &ScalarField) -> Sym2Field {
    let grid = psi.grid();
    let m = grid.dim();
    let d: Vec<Vec<f64>> = (0..m)
        .map(|a| crate::grid::partial_raw(grid, psi.values(), a))
        .collect();
    let mut dd = vec![Vec::new(); m * m];
    for i in 0..m {
        for j in i..m {
            dd[i * m + j] = crate::grid::partial_raw(grid, &d[i], j);
        }
    }
    Sym2Field::from_fn(grid, |p| {
        Mat::from_fn(m, m, |i, j| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            dd[a * m + b][p]
        })
    })
}

/// J-invariant part `1/2 (h + J^t h J)` of a symmetric field, for constant `J`.
pub fn j_invariant_part(h: &Sym2Field, j: &Mat) -> Sym2Field {
    Sym2Field::from_fn(h.grid(), |p| {
        let a = h.at(p);
        (&a + j.transpose() * &a * j) * 0.5
    })
}

/// J-anti-invariant part `1/2 (h - J^t h J)`, for constant `J`.
pub fn j_anti_invariant_part(h: &Sym2Field, j: &Mat) -> Sym2Field {
    Sym2Field::from_fn(h.grid(), |p| {
        let a = h.at(p);
        (&a - j.transpose() * &a * j) * 0.5
    })
}

/// The symmetric form of `i d dbar psi` for the constant structure `J`: the
/// J-invariant part of the flat Hessian. Its 2-form `v J` is closed.
pub fn ddbar_direction(psi: &ScalarField, j: &Mat) -> Sym2Field {
    j_invariant_part(&flat_hessian(psi), j)
}

/// Kahler metric `g_0 + i d dbar phi` on the flat complex torus.
pub fn potential_metric(phi: &ScalarField, j: &Mat) -> Result<MetricField> {
    let grid = phi.grid();
    MetricField::new(Sym2Field::identity(grid).add(&ddbar_direction(phi, j))?)
}

/// Seeded potential whose flat Hessian has sup norm `hessian_size`, so that
/// [`potential_metric`] stays within that distance of the flat metric.
pub fn kahler_potential(grid: PeriodicGrid, seeds: &mut SeedStream, hessian_size: f64) -> Result<ScalarField> {
    let phi = smooth_scalar(grid, seeds, 1.0)?;
    let size = flat_hessian(&phi).max_abs();
    Ok(phi.scale(hessian_size / size))
}

/// Standard complex structure as a constant field.
pub fn standard_j(grid: PeriodicGrid) -> EndField {
    EndField::constant(grid, &standard_j_matrix(grid.dim()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn seed_stream_is_deterministic() {
        let mut a = SeedStream::new(3);
        let mut b = SeedStream::new(3);
        assert_eq!(a.next_seed(), b.next_seed());
        let u = a.uniform();
        assert!((-1.0..1.0).contains(&u));
    }

    #[test]
    fn generated_metrics_are_metrics() {
        let grid = make_grid(2, 16).unwrap();
        for seed in 0..5 {
            let s = Scenario::generic(grid, seed).unwrap();
            assert_eq!(s.g.grid(), grid);
            assert!(s.omega.density().iter().all(|&d| d > 0.0));
        }
    }

    #[test]
    fn standard_j_squares_to_minus_one() {
        let j = standard_j_matrix(4);
        assert_eq!(&j * &j, -Mat::identity(4, 4));
    }
}
