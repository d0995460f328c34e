//! Tensor fields in the global coordinate frame and their pointwise algebra.
//!
//! Covariant tensors store covariant components; endomorphisms store `A^i_j`
//! at flat index `i * m + j`. Inner products on tensors are always the full
//! tensor-product metric with no degree-dependent factors.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, ScalarField};

pub type Mat = DMatrix<f64>;

/// Smallest admissible eigenvalue of a metric.
pub const EIG_FLOOR: f64 = 1e-10;

/// Evaluates `f(point, out)` everywhere and returns component-major storage.
pub(crate) fn collect_points(
    grid: PeriodicGrid,
    ncomps: usize,
    mut f: impl FnMut(usize, &mut [f64]),
) -> Vec<Vec<f64>> {
    let mut comps = vec![vec![0.0; grid.len()]; ncomps];
    let mut scratch = vec![0.0; ncomps];
    for p in 0..grid.len() {
        scratch.iter_mut().for_each(|x| *x = 0.0);
        f(p, &mut scratch);
        for (c, &v) in comps.iter_mut().zip(&scratch) {
            c[p] = v;
        }
    }
    comps
}

fn max_abs_comps(comps: &[Vec<f64>]) -> f64 {
    comps
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0, |m, x| m.max(x.abs()))
}

fn zip_comps(a: &[Vec<f64>], b: &[Vec<f64>], f: impl Fn(f64, f64) -> f64) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(&u, &v)| f(u, v)).collect())
        .collect()
}

fn packed(m: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * m - i * (i + 1) / 2 + j
}

/// Symmetric covariant 2-tensor field, upper triangle stored once.
#[derive(Debug, Clone, PartialEq)]
pub struct Sym2Field {
    grid: PeriodicGrid,
    comps: Vec<Vec<f64>>,
}

impl Sym2Field {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        let m = grid.dim();
        Self {
            grid,
            comps: vec![vec![0.0; grid.len()]; m * (m + 1) / 2],
        }
    }

    /// Builds the field from a pointwise matrix; only the upper triangle is read.
    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(usize) -> Mat) -> Self {
        let m = grid.dim();
        let comps = collect_points(grid, m * (m + 1) / 2, |p, out| {
            let a = f(p);
            for i in 0..m {
                for j in i..m {
                    out[packed(m, i, j)] = a[(i, j)];
                }
            }
        });
        Self { grid, comps }
    }

    pub fn constant(grid: PeriodicGrid, a: &Mat) -> Self {
        Self::from_fn(grid, |_| a.clone())
    }

    pub fn identity(grid: PeriodicGrid) -> Self {
        Self::constant(grid, &Mat::identity(grid.dim(), grid.dim()))
    }

    /// Field whose `(i, j)` component is `entry(i, j)` for `i <= j`.
    pub fn from_components(
        grid: PeriodicGrid,
        entry: impl Fn(usize, usize) -> ScalarField,
    ) -> Result<Self> {
        let m = grid.dim();
        let mut comps = vec![Vec::new(); m * (m + 1) / 2];
        for i in 0..m {
            for j in i..m {
                let s = entry(i, j);
                if s.grid() != grid {
                    return Err(Error::GridMismatch);
                }
                comps[packed(m, i, j)] = s.into_values();
            }
        }
        Ok(Self { grid, comps })
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn component(&self, i: usize, j: usize) -> &[f64] {
        &self.comps[packed(self.dim(), i, j)]
    }

    pub fn component_field(&self, i: usize, j: usize) -> ScalarField {
        ScalarField::from_vec(self.grid, self.component(i, j).to_vec())
    }

    pub fn at(&self, p: usize) -> Mat {
        let m = self.dim();
        Mat::from_fn(m, m, |i, j| self.comps[packed(m, i, j)][p])
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            comps: zip_comps(&self.comps, &other.comps, |a, b| a + b),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            comps: zip_comps(&self.comps, &other.comps, |a, b| a - b),
        })
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            comps: self
                .comps
                .iter()
                .map(|v| v.iter().map(|x| c * x).collect())
                .collect(),
        }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            comps: zip_comps(&self.comps, &other.comps, |a, b| a + c * b),
        })
    }

    /// Pointwise multiple `s * self`.
    pub fn mul_scalar(&self, s: &ScalarField) -> Result<Self> {
        if s.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: self.grid,
            comps: self
                .comps
                .iter()
                .map(|c| c.iter().zip(s.values()).map(|(a, b)| a * b).collect())
                .collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        max_abs_comps(&self.comps)
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// A symmetric 2-tensor field that is positive definite at every point, with
/// its inverse and volume density cached.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    g: Sym2Field,
    inv: Sym2Field,
    sqrt_det: Vec<f64>,
}

impl MetricField {
    pub fn new(g: Sym2Field) -> Result<Self> {
        let grid = g.grid;
        let m = grid.dim();
        let mut sqrt_det = vec![0.0; grid.len()];
        let mut invs = Vec::with_capacity(grid.len());
        for (p, sd) in sqrt_det.iter_mut().enumerate() {
            let a = g.at(p);
            let eig = SymmetricEigen::new(a.clone());
            let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            if !(min_eig > EIG_FLOOR) {
                return Err(Error::NotPositiveDefinite { point: p, min_eig });
            }
            let chol = a.cholesky().ok_or(Error::NotPositiveDefinite {
                point: p,
                min_eig,
            })?;
            *sd = chol.l().diagonal().iter().product::<f64>();
            invs.push(chol.inverse());
        }
        let inv = Sym2Field::from_fn(grid, |p| {
            let a = &invs[p];
            Mat::from_fn(m, m, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
        });
        Ok(Self { g, inv, sqrt_det })
    }

    pub fn flat(grid: PeriodicGrid) -> Self {
        Self::new(Sym2Field::identity(grid)).expect("identity is positive definite")
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.g.grid
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn as_sym2(&self) -> &Sym2Field {
        &self.g
    }

    pub fn inverse(&self) -> &Sym2Field {
        &self.inv
    }

    pub fn at(&self, p: usize) -> Mat {
        self.g.at(p)
    }

    pub fn inv_at(&self, p: usize) -> Mat {
        self.inv.at(p)
    }

    /// `sqrt(det g)`, the density of `dV_g` against `dx`.
    pub fn sqrt_det(&self) -> ScalarField {
        ScalarField::from_vec(self.grid(), self.sqrt_det.clone())
    }

    pub fn sqrt_det_raw(&self) -> &[f64] {
        &self.sqrt_det
    }

    pub fn volume_form(&self) -> crate::grid::VolumeForm {
        crate::grid::VolumeForm::new(self.sqrt_det()).expect("metric volume is positive")
    }
}

/// Endomorphism field `A^i_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct EndField {
    grid: PeriodicGrid,
    comps: Vec<Vec<f64>>,
}

impl EndField {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        let m = grid.dim();
        Self {
            grid,
            comps: vec![vec![0.0; grid.len()]; m * m],
        }
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(usize) -> Mat) -> Self {
        let m = grid.dim();
        let comps = collect_points(grid, m * m, |p, out| {
            let a = f(p);
            for i in 0..m {
                for j in 0..m {
                    out[i * m + j] = a[(i, j)];
                }
            }
        });
        Self { grid, comps }
    }

    pub fn constant(grid: PeriodicGrid, a: &Mat) -> Self {
        Self::from_fn(grid, |_| a.clone())
    }

    pub fn identity(grid: PeriodicGrid) -> Self {
        Self::constant(grid, &Mat::identity(grid.dim(), grid.dim()))
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn component(&self, i: usize, j: usize) -> &[f64] {
        &self.comps[i * self.dim() + j]
    }

    pub fn at(&self, p: usize) -> Mat {
        let m = self.dim();
        Mat::from_fn(m, m, |i, j| self.comps[i * m + j][p])
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: self.grid,
            comps: zip_comps(&self.comps, &other.comps, |a, b| a + b),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: self.grid,
            comps: zip_comps(&self.comps, &other.comps, |a, b| a - b),
        })
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            comps: self
                .comps
                .iter()
                .map(|v| v.iter().map(|x| c * x).collect())
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        max_abs_comps(&self.comps)
    }
}

/// Covariant tensor field of rank `rank`, all `m^rank` components stored.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    grid: PeriodicGrid,
    rank: usize,
    comps: Vec<Vec<f64>>,
}

/// Covariant 3-tensor field.
pub type Ten3Field = TensorField;

impl TensorField {
    pub fn zeros(grid: PeriodicGrid, rank: usize) -> Self {
        Self {
            grid,
            rank,
            comps: vec![vec![0.0; grid.len()]; grid.dim().pow(rank as u32)],
        }
    }

    /// Builds from per-point component arrays of length `m^rank`.
    pub fn from_points(
        grid: PeriodicGrid,
        rank: usize,
        f: impl FnMut(usize, &mut [f64]),
    ) -> Self {
        let comps = collect_points(grid, grid.dim().pow(rank as u32), f);
        Self { grid, rank, comps }
    }

    pub(crate) fn from_comps(grid: PeriodicGrid, rank: usize, comps: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(comps.len(), grid.dim().pow(rank as u32));
        Self { grid, rank, comps }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.dim() + i)
    }

    pub fn component(&self, idx: &[usize]) -> &[f64] {
        &self.comps[self.flat_index(idx)]
    }

    pub(crate) fn comps(&self) -> &[Vec<f64>] {
        &self.comps
    }

    /// Components at one point, row-major in the slot indices.
    pub fn at(&self, p: usize) -> Vec<f64> {
        self.comps.iter().map(|c| c[p]).collect()
    }

    /// `out(i_0, .., i_{r-1}) = self(i_{perm[0]}, .., i_{perm[r-1]})`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.rank);
        let m = self.dim();
        let n = self.comps.len();
        let comps = (0..n)
            .map(|flat| {
                let idx = unflatten(m, self.rank, flat);
                let src: Vec<usize> = perm.iter().map(|&s| idx[s]).collect();
                self.comps[self.flat_index(&src)].clone()
            })
            .collect();
        Self::from_comps(self.grid, self.rank, comps)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_like(other)?;
        Ok(Self::from_comps(
            self.grid,
            self.rank,
            zip_comps(&self.comps, &other.comps, |a, b| a + b),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_like(other)?;
        Ok(Self::from_comps(
            self.grid,
            self.rank,
            zip_comps(&self.comps, &other.comps, |a, b| a - b),
        ))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_comps(
            self.grid,
            self.rank,
            self.comps
                .iter()
                .map(|v| v.iter().map(|x| c * x).collect())
                .collect(),
        )
    }

    pub fn max_abs(&self) -> f64 {
        max_abs_comps(&self.comps)
    }

    fn check_like(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.rank != other.rank {
            return Err(Error::UnsupportedValence(other.rank));
        }
        Ok(())
    }

    /// Symmetric 2-tensor from a rank-2 field, averaging the two orderings.
    pub fn symmetric_part(&self) -> Result<Sym2Field> {
        if self.rank != 2 {
            return Err(Error::UnsupportedValence(self.rank));
        }
        let m = self.dim();
        Ok(Sym2Field::from_fn(self.grid, |p| {
            Mat::from_fn(m, m, |i, j| {
                0.5 * (self.comps[i * m + j][p] + self.comps[j * m + i][p])
            })
        }))
    }
}

impl From<&Sym2Field> for TensorField {
    fn from(v: &Sym2Field) -> Self {
        let m = v.dim();
        let comps = (0..m * m)
            .map(|f| v.component(f / m, f % m).to_vec())
            .collect();
        Self::from_comps(v.grid, 2, comps)
    }
}

/// Tensor field with one contravariant and two covariant slots, read as a
/// vector-valued bilinear map: `X(d_a, d_b) = X^i_{ab} d_i`, stored at
/// `i * m^2 + a * m + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor12Field {
    grid: PeriodicGrid,
    comps: Vec<Vec<f64>>,
}

impl Tensor12Field {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        let m = grid.dim();
        Self {
            grid,
            comps: vec![vec![0.0; grid.len()]; m * m * m],
        }
    }

    pub fn from_points(grid: PeriodicGrid, f: impl FnMut(usize, &mut [f64])) -> Self {
        let m = grid.dim();
        Self {
            grid,
            comps: collect_points(grid, m * m * m, f),
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn component(&self, i: usize, a: usize, b: usize) -> &[f64] {
        let m = self.dim();
        &self.comps[i * m * m + a * m + b]
    }

    pub fn at(&self, p: usize) -> Vec<f64> {
        self.comps.iter().map(|c| c[p]).collect()
    }

    /// Swaps the two form slots: `out(a, b) = self(b, a)`.
    pub fn swapped(&self) -> Self {
        let m = self.dim();
        let comps = (0..m * m * m)
            .map(|f| {
                let (i, a, b) = (f / (m * m), (f / m) % m, f % m);
                self.comps[i * m * m + b * m + a].clone()
            })
            .collect();
        Self {
            grid: self.grid,
            comps,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: self.grid,
            comps: zip_comps(&self.comps, &other.comps, |a, b| a + b),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: self.grid,
            comps: zip_comps(&self.comps, &other.comps, |a, b| a - b),
        })
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            comps: self
                .comps
                .iter()
                .map(|v| v.iter().map(|x| c * x).collect())
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        max_abs_comps(&self.comps)
    }
}

pub(crate) fn unflatten(m: usize, rank: usize, mut flat: usize) -> Vec<usize> {
    let mut idx = vec![0; rank];
    for slot in idx.iter_mut().rev() {
        *slot = flat % m;
        flat /= m;
    }
    idx
}

fn check_metric_grid(g: &MetricField, grid: PeriodicGrid) -> Result<()> {
    if g.grid() == grid {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// `v* = g^{-1} v`.
pub fn endomorphism_of(v: &Sym2Field, g: &MetricField) -> Result<EndField> {
    check_metric_grid(g, v.grid)?;
    Ok(EndField::from_fn(v.grid, |p| g.inv_at(p) * v.at(p)))
}

/// Lowers an endomorphism back to a bilinear form, `(g A)_{ij} = g_{ik} A^k_j`,
/// symmetrized. Exact inverse of [`endomorphism_of`] on g-symmetric `A`.
pub fn lower_symmetric(a: &EndField, g: &MetricField) -> Result<Sym2Field> {
    check_metric_grid(g, a.grid)?;
    Ok(Sym2Field::from_fn(a.grid, |p| {
        let b = g.at(p) * a.at(p);
        (&b + b.transpose()) * 0.5
    }))
}

/// The g-adjoint `A^T_g = g^{-1} A^t g`.
pub fn g_transpose(a: &EndField, g: &MetricField) -> Result<EndField> {
    check_metric_grid(g, a.grid)?;
    Ok(EndField::from_fn(a.grid, |p| {
        g.inv_at(p) * a.at(p).transpose() * g.at(p)
    }))
}

/// `<u, v>_g = Tr(u* v*)`.
pub fn inner_sym2(u: &Sym2Field, v: &Sym2Field, g: &MetricField) -> Result<ScalarField> {
    check_metric_grid(g, u.grid)?;
    check_metric_grid(g, v.grid)?;
    let m = g.dim();
    let vals = (0..u.grid.len())
        .map(|p| {
            let gi = g.inv_at(p);
            let a = &gi * u.at(p);
            let b = &gi * v.at(p);
            let mut t = 0.0;
            for i in 0..m {
                for j in 0..m {
                    t += a[(i, j)] * b[(j, i)];
                }
            }
            t
        })
        .collect();
    Ok(ScalarField::from_vec(u.grid, vals))
}

pub fn trace_g(v: &Sym2Field, g: &MetricField) -> Result<ScalarField> {
    check_metric_grid(g, v.grid)?;
    let vals = (0..v.grid.len())
        .map(|p| (g.inv_at(p) * v.at(p)).trace())
        .collect();
    Ok(ScalarField::from_vec(v.grid, vals))
}

/// Pointwise `|A|^2_g = Tr(A A^T_g)` of an endomorphism field.
pub fn end_norm_sq(a: &EndField, g: &MetricField) -> Result<ScalarField> {
    check_metric_grid(g, a.grid)?;
    let vals = (0..a.grid.len())
        .map(|p| {
            let x = a.at(p);
            (&x * g.inv_at(p) * x.transpose() * g.at(p)).trace()
        })
        .collect();
    Ok(ScalarField::from_vec(a.grid, vals))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    Alternating,
    Symmetric,
}

/// All permutations of `0..p` with their signs.
pub fn permutations(p: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..rest.len() {
            let x = rest.remove(k);
            prefix.push(x);
            rec(prefix, rest, out);
            prefix.pop();
            rest.insert(k, x);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..p).collect(), &mut out);
    out.into_iter()
        .map(|perm| {
            let mut inversions = 0;
            for i in 0..p {
                for j in i + 1..p {
                    if perm[i] > perm[j] {
                        inversions += 1;
                    }
                }
            }
            let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
            (perm, sign)
        })
        .collect()
}

fn project(m: usize, p: usize, t: &[f64], kind: TensorKind) -> Result<Vec<f64>> {
    if !(2..=3).contains(&p) {
        return Err(Error::UnsupportedValence(p));
    }
    assert_eq!(t.len(), m.pow(p as u32));
    let perms = permutations(p);
    let flat = |idx: &[usize]| idx.iter().fold(0, |a, &i| a * m + i);
    Ok((0..t.len())
        .map(|f| {
            let idx = unflatten(m, p, f);
            perms
                .iter()
                .map(|(perm, sign)| {
                    let src: Vec<usize> = perm.iter().map(|&s| idx[s]).collect();
                    let w = match kind {
                        TensorKind::Alternating => *sign,
                        TensorKind::Symmetric => 1.0,
                    };
                    w * t[flat(&src)]
                })
                .sum()
        })
        .collect())
}

/// `A(T)(v_1, .., v_p) = sum_sigma sign(sigma) T(v_sigma(1), ..)`, unnormalized.
pub fn project_alternating(m: usize, p: usize, t: &[f64]) -> Result<Vec<f64>> {
    project(m, p, t, TensorKind::Alternating)
}

/// `S(T)(v_1, .., v_p) = sum_sigma T(v_sigma(1), ..)`, unnormalized.
pub fn project_symmetric(m: usize, p: usize, t: &[f64]) -> Result<Vec<f64>> {
    project(m, p, t, TensorKind::Symmetric)
}

/// Raises every slot of a covariant rank-`p` tensor with `ginv`.
pub fn raise_all(m: usize, p: usize, t: &[f64], ginv: &Mat) -> Vec<f64> {
    let mut cur = t.to_vec();
    let n = cur.len();
    for slot in 0..p {
        let stride = m.pow((p - 1 - slot) as u32);
        let mut next = vec![0.0; n];
        for (f, out) in next.iter_mut().enumerate() {
            let i = (f / stride) % m;
            let base = f - i * stride;
            *out = (0..m).map(|k| ginv[(i, k)] * cur[base + k * stride]).sum();
        }
        cur = next;
    }
    cur
}

/// Full tensor-product inner product of two covariant rank-`p` tensors.
pub fn tensor_inner(m: usize, p: usize, a: &[f64], b: &[f64], ginv: &Mat) -> f64 {
    raise_all(m, p, a, ginv)
        .iter()
        .zip(b)
        .map(|(x, y)| x * y)
        .sum()
}

/// Distance of `t` from its projection onto the given symmetry class.
pub fn kind_residual(m: usize, p: usize, t: &[f64], kind: TensorKind) -> Result<f64> {
    let proj = project(m, p, t, kind)?;
    let fact: f64 = (1..=p).product::<usize>() as f64;
    Ok(proj
        .iter()
        .zip(t)
        .fold(0.0, |acc: f64, (q, x)| acc.max((q / fact - x).abs())))
}

/// Metric induced on alternating or symmetric `p`-tensors, which is the
/// restriction of the tensor-product metric.
pub fn induced_inner_p(
    m: usize,
    p: usize,
    a: &[f64],
    b: &[f64],
    ginv: &Mat,
    kind: TensorKind,
) -> Result<f64> {
    let expected = match kind {
        TensorKind::Alternating => "alternating",
        TensorKind::Symmetric => "symmetric",
    };
    for t in [a, b] {
        let scale = t.iter().fold(1.0f64, |s, x| s.max(x.abs()));
        let residual = kind_residual(m, p, t, kind)?;
        if residual > 1e-12 * scale {
            return Err(Error::KindMismatch { expected, residual });
        }
    }
    Ok(tensor_inner(m, p, a, b, ginv))
}

/// `a_1 ^ .. ^ a_p` (alternating) or `a_1 . .. . a_p` (symmetric) of covectors,
/// as the unnormalized projection of `a_1 (x) .. (x) a_p`.
pub fn decomposable(m: usize, covectors: &[Vec<f64>], kind: TensorKind) -> Result<Vec<f64>> {
    let p = covectors.len();
    let prod: Vec<f64> = (0..m.pow(p as u32))
        .map(|f| {
            unflatten(m, p, f)
                .iter()
                .zip(covectors)
                .map(|(&i, c)| c[i])
                .product()
        })
        .collect();
    project(m, p, &prod, kind)
}

/// `p! det(g(a_k, b_l))` (alternating) or `p! per(g(a_k, b_l))` (symmetric).
pub fn gram_formula(a: &[Vec<f64>], b: &[Vec<f64>], ginv: &Mat, kind: TensorKind) -> f64 {
    let p = a.len();
    let gram = Mat::from_fn(p, p, |k, l| {
        let (x, y) = (&a[k], &b[l]);
        let m = x.len();
        (0..m)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| ginv[(i, j)] * x[i] * y[j])
            .sum()
    });
    let fact = (1..=p).product::<usize>() as f64;
    let sum: f64 = permutations(p)
        .iter()
        .map(|(perm, sign)| {
            let w = match kind {
                TensorKind::Alternating => *sign,
                TensorKind::Symmetric => 1.0,
            };
            w * perm.iter().enumerate().map(|(k, &l)| gram[(k, l)]).product::<f64>()
        })
        .sum();
    fact * sum
}

/// Pointwise tensor-product inner product of two covariant tensor fields.
pub fn inner_tensor(a: &TensorField, b: &TensorField, g: &MetricField) -> Result<ScalarField> {
    a.check_like(b)?;
    check_metric_grid(g, a.grid)?;
    let (m, r) = (a.dim(), a.rank);
    let vals = (0..a.grid.len())
        .map(|p| tensor_inner(m, r, &a.at(p), &b.at(p), &g.inv_at(p)))
        .collect();
    Ok(ScalarField::from_vec(a.grid, vals))
}

/// `<X, Y> = g_ij g^{aa'} g^{bb'} X^i_ab Y^j_a'b'` pointwise.
pub fn inner_t12(x: &Tensor12Field, y: &Tensor12Field, g: &MetricField) -> Result<ScalarField> {
    if x.grid != y.grid {
        return Err(Error::GridMismatch);
    }
    check_metric_grid(g, x.grid)?;
    let m = x.dim();
    let vals = (0..x.grid.len())
        .map(|p| {
            let gi = g.inv_at(p);
            let gp = g.at(p);
            let xs = x.at(p);
            let ys = y.at(p);
            let xl = lower_first(m, &xs, &gp);
            let mut raised = vec![0.0; m * m * m];
            for (j, block) in xl.chunks(m * m).enumerate() {
                raised[j * m * m..(j + 1) * m * m].copy_from_slice(&raise_all(m, 2, block, &gi));
            }
            raised.iter().zip(&ys).map(|(a, b)| a * b).sum()
        })
        .collect();
    Ok(ScalarField::from_vec(x.grid, vals))
}

fn lower_first(m: usize, x: &[f64], g: &Mat) -> Vec<f64> {
    let mut out = vec![0.0; m * m * m];
    for j in 0..m {
        for ab in 0..m * m {
            out[j * m * m + ab] = (0..m).map(|i| g[(j, i)] * x[i * m * m + ab]).sum();
        }
    }
    out
}
