//! Levi-Civita calculus of a metric on the torus.
//!
//! Conventions:
//! * `Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)`.
//! * In `nabla T` the derivative direction is the first slot.
//! * `R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z`, stored as
//!   `R(d_i, d_j) d_k = R^l_{kij} d_l` at index `((l m + k) m + i) m + j`.
//! * `Ric(X, Y) = Tr[Z -> R(Z, X) Y]`, positive on round spheres.
//! * `nabla^* = -div`, contracting the derivative slot with the first tensor slot.

use crate::error::{Error, Result};
use crate::grid::{integrate_raw, partial_raw, PeriodicGrid, ScalarField, VolumeForm};
use crate::tensor::{
    collect_points, inner_tensor, tensor_inner, unflatten, EndField, Mat, MetricField, Sym2Field,
    Tensor12Field, TensorField, TensorKind,
};

fn partials(grid: PeriodicGrid, comps: &[Vec<f64>]) -> Vec<Vec<Vec<f64>>> {
    (0..grid.dim())
        .map(|a| comps.iter().map(|c| partial_raw(grid, c, a)).collect())
        .collect()
}

fn check_grid(a: PeriodicGrid, b: PeriodicGrid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Christoffel symbols `Gamma^k_ij` at index `(k m + i) m + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionCoeffs {
    grid: PeriodicGrid,
    gamma: Vec<Vec<f64>>,
}

impl ConnectionCoeffs {
    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn component(&self, k: usize, i: usize, j: usize) -> &[f64] {
        let m = self.grid.dim();
        &self.gamma[(k * m + i) * m + j]
    }

    /// All components at one point.
    pub fn at(&self, p: usize) -> Vec<f64> {
        self.gamma.iter().map(|c| c[p]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.gamma
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

pub fn christoffel(g: &MetricField) -> ConnectionCoeffs {
    let grid = g.grid();
    let m = grid.dim();
    // dg[l][i * m + j] = d_l g_ij
    let full: Vec<Vec<f64>> = (0..m * m)
        .map(|f| g.as_sym2().component(f / m, f % m).to_vec())
        .collect();
    let dg = partials(grid, &full);
    let gamma = collect_points(grid, m * m * m, |p, out| {
        let gi = g.inv_at(p);
        for i in 0..m {
            for j in i..m {
                let lowered: Vec<f64> = (0..m)
                    .map(|l| dg[i][j * m + l][p] + dg[j][i * m + l][p] - dg[l][i * m + j][p])
                    .collect();
                for k in 0..m {
                    let v = 0.5 * (0..m).map(|l| gi[(k, l)] * lowered[l]).sum::<f64>();
                    out[(k * m + i) * m + j] = v;
                    out[(k * m + j) * m + i] = v;
                }
            }
        }
    });
    ConnectionCoeffs { grid, gamma }
}

/// A metric together with its connection, so that repeated differential
/// operations do not recompute Christoffel symbols.
#[derive(Debug, Clone)]
pub struct Geometry {
    g: MetricField,
    conn: ConnectionCoeffs,
}

impl Geometry {
    pub fn new(g: &MetricField) -> Self {
        Self {
            conn: christoffel(g),
            g: g.clone(),
        }
    }

    pub fn metric(&self) -> &MetricField {
        &self.g
    }

    pub fn connection(&self) -> &ConnectionCoeffs {
        &self.conn
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.g.grid()
    }

    fn dim(&self) -> usize {
        self.g.dim()
    }

    /// `df` as a covariant 1-tensor.
    pub fn d(&self, f: &ScalarField) -> Result<TensorField> {
        check_grid(f.grid(), self.grid())?;
        let comps = (0..self.dim())
            .map(|a| partial_raw(self.grid(), f.values(), a))
            .collect();
        Ok(TensorField::from_comps(self.grid(), 1, comps))
    }

    /// Covariant derivative of a covariant tensor of rank at most 3.
    pub fn nabla(&self, t: &TensorField) -> Result<TensorField> {
        check_grid(t.grid(), self.grid())?;
        let r = t.rank();
        if r > 3 {
            return Err(Error::UnsupportedValence(r));
        }
        let (m, grid) = (self.dim(), self.grid());
        let dt = partials(grid, t.comps());
        let mr = m.pow(r as u32);
        let gam = &self.conn.gamma;
        let out = collect_points(grid, m * mr, |p, out| {
            for a in 0..m {
                for f in 0..mr {
                    let idx = unflatten(m, r, f);
                    let mut v = dt[a][f][p];
                    for s in 0..r {
                        let stride = m.pow((r - 1 - s) as u32);
                        let base = f - idx[s] * stride;
                        for q in 0..m {
                            v -= gam[(q * m + a) * m + idx[s]][p] * t.comps()[base + q * stride][p];
                        }
                    }
                    out[a * mr + f] = v;
                }
            }
        });
        Ok(TensorField::from_comps(grid, r + 1, out))
    }

    pub fn nabla_sym2(&self, v: &Sym2Field) -> Result<TensorField> {
        self.nabla(&TensorField::from(v))
    }

    /// `(nabla_a S)^i_b` stored as the vector-valued form `(a, b) -> nabla S(d_a, d_b)`.
    pub fn nabla_end(&self, s: &EndField) -> Result<Tensor12Field> {
        check_grid(s.grid(), self.grid())?;
        let (m, grid) = (self.dim(), self.grid());
        let comps: Vec<Vec<f64>> = (0..m * m).map(|f| s.component(f / m, f % m).to_vec()).collect();
        let ds = partials(grid, &comps);
        let gam = &self.conn.gamma;
        Ok(Tensor12Field::from_points(grid, |p, out| {
            for i in 0..m {
                for a in 0..m {
                    for b in 0..m {
                        let mut v = ds[a][i * m + b][p];
                        for q in 0..m {
                            v += gam[(i * m + a) * m + q][p] * comps[q * m + b][p];
                            v -= gam[(q * m + a) * m + b][p] * comps[i * m + q][p];
                        }
                        out[i * m * m + a * m + b] = v;
                    }
                }
            }
        }))
    }

    /// `nabla X` of a vector field as the endomorphism `xi -> nabla_xi X`.
    pub fn nabla_vector(&self, x: &[Vec<f64>]) -> Result<EndField> {
        let (m, grid) = (self.dim(), self.grid());
        if x.len() != m || x.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::GridMismatch);
        }
        let dx = partials(grid, x);
        let gam = &self.conn.gamma;
        Ok(EndField::from_fn(grid, |p| {
            Mat::from_fn(m, m, |i, a| {
                dx[a][i][p] + (0..m).map(|q| gam[(i * m + a) * m + q][p] * x[q][p]).sum::<f64>()
            })
        }))
    }

    /// Cyclic symmetrization `hat nabla v(a,b,c) = nabla v(a,b,c) + nabla v(b,a,c) + nabla v(c,a,b)`.
    pub fn hat_nabla(&self, v: &Sym2Field) -> Result<TensorField> {
        let n = self.nabla_sym2(v)?;
        n.add(&n.permuted(&[1, 0, 2]))?.add(&n.permuted(&[2, 0, 1]))
    }

    /// `D_g v = hat nabla v - 2 nabla v`.
    pub fn dee(&self, v: &Sym2Field) -> Result<TensorField> {
        let n = self.nabla_sym2(v)?;
        let hat = n.add(&n.permuted(&[1, 0, 2]))?.add(&n.permuted(&[2, 0, 1]))?;
        hat.sub(&n.scale(2.0))
    }

    pub fn curvature(&self) -> CurvaturePack {
        let (m, grid) = (self.dim(), self.grid());
        let gam = &self.conn.gamma;
        let dgam = partials(grid, gam);
        let riemann = collect_points(grid, m * m * m * m, |p, out| {
            for l in 0..m {
                for k in 0..m {
                    for i in 0..m {
                        for j in 0..m {
                            let mut v = dgam[i][(l * m + j) * m + k][p] - dgam[j][(l * m + i) * m + k][p];
                            for q in 0..m {
                                v += gam[(l * m + i) * m + q][p] * gam[(q * m + j) * m + k][p];
                                v -= gam[(l * m + j) * m + q][p] * gam[(q * m + i) * m + k][p];
                            }
                            out[((l * m + k) * m + i) * m + j] = v;
                        }
                    }
                }
            }
        });
        let ricci_full = |p: usize| {
            Mat::from_fn(m, m, |j, k| {
                (0..m).map(|i| riemann[((i * m + k) * m + i) * m + j][p]).sum()
            })
        };
        let mut asym = 0.0f64;
        for p in 0..grid.len() {
            let r = ricci_full(p);
            asym = asym.max((&r - r.transpose()).amax());
        }
        let ricci = Sym2Field::from_fn(grid, |p| {
            let r = ricci_full(p);
            (&r + r.transpose()) * 0.5
        });
        let scalar = ScalarField::from_vec(
            grid,
            (0..grid.len())
                .map(|p| (self.g.inv_at(p) * ricci.at(p)).trace())
                .collect(),
        );
        CurvaturePack {
            grid,
            riemann,
            ricci,
            scalar,
            ricci_asymmetry: asym,
        }
    }

    pub fn hessian(&self, f: &ScalarField) -> Result<Sym2Field> {
        check_grid(f.grid(), self.grid())?;
        let (m, grid) = (self.dim(), self.grid());
        let df: Vec<Vec<f64>> = (0..m).map(|a| partial_raw(grid, f.values(), a)).collect();
        let mut ddf = vec![Vec::new(); m * m];
        for i in 0..m {
            for j in i..m {
                ddf[i * m + j] = partial_raw(grid, &df[i], j);
            }
        }
        let gam = &self.conn.gamma;
        Ok(Sym2Field::from_fn(grid, |p| {
            Mat::from_fn(m, m, |i, j| {
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                ddf[a * m + b][p] - (0..m).map(|k| gam[(k * m + a) * m + b][p] * df[k][p]).sum::<f64>()
            })
        }))
    }

    pub fn laplacian(&self, f: &ScalarField) -> Result<ScalarField> {
        crate::tensor::trace_g(&self.hessian(f)?, &self.g)
    }

    /// `|df|^2_g`.
    pub fn grad_norm_sq(&self, f: &ScalarField) -> Result<ScalarField> {
        let d = self.d(f)?;
        let m = self.dim();
        Ok(ScalarField::from_vec(
            self.grid(),
            (0..self.grid().len())
                .map(|p| tensor_inner(m, 1, &d.at(p), &d.at(p), &self.g.inv_at(p)))
                .collect(),
        ))
    }

    /// Gradient vector field `g^{-1} df`.
    pub fn gradient(&self, f: &ScalarField) -> Result<Vec<Vec<f64>>> {
        let d = self.d(f)?;
        let m = self.dim();
        let grid = self.grid();
        Ok(collect_points(grid, m, |p, out| {
            let gi = self.g.inv_at(p);
            let dp = d.at(p);
            for (i, o) in out.iter_mut().enumerate() {
                *o = (0..m).map(|k| gi[(i, k)] * dp[k]).sum();
            }
        }))
    }

    /// `f = log(dV_g / Omega)`.
    pub fn log_density(&self, omega: &VolumeForm) -> Result<ScalarField> {
        log_density(&self.g, omega)
    }

    /// `Ric_g(Omega) = Ric + Hess log(dV_g / Omega)`.
    pub fn bakry_emery(&self, omega: &VolumeForm) -> Result<Sym2Field> {
        let f = self.log_density(omega)?;
        self.curvature().ricci.add(&self.hessian(&f)?)
    }

    /// Covariant divergence `(div T)_{jk} = g^{ab} (nabla T)_{abjk}` of a
    /// 3-tensor, symmetrized in `(j, k)`.
    pub fn divergence(&self, t: &TensorField) -> Result<Sym2Field> {
        if t.rank() != 3 {
            return Err(Error::UnsupportedValence(t.rank()));
        }
        let nt = self.nabla(t)?;
        let m = self.dim();
        Ok(Sym2Field::from_fn(self.grid(), |p| {
            let gi = self.g.inv_at(p);
            let x = nt.at(p);
            let raw = Mat::from_fn(m, m, |j, k| {
                let mut s = 0.0;
                for a in 0..m {
                    for b in 0..m {
                        s += gi[(a, b)] * x[((a * m + b) * m + j) * m + k];
                    }
                }
                s
            });
            (&raw + raw.transpose()) * 0.5
        }))
    }

    /// Interior product `(xi-lower T)_{jk} = g^{ab} xi_a T_{bjk}`, symmetrized.
    fn contract_first(&self, xi: &TensorField, t: &TensorField) -> Sym2Field {
        let m = self.dim();
        Sym2Field::from_fn(self.grid(), |p| {
            let gi = self.g.inv_at(p);
            let x = xi.at(p);
            let tp = t.at(p);
            let raw = Mat::from_fn(m, m, |j, k| {
                let mut s = 0.0;
                for a in 0..m {
                    for b in 0..m {
                        s += gi[(a, b)] * x[a] * tp[(b * m + j) * m + k];
                    }
                }
                s
            });
            (&raw + raw.transpose()) * 0.5
        })
    }

    /// Weighted divergence `e^f div(e^{-f} T)` with `f = log(dV_g/Omega)`.
    pub fn omega_divergence(&self, t: &TensorField, omega: &VolumeForm) -> Result<Sym2Field> {
        let f = self.log_density(omega)?;
        let df = self.d(&f)?;
        self.divergence(t)?.sub(&self.contract_first(&df, t))
    }

    /// Formal adjoint of `nabla : S^2 -> T* (x) S^2` for `int <.,.>_g Omega`,
    /// evaluated in divergence form so that the lattice pairing is exact.
    pub fn omega_adjoint(&self, t: &TensorField, omega: &VolumeForm) -> Result<Sym2Field> {
        if t.rank() != 3 {
            return Err(Error::UnsupportedValence(t.rank()));
        }
        check_grid(omega.grid(), self.grid())?;
        let (m, grid) = (self.dim(), self.grid());
        let rho = omega.density();
        let up = collect_points(grid, m * m * m, |p, out| {
            let r = crate::tensor::raise_all(m, 3, &t.at(p), &self.g.inv_at(p));
            out.copy_from_slice(&r);
        });
        // rho T^{ajk}, differentiated along a
        let flux: Vec<Vec<f64>> = up
            .iter()
            .map(|c| c.iter().zip(rho).map(|(x, r)| x * r).collect())
            .collect();
        let gam = &self.conn.gamma;
        let div: Vec<Vec<f64>> = (0..m * m)
            .map(|jk| {
                let mut acc = vec![0.0; grid.len()];
                for a in 0..m {
                    let d = partial_raw(grid, &flux[a * m * m + jk], a);
                    acc.iter_mut().zip(&d).for_each(|(s, x)| *s += x);
                }
                acc
            })
            .collect();
        Ok(Sym2Field::from_fn(grid, |p| {
            let z = Mat::from_fn(m, m, |j, k| {
                let mut v = -div[j * m + k][p] / rho[p];
                for a in 0..m {
                    for q in 0..m {
                        v -= gam[(j * m + a) * m + q][p] * up[(a * m + q) * m + k][p];
                        v -= gam[(k * m + a) * m + q][p] * up[(a * m + j) * m + q][p];
                    }
                }
                v
            });
            let zs = (&z + z.transpose()) * 0.5;
            let gp = self.g.at(p);
            &gp * zs * &gp
        }))
    }

    /// Adjoint of `hat nabla`; equals `3 nabla^{*Omega}` on fully symmetric input.
    pub fn omega_adjoint_hat(&self, t: &TensorField, omega: &VolumeForm) -> Result<Sym2Field> {
        let sym = t.add(&t.permuted(&[1, 0, 2]))?.add(&t.permuted(&[1, 2, 0]))?;
        self.omega_adjoint(&sym, omega)
    }

    /// `d/dt Ric_{g+tv}(Omega)` at `t = 0` by the selected identity.
    pub fn ricci_variation(
        &self,
        omega: &VolumeForm,
        v: &Sym2Field,
        path: RicciPath,
    ) -> Result<Sym2Field> {
        match path {
            RicciPath::Divergence => Ok(self.omega_divergence(&self.dee(v)?, omega)?.scale(0.5)),
            RicciPath::Adjoint => {
                let n = self.nabla_sym2(v)?;
                let hat = self.hat_nabla(v)?;
                self.omega_adjoint(&n, omega)?
                    .axpy(-1.0 / 6.0, &self.omega_adjoint_hat(&hat, omega)?)
            }
        }
    }

    /// `d/dt Ric(g + tv)` at `t = 0` as `1/2 (div D v - nabla d Tr_g v)`.
    pub fn plain_ricci_variation(&self, v: &Sym2Field) -> Result<Sym2Field> {
        let tr = crate::tensor::trace_g(v, &self.g)?;
        Ok(self
            .divergence(&self.dee(v)?)?
            .sub(&self.hessian(&tr)?)?
            .scale(0.5))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RicciPath {
    /// `2 d/dt Ric_g(Omega) = e^f div_g(e^{-f} D_g v)`.
    Divergence,
    /// `d/dt Ric_g(Omega) = nabla^{*Omega} nabla v - 1/6 hat-nabla^{*Omega} hat-nabla v`.
    Adjoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePack {
    grid: PeriodicGrid,
    riemann: Vec<Vec<f64>>,
    pub ricci: Sym2Field,
    pub scalar: ScalarField,
    /// Largest `|Ric_jk - Ric_kj|` before symmetrization.
    pub ricci_asymmetry: f64,
}

impl CurvaturePack {
    /// `R^l_{kij}`: the `d_l` component of `R(d_i, d_j) d_k`.
    pub fn riemann(&self, l: usize, k: usize, i: usize, j: usize) -> &[f64] {
        let m = self.grid.dim();
        &self.riemann[((l * m + k) * m + i) * m + j]
    }
}

pub fn curvature_tensors(g: &MetricField) -> CurvaturePack {
    Geometry::new(g).curvature()
}

pub fn covariant_derivative(t: &TensorField, g: &MetricField) -> Result<TensorField> {
    Geometry::new(g).nabla(t)
}

pub fn hat_nabla(v: &Sym2Field, g: &MetricField) -> Result<TensorField> {
    Geometry::new(g).hat_nabla(v)
}

pub fn dee_operator(v: &Sym2Field, g: &MetricField) -> Result<TensorField> {
    Geometry::new(g).dee(v)
}

pub fn hessian_fn(f: &ScalarField, g: &MetricField) -> Result<Sym2Field> {
    Geometry::new(g).hessian(f)
}

pub fn log_density(g: &MetricField, omega: &VolumeForm) -> Result<ScalarField> {
    check_grid(g.grid(), omega.grid())?;
    Ok(ScalarField::from_vec(
        g.grid(),
        g.sqrt_det_raw()
            .iter()
            .zip(omega.density())
            .map(|(s, r)| (s / r).ln())
            .collect(),
    ))
}

pub fn bakry_emery(g: &MetricField, omega: &VolumeForm) -> Result<Sym2Field> {
    Geometry::new(g).bakry_emery(omega)
}

pub fn omega_adjoint(t: &TensorField, g: &MetricField, omega: &VolumeForm) -> Result<Sym2Field> {
    Geometry::new(g).omega_adjoint(t, omega)
}

pub fn ricci_variation(
    g: &MetricField,
    omega: &VolumeForm,
    v: &Sym2Field,
    path: RicciPath,
) -> Result<Sym2Field> {
    Geometry::new(g).ricci_variation(omega, v, path)
}

/// Residuals of `<nabla_F alpha, beta> = (p) <nabla alpha, beta>` for an
/// alternating or symmetric `alpha` of degree `p - 1` and `beta` of degree `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjointConsistency {
    /// Largest pointwise `|lhs - rhs|`.
    pub pointwise: f64,
    /// `|int lhs Omega - int rhs Omega|`.
    pub integrated: f64,
    /// Largest pointwise `|rhs|`, for relative comparisons.
    pub scale: f64,
}

/// `nabla_F alpha (xi_0, .., xi_q) = sum_j s_j nabla alpha(xi_j, xi_0, .., ^xi_j, .., xi_q)`
/// with `s_j = (-1)^j` (alternating) or `1` (symmetric).
pub fn symmetrized_derivative(
    geo: &Geometry,
    alpha: &TensorField,
    kind: TensorKind,
) -> Result<TensorField> {
    let q = alpha.rank();
    let n = geo.nabla(alpha)?;
    let mut acc = TensorField::zeros(alpha.grid(), q + 1);
    for j in 0..=q {
        let mut perm = vec![j];
        perm.extend((0..=q).filter(|&s| s != j));
        let sign = match kind {
            TensorKind::Alternating if j % 2 == 1 => -1.0,
            _ => 1.0,
        };
        acc = acc.add(&n.permuted(&perm).scale(sign))?;
    }
    Ok(acc)
}

pub fn adjoint_consistency(
    geo: &Geometry,
    omega: &VolumeForm,
    alpha: &TensorField,
    beta: &TensorField,
    kind: TensorKind,
) -> Result<AdjointConsistency> {
    let p = beta.rank();
    if alpha.rank() + 1 != p || !(2..=3).contains(&p) {
        return Err(Error::UnsupportedValence(p));
    }
    let lhs = inner_tensor(&symmetrized_derivative(geo, alpha, kind)?, beta, geo.metric())?;
    let rhs = inner_tensor(&geo.nabla(alpha)?, beta, geo.metric())?.scale(p as f64);
    let diff = lhs.zip_with(&rhs, |a, b| a - b)?;
    let grid = geo.grid();
    Ok(AdjointConsistency {
        pointwise: diff.max_abs(),
        integrated: (integrate_raw(grid, lhs.values(), omega.density())
            - integrate_raw(grid, rhs.values(), omega.density()))
        .abs(),
        scale: rhs.max_abs(),
    })
}

/// Seeded version of [`adjoint_consistency`]: random band-limited `alpha` and
/// `beta` of the requested kind; in the symmetric case `beta` also carries a
/// repeated-index term `f * S(e*_0 (x) e*_0 (x) e*_1)` (or its degree-2 analogue).
pub fn adjoint_consistency_check(
    p: usize,
    kind: TensorKind,
    g: &MetricField,
    omega: &VolumeForm,
    seed: u64,
) -> Result<AdjointConsistency> {
    if !(2..=3).contains(&p) {
        return Err(Error::UnsupportedValence(p));
    }
    let grid = g.grid();
    let mut seeds = crate::samples::SeedStream::new(seed);
    let alpha = crate::samples::random_tensor_of_kind(grid, p - 1, kind, &mut seeds, 0.3)?;
    let mut beta = crate::samples::random_tensor_of_kind(grid, p, kind, &mut seeds, 0.3)?;
    if kind == TensorKind::Symmetric && grid.dim() >= 2 {
        let weight = crate::samples::smooth_scalar(grid, &mut seeds, 0.5)?;
        let mut basis = vec![0usize; p];
        basis[p - 1] = 1;
        let m = grid.dim();
        let mut e = vec![0.0; m.pow(p as u32)];
        e[basis.iter().fold(0, |a, &i| a * m + i)] = 1.0;
        let ek = crate::tensor::project_symmetric(m, p, &e)?;
        let repeated = TensorField::from_points(grid, p, |pt, out| {
            for (o, x) in out.iter_mut().zip(&ek) {
                *o = weight.values()[pt] * x;
            }
        });
        beta = beta.add(&repeated)?;
    }
    adjoint_consistency(&Geometry::new(g), omega, &alpha, &beta, kind)
}
