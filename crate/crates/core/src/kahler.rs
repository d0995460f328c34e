//! Complex structures on the torus, the `(1,0)`/`(0,1)` calculus of
//! endomorphism fields, membership tests for the subspaces `F_g`, `D^J_g` and
//! the Kahler tangent space, the J-transport ODE and the Kahler Hessian
//! formulas.
//!
//! Conventions: `J` acts on tangent vectors, `J d/dx_k = d/dy_k` for the
//! standard structure. For a bilinear form `v`, `J^* v J` is the matrix
//! `J^t v J`. A derivative field `X^i_{ab}` is read as `X(d_a, d_b)` with the
//! derivative direction in the first slot, so that
//! `nabla^{1,0} S(xi, eta) = 1/2 [nabla S(xi, eta) - J nabla S(J xi, eta)]`.

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::grid::{integrate_raw, partial_raw, PeriodicGrid, ScalarField, VolumeForm};
use crate::samples::{flat_hessian, standard_j_matrix};
use crate::space_of_metrics::MetricCurve;
use crate::tensor::{
    endomorphism_of, inner_t12, lower_symmetric, EndField, Mat, MetricField, Sym2Field,
    Tensor12Field, TensorField,
};
use crate::variations::{f_space_residual, ricci_coupling};

/// Sup-norm threshold for "belongs to the space".
pub const MEMBERSHIP_TOL: f64 = 1e-8;
/// Pointwise algebraic tolerance for `J^2 = -I` and `J^T_g = -J`.
pub const ALGEBRAIC_TOL: f64 = 1e-10;
/// Tolerance on `nabla J` and on the Nijenhuis tensor.
pub const INTEGRABILITY_TOL: f64 = 1e-8;
/// evolve_j stops once `J^2 + I` or `gJ + J^* g` exceeds this.
pub const ODE_ABORT: f64 = 1e-3;

/// An almost complex structure, stored as an endomorphism field.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexStructure {
    j: EndField,
}

impl ComplexStructure {
    /// Wraps `j`; the algebraic conditions are reported by
    /// [`compatibility_report`], not enforced here.
    pub fn new(j: EndField) -> Result<Self> {
        if j.dim() % 2 != 0 {
            return Err(Error::OddDimension(j.dim()));
        }
        Ok(Self { j })
    }

    pub fn standard(grid: PeriodicGrid) -> Result<Self> {
        if grid.dim() % 2 != 0 {
            return Err(Error::OddDimension(grid.dim()));
        }
        Self::new(EndField::constant(grid, &standard_j_matrix(grid.dim())))
    }

    pub fn field(&self) -> &EndField {
        &self.j
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.j.grid()
    }

    pub fn at(&self, p: usize) -> Mat {
        self.j.at(p)
    }

    /// Largest deviation of `J(x)` from `J(x_0)`.
    pub fn variation(&self) -> f64 {
        let j0 = self.j.at(0);
        (0..self.grid().len()).fold(0.0, |m, p| m.max((self.j.at(p) - &j0).amax()))
    }

    /// The matrix of `J` when it is constant to `1e-12`.
    pub fn constant_matrix(&self) -> Result<Mat> {
        let var = self.variation();
        if var > 1e-12 {
            return Err(Error::NonConstantComplexStructure(var));
        }
        Ok(self.j.at(0))
    }
}

/// A metric together with a compatible, parallel complex structure.
#[derive(Debug, Clone)]
pub struct KahlerPair {
    pub g: MetricField,
    pub j: ComplexStructure,
}

impl KahlerPair {
    pub fn new(g: MetricField, j: ComplexStructure) -> Result<Self> {
        let r = compatibility_report(&g, &j)?;
        r.require()?;
        Ok(Self { g, j })
    }

    /// Flat metric with the standard structure.
    pub fn flat(grid: PeriodicGrid) -> Result<Self> {
        Self::new(MetricField::flat(grid), ComplexStructure::standard(grid)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompatibilityReport {
    /// `|J^2 + I|`.
    pub sq: f64,
    /// `|g J + J^* g|`.
    pub skew: f64,
    /// `|nabla_g J|`.
    pub parallel: f64,
    /// `|N_J|`.
    pub nijenhuis: f64,
}

impl CompatibilityReport {
    pub fn max(&self) -> f64 {
        self.sq.max(self.skew).max(self.parallel).max(self.nijenhuis)
    }

    /// Errors unless the pair is Kahler within the default tolerances.
    pub fn require(&self) -> Result<()> {
        let checks = [
            ("J^2 = -I", self.sq, ALGEBRAIC_TOL),
            ("g J + J^* g = 0", self.skew, ALGEBRAIC_TOL),
            ("nabla J = 0", self.parallel, INTEGRABILITY_TOL),
            ("Nijenhuis tensor = 0", self.nijenhuis, INTEGRABILITY_TOL),
        ];
        for (what, residual, tol) in checks {
            if !(residual <= tol) {
                return Err(Error::Precondition { what, residual, tol });
            }
        }
        Ok(())
    }
}

fn check_grids(a: PeriodicGrid, b: PeriodicGrid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Pointwise algebraic residuals `(|J^2 + I|, |g J + J^* g|)`.
fn algebraic_residuals(g: &MetricField, j: &ComplexStructure) -> (f64, f64) {
    let m = g.dim();
    let id = Mat::identity(m, m);
    let (mut sq, mut skew) = (0.0f64, 0.0f64);
    for p in 0..g.grid().len() {
        let jp = j.at(p);
        let gp = g.at(p);
        sq = sq.max((&jp * &jp + &id).amax());
        skew = skew.max((&gp * &jp + jp.transpose() * &gp).amax());
    }
    (sq, skew)
}

pub fn compatibility_report(g: &MetricField, j: &ComplexStructure) -> Result<CompatibilityReport> {
    compatibility_report_with(&Geometry::new(g), j)
}

pub fn compatibility_report_with(geo: &Geometry, j: &ComplexStructure) -> Result<CompatibilityReport> {
    check_grids(geo.grid(), j.grid())?;
    let (sq, skew) = algebraic_residuals(geo.metric(), j);
    Ok(CompatibilityReport {
        sq,
        skew,
        parallel: geo.nabla_end(j.field())?.max_abs(),
        nijenhuis: nijenhuis(j).max_abs(),
    })
}

/// `N(X, Y) = [JX, JY] - J[JX, Y] - J[X, JY] - [X, Y]` on coordinate fields:
/// `N^k_ab = J^p_a d_p J^k_b - J^p_b d_p J^k_a + J^k_l (d_b J^l_a - d_a J^l_b)`.
pub fn nijenhuis(j: &ComplexStructure) -> Tensor12Field {
    let grid = j.grid();
    let m = grid.dim();
    let comps: Vec<&[f64]> = (0..m * m).map(|f| j.field().component(f / m, f % m)).collect();
    // dj[p][k * m + b] = d_p J^k_b
    let dj: Vec<Vec<Vec<f64>>> = (0..m)
        .map(|a| comps.iter().map(|c| partial_raw(grid, c, a)).collect())
        .collect();
    Tensor12Field::from_points(grid, |p, out| {
        let jm = j.at(p);
        for k in 0..m {
            for a in 0..m {
                for b in 0..m {
                    let mut v = 0.0;
                    for q in 0..m {
                        v += jm[(q, a)] * dj[q][k * m + b][p] - jm[(q, b)] * dj[q][k * m + a][p];
                        v += jm[(k, q)] * (dj[b][q * m + a][p] - dj[a][q * m + b][p]);
                    }
                    out[k * m * m + a * m + b] = v;
                }
            }
        }
    })
}

/// J-linear and J-anti-linear parts of an endomorphism field.
#[derive(Debug, Clone, PartialEq)]
pub struct EndSplit {
    pub a10: EndField,
    pub a01: EndField,
}

/// `A^{1,0} = 1/2 (A - J A J)`, `A^{0,1} = 1/2 (A + J A J)`.
pub fn split_endomorphism(a: &EndField, j: &ComplexStructure) -> Result<EndSplit> {
    check_grids(a.grid(), j.grid())?;
    let part = |sign: f64| {
        EndField::from_fn(a.grid(), |p| {
            let (x, jm) = (a.at(p), j.at(p));
            (&x + &jm * &x * &jm * sign) * 0.5
        })
    };
    Ok(EndSplit {
        a10: part(-1.0),
        a01: part(1.0),
    })
}

/// `1/2 [X(xi, eta) + sign J X(J xi, eta)]`.
fn project_first_slot(x: &Tensor12Field, j: &ComplexStructure, sign: f64) -> Tensor12Field {
    let m = x.dim();
    Tensor12Field::from_points(x.grid(), |p, out| {
        let xs = x.at(p);
        let jm = j.at(p);
        for i in 0..m {
            for a in 0..m {
                for b in 0..m {
                    let mut rot = 0.0;
                    for k in 0..m {
                        for c in 0..m {
                            rot += jm[(i, k)] * jm[(c, a)] * xs[k * m * m + c * m + b];
                        }
                    }
                    out[i * m * m + a * m + b] = 0.5 * (xs[i * m * m + a * m + b] + sign * rot);
                }
            }
        }
    })
}

/// The two projections of `nabla S` in the derivative slot.
#[derive(Debug, Clone, PartialEq)]
pub struct NablaSplit {
    pub n10: Tensor12Field,
    pub n01: Tensor12Field,
}

pub fn nabla_split(geo: &Geometry, s: &EndField, j: &ComplexStructure) -> Result<NablaSplit> {
    check_grids(geo.grid(), j.grid())?;
    let n = geo.nabla_end(s)?;
    Ok(NablaSplit {
        n10: project_first_slot(&n, j, -1.0),
        n01: project_first_slot(&n, j, 1.0),
    })
}

/// `dbar A(xi, eta) = nabla^{0,1} A(xi, eta) - nabla^{0,1} A(eta, xi)` and the
/// analogous `d^g A` built from `nabla^{1,0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FormPair {
    pub dbar: Tensor12Field,
    pub del: Tensor12Field,
}

fn antisymmetrize(x: &Tensor12Field) -> Tensor12Field {
    x.sub(&x.swapped()).expect("same grid")
}

pub fn dbar_del_tx(geo: &Geometry, a: &EndField, j: &ComplexStructure) -> Result<FormPair> {
    let s = nabla_split(geo, a, j)?;
    Ok(FormPair {
        dbar: antisymmetrize(&s.n01),
        del: antisymmetrize(&s.n10),
    })
}

/// Which slot of a derivative field is frozen to a coordinate direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// `xi -| X : eta -> X(xi, eta)`.
    First,
    /// `X . xi : eta -> X(eta, xi)`.
    Second,
}

/// Largest g-asymmetry `|g E - (g E)^t|` of the endomorphisms obtained by
/// freezing one slot of `x` to a coordinate direction.
pub fn slot_symmetry_residual(x: &Tensor12Field, g: &MetricField, slot: Slot) -> Result<f64> {
    check_grids(x.grid(), g.grid())?;
    let m = x.dim();
    let mut worst = 0.0f64;
    for p in 0..x.grid().len() {
        let xs = x.at(p);
        let gp = g.at(p);
        for c in 0..m {
            let e = Mat::from_fn(m, m, |i, a| match slot {
                Slot::First => xs[i * m * m + c * m + a],
                Slot::Second => xs[i * m * m + a * m + c],
            });
            let ge = &gp * e;
            worst = worst.max((&ge - ge.transpose()).amax());
        }
    }
    Ok(worst)
}

/// The pieces `B = (v*)^{1,0}`, `A' = (v*)^{0,1}` of a direction and their
/// split derivatives, shared by membership tests and Hessian formulas.
#[derive(Debug, Clone)]
pub struct KahlerPieces {
    pub b: EndField,
    pub a: EndField,
    pub nb: NablaSplit,
    pub na: NablaSplit,
}

impl KahlerPieces {
    pub fn new(geo: &Geometry, j: &ComplexStructure, v: &Sym2Field) -> Result<Self> {
        let vs = endomorphism_of(v, geo.metric())?;
        let split = split_endomorphism(&vs, j)?;
        Ok(Self {
            nb: nabla_split(geo, &split.a10, j)?,
            na: nabla_split(geo, &split.a01, j)?,
            b: split.a10,
            a: split.a01,
        })
    }

    pub fn dbar_b(&self) -> Tensor12Field {
        antisymmetrize(&self.nb.n01)
    }

    pub fn del_b(&self) -> Tensor12Field {
        antisymmetrize(&self.nb.n10)
    }

    pub fn dbar_a(&self) -> Tensor12Field {
        antisymmetrize(&self.na.n01)
    }

    pub fn del_a(&self) -> Tensor12Field {
        antisymmetrize(&self.na.n10)
    }

    pub fn nabla_a(&self) -> Tensor12Field {
        self.na.n10.add(&self.na.n01).expect("same grid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembershipReport {
    /// Antisymmetrized `nabla v`; zero on `F_g`.
    pub f: f64,
    /// `max(|d^g (v*)^{1,0}|, |dbar (v*)^{0,1}|)`; zero on `D^J_g`.
    pub d: f64,
    /// `max(|v - J^* v J|, |d^g v*|)`; zero on the Kahler tangent space.
    pub dhat: f64,
    /// `|dbar (v*)^{1,0} + d^g (v*)^{0,1}|`.
    pub kah_f: f64,
    /// `|xi -| nabla^{0,1} (v*)^{1,0} - nabla^{1,0} (v*)^{0,1} . xi|`.
    pub sup_kh_sm: f64,
    /// Per-direction g-asymmetry of `nabla^{0,1} (v*)^{1,0} . xi` and
    /// `nabla^{0,1} (v*)^{0,1} . xi`.
    pub d_symmetry: f64,
}

impl MembershipReport {
    pub fn in_f(&self) -> bool {
        self.f <= MEMBERSHIP_TOL
    }

    pub fn in_d(&self) -> bool {
        self.d <= MEMBERSHIP_TOL
    }

    pub fn in_dhat(&self) -> bool {
        self.dhat <= MEMBERSHIP_TOL
    }
}

/// `|v - J^* v J|` in sup norm.
pub fn j_invariance_residual(v: &Sym2Field, j: &ComplexStructure) -> Result<f64> {
    check_grids(v.grid(), j.grid())?;
    Ok((0..v.grid().len()).fold(0.0, |m, p| {
        let (x, jm) = (v.at(p), j.at(p));
        m.max((&x - jm.transpose() * &x * &jm).amax())
    }))
}

pub fn membership_report(geo: &Geometry, j: &ComplexStructure, v: &Sym2Field) -> Result<MembershipReport> {
    let pieces = KahlerPieces::new(geo, j, v)?;
    let g = geo.metric();
    let vs = endomorphism_of(v, g)?;
    let del_v = dbar_del_tx(geo, &vs, j)?.del;
    let sup = pieces.nb.n01.sub(&pieces.na.n10.swapped())?;
    Ok(MembershipReport {
        f: f_space_residual(geo, v)?,
        d: pieces.del_b().max_abs().max(pieces.dbar_a().max_abs()),
        dhat: j_invariance_residual(v, j)?.max(del_v.max_abs()),
        kah_f: pieces.dbar_b().add(&pieces.del_a())?.max_abs(),
        sup_kh_sm: sup.max_abs(),
        d_symmetry: slot_symmetry_residual(&pieces.nb.n01, g, Slot::Second)?
            .max(slot_symmetry_residual(&pieces.na.n01, g, Slot::Second)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndKind {
    AntiLinear,
    Linear,
}

/// Residuals of the three conditions that characterize closedness of a
/// g-symmetric linear or anti-linear endomorphism field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryResiduals {
    /// Per-direction g-symmetry of `nabla^{0,1} M . xi`.
    pub slot_symmetry: f64,
    /// Symmetry of `nabla^{0,1} M` (anti-linear) or `nabla^{1,0} M` (linear)
    /// in its two form slots.
    pub form_symmetry: f64,
    /// `|dbar M|` (anti-linear) or `|d^g M|` (linear).
    pub closedness: f64,
}

pub fn symmetry_equivalence(
    geo: &Geometry,
    j: &ComplexStructure,
    mf: &EndField,
    kind: EndKind,
) -> Result<SymmetryResiduals> {
    let g = geo.metric();
    check_grids(g.grid(), mf.grid())?;
    let scale = mf.max_abs().max(1.0);
    let (mut asym, mut wrong_kind) = (0.0f64, 0.0f64);
    for p in 0..g.grid().len() {
        let (x, jm, gp) = (mf.at(p), j.at(p), g.at(p));
        let gx = &gp * &x;
        asym = asym.max((&gx - gx.transpose()).amax());
        let k = match kind {
            EndKind::Linear => &x * &jm - &jm * &x,
            EndKind::AntiLinear => &x * &jm + &jm * &x,
        };
        wrong_kind = wrong_kind.max(k.amax());
    }
    if asym > 1e-10 * scale {
        return Err(Error::KindMismatch {
            expected: "g-symmetric",
            residual: asym,
        });
    }
    if wrong_kind > 1e-10 * scale {
        return Err(Error::KindMismatch {
            expected: match kind {
                EndKind::Linear => "J-linear",
                EndKind::AntiLinear => "J-anti-linear",
            },
            residual: wrong_kind,
        });
    }
    let s = nabla_split(geo, mf, j)?;
    let form = match kind {
        EndKind::AntiLinear => &s.n01,
        EndKind::Linear => &s.n10,
    };
    let anti = antisymmetrize(form);
    Ok(SymmetryResiduals {
        slot_symmetry: slot_symmetry_residual(&s.n01, g, Slot::Second)?,
        form_symmetry: anti.max_abs(),
        closedness: anti.max_abs(),
    })
}

/// Diagnostics of one sample of a J-transport run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JDiagnostics {
    pub t: f64,
    pub compat: CompatibilityReport,
    /// `|(J')^T_g + J' - (J V - V J)|` with `V = g^{-1} g'`.
    pub der_j_inv_t: f64,
    /// `|2 V^{0,1} + J J' + (J J')^T_g|`.
    pub der_j_inv: f64,
    /// `|dbar J'|`.
    pub dbar_jdot: f64,
    /// `|J J' + V^{0,1}|`.
    pub j_jdot: f64,
    /// Membership residual `D` of the velocity.
    pub velocity_d: f64,
}

#[derive(Debug, Clone)]
pub struct JTrajectory {
    pub times: Vec<f64>,
    pub structures: Vec<ComplexStructure>,
    pub diagnostics: Vec<JDiagnostics>,
}

impl JTrajectory {
    pub fn final_structure(&self) -> &ComplexStructure {
        self.structures.last().expect("at least the initial sample")
    }

    /// Largest value of `f` over all samples.
    pub fn max_of(&self, f: impl Fn(&JDiagnostics) -> f64) -> f64 {
        self.diagnostics.iter().map(f).fold(0.0, f64::max)
    }
}

/// `V = g_t^{-1} g'_t` per point.
fn velocity_endomorphisms(curve: &MetricCurve, t: f64) -> Result<(MetricField, Vec<Mat>)> {
    let g = curve.metric_at(t)?;
    let v = curve.velocity_at(t);
    let vs = (0..g.grid().len()).map(|p| g.inv_at(p) * v.at(p)).collect();
    Ok((g, vs))
}

fn jdot(j: &[Mat], v: &[Mat]) -> Vec<Mat> {
    j.iter()
        .zip(v)
        .map(|(j, v)| (j * v - v * j) * 0.5)
        .collect()
}

fn end_field(grid: PeriodicGrid, mats: &[Mat]) -> EndField {
    EndField::from_fn(grid, |p| mats[p].clone())
}

fn diagnostics(curve: &MetricCurve, t: f64, j: &[Mat]) -> Result<JDiagnostics> {
    let (g, vs) = velocity_endomorphisms(curve, t)?;
    let grid = g.grid();
    let geo = Geometry::new(&g);
    let cs = ComplexStructure::new(end_field(grid, j))?;
    let jd = jdot(j, &vs);
    let (mut r1, mut r2, mut r3) = (0.0f64, 0.0f64, 0.0f64);
    for p in 0..grid.len() {
        let (gp, gi) = (g.at(p), g.inv_at(p));
        let (jm, v, d) = (&j[p], &vs[p], &jd[p]);
        let v01 = (v + jm * v * jm) * 0.5;
        let t_g = |x: &Mat| &gi * x.transpose() * &gp;
        r1 = r1.max((t_g(d) + d - (jm * v - v * jm)).amax());
        let jj = jm * d;
        r2 = r2.max((&v01 * 2.0 + &jj + t_g(&jj)).amax());
        r3 = r3.max((&jj + &v01).amax());
    }
    let dbar = dbar_del_tx(&geo, &end_field(grid, &jd), &cs)?.dbar.max_abs();
    let velocity = curve.velocity_at(t);
    let pieces = KahlerPieces::new(&geo, &cs, &velocity)?;
    Ok(JDiagnostics {
        t,
        compat: compatibility_report_with(&geo, &cs)?,
        der_j_inv_t: r1,
        der_j_inv: r2,
        dbar_jdot: dbar,
        j_jdot: r3,
        velocity_d: pieces.del_b().max_abs().max(pieces.dbar_a().max_abs()),
    })
}

/// Transports `J_0` along `curve` by `2 J' = J V - V J`, `V = g_t^{-1} g'_t`,
/// with the classical Runge-Kutta scheme and diagnostics at every step.
pub fn evolve_j(curve: &MetricCurve, j0: &ComplexStructure, t_end: f64, steps: usize) -> Result<JTrajectory> {
    evolve_j_sampled(curve, j0, t_end, steps, 1)
}

/// As [`evolve_j`], recording diagnostics every `sample_every` steps and at
/// the final time.
pub fn evolve_j_sampled(
    curve: &MetricCurve,
    j0: &ComplexStructure,
    t_end: f64,
    steps: usize,
    sample_every: usize,
) -> Result<JTrajectory> {
    let g0 = curve.base();
    check_grids(g0.grid(), j0.grid())?;
    compatibility_report(g0, j0)?.require()?;
    let steps = steps.max(1);
    let every = sample_every.max(1);
    let grid = g0.grid();
    let h = t_end / steps as f64;
    let mut j: Vec<Mat> = (0..grid.len()).map(|p| j0.at(p)).collect();
    let mut out = JTrajectory {
        times: vec![0.0],
        structures: vec![j0.clone()],
        diagnostics: vec![diagnostics(curve, 0.0, &j)?],
    };
    let mut v_now = velocity_endomorphisms(curve, 0.0)?.1;
    for s in 0..steps {
        let t = s as f64 * h;
        let v_mid = velocity_endomorphisms(curve, t + 0.5 * h)?.1;
        let v_end = velocity_endomorphisms(curve, t + h)?.1;
        let stage = |base: &[Mat], k: &[Mat], c: f64| -> Vec<Mat> {
            base.iter().zip(k).map(|(b, k)| b + k * c).collect()
        };
        let k1 = jdot(&j, &v_now);
        let k2 = jdot(&stage(&j, &k1, 0.5 * h), &v_mid);
        let k3 = jdot(&stage(&j, &k2, 0.5 * h), &v_mid);
        let k4 = jdot(&stage(&j, &k3, h), &v_end);
        for p in 0..j.len() {
            j[p] += (&k1[p] + &k2[p] * 2.0 + &k3[p] * 2.0 + &k4[p]) * (h / 6.0);
        }
        v_now = v_end;
        let t_new = t + h;
        let g_new = curve.metric_at(t_new)?;
        let cs = ComplexStructure::new(end_field(grid, &j))?;
        let (sq, skew) = algebraic_residuals(&g_new, &cs);
        if sq.max(skew) > ODE_ABORT {
            return Err(Error::OdeAbort {
                t: t_new,
                residual: sq.max(skew),
            });
        }
        if (s + 1) % every == 0 || s + 1 == steps {
            out.times.push(t_new);
            out.diagnostics.push(diagnostics(curve, t_new, &j)?);
            out.structures.push(cs);
        }
    }
    Ok(out)
}

/// `Ric_J(Omega) = i d dbar u` for `Omega = e^{-u} dx`, as the matrix of a real
/// 2-form. Requires a constant `J`.
pub fn ricci_form(j: &ComplexStructure, omega: &VolumeForm) -> Result<TensorField> {
    check_grids(j.grid(), omega.grid())?;
    let jm = j.constant_matrix()?;
    let u = ScalarField::new(
        omega.grid(),
        omega.density().iter().map(|d| -d.ln()).collect(),
    )?;
    Ok(i_ddbar(&u, &jm))
}

/// `i d dbar f` as the 2-form matrix `1/2 (J^t H - H J)`, `H` the flat Hessian,
/// for a constant `J`.
pub fn i_ddbar(f: &ScalarField, j: &Mat) -> TensorField {
    let h = flat_hessian(f);
    let m = j.nrows();
    TensorField::from_points(f.grid(), 2, |p, out| {
        let hp = h.at(p);
        let w = (j.transpose() * &hp - &hp * j) * 0.5;
        for a in 0..m {
            for b in 0..m {
                out[a * m + b] = w[(a, b)];
            }
        }
    })
}

/// The bilinear form `(xi, eta) -> -w(xi, J eta)`... written `-w J` in the
/// convention `(w J)(xi, eta) = w(J xi, eta)`: matrix `-J^t w`.
fn form_times_j(w: &TensorField, j: &Mat) -> Sym2Field {
    let m = j.nrows();
    Sym2Field::from_fn(w.grid(), |p| {
        let wp = Mat::from_row_slice(m, m, &w.at(p));
        let b = -(j.transpose() * wp);
        (&b + b.transpose()) * 0.5
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CxDecomposition {
    /// `|Ric_g(Omega) - (-Ric_J(Omega) J + g dbar grad f)|`, `f = log(dV_g / Omega)`.
    pub ricci: f64,
    /// `|nabla df - (-(i d dbar f) J + g dbar grad f)|` for the same `f`.
    pub hessian: f64,
    /// Size of `Ric_g(Omega)`, for relative reading.
    pub scale: f64,
}

/// `g dbar nabla f`: the J-anti-linear part of `nabla grad f`, lowered.
fn g_dbar_grad(geo: &Geometry, f: &ScalarField, j: &ComplexStructure) -> Result<Sym2Field> {
    let grad = geo.gradient(f)?;
    let e = geo.nabla_vector(&grad)?;
    let split = split_endomorphism(&e, j)?;
    lower_symmetric(&split.a01, geo.metric())
}

pub fn cx_decomposition_check(geo: &Geometry, j: &ComplexStructure, omega: &VolumeForm) -> Result<CxDecomposition> {
    let jm = j.constant_matrix()?;
    let f = geo.log_density(omega)?;
    let dbar = g_dbar_grad(geo, &f, j)?;
    let ric = geo.bakry_emery(omega)?;
    let rhs = form_times_j(&ricci_form(j, omega)?, &jm).add(&dbar)?;
    let hess = geo.hessian(&f)?;
    let rhs_h = form_times_j(&i_ddbar(&f, &jm), &jm).add(&dbar)?;
    Ok(CxDecomposition {
        ricci: ric.sub(&rhs)?.max_abs(),
        hessian: hess.sub(&rhs_h)?.max_abs(),
        scale: ric.max_abs(),
    })
}

/// Pointwise inner product of two T_X-valued 2-forms, `sum_{a<b}` of the
/// tensor contraction: half of [`inner_t12`] on antisymmetric fields.
pub fn form_inner(x: &Tensor12Field, y: &Tensor12Field, g: &MetricField) -> Result<ScalarField> {
    Ok(inner_t12(x, y, g)?.scale(0.5))
}

fn integral(grid: PeriodicGrid, s: &ScalarField, omega: &VolumeForm) -> f64 {
    integrate_raw(grid, s.values(), omega.density())
}

fn require(what: &'static str, residual: f64, tol: f64) -> Result<()> {
    if residual <= tol {
        Ok(())
    } else {
        Err(Error::Precondition { what, residual, tol })
    }
}

/// Hessian of `W_Omega` for `v` in `D^J_g`, with 2-forms paired by [`form_inner`]:
/// `int Tr[(v*)^2 Ric*] Omega + 1/2 int |nabla^{0,1} A'|^2 Omega
///  - 1/2 int <4 dbar B + d^g A', d^g A'> Omega`, `A' = (v*)^{0,1}`, `B = (v*)^{1,0}`.
pub fn hessian_kahler(geo: &Geometry, j: &ComplexStructure, omega: &VolumeForm, v: &Sym2Field) -> Result<f64> {
    let pieces = KahlerPieces::new(geo, j, v)?;
    let d = pieces.del_b().max_abs().max(pieces.dbar_a().max_abs());
    require("v in D^J_g", d, MEMBERSHIP_TOL)?;
    let g = geo.metric();
    let grid = g.grid();
    let del_a = pieces.del_a();
    let lhs = pieces.dbar_b().scale(4.0).add(&del_a)?;
    let n01 = inner_t12(&pieces.na.n01, &pieces.na.n01, g)?;
    let cross = form_inner(&lhs, &del_a, g)?;
    Ok(ricci_coupling(geo, omega, v)? + 0.5 * integral(grid, &n01, omega)
        - 0.5 * integral(grid, &cross, omega))
}

/// Hessian of `W_Omega` for `v` in `F_g`, in Kahler form:
/// `int Tr[(v*)^2 Ric*] Omega + int [1/2 |nabla A'|^2 + |nabla^{1,0} A'|^2] Omega`.
///
/// The `(1,0)` projection is the one that follows from [`hessian_kahler`]
/// and the identity `dbar B = -d^g A'` on `F_g`; the `(0,1)` projection in
/// its place is off by `int (|nabla^{0,1} A'|^2 - |nabla^{1,0} A'|^2) Omega`.
pub fn hessian_kahler_f(geo: &Geometry, j: &ComplexStructure, omega: &VolumeForm, v: &Sym2Field) -> Result<f64> {
    require("v in F_g", f_space_residual(geo, v)?, MEMBERSHIP_TOL)?;
    let pieces = KahlerPieces::new(geo, j, v)?;
    let g = geo.metric();
    let grid = g.grid();
    let na = pieces.nabla_a();
    let full = inner_t12(&na, &na, g)?;
    let n10 = inner_t12(&pieces.na.n10, &pieces.na.n10, g)?;
    Ok(ricci_coupling(geo, omega, v)? + 0.5 * integral(grid, &full, omega) + integral(grid, &n10, omega))
}

/// Sup norm of `d(v J)`, where `(v J)(xi, eta) = v(J xi, eta)`.
pub fn closedness_residual(v: &Sym2Field, j: &ComplexStructure) -> Result<f64> {
    check_grids(v.grid(), j.grid())?;
    let grid = v.grid();
    let m = grid.dim();
    let sigma: Vec<Mat> = (0..grid.len()).map(|p| j.at(p).transpose() * v.at(p)).collect();
    let comp = |a: usize, b: usize| -> Vec<f64> { sigma.iter().map(|s| s[(a, b)]).collect() };
    let mut worst = 0.0f64;
    for a in 0..m {
        for b in a + 1..m {
            for c in b + 1..m {
                let t1 = partial_raw(grid, &comp(b, c), a);
                let t2 = partial_raw(grid, &comp(c, a), b);
                let t3 = partial_raw(grid, &comp(a, b), c);
                for p in 0..grid.len() {
                    worst = worst.max((t1[p] + t2[p] + t3[p]).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Hessian of `W_Omega` for J-invariant `v` with `d(v J) = 0`:
/// `int <v Ric*_g(Omega), v>_g Omega`.
pub fn hessian_invariant(geo: &Geometry, j: &ComplexStructure, omega: &VolumeForm, v: &Sym2Field) -> Result<f64> {
    require("v = J^* v J", j_invariance_residual(v, j)?, MEMBERSHIP_TOL)?;
    require("d(v J) = 0", closedness_residual(v, j)?, MEMBERSHIP_TOL)?;
    ricci_coupling(geo, omega, v)
}

/// Integrated two-sided values of the identities used in the Kahler Hessian
/// computation; each `(lhs, rhs)` pair should agree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityChecks {
    /// `int <hat nabla v', hat nabla v''>` against `6 int <d^g A, dbar B>`.
    pub orth_der: (f64, f64),
    /// `int |nabla^{1,0} A|^2` against `int |d^g A|^2`.
    pub der_a_del_a: (f64, f64),
    /// `int |nabla^{0,1} B|^2` against `int |nabla^{1,0} B|^2`.
    pub b_split: (f64, f64),
    /// `int |nabla^{1,0} A|^2` against `int <d^g A, dbar B>`; meaningful on `F_g`.
    pub f_chain: (f64, f64),
}

impl IdentityChecks {
    /// Absolute residuals in the order orth_der, der_a_del_a, b_split, f_chain.
    pub fn residuals(&self) -> [f64; 4] {
        [self.orth_der, self.der_a_del_a, self.b_split, self.f_chain].map(|(a, b)| (a - b).abs())
    }
}

/// Evaluates the identities with `A = -(v*)^{0,1}`, `B = (v*)^{1,0}`,
/// integrating against `omega`.
pub fn kahler_identity_checks(
    geo: &Geometry,
    j: &ComplexStructure,
    v: &Sym2Field,
    omega: &VolumeForm,
) -> Result<IdentityChecks> {
    let pieces = KahlerPieces::new(geo, j, v)?;
    let d = pieces.del_b().max_abs().max(pieces.dbar_a().max_abs());
    require("v in D^J_g", d, MEMBERSHIP_TOL)?;
    let g = geo.metric();
    let grid = g.grid();
    let jm: Vec<Mat> = (0..grid.len()).map(|p| j.at(p)).collect();
    let v_lin = Sym2Field::from_fn(grid, |p| {
        let x = v.at(p);
        (&x + jm[p].transpose() * &x * &jm[p]) * 0.5
    });
    let v_anti = v.sub(&v_lin)?;
    let h1 = geo.hat_nabla(&v_lin)?;
    let h2 = geo.hat_nabla(&v_anti)?;
    let int = |s: &ScalarField| integral(grid, s, omega);
    // A = -(v*)^{0,1} flips the sign of every term linear in A.
    let del_a = pieces.del_a().scale(-1.0);
    let n10a = pieces.na.n10.scale(-1.0);
    let dbar_b = pieces.dbar_b();
    let cross = int(&form_inner(&del_a, &dbar_b, g)?);
    Ok(IdentityChecks {
        orth_der: (int(&crate::tensor::inner_tensor(&h1, &h2, g)?), 6.0 * cross),
        der_a_del_a: (int(&inner_t12(&n10a, &n10a, g)?), int(&form_inner(&del_a, &del_a, g)?)),
        b_split: (
            int(&inner_t12(&pieces.nb.n01, &pieces.nb.n01, g)?),
            int(&inner_t12(&pieces.nb.n10, &pieces.nb.n10, g)?),
        ),
        f_chain: (int(&inner_t12(&n10a, &n10a, g)?), cross),
    })
}
