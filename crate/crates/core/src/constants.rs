//! Poincaré, Friedrichs and Maxwell constant estimates on convex domains,
//! and their comparison with the diameter bounds `d/π` and `max d_jk/π`.
//!
//! Every constant is `1/√λ` for the smallest eigenvalue `λ` of a discrete
//! operator on a constrained subspace:
//!
//! | constant | operator | space |
//! |----------|----------|-------|
//! | `c_p`    | `D D*` on cells | zero mean |
//! | `c_f`    | `G* G` on essential nodes | all |
//! | `c_m1`   | `C* C` on essential edges | `G* φ = 0` |
//! | `c_m2`   | `C C*` on essential faces | `D φ = 0` |
//! | `c_mt`   | `C* C + G G*` on essential edges | all |
//! | `c_mn`   | `C C* + D* D` on essential faces | all |
//! | `c_pw`   | `D D*` on cells | zero mean on every slab |
//!
//! The estimates are grid quantities, not the continuum constants.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::domain::{diameter, projected_diameters, uniform_decomposition, VoxelDomain};
use crate::error::{Error, Result};
use crate::grid_calculus::{FieldKind, Flavor, Mesh, Stencil};
use crate::laplace::{Form, Laplacian};
use crate::solver::{indicator_projector, inverse_iteration, pcg, EigenPair, LinearOperator, Stop};

pub use crate::solver::EigenConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxwellFlavor {
    /// Vanishing tangential trace.
    Tangential,
    /// Vanishing normal trace.
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub name: String,
    /// 1-based slab axis (specialized Poincaré only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<usize>,
    /// Number of slabs (specialized Poincaré only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slabs: Option<usize>,
    pub value: f64,
    pub lambda: f64,
    pub h: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub eigen_residual: f64,
    pub constraint_residual: f64,
    /// `sqrt(d_jk² + l_i²/N²)/π` (specialized Poincaré only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    /// `d_jk/π` (specialized Poincaré only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit_bound: Option<f64>,
}

impl ConstantEstimate {
    fn from_pair(name: &str, mesh: &Mesh, pair: &EigenPair, constraint_residual: f64) -> Self {
        Self {
            name: name.to_string(),
            axis: None,
            slabs: None,
            value: 1.0 / pair.lambda.sqrt(),
            lambda: pair.lambda,
            h: mesh.h(),
            outer_iterations: pair.outer_iterations,
            inner_iterations: pair.inner_iterations,
            eigen_residual: pair.residual,
            constraint_residual,
            bound: None,
            limit_bound: None,
        }
    }
}

fn require_convex(mesh: &Mesh) -> Result<()> {
    if mesh.domain().is_convex() {
        Ok(())
    } else {
        Err(Error::NotConvex)
    }
}

fn stencil_scale(mesh: &Mesh) -> f64 {
    2.0 * 3f64.sqrt() / mesh.h()
}

fn m_norm(mesh: &Mesh, kind: FieldKind, x: &[f64]) -> f64 {
    crate::grid_calculus::weighted_dot(x, x, mesh.weights(kind), Default::default())
        .max(0.0)
        .sqrt()
}

/// Largest `|<x, 1_g>| / (||1_g|| ||x||)` over indicator groups.
fn indicator_residual(groups: &[Vec<usize>], w: &[f64], x: &[f64]) -> f64 {
    let xn = x.iter().zip(w).map(|(x, w)| w * x * x).sum::<f64>().sqrt();
    groups
        .iter()
        .map(|g| {
            let s: f64 = g.iter().map(|&i| w[i] * x[i]).sum();
            let m: f64 = g.iter().map(|&i| w[i]).sum();
            s.abs() / (m.sqrt() * xn)
        })
        .fold(0.0, f64::max)
}

/// Deflated Neumann eigenpair of `D D*` on cells for the given groups.
fn neumann_cells(mesh: &Mesh, groups: &[Vec<usize>], cfg: &EigenConfig) -> Result<(EigenPair, f64)> {
    let op = Laplacian::new(mesh, Form::Cells, Flavor::Essential);
    let proj = indicator_projector(groups, op.weights());
    let pair = inverse_iteration(&op, Some(&proj), None, cfg)?;
    let res = indicator_residual(groups, op.weights(), &pair.vector);
    Ok((pair, res))
}

/// `c_p` from the zero-mean Neumann problem.
pub fn estimate_poincare(mesh: &Mesh, cfg: &EigenConfig) -> Result<ConstantEstimate> {
    require_convex(mesh)?;
    cfg.validate()?;
    let op = Laplacian::new(mesh, Form::Cells, Flavor::Essential);
    let groups = vec![op.support_indices()];
    let (pair, res) = neumann_cells(mesh, &groups, cfg)?;
    Ok(ConstantEstimate::from_pair("c_p", mesh, &pair, res))
}

/// `c_f` from the Dirichlet problem on nodes.
pub fn estimate_friedrichs(mesh: &Mesh, cfg: &EigenConfig) -> Result<ConstantEstimate> {
    require_convex(mesh)?;
    cfg.validate()?;
    let op = Laplacian::new(mesh, Form::Nodes, Flavor::Essential);
    let pair = inverse_iteration(&op, None, None, cfg)?;
    Ok(ConstantEstimate::from_pair("c_f", mesh, &pair, 0.0))
}

/// Removes the gradient component of an essential edge or face vector.
struct DivFreeProjector<'m> {
    mesh: &'m Mesh,
    kind: FieldKind,
    cfg: EigenConfig,
}

impl DivFreeProjector<'_> {
    fn constraint(&self, x: &[f64]) -> Vec<f64> {
        let fl = Flavor::Essential;
        match self.kind {
            FieldKind::Edge => self.mesh.adjoint(Stencil::Grad, fl, x),
            _ => self.mesh.primal(Stencil::Div, x),
        }
    }

    /// `||G* x||` resp. `||D x||` relative to `s ||x||`.
    fn residual(&self, x: &[f64]) -> f64 {
        let c = self.constraint(x);
        let ck = match self.kind {
            FieldKind::Edge => FieldKind::Node,
            _ => FieldKind::Cell,
        };
        let xn = m_norm(self.mesh, self.kind, x);
        if xn == 0.0 {
            0.0
        } else {
            m_norm(self.mesh, ck, &c) / (stencil_scale(self.mesh) * xn)
        }
    }

    fn project(&self, x: &mut [f64]) -> Result<()> {
        let m = self.mesh;
        let fl = Flavor::Essential;
        let b = self.constraint(x);
        let stop = Stop {
            rtol: self.cfg.inner.tol,
            atol: 1e-15 * stencil_scale(m) * m_norm(m, self.kind, x),
            max_iter: self.cfg.inner.max_iter,
            mode: self.cfg.inner.reduction(),
        };
        let grad = match self.kind {
            FieldKind::Edge => {
                let op = Laplacian::new(m, Form::Nodes, fl);
                let (p, _) = pcg(&op, &b, None, None, stop)?;
                m.primal(Stencil::Grad, &p)
            }
            _ => {
                let op = Laplacian::new(m, Form::Cells, fl);
                let groups = vec![op.support_indices()];
                let proj = indicator_projector(&groups, op.weights());
                let (q, _) = pcg(&op, &b, None, Some(&proj), stop)?;
                m.adjoint(Stencil::Div, fl, &q)
            }
        };
        x.iter_mut().zip(&grad).for_each(|(x, g)| *x -= g);
        Ok(())
    }
}

fn maxwell_form(flavor: MaxwellFlavor) -> Form {
    match flavor {
        MaxwellFlavor::Tangential => Form::EdgeHodge,
        MaxwellFlavor::Normal => Form::FaceHodge,
    }
}

/// `c_m1` (tangential) or `c_m2` (normal): smallest curl-curl eigenvalue on
/// divergence-free fields.
///
/// The inverse iteration runs on the Hodge Laplacian, which agrees with
/// curl-curl on divergence-free fields; the gradient component is
/// projected out after every outer step.
pub fn estimate_maxwell(mesh: &Mesh, flavor: MaxwellFlavor, cfg: &EigenConfig) -> Result<ConstantEstimate> {
    require_convex(mesh)?;
    cfg.validate()?;
    let form = maxwell_form(flavor);
    let op = Laplacian::new(mesh, form, Flavor::Essential);
    let proj = DivFreeProjector {
        mesh,
        kind: form.kind(),
        cfg: *cfg,
    };
    let outer = |x: &mut [f64]| proj.project(x);
    let pair = inverse_iteration(&op, None, Some(&outer), cfg)?;
    let name = match flavor {
        MaxwellFlavor::Tangential => "c_m1",
        MaxwellFlavor::Normal => "c_m2",
    };
    Ok(ConstantEstimate::from_pair(name, mesh, &pair, proj.residual(&pair.vector)))
}

/// `c_mt` (tangential) or `c_mn` (normal): smallest eigenvalue of the full
/// `grad div + curl curl` form without constraint.
pub fn estimate_mixed_maxwell(mesh: &Mesh, flavor: MaxwellFlavor, cfg: &EigenConfig) -> Result<ConstantEstimate> {
    require_convex(mesh)?;
    cfg.validate()?;
    let op = Laplacian::new(mesh, maxwell_form(flavor), Flavor::Essential);
    let pair = inverse_iteration(&op, None, None, cfg)?;
    let name = match flavor {
        MaxwellFlavor::Tangential => "c_mt",
        MaxwellFlavor::Normal => "c_mn",
    };
    Ok(ConstantEstimate::from_pair(name, mesh, &pair, 0.0))
}

/// `c_pw` for scalars with zero mean on every slab of the uniform
/// `n`-decomposition along `axis` (0-based).
pub fn estimate_specialized_poincare(mesh: &Mesh, axis: usize, n: usize, cfg: &EigenConfig) -> Result<ConstantEstimate> {
    require_convex(mesh)?;
    cfg.validate()?;
    let dec = uniform_decomposition(mesh.domain(), axis, n)?;
    let groups: Vec<Vec<usize>> = dec
        .slabs
        .iter()
        .map(|s| mesh.domain().cells_in_box(&s.cell_box(mesh.dims())))
        .collect();
    let (pair, res) = neumann_cells(mesh, &groups, cfg)?;
    let mut est = ConstantEstimate::from_pair("c_pw", mesh, &pair, res);
    est.axis = Some(axis + 1);
    est.slabs = Some(n);
    est.bound = Some(dec.slab_diameter_bound / std::f64::consts::PI);
    est.limit_bound = Some(dec.limit_bound / std::f64::consts::PI);
    Ok(est)
}

/// Richardson extrapolation of two grid values for an `O(h^order)` error.
pub fn richardson(coarse: (f64, f64), fine: (f64, f64), order: f64) -> f64 {
    let (hc, vc) = coarse;
    let (hf, vf) = fine;
    let r = (hc / hf).powf(order);
    vf + (vf - vc) / (r - 1.0)
}

// ----- regularity -----------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trace {
    Tangential,
    Normal,
}

/// A vector field with closed-form first derivatives.
pub trait AnalyticField {
    fn name(&self) -> String;
    fn value(&self, x: [f64; 3]) -> [f64; 3];
    /// `J[a][b] = ∂_b φ_a`.
    fn jacobian(&self, x: [f64; 3]) -> [[f64; 3]; 3];
    /// Which trace the field claims to annihilate.
    fn trace(&self) -> Trace;
}

/// Built-in test fields on a box `(0, l_1) × (0, l_2) × (0, l_3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "field", rename_all = "snake_case")]
pub enum TestField {
    Zero,
    /// `∇u` with `u = Π sin(π x_i / l_i)`.
    SineGradient { lengths: [f64; 3] },
    /// `∇v` with `v = Π cos(π x_i / l_i)`.
    CosineGradient { lengths: [f64; 3] },
    /// `(sin(π x_2/l_2) sin(π x_3/l_3), 0, 0)`.
    SineShear { lengths: [f64; 3] },
}

fn waves(l: [f64; 3]) -> [f64; 3] {
    l.map(|l| std::f64::consts::PI / l)
}

impl AnalyticField for TestField {
    fn name(&self) -> String {
        match self {
            TestField::Zero => "zero",
            TestField::SineGradient { .. } => "sine_gradient",
            TestField::CosineGradient { .. } => "cosine_gradient",
            TestField::SineShear { .. } => "sine_shear",
        }
        .into()
    }

    fn value(&self, x: [f64; 3]) -> [f64; 3] {
        match *self {
            TestField::Zero => [0.0; 3],
            TestField::SineGradient { lengths } | TestField::CosineGradient { lengths } => {
                let k = waves(lengths);
                let sine = matches!(self, TestField::SineGradient { .. });
                let f = |a: usize| if sine { (k[a] * x[a]).sin() } else { (k[a] * x[a]).cos() };
                let df = |a: usize| if sine { k[a] * (k[a] * x[a]).cos() } else { -k[a] * (k[a] * x[a]).sin() };
                [df(0) * f(1) * f(2), f(0) * df(1) * f(2), f(0) * f(1) * df(2)]
            }
            TestField::SineShear { lengths } => {
                let k = waves(lengths);
                [(k[1] * x[1]).sin() * (k[2] * x[2]).sin(), 0.0, 0.0]
            }
        }
    }

    fn jacobian(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        match *self {
            TestField::Zero => [[0.0; 3]; 3],
            TestField::SineGradient { lengths } | TestField::CosineGradient { lengths } => {
                let k = waves(lengths);
                let sine = matches!(self, TestField::SineGradient { .. });
                // derivatives of order 0, 1, 2 of the 1D factor
                let d = |a: usize, n: usize| -> f64 {
                    let t = k[a] * x[a];
                    let (s, c) = t.sin_cos();
                    match (sine, n) {
                        (true, 0) => s,
                        (true, 1) => k[a] * c,
                        (true, _) => -k[a] * k[a] * s,
                        (false, 0) => c,
                        (false, 1) => -k[a] * s,
                        (false, _) => -k[a] * k[a] * c,
                    }
                };
                let mut j = [[0.0; 3]; 3];
                for (a, row) in j.iter_mut().enumerate() {
                    for (b, v) in row.iter_mut().enumerate() {
                        let mut p = 1.0;
                        for c in 0..3 {
                            let n = usize::from(c == a) + usize::from(c == b);
                            p *= d(c, n);
                        }
                        *v = p;
                    }
                }
                j
            }
            TestField::SineShear { lengths } => {
                let k = waves(lengths);
                let (s2, c2) = (k[1] * x[1]).sin_cos();
                let (s3, c3) = (k[2] * x[2]).sin_cos();
                [[0.0, k[1] * c2 * s3, k[2] * s2 * c3], [0.0; 3], [0.0; 3]]
            }
        }
    }

    fn trace(&self) -> Trace {
        match self {
            TestField::CosineGradient { .. } => Trace::Normal,
            _ => Trace::Tangential,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub field: String,
    pub trace: Trace,
    /// `||∇φ||²`.
    pub grad_sq: f64,
    /// `||div φ||²`.
    pub div_sq: f64,
    /// `||rot φ||²`.
    pub rot_sq: f64,
    /// Largest difference between the 3-point and 2-point Gauss rules.
    pub quadrature_error: f64,
    /// `||div φ||² + ||rot φ||² - ||∇φ||²`.
    pub margin: f64,
    /// `||∇φ||² ≤ ||div φ||² + ||rot φ||²` up to three quadrature errors.
    pub holds: bool,
}

const GAUSS2: [(f64, f64); 2] = [(-0.577_350_269_189_625_8, 1.0), (0.577_350_269_189_625_8, 1.0)];
const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// Tensor Gauss quadrature of `(|J|², (tr J)², |curl|²)` over occupied cells.
fn integrate(field: &dyn AnalyticField, d: &VoxelDomain, rule: &[(f64, f64)]) -> [f64; 3] {
    let h = d.h();
    let dims = d.dims();
    let mut acc = [0.0; 3];
    let jac = h * h * h / 8.0;
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                if !d.occupied(i, j, k) {
                    continue;
                }
                let lo = [i as f64 * h, j as f64 * h, k as f64 * h];
                for &(qz, wz) in rule {
                    for &(qy, wy) in rule {
                        for &(qx, wx) in rule {
                            let x = [
                                lo[0] + 0.5 * h * (1.0 + qx),
                                lo[1] + 0.5 * h * (1.0 + qy),
                                lo[2] + 0.5 * h * (1.0 + qz),
                            ];
                            let w = wx * wy * wz * jac;
                            let m = field.jacobian(x);
                            let g: f64 = m.iter().flatten().map(|v| v * v).sum();
                            let dv = m[0][0] + m[1][1] + m[2][2];
                            let curl = [m[2][1] - m[1][2], m[0][2] - m[2][0], m[1][0] - m[0][1]];
                            acc[0] += w * g;
                            acc[1] += w * dv * dv;
                            acc[2] += w * curl.iter().map(|v| v * v).sum::<f64>();
                        }
                    }
                }
            }
        }
    }
    acc
}

/// Samples the claimed trace condition at the center and corners of every
/// boundary face of the voxel domain.
fn check_trace(field: &dyn AnalyticField, d: &VoxelDomain) -> Result<()> {
    let h = d.h();
    let dims = d.dims();
    let scale = {
        let mut m: f64 = 0.0;
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    if d.occupied(i, j, k) {
                        let c = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h, (k as f64 + 0.5) * h];
                        m = m.max(field.value(c).iter().fold(0.0, |a: f64, v| a.max(v.abs())));
                    }
                }
            }
        }
        m.max(1.0)
    };
    let occ = |c: [isize; 3]| -> bool {
        (0..3).all(|a| c[a] >= 0 && c[a] < dims[a] as isize) && d.occupied(c[0] as usize, c[1] as usize, c[2] as usize)
    };
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                if !d.occupied(i, j, k) {
                    continue;
                }
                let p = [i as isize, j as isize, k as isize];
                for a in 0..3 {
                    for side in [-1isize, 1] {
                        let mut q = p;
                        q[a] += side;
                        if occ(q) {
                            continue;
                        }
                        let (b, c) = crate::domain::plane_axes(a);
                        let mut center = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h, (k as f64 + 0.5) * h];
                        center[a] += 0.5 * h * side as f64;
                        let mut points = vec![center];
                        for (db, dc) in [(-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5)] {
                            let mut x = center;
                            x[b] += db * h;
                            x[c] += dc * h;
                            points.push(x);
                        }
                        for x in points {
                            let v = field.value(x);
                            let bad = match field.trace() {
                                Trace::Normal => v[a].abs(),
                                Trace::Tangential => v[b].abs().max(v[c].abs()),
                            };
                            if bad > 1e-12 * scale {
                                let s = if side < 0 { "lower" } else { "upper" };
                                return Err(Error::TraceViolated(format!(
                                    "{s} face normal to x{} of cell ({i}, {j}, {k}) at {x:?}: |trace| = {bad:e}",
                                    a + 1
                                )));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Evaluates `||∇φ||²`, `||div φ||²` and `||rot φ||²` of an analytic field
/// by Gauss quadrature on the voxel domain.
pub fn check_regularity(field: &dyn AnalyticField, d: &VoxelDomain) -> Result<RegularityReport> {
    if !d.is_convex() {
        return Err(Error::NotConvex);
    }
    check_trace(field, d)?;
    let q3 = integrate(field, d, &GAUSS3);
    let q2 = integrate(field, d, &GAUSS2);
    let err = (0..3).map(|i| (q3[i] - q2[i]).abs()).fold(0.0, f64::max);
    let margin = q3[1] + q3[2] - q3[0];
    Ok(RegularityReport {
        field: field.name(),
        trace: field.trace(),
        grad_sq: q3[0],
        div_sq: q3[1],
        rot_sq: q3[2],
        quadrature_error: err,
        margin,
        holds: margin >= -3.0 * err - 1e-12 * q3[0].max(1.0),
    })
}

// ----- bounds report ----------------------------------------------------------

/// Discretization slacks used for pass flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slack {
    /// Relative slack for `c_p ≤ d/π`.
    pub poincare: f64,
    /// Relative slack for Maxwell and specialized bounds.
    pub maxwell: f64,
    /// Allowed relative gap `|c_m1 - c_m2| / c_m1`.
    pub flavors: f64,
    /// Allowed relative gap `|c_mn - c_p| / c_p`.
    pub mixed: f64,
}

impl Default for Slack {
    fn default() -> Self {
        Self {
            poincare: 0.02,
            maxwell: 0.03,
            flavors: 0.01,
            mixed: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; for equalities `-|lhs - rhs|`.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub convex: bool,
    pub h: f64,
    pub d: f64,
    pub d23: f64,
    pub d13: f64,
    pub d12: f64,
    pub d_over_pi: f64,
    pub max_djk_over_pi: f64,
    /// `max d_jk < d`, i.e. the projected bound is sharper.
    pub improvement: bool,
    pub estimates: Vec<ConstantEstimate>,
    pub inequalities: Vec<Inequality>,
    pub slack: Slack,
    pub warnings: Vec<String>,
}

/// Which estimates [`bounds_report`] should compute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantRequest {
    pub poincare: bool,
    pub friedrichs: bool,
    pub maxwell_tangential: bool,
    pub maxwell_normal: bool,
    pub mixed_tangential: bool,
    pub mixed_normal: bool,
    /// `(axis, N)` pairs, 0-based axes.
    pub specialized: Vec<(usize, usize)>,
}

impl ConstantRequest {
    pub fn none() -> Self {
        Self {
            poincare: false,
            friedrichs: false,
            maxwell_tangential: false,
            maxwell_normal: false,
            mixed_tangential: false,
            mixed_normal: false,
            specialized: Vec::new(),
        }
    }

    pub fn all(specialized: Vec<(usize, usize)>) -> Self {
        Self {
            poincare: true,
            friedrichs: true,
            maxwell_tangential: true,
            maxwell_normal: true,
            mixed_tangential: true,
            mixed_normal: true,
            specialized,
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::none()
    }
}

impl BoundsReport {
    /// Geometry part only.
    pub fn geometry(d: &VoxelDomain) -> Self {
        let pi = std::f64::consts::PI;
        let dd = diameter(d);
        let [d23, d13, d12] = projected_diameters(d);
        let max_djk = d23.max(d13).max(d12);
        Self {
            convex: d.is_convex(),
            h: d.h(),
            d: dd,
            d23,
            d13,
            d12,
            d_over_pi: dd / pi,
            max_djk_over_pi: max_djk / pi,
            improvement: max_djk < dd * (1.0 - 1e-12),
            estimates: Vec::new(),
            inequalities: Vec::new(),
            slack: Slack::default(),
            warnings: Vec::new(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&ConstantEstimate> {
        self.estimates.iter().find(|e| e.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.inequalities.iter().all(|i| i.pass)
    }

    /// Recomputes the inequality rows from the stored estimates.
    pub fn evaluate(&mut self) {
        let s = self.slack;
        let mut rows = Vec::new();
        let le = |name: &str, lhs: f64, rhs: f64, slack: f64| Inequality {
            name: name.into(),
            lhs,
            rhs,
            margin: rhs - lhs,
            pass: lhs <= rhs * (1.0 + slack),
        };
        let eq = |name: &str, lhs: f64, rhs: f64, rel: f64| Inequality {
            name: name.into(),
            lhs,
            rhs,
            margin: -(lhs - rhs).abs(),
            pass: (lhs - rhs).abs() <= rel * lhs.abs().max(rhs.abs()),
        };
        let v = |n: &str| self.get(n).map(|e| e.value);
        let cp = v("c_p");
        let cm1 = v("c_m1");
        let cm2 = v("c_m2");
        if let Some(cp) = cp {
            rows.push(le("c_p <= d/pi", cp, self.d_over_pi, s.poincare));
        }
        for (n, c) in [("c_m1", cm1), ("c_m2", cm2)] {
            if let Some(c) = c {
                rows.push(le(&format!("{n} <= max d_jk/pi"), c, self.max_djk_over_pi, s.maxwell));
                if let Some(cp) = cp {
                    rows.push(le(&format!("{n} <= c_p"), c, cp, s.flavors));
                }
            }
        }
        if let (Some(a), Some(b)) = (cm1, cm2) {
            rows.push(eq("c_m1 = c_m2", a, b, s.flavors));
        }
        let pws: Vec<&ConstantEstimate> = self.estimates.iter().filter(|e| e.name == "c_pw").collect();
        for e in &pws {
            if let Some(b) = e.bound {
                let name = format!(
                    "c_pw{}(N={}) <= sqrt(d_jk^2 + l^2/N^2)/pi",
                    e.axis.unwrap_or(0),
                    e.slabs.unwrap_or(0)
                );
                rows.push(le(&name, e.value, b, s.maxwell));
            }
        }
        if !pws.is_empty() {
            let max_pw = pws.iter().map(|e| e.value).fold(0.0, f64::max);
            for (n, c) in [("c_m1", cm1), ("c_m2", cm2)] {
                if let Some(c) = c {
                    rows.push(le(&format!("{n} <= max c_pw"), c, max_pw, s.flavors));
                }
            }
        }
        if let (Some(cf), Some(cp)) = (v("c_f"), cp) {
            rows.push(Inequality {
                name: "c_f < c_p".into(),
                lhs: cf,
                rhs: cp,
                margin: cp - cf,
                pass: cf < cp,
            });
        }
        if let (Some(t), Some(n)) = (v("c_mt"), v("c_mn")) {
            rows.push(le("c_mt <= c_mn", t, n, 1e-6));
        }
        if let (Some(n), Some(cp)) = (v("c_mn"), cp) {
            rows.push(eq("c_mn = c_p", n, cp, s.mixed));
        }
        self.inequalities = rows;
    }

    /// Flat CSV: one row per bound, constant and inequality.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("kind,name,h,value,bound,margin,pass\n");
        let _ = writeln!(s, "geometry,d,{},{},,,", self.h, self.d);
        let _ = writeln!(s, "geometry,d23,{},{},,,", self.h, self.d23);
        let _ = writeln!(s, "geometry,d13,{},{},,,", self.h, self.d13);
        let _ = writeln!(s, "geometry,d12,{},{},,,", self.h, self.d12);
        let _ = writeln!(s, "bound,d/pi,{},{},,,", self.h, self.d_over_pi);
        let _ = writeln!(s, "bound,max d_jk/pi,{},{},,,", self.h, self.max_djk_over_pi);
        for e in &self.estimates {
            let name = match (e.axis, e.slabs) {
                (Some(a), Some(n)) => format!("{}{}(N={})", e.name, a, n),
                _ => e.name.clone(),
            };
            let bound = e.bound.map(|b| b.to_string()).unwrap_or_default();
            let margin = e.bound.map(|b| (b - e.value).to_string()).unwrap_or_default();
            let _ = writeln!(s, "constant,{name},{},{},{bound},{margin},", e.h, e.value);
        }
        for i in &self.inequalities {
            let _ = writeln!(s, "inequality,{},{},{},{},{},{}", i.name, self.h, i.lhs, i.rhs, i.margin, i.pass);
        }
        s
    }
}

/// Geometry bounds plus the requested estimates and inequality flags.
///
/// On non-convex domains no estimate is computed and a warning is
/// recorded; the geometry rows are still filled.
pub fn bounds_report(mesh: &Mesh, request: &ConstantRequest, cfg: &EigenConfig) -> Result<BoundsReport> {
    let mut rep = BoundsReport::geometry(mesh.domain());
    if !rep.convex {
        if !request.is_empty() {
            rep.warnings
                .push("domain is not convex: constant estimates refused, geometry bounds only".into());
        }
        return Ok(rep);
    }
    if !rep.improvement {
        rep.warnings
            .push("max d_jk equals d: the projected-diameter bound offers no improvement".into());
    }
    let mut est = Vec::new();
    if request.poincare {
        est.push(estimate_poincare(mesh, cfg)?);
    }
    if request.friedrichs {
        est.push(estimate_friedrichs(mesh, cfg)?);
    }
    if request.maxwell_tangential {
        est.push(estimate_maxwell(mesh, MaxwellFlavor::Tangential, cfg)?);
    }
    if request.maxwell_normal {
        est.push(estimate_maxwell(mesh, MaxwellFlavor::Normal, cfg)?);
    }
    if request.mixed_tangential {
        est.push(estimate_mixed_maxwell(mesh, MaxwellFlavor::Tangential, cfg)?);
    }
    if request.mixed_normal {
        est.push(estimate_mixed_maxwell(mesh, MaxwellFlavor::Normal, cfg)?);
    }
    for &(axis, n) in &request.specialized {
        est.push(estimate_specialized_poincare(mesh, axis, n, cfg)?);
    }
    rep.estimates = est;
    rep.evaluate();
    Ok(rep)
}
