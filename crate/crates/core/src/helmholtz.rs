//! L²-orthogonal Helmholtz decompositions of edge and face fields.
//!
//! A vector field `φ` of flavor `f` is split as
//!
//! ```text
//! φ = d0 a + η + d1* b
//! ```
//!
//! where `d0` is the operator entering the field's space and `d1` the one
//! leaving it within the same discrete complex. For edges `d0 = grad`,
//! `d1 = rot`; for faces `d0 = grad_dual` (from cell scalars) and
//! `d1* = rot`. The harmonic part `η` is obtained by subtraction.
//!
//! | field | `Hd1` (essential scalars) | `Hd2` (natural scalars) |
//! |-------|---------------------------|-------------------------|
//! | edges | essential edges           | natural edges           |
//! | faces | natural faces             | essential faces         |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_calculus::{EdgeField, FaceField, Field, FieldKind, Flavor, Mesh, Stencil, VectorKind};
use crate::laplace::{Form, Laplacian};
use crate::solver::{indicator_projector, pcg, CgReport, LinearOperator, Stop};

pub use crate::solver::SolverConfig;

/// Which of the two decompositions to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decomposition {
    /// Gradients of scalars with vanishing boundary values.
    Hd1,
    /// Gradients of unconstrained scalars.
    Hd2,
}

impl Decomposition {
    pub fn scalar_flavor(self) -> Flavor {
        match self {
            Decomposition::Hd1 => Flavor::Essential,
            Decomposition::Hd2 => Flavor::Natural,
        }
    }

    /// Flavor a vector field of the given kind must carry.
    pub fn vector_flavor(self, kind: FieldKind) -> Flavor {
        match kind {
            FieldKind::Face => self.scalar_flavor().opposite(),
            _ => self.scalar_flavor(),
        }
    }

    /// The decomposition that applies to a field of this kind and flavor.
    pub fn of<K: VectorKind>(f: &Field<K>) -> Self {
        let scalar = match K::KIND {
            FieldKind::Face => f.flavor().opposite(),
            _ => f.flavor(),
        };
        match scalar {
            Flavor::Essential => Decomposition::Hd1,
            Flavor::Natural => Decomposition::Hd2,
        }
    }
}

fn check_flavor<K: VectorKind>(f: &Field<K>, dec: Decomposition) -> Result<Flavor> {
    let want = dec.vector_flavor(K::KIND);
    if f.flavor() != want {
        return Err(Error::FlavorMismatch(format!(
            "{:?} decomposition of {:?} fields needs the {:?} flavor, got {:?}",
            dec,
            K::KIND,
            want,
            f.flavor()
        )));
    }
    Ok(want)
}

fn stop(cfg: &SolverConfig) -> Stop {
    Stop::from_config(cfg)
}

/// Solves `L x = b` for a Laplacian, deflating constants when they span its
/// kernel.
fn solve(op: &Laplacian, b: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, CgReport)> {
    if op.has_constant_kernel() {
        let groups = vec![op.support_indices()];
        let proj = indicator_projector(&groups, op.weights());
        pcg(op, b, None, Some(&proj), stop(cfg))
    } else {
        pcg(op, b, None, None, stop(cfg))
    }
}

/// Gradient-type part `d0 a` of `phi` with `d0* d0 a = d0* phi`.
fn lower_part(mesh: &Mesh, kind: FieldKind, fl: Flavor, phi: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, CgReport)> {
    match kind {
        FieldKind::Edge => {
            let b = mesh.adjoint(Stencil::Grad, fl, phi);
            let (u, rep) = solve(&Laplacian::new(mesh, Form::Nodes, fl), &b, cfg)?;
            Ok((mesh.primal(Stencil::Grad, &u), rep))
        }
        FieldKind::Face => {
            let b = mesh.primal(Stencil::Div, phi);
            let (q, rep) = solve(&Laplacian::new(mesh, Form::Cells, fl), &b, cfg)?;
            Ok((mesh.adjoint(Stencil::Div, fl, &q), rep))
        }
        _ => unreachable!("scalar kinds have no decomposition"),
    }
}

/// Rotational part `d1* b` (edges) or `d1 b` (faces).
fn upper_part(mesh: &Mesh, kind: FieldKind, fl: Flavor, phi: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, CgReport)> {
    match kind {
        FieldKind::Edge => {
            let b = mesh.primal(Stencil::Rot, phi);
            let (f, rep) = solve(&Laplacian::new(mesh, Form::FaceHodge, fl), &b, cfg)?;
            Ok((mesh.adjoint(Stencil::Rot, fl, &f), rep))
        }
        FieldKind::Face => {
            let b = mesh.adjoint(Stencil::Rot, fl, phi);
            let (e, rep) = solve(&Laplacian::new(mesh, Form::EdgeHodge, fl), &b, cfg)?;
            Ok((mesh.primal(Stencil::Rot, &e), rep))
        }
        _ => unreachable!("scalar kinds have no decomposition"),
    }
}

/// Gradient part of a field and the remainder.
#[derive(Debug, Clone)]
pub struct GradientProjection<K: VectorKind> {
    pub gradient: Field<K>,
    pub remainder: Field<K>,
    /// Relative residual of the scalar Poisson solve, i.e. the relative
    /// co-divergence of the remainder.
    pub constraint_residual: f64,
    pub solver: CgReport,
}

/// Splits off the gradient part of `phi` (`∇H̊¹` for `Hd1`, `∇H¹` for `Hd2`).
pub fn project_gradient<K: VectorKind>(
    mesh: &Mesh,
    phi: &Field<K>,
    dec: Decomposition,
    cfg: &SolverConfig,
) -> Result<GradientProjection<K>> {
    cfg.validate()?;
    let fl = check_flavor(phi, dec)?;
    if phi.shape() != mesh.shape() {
        return Err(Error::GridMismatch("field and mesh differ".into()));
    }
    let (g, rep) = lower_part(mesh, K::KIND, fl, phi.data(), cfg)?;
    let gradient: Field<K> = mesh.field_from_vec(fl, g)?;
    let remainder = phi.axpy(-1.0, &gradient)?;
    Ok(GradientProjection {
        gradient,
        remainder,
        constraint_residual: rep.residual,
        solver: rep,
    })
}

/// Pairwise normalized inner products `|<a, b>| / ||φ||²` among the parts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Orthogonality {
    pub gradient_harmonic: f64,
    pub gradient_rotational: f64,
    pub harmonic_rotational: f64,
}

impl Orthogonality {
    pub fn max(&self) -> f64 {
        self.gradient_harmonic
            .max(self.gradient_rotational)
            .max(self.harmonic_rotational)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PartNorms {
    pub input: f64,
    pub gradient: f64,
    pub harmonic: f64,
    pub rotational: f64,
}

#[derive(Debug, Clone)]
pub struct DecompositionResult<K: VectorKind> {
    pub decomposition: Decomposition,
    pub gradient: Field<K>,
    pub harmonic: Field<K>,
    pub rotational: Field<K>,
    pub orthogonality: Orthogonality,
    /// `||φ - (sum of parts)|| / ||φ||`.
    pub reconstruction: f64,
    pub norms: PartNorms,
    pub gradient_solver: CgReport,
    pub rotational_solver: CgReport,
}

/// Serializable summary of a decomposition (no field data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSummary {
    pub decomposition: Decomposition,
    pub kind: FieldKind,
    pub flavor: Flavor,
    pub norms: PartNorms,
    pub orthogonality: Orthogonality,
    pub reconstruction: f64,
    pub gradient_iterations: usize,
    pub rotational_iterations: usize,
    pub gradient_residual: f64,
    pub rotational_residual: f64,
}

impl<K: VectorKind> DecompositionResult<K> {
    pub fn summary(&self) -> DecompositionSummary {
        DecompositionSummary {
            decomposition: self.decomposition,
            kind: K::KIND,
            flavor: self.gradient.flavor(),
            norms: self.norms,
            orthogonality: self.orthogonality,
            reconstruction: self.reconstruction,
            gradient_iterations: self.gradient_solver.iterations,
            rotational_iterations: self.rotational_solver.iterations,
            gradient_residual: self.gradient_solver.residual,
            rotational_residual: self.rotational_solver.residual,
        }
    }
}

/// Three-part decomposition `φ = gradient + harmonic + rotational`.
pub fn decompose3<K: VectorKind>(
    mesh: &Mesh,
    phi: &Field<K>,
    dec: Decomposition,
    cfg: &SolverConfig,
) -> Result<DecompositionResult<K>> {
    let proj = project_gradient(mesh, phi, dec, cfg)?;
    let fl = phi.flavor();
    let (r, rot_rep) = upper_part(mesh, K::KIND, fl, phi.data(), cfg)?;
    let rotational: Field<K> = mesh.field_from_vec(fl, r)?;
    let harmonic = proj.remainder.axpy(-1.0, &rotational)?;
    let gradient = proj.gradient;

    let mode = cfg.reduction();
    let ip = |a: &Field<K>, b: &Field<K>| mesh.inner_with(a, b, mode);
    let n2 = ip(phi, phi)?;
    let scale = if n2 > 0.0 { n2 } else { 1.0 };
    let orthogonality = Orthogonality {
        gradient_harmonic: ip(&gradient, &harmonic)?.abs() / scale,
        gradient_rotational: ip(&gradient, &rotational)?.abs() / scale,
        harmonic_rotational: ip(&harmonic, &rotational)?.abs() / scale,
    };
    let sum = gradient.axpy(1.0, &harmonic)?.axpy(1.0, &rotational)?;
    let diff = phi.axpy(-1.0, &sum)?;
    let reconstruction = ip(&diff, &diff)?.max(0.0).sqrt() / scale.sqrt();
    let norms = PartNorms {
        input: n2.max(0.0).sqrt(),
        gradient: ip(&gradient, &gradient)?.max(0.0).sqrt(),
        harmonic: ip(&harmonic, &harmonic)?.max(0.0).sqrt(),
        rotational: ip(&rotational, &rotational)?.max(0.0).sqrt(),
    };
    Ok(DecompositionResult {
        decomposition: dec,
        gradient,
        harmonic,
        rotational,
        orthogonality,
        reconstruction,
        norms,
        gradient_solver: proj.solver,
        rotational_solver: rot_rep,
    })
}

/// Rough upper bound of the norm of the first-order stencils.
fn stencil_scale(mesh: &Mesh) -> f64 {
    2.0 * 3f64.sqrt() / mesh.h()
}

#[derive(Debug, Clone)]
pub struct VectorPotential {
    /// Essential edge field with `rot Φ = φ` and vanishing dual divergence.
    pub potential: EdgeField,
    /// `||rot Φ - φ|| / ||φ||`.
    pub residual: f64,
    /// `||div† Φ|| / (s ||Φ||)` with `s` the stencil scale `2√3/h`.
    pub gauge_residual: f64,
    pub solver: CgReport,
}

/// Vector potential of a divergence-free essential face field.
///
/// Solves `(rot* rot + grad grad*) Φ = rot* φ` on essential edges and
/// removes any remaining gradient component, so `Φ` is divergence-free in
/// the dual sense. A residual above `10 tol` means `φ` has a harmonic
/// component and is reported as [`Error::HarmonicObstruction`].
pub fn vector_potential(mesh: &Mesh, phi: &FaceField, cfg: &SolverConfig) -> Result<VectorPotential> {
    cfg.validate()?;
    if phi.flavor() != Flavor::Essential {
        return Err(Error::WrongFlavor("normal"));
    }
    let norm = mesh.norm_l2(phi)?;
    let zero: EdgeField = mesh.zeros(Flavor::Essential);
    if norm == 0.0 {
        return Ok(VectorPotential {
            potential: zero,
            residual: 0.0,
            gauge_residual: 0.0,
            solver: CgReport::default(),
        });
    }
    let s = stencil_scale(mesh);
    let div = mesh.norm_l2(&mesh.div(phi)?)? / (s * norm);
    if div > 1e3 * cfg.tol {
        return Err(Error::NotDivergenceFree(div));
    }
    let fl = Flavor::Essential;
    let rhs = mesh.adjoint(Stencil::Rot, fl, phi.data());
    let hodge = Laplacian::new(mesh, Form::EdgeHodge, fl);
    let (mut e, rep) = pcg(&hodge, &rhs, None, None, stop(cfg))?;

    // gauge: remove the gradient component left by the inexact solve
    let en = weighted_dot_m(mesh, FieldKind::Edge, &e).sqrt();
    let b = mesh.adjoint(Stencil::Grad, fl, &e);
    let nodes = Laplacian::new(mesh, Form::Nodes, fl);
    let gauge_stop = Stop {
        atol: 1e-14 * s * en,
        ..stop(cfg)
    };
    let (p, _) = pcg(&nodes, &b, None, None, gauge_stop)?;
    let gp = mesh.primal(Stencil::Grad, &p);
    e.iter_mut().zip(&gp).for_each(|(e, g)| *e -= g);

    let potential: EdgeField = mesh.field_from_vec(fl, e)?;
    let rot = mesh.rot(&potential)?;
    let residual = mesh.norm_l2(&rot.axpy(-1.0, phi)?)? / norm;
    let pn = mesh.norm_l2(&potential)?;
    let gauge_residual = if pn > 0.0 {
        mesh.norm_l2(&mesh.div_dual(&potential, fl)?)? / (s * pn)
    } else {
        0.0
    };
    if residual > 10.0 * cfg.tol {
        return Err(Error::HarmonicObstruction(residual));
    }
    Ok(VectorPotential {
        potential,
        residual,
        gauge_residual,
        solver: rep,
    })
}

fn weighted_dot_m(mesh: &Mesh, kind: FieldKind, x: &[f64]) -> f64 {
    crate::grid_calculus::weighted_dot(x, x, mesh.weights(kind), Default::default())
}

/// Whole-domain component integrals of a divergence-free face field or a
/// rotation-free edge field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalMeans {
    pub kind: FieldKind,
    pub flavor: Flavor,
    /// `∫_Ω φ_i` for each component.
    pub means: [f64; 3],
    /// `|∫_Ω φ_i| / (||φ|| |Ω|^{1/2})`.
    pub relative: [f64; 3],
    /// Bound on `|∫_Ω φ_i|` from the slab/beam estimates over the whole
    /// domain; `None` for natural fields, where it does not apply.
    pub bounds: Option<[f64; 3]>,
    /// Relative size of `div φ` (faces) or `rot φ` (edges).
    pub membership_residual: f64,
}

/// Component integrals over the whole domain with the matching bound.
///
/// For essential face fields the bound of component `i` is
/// `l_i ||div φ||_{L¹}`; for essential edge fields it is
/// `l_j ||(rot φ)_k||_{L¹}` with `(i, j, k)` cyclic. Natural fields are
/// reported without a bound.
pub fn global_zero_mean_check<K: VectorKind>(mesh: &Mesh, phi: &Field<K>) -> Result<GlobalMeans> {
    use crate::domain::Region;
    let norm = mesh.norm_l2(phi)?;
    let vol = mesh.domain().volume();
    let l = mesh.domain().extents();
    let s = stencil_scale(mesh);
    let mut means = [0.0; 3];
    let mut relative = [0.0; 3];
    for c in 0..3 {
        means[c] = mesh.component_mean(phi, c, &Region::Whole)?;
        relative[c] = if norm > 0.0 { means[c].abs() / (norm * vol.sqrt()) } else { 0.0 };
    }
    let (membership, bounds) = match K::KIND {
        FieldKind::Face => {
            let f = FaceField::from_parts(phi.shape(), phi.flavor(), phi.data().to_vec())?;
            let d = mesh.div(&f)?;
            let l1 = mesh.norm_l1(&d)?;
            (mesh.norm_l2(&d)?, [l[0] * l1, l[1] * l1, l[2] * l1])
        }
        _ => {
            let e = EdgeField::from_parts(phi.shape(), phi.flavor(), phi.data().to_vec())?;
            let r = mesh.rot(&e)?;
            let mut b = [0.0; 3];
            for (i, bi) in b.iter_mut().enumerate() {
                let j = (i + 1) % 3;
                let k = (i + 2) % 3;
                *bi = l[j] * mesh.component_norm_l1(&r, k, &Region::Whole)?;
            }
            (mesh.norm_l2(&r)?, b)
        }
    };
    Ok(GlobalMeans {
        kind: K::KIND,
        flavor: phi.flavor(),
        means,
        relative,
        bounds: (phi.flavor() == Flavor::Essential).then_some(bounds),
        membership_residual: if norm > 0.0 { membership / (s * norm) } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{voxelize, GeometrySpec};
    use crate::grid_calculus::NodeField;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cube(n: usize) -> Mesh {
        Mesh::new(&voxelize(&GeometrySpec::cuboid([1.0; 3], 1.0 / n as f64)).unwrap())
    }

    #[test]
    fn flavor_table() {
        assert_eq!(Decomposition::Hd1.vector_flavor(FieldKind::Edge), Flavor::Essential);
        assert_eq!(Decomposition::Hd1.vector_flavor(FieldKind::Face), Flavor::Natural);
        assert_eq!(Decomposition::Hd2.vector_flavor(FieldKind::Edge), Flavor::Natural);
        assert_eq!(Decomposition::Hd2.vector_flavor(FieldKind::Face), Flavor::Essential);
        let m = cube(3);
        let f: FaceField = m.zeros(Flavor::Essential);
        assert_eq!(Decomposition::of(&f), Decomposition::Hd2);
    }

    #[test]
    fn mismatched_flavor_is_rejected() {
        let m = cube(3);
        let f: EdgeField = m.zeros(Flavor::Natural);
        let err = decompose3(&m, &f, Decomposition::Hd1, &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::FlavorMismatch(_)));
    }

    #[test]
    fn zero_field_has_zero_parts() {
        let m = cube(4);
        let f: FaceField = m.zeros(Flavor::Essential);
        let r = decompose3(&m, &f, Decomposition::Hd2, &SolverConfig::default()).unwrap();
        assert_eq!(r.gradient.max_abs(), 0.0);
        assert_eq!(r.harmonic.max_abs(), 0.0);
        assert_eq!(r.rotational.max_abs(), 0.0);
    }

    #[test]
    fn pure_gradient_is_reproduced() {
        let m = cube(6);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u: NodeField = m.random(Flavor::Essential, &mut rng);
        let g = m.grad(&u).unwrap();
        let cfg = SolverConfig::default();
        let p = project_gradient(&m, &g, Decomposition::Hd1, &cfg).unwrap();
        assert!(m.norm_l2(&p.remainder).unwrap() <= 1e-8 * m.norm_l2(&g).unwrap());
    }

    #[test]
    fn every_case_is_orthogonal() {
        let m = cube(5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = SolverConfig::default();
        for dec in [Decomposition::Hd1, Decomposition::Hd2] {
            let e: EdgeField = m.random(dec.vector_flavor(FieldKind::Edge), &mut rng);
            let r = decompose3(&m, &e, dec, &cfg).unwrap();
            assert!(r.orthogonality.max() <= 10.0 * cfg.tol, "{dec:?} edges {:?}", r.orthogonality);
            assert!(r.reconstruction <= 10.0 * cfg.tol);
            assert!(r.norms.harmonic <= 1e-6 * r.norms.input);
            let f: FaceField = m.random(dec.vector_flavor(FieldKind::Face), &mut rng);
            let r = decompose3(&m, &f, dec, &cfg).unwrap();
            assert!(r.orthogonality.max() <= 10.0 * cfg.tol, "{dec:?} faces {:?}", r.orthogonality);
            assert!(r.norms.harmonic <= 1e-6 * r.norms.input);
        }
    }

    #[test]
    fn vector_potential_of_zero_is_zero() {
        let m = cube(4);
        let f: FaceField = m.zeros(Flavor::Essential);
        let vp = vector_potential(&m, &f, &SolverConfig::default()).unwrap();
        assert_eq!(vp.potential.max_abs(), 0.0);
    }

    #[test]
    fn vector_potential_requires_normal_trace() {
        let m = cube(4);
        let f: FaceField = m.zeros(Flavor::Natural);
        assert!(matches!(
            vector_potential(&m, &f, &SolverConfig::default()),
            Err(Error::WrongFlavor(_))
        ));
    }

    #[test]
    fn vector_potential_rejects_sources() {
        let m = cube(4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f: FaceField = m.random(Flavor::Essential, &mut rng);
        assert!(matches!(
            vector_potential(&m, &f, &SolverConfig::default()),
            Err(Error::NotDivergenceFree(_))
        ));
    }

    #[test]
    fn global_means_of_natural_constant() {
        let m = cube(4);
        let f: FaceField = m.sample(Flavor::Natural, |c, _| if c == 0 { 1.0 } else { 0.0 });
        let g = global_zero_mean_check(&m, &f).unwrap();
        assert!((g.means[0] - 1.0).abs() < 1e-14);
        assert!(g.bounds.is_none());
    }
}
