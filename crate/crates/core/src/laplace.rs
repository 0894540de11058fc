//! Second-order operators of the two discrete complexes, as
//! [`LinearOperator`]s on flat vectors.

use crate::grid_calculus::{mask_in_place, FieldKind, Flavor, Mesh, Stencil};
use crate::solver::LinearOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Form {
    /// `G* G` on nodes: Dirichlet (essential) or Neumann (natural).
    Nodes,
    /// `D D*` on cells: Neumann (essential faces) or Dirichlet (natural).
    Cells,
    /// `C* C + G G*` on edges.
    EdgeHodge,
    /// `C C* + D* D` on faces.
    FaceHodge,
}

impl Form {
    pub fn kind(self) -> FieldKind {
        match self {
            Form::Nodes => FieldKind::Node,
            Form::Cells => FieldKind::Cell,
            Form::EdgeHodge => FieldKind::Edge,
            Form::FaceHodge => FieldKind::Face,
        }
    }
}

pub(crate) struct Laplacian<'m> {
    pub mesh: &'m Mesh,
    pub form: Form,
    pub flavor: Flavor,
}

impl<'m> Laplacian<'m> {
    pub fn new(mesh: &'m Mesh, form: Form, flavor: Flavor) -> Self {
        Self { mesh, form, flavor }
    }

    /// Whether constants on the support span the kernel.
    pub fn has_constant_kernel(&self) -> bool {
        matches!(
            (self.form, self.flavor),
            (Form::Nodes, Flavor::Natural) | (Form::Cells, Flavor::Essential)
        )
    }

    /// Support indices, for building constant/slab deflations.
    pub fn support_indices(&self) -> Vec<usize> {
        self.support()
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(i))
            .collect()
    }
}

impl LinearOperator for Laplacian<'_> {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let m = self.mesh;
        let fl = self.flavor;
        let mut y = match self.form {
            Form::Nodes => m.adjoint(Stencil::Grad, fl, &m.primal(Stencil::Grad, x)),
            Form::Cells => m.primal(Stencil::Div, &m.adjoint(Stencil::Div, fl, x)),
            Form::EdgeHodge => {
                let mut a = m.adjoint(Stencil::Rot, fl, &m.primal(Stencil::Rot, x));
                let b = m.primal(Stencil::Grad, &m.adjoint(Stencil::Grad, fl, x));
                a.iter_mut().zip(&b).for_each(|(a, b)| *a += b);
                a
            }
            Form::FaceHodge => {
                let mut a = m.primal(Stencil::Rot, &m.adjoint(Stencil::Rot, fl, x));
                let b = m.adjoint(Stencil::Div, fl, &m.primal(Stencil::Div, x));
                a.iter_mut().zip(&b).for_each(|(a, b)| *a += b);
                a
            }
        };
        mask_in_place(&mut y, self.support());
        y
    }

    fn weights(&self) -> &[f64] {
        self.mesh.weights(self.form.kind())
    }

    fn support(&self) -> &[bool] {
        self.mesh.support(self.form.kind(), self.flavor)
    }

    fn diagonal(&self) -> Vec<f64> {
        let m = self.mesh;
        let fl = self.flavor;
        let mut d = match self.form {
            Form::Nodes => m.normal_diagonal(Stencil::Grad, fl),
            Form::Cells => m.co_normal_diagonal(Stencil::Div, fl),
            Form::EdgeHodge => {
                let mut a = m.normal_diagonal(Stencil::Rot, fl);
                let b = m.co_normal_diagonal(Stencil::Grad, fl);
                a.iter_mut().zip(&b).for_each(|(a, b)| *a += b);
                a
            }
            Form::FaceHodge => {
                let mut a = m.co_normal_diagonal(Stencil::Rot, fl);
                let b = m.normal_diagonal(Stencil::Div, fl);
                a.iter_mut().zip(&b).for_each(|(a, b)| *a += b);
                a
            }
        };
        mask_in_place(&mut d, self.support());
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::VoxelDomain;
    use crate::grid_calculus::weighted_dot;
    use crate::grid_calculus::Reduction;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn l_mesh() -> Mesh {
        Mesh::new(&VoxelDomain::from_predicate([4, 3, 3], 0.25, false, |x| x[0] < 0.5 || x[1] < 0.5).unwrap())
    }

    fn unit(op: &Laplacian, i: usize) -> Vec<f64> {
        let mut e = vec![0.0; op.support().len()];
        e[i] = 1.0;
        e
    }

    #[test]
    fn operators_are_self_adjoint_and_diagonals_match() {
        let m = l_mesh();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for form in [Form::Nodes, Form::Cells, Form::EdgeHodge, Form::FaceHodge] {
            for fl in [Flavor::Essential, Flavor::Natural] {
                let op = Laplacian::new(&m, form, fl);
                let sup = op.support().to_vec();
                let rand = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                    sup.iter().map(|&s| if s { rng.gen_range(-1.0..1.0) } else { 0.0 }).collect()
                };
                let x = rand(&mut rng);
                let y = rand(&mut rng);
                let w = op.weights();
                let a = weighted_dot(&op.apply(&x), &y, w, Reduction::Sequential);
                let b = weighted_dot(&x, &op.apply(&y), w, Reduction::Sequential);
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{form:?} {fl:?}: {a} vs {b}");
                assert!(weighted_dot(&op.apply(&x), &x, w, Reduction::Sequential) >= -1e-12);
                let diag = op.diagonal();
                for i in op.support_indices() {
                    let col = op.apply(&unit(&op, i));
                    assert!((col[i] - diag[i]).abs() <= 1e-9 * diag[i].abs().max(1.0), "{form:?} {fl:?} {i}");
                }
            }
        }
    }
}
