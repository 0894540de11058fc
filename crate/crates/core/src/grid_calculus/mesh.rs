use rand::Rng;
use rayon::prelude::*;

use super::field::{CellField, EdgeField, FaceField, Field, FieldKind, Flavor, GridShape, Kind, NodeField, VectorKind};
use crate::domain::{CellBox, Region, VoxelDomain};
use crate::error::{Error, Result};

/// Summation order for inner products and norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    /// Fixed left-to-right order; bit-reproducible.
    #[default]
    Sequential,
    /// Chunked parallel sum on the rayon pool.
    Parallel,
}

/// The three primal difference operators of the staggered complex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stencil {
    Grad,
    Rot,
    Div,
}

impl Stencil {
    pub(crate) fn source(self) -> FieldKind {
        match self {
            Stencil::Grad => FieldKind::Node,
            Stencil::Rot => FieldKind::Edge,
            Stencil::Div => FieldKind::Face,
        }
    }

    pub(crate) fn target(self) -> FieldKind {
        match self {
            Stencil::Grad => FieldKind::Edge,
            Stencil::Rot => FieldKind::Face,
            Stencil::Div => FieldKind::Cell,
        }
    }
}

#[inline]
fn lin(shape: [usize; 3], p: [usize; 3]) -> usize {
    p[0] + shape[0] * (p[1] + shape[1] * p[2])
}

/// Staggered grid over a voxel domain: nodes, edges, faces and cells of the
/// bounding cuboid, with per-DOF support masks and control volumes.
///
/// A DOF belongs to the closure of the domain when at least one incident
/// cell is occupied and to its interior when all incident cells are.
/// Control volumes are `h^3 * (occupied incident cells) / (incident cells)`,
/// i.e. half and quarter volumes along the boundary.
#[derive(Debug, Clone)]
pub struct Mesh {
    domain: VoxelDomain,
    shape: GridShape,
    weights: [Vec<f64>; 4],
    interior: [Vec<bool>; 4],
    closure: [Vec<bool>; 4],
}

impl Mesh {
    pub fn new(domain: &VoxelDomain) -> Self {
        let dims = domain.dims();
        let h = domain.h();
        let shape = GridShape { dims, h };
        let vol = h * h * h;
        let mut weights: [Vec<f64>; 4] = Default::default();
        let mut interior: [Vec<bool>; 4] = Default::default();
        let mut closure: [Vec<bool>; 4] = Default::default();
        for kind in [FieldKind::Node, FieldKind::Edge, FieldKind::Face, FieldKind::Cell] {
            let len = kind.len(dims);
            let mut w = Vec::with_capacity(len);
            let mut int = Vec::with_capacity(len);
            let mut clo = Vec::with_capacity(len);
            let full = kind.cells_per_dof();
            for comp in 0..kind.ncomp() {
                let s = kind.comp_shape(dims, comp);
                for k in 0..s[2] {
                    for j in 0..s[1] {
                        for i in 0..s[0] {
                            let n = count_incident(domain, kind, comp, [i, j, k], None);
                            w.push(vol * n as f64 / full as f64);
                            int.push(n == full);
                            clo.push(n > 0);
                        }
                    }
                }
            }
            weights[kind as usize] = w;
            interior[kind as usize] = int;
            closure[kind as usize] = clo;
        }
        Self {
            domain: domain.clone(),
            shape,
            weights,
            interior,
            closure,
        }
    }

    pub fn domain(&self) -> &VoxelDomain {
        &self.domain
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn dims(&self) -> [usize; 3] {
        self.shape.dims
    }

    pub fn h(&self) -> f64 {
        self.shape.h
    }

    /// Control volume of every DOF of a kind (zero off the closure).
    pub fn weights(&self, kind: FieldKind) -> &[f64] {
        &self.weights[kind as usize]
    }

    /// Support mask of a flavor: interior DOFs for essential, closure DOFs
    /// for natural. Cells have a single support, the occupied cells.
    pub fn support(&self, kind: FieldKind, flavor: Flavor) -> &[bool] {
        match flavor {
            Flavor::Essential if kind != FieldKind::Cell => &self.interior[kind as usize],
            _ => &self.closure[kind as usize],
        }
    }

    pub fn support_size(&self, kind: FieldKind, flavor: Flavor) -> usize {
        self.support(kind, flavor).iter().filter(|&&s| s).count()
    }

    fn check<K: Kind>(&self, f: &Field<K>) -> Result<()> {
        if f.shape() != self.shape {
            return Err(Error::GridMismatch(format!(
                "field on dims {:?}/h {} used with mesh dims {:?}/h {}",
                f.shape().dims,
                f.shape().h,
                self.shape.dims,
                self.shape.h
            )));
        }
        Ok(())
    }

    // ----- construction -------------------------------------------------

    pub fn zeros<K: Kind>(&self, flavor: Flavor) -> Field<K> {
        Field::new_unchecked(self.shape, flavor, vec![0.0; K::KIND.len(self.shape.dims)])
    }

    /// Wraps raw values, zeroing everything outside the flavor's support.
    pub fn field_from_vec<K: Kind>(&self, flavor: Flavor, mut data: Vec<f64>) -> Result<Field<K>> {
        if data.len() != K::KIND.len(self.shape.dims) {
            return Err(Error::GridMismatch(format!(
                "{:?} field needs {} values, got {}",
                K::KIND,
                K::KIND.len(self.shape.dims),
                data.len()
            )));
        }
        mask_in_place(&mut data, self.support(K::KIND, flavor));
        Ok(Field::new_unchecked(self.shape, flavor, data))
    }

    /// Samples `f(component, position)` at DOF locations: nodes, edge
    /// midpoints, face centers or cell centers, in bounding-cuboid
    /// coordinates. Values off the flavor's support are zero.
    pub fn sample<K: Kind>(&self, flavor: Flavor, f: impl Fn(usize, [f64; 3]) -> f64) -> Field<K> {
        let kind = K::KIND;
        let dims = self.shape.dims;
        let h = self.shape.h;
        let support = self.support(kind, flavor);
        let mut data = Vec::with_capacity(kind.len(dims));
        for comp in 0..kind.ncomp() {
            let s = kind.comp_shape(dims, comp);
            let shift = [0, 1, 2].map(|a| dof_shift(kind, comp, a));
            for k in 0..s[2] {
                for j in 0..s[1] {
                    for i in 0..s[0] {
                        let x = [
                            (i as f64 + shift[0]) * h,
                            (j as f64 + shift[1]) * h,
                            (k as f64 + shift[2]) * h,
                        ];
                        let idx = data.len();
                        data.push(if support[idx] { f(comp, x) } else { 0.0 });
                    }
                }
            }
        }
        Field::new_unchecked(self.shape, flavor, data)
    }

    /// Independent uniform(-1, 1) values on the flavor's support.
    pub fn random<K: Kind>(&self, flavor: Flavor, rng: &mut impl Rng) -> Field<K> {
        let support = self.support(K::KIND, flavor);
        let data = support
            .iter()
            .map(|&s| if s { rng.gen_range(-1.0..1.0) } else { 0.0 })
            .collect();
        Field::new_unchecked(self.shape, flavor, data)
    }

    /// Copy with values off the given flavor's support set to zero.
    pub fn restrict<K: Kind>(&self, f: &Field<K>, flavor: Flavor) -> Result<Field<K>> {
        self.check(f)?;
        let mut data = f.data().to_vec();
        mask_in_place(&mut data, self.support(K::KIND, flavor));
        Ok(Field::new_unchecked(self.shape, flavor, data))
    }

    /// Largest magnitude on DOFs outside the essential support.
    pub fn boundary_max_abs<K: Kind>(&self, f: &Field<K>) -> f64 {
        let int = self.support(K::KIND, Flavor::Essential);
        f.data()
            .iter()
            .zip(int)
            .filter(|(_, &s)| !s)
            .fold(0.0, |m, (v, _)| m.max(v.abs()))
    }

    // ----- primal operators ---------------------------------------------

    /// Forward differences from nodes to edges, divided by h.
    pub fn grad(&self, u: &NodeField) -> Result<EdgeField> {
        self.check(u)?;
        Ok(Field::new_unchecked(
            self.shape,
            u.flavor(),
            self.primal(Stencil::Grad, u.data()),
        ))
    }

    /// Circulation around each face divided by h (the face area is h^2 and
    /// every edge has length h).
    pub fn rot(&self, e: &EdgeField) -> Result<FaceField> {
        self.check(e)?;
        Ok(Field::new_unchecked(
            self.shape,
            e.flavor(),
            self.primal(Stencil::Rot, e.data()),
        ))
    }

    /// Net outward flux of each cell divided by h.
    pub fn div(&self, f: &FaceField) -> Result<CellField> {
        self.check(f)?;
        Ok(Field::new_unchecked(
            self.shape,
            Flavor::Natural,
            self.primal(Stencil::Div, f.data()),
        ))
    }

    // ----- dual (adjoint) operators ---------------------------------------

    /// `div† e = -grad^*`: the weighted adjoint of `grad` on node fields of
    /// the given flavor, so `<grad u, e> = -<u, div† e>` for every `u` of
    /// that flavor.
    pub fn div_dual(&self, e: &EdgeField, flavor: Flavor) -> Result<NodeField> {
        self.check(e)?;
        let mut out = self.adjoint(Stencil::Grad, flavor, e.data());
        out.iter_mut().for_each(|v| *v = -*v);
        Ok(Field::new_unchecked(self.shape, flavor, out))
    }

    /// Weighted adjoint of `rot` on edge fields of the given flavor:
    /// `<rot e, f> = <e, rot_dual f>` for every `e` of that flavor.
    pub fn rot_dual(&self, f: &FaceField, flavor: Flavor) -> Result<EdgeField> {
        self.check(f)?;
        Ok(Field::new_unchecked(
            self.shape,
            flavor,
            self.adjoint(Stencil::Rot, flavor, f.data()),
        ))
    }

    /// `-div^*` on face fields of the given flavor: the gradient of a cell
    /// scalar, with `<grad_dual q, f> = -<q, div f>` for every `f` of that
    /// flavor.
    pub fn grad_dual(&self, q: &CellField, flavor: Flavor) -> Result<FaceField> {
        self.check(q)?;
        let mut out = self.adjoint(Stencil::Div, flavor, q.data());
        out.iter_mut().for_each(|v| *v = -*v);
        Ok(Field::new_unchecked(self.shape, flavor, out))
    }

    // ----- inner products and norms -------------------------------------

    pub fn inner<K: Kind>(&self, a: &Field<K>, b: &Field<K>) -> Result<f64> {
        self.inner_with(a, b, Reduction::Sequential)
    }

    pub fn inner_with<K: Kind>(&self, a: &Field<K>, b: &Field<K>, mode: Reduction) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok(weighted_dot(a.data(), b.data(), self.weights(K::KIND), mode))
    }

    pub fn norm_l2<K: Kind>(&self, a: &Field<K>) -> Result<f64> {
        Ok(self.inner(a, a)?.max(0.0).sqrt())
    }

    pub fn norm_l1<K: Kind>(&self, a: &Field<K>) -> Result<f64> {
        self.check(a)?;
        Ok(a.data()
            .iter()
            .zip(self.weights(K::KIND))
            .map(|(v, w)| v.abs() * w)
            .sum())
    }

    /// Integral of one component over a region: every DOF contributes its
    /// value times the part of its control volume that lies in occupied
    /// cells of the region.
    pub fn component_mean<K: VectorKind>(&self, f: &Field<K>, comp: usize, region: &Region) -> Result<f64> {
        self.check(f)?;
        self.region_sum(K::KIND, f.component(comp), comp, region, |v| v)
    }

    /// L¹ norm of one component restricted to a region (same weights as
    /// [`Mesh::component_mean`]).
    pub fn component_norm_l1<K: VectorKind>(&self, f: &Field<K>, comp: usize, region: &Region) -> Result<f64> {
        self.check(f)?;
        self.region_sum(K::KIND, f.component(comp), comp, region, f64::abs)
    }

    /// Integral of a cell scalar over a region.
    pub fn cell_integral(&self, q: &CellField, region: &Region) -> Result<f64> {
        self.check(q)?;
        self.region_sum(FieldKind::Cell, q.data(), 0, region, |v| v)
    }

    /// L¹ norm of a cell scalar over a region.
    pub fn cell_norm_l1(&self, q: &CellField, region: &Region) -> Result<f64> {
        self.check(q)?;
        self.region_sum(FieldKind::Cell, q.data(), 0, region, f64::abs)
    }

    /// Weight of every DOF of one component inside a region.
    pub fn region_weights(&self, kind: FieldKind, comp: usize, region: &Region) -> Vec<f64> {
        let dims = self.shape.dims;
        let cb = region.cell_box(dims);
        let s = kind.comp_shape(dims, comp);
        let unit = self.shape.h.powi(3) / kind.cells_per_dof() as f64;
        let mut out = vec![0.0; s.iter().product()];
        for k in 0..s[2] {
            for j in 0..s[1] {
                for i in 0..s[0] {
                    let n = count_incident(&self.domain, kind, comp, [i, j, k], Some(&cb));
                    out[lin(s, [i, j, k])] = unit * n as f64;
                }
            }
        }
        out
    }

    fn region_sum(
        &self,
        kind: FieldKind,
        values: &[f64],
        comp: usize,
        region: &Region,
        map: impl Fn(f64) -> f64,
    ) -> Result<f64> {
        let cb = region.cell_box(self.shape.dims);
        if self.domain.count_in_box(&cb) == 0 {
            return Err(Error::EmptySlab {
                axis: 0,
                alpha: 0.0,
                beta: 0.0,
            });
        }
        let dims = self.shape.dims;
        let s = kind.comp_shape(dims, comp);
        let unit = self.shape.h.powi(3) / kind.cells_per_dof() as f64;
        // only DOFs adjacent to the box can have nonzero weight
        let lo = [0, 1, 2].map(|a| cb.lo[a]);
        let hi = [0, 1, 2].map(|a| (cb.hi[a] + 1).min(s[a]));
        let mut sum = 0.0;
        for k in lo[2]..hi[2] {
            for j in lo[1]..hi[1] {
                for i in lo[0]..hi[0] {
                    let v = values[lin(s, [i, j, k])];
                    if v == 0.0 {
                        continue;
                    }
                    let n = count_incident(&self.domain, kind, comp, [i, j, k], Some(&cb));
                    if n > 0 {
                        sum += map(v) * unit * n as f64;
                    }
                }
            }
        }
        Ok(sum)
    }

    // ----- raw kernels on flat vectors ----------------------------------

    /// Primal stencil applied to a flat vector, masked to the closure of the
    /// target kind.
    pub(crate) fn primal(&self, op: Stencil, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; op.target().len(self.shape.dims)];
        self.visit(op, |row, entries| {
            let mut acc = 0.0;
            for &(col, c) in entries {
                acc += c * x[col];
            }
            y[row] = acc;
        });
        mask_in_place(&mut y, &self.closure[op.target() as usize]);
        y
    }

    /// Weighted adjoint `P_flavor M_src^{-1} D^T M_tgt y`.
    pub(crate) fn adjoint(&self, op: Stencil, flavor: Flavor, y: &[f64]) -> Vec<f64> {
        let src = op.source();
        let wt = self.weights(op.target());
        let mut out = vec![0.0; src.len(self.shape.dims)];
        self.visit(op, |row, entries| {
            let v = y[row] * wt[row];
            if v != 0.0 {
                for &(col, c) in entries {
                    out[col] += c * v;
                }
            }
        });
        let ws = self.weights(src);
        let sup = self.support(src, flavor);
        for ((o, &w), &s) in out.iter_mut().zip(ws).zip(sup) {
            *o = if s { *o / w } else { 0.0 };
        }
        out
    }

    /// Diagonal of `D^* D` on the source support of a flavor:
    /// `M_src^{-1} sum_rows c^2 M_tgt`.
    pub(crate) fn normal_diagonal(&self, op: Stencil, flavor: Flavor) -> Vec<f64> {
        let src = op.source();
        let tgt = op.target();
        let wt = self.weights(tgt);
        let tsup = self.support(tgt, flavor);
        let mut out = vec![0.0; src.len(self.shape.dims)];
        self.visit(op, |row, entries| {
            if tsup[row] {
                for &(col, c) in entries {
                    out[col] += c * c * wt[row];
                }
            }
        });
        let ws = self.weights(src);
        let sup = self.support(src, flavor);
        for ((o, &w), &s) in out.iter_mut().zip(ws).zip(sup) {
            *o = if s { *o / w } else { 0.0 };
        }
        out
    }

    /// Diagonal of `D D^*` on the target support of a flavor:
    /// `sum_cols c^2 M_tgt / M_src` restricted to source DOFs in the support.
    pub(crate) fn co_normal_diagonal(&self, op: Stencil, flavor: Flavor) -> Vec<f64> {
        let src = op.source();
        let tgt = op.target();
        let ws = self.weights(src);
        let wt = self.weights(tgt);
        let ssup = self.support(src, flavor);
        let tsup = self.support(tgt, flavor);
        let mut out = vec![0.0; tgt.len(self.shape.dims)];
        self.visit(op, |row, entries| {
            if tsup[row] {
                let mut acc = 0.0;
                for &(col, c) in entries {
                    if ssup[col] {
                        acc += c * c * wt[row] / ws[col];
                    }
                }
                out[row] = acc;
            }
        });
        out
    }

    /// Calls `f(row, entries)` for every row of a primal stencil over the
    /// full bounding grid.
    pub(crate) fn visit(&self, op: Stencil, mut f: impl FnMut(usize, &[(usize, f64)])) {
        let dims = self.shape.dims;
        let inv_h = 1.0 / self.shape.h;
        match op {
            Stencil::Grad => {
                let sn = FieldKind::Node.comp_shape(dims, 0);
                let off = FieldKind::Edge.offsets(dims);
                for a in 0..3 {
                    let se = FieldKind::Edge.comp_shape(dims, a);
                    let mut row = off[a];
                    for k in 0..se[2] {
                        for j in 0..se[1] {
                            for i in 0..se[0] {
                                let p = [i, j, k];
                                let mut q = p;
                                q[a] += 1;
                                f(row, &[(lin(sn, q), inv_h), (lin(sn, p), -inv_h)]);
                                row += 1;
                            }
                        }
                    }
                }
            }
            Stencil::Rot => {
                let eoff = FieldKind::Edge.offsets(dims);
                let foff = FieldKind::Face.offsets(dims);
                for a in 0..3 {
                    let b = (a + 1) % 3;
                    let c = (a + 2) % 3;
                    let sf = FieldKind::Face.comp_shape(dims, a);
                    let sb = FieldKind::Edge.comp_shape(dims, b);
                    let sc = FieldKind::Edge.comp_shape(dims, c);
                    let mut row = foff[a];
                    for k in 0..sf[2] {
                        for j in 0..sf[1] {
                            for i in 0..sf[0] {
                                let p = [i, j, k];
                                let mut pb = p;
                                pb[b] += 1;
                                let mut pc = p;
                                pc[c] += 1;
                                // (rot E)_a = d_b E_c - d_c E_b
                                f(
                                    row,
                                    &[
                                        (eoff[c] + lin(sc, pb), inv_h),
                                        (eoff[c] + lin(sc, p), -inv_h),
                                        (eoff[b] + lin(sb, pc), -inv_h),
                                        (eoff[b] + lin(sb, p), inv_h),
                                    ],
                                );
                                row += 1;
                            }
                        }
                    }
                }
            }
            Stencil::Div => {
                let foff = FieldKind::Face.offsets(dims);
                let sfs = [0, 1, 2].map(|a| FieldKind::Face.comp_shape(dims, a));
                let mut row = 0;
                for k in 0..dims[2] {
                    for j in 0..dims[1] {
                        for i in 0..dims[0] {
                            let p = [i, j, k];
                            let mut e = [(0usize, 0.0f64); 6];
                            for a in 0..3 {
                                let mut q = p;
                                q[a] += 1;
                                e[2 * a] = (foff[a] + lin(sfs[a], q), inv_h);
                                e[2 * a + 1] = (foff[a] + lin(sfs[a], p), -inv_h);
                            }
                            f(row, &e);
                            row += 1;
                        }
                    }
                }
            }
        }
    }
}

/// Position of a DOF inside its lattice cell, in units of h.
fn dof_shift(kind: FieldKind, comp: usize, axis: usize) -> f64 {
    match kind {
        FieldKind::Node => 0.0,
        FieldKind::Edge => {
            if axis == comp {
                0.5
            } else {
                0.0
            }
        }
        FieldKind::Face => {
            if axis == comp {
                0.0
            } else {
                0.5
            }
        }
        FieldKind::Cell => 0.5,
    }
}

/// Occupied cells incident to a DOF, optionally restricted to a cell box.
fn count_incident(d: &VoxelDomain, kind: FieldKind, comp: usize, p: [usize; 3], within: Option<&CellBox>) -> usize {
    let dims = d.dims();
    let (ox, oy, oz) = (
        kind.cell_offsets(comp, 0),
        kind.cell_offsets(comp, 1),
        kind.cell_offsets(comp, 2),
    );
    let mut n = 0;
    for &dz in oz {
        for &dy in oy {
            for &dx in ox {
                let c = [p[0] as isize + dx, p[1] as isize + dy, p[2] as isize + dz];
                if (0..3).any(|a| c[a] < 0 || c[a] >= dims[a] as isize) {
                    continue;
                }
                if let Some(b) = within {
                    if !b.contains_signed(c) {
                        continue;
                    }
                }
                if d.occupied(c[0] as usize, c[1] as usize, c[2] as usize) {
                    n += 1;
                }
            }
        }
    }
    n
}

pub(crate) fn mask_in_place(x: &mut [f64], support: &[bool]) {
    for (v, &s) in x.iter_mut().zip(support) {
        if !s {
            *v = 0.0;
        }
    }
}

/// `sum_i w_i a_i b_i` in the requested summation order.
pub fn weighted_dot(a: &[f64], b: &[f64], w: &[f64], mode: Reduction) -> f64 {
    match mode {
        Reduction::Sequential => {
            let mut s = 0.0;
            for i in 0..a.len() {
                s += w[i] * a[i] * b[i];
            }
            s
        }
        Reduction::Parallel => a
            .par_chunks(8192)
            .zip(b.par_chunks(8192))
            .zip(w.par_chunks(8192))
            .map(|((a, b), w)| {
                let mut s = 0.0;
                for i in 0..a.len() {
                    s += w[i] * a[i] * b[i];
                }
                s
            })
            .sum(),
    }
}
