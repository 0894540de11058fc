use std::marker::PhantomData;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary-condition flavor of a staggered field.
///
/// `Essential` fields vanish on every boundary DOF (discrete H̊¹, R̊, D̊);
/// `Natural` fields are unconstrained on the closure of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    Essential,
    Natural,
}

impl Flavor {
    pub fn opposite(self) -> Self {
        match self {
            Flavor::Essential => Flavor::Natural,
            Flavor::Natural => Flavor::Essential,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Node = 0,
    Edge = 1,
    Face = 2,
    Cell = 3,
}

impl FieldKind {
    pub fn ncomp(self) -> usize {
        match self {
            FieldKind::Edge | FieldKind::Face => 3,
            FieldKind::Node | FieldKind::Cell => 1,
        }
    }

    /// Number of grid cells incident to one DOF of this kind.
    pub fn cells_per_dof(self) -> usize {
        match self {
            FieldKind::Node => 8,
            FieldKind::Edge => 4,
            FieldKind::Face => 2,
            FieldKind::Cell => 1,
        }
    }

    /// Lattice shape of component `comp` on a grid of `dims` cells.
    pub fn comp_shape(self, dims: [usize; 3], comp: usize) -> [usize; 3] {
        match self {
            FieldKind::Node => dims.map(|n| n + 1),
            FieldKind::Edge => {
                let mut s = dims.map(|n| n + 1);
                s[comp] = dims[comp];
                s
            }
            FieldKind::Face => {
                let mut s = dims;
                s[comp] = dims[comp] + 1;
                s
            }
            FieldKind::Cell => dims,
        }
    }

    /// Offsets (per axis) from a DOF's lattice position to its incident cells.
    pub fn cell_offsets(self, comp: usize, axis: usize) -> &'static [isize] {
        const BOTH: &[isize] = &[-1, 0];
        const SELF: &[isize] = &[0];
        match self {
            FieldKind::Node => BOTH,
            FieldKind::Edge => {
                if axis == comp {
                    SELF
                } else {
                    BOTH
                }
            }
            FieldKind::Face => {
                if axis == comp {
                    BOTH
                } else {
                    SELF
                }
            }
            FieldKind::Cell => SELF,
        }
    }

    /// Start offset of every component in the flat layout, plus the total length.
    pub fn offsets(self, dims: [usize; 3]) -> [usize; 4] {
        let mut out = [0; 4];
        for c in 0..3 {
            let len = if c < self.ncomp() {
                self.comp_shape(dims, c).iter().product()
            } else {
                0
            };
            out[c + 1] = out[c] + len;
        }
        out
    }

    pub fn len(self, dims: [usize; 3]) -> usize {
        self.offsets(dims)[3]
    }
}

/// Compile-time field kind marker.
pub trait Kind: Copy + Clone + std::fmt::Debug + Send + Sync + 'static {
    const KIND: FieldKind;
}

macro_rules! kind_marker {
    ($name:ident, $kind:expr) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        pub struct $name;
        impl Kind for $name {
            const KIND: FieldKind = $kind;
        }
    };
}

kind_marker!(Node, FieldKind::Node);
kind_marker!(Edge, FieldKind::Edge);
kind_marker!(Face, FieldKind::Face);
kind_marker!(Cell, FieldKind::Cell);

/// Marker for the vector-valued kinds.
pub trait VectorKind: Kind {}
impl VectorKind for Edge {}
impl VectorKind for Face {}

/// Grid identity shared by every field defined on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridShape {
    pub dims: [usize; 3],
    pub h: f64,
}

/// A staggered discrete field stored over the full bounding grid.
///
/// Components are concatenated in axis order; each component array is
/// x-fastest. Entries outside the flavor's support are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<K: Kind> {
    shape: GridShape,
    flavor: Flavor,
    data: Vec<f64>,
    _kind: PhantomData<K>,
}

pub type NodeField = Field<Node>;
pub type EdgeField = Field<Edge>;
pub type FaceField = Field<Face>;
pub type CellField = Field<Cell>;

impl<K: Kind> Field<K> {
    pub fn from_parts(shape: GridShape, flavor: Flavor, data: Vec<f64>) -> Result<Self> {
        let expected = K::KIND.len(shape.dims);
        if data.len() != expected {
            return Err(Error::GridMismatch(format!(
                "{:?} field on dims {:?} needs {} values, got {}",
                K::KIND,
                shape.dims,
                expected,
                data.len()
            )));
        }
        Ok(Self {
            shape,
            flavor,
            data,
            _kind: PhantomData,
        })
    }

    pub(crate) fn new_unchecked(shape: GridShape, flavor: Flavor, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), K::KIND.len(shape.dims));
        Self {
            shape,
            flavor,
            data,
            _kind: PhantomData,
        }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn kind(&self) -> FieldKind {
        K::KIND
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn component(&self, comp: usize) -> &[f64] {
        let off = K::KIND.offsets(self.shape.dims);
        &self.data[off[comp]..off[comp + 1]]
    }

    pub fn component_mut(&mut self, comp: usize) -> &mut [f64] {
        let off = K::KIND.offsets(self.shape.dims);
        &mut self.data[off[comp]..off[comp + 1]]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new_unchecked(self.shape, self.flavor, self.data.iter().map(|v| v * s).collect())
    }

    /// `self + s * other`; flavors must agree.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        if self.flavor != other.flavor {
            return Err(Error::FlavorMismatch(format!(
                "cannot add {:?} and {:?} fields",
                self.flavor, other.flavor
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect();
        Ok(Self::new_unchecked(self.shape, self.flavor, data))
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::GridMismatch(format!(
                "dims {:?}/h {} vs dims {:?}/h {}",
                self.shape.dims, self.shape.h, other.shape.dims, other.shape.h
            )));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
