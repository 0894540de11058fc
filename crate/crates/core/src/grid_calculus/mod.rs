//! Lowest-order staggered de Rham complex on a voxel domain.
//!
//! Scalars live on nodes, `R`-type fields on edges, `D`-type fields on faces
//! and divergences on cells:
//!
//! ```text
//! nodes --grad--> edges --rot--> faces --div--> cells
//! ```
//!
//! Each space comes in two flavors sharing the same stencils. The essential
//! flavor keeps only interior DOFs (homogeneous scalar, tangential or normal
//! trace), the natural flavor keeps every DOF of the closure. The dual
//! operators `div_dual`, `rot_dual`, `grad_dual` are the adjoints of the
//! primal ones with respect to the lumped control-volume inner products, so
//! the summation-by-parts identities hold exactly.

mod field;
mod mesh;

pub use field::{
    Cell, CellField, Edge, EdgeField, Face, FaceField, Field, FieldKind, Flavor, GridShape, Kind, Node, NodeField,
    VectorKind,
};
pub(crate) use mesh::{mask_in_place, Stencil};
pub use mesh::{weighted_dot, Mesh, Reduction};
