//! Binary mask (`HHXM`) and field (`HHXF`) files.
//!
//! Mask file layout (little endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `HHXM` |
//! | 1     | version (1) |
//! | 12    | dims `n1 n2 n3` as `u32` |
//! | 8     | `h` as `f64` |
//! | ⌈n/8⌉ | occupancy bits, x fastest, least significant bit first |
//!
//! Field file layout (little endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `HHXF` |
//! | 1     | version (1) |
//! | 1     | kind: 0 node, 1 edge, 2 face, 3 cell |
//! | 1     | flavor: 0 essential, 1 natural |
//! | 12    | dims as `u32` |
//! | 8     | `h` as `f64` |
//! | 8·len | values as `f64`, components in axis order, x fastest |

use std::fs;
use std::path::Path;

use crate::domain::VoxelDomain;
use crate::error::{Error, Result};
use crate::grid_calculus::{CellField, EdgeField, FaceField, Field, FieldKind, Flavor, GridShape, Kind, NodeField};

pub const MASK_MAGIC: &[u8; 4] = b"HHXM";
pub const FIELD_MAGIC: &[u8; 4] = b"HHXF";
pub const FORMAT_VERSION: u8 = 1;

/// Contents of a mask file before domain validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMask {
    pub dims: [usize; 3],
    pub h: f64,
    pub mask: Vec<bool>,
}

pub fn encode_mask(dims: [usize; 3], h: f64, mask: &[bool]) -> Vec<u8> {
    let mut out = Vec::with_capacity(25 + mask.len() / 8 + 1);
    out.extend_from_slice(MASK_MAGIC);
    out.push(FORMAT_VERSION);
    for n in dims {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    out.extend_from_slice(&h.to_le_bytes());
    let mut bytes = vec![0u8; mask.len().div_ceil(8)];
    for (i, &m) in mask.iter().enumerate() {
        if m {
            bytes[i / 8] |= 1 << (i % 8);
        }
    }
    out.extend_from_slice(&bytes);
    out
}

pub fn decode_mask(bytes: &[u8]) -> Result<RawMask> {
    let mut r = Reader::new(bytes);
    r.magic(MASK_MAGIC)?;
    r.version()?;
    let dims = r.dims()?;
    let h = r.f64()?;
    let n: usize = dims.iter().product();
    let packed = r.take(n.div_ceil(8))?;
    r.finish()?;
    let mask = (0..n).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect();
    Ok(RawMask { dims, h, mask })
}

pub fn write_mask_file(path: impl AsRef<Path>, d: &VoxelDomain) -> Result<()> {
    fs::write(path, encode_mask(d.dims(), d.h(), d.mask()))?;
    Ok(())
}

pub fn read_mask_file(path: impl AsRef<Path>) -> Result<RawMask> {
    decode_mask(&fs::read(path)?)
}

/// A field of any kind, as stored in a field file.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyField {
    Node(NodeField),
    Edge(EdgeField),
    Face(FaceField),
    Cell(CellField),
}

impl AnyField {
    pub fn kind(&self) -> FieldKind {
        match self {
            AnyField::Node(_) => FieldKind::Node,
            AnyField::Edge(_) => FieldKind::Edge,
            AnyField::Face(_) => FieldKind::Face,
            AnyField::Cell(_) => FieldKind::Cell,
        }
    }
}

pub fn encode_field<K: Kind>(f: &Field<K>) -> Vec<u8> {
    let mut out = Vec::with_capacity(27 + 8 * f.data().len());
    out.extend_from_slice(FIELD_MAGIC);
    out.push(FORMAT_VERSION);
    out.push(K::KIND as u8);
    out.push(match f.flavor() {
        Flavor::Essential => 0,
        Flavor::Natural => 1,
    });
    for n in f.shape().dims {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    out.extend_from_slice(&f.shape().h.to_le_bytes());
    for v in f.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<AnyField> {
    let mut r = Reader::new(bytes);
    r.magic(FIELD_MAGIC)?;
    r.version()?;
    let kind = match r.u8()? {
        0 => FieldKind::Node,
        1 => FieldKind::Edge,
        2 => FieldKind::Face,
        3 => FieldKind::Cell,
        k => return Err(Error::Format(format!("unknown field kind byte {k}"))),
    };
    let flavor = match r.u8()? {
        0 => Flavor::Essential,
        1 => Flavor::Natural,
        f => return Err(Error::Format(format!("unknown flavor byte {f}"))),
    };
    let dims = r.dims()?;
    let h = r.f64()?;
    let len = kind.len(dims);
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        data.push(r.f64()?);
    }
    r.finish()?;
    let shape = GridShape { dims, h };
    Ok(match kind {
        FieldKind::Node => AnyField::Node(Field::from_parts(shape, flavor, data)?),
        FieldKind::Edge => AnyField::Edge(Field::from_parts(shape, flavor, data)?),
        FieldKind::Face => AnyField::Face(Field::from_parts(shape, flavor, data)?),
        FieldKind::Cell => AnyField::Cell(Field::from_parts(shape, flavor, data)?),
    })
}

pub fn write_field_file<K: Kind>(path: impl AsRef<Path>, f: &Field<K>) -> Result<()> {
    fs::write(path, encode_field(f))?;
    Ok(())
}

pub fn read_field_file(path: impl AsRef<Path>) -> Result<AnyField> {
    decode_field(&fs::read(path)?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: impl AsRef<Path>, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format(format!(
                "truncated file: need {} bytes at offset {}, have {}",
                n,
                self.pos,
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, m: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != m {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(m)
            )));
        }
        Ok(())
    }

    fn version(&mut self) -> Result<()> {
        match self.u8()? {
            FORMAT_VERSION => Ok(()),
            v => Err(Error::Format(format!("unsupported version {v}"))),
        }
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn dims(&mut self) -> Result<[usize; 3]> {
        let mut d = [0usize; 3];
        for n in &mut d {
            *n = u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize;
        }
        if d.contains(&0) {
            return Err(Error::Format(format!("zero grid dimension in {d:?}")));
        }
        Ok(d)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{voxelize, GeometrySpec};
    use crate::grid_calculus::Mesh;
    use proptest::prelude::*;

    #[test]
    fn mask_header_layout() {
        let bytes = encode_mask([2, 2, 2], 0.5, &[true; 8]);
        assert_eq!(&bytes[..4], b"HHXM");
        assert_eq!(bytes[4], 1);
        assert_eq!(&bytes[5..9], &2u32.to_le_bytes());
        assert_eq!(&bytes[17..25], &0.5f64.to_le_bytes());
        assert_eq!(bytes[25], 0xff);
        assert_eq!(bytes.len(), 26);
    }

    #[test]
    fn field_header_layout() {
        let d = voxelize(&GeometrySpec::cuboid([1.0; 3], 0.5)).unwrap();
        let m = Mesh::new(&d);
        let f: FaceField = m.sample(Flavor::Essential, |c, _| c as f64);
        let bytes = encode_field(&f);
        assert_eq!(&bytes[..4], b"HHXF");
        assert_eq!(&bytes[4..7], &[1, 2, 0]);
        assert_eq!(bytes.len(), 27 + 8 * FieldKind::Face.len([2, 2, 2]));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let mut bytes = encode_mask([1, 1, 1], 1.0, &[true]);
        assert!(decode_mask(&bytes[..10]).is_err());
        bytes[0] = b'X';
        assert!(matches!(decode_mask(&bytes), Err(Error::Format(_))));
        let mut bytes = encode_mask([1, 1, 1], 1.0, &[true]);
        bytes.push(0);
        assert!(decode_mask(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn mask_roundtrip(dims in prop::array::uniform3(1usize..6), seed in any::<u64>(), h in 0.01f64..2.0) {
            let n: usize = dims.iter().product();
            let mask: Vec<bool> = (0..n).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
            let raw = decode_mask(&encode_mask(dims, h, &mask)).unwrap();
            prop_assert_eq!(raw, RawMask { dims, h, mask });
        }

        #[test]
        fn field_roundtrip(values in prop::collection::vec(-1e6f64..1e6, 54)) {
            // an edge field on a 2x2x2 grid has 3 * 2 * 3 * 3 = 54 values
            let shape = GridShape { dims: [2, 2, 2], h: 0.25 };
            let f = EdgeField::from_parts(shape, Flavor::Natural, values).unwrap();
            match decode_field(&encode_field(&f)).unwrap() {
                AnyField::Edge(g) => prop_assert_eq!(g, f),
                other => prop_assert!(false, "wrong kind {:?}", other.kind()),
            }
        }
    }
}
