//! Local zero-mean checks on slabs and beams.
//!
//! For an essential face field `φ` and a slab `Ω_i = {α < x_i < β}`,
//!
//! ```text
//! |∫_{Ω_i} φ_i| ≤ (β - α) ||div φ||_{L¹(Ω)}
//! ```
//!
//! and for an essential edge field and a beam `Ω_jk` with `(i, j, k)` a
//! permutation,
//!
//! ```text
//! |∫_{Ω_jk} φ_i| ≤ (β_j - α_j) ||(rot φ)_k||_{L¹(Ω_k)}
//! ```
//!
//! where `Ω_k` is the slab sharing the beam's `k`-interval. On grid-aligned
//! subdomains both estimates hold exactly for the discrete fields: the
//! plane sums of the normal component telescope against transverse fluxes
//! that vanish on the boundary. In particular the means vanish to rounding
//! when `div φ = 0` resp. `rot φ = 0`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::domain::{beam_from_slabs, uniform_decomposition, BeamSubdomain, Region, SlabSubdomain};
use crate::error::{Error, Result};
use crate::grid_calculus::{EdgeField, FaceField, Field, Flavor, Mesh, VectorKind};

/// Tolerances attached to every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative mean below which a row counts as exactly zero.
    pub exact: f64,
    /// Allowed excess of the ratio `|mean| / bound` over 1.
    pub ratio: f64,
    /// Relative size below which the remark's hypothesis counts as met.
    pub hypothesis: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            exact: 1e-12,
            ratio: 1e-10,
            hypothesis: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Check {
    #[serde(rename = "D")]
    SlabDivergence,
    #[serde(rename = "R")]
    BeamRotation,
    #[serde(rename = "remark")]
    PartialRotation,
}

impl Check {
    fn tag(self) -> &'static str {
        match self {
            Check::SlabDivergence => "D",
            Check::BeamRotation => "R",
            Check::PartialRotation => "remark",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub region: String,
    /// 1-based component index.
    pub component: usize,
    pub mean: f64,
    /// Right side of the estimate; `None` for negative controls.
    pub bound: Option<f64>,
    /// `|mean| / bound` (0 when both vanish).
    pub ratio: f64,
    /// `|mean| / (||φ|| |Ω|^{1/2})`.
    pub relative: f64,
    pub hypothesis_met: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroMeanReport {
    pub check: Check,
    /// Natural-flavor input: the boundary hypothesis fails and rows only
    /// document the resulting means.
    pub negative_control: bool,
    pub tolerances: Tolerances,
    pub rows: Vec<Row>,
    /// Subdomain intervals that were snapped outward to grid planes.
    pub notes: Vec<String>,
}

impl ZeroMeanReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn worst_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio).fold(0.0, f64::max)
    }

    pub fn worst_relative(&self) -> f64 {
        self.rows.iter().map(|r| r.relative).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("check,region,component,mean,bound,ratio,relative,hypothesis_met,negative_control,pass\n");
        for r in &self.rows {
            let bound = r.bound.map(|b| format!("{b:e}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{:e},{},{:e},{:e},{},{},{}",
                self.check.tag(),
                r.region,
                r.component,
                r.mean,
                bound,
                r.ratio,
                r.relative,
                r.hypothesis_met,
                self.negative_control,
                r.pass
            );
        }
        s
    }
}

struct Scale {
    norm: f64,
    tol: Tolerances,
}

impl Scale {
    fn of<K: VectorKind>(mesh: &Mesh, phi: &Field<K>) -> Result<Self> {
        let norm = mesh.norm_l2(phi)? * mesh.domain().volume().sqrt();
        Ok(Self {
            norm,
            tol: Tolerances::default(),
        })
    }

    fn relative(&self, mean: f64) -> f64 {
        if self.norm > 0.0 {
            mean.abs() / self.norm
        } else {
            0.0
        }
    }

    fn row(&self, region: String, component: usize, mean: f64, bound: Option<f64>, hypothesis_met: bool) -> Row {
        let relative = self.relative(mean);
        let (ratio, pass) = match bound {
            Some(b) => {
                let ratio = if b > 0.0 {
                    mean.abs() / b
                } else if mean == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                let pass = mean.abs() <= b * (1.0 + self.tol.ratio) + self.tol.exact * self.norm;
                (ratio, pass && hypothesis_met)
            }
            None => (f64::NAN, false),
        };
        Row {
            region,
            component: component + 1,
            mean,
            bound,
            ratio: if bound.is_some() { ratio } else { 0.0 },
            relative,
            hypothesis_met,
            pass,
        }
    }
}

fn snap_notes<'a>(slabs: impl IntoIterator<Item = &'a SlabSubdomain>) -> Vec<String> {
    slabs
        .into_iter()
        .filter(|s| s.snapped)
        .map(|s| format!("axis {} interval snapped to [{}, {}]", s.axis + 1, s.alpha, s.beta))
        .collect()
}

/// Slab estimate for essential face fields.
pub fn check_thm_d(mesh: &Mesh, phi: &FaceField, slabs: &[SlabSubdomain]) -> Result<ZeroMeanReport> {
    if phi.flavor() != Flavor::Essential {
        return Err(Error::WrongFlavor("normal"));
    }
    slab_rows(mesh, phi, slabs, false)
}

/// Slab means of a natural face field; documents that the estimate needs
/// the boundary condition.
pub fn negative_control_d(mesh: &Mesh, phi: &FaceField, slabs: &[SlabSubdomain]) -> Result<ZeroMeanReport> {
    slab_rows(mesh, phi, slabs, true)
}

fn slab_rows(mesh: &Mesh, phi: &FaceField, slabs: &[SlabSubdomain], control: bool) -> Result<ZeroMeanReport> {
    let sc = Scale::of(mesh, phi)?;
    let div_l1 = mesh.norm_l1(&mesh.div(phi)?)?;
    let mut rows = Vec::with_capacity(slabs.len());
    for s in slabs {
        let region = Region::Slab(s.clone());
        let mean = mesh.component_mean(phi, s.axis, &region)?;
        let bound = (!control).then(|| s.width() * div_l1);
        rows.push(sc.row(region.label(), s.axis, mean, bound, !control));
    }
    Ok(ZeroMeanReport {
        check: Check::SlabDivergence,
        negative_control: control,
        tolerances: sc.tol,
        rows,
        notes: snap_notes(slabs),
    })
}

/// Beam estimate for essential edge fields.
pub fn check_thm_r(mesh: &Mesh, phi: &EdgeField, beams: &[BeamSubdomain]) -> Result<ZeroMeanReport> {
    if phi.flavor() != Flavor::Essential {
        return Err(Error::WrongFlavor("tangential"));
    }
    beam_rows(mesh, phi, beams, false)
}

/// Beam means of a natural edge field.
pub fn negative_control_r(mesh: &Mesh, phi: &EdgeField, beams: &[BeamSubdomain]) -> Result<ZeroMeanReport> {
    beam_rows(mesh, phi, beams, true)
}

fn beam_rows(mesh: &Mesh, phi: &EdgeField, beams: &[BeamSubdomain], control: bool) -> Result<ZeroMeanReport> {
    let sc = Scale::of(mesh, phi)?;
    let rot = mesh.rot(phi)?;
    let mut rows = Vec::with_capacity(beams.len());
    for b in beams {
        let i = b.free_axis();
        let (j, k) = (b.axes[0], b.axes[1]);
        let region = Region::Beam(b.clone());
        let mean = mesh.component_mean(phi, i, &region)?;
        let bound = if control {
            None
        } else {
            let omega_k = Region::Slab(b.second.clone());
            debug_assert_eq!(b.second.axis, k);
            Some(b.first.width() * mesh.component_norm_l1(&rot, k, &omega_k)?)
        };
        debug_assert_eq!(b.first.axis, j);
        rows.push(sc.row(region.label(), i, mean, bound, !control));
    }
    let notes = snap_notes(beams.iter().flat_map(|b| [&b.first, &b.second]));
    Ok(ZeroMeanReport {
        check: Check::BeamRotation,
        negative_control: control,
        tolerances: sc.tol,
        rows,
        notes,
    })
}

/// If `(rot φ)_k` vanishes on a slab `ω` along axis `k`, the other two
/// components of `φ` have zero mean over `ω`.
///
/// The hypothesis is checked on every face normal to `k` that carries
/// weight in `ω`; when it fails the rows are marked instead of failing.
pub fn check_remark_partial(mesh: &Mesh, phi: &EdgeField, region: &SlabSubdomain) -> Result<ZeroMeanReport> {
    if phi.flavor() != Flavor::Essential {
        return Err(Error::WrongFlavor("tangential"));
    }
    let k = region.axis;
    let sc = Scale::of(mesh, phi)?;
    let rot = mesh.rot(phi)?;
    let reg = Region::Slab(region.clone());
    let w = mesh.region_weights(crate::grid_calculus::FieldKind::Face, k, &reg);
    let rk = rot.component(k);
    let local = rk
        .iter()
        .zip(&w)
        .filter(|(_, &w)| w > 0.0)
        .fold(0.0f64, |m, (v, _)| m.max(v.abs()));
    let scale = rot.max_abs().max(phi.max_abs() / mesh.h());
    let met = scale == 0.0 || local <= sc.tol.hypothesis * scale;
    let mut rows = Vec::with_capacity(2);
    for i in (0..3).filter(|&i| i != k) {
        let mean = mesh.component_mean(phi, i, &reg)?;
        let relative = sc.relative(mean);
        rows.push(Row {
            region: reg.label(),
            component: i + 1,
            mean,
            bound: Some(0.0),
            ratio: if mean == 0.0 { 0.0 } else { f64::INFINITY },
            relative,
            hypothesis_met: met,
            pass: met && relative <= sc.tol.hypothesis,
        });
    }
    Ok(ZeroMeanReport {
        check: Check::PartialRotation,
        negative_control: false,
        tolerances: sc.tol,
        rows,
        notes: snap_notes([region]),
    })
}

/// Runs the slab estimate over all slabs of a uniform decomposition.
/// Natural-flavor input yields a negative-control report.
pub fn sweep_slabs(mesh: &Mesh, phi: &FaceField, axis: usize, n: usize) -> Result<ZeroMeanReport> {
    let dec = uniform_decomposition(mesh.domain(), axis, n)?;
    match phi.flavor() {
        Flavor::Essential => check_thm_d(mesh, phi, &dec.slabs),
        Flavor::Natural => negative_control_d(mesh, phi, &dec.slabs),
    }
}

/// Runs the beam estimate over the `n × n` beams of two uniform
/// decompositions. Beams over void parts of the bounding box are skipped.
pub fn sweep_beams(mesh: &Mesh, phi: &EdgeField, axes: [usize; 2], n: usize) -> Result<ZeroMeanReport> {
    let beams = beam_grid(mesh, axes, n)?;
    match phi.flavor() {
        Flavor::Essential => check_thm_r(mesh, phi, &beams),
        Flavor::Natural => negative_control_r(mesh, phi, &beams),
    }
}

/// All nonempty beams of an `n × n` grid on the given axes.
pub fn beam_grid(mesh: &Mesh, axes: [usize; 2], n: usize) -> Result<Vec<BeamSubdomain>> {
    let d = mesh.domain();
    let first = uniform_decomposition(d, axes[0], n)?;
    let second = uniform_decomposition(d, axes[1], n)?;
    let mut beams = Vec::with_capacity(n * n);
    for a in &first.slabs {
        for b in &second.slabs {
            match beam_from_slabs(d, a.clone(), b.clone()) {
                Ok(beam) => beams.push(beam),
                Err(Error::EmptySlab { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(beams)
}
