use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use hhx_core::constants::BoundsReport;
use hhx_core::domain::{voxelize, GeometrySpec, Shape, VoxelDomain};
use hhx_core::io;
use hhx_core::Error;
use serde::{Deserialize, Serialize};

/// Exit codes.
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_MISSING: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Input(String),
    Missing(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Missing(_) => EXIT_MISSING,
            CliError::Core(e) => match e {
                Error::NotConverged { .. } | Error::HarmonicObstruction(_) => EXIT_SOLVER,
                Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => EXIT_MISSING,
                _ => EXIT_INPUT,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Input(s) | CliError::Missing(s) => f.write_str(s),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Process-wide settings derived from the environment and global flags.
#[derive(Debug, Clone, Copy)]
pub struct Runtime {
    pub threads: usize,
    pub deterministic: bool,
    pub force: bool,
}

/// Written next to every mask file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub tool: String,
    pub version: String,
    pub spec: GeometrySpec,
    pub dims: [usize; 3],
    pub h: f64,
    pub cells: usize,
    pub volume: f64,
    pub convex: bool,
    pub extents: [f64; 3],
    pub d: f64,
    /// `[d23, d13, d12]`.
    pub d_jk: [f64; 3],
    pub d_over_pi: f64,
    pub max_djk_over_pi: f64,
    pub improvement: bool,
}

impl Sidecar {
    pub fn new(spec: &GeometrySpec, d: &VoxelDomain) -> Self {
        let g = BoundsReport::geometry(d);
        Self {
            tool: "hhx".into(),
            version: hhx_core::VERSION.into(),
            spec: spec.clone(),
            dims: d.dims(),
            h: d.h(),
            cells: d.occupied_count(),
            volume: d.volume(),
            convex: d.is_convex(),
            extents: d.extents(),
            d: g.d,
            d_jk: [g.d23, g.d13, g.d12],
            d_over_pi: g.d_over_pi,
            max_djk_over_pi: g.max_djk_over_pi,
            improvement: g.improvement,
        }
    }
}

pub fn sidecar_path(mask: &Path) -> PathBuf {
    mask.with_extension("json")
}

fn read_to_string(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::Missing(format!("{}: no such file", path.display())),
        _ => e.into(),
    })
}

pub fn read_spec(path: &Path, h: Option<f64>) -> CliResult<GeometrySpec> {
    let mut spec = GeometrySpec::from_json(&read_to_string(path)?)?;
    if let Some(h) = h {
        spec.h = Some(h);
    }
    if let Shape::MaskFile { path: p, .. } = &mut spec.shape {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                *p = dir.join(&*p);
            }
        }
    }
    spec.validate()?;
    Ok(spec)
}

/// Loads a domain from a geometry spec (`.json`) or a mask file.
///
/// A mask file with a sidecar is rebuilt from the recorded spec so that
/// exact diameters and the convexity flag survive the round trip.
pub fn load_domain(path: &Path, h: Option<f64>, convex: bool) -> CliResult<(VoxelDomain, GeometrySpec)> {
    if !path.exists() {
        return Err(CliError::Missing(format!("{}: no such file", path.display())));
    }
    if path.extension().is_some_and(|e| e == "json") {
        let spec = read_spec(path, h)?;
        return Ok((voxelize(&spec)?, spec));
    }
    let side = sidecar_path(path);
    if side.exists() {
        let sc: Sidecar = serde_json::from_str(&read_to_string(&side)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", side.display())))?;
        let d = voxelize(&sc.spec)?;
        let raw = io::read_mask_file(path)?;
        if raw.dims != d.dims() || raw.h != d.h() || raw.mask != d.mask() {
            return Err(Error::Format(format!("{} does not match its sidecar {}", path.display(), side.display())).into());
        }
        return Ok((d, sc.spec));
    }
    let spec = GeometrySpec {
        shape: Shape::MaskFile {
            path: path.to_path_buf(),
            convex,
        },
        h,
    };
    Ok((voxelize(&spec)?, spec))
}

/// Output files of one command; refuses to clobber without `--force`.
pub struct Outputs {
    dir: PathBuf,
    force: bool,
}

impl Outputs {
    pub fn new(dir: &Path, force: bool) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            force,
        })
    }

    pub fn claim(&self, names: &[&str]) -> CliResult<()> {
        claim_paths(&names.iter().map(|n| self.dir.join(n)).collect::<Vec<_>>(), self.force)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

pub fn claim_paths(paths: &[PathBuf], force: bool) -> CliResult<()> {
    if force {
        return Ok(());
    }
    for p in paths {
        if p.exists() {
            return Err(CliError::Input(format!("{} exists; pass --force to overwrite", p.display())));
        }
    }
    Ok(())
}

/// Provenance embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub h: f64,
    pub dims: [usize; 3],
    pub deterministic: bool,
    pub threads: usize,
    pub tolerances: serde_json::Value,
    pub bounds: Bounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub d: f64,
    pub d_jk: [f64; 3],
    pub d_over_pi: f64,
    pub max_djk_over_pi: f64,
    pub improvement: bool,
}

impl Meta {
    pub fn new(command: &str, rt: &Runtime, seed: u64, d: &VoxelDomain, tolerances: serde_json::Value) -> Self {
        let g = BoundsReport::geometry(d);
        Self {
            tool: "hhx".into(),
            version: hhx_core::VERSION.into(),
            command: command.into(),
            seed,
            h: d.h(),
            dims: d.dims(),
            deterministic: rt.deterministic,
            threads: rt.threads,
            tolerances,
            bounds: Bounds {
                d: g.d,
                d_jk: [g.d23, g.d13, g.d12],
                d_over_pi: g.d_over_pi,
                max_djk_over_pi: g.max_djk_over_pi,
                improvement: g.improvement,
            },
        }
    }

    /// One-line CSV preamble.
    pub fn csv_comment(&self) -> String {
        format!(
            "# {} {} {} seed={} h={} d/pi={} max_djk/pi={} tolerances={}\n",
            self.tool, self.version, self.command, self.seed, self.h, self.bounds.d_over_pi, self.bounds.max_djk_over_pi, self.tolerances
        )
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    io::write_json(path, value)?;
    Ok(())
}

/// Parses a comma separated list of 1-based axes into 0-based indices.
pub fn parse_axes(s: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .map(|t| match t.trim().parse::<usize>() {
            Ok(a @ 1..=3) => Ok(a - 1),
            _ => Err(CliError::Input(format!("axis must be 1, 2 or 3, got {t:?}"))),
        })
        .collect()
}

pub fn parse_counts(s: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .map(|t| match t.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Input(format!("slab count must be a positive integer, got {t:?}"))),
        })
        .collect()
}
