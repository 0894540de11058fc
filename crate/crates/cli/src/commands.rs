use std::path::Path;

use hhx_core::constants::{bounds_report, ConstantRequest, EigenConfig};
use hhx_core::domain::{self, uniform_decomposition};
use hhx_core::grid_calculus::{CellField, EdgeField, FaceField, Field, FieldKind, Flavor, Mesh, NodeField, VectorKind};
use hhx_core::helmholtz::{decompose3, Decomposition, DecompositionSummary, SolverConfig};
use hhx_core::io::{self, AnyField};
use hhx_core::zeromean::{check_remark_partial, sweep_beams, sweep_slabs, Tolerances, ZeroMeanReport};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::support::*;
use crate::{DecFlavor, DomainArgs, FieldArgs, FlavorArg, Generator, Theorem, VectorKindArg};

pub fn voxelize(rt: &Runtime, spec_path: &Path, h: Option<f64>, out: &Path) -> CliResult<()> {
    let spec = read_spec(spec_path, h)?;
    let d = domain::voxelize(&spec)?;
    let side = sidecar_path(out);
    claim_paths(&[out.to_path_buf(), side.clone()], rt.force)?;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    io::write_mask_file(out, &d)?;
    let sc = Sidecar::new(&spec, &d);
    write_json(&side, &sc)?;
    println!(
        "{} cells on a {}x{}x{} grid, h = {}, d = {:.6}, d_jk = [{:.6}, {:.6}, {:.6}]",
        sc.cells, sc.dims[0], sc.dims[1], sc.dims[2], sc.h, sc.d, sc.d_jk[0], sc.d_jk[1], sc.d_jk[2]
    );
    Ok(())
}

/// Where the analyzed field came from.
#[derive(Serialize)]
struct Source {
    file: Option<String>,
    generator: Option<String>,
    seed: u64,
    kind: FieldKind,
    flavor: Flavor,
}

fn obtain(mesh: &Mesh, input: &FieldArgs, kind: FieldKind, flavor: Flavor) -> CliResult<(AnyField, Source)> {
    let field = match (&input.field, input.generate) {
        (Some(path), _) => {
            if !path.exists() {
                return Err(CliError::Missing(format!("{}: no such file", path.display())));
            }
            let f = io::read_field_file(path)?;
            let shape = match &f {
                AnyField::Node(f) => f.shape(),
                AnyField::Edge(f) => f.shape(),
                AnyField::Face(f) => f.shape(),
                AnyField::Cell(f) => f.shape(),
            };
            if shape.dims != mesh.dims() || shape.h != mesh.h() {
                return Err(hhx_core::Error::GridMismatch(format!(
                    "field grid {:?} h={} but domain grid {:?} h={}",
                    shape.dims,
                    shape.h,
                    mesh.dims(),
                    mesh.h()
                ))
                .into());
            }
            f
        }
        (None, Some(g)) => generate(mesh, kind, flavor, g, input.seed)?,
        (None, None) => return Err(CliError::Input("pass --field FILE or --generate KIND".into())),
    };
    let (kind, flavor) = match &field {
        AnyField::Node(f) => (FieldKind::Node, f.flavor()),
        AnyField::Edge(f) => (FieldKind::Edge, f.flavor()),
        AnyField::Face(f) => (FieldKind::Face, f.flavor()),
        AnyField::Cell(f) => (FieldKind::Cell, f.flavor()),
    };
    let src = Source {
        file: input.field.as_ref().map(|p| p.display().to_string()),
        generator: input.generate.map(|g| format!("{g:?}").to_lowercase()),
        seed: input.seed,
        kind,
        flavor,
    };
    Ok((field, src))
}

fn generate(mesh: &Mesh, kind: FieldKind, fl: Flavor, g: Generator, seed: u64) -> CliResult<AnyField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ext = mesh.domain().extents();
    let circulation = |c: usize, x: [f64; 3]| {
        let (a, b) = (x[0] - ext[0] / 2.0, x[1] - ext[1] / 2.0);
        let r2 = (a * a + b * b).max(mesh.h() * mesh.h());
        [-b / r2, a / r2, 0.0][c]
    };
    Ok(match (kind, g) {
        (FieldKind::Edge, Generator::Random) => AnyField::Edge(mesh.random(fl, &mut rng)),
        (FieldKind::Face, Generator::Random) => AnyField::Face(mesh.random(fl, &mut rng)),
        (FieldKind::Edge, Generator::Gradient) => {
            let u: NodeField = mesh.random(fl, &mut rng);
            AnyField::Edge(mesh.grad(&u)?)
        }
        (FieldKind::Face, Generator::Gradient) => {
            let q: CellField = mesh.random(Flavor::Natural, &mut rng);
            AnyField::Face(mesh.grad_dual(&q, fl)?)
        }
        (FieldKind::Edge, Generator::Solenoidal) => {
            let f: FaceField = mesh.random(fl, &mut rng);
            AnyField::Edge(mesh.rot_dual(&f, fl)?)
        }
        (FieldKind::Face, Generator::Solenoidal) => {
            let e: EdgeField = mesh.random(fl, &mut rng);
            AnyField::Face(mesh.rot(&e)?)
        }
        (FieldKind::Edge, Generator::Circulation) => AnyField::Edge(mesh.sample(fl, circulation)),
        (FieldKind::Face, Generator::Circulation) => AnyField::Face(mesh.sample(fl, circulation)),
        _ => return Err(CliError::Input(format!("cannot generate {kind:?} fields"))),
    })
}

fn write_any(path: &Path, f: &AnyField) -> CliResult<()> {
    match f {
        AnyField::Node(f) => io::write_field_file(path, f)?,
        AnyField::Edge(f) => io::write_field_file(path, f)?,
        AnyField::Face(f) => io::write_field_file(path, f)?,
        AnyField::Cell(f) => io::write_field_file(path, f)?,
    }
    Ok(())
}

pub fn decompose(
    rt: &Runtime,
    dom: &DomainArgs,
    input: &FieldArgs,
    flavor: DecFlavor,
    kind: VectorKindArg,
    tol: f64,
    out: &Path,
) -> CliResult<()> {
    let (d, _) = load_domain(&dom.domain, dom.h, dom.convex)?;
    let mesh = Mesh::new(&d);
    let dec = match flavor {
        DecFlavor::Hd1 => Decomposition::Hd1,
        DecFlavor::Hd2 => Decomposition::Hd2,
    };
    let cfg = SolverConfig {
        tol,
        deterministic: rt.deterministic,
        ..SolverConfig::default()
    };
    cfg.validate()?;
    let kind = match kind {
        VectorKindArg::Edge => FieldKind::Edge,
        VectorKindArg::Face => FieldKind::Face,
    };
    let (field, src) = obtain(&mesh, input, kind, dec.vector_flavor(kind))?;
    let outs = Outputs::new(out, rt.force)?;
    let mut names = vec!["decompose.json", "gradient.hhxf", "harmonic.hhxf", "rotational.hhxf"];
    if input.generate.is_some() {
        names.push("input.hhxf");
    }
    outs.claim(&names)?;
    if input.generate.is_some() {
        write_any(&outs.path("input.hhxf"), &field)?;
    }
    let summary = match &field {
        AnyField::Edge(f) => parts(&mesh, f, dec, &cfg, &outs)?,
        AnyField::Face(f) => parts(&mesh, f, dec, &cfg, &outs)?,
        _ => return Err(CliError::Input("decompose needs an edge or face field".into())),
    };
    let meta = Meta::new("decompose", rt, input.seed, &d, json!({ "solver": cfg }));
    let limit = 10.0 * tol;
    let pass = summary.orthogonality.max() <= limit && summary.reconstruction <= limit;
    let n = summary.norms;
    write_json(
        &outs.path("decompose.json"),
        &json!({ "meta": meta, "input": src, "decomposition": summary, "pass": pass }),
    )?;
    println!(
        "norms: input {:.6e}, gradient {:.6e}, harmonic {:.6e}, rotational {:.6e}",
        n.input, n.gradient, n.harmonic, n.rotational
    );
    println!(
        "orthogonality {:.2e}, reconstruction {:.2e} ({})",
        summary.orthogonality.max(),
        summary.reconstruction,
        if pass { "pass" } else { "FAIL" }
    );
    Ok(())
}

fn parts<K: VectorKind>(
    mesh: &Mesh,
    phi: &Field<K>,
    dec: Decomposition,
    cfg: &SolverConfig,
    outs: &Outputs,
) -> CliResult<DecompositionSummary> {
    let res = decompose3(mesh, phi, dec, cfg)?;
    io::write_field_file(outs.path("gradient.hhxf"), &res.gradient)?;
    io::write_field_file(outs.path("harmonic.hhxf"), &res.harmonic)?;
    io::write_field_file(outs.path("rotational.hhxf"), &res.rotational)?;
    Ok(res.summary())
}

pub struct ZeromeanOpts {
    pub theorem: Theorem,
    pub flavor: FlavorArg,
    pub axis: Option<String>,
    pub axes: Option<String>,
    pub n: Option<usize>,
}

pub fn zeromean(rt: &Runtime, dom: &DomainArgs, input: &FieldArgs, opts: ZeromeanOpts, out: &Path) -> CliResult<()> {
    let (d, _) = load_domain(&dom.domain, dom.h, dom.convex)?;
    let mesh = Mesh::new(&d);
    let fl = match opts.flavor {
        FlavorArg::Essential => Flavor::Essential,
        FlavorArg::Natural => Flavor::Natural,
    };
    let kind = match opts.theorem {
        Theorem::D => FieldKind::Face,
        Theorem::R | Theorem::Remark => FieldKind::Edge,
    };
    let (field, src) = obtain(&mesh, input, kind, fl)?;
    if field.kind() != kind {
        return Err(CliError::Input(format!(
            "this check needs a {kind:?} field, got {:?}",
            field.kind()
        )));
    }
    let axes = match &opts.axis {
        Some(s) => parse_axes(s)?,
        None => vec![0, 1, 2],
    };
    let reports: Vec<ZeroMeanReport> = match (opts.theorem, &field) {
        (Theorem::D, AnyField::Face(phi)) => {
            let n = opts.n.unwrap_or(8);
            axes.iter().map(|&a| sweep_slabs(&mesh, phi, a, n)).collect::<Result<_, _>>()?
        }
        (Theorem::R, AnyField::Edge(phi)) => {
            let n = opts.n.unwrap_or(4);
            let pairs = match &opts.axes {
                Some(s) => {
                    let v = parse_axes(s)?;
                    if v.len() != 2 || v[0] == v[1] {
                        return Err(CliError::Input(format!("--axes needs two distinct axes, got {s:?}")));
                    }
                    vec![[v[0], v[1]]]
                }
                None => vec![[0, 1], [1, 2], [2, 0]],
            };
            pairs.iter().map(|&p| sweep_beams(&mesh, phi, p, n)).collect::<Result<_, _>>()?
        }
        (Theorem::Remark, AnyField::Edge(phi)) => {
            let n = opts.n.unwrap_or(8);
            let mut v = Vec::new();
            for &a in &axes {
                for s in uniform_decomposition(&d, a, n)?.slabs {
                    v.push(check_remark_partial(&mesh, phi, &s)?);
                }
            }
            v
        }
        _ => unreachable!("field kind checked above"),
    };

    let outs = Outputs::new(out, rt.force)?;
    let mut names = vec!["zeromean.csv", "zeromean.json"];
    if input.generate.is_some() {
        names.push("input.hhxf");
    }
    outs.claim(&names)?;
    if input.generate.is_some() {
        write_any(&outs.path("input.hhxf"), &field)?;
    }
    let meta = Meta::new("zeromean", rt, input.seed, &d, json!({ "zeromean": Tolerances::default() }));
    let mut csv = meta.csv_comment();
    for (i, r) in reports.iter().enumerate() {
        let body = r.to_csv();
        let skip = if i == 0 { 0 } else { body.find('\n').map_or(body.len(), |p| p + 1) };
        csv.push_str(&body[skip..]);
    }
    std::fs::write(outs.path("zeromean.csv"), csv)?;
    write_json(&outs.path("zeromean.json"), &json!({ "meta": meta, "input": src, "reports": reports }))?;

    let rows: usize = reports.iter().map(|r| r.rows.len()).sum();
    let control = reports.iter().any(|r| r.negative_control);
    let worst_rel = reports.iter().map(|r| r.worst_relative()).fold(0.0, f64::max);
    let pass = reports.iter().all(|r| r.all_pass());
    // rows at roundoff level carry meaningless ratios
    let inexact: Vec<f64> = reports
        .iter()
        .flat_map(|r| r.rows.iter().filter(|row| row.relative > r.tolerances.exact).map(|row| row.ratio))
        .collect();
    let exact = rows - inexact.len();
    if control {
        println!("{rows} rows, negative control (natural flavor): worst relative mean {worst_rel:.3e}");
    } else {
        let worst_ratio = inexact.iter().copied().fold(0.0, f64::max);
        println!(
            "{rows} rows, {exact} exactly zero, worst ratio {worst_ratio:.6e}, worst relative mean {worst_rel:.3e} ({})",
            if pass { "pass" } else { "FAIL" }
        );
    }
    for note in reports.iter().flat_map(|r| &r.notes) {
        eprintln!("note: {note}");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn constants(
    rt: &Runtime,
    dom: &DomainArgs,
    which: &str,
    axis: &str,
    counts: &str,
    tol: f64,
    seed: u64,
    out: &Path,
) -> CliResult<()> {
    let (d, _) = load_domain(&dom.domain, dom.h, dom.convex)?;
    let mut req = ConstantRequest::none();
    for w in which.split(',').map(str::trim).filter(|w| !w.is_empty()) {
        match w {
            "cp" => req.poincare = true,
            "cf" => req.friedrichs = true,
            "cm1" => req.maxwell_tangential = true,
            "cm2" => req.maxwell_normal = true,
            "cmt" => req.mixed_tangential = true,
            "cmn" => req.mixed_normal = true,
            "cpw" => {
                for a in parse_axes(axis)? {
                    for n in parse_counts(counts)? {
                        req.specialized.push((a, n));
                    }
                }
            }
            other => {
                return Err(CliError::Input(format!(
                    "unknown constant {other:?}; expected cp, cf, cm1, cm2, cmt, cmn or cpw"
                )))
            }
        }
    }
    let cfg = EigenConfig {
        tol,
        seed,
        inner: SolverConfig {
            deterministic: rt.deterministic,
            ..EigenConfig::default().inner
        },
        ..EigenConfig::default()
    };
    cfg.validate()?;
    let outs = Outputs::new(out, rt.force)?;
    outs.claim(&["bounds.json", "bounds.csv"])?;
    let mesh = Mesh::new(&d);
    let rep = bounds_report(&mesh, &req, &cfg)?;
    let meta = Meta::new("constants", rt, seed, &d, json!({ "eigen": cfg, "slack": rep.slack }));
    write_json(&outs.path("bounds.json"), &json!({ "meta": meta, "bounds_report": rep }))?;
    std::fs::write(outs.path("bounds.csv"), meta.csv_comment() + &rep.to_csv())?;

    println!("d/pi = {:.6}, max d_jk/pi = {:.6}, improvement {}", rep.d_over_pi, rep.max_djk_over_pi, rep.improvement);
    for e in &rep.estimates {
        let label = match (e.axis, e.slabs) {
            (Some(a), Some(n)) => format!("{}{a}(N={n})", e.name),
            _ => e.name.clone(),
        };
        println!("{label} = {:.6} (h = {}, {} outer iterations)", e.value, e.h, e.outer_iterations);
    }
    let failed: Vec<&str> = rep.inequalities.iter().filter(|i| !i.pass).map(|i| i.name.as_str()).collect();
    if !rep.inequalities.is_empty() {
        println!("{} of {} inequalities pass", rep.inequalities.len() - failed.len(), rep.inequalities.len());
    }
    for f in failed {
        eprintln!("warning: inequality {f} fails");
    }
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}
