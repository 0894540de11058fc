use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hhx_core::constants::{richardson, BoundsReport, ConstantEstimate};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::support::*;

const REPORTS: [&str; 3] = ["bounds.json", "decompose.json", "zeromean.json"];

#[derive(Deserialize)]
struct BoundsDoc {
    bounds_report: BoundsReport,
}

fn collect(dir: &Path, found: &mut Vec<PathBuf>) -> CliResult<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect(&p, found)?;
        } else if p.file_name().and_then(|n| n.to_str()).is_some_and(|n| REPORTS.contains(&n)) {
            found.push(p);
        }
    }
    Ok(())
}

/// Key of a convergence series: name, slab axis, slab count.
type Series = (String, Option<usize>, Option<usize>);

fn series(e: &ConstantEstimate) -> Series {
    (e.name.clone(), e.axis, e.slabs)
}

/// Paper bound the estimate is compared against.
fn bound_for(e: &ConstantEstimate, rep: &BoundsReport) -> f64 {
    match e.name.as_str() {
        "c_pw" => e.bound.unwrap_or(f64::NAN),
        "c_p" | "c_f" | "c_mn" => rep.d_over_pi,
        _ => rep.max_djk_over_pi,
    }
}

fn opt(v: Option<usize>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn report(rt: &Runtime, dir: &Path, with_richardson: bool, out: Option<&Path>) -> CliResult<()> {
    if !dir.is_dir() {
        return Err(CliError::Missing(format!("{}: no such directory", dir.display())));
    }
    let mut files = Vec::new();
    collect(dir, &mut files)?;
    if files.is_empty() {
        return Err(CliError::Missing(format!(
            "{}: no bounds.json, decompose.json or zeromean.json reports found",
            dir.display()
        )));
    }

    let mut runs = Vec::new();
    let mut estimates: Vec<(ConstantEstimate, f64)> = Vec::new();
    for f in &files {
        let rel = f.strip_prefix(dir).unwrap_or(f).to_string_lossy().replace('\\', "/");
        let value: Value = serde_json::from_str(&fs::read_to_string(f)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", f.display())))?;
        if f.ends_with("bounds.json") {
            let doc: BoundsDoc = serde_json::from_value(value.clone())
                .map_err(|e| CliError::Input(format!("{}: {e}", f.display())))?;
            let rep = doc.bounds_report;
            estimates.extend(rep.estimates.iter().map(|e| (e.clone(), bound_for(e, &rep))));
        }
        runs.push(json!({ "path": rel, "report": value }));
    }

    let mut groups: BTreeMap<Series, Vec<(ConstantEstimate, f64)>> = BTreeMap::new();
    for (e, b) in estimates {
        groups.entry(series(&e)).or_default().push((e, b));
    }
    for g in groups.values_mut() {
        g.sort_by(|a, b| b.0.h.total_cmp(&a.0.h));
    }

    let mut csv = String::from("series,name,axis,n,h,value,bound,ratio\n");
    for ((name, axis, n), rows) in &groups {
        for (e, b) in rows {
            let _ = writeln!(csv, "h,{name},{},{},{},{},{},{}", opt(*axis), opt(*n), e.h, e.value, b, e.value / b);
        }
    }
    let mut by_n: Vec<&(ConstantEstimate, f64)> = groups.values().flatten().filter(|(e, _)| e.slabs.is_some()).collect();
    by_n.sort_by(|a, b| {
        a.0.axis
            .cmp(&b.0.axis)
            .then(b.0.h.total_cmp(&a.0.h))
            .then(a.0.slabs.cmp(&b.0.slabs))
    });
    for (e, b) in by_n {
        let _ = writeln!(csv, "N,{},{},{},{},{},{},{}", e.name, opt(e.axis), opt(e.slabs), e.h, e.value, b, e.value / b);
    }

    let mut extrapolated = Vec::new();
    if with_richardson {
        for ((name, axis, n), rows) in &groups {
            let mut hs: Vec<&(ConstantEstimate, f64)> = Vec::new();
            for r in rows {
                if hs.last().is_none_or(|l| l.0.h != r.0.h) {
                    hs.push(r);
                }
            }
            if hs.len() < 2 {
                continue;
            }
            let (c, f) = (hs[hs.len() - 2], hs[hs.len() - 1]);
            let v = richardson((c.0.h, c.0.value), (f.0.h, f.0.value), 2.0);
            let _ = writeln!(csv, "richardson,{name},{},{},0,{v},{},{}", opt(*axis), opt(*n), f.1, v / f.1);
            extrapolated.push(json!({
                "name": name, "axis": axis, "slabs": n,
                "coarse_h": c.0.h, "fine_h": f.0.h, "order": 2.0, "value": v,
            }));
        }
    }

    let out = out.unwrap_or(dir);
    let outs = Outputs::new(out, rt.force)?;
    outs.claim(&["consolidated.json", "convergence.csv"])?;
    let mut doc = json!({
        "tool": "hhx",
        "version": hhx_core::VERSION,
        "runs": runs,
    });
    if with_richardson {
        doc["richardson"] = Value::Array(extrapolated);
    }
    write_json(&outs.path("consolidated.json"), &doc)?;
    fs::write(outs.path("convergence.csv"), csv)?;
    println!(
        "{} reports, {} constant series -> {}",
        files.len(),
        groups.len(),
        outs.path("consolidated.json").display()
    );
    Ok(())
}
