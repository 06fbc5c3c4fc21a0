// Plain-text patch files.
//
//   # scheme=fibonacci
//   # basis=[1.0,1.618...,1.0,-0.618...]     (optional; row-major, for non-preset schemes)
//   # R=10000
//   # window=interval:0.0,1.618033988749895
//   # hull=([0.25],[0.001])
//   # seed=42                                (or `-` when the hull was given explicitly)
//   <integer coords, space separated>\t<physical coords, 17 significant digits>

use super::{HullPoint, PatchPoint, PointPatch};
use crate::error::{Error, Result};
use crate::scheme::{preset, CutProjectScheme, ModuleVector, Side};
use crate::window::Window;
use std::fmt::Write as _;

pub fn write_patch(patch: &PointPatch) -> String {
    let mut out = String::new();
    let scheme = &patch.scheme;
    writeln!(out, "# scheme={}", scheme.label()).unwrap();
    let is_preset = preset(scheme.label()).map(|p| p == *scheme).unwrap_or(false);
    if !is_preset {
        let desc = scheme.description();
        writeln!(out, "# basis={}", serde_json::to_string(&desc).unwrap()).unwrap();
    }
    writeln!(out, "# R={:?}", patch.r).unwrap();
    writeln!(out, "# window={}", patch.window).unwrap();
    writeln!(out, "# hull=({:?},{:?})", patch.hull.u, patch.hull.v).unwrap();
    match patch.seed {
        Some(s) => writeln!(out, "# seed={s}").unwrap(),
        None => writeln!(out, "# seed=-").unwrap(),
    }
    for p in &patch.points {
        let ints: Vec<String> = p.m.coords.iter().map(|c| c.to_string()).collect();
        let reals: Vec<String> = p.x.iter().map(|x| format!("{x:.16e}")).collect();
        writeln!(out, "{}\t{}", ints.join(" "), reals.join(" ")).unwrap();
    }
    out
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    serde_json::from_str::<Vec<f64>>(s.trim()).map_err(|e| Error::Parse(format!("`{s}`: {e}")))
}

fn parse_hull(s: &str) -> Result<HullPoint> {
    let inner = s
        .trim()
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| Error::Parse(format!("bad hull `{s}`")))?;
    let split = inner
        .find("],")
        .ok_or_else(|| Error::Parse(format!("bad hull `{s}`")))?;
    let u = parse_f64_list(&inner[..=split])?;
    let v = parse_f64_list(&inner[split + 2..])?;
    Ok(HullPoint::new(u, v))
}

/// Parses a patch file. Physical coordinates are recomputed from the integer
/// coordinates and checked against the stored values.
pub fn read_patch(text: &str) -> Result<PointPatch> {
    let mut label = None;
    let mut desc = None;
    let mut r = None;
    let mut window = None;
    let mut hull = None;
    let mut seed = None;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('#') {
            let h = h.trim();
            let (key, value) = h
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: bad header `{h}`", lineno + 1)))?;
            match key {
                "scheme" => label = Some(value.to_string()),
                "basis" => {
                    desc = Some(
                        serde_json::from_str::<crate::scheme::SchemeDescription>(value)
                            .map_err(|e| Error::Parse(format!("basis: {e}")))?,
                    )
                }
                "R" => {
                    r = Some(value.parse::<f64>().map_err(|e| Error::Parse(format!("R: {e}")))?)
                }
                "window" => window = Some(value.parse::<Window>()?),
                "hull" => hull = Some(parse_hull(value)?),
                "seed" => {
                    seed = match value {
                        "-" => None,
                        v => Some(v.parse::<u64>().map_err(|e| Error::Parse(format!("seed: {e}")))?),
                    }
                }
                _ => {}
            }
            continue;
        }
        rows.push((lineno + 1, line));
    }
    let label = label.ok_or_else(|| Error::Parse("missing `# scheme=`".into()))?;
    let scheme = match desc {
        Some(d) => CutProjectScheme::from_description(&d)?,
        None => preset(&label)?,
    };
    let r = r.ok_or_else(|| Error::Parse("missing `# R=`".into()))?;
    let window = window.ok_or_else(|| Error::Parse("missing `# window=`".into()))?;
    let mut hull = hull.ok_or_else(|| Error::Parse("missing `# hull=`".into()))?;
    let (d, n) = (scheme.d(), scheme.rank());
    if hull.u.len() != d || hull.v.len() != scheme.e() {
        return Err(Error::Parse("hull dimensions do not match the scheme".into()));
    }

    let mut points = Vec::with_capacity(rows.len());
    let mut margin = f64::INFINITY;
    for (lineno, row) in rows {
        let (ints, reals) = row
            .split_once('\t')
            .ok_or_else(|| Error::Parse(format!("line {lineno}: missing tab")))?;
        let coords: Vec<i64> = ints
            .split_whitespace()
            .map(|t| t.parse::<i64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
        let stored: Vec<f64> = reals
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
        if coords.len() != n || stored.len() != d {
            return Err(Error::Parse(format!("line {lineno}: wrong number of fields")));
        }
        let full = scheme.embed_raw(&coords);
        let x: Vec<f64> = (0..d).map(|k| full[k] + hull.u[k]).collect();
        for (a, b) in x.iter().zip(&stored) {
            if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
                return Err(Error::Parse(format!(
                    "line {lineno}: stored position {b} disagrees with lattice position {a}"
                )));
            }
        }
        let y: Vec<f64> = (0..scheme.e()).map(|k| full[d + k] + hull.v[k]).collect();
        margin = margin.min(window.signed_distance(&y).abs());
        points.push(PatchPoint {
            m: ModuleVector::new(coords, Side::Physical),
            x,
        });
    }
    hull.singular_margin = margin;
    Ok(PointPatch {
        scheme,
        window,
        hull,
        r,
        points,
        seed,
    })
}
