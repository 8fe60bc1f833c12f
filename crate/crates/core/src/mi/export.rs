//! CSV and SVG heatmaps of MI and learned `|r^t|`, plus their correlation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::table::{upper_triangle, MiTable};
use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapExport {
    pub files: Vec<PathBuf>,
    /// Pearson correlation between the upper triangles of `MI^t` and `|r^t|`;
    /// `None` when either side is constant or the type has no MI matrix.
    pub correlations: BTreeMap<u32, Option<f64>>,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Decimal rendering with 6 significant digits.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can carry into a new leading digit (9.999996 -> 10.00000).
    let rounded: f64 = s.parse().unwrap_or(x);
    if rounded.abs() >= 10f64.powi(exp + 1) && decimals > 0 {
        let decimals = decimals - 1;
        format!("{x:.decimals$}")
    } else {
        s
    }
}

/// `n x n` matrix as CSV with field names along the header row and first column.
pub fn matrix_csv(m: &[f64], names: &[String]) -> String {
    let mut out = String::from("field");
    for name in names {
        out.push(',');
        out.push_str(&csv_escape(name));
    }
    out.push('\n');
    let n = names.len();
    for (p, name) in names.iter().enumerate() {
        out.push_str(&csv_escape(name));
        for q in 0..n {
            out.push(',');
            out.push_str(&fmt_sig6(m[p * n + q]));
        }
        out.push('\n');
    }
    out
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Self-contained SVG heatmap: one `<rect>` per cell, linear white-to-blue
/// scale normalized to the off-diagonal range of this matrix, exact values
/// in `<title>` tooltips. Diagonal cells are grey.
pub fn matrix_svg(m: &[f64], names: &[String], title: &str) -> String {
    const CELL: usize = 28;
    const LABEL: usize = 150;
    const TOP: usize = 40;
    let n = names.len();
    let off: Vec<f64> = (0..n)
        .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
        .map(|(p, q)| m[p * n + q])
        .collect();
    let lo = off.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = off.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };

    let width = LABEL + n * CELL + 10;
    let height = TOP + LABEL + n * CELL;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<text x="4" y="20" font-size="14">{}</text>"#, xml_escape(title));
    let grid_top = TOP + LABEL;
    for (q, name) in names.iter().enumerate() {
        let x = LABEL + q * CELL + CELL / 2;
        let _ = writeln!(
            svg,
            r#"<text transform="translate({x},{}) rotate(-60)">{}</text>"#,
            grid_top - 4,
            xml_escape(name)
        );
    }
    for (p, name) in names.iter().enumerate() {
        let y = grid_top + p * CELL;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LABEL - 4,
            y + CELL / 2 + 4,
            xml_escape(name)
        );
        for q in 0..n {
            let x = LABEL + q * CELL;
            let v = m[p * n + q];
            let (fill, tip) = if p == q {
                ("#dddddd".to_string(), "n/a".to_string())
            } else {
                let s = ((v - lo) / span).clamp(0.0, 1.0);
                let ch = |hi: f64, lo: f64| (hi + (lo - hi) * s).round() as u8;
                (
                    format!("#{:02x}{:02x}{:02x}", ch(255.0, 8.0), ch(255.0, 48.0), ch(255.0, 107.0)),
                    format!("{v:e}"),
                )
            };
            let _ = writeln!(
                svg,
                r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="#ffffff"><title>{} x {}: {tip}</title></rect>"##,
                xml_escape(name),
                xml_escape(&names[q]),
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn write(path: PathBuf, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

/// Writes `mi_type{t}.csv/.svg` for every type with an MI matrix.
pub fn export_mi(mi: &MiTable, field_names: &[String], dir: &Path) -> Result<Vec<PathBuf>> {
    check_names(mi, field_names)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for (t, m) in mi.per_type.iter().enumerate() {
        if let Some(m) = m {
            write(dir.join(format!("mi_type{t}.csv")), &matrix_csv(m, field_names), &mut files)?;
            write(
                dir.join(format!("mi_type{t}.svg")),
                &matrix_svg(m, field_names, &format!("MI, type {t}")),
                &mut files,
            )?;
        }
    }
    Ok(files)
}

/// Writes MI and `|r^t|` heatmaps for every type plus `correlations.json`.
pub fn export_heatmaps(
    mi: &MiTable,
    params: &ModelParams,
    field_names: &[String],
    dir: &Path,
) -> Result<HeatmapExport> {
    if params.kind() != ModelKind::MtFwfm {
        return Err(Error::WrongModelKind(params.kind().to_string()));
    }
    if params.config.num_fields() != mi.num_fields || params.config.num_types != mi.per_type.len() {
        return Err(Error::ShapeMismatch(
            "MI table and model disagree on fields or types".into(),
        ));
    }
    let mut files = export_mi(mi, field_names, dir)?;
    let n = mi.num_fields;
    let mut correlations = BTreeMap::new();
    for t in 0..params.config.num_types {
        let abs_r: Vec<f64> = params
            .interaction_matrix(t)
            .into_iter()
            .map(f64::abs)
            .collect();
        write(dir.join(format!("r_type{t}.csv")), &matrix_csv(&abs_r, field_names), &mut files)?;
        write(
            dir.join(format!("r_type{t}.svg")),
            &matrix_svg(&abs_r, field_names, &format!("|r|, type {t}")),
            &mut files,
        )?;
        let corr = mi
            .upper_triangle(t as u32)
            .and_then(|m| pearson(&m, &upper_triangle(&abs_r, n)));
        correlations.insert(t as u32, corr);
    }
    let path = dir.join("correlations.json");
    write(path, &serde_json::to_string_pretty(&correlations)?, &mut files)?;
    Ok(HeatmapExport {
        files,
        correlations,
    })
}

fn check_names(mi: &MiTable, field_names: &[String]) -> Result<()> {
    if field_names.len() != mi.num_fields {
        return Err(Error::ShapeMismatch(format!(
            "{} field names for {} fields",
            field_names.len(),
            mi.num_fields
        )));
    }
    Ok(())
}
