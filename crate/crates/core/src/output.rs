//! File emission: atomic CSV/SVG/JSON writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::diagnostics::Figure2Row;
use crate::error::{Error, Result};

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// CSV with a header row and `\n` line endings. Numbers are formatted by the
/// caller, normally through [`num`].
pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("write to memory");
    for row in rows {
        w.write_record(row).expect("write to memory");
    }
    w.into_inner().expect("flush to memory")
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_atomic(path, &csv_bytes(header, rows))
}

/// Shortest string that parses back to exactly `v`: the shorter of the
/// positional and exponent forms, both of which use minimal digits.
pub fn num(v: f64) -> String {
    let plain = v.to_string();
    let exp = format!("{v:e}");
    if exp.len() < plain.len() {
        exp
    } else {
        plain
    }
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 480.0;
const MARGIN: f64 = 60.0;

fn sx(t: f64) -> f64 {
    MARGIN + t * (SVG_W - 2.0 * MARGIN)
}

fn sy(f: f64) -> f64 {
    SVG_H - MARGIN - f * (SVG_H - 2.0 * MARGIN)
}

/// Step-function polyline points for a right-continuous CDF sampled on a grid.
fn step_points(grid: &[(f64, f64)]) -> String {
    let mut pts = Vec::with_capacity(grid.len() * 2);
    let mut prev = 0.0;
    for &(t, f) in grid {
        if f.is_nan() {
            continue;
        }
        pts.push(format!("{:.3},{:.3}", sx(t), sy(prev)));
        pts.push(format!("{:.3},{:.3}", sx(t), sy(f)));
        prev = f;
    }
    pts.join(" ")
}

/// Static SVG with the posterior CDF in black and the valid-IM CDF in red
/// on `[0, 1] × [0, 1]`.
pub fn figure_svg(title: &str, rows: &[Figure2Row]) -> String {
    let bayes: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.cdf_bayes)).collect();
    let valid: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.cdf_validim)).collect();
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" viewBox=\"0 0 {SVG_W} {SVG_H}\">\n"
    ));
    s.push_str(&format!("<title>{}</title>\n", escape(title)));
    s.push_str("<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    s.push_str(&format!(
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888888\"/>\n",
        SVG_W - 2.0 * MARGIN,
        SVG_H - 2.0 * MARGIN
    ));
    for k in 0..=5 {
        let v = k as f64 / 5.0;
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{v}</text>\n",
            sx(v),
            SVG_H - MARGIN + 18.0
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"end\">{v}</text>\n",
            MARGIN - 8.0,
            sy(v) + 4.0
        ));
    }
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"14\" text-anchor=\"middle\">t</text>\n",
        SVG_W / 2.0,
        SVG_H - 15.0
    ));
    s.push_str(&format!(
        "<text x=\"20\" y=\"{:.1}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 20 {:.1})\">CDF</text>\n",
        SVG_H / 2.0,
        SVG_H / 2.0
    ));
    s.push_str(&format!(
        "<polyline id=\"bayes\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        step_points(&bayes)
    ));
    s.push_str(&format!(
        "<polyline id=\"validim\" fill=\"none\" stroke=\"red\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        step_points(&valid)
    ));
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Provenance written next to every command's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub base_seed: u64,
    /// TOML text that reproduces the run via `--config`.
    pub config_toml: String,
    pub config: ExperimentConfig,
    pub duration_secs: f64,
    pub methods: Vec<String>,
    pub outputs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}
