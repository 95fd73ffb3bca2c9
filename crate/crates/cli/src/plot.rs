//! Minimal SVG line plots of the CSV tables of a run directory.

use std::fmt::Write as _;
use std::path::Path;

use floqmem::{Error, Result};

/// Parsed CSV: header plus numeric columns (`nan` allowed).
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::InvalidParameter(format!("{} is empty", path.display())))?
            .split(',')
            .map(str::to_string)
            .collect();
        let rows = lines
            .map(|l| {
                l.split(',')
                    .map(|c| c.parse::<f64>().unwrap_or(f64::NAN))
                    .collect()
            })
            .collect();
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidParameter(format!("missing column {name}")))?;
        Ok(self
            .rows
            .iter()
            .map(|r| r.get(k).copied().unwrap_or(f64::NAN))
            .collect())
    }
}

const W: f64 = 640.0;
const H: f64 = 220.0;
const PAD: f64 = 48.0;

fn bounds(v: &[f64]) -> (f64, f64) {
    let (lo, hi) = v
        .iter()
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| {
            (l.min(x), h.max(x))
        });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-300 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// One panel: several series against a shared `x`, vertical markers at
/// `marks`.
fn panel(svg: &mut String, top: f64, label: &str, x: &[f64], ys: &[&[f64]], marks: &[f64]) {
    let (x0, x1) = bounds(x);
    let all: Vec<f64> = ys.iter().flat_map(|y| y.iter().copied()).collect();
    let (y0, y1) = bounds(&all);
    let px = |v: f64| PAD + (v - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |v: f64| top + H - PAD / 2.0 - (v - y0) / (y1 - y0) * (H - PAD);
    let _ = writeln!(
        svg,
        r#"<rect x="{PAD}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        top + PAD / 2.0,
        W - 2.0 * PAD,
        H - PAD
    );
    let _ = writeln!(
        svg,
        r#"<text x="{PAD}" y="{}" font-size="12">{label}</text>"#,
        top + PAD / 2.0 - 4.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="10">{x0:.2}</text><text x="{}" y="{}" font-size="10" text-anchor="end">{x1:.2}</text>"#,
        PAD,
        top + H,
        W - PAD,
        top + H
    );
    for &m in marks {
        let _ = writeln!(
            svg,
            r#"<line x1="{0:.1}" x2="{0:.1}" y1="{1:.1}" y2="{2:.1}" stroke="gray" stroke-dasharray="3,3"/>"#,
            px(m),
            top + PAD / 2.0,
            top + H - PAD / 2.0
        );
    }
    let colors = ["#1f77b4", "#d62728"];
    for (k, y) in ys.iter().enumerate() {
        let mut d = String::new();
        let mut pen = false;
        for (&a, &b) in x.iter().zip(y.iter()) {
            if !b.is_finite() {
                pen = false;
                continue;
            }
            let _ = write!(
                d,
                "{}{:.2},{:.2} ",
                if pen { "L" } else { "M" },
                px(a),
                py(b)
            );
            pen = true;
        }
        let _ = writeln!(
            svg,
            r#"<path d="{d}" fill="none" stroke="{}"/>"#,
            colors[k % 2]
        );
    }
}

fn document(panels: usize, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n",
        H * panels as f64
    )
}

/// Renders whichever of `sweep.csv` and `quasienergies.csv` exist in `dir`.
/// Returns the written file names.
pub fn render(dir: &Path) -> Result<Vec<String>> {
    let mut written = Vec::new();
    let sweep = dir.join("sweep.csv");
    if sweep.exists() {
        let t = Table::read(&sweep)?;
        let x = t.column("Omega")?;
        let near = t.column("nearest_crossing")?;
        let mut marks: Vec<f64> = near.into_iter().filter(|v| v.is_finite()).collect();
        marks.sort_by(f64::total_cmp);
        marks.dedup();
        let mut body = String::new();
        panel(
            &mut body,
            0.0,
            "non-Markovianity N",
            &x,
            &[&t.column("N")?],
            &marks,
        );
        panel(
            &mut body,
            H,
            "relaxation time tau",
            &x,
            &[&t.column("tau")?],
            &marks,
        );
        std::fs::write(dir.join("sweep.svg"), document(2, &body))?;
        written.push("sweep.svg".to_string());
    }
    let qe = dir.join("quasienergies.csv");
    if qe.exists() {
        let t = Table::read(&qe)?;
        let x = t.column("Omega")?;
        let mut body = String::new();
        panel(
            &mut body,
            0.0,
            "quasienergies",
            &x,
            &[&t.column("eps1")?, &t.column("eps2")?],
            &[],
        );
        std::fs::write(dir.join("quasienergies.svg"), document(1, &body))?;
        written.push("quasienergies.svg".to_string());
    }
    if written.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no sweep.csv or quasienergies.csv in {}",
            dir.display()
        )));
    }
    Ok(written)
}
