//! CSV tables and SVG plots from JSONL results.
//!
//! Summary tables have one row per record and one file per tag. Every
//! record with a curve also gets `<tag>-curve-<i>.csv` with columns
//! `t, estimate, lo, hi` and a matching SVG with the estimate as a
//! polyline over its confidence band. Output depends only on the records.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use perpetua::stats::CurvePoint;

use crate::record::Record;
use crate::{CliError, CliResult};

pub const SUMMARY_HEADER: [&str; 9] = ["experiment", "law", "seed", "n", "param", "estimate", "ci_lo", "ci_hi", "pass"];
pub const CURVE_HEADER: [&str; 4] = ["t", "estimate", "lo", "hi"];
/// Written, header only, when there are no records.
pub const EMPTY_TABLE: &str = "results.csv";

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Svg,
    All,
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            "all" => Ok(Format::All),
            other => Err(CliError::Config(format!("unknown report format `{other}` (csv, svg, all)"))),
        }
    }
}

fn file_stem(tag: &str) -> String {
    let s: String = tag
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "untagged".into()
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

fn write_summary(path: &Path, records: &[&Record]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(SUMMARY_HEADER).map_err(csv_error)?;
    for r in records {
        let (lo, hi) = r.ci.map_or((None, None), |(a, b)| (Some(a), Some(b)));
        let pass = r.pass.map(|p| p.to_string()).unwrap_or_default();
        w.write_record([
            r.experiment.clone(),
            r.law.clone(),
            r.seed.to_string(),
            r.n.to_string(),
            opt(r.param),
            opt(r.estimate),
            opt(lo),
            opt(hi),
            pass,
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn write_curve_csv(path: &Path, curve: &[CurvePoint]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(CURVE_HEADER).map_err(csv_error)?;
    for p in curve {
        w.write_record([p.t, p.estimate, p.lo, p.hi].map(|v| v.to_string()))
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Linear map from `[lo, hi]` onto `[a, b]`; a degenerate range maps to the middle.
fn scale(lo: f64, hi: f64, a: f64, b: f64) -> impl Fn(f64) -> f64 {
    move |v| {
        if hi > lo {
            a + (v - lo) / (hi - lo) * (b - a)
        } else {
            (a + b) / 2.0
        }
    }
}

/// Estimate polyline over a band polygon, with labelled axes.
pub fn render_svg(title: &str, curve: &[CurvePoint]) -> String {
    let (tmin, tmax) = curve.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.t), b.max(p.t)));
    let (ymin, ymax) = curve
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.lo), b.max(p.hi)));
    let sx = scale(tmin, tmax, MARGIN, WIDTH - MARGIN);
    let sy = scale(ymin, ymax, HEIGHT - MARGIN, MARGIN);
    let pt = |t: f64, y: f64| format!("{:.2},{:.2}", sx(t), sy(y));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="14">{}</text>"#, escape(title));
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(s, r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#);
    if !curve.is_empty() {
        let band: Vec<String> = curve
            .iter()
            .map(|p| pt(p.t, p.hi))
            .chain(curve.iter().rev().map(|p| pt(p.t, p.lo)))
            .collect();
        let _ = writeln!(
            s,
            r##"<polygon class="band" points="{}" fill="#9ecae1" fill-opacity="0.5" stroke="none"/>"##,
            band.join(" ")
        );
        let line: Vec<String> = curve.iter().map(|p| pt(p.t, p.estimate)).collect();
        let _ = writeln!(
            s,
            r##"<polyline class="estimate" points="{}" fill="none" stroke="#08519c" stroke-width="2"/>"##,
            line.join(" ")
        );
        let label = |x: f64, y: f64, anchor: &str, v: f64| {
            format!(r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{v:.4}</text>"#)
        };
        let _ = writeln!(s, "{}", label(x0, y0 + 16.0, "middle", tmin));
        let _ = writeln!(s, "{}", label(x1, y0 + 16.0, "middle", tmax));
        let _ = writeln!(s, "{}", label(x0 - 6.0, y0, "end", ymin));
        let _ = writeln!(s, "{}", label(x0 - 6.0, y1 + 4.0, "end", ymax));
    }
    s.push_str("</svg>\n");
    s
}

/// Renders `records` into `dir` and returns the files written, in order.
pub fn render(records: &[Record], dir: &Path, format: Format) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let csv = matches!(format, Format::Csv | Format::All);
    let svg = matches!(format, Format::Svg | Format::All);
    if records.is_empty() {
        if csv {
            let p = dir.join(EMPTY_TABLE);
            write_summary(&p, &[])?;
            written.push(p);
        }
        return Ok(written);
    }
    let mut by_tag: BTreeMap<String, Vec<&Record>> = BTreeMap::new();
    for r in records {
        by_tag.entry(file_stem(&r.tag)).or_default().push(r);
    }
    for (stem, group) in &by_tag {
        if csv {
            let p = dir.join(format!("{stem}.csv"));
            write_summary(&p, group)?;
            written.push(p);
        }
        for (i, r) in group.iter().filter(|r| r.curve.is_some()).enumerate() {
            let curve = r.curve.as_deref().unwrap_or_default();
            if csv {
                let p = dir.join(format!("{stem}-curve-{i}.csv"));
                write_curve_csv(&p, curve)?;
                written.push(p);
            }
            if svg {
                let p = dir.join(format!("{stem}-curve-{i}.svg"));
                let title = format!("{} {} ({})", r.experiment, r.tag, r.law);
                std::fs::write(&p, render_svg(&title, curve))?;
                written.push(p);
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Scenario, ScenarioFile};

    fn record(tag: &str, curve: Option<Vec<CurvePoint>>) -> Record {
        let sc = Scenario::resolve(
            ScenarioFile {
                law: Some("uniform:q=1".into()),
                experiment: Some("perp-moment".into()),
                threads: Some(1),
                ..Default::default()
            },
            false,
        )
        .unwrap();
        let mut r = Record::new(&sc, tag).with_value(10, 0.5).with_pass(true);
        r.curve = curve;
        r
    }

    fn tail() -> Vec<CurvePoint> {
        (1..=4)
            .map(|k| {
                let e = 1.0 / f64::from(k);
                CurvePoint { t: f64::from(k), estimate: e, lo: 0.9 * e, hi: 1.1 * e }
            })
            .collect()
    }

    #[test]
    fn empty_results_give_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let files = render(&[], dir.path(), Format::All).unwrap();
        assert_eq!(files, vec![dir.path().join(EMPTY_TABLE)]);
        let text = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(text, format!("{}\n", SUMMARY_HEADER.join(",")));
    }

    #[test]
    fn one_curve_gives_one_polyline_and_band() {
        let dir = tempfile::tempdir().unwrap();
        render(&[record("tail", Some(tail()))], dir.path(), Format::All).unwrap();
        let svg = std::fs::read_to_string(dir.path().join("tail-curve-0.svg")).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<polygon").count(), 1);
        let csv = std::fs::read_to_string(dir.path().join("tail-curve-0.csv")).unwrap();
        assert!(csv.starts_with("t,estimate,lo,hi\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn mixed_tags_give_one_table_each() {
        let dir = tempfile::tempdir().unwrap();
        let rs = [record("a", None), record("b:x", None), record("a", None)];
        let files = render(&rs, dir.path(), Format::Csv).unwrap();
        let names: Vec<_> = files.iter().map(|p| p.file_name().unwrap().to_str().unwrap().to_string()).collect();
        assert_eq!(names, ["a.csv", "b_x.csv"]);
        let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
        assert_eq!(a.lines().count(), 3);
    }

    #[test]
    fn rendering_is_deterministic() {
        let c = tail();
        assert_eq!(render_svg("t <1>", &c), render_svg("t <1>", &c));
        assert!(render_svg("t <1>", &c).contains("t &lt;1&gt;"));
        let flat = vec![CurvePoint { t: 1.0, estimate: 1.0, lo: 1.0, hi: 1.0 }];
        assert!(!render_svg("flat", &flat).contains("NaN"));
    }
}
