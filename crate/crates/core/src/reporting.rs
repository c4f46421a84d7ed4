//! Text archives, learning-curve exports and SVG plots of a finished run.
//!
//! All text files are tab separated with a header row. Costs are written in
//! objective units (the run's cost scale divided back out) using scientific
//! notation with 10 significant digits.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::state::{Operation, PointId, RunRecord};

pub const SIMPLEX_HISTORY: &str = "SimplexHistory.txt";
pub const SIMPLEX_HISTORY_DAT: &str = "SimplexHistory.dat";
pub const POINTS_DATABASE: &str = "PointsDatabase.txt";
pub const POINTS_DATABASE_DAT: &str = "PointsDatabase.dat";
pub const REEVALUATION_HISTORY: &str = "ReevaluationHistory.txt";
pub const LEARNING_CURVE_CSV: &str = "LearningCurve.csv";
pub const LEARNING_CURVE_SVG: &str = "LearningCurve.svg";
pub const SIMPLEX_TRAJECTORY_SVG: &str = "SimplexTrajectory.svg";

/// Pinned float format: `1.000000000e3`, `-2.500000000e-1`, `inf`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.9e}")
    } else {
        v.to_string()
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

fn coordinate_headers(n: usize) -> String {
    (1..=n).map(|i| format!("x_{i}")).collect::<Vec<_>>().join("\t")
}

/// Writes via a sibling temporary file and a rename so readers never see a
/// half-written archive.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn simplex_history(record: &RunRecord) -> String {
    let mut out = String::from("iter\tsimplex_id\tvertex_ids\toperation\tcounters\n");
    for s in &record.steps {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\u{2192}{}\t{}\t{}",
            s.iteration,
            s.simplex_id,
            join(&s.before),
            join(&s.after),
            s.operation,
            join(&s.counters)
        );
    }
    out
}

pub fn points_database(record: &RunRecord) -> String {
    let mut out = format!(
        "point_id\t{}\tJ\tsimplex_id\toperation\n",
        coordinate_headers(record.dimension)
    );
    for p in &record.points {
        let coords: Vec<String> = p.coords.iter().map(|&x| format_float(x)).collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            p.id,
            coords.join("\t"),
            format_float(record.unscale(p.cost)),
            p.simplex_id,
            p.operation
        );
    }
    out
}

pub fn reevaluation_history(record: &RunRecord) -> String {
    let mut out = format!(
        "iter\tpoint_id\t{}\tJ_before\tJ_after\n",
        coordinate_headers(record.dimension)
    );
    for e in &record.reevaluations {
        let coords: Vec<String> = e.coords.iter().map(|&x| format_float(x)).collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            e.iteration,
            e.point_id,
            coords.join("\t"),
            format_float(record.unscale(e.cost_before)),
            format_float(record.unscale(e.cost_after))
        );
    }
    out
}

/// `(evaluation_index, J, best_so_far_J)` for every raw objective call,
/// indices starting at 1.
pub fn learning_curve(record: &RunRecord) -> Vec<(usize, f64, f64)> {
    let mut best = f64::INFINITY;
    record
        .evaluations
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let j = record.unscale(e.value);
            best = best.min(j);
            (i + 1, j, best)
        })
        .collect()
}

pub fn learning_curve_csv(record: &RunRecord) -> String {
    let mut out = String::from("evaluation_index,J,best_so_far_J\n");
    for (i, j, best) in learning_curve(record) {
        let _ = writeln!(out, "{i},{},{}", format_float(j), format_float(best));
    }
    out
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;

/// Maps data ranges onto the drawing area (y grows upward).
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| {
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        Frame {
            x: widen(x),
            y: widen(y),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(
            out,
            r##"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
            r - l,
            b - t
        );
        let labels = [
            (l, b + 16.0, "start", format!("{:.3}", self.x.0)),
            (r, b + 16.0, "end", format!("{:.3}", self.x.1)),
            (l - 4.0, b, "end", format!("{:.3e}", self.y.0)),
            (l - 4.0, t + 4.0, "end", format!("{:.3e}", self.y.1)),
        ];
        for (x, y, anchor, text) in labels {
            let _ = writeln!(
                out,
                r#"<text x="{x:.1}" y="{y:.1}" font-size="11" text-anchor="{anchor}">{text}</text>"#
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{xlabel}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 12.0
        );
        let _ = writeln!(
            out,
            r#"<text x="14" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">{ylabel}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0
        );
    }
}

fn svg_open() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn finite_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.filter(|v| v.is_finite()).fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

/// Best-so-far cost as a step line over the evaluation index, with every
/// finite raw evaluation drawn as a dot.
pub fn learning_curve_svg(record: &RunRecord) -> String {
    let curve = learning_curve(record);
    let mut out = svg_open();
    let y = finite_range(curve.iter().map(|c| c.1)).unwrap_or((0.0, 1.0));
    let frame = Frame::new((1.0, curve.len().max(1) as f64), y);
    frame.axes(&mut out, "evaluation", "J");

    for &(i, j, _) in &curve {
        if j.is_finite() {
            let _ = writeln!(
                out,
                r##"<circle cx="{:.2}" cy="{:.2}" r="1.8" fill="#9ab"/>"##,
                frame.px(i as f64),
                frame.py(j)
            );
        }
    }

    let mut path = String::new();
    let mut prev: Option<f64> = None;
    for &(i, _, best) in &curve {
        if !best.is_finite() {
            continue;
        }
        let (x, y) = (frame.px(i as f64), frame.py(best));
        match prev {
            None => {
                let _ = write!(path, "M{x:.2},{y:.2}");
            }
            Some(py) => {
                let _ = write!(path, " L{x:.2},{py:.2} L{x:.2},{y:.2}");
            }
        }
        prev = Some(y);
    }
    if !path.is_empty() {
        let _ = writeln!(
            out,
            r##"<path d="{path}" fill="none" stroke="#c33" stroke-width="1.5"/>"##
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Every logged simplex of a 2D run as a triangle; simplices produced by a
/// degeneracy correction are dashed. `None` for other dimensions.
pub fn simplex_trajectory_svg(record: &RunRecord) -> Option<String> {
    if record.dimension != 2 {
        return None;
    }
    let coords: HashMap<PointId, &[f64]> = record.points.iter().map(|p| (p.id, p.coords.as_slice())).collect();
    let xr = finite_range(record.points.iter().map(|p| p.coords[0]))?;
    let yr = finite_range(record.points.iter().map(|p| p.coords[1]))?;
    let frame = Frame::new(xr, yr);
    let mut out = svg_open();
    frame.axes(&mut out, "x_1", "x_2");

    let mut polygon = |ids: &[PointId], style: &str| {
        let pts: Vec<String> = ids
            .iter()
            .filter_map(|id| coords.get(id))
            .map(|c| format!("{:.2},{:.2}", frame.px(c[0]), frame.py(c[1])))
            .collect();
        let _ = writeln!(out, r#"<polygon points="{}" fill="none" {style}/>"#, pts.join(" "));
    };
    if let Some(first) = record.steps.first() {
        polygon(&first.before, r##"stroke="#333" stroke-width="1.2""##);
    }
    for s in &record.steps {
        match s.operation {
            Operation::Reevaluation => {}
            Operation::DegeneracyCorrection => {
                polygon(&s.after, r##"stroke="#c33" stroke-width="1.2" stroke-dasharray="4 3""##)
            }
            _ => polygon(&s.after, r##"stroke="#357" stroke-width="0.8" stroke-opacity="0.7""##),
        }
    }
    let best = record.endpoint();
    let _ = writeln!(
        out,
        r##"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="#c33"/>"##,
        frame.px(best[0]),
        frame.py(best[1])
    );
    out.push_str("</svg>\n");
    Some(out)
}

/// Paths of the files written for one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputBundle {
    pub directory: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Writes every archive of `record` into `dir` (created if missing). The
/// trajectory plot is only produced for 2D runs when `trajectory` is set.
pub fn write_outputs(record: &RunRecord, dir: &Path, trajectory: bool) -> Result<OutputBundle> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let history = simplex_history(record);
    let points = points_database(record);
    let mut contents = vec![
        (SIMPLEX_HISTORY, history.clone()),
        (SIMPLEX_HISTORY_DAT, history),
        (POINTS_DATABASE, points.clone()),
        (POINTS_DATABASE_DAT, points),
        (REEVALUATION_HISTORY, reevaluation_history(record)),
        (LEARNING_CURVE_CSV, learning_curve_csv(record)),
        (LEARNING_CURVE_SVG, learning_curve_svg(record)),
    ];
    if trajectory {
        if let Some(svg) = simplex_trajectory_svg(record) {
            contents.push((SIMPLEX_TRAJECTORY_SVG, svg));
        }
    }
    let mut files = Vec::with_capacity(contents.len());
    for (name, text) in contents {
        let path = dir.join(name);
        write_atomic(&path, &text)?;
        files.push(path);
    }
    Ok(OutputBundle {
        directory: dir.to_path_buf(),
        files,
    })
}

pub fn write_simplex_history(record: &RunRecord, path: &Path) -> Result<()> {
    write_atomic(path, &simplex_history(record))
}

pub fn write_points_database(record: &RunRecord, path: &Path) -> Result<()> {
    write_atomic(path, &points_database(record))
}

pub fn write_reevaluation_history(record: &RunRecord, path: &Path) -> Result<()> {
    write_atomic(path, &reevaluation_history(record))
}

/// Writes the CSV at `path` and the SVG next to it (same stem).
pub fn export_learning_curve(record: &RunRecord, path: &Path) -> Result<PathBuf> {
    write_atomic(path, &learning_curve_csv(record))?;
    let svg = path.with_extension("svg");
    write_atomic(&svg, &learning_curve_svg(record))?;
    Ok(svg)
}
