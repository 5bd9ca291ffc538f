//! Line plots of `compare.csv`. Every plotted number is read back from the
//! CSV, so the figures are a pure view of the table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::coupling::CouplingMode;
use crate::{Error, Result};

use super::offline::csv_error;

/// File names written by [`plot_compare`], in order.
pub const PLOT_FILES: [&str; 4] = ["iterations.svg", "functional.svg", "velocity_errors.svg", "pressure_errors.svg"];

const WIDTH: f64 = 520.0;
const HEIGHT: f64 = 340.0;
const MARGIN: [f64; 4] = [70.0, 20.0, 40.0, 50.0]; // left, right, top, bottom
const COLOURS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scale {
    Linear,
    Log,
}

/// One polyline per mode; `label` carries the legend text.
#[derive(Debug, Clone)]
struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

struct Panel<'a> {
    title: &'a str,
    ylabel: &'a str,
    scale: Scale,
    series: Vec<Series>,
}

/// Reads `compare.csv` and writes the four SVG figures into `dir`.
pub fn plot_compare(csv_path: &Path, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut reader = csv::Reader::from_path(csv_path).map_err(csv_error)?;
    let header = reader.headers().map_err(csv_error)?.clone();
    let col = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Format(format!("{} has no column '{name}'", csv_path.display())))
    };
    let (c_mode, c_time, c_term) = (col("mode")?, col("time")?, col("termination")?);
    let fields = ["iterations", "J", "err_u1", "err_u2", "err_p1", "err_p2"];
    let cols: Vec<usize> = fields.iter().map(|f| col(f)).collect::<Result<_>>()?;

    // mode position -> (stagnated, points per field)
    type ModeData = (bool, Vec<Vec<(f64, f64)>>);
    let mut data: BTreeMap<usize, ModeData> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_error)?;
        let mode: CouplingMode = rec[c_mode].parse()?;
        let pos = CouplingMode::ALL.iter().position(|&m| m == mode).unwrap_or(0);
        let num = |c: usize| rec[c].parse::<f64>().map_err(|_| Error::Format(format!("'{}' is not a number", &rec[c])));
        let t = num(c_time)?;
        let entry = data.entry(pos).or_insert_with(|| (false, vec![Vec::new(); fields.len()]));
        entry.0 |= &rec[c_term] == "stagnated";
        for (k, &c) in cols.iter().enumerate() {
            entry.1[k].push((t, num(c)?));
        }
    }
    let series = |k: usize| -> Vec<(usize, Series)> {
        data.iter()
            .map(|(&pos, (stagnated, pts))| {
                let mut label = CouplingMode::ALL[pos].to_string();
                if *stagnated {
                    label.push_str(" (stagnated)");
                }
                (pos, Series { label, points: pts[k].clone() })
            })
            .collect()
    };
    let panel = |title, ylabel, scale, k| Panel { title, ylabel, scale, series: series(k).into_iter().map(|(_, s)| s).collect() };
    let colours: Vec<&str> = data.keys().map(|&p| COLOURS[p]).collect();

    let figures = [
        vec![panel("Optimisation iterations", "iterations", Scale::Linear, 0)],
        vec![panel("Optimal functional value", "J", Scale::Log, 1)],
        vec![
            panel("Velocity error, subdomain 1", "rel. L2 error u1", Scale::Log, 2),
            panel("Velocity error, subdomain 2", "rel. L2 error u2", Scale::Log, 3),
        ],
        vec![
            panel("Pressure error, subdomain 1", "rel. L2 error p1", Scale::Log, 4),
            panel("Pressure error, subdomain 2", "rel. L2 error p2", Scale::Log, 5),
        ],
    ];
    let mut out = Vec::new();
    for (name, panels) in PLOT_FILES.iter().zip(&figures) {
        let path = dir.join(name);
        fs::write(&path, render(panels, &colours))?;
        out.push(path);
    }
    Ok(out)
}

fn render(panels: &[Panel], colours: &[&str]) -> String {
    let total_w = WIDTH * panels.len() as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" height="{HEIGHT}" viewBox="0 0 {total_w} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (k, p) in panels.iter().enumerate() {
        render_panel(&mut s, p, colours, k as f64 * WIDTH);
    }
    s.push_str("</svg>\n");
    s
}

fn render_panel(s: &mut String, p: &Panel, colours: &[&str], x0: f64) {
    let [ml, mr, mt, mb] = MARGIN;
    let (pw, ph) = (WIDTH - ml - mr, HEIGHT - mt - mb);
    let pts = p.series.iter().flat_map(|se| se.points.iter());
    let (mut tmin, mut tmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(t, y) in pts {
        tmin = tmin.min(t);
        tmax = tmax.max(t);
        if p.scale == Scale::Linear || y > 0.0 {
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    if !tmin.is_finite() {
        (tmin, tmax) = (0.0, 1.0);
    }
    if tmax <= tmin {
        tmax = tmin + 1.0;
    }
    let ticks: Vec<f64>;
    let map_y: Box<dyn Fn(f64) -> f64>;
    match p.scale {
        Scale::Linear => {
            if !ymin.is_finite() {
                (ymin, ymax) = (0.0, 1.0);
            }
            ymin = ymin.min(0.0);
            if ymax <= ymin {
                ymax = ymin + 1.0;
            }
            let step = nice_step((ymax - ymin) / 5.0);
            ymax = (ymax / step).ceil() * step;
            ticks = (0..).map(|i| ymin + i as f64 * step).take_while(|&v| v <= ymax + 1e-9 * step).collect();
            map_y = Box::new(move |y| mt + ph * (1.0 - (y - ymin) / (ymax - ymin)));
        }
        Scale::Log => {
            if !ymin.is_finite() {
                (ymin, ymax) = (1e-16, 1.0);
            }
            let (lo, hi) = (ymin.log10().floor(), ymax.log10().ceil().max(ymin.log10().floor() + 1.0));
            let every = ((hi - lo) / 8.0).ceil().max(1.0);
            ticks = (0..).map(|i| lo + i as f64 * every).take_while(|&e| e <= hi).map(|e| 10f64.powf(e)).collect();
            // non-positive values are drawn on the lower axis
            map_y = Box::new(move |y| {
                let e = if y > 0.0 { y.log10().max(lo) } else { lo };
                mt + ph * (1.0 - (e - lo) / (hi - lo))
            });
        }
    }
    let map_t = |t: f64| x0 + ml + pw * (t - tmin) / (tmax - tmin);

    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#, x0 + ml + pw / 2.0, mt - 18.0, p.title);
    let _ = writeln!(s, r#"<rect x="{}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#, x0 + ml);
    for &v in &ticks {
        let y = map_y(v);
        let label = match p.scale {
            Scale::Linear => format!("{v}"),
            Scale::Log => format!("1e{}", v.log10().round()),
        };
        let _ = writeln!(s, r##"<line x1="{}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/>"##, x0 + ml, x0 + ml + pw);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#, x0 + ml - 5.0, y + 4.0);
    }
    for k in 0..=4 {
        let t = tmin + (tmax - tmin) * k as f64 / 4.0;
        let x = map_t(t);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, mt + ph + 15.0, trim(t));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">time</text>"#, x0 + ml + pw / 2.0, HEIGHT - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="{0}" y="{1}" text-anchor="middle" transform="rotate(-90 {0} {1})">{2}</text>"#,
        x0 + 16.0,
        mt + ph / 2.0,
        p.ylabel
    );
    if !p.series.is_empty() {
        let _ = writeln!(
            s,
            r##"<rect x="{}" y="{}" width="118" height="{}" fill="white" fill-opacity="0.85" stroke="#999"/>"##,
            x0 + ml + pw - 124.0,
            mt + 4.0,
            14.0 * p.series.len() as f64 + 6.0
        );
    }
    for (k, (se, colour)) in p.series.iter().zip(colours).enumerate() {
        let pts: Vec<String> = se.points.iter().map(|&(t, y)| format!("{:.2},{:.2}", map_t(t), map_y(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = mt + 14.0 + 14.0 * k as f64;
        let lx = x0 + ml + pw - 120.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="{colour}" stroke-width="2"/>"#, ly - 4.0, lx + 18.0, ly - 4.0);
        let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, lx + 22.0, se.label);
    }
}

fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn trim(t: f64) -> String {
    let s = format!("{t:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_polyline_per_mode_and_stagnation_flagged() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("compare.csv");
        let mut text = String::from("mode,step,time,iterations,J,err_u1,err_u2,err_p1,err_p2,termination\n");
        for m in ["FFF", "FRF", "FRR", "RRR"] {
            for step in 1..=3 {
                let term = if m == "FRR" && step == 2 { "stagnated" } else { "gradient" };
                text.push_str(&format!("{m},{step},{},{},1e-{},1e-6,0,2e-3,3e-3,{term}\n", step as f64 * 0.01, 10 * step, step + 8));
            }
        }
        fs::write(&csv, text).unwrap();
        let files = plot_compare(&csv, dir.path()).unwrap();
        assert_eq!(files.len(), 4);
        for (f, panels) in files.iter().zip([1, 1, 2, 2]) {
            let svg = fs::read_to_string(f).unwrap();
            assert_eq!(svg.matches("<polyline").count(), 4 * panels);
            assert_eq!(svg.matches("FRR (stagnated)").count(), panels);
            assert!(!svg.contains("NaN"));
        }
    }

    #[test]
    fn missing_column_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("compare.csv");
        fs::write(&csv, "mode,step\nFFF,1\n").unwrap();
        assert!(matches!(plot_compare(&csv, dir.path()), Err(Error::Format(_))));
    }
}
