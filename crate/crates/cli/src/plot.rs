//! Minimal SVG line charts of the training log.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

const W: f64 = 640.0;
const H: f64 = 240.0;
const PAD: f64 = 40.0;

struct Series {
    title: String,
    points: Vec<(f64, f64)>,
}

fn chart(series: &Series) -> String {
    let mut svg = String::new();
    let (xs, ys): (Vec<f64>, Vec<f64>) = series.points.iter().copied().unzip();
    let fold = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (x0, x1) = fold(&xs);
    let (mut y0, mut y1) = fold(&ys);
    if !(y1 > y0) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0).max(1e-12) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#).unwrap();
    writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(svg, r#"<text x="{PAD}" y="20" font-size="13">{}</text>"#, series.title).unwrap();
    writeln!(
        svg,
        r#"<path d="M{PAD},{PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    )
    .unwrap();
    writeln!(svg, r#"<text x="4" y="{}">{:.3e}</text>"#, PAD + 4.0, y1).unwrap();
    writeln!(svg, r#"<text x="4" y="{}">{:.3e}</text>"#, H - PAD, y0).unwrap();
    writeln!(svg, r#"<text x="{PAD}" y="{}">{x0}</text>"#, H - PAD + 16.0).unwrap();
    writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{x1}</text>"#, W - PAD, H - PAD + 16.0).unwrap();
    let mut d = String::new();
    for (i, (x, y)) in series.points.iter().enumerate() {
        write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, sx(*x), sy(*y)).unwrap();
    }
    writeln!(svg, r#"<path d="{}" fill="none" stroke="steelblue" stroke-width="1.2"/>"#, d.trim_end()).unwrap();
    svg.push_str("</svg>\n");
    svg
}

/// Renders reward, cumulative reward, loss and the three objective curves
/// from `training_log.csv` into SVG files next to it.
pub fn emit_plots(training_log: &Path) -> Result<Vec<PathBuf>> {
    let mut reader = csv::Reader::from_path(training_log)
        .with_context(|| format!("reading {}", training_log.display()))?;
    let headers = reader.headers()?.clone();
    let idx = |name: &str| headers.iter().position(|h| h == name).with_context(|| format!("no column {name}"));
    let cols = ["reward", "loss", "energy_w", "throughput_bps", "delay_ttis"].map(idx);
    let [reward, loss, energy, thp, delay] = match cols {
        [Ok(a), Ok(b), Ok(c), Ok(d), Ok(e)] => [a, b, c, d, e],
        _ => anyhow::bail!("{} is not a training log", training_log.display()),
    };
    let mut curves: Vec<Series> = ["reward", "cumulative reward", "loss", "energy (W)", "throughput (bit/s)", "first-packet delay (TTI)"]
        .iter()
        .map(|t| Series {
            title: t.to_string(),
            points: Vec::new(),
        })
        .collect();
    let mut cumulative = 0.0;
    for (step, rec) in reader.records().enumerate() {
        let rec = rec?;
        let x = step as f64;
        let get = |i: usize| rec.get(i).and_then(|v| v.parse::<f64>().ok());
        if let Some(r) = get(reward) {
            cumulative += r;
            curves[0].points.push((x, r));
            curves[1].points.push((x, cumulative));
        }
        if let Some(l) = get(loss) {
            curves[2].points.push((x, l));
        }
        for (k, col) in [(3, energy), (4, thp), (5, delay)] {
            if let Some(v) = get(col) {
                curves[k].points.push((x, v));
            }
        }
    }
    let dir = training_log.parent().unwrap_or(Path::new("."));
    let names = ["reward", "cumulative_reward", "loss", "energy", "throughput", "delay"];
    let mut written = Vec::new();
    for (series, name) in curves.iter().zip(names) {
        if series.points.is_empty() {
            continue;
        }
        let path = dir.join(format!("{name}.svg"));
        fs::write(&path, chart(series)).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}
