//! Static SVG charts of a finished run.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use hedonic_core::Panel;
use plotters::prelude::*;

pub const CHARTS: [&str; 4] = ["report.svg", "r2.svg", "turnover.svg", "growth.svg"];

struct Line {
    name: String,
    points: Vec<(f64, f64)>,
}

/// Writes the four charts and returns their names.
pub fn render(dir: &Path, indices: &Path, r2: &Path, panel: &Panel) -> Result<Vec<String>> {
    let position: BTreeMap<i64, f64> = panel
        .period_labels()
        .iter()
        .enumerate()
        .map(|(t, &l)| (l, t as f64))
        .collect();
    let pos = |label: &str, file: &Path| -> Result<f64> {
        let l: i64 = label.parse().with_context(|| format!("bad period {label:?} in {}", file.display()))?;
        position
            .get(&l)
            .copied()
            .ok_or_else(|| anyhow!("period {l} in {} is not in the panel", file.display()))
    };

    let mut series: BTreeMap<(String, String), Vec<(f64, f64)>> = BTreeMap::new();
    let mut rdr = csv::Reader::from_path(indices).with_context(|| format!("cannot read {}", indices.display()))?;
    for rec in rdr.records() {
        let rec = rec?;
        let level: f64 = rec[3].parse().with_context(|| format!("bad level in {}", indices.display()))?;
        series
            .entry((rec[0].to_string(), rec[1].to_string()))
            .or_default()
            .push((pos(&rec[2], indices)?, level));
    }
    if series.is_empty() {
        bail!("index artifact {} is empty", indices.display());
    }
    let index_lines: Vec<Line> = series
        .into_iter()
        .map(|((kind, lag), points)| Line {
            name: format!("{kind} (lag {lag})"),
            points,
        })
        .collect();

    let mut r2_points = Vec::new();
    let mut rdr = csv::Reader::from_path(r2).with_context(|| format!("cannot read {}", r2.display()))?;
    for rec in rdr.records() {
        let rec = rec?;
        if &rec[0] == "period" {
            let v: f64 = rec[2].parse().with_context(|| format!("bad r2 in {}", r2.display()))?;
            r2_points.push((pos(&rec[1], r2)?, v));
        }
    }

    let turnover: Vec<(f64, f64)> = (1..panel.n_periods())
        .filter_map(|t| panel.turnover_rate(t).ok().map(|r| (t as f64, r)))
        .collect();
    let growth: Vec<(f64, f64)> = (0..panel.n_periods())
        .filter_map(|t| panel.growth_ratio(t, 0).ok().map(|r| (t as f64, r)))
        .collect();

    let one = |name: &str, points| vec![Line { name: name.to_string(), points }];
    chart(&dir.join(CHARTS[0]), "Price indices", "level", &index_lines)?;
    chart(&dir.join(CHARTS[1]), "Holdout R² by period", "R²", &one("holdout R²", r2_points))?;
    chart(&dir.join(CHARTS[2]), "Turnover ratio", "share of new products", &one("turnover", turnover))?;
    chart(&dir.join(CHARTS[3]), "Product growth", "products relative to base", &one("growth", growth))?;
    Ok(CHARTS.iter().map(|s| s.to_string()).collect())
}

fn bounds(lines: &[Line]) -> ((f64, f64), (f64, f64)) {
    let pts = lines.iter().flat_map(|l| l.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return ((0.0, 1.0), (0.0, 1.0));
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-3);
    ((x0, x1), (y0 - pad, y1 + pad))
}

fn chart(path: &Path, title: &str, y_desc: &str, lines: &[Line]) -> Result<()> {
    let err = |e: &dyn std::fmt::Display| anyhow!("cannot draw {}: {e}", path.display());
    let ((x0, x1), (y0, y1)) = bounds(lines);
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(&e))?;
    let mut c = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(64)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(|e| err(&e))?;
    c.configure_mesh()
        .x_desc("period")
        .y_desc(y_desc)
        .draw()
        .map_err(|e| err(&e))?;
    for (k, line) in lines.iter().enumerate() {
        let color = Palette99::pick(k).to_rgba();
        c.draw_series(LineSeries::new(line.points.iter().copied(), color.stroke_width(2)))
            .map_err(|e| err(&e))?
            .label(line.name.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
    }
    c.configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| err(&e))?;
    root.present().map_err(|e| err(&e))?;
    Ok(())
}
