//! NMSE-versus-SNR line plots rendered to SVG.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::{Method, ResultRow, ResultTable};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Hr,
    Hs,
    X,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Hr, Metric::Hs, Metric::X];

    pub fn file_stem(&self) -> &'static str {
        match self {
            Metric::Hr => "nmse_hr",
            Metric::Hs => "nmse_hs",
            Metric::X => "nmse_x",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Metric::Hr => "NMSE(Hr) [dB]",
            Metric::Hs => "NMSE(Hs) [dB]",
            Metric::X => "NMSE(X) [dB]",
        }
    }

    pub fn value(&self, row: &ResultRow) -> Option<f64> {
        match self {
            Metric::Hr => row.nmse_hr_db,
            Metric::Hs => row.nmse_hs_db,
            Metric::X => row.nmse_x_db,
        }
    }
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

type Series = (String, Vec<(f64, f64)>);

fn draw_err<E: std::error::Error + Send + Sync>(e: DrawingAreaErrorKind<E>) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Finite SNR points only: a noiseless (`inf`) point has no x position.
fn points(rows: &[&ResultRow], metric: Metric) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r.snr_db.is_finite())
        .filter_map(|r| metric.value(r).map(|v| (r.snr_db, v)))
        .collect()
}

fn render(path: &Path, title: &str, y_label: &str, series: &[Series]) -> Result<()> {
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.1.iter().copied()).collect();
    if all.is_empty() {
        return Err(Error::InvalidValue(format!("nothing to plot for '{title}'")));
    }
    let (mut x0, mut x1) = all.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y0, mut y1) = all.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if x1 - x0 < 1e-9 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let pad = ((y1 - y0) * 0.08).max(1.0);
    y0 -= pad;
    y1 += pad;

    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(56)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(draw_err)?;
    chart
        .configure_mesh()
        .x_desc("SNR [dB]")
        .y_desc(y_label)
        .draw()
        .map_err(draw_err)?;
    for (i, (name, pts)) in series.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(draw_err)?
            .label(name.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
        chart
            .draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))
            .map_err(draw_err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .position(SeriesLabelPosition::UpperRight)
        .draw()
        .map_err(draw_err)?;
    root.present().map_err(draw_err)?;
    Ok(())
}

/// One curve per method for `metric`. Returns `Ok(false)` without writing
/// when no method reports the metric at a finite SNR.
pub fn plot_metric(table: &ResultTable, metric: Metric, title: &str, path: &Path) -> Result<bool> {
    let series: Vec<Series> = table
        .methods()
        .into_iter()
        .map(|m| (m.as_str().to_string(), points(&table.series(m), metric)))
        .filter(|s| !s.1.is_empty())
        .collect();
    if series.is_empty() {
        return Ok(false);
    }
    render(path, &format!("{title}: {}", metric.label()), metric.label(), &series)?;
    Ok(true)
}

/// One curve per labelled table for a single method, e.g. a parameter sweep.
pub fn plot_sweep(tables: &[(String, ResultTable)], method: Method, metric: Metric, title: &str, path: &Path) -> Result<bool> {
    let series: Vec<Series> = tables
        .iter()
        .map(|(label, t)| (label.clone(), points(&t.series(method), metric)))
        .filter(|s| !s.1.is_empty())
        .collect();
    if series.is_empty() {
        return Ok(false);
    }
    render(path, &format!("{title} ({method}): {}", metric.label()), metric.label(), &series)?;
    Ok(true)
}

/// Writes `nmse_hr.svg`, `nmse_hs.svg` and `nmse_x.svg` (those with data).
pub fn write_plots(table: &ResultTable, title: &str, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for metric in Metric::ALL {
        let path = dir.join(format!("{}.svg", metric.file_stem()));
        if plot_metric(table, metric, title, &path)? {
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: Method, snr: f64, x: f64) -> ResultRow {
        ResultRow {
            method,
            snr_db: snr,
            nmse_hr_db: (method != Method::GenieLs).then_some(x + 3.0),
            nmse_hs_db: None,
            nmse_x_db: Some(x),
            mean_als_iters: None,
            mean_bigamp_iters: None,
            trials_used: 1,
            failures: 0,
            wall_time: None,
        }
    }

    #[test]
    fn writes_svg_per_available_metric() {
        let dir = tempfile::tempdir().unwrap();
        let table = ResultTable {
            rows: vec![
                row(Method::Proposed, 0.0, -5.0),
                row(Method::Proposed, 10.0, -15.0),
                row(Method::Proposed, f64::INFINITY, -120.0),
                row(Method::GenieLs, 0.0, -8.0),
                row(Method::GenieLs, 10.0, -18.0),
            ],
        };
        let written = write_plots(&table, "demo", dir.path()).unwrap();
        let names: Vec<_> = written.iter().map(|p| p.file_name().unwrap().to_str().unwrap().to_string()).collect();
        assert_eq!(names, vec!["nmse_hr.svg", "nmse_x.svg"]);
        let svg = std::fs::read_to_string(dir.path().join("nmse_x.svg")).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("genie_ls") && svg.contains("proposed"));
    }
}
