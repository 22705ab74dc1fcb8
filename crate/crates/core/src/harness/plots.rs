//! Static SVG charts.

use std::path::Path;

use plotters::prelude::*;

use super::runner::{EpisodeRecord, RewardTotals, RunSummary};
use crate::error::{Result, SairError};

fn plot_err<E: std::fmt::Display>(e: E) -> SairError {
    SairError::Plot(e.to_string())
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-6);
    (lo - pad, hi + pad)
}

/// Cumulative reward and throughput per round.
pub fn plot_trajectories(records: &[EpisodeRecord], title: &str, path: &Path) -> Result<()> {
    let root = SVGBackend::new(path, (900, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let panels = root.split_evenly((2, 1));
    let rounds = records.len().max(1) as f64;

    let mut acc = 0.0;
    let cumulative: Vec<(f64, f64)> = records
        .iter()
        .map(|r| {
            acc += r.reward.total;
            (r.round as f64, acc)
        })
        .collect();
    let throughput: Vec<(f64, f64)> = records.iter().map(|r| (r.round as f64, r.throughput_rps)).collect();

    for (area, (label, series, color)) in panels.iter().zip([
        ("cumulative reward", &cumulative, &BLUE),
        ("throughput (req/s)", &throughput, &RED),
    ]) {
        let (lo, hi) = span(series.iter().map(|p| p.1));
        let mut chart = ChartBuilder::on(area)
            .caption(format!("{title}: {label}"), ("sans-serif", 18))
            .margin(10)
            .x_label_area_size(30)
            .y_label_area_size(60)
            .build_cartesian_2d(0.0..rounds, lo..hi)
            .map_err(plot_err)?;
        chart.configure_mesh().x_desc("round").draw().map_err(plot_err)?;
        chart.draw_series(LineSeries::new(series.iter().copied(), color)).map_err(plot_err)?;
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

fn bar_panel<DB: DrawingBackend>(
    area: &DrawingArea<DB, plotters::coord::Shift>,
    caption: &str,
    labels: &[String],
    values: &[f64],
) -> Result<()>
where
    DB::ErrorType: 'static,
{
    let hi = values.iter().copied().fold(0.0, f64::max).max(1e-9) * 1.15;
    let n = labels.len().max(1);
    let mut chart = ChartBuilder::on(area)
        .caption(caption, ("sans-serif", 18))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..n as f64, 0.0..hi)
        .map_err(plot_err)?;
    let names = labels.to_vec();
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_labels(n)
        .x_label_formatter(&move |x| names.get(x.floor() as usize).cloned().unwrap_or_default())
        .draw()
        .map_err(plot_err)?;
    chart
        .draw_series(values.iter().enumerate().map(|(i, &v)| {
            let x = i as f64;
            Rectangle::new([(x + 0.15, 0.0), (x + 0.85, v)], Palette99::pick(i).filled())
        }))
        .map_err(plot_err)?;
    Ok(())
}

/// P99 latency and effective cost per 1K requests, one bar per run.
pub fn plot_comparison(summaries: &[RunSummary], path: &Path) -> Result<()> {
    let root = SVGBackend::new(path, (1000, 450)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let panels = root.split_evenly((1, 2));
    let labels: Vec<String> = summaries.iter().map(|s| s.controller.clone()).collect();
    let p99: Vec<f64> = summaries.iter().map(|s| s.p99_ms).collect();
    let cost: Vec<f64> = summaries.iter().map(|s| s.cost_per_1k_effective).collect();
    bar_panel(&panels[0], "P99 latency (ms)", &labels, &p99)?;
    bar_panel(&panels[1], "effective cost per 1K requests ($)", &labels, &cost)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Summed reward components for each labeled setting, grouped by setting.
pub fn plot_sensitivity(rows: &[(String, RewardTotals)], path: &Path) -> Result<()> {
    let root = SVGBackend::new(path, (1000, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let comps = |t: &RewardTotals| [t.r_latency, t.r_cost, t.r_sla, t.r_proactive, t.r_pareto];
    let names = ["latency", "cost", "sla", "proactive", "pareto"];
    let (lo, hi) = span(rows.iter().flat_map(|(_, t)| comps(t)).chain([0.0]));
    let n = rows.len().max(1);
    let mut chart = ChartBuilder::on(&root)
        .caption("reward components by setting", ("sans-serif", 18))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..n as f64, lo..hi)
        .map_err(plot_err)?;
    let labels: Vec<String> = rows.iter().map(|(l, _)| l.clone()).collect();
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_labels(n)
        .x_label_formatter(&move |x| labels.get(x.floor() as usize).cloned().unwrap_or_default())
        .draw()
        .map_err(plot_err)?;
    let width = 0.8 / names.len() as f64;
    for (c, name) in names.iter().enumerate() {
        let color = Palette99::pick(c);
        chart
            .draw_series(rows.iter().enumerate().map(|(i, (_, t))| {
                let x = i as f64 + 0.1 + c as f64 * width;
                let v = comps(t)[c];
                Rectangle::new([(x, 0.0f64.min(v)), (x + width, 0.0f64.max(v))], color.filled())
            }))
            .map_err(plot_err)?
            .label(*name)
            .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 10, y + 5)], color.filled()));
    }
    chart.configure_series_labels().background_style(WHITE).border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}
