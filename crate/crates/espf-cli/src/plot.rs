//! Static PNG renderings of the EWM traces.

use std::path::{Path, PathBuf};
use std::sync::Once;

use espf::monitor::{EwmRecord, Regime};
use plotters::prelude::*;

const FONT_CANDIDATES: &[&str] = &[
    "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf",
    "/usr/share/fonts/TTF/DejaVuSans.ttf",
];

static FONT_INIT: Once = Once::new();

fn register_font() -> bool {
    FONT_INIT.call_once(|| {
        for path in FONT_CANDIDATES {
            if let Ok(bytes) = std::fs::read(path) {
                let leaked: &'static [u8] = Box::leak(bytes.into_boxed_slice());
                if plotters::style::register_font(
                    "sans-serif",
                    plotters::style::FontStyle::Normal,
                    leaked,
                )
                .is_ok()
                {
                    break;
                }
            }
        }
    });
    // labels are only drawn when a font file was actually registered
    FONT_CANDIDATES.iter().any(|p| Path::new(p).exists())
}

struct Trace<'a> {
    name: &'a str,
    extract: fn(&EwmRecord) -> f64,
}

const TRACES: &[Trace<'static>] = &[
    Trace { name: "log_det_mvee", extract: |r| r.log_det_mvee },
    Trace { name: "h_pi", extract: |r| r.h_pi },
    Trace { name: "w_ep", extract: |r| r.w_ep },
    Trace { name: "prune_count", extract: |r| r.prune_count as f64 },
    Trace { name: "sigma_k", extract: |r| r.sigma_k },
    Trace { name: "necessity", extract: |r| r.necessity },
    Trace { name: "surprisal", extract: |r| r.surprisal },
    Trace { name: "info", extract: |r| r.info },
    Trace { name: "alpha_c", extract: |r| r.alpha_c },
    Trace { name: "n_target", extract: |r| r.n_target as f64 },
];

pub fn render_all(records: &[EwmRecord], out_dir: &Path) -> Result<Vec<PathBuf>, String> {
    if records.is_empty() {
        return Err("no records to plot".into());
    }
    std::fs::create_dir_all(out_dir).map_err(|e| e.to_string())?;
    let with_labels = register_font();
    let mut written = Vec::new();
    for trace in TRACES {
        let path = out_dir.join(format!("{}.png", trace.name));
        render_one(records, trace, &path, with_labels)?;
        written.push(path);
    }
    written.push(render_regime(records, out_dir)?);
    Ok(written)
}

fn series(records: &[EwmRecord], f: fn(&EwmRecord) -> f64) -> Vec<(f64, f64)> {
    records
        .iter()
        .map(|r| (r.t_days, f(r)))
        .filter(|(_, y)| y.is_finite())
        .collect()
}

fn render_one(
    records: &[EwmRecord],
    trace: &Trace<'_>,
    path: &Path,
    with_labels: bool,
) -> Result<(), String> {
    let data = series(records, trace.extract);
    if data.is_empty() {
        return Err(format!("{}: no finite samples", trace.name));
    }
    let (x0, x1) = (data[0].0, data.last().unwrap().0.max(data[0].0 + 1e-9));
    let mut y0 = f64::INFINITY;
    let mut y1 = f64::NEG_INFINITY;
    for &(_, y) in &data {
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if y0 == y1 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let root = BitMapBackend::new(path, (900, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| e.to_string())?;
    let mut builder = ChartBuilder::on(&root);
    builder.margin(10);
    if with_labels {
        builder
            .caption(trace.name, ("sans-serif", 18))
            .x_label_area_size(28)
            .y_label_area_size(56);
    }
    let mut chart = builder
        .build_cartesian_2d(x0..x1, (y0 - pad)..(y1 + pad))
        .map_err(|e| e.to_string())?;
    if with_labels {
        chart
            .configure_mesh()
            .x_desc("t (days)")
            .draw()
            .map_err(|e| e.to_string())?;
    }
    chart
        .draw_series(LineSeries::new(data, &BLUE))
        .map_err(|e| e.to_string())?;
    root.present().map_err(|e| e.to_string())?;
    Ok(())
}

fn render_regime(records: &[EwmRecord], out_dir: &Path) -> Result<PathBuf, String> {
    let path = out_dir.join("regime.png");
    let data: Vec<(f64, f64)> = records
        .iter()
        .map(|r| {
            (
                r.t_days,
                match r.regime {
                    Regime::Contraction => 0.0,
                    Regime::Diffusion => 1.0,
                },
            )
        })
        .collect();
    let x1 = data.last().map(|d| d.0).unwrap_or(1.0);
    let root = BitMapBackend::new(&path, (900, 180)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| e.to_string())?;
    let mut chart = ChartBuilder::on(&root)
        .margin(10)
        .build_cartesian_2d(data[0].0..x1.max(data[0].0 + 1e-9), -0.2f64..1.2f64)
        .map_err(|e| e.to_string())?;
    chart
        .draw_series(LineSeries::new(data, &RED))
        .map_err(|e| e.to_string())?;
    root.present().map_err(|e| e.to_string())?;
    drop(chart);
    drop(root);
    Ok(path)
}
