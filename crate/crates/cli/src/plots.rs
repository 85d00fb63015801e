//! SVG figures for a report bundle.

use std::ops::Range;
use std::path::Path;

use plotters::coord::Shift;
use plotters::prelude::*;

use scenval::density::{log_density, DensityPair};
use scenval::mfdfa::FluctuationSurface;
use scenval::spectral::Spectrum;

use crate::report::ReportBundle;
use crate::CliError;

const SIZE: (u32, u32) = (800, 560);
const REFERENCE: RGBColor = RGBColor(31, 119, 180);
const CANDIDATE: RGBColor = RGBColor(214, 39, 40);
const FLAGGED: RGBColor = RGBColor(200, 200, 200);

struct Curve {
    label: String,
    color: RGBColor,
    dashed: bool,
    points: Vec<(f64, f64)>,
}

impl Curve {
    fn new(label: impl Into<String>, color: RGBColor, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            color,
            dashed: false,
            points,
        }
    }

    fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

struct Figure<'a> {
    title: String,
    x_label: &'a str,
    y_label: &'a str,
    curves: Vec<Curve>,
    /// Horizontal span drawn as a gray band.
    shade: Option<(f64, f64)>,
}

fn span(values: impl Iterator<Item = f64>) -> Range<f64> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return 0.0..1.0;
    }
    let pad = if hi > lo { 0.04 * (hi - lo) } else { 0.5 };
    (lo - pad)..(hi + pad)
}

type PlotError = Box<dyn std::error::Error>;

fn draw<DB: DrawingBackend>(area: &DrawingArea<DB, Shift>, fig: &Figure) -> Result<(), PlotError>
where
    DB::ErrorType: 'static,
{
    let all = || fig.curves.iter().flat_map(|c| c.points.iter());
    let xs = span(all().map(|p| p.0));
    let ys = span(all().map(|p| p.1));
    let mut chart = ChartBuilder::on(area)
        .caption(&fig.title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(56)
        .build_cartesian_2d(xs.clone(), ys.clone())?;
    chart
        .configure_mesh()
        .x_desc(fig.x_label)
        .y_desc(fig.y_label)
        .draw()?;

    if let Some((a, b)) = fig.shade {
        let (a, b) = (a.max(xs.start), b.min(xs.end));
        if a < b {
            chart.draw_series(std::iter::once(Rectangle::new(
                [(a, ys.start), (b, ys.end)],
                FLAGGED.mix(0.5).filled(),
            )))?;
        }
    }

    for c in &fig.curves {
        let pts = c.points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite());
        let color = c.color;
        let series = if c.dashed {
            chart.draw_series(DashedLineSeries::new(pts, 6, 4, color.stroke_width(2)))?
        } else {
            chart.draw_series(LineSeries::new(pts, color.stroke_width(2)))?
        };
        series
            .label(c.label.clone())
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 18, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    Ok(())
}

fn write_figure(dir: &Path, name: &str, fig: &Figure) -> Result<String, CliError> {
    let path = dir.join(name);
    let run = || -> Result<(), PlotError> {
        let root = SVGBackend::new(&path, SIZE).into_drawing_area();
        root.fill(&WHITE)?;
        draw(&root, fig)?;
        root.present()?;
        Ok(())
    };
    run().map_err(|e| CliError::output(&path, e))?;
    Ok(name.to_owned())
}

fn density_curves(pair: &DensityPair, log: Option<f64>) -> Vec<Curve> {
    [("reference", REFERENCE, &pair.reference), ("candidate", CANDIDATE, &pair.candidate)]
        .into_iter()
        .map(|(label, color, est)| {
            let y = match log {
                Some(floor) => log_density(est, floor),
                None => est.density.clone(),
            };
            Curve::new(label, color, est.grid.iter().copied().zip(y).collect())
        })
        .collect()
}

fn spectrum_curve(label: &str, color: RGBColor, s: &Spectrum) -> Curve {
    let points = s
        .periods
        .iter()
        .zip(&s.psd)
        .filter(|(_, p)| **p > 0.0)
        .map(|(t, p)| (t.log10(), p.log10()))
        .collect();
    Curve::new(label, color, points)
}

fn surface_curves(
    role: &str,
    color: RGBColor,
    s: &FluctuationSurface,
    keep: impl Fn(f64) -> bool,
) -> Vec<Curve> {
    let mut curves = Vec::new();
    for (iq, q) in s.q_values.iter().enumerate().filter(|(_, q)| keep(**q)) {
        let points = s
            .s_values
            .iter()
            .zip(&s.fluctuation[iq])
            .map(|(sv, f)| ((*sv as f64).log2(), f.log2()))
            .collect();
        let curve = Curve::new(format!("{role} q={q}"), shade_of(color, curves.len()), points);
        curves.push(if role == "candidate" { curve.dashed() } else { curve });
    }
    curves
}

/// Lighter variants of a base color for successive q values.
fn shade_of(c: RGBColor, i: usize) -> RGBColor {
    let t = (i as f64 * 0.22).min(0.7);
    let mix = |v: u8| (v as f64 + (255.0 - v as f64) * t).round() as u8;
    RGBColor(mix(c.0), mix(c.1), mix(c.2))
}

fn flagged_band(s: &FluctuationSurface) -> Option<(f64, f64)> {
    let first = s.flagged_s.iter().position(|f| *f)?;
    let lo = (s.s_values[first] as f64).log2();
    let hi = (*s.s_values.last()? as f64).log2();
    Some((lo - 0.05, hi + 0.05))
}

/// Writes the figures for every payload in the bundle. Returns the file names.
pub fn emit_plot_files(bundle: &ReportBundle, dir: &Path) -> Result<Vec<String>, CliError> {
    let mut written = Vec::new();

    if let Some(pdf) = &bundle.pdf {
        let floor = bundle.provenance.config.pdf.log_floor;
        written.push(write_figure(
            dir,
            "pdf_linear.svg",
            &Figure {
                title: "Density of all timesteps".into(),
                x_label: "value",
                y_label: "density",
                curves: density_curves(&pdf.full, None),
                shade: None,
            },
        )?);
        written.push(write_figure(
            dir,
            "pdf_log.svg",
            &Figure {
                title: "Density of all timesteps (log scale)".into(),
                x_label: "value",
                y_label: "log10 density",
                curves: density_curves(&pdf.full, Some(floor)),
                shade: None,
            },
        )?);
        written.push(write_figure(
            dir,
            "pdf_marginal.svg",
            &Figure {
                title: "Density of scenario means".into(),
                x_label: "scenario mean",
                y_label: "density",
                curves: density_curves(&pdf.marginal, None),
                shade: None,
            },
        )?);
    }

    if let Some(panel) = &bundle.acf {
        let name = "acf_panel.svg";
        let path = dir.join(name);
        let run = || -> Result<(), PlotError> {
            let n = panel.pairs.len().max(1);
            let cols = if n > 1 { 2 } else { 1 };
            let rows = n.div_ceil(cols);
            let root = SVGBackend::new(&path, (SIZE.0, 300 * rows as u32)).into_drawing_area();
            root.fill(&WHITE)?;
            for (area, pair) in root.split_evenly((rows, cols)).iter().zip(&panel.pairs) {
                let curve = |label: String, color, c: &scenval::autocorr::AcfCurve| {
                    Curve::new(
                        label,
                        color,
                        c.lags.iter().map(|l| *l as f64).zip(c.values.iter().copied()).collect(),
                    )
                };
                draw(
                    area,
                    &Figure {
                        title: format!("reference scenario {}", pair.reference.scenario_index),
                        x_label: "lag (steps)",
                        y_label: "autocorrelation",
                        curves: vec![
                            curve("reference".into(), REFERENCE, &pair.reference),
                            curve(
                                format!("best match {}", pair.matched.scenario_index),
                                CANDIDATE,
                                &pair.matched,
                            ),
                        ],
                        shade: None,
                    },
                )?;
            }
            root.present()?;
            Ok(())
        };
        run().map_err(|e| CliError::output(&path, e))?;
        written.push(name.to_owned());
    }

    if let Some(psd) = &bundle.psd {
        let shade = psd
            .reference
            .flag_bound
            .map(|b| (b.log10(), psd.max_period.log10() + 0.05));
        written.push(write_figure(
            dir,
            "psd.svg",
            &Figure {
                title: "Power spectral density".into(),
                x_label: "log10 period (h)",
                y_label: "log10 PSD",
                curves: vec![
                    spectrum_curve("reference", REFERENCE, &psd.reference),
                    spectrum_curve("candidate", CANDIDATE, &psd.candidate),
                ],
                shade,
            },
        )?);
    }

    if let Some(mf) = &bundle.mfdfa {
        for (name, title, positive) in [
            ("mfdfa_positive_q.svg", "Fluctuation function, q > 0", true),
            ("mfdfa_negative_q.svg", "Fluctuation function, q < 0", false),
        ] {
            let keep = |q: f64| (q > 0.0) == positive;
            let mut curves = surface_curves("reference", REFERENCE, &mf.reference, keep);
            curves.extend(surface_curves("candidate", CANDIDATE, &mf.candidate, keep));
            if curves.is_empty() {
                continue;
            }
            written.push(write_figure(
                dir,
                name,
                &Figure {
                    title: title.into(),
                    x_label: "log2 s",
                    y_label: "log2 F(s)",
                    curves,
                    shade: flagged_band(&mf.reference),
                },
            )?);
        }
    }

    Ok(written)
}
