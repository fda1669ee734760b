//! Static PNG figures of ledger norms against their bounds, on a log scale.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use peq_core::energetics::{qualitative_norms, ForcingNorms, QUALITATIVE};
use peq_core::fields::Params;
use peq_core::geometry::Grid;
use peq_core::io::LedgerRow;
use plotters::prelude::*;
use plotters::style::FontStyle;

const SIZE: (u32, u32) = (900, 600);
const FONT_FAMILY: &str = "sans-serif";

/// TrueType fonts tried, in order, for axis labels and legends. The
/// `PEQ_FONT` environment variable takes precedence.
const FONT_CANDIDATES: [&str; 4] = [
    "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf",
    "/usr/share/fonts/TTF/DejaVuSans.ttf",
    "/usr/share/fonts/dejavu/DejaVuSans.ttf",
    "/Library/Fonts/Arial.ttf",
];

/// Registers a font once per process; figures are drawn without text when none loads.
fn text_available() -> bool {
    static LOADED: OnceLock<bool> = OnceLock::new();
    *LOADED.get_or_init(|| {
        let env = std::env::var("PEQ_FONT").ok();
        let paths = env.iter().map(String::as_str).chain(FONT_CANDIDATES);
        for path in paths {
            if let Ok(bytes) = std::fs::read(path) {
                let bytes: &'static [u8] = Box::leak(bytes.into_boxed_slice());
                if plotters::style::register_font(FONT_FAMILY, FontStyle::Normal, bytes).is_ok() {
                    return true;
                }
            }
        }
        false
    })
}

/// The temperature decay bound `e^{-t/(2a)} ||T0||^2 + (2a)^2 ||Q||^2` with
/// `a = h^2 Rt2 + h / alpha`.
#[derive(Debug, Clone, Copy)]
pub struct DecayEnvelope {
    a: f64,
    q_sq: f64,
}

impl DecayEnvelope {
    pub fn new(params: &Params, grid: &Grid, q: &ForcingNorms) -> Self {
        let h = grid.h;
        DecayEnvelope { a: h * h * params.rt2 + h / params.alpha, q_sq: q.q_sq }
    }

    fn bound(&self, t: f64, temp0_sq: f64) -> f64 {
        (-t / (2.0 * self.a)).exp() * temp0_sq + (2.0 * self.a).powi(2) * self.q_sq
    }
}

struct Series {
    label: String,
    color: RGBColor,
    points: Vec<(f64, f64)>,
}

impl Series {
    /// Keeps only points that can be shown on a log axis.
    fn new(label: &str, color: RGBColor, points: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let points = points.into_iter().filter(|(t, y)| t.is_finite() && y.is_finite() && *y > 0.0).collect();
        Series { label: label.to_string(), color, points }
    }
}

struct Figure {
    file: String,
    title: String,
    y_label: String,
    series: Vec<Series>,
}

fn draw(fig: &Figure, path: &Path) -> Result<bool, String> {
    let series: Vec<&Series> = fig.series.iter().filter(|s| !s.points.is_empty()).collect();
    if series.is_empty() {
        return Ok(false);
    }
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut t0, mut t1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(t, y) in all {
        t0 = t0.min(t);
        t1 = t1.max(t);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if t1 <= t0 {
        t1 = t0 + 1.0;
    }
    // Pad the value range by a factor two on each side, staying finite.
    let (y0, y1) = (y0 / 2.0, (y1 * 2.0).min(f64::MAX));

    let text = text_available();
    let failed = |e: &dyn std::fmt::Display| format!("cannot draw {}: {e}", path.display());
    let root = BitMapBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| failed(&e))?;
    let mut builder = ChartBuilder::on(&root);
    builder.margin(20);
    if text {
        builder.caption(&fig.title, (FONT_FAMILY, 24)).x_label_area_size(45).y_label_area_size(90);
    }
    let mut chart = builder.build_cartesian_2d(t0..t1, (y0..y1).log_scale()).map_err(|e| failed(&e))?;
    if text {
        chart
            .configure_mesh()
            .x_desc("t")
            .y_desc(fig.y_label.as_str())
            .label_style((FONT_FAMILY, 15))
            .y_label_formatter(&|v| format!("{v:.0e}"))
            .x_label_formatter(&|v| format!("{v:.3}"))
            .draw()
            .map_err(|e| failed(&e))?;
    }
    for s in &series {
        let color = s.color;
        let drawn = chart
            .draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(2)))
            .map_err(|e| failed(&e))?;
        if text {
            drawn.label(s.label.as_str()).legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        }
    }
    if text {
        chart
            .configure_series_labels()
            .position(SeriesLabelPosition::LowerRight)
            .label_font((FONT_FAMILY, 15))
            .background_style(WHITE.mix(0.85))
            .border_style(BLACK)
            .draw()
            .map_err(|e| failed(&e))?;
    }
    root.present().map_err(|e| failed(&e))?;
    Ok(true)
}

const MEASURED: RGBColor = RGBColor(31, 119, 180);
const BOUND: RGBColor = RGBColor(214, 39, 40);

fn figures(rows: &[LedgerRow], decay: Option<&DecayEnvelope>) -> Vec<Figure> {
    let t = |r: &LedgerRow| r.norms.t;
    let mut figs = vec![Figure {
        file: "energy_k1.png".into(),
        title: "Energy against K1".into(),
        y_label: "||v||^2 + ||T||^2".into(),
        series: vec![
            Series::new("||v||^2 + ||T||^2", MEASURED, rows.iter().map(|r| (t(r), r.norms.v_sq + r.norms.temp_sq))),
            Series::new("K1", BOUND, rows.iter().map(|r| (t(r), r.certificate[0]))),
        ],
    }];
    let measures = ["||vtilde||_6^6", "||grad vbar||^2", "||v_z||^2", "||grad v||^2", "||T||_H1^2"];
    let bounds = ["K6", "K2", "Kz", "KV", "Kt"];
    for b in 0..QUALITATIVE.len() {
        figs.push(Figure {
            file: format!("{}.png", QUALITATIVE[b]),
            title: format!("{} against {}", measures[b], bounds[b]),
            y_label: measures[b].into(),
            series: vec![
                Series::new(measures[b], MEASURED, rows.iter().map(|r| (t(r), qualitative_norms(&r.norms)[b]))),
                Series::new(bounds[b], BOUND, rows.iter().map(|r| (t(r), r.certificate[b + 1]))),
            ],
        });
    }
    if let (Some(env), Some(first)) = (decay, rows.first()) {
        let t0 = first.norms.t;
        figs.push(Figure {
            file: "temperature_decay.png".into(),
            title: "Temperature energy against its decay envelope".into(),
            y_label: "||T||^2".into(),
            series: vec![
                Series::new("||T||^2", MEASURED, rows.iter().map(|r| (t(r), r.norms.temp_sq))),
                Series::new("envelope", BOUND, rows.iter().map(|r| (t(r), env.bound(t(r) - t0, first.norms.temp_sq)))),
            ],
        });
    }
    figs
}

/// Writes every figure with at least one drawable point into `dir` and
/// returns the paths written.
pub fn draw_all(rows: &[LedgerRow], decay: Option<&DecayEnvelope>, dir: &Path) -> Result<Vec<PathBuf>, String> {
    if rows.is_empty() {
        return Err("ledger has no rows".into());
    }
    let mut written = Vec::new();
    for fig in figures(rows, decay) {
        let path = dir.join(&fig.file);
        if draw(&fig, &path)? {
            written.push(path);
        }
    }
    Ok(written)
}
