//! SVG panels: infidelity on a log axis against gate time in µs.

use plotters::prelude::*;

pub struct Curve {
    pub label: String,
    /// (t_g in µs, ε)
    pub points: Vec<(f64, f64)>,
    pub color: RGBColor,
    pub dashed: bool,
}

/// Marked points such as optima, (t_g in µs, ε).
pub struct Marker {
    pub at: (f64, f64),
    pub color: RGBColor,
}

pub const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

fn bounds(curves: &[Curve]) -> ((f64, f64), (f64, f64)) {
    let pts = curves.iter().flat_map(|c| c.points.iter()).filter(|p| p.1 > 0.0 && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return ((0.0, 1.0), (1e-6, 1.0));
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    // whole decades on the ε axis
    let y0 = 10f64.powf(y0.log10().floor());
    let y1 = 10f64.powf(y1.log10().ceil()).max(y0 * 10.0);
    ((0.0_f64.min(x0), x1 * 1.05), (y0, y1))
}

pub fn panel_svg(title: &str, curves: &[Curve], markers: &[Marker]) -> anyhow::Result<String> {
    let mut out = String::new();
    {
        let root = SVGBackend::with_string(&mut out, (720, 520)).into_drawing_area();
        root.fill(&WHITE)?;
        let ((x0, x1), (y0, y1)) = bounds(curves);
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 18))
            .margin(12)
            .x_label_area_size(44)
            .y_label_area_size(70)
            .build_cartesian_2d(x0..x1, (y0..y1).log_scale())?;
        chart
            .configure_mesh()
            .x_desc("t_g (us)")
            .y_desc("infidelity")
            .y_label_formatter(&|v| format!("{v:.0e}"))
            .draw()?;
        for c in curves {
            let pts: Vec<(f64, f64)> = c.points.iter().copied().filter(|p| p.1 > 0.0).collect();
            let color = c.color;
            if c.dashed {
                chart
                    .draw_series(DashedLineSeries::new(pts, 6, 4, color.stroke_width(1)))?
                    .label(c.label.clone())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color));
            } else {
                chart
                    .draw_series(LineSeries::new(pts, color.stroke_width(2)))?
                    .label(c.label.clone())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
            }
        }
        chart.draw_series(markers.iter().map(|m| Circle::new(m.at, 5, m.color.filled())))?;
        chart
            .configure_series_labels()
            .position(SeriesLabelPosition::UpperRight)
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()?;
        root.present()?;
    }
    Ok(out)
}
