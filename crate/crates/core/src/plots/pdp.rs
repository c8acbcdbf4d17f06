//! Partial dependence: mean margin as one feature sweeps a value grid.

use crate::dataset::Dataset;
use crate::math::{self, KahanSum};
use crate::model::Model;

use super::svg::{tick_label, LinearScale, SvgBuilder};
use super::{PlotError, PlotOutput, PlotSpec};

/// Mean model output over the dataset at each grid value of one feature.
#[derive(Debug, Clone)]
pub struct PdpCurve {
    /// Strictly increasing grid of feature values.
    pub grid: Vec<f64>,
    /// Mean margin with the feature forced to the matching grid value.
    pub mean_margin: Vec<f64>,
}

/// Computes the partial dependence of `feature`. The grid is quantile
/// spaced over the observed (non-missing) values, deduplicated; every
/// dataset row is evaluated with the feature forced to each grid value.
pub fn partial_dependence(
    model: &Model,
    dataset: &Dataset,
    feature: &str,
    grid_size: usize,
) -> Result<PdpCurve, PlotError> {
    if grid_size < 2 {
        return Err(PlotError::BadGrid(grid_size));
    }
    let fi = model
        .feature_names()
        .iter()
        .position(|n| n == feature)
        .ok_or_else(|| PlotError::UnknownFeature(feature.to_string()))?;
    let aligned = dataset.aligned_to(model.feature_names())?;
    let mut rows = aligned.numeric_rows()?;

    let mut observed: Vec<f64> = rows.iter().map(|r| r[fi]).filter(|v| !v.is_nan()).collect();
    if observed.is_empty() {
        return Err(PlotError::FeatureAllMissing(feature.to_string()));
    }
    observed.sort_by(f64::total_cmp);

    let mut grid: Vec<f64> = (0..grid_size)
        .map(|i| math::quantile_sorted(&observed, i as f64 / (grid_size - 1) as f64))
        .collect();
    grid.dedup();

    let n = rows.len() as f64;
    let mut mean_margin = Vec::with_capacity(grid.len());
    for &g in &grid {
        let mut acc = KahanSum::new();
        for row in &mut rows {
            let saved = row[fi];
            row[fi] = g;
            let margin = model.predict_margin(row);
            row[fi] = saved;
            acc.add(margin?.0);
        }
        mean_margin.push(acc.value() / n);
    }
    Ok(PdpCurve { grid, mean_margin })
}

/// Computes the curve and renders it as a line plot with a CSV twin.
pub fn pdp_plot(
    model: &Model,
    dataset: &Dataset,
    feature: &str,
    grid_size: usize,
    spec: &PlotSpec,
) -> Result<(PdpCurve, PlotOutput), PlotError> {
    let curve = partial_dependence(model, dataset, feature, grid_size)?;

    const MARGIN_LEFT: f64 = 70.0;
    const MARGIN_RIGHT: f64 = 30.0;
    const MARGIN_TOP: f64 = 34.0;
    const MARGIN_BOTTOM: f64 = 50.0;
    let plot_w = spec.width as f64 - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = spec.height as f64 - MARGIN_TOP - MARGIN_BOTTOM;

    let x_lo = *curve.grid.first().expect("grid is nonempty");
    let x_hi = *curve.grid.last().expect("grid is nonempty");
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for &m in &curve.mean_margin {
        y_lo = y_lo.min(m);
        y_hi = y_hi.max(m);
    }
    let x_scale = LinearScale::new(x_lo, x_hi, MARGIN_LEFT, MARGIN_LEFT + plot_w);
    let y_scale = LinearScale::new(y_lo, y_hi, MARGIN_TOP + plot_h, MARGIN_TOP);

    let mut svg = SvgBuilder::new(spec.width, spec.height);
    let pts: Vec<(f64, f64)> = curve
        .grid
        .iter()
        .zip(&curve.mean_margin)
        .map(|(&g, &m)| (x_scale.map(g), y_scale.map(m)))
        .collect();
    svg.polyline(&pts, &spec.low_color.to_hex(), 2.0);
    for &(x, y) in &pts {
        svg.circle(x, y, 2.5, &spec.low_color.to_hex(), 1.0);
    }

    let axis_y = MARGIN_TOP + plot_h;
    svg.line(
        MARGIN_LEFT,
        axis_y,
        MARGIN_LEFT + plot_w,
        axis_y,
        "#333333",
        1.0,
    );
    svg.line(MARGIN_LEFT, MARGIN_TOP, MARGIN_LEFT, axis_y, "#333333", 1.0);
    for t in x_scale.ticks(5) {
        let x = x_scale.map(t);
        svg.line(x, axis_y, x, axis_y + 4.0, "#333333", 1.0);
        svg.text(x, axis_y + 18.0, 11, "middle", &tick_label(t));
    }
    for t in y_scale.ticks(5) {
        let y = y_scale.map(t);
        svg.line(MARGIN_LEFT - 4.0, y, MARGIN_LEFT, y, "#333333", 1.0);
        svg.text(MARGIN_LEFT - 8.0, y + 4.0, 11, "end", &tick_label(t));
    }
    svg.text(
        MARGIN_LEFT + plot_w / 2.0,
        axis_y + 36.0,
        12,
        "middle",
        feature,
    );
    svg.text(
        MARGIN_LEFT + plot_w / 2.0,
        18.0,
        12,
        "middle",
        &format!("partial dependence of {feature} (log-odds)"),
    );

    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["grid", "mean_margin"])
        .expect("csv write");
    for (g, m) in curve.grid.iter().zip(&curve.mean_margin) {
        csv.write_record([&format!("{g}"), &format!("{m}")])
            .expect("csv write");
    }

    let output = PlotOutput {
        svg: svg.finish(),
        csv: String::from_utf8(csv.into_inner().expect("csv flush")).expect("csv utf8"),
        warnings: Vec::new(),
    };
    Ok((curve, output))
}
