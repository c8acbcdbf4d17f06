//! Scatter of one feature's values against its attributions, with
//! marginal histograms and an optional second feature driving dot color.

use crate::attribution::ShapMatrix;
use crate::dataset::Dataset;
use crate::math;

use super::svg::{tick_label, LinearScale, SvgBuilder};
use super::{histogram, ColorScale, PlotError, PlotOutput, PlotSpec};

const MARGIN_LEFT: f64 = 130.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 100.0;
const MARGIN_BOTTOM: f64 = 50.0;
const HIST_SIZE: f64 = 60.0;
const HIST_BINS: usize = 20;

/// Rows whose feature value takes at most this many distinct values also
/// get a per-value mean line, comparable to a partial dependence curve.
pub const MEAN_LINE_MAX_DISTINCT: usize = 50;

/// The per-value mean attribution series drawn when the feature is
/// discrete enough.
pub(crate) fn mean_line(xs: &[f64], phis: &[f64]) -> Option<Vec<(f64, f64)>> {
    let mut pairs: Vec<(f64, f64)> = xs
        .iter()
        .zip(phis)
        .filter(|(x, _)| !x.is_nan())
        .map(|(&x, &p)| (x, p))
        .collect();
    if pairs.is_empty() {
        return None;
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut series: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < pairs.len() {
        let x = pairs[i].0;
        let mut j = i;
        while j < pairs.len() && pairs[j].0 == x {
            j += 1;
        }
        let mean = math::mean(pairs[i..j].iter().map(|(_, p)| *p));
        series.push((x, mean));
        i = j;
    }
    if series.len() <= MEAN_LINE_MAX_DISTINCT {
        Some(series)
    } else {
        None
    }
}

/// Renders the dependence plot of `feature`. Rows with a missing feature
/// value are excluded from the scatter and the x-histogram but reported in
/// the CSV (series `missing` plus a `missing_tally` record).
pub fn dependence_plot(
    shap: &ShapMatrix,
    dataset: &Dataset,
    feature: &str,
    color_by: Option<&str>,
    spec: &PlotSpec,
) -> Result<PlotOutput, PlotError> {
    let aligned = dataset.aligned_to(&shap.feature_names)?;
    let fi = shap
        .feature_index(feature)
        .ok_or_else(|| PlotError::UnknownFeature(feature.to_string()))?;
    let ci = match color_by {
        Some(name) => Some(
            shap.feature_index(name)
                .ok_or_else(|| PlotError::UnknownFeature(name.to_string()))?,
        ),
        None => None,
    };

    let xs = aligned.numeric_column(fi)?;
    let phis: Vec<f64> = shap.column(fi).collect();
    let color_values = match ci {
        Some(c) => Some(aligned.numeric_column(c)?),
        None => None,
    };
    let color_scale = color_values.map(|vals| ColorScale::for_values(vals, spec));

    let present: Vec<usize> = (0..xs.len()).filter(|&j| !xs[j].is_nan()).collect();
    let missing: Vec<usize> = (0..xs.len()).filter(|&j| xs[j].is_nan()).collect();

    let plot_w = spec.width as f64 - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = spec.height as f64 - MARGIN_TOP - MARGIN_BOTTOM;

    let (x_lo, x_hi) = bounds(present.iter().map(|&j| xs[j]));
    let (y_lo, y_hi) = bounds(present.iter().map(|&j| phis[j]));
    let x_scale = LinearScale::new(x_lo, x_hi, MARGIN_LEFT, MARGIN_LEFT + plot_w);
    let y_scale = LinearScale::new(y_lo, y_hi, MARGIN_TOP + plot_h, MARGIN_TOP);

    let mut svg = SvgBuilder::new(spec.width, spec.height);
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["series", "row_id", "x", "y", "aux"])
        .expect("csv write");

    // Marginal histograms: feature values along the top, attributions on
    // the left. Sparse regions warn that estimates there rest on few rows.
    let x_hist = histogram(
        &present.iter().map(|&j| xs[j]).collect::<Vec<_>>(),
        HIST_BINS,
    );
    let y_hist = histogram(
        &present.iter().map(|&j| phis[j]).collect::<Vec<_>>(),
        HIST_BINS,
    );
    let x_hist_max = x_hist.iter().map(|(_, _, c)| *c).max().unwrap_or(1).max(1);
    let y_hist_max = y_hist.iter().map(|(_, _, c)| *c).max().unwrap_or(1).max(1);
    for &(lo, hi, count) in &x_hist {
        let h = HIST_SIZE * count as f64 / x_hist_max as f64;
        let x0 = x_scale.map(lo);
        let x1 = x_scale.map(hi);
        svg.rect(x0, MARGIN_TOP - 10.0 - h, (x1 - x0).max(0.5), h, "#b0c4de");
        csv.write_record([
            "hist_x",
            "",
            &format!("{lo}"),
            &format!("{hi}"),
            &count.to_string(),
        ])
        .expect("csv write");
    }
    for &(lo, hi, count) in &y_hist {
        let w = HIST_SIZE * count as f64 / y_hist_max as f64;
        let y0 = y_scale.map(hi);
        let y1 = y_scale.map(lo);
        svg.rect(MARGIN_LEFT - 10.0 - w, y0, w, (y1 - y0).max(0.5), "#b0c4de");
        csv.write_record([
            "hist_y",
            "",
            &format!("{lo}"),
            &format!("{hi}"),
            &count.to_string(),
        ])
        .expect("csv write");
    }

    // Scatter.
    let default_color = spec.low_color.to_hex();
    for &j in &present {
        let color = match (&color_scale, color_values) {
            (Some(scale), Some(vals)) => scale.color(vals[j]).to_hex(),
            _ => default_color.clone(),
        };
        svg.circle(x_scale.map(xs[j]), y_scale.map(phis[j]), 3.0, &color, 0.75);
        let aux = match color_values {
            Some(vals) if !vals[j].is_nan() => format!("{}", vals[j]),
            _ => String::new(),
        };
        csv.write_record([
            "point",
            &shap.row_ids[j].to_string(),
            &format!("{}", xs[j]),
            &format!("{}", phis[j]),
            &aux,
        ])
        .expect("csv write");
    }
    for &j in &missing {
        csv.write_record([
            "missing",
            &shap.row_ids[j].to_string(),
            "",
            &format!("{}", phis[j]),
            "",
        ])
        .expect("csv write");
    }
    csv.write_record(["missing_tally", "", "", "", &missing.len().to_string()])
        .expect("csv write");

    // Mean attribution per distinct value, when discrete enough.
    if let Some(series) = mean_line(xs, &phis) {
        let pts: Vec<(f64, f64)> = series
            .iter()
            .map(|&(x, m)| (x_scale.map(x), y_scale.map(m)))
            .collect();
        svg.polyline(&pts, "#ff8f00", 2.0);
        for (x, m) in &series {
            csv.write_record(["mean", "", &format!("{x}"), &format!("{m}"), ""])
                .expect("csv write");
        }
    }

    // Axes.
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
        svg.text(
            MARGIN_LEFT - 14.0 - HIST_SIZE,
            y + 4.0,
            11,
            "end",
            &tick_label(t),
        );
    }
    svg.text(
        MARGIN_LEFT + plot_w / 2.0,
        axis_y + 36.0,
        12,
        "middle",
        feature,
    );
    let y_label = match color_by {
        Some(c) => format!("attribution of {feature} (colored by {c})"),
        None => format!("attribution of {feature} (log-odds)"),
    };
    svg.text(MARGIN_LEFT + plot_w / 2.0, 18.0, 12, "middle", &y_label);

    Ok(PlotOutput {
        svg: svg.finish(),
        csv: String::from_utf8(csv.into_inner().expect("csv flush")).expect("csv utf8"),
        warnings: Vec::new(),
    })
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}
