//! Horizontal bar chart of an importance report.

use crate::importance::ImportanceReport;

use super::svg::{tick_label, LinearScale, SvgBuilder};
use super::{PlotOutput, PlotSpec};

const MARGIN_LEFT: f64 = 170.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 34.0;
const MARGIN_BOTTOM: f64 = 46.0;

/// Bars in ranking order (descending score, name tie-break), longest on
/// top. CSV twin: feature, score, rank.
pub fn importance_plot(report: &ImportanceReport, top_k: usize, spec: &PlotSpec) -> PlotOutput {
    let k = report.feature_names.len();
    let mut warnings = Vec::new();
    let mut top_k = top_k.max(1);
    if top_k > k {
        warnings.push(format!(
            "top_k {} exceeds the {} available features; clamped",
            top_k, k
        ));
        top_k = k;
    }
    let order = &report.ranking[..top_k];

    let plot_w = spec.width as f64 - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = spec.height as f64 - MARGIN_TOP - MARGIN_BOTTOM;
    let band = plot_h / top_k as f64;
    let max_score = order
        .iter()
        .map(|&i| report.scores[i])
        .fold(0.0f64, f64::max);
    let x_scale = LinearScale::new(0.0, max_score.max(1e-12), MARGIN_LEFT, MARGIN_LEFT + plot_w);

    let mut svg = SvgBuilder::new(spec.width, spec.height);
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["feature", "score", "rank"])
        .expect("csv write");

    for (r, &fi) in order.iter().enumerate() {
        let name = &report.feature_names[fi];
        let score = report.scores[fi];
        let y = MARGIN_TOP + band * r as f64 + band * 0.15;
        let w = x_scale.map(score) - MARGIN_LEFT;
        svg.rect(
            MARGIN_LEFT,
            y,
            w.max(0.0),
            band * 0.7,
            &spec.low_color.to_hex(),
        );
        svg.text(MARGIN_LEFT - 8.0, y + band * 0.35 + 4.0, 12, "end", name);
        csv.write_record([name.as_str(), &format!("{score}"), &(r + 1).to_string()])
            .expect("csv write");
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
    for t in x_scale.ticks(5) {
        let x = x_scale.map(t);
        svg.line(x, axis_y, x, axis_y + 4.0, "#333333", 1.0);
        svg.text(x, axis_y + 18.0, 11, "middle", &tick_label(t));
    }
    svg.text(
        MARGIN_LEFT + plot_w / 2.0,
        axis_y + 36.0,
        12,
        "middle",
        &format!("{} importance", report.method),
    );

    PlotOutput {
        svg: svg.finish(),
        csv: String::from_utf8(csv.into_inner().expect("csv flush")).expect("csv utf8"),
        warnings,
    }
}
