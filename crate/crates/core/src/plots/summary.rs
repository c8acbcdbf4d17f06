//! Beeswarm-style overview of the strongest features.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attribution::ShapMatrix;
use crate::dataset::Dataset;
use crate::importance::variance_importance;

use super::svg::{tick_label, LinearScale, SvgBuilder};
use super::{ColorScale, PlotError, PlotOutput, PlotSpec};

const MARGIN_LEFT: f64 = 170.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 34.0;
const MARGIN_BOTTOM: f64 = 46.0;

/// One row per feature, ordered by variance importance; one dot per
/// dataset row at x = attribution, colored by the feature's own value
/// (missing values in the missing color), with deterministic vertical
/// jitter. The CSV twin lists every dot.
pub fn summary_plot(
    shap: &ShapMatrix,
    dataset: &Dataset,
    spec: &PlotSpec,
) -> Result<PlotOutput, PlotError> {
    let aligned = dataset.aligned_to(&shap.feature_names)?;
    let k = shap.n_features();
    let mut warnings = Vec::new();
    let mut top_k = spec.top_k.max(1);
    if top_k > k {
        warnings.push(format!(
            "top_k {} exceeds the {} available features; clamped",
            top_k, k
        ));
        top_k = k;
    }
    let importance = variance_importance(shap);
    let order: Vec<usize> = importance.ranking[..top_k].to_vec();

    // Common x scale over every plotted attribution, zero included.
    let mut x_min = 0.0f64;
    let mut x_max = 0.0f64;
    for &fi in &order {
        for v in shap.column(fi) {
            x_min = x_min.min(v);
            x_max = x_max.max(v);
        }
    }
    let pad = 0.05 * (x_max - x_min).max(1e-12);
    let plot_w = spec.width as f64 - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = spec.height as f64 - MARGIN_TOP - MARGIN_BOTTOM;
    let x_scale = LinearScale::new(x_min - pad, x_max + pad, MARGIN_LEFT, MARGIN_LEFT + plot_w);
    let band = plot_h / top_k as f64;

    let mut svg = SvgBuilder::new(spec.width, spec.height);
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["feature", "row_id", "phi", "value", "is_missing"])
        .expect("csv write");

    // Zero reference line.
    let zero_x = x_scale.map(0.0);
    svg.line(
        zero_x,
        MARGIN_TOP,
        zero_x,
        MARGIN_TOP + plot_h,
        "#bbbbbb",
        1.0,
    );

    let mut rng = ChaCha8Rng::seed_from_u64(spec.jitter_seed);
    let dot_r = (band * 0.18).clamp(1.5, 4.0);
    for (r, &fi) in order.iter().enumerate() {
        let name = &shap.feature_names[fi];
        let values = aligned.numeric_column(fi)?;
        let scale = ColorScale::for_values(values, spec);
        let y_center = MARGIN_TOP + band * (r as f64 + 0.5);
        svg.text(MARGIN_LEFT - 8.0, y_center + 4.0, 12, "end", name);
        if r > 0 {
            svg.line(
                MARGIN_LEFT,
                MARGIN_TOP + band * r as f64,
                MARGIN_LEFT + plot_w,
                MARGIN_TOP + band * r as f64,
                "#eeeeee",
                0.5,
            );
        }
        for (j, row) in shap.phi.iter().enumerate() {
            let phi = row[fi];
            let value = values[j];
            let jitter = (rng.random::<f64>() - 0.5) * band * 0.7;
            svg.circle(
                x_scale.map(phi),
                y_center + jitter,
                dot_r,
                &scale.color(value).to_hex(),
                0.8,
            );
            csv.write_record([
                name.as_str(),
                &shap.row_ids[j].to_string(),
                &format!("{phi}"),
                &if value.is_nan() {
                    String::new()
                } else {
                    format!("{value}")
                },
                if value.is_nan() { "1" } else { "0" },
            ])
            .expect("csv write");
        }
    }

    // X axis with ticks.
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
        "attribution (log-odds)",
    );

    Ok(PlotOutput {
        svg: svg.finish(),
        csv: String::from_utf8(csv.into_inner().expect("csv flush")).expect("csv utf8"),
        warnings,
    })
}
