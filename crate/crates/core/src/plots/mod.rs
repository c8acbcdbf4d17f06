//! Deterministic SVG plots with machine-readable CSV twins.
//!
//! Every plot renders to a static SVG 1.1 document plus a CSV carrying the
//! underlying data, so the SVG is a view and never a source of truth.
//! Rendering is pure: fixed inputs (including the jitter seed) produce
//! byte-identical output.

mod bars;
mod dependence;
mod pdp;
mod summary;
mod svg;

pub use bars::importance_plot;
pub use dependence::dependence_plot;
pub use pdp::{partial_dependence, pdp_plot, PdpCurve};
pub use summary::summary_plot;

use thiserror::Error;

use crate::attribution::AttributionError;
use crate::dataset::DatasetError;
use crate::math;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("unknown feature '{0}'")]
    UnknownFeature(String),
    #[error("feature '{0}' has no observed values")]
    FeatureAllMissing(String),
    #[error("grid size must be at least 2, got {0}")]
    BadGrid(usize),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Attribution(#[from] AttributionError),
}

/// A 24-bit color serialized as 6-digit lowercase hex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Rgb { r, g, b }
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let s = s.strip_prefix('#')?;
        if s.len() != 6 {
            return None;
        }
        let r = u8::from_str_radix(&s[0..2], 16).ok()?;
        let g = u8::from_str_radix(&s[2..4], 16).ok()?;
        let b = u8::from_str_radix(&s[4..6], 16).ok()?;
        Some(Rgb { r, g, b })
    }

    pub fn to_hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.r, self.g, self.b)
    }

    pub fn lerp(self, other: Rgb, t: f64) -> Rgb {
        let t = t.clamp(0.0, 1.0);
        let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t).round() as u8;
        Rgb {
            r: mix(self.r, other.r),
            g: mix(self.g, other.g),
            b: mix(self.b, other.b),
        }
    }
}

/// Rendering parameters shared by all plots.
#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub width: u32,
    pub height: u32,
    pub top_k: usize,
    /// Dot color at the low end of a feature's value range.
    pub low_color: Rgb,
    /// Dot color at the high end of a feature's value range.
    pub high_color: Rgb,
    /// Dot color for missing feature values.
    pub missing_color: Rgb,
    pub jitter_seed: u64,
}

impl Default for PlotSpec {
    fn default() -> Self {
        PlotSpec {
            width: 860,
            height: 520,
            top_k: 20,
            low_color: Rgb::new(0x1e, 0x88, 0xe5),
            high_color: Rgb::new(0xff, 0x0d, 0x57),
            missing_color: Rgb::new(0x00, 0x00, 0x00),
            jitter_seed: 42,
        }
    }
}

/// A rendered plot: the SVG document, its CSV twin, and any warnings
/// (clamped top_k and the like) for the caller to surface.
#[derive(Debug, Clone)]
pub struct PlotOutput {
    pub svg: String,
    pub csv: String,
    pub warnings: Vec<String>,
}

/// Converts an attribution delta on the log-odds scale to an odds ratio.
pub fn odds_from_logodds(delta: f64) -> f64 {
    delta.exp()
}

/// Per-feature color scale: min-max over the 1st..99th percentile of the
/// observed values, missing values pinned to the missing color.
#[derive(Debug, Clone)]
pub(crate) struct ColorScale {
    lo: f64,
    hi: f64,
    low_color: Rgb,
    high_color: Rgb,
    missing_color: Rgb,
}

impl ColorScale {
    pub fn for_values(values: &[f64], spec: &PlotSpec) -> Self {
        let mut present: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
        present.sort_by(f64::total_cmp);
        let (lo, hi) = if present.is_empty() {
            (0.0, 0.0)
        } else {
            (
                math::quantile_sorted(&present, 0.01),
                math::quantile_sorted(&present, 0.99),
            )
        };
        ColorScale {
            lo,
            hi,
            low_color: spec.low_color,
            high_color: spec.high_color,
            missing_color: spec.missing_color,
        }
    }

    pub fn color(&self, value: f64) -> Rgb {
        if value.is_nan() {
            return self.missing_color;
        }
        let t = if self.hi == self.lo {
            0.5
        } else {
            ((value - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
        };
        self.low_color.lerp(self.high_color, t)
    }
}

/// Equal-width histogram over observed values. The final bin includes its
/// upper edge so the counts always total the number of inputs.
pub(crate) fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let present: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    if present.is_empty() {
        return Vec::new();
    }
    let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return vec![(lo, hi, present.len())];
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in &present {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + width * i as f64, lo + width * (i + 1) as f64, c))
        .collect()
}
