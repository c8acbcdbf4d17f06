//! Minimal deterministic SVG 1.1 emission.

/// Fixed two-decimal coordinate formatting keeps output byte-stable.
pub(crate) fn coord(v: f64) -> String {
    format!("{v:.2}")
}

/// Short tick-label formatting: up to four decimals, trailing zeros trimmed.
pub(crate) fn tick_label(v: f64) -> String {
    let mut s = format!("{v:.4}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Maps a data interval onto a pixel interval.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LinearScale {
    pub d0: f64,
    pub d1: f64,
    pub r0: f64,
    pub r1: f64,
}

impl LinearScale {
    /// Degenerate domains are widened by one unit either side so every
    /// value still maps inside the range.
    pub fn new(mut d0: f64, mut d1: f64, r0: f64, r1: f64) -> Self {
        if d0 == d1 {
            d0 -= 1.0;
            d1 += 1.0;
        }
        LinearScale { d0, d1, r0, r1 }
    }

    pub fn map(&self, v: f64) -> f64 {
        self.r0 + (v - self.d0) / (self.d1 - self.d0) * (self.r1 - self.r0)
    }

    /// `count` evenly spaced domain values, endpoints included.
    pub fn ticks(&self, count: usize) -> Vec<f64> {
        (0..count)
            .map(|i| self.d0 + (self.d1 - self.d0) * i as f64 / (count - 1) as f64)
            .collect()
    }
}

pub(crate) struct SvgBuilder {
    out: String,
}

impl SvgBuilder {
    pub fn new(width: u32, height: u32) -> Self {
        let mut out = String::new();
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n",
        ));
        out.push_str(&format!(
            "<rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>\n"
        ));
        SvgBuilder { out }
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        self.out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
            coord(x),
            coord(y),
            coord(w),
            coord(h),
            fill
        ));
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str, opacity: f64) {
        self.out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\" fill-opacity=\"{}\"/>\n",
            coord(cx),
            coord(cy),
            coord(r),
            fill,
            coord(opacity)
        ));
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        self.out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"{}\"/>\n",
            coord(x1),
            coord(y1),
            coord(x2),
            coord(y2),
            stroke,
            coord(width)
        ));
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], stroke: &str, width: f64) {
        if points.is_empty() {
            return;
        }
        let pts: Vec<String> = points
            .iter()
            .map(|(x, y)| format!("{},{}", coord(*x), coord(*y)))
            .collect();
        self.out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"/>\n",
            pts.join(" "),
            stroke,
            coord(width)
        ));
    }

    pub fn text(&mut self, x: f64, y: f64, size: u32, anchor: &str, content: &str) {
        self.out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"{}\" text-anchor=\"{}\" fill=\"#333333\">{}</text>\n",
            coord(x),
            coord(y),
            size,
            anchor,
            escape(content)
        ));
    }

    pub fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}
