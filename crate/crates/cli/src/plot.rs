//! SVG rendering of the admissibility picture: the forbidden domains around
//! `f± = ±√R/λ` with an optional polynomial graph on top.
//!
//! Every black rectangle covers whole pixels lying strictly inside a forbidden
//! domain over the full width of its column, so an admissible graph sampled at
//! column centres never lands on a black pixel.

use std::fmt::Write as _;

use sg_core::admissibility::RealPolynomial;
use sg_core::spectral_curve::SpectralCurve;

const COLUMN_SAMPLES: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct View {
    pub x_min: f64,
    pub x_max: f64,
    /// The vertical range is `[-y_max, y_max]`.
    pub y_max: f64,
    pub width: u32,
    pub height: u32,
}

impl View {
    pub fn fit(curve: &SpectralCurve, p: Option<&RealPolynomial>, width: u32, height: u32) -> Self {
        let scale = curve.scale();
        let lo = curve
            .branch_points()
            .iter()
            .map(|z| z.re)
            .fold(0.0_f64, f64::min);
        let x_min = lo - 0.15 * scale;
        let x_max = 0.6 * scale;
        let mut y: f64 = 1e-3;
        let mut positive_min = f64::INFINITY;
        for i in 0..=400 {
            let x = x_min + (x_max - x_min) * i as f64 / 400.0;
            if let Some(f) = boundary(curve, x) {
                if x < 0.0 {
                    y = y.max(f);
                } else {
                    positive_min = positive_min.min(f);
                }
            }
            if let Some(p) = p {
                y = y.max(p.eval(x).abs());
            }
        }
        if let Some(f) = boundary(curve, x_max) {
            y = y.max(f);
        }
        if positive_min.is_finite() {
            y = y.max(positive_min);
        }
        Self {
            x_min,
            x_max,
            y_max: 1.15 * y,
            width,
            height,
        }
    }

    fn x_at(&self, px: f64) -> f64 {
        self.x_min + (self.x_max - self.x_min) * px / self.width as f64
    }

    fn x_to_px(&self, x: f64) -> f64 {
        (x - self.x_min) / (self.x_max - self.x_min) * self.width as f64
    }

    pub fn y_to_px(&self, y: f64) -> f64 {
        (self.y_max - y) / (2.0 * self.y_max) * self.height as f64
    }
}

/// `√R(λ)/|λ|` where `R(λ) ≥ 0`.
fn boundary(curve: &SpectralCurve, x: f64) -> Option<f64> {
    let r = curve.eval_r_real(x);
    (r >= 0.0 && x != 0.0).then(|| r.sqrt() / x.abs())
}

/// Pixel rows `[r0, r1)` strictly between the pixel coordinates `a < b`.
fn inner_rows(a: f64, b: f64, height: u32) -> Option<(u32, u32)> {
    let r0 = (a.floor() + 1.0).max(0.0);
    let r1 = (b.ceil() - 1.0).min(height as f64);
    (r1 > r0).then_some((r0 as u32, r1 as u32))
}

/// Black row ranges for pixel column `col`.
pub fn column_domains(curve: &SpectralCurve, view: &View, col: u32) -> Vec<(u32, u32)> {
    let a = view.x_at(col as f64);
    let b = view.x_at(col as f64 + 1.0);
    if a <= 0.0 && b >= 0.0 {
        return Vec::new();
    }
    let straddles_branch = curve
        .branch_points()
        .iter()
        .any(|z| z.im == 0.0 && z.re >= a && z.re <= b);
    if straddles_branch {
        return Vec::new();
    }
    let samples: Option<Vec<f64>> = (0..COLUMN_SAMPLES)
        .map(|i| boundary(curve, a + (b - a) * i as f64 / (COLUMN_SAMPLES - 1) as f64))
        .collect();
    let Some(samples) = samples else {
        return Vec::new();
    };
    let h = view.height;
    if b < 0.0 {
        let f = samples.iter().copied().fold(f64::INFINITY, f64::min);
        inner_rows(view.y_to_px(f), view.y_to_px(-f), h)
            .into_iter()
            .collect()
    } else {
        let f = samples.iter().copied().fold(0.0, f64::max);
        [
            inner_rows(-1.0, view.y_to_px(f), h),
            inner_rows(view.y_to_px(-f), h as f64 + 1.0, h),
        ]
        .into_iter()
        .flatten()
        .collect()
    }
}

fn coord(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

pub fn render_svg(
    curve: &SpectralCurve,
    p: Option<&RealPolynomial>,
    width: u32,
    height: u32,
) -> String {
    let view = View::fit(curve, p, width, height);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#
    );
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<g class="domain" fill="black" shape-rendering="crispEdges">"#
    );
    for col in 0..width {
        for (r0, r1) in column_domains(curve, &view, col) {
            let _ = writeln!(
                out,
                r#"<rect x="{col}" y="{r0}" width="1" height="{}"/>"#,
                r1 - r0
            );
        }
    }
    let _ = writeln!(out, "</g>");

    let axis_y = coord(view.y_to_px(0.0));
    let axis_x = coord(view.x_to_px(0.0));
    let _ = writeln!(
        out,
        r##"<g class="axes" stroke="#888888" stroke-width="0.5"><line x1="0" y1="{axis_y}" x2="{width}" y2="{axis_y}"/><line x1="{axis_x}" y1="0" x2="{axis_x}" y2="{height}"/></g>"##
    );

    if let Some(p) = p {
        let pts: Vec<String> = (0..width)
            .map(|col| {
                let px = col as f64 + 0.5;
                let py = view
                    .y_to_px(p.eval(view.x_at(px)))
                    .clamp(-2.0, height as f64 + 2.0);
                format!("{},{}", coord(px), coord(py))
            })
            .collect();
        let _ = writeln!(
            out,
            r##"<polyline class="graph" fill="none" stroke="#d01010" stroke-width="1.5" points="{}"/>"##,
            pts.join(" ")
        );
    }
    let _ = writeln!(out, "</svg>");
    out
}
