//! Deterministic SVG chart emitters for the standard figures: the PDP grid,
//! the residual parallel-coordinate plot, the train/test scatter matrix, and
//! the couple curves.
//!
//! Charts are standalone SVG 1.1 documents built from strings with every
//! coordinate formatted at six significant digits, so identical inputs yield
//! byte-identical files.

use std::fmt::Write as _;

use crate::couple::CoupleSpec;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::explain::{PDProfile, ResidualTable};

const MODEL_COLORS: [&str; 4] = ["#4e79a7", "#e15759", "#59a14f", "#b07aa1"];
const TRAIN_COLOR: &str = "#4e79a7";
const TEST_COLOR: &str = "#f28e2b";

/// Six-significant-digit coordinate formatting with trailing zeros trimmed.
pub fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return "0".to_string();
    }
    let mag = v.abs().log10().floor() as i32;
    let mut s = if mag > 5 {
        let factor = 10f64.powi(mag - 5);
        format!("{:.0}", (v / factor).round() * factor)
    } else {
        let decimals = (5 - mag).clamp(0, 14) as usize;
        format!("{v:.decimals$}")
    };
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

struct Canvas {
    body: String,
    width: f64,
    height: f64,
}

impl Canvas {
    fn new(width: f64, height: f64) -> Self {
        Self { body: String::new(), width, height }
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, style: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{}" y="{}" width="{}" height="{}" style="{style}"/>"#,
            sig6(x),
            sig6(y),
            sig6(w),
            sig6(h)
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, style: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" style="{style}"/>"#,
            sig6(x1),
            sig6(y1),
            sig6(x2),
            sig6(y2)
        );
    }

    fn poly(&mut self, tag: &str, pts: &[(f64, f64)], style: &str) {
        let mut s = String::new();
        for (i, (x, y)) in pts.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{},{}", sig6(*x), sig6(*y));
        }
        let _ = writeln!(self.body, r#"<{tag} points="{s}" style="{style}"/>"#);
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, style: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{}" cy="{}" r="{}" style="{style}"/>"#,
            sig6(x),
            sig6(y),
            sig6(r)
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, size: f64, content: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" text-anchor="{anchor}" font-family="sans-serif" font-size="{}">{}</text>"#,
            sig6(x),
            sig6(y),
            sig6(size),
            escape(content)
        );
    }

    fn finish(self) -> String {
        format!(
            "<svg version=\"1.1\" xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n{}</svg>\n",
            sig6(self.width),
            sig6(self.height),
            sig6(self.width),
            sig6(self.height),
            sig6(self.width),
            sig6(self.height),
            self.body
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Scale {
    lo: f64,
    hi: f64,
    out_lo: f64,
    out_hi: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, out_lo: f64, out_hi: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        Self { lo, hi, out_lo, out_hi }
    }

    fn at(&self, v: f64) -> f64 {
        self.out_lo + (v - self.lo) / (self.hi - self.lo) * (self.out_hi - self.out_lo)
    }
}

fn minmax<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Grid of PDP panels: one row per model, one column per feature, shared y
/// range, with CI bands where present.
pub fn pdp_grid(profiles: &[PDProfile]) -> Result<String> {
    if profiles.is_empty() {
        return Err(Error::Config("no profiles to plot".into()));
    }
    let mut model_order: Vec<&str> = Vec::new();
    let mut feature_order: Vec<&str> = Vec::new();
    for p in profiles {
        if !model_order.contains(&p.model.as_str()) {
            model_order.push(&p.model);
        }
        if !feature_order.contains(&p.feature.as_str()) {
            feature_order.push(&p.feature);
        }
    }
    let find = |m: &str, f: &str| -> Result<&PDProfile> {
        profiles
            .iter()
            .find(|p| p.model == m && p.feature == f)
            .ok_or_else(|| Error::Config(format!("missing profile for ({m}, {f})")))
    };

    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in profiles {
        let (lo, hi) = minmax(p.pd.iter().chain(&p.ci_lo).chain(&p.ci_hi));
        y_lo = y_lo.min(lo);
        y_hi = y_hi.max(hi);
    }

    let (pw, ph) = (210.0, 140.0);
    let (left, top, gap) = (150.0, 34.0, 14.0);
    let width = left + feature_order.len() as f64 * (pw + gap) + 20.0;
    let height = top + model_order.len() as f64 * (ph + gap) + 30.0;
    let mut cv = Canvas::new(width, height);

    for (ci, feat) in feature_order.iter().enumerate() {
        let x0 = left + ci as f64 * (pw + gap);
        cv.text(x0 + pw / 2.0, top - 10.0, "middle", 13.0, feat);
    }
    for (ri, model) in model_order.iter().enumerate() {
        let y0 = top + ri as f64 * (ph + gap);
        cv.text(left - 12.0, y0 + ph / 2.0, "end", 12.0, model);
        let color = MODEL_COLORS[ri % MODEL_COLORS.len()];
        for (ci, feat) in feature_order.iter().enumerate() {
            let x0 = left + ci as f64 * (pw + gap);
            let p = find(model, feat)?;
            let (x_lo, x_hi) = minmax(p.grid.iter());
            let sx = Scale::new(x_lo, x_hi, x0, x0 + pw);
            let sy = Scale::new(y_lo, y_hi, y0 + ph, y0);
            cv.rect(x0, y0, pw, ph, "fill:none;stroke:#999;stroke-width:1");
            if p.n_boot > 0 {
                let mut band: Vec<(f64, f64)> = p
                    .grid
                    .iter()
                    .zip(&p.ci_hi)
                    .map(|(&g, &v)| (sx.at(g), sy.at(v)))
                    .collect();
                for (k, &g) in p.grid.iter().enumerate().rev() {
                    band.push((sx.at(g), sy.at(p.ci_lo[k])));
                }
                cv.poly("polygon", &band, &format!("fill:{color};fill-opacity:0.25;stroke:none"));
            }
            let pts: Vec<(f64, f64)> =
                p.grid.iter().zip(&p.pd).map(|(&g, &v)| (sx.at(g), sy.at(v))).collect();
            cv.poly("polyline", &pts, &format!("fill:none;stroke:{color};stroke-width:1.6"));
        }
    }
    // Shared y-axis labels on the leftmost panel edge.
    cv.text(left - 12.0, top + 4.0, "end", 10.0, &format!("{:.2}", y_hi));
    cv.text(
        left - 12.0,
        top + model_order.len() as f64 * (ph + gap) - gap + 4.0,
        "end",
        10.0,
        &format!("{:.2}", y_lo),
    );
    Ok(cv.finish())
}

/// Parallel-coordinate plot of residuals: one vertical axis per model, one
/// polyline per test observation.
pub fn residual_parcoord(rt: &ResidualTable) -> Result<String> {
    let n = rt.columns.first().map_or(0, Vec::len);
    if rt.labels.is_empty() || n == 0 {
        return Err(Error::Config("empty residual table".into()));
    }
    let k = rt.labels.len();
    let (width, height) = (220.0 * k as f64, 520.0);
    let (top, bottom) = (50.0, 40.0);
    let mut cv = Canvas::new(width, height);
    let (lo, hi) = minmax(rt.columns.iter().flatten());
    let sy = Scale::new(lo, hi, height - bottom, top);
    let ax = |m: usize| -> f64 { 110.0 + m as f64 * 220.0 };

    for i in 0..n {
        let pts: Vec<(f64, f64)> =
            (0..k).map(|m| (ax(m), sy.at(rt.columns[m][i]))).collect();
        cv.poly("polyline", &pts, "fill:none;stroke:#335;stroke-width:0.5;stroke-opacity:0.12");
    }
    for m in 0..k {
        cv.line(ax(m), top, ax(m), height - bottom, "stroke:#333;stroke-width:1.5");
        cv.text(ax(m), top - 16.0, "middle", 13.0, &rt.labels[m]);
        cv.text(ax(m) + 8.0, sy.at(hi) + 4.0, "start", 10.0, &format!("{hi:.2}"));
        cv.text(ax(m) + 8.0, sy.at(lo) + 4.0, "start", 10.0, &format!("{lo:.2}"));
        if lo < 0.0 && hi > 0.0 {
            cv.line(ax(m) - 6.0, sy.at(0.0), ax(m) + 6.0, sy.at(0.0), "stroke:#333;stroke-width:1");
        }
    }
    Ok(cv.finish())
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va * vb).sqrt()
}

/// Scatter matrix of all columns, train and test overlaid: scatter plots in
/// the lower triangle, histograms on the diagonal, correlations above.
pub fn pairs_matrix(train: &Dataset, test: &Dataset) -> Result<String> {
    if train.column_names() != test.column_names() {
        return Err(Error::Schema("train/test column names differ".into()));
    }
    let names = train.column_names();
    let k = names.len();
    let (cell, left, top, gap) = (180.0, 60.0, 40.0, 10.0);
    let width = left + k as f64 * (cell + gap) + 30.0;
    let height = top + k as f64 * (cell + gap) + 40.0;
    let mut cv = Canvas::new(width, height);

    let col = |d: &Dataset, j: usize| -> Vec<f64> { d.rows().column(j) };
    let ranges: Vec<(f64, f64)> = (0..k)
        .map(|j| {
            let (lo1, hi1) = minmax(col(train, j).iter());
            let (lo2, hi2) = minmax(col(test, j).iter());
            (lo1.min(lo2), hi1.max(hi2))
        })
        .collect();

    for row in 0..k {
        for cc in 0..k {
            let x0 = left + cc as f64 * (cell + gap);
            let y0 = top + row as f64 * (cell + gap);
            cv.rect(x0, y0, cell, cell, "fill:none;stroke:#bbb;stroke-width:1");
            if row == 0 {
                cv.text(x0 + cell / 2.0, top - 10.0, "middle", 13.0, &names[cc]);
            }
            if cc == 0 {
                cv.text(left - 10.0, y0 + cell / 2.0, "end", 13.0, &names[row]);
            }
            let sx = Scale::new(ranges[cc].0, ranges[cc].1, x0, x0 + cell);
            let sy = Scale::new(ranges[row].0, ranges[row].1, y0 + cell, y0);
            if row > cc {
                for (d, color) in [(train, TRAIN_COLOR), (test, TEST_COLOR)] {
                    let xs = col(d, cc);
                    let ys = col(d, row);
                    for (xv, yv) in xs.iter().zip(&ys) {
                        cv.circle(
                            sx.at(*xv),
                            sy.at(*yv),
                            1.0,
                            &format!("fill:{color};fill-opacity:0.25;stroke:none"),
                        );
                    }
                }
            } else if row == cc {
                let bins = 25usize;
                for (d, color) in [(train, TRAIN_COLOR), (test, TEST_COLOR)] {
                    let values = col(d, cc);
                    let (lo, hi) = ranges[cc];
                    let w = (hi - lo) / bins as f64;
                    let mut counts = vec![0usize; bins];
                    for v in &values {
                        let b = (((v - lo) / w) as usize).min(bins - 1);
                        counts[b] += 1;
                    }
                    let peak = *counts.iter().max().unwrap() as f64;
                    let mut pts = vec![(sx.at(lo), y0 + cell)];
                    for (b, &c) in counts.iter().enumerate() {
                        let xl = lo + b as f64 * w;
                        let yv = y0 + cell - (c as f64 / peak) * (cell - 14.0);
                        pts.push((sx.at(xl), yv));
                        pts.push((sx.at(xl + w), yv));
                    }
                    pts.push((sx.at(hi), y0 + cell));
                    cv.poly(
                        "polyline",
                        &pts,
                        &format!("fill:{color};fill-opacity:0.25;stroke:{color};stroke-width:1"),
                    );
                }
            } else {
                let r_train = pearson(&col(train, row), &col(train, cc));
                let r_test = pearson(&col(test, row), &col(test, cc));
                cv.text(
                    x0 + cell / 2.0,
                    y0 + cell / 2.0 - 8.0,
                    "middle",
                    12.0,
                    &format!("train: {r_train:.3}"),
                );
                cv.text(
                    x0 + cell / 2.0,
                    y0 + cell / 2.0 + 12.0,
                    "middle",
                    12.0,
                    &format!("test: {r_test:.3}"),
                );
            }
        }
    }
    // Legend.
    let ly = top + k as f64 * (cell + gap) + 12.0;
    cv.rect(left, ly, 12.0, 12.0, &format!("fill:{TRAIN_COLOR};fill-opacity:0.6"));
    cv.text(left + 18.0, ly + 10.0, "start", 12.0, "train");
    cv.rect(left + 80.0, ly, 12.0, 12.0, &format!("fill:{TEST_COLOR};fill-opacity:0.6"));
    cv.text(left + 98.0, ly + 10.0, "start", 12.0, "test");
    Ok(cv.finish())
}

/// The couple figure: target curve plus the best linear and stump fits.
pub fn couple_curves(spec: &CoupleSpec, b1: f64, b0: f64) -> String {
    let (width, height) = (560.0, 460.0);
    let (m_l, m_r, m_t, m_b) = (60.0, 20.0, 40.0, 50.0);
    let mut cv = Canvas::new(width, height);
    let samples = 401usize;
    let xs: Vec<f64> =
        (0..samples).map(|i| -1.0 + 2.0 * i as f64 / (samples - 1) as f64).collect();
    let f: Vec<f64> = xs.iter().map(|&x| spec.target(x)).collect();
    let (lo, hi) = (-1.35, 1.35);
    let sx = Scale::new(-1.0, 1.0, m_l, width - m_r);
    let sy = Scale::new(lo, hi, height - m_b, m_t);

    cv.line(m_l, sy.at(0.0), width - m_r, sy.at(0.0), "stroke:#ccc;stroke-width:1");
    cv.line(sx.at(0.0), m_t, sx.at(0.0), height - m_b, "stroke:#ccc;stroke-width:1");
    for (v, label) in [(-1.0, "-1"), (0.0, "0"), (1.0, "1")] {
        cv.text(sx.at(v), height - m_b + 18.0, "middle", 11.0, label);
        cv.text(m_l - 8.0, sy.at(v) + 4.0, "end", 11.0, label);
    }

    let curve: Vec<(f64, f64)> = xs.iter().zip(&f).map(|(&x, &y)| (sx.at(x), sy.at(y))).collect();
    cv.poly("polyline", &curve, "fill:none;stroke:#222;stroke-width:2");
    let lin: Vec<(f64, f64)> =
        [(-1.0, -b1), (1.0, b1)].iter().map(|&(x, y)| (sx.at(x), sy.at(y))).collect();
    cv.poly("polyline", &lin, "fill:none;stroke:#4e79a7;stroke-width:2");
    let stump: Vec<(f64, f64)> = [(-1.0, -b0), (0.0, -b0), (0.0, b0), (1.0, b0)]
        .iter()
        .map(|&(x, y)| (sx.at(x), sy.at(y)))
        .collect();
    cv.poly("polyline", &stump, "fill:none;stroke:#e15759;stroke-width:2");

    cv.text(m_l, 22.0, "start", 13.0, &format!("target exponent {:.7}", spec.alpha));
    cv.text(width - m_r, 22.0, "end", 12.0, &format!("line {b1:.4} / stump {b0:.4}"));
    cv.finish()
}
