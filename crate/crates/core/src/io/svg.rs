//! Static SVG line charts of metric trajectories and learning curves.
//!
//! Output depends only on the rows passed in, and coordinates are printed at
//! fixed precision, so re-plotting a parsed CSV reproduces the same bytes.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::io::records::{LossRow, MetricRow, Network};

pub const X_COLOR: &str = "#1f77b4";
pub const C_COLOR: &str = "#ff7f0e";
pub const S_COLOR: &str = "#800000";

const PANEL_W: f64 = 300.0;
const PANEL_H: f64 = 220.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 34.0;
const BOTTOM: f64 = 46.0;
const CELL_W: f64 = LEFT + PANEL_W + RIGHT;
const CELL_H: f64 = TOP + PANEL_H + BOTTOM;

/// Maps data coordinates into one panel.
struct Frame {
    ox: f64,
    oy: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(cell: usize, x: (f64, f64), y: (f64, f64)) -> Self {
        Frame {
            ox: cell as f64 * CELL_W + LEFT,
            oy: TOP,
            x,
            y,
        }
    }

    fn px(&self, v: f64) -> f64 {
        self.ox + (v - self.x.0) / (self.x.1 - self.x.0) * PANEL_W
    }

    fn py(&self, v: f64) -> f64 {
        let t = ((v - self.y.0) / (self.y.1 - self.y.0)).clamp(0.0, 1.0);
        self.oy + (1.0 - t) * PANEL_H
    }

    fn polyline(
        &self,
        out: &mut String,
        points: &[(f64, f64)],
        color: &str,
        width: f64,
        opacity: f64,
    ) {
        if points.is_empty() {
            return;
        }
        let mut d = String::new();
        for (i, &(x, y)) in points.iter().enumerate() {
            if i > 0 {
                d.push(' ');
            }
            let _ = write!(d, "{:.2},{:.2}", self.px(x), self.py(y));
        }
        let _ = writeln!(
            out,
            r#"<polyline points="{d}" fill="none" stroke="{color}" stroke-width="{width}" stroke-opacity="{opacity}" stroke-linejoin="round"/>"#
        );
    }

    fn axes(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str, yticks: &[f64]) {
        let (l, r) = (self.ox, self.ox + PANEL_W);
        let (t, b) = (self.oy, self.oy + PANEL_H);
        let _ = writeln!(
            out,
            r##"<rect x="{l:.2}" y="{t:.2}" width="{PANEL_W:.2}" height="{PANEL_H:.2}" fill="none" stroke="#444" stroke-width="1"/>"##
        );
        for &v in yticks {
            let y = self.py(v);
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{l:.2}" y2="{y:.2}" stroke="#444"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"##,
                l - 4.0,
                l - 6.0,
                y + 3.5,
                tick_label(v)
            );
        }
        for v in ticks(self.x.0, self.x.1) {
            let x = self.px(v);
            let _ = writeln!(
                out,
                r##"<line x1="{x:.2}" y1="{b:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444"/><text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"##,
                b + 4.0,
                b + 16.0,
                tick_label(v)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"#,
            (l + r) / 2.0,
            t - 12.0,
            escape(title)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"#,
            (l + r) / 2.0,
            b + 34.0,
            escape(xlabel)
        );
        let (cx, cy) = (l - 40.0, (t + b) / 2.0);
        let _ = writeln!(
            out,
            r#"<text x="{cx:.2}" y="{cy:.2}" text-anchor="middle" font-size="11" transform="rotate(-90 {cx:.2} {cy:.2})">{}</text>"#,
            escape(ylabel)
        );
    }
}

fn header(cells: usize) -> String {
    let w = cells.max(1) as f64 * CELL_W;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{CELL_H:.0}" viewBox="0 0 {w:.0} {CELL_H:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Roughly five round-numbered ticks covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * mag);
    let mut out = Vec::new();
    let mut k = (lo / step).ceil();
    while k * step <= hi + 1e-9 * span {
        out.push(k * step);
        k += 1.0;
    }
    out
}

fn generation_range(max_gen: usize) -> (f64, f64) {
    (1.0, max_gen.max(2) as f64)
}

/// Three panels (expressivity, compositionality, stability) of corrected
/// values: a thin line per replicate and a thick line for the mean.
pub fn plot_metrics(rows: &[MetricRow]) -> String {
    let mut by_rep: BTreeMap<usize, Vec<&MetricRow>> = BTreeMap::new();
    for r in rows {
        by_rep.entry(r.replicate).or_default().push(r);
    }
    for v in by_rep.values_mut() {
        v.sort_by_key(|r| r.generation);
    }
    let max_gen = rows.iter().map(|r| r.generation).max().unwrap_or(1);
    let panels: [(&str, &str, fn(&MetricRow) -> f64); 3] = [
        ("expressivity", X_COLOR, |r| r.corrected.x),
        ("compositionality", C_COLOR, |r| r.corrected.c),
        ("stability", S_COLOR, |r| r.corrected.s),
    ];
    let mut out = header(3);
    let yticks = [0.0, 0.25, 0.5, 0.75, 1.0];
    for (cell, (name, color, pick)) in panels.into_iter().enumerate() {
        let frame = Frame::new(cell, generation_range(max_gen), (0.0, 1.0));
        frame.axes(&mut out, name, "generation", name, &yticks);
        for reps in by_rep.values() {
            let pts: Vec<(f64, f64)> = reps
                .iter()
                .map(|r| (r.generation as f64, pick(r)))
                .collect();
            frame.polyline(&mut out, &pts, color, 0.8, 0.45);
        }
        let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for r in rows {
            let e = sums.entry(r.generation).or_default();
            e.0 += pick(r);
            e.1 += 1;
        }
        let mean: Vec<(f64, f64)> = sums
            .into_iter()
            .map(|(g, (s, k))| (g as f64, s / k as f64))
            .collect();
        frame.polyline(&mut out, &mean, color, 2.5, 1.0);
    }
    out.push_str("</svg>\n");
    out
}

/// Cold-to-warm ramp: blue at `t = 0` through green to red at `t = 1`.
pub fn ramp(t: f64) -> String {
    let hue = 240.0 * (1.0 - t.clamp(0.0, 1.0));
    let (r, g, b) = hsv_to_rgb(hue, 0.85, 0.85);
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (u8, u8, u8) {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        _ => (x, 0.0, c),
    };
    let m = v - c;
    let q = |u: f64| ((u + m) * 255.0).round() as u8;
    (q(r), q(g), q(b))
}

/// Learning curves: per network, one curve per generation of the mean loss
/// over replicates against epoch, coloured cold to warm by generation. The
/// autoencoder loss is divided by `auto_divisor`. Networks without rows get
/// no panel; `None` when there are no rows at all.
pub fn plot_losses(rows: &[LossRow], auto_divisor: f64) -> Option<String> {
    // network -> generation -> epoch -> (sum, count)
    let mut acc: BTreeMap<Network, BTreeMap<usize, BTreeMap<usize, (f64, usize)>>> =
        BTreeMap::new();
    for r in rows {
        let v = if r.network == Network::Auto {
            r.loss / auto_divisor
        } else {
            r.loss
        };
        let e = acc
            .entry(r.network)
            .or_default()
            .entry(r.generation)
            .or_default()
            .entry(r.epoch)
            .or_default();
        e.0 += v;
        e.1 += 1;
    }
    if acc.is_empty() {
        return None;
    }
    let gens: Vec<usize> = {
        let mut g: Vec<usize> = rows.iter().map(|r| r.generation).collect();
        g.sort_unstable();
        g.dedup();
        g
    };
    let (gmin, gmax) = (gens[0], *gens.last().unwrap());
    let max_epoch = rows.iter().map(|r| r.epoch).max().unwrap_or(1);
    let mut out = header(acc.len());
    for (cell, (network, by_gen)) in acc.iter().enumerate() {
        let curves: Vec<(usize, Vec<(f64, f64)>)> = by_gen
            .iter()
            .map(|(&g, by_epoch)| {
                let pts = by_epoch
                    .iter()
                    .map(|(&e, &(s, k))| (e as f64, s / k as f64))
                    .collect();
                (g, pts)
            })
            .collect();
        let top = curves
            .iter()
            .flat_map(|(_, p)| p.iter().map(|q| q.1))
            .fold(0.0f64, f64::max);
        let top = if top > 0.0 { top * 1.05 } else { 1.0 };
        let frame = Frame::new(cell, (1.0, max_epoch.max(2) as f64), (0.0, top));
        let title = match network {
            Network::Decoder => "decoder loss".to_string(),
            Network::Encoder => "encoder loss".to_string(),
            Network::Auto if auto_divisor != 1.0 => {
                format!("autoencoder loss / {}", tick_label(auto_divisor))
            }
            Network::Auto => "autoencoder loss".to_string(),
        };
        frame.axes(&mut out, &title, "epoch", "loss", &ticks(0.0, top));
        for (g, pts) in &curves {
            let t = if gmax > gmin {
                (g - gmin) as f64 / (gmax - gmin) as f64
            } else {
                0.0
            };
            frame.polyline(&mut out, pts, &ramp(t), 1.2, 1.0);
        }
    }
    out.push_str("</svg>\n");
    Some(out)
}
