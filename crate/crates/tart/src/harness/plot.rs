//! Deterministic PNG plots: learning curves with std shading, MI and
//! perplexity curves, code-usage timelines, and comparison summaries.
//!
//! Rendering is intentionally minimal (axes, polylines, bands, a tiny
//! numeric glyph set) so identical inputs always produce identical bytes.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use crate::baselines::ComparisonResult;
use crate::error::{Result, TartError};
use crate::harness::train::MetricsRecord;

const W: u32 = 640;
const H: u32 = 400;
const MARGIN: u32 = 40;
const BG: Rgb<u8> = Rgb([255, 255, 255]);
const AXIS: Rgb<u8> = Rgb([60, 60, 60]);
const PALETTE: [Rgb<u8>; 6] = [
    Rgb([31, 119, 180]),
    Rgb([255, 127, 14]),
    Rgb([44, 160, 44]),
    Rgb([214, 39, 40]),
    Rgb([148, 103, 189]),
    Rgb([140, 86, 75]),
];

/// 3x5 glyphs for tick labels; each u16 packs rows top-to-bottom.
fn glyph(c: char) -> u16 {
    match c {
        '0' => 0b111_101_101_101_111,
        '1' => 0b010_110_010_010_111,
        '2' => 0b111_001_111_100_111,
        '3' => 0b111_001_111_001_111,
        '4' => 0b101_101_111_001_001,
        '5' => 0b111_100_111_001_111,
        '6' => 0b111_100_111_101_111,
        '7' => 0b111_001_010_010_010,
        '8' => 0b111_101_111_101_111,
        '9' => 0b111_101_111_001_111,
        '-' => 0b000_000_111_000_000,
        '.' => 0b000_000_000_000_010,
        'e' => 0b000_111_111_100_111,
        'k' => 0b100_101_110_110_101,
        _ => 0,
    }
}

fn draw_text(img: &mut RgbImage, x: u32, y: u32, text: &str, color: Rgb<u8>) {
    let mut cx = x;
    for c in text.chars() {
        let g = glyph(c);
        for row in 0..5u32 {
            for col in 0..3u32 {
                let bit = 14 - (row * 3 + col);
                if (g >> bit) & 1 == 1 {
                    let (px, py) = (cx + col, y + row);
                    if px < img.width() && py < img.height() {
                        img.put_pixel(px, py, color);
                    }
                }
            }
        }
        cx += 4;
    }
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if a >= 10_000.0 {
        format!("{:.0}k", v / 1000.0)
    } else if a >= 10.0 {
        format!("{v:.0}")
    } else if a >= 0.01 {
        format!("{v:.2}")
    } else {
        format!("{v:.0e}")
    }
}

struct Chart {
    img: RgbImage,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Chart {
    fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        let mut img = RgbImage::from_pixel(W, H, BG);
        // Axes.
        for x in MARGIN..W - 10 {
            img.put_pixel(x, H - MARGIN, AXIS);
        }
        for y in 10..=H - MARGIN {
            img.put_pixel(MARGIN, y, AXIS);
        }
        let (x_max, y_max) = (
            if x_max > x_min { x_max } else { x_min + 1.0 },
            if y_max > y_min { y_max } else { y_min + 1.0 },
        );
        let mut chart = Self {
            img,
            x_min,
            x_max,
            y_min,
            y_max,
        };
        chart.ticks();
        chart
    }

    fn px(&self, x: f64) -> i64 {
        let f = (x - self.x_min) / (self.x_max - self.x_min);
        MARGIN as i64 + (f * (W - MARGIN - 10) as f64) as i64
    }

    fn py(&self, y: f64) -> i64 {
        let f = (y - self.y_min) / (self.y_max - self.y_min);
        (H - MARGIN) as i64 - (f * (H - MARGIN - 10) as f64) as i64
    }

    fn ticks(&mut self) {
        for i in 0..=4 {
            let xv = self.x_min + (self.x_max - self.x_min) * i as f64 / 4.0;
            let yv = self.y_min + (self.y_max - self.y_min) * i as f64 / 4.0;
            let px = self.px(xv).clamp(0, W as i64 - 1) as u32;
            let py = self.py(yv).clamp(0, H as i64 - 1) as u32;
            for d in 0..4u32 {
                let yy = H - MARGIN + d;
                if yy < H {
                    self.img.put_pixel(px, yy, AXIS);
                }
                if MARGIN >= d + 1 {
                    self.img.put_pixel(MARGIN - d - 1, py, AXIS);
                }
            }
            draw_text(
                &mut self.img,
                px.saturating_sub(6),
                H - MARGIN + 6,
                &fmt_tick(xv),
                AXIS,
            );
            draw_text(&mut self.img, 2, py.saturating_sub(2), &fmt_tick(yv), AXIS);
        }
    }

    fn put(&mut self, x: i64, y: i64, color: Rgb<u8>) {
        if x >= 0 && y >= 0 && (x as u32) < W && (y as u32) < H {
            self.img.put_pixel(x as u32, y as u32, color);
        }
    }

    fn line(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, color: Rgb<u8>) {
        let (dx, sx) = ((x1 - x0).abs(), if x0 < x1 { 1 } else { -1 });
        let (dy, sy) = (-(y1 - y0).abs(), if y0 < y1 { 1 } else { -1 });
        let (mut x, mut y, mut err) = (x0, y0, dx + dy);
        loop {
            self.put(x, y, color);
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    fn series(&mut self, pts: &[(f64, f64)], color: Rgb<u8>) {
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            self.line(self.px(a.0), self.py(a.1), self.px(b.0), self.py(b.1), color);
        }
    }

    /// Vertical band between lo and hi, drawn in a light tint of `color`.
    fn band(&mut self, pts_lo: &[(f64, f64)], pts_hi: &[(f64, f64)], color: Rgb<u8>) {
        let tint = Rgb([
            255 - (255 - color.0[0]) / 4,
            255 - (255 - color.0[1]) / 4,
            255 - (255 - color.0[2]) / 4,
        ]);
        for (lo, hi) in pts_lo.iter().zip(pts_hi) {
            let x = self.px(lo.0);
            let (y0, y1) = (self.py(hi.1), self.py(lo.1));
            for y in y0.min(y1)..=y0.max(y1) {
                self.put(x, y, tint);
            }
        }
    }

    fn save(self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        self.img
            .save(path)
            .map_err(|e| TartError::InvalidInput(format!("plot write failed: {e}")))
    }
}

fn column(
    logs: &[Vec<MetricsRecord>],
    get: impl Fn(&MetricsRecord) -> Option<f64>,
) -> Vec<Vec<(f64, f64)>> {
    logs.iter()
        .map(|log| {
            log.iter()
                .filter_map(|m| get(m).map(|v| (m.step as f64, v)))
                .collect()
        })
        .collect()
}

/// Mean and std across seeds at matching x positions (uses the shortest
/// series length).
fn aggregate(series: &[Vec<(f64, f64)>]) -> (Vec<(f64, f64)>, Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let n = series.iter().map(|s| s.len()).min().unwrap_or(0);
    let mut mean = Vec::with_capacity(n);
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for i in 0..n {
        let x = series[0][i].0;
        let vals: Vec<f64> = series.iter().map(|s| s[i].1).collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
        mean.push((x, m));
        lo.push((x, m - sd));
        hi.push((x, m + sd));
    }
    (mean, lo, hi)
}

fn curve_panel(
    series: &[Vec<(f64, f64)>],
    shade: bool,
    color: Rgb<u8>,
    path: &Path,
) -> Result<bool> {
    let nonempty: Vec<Vec<(f64, f64)>> = series.iter().filter(|s| !s.is_empty()).cloned().collect();
    if nonempty.is_empty() {
        return Ok(false);
    }
    let (mean, lo, hi) = aggregate(&nonempty);
    let xs: Vec<f64> = mean.iter().map(|p| p.0).collect();
    let mut ys: Vec<f64> = lo.iter().chain(&hi).map(|p| p.1).collect();
    ys.retain(|v| v.is_finite());
    if xs.is_empty() || ys.is_empty() {
        return Ok(false);
    }
    let (x0, x1) = (xs[0], *xs.last().unwrap());
    let (y0, y1) = ys.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let pad = ((y1 - y0) * 0.05).max(1e-9);
    let mut chart = Chart::new(x0, x1, y0 - pad, y1 + pad);
    if shade && nonempty.len() > 1 {
        chart.band(&lo, &hi, color);
    }
    chart.series(&mean, color);
    chart.save(path)?;
    Ok(true)
}

/// Renders every applicable panel from parsed metrics logs (one log per
/// seed). Returns the files written; panels whose column is missing from
/// all logs are omitted.
pub fn render_panels(logs: &[Vec<MetricsRecord>], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if logs.is_empty() || logs.iter().all(|l| l.is_empty()) {
        return Err(TartError::InvalidInput("no metrics records to plot".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let panels: [(&str, Box<dyn Fn(&MetricsRecord) -> Option<f64>>); 4] = [
        ("return_curve.png", Box::new(|m| m.eval_return_mean)),
        ("mi_curve.png", Box::new(|m| m.mi_estimate)),
        ("perplexity_curve.png", Box::new(|m| m.perplexity)),
        ("entropy_curve.png", Box::new(|m| Some(m.entropy))),
    ];
    for (i, (name, get)) in panels.iter().enumerate() {
        let path = out_dir.join(name);
        if curve_panel(&column(logs, get), true, PALETTE[i % PALETTE.len()], &path)? {
            written.push(path);
        }
    }
    if let Some(path) = code_usage_panel(&logs[0], out_dir)? {
        written.push(path);
    }
    Ok(written)
}

/// Code-usage timeline: one row per code, brightness = usage share.
fn code_usage_panel(log: &[MetricsRecord], out_dir: &Path) -> Result<Option<PathBuf>> {
    let cols: Vec<&Vec<f64>> = log.iter().filter_map(|m| m.code_usage.as_ref()).collect();
    if cols.is_empty() {
        return Ok(None);
    }
    let k = cols[0].len() as u32;
    let n = cols.len() as u32;
    let (cell_w, cell_h) = ((W - 2 * MARGIN) / n.max(1), (H - 2 * MARGIN) / k.max(1));
    let mut img = RgbImage::from_pixel(W, H, BG);
    for (t, usage) in cols.iter().enumerate() {
        let peak = usage.iter().cloned().fold(f64::MIN, f64::max).max(1e-12);
        for (code, &u) in usage.iter().enumerate() {
            let level = (255.0 * (1.0 - (u / peak).clamp(0.0, 1.0))) as u8;
            let color = Rgb([level, level, 255]);
            for dx in 0..cell_w.max(1) {
                for dy in 0..cell_h.max(1) {
                    let x = MARGIN + t as u32 * cell_w.max(1) + dx;
                    let y = MARGIN + code as u32 * cell_h.max(1) + dy;
                    if x < W && y < H {
                        img.put_pixel(x, y, color);
                    }
                }
            }
        }
    }
    let path = out_dir.join("code_usage.png");
    img.save(&path)
        .map_err(|e| TartError::InvalidInput(format!("plot write failed: {e}")))?;
    Ok(Some(path))
}

/// Reads metrics logs from disk (one JSONL file per seed) and renders.
pub fn plot_files(paths: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if paths.is_empty() {
        return Err(TartError::InvalidInput("no input logs".into()));
    }
    let mut logs = Vec::with_capacity(paths.len());
    for p in paths {
        let text = std::fs::read_to_string(p)?;
        let mut records = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            records.push(serde_json::from_str::<MetricsRecord>(line)?);
        }
        logs.push(records);
    }
    render_panels(&logs, out_dir)
}

/// Per-variant final-return bars with one dot per seed.
pub fn comparison_plot(result: &ComparisonResult, path: &Path) -> Result<()> {
    let variants: Vec<&String> = result.summary.keys().collect();
    if variants.is_empty() {
        return Err(TartError::InvalidInput("nothing to plot".into()));
    }
    let vals: Vec<f64> = result.summary.values().map(|(m, _)| *m).collect();
    let stds: Vec<f64> = result.summary.values().map(|(_, s)| *s).collect();
    let y0 = vals
        .iter()
        .zip(&stds)
        .map(|(m, s)| m - s)
        .fold(f64::MAX, f64::min)
        .min(0.0);
    let y1 = vals
        .iter()
        .zip(&stds)
        .map(|(m, s)| m + s)
        .fold(f64::MIN, f64::max)
        .max(1e-9);
    let mut chart = Chart::new(0.0, variants.len() as f64, y0, y1 + (y1 - y0) * 0.05);
    for (i, _) in variants.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let (mean, std) = result.summary[variants[i]];
        let xc = i as f64 + 0.5;
        // Bar body.
        for frac in 0..=40 {
            let x = xc - 0.2 + 0.4 * frac as f64 / 40.0;
            chart.line(
                chart.px(x),
                chart.py(0.0f64.max(y0)),
                chart.px(x),
                chart.py(mean),
                color,
            );
        }
        // Std whisker.
        chart.line(
            chart.px(xc),
            chart.py(mean - std),
            chart.px(xc),
            chart.py(mean + std),
            AXIS,
        );
    }
    chart.save(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(step: u64, ret: f64, mi: Option<f64>) -> MetricsRecord {
        MetricsRecord {
            step,
            update: (step / 100) as usize,
            eval_return_mean: Some(ret),
            eval_return_std: Some(0.1),
            policy_loss: 0.0,
            value_loss: 0.0,
            entropy: 1.0,
            clip_fraction: 0.0,
            approx_kl: 0.0,
            nce_loss: None,
            mi_estimate: mi,
            codebook_loss: None,
            commitment_loss: None,
            perplexity: None,
            dead_codes: None,
            code_usage: Some(vec![0.5, 0.5]),
            total_loss: 0.0,
        }
    }

    fn tmp(name: &str) -> PathBuf {
        std::env::temp_dir().join(format!("tart-plot-{}-{name}", std::process::id()))
    }

    #[test]
    fn renders_available_panels_and_omits_missing() {
        let log: Vec<MetricsRecord> = (1..10).map(|i| record(i * 100, i as f64, None)).collect();
        let dir = tmp("omit");
        let written = render_panels(&[log], &dir).unwrap();
        let names: Vec<String> = written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert!(names.contains(&"return_curve.png".to_string()));
        assert!(!names.contains(&"mi_curve.png".to_string()));
        assert!(names.contains(&"code_usage.png".to_string()));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn identical_logs_render_identical_images() {
        let log: Vec<MetricsRecord> = (1..10)
            .map(|i| record(i * 100, (i as f64).sin(), Some(0.1 * i as f64)))
            .collect();
        let (d1, d2) = (tmp("det1"), tmp("det2"));
        render_panels(&[log.clone()], &d1).unwrap();
        render_panels(&[log], &d2).unwrap();
        let a = std::fs::read(d1.join("return_curve.png")).unwrap();
        let b = std::fs::read(d2.join("return_curve.png")).unwrap();
        assert_eq!(a, b);
        std::fs::remove_dir_all(&d1).ok();
        std::fs::remove_dir_all(&d2).ok();
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(render_panels(&[], &tmp("empty")).is_err());
        assert!(render_panels(&[vec![]], &tmp("empty2")).is_err());
    }
}
