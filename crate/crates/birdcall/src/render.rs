//! PNG output: spectrograms and training curves.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use birdcall_core::dsp::{power_to_db, PowerSpectrogram};
use birdcall_core::train::TrainingHistory;

use crate::error::{Error, Result};

const COLORMAP: &str = "gray";

fn write_png(
    path: &Path,
    width: u32,
    height: u32,
    color: png::ColorType,
    text: &[(&str, &str)],
    data: &[u8],
) -> Result<()> {
    let file = File::create(path).map_err(Error::io(path))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width, height);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    for (key, value) in text {
        encoder.add_text_chunk((*key).to_owned(), (*value).to_owned())?;
    }
    let mut writer = encoder.write_header()?;
    writer.write_image_data(data)?;
    writer.finish()?;
    Ok(())
}

/// Grayscale dB image: one column per frame, one row per bin, low
/// frequencies at the bottom. Intensities span the matrix's own dB range.
pub fn spectrogram_pixels(spec: &PowerSpectrogram) -> Result<(u32, u32, Vec<u8>)> {
    let width = spec.n_frames();
    let height = spec.frames.first().map_or(0, Vec::len);
    if width == 0 || height == 0 {
        return Err(birdcall_core::Error::EmptyInput("spectrogram").into());
    }
    let db: Vec<Vec<f64>> = spec
        .frames
        .iter()
        .map(|f| f.iter().map(|&p| power_to_db(p)).collect())
        .collect();
    let (lo, hi) = db
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    let mut pixels = Vec::with_capacity(width * height);
    for row in 0..height {
        let bin = height - 1 - row;
        for frame in &db {
            let level = if span > 0.0 {
                (frame[bin] - lo) / span
            } else {
                0.0
            };
            pixels.push((level * 255.0).round() as u8);
        }
    }
    Ok((width as u32, height as u32, pixels))
}

pub fn render_spectrogram(spec: &PowerSpectrogram, out: &Path) -> Result<()> {
    let (w, h, pixels) = spectrogram_pixels(spec)?;
    write_png(
        out,
        w,
        h,
        png::ColorType::Grayscale,
        &[("colormap", COLORMAP), ("Software", "birdcall")],
        &pixels,
    )
}

struct Canvas {
    width: usize,
    height: usize,
    rgb: Vec<u8>,
}

impl Canvas {
    fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            rgb: vec![255; width * height * 3],
        }
    }

    fn put(&mut self, x: i64, y: i64, color: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            let i = (y as usize * self.width + x as usize) * 3;
            self.rgb[i..i + 3].copy_from_slice(&color);
        }
    }

    /// Bresenham, two pixels thick.
    fn line(&mut self, (x0, y0): (i64, i64), (x1, y1): (i64, i64), color: [u8; 3]) {
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let (mut x, mut y, mut err) = (x0, y0, dx + dy);
        loop {
            self.put(x, y, color);
            self.put(x, y + 1, color);
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
}

const TRAIN_COLOR: [u8; 3] = [31, 119, 180];
const VAL_COLOR: [u8; 3] = [255, 127, 14];
const AXIS_COLOR: [u8; 3] = [0, 0, 0];

/// Two stacked panels: loss (top) and accuracy (bottom), train in blue and
/// validation in orange.
pub fn render_history(history: &TrainingHistory, out: &Path) -> Result<()> {
    if history.is_empty() {
        return Err(birdcall_core::Error::EmptyInput("training history").into());
    }
    let (width, panel, margin) = (800usize, 300usize, 40i64);
    let mut canvas = Canvas::new(width, panel * 2);
    let epochs = &history.epochs;
    let n = epochs.len();

    let mut draw_panel = |top: i64, series: [Vec<f64>; 2]| {
        let bottom = top + panel as i64 - margin;
        let (left, right) = (margin, width as i64 - margin / 2);
        let finite = series.iter().flatten().copied().filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
        let (lo, hi) = if lo.is_finite() && hi > lo {
            (lo.min(0.0), hi)
        } else {
            (0.0, 1.0)
        };
        let inner_top = top + margin / 2;
        canvas.line((left, inner_top), (left, bottom), AXIS_COLOR);
        canvas.line((left, bottom), (right, bottom), AXIS_COLOR);
        let to_px = |i: usize, v: f64| {
            let x = left
                + if n > 1 {
                    (i as i64) * (right - left) / (n as i64 - 1)
                } else {
                    0
                };
            let y = bottom - ((v - lo) / (hi - lo) * (bottom - inner_top) as f64).round() as i64;
            (x, y)
        };
        for (values, color) in series.iter().zip([TRAIN_COLOR, VAL_COLOR]) {
            let points: Vec<_> = values
                .iter()
                .enumerate()
                .filter(|(_, v)| v.is_finite())
                .map(|(i, &v)| to_px(i, v))
                .collect();
            for pair in points.windows(2) {
                canvas.line(pair[0], pair[1], color);
            }
            if let [only] = points.as_slice() {
                canvas.put(only.0, only.1, color);
            }
        }
    };
    draw_panel(
        0,
        [
            epochs.iter().map(|e| e.train_loss).collect(),
            epochs.iter().map(|e| e.val_loss).collect(),
        ],
    );
    draw_panel(
        panel as i64,
        [
            epochs.iter().map(|e| e.train_acc).collect(),
            epochs.iter().map(|e| e.val_acc).collect(),
        ],
    );
    write_png(
        out,
        width as u32,
        (panel * 2) as u32,
        png::ColorType::Rgb,
        &[
            (
                "Title",
                "Train and validation loss (top) and accuracy (bottom)",
            ),
            ("Legend", "blue: train, orange: validation"),
        ],
        &canvas.rgb,
    )
}
