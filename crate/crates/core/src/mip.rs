//! Maximum intensity projections of coefficient magnitudes in relative dB.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::coeffs::CoeffTensor;
use crate::error::{Error, Result};
use crate::frame::EspFrame;

pub const DEFAULT_FLOOR_DB: f64 = -120.0;

/// Axis removed by the projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollapseAxis {
    /// Maximum over `k`; the image is envelope × time shift.
    Frequency,
    /// Maximum over `m`; the image is envelope × frequency.
    TimeShift,
}

impl CollapseAxis {
    pub fn name(&self) -> &'static str {
        match self {
            CollapseAxis::Frequency => "frequency",
            CollapseAxis::TimeShift => "time-shift",
        }
    }
}

/// One row per envelope, one column per entry of the remaining axis.
#[derive(Debug, Clone, PartialEq)]
pub struct MipImage {
    pub values: Vec<Vec<f64>>,
    pub row_labels: Vec<String>,
    /// Physical coordinate of each column (index when unknown).
    pub column_axis: Vec<f64>,
    pub collapsed: CollapseAxis,
    pub reference_max: f64,
    pub floor_db: f64,
}

/// `20·log10(max |c| over the collapsed axis / max |c|)`, clamped below at
/// `floor_db`. Columns keep storage order.
pub fn mip(c: &CoeffTensor, axis: CollapseAxis, floor_db: f64) -> Result<MipImage> {
    if !(floor_db < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "floor must be negative, got {floor_db} dB"
        )));
    }
    let reference_max = c.max_abs();
    if reference_max == 0.0 {
        return Err(Error::ZeroPower("projection of an all-zero tensor"));
    }
    let (blocks, rows, cols) = c.shape();
    let width = match axis {
        CollapseAxis::Frequency => cols,
        CollapseAxis::TimeShift => rows,
    };
    let mut values = vec![vec![0.0f64; width]; blocks];
    for (l, out) in values.iter_mut().enumerate() {
        let block = &c.data()[l * rows * cols..(l + 1) * rows * cols];
        for (k, row) in block.chunks(cols).enumerate() {
            for (m, z) in row.iter().enumerate() {
                let slot = match axis {
                    CollapseAxis::Frequency => &mut out[m],
                    CollapseAxis::TimeShift => &mut out[k],
                };
                *slot = slot.max(z.norm());
            }
        }
        for v in out.iter_mut() {
            *v = to_db(*v / reference_max, floor_db);
        }
    }
    Ok(MipImage {
        values,
        row_labels: (0..blocks).map(|l| format!("l={l}")).collect(),
        column_axis: (0..width).map(|i| i as f64).collect(),
        collapsed: axis,
        reference_max,
        floor_db,
    })
}

/// [`mip`] with envelope labels, columns in seconds or in Hz, and frequency
/// columns reordered from most negative to most positive.
pub fn frame_mip(c: &CoeffTensor, frame: &EspFrame, axis: CollapseAxis, floor_db: f64) -> Result<MipImage> {
    if c.shape() != frame.shape() {
        return Err(Error::ShapeMismatch {
            expected: frame.shape(),
            actual: c.shape(),
        });
    }
    let mut image = mip(c, axis, floor_db)?;
    image.row_labels = frame.envelopes().labels();
    let n = frame.n();
    match axis {
        CollapseAxis::Frequency => {
            image.column_axis = (0..n).map(|m| frame.time_of(m)).collect();
        }
        CollapseAxis::TimeShift => {
            let order: Vec<usize> = (0..n).map(|i| (i + n - n / 2) % n).collect();
            image.column_axis = order.iter().map(|&k| frame.frequency_of(k)).collect();
            for row in image.values.iter_mut() {
                *row = order.iter().map(|&k| row[k]).collect();
            }
        }
    }
    Ok(image)
}

fn to_db(ratio: f64, floor_db: f64) -> f64 {
    if ratio > 0.0 {
        (20.0 * ratio.log10()).max(floor_db).min(0.0)
    } else {
        floor_db
    }
}

impl MipImage {
    pub fn width(&self) -> usize {
        self.column_axis.len()
    }

    pub fn height(&self) -> usize {
        self.values.len()
    }

    /// Header row of column coordinates, then one labelled row per envelope.
    /// Values carry four decimals.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
        let mut header = vec![self.collapsed.name().to_string()];
        header.extend(self.column_axis.iter().map(|v| v.to_string()));
        w.write_record(&header).map_err(|e| Error::io(path, e.into()))?;
        for (label, row) in self.row_labels.iter().zip(&self.values) {
            let mut record = vec![label.clone()];
            record.extend(row.iter().map(|v| format!("{v:.4}")));
            w.write_record(&record).map_err(|e| Error::io(path, e.into()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// 8-bit grayscale, `floor_db ↦ 0` and `0 dB ↦ 255`. Each envelope row is
    /// drawn `row_height` pixels tall.
    pub fn write_png(&self, path: &Path, row_height: usize) -> Result<()> {
        let row_height = row_height.max(1);
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder = png::Encoder::new(
            BufWriter::new(file),
            self.width() as u32,
            (self.height() * row_height) as u32,
        );
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        let mut pixels = Vec::with_capacity(self.width() * self.height() * row_height);
        for row in &self.values {
            let line: Vec<u8> = row.iter().map(|&v| self.gray(v)).collect();
            for _ in 0..row_height {
                pixels.extend_from_slice(&line);
            }
        }
        writer
            .write_image_data(&pixels)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))
    }

    fn gray(&self, db: f64) -> u8 {
        let t = ((db - self.floor_db) / -self.floor_db).clamp(0.0, 1.0);
        (t * 255.0).round() as u8
    }
}
