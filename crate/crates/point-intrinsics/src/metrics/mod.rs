//! Evaluation metrics: MSE, si-MSE, LMSE, si-LMSE, SSIM/DSSIM, PSNR, WHDR.
//!
//! Everything here runs in double precision regardless of model precision.
//! Masked variants restrict the average to valid pixels.

mod report;
mod ssim;
mod whdr;

pub use report::{EvalReport, SampleRow};
pub use ssim::{dssim, ssim, SsimResult};
pub use whdr::{whdr, Darker, Judgment, JudgmentSet};

use crate::raster::{Mask, Raster};
use thiserror::Error;

/// PSNR reported for identical images instead of +infinity.
pub const PSNR_CAP_DB: f64 = 99.0;
/// Default LMSE window fraction of the larger image dimension.
pub const LMSE_WINDOW_FRAC: f64 = 0.1;
/// WHDR relative-difference threshold.
pub const WHDR_DELTA: f64 = 0.10;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no valid pixels to evaluate")]
    EmptyMask,
    #[error("judgment point ({u}, {v}) out of bounds for {width}×{height}")]
    JudgmentOutOfBounds { u: u32, v: u32, width: usize, height: usize },
    #[error("bad judgment file: {0}")]
    BadJudgment(String),
}

pub type Result<T> = std::result::Result<T, MetricError>;

fn check_pair(gt: &Raster, pred: &Raster, mask: Option<&Mask>) -> Result<()> {
    if !gt.same_dims(pred) {
        return Err(MetricError::ShapeMismatch(format!(
            "{}×{}×{} vs {}×{}×{}",
            gt.width(),
            gt.height(),
            gt.channels(),
            pred.width(),
            pred.height(),
            pred.channels()
        )));
    }
    if let Some(m) = mask {
        if m.width() != gt.width() || m.height() != gt.height() {
            return Err(MetricError::ShapeMismatch("mask dimensions differ".into()));
        }
    }
    Ok(())
}

fn masked_values<'a>(
    r: &'a Raster,
    mask: Option<&'a Mask>,
) -> impl Iterator<Item = f64> + 'a {
    let ch = r.channels();
    r.data().iter().enumerate().filter_map(move |(i, &v)| match mask {
        None => Some(v),
        Some(m) => {
            let pix = i / ch;
            if m.data()[pix] {
                Some(v)
            } else {
                None
            }
        }
    })
}

/// Mean squared error over valid pixels.
pub fn mse_metric(gt: &Raster, pred: &Raster, mask: Option<&Mask>) -> Result<f64> {
    check_pair(gt, pred, mask)?;
    let mut acc = 0.0;
    let mut count = 0usize;
    for (g, p) in masked_values(gt, mask).zip(masked_values(pred, mask)) {
        let d = g - p;
        acc += d * d;
        count += 1;
    }
    if count == 0 {
        return Err(MetricError::EmptyMask);
    }
    Ok(acc / count as f64)
}

/// Scale-invariant MSE result. When the prediction is identically zero the
/// optimal scale is undefined; the value falls back to mean(gt²).
#[derive(Debug, Clone, Copy)]
pub struct SiMse {
    pub value: f64,
    pub alpha: f64,
    pub zero_pred: bool,
}

/// min over α of mean((gt − α·pred)²) with the closed-form
/// α = ⟨gt,pred⟩/⟨pred,pred⟩.
pub fn si_mse(gt: &Raster, pred: &Raster, mask: Option<&Mask>) -> Result<SiMse> {
    check_pair(gt, pred, mask)?;
    let mut dot = 0.0;
    let mut pp = 0.0;
    let mut gg = 0.0;
    let mut count = 0usize;
    for (g, p) in masked_values(gt, mask).zip(masked_values(pred, mask)) {
        dot += g * p;
        pp += p * p;
        gg += g * g;
        count += 1;
    }
    if count == 0 {
        return Err(MetricError::EmptyMask);
    }
    if pp == 0.0 {
        return Ok(SiMse { value: gg / count as f64, alpha: 0.0, zero_pred: true });
    }
    let alpha = dot / pp;
    let mut acc = 0.0;
    for (g, p) in masked_values(gt, mask).zip(masked_values(pred, mask)) {
        let d = g - alpha * p;
        acc += d * d;
    }
    Ok(SiMse { value: acc / count as f64, alpha, zero_pred: false })
}

/// Square windows of side `round(frac·max(W,H))` (at least 2), stride half a
/// window, with a final edge-aligned window per axis so the image is covered.
fn window_origins(size: usize, side: usize) -> Vec<usize> {
    if size <= side {
        return vec![0];
    }
    let stride = (side / 2).max(1);
    let mut origins: Vec<usize> = (0..).map(|i| i * stride).take_while(|&o| o + side <= size).collect();
    let last = size - side;
    if origins.last() != Some(&last) {
        origins.push(last);
    }
    origins
}

struct WindowStats {
    ssq: f64,
    gt_sq: f64,
    valid: usize,
}

fn window_stats(
    gt: &Raster,
    pred: &Raster,
    mask: Option<&Mask>,
    window_frac: f64,
) -> Result<Vec<WindowStats>> {
    check_pair(gt, pred, mask)?;
    let (w, h, ch) = (gt.width(), gt.height(), gt.channels());
    let side = ((window_frac * w.max(h) as f64).round() as usize).max(2);
    let win_w = side.min(w);
    let win_h = side.min(h);
    let mut stats = Vec::new();
    for &v0 in &window_origins(h, win_h) {
        for &u0 in &window_origins(w, win_w) {
            let mut dot = 0.0;
            let mut pp = 0.0;
            let mut gg = 0.0;
            let mut valid = 0usize;
            for v in v0..(v0 + win_h).min(h) {
                for u in u0..(u0 + win_w).min(w) {
                    if let Some(m) = mask {
                        if !m.get(u, v) {
                            continue;
                        }
                    }
                    valid += 1;
                    for c in 0..ch {
                        let g = gt.get(u, v, c);
                        let p = pred.get(u, v, c);
                        dot += g * p;
                        pp += p * p;
                        gg += g * g;
                    }
                }
            }
            let alpha = if pp > 0.0 { dot / pp } else { 0.0 };
            let mut ssq = 0.0;
            for v in v0..(v0 + win_h).min(h) {
                for u in u0..(u0 + win_w).min(w) {
                    if let Some(m) = mask {
                        if !m.get(u, v) {
                            continue;
                        }
                    }
                    for c in 0..ch {
                        let d = gt.get(u, v, c) - alpha * pred.get(u, v, c);
                        ssq += d * d;
                    }
                }
            }
            stats.push(WindowStats { ssq, gt_sq: gg, valid });
        }
    }
    Ok(stats)
}

/// Windowed scale-invariant error with the classic normalization
/// Σ_w ssq_w / Σ_w ‖gt_w‖², so predicting zero scores 1 on nontrivial gt.
pub fn lmse(gt: &Raster, pred: &Raster, mask: Option<&Mask>, window_frac: f64) -> Result<f64> {
    let stats = window_stats(gt, pred, mask, window_frac)?;
    let ssq: f64 = stats.iter().map(|s| s.ssq).sum();
    let gt_sq: f64 = stats.iter().map(|s| s.gt_sq).sum();
    if gt_sq == 0.0 {
        return Ok(0.0);
    }
    Ok(ssq / gt_sq)
}

/// Mean over windows of the per-window si-MSE (unnormalized variant).
pub fn si_lmse(gt: &Raster, pred: &Raster, mask: Option<&Mask>, window_frac: f64) -> Result<f64> {
    let stats = window_stats(gt, pred, mask, window_frac)?;
    let ch = gt.channels() as f64;
    let mut acc = 0.0;
    let mut windows = 0usize;
    for s in &stats {
        if s.valid > 0 {
            acc += s.ssq / (s.valid as f64 * ch);
            windows += 1;
        }
    }
    if windows == 0 {
        return Err(MetricError::EmptyMask);
    }
    Ok(acc / windows as f64)
}

/// 10·log10(1/MSE) in dB, capped at [`PSNR_CAP_DB`] for identical images.
pub fn psnr(gt: &Raster, pred: &Raster, mask: Option<&Mask>) -> Result<f64> {
    let mse = mse_metric(gt, pred, mask)?;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

/// Multiplies reflectance by `factor` and clamps to [0,1]; evaluation-time
/// preprocessing only.
pub fn rescale_reflectance(pred: &Raster, factor: f64) -> Raster {
    pred.map(|x| (x * factor).clamp(0.0, 1.0))
}
