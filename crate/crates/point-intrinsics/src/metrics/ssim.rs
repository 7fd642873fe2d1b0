//! Structural similarity with the standard 11×11 Gaussian window, σ = 1.5,
//! K1 = 0.01, K2 = 0.03, dynamic range 1.0, averaged over channels.

use super::{check_pair, MetricError, Result};
use crate::raster::Raster;

const K1: f64 = 0.01;
const K2: f64 = 0.03;
const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;

#[derive(Debug, Clone, Copy)]
pub struct SsimResult {
    pub value: f64,
    /// Set when the image is smaller than the 11×11 window and a reduced
    /// window was used.
    pub reduced_window: bool,
}

fn gaussian_kernel(side: usize) -> Vec<f64> {
    let half = (side as f64 - 1.0) / 2.0;
    let mut k: Vec<f64> = (0..side)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * SIGMA * SIGMA)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Valid-mode separable convolution of a single-channel plane.
fn convolve_valid(plane: &[f64], w: usize, h: usize, kernel: &[f64]) -> (Vec<f64>, usize, usize) {
    let side = kernel.len();
    let out_w = w - side + 1;
    let out_h = h - side + 1;
    // Horizontal pass.
    let mut tmp = vec![0.0f64; out_w * h];
    for v in 0..h {
        for u in 0..out_w {
            let mut acc = 0.0;
            for (i, &kv) in kernel.iter().enumerate() {
                acc += kv * plane[v * w + u + i];
            }
            tmp[v * out_w + u] = acc;
        }
    }
    // Vertical pass.
    let mut out = vec![0.0f64; out_w * out_h];
    for v in 0..out_h {
        for u in 0..out_w {
            let mut acc = 0.0;
            for (i, &kv) in kernel.iter().enumerate() {
                acc += kv * tmp[(v + i) * out_w + u];
            }
            out[v * out_w + u] = acc;
        }
    }
    (out, out_w, out_h)
}

/// Channel-averaged SSIM. Values are expected in [0,1] (dynamic range 1).
pub fn ssim(gt: &Raster, pred: &Raster) -> Result<SsimResult> {
    check_pair(gt, pred, None)?;
    let (w, h, ch) = (gt.width(), gt.height(), gt.channels());
    let mut side = WINDOW.min(w).min(h);
    if side % 2 == 0 {
        side -= 1;
    }
    if side == 0 {
        return Err(MetricError::ShapeMismatch("empty image".into()));
    }
    let reduced = side < WINDOW;
    let kernel = gaussian_kernel(side);
    let c1 = (K1 * 1.0f64).powi(2);
    let c2 = (K2 * 1.0f64).powi(2);

    let mut total = 0.0;
    for c in 0..ch {
        let n = w * h;
        let mut x = vec![0.0f64; n];
        let mut y = vec![0.0f64; n];
        for v in 0..h {
            for u in 0..w {
                x[v * w + u] = gt.get(u, v, c);
                y[v * w + u] = pred.get(u, v, c);
            }
        }
        let xx: Vec<f64> = x.iter().map(|a| a * a).collect();
        let yy: Vec<f64> = y.iter().map(|a| a * a).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();

        let (mu_x, ow, oh) = convolve_valid(&x, w, h, &kernel);
        let (mu_y, _, _) = convolve_valid(&y, w, h, &kernel);
        let (m_xx, _, _) = convolve_valid(&xx, w, h, &kernel);
        let (m_yy, _, _) = convolve_valid(&yy, w, h, &kernel);
        let (m_xy, _, _) = convolve_valid(&xy, w, h, &kernel);

        let mut acc = 0.0;
        for i in 0..ow * oh {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = m_xx[i] - mx * mx;
            let var_y = m_yy[i] - my * my;
            let cov = m_xy[i] - mx * my;
            let num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
            let den = (mx * mx + my * my + c1) * (var_x + var_y + c2);
            acc += num / den;
        }
        total += acc / (ow * oh) as f64;
    }
    Ok(SsimResult { value: total / ch as f64, reduced_window: reduced })
}

/// DSSIM = (1 − SSIM) / 2.
pub fn dssim(gt: &Raster, pred: &Raster) -> Result<SsimResult> {
    let s = ssim(gt, pred)?;
    Ok(SsimResult { value: (1.0 - s.value) / 2.0, reduced_window: s.reduced_window })
}
