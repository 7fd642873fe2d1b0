//! Point-cloud construction from RGB-D, surface normals, downsampling and
//! depth perturbation.

mod kdtree;
mod normals;

pub use normals::{estimate_normals, NormalField};

use crate::raster::{Mask, Raster};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use thiserror::Error;

pub const DEFAULT_NEIGHBOR_COUNT: usize = 16;
pub const DEFAULT_VOXEL_SIZE: f64 = 0.03;
pub const AVERAGE_DOWNSAMPLE_TARGET: usize = 64;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("negative depth {value} at pixel ({u}, {v})")]
    NegativeDepth { u: usize, v: usize, value: f64 },
    #[error("color channel out of [0,1] at pixel ({u}, {v})")]
    ColorRange { u: usize, v: usize },
    #[error("color channel {channel} out of [0,1] at point {index}")]
    PointColorRange { index: usize, channel: usize },
    #[error("invalid intrinsics: focal lengths must be positive")]
    InvalidIntrinsics,
    #[error("voxel size must be positive, got {0}")]
    InvalidVoxelSize(f64),
    #[error("cloud has {points} points, need at least {needed}")]
    TooFewPoints { points: usize, needed: usize },
    #[error("pixel map is not injective or out of bounds")]
    BadPixelMap,
}

/// Pinhole camera parameters in pixels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, GeometryError> {
        if fx <= 0.0 || fy <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics);
        }
        Ok(Self { fx, fy, cx, cy })
    }
}

/// Focal lengths and principal point at half the image size.
pub fn default_intrinsics(width: usize, height: usize) -> CameraIntrinsics {
    CameraIntrinsics {
        fx: width as f64 / 2.0,
        fy: height as f64 / 2.0,
        cx: width as f64 / 2.0,
        cy: height as f64 / 2.0,
    }
}

/// An ordered colored point cloud; each point is `[x, y, d, r, g, b]` with
/// spatial coordinates in camera units and colors in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<[f64; 6]>,
    pixel_map: Option<Vec<(u32, u32)>>,
    width: usize,
    height: usize,
}

impl PointCloud {
    pub fn new(
        points: Vec<[f64; 6]>,
        pixel_map: Option<Vec<(u32, u32)>>,
        width: usize,
        height: usize,
    ) -> Result<Self, GeometryError> {
        for (i, p) in points.iter().enumerate() {
            for c in 3..6 {
                if !(0.0..=1.0).contains(&p[c]) || !p[c].is_finite() {
                    return Err(GeometryError::PointColorRange { index: i, channel: c - 3 });
                }
            }
        }
        if let Some(map) = &pixel_map {
            if map.len() != points.len() {
                return Err(GeometryError::BadPixelMap);
            }
            let mut seen = vec![false; width * height];
            for &(u, v) in map {
                let (u, v) = (u as usize, v as usize);
                if u >= width || v >= height || seen[v * width + u] {
                    return Err(GeometryError::BadPixelMap);
                }
                seen[v * width + u] = true;
            }
        }
        Ok(Self { points, pixel_map, width, height })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 6]] {
        &self.points
    }

    pub fn pixel_map(&self) -> Option<&[(u32, u32)]> {
        self.pixel_map.as_deref()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn position(&self, i: usize) -> [f64; 3] {
        let p = self.points[i];
        [p[0], p[1], p[2]]
    }

    pub fn color(&self, i: usize) -> [f64; 3] {
        let p = self.points[i];
        [p[3], p[4], p[5]]
    }

    /// Applies a point-order permutation: `out[i] = self[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> PointCloud {
        PointCloud {
            points: perm.iter().map(|&i| self.points[i]).collect(),
            pixel_map: self.pixel_map.as_ref().map(|m| perm.iter().map(|&i| m[i]).collect()),
            width: self.width,
            height: self.height,
        }
    }
}

/// Projects every valid pixel through the pinhole model:
/// x = (u−cx)·d/fx, y = (v−cy)·d/fy, keeping depth and color per point.
/// Points are emitted row-major, and the pixel map records provenance.
pub fn build_point_cloud(
    image: &Raster,
    depth: &Raster,
    intrinsics: &CameraIntrinsics,
    valid_mask: Option<&Mask>,
) -> Result<PointCloud, GeometryError> {
    if image.channels() != 3 {
        return Err(GeometryError::Dimension(format!(
            "image must have 3 channels, got {}",
            image.channels()
        )));
    }
    if depth.channels() != 1 {
        return Err(GeometryError::Dimension(format!(
            "depth must have 1 channel, got {}",
            depth.channels()
        )));
    }
    if image.width() != depth.width() || image.height() != depth.height() {
        return Err(GeometryError::Dimension(format!(
            "image {}×{} vs depth {}×{}",
            image.width(),
            image.height(),
            depth.width(),
            depth.height()
        )));
    }
    if let Some(mask) = valid_mask {
        if mask.width() != image.width() || mask.height() != image.height() {
            return Err(GeometryError::Dimension("valid mask dimensions differ from image".into()));
        }
    }
    let (w, h) = (image.width(), image.height());
    let mut points = Vec::new();
    let mut pixel_map = Vec::new();
    for v in 0..h {
        for u in 0..w {
            if let Some(mask) = valid_mask {
                if !mask.get(u, v) {
                    continue;
                }
            }
            let d = depth.get(u, v, 0);
            if d < 0.0 {
                return Err(GeometryError::NegativeDepth { u, v, value: d });
            }
            let x = (u as f64 - intrinsics.cx) * d / intrinsics.fx;
            let y = (v as f64 - intrinsics.cy) * d / intrinsics.fy;
            let (r, g, b) = (image.get(u, v, 0), image.get(u, v, 1), image.get(u, v, 2));
            if !(0.0..=1.0).contains(&r) || !(0.0..=1.0).contains(&g) || !(0.0..=1.0).contains(&b) {
                return Err(GeometryError::ColorRange { u, v });
            }
            points.push([x, y, d, r, g, b]);
            pixel_map.push((u as u32, v as u32));
        }
    }
    Ok(PointCloud { points, pixel_map: Some(pixel_map), width: w, height: h })
}

/// One centroid point per occupied voxel. The output order is a function of
/// the point multiset only (voxels sorted by grid coordinate); the pixel map
/// keeps the member pixel nearest the centroid.
pub fn voxel_downsample(cloud: &PointCloud, voxel_size: f64) -> Result<PointCloud, GeometryError> {
    if voxel_size <= 0.0 || !voxel_size.is_finite() {
        return Err(GeometryError::InvalidVoxelSize(voxel_size));
    }
    let mut voxels: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let key = (
            (p[0] / voxel_size).floor() as i64,
            (p[1] / voxel_size).floor() as i64,
            (p[2] / voxel_size).floor() as i64,
        );
        voxels.entry(key).or_default().push(i);
    }
    let mut keys: Vec<(i64, i64, i64)> = voxels.keys().copied().collect();
    keys.sort_unstable();

    let mut points = Vec::with_capacity(keys.len());
    let mut pixel_map = cloud.pixel_map.as_ref().map(|_| Vec::with_capacity(keys.len()));
    for key in keys {
        let members = &voxels[&key];
        let mut centroid = [0.0f64; 6];
        for &i in members {
            for c in 0..6 {
                centroid[c] += cloud.points[i][c];
            }
        }
        let inv = 1.0 / members.len() as f64;
        for c in &mut centroid {
            *c *= inv;
        }
        if let (Some(map_out), Some(map_in)) = (pixel_map.as_mut(), cloud.pixel_map.as_ref()) {
            // Nearest member wins; exact ties resolve by pixel coordinate so
            // the choice is independent of input order.
            let mut best: Option<(f64, (u32, u32))> = None;
            for &i in members {
                let p = cloud.points[i];
                let d2 = (p[0] - centroid[0]).powi(2)
                    + (p[1] - centroid[1]).powi(2)
                    + (p[2] - centroid[2]).powi(2);
                let pix = map_in[i];
                let key = (d2, (pix.1, pix.0));
                if best.map_or(true, |(bd, bp)| key < (bd, (bp.1, bp.0))) {
                    best = Some((d2, pix));
                }
            }
            map_out.push(best.unwrap().1);
        }
        points.push(centroid);
    }
    Ok(PointCloud { points, pixel_map, width: cloud.width, height: cloud.height })
}

/// Block-mean pooling onto a `target`×`target` grid. Requires the source to
/// be at least target-sized in both dimensions.
pub fn average_downsample(raster: &Raster, target: usize) -> Result<Raster, GeometryError> {
    let (w, h) = (raster.width(), raster.height());
    if w < target || h < target {
        return Err(GeometryError::Dimension(format!(
            "cannot average-downsample {w}×{h} to {target}×{target}"
        )));
    }
    let mut out = Raster::new(target, target, raster.channels());
    for tv in 0..target {
        let v0 = tv * h / target;
        let v1 = (tv + 1) * h / target;
        for tu in 0..target {
            let u0 = tu * w / target;
            let u1 = (tu + 1) * w / target;
            let count = ((v1 - v0) * (u1 - u0)) as f64;
            for c in 0..raster.channels() {
                let mut acc = 0.0;
                for v in v0..v1 {
                    for u in u0..u1 {
                        acc += raster.get(u, v, c);
                    }
                }
                out.set(tu, tv, c, acc / count);
            }
        }
    }
    Ok(out)
}

/// Block-pool of a validity mask: a target pixel is valid only if every
/// source pixel in its block is valid.
pub fn downsample_mask_all(mask: &Mask, target: usize) -> Result<Mask, GeometryError> {
    let (w, h) = (mask.width(), mask.height());
    if w < target || h < target {
        return Err(GeometryError::Dimension(format!(
            "cannot downsample mask {w}×{h} to {target}×{target}"
        )));
    }
    let mut out = Mask::filled(target, target, true);
    for tv in 0..target {
        for tu in 0..target {
            let mut all = true;
            'block: for v in tv * h / target..(tv + 1) * h / target {
                for u in tu * w / target..(tu + 1) * w / target {
                    if !mask.get(u, v) {
                        all = false;
                        break 'block;
                    }
                }
            }
            out.set(tu, tv, all);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbMode {
    /// Add uniform noise in [−magnitude, magnitude], clamped at zero.
    Inaccurate,
    /// Set depth to zero.
    Hole,
}

/// Perturbs exactly `round(fraction · H·W)` distinct pixels, deterministically
/// per seed.
pub fn perturb_depth(
    depth: &Raster,
    mode: PerturbMode,
    fraction: f64,
    magnitude: f64,
    seed: u64,
) -> Result<Raster, GeometryError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(GeometryError::Dimension(format!("fraction {fraction} outside [0,1]")));
    }
    if mode == PerturbMode::Inaccurate && magnitude <= 0.0 {
        return Err(GeometryError::Dimension("magnitude must be positive".into()));
    }
    let total = depth.width() * depth.height();
    let affected = (fraction * total as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Partial Fisher-Yates: the first `affected` entries are a uniform
    // sample of distinct pixel indices.
    let mut indices: Vec<u32> = (0..total as u32).collect();
    for i in 0..affected.min(total.saturating_sub(1)) {
        let j = rng.random_range(i..total);
        indices.swap(i, j);
    }
    let mut out = depth.clone();
    for &idx in indices.iter().take(affected) {
        let value = &mut out.data_mut()[idx as usize];
        match mode {
            PerturbMode::Hole => *value = 0.0,
            PerturbMode::Inaccurate => {
                let noise: f64 = rng.random_range(-magnitude..magnitude);
                *value = (*value + noise).max(0.0);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
