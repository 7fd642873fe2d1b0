//! Sample preparation: maps → point cloud → per-point tensors, plus the
//! inverse scatter of per-point predictions back onto the image lattice.

use super::{decompose, features_tensor, ModelError, ModelWeights, Result};
use crate::autodiff::Tensor;
use crate::data::IntrinsicSample;
use crate::geometry::{
    average_downsample, build_point_cloud, default_intrinsics, downsample_mask_all,
    estimate_normals, voxel_downsample, CameraIntrinsics, PointCloud,
    AVERAGE_DOWNSAMPLE_TARGET, DEFAULT_NEIGHBOR_COUNT, DEFAULT_VOXEL_SIZE,
};
use crate::losses::Lattice;
use crate::raster::{Mask, Raster};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Downsample {
    Voxel(f64),
    /// Block-mean everything onto a 64×64 lattice before building the cloud.
    Average64,
    None,
}

impl Default for Downsample {
    fn default() -> Self {
        Downsample::Voxel(DEFAULT_VOXEL_SIZE)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PrepConfig {
    pub downsample: Downsample,
    pub neighbor_count: usize,
    /// Exclude zero-depth pixels from the cloud (hole handling when a valid
    /// mask is in play). Without it, zero-depth points pass through at the
    /// origin.
    pub drop_zero_depth: bool,
}

impl Default for PrepConfig {
    fn default() -> Self {
        Self {
            downsample: Downsample::default(),
            neighbor_count: DEFAULT_NEIGHBOR_COUNT,
            drop_zero_depth: true,
        }
    }
}

/// Maps at the working resolution, after any lattice downsampling.
pub struct PreparedMaps {
    pub image: Raster,
    pub depth: Raster,
    pub albedo: Option<Raster>,
    pub shading: Option<Raster>,
    pub mask: Option<Mask>,
    pub intrinsics: CameraIntrinsics,
}

fn scaled_intrinsics(intr: &CameraIntrinsics, from: (usize, usize), to: (usize, usize)) -> CameraIntrinsics {
    let sx = to.0 as f64 / from.0 as f64;
    let sy = to.1 as f64 / from.1 as f64;
    CameraIntrinsics { fx: intr.fx * sx, fy: intr.fy * sy, cx: intr.cx * sx, cy: intr.cy * sy }
}

/// Applies the lattice-level part of preparation (average downsampling,
/// zero-depth exclusion, intrinsics adjustment).
pub fn prepare_maps(sample: &IntrinsicSample, config: &PrepConfig) -> Result<PreparedMaps> {
    let (w, h) = (sample.width(), sample.height());
    let intr = sample.intrinsics.unwrap_or_else(|| default_intrinsics(w, h));

    let (image, depth, albedo, shading, mut mask, intrinsics) = match config.downsample {
        Downsample::Average64 => {
            let t = AVERAGE_DOWNSAMPLE_TARGET;
            let image = average_downsample(&sample.image, t)?;
            let depth = average_downsample(&sample.depth, t)?;
            let albedo = sample.albedo.as_ref().map(|a| average_downsample(a, t)).transpose()?;
            let shading = sample.shading.as_ref().map(|s| average_downsample(s, t)).transpose()?;
            let mask = sample.valid_mask.as_ref().map(|m| downsample_mask_all(m, t)).transpose()?;
            let intr = scaled_intrinsics(&intr, (w, h), (t, t));
            (image, depth, albedo, shading, mask, intr)
        }
        _ => (
            sample.image.clone(),
            sample.depth.clone(),
            sample.albedo.clone(),
            sample.shading.clone(),
            sample.valid_mask.clone(),
            intr,
        ),
    };

    if config.drop_zero_depth {
        let (dw, dh) = (depth.width(), depth.height());
        let mut m = mask.take().unwrap_or_else(|| Mask::filled(dw, dh, true));
        for v in 0..dh {
            for u in 0..dw {
                if depth.get(u, v, 0) <= 0.0 {
                    m.set(u, v, false);
                }
            }
        }
        mask = Some(m);
    }

    Ok(PreparedMaps { image, depth, albedo, shading, mask, intrinsics })
}

/// Builds the working cloud from prepared maps (including any voxel pass).
pub fn build_cloud(maps: &PreparedMaps, config: &PrepConfig) -> Result<PointCloud> {
    let cloud = build_point_cloud(&maps.image, &maps.depth, &maps.intrinsics, maps.mask.as_ref())?;
    match config.downsample {
        Downsample::Voxel(size) => Ok(voxel_downsample(&cloud, size)?),
        _ => Ok(cloud),
    }
}

/// One sample fully prepared for training: per-point tensors aligned to the
/// cloud order, plus the lattice adjacency.
pub struct TrainSample {
    pub cloud: PointCloud,
    pub features: Tensor<f32>,
    pub normals: Tensor<f32>,
    pub lattice: Lattice,
    pub image_gt: Tensor<f32>,
    pub albedo_gt: Option<Tensor<f32>>,
    pub shading_gt: Option<Tensor<f32>>,
    pub light_target: Option<Tensor<f32>>,
}

impl TrainSample {
    pub fn prepare(sample: &IntrinsicSample, config: &PrepConfig) -> Result<TrainSample> {
        let maps = prepare_maps(sample, config)?;
        let cloud = build_cloud(&maps, config)?;
        if cloud.is_empty() {
            return Err(ModelError::EmptyCloud);
        }
        let n = cloud.len();
        let k = config.neighbor_count.min(n.saturating_sub(1));
        let normal_field = estimate_normals(&cloud, k)?;
        let normals = Tensor::new(
            vec![n, 3],
            normal_field.normals().iter().flat_map(|n| n.iter().map(|&v| v as f32)).collect(),
        )
        .expect("normal shape");

        let features = features_tensor(&cloud)?;
        let image_gt = Tensor::new(
            vec![n, 3],
            cloud.points().iter().flat_map(|p| p[3..6].iter().map(|&v| v as f32)).collect(),
        )
        .expect("color shape");

        let lattice = Lattice::from_cloud(&cloud)
            .map_err(|e| ModelError::Dataset(format!("lattice: {e}")))?;

        let map = cloud.pixel_map().expect("built clouds carry a pixel map");
        let gather = |raster: &Raster| -> Tensor<f32> {
            let data: Vec<f32> = map
                .iter()
                .flat_map(|&(u, v)| {
                    (0..3).map(move |c| raster.get(u as usize, v as usize, c) as f32)
                })
                .collect();
            Tensor::new(vec![n, 3], data).expect("gathered shape")
        };
        let albedo_gt = maps.albedo.as_ref().map(&gather);
        let shading_gt = maps.shading.as_ref().map(&gather);

        let light_target = sample.light_position.map(|light| {
            let data: Vec<f32> = cloud
                .points()
                .iter()
                .flat_map(|p| {
                    let to = [light[0] - p[0], light[1] - p[1], light[2] - p[2]];
                    let norm = (to[0] * to[0] + to[1] * to[1] + to[2] * to[2]).sqrt().max(1e-12);
                    [(to[0] / norm) as f32, (to[1] / norm) as f32, (to[2] / norm) as f32]
                })
                .collect();
            Tensor::new(vec![n, 3], data).expect("light target shape")
        });

        Ok(TrainSample {
            cloud,
            features,
            normals,
            lattice,
            image_gt,
            albedo_gt,
            shading_gt,
            light_target,
        })
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }
}

/// Per-point predictions scattered back onto the working lattice. Pixels
/// not covered by any point stay zero and are excluded from `coverage`.
pub struct PredictionMaps {
    pub albedo: Raster,
    pub shading: Raster,
    pub reconstruction: Raster,
    pub light_directions: Raster,
    pub normals: Raster,
    pub coverage: Mask,
    /// Ground truth at the same working resolution.
    pub gt_image: Raster,
    pub gt_albedo: Option<Raster>,
    pub gt_shading: Option<Raster>,
}

/// Runs the full decomposition on a sample and scatters the per-point
/// results back to the lattice for image-space metrics and export.
pub fn predict_maps(
    sample: &IntrinsicSample,
    weights: &ModelWeights,
    config: &PrepConfig,
) -> Result<PredictionMaps> {
    let maps = prepare_maps(sample, config)?;
    let cloud = build_cloud(&maps, config)?;
    if cloud.is_empty() {
        return Err(ModelError::EmptyCloud);
    }
    let result = decompose(&cloud, weights, config.neighbor_count)?;
    let (w, h) = (maps.image.width(), maps.image.height());
    let mut albedo = Raster::new(w, h, 3);
    let mut shading = Raster::new(w, h, 3);
    let mut reconstruction = Raster::new(w, h, 3);
    let mut light_directions = Raster::new(w, h, 3);
    let mut normals = Raster::new(w, h, 3);
    let mut coverage = Mask::filled(w, h, false);
    let map = cloud.pixel_map().expect("built clouds carry a pixel map");
    for (i, &(u, v)) in map.iter().enumerate() {
        let (u, v) = (u as usize, v as usize);
        coverage.set(u, v, true);
        for c in 0..3 {
            albedo.set(u, v, c, result.albedo[i][c] as f64);
            shading.set(u, v, c, result.shading[i][c] as f64);
            reconstruction.set(u, v, c, result.reconstruction[i][c] as f64);
            light_directions.set(u, v, c, result.light_directions[i][c] as f64);
            normals.set(u, v, c, result.normals.normal(i)[c]);
        }
    }
    Ok(PredictionMaps {
        albedo,
        shading,
        reconstruction,
        light_directions,
        normals,
        coverage,
        gt_image: maps.image,
        gt_albedo: maps.albedo,
        gt_shading: maps.shading,
    })
}
