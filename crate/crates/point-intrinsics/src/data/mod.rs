//! Synthetic Lambertian scene generation with analytic ground truth, plus
//! dataset directory I/O.
//!
//! Sample directory layout:
//!   image.png    8-bit RGB appearance
//!   depth.pfm    32-bit float depth (or depth.png, 16-bit, value/65535)
//!   albedo.png   8-bit RGB albedo ground truth (optional)
//!   shading.png  8-bit RGB shading ground truth (optional)
//!   normals.pfm  3-channel float normals (optional)
//!   mask.png     8-bit validity mask (optional)
//!   meta.json    light position, intrinsics, ambient term
//! A dataset directory holds sample subdirectories plus manifest.json.

mod pfm;

pub use pfm::{decode_pfm, encode_pfm, PfmError};

use crate::geometry::{default_intrinsics, CameraIntrinsics};
use crate::raster::{Mask, Raster};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing required file: {path}")]
    MissingFile { path: PathBuf },
    #[error("failed to decode {path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("failed to write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid scene spec: {0}")]
    BadSpec(String),
    #[error("sample invariant violated: {0}")]
    Invariant(String),
    #[error("bad manifest: {0}")]
    BadManifest(String),
}

pub type Result<T> = std::result::Result<T, DataError>;

// ── Sample ──────────────────────────────────────────────────────────────

/// One training or evaluation record. Ground-truth maps are optional so the
/// same type serves inference-only inputs.
#[derive(Debug, Clone)]
pub struct IntrinsicSample {
    pub image: Raster,
    pub depth: Raster,
    pub albedo: Option<Raster>,
    pub shading: Option<Raster>,
    pub light_position: Option<[f64; 3]>,
    pub normals: Option<Raster>,
    pub valid_mask: Option<Mask>,
    pub intrinsics: Option<CameraIntrinsics>,
    pub ambient: Option<f64>,
}

impl IntrinsicSample {
    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    /// Checks the map invariants; returns human-readable violations.
    pub fn check_invariants(&self, product_tolerance: f64) -> Vec<String> {
        let mut violations = Vec::new();
        let (w, h) = (self.width(), self.height());
        let dims_ok = |name: &str, r: &Raster, violations: &mut Vec<String>| {
            if r.width() != w || r.height() != h {
                violations.push(format!("{name} is {}×{}, image is {w}×{h}", r.width(), r.height()));
            }
        };
        dims_ok("depth", &self.depth, &mut violations);
        if let Some(a) = &self.albedo {
            dims_ok("albedo", a, &mut violations);
        }
        if let Some(s) = &self.shading {
            dims_ok("shading", s, &mut violations);
        }
        if let Some(n) = &self.normals {
            dims_ok("normals", n, &mut violations);
        }
        if let Some(m) = &self.valid_mask {
            if m.width() != w || m.height() != h {
                violations.push(format!("mask is {}×{}, image is {w}×{h}", m.width(), m.height()));
            }
        }
        if let (Some(albedo), Some(shading)) = (&self.albedo, &self.shading) {
            if albedo.same_dims(&self.image) && shading.same_dims(&self.image) {
                let mut worst = 0.0f64;
                for v in 0..h {
                    for u in 0..w {
                        if let Some(m) = &self.valid_mask {
                            if !m.get(u, v) {
                                continue;
                            }
                        }
                        for c in 0..3 {
                            let err =
                                (self.image.get(u, v, c) - albedo.get(u, v, c) * shading.get(u, v, c)).abs();
                            worst = worst.max(err);
                        }
                    }
                }
                if worst >= product_tolerance {
                    violations.push(format!(
                        "I = A⊙S violated: max |I − A·S| = {worst:.6} ≥ {product_tolerance}"
                    ));
                }
            }
        }
        violations
    }
}

/// Loader warning threshold for |I − A⊙S| with 8-bit quantized maps: each of
/// the three maps rounds to 1/255 steps, bounding the residual by ~1/510 per
/// map involved.
pub const PRODUCT_TOLERANCE_8BIT: f64 = 2e-3;

// ── Scene specification ─────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Sphere { center: [f64; 3], radius: f64 },
    Plane { depth: f64 },
    SphereOnPlane { center: [f64; 3], radius: f64, plane_depth: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlbedoPattern {
    Solid { rgb: [f64; 3] },
    /// Image-space checkerboard with the given pixel period.
    Checker { a: [f64; 3], b: [f64; 3], period: usize },
    /// Sphere/plane two-coloring (left/right halves for single-primitive scenes).
    TwoTone { a: [f64; 3], b: [f64; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub primitive: Primitive,
    pub albedo: AlbedoPattern,
    pub light_position: [f64; 3],
    pub ambient: f64,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 16 || self.height < 16 {
            return Err(DataError::BadSpec(format!(
                "image size {}×{} below minimum 16",
                self.width, self.height
            )));
        }
        if !(0.0..1.0).contains(&self.ambient) {
            return Err(DataError::BadSpec(format!("ambient {} outside [0,1)", self.ambient)));
        }
        let l = self.light_position;
        let on_sphere = |center: [f64; 3], radius: f64| {
            let d = ((l[0] - center[0]).powi(2) + (l[1] - center[1]).powi(2) + (l[2] - center[2]).powi(2))
                .sqrt();
            (d - radius).abs() < 1e-6
        };
        let coincident = match self.primitive {
            Primitive::Sphere { center, radius } => on_sphere(center, radius),
            Primitive::Plane { depth } => (l[2] - depth).abs() < 1e-6,
            Primitive::SphereOnPlane { center, radius, plane_depth } => {
                on_sphere(center, radius) || (l[2] - plane_depth).abs() < 1e-6
            }
        };
        if coincident {
            return Err(DataError::BadSpec("light position lies on a surface".into()));
        }
        let radius_ok = match self.primitive {
            Primitive::Sphere { radius, .. } | Primitive::SphereOnPlane { radius, .. } => radius > 0.0,
            Primitive::Plane { .. } => true,
        };
        if !radius_ok {
            return Err(DataError::BadSpec("sphere radius must be positive".into()));
        }
        let colors = match self.albedo {
            AlbedoPattern::Solid { rgb } => vec![rgb],
            AlbedoPattern::Checker { a, b, period } => {
                if period == 0 {
                    return Err(DataError::BadSpec("checker period must be ≥ 1".into()));
                }
                vec![a, b]
            }
            AlbedoPattern::TwoTone { a, b } => vec![a, b],
        };
        for rgb in colors {
            if rgb.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(DataError::BadSpec("albedo colors must lie in [0,1]".into()));
            }
        }
        Ok(())
    }
}

// ── Rendering ───────────────────────────────────────────────────────────

enum Hit {
    Sphere { s: f64 },
    Plane { s: f64 },
}

fn intersect_sphere(dir: [f64; 3], center: [f64; 3], radius: f64) -> Option<f64> {
    let a: f64 = dir.iter().map(|d| d * d).sum();
    let dc: f64 = dir.iter().zip(&center).map(|(d, c)| d * c).sum();
    let cc: f64 = center.iter().map(|c| c * c).sum();
    let disc = dc * dc - a * (cc - radius * radius);
    if disc < 0.0 {
        return None;
    }
    let s = (dc - disc.sqrt()) / a;
    if s > 1e-9 {
        Some(s)
    } else {
        None
    }
}

fn trace(spec: &SceneSpec, dir: [f64; 3]) -> Option<Hit> {
    match spec.primitive {
        Primitive::Sphere { center, radius } => {
            intersect_sphere(dir, center, radius).map(|s| Hit::Sphere { s })
        }
        Primitive::Plane { depth } => {
            if depth > 0.0 {
                Some(Hit::Plane { s: depth })
            } else {
                None
            }
        }
        Primitive::SphereOnPlane { center, radius, plane_depth } => {
            let sphere = intersect_sphere(dir, center, radius);
            match sphere {
                Some(s) if s < plane_depth => Some(Hit::Sphere { s }),
                _ if plane_depth > 0.0 => Some(Hit::Plane { s: plane_depth }),
                _ => None,
            }
        }
    }
}

fn albedo_at(spec: &SceneSpec, u: usize, v: usize, hit: &Hit) -> [f64; 3] {
    match spec.albedo {
        AlbedoPattern::Solid { rgb } => rgb,
        AlbedoPattern::Checker { a, b, period } => {
            if (u / period + v / period) % 2 == 0 {
                a
            } else {
                b
            }
        }
        AlbedoPattern::TwoTone { a, b } => match (&spec.primitive, hit) {
            (Primitive::SphereOnPlane { .. }, Hit::Sphere { .. }) => a,
            (Primitive::SphereOnPlane { .. }, Hit::Plane { .. }) => b,
            _ => {
                if u < spec.width / 2 {
                    a
                } else {
                    b
                }
            }
        },
    }
}

/// Renders a Lambertian scene with analytic ground truth. The appearance is
/// the exact product I = A⊙S; shading is
/// clamp(ambient + (1−ambient)·max(0, N·L̂), 0, 1) replicated to 3 channels.
pub fn render_synthetic(spec: &SceneSpec) -> Result<IntrinsicSample> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let intr = default_intrinsics(w, h);
    let mut image = Raster::new(w, h, 3);
    let mut depth = Raster::new(w, h, 1);
    let mut albedo = Raster::new(w, h, 3);
    let mut shading = Raster::new(w, h, 3);
    let mut normals = Raster::new(w, h, 3);
    let mut mask = Mask::filled(w, h, false);

    for v in 0..h {
        for u in 0..w {
            let dir = [(u as f64 - intr.cx) / intr.fx, (v as f64 - intr.cy) / intr.fy, 1.0];
            let Some(hit) = trace(spec, dir) else { continue };
            let (s, normal) = match hit {
                Hit::Sphere { s } => {
                    let p = [dir[0] * s, dir[1] * s, s];
                    let (center, radius) = match spec.primitive {
                        Primitive::Sphere { center, radius }
                        | Primitive::SphereOnPlane { center, radius, .. } => (center, radius),
                        Primitive::Plane { .. } => unreachable!(),
                    };
                    let n = [
                        (p[0] - center[0]) / radius,
                        (p[1] - center[1]) / radius,
                        (p[2] - center[2]) / radius,
                    ];
                    (s, n)
                }
                Hit::Plane { s } => (s, [0.0, 0.0, -1.0]),
            };
            let p = [dir[0] * s, dir[1] * s, s];
            let to_light = [
                spec.light_position[0] - p[0],
                spec.light_position[1] - p[1],
                spec.light_position[2] - p[2],
            ];
            let dist = (to_light.iter().map(|x| x * x).sum::<f64>()).sqrt();
            let l_dir = [to_light[0] / dist, to_light[1] / dist, to_light[2] / dist];
            let lambert = (normal[0] * l_dir[0] + normal[1] * l_dir[1] + normal[2] * l_dir[2]).max(0.0);
            let s_val = (spec.ambient + (1.0 - spec.ambient) * lambert).clamp(0.0, 1.0);
            let a = albedo_at(spec, u, v, &hit);

            depth.set(u, v, 0, s);
            mask.set(u, v, true);
            for c in 0..3 {
                albedo.set(u, v, c, a[c]);
                shading.set(u, v, c, s_val);
                image.set(u, v, c, a[c] * s_val);
                normals.set(u, v, c, normal[c]);
            }
        }
    }

    Ok(IntrinsicSample {
        image,
        depth,
        albedo: Some(albedo),
        shading: Some(shading),
        light_position: Some(spec.light_position),
        normals: Some(normals),
        valid_mask: Some(mask),
        intrinsics: Some(intr),
        ambient: Some(spec.ambient),
    })
}

// ── PNG helpers ─────────────────────────────────────────────────────────

fn decode_err(path: &Path, e: impl std::fmt::Display) -> DataError {
    DataError::Decode { path: path.to_path_buf(), message: e.to_string() }
}

pub fn save_rgb8_png(path: &Path, raster: &Raster) -> Result<()> {
    assert_eq!(raster.channels(), 3, "save_rgb8_png expects 3 channels");
    let (w, h) = (raster.width() as u32, raster.height() as u32);
    let mut buf = image::RgbImage::new(w, h);
    for (x, y, px) in buf.enumerate_pixels_mut() {
        let mut rgb = [0u8; 3];
        for (c, out) in rgb.iter_mut().enumerate() {
            *out = (raster.get(x as usize, y as usize, c).clamp(0.0, 1.0) * 255.0).round() as u8;
        }
        *px = image::Rgb(rgb);
    }
    buf.save(path).map_err(|e| DataError::Write {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })
}

pub fn load_rgb8_png(path: &Path) -> Result<Raster> {
    let img = image::open(path).map_err(|e| decode_err(path, e))?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut raster = Raster::new(w, h, 3);
    for (x, y, px) in img.enumerate_pixels() {
        for c in 0..3 {
            raster.set(x as usize, y as usize, c, px.0[c] as f64 / 255.0);
        }
    }
    Ok(raster)
}

pub fn save_gray16_png(path: &Path, raster: &Raster) -> Result<()> {
    assert_eq!(raster.channels(), 1, "save_gray16_png expects 1 channel");
    let (w, h) = (raster.width() as u32, raster.height() as u32);
    let mut buf = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(w, h);
    for (x, y, px) in buf.enumerate_pixels_mut() {
        let v = (raster.get(x as usize, y as usize, 0).clamp(0.0, 1.0) * 65535.0).round() as u16;
        *px = image::Luma([v]);
    }
    buf.save(path).map_err(|e| DataError::Write {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })
}

pub fn save_mask_png(path: &Path, mask: &Mask) -> Result<()> {
    let (w, h) = (mask.width() as u32, mask.height() as u32);
    let mut buf = image::GrayImage::new(w, h);
    for (x, y, px) in buf.enumerate_pixels_mut() {
        *px = image::Luma([if mask.get(x as usize, y as usize) { 255 } else { 0 }]);
    }
    buf.save(path).map_err(|e| DataError::Write {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })
}

fn load_mask_png(path: &Path) -> Result<Mask> {
    let img = image::open(path).map_err(|e| decode_err(path, e))?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut mask = Mask::filled(w, h, false);
    for (x, y, px) in img.enumerate_pixels() {
        mask.set(x as usize, y as usize, px.0[0] >= 128);
    }
    Ok(mask)
}

/// Loads a depth map: `.pfm` keeps raw float values; 16-bit PNG decodes as
/// value/65535, 8-bit as value/255.
pub fn load_depth(path: &Path) -> Result<Raster> {
    if path.extension().and_then(|e| e.to_str()) == Some("pfm") {
        let bytes = std::fs::read(path)
            .map_err(|e| DataError::Io { path: path.to_path_buf(), source: e })?;
        let raster = decode_pfm(&bytes).map_err(|e| decode_err(path, e))?;
        if raster.channels() != 1 {
            return Err(decode_err(path, "depth PFM must be grayscale"));
        }
        return Ok(raster);
    }
    let img = image::open(path).map_err(|e| decode_err(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut raster = Raster::new(w, h, 1);
    match img {
        image::DynamicImage::ImageLuma16(buf) => {
            for (x, y, px) in buf.enumerate_pixels() {
                raster.set(x as usize, y as usize, 0, px.0[0] as f64 / 65535.0);
            }
        }
        other => {
            let buf = other.to_luma8();
            for (x, y, px) in buf.enumerate_pixels() {
                raster.set(x as usize, y as usize, 0, px.0[0] as f64 / 255.0);
            }
        }
    }
    Ok(raster)
}

// ── Sample and dataset I/O ──────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct SampleMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub light_position: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsics: Option<CameraIntrinsics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient: Option<f64>,
}

impl SampleMeta {
    pub fn from_json_bytes(bytes: &[u8]) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }
}

fn quantize_8bit(r: &Raster) -> Raster {
    r.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
}

/// Writes a sample directory. Images and ground truth quantize to 8-bit,
/// depth and normals keep full float precision as PFM. When both albedo and
/// shading are present, the stored image is recomputed from their quantized
/// values so the product identity survives quantization.
pub fn save_sample(dir: &Path, sample: &IntrinsicSample) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| DataError::Io { path: dir.to_path_buf(), source: e })?;
    let image = match (&sample.albedo, &sample.shading) {
        (Some(albedo), Some(shading))
            if albedo.same_dims(&sample.image) && shading.same_dims(&sample.image) =>
        {
            let aq = quantize_8bit(albedo);
            let sq = quantize_8bit(shading);
            let data: Vec<f64> =
                aq.data().iter().zip(sq.data()).map(|(a, s)| a * s).collect();
            Raster::from_data(sample.image.width(), sample.image.height(), 3, data)
                .expect("product dims")
        }
        _ => sample.image.clone(),
    };
    save_rgb8_png(&dir.join("image.png"), &image)?;
    let pfm = encode_pfm(&sample.depth).map_err(|e| decode_err(&dir.join("depth.pfm"), e))?;
    std::fs::write(dir.join("depth.pfm"), pfm)
        .map_err(|e| DataError::Write { path: dir.join("depth.pfm"), source: e })?;
    if let Some(albedo) = &sample.albedo {
        save_rgb8_png(&dir.join("albedo.png"), albedo)?;
    }
    if let Some(shading) = &sample.shading {
        save_rgb8_png(&dir.join("shading.png"), shading)?;
    }
    if let Some(normals) = &sample.normals {
        let pfm = encode_pfm(normals).map_err(|e| decode_err(&dir.join("normals.pfm"), e))?;
        std::fs::write(dir.join("normals.pfm"), pfm)
            .map_err(|e| DataError::Write { path: dir.join("normals.pfm"), source: e })?;
    }
    if let Some(mask) = &sample.valid_mask {
        save_mask_png(&dir.join("mask.png"), mask)?;
    }
    let meta = SampleMeta {
        light_position: sample.light_position,
        intrinsics: sample.intrinsics,
        ambient: sample.ambient,
    };
    let json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    std::fs::write(dir.join("meta.json"), json)
        .map_err(|e| DataError::Write { path: dir.join("meta.json"), source: e })?;
    Ok(())
}

/// A loaded sample plus any invariant warnings.
#[derive(Debug)]
pub struct LoadedSample {
    pub sample: IntrinsicSample,
    pub warnings: Vec<String>,
}

/// Loads a sample directory; image and depth are required, everything else
/// is optional. With `strict`, invariant violations become errors instead of
/// warnings.
pub fn load_sample(dir: &Path, strict: bool) -> Result<LoadedSample> {
    let image_path = dir.join("image.png");
    if !image_path.exists() {
        return Err(DataError::MissingFile { path: image_path });
    }
    let image = load_rgb8_png(&image_path)?;

    let depth_pfm = dir.join("depth.pfm");
    let depth_png = dir.join("depth.png");
    let depth = if depth_pfm.exists() {
        load_depth(&depth_pfm)?
    } else if depth_png.exists() {
        load_depth(&depth_png)?
    } else {
        return Err(DataError::MissingFile { path: depth_pfm });
    };

    let load_optional_rgb = |name: &str| -> Result<Option<Raster>> {
        let path = dir.join(name);
        if path.exists() {
            Ok(Some(load_rgb8_png(&path)?))
        } else {
            Ok(None)
        }
    };
    let albedo = load_optional_rgb("albedo.png")?;
    let shading = load_optional_rgb("shading.png")?;

    let normals_path = dir.join("normals.pfm");
    let normals = if normals_path.exists() {
        let bytes = std::fs::read(&normals_path)
            .map_err(|e| DataError::Io { path: normals_path.clone(), source: e })?;
        let raster = decode_pfm(&bytes).map_err(|e| decode_err(&normals_path, e))?;
        if raster.channels() != 3 {
            return Err(decode_err(&normals_path, "normals PFM must have 3 channels"));
        }
        Some(raster)
    } else {
        None
    };

    let mask_path = dir.join("mask.png");
    let valid_mask = if mask_path.exists() { Some(load_mask_png(&mask_path)?) } else { None };

    let meta_path = dir.join("meta.json");
    let meta = if meta_path.exists() {
        let bytes = std::fs::read(&meta_path)
            .map_err(|e| DataError::Io { path: meta_path.clone(), source: e })?;
        SampleMeta::from_json_bytes(&bytes).map_err(|e| decode_err(&meta_path, e))?
    } else {
        SampleMeta::default()
    };

    let sample = IntrinsicSample {
        image,
        depth,
        albedo,
        shading,
        light_position: meta.light_position,
        normals,
        valid_mask,
        intrinsics: meta.intrinsics,
        ambient: meta.ambient,
    };
    let warnings = sample.check_invariants(PRODUCT_TOLERANCE_8BIT);
    if strict && !warnings.is_empty() {
        return Err(DataError::Invariant(warnings.join("; ")));
    }
    Ok(LoadedSample { sample, warnings })
}

// ── Generation ──────────────────────────────────────────────────────────

/// Per-sample randomization applied on top of a base spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomizationRanges {
    pub light_min: [f64; 3],
    pub light_max: [f64; 3],
    pub ambient_range: (f64, f64),
    pub randomize_albedo_colors: bool,
}

impl Default for RandomizationRanges {
    fn default() -> Self {
        Self {
            light_min: [-2.0, -2.0, -1.0],
            light_max: [2.0, 2.0, 1.5],
            ambient_range: (0.15, 0.35),
            randomize_albedo_colors: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub files: BTreeMap<String, String>,
    pub spec: SceneSpec,
}

pub type Manifest = Vec<ManifestEntry>;

pub fn parse_manifest(bytes: &[u8]) -> Result<Manifest> {
    serde_json::from_slice(bytes).map_err(|e| DataError::BadManifest(e.to_string()))
}

fn random_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [
        rng.random_range(0.15..0.95),
        rng.random_range(0.15..0.95),
        rng.random_range(0.15..0.95),
    ]
}

fn randomize_spec(base: &SceneSpec, ranges: &RandomizationRanges, rng: &mut ChaCha8Rng) -> SceneSpec {
    let mut spec = *base;
    for _ in 0..64 {
        spec.light_position = [
            rng.random_range(ranges.light_min[0]..=ranges.light_max[0]),
            rng.random_range(ranges.light_min[1]..=ranges.light_max[1]),
            rng.random_range(ranges.light_min[2]..=ranges.light_max[2]),
        ];
        spec.ambient = rng.random_range(ranges.ambient_range.0..ranges.ambient_range.1);
        if ranges.randomize_albedo_colors {
            spec.albedo = match spec.albedo {
                AlbedoPattern::Solid { .. } => AlbedoPattern::Solid { rgb: random_color(rng) },
                AlbedoPattern::Checker { period, .. } => {
                    AlbedoPattern::Checker { a: random_color(rng), b: random_color(rng), period }
                }
                AlbedoPattern::TwoTone { .. } => {
                    AlbedoPattern::TwoTone { a: random_color(rng), b: random_color(rng) }
                }
            };
        }
        if spec.validate().is_ok() {
            return spec;
        }
    }
    // Ranges that never validate fall back to the base light position.
    spec.light_position = base.light_position;
    spec.ambient = base.ambient;
    spec
}

/// Generates `count` randomized scenes under `out_dir` and writes
/// manifest.json. Deterministic per seed, byte-for-byte.
pub fn generate_dataset(
    count: usize,
    base: &SceneSpec,
    ranges: &RandomizationRanges,
    seed: u64,
    out_dir: &Path,
) -> Result<Manifest> {
    if count == 0 {
        return Err(DataError::BadSpec("count must be ≥ 1".into()));
    }
    base.validate()?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| DataError::Io { path: out_dir.to_path_buf(), source: e })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut manifest = Vec::with_capacity(count);
    for i in 0..count {
        let mut spec = randomize_spec(base, ranges, &mut rng);
        spec.seed = seed.wrapping_add(i as u64);
        let sample = render_synthetic(&spec)?;
        let id = format!("sample_{i:03}");
        let dir = out_dir.join(&id);
        save_sample(&dir, &sample)?;
        let mut files = BTreeMap::new();
        for name in ["image.png", "depth.pfm", "albedo.png", "shading.png", "normals.pfm", "mask.png", "meta.json"] {
            files.insert(
                name.split('.').next().unwrap().to_string(),
                format!("{id}/{name}"),
            );
        }
        manifest.push(ManifestEntry { id, files, spec });
    }
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(out_dir.join("manifest.json"), json)
        .map_err(|e| DataError::Write { path: out_dir.join("manifest.json"), source: e })?;
    Ok(manifest)
}

/// Sample directories of a dataset: manifest order when manifest.json
/// exists, otherwise sorted subdirectories containing image.png.
pub fn list_samples(dir: &Path) -> Result<Vec<PathBuf>> {
    let manifest_path = dir.join("manifest.json");
    if manifest_path.exists() {
        let bytes = std::fs::read(&manifest_path)
            .map_err(|e| DataError::Io { path: manifest_path.clone(), source: e })?;
        let manifest = parse_manifest(&bytes)?;
        return Ok(manifest.into_iter().map(|e| dir.join(e.id)).collect());
    }
    let mut dirs = Vec::new();
    let entries =
        std::fs::read_dir(dir).map_err(|e| DataError::Io { path: dir.to_path_buf(), source: e })?;
    for entry in entries {
        let entry = entry.map_err(|e| DataError::Io { path: dir.to_path_buf(), source: e })?;
        let path = entry.path();
        if path.is_dir() && path.join("image.png").exists() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Loads every sample of a dataset directory.
pub fn load_dataset(dir: &Path, strict: bool) -> Result<Vec<LoadedSample>> {
    list_samples(dir)?.iter().map(|d| load_sample(d, strict)).collect()
}

#[cfg(test)]
mod tests;
