//! The three-subnet point network: albedo, light direction, and a learnable
//! shader, each a per-point MLP with a shared max-pooled global feature.
//!
//! Subnet data flow (n input points, 6 channels):
//!   6 →64→64 (mid) →128→1024 → max-pool → 1×1024 → repeat → concat → n×1088
//!   1088 →512→256→128→3 (decoder)
//! The albedo net and shader end in ReLU (nonnegative outputs); the
//! direction net applies Tanh on its last two layers and its output is
//! normalized to unit length per point.

mod checkpoint;
mod prep;
mod train;

pub use checkpoint::CheckpointError;
pub use prep::{predict_maps, Downsample, PredictionMaps, PrepConfig, TrainSample};
pub use train::{
    train_stage1, train_stage2, LossTrace, TraceRow, TrainConfig, TrainError, TrainReport,
};

use crate::autodiff::{AutodiffError, Tape, Tensor, Var};
use crate::geometry::{estimate_normals, GeometryError, NormalField, PointCloud};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Checkpoint format version written by this build.
pub const FORMAT_VERSION: u32 = 1;
/// Norm floor below which a direction output counts as a zero vector and
/// falls back to (0,0,−1).
pub const DIRECTION_NORM_EPSILON: f32 = 1e-8;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("count mismatch: {0}")]
    CountMismatch(String),
    #[error("bad architecture: {0}")]
    BadArch(String),
    #[error("dataset error: {0}")]
    Dataset(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
}

/// Layer widths and activations of one subnet. The forward pass always runs
/// two encoder layers to the mid feature, two more to the pooled global
/// feature, then four decoder layers on the concatenated local feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubnetArch {
    pub layers: Vec<LayerSpec>,
}

pub const MID_WIDTH: usize = 64;
pub const GLOBAL_WIDTH: usize = 1024;
pub const LOCAL_WIDTH: usize = MID_WIDTH + GLOBAL_WIDTH;
pub const OUTPUT_CHANNELS: usize = 3;
const ENCODER_MID_LAYERS: usize = 2;
const ENCODER_ALL_LAYERS: usize = 4;

impl SubnetArch {
    /// The standard 8-layer subnet. `final_tanh` switches the last two
    /// decoder layers to Tanh (direction net); otherwise every layer is ReLU.
    pub fn standard(final_tanh: bool) -> Self {
        let act = |tanh: bool| if tanh { Activation::Tanh } else { Activation::Relu };
        let l = |input, output, activation| LayerSpec { input, output, activation };
        SubnetArch {
            layers: vec![
                l(6, MID_WIDTH, Activation::Relu),
                l(MID_WIDTH, MID_WIDTH, Activation::Relu),
                l(MID_WIDTH, 128, Activation::Relu),
                l(128, GLOBAL_WIDTH, Activation::Relu),
                l(LOCAL_WIDTH, 512, Activation::Relu),
                l(512, 256, Activation::Relu),
                l(256, 128, act(final_tanh)),
                l(128, OUTPUT_CHANNELS, act(final_tanh)),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != ENCODER_ALL_LAYERS + 4 {
            return Err(ModelError::BadArch(format!("expected 8 layers, got {}", self.layers.len())));
        }
        let mid = self.layers[ENCODER_MID_LAYERS - 1].output;
        let global = self.layers[ENCODER_ALL_LAYERS - 1].output;
        if mid != MID_WIDTH || global != GLOBAL_WIDTH {
            return Err(ModelError::BadArch(format!(
                "mid/global widths {mid}/{global}, expected {MID_WIDTH}/{GLOBAL_WIDTH}"
            )));
        }
        if self.layers[ENCODER_ALL_LAYERS].input != mid + global {
            return Err(ModelError::BadArch(format!(
                "decoder input {} ≠ concatenated width {}",
                self.layers[ENCODER_ALL_LAYERS].input,
                mid + global
            )));
        }
        if self.layers.last().unwrap().output != OUTPUT_CHANNELS {
            return Err(ModelError::BadArch("decoder must emit 3 channels".into()));
        }
        for window in self.layers.windows(2) {
            let chained = window[0].output == window[1].input;
            // The mid→decoder junction concatenates, checked above.
            let junction = window[1].input == mid + global && window[0].output == global;
            if !chained && !junction {
                return Err(ModelError::BadArch(format!(
                    "layer widths do not chain: {} → {}",
                    window[0].output, window[1].input
                )));
            }
        }
        Ok(())
    }
}

/// One per-point MLP subnet: parameters stored as [weight, bias] per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Subnet {
    arch: SubnetArch,
    params: Vec<Tensor<f32>>,
}

impl Subnet {
    /// Kaiming-uniform fan-in weights (bound √(6/fan_in)), zero biases.
    /// A ReLU output layer gets bias 0.5 instead: the decoder input is
    /// dominated by the shared global feature, so a zero-bias ReLU head can
    /// start with every output channel dead and no gradient to recover.
    pub fn init(arch: SubnetArch, rng: &mut ChaCha8Rng) -> Result<Self> {
        arch.validate()?;
        let mut params = Vec::with_capacity(arch.layers.len() * 2);
        for (i, layer) in arch.layers.iter().enumerate() {
            let bound = (6.0 / layer.input as f64).sqrt() as f32;
            let data: Vec<f32> =
                (0..layer.input * layer.output).map(|_| rng.random_range(-bound..bound)).collect();
            params.push(
                Tensor::new(vec![layer.input, layer.output], data)
                    .expect("weight shape")
                    .with_grad(),
            );
            let is_relu_head = i == arch.layers.len() - 1 && layer.activation == Activation::Relu;
            let bias_value = if is_relu_head { 0.5 } else { 0.0 };
            params.push(
                Tensor::new(vec![layer.output], vec![bias_value; layer.output])
                    .expect("bias shape")
                    .with_grad(),
            );
        }
        Ok(Self { arch, params })
    }

    pub fn from_params(arch: SubnetArch, params: Vec<Tensor<f32>>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.layers.len() * 2 {
            return Err(ModelError::BadArch(format!(
                "expected {} parameter tensors, got {}",
                arch.layers.len() * 2,
                params.len()
            )));
        }
        for (i, layer) in arch.layers.iter().enumerate() {
            if params[2 * i].shape() != [layer.input, layer.output]
                || params[2 * i + 1].shape() != [layer.output]
            {
                return Err(ModelError::BadArch(format!("layer {i} parameter shapes mismatch")));
            }
        }
        Ok(Self { arch, params })
    }

    pub fn arch(&self) -> &SubnetArch {
        &self.arch
    }

    pub fn params(&self) -> &[Tensor<f32>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<f32>] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    /// Runs the subnet on an n×6 input already on the tape. Returns the
    /// n×3 output and the parameter leaf vars (weight, bias per layer) for
    /// gradient extraction.
    pub fn forward(&self, tape: &mut Tape<f32>, input: Var) -> Result<(Var, Vec<Var>)> {
        let n = tape.shape(input)[0];
        if n == 0 {
            return Err(ModelError::EmptyCloud);
        }
        let mut param_vars = Vec::with_capacity(self.params.len());
        let mut x = input;
        let mut mid = None;
        for (i, layer) in self.arch.layers.iter().enumerate() {
            if i == ENCODER_ALL_LAYERS {
                let (global, _) = tape.max_pool_points(x)?;
                let repeated = tape.repeat_global(global, n)?;
                x = tape.concat_features(mid.expect("mid feature recorded"), repeated)?;
            }
            let w = tape.leaf(&self.params[2 * i]);
            let b = tape.leaf(&self.params[2 * i + 1]);
            param_vars.push(w);
            param_vars.push(b);
            x = tape.linear(x, w, b)?;
            x = match layer.activation {
                Activation::Relu => tape.relu(x)?,
                Activation::Tanh => tape.tanh(x)?,
            };
            if i == ENCODER_MID_LAYERS - 1 {
                mid = Some(x);
            }
        }
        Ok((x, param_vars))
    }
}

/// All parameters of the three subnets plus format metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub albedo_net: Subnet,
    pub direction_net: Subnet,
    pub shader: Subnet,
    pub version: u32,
}

impl ModelWeights {
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let albedo_net = Subnet::init(SubnetArch::standard(false), &mut rng).expect("standard arch");
        let direction_net = Subnet::init(SubnetArch::standard(true), &mut rng).expect("standard arch");
        let shader = Subnet::init(SubnetArch::standard(false), &mut rng).expect("standard arch");
        Self { albedo_net, direction_net, shader, version: FORMAT_VERSION }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        checkpoint::save(self, path)
    }

    pub fn load(path: &std::path::Path) -> Result<ModelWeights> {
        checkpoint::load(path)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        checkpoint::to_bytes(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<ModelWeights, CheckpointError> {
        checkpoint::from_bytes(bytes)
    }

    pub fn param_count(&self) -> usize {
        self.albedo_net.param_count() + self.direction_net.param_count() + self.shader.param_count()
    }
}

/// Per-point decomposition of one cloud. The reconstruction is the exact
/// elementwise product of albedo and shading.
#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub albedo: Vec<[f32; 3]>,
    pub shading: Vec<[f32; 3]>,
    pub light_directions: Vec<[f32; 3]>,
    pub normals: NormalField,
    pub reconstruction: Vec<[f32; 3]>,
    /// Point indices whose direction output was a zero vector.
    pub direction_fallbacks: Vec<usize>,
}

/// The cloud's `[x,y,d,r,g,b]` rows as an n×6 single-precision tensor.
pub fn features_tensor(cloud: &PointCloud) -> Result<Tensor<f32>> {
    if cloud.is_empty() {
        return Err(ModelError::EmptyCloud);
    }
    let data: Vec<f32> = cloud.points().iter().flat_map(|p| p.iter().map(|&v| v as f32)).collect();
    Ok(Tensor::new(vec![cloud.len(), 6], data).expect("feature shape"))
}

fn rows3(tape: &Tape<f32>, var: Var) -> Vec<[f32; 3]> {
    tape.value(var).chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

/// Albedo prediction for every point, nonnegative by the final ReLU.
pub fn forward_albedo(cloud: &PointCloud, weights: &ModelWeights) -> Result<Vec<[f32; 3]>> {
    let features = features_tensor(cloud)?;
    let mut tape = Tape::new();
    let input = tape.leaf(&features);
    let (out, _) = weights.albedo_net.forward(&mut tape, input)?;
    Ok(rows3(&tape, out))
}

/// Per-point unit light directions (Tanh output, then normalized).
pub fn forward_direction(
    cloud: &PointCloud,
    weights: &ModelWeights,
) -> Result<(Vec<[f32; 3]>, Vec<usize>)> {
    let features = features_tensor(cloud)?;
    let mut tape = Tape::new();
    let input = tape.leaf(&features);
    let (raw, _) = weights.direction_net.forward(&mut tape, input)?;
    let (unit, fallbacks) =
        tape.normalize_rows(raw, DIRECTION_NORM_EPSILON, &[0.0, 0.0, -1.0])?;
    Ok((rows3(&tape, unit), fallbacks))
}

fn shader_features(normals: &NormalField, directions: &[[f32; 3]]) -> Result<Tensor<f32>> {
    if normals.len() != directions.len() {
        return Err(ModelError::CountMismatch(format!(
            "{} normals vs {} directions",
            normals.len(),
            directions.len()
        )));
    }
    let mut data = Vec::with_capacity(normals.len() * 6);
    for (n, d) in normals.normals().iter().zip(directions) {
        data.extend(n.iter().map(|&v| v as f32));
        data.extend_from_slice(d);
    }
    Ok(Tensor::new(vec![normals.len(), 6], data).expect("shader feature shape"))
}

/// Shading from concatenated (normal, light direction) per-point features.
pub fn forward_shader(
    normals: &NormalField,
    directions: &[[f32; 3]],
    weights: &ModelWeights,
) -> Result<Vec<[f32; 3]>> {
    let features = shader_features(normals, directions)?;
    let mut tape = Tape::new();
    let input = tape.leaf(&features);
    let (out, _) = weights.shader.forward(&mut tape, input)?;
    Ok(rows3(&tape, out))
}

/// Full decomposition: normals, all three subnets, and Î = Â ⊙ Ŝ.
pub fn decompose(
    cloud: &PointCloud,
    weights: &ModelWeights,
    neighbor_count: usize,
) -> Result<DecompositionResult> {
    if cloud.is_empty() {
        return Err(ModelError::EmptyCloud);
    }
    let normals = estimate_normals(cloud, neighbor_count.min(cloud.len().saturating_sub(1)))?;
    let albedo = forward_albedo(cloud, weights)?;
    let (light_directions, direction_fallbacks) = forward_direction(cloud, weights)?;
    let shading = forward_shader(&normals, &light_directions, weights)?;
    let reconstruction: Vec<[f32; 3]> = albedo
        .iter()
        .zip(&shading)
        .map(|(a, s)| [a[0] * s[0], a[1] * s[1], a[2] * s[2]])
        .collect();
    Ok(DecompositionResult {
        albedo,
        shading,
        light_directions,
        normals,
        reconstruction,
        direction_fallbacks,
    })
}

#[cfg(test)]
mod tests;
