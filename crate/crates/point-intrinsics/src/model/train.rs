//! Two-stage joint training.
//!
//! Stage one trains the direction net and the shader against light and
//! shading ground truth. Stage two freezes both, caches their shading
//! prediction per sample, and trains the albedo net against the albedo and
//! reconstruction objectives.

use super::{ModelError, ModelWeights, TrainSample, DIRECTION_NORM_EPSILON};
use crate::autodiff::{AdamConfig, AdamState, Gradients, Tape, Tensor, Var};
use crate::losses::{albedo_loss, shading_loss, LossError, LossWeights};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("sample {sample} lacks {what} ground truth")]
    MissingGroundTruth { sample: usize, what: &'static str },
    #[error("training aborted at stage {stage} step {step}: {message}")]
    Aborted { stage: u8, step: usize, message: String, trace: LossTrace },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Loss(#[from] LossError),
}

pub type Result<T> = std::result::Result<T, TrainError>;

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    /// Optimizer steps for the stage being run.
    pub steps: usize,
    pub learning_rate: f64,
    /// Samples accumulated per optimizer step (mini-batch emulation).
    pub grad_accum: usize,
    pub loss_weights: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            learning_rate: 3e-4,
            grad_accum: 1,
            loss_weights: LossWeights::default(),
        }
    }
}

/// One logged optimizer step. Stage-one rows carry the shading loss;
/// stage-two rows carry the albedo terms.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub stage: u8,
    pub step: usize,
    pub shading: Option<f64>,
    pub reconstruction: Option<f64>,
    pub gradient: Option<f64>,
    pub cross_ratio: Option<f64>,
    pub albedo_total: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTrace {
    pub rows: Vec<TraceRow>,
}

impl LossTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,step,l_shading,l_rec,l_grad,l_ccr,l_albedo\n");
        let fmt = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.stage,
                r.step,
                fmt(&r.shading),
                fmt(&r.reconstruction),
                fmt(&r.gradient),
                fmt(&r.cross_ratio),
                fmt(&r.albedo_total)
            ));
        }
        out
    }
}

#[derive(Debug)]
pub struct TrainReport {
    pub trace: LossTrace,
}

fn accumulate_param_grads(
    grads: &Gradients<f32>,
    param_vars: &[Var],
    sizes: &[usize],
    acc: &mut [Vec<f32>],
) {
    for ((var, acc_buf), &size) in param_vars.iter().zip(acc.iter_mut()).zip(sizes) {
        match grads.get(*var) {
            Some(g) => {
                for (a, &gi) in acc_buf.iter_mut().zip(g) {
                    *a += gi;
                }
            }
            None => debug_assert_eq!(acc_buf.len(), size),
        }
    }
}

/// Stage one: minimizes mean |L−L̂|² + |S−Ŝ|² over the dataset (the light
/// term is dropped for samples without light labels). The albedo net is
/// untouched.
pub fn train_stage1(
    samples: &[TrainSample],
    weights: &mut ModelWeights,
    config: &TrainConfig,
) -> Result<TrainReport> {
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    for (i, s) in samples.iter().enumerate() {
        if s.shading_gt.is_none() {
            return Err(TrainError::MissingGroundTruth { sample: i, what: "shading" });
        }
    }
    let sizes: Vec<usize> = weights
        .direction_net
        .params()
        .iter()
        .chain(weights.shader.params())
        .map(Tensor::numel)
        .collect();
    let adam_cfg = AdamConfig { learning_rate: config.learning_rate, ..AdamConfig::default() };
    let mut adam = AdamState::<f32>::new(adam_cfg, &sizes);
    let mut trace = LossTrace::default();
    let accum = config.grad_accum.max(1);

    for step in 0..config.steps {
        let mut acc: Vec<Vec<f32>> = sizes.iter().map(|&n| vec![0.0; n]).collect();
        let mut loss_sum = 0.0f64;
        for micro in 0..accum {
            let sample = &samples[(step * accum + micro) % samples.len()];
            let run = || -> std::result::Result<(f64, Gradients<f32>, Vec<Var>), String> {
                let mut tape = Tape::new();
                let feats = tape.leaf(&sample.features);
                let (raw_dir, dir_params) =
                    weights.direction_net.forward(&mut tape, feats).map_err(|e| e.to_string())?;
                let (dirs, _) = tape
                    .normalize_rows(raw_dir, DIRECTION_NORM_EPSILON, &[0.0, 0.0, -1.0])
                    .map_err(|e| e.to_string())?;
                let normals = tape.leaf(&sample.normals);
                let shader_in =
                    tape.concat_features(normals, dirs).map_err(|e| e.to_string())?;
                let (shading_hat, shader_params) =
                    weights.shader.forward(&mut tape, shader_in).map_err(|e| e.to_string())?;
                let loss = shading_loss(
                    &mut tape,
                    sample.light_target.as_ref(),
                    dirs,
                    sample.shading_gt.as_ref().expect("checked above"),
                    shading_hat,
                )
                .map_err(|e| e.to_string())?;
                let value = tape.value(loss)[0] as f64;
                let grads = tape.backward(loss).map_err(|e| e.to_string())?;
                let mut vars = dir_params;
                vars.extend(shader_params);
                Ok((value, grads, vars))
            };
            match run() {
                Ok((value, grads, vars)) => {
                    loss_sum += value;
                    accumulate_param_grads(&grads, &vars, &sizes, &mut acc);
                }
                Err(message) => {
                    return Err(TrainError::Aborted { stage: 1, step, message, trace });
                }
            }
        }
        let scale = 1.0 / accum as f32;
        {
            let mut params: Vec<&mut Tensor<f32>> = weights
                .direction_net
                .params_mut()
                .iter_mut()
                .chain(weights.shader.params_mut().iter_mut())
                .collect();
            for (p, g) in params.iter_mut().zip(acc.into_iter()) {
                let scaled: Vec<f32> = g.into_iter().map(|x| x * scale).collect();
                p.set_grad(scaled).expect("gradient shapes match");
            }
            if let Err(e) = adam.step(&mut params) {
                return Err(TrainError::Aborted { stage: 1, step, message: e.to_string(), trace });
            }
            for p in params {
                p.clear_grad();
            }
        }
        trace.rows.push(TraceRow {
            stage: 1,
            step,
            shading: Some(loss_sum / accum as f64),
            reconstruction: None,
            gradient: None,
            cross_ratio: None,
            albedo_total: None,
        });
    }
    Ok(TrainReport { trace })
}

/// The frozen direction-net + shader prediction for one sample, used as the
/// constant Ŝ during stage two.
pub fn cached_shading(
    weights: &ModelWeights,
    sample: &TrainSample,
) -> std::result::Result<Tensor<f32>, ModelError> {
    let mut tape = Tape::new();
    let feats = tape.leaf(&sample.features);
    let (raw_dir, _) = weights.direction_net.forward(&mut tape, feats)?;
    let (dirs, _) = tape.normalize_rows(raw_dir, DIRECTION_NORM_EPSILON, &[0.0, 0.0, -1.0])?;
    let normals = tape.leaf(&sample.normals);
    let shader_in = tape.concat_features(normals, dirs)?;
    let (shading_hat, _) = weights.shader.forward(&mut tape, shader_in)?;
    Ok(Tensor::new(vec![sample.len(), 3], tape.value(shading_hat).to_vec()).expect("shading shape"))
}

/// Stage two: the direction net and shader are frozen (their shading is
/// cached once per sample); the albedo net minimizes
/// L_albedo = L_rec + L_grad + L_ccr with Î = Â ⊙ Ŝ.
pub fn train_stage2(
    samples: &[TrainSample],
    weights: &mut ModelWeights,
    config: &TrainConfig,
) -> Result<TrainReport> {
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    for (i, s) in samples.iter().enumerate() {
        if s.albedo_gt.is_none() {
            return Err(TrainError::MissingGroundTruth { sample: i, what: "albedo" });
        }
    }
    let frozen_shading: Vec<Tensor<f32>> = samples
        .iter()
        .map(|s| cached_shading(weights, s))
        .collect::<std::result::Result<_, _>>()?;

    let sizes: Vec<usize> = weights.albedo_net.params().iter().map(Tensor::numel).collect();
    let adam_cfg = AdamConfig { learning_rate: config.learning_rate, ..AdamConfig::default() };
    let mut adam = AdamState::<f32>::new(adam_cfg, &sizes);
    let mut trace = LossTrace::default();
    let accum = config.grad_accum.max(1);

    for step in 0..config.steps {
        let mut acc: Vec<Vec<f32>> = sizes.iter().map(|&n| vec![0.0; n]).collect();
        let (mut rec_sum, mut grad_sum, mut ccr_sum, mut total_sum) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for micro in 0..accum {
            let idx = (step * accum + micro) % samples.len();
            let sample = &samples[idx];
            let run = || -> std::result::Result<(f64, f64, f64, f64, Gradients<f32>, Vec<Var>), String> {
                let mut tape = Tape::new();
                let feats = tape.leaf(&sample.features);
                let (albedo_hat, albedo_params) =
                    weights.albedo_net.forward(&mut tape, feats).map_err(|e| e.to_string())?;
                let shading = tape.leaf(&frozen_shading[idx]);
                let recon = tape.mul(albedo_hat, shading).map_err(|e| e.to_string())?;
                let parts = albedo_loss(
                    &mut tape,
                    &sample.lattice,
                    sample.albedo_gt.as_ref().expect("checked above"),
                    albedo_hat,
                    &sample.image_gt,
                    recon,
                    &config.loss_weights,
                )
                .map_err(|e| e.to_string())?;
                let rec = tape.value(parts.reconstruction)[0] as f64;
                let grad = tape.value(parts.gradient)[0] as f64;
                let ccr = tape.value(parts.cross_ratio)[0] as f64;
                let total = tape.value(parts.total)[0] as f64;
                let grads = tape.backward(parts.total).map_err(|e| e.to_string())?;
                Ok((rec, grad, ccr, total, grads, albedo_params))
            };
            match run() {
                Ok((rec, grad, ccr, total, grads, vars)) => {
                    rec_sum += rec;
                    grad_sum += grad;
                    ccr_sum += ccr;
                    total_sum += total;
                    accumulate_param_grads(&grads, &vars, &sizes, &mut acc);
                }
                Err(message) => {
                    return Err(TrainError::Aborted { stage: 2, step, message, trace });
                }
            }
        }
        let scale = 1.0 / accum as f32;
        {
            let mut params: Vec<&mut Tensor<f32>> =
                weights.albedo_net.params_mut().iter_mut().collect();
            for (p, g) in params.iter_mut().zip(acc.into_iter()) {
                let scaled: Vec<f32> = g.into_iter().map(|x| x * scale).collect();
                p.set_grad(scaled).expect("gradient shapes match");
            }
            if let Err(e) = adam.step(&mut params) {
                return Err(TrainError::Aborted { stage: 2, step, message: e.to_string(), trace });
            }
            for p in params {
                p.clear_grad();
            }
        }
        let a = accum as f64;
        trace.rows.push(TraceRow {
            stage: 2,
            step,
            shading: None,
            reconstruction: Some(rec_sum / a),
            gradient: Some(grad_sum / a),
            cross_ratio: Some(ccr_sum / a),
            albedo_total: Some(total_sum / a),
        });
    }
    Ok(TrainReport { trace })
}
