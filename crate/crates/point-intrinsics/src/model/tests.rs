use super::*;
use crate::autodiff::Tensor;
use crate::data::{render_synthetic, AlbedoPattern, Primitive, SceneSpec};
use crate::geometry::NormalField;
use crate::losses::{shading_loss, LossWeights};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<[f64; 6]> = (0..n)
        .map(|_| {
            [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.5..3.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
            ]
        })
        .collect();
    PointCloud::new(points, None, 0, 0).unwrap()
}

fn test_scene(seed: u64) -> SceneSpec {
    SceneSpec {
        primitive: Primitive::Sphere { center: [0.0, 0.0, 2.2], radius: 1.0 },
        albedo: AlbedoPattern::TwoTone { a: [0.7, 0.3, 0.2], b: [0.2, 0.5, 0.8] },
        light_position: [1.5, -1.0, 0.2],
        ambient: 0.25,
        width: 16,
        height: 16,
        seed,
    }
}

fn prep() -> PrepConfig {
    PrepConfig { downsample: Downsample::None, neighbor_count: 8, drop_zero_depth: true }
}

#[test]
fn standard_arch_has_documented_anchor_widths() {
    let arch = SubnetArch::standard(false);
    arch.validate().unwrap();
    assert_eq!(arch.layers[1].output, 64);
    assert_eq!(arch.layers[3].output, 1024);
    assert_eq!(arch.layers[4].input, 1088);
    assert_eq!(arch.layers[7].output, 3);
    // 8 layers of weight+bias: the full subnet parameter count is fixed.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let subnet = Subnet::init(arch, &mut rng).unwrap();
    assert_eq!(subnet.param_count(), 867_203);
}

#[test]
fn direction_arch_uses_tanh_on_last_two_layers() {
    let arch = SubnetArch::standard(true);
    assert_eq!(arch.layers[6].activation, Activation::Tanh);
    assert_eq!(arch.layers[7].activation, Activation::Tanh);
    assert_eq!(arch.layers[5].activation, Activation::Relu);
}

#[test]
fn single_point_cloud_produces_single_nonnegative_albedo() {
    let cloud = random_cloud(1, 1);
    let weights = ModelWeights::init(42);
    let albedo = forward_albedo(&cloud, &weights).unwrap();
    assert_eq!(albedo.len(), 1);
    assert!(albedo[0].iter().all(|&v| v >= 0.0));
}

#[test]
fn zero_weight_network_outputs_zero_albedo() {
    let arch = SubnetArch::standard(false);
    let params: Vec<Tensor<f32>> = arch
        .layers
        .iter()
        .flat_map(|l| {
            [Tensor::zeros(vec![l.input, l.output]), Tensor::zeros(vec![l.output])]
        })
        .collect();
    let zero_net = Subnet::from_params(arch, params).unwrap();
    let mut weights = ModelWeights::init(0);
    weights.albedo_net = zero_net;
    let cloud = random_cloud(5, 2);
    let albedo = forward_albedo(&cloud, &weights).unwrap();
    assert!(albedo.iter().all(|row| row.iter().all(|&v| v == 0.0)));
}

#[test]
fn permutation_equivariance_of_all_three_subnets() {
    let weights = ModelWeights::init(7);
    let cloud = random_cloud(40, 3);
    let mut perm: Vec<usize> = (0..cloud.len()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(4));
    let permuted = cloud.permuted(&perm);

    let albedo = forward_albedo(&cloud, &weights).unwrap();
    let albedo_perm = forward_albedo(&permuted, &weights).unwrap();
    let (dirs, _) = forward_direction(&cloud, &weights).unwrap();
    let (dirs_perm, _) = forward_direction(&permuted, &weights).unwrap();
    for (i, &src) in perm.iter().enumerate() {
        assert_eq!(albedo_perm[i], albedo[src], "albedo row {i}");
        assert_eq!(dirs_perm[i], dirs[src], "direction row {i}");
    }

    // Shader: permute its (normal, direction) inputs consistently.
    let normals: Vec<[f64; 3]> = (0..cloud.len())
        .map(|i| {
            let p = cloud.position(i);
            let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt().max(1e-9);
            [-p[0] / norm, -p[1] / norm, -(p[2] / norm).abs()]
        })
        .collect();
    let field = NormalField::from_raw(normals.clone());
    let field_perm = NormalField::from_raw(perm.iter().map(|&i| normals[i]).collect());
    let dirs_gathered: Vec<[f32; 3]> = perm.iter().map(|&i| dirs[i]).collect();
    let shading = forward_shader(&field, &dirs, &weights).unwrap();
    let shading_perm = forward_shader(&field_perm, &dirs_gathered, &weights).unwrap();
    for (i, &src) in perm.iter().enumerate() {
        assert_eq!(shading_perm[i], shading[src], "shading row {i}");
    }
}

#[test]
fn direction_outputs_are_unit_length() {
    let cloud = random_cloud(30, 5);
    let weights = ModelWeights::init(11);
    let (dirs, fallbacks) = forward_direction(&cloud, &weights).unwrap();
    assert!(fallbacks.is_empty());
    for d in dirs {
        let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        assert!((norm - 1.0).abs() < 1e-5, "norm {norm}");
    }
}

#[test]
fn tanh_decoder_keeps_raw_directions_in_unit_cube() {
    let cloud = random_cloud(30, 6);
    let weights = ModelWeights::init(12);
    let features = features_tensor(&cloud).unwrap();
    let mut tape = Tape::new();
    let input = tape.leaf(&features);
    let (raw, _) = weights.direction_net.forward(&mut tape, input).unwrap();
    assert!(tape.value(raw).iter().all(|v| (-1.0..=1.0).contains(v)));
}

#[test]
fn shader_constant_inputs_give_constant_rows() {
    let weights = ModelWeights::init(13);
    let n = 12;
    let field = NormalField::from_raw(vec![[0.0, 0.0, -1.0]; n]);
    let dirs = vec![[0.3f32, -0.2, -0.5]; n];
    let shading = forward_shader(&field, &dirs, &weights).unwrap();
    assert_eq!(shading.len(), n);
    for row in &shading {
        assert_eq!(*row, shading[0]);
        assert!(row.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn decompose_reconstruction_is_exact_product() {
    let cloud = random_cloud(100, 8);
    let weights = ModelWeights::init(21);
    let result = decompose(&cloud, &weights, 8).unwrap();
    assert_eq!(result.reconstruction.len(), 100);
    for i in 0..100 {
        for c in 0..3 {
            assert_eq!(result.reconstruction[i][c], result.albedo[i][c] * result.shading[i][c]);
        }
        let l = result.light_directions[i];
        let norm = (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]).sqrt();
        assert!((norm - 1.0).abs() < 1e-5);
    }
}

fn prepared_samples(count: usize, seed: u64) -> Vec<TrainSample> {
    (0..count)
        .map(|i| {
            let mut spec = test_scene(seed + i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + i as u64);
            spec.light_position = [
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-0.5..0.8),
            ];
            let sample = render_synthetic(&spec).unwrap();
            TrainSample::prepare(&sample, &prep()).unwrap()
        })
        .collect()
}

#[test]
fn stage1_step0_loss_is_definitional() {
    let samples = prepared_samples(2, 100);
    let mut weights = ModelWeights::init(31);
    let initial = weights.clone();
    let config = TrainConfig { steps: 1, ..TrainConfig::default() };
    let report = train_stage1(&samples, &mut weights, &config).unwrap();
    assert_eq!(report.trace.rows.len(), 1);

    // Recompute the same loss on the initial weights by hand.
    let sample = &samples[0];
    let mut tape = Tape::new();
    let feats = tape.leaf(&sample.features);
    let (raw, _) = initial.direction_net.forward(&mut tape, feats).unwrap();
    let (dirs, _) = tape.normalize_rows(raw, DIRECTION_NORM_EPSILON, &[0.0, 0.0, -1.0]).unwrap();
    let normals = tape.leaf(&sample.normals);
    let shader_in = tape.concat_features(normals, dirs).unwrap();
    let (shading_hat, _) = initial.shader.forward(&mut tape, shader_in).unwrap();
    let loss = shading_loss(
        &mut tape,
        sample.light_target.as_ref(),
        dirs,
        sample.shading_gt.as_ref().unwrap(),
        shading_hat,
    )
    .unwrap();
    let expected = tape.value(loss)[0] as f64;
    assert_eq!(report.trace.rows[0].shading.unwrap(), expected);
}

#[test]
fn stage1_leaves_albedo_net_untouched_and_reduces_loss() {
    let samples = prepared_samples(2, 200);
    let mut weights = ModelWeights::init(32);
    let albedo_before = weights.albedo_net.clone();
    let config = TrainConfig { steps: 40, learning_rate: 1e-3, ..TrainConfig::default() };
    let report = train_stage1(&samples, &mut weights, &config).unwrap();
    assert_eq!(weights.albedo_net, albedo_before, "albedo net must not move in stage 1");
    let first = report.trace.rows[0].shading.unwrap();
    let last = report.trace.rows.last().unwrap().shading.unwrap();
    assert!(last < first, "loss did not decrease: {first} → {last}");
}

#[test]
fn stage2_freezes_direction_and_shader_bit_identically() {
    let samples = prepared_samples(2, 300);
    let mut weights = ModelWeights::init(33);
    let stage1 = TrainConfig { steps: 5, ..TrainConfig::default() };
    train_stage1(&samples, &mut weights, &stage1).unwrap();
    let dir_before = weights.direction_net.clone();
    let shader_before = weights.shader.clone();
    let albedo_before = weights.albedo_net.clone();
    let stage2 = TrainConfig { steps: 10, learning_rate: 1e-3, ..TrainConfig::default() };
    let report = train_stage2(&samples, &mut weights, &stage2).unwrap();
    assert_eq!(weights.direction_net, dir_before, "direction net moved in stage 2");
    assert_eq!(weights.shader, shader_before, "shader moved in stage 2");
    assert_ne!(weights.albedo_net, albedo_before, "albedo net should train");
    // Sum identity at every logged step.
    for row in &report.trace.rows {
        let total = row.albedo_total.unwrap();
        let sum = row.reconstruction.unwrap() + row.gradient.unwrap() + row.cross_ratio.unwrap();
        assert!((total - sum).abs() < 1e-5, "step {}: {total} vs {sum}", row.step);
    }
}

#[test]
fn training_rejects_missing_ground_truth() {
    let mut samples = prepared_samples(1, 400);
    samples[0].shading_gt = None;
    let mut weights = ModelWeights::init(34);
    assert!(matches!(
        train_stage1(&samples, &mut weights, &TrainConfig { steps: 1, ..TrainConfig::default() }),
        Err(TrainError::MissingGroundTruth { what: "shading", .. })
    ));
    let mut samples = prepared_samples(1, 401);
    samples[0].albedo_gt = None;
    assert!(matches!(
        train_stage2(&samples, &mut weights, &TrainConfig { steps: 1, ..TrainConfig::default() }),
        Err(TrainError::MissingGroundTruth { what: "albedo", .. })
    ));
    let empty: Vec<TrainSample> = Vec::new();
    assert!(matches!(
        train_stage1(&empty, &mut weights, &TrainConfig::default()),
        Err(TrainError::EmptyDataset)
    ));
}

#[test]
fn trace_csv_has_one_row_per_step_and_stage_columns() {
    let samples = prepared_samples(1, 500);
    let mut weights = ModelWeights::init(35);
    let config = TrainConfig { steps: 3, ..TrainConfig::default() };
    let r1 = train_stage1(&samples, &mut weights, &config).unwrap();
    let r2 = train_stage2(&samples, &mut weights, &config).unwrap();
    let mut trace = LossTrace::default();
    trace.rows.extend(r1.trace.rows);
    trace.rows.extend(r2.trace.rows);
    let csv = trace.to_csv();
    let lines: Vec<&str> = csv.trim_end().lines().collect();
    assert_eq!(lines[0], "stage,step,l_shading,l_rec,l_grad,l_ccr,l_albedo");
    assert_eq!(lines.len(), 1 + 6);
    assert!(lines[1].starts_with("1,0,"));
    assert!(lines[4].starts_with("2,0,"));
}

#[test]
fn checkpoint_round_trip_preserves_forward_outputs_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let weights = ModelWeights::init(77);
    weights.save(&path).unwrap();
    let loaded = ModelWeights::load(&path).unwrap();
    assert_eq!(loaded, weights);

    let cloud = random_cloud(50, 9);
    let a = decompose(&cloud, &weights, 8).unwrap();
    let b = decompose(&cloud, &loaded, 8).unwrap();
    assert_eq!(a.albedo, b.albedo);
    assert_eq!(a.shading, b.shading);
    assert_eq!(a.light_directions, b.light_directions);
}

#[test]
fn checkpoint_rejects_corruption() {
    let weights = ModelWeights::init(78);
    let bytes = weights.to_bytes();

    let mut truncated = bytes.clone();
    truncated.truncate(bytes.len() - 5);
    assert!(matches!(ModelWeights::from_bytes(&truncated), Err(CheckpointError::Corrupt(_))));

    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(matches!(ModelWeights::from_bytes(&bad_magic), Err(CheckpointError::BadMagic)));

    let mut bad_version = bytes.clone();
    bad_version[11] = 99;
    assert!(matches!(
        ModelWeights::from_bytes(&bad_version),
        Err(CheckpointError::UnsupportedVersion(99))
    ));

    assert!(ModelWeights::from_bytes(b"POINTNETIID").is_err());
}

#[test]
fn loss_weights_scale_the_total() {
    let samples = prepared_samples(1, 600);
    let mut weights = ModelWeights::init(36);
    let config = TrainConfig {
        steps: 1,
        loss_weights: LossWeights { reconstruction: 2.0, gradient: 0.5, cross_ratio: 0.0 },
        ..TrainConfig::default()
    };
    let report = train_stage2(&samples, &mut weights, &config).unwrap();
    let row = &report.trace.rows[0];
    let expected = 2.0 * row.reconstruction.unwrap() + 0.5 * row.gradient.unwrap();
    assert!((row.albedo_total.unwrap() - expected).abs() < 1e-5);
}
