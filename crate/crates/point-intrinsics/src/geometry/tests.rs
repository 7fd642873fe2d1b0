use super::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn gray_image(w: usize, h: usize) -> Raster {
    Raster::constant(w, h, 3, 0.5)
}

fn sphere_cloud(samples: usize, center: [f64; 3], radius: f64, seed: u64) -> (PointCloud, Vec<[f64; 3]>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(samples);
    let mut normals = Vec::with_capacity(samples);
    while points.len() < samples {
        let x: f64 = rng.random_range(-1.0..1.0);
        let y: f64 = rng.random_range(-1.0..1.0);
        let z: f64 = rng.random_range(-1.0..1.0);
        let norm = (x * x + y * y + z * z).sqrt();
        if norm < 1e-3 || norm > 1.0 {
            continue;
        }
        let dir = [x / norm, y / norm, z / norm];
        points.push([
            center[0] + radius * dir[0],
            center[1] + radius * dir[1],
            center[2] + radius * dir[2],
            0.5,
            0.5,
            0.5,
        ]);
        normals.push(dir);
    }
    (PointCloud::new(points, None, 0, 0).unwrap(), normals)
}

/// Angle between two directions ignoring orientation, in degrees.
fn axis_angle_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    dot.abs().clamp(0.0, 1.0).acos().to_degrees()
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values[values.len() / 2]
}

// ── build_point_cloud ──────────────────────────────────────────────────

#[test]
fn principal_ray_projects_to_origin() {
    let intr = CameraIntrinsics::new(8.0, 8.0, 2.0, 3.0).unwrap();
    let mut depth = Raster::new(8, 8, 1);
    depth.set(2, 3, 0, 1.0);
    let cloud = build_point_cloud(&gray_image(8, 8), &depth, &intr, None).unwrap();
    let idx = cloud.pixel_map().unwrap().iter().position(|&(u, v)| (u, v) == (2, 3)).unwrap();
    let p = cloud.points()[idx];
    assert_eq!([p[0], p[1], p[2]], [0.0, 0.0, 1.0]);
    assert_eq!([p[3], p[4], p[5]], [0.5, 0.5, 0.5]);
}

#[test]
fn zero_depth_collapses_positions_but_keeps_colors() {
    let intr = default_intrinsics(4, 4);
    let mut image = gray_image(4, 4);
    image.set(1, 2, 0, 0.25);
    let depth = Raster::new(4, 4, 1);
    let cloud = build_point_cloud(&image, &depth, &intr, None).unwrap();
    assert_eq!(cloud.len(), 16);
    for i in 0..cloud.len() {
        assert_eq!(cloud.position(i), [0.0, 0.0, 0.0]);
    }
    let idx = cloud.pixel_map().unwrap().iter().position(|&(u, v)| (u, v) == (1, 2)).unwrap();
    assert_eq!(cloud.color(idx)[0], 0.25);
}

#[test]
fn reprojection_recovers_pixel_coordinates() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let (w, h) = (rng.random_range(4..12), rng.random_range(4..12));
        let intr = CameraIntrinsics::new(
            rng.random_range(1.0..50.0),
            rng.random_range(1.0..50.0),
            rng.random_range(-5.0..5.0) + w as f64 / 2.0,
            rng.random_range(-5.0..5.0) + h as f64 / 2.0,
        )
        .unwrap();
        let mut depth = Raster::new(w, h, 1);
        for v in depth.data_mut() {
            *v = rng.random_range(0.5..5.0);
        }
        let cloud = build_point_cloud(&gray_image(w, h), &depth, &intr, None).unwrap();
        for (i, &(u, v)) in cloud.pixel_map().unwrap().iter().enumerate() {
            let [x, y, d] = cloud.position(i);
            let u_back = x * intr.fx / d + intr.cx;
            let v_back = y * intr.fy / d + intr.cy;
            assert!((u_back - u as f64).abs() < 1e-6, "u: {u_back} vs {u}");
            assert!((v_back - v as f64).abs() < 1e-6, "v: {v_back} vs {v}");
        }
    }
}

#[test]
fn dimension_and_depth_errors() {
    let intr = default_intrinsics(4, 4);
    let depth_bad = Raster::new(5, 4, 1);
    assert!(matches!(
        build_point_cloud(&gray_image(4, 4), &depth_bad, &intr, None),
        Err(GeometryError::Dimension(_))
    ));
    let mut depth_neg = Raster::new(4, 4, 1);
    depth_neg.set(1, 1, 0, -0.5);
    assert!(matches!(
        build_point_cloud(&gray_image(4, 4), &depth_neg, &intr, None),
        Err(GeometryError::NegativeDepth { u: 1, v: 1, .. })
    ));
}

#[test]
fn valid_mask_filters_points() {
    let intr = default_intrinsics(4, 4);
    let mut depth = Raster::new(4, 4, 1);
    for v in depth.data_mut() {
        *v = 1.0;
    }
    let mut mask = Mask::filled(4, 4, false);
    mask.set(0, 0, true);
    mask.set(3, 2, true);
    let cloud = build_point_cloud(&gray_image(4, 4), &depth, &intr, Some(&mask)).unwrap();
    assert_eq!(cloud.len(), 2);
    assert_eq!(cloud.pixel_map().unwrap(), &[(0, 0), (3, 2)]);
}

// ── default_intrinsics ─────────────────────────────────────────────────

#[test]
fn default_intrinsics_half_size() {
    let i = default_intrinsics(512, 512);
    assert_eq!((i.fx, i.fy, i.cx, i.cy), (256.0, 256.0, 256.0, 256.0));
    let i = default_intrinsics(2, 2);
    assert_eq!((i.fx, i.fy, i.cx, i.cy), (1.0, 1.0, 1.0, 1.0));
    let i = default_intrinsics(640, 480);
    assert_eq!((i.fx, i.fy, i.cx, i.cy), (320.0, 240.0, 320.0, 240.0));
}

// ── estimate_normals ───────────────────────────────────────────────────

#[test]
fn planar_cloud_yields_camera_facing_z_normals() {
    let mut points = Vec::new();
    for v in 0..8 {
        for u in 0..8 {
            points.push([u as f64 * 0.1, v as f64 * 0.1, 5.0, 0.5, 0.5, 0.5]);
        }
    }
    let cloud = PointCloud::new(points, None, 0, 0).unwrap();
    let field = estimate_normals(&cloud, 16).unwrap();
    for i in 0..field.len() {
        let n = field.normal(i);
        assert!(axis_angle_deg(n, [0.0, 0.0, -1.0]) < 1e-6, "normal {n:?}");
        assert!(n[2] <= 0.0);
        assert!(!field.is_degenerate(i));
    }
}

#[test]
fn sphere_normals_match_analytic_within_5_degrees() {
    let (cloud, analytic) = sphere_cloud(4000, [0.3, -0.2, 2.5], 1.0, 11);
    let field = estimate_normals(&cloud, 16).unwrap();
    let errors: Vec<f64> =
        (0..cloud.len()).map(|i| axis_angle_deg(field.normal(i), analytic[i])).collect();
    let med = median(errors);
    assert!(med < 5.0, "median angular error {med}°");
    for i in 0..field.len() {
        let n = field.normal(i);
        let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        assert!((norm - 1.0).abs() < 1e-5);
        assert!(n[2] <= 0.0);
    }
}

#[test]
fn coincident_clusters_are_flagged_degenerate() {
    let mut points = vec![[0.0, 0.0, 1.0, 0.5, 0.5, 0.5]; 10];
    points.extend(vec![[1.0, 0.0, 1.0, 0.5, 0.5, 0.5]; 10]);
    let cloud = PointCloud::new(points, None, 0, 0).unwrap();
    let field = estimate_normals(&cloud, 16).unwrap();
    assert!(field.degenerate_count() > 0);
    for i in 0..field.len() {
        if field.is_degenerate(i) {
            assert_eq!(field.normal(i), [0.0, 0.0, -1.0]);
        }
    }
}

#[test]
fn normals_invariant_to_translation() {
    let (cloud, _) = sphere_cloud(600, [0.0, 0.0, 2.0], 1.0, 3);
    let translated = PointCloud::new(
        cloud
            .points()
            .iter()
            .map(|p| [p[0] + 10.0, p[1] - 5.0, p[2] + 3.0, p[3], p[4], p[5]])
            .collect(),
        None,
        0,
        0,
    )
    .unwrap();
    let a = estimate_normals(&cloud, 16).unwrap();
    let b = estimate_normals(&translated, 16).unwrap();
    let drift: Vec<f64> =
        (0..cloud.len()).map(|i| axis_angle_deg(a.normal(i), b.normal(i))).collect();
    assert!(median(drift) < 0.01, "translation changed normals");
}

#[test]
fn normals_equivariant_under_camera_axis_rotation() {
    let (cloud, _) = sphere_cloud(600, [0.0, 0.0, 2.0], 1.0, 5);
    let theta = 40.0f64.to_radians();
    let (s, c) = (theta.sin(), theta.cos());
    let rotated = PointCloud::new(
        cloud
            .points()
            .iter()
            .map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2], p[3], p[4], p[5]])
            .collect(),
        None,
        0,
        0,
    )
    .unwrap();
    let a = estimate_normals(&cloud, 16).unwrap();
    let b = estimate_normals(&rotated, 16).unwrap();
    let drift: Vec<f64> = (0..cloud.len())
        .map(|i| {
            let n = a.normal(i);
            let expected = [c * n[0] - s * n[1], s * n[0] + c * n[1], n[2]];
            axis_angle_deg(expected, b.normal(i))
        })
        .collect();
    let med = median(drift);
    assert!(med < 1.0, "median drift under rotation: {med}°");
}

// ── voxel_downsample ───────────────────────────────────────────────────

#[test]
fn single_voxel_collapses_to_centroid() {
    let points = vec![
        [0.001, 0.002, 0.003, 0.2, 0.4, 0.6],
        [0.004, 0.005, 0.006, 0.4, 0.6, 0.8],
    ];
    let cloud = PointCloud::new(points, None, 0, 0).unwrap();
    let out = voxel_downsample(&cloud, 0.03).unwrap();
    assert_eq!(out.len(), 1);
    let p = out.points()[0];
    for (got, want) in p.iter().zip(&[0.0025, 0.0035, 0.0045, 0.3, 0.5, 0.7]) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn spaced_grid_preserves_count() {
    let mut points = Vec::new();
    for i in 0..5 {
        for j in 0..5 {
            points.push([i as f64 * 0.1, j as f64 * 0.1, 1.0, 0.5, 0.5, 0.5]);
        }
    }
    let cloud = PointCloud::new(points, None, 0, 0).unwrap();
    let out = voxel_downsample(&cloud, 0.03).unwrap();
    assert_eq!(out.len(), 25);
}

#[test]
fn voxel_count_matches_brute_force_hash() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let points: Vec<[f64; 6]> = (0..1000)
        .map(|_| {
            [
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(0.0..1.0),
                0.5,
                0.5,
                0.5,
            ]
        })
        .collect();
    let size = 0.07;
    let expected: std::collections::HashSet<(i64, i64, i64)> = points
        .iter()
        .map(|p| {
            ((p[0] / size).floor() as i64, (p[1] / size).floor() as i64, (p[2] / size).floor() as i64)
        })
        .collect();
    let cloud = PointCloud::new(points, None, 0, 0).unwrap();
    let out = voxel_downsample(&cloud, size).unwrap();
    assert_eq!(out.len(), expected.len());
}

#[test]
fn voxel_output_independent_of_input_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut points: Vec<[f64; 6]> = (0..200)
        .map(|_| {
            [
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
                rng.random_range(0.5..1.5),
                0.1,
                0.2,
                0.3,
            ]
        })
        .collect();
    let forward = PointCloud::new(points.clone(), None, 0, 0).unwrap();
    points.reverse();
    let reversed = PointCloud::new(points, None, 0, 0).unwrap();
    let a = voxel_downsample(&forward, 0.05).unwrap();
    let b = voxel_downsample(&reversed, 0.05).unwrap();
    assert_eq!(a.len(), b.len());
    for (pa, pb) in a.points().iter().zip(b.points()) {
        for (x, y) in pa.iter().zip(pb) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn voxel_pixel_map_keeps_member_nearest_centroid() {
    // Principal point at the corner keeps all coordinates nonnegative, so a
    // huge voxel really is a single cell.
    let intr = CameraIntrinsics::new(2.0, 0.5, 0.0, 0.0).unwrap();
    let mut depth = Raster::new(4, 1, 1);
    for v in depth.data_mut() {
        *v = 1.0;
    }
    let cloud = build_point_cloud(&gray_image(4, 1), &depth, &intr, None).unwrap();
    let out = voxel_downsample(&cloud, 100.0).unwrap();
    assert_eq!(out.len(), 1);
    let map = out.pixel_map().unwrap();
    assert_eq!(map.len(), 1);
    // Centroid of x ∈ {0, 0.5, 1, 1.5} is 0.75; members u=1 (0.5) and
    // u=2 (1.0) tie at distance 0.25; the tie resolves to the smaller
    // pixel coordinate.
    assert_eq!(map[0], (1, 0));
}

// ── average_downsample ─────────────────────────────────────────────────

#[test]
fn constant_image_stays_constant() {
    let r = Raster::constant(100, 80, 3, 0.37);
    let out = average_downsample(&r, 64).unwrap();
    assert_eq!((out.width(), out.height()), (64, 64));
    assert!(out.data().iter().all(|&v| (v - 0.37).abs() < 1e-12));
}

#[test]
fn checkerboard_period_two_averages_to_half() {
    let mut r = Raster::new(128, 128, 1);
    for v in 0..128 {
        for u in 0..128 {
            r.set(u, v, 0, ((u + v) % 2) as f64);
        }
    }
    let out = average_downsample(&r, 64).unwrap();
    assert!(out.data().iter().all(|&v| (v - 0.5).abs() < 1e-12));
}

#[test]
fn ramp_blocks_match_brute_force_means() {
    let mut r = Raster::new(256, 256, 1);
    for v in 0..256 {
        for u in 0..256 {
            r.set(u, v, 0, (u + 256 * v) as f64);
        }
    }
    let out = average_downsample(&r, 64).unwrap();
    for tv in 0..64 {
        for tu in 0..64 {
            let mut acc = 0.0;
            for v in tv * 4..(tv + 1) * 4 {
                for u in tu * 4..(tu + 1) * 4 {
                    acc += r.get(u, v, 0);
                }
            }
            assert!((out.get(tu, tv, 0) - acc / 16.0).abs() < 1e-9);
        }
    }
}

#[test]
fn too_small_image_is_a_dimension_error() {
    let r = Raster::new(63, 100, 1);
    assert!(matches!(average_downsample(&r, 64), Err(GeometryError::Dimension(_))));
}

// ── perturb_depth ──────────────────────────────────────────────────────

fn ramp_depth(w: usize, h: usize) -> Raster {
    let mut r = Raster::new(w, h, 1);
    for (i, v) in r.data_mut().iter_mut().enumerate() {
        *v = 1.0 + i as f64 * 0.01;
    }
    r
}

#[test]
fn zero_fraction_is_identity() {
    let depth = ramp_depth(8, 8);
    let out = perturb_depth(&depth, PerturbMode::Inaccurate, 0.0, 0.5, 42).unwrap();
    assert_eq!(out, depth);
}

#[test]
fn full_fraction_hole_zeroes_everything() {
    let depth = ramp_depth(8, 8);
    let out = perturb_depth(&depth, PerturbMode::Hole, 1.0, 0.5, 42).unwrap();
    assert!(out.data().iter().all(|&v| v == 0.0));
}

#[test]
fn quarter_fraction_touches_exactly_16_of_64_pixels() {
    let depth = ramp_depth(8, 8);
    for seed in [1u64, 2, 3] {
        let out = perturb_depth(&depth, PerturbMode::Inaccurate, 0.25, 0.5, seed).unwrap();
        let changed =
            out.data().iter().zip(depth.data()).filter(|(a, b)| a != b).count();
        assert_eq!(changed, 16, "seed {seed}");
        assert!(out.data().iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn perturbation_is_deterministic_per_seed() {
    let depth = ramp_depth(16, 16);
    let a = perturb_depth(&depth, PerturbMode::Hole, 0.3, 1.0, 9).unwrap();
    let b = perturb_depth(&depth, PerturbMode::Hole, 0.3, 1.0, 9).unwrap();
    let c = perturb_depth(&depth, PerturbMode::Hole, 0.3, 1.0, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
