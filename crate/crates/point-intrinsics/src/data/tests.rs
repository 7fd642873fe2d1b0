use super::*;

fn sphere_spec() -> SceneSpec {
    SceneSpec {
        primitive: Primitive::Sphere { center: [0.0, 0.0, 2.5], radius: 1.0 },
        albedo: AlbedoPattern::Solid { rgb: [0.6, 0.4, 0.3] },
        light_position: [1.0, -1.0, 0.0],
        ambient: 0.2,
        width: 32,
        height: 32,
        seed: 0,
    }
}

#[test]
fn frontal_plane_with_on_axis_distant_light_shades_uniformly() {
    let spec = SceneSpec {
        primitive: Primitive::Plane { depth: 2.0 },
        albedo: AlbedoPattern::Solid { rgb: [0.5, 0.6, 0.7] },
        light_position: [0.0, 0.0, -1000.0],
        ambient: 0.1,
        width: 16,
        height: 16,
        seed: 0,
    };
    let sample = render_synthetic(&spec).unwrap();
    let shading = sample.shading.as_ref().unwrap();
    let s0 = shading.get(0, 0, 0);
    for v in 0..16 {
        for u in 0..16 {
            assert!((shading.get(u, v, 0) - s0).abs() < 1e-4, "shading not uniform");
            for c in 0..3 {
                let expected = spec_albedo(&spec)[c] * shading.get(u, v, c);
                assert!((sample.image.get(u, v, c) - expected).abs() < 1e-12);
            }
        }
    }
}

fn spec_albedo(spec: &SceneSpec) -> [f64; 3] {
    match spec.albedo {
        AlbedoPattern::Solid { rgb } => rgb,
        _ => unreachable!(),
    }
}

#[test]
fn grazing_sphere_points_shade_at_ambient() {
    // Light far along +x: sphere points whose normal is ⟂ to the light
    // direction shade at exactly the ambient term.
    let spec = SceneSpec {
        light_position: [10_000.0, 0.0, 2.5],
        ..sphere_spec()
    };
    let sample = render_synthetic(&spec).unwrap();
    let shading = sample.shading.as_ref().unwrap();
    let normals = sample.normals.as_ref().unwrap();
    let mask = sample.valid_mask.as_ref().unwrap();
    let mut checked = 0;
    for v in 0..32 {
        for u in 0..32 {
            if !mask.get(u, v) {
                continue;
            }
            // Nearly perpendicular: N·x̂ ≈ 0 within a tight band.
            if normals.get(u, v, 0).abs() < 5e-3 {
                assert!((shading.get(u, v, 0) - spec.ambient).abs() < 5e-3);
                checked += 1;
            }
        }
    }
    assert!(checked > 0, "no grazing points found");
}

#[test]
fn generated_sample_satisfies_product_identity_exactly() {
    let sample = render_synthetic(&sphere_spec()).unwrap();
    let albedo = sample.albedo.as_ref().unwrap();
    let shading = sample.shading.as_ref().unwrap();
    for v in 0..32 {
        for u in 0..32 {
            for c in 0..3 {
                let err = (sample.image.get(u, v, c) - albedo.get(u, v, c) * shading.get(u, v, c)).abs();
                assert!(err < 1e-6);
            }
        }
    }
    assert!(sample.check_invariants(1e-6).is_empty());
}

#[test]
fn background_pixels_are_masked_out() {
    let sample = render_synthetic(&sphere_spec()).unwrap();
    let mask = sample.valid_mask.as_ref().unwrap();
    assert!(mask.count() > 0);
    assert!(mask.count() < 32 * 32, "sphere should not fill the frame");
    for v in 0..32 {
        for u in 0..32 {
            if !mask.get(u, v) {
                assert_eq!(sample.depth.get(u, v, 0), 0.0);
            }
        }
    }
}

#[test]
fn generate_single_sample_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let manifest =
        generate_dataset(1, &sphere_spec(), &RandomizationRanges::default(), 7, dir.path()).unwrap();
    assert_eq!(manifest.len(), 1);
    assert!(dir.path().join("sample_000/image.png").exists());
    assert!(dir.path().join("sample_000/depth.pfm").exists());
    assert!(dir.path().join("manifest.json").exists());
    assert_eq!(list_samples(dir.path()).unwrap().len(), 1);
}

#[test]
fn generation_is_byte_identical_per_seed() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let spec = SceneSpec { width: 16, height: 16, ..sphere_spec() };
    generate_dataset(3, &spec, &RandomizationRanges::default(), 99, dir_a.path()).unwrap();
    generate_dataset(3, &spec, &RandomizationRanges::default(), 99, dir_b.path()).unwrap();
    for entry in ["manifest.json", "sample_001/image.png", "sample_002/depth.pfm", "sample_000/meta.json"] {
        let a = std::fs::read(dir_a.path().join(entry)).unwrap();
        let b = std::fs::read(dir_b.path().join(entry)).unwrap();
        assert_eq!(a, b, "{entry} differs between runs");
    }
}

#[test]
fn randomized_lights_are_distinct_across_64_samples() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SceneSpec { width: 16, height: 16, ..sphere_spec() };
    let manifest =
        generate_dataset(64, &spec, &RandomizationRanges::default(), 5, dir.path()).unwrap();
    let mut lights: Vec<[f64; 3]> = manifest.iter().map(|e| e.spec.light_position).collect();
    lights.sort_by(|a, b| a.partial_cmp(b).unwrap());
    lights.dedup();
    assert_eq!(lights.len(), 64);
}

#[test]
fn save_load_round_trip_within_quantization() {
    let dir = tempfile::tempdir().unwrap();
    let sample = render_synthetic(&sphere_spec()).unwrap();
    save_sample(dir.path(), &sample).unwrap();
    let loaded = load_sample(dir.path(), false).unwrap();
    assert!(loaded.warnings.is_empty(), "warnings: {:?}", loaded.warnings);

    let check = |a: &Raster, b: &Raster, tol: f64| {
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() <= tol, "{x} vs {y}");
        }
    };
    // The stored image is recomputed from quantized A and S, so it deviates
    // from the float image by up to the combined quantization of all three.
    check(&sample.image, &loaded.sample.image, 3.0 / 510.0 + 1e-12);
    check(sample.albedo.as_ref().unwrap(), loaded.sample.albedo.as_ref().unwrap(), 0.5 / 255.0 + 1e-12);
    check(sample.shading.as_ref().unwrap(), loaded.sample.shading.as_ref().unwrap(), 0.5 / 255.0 + 1e-12);
    // PFM depth is exact at f32 precision.
    for (x, y) in sample.depth.data().iter().zip(loaded.sample.depth.data()) {
        assert!((x - y).abs() < 1e-6);
    }
    assert_eq!(loaded.sample.light_position, sample.light_position);
    assert_eq!(loaded.sample.intrinsics, sample.intrinsics);
    assert_eq!(loaded.sample.valid_mask.as_ref().unwrap().count(), sample.valid_mask.as_ref().unwrap().count());
}

#[test]
fn sixteen_bit_depth_png_round_trips_within_quantization() {
    let dir = tempfile::tempdir().unwrap();
    let mut depth = Raster::new(8, 8, 1);
    for (i, v) in depth.data_mut().iter_mut().enumerate() {
        *v = i as f64 / 63.0;
    }
    let path = dir.path().join("depth.png");
    save_gray16_png(&path, &depth).unwrap();
    let back = load_depth(&path).unwrap();
    for (a, b) in depth.data().iter().zip(back.data()) {
        assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
    }
}

#[test]
fn missing_albedo_loads_with_gt_absent() {
    let dir = tempfile::tempdir().unwrap();
    let sample = render_synthetic(&sphere_spec()).unwrap();
    save_sample(dir.path(), &sample).unwrap();
    std::fs::remove_file(dir.path().join("albedo.png")).unwrap();
    let loaded = load_sample(dir.path(), true).unwrap();
    assert!(loaded.sample.albedo.is_none());
    assert!(loaded.sample.shading.is_some());
}

#[test]
fn missing_depth_is_an_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let sample = render_synthetic(&sphere_spec()).unwrap();
    save_sample(dir.path(), &sample).unwrap();
    std::fs::remove_file(dir.path().join("depth.pfm")).unwrap();
    match load_sample(dir.path(), false) {
        Err(DataError::MissingFile { path }) => {
            assert!(path.to_string_lossy().contains("depth.pfm"))
        }
        other => panic!("expected MissingFile, got {other:?}"),
    }
}

#[test]
fn corrupt_png_error_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let sample = render_synthetic(&sphere_spec()).unwrap();
    save_sample(dir.path(), &sample).unwrap();
    std::fs::write(dir.path().join("image.png"), b"not a png at all").unwrap();
    match load_sample(dir.path(), false) {
        Err(DataError::Decode { path, .. }) => {
            assert!(path.to_string_lossy().contains("image.png"))
        }
        other => panic!("expected Decode error, got {other:?}"),
    }
}

#[test]
fn strict_mode_rejects_inconsistent_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let mut sample = render_synthetic(&sphere_spec()).unwrap();
    // Corrupt the albedo so I ≠ A⊙S.
    if let Some(albedo) = sample.albedo.as_mut() {
        for v in albedo.data_mut() {
            *v = (*v + 0.4).min(1.0);
        }
    }
    save_sample(dir.path(), &sample).unwrap();
    let lenient = load_sample(dir.path(), false).unwrap();
    assert!(!lenient.warnings.is_empty());
    assert!(matches!(load_sample(dir.path(), true), Err(DataError::Invariant(_))));
}

#[test]
fn light_on_surface_is_rejected() {
    let mut spec = sphere_spec();
    spec.light_position = [0.0, 0.0, 1.5]; // exactly on the sphere
    assert!(matches!(render_synthetic(&spec), Err(DataError::BadSpec(_))));
    let mut plane = SceneSpec {
        primitive: Primitive::Plane { depth: 2.0 },
        ..sphere_spec()
    };
    plane.light_position = [0.3, 0.3, 2.0];
    assert!(matches!(render_synthetic(&plane), Err(DataError::BadSpec(_))));
}

#[test]
fn tiny_images_are_rejected() {
    let spec = SceneSpec { width: 8, height: 8, ..sphere_spec() };
    assert!(matches!(render_synthetic(&spec), Err(DataError::BadSpec(_))));
}
