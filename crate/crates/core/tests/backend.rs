use mulls::backend::{verify_and_refine, Backend, EdgeKind, Member, Submap, VerifyParams};
use mulls::eval::SceneSpec;
use mulls::features::{extract_features, FeatureCloud};
use mulls::frontend::{update_map, LocalMap};
use mulls::{Pose, RunConfig, TangentVector};
use nalgebra::{SymmetricEigen, Vector3};

fn world_features(spec: &SceneSpec, frames: impl IntoIterator<Item = usize>, cfg: &RunConfig) -> LocalMap {
    let mut map = LocalMap::default();
    for i in frames {
        let (cloud, pose) = spec.generate_frame(i);
        let f = extract_features(&cloud, cfg, &Pose::identity()).unwrap();
        map = update_map(&map, &f.sparse.transformed(&pose), &pose, cfg.frontend.crop_radius, cfg.frontend.max_points_per_class);
    }
    map
}

fn single_scan_submap(id: usize, reference: Pose, map: &FeatureCloud, cfg: &RunConfig) -> Submap {
    let members = vec![Member {
        frame_id: id as u64,
        relative: Pose::identity(),
        information: None,
    }];
    Submap::snapshot(id, id as u64, reference, map, members, (0.0, 0.0, 1), cfg)
}

#[test]
fn self_registration_recovers_a_half_metre_shift() {
    let cfg = RunConfig::default();
    let spec = SceneSpec::preset("structured").unwrap();
    let map = world_features(&spec, [0], &cfg);
    let a = single_scan_submap(0, Pose::identity(), map.cloud(), &cfg);
    let shift = Pose::from_translation(Vector3::new(0.5, 0.0, 0.0));
    let b = single_scan_submap(1, shift, map.cloud(), &cfg);

    let (edge, r) = verify_and_refine(&a, &b, &Pose::identity(), &VerifyParams::from_config(&cfg), EdgeKind::Loop).unwrap();
    assert_eq!((edge.from, edge.to), (0, 1));
    let err = edge.measurement.between(&shift);
    assert!(err.translation().norm() < 0.01, "{}", err.translation().norm());
    assert!(err.rotation_angle().to_degrees() < 0.1);
    assert!(r.overlap > 0.9);

    let info = edge.information;
    assert!((info - info.transpose()).abs().max() <= 1e-9 * info.abs().max());
    assert!(SymmetricEigen::new(info).eigenvalues.min() >= 0.0);
}

#[test]
fn disjoint_submaps_are_rejected() {
    let cfg = RunConfig::default();
    let spec = SceneSpec::preset("structured").unwrap();
    let map = world_features(&spec, [0], &cfg);
    let a = single_scan_submap(0, Pose::identity(), map.cloud(), &cfg);
    let far = map.cloud().transformed(&Pose::from_translation(Vector3::new(500.0, 0.0, 0.0)));
    let b = single_scan_submap(1, Pose::identity(), &far, &cfg);
    assert!(verify_and_refine(&a, &b, &Pose::identity(), &VerifyParams::from_config(&cfg), EdgeKind::Loop).is_err());
}

/// Odometry with a constant per-frame bias over locally exact submaps:
/// loop closures must remove most of the endpoint error.
#[test]
fn loop_closure_removes_injected_drift() {
    let _ = env_logger::builder().is_test(true).try_init();
    let mut cfg = RunConfig::default();
    cfg.frontend.crop_radius = 30.0;
    let spec = SceneSpec::preset("loop").unwrap();
    let gt = spec.ground_truth();
    let n = gt.len();

    let bias = Pose::from_tangent(&TangentVector::new(0.003, 0.002, 0.0, 0.0, 0.0, 0.012f64.to_radians()));
    let mut odo = vec![gt[0]];
    for i in 1..n {
        let rel = gt[i - 1].between(&gt[i]).compose(&bias);
        odo.push(odo[i - 1].compose(&rel));
    }

    let refs = [0, 60, 120, 180, n - 1];
    let mut backend = Backend::new(cfg.clone());
    let mut first = 0;
    for (id, &r) in refs.iter().enumerate() {
        // Local map as a drift-free front-end would hold it, rigidly
        // attached to the drifted reference.
        let local = world_features(&spec, (r.saturating_sub(20)..=r).step_by(2), &cfg);
        let warp = odo[r].compose(&gt[r].inverse());
        let members = (first..=r)
            .map(|f| Member {
                frame_id: f as u64,
                relative: odo[r].between(&odo[f]),
                information: None,
            })
            .collect();
        let travelled: f64 = (first.max(1)..=r).map(|f| odo[f - 1].between(&odo[f]).translation().norm()).sum();
        let s = Submap::snapshot(id, r as u64, odo[r], &local.cloud().transformed(&warp), members, (travelled, 0.0, r + 1 - first), &cfg);
        backend.add_submap(s).unwrap();
        first = r + 1;
    }

    let end = n - 1;
    let before = odo[end].between(&gt[end]).translation().norm();
    let corrected = backend.corrected();
    assert_eq!(corrected.poses.len(), n);
    let (fid, pose) = corrected.poses[end];
    assert_eq!(fid, end as u64);
    let after = pose.between(&gt[end]).translation().norm();
    println!("endpoint error {before:.3} m -> {after:.3} m; loops {:?}", backend.loops().iter().filter(|l| l.accepted).count());
    assert!(before > 0.5, "injected drift too small: {before}");
    assert!(after <= 0.2 * before, "{before} -> {after}");
    assert!(backend.optimizations() > 0);
    for e in &backend.graph().edges {
        let i = e.information;
        assert!((i - i.transpose()).abs().max() <= 1e-9 * i.abs().max());
        assert!(SymmetricEigen::new(i).eigenvalues.min() >= -1e-9 * i.abs().max());
    }
}

#[test]
fn worker_publishes_snapshots() {
    let cfg = RunConfig::default();
    let spec = SceneSpec::preset("structured").unwrap();
    let map = world_features(&spec, [0], &cfg);
    let handle = Backend::new(cfg.clone()).spawn();
    assert_eq!(handle.latest().poses.len(), 0);
    handle.submit(single_scan_submap(0, Pose::identity(), map.cloud(), &cfg)).unwrap();
    let step = Pose::from_translation(Vector3::new(1.0, 0.0, 0.0));
    handle.submit(single_scan_submap(1, step, map.cloud(), &cfg)).unwrap();
    let backend = handle.finish().unwrap();
    assert_eq!(backend.submaps().len(), 2);
    let c = backend.corrected();
    assert_eq!(c.poses.len(), 2);
    assert_eq!(c.version, 2);
    assert_eq!(backend.graph().edges.len(), 1);
}
