use retarget_core::baseline::*;
use retarget_core::data::sampling::sample_robot_pose;
use retarget_core::data::{build_pose_bank, MotionTrace, PoseBank};
use retarget_core::eval::*;
use retarget_core::kinematics::{human_pose_from_links, rotation_distance_flat};
use retarget_core::rng::derive_rng;
use retarget_core::runtime::LatentCode;
use retarget_core::train::*;
use retarget_core::*;
use std::path::Path;

fn human() -> KinematicChain {
    KinematicChain::builtin("human-upper-14").unwrap()
}

fn toy() -> KinematicChain {
    KinematicChain::builtin("toy-robot-8").unwrap()
}

fn untrained(seed: u64) -> RetargetModel<f32> {
    RetargetModel::new(&human(), &toy(), &ModelArch::default(), seed).unwrap()
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.rtm");
    let model = untrained(3);
    save_checkpoint(&model, ModelKind::Unsupervised, Some(&TrainConfig::default()), &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.kind, ModelKind::Unsupervised);
    assert_eq!(back.train_config(), Some(TrainConfig::default()));
    for p in held_out_human_poses(&human(), 10, 1).unwrap() {
        let (a, b) = (model.retarget(&p).unwrap(), back.model.retarget(&p).unwrap());
        for (x, y) in a.joint_angles().iter().zip(b.joint_angles()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn checkpoint_errors_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.rtm");
    save_checkpoint::<TrainConfig>(&untrained(1), ModelKind::Unsupervised, None, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let p = Path::new("m.rtm");

    let err = checkpoint_from_bytes(&bytes[..bytes.len() - 10], p).unwrap_err();
    assert!(matches!(err, Error::Checksum { .. }), "{err}");

    let mut v = bytes.clone();
    v[8] = 99;
    assert!(matches!(checkpoint_from_bytes(&v, p).unwrap_err(), Error::Version { found: 99, .. }));

    let mut m = bytes.clone();
    m[0] = b'X';
    assert!(matches!(checkpoint_from_bytes(&m, p).unwrap_err(), Error::BadMagic { .. }));

    let tiago = KinematicChain::builtin("tiago-like-14").unwrap();
    let err = load_checkpoint_for(&path, &human(), &tiago).unwrap_err();
    assert!(matches!(err, Error::ShapeMismatch(_)), "{err}");
}

#[test]
fn retarget_is_decode_of_encode() {
    let model = untrained(5);
    for p in held_out_human_poses(&human(), 20, 2).unwrap() {
        let a = model.retarget(&p).unwrap();
        let b = model.decode_to_robot(&model.encode_human(&p).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(model.encode_human(&p).unwrap().len(), 8);
    }
    let zero = model.decode_to_robot(&LatentCode::new(vec![0.0; 8]).unwrap()).unwrap();
    assert_eq!(zero.len(), 8);
    assert!(LatentCode::new(vec![f64::NAN; 8]).is_err());
}

#[test]
fn interpolation_counts_and_endpoints() {
    let model = untrained(6);
    let keys = held_out_human_poses(&human(), 3, 4).unwrap();
    let trace = model.interpolate_keyposes(&keys, 20, 30.0).unwrap();
    assert_eq!(trace.len(), 39);
    for (k, f) in [(0, 0), (1, 19), (2, 38)] {
        assert_eq!(model.retarget(&keys[k]).unwrap().joint_angles(), &trace.frames[f][..]);
    }
    let two = model.interpolate_keyposes(&keys[..2], 2, 30.0).unwrap();
    assert_eq!(two.len(), 2);
    assert!(model.interpolate_keyposes(&keys[..1], 20, 30.0).is_err());
    assert!(model.interpolate_keyposes(&keys, 1, 30.0).is_err());

    let za = model.encode_human(&keys[0]).unwrap();
    let zb = model.encode_human(&keys[1]).unwrap();
    let odd = model.interpolate_keyposes(&keys[..2], 3, 30.0).unwrap();
    let mid = model.decode_to_robot(&za.lerp(&zb, 0.5)).unwrap();
    for (a, b) in odd.frames[1].iter().zip(mid.joint_angles()) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn trace_retargeting_checks_the_chain_and_keeps_timing() {
    let model = untrained(7);
    let poses = held_out_human_poses(&human(), 4, 9).unwrap();
    let trace = MotionTrace::from_human(&human(), 50.0, &poses).unwrap();
    let out = model.retarget_trace(&trace).unwrap();
    assert_eq!(out.len(), 4);
    assert_eq!(out.frame_rate, 50.0);
    assert_eq!(out.frames[2], model.retarget(&poses[2]).unwrap().joint_angles());

    let robot_trace = MotionTrace::from_robot(&toy(), 50.0, &[RobotPose::zero(&toy()).unwrap()]).unwrap();
    assert!(matches!(model.retarget_trace(&robot_trace).unwrap_err(), Error::ChainMismatch(_)));
}

#[test]
fn oracle_recovers_poses_built_from_robot_kinematics() {
    let (h, r) = (human(), toy());
    let config = OracleConfig::default();
    for seed in 0..5 {
        let theta = sample_robot_pose(&r, &mut derive_rng(seed, 0)).unwrap();
        let links = semantic_link_rotations(&r, &theta).unwrap();
        let pose = human_pose_from_links(&h, &links).unwrap();
        assert!(rotation_distance(&semantic_link_rotations(&h, &pose).unwrap(), &links) < 1e-12);
        let found = oracle_retarget(&h, &r, &pose, &config, seed).unwrap();
        assert!(found.distance < 1e-3, "seed {seed}: {}", found.distance);
    }
    let rest = HumanPose::rest(&h).unwrap();
    let found = oracle_retarget(&h, &r, &rest, &config, 0).unwrap();
    assert!(found.distance < 1e-3);
    assert!(found.pose.joint_angles().iter().all(|a| a.abs() < 1e-2));
}

#[test]
fn larger_oracle_budget_never_does_worse() {
    let (h, r) = (human(), toy());
    for p in held_out_human_poses(&h, 5, 3).unwrap() {
        let small = oracle_retarget(&h, &r, &p, &OracleConfig { restarts: 4, ..OracleConfig::default() }, 11).unwrap();
        let big = oracle_retarget(&h, &r, &p, &OracleConfig { restarts: 8, ..OracleConfig::default() }, 11).unwrap();
        assert!(big.distance <= small.distance);
    }
}

#[test]
fn joint_mse_arithmetic() {
    let r = toy();
    let mid: Vec<f64> = r.ranges().iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
    let a = RobotPose::new_strict(&r, mid.clone()).unwrap();
    let b = RobotPose::new_strict(&r, mid.iter().map(|m| m + 0.1).collect()).unwrap();
    let ta = MotionTrace::from_robot(&r, 30.0, &[a.clone(), a.clone()]).unwrap();
    let tb = MotionTrace::from_robot(&r, 30.0, &[b.clone(), b]).unwrap();
    assert_eq!(eval_joint_mse(&ta, &ta).unwrap(), 0.0);
    assert!((eval_joint_mse(&ta, &tb).unwrap() - 0.01).abs() < 1e-12);
    assert_eq!(eval_joint_mse(&ta, &tb).unwrap(), eval_joint_mse(&tb, &ta).unwrap());
    let short = MotionTrace::from_robot(&r, 30.0, &[a]).unwrap();
    assert!(eval_joint_mse(&ta, &short).is_err());
}

fn small_banks() -> (PoseBank, PoseBank) {
    (
        build_pose_bank(&human(), Domain::Human, 2000, 21, 1).unwrap(),
        build_pose_bank(&toy(), Domain::Robot, 2000, 22, 1).unwrap(),
    )
}

#[test]
fn agreement_is_chance_for_untrained_and_one_for_isometric() {
    let (bh, br) = small_banks();
    let banks = BankPair::new(&bh, &br).unwrap();
    let chance = model_triplet_agreement(&untrained(8), banks, 2000, 5).unwrap();
    assert_eq!(chance.triplets, 2000);
    assert!((0.4..=0.6).contains(&chance.cross_domain), "{chance:?}");
    // Per link, q q^T has squared Frobenius distance 2 - 2<q, p>^2, so the
    // concatenation is an exact embedding of twice the link distance.
    let embed = |r: BankRef| -> Result<Vec<f64>> {
        let row = banks.bank(r.domain).link_row(r.index);
        let mut out = Vec::with_capacity(64);
        for q in row.chunks_exact(4) {
            for i in 0..4 {
                for j in 0..4 {
                    out.push(f64::from(q[i]) * f64::from(q[j]));
                }
            }
        }
        Ok(out)
    };
    assert_eq!(eval_triplet_agreement(banks, 2000, 5, &embed).unwrap().overall, 1.0);
}

#[test]
fn bench_rejects_small_runs_and_reports_consistent_rates() {
    let model = untrained(2);
    let poses = held_out_human_poses(&human(), 8, 1).unwrap();
    assert!(matches!(bench_latency(&model, &poses, 999).unwrap_err(), Error::Validation(_)));
    let r = bench_latency(&model, &poses, 1000).unwrap();
    assert_eq!(r.calls, 1000);
    assert!((r.khz - 1.0 / (r.mean_s * 1e3)).abs() <= 1e-9 * r.khz);
    assert!(r.p99_s >= 0.0 && r.mean_s > 0.0);
}

#[test]
fn pairs_are_minimal_and_round_trip() {
    let (bh, br) = small_banks();
    let pairs = generate_pairs(&bh, &br, 300, 2).unwrap();
    pairs.validate(&bh, &br).unwrap();
    assert_eq!(pairs, generate_pairs(&bh, &br, 300, 1).unwrap());
    for k in (0..300).step_by(3) {
        let (h, r) = pairs.pairs[k];
        let mut best = (usize::MAX, f64::INFINITY);
        for j in 0..br.len() {
            let d = rotation_distance_flat(bh.link_row(h as usize), br.link_row(j));
            if d < best.1 {
                best = (j, d);
            }
        }
        assert_eq!(r as usize, best.0);
    }
    let back = PairedDataset::from_bytes(&pairs.to_bytes(), Path::new("p")).unwrap();
    assert_eq!(back, pairs);
}

#[test]
fn exact_robot_twin_is_paired_first_on_ties() {
    let r = toy();
    let theta = sample_robot_pose(&r, &mut derive_rng(4, 0)).unwrap();
    let other = sample_robot_pose(&r, &mut derive_rng(5, 0)).unwrap();
    let rows = vec![other.joint_angles().to_vec(), theta.joint_angles().to_vec(), theta.joint_angles().to_vec()];
    let br = PoseBank::from_rows(&r, Domain::Robot, 0, &rows).unwrap();
    let pose = human_pose_from_links(&human(), &semantic_link_rotations(&r, &theta).unwrap()).unwrap();
    let bh = PoseBank::from_rows(&human(), Domain::Human, 0, &[pose.to_flat()]).unwrap();
    let pairs = generate_pairs(&bh, &br, 1, 1).unwrap();
    assert_eq!(pairs.pairs[0], (0, 1));
    assert!(pairs.distances[0] < 1e-6);
}

#[test]
fn baseline_memorizes_a_single_pair() {
    let (bh, br) = small_banks();
    let mut pairs = generate_pairs(&bh, &br, 1, 1).unwrap();
    pairs.pairs = vec![pairs.pairs[0]; 4];
    pairs.distances = vec![pairs.distances[0]; 4];
    let mut model = baseline_model::<f32>(&bh, &br, &ModelArch::default(), 1).unwrap();
    let config = BaselineConfig { batch: 4, epochs: 3, steps_per_epoch: 200, ..BaselineConfig::default() };
    train_baseline(&mut model, &pairs, &bh, &br, None, &config, &mut |_| {}).unwrap();
    let l1 = baseline_l1(&model, &pairs, &bh, &br).unwrap();
    assert!(l1 / 8.0 < 0.01, "{l1}");

    let mut a = baseline_model::<f32>(&bh, &br, &ModelArch::default(), 1).unwrap();
    let mut b = a.clone();
    let short = BaselineConfig { epochs: 1, steps_per_epoch: 5, batch: 8, ..BaselineConfig::default() };
    let la = train_baseline(&mut a, &pairs, &bh, &br, None, &short, &mut |_| {}).unwrap();
    let lb = train_baseline(&mut b, &pairs, &bh, &br, None, &short, &mut |_| {}).unwrap();
    assert_eq!(la.epochs[0].l1, lb.epochs[0].l1);
}

#[test]
fn training_is_deterministic_and_zero_epochs_is_a_no_op() {
    let (bh, br) = small_banks();
    let banks = BankPair::new(&bh, &br).unwrap();
    let config = TrainConfig { epochs: 2, steps_per_epoch: 5, batch: 32, ..TrainConfig::default() };
    let run = || {
        let mut m = RetargetModel::<f32>::new(&human(), &toy(), &ModelArch::default(), 1).unwrap();
        let log = train(&mut m, banks, None, &config, &mut |_| {}).unwrap();
        (log, checkpoint_bytes::<TrainConfig>(&m, ModelKind::Unsupervised, None).unwrap())
    };
    let (a, b) = (run(), run());
    assert_eq!(a.0.to_csv(), b.0.to_csv());
    assert_eq!(a.1, b.1);
    assert_eq!(a.0.epochs.len(), 2);

    let mut m = RetargetModel::<f32>::new(&human(), &toy(), &ModelArch::default(), 1).unwrap();
    let before = checkpoint_bytes::<TrainConfig>(&m, ModelKind::Unsupervised, None).unwrap();
    let log = train(&mut m, banks, None, &TrainConfig { epochs: 0, ..config }, &mut |_| {}).unwrap();
    assert!(log.epochs.is_empty());
    assert_eq!(checkpoint_bytes::<TrainConfig>(&m, ModelKind::Unsupervised, None).unwrap(), before);
}
