use proptest::prelude::*;
use retarget_core::data::sampling::{random_rotation, sample_human_pose, sample_robot_pose};
use retarget_core::data::{build_pose_bank, MotionTrace, PoseBank};
use retarget_core::kinematics::forward_kinematics;
use retarget_core::rng::derive_rng;
use retarget_core::runtime::LatentCode;
use retarget_core::train::loss::triplet_loss;
use retarget_core::train::*;
use retarget_core::*;
use std::path::Path;

fn links(seed: u64) -> LinkRotationSet {
    let mut rng = derive_rng(seed, 0);
    LinkRotationSet::new([0; 4].map(|_| random_rotation(&mut rng))).unwrap()
}

fn rotate_all(q: &Quat, s: &LinkRotationSet) -> LinkRotationSet {
    LinkRotationSet::new(s.rotations().map(|r| q.multiply(&r))).unwrap()
}

fn human() -> KinematicChain {
    KinematicChain::builtin("human-upper-14").unwrap()
}

fn toy() -> KinematicChain {
    KinematicChain::builtin("toy-robot-8").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn distance_is_symmetric_and_bounded(a in any::<u64>(), b in any::<u64>()) {
        let (x, y) = (links(a), links(b));
        let d = rotation_distance(&x, &y);
        prop_assert_eq!(d, rotation_distance(&y, &x));
        prop_assert!((0.0..=4.0).contains(&d));
        prop_assert!(rotation_distance(&x, &x) < 1e-12);
    }

    #[test]
    fn distance_ignores_quaternion_sign(a in any::<u64>(), b in any::<u64>(), mask in 0u8..16) {
        let (x, y) = (links(a), links(b));
        let mut flipped = *x.rotations();
        for (k, q) in flipped.iter_mut().enumerate() {
            if mask & (1 << k) != 0 {
                *q = q.neg();
            }
        }
        let fx = LinkRotationSet::new(flipped).unwrap();
        prop_assert!((rotation_distance(&x, &y) - rotation_distance(&fx, &y)).abs() <= 1e-12);
    }

    #[test]
    fn distance_invariant_under_common_left_rotation(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let (x, y) = (links(a), links(b));
        let q = random_rotation(&mut derive_rng(c, 1));
        let d0 = rotation_distance(&x, &y);
        let d1 = rotation_distance(&rotate_all(&q, &x), &rotate_all(&q, &y));
        prop_assert!((d0 - d1).abs() <= 1e-9);
    }

    #[test]
    fn unit_products_stay_unit_and_canonical(a in any::<u64>(), b in any::<u64>()) {
        let p = random_rotation(&mut derive_rng(a, 0));
        let q = random_rotation(&mut derive_rng(b, 0));
        let r = p.multiply(&q);
        prop_assert!((r.norm() - 1.0).abs() < 1e-12);
        prop_assert!(r.w >= 0.0);
    }

    #[test]
    fn changing_one_joint_moves_only_its_subtree(seed in any::<u64>(), j in 0usize..14) {
        let chain = human();
        let mut rng = derive_rng(seed, 0);
        let sampled = sample_human_pose(&chain, &mut rng).unwrap();
        let mut locals = sampled.local_rotations().to_vec();
        let pose = HumanPose::new(&chain, locals.clone()).unwrap();
        locals[j] = random_rotation(&mut rng);
        let moved = HumanPose::new(&chain, locals).unwrap();
        let (g0, g1) = (forward_kinematics(&chain, &pose).unwrap(), forward_kinematics(&chain, &moved).unwrap());
        for k in 0..chain.len() {
            if !chain.in_subtree(j, k) {
                prop_assert_eq!(g0[k], g1[k]);
            }
        }
    }

    #[test]
    fn robot_joint_change_moves_only_its_subtree(seed in any::<u64>(), j in 0usize..8) {
        let chain = toy();
        let mut rng = derive_rng(seed, 0);
        let pose = sample_robot_pose(&chain, &mut rng).unwrap();
        let mut angles = pose.joint_angles().to_vec();
        angles[j] = sample_robot_pose(&chain, &mut rng).unwrap().joint_angles()[j];
        let moved = RobotPose::new(&chain, angles).unwrap();
        let (g0, g1) = (forward_kinematics(&chain, &pose).unwrap(), forward_kinematics(&chain, &moved).unwrap());
        for k in 0..chain.len() {
            if !chain.in_subtree(j, k) {
                prop_assert_eq!(g0[k], g1[k]);
            }
        }
    }

    #[test]
    fn triplet_loss_bounds(v in proptest::collection::vec(-3.0f64..3.0, 24), alpha in 0.0f64..1.0) {
        let (o, p, n) = (&v[0..8], &v[8..16], &v[16..24]);
        let l = triplet_loss(o, p, n, alpha).unwrap();
        let dp = o.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        prop_assert!(l >= 0.0);
        prop_assert!(l <= dp + alpha + 1e-12);
    }

    #[test]
    fn decoded_poses_respect_limits(z in proptest::collection::vec(-1e3f64..1e3, 8), seed in 0u64..4) {
        let model = RetargetModel::<f32>::new(&human(), &toy(), &ModelArch::default(), seed).unwrap();
        let pose = model.decode_to_robot(&LatentCode::new(z).unwrap()).unwrap();
        for (a, j) in pose.joint_angles().iter().zip(toy().joints()) {
            let (lo, hi) = j.range();
            prop_assert!(*a >= lo && *a <= hi);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bank_bytes_round_trip(count in 1usize..40, seed in any::<u64>(), robot in any::<bool>()) {
        let (chain, domain) = if robot { (toy(), Domain::Robot) } else { (human(), Domain::Human) };
        let bank = build_pose_bank(&chain, domain, count, seed, 1).unwrap();
        let bytes = bank.to_bytes();
        let back = PoseBank::from_bytes(&bytes, Path::new("mem")).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        prop_assert_eq!(back.poses(), bank.poses());
    }

    #[test]
    fn mined_triplets_keep_the_margin(seed in any::<u64>(), delta in 0.01f64..0.5, local in 0.0f64..=1.0) {
        let bh = build_pose_bank(&human(), Domain::Human, 50, seed, 1).unwrap();
        let br = build_pose_bank(&toy(), Domain::Robot, 50, seed ^ 1, 1).unwrap();
        let config = MiningConfig { separation_delta: delta, local_fraction: local, ..MiningConfig::default() };
        let banks = BankPair::new(&bh, &br).unwrap();
        let ts = mine_triplets(banks, 64, &config, &mut derive_rng(seed, 3)).unwrap();
        for t in &ts {
            prop_assert!(t.d_pos + delta <= t.d_neg);
            prop_assert_eq!(t.d_pos, banks.distance(t.anchor, t.positive));
            prop_assert_eq!(t.d_neg, banks.distance(t.anchor, t.negative));
        }
    }

    #[test]
    fn trace_text_round_trip(seed in any::<u64>(), frames in 1usize..20) {
        let chain = human();
        let mut rng = derive_rng(seed, 0);
        let poses: Vec<HumanPose> = (0..frames).map(|_| sample_human_pose(&chain, &mut rng).unwrap()).collect();
        let trace = MotionTrace::from_human(&chain, 30.0, &poses).unwrap();
        let text = trace.to_jsonl();
        let back = MotionTrace::from_jsonl(&text, Path::new("mem")).unwrap();
        prop_assert_eq!(back.to_jsonl(), text);
        prop_assert_eq!(&back.frames, &trace.frames);
    }
}
