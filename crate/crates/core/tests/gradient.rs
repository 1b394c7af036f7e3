use retarget_core::data::build_pose_bank;
use retarget_core::nn::finite_diff_check;
use retarget_core::rng::derive_rng;
use retarget_core::train::trainer::sample_batch;
use retarget_core::train::*;
use retarget_core::{Domain, KinematicChain};

const H: f64 = 1e-4;
const TOL: f64 = 1e-4;

fn small_setup() -> (retarget_core::data::PoseBank, retarget_core::data::PoseBank) {
    let h = KinematicChain::builtin("human-upper-14").unwrap();
    let r = KinematicChain::builtin("toy-robot-8").unwrap();
    (build_pose_bank(&h, Domain::Human, 64, 11, 1).unwrap(), build_pose_bank(&r, Domain::Robot, 64, 12, 1).unwrap())
}

/// First (model, batch) pair, in seed order, whose loss sits well away
/// from every kink.
fn kink_free_case(
    banks: BankPair<'_>,
    weights: &LossWeights,
) -> (RetargetModel<f64>, TrainBatch<f64>) {
    let arch = ModelArch { hidden: vec![16], latent_dim: 4 };
    let config = TrainConfig { batch: 6, ..TrainConfig::default() };
    for seed in 0..500u64 {
        let model = RetargetModel::<f64>::new(banks.human.chain(), banks.robot.chain(), &arch, seed).unwrap();
        let batch = sample_batch::<f64>(banks, &config, &mut derive_rng(seed, 99)).unwrap();
        if kink_margin(&batch, &model, weights).unwrap() > 1e-2 {
            return (model, batch);
        }
    }
    panic!("no kink-free test point found");
}

#[test]
fn reduced_model_gradient_matches_central_differences() {
    let (bh, br) = small_setup();
    let banks = BankPair::new(&bh, &br).unwrap();
    let weights = LossWeights::default();
    let (model, batch) = kink_free_case(banks, &weights);
    assert_eq!(model.encoder_r.layer_dims(), vec![8, 16, 4]);
    let (_, grads) = total_loss(&batch, &model, &weights, true).unwrap();
    let analytic = grads.unwrap().flat();
    let loss = |m: &RetargetModel<f64>| total_loss(&batch, m, &weights, false).unwrap().0.total;
    let report = finite_diff_check(&model, loss, &analytic, H, TOL);
    assert!(report.pass, "{report:?}");
    assert_eq!(report.checked, analytic.len());
}

#[test]
fn each_term_alone_matches_central_differences() {
    let (bh, br) = small_setup();
    let banks = BankPair::new(&bh, &br).unwrap();
    let alpha = 0.05;
    for w in [
        LossWeights { alpha, triplet: 1.0, rec: 0.0, ltc: 0.0 },
        LossWeights { alpha, triplet: 0.0, rec: 1.0, ltc: 0.0 },
        LossWeights { alpha, triplet: 0.0, rec: 0.0, ltc: 1.0 },
    ] {
        let (model, batch) = kink_free_case(banks, &LossWeights::default());
        let analytic = total_loss(&batch, &model, &w, true).unwrap().1.unwrap().flat();
        let loss = |m: &RetargetModel<f64>| total_loss(&batch, m, &w, false).unwrap().0.total;
        let report = finite_diff_check(&model, loss, &analytic, H, TOL);
        assert!(report.pass, "{w:?}: {report:?}");
    }
}

#[test]
fn without_triplet_term_human_encoder_sees_only_consistency_gradient() {
    let (bh, br) = small_setup();
    let banks = BankPair::new(&bh, &br).unwrap();
    let (model, batch) = kink_free_case(banks, &LossWeights::default());
    let no_triplet = LossWeights { triplet: 0.0, ..LossWeights::default() };
    let ltc_only = LossWeights { triplet: 0.0, rec: 0.0, ..LossWeights::default() };
    let a = total_loss(&batch, &model, &no_triplet, true).unwrap().1.unwrap();
    let b = total_loss(&batch, &model, &ltc_only, true).unwrap().1.unwrap();
    let (ga, gb) = (a.encoder_h.flat(), b.encoder_h.flat());
    assert!(ga.iter().any(|v| *v != 0.0));
    for (x, y) in ga.iter().zip(&gb) {
        assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{x} vs {y}");
    }
    let none = LossWeights { triplet: 0.0, rec: 0.0, ltc: 0.0, ..LossWeights::default() };
    let z = total_loss(&batch, &model, &none, true).unwrap().1.unwrap();
    assert!(z.flat().iter().all(|v| *v == 0.0));
}
