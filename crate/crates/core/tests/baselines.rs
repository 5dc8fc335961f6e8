use rand::Rng;
use seqood::baselines::*;
use seqood::numcore::{finite_diff_check, softmax, Tape, Tensor};
use seqood::rng;
use seqood::seqdata::{perturb_symbols, EncodedSequence, MutationSemantics, Origin, PerturbConfig};

const A: usize = 4;

fn small_config(classes: usize) -> ClassifierConfig {
    let mut c = ClassifierConfig::new(classes, A);
    c.filters = 8;
    c.filter_width = 6;
    c.dense = 10;
    c.train.steps = 150;
    c.train.batch_size = 16;
    c.train.optimizer.learning_rate = 1e-2;
    c
}

/// Random background with a class-specific word planted at a random offset.
fn toy_data(n: usize, seed: u64) -> Vec<EncodedSequence> {
    let words: [&[u8]; 2] = [&[0, 1, 2, 3, 0, 1], &[3, 3, 2, 2, 1, 1]];
    let mut r = rng::stream(seed, 0);
    (0..n)
        .map(|i| {
            let label = i % 2;
            let mut s: Vec<u8> = (0..30).map(|_| r.random_range(0..4)).collect();
            let at = r.random_range(0..24);
            s[at..at + 6].copy_from_slice(words[label]);
            EncodedSequence::new(format!("t{i}"), s).with_label(label as u32, Origin::InDistribution)
        })
        .collect()
}

/// A classifier whose logits are exactly `bias`, whatever the input.
fn constant_classifier(bias: Vec<f64>, variant: Variant) -> Classifier {
    let k = match variant {
        Variant::KPlusOne => bias.len() - 1,
        Variant::Binary => 3,
        _ => bias.len(),
    };
    let mut cfg = small_config(k);
    if variant != Variant::Standard {
        cfg = cfg.with_variant(
            variant,
            PerturbConfig::new(0.1, MutationSemantics::FullAlphabet).unwrap(),
        );
    }
    let mut r = rng::stream(1, 0);
    let o = bias.len();
    let params = vec![
        Tensor::xavier_uniform(A * 6, 8, &mut r),
        Tensor::zeros(&[1, 8]),
        Tensor::xavier_uniform(8, 10, &mut r),
        Tensor::zeros(&[1, 10]),
        Tensor::zeros(&[10, o]),
        Tensor::row_vector(bias).unwrap(),
    ];
    Classifier::new(cfg, params, 0, 0).unwrap()
}

#[test]
fn learns_separable_toy_data() {
    let data = toy_data(80, 1);
    let model = train_classifier(&data, &small_config(2), 3).unwrap();
    assert_eq!(model.accuracy(&data).unwrap(), 1.0);
}

#[test]
fn training_is_reproducible_and_round_trips() {
    let data = toy_data(20, 2);
    let mut cfg = small_config(2);
    cfg.train.steps = 10;
    let a = train_classifier(&data, &cfg, 5).unwrap();
    let b = train_classifier(&data, &cfg, 5).unwrap();
    assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clf.ckpt");
    a.save(&path).unwrap();
    let back = Classifier::load(&path).unwrap();
    assert_eq!(back, a);
    assert!(Classifier::from_bytes(&a.to_bytes().unwrap()[..50]).is_err());
}

#[test]
fn tape_forward_matches_inference() {
    let data = toy_data(6, 3);
    let mut cfg = small_config(2);
    cfg.train.steps = 5;
    let model = train_classifier(&data, &cfg, 0).unwrap();
    let mut tape = Tape::new();
    let ids: Vec<_> = model.params().iter().map(|(_, t)| tape.param(t.clone())).collect();
    let refs: Vec<&[u8]> = data.iter().map(|s| s.symbols.as_slice()).collect();
    let logits = forward_tape(&mut tape, &ClassifierNodes::from_slice(&ids), &refs, A, 6).unwrap();
    let z = tape.value(logits).unwrap();
    for (i, s) in refs.iter().enumerate() {
        for (a, b) in z.row(i).iter().zip(model.logits(s).unwrap()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn classifier_gradients_match_finite_differences() {
    let data = toy_data(3, 4);
    let refs: Vec<Vec<u8>> = data.iter().map(|s| s.symbols[..12].to_vec()).collect();
    let mut r = rng::stream(9, 0);
    let params = vec![
        Tensor::xavier_uniform(A * 4, 3, &mut r),
        Tensor::xavier_uniform(1, 3, &mut r),
        Tensor::xavier_uniform(3, 5, &mut r),
        Tensor::xavier_uniform(1, 5, &mut r),
        Tensor::xavier_uniform(5, 2, &mut r),
        Tensor::xavier_uniform(1, 2, &mut r),
    ];
    let err = finite_diff_check(
        |tape: &mut Tape, ids| {
            let batch: Vec<&[u8]> = refs.iter().map(Vec::as_slice).collect();
            let logits = forward_tape(tape, &ClassifierNodes::from_slice(ids), &batch, A, 4)?;
            let t = Tensor::matrix(3, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0])?;
            let l = tape.softmax_xent(logits, t)?;
            tape.sum_all(l)
        },
        &params,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "max relative error {err}");
}

#[test]
fn label_errors() {
    let mut data = toy_data(4, 5);
    data[1].class_label = Some(7);
    assert!(matches!(
        train_classifier(&data, &small_config(2), 0),
        Err(BaselineError::LabelOutOfRange { label: 7, classes: 2 })
    ));
    let cfg = small_config(2).with_variant(
        Variant::Binary,
        PerturbConfig::new(0.1, MutationSemantics::FullAlphabet).unwrap(),
    );
    let mut no_perturb = cfg.clone();
    no_perturb.perturb = None;
    assert!(matches!(no_perturb.validate(), Err(BaselineError::InvalidConfig(_))));
}

#[test]
fn probability_scores_on_fixed_predictives() {
    let seq = [0u8; 20];
    let uniform = constant_classifier(vec![0.0; 10], Variant::Standard);
    assert!((score_max_prob(&uniform, &seq).unwrap() - 0.1).abs() < 1e-15);
    assert!((score_neg_entropy(&uniform, &seq).unwrap() + 10f64.ln()).abs() < 1e-12);
    // Large temperature flattens toward 1/K.
    let peaked = constant_classifier(vec![5.0, 0.0, 0.0], Variant::Standard);
    assert!((score_odin(&peaked, &seq, 1000.0, 0.0).unwrap() - 1.0 / 3.0).abs() < 1e-2);
    assert_eq!(
        score_odin(&peaked, &seq, 1.0, 0.0).unwrap(),
        score_max_prob(&peaked, &seq).unwrap()
    );
    assert!(score_odin(&peaked, &seq, 0.5, 0.0).is_err());

    let two = constant_classifier(vec![0.9f64.ln(), 0.1f64.ln()], Variant::Standard);
    assert!((score_neg_entropy(&two, &seq).unwrap() - (0.9 * 0.9f64.ln() + 0.1 * 0.1f64.ln())).abs() < 1e-12);
    assert!((neg_entropy(&[0.9, 0.1]) + 0.3251).abs() < 1e-4);
    assert_eq!(neg_entropy(&[1.0, 0.0, 0.0]), 0.0);
}

#[test]
fn binary_and_kplus1_scores() {
    let seq = [1u8; 20];
    let b = constant_classifier(vec![0.9f64.ln(), 0.1f64.ln()], Variant::Binary);
    assert!((score_binary_logodds(&b, &seq).unwrap() - 9f64.ln()).abs() < 1e-12);
    let even = constant_classifier(vec![0.3, 0.3], Variant::Binary);
    assert_eq!(score_binary_logodds(&even, &seq).unwrap(), 0.0);

    let k = constant_classifier(vec![0.0; 11], Variant::KPlusOne);
    assert!((score_kplus1(&k, &seq).unwrap() - 1.0 / 11.0).abs() < 1e-15);
    let mut noise = vec![0.0; 11];
    noise[10] = 30.0;
    let k = constant_classifier(noise.clone(), Variant::KPlusOne);
    assert!(score_kplus1(&k, &seq).unwrap() < 1e-12);
    let p = softmax(&noise);
    assert_eq!(
        score_kplus1(&k, &seq).unwrap(),
        p[..10].iter().copied().fold(0.0, f64::max)
    );
    assert!(matches!(score_kplus1(&b, &seq), Err(BaselineError::WrongVariant(_))));
}

#[test]
fn ensemble_scores() {
    let seq = [2u8; 20];
    let m = constant_classifier(vec![1.0, 0.2, -0.5], Variant::Standard);
    assert_eq!(
        ensemble_score(std::slice::from_ref(&m), &seq).unwrap(),
        score_max_prob(&m, &seq).unwrap()
    );
    let left = constant_classifier(vec![60.0, -60.0], Variant::Standard);
    let right = constant_classifier(vec![-60.0, 60.0], Variant::Standard);
    assert!((ensemble_score(&[left, right], &seq).unwrap() - 0.5).abs() < 1e-12);
    assert!(matches!(ensemble_score(&[], &seq), Err(BaselineError::EmptyEnsemble)));
}

#[test]
fn max_prob_matches_independent_softmax() {
    let data = toy_data(10, 6);
    let mut cfg = small_config(2);
    cfg.train.steps = 20;
    let model = train_classifier(&data, &cfg, 1).unwrap();
    for s in &data {
        // Recompute the logits from the raw parameters.
        let p = model.params();
        let (cw, cb, dw, db, ow, ob) = (&p[0].1, &p[1].1, &p[2].1, &p[3].1, &p[4].1, &p[5].1);
        let mut pooled = vec![0.0f64; 8];
        for pos in 0..=s.symbols.len() - 6 {
            for f in 0..8 {
                let mut z = cb.data()[f];
                for j in 0..6 {
                    z += cw.get2(j * A + s.symbols[pos + j] as usize, f);
                }
                pooled[f] = pooled[f].max(z);
            }
        }
        let hidden: Vec<f64> = (0..10)
            .map(|h| (db.data()[h] + (0..8).map(|f| pooled[f] * dw.get2(f, h)).sum::<f64>()).max(0.0))
            .collect();
        let logits: Vec<f64> = (0..2)
            .map(|o| ob.data()[o] + (0..10).map(|h| hidden[h] * ow.get2(h, o)).sum::<f64>())
            .collect();
        let mx = logits.iter().map(|z| (z - logits[0].max(logits[1])).exp()).sum::<f64>();
        let expected = 1.0 / mx;
        assert!((score_max_prob(&model, &s.symbols).unwrap() - expected).abs() < 1e-12);
    }
}

#[test]
fn calibrated_variant_is_less_confident_on_perturbed_inputs() {
    let data = toy_data(80, 7);
    let p = PerturbConfig::new(0.5, MutationSemantics::FullAlphabet).unwrap();
    let plain = train_classifier(&data, &small_config(2), 2).unwrap();
    let cal = train_classifier(
        &data,
        &small_config(2).with_variant(Variant::Calibrated { uniform_weight: 1.0 }, p),
        2,
    )
    .unwrap();
    let mut r = rng::stream(42, 0);
    let perturbed: Vec<Vec<u8>> = data
        .iter()
        .map(|s| perturb_symbols(&s.symbols, A, &p, &mut r))
        .collect();
    let mean_entropy = |m: &Classifier| {
        perturbed.iter().map(|s| -score_neg_entropy(m, s).unwrap()).sum::<f64>() / perturbed.len() as f64
    };
    assert!(mean_entropy(&cal) > mean_entropy(&plain));
}

#[test]
fn mahalanobis_hand_case() {
    let feats = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0], vec![2.0, 4.0]];
    let fit = MahalanobisFit::from_features(&feats, &[0, 0, 1, 1], 2, Regularization(0.0)).unwrap();
    // Pooled covariance [[1, .5], [.5, .5]], inverse [[2, -2], [-2, 4]].
    assert_eq!(fit.covariance, vec![1.0, 0.5, 0.5, 0.5]);
    assert!((fit.score_features(&[1.0, 1.0]) + 4.0).abs() < 1e-12);
    assert_eq!(fit.score_features(&[1.0, 3.0]), 0.0);
}

#[test]
fn mahalanobis_identity_covariance_is_euclidean() {
    // Class deviations chosen so the pooled covariance is the identity.
    let feats = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![5.0, 1.0], vec![5.0, -1.0]];
    let fit = MahalanobisFit::from_features(&feats, &[0, 0, 1, 1], 2, Regularization(0.0)).unwrap();
    assert_eq!(fit.covariance, vec![0.5, 0.0, 0.0, 0.5]);
    let q = [2.0, 1.0];
    // Squared Euclidean distances 5 and 10, scaled by the inverse variance 2.
    assert!((fit.score_features(&q) + 2.0 * 5.0).abs() < 1e-12);
}

#[test]
fn mahalanobis_rotation_invariance() {
    let mut r = rng::stream(3, 0);
    let dim = 4;
    let feats: Vec<Vec<f64>> = (0..40)
        .map(|_| (0..dim).map(|_| r.random_range(-2.0..2.0)).collect())
        .collect();
    let labels: Vec<usize> = (0..40).map(|i| i % 3).collect();
    // Random orthogonal matrix by Gram-Schmidt.
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
        for u in &q {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= d * ui;
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        q.push(v.iter().map(|x| x / n).collect());
    }
    let rot = |f: &[f64]| -> Vec<f64> {
        q.iter()
            .map(|row| row.iter().zip(f).map(|(a, b)| a * b).sum())
            .collect()
    };
    let rotated: Vec<Vec<f64>> = feats.iter().map(|f| rot(f)).collect();
    let a = MahalanobisFit::from_features(&feats, &labels, 3, Regularization::default()).unwrap();
    let b = MahalanobisFit::from_features(&rotated, &labels, 3, Regularization::default()).unwrap();
    for _ in 0..20 {
        let x: Vec<f64> = (0..dim).map(|_| r.random_range(-3.0..3.0)).collect();
        assert!((a.score_features(&x) - b.score_features(&rot(&x))).abs() < 1e-8);
    }
}

#[test]
fn mahalanobis_needs_two_per_class() {
    let feats = vec![vec![0.0], vec![1.0], vec![2.0]];
    assert!(MahalanobisFit::from_features(&feats, &[0, 0, 1], 2, Regularization::default()).is_err());
}

#[test]
fn ensemble_training_is_parallel_safe() {
    let data = toy_data(20, 8);
    let mut cfg = small_config(2);
    cfg.train.steps = 5;
    let members = train_ensemble(&data, &cfg, &[1, 2, 3]).unwrap();
    let again = train_ensemble(&data, &cfg, &[1, 2, 3]).unwrap();
    assert_eq!(members, again);
    assert_ne!(members[0].fingerprint(), members[1].fingerprint());
}
