use seqood::genmodel::{log_likelihoods, train_ar, ARConfig, Checkpoint, DensityModel, ModelError};
use seqood::llr::*;
use seqood::numcore::Tensor;
use seqood::seqdata::{
    synth_generate, ClassRole, ClassSpec, EncodedSequence, MutationSemantics, Origin, PerturbConfig, SplitCounts,
    SyntheticSpec,
};

fn table_model(rows: Vec<f64>, perturb: Option<PerturbConfig>) -> Checkpoint {
    let mut cfg = ARConfig::ngram(1, 4);
    cfg.perturb = perturb;
    Checkpoint::new(cfg, vec![("probs".into(), Tensor::matrix(4, 4, rows).unwrap())], 0, 0).unwrap()
}

fn bg_perturb() -> Option<PerturbConfig> {
    Some(PerturbConfig::new(0.1, MutationSemantics::FullAlphabet).unwrap())
}

/// Per-position log-probs fixed by construction.
struct Fixed(Vec<f64>);

impl DensityModel for Fixed {
    fn alphabet_size(&self) -> usize {
        4
    }
    fn per_position_log_prob(&self, seq: &[u8]) -> Result<Vec<f64>, ModelError> {
        self.check_alphabet(seq)?;
        Ok(self.0[..seq.len()].to_vec())
    }
}

/// Adds `shift` to the first position of another model's track.
struct Shifted<'a>(&'a Checkpoint, f64);

impl DensityModel for Shifted<'_> {
    fn alphabet_size(&self) -> usize {
        4
    }
    fn per_position_log_prob(&self, seq: &[u8]) -> Result<Vec<f64>, ModelError> {
        let mut lp = self.0.per_position_log_prob(seq)?;
        lp[0] += self.1;
        Ok(lp)
    }
}

#[test]
fn hand_built_tables() {
    // Foreground: after A, C has probability 0.7. Background: after A, C has 0.4.
    let mut fg = vec![0.25; 16];
    fg[..4].copy_from_slice(&[0.1, 0.7, 0.1, 0.1]);
    let mut bg = vec![0.25; 16];
    bg[..4].copy_from_slice(&[0.2, 0.4, 0.2, 0.2]);
    let s = LlrScorer::new(table_model(fg, None), table_model(bg, bg_perturb())).unwrap();
    // "AC": first position uniform under both, then ln 0.7 - ln 0.4.
    let track = s.per_position_llr(&[0, 1]).unwrap();
    assert_eq!(track[0], 0.0);
    assert!((track[1] - (0.7f64.ln() - 0.4f64.ln())).abs() < 1e-15);
    assert!((s.llr_score(&[0, 1]).unwrap() - track.iter().sum::<f64>()).abs() < 1e-9);
}

#[test]
fn identical_models_give_zero() {
    let data = vec![EncodedSequence::new("a", vec![0, 1, 2, 3, 3, 1, 0, 2])];
    let mut cfg = ARConfig::ngram(2, 4);
    cfg.perturb = bg_perturb();
    let m = train_ar(&data, &cfg, 1).unwrap();
    let s = LlrScorer::from_models(m.clone(), m).unwrap();
    assert_eq!(s.llr_score(&[3, 2, 1, 0, 0]).unwrap(), 0.0);
    assert!(s.per_position_llr(&[3, 2, 1, 0, 0]).unwrap().iter().all(|&x| x == 0.0));
}

#[test]
fn certain_foreground_against_uniform() {
    let s = LlrScorer::from_models(Fixed(vec![0.0; 8]), Fixed(vec![0.25f64.ln(); 8])).unwrap();
    for v in s.per_position_llr(&[0, 3, 2, 1, 1]).unwrap() {
        assert_eq!(v, 4f64.ln());
    }
}

#[test]
fn score_is_exact_difference_of_likelihoods() {
    let data: Vec<EncodedSequence> = (0..10)
        .map(|i| EncodedSequence::new(format!("s{i}"), (0..40).map(|j| ((i * j + j / 3) % 4) as u8).collect()))
        .collect();
    let mut cfg = ARConfig::lstm(6, 4);
    cfg.train.steps = 10;
    let fg = train_ar(&data, &cfg, 1).unwrap();
    let bg = train_ar(&data, &cfg.as_background(bg_perturb().unwrap(), 1e-4), 2).unwrap();
    let s = LlrScorer::new(fg.clone(), bg.clone()).unwrap();
    let seqs: Vec<&[u8]> = data.iter().map(|d| d.symbols.as_slice()).collect();
    let batch = s.llr_scores(&seqs).unwrap();
    for (x, b) in seqs.iter().zip(&batch) {
        let direct = fg.log_likelihood(x).unwrap() - bg.log_likelihood(x).unwrap();
        assert_eq!(s.llr_score(x).unwrap(), direct);
        assert_eq!(*b, direct);
        let sum: f64 = s.per_position_llr(x).unwrap().iter().sum();
        assert!((sum - direct).abs() < 1e-9);
    }
}

#[test]
fn ranking_survives_a_shared_constant_shift() {
    let data: Vec<EncodedSequence> = (0..20)
        .map(|i| EncodedSequence::new(format!("s{i}"), (0..30).map(|j| ((i + j * j) % 4) as u8).collect()))
        .collect();
    let fg = train_ar(&data, &ARConfig::ngram(2, 4), 0).unwrap();
    let mut bg_cfg = ARConfig::ngram(2, 4);
    bg_cfg.perturb = bg_perturb();
    bg_cfg.train.steps = 3;
    let bg = train_ar(&data, &bg_cfg, 0).unwrap();
    let seqs: Vec<&[u8]> = data.iter().map(|d| d.symbols.as_slice()).collect();
    let plain = LlrScorer::from_models(&fg, &bg).unwrap().llr_scores(&seqs).unwrap();
    let shifted = LlrScorer::from_models(Shifted(&fg, 17.5), Shifted(&bg, 17.5))
        .unwrap()
        .llr_scores(&seqs)
        .unwrap();
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
        idx
    };
    assert_eq!(rank(&plain), rank(&shifted));
}

#[test]
fn scorer_rejects_mismatched_pairs() {
    let fg = table_model(vec![0.25; 16], None);
    assert!(matches!(
        LlrScorer::new(fg.clone(), fg.clone()),
        Err(LlrError::Incompatible(_))
    ));
    let data = vec![EncodedSequence::new("a", vec![0, 1, 2, 3])];
    let mut lstm = ARConfig::lstm(3, 4);
    lstm.train.steps = 0;
    let bg = train_ar(&data, &lstm.as_background(bg_perturb().unwrap(), 0.0), 0).unwrap();
    assert!(matches!(LlrScorer::new(fg.clone(), bg), Err(LlrError::Incompatible(_))));
    let mut five = ARConfig::ngram(1, 5);
    five.perturb = bg_perturb();
    let bg5 = train_ar(&[EncodedSequence::new("b", vec![4, 0])], &five, 0).unwrap();
    assert!(matches!(
        LlrScorer::new(fg.clone(), bg5),
        Err(LlrError::Incompatible(_))
    ));
    let s = LlrScorer::new(fg, table_model(vec![0.25; 16], bg_perturb())).unwrap();
    assert!(matches!(
        s.llr_score(&[0, 7]),
        Err(LlrError::Model(ModelError::AlphabetMismatch { .. }))
    ));
}

fn small_benchmark() -> seqood::seqdata::SyntheticDataset {
    let class = |label, name: &str, role, gc, motifs: &[&str]| ClassSpec {
        label,
        name: name.into(),
        role,
        gc,
        motifs: motifs.iter().map(|m| m.to_string()).collect(),
        planting_rate: 1.0,
    };
    let spec = SyntheticSpec {
        seq_len: 120,
        counts: SplitCounts {
            train: 300,
            val: 60,
            test: 60,
        },
        classes: vec![
            class(
                0,
                "in0",
                ClassRole::InDistribution,
                0.5,
                &["ACGTTGCAACGT", "GGATCCTTAGGC"],
            ),
            class(
                1,
                "in1",
                ClassRole::InDistribution,
                0.55,
                &["TTTACGGACCAT", "CAGTCAGTGGCA"],
            ),
            class(2, "valood", ClassRole::ValOod, 0.6, &["GATTACAGATTA", "CCCGGGAAATTT"]),
            class(3, "testood", ClassRole::TestOod, 0.6, &["AGAGTCTCAGAG", "TGCATGCATGCC"]),
        ],
    };
    synth_generate(&spec, 5).unwrap()
}

#[test]
fn motif_positions_carry_the_ratio() {
    let data = small_benchmark();
    let train = &data.split.train;
    let fg = train_ar(train, &ARConfig::ngram(6, 4), 0).unwrap();
    let mut bg_cfg = ARConfig::ngram(6, 4);
    bg_cfg.perturb = Some(PerturbConfig::new(0.2, MutationSemantics::FullAlphabet).unwrap());
    let bg = train_ar(train, &bg_cfg, 0).unwrap();
    let s = LlrScorer::new(fg, bg).unwrap();
    let (mut inside, mut n_in, mut outside, mut n_out) = (0.0, 0usize, 0.0, 0usize);
    for seq in &data.split.test_in {
        let mask = data.motif_mask(seq);
        for (v, m) in s.per_position_llr(&seq.symbols).unwrap().into_iter().zip(mask) {
            if m {
                inside += v;
                n_in += 1;
            } else {
                outside += v;
                n_out += 1;
            }
        }
    }
    assert!(inside / n_in as f64 > outside / n_out as f64);
}

#[test]
fn waic_matches_recomputation() {
    let data = small_benchmark();
    let train = &data.split.train;
    let models: Vec<Checkpoint> = (0..5)
        .map(|seed| {
            let mut cfg = ARConfig::ngram(3, 4);
            cfg.perturb = Some(PerturbConfig::new(0.05, MutationSemantics::FullAlphabet).unwrap());
            train_ar(train, &cfg, seed).unwrap()
        })
        .collect();
    let seqs: Vec<&[u8]> = data
        .split
        .test_in
        .iter()
        .take(10)
        .map(|s| s.symbols.as_slice())
        .collect();
    let stored: Vec<Vec<f64>> = models.iter().map(|m| log_likelihoods(m, &seqs).unwrap()).collect();
    let scores = waic_scores(&models, &seqs).unwrap();
    for (i, s) in scores.iter().enumerate() {
        let vals: Vec<f64> = stored.iter().map(|v| v[i]).collect();
        let mean = vals.iter().sum::<f64>() / 5.0;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 5.0;
        assert!((s - (mean - var)).abs() < 1e-9);
        assert_eq!(*s, waic_score(&models, seqs[i]).unwrap());
    }
    assert!(matches!(
        waic_score(&models[..1], seqs[0]),
        Err(LlrError::InvalidArgument(_))
    ));
}

#[test]
fn sweep_table_and_selection() {
    let data = small_benchmark();
    let split = &data.split;
    let base = ARConfig::ngram(4, 4);
    let grid = SweepGrid {
        mutation_rates: vec![0.05, 0.2],
        l2: vec![0.0, 1e-4, 1e-3],
        ..SweepGrid::default()
    };
    let run = sweep(&split.train, &grid, &split.val_in, &split.val_ood, &base, 9).unwrap();
    assert_eq!(run.result.rows.len(), 6);
    let best = run.result.rows.iter().map(|r| r.val_auroc).fold(f64::MIN, f64::max);
    let sel = run.result.selected_row();
    assert_eq!(sel.val_auroc, best);
    assert!(run.scorer().is_ok());

    // Equal backgrounds tie on every cell; the smallest mu, then lambda, wins.
    let bg = run.cells[0].background.clone();
    let cells: Vec<GridCell> = [(0.2, 0.0), (0.05, 1e-3), (0.05, 1e-4), (0.1, 0.0)]
        .into_iter()
        .map(|(mu, lambda)| GridCell {
            mu,
            lambda,
            background: bg.clone(),
        })
        .collect();
    let tied = select(&run.foreground, &cells, &split.val_in, &split.val_ood).unwrap();
    assert_eq!(tied.selected, 2);

    let single = SweepGrid {
        mutation_rates: vec![0.1],
        l2: vec![1e-4],
        ..SweepGrid::default()
    };
    let one = sweep(&split.train, &single, &split.val_in, &split.val_ood, &base, 9).unwrap();
    assert_eq!((one.result.rows.len(), one.result.selected), (1, 0));

    assert!(matches!(
        sweep(&split.train, &grid, &[], &split.val_ood, &base, 9),
        Err(LlrError::Empty(_))
    ));
}

#[test]
fn simulated_tuning_uses_mutated_validation() {
    let data = small_benchmark();
    let split = &data.split;
    let sim = simulated_ood(&split.val_in, 4, DEFAULT_SIM_RATE, MutationSemantics::FullAlphabet, 3).unwrap();
    assert_eq!(sim.len(), split.val_in.len());
    assert!(sim.iter().all(|s| s.origin == Origin::Ood));
    assert!(sim.iter().zip(&split.val_in).any(|(a, b)| a.symbols != b.symbols));
    assert!(matches!(
        simulated_ood_tune(
            &split.train,
            &split.val_in,
            0.0,
            &SweepGrid::default(),
            &ARConfig::ngram(3, 4),
            0
        ),
        Err(LlrError::InvalidArgument(_))
    ));
    let grid = SweepGrid {
        mutation_rates: vec![0.05, 0.2],
        l2: vec![0.0],
        ..SweepGrid::default()
    };
    let run = simulated_ood_tune(&split.train, &split.val_in, 0.1, &grid, &ARConfig::ngram(4, 4), 1).unwrap();
    assert_eq!(run.result.rows.len(), 2);
}

#[test]
fn sweep_is_deterministic() {
    let data = small_benchmark();
    let split = &data.split;
    let grid = SweepGrid {
        mutation_rates: vec![0.05, 0.1, 0.2],
        l2: vec![0.0],
        ..SweepGrid::default()
    };
    let a = sweep(
        &split.train,
        &grid,
        &split.val_in,
        &split.val_ood,
        &ARConfig::ngram(3, 4),
        2,
    )
    .unwrap();
    let b = sweep(
        &split.train,
        &grid,
        &split.val_in,
        &split.val_ood,
        &ARConfig::ngram(3, 4),
        2,
    )
    .unwrap();
    for (x, y) in a.cells.iter().zip(&b.cells) {
        assert_eq!(x.background.fingerprint(), y.background.fingerprint());
    }
}
