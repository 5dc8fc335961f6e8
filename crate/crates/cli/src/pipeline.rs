//! Pipeline stages. Paths are relative to the run's output directory:
//!
//! | stage       | writes                                                          |
//! |-------------|-----------------------------------------------------------------|
//! | `synth`     | `data/manifest.jsonl`, `data/motif_masks.jsonl`                 |
//! | `ingest`    | `data/manifest.jsonl`, `data/classes.json`                      |
//! | `train`     | `models/foreground.ckpt`, `models/foreground.log.jsonl`, `models/waic_NN.ckpt` |
//! | `sweep`     | `sweep/sweep.csv`, `sweep/selection.json`, `sweep/cells/*.ckpt` |
//! | `tune-sim`  | the same under `tune_sim/`                                      |
//! | `train-bg`  | `models/background.ckpt`                                        |
//! | `train-clf` | `models/clf_NN.ckpt`, `models/clf_{binary,kplus1,calibrated}.ckpt` |
//! | `score`     | `scores/scores.jsonl`, `scores/odin.json`                       |
//! | `eval`      | `report/`                                                       |
//!
//! Every file gets a `.provenance.json` sidecar.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use seqood::baselines::{
    ensemble_score, score_all, score_binary_logodds, score_kplus1, score_max_prob, score_neg_entropy,
    score_odin_features, train_classifier, Classifier, ClassifierConfig, MahalanobisFit, Regularization, Variant,
};
use seqood::genmodel::{log_likelihoods, train_ar, train_ar_logged, ARConfig, Checkpoint, TrainLog};
use seqood::llr::{select, simulated_ood, train_backgrounds, waic_scores, LlrScorer, SweepResult};
use seqood::metrics::{auroc, build_report, summarize_runs, EvalReport, ScoreRecord, SummaryRow};
use seqood::rng;
use seqood::seqdata::{
    fragment, gc_fraction, min_distance_to_set, parse_fasta, synth_generate, DatasetSplit, EncodedSequence, MotifSpan,
    Origin, PerturbConfig, SplitName, SyntheticSpec,
};
use serde::{Deserialize, Serialize};

use crate::config::{DatasetSource, RunConfig, Selection};
use crate::provenance;
use crate::CliError;

pub const MANIFEST: &str = "data/manifest.jsonl";
pub const MOTIF_MASKS: &str = "data/motif_masks.jsonl";
pub const CLASSES: &str = "data/classes.json";
pub const FOREGROUND: &str = "models/foreground.ckpt";
pub const FOREGROUND_LOG: &str = "models/foreground.log.jsonl";
pub const BACKGROUND: &str = "models/background.ckpt";
pub const SCORES: &str = "scores/scores.jsonl";
pub const ODIN_SELECTION: &str = "scores/odin.json";
pub const REPORT_DIR: &str = "report";
pub const SWEEP_DIR: &str = "sweep";
pub const TUNE_SIM_DIR: &str = "tune_sim";
pub const REPORT_FILES: [&str; 6] = [
    "report.json",
    "metrics.csv",
    "roc_points.csv",
    "pr_points.csv",
    "hist_bins.csv",
    "class_distance_auroc.csv",
];

const CLASSIFIER_METHODS: [&str; 4] = ["maxprob", "entropy", "odin", "mahalanobis"];

/// Seed of the fixed-hyperparameter background model.
pub fn background_seed(seed: u64) -> u64 {
    rng::derive(seed, 50)
}

pub fn waic_seed(seed: u64, member: usize) -> u64 {
    rng::derive(seed, 100 + member as u64)
}

/// Seed of standard classifier `member`; member 0 backs the single-model
/// classifier scores.
pub fn classifier_seed(seed: u64, member: usize) -> u64 {
    rng::derive(seed, 1000 + member as u64)
}

fn variant_seed(seed: u64, variant: usize) -> u64 {
    rng::derive(seed, 2000 + variant as u64)
}

fn member_path(prefix: &str, i: usize) -> String {
    format!("models/{prefix}_{i:02}.ckpt")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskRecord {
    pub id: String,
    pub spans: Vec<MotifSpan>,
    /// One character per position: `1` inside a planted motif.
    pub mask: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCsvRow {
    pub mu: f64,
    pub lambda: f64,
    pub val_auroc: f64,
    pub checkpoint_path: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selected {
    pub index: usize,
    pub mu: f64,
    pub lambda: f64,
    pub val_auroc: f64,
    pub checkpoint_path: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdinChoice {
    pub temperature: f64,
    pub epsilon: f64,
    pub val_auroc: f64,
}

/// A configured run rooted at `config.out_dir`.
pub struct Run {
    pub config: RunConfig,
    hash: String,
}

impl Run {
    pub fn new(config: RunConfig) -> Self {
        let hash = config.hash();
        Self { config, hash }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.config.out_dir.join(rel)
    }

    fn seed(&self) -> u64 {
        self.config.seed
    }

    fn write(&self, rel: &str, bytes: &[u8], stage: &str) -> Result<(), CliError> {
        let path = self.path(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, bytes)?;
        provenance::record(&path, stage, self.seed(), &self.hash)
    }

    fn write_jsonl<T: Serialize>(
        &self,
        rel: &str,
        rows: impl IntoIterator<Item = T>,
        stage: &str,
    ) -> Result<(), CliError> {
        let mut out = Vec::new();
        for r in rows {
            serde_json::to_writer(&mut out, &r)?;
            out.push(b'\n');
        }
        self.write(rel, &out, stage)
    }

    fn save_density(&self, rel: &str, model: &Checkpoint, stage: &str) -> Result<(), CliError> {
        self.write(rel, &model.to_bytes()?, stage)
    }

    fn save_classifier(&self, rel: &str, model: &Classifier, stage: &str) -> Result<(), CliError> {
        self.write(rel, &model.to_bytes()?, stage)
    }

    fn require(&self, rel: &str, producer: &str) -> Result<PathBuf, CliError> {
        let path = self.path(rel);
        if path.exists() {
            Ok(path)
        } else {
            Err(CliError::Data(format!(
                "missing {}; run `{producer}` first",
                path.display()
            )))
        }
    }

    pub fn load_split(&self) -> Result<DatasetSplit, CliError> {
        let path = self.require(MANIFEST, "synth` or `ingest")?;
        let split = DatasetSplit::read_manifest(BufReader::new(fs::File::open(path)?), &self.config.alphabet())?;
        if split.train.is_empty() {
            return Err(CliError::Data("manifest has no training sequences".into()));
        }
        Ok(split)
    }

    fn load_density(&self, rel: &str, producer: &str) -> Result<Checkpoint, CliError> {
        let model = Checkpoint::load(&self.require(rel, producer)?)?;
        if model.config.alphabet_size != self.config.alphabet().size() {
            return Err(CliError::Data(format!(
                "{rel} expects an alphabet of {} symbols, the run uses {}",
                model.config.alphabet_size,
                self.config.alphabet().size()
            )));
        }
        Ok(model)
    }

    fn load_classifier(&self, rel: &str) -> Result<Classifier, CliError> {
        Ok(Classifier::load(&self.require(rel, "train-clf")?)?)
    }

    // ---- data ----

    fn write_manifest(&self, split: &DatasetSplit, stage: &str) -> Result<(), CliError> {
        let mut out = Vec::new();
        split.write_manifest(&mut out, &self.config.alphabet())?;
        self.write(MANIFEST, &out, stage)
    }

    pub fn synth(&self) -> Result<(), CliError> {
        let spec = match &self.config.dataset {
            DatasetSource::Synthetic(spec) => spec.clone(),
            DatasetSource::GcConfounded {
                n_in,
                n_val_ood,
                n_test_ood,
                seq_len,
                counts,
                motif_seed,
            } => SyntheticSpec::gc_confounded(*n_in, *n_val_ood, *n_test_ood, *seq_len, *counts, *motif_seed),
            DatasetSource::Fasta(_) => return Err(CliError::Config("dataset is FASTA; use `ingest`".into())),
        };
        let data = synth_generate(&spec, self.seed())?;
        self.write_manifest(&data.split, "synth")?;
        let masks = SplitName::ALL
            .iter()
            .flat_map(|&n| data.split.part(n))
            .map(|s| MaskRecord {
                id: s.id.clone(),
                spans: data.motif_spans.get(&s.id).cloned().unwrap_or_default(),
                mask: data.motif_mask(s).iter().map(|&m| if m { '1' } else { '0' }).collect(),
            });
        self.write_jsonl(MOTIF_MASKS, masks, "synth")
    }

    pub fn ingest(&self) -> Result<(), CliError> {
        let DatasetSource::Fasta(src) = &self.config.dataset else {
            return Err(CliError::Config("dataset is synthetic; use `synth`".into()));
        };
        let c = src.counts;
        let groups = [
            (
                &src.in_distribution,
                Origin::InDistribution,
                vec![
                    (SplitName::Train, c.train),
                    (SplitName::ValIn, c.val),
                    (SplitName::TestIn, c.test),
                ],
            ),
            (&src.val_ood, Origin::Ood, vec![(SplitName::ValOod, c.val)]),
            (&src.test_ood, Origin::Ood, vec![(SplitName::TestOod, c.test)]),
        ];
        let mut split = DatasetSplit::default();
        let mut names = Vec::new();
        for (classes, origin, parts) in groups {
            for class in classes {
                let label = names.len() as u32;
                let genome = read_genome(&class.path)?;
                let total = parts.iter().map(|p| p.1).sum();
                let mut r = rng::stream(rng::derive(self.seed(), label as u64), 4);
                let frags = fragment(&genome, &src.alphabet, src.fragment_len, total, &class.name, &mut r)?;
                // Fragments come sorted by start, so each split takes a
                // contiguous stretch of the genome.
                let mut frags = frags.into_iter();
                for &(part, n) in &parts {
                    for f in frags.by_ref().take(n) {
                        split.part_mut(part).push(f.with_label(label, origin));
                    }
                }
                names.push(class.name.clone());
            }
        }
        split.validate()?;
        self.write_manifest(&split, "ingest")?;
        self.write(CLASSES, &serde_json::to_vec_pretty(&names)?, "ingest")
    }

    // ---- density models ----

    pub fn train(&self) -> Result<Checkpoint, CliError> {
        let split = self.load_split()?;
        let val = (!split.val_in.is_empty()).then_some(split.val_in.as_slice());
        let mut log: Vec<TrainLog> = Vec::new();
        let fg = train_ar_logged(&split.train, val, &self.config.foreground, self.seed(), |l| {
            log.push(l.clone())
        })?;
        self.save_density(FOREGROUND, &fg, "train")?;
        self.write_jsonl(FOREGROUND_LOG, &log, "train")?;
        if self.config.wants("waic") {
            let n = self.config.waic_members.unwrap_or(0);
            let members = (0..n)
                .into_par_iter()
                .map(|i| train_ar(&split.train, &self.config.foreground, waic_seed(self.seed(), i)))
                .collect::<Result<Vec<_>, _>>()?;
            for (i, m) in members.iter().enumerate() {
                self.save_density(&member_path("waic", i), m, "train")?;
            }
        }
        Ok(fg)
    }

    /// Foreground config with the background training override applied.
    pub fn background_base(&self) -> ARConfig {
        let mut base = self.config.foreground.clone();
        if let Some(t) = &self.config.background.train {
            base.train = t.clone();
        }
        base
    }

    fn grid_stage(&self, dir: &str, stage: &str, val_ood: &[EncodedSequence]) -> Result<SweepResult, CliError> {
        let split = self.load_split()?;
        let fg = self.load_density(FOREGROUND, "train")?;
        let grid = &self.config.background.grid;
        let cells = train_backgrounds(&split.train, grid, &self.background_base(), self.seed())?;
        let result = select(&fg, &cells, &split.val_in, val_ood)?;
        let mut csv_out = csv::Writer::from_writer(Vec::new());
        for (i, (cell, row)) in cells.iter().zip(&result.rows).enumerate() {
            let rel = format!("{dir}/cells/cell_{i:02}.ckpt");
            self.save_density(&rel, &cell.background, stage)?;
            csv_out.serialize(SweepCsvRow {
                mu: row.mu,
                lambda: row.lambda,
                val_auroc: row.val_auroc,
                checkpoint_path: rel,
            })?;
        }
        let bytes = csv_out.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
        self.write(&format!("{dir}/sweep.csv"), &bytes, stage)?;
        let best = result.selected_row();
        let selected = Selected {
            index: result.selected,
            mu: best.mu,
            lambda: best.lambda,
            val_auroc: best.val_auroc,
            checkpoint_path: format!("{dir}/cells/cell_{:02}.ckpt", result.selected),
        };
        self.write(
            &format!("{dir}/selection.json"),
            &serde_json::to_vec_pretty(&selected)?,
            stage,
        )?;
        Ok(result)
    }

    /// Grid search scored against the real validation OOD classes.
    pub fn sweep(&self) -> Result<SweepResult, CliError> {
        let split = self.load_split()?;
        if split.val_ood.is_empty() {
            return Err(CliError::Data("sweep needs validation OOD sequences".into()));
        }
        self.grid_stage(SWEEP_DIR, "sweep", &split.val_ood)
    }

    /// Grid search scored against mutated in-distribution validation data.
    pub fn tune_sim(&self) -> Result<SweepResult, CliError> {
        let split = self.load_split()?;
        let sim = self.simulated_val_ood(&split)?;
        self.grid_stage(TUNE_SIM_DIR, "tune-sim", &sim)
    }

    fn simulated_val_ood(&self, split: &DatasetSplit) -> Result<Vec<EncodedSequence>, CliError> {
        let bg = &self.config.background;
        Ok(simulated_ood(
            &split.val_in,
            self.config.alphabet().size(),
            bg.sim_rate,
            bg.grid.semantics,
            self.seed(),
        )?)
    }

    pub fn read_selection(&self, dir: &str, producer: &str) -> Result<Selected, CliError> {
        let path = self.require(&format!("{dir}/selection.json"), producer)?;
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    pub fn train_bg(&self) -> Result<Checkpoint, CliError> {
        let bg = &self.config.background;
        let model = match bg.selection {
            Selection::Fixed => {
                let split = self.load_split()?;
                let perturb = PerturbConfig {
                    mutation_rate: bg.mutation_rate,
                    semantics: bg.grid.semantics,
                    seed: 0,
                };
                let cfg = self.background_base().as_background(perturb, bg.l2);
                train_ar(&split.train, &cfg, background_seed(self.seed()))?
            }
            Selection::Sweep => {
                let s = self.read_selection(SWEEP_DIR, "sweep")?;
                self.load_density(&s.checkpoint_path, "sweep")?
            }
            Selection::TuneSim => {
                let s = self.read_selection(TUNE_SIM_DIR, "tune-sim")?;
                self.load_density(&s.checkpoint_path, "tune-sim")?
            }
        };
        self.save_density(BACKGROUND, &model, "train-bg")?;
        Ok(model)
    }

    // ---- classifiers ----

    fn num_classes(split: &DatasetSplit) -> Result<usize, CliError> {
        let mut max = None;
        for s in &split.train {
            let label = s
                .class_label
                .ok_or_else(|| CliError::Data(format!("training sequence {} has no class", s.id)))?;
            max = max.max(Some(label));
        }
        Ok(max.map_or(0, |m| m as usize + 1))
    }

    fn standard_members(&self) -> usize {
        let single = CLASSIFIER_METHODS.iter().any(|m| self.config.wants(m));
        self.config.max_ensemble().max(single as usize)
    }

    fn variants(&self) -> Vec<(&'static str, Variant)> {
        let w = self.config.classifier.uniform_weight;
        [
            ("binary", Variant::Binary),
            ("kplus1", Variant::KPlusOne),
            ("calibrated", Variant::Calibrated { uniform_weight: w }),
        ]
        .into_iter()
        .filter(|(name, _)| self.config.wants(name))
        .collect()
    }

    pub fn train_clf(&self) -> Result<(), CliError> {
        let split = self.load_split()?;
        let k = Self::num_classes(&split)?;
        let a = self.config.alphabet().size();
        let settings = &self.config.classifier;
        let mut jobs: Vec<(String, ClassifierConfig, u64)> = (0..self.standard_members())
            .map(|i| {
                (
                    member_path("clf", i),
                    settings.config(k, a, Variant::Standard),
                    classifier_seed(self.seed(), i),
                )
            })
            .collect();
        for (j, (name, variant)) in self.variants().into_iter().enumerate() {
            jobs.push((
                format!("models/clf_{name}.ckpt"),
                settings.config(k, a, variant),
                variant_seed(self.seed(), j),
            ));
        }
        let models = jobs
            .par_iter()
            .map(|(_, cfg, seed)| train_classifier(&split.train, cfg, *seed))
            .collect::<Result<Vec<_>, _>>()?;
        for ((rel, _, _), m) in jobs.iter().zip(&models) {
            self.save_classifier(rel, m, "train-clf")?;
        }
        Ok(())
    }

    // ---- scoring ----

    pub fn score(&self) -> Result<Vec<ScoreRecord>, CliError> {
        let split = self.load_split()?;
        let test: Vec<&EncodedSequence> = split.test_in.iter().chain(&split.test_ood).collect();
        if split.test_in.is_empty() || split.test_ood.is_empty() {
            return Err(CliError::Data(
                "test split needs both in-distribution and OOD sequences".into(),
            ));
        }
        let seqs: Vec<&[u8]> = test.iter().map(|s| s.symbols.as_slice()).collect();
        let cov = &self.config.covariates;
        let alphabet = self.config.alphabet();
        let gc: Option<Vec<f64>> =
            (cov.gc_content && alphabet.is_dna()).then(|| seqs.iter().map(|s| gc_fraction(s)).collect());
        let d2s = match cov.d2s_references {
            0 => None,
            n => {
                let refs = spread_sample(&split.train, n);
                let d: Result<Vec<f64>, _> = seqs
                    .par_iter()
                    .map(|s| min_distance_to_set(s, &refs, alphabet.size(), cov.d2s_k, cov.d2s_order))
                    .collect();
                Some(d?)
            }
        };

        let mut records = Vec::new();
        let mut odin = None;
        for method in &self.config.methods {
            let scores = self.method_scores(method, &split, &seqs, &mut odin)?;
            for (i, (s, score)) in test.iter().zip(scores).enumerate() {
                let mut r = ScoreRecord::new(s.id.clone(), s.origin, method.clone(), score);
                r.class_label = s.class_label;
                r.gc_content = gc.as_ref().map(|g| g[i]);
                r.min_d2s = d2s.as_ref().map(|d| d[i]);
                records.push(r);
            }
        }
        self.write_jsonl(SCORES, &records, "score")?;
        if let Some(choice) = odin {
            self.write(ODIN_SELECTION, &serde_json::to_vec_pretty(&choice)?, "score")?;
        }
        Ok(records)
    }

    fn members(&self, n: usize) -> Result<Vec<Classifier>, CliError> {
        (0..n).map(|i| self.load_classifier(&member_path("clf", i))).collect()
    }

    fn method_scores(
        &self,
        method: &str,
        split: &DatasetSplit,
        seqs: &[&[u8]],
        odin: &mut Option<OdinChoice>,
    ) -> Result<Vec<f64>, CliError> {
        Ok(match method {
            "likelihood" => log_likelihoods(&self.load_density(FOREGROUND, "train")?, seqs)?,
            "llr" => {
                let fg = self.load_density(FOREGROUND, "train")?;
                let bg = self.load_density(BACKGROUND, "train-bg")?;
                LlrScorer::new(fg, bg)?.llr_scores(seqs)?
            }
            "waic" => {
                let n = self.config.waic_members.unwrap_or(0);
                let members = (0..n)
                    .map(|i| self.load_density(&member_path("waic", i), "train"))
                    .collect::<Result<Vec<_>, _>>()?;
                waic_scores(&members, seqs)?
            }
            "maxprob" => {
                let m = self.load_classifier(&member_path("clf", 0))?;
                score_all(seqs, |s| score_max_prob(&m, s))?
            }
            "entropy" => {
                let m = self.load_classifier(&member_path("clf", 0))?;
                score_all(seqs, |s| score_neg_entropy(&m, s))?
            }
            "odin" => {
                let m = self.load_classifier(&member_path("clf", 0))?;
                let choice = self.select_odin(&m, split)?;
                let feats = features(&m, seqs)?;
                let scores = feats
                    .par_iter()
                    .map(|f| score_odin_features(&m, f, choice.temperature, choice.epsilon))
                    .collect::<Result<Vec<_>, _>>()?;
                *odin = Some(choice);
                scores
            }
            "mahalanobis" => {
                let m = self.load_classifier(&member_path("clf", 0))?;
                let fit =
                    MahalanobisFit::fit(&m, &split.train, Regularization(self.config.classifier.mahalanobis_reg))?;
                features(&m, seqs)?.iter().map(|f| fit.score_features(f)).collect()
            }
            "binary" => {
                let m = self.load_classifier("models/clf_binary.ckpt")?;
                score_all(seqs, |s| score_binary_logodds(&m, s))?
            }
            "kplus1" => {
                let m = self.load_classifier("models/clf_kplus1.ckpt")?;
                score_all(seqs, |s| score_kplus1(&m, s))?
            }
            "calibrated" => {
                let m = self.load_classifier("models/clf_calibrated.ckpt")?;
                score_all(seqs, |s| score_max_prob(&m, s))?
            }
            other => match other.strip_prefix("ensemble").and_then(|n| n.parse::<usize>().ok()) {
                Some(n) => {
                    let members = self.members(n)?;
                    score_all(seqs, |s| ensemble_score(&members, s))?
                }
                None => return Err(CliError::Config(format!("unknown method {other:?}"))),
            },
        })
    }

    /// Picks `(T, epsilon)` by validation AUROC; ties keep the earlier grid
    /// entry. Without validation OOD data, mutated validation sequences
    /// stand in.
    fn select_odin(&self, model: &Classifier, split: &DatasetSplit) -> Result<OdinChoice, CliError> {
        let sim;
        let val_ood = if split.val_ood.is_empty() {
            sim = self.simulated_val_ood(split)?;
            &sim
        } else {
            &split.val_ood
        };
        let fin = features(
            model,
            &split.val_in.iter().map(|s| s.symbols.as_slice()).collect::<Vec<_>>(),
        )?;
        let fout = features(model, &val_ood.iter().map(|s| s.symbols.as_slice()).collect::<Vec<_>>())?;
        let mut best: Option<OdinChoice> = None;
        for &t in &self.config.odin.temperatures {
            for &e in &self.config.odin.epsilons {
                let score = |fs: &[Vec<f64>]| -> Result<Vec<f64>, CliError> {
                    fs.par_iter()
                        .map(|f| score_odin_features(model, f, t, e).map_err(CliError::from))
                        .collect()
                };
                let a = auroc(&score(&fin)?, &score(&fout)?)?;
                if best.as_ref().is_none_or(|b| a > b.val_auroc) {
                    best = Some(OdinChoice {
                        temperature: t,
                        epsilon: e,
                        val_auroc: a,
                    });
                }
            }
        }
        best.ok_or_else(|| CliError::Config("ODIN grid is empty".into()))
    }

    // ---- evaluation ----

    pub fn read_scores(&self) -> Result<Vec<ScoreRecord>, CliError> {
        read_scores(&self.require(SCORES, "score")?)
    }

    /// Rebuilds the report from the score file alone.
    pub fn eval(&self) -> Result<EvalReport, CliError> {
        let records: Vec<ScoreRecord> = self
            .read_scores()?
            .into_iter()
            .filter(|r| self.config.wants(&r.method))
            .collect();
        let report = build_report(&records, &self.config.report)?;
        self.write_report(&self.path(REPORT_DIR), &report, None, "eval")?;
        Ok(report)
    }

    fn write_report(
        &self,
        dir: &Path,
        report: &EvalReport,
        summary: Option<&[SummaryRow]>,
        stage: &str,
    ) -> Result<(), CliError> {
        report.write_dir(dir, summary)?;
        for f in REPORT_FILES {
            provenance::record(&dir.join(f), stage, self.seed(), &self.hash)?;
        }
        Ok(())
    }

    /// Aggregates the score files of several run directories (e.g. seeds)
    /// into mean and standard error per method, written to `out`.
    pub fn report(&self, runs: &[PathBuf], out: &Path) -> Result<Vec<SummaryRow>, CliError> {
        let runs: Vec<PathBuf> = if runs.is_empty() {
            vec![self.config.out_dir.clone()]
        } else {
            runs.to_vec()
        };
        let reports = runs
            .iter()
            .map(|dir| {
                let records: Vec<ScoreRecord> = read_scores(&dir.join(SCORES))?
                    .into_iter()
                    .filter(|r| self.config.wants(&r.method))
                    .collect();
                Ok(build_report(&records, &self.config.report)?)
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let summary = summarize_runs(&reports)?;
        self.write_report(out, &reports[0], Some(&summary), "report")?;
        let path = out.join("summary.json");
        fs::write(&path, serde_json::to_vec_pretty(&summary)?)?;
        provenance::record(&path, "report", self.seed(), &self.hash)?;
        Ok(summary)
    }

    /// Every stage the config needs, in order.
    pub fn run_all(&self) -> Result<EvalReport, CliError> {
        match self.config.dataset {
            DatasetSource::Fasta(_) => self.ingest()?,
            _ => self.synth()?,
        }
        self.train()?;
        if self.config.wants("llr") {
            match self.config.background.selection {
                Selection::Fixed => {}
                Selection::Sweep => {
                    self.sweep()?;
                }
                Selection::TuneSim => {
                    self.tune_sim()?;
                }
            }
            self.train_bg()?;
        }
        if self.standard_members() > 0 || !self.variants().is_empty() {
            self.train_clf()?;
        }
        self.score()?;
        self.eval()
    }
}

fn features(model: &Classifier, seqs: &[&[u8]]) -> Result<Vec<Vec<f64>>, CliError> {
    Ok(seqs
        .par_iter()
        .map(|s| model.features(s))
        .collect::<Result<Vec<_>, _>>()?)
}

/// `n` sequences at evenly spaced indices, so every class is represented.
fn spread_sample(seqs: &[EncodedSequence], n: usize) -> Vec<&[u8]> {
    let n = n.min(seqs.len());
    (0..n).map(|i| seqs[i * seqs.len() / n].symbols.as_slice()).collect()
}

/// All records of a FASTA file joined by a separator outside every
/// alphabet, so no fragment spans two records.
fn read_genome(path: &Path) -> Result<Vec<u8>, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let records = parse_fasta(BufReader::new(file))?;
    let mut genome = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if i > 0 {
            genome.push(0);
        }
        genome.extend_from_slice(r.sequence.as_bytes());
    }
    Ok(genome)
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRecord>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Data(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}
