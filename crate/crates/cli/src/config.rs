//! Run configuration (JSON, `schema_version` 1).

use std::path::{Path, PathBuf};

use seqood::baselines::Variant;
use seqood::genmodel::{ARConfig, TrainConfig};
use seqood::llr::{SweepGrid, DEFAULT_SIM_RATE};
use seqood::metrics::{is_known_method, ReportOptions};
use seqood::seqdata::{Alphabet, MutationSemantics, PerturbConfig, SplitCounts, SyntheticSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub dataset: DatasetSource,
    pub foreground: ARConfig,
    #[serde(default)]
    pub background: BackgroundSettings,
    #[serde(default)]
    pub classifier: ClassifierSettings,
    /// Members trained for `ensemble<N>`; the largest requested N is used.
    #[serde(default)]
    pub waic_members: Option<usize>,
    #[serde(default)]
    pub odin: OdinSettings,
    #[serde(default)]
    pub covariates: CovariateSettings,
    pub methods: Vec<String>,
    #[serde(default)]
    pub report: ReportOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Fully specified synthetic benchmark.
    Synthetic(SyntheticSpec),
    /// The built-in GC-confounded benchmark.
    GcConfounded {
        n_in: usize,
        n_val_ood: usize,
        n_test_ood: usize,
        seq_len: usize,
        counts: SplitCounts,
        motif_seed: u64,
    },
    /// Fragments sampled from FASTA genomes, one file per class.
    Fasta(FastaSource),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FastaSource {
    #[serde(default = "default_alphabet")]
    pub alphabet: Alphabet,
    #[serde(default = "default_fragment_len")]
    pub fragment_len: usize,
    pub counts: SplitCounts,
    pub in_distribution: Vec<FastaClass>,
    pub val_ood: Vec<FastaClass>,
    pub test_ood: Vec<FastaClass>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FastaClass {
    pub name: String,
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
}

fn default_alphabet() -> Alphabet {
    Alphabet::dna()
}

fn default_fragment_len() -> usize {
    250
}

/// How the background hyperparameters are chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    Fixed,
    /// Use the `sweep` stage's choice (real validation OOD data).
    Sweep,
    /// Use the `tune-sim` stage's choice (mutated validation data).
    TuneSim,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundSettings {
    pub mutation_rate: f64,
    pub l2: f64,
    pub selection: Selection,
    pub grid: SweepGrid,
    pub sim_rate: f64,
    /// Overrides the foreground's training settings for background models.
    pub train: Option<TrainConfig>,
}

impl Default for BackgroundSettings {
    fn default() -> Self {
        Self {
            mutation_rate: 0.1,
            l2: 1e-4,
            selection: Selection::Fixed,
            grid: SweepGrid::default(),
            sim_rate: DEFAULT_SIM_RATE,
            train: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSettings {
    pub filters: usize,
    pub filter_width: usize,
    pub dense: usize,
    pub train: TrainConfig,
    /// Mutation used to build perturbed inputs for the binary, K+1 and
    /// calibrated variants.
    pub perturb: PerturbConfig,
    pub uniform_weight: f64,
    pub mahalanobis_reg: f64,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        Self {
            filters: 64,
            filter_width: 12,
            dense: 128,
            train: TrainConfig {
                steps: 1000,
                ..TrainConfig::default()
            },
            perturb: PerturbConfig {
                mutation_rate: 0.1,
                semantics: MutationSemantics::FullAlphabet,
                seed: 0,
            },
            uniform_weight: 1.0,
            mahalanobis_reg: 1e-6,
        }
    }
}

impl ClassifierSettings {
    pub fn config(
        &self,
        num_classes: usize,
        alphabet_size: usize,
        variant: Variant,
    ) -> seqood::baselines::ClassifierConfig {
        seqood::baselines::ClassifierConfig {
            num_classes,
            alphabet_size,
            filters: self.filters,
            filter_width: self.filter_width,
            dense: self.dense,
            variant,
            train: self.train.clone(),
            perturb: variant.uses_perturbation().then_some(self.perturb),
        }
    }
}

/// ODIN grid, selected by validation AUROC.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdinSettings {
    pub temperatures: Vec<f64>,
    pub epsilons: Vec<f64>,
}

impl Default for OdinSettings {
    fn default() -> Self {
        Self {
            temperatures: vec![1.0, 5.0, 10.0, 100.0, 1000.0],
            epsilons: vec![0.0, 1e-4, 1e-3, 1e-2, 1e-1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovariateSettings {
    /// Attach each sequence's GC fraction (DNA alphabets only).
    pub gc_content: bool,
    /// Attach the d2S distance to the nearest of this many training
    /// sequences; 0 disables.
    pub d2s_references: usize,
    pub d2s_k: usize,
    pub d2s_order: usize,
}

impl Default for CovariateSettings {
    fn default() -> Self {
        Self {
            gc_content: true,
            d2s_references: 0,
            d2s_k: seqood::seqdata::d2s::DEFAULT_K,
            d2s_order: seqood::seqdata::d2s::DEFAULT_ORDER,
        }
    }
}

impl RunConfig {
    /// Reads a config and resolves relative FASTA paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let DatasetSource::Fasta(src) = &mut cfg.dataset {
            let base = path.parent().unwrap_or(Path::new("."));
            for c in src
                .in_distribution
                .iter_mut()
                .chain(&mut src.val_ood)
                .chain(&mut src.test_ood)
            {
                if c.path.is_relative() {
                    c.path = base.join(&c.path);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.foreground.perturb.is_some() {
            return Err(CliError::Config(
                "foreground model must not have a perturbation config".into(),
            ));
        }
        self.foreground
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.background
            .grid
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.background.mutation_rate > 0.0 && self.background.mutation_rate <= 1.0) {
            return Err(CliError::Config("background mutation_rate must lie in (0, 1]".into()));
        }
        if !(self.background.sim_rate > 0.0 && self.background.sim_rate <= 1.0) {
            return Err(CliError::Config("background sim_rate must lie in (0, 1]".into()));
        }
        if self.methods.is_empty() {
            return Err(CliError::Config("no methods requested".into()));
        }
        for m in &self.methods {
            if !is_known_method(m) {
                return Err(CliError::Config(format!("unknown method {m:?}")));
            }
            if m == "waic" && self.waic_members.is_none_or(|n| n < 2) {
                return Err(CliError::Config("waic needs waic_members >= 2".into()));
            }
            if m.strip_prefix("ensemble")
                .is_some_and(|n| n.parse::<usize>().is_ok_and(|n| n == 0))
            {
                return Err(CliError::Config("ensemble size must be positive".into()));
            }
        }
        if self.odin.temperatures.is_empty() || self.odin.epsilons.is_empty() {
            return Err(CliError::Config("ODIN grid must be non-empty".into()));
        }
        if let DatasetSource::Fasta(src) = &self.dataset {
            let mut seen = std::collections::BTreeSet::new();
            for c in src.in_distribution.iter().chain(&src.val_ood).chain(&src.test_ood) {
                if !seen.insert(&c.name) {
                    return Err(CliError::Config(format!("class {:?} listed more than once", c.name)));
                }
            }
            if src.in_distribution.is_empty() {
                return Err(CliError::Config("no in-distribution FASTA classes".into()));
            }
        }
        Ok(())
    }

    pub fn alphabet(&self) -> Alphabet {
        match &self.dataset {
            DatasetSource::Fasta(src) => src.alphabet.clone(),
            _ => Alphabet::dna(),
        }
    }

    /// Largest ensemble size among the requested methods.
    pub fn max_ensemble(&self) -> usize {
        self.methods
            .iter()
            .filter_map(|m| m.strip_prefix("ensemble").and_then(|n| n.parse().ok()))
            .max()
            .unwrap_or(0)
    }

    pub fn wants(&self, method: &str) -> bool {
        self.methods.iter().any(|m| m == method)
    }

    /// Stable SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}
