use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::curves::{auprc, auroc, fpr_at_tpr, pearson, pr_points, roc_points, CurvePoint};
use super::MetricError;
use crate::rng;
use crate::seqdata::Origin;

/// One scored input; larger scores mean more in-distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    pub origin: Origin,
    pub method: String,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gc_content: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_label: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_d2s: Option<f64>,
}

impl ScoreRecord {
    pub fn new(id: impl Into<String>, origin: Origin, method: impl Into<String>, score: f64) -> Self {
        Self {
            id: id.into(),
            origin,
            method: method.into(),
            score,
            gc_content: None,
            class_label: None,
            min_d2s: None,
        }
    }
}

const FIXED_METHODS: [&str; 10] = [
    "maxprob",
    "entropy",
    "odin",
    "mahalanobis",
    "binary",
    "kplus1",
    "calibrated",
    "likelihood",
    "llr",
    "waic",
];

/// Whether `name` is a recognised detector; ensembles are `ensemble<N>`.
pub fn is_known_method(name: &str) -> bool {
    FIXED_METHODS.contains(&name)
        || name
            .strip_prefix("ensemble")
            .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub auroc: f64,
    pub auprc: f64,
    pub fpr80: f64,
    pub n_in: usize,
    pub n_ood: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub method: String,
    pub covariate: String,
    pub pcc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub method: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistRow {
    pub method: String,
    pub origin: Origin,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDistanceRow {
    pub method: String,
    pub class_label: u32,
    /// Mean over the class's inputs of the distance to the nearest
    /// in-distribution reference.
    pub min_d2s: f64,
    pub auroc: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub methods: Vec<MethodRow>,
    pub correlations: Vec<CorrelationRow>,
    pub roc_points: Vec<CurveRow>,
    pub pr_points: Vec<CurveRow>,
    pub hist_bins: Vec<HistRow>,
    pub class_distance: Vec<ClassDistanceRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportOptions {
    /// Subsample the larger of in/OOD to the smaller count, with this seed.
    pub equal_count_seed: Option<u64>,
    pub hist_bins: usize,
    pub tpr_target: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            equal_count_seed: None,
            hist_bins: 30,
            tpr_target: 0.8,
        }
    }
}

/// Per-OOD-class AUROC (that class against every in-distribution score)
/// paired with the class's distance, plus their correlation.
pub fn per_class_auroc_vs_distance(records: &[ScoreRecord]) -> Result<(Vec<ClassDistanceRow>, f64), MetricError> {
    let in_scores: Vec<f64> = records
        .iter()
        .filter(|r| r.origin == Origin::InDistribution)
        .map(|r| r.score)
        .collect();
    let mut by_class: BTreeMap<u32, Vec<&ScoreRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.origin == Origin::Ood) {
        let label = r
            .class_label
            .ok_or_else(|| MetricError::MissingCovariate(r.id.clone(), "class_label"))?;
        by_class.entry(label).or_default().push(r);
    }
    if by_class.len() < 2 {
        return Err(MetricError::TooFewClasses(by_class.len()));
    }
    let method = records.first().map(|r| r.method.clone()).unwrap_or_default();
    let mut rows = Vec::with_capacity(by_class.len());
    for (label, recs) in by_class {
        let mut dist = 0.0;
        for r in &recs {
            dist += r
                .min_d2s
                .ok_or_else(|| MetricError::MissingCovariate(r.id.clone(), "min_d2s"))?;
        }
        let scores: Vec<f64> = recs.iter().map(|r| r.score).collect();
        rows.push(ClassDistanceRow {
            method: method.clone(),
            class_label: label,
            min_d2s: dist / recs.len() as f64,
            auroc: auroc(&in_scores, &scores)?,
            n: recs.len(),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.min_d2s).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.auroc).collect();
    let pcc = pearson(&xs, &ys)?;
    Ok((rows, pcc))
}

fn subsample<'a>(recs: Vec<&'a ScoreRecord>, keep: usize, seed: u64, stream: u64) -> Vec<&'a ScoreRecord> {
    if recs.len() <= keep {
        return recs;
    }
    let mut r = rng::stream(seed, stream);
    let mut idx = sample(&mut r, recs.len(), keep).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| recs[i]).collect()
}

fn histogram(method: &str, ins: &[f64], oods: &[f64], bins: usize) -> Vec<HistRow> {
    let bins = bins.max(1);
    let lo = ins.iter().chain(oods).copied().fold(f64::INFINITY, f64::min);
    let hi = ins.iter().chain(oods).copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut rows = Vec::with_capacity(2 * bins);
    for (origin, xs) in [(Origin::InDistribution, ins), (Origin::Ood, oods)] {
        let mut counts = vec![0usize; bins];
        for &x in xs {
            let b = if width > 0.0 {
                (((x - lo) / width) as usize).min(bins - 1)
            } else {
                0
            };
            counts[b] += 1;
        }
        for (b, count) in counts.into_iter().enumerate() {
            rows.push(HistRow {
                method: method.to_string(),
                origin,
                lo: lo + b as f64 * width,
                hi: if b + 1 == bins { hi } else { lo + (b + 1) as f64 * width },
                count,
            });
        }
    }
    rows
}

/// Groups records by method (in first-appearance order) and evaluates each.
pub fn build_report(records: &[ScoreRecord], opts: &ReportOptions) -> Result<EvalReport, MetricError> {
    let mut order: Vec<&str> = Vec::new();
    let mut grouped: BTreeMap<&str, Vec<&ScoreRecord>> = BTreeMap::new();
    for r in records {
        if !is_known_method(&r.method) {
            return Err(MetricError::UnknownMethod(r.method.clone()));
        }
        if r.origin == Origin::Unknown {
            return Err(MetricError::Unlabeled(r.id.clone()));
        }
        if !r.score.is_finite() {
            return Err(MetricError::NonFinite);
        }
        let entry = grouped.entry(&r.method).or_default();
        if entry.is_empty() {
            order.push(&r.method);
        }
        entry.push(r);
    }
    let mut report = EvalReport {
        methods: Vec::new(),
        correlations: Vec::new(),
        roc_points: Vec::new(),
        pr_points: Vec::new(),
        hist_bins: Vec::new(),
        class_distance: Vec::new(),
    };
    for (mi, method) in order.into_iter().enumerate() {
        let recs = &grouped[method];
        let mut ins: Vec<&ScoreRecord> = recs
            .iter()
            .copied()
            .filter(|r| r.origin == Origin::InDistribution)
            .collect();
        let mut oods: Vec<&ScoreRecord> = recs.iter().copied().filter(|r| r.origin == Origin::Ood).collect();
        if let Some(seed) = opts.equal_count_seed {
            let keep = ins.len().min(oods.len());
            ins = subsample(ins, keep, seed, 2 * mi as u64);
            oods = subsample(oods, keep, seed, 2 * mi as u64 + 1);
        }
        let in_s: Vec<f64> = ins.iter().map(|r| r.score).collect();
        let ood_s: Vec<f64> = oods.iter().map(|r| r.score).collect();
        report.methods.push(MethodRow {
            method: method.to_string(),
            auroc: auroc(&in_s, &ood_s)?,
            auprc: auprc(&in_s, &ood_s)?,
            fpr80: fpr_at_tpr(&in_s, &ood_s, opts.tpr_target)?,
            n_in: in_s.len(),
            n_ood: ood_s.len(),
        });
        let tag = |pts: Vec<CurvePoint>| {
            pts.into_iter().map(|p| CurveRow {
                method: method.to_string(),
                x: p.x,
                y: p.y,
            })
        };
        report.roc_points.extend(tag(roc_points(&in_s, &ood_s)?));
        report.pr_points.extend(tag(pr_points(&in_s, &ood_s)?));
        report
            .hist_bins
            .extend(histogram(method, &in_s, &ood_s, opts.hist_bins));

        let used: Vec<&ScoreRecord> = ins.iter().chain(&oods).copied().collect();
        if used.iter().all(|r| r.gc_content.is_some()) {
            let xs: Vec<f64> = used.iter().map(|r| r.score).collect();
            let gc: Vec<f64> = used.iter().filter_map(|r| r.gc_content).collect();
            if let Ok(pcc) = pearson(&xs, &gc) {
                report.correlations.push(CorrelationRow {
                    method: method.to_string(),
                    covariate: "gc_content".into(),
                    pcc,
                });
            }
        }
        let ood_ready = oods.iter().all(|r| r.class_label.is_some() && r.min_d2s.is_some());
        if ood_ready {
            let owned: Vec<ScoreRecord> = used.iter().map(|r| (*r).clone()).collect();
            if let Ok((rows, pcc)) = per_class_auroc_vs_distance(&owned) {
                report.class_distance.extend(rows);
                report.correlations.push(CorrelationRow {
                    method: method.to_string(),
                    covariate: "min_d2s_class_auroc".into(),
                    pcc,
                });
            }
        }
    }
    Ok(report)
}

/// Mean and standard error of one metric across independent runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanStderr {
    /// Standard error uses the unbiased sample variance; a single run has stderr 0.
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let stderr = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        };
        Self { mean, stderr }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub runs: usize,
    pub auroc: MeanStderr,
    pub auprc: MeanStderr,
    pub fpr80: MeanStderr,
}

/// Aggregates the method rows of several runs (e.g. seeds).
pub fn summarize_runs(reports: &[EvalReport]) -> Result<Vec<SummaryRow>, MetricError> {
    let first = reports.first().ok_or(MetricError::Empty("reports"))?;
    first
        .methods
        .iter()
        .map(|row| {
            let rows: Vec<&MethodRow> = reports
                .iter()
                .map(|r| {
                    r.methods
                        .iter()
                        .find(|m| m.method == row.method)
                        .ok_or_else(|| MetricError::MissingMethod(row.method.clone()))
                })
                .collect::<Result<_, _>>()?;
            let pick = |f: fn(&MethodRow) -> f64| MeanStderr::of(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            Ok(SummaryRow {
                method: row.method.clone(),
                runs: rows.len(),
                auroc: pick(|r| r.auroc),
                auprc: pick(|r| r.auprc),
                fpr80: pick(|r| r.fpr80),
            })
        })
        .collect()
}

#[derive(Serialize)]
struct MetricsCsvRow<'a> {
    method: &'a str,
    auroc: f64,
    auprc: f64,
    fpr80: f64,
    n_in: usize,
    n_ood: usize,
    mean: f64,
    stderr: f64,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), MetricError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

impl EvalReport {
    /// Writes `report.json` and the flat CSV tables into `dir`. With
    /// `summary`, the `mean`/`stderr` columns carry the across-run AUROC;
    /// otherwise they repeat this run's AUROC with zero error.
    pub fn write_dir(&self, dir: &Path, summary: Option<&[SummaryRow]>) -> Result<(), MetricError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), serde_json::to_vec_pretty(self)?)?;
        write_csv(
            &dir.join("metrics.csv"),
            self.methods.iter().map(|m| {
                let agg = summary
                    .and_then(|s| s.iter().find(|r| r.method == m.method))
                    .map(|r| r.auroc)
                    .unwrap_or(MeanStderr {
                        mean: m.auroc,
                        stderr: 0.0,
                    });
                MetricsCsvRow {
                    method: &m.method,
                    auroc: m.auroc,
                    auprc: m.auprc,
                    fpr80: m.fpr80,
                    n_in: m.n_in,
                    n_ood: m.n_ood,
                    mean: agg.mean,
                    stderr: agg.stderr,
                }
            }),
        )?;
        write_csv(&dir.join("roc_points.csv"), &self.roc_points)?;
        write_csv(&dir.join("pr_points.csv"), &self.pr_points)?;
        write_csv(&dir.join("hist_bins.csv"), &self.hist_bins)?;
        write_csv(&dir.join("class_distance_auroc.csv"), &self.class_distance)?;
        Ok(())
    }
}
