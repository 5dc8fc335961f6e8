use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use seqood::genmodel::ModelError;
use seqood::llr::SweepGrid;
use seqood::seqdata::{DatasetSplit, Origin, SplitName};
use seqood_cli::config::DatasetSource;
use seqood_cli::pipeline::{self, Run};
use seqood_cli::provenance;
use seqood_cli::{CliError, RunConfig};
use serde_json::{json, Value};

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn tiny_json(out: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(bundled("tiny.json")).unwrap()).unwrap();
    v["out_dir"] = json!(out);
    v
}

fn write_config(dir: &Path, v: &Value) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_vec_pretty(v).unwrap()).unwrap();
    path
}

fn seqood(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_seqood")).args(args).output().unwrap()
}

fn run_for(v: &Value, dir: &Path) -> Run {
    Run::new(RunConfig::load(&write_config(dir, v)).unwrap())
}

#[test]
fn bundled_configs_load() {
    let bench = RunConfig::load(&bundled("benchmark.json")).unwrap();
    assert_eq!(bench.background.grid, SweepGrid::default());
    assert_eq!(bench.background.grid.mutation_rates, vec![0.01, 0.05, 0.1, 0.2]);
    assert_eq!(bench.background.grid.l2, vec![0.0, 1e-6, 1e-5, 1e-4, 1e-3]);
    match bench.dataset {
        DatasetSource::GcConfounded {
            n_in,
            n_test_ood,
            seq_len,
            counts,
            ..
        } => {
            assert_eq!((n_in, n_test_ood, seq_len), (10, 6, 250));
            assert_eq!(counts.train + counts.val + counts.test, 2000);
        }
        _ => panic!("benchmark should use the GC-confounded generator"),
    }
    RunConfig::load(&bundled("tiny.json")).unwrap();
}

#[test]
fn synth_is_reproducible_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let read = |run: &Run| {
        (
            fs::read(run.path(pipeline::MANIFEST)).unwrap(),
            fs::read(run.path(pipeline::MOTIF_MASKS)).unwrap(),
        )
    };
    let a = run_for(&tiny_json(&tmp.path().join("a")), tmp.path());
    a.synth().unwrap();
    let first = read(&a);
    a.synth().unwrap();
    assert_eq!(read(&a), first);

    let mut v = tiny_json(&tmp.path().join("b"));
    v["seed"] = json!(8);
    let b = run_for(&v, tmp.path());
    b.synth().unwrap();
    assert_ne!(read(&b).0, first.0);

    // 3 in-distribution classes × (60 + 30 + 30), 2 + 2 OOD classes × 30.
    let split = a.load_split().unwrap();
    let sizes: Vec<usize> = SplitName::ALL.iter().map(|&n| split.part(n).len()).collect();
    assert_eq!(sizes, vec![180, 90, 60, 90, 60]);
    let masks = fs::read_to_string(a.path(pipeline::MOTIF_MASKS)).unwrap();
    assert_eq!(masks.lines().count(), 480);
    let first_mask: pipeline::MaskRecord = serde_json::from_str(masks.lines().next().unwrap()).unwrap();
    assert_eq!(first_mask.mask.len(), 100);
    assert_eq!(
        first_mask.mask.bytes().filter(|&b| b == b'1').count(),
        first_mask.spans.iter().map(|s| s.len).sum::<usize>()
    );
}

fn fasta_config(dir: &Path, fragment_len: Option<usize>) -> Value {
    fs::write(
        dir.join("in.fa"),
        ">chr1\nACGTACGGTTACGATCGATCGGCTAGCTAGCTTACG\n>chr2\nGGCATCGATCGNNACGTAGCTAGCTAGCATCGACTAGC\n",
    )
    .unwrap();
    fs::write(
        dir.join("ood.fa"),
        ">x\nATATATATTTATAAATATATTATATAAATTATATATAATATATTTA\n",
    )
    .unwrap();
    let mut src = json!({
        "counts": { "train": 3, "val": 1, "test": 2 },
        "in_distribution": [{ "name": "in", "path": "in.fa" }],
        "val_ood": [],
        "test_ood": [{ "name": "ood", "path": "ood.fa" }]
    });
    if let Some(len) = fragment_len {
        src["fragment_len"] = json!(len);
    }
    let mut v = tiny_json(&dir.join("out"));
    v["dataset"] = json!({ "fasta": src });
    v["methods"] = json!(["likelihood"]);
    v
}

#[test]
fn ingest_fragments_fasta_classes() {
    let tmp = tempfile::tempdir().unwrap();
    let run = run_for(&fasta_config(tmp.path(), Some(12)), tmp.path());
    run.ingest().unwrap();
    let split = run.load_split().unwrap();
    assert_eq!(split.train.len(), 3);
    assert_eq!(split.test_in.len(), 2);
    assert_eq!(split.test_ood.len(), 2);
    assert!(split
        .train
        .iter()
        .chain(&split.test_in)
        .all(|s| s.origin == Origin::InDistribution && s.class_label == Some(0)));
    assert!(split
        .test_ood
        .iter()
        .all(|s| s.origin == Origin::Ood && s.class_label == Some(1)));
    assert!(split.train.iter().chain(&split.test_ood).all(|s| s.len() == 12));
    let names: Vec<String> = serde_json::from_slice(&fs::read(run.path(pipeline::CLASSES)).unwrap()).unwrap();
    assert_eq!(names, vec!["in", "ood"]);
}

#[test]
fn ingest_defaults_to_250bp_and_rejects_short_genomes() {
    let tmp = tempfile::tempdir().unwrap();
    let v = fasta_config(tmp.path(), None);
    let path = write_config(tmp.path(), &v);
    match &RunConfig::load(&path).unwrap().dataset {
        DatasetSource::Fasta(src) => assert_eq!(src.fragment_len, 250),
        _ => unreachable!(),
    }
    let out = seqood(&["ingest", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn overlapping_class_lists_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = fasta_config(tmp.path(), Some(12));
    v["dataset"]["fasta"]["val_ood"] = json!([{ "name": "ood", "path": "ood.fa" }]);
    let path = write_config(tmp.path(), &v);
    assert!(matches!(RunConfig::load(&path), Err(CliError::Config(_))));
    let out = seqood(&["ingest", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes_follow_error_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = tiny_json(&tmp.path().join("out"));
    v["schema_version"] = json!(99);
    let bad = write_config(tmp.path(), &v);
    assert_eq!(
        seqood(&["synth", "--config", bad.to_str().unwrap()]).status.code(),
        Some(2)
    );

    let good = write_config(tmp.path(), &tiny_json(&tmp.path().join("out")));
    let good = good.to_str().unwrap();
    let unknown = seqood(&["synth", "--config", good, "--methods", "llr,bogus"]);
    assert_eq!(unknown.status.code(), Some(2));
    // Scoring before anything was trained: missing upstream artifacts.
    assert_eq!(seqood(&["score", "--config", good]).status.code(), Some(3));
    assert_eq!(seqood(&["synth", "--config", good]).status.code(), Some(0));
    let missing = seqood(&["score", "--config", good, "--methods", "llr"]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("train"));

    let numeric: CliError = ModelError::NonFinite { step: 3 }.into();
    assert_eq!(numeric.exit_code(), 4);
}

#[test]
fn eval_reproduces_metrics_from_scores_alone() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = tiny_json(&tmp.path().join("out"));
    v["methods"] = json!(["likelihood", "llr"]);
    v["background"]["selection"] = json!("fixed");
    let run = run_for(&v, tmp.path());
    let first = run.run_all().unwrap();
    fs::remove_dir_all(run.path("models")).unwrap();
    let again = run.eval().unwrap();
    assert_eq!(first, again);
    let metrics = fs::read(run.path("report/metrics.csv")).unwrap();
    assert_eq!(run.eval().unwrap(), again);
    assert_eq!(fs::read(run.path("report/metrics.csv")).unwrap(), metrics);
    let header = String::from_utf8(metrics).unwrap();
    assert!(header.starts_with("method,auroc,auprc,fpr80,n_in,n_ood,mean,stderr\n"));
}

#[test]
fn stages_chain_through_the_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), &tiny_json(&tmp.path().join("out")));
    let cfg = path.to_str().unwrap();
    let methods = "likelihood,llr,maxprob,ensemble2";
    for verb in [
        "synth",
        "train",
        "sweep",
        "tune-sim",
        "train-bg",
        "train-clf",
        "score",
        "eval",
    ] {
        let out = seqood(&[verb, "--config", cfg, "--seed", "3", "--methods", methods]);
        assert!(out.status.success(), "{verb}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out_dir = tmp.path().join("out");
    let sweep = fs::read_to_string(out_dir.join("sweep/sweep.csv")).unwrap();
    assert!(sweep.starts_with("mu,lambda,val_auroc,checkpoint_path\n"));
    assert_eq!(sweep.lines().count(), 21);
    let metrics = fs::read_to_string(out_dir.join("report/metrics.csv")).unwrap();
    let rows: Vec<&str> = metrics.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rows, vec!["likelihood", "llr", "maxprob", "ensemble2"]);

    let report = seqood(&[
        "report",
        "--config",
        cfg,
        "--seed",
        "3",
        "--methods",
        methods,
        "--runs",
        out_dir.to_str().unwrap(),
    ]);
    assert!(report.status.success(), "{}", String::from_utf8_lossy(&report.stderr));
    assert!(out_dir.join("summary/summary.json").exists());
}

#[test]
fn provenance_sidecars_describe_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), &tiny_json(&tmp.path().join("out")));
    let out = seqood(&["synth", "--config", path.to_str().unwrap(), "--seed", "42"]);
    assert!(out.status.success());
    let manifest = tmp.path().join("out").join(pipeline::MANIFEST);
    let p = provenance::read(&manifest).unwrap();
    assert_eq!(p.stage, "synth");
    assert_eq!(p.seed, 42);
    assert_eq!(p.sha256, provenance::file_sha256(&manifest).unwrap());
    let mut cfg = RunConfig::load(&path).unwrap();
    cfg.seed = 42;
    assert_eq!(p.config_hash, cfg.hash());

    let split = DatasetSplit::read_manifest(
        fs::File::open(&manifest).map(std::io::BufReader::new).unwrap(),
        &cfg.alphabet(),
    )
    .unwrap();
    assert!(!split.train.is_empty());
}
