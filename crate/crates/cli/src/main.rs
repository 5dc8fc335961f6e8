use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use seqood_cli::pipeline::{Run, REPORT_DIR};
use seqood_cli::{CliError, RunConfig};

#[derive(Parser)]
#[command(
    name = "seqood",
    version,
    about = "Likelihood-ratio OOD detection for discrete sequences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated method list overriding the config's.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset.
    Synth(Common),
    /// Fragment FASTA genomes into a dataset.
    Ingest(Common),
    /// Train the foreground density model (and WAIC members).
    Train(Common),
    /// Train or select the background model.
    TrainBg(Common),
    /// Train the classifier baselines.
    TrainClf(Common),
    /// Score the test split with every requested method.
    Score(Common),
    /// Background grid search against validation OOD data.
    Sweep(Common),
    /// Background grid search against mutated validation data.
    TuneSim(Common),
    /// Compute metrics from the score file.
    Eval(Common),
    /// Summarize several runs (mean and standard error per method).
    Report {
        #[command(flatten)]
        common: Common,
        /// Run directories to aggregate; defaults to the config's.
        #[arg(long, num_args = 1..)]
        runs: Vec<PathBuf>,
    },
    /// All stages in order.
    Run(Common),
}

fn load(c: &Common) -> Result<Run, CliError> {
    let mut cfg = RunConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &c.out {
        cfg.out_dir = out.clone();
    }
    if let Some(m) = &c.methods {
        cfg.methods = m.clone();
    }
    cfg.validate()?;
    Ok(Run::new(cfg))
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Synth(c) => load(&c)?.synth(),
        Command::Ingest(c) => load(&c)?.ingest(),
        Command::Train(c) => load(&c)?.train().map(drop),
        Command::TrainBg(c) => load(&c)?.train_bg().map(drop),
        Command::TrainClf(c) => load(&c)?.train_clf(),
        Command::Score(c) => load(&c)?.score().map(drop),
        Command::Sweep(c) => {
            let r = load(&c)?.sweep()?;
            let s = r.selected_row();
            println!("selected mu={} lambda={} val_auroc={:.4}", s.mu, s.lambda, s.val_auroc);
            Ok(())
        }
        Command::TuneSim(c) => {
            let r = load(&c)?.tune_sim()?;
            let s = r.selected_row();
            println!(
                "selected mu={} lambda={} sim_val_auroc={:.4}",
                s.mu, s.lambda, s.val_auroc
            );
            Ok(())
        }
        Command::Eval(c) => {
            print_methods(&load(&c)?.eval()?);
            Ok(())
        }
        Command::Report { common, runs } => {
            let run = load(&common)?;
            let out = run.path("summary");
            for row in run.report(&runs, &out)? {
                println!(
                    "{:<12} runs={} auroc={:.4}±{:.4} auprc={:.4}±{:.4} fpr80={:.4}±{:.4}",
                    row.method,
                    row.runs,
                    row.auroc.mean,
                    row.auroc.stderr,
                    row.auprc.mean,
                    row.auprc.stderr,
                    row.fpr80.mean,
                    row.fpr80.stderr
                );
            }
            Ok(())
        }
        Command::Run(c) => {
            let run = load(&c)?;
            print_methods(&run.run_all()?);
            eprintln!("report written to {}", run.path(REPORT_DIR).display());
            Ok(())
        }
    }
}

fn print_methods(report: &seqood::metrics::EvalReport) {
    for m in &report.methods {
        println!(
            "{:<12} auroc={:.4} auprc={:.4} fpr80={:.4}",
            m.method, m.auroc, m.auprc, m.fpr80
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
