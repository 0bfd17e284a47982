//! The `hydrovibe` binary: acoustic sweep synthesis, fingerprinting,
//! unmixing, model training, and report generation from one config file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hydrovibe_cli::commands::{
    cmd_ablate, cmd_eval, cmd_pipeline, cmd_report, cmd_sweep_wav, cmd_synth, cmd_train,
    AblateSuite, Ctx,
};
use hydrovibe_cli::config::RunConfig;
use hydrovibe_cli::CliError;

#[derive(Parser)]
#[command(
    name = "hydrovibe",
    version,
    about = "Acoustic-radar water pollutant sensing pipeline on synthetic captures"
)]
struct Cli {
    /// Run configuration file; defaults are used when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Root seed, overriding the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config file.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also persist raw capture cubes during `synth`.
    #[arg(long, global = true)]
    keep_raw: bool,
    /// Worker threads; defaults to the core count.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the dataset: per-sample feature tensors plus the manifest.
    Synth,
    /// Write the 101-tone excitation sweep as a WAV file.
    SweepWav,
    /// Decompose tensors, build the dictionary, unmix all mixtures.
    Pipeline,
    /// Fit the teacher forest and distill the student.
    Train,
    /// Score the persisted checkpoints on the holdout split.
    Eval {
        /// Feed the truth back as predictions to self-test the scorer.
        #[arg(long)]
        self_test: bool,
    },
    /// Run ablation suites and emit one CSV row per variant.
    Ablate {
        /// Which suite to run.
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
    },
    /// Print every report CSV under the output directory.
    Report,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Suite {
    Features,
    Methods,
    Arch,
    All,
}

impl From<Suite> for AblateSuite {
    fn from(s: Suite) -> Self {
        match s {
            Suite::Features => AblateSuite::Features,
            Suite::Methods => AblateSuite::Methods,
            Suite::Arch => AblateSuite::Arch,
            Suite::All => AblateSuite::All,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        // A second invocation in-process would fail; the global pool can
        // only be sized once and that is fine for a binary.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let run_config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::stock(),
    };
    let ctx = Ctx::new(run_config, cli.seed, cli.out.as_deref(), cli.keep_raw)?;

    match cli.cmd {
        Cmd::Synth => {
            let summary = cmd_synth(&ctx)?;
            println!(
                "synth: {} samples under {} ({} raw cubes)",
                summary.samples,
                ctx.out.display(),
                summary.raw_cubes
            );
        }
        Cmd::SweepWav => {
            let path = cmd_sweep_wav(&ctx)?;
            println!("sweep-wav: {}", path.display());
        }
        Cmd::Pipeline => {
            let summary = cmd_pipeline(&ctx)?;
            println!(
                "pipeline: {} samples, {} mixtures unmixed, subset accuracy {:.3}",
                summary.samples, summary.mixtures, summary.metrics.presence.subset_accuracy
            );
        }
        Cmd::Train => {
            let report = cmd_train(&ctx)?;
            let rmse = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
            println!(
                "train: teacher rmse {}, student rmse {}, {} student parameters",
                rmse(report.teacher.rmse.overall),
                rmse(report.student.rmse.overall),
                report.param_count
            );
        }
        Cmd::Eval { self_test } => {
            let reports = cmd_eval(&ctx, self_test)?;
            for r in &reports {
                println!(
                    "eval: subset accuracy {:.3}, macro accuracy {:.3}",
                    r.presence.subset_accuracy, r.presence.macro_accuracy
                );
            }
        }
        Cmd::Ablate { suite } => {
            let files = cmd_ablate(&ctx, suite.into())?;
            println!("ablate: wrote {}", files.join(", "));
        }
        Cmd::Report => cmd_report(&ctx, std::io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {}", e.category(), message);
            ExitCode::FAILURE
        }
    }
}
