//! Command-line front end tying the evaluation and pipeline modules into
//! reproducible runs.
//!
//! Every run is a pure function of its arguments and input files: commands
//! that randomize take an explicit `--seed` (there is no wall-clock
//! default), outputs are written atomically, and each artifact embeds a
//! provenance block — tool version, full configuration, input checksums —
//! sufficient to regenerate it byte for byte. `--jobs` (or the
//! `LESIONBENCH_JOBS` environment variable) sizes the worker pool and
//! never changes results.
//!
//! Exit codes: 0 success, 2 bad arguments or invalid inputs, 3 I/O
//! failure (unreadable, corrupt, or missing files), 4 grid mismatch
//! between volumes that must share one.

mod commands;
mod manifest;
mod provenance;

use clap::{Parser, Subcommand};

use lesionbench_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "lesionbench",
    version,
    about = "Lesion-segmentation evaluation and cascade-pipeline toolkit",
    propagate_version = true
)]
struct Cli {
    /// Worker threads for parallel sections. Results never depend on it.
    #[arg(
        long,
        global = true,
        env = "LESIONBENCH_JOBS",
        value_parser = clap::value_parser!(u16).range(1..)
    )]
    jobs: Option<u16>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one predicted mask against one ground-truth mask.
    Eval(commands::eval::EvalArgs),
    /// Evaluate a cohort manifest: summary tables, ROC sweeps,
    /// Bland-Altman agreement, and paired tests between methods.
    Cohort(commands::cohort::CohortArgs),
    /// Threshold sweeps of lesion-wise rates for each method and
    /// minimum lesion size.
    Roc(commands::roc::RocArgs),
    /// Paired two-sided Wilcoxon signed-rank test on two sample files.
    Wilcoxon(commands::wilcoxon::WilcoxonArgs),
    /// Bland-Altman bias and limits of agreement for paired measurements.
    BlandAltman(commands::bland_altman::BlandAltmanArgs),
    /// Generate a synthetic phantom cohort with exactly known ground truth.
    Synth(commands::synth::SynthArgs),
    /// Train the two-stage cascade on a cohort manifest.
    Train(commands::train::TrainArgs),
    /// Apply a trained cascade model to the cases of a manifest.
    Apply(commands::apply::ApplyArgs),
    /// Remap a volume's foreground intensities onto a reference histogram.
    MatchHist(commands::match_hist::MatchHistArgs),
}

/// Maps a library failure to the documented exit codes. File-level
/// problems (unreadable, truncated, malformed, unsupported scalar type)
/// are I/O failures; a grid mismatch has its own code because it is the
/// one error a batch caller typically wants to branch on; everything
/// else — bad flags, invalid thresholds, degenerate inputs — is an
/// argument problem.
fn exit_code(err: &Error) -> i32 {
    match err.code() {
        "io-error" | "corrupt-file" | "invalid-header" | "unsupported-dtype" => 3,
        "grid-mismatch" => 4,
        _ => 2,
    }
}

fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Eval(args) => commands::eval::run(args),
        Command::Cohort(args) => commands::cohort::run(args),
        Command::Roc(args) => commands::roc::run(args),
        Command::Wilcoxon(args) => commands::wilcoxon::run(args),
        Command::BlandAltman(args) => commands::bland_altman::run(args),
        Command::Synth(args) => commands::synth::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Apply(args) => commands::apply::run(args),
        Command::MatchHist(args) => commands::match_hist::run(args),
    }
}

fn main() {
    // Die quietly when stdout closes early (`lesionbench ... | head`),
    // like every other filter-style tool.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here too; they print to stdout
            // and succeed, while real argument errors go to stderr and
            // exit 2.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };

    if let Some(jobs) = cli.jobs {
        // The global pool can be initialized only once; a failure here
        // means something else (a test harness) already did, which is
        // harmless because thread count never affects results.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs as usize)
            .build_global();
    }

    if let Err(err) = dispatch(&cli.command) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
