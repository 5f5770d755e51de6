//! Command-line front end for the tag-aware article recommender.
//!
//! Subcommands mirror the pipeline stages: generate or ingest annotations,
//! build the tag similarity matrix, cluster it, evaluate the recommenders
//! under cross-validation, and query recommendations for a single user.
//! Each stage reads the previous stage's artifact from the output directory
//! and skips recomputation when its recorded inputs are unchanged.
//!
//! Exit codes: 0 on success, 2 for configuration and usage errors, 3 for
//! unreadable or malformed data.

mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};
use pipeline::Pipeline;

#[derive(Parser)]
#[command(
    name = "tagrec",
    version,
    about = "Tag-cluster based article recommendation over social bookmarking data"
)]
struct Cli {
    /// Config file with `[section]` / `key = value` settings.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Cap the worker threads used by parallel stages.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Rebuild artifacts even when their recorded inputs are unchanged.
    #[arg(long, global = true)]
    force: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic corpus to the configured input paths.
    Synth {
        /// Master seed for the generator.
        #[arg(long, default_value_t = 42)]
        seed: u64,

        /// Generate the small demonstration corpus instead of the full one.
        #[arg(long)]
        small: bool,

        #[command(flatten)]
        overrides: Overrides,
    },

    /// Parse annotations into canonical snapshots (raw and filtered).
    Ingest {
        #[command(flatten)]
        overrides: Overrides,
    },

    /// Build the tag similarity matrix for the filtered vocabulary.
    Simmatrix {
        #[command(flatten)]
        overrides: Overrides,
    },

    /// Cluster the similarity matrix; writes assignments and a size histogram.
    Cluster {
        #[command(flatten)]
        overrides: Overrides,
    },

    /// Run the repeated cross-validation protocol; writes report and CDF CSVs.
    Evaluate {
        #[command(flatten)]
        overrides: Overrides,
    },

    /// Print blended recommendations for one user of the filtered snapshot.
    Recommend {
        /// User id to recommend for.
        #[arg(long)]
        user: String,

        /// Blend factor between profile similarity and annotation effort.
        #[arg(long, default_value_t = 0.9)]
        blend: f64,

        #[command(flatten)]
        overrides: Overrides,
    },

    /// Pretty-print a previously computed report.
    Report {
        /// Report CSV to render (default: <output_dir>/report.csv).
        #[arg(long, value_name = "FILE")]
        file: Option<PathBuf>,

        #[command(flatten)]
        overrides: Overrides,
    },
}

impl Command {
    fn overrides(&self) -> &Overrides {
        match self {
            Command::Synth { overrides, .. }
            | Command::Ingest { overrides }
            | Command::Simmatrix { overrides }
            | Command::Cluster { overrides }
            | Command::Evaluate { overrides }
            | Command::Recommend { overrides, .. }
            | Command::Report { overrides, .. } => overrides,
        }
    }
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

/// Configuration problems exit with 2, broken or missing data with 3.
fn data_failure(error: anyhow::Error) -> Failure {
    let code = error
        .chain()
        .find_map(|cause| cause.downcast_ref::<tagrec_core::Error>())
        .map_or(3, |core| match core {
            tagrec_core::Error::InvalidArgument(_) => 2,
            _ => 3,
        });
    Failure { code, error }
}

fn config_failure(error: anyhow::Error) -> Failure {
    Failure { code: 2, error }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(config_failure(anyhow::anyhow!(
                "--threads must be at least 1"
            )));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
    let config = RunConfig::resolve(cli.config.as_deref(), cli.command.overrides())
        .map_err(config_failure)?;
    std::fs::create_dir_all(&config.output_dir).map_err(|e| {
        config_failure(anyhow::Error::new(e).context(format!(
            "cannot create output directory {}",
            config.output_dir.display()
        )))
    })?;
    let pipeline = Pipeline {
        config: &config,
        force: cli.force,
    };
    let result = match &cli.command {
        Command::Synth { seed, small, .. } => pipeline.cmd_synth(*seed, *small),
        Command::Ingest { .. } => pipeline.cmd_ingest(),
        Command::Simmatrix { .. } => pipeline.ensure_matrix().map(|_| ()),
        Command::Cluster { .. } => pipeline.ensure_clustering().map(|_| ()),
        Command::Evaluate { .. } => pipeline.ensure_report().map(|_| ()),
        Command::Recommend { user, blend, .. } => pipeline.cmd_recommend(user, *blend),
        Command::Report { file, .. } => pipeline.cmd_report(file.as_deref()),
    };
    result.map_err(data_failure)
}

fn main() -> ExitCode {
    // Restore default SIGPIPE handling so piping into `head` ends the
    // process quietly instead of panicking on a closed stdout.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
