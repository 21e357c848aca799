//! `spca`: sparse principal components of bag-of-words corpora and dense
//! covariance matrices.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spca_cli::corpus::load_vocab;
use spca_cli::matrix_io::{self, SynthMeta};
use spca_cli::pipeline::{self, PipelineOptions};
use spca_cli::{Error, Result};
use spca_core::covariance::{self, SpikedModelSpec};
use spca_core::oracle;

const CACHE_DIR_ENV: &str = "SPCA_CACHE_DIR";

#[derive(Parser)]
#[command(
    name = "spca",
    about = "Sparse PCA via safe feature screening and block coordinate ascent",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Suboptimality target (barrier weight is epsilon/n)
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    #[arg(long, default_value_t = 20)]
    max_sweeps: usize,
    /// Relative per-sweep objective gain below which the solve stops
    #[arg(long, default_value_t = 1e-6)]
    sweep_tol: f64,
    /// Support cutoff as a fraction of the largest loading magnitude
    #[arg(long, default_value_t = 1e-3)]
    support_threshold: f64,
    /// Worker threads for sharded corpus passes
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Zero out wall-clock fields for byte-reproducible outputs
    #[arg(long, default_value_t = false)]
    no_timing: bool,
}

impl SolverArgs {
    fn options(&self, cache_dir: &Option<PathBuf>) -> PipelineOptions {
        let mut opts = PipelineOptions {
            threads: self.threads.max(1),
            epsilon: self.epsilon,
            max_sweeps: self.max_sweeps,
            sweep_tol: self.sweep_tol,
            support_threshold: self.support_threshold,
            no_timing: self.no_timing,
            ..PipelineOptions::default()
        };
        opts.cache_dir = cache_dir
            .clone()
            .or_else(|| std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from));
        opts
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute (or reuse) per-feature statistics and write the sorted
    /// variance profile as CSV
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        /// Cache directory for stats and parsed triples (env SPCA_CACHE_DIR)
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Output CSV path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract k sparse components with disjoint supports
    Components {
        #[arg(long)]
        corpus: PathBuf,
        /// Vocabulary file (one token per line) for labelled output
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Number of components
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Target cardinality per component
        #[arg(long, default_value_t = 5)]
        cardinality: usize,
        /// Accepted deviation from the target cardinality
        #[arg(long, default_value_t = 2)]
        slack: usize,
        /// Solve budget per component for the penalty search
        #[arg(long, default_value_t = 30)]
        max_solves: usize,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        /// Output prefix; writes PREFIX.json (stdout table always prints)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one penalty value on a dense symmetric matrix file
    Solve {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[command(flatten)]
        solver: SolverArgs,
        /// Output prefix; writes PREFIX.component.json and PREFIX.trace.csv
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic covariance matrix file (plus metadata sidecar)
    Synth {
        #[arg(long, value_enum)]
        model: SynthModel,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        /// Fraction of coordinates carrying the planted eigenvector
        #[arg(long, default_value_t = 0.1)]
        support_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact brute-force reference on a small matrix file
    #[command(hide = true)]
    Oracle {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        lambda: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthModel {
    Spiked,
    Gaussian,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::file(path, e.to_string()))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Stats {
            corpus,
            cache_dir,
            threads,
            out,
        } => {
            let opts = PipelineOptions {
                threads: threads.max(1),
                cache_dir: cache_dir
                    .or_else(|| std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from)),
                ..PipelineOptions::default()
            };
            let cs = pipeline::open_with_stats(&corpus, &opts)?;
            let csv = pipeline::variance_csv(&cs.stats);
            match out {
                Some(path) => {
                    write_text(&path, &csv)?;
                    eprintln!(
                        "{} features over {} documents ({}); profile written to {}",
                        cs.stats.num_features(),
                        cs.stats.num_docs(),
                        if cs.stats_from_cache {
                            "statistics from cache"
                        } else {
                            "statistics computed"
                        },
                        path.display()
                    );
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Components {
            corpus,
            vocab,
            k,
            cardinality,
            slack,
            max_solves,
            cache_dir,
            solver,
            out,
        } => {
            let mut opts = solver.options(&cache_dir);
            opts.slack = slack;
            opts.max_solves = max_solves;
            let cs = pipeline::open_with_stats(&corpus, &opts)?;
            let vocabulary = match vocab {
                Some(path) => Some(load_vocab(path, cs.source.num_words())?),
                None => None,
            };
            let report =
                pipeline::run_components_from(&cs, vocabulary.as_ref(), k, cardinality, &opts)?;
            print!("{}", report.render_table());
            if let Some(prefix) = out {
                let path = with_suffix(&prefix, ".json");
                write_text(&path, &report.to_json())?;
                eprintln!("report written to {}", path.display());
            }
            Ok(())
        }
        Command::Solve {
            matrix,
            lambda,
            solver,
            out,
        } => {
            let opts = solver.options(&None);
            let cov = matrix_io::read_covariance(&matrix)?;
            let run = pipeline::run_solve(&cov, lambda, &opts)?;
            let json = serde_json::to_string_pretty(&run.report).expect("report serializes");
            println!("{json}");
            if let Some(prefix) = out {
                let cpath = with_suffix(&prefix, ".component.json");
                write_text(&cpath, &(json + "\n"))?;
                let tpath = with_suffix(&prefix, ".trace.csv");
                write_text(&tpath, &pipeline::trace_csv(&run.trace))?;
                eprintln!(
                    "component written to {}, trace to {}",
                    cpath.display(),
                    tpath.display()
                );
            }
            Ok(())
        }
        Command::Synth {
            model,
            n,
            m,
            support_fraction,
            seed,
            out,
        } => {
            let meta = match model {
                SynthModel::Spiked => {
                    let spec = SpikedModelSpec::new(n, m, support_fraction, seed);
                    let generated = covariance::spiked_model(&spec)?;
                    matrix_io::write_matrix(&out, generated.covariance.values())?;
                    SynthMeta {
                        model: "spiked".into(),
                        n,
                        m,
                        seed,
                        support_fraction: Some(support_fraction),
                        true_support: generated
                            .true_support
                            .iter()
                            .map(|&i| i as u32 + 1)
                            .collect(),
                    }
                }
                SynthModel::Gaussian => {
                    let cov = covariance::gaussian_model(n, m, seed)?;
                    matrix_io::write_matrix(&out, cov.values())?;
                    SynthMeta {
                        model: "gaussian".into(),
                        n,
                        m,
                        seed,
                        support_fraction: None,
                        true_support: Vec::new(),
                    }
                }
            };
            matrix_io::write_meta(&out, &meta)?;
            eprintln!(
                "{} matrix of order {n} written to {} (+ metadata sidecar)",
                meta.model,
                out.display()
            );
            Ok(())
        }
        Command::Oracle { matrix, lambda } => {
            let cov = matrix_io::read_covariance(&matrix)?;
            let sol = oracle::brute_force_card(cov.values(), lambda)?;
            let support: Vec<u32> = sol
                .support
                .iter()
                .map(|&i| cov.feature_ids()[i])
                .collect();
            let json = serde_json::json!({
                "psi": sol.psi,
                "support": support,
                "x": sol.x,
                "lambda": lambda,
            });
            println!("{}", serde_json::to_string_pretty(&json).expect("serializes"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
