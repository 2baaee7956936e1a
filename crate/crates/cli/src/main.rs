//! Command-line front end: encrypted training runs, matrix-product and
//! softmax benchmarks, and synthetic data generation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cipherfit::approx::SoftmaxConfig;
use cipherfit::data::{gaussian_mixture, split, MixtureSpec};
use cipherfit::error::Module;
use cipherfit::{Error, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use cipherfit_cli::config::RunConfig;
use cipherfit_cli::{bench, csvio, train};

#[derive(Parser)]
#[command(name = "cipherfit", version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fine-tune a linear classifier on encrypted features
    Train {
        /// JSON run configuration
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured output directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Operation counts and oracle errors of the matrix products
    BenchMatmul {
        /// Shapes as `a,b,c;a,b,c;…` (default: the five reference shapes)
        #[arg(long)]
        shapes: Option<String>,
        /// Comma-separated algorithm names (default: all)
        #[arg(long)]
        algs: Option<String>,
        /// Rows per block; defaults to `a` rounded up to a power of two
        #[arg(long)]
        s0: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also write the rows as JSON
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Monte Carlo error of the softmax approximation
    BenchSoftmax {
        #[arg(long, value_delimiter = ',', default_value = "3,5,7,10")]
        classes: Vec<usize>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        /// Largest sampling radius
        #[arg(long, default_value_t = 128.0)]
        range: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// JSON softmax configuration (defaults otherwise)
        #[arg(long)]
        softmax: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write a seeded Gaussian-mixture dataset as train/val/test CSV files
    GenData {
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 16)]
        features: usize,
        #[arg(long, default_value_t = 234)]
        per_class: usize,
        #[arg(long, default_value_t = 2.0)]
        separation: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Rows for train,val,test (default: 5/7, 1/7, 1/7)
        #[arg(long, value_delimiter = ',')]
        split: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Process exit code for an error raised in `module`.
fn exit_code(module: Module) -> u8 {
    match module {
        Module::Emulator => 10,
        Module::Encoding => 11,
        Module::Matmul => 12,
        Module::Approx => 13,
        Module::Training => 14,
        Module::Io => 15,
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train { config, out } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let r = train::run(&cfg)?;
            for e in &r.epochs {
                println!(
                    "epoch {:>3}  val loss {:.4}  val acc {:.4}",
                    e.epoch, e.val_loss, e.val_accuracy
                );
            }
            let test = |a: Option<f64>| a.map_or("-".to_string(), |v| format!("{v:.4}"));
            println!(
                "best epoch {}  test acc {} (plaintext reference {})",
                r.best_epoch,
                test(r.accuracy.test),
                test(r.reference_accuracy.test)
            );
            println!("ops {}  estimated {:.1} s", r.counts, r.estimated_ms / 1e3);
            println!("wrote {}", cfg.output_dir.display());
        }
        Command::BenchMatmul { shapes, algs, s0, seed, json } => {
            let shapes = match shapes {
                Some(s) => bench::parse_shapes(&s)?,
                None => bench::REFERENCE_SHAPES.to_vec(),
            };
            let algs = match algs {
                Some(s) => bench::parse_algorithms(&s)?,
                None => cipherfit::matmul::Algorithm::ALL.to_vec(),
            };
            let rows = bench::matmul(&shapes, &algs, s0, seed)?;
            print!("{}", bench::matmul_table(&rows));
            if let Some(p) = json {
                write_json(&p, &rows)?;
            }
        }
        Command::BenchSoftmax { classes, samples, range, seed, softmax, json } => {
            let base = match softmax {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(&p)?)
                    .map_err(|e| Error::Parse(format!("{}: {e}", p.display())))?,
                None => SoftmaxConfig::default(),
            };
            let cells = bench::softmax(&base, &classes, samples, range, seed)?;
            print!("{}", bench::softmax_table(&cells));
            if let Some(p) = json {
                write_json(&p, &cells)?;
            }
        }
        Command::GenData { classes, features, per_class, separation, seed, split: sizes, out } => {
            let data = gaussian_mixture(&MixtureSpec { classes, features, per_class, separation, seed })?;
            let n = data.len();
            let sizes = match sizes.as_deref() {
                Some(&[a, b, c]) => [a, b, c],
                Some(_) => return Err(Error::Parse("--split needs three sizes".into())),
                None => [n - 2 * (n / 7), n / 7, n / 7],
            };
            let parts = split(&data, sizes)?;
            std::fs::create_dir_all(&out)?;
            for (name, part) in ["train", "val", "test"].iter().zip(&parts) {
                csvio::export(&out.join(format!("{name}.csv")), part)?;
            }
            let cfg = serde_json::json!({
                "train": "train.csv",
                "val": "val.csv",
                "test": "test.csv",
                "num_classes": classes,
                "output_dir": "out",
            });
            write_json(&out.join("config.json"), &cfg)?;
            println!("wrote {} rows ({:?}) to {}", sizes.iter().sum::<usize>(), sizes, out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(exit_code(e.module()))
        }
    }
}
