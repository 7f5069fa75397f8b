use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use dfs_cli::bench::parse_shape;
use dfs_cli::commands::gradcheck_table;
use dfs_cli::{
    cmd_bench, cmd_eval, cmd_gen, cmd_gradcheck, cmd_train, resolve_seed, Ablation, CheckFailed,
    GenArgs, RunConfig, TrainArgs,
};
use dfs_core::gradcheck::{DEFAULT_EPS, DEFAULT_TOL};
use dfs_core::Mode;

/// Dual feature shift on synthetic multi-modal video.
#[derive(Parser)]
#[command(name = "dfs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: Mode,
        #[arg(long)]
        per_class: usize,
        /// Overridden by DFS_SEED.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 8)]
        t: usize,
        #[arg(long, default_value_t = 16)]
        hw: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f32,
    },
    /// Train a model; one JSON line per epoch.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Dataset directory; defaults to the config's data.dir.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        /// Overridden by DFS_SEED.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the epoch log here.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Evaluate a model on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare analytic gradients with finite differences on micro networks.
    Gradcheck {
        /// Overridden by DFS_SEED.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Time the shift kernels and the forward pass.
    Bench {
        /// C,T,H,W
        #[arg(long, default_value = "16,8,32,32", value_parser = parse_shape)]
        shape: [usize; 4],
        #[arg(long, default_value_t = 100)]
        iters: usize,
        #[arg(long, default_value_t = 10)]
        warmup: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print a run config preset.
    Config {
        #[arg(long, value_enum, default_value_t = Ablation::MtShared)]
        ablation: Ablation,
        #[arg(long, value_parser = parse_mode, default_value = "full")]
        mode: Mode,
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse::<Mode>().map_err(|e| e.to_string())
}

fn write_json(path: &PathBuf, value: &impl serde::Serialize) -> Result<()> {
    let json = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { out, mode, per_class, seed, t, hw, noise } => {
            let seed = resolve_seed(seed)?.unwrap_or(0);
            let args = GenArgs { out, mode, per_class, seed, frames: t, size: hw, noise };
            println!("{}", cmd_gen(&args)?.display());
        }
        Command::Train { config, data, out, epochs, seed, log } => {
            let config = RunConfig::load(&config)?;
            let data = data
                .or_else(|| config.data.dir.clone())
                .context("no dataset: pass --data or set data.dir in the config")?;
            let args = TrainArgs { config, data, out, epochs, seed: resolve_seed(seed)? };
            let stdout = io::stdout();
            match log {
                Some(path) => {
                    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    let mut tee = Tee(BufWriter::new(file), stdout.lock());
                    cmd_train(&args, &mut tee)?;
                    tee.flush()?;
                }
                None => {
                    cmd_train(&args, stdout.lock())?;
                }
            }
        }
        Command::Eval { model, data, report } => {
            let r = cmd_eval(&model, &data, report.as_deref())?;
            println!("top1 {:.4} balanced {:.4} ({} samples)", r.top1, r.balanced, r.num_samples);
        }
        Command::Gradcheck { seed, eps, tol } => {
            let seed = resolve_seed(seed)?.unwrap_or(0);
            let report = cmd_gradcheck(seed, eps, tol)?;
            print!("{}", gradcheck_table(&report));
            if let Some(w) = report.worst() {
                println!("worst: {} {} rel err {:.3e} (analytic {:.6e}, numeric {:.6e})",
                    w.case, w.block, w.max_rel_err, w.analytic, w.numeric);
            }
            if !report.passed() {
                let failed = report.blocks.iter().filter(|b| !b.passed).count();
                return Err(CheckFailed(format!("{failed} blocks exceed tol {tol:e}")).into());
            }
        }
        Command::Bench { shape, iters, warmup, report } => {
            let r = cmd_bench(shape, iters, warmup)?;
            for k in &r.kernels {
                println!("{:<15} mean {:>9.4} ms  min {:>9.4} ms  mults {}", k.name, k.mean_ms, k.min_ms, k.mult_ops);
            }
            for n in &r.networks {
                println!("{:<15} params {:>9}  macs {:>12}", n.name, n.param_count, n.mac_count);
            }
            if let Some(path) = report {
                write_json(&path, &r)?;
            }
        }
        Command::Config { ablation, mode, data } => {
            let mut cfg = RunConfig::desk(mode).with_ablation(ablation);
            cfg.data.dir = data;
            print!("{}", cfg.to_json());
        }
    }
    Ok(())
}

/// Writes to both sinks.
struct Tee<A, B>(A, B);

impl<A: Write, B: Write> Write for Tee<A, B> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.write_all(buf)?;
        self.1.write_all(buf)?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        self.0.flush()?;
        self.1.flush()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<CheckFailed>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
