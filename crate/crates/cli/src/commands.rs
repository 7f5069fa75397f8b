use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dfs_core::gradcheck::{run_gradcheck, GradcheckReport};
use dfs_core::model::{load_model, save_model, BackwardHooks, NetworkConfig, ParamStore};
use dfs_core::synthdata::{generate_dataset, load_dataset, manifest_path, GenConfig};
use dfs_core::train::{evaluate, train, EpochLog};
use dfs_core::{Error, Mode, MultiModalSample};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const SEED_ENV: &str = "DFS_SEED";

/// A check that ran to completion and failed. Maps to exit code 1.
#[derive(Debug)]
pub struct CheckFailed(pub String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailed {}

/// `DFS_SEED` wins over the command-line seed when set.
pub fn resolve_seed(flag: Option<u64>) -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => {
            let seed = v
                .trim()
                .parse()
                .with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer"))?;
            Ok(Some(seed))
        }
        Err(std::env::VarError::NotPresent) => Ok(flag),
        Err(e) => bail!("{SEED_ENV}: {e}"),
    }
}

#[derive(Clone, Debug)]
pub struct GenArgs {
    pub out: PathBuf,
    pub mode: Mode,
    pub per_class: usize,
    pub seed: u64,
    pub frames: usize,
    pub size: usize,
    pub noise: f32,
}

/// Writes the dataset and returns the manifest path.
pub fn cmd_gen(args: &GenArgs) -> Result<PathBuf> {
    let gc = GenConfig {
        mode: args.mode,
        samples_per_class: args.per_class,
        seed: args.seed,
        frames: args.frames,
        size: args.size,
        noise_std: args.noise,
        ..GenConfig::default()
    };
    gc.validate()?;
    generate_dataset(&gc, &args.out)?;
    Ok(manifest_path(&args.out))
}

fn check_samples(cfg: &NetworkConfig, samples: &[MultiModalSample], classes: usize) -> Result<()> {
    if classes != cfg.num_classes {
        return Err(Error::Config(format!(
            "dataset has {classes} classes, network has {}",
            cfg.num_classes
        ))
        .into());
    }
    let d = cfg.input;
    let want = (d.channels, d.frames, d.height, d.width);
    for s in samples {
        if s.clips.len() != cfg.modalities || s.clips.iter().any(|c| c.dims() != want) {
            return Err(Error::Config(format!(
                "dataset clips are {} x {:?}, network expects {} x {want:?}",
                s.clips.len(),
                s.clips[0].dims(),
                cfg.modalities
            ))
            .into());
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct TrainArgs {
    pub config: RunConfig,
    pub data: PathBuf,
    pub out: PathBuf,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
}

/// Trains from the initialization given by the seed and writes the model.
/// Each epoch's log line goes to `log` as JSON.
pub fn cmd_train(args: &TrainArgs, mut log: impl Write) -> Result<Vec<EpochLog>> {
    let mut run = args.config.clone();
    if let Some(e) = args.epochs {
        run.train.epochs = e;
    }
    if let Some(s) = args.seed {
        run.train.seed = s;
    }
    let cfg = run.network_config()?;
    run.train.validate()?;
    let (manifest, samples) = load_dataset(&args.data)?;
    if let Some(mode) = run.data.mode {
        if mode != manifest.mode {
            return Err(Error::Config(format!(
                "config expects {mode} data, {} holds {}",
                args.data.display(),
                manifest.mode
            ))
            .into());
        }
    }
    check_samples(&cfg, &samples, manifest.classes.len())?;

    let mut params = ParamStore::init_with(&cfg, run.train.seed, run.train.init);
    let mut write_err = None;
    let logs = train(&cfg, &run.train, &mut params, &samples, |entry| {
        if write_err.is_none() {
            let line = serde_json::to_string(entry).expect("log entry serializes");
            if let Err(e) = writeln!(log, "{line}") {
                write_err = Some(e);
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(e).context("writing training log");
    }
    save_model(&params, &cfg, &args.out)?;
    Ok(logs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub top1: f64,
    pub balanced: f64,
    pub confusion: Vec<Vec<u64>>,
    pub num_samples: u64,
    pub model_path: String,
    pub dataset_manifest: String,
    /// Seed the evaluated dataset was generated with.
    pub seed: u64,
}

pub fn cmd_eval(model: &Path, data: &Path, report: Option<&Path>) -> Result<EvalReport> {
    let (params, cfg) = load_model(model)?;
    let (manifest, samples) = load_dataset(data)?;
    check_samples(&cfg, &samples, manifest.classes.len())?;
    let cm = evaluate(&cfg, &params, &samples)?;
    let out = EvalReport {
        top1: cm.top1_accuracy()?,
        balanced: cm.balanced_accuracy()?,
        confusion: cm.counts().to_vec(),
        num_samples: cm.total(),
        model_path: model.display().to_string(),
        dataset_manifest: manifest_path(data).display().to_string(),
        seed: manifest.seed,
    };
    if let Some(path) = report {
        let json = serde_json::to_string_pretty(&out)? + "\n";
        fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(out)
}

pub fn cmd_gradcheck(seed: u64, eps: f64, tol: f64) -> Result<GradcheckReport> {
    if !(eps > 0.0 && tol > 0.0) {
        return Err(Error::Config("eps and tol must be positive".into()).into());
    }
    Ok(run_gradcheck(seed, eps, tol, BackwardHooks::default())?)
}

/// One row per parameter block.
pub fn gradcheck_table(report: &GradcheckReport) -> String {
    let mut out = format!(
        "{:<18} {:<24} {:>7} {:>12}  result\n",
        "case", "block", "entries", "max rel err"
    );
    for b in &report.blocks {
        out += &format!(
            "{:<18} {:<24} {:>7} {:>12.3e}  {}\n",
            b.case,
            b.block,
            b.entries,
            b.max_rel_err,
            if b.passed { "pass" } else { "FAIL" }
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_has_a_row_per_block() {
        let report = cmd_gradcheck(1, 1e-5, 1e-4).unwrap();
        assert!(report.passed());
        let table = gradcheck_table(&report);
        assert_eq!(table.lines().count(), report.blocks.len() + 1);
        assert!(cmd_gradcheck(1, 0.0, 1e-4).is_err());
    }
}
