//! Library side of the `dfs` command: run configs, commands and reports.

pub mod bench;
pub mod commands;
pub mod config;

pub use bench::{cmd_bench, BenchReport};
pub use commands::{
    cmd_eval, cmd_gen, cmd_gradcheck, cmd_train, resolve_seed, CheckFailed, EvalReport, GenArgs,
    TrainArgs,
};
pub use config::{Ablation, RunConfig};
