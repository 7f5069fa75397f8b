//! Trains the ablation settings on synthetic data and prints accuracy as
//! training progresses. Knobs come from the environment:
//! MODE, SEED, NTRAIN, EPOCHS, LR, MOM, BS, WIDTHS, STRIDES, ONLY, EVERY,
//! GLOROT.

use std::time::Instant;

use dfs_core::model::{InitScheme, InputDims, NetworkConfig, ParamStore, TrainConfig};
use dfs_core::shift::{Fraction, ShiftConfig};
use dfs_core::synthdata::{generate_samples, GenConfig, Mode};
use dfs_core::train::{evaluate, Trainer};

fn env<T: std::str::FromStr>(key: &str, default: T) -> T {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn list(key: &str, default: &str) -> [usize; 5] {
    let s = std::env::var(key).unwrap_or_else(|_| default.into());
    let v: Vec<usize> = s.split(',').map(|w| w.parse().unwrap()).collect();
    v.try_into().unwrap()
}

fn main() {
    let mode: Mode = env("MODE", "full".to_string()).parse().unwrap();
    let seed: u64 = env("SEED", 0);
    let epochs: usize = env("EPOCHS", 40);
    let every: usize = env("EVERY", 10);
    let lr: f64 = env("LR", 0.05);
    let momentum: f64 = env("MOM", 0.9);
    let batch_size: usize = env("BS", 8);
    let only: String = env("ONLY", String::new());
    let widths = list("WIDTHS", "8,16,16,16,16");
    let strides = list("STRIDES", "2,2,2,1,1");

    let train_gc = GenConfig { mode, samples_per_class: env("NTRAIN", 50), seed: 1000 + seed, ..GenConfig::default() };
    let test_gc = GenConfig { samples_per_class: 100, seed: 2000 + seed, ..train_gc.clone() };
    let train = generate_samples(&train_gc).unwrap();
    let test = generate_samples(&test_gc).unwrap();

    let mut base = NetworkConfig::with_widths(2, mode.num_classes(), InputDims::default(), widths);
    for (st, s) in base.stages.iter_mut().zip(strides) {
        st.stride = s;
    }
    let temporal = ShiftConfig { k_fraction: Fraction::ZERO, ..ShiftConfig::default() };
    let settings = [
        ("mt", base.clone()),
        ("t", base.clone().with_shift(temporal)),
        ("none", base.clone().with_shift(ShiftConfig::none()).share_stages(&[])),
    ];
    for (name, cfg) in settings {
        if !only.is_empty() && !only.split(',').any(|o| o == name) {
            continue;
        }
        let init = if env("GLOROT", 0) == 1 { InitScheme::Glorot } else { InitScheme::He };
        let tc = TrainConfig { learning_rate: lr, epochs, batch_size, seed, momentum, init };
        let mut params = ParamStore::init_with(&cfg, seed, tc.init);
        let mut trainer = Trainer::new(&cfg, &tc, &train).unwrap();
        let start = Instant::now();
        for e in 1..=epochs {
            let loss = trainer.run_epoch(&mut params).unwrap();
            if e % every == 0 || e == epochs {
                let tr = evaluate(&cfg, &params, &train).unwrap().top1_accuracy().unwrap();
                let te = evaluate(&cfg, &params, &test).unwrap().top1_accuracy().unwrap();
                println!("{name:>5} epoch {e:3} loss {loss:.4} train {tr:.3} test {te:.3} ({:.1?})", start.elapsed());
            }
        }
    }
}
