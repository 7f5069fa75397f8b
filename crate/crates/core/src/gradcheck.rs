//! Central finite-difference check of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{
    backward_with_hooks, forward_clips, sample_loss, BackwardHooks, InputDims, NetworkConfig,
    ParamStore,
};
use crate::shift::{Fraction, ShiftConfig};
use crate::tensor::ClipTensor;

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_TOL: f64 = 1e-4;
/// Denominator floor of the relative error, so entries whose true gradient
/// is ~0 are judged on absolute error instead.
pub const REL_FLOOR: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockCheck {
    pub case: String,
    pub block: String,
    pub entries: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub eps: f64,
    pub tol: f64,
    pub blocks: Vec<BlockCheck>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.passed)
    }

    pub fn worst(&self) -> Option<&BlockCheck> {
        self.blocks
            .iter()
            .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
    }
}

/// Micro network: two modalities of `1×3×4×4` clips, three classes, five
/// stages of equal `width`.
pub fn micro_config(width: usize, shift: ShiftConfig) -> NetworkConfig {
    let input = InputDims {
        channels: 1,
        frames: 3,
        height: 4,
        width: 4,
    };
    NetworkConfig::with_widths(2, 3, input, [width; 5]).with_shift(shift)
}

/// The micro networks the `gradcheck` command covers: every shift site
/// active, shared stages 2–3, each mechanism alone at width 2 and both
/// together at width 3 (the narrowest width where both bands fit).
pub fn micro_cases() -> Vec<(String, NetworkConfig)> {
    let all = vec![1, 2, 3, 4];
    let shift = |k: Fraction, i: Fraction| ShiftConfig {
        k_fraction: k,
        i_fraction: i,
        sites: all.clone(),
    };
    vec![
        (
            "w2-temporal".into(),
            micro_config(2, shift(Fraction::ZERO, Fraction::EIGHTH)),
        ),
        (
            "w2-modality".into(),
            micro_config(2, shift(Fraction::EIGHTH, Fraction::ZERO)),
        ),
        (
            "w3-dual".into(),
            micro_config(3, shift(Fraction::EIGHTH, Fraction::EIGHTH)),
        ),
        (
            "w3-dual-unshared".into(),
            micro_config(3, shift(Fraction::EIGHTH, Fraction::EIGHTH)).share_stages(&[]),
        ),
    ]
}

/// Random parameters (biases included) and random positive-and-negative
/// input clips, so no ReLU sits exactly on its kink.
pub fn random_problem(cfg: &NetworkConfig, seed: u64) -> (ParamStore, Vec<ClipTensor>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamStore::init(cfg, rng.random());
    params.for_each_block_mut(|name, b| {
        let bias = name.ends_with("bias");
        for v in b.iter_mut() {
            if bias {
                *v = rng.random_range(-0.3..0.3);
            } else {
                *v *= 1.5;
            }
        }
    });
    let d = cfg.input;
    let clips = (0..cfg.modalities)
        .map(|_| {
            ClipTensor::from_fn(d.channels, d.frames, d.height, d.width, |_, _, _, _| {
                rng.random_range(-1.0..1.0)
            })
            .expect("valid dims")
        })
        .collect();
    let label = rng.random_range(0..cfg.num_classes);
    (params, clips, label)
}

/// Compares every parameter gradient against central differences.
#[allow(clippy::too_many_arguments)]
pub fn check_case(
    case: &str,
    cfg: &NetworkConfig,
    params: &ParamStore,
    clips: &[ClipTensor],
    label: usize,
    eps: f64,
    tol: f64,
    hooks: BackwardHooks,
) -> Result<Vec<BlockCheck>> {
    let (_, tape) = forward_clips(clips, cfg, params)?;
    let grads = backward_with_hooks(&tape, label, cfg, params, hooks)?;

    let layout = params.block_layout();
    let mut analytic_blocks = Vec::with_capacity(layout.len());
    grads.for_each_block(|_, g| analytic_blocks.push(g.to_vec()));

    let mut probe = params.clone();
    let mut out = Vec::with_capacity(layout.len());
    for (b, (name, len)) in layout.iter().enumerate() {
        let mut worst = (0.0, 0, 0.0, 0.0);
        for j in 0..*len {
            let numeric = {
                let orig = nth_value(&probe, b, j);
                set_nth_value(&mut probe, b, j, orig + eps);
                let plus = sample_loss(clips, label, cfg, &probe)?;
                set_nth_value(&mut probe, b, j, orig - eps);
                let minus = sample_loss(clips, label, cfg, &probe)?;
                set_nth_value(&mut probe, b, j, orig);
                (plus - minus) / (2.0 * eps)
            };
            let analytic = analytic_blocks[b][j];
            let err = relative_error(analytic, numeric);
            if err >= worst.0 {
                worst = (err, j, analytic, numeric);
            }
        }
        out.push(BlockCheck {
            case: case.to_string(),
            block: name.clone(),
            entries: *len,
            max_rel_err: worst.0,
            worst_index: worst.1,
            analytic: worst.2,
            numeric: worst.3,
            passed: worst.0 <= tol,
        });
    }
    Ok(out)
}

fn nth_value(p: &ParamStore, block: usize, j: usize) -> f64 {
    let mut b = 0;
    let mut v = 0.0;
    p.for_each_block(|_, blk| {
        if b == block {
            v = blk[j];
        }
        b += 1;
    });
    v
}

fn set_nth_value(p: &mut ParamStore, block: usize, j: usize, value: f64) {
    let mut b = 0;
    p.for_each_block_mut(|_, blk| {
        if b == block {
            blk[j] = value;
        }
        b += 1;
    });
}

/// Runs every micro case with parameters derived from `seed`.
pub fn run_gradcheck(seed: u64, eps: f64, tol: f64, hooks: BackwardHooks) -> Result<GradcheckReport> {
    let mut blocks = Vec::new();
    for (n, (name, cfg)) in micro_cases().into_iter().enumerate() {
        cfg.validate()?;
        let (params, clips, label) = random_problem(&cfg, seed.wrapping_add(n as u64));
        blocks.extend(check_case(&name, &cfg, &params, &clips, label, eps, tol, hooks)?);
    }
    Ok(GradcheckReport { eps, tol, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((relative_error(0.0, 1e-9) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn micro_cases_are_valid() {
        for (name, cfg) in micro_cases() {
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.shift.sites, vec![1, 2, 3, 4]);
        }
    }
}
