//! Monte Carlo estimate of the routed-expert load imbalance factor.
//!
//! Each trial routes `tokens` tokens, each to `MA` distinct experts chosen
//! uniformly from `MR`. The trial's imbalance is the busiest expert's load
//! divided by the clamped mean load `max(tokens*MA/MR, 1)`; the estimate is
//! the mean over trials.
//!
//! Trial `i` draws from ChaCha8 seeded with `seed` on stream `i`, so the
//! result does not depend on how trials are scheduled across threads.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MoeParams;

pub const DEFAULT_TRIALS: u64 = 1_000_000;
/// (routed, active, tokens, trials, seed).
type MemoKey = (u64, u64, u64, u64, u64);

pub const DEFAULT_SEED: u64 = 0x5EED_0FE7;
/// Expert selections per estimate before trials start being cut back.
pub const DEFAULT_DRAW_BUDGET: u64 = 1 << 26;
pub const DEFAULT_MIN_TRIALS: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoeImbalance {
    pub mi: f64,
    pub trials: u64,
    pub seed: u64,
    pub tokens: u64,
}

struct Scratch {
    load: Vec<u32>,
    taken: Vec<u64>,
    perm: Vec<u32>,
}

impl Scratch {
    fn new(mr: usize) -> Self {
        Self {
            load: vec![0; mr],
            taken: vec![0; mr.div_ceil(64)],
            perm: (0..mr as u32).collect(),
        }
    }
}

fn trial_max_load(mr: usize, ma: usize, tokens: u64, seed: u64, trial: u64, s: &mut Scratch) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    s.load.fill(0);
    // Rejection is cheap while few bins are taken; otherwise shuffle a prefix.
    let rejection = ma * 2 <= mr;
    for _ in 0..tokens {
        if rejection {
            s.taken.fill(0);
            let mut picked = 0;
            while picked < ma {
                let e = rng.random_range(0..mr);
                let (w, bit) = (e / 64, 1u64 << (e % 64));
                if s.taken[w] & bit == 0 {
                    s.taken[w] |= bit;
                    s.load[e] += 1;
                    picked += 1;
                }
            }
        } else {
            for i in 0..ma {
                let j = rng.random_range(i..mr);
                s.perm.swap(i, j);
                s.load[s.perm[i] as usize] += 1;
            }
        }
    }
    s.load.iter().copied().max().unwrap_or(0) as u64
}

pub fn estimate_imbalance(mr: u64, ma: u64, tokens: u64, trials: u64, seed: u64) -> Result<MoeImbalance> {
    if mr == 0 || ma == 0 {
        return Err(Error::domain("imbalance", "expert counts must be >= 1"));
    }
    if ma > mr {
        return Err(Error::domain(
            "imbalance",
            format!("active experts ({ma}) exceed routed experts ({mr})"),
        ));
    }
    if tokens == 0 || trials == 0 {
        return Err(Error::domain("imbalance", "tokens and trials must be >= 1"));
    }
    if tokens.checked_mul(ma).is_none_or(|n| n > u32::MAX as u64) {
        return Err(Error::domain(
            "imbalance",
            format!("{tokens} tokens overflow a bin counter"),
        ));
    }
    let (mr_u, ma_u) = (mr as usize, ma as usize);
    let total: u64 = (0..trials)
        .into_par_iter()
        .map_init(
            || Scratch::new(mr_u),
            |s, t| trial_max_load(mr_u, ma_u, tokens, seed, t, s),
        )
        .sum();
    let mean_load = (tokens as f64 * ma as f64 / mr as f64).max(1.0);
    Ok(MoeImbalance {
        mi: total as f64 / trials as f64 / mean_load,
        trials,
        seed,
        tokens,
    })
}

/// How sweeps obtain the imbalance factor for a given token count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImbalanceSettings {
    /// Use this value for every batch instead of sampling (1.0 = ideal router).
    pub fixed: Option<f64>,
    pub trials: u64,
    pub seed: u64,
    /// Upper bound on `trials * tokens * MA` per estimate.
    pub draw_budget: u64,
    /// Trials never drop below this, whatever the budget.
    pub min_trials: u64,
}

impl Default for ImbalanceSettings {
    fn default() -> Self {
        Self {
            fixed: None,
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            draw_budget: DEFAULT_DRAW_BUDGET,
            min_trials: DEFAULT_MIN_TRIALS,
        }
    }
}

impl ImbalanceSettings {
    pub fn fixed(mi: f64) -> Self {
        Self {
            fixed: Some(mi),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(mi) = self.fixed {
            if !(mi.is_finite() && mi >= 1.0) {
                return Err(Error::domain(
                    "imbalance",
                    format!("fixed value must be >= 1, got {mi}"),
                ));
            }
        }
        if self.trials == 0 || self.min_trials == 0 {
            return Err(Error::domain("imbalance", "trials must be >= 1"));
        }
        Ok(())
    }

    pub fn trials_for(&self, tokens: u64, ma: u64) -> u64 {
        let per_trial = tokens.saturating_mul(ma).max(1);
        (self.draw_budget / per_trial).max(self.min_trials).min(self.trials)
    }

    /// The imbalance factor for `tokens` routed tokens. Sampled results are
    /// memoized process-wide; the estimate is a pure function of its inputs.
    pub fn resolve(&self, moe: &MoeParams, tokens: u64) -> Result<f64> {
        if let Some(mi) = self.fixed {
            return Ok(mi);
        }
        let trials = self.trials_for(tokens, moe.active_experts);
        let key = (moe.routed_experts, moe.active_experts, tokens, trials, self.seed);
        static MEMO: OnceLock<Mutex<HashMap<MemoKey, f64>>> = OnceLock::new();
        let memo = MEMO.get_or_init(Default::default);
        if let Some(&mi) = memo.lock().expect("memo poisoned").get(&key) {
            return Ok(mi);
        }
        let mi = estimate_imbalance(key.0, key.1, tokens, trials, self.seed)?.mi;
        memo.lock().expect("memo poisoned").insert(key, mi);
        Ok(mi)
    }
}
