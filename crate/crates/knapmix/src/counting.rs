//! Approximate counting of the feasible set driven by the sampler.
//!
//! The count telescopes over prefix instances: with `Omega_i` the feasible
//! set of `(a_1..a_i, b)`, the ratio `r_i = |Omega_{i-1}| / |Omega_i|` is the
//! probability that a uniform element of `Omega_i` has item `i` unpacked,
//! and `N = prod 1/r_i`. Dropping item `i` maps the complement injectively
//! into `Omega_{i-1}`, so every true ratio lies in `[1/2, 1]` and the
//! estimator never divides by anything small.
//!
//! Each ratio is estimated from `m = ceil(74 n / eps^2)` draws, each drawn
//! by running the chain for the cubic bound at accuracy `eps / (8n)` so that
//! sampler bias is second-order against estimator variance; the whole
//! product is repeated `ceil(8 ln(2 / delta))` times and the median replicate
//! is returned. The constants 74 and 8 are conventional Chebyshev/Chernoff
//! choices, not tuned values.
//!
//! Randomness: draw `s` of level `i` in replicate `r` reads ChaCha8 stream
//! `(r << 40) | (i << 32) | s` of the caller's seed, so any draw can be
//! reproduced in isolation and levels can run concurrently.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::One;
use serde::Serialize;

use crate::analysis::theorem_bound;
use crate::chain::{end_state, stream_rng};
use crate::error::{Error, Result};
use crate::instance::{KnapsackInstance, Solution, SolutionSet};

/// A source of (approximately) uniform samples of a prefix instance's
/// feasible set, addressed by (seed, stream) for reproducibility.
pub trait LevelSampler: Sync {
    fn draw(&self, prefix: &KnapsackInstance, seed: u64, stream: u64) -> Solution;

    /// Steps each draw runs for, per level; purely informational.
    fn steps_per_level(&self) -> Vec<u64>;
}

/// The production sampler: the lazy chain from all-zeros, run for the cubic
/// bound at accuracy `eps / (8n)` on every level.
pub struct ChainLevelSampler {
    steps: Vec<u64>,
}

impl ChainLevelSampler {
    pub fn new(instance: &KnapsackInstance, epsilon: f64) -> Result<Self> {
        let n = instance.item_count();
        let per_sample_accuracy = epsilon / (8.0 * n as f64);
        let steps = (1..=n)
            .map(|i| theorem_bound(i, per_sample_accuracy))
            .collect::<Result<Vec<u64>>>()?;
        Ok(Self { steps })
    }
}

impl LevelSampler for ChainLevelSampler {
    fn draw(&self, prefix: &KnapsackInstance, seed: u64, stream: u64) -> Solution {
        let start = Solution::zeros(prefix.item_count());
        let mut rng = stream_rng(seed, stream);
        end_state(prefix, &start, self.steps[prefix.item_count() - 1], &mut rng)
    }

    fn steps_per_level(&self) -> Vec<u64> {
        self.steps.clone()
    }
}

/// Exactly uniform draws from enumerated level sets; isolates estimator
/// behaviour from sampler convergence.
pub struct ExactLevelSampler {
    sets: Vec<SolutionSet>,
}

impl ExactLevelSampler {
    pub fn new(instance: &KnapsackInstance, enum_cap: usize) -> Result<Self> {
        let sets = (1..=instance.item_count())
            .map(|i| instance.prefix(i)?.enumerate_with_cap(enum_cap))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { sets })
    }
}

impl LevelSampler for ExactLevelSampler {
    fn draw(&self, prefix: &KnapsackInstance, seed: u64, stream: u64) -> Solution {
        let set = &self.sets[prefix.item_count() - 1];
        let mut rng = stream_rng(seed, stream);
        use rand::RngCore;
        let idx = (rng.next_u64() % set.count() as u64) as usize;
        set.get(idx).clone()
    }

    fn steps_per_level(&self) -> Vec<u64> {
        vec![0; self.sets.len()]
    }
}

/// One finished estimate: `estimate = prod 1/ratio` over the reported
/// (median replicate's) per-level ratios.
#[derive(Debug, Clone, Serialize)]
pub struct CountEstimate {
    pub estimate: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub per_level_ratios: Vec<f64>,
    pub samples_per_level: u64,
    pub steps_per_level: Vec<u64>,
    pub replicates: u64,
    pub seed: u64,
}

/// Estimates `N` with the chain sampler.
pub fn approx_count(
    instance: &KnapsackInstance,
    epsilon: f64,
    delta: f64,
    seed: u64,
) -> Result<CountEstimate> {
    let sampler = ChainLevelSampler::new(instance, epsilon)?;
    approx_count_with_sampler(instance, epsilon, delta, seed, &sampler)
}

/// Estimates `N` with any sampler (used to validate the estimator against
/// exactly uniform draws).
pub fn approx_count_with_sampler<S: LevelSampler>(
    instance: &KnapsackInstance,
    epsilon: f64,
    delta: f64,
    seed: u64,
    sampler: &S,
) -> Result<CountEstimate> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    let n = instance.item_count();
    let samples = (74.0 * n as f64 / (epsilon * epsilon)).ceil() as u64;
    let replicates = (8.0 * (2.0 / delta).ln()).ceil() as u64;

    let one_replicate = |replicate: u64| -> Result<(f64, Vec<f64>)> {
        let mut ratios = vec![0.0f64; n];
        for level in (1..=n).rev() {
            let prefix = instance.prefix(level)?;
            let mut zeros = 0u64;
            for s in 0..samples {
                let stream = (replicate << 40) | ((level as u64) << 32) | s;
                let draw = sampler.draw(&prefix, seed, stream);
                if !draw.bits()[level - 1] {
                    zeros += 1;
                }
            }
            if zeros == 0 {
                return Err(Error::ZeroRatioEstimate { level, samples });
            }
            let floor = 1.0 / (2.0 * samples as f64);
            ratios[level - 1] = (zeros as f64 / samples as f64).max(floor);
        }
        let estimate = ratios.iter().map(|r| 1.0 / r).product();
        Ok((estimate, ratios))
    };

    #[cfg(feature = "parallel")]
    let mut runs: Vec<(f64, Vec<f64>)> = {
        use rayon::prelude::*;
        (0..replicates)
            .into_par_iter()
            .map(one_replicate)
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let mut runs: Vec<(f64, Vec<f64>)> = (0..replicates)
        .map(one_replicate)
        .collect::<Result<_>>()?;

    runs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let (estimate, per_level_ratios) = runs.swap_remove(runs.len() / 2);

    Ok(CountEstimate {
        estimate,
        epsilon,
        delta,
        per_level_ratios,
        samples_per_level: samples,
        steps_per_level: sampler.steps_per_level(),
        replicates,
        seed,
    })
}

/// The exact level ratio `|Omega_{i-1}| / |Omega_i|` from the exact counter,
/// for estimator validation; `i` ranges over `1..=n`.
pub fn ratio_truth(instance: &KnapsackInstance, i: usize) -> Result<BigRational> {
    let n = instance.item_count();
    if i == 0 || i > n {
        return Err(Error::InvalidInstance(format!(
            "level {i} is outside 1..={n}"
        )));
    }
    let above = if i == 1 {
        BigUint::one()
    } else {
        instance.prefix(i - 1)?.exact_count()
    };
    let below = instance.prefix(i)?.exact_count();
    Ok(BigRational::new(above.into(), below.into()))
}
