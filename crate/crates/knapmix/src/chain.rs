//! The lazy single-flip chain on the feasible set, with seeded, replayable
//! trajectories.
//!
//! One step consumes exactly one 64-bit draw from a ChaCha8 stream, reduced
//! modulo `2n` to a proposal `u`:
//!
//! * `u >= n`: hold in place (the lazy half of the kernel);
//! * `u < n`: propose flipping item `u+1`; accept iff the flipped vector
//!   stays within budget, otherwise hold.
//!
//! The modulo reduction keeps steps one-draw-exact and replayable; its bias
//! is below `2n / 2^64` and invisible at any tested scale. Replicates are
//! decorrelated by ChaCha8 stream selection: replicate `r` of seed `s` reads
//! from `ChaCha8Rng::seed_from_u64(s)` with `set_stream(r)`, so any subset of
//! replicates can be reproduced independently and in any order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{KnapsackInstance, Solution};

/// A chain configuration: instance, seed, and a feasible start state.
#[derive(Debug, Clone)]
pub struct ChainConfig {
    instance: KnapsackInstance,
    seed: u64,
    start: Solution,
}

impl ChainConfig {
    /// Starts from the all-zeros vector, which is feasible for every
    /// instance.
    pub fn new(instance: KnapsackInstance, seed: u64) -> Self {
        let start = Solution::zeros(instance.item_count());
        Self {
            instance,
            seed,
            start,
        }
    }

    /// Starts from an arbitrary feasible state.
    pub fn with_start(instance: KnapsackInstance, seed: u64, start: Solution) -> Result<Self> {
        if !instance.is_feasible(start.bits())? {
            return Err(Error::InfeasibleState {
                role: "start",
                bits: start.to_bitstring(),
            });
        }
        Ok(Self {
            instance,
            seed,
            start,
        })
    }

    pub fn instance(&self) -> &KnapsackInstance {
        &self.instance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn start(&self) -> &Solution {
        &self.start
    }
}

/// The replicate-indexed substream of a seed. Stream 0 backs [`run`];
/// replicate `r` of [`sample`] reads stream `r`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// What a single step did with its draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    /// `u >= n`: the lazy hold.
    LazyHold,
    /// `u < n` but the proposed flip would exceed the budget.
    Rejected(usize),
    /// The flip at this item index (0-based) was applied.
    Moved(usize),
}

/// Per-trajectory diagnostics. Lazy holds and rejected proposals leave the
/// state equally unchanged; they are distinguished only here.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StepCounters {
    pub lazy_holds: u64,
    pub rejected_proposals: u64,
    pub accepted_moves: u64,
}

/// The visited state sequence of one seeded walk.
#[derive(Debug, Clone)]
pub struct Trajectory {
    states: Vec<Solution>,
    counters: StepCounters,
}

impl Trajectory {
    /// Number of steps taken (`states` has one more entry).
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn states(&self) -> &[Solution] {
        &self.states
    }

    pub fn last(&self) -> &Solution {
        self.states.last().expect("trajectory holds the start state")
    }

    pub fn counters(&self) -> StepCounters {
        self.counters
    }
}

/// One transition of the chain under a fixed draw `u` in `0..2n`.
///
/// Exposed for tests and diagnostics; the loops below inline the same logic.
pub fn step(
    instance: &KnapsackInstance,
    state: &Solution,
    draw: u64,
) -> Result<(Solution, StepOutcome)> {
    let weight = instance.weight(state.bits())?;
    if weight > instance.budget() {
        return Err(Error::InfeasibleState {
            role: "current",
            bits: state.to_bitstring(),
        });
    }
    let n = instance.item_count() as u64;
    assert!(draw < 2 * n, "draw {draw} is outside 0..{}", 2 * n);
    let mut bits = state.bits().to_vec();
    let mut w = weight;
    let outcome = step_in_place(instance, &mut bits, &mut w, draw);
    Ok((Solution::from_bits(bits), outcome))
}

fn step_in_place(
    instance: &KnapsackInstance,
    bits: &mut [bool],
    weight: &mut u64,
    draw: u64,
) -> StepOutcome {
    let n = instance.item_count() as u64;
    if draw >= n {
        return StepOutcome::LazyHold;
    }
    let i = draw as usize;
    let a_i = instance.weights()[i];
    if bits[i] {
        bits[i] = false;
        *weight -= a_i;
        StepOutcome::Moved(i)
    } else if *weight + a_i <= instance.budget() {
        bits[i] = true;
        *weight += a_i;
        StepOutcome::Moved(i)
    } else {
        StepOutcome::Rejected(i)
    }
}

/// Runs `steps` transitions on stream 0 of the seed, recording every state.
pub fn run(config: &ChainConfig, steps: u64) -> Trajectory {
    let instance = &config.instance;
    let mut rng = stream_rng(config.seed, 0);
    let mut bits = config.start.bits().to_vec();
    let mut weight = instance
        .weight(&bits)
        .expect("start state has the instance dimension");
    let mut states = Vec::with_capacity(steps as usize + 1);
    states.push(config.start.clone());
    let mut counters = StepCounters::default();
    let two_n = 2 * instance.item_count() as u64;
    for _ in 0..steps {
        let draw = rng.next_u64() % two_n;
        match step_in_place(instance, &mut bits, &mut weight, draw) {
            StepOutcome::LazyHold => counters.lazy_holds += 1,
            StepOutcome::Rejected(_) => counters.rejected_proposals += 1,
            StepOutcome::Moved(_) => counters.accepted_moves += 1,
        }
        states.push(Solution::from_bits(bits.clone()));
    }
    Trajectory { states, counters }
}

/// The end state of one replicate, without recording the walk.
fn run_replicate(config: &ChainConfig, steps: u64, replicate: u64) -> Solution {
    let mut rng = stream_rng(config.seed, replicate);
    end_state(&config.instance, &config.start, steps, &mut rng)
}

/// Runs `steps` transitions from `start` on an already-positioned stream.
pub(crate) fn end_state(
    instance: &KnapsackInstance,
    start: &Solution,
    steps: u64,
    rng: &mut ChaCha8Rng,
) -> Solution {
    let mut bits = start.bits().to_vec();
    let mut weight = instance
        .weight(&bits)
        .expect("start state has the instance dimension");
    let two_n = 2 * instance.item_count() as u64;
    for _ in 0..steps {
        let draw = rng.next_u64() % two_n;
        step_in_place(instance, &mut bits, &mut weight, draw);
    }
    Solution::from_bits(bits)
}

/// End states of `count` independent replicates (streams `0..count`), each
/// run for `steps` transitions. Replicates are bitwise reproducible in any
/// execution order.
pub fn sample(config: &ChainConfig, steps: u64, count: u64) -> Vec<Solution> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count)
            .into_par_iter()
            .map(|r| run_replicate(config, steps, r))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(|r| run_replicate(config, steps, r)).collect()
    }
}
