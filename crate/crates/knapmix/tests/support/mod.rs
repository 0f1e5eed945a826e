//! Shared fixtures and independent oracles for the integration suites.
//!
//! The exact kernel here is built from first principles (brute-force
//! feasibility over raw masks, direct neighbor toggling, big-integer
//! arithmetic) so it shares no code path with the library's analysis
//! module; it is the ground truth the float implementation is checked
//! against.

#![allow(dead_code)]

use std::collections::HashSet;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use knapmix::paths::{CanonicalPath, FlipDirection};
use knapmix::{KnapsackInstance, Solution};

pub fn fig1() -> KnapsackInstance {
    KnapsackInstance::new(vec![5, 3, 2, 1], 9).unwrap()
}

pub fn sol(text: &str) -> Solution {
    Solution::parse(text).unwrap()
}

/// Seeded instance family: weights uniform in `1..=max_weight`, budget
/// uniform in `0..=sum`, sizes cycling through `sizes`.
pub fn seeded_instances(
    count: usize,
    sizes: &[usize],
    max_weight: u64,
    seed: u64,
) -> Vec<KnapsackInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| KnapsackInstance::random(sizes[k % sizes.len()], max_weight, &mut rng))
        .collect()
}

/// As [`seeded_instances`], but instances are redrawn until their solution
/// count stays within `max_states` (keeps dense eigenwork affordable).
pub fn seeded_instances_capped(
    count: usize,
    sizes: &[usize],
    max_weight: u64,
    seed: u64,
    max_states: u64,
) -> Vec<KnapsackInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut k = 0usize;
    while out.len() < count {
        let inst = KnapsackInstance::random(sizes[k % sizes.len()], max_weight, &mut rng);
        if inst.exact_count() <= BigUint::from(max_states) {
            out.push(inst);
            k += 1;
        }
    }
    out
}

/// Full structural check of one recorded canonical path, from the public
/// surface only: endpoints, feasibility of every state, flip/state
/// consistency, at most `n` flips with no index twice, and the zone
/// invariants (monotone matched prefix, prefix pinned to the target, tail
/// pinned to the source).
pub fn assert_path_structure(
    inst: &KnapsackInstance,
    v: &Solution,
    w: &Solution,
    path: &CanonicalPath,
) {
    let n = inst.item_count();
    let states = path.states();
    assert_eq!(states.first().unwrap(), v);
    assert_eq!(states.last().unwrap(), w);
    assert!(path.flip_count() <= n, "more than n flips");
    assert_eq!(states.len(), path.flip_count() + 1);

    let mut seen = HashSet::new();
    for (j, flip) in path.flips().iter().enumerate() {
        assert!(seen.insert(flip.index), "index {} flipped twice", flip.index);
        let before = &states[j];
        let after = &states[j + 1];
        for p in 0..n {
            if p == flip.index {
                assert_ne!(before.bits()[p], after.bits()[p]);
            } else {
                assert_eq!(before.bits()[p], after.bits()[p]);
            }
        }
        let went_up = !before.bits()[flip.index] && after.bits()[flip.index];
        assert_eq!(went_up, matches!(flip.direction, FlipDirection::Positive));
    }

    let mut last_matched = 0usize;
    for (j, state) in states.iter().enumerate() {
        assert!(
            inst.is_feasible(state.bits()).unwrap(),
            "infeasible intermediate state {state}"
        );
        let zones = path.zones_at(j).unwrap();
        assert!(zones.matched_end <= zones.heap_end && zones.heap_end <= n);
        assert!(zones.matched_end >= last_matched, "matched prefix shrank");
        last_matched = zones.matched_end;
        for p in 0..zones.matched_end {
            assert_eq!(state.bits()[p], w.bits()[p], "matched zone not pinned to target");
        }
        for p in zones.heap_end..n {
            assert_eq!(state.bits()[p], v.bits()[p], "untouched zone not pinned to source");
        }
    }
}

/// The lazy single-flip kernel rebuilt independently: states are raw masks
/// (item 1 = most significant), entries are integer numerators over `2n`,
/// and evolution is exact big-integer arithmetic.
pub struct ExactKernel {
    pub n: usize,
    pub masks: Vec<u64>,
    /// Per state: indices of single-flip neighbors inside `masks`.
    neighbors: Vec<Vec<usize>>,
}

impl ExactKernel {
    pub fn build(weights: &[u64], budget: u64) -> Self {
        let n = weights.len();
        assert!(n <= 24, "oracle is for desk-scale instances");
        let weight_of = |mask: u64| -> u64 {
            (0..n)
                .filter(|i| (mask >> (n - 1 - i)) & 1 == 1)
                .map(|i| weights[i])
                .sum()
        };
        let masks: Vec<u64> = (0..(1u64 << n)).filter(|&m| weight_of(m) <= budget).collect();
        let position = |mask: u64| masks.binary_search(&mask).ok();
        let neighbors = masks
            .iter()
            .map(|&mask| {
                (0..n)
                    .filter_map(|i| position(mask ^ (1u64 << (n - 1 - i))))
                    .collect()
            })
            .collect();
        Self { n, masks, neighbors }
    }

    pub fn order(&self) -> usize {
        self.masks.len()
    }

    fn index_of(&self, mask: u64) -> usize {
        self.masks.binary_search(&mask).expect("start must be feasible")
    }

    /// Exact distribution numerators after `t` steps from a point mass; the
    /// implicit denominator is `(2n)^t`.
    fn evolve(&self, start_mask: u64, t: u64) -> Vec<BigUint> {
        let order = self.order();
        let two_n = 2 * self.n as u64;
        let mut p = vec![BigUint::zero(); order];
        p[self.index_of(start_mask)] = BigUint::one();
        for _ in 0..t {
            let mut next = vec![BigUint::zero(); order];
            for (i, mass) in p.iter().enumerate() {
                if mass.is_zero() {
                    continue;
                }
                let hold = two_n - self.neighbors[i].len() as u64;
                next[i] += mass * hold;
                for &j in &self.neighbors[i] {
                    next[j] += mass;
                }
            }
            p = next;
        }
        p
    }

    /// Exact total variation from uniform after `t` steps, as a reduced
    /// rational.
    pub fn tv_at(&self, start_mask: u64, t: u64) -> BigRational {
        let order = self.order();
        let two_n = BigUint::from(2 * self.n as u64);
        let scale = two_n.pow(u32::try_from(t).expect("oracle horizon fits u32"));
        let p = self.evolve(start_mask, t);
        let numerator: BigUint = p
            .iter()
            .map(|mass| {
                let diff = BigInt::from(mass * order as u64) - BigInt::from(scale.clone());
                diff.abs().to_biguint().unwrap()
            })
            .sum();
        let denominator = BigUint::from(2 * order as u64) * scale;
        BigRational::new(numerator.into(), denominator.into())
    }

    pub fn tv_f64(&self, start_mask: u64, t: u64) -> f64 {
        self.tv_at(start_mask, t).to_f64().unwrap()
    }

    /// Exact verdict `TV(t) <= eps_num / eps_den`.
    pub fn tv_leq(&self, start_mask: u64, t: u64, eps_num: u64, eps_den: u64) -> bool {
        let eps = BigRational::new(BigInt::from(eps_num), BigInt::from(eps_den));
        self.tv_at(start_mask, t) <= eps
    }

    /// Smallest `t` with `TV(t) <= eps_num/eps_den`, by exact linear scan.
    pub fn mixing_time(&self, start_mask: u64, eps_num: u64, eps_den: u64, cap: u64) -> u64 {
        let eps = BigRational::new(BigInt::from(eps_num), BigInt::from(eps_den));
        let order = self.order();
        let two_n = 2 * self.n as u64;
        let mut p = vec![BigUint::zero(); order];
        p[self.index_of(start_mask)] = BigUint::one();
        let mut scale = BigUint::one();
        for t in 0..=cap {
            let numerator: BigUint = p
                .iter()
                .map(|mass| {
                    let diff = BigInt::from(mass * order as u64) - BigInt::from(scale.clone());
                    diff.abs().to_biguint().unwrap()
                })
                .sum();
            let denominator = BigUint::from(2 * order as u64) * &scale;
            if BigRational::new(numerator.into(), denominator.into()) <= eps {
                return t;
            }
            let mut next = vec![BigUint::zero(); order];
            for (i, mass) in p.iter().enumerate() {
                if mass.is_zero() {
                    continue;
                }
                let hold = two_n - self.neighbors[i].len() as u64;
                next[i] += mass * hold;
                for &j in &self.neighbors[i] {
                    next[j] += mass;
                }
            }
            p = next;
            scale *= two_n;
        }
        panic!("oracle mixing time exceeded the cap of {cap}");
    }
}
