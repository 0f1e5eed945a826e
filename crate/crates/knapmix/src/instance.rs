//! Knapsack instances, feasibility, exhaustive enumeration, and exact counting.
//!
//! An instance is a weight vector `a` and a budget `b`; the object of study is
//! the set of binary vectors `x` with `<a,x> <= b`. Weights and budget are
//! non-negative integers whose total fits in 63 bits, so every weight sum in
//! the library is exact and overflow-free.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigUint;
use num_traits::One;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default limit on `n` for exhaustive enumeration (2^20 vectors).
pub const DEFAULT_ENUM_CAP: usize = 20;

/// Hard ceiling on enumeration: solution indices are kept in `u64` masks.
pub const ENUM_HARD_CAP: usize = 62;

/// A 0-1 knapsack instance: weights `a_1..a_n` and budget `b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KnapsackInstance {
    weights: Vec<u64>,
    budget: u64,
}

impl KnapsackInstance {
    /// Builds an instance, enforcing `n >= 1` and the 63-bit overflow bound
    /// on `sum(weights) + budget`.
    pub fn new(weights: Vec<u64>, budget: u64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInstance(
                "at least one weight is required (n >= 1)".into(),
            ));
        }
        let total: u128 = weights.iter().map(|&w| w as u128).sum::<u128>() + budget as u128;
        if total >= (1u128 << 63) {
            return Err(Error::InvalidInstance(format!(
                "sum of weights plus budget is {total}, which does not fit in 63 bits"
            )));
        }
        Ok(Self { weights, budget })
    }

    /// Parses the shared JSON instance format:
    /// `{"weights": [5, 3, 2, 1], "budget": 9}`.
    ///
    /// Diagnostics name the offending field; weight indices are 1-based.
    pub fn from_json_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            weights: Option<Vec<serde_json::Value>>,
            budget: Option<serde_json::Value>,
        }
        let raw: Raw = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInstance(format!("malformed JSON: {e}")))?;
        let weights_raw = raw
            .weights
            .ok_or_else(|| Error::InvalidInstance("missing field \"weights\"".into()))?;
        let budget_raw = raw
            .budget
            .ok_or_else(|| Error::InvalidInstance("missing field \"budget\"".into()))?;

        let mut weights = Vec::with_capacity(weights_raw.len());
        for (idx, value) in weights_raw.iter().enumerate() {
            let w = value.as_u64().ok_or_else(|| {
                Error::InvalidInstance(format!(
                    "weight {} must be a non-negative integer, got {value}",
                    idx + 1
                ))
            })?;
            weights.push(w);
        }
        let budget = budget_raw.as_u64().ok_or_else(|| {
            Error::InvalidInstance(format!(
                "budget must be a non-negative integer, got {budget_raw}"
            ))
        })?;
        Self::new(weights, budget)
    }

    /// Seeded random instance: weights uniform in `1..=max_weight`, budget
    /// uniform in `0..=sum(weights)`.
    pub fn random<R: Rng>(n: usize, max_weight: u64, rng: &mut R) -> Self {
        assert!(n >= 1 && max_weight >= 1);
        let weights: Vec<u64> = (0..n).map(|_| rng.random_range(1..=max_weight)).collect();
        let total: u64 = weights.iter().sum();
        let budget = rng.random_range(0..=total);
        Self::new(weights, budget).expect("generated weights are within the 63-bit bound")
    }

    pub fn item_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    /// `<a,x>`, exact.
    pub fn weight(&self, bits: &[bool]) -> Result<u64> {
        if bits.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: bits.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(bits)
            .filter(|(_, &set)| set)
            .map(|(&w, _)| w)
            .sum())
    }

    /// True iff `<a,x> <= b`.
    pub fn is_feasible(&self, bits: &[bool]) -> Result<bool> {
        Ok(self.weight(bits)? <= self.budget)
    }

    /// All feasible solutions in canonical order, capped at
    /// [`DEFAULT_ENUM_CAP`] items.
    pub fn enumerate(&self) -> Result<SolutionSet> {
        self.enumerate_with_cap(DEFAULT_ENUM_CAP)
    }

    /// All feasible solutions in canonical order (ascending value of the bit
    /// vector read as a big-endian integer, item 1 most significant).
    pub fn enumerate_with_cap(&self, cap: usize) -> Result<SolutionSet> {
        let n = self.weights.len();
        let cap = cap.min(ENUM_HARD_CAP);
        if n > cap {
            return Err(Error::EnumerationCapExceeded {
                what: "exhaustive enumeration",
                cap,
                n,
            });
        }
        let mut solutions = Vec::new();
        for mask in 0u64..(1u64 << n) {
            let bits: Vec<bool> = (0..n).map(|i| (mask >> (n - 1 - i)) & 1 == 1).collect();
            if self.weight(&bits)? <= self.budget {
                solutions.push(Solution::from_bits(bits));
            }
        }
        Ok(SolutionSet { solutions })
    }

    /// Exact solution count via the two-branch recursion
    /// `N(i, b) = N(i+1, b) + N(i+1, b - a_i)`, base `N(n+1, b) = 1`,
    /// memoized on (remaining suffix, residual budget).
    pub fn exact_count(&self) -> BigUint {
        let mut memo: HashMap<(usize, u64), BigUint> = HashMap::new();
        count_suffix(&self.weights, self.budget, &mut memo)
    }

    /// The prefix instance `(a_1..a_i, b)`; `i` ranges over `1..=n`.
    pub fn prefix(&self, i: usize) -> Result<Self> {
        if i == 0 || i > self.weights.len() {
            return Err(Error::InvalidInstance(format!(
                "prefix length {i} is outside 1..={}",
                self.weights.len()
            )));
        }
        Ok(Self {
            weights: self.weights[..i].to_vec(),
            budget: self.budget,
        })
    }
}

fn count_suffix(weights: &[u64], budget: u64, memo: &mut HashMap<(usize, u64), BigUint>) -> BigUint {
    let Some((&first, rest)) = weights.split_first() else {
        return BigUint::one();
    };
    let key = (weights.len(), budget);
    if let Some(hit) = memo.get(&key) {
        return hit.clone();
    }
    let mut total = count_suffix(rest, budget, memo);
    if first <= budget {
        total += count_suffix(rest, budget - first, memo);
    }
    memo.insert(key, total.clone());
    total
}

/// A binary vector; the state of the chain. Operations that return a
/// `Solution` guarantee it is feasible for the instance they were given.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Solution {
    bits: Vec<bool>,
}

impl Solution {
    /// The all-zeros vector, feasible for every instance.
    pub fn zeros(n: usize) -> Self {
        Self {
            bits: vec![false; n],
        }
    }

    /// Wraps raw bits without any feasibility check.
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Parses a bitstring such as `"0101"` (item 1 first).
    pub fn parse(text: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(text.len());
        for ch in text.chars() {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => {
                    return Err(Error::InvalidInstance(format!(
                        "bitstring may contain only 0 and 1, got {other:?}"
                    )))
                }
            }
        }
        if bits.is_empty() {
            return Err(Error::InvalidInstance("empty bitstring".into()));
        }
        Ok(Self { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// The bits read as a big-endian integer (item 1 most significant).
    /// Meaningful for `n <= 62`, which enumeration guarantees.
    pub fn mask(&self) -> u64 {
        self.bits
            .iter()
            .fold(0u64, |acc, &bit| (acc << 1) | bit as u64)
    }

    pub fn to_bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

impl fmt::Display for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

impl Serialize for Solution {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_bitstring())
    }
}

/// Every feasible solution of one instance, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolutionSet {
    solutions: Vec<Solution>,
}

impl SolutionSet {
    pub fn count(&self) -> usize {
        self.solutions.len()
    }

    pub fn solutions(&self) -> &[Solution] {
        &self.solutions
    }

    pub fn get(&self, index: usize) -> &Solution {
        &self.solutions[index]
    }

    /// Position of `solution` in canonical order, if feasible.
    pub fn index_of(&self, solution: &Solution) -> Option<usize> {
        self.solutions.binary_search(solution).ok()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Solution> {
        self.solutions.iter()
    }
}
