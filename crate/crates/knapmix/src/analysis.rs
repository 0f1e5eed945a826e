//! Exact transition matrix of the lazy chain, spectral quantities,
//! total-variation evolution, and the cubic mixing bound.
//!
//! Every entry of the chain's matrix is an integer multiple of `1/(2n)`, so
//! the matrix is stored exactly: a dense entry is reconstructed from the
//! single-flip adjacency and the per-state count of feasible flips.
//! Stationarity of the uniform distribution is therefore checked in integer
//! arithmetic at any order, while eigenvalues and distribution evolution use
//! `f64` with the tolerances stated on each operation.

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::instance::{KnapsackInstance, Solution, SolutionSet};
use crate::paths::{single_flip_adjacency, NO_EDGE};

/// Default limit on the number of states for dense-matrix analysis.
pub const DEFAULT_MATRIX_CAP: usize = 4096;

/// The lazy single-flip kernel over an enumerated solution set, stored
/// exactly as integer numerators over the fixed denominator `2n`.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    item_count: usize,
    states: SolutionSet,
    masks: Vec<u64>,
    adjacency: Vec<u32>,
    degrees: Vec<u32>,
}

impl TransitionMatrix {
    /// Enumerates the instance and builds the kernel, enforcing both caps.
    pub fn build(instance: &KnapsackInstance, enum_cap: usize, matrix_cap: usize) -> Result<Self> {
        let states = instance.enumerate_with_cap(enum_cap)?;
        if states.count() > matrix_cap {
            return Err(Error::MatrixCapExceeded {
                states: states.count() as u64,
                cap: matrix_cap,
            });
        }
        let adjacency = single_flip_adjacency(instance, &states)?;
        Ok(Self::from_parts(instance.item_count(), states, adjacency))
    }

    pub(crate) fn from_parts(item_count: usize, states: SolutionSet, adjacency: Vec<u32>) -> Self {
        let n = item_count;
        let degrees = (0..states.count())
            .map(|i| adjacency[i * n..(i + 1) * n].iter().filter(|&&e| e != NO_EDGE).count() as u32)
            .collect();
        let masks = states.iter().map(|s| s.mask()).collect();
        Self {
            item_count,
            states,
            masks,
            adjacency,
            degrees,
        }
    }

    /// Number of states `N`.
    pub fn order(&self) -> usize {
        self.states.count()
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn states(&self) -> &SolutionSet {
        &self.states
    }

    /// The common denominator `2n` of all entries.
    pub fn denominator(&self) -> u64 {
        2 * self.item_count as u64
    }

    /// Exact numerator of entry `(i, j)` over [`denominator`](Self::denominator).
    pub fn numerator(&self, i: usize, j: usize) -> u64 {
        let n = self.item_count;
        if i == j {
            return self.denominator() - self.degrees[i] as u64;
        }
        let xor = self.masks[i] ^ self.masks[j];
        if xor.count_ones() != 1 {
            return 0;
        }
        let bit = n - 1 - xor.trailing_zeros() as usize;
        if self.adjacency[i * n + bit] == j as u32 {
            1
        } else {
            0
        }
    }

    /// Entry `(i, j)` as a float.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.numerator(i, j) as f64 / self.denominator() as f64
    }

    /// Structural validity: flips pair up symmetrically, no self-edges, and
    /// every holding probability is at least 1/2.
    pub fn validate(&self) -> Result<()> {
        let n = self.item_count;
        for i in 0..self.order() {
            let mut degree = 0u32;
            for bit in 0..n {
                let j = self.adjacency[i * n + bit];
                if j == NO_EDGE {
                    continue;
                }
                degree += 1;
                let j = j as usize;
                if j == i {
                    return Err(Error::InvariantViolation(format!(
                        "state {i} has a self-edge on bit {bit}"
                    )));
                }
                if self.adjacency[j * n + bit] != i as u32 {
                    return Err(Error::InvariantViolation(format!(
                        "edge {i}->{j} on bit {bit} has no reverse: the matrix is not symmetric"
                    )));
                }
            }
            if degree != self.degrees[i] {
                return Err(Error::InvariantViolation(format!(
                    "state {i} has degree {degree} but records {}: row sum is not 1",
                    self.degrees[i]
                )));
            }
            if (degree as u64) > self.item_count as u64 {
                return Err(Error::InvariantViolation(format!(
                    "state {i} holds with probability below 1/2"
                )));
            }
        }
        Ok(())
    }

    /// Exact stationarity of the uniform vector: every column of numerators
    /// sums to `2n`, checked in integer arithmetic.
    pub fn uniform_is_stationary(&self) -> bool {
        let n = self.item_count;
        let mut column_sums: Vec<u64> = (0..self.order())
            .map(|j| self.denominator() - self.degrees[j] as u64)
            .collect();
        for i in 0..self.order() {
            for bit in 0..n {
                let j = self.adjacency[i * n + bit];
                if j != NO_EDGE {
                    column_sums[j as usize] += 1;
                }
            }
        }
        column_sums.iter().all(|&s| s == self.denominator())
    }

    /// Smallest diagonal numerator; the holding-probability floor is
    /// `min_diagonal_numerator / (2n)`.
    pub fn min_diagonal_numerator(&self) -> u64 {
        (0..self.order())
            .map(|i| self.denominator() - self.degrees[i] as u64)
            .min()
            .unwrap_or(self.denominator())
    }

    /// Dense `f64` copy for eigenvalue work.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.item_count;
        let order = self.order();
        let denom = self.denominator() as f64;
        let mut dense = DMatrix::zeros(order, order);
        for i in 0..order {
            dense[(i, i)] = (self.denominator() - self.degrees[i] as u64) as f64 / denom;
            for bit in 0..n {
                let j = self.adjacency[i * n + bit];
                if j != NO_EDGE {
                    dense[(i, j as usize)] = 1.0 / denom;
                }
            }
        }
        dense
    }

    /// `out = p P`, exact up to one rounding per accumulation: the kernel is
    /// applied through the adjacency, not a dense product.
    pub fn matvec(&self, p: &[f64], out: &mut [f64]) {
        let n = self.item_count;
        let denom = self.denominator() as f64;
        for (i, slot) in out.iter_mut().enumerate() {
            let mut acc = (self.denominator() - self.degrees[i] as u64) as f64 * p[i];
            for bit in 0..n {
                let j = self.adjacency[i * n + bit];
                if j != NO_EDGE {
                    acc += p[j as usize];
                }
            }
            *slot = acc / denom;
        }
    }

    fn state_index(&self, state: &Solution) -> Result<usize> {
        self.states.index_of(state).ok_or_else(|| Error::InfeasibleState {
            role: "start",
            bits: state.to_bitstring(),
        })
    }
}

/// Full symmetric eigendecomposition, eigenvalues sorted descending.
pub struct EigenDecomposition {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl EigenDecomposition {
    /// Eigenvalues in descending order; the first is 1 up to 1e-10.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn lambda2(&self) -> f64 {
        if self.values.len() == 1 {
            0.0
        } else {
            self.values[1]
        }
    }

    /// `1 - lambda_2`; a single-state chain has gap 1 by convention.
    pub fn gap(&self) -> f64 {
        1.0 - self.lambda2()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.values.last().expect("at least one eigenvalue")
    }

    /// Exact-evolution total variation from every start simultaneously:
    /// row `x` of `P^t` against uniform, assembled as `V diag(lambda^t) V^T`.
    pub fn tv_from_every_start(&self, t: u64) -> Vec<f64> {
        let order = self.values.len();
        let uniform = 1.0 / order as f64;
        if t == 0 {
            return vec![1.0 - uniform; order];
        }
        let mut scaled = self.vectors.clone();
        for (col, &value) in self.values.iter().enumerate() {
            let factor = if value <= 0.0 {
                0.0
            } else {
                value.powf(t as f64)
            };
            scaled.column_mut(col).scale_mut(factor);
        }
        let power = &scaled * self.vectors.transpose();
        (0..order)
            .map(|x| {
                0.5 * (0..order)
                    .map(|y| (power[(x, y)] - uniform).abs())
                    .sum::<f64>()
            })
            .collect()
    }
}

/// Eigendecomposition of the (symmetric) kernel. Errors if the matrix fails
/// [`TransitionMatrix::validate`].
pub fn eigendecompose(matrix: &TransitionMatrix) -> Result<EigenDecomposition> {
    matrix.validate()?;
    let order = matrix.order();
    if order == 1 {
        return Ok(EigenDecomposition {
            values: vec![1.0],
            vectors: DMatrix::from_element(1, 1, 1.0),
        });
    }
    let eigen = nalgebra::SymmetricEigen::new(matrix.to_dense());
    let mut order_by: Vec<usize> = (0..order).collect();
    order_by.sort_by(|&a, &b| eigen.eigenvalues[b].partial_cmp(&eigen.eigenvalues[a]).unwrap());
    let values: Vec<f64> = order_by.iter().map(|&i| eigen.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(order, order);
    for (dst, &src) in order_by.iter().enumerate() {
        vectors.set_column(dst, &eigen.eigenvectors.column(src));
    }
    Ok(EigenDecomposition { values, vectors })
}

/// `1 - lambda_2` of the kernel (1 for a single-state chain).
pub fn spectral_gap(matrix: &TransitionMatrix) -> Result<f64> {
    Ok(eigendecompose(matrix)?.gap())
}

/// Independent spectral route: power iteration for the top eigenvalue, and
/// deflation against the exact uniform eigenvector for the second.
#[derive(Debug, Clone, Copy)]
pub struct PowerIterationEstimate {
    pub lambda1: f64,
    pub lambda2: f64,
    pub iterations: u64,
    pub converged: bool,
}

/// Estimates the top two eigenvalues by power iteration to residual
/// `tolerance` (in the 2-norm), restarting from three seeded vectors and
/// keeping the largest converged second eigenvalue.
pub fn power_iteration_top2(
    matrix: &TransitionMatrix,
    seed: u64,
    tolerance: f64,
    max_iterations: u64,
) -> Result<PowerIterationEstimate> {
    matrix.validate()?;
    let order = matrix.order();
    if order == 1 {
        return Ok(PowerIterationEstimate {
            lambda1: 1.0,
            lambda2: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    let run = |stream: u64, deflate: bool| -> (f64, u64, bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut v: Vec<f64> = (0..order)
            .map(|_| (rng.next_u64() as f64 / u64::MAX as f64) - 0.5)
            .collect();
        let mut pv = vec![0.0; order];
        let mut rho = 0.0;
        for it in 1..=max_iterations {
            if deflate {
                let mean = v.iter().sum::<f64>() / order as f64;
                v.iter_mut().for_each(|x| *x -= mean);
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return (0.0, it, false);
            }
            v.iter_mut().for_each(|x| *x /= norm);
            matrix.matvec(&v, &mut pv);
            rho = v.iter().zip(&pv).map(|(a, b)| a * b).sum::<f64>();
            let residual = v
                .iter()
                .zip(&pv)
                .map(|(a, b)| (b - rho * a) * (b - rho * a))
                .sum::<f64>()
                .sqrt();
            if residual <= tolerance {
                return (rho, it, true);
            }
            std::mem::swap(&mut v, &mut pv);
        }
        (rho, max_iterations, false)
    };

    let (lambda1, its1, conv1) = run(0, false);
    let mut lambda2 = f64::NEG_INFINITY;
    let mut its2 = 0;
    let mut conv2 = false;
    for stream in 1..=3u64 {
        let (rho, its, converged) = run(stream, true);
        its2 += its;
        if converged {
            conv2 = true;
            lambda2 = lambda2.max(rho);
        } else if !conv2 {
            lambda2 = lambda2.max(rho);
        }
    }
    Ok(PowerIterationEstimate {
        lambda1,
        lambda2,
        iterations: its1 + its2,
        converged: conv1 && conv2,
    })
}

/// Total variation `1/2 sum_y |p_t(y) - 1/N|` of the point mass at `start`
/// evolved by `t` exact kernel applications.
pub fn tv_distance_at(matrix: &TransitionMatrix, start: &Solution, t: u64) -> Result<f64> {
    let idx = matrix.state_index(start)?;
    let order = matrix.order();
    let mut p = vec![0.0; order];
    p[idx] = 1.0;
    let mut scratch = vec![0.0; order];
    for _ in 0..t {
        matrix.matvec(&p, &mut scratch);
        std::mem::swap(&mut p, &mut scratch);
    }
    Ok(tv_from_uniform(&p))
}

fn tv_from_uniform(p: &[f64]) -> f64 {
    let uniform = 1.0 / p.len() as f64;
    0.5 * p.iter().map(|&x| (x - uniform).abs()).sum::<f64>()
}

/// The exact curve `(t, TV(t))` for `t = 0..=horizon` from one start, from a
/// single incremental evolution.
pub fn tv_curve(
    matrix: &TransitionMatrix,
    start: &Solution,
    horizon: u64,
) -> Result<Vec<(u64, f64)>> {
    let idx = matrix.state_index(start)?;
    let order = matrix.order();
    let mut p = vec![0.0; order];
    p[idx] = 1.0;
    let mut scratch = vec![0.0; order];
    let mut curve = Vec::with_capacity(horizon as usize + 1);
    curve.push((0, tv_from_uniform(&p)));
    for t in 1..=horizon {
        matrix.matvec(&p, &mut scratch);
        std::mem::swap(&mut p, &mut scratch);
        curve.push((t, tv_from_uniform(&p)));
    }
    Ok(curve)
}

/// Smallest `t` with `TV(t) <= epsilon`, located by doubling followed by
/// binary search; both phases re-evolve from checkpointed distributions, so
/// the total work stays linear in the answer. Valid because the curve is
/// non-increasing for this lazy reversible chain.
pub fn empirical_mixing_time(
    matrix: &TransitionMatrix,
    start: &Solution,
    epsilon: f64,
) -> Result<u64> {
    check_epsilon(epsilon)?;
    let idx = matrix.state_index(start)?;
    let order = matrix.order();
    let mut p_lo = vec![0.0; order];
    p_lo[idx] = 1.0;
    if tv_from_uniform(&p_lo) <= epsilon {
        return Ok(0);
    }
    let evolve = |from: &[f64], steps: u64| -> Vec<f64> {
        let mut p = from.to_vec();
        let mut scratch = vec![0.0; order];
        for _ in 0..steps {
            matrix.matvec(&p, &mut scratch);
            std::mem::swap(&mut p, &mut scratch);
        }
        p
    };
    let mut t_lo = 0u64;
    let mut t_hi = 1u64;
    let mut p_hi = evolve(&p_lo, 1);
    while tv_from_uniform(&p_hi) > epsilon {
        t_lo = t_hi;
        p_lo = p_hi;
        t_hi *= 2;
        p_hi = evolve(&p_lo, t_hi - t_lo);
    }
    // Invariant: TV(t_lo) > epsilon >= TV(t_hi).
    while t_hi - t_lo > 1 {
        let mid = t_lo + (t_hi - t_lo) / 2;
        let p_mid = evolve(&p_lo, mid - t_lo);
        if tv_from_uniform(&p_mid) <= epsilon {
            t_hi = mid;
        } else {
            t_lo = mid;
            p_lo = p_mid;
        }
    }
    Ok(t_hi)
}

/// The proven mixing bound `ceil(n^3 ln(16 / epsilon))`.
pub fn theorem_bound(n: usize, epsilon: f64) -> Result<u64> {
    assert!(n >= 1, "the bound needs at least one item");
    check_epsilon(epsilon)?;
    let steps = (n as f64).powi(3) * (16.0 / epsilon).ln();
    Ok(steps.ceil() as u64)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::EpsilonOutOfRange(epsilon))
    }
}
