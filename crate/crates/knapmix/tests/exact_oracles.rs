//! Cross-validation of the float analysis path against the independent
//! exact-rational kernel, plus closed-form spectra where they exist.

mod support;

use knapmix::analysis::{
    eigendecompose, empirical_mixing_time, tv_distance_at, TransitionMatrix,
};
use knapmix::{KnapsackInstance, Solution};
use support::{fig1, seeded_instances, sol, ExactKernel};

fn matrix(inst: &KnapsackInstance) -> TransitionMatrix {
    TransitionMatrix::build(inst, 20, 4096).unwrap()
}

fn solution_from_mask(mask: u64, n: usize) -> Solution {
    Solution::from_bits((0..n).map(|i| (mask >> (n - 1 - i)) & 1 == 1).collect())
}

#[test]
fn tv_evolution_matches_the_rational_oracle() {
    let mut cases = vec![fig1()];
    cases.extend(seeded_instances(12, &[2, 3, 4, 5, 6], 30, 0xB00C));
    for inst in cases {
        let kernel = ExactKernel::build(inst.weights(), inst.budget());
        let m = matrix(&inst);
        assert_eq!(kernel.order(), m.order());
        let n = inst.item_count();
        for &start_mask in kernel.masks.iter().take(3) {
            let start = solution_from_mask(start_mask, n);
            for t in [0u64, 1, 2, 5, 17, 60] {
                let exact = kernel.tv_f64(start_mask, t);
                let float = tv_distance_at(&m, &start, t).unwrap();
                assert!(
                    (exact - float).abs() < 1e-11,
                    "TV mismatch at t={t} on {inst:?}: {exact} vs {float}"
                );
            }
        }
    }
}

#[test]
fn mixing_times_match_the_rational_oracle_exactly() {
    let mut cases = vec![fig1()];
    cases.extend(seeded_instances(10, &[2, 3, 4, 5], 25, 0x5EED));
    for inst in cases {
        let kernel = ExactKernel::build(inst.weights(), inst.budget());
        let m = matrix(&inst);
        let n = inst.item_count();
        let zeros_mask = 0u64;
        let zeros = Solution::zeros(n);
        for (num, den) in [(1u64, 10u64), (1, 100)] {
            let eps = num as f64 / den as f64;
            let oracle = kernel.mixing_time(zeros_mask, num, den, 100_000);
            let float = empirical_mixing_time(&m, &zeros, eps).unwrap();
            assert_eq!(oracle, float, "mixing mismatch at eps={eps} on {inst:?}");
        }
    }
}

#[test]
fn figure_instance_mixing_pins_certified_by_the_oracle() {
    let kernel = ExactKernel::build(&[5, 3, 2, 1], 9);
    // tau(0.01) = 14 and tau(0.1) = 7, established by exact arithmetic.
    assert_eq!(kernel.mixing_time(0, 1, 100, 1000), 14);
    assert_eq!(kernel.mixing_time(0, 1, 10, 1000), 7);
    // The cubic bound at eps = 0.01 is 473 steps; the exact TV there is far
    // below 1/100 from every start.
    for &mask in kernel.masks.iter() {
        assert!(kernel.tv_leq(mask, 473, 1, 100));
    }
}

#[test]
fn free_hypercube_spectrum_matches_the_closed_form() {
    // With the budget above the total weight every vector is feasible and
    // the kernel is the lazy walk on the n-cube, whose eigenvalues are
    // (2n - 2k) / (2n) with multiplicity C(n, k).
    let n = 6usize;
    let inst = KnapsackInstance::new(vec![1; n], n as u64).unwrap();
    let m = matrix(&inst);
    let eig = eigendecompose(&m).unwrap();
    let mut expected = Vec::new();
    for k in 0..=n {
        let value = (2 * n - 2 * k) as f64 / (2 * n) as f64;
        let multiplicity = (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1));
        expected.extend(std::iter::repeat(value).take(multiplicity));
    }
    expected.sort_by(|a, b| b.partial_cmp(a).unwrap());
    assert_eq!(eig.eigenvalues().len(), expected.len());
    for (got, want) in eig.eigenvalues().iter().zip(&expected) {
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
    // Gap of the lazy cube walk is exactly 1/n.
    assert!((eig.gap() - 1.0 / n as f64).abs() < 1e-10);
}

#[test]
fn spectral_gap_certifies_the_tv_curve_shape() {
    // TV(t) <= sqrt(N)/2 * lambda2^t for symmetric kernels; check the float
    // evolution respects the eigen-derived envelope on the figure instance.
    let inst = fig1();
    let m = matrix(&inst);
    let eig = eigendecompose(&m).unwrap();
    let lambda2 = eig.lambda2();
    for t in [5u64, 10, 20, 40] {
        let tv = tv_distance_at(&m, &sol("0000"), t).unwrap();
        let envelope = 0.5 * (m.order() as f64).sqrt() * lambda2.powi(t as i32);
        assert!(tv <= envelope + 1e-12, "t={t}: {tv} > {envelope}");
    }
}
