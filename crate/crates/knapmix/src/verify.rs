//! The orchestrated audit suite behind `knapmix verify`: every structural
//! claim the library makes about one instance, checked end to end, with one
//! pass/fail outcome per check and the measured quantities alongside.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::analysis::{
    eigendecompose, empirical_mixing_time, power_iteration_top2, theorem_bound, TransitionMatrix,
};
use crate::error::Result;
use crate::instance::{KnapsackInstance, Solution};
use crate::paths::{audit_edges, audit_path_family, audit_prefix_bound, congestion_over};

/// One named check with its outcome and a short measured detail.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Quantities measured while verifying.
#[derive(Debug, Clone, Serialize)]
pub struct Measured {
    pub item_count: usize,
    pub solution_count: u64,
    pub max_load: u64,
    pub flow_cost: f64,
    pub max_path_len: usize,
    pub spectral_gap: f64,
    pub lambda2_power_iteration: f64,
    pub min_eigenvalue: f64,
    pub tau: BTreeMap<String, u64>,
    pub bound: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
    pub measured: Measured,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub enum_cap: usize,
    pub matrix_cap: usize,
    /// Start state for the per-start mixing time; all-zeros when `None`.
    pub start: Option<Solution>,
    pub epsilons: Vec<f64>,
    pub power_iteration_seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            enum_cap: crate::instance::DEFAULT_ENUM_CAP,
            matrix_cap: crate::analysis::DEFAULT_MATRIX_CAP,
            start: None,
            epsilons: vec![0.1, 0.01],
            power_iteration_seed: 0x6b6e61706d6978,
        }
    }
}

/// Runs the full audit suite on one instance. Fails (report-level) iff at
/// least one check fails; errors only on capacity or malformed input.
pub fn run_verification(
    instance: &KnapsackInstance,
    options: &VerifyOptions,
) -> Result<VerifyReport> {
    let n = instance.item_count();
    let set = instance.enumerate_with_cap(options.enum_cap)?;
    let solution_count = set.count() as u64;
    let mut checks = Vec::new();

    // Path family: feasible throughout, terminates at the target, at most n
    // flips, no index twice, matched prefix non-decreasing.
    let family = audit_path_family(instance, &set)?;
    checks.push(CheckOutcome {
        name: "canonical-path-family".into(),
        passed: family.violations.is_empty(),
        detail: if family.violations.is_empty() {
            format!(
                "{} ordered pairs, longest path {} flips",
                family.pairs, family.max_len
            )
        } else {
            family.violations[0].clone()
        },
    });

    // Per-edge endpoint determination at every traversal.
    let edges = audit_edges(instance, &set)?;
    checks.push(CheckOutcome {
        name: "edge-determination".into(),
        passed: edges.passed(),
        detail: if edges.passed() {
            format!("{} traversals clean", edges.traversals)
        } else {
            edges.violations[0].clone()
        },
    });

    // Prefix-determination counting bound for every anchor and prefix length.
    let mut prefix_ok = true;
    let mut prefix_detail = format!("{} (anchor, length) cases", set.count() * (n + 1) * 2);
    'outer: for z in set.iter() {
        for beta in 0..=n {
            if !audit_prefix_bound(instance, z, beta)? {
                prefix_ok = false;
                prefix_detail = format!("violated at z={z}, beta={beta}");
                break 'outer;
            }
        }
    }
    checks.push(CheckOutcome {
        name: "prefix-count-bound".into(),
        passed: prefix_ok,
        detail: prefix_detail,
    });

    // Edge loads against the 2N ceiling, and the flow cost against 4n; both
    // comparisons are integer-exact.
    let report = congestion_over(instance, set)?;
    let loads_ok = report.max_load() <= 2 * solution_count;
    let cost_ok =
        2 * n as u64 * report.max_load() <= 4 * n as u64 * solution_count.max(1);
    checks.push(CheckOutcome {
        name: "edge-load-bound".into(),
        passed: loads_ok && cost_ok,
        detail: format!(
            "max load {} vs 2N = {}, flow cost {:.3} vs 4n = {}",
            report.max_load(),
            2 * solution_count,
            report.flow_cost(),
            4 * n
        ),
    });

    // Kernel structure and exact uniform stationarity.
    let matrix = TransitionMatrix::build(instance, options.enum_cap, options.matrix_cap)?;
    let structural = matrix.validate().is_ok();
    let stationary = matrix.uniform_is_stationary();
    let lazy = matrix.min_diagonal_numerator() >= n as u64;
    checks.push(CheckOutcome {
        name: "kernel-structure".into(),
        passed: structural && stationary && lazy,
        detail: format!(
            "symmetric/stochastic: {structural}, uniform stationary (exact): {stationary}, \
             holding >= 1/2: {lazy}"
        ),
    });

    // Spectrum: nonnegative eigenvalues, simple top eigenvalue, and the
    // power-iteration cross-check of the top two to 1e-8.
    let eigen = eigendecompose(&matrix)?;
    let power = power_iteration_top2(&matrix, options.power_iteration_seed, 1e-11, 200_000)?;
    let nonneg = eigen.min_eigenvalue() >= -1e-10;
    let top_is_one = (eigen.eigenvalues()[0] - 1.0).abs() <= 1e-10;
    let cross = power.converged
        && (power.lambda1 - 1.0).abs() <= 1e-8
        && (power.lambda2 - eigen.lambda2()).abs() <= 1e-8;
    checks.push(CheckOutcome {
        name: "spectrum".into(),
        passed: nonneg && top_is_one && cross,
        detail: format!(
            "gap {:.6}, min eigenvalue {:.2e}, power-iteration lambda2 {:.9} vs {:.9}",
            eigen.gap(),
            eigen.min_eigenvalue(),
            power.lambda2,
            eigen.lambda2()
        ),
    });

    // Mixing: exact evolution from EVERY start reaches epsilon by the cubic
    // bound (the curve is non-increasing, so this pins every per-start
    // mixing time under the bound), plus the per-start search itself.
    let start = options
        .start
        .clone()
        .unwrap_or_else(|| Solution::zeros(n));
    let mut tau = BTreeMap::new();
    let mut bound_map = BTreeMap::new();
    let mut mixing_ok = true;
    let mut flow_ok = true;
    let mut mixing_detail = String::new();
    for &eps in &options.epsilons {
        let bound = theorem_bound(n, eps)?;
        let worst = eigen
            .tv_from_every_start(bound)
            .into_iter()
            .fold(0.0f64, f64::max);
        let t_start = empirical_mixing_time(&matrix, &start, eps)?;
        let key = format!("{eps}");
        tau.insert(key.clone(), t_start);
        bound_map.insert(key, bound);
        if worst > eps + 1e-10 || t_start > bound {
            mixing_ok = false;
        }
        mixing_detail.push_str(&format!(
            "eps {eps}: tau(start) {t_start} <= bound {bound}, worst-start TV {worst:.3e}; "
        ));
        // The flow-based estimate must stay under the closed-form bound.
        let flow_estimate = report.flow_cost()
            * report.max_path_len() as f64
            * ((solution_count as f64).ln() + (1.0 / eps).ln());
        if (bound as f64) < flow_estimate - 1e-9 {
            flow_ok = false;
        }
    }
    checks.push(CheckOutcome {
        name: "mixing-bound".into(),
        passed: mixing_ok,
        detail: mixing_detail.trim_end_matches("; ").to_string(),
    });
    checks.push(CheckOutcome {
        name: "flow-bound-consistency".into(),
        passed: flow_ok,
        detail: format!(
            "flow cost {:.3} x longest path {} x log terms stays under the cubic bound",
            report.flow_cost(),
            report.max_path_len()
        ),
    });

    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        passed,
        checks,
        measured: Measured {
            item_count: n,
            solution_count,
            max_load: report.max_load(),
            flow_cost: report.flow_cost(),
            max_path_len: report.max_path_len(),
            spectral_gap: eigen.gap(),
            lambda2_power_iteration: power.lambda2,
            min_eigenvalue: eigen.min_eigenvalue(),
            tau,
            bound: bound_map,
        },
    })
}
