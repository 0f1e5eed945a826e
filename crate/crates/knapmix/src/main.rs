//! The `knapmix` command line: sampling, canonical paths, audits, spectral
//! and mixing analysis, and counting over a JSON knapsack instance.
//!
//! Every command is deterministic given the instance, flags, and seed; the
//! payload goes to stdout and a one-line run report (command, instance
//! digest, seed, wall time) goes to stderr. Exit codes: 0 success, 1 at
//! least one check failed, 2 usage or input error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use sha2::{Digest, Sha256};

use knapmix::analysis::{
    eigendecompose, empirical_mixing_time, theorem_bound, TransitionMatrix, DEFAULT_MATRIX_CAP,
};
use knapmix::chain::{sample, stream_rng, ChainConfig};
use knapmix::counting::approx_count;
use knapmix::instance::{KnapsackInstance, Solution, DEFAULT_ENUM_CAP};
use knapmix::paths::{
    audit_edges, audit_path_family, audit_prefix_bound, canonical_path, congestion_over,
};
use knapmix::verify::{run_verification, VerifyOptions};

#[derive(Parser)]
#[command(name = "knapmix", version, about = "Sample, audit, analyze, and count 0-1 knapsack solutions")]
struct Cli {
    /// Instance file path, or inline JSON starting with '{'.
    #[arg(long, global = true)]
    instance: Option<String>,

    /// Seed for every random quantity of the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output format; defaults to plain lines for sample/enumerate/path and
    /// JSON everywhere else.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Worker threads for the parallel audits and sampling (0 = automatic).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Enumeration cap on n.
    #[arg(long, global = true, default_value_t = DEFAULT_ENUM_CAP)]
    enum_cap: usize,

    /// Cap on the number of states for dense-matrix analysis.
    #[arg(long, global = true, default_value_t = DEFAULT_MATRIX_CAP)]
    matrix_cap: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// List every feasible solution in canonical order.
    Enumerate,
    /// End states of independent seeded chains, one replicate per line.
    Sample {
        /// Steps per replicate.
        #[arg(long)]
        steps: u64,
        /// Number of replicates.
        #[arg(long)]
        count: u64,
        /// Start state as a bitstring; all-zeros when omitted.
        #[arg(long)]
        start: Option<String>,
    },
    /// The canonical path between two feasible solutions.
    Path {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
    },
    /// Congestion report plus the path-family audits, with pass/fail lines.
    Audit,
    /// Spectral gap, mixing times and bounds, flow cost; optional TV curve.
    Analyze {
        /// Start state for the mixing-time search; all-zeros when omitted.
        #[arg(long)]
        start: Option<String>,
        /// Accuracy targets (repeatable); defaults to 0.1 and 0.01.
        #[arg(long = "epsilon")]
        epsilons: Vec<f64>,
        /// Write the exact TV curve as CSV rows `t,tv` to this file.
        #[arg(long)]
        tv_curve: Option<PathBuf>,
    },
    /// Count solutions, exactly by default or approximately with --approx.
    Count {
        /// Exact count via the two-branch recursion (the default).
        #[arg(long)]
        exact: bool,
        /// Sampler-driven estimate instead of the exact count.
        #[arg(long, conflicts_with = "exact")]
        approx: bool,
        /// Relative accuracy of the estimate.
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Failure probability of the estimate.
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
    },
    /// Run the full audit suite and report pass/fail per check.
    Verify {
        /// Verify a seeded random instance of this size instead of a file.
        #[arg(long, conflicts_with = "instance")]
        random_n: Option<usize>,
        /// Largest weight for --random-n.
        #[arg(long, default_value_t = 50)]
        max_weight: u64,
        /// Start state for the mixing-time check; all-zeros when omitted.
        #[arg(long)]
        start: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    let started = Instant::now();
    if cli.threads > 0 {
        configure_threads(cli.threads);
    }

    let command_name = match &cli.command {
        Command::Enumerate => "enumerate",
        Command::Sample { .. } => "sample",
        Command::Path { .. } => "path",
        Command::Audit => "audit",
        Command::Analyze { .. } => "analyze",
        Command::Count { .. } => "count",
        Command::Verify { .. } => "verify",
    };
    if cli.format == Some(Format::Csv)
        && matches!(
            cli.command,
            Command::Audit | Command::Analyze { .. } | Command::Count { .. } | Command::Verify { .. }
        )
    {
        bail!("{command_name} emits JSON; --format csv applies to sample, enumerate, and path");
    }

    let loaded = load_instance(&cli)?;
    let code = run_command(&cli, &loaded)?;

    let report = json!({
        "command": command_name,
        "instance_digest": loaded.digest,
        "seed": cli.seed,
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    eprintln!("{report}");
    Ok(code)
}

struct LoadedInstance {
    instance: KnapsackInstance,
    digest: String,
}

fn load_instance(cli: &Cli) -> anyhow::Result<LoadedInstance> {
    if let Command::Verify {
        random_n: Some(n),
        max_weight,
        ..
    } = &cli.command
    {
        if *n == 0 {
            bail!("--random-n must be at least 1");
        }
        let mut rng = stream_rng(cli.seed, 0);
        let instance = KnapsackInstance::random(*n, (*max_weight).max(1), &mut rng);
        let canonical = serde_json::to_vec(&instance)?;
        return Ok(LoadedInstance {
            digest: hex_digest(&canonical),
            instance,
        });
    }

    let Some(spec) = &cli.instance else {
        bail!("--instance is required (a file path, or inline JSON starting with '{{')");
    };
    let bytes = if spec.trim_start().starts_with('{') {
        spec.clone().into_bytes()
    } else {
        std::fs::read(spec).with_context(|| format!("reading instance file {spec}"))?
    };
    let digest = hex_digest(&bytes);
    let text = String::from_utf8(bytes).context("instance is not UTF-8")?;
    let instance = KnapsackInstance::from_json_str(&text)?;
    Ok(LoadedInstance { instance, digest })
}

fn hex_digest(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

fn run_command(cli: &Cli, loaded: &LoadedInstance) -> anyhow::Result<ExitCode> {
    let instance = &loaded.instance;
    match &cli.command {
        Command::Enumerate => {
            let set = instance.enumerate_with_cap(cli.enum_cap)?;
            if wants_json(cli, false) {
                let payload = json!({
                    "count": set.count(),
                    "solutions": set.solutions(),
                });
                emit(&payload)?;
            } else {
                for s in set.iter() {
                    println!("{s}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Sample {
            steps,
            count,
            start,
        } => {
            if *count == 0 {
                bail!("--count must be at least 1");
            }
            let config = match start {
                Some(bits) => {
                    ChainConfig::with_start(instance.clone(), cli.seed, Solution::parse(bits)?)?
                }
                None => ChainConfig::new(instance.clone(), cli.seed),
            };
            let samples = sample(&config, *steps, *count);
            if wants_json(cli, false) {
                emit(&json!({ "samples": samples }))?;
            } else {
                for s in &samples {
                    println!("{s}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Path { from, to } => {
            let from = Solution::parse(from)?;
            let to = Solution::parse(to)?;
            let path = canonical_path(instance, &from, &to)?;
            if wants_json(cli, false) {
                let zones: Vec<_> = (0..=path.flip_count())
                    .map(|j| path.zones_at(j).expect("step in range"))
                    .collect();
                emit(&json!({
                    "from": path.from_state(),
                    "to": path.to_state(),
                    "flips": path.flips(),
                    "states": path.states(),
                    "zones": zones,
                }))?;
            } else {
                let flips: Vec<String> = path.flips().iter().map(|f| f.to_string()).collect();
                println!(
                    "flips: {}",
                    if flips.is_empty() {
                        "(none)".to_string()
                    } else {
                        flips.join(" ")
                    }
                );
                let states: Vec<String> =
                    path.states().iter().map(|s| s.to_bitstring()).collect();
                println!("states: {}", states.join(" -> "));
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Audit => {
            let set = instance.enumerate_with_cap(cli.enum_cap)?;
            let family = audit_path_family(instance, &set)?;
            let edges = audit_edges(instance, &set)?;
            let mut prefix_ok = true;
            for z in set.iter() {
                for beta in 0..=instance.item_count() {
                    if !audit_prefix_bound(instance, z, beta)? {
                        prefix_ok = false;
                    }
                }
            }
            let report = congestion_over(instance, set)?;
            let n_states = report.solution_count() as u64;
            let load_ok = report.max_load() <= 2 * n_states;
            let results = [
                ("path-family", family.violations.is_empty()),
                ("edge-determination", edges.passed()),
                ("prefix-count-bound", prefix_ok),
                ("edge-load-bound", load_ok),
            ];
            let payload = json!({
                "item_count": report.item_count(),
                "solution_count": report.solution_count(),
                "max_load": report.max_load(),
                "flow_cost": report.flow_cost(),
                "max_path_len": report.max_path_len(),
                "edge_loads": report.loads_by_bitstring(),
                "audits": results.iter().cloned().collect::<std::collections::BTreeMap<_, _>>(),
            });
            emit(&payload)?;
            for (name, ok) in results {
                println!("{name}: {}", if ok { "PASS" } else { "FAIL" });
            }
            let all_ok = results.iter().all(|(_, ok)| *ok);
            Ok(if all_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }

        Command::Analyze {
            start,
            epsilons,
            tv_curve,
        } => {
            let epsilons = if epsilons.is_empty() {
                vec![0.1, 0.01]
            } else {
                epsilons.clone()
            };
            let start = match start {
                Some(bits) => Solution::parse(bits)?,
                None => Solution::zeros(instance.item_count()),
            };
            let matrix = TransitionMatrix::build(instance, cli.enum_cap, cli.matrix_cap)?;
            let eigen = eigendecompose(&matrix)?;
            let set = instance.enumerate_with_cap(cli.enum_cap)?;
            let flow = congestion_over(instance, set)?;
            let mut tau = std::collections::BTreeMap::new();
            let mut bounds = std::collections::BTreeMap::new();
            let mut horizon = 0u64;
            for &eps in &epsilons {
                let bound = theorem_bound(instance.item_count(), eps)?;
                let t = empirical_mixing_time(&matrix, &start, eps)?;
                tau.insert(format!("{eps}"), t);
                bounds.insert(format!("{eps}"), bound);
                horizon = horizon.max(bound);
            }
            if let Some(out) = tv_curve {
                write_tv_curve(&matrix, &start, horizon, out)?;
            }
            emit(&json!({
                "start": start.to_bitstring(),
                "spectral_gap": eigen.gap(),
                "tau": tau,
                "theorem_bound": bounds,
                "flow_cost": flow.flow_cost(),
            }))?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Count {
            approx,
            epsilon,
            delta,
            ..
        } => {
            if *approx {
                let estimate = approx_count(instance, *epsilon, *delta, cli.seed)?;
                emit(&serde_json::to_value(&estimate)?)?;
            } else {
                emit(&json!({ "count": instance.exact_count().to_string() }))?;
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Verify { start, .. } => {
            let options = VerifyOptions {
                enum_cap: cli.enum_cap,
                matrix_cap: cli.matrix_cap,
                start: start.as_deref().map(Solution::parse).transpose()?,
                ..VerifyOptions::default()
            };
            let report = run_verification(instance, &options)?;
            emit(&serde_json::to_value(&report)?)?;
            for check in &report.checks {
                println!(
                    "{}: {} ({})",
                    check.name,
                    if check.passed { "PASS" } else { "FAIL" },
                    check.detail
                );
            }
            Ok(if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

/// JSON when asked for, or when the command has no line format.
fn wants_json(cli: &Cli, json_only: bool) -> bool {
    match cli.format {
        Some(Format::Json) => true,
        Some(Format::Csv) => false,
        None => json_only,
    }
}

fn emit(payload: &serde_json::Value) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(payload)?);
    Ok(())
}

fn write_tv_curve(
    matrix: &TransitionMatrix,
    start: &Solution,
    horizon: u64,
    out: &std::path::Path,
) -> anyhow::Result<()> {
    use knapmix::analysis::tv_curve;
    let curve = tv_curve(matrix, start, horizon)?;
    let mut text = String::from("t,tv\n");
    for (t, tv) in curve {
        text.push_str(&format!("{t},{tv}\n"));
    }
    std::fs::write(out, text).with_context(|| format!("writing TV curve to {}", out.display()))?;
    Ok(())
}

#[cfg(feature = "parallel")]
fn configure_threads(threads: usize) {
    // Ignore failure: the global pool can only be sized once per process.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(_threads: usize) {}
