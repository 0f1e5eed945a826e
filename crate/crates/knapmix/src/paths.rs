//! Canonical paths between feasible solutions, zone decompositions, and the
//! path-set audits (edge congestion, prefix-determination counts, and the
//! per-edge reconstruction properties).
//!
//! The path from `v` to `w` scans items left to right and matches each
//! position to `w`. A blocked positive flip at `i` is preceded by negative
//! "slack" flips at the nearest positions `j > i` that carry 1 in the current
//! state and 0 in `w`, taken in ascending order and stopping as soon as the
//! flip at `i` fits the budget. Slack-flipped positions are matched on the
//! spot and never revisited, so no index is flipped twice and a path has at
//! most `n` flips.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{KnapsackInstance, Solution, SolutionSet};

/// Direction of a single-coordinate change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FlipDirection {
    /// 0 -> 1.
    Positive,
    /// 1 -> 0.
    Negative,
}

/// One coordinate change; `index` is 0-based, display is 1-based signed
/// (`+3` flips item 3 on).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flip {
    pub index: usize,
    pub direction: FlipDirection,
}

impl std::fmt::Display for Flip {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sign = match self.direction {
            FlipDirection::Positive => '+',
            FlipDirection::Negative => '-',
        };
        write!(f, "{sign}{}", self.index + 1)
    }
}

impl Serialize for Flip {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

/// The three-way split of `1..=n` at one instant of the scan: positions
/// `1..=matched_end` agree with the target through completed matching,
/// `matched_end+1..=heap_end` is the heap the slack flips live in, and
/// everything past `heap_end` still agrees with the source.
///
/// `heap_end` is the highest position touched so far -- the highest index
/// flipped, or the matched frontier when the scan has silently overtaken
/// every flip -- so `matched_end <= heap_end` always holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ZoneDecomposition {
    pub matched_end: usize,
    pub heap_end: usize,
}

/// A fully recorded canonical path.
#[derive(Debug, Clone)]
pub struct CanonicalPath {
    from: Solution,
    to: Solution,
    flips: Vec<Flip>,
    slack_flip: Vec<bool>,
    states: Vec<Solution>,
    zones: Vec<ZoneDecomposition>,
}

impl CanonicalPath {
    pub fn from_state(&self) -> &Solution {
        &self.from
    }

    pub fn to_state(&self) -> &Solution {
        &self.to
    }

    pub fn flips(&self) -> &[Flip] {
        &self.flips
    }

    /// Number of flips `r`; the path visits `r + 1` states.
    pub fn flip_count(&self) -> usize {
        self.flips.len()
    }

    /// Whether flip `j` (0-based) was a slack-making pre-flip rather than a
    /// direct match of the scanned position.
    pub fn is_slack_flip(&self, j: usize) -> bool {
        self.slack_flip[j]
    }

    /// The induced state sequence `x(0) .. x(r)`.
    pub fn states(&self) -> &[Solution] {
        &self.states
    }

    /// Zone decomposition in effect at state `step` (0-based, up to and
    /// including the terminal state).
    ///
    /// Before the first flip nothing is committed, so step 0 reports
    /// `(0, 0)`; after the final flip the scan runs to completion, so the
    /// terminal step reports `(n, n)`.
    pub fn zones_at(&self, step: usize) -> Result<ZoneDecomposition> {
        self.zones.get(step).copied().ok_or(Error::StepOutOfRange {
            step,
            flips: self.flips.len(),
        })
    }
}

/// Everything a traversal visitor can see at the instant one flip is
/// performed: the pre-flip state `z`, the flip itself, the zone split, and
/// which positions were slack-flipped earlier on this path.
pub(crate) struct Traversal<'a> {
    /// 0-based position being flipped.
    pub flip_index: usize,
    pub direction: FlipDirection,
    /// Scan position (0-based) this flip serves; equals `flip_index` for a
    /// direct match, and the blocked position for a slack flip.
    pub serving: usize,
    /// Matched prefix length `k` at this instant.
    pub matched_end: usize,
    /// Heap end `l` at this instant.
    pub heap_end: usize,
    /// State immediately before the flip.
    pub state: &'a [bool],
    /// `slack_flipped[p]` iff position `p` was slack-flipped strictly before
    /// this flip.
    pub slack_flipped: &'a [bool],
    /// True when this flip is itself a slack flip.
    pub is_slack: bool,
}

/// Reusable buffers for the path walk.
#[derive(Default)]
pub(crate) struct WalkScratch {
    cur: Vec<bool>,
    slack_flipped: Vec<bool>,
}

impl WalkScratch {
    fn reset(&mut self, v: &[bool]) {
        self.cur.clear();
        self.cur.extend_from_slice(v);
        self.slack_flipped.clear();
        self.slack_flipped.resize(v.len(), false);
    }
}

/// Runs the scan from `v` to `w`, invoking `visit` at every flip instant
/// with the traversal context, and returns the number of flips.
///
/// `v` and `w` are trusted to be feasible; public entry points check first.
pub(crate) fn walk<F>(
    instance: &KnapsackInstance,
    v: &[bool],
    w: &[bool],
    scratch: &mut WalkScratch,
    mut visit: F,
) -> Result<usize>
where
    F: FnMut(&Traversal<'_>),
{
    let n = instance.item_count();
    let weights = instance.weights();
    let budget = instance.budget();
    scratch.reset(v);
    let mut weight = instance.weight(v)?;
    let mut flips = 0usize;
    let mut highest_flipped = 0usize; // 1-based; 0 = none yet

    // The zone split pinned at a flip instant: the matched prefix is the
    // scan position being served, and the heap reaches to the highest
    // position touched so far.
    macro_rules! emit {
        ($idx:expr, $dir:expr, $serving:expr, $slack:expr) => {{
            let idx: usize = $idx;
            let serving: usize = $serving;
            visit(&Traversal {
                flip_index: idx,
                direction: $dir,
                serving,
                matched_end: serving,
                heap_end: serving.max(highest_flipped),
                state: &scratch.cur,
                slack_flipped: &scratch.slack_flipped,
                is_slack: $slack,
            });
            match $dir {
                FlipDirection::Positive => {
                    scratch.cur[idx] = true;
                    weight += weights[idx];
                }
                FlipDirection::Negative => {
                    scratch.cur[idx] = false;
                    weight -= weights[idx];
                }
            }
            highest_flipped = highest_flipped.max(idx + 1);
            flips += 1;
        }};
    }

    for i in 0..n {
        if scratch.slack_flipped[i] || scratch.cur[i] == w[i] {
            continue;
        }
        if scratch.cur[i] {
            // 1 -> 0: removing weight is always feasible.
            emit!(i, FlipDirection::Negative, i, false);
        } else {
            if weight + weights[i] > budget {
                for j in i + 1..n {
                    if weight + weights[i] <= budget {
                        break;
                    }
                    if scratch.cur[j] && !w[j] {
                        emit!(j, FlipDirection::Negative, i, true);
                        scratch.slack_flipped[j] = true;
                    }
                }
                if weight + weights[i] > budget {
                    // Impossible for feasible w: removing every j > i with
                    // v_j = 1, w_j = 0 leaves a sub-vector of w plus item i.
                    return Err(Error::InvariantViolation(format!(
                        "canonical path stalled at position {} between {} and {}",
                        i + 1,
                        Solution::from_bits(v.to_vec()),
                        Solution::from_bits(w.to_vec()),
                    )));
                }
            }
            emit!(i, FlipDirection::Positive, i, false);
        }
    }
    debug_assert_eq!(scratch.cur, w, "scan must terminate at the target");
    Ok(flips)
}

/// Canonical path between two feasible solutions, fully recorded.
pub fn canonical_path(
    instance: &KnapsackInstance,
    v: &Solution,
    w: &Solution,
) -> Result<CanonicalPath> {
    for (role, s) in [("from", v), ("to", w)] {
        if !instance.is_feasible(s.bits())? {
            return Err(Error::InfeasibleState {
                role,
                bits: s.to_bitstring(),
            });
        }
    }
    let n = instance.item_count();
    let mut flips = Vec::new();
    let mut slack = Vec::new();
    let mut states = vec![v.clone()];
    let mut pinned = Vec::new();
    let mut scratch = WalkScratch::default();
    walk(instance, v.bits(), w.bits(), &mut scratch, |t| {
        // The split seen when flip j+1 fires describes the state it fires
        // from, i.e. states[j].
        pinned.push(ZoneDecomposition {
            matched_end: t.matched_end,
            heap_end: t.heap_end,
        });
        flips.push(Flip {
            index: t.flip_index,
            direction: t.direction,
        });
        slack.push(t.is_slack);
        let mut next = t.state.to_vec();
        next[t.flip_index] = !next[t.flip_index];
        states.push(Solution::from_bits(next));
    })?;
    let zones = rebuild_zone_table(n, &flips, &pinned);
    Ok(CanonicalPath {
        from: v.clone(),
        to: w.clone(),
        flips,
        slack_flip: slack,
        states,
        zones,
    })
}

/// Zone table indexed by state: entry `j` describes state `j`. Entry 0 is
/// `(0,0)`, entry `r` is `(n,n)`, and entry `j` in between is the split
/// pinned at the instant flip `j+1` fires.
fn rebuild_zone_table(
    n: usize,
    flips: &[Flip],
    pinned: &[ZoneDecomposition],
) -> Vec<ZoneDecomposition> {
    let r = flips.len();
    let mut zones = Vec::with_capacity(r + 1);
    if r == 0 {
        zones.push(ZoneDecomposition {
            matched_end: n,
            heap_end: n,
        });
        return zones;
    }
    zones.push(ZoneDecomposition {
        matched_end: 0,
        heap_end: 0,
    });
    for j in 1..r {
        zones.push(pinned[j]);
    }
    zones.push(ZoneDecomposition {
        matched_end: n,
        heap_end: n,
    });
    zones
}

/// Per-directed-edge canonical-path loads and the flow cost over the whole
/// ordered-pair family.
#[derive(Debug, Clone)]
pub struct CongestionReport {
    item_count: usize,
    states: SolutionSet,
    adjacency: Vec<u32>,
    loads: Vec<u64>,
    max_load: u64,
    max_path_len: usize,
}

impl CongestionReport {
    pub fn solution_count(&self) -> usize {
        self.states.count()
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn states(&self) -> &SolutionSet {
        &self.states
    }

    pub fn max_load(&self) -> u64 {
        self.max_load
    }

    /// Longest path (in flips) observed over all ordered pairs.
    pub fn max_path_len(&self) -> usize {
        self.max_path_len
    }

    /// `max_e flow(e)/capacity(e)` with uniform endpoints: the flow on an
    /// edge is `load/N^2` and every edge has capacity `1/(2nN)`, so the cost
    /// reduces to `2n * max_load / N`.
    pub fn flow_cost(&self) -> f64 {
        if self.states.count() == 0 {
            return 0.0;
        }
        2.0 * self.item_count as f64 * self.max_load as f64 / self.states.count() as f64
    }

    /// Load on the directed edge `z -> y`.
    pub fn edge_load(&self, z: &Solution, y: &Solution) -> Result<u64> {
        let edge = edge_of(&self.states, &self.adjacency, self.item_count, z, y)?;
        Ok(self.loads[edge])
    }

    /// All existing directed edges as `(z_index, y_index, load)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        let n = self.item_count;
        self.adjacency
            .iter()
            .enumerate()
            .filter(|(_, &y)| y != NO_EDGE)
            .map(move |(edge, &y)| (edge / n, y as usize, self.loads[edge]))
    }

    /// Loads keyed `"zbits>ybits"`, every edge included (zeros too), sorted.
    pub fn loads_by_bitstring(&self) -> BTreeMap<String, u64> {
        self.edges()
            .map(|(z, y, load)| {
                (
                    format!(
                        "{}>{}",
                        self.states.get(z).to_bitstring(),
                        self.states.get(y).to_bitstring()
                    ),
                    load,
                )
            })
            .collect()
    }
}

pub(crate) const NO_EDGE: u32 = u32::MAX;

/// Dense adjacency of the single-flip graph over `set`: entry `z*n + i` is
/// the index of `z` with item `i+1` flipped when that vector is feasible,
/// else [`NO_EDGE`].
pub(crate) fn single_flip_adjacency(
    instance: &KnapsackInstance,
    set: &SolutionSet,
) -> Result<Vec<u32>> {
    let n = instance.item_count();
    let count = set.count();
    if count > u32::MAX as usize - 1 {
        return Err(Error::InvalidInstance(
            "solution set too large for dense adjacency".into(),
        ));
    }
    let masks: Vec<u64> = set.iter().map(|s| s.mask()).collect();
    let mut adjacency = vec![NO_EDGE; count * n];
    for (zi, z) in set.iter().enumerate() {
        let z_weight = instance.weight(z.bits())?;
        for i in 0..n {
            let feasible = if z.bits()[i] {
                true
            } else {
                z_weight + instance.weights()[i] <= instance.budget()
            };
            if feasible {
                let mask = masks[zi] ^ (1u64 << (n - 1 - i));
                let yi = masks
                    .binary_search(&mask)
                    .map_err(|_| Error::InvariantViolation("flip target missing from set".into()))?;
                adjacency[zi * n + i] = yi as u32;
            }
        }
    }
    Ok(adjacency)
}

fn edge_of(
    states: &SolutionSet,
    adjacency: &[u32],
    n: usize,
    z: &Solution,
    y: &Solution,
) -> Result<usize> {
    let no_such = || Error::NoSuchEdge {
        from: z.to_bitstring(),
        to: y.to_bitstring(),
    };
    let zi = states.index_of(z).ok_or_else(no_such)?;
    let yi = states.index_of(y).ok_or_else(no_such)?;
    let mut differing = z
        .bits()
        .iter()
        .zip(y.bits())
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(i, _)| i);
    let bit = differing.next().ok_or_else(no_such)?;
    if differing.next().is_some() {
        return Err(no_such());
    }
    let edge = zi * n + bit;
    if adjacency[edge] != yi as u32 {
        return Err(no_such());
    }
    Ok(edge)
}

/// Builds canonical paths for every ordered pair of distinct solutions and
/// counts, per directed edge, how many pass through it.
pub fn congestion(instance: &KnapsackInstance, enum_cap: usize) -> Result<CongestionReport> {
    let set = instance.enumerate_with_cap(enum_cap)?;
    congestion_over(instance, set)
}

/// As [`congestion`], over an already enumerated solution set.
pub fn congestion_over(instance: &KnapsackInstance, set: SolutionSet) -> Result<CongestionReport> {
    let n = instance.item_count();
    let adjacency = single_flip_adjacency(instance, &set)?;
    let count = set.count();

    let tally = |range: std::ops::Range<usize>| -> Result<(Vec<u64>, usize)> {
        let mut loads = vec![0u64; count * n];
        let mut longest = 0usize;
        let mut scratch = WalkScratch::default();
        for vi in range {
            let v = set.get(vi);
            for wi in 0..count {
                if vi == wi {
                    continue;
                }
                let w = set.get(wi);
                let mut at = vi;
                let r = walk(instance, v.bits(), w.bits(), &mut scratch, |t| {
                    let edge = at * n + t.flip_index;
                    loads[edge] += 1;
                    at = adjacency[edge] as usize;
                    debug_assert_ne!(at, NO_EDGE as usize);
                })?;
                debug_assert_eq!(at, wi);
                longest = longest.max(r);
            }
        }
        Ok((loads, longest))
    };

    #[cfg(feature = "parallel")]
    let (loads, max_path_len) = {
        use rayon::prelude::*;
        let workers = rayon::current_num_threads().max(1);
        let chunk = count.div_ceil(workers).max(1);
        let pieces: Vec<(Vec<u64>, usize)> = (0..count)
            .step_by(chunk)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|lo| tally(lo..(lo + chunk).min(count)))
            .collect::<Result<_>>()?;
        let mut loads = vec![0u64; count * n];
        let mut longest = 0usize;
        for (piece, len) in pieces {
            for (total, part) in loads.iter_mut().zip(piece) {
                *total += part;
            }
            longest = longest.max(len);
        }
        (loads, longest)
    };
    #[cfg(not(feature = "parallel"))]
    let (loads, max_path_len) = tally(0..count)?;

    let max_load = loads.iter().copied().max().unwrap_or(0);
    Ok(CongestionReport {
        item_count: n,
        states: set,
        adjacency,
        loads,
        max_load,
        max_path_len,
    })
}

/// Outcome of replaying every ordered pair against the per-edge
/// reconstruction properties.
#[derive(Debug, Clone)]
pub struct EdgeAudit {
    pub traversals: u64,
    pub violations: Vec<String>,
}

impl EdgeAudit {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks, at every traversal of every canonical path, that the traversed
/// edge determines the endpoints the way the zone split promises:
///
/// 1. matched-zone entries of `w` equal those of `y`;
/// 2. untouched-zone entries of `v` equal those of `z`;
/// 3. heap-zone entries that were slack-flipped carry 0 in `z` and 1 in `v`;
/// 4. heap-zone entries that were jumped agree between `v` and `z`.
pub fn audit_edges(instance: &KnapsackInstance, set: &SolutionSet) -> Result<EdgeAudit> {
    audit_edges_filtered(instance, set, None)
}

/// Restriction of [`audit_edges`] to the single directed edge `z -> y`.
/// Errors if `(z, y)` is not a feasible single-flip transition.
pub fn audit_edge(
    instance: &KnapsackInstance,
    set: &SolutionSet,
    z: &Solution,
    y: &Solution,
) -> Result<bool> {
    let n = instance.item_count();
    let adjacency = single_flip_adjacency(instance, set)?;
    let edge = edge_of(set, &adjacency, n, z, y)?;
    let audit = audit_edges_filtered(instance, set, Some((edge / n, edge % n)))?;
    Ok(audit.passed())
}

fn audit_edges_filtered(
    instance: &KnapsackInstance,
    set: &SolutionSet,
    only: Option<(usize, usize)>,
) -> Result<EdgeAudit> {
    let n = instance.item_count();
    let adjacency = single_flip_adjacency(instance, set)?;
    let count = set.count();
    let mut scratch = WalkScratch::default();
    let mut traversals = 0u64;
    let mut violations = Vec::new();

    for vi in 0..count {
        let v = set.get(vi);
        for wi in 0..count {
            if vi == wi {
                continue;
            }
            let w = set.get(wi);
            let mut at = vi;
            walk(instance, v.bits(), w.bits(), &mut scratch, |t| {
                let considered = match only {
                    Some((zi, bit)) => at == zi && bit == t.flip_index,
                    None => true,
                };
                if considered {
                    traversals += 1;
                    if let Err(reason) = check_traversal(v.bits(), w.bits(), t) {
                        violations.push(format!(
                            "pair {v}->{w} at edge {}->{}: {reason}",
                            set.get(at),
                            set.get(adjacency[at * n + t.flip_index] as usize),
                        ));
                    }
                }
                at = adjacency[at * n + t.flip_index] as usize;
            })?;
        }
    }
    Ok(EdgeAudit {
        traversals,
        violations,
    })
}

fn check_traversal(v: &[bool], w: &[bool], t: &Traversal<'_>) -> std::result::Result<(), String> {
    let n = v.len();
    let k = t.matched_end;
    let l = t.heap_end;
    let z = t.state;
    // y = z except at the flipped position, which never lies in the matched
    // zone, so the matched-zone comparison can read z directly.
    debug_assert!(t.flip_index >= t.serving && t.serving == k);
    for p in 0..k {
        if w[p] != z[p] {
            return Err(format!("matched zone entry {} of w not fixed by y", p + 1));
        }
    }
    for p in l..n {
        if v[p] != z[p] {
            return Err(format!("untouched zone entry {} of v not fixed by z", p + 1));
        }
    }
    for p in k..l {
        if t.slack_flipped[p] {
            if z[p] || !v[p] {
                return Err(format!(
                    "heap zone entry {} was slack-flipped but is not 0 in z and 1 in v",
                    p + 1
                ));
            }
        } else if v[p] != z[p] {
            return Err(format!("heap zone entry {} was jumped but differs", p + 1));
        }
    }
    Ok(())
}

/// Per-pair validity of the whole canonical-path family: every intermediate
/// state feasible, the scan ends at its target, at most `n` flips with no
/// index flipped twice, and a non-decreasing matched prefix.
#[derive(Debug, Clone)]
pub struct PathFamilyAudit {
    pub pairs: u64,
    pub max_len: usize,
    pub violations: Vec<String>,
}

pub fn audit_path_family(
    instance: &KnapsackInstance,
    set: &SolutionSet,
) -> Result<PathFamilyAudit> {
    let n = instance.item_count();
    let budget = instance.budget();
    let weights = instance.weights();
    let mut scratch = WalkScratch::default();
    let mut pairs = 0u64;
    let mut max_len = 0usize;
    let mut violations = Vec::new();

    for v in set.iter() {
        for w in set.iter() {
            if v == w {
                continue;
            }
            pairs += 1;
            let mut weight = instance.weight(v.bits())?;
            let mut flipped: u64 = 0;
            let mut last_matched = 0usize;
            let mut terminal = v.bits().to_vec();
            let mut trouble: Option<String> = None;
            let r = walk(instance, v.bits(), w.bits(), &mut scratch, |t| {
                let idx = t.flip_index;
                match t.direction {
                    FlipDirection::Positive => weight += weights[idx],
                    FlipDirection::Negative => weight -= weights[idx],
                }
                if trouble.is_none() && weight > budget {
                    trouble = Some(format!("infeasible state after flipping {}", idx + 1));
                }
                if trouble.is_none() && flipped & (1 << idx) != 0 {
                    trouble = Some(format!("index {} flipped twice", idx + 1));
                }
                flipped |= 1 << idx;
                if trouble.is_none() && t.matched_end < last_matched {
                    trouble = Some("matched prefix shrank".into());
                }
                last_matched = t.matched_end;
                terminal[idx] = !terminal[idx];
            })?;
            if trouble.is_none() && r > n {
                trouble = Some(format!("path has {r} flips, above n = {n}"));
            }
            if trouble.is_none() && terminal != w.bits() {
                trouble = Some("path did not terminate at the target".into());
            }
            max_len = max_len.max(r);
            if let Some(reason) = trouble {
                violations.push(format!("pair {v}->{w}: {reason}"));
            }
        }
    }
    Ok(PathFamilyAudit {
        pairs,
        max_len,
        violations,
    })
}

/// Checks, for one anchor solution `z` and prefix length `beta`, that each
/// determination rule (copy the prefix of `z`, or complement it) pins at
/// most `(2N)^((n - beta)/n)` feasible solutions. The comparison is done on
/// integers as `count^n <= (2N)^(n - beta)`.
pub fn audit_prefix_bound(instance: &KnapsackInstance, z: &Solution, beta: usize) -> Result<bool> {
    use num_bigint::BigUint;
    let n = instance.item_count();
    if z.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: z.len(),
        });
    }
    if beta > n {
        return Err(Error::InvalidInstance(format!(
            "prefix length {beta} exceeds n = {n}"
        )));
    }
    let total = instance.exact_count();
    let bound = (BigUint::from(2u32) * &total).pow((n - beta) as u32);
    for complemented in [false, true] {
        let mut used: u128 = 0;
        for p in 0..beta {
            let bit = z.bits()[p] ^ complemented;
            if bit {
                used += instance.weights()[p] as u128;
            }
        }
        let pinned = if used > instance.budget() as u128 {
            BigUint::ZERO
        } else {
            let residual = instance.budget() - used as u64;
            let suffix = &instance.weights()[beta..];
            if suffix.is_empty() {
                BigUint::from(1u32)
            } else {
                KnapsackInstance::new(suffix.to_vec(), residual)
                    .expect("suffix of a valid instance is valid")
                    .exact_count()
            }
        };
        if pinned.pow(n as u32) > bound {
            return Ok(false);
        }
    }
    Ok(true)
}
