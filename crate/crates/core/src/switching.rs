//! Per-slot switching policies.
//!
//! * [`aao`]: every small cell stays on.
//! * [`es_switch`]: exhaustive search over all `2^N` off-patterns.
//! * [`mlc_switch`]: multi-level clustering. Cluster by load, switch off the
//!   single best whole cluster that the macro BS can absorb, re-clustering
//!   clusters that do not fit.
//! * [`thesis_switch`]: cluster by load, run exhaustive search inside every
//!   cluster no larger than `b_th` (re-clustering larger ones), then commit
//!   the per-cluster winners greedily against the remaining macro capacity.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_by_elbow, DEFAULT_K_MAX};
use crate::error::{usage, Error, Result};
use crate::netmodel::{Evaluation, MacroCell, SlotCosts, SwitchDecision};

pub const DEFAULT_B_TH: usize = 12;
pub const DEFAULT_ES_CAP: usize = 24;
pub const MAX_RECURSION_DEPTH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Aao,
    Es,
    Mlc,
    Thesis,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Aao, Policy::Es, Policy::Mlc, Policy::Thesis];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Aao => "aao",
            Policy::Es => "es",
            Policy::Mlc => "mlc",
            Policy::Thesis => "thesis",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "aao" => Ok(Policy::Aao),
            "es" => Ok(Policy::Es),
            "mlc" => Ok(Policy::Mlc),
            "thesis" => Ok(Policy::Thesis),
            other => Err(usage(format!("unknown policy `{other}`"))),
        }
    }
}

/// How THESIS combines the per-cluster results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThesisMode {
    /// Commit every cluster's best set, largest saving first, while the macro
    /// BS has room.
    #[default]
    Greedy,
    /// Commit only the best single cluster's set.
    SingleCluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchParams {
    pub b_th: usize,
    pub seed: u64,
    pub es_cap: usize,
    pub k_max: usize,
    pub thesis_mode: ThesisMode,
}

impl Default for SwitchParams {
    fn default() -> Self {
        Self {
            b_th: DEFAULT_B_TH,
            seed: 0,
            es_cap: DEFAULT_ES_CAP,
            k_max: DEFAULT_K_MAX,
            thesis_mode: ThesisMode::Greedy,
        }
    }
}

/// Loads of one slot together with the cell they belong to.
#[derive(Debug, Clone, Copy)]
pub struct PolicyInput<'a> {
    pub cell: &'a MacroCell,
    pub sbs_loads: &'a [f64],
    pub mbs_load: f64,
}

impl<'a> PolicyInput<'a> {
    pub fn new(cell: &'a MacroCell, sbs_loads: &'a [f64], mbs_load: f64) -> Self {
        Self {
            cell,
            sbs_loads,
            mbs_load,
        }
    }

    fn costs(&self) -> Result<SlotCosts> {
        SlotCosts::new(self.cell, self.sbs_loads, self.mbs_load)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub candidates_evaluated: u64,
    pub recursion_depth: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub decision: SwitchDecision,
    pub power: f64,
    pub stats: SearchStats,
}

fn output(costs: &SlotCosts, off: &[bool], stats: SearchStats) -> Result<PolicyOutput> {
    let eval = costs.evaluate(off);
    if !eval.feasible(costs.mbs_max_load) {
        return Err(Error::Contract(format!(
            "policy produced an infeasible decision (macro load {})",
            eval.mbs_load_after
        )));
    }
    Ok(PolicyOutput {
        decision: costs.decision(off, &eval),
        power: eval.power,
        stats,
    })
}

pub fn aao(input: &PolicyInput<'_>) -> Result<PolicyOutput> {
    let costs = input.costs()?;
    output(
        &costs,
        &vec![false; costs.len()],
        SearchStats {
            candidates_evaluated: 1,
            recursion_depth: 0,
        },
    )
}

/// Ordering of candidate off-patterns over a member list: lower power first,
/// then fewer cells off, then the lexicographically smallest id set.
///
/// Bit `b` of a mask stands for `members[b]` and members are ascending, so
/// the lexicographically smaller id set is the one holding the lowest bit
/// where the masks differ.
fn candidate_order(a_power: f64, a_mask: u64, b_power: f64, b_mask: u64) -> Ordering {
    a_power
        .total_cmp(&b_power)
        .then(a_mask.count_ones().cmp(&b_mask.count_ones()))
        .then_with(|| {
            let diff = a_mask ^ b_mask;
            if diff == 0 {
                Ordering::Equal
            } else if a_mask & diff & diff.wrapping_neg() != 0 {
                Ordering::Less
            } else {
                Ordering::Greater
            }
        })
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    mask: u64,
    power: f64,
}

/// Visits every off-pattern of `members`, calling `visit` with the mask and
/// its evaluation. Cells outside `members` stay on.
fn enumerate_subsets(
    costs: &SlotCosts,
    members: &[usize],
    mut visit: impl FnMut(u64, &Evaluation),
) -> u64 {
    debug_assert!(members.len() < 64);
    let mut flags = vec![false; costs.len()];
    let count = 1u64 << members.len();
    for mask in 0..count {
        for (b, &id) in members.iter().enumerate() {
            flags[id] = mask >> b & 1 == 1;
        }
        let eval = costs.evaluate(&flags);
        visit(mask, &eval);
    }
    count
}

fn flags_from_mask(n: usize, members: &[usize], mask: u64) -> Vec<bool> {
    let mut flags = vec![false; n];
    for (b, &id) in members.iter().enumerate() {
        if mask >> b & 1 == 1 {
            flags[id] = true;
        }
    }
    flags
}

pub fn es_switch(input: &PolicyInput<'_>) -> Result<PolicyOutput> {
    es_switch_capped(input, DEFAULT_ES_CAP)
}

/// Exhaustive search over every off-pattern, refusing cells with more than
/// `cap` small cells.
pub fn es_switch_capped(input: &PolicyInput<'_>, cap: usize) -> Result<PolicyOutput> {
    let costs = input.costs()?;
    let n = costs.len();
    if n > cap.min(63) {
        return Err(usage(format!(
            "exhaustive search over {n} small cells exceeds the cap of {cap}; use thesis instead"
        )));
    }
    let members: Vec<usize> = (0..n).collect();
    let mut best: Option<Candidate> = None;
    let max_load = costs.mbs_max_load;
    let candidates = enumerate_subsets(&costs, &members, |mask, eval| {
        if !eval.feasible(max_load) {
            return;
        }
        let better = best
            .is_none_or(|b| candidate_order(eval.power, mask, b.power, b.mask) == Ordering::Less);
        if better {
            best = Some(Candidate {
                mask,
                power: eval.power,
            });
        }
    });
    // The empty pattern is always feasible for valid loads.
    let best =
        best.ok_or_else(|| Error::Contract("no feasible pattern, not even all-on".into()))?;
    output(
        &costs,
        &flags_from_mask(n, &members, best.mask),
        SearchStats {
            candidates_evaluated: candidates,
            recursion_depth: 0,
        },
    )
}

/// Splits a group of small cells by load.
fn split_group(
    costs_loads: &[f64],
    group: &[usize],
    k_max: usize,
    min_k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    let points: Vec<f64> = group.iter().map(|&id| costs_loads[id]).collect();
    let clustering = cluster_by_elbow(&points, k_max, min_k, seed)?;
    Ok(clustering
        .members()
        .into_iter()
        .map(|m| m.into_iter().map(|i| group[i]).collect())
        .collect())
}

fn depth_check(depth: usize) -> Result<()> {
    if depth > MAX_RECURSION_DEPTH {
        Err(Error::Contract(format!(
            "clustering recursion exceeded {MAX_RECURSION_DEPTH} levels"
        )))
    } else {
        Ok(())
    }
}

pub fn mlc_switch(input: &PolicyInput<'_>, seed: u64) -> Result<PolicyOutput> {
    mlc_switch_with(input, seed, DEFAULT_K_MAX)
}

pub fn mlc_switch_with(input: &PolicyInput<'_>, seed: u64, k_max: usize) -> Result<PolicyOutput> {
    let costs = input.costs()?;
    let n = costs.len();
    let all_on = costs.evaluate(&vec![false; n]);
    let mut stats = SearchStats::default();
    if n == 0 {
        stats.candidates_evaluated = 1;
        return output(&costs, &[], stats);
    }

    let everyone: Vec<usize> = (0..n).collect();
    let mut level = split_group(input.sbs_loads, &everyone, k_max, 1, seed)?;
    let mut best: Option<(Vec<bool>, f64)> = None;
    let mut depth = 0;
    while !level.is_empty() {
        depth += 1;
        depth_check(depth)?;
        stats.recursion_depth = depth;
        let mut next = Vec::new();
        for group in level {
            let mut flags = vec![false; n];
            for &id in &group {
                flags[id] = true;
            }
            let eval = costs.evaluate(&flags);
            stats.candidates_evaluated += 1;
            if eval.feasible(costs.mbs_max_load) {
                let saving = all_on.power - eval.power;
                // First-found wins on ties; zero savings never switch anything off.
                if saving > 0.0 && best.as_ref().is_none_or(|(_, s)| saving > *s) {
                    best = Some((flags, saving));
                }
            } else if group.len() > 1 {
                next.extend(split_group(input.sbs_loads, &group, k_max, 2, seed)?);
            }
        }
        level = next;
    }
    let off = best.map(|(f, _)| f).unwrap_or_else(|| vec![false; n]);
    output(&costs, &off, stats)
}

/// Outcome of the exhaustive search inside one cluster.
struct ClusterTable {
    members: Vec<usize>,
    /// Feasible patterns that save power on their own, best first.
    entries: Vec<Candidate>,
}

pub fn thesis_switch(input: &PolicyInput<'_>, b_th: usize, seed: u64) -> Result<PolicyOutput> {
    thesis_switch_with(input, b_th, seed, DEFAULT_K_MAX, ThesisMode::Greedy)
}

pub fn thesis_switch_with(
    input: &PolicyInput<'_>,
    b_th: usize,
    seed: u64,
    k_max: usize,
    mode: ThesisMode,
) -> Result<PolicyOutput> {
    if b_th == 0 || b_th > 30 {
        return Err(usage(format!("b_th = {b_th} outside 1..=30")));
    }
    let costs = input.costs()?;
    let n = costs.len();
    let all_on = costs.evaluate(&vec![false; n]);
    let mut stats = SearchStats::default();
    if n == 0 {
        stats.candidates_evaluated = 1;
        return output(&costs, &[], stats);
    }

    let everyone: Vec<usize> = (0..n).collect();
    let mut level = split_group(input.sbs_loads, &everyone, k_max, 1, seed)?;
    let mut tables = Vec::new();
    let mut depth = 0;
    while !level.is_empty() {
        depth += 1;
        depth_check(depth)?;
        stats.recursion_depth = depth;
        let mut next = Vec::new();
        for group in level {
            if group.len() <= b_th {
                let mut entries = Vec::new();
                stats.candidates_evaluated += enumerate_subsets(&costs, &group, |mask, eval| {
                    if eval.feasible(costs.mbs_max_load) && eval.power < all_on.power {
                        entries.push(Candidate {
                            mask,
                            power: eval.power,
                        });
                    }
                });
                entries.sort_by(|a, b| candidate_order(a.power, a.mask, b.power, b.mask));
                tables.push(ClusterTable {
                    members: group,
                    entries,
                });
            } else {
                next.extend(split_group(input.sbs_loads, &group, k_max, 2, seed)?);
            }
        }
        level = next;
    }

    // Largest standalone saving first; discovery order on ties.
    let mut order: Vec<usize> = (0..tables.len())
        .filter(|&t| !tables[t].entries.is_empty())
        .collect();
    order.sort_by(|&a, &b| {
        tables[a].entries[0]
            .power
            .total_cmp(&tables[b].entries[0].power)
            .then(a.cmp(&b))
    });

    let mut committed = vec![false; n];
    for t in order {
        let table = &tables[t];
        let chosen = table.entries.iter().find_map(|cand| {
            let mut trial = committed.clone();
            for (b, &id) in table.members.iter().enumerate() {
                if cand.mask >> b & 1 == 1 {
                    trial[id] = true;
                }
            }
            costs
                .evaluate(&trial)
                .feasible(costs.mbs_max_load)
                .then_some(trial)
        });
        if let Some(trial) = chosen {
            committed = trial;
            if mode == ThesisMode::SingleCluster {
                break;
            }
        }
    }
    output(&costs, &committed, stats)
}

/// Runs one policy on one slot.
pub fn run_policy(
    policy: Policy,
    input: &PolicyInput<'_>,
    params: &SwitchParams,
) -> Result<PolicyOutput> {
    match policy {
        Policy::Aao => aao(input),
        Policy::Es => es_switch_capped(input, params.es_cap),
        Policy::Mlc => mlc_switch_with(input, params.seed, params.k_max),
        Policy::Thesis => thesis_switch_with(
            input,
            params.b_th,
            params.seed,
            params.k_max,
            params.thesis_mode,
        ),
    }
}
