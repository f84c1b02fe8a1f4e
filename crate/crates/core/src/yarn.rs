//! Per-group container-limit optimization.
//!
//! Maximizes the total number of running containers across the cluster,
//! subject to the cluster-average task latency not exceeding its current
//! value. Decision variables are per-group container counts confined to a
//! small window around the current operating point, so the search space
//! is enumerated exhaustively — exact and auditable, no solver needed.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::whatif::GroupModelSet;

/// Upper bound on exhaustive enumeration (candidate points).
pub const MAX_SEARCH_POINTS: u128 = 10_000_000;

/// Predicted operating point of one group at a given container count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupOutcome {
    /// Containers per machine (the tuned limit).
    pub containers: i64,
    /// Predicted CPU utilization %, clamped to [0, 100].
    pub cpu_pct: f64,
    /// Predicted tasks finished per hour, clamped at 0.
    pub tasks_per_hour: f64,
    /// Predicted average task latency in seconds, clamped at 0.
    pub latency_s: f64,
}

/// Cluster-wide prediction for one container-count assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterOutcome {
    pub per_group: BTreeMap<String, GroupOutcome>,
    /// Sum over groups of containers * machine count.
    pub total_containers: f64,
    /// Throughput-weighted average task latency across the cluster.
    pub avg_latency_s: f64,
}

/// Result of the optimization: the current configuration, the proposed
/// one, and the per-group changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YarnPlan {
    pub baseline: ClusterOutcome,
    pub proposed: ClusterOutcome,
    /// group_id -> proposed minus baseline containers.
    pub deltas: BTreeMap<String, i64>,
    /// Number of enumerated candidates that satisfied the latency bound.
    pub feasible_count: usize,
}

fn group_outcome(models: &GroupModelSet, containers: i64) -> Result<GroupOutcome> {
    if containers < 0 {
        return Err(Error::InvalidInput(format!(
            "negative container count {containers} for group `{}`",
            models.group_id
        )));
    }
    let cpu_pct = models
        .containers_to_cpu
        .predict(containers as f64)?
        .clamp(0.0, 100.0);
    let tasks_per_hour = models.cpu_to_tasks.predict(cpu_pct)?.max(0.0);
    let latency_s = models.cpu_to_latency.predict(cpu_pct)?.max(0.0);
    Ok(GroupOutcome {
        containers,
        cpu_pct,
        tasks_per_hour,
        latency_s,
    })
}

/// Predicts the cluster outcome for an explicit per-group assignment.
///
/// The cluster average latency weights each group's latency by its
/// predicted task throughput times its machine count.
pub fn evaluate_config(
    models: &[GroupModelSet],
    counts: &BTreeMap<String, usize>,
    assignment: &BTreeMap<String, i64>,
) -> Result<ClusterOutcome> {
    if models.is_empty() {
        return Err(Error::EmptyInput("model sets".into()));
    }
    for key in assignment.keys() {
        if !models.iter().any(|m| m.group_id == *key) {
            return Err(Error::unknown_group(key));
        }
    }
    let mut per_group = BTreeMap::new();
    let mut total_containers = 0.0;
    let mut weighted_latency = 0.0;
    let mut throughput = 0.0;
    for set in models {
        let n = *counts.get(&set.group_id).ok_or_else(|| {
            Error::InvalidInput(format!(
                "missing machine count for group `{}`",
                set.group_id
            ))
        })? as f64;
        let m = *assignment.get(&set.group_id).ok_or_else(|| {
            Error::InvalidInput(format!(
                "missing container count for group `{}`",
                set.group_id
            ))
        })?;
        let outcome = group_outcome(set, m)?;
        total_containers += m as f64 * n;
        weighted_latency += outcome.latency_s * outcome.tasks_per_hour * n;
        throughput += outcome.tasks_per_hour * n;
        per_group.insert(set.group_id.clone(), outcome);
    }
    if throughput <= 0.0 {
        return Err(Error::ZeroDenominator(
            "cluster-wide predicted throughput is zero; average latency undefined".into(),
        ));
    }
    Ok(ClusterOutcome {
        per_group,
        total_containers,
        avg_latency_s: weighted_latency / throughput,
    })
}

/// Candidate ordering: more containers first, then lower latency, then
/// lexicographically smallest assignment. Total, so any reduction order
/// yields the same winner.
fn candidate_better(a: (f64, f64, &[i64]), b: (f64, f64, &[i64])) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    match a.0.total_cmp(&b.0) {
        Ordering::Equal => {}
        other => return other,
    }
    match b.1.total_cmp(&a.1) {
        Ordering::Equal => {}
        other => return other,
    }
    b.2.cmp(a.2)
}

/// Exhaustively searches container counts within `delta_max` of each
/// group's current operating point, keeping candidates whose predicted
/// cluster-average latency does not exceed the baseline's.
///
/// Ties on the objective prefer lower average latency, then the
/// lexicographically smallest assignment (groups ordered by id).
pub fn optimize_max_containers(
    models: &[GroupModelSet],
    counts: &BTreeMap<String, usize>,
    delta_max: u32,
    m_floor: i64,
) -> Result<YarnPlan> {
    if models.is_empty() {
        return Err(Error::EmptyInput("model sets".into()));
    }
    if m_floor < 0 {
        return Err(Error::InvalidInput(format!(
            "m_floor must be non-negative, got {m_floor}"
        )));
    }
    let mut sorted: Vec<&GroupModelSet> = models.iter().collect();
    sorted.sort_by(|a, b| a.group_id.cmp(&b.group_id));

    // Current operating point, rounded to whole containers and floored.
    let baseline_m: Vec<i64> = sorted
        .iter()
        .map(|set| (set.current_containers.round() as i64).max(m_floor))
        .collect();
    let ranges: Vec<Vec<i64>> = baseline_m
        .iter()
        .map(|&m| ((m - delta_max as i64).max(m_floor)..=m + delta_max as i64).collect())
        .collect();
    let points: u128 = ranges.iter().map(|r| r.len() as u128).product();
    if points > MAX_SEARCH_POINTS {
        return Err(Error::SearchSpaceTooLarge {
            points,
            max: MAX_SEARCH_POINTS,
        });
    }

    let owned: Vec<GroupModelSet> = sorted.iter().map(|&m| m.clone()).collect();
    let to_assignment = |values: &[i64]| -> BTreeMap<String, i64> {
        owned
            .iter()
            .zip(values)
            .map(|(set, &m)| (set.group_id.clone(), m))
            .collect()
    };
    let baseline = evaluate_config(&owned, counts, &to_assignment(&baseline_m))?;

    // Decode a flat candidate index into one count per group.
    let decode = |mut idx: u64| -> Vec<i64> {
        let mut values = Vec::with_capacity(ranges.len());
        for range in &ranges {
            let len = range.len() as u64;
            values.push(range[(idx % len) as usize]);
            idx /= len;
        }
        values
    };

    let evaluated: Vec<(Vec<i64>, f64, f64)> = (0..points as u64)
        .into_par_iter()
        .map(|idx| {
            let values = decode(idx);
            let outcome = evaluate_config(&owned, counts, &to_assignment(&values))?;
            Ok((values, outcome.total_containers, outcome.avg_latency_s))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut feasible_count = 0usize;
    let mut best: Option<&(Vec<i64>, f64, f64)> = None;
    for cand in &evaluated {
        if cand.2 <= baseline.avg_latency_s {
            feasible_count += 1;
            let better = match best {
                None => true,
                Some(cur) => {
                    candidate_better((cand.1, cand.2, &cand.0), (cur.1, cur.2, &cur.0))
                        == std::cmp::Ordering::Greater
                }
            };
            if better {
                best = Some(cand);
            }
        }
    }
    let best = best.ok_or_else(|| {
        // The baseline evaluates to its own latency, so it is always
        // feasible; reaching this would mean it fell outside the grid.
        Error::InvalidInput("no feasible candidate; baseline outside search box".into())
    })?;

    let proposed = evaluate_config(&owned, counts, &to_assignment(&best.0))?;
    let deltas = owned
        .iter()
        .zip(baseline_m.iter().zip(&best.0))
        .map(|(set, (&b, &p))| (set.group_id.clone(), p - b))
        .collect();
    Ok(YarnPlan {
        baseline,
        proposed,
        deltas,
        feasible_count,
    })
}

/// Markdown rendering of a plan: one row per group plus the cluster
/// latency comparison.
pub fn plan_markdown(plan: &YarnPlan) -> String {
    let mut out = String::new();
    out.push_str("| group | current | proposed | delta | cpu % | tasks/h | latency s |\n");
    out.push_str("|---|---|---|---|---|---|---|\n");
    for (group, outcome) in &plan.proposed.per_group {
        let baseline = &plan.baseline.per_group[group];
        out.push_str(&format!(
            "| {group} | {} | {} | {:+} | {:.2} | {:.2} | {:.4} |\n",
            baseline.containers,
            outcome.containers,
            plan.deltas[group],
            outcome.cpu_pct,
            outcome.tasks_per_hour,
            outcome.latency_s
        ));
    }
    out.push_str(&format!(
        "\ntotal containers: {:.1} -> {:.1}\n\ncluster avg latency: {:.6} s -> {:.6} s\n",
        plan.baseline.total_containers,
        plan.proposed.total_containers,
        plan.baseline.avg_latency_s,
        plan.proposed.avg_latency_s
    ));
    out
}
