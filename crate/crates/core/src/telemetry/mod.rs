//! Machine-group telemetry data model and demand aggregation.
//!
//! One [`MachineObservation`] is one machine-hour of telemetry. Machines
//! belong to a [`MachineGroup`] (one software-configuration/hardware-SKU
//! combination); groups are the unit at which performance models are
//! fitted and container limits are tuned. [`DemandSeries`] is the hourly
//! cluster-wide container demand derived from the observations, the
//! substrate for pricing and availability analysis.

mod io;
mod synthetic;

pub use io::{
    load_cluster_info, load_demand, load_telemetry, save_demand, save_telemetry, ClusterInfo,
    DEMAND_HEADER, TELEMETRY_HEADER,
};
pub use synthetic::{generate_synthetic_cluster, GroupSpec, NoiseSpec, SyntheticSpec};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::quantile_lower;

/// A UTC timestamp truncated to the hour, stored as hours since the Unix
/// epoch. Canonical text form is `YYYY-MM-DDTHH:00:00Z`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct UtcHour(pub i64);

impl UtcHour {
    /// Strict parse of the canonical `YYYY-MM-DDTHH:00:00Z` form.
    pub fn parse(s: &str) -> Result<Self> {
        let dt = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%SZ")
            .map_err(|e| Error::InvalidInput(format!("bad timestamp `{s}`: {e}")))?;
        let secs = dt.and_utc().timestamp();
        if secs % 3600 != 0 {
            return Err(Error::InvalidInput(format!(
                "timestamp `{s}` is not aligned to the hour"
            )));
        }
        Ok(UtcHour(secs / 3600))
    }

    /// Hour of day in 0..24.
    pub fn hour_of_day(self) -> u8 {
        self.0.rem_euclid(24) as u8
    }

    /// Day index (floor of hours / 24) since the epoch.
    pub fn day_index(self) -> i64 {
        self.0.div_euclid(24)
    }

    pub fn plus_hours(self, h: i64) -> Self {
        UtcHour(self.0 + h)
    }
}

impl fmt::Display for UtcHour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dt: DateTime<Utc> =
            DateTime::from_timestamp(self.0 * 3600, 0).expect("hour timestamp within chrono range");
        write!(f, "{}", dt.format("%Y-%m-%dT%H:00:00Z"))
    }
}

/// One software-configuration/SKU combination and its machine roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineGroup {
    /// SC-SKU combination label, e.g. `SC2-Gen4.1`.
    pub group_id: String,
    /// Number of machines of this group in the cluster.
    pub machine_count: usize,
    /// machine_id -> rack_id, for experiment designs.
    pub rack_of: BTreeMap<String, String>,
}

impl MachineGroup {
    pub fn validate(&self) -> Result<()> {
        if self.group_id.is_empty() {
            return Err(Error::InvalidInput("group_id must be non-empty".into()));
        }
        if self.machine_count == 0 {
            return Err(Error::InvalidInput(format!(
                "group `{}` must have at least one machine",
                self.group_id
            )));
        }
        Ok(())
    }
}

/// One machine-hour of telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineObservation {
    pub timestamp_hour: UtcHour,
    pub machine_id: String,
    pub group_id: String,
    /// Time-average CPU utilization over the hour, in [0, 100].
    pub cpu_util_pct: f64,
    /// Time-average simultaneously running containers over the hour.
    pub running_containers: f64,
    pub total_data_read_bytes: f64,
    pub tasks_finished: f64,
    pub avg_task_latency_s: f64,
    pub cores_used: f64,
    pub ssd_used_gb: f64,
    pub ram_used_gb: f64,
}

impl MachineObservation {
    fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.cpu_util_pct) {
            return Err(Error::InvalidInput(format!(
                "cpu_util_pct {} outside [0,100] for machine `{}` at {}",
                self.cpu_util_pct, self.machine_id, self.timestamp_hour
            )));
        }
        let non_negative = [
            ("running_containers", self.running_containers),
            ("total_data_read_bytes", self.total_data_read_bytes),
            ("tasks_finished", self.tasks_finished),
            ("avg_task_latency_s", self.avg_task_latency_s),
            ("cores_used", self.cores_used),
            ("ssd_used_gb", self.ssd_used_gb),
            ("ram_used_gb", self.ram_used_gb),
        ];
        for (name, v) in non_negative {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} {v} must be finite and non-negative for machine `{}` at {}",
                    self.machine_id, self.timestamp_hour
                )));
            }
        }
        Ok(())
    }
}

/// A validated, sorted collection of observations plus group metadata.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryDataset {
    observations: Vec<MachineObservation>,
    groups: Vec<MachineGroup>,
    /// Cluster-wide container capacity (slots).
    pub capacity_containers: f64,
    /// Fraction of total demand that is high priority, used when no
    /// explicit high-priority column was ingested.
    pub high_priority_share: f64,
}

impl TelemetryDataset {
    /// Builds a dataset, sorting observations by `(timestamp_hour,
    /// machine_id)` and enforcing all invariants: known groups, unique
    /// `(machine_id, hour)` pairs, fields within physical range.
    pub fn new(
        mut observations: Vec<MachineObservation>,
        mut groups: Vec<MachineGroup>,
        capacity_containers: f64,
        high_priority_share: f64,
    ) -> Result<Self> {
        if !(capacity_containers.is_finite() && capacity_containers > 0.0) {
            return Err(Error::InvalidInput(format!(
                "capacity_containers must be positive, got {capacity_containers}"
            )));
        }
        if !(0.0..=1.0).contains(&high_priority_share) {
            return Err(Error::InvalidInput(format!(
                "high_priority_share must lie in [0,1], got {high_priority_share}"
            )));
        }
        groups.sort_by(|a, b| a.group_id.cmp(&b.group_id));
        let mut machine_seen: BTreeSet<&str> = BTreeSet::new();
        for g in &groups {
            g.validate()?;
            for machine in g.rack_of.keys() {
                if !machine_seen.insert(machine) {
                    return Err(Error::InvalidInput(format!(
                        "machine `{machine}` appears in more than one group"
                    )));
                }
            }
        }
        let known: BTreeSet<&str> = groups.iter().map(|g| g.group_id.as_str()).collect();
        for obs in &observations {
            obs.validate()?;
            if !known.contains(obs.group_id.as_str()) {
                return Err(Error::unknown_group(&obs.group_id));
            }
        }
        observations.sort_by(|a, b| {
            (a.timestamp_hour, &a.machine_id).cmp(&(b.timestamp_hour, &b.machine_id))
        });
        for pair in observations.windows(2) {
            if pair[0].timestamp_hour == pair[1].timestamp_hour
                && pair[0].machine_id == pair[1].machine_id
            {
                return Err(Error::DuplicateObservation {
                    machine_id: pair[0].machine_id.clone(),
                    hour: pair[0].timestamp_hour.to_string(),
                });
            }
        }
        Ok(TelemetryDataset {
            observations,
            groups,
            capacity_containers,
            high_priority_share,
        })
    }

    pub fn observations(&self) -> &[MachineObservation] {
        &self.observations
    }

    pub fn groups(&self) -> &[MachineGroup] {
        &self.groups
    }

    pub fn group(&self, group_id: &str) -> Result<&MachineGroup> {
        self.groups
            .iter()
            .find(|g| g.group_id == group_id)
            .ok_or_else(|| Error::unknown_group(group_id))
    }

    /// group_id -> machine count, the per-group weights of the optimizer.
    pub fn machine_counts(&self) -> BTreeMap<String, usize> {
        self.groups
            .iter()
            .map(|g| (g.group_id.clone(), g.machine_count))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Hourly container demand for the whole cluster: high-priority usage and
/// total usage per hour. `high_priority[t] <= total[t]` for every t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSeries {
    hours: Vec<UtcHour>,
    high_priority: Vec<f64>,
    total: Vec<f64>,
}

impl DemandSeries {
    pub fn new(hours: Vec<UtcHour>, high_priority: Vec<f64>, total: Vec<f64>) -> Result<Self> {
        if hours.len() != high_priority.len() || hours.len() != total.len() {
            return Err(Error::InvalidInput(format!(
                "demand series lengths differ: {} hours, {} high-priority, {} total",
                hours.len(),
                high_priority.len(),
                total.len()
            )));
        }
        for (i, (hp, t)) in high_priority.iter().zip(&total).enumerate() {
            if !hp.is_finite() || !t.is_finite() || *hp < 0.0 || *t < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "demand at {} must be finite and non-negative",
                    hours[i]
                )));
            }
            if hp > t {
                return Err(Error::InvalidInput(format!(
                    "high-priority demand {hp} exceeds total {t} at {}",
                    hours[i]
                )));
            }
        }
        for pair in hours.windows(2) {
            if pair[1].0 != pair[0].0 + 1 {
                return Err(Error::InvalidInput(format!(
                    "demand hours must be contiguous; gap between {} and {}",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(DemandSeries {
            hours,
            high_priority,
            total,
        })
    }

    pub fn hours(&self) -> &[UtcHour] {
        &self.hours
    }

    pub fn high_priority(&self) -> &[f64] {
        &self.high_priority
    }

    pub fn total(&self) -> &[f64] {
        &self.total
    }

    pub fn len(&self) -> usize {
        self.hours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hours.is_empty()
    }

    /// Number of whole days covered, or an error when the series does not
    /// start at midnight or does not cover whole days.
    pub fn whole_days(&self) -> Result<usize> {
        if self.is_empty() {
            return Err(Error::EmptyInput("demand series".into()));
        }
        if self.hours[0].hour_of_day() != 0 || !self.len().is_multiple_of(24) {
            return Err(Error::InvalidInput(
                "demand series must start at midnight UTC and cover whole days".into(),
            ));
        }
        Ok(self.len() / 24)
    }

    /// Replaces both series with scaled copies; used by oversubscription.
    pub(crate) fn scaled(&self, factor: f64) -> DemandSeries {
        DemandSeries {
            hours: self.hours.clone(),
            high_priority: self.high_priority.iter().map(|v| v * factor).collect(),
            total: self.total.iter().map(|v| v * factor).collect(),
        }
    }

    /// Builds a copy with a replaced total series, clipping high priority
    /// to the new totals so the type invariant keeps holding.
    pub(crate) fn with_total(&self, total: Vec<f64>) -> DemandSeries {
        debug_assert_eq!(total.len(), self.len());
        let high_priority = self
            .high_priority
            .iter()
            .zip(&total)
            .map(|(hp, t)| hp.min(*t))
            .collect();
        DemandSeries {
            hours: self.hours.clone(),
            high_priority,
            total,
        }
    }
}

/// Empirical per-hour-of-day demand quantiles over the observed days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileProfile {
    /// Quantile levels in (0,1), ascending.
    pub levels: Vec<f64>,
    /// `values[level_index][hour_of_day]`, hour_of_day in 0..24.
    pub values: Vec<Vec<f64>>,
}

/// Sums per-machine running containers into the cluster demand profile.
/// High-priority demand is the dataset's configured share of the total.
pub fn hourly_demand_profile(dataset: &TelemetryDataset) -> Result<DemandSeries> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("telemetry dataset".into()));
    }
    let mut by_hour: BTreeMap<UtcHour, f64> = BTreeMap::new();
    for obs in dataset.observations() {
        *by_hour.entry(obs.timestamp_hour).or_insert(0.0) += obs.running_containers;
    }
    let first = *by_hour.keys().next().expect("non-empty");
    let last = *by_hour.keys().next_back().expect("non-empty");
    let mut hours = Vec::new();
    let mut total = Vec::new();
    for h in first.0..=last.0 {
        let hour = UtcHour(h);
        hours.push(hour);
        total.push(by_hour.get(&hour).copied().unwrap_or(0.0));
    }
    let high_priority = total
        .iter()
        .map(|t| t * dataset.high_priority_share)
        .collect();
    DemandSeries::new(hours, high_priority, total)
}

/// Empirical quantiles of total demand per hour of day, over all observed
/// days, with lower interpolation.
pub fn percentile_profile(demand: &DemandSeries, levels: &[f64]) -> Result<PercentileProfile> {
    let days = demand.whole_days()?;
    if days < 1 {
        return Err(Error::InvalidInput(
            "percentile profile needs at least one full day".into(),
        ));
    }
    if levels.is_empty() {
        return Err(Error::EmptyInput("quantile levels".into()));
    }
    for &level in levels {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidInput(format!(
                "quantile level {level} outside (0,1)"
            )));
        }
    }
    let mut levels = levels.to_vec();
    levels.sort_by(|a, b| a.total_cmp(b));

    let mut per_hod: Vec<Vec<f64>> = (0..24).map(|_| Vec::with_capacity(days)).collect();
    for (hour, value) in demand.hours().iter().zip(demand.total()) {
        per_hod[hour.hour_of_day() as usize].push(*value);
    }
    let values = levels
        .iter()
        .map(|&level| {
            per_hod
                .iter()
                .map(|day_values| quantile_lower(day_values, level))
                .collect()
        })
        .collect();
    Ok(PercentileProfile { levels, values })
}
