//! Telemetry and demand CSV persistence.
//!
//! The telemetry CSV carries the observations only (exact header below).
//! Group rosters, cluster capacity and the high-priority share cannot be
//! expressed in that schema, so they travel in a `<stem>.cluster.json`
//! sidecar written next to the CSV. Loading prefers the sidecar when it
//! exists and otherwise derives groups from the rows themselves, so
//! foreign CSVs stay ingestible. Save-then-load is the identity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DemandSeries, MachineGroup, MachineObservation, TelemetryDataset, UtcHour};
use crate::error::{Error, Result};

pub const TELEMETRY_HEADER: &str = "timestamp_hour,machine_id,group_id,cpu_util_pct,\
     running_containers,total_data_read_bytes,tasks_finished,avg_task_latency_s,\
     cores_used,ssd_used_gb,ram_used_gb";

pub const DEMAND_HEADER: &str = "timestamp_hour,high_priority_containers,total_containers";

/// Group rosters and cluster-level figures stored in the sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterInfo {
    pub groups: Vec<MachineGroup>,
    pub capacity_containers: f64,
    pub high_priority_share: f64,
}

/// Reads the `<stem>.cluster.json` sidecar next to a telemetry CSV, when
/// present.
pub fn load_cluster_info(csv_path: &Path) -> Result<Option<ClusterInfo>> {
    let side = sidecar_path(csv_path);
    if !side.exists() {
        return Ok(None);
    }
    let info: ClusterInfo = serde_json::from_str(&read_to_string(&side)?)?;
    Ok(Some(info))
}

fn sidecar_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.cluster.json"))
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::FileRead {
        path: path.to_path_buf(),
        source,
    })
}

fn write_string(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::FileWrite {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the telemetry CSV plus its `<stem>.cluster.json` sidecar.
pub fn save_telemetry(dataset: &TelemetryDataset, csv_path: &Path) -> Result<()> {
    let mut out = String::with_capacity(64 * (dataset.observations().len() + 1));
    out.push_str(TELEMETRY_HEADER);
    out.push('\n');
    for o in dataset.observations() {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            o.timestamp_hour,
            o.machine_id,
            o.group_id,
            o.cpu_util_pct,
            o.running_containers,
            o.total_data_read_bytes,
            o.tasks_finished,
            o.avg_task_latency_s,
            o.cores_used,
            o.ssd_used_gb,
            o.ram_used_gb
        )
        .expect("string write cannot fail");
    }
    write_string(csv_path, &out)?;

    let meta = ClusterInfo {
        groups: dataset.groups().to_vec(),
        capacity_containers: dataset.capacity_containers,
        high_priority_share: dataset.high_priority_share,
    };
    let json = serde_json::to_string_pretty(&meta)?;
    write_string(&sidecar_path(csv_path), &json)
}

struct FieldParser<'a> {
    fields: Vec<&'a str>,
    line: usize,
}

impl<'a> FieldParser<'a> {
    fn f64(&self, idx: usize, column: &str) -> Result<f64> {
        let raw = self.fields[idx];
        let value: f64 = raw.parse().map_err(|_| Error::CsvParse {
            line: self.line,
            column: column.to_string(),
            message: format!("`{raw}` is not a number"),
        })?;
        if !value.is_finite() {
            return Err(Error::CsvParse {
                line: self.line,
                column: column.to_string(),
                message: format!("`{raw}` is not finite"),
            });
        }
        Ok(value)
    }

    fn non_negative(&self, idx: usize, column: &str) -> Result<f64> {
        let value = self.f64(idx, column)?;
        if value < 0.0 {
            return Err(Error::CsvParse {
                line: self.line,
                column: column.to_string(),
                message: format!("{value} is negative"),
            });
        }
        Ok(value)
    }
}

/// Parses a telemetry CSV (and its sidecar when present) into a validated
/// dataset. Errors name the 1-based line and the offending column.
pub fn load_telemetry(csv_path: &Path) -> Result<TelemetryDataset> {
    let contents = read_to_string(csv_path)?;
    let mut lines = contents.lines().enumerate();
    let header = lines.next().map(|(_, l)| l).unwrap_or_default();
    if header != TELEMETRY_HEADER {
        return Err(Error::CsvParse {
            line: 1,
            column: "header".into(),
            message: format!("expected `{TELEMETRY_HEADER}`"),
        });
    }

    let meta = load_cluster_info(csv_path)?;
    let known_groups: Option<BTreeSet<String>> = meta
        .as_ref()
        .map(|m| m.groups.iter().map(|g| g.group_id.clone()).collect());

    let mut observations = Vec::new();
    for (idx, raw_line) in lines {
        if raw_line.is_empty() {
            continue;
        }
        let line = idx + 1;
        let fields: Vec<&str> = raw_line.split(',').collect();
        if fields.len() != 11 {
            return Err(Error::CsvParse {
                line,
                column: "row".into(),
                message: format!("expected 11 fields, found {}", fields.len()),
            });
        }
        let p = FieldParser { fields, line };
        let timestamp_hour = UtcHour::parse(p.fields[0]).map_err(|e| Error::CsvParse {
            line,
            column: "timestamp_hour".into(),
            message: e.to_string(),
        })?;
        let machine_id = p.fields[1].to_string();
        let group_id = p.fields[2].to_string();
        if machine_id.is_empty() || group_id.is_empty() {
            return Err(Error::CsvParse {
                line,
                column: if machine_id.is_empty() {
                    "machine_id".into()
                } else {
                    "group_id".into()
                },
                message: "must be non-empty".into(),
            });
        }
        if let Some(known) = &known_groups {
            if !known.contains(&group_id) {
                return Err(Error::unknown_group_at_line(group_id, line));
            }
        }
        let cpu_util_pct = p.non_negative(3, "cpu_util_pct")?;
        if cpu_util_pct > 100.0 {
            return Err(Error::CsvParse {
                line,
                column: "cpu_util_pct".into(),
                message: format!("{cpu_util_pct} exceeds 100"),
            });
        }
        observations.push(MachineObservation {
            timestamp_hour,
            machine_id,
            group_id,
            cpu_util_pct,
            running_containers: p.non_negative(4, "running_containers")?,
            total_data_read_bytes: p.non_negative(5, "total_data_read_bytes")?,
            tasks_finished: p.non_negative(6, "tasks_finished")?,
            avg_task_latency_s: p.non_negative(7, "avg_task_latency_s")?,
            cores_used: p.non_negative(8, "cores_used")?,
            ssd_used_gb: p.non_negative(9, "ssd_used_gb")?,
            ram_used_gb: p.non_negative(10, "ram_used_gb")?,
        });
    }

    match meta {
        Some(meta) => TelemetryDataset::new(
            observations,
            meta.groups,
            meta.capacity_containers,
            meta.high_priority_share,
        ),
        None => {
            // No sidecar: derive rosters from the rows. Rack layout is
            // unknowable from this schema, so each machine gets its own
            // rack id and capacity defaults to the observed peak demand.
            let mut machines_by_group: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
            for o in &observations {
                machines_by_group
                    .entry(o.group_id.clone())
                    .or_default()
                    .insert(o.machine_id.clone());
            }
            let groups = machines_by_group
                .into_iter()
                .map(|(group_id, machines)| MachineGroup {
                    group_id,
                    machine_count: machines.len(),
                    rack_of: machines.into_iter().map(|m| (m.clone(), m)).collect(),
                })
                .collect();
            let mut peak_by_hour: BTreeMap<UtcHour, f64> = BTreeMap::new();
            for o in &observations {
                *peak_by_hour.entry(o.timestamp_hour).or_insert(0.0) += o.running_containers;
            }
            let capacity = peak_by_hour.values().cloned().fold(1.0f64, f64::max);
            TelemetryDataset::new(observations, groups, capacity, 0.6)
        }
    }
}

/// Writes a demand series using the demand CSV schema.
pub fn save_demand(demand: &DemandSeries, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(32 * (demand.len() + 1));
    out.push_str(DEMAND_HEADER);
    out.push('\n');
    for ((hour, hp), total) in demand
        .hours()
        .iter()
        .zip(demand.high_priority())
        .zip(demand.total())
    {
        writeln!(out, "{hour},{hp},{total}").expect("string write cannot fail");
    }
    write_string(path, &out)
}

/// Parses a demand CSV.
pub fn load_demand(path: &Path) -> Result<DemandSeries> {
    let contents = read_to_string(path)?;
    let mut lines = contents.lines().enumerate();
    let header = lines.next().map(|(_, l)| l).unwrap_or_default();
    if header != DEMAND_HEADER {
        return Err(Error::CsvParse {
            line: 1,
            column: "header".into(),
            message: format!("expected `{DEMAND_HEADER}`"),
        });
    }
    let mut hours = Vec::new();
    let mut high_priority = Vec::new();
    let mut total = Vec::new();
    for (idx, raw_line) in lines {
        if raw_line.is_empty() {
            continue;
        }
        let line = idx + 1;
        let fields: Vec<&str> = raw_line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::CsvParse {
                line,
                column: "row".into(),
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let p = FieldParser { fields, line };
        hours.push(UtcHour::parse(p.fields[0]).map_err(|e| Error::CsvParse {
            line,
            column: "timestamp_hour".into(),
            message: e.to_string(),
        })?);
        high_priority.push(p.non_negative(1, "high_priority_containers")?);
        total.push(p.non_negative(2, "total_containers")?);
    }
    DemandSeries::new(hours, high_priority, total)
}
