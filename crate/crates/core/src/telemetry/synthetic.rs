//! Seed-deterministic synthetic cluster telemetry.
//!
//! Every downstream pipeline must be runnable without proprietary data,
//! so the generator produces machine-hour rows that follow configurable
//! linear relations (containers -> CPU -> tasks/latency, cores -> SSD/RAM)
//! plus Gaussian noise, with a sinusoidal diurnal demand pattern peaking
//! in the early morning. Machines draw from independent sub-seeded RNG
//! streams, so generation can be parallelized without changing output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{MachineGroup, MachineObservation, TelemetryDataset, UtcHour};
use crate::error::{Error, Result};
use crate::stats::mix_seed;

/// Standard deviations of the Gaussian noise added to each generated
/// field. Zero scales make the corresponding relation exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub containers: f64,
    pub cpu: f64,
    pub tasks: f64,
    pub latency: f64,
    pub cores: f64,
    pub ssd: f64,
    pub ram: f64,
    pub data_read: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            containers: 0.6,
            cpu: 2.0,
            tasks: 4.0,
            latency: 0.05,
            cores: 1.0,
            ssd: 6.0,
            ram: 3.0,
            data_read: 2e9,
        }
    }
}

impl NoiseSpec {
    /// All scales zero: generated rows satisfy the linear relations
    /// exactly, which lets tests recover the true coefficients.
    pub fn zero() -> Self {
        NoiseSpec {
            containers: 0.0,
            cpu: 0.0,
            tasks: 0.0,
            latency: 0.0,
            cores: 0.0,
            ssd: 0.0,
            ram: 0.0,
            data_read: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("containers", self.containers),
            ("cpu", self.cpu),
            ("tasks", self.tasks),
            ("latency", self.latency),
            ("cores", self.cores),
            ("ssd", self.ssd),
            ("ram", self.ram),
            ("data_read", self.data_read),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "noise scale `{name}` must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// True model of one machine group: the linear coefficients the fitted
/// models should recover, plus roster shape and demand profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupSpec {
    pub group_id: String,
    pub machines: usize,
    pub racks: usize,
    /// Physical cores per machine.
    pub total_cores: f64,
    /// Mean simultaneously running containers per machine.
    pub base_containers: f64,
    /// Diurnal swing of running containers around the mean.
    pub demand_amplitude: f64,
    pub cpu_intercept: f64,
    pub cpu_per_container: f64,
    pub tasks_intercept: f64,
    pub tasks_per_cpu_pct: f64,
    pub latency_intercept_s: f64,
    pub latency_per_cpu_pct: f64,
    pub ssd_base_gb: f64,
    pub ssd_per_core_gb: f64,
    pub ram_base_gb: f64,
    pub ram_per_core_gb: f64,
    pub bytes_per_task: f64,
    pub noise: NoiseSpec,
}

impl Default for GroupSpec {
    fn default() -> Self {
        GroupSpec {
            group_id: "SC2-Gen4.1".into(),
            machines: 12,
            racks: 3,
            total_cores: 96.0,
            base_containers: 10.0,
            demand_amplitude: 4.0,
            cpu_intercept: 5.0,
            cpu_per_container: 4.5,
            tasks_intercept: 10.0,
            tasks_per_cpu_pct: 4.0,
            latency_intercept_s: 1.0,
            latency_per_cpu_pct: 0.004,
            ssd_base_gb: 60.0,
            ssd_per_core_gb: 22.0,
            ram_base_gb: 24.0,
            ram_per_core_gb: 3.5,
            bytes_per_task: 5e9,
            noise: NoiseSpec::default(),
        }
    }
}

impl GroupSpec {
    fn validate(&self) -> Result<()> {
        if self.group_id.is_empty() {
            return Err(Error::InvalidInput("group_id must be non-empty".into()));
        }
        if self.machines == 0 {
            return Err(Error::InvalidInput(format!(
                "group `{}` has zero machines",
                self.group_id
            )));
        }
        if self.racks == 0 {
            return Err(Error::InvalidInput(format!(
                "group `{}` has zero racks",
                self.group_id
            )));
        }
        if self.demand_amplitude < 0.0 {
            return Err(Error::InvalidInput(format!(
                "group `{}` has negative demand amplitude",
                self.group_id
            )));
        }
        if self.total_cores <= 0.0 || self.base_containers < 0.0 {
            return Err(Error::InvalidInput(format!(
                "group `{}` has non-positive cores or negative base demand",
                self.group_id
            )));
        }
        self.noise.validate()
    }
}

/// Full description of a synthetic cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    /// First generated hour; must be midnight so demand covers whole days.
    pub start: UtcHour,
    pub days: usize,
    pub capacity_containers: f64,
    pub high_priority_share: f64,
    /// Hour of day at which demand peaks (early morning by default).
    pub peak_hour: u8,
    pub groups: Vec<GroupSpec>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            start: UtcHour::parse("2024-01-01T00:00:00Z").expect("valid literal"),
            days: 7,
            capacity_containers: 320.0,
            high_priority_share: 0.6,
            peak_hour: 4,
            groups: vec![
                GroupSpec {
                    group_id: "SC1-Gen1.1".into(),
                    machines: 12,
                    racks: 3,
                    total_cores: 64.0,
                    base_containers: 8.0,
                    demand_amplitude: 3.0,
                    cpu_intercept: 8.0,
                    cpu_per_container: 6.0,
                    tasks_intercept: 5.0,
                    tasks_per_cpu_pct: 2.5,
                    latency_intercept_s: 1.2,
                    latency_per_cpu_pct: 0.012,
                    ssd_base_gb: 40.0,
                    ssd_per_core_gb: 18.0,
                    ram_base_gb: 16.0,
                    ram_per_core_gb: 2.5,
                    bytes_per_task: 3e9,
                    noise: NoiseSpec::default(),
                },
                GroupSpec::default(),
            ],
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.start.hour_of_day() != 0 {
            return Err(Error::InvalidInput(
                "synthetic start must be midnight UTC".into(),
            ));
        }
        if !(self.capacity_containers.is_finite() && self.capacity_containers > 0.0) {
            return Err(Error::InvalidInput(
                "capacity_containers must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.high_priority_share) {
            return Err(Error::InvalidInput(
                "high_priority_share must lie in [0,1]".into(),
            ));
        }
        if self.peak_hour > 23 {
            return Err(Error::InvalidInput("peak_hour must lie in 0..24".into()));
        }
        if self.groups.is_empty() {
            return Err(Error::EmptyInput("synthetic groups".into()));
        }
        for g in &self.groups {
            g.validate()?;
        }
        Ok(())
    }
}

fn machine_id(group: &GroupSpec, machine_idx: usize) -> String {
    format!(
        "{}-r{:02}-m{:03}",
        group.group_id,
        machine_idx % group.racks,
        machine_idx
    )
}

fn rack_id(group: &GroupSpec, machine_idx: usize) -> String {
    format!("{}-rack{:02}", group.group_id, machine_idx % group.racks)
}

struct MachineSampler {
    rng: ChaCha8Rng,
    unit: Normal<f64>,
}

impl MachineSampler {
    fn new(seed: u64) -> Self {
        MachineSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            unit: Normal::new(0.0, 1.0).expect("unit normal"),
        }
    }

    fn noise(&mut self, scale: f64) -> f64 {
        // Always consume one draw so the stream layout does not depend on
        // which noise scales are zero.
        scale * self.unit.sample(&mut self.rng)
    }
}

fn generate_machine(
    spec: &SyntheticSpec,
    group: &GroupSpec,
    machine_idx: usize,
    stream: u64,
    seed: u64,
) -> Vec<MachineObservation> {
    let mut sampler = MachineSampler::new(mix_seed(seed, stream));
    let id = machine_id(group, machine_idx);
    let hours = spec.days * 24;
    let mut rows = Vec::with_capacity(hours);
    for t in 0..hours {
        let hour = spec.start.plus_hours(t as i64);
        let hod = hour.hour_of_day() as f64;
        let phase = (hod - spec.peak_hour as f64) * std::f64::consts::TAU / 24.0;
        let diurnal = group.base_containers + group.demand_amplitude * phase.cos();
        let containers = (diurnal + sampler.noise(group.noise.containers)).max(0.0);
        let cpu = (group.cpu_intercept
            + group.cpu_per_container * containers
            + sampler.noise(group.noise.cpu))
        .clamp(0.0, 100.0);
        let tasks = (group.tasks_intercept
            + group.tasks_per_cpu_pct * cpu
            + sampler.noise(group.noise.tasks))
        .max(0.0);
        let latency = (group.latency_intercept_s
            + group.latency_per_cpu_pct * cpu
            + sampler.noise(group.noise.latency))
        .max(0.0);
        let cores = (group.total_cores * cpu / 100.0 + sampler.noise(group.noise.cores))
            .clamp(0.0, group.total_cores);
        let ssd =
            (group.ssd_base_gb + group.ssd_per_core_gb * cores + sampler.noise(group.noise.ssd))
                .max(0.0);
        let ram =
            (group.ram_base_gb + group.ram_per_core_gb * cores + sampler.noise(group.noise.ram))
                .max(0.0);
        let data_read =
            (group.bytes_per_task * tasks + sampler.noise(group.noise.data_read)).max(0.0);
        rows.push(MachineObservation {
            timestamp_hour: hour,
            machine_id: id.clone(),
            group_id: group.group_id.clone(),
            cpu_util_pct: cpu,
            running_containers: containers,
            total_data_read_bytes: data_read,
            tasks_finished: tasks,
            avg_task_latency_s: latency,
            cores_used: cores,
            ssd_used_gb: ssd,
            ram_used_gb: ram,
        });
    }
    rows
}

/// Generates a full synthetic dataset, deterministically for a given
/// `(spec, seed)` pair regardless of thread count.
pub fn generate_synthetic_cluster(spec: &SyntheticSpec, seed: u64) -> Result<TelemetryDataset> {
    spec.validate()?;

    let groups: Vec<MachineGroup> = spec
        .groups
        .iter()
        .map(|g| MachineGroup {
            group_id: g.group_id.clone(),
            machine_count: g.machines,
            rack_of: (0..g.machines)
                .map(|i| (machine_id(g, i), rack_id(g, i)))
                .collect(),
        })
        .collect();

    let jobs: Vec<(usize, usize)> = spec
        .groups
        .iter()
        .enumerate()
        .flat_map(|(gi, g)| (0..g.machines).map(move |mi| (gi, mi)))
        .collect();
    let observations: Vec<MachineObservation> = jobs
        .into_par_iter()
        .map(|(gi, mi)| {
            let stream = (gi as u64) << 24 | mi as u64;
            generate_machine(spec, &spec.groups[gi], mi, stream, seed)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    TelemetryDataset::new(
        observations,
        groups,
        spec.capacity_containers,
        spec.high_priority_share,
    )
}
