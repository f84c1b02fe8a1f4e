//! The six pipeline commands. Each reads its inputs, runs the
//! corresponding core pipeline, writes files into the output directory,
//! and returns a one-paragraph summary.
//!
//! Error classification drives the exit code: problems with the
//! configuration or input files are validation errors (exit 1), failures
//! during computation or output emission are runtime errors (exit 2).

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, Context, Result};

use kea_core::flighting::{
    assign_groups, capping_markdown, capping_report, slice_label, ExperimentDesign, MachineUsage,
    GROUP_ALL,
};
use kea_core::pricing::{
    enumerate_scenarios, scenario_shift, scenarios_csv, shifted_demand_csv, ChoiceParams,
    ScenarioKnobs,
};
use kea_core::sku::{cost_surface, pick_design, surface_csv};
use kea_core::telemetry::{
    generate_synthetic_cluster, hourly_demand_profile, load_cluster_info, load_demand,
    load_telemetry, save_demand, save_telemetry, TelemetryDataset,
};
use kea_core::whatif::{
    fit_model_set, fit_resource_models, CenterStat, FitOptions, GroupModelSet, ResourceModels,
};
use kea_core::yarn::{optimize_max_containers, plan_markdown, YarnPlan};

use crate::config::RunConfig;
use crate::report::{list_paths, write_json, write_text};

/// Exit 1 for validation problems, 2 for runtime failures.
#[derive(Debug)]
pub struct CliError {
    pub error: anyhow::Error,
    pub code: i32,
}

pub fn validation(error: anyhow::Error) -> CliError {
    CliError { error, code: 1 }
}

pub fn runtime(error: anyhow::Error) -> CliError {
    CliError { error, code: 2 }
}

trait Phase<T> {
    fn or_validation(self) -> Result<T, CliError>;
    fn or_runtime(self) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> Phase<T> for Result<T, E> {
    fn or_validation(self) -> Result<T, CliError> {
        self.map_err(|e| validation(e.into()))
    }

    fn or_runtime(self) -> Result<T, CliError> {
        self.map_err(|e| runtime(e.into()))
    }
}

pub fn gen(config: &RunConfig) -> Result<String, CliError> {
    let seed = config.require_seed("gen").or_validation()?;
    let dataset = generate_synthetic_cluster(&config.telemetry, seed).or_validation()?;
    let demand = if dataset.is_empty() {
        None
    } else {
        Some(hourly_demand_profile(&dataset).or_runtime()?)
    };

    let csv_path = config.output_dir.join("gen_telemetry.csv");
    std::fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("cannot create {}", config.output_dir.display()))
        .or_runtime()?;
    save_telemetry(&dataset, &csv_path).or_runtime()?;
    let mut paths = vec![
        csv_path.clone(),
        csv_path.with_file_name("gen_telemetry.cluster.json"),
    ];
    if let Some(demand) = &demand {
        let demand_path = config.output_dir.join("gen_demand.csv");
        save_demand(demand, &demand_path).or_runtime()?;
        paths.push(demand_path);
    }
    Ok(format!(
        "generated {} machine-hour rows for {} groups over {} days (seed {}); wrote {}",
        dataset.observations().len(),
        dataset.groups().len(),
        config.telemetry.days,
        seed,
        list_paths(&paths),
    ))
}

fn load_dataset(path: &Path) -> Result<TelemetryDataset, CliError> {
    load_telemetry(path)
        .with_context(|| format!("loading telemetry from {}", path.display()))
        .or_validation()
}

fn fit_all(
    dataset: &TelemetryDataset,
    opts: &FitOptions,
) -> Result<(Vec<GroupModelSet>, Vec<ResourceModels>)> {
    let mut models = Vec::new();
    let mut resources = Vec::new();
    for group in dataset.groups() {
        models.push(fit_model_set(dataset, &group.group_id, opts)?);
        resources.push(fit_resource_models(dataset, &group.group_id, opts)?);
    }
    Ok((models, resources))
}

fn models_markdown(models: &[GroupModelSet]) -> String {
    let mut out = String::from(
        "| group | cpu/container | tasks/cpu% | latency s/cpu% | current containers |\n\
         |---|---|---|---|---|\n",
    );
    for m in models {
        out.push_str(&format!(
            "| {} | {:.4} | {:.4} | {:.6} | {:.2} |\n",
            m.group_id,
            m.containers_to_cpu.slope,
            m.cpu_to_tasks.slope,
            m.cpu_to_latency.slope,
            m.current_containers
        ));
    }
    out
}

pub fn fit(config: &RunConfig) -> Result<String, CliError> {
    let dataset = load_dataset(&config.telemetry_csv_path())?;
    let (models, resources) = fit_all(&dataset, &config.models.fit).or_runtime()?;
    let counts = dataset.machine_counts();

    let paths = vec![
        write_json(&config.output_dir, "fit_models.json", &models).or_runtime()?,
        write_json(&config.output_dir, "fit_resource_models.json", &resources).or_runtime()?,
        write_json(&config.output_dir, "fit_machine_counts.json", &counts).or_runtime()?,
        write_text(
            &config.output_dir,
            "fit_models.md",
            &models_markdown(&models),
        )
        .or_runtime()?,
    ];
    Ok(format!(
        "fitted {} model sets from {} observations; wrote {}",
        models.len(),
        dataset.observations().len(),
        list_paths(&paths),
    ))
}

fn load_models(
    config: &RunConfig,
) -> Result<(Vec<GroupModelSet>, BTreeMap<String, usize>), CliError> {
    let models_path = config.models_json_path();
    let counts_path = config.machine_counts_path();
    let models: Vec<GroupModelSet> = read_json(&models_path)?;
    let counts: BTreeMap<String, usize> = read_json(&counts_path)?;
    Ok((models, counts))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .or_validation()?;
    serde_json::from_str(&text)
        .with_context(|| format!("cannot parse {}", path.display()))
        .or_validation()
}

/// Re-runs the optimization with operating points taken at other demand
/// quantiles and reports whether the suggested change direction holds.
fn quantile_agreement(config: &RunConfig, plan: &YarnPlan) -> Result<String, CliError> {
    let dataset = load_dataset(&config.telemetry_csv_path())?;
    let mut out = String::from("\n## Change direction across operating-point quantiles\n\n");
    for &q in &config.optimizer.check_quantiles {
        let opts = FitOptions {
            center: CenterStat::Quantile(q),
            ..config.models.fit
        };
        let (models, _) = fit_all(&dataset, &opts).or_runtime()?;
        let alt = optimize_max_containers(
            &models,
            &dataset.machine_counts(),
            config.optimizer.delta_max,
            config.optimizer.m_floor,
        )
        .or_runtime()?;
        let disagreeing: Vec<&str> = plan
            .deltas
            .iter()
            .filter(|(group, &delta)| {
                alt.deltas.get(*group).map(|d| d.signum()) != Some(delta.signum())
            })
            .map(|(group, _)| group.as_str())
            .collect();
        if disagreeing.is_empty() {
            out.push_str(&format!("- q={q}: direction agrees for every group\n"));
        } else {
            out.push_str(&format!(
                "- q={q}: direction differs for {}\n",
                disagreeing.join(", ")
            ));
        }
    }
    Ok(out)
}

pub fn optimize_yarn(config: &RunConfig) -> Result<String, CliError> {
    let (models, counts) = load_models(config)?;
    let plan = optimize_max_containers(
        &models,
        &counts,
        config.optimizer.delta_max,
        config.optimizer.m_floor,
    )
    .or_runtime()?;

    let mut md = plan_markdown(&plan);
    if !config.optimizer.check_quantiles.is_empty() {
        md.push_str(&quantile_agreement(config, &plan)?);
    }
    let paths = vec![
        write_json(&config.output_dir, "optimize-yarn_plan.json", &plan).or_runtime()?,
        write_text(&config.output_dir, "optimize-yarn_plan.md", &md).or_runtime()?,
    ];
    Ok(format!(
        "optimized container limits over {} feasible candidates: total containers {:.1} -> {:.1}, \
         cluster avg latency {:.6}s -> {:.6}s; wrote {}",
        plan.feasible_count,
        plan.baseline.total_containers,
        plan.proposed.total_containers,
        plan.baseline.avg_latency_s,
        plan.proposed.avg_latency_s,
        list_paths(&paths),
    ))
}

pub fn design_sku(config: &RunConfig) -> Result<String, CliError> {
    let seed = config.require_seed("design-sku").or_validation()?;
    let resources: Vec<ResourceModels> = read_json(&config.resource_models_path())?;
    let chosen = match &config.sku.group_id {
        Some(id) => resources
            .iter()
            .find(|r| &r.group_id == id)
            .ok_or_else(|| validation(anyhow!("no resource models for group `{id}`")))?,
        None => resources
            .first()
            .ok_or_else(|| validation(anyhow!("resource model file is empty")))?,
    };
    let ssd_grid = config.sku.ssd_grid.linspace().or_validation()?;
    let ram_grid = config.sku.ram_grid.linspace().or_validation()?;
    let surface = cost_surface(
        chosen,
        &ssd_grid,
        &ram_grid,
        &config.sku.cost,
        config.sku.draws,
        seed,
        config.sku.sampling,
    )
    .or_runtime()?;
    let (best_ssd, best_ram, best_cost) = pick_design(&surface).or_runtime()?;

    let summary_md = format!(
        "# Machine design for {}\n\nGrid: {} SSD x {} RAM sizes, {} draws per cell, seed {}.\n\n\
         Lowest expected cost {:.4} at **{:.0} GB SSD / {:.0} GB RAM** \
         (cores fixed at {}).\n",
        chosen.group_id,
        ssd_grid.len(),
        ram_grid.len(),
        config.sku.draws,
        seed,
        best_cost,
        best_ssd,
        best_ram,
        config.sku.cost.c_max,
    );
    let paths = vec![
        write_text(
            &config.output_dir,
            "design-sku_surface.csv",
            &surface_csv(&surface),
        )
        .or_runtime()?,
        write_text(&config.output_dir, "design-sku_summary.md", &summary_md).or_runtime()?,
    ];
    Ok(format!(
        "simulated {} designs for group {}: sweet spot {:.0} GB SSD / {:.0} GB RAM at cost {:.4}; wrote {}",
        ssd_grid.len() * ram_grid.len(),
        chosen.group_id,
        best_ssd,
        best_ram,
        best_cost,
        list_paths(&paths),
    ))
}

fn pricing_capacity(config: &RunConfig) -> Result<f64, CliError> {
    if let Some(capacity) = config.pricing.capacity {
        return Ok(capacity);
    }
    let telemetry_csv = config.telemetry_csv_path();
    if let Some(info) = load_cluster_info(&telemetry_csv).or_validation()? {
        return Ok(info.capacity_containers);
    }
    Err(validation(anyhow!(
        "no capacity: set pricing.capacity or keep the cluster sidecar next to {}",
        telemetry_csv.display()
    )))
}

pub fn price(config: &RunConfig) -> Result<String, CliError> {
    let demand_path = config.demand_csv_path();
    let demand = load_demand(&demand_path)
        .with_context(|| format!("loading demand from {}", demand_path.display()))
        .or_validation()?;
    let capacity = pricing_capacity(config)?;
    let params = ChoiceParams::new(
        config.pricing.time_sensitivity,
        config.pricing.price_sensitivity,
    )
    .or_validation()?;

    let (table, best) = enumerate_scenarios(
        &demand,
        capacity,
        &config.pricing.grid,
        config.pricing.flexible_share,
        &params,
        &config.pricing.finance,
    )
    .or_runtime()?;

    let best_knobs = ScenarioKnobs {
        discount: best.discount,
        oversub_ratio: best.oversub_ratio,
        window: best.window,
        sla: best.sla,
    };
    let (best_shift, _) = scenario_shift(
        &demand,
        capacity,
        &best_knobs,
        config.pricing.flexible_share,
        &params,
        &config.pricing.finance,
    )
    .or_runtime()?;

    let summary_md = format!(
        "# Pricing scenarios\n\n{} scenarios evaluated on {} demand hours (capacity {:.0}).\n\n\
         Best: discount {:.0}%, oversubscription {:.0}%, window {:02}:00-{:02}:00, SLA {:.0}%,\n\
         {:.0} tokens/hour available, cost per container {:.6} (total cost {:.0}).\n",
        table.len(),
        demand.len(),
        capacity,
        best.discount * 100.0,
        best.oversub_ratio * 100.0,
        best.window.start(),
        best.window.end() % 24,
        best.sla * 100.0,
        best.tokens_available,
        best.cost_per_container,
        best.total_cost,
    );
    let paths = vec![
        write_text(
            &config.output_dir,
            "price_scenarios.csv",
            &scenarios_csv(&table),
        )
        .or_runtime()?,
        write_text(
            &config.output_dir,
            "price_shifted_demand.csv",
            &shifted_demand_csv(&best_shift),
        )
        .or_runtime()?,
        write_text(&config.output_dir, "price_summary.md", &summary_md).or_runtime()?,
    ];
    Ok(format!(
        "evaluated {} pricing scenarios: best (discount {:.0}%, oversub {:.0}%, {}h window, SLA {:.0}%) \
         at cost/container {:.6}; wrote {}",
        table.len(),
        best.discount * 100.0,
        best.oversub_ratio * 100.0,
        best.window.len(),
        best.sla * 100.0,
        best.cost_per_container,
        list_paths(&paths),
    ))
}

/// Per-machine usage totals; CPU time integrates utilization over hours,
/// execution time is tasks times their average latency.
fn machine_usage(dataset: &TelemetryDataset) -> BTreeMap<String, MachineUsage> {
    let mut usage: BTreeMap<String, MachineUsage> = BTreeMap::new();
    for o in dataset.observations() {
        let entry = usage.entry(o.machine_id.clone()).or_insert(MachineUsage {
            data_read_bytes: 0.0,
            cpu_time_s: 0.0,
            exec_time_s: 0.0,
        });
        entry.data_read_bytes += o.total_data_read_bytes;
        entry.cpu_time_s += o.cpu_util_pct / 100.0 * 3600.0;
        entry.exec_time_s += o.tasks_finished * o.avg_task_latency_s;
    }
    usage
}

/// Usage split by time-slice parity instead of machine roster.
fn sliced_usage(
    dataset: &TelemetryDataset,
    slice_hours: u32,
) -> BTreeMap<String, Vec<MachineUsage>> {
    let first_hour = dataset
        .observations()
        .first()
        .map(|o| o.timestamp_hour.0)
        .unwrap_or(0);
    let mut per_machine: BTreeMap<(String, &'static str), MachineUsage> = BTreeMap::new();
    for o in dataset.observations() {
        let label = slice_label(slice_hours, (o.timestamp_hour.0 - first_hour) as u64);
        let entry = per_machine
            .entry((o.machine_id.clone(), label))
            .or_insert(MachineUsage {
                data_read_bytes: 0.0,
                cpu_time_s: 0.0,
                exec_time_s: 0.0,
            });
        entry.data_read_bytes += o.total_data_read_bytes;
        entry.cpu_time_s += o.cpu_util_pct / 100.0 * 3600.0;
        entry.exec_time_s += o.tasks_finished * o.avg_task_latency_s;
    }
    let mut groups: BTreeMap<String, Vec<MachineUsage>> = BTreeMap::new();
    for ((_, label), usage) in per_machine {
        groups.entry(label.to_string()).or_default().push(usage);
    }
    groups
}

pub fn flight_analyze(config: &RunConfig) -> Result<String, CliError> {
    let dataset = load_dataset(&config.flighting_csv_path())?;
    let mut rack_of = BTreeMap::new();
    for group in dataset.groups() {
        rack_of.extend(group.rack_of.clone());
    }
    let machines: Vec<String> = rack_of.keys().cloned().collect();

    let design = match config.flighting.design.as_str() {
        "ideal" => ExperimentDesign::Ideal { rack_of },
        "time_slicing" => ExperimentDesign::TimeSlicing {
            slice_hours: config.flighting.slice_hours,
        },
        "hybrid" => {
            if config.flighting.rosters.is_empty() {
                return Err(validation(anyhow!("hybrid design needs flighting.rosters")));
            }
            ExperimentDesign::Hybrid {
                rosters: config.flighting.rosters.clone(),
            }
        }
        other => {
            return Err(validation(anyhow!(
                "unknown flighting design `{other}` (expected ideal, time_slicing or hybrid)"
            )))
        }
    };
    let assignment = assign_groups(&design, &machines).or_validation()?;

    let groups: BTreeMap<String, Vec<MachineUsage>> = match &design {
        ExperimentDesign::TimeSlicing { slice_hours } => sliced_usage(&dataset, *slice_hours),
        _ => {
            let usage = machine_usage(&dataset);
            let mut groups: BTreeMap<String, Vec<MachineUsage>> = BTreeMap::new();
            for (machine, label) in &assignment.labels {
                if let Some(u) = usage.get(machine) {
                    groups.entry(label.clone()).or_default().push(*u);
                }
            }
            groups
        }
    };
    let rows = capping_report(&groups, &config.flighting.baseline_label).or_runtime()?;

    let mut groups_csv = String::from("machine_id,label\n");
    for (machine, label) in &assignment.labels {
        let effective = if label == GROUP_ALL {
            "time-sliced"
        } else {
            label
        };
        groups_csv.push_str(&format!("{machine},{effective}\n"));
    }
    let mut report_md = format!(
        "# Flighting report ({} design, baseline {})\n\n",
        config.flighting.design, config.flighting.baseline_label
    );
    if !assignment.excluded.is_empty() {
        report_md.push_str(&format!(
            "Excluded (single-machine racks): {}\n\n",
            assignment.excluded.join(", ")
        ));
    }
    report_md.push_str(&capping_markdown(&rows, &config.flighting.baseline_label));

    let paths = vec![
        write_text(&config.output_dir, "flight-analyze_groups.csv", &groups_csv).or_runtime()?,
        write_text(&config.output_dir, "flight-analyze_report.md", &report_md).or_runtime()?,
    ];
    let significant = rows.iter().filter(|r| r.significant_at_95).count();
    Ok(format!(
        "analyzed {} machines in {} comparison groups: {} of {} metric comparisons significant at 95%; wrote {}",
        assignment.labels.len(),
        groups.len(),
        significant,
        rows.len(),
        list_paths(&paths),
    ))
}
