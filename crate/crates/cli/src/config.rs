//! Run configuration: a JSON document with one section per pipeline
//! stage, every key defaulted, unknown keys rejected. Command-line
//! overrides beat file values beat defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use kea_core::pricing::{DistanceMode, FinanceConfig, ScenarioGrid};
use kea_core::sku::{CostConfig, SlopeSampling};
use kea_core::telemetry::SyntheticSpec;
use kea_core::whatif::FitOptions;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Required for stochastic commands (gen, design-sku).
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub telemetry: SyntheticSpec,
    pub models: ModelsSection,
    pub optimizer: OptimizerSection,
    pub sku: SkuSection,
    pub pricing: PricingSection,
    pub flighting: FlightingSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            output_dir: PathBuf::from("out"),
            telemetry: SyntheticSpec::default(),
            models: ModelsSection::default(),
            optimizer: OptimizerSection::default(),
            sku: SkuSection::default(),
            pricing: PricingSection::default(),
            flighting: FlightingSection::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsSection {
    /// Defaults to `<output_dir>/gen_telemetry.csv`.
    pub telemetry_csv: Option<PathBuf>,
    pub fit: FitOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    /// Defaults to `<output_dir>/fit_models.json`.
    pub models_json: Option<PathBuf>,
    /// Defaults to `<output_dir>/fit_machine_counts.json`.
    pub machine_counts_json: Option<PathBuf>,
    pub delta_max: u32,
    pub m_floor: i64,
    /// Extra operating-point quantiles; when non-empty the plan report
    /// states whether the suggested change direction agrees across them
    /// (refitted from telemetry).
    pub check_quantiles: Vec<f64>,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        OptimizerSection {
            models_json: None,
            machine_counts_json: None,
            delta_max: 1,
            m_floor: 1,
            check_quantiles: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            min: 0.0,
            max: 1.0,
            points: 20,
        }
    }
}

impl GridSpec {
    pub fn linspace(&self) -> Result<Vec<f64>> {
        if self.points < 1 || self.max.is_nan() || self.min.is_nan() || self.max <= self.min {
            bail!(
                "grid must have at least 1 point and max > min, got [{}, {}] x {}",
                self.min,
                self.max,
                self.points
            );
        }
        if self.points == 1 {
            return Ok(vec![self.min]);
        }
        let step = (self.max - self.min) / (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|i| self.min + step * i as f64)
            .collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkuSection {
    /// Defaults to `<output_dir>/fit_resource_models.json`.
    pub resource_models_json: Option<PathBuf>,
    /// Group to design for; defaults to the first fitted group.
    pub group_id: Option<String>,
    pub ssd_grid: GridSpec,
    pub ram_grid: GridSpec,
    pub draws: u32,
    pub cost: CostConfig,
    pub sampling: SlopeSampling,
}

impl Default for SkuSection {
    fn default() -> Self {
        SkuSection {
            resource_models_json: None,
            group_id: None,
            ssd_grid: GridSpec {
                min: 1000.0,
                max: 4000.0,
                points: 20,
            },
            ram_grid: GridSpec {
                min: 200.0,
                max: 800.0,
                points: 20,
            },
            draws: 1000,
            cost: CostConfig::default(),
            sampling: SlopeSampling::Joint,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PricingSection {
    /// Defaults to `<output_dir>/gen_demand.csv`.
    pub demand_csv: Option<PathBuf>,
    /// Defaults to the capacity recorded next to the telemetry CSV.
    pub capacity: Option<f64>,
    pub flexible_share: f64,
    pub time_sensitivity: f64,
    pub price_sensitivity: f64,
    pub distance: DistanceMode,
    pub finance: FinanceConfig,
    pub grid: ScenarioGrid,
}

impl Default for PricingSection {
    fn default() -> Self {
        PricingSection {
            demand_csv: None,
            capacity: None,
            flexible_share: 0.3,
            time_sensitivity: -0.3,
            price_sensitivity: -1.5,
            distance: DistanceMode::Circular,
            finance: FinanceConfig::default(),
            grid: ScenarioGrid::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlightingSection {
    /// Defaults to `<output_dir>/gen_telemetry.csv`.
    pub telemetry_csv: Option<PathBuf>,
    /// One of `ideal`, `time_slicing`, `hybrid`.
    pub design: String,
    pub slice_hours: u32,
    /// machine -> label rosters for the hybrid design.
    pub rosters: BTreeMap<String, String>,
    pub baseline_label: String,
}

impl Default for FlightingSection {
    fn default() -> Self {
        FlightingSection {
            telemetry_csv: None,
            design: "ideal".into(),
            slice_hours: 5,
            rosters: BTreeMap::new(),
            baseline_label: "A".into(),
        }
    }
}

impl RunConfig {
    pub fn telemetry_csv_path(&self) -> PathBuf {
        self.models
            .telemetry_csv
            .clone()
            .unwrap_or_else(|| self.output_dir.join("gen_telemetry.csv"))
    }

    pub fn models_json_path(&self) -> PathBuf {
        self.optimizer
            .models_json
            .clone()
            .unwrap_or_else(|| self.output_dir.join("fit_models.json"))
    }

    pub fn machine_counts_path(&self) -> PathBuf {
        self.optimizer
            .machine_counts_json
            .clone()
            .unwrap_or_else(|| self.output_dir.join("fit_machine_counts.json"))
    }

    pub fn resource_models_path(&self) -> PathBuf {
        self.sku
            .resource_models_json
            .clone()
            .unwrap_or_else(|| self.output_dir.join("fit_resource_models.json"))
    }

    pub fn demand_csv_path(&self) -> PathBuf {
        self.pricing
            .demand_csv
            .clone()
            .unwrap_or_else(|| self.output_dir.join("gen_demand.csv"))
    }

    pub fn flighting_csv_path(&self) -> PathBuf {
        self.flighting
            .telemetry_csv
            .clone()
            .unwrap_or_else(|| self.output_dir.join("gen_telemetry.csv"))
    }

    pub fn require_seed(&self, command: &str) -> Result<u64> {
        self.seed.ok_or_else(|| {
            anyhow!("`{command}` is stochastic and needs a seed; pass --seed or set `seed`")
        })
    }
}

/// Applies one `key=value` override to the raw JSON tree. Keys use dotted
/// paths (`pricing.flexible_share=0.4`); values parse as JSON when they
/// can and fall back to strings.
fn apply_override(root: &mut serde_json::Value, spec: &str) -> Result<()> {
    let (path, raw_value) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{spec}` is not of the form key=value"))?;
    if path.is_empty() {
        bail!("override `{spec}` has an empty key");
    }
    let value: serde_json::Value = serde_json::from_str(raw_value)
        .unwrap_or_else(|_| serde_json::Value::String(raw_value.to_string()));

    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    for segment in &segments[..segments.len() - 1] {
        if !node.is_object() {
            bail!("override `{path}`: `{segment}` does not address an object");
        }
        node = node
            .as_object_mut()
            .expect("checked above")
            .entry(segment.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    let last = segments.last().expect("non-empty path");
    let obj = node
        .as_object_mut()
        .ok_or_else(|| anyhow!("override `{path}` does not address an object"))?;
    obj.insert((*last).to_string(), value);
    Ok(())
}

/// Loads the configuration: file (when given) over defaults, then `--set`
/// overrides, then the dedicated `--seed` / `--out` flags.
pub fn load_config(
    config_path: Option<&Path>,
    sets: &[String],
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<RunConfig> {
    let mut root: serde_json::Value = match config_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("config {} is not valid JSON", path.display()))?
        }
        None => serde_json::Value::Object(Default::default()),
    };
    if !root.is_object() {
        bail!("config root must be a JSON object");
    }
    for spec in sets {
        apply_override(&mut root, spec)?;
    }
    if let Some(seed) = seed {
        apply_override(&mut root, &format!("seed={seed}"))?;
    }
    if let Some(out) = out {
        apply_override(&mut root, &format!("output_dir={}", serde_json::json!(out)))?;
    }
    let config: RunConfig =
        serde_json::from_value(root).context("invalid configuration key or value")?;
    Ok(config)
}
