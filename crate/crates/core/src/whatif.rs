//! Per-group predictive models fitted from telemetry.
//!
//! Each machine group gets a chain of univariate affine models: running
//! containers -> CPU utilization, CPU -> tasks finished per hour, and
//! CPU -> average task latency. A second pair projects SSD and RAM usage
//! from the number of CPU cores used, for future machine design. All fits
//! use a Huber regressor (iteratively reweighted least squares), which is
//! markedly more robust to telemetry outliers than plain least squares.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{median, quantile_lower};
use crate::telemetry::TelemetryDataset;

/// Huber threshold as a multiple of the MAD residual scale, re-estimated
/// every IRLS iteration. 1.35 is the standard 95%-efficiency choice.
pub const DEFAULT_DELTA_SCALE: f64 = 1.35;
pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-8;
/// Minimum observations required to fit a group's model set.
pub const DEFAULT_MIN_SAMPLES: usize = 30;

/// A fitted univariate affine model `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub slope: f64,
    /// Robust residual scale: median absolute residual / 0.6745.
    pub residual_scale: f64,
    #[serde(rename = "n")]
    pub n_samples: usize,
}

impl LinearModel {
    /// Exact affine evaluation; callers clamp domain-specifically.
    pub fn predict(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("predict input {x}")));
        }
        Ok(self.intercept + self.slope * x)
    }
}

/// Convenience free-function form of [`LinearModel::predict`].
pub fn predict(model: &LinearModel, x: f64) -> Result<f64> {
    model.predict(x)
}

/// How the threshold of the Huber loss is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HuberThreshold {
    /// Fixed residual threshold in the units of `y`.
    Absolute(f64),
    /// Multiple of the MAD residual scale, re-estimated each iteration.
    ScaledMad(f64),
}

impl Default for HuberThreshold {
    fn default() -> Self {
        HuberThreshold::ScaledMad(DEFAULT_DELTA_SCALE)
    }
}

fn weighted_affine_fit(xs: &[f64], ys: &[f64], weights: &[f64]) -> Result<(f64, f64)> {
    let mut sw = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((&x, &y), &w) in xs.iter().zip(ys).zip(weights) {
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    if det.abs() <= f64::EPSILON * sw * sxx.max(1.0) {
        return Err(Error::DegenerateRegressor(
            "x values have zero variance".into(),
        ));
    }
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / sw;
    Ok((intercept, slope))
}

fn mad_scale(residuals: &[f64]) -> f64 {
    let abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    median(&abs) / 0.6745
}

fn check_finite_pairs(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput(format!(
            "x and y lengths differ: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 samples, got {}",
            xs.len()
        )));
    }
    for (&x, &y) in xs.iter().zip(ys) {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::NonFinite(format!("regression sample ({x}, {y})")));
        }
    }
    Ok(())
}

/// Minimizes the Huber loss by iteratively reweighted least squares.
///
/// Weights are `min(1, delta / |residual|)`; with `ScaledMad` the
/// threshold tracks the current residual scale. Converged when the max
/// coefficient change drops below `tol` or after `max_iters` passes.
pub fn fit_huber_with(
    xs: &[f64],
    ys: &[f64],
    threshold: HuberThreshold,
    max_iters: usize,
    tol: f64,
) -> Result<LinearModel> {
    check_finite_pairs(xs, ys)?;
    match threshold {
        HuberThreshold::Absolute(delta) if !(delta.is_finite() && delta > 0.0) => {
            return Err(Error::InvalidInput(format!(
                "huber delta must be positive, got {delta}"
            )));
        }
        HuberThreshold::ScaledMad(k) if !(k.is_finite() && k > 0.0) => {
            return Err(Error::InvalidInput(format!(
                "huber scale factor must be positive, got {k}"
            )));
        }
        _ => {}
    }

    let n = xs.len();
    let mut weights = vec![1.0; n];
    let (mut intercept, mut slope) = weighted_affine_fit(xs, ys, &weights)?;
    let mut residuals: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| y - intercept - slope * x)
        .collect();

    let y_mag = ys.iter().fold(0.0f64, |acc, y| acc.max(y.abs())).max(1.0);
    for _ in 0..max_iters {
        let scale = mad_scale(&residuals);
        // Perfect fit: nothing left to reweight.
        if residuals.iter().all(|r| r.abs() <= 1e-12 * y_mag) {
            break;
        }
        let delta = match threshold {
            HuberThreshold::Absolute(d) => d,
            HuberThreshold::ScaledMad(k) => (k * scale).max(1e-12 * y_mag),
        };
        for (w, r) in weights.iter_mut().zip(&residuals) {
            *w = if r.abs() <= delta {
                1.0
            } else {
                delta / r.abs()
            };
        }
        let (new_intercept, new_slope) = weighted_affine_fit(xs, ys, &weights)?;
        let change = (new_intercept - intercept)
            .abs()
            .max((new_slope - slope).abs());
        intercept = new_intercept;
        slope = new_slope;
        for (r, (&x, &y)) in residuals.iter_mut().zip(xs.iter().zip(ys)) {
            *r = y - intercept - slope * x;
        }
        if change < tol {
            break;
        }
    }

    Ok(LinearModel {
        intercept,
        slope,
        residual_scale: mad_scale(&residuals),
        n_samples: n,
    })
}

/// [`fit_huber_with`] with a fixed absolute threshold.
pub fn fit_huber(
    xs: &[f64],
    ys: &[f64],
    delta: f64,
    max_iters: usize,
    tol: f64,
) -> Result<LinearModel> {
    fit_huber_with(xs, ys, HuberThreshold::Absolute(delta), max_iters, tol)
}

/// Statistic used as the group's current operating point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterStat {
    /// Robust to load spikes; the default.
    #[default]
    Median,
    Mean,
    /// Lower-interpolation quantile, e.g. 0.9 for a heavy-load operating
    /// point.
    Quantile(f64),
}

impl CenterStat {
    fn compute(&self, xs: &[f64]) -> Result<f64> {
        match *self {
            CenterStat::Median => Ok(median(xs)),
            CenterStat::Mean => Ok(crate::stats::mean(xs)),
            CenterStat::Quantile(q) => {
                if !(q > 0.0 && q < 1.0) {
                    return Err(Error::InvalidInput(format!(
                        "center quantile {q} outside (0,1)"
                    )));
                }
                Ok(quantile_lower(xs, q))
            }
        }
    }
}

/// Knobs for [`fit_model_set`] / [`fit_resource_models`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub threshold: HuberThreshold,
    pub max_iters: usize,
    pub tol: f64,
    pub min_samples: usize,
    pub center: CenterStat,
    /// Fit on per-machine daily means instead of hourly rows.
    pub daily_aggregate: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            threshold: HuberThreshold::default(),
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            min_samples: DEFAULT_MIN_SAMPLES,
            center: CenterStat::default(),
            daily_aggregate: false,
        }
    }
}

/// The calibrated model chain for one machine group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupModelSet {
    pub group_id: String,
    /// Running containers -> CPU utilization %.
    #[serde(rename = "g")]
    pub containers_to_cpu: LinearModel,
    /// CPU utilization % -> tasks finished per hour.
    #[serde(rename = "h")]
    pub cpu_to_tasks: LinearModel,
    /// CPU utilization % -> average task latency in seconds.
    #[serde(rename = "f")]
    pub cpu_to_latency: LinearModel,
    /// Current operating point: center of observed running containers.
    #[serde(rename = "m_current")]
    pub current_containers: f64,
}

/// SSD/RAM projections from cores used, for machine design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceModels {
    pub group_id: String,
    /// Cores used -> SSD GB used.
    #[serde(rename = "p")]
    pub cores_to_ssd: LinearModel,
    /// Cores used -> RAM GB used.
    #[serde(rename = "q")]
    pub cores_to_ram: LinearModel,
    /// Per-observation (ssd GB/core, ram GB/core) slopes, jointly paired,
    /// capturing the empirical slope distribution for simulation.
    #[serde(rename = "beta_samples")]
    pub per_core_samples: Vec<(f64, f64)>,
}

struct GroupColumns {
    containers: Vec<f64>,
    cpu: Vec<f64>,
    tasks: Vec<f64>,
    latency: Vec<f64>,
    cores: Vec<f64>,
    ssd: Vec<f64>,
    ram: Vec<f64>,
}

fn group_columns(
    dataset: &TelemetryDataset,
    group_id: &str,
    opts: &FitOptions,
) -> Result<GroupColumns> {
    dataset.group(group_id)?;
    let rows: Vec<_> = dataset
        .observations()
        .iter()
        .filter(|o| o.group_id == group_id)
        .collect();
    let mut cols = GroupColumns {
        containers: Vec::new(),
        cpu: Vec::new(),
        tasks: Vec::new(),
        latency: Vec::new(),
        cores: Vec::new(),
        ssd: Vec::new(),
        ram: Vec::new(),
    };
    if opts.daily_aggregate {
        // Mean per (machine, day); tasks are summed like the hourly rows
        // they aggregate, everything else is a level and gets averaged.
        let mut acc: BTreeMap<(String, i64), (usize, [f64; 7])> = BTreeMap::new();
        for o in &rows {
            let entry = acc
                .entry((o.machine_id.clone(), o.timestamp_hour.day_index()))
                .or_insert((0, [0.0; 7]));
            entry.0 += 1;
            let vals = [
                o.running_containers,
                o.cpu_util_pct,
                o.tasks_finished,
                o.avg_task_latency_s,
                o.cores_used,
                o.ssd_used_gb,
                o.ram_used_gb,
            ];
            for (sum, v) in entry.1.iter_mut().zip(vals) {
                *sum += v;
            }
        }
        for (_, (count, sums)) in acc {
            let n = count as f64;
            cols.containers.push(sums[0] / n);
            cols.cpu.push(sums[1] / n);
            cols.tasks.push(sums[2] / n);
            cols.latency.push(sums[3] / n);
            cols.cores.push(sums[4] / n);
            cols.ssd.push(sums[5] / n);
            cols.ram.push(sums[6] / n);
        }
    } else {
        for o in &rows {
            cols.containers.push(o.running_containers);
            cols.cpu.push(o.cpu_util_pct);
            cols.tasks.push(o.tasks_finished);
            cols.latency.push(o.avg_task_latency_s);
            cols.cores.push(o.cores_used);
            cols.ssd.push(o.ssd_used_gb);
            cols.ram.push(o.ram_used_gb);
        }
    }
    if cols.containers.len() < opts.min_samples {
        return Err(Error::InsufficientSamples {
            group_id: group_id.to_string(),
            have: cols.containers.len(),
            need: opts.min_samples,
        });
    }
    Ok(cols)
}

/// Fits the containers -> CPU -> tasks/latency chain for one group.
pub fn fit_model_set(
    dataset: &TelemetryDataset,
    group_id: &str,
    opts: &FitOptions,
) -> Result<GroupModelSet> {
    let cols = group_columns(dataset, group_id, opts)?;
    let fit =
        |xs: &[f64], ys: &[f64]| fit_huber_with(xs, ys, opts.threshold, opts.max_iters, opts.tol);
    Ok(GroupModelSet {
        group_id: group_id.to_string(),
        containers_to_cpu: fit(&cols.containers, &cols.cpu)?,
        cpu_to_tasks: fit(&cols.cpu, &cols.tasks)?,
        cpu_to_latency: fit(&cols.cpu, &cols.latency)?,
        current_containers: opts.center.compute(&cols.containers)?,
    })
}

/// Fits the cores -> SSD/RAM projections plus the per-observation slope
/// samples `((ssd - intercept) / cores, (ram - intercept) / cores)`.
/// Observations with zero cores still inform the regression but produce
/// no slope sample.
pub fn fit_resource_models(
    dataset: &TelemetryDataset,
    group_id: &str,
    opts: &FitOptions,
) -> Result<ResourceModels> {
    let cols = group_columns(dataset, group_id, opts)?;
    if cols.cores.iter().all(|&c| c == 0.0) {
        return Err(Error::DegenerateRegressor(format!(
            "group `{group_id}` has cores_used = 0 everywhere"
        )));
    }
    let cores_to_ssd = fit_huber_with(
        &cols.cores,
        &cols.ssd,
        opts.threshold,
        opts.max_iters,
        opts.tol,
    )?;
    let cores_to_ram = fit_huber_with(
        &cols.cores,
        &cols.ram,
        opts.threshold,
        opts.max_iters,
        opts.tol,
    )?;
    let per_core_samples: Vec<(f64, f64)> = cols
        .cores
        .iter()
        .zip(cols.ssd.iter().zip(&cols.ram))
        .filter(|(&c, _)| c > 0.0)
        .map(|(&c, (&s, &r))| {
            (
                (s - cores_to_ssd.intercept) / c,
                (r - cores_to_ram.intercept) / c,
            )
        })
        .collect();
    if per_core_samples.is_empty() {
        return Err(Error::DegenerateRegressor(format!(
            "group `{group_id}` yields no per-core slope samples"
        )));
    }
    Ok(ResourceModels {
        group_id: group_id.to_string(),
        cores_to_ssd,
        cores_to_ram,
        per_core_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{generate_synthetic_cluster, NoiseSpec, SyntheticSpec};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;

    /// Closed-form ordinary least squares, the independent oracle.
    fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;
        (intercept, slope)
    }

    #[test]
    fn noiseless_line_recovered() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        for delta in [0.1, 1.0, 1e6] {
            let m = fit_huber(&xs, &ys, delta, 100, 1e-10).unwrap();
            assert_relative_eq!(m.slope, 2.0, epsilon = 1e-9);
            assert_relative_eq!(m.intercept, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn huge_delta_matches_ols_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 3.0 * x - 2.0 + rng.random_range(-0.5..0.5))
            .collect();
        let m = fit_huber(&xs, &ys, 1e9, 100, 1e-10).unwrap();
        let (b0, b1) = ols(&xs, &ys);
        assert!((m.intercept - b0).abs() < 1e-6);
        assert!((m.slope - b1).abs() < 1e-6);
    }

    /// Construction shared with the acceptance suite: a clean line with 5%
    /// gross +100 outliers stacked at the high-leverage end.
    pub(crate) fn outlier_sample() -> (Vec<f64>, Vec<f64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 100;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 * 0.2).collect();
        let mut ys: Vec<f64> = xs
            .iter()
            .map(|x| 2.0 * x + 1.0 + rng.random_range(-0.2..0.2))
            .collect();
        for y in ys.iter_mut().rev().take(n / 20) {
            *y += 100.0;
        }
        (xs, ys)
    }

    #[test]
    fn outliers_break_ols_but_not_huber() {
        let (xs, ys) = outlier_sample();
        let huber = fit_huber_with(&xs, &ys, HuberThreshold::default(), 100, 1e-9).unwrap();
        let (_, ols_slope) = ols(&xs, &ys);
        assert!(
            (huber.slope - 2.0).abs() < 0.05,
            "huber slope {} strayed",
            huber.slope
        );
        assert!(
            (ols_slope - 2.0).abs() > 0.5,
            "ols slope {ols_slope} unexpectedly robust"
        );
    }

    #[test]
    fn degenerate_x_is_rejected() {
        let xs = vec![3.0; 10];
        let ys: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(
            fit_huber(&xs, &ys, 1.0, 50, 1e-8),
            Err(Error::DegenerateRegressor(_))
        ));
    }

    #[test]
    fn non_finite_inputs_rejected() {
        assert!(matches!(
            fit_huber(&[0.0, f64::NAN], &[0.0, 1.0], 1.0, 10, 1e-8),
            Err(Error::NonFinite(_))
        ));
        let model = LinearModel {
            intercept: 0.0,
            slope: 1.0,
            residual_scale: 0.0,
            n_samples: 2,
        };
        assert!(model.predict(f64::INFINITY).is_err());
    }

    #[test]
    fn predict_is_affine() {
        let model = LinearModel {
            intercept: 1.0,
            slope: 10.0,
            residual_scale: 0.0,
            n_samples: 2,
        };
        assert_eq!(model.predict(8.0).unwrap(), 81.0);
        assert_eq!(model.predict(0.0).unwrap(), 1.0);
        let ident = LinearModel {
            intercept: 0.0,
            slope: 1.0,
            ..model
        };
        assert_eq!(ident.predict(7.0).unwrap(), 7.0);
    }

    fn zero_noise_spec() -> SyntheticSpec {
        let mut spec = SyntheticSpec {
            days: 3,
            ..SyntheticSpec::default()
        };
        spec.groups.truncate(1);
        let g = &mut spec.groups[0];
        g.machines = 4;
        g.cpu_intercept = 0.0;
        g.cpu_per_container = 10.0;
        g.ssd_base_gb = 50.0;
        g.ssd_per_core_gb = 25.0;
        g.base_containers = 5.0;
        g.demand_amplitude = 2.0;
        g.noise = NoiseSpec::zero();
        spec
    }

    #[test]
    fn model_set_recovers_generator_truth() {
        let spec = zero_noise_spec();
        let ds = generate_synthetic_cluster(&spec, 9).unwrap();
        let set = fit_model_set(&ds, &spec.groups[0].group_id, &FitOptions::default()).unwrap();
        assert_relative_eq!(set.containers_to_cpu.slope, 10.0, epsilon = 1e-6);
        assert_relative_eq!(set.containers_to_cpu.intercept, 0.0, epsilon = 1e-6);
        assert_relative_eq!(
            set.cpu_to_latency.slope,
            spec.groups[0].latency_per_cpu_pct,
            epsilon = 1e-6
        );
    }

    #[test]
    fn resource_models_recover_generator_truth() {
        let spec = zero_noise_spec();
        let ds = generate_synthetic_cluster(&spec, 9).unwrap();
        let models =
            fit_resource_models(&ds, &spec.groups[0].group_id, &FitOptions::default()).unwrap();
        assert_relative_eq!(models.cores_to_ssd.intercept, 50.0, epsilon = 1e-6);
        assert_relative_eq!(models.cores_to_ssd.slope, 25.0, epsilon = 1e-6);
        for (bs, _) in &models.per_core_samples {
            assert_relative_eq!(*bs, 25.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn zero_core_rows_inform_regression_but_not_slope_samples() {
        use crate::telemetry::{MachineGroup, MachineObservation, TelemetryDataset, UtcHour};
        let mut observations = Vec::new();
        for i in 0..40i64 {
            // One row per hour; the first has zero cores in use.
            let cores = if i == 0 { 0.0 } else { i as f64 * 0.5 };
            observations.push(MachineObservation {
                timestamp_hour: UtcHour(i),
                machine_id: "m0".into(),
                group_id: "g".into(),
                cpu_util_pct: 50.0,
                running_containers: i as f64,
                total_data_read_bytes: 0.0,
                tasks_finished: 1.0,
                avg_task_latency_s: 1.0,
                cores_used: cores,
                ssd_used_gb: 50.0 + 25.0 * cores,
                ram_used_gb: 10.0 + 4.0 * cores,
            });
        }
        let ds = TelemetryDataset::new(
            observations,
            vec![MachineGroup {
                group_id: "g".into(),
                machine_count: 1,
                rack_of: [("m0".to_string(), "r0".to_string())].into_iter().collect(),
            }],
            100.0,
            0.6,
        )
        .unwrap();
        let models = fit_resource_models(&ds, "g", &FitOptions::default()).unwrap();
        assert_eq!(models.cores_to_ssd.n_samples, 40);
        assert_eq!(models.per_core_samples.len(), 39);
        assert_relative_eq!(models.cores_to_ssd.slope, 25.0, epsilon = 1e-6);
    }

    #[test]
    fn noisy_fit_within_three_standard_errors() {
        let mut spec = SyntheticSpec {
            days: 7,
            ..SyntheticSpec::default()
        };
        spec.groups.truncate(1);
        spec.groups[0].machines = 8;
        let truth = spec.groups[0].cpu_per_container;
        let ds = generate_synthetic_cluster(&spec, 21).unwrap();
        let set = fit_model_set(&ds, &spec.groups[0].group_id, &FitOptions::default()).unwrap();

        // Standard error of the slope from the OLS formula on the same
        // columns (oracle).
        let rows: Vec<_> = ds
            .observations()
            .iter()
            .filter(|o| o.group_id == spec.groups[0].group_id)
            .collect();
        let xs: Vec<f64> = rows.iter().map(|o| o.running_containers).collect();
        let ys: Vec<f64> = rows.iter().map(|o| o.cpu_util_pct).collect();
        let (b0, b1) = ols(&xs, &ys);
        let resid_var: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - b0 - b1 * x).powi(2))
            .sum::<f64>()
            / (xs.len() - 2) as f64;
        let x_mean = crate::stats::mean(&xs);
        let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
        let se = (resid_var / sxx).sqrt();
        assert!(
            (set.containers_to_cpu.slope - truth).abs() < 3.0 * se,
            "slope {} vs truth {truth} (se {se})",
            set.containers_to_cpu.slope
        );

        // Mean of the per-core slope samples lands within three standard
        // errors of the generator's slope.
        let res =
            fit_resource_models(&ds, &spec.groups[0].group_id, &FitOptions::default()).unwrap();
        let samples: Vec<f64> = res.per_core_samples.iter().map(|s| s.0).collect();
        let mean_bs = crate::stats::mean(&samples);
        let se_bs = (crate::stats::sample_variance(&samples) / samples.len() as f64).sqrt();
        assert!(
            (mean_bs - spec.groups[0].ssd_per_core_gb).abs() < 3.0 * se_bs,
            "sample-mean slope {mean_bs} vs truth {} (se {se_bs})",
            spec.groups[0].ssd_per_core_gb
        );
    }

    #[test]
    fn constant_containers_is_degenerate() {
        let mut spec = zero_noise_spec();
        spec.groups[0].demand_amplitude = 0.0;
        let ds = generate_synthetic_cluster(&spec, 1).unwrap();
        let err = fit_model_set(&ds, &spec.groups[0].group_id, &FitOptions::default());
        assert!(matches!(err, Err(Error::DegenerateRegressor(_))));
    }

    #[test]
    fn unknown_group_and_min_samples() {
        let spec = zero_noise_spec();
        let ds = generate_synthetic_cluster(&spec, 1).unwrap();
        assert!(matches!(
            fit_model_set(&ds, "nope", &FitOptions::default()),
            Err(Error::UnknownGroup { .. })
        ));
        let opts = FitOptions {
            min_samples: 10_000,
            ..FitOptions::default()
        };
        assert!(matches!(
            fit_model_set(&ds, &spec.groups[0].group_id, &opts),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn daily_aggregation_preserves_exact_relations() {
        // Points on a line stay on it under per-day averaging, so the
        // aggregated fit recovers the same coefficients. Demand must vary
        // across days for the aggregates to carry any spread.
        use crate::telemetry::{MachineGroup, MachineObservation, TelemetryDataset, UtcHour};
        let mut observations = Vec::new();
        for day in 0..35i64 {
            for hod in 0..24i64 {
                let containers = day as f64 * 0.2 + hod as f64 / 48.0;
                observations.push(MachineObservation {
                    timestamp_hour: UtcHour(day * 24 + hod),
                    machine_id: "m0".into(),
                    group_id: "g".into(),
                    cpu_util_pct: 10.0 * containers,
                    running_containers: containers,
                    total_data_read_bytes: 0.0,
                    tasks_finished: 1.0,
                    avg_task_latency_s: 1.0,
                    cores_used: 1.0,
                    ssd_used_gb: 1.0,
                    ram_used_gb: 1.0,
                });
            }
        }
        let ds = TelemetryDataset::new(
            observations,
            vec![MachineGroup {
                group_id: "g".into(),
                machine_count: 1,
                rack_of: [("m0".to_string(), "r0".to_string())].into_iter().collect(),
            }],
            100.0,
            0.6,
        )
        .unwrap();
        let opts = FitOptions {
            daily_aggregate: true,
            ..FitOptions::default()
        };
        let set = fit_model_set(&ds, "g", &opts).unwrap();
        assert_eq!(set.containers_to_cpu.n_samples, 35);
        assert_relative_eq!(set.containers_to_cpu.slope, 10.0, epsilon = 1e-6);
    }

    #[test]
    fn center_stat_variants() {
        let xs = [1.0, 2.0, 3.0, 4.0, 100.0];
        assert_eq!(CenterStat::Median.compute(&xs).unwrap(), 3.0);
        assert_eq!(CenterStat::Mean.compute(&xs).unwrap(), 22.0);
        assert_eq!(CenterStat::Quantile(0.75).compute(&xs).unwrap(), 4.0);
        assert!(CenterStat::Quantile(1.5).compute(&xs).is_err());
    }

    #[test]
    fn model_set_serializes_with_short_keys() {
        let spec = zero_noise_spec();
        let ds = generate_synthetic_cluster(&spec, 9).unwrap();
        let set = fit_model_set(&ds, &spec.groups[0].group_id, &FitOptions::default()).unwrap();
        let json = serde_json::to_string(&set).unwrap();
        for key in ["\"g\"", "\"h\"", "\"f\"", "\"m_current\"", "\"n\""] {
            assert!(json.contains(key), "missing {key} in {json}");
        }
        let back: GroupModelSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, set);
    }
}
