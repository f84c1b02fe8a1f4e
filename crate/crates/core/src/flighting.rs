//! Production experiment design and statistical comparison.
//!
//! When observational models cannot predict a configuration change, a
//! small slice of the fleet runs it for real. The ideal design alternates
//! machines within each rack between control and experiment so both see
//! near-identical workloads; time slicing alternates one roster between
//! configurations on a cadence chosen to dodge day-of-week effects;
//! hybrid takes explicit rosters. Comparisons use two-sample Student's
//! t-tests on per-machine metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, sample_variance};

/// Two-sided 97.5% Student t quantiles for 1..=30 degrees of freedom.
const T_CRIT_975: [f64; 30] = [
    12.7062, 4.3027, 3.1824, 2.7764, 2.5706, 2.4469, 2.3646, 2.3060, 2.2622, 2.2281, 2.2010,
    2.1788, 2.1604, 2.1448, 2.1314, 2.1199, 2.1098, 2.1009, 2.0930, 2.0860, 2.0796, 2.0739, 2.0687,
    2.0639, 2.0595, 2.0555, 2.0518, 2.0484, 2.0452, 2.0423,
];

/// Critical value of |t| at the 95% two-sided level: table lookup with
/// interpolation for small degrees of freedom, a Cornish-Fisher expansion
/// of the normal quantile beyond the table.
pub fn t_critical_95(dof: f64) -> f64 {
    if dof <= 1.0 {
        return T_CRIT_975[0];
    }
    if dof <= 30.0 {
        let lo = dof.floor() as usize;
        let hi = dof.ceil() as usize;
        if lo == hi {
            return T_CRIT_975[lo - 1];
        }
        let frac = dof - lo as f64;
        return T_CRIT_975[lo - 1] + frac * (T_CRIT_975[hi - 1] - T_CRIT_975[lo - 1]);
    }
    let z = 1.959_963_984_540_054_f64;
    let (z3, z5, z7) = (z.powi(3), z.powi(5), z.powi(7));
    z + (z3 + z) / (4.0 * dof)
        + (5.0 * z5 + 16.0 * z3 + 3.0 * z) / (96.0 * dof * dof)
        + (3.0 * z7 + 19.0 * z5 + 17.0 * z3 - 15.0 * z) / (384.0 * dof.powi(3))
}

/// How machines are split between control and experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentDesign {
    /// Alternate machines within each rack; needs rack assignments.
    Ideal { rack_of: BTreeMap<String, String> },
    /// One roster, configurations alternate in time.
    TimeSlicing { slice_hours: u32 },
    /// Explicit machine -> label rosters.
    Hybrid { rosters: BTreeMap<String, String> },
}

pub const GROUP_A: &str = "A";
pub const GROUP_B: &str = "B";
/// Roster label under time slicing, where the split is temporal.
pub const GROUP_ALL: &str = "ALL";

/// Outcome of [`assign_groups`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAssignment {
    pub labels: BTreeMap<String, String>,
    /// Machines that could not be assigned (single-machine racks under
    /// the ideal design); flagged rather than failing the run.
    pub excluded: Vec<String>,
}

/// Splits `machines` according to the design.
///
/// Ideal: within each rack, machines sorted by id alternate A, B, A, ...
/// so an odd rack's extra machine lands in A. Time slicing keeps one
/// shared roster (see [`slice_label`]). Hybrid passes rosters through.
pub fn assign_groups(design: &ExperimentDesign, machines: &[String]) -> Result<GroupAssignment> {
    if machines.is_empty() {
        return Err(Error::EmptyInput("machine list".into()));
    }
    match design {
        ExperimentDesign::Ideal { rack_of } => {
            let mut racks: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
            for machine in machines {
                let rack = rack_of.get(machine).ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "ideal design needs a rack for machine `{machine}`"
                    ))
                })?;
                racks.entry(rack).or_default().push(machine);
            }
            let mut labels = BTreeMap::new();
            let mut excluded = Vec::new();
            for (_, mut rack_machines) in racks {
                rack_machines.sort_unstable();
                if rack_machines.len() < 2 {
                    excluded.extend(rack_machines.iter().map(|m| m.to_string()));
                    continue;
                }
                for (i, machine) in rack_machines.iter().enumerate() {
                    let label = if i % 2 == 0 { GROUP_A } else { GROUP_B };
                    labels.insert(machine.to_string(), label.to_string());
                }
            }
            Ok(GroupAssignment { labels, excluded })
        }
        ExperimentDesign::TimeSlicing { slice_hours } => {
            if *slice_hours == 0 || slice_hours.is_multiple_of(24) {
                return Err(Error::InvalidInput(format!(
                    "slice length must be >= 1 hour and not a multiple of 24, got {slice_hours}"
                )));
            }
            let labels = machines
                .iter()
                .map(|m| (m.clone(), GROUP_ALL.to_string()))
                .collect();
            Ok(GroupAssignment {
                labels,
                excluded: Vec::new(),
            })
        }
        ExperimentDesign::Hybrid { rosters } => {
            let mut labels = BTreeMap::new();
            for machine in machines {
                let label = rosters.get(machine).ok_or_else(|| {
                    Error::InvalidInput(format!("machine `{machine}` missing from rosters"))
                })?;
                labels.insert(machine.clone(), label.clone());
            }
            Ok(GroupAssignment {
                labels,
                excluded: Vec::new(),
            })
        }
    }
}

/// Which configuration a time-sliced experiment runs during the hour at
/// `hours_since_start`: slices alternate A, B, A, ...
pub fn slice_label(slice_hours: u32, hours_since_start: u64) -> &'static str {
    if (hours_since_start / slice_hours as u64).is_multiple_of(2) {
        GROUP_A
    } else {
        GROUP_B
    }
}

/// Two-sample comparison output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub mean_a: f64,
    pub mean_b: f64,
    /// (mean_b - mean_a) / mean_a * 100.
    pub pct_change: f64,
    pub t_value: f64,
    pub dof: f64,
    pub significant_at_95: bool,
}

fn check_sample(name: &str, xs: &[f64]) -> Result<()> {
    if xs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "sample `{name}` needs at least 2 values, got {}",
            xs.len()
        )));
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("sample `{name}`")));
    }
    Ok(())
}

fn build_result(mean_a: f64, mean_b: f64, t_value: f64, dof: f64) -> TTestResult {
    let pct_change = if mean_a != 0.0 {
        (mean_b - mean_a) / mean_a * 100.0
    } else {
        f64::NAN
    };
    TTestResult {
        mean_a,
        mean_b,
        pct_change,
        t_value,
        dof,
        significant_at_95: t_value.abs() > t_critical_95(dof),
    }
}

/// Pooled-variance two-sample Student's t-test.
pub fn student_t(sample_a: &[f64], sample_b: &[f64]) -> Result<TTestResult> {
    check_sample("a", sample_a)?;
    check_sample("b", sample_b)?;
    let (na, nb) = (sample_a.len() as f64, sample_b.len() as f64);
    let (ma, mb) = (mean(sample_a), mean(sample_b));
    let (va, vb) = (sample_variance(sample_a), sample_variance(sample_b));
    let dof = na + nb - 2.0;
    let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / dof;
    if pooled <= 0.0 {
        return Err(Error::ZeroDenominator(
            "pooled variance is zero; samples are constant".into(),
        ));
    }
    let t_value = (mb - ma) / (pooled.sqrt() * (1.0 / na + 1.0 / nb).sqrt());
    Ok(build_result(ma, mb, t_value, dof))
}

/// Welch's unequal-variance t-test with Welch–Satterthwaite degrees of
/// freedom, for when the pooled-variance assumption is doubtful.
pub fn welch_t(sample_a: &[f64], sample_b: &[f64]) -> Result<TTestResult> {
    check_sample("a", sample_a)?;
    check_sample("b", sample_b)?;
    let (na, nb) = (sample_a.len() as f64, sample_b.len() as f64);
    let (ma, mb) = (mean(sample_a), mean(sample_b));
    let (va, vb) = (sample_variance(sample_a), sample_variance(sample_b));
    let sa = va / na;
    let sb = vb / nb;
    if sa + sb <= 0.0 {
        return Err(Error::ZeroDenominator(
            "both sample variances are zero".into(),
        ));
    }
    let t_value = (mb - ma) / (sa + sb).sqrt();
    let dof = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(build_result(ma, mb, t_value, dof))
}

/// A named before/after comparison, one report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEffect {
    pub metric: String,
    pub result: TTestResult,
}

/// Percent change of means plus significance for one metric, measured
/// before and after a configuration change.
pub fn treatment_effect(before: &[f64], after: &[f64], metric_name: &str) -> Result<MetricEffect> {
    Ok(MetricEffect {
        metric: metric_name.to_string(),
        result: student_t(before, after)?,
    })
}

/// Markdown table of treatment effects in the report layout:
/// Name, baseline mean, new mean, % change, t-value.
pub fn effects_markdown(effects: &[MetricEffect], label_a: &str, label_b: &str) -> String {
    let mut out = format!("| Name | {label_a} | {label_b} | % Changes | t-value |\n");
    out.push_str("|---|---|---|---|---|\n");
    for e in effects {
        out.push_str(&format!(
            "| {} | {:.4} | {:.4} | {:+.2}% | {:.2}{} |\n",
            e.metric,
            e.result.mean_a,
            e.result.mean_b,
            e.result.pct_change,
            e.result.t_value,
            if e.result.significant_at_95 {
                ""
            } else {
                " (n.s.)"
            },
        ));
    }
    out
}

/// Per-machine totals over the comparison period, the substrate for the
/// throughput ratio metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MachineUsage {
    pub data_read_bytes: f64,
    pub cpu_time_s: f64,
    pub exec_time_s: f64,
}

impl MachineUsage {
    /// Total data read over total CPU time; insensitive to load level.
    fn bytes_per_cpu_time(&self) -> Result<f64> {
        if self.cpu_time_s <= 0.0 {
            return Err(Error::ZeroDenominator("machine has zero CPU time".into()));
        }
        Ok(self.data_read_bytes / self.cpu_time_s)
    }

    /// Total data read over total task execution time.
    fn bytes_per_second(&self) -> Result<f64> {
        if self.exec_time_s <= 0.0 {
            return Err(Error::ZeroDenominator(
                "machine has zero execution time".into(),
            ));
        }
        Ok(self.data_read_bytes / self.exec_time_s)
    }
}

/// One comparison row of the capping report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CappingRow {
    pub group: String,
    pub metric: String,
    pub baseline_mean: f64,
    pub group_mean: f64,
    pub pct_change: f64,
    pub t_value: f64,
    pub significant_at_95: bool,
}

/// Compares every non-baseline group to the baseline on the two ratio
/// metrics, one row per (group, metric).
pub fn capping_report(
    groups: &BTreeMap<String, Vec<MachineUsage>>,
    baseline_label: &str,
) -> Result<Vec<CappingRow>> {
    let baseline = groups.get(baseline_label).ok_or_else(|| {
        Error::InvalidInput(format!("baseline group `{baseline_label}` not present"))
    })?;
    let ratios = |usages: &[MachineUsage]| -> Result<(Vec<f64>, Vec<f64>)> {
        let per_cpu = usages
            .iter()
            .map(MachineUsage::bytes_per_cpu_time)
            .collect::<Result<Vec<_>>>()?;
        let per_second = usages
            .iter()
            .map(MachineUsage::bytes_per_second)
            .collect::<Result<Vec<_>>>()?;
        Ok((per_cpu, per_second))
    };
    let (base_cpu, base_sec) = ratios(baseline)?;
    let mut rows = Vec::new();
    for (label, usages) in groups {
        if label == baseline_label {
            continue;
        }
        let (grp_cpu, grp_sec) = ratios(usages)?;
        for (metric, base, grp) in [
            ("bytes_per_cpu_time", &base_cpu, &grp_cpu),
            ("bytes_per_second", &base_sec, &grp_sec),
        ] {
            let test = student_t(base, grp)?;
            rows.push(CappingRow {
                group: label.clone(),
                metric: metric.to_string(),
                baseline_mean: test.mean_a,
                group_mean: test.mean_b,
                pct_change: test.pct_change,
                t_value: test.t_value,
                significant_at_95: test.significant_at_95,
            });
        }
    }
    Ok(rows)
}

/// Markdown rendering of the capping report, benchmarked to the
/// baseline. With a single comparison group the table takes the classic
/// layout (Name, baseline, group, % Changes, t-value); with several, a
/// Group column is added.
pub fn capping_markdown(rows: &[CappingRow], baseline_label: &str) -> String {
    let mut labels: Vec<&str> = rows.iter().map(|r| r.group.as_str()).collect();
    labels.sort_unstable();
    labels.dedup();
    if let [single] = labels[..] {
        let mut out = format!("| Name | {baseline_label} | {single} | % Changes | t-value |\n");
        out.push_str("|---|---|---|---|---|\n");
        for r in rows {
            out.push_str(&format!(
                "| {} | {:.4e} | {:.4e} | {:+.2}% | {:.2} |\n",
                r.metric, r.baseline_mean, r.group_mean, r.pct_change, r.t_value
            ));
        }
        return out;
    }
    let mut out = format!("| Name | Group | {baseline_label} | Value | % Changes | t-value |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for r in rows {
        out.push_str(&format!(
            "| {} | {} | {:.4e} | {:.4e} | {:+.2}% | {:.2} |\n",
            r.metric, r.group, r.baseline_mean, r.group_mean, r.pct_change, r.t_value
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ideal_design(machines_per_rack: &[(&str, usize)]) -> (ExperimentDesign, Vec<String>) {
        let mut rack_of = BTreeMap::new();
        let mut machines = Vec::new();
        for (rack, count) in machines_per_rack {
            for i in 0..*count {
                let id = format!("{rack}-m{i:03}");
                rack_of.insert(id.clone(), rack.to_string());
                machines.push(id);
            }
        }
        (ExperimentDesign::Ideal { rack_of }, machines)
    }

    #[test]
    fn minimal_rack_splits_one_each() {
        let (design, machines) = ideal_design(&[("r0", 2)]);
        let out = assign_groups(&design, &machines).unwrap();
        let a = out.labels.values().filter(|l| *l == GROUP_A).count();
        let b = out.labels.values().filter(|l| *l == GROUP_B).count();
        assert_eq!((a, b), (1, 1));
    }

    #[test]
    fn seven_hundred_machines_split_evenly() {
        let racks: Vec<(String, usize)> = (0..35).map(|i| (format!("r{i:02}"), 20)).collect();
        let rack_refs: Vec<(&str, usize)> = racks.iter().map(|(r, c)| (r.as_str(), *c)).collect();
        let (design, machines) = ideal_design(&rack_refs);
        assert_eq!(machines.len(), 700);
        let out = assign_groups(&design, &machines).unwrap();
        let a = out.labels.values().filter(|l| *l == GROUP_A).count();
        let b = out.labels.values().filter(|l| *l == GROUP_B).count();
        assert_eq!((a, b), (350, 350));
    }

    #[test]
    fn single_machine_racks_are_excluded() {
        let (design, machines) = ideal_design(&[("r0", 3), ("r1", 1)]);
        let out = assign_groups(&design, &machines).unwrap();
        assert_eq!(out.excluded, vec!["r1-m000".to_string()]);
        assert_eq!(out.labels.len(), 3);
        // Odd rack: the extra machine goes to A.
        let a = out.labels.values().filter(|l| *l == GROUP_A).count();
        assert_eq!(a, 2);
    }

    #[test]
    fn balance_bounded_by_odd_racks() {
        let (design, machines) = ideal_design(&[("r0", 5), ("r1", 7), ("r2", 4), ("r3", 3)]);
        let out = assign_groups(&design, &machines).unwrap();
        let a = out.labels.values().filter(|l| *l == GROUP_A).count() as i64;
        let b = out.labels.values().filter(|l| *l == GROUP_B).count() as i64;
        assert!((a - b).abs() <= 3);
    }

    #[test]
    fn hybrid_is_identity() {
        let rosters: BTreeMap<String, String> = [("m0", "blue"), ("m1", "green")]
            .into_iter()
            .map(|(m, l)| (m.to_string(), l.to_string()))
            .collect();
        let design = ExperimentDesign::Hybrid {
            rosters: rosters.clone(),
        };
        let machines: Vec<String> = rosters.keys().cloned().collect();
        let out = assign_groups(&design, &machines).unwrap();
        assert_eq!(out.labels, rosters);
    }

    #[test]
    fn time_slicing_validates_cadence() {
        let machines = vec!["m0".to_string()];
        for bad in [0u32, 24, 48] {
            let design = ExperimentDesign::TimeSlicing { slice_hours: bad };
            assert!(assign_groups(&design, &machines).is_err());
        }
        let design = ExperimentDesign::TimeSlicing { slice_hours: 5 };
        let out = assign_groups(&design, &machines).unwrap();
        assert_eq!(out.labels["m0"], GROUP_ALL);
        assert_eq!(slice_label(5, 0), GROUP_A);
        assert_eq!(slice_label(5, 4), GROUP_A);
        assert_eq!(slice_label(5, 5), GROUP_B);
        assert_eq!(slice_label(5, 10), GROUP_A);
    }

    #[test]
    fn hand_computed_t_is_exact() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 3.0, 4.0, 5.0, 6.0];
        let out = student_t(&a, &b).unwrap();
        assert_eq!(out.t_value, 1.0);
        assert_eq!(out.dof, 8.0);
        assert!(!out.significant_at_95);
    }

    #[test]
    fn identical_samples_give_zero_t() {
        let a = [3.0, 4.0, 5.0];
        let out = student_t(&a, &a).unwrap();
        assert_eq!(out.t_value, 0.0);
        assert!(!out.significant_at_95);
        assert_eq!(out.pct_change, 0.0);
    }

    #[test]
    fn t_is_antisymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = rng.random_range(2..20);
            let m = rng.random_range(2..20);
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
            let (Ok(ab), Ok(ba)) = (student_t(&a, &b), student_t(&b, &a)) else {
                continue;
            };
            assert_eq!(ab.t_value, -ba.t_value);
            assert_eq!(ab.dof, ba.dof);
        }
    }

    #[test]
    fn zero_pooled_variance_rejected() {
        let a = [2.0, 2.0, 2.0];
        let b = [5.0, 5.0];
        assert!(matches!(student_t(&a, &b), Err(Error::ZeroDenominator(_))));
        assert!(student_t(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn matches_closed_form_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let n = rng.random_range(3..12);
            let m = rng.random_range(3..12);
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
            let b: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..10.0)).collect();
            let out = student_t(&a, &b).unwrap();
            // Fully independent recomputation.
            let ma = a.iter().sum::<f64>() / n as f64;
            let mb = b.iter().sum::<f64>() / m as f64;
            let ssa: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
            let ssb: f64 = b.iter().map(|x| (x - mb) * (x - mb)).sum();
            let sp2 = (ssa + ssb) / (n + m - 2) as f64;
            let t = (mb - ma) / (sp2 * (1.0 / n as f64 + 1.0 / m as f64)).sqrt();
            assert_relative_eq!(out.t_value, t, epsilon = 1e-12);
        }
    }

    #[test]
    fn treatment_effect_reproduces_reported_percentages() {
        // Means 1.38 -> 1.53: +10.87% (not the rounded 10.9).
        let before = [1.33, 1.38, 1.43];
        let after = [1.48, 1.53, 1.58];
        let e = treatment_effect(&before, &after, "total_data_read_pb").unwrap();
        assert_relative_eq!(e.result.pct_change, 150.0 / 13.8, epsilon = 1e-9);
        assert!((e.result.pct_change - 10.87).abs() < 0.005);

        // Means 24.1 -> 22.9: arithmetic gives -4.98%.
        let before = [23.6, 24.1, 24.6];
        let after = [22.4, 22.9, 23.4];
        let e = treatment_effect(&before, &after, "avg_task_latency_s").unwrap();
        assert!((e.result.pct_change + 4.98).abs() < 0.005);
    }

    #[test]
    fn pct_change_inverts_multiplicatively() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..200 {
            let a: Vec<f64> = (0..5).map(|_| rng.random_range(1.0..10.0)).collect();
            let b: Vec<f64> = (0..5).map(|_| rng.random_range(1.0..10.0)).collect();
            let ab = student_t(&a, &b).unwrap();
            let ba = student_t(&b, &a).unwrap();
            let product = (1.0 + ab.pct_change / 100.0) * (1.0 + ba.pct_change / 100.0);
            assert!((product - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn t_critical_sanity() {
        assert_relative_eq!(t_critical_95(8.0), 2.3060, epsilon = 1e-4);
        assert_relative_eq!(t_critical_95(30.0), 2.0423, epsilon = 1e-4);
        // Large dof approaches the normal quantile.
        assert!((t_critical_95(1e6) - 1.95996).abs() < 1e-4);
        // Decreasing in dof.
        assert!(t_critical_95(5.0) > t_critical_95(10.0));
        assert!(t_critical_95(100.0) > t_critical_95(1000.0));
    }

    #[test]
    fn welch_handles_unequal_variances() {
        let a = [10.0, 10.1, 9.9, 10.05, 9.95];
        let b = [12.0, 8.0, 14.0, 6.0, 11.0];
        let w = welch_t(&a, &b).unwrap();
        let s = student_t(&a, &b).unwrap();
        assert!(w.dof < s.dof);
        assert_relative_eq!(w.mean_b, s.mean_b);
    }

    /// Machines whose bytes/cpu-time and bytes/second ratios are centered
    /// on the given values with ~1% relative jitter.
    fn usage_group(n: usize, ratio_cpu: f64, ratio_sec: f64, seed: u64) -> Vec<MachineUsage> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let cpu_time = rng.random_range(500.0..1500.0);
                let j1 = 1.0 + rng.random_range(-0.01..0.01);
                let j2 = 1.0 + rng.random_range(-0.01..0.01);
                let data = cpu_time * ratio_cpu * j1;
                MachineUsage {
                    data_read_bytes: data,
                    cpu_time_s: cpu_time,
                    exec_time_s: data / (ratio_sec * j2),
                }
            })
            .collect()
    }

    #[test]
    fn capping_report_recovers_constructed_shift() {
        let mut groups = BTreeMap::new();
        groups.insert("A".to_string(), usage_group(60, 4.0, 2.0, 1));
        groups.insert("B".to_string(), usage_group(60, 4.2, 2.1, 2)); // +5%
        let rows = capping_report(&groups, "A").unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert!(
                (row.pct_change - 5.0).abs() < 1.0,
                "{} pct {} off",
                row.metric,
                row.pct_change
            );
        }
    }

    #[test]
    fn capping_report_four_groups_one_row_each() {
        let mut groups = BTreeMap::new();
        for (label, shift, seed) in [
            ("A", 1.0, 1),
            ("B", 1.05, 2),
            ("C", 0.97, 3),
            ("D", 1.02, 4),
        ] {
            groups.insert(
                label.to_string(),
                usage_group(40, 4.0 * shift, 2.0 * shift, seed),
            );
        }
        let rows = capping_report(&groups, "A").unwrap();
        // 3 non-baseline groups x 2 metrics.
        assert_eq!(rows.len(), 6);
        let b_rows: Vec<_> = rows.iter().filter(|r| r.group == "B").collect();
        assert_eq!(b_rows.len(), 2);
    }

    #[test]
    fn capping_report_self_comparison_is_zero() {
        let shared = usage_group(30, 4.0, 2.0, 7);
        let mut groups = BTreeMap::new();
        groups.insert("A".to_string(), shared.clone());
        groups.insert("B".to_string(), shared);
        let rows = capping_report(&groups, "A").unwrap();
        for row in rows {
            assert_relative_eq!(row.pct_change, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn capping_markdown_layouts() {
        let mut groups = BTreeMap::new();
        groups.insert("A".to_string(), usage_group(20, 4.0, 2.0, 1));
        groups.insert("B".to_string(), usage_group(20, 4.2, 2.1, 2));
        let rows = capping_report(&groups, "A").unwrap();
        let md = capping_markdown(&rows, "A");
        assert!(md.starts_with("| Name | A | B | % Changes | t-value |"));

        groups.insert("C".to_string(), usage_group(20, 3.9, 1.9, 3));
        let rows = capping_report(&groups, "A").unwrap();
        let md = capping_markdown(&rows, "A");
        assert!(md.starts_with("| Name | Group | A | Value | % Changes | t-value |"));
    }

    #[test]
    fn capping_report_rejects_missing_baseline_and_zero_denominator() {
        let mut groups = BTreeMap::new();
        groups.insert("B".to_string(), usage_group(10, 4.0, 2.0, 1));
        assert!(capping_report(&groups, "A").is_err());

        groups.insert(
            "A".to_string(),
            vec![
                MachineUsage {
                    data_read_bytes: 1.0,
                    cpu_time_s: 0.0,
                    exec_time_s: 1.0,
                },
                MachineUsage {
                    data_read_bytes: 1.0,
                    cpu_time_s: 1.0,
                    exec_time_s: 1.0,
                },
            ],
        );
        assert!(matches!(
            capping_report(&groups, "A"),
            Err(Error::ZeroDenominator(_))
        ));
    }
}
