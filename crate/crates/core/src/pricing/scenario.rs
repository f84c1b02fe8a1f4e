//! Financial evaluation of discount/oversubscription scenarios.
//!
//! One scenario = (discount, oversubscription ratio, window, SLA). The
//! pipeline scales the demand, works out how many discounted tokens the
//! cluster can promise at the SLA, shifts demand under that budget, and
//! prices the result: owned capacity costs a flat slot-hour rate, demand
//! above capacity is served by ad-hoc external capacity at a premium.
//! The scenario with the lowest cost per container wins.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    apply_oversubscription, constrained_shift, perf_token_availability, ChoiceParams, HourWindow,
    PriceSchedule, ShiftResult,
};
use crate::error::{Error, Result};
use crate::telemetry::{DemandSeries, DEMAND_HEADER};

/// Cost model in normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinanceConfig {
    /// Cost of one owned capacity slot for one hour.
    pub base_cost_per_slot_hour: f64,
    /// Multiplier on the slot-hour cost for ad-hoc overflow capacity.
    pub adhoc_premium: f64,
    /// Undiscounted token price per container-hour.
    pub base_token_price: f64,
}

impl Default for FinanceConfig {
    fn default() -> Self {
        FinanceConfig {
            base_cost_per_slot_hour: 1.0,
            adhoc_premium: 3.0,
            base_token_price: 1.0,
        }
    }
}

impl FinanceConfig {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("base_cost_per_slot_hour", self.base_cost_per_slot_hour),
            ("adhoc_premium", self.adhoc_premium),
            ("base_token_price", self.base_token_price),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "finance `{name}` must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// The four decision variables of one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioKnobs {
    pub discount: f64,
    pub oversub_ratio: f64,
    pub window: HourWindow,
    pub sla: f64,
}

/// One evaluated scenario with its financial outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingScenario {
    pub discount: f64,
    pub oversub_ratio: f64,
    pub window: HourWindow,
    pub sla: f64,
    /// Tokens promisable per window hour at the SLA.
    pub tokens_available: f64,
    /// Served container-hours over the evaluated period.
    pub total_containers: f64,
    /// Worst single-hour demand above owned capacity.
    pub peak_overflow: f64,
    pub total_cost: f64,
    pub cost_per_container: f64,
    /// Token revenue at the windowed price schedule.
    pub revenue: f64,
}

/// Cartesian grid of scenario knobs. All windows share a start hour and
/// vary in duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioGrid {
    pub discounts: Vec<f64>,
    pub oversub_ratios: Vec<f64>,
    pub window_start: u8,
    pub window_durations: Vec<u8>,
    pub slas: Vec<f64>,
}

impl Default for ScenarioGrid {
    fn default() -> Self {
        ScenarioGrid {
            // 10 discounts x 8 ratios x 4 durations x 5 SLAs = 1600.
            discounts: (1..=10).map(|i| i as f64 / 20.0).collect(),
            oversub_ratios: (0..=7).map(|i| i as f64 / 20.0).collect(),
            window_start: 16,
            window_durations: vec![4, 6, 8, 12],
            slas: vec![0.50, 0.75, 0.90, 0.95, 0.99],
        }
    }
}

impl ScenarioGrid {
    pub fn knobs(&self) -> Result<Vec<ScenarioKnobs>> {
        if self.discounts.is_empty()
            || self.oversub_ratios.is_empty()
            || self.window_durations.is_empty()
            || self.slas.is_empty()
        {
            return Err(Error::EmptyInput("scenario grid axis".into()));
        }
        let mut out = Vec::with_capacity(
            self.discounts.len()
                * self.oversub_ratios.len()
                * self.window_durations.len()
                * self.slas.len(),
        );
        for &discount in &self.discounts {
            for &oversub_ratio in &self.oversub_ratios {
                for &duration in &self.window_durations {
                    let window = HourWindow::from_start_len(self.window_start, duration)?;
                    for &sla in &self.slas {
                        out.push(ScenarioKnobs {
                            discount,
                            oversub_ratio,
                            window,
                            sla,
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

/// The demand transformation of one scenario: oversubscribe, compute the
/// token budget, shift under it. Returns the shift plus the budget.
pub fn scenario_shift(
    demand: &DemandSeries,
    capacity: f64,
    knobs: &ScenarioKnobs,
    flexible_share: f64,
    params: &ChoiceParams,
    cfg: &FinanceConfig,
) -> Result<(ShiftResult, f64)> {
    cfg.validate()?;
    let oversubscribed = apply_oversubscription(demand, knobs.oversub_ratio)?;
    let tokens_available =
        perf_token_availability(&oversubscribed, capacity, &knobs.window, knobs.sla)?;
    let prices = PriceSchedule::new(cfg.base_token_price, knobs.window, knobs.discount)?;
    let shift = constrained_shift(
        &oversubscribed,
        flexible_share,
        params,
        &prices,
        tokens_available,
    )?;
    Ok((shift, tokens_available))
}

/// Runs the full pipeline for one scenario:
/// oversubscribe -> token availability -> constrained shift -> finance.
pub fn evaluate_scenario(
    demand: &DemandSeries,
    capacity: f64,
    knobs: &ScenarioKnobs,
    flexible_share: f64,
    params: &ChoiceParams,
    cfg: &FinanceConfig,
) -> Result<PricingScenario> {
    let (shift, tokens_available) =
        scenario_shift(demand, capacity, knobs, flexible_share, params, cfg)?;
    let prices = PriceSchedule::new(cfg.base_token_price, knobs.window, knobs.discount)?;
    let hours = shift.shifted.len() as f64;

    let total_containers: f64 = shift.shifted.total().iter().sum();
    if total_containers <= 0.0 {
        return Err(Error::ZeroDenominator(
            "scenario serves zero containers".into(),
        ));
    }
    let overflow_slot_hours: f64 = shift
        .shifted
        .total()
        .iter()
        .map(|t| (t - capacity).max(0.0))
        .sum();
    let peak_overflow = shift
        .shifted
        .total()
        .iter()
        .map(|t| (t - capacity).max(0.0))
        .fold(0.0f64, f64::max);
    let total_cost = capacity * cfg.base_cost_per_slot_hour * hours
        + overflow_slot_hours * cfg.base_cost_per_slot_hour * cfg.adhoc_premium;
    let revenue = shift
        .shifted
        .hours()
        .iter()
        .zip(shift.shifted.total())
        .map(|(hour, t)| t * prices.price_at(hour.hour_of_day()))
        .sum();

    Ok(PricingScenario {
        discount: knobs.discount,
        oversub_ratio: knobs.oversub_ratio,
        window: knobs.window,
        sla: knobs.sla,
        tokens_available,
        total_containers,
        peak_overflow,
        total_cost,
        cost_per_container: total_cost / total_containers,
        revenue,
    })
}

/// Total preference order used to pick the best scenario: lower cost per
/// container, then smaller ratio, smaller discount, shorter window,
/// smaller SLA.
pub fn scenario_better(a: &PricingScenario, b: &PricingScenario) -> std::cmp::Ordering {
    b.cost_per_container
        .total_cmp(&a.cost_per_container)
        .then(b.oversub_ratio.total_cmp(&a.oversub_ratio))
        .then(b.discount.total_cmp(&a.discount))
        .then(b.window.len().cmp(&a.window.len()))
        .then(b.sla.total_cmp(&a.sla))
}

/// Evaluates the whole grid and returns the table (in grid order) plus
/// the best scenario. Evaluation order cannot affect either.
pub fn enumerate_scenarios(
    demand: &DemandSeries,
    capacity: f64,
    grid: &ScenarioGrid,
    flexible_share: f64,
    params: &ChoiceParams,
    cfg: &FinanceConfig,
) -> Result<(Vec<PricingScenario>, PricingScenario)> {
    let knobs = grid.knobs()?;
    let table: Vec<PricingScenario> = knobs
        .par_iter()
        .map(|k| evaluate_scenario(demand, capacity, k, flexible_share, params, cfg))
        .collect::<Result<Vec<_>>>()?;
    let best = table
        .iter()
        .max_by(|a, b| scenario_better(a, b))
        .expect("non-empty grid")
        .clone();
    Ok((table, best))
}

/// Scenario table CSV, one row per scenario in grid order.
pub fn scenarios_csv(table: &[PricingScenario]) -> String {
    let mut out = String::from(
        "discount,oversub_ratio,window_start,window_end,sla,tokens_available,\
         total_containers,peak_overflow,total_cost,cost_per_container\n",
    );
    for s in table {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            s.discount,
            s.oversub_ratio,
            s.window.start(),
            s.window.end(),
            s.sla,
            s.tokens_available,
            s.total_containers,
            s.peak_overflow,
            s.total_cost,
            s.cost_per_container
        ));
    }
    out
}

/// Original and shifted demand in the demand CSV schema plus a `series`
/// column.
pub fn shifted_demand_csv(shift: &ShiftResult) -> String {
    let mut out = String::from(DEMAND_HEADER);
    out.push_str(",series\n");
    for (label, series) in [("original", &shift.original), ("shifted", &shift.shifted)] {
        for ((hour, hp), total) in series
            .hours()
            .iter()
            .zip(series.high_priority())
            .zip(series.total())
        {
            out.push_str(&format!("{hour},{hp},{total},{label}\n"));
        }
    }
    out
}
