//! Off-peak token pricing and demand shifting.
//!
//! A discounted token valid only inside a pre-defined off-peak window
//! nudges customers to move work away from the peak. Each customer's
//! choice of hour is a logit over a utility combining shift inertia
//! (disliking moving away from the preferred hour) and price. The module
//! covers the full pipeline: choice probabilities, unconstrained and
//! capacity-constrained demand redistribution, token availability at an
//! SLA quantile, oversubscription scaling, sensitivity-parameter
//! estimation, and financial evaluation over a scenario grid.

mod mle;
mod scenario;

pub use mle::{fit_logit_mle, log_likelihood_and_gradient, MleFit};
pub use scenario::{
    enumerate_scenarios, evaluate_scenario, scenario_better, scenario_shift, scenarios_csv,
    shifted_demand_csv, FinanceConfig, PricingScenario, ScenarioGrid, ScenarioKnobs,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::quantile_lower;
use crate::telemetry::DemandSeries;

/// Sensitivity magnitudes at or beyond this threshold route to the exact
/// deterministic limit instead of overflowing `exp`.
pub const LIMIT_MAGNITUDE: f64 = 1e6;

pub const HOURS_PER_DAY: usize = 24;

/// Half-open hour-of-day interval `[start, end)` with wraparound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourWindow {
    start: u8,
    len: u8,
}

impl HourWindow {
    /// Builds `[start, end)`. `end` may be 24 to mean midnight; an equal
    /// start and end is the empty window.
    pub fn new(start: u8, end: u8) -> Result<Self> {
        if start > 23 || end > 24 {
            return Err(Error::InvalidInput(format!(
                "window bounds must satisfy start in 0..24, end in 0..=24; got [{start}, {end})"
            )));
        }
        if start == end {
            return Ok(HourWindow { start, len: 0 });
        }
        let len = ((end % 24) + 24 - start) % 24;
        let len = if len == 0 { 24 } else { len };
        Ok(HourWindow { start, len })
    }

    pub fn from_start_len(start: u8, len: u8) -> Result<Self> {
        if start > 23 || len > 24 {
            return Err(Error::InvalidInput(format!(
                "window start {start} must lie in 0..24 and length {len} in 0..=24"
            )));
        }
        Ok(HourWindow { start, len })
    }

    pub fn start(&self) -> u8 {
        self.start
    }

    /// Exclusive end; 24 denotes midnight when the window touches it.
    pub fn end(&self) -> u8 {
        let e = self.start as u32 + self.len as u32;
        if e <= 24 {
            e as u8
        } else {
            (e - 24) as u8
        }
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, hour_of_day: u8) -> bool {
        ((hour_of_day as u32 + 24 - self.start as u32) % 24) < self.len as u32
    }

    pub fn hours(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len).map(move |i| ((self.start as u32 + i as u32) % 24) as u8)
    }
}

/// Hour-of-day token prices: the base price everywhere except inside the
/// discount window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceSchedule {
    pub base_price: f64,
    pub window: HourWindow,
    /// Fractional discount in [0, 1) applied inside the window.
    pub discount: f64,
}

impl PriceSchedule {
    pub fn new(base_price: f64, window: HourWindow, discount: f64) -> Result<Self> {
        if !(base_price.is_finite() && base_price > 0.0) {
            return Err(Error::InvalidInput(format!(
                "base price must be positive, got {base_price}"
            )));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidInput(format!(
                "discount must lie in [0, 1), got {discount}"
            )));
        }
        Ok(PriceSchedule {
            base_price,
            window,
            discount,
        })
    }

    pub fn price_at(&self, hour_of_day: u8) -> f64 {
        if self.window.contains(hour_of_day) {
            self.base_price * (1.0 - self.discount)
        } else {
            self.base_price
        }
    }

    pub fn price_vector(&self) -> Vec<f64> {
        (0..HOURS_PER_DAY as u8).map(|h| self.price_at(h)).collect()
    }
}

/// Customer sensitivities; both are disutilities, hence non-positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChoiceParams {
    /// Utility per hour of distance from the preferred hour.
    pub time_sensitivity: f64,
    /// Utility per unit of token price.
    pub price_sensitivity: f64,
}

impl ChoiceParams {
    pub fn new(time_sensitivity: f64, price_sensitivity: f64) -> Result<Self> {
        for (name, v) in [
            ("time_sensitivity", time_sensitivity),
            ("price_sensitivity", price_sensitivity),
        ] {
            if !v.is_finite() || v > 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and non-positive, got {v}"
                )));
            }
        }
        Ok(ChoiceParams {
            time_sensitivity,
            price_sensitivity,
        })
    }
}

impl Default for ChoiceParams {
    fn default() -> Self {
        ChoiceParams {
            time_sensitivity: -0.3,
            price_sensitivity: -1.5,
        }
    }
}

/// How the hour distance term is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// Wraparound distance on the daily clock; days repeat, so 23:00 is
    /// one hour from midnight. The default.
    #[default]
    Circular,
    /// Plain absolute difference.
    Linear,
}

pub(crate) fn hour_distance(a: usize, b: usize, day_len: usize, mode: DistanceMode) -> f64 {
    let d = a.abs_diff(b);
    match mode {
        DistanceMode::Circular => d.min(day_len - d) as f64,
        DistanceMode::Linear => d as f64,
    }
}

fn check_hour(name: &str, hour: u8) -> Result<()> {
    if hour > 23 {
        return Err(Error::InvalidInput(format!("{name} {hour} outside 0..24")));
    }
    Ok(())
}

/// Utility of using a token at `hour` when `preferred` was the original
/// hour: sensitivity-weighted distance plus sensitivity-weighted price.
pub fn utility(
    params: &ChoiceParams,
    hour: u8,
    preferred: u8,
    prices: &PriceSchedule,
) -> Result<f64> {
    utility_with(params, hour, preferred, prices, DistanceMode::Circular)
}

pub fn utility_with(
    params: &ChoiceParams,
    hour: u8,
    preferred: u8,
    prices: &PriceSchedule,
    distance: DistanceMode,
) -> Result<f64> {
    check_hour("hour", hour)?;
    check_hour("preferred hour", preferred)?;
    let d = hour_distance(hour as usize, preferred as usize, HOURS_PER_DAY, distance);
    Ok(params.time_sensitivity * d + params.price_sensitivity * prices.price_at(hour))
}

/// Softmax choice probabilities over an arbitrary per-hour price vector
/// (the day length is the vector length). Computed with max-subtraction;
/// extreme sensitivities route to their exact limits:
///
/// * time sensitivity at the limit: all mass on the preferred hour;
/// * price sensitivity at the limit: mass only on the cheapest hours,
///   split by the remaining time term.
pub fn choice_probabilities_for_prices(
    params: &ChoiceParams,
    preferred: usize,
    prices: &[f64],
    distance: DistanceMode,
) -> Result<Vec<f64>> {
    let day_len = prices.len();
    if day_len == 0 || preferred >= day_len {
        return Err(Error::InvalidInput(format!(
            "preferred hour {preferred} outside 0..{day_len}"
        )));
    }
    if params.time_sensitivity <= -LIMIT_MAGNITUDE {
        let mut probs = vec![0.0; day_len];
        probs[preferred] = 1.0;
        return Ok(probs);
    }
    if params.price_sensitivity <= -LIMIT_MAGNITUDE {
        let cheapest = prices.iter().copied().fold(f64::INFINITY, f64::min);
        let utilities: Vec<f64> = (0..day_len)
            .map(|h| {
                if prices[h] <= cheapest {
                    params.time_sensitivity * hour_distance(h, preferred, day_len, distance)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        return Ok(softmax(&utilities));
    }
    let utilities: Vec<f64> = (0..day_len)
        .map(|h| {
            params.time_sensitivity * hour_distance(h, preferred, day_len, distance)
                + params.price_sensitivity * prices[h]
        })
        .collect();
    Ok(softmax(&utilities))
}

fn softmax(utilities: &[f64]) -> Vec<f64> {
    let max = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = utilities.iter().map(|u| (u - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Probability of choosing each hour of day given the preferred hour.
pub fn choice_probabilities(
    params: &ChoiceParams,
    preferred: u8,
    prices: &PriceSchedule,
) -> Result<Vec<f64>> {
    check_hour("preferred hour", preferred)?;
    choice_probabilities_for_prices(
        params,
        preferred as usize,
        &prices.price_vector(),
        DistanceMode::Circular,
    )
}

/// Result of a demand redistribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftResult {
    pub original: DemandSeries,
    pub shifted: DemandSeries,
    pub flexible_share: f64,
    /// Net demand added inside the discount window, summed over all days.
    pub window_gain: f64,
}

/// Row `preferred` holds the choice probabilities of demand originating
/// at that hour.
pub(crate) fn redistribution_matrix(
    params: &ChoiceParams,
    prices: &[f64],
    distance: DistanceMode,
) -> Result<Vec<Vec<f64>>> {
    (0..prices.len())
        .map(|preferred| choice_probabilities_for_prices(params, preferred, prices, distance))
        .collect()
}

/// Applies the logit redistribution to one day of demand: the flexible
/// share of every hour spreads along its matrix row, the rest stays put.
pub(crate) fn redistribute_day(day: &[f64], flexible_share: f64, matrix: &[Vec<f64>]) -> Vec<f64> {
    let mut shifted: Vec<f64> = day.iter().map(|t| (1.0 - flexible_share) * t).collect();
    for (preferred, &demand) in day.iter().enumerate() {
        let moving = flexible_share * demand;
        for (hour, p) in matrix[preferred].iter().enumerate() {
            shifted[hour] += moving * p;
        }
    }
    shifted
}

fn window_gain(original: &DemandSeries, shifted_total: &[f64], window: &HourWindow) -> f64 {
    original
        .hours()
        .iter()
        .zip(original.total().iter().zip(shifted_total))
        .filter(|(hour, _)| window.contains(hour.hour_of_day()))
        .map(|(_, (orig, new))| new - orig)
        .sum()
}

fn check_flexible_share(flexible_share: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&flexible_share) {
        return Err(Error::InvalidInput(format!(
            "flexible share must lie in [0, 1], got {flexible_share}"
        )));
    }
    Ok(())
}

/// Redistributes the flexible share of demand by the choice model,
/// per hour of day, applied to each covered day. Total demand is
/// conserved; the inflexible portion never moves.
pub fn shift_demand(
    demand: &DemandSeries,
    flexible_share: f64,
    params: &ChoiceParams,
    prices: &PriceSchedule,
) -> Result<ShiftResult> {
    shift_demand_with(
        demand,
        flexible_share,
        params,
        prices,
        DistanceMode::Circular,
    )
}

pub fn shift_demand_with(
    demand: &DemandSeries,
    flexible_share: f64,
    params: &ChoiceParams,
    prices: &PriceSchedule,
    distance: DistanceMode,
) -> Result<ShiftResult> {
    check_flexible_share(flexible_share)?;
    demand.whole_days()?;
    let matrix = redistribution_matrix(params, &prices.price_vector(), distance)?;
    let mut shifted_total = Vec::with_capacity(demand.len());
    for day in demand.total().chunks(HOURS_PER_DAY) {
        shifted_total.extend(redistribute_day(day, flexible_share, &matrix));
    }
    let gain = window_gain(demand, &shifted_total, &prices.window);
    Ok(ShiftResult {
        original: demand.clone(),
        shifted: demand.with_total(shifted_total),
        flexible_share,
        window_gain: gain,
    })
}

/// Number of tokens that can be promised for every hour of the window at
/// the given SLA: the `(1 - sla)` lower-interpolation quantile of each
/// day's worst-hour idle capacity, floored at zero.
pub fn perf_token_availability(
    demand: &DemandSeries,
    capacity: f64,
    window: &HourWindow,
    sla: f64,
) -> Result<f64> {
    if window.is_empty() {
        return Err(Error::InvalidInput("availability window is empty".into()));
    }
    if !(sla > 0.0 && sla < 1.0) {
        return Err(Error::InvalidInput(format!(
            "sla must lie in (0, 1), got {sla}"
        )));
    }
    if !(capacity.is_finite() && capacity >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "capacity must be non-negative, got {capacity}"
        )));
    }
    let days = demand.whole_days()?;
    if days < 2 {
        return Err(Error::InvalidInput(format!(
            "availability needs at least 2 full days, got {days}"
        )));
    }
    let daily_worst_idle: Vec<f64> = demand
        .total()
        .chunks(HOURS_PER_DAY)
        .map(|day| {
            window
                .hours()
                .map(|h| capacity - day[h as usize])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(quantile_lower(&daily_worst_idle, 1.0 - sla).max(0.0))
}

/// Demand shifting under a per-hour token budget.
///
/// Runs the unconstrained shift, then scales each day's whole shift
/// pattern down uniformly until no window hour gains more than
/// `token_capacity` above its original demand; the scaled-out flexible
/// demand stays at its origin hours. A zero budget therefore reproduces
/// the original series, and a slack budget reproduces [`shift_demand`].
pub fn constrained_shift(
    demand: &DemandSeries,
    flexible_share: f64,
    params: &ChoiceParams,
    prices: &PriceSchedule,
    token_capacity: f64,
) -> Result<ShiftResult> {
    constrained_shift_with(
        demand,
        flexible_share,
        params,
        prices,
        token_capacity,
        DistanceMode::Circular,
    )
}

pub fn constrained_shift_with(
    demand: &DemandSeries,
    flexible_share: f64,
    params: &ChoiceParams,
    prices: &PriceSchedule,
    token_capacity: f64,
    distance: DistanceMode,
) -> Result<ShiftResult> {
    if !(token_capacity.is_finite() && token_capacity >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "token capacity must be non-negative, got {token_capacity}"
        )));
    }
    let unconstrained = shift_demand_with(demand, flexible_share, params, prices, distance)?;
    let window = &prices.window;
    let mut shifted_total = Vec::with_capacity(demand.len());
    for (day_orig, day_shifted) in demand
        .total()
        .chunks(HOURS_PER_DAY)
        .zip(unconstrained.shifted.total().chunks(HOURS_PER_DAY))
    {
        // Window gains scale linearly with the shift fraction, so one
        // scaling factor caps every hour at once; iterate only to absorb
        // floating-point residue.
        let mut scale = 1.0f64;
        for _ in 0..HOURS_PER_DAY {
            let worst_gain = window
                .hours()
                .map(|h| {
                    let h = h as usize;
                    scale * (day_shifted[h] - day_orig[h])
                })
                .fold(f64::NEG_INFINITY, f64::max);
            if worst_gain <= token_capacity || worst_gain <= 0.0 {
                break;
            }
            scale *= token_capacity / worst_gain;
        }
        shifted_total.extend(
            day_orig
                .iter()
                .zip(day_shifted)
                .map(|(o, s)| o + scale * (s - o)),
        );
    }
    let gain = window_gain(demand, &shifted_total, window);
    Ok(ShiftResult {
        original: demand.clone(),
        shifted: demand.with_total(shifted_total),
        flexible_share,
        window_gain: gain,
    })
}

/// Scales both demand classes by `1 + ratio`: baseline demand grows in
/// proportion to the oversubscription ratio.
pub fn apply_oversubscription(demand: &DemandSeries, ratio: f64) -> Result<DemandSeries> {
    if !(ratio.is_finite() && ratio >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "oversubscription ratio must be non-negative, got {ratio}"
        )));
    }
    Ok(demand.scaled(1.0 + ratio))
}
