//! Maximum-likelihood estimation of the choice sensitivities from
//! realized (preferred hour, chosen hour) pairs.
//!
//! The log-likelihood is concave in the two sensitivities. The gradient
//! components are observed-minus-expected distance and price; the Hessian
//! is minus the choice-distribution covariance of those two statistics,
//! so a damped Newton iteration (projected onto the non-positive
//! quadrant) converges in a handful of steps.

use super::{
    choice_probabilities_for_prices, hour_distance, ChoiceParams, DistanceMode, PriceSchedule,
    HOURS_PER_DAY,
};
use crate::error::{Error, Result};

/// Fit output. `converged` is false when the projected gradient norm
/// never dropped below the tolerance within the iteration budget; the
/// best iterate found is returned either way.
#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub params: ChoiceParams,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Choice counts grouped by preferred hour; the sufficient statistic.
struct ChoiceCounts {
    counts: [[f64; HOURS_PER_DAY]; HOURS_PER_DAY],
}

impl ChoiceCounts {
    fn from_choices(choices: &[(u8, u8)]) -> Result<Self> {
        if choices.is_empty() {
            return Err(Error::EmptyInput("choice observations".into()));
        }
        let mut counts = [[0.0; HOURS_PER_DAY]; HOURS_PER_DAY];
        for &(preferred, chosen) in choices {
            if preferred > 23 || chosen > 23 {
                return Err(Error::InvalidInput(format!(
                    "choice ({preferred}, {chosen}) outside 0..24"
                )));
            }
            counts[preferred as usize][chosen as usize] += 1.0;
        }
        Ok(ChoiceCounts { counts })
    }
}

struct Evaluation {
    ll: f64,
    grad: [f64; 2],
    hess: [[f64; 2]; 2],
}

fn eval(counts: &ChoiceCounts, prices: &[f64], params: &ChoiceParams) -> Result<Evaluation> {
    let mut ll = 0.0;
    let mut grad = [0.0; 2];
    let mut hess = [[0.0; 2]; 2];
    for preferred in 0..HOURS_PER_DAY {
        let row = &counts.counts[preferred];
        let row_total: f64 = row.iter().sum();
        if row_total == 0.0 {
            continue;
        }
        let probs =
            choice_probabilities_for_prices(params, preferred, prices, DistanceMode::Circular)?;
        let mut e_d = 0.0;
        let mut e_p = 0.0;
        let mut e_dd = 0.0;
        let mut e_dp = 0.0;
        let mut e_pp = 0.0;
        for (hour, &p) in probs.iter().enumerate() {
            let d = hour_distance(hour, preferred, HOURS_PER_DAY, DistanceMode::Circular);
            let price = prices[hour];
            e_d += p * d;
            e_p += p * price;
            e_dd += p * d * d;
            e_dp += p * d * price;
            e_pp += p * price * price;
        }
        for (hour, &count) in row.iter().enumerate() {
            if count == 0.0 {
                continue;
            }
            ll += count * probs[hour].max(f64::MIN_POSITIVE).ln();
            let d = hour_distance(hour, preferred, HOURS_PER_DAY, DistanceMode::Circular);
            grad[0] += count * (d - e_d);
            grad[1] += count * (prices[hour] - e_p);
        }
        hess[0][0] -= row_total * (e_dd - e_d * e_d);
        hess[0][1] -= row_total * (e_dp - e_d * e_p);
        hess[1][1] -= row_total * (e_pp - e_p * e_p);
    }
    hess[1][0] = hess[0][1];
    Ok(Evaluation { ll, grad, hess })
}

/// Log-likelihood and its analytic gradient with respect to the two
/// sensitivities, at the given parameter point. Exposed so the gradient
/// can be checked against finite differences.
pub fn log_likelihood_and_gradient(
    choices: &[(u8, u8)],
    prices: &PriceSchedule,
    params: &ChoiceParams,
) -> Result<(f64, (f64, f64))> {
    let counts = ChoiceCounts::from_choices(choices)?;
    let e = eval(&counts, &prices.price_vector(), params)?;
    Ok((e.ll, (e.grad[0], e.grad[1])))
}

fn clamp_params(time_sensitivity: f64, price_sensitivity: f64) -> ChoiceParams {
    ChoiceParams {
        time_sensitivity: time_sensitivity.min(0.0),
        price_sensitivity: price_sensitivity.min(0.0),
    }
}

/// Gradient with outward components zeroed at the clamped boundary;
/// its norm is the convergence measure.
fn projected_norm(params: &ChoiceParams, grad: &[f64; 2]) -> f64 {
    let ga = if params.time_sensitivity >= 0.0 && grad[0] > 0.0 {
        0.0
    } else {
        grad[0]
    };
    let gb = if params.price_sensitivity >= 0.0 && grad[1] > 0.0 {
        0.0
    } else {
        grad[1]
    };
    ga.abs().max(gb.abs())
}

/// Maximizes the choice log-likelihood. Damped Newton steps with a
/// gradient-ascent fallback; parameters stay non-positive throughout.
/// Converged when the projected gradient infinity norm falls below `tol`.
pub fn fit_logit_mle(
    choices: &[(u8, u8)],
    prices: &PriceSchedule,
    init: &ChoiceParams,
    max_iters: usize,
    tol: f64,
) -> Result<MleFit> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let counts = ChoiceCounts::from_choices(choices)?;
    let price_vec = prices.price_vector();

    let mut params = clamp_params(init.time_sensitivity, init.price_sensitivity);
    let mut current = eval(&counts, &price_vec, &params)?;
    let mut best = (params, current.ll);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..max_iters {
        iterations = iter + 1;
        if projected_norm(&params, &current.grad) < tol {
            converged = true;
            break;
        }

        // Newton direction: solve H s = -g for the concave Hessian.
        let h = &current.hess;
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let newton = if det.abs() > 1e-12 {
            Some([
                -(h[1][1] * current.grad[0] - h[0][1] * current.grad[1]) / det,
                -(h[0][0] * current.grad[1] - h[1][0] * current.grad[0]) / det,
            ])
        } else {
            None
        };

        let mut accepted = false;
        if let Some(step) = newton {
            let mut damping = 1.0;
            while damping > 1e-8 {
                let cand = clamp_params(
                    params.time_sensitivity + damping * step[0],
                    params.price_sensitivity + damping * step[1],
                );
                let cand_eval = eval(&counts, &price_vec, &cand)?;
                if cand_eval.ll > current.ll {
                    params = cand;
                    current = cand_eval;
                    accepted = true;
                    break;
                }
                damping *= 0.5;
            }
        }
        if !accepted {
            // Fall back to a backtracking gradient step.
            let scale = 1.0 / current.grad[0].abs().max(current.grad[1].abs()).max(1.0);
            let mut step = scale;
            while step > 1e-16 * scale {
                let cand = clamp_params(
                    params.time_sensitivity + step * current.grad[0],
                    params.price_sensitivity + step * current.grad[1],
                );
                let cand_eval = eval(&counts, &price_vec, &cand)?;
                if cand_eval.ll > current.ll {
                    params = cand;
                    current = cand_eval;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
        }
        if current.ll > best.1 {
            best = (params, current.ll);
        }
        if !accepted {
            // No improving step at representable sizes; treat the point
            // as the (possibly boundary) optimum.
            converged = projected_norm(&params, &current.grad) < tol.max(1e-3);
            break;
        }
    }

    Ok(MleFit {
        params: best.0,
        log_likelihood: best.1,
        converged,
        iterations,
    })
}
