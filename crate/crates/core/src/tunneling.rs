//! Transmission coefficient of the price through the 1/S² barrier.
//!
//! Below the turning point S* = √(σ/r) the potential exceeds λ and the
//! price is classically confined. The WKB estimate of the probability of
//! crossing from a strike level K up to S* is
//!
//! ```text
//!   T = exp(−2 ∫_K^{S*} κ(S) dS),   κ(S) = √((V(S) − λ) / h²)
//! ```
//!
//! which integrates in closed form to
//!
//! ```text
//!   T = exp(−2 √(r(σ² + r)/σ⁴) · [artanh(z) − z]),   z = √(1 − (r/σ)K²)
//! ```
//!
//! The closed form is what callers normally use; [`wkb_integral_numeric`]
//! evaluates the integral directly and serves as its cross-check.
//!
//! Note: a frequently quoted version of this formula writes the logarithm as
//! ½ ln(√((r/σ)K² + 1) / √((r/σ)K² − 1)). That argument is only real for
//! (r/σ)K² > 1, where the companion √(1 − (r/σ)K²) term is not, so it cannot
//! be evaluated as printed. The artanh form above is the antiderivative of
//! the WKB integral and agrees with quadrature to rounding.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BarrierGeometry, MarketParams};
use crate::quadrature::{self, DEFAULT_MAX_EVALUATIONS};

/// Default relative tolerance for the quadrature cross-check.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
/// Loosest tolerance the quadrature accepts.
pub const MAX_TOLERANCE: f64 = 1e-4;

/// Closed-form transmission through the barrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedForm {
    pub t_closed: f64,
    /// ln T, always ≤ 0.
    pub exponent: f64,
    pub geometry: BarrierGeometry,
}

/// Result of integrating κ numerically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureEstimate {
    pub t_quadrature: f64,
    /// ∫ κ dS over the forbidden region.
    pub integral: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Both routes side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransmissionReport {
    pub t_closed: f64,
    pub t_quadrature: f64,
    pub exponent: f64,
    pub geometry: BarrierGeometry,
    /// |t_closed − t_quadrature| / t_closed.
    pub rel_gap: f64,
}

/// artanh(z) − z, accurate also for small z where the difference cancels.
fn artanh_minus_identity(z: f64) -> f64 {
    if z < 0.1 {
        // Σ z^(2k+1)/(2k+1), k ≥ 1; terms beyond z^17 are below 1e-17 z³.
        let z2 = z * z;
        let mut term = z * z2;
        let mut sum = 0.0;
        let mut k = 3.0;
        while k < 19.0 {
            sum += term / k;
            term *= z2;
            k += 2.0;
        }
        sum
    } else {
        z.atanh() - z
    }
}

/// T from the closed-form WKB integral. Strikes at or beyond the turning
/// point see no barrier and transmit with T = 1.
pub fn transmission_closed_form(params: &MarketParams, strike: f64) -> Result<ClosedForm> {
    let geometry = params.barrier(strike)?;
    if !geometry.barrier_exists {
        return Ok(ClosedForm {
            t_closed: 1.0,
            exponent: 0.0,
            geometry,
        });
    }
    let z = (1.0 - BarrierGeometry::penetration(params, strike)).sqrt();
    let s2 = params.vol() * params.vol();
    let inv_h = (params.rate() * (s2 + params.rate()) / (s2 * s2)).sqrt();
    let exponent = -2.0 * inv_h * artanh_minus_identity(z);
    Ok(ClosedForm {
        t_closed: exponent.exp(),
        exponent,
        geometry,
    })
}

/// T = exp(−2I) with I = ∫_K^{S*} κ(S) dS integrated adaptively.
///
/// The substitution S = S* − t² turns the square-root zero of κ at S* into a
/// smooth integrand; the Kronrod rule never samples t = 0 either way.
pub fn wkb_integral_numeric(
    params: &MarketParams,
    strike: f64,
    tolerance: f64,
) -> Result<QuadratureEstimate> {
    wkb_integral_numeric_with_budget(params, strike, tolerance, DEFAULT_MAX_EVALUATIONS)
}

/// [`wkb_integral_numeric`] with an explicit evaluation budget.
pub fn wkb_integral_numeric_with_budget(
    params: &MarketParams,
    strike: f64,
    tolerance: f64,
    max_evaluations: usize,
) -> Result<QuadratureEstimate> {
    if !(tolerance > 0.0 && tolerance <= MAX_TOLERANCE) {
        return Err(Error::argument(
            "tolerance",
            format!("must lie in (0, {MAX_TOLERANCE:e}], got {tolerance}"),
        ));
    }
    let geometry = params.barrier(strike)?;
    let s_star = geometry.turning_point;
    if !geometry.barrier_exists || strike >= s_star {
        return Ok(QuadratureEstimate {
            t_quadrature: 1.0,
            integral: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
        });
    }
    let h = params.planck_coefficient().sqrt();
    // κ(S) dS with S = S* − t², dS = −2t dt, and
    // 1/S² − 1/S*² = t²(2S* − t²)/(S² S*²).
    let integrand = |t: f64| {
        let s = s_star - t * t;
        let gap = (2.0 * s_star - t * t).max(0.0);
        2.0 * t * t * gap.sqrt() / (s * s_star * h)
    };
    let upper = (s_star - strike).sqrt();
    let integral = quadrature::integrate(integrand, 0.0, upper, tolerance, max_evaluations)?;
    Ok(QuadratureEstimate {
        t_quadrature: (-2.0 * integral.value).exp(),
        integral: integral.value,
        error_estimate: integral.error,
        evaluations: integral.evaluations,
    })
}

/// Closed form and quadrature evaluated together.
pub fn transmission_report(
    params: &MarketParams,
    strike: f64,
    tolerance: f64,
) -> Result<TransmissionReport> {
    let closed = transmission_closed_form(params, strike)?;
    let quad = wkb_integral_numeric(params, strike, tolerance)?;
    Ok(TransmissionReport {
        t_closed: closed.t_closed,
        t_quadrature: quad.t_quadrature,
        exponent: closed.exponent,
        geometry: closed.geometry,
        rel_gap: (closed.t_closed - quad.t_quadrature).abs() / closed.t_closed,
    })
}

/// A horizontal λ line on the potential plot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaLevel {
    pub lambda: f64,
    /// √(1/λ) when it falls inside the plotted range.
    pub turning_point: Option<f64>,
}

/// Samples of V(S) = 1/S² together with λ-level annotations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierProfile {
    pub rows: Vec<(f64, f64)>,
    pub levels: Vec<LambdaLevel>,
}

/// Uniform samples of the potential on [s_min, s_max].
pub fn barrier_profile(
    s_min: f64,
    s_max: f64,
    points: usize,
    lambda_levels: &[f64],
) -> Result<BarrierProfile> {
    if s_min <= 0.0 || !s_min.is_finite() {
        return Err(Error::Domain(format!(
            "potential plot needs s_min > 0, got {s_min}"
        )));
    }
    if s_max <= s_min || !s_max.is_finite() {
        return Err(Error::argument(
            "s-max",
            format!("must exceed s_min = {s_min}, got {s_max}"),
        ));
    }
    if points < 2 {
        return Err(Error::argument(
            "points",
            format!("need at least 2, got {points}"),
        ));
    }
    let step = (s_max - s_min) / (points - 1) as f64;
    let rows = (0..points)
        .map(|i| {
            let s = if i + 1 == points {
                s_max
            } else {
                s_min + i as f64 * step
            };
            (s, 1.0 / (s * s))
        })
        .collect();
    let levels = lambda_levels
        .iter()
        .map(|&lambda| {
            if lambda <= 0.0 || !lambda.is_finite() {
                return Err(Error::argument(
                    "lambda-level",
                    format!("must be > 0, got {lambda}"),
                ));
            }
            let tp = (1.0 / lambda).sqrt();
            Ok(LambdaLevel {
                lambda,
                turning_point: (s_min..=s_max).contains(&tp).then_some(tp),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BarrierProfile { rows, levels })
}
