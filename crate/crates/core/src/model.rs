//! Market parameters and the closed-form scalars of the pricing equation.
//!
//! In a range-bound market the option value ψ(S) obeys
//!
//! ```text
//!   -h² ψ''(S) + V(S) ψ(S) = λ ψ(S),   h² = σ⁴ / (r (σ² + r)),   V(S) = 1/S²,   λ = r/σ
//! ```
//!
//! `r` and `σ` are annualized fractions (0.05 = 5%). Prices entering these
//! formulas are normalized, dimensionless levels.

use serde::Serialize;

use crate::error::{Error, Result};

/// Interest rate and volatility of the underlying.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketParams {
    rate: f64,
    vol: f64,
}

impl MarketParams {
    /// Both `rate` and `vol` must be finite and strictly positive.
    pub fn new(rate: f64, vol: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::argument("rate", format!("must be > 0, got {rate}")));
        }
        if !(vol.is_finite() && vol > 0.0) {
            return Err(Error::argument("vol", format!("must be > 0, got {vol}")));
        }
        Ok(Self { rate, vol })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn vol(&self) -> f64 {
        self.vol
    }

    /// The separation constant λ = r/σ, the "energy" of the price.
    pub fn lambda(&self) -> f64 {
        self.rate / self.vol
    }

    /// Coefficient of the second derivative, σ⁴ / (r (σ² + r)).
    pub fn planck_coefficient(&self) -> f64 {
        let s2 = self.vol * self.vol;
        s2 * s2 / (self.rate * (s2 + self.rate))
    }

    /// The price S* = √(σ/r) at which V(S*) = λ.
    pub fn turning_point(&self) -> f64 {
        (self.vol / self.rate).sqrt()
    }

    /// Geometry of the barrier seen from a normalized strike level.
    pub fn barrier(&self, strike: f64) -> Result<BarrierGeometry> {
        BarrierGeometry::new(self, strike)
    }
}

/// Free-function form of [`MarketParams::lambda`].
pub fn lambda_constant(params: &MarketParams) -> f64 {
    params.lambda()
}

/// Free-function form of [`MarketParams::planck_coefficient`].
pub fn planck_coefficient(params: &MarketParams) -> f64 {
    params.planck_coefficient()
}

/// Free-function form of [`MarketParams::turning_point`].
pub fn turning_point(params: &MarketParams) -> f64 {
    params.turning_point()
}

/// The price potential V(S) = 1/S². Singular at the origin.
pub fn potential(s: f64) -> Result<f64> {
    if s <= 0.0 || !s.is_finite() {
        return Err(Error::Domain(format!(
            "potential is defined for S > 0, got {s}"
        )));
    }
    Ok(1.0 / (s * s))
}

/// Where a strike sits relative to the classically forbidden region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierGeometry {
    pub strike: f64,
    pub turning_point: f64,
    /// True iff (r/σ)·K² < 1, i.e. the strike lies below the turning point.
    pub barrier_exists: bool,
}

impl BarrierGeometry {
    pub fn new(params: &MarketParams, strike: f64) -> Result<Self> {
        if !(strike.is_finite() && strike > 0.0) {
            return Err(Error::argument(
                "strike",
                format!("must be > 0, got {strike}"),
            ));
        }
        Ok(Self {
            strike,
            turning_point: params.turning_point(),
            barrier_exists: params.lambda() * strike * strike < 1.0,
        })
    }

    /// (r/σ)·K², the squared ratio of strike to turning point.
    pub fn penetration(params: &MarketParams, strike: f64) -> f64 {
        params.lambda() * strike * strike
    }
}
