//! Detection of range-bound stretches: the support and resistance walls of
//! the box.
//!
//! A rolling window qualifies when the band between its walls is narrow
//! relative to the midpoint and most closes stay inside. Walls are
//! nearest-rank percentiles (5th of lows, 95th of highs) so that a couple of
//! spikes do not move them. Runs of consecutive qualifying windows merge into
//! one regime whose walls and containment are those of its final window.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::marketdata::{Bar, PriceSeries};

const SUPPORT_PERCENTILE: f64 = 5.0;
const RESISTANCE_PERCENTILE: f64 = 95.0;
const FLAT_WIDENING: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeConfig {
    pub window: usize,
    pub band_fraction: f64,
    pub containment_min: f64,
    pub min_length: usize,
}

impl Default for RegimeConfig {
    fn default() -> Self {
        Self {
            window: 60,
            band_fraction: 0.10,
            containment_min: 0.8,
            min_length: 40,
        }
    }
}

impl RegimeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::argument(
                "window",
                format!("must be >= 2, got {}", self.window),
            ));
        }
        if !(self.band_fraction > 0.0 && self.band_fraction < 1.0) {
            return Err(Error::argument(
                "band-fraction",
                format!("must lie in (0, 1), got {}", self.band_fraction),
            ));
        }
        if !(self.containment_min > 0.0 && self.containment_min <= 1.0) {
            return Err(Error::argument(
                "containment-min",
                format!("must lie in (0, 1], got {}", self.containment_min),
            ));
        }
        if self.min_length == 0 {
            return Err(Error::argument("min-length", "must be >= 1"));
        }
        Ok(())
    }
}

/// A stretch of bars confined between two walls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RangeBound {
    pub start_index: usize,
    pub end_index: usize,
    pub support: f64,
    pub resistance: f64,
    /// Fraction of closes of the final window inside [support, resistance].
    pub containment: f64,
}

impl RangeBound {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.support + self.resistance)
    }

    pub fn len(&self) -> usize {
        self.end_index - self.start_index + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains_index(&self, i: usize) -> bool {
        (self.start_index..=self.end_index).contains(&i)
    }
}

/// Nearest-rank percentile: the ⌈p/100 · n⌉-th smallest value.
pub fn nearest_rank(values: &[f64], percentile: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((percentile / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Walls and containment of a window of bars.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub support: f64,
    pub resistance: f64,
    pub band: f64,
    pub containment: f64,
}

pub fn window_stats(bars: &[Bar]) -> WindowStats {
    let lows: Vec<f64> = bars.iter().map(|b| b.low).collect();
    let highs: Vec<f64> = bars.iter().map(|b| b.high).collect();
    let mut support = nearest_rank(&lows, SUPPORT_PERCENTILE);
    let mut resistance = nearest_rank(&highs, RESISTANCE_PERCENTILE);
    let mid = 0.5 * (support + resistance);
    if support >= resistance {
        support = mid - FLAT_WIDENING * mid;
        resistance = mid + FLAT_WIDENING * mid;
    }
    let inside = bars
        .iter()
        .filter(|b| b.close >= support && b.close <= resistance)
        .count();
    WindowStats {
        support,
        resistance,
        band: (resistance - support) / mid,
        containment: inside as f64 / bars.len() as f64,
    }
}

/// Range-bound regimes of `series`, ordered and non-overlapping.
pub fn detect_range(series: &PriceSeries, config: &RegimeConfig) -> Result<Vec<RangeBound>> {
    config.validate()?;
    let needed = config.window.max(config.min_length);
    if series.len() < needed {
        return Err(Error::Range {
            required: needed,
            available: series.len(),
        });
    }
    let bars = series.bars();
    let mut regimes: Vec<RangeBound> = Vec::new();
    let mut run: Option<RangeBound> = None;
    let flush = |run: Option<RangeBound>, regimes: &mut Vec<RangeBound>| {
        if let Some(regime) = run.filter(|r| r.len() >= config.min_length) {
            regimes.push(regime);
        }
    };
    for end in config.window - 1..bars.len() {
        let start = end + 1 - config.window;
        let stats = window_stats(&bars[start..=end]);
        let qualifies =
            stats.band <= config.band_fraction && stats.containment >= config.containment_min;
        if !qualifies {
            flush(run.take(), &mut regimes);
            continue;
        }
        // A fresh run never reaches back into the previous regime.
        let floor = regimes.last().map_or(0, |r| r.end_index + 1);
        let start_index = run.map_or(start.max(floor), |r| r.start_index);
        run = Some(RangeBound {
            start_index,
            end_index: end,
            support: stats.support,
            resistance: stats.resistance,
            containment: stats.containment,
        });
    }
    flush(run, &mut regimes);
    Ok(regimes)
}
