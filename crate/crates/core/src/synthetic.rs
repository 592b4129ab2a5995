//! Seeded range-bound price paths, optionally ending in an injected
//! breakout.
//!
//! Closes follow a driftless geometric random walk
//! `C ← C · exp(v·ε − v²/2)` with ε drawn from `rand_distr::StandardNormal`
//! fed by `rand_chacha::ChaCha8Rng::seed_from_u64(seed)`. Both algorithms are
//! fixed, so a seed pins the path on every platform.
//!
//! The walls reflect geometrically: a close above the resistance R becomes
//! R²/C, a close below the support S becomes S²/C. From `breakout.at_bar`
//! on, the per-bar volatility is damped, a drift is added to every log
//! return and the exit wall stops reflecting.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::{Bar, PriceSeries};

pub const SYNTHETIC_VOLUME: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Up => "up",
            Direction::Down => "down",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Breakout {
    /// First bar whose return uses the damped, drifting dynamics.
    pub at_bar: usize,
    pub vol_damp: f64,
    /// Size of the log drift per bar; its sign follows `direction`.
    pub drift_per_bar: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub bars: usize,
    pub start: f64,
    pub support: f64,
    pub resistance: f64,
    /// Per-bar standard deviation of log returns.
    pub daily_vol: f64,
    pub breakout: Option<Breakout>,
    pub symbol: String,
    pub start_date: NaiveDate,
}

impl SynthConfig {
    /// A path in [95, 105] starting at 100 with 1% daily moves.
    pub fn range_bound(seed: u64, bars: usize) -> Self {
        Self {
            seed,
            bars,
            start: 100.0,
            support: 95.0,
            resistance: 105.0,
            daily_vol: 0.01,
            breakout: None,
            symbol: "SYNTH".into(),
            start_date: NaiveDate::from_ymd_opt(2013, 1, 1).expect("valid date"),
        }
    }

    pub fn with_breakout(mut self, breakout: Breakout) -> Self {
        self.breakout = Some(breakout);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::argument(name, format!("must be > 0, got {v}")))
            }
        };
        positive("support", self.support)?;
        positive("resistance", self.resistance)?;
        positive("start", self.start)?;
        positive("daily-vol", self.daily_vol)?;
        if !(self.support < self.start && self.start < self.resistance) {
            return Err(Error::argument(
                "start",
                format!(
                    "need support < start < resistance, got {} < {} < {}",
                    self.support, self.start, self.resistance
                ),
            ));
        }
        if self.bars < 2 {
            return Err(Error::argument(
                "bars",
                format!("need at least 2, got {}", self.bars),
            ));
        }
        if let Some(b) = &self.breakout {
            if !(b.vol_damp > 0.0 && b.vol_damp < 1.0) {
                return Err(Error::argument(
                    "vol-damp",
                    format!("must lie in (0, 1), got {}", b.vol_damp),
                ));
            }
            if !(b.drift_per_bar.is_finite() && b.drift_per_bar >= 0.0) {
                return Err(Error::argument(
                    "drift",
                    format!("must be finite and >= 0, got {}", b.drift_per_bar),
                ));
            }
            if b.at_bar == 0 || b.at_bar >= self.bars {
                return Err(Error::argument(
                    "breakout-at",
                    format!("must lie in 1..{}, got {}", self.bars, b.at_bar),
                ));
            }
        }
        Ok(())
    }
}

/// Consecutive weekdays starting at the first weekday on or after `start`.
fn trading_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut day = start;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        if !matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(day);
        }
        day = day + Days::new(1);
    }
    out
}

/// Generate the path described by `config`.
pub fn generate(config: &SynthConfig) -> Result<PriceSeries> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dates = trading_days(config.start_date, config.bars);
    let (sup, res) = (config.support, config.resistance);
    let band = config.daily_vol / 4.0;

    let mut closes = Vec::with_capacity(config.bars);
    closes.push(config.start);
    for t in 1..config.bars {
        let (vol, drift, reflect_up, reflect_down) = match &config.breakout {
            Some(b) if t >= b.at_bar => (
                config.daily_vol * b.vol_damp,
                match b.direction {
                    Direction::Up => b.drift_per_bar,
                    Direction::Down => -b.drift_per_bar,
                },
                b.direction != Direction::Up,
                b.direction != Direction::Down,
            ),
            _ => (config.daily_vol, 0.0, true, true),
        };
        let eps: f64 = StandardNormal.sample(&mut rng);
        let mut c = closes[t - 1] * (vol * eps - 0.5 * vol * vol + drift).exp();
        // A single reflection can overshoot the opposite wall only for moves
        // wider than the box; keep folding until inside.
        for _ in 0..64 {
            if reflect_up && c > res {
                c = res * res / c;
            } else if reflect_down && c < sup {
                c = sup * sup / c;
            } else {
                break;
            }
        }
        closes.push(c);
    }

    let bars = closes
        .iter()
        .enumerate()
        .map(|(t, &close)| {
            let open = if t == 0 { config.start } else { closes[t - 1] };
            Bar {
                date: dates[t],
                open,
                high: open.max(close) * (1.0 + band),
                low: open.min(close) * (1.0 - band),
                close,
                volume: SYNTHETIC_VOLUME,
            }
        })
        .collect();
    PriceSeries::new(config.symbol.clone(), bars)
}
