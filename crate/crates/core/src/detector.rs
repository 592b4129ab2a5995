//! Tunneling breakouts: a close escaping a range after the volatility has
//! collapsed far enough that the transmission coefficient through the wall
//! is close to one.
//!
//! For a regime with walls [support, resistance] the breached wall is
//! normalized by the regime midpoint, K = level / midpoint, and T is the
//! closed-form transmission for (rate, σ = slow realized vol, K). An event
//! fires at the first bar of a regime (or of the grace period right after
//! it) where the close is outside the walls, the fast vol is at most
//! `vol_drop_ratio` times the slow vol, and T reaches `t_threshold`.

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::marketdata::{realized_volatility, PriceSeries};
use crate::model::MarketParams;
use crate::regime::{detect_range, window_stats, RangeBound, RegimeConfig, WindowStats};
use crate::synthetic::Direction;
use crate::tunneling::transmission_closed_form;

/// How wall prices are mapped to dimensionless strikes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// K = level / ((support + resistance) / 2).
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorConfig {
    pub t_threshold: f64,
    pub vol_drop_ratio: f64,
    pub vol_fast_window: usize,
    pub vol_slow_window: usize,
    pub normalization: Normalization,
    pub rate: f64,
    /// Bars after a regime's last bar that still count as "immediately
    /// after" it.
    pub grace_bars: usize,
}

impl DetectorConfig {
    pub fn new(rate: f64) -> Self {
        Self {
            t_threshold: 0.95,
            vol_drop_ratio: 0.5,
            vol_fast_window: 5,
            vol_slow_window: 20,
            normalization: Normalization::Midpoint,
            rate,
            grace_bars: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_threshold > 0.0 && self.t_threshold <= 1.0) {
            return Err(Error::argument(
                "t-threshold",
                format!("must lie in (0, 1], got {}", self.t_threshold),
            ));
        }
        if !(self.vol_drop_ratio > 0.0 && self.vol_drop_ratio < 1.0) {
            return Err(Error::argument(
                "vol-drop-ratio",
                format!("must lie in (0, 1), got {}", self.vol_drop_ratio),
            ));
        }
        if self.vol_fast_window < 2 {
            return Err(Error::argument("vol-fast-window", "must be >= 2"));
        }
        if self.vol_fast_window >= self.vol_slow_window {
            return Err(Error::argument(
                "vol-fast-window",
                format!(
                    "must be shorter than the slow window ({} >= {})",
                    self.vol_fast_window, self.vol_slow_window
                ),
            ));
        }
        MarketParams::new(self.rate, 1.0)?;
        Ok(())
    }
}

/// Everything the scanner was run with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanConfig {
    pub detector: DetectorConfig,
    pub regime: RegimeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TunnelEvent {
    pub bar_index: usize,
    pub date: NaiveDate,
    pub close: f64,
    pub direction: Direction,
    /// Index into [`ScanReport::regimes`].
    pub regime: usize,
    /// Walls in force when the close broke out.
    pub support: f64,
    pub resistance: f64,
    pub strike: f64,
    pub t_at_event: f64,
    pub vol_fast: f64,
    pub vol_slow: f64,
    /// (bar index, T against the breached wall) over the bars leading up to
    /// and including the event.
    pub t_trajectory: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub date: NaiveDate,
    pub close: f64,
    pub vol_fast: Option<f64>,
    pub vol_slow: Option<f64>,
    /// T against the wall nearest to the close, while a regime is active.
    pub t: Option<f64>,
    pub in_regime: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub symbol: String,
    pub config: ScanConfig,
    pub regimes: Vec<RangeBound>,
    pub events: Vec<TunnelEvent>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ScanReport {
    /// Compact JSON with fields in declaration order, newline terminated.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Dimensionless strike for a wall level of the range [support, resistance].
pub fn normalized_strike(
    support: f64,
    resistance: f64,
    level: f64,
    normalization: Normalization,
) -> f64 {
    match normalization {
        Normalization::Midpoint => level / (0.5 * (support + resistance)),
    }
}

/// T for tunneling through `level` of `regime`.
pub fn evaluate_bar(
    params: &MarketParams,
    regime: &RangeBound,
    close: f64,
    level: f64,
) -> Result<f64> {
    if close.is_nan() || close <= 0.0 {
        return Err(Error::argument(
            "close",
            format!("must be > 0, got {close}"),
        ));
    }
    let strike = normalized_strike(
        regime.support,
        regime.resistance,
        level,
        Normalization::Midpoint,
    );
    Ok(transmission_closed_form(params, strike)?.t_closed)
}

fn vols(series: &PriceSeries, window: usize) -> Vec<Option<f64>> {
    (0..series.len())
        .map(|i| realized_volatility(series, window, i).ok().map(|p| p.vol))
        .collect()
}

fn wall(walls: &WindowStats, direction: Direction) -> f64 {
    match direction {
        Direction::Up => walls.resistance,
        Direction::Down => walls.support,
    }
}

fn breaches(walls: &WindowStats, close: f64, direction: Direction) -> bool {
    match direction {
        Direction::Up => close > walls.resistance,
        Direction::Down => close < walls.support,
    }
}

/// Walls of the most recent qualifying window of `regime` that closed
/// strictly before bar `i`: the range a close at `i` would break out of.
/// `None` before the regime's first window has completed.
pub fn walls_in_force(
    series: &PriceSeries,
    regime: &RangeBound,
    window: usize,
    i: usize,
) -> Option<WindowStats> {
    let first_end = regime.start_index + window - 1;
    if i == 0 || i - 1 < first_end {
        return None;
    }
    let end = (i - 1).min(regime.end_index);
    Some(window_stats(&series.bars()[end + 1 - window..=end]))
}

struct Context<'a> {
    series: &'a PriceSeries,
    config: &'a DetectorConfig,
    window: usize,
    fast: Vec<Option<f64>>,
    slow: Vec<Option<f64>>,
}

impl Context<'_> {
    /// T at bar `i` for `strike`, if the slow vol is defined and positive.
    fn t_at(&self, i: usize, strike: f64) -> Result<Option<f64>> {
        let Some(sigma) = self.slow[i].filter(|v| *v > 0.0) else {
            return Ok(None);
        };
        let params = MarketParams::new(self.config.rate, sigma)?;
        Ok(Some(transmission_closed_form(&params, strike)?.t_closed))
    }

    fn strike(&self, walls: &WindowStats, direction: Direction) -> f64 {
        let level = wall(walls, direction);
        normalized_strike(
            walls.support,
            walls.resistance,
            level,
            self.config.normalization,
        )
    }

    fn first_event(
        &self,
        regime_index: usize,
        regime: &RangeBound,
        span: std::ops::RangeInclusive<usize>,
        direction: Direction,
    ) -> Result<Option<TunnelEvent>> {
        let bars = self.series.bars();
        for i in span.clone() {
            let Some(walls) = walls_in_force(self.series, regime, self.window, i) else {
                continue;
            };
            let close = bars[i].close;
            if !breaches(&walls, close, direction) {
                continue;
            }
            let (Some(vf), Some(vs)) = (self.fast[i], self.slow[i]) else {
                continue;
            };
            if vf > self.config.vol_drop_ratio * vs {
                continue;
            }
            let strike = self.strike(&walls, direction);
            let Some(t) = self.t_at(i, strike)? else {
                continue;
            };
            if t < self.config.t_threshold {
                continue;
            }
            let from = i
                .saturating_sub(self.config.vol_slow_window)
                .max(*span.start());
            let mut trajectory = Vec::with_capacity(i - from + 1);
            for j in from..=i {
                let Some(w) = walls_in_force(self.series, regime, self.window, j) else {
                    continue;
                };
                if let Some(tj) = self.t_at(j, self.strike(&w, direction))? {
                    trajectory.push((j, tj));
                }
            }
            return Ok(Some(TunnelEvent {
                bar_index: i,
                date: bars[i].date,
                close,
                direction,
                regime: regime_index,
                support: walls.support,
                resistance: walls.resistance,
                strike,
                t_at_event: t,
                vol_fast: vf,
                vol_slow: vs,
                t_trajectory: trajectory,
            }));
        }
        Ok(None)
    }
}

/// Find range-bound regimes and the tunneling breakouts out of them.
pub fn scan(
    series: &PriceSeries,
    config: &DetectorConfig,
    regime_config: &RegimeConfig,
) -> Result<ScanReport> {
    config.validate()?;
    if series.len() < config.vol_slow_window + 1 {
        return Err(Error::Range {
            required: config.vol_slow_window + 1,
            available: series.len(),
        });
    }
    let regimes = detect_range(series, regime_config)?;
    let ctx = Context {
        series,
        config,
        window: regime_config.window,
        fast: vols(series, config.vol_fast_window),
        slow: vols(series, config.vol_slow_window),
    };
    let last = series.len() - 1;

    // Bars each regime may fire on: its own bars plus the grace period,
    // cut short by the next regime.
    let spans: Vec<_> = regimes
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let mut end = (r.end_index + config.grace_bars).min(last);
            if let Some(next) = regimes.get(k + 1) {
                end = end.min(next.start_index - 1);
            }
            r.start_index..=end
        })
        .collect();

    let mut events = Vec::new();
    for (k, (regime, span)) in regimes.iter().zip(&spans).enumerate() {
        for direction in [Direction::Up, Direction::Down] {
            if let Some(event) = ctx.first_event(k, regime, span.clone(), direction)? {
                log::info!(
                    "{}: {direction} tunneling at bar {} ({}), T = {:.4}",
                    series.symbol(),
                    event.bar_index,
                    event.date,
                    event.t_at_event
                );
                events.push(event);
            }
        }
    }
    events.sort_by_key(|e| (e.bar_index, e.direction == Direction::Down));

    let mut diagnostics = Vec::with_capacity(series.len());
    for (i, bar) in series.bars().iter().enumerate() {
        let active = spans.iter().position(|s| s.contains(&i));
        let walls = active.and_then(|k| walls_in_force(series, &regimes[k], ctx.window, i));
        let t = match walls {
            Some(w) => {
                let nearest = if (bar.close - w.resistance).abs() <= (bar.close - w.support).abs() {
                    Direction::Up
                } else {
                    Direction::Down
                };
                ctx.t_at(i, ctx.strike(&w, nearest))?
            }
            None => None,
        };
        diagnostics.push(Diagnostic {
            date: bar.date,
            close: bar.close,
            vol_fast: ctx.fast[i],
            vol_slow: ctx.slow[i],
            t,
            in_regime: regimes.iter().any(|r| r.contains_index(i)),
        });
    }

    Ok(ScanReport {
        symbol: series.symbol().to_string(),
        config: ScanConfig {
            detector: *config,
            regime: *regime_config,
        },
        regimes,
        events,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marketdata::Bar;

    fn regime(support: f64, resistance: f64) -> RangeBound {
        RangeBound {
            start_index: 0,
            end_index: 59,
            support,
            resistance,
            containment: 1.0,
        }
    }

    #[test]
    fn strike_is_wall_over_midpoint() {
        let r = regime(95.0, 105.0);
        let k = |level| normalized_strike(r.support, r.resistance, level, Normalization::Midpoint);
        assert!((k(105.0) - 1.05).abs() < 1e-15);
        assert!((k(95.0) - 0.95).abs() < 1e-15);
    }

    #[test]
    fn evaluate_bar_reference_value() {
        // Midpoint 1 so the level is the strike itself.
        let r = regime(0.2, 1.8);
        let p = MarketParams::new(0.05, 0.18).unwrap();
        let t = evaluate_bar(&p, &r, 1.9, 1.8).unwrap();
        assert!((t - 0.9563).abs() < 1e-3);
    }

    #[test]
    fn evaluate_bar_without_barrier() {
        let r = regime(95.0, 105.0);
        let p = MarketParams::new(0.05, 0.05).unwrap();
        assert_eq!(evaluate_bar(&p, &r, 106.0, 105.0).unwrap(), 1.0);
        assert!(evaluate_bar(&p, &r, 0.0, 105.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(DetectorConfig::new(0.05).validate().is_ok());
        assert!(DetectorConfig::new(0.0).validate().is_err());
        assert!(DetectorConfig {
            t_threshold: 1.5,
            ..DetectorConfig::new(0.05)
        }
        .validate()
        .is_err());
        assert!(DetectorConfig {
            vol_drop_ratio: 1.0,
            ..DetectorConfig::new(0.05)
        }
        .validate()
        .is_err());
        assert!(DetectorConfig {
            vol_fast_window: 20,
            ..DetectorConfig::new(0.05)
        }
        .validate()
        .is_err());
    }

    #[test]
    fn constant_series_has_no_events() {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let bars = (0..120)
            .map(|i| Bar {
                date: start + chrono::Days::new(i),
                open: 10.0,
                high: 10.0,
                low: 10.0,
                close: 10.0,
                volume: 0.0,
            })
            .collect();
        let s = PriceSeries::new("FLAT", bars).unwrap();
        let report = scan(&s, &DetectorConfig::new(0.05), &RegimeConfig::default()).unwrap();
        assert_eq!(report.regimes.len(), 1);
        assert!(report.events.is_empty());
        assert_eq!(report.diagnostics.len(), 120);
    }

    #[test]
    fn short_series_is_a_range_error() {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let bars = (0..10)
            .map(|i| Bar {
                date: start + chrono::Days::new(i),
                open: 10.0,
                high: 10.0,
                low: 10.0,
                close: 10.0,
                volume: 0.0,
            })
            .collect();
        let s = PriceSeries::new("FLAT", bars).unwrap();
        assert!(matches!(
            scan(&s, &DetectorConfig::new(0.05), &RegimeConfig::default()),
            Err(Error::Range { .. })
        ));
    }

    use crate::synthetic::{generate, Breakout, SynthConfig};

    fn boxed(seed: u64, bars: usize, breakout: Option<Direction>) -> PriceSeries {
        let mut cfg = SynthConfig {
            support: 97.0,
            resistance: 103.0,
            daily_vol: 0.007,
            ..SynthConfig::range_bound(seed, bars)
        };
        if let Some(direction) = breakout {
            cfg = cfg.with_breakout(Breakout {
                at_bar: 200,
                vol_damp: 0.25,
                drift_per_bar: 0.004,
                direction,
            });
        }
        generate(&cfg).unwrap()
    }

    fn config() -> DetectorConfig {
        DetectorConfig::new(0.065)
    }

    #[test]
    fn injected_breakout_fires_once() {
        let s = boxed(7, 300, Some(Direction::Up));
        let report = scan(&s, &config(), &RegimeConfig::default()).unwrap();
        assert_eq!(report.events.len(), 1, "{:?}", report.events);
        let e = &report.events[0];
        assert_eq!(e.direction, Direction::Up);
        assert!((200..=215).contains(&e.bar_index), "{}", e.bar_index);
        assert!(e.t_at_event >= 0.95);
        assert_eq!(e.t_trajectory.last().map(|p| p.0), Some(e.bar_index));
    }

    #[test]
    fn down_breakout_fires_down() {
        let hits = (0..10)
            .filter(|&seed| {
                let s = boxed(seed, 300, Some(Direction::Down));
                let report = scan(&s, &config(), &RegimeConfig::default()).unwrap();
                report
                    .events
                    .iter()
                    .any(|e| e.direction == Direction::Down && e.bar_index >= 200)
            })
            .count();
        assert!(hits >= 8, "{hits}/10");
    }

    #[test]
    fn event_conditions_hold_on_raw_data() {
        let regime_cfg = RegimeConfig::default();
        let cfg = config();
        for seed in 0..20 {
            let s = boxed(seed, 300, Some(Direction::Up));
            let report = scan(&s, &cfg, &regime_cfg).unwrap();
            for e in &report.events {
                let regime = &report.regimes[e.regime];
                let walls = walls_in_force(&s, regime, regime_cfg.window, e.bar_index).unwrap();
                assert_eq!((walls.support, walls.resistance), (e.support, e.resistance));
                let close = s.bars()[e.bar_index].close;
                match e.direction {
                    Direction::Up => assert!(close > e.resistance),
                    Direction::Down => assert!(close < e.support),
                }
                let vf = realized_volatility(&s, cfg.vol_fast_window, e.bar_index)
                    .unwrap()
                    .vol;
                let vs = realized_volatility(&s, cfg.vol_slow_window, e.bar_index)
                    .unwrap()
                    .vol;
                assert_eq!((vf, vs), (e.vol_fast, e.vol_slow));
                assert!(vf <= cfg.vol_drop_ratio * vs);
                let level = if e.direction == Direction::Up {
                    e.resistance
                } else {
                    e.support
                };
                let k = level / (0.5 * (e.support + e.resistance));
                let t = transmission_closed_form(&MarketParams::new(cfg.rate, vs).unwrap(), k)
                    .unwrap()
                    .t_closed;
                assert_eq!(t, e.t_at_event);
                assert!(t >= cfg.t_threshold);
                assert!(e.bar_index >= regime.start_index);
                assert!(e.bar_index <= regime.end_index + cfg.grace_bars);
            }
            for pair in report.events.windows(2) {
                assert!(pair[0].bar_index <= pair[1].bar_index);
            }
        }
    }

    #[test]
    fn tightening_thresholds_never_adds_events() {
        let regime_cfg = RegimeConfig::default();
        for seed in 0..15 {
            let s = boxed(seed, 300, Some(Direction::Up));
            let mut previous: Option<Vec<TunnelEvent>> = None;
            for threshold in [0.5, 0.8, 0.9, 0.95, 0.99, 0.999] {
                let cfg = DetectorConfig {
                    t_threshold: threshold,
                    ..config()
                };
                let events = scan(&s, &cfg, &regime_cfg).unwrap().events;
                if let Some(prev) = &previous {
                    assert!(events.len() <= prev.len());
                    for e in &events {
                        let earlier = prev
                            .iter()
                            .find(|p| p.regime == e.regime && p.direction == e.direction)
                            .expect("event also present at lower threshold");
                        assert!(earlier.bar_index <= e.bar_index);
                    }
                }
                previous = Some(events);
            }
            let mut previous = usize::MAX;
            for ratio in [0.9, 0.7, 0.5, 0.3, 0.1] {
                let cfg = DetectorConfig {
                    vol_drop_ratio: ratio,
                    ..config()
                };
                let count = scan(&s, &cfg, &regime_cfg).unwrap().events.len();
                assert!(count <= previous);
                previous = count;
            }
        }
    }

    #[test]
    fn events_are_scale_invariant() {
        let regime_cfg = RegimeConfig::default();
        for seed in 0..10 {
            let s = boxed(seed, 300, Some(Direction::Up));
            let base = scan(&s, &config(), &regime_cfg).unwrap();
            let scaled = scan(&s.scaled(4.0).unwrap(), &config(), &regime_cfg).unwrap();
            let key = |r: &ScanReport| -> Vec<_> {
                r.events
                    .iter()
                    .map(|e| (e.bar_index, e.direction, e.regime))
                    .collect()
            };
            assert_eq!(key(&base), key(&scaled));
            for (a, b) in base.events.iter().zip(&scaled.events) {
                assert!((a.strike - b.strike).abs() < 1e-12);
                assert!((a.t_at_event - b.t_at_event).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn report_json_is_deterministic() {
        let s = boxed(3, 300, Some(Direction::Up));
        let a = scan(&s, &config(), &RegimeConfig::default())
            .unwrap()
            .to_canonical_json();
        let b = scan(&s, &config(), &RegimeConfig::default())
            .unwrap()
            .to_canonical_json();
        assert_eq!(a, b);
        assert!(a.ends_with('\n'));
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["diagnostics"].as_array().unwrap().len(), 300);
        assert_eq!(v["config"]["detector"]["normalization"], "midpoint");
    }

    #[test]
    fn pure_range_is_mostly_quiet() {
        let noisy = (100..120)
            .filter(|&seed| {
                let s = boxed(seed, 250, None);
                !scan(&s, &config(), &RegimeConfig::default())
                    .unwrap()
                    .events
                    .is_empty()
            })
            .count();
        assert!(noisy <= 2, "{noisy}/20");
    }
}
