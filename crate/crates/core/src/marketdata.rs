//! Daily OHLCV bars and close-to-close realized volatility.
//!
//! CSV layout: a header line that reads exactly
//! `date,open,high,low,close,volume`, ISO dates, decimal numbers, LF or CRLF
//! line endings.

use std::io::Read;

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 6] = ["date", "open", "high", "low", "close", "volume"];
pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;
const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl Bar {
    /// Checks positivity and that the high/low bracket the open and close.
    pub fn validate(&self) -> std::result::Result<(), String> {
        for (name, v) in [
            ("open", self.open),
            ("high", self.high),
            ("low", self.low),
            ("close", self.close),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be a positive price, got {v}"));
            }
        }
        if !(self.volume.is_finite() && self.volume >= 0.0) {
            return Err(format!("volume must be >= 0, got {}", self.volume));
        }
        if self.low > self.open.min(self.close) {
            return Err(format!(
                "low {} exceeds min(open, close) = {}",
                self.low,
                self.open.min(self.close)
            ));
        }
        if self.high < self.open.max(self.close) {
            return Err(format!(
                "high {} is below max(open, close) = {}",
                self.high,
                self.open.max(self.close)
            ));
        }
        Ok(())
    }
}

/// A non-empty, strictly date-ascending run of bars for one symbol.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceSeries {
    symbol: String,
    bars: Vec<Bar>,
}

impl PriceSeries {
    pub fn new(symbol: impl Into<String>, bars: Vec<Bar>) -> Result<Self> {
        if bars.is_empty() {
            return Err(Error::Integrity("price series is empty".into()));
        }
        for (i, bar) in bars.iter().enumerate() {
            bar.validate()
                .map_err(|reason| Error::Integrity(format!("bar {i} ({}): {reason}", bar.date)))?;
        }
        if let Some(w) = bars.windows(2).find(|w| w[0].date >= w[1].date) {
            return Err(Error::Integrity(if w[0].date == w[1].date {
                format!("duplicate date {}", w[0].date)
            } else {
                format!("dates out of order: {} before {}", w[0].date, w[1].date)
            }));
        }
        Ok(Self {
            symbol: symbol.into(),
            bars,
        })
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }

    /// Same dates, every price multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let bars = self
            .bars
            .iter()
            .map(|b| Bar {
                open: b.open * factor,
                high: b.high * factor,
                low: b.low * factor,
                close: b.close * factor,
                ..*b
            })
            .collect();
        Self::new(self.symbol.clone(), bars)
    }
}

/// Parse bars from CSV text. Rows may arrive in any date order; they are
/// sorted and duplicate dates are rejected.
pub fn parse_csv<R: Read>(input: R, symbol: &str) -> Result<PriceSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("unreadable header: {e}")))?
        .clone();
    for column in CSV_COLUMNS {
        if !headers.iter().any(|h| h == column) {
            return Err(Error::Format(format!("missing column `{column}`")));
        }
    }
    if !headers.iter().eq(CSV_COLUMNS.iter().copied()) {
        return Err(Error::Format(format!(
            "header must read exactly `{}`, got `{}`",
            CSV_COLUMNS.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut bars = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Row {
                line,
                reason: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row_err = |reason: String| Error::Row { line, reason };
        let date = NaiveDate::parse_from_str(&record[0], DATE_FORMAT)
            .map_err(|e| row_err(format!("bad date `{}`: {e}", &record[0])))?;
        let mut nums = [0.0; 5];
        for (slot, (i, name)) in nums.iter_mut().zip(CSV_COLUMNS.iter().enumerate().skip(1)) {
            let raw = record[i].trim();
            *slot = raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| row_err(format!("`{name}` is not a number: `{raw}`")))?;
        }
        let bar = Bar {
            date,
            open: nums[0],
            high: nums[1],
            low: nums[2],
            close: nums[3],
            volume: nums[4],
        };
        bar.validate().map_err(row_err)?;
        bars.push((line, bar));
    }
    if bars.is_empty() {
        return Err(Error::Format("no data rows".into()));
    }
    bars.sort_by_key(|(_, b)| b.date);
    if let Some(w) = bars.windows(2).find(|w| w[0].1.date == w[1].1.date) {
        return Err(Error::Integrity(format!(
            "duplicate date {} on lines {} and {}",
            w[0].1.date,
            w[0].0.min(w[1].0),
            w[0].0.max(w[1].0)
        )));
    }
    PriceSeries::new(symbol, bars.into_iter().map(|(_, b)| b).collect())
}

/// Serialize to the CSV layout read by [`parse_csv`]. Numbers use the
/// shortest representation that round-trips.
pub fn to_csv(series: &PriceSeries) -> String {
    let mut out = String::with_capacity(series.len() * 64);
    out.push_str(&CSV_COLUMNS.join(","));
    out.push('\n');
    for b in &series.bars {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            b.date.format(DATE_FORMAT),
            b.open,
            b.high,
            b.low,
            b.close,
            b.volume
        ));
    }
    out
}

/// Annualized realized volatility at one bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolPoint {
    pub date: NaiveDate,
    pub vol: f64,
}

/// Sample standard deviation (n − 1) of the `window` log returns ending at
/// `end_index`, times √252.
pub fn realized_volatility(
    series: &PriceSeries,
    window: usize,
    end_index: usize,
) -> Result<VolPoint> {
    if window < 2 {
        return Err(Error::argument(
            "window",
            format!("must be >= 2, got {window}"),
        ));
    }
    if end_index >= series.len() {
        return Err(Error::argument(
            "end_index",
            format!("{end_index} is past the last bar ({})", series.len() - 1),
        ));
    }
    if end_index < window {
        return Err(Error::Range {
            required: window + 1,
            available: end_index + 1,
        });
    }
    let bars = &series.bars[end_index - window..=end_index];
    let vol = annualized_std(bars.windows(2).map(|w| (w[1].close / w[0].close).ln()));
    Ok(VolPoint {
        date: series.bars[end_index].date,
        vol,
    })
}

fn annualized_std(returns: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = returns.clone().count() as f64;
    let mean = returns.clone().sum::<f64>() / n;
    let ss: f64 = returns.map(|x| (x - mean) * (x - mean)).sum();
    (ss / (n - 1.0)).sqrt() * TRADING_DAYS_PER_YEAR.sqrt()
}

/// [`realized_volatility`] at every bar from index `window` on.
pub fn vol_series(series: &PriceSeries, window: usize) -> Result<Vec<VolPoint>> {
    if window < 2 {
        return Err(Error::argument(
            "window",
            format!("must be >= 2, got {window}"),
        ));
    }
    if series.len() < window + 1 {
        return Err(Error::Range {
            required: window + 1,
            available: series.len(),
        });
    }
    (window..series.len())
        .map(|i| realized_volatility(series, window, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = "date,open,high,low,close,volume\n";

    fn series_from_closes(closes: &[f64]) -> PriceSeries {
        let start = NaiveDate::from_ymd_opt(2013, 1, 1).unwrap();
        let bars = closes
            .iter()
            .enumerate()
            .map(|(i, &c)| Bar {
                date: start + chrono::Days::new(i as u64),
                open: c,
                high: c,
                low: c,
                close: c,
                volume: 1000.0,
            })
            .collect();
        PriceSeries::new("TEST", bars).unwrap()
    }

    #[test]
    fn parses_single_bar() {
        let s = parse_csv(
            format!("{HEADER}2013-05-01,100,101,99,100.5,1000").as_bytes(),
            "X",
        )
        .unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.bars()[0].close, 100.5);
        assert_eq!(
            s.bars()[0].date,
            NaiveDate::from_ymd_opt(2013, 5, 1).unwrap()
        );
    }

    #[test]
    fn accepts_crlf_and_sorts() {
        let text =
            "date,open,high,low,close,volume\r\n2013-05-02,1,1,1,1,0\r\n2013-05-01,2,2,2,2,0\r\n";
        let s = parse_csv(text.as_bytes(), "X").unwrap();
        assert_eq!(s.closes(), vec![2.0, 1.0]);
    }

    #[test]
    fn missing_column_is_named() {
        let err = parse_csv(
            "date,open,high,low,volume\n2013-05-01,1,1,1,0".as_bytes(),
            "X",
        )
        .unwrap_err();
        assert!(
            matches!(&err, Error::Format(m) if m.contains("`close`")),
            "{err}"
        );
    }

    #[test]
    fn reordered_header_rejected() {
        let err = parse_csv("date,high,open,low,close,volume\n".as_bytes(), "X").unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn duplicate_dates_rejected() {
        let text = format!("{HEADER}2013-05-01,1,1,1,1,0\n2013-05-01,2,2,2,2,0\n");
        assert!(matches!(
            parse_csv(text.as_bytes(), "X"),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn row_errors_carry_line_numbers() {
        let text = format!("{HEADER}2013-05-01,1,1,1,1,0\n2013-05-02,1,1,1,abc,0\n");
        assert!(matches!(
            parse_csv(text.as_bytes(), "X"),
            Err(Error::Row { line: 3, .. })
        ));
        let text = format!("{HEADER}2013-05-01,1,1,1,-1,0\n");
        assert!(matches!(
            parse_csv(text.as_bytes(), "X"),
            Err(Error::Row { line: 2, .. })
        ));
        let text = format!("{HEADER}2013-13-01,1,1,1,1,0\n");
        assert!(matches!(
            parse_csv(text.as_bytes(), "X"),
            Err(Error::Row { line: 2, .. })
        ));
        let text = format!("{HEADER}2013-05-01,1,1,1\n");
        assert!(matches!(
            parse_csv(text.as_bytes(), "X"),
            Err(Error::Row { line: 2, .. })
        ));
    }

    #[test]
    fn inconsistent_high_low_rejected() {
        let text = format!("{HEADER}2013-05-01,100,99,98,100,0\n");
        assert!(matches!(
            parse_csv(text.as_bytes(), "X"),
            Err(Error::Row { .. })
        ));
    }

    #[test]
    fn header_only_is_an_error() {
        assert!(parse_csv(HEADER.as_bytes(), "X").is_err());
    }

    #[test]
    fn constant_closes_have_zero_vol() {
        let s = series_from_closes(&[100.0; 30]);
        assert_eq!(realized_volatility(&s, 10, 29).unwrap().vol, 0.0);
        assert!(vol_series(&s, 20).unwrap().iter().all(|p| p.vol == 0.0));
    }

    #[test]
    fn alternating_returns_hand_computed() {
        let up = 100.0 * 0.01f64.exp();
        let s = series_from_closes(&[100.0, up, 100.0, up, 100.0]);
        let v = realized_volatility(&s, 4, 4).unwrap().vol;
        let want = (4e-4f64 / 3.0).sqrt() * 252f64.sqrt();
        assert!((v - want).abs() < 1e-12, "{v} vs {want}");
        assert!((v - 0.18331).abs() < 1e-5);
    }

    #[test]
    fn insufficient_history() {
        let s = series_from_closes(&[100.0; 10]);
        assert!(matches!(
            realized_volatility(&s, 20, 9),
            Err(Error::Range {
                required: 21,
                available: 10
            })
        ));
        assert!(matches!(vol_series(&s, 20), Err(Error::Range { .. })));
        assert!(realized_volatility(&s, 1, 9).is_err());
    }

    #[test]
    fn vol_series_count_and_pointwise_agreement() {
        let closes: Vec<f64> = (0..25).map(|i| 100.0 + (i as f64 * 0.7).sin()).collect();
        let s = series_from_closes(&closes);
        let vs = vol_series(&s, 20).unwrap();
        assert_eq!(vs.len(), 5);
        for (k, p) in vs.iter().enumerate() {
            assert_eq!(*p, realized_volatility(&s, 20, 20 + k).unwrap());
        }
    }

    fn arb_series() -> impl Strategy<Value = PriceSeries> {
        prop::collection::vec(-0.05..0.05f64, 3..60).prop_map(|rets| {
            let mut c = 50.0;
            let mut closes = vec![c];
            for r in rets {
                c *= f64::exp(r);
                closes.push(c);
            }
            series_from_closes(&closes)
        })
    }

    proptest! {
        #[test]
        fn csv_round_trip(s in arb_series()) {
            let back = parse_csv(to_csv(&s).as_bytes(), "TEST").unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn vol_scale_invariant(s in arb_series(), c in 1e-3..1e3f64) {
            let scaled = s.scaled(c).unwrap();
            let w = 2.max(s.len() / 3).min(s.len() - 1);
            for (a, b) in vol_series(&s, w).unwrap().iter().zip(vol_series(&scaled, w).unwrap()) {
                prop_assert!((a.vol - b.vol).abs() <= 1e-12 * a.vol.max(1.0));
            }
        }

        #[test]
        fn vol_ignores_older_history(s in arb_series(), extra in 1usize..10) {
            prop_assume!(s.len() >= 4);
            let w = s.len() - 2;
            let end = s.len() - 1;
            let before = realized_volatility(&s, w, end).unwrap().vol;
            let first = s.bars()[0];
            let mut bars: Vec<Bar> = (1..=extra as u64)
                .rev()
                .map(|d| Bar { date: first.date - chrono::Days::new(d), ..first })
                .collect();
            bars.extend_from_slice(s.bars());
            let longer = PriceSeries::new("TEST", bars).unwrap();
            let after = realized_volatility(&longer, w, end + extra).unwrap().vol;
            prop_assert_eq!(before, after);
        }
    }
}
