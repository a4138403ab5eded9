//! Daily closing prices read from CSV.
//!
//! Accepted layout: `date,close` with an optional header row and ISO dates.
//! Extra columns are ignored; the first column must be the date and the
//! close is taken from a column named `close`/`adj close` when a header is
//! present, else from the second column.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Trading days per year used to turn daily observations into a time step.
pub const TRADING_DAYS: f64 = 252.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MarketSeries<T: Real> {
    pub symbol: String,
    pub dates: Vec<NaiveDate>,
    pub closes: Vec<T>,
    pub dt: T,
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%Y/%m/%d"))
        .or_else(|_| NaiveDate::parse_from_str(s, "%Y%m%d"))
        .ok()
}

impl<T: Real> MarketSeries<T> {
    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }

    pub fn load_csv(path: impl AsRef<Path>, symbol: &str) -> Result<Self> {
        let path = path.as_ref();
        let mut text = String::new();
        File::open(path)?.read_to_string(&mut text)?;
        Self::parse(&text, symbol, path)
    }

    /// Parses CSV text. `path` is only used in error messages.
    pub fn parse(text: &str, symbol: &str, path: &Path) -> Result<Self> {
        let err = |line: u64, message: String| Error::Parse {
            path: PathBuf::from(path),
            line,
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());

        let mut dates = Vec::new();
        let mut closes = Vec::new();
        let mut close_col = 1usize;
        let mut first = true;
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            if record.iter().all(|f| f.is_empty()) {
                continue;
            }
            let is_first = std::mem::take(&mut first);
            let date_field = record.get(0).unwrap_or("");
            let Some(date) = parse_date(date_field) else {
                if is_first {
                    // header row
                    if let Some(i) = record.iter().position(|h| {
                        let h = h.to_ascii_lowercase();
                        h == "close" || h == "adj close" || h == "adj_close" || h == "price"
                    }) {
                        close_col = i;
                    }
                    continue;
                }
                return Err(err(line, format!("unparseable date `{date_field}`")));
            };
            let field = record
                .get(close_col)
                .ok_or_else(|| err(line, format!("missing close column {}", close_col + 1)))?;
            let close: f64 = field
                .parse()
                .map_err(|_| err(line, format!("unparseable close `{field}`")))?;
            if !(close > 0.0) || !close.is_finite() {
                return Err(err(
                    line,
                    format!("close must be positive and finite, got {close}"),
                ));
            }
            if let Some(&prev) = dates.last() {
                if date == prev {
                    return Err(err(line, format!("duplicate date {date}")));
                }
                if date < prev {
                    return Err(err(line, format!("date {date} precedes {prev}")));
                }
            }
            dates.push(date);
            closes.push(T::of(close));
        }
        if closes.is_empty() {
            return Err(Error::EmptyFile {
                path: PathBuf::from(path),
            });
        }
        Ok(MarketSeries {
            symbol: symbol.to_string(),
            dates,
            closes,
            dt: T::of(1.0 / TRADING_DAYS),
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "close"])?;
        for (d, c) in self.dates.iter().zip(&self.closes) {
            w.write_record([
                d.format("%Y-%m-%d").to_string(),
                format!("{}", c.to_f64_lossy()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Same series divided by its first close.
    pub fn rescale_to_unit(&self) -> Self {
        let first = self.closes[0];
        MarketSeries {
            closes: self.closes.iter().map(|&c| c / first).collect(),
            ..self.clone()
        }
    }

    /// Observation span in years on the trading-day clock.
    pub fn horizon(&self) -> T {
        T::from_usize(self.len().saturating_sub(1)).unwrap() * self.dt
    }
}

/// Restricts several series to their common dates, in order.
pub fn align<T: Real>(series: &[MarketSeries<T>]) -> Result<Vec<MarketSeries<T>>> {
    let Some(first) = series.first() else {
        return Ok(Vec::new());
    };
    let common: Vec<NaiveDate> = first
        .dates
        .iter()
        .copied()
        .filter(|d| series[1..].iter().all(|s| s.dates.binary_search(d).is_ok()))
        .collect();
    if common.is_empty() {
        return Err(Error::Misaligned("series share no dates".into()));
    }
    Ok(series
        .iter()
        .map(|s| MarketSeries {
            symbol: s.symbol.clone(),
            closes: common
                .iter()
                .map(|d| s.closes[s.dates.binary_search(d).unwrap()])
                .collect(),
            dates: common.clone(),
            dt: s.dt,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<MarketSeries<f64>> {
        MarketSeries::parse(text, "X", Path::new("x.csv"))
    }

    #[test]
    fn header_is_optional() {
        let a = parse("Date,Open,Close\n2020-01-02,1,10\n2020-01-03,1,11\n").unwrap();
        assert_eq!(a.closes, vec![10.0, 11.0]);
        let b = parse("2020-01-02,10\n2020-01-03,11\n").unwrap();
        assert_eq!(b.closes, a.closes);
        assert_eq!(b.dates, a.dates);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse("date,close\n2020-01-02,10\n2020-01-03,-1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse("2020-01-03,10\n2020-01-02,11\n") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("precedes"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse("2020-01-02,10\n2020-01-02,11\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse("2020-01-02,abc\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn empty_input() {
        assert!(matches!(parse(""), Err(Error::EmptyFile { .. })));
        assert!(matches!(
            parse("date,close\n"),
            Err(Error::EmptyFile { .. })
        ));
    }

    #[test]
    fn rescale_and_align() {
        let a = parse("2020-01-02,10\n2020-01-03,20\n2020-01-06,30\n").unwrap();
        let b = parse("2020-01-03,5\n2020-01-06,6\n").unwrap();
        assert_eq!(a.rescale_to_unit().closes, vec![1.0, 2.0, 3.0]);
        let al = align(&[a, b]).unwrap();
        assert_eq!(al[0].closes, vec![20.0, 30.0]);
        assert_eq!(al[1].closes, vec![5.0, 6.0]);
    }
}
