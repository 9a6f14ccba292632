//! Half-open calendar intervals with an open-ended `ongoing` end.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntervalError {
    #[error("interval start {start} is not before end {end}")]
    Empty { start: NaiveDate, end: End },
    #[error("cannot parse interval bound `{0}`")]
    Bound(String),
    #[error("cannot parse interval `{0}`, expected START..END")]
    Syntax(String),
}

/// End of an interval. `Ongoing` orders after every concrete date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum End {
    Date(NaiveDate),
    Ongoing,
}

impl End {
    fn after(self, date: NaiveDate) -> bool {
        match self {
            End::Date(end) => date < end,
            End::Ongoing => true,
        }
    }
}

impl fmt::Display for End {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            End::Date(d) => write!(f, "{d}"),
            End::Ongoing => f.write_str("ongoing"),
        }
    }
}

impl FromStr for End {
    type Err = IntervalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("ongoing") {
            Ok(End::Ongoing)
        } else {
            parse_date(s).map(End::Date)
        }
    }
}

impl Serialize for End {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for End {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

fn parse_date(s: &str) -> Result<NaiveDate, IntervalError> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|_| IntervalError::Bound(s.to_owned()))
}

/// `[start, end)`; always non-empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawInterval")]
pub struct Interval {
    start: NaiveDate,
    end: End,
}

#[derive(Deserialize)]
struct RawInterval {
    start: NaiveDate,
    end: End,
}

impl TryFrom<RawInterval> for Interval {
    type Error = IntervalError;

    fn try_from(raw: RawInterval) -> Result<Self, Self::Error> {
        Interval::new(raw.start, raw.end)
    }
}

impl Interval {
    pub fn new(start: NaiveDate, end: End) -> Result<Self, IntervalError> {
        if end.after(start) {
            Ok(Self { start, end })
        } else {
            Err(IntervalError::Empty { start, end })
        }
    }

    pub fn ongoing_from(start: NaiveDate) -> Self {
        Self { start, end: End::Ongoing }
    }

    /// Calendar years `[first, last_exclusive)`.
    pub fn years(first: i32, last_exclusive: i32) -> Result<Self, IntervalError> {
        Self::new(jan1(first)?, End::Date(jan1(last_exclusive)?))
    }

    pub fn year(year: i32) -> Result<Self, IntervalError> {
        Self::years(year, year + 1)
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> End {
        self.end
    }

    pub fn contains_date(&self, date: NaiveDate) -> bool {
        self.start <= date && self.end.after(date)
    }

    pub fn contains(&self, other: &Interval) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        Interval::new(start, end).ok()
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.intersect(other).is_some()
    }

    /// Rendering used in derived-entry titles.
    pub fn title_fragment(&self) -> String {
        let start_jan1 = self.start.ordinal() == 1;
        match self.end {
            End::Ongoing if start_jan1 => format!("post-{}", self.start.year()),
            End::Ongoing => format!("from {}", self.start),
            End::Date(end) if start_jan1 && end.ordinal() == 1 => {
                let last = end.year() - 1;
                if last == self.start.year() {
                    format!("in {last}")
                } else {
                    format!("{}-{last}", self.start.year())
                }
            }
            End::Date(end) => format!("from {} until {end}", self.start),
        }
    }
}

pub(crate) fn jan1(year: i32) -> Result<NaiveDate, IntervalError> {
    NaiveDate::from_ymd_opt(year, 1, 1).ok_or_else(|| IntervalError::Bound(year.to_string()))
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// Parses `START..END` where END may be `ongoing`.
impl FromStr for Interval {
    type Err = IntervalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (start, end) = s.split_once("..").ok_or_else(|| IntervalError::Syntax(s.to_owned()))?;
        Interval::new(parse_date(start)?, end.trim().parse()?)
    }
}
