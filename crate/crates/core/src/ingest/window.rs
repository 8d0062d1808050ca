use chrono::{DateTime, Datelike, NaiveDate, TimeZone, Timelike, Utc};
use serde::{Deserialize, Serialize};

use super::IngestError;

/// Half-open analysis window `[start, end)` split into calendar quarters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawWindow", into = "RawWindow")]
pub struct TimeWindow {
    start: DateTime<Utc>,
    end: DateTime<Utc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWindow {
    start: NaiveDate,
    end: NaiveDate,
}

impl TryFrom<RawWindow> for TimeWindow {
    type Error = IngestError;

    fn try_from(raw: RawWindow) -> Result<Self, Self::Error> {
        TimeWindow::from_dates(raw.start, raw.end)
    }
}

impl From<TimeWindow> for RawWindow {
    fn from(w: TimeWindow) -> Self {
        RawWindow {
            start: w.start.date_naive(),
            end: w.end.date_naive(),
        }
    }
}

fn quarter_index(ts: &DateTime<Utc>) -> i64 {
    i64::from(ts.year()) * 4 + i64::from(ts.month0() / 3)
}

fn is_quarter_boundary(ts: &DateTime<Utc>) -> bool {
    ts.day() == 1
        && ts.month0().is_multiple_of(3)
        && ts.hour() == 0
        && ts.minute() == 0
        && ts.second() == 0
        && ts.nanosecond() == 0
}

impl TimeWindow {
    pub fn new(start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Self, IngestError> {
        if start >= end {
            return Err(IngestError::InvalidWindow(format!(
                "start {start} is not before end {end}"
            )));
        }
        for ts in [&start, &end] {
            if !is_quarter_boundary(ts) {
                return Err(IngestError::InvalidWindow(format!(
                    "{ts} is not a calendar quarter boundary"
                )));
            }
        }
        Ok(Self { start, end })
    }

    pub fn from_dates(start: NaiveDate, end: NaiveDate) -> Result<Self, IngestError> {
        let at_midnight = |d: NaiveDate| Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0).unwrap());
        Self::new(at_midnight(start), at_midnight(end))
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.end
    }

    /// Number of whole quarters, T.
    pub fn periods(&self) -> usize {
        (quarter_index(&self.end) - quarter_index(&self.start)) as usize
    }

    pub fn contains(&self, ts: DateTime<Utc>) -> bool {
        self.start <= ts && ts < self.end
    }

    /// 1-based quarter ordinal of `ts` relative to the window start.
    pub fn assign_quarter(&self, ts: DateTime<Utc>) -> Result<u32, IngestError> {
        if !self.contains(ts) {
            return Err(IngestError::OutOfWindow(ts));
        }
        Ok((quarter_index(&ts) - quarter_index(&self.start) + 1) as u32)
    }

    /// First instant of 1-based `period`.
    pub fn period_start(&self, period: u32) -> DateTime<Utc> {
        let q = quarter_index(&self.start) + i64::from(period) - 1;
        let year = (q / 4) as i32;
        let month = (q % 4) as u32 * 3 + 1;
        Utc.with_ymd_and_hms(year, month, 1, 0, 0, 0).unwrap()
    }
}

impl Default for TimeWindow {
    /// January 2015 through December 2017: twelve quarters.
    fn default() -> Self {
        Self {
            start: Utc.with_ymd_and_hms(2015, 1, 1, 0, 0, 0).unwrap(),
            end: Utc.with_ymd_and_hms(2018, 1, 1, 0, 0, 0).unwrap(),
        }
    }
}
