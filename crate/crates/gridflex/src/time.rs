//! Calendar indexing for hourly load series.
//!
//! A [`TimeIndex`] fixes the horizon of a simulation: a contiguous run of
//! whole days, each split into equal hours, with days grouped into calendar
//! months. Tariffs use it to look up peak windows, weekends, holidays and
//! monthly billing periods.

use std::collections::BTreeSet;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Weekday};

use crate::error::{Error, Result};

/// One calendar month (or month-like block) of the horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonthSpan {
    pub year: i32,
    /// Calendar month number 1..=12 (for uniform toy indexes this is 1).
    pub month: u32,
    /// First day index of the span.
    pub first_day: usize,
    pub day_count: usize,
}

/// Immutable hourly calendar over `day_count` contiguous days.
///
/// Days partition hours contiguously and months partition days contiguously;
/// `hour_count == day_count * hours_per_day` always holds.
#[derive(Debug, Clone)]
pub struct TimeIndex {
    start_date: NaiveDate,
    hours_per_day: usize,
    day_of_hour: Vec<u32>,
    month_of_hour: Vec<u32>,
    weekday_of_day: Vec<Weekday>,
    holiday_days: BTreeSet<usize>,
    months: Vec<MonthSpan>,
}

impl TimeIndex {
    /// Builds a Gregorian-calendar index with 24-hour days starting at
    /// midnight of `start_date`. Holidays outside the horizon are ignored.
    pub fn calendar(
        start_date: NaiveDate,
        day_count: usize,
        holidays: &BTreeSet<NaiveDate>,
    ) -> Result<Self> {
        if day_count == 0 {
            return Err(Error::InvalidInput("day_count must be at least 1".into()));
        }
        let mut weekday_of_day = Vec::with_capacity(day_count);
        let mut months: Vec<MonthSpan> = Vec::new();
        let mut holiday_days = BTreeSet::new();
        for d in 0..day_count {
            let date = start_date
                .checked_add_signed(Duration::days(d as i64))
                .ok_or_else(|| Error::InvalidInput(format!("date overflow at day {d}")))?;
            weekday_of_day.push(date.weekday());
            if holidays.contains(&date) {
                holiday_days.insert(d);
            }
            match months.last_mut() {
                Some(span) if span.year == date.year() && span.month == date.month() => {
                    span.day_count += 1;
                }
                _ => months.push(MonthSpan {
                    year: date.year(),
                    month: date.month(),
                    first_day: d,
                    day_count: 1,
                }),
            }
        }
        Ok(Self::assemble(
            start_date,
            24,
            weekday_of_day,
            holiday_days,
            months,
        ))
    }

    /// Builds a synthetic index with `hours_per_day` hours per day, weekdays
    /// cycling from Monday, a single month block and no holidays. Intended
    /// for small test fixtures where real dates do not matter.
    pub fn uniform(day_count: usize, hours_per_day: usize) -> Result<Self> {
        if day_count == 0 || hours_per_day == 0 {
            return Err(Error::InvalidInput(
                "day_count and hours_per_day must be at least 1".into(),
            ));
        }
        // 2001-01-01 is a Monday.
        let start = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
        let weekday_of_day = (0..day_count)
            .map(|d| {
                start
                    .checked_add_signed(Duration::days(d as i64))
                    .unwrap()
                    .weekday()
            })
            .collect();
        let months = vec![MonthSpan {
            year: 2001,
            month: 1,
            first_day: 0,
            day_count,
        }];
        Ok(Self::assemble(
            start,
            hours_per_day,
            weekday_of_day,
            BTreeSet::new(),
            months,
        ))
    }

    fn assemble(
        start_date: NaiveDate,
        hours_per_day: usize,
        weekday_of_day: Vec<Weekday>,
        holiday_days: BTreeSet<usize>,
        months: Vec<MonthSpan>,
    ) -> Self {
        let day_count = weekday_of_day.len();
        let mut day_of_hour = Vec::with_capacity(day_count * hours_per_day);
        for d in 0..day_count {
            day_of_hour.extend(std::iter::repeat_n(d as u32, hours_per_day));
        }
        let mut month_of_hour = Vec::with_capacity(day_count * hours_per_day);
        for (m, span) in months.iter().enumerate() {
            month_of_hour.extend(std::iter::repeat_n(
                m as u32,
                span.day_count * hours_per_day,
            ));
        }
        Self {
            start_date,
            hours_per_day,
            day_of_hour,
            month_of_hour,
            weekday_of_day,
            holiday_days,
            months,
        }
    }

    /// Replaces the holiday set with the given dates (those inside the horizon).
    pub fn with_holidays(mut self, holidays: &BTreeSet<NaiveDate>) -> Self {
        self.holiday_days = (0..self.day_count())
            .filter(|&d| holidays.contains(&self.date_of_day(d)))
            .collect();
        self
    }

    pub fn hour_count(&self) -> usize {
        self.day_of_hour.len()
    }

    pub fn day_count(&self) -> usize {
        self.weekday_of_day.len()
    }

    pub fn month_count(&self) -> usize {
        self.months.len()
    }

    pub fn hours_per_day(&self) -> usize {
        self.hours_per_day
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    pub fn day_of_hour(&self, hour: usize) -> usize {
        self.day_of_hour[hour] as usize
    }

    pub fn month_of_hour(&self, hour: usize) -> usize {
        self.month_of_hour[hour] as usize
    }

    /// Hour-of-day in 0..hours_per_day.
    pub fn hour_of_day(&self, hour: usize) -> usize {
        hour % self.hours_per_day
    }

    pub fn hours_of_day(&self, day: usize) -> std::ops::Range<usize> {
        let start = day * self.hours_per_day;
        start..start + self.hours_per_day
    }

    pub fn hours_of_month(&self, month: usize) -> std::ops::Range<usize> {
        let span = &self.months[month];
        let start = span.first_day * self.hours_per_day;
        start..start + span.day_count * self.hours_per_day
    }

    pub fn days_of_month(&self, month: usize) -> std::ops::Range<usize> {
        let span = &self.months[month];
        span.first_day..span.first_day + span.day_count
    }

    pub fn months(&self) -> &[MonthSpan] {
        &self.months
    }

    pub fn weekday_of_day(&self, day: usize) -> Weekday {
        self.weekday_of_day[day]
    }

    pub fn is_weekend(&self, day: usize) -> bool {
        matches!(self.weekday_of_day[day], Weekday::Sat | Weekday::Sun)
    }

    pub fn is_holiday(&self, day: usize) -> bool {
        self.holiday_days.contains(&day)
    }

    pub fn holiday_days(&self) -> &BTreeSet<usize> {
        &self.holiday_days
    }

    pub fn date_of_day(&self, day: usize) -> NaiveDate {
        self.start_date + Duration::days(day as i64)
    }

    /// Timestamp of the start of the given hour (hours counted from the
    /// start of the horizon; for uniform indexes this is a nominal clock).
    pub fn timestamp(&self, hour: usize) -> NaiveDateTime {
        let day = self.day_of_hour(hour);
        self.date_of_day(day)
            .and_hms_opt(self.hour_of_day(hour) as u32, 0, 0)
            .unwrap()
    }

    /// True when `other` describes the same horizon layout.
    pub fn same_shape(&self, other: &TimeIndex) -> bool {
        self.hour_count() == other.hour_count() && self.hours_per_day == other.hours_per_day
    }
}
