//! Derived quantities: body mass index and age at a date.

use std::fmt;

use chrono::{Months, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum MeasureError {
    #[error("weight and height must be positive (got {weight_kg} kg, {height_cm} cm)")]
    NonPositiveInput { weight_kg: f64, height_cm: f64 },
    #[error("date {as_of} is before date of birth {dob}")]
    NegativeAge { dob: NaiveDate, as_of: NaiveDate },
}

impl MeasureError {
    pub fn code(&self) -> &'static str {
        match self {
            MeasureError::NonPositiveInput { .. } => "NonPositiveInput",
            MeasureError::NegativeAge { .. } => "NegativeAge",
        }
    }
}

/// Body mass index in kg/m². Full precision is kept; [`Bmi::rounded`] and
/// `Display` give the two-decimal clinical form.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bmi(f64);

impl Bmi {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Half-up to two decimals.
    pub fn rounded(self) -> f64 {
        // f64::round is half away from zero, which is half-up for positive values.
        (self.0 * 100.0).round() / 100.0
    }
}

impl fmt::Display for Bmi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}", self.rounded())
    }
}

pub fn compute_bmi(weight_kg: f64, height_cm: f64) -> Result<Bmi, MeasureError> {
    if !(weight_kg > 0.0 && height_cm > 0.0) || !weight_kg.is_finite() || !height_cm.is_finite() {
        return Err(MeasureError::NonPositiveInput { weight_kg, height_cm });
    }
    let height_m = height_cm / 100.0;
    Ok(Bmi(weight_kg / (height_m * height_m)))
}

/// Age in completed units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Age {
    pub days: i64,
    pub weeks: i64,
    pub months: u32,
    pub years: u32,
}

/// Age of someone born on `dob` as of `as_of`.
///
/// A month is completed on the same day-of-month as the birth date; when the
/// target month is shorter, its last day completes it (born Jan 31, one month
/// old on Feb 28/29). Years are twelve completed months.
pub fn age_at(dob: NaiveDate, as_of: NaiveDate) -> Result<Age, MeasureError> {
    if as_of < dob {
        return Err(MeasureError::NegativeAge { dob, as_of });
    }
    let days = (as_of - dob).num_days();
    let months = completed_months(dob, as_of);
    Ok(Age { days, weeks: days / 7, months, years: months / 12 })
}

fn completed_months(dob: NaiveDate, as_of: NaiveDate) -> u32 {
    use chrono::Datelike;
    let span = (as_of.year() - dob.year()) * 12 + as_of.month() as i32 - dob.month() as i32;
    let mut months = span.max(0) as u32;
    // checked_add_months clamps to the last day of shorter months.
    while months > 0 && dob.checked_add_months(Months::new(months)).is_none_or(|d| d > as_of) {
        months -= 1;
    }
    months
}
