//! National immunization schedule and dose-completeness evaluation.
//!
//! A schedule lists vaccines with their dose count and the recommended age
//! for each dose. Evaluating a student's dose history marks every scheduled
//! dose as given, pending (not yet due once the grace period is added) or
//! overdue. Dose timing is not checked: any recorded dose counts as given.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Duration, Months, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::MeasureError;

pub const DEFAULT_SCHEDULE: &str = include_str!("../data/schedule.toml");

/// Recommended age for a dose, measured from the date of birth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgeOffset {
    Weeks(u32),
    Months(u32),
}

impl AgeOffset {
    pub const AT_BIRTH: AgeOffset = AgeOffset::Weeks(0);

    /// The date this offset falls on for someone born on `dob`. Month
    /// offsets land on the last day of the month when the day is missing.
    pub fn due_date(self, dob: NaiveDate) -> NaiveDate {
        match self {
            AgeOffset::Weeks(w) => dob + Duration::weeks(i64::from(w)),
            AgeOffset::Months(m) => dob.checked_add_months(Months::new(m)).unwrap_or(NaiveDate::MAX),
        }
    }
}

impl fmt::Display for AgeOffset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgeOffset::Weeks(n) => write!(f, "{n}w"),
            AgeOffset::Months(n) => write!(f, "{n}m"),
        }
    }
}

impl FromStr for AgeOffset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("birth") || s.eq_ignore_ascii_case("at birth") {
            return Ok(AgeOffset::AT_BIRTH);
        }
        let (num, unit) = s.split_at(s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len()));
        let n: u32 = num.parse().map_err(|_| format!("bad age offset {s:?}"))?;
        match unit {
            "w" => Ok(AgeOffset::Weeks(n)),
            "m" => Ok(AgeOffset::Months(n)),
            _ => Err(format!("bad age offset {s:?}; expected <n>w or <n>m")),
        }
    }
}

impl Serialize for AgeOffset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AgeOffset {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaccineSpec {
    pub code: String,
    #[serde(default)]
    pub name: Option<String>,
    pub diseases: Vec<String>,
    pub dose_count: u32,
    pub recommended_ages: Vec<AgeOffset>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImmunizationSchedule {
    pub version: u32,
    pub vaccines: Vec<VaccineSpec>,
    pub grace_period: Duration,
}

/// An administered dose.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DoseEvent {
    pub vaccine_code: String,
    pub dose_number: u32,
    pub given_on: NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DoseState {
    Given,
    Pending,
    Overdue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Overall {
    Complete,
    Incomplete,
    PendingOnly,
}

impl fmt::Display for Overall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Overall::Complete => "Complete",
            Overall::Incomplete => "Incomplete",
            Overall::PendingOnly => "PendingOnly",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoseStatus {
    pub vaccine_code: String,
    pub dose_number: u32,
    pub due_on: NaiveDate,
    pub state: DoseState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImmunizationStatus {
    pub overall: Overall,
    /// In schedule order: vaccines as listed, doses ascending.
    pub per_dose: Vec<DoseStatus>,
}

impl ImmunizationStatus {
    pub fn count(&self, state: DoseState) -> usize {
        self.per_dose.iter().filter(|d| d.state == state).count()
    }

    pub fn state_of(&self, code: &str, dose: u32) -> Option<DoseState> {
        self.per_dose.iter().find(|d| d.vaccine_code == code && d.dose_number == dose).map(|d| d.state)
    }
}

#[derive(Debug, Error)]
pub enum ImmunizationError {
    #[error("malformed schedule: {0}")]
    MalformedSchedule(String),
    #[error("vaccine {code}: dose_count {dose_count} but {ages} recommended ages")]
    DoseAgeArityMismatch { code: String, dose_count: u32, ages: usize },
    #[error("unknown vaccine code {0:?}")]
    UnknownVaccineCode(String),
    #[error("dose {dose_number} of {vaccine_code} recorded twice")]
    DuplicateDose { vaccine_code: String, dose_number: u32 },
    #[error("{vaccine_code} has {dose_count} doses; dose {dose_number} is invalid")]
    InvalidDoseNumber { vaccine_code: String, dose_number: u32, dose_count: u32 },
    #[error("dose {dose_number} of {vaccine_code} given on {given_on}, before birth")]
    DoseBeforeBirth { vaccine_code: String, dose_number: u32, given_on: NaiveDate },
    #[error(transparent)]
    Age(#[from] MeasureError),
    #[error("reading schedule: {0}")]
    Io(#[from] std::io::Error),
}

impl ImmunizationError {
    pub fn code(&self) -> &'static str {
        match self {
            ImmunizationError::MalformedSchedule(_) => "MalformedSchedule",
            ImmunizationError::DoseAgeArityMismatch { .. } => "DoseAgeArityMismatch",
            ImmunizationError::UnknownVaccineCode(_) => "UnknownVaccineCode",
            ImmunizationError::DuplicateDose { .. } => "DuplicateDose",
            ImmunizationError::InvalidDoseNumber { .. } => "InvalidDoseNumber",
            ImmunizationError::DoseBeforeBirth { .. } => "DoseBeforeBirth",
            ImmunizationError::Age(e) => e.code(),
            ImmunizationError::Io(_) => "ScheduleUnreadable",
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    schedule_version: u32,
    grace_period_days: i64,
    #[serde(rename = "vaccine", default)]
    vaccines: Vec<VaccineSpec>,
}

impl ImmunizationSchedule {
    pub fn from_toml(source: &str) -> Result<Self, ImmunizationError> {
        let file: ScheduleFile =
            toml::from_str(source).map_err(|e| ImmunizationError::MalformedSchedule(e.to_string()))?;
        if file.grace_period_days < 0 {
            return Err(ImmunizationError::MalformedSchedule("negative grace period".into()));
        }
        Self::new(file.vaccines, Duration::days(file.grace_period_days)).map(|mut s| {
            s.version = file.schedule_version;
            s
        })
    }

    /// Builds a schedule, checking every vaccine's invariants.
    pub fn new(vaccines: Vec<VaccineSpec>, grace_period: Duration) -> Result<Self, ImmunizationError> {
        let mut seen = HashSet::new();
        // Weeks and months only compare through a date; any fixed reference works.
        let reference = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        for v in &vaccines {
            if v.code.trim().is_empty() {
                return Err(ImmunizationError::MalformedSchedule("empty vaccine code".into()));
            }
            if !seen.insert(v.code.as_str()) {
                return Err(ImmunizationError::MalformedSchedule(format!("vaccine {} listed twice", v.code)));
            }
            if v.dose_count == 0 {
                return Err(ImmunizationError::MalformedSchedule(format!("vaccine {} has no doses", v.code)));
            }
            if v.recommended_ages.len() != v.dose_count as usize {
                return Err(ImmunizationError::DoseAgeArityMismatch {
                    code: v.code.clone(),
                    dose_count: v.dose_count,
                    ages: v.recommended_ages.len(),
                });
            }
            if v.recommended_ages.windows(2).any(|w| w[0].due_date(reference) > w[1].due_date(reference)) {
                return Err(ImmunizationError::MalformedSchedule(format!(
                    "vaccine {}: recommended ages decrease",
                    v.code
                )));
            }
        }
        Ok(ImmunizationSchedule { version: 1, vaccines, grace_period })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ImmunizationError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn shipped() -> Self {
        Self::from_toml(DEFAULT_SCHEDULE).expect("shipped schedule is valid")
    }

    pub fn with_grace_period(mut self, grace: Duration) -> Self {
        self.grace_period = grace;
        self
    }

    pub fn vaccine(&self, code: &str) -> Option<&VaccineSpec> {
        self.vaccines.iter().find(|v| v.code == code)
    }

    pub fn total_doses(&self) -> usize {
        self.vaccines.iter().map(|v| v.dose_count as usize).sum()
    }

    /// Checks a single dose against the schedule.
    pub fn check_dose(&self, dob: NaiveDate, dose: &DoseEvent) -> Result<(), ImmunizationError> {
        let spec = self
            .vaccine(&dose.vaccine_code)
            .ok_or_else(|| ImmunizationError::UnknownVaccineCode(dose.vaccine_code.clone()))?;
        if dose.dose_number == 0 || dose.dose_number > spec.dose_count {
            return Err(ImmunizationError::InvalidDoseNumber {
                vaccine_code: dose.vaccine_code.clone(),
                dose_number: dose.dose_number,
                dose_count: spec.dose_count,
            });
        }
        if dose.given_on < dob {
            return Err(ImmunizationError::DoseBeforeBirth {
                vaccine_code: dose.vaccine_code.clone(),
                dose_number: dose.dose_number,
                given_on: dose.given_on,
            });
        }
        Ok(())
    }
}

/// Evaluates `doses` for a student born on `dob` as of `as_of`.
pub fn evaluate_immunization(
    dob: NaiveDate,
    doses: &[DoseEvent],
    schedule: &ImmunizationSchedule,
    as_of: NaiveDate,
) -> Result<ImmunizationStatus, ImmunizationError> {
    if as_of < dob {
        return Err(MeasureError::NegativeAge { dob, as_of }.into());
    }
    let mut given = HashSet::with_capacity(doses.len());
    for dose in doses {
        schedule.check_dose(dob, dose)?;
        if !given.insert((dose.vaccine_code.as_str(), dose.dose_number)) {
            return Err(ImmunizationError::DuplicateDose {
                vaccine_code: dose.vaccine_code.clone(),
                dose_number: dose.dose_number,
            });
        }
    }

    let mut per_dose = Vec::with_capacity(schedule.total_doses());
    for vaccine in &schedule.vaccines {
        for (i, age) in vaccine.recommended_ages.iter().enumerate() {
            let dose_number = i as u32 + 1;
            let due_on = age.due_date(dob);
            let state = if given.contains(&(vaccine.code.as_str(), dose_number)) {
                DoseState::Given
            } else if due_on + schedule.grace_period > as_of {
                DoseState::Pending
            } else {
                DoseState::Overdue
            };
            per_dose.push(DoseStatus { vaccine_code: vaccine.code.clone(), dose_number, due_on, state });
        }
    }

    let overall = if per_dose.iter().all(|d| d.state == DoseState::Given) {
        Overall::Complete
    } else if per_dose.iter().any(|d| d.state == DoseState::Overdue) {
        Overall::Incomplete
    } else {
        Overall::PendingOnly
    };
    Ok(ImmunizationStatus { overall, per_dose })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn dose(code: &str, n: u32, on: &str) -> DoseEvent {
        DoseEvent { vaccine_code: code.into(), dose_number: n, given_on: d(on) }
    }

    pub(crate) fn full_record() -> Vec<DoseEvent> {
        let mut v = vec![dose("BCG", 1, "2016-01-02")];
        for code in ["Pentavalent", "PCV", "OPV"] {
            for n in 1..=3 {
                v.push(dose(code, n, "2016-04-01"));
            }
        }
        v.push(dose("IPV", 1, "2016-03-01"));
        v.push(dose("IPV", 2, "2016-05-01"));
        v.push(dose("MR-1", 1, "2016-10-01"));
        v.push(dose("MR-2", 1, "2017-04-01"));
        v
    }

    #[test]
    fn shipped_schedule_reproduces_table() {
        let s = ImmunizationSchedule::shipped();
        assert_eq!(s.vaccines.len(), 7);
        assert_eq!(s.total_doses(), 14);
        assert_eq!(s.grace_period, Duration::days(28));
        let counts: Vec<(&str, u32)> = s.vaccines.iter().map(|v| (v.code.as_str(), v.dose_count)).collect();
        assert_eq!(
            counts,
            [("BCG", 1), ("Pentavalent", 3), ("PCV", 3), ("OPV", 3), ("IPV", 2), ("MR-1", 1), ("MR-2", 1)]
        );
        use AgeOffset::*;
        assert_eq!(s.vaccine("IPV").unwrap().recommended_ages, [Weeks(6), Weeks(14)]);
        assert_eq!(s.vaccine("MR-2").unwrap().recommended_ages, [Months(15)]);
        assert_eq!(s.vaccine("IPV").unwrap().diseases, ["Poliomyelitis (Polio)"]);
    }

    #[test]
    fn complete_at_five() {
        let s = ImmunizationSchedule::shipped();
        let st = evaluate_immunization(d("2016-01-01"), &full_record(), &s, d("2021-01-01")).unwrap();
        assert_eq!(st.overall, Overall::Complete);
        assert_eq!(st.count(DoseState::Given), 14);
    }

    #[test]
    fn missing_third_pentavalent_is_overdue() {
        let s = ImmunizationSchedule::shipped();
        let doses: Vec<_> = full_record()
            .into_iter()
            .filter(|x| !(x.vaccine_code == "Pentavalent" && x.dose_number == 3))
            .collect();
        let st = evaluate_immunization(d("2016-01-01"), &doses, &s, d("2021-01-01")).unwrap();
        assert_eq!(st.overall, Overall::Incomplete);
        assert_eq!(st.state_of("Pentavalent", 3), Some(DoseState::Overdue));
        assert_eq!(st.count(DoseState::Overdue), 1);
    }

    #[test]
    fn newborn_without_doses() {
        let s = ImmunizationSchedule::shipped().with_grace_period(Duration::zero());
        let st = evaluate_immunization(d("2020-06-01"), &[], &s, d("2020-06-15")).unwrap();
        assert_eq!(st.overall, Overall::Incomplete);
        assert_eq!(st.state_of("BCG", 1), Some(DoseState::Overdue));
        assert_eq!(st.count(DoseState::Pending), 13);
    }

    #[test]
    fn pending_only_with_grace() {
        let s = ImmunizationSchedule::shipped();
        // BCG given; next dose due at 6 weeks.
        let st = evaluate_immunization(d("2020-06-01"), &[dose("BCG", 1, "2020-06-01")], &s, d("2020-06-20")).unwrap();
        assert_eq!(st.overall, Overall::PendingOnly);
    }

    #[test]
    fn grace_boundary() {
        let s = ImmunizationSchedule::shipped();
        // MR-1 due 2021-03-01 for dob 2020-06-01; grace 28 days ends 2021-03-29.
        let dob = d("2020-06-01");
        let doses: Vec<_> = full_record().into_iter().filter(|x| !x.vaccine_code.starts_with("MR")).collect();
        let doses: Vec<_> = doses.into_iter().map(|mut x| { x.given_on = dob; x }).collect();
        let st = evaluate_immunization(dob, &doses, &s, d("2021-03-28")).unwrap();
        assert_eq!(st.state_of("MR-1", 1), Some(DoseState::Pending));
        let st = evaluate_immunization(dob, &doses, &s, d("2021-03-29")).unwrap();
        assert_eq!(st.state_of("MR-1", 1), Some(DoseState::Overdue));
    }

    #[test]
    fn errors() {
        let s = ImmunizationSchedule::shipped();
        let dob = d("2016-01-01");
        let as_of = d("2021-01-01");
        let e = evaluate_immunization(dob, &[dose("HPV", 1, "2017-01-01")], &s, as_of).unwrap_err();
        assert_eq!(e.code(), "UnknownVaccineCode");
        let e = evaluate_immunization(dob, &[dose("PCV", 2, "2016-03-01"), dose("PCV", 2, "2016-04-01")], &s, as_of)
            .unwrap_err();
        assert_eq!(e.code(), "DuplicateDose");
        let e = evaluate_immunization(dob, &[dose("PCV", 4, "2016-03-01")], &s, as_of).unwrap_err();
        assert_eq!(e.code(), "InvalidDoseNumber");
        let e = evaluate_immunization(dob, &[dose("PCV", 1, "2015-03-01")], &s, as_of).unwrap_err();
        assert_eq!(e.code(), "DoseBeforeBirth");
        let e = evaluate_immunization(dob, &[], &s, d("2015-01-01")).unwrap_err();
        assert_eq!(e.code(), "NegativeAge");
    }

    #[test]
    fn schedule_load_errors() {
        let bad = r#"
schedule_version = 1
grace_period_days = 0
[[vaccine]]
code = "X"
diseases = []
dose_count = 3
recommended_ages = ["6w", "10w"]
"#;
        assert_eq!(ImmunizationSchedule::from_toml(bad).unwrap_err().code(), "DoseAgeArityMismatch");
        assert_eq!(ImmunizationSchedule::from_toml("nope = ").unwrap_err().code(), "MalformedSchedule");
        let decreasing = bad.replace("dose_count = 3", "dose_count = 2").replace("\"6w\", \"10w\"", "\"3m\", \"10w\"");
        assert_eq!(ImmunizationSchedule::from_toml(&decreasing).unwrap_err().code(), "MalformedSchedule");
    }

    #[test]
    fn empty_schedule_is_vacuously_complete() {
        let s = ImmunizationSchedule::from_toml("schedule_version = 1\ngrace_period_days = 28\n").unwrap();
        let st = evaluate_immunization(d("2016-01-01"), &[], &s, d("2021-01-01")).unwrap();
        assert_eq!(st.overall, Overall::Complete);
        assert!(st.per_dose.is_empty());
    }

    fn all_doses() -> Vec<(&'static str, u32)> {
        vec![
            ("BCG", 1), ("Pentavalent", 1), ("Pentavalent", 2), ("Pentavalent", 3), ("PCV", 1), ("PCV", 2),
            ("PCV", 3), ("OPV", 1), ("OPV", 2), ("OPV", 3), ("IPV", 1), ("IPV", 2), ("MR-1", 1), ("MR-2", 1),
        ]
    }

    fn pick(mask: u16, dob: NaiveDate) -> Vec<DoseEvent> {
        all_doses()
            .into_iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, (c, n))| DoseEvent { vaccine_code: c.into(), dose_number: n, given_on: dob })
            .collect()
    }

    proptest! {
        #[test]
        fn adding_a_dose_is_monotone(mask in 0u16..(1 << 14), extra in 0usize..14, age in 0i64..3000) {
            let s = ImmunizationSchedule::shipped();
            let dob = d("2015-01-01");
            let as_of = dob + Duration::days(age);
            let before = evaluate_immunization(dob, &pick(mask, dob), &s, as_of).unwrap();
            let after = evaluate_immunization(dob, &pick(mask | (1 << extra), dob), &s, as_of).unwrap();
            for (b, a) in before.per_dose.iter().zip(&after.per_dose) {
                prop_assert!(!(b.state == DoseState::Given && a.state != DoseState::Given));
            }
            prop_assert!(!(before.overall == Overall::Complete && after.overall != Overall::Complete));
            prop_assert_eq!(after.per_dose.len(), 14);
        }

        #[test]
        fn order_does_not_matter(mask in 0u16..(1 << 14), seed in any::<u64>(), age in 0i64..3000) {
            let s = ImmunizationSchedule::shipped();
            let dob = d("2015-01-01");
            let as_of = dob + Duration::days(age);
            let doses = pick(mask, dob);
            let mut shuffled = doses.clone();
            let n = shuffled.len();
            if n > 1 {
                for i in 0..n {
                    let j = (seed.rotate_left(i as u32) as usize) % n;
                    shuffled.swap(i, j);
                }
            }
            prop_assert_eq!(
                evaluate_immunization(dob, &doses, &s, as_of).unwrap(),
                evaluate_immunization(dob, &shuffled, &s, as_of).unwrap()
            );
        }

        #[test]
        fn overdue_never_reverts(mask in 0u16..(1 << 14), a in 0i64..3000, b in 0i64..3000) {
            let s = ImmunizationSchedule::shipped();
            let dob = d("2015-01-01");
            let (lo, hi) = (a.min(b), a.max(b));
            let early = evaluate_immunization(dob, &pick(mask, dob), &s, dob + Duration::days(lo)).unwrap();
            let late = evaluate_immunization(dob, &pick(mask, dob), &s, dob + Duration::days(hi)).unwrap();
            for (e, l) in early.per_dose.iter().zip(&late.per_dose) {
                prop_assert!(!(e.state == DoseState::Overdue && l.state == DoseState::Pending));
            }
        }
    }
}
