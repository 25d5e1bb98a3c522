#![allow(dead_code)]

use std::sync::Arc;

use chrono::{DateTime, NaiveDate, TimeZone, Utc};
use hmms_core::catalog::{validate_value, EntryContext, ParameterCatalog, ParameterValue};
use hmms_core::immunization::{DoseEvent, ImmunizationSchedule};
use hmms_core::screening::{LabTestTable, Ruleset, ScreeningContext};
use hmms_core::Store;

pub const TEST_RULESET: &str = include_str!("../fixtures/test_ruleset.toml");

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

pub fn noon(d: NaiveDate) -> DateTime<Utc> {
    Utc.from_utc_datetime(&d.and_hms_opt(12, 0, 0).unwrap())
}

pub struct Fixture {
    pub catalog: Arc<ParameterCatalog>,
    pub schedule: Arc<ImmunizationSchedule>,
    pub lab_tests: LabTestTable,
}

impl Fixture {
    pub fn new() -> Self {
        Fixture {
            catalog: Arc::new(ParameterCatalog::shipped()),
            schedule: Arc::new(ImmunizationSchedule::shipped()),
            lab_tests: LabTestTable::shipped(),
        }
    }

    pub fn ctx(&self) -> ScreeningContext<'_> {
        ScreeningContext { catalog: &self.catalog, schedule: &self.schedule, lab_tests: &self.lab_tests }
    }

    pub fn test_ruleset(&self) -> Ruleset {
        Ruleset::from_toml(TEST_RULESET, &self.catalog).unwrap()
    }

    pub fn store(&self) -> Store {
        Store::in_memory(self.catalog.clone(), self.schedule.clone())
    }

    /// Validated one-time value.
    pub fn once(&self, key: &str, raw: &str) -> ParameterValue {
        let ctx = EntryContext { recorded_at: noon(date(2020, 1, 10)), camp_year: None, recorded_by: "nurse".into() };
        validate_value(self.catalog.get(key).unwrap(), raw, &ctx).unwrap()
    }

    /// Validated multiple-time value recorded at noon on `on`.
    pub fn camp(&self, key: &str, raw: &str, on: NaiveDate) -> ParameterValue {
        use chrono::Datelike;
        let ctx = EntryContext { recorded_at: noon(on), camp_year: Some(on.year()), recorded_by: "nurse".into() };
        validate_value(self.catalog.get(key).unwrap(), raw, &ctx).unwrap()
    }

    pub fn identity(&self, id: &str, name: &str, dob: NaiveDate) -> Vec<ParameterValue> {
        vec![
            self.once("Screening ID", id),
            self.once("Student Name", name),
            self.once("Date of birth", &dob.to_string()),
        ]
    }

    /// Registers a student with every scheduled dose given on its due date.
    pub fn register_complete(&self, store: &Store, id: &str, dob: NaiveDate) {
        store.register_student(self.identity(id, "Test Student", dob), &format!("card-{id}"), "nurse").unwrap();
        for dose in all_doses(&self.schedule, dob) {
            store.record_dose(id, dose, "nurse").unwrap();
        }
    }
}

pub fn all_doses(schedule: &ImmunizationSchedule, dob: NaiveDate) -> Vec<DoseEvent> {
    schedule
        .vaccines
        .iter()
        .flat_map(|v| {
            v.recommended_ages.iter().enumerate().map(move |(i, age)| DoseEvent {
                vaccine_code: v.code.clone(),
                dose_number: i as u32 + 1,
                given_on: age.due_date(dob),
            })
        })
        .collect()
}
