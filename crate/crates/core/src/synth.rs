//! Seeded synthetic students for demos, load tests and property checks.
//! The same seed always yields the same cohort.

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveTime, TimeZone, Utc};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use crate::catalog::{
    validate_value, EntryContext, ParameterCatalog, ValidationError, KEY_DATE_OF_BIRTH, KEY_HEIGHT,
    KEY_PRESENT_CLASS, KEY_SCREENING_ID, KEY_STUDENT_NAME, KEY_WEIGHT,
};
use crate::immunization::{DoseEvent, ImmunizationSchedule};
use crate::record::StudentRecord;
use crate::store::{Store, StoreError};

/// One raw value as an operator would type it.
#[derive(Debug, Clone, PartialEq)]
pub struct RawValue {
    pub key: String,
    pub raw: String,
    pub camp_year: Option<i32>,
    pub recorded_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticStudent {
    pub screening_id: String,
    pub rfid_token: String,
    pub student_name: String,
    pub date_of_birth: NaiveDate,
    pub values: Vec<RawValue>,
    pub doses: Vec<DoseEvent>,
}

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub as_of: NaiveDate,
    /// Ages in whole years, inclusive.
    pub min_age: u32,
    pub max_age: u32,
    /// Chance that any given scheduled dose was recorded.
    pub dose_probability: f64,
    /// Number of yearly camps ending at `as_of`.
    pub camps: u32,
}

impl SynthOptions {
    pub fn new(as_of: NaiveDate) -> Self {
        SynthOptions { as_of, min_age: 3, max_age: 17, dose_probability: 0.9, camps: 2 }
    }
}

const GIVEN: [&str; 12] =
    ["Ayesha", "Rahim", "Nusrat", "Tanvir", "Farhana", "Imran", "Sadia", "Karim", "Mitu", "Jamal", "Rupa", "Sohel"];
const FAMILY: [&str; 8] = ["Hossain", "Rahman", "Akter", "Islam", "Begum", "Chowdhury", "Khan", "Sarkar"];
const SEVERITY: [&str; 3] = ["Normal", "Mild", "Abnormal-Refer"];
const LAB: [&str; 3] = ["Normal", "Abnormal", "NotDone"];

fn pick<'a>(rng: &mut StdRng, items: &[&'a str], weights: &[u32]) -> &'a str {
    let total: u32 = weights.iter().sum();
    let mut roll = rng.random_range(0..total);
    for (item, w) in items.iter().zip(weights) {
        if roll < *w {
            return item;
        }
        roll -= w;
    }
    items[items.len() - 1]
}

fn at_noon(d: NaiveDate) -> DateTime<Utc> {
    Utc.from_utc_datetime(&d.and_time(NaiveTime::from_hms_opt(12, 0, 0).expect("noon")))
}

pub fn generate(seed: u64, count: usize, schedule: &ImmunizationSchedule, opts: &SynthOptions) -> Vec<SyntheticStudent> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count).map(|i| one(&mut rng, i, schedule, opts)).collect()
}

fn one(rng: &mut StdRng, index: usize, schedule: &ImmunizationSchedule, opts: &SynthOptions) -> SyntheticStudent {
    let span_days = i64::from(opts.max_age + 1 - opts.min_age) * 365;
    let age_days = i64::from(opts.min_age) * 365 + rng.random_range(0..span_days);
    let dob = opts.as_of - Duration::days(age_days);
    let name = format!("{} {}", GIVEN[rng.random_range(0..GIVEN.len())], FAMILY[rng.random_range(0..FAMILY.len())]);
    let screening_id = format!("S{:06}", index + 1);
    let rfid_token = format!("{:016X}", rng.random::<u64>());

    let mut values = Vec::new();
    let enrolled = at_noon(opts.as_of - Duration::days(365 * i64::from(opts.camps)));
    let mut once = |key: &str, raw: String| {
        values.push(RawValue { key: key.into(), raw, camp_year: None, recorded_at: enrolled });
    };
    if rng.random_bool(0.7) {
        once("Blood Group & RH Typing", ["A+", "B+", "O+", "AB+", "O-"][rng.random_range(0..5)].into());
    }
    if rng.random_bool(0.6) {
        once("Birth Weight", format!("{:.1}", rng.random_range(1.8..4.2)));
    }
    once("Vaccination Status", "recorded".into());

    let age_years = age_days as f64 / 365.25;
    for camp in (0..opts.camps).rev() {
        let day = opts.as_of - Duration::days(365 * i64::from(camp) + rng.random_range(0..30));
        let at = at_noon(day);
        let year = day.year();
        let age = (age_years - f64::from(camp)).max(1.0);
        let mut push = |key: &str, raw: String| {
            values.push(RawValue { key: key.into(), raw, camp_year: Some(year), recorded_at: at });
        };
        let height = (75.0 + 6.0 * age + rng.random_range(-8.0..8.0_f64)).clamp(60.0, 200.0);
        let bmi = rng.random_range(11.0..30.0_f64);
        let weight = (bmi * (height / 100.0).powi(2)).clamp(5.0, 150.0);
        push(KEY_PRESENT_CLASS, format!("Class {}", (age as i32 - 5).clamp(0, 10)));
        push(KEY_HEIGHT, format!("{height:.1}"));
        push(KEY_WEIGHT, format!("{weight:.1}"));
        if rng.random_bool(0.8) {
            push("MUAC / MAC", format!("{:.1}", rng.random_range(11.0..26.0)));
        }
        for key in ["Vision Condition", "Hearing"] {
            push(key, pick(rng, &SEVERITY, &[85, 10, 5]).into());
        }
        let cbc = pick(rng, &LAB, &[80, 10, 10]);
        let esr = pick(rng, &LAB, &[85, 8, 7]);
        push("CBC and ESR", format!("CBC={cbc};ESR={esr}"));
        for key in ["HbsAg", "Urine R/E", "Stool R/E", "TSH (Thyroid Stimulating Hormone)"] {
            if rng.random_bool(0.85) {
                push(key, pick(rng, &LAB, &[85, 8, 7]).into());
            }
        }
        push("History of Asthma", if rng.random_bool(0.1) { "Yes" } else { "No" }.into());
    }

    let mut doses = Vec::new();
    for spec in &schedule.vaccines {
        for (n, age) in spec.recommended_ages.iter().enumerate() {
            if rng.random_bool(opts.dose_probability) {
                let given_on = age.due_date(dob) + Duration::days(rng.random_range(0..21));
                if given_on <= opts.as_of {
                    doses.push(DoseEvent { vaccine_code: spec.code.clone(), dose_number: n as u32 + 1, given_on });
                }
            }
        }
    }

    SyntheticStudent { screening_id, rfid_token, student_name: name, date_of_birth: dob, values, doses }
}

impl SyntheticStudent {
    fn identity(&self) -> [(&'static str, String); 3] {
        [
            (KEY_SCREENING_ID, self.screening_id.clone()),
            (KEY_STUDENT_NAME, self.student_name.clone()),
            (KEY_DATE_OF_BIRTH, self.date_of_birth.to_string()),
        ]
    }

    /// Builds the record directly, validating every value against `catalog`.
    pub fn to_record(&self, catalog: &ParameterCatalog, actor: &str) -> Result<StudentRecord, ValidationError> {
        let mut record = StudentRecord::new(&self.screening_id, &self.rfid_token);
        let enrolled = self.values.first().map_or_else(Utc::now, |v| v.recorded_at);
        for (key, raw) in self.identity() {
            let ctx = EntryContext { recorded_at: enrolled, camp_year: None, recorded_by: actor.into() };
            let v = validate_value(catalog.get(key).expect("identity key"), &raw, &ctx)?;
            record.one_time_values.insert(key.into(), v);
        }
        for raw in &self.values {
            let def = catalog.get(&raw.key).ok_or_else(|| ValidationError::TypeMismatch {
                key: raw.key.clone(),
                expected: "a catalog parameter",
                raw: raw.raw.clone(),
            })?;
            let ctx = EntryContext { recorded_at: raw.recorded_at, camp_year: raw.camp_year, recorded_by: actor.into() };
            let v = validate_value(def, &raw.raw, &ctx)?;
            if def.is_one_time() {
                record.one_time_values.insert(v.key.clone(), v);
            } else {
                record.push_observation(v);
            }
        }
        record.doses = self.doses.clone();
        Ok(record)
    }

    /// Registers the student and records every value and dose through `store`.
    pub fn load_into(&self, store: &Store, actor: &str) -> Result<StudentRecord, SynthError> {
        let catalog = store.catalog().clone();
        let enrolled = self.values.first().map_or_else(|| store.now(), |v| v.recorded_at);
        let mut identity = Vec::new();
        for (key, raw) in self.identity() {
            let ctx = EntryContext { recorded_at: enrolled, camp_year: None, recorded_by: actor.into() };
            identity.push(validate_value(catalog.get(key).expect("identity key"), &raw, &ctx)?);
        }
        let mut record = store.register_student(identity, &self.rfid_token, actor)?;
        for raw in &self.values {
            let def = catalog.get(&raw.key).ok_or_else(|| StoreError::UnknownParameter(raw.key.clone()))?;
            let ctx = EntryContext { recorded_at: raw.recorded_at, camp_year: raw.camp_year, recorded_by: actor.into() };
            record = store.record_value(&self.screening_id, validate_value(def, &raw.raw, &ctx)?, actor)?;
        }
        for d in &self.doses {
            record = store.record_dose(&self.screening_id, d.clone(), actor)?;
        }
        Ok(record)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Generates `count` students and loads them into `store`.
pub fn populate(store: &Store, seed: u64, count: usize, opts: &SynthOptions, actor: &str) -> Result<usize, SynthError> {
    let students = generate(seed, count, store.schedule(), opts);
    for s in &students {
        s.load_into(store, actor)?;
    }
    Ok(students.len())
}
