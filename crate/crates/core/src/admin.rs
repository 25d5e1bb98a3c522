//! Operator batch work: CSV ingestion of camp data, whole-school screening,
//! cohort feature export, and flat CSV backups.
//!
//! CSV files are UTF-8 with RFC 4180 quoting. Column sets:
//!
//! | kind     | columns                                                       |
//! |----------|---------------------------------------------------------------|
//! | students | screening_id, rfid_token, student_name, date_of_birth         |
//! | values   | screening_id, parameter_key, value, camp_year, recorded_at    |
//! | doses    | screening_id, vaccine_code, dose_number, given_on             |
//!
//! `camp_year` is blank for one-time parameters. `recorded_at` is RFC 3339
//! and may be blank (the ingest time is used).

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{
    validate_value, EntryContext, ParameterCatalog, KEY_DATE_OF_BIRTH, KEY_HEIGHT, KEY_SCREENING_ID,
    KEY_STUDENT_NAME, KEY_WEIGHT,
};
use crate::immunization::{evaluate_immunization, DoseEvent};
use crate::measures::{age_at, compute_bmi};
use crate::record::StudentRecord;
use crate::screening::{run_screening, ClinicalRule, ScreeningContext, ScreeningOutcome};
use crate::store::{AuditAction, AuditTarget, Store};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IngestKind {
    Students,
    Values,
    Doses,
}

impl IngestKind {
    pub fn header(self) -> &'static [&'static str] {
        match self {
            IngestKind::Students => &["screening_id", "rfid_token", "student_name", "date_of_birth"],
            IngestKind::Values => &["screening_id", "parameter_key", "value", "camp_year", "recorded_at"],
            IngestKind::Doses => &["screening_id", "vaccine_code", "dose_number", "given_on"],
        }
    }
}

impl FromStr for IngestKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "students" => Ok(IngestKind::Students),
            "values" => Ok(IngestKind::Values),
            "doses" => Ok(IngestKind::Doses),
            _ => Err(format!("unknown kind {s:?}; expected students, values or doses")),
        }
    }
}

impl fmt::Display for IngestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IngestKind::Students => "students",
            IngestKind::Values => "values",
            IngestKind::Doses => "doses",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowRejection {
    /// 1-based line number in the file (the header is line 1).
    pub line: u64,
    pub screening_id: Option<String>,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub kind: IngestKind,
    pub rows_read: usize,
    pub rows_ok: usize,
    pub rejected: Vec<RowRejection>,
}

impl IngestReport {
    pub fn rows_rejected(&self) -> usize {
        self.rejected.len()
    }
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "ingest {}: {} rows read, {} ok, {} rejected",
            self.kind,
            self.rows_read,
            self.rows_ok,
            self.rows_rejected()
        )?;
        for r in &self.rejected {
            writeln!(f, "  line {}: {} {}", r.line, r.code, r.message)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {message}")]
    FileUnreadable { path: String, message: String },
    #[error("header mismatch: expected {expected:?}, found {found:?}")]
    HeaderMismatch { expected: Vec<String>, found: Vec<String> },
}

impl IngestError {
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::FileUnreadable { .. } => "FileUnreadable",
            IngestError::HeaderMismatch { .. } => "HeaderMismatch",
        }
    }
}

struct RowError {
    code: String,
    message: String,
}

impl RowError {
    fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        RowError { code: code.into(), message: message.into() }
    }
}

macro_rules! row_err {
    ($e:expr) => {{
        let e = $e;
        RowError::new(e.code(), e.to_string())
    }};
}

pub fn ingest_path(store: &Store, path: impl AsRef<Path>, kind: IngestKind, actor: &str) -> Result<IngestReport, IngestError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| IngestError::FileUnreadable { path: path.display().to_string(), message: e.to_string() })?;
    ingest_csv(store, file, kind, actor)
}

/// Applies every valid row; invalid rows are reported and skipped. A header
/// that does not match `kind` rejects the whole file before any row runs.
pub fn ingest_csv(store: &Store, input: impl Read, kind: IngestKind, actor: &str) -> Result<IngestReport, IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(input);
    let found: Vec<String> = reader
        .headers()
        .map_err(|e| IngestError::FileUnreadable { path: "<input>".into(), message: e.to_string() })?
        .iter()
        .map(|h| h.trim().trim_start_matches('\u{feff}').to_string())
        .collect();
    let expected: Vec<String> = kind.header().iter().map(|s| s.to_string()).collect();
    if found != expected {
        return Err(IngestError::HeaderMismatch { expected, found });
    }

    let mut report = IngestReport { kind, rows_read: 0, rows_ok: 0, rejected: Vec::new() };
    for (i, row) in reader.records().enumerate() {
        report.rows_read += 1;
        let line = row.as_ref().ok().and_then(|r| r.position()).map_or(i as u64 + 2, |p| p.line());
        let outcome = match &row {
            Ok(r) => apply_row(store, kind, r, actor),
            Err(e) => Err(RowError::new("MalformedRow", e.to_string())),
        };
        match outcome {
            Ok(()) => report.rows_ok += 1,
            Err(e) => report.rejected.push(RowRejection {
                line,
                screening_id: row.ok().and_then(|r| r.get(0).map(str::to_string)),
                code: e.code,
                message: e.message,
            }),
        }
    }
    Ok(report)
}

fn apply_row(store: &Store, kind: IngestKind, row: &csv::StringRecord, actor: &str) -> Result<(), RowError> {
    let field = |i: usize| row.get(i).unwrap_or("").trim();
    let catalog = store.catalog();
    let now = store.now();
    let entry = |camp_year, recorded_at| EntryContext { recorded_at, camp_year, recorded_by: actor.to_string() };
    match kind {
        IngestKind::Students => {
            let mut identity = Vec::new();
            for (key, raw) in [(KEY_SCREENING_ID, field(0)), (KEY_STUDENT_NAME, field(2)), (KEY_DATE_OF_BIRTH, field(3))] {
                let def = catalog.get(key).expect("identity keys are in every catalog");
                identity.push(validate_value(def, raw, &entry(None, now)).map_err(|e| row_err!(e))?);
            }
            store.register_student(identity, field(1), actor).map_err(|e| row_err!(e))?;
        }
        IngestKind::Values => {
            let key = field(1);
            let def = catalog
                .get(key)
                .ok_or_else(|| RowError::new("UnknownParameter", format!("unknown parameter {key:?}")))?;
            let camp_year = match field(3) {
                "" => None,
                y => Some(y.parse::<i32>().map_err(|_| RowError::new("TypeMismatch", format!("bad camp_year {y:?}")))?),
            };
            let recorded_at = match field(4) {
                "" => now,
                t => DateTime::parse_from_rfc3339(t)
                    .map_err(|_| RowError::new("TypeMismatch", format!("bad recorded_at {t:?}")))?
                    .with_timezone(&Utc),
            };
            let value = validate_value(def, field(2), &entry(camp_year, recorded_at)).map_err(|e| row_err!(e))?;
            store.record_value(field(0), value, actor).map_err(|e| row_err!(e))?;
        }
        IngestKind::Doses => {
            let dose_number = field(2)
                .parse()
                .map_err(|_| RowError::new("TypeMismatch", format!("bad dose_number {:?}", field(2))))?;
            let given_on = NaiveDate::parse_from_str(field(3), "%Y-%m-%d")
                .map_err(|_| RowError::new("TypeMismatch", format!("bad given_on {:?}", field(3))))?;
            let dose = DoseEvent { vaccine_code: field(1).to_string(), dose_number, given_on };
            store.record_dose(field(0), dose, actor).map_err(|e| row_err!(e))?;
        }
    }
    Ok(())
}

/// Writes the store's contents as an ingestible CSV of `kind`. Re-ingesting
/// students, then values, then doses into an empty store reproduces the
/// records (referrals and the audit log are not part of the backup).
pub fn export_csv(store: &Store, kind: IngestKind, out: impl Write) -> Result<usize, csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(kind.header())?;
    let mut rows = 0;
    for s in store.students() {
        match kind {
            IngestKind::Students => {
                let dob = s.date_of_birth().map(|d| d.to_string()).unwrap_or_default();
                w.write_record([&s.screening_id, &s.rfid_token, s.student_name().unwrap_or(""), &dob])?;
                rows += 1;
            }
            IngestKind::Values => {
                let identity = [KEY_SCREENING_ID, KEY_STUDENT_NAME, KEY_DATE_OF_BIRTH];
                let one_time = s.one_time_values.values().filter(|v| !identity.contains(&v.key.as_str()));
                for v in one_time.chain(s.observations.values().flatten()) {
                    let year = v.camp_year.map(|y| y.to_string()).unwrap_or_default();
                    let at = v.recorded_at.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true);
                    w.write_record([&s.screening_id, &v.key, &v.value.render(), &year, &at])?;
                    rows += 1;
                }
            }
            IngestKind::Doses => {
                for d in &s.doses {
                    w.write_record([
                        s.screening_id.as_str(),
                        &d.vaccine_code,
                        &d.dose_number.to_string(),
                        &d.given_on.to_string(),
                    ])?;
                    rows += 1;
                }
            }
        }
    }
    w.flush()?;
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Batch screening

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchFailure {
    pub screening_id: String,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub as_of: NaiveDate,
    pub screened: usize,
    pub referrals: usize,
    pub outcomes: Vec<ScreeningOutcome>,
    pub failures: Vec<BatchFailure>,
}

impl fmt::Display for BatchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "screened {} students as of {}; {} referrals", self.screened, self.as_of, self.referrals)?;
        for e in &self.failures {
            writeln!(f, "  {}: {} {}", e.screening_id, e.code, e.message)?;
        }
        Ok(())
    }
}

/// Screens every student in the store and stores any referrals raised.
pub fn screen_all(
    store: &Store,
    rules: &[ClinicalRule],
    ctx: &ScreeningContext<'_>,
    as_of: NaiveDate,
    actor: &str,
) -> BatchReport {
    let mut report = BatchReport { as_of, screened: 0, referrals: 0, outcomes: Vec::new(), failures: Vec::new() };
    for student in store.students() {
        let result = run_screening(&student, rules, ctx, as_of, store.now())
            .map_err(|e| (e.code().to_string(), e.to_string()))
            .and_then(|o| store.record_screening(&o, actor).map(|_| o).map_err(|e| (e.code().to_string(), e.to_string())));
        match result {
            Ok(outcome) => {
                report.screened += 1;
                report.referrals += usize::from(outcome.referral.is_some());
                report.outcomes.push(outcome);
            }
            Err((code, message)) => {
                report.failures.push(BatchFailure { screening_id: student.screening_id, code, message })
            }
        }
    }
    report
}

// ---------------------------------------------------------------------------
// Cohort export

pub const FEATURE_BMI: &str = "bmi";
pub const FEATURE_IMMUNIZATION: &str = "immunization_status";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortQuery {
    pub age_min: u32,
    pub age_max: u32,
    pub features: Vec<String>,
    pub as_of: NaiveDate,
    #[serde(default)]
    pub include_incomplete: bool,
}

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("unknown feature {0:?}")]
    UnresolvedFeatureKey(String),
    #[error("age_min {age_min} > age_max {age_max}")]
    InvalidAgeRange { age_min: u32, age_max: u32 },
    #[error("writing output: {0}")]
    OutputUnwritable(String),
}

impl CohortError {
    pub fn code(&self) -> &'static str {
        match self {
            CohortError::UnresolvedFeatureKey(_) => "UnresolvedFeatureKey",
            CohortError::InvalidAgeRange { .. } => "InvalidAgeRange",
            CohortError::OutputUnwritable(_) => "OutputUnwritable",
        }
    }
}

impl CohortQuery {
    pub fn validate(&self, catalog: &ParameterCatalog) -> Result<(), CohortError> {
        if self.age_min > self.age_max {
            return Err(CohortError::InvalidAgeRange { age_min: self.age_min, age_max: self.age_max });
        }
        for f in &self.features {
            if f != FEATURE_BMI && f != FEATURE_IMMUNIZATION && catalog.get(f).is_none() {
                return Err(CohortError::UnresolvedFeatureKey(f.clone()));
            }
        }
        Ok(())
    }
}

fn feature(record: &StudentRecord, key: &str, ctx: &ScreeningContext<'_>, as_of: NaiveDate) -> Option<String> {
    match key {
        FEATURE_BMI => {
            let h = record.latest_as_of(KEY_HEIGHT, as_of)?.value.as_f64()?;
            let w = record.latest_as_of(KEY_WEIGHT, as_of)?.value.as_f64()?;
            compute_bmi(w, h).ok().map(|b| b.value().to_string())
        }
        FEATURE_IMMUNIZATION => {
            let dob = record.date_of_birth()?;
            evaluate_immunization(dob, &record.doses, ctx.schedule, as_of).ok().map(|s| s.overall.to_string())
        }
        k => record.value_as_of(k, as_of).map(|v| v.value.render()),
    }
}

/// Builds the cohort feature matrix as rows (screening id first), sorted by
/// screening id.
pub fn cohort_rows(
    students: &[StudentRecord],
    query: &CohortQuery,
    ctx: &ScreeningContext<'_>,
) -> Result<Vec<Vec<String>>, CohortError> {
    query.validate(ctx.catalog)?;
    let mut rows: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for s in students {
        let Some(age) = s.date_of_birth().and_then(|d| age_at(d, query.as_of).ok()) else { continue };
        if !(query.age_min..=query.age_max).contains(&age.years) {
            continue;
        }
        let values: Vec<Option<String>> = query.features.iter().map(|f| feature(s, f, ctx, query.as_of)).collect();
        if !query.include_incomplete && values.iter().any(Option::is_none) {
            continue;
        }
        let mut row = vec![s.screening_id.clone()];
        row.extend(values.into_iter().map(Option::unwrap_or_default));
        rows.insert(&s.screening_id, row);
    }
    Ok(rows.into_values().collect())
}

/// Writes the cohort CSV and records the export in the audit log.
pub fn export_cohort(
    store: &Store,
    query: &CohortQuery,
    ctx: &ScreeningContext<'_>,
    out: impl Write,
    actor: &str,
) -> Result<usize, CohortError> {
    let rows = cohort_rows(&store.students(), query, ctx)?;
    let unwritable = |e: csv::Error| CohortError::OutputUnwritable(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["screening_id".to_string()];
    header.extend(query.features.iter().cloned());
    w.write_record(&header).map_err(unwritable)?;
    for row in &rows {
        w.write_record(row).map_err(unwritable)?;
    }
    w.flush().map_err(|e| CohortError::OutputUnwritable(e.to_string()))?;
    let detail = format!(
        "ages {}-{} as of {}; features {}; {} rows",
        query.age_min,
        query.age_max,
        query.as_of,
        query.features.join(","),
        rows.len()
    );
    store
        .audit_event(actor, AuditAction::View, AuditTarget::Cohort(query.as_of.to_string()), detail)
        .map_err(|e| CohortError::OutputUnwritable(e.to_string()))?;
    Ok(rows.len())
}
