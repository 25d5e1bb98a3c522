//! Screening parameter catalog.
//!
//! The catalog fixes the set of parameters a school health camp records for
//! each student. Every parameter is either entered once at admission
//! ([`Cardinality::OneTime`]) or re-measured at each annual camp
//! ([`Cardinality::MultipleTime`]). The shipped catalog holds 45 parameters,
//! 18 one-time and 27 multiple-time, and any catalog file with different
//! totals is rejected at load.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Total number of parameters in a valid catalog.
pub const PARAMETER_COUNT: usize = 45;
/// Number of one-time (admission) parameters.
pub const ONE_TIME_COUNT: usize = 18;
/// Number of multiple-time (annual camp) parameters.
pub const MULTIPLE_TIME_COUNT: usize = 27;

/// The catalog file shipped with the crate.
pub const DEFAULT_CATALOG: &str = include_str!("../data/catalog.toml");

// Keys the rest of the system refers to directly.
pub const KEY_STUDENT_NAME: &str = "Student Name";
pub const KEY_SCREENING_ID: &str = "Screening ID";
pub const KEY_DATE_OF_BIRTH: &str = "Date of birth";
pub const KEY_PRESENT_CLASS: &str = "Present Class";
pub const KEY_HEIGHT: &str = "Height";
pub const KEY_WEIGHT: &str = "Weight";
pub const KEY_BMI: &str = "BMI – Body Mass Index";
pub const KEY_VACCINATION_STATUS: &str = "Vaccination Status";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Area {
    GeneralInformation,
    Vaccination,
    ClinicalTest,
    DentalCondition,
    Nutrition,
    EyeCondition,
    HearingCondition,
    #[serde(rename = "ENT")]
    Ent,
    SkinCondition,
    MentalCondition,
    HygienicInformation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cardinality {
    OneTime,
    MultipleTime,
}

/// How a parameter's raw input is typed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ValueKind {
    Text,
    Integer,
    Decimal {
        unit: String,
    },
    Date,
    Boolean,
    Enumerated {
        values: Vec<String>,
    },
    BloodGroup,
    PhotoRef,
    /// Laboratory result: Normal / Abnormal / NotDone with an optional
    /// free-text result. `sub_results` names the separate tests reported
    /// under one parameter (e.g. CBC and ESR).
    LabTest {
        #[serde(default)]
        sub_results: Vec<String>,
    },
}

impl ValueKind {
    pub fn is_numeric(&self) -> bool {
        matches!(self, ValueKind::Integer | ValueKind::Decimal { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ValueKind::Text => "text",
            ValueKind::Integer => "integer",
            ValueKind::Decimal { .. } => "decimal",
            ValueKind::Date => "date",
            ValueKind::Boolean => "boolean",
            ValueKind::Enumerated { .. } => "enumerated",
            ValueKind::BloodGroup => "blood group",
            ValueKind::PhotoRef => "photo reference",
            ValueKind::LabTest { .. } => "lab test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericRange {
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl NumericRange {
    pub fn contains(&self, x: f64) -> bool {
        self.min.is_none_or(|m| x >= m) && self.max.is_none_or(|m| x <= m)
    }
}

#[derive(Debug, Clone)]
pub struct ParameterDefinition {
    pub key: String,
    pub display_name: String,
    pub area: Area,
    pub cardinality: Cardinality,
    pub value_kind: ValueKind,
    pub range: Option<NumericRange>,
    pub pattern: Option<Regex>,
}

impl ParameterDefinition {
    pub fn is_one_time(&self) -> bool {
        self.cardinality == Cardinality::OneTime
    }

    /// Parses `raw` against this definition's kind and constraints.
    pub fn parse(&self, raw: &str) -> Result<Value, ValidationError> {
        parse_raw(self, raw)
    }
}

impl PartialEq for ParameterDefinition {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
            && self.display_name == other.display_name
            && self.area == other.area
            && self.cardinality == other.cardinality
            && self.value_kind == other.value_kind
            && self.range == other.range
            && self.pattern.as_ref().map(Regex::as_str) == other.pattern.as_ref().map(Regex::as_str)
    }
}

/// ABO group with Rh factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BloodGroup {
    APos,
    ANeg,
    BPos,
    BNeg,
    AbPos,
    AbNeg,
    OPos,
    ONeg,
}

impl BloodGroup {
    pub const ALL: [BloodGroup; 8] = [
        BloodGroup::APos,
        BloodGroup::ANeg,
        BloodGroup::BPos,
        BloodGroup::BNeg,
        BloodGroup::AbPos,
        BloodGroup::AbNeg,
        BloodGroup::OPos,
        BloodGroup::ONeg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BloodGroup::APos => "A+",
            BloodGroup::ANeg => "A-",
            BloodGroup::BPos => "B+",
            BloodGroup::BNeg => "B-",
            BloodGroup::AbPos => "AB+",
            BloodGroup::AbNeg => "AB-",
            BloodGroup::OPos => "O+",
            BloodGroup::ONeg => "O-",
        }
    }
}

impl FromStr for BloodGroup {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let norm: String = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .to_ascii_uppercase()
            .replace("POSITIVE", "+")
            .replace("NEGATIVE", "-")
            .replace("VE", "")
            .replace('−', "-");
        BloodGroup::ALL.into_iter().find(|g| g.as_str() == norm).ok_or(())
    }
}

impl fmt::Display for BloodGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabStatus {
    Normal,
    Abnormal,
    NotDone,
}

impl LabStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LabStatus::Normal => "Normal",
            LabStatus::Abnormal => "Abnormal",
            LabStatus::NotDone => "NotDone",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().replace([' ', '-', '_'], "").as_str() {
            "normal" => Some(LabStatus::Normal),
            "abnormal" => Some(LabStatus::Abnormal),
            "notdone" => Some(LabStatus::NotDone),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabResult {
    /// Combined status: Abnormal if any part is abnormal, Normal if all
    /// parts are normal, otherwise NotDone.
    pub status: LabStatus,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parts: BTreeMap<String, LabStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// A typed parameter payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum Value {
    Text(String),
    Integer(i64),
    Decimal { amount: f64, unit: String },
    Date(NaiveDate),
    Boolean(bool),
    Enumerated(String),
    BloodGroup(BloodGroup),
    PhotoRef(String),
    Lab(LabResult),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Integer(i) => Some(*i as f64),
            Value::Decimal { amount, .. } => Some(*amount),
            _ => None,
        }
    }

    pub fn as_date(&self) -> Option<NaiveDate> {
        match self {
            Value::Date(d) => Some(*d),
            _ => None,
        }
    }

    /// The value as a short comparison token: enumerated label, "Yes"/"No",
    /// or lab status. Used by equality predicates.
    pub fn as_token(&self) -> Option<&str> {
        match self {
            Value::Enumerated(s) => Some(s),
            Value::Boolean(true) => Some("Yes"),
            Value::Boolean(false) => Some("No"),
            Value::Lab(l) => Some(l.status.as_str()),
            _ => None,
        }
    }

    /// Plain rendering, the inverse of [`validate_value`] for the
    /// definition the value came from.
    pub fn render(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Text(s) | Value::Enumerated(s) | Value::PhotoRef(s) => f.write_str(s),
            Value::Integer(i) => write!(f, "{i}"),
            Value::Decimal { amount, .. } => write!(f, "{amount}"),
            Value::Date(d) => write!(f, "{d}"),
            Value::Boolean(b) => f.write_str(if *b { "Yes" } else { "No" }),
            Value::BloodGroup(g) => f.write_str(g.as_str()),
            Value::Lab(l) => {
                if l.parts.is_empty() {
                    f.write_str(l.status.as_str())?;
                } else {
                    let parts: Vec<String> =
                        l.parts.iter().map(|(k, v)| format!("{k}={}", v.as_str())).collect();
                    f.write_str(&parts.join(";"))?;
                }
                if let Some(n) = &l.note {
                    write!(f, ": {n}")?;
                }
                Ok(())
            }
        }
    }
}

/// One recorded value for one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterValue {
    pub key: String,
    pub value: Value,
    pub recorded_at: DateTime<Utc>,
    /// Set exactly for multiple-time parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camp_year: Option<i32>,
    pub recorded_by: String,
}

/// Provenance attached to a raw input when it is validated.
#[derive(Debug, Clone)]
pub struct EntryContext {
    pub recorded_at: DateTime<Utc>,
    pub camp_year: Option<i32>,
    pub recorded_by: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("{key}: expected {expected}, got {raw:?}")]
    TypeMismatch { key: String, expected: &'static str, raw: String },
    #[error("{key}: {value} outside [{min:?}, {max:?}]")]
    OutOfRange { key: String, value: f64, min: Option<f64>, max: Option<f64> },
    #[error("{key}: {raw:?} is not one of {allowed:?}")]
    UnknownEnumValue { key: String, raw: String, allowed: Vec<String> },
    #[error("{key}: {raw:?} does not match pattern {pattern}")]
    PatternMismatch { key: String, raw: String, pattern: String },
    #[error("{key}: value is empty")]
    Empty { key: String },
    #[error("{key}: multiple-time parameter requires a camp year")]
    MissingCampYear { key: String },
    #[error("{key}: one-time parameter must not carry a camp year")]
    UnexpectedCampYear { key: String },
}

impl ValidationError {
    pub fn code(&self) -> &'static str {
        match self {
            ValidationError::TypeMismatch { .. } => "TypeMismatch",
            ValidationError::OutOfRange { .. } => "OutOfRange",
            ValidationError::UnknownEnumValue { .. } => "UnknownEnumValue",
            ValidationError::PatternMismatch { .. } => "PatternMismatch",
            ValidationError::Empty { .. } => "EmptyValue",
            ValidationError::MissingCampYear { .. } => "MissingCampYear",
            ValidationError::UnexpectedCampYear { .. } => "UnexpectedCampYear",
        }
    }
}

/// Validates raw input for `def` and attaches provenance.
pub fn validate_value(
    def: &ParameterDefinition,
    raw: &str,
    ctx: &EntryContext,
) -> Result<ParameterValue, ValidationError> {
    match (def.cardinality, ctx.camp_year) {
        (Cardinality::MultipleTime, None) => {
            return Err(ValidationError::MissingCampYear { key: def.key.clone() })
        }
        (Cardinality::OneTime, Some(_)) => {
            return Err(ValidationError::UnexpectedCampYear { key: def.key.clone() })
        }
        _ => {}
    }
    Ok(ParameterValue {
        key: def.key.clone(),
        value: parse_raw(def, raw)?,
        recorded_at: ctx.recorded_at,
        camp_year: ctx.camp_year,
        recorded_by: ctx.recorded_by.clone(),
    })
}

fn parse_raw(def: &ParameterDefinition, raw: &str) -> Result<Value, ValidationError> {
    let key = || def.key.clone();
    let s = raw.trim();
    if s.is_empty() {
        return Err(ValidationError::Empty { key: key() });
    }
    let mismatch = || ValidationError::TypeMismatch {
        key: key(),
        expected: def.value_kind.name(),
        raw: raw.to_string(),
    };
    let value = match &def.value_kind {
        ValueKind::Text => Value::Text(s.to_string()),
        ValueKind::PhotoRef => Value::PhotoRef(s.to_string()),
        ValueKind::Integer => Value::Integer(s.parse().map_err(|_| mismatch())?),
        ValueKind::Decimal { unit } => {
            let amount: f64 = s.parse().map_err(|_| mismatch())?;
            if !amount.is_finite() {
                return Err(mismatch());
            }
            Value::Decimal { amount, unit: unit.clone() }
        }
        ValueKind::Date => Value::Date(NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| mismatch())?),
        ValueKind::Boolean => match s.to_ascii_lowercase().as_str() {
            "yes" | "y" | "true" | "1" => Value::Boolean(true),
            "no" | "n" | "false" | "0" => Value::Boolean(false),
            _ => return Err(mismatch()),
        },
        ValueKind::Enumerated { values } => match values.iter().find(|v| v.eq_ignore_ascii_case(s)) {
            Some(v) => Value::Enumerated(v.clone()),
            None => {
                return Err(ValidationError::UnknownEnumValue {
                    key: key(),
                    raw: raw.to_string(),
                    allowed: values.clone(),
                })
            }
        },
        ValueKind::BloodGroup => Value::BloodGroup(s.parse().map_err(|_| mismatch())?),
        ValueKind::LabTest { sub_results } => Value::Lab(parse_lab(def, sub_results, s)?),
    };
    if let (Some(range), Some(x)) = (&def.range, value.as_f64()) {
        if !range.contains(x) {
            return Err(ValidationError::OutOfRange { key: key(), value: x, min: range.min, max: range.max });
        }
    }
    if let Some(re) = &def.pattern {
        if !re.is_match(s) {
            return Err(ValidationError::PatternMismatch {
                key: key(),
                raw: raw.to_string(),
                pattern: re.as_str().to_string(),
            });
        }
    }
    Ok(value)
}

const LAB_STATUSES: [&str; 3] = ["Normal", "Abnormal", "NotDone"];

// Accepted forms: "Normal", "Abnormal: Hb 9.1 g/dL", "CBC=Normal;ESR=Abnormal: 40 mm/h".
fn parse_lab(def: &ParameterDefinition, subs: &[String], s: &str) -> Result<LabResult, ValidationError> {
    let (head, note) = match s.split_once(':') {
        Some((h, n)) => (h.trim(), Some(n.trim()).filter(|n| !n.is_empty()).map(str::to_string)),
        None => (s, None),
    };
    let unknown = |raw: &str| ValidationError::UnknownEnumValue {
        key: def.key.clone(),
        raw: raw.to_string(),
        allowed: LAB_STATUSES.iter().map(|s| s.to_string()).collect(),
    };
    if !head.contains('=') {
        let status = LabStatus::parse(head).ok_or_else(|| unknown(head))?;
        let parts = subs.iter().map(|k| (k.clone(), status)).collect();
        return Ok(LabResult { status, parts, note });
    }
    let mut parts = BTreeMap::new();
    for item in head.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, st) = item.split_once('=').ok_or_else(|| unknown(item))?;
        let name = subs
            .iter()
            .find(|k| k.eq_ignore_ascii_case(name.trim()))
            .ok_or_else(|| ValidationError::UnknownEnumValue {
                key: def.key.clone(),
                raw: name.trim().to_string(),
                allowed: subs.to_vec(),
            })?;
        parts.insert(name.clone(), LabStatus::parse(st).ok_or_else(|| unknown(st))?);
    }
    for k in subs {
        parts.entry(k.clone()).or_insert(LabStatus::NotDone);
    }
    let status = if parts.values().any(|s| *s == LabStatus::Abnormal) {
        LabStatus::Abnormal
    } else if !parts.is_empty() && parts.values().all(|s| *s == LabStatus::Normal) {
        LabStatus::Normal
    } else {
        LabStatus::NotDone
    };
    Ok(LabResult { status, parts, note })
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("malformed catalog: {0}")]
    MalformedCatalog(String),
    #[error("catalog has {total} parameters ({one_time} one-time, {multiple_time} multiple-time); expected 45 (18 + 27)")]
    CatalogCountMismatch { total: usize, one_time: usize, multiple_time: usize },
    #[error("duplicate parameter key {0:?}")]
    DuplicateKey(String),
    #[error("reading catalog: {0}")]
    Io(#[from] std::io::Error),
}

impl CatalogError {
    pub fn code(&self) -> &'static str {
        match self {
            CatalogError::MalformedCatalog(_) => "MalformedCatalog",
            CatalogError::CatalogCountMismatch { .. } => "CatalogCountMismatch",
            CatalogError::DuplicateKey(_) => "DuplicateKey",
            CatalogError::Io(_) => "CatalogUnreadable",
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    catalog_version: u32,
    #[serde(rename = "parameter", default)]
    parameters: Vec<ParameterEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParameterEntry {
    key: String,
    display_name: Option<String>,
    area: Area,
    cardinality: Cardinality,
    kind: ValueKind,
    range: Option<NumericRange>,
    pattern: Option<String>,
}

/// The ordered, validated set of screening parameters.
#[derive(Debug, Clone)]
pub struct ParameterCatalog {
    version: u32,
    definitions: Vec<ParameterDefinition>,
    index: HashMap<String, usize>,
}

impl ParameterCatalog {
    /// Parses and validates a catalog document.
    pub fn from_toml(source: &str) -> Result<Self, CatalogError> {
        let file: CatalogFile =
            toml::from_str(source).map_err(|e| CatalogError::MalformedCatalog(e.to_string()))?;
        let mut definitions = Vec::with_capacity(file.parameters.len());
        let mut index = HashMap::new();
        for entry in file.parameters {
            if entry.key.trim().is_empty() {
                return Err(CatalogError::MalformedCatalog("empty parameter key".into()));
            }
            if index.contains_key(&entry.key) {
                return Err(CatalogError::DuplicateKey(entry.key));
            }
            if let ValueKind::Decimal { unit } = &entry.kind {
                if unit.trim().is_empty() {
                    return Err(CatalogError::MalformedCatalog(format!("{}: decimal without unit", entry.key)));
                }
            }
            if let ValueKind::Enumerated { values } = &entry.kind {
                if values.is_empty() {
                    return Err(CatalogError::MalformedCatalog(format!("{}: empty enumeration", entry.key)));
                }
            }
            if let Some(NumericRange { min: Some(lo), max: Some(hi) }) = entry.range {
                if lo > hi {
                    return Err(CatalogError::MalformedCatalog(format!("{}: range min > max", entry.key)));
                }
            }
            let pattern = entry
                .pattern
                .map(|p| Regex::new(&p))
                .transpose()
                .map_err(|e| CatalogError::MalformedCatalog(format!("{}: {e}", entry.key)))?;
            index.insert(entry.key.clone(), definitions.len());
            definitions.push(ParameterDefinition {
                display_name: entry.display_name.unwrap_or_else(|| entry.key.clone()),
                key: entry.key,
                area: entry.area,
                cardinality: entry.cardinality,
                value_kind: entry.kind,
                range: entry.range,
                pattern,
            });
        }
        let one_time = definitions.iter().filter(|d| d.is_one_time()).count();
        let multiple_time = definitions.len() - one_time;
        if definitions.len() != PARAMETER_COUNT || one_time != ONE_TIME_COUNT || multiple_time != MULTIPLE_TIME_COUNT {
            return Err(CatalogError::CatalogCountMismatch { total: definitions.len(), one_time, multiple_time });
        }
        for required in [KEY_STUDENT_NAME, KEY_SCREENING_ID, KEY_DATE_OF_BIRTH] {
            match index.get(required).map(|&i| &definitions[i]) {
                Some(d) if d.is_one_time() => {}
                _ => {
                    return Err(CatalogError::MalformedCatalog(format!(
                        "required one-time parameter {required:?} missing"
                    )))
                }
            }
        }
        if !matches!(index.get(KEY_DATE_OF_BIRTH).map(|&i| &definitions[i].value_kind), Some(ValueKind::Date)) {
            return Err(CatalogError::MalformedCatalog(format!("{KEY_DATE_OF_BIRTH:?} must be a date")));
        }
        Ok(ParameterCatalog { version: file.catalog_version, definitions, index })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// The catalog shipped with the crate.
    pub fn shipped() -> Self {
        Self::from_toml(DEFAULT_CATALOG).expect("shipped catalog is valid")
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn definitions(&self) -> &[ParameterDefinition] {
        &self.definitions
    }

    pub fn get(&self, key: &str) -> Option<&ParameterDefinition> {
        self.index.get(key).map(|&i| &self.definitions[i])
    }

    /// Position of `key` in catalog order.
    pub fn position(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.definitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.definitions.is_empty()
    }

    pub fn one_time(&self) -> impl Iterator<Item = &ParameterDefinition> {
        self.definitions.iter().filter(|d| d.is_one_time())
    }

    pub fn multiple_time(&self) -> impl Iterator<Item = &ParameterDefinition> {
        self.definitions.iter().filter(|d| !d.is_one_time())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(year: Option<i32>) -> EntryContext {
        EntryContext { recorded_at: Utc::now(), camp_year: year, recorded_by: "nurse-1".into() }
    }

    #[test]
    fn shipped_catalog_counts() {
        let c = ParameterCatalog::shipped();
        assert_eq!(c.len(), 45);
        assert_eq!(c.one_time().count(), 18);
        assert_eq!(c.multiple_time().count(), 27);
        assert_eq!(c.version(), 1);
    }

    #[test]
    fn duplicate_height_rejected() {
        let dup = DEFAULT_CATALOG.replace(
            "[[parameter]]\nkey = \"Weight\"",
            "[[parameter]]\nkey = \"Height\"",
        );
        assert!(matches!(ParameterCatalog::from_toml(&dup), Err(CatalogError::DuplicateKey(k)) if k == "Height"));
    }

    #[test]
    fn removing_birth_weight_breaks_counts() {
        let src = DEFAULT_CATALOG.replace(
            "[[parameter]]\nkey = \"Birth Weight\"\narea = \"GeneralInformation\"\ncardinality = \"OneTime\"\nkind = { type = \"Decimal\", unit = \"kg\" }\nrange = { min = 0.3, max = 7.0 }\n",
            "",
        );
        assert_ne!(src, DEFAULT_CATALOG);
        match ParameterCatalog::from_toml(&src) {
            Err(CatalogError::CatalogCountMismatch { total, one_time, multiple_time }) => {
                assert_eq!((total, one_time, multiple_time), (44, 17, 27));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_error_is_malformed() {
        assert!(matches!(
            ParameterCatalog::from_toml("catalog_version = [[["),
            Err(CatalogError::MalformedCatalog(_))
        ));
    }

    #[test]
    fn decimals_carry_units() {
        let c = ParameterCatalog::shipped();
        for d in c.definitions() {
            if let ValueKind::Decimal { unit } = &d.value_kind {
                assert!(!unit.is_empty(), "{}", d.key);
            }
        }
        assert_eq!(c.get("Height").unwrap().value_kind, ValueKind::Decimal { unit: "cm".into() });
        assert_eq!(c.get("Weight").unwrap().value_kind, ValueKind::Decimal { unit: "kg".into() });
    }

    #[test]
    fn height_parses_in_range() {
        let c = ParameterCatalog::shipped();
        let v = validate_value(c.get("Height").unwrap(), "142.5", &ctx(Some(2021))).unwrap();
        assert_eq!(v.value, Value::Decimal { amount: 142.5, unit: "cm".into() });
        assert_eq!(v.camp_year, Some(2021));
    }

    #[test]
    fn blood_group_parses() {
        let c = ParameterCatalog::shipped();
        let v = validate_value(c.get("Blood Group & RH Typing").unwrap(), "O+", &ctx(None)).unwrap();
        assert_eq!(v.value, Value::BloodGroup(BloodGroup::OPos));
        assert_eq!(c.get("Blood Group & RH Typing").unwrap().parse("ab negative").unwrap(), Value::BloodGroup(BloodGroup::AbNeg));
    }

    #[test]
    fn negative_height_out_of_range() {
        let c = ParameterCatalog::shipped();
        let err = validate_value(c.get("Height").unwrap(), "-3", &ctx(Some(2021))).unwrap_err();
        assert!(matches!(err, ValidationError::OutOfRange { value, .. } if value == -3.0));
    }

    #[test]
    fn type_and_enum_errors() {
        let c = ParameterCatalog::shipped();
        assert_eq!(c.get("Height").unwrap().parse("tall").unwrap_err().code(), "TypeMismatch");
        assert_eq!(c.get("Height").unwrap().parse("NaN").unwrap_err().code(), "TypeMismatch");
        assert_eq!(c.get("Vision Condition").unwrap().parse("Blurry").unwrap_err().code(), "UnknownEnumValue");
        assert_eq!(c.get("Vision Condition").unwrap().parse("normal").unwrap(), Value::Enumerated("Normal".into()));
        assert_eq!(c.get("Date of birth").unwrap().parse("2015-02-30").unwrap_err().code(), "TypeMismatch");
        assert_eq!(c.get("Screening ID").unwrap().parse("bad id!").unwrap_err().code(), "PatternMismatch");
        assert_eq!(c.get("Student Name").unwrap().parse("   ").unwrap_err().code(), "EmptyValue");
    }

    #[test]
    fn camp_year_iff_multiple_time() {
        let c = ParameterCatalog::shipped();
        assert!(matches!(
            validate_value(c.get("Height").unwrap(), "120", &ctx(None)),
            Err(ValidationError::MissingCampYear { .. })
        ));
        assert!(matches!(
            validate_value(c.get("Birth Weight").unwrap(), "3.1", &ctx(Some(2020))),
            Err(ValidationError::UnexpectedCampYear { .. })
        ));
    }

    #[test]
    fn cbc_and_esr_sub_results() {
        let c = ParameterCatalog::shipped();
        let def = c.get("CBC and ESR").unwrap();
        let Value::Lab(l) = def.parse("CBC=Normal; ESR=Abnormal: 40 mm/h").unwrap() else { panic!() };
        assert_eq!(l.status, LabStatus::Abnormal);
        assert_eq!(l.parts["CBC"], LabStatus::Normal);
        assert_eq!(l.note.as_deref(), Some("40 mm/h"));
        let Value::Lab(l) = def.parse("CBC=Normal").unwrap() else { panic!() };
        assert_eq!(l.status, LabStatus::NotDone);
        let Value::Lab(l) = def.parse("normal").unwrap() else { panic!() };
        assert_eq!(l.status, LabStatus::Normal);
        assert_eq!(l.parts.len(), 2);
        assert_eq!(def.parse("XYZ=Normal").unwrap_err().code(), "UnknownEnumValue");
    }

    #[test]
    fn rendering_round_trips() {
        let c = ParameterCatalog::shipped();
        let cases = [
            ("Height", "142.5"),
            ("History of Asthma", "Yes"),
            ("Blood Group & RH Typing", "AB-"),
            ("CBC and ESR", "CBC=Normal;ESR=Abnormal: 40 mm/h"),
            ("HbsAg", "Abnormal: reactive"),
            ("Date of birth", "2015-03-10"),
            ("Iodine [IQ Test]", "104"),
        ];
        for (key, raw) in cases {
            let def = c.get(key).unwrap();
            let v = def.parse(raw).unwrap();
            assert_eq!(def.parse(&v.render()).unwrap(), v, "{key}");
        }
    }
}
