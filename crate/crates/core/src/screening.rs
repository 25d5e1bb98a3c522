//! Clinical screening rules and their evaluation.
//!
//! A ruleset is configuration: each rule names a catalog parameter (or one
//! of the derived keys [`KEY_IMMUNIZATION`] and [`KEY_DERIVED_BMI`]) and a
//! predicate. Screening a student yields one [`Finding`] per rule and a
//! [`Referral`] exactly when some finding fails.
//!
//! Missing measurements are reported as `Warn` ("not measured") rather than
//! `Fail`; only a measured value that violates a rule sends the student to
//! the doctor.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{
    LabStatus, ParameterCatalog, ValueKind, KEY_BMI, KEY_HEIGHT, KEY_VACCINATION_STATUS, KEY_WEIGHT,
};
use crate::immunization::{evaluate_immunization, DoseState, ImmunizationError, ImmunizationSchedule, Overall};
use crate::measures::{age_at, compute_bmi};
use crate::record::{Referral, ReferralStatus, StudentRecord};

/// Derived key evaluated from the dose history.
pub const KEY_IMMUNIZATION: &str = "immunization";
/// Derived key computed from the latest height and weight.
pub const KEY_DERIVED_BMI: &str = "bmi";

pub const DEFAULT_RULESET: &str = include_str!("../data/ruleset.toml");
pub const DEFAULT_LAB_TESTS: &str = include_str!("../data/lab_tests.toml");

pub const NOT_MEASURED: &str = "not measured";
pub const NO_APPLICABLE_BAND: &str = "no applicable band";

// ---------------------------------------------------------------------------
// Laboratory test reference table

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabTest {
    pub name: String,
    #[serde(default)]
    pub parameters: Vec<String>,
    pub purpose: String,
    pub diseases: Vec<String>,
}

/// Test name to disease hints, plus the catalog parameters each test feeds.
#[derive(Debug, Clone, PartialEq)]
pub struct LabTestTable {
    tests: Vec<LabTest>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabTestFile {
    #[allow(dead_code)]
    table_version: u32,
    #[serde(rename = "test", default)]
    tests: Vec<LabTest>,
}

impl LabTestTable {
    pub fn from_toml(source: &str) -> Result<Self, RulesetError> {
        let file: LabTestFile = toml::from_str(source).map_err(|e| RulesetError::Malformed(e.to_string()))?;
        let mut names = HashSet::new();
        for t in &file.tests {
            if !names.insert(t.name.as_str()) {
                return Err(RulesetError::Malformed(format!("lab test {:?} listed twice", t.name)));
            }
        }
        Ok(LabTestTable { tests: file.tests })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RulesetError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn shipped() -> Self {
        Self::from_toml(DEFAULT_LAB_TESTS).expect("shipped lab test table is valid")
    }

    pub fn tests(&self) -> &[LabTest] {
        &self.tests
    }

    pub fn test(&self, name: &str) -> Option<&LabTest> {
        self.tests.iter().find(|t| t.name == name)
    }

    /// Disease hints for a test name. Unknown names give an empty list.
    pub fn lookup_disease_hints(&self, test_key: &str) -> Vec<String> {
        self.test(test_key).map(|t| t.diseases.clone()).unwrap_or_default()
    }

    /// Hints from every test that reports into catalog parameter `key`.
    pub fn hints_for_parameter(&self, key: &str) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in self.tests.iter().filter(|t| t.parameters.iter().any(|p| p == key)) {
            for d in &t.diseases {
                if !out.contains(d) {
                    out.push(d.clone());
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Rules

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Fail,
    Warn,
}

/// Numeric bounds that apply to students whose completed age in years is
/// within `[age_min, age_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgeBand {
    pub age_min: u32,
    pub age_max: u32,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Predicate {
    /// Value within `[min, max]`, or within the bounds of the band matching
    /// the student's age when `bands` is non-empty.
    NumericRange {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        bands: Vec<AgeBand>,
    },
    MustEqual {
        value: String,
    },
    MustBeComplete,
    RequiredPresent,
}

impl Predicate {
    pub fn name(&self) -> &'static str {
        match self {
            Predicate::NumericRange { .. } => "numeric_range",
            Predicate::MustEqual { .. } => "must_equal",
            Predicate::MustBeComplete => "must_be_complete",
            Predicate::RequiredPresent => "required_present",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClinicalRule {
    #[serde(rename = "id")]
    pub rule_id: String,
    #[serde(rename = "parameter")]
    pub parameter_key: String,
    pub predicate: Predicate,
    #[serde(rename = "severity")]
    pub severity_on_fail: Severity,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[serde(tag = "code")]
pub enum RuleError {
    #[error("rule {rule_id}: unknown parameter {key:?}")]
    UnresolvedRuleKey { rule_id: String, key: String },
    #[error("rule {rule_id}: {predicate} cannot apply to {key:?} ({kind})")]
    PredicateTypeMismatch { rule_id: String, key: String, predicate: &'static str, kind: String },
    #[error("rule {rule_id}: {reason}")]
    InvalidRange { rule_id: String, reason: String },
    #[error("rule {rule_id}: {value:?} is not a possible value of {key:?}")]
    ValueNotAllowed { rule_id: String, key: String, value: String },
    #[error("rule id {rule_id} used twice")]
    DuplicateRuleId { rule_id: String },
}

impl RuleError {
    pub fn code(&self) -> &'static str {
        match self {
            RuleError::UnresolvedRuleKey { .. } => "UnresolvedRuleKey",
            RuleError::PredicateTypeMismatch { .. } => "PredicateTypeMismatch",
            RuleError::InvalidRange { .. } => "InvalidRange",
            RuleError::ValueNotAllowed { .. } => "ValueNotAllowed",
            RuleError::DuplicateRuleId { .. } => "DuplicateRuleId",
        }
    }
}

#[derive(Debug, Error)]
pub enum RulesetError {
    #[error("malformed ruleset: {0}")]
    Malformed(String),
    #[error("ruleset invalid: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<RuleError>),
    #[error("reading ruleset: {0}")]
    Io(#[from] std::io::Error),
}

impl RulesetError {
    pub fn code(&self) -> &'static str {
        match self {
            RulesetError::Malformed(_) => "MalformedRuleset",
            RulesetError::Invalid(_) => "InvalidRuleset",
            RulesetError::Io(_) => "RulesetUnreadable",
        }
    }
}

/// What a rule's key refers to.
enum Target<'a> {
    Immunization,
    Bmi,
    Parameter(&'a crate::catalog::ParameterDefinition),
}

fn resolve<'a>(catalog: &'a ParameterCatalog, key: &str) -> Option<Target<'a>> {
    match key {
        KEY_IMMUNIZATION => Some(Target::Immunization),
        KEY_DERIVED_BMI => Some(Target::Bmi),
        _ => catalog.get(key).map(Target::Parameter),
    }
}

fn check_bounds(rule_id: &str, min: Option<f64>, max: Option<f64>) -> Result<(), RuleError> {
    if min.is_none() && max.is_none() {
        return Err(RuleError::InvalidRange { rule_id: rule_id.into(), reason: "no bounds given".into() });
    }
    if min.is_some_and(|m| !m.is_finite()) || max.is_some_and(|m| !m.is_finite()) {
        return Err(RuleError::InvalidRange { rule_id: rule_id.into(), reason: "bounds must be finite".into() });
    }
    if let (Some(lo), Some(hi)) = (min, max) {
        if lo >= hi {
            return Err(RuleError::InvalidRange { rule_id: rule_id.into(), reason: format!("min {lo} >= max {hi}") });
        }
    }
    Ok(())
}

fn check_rule(rule: &ClinicalRule, catalog: &ParameterCatalog) -> Result<(), RuleError> {
    let Some(target) = resolve(catalog, &rule.parameter_key) else {
        return Err(RuleError::UnresolvedRuleKey { rule_id: rule.rule_id.clone(), key: rule.parameter_key.clone() });
    };
    let mismatch = |kind: &str| RuleError::PredicateTypeMismatch {
        rule_id: rule.rule_id.clone(),
        key: rule.parameter_key.clone(),
        predicate: rule.predicate.name(),
        kind: kind.to_string(),
    };
    match (&rule.predicate, &target) {
        (Predicate::MustBeComplete, Target::Immunization) => Ok(()),
        (Predicate::MustBeComplete, Target::Bmi) => Err(mismatch("derived bmi")),
        (Predicate::MustBeComplete, Target::Parameter(d)) => Err(mismatch(d.value_kind.name())),
        (_, Target::Immunization) => Err(mismatch("immunization status")),
        (Predicate::RequiredPresent, _) => Ok(()),
        (Predicate::NumericRange { min, max, bands }, t) => {
            if let Target::Parameter(d) = t {
                if !d.value_kind.is_numeric() {
                    return Err(mismatch(d.value_kind.name()));
                }
            }
            if bands.is_empty() {
                return check_bounds(&rule.rule_id, *min, *max);
            }
            if min.is_some() || max.is_some() {
                return Err(RuleError::InvalidRange {
                    rule_id: rule.rule_id.clone(),
                    reason: "give either bands or top-level bounds, not both".into(),
                });
            }
            for (i, b) in bands.iter().enumerate() {
                if b.age_min > b.age_max {
                    return Err(RuleError::InvalidRange {
                        rule_id: rule.rule_id.clone(),
                        reason: format!("band {}..{} has age_min > age_max", b.age_min, b.age_max),
                    });
                }
                check_bounds(&rule.rule_id, b.min, b.max)?;
                if bands[..i].iter().any(|o| o.age_min <= b.age_max && b.age_min <= o.age_max) {
                    return Err(RuleError::InvalidRange {
                        rule_id: rule.rule_id.clone(),
                        reason: format!("band {}..{} overlaps another band", b.age_min, b.age_max),
                    });
                }
            }
            Ok(())
        }
        (Predicate::MustEqual { value }, Target::Parameter(d)) => {
            let allowed: Vec<String> = match &d.value_kind {
                ValueKind::Enumerated { values } => values.clone(),
                ValueKind::Boolean => vec!["Yes".into(), "No".into()],
                ValueKind::LabTest { .. } => {
                    [LabStatus::Normal, LabStatus::Abnormal].iter().map(|s| s.as_str().to_string()).collect()
                }
                other => return Err(mismatch(other.name())),
            };
            if allowed.iter().any(|a| a == value) {
                Ok(())
            } else {
                Err(RuleError::ValueNotAllowed {
                    rule_id: rule.rule_id.clone(),
                    key: rule.parameter_key.clone(),
                    value: value.clone(),
                })
            }
        }
        (Predicate::MustEqual { .. }, Target::Bmi) => Err(mismatch("derived bmi")),
    }
}

/// Checks every rule against the catalog; all problems are collected.
pub fn validate_ruleset(rules: &[ClinicalRule], catalog: &ParameterCatalog) -> Result<(), Vec<RuleError>> {
    let mut errors = Vec::new();
    let mut ids = HashSet::new();
    for rule in rules {
        if !ids.insert(rule.rule_id.as_str()) {
            errors.push(RuleError::DuplicateRuleId { rule_id: rule.rule_id.clone() });
        }
        if let Err(e) = check_rule(rule, catalog) {
            errors.push(e);
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

/// A versioned, validated list of rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ruleset {
    pub ruleset_version: u32,
    #[serde(default)]
    pub label: String,
    #[serde(rename = "rule", default)]
    pub rules: Vec<ClinicalRule>,
}

impl Ruleset {
    pub fn parse(source: &str) -> Result<Self, RulesetError> {
        toml::from_str(source).map_err(|e| RulesetError::Malformed(e.to_string()))
    }

    /// Parses and validates against `catalog`.
    pub fn from_toml(source: &str, catalog: &ParameterCatalog) -> Result<Self, RulesetError> {
        let rs = Self::parse(source)?;
        validate_ruleset(&rs.rules, catalog).map_err(RulesetError::Invalid)?;
        Ok(rs)
    }

    pub fn load(path: impl AsRef<Path>, catalog: &ParameterCatalog) -> Result<Self, RulesetError> {
        Self::from_toml(&std::fs::read_to_string(path)?, catalog)
    }

    pub fn shipped(catalog: &ParameterCatalog) -> Self {
        Self::from_toml(DEFAULT_RULESET, catalog).expect("shipped ruleset is valid")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("ruleset serializes")
    }
}

// ---------------------------------------------------------------------------
// Evaluation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub rule_id: String,
    pub parameter_key: String,
    /// Rendered observed value; absent when nothing was measured.
    pub observed: Option<String>,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub disease_hints: Vec<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningOutcome {
    pub screening_id: String,
    pub as_of: NaiveDate,
    pub findings: Vec<Finding>,
    pub referral: Option<Referral>,
}

impl ScreeningOutcome {
    pub fn failed(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.verdict == Verdict::Fail)
    }
}

#[derive(Debug, Error)]
pub enum ScreeningError {
    #[error("rule {rule_id}: parameter {key:?} not in catalog")]
    UnresolvedRuleKey { rule_id: String, key: String },
    #[error("evaluating immunization: {0}")]
    Immunization(#[from] ImmunizationError),
}

impl ScreeningError {
    pub fn code(&self) -> &'static str {
        match self {
            ScreeningError::UnresolvedRuleKey { .. } => "UnresolvedRuleKey",
            ScreeningError::Immunization(e) => e.code(),
        }
    }
}

/// Reference data a screening runs against.
#[derive(Debug, Clone, Copy)]
pub struct ScreeningContext<'a> {
    pub catalog: &'a ParameterCatalog,
    pub schedule: &'a ImmunizationSchedule,
    pub lab_tests: &'a LabTestTable,
}

struct Observation {
    observed: Option<String>,
    verdict: Verdict,
    message: String,
}

impl Observation {
    fn pass(observed: String) -> Self {
        Observation { observed: Some(observed), verdict: Verdict::Pass, message: "pass".into() }
    }

    fn warn(observed: Option<String>, message: impl Into<String>) -> Self {
        Observation { observed, verdict: Verdict::Warn, message: message.into() }
    }

    fn failed(rule: &ClinicalRule, observed: Option<String>, detail: String) -> Self {
        let verdict = match rule.severity_on_fail {
            Severity::Fail => Verdict::Fail,
            Severity::Warn => Verdict::Warn,
        };
        let message = if detail.is_empty() { rule.message.clone() } else { format!("{} ({detail})", rule.message) };
        Observation { observed, verdict, message }
    }
}

fn check_numeric(rule: &ClinicalRule, x: f64, observed: String, age_years: Option<u32>) -> Observation {
    let Predicate::NumericRange { min, max, bands } = &rule.predicate else {
        unreachable!("caller matched numeric_range")
    };
    let (lo, hi) = if bands.is_empty() {
        (*min, *max)
    } else {
        let Some(age) = age_years else {
            return Observation::warn(Some(observed), "date of birth not recorded; age band unknown");
        };
        match bands.iter().find(|b| (b.age_min..=b.age_max).contains(&age)) {
            Some(b) => (b.min, b.max),
            None => return Observation::warn(Some(observed), NO_APPLICABLE_BAND),
        }
    };
    let below = lo.is_some_and(|lo| x < lo);
    let above = hi.is_some_and(|hi| x > hi);
    if below || above {
        let bound = |b: Option<f64>| b.map_or("-".to_string(), |v| v.to_string());
        Observation::failed(rule, Some(observed), format!("expected [{}, {}]", bound(lo), bound(hi)))
    } else {
        Observation::pass(observed)
    }
}

fn evaluate_rule(
    rule: &ClinicalRule,
    student: &StudentRecord,
    ctx: &ScreeningContext<'_>,
    as_of: NaiveDate,
) -> Result<Observation, ScreeningError> {
    let dob = student.date_of_birth();
    let age_years = dob.and_then(|d| age_at(d, as_of).ok()).map(|a| a.years);

    match rule.parameter_key.as_str() {
        KEY_IMMUNIZATION => {
            let Some(dob) = dob else {
                return Ok(Observation::warn(None, "date of birth not recorded"));
            };
            if as_of < dob {
                return Ok(Observation::warn(None, "screening date before date of birth"));
            }
            let status = evaluate_immunization(dob, &student.doses, ctx.schedule, as_of)?;
            let observed = Some(status.overall.to_string());
            Ok(match status.overall {
                Overall::Complete => Observation::pass(status.overall.to_string()),
                Overall::PendingOnly => Observation::warn(observed, "doses pending, not yet overdue"),
                Overall::Incomplete => {
                    let overdue: Vec<String> = status
                        .per_dose
                        .iter()
                        .filter(|d| d.state == DoseState::Overdue)
                        .map(|d| format!("{} dose {}", d.vaccine_code, d.dose_number))
                        .collect();
                    Observation::failed(rule, observed, format!("overdue: {}", overdue.join(", ")))
                }
            })
        }
        KEY_DERIVED_BMI => {
            let h = student.latest_as_of(KEY_HEIGHT, as_of).and_then(|v| v.value.as_f64());
            let w = student.latest_as_of(KEY_WEIGHT, as_of).and_then(|v| v.value.as_f64());
            let bmi = match (w, h) {
                (Some(w), Some(h)) => compute_bmi(w, h).ok(),
                _ => None,
            };
            let Some(bmi) = bmi else {
                return Ok(match rule.predicate {
                    Predicate::RequiredPresent => Observation::failed(rule, None, NOT_MEASURED.into()),
                    _ => Observation::warn(None, NOT_MEASURED),
                });
            };
            Ok(match rule.predicate {
                Predicate::NumericRange { .. } => check_numeric(rule, bmi.rounded(), bmi.to_string(), age_years),
                _ => Observation::pass(bmi.to_string()),
            })
        }
        key => {
            if ctx.catalog.get(key).is_none() {
                return Err(ScreeningError::UnresolvedRuleKey { rule_id: rule.rule_id.clone(), key: key.into() });
            }
            let value = student.value_as_of(key, as_of).map(|v| &v.value);
            let not_done = matches!(value, Some(crate::catalog::Value::Lab(l)) if l.status == LabStatus::NotDone);
            let Some(value) = value.filter(|_| !not_done) else {
                let observed = value.map(|v| v.render());
                return Ok(match rule.predicate {
                    Predicate::RequiredPresent => Observation::failed(rule, observed, NOT_MEASURED.into()),
                    _ => Observation::warn(observed, NOT_MEASURED),
                });
            };
            let observed = value.render();
            Ok(match &rule.predicate {
                Predicate::RequiredPresent => Observation::pass(observed),
                Predicate::NumericRange { .. } => match value.as_f64() {
                    Some(x) => check_numeric(rule, x, observed, age_years),
                    None => Observation::warn(Some(observed), "value is not numeric"),
                },
                Predicate::MustEqual { value: expected } => {
                    if value.as_token() == Some(expected.as_str()) {
                        Observation::pass(observed)
                    } else {
                        Observation::failed(rule, Some(observed), format!("expected {expected}"))
                    }
                }
                Predicate::MustBeComplete => Observation::warn(Some(observed), "predicate does not apply"),
            })
        }
    }
}

fn order_position(catalog: &ParameterCatalog, key: &str) -> usize {
    let anchor = match key {
        KEY_IMMUNIZATION => KEY_VACCINATION_STATUS,
        KEY_DERIVED_BMI => KEY_BMI,
        k => k,
    };
    catalog.position(anchor).unwrap_or(usize::MAX)
}

/// Screens one student. Findings are ordered by catalog position of the
/// rule's parameter, then rule id. The returned referral (if any) holds
/// exactly the failed findings.
pub fn run_screening(
    student: &StudentRecord,
    rules: &[ClinicalRule],
    ctx: &ScreeningContext<'_>,
    as_of: NaiveDate,
    now: DateTime<Utc>,
) -> Result<ScreeningOutcome, ScreeningError> {
    let mut ordered: Vec<&ClinicalRule> = rules.iter().collect();
    ordered.sort_by(|a, b| {
        order_position(ctx.catalog, &a.parameter_key)
            .cmp(&order_position(ctx.catalog, &b.parameter_key))
            .then_with(|| a.rule_id.cmp(&b.rule_id))
    });

    let mut findings = Vec::with_capacity(ordered.len());
    for rule in ordered {
        let obs = evaluate_rule(rule, student, ctx, as_of)?;
        let disease_hints = if obs.verdict == Verdict::Pass {
            Vec::new()
        } else {
            ctx.lab_tests.hints_for_parameter(&rule.parameter_key)
        };
        findings.push(Finding {
            rule_id: rule.rule_id.clone(),
            parameter_key: rule.parameter_key.clone(),
            observed: obs.observed,
            verdict: obs.verdict,
            disease_hints,
            message: obs.message,
        });
    }

    let failed: Vec<Finding> = findings.iter().filter(|f| f.verdict == Verdict::Fail).cloned().collect();
    let referral = (!failed.is_empty()).then(|| Referral {
        referral_id: uuid::Uuid::new_v4().to_string(),
        screening_id: student.screening_id.clone(),
        created_at: now,
        findings: failed,
        status: ReferralStatus::Open,
        doctor_notes: None,
    });
    Ok(ScreeningOutcome { screening_id: student.screening_id.clone(), as_of, findings, referral })
}

/// Verdict counts, for reports.
pub fn tally(findings: &[Finding]) -> BTreeMap<&'static str, usize> {
    let mut out = BTreeMap::from([("pass", 0), ("warn", 0), ("fail", 0)]);
    for f in findings {
        let k = match f.verdict {
            Verdict::Pass => "pass",
            Verdict::Warn => "warn",
            Verdict::Fail => "fail",
        };
        *out.get_mut(k).unwrap() += 1;
    }
    out
}
