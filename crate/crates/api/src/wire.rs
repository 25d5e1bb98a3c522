//! Request and response bodies.
//!
//! Every response object is wrapped in [`Envelope`], which adds
//! `api_version` next to the body's own fields.

use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDate, Utc};
use hmms_core::access::{MinimalView, Principal, Role};
use hmms_core::catalog::{Area, Cardinality, NumericRange, ParameterDefinition, ParameterValue, ValueKind};
use hmms_core::immunization::{DoseEvent, ImmunizationStatus};
use hmms_core::record::{Referral, ReferralStatus, StudentRecord};
use hmms_core::screening::{Finding, Ruleset};
use serde::{Deserialize, Serialize};

use crate::API_VERSION;

#[derive(Debug, Serialize)]
pub struct Envelope<T> {
    pub api_version: &'static str,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Envelope<T> {
    pub fn new(body: T) -> Self {
        Envelope { api_version: API_VERSION, body }
    }
}

// -- requests ---------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoginRequest {
    pub principal_id: String,
    pub password: String,
}

/// `identity` maps one-time catalog keys to raw values. Student Name,
/// Screening ID and Date of birth are required.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterRequest {
    pub rfid_token: String,
    pub identity: BTreeMap<String, String>,
}

/// `camp_year` defaults to the current year for multiple-time keys and must
/// be absent for one-time keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueRequest {
    pub key: String,
    pub value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camp_year: Option<i32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditRequest {
    pub value: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoseRequest {
    pub vaccine_code: String,
    pub dose_number: u32,
    pub given_on: NaiveDate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PunchRequest {
    pub rfid_token: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub as_of: Option<NaiveDate>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferralUpdate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<ReferralStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doctor_notes: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaffRequest {
    pub principal_id: String,
    pub display_name: String,
    pub role: Role,
    pub password: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screening_id: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaffUpdate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub password: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RulesetRequest {
    /// Ruleset file contents (TOML).
    pub source: String,
}

// -- responses --------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrincipalOut {
    pub principal_id: String,
    pub display_name: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screening_id: Option<String>,
}

impl From<&Principal> for PrincipalOut {
    fn from(p: &Principal) -> Self {
        PrincipalOut {
            principal_id: p.principal_id.clone(),
            display_name: p.display_name.clone(),
            role: p.role,
            screening_id: p.screening_id.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct LoginResponse {
    pub token: String,
    pub expires_at: DateTime<Utc>,
    pub principal: PrincipalOut,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasicInfo {
    pub screening_id: String,
    pub student_name: Option<String>,
    pub date_of_birth: Option<NaiveDate>,
    pub present_class: Option<String>,
}

impl From<&StudentRecord> for BasicInfo {
    fn from(r: &StudentRecord) -> Self {
        BasicInfo {
            screening_id: r.screening_id.clone(),
            student_name: r.student_name().map(str::to_string),
            date_of_birth: r.date_of_birth(),
            present_class: r.latest(hmms_core::catalog::KEY_PRESENT_CLASS).map(|v| v.value.render()),
        }
    }
}

/// A student's health record as staff see it. `recent` holds the latest
/// value of every multiple-time parameter; `old` holds the earlier values
/// and is present only for callers allowed to see old health data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudentDetail {
    pub screening_id: String,
    pub rfid_token: String,
    pub one_time: BTreeMap<String, ParameterValue>,
    pub recent: BTreeMap<String, ParameterValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old: Option<BTreeMap<String, Vec<ParameterValue>>>,
    pub bmi: Option<String>,
    pub doses: Vec<DoseEvent>,
    pub immunization: Option<ImmunizationStatus>,
    pub referrals: Vec<Referral>,
}

#[derive(Debug, Serialize)]
pub struct StudentResponse {
    pub student: StudentDetail,
}

#[derive(Debug, Serialize)]
pub struct BasicResponse {
    pub student: BasicInfo,
}

#[derive(Debug, Serialize)]
pub struct SearchResponse {
    pub students: Vec<BasicInfo>,
}

#[derive(Debug, Serialize)]
pub struct HistoryResponse {
    pub screening_id: String,
    pub observations: BTreeMap<String, Vec<ParameterValue>>,
}

#[derive(Debug, Serialize)]
pub struct ScreenResponse {
    pub screening_id: String,
    pub as_of: NaiveDate,
    pub findings: Vec<Finding>,
    pub referral: Option<Referral>,
}

#[derive(Debug, Serialize)]
pub struct ReferralsResponse {
    pub referrals: Vec<Referral>,
}

#[derive(Debug, Serialize)]
pub struct ReferralResponse {
    pub referral: Referral,
}

#[derive(Debug, Serialize)]
pub struct MinimalResponse {
    pub view: MinimalView,
}

#[derive(Debug, Serialize)]
pub struct StaffResponse {
    pub principal: PrincipalOut,
}

#[derive(Debug, Serialize)]
pub struct StaffListResponse {
    pub principals: Vec<PrincipalOut>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub key: String,
    pub display_name: String,
    pub area: Area,
    pub cardinality: Cardinality,
    pub kind: ValueKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<NumericRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
}

impl From<&ParameterDefinition> for CatalogEntry {
    fn from(d: &ParameterDefinition) -> Self {
        CatalogEntry {
            key: d.key.clone(),
            display_name: d.display_name.clone(),
            area: d.area,
            cardinality: d.cardinality,
            kind: d.value_kind.clone(),
            range: d.range,
            pattern: d.pattern.as_ref().map(|p| p.as_str().to_string()),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CatalogResponse {
    pub catalog_version: u32,
    pub parameters: Vec<CatalogEntry>,
}

#[derive(Debug, Serialize)]
pub struct RulesetResponse {
    pub ruleset: Ruleset,
}

#[derive(Debug, Serialize)]
pub struct StatusResponse {
    pub status: &'static str,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Done {
    pub ok: bool,
}
