//! Roles, the permission matrix, and the student/parent minimal view.
//!
//! Four roles exist. Admins manage staff and may delete health data; nurses
//! find students, enter and edit camp data and run screenings; doctors find
//! students and read and print recent and old data; students (and their
//! parents, who share the credential) see a minimal summary of their own
//! record. Anything not granted is denied.

use std::fmt;
use std::str::FromStr;

use argon2::password_hash::phc::PasswordHash;
use argon2::password_hash::{PasswordHasher, PasswordVerifier};
use argon2::{Algorithm, Argon2, Params, Version};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::catalog::{Value, KEY_HEIGHT, KEY_PRESENT_CLASS, KEY_WEIGHT};
use crate::immunization::{evaluate_immunization, ImmunizationSchedule, Overall};
use crate::measures::compute_bmi;
use crate::record::{ReferralStatus, StudentRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Admin,
    Nurse,
    Doctor,
    Student,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Admin, Role::Nurse, Role::Doctor, Role::Student];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Admin => "Admin",
            Role::Nurse => "Nurse",
            Role::Doctor => "Doctor",
            Role::Student => "Student",
        }
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown role {s:?}"))
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    ManageStaff,
    ViewBasicInfo,
    ViewHealthData,
    ViewOldHealthData,
    InputHealthData,
    EditHealthData,
    PrintHealthData,
    DeleteHealthData,
    PunchCard,
    SearchStudent,
    ViewMinimalSelf,
    RunScreening,
    ManageRulesets,
    ExportCohort,
}

impl Action {
    pub const ALL: [Action; 14] = [
        Action::ManageStaff,
        Action::ViewBasicInfo,
        Action::ViewHealthData,
        Action::ViewOldHealthData,
        Action::InputHealthData,
        Action::EditHealthData,
        Action::PrintHealthData,
        Action::DeleteHealthData,
        Action::PunchCard,
        Action::SearchStudent,
        Action::ViewMinimalSelf,
        Action::RunScreening,
        Action::ManageRulesets,
        Action::ExportCohort,
    ];
}

const ADMIN: &[Action] = &[
    Action::ManageStaff,
    Action::ViewBasicInfo,
    Action::ViewHealthData,
    Action::DeleteHealthData,
    Action::ManageRulesets,
    Action::ExportCohort,
];
const NURSE: &[Action] = &[
    Action::SearchStudent,
    Action::PunchCard,
    Action::ViewBasicInfo,
    Action::ViewHealthData,
    Action::InputHealthData,
    Action::EditHealthData,
    Action::PrintHealthData,
    Action::RunScreening,
];
const DOCTOR: &[Action] = &[
    Action::SearchStudent,
    Action::PunchCard,
    Action::ViewBasicInfo,
    Action::ViewHealthData,
    Action::ViewOldHealthData,
    Action::PrintHealthData,
];
const STUDENT: &[Action] = &[Action::ViewMinimalSelf];

/// Actions granted to `role`.
pub fn grants(role: Role) -> &'static [Action] {
    match role {
        Role::Admin => ADMIN,
        Role::Nurse => NURSE,
        Role::Doctor => DOCTOR,
        Role::Student => STUDENT,
    }
}

/// An authenticated actor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Principal {
    pub principal_id: String,
    pub display_name: String,
    pub role: Role,
    pub credential_hash: String,
    /// Linked student, for the Student role only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screening_id: Option<String>,
}

impl Principal {
    /// Checks the role/link invariant.
    pub fn check(&self) -> Result<(), String> {
        if self.principal_id.trim().is_empty() {
            return Err("principal id is empty".into());
        }
        match (self.role, &self.screening_id) {
            (Role::Student, None) => Err("student principals must link a screening id".into()),
            (Role::Student, Some(_)) => Ok(()),
            (_, Some(_)) => Err("only student principals link a screening id".into()),
            (_, None) => Ok(()),
        }
    }

    pub fn verify_password(&self, password: &str) -> bool {
        verify_password(&self.credential_hash, password)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DenyReason {
    /// The role's grant list does not include the action.
    NotGranted,
    /// A student asked for someone else's record.
    NotOwnRecord,
}

impl DenyReason {
    pub fn code(self) -> &'static str {
        match self {
            DenyReason::NotGranted => "NotGranted",
            DenyReason::NotOwnRecord => "NotOwnRecord",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Allow,
    Deny(DenyReason),
}

impl Decision {
    pub fn is_allowed(self) -> bool {
        self == Decision::Allow
    }
}

/// Decides whether `principal` may perform `action` on the student
/// identified by `target` (if any).
pub fn authorize(principal: &Principal, action: Action, target: Option<&str>) -> Decision {
    authorize_role(principal.role, principal.screening_id.as_deref(), action, target)
}

/// [`authorize`] on bare role data.
pub fn authorize_role(role: Role, linked: Option<&str>, action: Action, target: Option<&str>) -> Decision {
    if !grants(role).contains(&action) {
        return Decision::Deny(DenyReason::NotGranted);
    }
    if role == Role::Student {
        match (linked, target) {
            (None, _) => return Decision::Deny(DenyReason::NotOwnRecord),
            (Some(own), Some(t)) if own != t => return Decision::Deny(DenyReason::NotOwnRecord),
            _ => {}
        }
    }
    Decision::Allow
}

// ---------------------------------------------------------------------------
// Credentials

/// Argon2id cost settings.
#[derive(Debug, Clone, Copy)]
pub struct HashCost {
    pub memory_kib: u32,
    pub iterations: u32,
}

impl Default for HashCost {
    fn default() -> Self {
        HashCost { memory_kib: 19 * 1024, iterations: 2 }
    }
}

impl HashCost {
    /// Cheap settings for tests and benchmarks.
    pub const LOW: HashCost = HashCost { memory_kib: 256, iterations: 1 };
}

/// Salted Argon2id hash in PHC string form.
pub fn hash_password(password: &str, cost: HashCost) -> String {
    let params = Params::new(cost.memory_kib, cost.iterations, 1, None).expect("valid argon2 params");
    Argon2::new(Algorithm::Argon2id, Version::V0x13, params)
        .hash_password(password.as_bytes())
        .expect("argon2 hashing")
        .to_string()
}

pub fn verify_password(phc: &str, password: &str) -> bool {
    PasswordHash::new(phc)
        .map(|parsed| Argon2::default().verify_password(password.as_bytes(), &parsed).is_ok())
        .unwrap_or(false)
}

// ---------------------------------------------------------------------------
// Minimal view

/// Fields a student or parent may see. Nothing else leaves the record.
pub const MINIMAL_VIEW_FIELDS: [&str; 9] = [
    "student_name",
    "screening_id",
    "present_class",
    "height_cm",
    "weight_kg",
    "bmi",
    "immunization",
    "notices",
    "suggestions",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notice {
    pub referral_id: String,
    pub status: ReferralStatus,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalView {
    pub student_name: Option<String>,
    pub screening_id: String,
    pub present_class: Option<String>,
    pub height_cm: Option<f64>,
    pub weight_kg: Option<f64>,
    pub bmi: Option<String>,
    pub immunization: Option<Overall>,
    /// One per referral that is not closed.
    pub notices: Vec<Notice>,
    /// Doctor notes from any referral.
    pub suggestions: Vec<String>,
}

/// Reduction to the minimal view. Applying it to a view is the identity.
pub trait MinimalProjection {
    fn minimal_view(&self, schedule: &ImmunizationSchedule, as_of: NaiveDate) -> MinimalView;
}

impl MinimalProjection for StudentRecord {
    fn minimal_view(&self, schedule: &ImmunizationSchedule, as_of: NaiveDate) -> MinimalView {
        minimal_view(self, schedule, as_of)
    }
}

impl MinimalProjection for MinimalView {
    fn minimal_view(&self, _: &ImmunizationSchedule, _: NaiveDate) -> MinimalView {
        MinimalView {
            notices: self.notices.iter().filter(|n| n.status != ReferralStatus::Closed).cloned().collect(),
            ..self.clone()
        }
    }
}

pub fn minimal_view(record: &StudentRecord, schedule: &ImmunizationSchedule, as_of: NaiveDate) -> MinimalView {
    let number = |key: &str| record.latest_as_of(key, as_of).and_then(|v| v.value.as_f64());
    let height_cm = number(KEY_HEIGHT);
    let weight_kg = number(KEY_WEIGHT);
    let bmi = match (weight_kg, height_cm) {
        (Some(w), Some(h)) => compute_bmi(w, h).ok().map(|b| b.to_string()),
        _ => None,
    };
    let present_class = record.latest_as_of(KEY_PRESENT_CLASS, as_of).map(|v| match &v.value {
        Value::Text(s) => s.clone(),
        other => other.render(),
    });
    let immunization = if record.doses.is_empty() && !record.has_health_data() {
        None
    } else {
        record
            .date_of_birth()
            .and_then(|dob| evaluate_immunization(dob, &record.doses, schedule, as_of).ok())
            .map(|s| s.overall)
    };
    MinimalView {
        student_name: record.student_name().map(str::to_string),
        screening_id: record.screening_id.clone(),
        present_class,
        height_cm,
        weight_kg,
        bmi,
        immunization,
        notices: record
            .referrals
            .iter()
            .filter(|r| r.status != ReferralStatus::Closed)
            .map(|r| Notice { referral_id: r.referral_id.clone(), status: r.status, text: r.notice() })
            .collect(),
        suggestions: record.referrals.iter().filter_map(|r| r.doctor_notes.clone()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn principal(role: Role, link: Option<&str>) -> Principal {
        Principal {
            principal_id: "p".into(),
            display_name: "P".into(),
            role,
            credential_hash: String::new(),
            screening_id: link.map(str::to_string),
        }
    }

    #[test]
    fn spot_checks() {
        use Action::*;
        let nurse = principal(Role::Nurse, None);
        assert_eq!(authorize(&nurse, DeleteHealthData, None), Decision::Deny(DenyReason::NotGranted));
        assert!(authorize(&principal(Role::Admin, None), ManageStaff, None).is_allowed());
        assert!(!authorize(&principal(Role::Doctor, None), InputHealthData, None).is_allowed());
        let s = principal(Role::Student, Some("S-1"));
        assert!(authorize(&s, ViewMinimalSelf, Some("S-1")).is_allowed());
        assert_eq!(authorize(&s, ViewMinimalSelf, Some("S-2")), Decision::Deny(DenyReason::NotOwnRecord));
        assert!(authorize(&s, ViewMinimalSelf, None).is_allowed());
        assert!(!authorize(&principal(Role::Student, None), ViewMinimalSelf, None).is_allowed());
    }

    #[test]
    fn students_never_reach_other_records() {
        let s = principal(Role::Student, Some("S-1"));
        for a in Action::ALL {
            assert!(!authorize(&s, a, Some("S-2")).is_allowed(), "{a:?}");
        }
    }

    #[test]
    fn principal_links() {
        assert!(principal(Role::Student, None).check().is_err());
        assert!(principal(Role::Nurse, Some("S-1")).check().is_err());
        assert!(principal(Role::Student, Some("S-1")).check().is_ok());
    }

    #[test]
    fn password_round_trip() {
        let h = hash_password("correct horse", HashCost::LOW);
        assert!(h.starts_with("$argon2id$"));
        assert!(verify_password(&h, "correct horse"));
        assert!(!verify_password(&h, "wrong"));
        assert!(!verify_password("garbage", "correct horse"));
        assert_ne!(h, hash_password("correct horse", HashCost::LOW), "salted");
    }
}
