//! Student records, staff principals and the audit log.
//!
//! The store keeps an in-memory copy of everything and writes each change
//! through a [`Backend`] in one transaction together with its audit entry.
//! The in-memory copy is updated only after the backend accepts the change,
//! so a failed write leaves both sides as they were.
//!
//! Every successful mutation appends exactly one [`AuditEntry`]; audited
//! reads (view, print, card punch) append one as well. Sequence numbers
//! start at 1 and have no gaps.

mod backend;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{Backend, Commit, MemoryBackend, Snapshot, SqliteBackend};

use crate::access::Principal;
use crate::catalog::{
    Cardinality, ParameterCatalog, ParameterValue, KEY_DATE_OF_BIRTH, KEY_SCREENING_ID, KEY_STUDENT_NAME,
};
use crate::immunization::{DoseEvent, ImmunizationError, ImmunizationSchedule};
use crate::record::{Referral, ReferralStatus, StudentRecord};
use crate::screening::{ScreeningOutcome, Verdict};

pub const RFID_MIN_LEN: usize = 4;
pub const RFID_MAX_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AuditAction {
    Create,
    Update,
    Delete,
    View,
    Print,
    Punch,
    Screen,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id")]
pub enum AuditTarget {
    Student(String),
    Referral(String),
    Principal(String),
    Ruleset(String),
    Cohort(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    pub at: DateTime<Utc>,
    pub principal: String,
    pub action: AuditAction,
    pub target: AuditTarget,
    pub detail: String,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("screening id {0:?} already registered")]
    DuplicateScreeningId(String),
    #[error("card token already registered")]
    DuplicateRfidToken,
    #[error("card token must be {RFID_MIN_LEN}-{RFID_MAX_LEN} characters")]
    InvalidRfidToken,
    #[error("required field {0:?} missing")]
    MissingRequiredField(String),
    #[error("{0:?} is a one-time parameter and is already set")]
    ImmutableParameter(String),
    #[error("unknown student {0:?}")]
    UnknownStudent(String),
    #[error("unknown parameter {0:?}")]
    UnknownParameter(String),
    #[error("no student registered for this card")]
    UnknownCard,
    #[error("unknown referral {0:?}")]
    UnknownReferral(String),
    #[error("referral cannot move from {from:?} to {to:?}")]
    IllegalTransition { from: ReferralStatus, to: ReferralStatus },
    #[error("{key:?}: {reason}")]
    CardinalityMismatch { key: String, reason: &'static str },
    #[error("{key:?}: only values of the current camp year {current} can be edited")]
    EditOutsideCurrentCamp { key: String, current: i32 },
    #[error("{key:?}: no value recorded in camp year {camp_year} to edit")]
    NothingToEdit { key: String, camp_year: i32 },
    #[error("referral has no failed findings")]
    EmptyReferral,
    #[error(transparent)]
    Dose(#[from] ImmunizationError),
    #[error("principal {0:?} already exists")]
    DuplicatePrincipal(String),
    #[error("unknown principal {0:?}")]
    UnknownPrincipal(String),
    #[error("invalid principal: {0}")]
    InvalidPrincipal(String),
    #[error("storage backend: {0}")]
    Backend(String),
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::DuplicateScreeningId(_) => "DuplicateScreeningId",
            StoreError::DuplicateRfidToken => "DuplicateRfidToken",
            StoreError::InvalidRfidToken => "InvalidRfidToken",
            StoreError::MissingRequiredField(_) => "MissingRequiredField",
            StoreError::ImmutableParameter(_) => "ImmutableParameter",
            StoreError::UnknownStudent(_) => "UnknownStudent",
            StoreError::UnknownParameter(_) => "UnknownParameter",
            StoreError::UnknownCard => "UnknownCard",
            StoreError::UnknownReferral(_) => "UnknownReferral",
            StoreError::IllegalTransition { .. } => "IllegalTransition",
            StoreError::CardinalityMismatch { .. } => "CardinalityMismatch",
            StoreError::EditOutsideCurrentCamp { .. } => "EditOutsideCurrentCamp",
            StoreError::NothingToEdit { .. } => "NothingToEdit",
            StoreError::EmptyReferral => "EmptyReferral",
            StoreError::Dose(e) => e.code(),
            StoreError::DuplicatePrincipal(_) => "DuplicatePrincipal",
            StoreError::UnknownPrincipal(_) => "UnknownPrincipal",
            StoreError::InvalidPrincipal(_) => "InvalidPrincipal",
            StoreError::Backend(_) => "StorageFailure",
        }
    }
}

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(Utc::now)
}

#[derive(Default)]
struct State {
    students: BTreeMap<String, StudentRecord>,
    by_card: HashMap<String, String>,
    principals: BTreeMap<String, Principal>,
    audit: Vec<AuditEntry>,
}

impl State {
    fn next_seq(&self) -> u64 {
        self.audit.last().map_or(1, |e| e.seq + 1)
    }

    fn student(&self, id: &str) -> Result<&StudentRecord, StoreError> {
        self.students.get(id).ok_or_else(|| StoreError::UnknownStudent(id.to_string()))
    }
}

/// Thread-safe handle; clone the `Arc` to share.
pub struct Store {
    catalog: Arc<ParameterCatalog>,
    schedule: Arc<ImmunizationSchedule>,
    state: RwLock<State>,
    backend: Mutex<Box<dyn Backend>>,
    clock: Clock,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let st = self.state.read();
        f.debug_struct("Store")
            .field("students", &st.students.len())
            .field("principals", &st.principals.len())
            .field("audit", &st.audit.len())
            .finish()
    }
}

fn check_token(token: &str) -> Result<(), StoreError> {
    let n = token.chars().count();
    if (RFID_MIN_LEN..=RFID_MAX_LEN).contains(&n) && !token.chars().any(char::is_control) {
        Ok(())
    } else {
        Err(StoreError::InvalidRfidToken)
    }
}

impl Store {
    /// Opens a store over `backend`, loading whatever it already holds.
    pub fn open(
        backend: Box<dyn Backend>,
        catalog: Arc<ParameterCatalog>,
        schedule: Arc<ImmunizationSchedule>,
    ) -> Result<Self, StoreError> {
        let mut backend = backend;
        let snap = backend.load()?;
        let mut state = State::default();
        for s in snap.students {
            state.by_card.insert(s.rfid_token.clone(), s.screening_id.clone());
            state.students.insert(s.screening_id.clone(), s);
        }
        for p in snap.principals {
            state.principals.insert(p.principal_id.clone(), p);
        }
        for (i, e) in snap.audit.iter().enumerate() {
            if e.seq != i as u64 + 1 {
                return Err(StoreError::Backend(format!("audit log gap at seq {}", e.seq)));
            }
        }
        state.audit = snap.audit;
        Ok(Store { catalog, schedule, state: RwLock::new(state), backend: Mutex::new(backend), clock: system_clock() })
    }

    pub fn in_memory(catalog: Arc<ParameterCatalog>, schedule: Arc<ImmunizationSchedule>) -> Self {
        Self::open(Box::new(MemoryBackend::new()), catalog, schedule).expect("memory backend cannot fail")
    }

    pub fn sqlite(
        path: impl AsRef<Path>,
        catalog: Arc<ParameterCatalog>,
        schedule: Arc<ImmunizationSchedule>,
    ) -> Result<Self, StoreError> {
        Self::open(Box::new(SqliteBackend::open(path)?), catalog, schedule)
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn catalog(&self) -> &Arc<ParameterCatalog> {
        &self.catalog
    }

    pub fn schedule(&self) -> &Arc<ImmunizationSchedule> {
        &self.schedule
    }

    pub fn now(&self) -> DateTime<Utc> {
        (self.clock)()
    }

    pub fn ping(&self) -> Result<(), StoreError> {
        self.backend.lock().ping()
    }

    /// Writes `commit` plus a fresh audit entry, then runs `apply` on the
    /// in-memory state. Caller holds the write lock.
    fn commit(
        &self,
        st: &mut State,
        commit: Commit<'_>,
        actor: &str,
        action: AuditAction,
        target: AuditTarget,
        detail: String,
    ) -> Result<AuditEntry, StoreError> {
        let entry = AuditEntry { seq: st.next_seq(), at: self.now(), principal: actor.to_string(), action, target, detail };
        self.backend.lock().apply(&commit, &entry)?;
        st.audit.push(entry.clone());
        Ok(entry)
    }

    fn put_student(
        &self,
        st: &mut State,
        record: StudentRecord,
        actor: &str,
        action: AuditAction,
        detail: String,
    ) -> Result<StudentRecord, StoreError> {
        let target = AuditTarget::Student(record.screening_id.clone());
        self.commit(st, Commit { put_students: vec![&record], ..Default::default() }, actor, action, target, detail)?;
        st.students.insert(record.screening_id.clone(), record.clone());
        Ok(record)
    }

    // -- students ----------------------------------------------------------

    /// Registers a student from validated one-time identity values.
    /// Student Name, Screening ID and Date of birth are required.
    pub fn register_student(
        &self,
        identity: Vec<ParameterValue>,
        rfid_token: &str,
        actor: &str,
    ) -> Result<StudentRecord, StoreError> {
        check_token(rfid_token)?;
        let mut one_time = BTreeMap::new();
        for v in identity {
            let def = self.catalog.get(&v.key).ok_or_else(|| StoreError::UnknownParameter(v.key.clone()))?;
            if def.cardinality != Cardinality::OneTime {
                return Err(StoreError::CardinalityMismatch {
                    key: v.key,
                    reason: "registration takes one-time parameters only",
                });
            }
            if v.camp_year.is_some() {
                return Err(StoreError::CardinalityMismatch { key: v.key, reason: "one-time value carries a camp year" });
            }
            if one_time.contains_key(&v.key) {
                return Err(StoreError::ImmutableParameter(v.key));
            }
            one_time.insert(v.key.clone(), v);
        }
        for key in [KEY_STUDENT_NAME, KEY_SCREENING_ID, KEY_DATE_OF_BIRTH] {
            if !one_time.contains_key(key) {
                return Err(StoreError::MissingRequiredField(key.to_string()));
            }
        }
        if one_time[KEY_DATE_OF_BIRTH].value.as_date().is_none() {
            return Err(StoreError::MissingRequiredField(KEY_DATE_OF_BIRTH.to_string()));
        }
        let screening_id = one_time[KEY_SCREENING_ID].value.render();

        let mut st = self.state.write();
        if st.students.contains_key(&screening_id) {
            return Err(StoreError::DuplicateScreeningId(screening_id));
        }
        if st.by_card.contains_key(rfid_token) {
            return Err(StoreError::DuplicateRfidToken);
        }
        let mut record = StudentRecord::new(screening_id, rfid_token);
        record.one_time_values = one_time;
        let record = self.put_student(&mut st, record, actor, AuditAction::Create, "register".into())?;
        st.by_card.insert(rfid_token.to_string(), record.screening_id.clone());
        Ok(record)
    }

    /// Stores a validated value. One-time keys may be set once; multiple-time
    /// values join the key's history.
    pub fn record_value(&self, screening_id: &str, value: ParameterValue, actor: &str) -> Result<StudentRecord, StoreError> {
        let def = self.catalog.get(&value.key).ok_or_else(|| StoreError::UnknownParameter(value.key.clone()))?;
        let mut st = self.state.write();
        let mut record = st.student(screening_id)?.clone();
        match def.cardinality {
            Cardinality::OneTime => {
                if value.camp_year.is_some() {
                    return Err(StoreError::CardinalityMismatch {
                        key: value.key,
                        reason: "one-time value carries a camp year",
                    });
                }
                if record.one_time_values.contains_key(&value.key) {
                    return Err(StoreError::ImmutableParameter(value.key));
                }
                record.one_time_values.insert(value.key.clone(), value.clone());
            }
            Cardinality::MultipleTime => {
                if value.camp_year.is_none() {
                    return Err(StoreError::CardinalityMismatch {
                        key: value.key,
                        reason: "multiple-time value needs a camp year",
                    });
                }
                record.push_observation(value.clone());
            }
        }
        let detail = format!("set {}", value.key);
        self.put_student(&mut st, record, actor, AuditAction::Update, detail)
    }

    /// Corrects a multiple-time value of the current camp. The correction is
    /// appended; earlier entries stay in the history.
    pub fn edit_value(
        &self,
        screening_id: &str,
        value: ParameterValue,
        current_camp_year: i32,
        actor: &str,
    ) -> Result<StudentRecord, StoreError> {
        let def = self.catalog.get(&value.key).ok_or_else(|| StoreError::UnknownParameter(value.key.clone()))?;
        if def.cardinality == Cardinality::OneTime {
            return Err(StoreError::ImmutableParameter(value.key));
        }
        let year = value.camp_year.ok_or_else(|| StoreError::CardinalityMismatch {
            key: value.key.clone(),
            reason: "multiple-time value needs a camp year",
        })?;
        if year != current_camp_year {
            return Err(StoreError::EditOutsideCurrentCamp { key: value.key, current: current_camp_year });
        }
        let mut st = self.state.write();
        let mut record = st.student(screening_id)?.clone();
        let has_value = record.observations.get(&value.key).is_some_and(|h| h.iter().any(|v| v.camp_year == Some(year)));
        if !has_value {
            return Err(StoreError::NothingToEdit { key: value.key, camp_year: year });
        }
        let detail = format!("edit {}", value.key);
        record.push_observation(value);
        self.put_student(&mut st, record, actor, AuditAction::Update, detail)
    }

    pub fn record_dose(&self, screening_id: &str, dose: DoseEvent, actor: &str) -> Result<StudentRecord, StoreError> {
        let mut st = self.state.write();
        let mut record = st.student(screening_id)?.clone();
        let dob = record
            .date_of_birth()
            .ok_or_else(|| StoreError::MissingRequiredField(KEY_DATE_OF_BIRTH.to_string()))?;
        self.schedule.check_dose(dob, &dose)?;
        if record.doses.iter().any(|d| d.vaccine_code == dose.vaccine_code && d.dose_number == dose.dose_number) {
            return Err(ImmunizationError::DuplicateDose {
                vaccine_code: dose.vaccine_code,
                dose_number: dose.dose_number,
            }
            .into());
        }
        let detail = format!("dose {} #{}", dose.vaccine_code, dose.dose_number);
        record.doses.push(dose);
        self.put_student(&mut st, record, actor, AuditAction::Update, detail)
    }

    /// Clears observations, doses and referrals; identity stays.
    pub fn delete_health_data(&self, screening_id: &str, actor: &str) -> Result<StudentRecord, StoreError> {
        let mut st = self.state.write();
        let mut record = st.student(screening_id)?.clone();
        let detail = format!(
            "clear health data ({} observations, {} doses, {} referrals)",
            record.observation_count(),
            record.doses.len(),
            record.referrals.len()
        );
        record.observations.clear();
        record.doses.clear();
        record.referrals.clear();
        self.put_student(&mut st, record, actor, AuditAction::Delete, detail)
    }

    /// Removes the student entirely, along with any Student-role logins
    /// linked to them.
    pub fn delete_student(&self, screening_id: &str, actor: &str) -> Result<(), StoreError> {
        let mut st = self.state.write();
        let token = st.student(screening_id)?.rfid_token.clone();
        let linked: Vec<String> = st
            .principals
            .values()
            .filter(|p| p.screening_id.as_deref() == Some(screening_id))
            .map(|p| p.principal_id.clone())
            .collect();
        let commit = Commit {
            delete_students: vec![screening_id],
            delete_principals: linked.iter().map(String::as_str).collect(),
            ..Default::default()
        };
        let target = AuditTarget::Student(screening_id.to_string());
        self.commit(&mut st, commit, actor, AuditAction::Delete, target, "delete student".into())?;
        st.students.remove(screening_id);
        st.by_card.remove(&token);
        for id in linked {
            st.principals.remove(&id);
        }
        Ok(())
    }

    /// Audited read of one record (`View` or `Print`).
    pub fn view_student(&self, screening_id: &str, actor: &str, action: AuditAction) -> Result<StudentRecord, StoreError> {
        let mut st = self.state.write();
        let record = st.student(screening_id)?.clone();
        let target = AuditTarget::Student(record.screening_id.clone());
        self.commit(&mut st, Commit::default(), actor, action, target, String::new())?;
        Ok(record)
    }

    /// Card punch: audited lookup by RFID token.
    pub fn lookup_by_card(&self, rfid_token: &str, actor: &str) -> Result<StudentRecord, StoreError> {
        let mut st = self.state.write();
        let id = st.by_card.get(rfid_token).cloned().ok_or(StoreError::UnknownCard)?;
        let record = st.student(&id)?.clone();
        self.commit(&mut st, Commit::default(), actor, AuditAction::Punch, AuditTarget::Student(id), String::new())?;
        Ok(record)
    }

    /// Unaudited read, for internal use (screening batches, exports).
    pub fn student(&self, screening_id: &str) -> Option<StudentRecord> {
        self.state.read().students.get(screening_id).cloned()
    }

    /// All records in screening-id order, unaudited.
    pub fn students(&self) -> Vec<StudentRecord> {
        self.state.read().students.values().cloned().collect()
    }

    pub fn student_ids(&self) -> Vec<String> {
        self.state.read().students.keys().cloned().collect()
    }

    pub fn student_count(&self) -> usize {
        self.state.read().students.len()
    }

    // -- screenings and referrals -----------------------------------------

    /// Records that a screening ran, storing its referral if one was raised.
    pub fn record_screening(&self, outcome: &ScreeningOutcome, actor: &str) -> Result<StudentRecord, StoreError> {
        let mut st = self.state.write();
        let mut record = st.student(&outcome.screening_id)?.clone();
        let detail = match &outcome.referral {
            Some(r) => {
                check_referral(r)?;
                record.referrals.push(r.clone());
                format!("screened as of {}; referral {}", outcome.as_of, r.referral_id)
            }
            None => format!("screened as of {}; no referral", outcome.as_of),
        };
        self.put_student(&mut st, record, actor, AuditAction::Screen, detail)
    }

    pub fn persist_referral(&self, referral: Referral, actor: &str) -> Result<Referral, StoreError> {
        check_referral(&referral)?;
        let mut st = self.state.write();
        let mut record = st.student(&referral.screening_id)?.clone();
        let mut action = AuditAction::Create;
        if let Some(existing) = record.referrals.iter_mut().find(|r| r.referral_id == referral.referral_id) {
            action = AuditAction::Update;
            if existing.status != referral.status && !existing.status.can_transition_to(referral.status) {
                return Err(StoreError::IllegalTransition { from: existing.status, to: referral.status });
            }
            *existing = referral.clone();
        } else {
            record.referrals.push(referral.clone());
        }
        let target = AuditTarget::Referral(referral.referral_id.clone());
        self.commit(&mut st, Commit { put_students: vec![&record], ..Default::default() }, actor, action, target, String::new())?;
        st.students.insert(record.screening_id.clone(), record);
        Ok(referral)
    }

    /// Moves a referral along Open -> Seen -> Closed (or Open -> Closed) and
    /// optionally sets doctor notes. With `status` absent only the notes
    /// change, which is refused once the referral is closed.
    pub fn update_referral_status(
        &self,
        referral_id: &str,
        status: Option<ReferralStatus>,
        notes: Option<String>,
        actor: &str,
    ) -> Result<Referral, StoreError> {
        let mut st = self.state.write();
        let owner = st
            .students
            .values()
            .find(|s| s.referrals.iter().any(|r| r.referral_id == referral_id))
            .map(|s| s.screening_id.clone())
            .ok_or_else(|| StoreError::UnknownReferral(referral_id.to_string()))?;
        let mut record = st.students[&owner].clone();
        let referral = record.referrals.iter_mut().find(|r| r.referral_id == referral_id).expect("found above");
        let from = referral.status;
        match status {
            Some(to) if !from.can_transition_to(to) => return Err(StoreError::IllegalTransition { from, to }),
            Some(to) => referral.status = to,
            None if from == ReferralStatus::Closed => {
                return Err(StoreError::IllegalTransition { from, to: from });
            }
            None => {}
        }
        if notes.is_some() {
            referral.doctor_notes = notes;
        }
        let updated = referral.clone();
        let detail = format!("{} -> {}", from.as_str(), updated.status.as_str());
        let target = AuditTarget::Referral(referral_id.to_string());
        self.commit(&mut st, Commit { put_students: vec![&record], ..Default::default() }, actor, AuditAction::Update, target, detail)?;
        st.students.insert(owner, record);
        Ok(updated)
    }

    pub fn referral(&self, referral_id: &str) -> Option<Referral> {
        self.state
            .read()
            .students
            .values()
            .flat_map(|s| &s.referrals)
            .find(|r| r.referral_id == referral_id)
            .cloned()
    }

    // -- principals ---------------------------------------------------------

    pub fn create_principal(&self, principal: Principal, actor: &str) -> Result<Principal, StoreError> {
        principal.check().map_err(StoreError::InvalidPrincipal)?;
        let mut st = self.state.write();
        if st.principals.contains_key(&principal.principal_id) {
            return Err(StoreError::DuplicatePrincipal(principal.principal_id));
        }
        if let Some(id) = &principal.screening_id {
            st.student(id)?;
        }
        let target = AuditTarget::Principal(principal.principal_id.clone());
        let detail = format!("role {}", principal.role);
        self.commit(&mut st, Commit { put_principals: vec![&principal], ..Default::default() }, actor, AuditAction::Create, target, detail)?;
        st.principals.insert(principal.principal_id.clone(), principal.clone());
        Ok(principal)
    }

    pub fn update_principal(&self, principal: Principal, actor: &str) -> Result<Principal, StoreError> {
        principal.check().map_err(StoreError::InvalidPrincipal)?;
        let mut st = self.state.write();
        if !st.principals.contains_key(&principal.principal_id) {
            return Err(StoreError::UnknownPrincipal(principal.principal_id));
        }
        if let Some(id) = &principal.screening_id {
            st.student(id)?;
        }
        let target = AuditTarget::Principal(principal.principal_id.clone());
        self.commit(&mut st, Commit { put_principals: vec![&principal], ..Default::default() }, actor, AuditAction::Update, target, String::new())?;
        st.principals.insert(principal.principal_id.clone(), principal.clone());
        Ok(principal)
    }

    pub fn delete_principal(&self, principal_id: &str, actor: &str) -> Result<(), StoreError> {
        let mut st = self.state.write();
        if !st.principals.contains_key(principal_id) {
            return Err(StoreError::UnknownPrincipal(principal_id.to_string()));
        }
        let target = AuditTarget::Principal(principal_id.to_string());
        let commit = Commit { delete_principals: vec![principal_id], ..Default::default() };
        self.commit(&mut st, commit, actor, AuditAction::Delete, target, String::new())?;
        st.principals.remove(principal_id);
        Ok(())
    }

    pub fn principal(&self, principal_id: &str) -> Option<Principal> {
        self.state.read().principals.get(principal_id).cloned()
    }

    pub fn principals(&self) -> Vec<Principal> {
        self.state.read().principals.values().cloned().collect()
    }

    // -- audit --------------------------------------------------------------

    /// Appends an audit entry for an action that changes nothing in the
    /// store itself (ruleset install, cohort export).
    pub fn audit_event(
        &self,
        actor: &str,
        action: AuditAction,
        target: AuditTarget,
        detail: impl Into<String>,
    ) -> Result<AuditEntry, StoreError> {
        let mut st = self.state.write();
        self.commit(&mut st, Commit::default(), actor, action, target, detail.into())
    }

    pub fn audit_log(&self) -> Vec<AuditEntry> {
        self.state.read().audit.clone()
    }

    pub fn audit_len(&self) -> usize {
        self.state.read().audit.len()
    }

    /// Full copy of the current state.
    pub fn snapshot(&self) -> Snapshot {
        let st = self.state.read();
        Snapshot {
            students: st.students.values().cloned().collect(),
            principals: st.principals.values().cloned().collect(),
            audit: st.audit.clone(),
        }
    }
}

fn check_referral(r: &Referral) -> Result<(), StoreError> {
    if r.findings.is_empty() || r.findings.iter().any(|f| f.verdict != Verdict::Fail) {
        return Err(StoreError::EmptyReferral);
    }
    Ok(())
}
