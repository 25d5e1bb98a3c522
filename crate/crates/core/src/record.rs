//! Student records and referrals.

use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::catalog::{ParameterValue, Value, KEY_DATE_OF_BIRTH, KEY_STUDENT_NAME};
use crate::immunization::DoseEvent;
use crate::screening::Finding;

/// Everything stored about one student.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentRecord {
    pub screening_id: String,
    pub rfid_token: String,
    /// Admission values; each key is set at most once.
    pub one_time_values: BTreeMap<String, ParameterValue>,
    /// Camp measurements, each history sorted by (camp_year, recorded_at).
    pub observations: BTreeMap<String, Vec<ParameterValue>>,
    pub doses: Vec<DoseEvent>,
    pub referrals: Vec<Referral>,
}

impl StudentRecord {
    pub fn new(screening_id: impl Into<String>, rfid_token: impl Into<String>) -> Self {
        StudentRecord {
            screening_id: screening_id.into(),
            rfid_token: rfid_token.into(),
            one_time_values: BTreeMap::new(),
            observations: BTreeMap::new(),
            doses: Vec::new(),
            referrals: Vec::new(),
        }
    }

    pub fn date_of_birth(&self) -> Option<NaiveDate> {
        self.one_time_values.get(KEY_DATE_OF_BIRTH).and_then(|v| v.value.as_date())
    }

    pub fn student_name(&self) -> Option<&str> {
        match &self.one_time_values.get(KEY_STUDENT_NAME)?.value {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    /// The most recent measurement of `key` recorded on or before `as_of`.
    pub fn latest_as_of(&self, key: &str, as_of: NaiveDate) -> Option<&ParameterValue> {
        self.observations.get(key)?.iter().rev().find(|v| v.recorded_at.date_naive() <= as_of)
    }

    /// The most recent measurement of `key`, regardless of date.
    pub fn latest(&self, key: &str) -> Option<&ParameterValue> {
        self.observations.get(key)?.last()
    }

    /// One-time value for `key`, or the latest multiple-time value as of `as_of`.
    pub fn value_as_of(&self, key: &str, as_of: NaiveDate) -> Option<&ParameterValue> {
        self.one_time_values.get(key).or_else(|| self.latest_as_of(key, as_of))
    }

    pub fn has_health_data(&self) -> bool {
        !self.observations.is_empty() || !self.doses.is_empty() || !self.referrals.is_empty()
    }

    pub fn observation_count(&self) -> usize {
        self.observations.values().map(Vec::len).sum()
    }

    /// Inserts into the history for `value.key`, keeping (camp_year,
    /// recorded_at) order. Equal keys keep arrival order.
    pub(crate) fn push_observation(&mut self, value: ParameterValue) {
        let history = self.observations.entry(value.key.clone()).or_default();
        let sort_key = (value.camp_year, value.recorded_at);
        let at = history.partition_point(|v| (v.camp_year, v.recorded_at) <= sort_key);
        history.insert(at, value);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReferralStatus {
    Open,
    Seen,
    Closed,
}

impl ReferralStatus {
    /// Open -> Seen -> Closed, with Open -> Closed allowed directly.
    pub fn can_transition_to(self, next: ReferralStatus) -> bool {
        use ReferralStatus::*;
        matches!((self, next), (Open, Seen) | (Seen, Closed) | (Open, Closed))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ReferralStatus::Open => "Open",
            ReferralStatus::Seen => "Seen",
            ReferralStatus::Closed => "Closed",
        }
    }
}

/// A doctor referral raised by a screening with at least one failed finding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Referral {
    pub referral_id: String,
    pub screening_id: String,
    pub created_at: DateTime<Utc>,
    /// The failed findings; never empty.
    pub findings: Vec<Finding>,
    pub status: ReferralStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doctor_notes: Option<String>,
}

impl Referral {
    /// Summary line shown to the student and parents.
    pub fn notice(&self) -> String {
        let items: Vec<&str> = self.findings.iter().map(|f| f.message.as_str()).collect();
        format!("Please see the school doctor: {}", items.join("; "))
    }
}
