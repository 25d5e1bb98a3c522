//! School health screening core: the parameter catalog, immunization
//! schedule evaluation, screening rules, the records store, and role-based
//! access control.

pub mod access;
pub mod admin;
pub mod catalog;
pub mod config;
pub mod immunization;
pub mod measures;
pub mod record;
pub mod screening;
pub mod store;
pub mod synth;

pub use access::{authorize, grants, minimal_view, Action, Decision, DenyReason, MinimalView, Principal, Role};
pub use catalog::{validate_value, EntryContext, ParameterCatalog, ParameterDefinition, ParameterValue, Value};
pub use config::{Config, Reference};
pub use immunization::{evaluate_immunization, DoseEvent, ImmunizationSchedule, ImmunizationStatus, Overall};
pub use measures::{age_at, compute_bmi, Age, Bmi};
pub use record::{Referral, ReferralStatus, StudentRecord};
pub use screening::{LabTestTable, run_screening, validate_ruleset, ClinicalRule, Finding, Ruleset, ScreeningContext, ScreeningOutcome, Verdict};
pub use store::{AuditAction, AuditEntry, AuditTarget, Store, StoreError};
