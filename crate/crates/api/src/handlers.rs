use std::collections::HashMap;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use chrono::{Datelike, NaiveDate};
use hmms_core::access::{hash_password, minimal_view, Action, Principal};
use hmms_core::admin::CohortQuery;
use hmms_core::catalog::{validate_value, EntryContext, ParameterValue, KEY_HEIGHT, KEY_WEIGHT};
use hmms_core::immunization::{evaluate_immunization, DoseEvent};
use hmms_core::measures::compute_bmi;
use hmms_core::record::StudentRecord;
use hmms_core::screening::{run_screening, Ruleset};
use hmms_core::store::{AuditAction, AuditTarget, StoreError};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::ApiError;
use crate::session::Caller;
use crate::wire::*;
use crate::{print, AppState};

type ApiResult<T> = Result<T, ApiError>;

fn ok<T: Serialize>(body: T) -> Json<Envelope<T>> {
    Json(Envelope::new(body))
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("InvalidBody", e.to_string()))
}

/// Like [`parse`], but an empty body means the default.
fn parse_or_default<T: DeserializeOwned + Default>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        Ok(T::default())
    } else {
        parse(body)
    }
}

fn today(state: &AppState) -> NaiveDate {
    state.store.now().date_naive()
}

fn entry(state: &AppState, caller: &Caller, camp_year: Option<i32>) -> EntryContext {
    EntryContext { recorded_at: state.store.now(), camp_year, recorded_by: caller.id().to_string() }
}

fn validated(state: &AppState, caller: &Caller, key: &str, raw: &str, camp_year: Option<i32>) -> ApiResult<ParameterValue> {
    let def = state.reference.catalog.get(key).ok_or_else(|| StoreError::UnknownParameter(key.to_string()))?;
    let camp_year = if def.is_one_time() { camp_year } else { camp_year.or(Some(state.store.now().year())) };
    Ok(validate_value(def, raw, &entry(state, caller, camp_year))?)
}

pub(crate) fn detail(state: &AppState, r: &StudentRecord, include_old: bool) -> StudentDetail {
    let as_of = today(state);
    let recent = r.observations.iter().filter_map(|(k, h)| h.last().map(|v| (k.clone(), v.clone()))).collect();
    let old = include_old.then(|| {
        r.observations
            .iter()
            .filter(|(_, h)| h.len() > 1)
            .map(|(k, h)| (k.clone(), h[..h.len() - 1].to_vec()))
            .collect()
    });
    let number = |key: &str| r.latest(key).and_then(|v| v.value.as_f64());
    let bmi = match (number(KEY_WEIGHT), number(KEY_HEIGHT)) {
        (Some(w), Some(h)) => compute_bmi(w, h).ok().map(|b| b.to_string()),
        _ => None,
    };
    let immunization = r
        .date_of_birth()
        .and_then(|dob| evaluate_immunization(dob, &r.doses, &state.reference.schedule, as_of).ok());
    StudentDetail {
        screening_id: r.screening_id.clone(),
        rfid_token: r.rfid_token.clone(),
        one_time: r.one_time_values.clone(),
        recent,
        old,
        bmi,
        doses: r.doses.clone(),
        immunization,
        referrals: r.referrals.clone(),
    }
}

// -- session ------------------------------------------------------------------

pub async fn login(State(state): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: LoginRequest = parse(&body)?;
    let bad = || ApiError::unauthenticated("InvalidCredentials", "unknown principal or wrong password");
    let principal = state.store.principal(&req.principal_id).ok_or_else(bad)?;
    if !principal.verify_password(&req.password) {
        return Err(bad());
    }
    let session = state.sessions.issue(&principal.principal_id, state.store.now());
    Ok(ok(LoginResponse {
        token: session.token,
        expires_at: session.expires_at,
        principal: PrincipalOut::from(&principal),
    }))
}

pub async fn logout(State(state): State<AppState>, caller: Caller) -> impl IntoResponse {
    state.sessions.revoke(&caller.token);
    ok(Done { ok: true })
}

// -- students -----------------------------------------------------------------

pub async fn register(State(state): State<AppState>, caller: Caller, body: Bytes) -> ApiResult<Response> {
    caller.require(Action::InputHealthData, None)?;
    let req: RegisterRequest = parse(&body)?;
    let mut identity = Vec::new();
    for (key, raw) in &req.identity {
        identity.push(validated(&state, &caller, key, raw, None)?);
    }
    let record = state.store.register_student(identity, &req.rfid_token, caller.id())?;
    let body = StudentResponse { student: detail(&state, &record, false) };
    Ok((StatusCode::CREATED, ok(body)).into_response())
}

pub async fn search(
    State(state): State<AppState>,
    caller: Caller,
    Query(params): Query<HashMap<String, String>>,
) -> ApiResult<impl IntoResponse> {
    caller.require(Action::SearchStudent, None)?;
    let q = params.get("q").map(|s| s.trim().to_lowercase()).unwrap_or_default();
    let students = state
        .store
        .students()
        .iter()
        .filter(|s| {
            q.is_empty()
                || s.screening_id.to_lowercase().starts_with(&q)
                || s.student_name().is_some_and(|n| n.to_lowercase().contains(&q))
        })
        .map(BasicInfo::from)
        .collect();
    Ok(ok(SearchResponse { students }))
}

pub async fn view_student(
    State(state): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    caller.require(Action::ViewHealthData, Some(&id))?;
    let record = state.store.view_student(&id, caller.id(), AuditAction::View)?;
    Ok(ok(StudentResponse { student: detail(&state, &record, caller.may(Action::ViewOldHealthData)) }))
}

pub async fn basic_info(State(state): State<AppState>, caller: Caller, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    caller.require(Action::ViewBasicInfo, Some(&id))?;
    let record = state.store.view_student(&id, caller.id(), AuditAction::View)?;
    Ok(ok(BasicResponse { student: BasicInfo::from(&record) }))
}

pub async fn history(State(state): State<AppState>, caller: Caller, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    caller.require(Action::ViewOldHealthData, Some(&id))?;
    let record = state.store.view_student(&id, caller.id(), AuditAction::View)?;
    Ok(ok(HistoryResponse { screening_id: record.screening_id, observations: record.observations }))
}

pub async fn record_value(
    State(state): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    caller.require(Action::InputHealthData, Some(&id))?;
    let req: ValueRequest = parse(&body)?;
    let value = validated(&state, &caller, &req.key, &req.value, req.camp_year)?;
    let record = state.store.record_value(&id, value, caller.id())?;
    Ok(ok(StudentResponse { student: detail(&state, &record, false) }))
}

pub async fn edit_value(
    State(state): State<AppState>,
    caller: Caller,
    Path((id, key)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    caller.require(Action::EditHealthData, Some(&id))?;
    let req: EditRequest = parse(&body)?;
    let def = state.reference.catalog.get(&key).ok_or_else(|| StoreError::UnknownParameter(key.clone()))?;
    if def.is_one_time() {
        return Err(StoreError::ImmutableParameter(key).into());
    }
    let year = state.store.now().year();
    let value = validated(&state, &caller, &key, &req.value, Some(year))?;
    let record = state.store.edit_value(&id, value, year, caller.id())?;
    Ok(ok(StudentResponse { student: detail(&state, &record, false) }))
}

pub async fn record_dose(
    State(state): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    caller.require(Action::InputHealthData, Some(&id))?;
    let req: DoseRequest = parse(&body)?;
    let dose = DoseEvent { vaccine_code: req.vaccine_code, dose_number: req.dose_number, given_on: req.given_on };
    let record = state.store.record_dose(&id, dose, caller.id())?;
    Ok(ok(StudentResponse { student: detail(&state, &record, false) }))
}

pub async fn punch(State(state): State<AppState>, caller: Caller, body: Bytes) -> ApiResult<impl IntoResponse> {
    caller.require(Action::PunchCard, None)?;
    let req: PunchRequest = parse(&body)?;
    let record = state.store.lookup_by_card(&req.rfid_token, caller.id())?;
    Ok(ok(StudentResponse { student: detail(&state, &record, caller.may(Action::ViewOldHealthData)) }))
}

pub async fn screen(
    State(state): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    caller.require(Action::RunScreening, Some(&id))?;
    let req: ScreenRequest = parse_or_default(&body)?;
    let as_of = req.as_of.unwrap_or_else(|| today(&state));
    let record = state.store.student(&id).ok_or_else(|| StoreError::UnknownStudent(id.clone()))?;
    let ruleset = state.ruleset();
    let outcome = run_screening(&record, &ruleset.rules, &state.ctx(), as_of, state.store.now())?;
    state.store.record_screening(&outcome, caller.id())?;
    Ok(ok(ScreenResponse {
        screening_id: outcome.screening_id,
        as_of: outcome.as_of,
        findings: outcome.findings,
        referral: outcome.referral,
    }))
}

pub async fn referrals(State(state): State<AppState>, caller: Caller, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    caller.require(Action::ViewHealthData, Some(&id))?;
    let record = state.store.view_student(&id, caller.id(), AuditAction::View)?;
    Ok(ok(ReferralsResponse { referrals: record.referrals }))
}

pub async fn update_referral(
    State(state): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    caller.require(Action::ViewOldHealthData, None)?;
    let req: ReferralUpdate = parse(&body)?;
    if req.status.is_none() && req.doctor_notes.is_none() {
        return Err(ApiError::bad_request("InvalidBody", "status or doctor_notes required"));
    }
    let referral = state.store.update_referral_status(&id, req.status, req.doctor_notes, caller.id())?;
    Ok(ok(ReferralResponse { referral }))
}

pub async fn print_student(State(state): State<AppState>, caller: Caller, Path(id): Path<String>) -> ApiResult<Response> {
    caller.require(Action::PrintHealthData, Some(&id))?;
    let record = state.store.view_student(&id, caller.id(), AuditAction::Print)?;
    let detail = detail(&state, &record, caller.may(Action::ViewOldHealthData));
    let html = print::render(&state.reference.catalog, &detail, state.store.now());
    Ok(([(header::CONTENT_TYPE, "text/html; charset=utf-8")], html).into_response())
}

pub async fn me_minimal(State(state): State<AppState>, caller: Caller) -> ApiResult<impl IntoResponse> {
    let own = caller.principal.screening_id.clone();
    caller.require(Action::ViewMinimalSelf, own.as_deref())?;
    let own = own.expect("student principals link a record");
    let record = state.store.view_student(&own, caller.id(), AuditAction::View)?;
    Ok(ok(MinimalResponse { view: minimal_view(&record, &state.reference.schedule, today(&state)) }))
}

pub async fn delete_health_data(
    State(state): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    caller.require(Action::DeleteHealthData, Some(&id))?;
    let record = state.store.delete_health_data(&id, caller.id())?;
    Ok(ok(StudentResponse { student: detail(&state, &record, false) }))
}

pub async fn delete_student(State(state): State<AppState>, caller: Caller, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    caller.require(Action::DeleteHealthData, Some(&id))?;
    state.store.delete_student(&id, caller.id())?;
    Ok(ok(Done { ok: true }))
}

// -- staff --------------------------------------------------------------------

pub async fn list_staff(State(state): State<AppState>, caller: Caller) -> ApiResult<impl IntoResponse> {
    caller.require(Action::ManageStaff, None)?;
    let principals = state.store.principals().iter().map(PrincipalOut::from).collect();
    Ok(ok(StaffListResponse { principals }))
}

pub async fn create_staff(State(state): State<AppState>, caller: Caller, body: Bytes) -> ApiResult<Response> {
    caller.require(Action::ManageStaff, None)?;
    let req: StaffRequest = parse(&body)?;
    if req.password.is_empty() {
        return Err(ApiError::bad_request("InvalidBody", "password must not be empty"));
    }
    let principal = Principal {
        principal_id: req.principal_id,
        display_name: req.display_name,
        role: req.role,
        credential_hash: hash_password(&req.password, state.hash_cost),
        screening_id: req.screening_id,
    };
    let stored = state.store.create_principal(principal, caller.id())?;
    Ok((StatusCode::CREATED, ok(StaffResponse { principal: PrincipalOut::from(&stored) })).into_response())
}

pub async fn get_staff(State(state): State<AppState>, caller: Caller, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    caller.require(Action::ManageStaff, None)?;
    let p = state.store.principal(&id).ok_or(StoreError::UnknownPrincipal(id))?;
    Ok(ok(StaffResponse { principal: PrincipalOut::from(&p) }))
}

pub async fn update_staff(
    State(state): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    caller.require(Action::ManageStaff, None)?;
    let req: StaffUpdate = parse(&body)?;
    let mut p = state.store.principal(&id).ok_or_else(|| StoreError::UnknownPrincipal(id.clone()))?;
    if let Some(name) = req.display_name {
        p.display_name = name;
    }
    if let Some(pw) = &req.password {
        if pw.is_empty() {
            return Err(ApiError::bad_request("InvalidBody", "password must not be empty"));
        }
        p.credential_hash = hash_password(pw, state.hash_cost);
    }
    let stored = state.store.update_principal(p, caller.id())?;
    if req.password.is_some() {
        state.sessions.revoke_principal(&id);
    }
    Ok(ok(StaffResponse { principal: PrincipalOut::from(&stored) }))
}

pub async fn delete_staff(State(state): State<AppState>, caller: Caller, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    caller.require(Action::ManageStaff, None)?;
    state.store.delete_principal(&id, caller.id())?;
    state.sessions.revoke_principal(&id);
    Ok(ok(Done { ok: true }))
}

// -- reference data -------------------------------------------------------------

pub async fn catalog(State(state): State<AppState>, caller: Caller) -> ApiResult<impl IntoResponse> {
    caller.require(Action::ViewBasicInfo, None)?;
    let catalog = &state.reference.catalog;
    Ok(ok(CatalogResponse {
        catalog_version: catalog.version(),
        parameters: catalog.definitions().iter().map(CatalogEntry::from).collect(),
    }))
}

pub async fn get_ruleset(State(state): State<AppState>, caller: Caller) -> ApiResult<impl IntoResponse> {
    caller.require(Action::ManageRulesets, None)?;
    Ok(ok(RulesetResponse { ruleset: (*state.ruleset()).clone() }))
}

pub async fn put_ruleset(State(state): State<AppState>, caller: Caller, body: Bytes) -> ApiResult<impl IntoResponse> {
    caller.require(Action::ManageRulesets, None)?;
    let req: RulesetRequest = parse(&body)?;
    let ruleset = Ruleset::from_toml(&req.source, &state.reference.catalog)?;
    if let Some(path) = &state.ruleset_path {
        std::fs::write(path, &req.source)
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "RulesetUnwritable", e.to_string()))?;
    }
    let detail = format!("install ruleset v{} ({} rules)", ruleset.ruleset_version, ruleset.rules.len());
    state.store.audit_event(caller.id(), AuditAction::Update, AuditTarget::Ruleset(ruleset.label.clone()), detail)?;
    *state.ruleset.write() = std::sync::Arc::new(ruleset.clone());
    Ok(ok(RulesetResponse { ruleset }))
}

pub async fn export_cohort(State(state): State<AppState>, caller: Caller, body: Bytes) -> ApiResult<Response> {
    caller.require(Action::ExportCohort, None)?;
    let query: CohortQuery = parse(&body)?;
    let mut out = Vec::new();
    hmms_core::admin::export_cohort(&state.store, &query, &state.ctx(), &mut out, caller.id())?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], out).into_response())
}

// -- probes and fallbacks ----------------------------------------------------------

pub async fn healthz() -> impl IntoResponse {
    ok(StatusResponse { status: "ok", checks: vec![] })
}

pub async fn readyz(State(state): State<AppState>) -> Response {
    let db = state.store.ping();
    let checks = vec![
        Check { name: "database", ok: db.is_ok(), message: db.err().map(|e| e.to_string()) },
        Check { name: "ruleset", ok: !state.ruleset().rules.is_empty(), message: None },
    ];
    let ready = checks.iter().all(|c| c.ok);
    let status = if ready { StatusCode::OK } else { StatusCode::SERVICE_UNAVAILABLE };
    (status, ok(StatusResponse { status: if ready { "ok" } else { "unavailable" }, checks })).into_response()
}

pub async fn unknown_route() -> ApiError {
    ApiError::not_found("UnknownRoute", "no such route")
}

pub async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "MethodNotAllowed", "method not allowed on this route")
}
