//! Error body and the mapping from domain errors to HTTP statuses.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use hmms_core::access::DenyReason;
use hmms_core::admin::CohortError;
use hmms_core::catalog::ValidationError;
use hmms_core::immunization::ImmunizationError;
use hmms_core::screening::{RuleError, RulesetError, ScreeningError};
use hmms_core::store::StoreError;
use serde::Serialize;

use crate::API_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub detail: ErrorDetail,
}

impl ApiError {
    pub fn new(status: StatusCode, code: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError { status, detail: ErrorDetail { code: code.into(), message: message.into(), details: Vec::new() } }
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn unauthenticated(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNAUTHORIZED, code, message)
    }

    pub fn forbidden(reason: DenyReason) -> Self {
        let message = match reason {
            DenyReason::NotGranted => "role is not granted this action",
            DenyReason::NotOwnRecord => "students may only access their own record",
        };
        Self::new(StatusCode::FORBIDDEN, reason.code(), message)
    }

    pub fn not_found(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn code(&self) -> &str {
        &self.detail.code
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    api_version: &'static str,
    error: &'a ErrorDetail,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { api_version: API_VERSION, error: &self.detail })).into_response()
    }
}

fn dose_status(e: &ImmunizationError) -> StatusCode {
    match e {
        ImmunizationError::DuplicateDose { .. } => StatusCode::CONFLICT,
        ImmunizationError::UnknownVaccineCode(_) => StatusCode::BAD_REQUEST,
        ImmunizationError::MalformedSchedule(_) | ImmunizationError::DoseAgeArityMismatch { .. } | ImmunizationError::Io(_) => {
            StatusCode::INTERNAL_SERVER_ERROR
        }
        ImmunizationError::InvalidDoseNumber { .. } | ImmunizationError::DoseBeforeBirth { .. } | ImmunizationError::Age(_) => {
            StatusCode::UNPROCESSABLE_ENTITY
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::UnknownStudent(_)
            | StoreError::UnknownCard
            | StoreError::UnknownReferral(_)
            | StoreError::UnknownPrincipal(_) => StatusCode::NOT_FOUND,
            StoreError::DuplicateScreeningId(_)
            | StoreError::DuplicateRfidToken
            | StoreError::ImmutableParameter(_)
            | StoreError::DuplicatePrincipal(_) => StatusCode::CONFLICT,
            StoreError::InvalidRfidToken
            | StoreError::MissingRequiredField(_)
            | StoreError::UnknownParameter(_)
            | StoreError::CardinalityMismatch { .. }
            | StoreError::InvalidPrincipal(_) => StatusCode::BAD_REQUEST,
            StoreError::IllegalTransition { .. }
            | StoreError::EditOutsideCurrentCamp { .. }
            | StoreError::NothingToEdit { .. }
            | StoreError::EmptyReferral => StatusCode::UNPROCESSABLE_ENTITY,
            StoreError::Dose(d) => dose_status(d),
            StoreError::Backend(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<ValidationError> for ApiError {
    fn from(e: ValidationError) -> Self {
        ApiError::bad_request(e.code(), e.to_string())
    }
}

impl From<ImmunizationError> for ApiError {
    fn from(e: ImmunizationError) -> Self {
        ApiError::new(dose_status(&e), e.code(), e.to_string())
    }
}

impl From<ScreeningError> for ApiError {
    fn from(e: ScreeningError) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string())
    }
}

impl From<RulesetError> for ApiError {
    fn from(e: RulesetError) -> Self {
        let mut err = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string());
        if let RulesetError::Invalid(list) = &e {
            err.detail.details = list.iter().map(|r: &RuleError| format!("{}: {r}", r.code())).collect();
        }
        if matches!(e, RulesetError::Io(_)) {
            err.status = StatusCode::INTERNAL_SERVER_ERROR;
        }
        err
    }
}

impl From<CohortError> for ApiError {
    fn from(e: CohortError) -> Self {
        let status = match e {
            CohortError::UnresolvedFeatureKey(_) => StatusCode::UNPROCESSABLE_ENTITY,
            CohortError::InvalidAgeRange { .. } => StatusCode::BAD_REQUEST,
            CohortError::OutputUnwritable(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}
