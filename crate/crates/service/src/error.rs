use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use foodprompt::{Arm, FoodCode};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown session '{0}'")]
    UnknownSession(String),
    #[error("session is closed")]
    SessionClosed,
    #[error("{0} arm is not available: nothing loaded to serve it")]
    ArmUnavailable(Arm),
    #[error("unknown meal {0}")]
    UnknownMeal(usize),
    #[error("meal has no foods")]
    EmptyMeal,
    #[error("meal {0} is already finished")]
    MealFinished(usize),
    #[error("unknown prompt event '{0}'")]
    UnknownEvent(String),
    #[error("prompt event '{0}' was already answered")]
    AlreadyAnswered(String),
    #[error("food '{0}' was not shown in this prompt")]
    NotShown(FoodCode),
    #[error("recall has no non-empty meal")]
    EmptyRecall,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("storage failure: {0}")]
    Storage(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownSession(_) => "unknown_session",
            ServiceError::SessionClosed => "session_closed",
            ServiceError::ArmUnavailable(_) => "arm_unavailable",
            ServiceError::UnknownMeal(_) => "unknown_meal",
            ServiceError::EmptyMeal => "empty_meal",
            ServiceError::MealFinished(_) => "meal_finished",
            ServiceError::UnknownEvent(_) => "unknown_event",
            ServiceError::AlreadyAnswered(_) => "already_answered",
            ServiceError::NotShown(_) => "not_shown",
            ServiceError::EmptyRecall => "empty_recall",
            ServiceError::InvalidInput(_) => "invalid_input",
            ServiceError::Storage(_) => "storage",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownSession(_) | ServiceError::UnknownMeal(_) | ServiceError::UnknownEvent(_) => {
                StatusCode::NOT_FOUND
            }
            ServiceError::SessionClosed | ServiceError::MealFinished(_) | ServiceError::AlreadyAnswered(_) => {
                StatusCode::CONFLICT
            }
            ServiceError::ArmUnavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::EmptyMeal
            | ServiceError::NotShown(_)
            | ServiceError::EmptyRecall
            | ServiceError::InvalidInput(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = Json(json!({ "error": self.code(), "message": self.to_string() }));
        (self.status(), body).into_response()
    }
}
