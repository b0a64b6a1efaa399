use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use mailsleuth_core::Error;
use serde::{Deserialize, Serialize};

/// Error body returned by every endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
}

pub fn status_for(error: &Error) -> StatusCode {
    use Error::*;
    match error {
        UnreadableStream(_)
        | MissingColumn(_)
        | InvalidSchema(_)
        | InvalidAddress(_)
        | EmptyPool
        | UnknownFormat(_)
        | DuplicateDocId(_)
        | InvalidTerm(_)
        | InvalidFilter(_)
        | EmptyLabel
        | MalformedLog { .. } => StatusCode::BAD_REQUEST,
        UnknownDataset(_)
        | UnknownSession(_)
        | UnknownFilter(_)
        | UnknownNode(_)
        | UnknownEdge(..)
        | UnknownDoc(_)
        | IndexOutOfRange { .. }
        | NoClustering => StatusCode::NOT_FOUND,
        DuplicateFilter(_) => StatusCode::CONFLICT,
        EmptyCorpus
        | DatasetMismatch { .. }
        | ReplayDivergence { .. }
        | EmptyResults
        | EmptyUndoStack
        | InvalidK { .. }
        | ClusterCapExceeded { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        StorageFailure { .. } => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl ApiError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST.as_u16(),
            code: "BadRequest".into(),
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(error: Error) -> Self {
        ApiError {
            status: status_for(&error).as_u16(),
            code: error.code().to_string(),
            message: error.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_mirror_core_errors() {
        let e = ApiError::from(Error::UnknownFilter("f9".into()));
        assert_eq!((e.status, e.code.as_str()), (404, "UnknownFilter"));
        assert_eq!(
            ApiError::from(Error::DuplicateFilter("x".into())).status,
            409
        );
        assert_eq!(
            ApiError::from(Error::InvalidK { k: 0, docs: 3 }).status,
            422
        );
        assert_eq!(ApiError::from(Error::EmptyResults).status, 422);
        assert_eq!(
            ApiError::from(Error::StorageFailure {
                path: "x".into(),
                reason: "y".into()
            })
            .status,
            500
        );
        assert_eq!(ApiError::from(Error::InvalidFilter("x".into())).status, 400);
    }
}
