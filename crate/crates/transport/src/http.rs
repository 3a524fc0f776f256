//! JSON API in front of [`MaildustServer`].

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use maildust_core::server::{MaildustServer, ServerError};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

type Shared = Arc<MaildustServer>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegisterRequest {
    username: String,
    password: String,
    recovery_addresses: Vec<String>,
    k: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LoginRequest {
    username: String,
    password: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LogoutRequest {
    token: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecoverRequest {
    username: String,
}

fn error(status: StatusCode, code: &str) -> Response {
    (status, Json(json!({ "error": code }))).into_response()
}

fn server_error(e: ServerError) -> Response {
    let status = match &e {
        ServerError::DuplicateUsername => StatusCode::CONFLICT,
        ServerError::InvalidUsername
        | ServerError::InvalidAddressList(_)
        | ServerError::InvalidThreshold { .. }
        | ServerError::WeakPassword => StatusCode::BAD_REQUEST,
        ServerError::AuthenticationFailed | ServerError::InvalidSession => StatusCode::UNAUTHORIZED,
        ServerError::MailDispatchFailed(_) => StatusCode::BAD_GATEWAY,
        ServerError::Storage(_) | ServerError::InjectedCrash(_) => {
            log::error!("request failed: {e}");
            StatusCode::INTERNAL_SERVER_ERROR
        }
    };
    error(status, e.code())
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, Box<Response>> {
    serde_json::from_slice(body).map_err(|_| Box::new(error(StatusCode::BAD_REQUEST, "invalid_request")))
}

/// Runs blocking server work (hashing, SMTP) off the async workers.
async fn blocking<T: Send + 'static>(
    server: Shared,
    work: impl FnOnce(&MaildustServer) -> T + Send + 'static,
) -> Result<T, Response> {
    tokio::task::spawn_blocking(move || work(&server))
        .await
        .map_err(|_| error(StatusCode::INTERNAL_SERVER_ERROR, "internal"))
}

async fn register(State(server): State<Shared>, body: Bytes) -> Response {
    let req: RegisterRequest = match parse(&body) {
        Ok(r) => r,
        Err(resp) => return *resp,
    };
    let result = blocking(server, move |s| {
        s.register(&req.username, &req.password, &req.recovery_addresses, req.k)
    })
    .await;
    match result {
        Ok(Ok(user)) => (
            StatusCode::CREATED,
            Json(json!({
                "status": "registered",
                "username": user.username,
                "n": user.recovery_addresses.len(),
                "k": user.threshold,
            })),
        )
            .into_response(),
        Ok(Err(e)) => server_error(e),
        Err(resp) => resp,
    }
}

async fn login(State(server): State<Shared>, body: Bytes) -> Response {
    let req: LoginRequest = match parse(&body) {
        Ok(r) => r,
        Err(resp) => return *resp,
    };
    match blocking(server, move |s| s.login(&req.username, &req.password)).await {
        Ok(Ok(session)) => Json(json!({
            "token": session.token,
            "expires_at": session.expires_at,
        }))
        .into_response(),
        Ok(Err(e)) => server_error(e),
        Err(resp) => resp,
    }
}

async fn logout(State(server): State<Shared>, body: Bytes) -> Response {
    let req: LogoutRequest = match parse(&body) {
        Ok(r) => r,
        Err(resp) => return *resp,
    };
    server.logout(&req.token);
    Json(json!({ "status": "ok" })).into_response()
}

async fn recover(State(server): State<Shared>, body: Bytes) -> Response {
    let req: RecoverRequest = match parse(&body) {
        Ok(r) => r,
        Err(resp) => return *resp,
    };
    match blocking(server, move |s| s.recover(&req.username)).await {
        Ok(Ok(())) => (StatusCode::ACCEPTED, Json(json!({ "status": "accepted" }))).into_response(),
        Ok(Err(e)) => server_error(e),
        Err(resp) => resp,
    }
}

async fn me(State(server): State<Shared>, headers: HeaderMap) -> Response {
    let token = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .unwrap_or_default();
    match server.session_user(token) {
        Ok(username) => Json(json!({ "username": username })).into_response(),
        Err(e) => server_error(e),
    }
}

pub fn router(server: Arc<MaildustServer>) -> Router {
    Router::new()
        .route("/register", post(register))
        .route("/login", post(login))
        .route("/logout", post(logout))
        .route("/recover", post(recover))
        .route("/me", get(me))
        .fallback(|| async { error(StatusCode::NOT_FOUND, "not_found") })
        .with_state(server)
}

/// Serves the API until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, server: Arc<MaildustServer>) -> std::io::Result<()> {
    axum::serve(listener, router(server)).await
}
