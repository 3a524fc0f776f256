use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("server unreachable: {0}")]
    ServerUnreachable(String),
}

/// Tries `POST {server}/login`; `Ok(false)` means the server answered and
/// refused the credentials.
pub fn verify_login(server: &str, username: &str, password: &str) -> Result<bool, VerifyError> {
    let url = format!("{}/login", server.trim_end_matches('/'));
    let result = ureq::post(&url).send_json(json!({
        "username": username,
        "password": password,
    }));
    match result {
        Ok(_) => Ok(true),
        Err(ureq::Error::StatusCode(status)) if (400..500).contains(&status) => Ok(false),
        Err(e) => Err(VerifyError::ServerUnreachable(e.to_string())),
    }
}
