//! Browser bindings. Every export takes plain values and returns a JSON
//! string so the page needs no generated type glue.

use maildust_core::password::{self, combination_bits, inferred_charset_size};
use maildust_core::sss::{self, Share, SharingPolicy};
use maildust_core::threat::{self, Scheme};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct HexShare {
    pub index: u8,
    pub payload: String,
}

#[derive(Debug, Serialize)]
struct StrengthReport {
    charset_size: u64,
    length: usize,
    bits: f64,
    class: String,
}

#[derive(Debug, Serialize)]
struct AttackView {
    outcome: &'static str,
    mails_seen: usize,
    shares_needed: usize,
    login_verified: bool,
}

/// Splits a UTF-8 secret into `n` hex shares, any `k` of which rebuild it.
pub fn split_json(secret: &str, k: usize, n: usize, seed: Option<u64>) -> Result<String, String> {
    let policy = SharingPolicy::new(k, n).map_err(|e| e.to_string())?;
    let mut rng = match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    };
    let shares = sss::split(secret.as_bytes(), policy, &mut rng).map_err(|e| e.to_string())?;
    let out: Vec<HexShare> = shares
        .into_iter()
        .map(|s| HexShare {
            index: s.index,
            payload: hex::encode(&s.payload),
        })
        .collect();
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Rebuilds the secret from a JSON array of hex shares.
pub fn reconstruct_json(shares: &str, k: usize) -> Result<String, String> {
    let parsed: Vec<HexShare> = serde_json::from_str(shares).map_err(|e| format!("shares: {e}"))?;
    let shares = parsed
        .into_iter()
        .map(|s| {
            hex::decode(&s.payload)
                .map(|payload| Share { index: s.index, payload })
                .map_err(|e| format!("share {}: {e}", s.index))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let secret = sss::reconstruct(&shares, k).map_err(|e| e.to_string())?;
    String::from_utf8(secret).map_err(|_| "rebuilt secret is not UTF-8".to_string())
}

pub fn strength_json(candidate: &str) -> String {
    let charset_size = inferred_charset_size(candidate);
    let length = candidate.chars().count();
    let report = StrengthReport {
        charset_size,
        length,
        bits: combination_bits(charset_size, length as u64),
        class: password::strength(charset_size, length as u64).to_string(),
    };
    serde_json::to_string(&report).expect("plain struct")
}

pub fn simulate_json(n: usize, k: usize, compromised: usize, scheme: &str, seed: u64) -> Result<String, String> {
    let scheme = match scheme {
        "baseline" => Scheme::Baseline,
        "maildust" => Scheme::Maildust,
        other => return Err(format!("unknown scheme {other:?}")),
    };
    let report = threat::simulate_scenario(n, k, compromised, scheme, seed).map_err(|e| e.to_string())?;
    let view = AttackView {
        outcome: match report.outcome {
            threat::Outcome::FullCompromise => "full compromise",
            threat::Outcome::NoInformation => "no information",
        },
        mails_seen: report.mails_seen,
        shares_needed: report.threshold,
        login_verified: report.login_verified,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn split(secret: &str, k: usize, n: usize) -> Result<String, JsValue> {
    js(split_json(secret, k, n, None))
}

#[wasm_bindgen]
pub fn reconstruct(shares: &str, k: usize) -> Result<String, JsValue> {
    js(reconstruct_json(shares, k))
}

#[wasm_bindgen]
pub fn strength(candidate: &str) -> String {
    strength_json(candidate)
}

#[wasm_bindgen]
pub fn simulate(n: usize, k: usize, compromised: usize, scheme: &str, seed: u32) -> Result<String, JsValue> {
    js(simulate_json(n, k, compromised, scheme, seed as u64))
}
