//! Password generation, strength classes and salted SHA-512 storage records.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha512};
use subtle::ConstantTimeEq;
use thiserror::Error;

pub const SALT_LEN: usize = 16;
pub const DIGEST_LEN: usize = 64;
pub const HASH_ALGORITHM: &str = "sha512-salted";

/// Upper bound (inclusive, in bits) of the Weak class.
pub const WEAK_MAX_BITS: f64 = 50.0;
/// Upper bound (inclusive, in bits) of the Medium class.
pub const MEDIUM_MAX_BITS: f64 = 70.0;

pub const ALPHANUMERIC: &str = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PasswordError {
    #[error("password length must be at least 1")]
    ZeroLength,
    #[error("charset needs at least 2 characters, got {0}")]
    CharsetTooSmall(usize),
    #[error("charset contains duplicate character {0:?}")]
    DuplicateCharacter(char),
}

/// Length and alphabet used to generate passwords.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PolicySpec", into = "PolicySpec")]
pub struct PasswordPolicy {
    length: usize,
    charset: Vec<char>,
}

#[derive(Serialize, Deserialize)]
struct PolicySpec {
    length: usize,
    charset: String,
}

impl TryFrom<PolicySpec> for PasswordPolicy {
    type Error = PasswordError;
    fn try_from(raw: PolicySpec) -> Result<Self, Self::Error> {
        PasswordPolicy::new(raw.length, &raw.charset)
    }
}

impl From<PasswordPolicy> for PolicySpec {
    fn from(p: PasswordPolicy) -> Self {
        PolicySpec {
            length: p.length,
            charset: p.charset.into_iter().collect(),
        }
    }
}

impl PasswordPolicy {
    pub fn new(length: usize, charset: &str) -> Result<Self, PasswordError> {
        if length == 0 {
            return Err(PasswordError::ZeroLength);
        }
        let chars: Vec<char> = charset.chars().collect();
        if chars.len() < 2 {
            return Err(PasswordError::CharsetTooSmall(chars.len()));
        }
        let mut seen = std::collections::HashSet::new();
        for &c in &chars {
            if !seen.insert(c) {
                return Err(PasswordError::DuplicateCharacter(c));
            }
        }
        Ok(PasswordPolicy {
            length,
            charset: chars,
        })
    }

    /// The 94 printable ASCII characters (0x21..=0x7E).
    pub fn printable_ascii(length: usize) -> Result<Self, PasswordError> {
        let charset: String = (0x21u8..=0x7E).map(char::from).collect();
        Self::new(length, &charset)
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn charset(&self) -> &[char] {
        &self.charset
    }

    pub fn strength(&self) -> StrengthClass {
        strength(self.charset.len() as u64, self.length as u64)
    }
}

impl Default for PasswordPolicy {
    /// 16 printable ASCII characters, about 104.9 bits.
    fn default() -> Self {
        Self::printable_ascii(16).expect("static policy is valid")
    }
}

/// Draws `policy.length()` characters uniformly from the policy's charset.
pub fn generate<R: RngCore + ?Sized>(policy: &PasswordPolicy, rng: &mut R) -> String {
    (0..policy.length)
        .map(|_| policy.charset[rng.gen_range(0..policy.charset.len())])
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StrengthClass {
    Weak,
    Medium,
    Strong,
}

impl std::fmt::Display for StrengthClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StrengthClass::Weak => "weak",
            StrengthClass::Medium => "medium",
            StrengthClass::Strong => "strong",
        })
    }
}

/// log2 of `charset_size ^ length`.
pub fn combination_bits(charset_size: u64, length: u64) -> f64 {
    length as f64 * (charset_size as f64).log2()
}

/// Weak up to and including 2^50 combinations, Strong above 2^70, Medium between.
pub fn strength(charset_size: u64, length: u64) -> StrengthClass {
    classify_bits(combination_bits(charset_size, length))
}

pub fn classify_bits(bits: f64) -> StrengthClass {
    if bits <= WEAK_MAX_BITS {
        StrengthClass::Weak
    } else if bits <= MEDIUM_MAX_BITS {
        StrengthClass::Medium
    } else {
        StrengthClass::Strong
    }
}

/// Alphabet size implied by the character classes present in a
/// user-chosen password: lowercase, uppercase, digits, ASCII symbols
/// (including space) and a flat 128 for anything non-ASCII.
pub fn inferred_charset_size(password: &str) -> u64 {
    let mut classes = [false; 5];
    for c in password.chars() {
        let slot = match c {
            'a'..='z' => 0,
            'A'..='Z' => 1,
            '0'..='9' => 2,
            ' '..='~' => 3,
            _ => 4,
        };
        classes[slot] = true;
    }
    [26, 26, 10, 33, 128]
        .iter()
        .zip(classes)
        .filter(|(_, present)| *present)
        .map(|(size, _)| size)
        .sum()
}

/// Strength of a human-chosen password, judged by its implied alphabet.
pub fn chosen_password_strength(password: &str) -> StrengthClass {
    strength(
        inferred_charset_size(password),
        password.chars().count() as u64,
    )
}

/// Stored form of a password: salt plus SHA-512(salt || password).
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PasswordHashRecord {
    #[serde(with = "hex::serde")]
    pub salt: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub digest: [u8; DIGEST_LEN],
    pub algorithm: String,
}

impl std::fmt::Debug for PasswordHashRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PasswordHashRecord")
            .field("salt", &hex::encode(&self.salt))
            .field("digest", &hex::encode(self.digest))
            .field("algorithm", &self.algorithm)
            .finish()
    }
}

pub fn new_salt<R: RngCore + ?Sized>(rng: &mut R) -> [u8; SALT_LEN] {
    let mut salt = [0u8; SALT_LEN];
    rng.fill_bytes(&mut salt);
    salt
}

pub fn hash_password(password: &str, salt: &[u8]) -> PasswordHashRecord {
    let mut hasher = Sha512::new();
    hasher.update(salt);
    hasher.update(password.as_bytes());
    PasswordHashRecord {
        salt: salt.to_vec(),
        digest: hasher.finalize().into(),
        algorithm: HASH_ALGORITHM.to_string(),
    }
}

pub fn verify_password(password: &str, record: &PasswordHashRecord) -> bool {
    let candidate = hash_password(password, &record.salt);
    bool::from(candidate.digest.ct_eq(&record.digest))
}
