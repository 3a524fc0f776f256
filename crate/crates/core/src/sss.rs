//! K-of-N secret sharing over GF(256), applied independently to every byte
//! of the secret.
//!
//! Each byte position gets its own random polynomial of degree at most k-1
//! whose constant term is the secret byte. Share `i` holds the evaluations
//! at x = i for every position, so a share is exactly as long as the secret.

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf256::Gf256;

/// Largest number of shares a single sharing can produce (x = 1..=255).
pub const MAX_SHARES: usize = 255;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SssError {
    #[error("secret is empty")]
    EmptySecret,
    #[error("invalid sharing policy k={k}, n={n} (need 1 <= k <= n <= 255)")]
    InvalidPolicy { k: usize, n: usize },
    #[error("not enough shares: have {have}, need {need}")]
    NotEnoughShares { have: usize, need: usize },
    #[error("duplicate share index {0}")]
    DuplicateIndex(u8),
    #[error("share index 0 is reserved for the secret")]
    ZeroIndex,
    #[error("share payloads differ in length")]
    LengthMismatch,
    #[error("share {index} does not lie on the interpolated polynomial")]
    ShareMismatch { index: u8 },
}

/// Threshold `k` out of `n` total shares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharingPolicy {
    k: u8,
    n: u8,
}

impl SharingPolicy {
    pub fn new(k: usize, n: usize) -> Result<Self, SssError> {
        if k < 1 || k > n || n > MAX_SHARES {
            return Err(SssError::InvalidPolicy { k, n });
        }
        Ok(SharingPolicy {
            k: k as u8,
            n: n as u8,
        })
    }

    pub fn k(&self) -> usize {
        self.k as usize
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }
}

/// One token: the evaluation point and the per-byte evaluations.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Share {
    pub index: u8,
    pub payload: Vec<u8>,
}

// Payload bytes stay out of Debug output.
impl std::fmt::Debug for Share {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Share")
            .field("index", &self.index)
            .field("len", &self.payload.len())
            .finish()
    }
}

/// Splits `secret` into `policy.n()` shares with indices 1..=n.
///
/// Coefficients are drawn from `rng` position by position: for byte `i` the
/// coefficients of x^1..x^(k-1) are the next k-1 bytes of the stream.
pub fn split<R: RngCore + ?Sized>(
    secret: &[u8],
    policy: SharingPolicy,
    rng: &mut R,
) -> Result<Vec<Share>, SssError> {
    if secret.is_empty() {
        return Err(SssError::EmptySecret);
    }
    let k = policy.k();
    let n = policy.n();

    let mut coefficients = vec![0u8; secret.len() * (k - 1)];
    rng.fill_bytes(&mut coefficients);

    let mut shares: Vec<Share> = (1..=n as u8)
        .map(|index| Share {
            index,
            payload: Vec::with_capacity(secret.len()),
        })
        .collect();

    for (pos, &byte) in secret.iter().enumerate() {
        let row = &coefficients[pos * (k - 1)..(pos + 1) * (k - 1)];
        for share in shares.iter_mut() {
            share.payload.push(evaluate(byte, row, Gf256(share.index)).0);
        }
    }

    coefficients.iter_mut().for_each(|c| *c = 0);
    Ok(shares)
}

/// Horner evaluation of `constant + row[0] x + row[1] x^2 + ...`.
fn evaluate(constant: u8, row: &[u8], x: Gf256) -> Gf256 {
    let mut acc = Gf256::ZERO;
    for &c in row.iter().rev() {
        acc = acc * x + Gf256(c);
    }
    acc * x + Gf256(constant)
}

/// Lagrange weights for evaluating the polynomial through `xs` at `at`.
fn lagrange_weights(xs: &[Gf256], at: Gf256) -> Vec<Gf256> {
    xs.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let mut num = Gf256::ONE;
            let mut den = Gf256::ONE;
            for (j, &xj) in xs.iter().enumerate() {
                if i != j {
                    num *= at - xj;
                    den *= xi - xj;
                }
            }
            // indices are distinct, so den is nonzero
            num / den
        })
        .collect()
}

/// Recovers the secret from at least `k` shares.
///
/// The first `k` shares determine the polynomial. Every further share must
/// lie on it, otherwise `ShareMismatch` is returned.
pub fn reconstruct(shares: &[Share], k: usize) -> Result<Vec<u8>, SssError> {
    if !(1..=MAX_SHARES).contains(&k) {
        return Err(SssError::InvalidPolicy { k, n: shares.len() });
    }
    if shares.len() < k {
        return Err(SssError::NotEnoughShares {
            have: shares.len(),
            need: k,
        });
    }

    let mut seen = [false; 256];
    for share in shares {
        if share.index == 0 {
            return Err(SssError::ZeroIndex);
        }
        if std::mem::replace(&mut seen[share.index as usize], true) {
            return Err(SssError::DuplicateIndex(share.index));
        }
    }
    let len = shares[0].payload.len();
    if shares.iter().any(|s| s.payload.len() != len) {
        return Err(SssError::LengthMismatch);
    }

    let (basis, extras) = shares.split_at(k);
    let xs: Vec<Gf256> = basis.iter().map(|s| Gf256(s.index)).collect();
    let at_zero = lagrange_weights(&xs, Gf256::ZERO);
    let extra_weights: Vec<Vec<Gf256>> = extras
        .iter()
        .map(|s| lagrange_weights(&xs, Gf256(s.index)))
        .collect();

    let mut secret = Vec::with_capacity(len);
    for pos in 0..len {
        let interpolate = |weights: &[Gf256]| {
            basis
                .iter()
                .zip(weights)
                .fold(Gf256::ZERO, |acc, (s, &w)| acc + Gf256(s.payload[pos]) * w)
        };
        for (extra, weights) in extras.iter().zip(&extra_weights) {
            if interpolate(weights) != Gf256(extra.payload[pos]) {
                return Err(SssError::ShareMismatch { index: extra.index });
            }
        }
        secret.push(interpolate(&at_zero).0);
    }
    Ok(secret)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    /// Shift-and-add multiply written out long-hand, independent of `gf_mul`.
    fn oracle_mul(a: u8, b: u8) -> u8 {
        let mut result: u16 = 0;
        for bit in 0..8 {
            if b & (1 << bit) != 0 {
                result ^= (a as u16) << bit;
            }
        }
        for bit in (8..16).rev() {
            if result & (1 << bit) != 0 {
                result ^= 0x11B << (bit - 8);
            }
        }
        result as u8
    }

    #[test]
    fn policy_bounds() {
        assert!(SharingPolicy::new(1, 1).is_ok());
        assert!(SharingPolicy::new(255, 255).is_ok());
        assert_eq!(
            SharingPolicy::new(0, 3),
            Err(SssError::InvalidPolicy { k: 0, n: 3 })
        );
        assert!(SharingPolicy::new(4, 3).is_err());
        assert!(SharingPolicy::new(2, 256).is_err());
    }

    #[test]
    fn empty_secret_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let policy = SharingPolicy::new(2, 3).unwrap();
        assert_eq!(split(&[], policy, &mut rng), Err(SssError::EmptySecret));
    }

    #[test]
    fn threshold_one_copies_secret() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let secret = b"hunter2-but-longer";
        let shares = split(secret, SharingPolicy::new(1, 3).unwrap(), &mut rng).unwrap();
        assert_eq!(shares.len(), 3);
        for share in &shares {
            assert_eq!(share.payload, secret);
        }
        let single = split(secret, SharingPolicy::new(1, 1).unwrap(), &mut rng).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].payload, secret);
    }

    #[test]
    fn seeded_single_byte_example() {
        let policy = SharingPolicy::new(2, 3).unwrap();
        let shares = split(&[0x2A], policy, &mut ChaCha20Rng::seed_from_u64(42)).unwrap();

        // Oracle: draw the single slope the same way and evaluate 0x2A + c*x
        // with the long-hand multiply.
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let mut slope = [0u8; 1];
        rng.fill_bytes(&mut slope);
        let oracle: Vec<u8> = (1..=3u8).map(|x| 0x2A ^ oracle_mul(slope[0], x)).collect();

        let got: Vec<u8> = shares.iter().map(|s| s.payload[0]).collect();
        assert_eq!(got, oracle);
        // frozen from the oracle run
        assert_eq!(got, vec![0x52, 0xDA, 0xA2]);
        assert_eq!(shares.iter().map(|s| s.index).collect::<Vec<_>>(), [1, 2, 3]);

        let picked = vec![shares[0].clone(), shares[2].clone()];
        assert_eq!(reconstruct(&picked, 2).unwrap(), vec![0x2A]);
    }

    #[test]
    fn too_few_shares() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let shares = split(b"abc", SharingPolicy::new(3, 5).unwrap(), &mut rng).unwrap();
        assert_eq!(
            reconstruct(&shares[..2], 3),
            Err(SssError::NotEnoughShares { have: 2, need: 3 })
        );
    }

    #[test]
    fn duplicate_and_zero_indices_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let shares = split(b"abc", SharingPolicy::new(2, 3).unwrap(), &mut rng).unwrap();
        let dup = vec![shares[0].clone(), shares[0].clone()];
        assert_eq!(reconstruct(&dup, 2), Err(SssError::DuplicateIndex(1)));

        let mut zero = shares[1].clone();
        zero.index = 0;
        assert_eq!(
            reconstruct(&[shares[0].clone(), zero], 2),
            Err(SssError::ZeroIndex)
        );
    }

    #[test]
    fn length_mismatch_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut shares = split(b"abcd", SharingPolicy::new(2, 3).unwrap(), &mut rng).unwrap();
        shares[1].payload.pop();
        assert_eq!(reconstruct(&shares, 2), Err(SssError::LengthMismatch));
    }

    #[test]
    fn inconsistent_extra_share_detected() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let mut shares = split(b"secret", SharingPolicy::new(2, 4).unwrap(), &mut rng).unwrap();
        shares[3].payload[2] ^= 0x40;
        assert_eq!(
            reconstruct(&shares, 2),
            Err(SssError::ShareMismatch { index: 4 })
        );
        // the corrupted share alone outside the basis is simply not consulted
        assert_eq!(reconstruct(&shares[..3], 2).unwrap(), b"secret");
    }

    #[test]
    fn debug_hides_payload() {
        let share = Share {
            index: 7,
            payload: vec![0xAB; 4],
        };
        let text = format!("{share:?}");
        assert!(!text.contains("171"));
        assert!(text.contains("len: 4"));
    }
}
