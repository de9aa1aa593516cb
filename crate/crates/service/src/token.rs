//! List access tokens: 32 random bytes shown once as base64url, stored as
//! `sha256$<salt hex>$<digest hex>`.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use rand::RngCore;
use sha2::{Digest, Sha256};

pub const TOKEN_BYTES: usize = 32;
const SALT_BYTES: usize = 16;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn digest(salt: &[u8], raw: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(salt);
    h.update(raw.as_bytes());
    h.finalize().into()
}

/// Returns `(raw token, stored hash)`.
pub fn generate() -> (String, String) {
    let mut rng = rand::rng();
    let mut raw = [0u8; TOKEN_BYTES];
    rng.fill_bytes(&mut raw);
    let token = URL_SAFE_NO_PAD.encode(raw);
    let mut salt = [0u8; SALT_BYTES];
    rng.fill_bytes(&mut salt);
    let hash = format!("sha256${}${}", hex(&salt), hex(&digest(&salt, &token)));
    (token, hash)
}

fn unhex(s: &str) -> Option<Vec<u8>> {
    if !s.len().is_multiple_of(2) {
        return None;
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok())
        .collect()
}

/// Constant-time comparison of `raw` against a stored hash.
pub fn verify(raw: &str, stored: &str) -> bool {
    let mut parts = stored.split('$');
    let (Some("sha256"), Some(salt), Some(expected), None) = (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return false;
    };
    let (Some(salt), Some(expected)) = (unhex(salt), unhex(expected)) else {
        return false;
    };
    let actual = digest(&salt, raw);
    expected.len() == actual.len() && expected.iter().zip(actual).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0
}
