//! Canonical JSON: object keys sorted, no insignificant whitespace. Used for
//! signatures, digests and the on-disk record format.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// `serde_json::Value` keeps object keys in a `BTreeMap`, so a round trip
/// through it sorts every level.
pub fn to_value<T: Serialize + ?Sized>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("in-memory model serializes")
}

pub fn to_string<T: Serialize + ?Sized>(value: &T) -> String {
    to_value(value).to_string()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest<T: Serialize + ?Sized>(value: &T) -> String {
    sha256_hex(to_string(value).as_bytes())
}
