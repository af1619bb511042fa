//! Canonical hashing shared by call de-duplication and fixture naming.

use std::collections::BTreeMap;

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of `(name, arguments)` with arguments in sorted key order, so
/// `{a:1,b:2}` and `{b:2,a:1}` fingerprint identically.
pub fn call_fingerprint(name: &str, arguments: &Map<String, Value>) -> String {
    let sorted: BTreeMap<&String, &Value> = arguments.iter().collect();
    let canonical = serde_json::to_string(&(name, sorted)).expect("arguments serialize");
    sha256_hex(canonical.as_bytes())[..16].to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn order_insensitive() {
        let a = json!({"a": 1, "b": 2}).as_object().cloned().unwrap();
        let mut b = Map::new();
        b.insert("b".into(), json!(2));
        b.insert("a".into(), json!(1));
        assert_eq!(call_fingerprint("t", &a), call_fingerprint("t", &b));
        assert_ne!(call_fingerprint("t", &a), call_fingerprint("u", &a));
        assert_eq!(call_fingerprint("t", &a).len(), 16);
    }
}
