//! Canonical JSON: object keys sorted, shortest round-trip float formatting.

use serde::Serialize;

/// Serialize through `serde_json::Value`, whose maps are ordered by key.
pub fn to_canonical_value<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<serde_json::Value> {
    serde_json::to_value(value)
}

pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    serde_json::to_string(&to_canonical_value(value)?)
}

pub fn to_canonical_pretty<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut s = serde_json::to_string_pretty(&to_canonical_value(value)?)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    #[derive(serde::Serialize)]
    struct Unsorted {
        zeta: u8,
        alpha: u8,
    }

    #[test]
    fn keys_are_sorted() {
        let s = super::to_canonical_string(&Unsorted { zeta: 1, alpha: 2 }).unwrap();
        assert_eq!(s, r#"{"alpha":2,"zeta":1}"#);
    }
}
