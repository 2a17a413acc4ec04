//! Canonical JSON: object keys sorted byte-wise, no insignificant
//! whitespace, UTF-8, arrays in stored order. Only integers are allowed
//! as numbers.

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Encode any serializable value as canonical JSON bytes.
pub fn to_canonical_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let v = serde_json::to_value(value).map_err(|e| Error::Encoding(e.to_string()))?;
    encode_value(&v)
}

pub fn encode_value(v: &Value) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_value(v, &mut out)?;
    Ok(out)
}

fn write_value(v: &Value, out: &mut Vec<u8>) -> Result<()> {
    match v {
        Value::Null => out.extend_from_slice(b"null"),
        Value::Bool(true) => out.extend_from_slice(b"true"),
        Value::Bool(false) => out.extend_from_slice(b"false"),
        Value::Number(n) => {
            if !(n.is_i64() || n.is_u64()) {
                return Err(Error::Encoding(format!("non-integer number {n} is not representable")));
            }
            out.extend_from_slice(n.to_string().as_bytes());
        }
        Value::String(s) => write_string(s, out)?,
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_value(item, out)?;
            }
            out.push(b']');
        }
        Value::Object(map) => {
            // Sorted explicitly so the result does not depend on how the
            // map type is configured.
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort_by(|a, b| a.as_bytes().cmp(b.as_bytes()));
            out.push(b'{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_string(k, out)?;
                out.push(b':');
                write_value(&map[k.as_str()], out)?;
            }
            out.push(b'}');
        }
    }
    Ok(())
}

fn write_string(s: &str, out: &mut Vec<u8>) -> Result<()> {
    let enc = serde_json::to_string(s).map_err(|e| Error::Encoding(e.to_string()))?;
    out.extend_from_slice(enc.as_bytes());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn sorts_keys_and_strips_whitespace() {
        let v = json!({"b": 1, "a": [true, null, "x"], "c": {"z": 0, "y": -3}});
        assert_eq!(
            encode_value(&v).unwrap(),
            br#"{"a":[true,null,"x"],"b":1,"c":{"y":-3,"z":0}}"#.to_vec()
        );
    }

    #[test]
    fn rejects_floats() {
        assert!(encode_value(&json!({"x": 1.5})).is_err());
    }

    #[test]
    fn byte_order_not_locale_order() {
        let v = json!({"a": 0, "B": 0, "é": 0, "z": 0});
        assert_eq!(encode_value(&v).unwrap(), "{\"B\":0,\"a\":0,\"z\":0,\"é\":0}".as_bytes());
    }
}
