//! Canonical JSON: sorted keys, two-space indent, floats at 17 significant
//! digits. Identical values always print identically, so reports can be
//! compared byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::HarnessError;

pub fn to_canonical<S: Serialize>(value: &S) -> Result<String, HarnessError> {
    let v = serde_json::to_value(value).map_err(|e| HarnessError::Io(e.to_string()))?;
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

pub fn write_canonical<S: Serialize>(path: &Path, value: &S) -> Result<(), HarnessError> {
    std::fs::write(path, to_canonical(value)?).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

pub fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => out.push_str(&v.to_string()),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => write!(out, "{u}").unwrap(),
            (None, Some(i)) => write!(out, "{i}").unwrap(),
            _ => write_float(n.as_f64().expect("number"), out),
        },
        Value::Array(items) => {
            // Flat numeric arrays stay on one line.
            if items.iter().all(Value::is_number) {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(item, indent, out);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                pad(indent + 1, out);
                write_value(item, indent + 1, out);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(indent, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (k, key) in keys.iter().enumerate() {
                pad(indent + 1, out);
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push_str(": ");
                write_value(&map[*key], indent + 1, out);
                out.push_str(if k + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(indent, out);
            out.push('}');
        }
    }
}

fn write_float(x: f64, out: &mut String) {
    // serde_json maps non-finite floats to null before we get here.
    write!(out, "{x:.16e}").unwrap();
}

fn pad(indent: usize, out: &mut String) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn sorted_and_fixed_width() {
        let s = to_canonical(&json!({"b": 0.1, "a": [1, 2.5], "c": {"z": null, "y": "q"}})).unwrap();
        assert_eq!(
            s,
            "{\n  \"a\": [1, 2.5000000000000000e0],\n  \"b\": 1.0000000000000001e-1,\n  \"c\": {\n    \"y\": \"q\",\n    \"z\": null\n  }\n}\n"
        );
    }

    #[test]
    fn floats_roundtrip() {
        let xs = vec![0.1f64, 1.0 / 3.0, -2.2250738585072014e-308, 1e300, 0.7969];
        let back: Vec<f64> = serde_json::from_str(&to_canonical(&xs).unwrap()).unwrap();
        assert_eq!(xs, back);
    }
}
