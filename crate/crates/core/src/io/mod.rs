//! File formats: crystal documents (JSON), run configuration (TOML) and a
//! P1 CIF exporter.

mod cif;
mod config;
mod document;

pub use cif::to_cif;
pub use config::{Mode, Paths, RunConfig, SampleConfig};
pub use document::{read_crystal, read_crystal_dir, write_crystal, AtomRecord, CrystalDocument, LatticeSpec, SCHEMA};

use serde::Serialize;

use crate::error::Result;

/// JSON with two-space indentation where arrays of scalars, and arrays of
/// such arrays, stay on one line.
pub fn to_json_compact<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    render(&v, 0, &mut out)?;
    out.push('\n');
    Ok(out)
}

fn is_flat(v: &serde_json::Value) -> bool {
    match v {
        serde_json::Value::Array(a) => a.iter().all(|x| !x.is_object() && (!x.is_array() || is_flat(x))),
        serde_json::Value::Object(_) => false,
        _ => true,
    }
}

fn render(v: &serde_json::Value, indent: usize, out: &mut String) -> Result<()> {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        serde_json::Value::Object(m) if !m.is_empty() => {
            out.push_str("{\n");
            for (i, (k, x)) in m.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::to_string(k)?);
                out.push_str(": ");
                render(x, indent + 1, out)?;
                out.push_str(if i + 1 < m.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
        serde_json::Value::Array(a) if !is_flat(v) => {
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                render(x, indent + 1, out)?;
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        serde_json::Value::Array(a) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                render(x, indent, out)?;
            }
            out.push(']');
        }
        _ => out.push_str(&serde_json::to_string(v)?),
    }
    Ok(())
}
