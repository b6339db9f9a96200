//! Subset of JSON Schema used by the shipped schema files: `type`, `const`,
//! `enum`, `properties`, `required`, `additionalProperties: false`, `items`,
//! `minItems`, `maxItems`, `minimum`, `maximum`, `exclusiveMinimum`,
//! `pattern` (only `^[0-9a-f]{N}$`), `oneOf` and `$ref` into `$defs`.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_latent-recover"))
}

pub fn run_ok(args: &[&str], dir: &Path) -> Output {
    let out = bin().args(args).current_dir(dir).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

pub struct Validator {
    dir: PathBuf,
}

impl Validator {
    pub fn new() -> Self {
        Self { dir: schema_dir() }
    }

    /// Errors as `path: message`, empty when `value` conforms.
    pub fn validate(&self, schema_file: &str, value: &Value) -> Vec<String> {
        let root = read_json(&self.dir.join(schema_file));
        let mut errors = Vec::new();
        self.check(&root, &root, value, "$", &mut errors);
        errors
    }

    fn resolve(&self, current: &Value, reference: &str) -> (Value, Value) {
        let (file, pointer) = reference.split_once('#').expect("reference must contain '#'");
        let root = if file.is_empty() {
            current.clone()
        } else {
            read_json(&self.dir.join(file))
        };
        let target = root.pointer(pointer).unwrap_or_else(|| panic!("unresolved {reference}")).clone();
        (root, target)
    }

    fn check(&self, root: &Value, schema: &Value, v: &Value, at: &str, errors: &mut Vec<String>) {
        let s = schema.as_object().expect("schema must be an object");
        if let Some(r) = s.get("$ref") {
            let (r_root, target) = self.resolve(root, r.as_str().unwrap());
            self.check(&r_root, &target, v, at, errors);
        }
        if let Some(t) = s.get("type") {
            let allowed: Vec<&str> = match t {
                Value::String(t) => vec![t.as_str()],
                Value::Array(ts) => ts.iter().map(|t| t.as_str().unwrap()).collect(),
                _ => panic!("bad type keyword"),
            };
            if !allowed.iter().any(|t| has_type(v, t)) {
                errors.push(format!("{at}: expected {allowed:?}, got {v}"));
                return;
            }
        }
        if let Some(c) = s.get("const") {
            if !json_eq(c, v) {
                errors.push(format!("{at}: expected {c}, got {v}"));
            }
        }
        if let Some(Value::Array(options)) = s.get("enum") {
            if !options.iter().any(|o| json_eq(o, v)) {
                errors.push(format!("{at}: {v} not in {options:?}"));
            }
        }
        if let Some(Value::Array(options)) = s.get("oneOf") {
            let matches = options
                .iter()
                .filter(|o| {
                    let mut e = Vec::new();
                    self.check(root, o, v, at, &mut e);
                    e.is_empty()
                })
                .count();
            if matches != 1 {
                errors.push(format!("{at}: {matches} oneOf branches match"));
            }
        }
        if let Some(x) = v.as_f64() {
            if let Some(m) = s.get("minimum").and_then(Value::as_f64) {
                if x < m {
                    errors.push(format!("{at}: {x} < minimum {m}"));
                }
            }
            if let Some(m) = s.get("maximum").and_then(Value::as_f64) {
                if x > m {
                    errors.push(format!("{at}: {x} > maximum {m}"));
                }
            }
            if let Some(m) = s.get("exclusiveMinimum").and_then(Value::as_f64) {
                if x <= m {
                    errors.push(format!("{at}: {x} <= exclusive minimum {m}"));
                }
            }
        }
        if let (Some(p), Some(text)) = (s.get("pattern").and_then(Value::as_str), v.as_str()) {
            let len: usize = p
                .strip_prefix("^[0-9a-f]{")
                .and_then(|r| r.strip_suffix("}$"))
                .and_then(|n| n.parse().ok())
                .unwrap_or_else(|| panic!("unsupported pattern {p}"));
            if text.len() != len || !text.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
                errors.push(format!("{at}: '{text}' does not match {p}"));
            }
        }
        if let Some(items) = v.as_array() {
            if let Some(m) = s.get("minItems").and_then(Value::as_u64) {
                if (items.len() as u64) < m {
                    errors.push(format!("{at}: fewer than {m} items"));
                }
            }
            if let Some(m) = s.get("maxItems").and_then(Value::as_u64) {
                if (items.len() as u64) > m {
                    errors.push(format!("{at}: more than {m} items"));
                }
            }
            if let Some(item_schema) = s.get("items") {
                for (i, item) in items.iter().enumerate() {
                    self.check(root, item_schema, item, &format!("{at}[{i}]"), errors);
                }
            }
        }
        if let Some(obj) = v.as_object() {
            if let Some(Value::Array(req)) = s.get("required") {
                for key in req {
                    let key = key.as_str().unwrap();
                    if !obj.contains_key(key) {
                        errors.push(format!("{at}: missing '{key}'"));
                    }
                }
            }
            let props = s.get("properties").and_then(Value::as_object);
            for (key, value) in obj {
                match props.and_then(|p| p.get(key)) {
                    Some(ps) => self.check(root, ps, value, &format!("{at}.{key}"), errors),
                    None if s.get("additionalProperties") == Some(&Value::Bool(false)) => {
                        errors.push(format!("{at}: unexpected '{key}'"))
                    }
                    None => {}
                }
            }
        }
    }
}

fn has_type(v: &Value, t: &str) -> bool {
    match t {
        "null" => v.is_null(),
        "boolean" => v.is_boolean(),
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_u64() || v.is_i64() || v.as_f64().is_some_and(|x| x.fract() == 0.0),
        other => panic!("unknown type {other}"),
    }
}

/// Numeric equality ignores the integer/float distinction.
fn json_eq(a: &Value, b: &Value) -> bool {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x == y,
        _ => a == b,
    }
}
