use std::fmt;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

/// Domain of an assignment variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Vertex,
    Edge,
    Int,
    Float,
    String,
    Bool,
}

impl ValueKind {
    pub fn is_numeric(self) -> bool {
        matches!(self, ValueKind::Int | ValueKind::Float)
    }

    pub fn is_primitive(self) -> bool {
        !matches!(self, ValueKind::Vertex | ValueKind::Edge)
    }

    pub fn name(self) -> &'static str {
        match self {
            ValueKind::Vertex => "vertex",
            ValueKind::Edge => "edge",
            ValueKind::Int => "int",
            ValueKind::Float => "float",
            ValueKind::String => "string",
            ValueKind::Bool => "bool",
        }
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A single value inside an assignment tuple or a vertex payload.
///
/// Floats are wrapped so tuples can live in ordered sets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    Vertex(String),
    Edge(String),
    Int(i64),
    Float(OrderedFloat<f64>),
    String(String),
    Bool(bool),
}

impl Value {
    pub fn kind(&self) -> ValueKind {
        match self {
            Value::Vertex(_) => ValueKind::Vertex,
            Value::Edge(_) => ValueKind::Edge,
            Value::Int(_) => ValueKind::Int,
            Value::Float(_) => ValueKind::Float,
            Value::String(_) => ValueKind::String,
            Value::Bool(_) => ValueKind::Bool,
        }
    }

    pub fn float(v: f64) -> Value {
        Value::Float(OrderedFloat(v))
    }

    pub fn vertex(id: impl Into<String>) -> Value {
        Value::Vertex(id.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(f.0),
            _ => None,
        }
    }

    /// Text form used by delta scripts: bare ids are vertex references,
    /// `&id` marks an edge reference, strings are double-quoted.
    pub fn to_literal(&self) -> String {
        match self {
            Value::Vertex(id) => id.clone(),
            Value::Edge(id) => format!("&{id}"),
            Value::Int(i) => i.to_string(),
            Value::Float(f) => format_float(f.0),
            Value::String(s) => serde_json::to_string(s).expect("string serializes"),
            Value::Bool(b) => b.to_string(),
        }
    }

    /// Inverse of [`Value::to_literal`].
    pub fn parse_literal(text: &str) -> Option<Value> {
        let text = text.trim();
        if text.is_empty() {
            return None;
        }
        if text.starts_with('"') {
            return serde_json::from_str::<String>(text).ok().map(Value::String);
        }
        match text {
            "true" => return Some(Value::Bool(true)),
            "false" => return Some(Value::Bool(false)),
            _ => {}
        }
        if let Some(id) = text.strip_prefix('&') {
            return is_ident(id).then(|| Value::Edge(id.to_string()));
        }
        let first = text.chars().next()?;
        if first.is_ascii_digit() || first == '-' || first == '+' {
            if let Ok(i) = text.parse::<i64>() {
                return Some(Value::Int(i));
            }
            return text.parse::<f64>().ok().map(Value::float);
        }
        if text == "NaN" || text == "inf" || text == "-inf" {
            return text.parse::<f64>().ok().map(Value::float);
        }
        is_ident(text).then(|| Value::Vertex(text.to_string()))
    }
}

fn format_float(v: f64) -> String {
    if v.is_finite() && v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v:?}")
    }
}

/// Characters allowed in element ids written bare in text formats.
pub fn is_ident(text: &str) -> bool {
    !text.is_empty()
        && text
            .chars()
            .all(|c| c.is_alphanumeric() || matches!(c, '_' | '.' | '-' | ':' | '#' | '~' | '/' | '@'))
        && !text.starts_with(|c: char| c.is_ascii_digit() || c == '-')
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_literal())
    }
}

/// Serde adapter writing primitive payloads as plain JSON scalars.
pub(crate) mod scalar {
    use super::Value;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Value>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            None => s.serialize_none(),
            Some(Value::Int(i)) => i.serialize(s),
            Some(Value::Float(f)) => f.0.serialize(s),
            Some(Value::String(t)) => t.serialize(s),
            Some(Value::Bool(b)) => b.serialize(s),
            Some(other) => other.serialize(s),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Value>, D::Error> {
        let json = Option::<serde_json::Value>::deserialize(d)?;
        Ok(match json {
            None | Some(serde_json::Value::Null) => None,
            Some(serde_json::Value::Bool(b)) => Some(Value::Bool(b)),
            Some(serde_json::Value::String(t)) => Some(Value::String(t)),
            Some(serde_json::Value::Number(n)) => Some(match n.as_i64() {
                Some(i) => Value::Int(i),
                None => Value::float(n.as_f64().ok_or_else(|| D::Error::custom("bad number"))?),
            }),
            Some(other) => Some(serde_json::from_value(other).map_err(D::Error::custom)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_forms() {
        assert_eq!(Value::parse_literal("v1"), Some(Value::vertex("v1")));
        assert_eq!(Value::parse_literal("3"), Some(Value::Int(3)));
        assert_eq!(Value::parse_literal("3.0"), Some(Value::float(3.0)));
        assert_eq!(Value::parse_literal("&e7"), Some(Value::Edge("e7".into())));
        assert_eq!(
            Value::parse_literal("\"a b\""),
            Some(Value::String("a b".into()))
        );
        assert_eq!(Value::parse_literal("true"), Some(Value::Bool(true)));
        assert_eq!(Value::parse_literal(""), None);
        assert_eq!(Value::parse_literal("a b"), None);
    }

    #[test]
    fn literal_round_trip() {
        for v in [
            Value::Int(-4),
            Value::float(2.5),
            Value::float(-3.0),
            Value::float(1e-9),
            Value::String("x,\"y\")".into()),
            Value::vertex("cd::c1"),
            Value::Edge("e1".into()),
            Value::Bool(false),
        ] {
            assert_eq!(Value::parse_literal(&v.to_literal()), Some(v));
        }
    }
}
