use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::error::ModelError;
use super::value::{Value, ValueKind};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: ValueKind,
}

impl Variable {
    pub fn new(name: impl Into<String>, kind: ValueKind) -> Self {
        Variable {
            name: name.into(),
            kind,
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name, self.kind)
    }
}

/// One variable assignment; values are positional w.r.t. the owning set's variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tuple(pub Vec<Value>);

impl Tuple {
    pub fn new(values: Vec<Value>) -> Self {
        Tuple(values)
    }

    pub fn values(&self) -> &[Value] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> &Value {
        &self.0[i]
    }

    /// Projects onto the given positions.
    pub fn project(&self, positions: &[usize]) -> Vec<Value> {
        positions.iter().map(|&i| self.0[i].clone()).collect()
    }

    /// `(a,b,c)` text form used in delta scripts.
    pub fn to_literal(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(Value::to_literal).collect();
        format!("({})", parts.join(","))
    }

    /// Parses `(v1,3,"x")`; commas inside quoted strings are respected.
    pub fn parse_literal(text: &str) -> Option<Tuple> {
        let inner = text.trim().strip_prefix('(')?.strip_suffix(')')?;
        if inner.trim().is_empty() {
            return Some(Tuple(Vec::new()));
        }
        let mut values = Vec::new();
        let mut current = String::new();
        let mut in_string = false;
        let mut escaped = false;
        for c in inner.chars() {
            if in_string {
                current.push(c);
                if escaped {
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == '"' {
                    in_string = false;
                }
                continue;
            }
            match c {
                '"' => {
                    in_string = true;
                    current.push(c);
                }
                ',' => {
                    values.push(Value::parse_literal(&current)?);
                    current.clear();
                }
                _ => current.push(c),
            }
        }
        if in_string {
            return None;
        }
        values.push(Value::parse_literal(&current)?);
        Some(Tuple(values))
    }
}

impl From<Vec<Value>> for Tuple {
    fn from(values: Vec<Value>) -> Self {
        Tuple(values)
    }
}

impl fmt::Display for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_literal())
    }
}

/// Set of variable assignments over an ordered variable list.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AssignmentSet {
    variables: Vec<Variable>,
    tuples: BTreeSet<Tuple>,
}

impl AssignmentSet {
    pub fn new(variables: Vec<Variable>) -> Self {
        AssignmentSet {
            variables,
            tuples: BTreeSet::new(),
        }
    }

    pub fn with_tuples(
        variables: Vec<Variable>,
        tuples: impl IntoIterator<Item = Tuple>,
    ) -> Result<Self, ModelError> {
        let mut set = AssignmentSet::new(variables);
        for t in tuples {
            set.check_tuple(&t)?;
            set.tuples.insert(t);
        }
        Ok(set)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn tuples(&self) -> impl Iterator<Item = &Tuple> {
        self.tuples.iter()
    }

    pub fn contains(&self, t: &Tuple) -> bool {
        self.tuples.contains(t)
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Checks arity and value kinds against the variable list.
    pub fn check_tuple(&self, t: &Tuple) -> Result<(), ModelError> {
        check_tuple(&self.variables, t)
    }

    pub(crate) fn insert(&mut self, t: Tuple) -> Result<(), ModelError> {
        self.check_tuple(&t)?;
        if self.tuples.contains(&t) {
            return Err(ModelError::DuplicateTuple(t.to_literal()));
        }
        self.tuples.insert(t);
        Ok(())
    }

    pub(crate) fn remove(&mut self, t: &Tuple) -> Result<(), ModelError> {
        if !self.tuples.remove(t) {
            return Err(ModelError::MissingTuple(t.to_literal()));
        }
        Ok(())
    }
}

pub fn check_tuple(variables: &[Variable], t: &Tuple) -> Result<(), ModelError> {
    if t.len() != variables.len() {
        return Err(ModelError::Arity {
            tuple: t.to_literal(),
            expected: variables.len(),
            got: t.len(),
        });
    }
    for (var, value) in variables.iter().zip(t.values()) {
        if var.kind != value.kind() {
            return Err(ModelError::TupleKind {
                var: var.name.clone(),
                expected: var.kind,
                got: value.kind(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars() -> Vec<Variable> {
        vec![
            Variable::new("v", ValueKind::Vertex),
            Variable::new("n", ValueKind::Int),
        ]
    }

    #[test]
    fn tuple_literal() {
        let t = Tuple::parse_literal("(v1,3)").unwrap();
        assert_eq!(t, Tuple(vec![Value::vertex("v1"), Value::Int(3)]));
        let s = Tuple::parse_literal(r#"("a,b", 2.5)"#).unwrap();
        assert_eq!(s.0[0], Value::String("a,b".into()));
        assert_eq!(Tuple::parse_literal(&s.to_literal()), Some(s));
        assert_eq!(Tuple::parse_literal("v1,3"), None);
        assert_eq!(Tuple::parse_literal("()"), Some(Tuple(vec![])));
    }

    #[test]
    fn kind_and_arity_checked() {
        let mut a = AssignmentSet::new(vars());
        assert!(matches!(
            a.insert(Tuple(vec![Value::vertex("v1")])),
            Err(ModelError::Arity { .. })
        ));
        assert!(matches!(
            a.insert(Tuple(vec![Value::Int(1), Value::Int(1)])),
            Err(ModelError::TupleKind { .. })
        ));
        a.insert(Tuple(vec![Value::vertex("v1"), Value::Int(1)]))
            .unwrap();
        assert!(matches!(
            a.insert(Tuple(vec![Value::vertex("v1"), Value::Int(1)])),
            Err(ModelError::DuplicateTuple(_))
        ));
    }
}
