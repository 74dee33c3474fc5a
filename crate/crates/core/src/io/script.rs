use std::fmt;

use thiserror::Error;

use crate::model::{Content, Delta, DeltaSeq, Edge, Endpoint, ModelError, Tuple, Value, Vertex};
use crate::network::{SlotId, Valuation};

/// One line of a delta script; removals name vertices and edges by id only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptOp {
    Add(Delta),
    RemoveVertex(String),
    RemoveEdge(String),
    RemoveTuple(Tuple),
}

/// Edits to one slot, applied as a single user edit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptGroup {
    pub slot: SlotId,
    pub ops: Vec<ScriptOp>,
}

/// Text format:
///
/// ```text
/// # comment
/// @ slot
/// +v id Type [payload]
/// -v id
/// +e id type src tgt
/// -e id
/// +t (v1,2,"x")
/// -t (v1,2,"x")
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DeltaScript {
    pub groups: Vec<ScriptGroup>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScriptError {
    #[error("ParseError: line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("ResolveError: slot `{slot}`: {message}")]
    Resolve { slot: SlotId, message: String },
    #[error("ResolveError: slot `{slot}`: {source}")]
    Model { slot: SlotId, source: ModelError },
}

fn parse_line(line: &str) -> Result<ScriptOp, String> {
    let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
    let rest = rest.trim();
    let words: Vec<&str> = rest.split_whitespace().collect();
    let want = |n: usize| -> Result<(), String> {
        if words.len() == n {
            Ok(())
        } else {
            Err(format!("`{head}` takes {n} fields, found {}", words.len()))
        }
    };
    let tuple = || Tuple::parse_literal(rest).ok_or_else(|| format!("bad tuple `{rest}`"));
    match head {
        "+v" => {
            let mut parts = rest.splitn(3, char::is_whitespace);
            let id = parts.next().filter(|s| !s.is_empty());
            let ty = parts.next().filter(|s| !s.is_empty());
            let (Some(id), Some(ty)) = (id, ty) else {
                return Err("`+v` needs an id and a type".into());
            };
            let mut v = Vertex::new(id, ty);
            if let Some(p) = parts.next().map(str::trim).filter(|s| !s.is_empty()) {
                v = v.with_payload(Value::parse_literal(p).ok_or_else(|| format!("bad payload `{p}`"))?);
            }
            Ok(ScriptOp::Add(Delta::AddVertex(v)))
        }
        "-v" => want(1).map(|_| ScriptOp::RemoveVertex(words[0].into())),
        "+e" => {
            want(4)?;
            Ok(ScriptOp::Add(Delta::AddEdge(Edge {
                id: words[0].into(),
                ty: words[1].into(),
                src: Endpoint::parse(words[2]),
                tgt: Endpoint::parse(words[3]),
            })))
        }
        "-e" => want(1).map(|_| ScriptOp::RemoveEdge(words[0].into())),
        "+t" => Ok(ScriptOp::Add(Delta::AddTuple(tuple()?))),
        "-t" => Ok(ScriptOp::RemoveTuple(tuple()?)),
        _ => Err(format!("unknown directive `{head}`")),
    }
}

impl DeltaScript {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut groups: Vec<ScriptGroup> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| ScriptError::Parse {
                line: i + 1,
                message,
            };
            if let Some(slot) = line.strip_prefix('@') {
                let slot = slot.trim();
                if slot.is_empty() || slot.contains(char::is_whitespace) {
                    return Err(err("`@` needs one slot id".into()));
                }
                groups.push(ScriptGroup {
                    slot: slot.into(),
                    ops: Vec::new(),
                });
                continue;
            }
            let op = parse_line(line).map_err(err)?;
            match groups.last_mut() {
                Some(g) => g.ops.push(op),
                None => return Err(err("delta before any `@ slot` line".into())),
            }
        }
        Ok(DeltaScript { groups })
    }

    /// Script text whose parse resolves back to the same deltas.
    pub fn from_deltas<'a>(edits: impl IntoIterator<Item = (&'a str, &'a [Delta])>) -> Self {
        let groups = edits
            .into_iter()
            .map(|(slot, deltas)| ScriptGroup {
                slot: slot.into(),
                ops: deltas
                    .iter()
                    .map(|d| match d {
                        Delta::RemoveVertex(v) => ScriptOp::RemoveVertex(v.id.clone()),
                        Delta::RemoveEdge(e) => ScriptOp::RemoveEdge(e.id.clone()),
                        Delta::RemoveTuple(t) => ScriptOp::RemoveTuple(t.clone()),
                        add => ScriptOp::Add(add.clone()),
                    })
                    .collect(),
            })
            .collect();
        DeltaScript { groups }
    }

    /// Turns each group into full deltas, looking removed elements up in
    /// the contents as left by the earlier lines and groups.
    pub fn resolve(&self, val: &Valuation) -> Result<Vec<(SlotId, DeltaSeq)>, ScriptError> {
        let mut work = val.clone();
        let mut out = Vec::new();
        for g in &self.groups {
            let content = work.get(&g.slot).ok_or_else(|| ScriptError::Resolve {
                slot: g.slot.clone(),
                message: "unknown slot".into(),
            })?;
            let mut current = content.clone();
            let mut deltas = Vec::new();
            for op in &g.ops {
                let missing = |what: &str, id: &str| ScriptError::Resolve {
                    slot: g.slot.clone(),
                    message: format!("no {what} `{id}` to remove"),
                };
                let d = match (op, &current) {
                    (ScriptOp::Add(d), _) => d.clone(),
                    (ScriptOp::RemoveTuple(t), _) => Delta::RemoveTuple(t.clone()),
                    (ScriptOp::RemoveVertex(id), Content::Model(m)) => {
                        Delta::RemoveVertex(m.vertex(id).cloned().ok_or_else(|| missing("vertex", id))?)
                    }
                    (ScriptOp::RemoveEdge(id), Content::Model(m)) => {
                        Delta::RemoveEdge(m.edge(id).cloned().ok_or_else(|| missing("edge", id))?)
                    }
                    (_, Content::Assignment(_)) => {
                        return Err(ScriptError::Resolve {
                            slot: g.slot.clone(),
                            message: "vertex or edge removal on an assignment slot".into(),
                        })
                    }
                };
                current.apply(std::slice::from_ref(&d)).map_err(|source| ScriptError::Model {
                    slot: g.slot.clone(),
                    source,
                })?;
                deltas.push(d);
            }
            work.set(g.slot.clone(), current);
            out.push((g.slot.clone(), deltas));
        }
        Ok(out)
    }
}

impl fmt::Display for ScriptOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScriptOp::Add(d) => write!(f, "{d}"),
            ScriptOp::RemoveVertex(id) => write!(f, "-v {id}"),
            ScriptOp::RemoveEdge(id) => write!(f, "-e {id}"),
            ScriptOp::RemoveTuple(t) => write!(f, "-t {}", t.to_literal()),
        }
    }
}

impl fmt::Display for DeltaScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.groups {
            writeln!(f, "@ {}", g.slot)?;
            for op in &g.ops {
                writeln!(f, "{op}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_groups_and_comments() {
        let s = DeltaScript::parse("# x\n@ cd\n+v p Package \"a b\"\n+e c contains p q\n@ n\n+t (a,1)\n").unwrap();
        assert_eq!(s.groups.len(), 2);
        assert_eq!(
            s.groups[0].ops[0],
            ScriptOp::Add(Delta::AddVertex(
                Vertex::new("p", "Package").with_payload(Value::String("a b".into()))
            ))
        );
        assert_eq!(DeltaScript::parse(&s.to_string()).unwrap(), s);
    }

    #[test]
    fn reports_line_numbers() {
        let e = DeltaScript::parse("@ a\n\n+x y\n").unwrap_err();
        assert_eq!(
            e,
            ScriptError::Parse {
                line: 3,
                message: "unknown directive `+x`".into()
            }
        );
        assert!(DeltaScript::parse("+t (a)\n").is_err());
    }
}
