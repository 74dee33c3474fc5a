use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::model::{AssignmentSet, Content, TypeGraph, TypedGraph};
use crate::network::{
    build_network, Egdn, EgdnBuilder, NetworkError, NodeClass, Operator, Slot, SlotId, SlotKind,
    Valuation,
};
use crate::operators::{
    AntiJoin, BiMapping, Composite, EdgeInput, Expression, GroupCount, GroupExpr, GroupSum, Join,
    NodeInput, PatternMatch, Restrict, SyncBi, SyncRuleSet, SyncUni,
};

/// JSON description of a network and, optionally, its initial contents.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NetworkSpec {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub type_graphs: BTreeMap<String, TypeGraph>,
    pub slots: Vec<SlotSpec>,
    #[serde(default)]
    pub ops: Vec<OpSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub id: SlotId,
    #[serde(flatten)]
    pub kind: SlotKind,
    /// A model (graph JSON) or an assignment set (`{"variables", "tuples"}`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<Json>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<NodeClass>,
    #[serde(rename = "type")]
    pub ty: String,
    #[serde(default, skip_serializing_if = "Json::is_null")]
    pub params: Json,
    #[serde(default)]
    pub inputs: Vec<SlotId>,
    #[serde(default)]
    pub outputs: Vec<SlotId>,
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("ParseError: line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("OperatorError: `{op}`: {reason}")]
    Operator { op: String, reason: String },
    #[error("ContentError: slot `{slot}`: {reason}")]
    Content { slot: SlotId, reason: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

impl From<serde_json::Error> for SpecError {
    fn from(e: serde_json::Error) -> Self {
        SpecError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

impl NetworkSpec {
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("specs serialize")
    }

    /// Builds the network with the standard operator registry.
    pub fn build(&self) -> Result<(Egdn, Valuation), SpecError> {
        Registry::standard().build(self)
    }

    /// Initial contents declared in the spec, keyed by slot.
    pub fn contents(&self) -> Result<BTreeMap<SlotId, Content>, SpecError> {
        let mut out = BTreeMap::new();
        for s in &self.slots {
            if let Some(json) = &s.content {
                let slot = Slot {
                    id: s.id.clone(),
                    kind: s.kind.clone(),
                };
                out.insert(s.id.clone(), content_from_json(&slot, json)?);
            }
        }
        Ok(out)
    }

    /// Replaces the declared contents with those in `val`.
    pub fn with_contents(&self, val: &Valuation) -> NetworkSpec {
        let mut spec = self.clone();
        for s in &mut spec.slots {
            s.content = val.get(&s.id).map(content_to_json);
        }
        spec
    }
}

/// Parses content for `slot` from its JSON form.
pub fn content_from_json(slot: &Slot, json: &Json) -> Result<Content, SpecError> {
    let err = |e: serde_json::Error| SpecError::Content {
        slot: slot.id.clone(),
        reason: e.to_string(),
    };
    match &slot.kind {
        SlotKind::Model { linking, .. } => {
            let mut g: TypedGraph = serde_json::from_value(json.clone()).map_err(err)?;
            if g.is_linking() && !*linking {
                return Err(SpecError::Content {
                    slot: slot.id.clone(),
                    reason: "content is a linking model but the slot is not".into(),
                });
            }
            g.set_linking(*linking);
            Ok(Content::Model(g))
        }
        SlotKind::Assignment { vars } => {
            let set: AssignmentSet = serde_json::from_value(json.clone()).map_err(err)?;
            if set.variables() != vars.as_slice() {
                return Err(SpecError::Content {
                    slot: slot.id.clone(),
                    reason: "assignment variables differ from the slot's".into(),
                });
            }
            for t in set.tuples() {
                set.check_tuple(t).map_err(|e| SpecError::Content {
                    slot: slot.id.clone(),
                    reason: e.to_string(),
                })?;
            }
            Ok(Content::Assignment(set))
        }
    }
}

pub fn content_to_json(content: &Content) -> Json {
    match content {
        Content::Model(g) => serde_json::to_value(g),
        Content::Assignment(a) => serde_json::to_value(a),
    }
    .expect("contents serialize")
}

type Factory = fn(&OpSpec, &Registry) -> Result<Box<dyn Operator>, String>;

/// Maps operator type names in specs to constructors.
#[derive(Clone)]
pub struct Registry {
    factories: BTreeMap<String, Factory>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

fn param<'a>(op: &'a OpSpec, key: &str) -> Result<&'a Json, String> {
    op.params.get(key).ok_or_else(|| format!("missing parameter `{key}`"))
}

fn str_param<'a>(op: &'a OpSpec, key: &str) -> Result<&'a str, String> {
    param(op, key)?
        .as_str()
        .ok_or_else(|| format!("parameter `{key}` must be a string"))
}

fn list_param(op: &OpSpec, key: &str) -> Result<Vec<String>, String> {
    match op.params.get(key) {
        None => Ok(Vec::new()),
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|_| format!("parameter `{key}` must be a list of strings")),
    }
}

fn port<'a>(ports: &'a [SlotId], i: usize, what: &str) -> Result<&'a str, String> {
    ports
        .get(i)
        .map(String::as_str)
        .ok_or_else(|| format!("missing {what}"))
}

fn single(op: &OpSpec) -> Result<(&str, &str), String> {
    Ok((port(&op.inputs, 0, "input")?, port(&op.outputs, 0, "output")?))
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn node_input(op: &OpSpec, _: &Registry) -> Result<Box<dyn Operator>, String> {
    let (i, o) = single(op)?;
    Ok(Box::new(NodeInput::new(i, o, str_param(op, "type")?)))
}

fn edge_input(op: &OpSpec, _: &Registry) -> Result<Box<dyn Operator>, String> {
    let (i, o) = single(op)?;
    Ok(Box::new(EdgeInput::new(i, o, str_param(op, "type")?)))
}

fn join(op: &OpSpec, _: &Registry) -> Result<Box<dyn Operator>, String> {
    let l = port(&op.inputs, 0, "left input")?;
    let r = port(&op.inputs, 1, "right input")?;
    Ok(Box::new(Join::new(l, r, port(&op.outputs, 0, "output")?)))
}

fn anti_join(op: &OpSpec, _: &Registry) -> Result<Box<dyn Operator>, String> {
    let l = port(&op.inputs, 0, "left input")?;
    let r = port(&op.inputs, 1, "right input")?;
    Ok(Box::new(AntiJoin::new(l, r, port(&op.outputs, 0, "output")?)))
}

fn group_count(op: &OpSpec, _: &Registry) -> Result<Box<dyn Operator>, String> {
    let (i, o) = single(op)?;
    let by = list_param(op, "by")?;
    Ok(Box::new(GroupCount::new(i, o, &strs(&by))))
}

fn group_sum(op: &OpSpec, _: &Registry) -> Result<Box<dyn Operator>, String> {
    let (i, o) = single(op)?;
    let by = list_param(op, "by")?;
    Ok(Box::new(GroupSum::new(i, o, &strs(&by), str_param(op, "of")?)))
}

fn group_expr(op: &OpSpec, _: &Registry) -> Result<Box<dyn Operator>, String> {
    let (i, o) = single(op)?;
    let by = list_param(op, "by")?;
    Ok(Box::new(GroupExpr::new(i, o, &strs(&by), str_param(op, "expr")?)))
}

fn expression(op: &OpSpec, _: &Registry) -> Result<Box<dyn Operator>, String> {
    let (i, o) = single(op)?;
    Ok(Box::new(Expression::new(i, o, str_param(op, "expr")?)))
}

fn pattern(op: &OpSpec, _: &Registry) -> Result<Box<dyn Operator>, String> {
    let (i, o) = single(op)?;
    Ok(Box::new(PatternMatch::parse(i, o, str_param(op, "pattern")?)?))
}

fn restrict(op: &OpSpec, _: &Registry) -> Result<Box<dyn Operator>, String> {
    let t = port(&op.inputs, 0, "target input")?;
    let f = port(&op.inputs, 1, "filter input")?;
    Ok(Box::new(Restrict::new(t, f)))
}

fn sync_uni(op: &OpSpec, _: &Registry) -> Result<Box<dyn Operator>, String> {
    let src = port(&op.inputs, 0, "source input")?;
    let tgt = port(&op.outputs, 0, "target output")?;
    let corr = port(&op.outputs, 1, "correspondence output")?;
    let rules: SyncRuleSet =
        serde_json::from_value(param(op, "rules")?.clone()).map_err(|e| e.to_string())?;
    let mut s = SyncUni::new(src, tgt, corr, rules)?;
    if op.params.get("corrInput").and_then(Json::as_bool) == Some(true) {
        s = s.with_corr_input();
    }
    Ok(Box::new(s))
}

fn sync_bi(op: &OpSpec, _: &Registry) -> Result<Box<dyn Operator>, String> {
    let src = port(&op.inputs, 0, "source")?;
    let tgt = port(&op.inputs, 1, "target")?;
    let corr = port(&op.inputs, 2, "correspondence")?;
    let map: BiMapping = serde_json::from_value(op.params.clone()).map_err(|e| e.to_string())?;
    Ok(Box::new(SyncBi::new(src, tgt, corr, map)?))
}

fn composite(op: &OpSpec, reg: &Registry) -> Result<Box<dyn Operator>, String> {
    let child: NetworkSpec =
        serde_json::from_value(param(op, "network")?.clone()).map_err(|e| e.to_string())?;
    let (child, _) = reg.build(&child).map_err(|e| e.to_string())?;
    let bindings = |key: &str| -> Result<BTreeMap<String, String>, String> {
        serde_json::from_value(param(op, key)?.clone())
            .map_err(|_| format!("parameter `{key}` must map parent slots to child slots"))
    };
    let (ins, outs) = (bindings("inputs")?, bindings("outputs")?);
    let refs = |m: &BTreeMap<String, String>| -> Vec<(String, String)> {
        m.iter().map(|(p, c)| (p.clone(), c.clone())).collect()
    };
    let (ins, outs) = (refs(&ins), refs(&outs));
    let ins: Vec<(&str, &str)> = ins.iter().map(|(p, c)| (p.as_str(), c.as_str())).collect();
    let outs: Vec<(&str, &str)> = outs.iter().map(|(p, c)| (p.as_str(), c.as_str())).collect();
    let mut c = Composite::new(child, &ins, &outs)?;
    if op.params.get("fallback").and_then(Json::as_bool) == Some(false) {
        c = c.without_fallback();
    }
    Ok(Box::new(c))
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            factories: BTreeMap::new(),
        }
    }

    /// All built-in operator types.
    pub fn standard() -> Self {
        let mut r = Registry::empty();
        r.register("node_input", node_input);
        r.register("edge_input", edge_input);
        r.register("join", join);
        r.register("anti_join", anti_join);
        r.register("group_count", group_count);
        r.register("group_sum", group_sum);
        r.register("group_expr", group_expr);
        r.register("expression", expression);
        r.register("pattern", pattern);
        r.register("restrict", restrict);
        r.register("sync_uni", sync_uni);
        r.register("sync_bi", sync_bi);
        r.register("composite", composite);
        r
    }

    pub fn register(&mut self, name: &str, factory: Factory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn types(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    /// Instantiates one operator; its ports must match the declared ones.
    pub fn operator(&self, op: &OpSpec) -> Result<Box<dyn Operator>, SpecError> {
        let fail = |reason: String| SpecError::Operator {
            op: op.id.clone(),
            reason,
        };
        let factory = self
            .factories
            .get(&op.ty)
            .ok_or_else(|| fail(format!("unknown operator type `{}`", op.ty)))?;
        let built = factory(op, self).map_err(fail)?;
        let ports = built.ports();
        let same = |a: &[SlotId], b: &[SlotId]| {
            let mut a = a.to_vec();
            let mut b = b.to_vec();
            a.sort();
            b.sort();
            a == b
        };
        if !same(&ports.inputs, &op.inputs) || !same(&ports.outputs, &op.outputs) {
            return Err(fail(format!(
                "declared ports ({} -> {}) differ from the operator's ({} -> {})",
                op.inputs.join(","),
                op.outputs.join(","),
                ports.inputs.join(","),
                ports.outputs.join(",")
            )));
        }
        Ok(built)
    }

    pub fn builder(&self, spec: &NetworkSpec) -> Result<EgdnBuilder, SpecError> {
        let mut b = Egdn::builder();
        for (name, tg) in &spec.type_graphs {
            b = b.type_graph(name, tg.clone());
        }
        for s in &spec.slots {
            b = b.slot(Slot {
                id: s.id.clone(),
                kind: s.kind.clone(),
            });
        }
        for op in &spec.ops {
            b = b.op_boxed(&op.id, op.class, self.operator(op)?);
        }
        Ok(b)
    }

    /// Builds the network and a valuation holding the declared contents.
    pub fn build(&self, spec: &NetworkSpec) -> Result<(Egdn, Valuation), SpecError> {
        let builder = self.builder(spec)?;
        let contents = spec.contents()?;
        Ok(build_network(builder, contents)?)
    }
}
