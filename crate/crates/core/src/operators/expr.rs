//! Small expression language for expression nodes, group expressions, and
//! pattern predicates.
//!
//! ```text
//! expr    := or
//! or      := and ("||" and)*
//! and     := cmp ("&&" cmp)*
//! cmp     := add (("=="|"!="|"<"|"<="|">"|">=") add)?
//! add     := mul (("+"|"-") mul)*
//! mul     := unary (("*"|"/"|"%") unary)*
//! unary   := ("-"|"!") unary | primary
//! primary := INT | FLOAT | STRING | "true" | "false" | IDENT
//!          | AGG "(" expr? ")" | "(" expr ")"
//! AGG     := "count" | "sum" | "min" | "max" | "avg"
//! ```
//!
//! Aggregates only appear in group expressions; their argument is
//! evaluated per member tuple.

use std::cmp::Ordering;
use std::fmt;

use crate::model::{Value, ValueKind};

use super::numeric::ExactSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggFn {
    Count,
    Sum,
    Min,
    Max,
    Avg,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(Value),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Agg(AggFn, Option<Box<Expr>>),
}

/// Static type of an expression; `Any` defers the check to evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    Known(ValueKind),
    Any,
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Known(k) => write!(f, "{k}"),
            Ty::Any => f.write_str("any"),
        }
    }
}

pub fn parse(text: &str) -> Result<Expr, String> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let e = p.or()?;
    if p.pos != p.tokens.len() {
        return Err(format!("unexpected `{}`", p.tokens[p.pos]));
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i64),
    Float(f64),
    Str(String),
    Ident(String),
    Sym(&'static str),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Int(i) => write!(f, "{i}"),
            Tok::Float(x) => write!(f, "{x}"),
            Tok::Str(s) => write!(f, "{s:?}"),
            Tok::Ident(s) => f.write_str(s),
            Tok::Sym(s) => f.write_str(s),
        }
    }
}

const SYMBOLS: [&str; 18] = [
    "==", "!=", "<=", ">=", "&&", "||", "<", ">", "+", "-", "*", "/", "%", "!", "(", ")", ",",
    "=",
];

fn lex(text: &str) -> Result<Vec<Tok>, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                i += 1;
                if i < chars.len() && (chars[i] == '-' || chars[i] == '+') {
                    i += 1;
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let s: String = chars[start..i].iter().collect();
            if s.contains(['.', 'e', 'E']) {
                out.push(Tok::Float(s.parse().map_err(|_| format!("bad number `{s}`"))?));
            } else {
                out.push(Tok::Int(s.parse().map_err(|_| format!("bad number `{s}`"))?));
            }
        } else if c == '"' {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i] != '"' {
                if chars[i] == '\\' {
                    i += 1;
                }
                i += 1;
            }
            if i >= chars.len() {
                return Err("unterminated string".into());
            }
            i += 1;
            let raw: String = chars[start..i].iter().collect();
            out.push(Tok::Str(
                serde_json::from_str(&raw).map_err(|e| format!("bad string {raw}: {e}"))?,
            ));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) else {
                return Err(format!("unexpected character `{c}`"));
            };
            if *sym == "=" {
                return Err("use `==` for equality".into());
            }
            i += sym.len();
            out.push(Tok::Sym(sym));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek_sym(&self) -> Option<&'static str> {
        match self.tokens.get(self.pos) {
            Some(Tok::Sym(s)) => Some(s),
            _ => None,
        }
    }

    fn eat(&mut self, sym: &str) -> bool {
        if self.peek_sym() == Some(sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: &str) -> Result<(), String> {
        if self.eat(sym) {
            Ok(())
        } else {
            Err(match self.tokens.get(self.pos) {
                Some(t) => format!("expected `{sym}`, found `{t}`"),
                None => format!("expected `{sym}` at end of input"),
            })
        }
    }

    fn binary_level(
        &mut self,
        ops: &[(&str, BinOp)],
        next: fn(&mut Self) -> Result<Expr, String>,
    ) -> Result<Expr, String> {
        let mut lhs = next(self)?;
        'outer: loop {
            for (sym, op) in ops {
                if self.eat(sym) {
                    let rhs = next(self)?;
                    lhs = Expr::Binary(*op, Box::new(lhs), Box::new(rhs));
                    continue 'outer;
                }
            }
            return Ok(lhs);
        }
    }

    fn or(&mut self) -> Result<Expr, String> {
        self.binary_level(&[("||", BinOp::Or)], Self::and)
    }

    fn and(&mut self) -> Result<Expr, String> {
        self.binary_level(&[("&&", BinOp::And)], Self::cmp)
    }

    fn cmp(&mut self) -> Result<Expr, String> {
        let lhs = self.add()?;
        for (sym, op) in [
            ("==", BinOp::Eq),
            ("!=", BinOp::Ne),
            ("<=", BinOp::Le),
            (">=", BinOp::Ge),
            ("<", BinOp::Lt),
            (">", BinOp::Gt),
        ] {
            if self.eat(sym) {
                let rhs = self.add()?;
                return Ok(Expr::Binary(op, Box::new(lhs), Box::new(rhs)));
            }
        }
        Ok(lhs)
    }

    fn add(&mut self) -> Result<Expr, String> {
        self.binary_level(&[("+", BinOp::Add), ("-", BinOp::Sub)], Self::mul)
    }

    fn mul(&mut self) -> Result<Expr, String> {
        self.binary_level(
            &[("*", BinOp::Mul), ("/", BinOp::Div), ("%", BinOp::Rem)],
            Self::unary,
        )
    }

    fn unary(&mut self) -> Result<Expr, String> {
        if self.eat("-") {
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        if self.eat("!") {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, String> {
        let Some(tok) = self.tokens.get(self.pos).cloned() else {
            return Err("unexpected end of expression".into());
        };
        self.pos += 1;
        match tok {
            Tok::Int(i) => Ok(Expr::Lit(Value::Int(i))),
            Tok::Float(x) => Ok(Expr::Lit(Value::float(x))),
            Tok::Str(s) => Ok(Expr::Lit(Value::String(s))),
            Tok::Ident(id) if id == "true" => Ok(Expr::Lit(Value::Bool(true))),
            Tok::Ident(id) if id == "false" => Ok(Expr::Lit(Value::Bool(false))),
            Tok::Ident(id) if self.peek_sym() == Some("(") => {
                let f = match id.as_str() {
                    "count" => AggFn::Count,
                    "sum" => AggFn::Sum,
                    "min" => AggFn::Min,
                    "max" => AggFn::Max,
                    "avg" => AggFn::Avg,
                    _ => return Err(format!("unknown function `{id}`")),
                };
                self.expect("(")?;
                let arg = if self.eat(")") {
                    None
                } else {
                    let a = self.or()?;
                    self.expect(")")?;
                    Some(Box::new(a))
                };
                match (f, &arg) {
                    (AggFn::Count, Some(_)) => Err("count() takes no argument".into()),
                    (AggFn::Count, None) => Ok(Expr::Agg(f, None)),
                    (_, None) => Err(format!("`{id}` needs an argument")),
                    _ => Ok(Expr::Agg(f, arg)),
                }
            }
            Tok::Ident(id) => Ok(Expr::Var(id)),
            Tok::Sym("(") => {
                let e = self.or()?;
                self.expect(")")?;
                Ok(e)
            }
            Tok::Sym(s) => Err(format!("unexpected `{s}`")),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(v) => f.write_str(&v.to_literal()),
            Expr::Var(v) => f.write_str(v),
            Expr::Unary(UnOp::Neg, e) => write!(f, "-({e})"),
            Expr::Unary(UnOp::Not, e) => write!(f, "!({e})"),
            Expr::Binary(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Rem => "%",
                    BinOp::Eq => "==",
                    BinOp::Ne => "!=",
                    BinOp::Lt => "<",
                    BinOp::Le => "<=",
                    BinOp::Gt => ">",
                    BinOp::Ge => ">=",
                    BinOp::And => "&&",
                    BinOp::Or => "||",
                };
                write!(f, "({a} {sym} {b})")
            }
            Expr::Agg(g, arg) => {
                let name = match g {
                    AggFn::Count => "count",
                    AggFn::Sum => "sum",
                    AggFn::Min => "min",
                    AggFn::Max => "max",
                    AggFn::Avg => "avg",
                };
                match arg {
                    Some(a) => write!(f, "{name}({a})"),
                    None => write!(f, "{name}()"),
                }
            }
        }
    }
}

/// Expression with variables resolved to positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    root: Node,
    ty: Ty,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Lit(Value),
    Var(usize),
    Unary(UnOp, Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Agg(AggFn, Option<Box<Node>>),
}

/// Where aggregate calls are allowed and which variables they see.
pub struct Scope<'a> {
    /// Variables visible outside aggregates, with static types.
    pub outer: &'a [(String, Ty)],
    /// Variables visible inside aggregates; `None` forbids aggregates.
    pub inner: Option<&'a [(String, Ty)]>,
}

impl Compiled {
    pub fn ty(&self) -> Ty {
        self.ty
    }

    pub fn has_aggregate(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::Agg(..) => true,
                Node::Unary(_, a) => walk(a),
                Node::Binary(_, a, b) => walk(a) || walk(b),
                _ => false,
            }
        }
        walk(&self.root)
    }

    /// Evaluates against `vars` (positions as resolved by `compile`).
    pub fn eval(&self, vars: &[Value]) -> Result<Value, String> {
        eval(&self.root, vars, &[])
    }

    /// Evaluates a group expression: outer variables from `key`, aggregate
    /// arguments against each member of `group`.
    pub fn eval_group<'a, I>(&self, key: &[Value], group: I) -> Result<Value, String>
    where
        I: IntoIterator<Item = &'a [Value]>,
    {
        let members: Vec<&[Value]> = group.into_iter().collect();
        eval(&self.root, key, &members)
    }
}

pub fn compile(expr: &Expr, scope: &Scope<'_>) -> Result<Compiled, String> {
    let (root, ty) = resolve(expr, scope.outer, scope.inner, false)?;
    Ok(Compiled { root, ty })
}

fn numeric(t: Ty) -> bool {
    matches!(t, Ty::Any | Ty::Known(ValueKind::Int | ValueKind::Float))
}

fn resolve(
    e: &Expr,
    vars: &[(String, Ty)],
    inner: Option<&[(String, Ty)]>,
    in_agg: bool,
) -> Result<(Node, Ty), String> {
    use ValueKind as K;
    match e {
        Expr::Lit(v) => Ok((Node::Lit(v.clone()), Ty::Known(v.kind()))),
        Expr::Var(name) => {
            let pos = vars
                .iter()
                .position(|(n, _)| n == name)
                .ok_or_else(|| format!("unknown variable `{name}`"))?;
            Ok((Node::Var(pos), vars[pos].1))
        }
        Expr::Unary(op, a) => {
            let (a, t) = resolve(a, vars, inner, in_agg)?;
            let ty = match op {
                UnOp::Neg if numeric(t) => t,
                UnOp::Not if matches!(t, Ty::Any | Ty::Known(K::Bool)) => Ty::Known(K::Bool),
                _ => return Err(format!("operator {op:?} not applicable to {t}")),
            };
            Ok((Node::Unary(*op, Box::new(a)), ty))
        }
        Expr::Binary(op, a, b) => {
            let (a, ta) = resolve(a, vars, inner, in_agg)?;
            let (b, tb) = resolve(b, vars, inner, in_agg)?;
            let ty = binary_type(*op, ta, tb)?;
            Ok((Node::Binary(*op, Box::new(a), Box::new(b)), ty))
        }
        Expr::Agg(f, arg) => {
            if in_agg {
                return Err("nested aggregates are not allowed".into());
            }
            let Some(inner_vars) = inner else {
                return Err("aggregates are only allowed in group expressions".into());
            };
            let arg = match arg {
                Some(a) => Some(resolve(a, inner_vars, None, true)?),
                None => None,
            };
            let ty = match (f, &arg) {
                (AggFn::Count, _) => Ty::Known(K::Int),
                (AggFn::Avg, Some((_, t))) if numeric(*t) => Ty::Known(K::Float),
                (AggFn::Sum, Some((_, t))) if numeric(*t) => *t,
                (AggFn::Min | AggFn::Max, Some((_, t))) => *t,
                (_, Some((_, t))) => return Err(format!("{f:?} not applicable to {t}")),
                (_, None) => unreachable!("parser requires an argument"),
            };
            Ok((Node::Agg(*f, arg.map(|(n, _)| Box::new(n))), ty))
        }
    }
}

fn binary_type(op: BinOp, a: Ty, b: Ty) -> Result<Ty, String> {
    use ValueKind as K;
    let bad = || Err(format!("operator {op:?} not applicable to {a} and {b}"));
    match op {
        BinOp::Add if a == Ty::Known(K::String) && b == Ty::Known(K::String) => {
            Ok(Ty::Known(K::String))
        }
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => {
            if !numeric(a) || !numeric(b) {
                // Any + String may still be a concatenation.
                if op == BinOp::Add
                    && matches!((a, b), (Ty::Any, Ty::Known(K::String)) | (Ty::Known(K::String), Ty::Any))
                {
                    return Ok(Ty::Any);
                }
                return bad();
            }
            Ok(match (a, b) {
                (Ty::Known(K::Int), Ty::Known(K::Int)) => Ty::Known(K::Int),
                (Ty::Known(_), Ty::Known(_)) => Ty::Known(K::Float),
                _ => Ty::Any,
            })
        }
        BinOp::Eq | BinOp::Ne => {
            let comparable = match (a, b) {
                (Ty::Known(x), Ty::Known(y)) => x == y || (x.is_numeric() && y.is_numeric()),
                _ => true,
            };
            if comparable {
                Ok(Ty::Known(K::Bool))
            } else {
                bad()
            }
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let ok = match (a, b) {
                (Ty::Known(x), Ty::Known(y)) => {
                    (x.is_numeric() && y.is_numeric()) || (x == K::String && y == K::String)
                }
                (Ty::Known(x), Ty::Any) | (Ty::Any, Ty::Known(x)) => {
                    x.is_numeric() || x == K::String
                }
                (Ty::Any, Ty::Any) => true,
            };
            if ok {
                Ok(Ty::Known(K::Bool))
            } else {
                bad()
            }
        }
        BinOp::And | BinOp::Or => {
            let boolish = |t: Ty| matches!(t, Ty::Any | Ty::Known(K::Bool));
            if boolish(a) && boolish(b) {
                Ok(Ty::Known(K::Bool))
            } else {
                bad()
            }
        }
    }
}

fn eval(n: &Node, vars: &[Value], group: &[&[Value]]) -> Result<Value, String> {
    match n {
        Node::Lit(v) => Ok(v.clone()),
        Node::Var(i) => Ok(vars[*i].clone()),
        Node::Unary(UnOp::Neg, a) => match eval(a, vars, group)? {
            Value::Int(i) => i.checked_neg().map(Value::Int).ok_or_else(overflow),
            Value::Float(x) => Ok(Value::float(-x.0)),
            v => Err(format!("cannot negate {}", v.kind())),
        },
        Node::Unary(UnOp::Not, a) => match eval(a, vars, group)? {
            Value::Bool(b) => Ok(Value::Bool(!b)),
            v => Err(format!("cannot negate {}", v.kind())),
        },
        Node::Binary(BinOp::And, a, b) => {
            if !truth(eval(a, vars, group)?)? {
                return Ok(Value::Bool(false));
            }
            Ok(Value::Bool(truth(eval(b, vars, group)?)?))
        }
        Node::Binary(BinOp::Or, a, b) => {
            if truth(eval(a, vars, group)?)? {
                return Ok(Value::Bool(true));
            }
            Ok(Value::Bool(truth(eval(b, vars, group)?)?))
        }
        Node::Binary(op, a, b) => {
            let a = eval(a, vars, group)?;
            let b = eval(b, vars, group)?;
            apply_binary(*op, a, b)
        }
        Node::Agg(f, arg) => {
            let mut values = Vec::with_capacity(group.len());
            if let Some(arg) = arg {
                for member in group {
                    values.push(eval(arg, member, &[])?);
                }
            }
            aggregate(*f, group.len(), values)
        }
    }
}

fn overflow() -> String {
    "integer overflow".to_string()
}

fn truth(v: Value) -> Result<bool, String> {
    match v {
        Value::Bool(b) => Ok(b),
        v => Err(format!("expected bool, found {}", v.kind())),
    }
}

/// Numeric comparison across int/float, otherwise same-kind ordering.
fn compare(a: &Value, b: &Value) -> Result<Ordering, String> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Ok(x.cmp(y)),
        _ if a.kind().is_numeric() && b.kind().is_numeric() => {
            let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            x.partial_cmp(&y).ok_or_else(|| "comparison with NaN".to_string())
        }
        _ if a.kind() == b.kind() => Ok(a.cmp(b)),
        _ => Err(format!("cannot compare {} with {}", a.kind(), b.kind())),
    }
}

fn apply_binary(op: BinOp, a: Value, b: Value) -> Result<Value, String> {
    use Value as V;
    match op {
        BinOp::Eq | BinOp::Ne => {
            let eq = if a.kind().is_numeric() && b.kind().is_numeric() {
                compare(&a, &b).map(|o| o == Ordering::Equal).unwrap_or(false)
            } else if a.kind() == b.kind() {
                a == b
            } else {
                return Err(format!("cannot compare {} with {}", a.kind(), b.kind()));
            };
            Ok(V::Bool(eq == (op == BinOp::Eq)))
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            if !(a.kind().is_numeric() || a.kind() == ValueKind::String) {
                return Err(format!("cannot order {}", a.kind()));
            }
            let o = compare(&a, &b)?;
            Ok(V::Bool(match op {
                BinOp::Lt => o == Ordering::Less,
                BinOp::Le => o != Ordering::Greater,
                BinOp::Gt => o == Ordering::Greater,
                _ => o != Ordering::Less,
            }))
        }
        _ => match (a, b) {
            (V::String(x), V::String(y)) if op == BinOp::Add => Ok(V::String(x + &y)),
            (V::Int(x), V::Int(y)) => {
                let r = match op {
                    BinOp::Add => x.checked_add(y),
                    BinOp::Sub => x.checked_sub(y),
                    BinOp::Mul => x.checked_mul(y),
                    BinOp::Div | BinOp::Rem if y == 0 => return Err("division by zero".into()),
                    BinOp::Div => x.checked_div(y),
                    BinOp::Rem => x.checked_rem(y),
                    _ => unreachable!(),
                };
                r.map(V::Int).ok_or_else(overflow)
            }
            (a, b) if a.kind().is_numeric() && b.kind().is_numeric() => {
                let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
                let r = match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div | BinOp::Rem if y == 0.0 => return Err("division by zero".into()),
                    BinOp::Div => x / y,
                    BinOp::Rem => x % y,
                    _ => unreachable!(),
                };
                Ok(V::float(r))
            }
            (a, b) => Err(format!(
                "operator {op:?} not applicable to {} and {}",
                a.kind(),
                b.kind()
            )),
        },
    }
}

fn aggregate(f: AggFn, members: usize, values: Vec<Value>) -> Result<Value, String> {
    match f {
        AggFn::Count => Ok(Value::Int(members as i64)),
        AggFn::Sum | AggFn::Avg => {
            let all_int = values.iter().all(|v| matches!(v, Value::Int(_)));
            if let Some(v) = values.iter().find(|v| !v.kind().is_numeric()) {
                return Err(format!("cannot sum {}", v.kind()));
            }
            if f == AggFn::Sum && all_int {
                let total: i128 = values
                    .iter()
                    .map(|v| match v {
                        Value::Int(i) => *i as i128,
                        _ => unreachable!(),
                    })
                    .sum();
                return i64::try_from(total).map(Value::Int).map_err(|_| overflow());
            }
            let mut acc = ExactSum::new();
            for v in &values {
                acc.add(v.as_f64().unwrap());
            }
            if f == AggFn::Sum {
                return Ok(Value::float(acc.value()));
            }
            if values.is_empty() {
                return Err("average of an empty collection".into());
            }
            Ok(Value::float(acc.value() / values.len() as f64))
        }
        AggFn::Min | AggFn::Max => {
            let mut best: Option<Value> = None;
            for v in values {
                best = Some(match best {
                    None => v,
                    Some(b) => {
                        let o = compare(&v, &b)?;
                        let take = if f == AggFn::Min {
                            o == Ordering::Less
                        } else {
                            o == Ordering::Greater
                        };
                        if take {
                            v
                        } else {
                            b
                        }
                    }
                });
            }
            best.ok_or_else(|| format!("{f:?} of an empty collection"))
        }
    }
}

/// Coerces `v` into `kind` where lossless (int to float); errors otherwise.
pub fn coerce(v: Value, kind: ValueKind) -> Result<Value, String> {
    match (v, kind) {
        (v, k) if v.kind() == k => Ok(v),
        (Value::Int(i), ValueKind::Float) => Ok(Value::float(i as f64)),
        (v, k) => Err(format!("result {} does not fit variable kind {k}", v.kind())),
    }
}

/// Whether a value of static type `t` can be stored in a variable of `kind`.
pub fn assignable(t: Ty, kind: ValueKind) -> bool {
    match t {
        Ty::Any => true,
        Ty::Known(k) => k == kind || (k == ValueKind::Int && kind == ValueKind::Float),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(spec: &[(&str, ValueKind)]) -> Vec<(String, Ty)> {
        spec.iter()
            .map(|(n, k)| (n.to_string(), Ty::Known(*k)))
            .collect()
    }

    fn eval_str(text: &str, spec: &[(&str, ValueKind)], vals: &[Value]) -> Result<Value, String> {
        let v = vars(spec);
        let c = compile(&parse(text)?, &Scope { outer: &v, inner: None })?;
        c.eval(vals)
    }

    #[test]
    fn arithmetic_and_precedence() {
        let r = eval_str("x + 1 * 2", &[("x", ValueKind::Int)], &[Value::Int(2)]);
        assert_eq!(r, Ok(Value::Int(4)));
        let r = eval_str("(x + 1) * 2 >= 6 && !false", &[("x", ValueKind::Int)], &[Value::Int(2)]);
        assert_eq!(r, Ok(Value::Bool(true)));
        assert_eq!(eval_str("7 % 3 - -1", &[], &[]), Ok(Value::Int(2)));
        assert_eq!(eval_str("1 + 0.5", &[], &[]), Ok(Value::float(1.5)));
    }

    #[test]
    fn strings() {
        assert_eq!(
            eval_str("\"get\" + n", &[("n", ValueKind::String)], &[Value::String("X".into())]),
            Ok(Value::String("getX".into()))
        );
        assert_eq!(eval_str("\"a\" < \"b\"", &[], &[]), Ok(Value::Bool(true)));
    }

    #[test]
    fn division_by_zero() {
        let r = eval_str("x / 0", &[("x", ValueKind::Int)], &[Value::Int(1)]);
        assert_eq!(r, Err("division by zero".into()));
    }

    #[test]
    fn static_type_errors() {
        let v = vars(&[("s", ValueKind::String)]);
        let scope = Scope { outer: &v, inner: None };
        assert!(compile(&parse("s * 2").unwrap(), &scope).is_err());
        assert!(compile(&parse("count()").unwrap(), &scope).is_err());
        assert!(compile(&parse("y + 1").unwrap(), &scope).is_err());
        assert!(parse("x = 1").is_err());
        assert!(parse("(1").is_err());
    }

    #[test]
    fn aggregates() {
        let outer = vars(&[("g", ValueKind::String)]);
        let inner = vars(&[("g", ValueKind::String), ("x", ValueKind::Int)]);
        let scope = Scope { outer: &outer, inner: Some(&inner) };
        let c = compile(&parse("max(x) - min(x) + count()").unwrap(), &scope).unwrap();
        let rows = [
            vec![Value::String("A".into()), Value::Int(1)],
            vec![Value::String("A".into()), Value::Int(5)],
        ];
        let r = c.eval_group(&[Value::String("A".into())], rows.iter().map(|r| r.as_slice()));
        assert_eq!(r, Ok(Value::Int(6)));
        let avg = compile(&parse("avg(x)").unwrap(), &scope).unwrap();
        assert_eq!(avg.ty(), Ty::Known(ValueKind::Float));
        let r = avg.eval_group(&[Value::String("A".into())], rows.iter().map(|r| r.as_slice()));
        assert_eq!(r, Ok(Value::float(3.0)));
    }

    #[test]
    fn display_round_trips() {
        for text in ["x + 1 * 2", "!(a && b) || c", "max(x) - min(x)", "\"q\\\"\" + s"] {
            let e = parse(text).unwrap();
            assert_eq!(parse(&e.to_string()).unwrap(), e);
        }
    }
}
