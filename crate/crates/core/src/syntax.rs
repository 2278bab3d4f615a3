//! Value-added abstract syntax shared by the sequential and the concurrent
//! language, with a concrete grammar, a renderer whose output re-parses to the
//! same term, and substitution of values for variables.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::encapsulation::ObjectId;
use crate::uts::Delta;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Nil,
    Nat(u64),
    Bool(bool),
    Obj(ObjectId),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Nil => f.write_str("nil"),
            Value::Nat(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Obj(o) => write!(f, "@{o}"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Nil => s.serialize_unit(),
            Value::Nat(n) => s.serialize_u64(*n),
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Obj(o) => {
                use serde::ser::SerializeMap;
                let mut m = s.serialize_map(Some(1))?;
                m.serialize_entry("obj", o.as_str())?;
                m.end()
            }
        }
    }
}

impl Value {
    /// Inverse of the JSON encoding used for payloads and traces.
    pub fn from_json(j: &serde_json::Value) -> Option<Value> {
        match j {
            serde_json::Value::Null => Some(Value::Nil),
            serde_json::Value::Bool(b) => Some(Value::Bool(*b)),
            serde_json::Value::Number(n) => n.as_u64().map(Value::Nat),
            serde_json::Value::Object(m) if m.len() == 1 => m.get("obj")?.as_str().map(|o| Value::Obj(ObjectId::new(o))),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Lt,
    Le,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "==",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    fn level(self) -> u8 {
        match self {
            BinOp::Or => 2,
            BinOp::And => 3,
            BinOp::Eq | BinOp::Lt | BinOp::Le => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div => 6,
        }
    }

    /// Evaluation on values; `None` on a type mismatch or division by zero.
    /// Subtraction on naturals truncates at zero.
    pub fn eval(self, a: &Value, b: &Value) -> Option<Value> {
        use Value::{Bool, Nat};
        Some(match (self, a, b) {
            (BinOp::Add, Nat(x), Nat(y)) => Nat(x.checked_add(*y)?),
            (BinOp::Sub, Nat(x), Nat(y)) => Nat(x.saturating_sub(*y)),
            (BinOp::Mul, Nat(x), Nat(y)) => Nat(x.checked_mul(*y)?),
            (BinOp::Div, Nat(x), Nat(y)) => Nat(x.checked_div(*y)?),
            (BinOp::Lt, Nat(x), Nat(y)) => Bool(x < y),
            (BinOp::Le, Nat(x), Nat(y)) => Bool(x <= y),
            (BinOp::And, Bool(x), Bool(y)) => Bool(*x && *y),
            (BinOp::Or, Bool(x), Bool(y)) => Bool(*x || *y),
            (BinOp::Eq, x, y) => Bool(x == y),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UpdateKind {
    Var,
    Fun,
    Rec,
    Class,
}

impl UpdateKind {
    pub fn letter(self) -> &'static str {
        match self {
            UpdateKind::Var => "v",
            UpdateKind::Fun => "f",
            UpdateKind::Rec => "r",
            UpdateKind::Class => "c",
        }
    }

    fn from_letter(s: &str) -> Option<Self> {
        Some(match s {
            "v" => UpdateKind::Var,
            "f" => UpdateKind::Fun,
            "r" => UpdateKind::Rec,
            "c" => UpdateKind::Class,
            _ => return None,
        })
    }
}

/// `λ(param).body`, used for functions and methods.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lambda {
    pub param: String,
    pub body: Term,
}

impl Lambda {
    pub fn new(param: impl Into<String>, body: Term) -> Self {
        Lambda { param: param.into(), body }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "param": self.param, "body": self.body.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Val(Value),
    Skip,
    Seq(Box<Term>, Box<Term>),
    Var(String),
    Let { x: String, bound: Box<Term>, body: Box<Term> },
    VarDecl { x: String, init: Box<Term> },
    Assign { x: String, value: Box<Term> },
    FunDecl { f: String, lambda: Box<Lambda> },
    /// `f e` for functions, `m(e)` for local method invocation.
    App { f: String, arg: Box<Term> },
    RecDecl { r: String, fields: Vec<(String, Term)> },
    RecProj { r: String, l: String },
    If { cond: Box<Term>, then: Box<Term>, otherwise: Box<Term> },
    BinOp { op: BinOp, lhs: Box<Term>, rhs: Box<Term> },
    Not(Box<Term>),
    Print(Box<Term>),
    Update { kind: UpdateKind, delta: Delta },
    MethodDef { m: String, lambda: Box<Lambda> },
    Return(Box<Term>),
    /// `m(o', n, v)`: an invocation delivered from a message, carrying the
    /// caller and the future label.
    Invoke { m: String, caller: ObjectId, future: u64, arg: Box<Term> },
    ClassDef { name: String, attrs: BTreeMap<String, Value>, methods: BTreeMap<String, Lambda> },
    New { x: String, class: String },
    Async(Box<Term>),
    Yield,
    Call { m: String, arg: Box<Term>, callee: Box<Term>, future: String },
    Read { future: String, x: String },
}

pub const NIL: Term = Term::Val(Value::Nil);

impl Term {
    pub fn nat(n: u64) -> Term {
        Term::Val(Value::Nat(n))
    }

    pub fn boolean(b: bool) -> Term {
        Term::Val(Value::Bool(b))
    }

    pub fn var(x: &str) -> Term {
        Term::Var(x.to_string())
    }

    pub fn seq(a: Term, b: Term) -> Term {
        Term::Seq(Box::new(a), Box::new(b))
    }

    pub fn binop(op: BinOp, lhs: Term, rhs: Term) -> Term {
        Term::BinOp { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn var_decl(x: &str, init: Term) -> Term {
        Term::VarDecl { x: x.to_string(), init: Box::new(init) }
    }

    pub fn assign(x: &str, value: Term) -> Term {
        Term::Assign { x: x.to_string(), value: Box::new(value) }
    }

    pub fn is_value(&self) -> bool {
        matches!(self, Term::Val(_))
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Term::Val(Value::Nil))
    }

    pub fn as_value(&self) -> Option<&Value> {
        match self {
            Term::Val(v) => Some(v),
            _ => None,
        }
    }

    /// Folds a nonempty list into a right-nested sequence.
    pub fn sequence(items: Vec<Term>) -> Term {
        let mut it = items.into_iter().rev();
        let last = it.next().unwrap_or(Term::Skip);
        it.fold(last, |acc, t| Term::seq(t, acc))
    }

    /// Every subterm, this one included, in preorder.
    pub fn subterms(&self) -> Vec<&Term> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            out.push(t);
            match t {
                Term::Seq(a, b) | Term::BinOp { lhs: a, rhs: b, .. } => {
                    stack.push(b);
                    stack.push(a);
                }
                Term::Let { bound, body, .. } => {
                    stack.push(body);
                    stack.push(bound);
                }
                Term::VarDecl { init: e, .. }
                | Term::Assign { value: e, .. }
                | Term::App { arg: e, .. }
                | Term::Not(e)
                | Term::Print(e)
                | Term::Return(e)
                | Term::Invoke { arg: e, .. }
                | Term::Async(e) => stack.push(e),
                Term::FunDecl { lambda, .. } | Term::MethodDef { lambda, .. } => stack.push(&lambda.body),
                Term::RecDecl { fields, .. } => stack.extend(fields.iter().rev().map(|(_, e)| e)),
                Term::If { cond, then, otherwise } => {
                    stack.push(otherwise);
                    stack.push(then);
                    stack.push(cond);
                }
                Term::ClassDef { methods, .. } => stack.extend(methods.values().rev().map(|l| &l.body)),
                Term::Call { arg, callee, .. } => {
                    stack.push(callee);
                    stack.push(arg);
                }
                Term::Val(_) | Term::Skip | Term::Var(_) | Term::RecProj { .. } | Term::Update { .. } | Term::New { .. } | Term::Yield | Term::Read { .. } => {}
            }
        }
        out
    }

    fn level(&self) -> u8 {
        match self {
            Term::Seq(..) => 0,
            Term::BinOp { op, .. } => op.level(),
            Term::Not(_) => 7,
            Term::App { .. } => 8,
            Term::Val(_) | Term::Var(_) | Term::RecProj { .. } => 9,
            _ => 1,
        }
    }
}

/// `t[v/x]`. Values are closed, so no binder can capture; substitution
/// stops at binders of `x` (let bodies and λ parameters).
pub fn subst(t: &Term, v: &Value, x: &str) -> Term {
    let go = |t: &Term| Box::new(subst(t, v, x));
    let lam = |l: &Lambda| {
        if l.param == x {
            l.clone()
        } else {
            Lambda { param: l.param.clone(), body: subst(&l.body, v, x) }
        }
    };
    match t {
        Term::Var(y) if y == x => Term::Val(v.clone()),
        Term::Val(_) | Term::Skip | Term::Var(_) | Term::RecProj { .. } | Term::Update { .. } | Term::New { .. } | Term::Yield | Term::Read { .. } => t.clone(),
        Term::Seq(a, b) => Term::Seq(go(a), go(b)),
        Term::Let { x: y, bound, body } => Term::Let {
            x: y.clone(),
            bound: go(bound),
            body: if y == x { body.clone() } else { go(body) },
        },
        Term::VarDecl { x: y, init } => Term::VarDecl { x: y.clone(), init: go(init) },
        Term::Assign { x: y, value } => Term::Assign { x: y.clone(), value: go(value) },
        Term::FunDecl { f, lambda } => Term::FunDecl { f: f.clone(), lambda: Box::new(lam(lambda)) },
        Term::App { f, arg } => Term::App { f: f.clone(), arg: go(arg) },
        Term::RecDecl { r, fields } => Term::RecDecl {
            r: r.clone(),
            fields: fields.iter().map(|(l, e)| (l.clone(), subst(e, v, x))).collect(),
        },
        Term::If { cond, then, otherwise } => Term::If { cond: go(cond), then: go(then), otherwise: go(otherwise) },
        Term::BinOp { op, lhs, rhs } => Term::BinOp { op: *op, lhs: go(lhs), rhs: go(rhs) },
        Term::Not(e) => Term::Not(go(e)),
        Term::Print(e) => Term::Print(go(e)),
        Term::MethodDef { m, lambda } => Term::MethodDef { m: m.clone(), lambda: Box::new(lam(lambda)) },
        Term::Return(e) => Term::Return(go(e)),
        Term::Invoke { m, caller, future, arg } => Term::Invoke { m: m.clone(), caller: caller.clone(), future: *future, arg: go(arg) },
        Term::ClassDef { name, attrs, methods } => Term::ClassDef {
            name: name.clone(),
            attrs: attrs.clone(),
            methods: methods.iter().map(|(m, l)| (m.clone(), lam(l))).collect(),
        },
        Term::Async(s) => Term::Async(go(s)),
        Term::Call { m, arg, callee, future } => Term::Call { m: m.clone(), arg: go(arg), callee: go(callee), future: future.clone() },
    }
}

/// A system of concurrent objects.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SystemTerm {
    Obj(ObjectId, Term),
    Par(Box<SystemTerm>, Box<SystemTerm>),
}

impl SystemTerm {
    pub fn obj(o: &str, s: Term) -> Self {
        SystemTerm::Obj(ObjectId::new(o), s)
    }

    pub fn par(a: SystemTerm, b: SystemTerm) -> Self {
        SystemTerm::Par(Box::new(a), Box::new(b))
    }

    /// Left-nested parallel composition of the given objects.
    pub fn from_objects(objs: Vec<(ObjectId, Term)>) -> Option<Self> {
        let mut it = objs.into_iter().map(|(o, s)| SystemTerm::Obj(o, s));
        let first = it.next()?;
        Some(it.fold(first, SystemTerm::par))
    }

    pub fn objects(&self) -> Vec<(&ObjectId, &Term)> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<(&'a ObjectId, &'a Term)>) {
        match self {
            SystemTerm::Obj(o, s) => out.push((o, s)),
            SystemTerm::Par(a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }

    pub fn statement(&self, o: &ObjectId) -> Option<&Term> {
        self.objects().into_iter().find(|(id, _)| *id == o).map(|(_, s)| s)
    }

    /// Replaces the statement of `o`, putting `spawned` objects in parallel
    /// right after it.
    pub fn replace(&self, o: &ObjectId, s: Term, spawned: &[(ObjectId, Term)]) -> SystemTerm {
        match self {
            SystemTerm::Obj(id, _) if id == o => {
                let here = SystemTerm::Obj(id.clone(), s);
                spawned.iter().fold(here, |acc, (id, st)| SystemTerm::par(acc, SystemTerm::Obj(id.clone(), st.clone())))
            }
            SystemTerm::Obj(..) => self.clone(),
            SystemTerm::Par(a, b) => SystemTerm::par(a.replace(o, s.clone(), spawned), b.replace(o, s, spawned)),
        }
    }

    pub fn ids_distinct(&self) -> bool {
        let objs = self.objects();
        let ids: std::collections::BTreeSet<_> = objs.iter().map(|(o, _)| *o).collect();
        ids.len() == objs.len()
    }
}

impl fmt::Display for SystemTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemTerm::Obj(o, s) => write!(f, "object {o} {{ {s} }}"),
            SystemTerm::Par(a, b) => write!(f, "{a} || {b}"),
        }
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        render(self, 0, &mut out);
        f.write_str(&out)
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

fn render(t: &Term, min: u8, out: &mut String) {
    if t.level() < min {
        out.push('(');
        render_bare(t, out);
        out.push(')');
    } else {
        render_bare(t, out);
    }
}

fn render_lambda_body(l: &Lambda, out: &mut String) {
    out.push_str(" { ");
    render(&l.body, 0, out);
    out.push_str(" }");
}

fn render_bare(t: &Term, out: &mut String) {
    use std::fmt::Write;
    match t {
        Term::Val(v) => {
            let _ = write!(out, "{v}");
        }
        Term::Skip => out.push_str("skip"),
        Term::Seq(a, b) => {
            render(a, 1, out);
            out.push_str("; ");
            render(b, 0, out);
        }
        Term::Var(x) => out.push_str(x),
        Term::Let { x, bound, body } => {
            let _ = write!(out, "let var {x} := ");
            render(bound, 2, out);
            out.push_str(" in ");
            render(body, 1, out);
        }
        Term::VarDecl { x, init } => {
            let _ = write!(out, "var {x} := ");
            render(init, 2, out);
        }
        Term::Assign { x, value } => {
            let _ = write!(out, "{x} := ");
            render(value, 2, out);
        }
        Term::FunDecl { f, lambda } => {
            let _ = write!(out, "fun {f}({})", lambda.param);
            render_lambda_body(lambda, out);
        }
        Term::App { f, arg } => {
            let _ = write!(out, "{f}(");
            render(arg, 0, out);
            out.push(')');
        }
        Term::RecDecl { r, fields } => {
            let _ = write!(out, "record {r} {{ ");
            for (i, (l, e)) in fields.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{l} = ");
                render(e, 2, out);
            }
            out.push_str(" }");
        }
        Term::RecProj { r, l } => {
            let _ = write!(out, "{r}.{l}");
        }
        Term::If { cond, then, otherwise } => {
            out.push_str("if ");
            render(cond, 2, out);
            out.push_str(" then ");
            render(then, 1, out);
            out.push_str(" else ");
            render(otherwise, 1, out);
        }
        Term::BinOp { op, lhs, rhs } => {
            let lvl = op.level();
            let (lmin, rmin) = if lvl == 4 { (5, 5) } else { (lvl, lvl + 1) };
            render(lhs, lmin, out);
            let _ = write!(out, " {} ", op.symbol());
            render(rhs, rmin, out);
        }
        Term::Not(e) => {
            out.push('!');
            render(e, 7, out);
        }
        Term::Print(e) => {
            out.push_str("print ");
            render(e, 2, out);
        }
        Term::Update { kind, delta } => {
            let ids: Vec<&str> = delta.iter().map(String::as_str).collect();
            let _ = write!(out, "update{{{}: {}}}", kind.letter(), ids.join(", "));
        }
        Term::MethodDef { m, lambda } => {
            let _ = write!(out, "{m}({})", lambda.param);
            render_lambda_body(lambda, out);
        }
        Term::Return(e) => {
            out.push_str("return ");
            render(e, 2, out);
        }
        Term::Invoke { m, caller, future, arg } => {
            let _ = write!(out, "invoke {m}(@{caller}, {future}, ");
            render(arg, 0, out);
            out.push(')');
        }
        Term::ClassDef { name, attrs, methods } => {
            let _ = write!(out, "class {name} {{");
            for (a, v) in attrs {
                match v {
                    Value::Nil => {
                        let _ = write!(out, " var {a};");
                    }
                    v => {
                        let _ = write!(out, " var {a} := {v};");
                    }
                }
            }
            for (m, l) in methods {
                let _ = write!(out, " {m}({})", l.param);
                render_lambda_body(l, out);
            }
            out.push_str(" }");
        }
        Term::New { x, class } => {
            let _ = write!(out, "{x} := new {class}");
        }
        Term::Async(s) => {
            out.push_str("async { ");
            render(s, 0, out);
            out.push_str(" }");
        }
        Term::Yield => out.push_str("yield"),
        Term::Call { m, arg, callee, future } => {
            let _ = write!(out, "call {m}(");
            render(arg, 0, out);
            out.push_str(") of ");
            render(callee, 2, out);
            let _ = write!(out, " in {future}");
        }
        Term::Read { future, x } => {
            let _ = write!(out, "read {future} into {x}");
        }
    }
}

// ---------------------------------------------------------------------------
// Lexing and parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(u64),
    ObjLit(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: [&str; 22] = [
    ":=", "==", "<=", "&&", "||", ";", ",", ".", "(", ")", "{", "}", "[", "]", ":", "+", "-", "*", "/", "<", "!", "=",
];

const KEYWORDS: [&str; 29] = [
    "skip", "var", "let", "in", "fun", "record", "if", "then", "else", "print", "update", "true", "false", "nil", "return",
    "invoke", "class", "new", "async", "yield", "call", "of", "read", "into", "object", "implements", "interface",
    "extends", "method",
];

fn lex(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (l0, c0) = (line, col);
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let n = text.parse::<u64>().map_err(|_| SyntaxError { line, col, message: format!("number `{text}` out of range") })?;
            col += i - start;
            toks.push(Token { tok: Tok::Num(n), line: l0, col: c0 });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' || c == '@' {
            let start = i;
            i += 1;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = match text.strip_prefix('@') {
                Some("") => return Err(SyntaxError { line: l0, col: c0, message: "empty object literal".into() }),
                Some(name) => Tok::ObjLit(name.to_string()),
                None => Tok::Ident(text),
            };
            toks.push(Token { tok, line: l0, col: c0 });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) else {
            return Err(SyntaxError { line, col, message: format!("unexpected character `{c}`") });
        };
        i += sym.len();
        col += sym.len();
        toks.push(Token { tok: Tok::Sym(sym), line: l0, col: c0 });
    }
    toks.push(Token { tok: Tok::Eof, line, col });
    Ok(toks)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    warnings: Vec<String>,
}

type PResult<T> = Result<T, SyntaxError>;

impl Parser {
    fn new(src: &str) -> PResult<Self> {
        Ok(Parser { toks: lex(src)?, pos: 0, warnings: Vec::new() })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(SyntaxError { line: t.line, col: t.col, message: message.into() })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", describe(self.peek())))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.is_kw(k) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{k}`, found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(x) if !KEYWORDS.contains(&x.as_str()) => {
                self.bump();
                Ok(x)
            }
            other => self.err(format!("expected identifier, found {}", describe(&other))),
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.err(format!("unexpected {}", describe(self.peek())))
        }
    }

    fn parse_at(&mut self, min: u8) -> PResult<Term> {
        match min {
            0 => self.stmt(),
            1 => self.simple(),
            2..=6 => self.binary(min),
            7 => self.unary(),
            8 => self.app(),
            _ => self.atom(),
        }
    }

    fn stmt(&mut self) -> PResult<Term> {
        let first = self.simple()?;
        if self.eat_sym(";") {
            if self.is_sym("}") || self.is_sym(")") || *self.peek() == Tok::Eof {
                return Ok(first);
            }
            let rest = self.stmt()?;
            Ok(Term::seq(first, rest))
        } else {
            Ok(first)
        }
    }

    fn delta(&mut self) -> PResult<Delta> {
        let mut d = Delta::new();
        loop {
            d.insert(self.ident()?);
            if !self.eat_sym(",") {
                break;
            }
        }
        Ok(d)
    }

    fn lambda_body(&mut self, param: String) -> PResult<Lambda> {
        self.expect_sym("{")?;
        let body = self.stmt()?;
        self.expect_sym("}")?;
        Ok(Lambda { param, body })
    }

    fn simple(&mut self) -> PResult<Term> {
        let Tok::Ident(word) = self.peek().clone() else {
            return self.binary(2);
        };
        match word.as_str() {
            "skip" => {
                self.bump();
                Ok(Term::Skip)
            }
            "yield" => {
                self.bump();
                Ok(Term::Yield)
            }
            "var" => {
                self.bump();
                let x = self.ident()?;
                self.expect_sym(":=")?;
                Ok(Term::VarDecl { x, init: Box::new(self.parse_at(2)?) })
            }
            "let" => {
                self.bump();
                self.expect_kw("var")?;
                let x = self.ident()?;
                self.expect_sym(":=")?;
                let bound = self.parse_at(2)?;
                self.expect_kw("in")?;
                let body = self.parse_at(1)?;
                Ok(Term::Let { x, bound: Box::new(bound), body: Box::new(body) })
            }
            "fun" => {
                self.bump();
                let f = self.ident()?;
                self.expect_sym("(")?;
                let param = self.ident()?;
                self.expect_sym(")")?;
                Ok(Term::FunDecl { f, lambda: Box::new(self.lambda_body(param)?) })
            }
            "record" => {
                self.bump();
                let r = self.ident()?;
                self.expect_sym("{")?;
                let mut fields = Vec::new();
                if !self.is_sym("}") {
                    loop {
                        let l = self.ident()?;
                        self.expect_sym("=")?;
                        fields.push((l, self.parse_at(2)?));
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                }
                self.expect_sym("}")?;
                Ok(Term::RecDecl { r, fields })
            }
            "if" => {
                self.bump();
                let cond = self.parse_at(2)?;
                self.expect_kw("then")?;
                let then = self.parse_at(1)?;
                self.expect_kw("else")?;
                let otherwise = self.parse_at(1)?;
                Ok(Term::If { cond: Box::new(cond), then: Box::new(then), otherwise: Box::new(otherwise) })
            }
            "print" => {
                self.bump();
                Ok(Term::Print(Box::new(self.parse_at(2)?)))
            }
            "return" => {
                self.bump();
                Ok(Term::Return(Box::new(self.parse_at(2)?)))
            }
            "update" => {
                self.bump();
                self.expect_sym("{")?;
                let k = self.ident()?;
                let Some(kind) = UpdateKind::from_letter(&k) else {
                    return self.err(format!("unknown update kind `{k}`, expected v, f, r or c"));
                };
                self.expect_sym(":")?;
                let delta = self.delta()?;
                self.expect_sym("}")?;
                Ok(Term::Update { kind, delta })
            }
            "invoke" => {
                self.bump();
                let m = self.ident()?;
                self.expect_sym("(")?;
                let Tok::ObjLit(caller) = self.bump() else {
                    return self.err("expected caller object literal");
                };
                self.expect_sym(",")?;
                let Tok::Num(future) = self.bump() else {
                    return self.err("expected future number");
                };
                self.expect_sym(",")?;
                let arg = self.stmt()?;
                self.expect_sym(")")?;
                Ok(Term::Invoke { m, caller: ObjectId(caller), future, arg: Box::new(arg) })
            }
            "class" => self.class_def(),
            "async" => {
                self.bump();
                self.expect_sym("{")?;
                let body = self.stmt()?;
                self.expect_sym("}")?;
                Ok(Term::Async(Box::new(body)))
            }
            "call" => {
                self.bump();
                let m = self.ident()?;
                self.expect_sym("(")?;
                let arg = self.stmt()?;
                self.expect_sym(")")?;
                self.expect_kw("of")?;
                let callee = self.parse_at(2)?;
                self.expect_kw("in")?;
                let future = self.ident()?;
                Ok(Term::Call { m, arg: Box::new(arg), callee: Box::new(callee), future })
            }
            "read" => {
                self.bump();
                let future = self.ident()?;
                self.expect_kw("into")?;
                let x = self.ident()?;
                Ok(Term::Read { future, x })
            }
            w if !KEYWORDS.contains(&w) => {
                if *self.peek_at(1) == Tok::Sym(":=") {
                    self.bump();
                    self.bump();
                    if self.is_kw("new") {
                        self.bump();
                        let class = self.ident()?;
                        return Ok(Term::New { x: word, class });
                    }
                    return Ok(Term::Assign { x: word, value: Box::new(self.parse_at(2)?) });
                }
                if *self.peek_at(1) == Tok::Sym("(")
                    && matches!(self.peek_at(2), Tok::Ident(_))
                    && *self.peek_at(3) == Tok::Sym(")")
                    && *self.peek_at(4) == Tok::Sym("{")
                {
                    self.bump();
                    self.bump();
                    let param = self.ident()?;
                    self.expect_sym(")")?;
                    return Ok(Term::MethodDef { m: word, lambda: Box::new(self.lambda_body(param)?) });
                }
                self.binary(2)
            }
            _ => self.binary(2),
        }
    }

    fn class_def(&mut self) -> PResult<Term> {
        self.expect_kw("class")?;
        let name = self.ident()?;
        if self.is_kw("implements") {
            self.bump();
            let iface = self.ident()?;
            self.warnings.push(format!("class {name}: `implements {iface}` ignored"));
            while self.eat_sym(",") {
                self.ident()?;
            }
        }
        self.expect_sym("{")?;
        let mut attrs = BTreeMap::new();
        let mut methods = BTreeMap::new();
        while !self.is_sym("}") {
            if self.is_kw("var") {
                self.bump();
                let a = self.ident()?;
                let init = if self.eat_sym(":=") {
                    match self.atom()? {
                        Term::Val(v) => v,
                        _ => return self.err("attribute initializers must be values"),
                    }
                } else {
                    Value::Nil
                };
                attrs.insert(a, init);
                self.eat_sym(";");
                continue;
            }
            let m = self.ident()?;
            self.expect_sym("(")?;
            let param = self.ident()?;
            self.expect_sym(")")?;
            let l = self.lambda_body(param)?;
            methods.insert(m, l);
            self.eat_sym(";");
        }
        self.expect_sym("}")?;
        Ok(Term::ClassDef { name, attrs, methods })
    }

    fn binary(&mut self, min: u8) -> PResult<Term> {
        if min > 6 {
            return self.unary();
        }
        let mut lhs = self.binary(min + 1)?;
        loop {
            let op = match self.peek() {
                Tok::Sym("||") if min == 2 => BinOp::Or,
                Tok::Sym("&&") if min == 3 => BinOp::And,
                Tok::Sym("==") if min == 4 => BinOp::Eq,
                Tok::Sym("<") if min == 4 => BinOp::Lt,
                Tok::Sym("<=") if min == 4 => BinOp::Le,
                Tok::Sym("+") if min == 5 => BinOp::Add,
                Tok::Sym("-") if min == 5 => BinOp::Sub,
                Tok::Sym("*") if min == 6 => BinOp::Mul,
                Tok::Sym("/") if min == 6 => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.binary(min + 1)?;
            lhs = Term::binop(op, lhs, rhs);
            if min == 4 {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> PResult<Term> {
        if self.eat_sym("!") {
            return Ok(Term::Not(Box::new(self.unary()?)));
        }
        self.app()
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Tok::Num(_) | Tok::ObjLit(_) => true,
            Tok::Sym("(") => true,
            Tok::Ident(x) => !KEYWORDS.contains(&x.as_str()) || matches!(x.as_str(), "true" | "false" | "nil"),
            _ => false,
        }
    }

    fn app(&mut self) -> PResult<Term> {
        if let Tok::Ident(f) = self.peek().clone() {
            if !KEYWORDS.contains(&f.as_str()) && *self.peek_at(1) != Tok::Sym(".") {
                self.bump();
                if self.starts_atom() {
                    let arg = self.atom()?;
                    return Ok(Term::App { f, arg: Box::new(arg) });
                }
                return Ok(Term::Var(f));
            }
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Term::nat(n))
            }
            Tok::ObjLit(o) => {
                self.bump();
                Ok(Term::Val(Value::Obj(ObjectId(o))))
            }
            Tok::Sym("(") => {
                self.bump();
                let t = self.stmt()?;
                self.expect_sym(")")?;
                Ok(t)
            }
            Tok::Ident(x) => match x.as_str() {
                "true" => {
                    self.bump();
                    Ok(Term::boolean(true))
                }
                "false" => {
                    self.bump();
                    Ok(Term::boolean(false))
                }
                "nil" => {
                    self.bump();
                    Ok(NIL)
                }
                _ => {
                    let x = self.ident()?;
                    if self.eat_sym(".") {
                        let l = self.ident()?;
                        return Ok(Term::RecProj { r: x, l });
                    }
                    Ok(Term::Var(x))
                }
            },
            other => self.err(format!("unexpected {}", describe(&other))),
        }
    }

    fn system(&mut self) -> PResult<SystemTerm> {
        let mut objs = vec![self.object()?];
        while self.eat_sym("||") {
            objs.push(self.object()?);
        }
        self.expect_eof()?;
        Ok(SystemTerm::from_objects(objs).expect("at least one object"))
    }

    fn object(&mut self) -> PResult<(ObjectId, Term)> {
        if self.is_kw("object") {
            self.bump();
            let o = self.ident()?;
            self.expect_sym("{")?;
            let s = if self.is_sym("}") { Term::Skip } else { self.stmt()? };
            self.expect_sym("}")?;
            return Ok((ObjectId(o), s));
        }
        let o = self.ident()?;
        self.expect_sym("[")?;
        let s = self.stmt()?;
        self.expect_sym("]")?;
        Ok((ObjectId(o), s))
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(x) => format!("`{x}`"),
        Tok::Num(n) => format!("`{n}`"),
        Tok::ObjLit(o) => format!("`@{o}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

/// Parses a single statement/expression.
pub fn parse_term(src: &str) -> Result<Term, SyntaxError> {
    let mut p = Parser::new(src)?;
    let t = p.stmt()?;
    p.expect_eof()?;
    Ok(t)
}

/// A parsed system with any warnings (ignored `implements` clauses).
#[derive(Debug, Clone)]
pub struct ParsedSystem {
    pub system: SystemTerm,
    pub warnings: Vec<String>,
}

/// Parses `object o { s } || o2[s2] || ...`. Bare identifiers naming one of
/// the declared objects resolve to object literals.
pub fn parse_system(src: &str) -> Result<ParsedSystem, SyntaxError> {
    let mut p = Parser::new(src)?;
    let system = p.system()?;
    let names: Vec<String> = system.objects().iter().map(|(o, _)| o.0.clone()).collect();
    let resolved = resolve_objects(&system, &names);
    Ok(ParsedSystem { system: resolved, warnings: p.warnings })
}

fn resolve_objects(sys: &SystemTerm, names: &[String]) -> SystemTerm {
    match sys {
        SystemTerm::Obj(o, s) => {
            let s = names.iter().fold(s.clone(), |acc, n| subst(&acc, &Value::Obj(ObjectId(n.clone())), n));
            SystemTerm::Obj(o.clone(), s)
        }
        SystemTerm::Par(a, b) => SystemTerm::par(resolve_objects(a, names), resolve_objects(b, names)),
    }
}
