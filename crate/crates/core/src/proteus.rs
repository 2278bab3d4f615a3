//! The sequential language: stores, functions and lazy records as separate
//! read/write components, printing on a write-only component, and three
//! upgrade constructs firing `E_v`, `E_f` and `E_r`.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};
use serde_json::Value as Json;
use thiserror::Error;

use crate::engine::{Label, Language, StepResult, Transition};
use crate::label::{ComponentKind, ComponentObject, DataSnapshot, Index, LabelError, LabelSignature, Morphism};
use crate::syntax::{self, subst, BinOp, Lambda, SyntaxError, Term, UpdateKind, Value, NIL};
use crate::uts::{Delta, EndofunctorSpec, Jump, Registry};

pub const S: &str = "S";
pub const F: &str = "F";
pub const R: &str = "R";
pub const OUT: &str = "Out";
pub const U_S: &str = "U_S";
pub const U_F: &str = "U_F";
pub const U_R: &str = "U_R";

/// Objects stored in the tables: values, λ-abstractions and record terms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProteusDatum {
    Val(Value),
    Lambda(Lambda),
    Record(Vec<(String, Term)>),
}

impl Serialize for ProteusDatum {
    fn serialize<Se: Serializer>(&self, s: Se) -> Result<Se::Ok, Se::Error> {
        match self {
            ProteusDatum::Val(v) => v.serialize(s),
            ProteusDatum::Lambda(l) => l.to_json().serialize(s),
            ProteusDatum::Record(fields) => {
                use serde::ser::SerializeMap;
                let mut m = s.serialize_map(Some(fields.len()))?;
                for (l, e) in fields {
                    m.serialize_entry(l, &e.to_string())?;
                }
                m.end()
            }
        }
    }
}

pub type Table = BTreeMap<String, ProteusDatum>;

/// The two-branch upgrade of a table: when Δ meets the upgrade map, every
/// identifier of Δ present there is (re)bound and removed from the upgrade
/// map; otherwise both are returned unchanged. `consume_all` empties the
/// upgrade map instead of removing Δ only.
pub fn upgrade_table<D: Clone>(
    delta: &Delta,
    rho: &BTreeMap<String, D>,
    rho_u: &BTreeMap<String, D>,
    consume_all: bool,
) -> (BTreeMap<String, D>, BTreeMap<String, D>) {
    if !rho_u.keys().any(|k| delta.contains(k)) {
        return (rho.clone(), rho_u.clone());
    }
    let mut out = rho.clone();
    for x in delta {
        if let Some(v) = rho_u.get(x) {
            out.insert(x.clone(), v.clone());
        }
    }
    let rest = if consume_all {
        BTreeMap::new()
    } else {
        rho_u.iter().filter(|(k, _)| !delta.contains(*k)).map(|(k, v)| (k.clone(), v.clone())).collect()
    };
    (out, rest)
}

pub fn e_v(delta: &Delta, rho: &Table, rho_u: &Table) -> (Table, Table) {
    upgrade_table(delta, rho, rho_u, false)
}

pub fn e_f(delta: &Delta, rho_f: &Table, rho_uf: &Table) -> (Table, Table) {
    upgrade_table(delta, rho_f, rho_uf, false)
}

pub fn e_r(delta: &Delta, rho_r: &Table, rho_ur: &Table) -> (Table, Table) {
    upgrade_table(delta, rho_r, rho_ur, false)
}

pub fn signature() -> LabelSignature {
    let comps = [
        (Index::data(S), ComponentKind::ReadWrite),
        (Index::data(F), ComponentKind::ReadWrite),
        (Index::data(R), ComponentKind::ReadWrite),
        (Index::data(OUT), ComponentKind::WriteOnly),
        (Index::upgrade(U_S), ComponentKind::ReadOnly),
        (Index::upgrade(U_F), ComponentKind::ReadOnly),
        (Index::upgrade(U_R), ComponentKind::ReadOnly),
    ];
    comps
        .into_iter()
        .try_fold(LabelSignature::empty(), |sig, (i, k)| sig.extend(i, k))
        .expect("static signature is well formed")
}

fn table_spec(name: &str, data: &str, upd: &str, consume_all: bool) -> EndofunctorSpec<ProteusDatum> {
    EndofunctorSpec::new(name, vec![Index::data(data)], vec![Index::upgrade(upd)], move |delta, t| {
        let empty = Table::new();
        let rho = t[0].as_map().unwrap_or(&empty);
        let rho_u = t[1].as_map().unwrap_or(&empty);
        let (a, b) = upgrade_table(delta, rho, rho_u, consume_all);
        vec![ComponentObject::Map(a), ComponentObject::Map(b)]
    })
}

pub fn registry(consume_all: bool) -> Registry<ProteusDatum> {
    Registry::new()
        .register(table_spec("E_v", S, U_S, consume_all))
        .and_then(|r| r.register(table_spec("E_f", F, U_F, consume_all)))
        .and_then(|r| r.register(table_spec("E_r", R, U_R, consume_all)))
        .expect("shipped endofunctors register")
}

fn endofunctor_name(kind: UpdateKind) -> Option<&'static str> {
    match kind {
        UpdateKind::Var => Some("E_v"),
        UpdateKind::Fun => Some("E_f"),
        UpdateKind::Rec => Some("E_r"),
        UpdateKind::Class => None,
    }
}

type Fired = (Label<ProteusDatum>, Term, &'static str);

fn table(snap: &DataSnapshot<ProteusDatum>, name: &str) -> ComponentObject<ProteusDatum> {
    snap.get(name).cloned().unwrap_or_else(ComponentObject::empty_map)
}

fn unobservable(next: Term, rule: &'static str) -> Fired {
    (Label::Step(Morphism::identity()), next, rule)
}

fn inspect(snap: &DataSnapshot<ProteusDatum>, name: &str, next: Term, rule: &'static str) -> Fired {
    (Label::Step(Morphism::identity().read(name, table(snap, name))), next, rule)
}

fn write(snap: &DataSnapshot<ProteusDatum>, name: &str, key: &str, value: ProteusDatum, rule: &'static str) -> Fired {
    let rho = table(snap, name);
    let next = rho.updated(key, value);
    (Label::Step(Morphism::identity().write(name, rho, next)), NIL, rule)
}

fn congruence(inner: Option<Fired>, wrap: impl FnOnce(Term) -> Term) -> Option<Fired> {
    inner.map(|(label, t, rule)| (label, wrap(t), rule))
}

/// One rule instance at `t`, `Ok(None)` on values, `Err` when stuck. The
/// rules are syntax-directed, so there is at most one.
pub fn step_term(t: &Term, snap: &DataSnapshot<ProteusDatum>) -> Result<Option<Fired>, String> {
    let b = |t: Term| Box::new(t);
    Ok(Some(match t {
        Term::Val(_) => return Ok(None),
        Term::Skip => unobservable(NIL, "skip"),
        Term::Seq(s1, s2) => match s1.as_ref() {
            Term::Val(Value::Nil) => unobservable((**s2).clone(), "seq-nil"),
            Term::Val(v) => return Err(format!("value `{v}` in statement position")),
            _ => return Ok(congruence(step_term(s1, snap)?, |s| Term::Seq(b(s), s2.clone()))),
        },
        Term::Var(x) => match table(snap, S).lookup(x) {
            Some(ProteusDatum::Val(v)) => inspect(snap, S, Term::Val(v.clone()), "var"),
            _ => return Err(format!("unbound variable `{x}`")),
        },
        Term::Let { x, bound, body } => match bound.as_ref() {
            Term::Val(v) => unobservable(subst(body, v, x), "let"),
            _ => {
                return Ok(congruence(step_term(bound, snap)?, |e| Term::Let { x: x.clone(), bound: b(e), body: body.clone() }))
            }
        },
        Term::VarDecl { x, init } => match init.as_ref() {
            Term::Val(v) => {
                if table(snap, S).lookup(x).is_some() {
                    return Err(format!("variable `{x}` already declared"));
                }
                write(snap, S, x, ProteusDatum::Val(v.clone()), "var-decl")
            }
            _ => return Ok(congruence(step_term(init, snap)?, |e| Term::VarDecl { x: x.clone(), init: b(e) })),
        },
        Term::Assign { x, value } => match value.as_ref() {
            Term::Val(v) => {
                if table(snap, S).lookup(x).is_none() {
                    return Err(format!("assignment to undeclared variable `{x}`"));
                }
                write(snap, S, x, ProteusDatum::Val(v.clone()), "assign")
            }
            _ => return Ok(congruence(step_term(value, snap)?, |e| Term::Assign { x: x.clone(), value: b(e) })),
        },
        Term::FunDecl { f, lambda } => write(snap, F, f, ProteusDatum::Lambda((**lambda).clone()), "fun-decl"),
        Term::App { f, arg } => match arg.as_ref() {
            Term::Val(v) => match table(snap, F).lookup(f) {
                Some(ProteusDatum::Lambda(l)) => inspect(snap, F, subst(&l.body, v, &l.param), "fun-app"),
                _ => return Err(format!("undeclared function `{f}`")),
            },
            _ => return Ok(congruence(step_term(arg, snap)?, |e| Term::App { f: f.clone(), arg: b(e) })),
        },
        Term::RecDecl { r, fields } => {
            if table(snap, R).lookup(r).is_some() {
                return Err(format!("record `{r}` already declared"));
            }
            write(snap, R, r, ProteusDatum::Record(fields.clone()), "rec-decl")
        }
        Term::RecProj { r, l } => match table(snap, R).lookup(r) {
            Some(ProteusDatum::Record(fs)) => match fs.iter().find(|(k, _)| k == l) {
                Some((_, e)) => inspect(snap, R, e.clone(), "rec-proj"),
                None => return Err(format!("record `{r}` has no label `{l}`")),
            },
            _ => return Err(format!("undeclared record `{r}`")),
        },
        Term::If { cond, then, otherwise } => match cond.as_ref() {
            Term::Val(Value::Bool(true)) => unobservable((**then).clone(), "if-literal"),
            Term::Val(Value::Bool(false)) => unobservable((**otherwise).clone(), "if-literal"),
            Term::Val(v) => return Err(format!("non-boolean condition `{v}`")),
            _ => {
                let Some((label, c, rule)) = step_term(cond, snap)? else { return Ok(None) };
                match c {
                    Term::Val(Value::Bool(true)) => (label, (**then).clone(), rule),
                    Term::Val(Value::Bool(false)) => (label, (**otherwise).clone(), rule),
                    c => (label, Term::If { cond: b(c), then: then.clone(), otherwise: otherwise.clone() }, rule),
                }
            }
        },
        Term::BinOp { op, lhs, rhs } => match (lhs.as_ref(), rhs.as_ref()) {
            (Term::Val(x), Term::Val(y)) => match op.eval(x, y) {
                Some(v) => unobservable(Term::Val(v), "binop"),
                None => return Err(format!("`{x} {} {y}` is undefined", op.symbol())),
            },
            (Term::Val(_), _) => {
                return Ok(congruence(step_term(rhs, snap)?, |e| Term::BinOp { op: *op, lhs: lhs.clone(), rhs: b(e) }))
            }
            _ => return Ok(congruence(step_term(lhs, snap)?, |e| Term::BinOp { op: *op, lhs: b(e), rhs: rhs.clone() })),
        },
        Term::Not(e) => match e.as_ref() {
            Term::Val(Value::Bool(x)) => unobservable(Term::boolean(!x), "not"),
            Term::Val(v) => return Err(format!("`!{v}` is undefined")),
            _ => return Ok(congruence(step_term(e, snap)?, |e| Term::Not(b(e)))),
        },
        Term::Print(e) => match e.as_ref() {
            Term::Val(v) => (Label::Step(Morphism::identity().emit(OUT, vec![ProteusDatum::Val(v.clone())])), NIL, "print"),
            _ => return Ok(congruence(step_term(e, snap)?, |e| Term::Print(b(e)))),
        },
        Term::Update { kind, delta } => match endofunctor_name(*kind) {
            Some(name) => (Label::Jump(Jump::new(name, delta.clone())), NIL, "update"),
            None => return Err("class upgrades are not available".to_string()),
        },
        other => return Err(format!("`{other}` is not a sequential construct")),
    }))
}

/// Non-identity components each rule may touch.
pub fn allowed_writes(rule: &str) -> &'static [&'static str] {
    match rule {
        "var-decl" | "assign" => &[S],
        "fun-decl" => &[F],
        "rec-decl" => &[R],
        "print" => &[OUT],
        _ => &[],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("{0}")]
    Invalid(String),
}

/// Rejects constructs outside the sequential language.
pub fn validate(t: &Term) -> Result<(), String> {
    for sub in t.subterms() {
        let bad = match sub {
            Term::BinOp { op: BinOp::Div, .. } => Some("division is not part of the language".to_string()),
            Term::Val(Value::Obj(o)) => Some(format!("object literal `@{o}`")),
            Term::Update { kind: UpdateKind::Class, .. } => Some("class upgrades belong to the concurrent language".into()),
            Term::MethodDef { .. }
            | Term::Return(_)
            | Term::Invoke { .. }
            | Term::ClassDef { .. }
            | Term::New { .. }
            | Term::Async(_)
            | Term::Yield
            | Term::Call { .. }
            | Term::Read { .. } => Some(format!("`{sub}` is a concurrent construct")),
            _ => None,
        };
        if let Some(msg) = bad {
            return Err(msg);
        }
    }
    Ok(())
}

pub fn parse(src: &str) -> Result<Term, ProgramError> {
    let t = syntax::parse_term(src)?;
    validate(&t).map_err(ProgramError::Invalid)?;
    Ok(t)
}

/// The language instance, optionally with an extra read/write component
/// no rule mentions.
#[derive(Debug, Clone)]
pub struct Proteus {
    sig: LabelSignature,
    registry: Registry<ProteusDatum>,
    extra: Vec<(String, ComponentObject<ProteusDatum>)>,
}

impl Default for Proteus {
    fn default() -> Self {
        Self::new(false)
    }
}

impl Proteus {
    pub fn new(consume_all: bool) -> Self {
        Proteus { sig: signature(), registry: registry(consume_all), extra: Vec::new() }
    }

    /// Same rules over the signature extended by a read/write `index`,
    /// initialized with a dummy object.
    pub fn extended_with(&self, index: &str) -> Result<Self, LabelError> {
        let sig = self.sig.extend(Index::data(index), ComponentKind::ReadWrite)?;
        let mut extra = self.extra.clone();
        extra.push((index.to_string(), ComponentObject::from_pairs([("dummy", ProteusDatum::Val(Value::Nat(0)))])));
        Ok(Proteus { sig, registry: self.registry.clone(), extra })
    }
}

fn datum_from_json(index: &str, key: &str, j: &Json) -> Result<ProteusDatum, String> {
    match index {
        U_S => match Value::from_json(j) {
            Some(Value::Obj(_)) | None => Err(format!("{index}.{key}: expected nil, a natural or a boolean")),
            Some(v) => Ok(ProteusDatum::Val(v)),
        },
        U_F => {
            let param = j.get("param").and_then(Json::as_str).ok_or_else(|| format!("{index}.{key}: missing param"))?;
            let body = j.get("body").and_then(Json::as_str).ok_or_else(|| format!("{index}.{key}: missing body"))?;
            let body = parse(body).map_err(|e| format!("{index}.{key}: {e}"))?;
            Ok(ProteusDatum::Lambda(Lambda::new(param, body)))
        }
        U_R => {
            let fields = j.as_object().ok_or_else(|| format!("{index}.{key}: expected an object of label expressions"))?;
            let mut out = Vec::new();
            for (l, e) in fields {
                let src = e.as_str().ok_or_else(|| format!("{index}.{key}.{l}: expected an expression string"))?;
                out.push((l.clone(), parse(src).map_err(|e| format!("{index}.{key}.{l}: {e}"))?));
            }
            Ok(ProteusDatum::Record(out))
        }
        _ => Err(format!("`{index}` is not an upgrade component")),
    }
}

impl Language for Proteus {
    type Term = Term;
    type Datum = ProteusDatum;

    fn name(&self) -> &'static str {
        "proteus"
    }

    fn signature(&self) -> &LabelSignature {
        &self.sig
    }

    fn registry(&self) -> &Registry<ProteusDatum> {
        &self.registry
    }

    fn initial_snapshot(&self, _term: &Term) -> DataSnapshot<ProteusDatum> {
        let mut snap = self.sig.bottom_snapshot();
        for (i, obj) in &self.extra {
            snap.set(i.clone(), obj.clone());
        }
        snap
    }

    fn step(&self, term: &Term, snap: &DataSnapshot<ProteusDatum>) -> StepResult<Term, ProteusDatum> {
        match step_term(term, snap) {
            Ok(Some((label, next, rule))) => {
                StepResult { transitions: vec![Transition { label, next, rule, actor: None }], stuck: Vec::new() }
            }
            Ok(None) => StepResult::default(),
            Err(reason) => StepResult { transitions: Vec::new(), stuck: vec![reason] },
        }
    }

    fn is_final(&self, term: &Term) -> bool {
        term.is_value()
    }

    fn parse_payload(&self, index: &str, json: &Json) -> Result<ComponentObject<ProteusDatum>, String> {
        let obj = json.as_object().ok_or_else(|| format!("payload for `{index}` must be a JSON object"))?;
        let mut m = Table::new();
        for (k, v) in obj {
            m.insert(k.clone(), datum_from_json(index, k, v)?);
        }
        Ok(ComponentObject::Map(m))
    }
}
