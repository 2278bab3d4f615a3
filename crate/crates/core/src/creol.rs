//! The concurrent object language. Objects run statements over their own
//! encapsulated local data (store, method table, future labels, class name,
//! thread pool) and share global class tables, upgrade numbers and message
//! pools. Class upgrades fire the endofunctor `E_c`.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};
use serde_json::Value as Json;

use crate::encapsulation::{LocalSnapshot, LocalizedMorphism, ObjectId};
use crate::engine::{Label, Language, StepResult, Trace, TraceEntry, Transition};
use crate::label::{ComponentKind, ComponentObject, DataSnapshot, Index, LabelSignature, Morphism, MorphismComponent};
use crate::proteus::ProgramError;
use crate::syntax::{parse_system, parse_term, subst, BinOp, Lambda, ParsedSystem, SystemTerm, Term, UpdateKind, Value, NIL};
use crate::uts::{Delta, EndofunctorSpec, Jump, Registry};

/// Encapsulated local data of all objects.
pub const E: &str = "E";
pub const C: &str = "C";
pub const A: &str = "A";
/// Upgrade numbers per class.
pub const UN: &str = "UN";
/// Message pools per object.
pub const M: &str = "M";
/// Counters for object identifiers and futures.
pub const FRESH: &str = "FRESH";
pub const UC: &str = "UC";
pub const UA: &str = "UA";
pub const UD: &str = "UD";

pub const S: &str = "S";
pub const MD: &str = "MD";
pub const L: &str = "L";
pub const T: &str = "T";
pub const CN: &str = "CN";
/// Class version and attribute names an object was last refreshed against.
pub const V: &str = "V";

const CALLER: &str = "caller";
const LABEL: &str = "label";
const POOL: &str = "pool";
const CLASS: &str = "class";
const VERSION: &str = "version";
const KNOWN: &str = "known";
const STALE: &str = "stale";
const OBJECTS: &str = "objects";
const FUTURES: &str = "futures";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Message {
    Invoke { caller: ObjectId, n: u64, m: String, arg: Value },
    Completion { n: u64, value: Value },
}

impl Message {
    pub fn future(&self) -> u64 {
        match self {
            Message::Invoke { n, .. } | Message::Completion { n, .. } => *n,
        }
    }
}

impl Serialize for Message {
    fn serialize<Z: Serializer>(&self, s: Z) -> Result<Z::Ok, Z::Error> {
        let mut m = s.serialize_map(None)?;
        match self {
            Message::Invoke { caller, n, m: name, arg } => {
                m.serialize_entry("kind", "invoke")?;
                m.serialize_entry("caller", caller.as_str())?;
                m.serialize_entry("n", n)?;
                m.serialize_entry("m", name)?;
                m.serialize_entry("v", arg)?;
            }
            Message::Completion { n, value } => {
                m.serialize_entry("kind", "completion")?;
                m.serialize_entry("n", n)?;
                m.serialize_entry("v", value)?;
            }
        }
        m.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum CreolDatum {
    Val(Value),
    Nat(u64),
    Method(Lambda),
    Methods(BTreeMap<String, Lambda>),
    Attrs(BTreeMap<String, Value>),
    Versions(BTreeMap<String, u64>),
    Class(String),
    Names(BTreeSet<String>),
    /// A sorted multiset of suspended statements.
    Threads(Vec<Term>),
    /// A sorted multiset of messages.
    Messages(Vec<Message>),
}

impl Serialize for CreolDatum {
    fn serialize<Z: Serializer>(&self, s: Z) -> Result<Z::Ok, Z::Error> {
        match self {
            CreolDatum::Val(v) => v.serialize(s),
            CreolDatum::Nat(n) => s.serialize_u64(*n),
            CreolDatum::Method(l) => l.to_json().serialize(s),
            CreolDatum::Methods(ms) => {
                let mut m = s.serialize_map(Some(ms.len()))?;
                for (k, l) in ms {
                    m.serialize_entry(k, &l.to_json())?;
                }
                m.end()
            }
            CreolDatum::Attrs(a) => a.serialize(s),
            CreolDatum::Versions(v) => v.serialize(s),
            CreolDatum::Class(c) => s.serialize_str(c),
            CreolDatum::Names(ns) => ns.serialize(s),
            CreolDatum::Threads(ts) => {
                let mut seq = s.serialize_seq(Some(ts.len()))?;
                for t in ts {
                    seq.serialize_element(&t.to_string())?;
                }
                seq.end()
            }
            CreolDatum::Messages(ms) => ms.serialize(s),
        }
    }
}

pub type Table = BTreeMap<String, CreolDatum>;
type Obj = ComponentObject<CreolDatum>;
type Snap = DataSnapshot<CreolDatum>;

fn extend_all(comps: Vec<(Index, ComponentKind)>) -> LabelSignature {
    comps
        .into_iter()
        .try_fold(LabelSignature::empty(), |sig, (i, k)| sig.extend(i, k))
        .expect("static signature is well formed")
}

/// Per-object signature.
pub fn local_signature() -> LabelSignature {
    extend_all(vec![
        (Index::data(S), ComponentKind::ReadWrite),
        (Index::data(MD), ComponentKind::ReadWrite),
        (Index::data(L), ComponentKind::ReadWrite),
        (Index::data(T), ComponentKind::ReadWrite),
        (Index::data(CN), ComponentKind::ReadOnly),
        (Index::data(V), ComponentKind::ReadOnly),
    ])
}

pub fn signature() -> LabelSignature {
    extend_all(vec![
        (Index::data(E), ComponentKind::Encapsulated(Box::new(local_signature()))),
        (Index::data(C), ComponentKind::ReadWrite),
        (Index::data(A), ComponentKind::ReadWrite),
        (Index::data(UN), ComponentKind::ReadWrite),
        (Index::data(M), ComponentKind::ReadWrite),
        (Index::data(FRESH), ComponentKind::ReadWrite),
        (Index::upgrade(UC), ComponentKind::ReadOnly),
        (Index::upgrade(UA), ComponentKind::ReadOnly),
        (Index::upgrade(UD), ComponentKind::ReadOnly),
    ])
}

// ---------------------------------------------------------------------------
// Class upgrades
// ---------------------------------------------------------------------------

/// `ρ ⊑ ρ'`: every class required by `rho` is present in `rho_prime` at
/// least at the required version.
pub fn dep_check(rho: &BTreeMap<String, u64>, rho_prime: &BTreeMap<String, u64>) -> bool {
    rho.iter().all(|(c, n)| rho_prime.get(c).is_some_and(|m| n <= m))
}

fn nat_of(d: Option<&CreolDatum>) -> u64 {
    match d {
        Some(CreolDatum::Nat(n)) => *n,
        _ => 0,
    }
}

fn versions(t: &Table) -> BTreeMap<String, u64> {
    t.iter().filter_map(|(k, d)| if let CreolDatum::Nat(n) = d { Some((k.clone(), *n)) } else { None }).collect()
}

/// The class-upgrade function on `(C, A, UN, UC, UA, UD)`.
pub fn e_c(delta: &Delta, rho_c: &Table, rho_a: &Table, rho_un: &Table, rho_uc: &Table, rho_ua: &Table, rho_ud: &Table) -> [Table; 6] {
    let un = versions(rho_un);
    let met = delta.iter().filter_map(|k| rho_ud.get(k)).all(|d| match d {
        CreolDatum::Versions(req) => dep_check(req, &un),
        _ => false,
    });
    if !met {
        return [rho_c.clone(), rho_a.clone(), rho_un.clone(), rho_uc.clone(), rho_ua.clone(), rho_ud.clone()];
    }
    let mut c = rho_c.clone();
    let mut a = rho_a.clone();
    let mut n = rho_un.clone();
    for k in delta {
        if let Some(CreolDatum::Methods(new)) = rho_uc.get(k) {
            let mut ms = match c.get(k) {
                Some(CreolDatum::Methods(old)) => old.clone(),
                _ => BTreeMap::new(),
            };
            ms.extend(new.iter().map(|(m, l)| (m.clone(), l.clone())));
            c.insert(k.clone(), CreolDatum::Methods(ms));
        }
        if let Some(attrs) = rho_ua.get(k) {
            a.insert(k.clone(), attrs.clone());
        }
        if rho_uc.contains_key(k) || rho_ua.contains_key(k) {
            n.insert(k.clone(), CreolDatum::Nat(nat_of(rho_un.get(k)) + 1));
        }
    }
    let strip = |t: &Table| t.iter().filter(|(k, _)| !delta.contains(*k)).map(|(k, d)| (k.clone(), d.clone())).collect::<Table>();
    [c, a, n, strip(rho_uc), strip(rho_ua), strip(rho_ud)]
}

pub fn e_c_spec() -> EndofunctorSpec<CreolDatum> {
    EndofunctorSpec::new(
        "E_c",
        vec![Index::data(C), Index::data(A), Index::data(UN)],
        vec![Index::upgrade(UC), Index::upgrade(UA), Index::upgrade(UD)],
        |delta, t| {
            let empty = Table::new();
            let m: Vec<&Table> = t.iter().map(|o| o.as_map().unwrap_or(&empty)).collect();
            e_c(delta, m[0], m[1], m[2], m[3], m[4], m[5]).into_iter().map(ComponentObject::Map).collect()
        },
    )
}

pub fn registry() -> Registry<CreolDatum> {
    Registry::new().register(e_c_spec()).expect("shipped endofunctor registers")
}

/// Brings every object whose class was upgraded past its recorded version
/// up to date: attributes new to the class are added to its store with their
/// declared initial value, existing bindings are kept, and bindings of
/// attributes the class no longer declares are listed as stale.
pub fn refresh_objects(mut snap: Snap) -> Snap {
    let Some(ComponentObject::Local(locals)) = snap.get(E).cloned() else { return snap };
    let un = map_of(&snap, UN);
    let attrs_tab = map_of(&snap, A);
    let mut out = LocalSnapshot::default();
    for (o, local) in locals.iter() {
        out.insert(o.clone(), refresh_one(local, &un, &attrs_tab));
    }
    snap.set(E, ComponentObject::Local(out));
    snap
}

fn refresh_one(local: &Snap, un: &Table, attrs_tab: &Table) -> Snap {
    let Some(CreolDatum::Class(class)) = local.get(CN).and_then(|o| o.lookup(CLASS)).cloned() else { return local.clone() };
    let v = local.get(V).and_then(|o| o.as_map()).cloned().unwrap_or_default();
    let current = nat_of(un.get(&class));
    if current <= nat_of(v.get(VERSION)) {
        return local.clone();
    }
    let names = |key: &str| match v.get(key) {
        Some(CreolDatum::Names(n)) => n.clone(),
        _ => BTreeSet::new(),
    };
    let known = names(KNOWN);
    let attrs = match attrs_tab.get(&class) {
        Some(CreolDatum::Attrs(a)) => a.clone(),
        _ => BTreeMap::new(),
    };
    let mut store = local.get(S).and_then(|o| o.as_map()).cloned().unwrap_or_default();
    for (a, init) in &attrs {
        if !known.contains(a) && !store.contains_key(a) {
            store.insert(a.clone(), CreolDatum::Val(init.clone()));
        }
    }
    let mut stale: BTreeSet<String> = names(STALE).union(&known).filter(|a| !attrs.contains_key(*a) && store.contains_key(*a)).cloned().collect();
    stale.retain(|a| store.contains_key(a));
    let mut nv = Table::new();
    nv.insert(VERSION.into(), CreolDatum::Nat(current));
    nv.insert(KNOWN.into(), CreolDatum::Names(attrs.keys().cloned().collect()));
    if !stale.is_empty() {
        nv.insert(STALE.into(), CreolDatum::Names(stale));
    }
    local.clone().with(S, ComponentObject::Map(store)).with(V, ComponentObject::Map(nv))
}

// ---------------------------------------------------------------------------
// Evaluation contexts
// ---------------------------------------------------------------------------

/// `Ev ::= [] | Ev ; s`, stored as the statements following the hole,
/// innermost first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EvalContext {
    rest: Vec<Term>,
}

impl EvalContext {
    pub fn hole() -> Self {
        Self::default()
    }

    pub fn is_hole(&self) -> bool {
        self.rest.is_empty()
    }

    pub fn plug(&self, t: Term) -> Term {
        self.rest.iter().fold(t, |acc, s| Term::seq(acc, s.clone()))
    }
}

/// Terms that may sit in the hole: non-values that are not a sequence
/// with a reducible head.
pub fn is_redex(t: &Term) -> bool {
    match t {
        Term::Val(_) => false,
        Term::Seq(a, _) => a.is_value(),
        _ => true,
    }
}

/// Every way of writing `s` as `Ev[r]`.
pub fn splits(s: &Term) -> Vec<(EvalContext, Term)> {
    let mut out = vec![(EvalContext::hole(), s.clone())];
    let mut rest = Vec::new();
    let mut cur = s;
    while let Term::Seq(a, b) = cur {
        rest.insert(0, (**b).clone());
        out.push((EvalContext { rest: rest.clone() }, (**a).clone()));
        cur = a;
    }
    out
}

/// The unique split of a non-value into a context and a redex.
pub fn decompose(s: &Term) -> Option<(EvalContext, Term)> {
    if s.is_value() {
        return None;
    }
    let mut rest = Vec::new();
    let mut cur = s;
    while let Term::Seq(a, b) = cur {
        if a.is_value() {
            break;
        }
        rest.push((**b).clone());
        cur = a;
    }
    rest.reverse();
    Some((EvalContext { rest }, cur.clone()))
}

// ---------------------------------------------------------------------------
// Rules
// ---------------------------------------------------------------------------

fn map_of(snap: &Snap, name: &str) -> Table {
    snap.get(name).and_then(|o| o.as_map()).cloned().unwrap_or_default()
}

fn obj_of(snap: &Snap, name: &str) -> Obj {
    snap.get(name).cloned().unwrap_or_else(ComponentObject::empty_map)
}

fn threads(t: &Obj) -> Vec<Term> {
    match t.lookup(POOL) {
        Some(CreolDatum::Threads(ts)) => ts.clone(),
        _ => Vec::new(),
    }
}

fn threads_obj(ts: Vec<Term>) -> Obj {
    if ts.is_empty() {
        ComponentObject::empty_map()
    } else {
        ComponentObject::from_pairs([(POOL, CreolDatum::Threads(ts))])
    }
}

fn messages(m: &Obj, o: &ObjectId) -> Option<Vec<Message>> {
    match m.lookup(o.as_str()) {
        Some(CreolDatum::Messages(ms)) => Some(ms.clone()),
        _ => None,
    }
}

fn added<X: Ord>(mut v: Vec<X>, x: X) -> Vec<X> {
    let i = v.binary_search(&x).unwrap_or_else(|i| i);
    v.insert(i, x);
    v
}

fn removed<X: Ord>(mut v: Vec<X>, x: &X) -> Vec<X> {
    if let Ok(i) = v.binary_search(x) {
        v.remove(i);
    }
    v
}

fn distinct<X: Ord + Clone>(v: &[X]) -> Vec<X> {
    let mut out = v.to_vec();
    out.dedup();
    out
}

#[derive(Debug, Clone)]
struct Spawn {
    id: ObjectId,
    init: Snap,
    body: Term,
}

/// One rule instance for one object, before it is lifted to the system.
#[derive(Debug, Clone)]
struct Effect {
    local: Morphism<CreolDatum>,
    global: Morphism<CreolDatum>,
    next: Term,
    rule: &'static str,
    spawn: Option<Spawn>,
    jump: Option<Jump>,
}

impl Effect {
    fn new(next: Term, rule: &'static str) -> Self {
        Effect { local: Morphism::identity(), global: Morphism::identity(), next, rule, spawn: None, jump: None }
    }

    fn read_local(mut self, idx: &str, obj: Obj) -> Self {
        self.local = self.local.read(idx, obj);
        self
    }

    fn write_local(mut self, idx: &str, src: Obj, tgt: Obj) -> Self {
        self.local = self.local.write(idx, src, tgt);
        self
    }

    fn read_global(mut self, idx: &str, obj: Obj) -> Self {
        self.global = self.global.read(idx, obj);
        self
    }

    fn write_global(mut self, idx: &str, src: Obj, tgt: Obj) -> Self {
        self.global = self.global.write(idx, src, tgt);
        self
    }

    fn map_next(mut self, f: impl FnOnce(Term) -> Term) -> Self {
        self.next = f(self.next);
        self
    }

    fn purely_local(&self) -> bool {
        self.global.is_empty() && self.spawn.is_none() && self.jump.is_none()
    }
}

struct Env<'a> {
    o: &'a ObjectId,
    local: &'a Snap,
    snap: &'a Snap,
}

impl Env<'_> {
    fn l(&self, idx: &str) -> Obj {
        obj_of(self.local, idx)
    }

    fn g(&self, idx: &str) -> Obj {
        obj_of(self.snap, idx)
    }

    /// Method lookup: the object's own definitions first, then its class.
    fn resolve(&self, m: &str, eff: impl FnOnce(&Lambda) -> Effect) -> Result<Effect, String> {
        let md = self.l(MD);
        if let Some(CreolDatum::Method(l)) = md.lookup(m) {
            return Ok(eff(l).read_local(MD, md.clone()));
        }
        let cn = self.l(CN);
        if let Some(CreolDatum::Class(class)) = cn.lookup(CLASS) {
            let c = self.g(C);
            if let Some(CreolDatum::Methods(ms)) = c.lookup(class) {
                if let Some(l) = ms.get(m) {
                    return Ok(eff(l).read_local(CN, cn.clone()).read_global(C, c.clone()));
                }
            }
        }
        Err(format!("method `{m}` not found"))
    }

    fn write_store(&self, eff: Effect, x: &str, v: Value) -> Effect {
        let s = self.l(S);
        let t = s.updated(x, CreolDatum::Val(v));
        eff.write_local(S, s, t)
    }
}

fn congruence(inner: Option<Effect>, wrap: impl FnOnce(Term) -> Term) -> Option<Effect> {
    inner.map(|e| e.map_next(wrap))
}

/// Rules for constructs that do not need the evaluation context. `Ok(None)`
/// means disabled.
fn step_expr(t: &Term, env: &Env) -> Result<Option<Effect>, String> {
    let b = |t: Term| Box::new(t);
    Ok(Some(match t {
        Term::Val(_) => return Ok(None),
        Term::Skip => Effect::new(NIL, "skip"),
        Term::Var(x) => {
            let s = env.l(S);
            match s.lookup(x) {
                Some(CreolDatum::Val(v)) => Effect::new(Term::Val(v.clone()), "var").read_local(S, s.clone()),
                _ => return Err(format!("unbound variable `{x}`")),
            }
        }
        Term::Let { x, bound, body } => match bound.as_ref() {
            Term::Val(v) => Effect::new(subst(body, v, x), "let"),
            _ => return Ok(congruence(step_expr(bound, env)?, |e| Term::Let { x: x.clone(), bound: b(e), body: body.clone() })),
        },
        Term::VarDecl { x, init } => match init.as_ref() {
            Term::Val(v) => {
                if env.l(S).lookup(x).is_some() {
                    return Err(format!("variable `{x}` already declared"));
                }
                env.write_store(Effect::new(NIL, "var-decl"), x, v.clone())
            }
            _ => return Ok(congruence(step_expr(init, env)?, |e| Term::VarDecl { x: x.clone(), init: b(e) })),
        },
        Term::Assign { x, value } => match value.as_ref() {
            Term::Val(v) => env.write_store(Effect::new(NIL, "assign"), x, v.clone()),
            _ => return Ok(congruence(step_expr(value, env)?, |e| Term::Assign { x: x.clone(), value: b(e) })),
        },
        Term::BinOp { op, lhs, rhs } => match (lhs.as_ref(), rhs.as_ref()) {
            (Term::Val(x), Term::Val(y)) => match op.eval(x, y) {
                Some(v) => Effect::new(Term::Val(v), "binop"),
                None => return Err(format!("`{x} {} {y}` is undefined", op.symbol())),
            },
            (Term::Val(_), _) => {
                return Ok(congruence(step_expr(rhs, env)?, |e| Term::BinOp { op: *op, lhs: lhs.clone(), rhs: b(e) }))
            }
            _ => return Ok(congruence(step_expr(lhs, env)?, |e| Term::BinOp { op: *op, lhs: b(e), rhs: rhs.clone() })),
        },
        Term::Not(e) => match e.as_ref() {
            Term::Val(Value::Bool(x)) => Effect::new(Term::boolean(!x), "not"),
            Term::Val(v) => return Err(format!("`!{v}` is undefined")),
            _ => return Ok(congruence(step_expr(e, env)?, |e| Term::Not(b(e)))),
        },
        Term::If { cond, then, otherwise } => match cond.as_ref() {
            Term::Val(Value::Bool(true)) => Effect::new((**then).clone(), "if-literal"),
            Term::Val(Value::Bool(false)) => Effect::new((**otherwise).clone(), "if-literal"),
            Term::Val(v) => return Err(format!("non-boolean condition `{v}`")),
            _ => {
                let Some(eff) = step_expr(cond, env)? else { return Ok(None) };
                eff.map_next(|c| match c {
                    Term::Val(Value::Bool(true)) => (**then).clone(),
                    Term::Val(Value::Bool(false)) => (**otherwise).clone(),
                    c => Term::If { cond: b(c), then: then.clone(), otherwise: otherwise.clone() },
                })
            }
        },
        Term::MethodDef { m, lambda } => {
            let md = env.l(MD);
            let next = md.updated(m, CreolDatum::Method((**lambda).clone()));
            Effect::new(NIL, "method-def").write_local(MD, md, next)
        }
        Term::App { f, arg } => match arg.as_ref() {
            Term::Val(v) => env.resolve(f, |l| Effect::new(subst(&l.body, v, &l.param), "method-call"))?,
            _ => return Ok(congruence(step_expr(arg, env)?, |e| Term::App { f: f.clone(), arg: b(e) })),
        },
        Term::Invoke { m, caller, future, arg } => match arg.as_ref() {
            Term::Val(v) => {
                let eff = env.resolve(m, |l| Effect::new(subst(&l.body, v, &l.param), "invoke"))?;
                let s = env.l(S);
                let t = s
                    .updated(CALLER, CreolDatum::Val(Value::Obj(caller.clone())))
                    .updated(LABEL, CreolDatum::Val(Value::Nat(*future)));
                eff.write_local(S, s, t)
            }
            _ => {
                return Ok(congruence(step_expr(arg, env)?, |e| Term::Invoke {
                    m: m.clone(),
                    caller: caller.clone(),
                    future: *future,
                    arg: b(e),
                }))
            }
        },
        Term::ClassDef { name, attrs, methods } => {
            let (a, c, un) = (env.g(A), env.g(C), env.g(UN));
            let a2 = a.updated(name, CreolDatum::Attrs(attrs.clone()));
            let c2 = c.updated(name, CreolDatum::Methods(methods.clone()));
            let mut eff = Effect::new(NIL, "class-def").write_global(A, a, a2).write_global(C, c, c2);
            if un.lookup(name).is_none() {
                let un2 = un.updated(name, CreolDatum::Nat(0));
                eff = eff.write_global(UN, un, un2);
            }
            eff
        }
        Term::Async(s) => {
            let pool = env.l(T);
            let next = threads_obj(added(threads(&pool), (**s).clone()));
            Effect::new(NIL, "async").write_local(T, pool, next)
        }
        Term::Call { m, arg, callee, future } => match (arg.as_ref(), callee.as_ref()) {
            (Term::Val(v), Term::Val(Value::Obj(target))) => {
                let pools = env.g(M);
                let Some(ms) = messages(&pools, target) else { return Err(format!("no object `{target}` to call")) };
                let fresh = env.g(FRESH);
                let n = nat_of(fresh.lookup(FUTURES));
                let msg = Message::Invoke { caller: env.o.clone(), n, m: m.clone(), arg: v.clone() };
                let pools2 = pools.updated(target.as_str(), CreolDatum::Messages(added(ms, msg)));
                let fresh2 = fresh.updated(FUTURES, CreolDatum::Nat(n + 1));
                let l = env.l(L);
                let l2 = l.updated(future, CreolDatum::Nat(n));
                Effect::new(NIL, "call").write_local(L, l, l2).write_global(M, pools, pools2).write_global(FRESH, fresh, fresh2)
            }
            (Term::Val(_), Term::Val(v)) => return Err(format!("callee `{v}` is not an object")),
            (Term::Val(_), _) => {
                return Ok(congruence(step_expr(callee, env)?, |e| Term::Call {
                    m: m.clone(),
                    arg: arg.clone(),
                    callee: b(e),
                    future: future.clone(),
                }))
            }
            _ => {
                return Ok(congruence(step_expr(arg, env)?, |e| Term::Call {
                    m: m.clone(),
                    arg: b(e),
                    callee: callee.clone(),
                    future: future.clone(),
                }))
            }
        },
        other => return Err(format!("`{other}` cannot be evaluated here")),
    }))
}

/// Rules applying to the redex of `Ev[r]`.
fn step_redex(ctx: &EvalContext, r: &Term, env: &Env, live: &BTreeSet<ObjectId>) -> Result<Option<Effect>, String> {
    Ok(Some(match r {
        Term::Seq(a, rest) => match a.as_ref() {
            Term::Val(Value::Nil) => Effect::new(ctx.plug((**rest).clone()), "seq-nil"),
            Term::Val(v) => return Err(format!("value `{v}` in statement position")),
            _ => unreachable!("decomposition leaves no reducible sequence head"),
        },
        Term::Yield => {
            let pool = env.l(T);
            let next = threads_obj(added(threads(&pool), ctx.plug(NIL)));
            Effect::new(NIL, "yield").write_local(T, pool, next)
        }
        Term::Return(e) => match e.as_ref() {
            Term::Val(v) => {
                let s = env.l(S);
                let Some(CreolDatum::Val(Value::Obj(caller))) = s.lookup(CALLER).cloned() else {
                    return Err("return outside a method invocation".into());
                };
                let Some(CreolDatum::Val(Value::Nat(n))) = s.lookup(LABEL).cloned() else {
                    return Err("return without a future label".into());
                };
                let pools = env.g(M);
                let Some(ms) = messages(&pools, &caller) else { return Err(format!("caller `{caller}` has no message pool")) };
                let pools2 = pools.updated(caller.as_str(), CreolDatum::Messages(added(ms, Message::Completion { n, value: v.clone() })));
                Effect::new(NIL, "return").read_local(S, s).write_global(M, pools, pools2)
            }
            _ => return Ok(congruence(step_expr(e, env)?, |e| ctx.plug(Term::Return(Box::new(e))))),
        },
        Term::New { x, class } => {
            let a = env.g(A);
            let Some(CreolDatum::Attrs(attrs)) = a.lookup(class).cloned() else { return Err(format!("class `{class}` is not defined")) };
            let fresh = env.g(FRESH);
            let mut k = nat_of(fresh.lookup(OBJECTS));
            let id = loop {
                let id = ObjectId(format!("o_{k}"));
                k += 1;
                if !live.contains(&id) {
                    break id;
                }
            };
            let un = env.g(UN);
            let init = local_signature()
                .bottom_snapshot()
                .with(CN, ComponentObject::from_pairs([(CLASS, CreolDatum::Class(class.clone()))]))
                .with(
                    V,
                    ComponentObject::from_pairs([
                        (VERSION, CreolDatum::Nat(nat_of(un.lookup(class)))),
                        (KNOWN, CreolDatum::Names(attrs.keys().cloned().collect())),
                    ]),
                );
            let decls: Vec<Term> = attrs.iter().map(|(a, v)| Term::var_decl(a, Term::Val(v.clone()))).collect();
            let body = if decls.is_empty() { NIL } else { Term::sequence(decls) };
            let pools = env.g(M);
            let pools2 = pools.updated(id.as_str(), CreolDatum::Messages(Vec::new()));
            let fresh2 = fresh.updated(OBJECTS, CreolDatum::Nat(k));
            let eff = Effect::new(ctx.plug(NIL), "new")
                .read_global(A, a)
                .read_global(C, env.g(C))
                .write_global(M, pools, pools2)
                .write_global(FRESH, fresh, fresh2);
            let mut eff = env.write_store(eff, x, Value::Obj(id.clone()));
            eff.spawn = Some(Spawn { id, init, body });
            eff
        }
        Term::Read { future, x } => {
            let l = env.l(L);
            let Some(CreolDatum::Nat(n)) = l.lookup(future).cloned() else { return Err(format!("future `{future}` is unbound")) };
            let pools = env.g(M);
            let Some(ms) = messages(&pools, env.o) else { return Err("object has no message pool".into()) };
            let Some(msg) = ms.iter().find(|m| matches!(m, Message::Completion { n: k, .. } if *k == n)).cloned() else {
                return Ok(None);
            };
            let Message::Completion { value, .. } = &msg else { unreachable!() };
            let next = ctx.plug(Term::assign(x, Term::Val(value.clone())));
            let pools2 = pools.updated(env.o.as_str(), CreolDatum::Messages(removed(ms.clone(), &msg)));
            Effect::new(next, "read").read_local(L, l).write_global(M, pools, pools2)
        }
        Term::Update { kind: UpdateKind::Class, delta } => {
            let mut eff = Effect::new(ctx.plug(NIL), "update");
            eff.jump = Some(Jump::new("E_c", delta.clone()));
            eff
        }
        Term::Update { .. } => return Err("only class upgrades are available".into()),
        _ => return Ok(congruence(step_expr(r, env)?, |e| ctx.plug(e))),
    }))
}

/// The concurrent language, optionally with the non-interleaving rule.
#[derive(Debug, Clone)]
pub struct Creol {
    sig: LabelSignature,
    inner: LabelSignature,
    registry: Registry<CreolDatum>,
    pub non_int: bool,
}

impl Default for Creol {
    fn default() -> Self {
        Creol::new(false)
    }
}

impl Creol {
    pub fn new(non_int: bool) -> Self {
        Creol { sig: signature(), inner: local_signature(), registry: registry(), non_int }
    }

    fn object_effects(&self, o: &ObjectId, s: &Term, snap: &Snap, live: &BTreeSet<ObjectId>) -> (Vec<Effect>, Option<String>) {
        let Some(local) = snap.get(E).and_then(|e| e.as_local()).and_then(|l| l.get(o)) else {
            return (Vec::new(), Some("no local state".into()));
        };
        let env = Env { o, local, snap };
        let mut out = Vec::new();
        let pools = env.g(M);
        for msg in distinct(&messages(&pools, o).unwrap_or_default()) {
            if let Message::Invoke { caller, n, m, arg } = &msg {
                let ms = messages(&pools, o).unwrap_or_default();
                let pools2 = pools.updated(o.as_str(), CreolDatum::Messages(removed(ms, &msg)));
                let call = Term::Invoke { m: m.clone(), caller: caller.clone(), future: *n, arg: Box::new(Term::Val(arg.clone())) };
                let next = Term::seq(Term::Async(Box::new(call)), s.clone());
                out.push(Effect::new(next, "deliver").write_global(M, pools.clone(), pools2));
            }
        }
        if s.is_nil() {
            let pool = env.l(T);
            let ts = threads(&pool);
            for t in distinct(&ts) {
                let next = threads_obj(removed(ts.clone(), &t));
                out.push(Effect::new(t, "resume").write_local(T, pool.clone(), next));
            }
            return (out, None);
        }
        let Some((ctx, r)) = decompose(s) else {
            return (out, Some(format!("value `{s}` in statement position")));
        };
        match step_redex(&ctx, &r, &env, live) {
            Ok(Some(e)) => {
                out.push(e);
                (out, None)
            }
            Ok(None) => (out, None),
            Err(e) => (out, Some(e)),
        }
    }

    fn lift(&self, o: &ObjectId, eff: Effect, sys: &SystemTerm) -> Transition<SystemTerm, CreolDatum> {
        let spawned: Vec<(ObjectId, Term)> = eff.spawn.iter().map(|sp| (sp.id.clone(), sp.body.clone())).collect();
        let next = sys.replace(o, eff.next, &spawned);
        let label = match eff.jump {
            Some(j) => Label::Jump(j),
            None => {
                let mut lm = LocalizedMorphism::localize(o.clone(), eff.local);
                if let Some(sp) = eff.spawn {
                    lm = lm.merge_all(&LocalizedMorphism::create(sp.id, sp.init)).expect("fresh identifier");
                }
                let mut m = eff.global;
                if !lm.entries().is_empty() {
                    m = m.local(E, lm);
                }
                Label::Step(m)
            }
        };
        Transition { label, next, rule: eff.rule, actor: Some(o.0.clone()) }
    }

    /// Combined steps: one purely local step from each of at least two
    /// objects.
    fn non_interleaved(&self, sys: &SystemTerm, per_object: &[(ObjectId, Vec<Effect>)]) -> Vec<Transition<SystemTerm, CreolDatum>> {
        const CAP: usize = 256;
        let groups: Vec<(&ObjectId, Vec<&Effect>)> = per_object
            .iter()
            .map(|(o, es)| (o, es.iter().filter(|e| e.purely_local()).collect::<Vec<_>>()))
            .filter(|(_, es)| !es.is_empty())
            .collect();
        if groups.len() < 2 {
            return Vec::new();
        }
        let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
        for (_, es) in &groups {
            combos = combos
                .into_iter()
                .flat_map(|c| (0..es.len()).map(move |i| [c.clone(), vec![i]].concat()))
                .take(CAP)
                .collect();
        }
        combos
            .into_iter()
            .filter_map(|combo| {
                let mut lm = LocalizedMorphism::identity();
                let mut next = sys.clone();
                let mut actors = Vec::new();
                for ((o, es), i) in groups.iter().zip(combo) {
                    let e = es[i];
                    lm = lm.merge((*o).clone(), e.local.clone()).ok()?;
                    next = next.replace(o, e.next.clone(), &[]);
                    actors.push(o.0.clone());
                }
                let label = if lm.entries().is_empty() { Morphism::identity() } else { Morphism::identity().local(E, lm) };
                Some(Transition { label: Label::Step(label), next, rule: "non-int", actor: Some(actors.join("+")) })
            })
            .collect()
    }
}

impl Language for Creol {
    type Term = SystemTerm;
    type Datum = CreolDatum;

    fn name(&self) -> &'static str {
        "creol"
    }

    fn signature(&self) -> &LabelSignature {
        &self.sig
    }

    fn registry(&self) -> &Registry<CreolDatum> {
        &self.registry
    }

    fn initial_snapshot(&self, sys: &SystemTerm) -> Snap {
        let mut locals = LocalSnapshot::default();
        let mut pools = Table::new();
        for (o, _) in sys.objects() {
            locals.insert(o.clone(), self.inner.bottom_snapshot());
            pools.insert(o.0.clone(), CreolDatum::Messages(Vec::new()));
        }
        self.sig.bottom_snapshot().with(E, ComponentObject::Local(locals)).with(M, ComponentObject::Map(pools))
    }

    fn step(&self, sys: &SystemTerm, snap: &Snap) -> StepResult<SystemTerm, CreolDatum> {
        let mut res = StepResult::default();
        let live: BTreeSet<ObjectId> = match snap.get(E).and_then(|e| e.as_local()) {
            Some(l) => l.ids().cloned().collect(),
            None => BTreeSet::new(),
        };
        let mut per_object = Vec::new();
        for (o, s) in sys.objects() {
            let (effects, stuck) = self.object_effects(o, s, snap, &live);
            if let Some(reason) = stuck {
                res.stuck.push(format!("{o}: {reason}"));
            }
            for e in &effects {
                res.transitions.push(self.lift(o, e.clone(), sys));
            }
            per_object.push((o.clone(), effects));
        }
        if self.non_int {
            res.transitions.extend(self.non_interleaved(sys, &per_object));
        }
        res
    }

    fn is_final(&self, sys: &SystemTerm) -> bool {
        sys.objects().iter().all(|(_, s)| s.is_nil())
    }

    fn after_jump(&self, snap: Snap) -> Snap {
        refresh_objects(snap)
    }

    fn parse_payload(&self, index: &str, json: &Json) -> Result<Obj, String> {
        let obj = json.as_object().ok_or_else(|| format!("payload for `{index}` must be a JSON object"))?;
        let mut out = Table::new();
        for (class, v) in obj {
            let inner = v.as_object().ok_or_else(|| format!("`{index}.{class}` must be a JSON object"))?;
            let d = match index {
                UC => {
                    let mut ms = BTreeMap::new();
                    for (m, def) in inner {
                        ms.insert(m.clone(), lambda_from_json(def).map_err(|e| format!("`{index}.{class}.{m}`: {e}"))?);
                    }
                    CreolDatum::Methods(ms)
                }
                UA => {
                    let mut attrs = BTreeMap::new();
                    for (a, v) in inner {
                        let v = Value::from_json(v).ok_or_else(|| format!("`{index}.{class}.{a}` is not a value"))?;
                        attrs.insert(a.clone(), v);
                    }
                    CreolDatum::Attrs(attrs)
                }
                UD => {
                    let mut req = BTreeMap::new();
                    for (d, n) in inner {
                        let n = n.as_u64().ok_or_else(|| format!("`{index}.{class}.{d}` must be a natural number"))?;
                        req.insert(d.clone(), n);
                    }
                    CreolDatum::Versions(req)
                }
                other => return Err(format!("`{other}` is not an upgrade component")),
            };
            out.insert(class.clone(), d);
        }
        Ok(ComponentObject::Map(out))
    }
}

fn lambda_from_json(j: &Json) -> Result<Lambda, String> {
    let param = j.get("param").and_then(Json::as_str).ok_or("missing `param`")?;
    let body = j.get("body").and_then(Json::as_str).ok_or("missing `body`")?;
    let body = parse_term(body).map_err(|e| e.to_string())?;
    Ok(Lambda::new(param, body))
}

/// Rejects constructs outside the concurrent language and duplicate object
/// names.
pub fn validate(sys: &SystemTerm) -> Result<(), String> {
    if !sys.ids_distinct() {
        return Err("object identifiers must be distinct".into());
    }
    for (o, s) in sys.objects() {
        for sub in s.subterms() {
            let bad = match sub {
                Term::FunDecl { .. } | Term::RecDecl { .. } | Term::RecProj { .. } | Term::Print(_) => {
                    Some(format!("`{sub}` is a sequential construct"))
                }
                Term::Update { kind, .. } if *kind != UpdateKind::Class => Some(format!("`{sub}` is a sequential upgrade")),
                _ => None,
            };
            if let Some(msg) = bad {
                return Err(format!("object {o}: {msg}"));
            }
        }
    }
    Ok(())
}

pub fn parse(src: &str) -> Result<ParsedSystem, ProgramError> {
    let p = parse_system(src)?;
    validate(&p.system).map_err(ProgramError::Invalid)?;
    Ok(p)
}

// ---------------------------------------------------------------------------
// Trace audits
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditReport {
    pub invokes: usize,
    pub completions: usize,
    pub returns: usize,
    /// Futures in the order they were issued.
    pub futures: Vec<u64>,
}

fn all_messages(snap: &Snap) -> Vec<Message> {
    pooled(&map_of(snap, M))
}

fn pooled(pools: &Table) -> Vec<Message> {
    let mut out = Vec::new();
    for d in pools.values() {
        if let CreolDatum::Messages(ms) = d {
            out.extend(ms.iter().cloned());
        }
    }
    out.sort();
    out
}

/// Multiset difference `a - b`.
fn minus(a: &[Message], b: &[Message]) -> Vec<Message> {
    let mut rest = b.to_vec();
    let mut out = Vec::new();
    for m in a {
        match rest.iter().position(|x| x == m) {
            Some(i) => {
                rest.remove(i);
            }
            None => out.push(m.clone()),
        }
    }
    out
}

/// Message conservation and future freshness, read off the pools before and
/// after every step: each invoke and each completion is appended exactly
/// once and consumed at most once, completions match executed returns, jumps
/// leave pools alone, and issued futures are pairwise distinct.
pub fn audit_messages(trace: &Trace<CreolDatum>) -> Result<AuditReport, String> {
    let mut appended: BTreeMap<Message, usize> = BTreeMap::new();
    let mut consumed: BTreeMap<Message, usize> = BTreeMap::new();
    let mut report = AuditReport::default();
    if !all_messages(&trace.initial).is_empty() {
        return Err("message pools are not empty initially".into());
    }
    for entry in &trace.entries {
        match entry {
            TraceEntry::Step { n, rule, label, .. } => {
                let (b, a) = match label.entry(M) {
                    Some(MorphismComponent::Pair(src, tgt)) => {
                        let empty = Table::new();
                        (pooled(src.as_map().unwrap_or(&empty)), pooled(tgt.as_map().unwrap_or(&empty)))
                    }
                    _ => (Vec::new(), Vec::new()),
                };
                for m in minus(&a, &b) {
                    let count = appended.entry(m.clone()).or_default();
                    *count += 1;
                    if *count > 1 {
                        return Err(format!("step {n}: {m:?} appended twice"));
                    }
                    match m {
                        Message::Invoke { n: f, .. } => {
                            if report.futures.contains(&f) {
                                return Err(format!("step {n}: future {f} issued twice"));
                            }
                            report.futures.push(f);
                            report.invokes += 1;
                        }
                        Message::Completion { .. } => report.completions += 1,
                    }
                }
                for m in minus(&b, &a) {
                    let count = consumed.entry(m.clone()).or_default();
                    *count += 1;
                    if *count > appended.get(&m).copied().unwrap_or(0) {
                        return Err(format!("step {n}: {m:?} consumed more often than appended"));
                    }
                }
                if *rule == "return" {
                    report.returns += 1;
                }
            }
            TraceEntry::Jump { n, before, after, .. } => {
                if all_messages(before) != all_messages(after) {
                    return Err(format!("jump {n} changed the message pools"));
                }
            }
            TraceEntry::Injection { .. } => {}
        }
    }
    if report.completions != report.returns {
        return Err(format!("{} completions for {} executed returns", report.completions, report.returns));
    }
    Ok(report)
}

/// Upgrade numbers never decrease along the trace.
pub fn upgrade_numbers_monotone(trace: &Trace<CreolDatum>) -> bool {
    let mut last = versions(&map_of(&trace.initial, UN));
    for entry in &trace.entries {
        let now = match entry {
            TraceEntry::Step { label, .. } => match label.entry(UN) {
                Some(MorphismComponent::Pair(_, tgt)) => versions(tgt.as_map().unwrap_or(&Table::new())),
                _ => continue,
            },
            TraceEntry::Jump { after, .. } => versions(&map_of(after, UN)),
            TraceEntry::Injection { .. } => continue,
        };
        if last.iter().any(|(c, n)| now.get(c).is_none_or(|m| m < n)) {
            return false;
        }
        last = now;
    }
    true
}

// ---------------------------------------------------------------------------
// Generated systems
// ---------------------------------------------------------------------------

/// A random closed system of `objects` objects issuing `calls` asynchronous
/// calls in total. Every object defines `m` locally; callers read each
/// result, sometimes after yielding.
pub fn random_system(rng: &mut impl Rng, objects: usize, calls: usize) -> SystemTerm {
    let objects = objects.max(2);
    let ids: Vec<ObjectId> = (1..=objects).map(|i| ObjectId(format!("p{i}"))).collect();
    let mut bodies: Vec<Vec<Term>> = ids
        .iter()
        .map(|_| {
            let k = rng.gen_range(0..5);
            let body = parse_term(&format!("return x + {k}")).expect("static method body");
            vec![Term::MethodDef { m: "m".into(), lambda: Box::new(Lambda::new("x", body)) }]
        })
        .collect();
    for c in 0..calls {
        let caller = rng.gen_range(0..objects);
        let mut callee = rng.gen_range(0..objects - 1);
        if callee >= caller {
            callee += 1;
        }
        let t = format!("t{c}");
        let arg = Term::binop(BinOp::Add, Term::nat(rng.gen_range(0..10)), Term::nat(c as u64));
        let body = &mut bodies[caller];
        body.push(Term::Call { m: "m".into(), arg: Box::new(arg), callee: Box::new(Term::Val(Value::Obj(ids[callee].clone()))), future: t.clone() });
        if rng.gen_bool(0.5) {
            body.push(Term::Yield);
        }
        if rng.gen_bool(0.3) {
            body.push(Term::Async(Box::new(Term::Skip)));
        }
        body.push(Term::Read { future: t, x: format!("r{c}") });
    }
    SystemTerm::from_objects(ids.into_iter().zip(bodies.into_iter().map(Term::sequence)).collect()).expect("at least two objects")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{explore, run, Scheduler, SchedulerKind, StateKind, UpgradeSchedule, DEFAULT_FUEL};
    use crate::encapsulation::LocalStep;
    use crate::uts::{check_no_sudden_jumps, delta};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sys(src: &str) -> SystemTerm {
        parse(src).unwrap().system
    }

    fn steps(src: &str) -> (SystemTerm, Snap, StepResult<SystemTerm, CreolDatum>) {
        let lang = Creol::default();
        let s = sys(src);
        let snap = lang.initial_snapshot(&s);
        let res = lang.step(&s, &snap);
        (s, snap, res)
    }

    fn methods(pairs: &[(&str, &str)]) -> CreolDatum {
        CreolDatum::Methods(pairs.iter().map(|(m, b)| (m.to_string(), Lambda::new("x", parse_term(b).unwrap()))).collect())
    }

    fn tab(pairs: Vec<(&str, CreolDatum)>) -> Table {
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    fn local_store(snap: &Snap, o: &str) -> Table {
        let l = snap.get(E).unwrap().as_local().unwrap().get(&o.into()).unwrap();
        map_of(l, S)
    }

    #[test]
    fn decomposition_examples() {
        let s = parse_term("yield; skip").unwrap();
        let (ctx, r) = decompose(&s).unwrap();
        assert_eq!(r, Term::Yield);
        assert_eq!(ctx.plug(NIL), parse_term("nil; skip").unwrap());
        let s = Term::seq(Term::seq(Term::Skip, Term::Yield), Term::Skip);
        let (ctx, r) = decompose(&s).unwrap();
        assert_eq!(r, Term::Skip);
        assert_eq!(ctx.plug(r), s);
        assert!(decompose(&NIL).is_none());
    }

    fn arb_stmt() -> impl Strategy<Value = Term> {
        let leaf = prop_oneof![
            Just(Term::Skip),
            Just(Term::Yield),
            Just(NIL),
            Just(Term::Read { future: "t".into(), x: "x".into() }),
            (0u64..5).prop_map(|n| Term::assign("x", Term::nat(n))),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| (inner.clone(), inner).prop_map(|(a, b)| Term::seq(a, b)))
    }

    proptest! {
        #[test]
        fn decomposition_is_unique(s in arb_stmt()) {
            let valid: Vec<_> = splits(&s).into_iter().filter(|(_, r)| is_redex(r)).collect();
            match decompose(&s) {
                None => prop_assert!(s.is_value()),
                Some((ctx, r)) => {
                    prop_assert_eq!(ctx.plug(r.clone()), s.clone());
                    prop_assert_eq!(valid.len(), 1);
                    prop_assert_eq!(&valid[0].1, &r);
                }
            }
        }
    }

    #[test]
    fn enc_lifts_skip() {
        let (_, _, res) = steps("object o { skip }");
        assert_eq!(res.transitions.len(), 1);
        assert_eq!(res.transitions[0].label, Label::Step(Morphism::identity()));
        assert_eq!(res.transitions[0].next, SystemTerm::obj("o", NIL));
    }

    #[test]
    fn interleaving_offers_both_objects() {
        let (_, _, res) = steps("o1[skip] || o2[skip]");
        let actors: Vec<_> = res.transitions.iter().map(|t| t.actor.clone().unwrap()).collect();
        assert_eq!(actors, ["o1", "o2"]);
    }

    #[test]
    fn call_issues_an_invoke() {
        let (_, snap, res) = steps("object o { call m(5) of p in t } || object p { skip }");
        let t = res.transitions.iter().find(|t| t.rule == "call").unwrap();
        assert_eq!(t.next, sys("object o { nil } || object p { skip }"));
        let Label::Step(m) = &t.label else { panic!() };
        let after = m.target(&signature(), &snap).unwrap();
        let invoke = Message::Invoke { caller: "o".into(), n: 0, m: "m".into(), arg: Value::Nat(5) };
        assert_eq!(map_of(&after, M).get("p"), Some(&CreolDatum::Messages(vec![invoke])));
        let l = after.get(E).unwrap().as_local().unwrap().get(&"o".into()).unwrap();
        assert_eq!(map_of(l, L).get("t"), Some(&CreolDatum::Nat(0)));
    }

    #[test]
    fn read_without_completion_is_blocked() {
        let lang = Creol::default();
        let s = sys("object o { read t into x }");
        let mut snap = lang.initial_snapshot(&s);
        let mut locals = snap.get(E).unwrap().as_local().unwrap().clone();
        let local = locals.get(&"o".into()).unwrap().clone().with(L, ComponentObject::from_pairs([("t", CreolDatum::Nat(0))]));
        locals.insert("o".into(), local);
        snap.set(E, ComponentObject::Local(locals));
        let res = lang.step(&s, &snap);
        assert!(res.transitions.is_empty());
        assert!(res.stuck.is_empty());
        let out = run(&lang, s, UpgradeSchedule::empty(), Scheduler::new(SchedulerKind::First, 0), 10).unwrap();
        assert_eq!(out.status.exit_code(), 3, "unbound future is stuck, not blocked");
    }

    #[test]
    fn update_fires_e_c() {
        let (_, _, res) = steps("object o { update{c: TEMP} }");
        assert_eq!(res.transitions[0].label, Label::Jump(Jump::new("E_c", delta(["TEMP"]))));
        assert_eq!(res.transitions[0].next, SystemTerm::obj("o", NIL));
    }

    #[test]
    fn dependency_check_examples() {
        let m = |p: &[(&str, u64)]| p.iter().map(|(k, v)| (k.to_string(), *v)).collect::<BTreeMap<_, _>>();
        assert!(dep_check(&m(&[]), &m(&[("X", 1)])));
        assert!(dep_check(&m(&[("C", 2)]), &m(&[("C", 3), ("D", 1)])));
        assert!(!dep_check(&m(&[("C", 2)]), &m(&[("D", 5)])));
    }

    #[test]
    fn e_c_examples() {
        let d = delta(["C"]);
        let c0 = tab(vec![("C", methods(&[("m", "return 1"), ("k", "return 2")]))]);
        let a0 = tab(vec![("C", CreolDatum::Attrs(BTreeMap::new()))]);
        let un0 = tab(vec![("C", CreolDatum::Nat(0))]);
        let e = Table::new();
        assert_eq!(e_c(&d, &c0, &a0, &un0, &e, &e, &e), [c0.clone(), a0.clone(), un0.clone(), e.clone(), e.clone(), e.clone()]);

        let uc = tab(vec![("C", methods(&[("m", "return 9")]))]);
        let [c, a, un, uc2, ua2, ud2] = e_c(&d, &c0, &a0, &un0, &uc, &e, &e);
        assert_eq!(c, tab(vec![("C", methods(&[("m", "return 9"), ("k", "return 2")]))]));
        assert_eq!(a, a0);
        assert_eq!(un, tab(vec![("C", CreolDatum::Nat(1))]));
        assert!(uc2.is_empty() && ua2.is_empty() && ud2.is_empty());

        let ud = tab(vec![("C", CreolDatum::Versions([("D".to_string(), 2)].into()))]);
        let un1 = tab(vec![("D", CreolDatum::Nat(1))]);
        let out = e_c(&d, &c0, &a0, &un1, &uc, &e, &ud);
        assert_eq!(out, [c0, a0, un1, uc, e, ud]);
    }

    #[test]
    fn e_c_has_no_sudden_jumps() {
        let samples = (0..20).map(|i| {
            let c = ComponentObject::Map(tab(vec![("C", methods(&[("m", "return 1")]))]));
            let un = ComponentObject::Map(tab(vec![("C", CreolDatum::Nat(i))]));
            (delta(["C", "D"]), vec![c, ComponentObject::empty_map(), un])
        });
        assert!(check_no_sudden_jumps(&e_c_spec(), samples).passed());
    }

    fn temp_system() -> SystemTerm {
        sys("object main { class TEMP { var temp := 0; setTemp(t) { temp := t; return nil } getTemp(u) { return temp } }; \
             s := new TEMP; call setTemp(5) of s in f; read f into r; update{c: TEMP} }")
    }

    #[test]
    fn refresh_adds_new_attributes() {
        let lang = Creol::default();
        let schedule = UpgradeSchedule::empty()
            .with(crate::engine::Trigger::Immediate, UA, lang.parse_payload(UA, &serde_json::json!({"TEMP": {"temp": 0, "log": 0}})).unwrap())
            .with(crate::engine::Trigger::Immediate, UC, lang.parse_payload(UC, &serde_json::json!({"TEMP": {"avg": {"param": "u", "body": "return log"}}})).unwrap());
        let out = run(&lang, temp_system(), schedule, Scheduler::new(SchedulerKind::First, 0), DEFAULT_FUEL).unwrap();
        assert_eq!(out.status.exit_code(), 0);
        let store = local_store(&out.snapshot, "o_0");
        assert_eq!(store.get("log"), Some(&CreolDatum::Val(Value::Nat(0))));
        assert_eq!(store.get("temp"), Some(&CreolDatum::Val(Value::Nat(5))));
        assert_eq!(map_of(&out.snapshot, UN).get("TEMP"), Some(&CreolDatum::Nat(1)));
    }

    #[test]
    fn refresh_without_version_change_is_identity() {
        let lang = Creol::default();
        let out = run(&lang, temp_system(), UpgradeSchedule::empty(), Scheduler::new(SchedulerKind::First, 0), DEFAULT_FUEL).unwrap();
        assert_eq!(refresh_objects(out.snapshot.clone()), out.snapshot);
    }

    #[test]
    fn parallel_skips_form_a_diamond() {
        let lang = Creol::default();
        let s = sys("o1[skip] || o2[skip]");
        let g = explore(&lang, s.clone(), lang.initial_snapshot(&s), 10, 100).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.of_kind(StateKind::Terminated).len(), 1);
    }

    #[test]
    fn call_protocol_is_confluent() {
        let lang = Creol::default();
        let s = sys("object a { call m(5) of b in t; read t into x } || object b { m(y) { return y + 1 } }");
        let g = explore(&lang, s.clone(), lang.initial_snapshot(&s), 100, 10_000).unwrap();
        let done = g.of_kind(StateKind::Terminated);
        assert_eq!(done.len(), 1);
        assert_eq!(g.halted(), done);
        let (_, snap) = &g.states[done[0]];
        assert_eq!(local_store(snap, "a").get("x"), Some(&CreolDatum::Val(Value::Nat(6))));
    }

    #[test]
    fn non_int_combines_local_steps() {
        let lang = Creol::new(true);
        let s = sys("o1[x := 1] || o2[x := 2]");
        let res = lang.step(&s, &lang.initial_snapshot(&s));
        let combined = res.transitions.iter().find(|t| t.rule == "non-int").unwrap();
        assert_eq!(combined.next, sys("o1[nil] || o2[nil]"));
        let Label::Step(m) = &combined.label else { panic!() };
        let Some(MorphismComponent::Local(lm)) = m.entry(E) else { panic!() };
        assert_eq!(lm.entries().len(), 2);
    }

    fn random_runs(n: u64) -> Vec<crate::engine::RunOutcome<SystemTerm, CreolDatum>> {
        let lang = Creol::default();
        (0..n)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let objects = rng.gen_range(2..=4);
                let calls = rng.gen_range(1..=3);
                let s = random_system(&mut rng, objects, calls);
                run(&lang, s, UpgradeSchedule::empty(), Scheduler::new(SchedulerKind::Seeded, seed), DEFAULT_FUEL).unwrap()
            })
            .collect()
    }

    #[test]
    fn random_runs_pass_the_audits() {
        for out in random_runs(20) {
            let report = audit_messages(&out.trace).unwrap();
            assert!(report.invokes >= report.completions);
            assert!(upgrade_numbers_monotone(&out.trace));
        }
    }

    #[test]
    fn localized_steps_frame_other_objects() {
        let sig = signature();
        for out in random_runs(10) {
            let mut snap = out.trace.initial.clone();
            for entry in &out.trace.entries {
                let TraceEntry::Step { label, .. } = entry else { continue };
                let after = label.target(&sig, &snap).unwrap();
                let touched: BTreeSet<ObjectId> = match label.entry(E) {
                    Some(MorphismComponent::Local(lm)) => lm.entries().keys().cloned().collect(),
                    _ => BTreeSet::new(),
                };
                let (b, a) = (snap.get(E).unwrap().as_local().unwrap(), after.get(E).unwrap().as_local().unwrap());
                for (o, local) in b.iter() {
                    if !touched.contains(o) {
                        assert_eq!(a.get(o), Some(local));
                    }
                }
                if let Some(MorphismComponent::Local(lm)) = label.entry(E) {
                    assert!(lm.entries().values().filter(|s| matches!(s, LocalStep::Step(_))).count() <= 1);
                }
                snap = after;
            }
        }
    }

    #[test]
    fn parse_examples() {
        assert_eq!(sys("object o { skip }"), SystemTerm::obj("o", Term::Skip));
        assert_eq!(sys("o1[skip] || o2[skip]"), SystemTerm::par(SystemTerm::obj("o1", Term::Skip), SystemTerm::obj("o2", Term::Skip)));
        assert_eq!(parse_term("update{c: TEMP}").unwrap(), Term::Update { kind: UpdateKind::Class, delta: delta(["TEMP"]) });
        assert!(parse("object o { print 1 }").is_err());
        assert!(parse("o[skip] || o[skip]").is_err());
    }
}
