//! A monolithic interpreter for the sequential language: one mutable heap
//! for variables, functions and records, rewritten in place. It shares only
//! the syntax and substitution with the modular interpreter and is used for
//! differential testing.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::syntax::{subst, Term, UpdateKind, Value};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum HeapEntry {
    Val(Value),
    Fun { param: String, body: Term },
    Rec(Vec<(String, Term)>),
}

impl HeapEntry {
    fn kind(&self) -> UpdateKind {
        match self {
            HeapEntry::Val(_) => UpdateKind::Var,
            HeapEntry::Fun { .. } => UpdateKind::Fun,
            HeapEntry::Rec(_) => UpdateKind::Rec,
        }
    }
}

pub type Heap = BTreeMap<String, HeapEntry>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("identifier `{0}` is declared as more than one kind of entity")]
    NamespaceCollision(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleOutcome {
    Value(Value),
    Stuck(String),
    OutOfFuel,
}

/// Every term visited, with the heap after reaching it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleRun {
    pub terms: Vec<Term>,
    pub heaps: Vec<Heap>,
    pub printed: Vec<Value>,
    pub outcome: OracleOutcome,
    /// Update information left when the run ended.
    pub upd: Heap,
}

/// Declared identifiers must name a single kind of entity.
pub fn check_namespaces(t: &Term) -> Result<(), OracleError> {
    let mut vars = BTreeSet::new();
    let mut funs = BTreeSet::new();
    let mut recs = BTreeSet::new();
    for sub in t.subterms() {
        match sub {
            Term::VarDecl { x, .. } | Term::Let { x, .. } => {
                vars.insert(x.clone());
            }
            Term::FunDecl { f, .. } => {
                funs.insert(f.clone());
            }
            Term::RecDecl { r, .. } => {
                recs.insert(r.clone());
            }
            _ => {}
        }
    }
    if let Some(x) = vars.intersection(&funs).chain(vars.intersection(&recs)).chain(funs.intersection(&recs)).next() {
        return Err(OracleError::NamespaceCollision(x.clone()));
    }
    Ok(())
}

struct Machine {
    heap: Heap,
    upd: Heap,
    printed: Vec<Value>,
    consume_all: bool,
}

enum Reduced {
    To(Term),
    Done,
}

impl Machine {
    fn reduce(&mut self, t: &Term) -> Result<Reduced, String> {
        use Reduced::{Done, To};
        let bx = Box::new;
        Ok(match t {
            Term::Val(_) => Done,
            Term::Skip => To(Term::Val(Value::Nil)),
            Term::Seq(a, b) => {
                if a.is_nil() {
                    To((**b).clone())
                } else if a.is_value() {
                    return Err("value in statement position".into());
                } else {
                    match self.reduce(a)? {
                        To(a2) => To(Term::Seq(bx(a2), b.clone())),
                        Done => Done,
                    }
                }
            }
            Term::Var(x) => match self.heap.get(x) {
                Some(HeapEntry::Val(v)) => To(Term::Val(v.clone())),
                _ => return Err(format!("unbound `{x}`")),
            },
            Term::Let { x, bound, body } => match bound.as_value() {
                Some(v) => To(subst(body, v, x)),
                None => self.inside(bound, |e| Term::Let { x: x.clone(), bound: bx(e), body: body.clone() })?,
            },
            Term::VarDecl { x, init } => match init.as_value() {
                Some(v) => {
                    if self.heap.contains_key(x) {
                        return Err(format!("`{x}` redeclared"));
                    }
                    self.heap.insert(x.clone(), HeapEntry::Val(v.clone()));
                    To(Term::Val(Value::Nil))
                }
                None => self.inside(init, |e| Term::VarDecl { x: x.clone(), init: bx(e) })?,
            },
            Term::Assign { x, value } => match value.as_value() {
                Some(v) => {
                    if !matches!(self.heap.get(x), Some(HeapEntry::Val(_))) {
                        return Err(format!("`{x}` undeclared"));
                    }
                    self.heap.insert(x.clone(), HeapEntry::Val(v.clone()));
                    To(Term::Val(Value::Nil))
                }
                None => self.inside(value, |e| Term::Assign { x: x.clone(), value: bx(e) })?,
            },
            Term::FunDecl { f, lambda } => {
                self.heap.insert(f.clone(), HeapEntry::Fun { param: lambda.param.clone(), body: lambda.body.clone() });
                To(Term::Val(Value::Nil))
            }
            Term::App { f, arg } => match arg.as_value() {
                Some(v) => match self.heap.get(f) {
                    Some(HeapEntry::Fun { param, body }) => To(subst(body, v, param)),
                    _ => return Err(format!("`{f}` is not a function")),
                },
                None => self.inside(arg, |e| Term::App { f: f.clone(), arg: bx(e) })?,
            },
            Term::RecDecl { r, fields } => {
                if self.heap.contains_key(r) {
                    return Err(format!("`{r}` redeclared"));
                }
                self.heap.insert(r.clone(), HeapEntry::Rec(fields.clone()));
                To(Term::Val(Value::Nil))
            }
            Term::RecProj { r, l } => match self.heap.get(r) {
                Some(HeapEntry::Rec(fs)) => match fs.iter().find(|(k, _)| k == l) {
                    Some((_, e)) => To(e.clone()),
                    None => return Err(format!("no label `{l}`")),
                },
                _ => return Err(format!("`{r}` is not a record")),
            },
            Term::If { cond, then, otherwise } => match cond.as_value() {
                Some(Value::Bool(true)) => To((**then).clone()),
                Some(Value::Bool(false)) => To((**otherwise).clone()),
                Some(_) => return Err("non-boolean condition".into()),
                None => match self.reduce(cond)? {
                    To(Term::Val(Value::Bool(true))) => To((**then).clone()),
                    To(Term::Val(Value::Bool(false))) => To((**otherwise).clone()),
                    To(c) => To(Term::If { cond: bx(c), then: then.clone(), otherwise: otherwise.clone() }),
                    Done => Done,
                },
            },
            Term::BinOp { op, lhs, rhs } => match (lhs.as_value(), rhs.as_value()) {
                (Some(a), Some(b)) => match op.eval(a, b) {
                    Some(v) => To(Term::Val(v)),
                    None => return Err("undefined operation".into()),
                },
                (Some(_), None) => self.inside(rhs, |e| Term::BinOp { op: *op, lhs: lhs.clone(), rhs: bx(e) })?,
                _ => self.inside(lhs, |e| Term::BinOp { op: *op, lhs: bx(e), rhs: rhs.clone() })?,
            },
            Term::Not(e) => match e.as_value() {
                Some(Value::Bool(b)) => To(Term::Val(Value::Bool(!b))),
                Some(_) => return Err("negation of a non-boolean".into()),
                None => self.inside(e, |e| Term::Not(bx(e)))?,
            },
            Term::Print(e) => match e.as_value() {
                Some(v) => {
                    self.printed.push(v.clone());
                    To(Term::Val(Value::Nil))
                }
                None => self.inside(e, |e| Term::Print(bx(e)))?,
            },
            Term::Update { kind, delta } => {
                self.update(*kind, delta);
                To(Term::Val(Value::Nil))
            }
            other => return Err(format!("unsupported `{other}`")),
        })
    }

    fn inside(&mut self, sub: &Term, wrap: impl FnOnce(Term) -> Term) -> Result<Reduced, String> {
        Ok(match self.reduce(sub)? {
            Reduced::To(t) => Reduced::To(wrap(t)),
            Reduced::Done => Reduced::Done,
        })
    }

    // Heap update restricted to the identifiers of `delta` carrying update
    // information of the matching kind.
    fn update(&mut self, kind: UpdateKind, delta: &BTreeSet<String>) {
        let hits: Vec<String> = self
            .upd
            .iter()
            .filter(|(k, e)| delta.contains(*k) && e.kind() == kind)
            .map(|(k, _)| k.clone())
            .collect();
        if hits.is_empty() {
            return;
        }
        for k in &hits {
            self.heap.insert(k.clone(), self.upd[k].clone());
        }
        if self.consume_all {
            self.upd.retain(|_, e| e.kind() != kind);
        } else {
            self.upd.retain(|k, e| !(delta.contains(k) && e.kind() == kind));
        }
    }
}

/// Runs `t` on an empty heap with update information `upd`.
pub fn oracle_run(t: &Term, upd: Heap, consume_all: bool, fuel: usize) -> Result<OracleRun, OracleError> {
    check_namespaces(t)?;
    let mut m = Machine { heap: Heap::new(), upd, printed: Vec::new(), consume_all };
    let mut terms = vec![t.clone()];
    let mut heaps = vec![m.heap.clone()];
    let mut current = t.clone();
    let outcome = loop {
        if terms.len() > fuel {
            break OracleOutcome::OutOfFuel;
        }
        match m.reduce(&current) {
            Ok(Reduced::To(next)) => {
                current = next;
                terms.push(current.clone());
                heaps.push(m.heap.clone());
            }
            Ok(Reduced::Done) => break OracleOutcome::Value(current.as_value().cloned().unwrap_or(Value::Nil)),
            Err(e) => break OracleOutcome::Stuck(e),
        }
    };
    Ok(OracleRun { terms, heaps, printed: m.printed, outcome, upd: m.upd })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_term;

    #[test]
    fn declaration_fills_the_heap() {
        let run = oracle_run(&parse_term("var x := 7").unwrap(), Heap::new(), false, 100).unwrap();
        assert_eq!(run.heaps.last().unwrap().get("x"), Some(&HeapEntry::Val(Value::Nat(7))));
        assert_eq!(run.outcome, OracleOutcome::Value(Value::Nil));
    }

    #[test]
    fn collisions_are_rejected_at_load() {
        let t = parse_term("var f := 1; fun f(x) { x }").unwrap();
        assert_eq!(oracle_run(&t, Heap::new(), false, 100).unwrap_err(), OracleError::NamespaceCollision("f".into()));
    }

    #[test]
    fn update_rebinds_and_consumes() {
        let upd: Heap = [("x".to_string(), HeapEntry::Val(Value::Nat(9))), ("y".to_string(), HeapEntry::Val(Value::Nat(1)))].into();
        let t = parse_term("var x := 1; update{v: x}; x").unwrap();
        let run = oracle_run(&t, upd.clone(), false, 100).unwrap();
        assert_eq!(run.outcome, OracleOutcome::Value(Value::Nat(9)));
        assert_eq!(run.upd.len(), 1);
        let all = oracle_run(&t, upd, true, 100).unwrap();
        assert!(all.upd.is_empty());
    }
}
