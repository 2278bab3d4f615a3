use serde_json::{json, Value as Json};
use thiserror::Error;

use super::Language;
use crate::label::{ComponentObject, Datum, DataSnapshot, LabelError, Morphism};
use crate::uts::{Jump, UtsError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEntry<V> {
    Step {
        n: u64,
        rule: String,
        actor: Option<String>,
        before: String,
        after: String,
        label: Morphism<V>,
    },
    Jump {
        n: u64,
        actor: Option<String>,
        term_before: String,
        term_after: String,
        jump: Jump,
        before: DataSnapshot<V>,
        after: DataSnapshot<V>,
    },
    Injection {
        n: u64,
        index: String,
        payload: ComponentObject<V>,
    },
}

impl<V: Datum> TraceEntry<V> {
    pub fn to_json(&self) -> Json {
        match self {
            TraceEntry::Step { n, rule, actor, before, after, label } => json!({
                "kind": "step", "n": n, "rule": rule, "actor": actor,
                "before": before, "after": after, "label": label.to_json(),
            }),
            TraceEntry::Jump { n, actor, term_before, term_after, jump, before, after } => json!({
                "kind": "jump", "n": n, "actor": actor, "term_before": term_before, "term_after": term_after,
                "jump": {
                    "name": jump.name,
                    "delta": jump.delta.iter().collect::<Vec<_>>(),
                    "before": before.to_json(),
                    "after": after.to_json(),
                },
            }),
            TraceEntry::Injection { n, index, payload } => json!({
                "kind": "injection", "n": n, "index": index, "payload": payload.to_json(),
            }),
        }
    }

    pub fn pretty(&self) -> String {
        match self {
            TraceEntry::Step { n, rule, actor, before, after, label } => {
                let who = actor.as_deref().map(|a| format!(" {a}:")).unwrap_or_default();
                format!("[{n}]{who} {before}  --{}-->  {after}   ({rule})", label.pretty())
            }
            TraceEntry::Jump { n, jump, term_before, term_after, .. } => {
                format!("[{n}] {term_before}  =={jump}==>  {term_after}")
            }
            TraceEntry::Injection { n, index, payload } => format!("[{n}] inject {index} := {}", payload.to_json()),
        }
    }
}

/// Everything that happened in one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace<V> {
    pub initial_term: String,
    pub initial: DataSnapshot<V>,
    pub entries: Vec<TraceEntry<V>>,
}

impl<V: Datum> Trace<V> {
    pub fn new(initial_term: String, initial: DataSnapshot<V>) -> Self {
        Trace { initial_term, initial, entries: Vec::new() }
    }

    pub fn push(&mut self, e: TraceEntry<V>) {
        self.entries.push(e);
    }

    pub fn steps(&self) -> impl Iterator<Item = &TraceEntry<V>> {
        self.entries.iter().filter(|e| !matches!(e, TraceEntry::Injection { .. }))
    }

    /// Terms visited, starting with the initial one.
    pub fn terms(&self) -> Vec<String> {
        let mut out = vec![self.initial_term.clone()];
        for e in &self.entries {
            match e {
                TraceEntry::Step { after, .. } => out.push(after.clone()),
                TraceEntry::Jump { term_after, .. } => out.push(term_after.clone()),
                TraceEntry::Injection { .. } => {}
            }
        }
        out
    }

    /// Concatenation of everything emitted on the write-only component.
    pub fn emitted(&self, index: &str) -> Vec<V> {
        self.entries
            .iter()
            .filter_map(|e| match e {
                TraceEntry::Step { label, .. } => Some(label.emitted(index).to_vec()),
                _ => None,
            })
            .flatten()
            .collect()
    }

    /// JSON Lines: a header line, then one line per entry.
    pub fn to_jsonl(&self) -> String {
        let mut out = json!({"kind": "initial", "term": self.initial_term, "snapshot": self.initial.to_json()}).to_string();
        out.push('\n');
        for e in &self.entries {
            out.push_str(&e.to_json().to_string());
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("entry {entry}: label does not chain: {source}")]
    Chain { entry: usize, source: LabelError },
    #[error("entry {entry}: {source}")]
    Jump { entry: usize, source: UtsError },
    #[error("entry {0}: recorded jump target differs from the recomputed one")]
    JumpMismatch(usize),
    #[error("entry {0}: recorded jump source differs from the replayed snapshot")]
    JumpSource(usize),
}

/// Re-applies every entry to the initial snapshot, recomputing jump
/// targets from the registry, and returns the final snapshot.
pub fn replay<L: Language>(lang: &L, trace: &Trace<L::Datum>) -> Result<DataSnapshot<L::Datum>, ReplayError> {
    let sig = lang.signature();
    let mut snap = trace.initial.clone();
    for (i, e) in trace.entries.iter().enumerate() {
        match e {
            TraceEntry::Step { label, .. } => {
                snap = label.target(sig, &snap).map_err(|source| ReplayError::Chain { entry: i, source })?;
            }
            TraceEntry::Jump { jump, before, after, .. } => {
                if *before != snap {
                    return Err(ReplayError::JumpSource(i));
                }
                let ext = lang.registry().extend(jump, sig).map_err(|source| ReplayError::Jump { entry: i, source })?;
                let recomputed = lang.after_jump(ext.apply(&snap));
                if recomputed != *after {
                    return Err(ReplayError::JumpMismatch(i));
                }
                snap = recomputed;
            }
            TraceEntry::Injection { index, payload, .. } => snap.set(index.clone(), payload.clone()),
        }
    }
    Ok(snap)
}
