use std::collections::BTreeMap;

use thiserror::Error;

use super::{Label, Language};
use crate::label::DataSnapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    /// Has at least one enabled transition.
    Internal,
    Terminated,
    Blocked,
    Stuck,
}

#[derive(Debug, Clone)]
pub struct Edge<V> {
    pub from: usize,
    pub to: usize,
    pub label: Label<V>,
    pub rule: &'static str,
    pub actor: Option<String>,
}

/// Reachable configurations and every transition between them.
#[derive(Debug, Clone)]
pub struct StateGraph<T, V> {
    pub states: Vec<(T, DataSnapshot<V>)>,
    pub kinds: Vec<StateKind>,
    pub edges: Vec<Edge<V>>,
}

impl<T, V> StateGraph<T, V> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Indexes of states with no enabled transition.
    pub fn halted(&self) -> Vec<usize> {
        (0..self.states.len()).filter(|i| self.kinds[*i] != StateKind::Internal).collect()
    }

    pub fn of_kind(&self, kind: StateKind) -> Vec<usize> {
        (0..self.states.len()).filter(|i| self.kinds[*i] == kind).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExploreError {
    #[error("depth bound {depth} reached with {frontier} states still unexplored")]
    DepthExceeded { depth: usize, frontier: usize },
    #[error("state bound {0} exceeded")]
    TooManyStates(usize),
}

/// Breadth-first enumeration of every scheduler choice from `term` in
/// `snapshot`. Jumps are only offered after a first step, as in a run.
pub fn explore<L: Language>(
    lang: &L,
    term: L::Term,
    snapshot: DataSnapshot<L::Datum>,
    depth: usize,
    max_states: usize,
) -> Result<StateGraph<L::Term, L::Datum>, ExploreError> {
    let sig = lang.signature();
    type Key<T, V> = (T, DataSnapshot<V>, bool);
    let mut index: BTreeMap<Key<L::Term, L::Datum>, usize> = BTreeMap::new();
    let mut graph = StateGraph { states: Vec::new(), kinds: Vec::new(), edges: Vec::new() };
    let mut keys: Vec<Key<L::Term, L::Datum>> = Vec::new();

    let root = (term, snapshot, false);
    index.insert(root.clone(), 0);
    keys.push(root.clone());
    graph.states.push((root.0, root.1));
    graph.kinds.push(StateKind::Internal);

    let mut frontier = vec![0usize];
    let mut level = 0;
    while !frontier.is_empty() {
        if level == depth {
            return Err(ExploreError::DepthExceeded { depth, frontier: frontier.len() });
        }
        let mut next_frontier = Vec::new();
        for id in frontier {
            let (term, snap, started) = keys[id].clone();
            let res = lang.step(&term, &snap);
            let mut any = false;
            for t in res.transitions {
                let target = match &t.label {
                    Label::Step(m) => match m.target(sig, &snap) {
                        Ok(s) => (t.next.clone(), s, true),
                        Err(_) => continue,
                    },
                    Label::Jump(j) => {
                        if !started {
                            continue;
                        }
                        let Ok(e) = lang.registry().extend(j, sig) else { continue };
                        (t.next.clone(), lang.after_jump(e.apply(&snap)), true)
                    }
                };
                any = true;
                let to = match index.get(&target) {
                    Some(&i) => i,
                    None => {
                        let i = keys.len();
                        if i >= max_states {
                            return Err(ExploreError::TooManyStates(max_states));
                        }
                        index.insert(target.clone(), i);
                        graph.states.push((target.0.clone(), target.1.clone()));
                        graph.kinds.push(StateKind::Internal);
                        keys.push(target);
                        next_frontier.push(i);
                        i
                    }
                };
                graph.edges.push(Edge { from: id, to, label: t.label, rule: t.rule, actor: t.actor });
            }
            if !any {
                graph.kinds[id] = if lang.is_final(&term) {
                    StateKind::Terminated
                } else if !res.stuck.is_empty() {
                    StateKind::Stuck
                } else {
                    StateKind::Blocked
                };
            }
        }
        frontier = next_frontier;
        level += 1;
    }
    Ok(graph)
}
