//! Generic driver for upgrade transition systems.
//!
//! A [`Language`] supplies its signature, endofunctor registry and a step
//! function. A [`Session`] owns one configuration and advances it one
//! transition at a time: due upgrade injections are applied, enabled
//! transitions are filtered by chaining, the scheduler picks one, and the
//! result is appended to the [`Trace`].

mod explore;
mod modularity;
pub mod oracle;
mod schedule;
mod trace;

use std::fmt;
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value as Json;
use thiserror::Error;

use crate::label::{ComponentObject, Datum, DataSnapshot, LabelError, LabelSignature, Morphism, Namespace};
use crate::uts::{Jump, Registry, UtsError};

pub use explore::{explore, ExploreError, StateGraph, StateKind};
pub use modularity::{modularity_check, ModularityWitness, WritesFresh};
pub use schedule::{Injection, Trigger, UpgradeSchedule};
pub use trace::{replay, ReplayError, Trace, TraceEntry};

pub const DEFAULT_FUEL: u64 = 100_000;

/// A transition label: a step morphism or a jump.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Label<V> {
    Step(Morphism<V>),
    Jump(Jump),
}

impl<V: Datum> Label<V> {
    pub fn is_jump(&self) -> bool {
        matches!(self, Label::Jump(_))
    }

    pub fn pretty(&self) -> String {
        match self {
            Label::Step(m) => m.pretty(),
            Label::Jump(j) => j.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition<T, V> {
    pub label: Label<V>,
    pub next: T,
    /// Name of the axiom at the root of the derivation.
    pub rule: &'static str,
    /// Object performing the step, for concurrent languages.
    pub actor: Option<String>,
}

/// Everything a language offers at one configuration.
#[derive(Debug, Clone)]
pub struct StepResult<T, V> {
    pub transitions: Vec<Transition<T, V>>,
    /// Reasons for stuckness, one per stuck actor.
    pub stuck: Vec<String>,
}

impl<T, V> Default for StepResult<T, V> {
    fn default() -> Self {
        StepResult { transitions: Vec::new(), stuck: Vec::new() }
    }
}

pub trait Language {
    type Term: Clone + Eq + Ord + Hash + fmt::Display + fmt::Debug;
    type Datum: Datum;

    fn name(&self) -> &'static str;

    /// Data and upgrade components.
    fn signature(&self) -> &LabelSignature;

    fn registry(&self) -> &Registry<Self::Datum>;

    fn initial_snapshot(&self, term: &Self::Term) -> DataSnapshot<Self::Datum>;

    fn step(&self, term: &Self::Term, snap: &DataSnapshot<Self::Datum>) -> StepResult<Self::Term, Self::Datum>;

    /// Terminated configurations.
    fn is_final(&self, term: &Self::Term) -> bool;

    /// Post-processing of a jump target (object refresh in the concurrent
    /// language).
    fn after_jump(&self, snap: DataSnapshot<Self::Datum>) -> DataSnapshot<Self::Datum> {
        snap
    }

    /// Decodes an upgrade payload for `index`.
    fn parse_payload(&self, index: &str, json: &Json) -> Result<ComponentObject<Self::Datum>, String>;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Uts(#[from] UtsError),
    #[error("invalid injection: {0}")]
    InvalidInjection(String),
    #[error("no enabled transition with number {0}")]
    NoSuchTransition(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Terminated,
    Blocked,
    Stuck(Vec<String>),
    FuelExhausted,
    /// Only jumps were enabled before any step.
    JumpBeforeFirstStep,
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Terminated => 0,
            Status::Blocked => 2,
            Status::Stuck(_) | Status::JumpBeforeFirstStep => 3,
            Status::FuelExhausted => 4,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Terminated => "terminated",
            Status::Blocked => "blocked",
            Status::Stuck(_) => "stuck",
            Status::FuelExhausted => "fuel-exhausted",
            Status::JumpBeforeFirstStep => "jump-before-first-step",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SchedulerKind {
    /// Uniform choice from a seeded ChaCha stream.
    #[default]
    Seeded,
    /// Cycles over actors in name order.
    RoundRobin,
    /// Always the first enabled transition.
    First,
}

#[derive(Debug, Clone)]
pub enum Scheduler {
    Seeded(Box<ChaCha8Rng>),
    RoundRobin { last: Option<String> },
    First,
}

impl Scheduler {
    pub fn new(kind: SchedulerKind, seed: u64) -> Self {
        match kind {
            SchedulerKind::Seeded => Scheduler::Seeded(Box::new(ChaCha8Rng::seed_from_u64(seed))),
            SchedulerKind::RoundRobin => Scheduler::RoundRobin { last: None },
            SchedulerKind::First => Scheduler::First,
        }
    }

    pub fn choose<T, V>(&mut self, enabled: &[Transition<T, V>]) -> usize {
        match self {
            Scheduler::Seeded(rng) => rng.gen_range(0..enabled.len()),
            Scheduler::First => 0,
            Scheduler::RoundRobin { last } => {
                let after = enabled
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| last.is_none() || t.actor > *last)
                    .min_by(|(_, a), (_, b)| a.actor.cmp(&b.actor))
                    .map(|(i, _)| i);
                let pick = after.unwrap_or_else(|| {
                    enabled.iter().enumerate().min_by(|(_, a), (_, b)| a.actor.cmp(&b.actor)).map(|(i, _)| i).unwrap_or(0)
                });
                *last = enabled[pick].actor.clone();
                pick
            }
        }
    }
}

/// Enabled transitions and the reasons some actors are stuck.
pub type Offered<L> = (Vec<Transition<<L as Language>::Term, <L as Language>::Datum>>, Vec<String>);

/// Outcome of advancing a session by one transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Advance {
    Stepped,
    Jumped,
    Halted(Status),
}

/// One running configuration together with its trace.
pub struct Session<'a, L: Language> {
    lang: &'a L,
    term: L::Term,
    snapshot: DataSnapshot<L::Datum>,
    step_count: u64,
    started: bool,
    pending: Vec<Injection<L::Datum>>,
    scheduler: Scheduler,
    trace: Trace<L::Datum>,
}

impl<'a, L: Language> Session<'a, L> {
    pub fn new(lang: &'a L, term: L::Term, schedule: UpgradeSchedule<L::Datum>, scheduler: Scheduler) -> Self {
        let snapshot = lang.initial_snapshot(&term);
        let trace = Trace::new(term.to_string(), snapshot.clone());
        Session { lang, term, snapshot, step_count: 0, started: false, pending: schedule.injections, scheduler, trace }
    }

    pub fn term(&self) -> &L::Term {
        &self.term
    }

    pub fn snapshot(&self) -> &DataSnapshot<L::Datum> {
        &self.snapshot
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn trace(&self) -> &Trace<L::Datum> {
        &self.trace
    }

    pub fn into_trace(self) -> Trace<L::Datum> {
        self.trace
    }

    pub fn language(&self) -> &L {
        self.lang
    }

    /// Replaces an upgrade component wholesale. Data components are never
    /// touched.
    pub fn inject(&mut self, index: &str, payload: ComponentObject<L::Datum>) -> Result<(), EngineError> {
        let sig = self.lang.signature();
        match sig.component(index) {
            Some(c) if c.index.namespace == Namespace::Upgrade => {}
            Some(_) => return Err(EngineError::InvalidInjection(format!("`{index}` is not an upgrade component"))),
            None => return Err(EngineError::InvalidInjection(format!("unknown component `{index}`"))),
        }
        if !matches!(payload, ComponentObject::Map(_)) {
            return Err(EngineError::InvalidInjection(format!("payload for `{index}` must be a map")));
        }
        self.snapshot.set(index, payload.clone());
        self.trace.push(TraceEntry::Injection { n: self.step_count, index: index.to_string(), payload });
        Ok(())
    }

    /// Decodes and injects a JSON payload.
    pub fn inject_json(&mut self, index: &str, json: &Json) -> Result<(), EngineError> {
        let payload = self.lang.parse_payload(index, json).map_err(EngineError::InvalidInjection)?;
        self.inject(index, payload)
    }

    fn apply_due(&mut self, before_jump: bool) -> Result<(), EngineError> {
        let n = self.step_count;
        let (due, rest): (Vec<_>, Vec<_>) = std::mem::take(&mut self.pending).into_iter().partition(|inj| match inj.trigger {
            Trigger::Immediate => true,
            Trigger::AtStep(k) => k == n,
            Trigger::AtFirstUpgradePoint => before_jump,
        });
        self.pending = rest;
        for inj in due {
            self.inject(&inj.index, inj.payload)?;
        }
        Ok(())
    }

    /// Transitions that chain from the current snapshot. Before the first
    /// step jumps are not offered.
    pub fn enabled(&self) -> Offered<L> {
        self.filter(self.lang.step(&self.term, &self.snapshot))
    }

    fn filter(&self, res: StepResult<L::Term, L::Datum>) -> Offered<L> {
        let sig = self.lang.signature();
        let ts = res
            .transitions
            .into_iter()
            .filter(|t| match &t.label {
                Label::Step(m) => m.chains_from(sig, &self.snapshot),
                Label::Jump(_) => self.started,
            })
            .collect();
        (ts, res.stuck)
    }

    fn classify(&self, stuck: Vec<String>, had_jumps: bool) -> Status {
        if had_jumps {
            Status::JumpBeforeFirstStep
        } else if self.lang.is_final(&self.term) {
            Status::Terminated
        } else if !stuck.is_empty() {
            Status::Stuck(stuck)
        } else {
            Status::Blocked
        }
    }

    /// Fires the transition chosen by the scheduler.
    pub fn advance(&mut self) -> Result<Advance, EngineError> {
        self.apply_due(false)?;
        let res = self.lang.step(&self.term, &self.snapshot);
        let only_jumps = !self.started && !res.transitions.is_empty() && res.transitions.iter().all(|t| t.label.is_jump());
        let (enabled, stuck) = self.filter(res);
        if enabled.is_empty() {
            return Ok(Advance::Halted(self.classify(stuck, only_jumps)));
        }
        let pick = self.scheduler.choose(&enabled);
        let t = enabled.into_iter().nth(pick).expect("scheduler index in range");
        self.fire(t)
    }

    /// Fires the `i`-th enabled transition, bypassing the scheduler.
    pub fn advance_with(&mut self, i: usize) -> Result<Advance, EngineError> {
        self.apply_due(false)?;
        let (enabled, _) = self.enabled();
        let t = enabled.into_iter().nth(i).ok_or(EngineError::NoSuchTransition(i))?;
        self.fire(t)
    }

    fn fire(&mut self, t: Transition<L::Term, L::Datum>) -> Result<Advance, EngineError> {
        let sig = self.lang.signature();
        let before_term = self.term.to_string();
        let after_term = t.next.to_string();
        let n = self.step_count;
        let outcome = match t.label {
            Label::Step(m) => {
                self.snapshot = m.target(sig, &self.snapshot)?;
                self.started = true;
                self.trace.push(TraceEntry::Step {
                    n,
                    rule: t.rule.to_string(),
                    actor: t.actor,
                    before: before_term,
                    after: after_term,
                    label: m,
                });
                Advance::Stepped
            }
            Label::Jump(jump) => {
                self.apply_due(true)?;
                let e = self.lang.registry().extend(&jump, sig)?;
                let before = self.snapshot.clone();
                let after = self.lang.after_jump(e.apply(&before));
                self.snapshot = after.clone();
                self.trace.push(TraceEntry::Jump { n, actor: t.actor, term_before: before_term, term_after: after_term, jump, before, after });
                Advance::Jumped
            }
        };
        self.term = t.next;
        self.step_count += 1;
        Ok(outcome)
    }

    /// Runs until halting or until `fuel` transitions have fired.
    pub fn run(&mut self, fuel: u64) -> Result<Status, EngineError> {
        for _ in 0..fuel {
            if let Advance::Halted(s) = self.advance()? {
                return Ok(s);
            }
        }
        self.apply_due(false)?;
        let (enabled, stuck) = self.enabled();
        if enabled.is_empty() {
            return Ok(self.classify(stuck, false));
        }
        Ok(Status::FuelExhausted)
    }
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutcome<T, V> {
    pub status: Status,
    pub term: T,
    pub snapshot: DataSnapshot<V>,
    pub trace: Trace<V>,
}

pub fn run<L: Language>(
    lang: &L,
    term: L::Term,
    schedule: UpgradeSchedule<L::Datum>,
    scheduler: Scheduler,
    fuel: u64,
) -> Result<RunOutcome<L::Term, L::Datum>, EngineError> {
    let mut s = Session::new(lang, term, schedule, scheduler);
    let status = s.run(fuel)?;
    Ok(RunOutcome { status, term: s.term.clone(), snapshot: s.snapshot.clone(), trace: s.trace })
}
