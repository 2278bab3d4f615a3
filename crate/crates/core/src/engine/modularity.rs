use std::collections::BTreeSet;

use serde_json::Value as Json;

use super::{run, Label, Language, Scheduler, SchedulerKind, StepResult, TraceEntry, UpgradeSchedule};
use crate::label::{ComponentObject, DataSnapshot, LabelSignature, MorphismComponent};
use crate::uts::{Registry, Verdict};

/// First point where the two runs disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModularityWitness {
    pub step: usize,
    pub reason: String,
}

/// Runs `term` under `base` and under `extended` (the same rules over a
/// signature with the extra index `fresh`) and compares the traces
/// stepwise after projecting `fresh` away.
pub fn modularity_check<A, B>(base: &A, extended: &B, term: A::Term, fresh: &str, fuel: u64) -> Verdict<ModularityWitness>
where
    A: Language,
    B: Language<Term = A::Term, Datum = A::Datum>,
{
    let fail = |step: usize, reason: String| Verdict::Fail { witness: ModularityWitness { step, reason } };
    let keep: BTreeSet<String> = base.signature().names();
    if keep.contains(fresh) || !extended.signature().contains(fresh) {
        return fail(0, format!("`{fresh}` is not fresh for the base signature"));
    }
    let r1 = run(base, term.clone(), UpgradeSchedule::empty(), Scheduler::new(SchedulerKind::First, 0), fuel);
    let r2 = run(extended, term, UpgradeSchedule::empty(), Scheduler::new(SchedulerKind::First, 0), fuel);
    let (r1, r2) = match (r1, r2) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => return fail(0, format!("engine error: {:?} / {:?}", a.err(), b.err())),
    };
    if r2.trace.initial.restrict(&keep) != r1.trace.initial {
        return fail(0, "initial snapshots differ".into());
    }
    let ext_sig = extended.signature();
    let (e1, e2) = (&r1.trace.entries, &r2.trace.entries);
    for (i, (a, b)) in e1.iter().zip(e2.iter()).enumerate() {
        let same = match (a, b) {
            (
                TraceEntry::Step { rule: ra, before: ba, after: aa, label: la, .. },
                TraceEntry::Step { rule: rb, before: bb, after: ab, label: lb, .. },
            ) => {
                let projected = match lb.project(ext_sig, &keep) {
                    Ok(p) => p,
                    Err(e) => return fail(i, format!("projection failed: {e}")),
                };
                if lb.entry(fresh).is_some_and(|c| !c.is_identity()) {
                    return fail(i, format!("step {i} ({rb}) moves `{fresh}`: {}", lb.pretty()));
                }
                ra == rb && ba == bb && aa == ab && *la == projected
            }
            (
                TraceEntry::Jump { jump: ja, term_after: ta, after: sa, .. },
                TraceEntry::Jump { jump: jb, term_after: tb, after: sb, .. },
            ) => ja == jb && ta == tb && *sa == sb.restrict(&keep),
            _ => false,
        };
        if !same {
            return fail(i, format!("entries differ:\n  base:     {}\n  extended: {}", a.to_json(), b.to_json()));
        }
    }
    if e1.len() != e2.len() {
        return fail(e1.len().min(e2.len()), format!("trace lengths differ: {} vs {}", e1.len(), e2.len()));
    }
    if r1.status != r2.status {
        return fail(e1.len(), format!("final status differs: {:?} vs {:?}", r1.status, r2.status));
    }
    if r2.snapshot.get(fresh) != r2.trace.initial.get(fresh) {
        return fail(e1.len(), format!("`{fresh}` changed during the run"));
    }
    if r2.snapshot.restrict(&keep) != r1.snapshot {
        return fail(e1.len(), "final snapshots differ".into());
    }
    Verdict::Pass { checked: e1.len() }
}

/// Negative control: every step of the wrapped language also resets the
/// component `fresh` to its information-less object.
pub struct WritesFresh<L> {
    pub inner: L,
    pub fresh: String,
}

impl<L: Language> Language for WritesFresh<L> {
    type Term = L::Term;
    type Datum = L::Datum;

    fn name(&self) -> &'static str {
        "mutant"
    }

    fn signature(&self) -> &LabelSignature {
        self.inner.signature()
    }

    fn registry(&self) -> &Registry<L::Datum> {
        self.inner.registry()
    }

    fn initial_snapshot(&self, term: &L::Term) -> DataSnapshot<L::Datum> {
        self.inner.initial_snapshot(term)
    }

    fn step(&self, term: &L::Term, snap: &DataSnapshot<L::Datum>) -> StepResult<L::Term, L::Datum> {
        let mut res = self.inner.step(term, snap);
        let current = snap.get(&self.fresh).cloned().unwrap_or_else(ComponentObject::empty_map);
        for t in &mut res.transitions {
            if let Label::Step(m) = &t.label {
                let write = MorphismComponent::Pair(current.clone(), ComponentObject::empty_map());
                t.label = Label::Step(m.clone().with(self.fresh.clone(), write));
            }
        }
        res
    }

    fn is_final(&self, term: &L::Term) -> bool {
        self.inner.is_final(term)
    }

    fn after_jump(&self, snap: DataSnapshot<L::Datum>) -> DataSnapshot<L::Datum> {
        self.inner.after_jump(snap)
    }

    fn parse_payload(&self, index: &str, json: &Json) -> Result<ComponentObject<L::Datum>, String> {
        self.inner.parse_payload(index, json)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proteus::{parse, Proteus};

    #[test]
    fn fresh_index_is_invisible() {
        let base = Proteus::default();
        let ext = base.extended_with("X").unwrap();
        let t = parse("var x := 1; x := x + 1; x").unwrap();
        assert!(modularity_check(&base, &ext, t, "X", 100).passed());
        assert!(modularity_check(&base, &ext, parse("7").unwrap(), "X", 100).passed());
    }

    #[test]
    fn writing_the_fresh_index_is_caught() {
        let base = Proteus::default();
        let mutant = WritesFresh { inner: base.extended_with("X").unwrap(), fresh: "X".into() };
        match modularity_check(&base, &mutant, parse("var x := 1; x").unwrap(), "X", 100) {
            Verdict::Fail { witness } => assert_eq!(witness.step, 0),
            other => panic!("mutant passed: {other:?}"),
        }
    }

    #[test]
    fn index_must_be_fresh() {
        let base = Proteus::default();
        assert!(!modularity_check(&base, &base, parse("1").unwrap(), "S", 100).passed());
    }
}
