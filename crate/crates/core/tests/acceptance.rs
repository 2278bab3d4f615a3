//! Acceptance suite. Each criterion runs against a pinned time bound and
//! prints one PASS/FAIL line; the process exits nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dsos::checks::{self, default_corpus, load_proteus_corpus, random_proteus_snapshot, random_update_case, CALL_PROTOCOL};
use dsos::creol::{self, Creol, CreolDatum};
use dsos::encapsulation::ObjectId;
use dsos::engine::oracle::{oracle_run, Heap, HeapEntry, OracleOutcome};
use dsos::engine::{explore, modularity_check, run, Language, Scheduler, SchedulerKind, StateKind, Status, TraceEntry, Trigger, UpgradeSchedule};
use dsos::label::{ComponentObject, DataSnapshot};
use dsos::proteus::{self, Proteus, ProteusDatum};
use dsos::syntax::{Lambda, Term, Value};
use dsos::uts::{check_no_sudden_jumps, delta, Delta, Jump, Verdict};

const FUEL: u64 = 100_000;
const SEED: u64 = 0x5eed;

type Outcome = Result<String, String>;

struct Criterion {
    id: u8,
    name: &'static str,
    bound: Duration,
    check: fn() -> Outcome,
}

fn ms(n: u64) -> Duration {
    Duration::from_millis(n)
}

fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: 1, name: "modularity under a fresh index", bound: ms(5_000), check: modularity },
        Criterion { id: 2, name: "heap conformance", bound: ms(5_000), check: heap_conformance },
        Criterion { id: 3, name: "update conformance", bound: ms(5_000), check: update_conformance },
        Criterion { id: 4, name: "no sudden jumps", bound: ms(2_000), check: no_sudden_jumps },
        Criterion { id: 5, name: "disjoint upgrades commute", bound: ms(2_000), check: commutativity },
        Criterion { id: 6, name: "call protocol confluence", bound: ms(10_000), check: confluence },
        Criterion { id: 7, name: "message audits on random systems", bound: ms(10_000), check: audits },
        Criterion { id: 8, name: "temperature logger upgrade", bound: ms(2_000), check: temperature },
        Criterion { id: 9, name: "class upgrade function", bound: ms(2_000), check: class_upgrade },
    ]
}

fn main() -> ExitCode {
    let mut failed = 0;
    for c in criteria() {
        let start = Instant::now();
        let res = (c.check)();
        let took = start.elapsed();
        let (ok, detail) = match res {
            Ok(d) if took <= c.bound => (true, d),
            Ok(d) => (false, format!("{d}; too slow")),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "[{}] {}. {} ({} ms, bound {} ms): {detail}",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            took.as_millis(),
            c.bound.as_millis()
        );
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

// ---------------------------------------------------------------------------
// 1
// ---------------------------------------------------------------------------

fn corpus() -> Result<Vec<(String, Term)>, String> {
    let progs = load_proteus_corpus(&default_corpus())?;
    if progs.len() < 30 {
        return Err(format!("corpus has only {} programs", progs.len()));
    }
    Ok(progs)
}

fn modularity() -> Outcome {
    let base = Proteus::default();
    let ext = base.extended_with("X").map_err(|e| e.to_string())?;
    let progs = corpus()?;
    let mut steps = 0;
    for (name, t) in &progs {
        match modularity_check(&base, &ext, t.clone(), "X", FUEL) {
            Verdict::Pass { checked } => steps += checked,
            Verdict::Fail { witness } => return Err(format!("{name}: {witness:?}")),
        }
    }
    Ok(format!("{} programs, {steps} steps identical after projection", progs.len()))
}

// ---------------------------------------------------------------------------
// 2 and 3: the modular interpreter against the single-heap one
// ---------------------------------------------------------------------------

fn entry(d: &ProteusDatum) -> HeapEntry {
    match d {
        ProteusDatum::Val(v) => HeapEntry::Val(v.clone()),
        ProteusDatum::Lambda(l) => HeapEntry::Fun { param: l.param.clone(), body: l.body.clone() },
        ProteusDatum::Record(fs) => HeapEntry::Rec(fs.clone()),
    }
}

fn union_of(snap: &DataSnapshot<ProteusDatum>, names: [&str; 3]) -> Result<Heap, String> {
    let mut h = Heap::new();
    for n in names {
        for (k, d) in snap.get(n).and_then(|o| o.as_map()).into_iter().flatten() {
            if h.insert(k.clone(), entry(d)).is_some() {
                return Err(format!("`{k}` bound in two stores"));
            }
        }
    }
    Ok(h)
}

/// Runs both interpreters and compares term and heap after every step, the
/// printed output, the final outcome and the update information left over.
fn conform(t: &Term, upd: &Heap, consume_all: bool) -> Result<usize, String> {
    let lang = Proteus::new(consume_all);
    let sig = lang.signature();
    let us: BTreeMap<String, ProteusDatum> = upd
        .iter()
        .map(|(k, e)| match e {
            HeapEntry::Val(v) => Ok((k.clone(), ProteusDatum::Val(v.clone()))),
            _ => Err("only variable update information is generated".to_string()),
        })
        .collect::<Result<_, _>>()?;
    let mut sched = UpgradeSchedule::empty();
    if !us.is_empty() {
        sched = sched.with(Trigger::Immediate, proteus::U_S, ComponentObject::Map(us));
    }
    let want = oracle_run(t, upd.clone(), consume_all, FUEL as usize).map_err(|e| e.to_string())?;
    let got = run(&lang, t.clone(), sched, Scheduler::new(SchedulerKind::First, 0), FUEL).map_err(|e| e.to_string())?;

    let mut terms = vec![got.trace.initial_term.clone()];
    let mut heaps = vec![union_of(&got.trace.initial, [proteus::S, proteus::F, proteus::R])?];
    let mut snap = got.trace.initial.clone();
    for e in &got.trace.entries {
        match e {
            TraceEntry::Step { after, label, .. } => {
                snap = label.target(sig, &snap).map_err(|e| e.to_string())?;
                terms.push(after.clone());
            }
            TraceEntry::Jump { term_after, before, after, .. } => {
                if *before != snap {
                    return Err("jump source differs from the step target".into());
                }
                if consume_all && before.get(proteus::U_S) != after.get(proteus::U_S) && !after.get(proteus::U_S).is_none_or(|o| o.is_bottom()) {
                    return Err("consume_all left variable update information".into());
                }
                snap = after.clone();
                terms.push(term_after.clone());
            }
            TraceEntry::Injection { index, payload, .. } => {
                snap.set(index.clone(), payload.clone());
                continue;
            }
        }
        heaps.push(union_of(&snap, [proteus::S, proteus::F, proteus::R])?);
    }
    if terms.len() != want.terms.len() {
        return Err(format!("{t}: {} terms vs {} in the oracle", terms.len(), want.terms.len()));
    }
    for (i, (mt, ot)) in terms.iter().zip(&want.terms).enumerate() {
        if *mt != ot.to_string() {
            return Err(format!("{t}: step {i}: `{mt}` vs `{ot}`"));
        }
        if heaps[i] != want.heaps[i] {
            return Err(format!("{t}: step {i}: heap {:?} vs {:?}", heaps[i], want.heaps[i]));
        }
    }
    let printed: Vec<Value> = got
        .trace
        .emitted(proteus::OUT)
        .into_iter()
        .map(|d| match d {
            ProteusDatum::Val(v) => Ok(v),
            other => Err(format!("{t}: printed {other:?}")),
        })
        .collect::<Result<_, _>>()?;
    if printed != want.printed {
        return Err(format!("{t}: printed {printed:?} vs {:?}", want.printed));
    }
    let left = union_of(&got.snapshot, [proteus::U_S, proteus::U_F, proteus::U_R])?;
    if left != want.upd {
        return Err(format!("{t}: update information left {left:?} vs {:?}", want.upd));
    }
    let same = matches!(
        (&got.status, &want.outcome),
        (Status::Terminated, OracleOutcome::Value(_)) | (Status::Stuck(_), OracleOutcome::Stuck(_)) | (Status::FuelExhausted, OracleOutcome::OutOfFuel)
    );
    if !same {
        return Err(format!("{t}: {} vs {:?}", got.status.as_str(), want.outcome));
    }
    Ok(terms.len())
}

fn heap_conformance() -> Outcome {
    let progs = corpus()?;
    let mut steps = 0;
    for (name, t) in &progs {
        steps += conform(t, &Heap::new(), false).map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(format!("{} programs, {steps} configurations agree", progs.len()))
}

fn update_conformance() -> Outcome {
    let mut parts = Vec::new();
    for consume_all in [false, true] {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        let mut fired = 0;
        for _ in 0..100 {
            let case = random_update_case(&mut rng);
            if case.upd.keys().any(|k| case.delta.contains(k)) {
                fired += 1;
            }
            conform(&case.program, &case.upd, consume_all)?;
        }
        if fired == 0 {
            return Err("no generated case actually rebinds anything".into());
        }
        parts.push(format!("100 triples ({fired} rebinding){}", if consume_all { " consuming all" } else { "" }));
    }
    Ok(parts.join(", "))
}

// ---------------------------------------------------------------------------
// 4 and 5
// ---------------------------------------------------------------------------

const IDS: [&str; 5] = ["a", "b", "x", "y", "z"];

fn some_delta(rng: &mut ChaCha8Rng, pool: &[&str]) -> Delta {
    pool.iter().filter(|_| rng.gen_bool(0.4)).map(|s| s.to_string()).collect()
}

fn some_table(rng: &mut ChaCha8Rng, kind: usize) -> ComponentObject<ProteusDatum> {
    let mut m = BTreeMap::new();
    for x in IDS {
        if rng.gen_bool(0.5) {
            let k = rng.gen_range(0..20);
            let d = match kind {
                0 => ProteusDatum::Val(Value::Nat(k)),
                1 => ProteusDatum::Lambda(Lambda::new("p", Term::nat(k))),
                _ => ProteusDatum::Record(vec![("l".into(), Term::nat(k))]),
            };
            m.insert(x.to_string(), d);
        }
    }
    ComponentObject::Map(m)
}

fn no_sudden_jumps() -> Outcome {
    const N: usize = 500;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let reg = proteus::registry(false);
    let mut done = Vec::new();
    for (kind, name) in ["E_v", "E_f", "E_r"].into_iter().enumerate() {
        let spec = reg.lookup(name).ok_or(format!("{name} not registered"))?;
        let samples: Vec<_> = (0..N).map(|_| (some_delta(&mut rng, &IDS), vec![some_table(&mut rng, kind)])).collect();
        match check_no_sudden_jumps(spec, samples) {
            Verdict::Pass { checked } if checked >= N => done.push(format!("{name} {checked}")),
            Verdict::Pass { checked } => return Err(format!("{name}: only {checked} tuples")),
            Verdict::Fail { witness } => return Err(format!("{name}: {witness:?}")),
        }
    }
    let spec = creol::e_c_spec();
    let samples: Vec<_> = (0..N)
        .map(|_| {
            let [c, a, un, ..] = checks::random_class_tuple(&mut rng);
            (checks::random_class_delta(&mut rng), vec![ComponentObject::Map(c), ComponentObject::Map(a), ComponentObject::Map(un)])
        })
        .collect();
    match check_no_sudden_jumps(&spec, samples) {
        Verdict::Pass { checked } if checked >= N => done.push(format!("E_c {checked}")),
        Verdict::Pass { checked } => return Err(format!("E_c: only {checked} tuples")),
        Verdict::Fail { witness } => return Err(format!("E_c: {witness:?}")),
    }
    Ok(done.join(", "))
}

fn commutativity() -> Outcome {
    const N: usize = 200;
    let lang = Proteus::default();
    let (sig, reg) = (lang.signature(), lang.registry());
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut moved = 0;
    for (a, b) in [("E_v", "E_f"), ("E_v", "E_r"), ("E_f", "E_r")] {
        for _ in 0..N {
            let snap = random_proteus_snapshot(&mut rng);
            let ja = Jump::new(a, some_delta(&mut rng, &["a", "b", "c", "x", "y", "z"]));
            let jb = Jump::new(b, some_delta(&mut rng, &["a", "b", "c", "x", "y", "z"]));
            let ea = reg.extend(&ja, sig).map_err(|e| e.to_string())?;
            let eb = reg.extend(&jb, sig).map_err(|e| e.to_string())?;
            let ab = eb.apply(&ea.apply(&snap));
            let ba = ea.apply(&eb.apply(&snap));
            if ab != ba {
                return Err(format!("{ja} and {jb} disagree on {}", snap.to_json()));
            }
            if ab != snap {
                moved += 1;
            }
        }
    }
    if moved == 0 {
        return Err("no generated pair changed its snapshot".into());
    }
    Ok(format!("3 pairs x {N} snapshots, {moved} non-trivial"))
}

// ---------------------------------------------------------------------------
// 6 and 7
// ---------------------------------------------------------------------------

fn confluence() -> Outcome {
    let lang = Creol::default();
    let sys = creol::parse(CALL_PROTOCOL).map_err(|e| e.to_string())?.system;
    let mut counts = BTreeSet::new();
    let mut terminal = None;
    for _ in 0..3 {
        let g = explore(&lang, sys.clone(), lang.initial_snapshot(&sys), 200, 100_000).map_err(|e| e.to_string())?;
        let ts = g.of_kind(StateKind::Terminated);
        if ts.len() != 1 || g.halted().len() != 1 {
            return Err(format!("{} terminal and {} halted states", ts.len(), g.halted().len()));
        }
        counts.insert(g.len());
        terminal = Some(g.states[ts[0]].clone());
    }
    let (t_term, t_snap) = terminal.expect("explored");
    for seed in 0..20 {
        let out = run(&lang, sys.clone(), UpgradeSchedule::empty(), Scheduler::new(SchedulerKind::Seeded, seed), FUEL).map_err(|e| e.to_string())?;
        if out.status != Status::Terminated {
            return Err(format!("seed {seed}: {}", out.status.as_str()));
        }
        if out.term != t_term || out.snapshot != t_snap {
            return Err(format!("seed {seed} ends outside the unique terminal state"));
        }
    }
    if counts.len() != 1 {
        return Err(format!("state counts vary: {counts:?}"));
    }
    let states = counts.into_iter().next().unwrap_or_default();
    Ok(format!("1 terminal state of {states}, reached by 20 seeded runs"))
}

fn audits() -> Outcome {
    let lang = Creol::default();
    let (mut calls, mut blocked) = (0, 0);
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (objects, ncalls) = (rng.gen_range(2..=4), rng.gen_range(1..=3));
        let sys = creol::random_system(&mut rng, objects, ncalls);
        let out = run(&lang, sys.clone(), UpgradeSchedule::empty(), Scheduler::new(SchedulerKind::Seeded, seed), FUEL).map_err(|e| e.to_string())?;
        // mutual synchronous calls may deadlock; that is blocking, not an error
        match out.status {
            Status::Terminated => {}
            Status::Blocked => blocked += 1,
            _ => return Err(format!("seed {seed}: {} for {sys}", out.status.as_str())),
        }
        let report = creol::audit_messages(&out.trace).map_err(|e| format!("seed {seed}: {e}"))?;
        let answered = out.status != Status::Terminated || report.invokes == report.completions;
        if !answered || report.completions != report.returns {
            return Err(format!("seed {seed}: {report:?}"));
        }
        if !creol::upgrade_numbers_monotone(&out.trace) {
            return Err(format!("seed {seed}: upgrade numbers decreased"));
        }
        let distinct: BTreeSet<u64> = report.futures.iter().copied().collect();
        if distinct.len() != report.futures.len() || report.futures.len() != report.invokes {
            return Err(format!("seed {seed}: futures {:?} for {} invokes", report.futures, report.invokes));
        }
        calls += report.invokes;
    }
    Ok(format!("50 runs ({blocked} deadlocked), {calls} calls conserved"))
}

// ---------------------------------------------------------------------------
// 8
// ---------------------------------------------------------------------------

fn temperature_run(prog: &str, schedule: &str) -> Result<dsos::engine::RunOutcome<dsos::syntax::SystemTerm, CreolDatum>, String> {
    let dir = default_corpus();
    let lang = Creol::default();
    let src = fs::read_to_string(dir.join("creol").join(prog)).map_err(|e| e.to_string())?;
    let sys = creol::parse(&src).map_err(|e| e.to_string())?.system;
    let json = serde_json::from_str(&fs::read_to_string(dir.join("schedules").join(schedule)).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let sched = UpgradeSchedule::from_json(&lang, &json)?;
    run(&lang, sys, sched, Scheduler::new(SchedulerKind::First, 0), 10_000).map_err(|e| e.to_string())
}

fn main_store(snap: &DataSnapshot<CreolDatum>) -> BTreeMap<String, Value> {
    let mut out = BTreeMap::new();
    if let Some(store) = snap.get(creol::E).and_then(|e| e.as_local()).and_then(|l| l.get(&ObjectId::new("main"))).and_then(|l| l.get(creol::S)) {
        for x in ["g1", "avg", "g2"] {
            if let Some(CreolDatum::Val(v)) = store.lookup(x) {
                out.insert(x.to_string(), v.clone());
            }
        }
    }
    out
}

fn temp_version(snap: &DataSnapshot<CreolDatum>) -> u64 {
    match snap.get(creol::UN).and_then(|o| o.lookup("TEMP")) {
        Some(CreolDatum::Nat(n)) => *n,
        _ => 0,
    }
}

fn golden_lines(trace: &dsos::engine::Trace<CreolDatum>) -> String {
    trace
        .entries
        .iter()
        .filter_map(|e| match e {
            TraceEntry::Step { n, rule, actor, .. } => Some(format!("{n} {} {rule}", actor.as_deref().unwrap_or("-"))),
            TraceEntry::Jump { n, jump, .. } => Some(format!("{n} jump {jump}")),
            TraceEntry::Injection { .. } => None,
        })
        .map(|l| l + "\n")
        .collect()
}

fn temperature() -> Outcome {
    // setTemp(20), getTemp; upgrade; setTemp(30), setTemp(40): the average
    // counts only post-upgrade samples, so (30 + 40) / 2.
    let nat = Value::Nat;
    let out = temperature_run("temperature.creol", "temperature_up.json")?;
    if out.status != Status::Terminated {
        return Err(format!("upgraded run {}", out.status.as_str()));
    }
    let want: BTreeMap<String, Value> = [("g1", nat(20)), ("avg", nat(35)), ("g2", nat(40))].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    let got = main_store(&out.snapshot);
    if got != want {
        return Err(format!("upgraded run read {got:?}, expected {want:?}"));
    }
    if temp_version(&out.snapshot) != 1 {
        return Err("TEMP not at version 1".into());
    }
    let jumps: Vec<_> = out.trace.entries.iter().filter(|e| matches!(e, TraceEntry::Jump { .. })).collect();
    if jumps.len() != 1 {
        return Err(format!("{} jumps", jumps.len()));
    }
    let golden_path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden").join("temperature.trace");
    let lines = golden_lines(&out.trace);
    if std::env::var_os("DSOS_BLESS").is_some() {
        fs::write(&golden_path, &lines).map_err(|e| e.to_string())?;
    }
    let golden = fs::read_to_string(&golden_path).map_err(|e| format!("{}: {e}", golden_path.display()))?;
    if golden != lines {
        let at = golden.lines().zip(lines.lines()).position(|(a, b)| a != b).unwrap_or(golden.lines().count().min(lines.lines().count()));
        return Err(format!("trace leaves the golden file at line {}", at + 1));
    }

    let guard = temperature_run("temperature_guard.creol", "temperature_guard_up.json")?;
    if guard.status != Status::Terminated {
        return Err(format!("guarded run {}", guard.status.as_str()));
    }
    for e in &guard.trace.entries {
        if let TraceEntry::Jump { jump, before, after, .. } = e {
            if before != after {
                return Err(format!("guarded {jump} changed the state"));
            }
        }
    }
    let want: BTreeMap<String, Value> = [("g1", nat(20)), ("g2", nat(30))].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    let got = main_store(&guard.snapshot);
    if got != want || temp_version(&guard.snapshot) != 0 {
        return Err(format!("guarded run read {got:?}, version {}", temp_version(&guard.snapshot)));
    }
    Ok(format!("{} golden entries; guard left the system unchanged", lines.lines().count()))
}

// ---------------------------------------------------------------------------
// 9: a second, direct transcription of the class upgrade
// ---------------------------------------------------------------------------

type Tab = BTreeMap<String, CreolDatum>;

fn transcribed(d: &Delta, c: &Tab, a: &Tab, un: &Tab, uc: &Tab, ua: &Tab, ud: &Tab) -> [Tab; 6] {
    let version = |k: &str| match un.get(k) {
        Some(CreolDatum::Nat(n)) => Some(*n),
        _ => None,
    };
    // guard: ud(C) below un for every C in Δ with a dependency entry
    let guard = ud.iter().filter(|(k, _)| d.contains(*k)).all(|(_, req)| match req {
        CreolDatum::Versions(r) => r.iter().all(|(dep, need)| version(dep).is_some_and(|have| have >= *need)),
        _ => false,
    });
    if !guard {
        return [c.clone(), a.clone(), un.clone(), uc.clone(), ua.clone(), ud.clone()];
    }
    let (mut c2, mut a2, mut un2) = (Tab::new(), Tab::new(), Tab::new());
    let keys: BTreeSet<&String> = c.keys().chain(uc.keys()).chain(a.keys()).chain(ua.keys()).chain(un.keys()).collect();
    for k in keys {
        let in_delta = d.contains(k);
        match (c.get(k), uc.get(k).filter(|_| in_delta)) {
            (old, Some(CreolDatum::Methods(new))) => {
                let mut ms = match old {
                    Some(CreolDatum::Methods(o)) => o.clone(),
                    _ => BTreeMap::new(),
                };
                for (m, l) in new {
                    ms.insert(m.clone(), l.clone());
                }
                c2.insert(k.clone(), CreolDatum::Methods(ms));
            }
            (Some(old), _) => {
                c2.insert(k.clone(), old.clone());
            }
            (None, _) => {}
        }
        if let Some(v) = ua.get(k).filter(|_| in_delta).or(a.get(k)) {
            a2.insert(k.clone(), v.clone());
        }
        let bumped = in_delta && (uc.contains_key(k) || ua.contains_key(k));
        match (un.get(k), bumped) {
            (_, true) => {
                un2.insert(k.clone(), CreolDatum::Nat(version(k).unwrap_or(0) + 1));
            }
            (Some(v), false) => {
                un2.insert(k.clone(), v.clone());
            }
            (None, false) => {}
        }
    }
    let outside = |t: &Tab| -> Tab { t.iter().filter(|(k, _)| !d.contains(k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect() };
    [c2, a2, un2, outside(uc), outside(ua), outside(ud)]
}

fn lam(body: i64) -> Lambda {
    Lambda::new("p", Term::nat(body as u64))
}

fn class_upgrade() -> Outcome {
    let call = |d: &Delta, t: &[Tab; 6]| creol::e_c(d, &t[0], &t[1], &t[2], &t[3], &t[4], &t[5]);
    let tab = |pairs: Vec<(&str, CreolDatum)>| -> Tab { pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect() };
    let methods = |pairs: Vec<(&str, Lambda)>| CreolDatum::Methods(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect());

    // empty upgrade maps
    let base = [tab(vec![("C", methods(vec![("m", lam(1))]))]), Tab::new(), tab(vec![("C", CreolDatum::Nat(0))]), Tab::new(), Tab::new(), Tab::new()];
    if call(&delta(["C"]), &base) != base {
        return Err("empty upgrade maps moved the state".into());
    }

    // m overridden, k kept, version bumped, upgrade maps cleared of C
    let t = [
        tab(vec![("C", methods(vec![("m", lam(1)), ("k", lam(2))]))]),
        Tab::new(),
        tab(vec![("C", CreolDatum::Nat(0))]),
        tab(vec![("C", methods(vec![("m", lam(9))]))]),
        Tab::new(),
        Tab::new(),
    ];
    let want = [
        tab(vec![("C", methods(vec![("m", lam(9)), ("k", lam(2))]))]),
        Tab::new(),
        tab(vec![("C", CreolDatum::Nat(1))]),
        Tab::new(),
        Tab::new(),
        Tab::new(),
    ];
    if call(&delta(["C"]), &t) != want {
        return Err("method override example".into());
    }

    // unmet dependency
    let t = [
        tab(vec![("C", methods(vec![("m", lam(1))]))]),
        Tab::new(),
        tab(vec![("D", CreolDatum::Nat(1))]),
        tab(vec![("C", methods(vec![("m", lam(9))]))]),
        Tab::new(),
        tab(vec![("C", CreolDatum::Versions([("D".to_string(), 2)].into()))]),
    ];
    if call(&delta(["C"]), &t) != t {
        return Err("unmet dependency moved the state".into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut moved, mut blocked) = (0, 0);
    for i in 0..50 {
        let t = checks::random_class_tuple(&mut rng);
        let d = checks::random_class_delta(&mut rng);
        let got = call(&d, &t);
        let want = transcribed(&d, &t[0], &t[1], &t[2], &t[3], &t[4], &t[5]);
        if got != want {
            return Err(format!("tuple {i}, delta {d:?}: {got:?} vs {want:?}"));
        }
        if got == t {
            blocked += 1;
        } else {
            moved += 1;
        }
    }
    Ok(format!("3 examples, 50 tuples ({moved} changed, {blocked} unchanged)"))
}
