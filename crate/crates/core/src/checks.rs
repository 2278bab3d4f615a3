//! Built-in property suites run by `dsos check` and shared generators for
//! random tables, snapshots and deltas.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as Json};

use crate::creol::{self, Creol, CreolDatum};
use crate::engine::oracle::{oracle_run, Heap, HeapEntry, OracleOutcome};
use crate::engine::{explore, modularity_check, run, Scheduler, SchedulerKind, StateKind, Trace, TraceEntry, Trigger, UpgradeSchedule, DEFAULT_FUEL};
use crate::label::{ComponentObject, DataSnapshot};
use crate::proteus::{self, Proteus, ProteusDatum};
use crate::syntax::{parse_term, Lambda, Term, Value};
use crate::uts::{check_no_sudden_jumps, Delta, EndofunctorSpec, Jump, Verdict};

pub const SUITES: [&str; 5] = ["modularity", "no-sudden-jumps", "commutativity", "oracle", "creol-audits"];

/// Outcome of one property within a suite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyResult {
    pub suite: &'static str,
    pub property: String,
    pub passed: bool,
    pub checked: usize,
    pub witness: Option<String>,
}

impl PropertyResult {
    fn new<W: std::fmt::Debug>(suite: &'static str, property: impl Into<String>, verdict: Verdict<W>) -> Self {
        let property = property.into();
        match verdict {
            Verdict::Pass { checked } => PropertyResult { suite, property, passed: true, checked, witness: None },
            Verdict::Fail { witness } => PropertyResult { suite, property, passed: false, checked: 0, witness: Some(format!("{witness:?}")) },
        }
    }

    pub fn to_json(&self) -> Json {
        json!({
            "suite": self.suite,
            "property": self.property,
            "passed": self.passed,
            "checked": self.checked,
            "witness": self.witness,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub corpus: PathBuf,
    pub only: Option<String>,
    /// Swap `E_v` for a version that moves on empty upgrade data.
    pub mutant: bool,
    pub seed: u64,
}

/// The corpus shipped with the crate.
pub fn default_corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join("corpus")
}

/// Every `*.{ext}` file directly under `dir`, sorted by name.
pub fn corpus_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, String> {
    let entries = fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    out.sort();
    Ok(out)
}

pub fn load_proteus_corpus(dir: &Path) -> Result<Vec<(String, Term)>, String> {
    corpus_files(&dir.join("proteus"), "prot")?
        .into_iter()
        .map(|p| {
            let src = fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
            let t = proteus::parse(&src).map_err(|e| format!("{}: {e}", p.display()))?;
            Ok((p.file_stem().unwrap_or_default().to_string_lossy().into_owned(), t))
        })
        .collect()
}

pub fn run_checks(opts: &CheckOptions) -> Result<Vec<PropertyResult>, String> {
    if let Some(s) = &opts.only {
        if !SUITES.contains(&s.as_str()) {
            return Err(format!("unknown suite `{s}`; expected one of {}", SUITES.join(", ")));
        }
    }
    let wanted = |s: &str| opts.only.as_deref().is_none_or(|o| o == s);
    let mut out = Vec::new();
    if wanted("modularity") {
        out.extend(modularity_suite(&opts.corpus)?);
    }
    if wanted("no-sudden-jumps") {
        out.extend(no_sudden_jumps_suite(opts.seed, 500, opts.mutant));
    }
    if wanted("commutativity") {
        out.extend(commutativity_suite(opts.seed, 200));
    }
    if wanted("oracle") {
        out.extend(oracle_suite(&opts.corpus, opts.seed)?);
    }
    if wanted("creol-audits") {
        out.extend(creol_suite(opts.seed, 50));
    }
    Ok(out)
}

pub fn modularity_suite(corpus: &Path) -> Result<Vec<PropertyResult>, String> {
    let base = Proteus::default();
    let ext = base.extended_with("X").map_err(|e| e.to_string())?;
    Ok(load_proteus_corpus(corpus)?
        .into_iter()
        .map(|(name, t)| PropertyResult::new("modularity", format!("{name}: fresh index X"), modularity_check(&base, &ext, t, "X", DEFAULT_FUEL)))
        .collect())
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Random source used by all generators.
pub type Gen = ChaCha8Rng;

fn pick<'a>(rng: &mut Gen, pool: &[&'a str], p: f64) -> Vec<&'a str> {
    pool.iter().copied().filter(|_| rng.gen_bool(p)).collect()
}

const IDS: [&str; 6] = ["a", "b", "c", "x", "y", "z"];
const CLASSES: [&str; 4] = ["C", "D", "TEMP", "LOGGER"];

pub fn random_delta(rng: &mut Gen, pool: &[&str]) -> Delta {
    pick(rng, pool, 0.4).into_iter().map(String::from).collect()
}

pub fn random_value(rng: &mut Gen) -> Value {
    match rng.gen_range(0..4) {
        0 => Value::Nil,
        1 => Value::Bool(rng.gen()),
        _ => Value::Nat(rng.gen_range(0..50)),
    }
}

fn random_lambda(rng: &mut Gen) -> Lambda {
    let k = rng.gen_range(0..9);
    let body = match rng.gen_range(0..3) {
        0 => format!("p + {k}"),
        1 => format!("p * {k}"),
        _ => format!("return {k}"),
    };
    Lambda::new("p", parse_term(&body).expect("generated body parses"))
}

fn random_proteus_datum(rng: &mut Gen, kind: usize) -> ProteusDatum {
    match kind {
        0 => ProteusDatum::Val(random_value(rng)),
        1 => ProteusDatum::Lambda(random_lambda(rng)),
        _ => ProteusDatum::Record((0..rng.gen_range(0..3)).map(|i| (format!("l{i}"), Term::nat(rng.gen_range(0..9)))).collect()),
    }
}

/// A random table over a few identifiers; `kind` picks values (0),
/// functions (1) or records (2).
pub fn random_proteus_table(rng: &mut Gen, kind: usize) -> ComponentObject<ProteusDatum> {
    ComponentObject::Map(pick(rng, &IDS, 0.5).into_iter().map(|x| (x.to_string(), random_proteus_datum(rng, kind))).collect())
}

/// A random Proteus snapshot with all three stores and upgrade maps
/// populated.
pub fn random_proteus_snapshot(rng: &mut Gen) -> DataSnapshot<ProteusDatum> {
    let mut snap = proteus::signature().bottom_snapshot();
    for (i, (d, u)) in [(proteus::S, proteus::U_S), (proteus::F, proteus::U_F), (proteus::R, proteus::U_R)].into_iter().enumerate() {
        snap.set(d, random_proteus_table(rng, i));
        snap.set(u, random_proteus_table(rng, i));
    }
    snap
}

fn random_versions(rng: &mut Gen) -> BTreeMap<String, u64> {
    pick(rng, &CLASSES, 0.4).into_iter().map(|c| (c.to_string(), rng.gen_range(0..4))).collect()
}

fn random_methods(rng: &mut Gen) -> CreolDatum {
    CreolDatum::Methods(pick(rng, &["m", "get", "set"], 0.5).into_iter().map(|m| (m.to_string(), random_lambda(rng))).collect())
}

fn random_attrs(rng: &mut Gen) -> CreolDatum {
    CreolDatum::Attrs(pick(rng, &["temp", "sum", "count"], 0.5).into_iter().map(|a| (a.to_string(), random_value(rng))).collect())
}

fn class_table(rng: &mut Gen, f: impl Fn(&mut Gen) -> CreolDatum) -> creol::Table {
    pick(rng, &CLASSES, 0.5).into_iter().map(|c| (c.to_string(), f(rng))).collect()
}

/// A random `(C, A, UN, UC, UA, UD)` tuple.
pub fn random_class_tuple(rng: &mut Gen) -> [creol::Table; 6] {
    [
        class_table(rng, random_methods),
        class_table(rng, random_attrs),
        class_table(rng, |r| CreolDatum::Nat(r.gen_range(0..4))),
        class_table(rng, random_methods),
        class_table(rng, random_attrs),
        class_table(rng, |r| CreolDatum::Versions(random_versions(r))),
    ]
}

pub fn random_class_delta(rng: &mut Gen) -> Delta {
    random_delta(rng, &CLASSES)
}

// ---------------------------------------------------------------------------
// Upgrade properties
// ---------------------------------------------------------------------------

/// Moves on empty upgrade data: binds every identifier of Δ to nil.
pub fn sudden_mutant() -> EndofunctorSpec<ProteusDatum> {
    EndofunctorSpec::new("E_v", vec![crate::label::Index::data(proteus::S)], vec![crate::label::Index::upgrade(proteus::U_S)], |delta, t| {
        let mut s = t[0].as_map().cloned().unwrap_or_default();
        for x in delta {
            s.entry(x.clone()).or_insert(ProteusDatum::Val(Value::Nil));
        }
        vec![ComponentObject::Map(s), t[1].clone()]
    })
}

pub fn no_sudden_jumps_suite(seed: u64, samples: usize, mutant: bool) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let reg = proteus::registry(false);
    for (i, name) in ["E_v", "E_f", "E_r"].into_iter().enumerate() {
        let spec = if mutant && name == "E_v" { sudden_mutant() } else { reg.lookup(name).expect("registered").clone() };
        let tuples: Vec<_> = (0..samples).map(|_| (random_delta(&mut rng, &IDS), vec![random_proteus_table(&mut rng, i)])).collect();
        out.push(PropertyResult::new("no-sudden-jumps", name, check_no_sudden_jumps(&spec, tuples)));
    }
    let tuples: Vec<_> = (0..samples)
        .map(|_| {
            let [c, a, un, ..] = random_class_tuple(&mut rng);
            (random_class_delta(&mut rng), vec![ComponentObject::Map(c), ComponentObject::Map(a), ComponentObject::Map(un)])
        })
        .collect();
    out.push(PropertyResult::new("no-sudden-jumps", "E_c", check_no_sudden_jumps(&creol::e_c_spec(), tuples)));
    out
}

/// Witness of two extensions disagreeing depending on the order.
#[derive(Debug, Clone)]
pub struct OrderWitness {
    pub first: Jump,
    pub second: Jump,
    pub snapshot: Json,
}

/// Applies the two jumps in both orders on `snapshots` random snapshots.
pub fn commutes(a: &str, b: &str, seed: u64, snapshots: usize) -> Verdict<OrderWitness> {
    let lang = Proteus::default();
    let sig = crate::engine::Language::signature(&lang);
    let reg = crate::engine::Language::registry(&lang);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..snapshots {
        let snap = random_proteus_snapshot(&mut rng);
        let ja = Jump::new(a, random_delta(&mut rng, &IDS));
        let jb = Jump::new(b, random_delta(&mut rng, &IDS));
        let (ea, eb) = (reg.extend(&ja, sig).expect("registered"), reg.extend(&jb, sig).expect("registered"));
        if ea.then(&eb).apply(&snap) != eb.then(&ea).apply(&snap) {
            return Verdict::Fail { witness: OrderWitness { first: ja, second: jb, snapshot: snap.to_json() } };
        }
    }
    Verdict::Pass { checked: snapshots }
}

pub fn commutativity_suite(seed: u64, snapshots: usize) -> Vec<PropertyResult> {
    [("E_v", "E_f"), ("E_v", "E_r"), ("E_f", "E_r")]
        .into_iter()
        .map(|(a, b)| PropertyResult::new("commutativity", format!("{a}/{b}"), commutes(a, b, seed, snapshots)))
        .collect()
}

// ---------------------------------------------------------------------------
// Differential testing against the single-heap interpreter
// ---------------------------------------------------------------------------

/// The three stores of a snapshot merged into one heap.
pub fn merged_heap(snap: &DataSnapshot<ProteusDatum>) -> Heap {
    let mut h = Heap::new();
    for idx in [proteus::S, proteus::F, proteus::R, proteus::U_S, proteus::U_F, proteus::U_R] {
        let upgrade = idx.starts_with("U_");
        let Some(m) = snap.get(idx).and_then(|o| o.as_map()) else { continue };
        for (k, d) in m {
            let key = if upgrade { format!("{idx}:{k}") } else { k.clone() };
            h.insert(key, heap_entry(d));
        }
    }
    h
}

fn heap_entry(d: &ProteusDatum) -> HeapEntry {
    match d {
        ProteusDatum::Val(v) => HeapEntry::Val(v.clone()),
        ProteusDatum::Lambda(l) => HeapEntry::Fun { param: l.param.clone(), body: l.body.clone() },
        ProteusDatum::Record(fs) => HeapEntry::Rec(fs.clone()),
    }
}

fn data_heap(snap: &DataSnapshot<ProteusDatum>) -> Heap {
    merged_heap(snap).into_iter().filter(|(k, _)| !k.starts_with("U_")).collect()
}

fn upgrade_heap(snap: &DataSnapshot<ProteusDatum>) -> Heap {
    let mut h = Heap::new();
    for idx in [proteus::U_S, proteus::U_F, proteus::U_R] {
        if let Some(m) = snap.get(idx).and_then(|o| o.as_map()) {
            h.extend(m.iter().map(|(k, d)| (k.clone(), heap_entry(d))));
        }
    }
    h
}

/// Snapshots after every entry of a trace, starting with the initial one.
pub fn snapshots_along(lang: &Proteus, trace: &Trace<ProteusDatum>) -> Vec<DataSnapshot<ProteusDatum>> {
    let sig = crate::engine::Language::signature(lang);
    let mut snap = trace.initial.clone();
    let mut out = vec![snap.clone()];
    for e in &trace.entries {
        match e {
            TraceEntry::Step { label, .. } => {
                snap = label.target(sig, &snap).expect("recorded labels chain");
                out.push(snap.clone());
            }
            TraceEntry::Jump { after, .. } => {
                snap = after.clone();
                out.push(snap.clone());
            }
            TraceEntry::Injection { index, payload, .. } => snap.set(index.clone(), payload.clone()),
        }
    }
    out
}

/// Where the two interpreters first disagree.
#[derive(Debug, Clone)]
pub struct Divergence {
    pub step: usize,
    pub modular: String,
    pub oracle: String,
}

/// Runs `t` on both interpreters with `upd` available from the start and
/// compares term, heap and printed output at every step.
pub fn differential(t: &Term, upd: &Heap, consume_all: bool) -> Verdict<Divergence> {
    let fail = |step: usize, modular: String, oracle: String| Verdict::Fail { witness: Divergence { step, modular, oracle } };
    let lang = Proteus::new(consume_all);
    let mut schedule = UpgradeSchedule::empty();
    let (mut us, mut uf, mut ur) = (proteus::Table::new(), proteus::Table::new(), proteus::Table::new());
    for (k, e) in upd {
        match e {
            HeapEntry::Val(v) => us.insert(k.clone(), ProteusDatum::Val(v.clone())),
            HeapEntry::Fun { param, body } => uf.insert(k.clone(), ProteusDatum::Lambda(Lambda::new(param.clone(), body.clone()))),
            HeapEntry::Rec(fs) => ur.insert(k.clone(), ProteusDatum::Record(fs.clone())),
        };
    }
    for (idx, tab) in [(proteus::U_S, us), (proteus::U_F, uf), (proteus::U_R, ur)] {
        if !tab.is_empty() {
            schedule = schedule.with(Trigger::Immediate, idx, ComponentObject::Map(tab));
        }
    }
    let oracle = match oracle_run(t, upd.clone(), consume_all, DEFAULT_FUEL as usize) {
        Ok(r) => r,
        Err(e) => return fail(0, String::new(), e.to_string()),
    };
    let out = match run(&lang, t.clone(), schedule, Scheduler::new(SchedulerKind::First, 0), DEFAULT_FUEL) {
        Ok(o) => o,
        Err(e) => return fail(0, e.to_string(), String::new()),
    };
    let terms = out.trace.terms();
    let snaps = snapshots_along(&lang, &out.trace);
    if terms.len() != oracle.terms.len() {
        return fail(terms.len().min(oracle.terms.len()), format!("{} terms", terms.len()), format!("{} terms", oracle.terms.len()));
    }
    for (i, ((mt, ms), (ot, oh))) in terms.iter().zip(&snaps).zip(oracle.terms.iter().zip(&oracle.heaps)).enumerate() {
        let heap = data_heap(ms);
        if *mt != ot.to_string() || heap != *oh {
            return fail(i, format!("{mt} with {heap:?}"), format!("{ot} with {oh:?}"));
        }
    }
    let printed: Vec<Value> = out.trace.emitted(proteus::OUT).into_iter().filter_map(|d| match d {
        ProteusDatum::Val(v) => Some(v),
        _ => None,
    }).collect();
    if printed != oracle.printed {
        return fail(terms.len(), format!("printed {printed:?}"), format!("printed {:?}", oracle.printed));
    }
    let left = upgrade_heap(&out.snapshot);
    if left != oracle.upd {
        return fail(terms.len(), format!("upgrade data left {left:?}"), format!("upgrade data left {:?}", oracle.upd));
    }
    let same_outcome = matches!(
        (&out.status, &oracle.outcome),
        (crate::engine::Status::Terminated, OracleOutcome::Value(_))
            | (crate::engine::Status::Stuck(_), OracleOutcome::Stuck(_))
            | (crate::engine::Status::FuelExhausted, OracleOutcome::OutOfFuel)
    );
    if !same_outcome {
        return fail(terms.len(), out.status.as_str().into(), format!("{:?}", oracle.outcome));
    }
    Verdict::Pass { checked: terms.len() }
}

/// A generated `(ρ, ρ_u, Δ)`: a program declaring `ρ`, then an upgrade
/// point for `Δ`, then reading every identifier.
#[derive(Debug, Clone)]
pub struct UpdateCase {
    pub program: Term,
    pub upd: Heap,
    pub delta: Delta,
}

pub fn random_update_case(rng: &mut Gen) -> UpdateCase {
    let mut ids: Vec<&str> = IDS.to_vec();
    ids.shuffle(rng);
    let declared = &ids[..rng.gen_range(1..=ids.len())];
    let nat = |rng: &mut Gen| Value::Nat(rng.gen_range(0..100));
    let mut stmts: Vec<Term> = declared.iter().map(|x| Term::var_decl(x, Term::Val(nat(rng)))).collect();
    let upd: Heap = pick(rng, &IDS, 0.5).into_iter().map(|x| (x.to_string(), HeapEntry::Val(nat(rng)))).collect();
    let mut delta = random_delta(rng, declared);
    if delta.is_empty() {
        delta.insert(declared[0].to_string());
    }
    stmts.push(Term::Update { kind: crate::syntax::UpdateKind::Var, delta: delta.clone() });
    if rng.gen_bool(0.5) {
        stmts.push(Term::assign(declared[0], Term::binop(crate::syntax::BinOp::Add, Term::var(declared[0]), Term::nat(1))));
    }
    let sum = declared.iter().skip(1).fold(Term::var(declared[0]), |acc, x| Term::binop(crate::syntax::BinOp::Add, acc, Term::var(x)));
    stmts.push(sum);
    UpdateCase { program: Term::sequence(stmts), upd, delta }
}

pub fn oracle_suite(corpus: &Path, seed: u64) -> Result<Vec<PropertyResult>, String> {
    let mut out: Vec<PropertyResult> = load_proteus_corpus(corpus)?
        .into_iter()
        .map(|(name, t)| PropertyResult::new("oracle", format!("{name}: heap"), differential(&t, &Heap::new(), false)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for consume_all in [false, true] {
        let mut checked = 0;
        let mut failure = None;
        for _ in 0..100 {
            let case = random_update_case(&mut rng);
            match differential(&case.program, &case.upd, consume_all) {
                Verdict::Pass { .. } => checked += 1,
                Verdict::Fail { witness } => {
                    failure = Some(format!("{}: {witness:?}", case.program));
                    break;
                }
            }
        }
        let verdict = match failure {
            None => Verdict::Pass { checked },
            Some(w) => Verdict::Fail { witness: w },
        };
        let name = if consume_all { "update_v, consume all" } else { "update_v" };
        out.push(PropertyResult::new("oracle", name, verdict));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Concurrent runs
// ---------------------------------------------------------------------------

pub const CALL_PROTOCOL: &str = "object a { call m(5) of b in t; read t into x } || object b { m(y) { return y + 1 } }";

/// Terminal states and reachable state count of the one-call system.
pub fn call_protocol_graph() -> Result<(usize, usize), String> {
    let lang = Creol::default();
    let sys = creol::parse(CALL_PROTOCOL).map_err(|e| e.to_string())?.system;
    let g = explore(&lang, sys.clone(), crate::engine::Language::initial_snapshot(&lang, &sys), 200, 100_000).map_err(|e| e.to_string())?;
    Ok((g.of_kind(StateKind::Terminated).len(), g.len()))
}

/// Runs a generated system with `seed` and audits its trace.
pub fn audited_run(seed: u64) -> Result<creol::AuditReport, String> {
    let lang = Creol::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objects = rng.gen_range(2..=4);
    let calls = rng.gen_range(1..=3);
    let sys = creol::random_system(&mut rng, objects, calls);
    let out = run(&lang, sys.clone(), UpgradeSchedule::empty(), Scheduler::new(SchedulerKind::Seeded, seed), DEFAULT_FUEL).map_err(|e| e.to_string())?;
    if !creol::upgrade_numbers_monotone(&out.trace) {
        return Err(format!("{sys}: upgrade numbers decreased"));
    }
    creol::audit_messages(&out.trace).map_err(|e| format!("{sys}: {e}"))
}

pub fn creol_suite(seed: u64, runs: u64) -> Vec<PropertyResult> {
    let confluence = match call_protocol_graph() {
        Ok((1, states)) => Verdict::Pass { checked: states },
        Ok((n, _)) => Verdict::Fail { witness: format!("{n} terminal states") },
        Err(e) => Verdict::Fail { witness: e },
    };
    let mut audits = Verdict::Pass { checked: runs as usize };
    for s in seed..seed + runs {
        if let Err(e) = audited_run(s) {
            audits = Verdict::Fail { witness: format!("seed {s}: {e}") };
            break;
        }
    }
    vec![
        PropertyResult::new("creol-audits", "call protocol confluence", confluence),
        PropertyResult::new("creol-audits", "message conservation and future freshness", audits),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_large_enough() {
        assert!(load_proteus_corpus(&default_corpus()).unwrap().len() >= 30);
    }

    #[test]
    fn mutant_is_caught() {
        let res = no_sudden_jumps_suite(0, 50, true);
        let ev = res.iter().find(|r| r.property == "E_v").unwrap();
        assert!(!ev.passed);
        assert!(ev.witness.is_some());
        assert!(res.iter().filter(|r| r.property != "E_v").all(|r| r.passed));
    }

    #[test]
    fn merged_heap_tags_upgrade_data() {
        let snap = proteus::signature().bottom_snapshot().with(proteus::U_S, ComponentObject::from_pairs([("x", ProteusDatum::Val(Value::Nat(1)))]));
        assert_eq!(merged_heap(&snap).keys().collect::<Vec<_>>(), ["U_S:x"]);
        assert!(data_heap(&snap).is_empty());
    }

    #[test]
    fn unknown_suite_is_rejected() {
        let opts = CheckOptions { corpus: default_corpus(), only: Some("nope".into()), mutant: false, seed: 0 };
        assert!(run_checks(&opts).is_err());
    }
}
