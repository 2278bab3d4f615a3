//! A running sensor object gets a new setTemp and an avgTemp method at its
//! class's upgrade point, then the same upgrade guarded by a class that is
//! never loaded.

use std::fs;

use dsos::checks::default_corpus;
use dsos::creol::{self, Creol, CreolDatum};
use dsos::engine::{run, Scheduler, SchedulerKind, TraceEntry, UpgradeSchedule};
use dsos::encapsulation::ObjectId;

fn scenario(name: &str, schedule: &str) {
    let dir = default_corpus();
    let lang = Creol::default();
    let src = fs::read_to_string(dir.join("creol").join(name)).expect("corpus file");
    let sys = creol::parse(&src).expect("parses").system;
    let json = serde_json::from_str(&fs::read_to_string(dir.join("schedules").join(schedule)).expect("schedule file")).expect("json");
    let sched = UpgradeSchedule::from_json(&lang, &json).expect("valid");
    let out = run(&lang, sys, sched, Scheduler::new(SchedulerKind::First, 0), 10_000).expect("runs");

    println!("== {name}: {}", out.status.as_str());
    for e in &out.trace.entries {
        if let TraceEntry::Jump { jump, before, after, .. } = e {
            println!("jump {jump}, changed state: {}", before != after);
        }
    }
    let locals = out.snapshot.get(creol::E).and_then(|e| e.as_local()).expect("objects");
    let store = locals.get(&ObjectId::new("main")).and_then(|l| l.get(creol::S)).expect("store");
    for x in ["g1", "avg", "g2"] {
        if let Some(CreolDatum::Val(v)) = store.lookup(x) {
            println!("{x} = {v}");
        }
    }
}

fn main() {
    scenario("temperature.creol", "temperature_up.json");
    scenario("temperature_guard.creol", "temperature_guard_up.json");
}
