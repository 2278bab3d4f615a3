//! Asynchronous call with a future: one seeded run, then every interleaving.

use dsos::creol::{self, audit_messages, Creol};
use dsos::engine::{explore, run, Language, Scheduler, SchedulerKind, StateKind, UpgradeSchedule};

fn main() {
    let lang = Creol::default();
    let sys = creol::parse("object a { call m(5) of b in t; read t into x } || object b { m(y) { return y + 1 } }")
        .expect("parses")
        .system;

    let out = run(&lang, sys.clone(), UpgradeSchedule::empty(), Scheduler::new(SchedulerKind::Seeded, 42), 1000).expect("runs");
    for e in &out.trace.entries {
        println!("{}", e.pretty());
    }
    println!("audit: {:?}", audit_messages(&out.trace));

    let g = explore(&lang, sys.clone(), lang.initial_snapshot(&sys), 100, 10_000).expect("finite");
    let done = g.of_kind(StateKind::Terminated);
    println!("{} reachable states, {} terminal", g.len(), done.len());
    for i in done {
        println!("  {}", g.states[i].0);
    }
}
