//! Runs a sequential program whose upgrade point receives a new value for
//! `temp` from an external schedule, printing the trace.

use dsos::engine::{run, Language, Scheduler, SchedulerKind, UpgradeSchedule};
use dsos::proteus::{self, Proteus};
use serde_json::json;

fn main() {
    let lang = Proteus::default();
    let program = proteus::parse("var temp := 20; print temp; update{v: temp}; print temp; temp").expect("parses");
    let schedule = UpgradeSchedule::from_json(&lang, &json!([
        {"trigger": {"at_step": 3}, "index": "U_S", "payload": {"temp": 25}}
    ]))
    .expect("valid schedule");

    let out = run(&lang, program, schedule, Scheduler::new(SchedulerKind::First, 0), 1000).expect("runs");
    for e in &out.trace.entries {
        println!("{}", e.pretty());
    }
    println!("status {}, printed {:?}", out.status.as_str(), out.trace.emitted(proteus::OUT));
    println!("signature: {:?}", lang.signature().names());
}
