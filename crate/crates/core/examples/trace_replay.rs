//! Traces as JSON Lines, and replaying a trace against the registry.

use dsos::engine::{replay, run, Scheduler, SchedulerKind, Trigger, UpgradeSchedule};
use dsos::engine::Language;
use dsos::proteus::{self, Proteus};
use serde_json::json;

fn main() {
    let lang = Proteus::default();
    let program = proteus::parse("fun f(x) { x + 1 }; update{f: f}; f(1)").expect("parses");
    let payload = lang.parse_payload(proteus::U_F, &json!({"f": {"param": "x", "body": "x * 10"}})).expect("valid payload");
    let schedule = UpgradeSchedule::empty().with(Trigger::AtFirstUpgradePoint, proteus::U_F, payload);

    let out = run(&lang, program, schedule, Scheduler::new(SchedulerKind::Seeded, 0), 100).expect("runs");
    print!("{}", out.trace.to_jsonl());
    let replayed = replay(&lang, &out.trace).expect("labels chain and jumps recompute");
    println!("replay matches final snapshot: {}", replayed == out.snapshot);
    println!("result: {}", out.term);
}
