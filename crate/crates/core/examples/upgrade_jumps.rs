//! Jumps: extend a registered endofunctor to a whole snapshot, check that
//! it ignores empty upgrade data, and see that a computation must start
//! with a step.

use dsos::engine::Language;
use dsos::label::{ComponentObject, Morphism};
use dsos::proteus::{self, Proteus, ProteusDatum};
use dsos::syntax::Value;
use dsos::uts::{check_no_sudden_jumps, delta, Computation, Jump};

fn nat(n: u64) -> ProteusDatum {
    ProteusDatum::Val(Value::Nat(n))
}

fn main() {
    let lang = Proteus::default();
    let sig = lang.signature();
    let jump = Jump::new("E_v", delta(["x"]));
    let e = lang.registry().extend(&jump, sig).expect("E_v is registered");

    let snap = sig
        .bottom_snapshot()
        .with(proteus::S, ComponentObject::from_pairs([("x", nat(1)), ("y", nat(2))]))
        .with(proteus::U_S, ComponentObject::from_pairs([("x", nat(9))]));
    println!("before: {}", snap.to_json());
    println!("after {jump}: {}", e.apply(&snap).to_json());

    let spec = lang.registry().lookup("E_v").expect("registered");
    let samples = (0..5).map(|i| (delta(["x"]), vec![ComponentObject::from_pairs([("x", nat(i))])]));
    println!("no sudden jumps: {:?}", check_no_sudden_jumps(spec, samples));

    let c = Computation::starting_at(snap.clone());
    println!("jump first: {:?}", c.clone().append_jump(jump.clone(), lang.registry(), sig).err());
    let c = c.append_step(Morphism::identity(), sig).and_then(|c| c.append_jump(jump, lang.registry(), sig)).expect("step, then jump");
    println!("step then jump ends in: {}", c.target().to_json());
}
