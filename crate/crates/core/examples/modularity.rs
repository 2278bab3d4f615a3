//! Adding an unused read/write component does not change any run, while a
//! rule pack that writes it is caught at its first step.

use dsos::engine::{modularity_check, WritesFresh};
use dsos::proteus::{self, Proteus};

fn main() {
    let base = Proteus::default();
    let extended = base.extended_with("X").expect("X is fresh");
    let program = proteus::parse("fun inc(n) { n + 1 }; var x := inc(1); x * 3").expect("parses");

    let ok = modularity_check(&base, &extended, program.clone(), "X", 1000);
    println!("unchanged rules: {ok:?}");

    let mutant = WritesFresh { inner: extended, fresh: "X".into() };
    match modularity_check(&base, &mutant, program, "X", 1000) {
        dsos::uts::Verdict::Fail { witness } => println!("mutant fails at step {}:\n{}", witness.step, witness.reason),
        pass => println!("mutant unexpectedly passed: {pass:?}"),
    }
}
