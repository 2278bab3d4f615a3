//! Differential run against the single-heap interpreter, first on a
//! corpus file, then on a generated upgrade case under both consumption
//! policies.

use dsos::checks::{self, differential, random_update_case, Gen};
use dsos::engine::oracle::Heap;
use rand::SeedableRng;

fn main() {
    let corpus = checks::load_proteus_corpus(&checks::default_corpus()).expect("corpus loads");
    let (name, program) = corpus.iter().find(|(n, _)| n == "mixed").expect("shipped");
    println!("{name}: {:?}", differential(program, &Heap::new(), false));

    let mut rng = Gen::seed_from_u64(7);
    let case = random_update_case(&mut rng);
    println!("program: {}", case.program);
    println!("upgrade data: {:?}, delta {:?}", case.upd, case.delta);
    for consume_all in [false, true] {
        println!("consume_all={consume_all}: {:?}", differential(&case.program, &case.upd, consume_all));
    }
}
