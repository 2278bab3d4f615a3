//! Per-object local state: localize a step to one object, merge steps of
//! two objects and create a new one.

use dsos::encapsulation::{LocalSnapshot, LocalizedMorphism, ObjectId};
use dsos::label::{ComponentKind, ComponentObject, Index, LabelSignature, Morphism};

fn main() {
    let inner = LabelSignature::empty().extend(Index::data("S"), ComponentKind::ReadWrite).expect("fresh index");
    let empty = inner.bottom_snapshot::<u64>();
    let locals = LocalSnapshot::default().with(ObjectId::new("a"), empty.clone()).with(ObjectId::new("b"), empty.clone());

    let set = |n| Morphism::identity().write("S", ComponentObject::empty_map(), ComponentObject::from_pairs([("x", n)]));
    let a_only = LocalizedMorphism::localize("a".into(), set(1));
    let after = a_only.apply(&inner, &locals).expect("a exists");
    println!("a steps alone: {}", after.to_json());

    let both = a_only.merge("b".into(), set(2)).expect("different objects");
    println!("a and b together: {}", both.apply(&inner, &locals).expect("both exist").to_json());

    let spawn = both.merge_all(&LocalizedMorphism::create("c".into(), empty)).expect("c is new");
    println!("with a new object: {}", spawn.to_json());
    println!("objects afterwards: {:?}", spawn.apply(&inner, &locals).expect("applies").ids().collect::<Vec<_>>());
}
