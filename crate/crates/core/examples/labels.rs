//! Label categories: build a signature, compose two step morphisms through
//! an intermediate snapshot and project a component away.

use std::collections::BTreeSet;

use dsos::label::{ComponentKind, ComponentObject, Index, LabelSignature, Morphism};

fn store(pairs: &[(&str, u64)]) -> ComponentObject<u64> {
    ComponentObject::from_pairs(pairs.iter().map(|(k, v)| (k.to_string(), *v)))
}

fn main() {
    let sig = LabelSignature::empty()
        .extend(Index::data("S"), ComponentKind::ReadWrite)
        .and_then(|s| s.extend(Index::data("Env"), ComponentKind::ReadOnly))
        .and_then(|s| s.extend(Index::data("Out"), ComponentKind::WriteOnly))
        .expect("distinct indexes");

    let start = sig.bottom_snapshot().with("Env", store(&[("debug", 1)]));
    let declare = Morphism::identity().write("S", store(&[]), store(&[("x", 1)]));
    let between = declare.target(&sig, &start).expect("chains");
    let print = Morphism::identity().read("S", store(&[("x", 1)])).emit("Out", vec![1]);

    let both = declare.compose(&print, &sig, &between).expect("composable");
    println!("first:    {}", declare.pretty());
    println!("second:   {}", print.pretty());
    println!("composed: {}", both.pretty());

    let keep: BTreeSet<String> = ["S".to_string()].into();
    println!("only S:   {}", both.project(&sig, &keep).expect("known indexes").pretty());

    // A read that disagrees with the snapshot does not chain.
    let stale = Morphism::identity().read("S", store(&[("x", 7)]));
    println!("stale read chains: {}", stale.chains_from(&sig, &between));
}
