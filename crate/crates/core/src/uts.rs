//! Upgrade transition systems: jumps labelled by endofunctors over the
//! discretized data × upgrade product.
//!
//! An [`EndofunctorSpec`] is a Δ-parameterized family of total functions on
//! tuples of component objects. Extending a spec pairs it with the identity on
//! every other component of a signature; that extension is what a [`Jump`]
//! applies to the whole snapshot.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::label::{ComponentObject, Datum, DataSnapshot, Index, LabelError, LabelSignature, Morphism};

/// Identifiers named at an upgrade point.
pub type Delta = BTreeSet<String>;

pub fn delta<I, S>(ids: I) -> Delta
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    ids.into_iter().map(Into::into).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UtsError {
    #[error("endofunctor `{0}` is already registered")]
    DuplicateName(String),
    #[error("endofunctor `{0}` uses an index outside its namespace")]
    NamespaceViolation(String),
    #[error("endofunctor `{0}` needs nonempty data and upgrade index sets")]
    EmptyIndexSet(String),
    #[error("unknown endofunctor `{0}`")]
    UnknownEndofunctor(String),
    #[error("a computation cannot begin with a jump")]
    JumpBeforeFirstStep,
    #[error(transparent)]
    Label(#[from] LabelError),
}

/// Object-level action of an endofunctor. Receives the objects at the data
/// indexes followed by those at the upgrade indexes, and returns a tuple of
/// the same shape.
pub type ApplyFn<V> = Arc<dyn Fn(&Delta, &[ComponentObject<V>]) -> Vec<ComponentObject<V>> + Send + Sync>;

#[derive(Clone)]
pub struct EndofunctorSpec<V> {
    pub name: String,
    pub data_indexes: Vec<Index>,
    pub upgrade_indexes: Vec<Index>,
    apply: ApplyFn<V>,
}

impl<V> fmt::Debug for EndofunctorSpec<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EndofunctorSpec")
            .field("name", &self.name)
            .field("data_indexes", &self.data_indexes)
            .field("upgrade_indexes", &self.upgrade_indexes)
            .finish_non_exhaustive()
    }
}

impl<V: Datum> EndofunctorSpec<V> {
    pub fn new(
        name: impl Into<String>,
        data_indexes: Vec<Index>,
        upgrade_indexes: Vec<Index>,
        apply: impl Fn(&Delta, &[ComponentObject<V>]) -> Vec<ComponentObject<V>> + Send + Sync + 'static,
    ) -> Self {
        EndofunctorSpec { name: name.into(), data_indexes, upgrade_indexes, apply: Arc::new(apply) }
    }

    /// Data indexes followed by upgrade indexes, the tuple order of `apply`.
    pub fn indexes(&self) -> impl Iterator<Item = &Index> {
        self.data_indexes.iter().chain(self.upgrade_indexes.iter())
    }

    pub fn arity(&self) -> usize {
        self.data_indexes.len() + self.upgrade_indexes.len()
    }

    pub fn apply(&self, delta: &Delta, tuple: &[ComponentObject<V>]) -> Vec<ComponentObject<V>> {
        (self.apply)(delta, tuple)
    }

    fn validate(&self) -> Result<(), UtsError> {
        if self.data_indexes.is_empty() || self.upgrade_indexes.is_empty() {
            return Err(UtsError::EmptyIndexSet(self.name.clone()));
        }
        if self.data_indexes.iter().any(Index::is_upgrade) || self.upgrade_indexes.iter().any(|i| !i.is_upgrade()) {
            return Err(UtsError::NamespaceViolation(self.name.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Registry<V> {
    specs: BTreeMap<String, EndofunctorSpec<V>>,
}

impl<V> Default for Registry<V> {
    fn default() -> Self {
        Registry { specs: BTreeMap::new() }
    }
}

impl<V: Datum> Registry<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(mut self, spec: EndofunctorSpec<V>) -> Result<Self, UtsError> {
        spec.validate()?;
        if self.specs.contains_key(&spec.name) {
            return Err(UtsError::DuplicateName(spec.name));
        }
        self.specs.insert(spec.name.clone(), spec);
        Ok(self)
    }

    pub fn lookup(&self, name: &str) -> Option<&EndofunctorSpec<V>> {
        self.specs.get(name)
    }

    pub fn specs(&self) -> impl Iterator<Item = &EndofunctorSpec<V>> {
        self.specs.values()
    }

    pub fn extend(&self, jump: &Jump, sig: &LabelSignature) -> Result<ExtendedEndofunctor<V>, UtsError> {
        let spec = self.lookup(&jump.name).ok_or_else(|| UtsError::UnknownEndofunctor(jump.name.clone()))?;
        extend_endofunctor(spec, &jump.delta, sig)
    }
}

/// A jump transition label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Jump {
    pub name: String,
    pub delta: Delta,
}

impl Jump {
    pub fn new(name: impl Into<String>, delta: Delta) -> Self {
        Jump { name: name.into(), delta }
    }

    pub fn to_json(&self) -> Json {
        json!({ "name": self.name, "delta": self.delta.iter().collect::<Vec<_>>() })
    }
}

impl fmt::Display for Jump {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<&str> = self.delta.iter().map(String::as_str).collect();
        write!(f, "{}[{}]", self.name, ids.join(","))
    }
}

/// A spec paired with the identity on the rest of a signature, as a total
/// function on full snapshots.
#[derive(Clone)]
pub struct ExtendedEndofunctor<V> {
    parts: Vec<(EndofunctorSpec<V>, Delta)>,
}

impl<V: Datum> ExtendedEndofunctor<V> {
    pub fn identity() -> Self {
        ExtendedEndofunctor { parts: Vec::new() }
    }

    pub fn apply(&self, snapshot: &DataSnapshot<V>) -> DataSnapshot<V> {
        let mut out = snapshot.clone();
        for (spec, delta) in &self.parts {
            let tuple: Vec<ComponentObject<V>> = spec
                .indexes()
                .map(|i| out.get(&i.name).cloned().unwrap_or_else(ComponentObject::empty_map))
                .collect();
            let image = spec.apply(delta, &tuple);
            for (idx, obj) in spec.indexes().zip(image) {
                out.set(idx.name.clone(), obj);
            }
        }
        out
    }

    /// `self` then `next`.
    pub fn then(&self, next: &ExtendedEndofunctor<V>) -> Self {
        let mut parts = self.parts.clone();
        parts.extend(next.parts.iter().cloned());
        ExtendedEndofunctor { parts }
    }
}

pub fn extend_endofunctor<V: Datum>(spec: &EndofunctorSpec<V>, delta: &Delta, sig: &LabelSignature) -> Result<ExtendedEndofunctor<V>, UtsError> {
    if let Some(missing) = spec.indexes().find(|i| !sig.contains(&i.name)) {
        return Err(LabelError::UnknownIndex(missing.name.clone()).into());
    }
    Ok(ExtendedEndofunctor { parts: vec![(spec.clone(), delta.clone())] })
}

/// Function composition of two extensions: `e1` is applied first.
pub fn compose_extended<V: Datum>(e1: &ExtendedEndofunctor<V>, e2: &ExtendedEndofunctor<V>) -> ExtendedEndofunctor<V> {
    e1.then(e2)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict<W> {
    Pass { checked: usize },
    Fail { witness: W },
}

impl<W> Verdict<W> {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass { .. })
    }
}

/// Witness of a sudden jump: the Δ and data tuple on which the endofunctor moved
/// away from `(d, u⊥)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuddenJump<V> {
    pub delta: Delta,
    pub data: Vec<ComponentObject<V>>,
    pub image: Vec<ComponentObject<V>>,
}

/// Checks `E((d, u⊥)) = (d, u⊥)` on every generated `(Δ, d)`.
pub fn check_no_sudden_jumps<V: Datum>(
    spec: &EndofunctorSpec<V>,
    samples: impl IntoIterator<Item = (Delta, Vec<ComponentObject<V>>)>,
) -> Verdict<SuddenJump<V>> {
    let bottoms: Vec<ComponentObject<V>> = spec.upgrade_indexes.iter().map(|_| ComponentObject::empty_map()).collect();
    let mut checked = 0;
    for (delta, data) in samples {
        let mut tuple = data.clone();
        tuple.extend(bottoms.iter().cloned());
        let image = spec.apply(&delta, &tuple);
        if image != tuple {
            return Verdict::Fail { witness: SuddenJump { delta, data, image } };
        }
        checked += 1;
    }
    Verdict::Pass { checked }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ComputationEntry<V> {
    Step(Morphism<V>),
    Jump(Jump),
}

/// A sequence of steps and jumps that starts with a step, with the target
/// snapshot cached.
#[derive(Debug, Clone)]
pub struct Computation<V> {
    initial: DataSnapshot<V>,
    entries: Vec<ComputationEntry<V>>,
    target: DataSnapshot<V>,
}

impl<V: Datum> Computation<V> {
    pub fn starting_at(initial: DataSnapshot<V>) -> Self {
        Computation { target: initial.clone(), initial, entries: Vec::new() }
    }

    pub fn initial(&self) -> &DataSnapshot<V> {
        &self.initial
    }

    pub fn entries(&self) -> &[ComputationEntry<V>] {
        &self.entries
    }

    pub fn target(&self) -> &DataSnapshot<V> {
        &self.target
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn append_step(mut self, m: Morphism<V>, sig: &LabelSignature) -> Result<Self, UtsError> {
        self.target = m.target(sig, &self.target)?;
        self.entries.push(ComputationEntry::Step(m));
        Ok(self)
    }

    pub fn append_jump(mut self, jump: Jump, registry: &Registry<V>, sig: &LabelSignature) -> Result<Self, UtsError> {
        if self.entries.is_empty() {
            return Err(UtsError::JumpBeforeFirstStep);
        }
        let e = registry.extend(&jump, sig)?;
        self.target = e.apply(&self.target);
        self.entries.push(ComputationEntry::Jump(jump));
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::ComponentKind;

    type Obj = ComponentObject<u32>;

    fn store(pairs: &[(&str, u32)]) -> Obj {
        ComponentObject::from_pairs(pairs.iter().map(|(k, v)| (k.to_string(), *v)))
    }

    // Overwrites data bindings named in Δ from the upgrade map, consuming them.
    fn overwrite(name: &str, data: &str, upd: &str) -> EndofunctorSpec<u32> {
        EndofunctorSpec::new(name, vec![Index::data(data)], vec![Index::upgrade(upd)], |delta, t| {
            let (d, u) = (t[0].as_map().unwrap(), t[1].as_map().unwrap());
            let mut d = d.clone();
            let mut u = u.clone();
            for x in delta {
                if let Some(v) = u.remove(x) {
                    d.insert(x.clone(), v);
                }
            }
            vec![ComponentObject::Map(d), ComponentObject::Map(u)]
        })
    }

    fn sig() -> LabelSignature {
        LabelSignature::empty()
            .extend(Index::data("S"), ComponentKind::ReadWrite)
            .and_then(|s| s.extend(Index::data("Out"), ComponentKind::WriteOnly))
            .and_then(|s| s.extend(Index::upgrade("U_S"), ComponentKind::ReadOnly))
            .unwrap()
    }

    #[test]
    fn register_and_lookup() {
        let r = Registry::new().register(overwrite("E", "S", "U_S")).unwrap();
        assert_eq!(r.lookup("E").unwrap().name, "E");
        assert_eq!(r.clone().register(overwrite("E", "S", "U_S")).unwrap_err(), UtsError::DuplicateName("E".into()));
        let bad = EndofunctorSpec::<u32>::new("B", vec![Index::upgrade("U_S")], vec![Index::upgrade("U_F")], |_, t| t.to_vec());
        assert_eq!(Registry::new().register(bad).unwrap_err(), UtsError::NamespaceViolation("B".into()));
    }

    #[test]
    fn extension_is_identity_elsewhere() {
        let s = sig();
        let spec = overwrite("E", "S", "U_S");
        let e = extend_endofunctor(&spec, &delta(["x"]), &s).unwrap();
        let snap = s.bottom_snapshot::<u32>().with("S", store(&[("x", 1), ("y", 3)])).with("U_S", store(&[("x", 2)]));
        let out = e.apply(&snap);
        assert_eq!(out.get("S"), Some(&store(&[("x", 2), ("y", 3)])));
        assert_eq!(out.get("U_S"), Some(&store(&[])));
        assert_eq!(out.get("Out"), Some(&ComponentObject::Unit));

        let quiet = snap.clone().with("U_S", store(&[]));
        assert_eq!(e.apply(&quiet), quiet);

        let narrow = LabelSignature::empty().extend(Index::data("S"), ComponentKind::ReadWrite).unwrap();
        assert!(matches!(extend_endofunctor(&spec, &delta(["x"]), &narrow), Err(UtsError::Label(LabelError::UnknownIndex(_)))));
    }

    #[test]
    fn sudden_jump_detection() {
        let good = overwrite("E", "S", "U_S");
        let samples = vec![(delta(["x"]), vec![store(&[("x", 1)])])];
        assert!(check_no_sudden_jumps(&good, samples.clone()).passed());
        let broken = EndofunctorSpec::<u32>::new("Bad", vec![Index::data("S")], vec![Index::upgrade("U_S")], |_, t| {
            vec![ComponentObject::empty_map(), t[1].clone()]
        });
        match check_no_sudden_jumps(&broken, samples) {
            Verdict::Fail { witness } => assert_eq!(witness.data, vec![store(&[("x", 1)])]),
            other => panic!("expected failure, got {other:?}"),
        }
        assert_eq!(check_no_sudden_jumps(&broken, Vec::new()), Verdict::Pass { checked: 0 });
    }

    #[test]
    fn computation_grammar() {
        let s = sig();
        let r = Registry::new().register(overwrite("E_v", "S", "U_S")).unwrap();
        let c0 = s.bottom_snapshot::<u32>().with("U_S", store(&[("x", 2)]));
        let jump = Jump::new("E_v", delta(["x"]));
        assert_eq!(
            Computation::starting_at(c0.clone()).append_jump(jump.clone(), &r, &s).unwrap_err(),
            UtsError::JumpBeforeFirstStep
        );
        let c = Computation::starting_at(c0)
            .append_step(Morphism::identity().write("S", store(&[]), store(&[("x", 1)])), &s)
            .unwrap()
            .append_jump(jump, &r, &s)
            .unwrap();
        assert_eq!(c.target().get("S"), Some(&store(&[("x", 2)])));
        assert_eq!(c.entries().len(), 2);
        let stale = Morphism::identity().write("S", store(&[]), store(&[("z", 1)]));
        assert!(c.append_step(stale, &s).is_err());
    }
}
