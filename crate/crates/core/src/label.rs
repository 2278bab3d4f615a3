//! Indexed label components, label signatures and morphisms over them.
//!
//! A [`LabelSignature`] is an ordered product of components, each identified by
//! an [`Index`] and carrying one of the basic kinds (read-only, read/write,
//! write-only) or an encapsulated local signature. A [`Morphism`] stores only
//! the components a rule mentions; every other component resolves lazily to
//! the identity on the current [`DataSnapshot`] object.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::encapsulation::{LocalSnapshot, LocalizedMorphism};

/// Everything stored inside component objects or emitted on write-only
/// components.
pub trait Datum: Clone + Eq + Ord + fmt::Debug + Serialize + Send + Sync + 'static {}

impl<T> Datum for T where T: Clone + Eq + Ord + fmt::Debug + Serialize + Send + Sync + 'static {}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("index `{0}` already present in the signature")]
    DuplicateIndex(String),
    #[error("upgrade index `{0}` must be read-only")]
    UpgradeKindViolation(String),
    #[error("unknown index `{0}`")]
    UnknownIndex(String),
    #[error("entry at `{0}` does not match the component kind")]
    KindMismatch(String),
    #[error("morphisms not composable at `{0}`")]
    NotComposable(String),
    #[error("local morphisms not composable at object `{object}`, index `{index}`")]
    LocalNotComposable { object: String, index: String },
    #[error("object `{0}` already carries a non-identity local step")]
    ConflictingLocalStep(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Namespace {
    Data,
    Upgrade,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Index {
    pub name: String,
    pub namespace: Namespace,
}

impl Index {
    pub fn data(name: impl Into<String>) -> Self {
        Index { name: name.into(), namespace: Namespace::Data }
    }

    pub fn upgrade(name: impl Into<String>) -> Self {
        Index { name: name.into(), namespace: Namespace::Upgrade }
    }

    pub fn is_upgrade(&self) -> bool {
        self.namespace == Namespace::Upgrade
    }
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ComponentKind {
    /// Discrete category: only identities.
    ReadOnly,
    /// Pairs category: a unique morphism between any two objects.
    ReadWrite,
    /// Free monoid over the datum type, composed by concatenation.
    WriteOnly,
    /// Functors from object identifiers into the inner signature. Behaves
    /// as a read/write component of the outer signature.
    Encapsulated(Box<LabelSignature>),
}

impl ComponentKind {
    pub fn bottom<V: Datum>(&self) -> ComponentObject<V> {
        match self {
            ComponentKind::ReadOnly | ComponentKind::ReadWrite => ComponentObject::Map(BTreeMap::new()),
            ComponentKind::WriteOnly => ComponentObject::Unit,
            ComponentKind::Encapsulated(_) => ComponentObject::Local(LocalSnapshot::default()),
        }
    }
}

/// One object of a component category.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ComponentObject<V> {
    Map(BTreeMap<String, V>),
    /// The single object of a monoid category.
    Unit,
    Local(LocalSnapshot<V>),
}

impl<V: Datum> ComponentObject<V> {
    pub fn empty_map() -> Self {
        ComponentObject::Map(BTreeMap::new())
    }

    pub fn from_pairs<K: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> Self {
        ComponentObject::Map(pairs.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn as_map(&self) -> Option<&BTreeMap<String, V>> {
        match self {
            ComponentObject::Map(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_local(&self) -> Option<&LocalSnapshot<V>> {
        match self {
            ComponentObject::Local(l) => Some(l),
            _ => None,
        }
    }

    pub fn lookup(&self, key: &str) -> Option<&V> {
        self.as_map().and_then(|m| m.get(key))
    }

    /// Map update `ρ[key ↦ value]`. Non-map objects are returned unchanged.
    pub fn updated(&self, key: impl Into<String>, value: V) -> Self {
        match self {
            ComponentObject::Map(m) => {
                let mut m = m.clone();
                m.insert(key.into(), value);
                ComponentObject::Map(m)
            }
            other => other.clone(),
        }
    }

    /// Information-less objects: the empty map, the monoid's unique object,
    /// and the empty local assignment.
    pub fn is_bottom(&self) -> bool {
        match self {
            ComponentObject::Map(m) => m.is_empty(),
            ComponentObject::Unit => true,
            ComponentObject::Local(l) => l.is_empty(),
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            ComponentObject::Map(m) => {
                let obj: serde_json::Map<String, Json> =
                    m.iter().map(|(k, v)| (k.clone(), datum_json(v))).collect();
                Json::Object(obj)
            }
            ComponentObject::Unit => Json::Null,
            ComponentObject::Local(l) => l.to_json(),
        }
    }
}

pub(crate) fn datum_json<V: Serialize>(v: &V) -> Json {
    serde_json::to_value(v).unwrap_or(Json::Null)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub index: Index,
    pub kind: ComponentKind,
}

/// Ordered product of label components.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelSignature {
    components: Vec<Component>,
}

impl LabelSignature {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The label transformer: append a fresh component, leaving existing
    /// entries untouched.
    pub fn extend(&self, index: Index, kind: ComponentKind) -> Result<Self, LabelError> {
        if self.component(&index.name).is_some() {
            return Err(LabelError::DuplicateIndex(index.name));
        }
        if index.is_upgrade() && kind != ComponentKind::ReadOnly {
            return Err(LabelError::UpgradeKindViolation(index.name));
        }
        let mut components = self.components.clone();
        components.push(Component { index, kind });
        Ok(LabelSignature { components })
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.index.name == name)
    }

    pub fn kind(&self, name: &str) -> Result<&ComponentKind, LabelError> {
        self.component(name)
            .map(|c| &c.kind)
            .ok_or_else(|| LabelError::UnknownIndex(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.component(name).is_some()
    }

    pub fn names(&self) -> BTreeSet<String> {
        self.components.iter().map(|c| c.index.name.clone()).collect()
    }

    pub fn indexes(&self) -> impl Iterator<Item = &Index> {
        self.components.iter().map(|c| &c.index)
    }

    pub fn data_indexes(&self) -> impl Iterator<Item = &Index> {
        self.indexes().filter(|i| !i.is_upgrade())
    }

    pub fn upgrade_indexes(&self) -> impl Iterator<Item = &Index> {
        self.indexes().filter(|i| i.is_upgrade())
    }

    /// Snapshot holding the information-less object of every component.
    pub fn bottom_snapshot<V: Datum>(&self) -> DataSnapshot<V> {
        DataSnapshot {
            objects: self.components.iter().map(|c| (c.index.name.clone(), c.kind.bottom())).collect(),
        }
    }

    pub fn is_subsignature_of(&self, other: &LabelSignature) -> bool {
        self.components.iter().all(|c| other.component(&c.index.name) == Some(c))
    }
}

/// One object per component of a signature.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DataSnapshot<V> {
    objects: BTreeMap<String, ComponentObject<V>>,
}

impl<V> Default for DataSnapshot<V> {
    fn default() -> Self {
        DataSnapshot { objects: BTreeMap::new() }
    }
}

impl<V: Datum> DataSnapshot<V> {
    pub fn get(&self, name: &str) -> Option<&ComponentObject<V>> {
        self.objects.get(name)
    }

    pub fn set(&mut self, name: impl Into<String>, obj: ComponentObject<V>) {
        self.objects.insert(name.into(), obj);
    }

    pub fn with(mut self, name: impl Into<String>, obj: ComponentObject<V>) -> Self {
        self.set(name, obj);
        self
    }

    pub fn remove(&mut self, name: &str) -> Option<ComponentObject<V>> {
        self.objects.remove(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &ComponentObject<V>)> {
        self.objects.iter()
    }

    /// Object at `name`, or the bottom object of its kind when missing.
    pub fn object(&self, sig: &LabelSignature, name: &str) -> Result<ComponentObject<V>, LabelError> {
        let kind = sig.kind(name)?;
        Ok(self.objects.get(name).cloned().unwrap_or_else(|| kind.bottom()))
    }

    pub fn conforms(&self, sig: &LabelSignature) -> bool {
        self.objects.len() == sig.components().len()
            && sig.components().iter().all(|c| {
                matches!(
                    (&c.kind, self.objects.get(&c.index.name)),
                    (ComponentKind::ReadOnly | ComponentKind::ReadWrite, Some(ComponentObject::Map(_)))
                        | (ComponentKind::WriteOnly, Some(ComponentObject::Unit))
                        | (ComponentKind::Encapsulated(_), Some(ComponentObject::Local(_)))
                )
            })
    }

    /// Restriction to the given names.
    pub fn restrict(&self, keep: &BTreeSet<String>) -> Self {
        DataSnapshot {
            objects: self.objects.iter().filter(|(k, _)| keep.contains(*k)).map(|(k, v)| (k.clone(), v.clone())).collect(),
        }
    }

    pub fn to_json(&self) -> Json {
        Json::Object(self.objects.iter().map(|(k, v)| (k.clone(), v.to_json())).collect())
    }
}

/// Per-index part of a morphism.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum MorphismComponent<V> {
    Identity(ComponentObject<V>),
    Pair(ComponentObject<V>, ComponentObject<V>),
    Emit(Vec<V>),
    Local(LocalizedMorphism<V>),
}

impl<V: Datum> MorphismComponent<V> {
    /// Pair constructor; `(a, a)` is the identity on `a`.
    pub fn pair(src: ComponentObject<V>, tgt: ComponentObject<V>) -> Self {
        if src == tgt {
            MorphismComponent::Identity(src)
        } else {
            MorphismComponent::Pair(src, tgt)
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            MorphismComponent::Identity(_) => true,
            MorphismComponent::Pair(a, b) => a == b,
            MorphismComponent::Emit(e) => e.is_empty(),
            MorphismComponent::Local(l) => l.is_identity(),
        }
    }

    fn check_kind(&self, name: &str, kind: &ComponentKind) -> Result<(), LabelError> {
        let ok = matches!(
            (self, kind),
            (MorphismComponent::Identity(_), ComponentKind::ReadOnly | ComponentKind::ReadWrite)
                | (MorphismComponent::Pair(..), ComponentKind::ReadWrite)
                | (MorphismComponent::Emit(_), ComponentKind::WriteOnly)
                | (MorphismComponent::Local(_), ComponentKind::Encapsulated(_))
        );
        if ok {
            Ok(())
        } else {
            Err(LabelError::KindMismatch(name.to_string()))
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            MorphismComponent::Identity(o) => json!({"kind": "read", "obj": o.to_json()}),
            MorphismComponent::Pair(a, b) => json!({"kind": "pair", "src": a.to_json(), "tgt": b.to_json()}),
            MorphismComponent::Emit(e) => json!({"kind": "emit", "elems": e.iter().map(datum_json).collect::<Vec<_>>()}),
            MorphismComponent::Local(l) => l.to_json(),
        }
    }
}

/// A transition label: explicit entries for the mentioned indexes only.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Morphism<V> {
    entries: BTreeMap<String, MorphismComponent<V>>,
}

impl<V> Default for Morphism<V> {
    fn default() -> Self {
        Morphism { entries: BTreeMap::new() }
    }
}

impl<V: Datum> Morphism<V> {
    /// `{...}`: identity on every component.
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, comp: MorphismComponent<V>) -> Self {
        self.entries.insert(name.into(), comp);
        self
    }

    pub fn read(self, name: impl Into<String>, obj: ComponentObject<V>) -> Self {
        self.with(name, MorphismComponent::Identity(obj))
    }

    pub fn write(self, name: impl Into<String>, src: ComponentObject<V>, tgt: ComponentObject<V>) -> Self {
        self.with(name, MorphismComponent::pair(src, tgt))
    }

    pub fn emit(self, name: impl Into<String>, elems: Vec<V>) -> Self {
        self.with(name, MorphismComponent::Emit(elems))
    }

    pub fn local(self, name: impl Into<String>, lm: LocalizedMorphism<V>) -> Self {
        self.with(name, MorphismComponent::Local(lm))
    }

    pub fn entries(&self) -> &BTreeMap<String, MorphismComponent<V>> {
        &self.entries
    }

    pub fn entry(&self, name: &str) -> Option<&MorphismComponent<V>> {
        self.entries.get(name)
    }

    pub fn mentions(&self) -> BTreeSet<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every present entry exists in `sig` with a matching kind, and no
    /// upgrade component is written.
    pub fn validate(&self, sig: &LabelSignature) -> Result<(), LabelError> {
        for (name, comp) in &self.entries {
            let kind = sig.kind(name)?;
            comp.check_kind(name, kind)?;
        }
        Ok(())
    }

    /// The get operation with the three-dots default.
    pub fn get(&self, sig: &LabelSignature, name: &str, snapshot: &DataSnapshot<V>) -> Result<MorphismComponent<V>, LabelError> {
        let kind = sig.kind(name)?;
        if let Some(c) = self.entries.get(name) {
            c.check_kind(name, kind)?;
            return Ok(c.clone());
        }
        Ok(match kind {
            ComponentKind::ReadOnly | ComponentKind::ReadWrite => MorphismComponent::Identity(snapshot.object(sig, name)?),
            ComponentKind::WriteOnly => MorphismComponent::Emit(Vec::new()),
            ComponentKind::Encapsulated(_) => MorphismComponent::Local(LocalizedMorphism::identity()),
        })
    }

    /// Applies the label to `from`: every explicit entry must have `from` as
    /// its source. Returns the target snapshot.
    pub fn target(&self, sig: &LabelSignature, from: &DataSnapshot<V>) -> Result<DataSnapshot<V>, LabelError> {
        let mut out = from.clone();
        for (name, comp) in &self.entries {
            let kind = sig.kind(name)?;
            comp.check_kind(name, kind)?;
            let current = from.object(sig, name)?;
            match comp {
                MorphismComponent::Identity(a) => {
                    if *a != current {
                        return Err(LabelError::NotComposable(name.clone()));
                    }
                }
                MorphismComponent::Pair(a, b) => {
                    if *a != current {
                        return Err(LabelError::NotComposable(name.clone()));
                    }
                    out.set(name.clone(), b.clone());
                }
                MorphismComponent::Emit(_) => {}
                MorphismComponent::Local(lm) => {
                    let ComponentKind::Encapsulated(inner) = kind else {
                        return Err(LabelError::KindMismatch(name.clone()));
                    };
                    let local = current.as_local().cloned().unwrap_or_default();
                    out.set(name.clone(), ComponentObject::Local(lm.apply(inner, &local)?));
                }
            }
        }
        Ok(out)
    }

    pub fn chains_from(&self, sig: &LabelSignature, from: &DataSnapshot<V>) -> bool {
        self.target(sig, from).is_ok()
    }

    /// Composition `self ; next` where `between` is the snapshot reached
    /// after `self`.
    pub fn compose(&self, next: &Morphism<V>, sig: &LabelSignature, between: &DataSnapshot<V>) -> Result<Morphism<V>, LabelError> {
        let mut entries = BTreeMap::new();
        for c in sig.components() {
            let name = &c.index.name;
            let (first, second) = (self.entries.get(name), next.entries.get(name));
            if first.is_none() && second.is_none() {
                continue;
            }
            let a = self.get(sig, name, between)?;
            let b = next.get(sig, name, between)?;
            let composed = match (&c.kind, a, b) {
                (ComponentKind::WriteOnly, MorphismComponent::Emit(mut x), MorphismComponent::Emit(y)) => {
                    x.extend(y);
                    MorphismComponent::Emit(x)
                }
                (ComponentKind::Encapsulated(inner), MorphismComponent::Local(x), MorphismComponent::Local(y)) => {
                    let local = between.object(sig, name)?.as_local().cloned().unwrap_or_default();
                    MorphismComponent::Local(x.compose(&y, inner, &local)?)
                }
                (ComponentKind::ReadOnly, MorphismComponent::Identity(x), MorphismComponent::Identity(y)) => {
                    if x != y {
                        return Err(LabelError::NotComposable(name.clone()));
                    }
                    MorphismComponent::Identity(x)
                }
                (ComponentKind::ReadWrite, x, y) => {
                    let (src, mid1) = endpoints(&x);
                    let (mid2, tgt) = endpoints(&y);
                    if mid1 != mid2 {
                        return Err(LabelError::NotComposable(name.clone()));
                    }
                    MorphismComponent::pair(src, tgt)
                }
                _ => return Err(LabelError::KindMismatch(name.clone())),
            };
            entries.insert(name.clone(), composed);
        }
        for name in self.entries.keys().chain(next.entries.keys()) {
            if !sig.contains(name) {
                return Err(LabelError::UnknownIndex(name.clone()));
            }
        }
        Ok(Morphism { entries })
    }

    /// Drops entries outside `keep`; `keep` must be part of `sig`.
    pub fn project(&self, sig: &LabelSignature, keep: &BTreeSet<String>) -> Result<Morphism<V>, LabelError> {
        if let Some(missing) = keep.iter().find(|k| !sig.contains(k)) {
            return Err(LabelError::UnknownIndex(missing.clone()));
        }
        Ok(Morphism {
            entries: self.entries.iter().filter(|(k, _)| keep.contains(*k)).map(|(k, v)| (k.clone(), v.clone())).collect(),
        })
    }

    /// Views the morphism under a larger signature; new indexes default to
    /// identities.
    pub fn embed(&self, into: &LabelSignature) -> Result<Morphism<V>, LabelError> {
        self.validate(into)?;
        Ok(self.clone())
    }

    /// Unobservable: every component resolves to an identity.
    pub fn is_identity(&self) -> bool {
        self.entries.values().all(MorphismComponent::is_identity)
    }

    /// Concatenation of every element emitted at `name`.
    pub fn emitted(&self, name: &str) -> &[V] {
        match self.entries.get(name) {
            Some(MorphismComponent::Emit(e)) => e,
            _ => &[],
        }
    }

    pub fn to_json(&self) -> Json {
        Json::Object(self.entries.iter().map(|(k, v)| (k.clone(), v.to_json())).collect())
    }

    /// Rendering in the `{S=ρ … S=ρ′}` notation.
    pub fn pretty(&self) -> String {
        let mut sources = Vec::new();
        let mut targets = Vec::new();
        for (name, comp) in &self.entries {
            match comp {
                MorphismComponent::Identity(o) => sources.push(format!("{name}={}", o.to_json())),
                MorphismComponent::Pair(a, b) => {
                    sources.push(format!("{name}={}", a.to_json()));
                    targets.push(format!("{name}={}", b.to_json()));
                }
                MorphismComponent::Emit(e) => {
                    targets.push(format!("{name}={}", Json::Array(e.iter().map(datum_json).collect())))
                }
                MorphismComponent::Local(l) => sources.push(format!("{name}={}", l.to_json())),
            }
        }
        let mut out = String::from("{");
        out.push_str(&sources.join(", "));
        if !sources.is_empty() {
            out.push(' ');
        }
        out.push('…');
        if !targets.is_empty() {
            out.push(' ');
            out.push_str(&targets.join(", "));
        }
        out.push('}');
        out
    }
}

fn endpoints<V: Datum>(c: &MorphismComponent<V>) -> (ComponentObject<V>, ComponentObject<V>) {
    match c {
        MorphismComponent::Identity(o) => (o.clone(), o.clone()),
        MorphismComponent::Pair(a, b) => (a.clone(), b.clone()),
        _ => unreachable!("endpoints only used on read/write components"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type Obj = ComponentObject<u32>;

    fn store(pairs: &[(&str, u32)]) -> Obj {
        ComponentObject::from_pairs(pairs.iter().map(|(k, v)| (k.to_string(), *v)))
    }

    fn sig_sf() -> LabelSignature {
        LabelSignature::empty()
            .extend(Index::data("S"), ComponentKind::ReadWrite)
            .unwrap()
            .extend(Index::data("F"), ComponentKind::ReadWrite)
            .unwrap()
    }

    #[test]
    fn extend_appends_in_order() {
        let one = LabelSignature::empty().extend(Index::data("S"), ComponentKind::ReadWrite).unwrap();
        let two = one.extend(Index::data("F"), ComponentKind::ReadWrite).unwrap();
        let names: Vec<_> = two.indexes().map(|i| i.name.as_str()).collect();
        assert_eq!(names, ["S", "F"]);
        assert_eq!(two.components()[0], one.components()[0]);
    }

    #[test]
    fn extend_rejects_duplicates_and_writable_upgrades() {
        let one = LabelSignature::empty().extend(Index::data("S"), ComponentKind::ReadWrite).unwrap();
        assert_eq!(one.extend(Index::data("S"), ComponentKind::ReadOnly), Err(LabelError::DuplicateIndex("S".into())));
        assert_eq!(one.extend(Index::upgrade("S"), ComponentKind::ReadOnly), Err(LabelError::DuplicateIndex("S".into())));
        assert_eq!(
            one.extend(Index::upgrade("U_S"), ComponentKind::ReadWrite),
            Err(LabelError::UpgradeKindViolation("U_S".into()))
        );
    }

    #[test]
    fn get_returns_entry_or_three_dots_default() {
        let sig = sig_sf();
        let m = Morphism::identity().write("S", store(&[("x", 1)]), store(&[("x", 2)]));
        let snap = sig.bottom_snapshot::<u32>().with("F", store(&[("f", 9)]));
        assert_eq!(m.get(&sig, "S", &snap).unwrap(), MorphismComponent::Pair(store(&[("x", 1)]), store(&[("x", 2)])));
        assert_eq!(m.get(&sig, "F", &snap).unwrap(), MorphismComponent::Identity(store(&[("f", 9)])));
        assert_eq!(m.get(&sig, "Z", &snap), Err(LabelError::UnknownIndex("Z".into())));
    }

    #[test]
    fn compose_pairs_and_emits() {
        let sig = sig_sf().extend(Index::data("Out"), ComponentKind::WriteOnly).unwrap();
        let (a, b, c) = (store(&[("x", 1)]), store(&[("x", 2)]), store(&[("x", 3)]));
        let snap = sig.bottom_snapshot::<u32>().with("S", b.clone());
        let m1 = Morphism::identity().write("S", a.clone(), b.clone()).emit("Out", vec![1]);
        let m2 = Morphism::identity().write("S", b.clone(), c.clone()).emit("Out", vec![2]);
        let m = m1.compose(&m2, &sig, &snap).unwrap();
        assert_eq!(m.entry("S"), Some(&MorphismComponent::Pair(a.clone(), c.clone())));
        assert_eq!(m.emitted("Out"), &[1, 2]);

        let bad = Morphism::identity().write("S", c.clone(), a.clone());
        assert_eq!(m1.compose(&bad, &sig, &snap), Err(LabelError::NotComposable("S".into())));
    }

    #[test]
    fn project_embed_round_trip() {
        let sig = sig_sf();
        let wide = sig.extend(Index::data("X"), ComponentKind::ReadWrite).unwrap();
        let m = Morphism::identity().write("S", store(&[]), store(&[("x", 1)]));
        let e = m.embed(&wide).unwrap();
        let snap = wide.bottom_snapshot::<u32>().with("X", store(&[("d", 0)]));
        assert_eq!(e.get(&wide, "X", &snap).unwrap(), MorphismComponent::Identity(store(&[("d", 0)])));
        let keep: BTreeSet<String> = ["S".to_string(), "F".to_string()].into();
        assert_eq!(e.project(&wide, &keep).unwrap(), m);

        let two = m.clone().write("X", store(&[]), store(&[("u", 1)]));
        assert_eq!(two.project(&wide, &["S".to_string()].into()).unwrap(), m);
        assert!(m.project(&sig, &["Q".to_string()].into()).is_err());
    }

    #[test]
    fn identity_detection_and_target() {
        let sig = sig_sf();
        let snap = sig.bottom_snapshot::<u32>().with("S", store(&[("x", 1)]));
        let read = Morphism::identity().read("S", store(&[("x", 1)]));
        assert!(read.is_identity());
        assert_eq!(read.target(&sig, &snap).unwrap(), snap);
        let stale = Morphism::identity().read("S", store(&[("x", 5)]));
        assert!(!stale.chains_from(&sig, &snap));
    }

    #[test]
    fn json_shape() {
        let m = Morphism::identity().write("S", store(&[("b", 2), ("a", 1)]), store(&[]));
        assert_eq!(
            m.to_json().to_string(),
            r#"{"S":{"kind":"pair","src":{"a":1,"b":2},"tgt":{}}}"#
        );
    }
}
