//! The encapsulating construction.
//!
//! Objects of the encapsulated category assign one local [`DataSnapshot`] to
//! each live object identifier; morphisms assign one local morphism to each
//! identifier (absent identifiers step by the identity). Object creation is a
//! [`LocalStep::Create`] entry: the identifier had no local data before.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Value as Json};

use crate::label::{ComponentKind, Datum, DataSnapshot, LabelError, LabelSignature, Morphism, MorphismComponent};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectId(pub String);

impl ObjectId {
    pub fn new(name: impl Into<String>) -> Self {
        ObjectId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ObjectId {
    fn from(s: &str) -> Self {
        ObjectId(s.to_string())
    }
}

/// A functor from the discrete category of object identifiers into the
/// inner label category: one local snapshot per live object.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LocalSnapshot<V> {
    objects: BTreeMap<ObjectId, DataSnapshot<V>>,
}

impl<V> Default for LocalSnapshot<V> {
    fn default() -> Self {
        LocalSnapshot { objects: BTreeMap::new() }
    }
}

impl<V: Datum> LocalSnapshot<V> {
    pub fn get(&self, o: &ObjectId) -> Option<&DataSnapshot<V>> {
        self.objects.get(o)
    }

    pub fn insert(&mut self, o: ObjectId, snap: DataSnapshot<V>) {
        self.objects.insert(o, snap);
    }

    pub fn with(mut self, o: ObjectId, snap: DataSnapshot<V>) -> Self {
        self.insert(o, snap);
        self
    }

    pub fn contains(&self, o: &ObjectId) -> bool {
        self.objects.contains_key(o)
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ObjectId, &DataSnapshot<V>)> {
        self.objects.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &ObjectId> {
        self.objects.keys()
    }

    pub fn conforms(&self, inner: &LabelSignature) -> bool {
        self.objects.values().all(|s| s.conforms(inner))
    }

    pub fn to_json(&self) -> Json {
        Json::Object(self.objects.iter().map(|(o, s)| (o.0.clone(), s.to_json())).collect())
    }
}

/// Per-object part of a localized morphism.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum LocalStep<V> {
    Step(Morphism<V>),
    /// The object is created with the given local data.
    Create(DataSnapshot<V>),
}

/// A natural transformation between two local assignments, stored only
/// for the identifiers it constrains.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LocalizedMorphism<V> {
    per_object: BTreeMap<ObjectId, LocalStep<V>>,
}

impl<V> Default for LocalizedMorphism<V> {
    fn default() -> Self {
        LocalizedMorphism { per_object: BTreeMap::new() }
    }
}

impl<V: Datum> LocalizedMorphism<V> {
    pub fn identity() -> Self {
        Self::default()
    }

    /// `o:X`.
    pub fn localize(o: ObjectId, x: Morphism<V>) -> Self {
        let mut per_object = BTreeMap::new();
        if !x.is_empty() {
            per_object.insert(o, LocalStep::Step(x));
        }
        LocalizedMorphism { per_object }
    }

    pub fn create(o: ObjectId, init: DataSnapshot<V>) -> Self {
        LocalizedMorphism { per_object: [(o, LocalStep::Create(init))].into() }
    }

    /// `η[o:X]`.
    pub fn merge(&self, o: ObjectId, x: Morphism<V>) -> Result<Self, LabelError> {
        match self.per_object.get(&o) {
            Some(LocalStep::Step(m)) if m.is_identity() => {}
            None => {}
            Some(_) => return Err(LabelError::ConflictingLocalStep(o.0)),
        }
        let mut per_object = self.per_object.clone();
        if x.is_empty() {
            per_object.remove(&o);
        } else {
            per_object.insert(o, LocalStep::Step(x));
        }
        Ok(LocalizedMorphism { per_object })
    }

    /// Union with a morphism constraining disjoint identifiers.
    pub fn merge_all(&self, other: &LocalizedMorphism<V>) -> Result<Self, LabelError> {
        let mut out = self.clone();
        for (o, step) in &other.per_object {
            match step {
                LocalStep::Step(m) => out = out.merge(o.clone(), m.clone())?,
                LocalStep::Create(_) => {
                    if out.per_object.contains_key(o) {
                        return Err(LabelError::ConflictingLocalStep(o.0.clone()));
                    }
                    out.per_object.insert(o.clone(), step.clone());
                }
            }
        }
        Ok(out)
    }

    pub fn entries(&self) -> &BTreeMap<ObjectId, LocalStep<V>> {
        &self.per_object
    }

    pub fn get(&self, o: &ObjectId) -> Option<&LocalStep<V>> {
        self.per_object.get(o)
    }

    pub fn is_identity(&self) -> bool {
        self.per_object.values().all(|s| matches!(s, LocalStep::Step(m) if m.is_identity()))
    }

    /// Target assignment reached from `from`.
    pub fn apply(&self, inner: &LabelSignature, from: &LocalSnapshot<V>) -> Result<LocalSnapshot<V>, LabelError> {
        let mut out = from.clone();
        for (o, step) in &self.per_object {
            match step {
                LocalStep::Step(m) => {
                    let snap = from.get(o).ok_or_else(|| LabelError::LocalNotComposable {
                        object: o.0.clone(),
                        index: String::new(),
                    })?;
                    let next = m.target(inner, snap).map_err(|e| localize_err(o, e))?;
                    out.insert(o.clone(), next);
                }
                LocalStep::Create(init) => {
                    if from.contains(o) {
                        return Err(LabelError::LocalNotComposable { object: o.0.clone(), index: String::new() });
                    }
                    out.insert(o.clone(), init.clone());
                }
            }
        }
        Ok(out)
    }

    /// Pointwise composition `self ; next`, with `between` the assignment
    /// reached after `self`.
    pub fn compose(&self, next: &LocalizedMorphism<V>, inner: &LabelSignature, between: &LocalSnapshot<V>) -> Result<Self, LabelError> {
        let mut per_object = self.per_object.clone();
        for (o, second) in &next.per_object {
            let composed = match (self.per_object.get(o), second) {
                (None, s) => s.clone(),
                (Some(LocalStep::Step(a)), LocalStep::Step(b)) => {
                    let mid = between.get(o).ok_or_else(|| LabelError::LocalNotComposable {
                        object: o.0.clone(),
                        index: String::new(),
                    })?;
                    LocalStep::Step(a.compose(b, inner, mid).map_err(|e| localize_err(o, e))?)
                }
                (Some(LocalStep::Create(init)), LocalStep::Step(b)) => {
                    LocalStep::Create(b.target(inner, init).map_err(|e| localize_err(o, e))?)
                }
                (Some(_), LocalStep::Create(_)) => {
                    return Err(LabelError::LocalNotComposable { object: o.0.clone(), index: String::new() })
                }
            };
            per_object.insert(o.clone(), composed);
        }
        Ok(LocalizedMorphism { per_object })
    }

    /// Fully explicit form relative to `source`: every object of the source
    /// or target gets an entry with every inner component resolved. With no
    /// write-only inner components two morphisms with equal source and
    /// target have equal canonical forms.
    pub fn canonical(&self, inner: &LabelSignature, source: &LocalSnapshot<V>) -> Result<BTreeMap<ObjectId, Vec<MorphismComponent<V>>>, LabelError> {
        let target = self.apply(inner, source)?;
        let mut out = BTreeMap::new();
        for (o, tgt) in target.iter() {
            let src = source.get(o).cloned().unwrap_or_else(|| inner.bottom_snapshot());
            let mut comps = Vec::new();
            for c in inner.components() {
                let name = &c.index.name;
                let comp = match (&c.kind, self.per_object.get(o)) {
                    (ComponentKind::WriteOnly, Some(LocalStep::Step(m))) => m.get(inner, name, &src)?,
                    (ComponentKind::WriteOnly, _) => MorphismComponent::Emit(Vec::new()),
                    _ => MorphismComponent::pair(src.object(inner, name)?, tgt.object(inner, name)?),
                };
                comps.push(comp);
            }
            out.insert(o.clone(), comps);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Json {
        let inner: serde_json::Map<String, Json> = self
            .per_object
            .iter()
            .map(|(o, s)| {
                let v = match s {
                    LocalStep::Step(m) => m.to_json(),
                    LocalStep::Create(init) => json!({ "created": init.to_json() }),
                };
                (o.0.clone(), v)
            })
            .collect();
        json!({ "enc": Json::Object(inner) })
    }
}

fn localize_err(o: &ObjectId, e: LabelError) -> LabelError {
    match e {
        LabelError::NotComposable(index) | LabelError::UnknownIndex(index) | LabelError::KindMismatch(index) => {
            LabelError::LocalNotComposable { object: o.0.clone(), index }
        }
        other => other,
    }
}

/// `compose_localized` in free-function form.
pub fn compose_localized<V: Datum>(
    e1: &LocalizedMorphism<V>,
    e2: &LocalizedMorphism<V>,
    inner: &LabelSignature,
    between: &LocalSnapshot<V>,
) -> Result<LocalizedMorphism<V>, LabelError> {
    e1.compose(e2, inner, between)
}
