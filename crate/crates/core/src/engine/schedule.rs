use serde_json::Value as Json;

use super::Language;
use crate::label::{ComponentObject, Namespace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trigger {
    Immediate,
    AtStep(u64),
    /// Right before the first jump fires.
    AtFirstUpgradePoint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Injection<V> {
    pub trigger: Trigger,
    pub index: String,
    pub payload: ComponentObject<V>,
}

/// Upgrade data supplied from outside the program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpgradeSchedule<V> {
    pub injections: Vec<Injection<V>>,
}

impl<V> Default for UpgradeSchedule<V> {
    fn default() -> Self {
        UpgradeSchedule { injections: Vec::new() }
    }
}

impl<V> UpgradeSchedule<V> {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with(mut self, trigger: Trigger, index: impl Into<String>, payload: ComponentObject<V>) -> Self {
        self.injections.push(Injection { trigger, index: index.into(), payload });
        self
    }

    /// Reads `[{"trigger": ..., "index": "U_S", "payload": {...}}, ...]`,
    /// checking every payload against the language's upgrade components.
    pub fn from_json<L: Language<Datum = V>>(lang: &L, json: &Json) -> Result<Self, String> {
        let items = json.as_array().ok_or("schedule must be a JSON array")?;
        let mut injections = Vec::new();
        for (i, item) in items.iter().enumerate() {
            let trigger = match item.get("trigger") {
                Some(Json::String(s)) if s == "immediate" => Trigger::Immediate,
                Some(Json::String(s)) if s == "at_upgrade_point" => Trigger::AtFirstUpgradePoint,
                Some(Json::Object(m)) if m.len() == 1 && m.contains_key("at_step") => {
                    Trigger::AtStep(m["at_step"].as_u64().ok_or_else(|| format!("entry {i}: at_step must be a natural"))?)
                }
                _ => return Err(format!("entry {i}: trigger must be \"immediate\", \"at_upgrade_point\" or {{\"at_step\": n}}")),
            };
            let index = item.get("index").and_then(Json::as_str).ok_or_else(|| format!("entry {i}: missing index"))?;
            match lang.signature().component(index) {
                Some(c) if c.index.namespace == Namespace::Upgrade => {}
                _ => return Err(format!("entry {i}: `{index}` is not an upgrade component of {}", lang.name())),
            }
            let payload = item.get("payload").ok_or_else(|| format!("entry {i}: missing payload"))?;
            let payload = lang.parse_payload(index, payload).map_err(|e| format!("entry {i}: {e}"))?;
            injections.push(Injection { trigger, index: index.to_string(), payload });
        }
        Ok(UpgradeSchedule { injections })
    }
}
