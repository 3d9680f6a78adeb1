use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::{CallCounts, EntailmentLabel, GatewayError, QaResult, TemplateId};

/// Exact request tuple, model identifier included.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CacheKey {
    Generate {
        model: String,
        prompt: String,
        n: usize,
        temperature_bits: u64,
        top_p_bits: u64,
        max_tokens: u32,
    },
    Nli {
        model: String,
        premise: String,
        hypothesis: String,
    },
    Qa {
        model: String,
        question: String,
        passage: String,
    },
    Task {
        model: String,
        template: TemplateId,
        prompt: String,
    },
}

#[derive(Debug, Clone)]
pub(crate) enum CachedValue {
    Texts(Vec<String>),
    Label(EntailmentLabel),
    Qa(QaResult),
    Text(String),
}

/// Backend calls made through a gateway, by capability, plus cache hits.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub calls: CallCounts,
    pub hits: u64,
}

impl CacheStats {
    pub fn add(&mut self, other: &CacheStats) {
        self.calls.add(&other.calls);
        self.hits += other.hits;
    }
}

type Slot = Arc<Mutex<Option<CachedValue>>>;

/// Response cache with per-key slots, so concurrent requests for the same
/// key reach the backend once while distinct keys proceed in parallel.
#[derive(Debug, Default)]
pub(crate) struct ResponseCache {
    slots: Mutex<HashMap<CacheKey, Slot>>,
    generate: AtomicU64,
    nli: AtomicU64,
    qa: AtomicU64,
    task: AtomicU64,
    by_template: Mutex<BTreeMap<TemplateId, u64>>,
    hits: AtomicU64,
}

impl ResponseCache {
    pub(crate) fn get_or_try_insert(
        &self,
        key: CacheKey,
        fetch: impl FnOnce() -> Result<CachedValue, GatewayError>,
    ) -> Result<CachedValue, GatewayError> {
        let counter = match &key {
            CacheKey::Generate { .. } => &self.generate,
            CacheKey::Nli { .. } => &self.nli,
            CacheKey::Qa { .. } => &self.qa,
            CacheKey::Task { .. } => &self.task,
        };
        let key_template = match &key {
            CacheKey::Task { template, .. } => Some(*template),
            _ => None,
        };
        let slot = self.slots.lock().entry(key).or_default().clone();
        let mut guard = slot.lock();
        if let Some(v) = guard.as_ref() {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(v.clone());
        }
        counter.fetch_add(1, Ordering::Relaxed);
        if let Some(template) = key_template {
            *self.by_template.lock().entry(template).or_default() += 1;
        }
        let value = fetch()?;
        *guard = Some(value.clone());
        Ok(value)
    }

    pub(crate) fn stats(&self) -> CacheStats {
        CacheStats {
            calls: CallCounts {
                generate: self.generate.load(Ordering::Relaxed),
                nli: self.nli.load(Ordering::Relaxed),
                qa: self.qa.load(Ordering::Relaxed),
                task: self.task.load(Ordering::Relaxed),
                by_template: self.by_template.lock().clone(),
            },
            hits: self.hits.load(Ordering::Relaxed),
        }
    }
}
