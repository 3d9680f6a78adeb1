use std::collections::HashMap;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};
use parking_lot::{Mutex, RwLock};
use rand::distributions::Alphanumeric;
use rand::Rng;
use selfcheck_core::annotation::{
    claims_for_sentence, evidence, evidence_for_answer_cluster, EvidenceSet, EvidenceTarget,
    KeywordAnnotation, SentenceClaims,
};
use selfcheck_core::consistency::{
    answer_clusters, verify_generation, verify_text, SentenceRelocation, VerificationResult,
};
use selfcheck_core::gateway::{CacheStats, CallCounts, Gateway};
use selfcheck_core::text::{question_from_span, validate_question, AtomicClaim, QuestionSource};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::store::valid_id;
use crate::{
    Backends, BrushRecord, EditRecord, PendingBrush, ServiceError, SessionState, SessionStore,
    VerificationSession,
};

pub const MIN_SAMPLES: usize = 2;
pub const MAX_SAMPLES: usize = 50;
/// Presented generation plus twenty additional samples.
pub const DEFAULT_SAMPLES: usize = 21;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrushSuggestion {
    pub suggested_question: String,
    pub token: String,
}

/// In-memory handle on one session.
struct Slot {
    gateway: Result<Gateway, ServiceError>,
    /// Stats recorded before this process loaded the session.
    base_stats: CacheStats,
    /// Serializes mutations of this session.
    write: Mutex<()>,
    /// Last committed state; readers clone the Arc.
    current: RwLock<Arc<VerificationSession>>,
}

impl Slot {
    fn gateway(&self) -> Result<&Gateway, ServiceError> {
        self.gateway.as_ref().map_err(Clone::clone)
    }

    fn snapshot(&self) -> Arc<VerificationSession> {
        self.current.read().clone()
    }

    fn stats(&self) -> CacheStats {
        let mut stats = self.base_stats.clone();
        if let Ok(gw) = &self.gateway {
            stats.add(&gw.stats());
        }
        stats
    }
}

/// Creates, mutates, persists and serves verification sessions.
pub struct SessionManager {
    store: SessionStore,
    backends: Backends,
    slots: RwLock<HashMap<String, Arc<Slot>>>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn new_session_id() -> String {
    rand::thread_rng()
        .sample_iter(&Alphanumeric)
        .take(22)
        .map(char::from)
        .collect()
}

fn brush_token(sentence_index: usize, span: (usize, usize), question: &str) -> String {
    let mut h = Sha256::new();
    h.update(format!("{sentence_index}:{}:{}:", span.0, span.1));
    h.update(question.as_bytes());
    let digest = h.finalize();
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    format!("b-{hex}")
}

impl SessionManager {
    pub fn new(store: SessionStore, backends: Backends) -> Self {
        Self {
            store,
            backends,
            slots: RwLock::new(HashMap::new()),
        }
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }

    pub fn backends(&self) -> &Backends {
        &self.backends
    }

    fn slot(&self, session_id: &str) -> Result<Arc<Slot>, ServiceError> {
        if let Some(slot) = self.slots.read().get(session_id) {
            return Ok(slot.clone());
        }
        let not_found = || ServiceError::NotFound {
            kind: "session",
            id: session_id.into(),
        };
        if !valid_id(session_id) {
            return Err(not_found());
        }
        let session = self.store.load(session_id)?.ok_or_else(not_found)?;
        let gateway = self
            .backends
            .make(&session.state.backend)
            .map(|b| Gateway::new(b, session.state.result.config.clone()));
        let slot = Arc::new(Slot {
            gateway,
            base_stats: session.state.cache_stats.clone(),
            write: Mutex::new(()),
            current: RwLock::new(Arc::new(session)),
        });
        Ok(self
            .slots
            .write()
            .entry(session_id.to_string())
            .or_insert(slot)
            .clone())
    }

    /// Persists a new state and makes it visible; on failure nothing changes.
    fn commit(
        &self,
        slot: &Slot,
        mut state: SessionState,
    ) -> Result<Arc<VerificationSession>, ServiceError> {
        state.cache_stats = slot.stats();
        let old = slot.snapshot();
        let session = Arc::new(VerificationSession {
            session_id: old.session_id.clone(),
            created_at: old.created_at,
            state,
        });
        self.store.save(&session)?;
        *slot.current.write() = session.clone();
        Ok(session)
    }

    /// Samples `num_samples` generations (presented plus additional) and verifies them.
    pub fn create_session(
        &self,
        prompt: &str,
        num_samples: Option<usize>,
        backend: Option<&str>,
    ) -> Result<Arc<VerificationSession>, ServiceError> {
        if prompt.trim().is_empty() {
            return Err(ServiceError::Validation("prompt is empty".into()));
        }
        let n = num_samples.unwrap_or(DEFAULT_SAMPLES);
        if !(MIN_SAMPLES..=MAX_SAMPLES).contains(&n) {
            return Err(ServiceError::Validation(format!(
                "num_samples must be within [{MIN_SAMPLES}, {MAX_SAMPLES}], got {n}"
            )));
        }
        let backend = self.backends.resolve(backend)?.to_string();
        let gateway = Gateway::new(
            self.backends.make(&backend)?,
            self.backends.config().clone(),
        );
        let result = verify_generation(prompt, n, &gateway)?;
        let state = SessionState::new(prompt.to_string(), n, backend, result, gateway.stats());

        let mut slots = self.slots.write();
        let session_id = loop {
            let id = new_session_id();
            if !slots.contains_key(&id) && !self.store.path(&id).exists() {
                break id;
            }
        };
        let session = Arc::new(VerificationSession {
            session_id: session_id.clone(),
            created_at: now_ms(),
            state,
        });
        self.store.save(&session)?;
        slots.insert(
            session_id.clone(),
            Arc::new(Slot {
                gateway: Ok(gateway),
                base_stats: CacheStats::default(),
                write: Mutex::new(()),
                current: RwLock::new(session.clone()),
            }),
        );
        info!(
            "created session {session_id} ({} claims)",
            session.state.result.claim_verifications.len()
        );
        Ok(session)
    }

    /// The last committed state. Has no side effects.
    pub fn get_session(&self, session_id: &str) -> Result<Arc<VerificationSession>, ServiceError> {
        Ok(self.slot(session_id)?.snapshot())
    }

    /// Backend calls made for this session since it was loaded, when counted.
    pub fn backend_calls(&self, session_id: &str) -> Result<Option<CallCounts>, ServiceError> {
        Ok(self.slot(session_id)?.gateway()?.backend_calls())
    }

    /// First phase of brushing: a question about the selected span.
    /// `start`/`end` are char offsets into the presented text and must lie
    /// within sentence `sentence_index`.
    pub fn brush(
        &self,
        session_id: &str,
        sentence_index: usize,
        start: usize,
        end: usize,
    ) -> Result<BrushSuggestion, ServiceError> {
        let slot = self.slot(session_id)?;
        let _guard = slot.write.lock();
        let session = slot.snapshot();
        let presented = &session.state.result.presented;
        let sentence = presented.sentences.get(sentence_index).ok_or_else(|| {
            ServiceError::Validation(format!(
                "sentence index {sentence_index} out of range ({} sentences)",
                presented.sentences.len()
            ))
        })?;
        if start >= end {
            return Err(ServiceError::Validation("selection is empty".into()));
        }
        if !sentence.contains(start, end) {
            return Err(ServiceError::Validation(format!(
                "span {start}..{end} is not within sentence {sentence_index} ({}..{})",
                sentence.start, sentence.end
            )));
        }
        let text = sentence.text(&presented.text);
        let question = question_from_span(
            text,
            sentence_index,
            start - sentence.start,
            end - sentence.start,
            slot.gateway()?,
        )?;
        let token = brush_token(sentence_index, (start, end), &question.text);
        let suggestion = BrushSuggestion {
            suggested_question: question.text.clone(),
            token: token.clone(),
        };

        let mut state = session.state.clone();
        state.pending_brushes.retain(|p| p.token != token);
        state.pending_brushes.push(PendingBrush {
            token,
            sentence_index,
            span: (start, end),
            question,
        });
        self.commit(&slot, state)?;
        Ok(suggestion)
    }

    /// Second phase of brushing: answer the confirmed question in every
    /// sample and add the resulting annotation to the session.
    pub fn confirm_brush(
        &self,
        session_id: &str,
        token: &str,
    ) -> Result<KeywordAnnotation, ServiceError> {
        let slot = self.slot(session_id)?;
        let _guard = slot.write.lock();
        let session = slot.snapshot();
        let state = &session.state;
        let pending = state
            .pending_brushes
            .iter()
            .find(|p| p.token == token)
            .ok_or_else(|| ServiceError::NotFound {
                kind: "brush token",
                id: token.into(),
            })?;
        let gateway = slot.gateway()?;
        let result = &state.result;

        let checked = validate_question(pending.question.clone(), &result.presented.text, gateway)?;
        let focal = checked
            .focal
            .ok_or_else(|| ServiceError::Unanswerable(pending.question.text.clone()))?;
        let question = checked.question;
        let claim = AtomicClaim {
            id: pending.token.clone(),
            text: format!("{} {}", question.text, focal.answer_text),
            sentence_index: pending.sentence_index,
            ordinal: 0,
        };
        let (answers, clusters) = answer_clusters(
            &question,
            &claim,
            &result.presented,
            &result.samples,
            gateway,
            &pending.token,
        )?;
        let record = BrushRecord {
            token: pending.token.clone(),
            sentence_index: pending.sentence_index,
            span: pending.span,
            question,
            answers,
            clusters,
        };
        let annotation = record.annotation(result.n_additional());

        let mut next = state.clone();
        next.pending_brushes.retain(|p| p.token != token);
        next.brushes.retain(|b| b.token != token);
        next.brushes.push(record);
        next.rebuild_annotations();
        self.commit(&slot, next)?;
        Ok(annotation)
    }

    /// Re-verifies edited text against the session's fixed samples. Unchanged
    /// sentences keep their verifications; a backend failure in a changed
    /// sentence leaves the session untouched.
    pub fn apply_edit(
        &self,
        session_id: &str,
        new_text: &str,
    ) -> Result<Arc<VerificationSession>, ServiceError> {
        if new_text.trim().is_empty() {
            return Err(ServiceError::Validation("new text is empty".into()));
        }
        let slot = self.slot(session_id)?;
        let _guard = slot.write.lock();
        let session = slot.snapshot();
        let old = &session.state;
        let gateway = slot.gateway()?;

        let (result, recomputed) = verify_text(
            &old.prompt,
            new_text,
            old.result.samples.clone(),
            gateway,
            Some(&old.result),
        );
        if let Some(sv) = recomputed
            .iter()
            .filter_map(|&i| result.sentence_verification(i))
            .find(|sv| sv.has_backend_failure())
        {
            warn!(
                "edit of session {session_id} aborted: backend failed in sentence {}",
                sv.sentence_index
            );
            let message = sv
                .unverified
                .iter()
                .find_map(|u| match &u.reason {
                    selfcheck_core::consistency::UnverifiedReason::Backend { message } => {
                        Some(message.clone())
                    }
                    _ => None,
                })
                .unwrap_or_default();
            return Err(ServiceError::Backend(message));
        }

        let recomputed_claim_ids = recomputed_claims(&result, &recomputed);
        let mut next = old.clone();
        next.brushes = relocate_brushes(&old.brushes, &old.result, &result);
        next.pending_brushes.clear();
        next.edit_history.push(EditRecord {
            timestamp: now_ms(),
            old_text: old.result.presented.text.clone(),
            new_text: new_text.to_string(),
            recomputed_sentences: recomputed,
            recomputed_claim_ids,
        });
        next.result = result;
        next.rebuild_annotations();
        self.commit(&slot, next)
    }

    /// Evidence for a claim, a claim cluster or a brush cluster.
    pub fn list_evidence(
        &self,
        session_id: &str,
        target: &str,
    ) -> Result<EvidenceSet, ServiceError> {
        let target: EvidenceTarget = target.parse()?;
        let session = self.get_session(session_id)?;
        let state = &session.state;
        if let EvidenceTarget::Cluster(id) = &target {
            if state.result.cluster(id).is_none() {
                if let Some((brush, cluster)) = state.brush(id) {
                    return Ok(evidence_for_answer_cluster(
                        &state.result,
                        &brush.answers,
                        cluster,
                    ));
                }
            }
        }
        Ok(evidence(&state.result, &target)?)
    }

    /// Claim rows of one sentence.
    pub fn sentence_claims(
        &self,
        session_id: &str,
        sentence_index: usize,
    ) -> Result<SentenceClaims, ServiceError> {
        let session = self.get_session(session_id)?;
        Ok(claims_for_sentence(&session.state.result, sentence_index)?)
    }
}

fn recomputed_claims(result: &VerificationResult, sentences: &[usize]) -> Vec<String> {
    let verified = result
        .claim_verifications
        .iter()
        .filter(|cv| sentences.contains(&cv.claim.sentence_index))
        .map(|cv| &cv.claim);
    let unverified = result
        .unverified
        .iter()
        .filter(|u| sentences.contains(&u.sentence_index))
        .filter_map(|u| u.claim.as_ref());
    let mut claims: Vec<&AtomicClaim> = verified.chain(unverified).collect();
    claims.sort_by_key(|c| (c.sentence_index, c.ordinal));
    claims.into_iter().map(|c| c.id.clone()).collect()
}

/// Keeps brushes whose sentence survived the edit, moved to its new position.
fn relocate_brushes(
    brushes: &[BrushRecord],
    old: &VerificationResult,
    new: &VerificationResult,
) -> Vec<BrushRecord> {
    let map = SentenceRelocation::new(&old.presented, &new.presented);
    brushes
        .iter()
        .filter_map(|b| {
            let sentence_index = map.sentence(b.sentence_index)?;
            let span = map.span(b.span.0, b.span.1)?;
            let mut b = b.clone();
            b.sentence_index = sentence_index;
            b.span = span;
            if let QuestionSource::FromSpan {
                sentence_index: i, ..
            } = &mut b.question.source
            {
                *i = sentence_index;
            }
            b.answers = b
                .answers
                .into_iter()
                .map(|a| {
                    if a.sample_index == 0 {
                        map.record(a)
                    } else {
                        a
                    }
                })
                .collect();
            Some(b)
        })
        .collect()
}
