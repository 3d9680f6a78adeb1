use selfcheck_core::annotation::{brush_annotation, build_annotations, KeywordAnnotation};
use selfcheck_core::consistency::{AnswerCluster, AnswerRecord, VerificationResult};
use selfcheck_core::gateway::CacheStats;
use selfcheck_core::text::Question;
use serde::{Deserialize, Serialize};

/// A brushed span whose question awaits confirmation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingBrush {
    pub token: String,
    pub sentence_index: usize,
    /// Char span into the presented text.
    pub span: (usize, usize),
    pub question: Question,
}

/// A confirmed brush with the answers its question drew from every sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrushRecord {
    pub token: String,
    pub sentence_index: usize,
    pub span: (usize, usize),
    pub question: Question,
    pub answers: Vec<AnswerRecord>,
    pub clusters: Vec<AnswerCluster>,
}

impl BrushRecord {
    pub fn annotation_id(&self) -> String {
        format!("a-{}", self.token)
    }

    pub fn annotation(&self, n_additional: usize) -> KeywordAnnotation {
        brush_annotation(
            self.annotation_id(),
            self.sentence_index,
            &self.question.text,
            self.span,
            &self.answers,
            &self.clusters,
            n_additional,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditRecord {
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub old_text: String,
    pub new_text: String,
    pub recomputed_sentences: Vec<usize>,
    pub recomputed_claim_ids: Vec<String>,
}

/// Everything a session computed. Two sessions built from the same fixture
/// and inputs have byte-identical states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub prompt: String,
    pub num_samples: usize,
    pub backend: String,
    pub result: VerificationResult,
    /// Claim annotations in claim order, then brush annotations in confirmation order.
    pub annotations: Vec<KeywordAnnotation>,
    /// Claims verified without a focal span, so without an annotation.
    pub skipped_annotations: Vec<String>,
    pub brushes: Vec<BrushRecord>,
    pub pending_brushes: Vec<PendingBrush>,
    pub edit_history: Vec<EditRecord>,
    pub cache_stats: CacheStats,
}

impl SessionState {
    pub fn new(
        prompt: String,
        num_samples: usize,
        backend: String,
        result: VerificationResult,
        cache_stats: CacheStats,
    ) -> Self {
        let mut state = Self {
            prompt,
            num_samples,
            backend,
            result,
            annotations: Vec::new(),
            skipped_annotations: Vec::new(),
            brushes: Vec::new(),
            pending_brushes: Vec::new(),
            edit_history: Vec::new(),
            cache_stats,
        };
        state.rebuild_annotations();
        state
    }

    pub fn rebuild_annotations(&mut self) {
        let (mut annotations, skipped) = build_annotations(&self.result);
        let n = self.result.n_additional();
        annotations.extend(self.brushes.iter().map(|b| b.annotation(n)));
        self.annotations = annotations;
        self.skipped_annotations = skipped;
    }

    pub fn brush(&self, cluster_id: &str) -> Option<(&BrushRecord, &AnswerCluster)> {
        self.brushes.iter().find_map(|b| {
            b.clusters
                .iter()
                .find(|c| c.id == cluster_id)
                .map(|c| (b, c))
        })
    }

    /// Canonical serialization of the state alone.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("session state serializes");
        s.push('\n');
        s
    }
}

/// A stored session: identity and creation time around the computed state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationSession {
    pub session_id: String,
    /// Milliseconds since the Unix epoch.
    pub created_at: u64,
    pub state: SessionState,
}

impl VerificationSession {
    /// Canonical serialization, as written to the store.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("session serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
