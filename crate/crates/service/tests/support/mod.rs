#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use selfcheck_core::gateway::{load_fixture, BackendConfig};
use selfcheck_service::{BackendSpec, Backends, SessionManager, SessionStore};

pub const FEATHERSTONE_PROMPT: &str = "Tell me about Don Featherstone";
pub const BIRTHPLACE_EDIT: &str = "Featherstone was born in Massachusetts.";
pub const BRUSH_TEXT: &str = "having created the iconic pink plastic flamingo lawn ornament";
pub const BRUSH_QUESTION: &str = "What is Don Featherstone known for?";

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(format!("{name}.fixture.json"))
}

pub fn backends() -> Backends {
    let featherstone = load_fixture(fixture_path("featherstone")).unwrap();
    let rodrigo = load_fixture(fixture_path("rodrigo")).unwrap();
    Backends::new(BackendConfig::default())
        .with("fixture", BackendSpec::Fixture(Arc::new(featherstone)))
        .with("rodrigo", BackendSpec::Fixture(Arc::new(rodrigo)))
        .with(
            "live",
            BackendSpec::Live {
                api_key: Some("unused".into()),
            },
        )
}

pub fn manager(dir: &std::path::Path) -> SessionManager {
    SessionManager::new(SessionStore::open(dir).unwrap(), backends())
}

/// Char offsets of `needle` in `text`.
pub fn char_span(text: &str, needle: &str) -> (usize, usize) {
    let byte = text.find(needle).expect("needle present");
    let start = text[..byte].chars().count();
    (start, start + needle.chars().count())
}
