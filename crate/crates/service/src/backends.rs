use std::collections::BTreeMap;
use std::sync::Arc;

use selfcheck_core::gateway::{Backend, BackendConfig, FixtureBackend, FixtureTable, LiveBackend};

use crate::ServiceError;

pub const DEFAULT_BACKEND: &str = "fixture";

/// How to build the backend of a new session.
#[derive(Debug, Clone)]
pub enum BackendSpec {
    /// Every session replays the table from its first generation.
    Fixture(Arc<FixtureTable>),
    /// HTTP endpoints; a missing key surfaces as a backend error on use.
    Live { api_key: Option<String> },
}

/// Named backend selectors plus the configuration sessions start from.
#[derive(Debug, Clone)]
pub struct Backends {
    specs: BTreeMap<String, BackendSpec>,
    default: String,
    config: BackendConfig,
}

impl Backends {
    pub fn new(config: BackendConfig) -> Self {
        Self {
            specs: BTreeMap::new(),
            default: DEFAULT_BACKEND.into(),
            config,
        }
    }

    /// Registers a selector; the first one registered becomes the default.
    pub fn with(mut self, name: &str, spec: BackendSpec) -> Self {
        if self.specs.is_empty() {
            self.default = name.into();
        }
        self.specs.insert(name.into(), spec);
        self
    }

    pub fn with_default(mut self, name: &str) -> Self {
        self.default = name.into();
        self
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn names(&self) -> Vec<&str> {
        self.specs.keys().map(String::as_str).collect()
    }

    pub fn resolve<'a>(&'a self, name: Option<&'a str>) -> Result<&'a str, ServiceError> {
        let name = name.unwrap_or(&self.default);
        if self.specs.contains_key(name) {
            Ok(name)
        } else {
            Err(ServiceError::Validation(format!(
                "unknown backend {name:?}; available: {}",
                self.names().join(", ")
            )))
        }
    }

    /// A fresh backend instance for one session.
    pub fn make(&self, name: &str) -> Result<Arc<dyn Backend>, ServiceError> {
        match self.specs.get(name) {
            Some(BackendSpec::Fixture(table)) => {
                Ok(Arc::new(FixtureBackend::new(table.as_ref().clone())))
            }
            Some(BackendSpec::Live { api_key: Some(key) }) => {
                Ok(Arc::new(LiveBackend::new(&self.config, Some(key.clone()))?))
            }
            Some(BackendSpec::Live { api_key: None }) => {
                Ok(Arc::new(LiveBackend::from_env(&self.config)?))
            }
            None => Err(ServiceError::Validation(format!(
                "unknown backend {name:?}"
            ))),
        }
    }
}
