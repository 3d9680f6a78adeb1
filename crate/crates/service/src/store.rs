use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use crate::{ServiceError, VerificationSession};

/// One JSON file per session in a directory.
#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

pub(crate) fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn store_error(path: &Path, e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Store(format!("{}: {e}", path.display()))
}

impl SessionStore {
    /// Creates the directory if needed and checks that it is writable.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| store_error(&dir, e))?;
        let probe = dir.join(".write-probe");
        fs::write(&probe, b"").map_err(|e| store_error(&probe, e))?;
        fs::remove_file(&probe).map_err(|e| store_error(&probe, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, session_id: &str) -> PathBuf {
        self.dir.join(format!("{session_id}.json"))
    }

    /// Writes to a temporary file and renames it over the old one, so a
    /// reader never sees a partial session.
    pub fn save(&self, session: &VerificationSession) -> Result<(), ServiceError> {
        if !valid_id(&session.session_id) {
            return Err(ServiceError::Internal(format!(
                "bad session id {:?}",
                session.session_id
            )));
        }
        let path = self.path(&session.session_id);
        let tmp = self.dir.join(format!(".{}.tmp", session.session_id));
        fs::write(&tmp, session.to_json()).map_err(|e| store_error(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| store_error(&path, e))
    }

    pub fn load(&self, session_id: &str) -> Result<Option<VerificationSession>, ServiceError> {
        if !valid_id(session_id) {
            return Ok(None);
        }
        let path = self.path(session_id);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(store_error(&path, e)),
        };
        VerificationSession::from_json(&text)
            .map(Some)
            .map_err(|e| store_error(&path, e))
    }

    /// Ids of all stored sessions, sorted.
    pub fn list(&self) -> Result<Vec<String>, ServiceError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(|e| store_error(&self.dir, e))? {
            let name = entry.map_err(|e| store_error(&self.dir, e))?.file_name();
            if let Some(id) = name.to_string_lossy().strip_suffix(".json") {
                if valid_id(id) {
                    ids.push(id.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }
}
