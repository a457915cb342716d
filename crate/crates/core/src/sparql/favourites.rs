use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::SparqlSource;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Favourite {
    pub label: String,
    pub source: SparqlSource,
}

#[derive(Debug, Error)]
pub enum FavouritesError {
    #[error("a favourite labelled {0:?} already exists")]
    DuplicateLabel(String),
    #[error("no favourite labelled {0:?}")]
    UnknownLabel(String),
    #[error("favourites file: {0}")]
    Io(#[from] std::io::Error),
    #[error("favourites file is not valid JSON: {0}")]
    Format(#[from] serde_json::Error),
}

/// Saved endpoint/query pairs, kept sorted by label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FavouritesStore {
    entries: Vec<Favourite>,
}

impl FavouritesStore {
    pub fn add(&mut self, fav: Favourite) -> Result<(), FavouritesError> {
        match self.entries.binary_search_by(|f| f.label.cmp(&fav.label)) {
            Ok(_) => Err(FavouritesError::DuplicateLabel(fav.label)),
            Err(pos) => {
                self.entries.insert(pos, fav);
                Ok(())
            }
        }
    }

    pub fn remove(&mut self, label: &str) -> Result<Favourite, FavouritesError> {
        match self.entries.binary_search_by(|f| f.label.as_str().cmp(label)) {
            Ok(pos) => Ok(self.entries.remove(pos)),
            Err(_) => Err(FavouritesError::UnknownLabel(label.to_string())),
        }
    }

    pub fn get(&self, label: &str) -> Option<&Favourite> {
        self.entries.iter().find(|f| f.label == label)
    }

    pub fn list(&self) -> &[Favourite] {
        &self.entries
    }

    /// Reads a store; a missing file is an empty store.
    pub fn load(path: &Path) -> Result<Self, FavouritesError> {
        match std::fs::read(path) {
            Ok(bytes) => {
                let mut entries: Vec<Favourite> = serde_json::from_slice(&bytes)?;
                entries.sort_by(|a, b| a.label.cmp(&b.label));
                entries.dedup_by(|a, b| a.label == b.label);
                Ok(Self { entries })
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), FavouritesError> {
        let mut bytes = serde_json::to_vec_pretty(&self.entries)?;
        bytes.push(b'\n');
        crate::project::atomic_write(path, &bytes)?;
        Ok(())
    }
}
