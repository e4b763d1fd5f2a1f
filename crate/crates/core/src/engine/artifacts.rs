use std::path::{Path, PathBuf};

use super::EngineError;
use crate::model::ComponentDescriptor;

/// Platform id of the running host, e.g. `linux-x86_64`.
pub fn current_platform() -> String {
    format!("{}-{}", std::env::consts::OS, std::env::consts::ARCH)
}

/// Finds the artifact that implements an elementary descriptor on this host.
pub trait ArtifactResolver: Send + Sync {
    fn locate(&self, descriptor: &ComponentDescriptor) -> Result<PathBuf, EngineError>;
}

/// Resolves relative artifact locators against a list of directories, in
/// order. Locators may be plain paths or `file:` paths; remote URLs are
/// not fetched.
#[derive(Debug, Clone, Default)]
pub struct LocalArtifacts {
    roots: Vec<PathBuf>,
}

impl LocalArtifacts {
    pub fn new(roots: impl IntoIterator<Item = PathBuf>) -> Self {
        LocalArtifacts {
            roots: roots.into_iter().collect(),
        }
    }

    pub fn with_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.roots.push(root.into());
        self
    }
}

/// Fails unless the descriptor lists this host's platform (or `any`).
pub fn check_platform(descriptor: &ComponentDescriptor) -> Result<(), EngineError> {
    let imp = descriptor
        .implementation
        .as_ref()
        .ok_or_else(|| EngineError::NotElementary(descriptor.id()))?;
    let here = current_platform();
    if imp.platforms.iter().any(|p| p == "any" || *p == here) {
        Ok(())
    } else {
        Err(EngineError::ArtifactMissing(format!(
            "{} is built for {} but this host is {here}",
            descriptor.id(),
            imp.platforms.join(", ")
        )))
    }
}

impl ArtifactResolver for LocalArtifacts {
    fn locate(&self, descriptor: &ComponentDescriptor) -> Result<PathBuf, EngineError> {
        check_platform(descriptor)?;
        let imp = descriptor.implementation.as_ref().expect("checked above");
        let locator = imp.artifact.strip_prefix("file:").unwrap_or(&imp.artifact);
        if locator.contains("://") {
            return Err(EngineError::ArtifactMissing(format!(
                "{}: remote artifact {locator} has not been downloaded",
                descriptor.id()
            )));
        }
        let path = Path::new(locator);
        let candidates: Vec<PathBuf> = if path.is_absolute() {
            vec![path.to_path_buf()]
        } else {
            self.roots.iter().map(|r| r.join(path)).collect()
        };
        candidates
            .into_iter()
            .find(|p| p.is_file())
            .ok_or_else(|| EngineError::ArtifactMissing(format!("{}: artifact {locator} not found", descriptor.id())))
    }
}
