use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use crate::model::{parse_descriptor, ComponentDescriptor, DescriptorError, GlobalName, Version};

/// Name-and-version lookup of component descriptors.
pub trait Resolver {
    fn resolve(&self, name: &GlobalName, version: &Version) -> Option<Arc<ComponentDescriptor>>;

    /// Every descriptor this resolver knows; used to propose substitutes.
    fn catalog(&self) -> Vec<Arc<ComponentDescriptor>> {
        Vec::new()
    }
}

impl<R: Resolver + ?Sized> Resolver for &R {
    fn resolve(&self, name: &GlobalName, version: &Version) -> Option<Arc<ComponentDescriptor>> {
        (**self).resolve(name, version)
    }
    fn catalog(&self) -> Vec<Arc<ComponentDescriptor>> {
        (**self).catalog()
    }
}

impl<R: Resolver + ?Sized> Resolver for Arc<R> {
    fn resolve(&self, name: &GlobalName, version: &Version) -> Option<Arc<ComponentDescriptor>> {
        (**self).resolve(name, version)
    }
    fn catalog(&self) -> Vec<Arc<ComponentDescriptor>> {
        (**self).catalog()
    }
}

/// In-memory descriptor set.
#[derive(Debug, Clone, Default)]
pub struct Library {
    entries: BTreeMap<(GlobalName, Version), Arc<ComponentDescriptor>>,
}

impl Library {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, descriptor: ComponentDescriptor) -> Arc<ComponentDescriptor> {
        let d = Arc::new(descriptor);
        self.entries.insert((d.name.clone(), d.version), Arc::clone(&d));
        d
    }

    pub fn with(mut self, descriptor: ComponentDescriptor) -> Self {
        self.insert(descriptor);
        self
    }

    pub fn extend(&mut self, descriptors: impl IntoIterator<Item = ComponentDescriptor>) {
        for d in descriptors {
            self.insert(d);
        }
    }

    /// Loads every `*.comodi.json` directly inside `dir`.
    pub fn load_dir(&mut self, dir: &Path) -> Result<usize, LoadError> {
        let mut count = 0;
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| LoadError::Io(dir.display().to_string(), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_string_lossy().ends_with(".comodi.json"))
            .collect();
        paths.sort();
        for path in paths {
            let text = std::fs::read_to_string(&path).map_err(|e| LoadError::Io(path.display().to_string(), e))?;
            let d = parse_descriptor(&text).map_err(|e| LoadError::Descriptor(path.display().to_string(), e))?;
            self.insert(d);
            count += 1;
        }
        Ok(count)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn latest(&self, name: &GlobalName) -> Option<Arc<ComponentDescriptor>> {
        self.entries
            .iter()
            .filter(|((n, _), _)| n == name)
            .map(|(_, d)| Arc::clone(d))
            .next_back()
    }
}

impl Resolver for Library {
    fn resolve(&self, name: &GlobalName, version: &Version) -> Option<Arc<ComponentDescriptor>> {
        self.entries.get(&(name.clone(), *version)).cloned()
    }

    fn catalog(&self) -> Vec<Arc<ComponentDescriptor>> {
        self.entries.values().cloned().collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("{0}: {1}")]
    Descriptor(String, #[source] DescriptorError),
}

/// Tries each resolver in order; catalogs are concatenated with the first
/// occurrence of a name@version winning.
#[derive(Default)]
pub struct ChainResolver {
    links: Vec<Box<dyn Resolver + Send + Sync>>,
}

impl ChainResolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(mut self, resolver: impl Resolver + Send + Sync + 'static) -> Self {
        self.links.push(Box::new(resolver));
        self
    }
}

impl Resolver for ChainResolver {
    fn resolve(&self, name: &GlobalName, version: &Version) -> Option<Arc<ComponentDescriptor>> {
        self.links.iter().find_map(|r| r.resolve(name, version))
    }

    fn catalog(&self) -> Vec<Arc<ComponentDescriptor>> {
        let mut seen = std::collections::BTreeSet::new();
        self.links
            .iter()
            .flat_map(|r| r.catalog())
            .filter(|d| seen.insert((d.name.clone(), d.version)))
            .collect()
    }
}
