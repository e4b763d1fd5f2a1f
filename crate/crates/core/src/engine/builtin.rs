//! In-process components registered by name and version.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{Component, ComponentError, PortValues};
use crate::model::{ComponentDescriptor, GlobalName, Version};
use crate::wiring::Resolver;

type Factory = Arc<dyn Fn() -> Box<dyn Component> + Send + Sync>;

#[derive(Clone)]
struct Entry {
    descriptor: Arc<ComponentDescriptor>,
    factory: Factory,
}

/// Builtin components. Also serves as a [`Resolver`] for their descriptors.
#[derive(Clone, Default)]
pub struct BuiltinRegistry {
    entries: BTreeMap<(GlobalName, Version), Entry>,
}

struct FnComponent<F>(F);

impl<F> Component for FnComponent<F>
where
    F: Fn(&PortValues, &PortValues) -> Result<PortValues, ComponentError> + Send,
{
    fn invoke(&mut self, inputs: &PortValues, params: &PortValues) -> Result<PortValues, ComponentError> {
        (self.0)(inputs, params)
    }
}

impl BuiltinRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a component whose instances come from `factory`; use this
    /// for stateful components.
    pub fn register_factory<F>(&mut self, descriptor: ComponentDescriptor, factory: F)
    where
        F: Fn() -> Box<dyn Component> + Send + Sync + 'static,
    {
        let key = (descriptor.name.clone(), descriptor.version);
        self.entries.insert(
            key,
            Entry {
                descriptor: Arc::new(descriptor),
                factory: Arc::new(factory),
            },
        );
    }

    /// Registers a stateless function.
    pub fn register<F>(&mut self, descriptor: ComponentDescriptor, f: F)
    where
        F: Fn(&PortValues, &PortValues) -> Result<PortValues, ComponentError> + Send + Sync + Clone + 'static,
    {
        self.register_factory(descriptor, move || Box::new(FnComponent(f.clone())));
    }

    pub fn descriptor(&self, name: &GlobalName, version: &Version) -> Option<Arc<ComponentDescriptor>> {
        self.entries
            .get(&(name.clone(), *version))
            .map(|e| Arc::clone(&e.descriptor))
    }

    pub(crate) fn create(&self, name: &GlobalName, version: &Version) -> Option<Box<dyn Component>> {
        self.entries.get(&(name.clone(), *version)).map(|e| (e.factory)())
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &ComponentDescriptor> {
        self.entries.values().map(|e| e.descriptor.as_ref())
    }
}

impl Resolver for BuiltinRegistry {
    fn resolve(&self, name: &GlobalName, version: &Version) -> Option<Arc<ComponentDescriptor>> {
        self.descriptor(name, version)
    }

    fn catalog(&self) -> Vec<Arc<ComponentDescriptor>> {
        self.entries.values().map(|e| Arc::clone(&e.descriptor)).collect()
    }
}
