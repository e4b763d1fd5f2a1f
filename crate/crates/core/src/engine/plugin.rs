//! Components loaded from native shared libraries.
//!
//! A plugin exports three C symbols:
//!
//! ```c
//! const char *comodi_hello(void);             /* hello message JSON, static */
//! char *<entry>(const char *invoke_json);     /* result or error message JSON */
//! void comodi_free(char *reply);              /* releases what <entry> returned */
//! ```
//!
//! Messages are the same JSON documents as in the subprocess protocol.

use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::sync::Arc;

use libloading::{Library, Symbol};
use serde_json::Map;

use super::codec::{value_from_json, value_to_json};
use super::protocol::{Message, PROTOCOL_VERSION};
use super::{Component, ComponentError, EngineError, PortValues};
use crate::model::ComponentDescriptor;

type HelloFn = unsafe extern "C" fn() -> *const c_char;
type EntryFn = unsafe extern "C" fn(*const c_char) -> *mut c_char;
type FreeFn = unsafe extern "C" fn(*mut c_char);

pub(crate) struct PluginComponent {
    descriptor: Arc<ComponentDescriptor>,
    entry: EntryFn,
    free: FreeFn,
    // keeps the symbols above valid; dropped last
    _library: Library,
}

impl PluginComponent {
    pub(crate) fn load(descriptor: Arc<ComponentDescriptor>, artifact: &Path) -> Result<Self, EngineError> {
        let entry_name = descriptor
            .implementation
            .as_ref()
            .map(|i| i.entry.clone())
            .unwrap_or_default();
        // SAFETY: loading runs the library's initializers; plugins are
        // trusted artifacts chosen by the project author.
        let library = unsafe { Library::new(artifact) }
            .map_err(|e| EngineError::ArtifactMissing(format!("{}: {e}", artifact.display())))?;
        let symbol = |name: &str| EngineError::EntrySymbolAbsent(format!("{name} in {}", artifact.display()));
        // SAFETY: the signatures are the documented plugin contract.
        let (hello, entry, free) = unsafe {
            let hello: Symbol<HelloFn> = library.get(b"comodi_hello\0").map_err(|_| symbol("comodi_hello"))?;
            let entry: Symbol<EntryFn> = library
                .get(format!("{entry_name}\0").as_bytes())
                .map_err(|_| symbol(&entry_name))?;
            let free: Symbol<FreeFn> = library.get(b"comodi_free\0").map_err(|_| symbol("comodi_free"))?;
            (*hello, *entry, *free)
        };
        // SAFETY: comodi_hello returns a static NUL-terminated string.
        let hello = unsafe { CStr::from_ptr(hello()) }.to_string_lossy().into_owned();
        match Message::parse(&hello) {
            Ok(Message::Hello {
                protocol,
                component,
                version,
            }) if protocol == PROTOCOL_VERSION
                && component == descriptor.name.as_str()
                && version == descriptor.version.to_string() => {}
            Ok(_) => {
                return Err(EngineError::HandshakeMismatch(format!(
                    "plugin announced {hello:?} for {}",
                    descriptor.id()
                )))
            }
            Err(e) => return Err(EngineError::Protocol(format!("bad plugin hello: {e}"))),
        }
        Ok(PluginComponent {
            descriptor,
            entry,
            free,
            _library: library,
        })
    }

    fn call(&mut self, inputs: &PortValues, params: &PortValues) -> Result<PortValues, EngineError> {
        let request = Message::Invoke {
            params: params
                .iter()
                .map(|(k, v)| (k.clone(), value_to_json(v)))
                .collect::<Map<_, _>>(),
            inputs: inputs
                .iter()
                .map(|(k, v)| (k.clone(), value_to_json(v)))
                .collect::<Map<_, _>>(),
        };
        let line = serde_json::to_string(&request).expect("messages serialize");
        let request = CString::new(line).map_err(|e| EngineError::Protocol(e.to_string()))?;
        // SAFETY: entry receives a valid C string; the reply is freed with
        // the plugin's own deallocator.
        let reply = unsafe {
            let raw = (self.entry)(request.as_ptr());
            if raw.is_null() {
                return Err(EngineError::Protocol("plugin returned null".into()));
            }
            let text = CStr::from_ptr(raw).to_string_lossy().into_owned();
            (self.free)(raw);
            text
        };
        match Message::parse(&reply).map_err(|e| EngineError::Protocol(format!("bad plugin reply: {e}")))? {
            Message::Result { outputs } => outputs
                .into_iter()
                .map(|(port, json)| {
                    let spec = self
                        .descriptor
                        .provides_ports()
                        .find(|p| p.name == port)
                        .ok_or_else(|| EngineError::Protocol(format!("plugin returned unknown output `{port}`")))?;
                    let value = value_from_json(&json, &spec.datatype).map_err(|e| EngineError::OutputType {
                        port: port.clone(),
                        reason: e.to_string(),
                    })?;
                    Ok((port, value))
                })
                .collect(),
            Message::Error { code, detail } => Err(EngineError::Component(ComponentError { code, detail })),
            other => Err(EngineError::Protocol(format!("expected result, got {}", other.kind()))),
        }
    }
}

impl Component for PluginComponent {
    fn invoke(&mut self, inputs: &PortValues, params: &PortValues) -> Result<PortValues, ComponentError> {
        self.call(inputs, params).map_err(ComponentError::from)
    }
}
