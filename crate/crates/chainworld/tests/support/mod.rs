#![allow(dead_code)]

pub mod mock_server;
pub mod toy_llm;

use std::collections::BTreeMap;
use std::path::PathBuf;

use chainworld::gateway::{Backend, BackendConfig, BackendKind, Call, Gateway};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

/// A backend answering from a closure over (template name, bindings).
pub struct FnBackend<F>(pub F);

impl<F> Backend for FnBackend<F>
where
    F: Fn(&str, &BTreeMap<String, String>) -> String + Send + Sync,
{
    fn kind(&self) -> BackendKind {
        BackendKind::Scripted
    }

    fn call(&self, call: &Call<'_>) -> chainworld::Result<String> {
        Ok((self.0)(call.template_name, call.bindings))
    }
}

pub fn gateway_with<F>(f: F) -> Gateway
where
    F: Fn(&str, &BTreeMap<String, String>) -> String + Send + Sync + 'static,
{
    Gateway::with_backend(BackendConfig::default(), Box::new(FnBackend(f))).unwrap()
}

pub fn toy_gateway() -> Gateway {
    Gateway::with_backend(BackendConfig::default(), Box::new(toy_llm::ToyBackend)).unwrap()
}
