use palm_core::driver::{Backend, BruteForce, Domains, Scripted};
use serde::Deserialize;

use crate::llm::{LlmBackend, LlmConfig};

/// Which generator to use, as accepted by the CLI and the HTTP service.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "backend", rename_all = "kebab-case")]
pub enum BackendSpec {
    BruteForce {
        #[serde(default)]
        domains: Option<Domains>,
    },
    /// Replies in order; `repeat` answers once the list is used up.
    Scripted {
        #[serde(default)]
        tests: Vec<String>,
        #[serde(default)]
        repeat: Option<String>,
    },
    Llm {
        #[serde(flatten)]
        config: LlmConfig,
    },
}

impl BackendSpec {
    /// `default_domains` applies when a brute-force spec names none.
    pub fn build(self, default_domains: &Domains) -> Box<dyn Backend + Send> {
        match self {
            BackendSpec::BruteForce { domains } => Box::new(BruteForce::new(domains.unwrap_or_else(|| default_domains.clone()))),
            BackendSpec::Scripted { tests, repeat } => {
                let mut s = Scripted::tests(tests);
                if let Some(r) = repeat {
                    s.repeat = Scripted::always(&r).repeat;
                }
                Box::new(s)
            }
            BackendSpec::Llm { config } => Box::new(LlmBackend::from_env(config)),
        }
    }
}

