//! Hooks for externally computed metrics. Results are reported, never gated on.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub trait MetricPlugin: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, candidate: &str, reference: &str) -> Result<f64, String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum MetricOutcome {
    Value(f64),
    /// No plugin registered under the requested name.
    Skipped(String),
    /// The plugin ran and failed.
    Unavailable(String),
}

impl MetricOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            MetricOutcome::Value(v) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for MetricOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricOutcome::Value(v) => write!(f, "{v:.4}"),
            MetricOutcome::Skipped(_) => f.write_str("skipped"),
            MetricOutcome::Unavailable(_) => f.write_str("unavailable"),
        }
    }
}

#[derive(Default)]
pub struct MetricRegistry {
    plugins: BTreeMap<String, Box<dyn MetricPlugin>>,
}

impl MetricRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replaces any plugin already registered under the same name.
    pub fn register(&mut self, plugin: Box<dyn MetricPlugin>) {
        self.plugins.insert(plugin.name().to_string(), plugin);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.plugins.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.plugins.keys().map(String::as_str)
    }

    pub fn evaluate(&self, name: &str, candidate: &str, reference: &str) -> MetricOutcome {
        let Some(plugin) = self.plugins.get(name) else {
            return MetricOutcome::Skipped(format!("metric plugin {name:?} is not registered"));
        };
        match plugin.score(candidate, reference) {
            Ok(v) if v.is_finite() => MetricOutcome::Value(v),
            Ok(v) => MetricOutcome::Unavailable(format!("{name} returned {v}")),
            Err(e) => {
                log::warn!("metric plugin {name} failed: {e}");
                MetricOutcome::Unavailable(e)
            }
        }
    }
}

impl fmt::Debug for MetricRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.plugins.keys()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Const(f64);
    impl MetricPlugin for Const {
        fn name(&self) -> &str {
            "const"
        }
        fn score(&self, _: &str, _: &str) -> Result<f64, String> {
            Ok(self.0)
        }
    }

    struct Failing;
    impl MetricPlugin for Failing {
        fn name(&self) -> &str {
            "failing"
        }
        fn score(&self, _: &str, _: &str) -> Result<f64, String> {
            Err("model weights missing".into())
        }
    }

    #[test]
    fn outcomes() {
        let mut reg = MetricRegistry::new();
        reg.register(Box::new(Const(0.5)));
        reg.register(Box::new(Failing));
        assert!(matches!(reg.evaluate("bertscore", "a", "b"), MetricOutcome::Skipped(_)));
        assert_eq!(reg.evaluate("const", "a", "b"), MetricOutcome::Value(0.5));
        assert!(matches!(reg.evaluate("failing", "a", "b"), MetricOutcome::Unavailable(_)));
        assert_eq!(reg.names().collect::<Vec<_>>(), vec!["const", "failing"]);
    }
}
