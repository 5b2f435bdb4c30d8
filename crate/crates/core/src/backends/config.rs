use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::http::{HttpClient, HttpDetector, HttpDrawer, HttpGrounder, HttpReasoner, HttpRefiner};
use super::oracle::{
    CompilerReasoner, JitterGrounder, OracleDetector, OracleGrounder, OracleRefiner,
    PassthroughDrawer, PerturbedReasoner, ReferenceDrawer,
};
use super::{BackendError, Detector, Drawer, Grounder, Reasoner, Refiner};
use crate::compositor::Filler;
use crate::llmproto::DEFAULT_TEMPLATE_VERSION;
use crate::util::sha256_hex;

/// Connection settings for one HTTP stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub endpoint_url: String,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub template_version: String,
    pub max_in_flight: usize,
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(format!("timeout must be positive, got {}", self.timeout_secs));
        }
        if self.endpoint_url.is_empty() {
            return Err("endpoint_url is empty".into());
        }
        if self.max_in_flight == 0 {
            return Err("max_in_flight must be at least 1".into());
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("serializable").as_bytes())
    }
}

/// The `[http]` table: defaults shared by every HTTP stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpSettings {
    pub endpoint_url: String,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub template_version: String,
    pub max_in_flight: usize,
}

impl Default for HttpSettings {
    fn default() -> Self {
        Self {
            endpoint_url: "http://127.0.0.1:8600".into(),
            timeout_secs: 60.0,
            max_retries: 2,
            template_version: DEFAULT_TEMPLATE_VERSION.into(),
            max_in_flight: 4,
        }
    }
}

impl HttpSettings {
    pub fn for_stage(&self, endpoint: Option<&str>) -> BackendConfig {
        BackendConfig {
            endpoint_url: endpoint.unwrap_or(&self.endpoint_url).to_string(),
            timeout_secs: self.timeout_secs,
            max_retries: self.max_retries,
            template_version: self.template_version.clone(),
            max_in_flight: self.max_in_flight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GrounderSpec {
    #[default]
    Oracle,
    Jitter {
        sigma_px: f64,
    },
    Http {
        #[serde(default)]
        endpoint_url: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RefinerSpec {
    #[default]
    Oracle,
    Http {
        #[serde(default)]
        endpoint_url: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReasonerSpec {
    #[default]
    Compiler,
    Perturbed {
        relative_sigma: f64,
    },
    Http {
        #[serde(default)]
        endpoint_url: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DrawerSpec {
    Reference {
        #[serde(default)]
        filler: Filler,
    },
    Passthrough,
    Http {
        #[serde(default)]
        endpoint_url: Option<String>,
        #[serde(default)]
        refine: bool,
    },
}

impl Default for DrawerSpec {
    fn default() -> Self {
        DrawerSpec::Reference { filler: Filler::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorSpec {
    #[default]
    Oracle,
    Http {
        #[serde(default)]
        endpoint_url: Option<String>,
    },
}

/// Which implementation runs each stage. Parsed from TOML:
///
/// ```toml
/// seed = 0
/// [http]
/// endpoint_url = "http://127.0.0.1:8600"
/// [grounder]
/// kind = "http"
/// [drawer]
/// kind = "reference"
/// filler = "boundary_mean"
/// ```
///
/// Missing tables fall back to the in-process oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct BackendsConfig {
    pub seed: u64,
    pub http: HttpSettings,
    pub grounder: GrounderSpec,
    pub refiner: RefinerSpec,
    pub reasoner: ReasonerSpec,
    pub drawer: DrawerSpec,
    pub detector: DetectorSpec,
}

impl BackendsConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, BackendError> {
        toml::from_str(s).map_err(|e| BackendError::InvalidRequest(format!("backend config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::InvalidRequest(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Applies `OBJEDIT_ENDPOINT`, `OBJEDIT_TIMEOUT_SECS` and
    /// `OBJEDIT_{GROUNDER,REFINER,REASONER,DRAWER,DETECTOR}_ENDPOINT`.
    pub fn apply_env(&mut self) -> Result<(), BackendError> {
        self.apply_overrides(|k| std::env::var(k).ok())
    }

    pub fn apply_overrides(
        &mut self,
        lookup: impl Fn(&str) -> Option<String>,
    ) -> Result<(), BackendError> {
        if let Some(url) = lookup("OBJEDIT_ENDPOINT") {
            self.http.endpoint_url = url;
        }
        if let Some(t) = lookup("OBJEDIT_TIMEOUT_SECS") {
            self.http.timeout_secs = t
                .parse()
                .map_err(|_| BackendError::InvalidRequest(format!("OBJEDIT_TIMEOUT_SECS={t:?}")))?;
        }
        let set = |slot: &mut Option<String>, var: &str| {
            if let Some(url) = lookup(var) {
                *slot = Some(url);
            }
        };
        if let GrounderSpec::Http { endpoint_url } = &mut self.grounder {
            set(endpoint_url, "OBJEDIT_GROUNDER_ENDPOINT");
        }
        if let RefinerSpec::Http { endpoint_url } = &mut self.refiner {
            set(endpoint_url, "OBJEDIT_REFINER_ENDPOINT");
        }
        if let ReasonerSpec::Http { endpoint_url } = &mut self.reasoner {
            set(endpoint_url, "OBJEDIT_REASONER_ENDPOINT");
        }
        if let DrawerSpec::Http { endpoint_url, .. } = &mut self.drawer {
            set(endpoint_url, "OBJEDIT_DRAWER_ENDPOINT");
        }
        if let DetectorSpec::Http { endpoint_url } = &mut self.detector {
            set(endpoint_url, "OBJEDIT_DETECTOR_ENDPOINT");
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("serializable").as_bytes())
    }

    /// Template version sent to HTTP stages.
    pub fn template_version(&self) -> &str {
        &self.http.template_version
    }

    pub fn build(&self) -> Result<BackendSet, BackendError> {
        let client = |endpoint: &Option<String>| HttpClient::new(self.http.for_stage(endpoint.as_deref()));
        let grounder: Arc<dyn Grounder> = match &self.grounder {
            GrounderSpec::Oracle => Arc::new(OracleGrounder),
            GrounderSpec::Jitter { sigma_px } => Arc::new(JitterGrounder {
                sigma_px: *sigma_px,
                seed: self.seed,
            }),
            GrounderSpec::Http { endpoint_url } => Arc::new(HttpGrounder(client(endpoint_url)?)),
        };
        let refiner: Arc<dyn Refiner> = match &self.refiner {
            RefinerSpec::Oracle => Arc::new(OracleRefiner),
            RefinerSpec::Http { endpoint_url } => Arc::new(HttpRefiner(client(endpoint_url)?)),
        };
        let reasoner: Arc<dyn Reasoner> = match &self.reasoner {
            ReasonerSpec::Compiler => Arc::new(CompilerReasoner),
            ReasonerSpec::Perturbed { relative_sigma } => Arc::new(PerturbedReasoner {
                relative_sigma: *relative_sigma,
                seed: self.seed,
            }),
            ReasonerSpec::Http { endpoint_url } => Arc::new(HttpReasoner(client(endpoint_url)?)),
        };
        let drawer: Arc<dyn Drawer> = match &self.drawer {
            DrawerSpec::Reference { filler } => Arc::new(ReferenceDrawer {
                filler: *filler,
                seed: self.seed,
            }),
            DrawerSpec::Passthrough => Arc::new(PassthroughDrawer),
            DrawerSpec::Http { endpoint_url, refine } => Arc::new(HttpDrawer {
                client: client(endpoint_url)?,
                refine: *refine,
                seed: self.seed,
            }),
        };
        let detector: Arc<dyn Detector> = match &self.detector {
            DetectorSpec::Oracle => Arc::new(OracleDetector),
            DetectorSpec::Http { endpoint_url } => {
                Arc::new(HttpDetector(HttpRefiner(client(endpoint_url)?)))
            }
        };
        Ok(BackendSet {
            grounder,
            refiner,
            reasoner,
            drawer,
            detector,
            config_hash: self.hash(),
        })
    }
}

/// Instantiated stage backends, cheap to clone and share across threads.
#[derive(Clone)]
pub struct BackendSet {
    pub grounder: Arc<dyn Grounder>,
    pub refiner: Arc<dyn Refiner>,
    pub reasoner: Arc<dyn Reasoner>,
    pub drawer: Arc<dyn Drawer>,
    pub detector: Arc<dyn Detector>,
    pub config_hash: String,
}

impl BackendSet {
    pub fn oracle(seed: u64) -> Self {
        BackendsConfig {
            seed,
            ..Default::default()
        }
        .build()
        .expect("oracle backends need no network")
    }

    /// Short label naming the implementation of every stage.
    pub fn label(&self) -> String {
        format!(
            "{} + {} + {} + {} + {}",
            self.grounder.name(),
            self.refiner.name(),
            self.reasoner.name(),
            self.drawer.name(),
            self.detector.name()
        )
    }
}

impl std::fmt::Debug for BackendSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BackendSet").field("label", &self.label()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn empty_config_is_all_oracles() {
        let cfg = BackendsConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, BackendsConfig::default());
        let set = cfg.build().unwrap();
        assert!(set.grounder.name().starts_with("oracle"));
        assert!(set.drawer.name().starts_with("reference"));
    }

    #[test]
    fn parses_stage_tables() {
        let cfg = BackendsConfig::from_toml_str(
            r#"
            seed = 9
            [http]
            endpoint_url = "http://localhost:1"
            timeout_secs = 5
            [grounder]
            kind = "http"
            [reasoner]
            kind = "perturbed"
            relative_sigma = 0.1
            [drawer]
            kind = "reference"
            filler = "gaussian_noise"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.grounder, GrounderSpec::Http { endpoint_url: None });
        assert_eq!(cfg.reasoner, ReasonerSpec::Perturbed { relative_sigma: 0.1 });
        assert_eq!(cfg.drawer, DrawerSpec::Reference { filler: Filler::GaussianNoise });
        assert_eq!(cfg.http.timeout_secs, 5.0);
        assert!(cfg.build().is_ok());
    }

    #[test]
    fn rejects_unknown_kinds_and_bad_timeouts() {
        assert!(BackendsConfig::from_toml_str("[grounder]\nkind = \"psychic\"").is_err());
        assert!(BackendsConfig::from_toml_str("colour = 1").is_err());
        let cfg = BackendsConfig::from_toml_str("[http]\ntimeout_secs = 0\n[refiner]\nkind = \"http\"").unwrap();
        assert!(cfg.build().is_err());
    }

    #[test]
    fn env_overrides() {
        let mut cfg = BackendsConfig::from_toml_str("[grounder]\nkind = \"http\"").unwrap();
        let env: HashMap<&str, &str> = [
            ("OBJEDIT_ENDPOINT", "http://a:1"),
            ("OBJEDIT_TIMEOUT_SECS", "2.5"),
            ("OBJEDIT_GROUNDER_ENDPOINT", "http://g:2"),
        ]
        .into();
        cfg.apply_overrides(|k| env.get(k).map(|s| s.to_string())).unwrap();
        assert_eq!(cfg.http.endpoint_url, "http://a:1");
        assert_eq!(cfg.http.timeout_secs, 2.5);
        assert_eq!(cfg.grounder, GrounderSpec::Http { endpoint_url: Some("http://g:2".into()) });

        let bad: HashMap<&str, &str> = [("OBJEDIT_TIMEOUT_SECS", "soon")].into();
        assert!(cfg.apply_overrides(|k| bad.get(k).map(|s| s.to_string())).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = BackendsConfig::default();
        let b = BackendsConfig { seed: 1, ..Default::default() };
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), BackendsConfig::default().hash());
    }
}
