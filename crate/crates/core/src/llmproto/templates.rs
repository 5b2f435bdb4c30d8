use sha2::{Digest, Sha256};

use super::ProtocolError;

pub const DEFAULT_TEMPLATE_VERSION: &str = "v1";

/// A versioned pair of prompt templates shipped as data files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplates {
    pub version: &'static str,
    pub grounding: &'static str,
    pub reasoner: &'static str,
}

const V1: PromptTemplates = PromptTemplates {
    version: "v1",
    grounding: include_str!("../../templates/grounding_v1.txt"),
    reasoner: include_str!("../../templates/reasoner_v1.txt"),
};

impl PromptTemplates {
    pub fn get(version: &str) -> Result<Self, ProtocolError> {
        match version {
            "v1" => Ok(V1),
            other => Err(ProtocolError::UnknownTemplateVersion(other.to_string())),
        }
    }

    pub fn latest() -> Self {
        V1
    }

    /// SHA-256 over the version tag and both template bodies.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for part in [self.version, self.grounding, self.reasoner] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Single-pass `{name}` substitution; substituted text is never rescanned and
/// braces that do not enclose a known name are left alone.
pub(crate) fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let name = &after[..close];
            vars.iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}
