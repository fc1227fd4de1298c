use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    InitialAttributes,
    DescriptionComposition,
    Grow,
    Discriminate,
}

impl PromptKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::InitialAttributes => "initial_attributes",
            PromptKind::DescriptionComposition => "description_composition",
            PromptKind::Grow => "grow",
            PromptKind::Discriminate => "discriminate",
        }
    }

    pub fn template(self) -> PromptTemplate {
        let text = match self {
            PromptKind::InitialAttributes => "This is a {class} because",
            PromptKind::DescriptionComposition => {
                "Generate sentences that describe a concept according to each attribute.\n{attributes}"
            }
            PromptKind::Grow => "Add visual attributes for the {node} of a {class}, to the json",
            PromptKind::Discriminate => "The {node} of {class} is different from {other} because",
        };
        PromptTemplate { kind: self, text }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub kind: PromptKind,
    pub text: &'static str,
}

impl PromptTemplate {
    /// Placeholder names in order of appearance.
    pub fn placeholders(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut rest = self.text;
        while let Some(start) = rest.find('{') {
            let after = &rest[start + 1..];
            match after.find('}') {
                Some(end) => {
                    out.push(&after[..end]);
                    rest = &after[end + 1..];
                }
                None => break,
            }
        }
        out
    }

    pub fn instantiate(&self, bindings: &BTreeMap<&str, &str>) -> Result<String, LlmError> {
        let mut text = self.text.to_string();
        for name in self.placeholders() {
            let value = bindings
                .get(name)
                .ok_or_else(|| LlmError::UnboundPlaceholder(name.to_string()))?;
            text = text.replace(&format!("{{{name}}}"), value);
        }
        Ok(text)
    }
}

/// Worked example shown before every request so the model answers in the
/// tree JSON schema. Tunable; it is not derived from any reference data.
pub const DEFAULT_IN_CONTEXT_EXAMPLE: &str = r#"Answer with a single JSON object. Each node has a "name" and optional "children"; the four top-level groups use "kind" Concepts, Substances, Attributes and Environments.
Example for "This is a bird because":
{"name":"bird","children":[
 {"name":"Concepts","kind":"Concepts","children":[{"name":"animal"},{"name":"flying creature"}]},
 {"name":"Substances","kind":"Substances","children":[{"name":"feathers"}]},
 {"name":"Attributes","kind":"Attributes","children":[{"name":"beak","children":[{"name":"pointed beak"}]},{"name":"two wings"}]},
 {"name":"Environments","kind":"Environments","children":[{"name":"sky"},{"name":"tree branch"}]}]}"#;

/// In-context example followed by the instantiated template for `kind`.
pub fn render_prompt(
    kind: PromptKind,
    bindings: &BTreeMap<&str, &str>,
    in_context_example: &str,
) -> Result<String, LlmError> {
    let body = kind.template().instantiate(bindings)?;
    if in_context_example.is_empty() {
        Ok(body)
    } else {
        Ok(format!("{in_context_example}\n\n{body}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bind<'a>(pairs: &[(&'a str, &'a str)]) -> BTreeMap<&'a str, &'a str> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn initial_prompt() {
        let p = render_prompt(
            PromptKind::InitialAttributes,
            &bind(&[("class", "dog")]),
            "EXAMPLE",
        )
        .unwrap();
        assert!(p.starts_with("EXAMPLE\n\n"));
        assert!(p.ends_with("This is a dog because"));
    }

    #[test]
    fn grow_prompt() {
        let p = render_prompt(
            PromptKind::Grow,
            &bind(&[("node", "wet nose"), ("class", "dog")]),
            "",
        )
        .unwrap();
        assert_eq!(
            p,
            "Add visual attributes for the wet nose of a dog, to the json"
        );
    }

    #[test]
    fn discriminate_prompt() {
        let p = render_prompt(
            PromptKind::Discriminate,
            &bind(&[("node", "ear"), ("class", "dog"), ("other", "human")]),
            DEFAULT_IN_CONTEXT_EXAMPLE,
        )
        .unwrap();
        assert!(p.contains("The ear of dog is different from human because"));
    }

    #[test]
    fn unbound_placeholder() {
        let err = render_prompt(PromptKind::Grow, &bind(&[("node", "ear")]), "").unwrap_err();
        assert!(matches!(err, LlmError::UnboundPlaceholder(ref n) if n == "class"));
    }

    #[test]
    fn placeholders_listed() {
        assert_eq!(
            PromptKind::Discriminate.template().placeholders(),
            ["node", "class", "other"]
        );
        assert_eq!(
            PromptKind::DescriptionComposition.template().placeholders(),
            ["attributes"]
        );
    }
}
