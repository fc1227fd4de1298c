use serde_json::Value;

use super::LlmError;
use crate::tree::{tree_from_value, AttributeTree};

/// Finds the first balanced `{...}` span that parses as a JSON object,
/// skipping any prose around it.
pub fn extract_json_object(text: &str) -> Option<Value> {
    let bytes = text.as_bytes();
    let mut start = 0;
    while let Some(offset) = text[start..].find('{') {
        let open = start + offset;
        if let Some(close) = matching_brace(bytes, open) {
            if let Ok(v @ Value::Object(_)) = serde_json::from_str::<Value>(&text[open..=close]) {
                return Some(v);
            }
        }
        start = open + 1;
    }
    None
}

/// Index of the brace closing the one at `open`, honoring JSON strings.
fn matching_brace(bytes: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Parses a model answer into a tree fragment. The fragment's root children
/// are what gets grafted onto the tree being grown. Repeated sibling names in
/// the answer keep only their first occurrence.
pub fn parse_attribute_response(text: &str) -> Result<AttributeTree, LlmError> {
    let mut value = extract_json_object(text).ok_or(LlmError::NoJsonObject)?;
    dedupe_siblings(&mut value);
    Ok(tree_from_value(&value)?)
}

fn dedupe_siblings(value: &mut Value) {
    let Some(Value::Array(children)) = value.get_mut("children") else {
        return;
    };
    let mut seen = std::collections::HashSet::new();
    children.retain(|c| match c.get("name").and_then(Value::as_str) {
        Some(name) => seen.insert(name.trim().to_string()),
        None => true,
    });
    for c in children.iter_mut() {
        dedupe_siblings(c);
    }
}
