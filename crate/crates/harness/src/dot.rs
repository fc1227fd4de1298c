//! Graphviz rendering of explanation trees.

use lvx_core::AttributeTree;

/// Quotes `s` as a DOT string literal.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => {}
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// One digraph per tree. Nodes are numbered in preorder; the root is drawn
/// as a box, attributes as ellipses.
pub fn render(name: &str, tree: &AttributeTree) -> String {
    let order = tree.preorder();
    let rank = tree.preorder_rank();
    let mut out = format!("digraph {} {{\n", quote(name));
    out.push_str("  node [shape=ellipse];\n");
    for &id in &order {
        let label = quote(tree.label(id).expect("preorder ids exist"));
        if id == tree.root() {
            out.push_str(&format!(
                "  n{} [label={label}, shape=box, style=bold];\n",
                rank[&id]
            ));
        } else {
            out.push_str(&format!("  n{} [label={label}];\n", rank[&id]));
        }
    }
    for &id in &order {
        for c in tree.children(id) {
            out.push_str(&format!("  n{} -> n{};\n", rank[&id], rank[c]));
        }
    }
    out.push_str("}\n");
    out
}

/// A file name safe on every platform.
pub fn file_stem(sample_id: &str) -> String {
    let s: String = sample_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() || s.starts_with('.') {
        format!("_{s}")
    } else {
        s
    }
}
