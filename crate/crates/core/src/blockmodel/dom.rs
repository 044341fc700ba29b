//! Arena-backed DOM tree shared by the parser, segmenter and noise filter.

use std::fmt::Write as _;

/// Index of a node inside a [`DomTree`]. Ids are assigned in document
/// (pre-)order, so comparing two ids compares document position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Element {
        tag: String,
        attributes: Vec<(String, String)>,
    },
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomNode {
    pub kind: NodeKind,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

impl DomNode {
    pub fn tag(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Element { tag, .. } => Some(tag),
            NodeKind::Text(_) => None,
        }
    }

    pub fn text(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Text(t) => Some(t),
            NodeKind::Element { .. } => None,
        }
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        match &self.kind {
            NodeKind::Element { attributes, .. } => attributes
                .iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| v.as_str()),
            NodeKind::Text(_) => None,
        }
    }

    pub fn is_element(&self, name: &str) -> bool {
        self.tag() == Some(name)
    }
}

/// An immutable, single-rooted document tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomTree {
    nodes: Vec<DomNode>,
}

/// Elements whose text never reaches the screen.
const INVISIBLE_TAGS: &[&str] = &["script", "style", "head", "template", "noscript"];

/// Elements that cannot have content.
pub(crate) const VOID_TAGS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];

pub(crate) const RAW_TEXT_TAGS: &[&str] = &["script", "style"];

impl DomTree {
    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn node(&self, id: NodeId) -> &DomNode {
        &self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].children
    }

    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(self.nodes[id.0].parent, move |p| self.nodes[p.0].parent)
    }

    /// All nodes of the subtree rooted at `id`, in document order.
    pub fn descendants(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n.0].children.iter().rev());
        }
        out
    }

    /// First element with the given tag, in document order.
    pub fn find_element(&self, tag: &str) -> Option<NodeId> {
        self.ids().find(|&id| self.node(id).is_element(tag))
    }

    pub fn find_all(&self, tag: &str) -> Vec<NodeId> {
        self.ids().filter(|&id| self.node(id).is_element(tag)).collect()
    }

    /// Whether an element hides its subtree: script/style/head and
    /// anything with an inline `display:none`.
    pub fn hides_content(&self, id: NodeId) -> bool {
        let node = self.node(id);
        match node.tag() {
            Some(tag) => {
                INVISIBLE_TAGS.contains(&tag)
                    || node
                        .attr("style")
                        .map(is_display_none)
                        .unwrap_or(false)
                    || node.attr("hidden").is_some()
            }
            None => false,
        }
    }

    /// Whether the node sits under (or is) an element that hides content.
    pub fn is_hidden(&self, id: NodeId) -> bool {
        self.hides_content(id) || self.ancestors(id).any(|a| self.hides_content(a))
    }

    /// A text node that is displayed and carries non-whitespace text.
    pub fn is_visible_text(&self, id: NodeId) -> bool {
        match self.node(id).text() {
            Some(t) => !t.trim().is_empty() && !self.is_hidden(id),
            None => false,
        }
    }

    /// Visible text nodes of the subtree rooted at `id`, in document order.
    pub fn visible_text_nodes(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        if self.is_hidden(id) {
            return out;
        }
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            if self.hides_content(n) {
                continue;
            }
            let node = self.node(n);
            if let Some(t) = node.text() {
                if !t.trim().is_empty() {
                    out.push(n);
                }
            }
            stack.extend(node.children.iter().rev());
        }
        out
    }

    /// Raw concatenation of every descendant text node.
    pub fn text_content(&self, id: NodeId) -> String {
        self.descendants(id)
            .into_iter()
            .filter_map(|n| self.node(n).text())
            .collect()
    }

    pub fn has_ancestor_tag(&self, id: NodeId, tag: &str) -> bool {
        self.ancestors(id).any(|a| self.node(a).is_element(tag))
    }

    /// Serializes the tree back to markup. Parsing the result yields an
    /// identical tree.
    pub fn to_html(&self) -> String {
        let mut out = String::new();
        for &child in self.children(self.root()) {
            self.write_node(child, &mut out);
        }
        out
    }

    fn write_node(&self, id: NodeId, out: &mut String) {
        let node = self.node(id);
        match &node.kind {
            NodeKind::Text(t) => {
                let raw = node
                    .parent
                    .and_then(|p| self.node(p).tag())
                    .map(|t| RAW_TEXT_TAGS.contains(&t))
                    .unwrap_or(false);
                if raw {
                    out.push_str(t);
                } else {
                    out.push_str(&escape_text(t));
                }
            }
            NodeKind::Element { tag, attributes } => {
                out.push('<');
                out.push_str(tag);
                for (k, v) in attributes {
                    let _ = write!(out, " {}=\"{}\"", k, escape_attr(v));
                }
                out.push('>');
                if VOID_TAGS.contains(&tag.as_str()) {
                    return;
                }
                for &c in &node.children {
                    self.write_node(c, out);
                }
                let _ = write!(out, "</{}>", tag);
            }
        }
    }
}

fn is_display_none(style: &str) -> bool {
    style.split(';').any(|decl| {
        let mut parts = decl.splitn(2, ':');
        let prop = parts.next().unwrap_or("").trim();
        let value = parts.next().unwrap_or("").trim();
        prop.eq_ignore_ascii_case("display") && value.eq_ignore_ascii_case("none")
    })
}

pub fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            _ => out.push(c),
        }
    }
    out
}

pub fn escape_attr(s: &str) -> String {
    escape_text(s).replace('"', "&quot;")
}

/// Incremental tree construction used by the HTML and XML front ends.
#[derive(Debug)]
pub(crate) struct TreeBuilder {
    nodes: Vec<DomNode>,
}

impl TreeBuilder {
    /// Starts a tree whose root is a synthetic `#document` element.
    pub fn new() -> Self {
        TreeBuilder {
            nodes: vec![DomNode {
                kind: NodeKind::Element {
                    tag: "#document".to_string(),
                    attributes: Vec::new(),
                },
                parent: None,
                children: Vec::new(),
            }],
        }
    }

    pub fn append_element(
        &mut self,
        parent: NodeId,
        tag: String,
        attributes: Vec<(String, String)>,
    ) -> NodeId {
        self.push(parent, NodeKind::Element { tag, attributes })
    }

    /// Appends text, merging with a preceding text sibling.
    pub fn append_text(&mut self, parent: NodeId, text: &str) {
        if text.is_empty() {
            return;
        }
        if let Some(&last) = self.nodes[parent.0].children.last() {
            if let NodeKind::Text(existing) = &mut self.nodes[last.0].kind {
                existing.push_str(text);
                return;
            }
        }
        self.push(parent, NodeKind::Text(text.to_string()));
    }

    pub fn tag(&self, id: NodeId) -> Option<&str> {
        self.nodes[id.0].tag()
    }

    fn push(&mut self, parent: NodeId, kind: NodeKind) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(DomNode {
            kind,
            parent: Some(parent),
            children: Vec::new(),
        });
        self.nodes[parent.0].children.push(id);
        id
    }

    /// Renumbers nodes into document order so that `NodeId` ordering
    /// matches position.
    pub fn finish(self) -> DomTree {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![NodeId(0)];
        while let Some(n) = stack.pop() {
            order.push(n);
            stack.extend(self.nodes[n.0].children.iter().rev());
        }
        let mut remap = vec![usize::MAX; self.nodes.len()];
        for (new, old) in order.iter().enumerate() {
            remap[old.0] = new;
        }
        let mut old_nodes: Vec<Option<DomNode>> = self.nodes.into_iter().map(Some).collect();
        let nodes = order
            .iter()
            .map(|old| {
                let mut node = old_nodes[old.0].take().expect("node visited once");
                node.parent = node.parent.map(|p| NodeId(remap[p.0]));
                for c in &mut node.children {
                    *c = NodeId(remap[c.0]);
                }
                node
            })
            .collect();
        DomTree { nodes }
    }
}
