use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::dom::{DomTree, NodeId};

/// Elements that start a new line box. Anything else is inline content.
pub const BLOCK_LEVEL_TAGS: &[&str] = &[
    "address", "article", "aside", "blockquote", "body", "caption", "center", "dd", "details",
    "dialog", "dir", "div", "dl", "dt", "embed", "fieldset", "figcaption", "figure", "footer",
    "form", "frameset", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hgroup", "hr", "html",
    "iframe", "li", "main", "menu", "nav", "object", "ol", "p", "pre", "section", "table", "tbody",
    "td", "tfoot", "th", "thead", "tr", "ul", "video",
];

pub fn is_block_level(tag: &str) -> bool {
    BLOCK_LEVEL_TAGS.contains(&tag)
}

/// Degree of coherence of a block, an integer in `1..=10`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Coherence(u8);

impl Coherence {
    pub const MIN: Coherence = Coherence(1);
    pub const MAX: Coherence = Coherence(10);

    pub fn new(value: u8) -> Option<Self> {
        (1..=10).contains(&value).then_some(Coherence(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Coherence {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Coherence::new(value).ok_or_else(|| format!("degree of coherence {value} outside 1..=10"))
    }
}

impl From<Coherence> for u8 {
    fn from(c: Coherence) -> u8 {
        c.0
    }
}

/// Hierarchical block label such as `VB1-2-3`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(String);

impl BlockId {
    pub fn root() -> Self {
        BlockId("VB1".to_string())
    }

    /// Label of the `index`-th (zero-based) child.
    pub fn child(&self, index: usize) -> Self {
        BlockId(format!("{}-{}", self.0, index + 1))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_ancestor_of(&self, other: &BlockId) -> bool {
        other.0.len() > self.0.len()
            && other.0.starts_with(&self.0)
            && other.0.as_bytes()[self.0.len()] == b'-'
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisualBlock {
    pub id: BlockId,
    pub doc: Coherence,
    pub children: Vec<VisualBlock>,
    /// Roots of the DOM subtrees (or individual text nodes) this block covers,
    /// in document order.
    pub dom_refs: Vec<NodeId>,
    /// Visible text, whitespace-collapsed.
    pub text: String,
}

impl VisualBlock {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// The visible text nodes covered by this block.
    pub fn text_nodes(&self, dom: &DomTree) -> Vec<NodeId> {
        self.dom_refs
            .iter()
            .flat_map(|&r| dom.visible_text_nodes(r))
            .collect()
    }

    pub fn leaves(&self) -> Vec<&VisualBlock> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a VisualBlock>) {
        if self.children.is_empty() {
            out.push(self);
        } else {
            for c in &self.children {
                c.collect_leaves(out);
            }
        }
    }

    /// Every block of the subtree in pre-order.
    pub fn preorder(&self) -> Vec<&VisualBlock> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(b) = stack.pop() {
            out.push(b);
            stack.extend(b.children.iter().rev());
        }
        out
    }

    /// A copy of this block with its subtree cut away.
    pub fn as_leaf(&self) -> VisualBlock {
        VisualBlock {
            children: Vec::new(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockTree {
    pub root: VisualBlock,
}

impl BlockTree {
    pub fn new(root: VisualBlock) -> Self {
        BlockTree { root }
    }

    pub fn leaves(&self) -> Vec<&VisualBlock> {
        self.root.leaves()
    }

    pub fn leaf_count(&self) -> usize {
        self.root.leaves().len()
    }

    pub fn blocks(&self) -> Vec<&VisualBlock> {
        self.root.preorder()
    }

    pub fn find(&self, id: &BlockId) -> Option<&VisualBlock> {
        self.blocks().into_iter().find(|b| &b.id == id)
    }

    pub fn to_dump(&self) -> BlockDump {
        BlockDump::from(&self.root)
    }

    /// Checks that the leaves cover every visible text node of `dom`
    /// exactly once.
    pub fn check_exact_cover(&self, dom: &DomTree, scope: NodeId) -> Result<(), CoverViolation> {
        let expected: Vec<NodeId> = dom.visible_text_nodes(scope);
        let mut seen = HashSet::new();
        for leaf in self.leaves() {
            for n in leaf.text_nodes(dom) {
                if !seen.insert(n) {
                    return Err(CoverViolation::Duplicated(n));
                }
            }
        }
        for n in &expected {
            if !seen.remove(n) {
                return Err(CoverViolation::Missing(*n));
            }
        }
        match seen.into_iter().min() {
            Some(extra) => Err(CoverViolation::Foreign(extra)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CoverViolation {
    #[error("text node {0:?} is covered by more than one leaf")]
    Duplicated(NodeId),
    #[error("text node {0:?} is not covered by any leaf")]
    Missing(NodeId),
    #[error("text node {0:?} is covered but lies outside the segmented scope")]
    Foreign(NodeId),
}

/// Serialized block tree: nested `{id, doc, text, children}` objects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDump {
    pub id: BlockId,
    pub doc: Coherence,
    pub text: String,
    pub children: Vec<BlockDump>,
}

impl From<&VisualBlock> for BlockDump {
    fn from(b: &VisualBlock) -> Self {
        BlockDump {
            id: b.id.clone(),
            doc: b.doc,
            text: b.text.clone(),
            children: b.children.iter().map(BlockDump::from).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// A boundary between two adjacent sibling blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Separator {
    pub orientation: Orientation,
    pub weight: u32,
    /// Indices of the two siblings, `(i, i + 1)`.
    pub between: (usize, usize),
}

/// Joins visible text nodes into block text. Nodes whose nearest
/// block-level ancestors differ, or that have whitespace text between them,
/// are separated by a space.
pub fn join_text(dom: &DomTree, nodes: &[NodeId]) -> String {
    let mut out = String::new();
    let mut prev: Option<(NodeId, Option<NodeId>)> = None;
    for &n in nodes {
        let block = nearest_block(dom, n);
        if let Some((prev_node, prev_block)) = prev {
            // whitespace-only text between the two nodes still separates words
            let gap = (prev_node.0 + 1..n.0).any(|i| {
                dom.node(NodeId(i))
                    .text()
                    .is_some_and(|t| t.contains(char::is_whitespace))
            });
            if gap || prev_block != block {
                out.push(' ');
            }
        }
        out.push_str(dom.node(n).text().unwrap_or(""));
        prev = Some((n, block));
    }
    out
}

/// Nearest block-level ancestor of a node, if any.
pub fn nearest_block(dom: &DomTree, id: NodeId) -> Option<NodeId> {
    dom.ancestors(id)
        .find(|&a| dom.node(a).tag().map(is_block_level).unwrap_or(false))
}

pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
