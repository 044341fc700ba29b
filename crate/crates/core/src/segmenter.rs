//! Structural page segmentation.
//!
//! Blocks are extracted top-down from the DOM: block-level elements become
//! their own blocks, consecutive inline content coalesces into one block,
//! and single-child chains are collapsed. Separators between sibling blocks
//! are weighted from structural cues, and a block's degree of coherence is
//! `10 - min(max child separator weight, 9)` (leaves are 10). A tree is cut
//! at a permitted degree of coherence by not descending into blocks whose
//! coherence already reaches it.

use std::fmt;

use crate::blockmodel::{
    collapse_whitespace, is_block_level, join_text, parse_html, parse_xml, BlockId, BlockTree,
    Coherence, DomTree, NodeId, Orientation, Separator, VisualBlock,
};
use crate::corpus::{classify_technology, flash_signature, PageRecord, PageTechnology};

pub const WEIGHT_BOUNDARY: u32 = 1;
pub const WEIGHT_RULE: u32 = 4;
pub const WEIGHT_HEADING_CHANGE: u32 = 2;
pub const WEIGHT_CATEGORY_CHANGE: u32 = 1;

const MEDIA_TAGS: &[&str] = &[
    "img", "embed", "object", "video", "audio", "iframe", "svg", "canvas",
];

/// Permitted degree of coherence, `1..=10`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PDoC(u8);

impl PDoC {
    pub const DEFAULT: PDoC = PDoC(6);

    pub fn new(value: u8) -> Result<Self, InvalidPDoC> {
        if (1..=10).contains(&value) {
            Ok(PDoC(value))
        } else {
            Err(InvalidPDoC(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl Default for PDoC {
    fn default() -> Self {
        PDoC::DEFAULT
    }
}

impl fmt::Display for PDoC {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("permitted degree of coherence {0} outside 1..=10")]
pub struct InvalidPDoC(pub u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum SegmentError {
    #[error("document has no visible text or media")]
    EmptyDocument,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentationStatus {
    Segmented,
    SingleBlock,
    Unsupported,
}

impl fmt::Display for SegmentationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SegmentationStatus::Segmented => "segmented",
            SegmentationStatus::SingleBlock => "single-block",
            SegmentationStatus::Unsupported => "unsupported",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationOutcome {
    pub status: SegmentationStatus,
    /// The block tree cut at the requested PDoC; its leaves are the
    /// partition. Absent when unsupported.
    pub tree: Option<BlockTree>,
    pub reason: String,
}

impl SegmentationOutcome {
    fn unsupported(reason: impl Into<String>) -> Self {
        SegmentationOutcome {
            status: SegmentationStatus::Unsupported,
            tree: None,
            reason: reason.into(),
        }
    }

    fn from_cut(tree: BlockTree, reason: impl Into<String>) -> Self {
        let status = if tree.leaf_count() >= 2 {
            SegmentationStatus::Segmented
        } else {
            SegmentationStatus::SingleBlock
        };
        SegmentationOutcome {
            status,
            tree: Some(tree),
            reason: reason.into(),
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.tree.as_ref().map(BlockTree::leaf_count).unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Category {
    Table,
    List,
    Text,
    Container,
    Media,
}

fn category(tag: Option<&str>) -> Category {
    match tag {
        Some("table" | "tbody" | "thead" | "tfoot" | "tr" | "td" | "th" | "caption") => {
            Category::Table
        }
        Some("ul" | "ol" | "li" | "dl" | "dt" | "dd" | "menu" | "dir") => Category::List,
        Some(
            "div" | "section" | "article" | "main" | "aside" | "header" | "footer" | "nav"
            | "form" | "fieldset" | "center" | "body" | "html" | "details" | "dialog" | "hgroup"
            | "#document",
        ) => Category::Container,
        Some("img" | "embed" | "object" | "video" | "audio" | "iframe" | "svg" | "canvas"
            | "figure") => Category::Media,
        _ => Category::Text,
    }
}

fn heading_level(tag: &str) -> Option<u8> {
    match tag {
        "h1" => Some(1),
        "h2" => Some(2),
        "h3" => Some(3),
        "h4" => Some(4),
        "h5" => Some(5),
        "h6" => Some(6),
        _ => None,
    }
}

/// Per-node facts computed once per document.
struct Analysis<'a> {
    dom: &'a DomTree,
    /// Element is block-level or has a block-level descendant.
    blocky: Vec<bool>,
    /// Subtree has visible text or visible media.
    content: Vec<bool>,
}

impl<'a> Analysis<'a> {
    fn new(dom: &'a DomTree) -> Self {
        let n = dom.len();
        let mut blocky = vec![false; n];
        let mut content = vec![false; n];
        // ids are in pre-order, so children are visited before parents here
        for id in dom.ids().collect::<Vec<_>>().into_iter().rev() {
            if dom.hides_content(id) {
                continue;
            }
            let node = dom.node(id);
            let own_content = match node.tag() {
                Some(tag) => MEDIA_TAGS.contains(&tag),
                None => node.text().map(|t| !t.trim().is_empty()).unwrap_or(false),
            };
            let kids = dom.children(id);
            content[id.0] = own_content || kids.iter().any(|c| content[c.0]);
            blocky[id.0] = node.tag().map(is_block_level).unwrap_or(false)
                || kids.iter().any(|c| blocky[c.0] && content[c.0]);
        }
        Analysis {
            dom,
            blocky,
            content,
        }
    }

    /// Divides the children of `el` into units: each block-level child is
    /// its own unit; maximal runs of inline children coalesce.
    fn units(&self, el: NodeId) -> Vec<Unit> {
        let mut out = Vec::new();
        let mut run: Vec<NodeId> = Vec::new();
        for &child in self.dom.children(el) {
            if self.dom.hides_content(child) {
                continue;
            }
            if self.blocky[child.0] {
                if !run.is_empty() {
                    out.push(Unit::Inline(std::mem::take(&mut run)));
                }
                if self.content[child.0] {
                    out.push(Unit::Element(child));
                }
            } else if self.content[child.0] {
                run.push(child);
            }
        }
        if !run.is_empty() {
            out.push(Unit::Inline(run));
        }
        out
    }

    fn build(&self, unit: &Unit, id: BlockId) -> VisualBlock {
        match unit {
            Unit::Inline(nodes) => self.leaf(id, nodes.clone()),
            Unit::Element(start) => {
                let mut el = *start;
                let mut units = self.units(el);
                while let [Unit::Element(only)] = units.as_slice() {
                    el = *only;
                    units = self.units(el);
                }
                if units.len() <= 1 {
                    return self.leaf(id, vec![*start]);
                }
                let children: Vec<VisualBlock> = units
                    .iter()
                    .enumerate()
                    .map(|(i, u)| self.build(u, id.child(i)))
                    .collect();
                let max_weight = detect_separators(&children, self.dom)
                    .iter()
                    .map(|s| s.weight)
                    .max()
                    .unwrap_or(0);
                let doc = 10 - max_weight.min(9) as u8;
                let text_nodes: Vec<NodeId> = self.dom.visible_text_nodes(*start);
                VisualBlock {
                    id,
                    doc: Coherence::new(doc).expect("doc within 1..=10"),
                    children,
                    dom_refs: vec![*start],
                    text: collapse_whitespace(&join_text(self.dom, &text_nodes)),
                }
            }
        }
    }

    fn leaf(&self, id: BlockId, dom_refs: Vec<NodeId>) -> VisualBlock {
        let text_nodes: Vec<NodeId> = dom_refs
            .iter()
            .flat_map(|&r| self.dom.visible_text_nodes(r))
            .collect();
        VisualBlock {
            id,
            doc: Coherence::MAX,
            children: Vec::new(),
            dom_refs,
            text: collapse_whitespace(&join_text(self.dom, &text_nodes)),
        }
    }
}

#[derive(Debug, Clone)]
enum Unit {
    Element(NodeId),
    Inline(Vec<NodeId>),
}

/// The element a segmentation starts from: `body` when present.
pub fn segmentation_scope(dom: &DomTree) -> NodeId {
    dom.find_element("body").unwrap_or(dom.root())
}

/// Builds the complete block hierarchy of a document.
pub fn extract_blocks(dom: &DomTree) -> Result<BlockTree, SegmentError> {
    let analysis = Analysis::new(dom);
    let scope = segmentation_scope(dom);
    if !analysis.content[scope.0] {
        return Err(SegmentError::EmptyDocument);
    }
    let root = analysis.build(&Unit::Element(scope), BlockId::root());
    Ok(BlockTree::new(root))
}

fn primary_tag<'d>(block: &VisualBlock, dom: &'d DomTree) -> Option<&'d str> {
    match block.dom_refs.as_slice() {
        [single] => dom.node(*single).tag(),
        _ => None,
    }
}

/// Level of the heading that opens the block, if the block's first visible
/// text sits inside a heading that the block covers.
fn leading_heading(block: &VisualBlock, dom: &DomTree) -> Option<u8> {
    let first = *block.text_nodes(dom).first()?;
    let covered = |n: NodeId| {
        block
            .dom_refs
            .iter()
            .any(|&r| r == n || dom.ancestors(n).any(|a| a == r))
    };
    std::iter::once(first)
        .chain(dom.ancestors(first))
        .take_while(|&n| covered(n))
        .find_map(|n| dom.node(n).tag().and_then(heading_level))
}

fn rule_between(a: &VisualBlock, b: &VisualBlock, dom: &DomTree) -> bool {
    let (Some(&last_a), Some(&first_b)) = (a.dom_refs.last(), b.dom_refs.first()) else {
        return false;
    };
    let parent = dom.node(last_a).parent;
    if parent.is_none() || parent != dom.node(first_b).parent {
        return false;
    }
    let siblings = dom.children(parent.unwrap());
    let pos = |n: NodeId| siblings.iter().position(|&s| s == n);
    match (pos(last_a), pos(first_b)) {
        (Some(i), Some(j)) if i < j => siblings[i + 1..j]
            .iter()
            .any(|&s| dom.node(s).is_element("hr")),
        _ => false,
    }
}

/// Weighs the boundary between each pair of adjacent siblings. Cues add up:
/// every boundary inside a shared parent counts 1, a horizontal rule 4, a
/// change of leading heading level 2 and a change of tag category 1.
pub fn detect_separators(blocks: &[VisualBlock], dom: &DomTree) -> Vec<Separator> {
    blocks
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let (a, b) = (&pair[0], &pair[1]);
            let mut weight = WEIGHT_BOUNDARY;
            if rule_between(a, b, dom) {
                weight += WEIGHT_RULE;
            }
            if leading_heading(a, dom) != leading_heading(b, dom) {
                weight += WEIGHT_HEADING_CHANGE;
            }
            let (ta, tb) = (primary_tag(a, dom), primary_tag(b, dom));
            if category(ta) != category(tb) {
                weight += WEIGHT_CATEGORY_CHANGE;
            }
            let cell = |t: Option<&str>| matches!(t, Some("td" | "th"));
            let orientation = if cell(ta) && cell(tb) {
                Orientation::Vertical
            } else {
                Orientation::Horizontal
            };
            Separator {
                orientation,
                weight,
                between: (i, i + 1),
            }
        })
        .collect()
}

/// Cuts the tree: blocks whose coherence reaches `pdoc` become leaves.
pub fn cut(tree: &BlockTree, pdoc: PDoC) -> BlockTree {
    fn go(b: &VisualBlock, pdoc: PDoC) -> VisualBlock {
        if b.is_leaf() || b.doc.value() >= pdoc.value() {
            b.as_leaf()
        } else {
            VisualBlock {
                children: b.children.iter().map(|c| go(c, pdoc)).collect(),
                ..b.as_leaf()
            }
        }
    }
    BlockTree::new(go(&tree.root, pdoc))
}

/// Leaves of `tree` after cutting at `pdoc`.
pub fn filter_by_pdoc(tree: &BlockTree, pdoc: PDoC) -> Vec<VisualBlock> {
    cut(tree, pdoc).leaves().into_iter().cloned().collect()
}

/// Segments an HTML document at the given granularity.
pub fn segment(dom: &DomTree, pdoc: PDoC) -> SegmentationOutcome {
    match extract_blocks(dom) {
        Ok(tree) => SegmentationOutcome::from_cut(cut(&tree, pdoc), format!("pdoc {pdoc}")),
        Err(e) => SegmentationOutcome::unsupported(e.to_string()),
    }
}

/// Segments a page of any technology. Flash containers and data-only XML
/// are reported as unsupported; HTML shells dominated by a Flash object
/// come out as a single block.
pub fn segment_page(page: &PageRecord, pdoc: PDoC) -> SegmentationOutcome {
    let technology = match page.technology {
        PageTechnology::Unknown => classify_technology(page),
        t => t,
    };
    match technology {
        PageTechnology::Flash => {
            if flash_signature(&page.body).is_some() {
                return SegmentationOutcome::unsupported(
                    "flash: compiled Flash container has no markup to segment",
                );
            }
            let dom = match parse_html(&page.body, None) {
                Ok(d) => d,
                Err(e) => return SegmentationOutcome::unsupported(format!("flash: {e}")),
            };
            match extract_blocks(&dom) {
                Ok(tree) => SegmentationOutcome::from_cut(
                    BlockTree::new(tree.root.as_leaf()),
                    "flash: embedded Flash object dominates the page; segmented as one block",
                ),
                Err(e) => SegmentationOutcome::unsupported(format!("flash: {e}")),
            }
        }
        PageTechnology::Xml => match parse_xml(&page.body) {
            Err(e) => SegmentationOutcome::unsupported(format!("xml: {e}")),
            Ok(doc) if !doc.has_html_semantics() => SegmentationOutcome::unsupported(
                "xml: data-only XML carries no HTML presentation to segment",
            ),
            Ok(doc) => segment(&doc.tree, pdoc),
        },
        PageTechnology::Html | PageTechnology::Unknown => match parse_html(&page.body, None) {
            Ok(dom) => segment(&dom, pdoc),
            Err(e) => SegmentationOutcome::unsupported(format!("{technology}: {e}")),
        },
    }
}
