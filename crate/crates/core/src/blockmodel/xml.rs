use super::dom::{DomTree, NodeId, TreeBuilder};
use super::XmlError;

/// A well-formed XML document mapped onto the shared DOM model.
#[derive(Debug, Clone)]
pub struct XmlDocument {
    pub tree: DomTree,
    /// Target of an `<?xml-stylesheet?>` instruction, if the document has one.
    pub stylesheet: Option<String>,
    /// Namespace URI of the document element.
    pub root_namespace: Option<String>,
}

const XHTML_NS: &str = "http://www.w3.org/1999/xhtml";

impl XmlDocument {
    /// Whether the document is XHTML. Data-only XML, with or without an
    /// attached stylesheet, has no HTML structure of its own.
    pub fn has_html_semantics(&self) -> bool {
        let root_is_html = self
            .tree
            .children(self.tree.root())
            .iter()
            .any(|&c| self.tree.node(c).is_element("html"));
        root_is_html || self.root_namespace.as_deref() == Some(XHTML_NS)
    }
}

pub fn parse_xml(body: &[u8]) -> Result<XmlDocument, XmlError> {
    if body.is_empty() {
        return Err(XmlError::Empty);
    }
    let body = body.strip_prefix(b"\xef\xbb\xbf").unwrap_or(body);
    let text = std::str::from_utf8(body).map_err(|e| XmlError::NotWellFormed {
        line: 0,
        column: 0,
        message: format!("invalid UTF-8 at byte {}", e.valid_up_to()),
    })?;
    let options = roxmltree::ParsingOptions {
        allow_dtd: true,
        ..Default::default()
    };
    let doc = roxmltree::Document::parse_with_options(text, options).map_err(|e| {
        let pos = e.pos();
        XmlError::NotWellFormed {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;

    let mut stylesheet = None;
    let mut builder = TreeBuilder::new();
    for child in doc.root().children() {
        if let Some(pi) = child.pi() {
            if pi.target == "xml-stylesheet" {
                stylesheet = Some(pi.value.unwrap_or("").to_string());
            }
        }
    }
    copy_children(doc.root(), NodeId(0), &mut builder);
    Ok(XmlDocument {
        tree: builder.finish(),
        stylesheet,
        root_namespace: doc.root_element().tag_name().namespace().map(str::to_string),
    })
}

fn copy_children(src: roxmltree::Node<'_, '_>, parent: NodeId, builder: &mut TreeBuilder) {
    for child in src.children() {
        if child.is_element() {
            let attributes = child
                .attributes()
                .map(|a| (a.name().to_ascii_lowercase(), a.value().to_string()))
                .collect();
            let id = builder.append_element(
                parent,
                child.tag_name().name().to_ascii_lowercase(),
                attributes,
            );
            copy_children(child, id, builder);
        } else if let Some(text) = child.text() {
            if child.is_text() {
                builder.append_text(parent, text);
            }
        }
    }
}
