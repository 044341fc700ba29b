//! Document model shared across the toolkit: parsed DOM trees, visual
//! blocks and the separators between them.

mod block;
mod dom;
mod html;
mod xml;

pub use block::{
    collapse_whitespace, is_block_level, join_text, nearest_block, BlockDump, BlockId, BlockTree,
    Coherence, CoverViolation, Orientation, Separator, VisualBlock, BLOCK_LEVEL_TAGS,
};
pub use dom::{escape_attr, escape_text, DomNode, DomTree, NodeId, NodeKind};
pub use html::{decode_entities, parse_html, parse_str};
pub use xml::{parse_xml, XmlDocument};

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("empty document")]
    Empty,
    #[error("byte stream is not text (decoded as {encoding}, control character at char {position})")]
    Undecodable { encoding: String, position: usize },
}

#[derive(Debug, thiserror::Error)]
pub enum XmlError {
    #[error("empty document")]
    Empty,
    #[error("not well-formed at {line}:{column}: {message}")]
    NotWellFormed {
        line: u32,
        column: u32,
        message: String,
    },
}
