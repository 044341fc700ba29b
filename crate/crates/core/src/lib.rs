//! Toolkit for adapting Flash-era web sites to small-screen devices.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! * [`corpus`] fetches pages, classifies them as HTML, XML or Flash and
//!   records them in a dataset manifest.
//! * [`blockmodel`] parses markup into a DOM and defines visual blocks.
//! * [`segmenter`] divides a page into a block tree with degrees of
//!   coherence and cuts it at a permitted degree of coherence.
//! * [`noisefilter`] labels blocks as content or boilerplate from shallow
//!   text features.
//! * [`translator`] rebuilds a Flash site as static HTML from an MHTML
//!   capture plus extracted text segments.
//! * [`proxy`] hosts translated sites on per-domain ports and forwards
//!   everything else.
//! * [`evaluator`] measures response times, computes Cohen's kappa content
//!   coverage and reports which systems work on which technologies.

pub mod blockmodel;
pub mod corpus;
pub mod evaluator;
pub mod noisefilter;
pub mod proxy;
pub mod segmenter;
pub mod translator;
