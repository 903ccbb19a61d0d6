//! Harmonization, export and evaluation toolkit for historical document
//! layout corpora.
//!
//! Sources (PAGE XML, COCO JSON) are read into a [`corpus::CorpusDataset`]
//! of polygons with derived axis-aligned and oriented boxes, relabeled
//! under an [`ontology::Ontology`], filtered, split and merged by
//! [`pipeline`], written out by [`export`] and scored by [`eval`].

pub mod corpus;
pub mod error;
pub mod eval;
pub mod export;
pub mod geometry;
pub mod io;
pub mod ontology;
pub mod par;
pub mod pipeline;
pub mod profile;

pub use error::{Error, Result};
