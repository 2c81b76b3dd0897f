//! Post-OCR tooling for polytonic Greek corpora.

pub mod corpus_vert;
pub mod greek_text;
pub mod layout_eval;
pub mod layout_model;
pub mod ocr_eval;
pub mod par;
pub mod pipeline;
pub mod text_pipeline;
