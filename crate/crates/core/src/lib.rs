//! Enumerative syntax-guided synthesis with grammar weights learned from
//! language-model proposals.

pub mod cegis;
pub mod enumerate;
pub mod frontend;
pub mod grammar;
pub mod interp;
pub mod llm;
pub mod par;
pub mod pipeline;
pub mod sexpr;
pub mod term;
