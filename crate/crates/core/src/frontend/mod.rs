//! SyGuS v2 problems: parsing, anonymization, invariant expansion and
//! default grammars.

mod anon;
mod defaults;
mod inv;
mod parse;

use std::fmt;

use thiserror::Error;

use crate::grammar::{Grammar, GrammarError};
use crate::sexpr::{ParseError, Pos};
use crate::term::{FunDef, Sort, Term, TermError};

pub use anon::{anonymize, deanonymize, NameMap};
pub use defaults::default_grammar;
pub use inv::expand_inv_constraints;
pub use parse::parse_problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Logic {
    Lia,
    Bv,
    /// Invariant synthesis over linear integer arithmetic.
    LiaInv,
}

impl Logic {
    /// Maps a `set-logic` argument to a supported theory.
    pub fn from_name(name: &str) -> Result<Logic, FrontendError> {
        match name {
            "LIA" | "QF_LIA" => Ok(Logic::Lia),
            "BV" | "QF_BV" => Ok(Logic::Bv),
            other => Err(FrontendError::UnsupportedLogic(other.to_string())),
        }
    }
}

impl fmt::Display for Logic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Logic::Lia => "LIA",
            Logic::Bv => "BV",
            Logic::LiaInv => "INV",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetFun {
    pub name: String,
    pub params: Vec<(String, Sort)>,
    pub ret: Sort,
}

impl TargetFun {
    /// `(define-fun NAME ((p S) ...) RET`, without a body.
    pub fn header(&self) -> String {
        format!(
            "(define-fun {} ({}) {}",
            self.name,
            self.params
                .iter()
                .map(|(n, s)| format!("({n} {s})"))
                .collect::<Vec<_>>()
                .join(" "),
            self.ret
        )
    }
}

/// `(inv-constraint inv pre trans post)`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvConstraint {
    pub inv: String,
    pub pre: String,
    pub trans: String,
    pub post: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthProblem {
    pub logic: Logic,
    /// Argument of `set-logic` as written.
    pub logic_name: String,
    pub target: TargetFun,
    pub universals: Vec<(String, Sort)>,
    /// Constraints with auxiliary definitions inlined; the target appears as
    /// [`Term::Call`].
    pub constraints: Vec<Term>,
    pub grammar: Grammar,
    /// False when the grammar was supplied by [`default_grammar`].
    pub custom_grammar: bool,
    /// Auxiliary `define-fun`s, bodies already inlined.
    pub defs: Vec<FunDef>,
    pub inv: Option<InvConstraint>,
    pub inv_expanded: bool,
}

impl SynthProblem {
    pub fn def(&self, name: &str) -> Option<&FunDef> {
        self.defs.iter().find(|d| d.name == name)
    }

    /// A candidate solution as a function definition of the target.
    pub fn candidate(&self, body: Term) -> FunDef {
        FunDef {
            name: self.target.name.clone(),
            params: self.target.params.clone(),
            ret: self.target.ret,
            body,
        }
    }

    /// The constraints with every call of the target replaced by `body`.
    pub fn instantiate(&self, body: &Term) -> Vec<Term> {
        self.constraints
            .iter()
            .map(|c| c.inline_call(&self.target.name, &self.target.params, body))
            .collect()
    }

    pub fn is_invariant(&self) -> bool {
        self.logic == Logic::LiaInv
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Term(#[from] TermError),
    #[error("{pos}: unsupported feature: {what}")]
    UnsupportedFeature { what: String, pos: Pos },
    #[error("unsupported logic `{0}`")]
    UnsupportedLogic(String),
    #[error("no synth-fun or synth-inv declaration")]
    MissingTarget,
    #[error("not an invariant problem: {0}")]
    NotInvariantProblem(String),
    #[error("grammar: {0}")]
    Grammar(#[from] GrammarError),
}


#[cfg(test)]
pub(crate) mod testdata {
    pub const MAX3: &str = "(set-logic LIA)
(synth-fun fn ((vr0 Int) (vr1 Int) (vr2 Int)) Int)
(declare-var vr0 Int)
(declare-var vr1 Int)
(declare-var vr2 Int)
(constraint (>= (fn vr0 vr1 vr2) vr0))
(constraint (>= (fn vr0 vr1 vr2) vr1))
(constraint (>= (fn vr0 vr1 vr2) vr2))
(constraint (or (= vr0 (fn vr0 vr1 vr2)) (or (= vr1 (fn vr0 vr1 vr2)) (= vr2 (fn vr0 vr1 vr2)))))
(check-synth)
";
}
