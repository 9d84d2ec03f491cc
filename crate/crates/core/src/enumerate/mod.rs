//! Search over grammar trees: a probabilistic top-down sampler and weighted
//! A*, both optionally consulting a feedback hook every n-th iteration.

mod astar;
mod topdown;

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::grammar::{Derivation, DegenerateDistribution, Grammar, GrammarError, NtId, RuleId, Symbol, WeightedGrammar};
use crate::interp::{Counterexample, EvalError};
use crate::term::Term;

pub use astar::{astar_cost, astar_enumerate, astar_heuristic, AStar};
pub use topdown::{complete_program, replace_nonterminals, topdown_enumerate, RuleSampler, TopDown};

/// A partial program: prefix-ordered symbols with typed holes, and the rules
/// applied so far (in application order).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SententialForm {
    pub symbols: Vec<Symbol>,
    pub derivation: Derivation,
}

impl SententialForm {
    pub fn start(g: &Grammar) -> SententialForm {
        SententialForm {
            symbols: vec![Symbol::Hole(g.start())],
            derivation: Derivation::default(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.holes().next().is_none()
    }

    pub fn holes(&self) -> impl Iterator<Item = NtId> + '_ {
        self.symbols.iter().filter_map(|s| match s {
            Symbol::Hole(nt) => Some(*nt),
            _ => None,
        })
    }

    pub fn leftmost_hole(&self) -> Option<(usize, NtId)> {
        self.symbols.iter().enumerate().find_map(|(i, s)| match s {
            Symbol::Hole(nt) => Some((i, *nt)),
            _ => None,
        })
    }

    /// Applies `rule` to the left-most hole, which must be its left-hand side.
    pub fn expand_leftmost(&self, g: &Grammar, rule: RuleId) -> SententialForm {
        let (at, nt) = self.leftmost_hole().expect("form has a hole");
        let r = g.rule(rule);
        assert_eq!(r.lhs, nt, "rule does not match the left-most hole");
        let mut symbols = Vec::with_capacity(self.symbols.len() + r.rhs.len() - 1);
        symbols.extend_from_slice(&self.symbols[..at]);
        symbols.extend_from_slice(&r.rhs);
        symbols.extend_from_slice(&self.symbols[at + 1..]);
        let mut derivation = self.derivation.clone();
        derivation.0.push(rule);
        SententialForm { symbols, derivation }
    }

    pub fn to_term(&self, g: &Grammar) -> Result<Term, GrammarError> {
        g.instantiate(&self.symbols)
    }

    /// Text with every hole printed as `??`.
    pub fn render_holes(&self, g: &Grammar) -> String {
        g.render(&self.symbols, &|_| "??".to_string())
    }

    /// Text with holes printed as their nonterminal names.
    pub fn render(&self, g: &Grammar) -> String {
        g.render(&self.symbols, &|nt| g.nonterminal(nt).name.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchLimits {
    pub max_depth: usize,
    pub feedback_interval: Option<u64>,
    pub candidate_budget: Option<u64>,
    pub wall_clock: Option<Duration>,
    pub seed: u64,
}

pub const DEFAULT_MAX_DEPTH: usize = 12;
pub const DEFAULT_FEEDBACK_INTERVAL: u64 = 2000;
pub const DEFAULT_WALL_CLOCK: Duration = Duration::from_secs(600);

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            max_depth: DEFAULT_MAX_DEPTH,
            feedback_interval: Some(DEFAULT_FEEDBACK_INTERVAL),
            candidate_budget: None,
            wall_clock: Some(DEFAULT_WALL_CLOCK),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnumError {
    #[error("candidate budget or wall clock exhausted")]
    BudgetExhausted,
    #[error("search space exhausted")]
    Exhausted,
    #[error("nonterminal `{0}` has no rule with positive probability")]
    EmptySupport(String),
    #[error(transparent)]
    Degenerate(#[from] DegenerateDistribution),
    #[error("grammar: {0}")]
    Grammar(#[from] GrammarError),
    #[error("evaluation: {0}")]
    Eval(#[from] EvalError),
}

/// Diagnostics emitted during search.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    /// A complete, previously unseen program was checked against the counterexamples.
    Candidate { index: u64, program: String, passed: bool },
    /// A* removed an entry from the frontier.
    Pop { iteration: u64, f: f64, complete: bool, form: String },
    /// The feedback hook ran at this iteration.
    Feedback { iteration: u64, rules_before: usize, rules_after: usize },
    /// The top-down sampler went back to the start symbol.
    Restart { duplicate: bool },
}

pub type Tracer = Box<dyn FnMut(&TraceEvent) + Send>;

/// Receives the current partial program periodically and may return an
/// updated weighted grammar. Rule ids of the old grammar must stay valid
/// (rules may only be appended).
pub trait FeedbackHook: Send {
    fn feedback(&mut self, wg: &WeightedGrammar, partial: &SententialForm, cexs: &[Counterexample]) -> WeightedGrammar;

    /// Called when a candidate fails verification.
    fn note_failure(&mut self, _candidate: &Term, _cex: Option<&Counterexample>) {}

    fn calls(&self) -> u64 {
        0
    }
}

/// A search engine that can be resumed with a growing counterexample set.
pub trait Engine: Send {
    /// Next complete program consistent with `cexs`.
    fn next_candidate(&mut self, cexs: &[Counterexample], deadline: Option<Instant>) -> Result<Term, EnumError>;

    /// A candidate returned earlier failed verification.
    fn note_failure(&mut self, candidate: &Term, cex: Option<&Counterexample>);

    /// Distinct complete programs checked against counterexamples so far.
    fn candidates(&self) -> u64;

    fn feedback_calls(&self) -> u64;

    fn weighted_grammar(&self) -> &WeightedGrammar;
}

pub(crate) fn past(deadline: Option<Instant>) -> bool {
    deadline.is_some_and(|d| Instant::now() >= d)
}
