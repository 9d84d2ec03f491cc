//! Context-free grammars over sorted terms, their weighted and probabilistic
//! variants, left-most derivations and helper-function augmentation.
//!
//! Right-hand sides are stored in prefix (Polish) order as a flat list of
//! [`Symbol`]s. A sentential form uses the same encoding, so the left-most
//! nonterminal of a form is simply its first [`Symbol::Hole`].

mod augment;
mod derivation;
mod weights;

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::term::{Op, Sort, SortError, Term};

pub use augment::{augment, apply_weight_counts, DiscardedHelper};
pub use derivation::{leftmost_derivation, replay, Derivation, NotInLanguage};
pub use weights::{
    count_rules, weights_from_programs_with,
    build_pcfg, heuristic_fixpoint, smooth_weight, weights_from_programs, DegenerateDistribution,
    HeuristicTable, ProbGrammar, WeightedGrammar, DEFAULT_GAMMA,
};

pub type NtId = u32;
pub type RuleId = u32;
pub type LeafId = u32;

/// One position of a right-hand side or sentential form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Hole(NtId),
    Leaf(LeafId),
    /// Operator applied to the next `arity` subtrees.
    Op(Op, u8),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonTerminal {
    pub name: String,
    pub sort: Sort,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub id: RuleId,
    pub lhs: NtId,
    pub rhs: Vec<Symbol>,
}

impl Rule {
    pub fn is_terminal(&self) -> bool {
        !self.rhs.iter().any(|s| matches!(s, Symbol::Hole(_)))
    }

    pub fn holes(&self) -> impl Iterator<Item = NtId> + '_ {
        self.rhs.iter().filter_map(|s| match s {
            Symbol::Hole(n) => Some(*n),
            _ => None,
        })
    }
}

/// Tree form of a right-hand side, used when building rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    Hole(NtId),
    Leaf(Term),
    App(Op, Vec<Pattern>),
}

impl Pattern {
    /// Converts a term, turning the nodes selected by `hole` into nonterminals.
    pub fn from_term(t: &Term, hole: &dyn Fn(&Term) -> Option<NtId>) -> Result<Pattern, GrammarError> {
        if let Some(nt) = hole(t) {
            return Ok(Pattern::Hole(nt));
        }
        match t {
            Term::Var { .. } | Term::Lit(_) => Ok(Pattern::Leaf(t.clone())),
            Term::App { op, args, .. } => Ok(Pattern::App(
                *op,
                args.iter()
                    .map(|a| Pattern::from_term(a, hole))
                    .collect::<Result<_, _>>()?,
            )),
            Term::Call { func, .. } => Err(GrammarError::CallInRule(func.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("unknown nonterminal `{0}`")]
    UnknownNonTerminal(String),
    #[error("rule for `{lhs}` has sort {got}, expected {expected}")]
    RuleSort { lhs: String, got: Sort, expected: Sort },
    #[error(transparent)]
    Sort(#[from] SortError),
    #[error("function call `{0}` cannot appear in a grammar rule")]
    CallInRule(String),
    #[error("nonterminal `{0}` is reachable from the start symbol but has no rules")]
    NoRules(String),
    #[error("operator with more than 255 arguments")]
    TooManyArgs,
    #[error("sentential form is not complete")]
    Incomplete,
    #[error("malformed symbol sequence")]
    Malformed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grammar {
    nonterminals: Vec<NonTerminal>,
    leaves: Vec<Term>,
    rules: Vec<Rule>,
    start: NtId,
    by_lhs: Vec<Vec<RuleId>>,
    leaf_index: HashMap<Term, LeafId>,
}

impl Grammar {
    /// Creates a grammar with the given nonterminals and no rules. The first
    /// nonterminal is the start symbol.
    pub fn new(nonterminals: Vec<NonTerminal>) -> Grammar {
        assert!(!nonterminals.is_empty(), "grammar needs a start symbol");
        let n = nonterminals.len();
        Grammar {
            nonterminals,
            leaves: Vec::new(),
            rules: Vec::new(),
            start: 0,
            by_lhs: vec![Vec::new(); n],
            leaf_index: HashMap::new(),
        }
    }

    pub fn start(&self) -> NtId {
        self.start
    }

    pub fn nonterminals(&self) -> &[NonTerminal] {
        &self.nonterminals
    }

    pub fn nonterminal(&self, nt: NtId) -> &NonTerminal {
        &self.nonterminals[nt as usize]
    }

    pub fn nt_by_name(&self, name: &str) -> Option<NtId> {
        self.nonterminals
            .iter()
            .position(|n| n.name == name)
            .map(|i| i as NtId)
    }

    pub fn nts_of_sort(&self, sort: Sort) -> impl Iterator<Item = NtId> + '_ {
        self.nonterminals
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.sort == sort)
            .map(|(i, _)| i as NtId)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, id: RuleId) -> &Rule {
        &self.rules[id as usize]
    }

    pub fn rules_for(&self, nt: NtId) -> &[RuleId] {
        &self.by_lhs[nt as usize]
    }

    pub fn leaf(&self, id: LeafId) -> &Term {
        &self.leaves[id as usize]
    }

    pub fn leaves(&self) -> &[Term] {
        &self.leaves
    }

    /// Rules whose right-hand side has no nonterminals.
    pub fn terminal_rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules.iter().filter(|r| r.is_terminal())
    }

    fn intern_leaf(&mut self, t: &Term) -> LeafId {
        if let Some(id) = self.leaf_index.get(t) {
            return *id;
        }
        let id = self.leaves.len() as LeafId;
        self.leaves.push(t.clone());
        self.leaf_index.insert(t.clone(), id);
        id
    }

    fn pattern_sort(&self, p: &Pattern) -> Result<Sort, GrammarError> {
        match p {
            Pattern::Hole(nt) => Ok(self.nonterminal(*nt).sort),
            Pattern::Leaf(t) => Ok(t.sort()),
            Pattern::App(op, args) => {
                let sorts = args
                    .iter()
                    .map(|a| self.pattern_sort(a))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(op.result_sort(&sorts)?)
            }
        }
    }

    fn flatten(&mut self, p: &Pattern, out: &mut Vec<Symbol>) -> Result<(), GrammarError> {
        match p {
            Pattern::Hole(nt) => out.push(Symbol::Hole(*nt)),
            Pattern::Leaf(t) => {
                let id = self.intern_leaf(t);
                out.push(Symbol::Leaf(id));
            }
            Pattern::App(op, args) => {
                let arity = u8::try_from(args.len()).map_err(|_| GrammarError::TooManyArgs)?;
                out.push(Symbol::Op(*op, arity));
                for a in args {
                    self.flatten(a, out)?;
                }
            }
        }
        Ok(())
    }

    /// Flattens a pattern without adding a rule.
    pub fn encode(&mut self, p: &Pattern) -> Result<Vec<Symbol>, GrammarError> {
        let mut rhs = Vec::new();
        self.flatten(p, &mut rhs)?;
        Ok(rhs)
    }

    pub fn find_rule(&self, lhs: NtId, rhs: &[Symbol]) -> Option<RuleId> {
        self.rules_for(lhs)
            .iter()
            .copied()
            .find(|r| self.rule(*r).rhs == rhs)
    }

    /// Adds `lhs -> pattern` after checking its sort. An identical existing
    /// rule is returned instead of being duplicated.
    pub fn add_rule(&mut self, lhs: NtId, pattern: &Pattern) -> Result<RuleId, GrammarError> {
        let expected = self
            .nonterminals
            .get(lhs as usize)
            .ok_or_else(|| GrammarError::UnknownNonTerminal(lhs.to_string()))?
            .sort;
        let got = self.pattern_sort(pattern)?;
        if got != expected {
            return Err(GrammarError::RuleSort {
                lhs: self.nonterminal(lhs).name.clone(),
                got,
                expected,
            });
        }
        let rhs = self.encode(pattern)?;
        if let Some(existing) = self.find_rule(lhs, &rhs) {
            return Ok(existing);
        }
        let id = self.rules.len() as RuleId;
        self.rules.push(Rule { id, lhs, rhs });
        self.by_lhs[lhs as usize].push(id);
        Ok(id)
    }

    /// Nonterminals reachable from the start symbol through rules accepted by `keep`.
    pub fn reachable_with(&self, keep: &dyn Fn(RuleId) -> bool) -> Vec<bool> {
        let mut seen = vec![false; self.nonterminals.len()];
        let mut stack = vec![self.start];
        seen[self.start as usize] = true;
        while let Some(nt) = stack.pop() {
            for &r in self.rules_for(nt) {
                if !keep(r) {
                    continue;
                }
                for h in self.rule(r).holes() {
                    if !seen[h as usize] {
                        seen[h as usize] = true;
                        stack.push(h);
                    }
                }
            }
        }
        seen
    }

    pub fn reachable(&self) -> Vec<bool> {
        self.reachable_with(&|_| true)
    }

    /// Every reachable nonterminal must have at least one rule.
    pub fn validate(&self) -> Result<(), GrammarError> {
        for (i, r) in self.reachable().into_iter().enumerate() {
            if r && self.by_lhs[i].is_empty() {
                return Err(GrammarError::NoRules(self.nonterminals[i].name.clone()));
            }
        }
        Ok(())
    }

    /// Builds the term encoded by a complete symbol sequence.
    pub fn instantiate(&self, symbols: &[Symbol]) -> Result<Term, GrammarError> {
        let mut pos = 0;
        let t = self.build(symbols, &mut pos)?;
        if pos != symbols.len() {
            return Err(GrammarError::Malformed);
        }
        Ok(t)
    }

    fn build(&self, symbols: &[Symbol], pos: &mut usize) -> Result<Term, GrammarError> {
        let s = *symbols.get(*pos).ok_or(GrammarError::Malformed)?;
        *pos += 1;
        match s {
            Symbol::Hole(_) => Err(GrammarError::Incomplete),
            Symbol::Leaf(id) => Ok(self.leaf(id).clone()),
            Symbol::Op(op, arity) => {
                let args = (0..arity)
                    .map(|_| self.build(symbols, pos))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Term::app(op, args)?)
            }
        }
    }

    /// Prints a symbol sequence, rendering each hole with `hole`.
    pub fn render(&self, symbols: &[Symbol], hole: &dyn Fn(NtId) -> String) -> String {
        let mut out = String::new();
        let mut pos = 0;
        while pos < symbols.len() {
            self.render_one(symbols, &mut pos, hole, &mut out);
            if pos < symbols.len() {
                out.push(' ');
            }
        }
        out
    }

    fn render_one(&self, symbols: &[Symbol], pos: &mut usize, hole: &dyn Fn(NtId) -> String, out: &mut String) {
        let Some(s) = symbols.get(*pos).copied() else {
            return;
        };
        *pos += 1;
        match s {
            Symbol::Hole(nt) => out.push_str(&hole(nt)),
            Symbol::Leaf(id) => {
                let _ = write!(out, "{}", self.leaf(id));
            }
            Symbol::Op(op, arity) => {
                out.push('(');
                out.push_str(op.name());
                for _ in 0..arity {
                    out.push(' ');
                    self.render_one(symbols, pos, hole, out);
                }
                out.push(')');
            }
        }
    }

    /// `Start -> (ite StartBool Start Start)`
    pub fn rule_text(&self, id: RuleId) -> String {
        let r = self.rule(id);
        format!(
            "{} -> {}",
            self.nonterminal(r.lhs).name,
            self.render(&r.rhs, &|nt| self.nonterminal(nt).name.clone())
        )
    }

    /// Right-hand side as text, with nonterminal names for holes.
    pub fn rhs_text(&self, id: RuleId) -> String {
        self.render(&self.rule(id).rhs, &|nt| self.nonterminal(nt).name.clone())
    }

    /// Looks up a rule by its textual form `lhs -> rhs`.
    pub fn rule_by_text(&self, text: &str) -> Option<RuleId> {
        (0..self.rules.len() as RuleId).find(|r| self.rule_text(*r) == text)
    }

    /// Renames the variable leaves of the grammar.
    pub fn rename_vars(&self, rename: &dyn Fn(&str) -> Option<String>) -> Grammar {
        let mut g = self.clone();
        g.leaves = self.leaves.iter().map(|t| t.rename(rename)).collect();
        g.leaf_index = g
            .leaves
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as LeafId))
            .collect();
        g
    }

    /// Variables that appear as leaves.
    pub fn variables(&self) -> Vec<(String, Sort)> {
        self.leaves
            .iter()
            .filter_map(|t| match t {
                Term::Var { name, sort } => Some((name.clone(), *sort)),
                _ => None,
            })
            .collect()
    }
}
