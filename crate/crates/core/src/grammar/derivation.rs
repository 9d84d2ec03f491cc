use std::collections::HashSet;

use thiserror::Error;

use super::{Grammar, GrammarError, NtId, RuleId, Symbol};
use crate::term::Term;

/// Rule applications in left-most order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Derivation(pub Vec<RuleId>);

impl Derivation {
    /// Occurrences of each rule, indexed by rule id.
    pub fn counts(&self, n_rules: usize) -> Vec<u64> {
        let mut c = vec![0; n_rules];
        for r in &self.0 {
            c[*r as usize] += 1;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("term `{0}` is not in the language of the grammar")]
pub struct NotInLanguage(pub String);

/// Left-most derivation of `t` from the start symbol.
///
/// Rules are tried in id order with backtracking, so for an ambiguous grammar
/// the derivation preferring lower rule ids is returned.
pub fn leftmost_derivation(g: &Grammar, t: &Term) -> Result<Derivation, NotInLanguage> {
    derive_from(g, g.start(), t, &HashSet::new()).ok_or_else(|| NotInLanguage(t.to_string()))
}

/// Derivation of `t` from `nt`. Variables named in `wildcards` match any
/// nonterminal of their sort without consuming a rule.
pub(crate) fn derive_from(
    g: &Grammar,
    nt: NtId,
    t: &Term,
    wildcards: &HashSet<String>,
) -> Option<Derivation> {
    let mut out = Vec::new();
    derive(g, nt, t, wildcards, 0, &mut out).then_some(Derivation(out))
}

fn derive(
    g: &Grammar,
    nt: NtId,
    t: &Term,
    wildcards: &HashSet<String>,
    unit_depth: usize,
    out: &mut Vec<RuleId>,
) -> bool {
    if t.sort() != g.nonterminal(nt).sort {
        return false;
    }
    if let Term::Var { name, .. } = t {
        if wildcards.contains(name) {
            return true;
        }
    }
    for &r in g.rules_for(nt) {
        let mut holes = Vec::new();
        let mut pos = 0;
        let rhs = &g.rule(r).rhs;
        // Chains of unit rules (A -> B) do not consume structure; bound them
        // so cyclic chains cannot recurse forever.
        let unit = matches!(rhs.as_slice(), [Symbol::Hole(_)]);
        if unit && unit_depth >= g.nonterminals().len() {
            continue;
        }
        let next_depth = if unit { unit_depth + 1 } else { 0 };
        if !match_rhs(g, rhs, &mut pos, t, &mut holes) || pos != rhs.len() {
            continue;
        }
        let mark = out.len();
        out.push(r);
        if holes
            .iter()
            .all(|(h, sub)| derive(g, *h, sub, wildcards, next_depth, out))
        {
            return true;
        }
        out.truncate(mark);
    }
    false
}

fn match_rhs<'t>(
    g: &Grammar,
    rhs: &[Symbol],
    pos: &mut usize,
    t: &'t Term,
    holes: &mut Vec<(NtId, &'t Term)>,
) -> bool {
    let Some(s) = rhs.get(*pos).copied() else {
        return false;
    };
    *pos += 1;
    match s {
        Symbol::Hole(nt) => {
            if t.sort() != g.nonterminal(nt).sort {
                return false;
            }
            holes.push((nt, t));
            true
        }
        Symbol::Leaf(id) => g.leaf(id) == t,
        Symbol::Op(op, arity) => match t {
            Term::App { op: top, args, .. } if *top == op && args.len() == arity as usize => {
                args.iter().all(|a| match_rhs(g, rhs, pos, a, holes))
            }
            _ => false,
        },
    }
}

/// Applies each rule to the left-most hole, starting from the start symbol.
pub fn replay(g: &Grammar, d: &Derivation) -> Result<Term, GrammarError> {
    let mut form = vec![Symbol::Hole(g.start())];
    for &r in &d.0 {
        let rule = g.rule(r);
        let at = form
            .iter()
            .position(|s| matches!(s, Symbol::Hole(_)))
            .ok_or(GrammarError::Malformed)?;
        if form[at] != Symbol::Hole(rule.lhs) {
            return Err(GrammarError::Malformed);
        }
        form.splice(at..=at, rule.rhs.iter().copied());
    }
    g.instantiate(&form)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::fixtures::max3_rules;
    use crate::sexpr::parse_one;
    use crate::term::{Sort, TermReader, VarScope};

    pub(crate) fn read(src: &str) -> Term {
        let scope = VarScope::new((0..3).map(|i| (format!("vr{i}"), Sort::Int)));
        TermReader::smtlib().read(&parse_one(src).unwrap(), &scope).unwrap()
    }

    pub(crate) const PROGRAM1: &str =
        "(ite (>= vr0 vr1) (ite (>= vr0 vr2) vr0 vr2) (ite (>= vr1 vr2) vr1 vr2))";

    #[test]
    fn program1_counts() {
        let g = max3_rules();
        let d = leftmost_derivation(&g, &read(PROGRAM1)).unwrap();
        assert_eq!(d.counts(5), vec![3, 3, 3, 4, 3]);
        assert_eq!(replay(&g, &d).unwrap(), read(PROGRAM1));
    }

    #[test]
    fn single_variable() {
        let g = max3_rules();
        assert_eq!(leftmost_derivation(&g, &read("vr0")).unwrap(), Derivation(vec![1]));
    }

    #[test]
    fn outside_language() {
        let g = max3_rules();
        assert!(leftmost_derivation(&g, &read("(+ vr0 vr1)")).is_err());
    }

    #[test]
    fn leftmost_order() {
        let g = max3_rules();
        let d = leftmost_derivation(&g, &read("(ite (>= vr0 vr1) vr2 vr0)")).unwrap();
        assert_eq!(d.0, vec![0, 4, 1, 2, 3, 1]);
    }
}
