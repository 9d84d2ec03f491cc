use std::collections::HashSet;

use thiserror::Error;

use super::derivation::derive_from;
use super::{Grammar, NtId, Pattern, WeightedGrammar};
use crate::term::{FunDef, Sort, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiscardedHelper {
    #[error("helper `{helper}` references undefined variable `{name}`")]
    UndefinedVariable { helper: String, name: String },
    #[error("helper `{helper}` calls unknown function `{name}`")]
    UnknownFunction { helper: String, name: String },
    #[error("helper `{helper}` has sort {sort} but no nonterminal of that sort exists")]
    NoNonTerminal { helper: String, sort: Sort },
    #[error("helper `{helper}` body is a bare parameter")]
    Trivial { helper: String },
    #[error("helper `{helper}` is ill-sorted: {reason}")]
    IllSorted { helper: String, reason: String },
}

/// Adds `V -> body` for every nonterminal `V` of the helper's return sort,
/// with each formal parameter replaced by a nonterminal of its sort. A new
/// rule's weight is the mean of the current weights of `V`'s rules.
pub fn augment(wg: &WeightedGrammar, helper: &FunDef) -> Result<WeightedGrammar, DiscardedHelper> {
    let g = &wg.grammar;
    let name = || helper.name.clone();
    if helper.body.sort() != helper.ret {
        return Err(DiscardedHelper::IllSorted {
            helper: name(),
            reason: format!("body has sort {}, declared {}", helper.body.sort(), helper.ret),
        });
    }
    let grammar_vars: HashSet<(String, Sort)> = g.variables().into_iter().collect();
    for (v, sort) in helper.body.free_vars() {
        let formal = helper.params.iter().any(|(p, s)| *p == v && *s == sort);
        if !formal && !grammar_vars.contains(&(v.clone(), sort)) {
            return Err(DiscardedHelper::UndefinedVariable { helper: name(), name: v });
        }
    }
    let mut call = None;
    helper.body.visit(&mut |t| {
        if let Term::Call { func, .. } = t {
            call.get_or_insert_with(|| func.clone());
        }
    });
    if let Some(f) = call {
        return Err(DiscardedHelper::UnknownFunction { helper: name(), name: f });
    }
    if let Term::Var { name: v, .. } = &helper.body {
        if helper.params.iter().any(|(p, _)| p == v) {
            return Err(DiscardedHelper::Trivial { helper: name() });
        }
    }

    let targets: Vec<NtId> = g.nts_of_sort(helper.ret).collect();
    if targets.is_empty() {
        return Err(DiscardedHelper::NoNonTerminal {
            helper: name(),
            sort: helper.ret,
        });
    }
    let mut out = wg.clone();
    for lhs in targets {
        let mut holes = Vec::with_capacity(helper.params.len());
        for (p, sort) in &helper.params {
            let nt = if g.nonterminal(lhs).sort == *sort {
                Some(lhs)
            } else {
                g.nts_of_sort(*sort).next()
            };
            match nt {
                Some(nt) => holes.push((p.as_str(), nt)),
                None => {
                    return Err(DiscardedHelper::NoNonTerminal {
                        helper: name(),
                        sort: *sort,
                    })
                }
            }
        }
        let pattern = Pattern::from_term(&helper.body, &|t| match t {
            Term::Var { name, .. } => holes.iter().find(|(p, _)| p == name).map(|(_, nt)| *nt),
            _ => None,
        })
        .map_err(|e| DiscardedHelper::IllSorted {
            helper: name(),
            reason: e.to_string(),
        })?;
        let mean = out.mean_weight(lhs);
        let before = out.grammar.rules().len();
        out.grammar
            .add_rule(lhs, &pattern)
            .map_err(|e| DiscardedHelper::IllSorted {
                helper: name(),
                reason: e.to_string(),
            })?;
        if out.grammar.rules().len() > before {
            out.weights.push(mean);
        }
    }
    Ok(out)
}

/// Adds, for each helper body, the rule counts of its maximal derivable
/// sub-terms. A sub-term counts when some nonterminal of its sort derives it
/// (formal parameters match any nonterminal of their sort); otherwise its
/// children are tried.
pub fn apply_weight_counts(wg: &WeightedGrammar, helpers: &[FunDef]) -> WeightedGrammar {
    let g = &wg.grammar;
    let mut counts = vec![0.0; g.rules().len()];
    for helper in helpers {
        let formals: HashSet<String> = helper.params.iter().map(|(p, _)| p.clone()).collect();
        count_fragments(g, &helper.body, &formals, &mut counts);
    }
    let mut out = wg.clone();
    out.add_counts(&counts);
    out
}

fn count_fragments(g: &Grammar, t: &Term, formals: &HashSet<String>, counts: &mut [f64]) {
    for nt in g.nts_of_sort(t.sort()) {
        if let Some(d) = derive_from(g, nt, t, formals) {
            for r in d.0 {
                counts[r as usize] += 1.0;
            }
            return;
        }
    }
    for c in t.children() {
        count_fragments(g, c, formals, counts);
    }
}
