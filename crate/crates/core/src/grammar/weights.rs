use std::fmt::Write as _;

use thiserror::Error;

use super::derivation::leftmost_derivation;
use super::{Grammar, NtId, RuleId};
use crate::par::Exec;
use crate::term::Term;

pub const DEFAULT_GAMMA: f64 = 0.4;

/// A grammar with one nonnegative weight per rule.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGrammar {
    pub grammar: Grammar,
    pub weights: Vec<f64>,
}

impl WeightedGrammar {
    pub fn new(grammar: Grammar, weights: Vec<f64>) -> WeightedGrammar {
        assert_eq!(grammar.rules().len(), weights.len(), "one weight per rule");
        assert!(weights.iter().all(|w| *w >= 0.0), "weights must be nonnegative");
        WeightedGrammar { grammar, weights }
    }

    pub fn uniform(grammar: Grammar, w: f64) -> WeightedGrammar {
        let n = grammar.rules().len();
        WeightedGrammar::new(grammar, vec![w; n])
    }

    pub fn weight(&self, r: RuleId) -> f64 {
        self.weights[r as usize]
    }

    /// Arithmetic mean of the weights of `nt`'s rules, 0 if it has none.
    pub fn mean_weight(&self, nt: NtId) -> f64 {
        let rules = self.grammar.rules_for(nt);
        if rules.is_empty() {
            return 0.0;
        }
        rules.iter().map(|r| self.weight(*r)).sum::<f64>() / rules.len() as f64
    }

    /// Applies `w' = 10 * ((w + 1) / 10)^gamma` to every rule.
    pub fn smooth(&self, gamma: f64) -> WeightedGrammar {
        WeightedGrammar {
            grammar: self.grammar.clone(),
            weights: self.weights.iter().map(|w| smooth_weight(*w, gamma)).collect(),
        }
    }

    /// Adds per-rule counts to the weights.
    pub fn add_counts(&mut self, counts: &[f64]) {
        for (w, c) in self.weights.iter_mut().zip(counts) {
            *w += c;
        }
    }

    /// Text table of rules, weights and (if given) probabilities.
    pub fn dump(&self, pg: Option<&ProbGrammar>) -> String {
        let mut out = String::new();
        for r in self.grammar.rules() {
            let _ = write!(out, "{:>4}  {:<50} {:>10.4}", r.id, self.grammar.rule_text(r.id), self.weight(r.id));
            if let Some(pg) = pg {
                let _ = write!(out, " {:>8.5} {:>8.5}", pg.p(r.id), pg.p_terminal(r.id));
            }
            out.push('\n');
        }
        out
    }
}

pub fn smooth_weight(w: f64, gamma: f64) -> f64 {
    10.0 * ((w + 1.0) / 10.0).powf(gamma)
}

/// Occurrence counts of each rule over the left-most derivations of
/// `programs`, and the number of programs outside the language.
pub fn count_rules(g: &Grammar, programs: &[Term], exec: Exec) -> (Vec<f64>, usize) {
    let n = g.rules().len();
    exec.map_reduce(
        programs,
        |t| match leftmost_derivation(g, t) {
            Ok(d) => {
                let counts = d.counts(n).into_iter().map(|c| c as f64).collect();
                (counts, 0)
            }
            Err(_) => (vec![0.0; n], 1),
        },
        || (vec![0.0; n], 0),
        |(mut a, sa), (b, sb)| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            (a, sa + sb)
        },
    )
}

/// Weights equal to the number of times each rule appears in the left-most
/// derivations of `programs`. Programs outside the language are skipped.
pub fn weights_from_programs(g: &Grammar, programs: &[Term]) -> WeightedGrammar {
    weights_from_programs_with(g, programs, Exec::auto())
}

pub fn weights_from_programs_with(g: &Grammar, programs: &[Term], exec: Exec) -> WeightedGrammar {
    let (counts, skipped) = count_rules(g, programs, exec);
    if skipped > 0 {
        log::warn!("{skipped} of {} programs are outside the grammar and were skipped", programs.len());
    }
    WeightedGrammar::new(g.clone(), counts)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("nonterminal `{0}` is reachable but all of its rules have zero weight")]
pub struct DegenerateDistribution(pub String);

/// Per-nonterminal probability distributions over rules, and over terminal
/// rules only.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbGrammar {
    pub grammar: Grammar,
    pub prob: Vec<f64>,
    pub prob_terminal: Vec<f64>,
}

impl ProbGrammar {
    pub fn p(&self, r: RuleId) -> f64 {
        self.prob[r as usize]
    }

    pub fn p_terminal(&self, r: RuleId) -> f64 {
        self.prob_terminal[r as usize]
    }

    /// Rules of `nt` with positive probability.
    pub fn support(&self, nt: NtId) -> impl Iterator<Item = RuleId> + '_ {
        self.grammar
            .rules_for(nt)
            .iter()
            .copied()
            .filter(|r| self.p(*r) > 0.0)
    }
}

/// Normalizes weights per left-hand side: `P[r] = w[r] / sum of w over lhs(r)`.
/// `P_Σ` is the same normalization restricted to terminal rules.
pub fn build_pcfg(wg: &WeightedGrammar) -> Result<ProbGrammar, DegenerateDistribution> {
    let g = &wg.grammar;
    let n = g.rules().len();
    let mut prob = vec![0.0; n];
    let mut prob_terminal = vec![0.0; n];
    for nt in 0..g.nonterminals().len() as NtId {
        let rules = g.rules_for(nt);
        let total: f64 = rules.iter().map(|r| wg.weight(*r)).sum();
        let total_terminal: f64 = rules
            .iter()
            .filter(|r| g.rule(**r).is_terminal())
            .map(|r| wg.weight(*r))
            .sum();
        for &r in rules {
            let w = wg.weight(r);
            if total > 0.0 {
                prob[r as usize] = w / total;
            }
            if total_terminal > 0.0 && g.rule(r).is_terminal() {
                prob_terminal[r as usize] = w / total_terminal;
            }
        }
    }
    let reachable = g.reachable_with(&|r| prob[r as usize] > 0.0);
    for (i, live) in reachable.into_iter().enumerate() {
        if live && !g.rules_for(i as NtId).iter().any(|r| prob[*r as usize] > 0.0) {
            return Err(DegenerateDistribution(g.nonterminals()[i].name.clone()));
        }
    }
    Ok(ProbGrammar {
        grammar: g.clone(),
        prob,
        prob_terminal,
    })
}

/// Upper bound on the probability of any complete expression derivable from
/// each nonterminal.
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicTable {
    pub h: Vec<f64>,
}

impl HeuristicTable {
    pub fn get(&self, nt: NtId) -> f64 {
        self.h[nt as usize]
    }
}

pub const FIXPOINT_TOLERANCE: f64 = 1e-12;
pub const FIXPOINT_MAX_SWEEPS: usize = 10_000;

/// Least fixed point of `h(a) = max over a -> b of P[a -> b] * prod h(b_i)`,
/// by Kleene iteration from zero.
pub fn heuristic_fixpoint(pg: &ProbGrammar) -> HeuristicTable {
    let g = &pg.grammar;
    let mut h = vec![0.0f64; g.nonterminals().len()];
    for _ in 0..FIXPOINT_MAX_SWEEPS {
        let next: Vec<f64> = (0..h.len() as NtId)
            .map(|nt| {
                g.rules_for(nt)
                    .iter()
                    .map(|&r| pg.p(r) * g.rule(r).holes().map(|b| h[b as usize]).product::<f64>())
                    .fold(0.0, f64::max)
            })
            .collect();
        let delta = next
            .iter()
            .zip(&h)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        h = next;
        if delta < FIXPOINT_TOLERANCE {
            break;
        }
    }
    HeuristicTable { h }
}
