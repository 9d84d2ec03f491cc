use std::collections::HashSet;

use super::{InvConstraint, SynthProblem};
use crate::term::{FunDef, Term};

pub const TARGET_NAME: &str = "fn";

/// Renaming between original identifiers and generic ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NameMap {
    /// `(original, generic)` pairs for variables and functions.
    pub pairs: Vec<(String, String)>,
}

impl NameMap {
    pub fn forward(&self, name: &str) -> Option<&str> {
        self.pairs.iter().find(|(o, _)| o == name).map(|(_, g)| g.as_str())
    }

    pub fn backward(&self, name: &str) -> Option<&str> {
        self.pairs.iter().find(|(_, g)| g == name).map(|(o, _)| o.as_str())
    }

    pub fn is_identity(&self) -> bool {
        self.pairs.iter().all(|(o, g)| o == g)
    }

    pub fn inverse(&self) -> NameMap {
        NameMap {
            pairs: self.pairs.iter().map(|(o, g)| (g.clone(), o.clone())).collect(),
        }
    }

    /// Renames the free variables and calls of a term.
    pub fn apply_term(&self, t: &Term) -> Term {
        t.rename(&|n| self.forward(n).map(str::to_string))
    }

    /// Renames a function definition and its parameters.
    pub fn apply_fun(&self, f: &FunDef) -> FunDef {
        let rn = |n: &str| self.forward(n).unwrap_or(n).to_string();
        FunDef {
            name: rn(&f.name),
            params: f.params.iter().map(|(p, s)| (rn(p), *s)).collect(),
            ret: f.ret,
            body: self.apply_term(&f.body),
        }
    }
}

/// Renames the target to `fn` and variables to `vr0, vr1, ...` (universals
/// first, then target parameters that are not universals).
pub fn anonymize(p: &SynthProblem) -> (SynthProblem, NameMap) {
    let mut originals: HashSet<&str> = HashSet::new();
    originals.insert(&p.target.name);
    originals.extend(p.universals.iter().map(|(n, _)| n.as_str()));
    originals.extend(p.target.params.iter().map(|(n, _)| n.as_str()));
    originals.extend(p.defs.iter().map(|d| d.name.as_str()));

    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut k = 0usize;
    let vars = p.universals.iter().chain(&p.target.params).map(|(n, _)| n);
    for v in vars {
        if pairs.iter().any(|(o, _)| o == v) {
            continue;
        }
        let generic = loop {
            let cand = format!("vr{k}");
            k += 1;
            if cand == *v || !originals.contains(cand.as_str()) {
                break cand;
            }
        };
        pairs.push((v.clone(), generic));
    }
    pairs.push((p.target.name.clone(), TARGET_NAME.to_string()));
    if p.target.name != TARGET_NAME {
        if let Some(clash) = p.defs.iter().find(|d| d.name == TARGET_NAME) {
            let mut i = 0;
            let fresh = loop {
                let cand = format!("{TARGET_NAME}_aux{i}");
                i += 1;
                if !originals.contains(cand.as_str()) {
                    break cand;
                }
            };
            pairs.push((clash.name.clone(), fresh));
        }
    }
    let map = NameMap { pairs };
    (rename_problem(p, &map), map)
}

/// Undoes [`anonymize`].
pub fn deanonymize(p: &SynthProblem, map: &NameMap) -> SynthProblem {
    rename_problem(p, &map.inverse())
}

fn rename_problem(p: &SynthProblem, map: &NameMap) -> SynthProblem {
    let rn = |n: &str| map.forward(n).unwrap_or(n).to_string();
    let mut out = p.clone();
    out.target.name = rn(&p.target.name);
    out.target.params = p.target.params.iter().map(|(n, s)| (rn(n), *s)).collect();
    out.universals = p.universals.iter().map(|(n, s)| (rn(n), *s)).collect();
    out.constraints = p.constraints.iter().map(|c| map.apply_term(c)).collect();
    out.grammar = p.grammar.rename_vars(&|n| map.forward(n).map(str::to_string));
    // Definition bodies only mention their own parameters.
    for d in &mut out.defs {
        d.name = rn(&d.name);
    }
    out.inv = p.inv.as_ref().map(|i| InvConstraint {
        inv: rn(&i.inv),
        pre: rn(&i.pre),
        trans: rn(&i.trans),
        post: rn(&i.post),
    });
    out
}
