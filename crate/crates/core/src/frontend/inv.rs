use std::collections::HashMap;

use super::{FrontendError, SynthProblem};
use crate::term::{FunDef, Op, Sort, Term};

fn primed(name: &str) -> String {
    format!("{name}!")
}

fn instantiate(def: &FunDef, args: &[Term]) -> Result<Term, FrontendError> {
    if def.params.len() != args.len() || def.params.iter().zip(args).any(|((_, s), a)| *s != a.sort()) {
        return Err(FrontendError::NotInvariantProblem(format!(
            "`{}` does not match the invariant's state variables",
            def.name
        )));
    }
    let map: HashMap<String, Term> = def
        .params
        .iter()
        .map(|(p, _)| p.clone())
        .zip(args.iter().cloned())
        .collect();
    Ok(def.body.substitute(&map))
}

/// Replaces `(inv-constraint inv pre trans post)` by the three explicit
/// constraints `pre(x) => inv(x)`, `inv(x) and trans(x, x!) => inv(x!)` and
/// `inv(x) => post(x)`, declaring `x` and the primed copies `x!` as universals.
pub fn expand_inv_constraints(p: &SynthProblem) -> Result<SynthProblem, FrontendError> {
    if p.inv_expanded {
        return Ok(p.clone());
    }
    let Some(ic) = &p.inv else {
        return Err(FrontendError::NotInvariantProblem("no inv-constraint".into()));
    };
    if ic.inv != p.target.name {
        return Err(FrontendError::NotInvariantProblem(format!(
            "`{}` is not the synthesis target",
            ic.inv
        )));
    }
    let lookup = |name: &str| {
        p.def(name)
            .ok_or_else(|| FrontendError::NotInvariantProblem(format!("`{name}` is not defined")))
    };
    let (pre, trans, post) = (lookup(&ic.pre)?, lookup(&ic.trans)?, lookup(&ic.post)?);

    let state: Vec<(String, Sort)> = p.target.params.clone();
    let x: Vec<Term> = state.iter().map(|(n, s)| Term::var(n.clone(), *s)).collect();
    let x1: Vec<Term> = state.iter().map(|(n, s)| Term::var(primed(n), *s)).collect();
    let call = |args: &[Term]| Term::Call {
        func: p.target.name.clone(),
        args: args.to_vec(),
        sort: Sort::Bool,
    };
    let both: Vec<Term> = x.iter().chain(&x1).cloned().collect();
    let implies = |a: Term, b: Term| Term::app(Op::Implies, vec![a, b]).expect("Bool operands");

    let mut out = p.clone();
    for (n, s) in state.iter().cloned().chain(state.iter().map(|(n, s)| (primed(n), *s))) {
        if !out.universals.iter().any(|(u, _)| *u == n) {
            out.universals.push((n, s));
        }
    }
    out.constraints.push(implies(instantiate(pre, &x)?, call(&x)));
    let step = Term::app(Op::And, vec![call(&x), instantiate(trans, &both)?]).expect("Bool operands");
    out.constraints.push(implies(step, call(&x1)));
    out.constraints.push(implies(call(&x), instantiate(post, &x)?));
    out.inv_expanded = true;
    Ok(out)
}
