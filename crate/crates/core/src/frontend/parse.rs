use std::collections::HashMap;

use num_traits::Signed;

use super::{default_grammar, FrontendError, InvConstraint, Logic, SynthProblem, TargetFun};
use crate::grammar::{Grammar, NonTerminal, Pattern};
use crate::sexpr::{parse_all, Atom, Pos, SExpr, SExprKind};
use crate::term::{FunDef, Op, Scope, Sort, Term, TermError, TermReader, Value, VarScope};

struct ProblemScope<'a> {
    vars: HashMap<String, Sort>,
    target: Option<&'a TargetFun>,
    defs: &'a [FunDef],
}

fn check_args(name: &str, params: &[(String, Sort)], args: &[Term], pos: Pos) -> Result<(), TermError> {
    if params.len() != args.len() {
        return Err(TermError::Arity {
            name: name.to_string(),
            expected: params.len(),
            got: args.len(),
            pos,
        });
    }
    if params.iter().zip(args).any(|((_, s), a)| a.sort() != *s) {
        return Err(TermError::CallSort {
            name: name.to_string(),
            pos,
        });
    }
    Ok(())
}

impl Scope for ProblemScope<'_> {
    fn var_sort(&self, name: &str) -> Option<Sort> {
        self.vars.get(name).copied()
    }

    fn apply(&self, name: &str, args: Vec<Term>, pos: Pos) -> Option<Result<Term, TermError>> {
        if let Some(t) = self.target.filter(|t| t.name == name) {
            return Some(check_args(name, &t.params, &args, pos).map(|()| Term::Call {
                func: name.to_string(),
                args,
                sort: t.ret,
            }));
        }
        let def = self.defs.iter().find(|d| d.name == name)?;
        Some(check_args(name, &def.params, &args, pos).map(|()| {
            let map = def.params.iter().map(|(p, _)| p.clone()).zip(args).collect();
            def.body.substitute(&map)
        }))
    }
}

fn unsupported(e: &SExpr, what: impl Into<String>) -> FrontendError {
    FrontendError::UnsupportedFeature {
        what: what.into(),
        pos: e.pos,
    }
}

fn malformed(e: &SExpr, what: &str) -> FrontendError {
    FrontendError::Parse(e.err(format!("malformed {what}")))
}

fn symbol_arg<'a>(items: &'a [SExpr], i: usize, parent: &SExpr, what: &str) -> Result<&'a str, FrontendError> {
    items
        .get(i)
        .and_then(SExpr::symbol)
        .ok_or_else(|| malformed(parent, what))
}

fn parse_params(e: &SExpr) -> Result<Vec<(String, Sort)>, FrontendError> {
    let list = e.list().ok_or_else(|| malformed(e, "parameter list"))?;
    list.iter()
        .map(|p| match p.list() {
            Some([name, sort]) => {
                let name = name.symbol().ok_or_else(|| malformed(p, "parameter"))?;
                Ok((name.to_string(), Sort::parse(sort)?))
            }
            _ => Err(malformed(p, "parameter")),
        })
        .collect()
}

/// Parses a SyGuS v2 problem. A `synth-fun` without a grammar receives
/// [`default_grammar`] for the problem's logic.
pub fn parse_problem(text: &str) -> Result<SynthProblem, FrontendError> {
    let commands = parse_all(text)?;
    let mut logic_name: Option<String> = None;
    let mut target: Option<TargetFun> = None;
    let mut grammar_src: Option<(SExpr, Vec<SExpr>)> = None;
    let mut universals: Vec<(String, Sort)> = Vec::new();
    let mut constraints = Vec::new();
    let mut defs: Vec<FunDef> = Vec::new();
    let mut inv = None;
    let mut synth_inv = false;
    let reader = TermReader::smtlib();

    for cmd in &commands {
        let items = cmd.list().ok_or_else(|| cmd.err("expected a command"))?;
        let head = cmd.head().ok_or_else(|| cmd.err("expected a command"))?;
        match head {
            "set-logic" => logic_name = Some(symbol_arg(items, 1, cmd, "set-logic")?.to_string()),
            "set-option" | "set-info" | "set-feature" | "check-synth" => {}
            "declare-var" | "declare-const" | "declare-primed-var" => {
                let name = symbol_arg(items, 1, cmd, head)?;
                let sort = Sort::parse(items.get(2).ok_or_else(|| malformed(cmd, head))?)?;
                universals.push((name.to_string(), sort));
                if head == "declare-primed-var" {
                    universals.push((format!("{name}!"), sort));
                }
            }
            "declare-fun" => match items {
                [_, name, params, sort] if params.list() == Some(&[]) => {
                    let name = name.symbol().ok_or_else(|| malformed(cmd, head))?;
                    universals.push((name.to_string(), Sort::parse(sort)?));
                }
                _ => return Err(unsupported(cmd, "uninterpreted functions with arguments")),
            },
            "define-fun" => {
                let [_, name, params, ret, body] = items else {
                    return Err(malformed(cmd, "define-fun"));
                };
                let name = name.symbol().ok_or_else(|| malformed(cmd, "define-fun"))?.to_string();
                let params = parse_params(params)?;
                let ret = Sort::parse(ret)?;
                let scope = ProblemScope {
                    vars: params.iter().cloned().collect(),
                    target: None,
                    defs: &defs,
                };
                let body = reader.read(body, &scope)?;
                if body.sort() != ret {
                    return Err(FrontendError::Parse(cmd.err(format!(
                        "body of `{name}` has sort {}, declared {ret}",
                        body.sort()
                    ))));
                }
                defs.push(FunDef { name, params, ret, body });
            }
            "synth-fun" | "synth-inv" => {
                if target.is_some() {
                    return Err(unsupported(cmd, "multiple synthesis targets"));
                }
                let inv_cmd = head == "synth-inv";
                let name = symbol_arg(items, 1, cmd, head)?.to_string();
                let params = parse_params(items.get(2).ok_or_else(|| malformed(cmd, head))?)?;
                let (ret, rest) = if inv_cmd {
                    (Sort::Bool, &items[3..])
                } else {
                    let ret = items.get(3).ok_or_else(|| malformed(cmd, head))?;
                    (Sort::parse(ret)?, &items[4..])
                };
                if !rest.is_empty() {
                    grammar_src = Some((cmd.clone(), rest.to_vec()));
                }
                synth_inv |= inv_cmd;
                target = Some(TargetFun { name, params, ret });
            }
            "constraint" => {
                let [_, body] = items else {
                    return Err(malformed(cmd, "constraint"));
                };
                let scope = ProblemScope {
                    vars: universals.iter().cloned().collect(),
                    target: target.as_ref(),
                    defs: &defs,
                };
                let t = reader.read(body, &scope)?;
                if t.sort() != Sort::Bool {
                    return Err(FrontendError::Parse(body.err("constraint is not Boolean")));
                }
                constraints.push(t);
            }
            "inv-constraint" => {
                let names = (1..5)
                    .map(|i| symbol_arg(items, i, cmd, head).map(str::to_string))
                    .collect::<Result<Vec<_>, _>>()?;
                if items.len() != 5 {
                    return Err(malformed(cmd, head));
                }
                inv = Some(InvConstraint {
                    inv: names[0].clone(),
                    pre: names[1].clone(),
                    trans: names[2].clone(),
                    post: names[3].clone(),
                });
            }
            other => return Err(unsupported(cmd, format!("command `{other}`"))),
        }
    }

    let target = target.ok_or(FrontendError::MissingTarget)?;
    let logic_name = logic_name.ok_or_else(|| FrontendError::UnsupportedLogic(String::new()))?;
    let mut logic = Logic::from_name(&logic_name)?;
    if logic == Logic::Lia && (synth_inv || inv.is_some()) {
        logic = Logic::LiaInv;
    }
    let (grammar, custom_grammar) = match &grammar_src {
        Some((cmd, items)) => (parse_grammar(cmd, items, &target.params)?, true),
        None => (default_grammar(logic, &target.params, target.ret)?, false),
    };
    Ok(SynthProblem {
        logic,
        logic_name,
        target,
        universals,
        constraints,
        grammar,
        custom_grammar,
        defs,
        inv,
        inv_expanded: false,
    })
}

fn parse_grammar(cmd: &SExpr, items: &[SExpr], params: &[(String, Sort)]) -> Result<Grammar, FrontendError> {
    // SyGuS v2: ((N S) ...) ((N S (rhs ...)) ...). SyGuS v1: ((N S (rhs ...)) ...).
    let (decls, groups) = match items {
        [decls, groups] => (decls, groups),
        [groups] => (groups, groups),
        _ => return Err(malformed(cmd, "grammar")),
    };
    let decls = decls.list().ok_or_else(|| malformed(cmd, "grammar"))?;
    let mut nts = Vec::new();
    for d in decls {
        match d.list() {
            Some([name, sort, ..]) => nts.push(NonTerminal {
                name: name.symbol().ok_or_else(|| malformed(d, "nonterminal"))?.to_string(),
                sort: Sort::parse(sort)?,
            }),
            _ => return Err(malformed(d, "nonterminal declaration")),
        }
    }
    if nts.is_empty() {
        return Err(malformed(cmd, "grammar"));
    }
    let names: HashMap<String, u32> = nts
        .iter()
        .enumerate()
        .map(|(i, n)| (n.name.clone(), i as u32))
        .collect();
    let mut g = Grammar::new(nts);
    let ctx = PatternCtx {
        names: &names,
        params,
    };
    let mut rules = Vec::new();
    for group in groups.list().ok_or_else(|| malformed(cmd, "grammar"))? {
        let Some([name, _sort, rhs]) = group.list() else {
            return Err(malformed(group, "grammar rule group"));
        };
        let lhs = name
            .symbol()
            .and_then(|n| names.get(n))
            .copied()
            .ok_or_else(|| malformed(group, "grammar rule group"))?;
        for r in rhs.list().ok_or_else(|| malformed(rhs, "rule list"))? {
            for p in ctx.read_rhs(r)? {
                rules.push((lhs, p));
            }
        }
    }
    for (lhs, p) in rules {
        g.add_rule(lhs, &p)?;
    }
    g.validate()?;
    Ok(g)
}

struct PatternCtx<'a> {
    names: &'a HashMap<String, u32>,
    params: &'a [(String, Sort)],
}

impl PatternCtx<'_> {
    fn read_rhs(&self, e: &SExpr) -> Result<Vec<Pattern>, FrontendError> {
        match e.head() {
            Some("Constant") => {
                let sort = Sort::parse(e.list().and_then(|l| l.get(1)).ok_or_else(|| malformed(e, "Constant"))?)?;
                Ok(default_constants(sort).into_iter().map(Pattern::Leaf).collect())
            }
            Some("Variable") => {
                let sort = Sort::parse(e.list().and_then(|l| l.get(1)).ok_or_else(|| malformed(e, "Variable"))?)?;
                Ok(self
                    .params
                    .iter()
                    .filter(|(_, s)| *s == sort)
                    .map(|(n, s)| Pattern::Leaf(Term::var(n.clone(), *s)))
                    .collect())
            }
            _ => Ok(vec![self.read(e)?]),
        }
    }

    fn read(&self, e: &SExpr) -> Result<Pattern, FrontendError> {
        match &e.kind {
            SExprKind::Atom(Atom::Symbol(s)) => {
                if let Some(nt) = self.names.get(s) {
                    return Ok(Pattern::Hole(*nt));
                }
                let scope = VarScope::new(self.params.iter().cloned());
                Ok(Pattern::Leaf(TermReader::smtlib().read(e, &scope)?))
            }
            SExprKind::Atom(_) => Ok(Pattern::Leaf(TermReader::smtlib().read(e, &VarScope::default())?)),
            SExprKind::List(items) => {
                let head = e.head();
                if head == Some("_") {
                    return Ok(Pattern::Leaf(TermReader::smtlib().read(e, &VarScope::default())?));
                }
                if matches!(head, Some("Constant" | "Variable")) {
                    return Err(unsupported(e, "nested Constant/Variable"));
                }
                let name = head.ok_or_else(|| malformed(e, "rule"))?;
                let op = Op::from_name(name).ok_or_else(|| {
                    FrontendError::Term(TermError::UnknownOperator {
                        name: name.to_string(),
                        pos: e.pos,
                    })
                })?;
                let args = items[1..]
                    .iter()
                    .map(|a| self.read(a))
                    .collect::<Result<Vec<_>, _>>()?;
                if let (Op::Sub, [Pattern::Leaf(Term::Lit(Value::Int(n)))]) = (op, args.as_slice()) {
                    if !n.is_negative() {
                        return Ok(Pattern::Leaf(Term::Lit(Value::Int(-n))));
                    }
                }
                Ok(Pattern::App(op, args))
            }
        }
    }
}

/// Literal constants offered for a sort.
pub(crate) fn default_constants(sort: Sort) -> Vec<Term> {
    match sort {
        Sort::Int => vec![Term::int(0), Term::int(1)],
        Sort::Bool => vec![Term::bool(true), Term::bool(false)],
        Sort::BitVec(w) => vec![Term::Lit(Value::bv(w, 0)), Term::Lit(Value::bv(w, 1))],
    }
}
