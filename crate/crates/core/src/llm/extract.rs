use std::collections::HashMap;

use thiserror::Error;

use crate::frontend::SynthProblem;
use crate::sexpr::{Atom, Pos, Reader, SExpr, SExprKind};
use crate::term::{Dialect, FunDef, Scope, Sort, Term, TermError, TermReader};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("no function definition in the response")]
    NoProgramFound,
    #[error("function `{0}` has no body")]
    IncompleteFunction(String),
    #[error("`{0}` is not a parameter of the function")]
    UnboundVariable(String),
    #[error("malformed function: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConvertError {
    #[error("unsupported operator `{0}`")]
    UnsupportedOperator(String),
    #[error("expected {expected} parameters, found {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("sort error: {0}")]
    Sort(String),
}

/// A function definition found in a model response, not yet sort-checked.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedFun {
    pub dialect: Dialect,
    pub name: String,
    /// Parameter names with their sorts when the definition declares them.
    pub params: Vec<(String, Option<Sort>)>,
    pub ret: Option<Sort>,
    pub body: SExpr,
    /// The definition as it appeared in the response.
    pub text: String,
}

fn malformed(msg: impl Into<String>) -> ExtractError {
    ExtractError::Malformed(msg.into())
}

fn parse_sort(e: &SExpr) -> Result<Sort, ExtractError> {
    Sort::parse(e).map_err(|err| malformed(err.to_string()))
}

fn params_of(e: &SExpr, dialect: Dialect) -> Result<Vec<(String, Option<Sort>)>, ExtractError> {
    let items = e.list().ok_or_else(|| malformed("parameter list expected"))?;
    items
        .iter()
        .map(|it| match (&it.kind, dialect) {
            (SExprKind::Atom(Atom::Symbol(s)), Dialect::Lisp) => Ok((s.clone(), None)),
            (SExprKind::List(pair), _) => match pair.as_slice() {
                [n, s] => Ok((
                    n.symbol().ok_or_else(|| malformed("parameter name expected"))?.to_string(),
                    Some(parse_sort(s)?),
                )),
                _ => Err(malformed(format!("bad parameter {it}"))),
            },
            _ => Err(malformed(format!("bad parameter {it}"))),
        })
        .collect()
}

fn is_literal_symbol(s: &str, dialect: Dialect) -> bool {
    matches!(s, "true" | "false")
        || (dialect == Dialect::Lisp && matches!(s, "t" | "nil"))
        || (s.starts_with('-') && s.len() > 1 && s[1..].chars().all(|c| c.is_ascii_digit()))
}

/// First symbol in argument position that no parameter or `let` binds.
fn first_unbound(e: &SExpr, bound: &mut Vec<String>, dialect: Dialect) -> Option<String> {
    match &e.kind {
        SExprKind::Atom(Atom::Symbol(s)) => {
            (!bound.contains(s) && !is_literal_symbol(s, dialect)).then(|| s.clone())
        }
        SExprKind::Atom(_) => None,
        SExprKind::List(items) => {
            let head = items.first().and_then(SExpr::symbol);
            match head {
                Some("_") => None,
                Some("let") | Some("let*") if items.len() == 3 => {
                    let bindings = items[1].list()?;
                    let base = bound.len();
                    let mut names = Vec::new();
                    for b in bindings {
                        let pair = b.list()?;
                        if let Some(v) = pair.get(1) {
                            if head == Some("let*") {
                                bound.extend(names.drain(..));
                            }
                            if let Some(u) = first_unbound(v, bound, dialect) {
                                bound.truncate(base);
                                return Some(u);
                            }
                        }
                        if let Some(n) = pair.first().and_then(SExpr::symbol) {
                            names.push(n.to_string());
                        }
                    }
                    bound.extend(names);
                    let r = first_unbound(&items[2], bound, dialect);
                    bound.truncate(base);
                    r
                }
                Some(_) => items[1..].iter().find_map(|a| first_unbound(a, bound, dialect)),
                None => items.iter().find_map(|a| first_unbound(a, bound, dialect)),
            }
        }
    }
}

fn parse_fun(e: &SExpr, text: &str) -> Result<ExtractedFun, ExtractError> {
    let items = e.list().ok_or_else(|| malformed("list expected"))?;
    let dialect = match items.first().and_then(SExpr::symbol) {
        Some("defun") => Dialect::Lisp,
        Some("define-fun") => Dialect::SmtLib,
        _ => return Err(ExtractError::NoProgramFound),
    };
    let name = items
        .get(1)
        .and_then(SExpr::symbol)
        .ok_or_else(|| malformed("function name expected"))?
        .to_string();
    let params = params_of(items.get(2).ok_or_else(|| ExtractError::IncompleteFunction(name.clone()))?, dialect)?;
    let (ret, body) = match dialect {
        Dialect::Lisp => {
            // Skip docstrings; the last form is the value.
            let forms: Vec<&SExpr> = items[3..]
                .iter()
                .filter(|f| !matches!(f.kind, SExprKind::Atom(Atom::Str(_))))
                .collect();
            (None, forms.last().copied().cloned())
        }
        Dialect::SmtLib => {
            let ret = items.get(3).map(parse_sort).transpose()?;
            if items.len() > 5 {
                return Err(malformed(format!("`{name}` has more than one body")));
            }
            (ret, items.get(4).cloned())
        }
    };
    let body = body.ok_or_else(|| ExtractError::IncompleteFunction(name.clone()))?;
    let mut bound: Vec<String> = params.iter().map(|(n, _)| n.clone()).collect();
    if let Some(v) = first_unbound(&body, &mut bound, dialect) {
        return Err(ExtractError::UnboundVariable(v));
    }
    Ok(ExtractedFun {
        dialect,
        name,
        params,
        ret,
        body,
        text: text.to_string(),
    })
}

fn next_definition(text: &str, from: usize) -> Option<usize> {
    let rest = &text[from..];
    [rest.find("(defun"), rest.find("(define-fun")]
        .into_iter()
        .flatten()
        .min()
        .map(|i| from + i)
}

fn read_at(response: &str, at: usize) -> Result<(ExtractedFun, usize), ExtractError> {
    let mut reader = Reader::new(&response[at..]);
    let e = reader
        .next_expr()
        .map_err(|e| malformed(e.to_string()))?
        .ok_or(ExtractError::NoProgramFound)?;
    let end = at + reader.offset();
    Ok((parse_fun(&e, &response[at..end])?, end))
}

/// The first `defun` or `define-fun` in a response, ignoring surrounding
/// prose and code fences.
pub fn extract_program(response: &str) -> Result<ExtractedFun, ExtractError> {
    let at = next_definition(response, 0).ok_or(ExtractError::NoProgramFound)?;
    read_at(response, at).map(|(f, _)| f)
}

/// Every well-formed definition in a response, in order.
pub fn extract_all(response: &str) -> Vec<ExtractedFun> {
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(at) = next_definition(response, from) {
        match read_at(response, at) {
            Ok((f, end)) => {
                out.push(f);
                from = end;
            }
            Err(e) => {
                log::debug!("skipping definition at byte {at}: {e}");
                from = at + 1;
            }
        }
    }
    out
}

struct FunScope<'a> {
    vars: HashMap<String, Sort>,
    helpers: &'a [FunDef],
}

impl Scope for FunScope<'_> {
    fn var_sort(&self, name: &str) -> Option<Sort> {
        self.vars.get(name).copied()
    }

    fn apply(&self, name: &str, args: Vec<Term>, _pos: Pos) -> Option<Result<Term, TermError>> {
        let h = self
            .helpers
            .iter()
            .rev()
            .find(|h| h.name == name && h.params.len() == args.len())?;
        for ((_, s), a) in h.params.iter().zip(&args) {
            if a.sort() != *s {
                return None;
            }
        }
        let map = h.params.iter().map(|(n, _)| n.clone()).zip(args).collect();
        Some(Ok(h.body.substitute(&map)))
    }
}

fn read_body(ex: &ExtractedFun, sorts: &[Sort], helpers: &[FunDef]) -> Result<Term, ConvertError> {
    let scope = FunScope {
        vars: ex.params.iter().map(|(n, _)| n.clone()).zip(sorts.iter().copied()).collect(),
        helpers,
    };
    let reader = match ex.dialect {
        Dialect::Lisp => TermReader::lisp(),
        Dialect::SmtLib => TermReader::smtlib(),
    };
    reader.read(&ex.body, &scope).map_err(|e| match e {
        TermError::UnknownOperator { name, .. } => ConvertError::UnsupportedOperator(name),
        TermError::UnboundVariable { name, .. } => ConvertError::UnboundVariable(name),
        other => ConvertError::Sort(other.to_string()),
    })
}

/// Types an extracted function against the target signature: sorts come
/// from the target, parameters are renamed to the target's in order.
pub fn lisp_to_smtlib(ex: &ExtractedFun, p: &SynthProblem) -> Result<FunDef, ConvertError> {
    let target = &p.target;
    if ex.params.len() != target.params.len() {
        return Err(ConvertError::ArityMismatch {
            expected: target.params.len(),
            found: ex.params.len(),
        });
    }
    let sorts: Vec<Sort> = target.params.iter().map(|(_, s)| *s).collect();
    for ((n, declared), s) in ex.params.iter().zip(&sorts) {
        if declared.is_some_and(|d| d != *s) {
            return Err(ConvertError::Sort(format!("parameter `{n}` should have sort {s}")));
        }
    }
    let body = read_body(ex, &sorts, &[])?;
    if body.sort() != target.ret {
        return Err(ConvertError::Sort(format!("body has sort {}, expected {}", body.sort(), target.ret)));
    }
    let rename: HashMap<&str, &str> = ex
        .params
        .iter()
        .map(|(n, _)| n.as_str())
        .zip(target.params.iter().map(|(n, _)| n.as_str()))
        .collect();
    let body = body.rename(&|n| rename.get(n).map(|s| s.to_string()));
    Ok(p.candidate(body))
}

/// Types a helper function proposed during search. Calls of `earlier`
/// helpers are inlined. Undeclared parameter sorts default to the sort of
/// the target's first parameter.
pub fn helper_to_fundef(ex: &ExtractedFun, earlier: &[FunDef], p: &SynthProblem) -> Result<FunDef, ConvertError> {
    let fallback = p.target.params.first().map(|(_, s)| *s).unwrap_or(p.target.ret);
    let sorts: Vec<Sort> = ex.params.iter().map(|(_, s)| s.unwrap_or(fallback)).collect();
    let body = read_body(ex, &sorts, earlier)?;
    if let Some(r) = ex.ret {
        if body.sort() != r {
            return Err(ConvertError::Sort(format!("`{}` declares {r} but returns {}", ex.name, body.sort())));
        }
    }
    Ok(FunDef {
        name: ex.name.clone(),
        params: ex.params.iter().map(|(n, _)| n.clone()).zip(sorts).collect(),
        ret: body.sort(),
        body,
    })
}
