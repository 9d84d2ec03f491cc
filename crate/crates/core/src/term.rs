//! Sorted SMT-LIB terms over linear integer arithmetic and fixed-width bit-vectors.

use std::collections::HashMap;
use std::fmt;

use num_bigint::{BigInt, Sign};
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::sexpr::{Atom, ParseError, Pos, SExpr, SExprKind};

/// Widest bit-vector the evaluator supports.
pub const MAX_BV_WIDTH: u32 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Int,
    Bool,
    BitVec(u32),
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Int => f.write_str("Int"),
            Sort::Bool => f.write_str("Bool"),
            Sort::BitVec(w) => write!(f, "(_ BitVec {w})"),
        }
    }
}

impl Sort {
    pub fn is_bv(self) -> bool {
        matches!(self, Sort::BitVec(_))
    }

    pub fn parse(e: &SExpr) -> Result<Sort, TermError> {
        match &e.kind {
            SExprKind::Atom(Atom::Symbol(s)) if s == "Int" => Ok(Sort::Int),
            SExprKind::Atom(Atom::Symbol(s)) if s == "Bool" => Ok(Sort::Bool),
            SExprKind::List(items) => match items.as_slice() {
                [u, b, w] if u.symbol() == Some("_") && b.symbol() == Some("BitVec") => {
                    let width = match &w.kind {
                        SExprKind::Atom(Atom::Numeral(n)) => n.parse::<u32>().ok(),
                        _ => None,
                    };
                    match width {
                        Some(w) if w >= 1 && w <= MAX_BV_WIDTH => Ok(Sort::BitVec(w)),
                        Some(w) if w > MAX_BV_WIDTH => Err(TermError::Unsupported {
                            what: format!("bit-vector width {w}"),
                            pos: e.pos,
                        }),
                        _ => Err(TermError::Parse(e.err("malformed bit-vector sort"))),
                    }
                }
                _ => Err(TermError::Unsupported {
                    what: format!("sort {e}"),
                    pos: e.pos,
                }),
            },
            _ => Err(TermError::Unsupported {
                what: format!("sort {e}"),
                pos: e.pos,
            }),
        }
    }
}

/// Mask with the low `width` bits set.
pub fn bv_mask(width: u32) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

/// A concrete value of some sort.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(BigInt),
    Bool(bool),
    BitVec { width: u32, bits: u128 },
}

impl Value {
    pub fn int(v: i64) -> Value {
        Value::Int(BigInt::from(v))
    }

    /// Builds a bit-vector value, truncating `bits` to `width`.
    pub fn bv(width: u32, bits: u128) -> Value {
        Value::BitVec {
            width,
            bits: bits & bv_mask(width),
        }
    }

    pub fn sort(&self) -> Sort {
        match self {
            Value::Int(_) => Sort::Int,
            Value::Bool(_) => Sort::Bool,
            Value::BitVec { width, .. } => Sort::BitVec(*width),
        }
    }

    /// The canonical "zero" of a sort: 0, false, or all-zero.
    pub fn default_for(sort: Sort) -> Value {
        match sort {
            Sort::Int => Value::Int(BigInt::zero()),
            Sort::Bool => Value::Bool(false),
            Sort::BitVec(w) => Value::bv(w, 0),
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => {
                if n.sign() == Sign::Minus {
                    write!(f, "(- {})", n.abs())
                } else {
                    write!(f, "{n}")
                }
            }
            Value::Bool(b) => write!(f, "{b}"),
            Value::BitVec { width, bits } => {
                if width % 4 == 0 {
                    write!(f, "#x{:0w$x}", bits, w = (*width / 4) as usize)
                } else {
                    write!(f, "#b{:0w$b}", bits, w = *width as usize)
                }
            }
        }
    }
}

/// Built-in operators. Division is deliberately absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Ite,
    Eq,
    Gt,
    Ge,
    Lt,
    Le,
    And,
    Or,
    Not,
    Implies,
    Xor,
    BvAdd,
    BvSub,
    BvMul,
    BvAnd,
    BvOr,
    BvXor,
    BvNot,
    BvNeg,
    BvShl,
    BvLshr,
    BvAshr,
    BvUle,
    BvUlt,
    BvUge,
    BvUgt,
    BvSle,
    BvSlt,
    BvSge,
    BvSgt,
}

const ALL_OPS: &[Op] = &[
    Op::Add,
    Op::Sub,
    Op::Mul,
    Op::Ite,
    Op::Eq,
    Op::Gt,
    Op::Ge,
    Op::Lt,
    Op::Le,
    Op::And,
    Op::Or,
    Op::Not,
    Op::Implies,
    Op::Xor,
    Op::BvAdd,
    Op::BvSub,
    Op::BvMul,
    Op::BvAnd,
    Op::BvOr,
    Op::BvXor,
    Op::BvNot,
    Op::BvNeg,
    Op::BvShl,
    Op::BvLshr,
    Op::BvAshr,
    Op::BvUle,
    Op::BvUlt,
    Op::BvUge,
    Op::BvUgt,
    Op::BvSle,
    Op::BvSlt,
    Op::BvSge,
    Op::BvSgt,
];

impl Op {
    pub fn name(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Ite => "ite",
            Op::Eq => "=",
            Op::Gt => ">",
            Op::Ge => ">=",
            Op::Lt => "<",
            Op::Le => "<=",
            Op::And => "and",
            Op::Or => "or",
            Op::Not => "not",
            Op::Implies => "=>",
            Op::Xor => "xor",
            Op::BvAdd => "bvadd",
            Op::BvSub => "bvsub",
            Op::BvMul => "bvmul",
            Op::BvAnd => "bvand",
            Op::BvOr => "bvor",
            Op::BvXor => "bvxor",
            Op::BvNot => "bvnot",
            Op::BvNeg => "bvneg",
            Op::BvShl => "bvshl",
            Op::BvLshr => "bvlshr",
            Op::BvAshr => "bvashr",
            Op::BvUle => "bvule",
            Op::BvUlt => "bvult",
            Op::BvUge => "bvuge",
            Op::BvUgt => "bvugt",
            Op::BvSle => "bvsle",
            Op::BvSlt => "bvslt",
            Op::BvSge => "bvsge",
            Op::BvSgt => "bvsgt",
        }
    }

    pub fn from_name(name: &str) -> Option<Op> {
        ALL_OPS.iter().copied().find(|op| op.name() == name)
    }

    pub fn all() -> &'static [Op] {
        ALL_OPS
    }

    /// Checks argument sorts and returns the result sort.
    pub fn result_sort(self, args: &[Sort]) -> Result<Sort, SortError> {
        use Op::*;
        let fail = |expected: &str| SortError {
            op: self,
            args: args.to_vec(),
            expected: expected.to_string(),
        };
        let all = |s: Sort| args.iter().all(|a| *a == s);
        match self {
            Add | Mul => {
                if args.len() >= 2 && all(Sort::Int) {
                    Ok(Sort::Int)
                } else {
                    Err(fail("two or more Int"))
                }
            }
            Sub => {
                if !args.is_empty() && all(Sort::Int) {
                    Ok(Sort::Int)
                } else {
                    Err(fail("one or more Int"))
                }
            }
            Gt | Ge | Lt | Le => {
                if args.len() == 2 && all(Sort::Int) {
                    Ok(Sort::Bool)
                } else {
                    Err(fail("two Int"))
                }
            }
            Eq => {
                if args.len() == 2 && args[0] == args[1] {
                    Ok(Sort::Bool)
                } else {
                    Err(fail("two arguments of equal sort"))
                }
            }
            Ite => {
                if args.len() == 3 && args[0] == Sort::Bool && args[1] == args[2] {
                    Ok(args[1])
                } else {
                    Err(fail("Bool and two branches of equal sort"))
                }
            }
            And | Or | Implies => {
                if args.len() >= 2 && all(Sort::Bool) {
                    Ok(Sort::Bool)
                } else {
                    Err(fail("two or more Bool"))
                }
            }
            Xor => {
                if args.len() == 2 && all(Sort::Bool) {
                    Ok(Sort::Bool)
                } else {
                    Err(fail("two Bool"))
                }
            }
            Not => {
                if args.len() == 1 && args[0] == Sort::Bool {
                    Ok(Sort::Bool)
                } else {
                    Err(fail("one Bool"))
                }
            }
            BvNot | BvNeg => match args {
                [s @ Sort::BitVec(_)] => Ok(*s),
                _ => Err(fail("one bit-vector")),
            },
            BvAdd | BvSub | BvMul | BvAnd | BvOr | BvXor | BvShl | BvLshr | BvAshr => match args {
                [a @ Sort::BitVec(_), b] if a == b => Ok(*a),
                _ => Err(fail("two bit-vectors of equal width")),
            },
            BvUle | BvUlt | BvUge | BvUgt | BvSle | BvSlt | BvSge | BvSgt => match args {
                [a @ Sort::BitVec(_), b] if a == b => Ok(Sort::Bool),
                _ => Err(fail("two bit-vectors of equal width")),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("operator {} applied to ({}), expected {expected}", op.name(), args.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", "))]
pub struct SortError {
    pub op: Op,
    pub args: Vec<Sort>,
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{pos}: unknown operator or function `{name}`")]
    UnknownOperator { name: String, pos: Pos },
    #[error("{pos}: unbound variable `{name}`")]
    UnboundVariable { name: String, pos: Pos },
    #[error("{pos}: {source}")]
    Sort { source: SortError, pos: Pos },
    #[error("{pos}: function `{name}` expects {expected} arguments, got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
        pos: Pos,
    },
    #[error("{pos}: argument sorts of `{name}` do not match its signature")]
    CallSort { name: String, pos: Pos },
    #[error("{pos}: unsupported {what}")]
    Unsupported { what: String, pos: Pos },
}

/// A sorted term. `Call` is an application of a declared function
/// (the synthesis target); auxiliary definitions are inlined when parsing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var { name: String, sort: Sort },
    Lit(Value),
    App { op: Op, args: Vec<Term>, sort: Sort },
    Call { func: String, args: Vec<Term>, sort: Sort },
}

impl Term {
    pub fn var(name: impl Into<String>, sort: Sort) -> Term {
        Term::Var {
            name: name.into(),
            sort,
        }
    }

    pub fn int(v: i64) -> Term {
        Term::Lit(Value::int(v))
    }

    pub fn bool(b: bool) -> Term {
        Term::Lit(Value::Bool(b))
    }

    /// Builds a sort-checked application.
    pub fn app(op: Op, args: Vec<Term>) -> Result<Term, SortError> {
        let sorts: Vec<Sort> = args.iter().map(Term::sort).collect();
        let sort = op.result_sort(&sorts)?;
        Ok(Term::App { op, args, sort })
    }

    pub fn sort(&self) -> Sort {
        match self {
            Term::Var { sort, .. } | Term::App { sort, .. } | Term::Call { sort, .. } => *sort,
            Term::Lit(v) => v.sort(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Term::Var { .. } | Term::Lit(_))
    }

    pub fn children(&self) -> &[Term] {
        match self {
            Term::App { args, .. } | Term::Call { args, .. } => args,
            _ => &[],
        }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(Term::size).sum::<usize>()
    }

    /// Number of operator applications (inner nodes).
    pub fn operator_count(&self) -> usize {
        match self {
            Term::App { args, .. } | Term::Call { args, .. } => {
                1 + args.iter().map(Term::operator_count).sum::<usize>()
            }
            _ => 0,
        }
    }

    /// Visits every node in pre-order.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Term)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    pub fn free_vars(&self) -> Vec<(String, Sort)> {
        let mut out: Vec<(String, Sort)> = Vec::new();
        self.visit(&mut |t| {
            if let Term::Var { name, sort } = t {
                if !out.iter().any(|(n, _)| n == name) {
                    out.push((name.clone(), *sort));
                }
            }
        });
        out
    }

    /// Whether `func` is applied anywhere in the term.
    pub fn calls(&self, func: &str) -> bool {
        let mut found = false;
        self.visit(&mut |t| {
            if let Term::Call { func: f, .. } = t {
                found |= f == func;
            }
        });
        found
    }

    /// Replaces variables by terms (simultaneously).
    pub fn substitute(&self, map: &HashMap<String, Term>) -> Term {
        match self {
            Term::Var { name, .. } => map.get(name).cloned().unwrap_or_else(|| self.clone()),
            Term::Lit(_) => self.clone(),
            Term::App { op, args, sort } => Term::App {
                op: *op,
                args: args.iter().map(|a| a.substitute(map)).collect(),
                sort: *sort,
            },
            Term::Call { func, args, sort } => Term::Call {
                func: func.clone(),
                args: args.iter().map(|a| a.substitute(map)).collect(),
                sort: *sort,
            },
        }
    }

    /// Renames variables and called functions according to `rename`.
    pub fn rename(&self, rename: &dyn Fn(&str) -> Option<String>) -> Term {
        match self {
            Term::Var { name, sort } => Term::Var {
                name: rename(name).unwrap_or_else(|| name.clone()),
                sort: *sort,
            },
            Term::Lit(_) => self.clone(),
            Term::App { op, args, sort } => Term::App {
                op: *op,
                args: args.iter().map(|a| a.rename(rename)).collect(),
                sort: *sort,
            },
            Term::Call { func, args, sort } => Term::Call {
                func: rename(func).unwrap_or_else(|| func.clone()),
                args: args.iter().map(|a| a.rename(rename)).collect(),
                sort: *sort,
            },
        }
    }

    /// Inlines every call to `func` with the given definition.
    pub fn inline_call(&self, func: &str, params: &[(String, Sort)], body: &Term) -> Term {
        match self {
            Term::Call { func: f, args, .. } if f == func => {
                let args: Vec<Term> = args.iter().map(|a| a.inline_call(func, params, body)).collect();
                let map: HashMap<String, Term> = params
                    .iter()
                    .map(|(n, _)| n.clone())
                    .zip(args)
                    .collect();
                body.substitute(&map)
            }
            Term::Var { .. } | Term::Lit(_) => self.clone(),
            Term::App { op, args, sort } => Term::App {
                op: *op,
                args: args.iter().map(|a| a.inline_call(func, params, body)).collect(),
                sort: *sort,
            },
            Term::Call { func: f, args, sort } => Term::Call {
                func: f.clone(),
                args: args.iter().map(|a| a.inline_call(func, params, body)).collect(),
                sort: *sort,
            },
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var { name, .. } => f.write_str(name),
            Term::Lit(v) => write!(f, "{v}"),
            Term::App { op, args, .. } => {
                write!(f, "({}", op.name())?;
                for a in args {
                    write!(f, " {a}")?;
                }
                f.write_str(")")
            }
            Term::Call { func, args, .. } => {
                if args.is_empty() {
                    return f.write_str(func);
                }
                write!(f, "({func}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dialect {
    SmtLib,
    Lisp,
}

/// A function with a body, e.g. a candidate solution or a helper.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FunDef {
    pub name: String,
    pub params: Vec<(String, Sort)>,
    pub ret: Sort,
    pub body: Term,
}

impl FunDef {
    /// Renders the definition as `define-fun` or `defun`.
    pub fn print(&self, dialect: Dialect) -> String {
        match dialect {
            Dialect::SmtLib => format!(
                "(define-fun {} ({}) {}\n    {})",
                self.name,
                self.params
                    .iter()
                    .map(|(n, s)| format!("({n} {s})"))
                    .collect::<Vec<_>>()
                    .join(" "),
                self.ret,
                self.body
            ),
            Dialect::Lisp => format!(
                "(defun {} ({})\n    {})",
                self.name,
                self.params
                    .iter()
                    .map(|(n, _)| n.as_str())
                    .collect::<Vec<_>>()
                    .join(" "),
                self.body
            ),
        }
    }

    /// Single-line SMT-LIB form.
    pub fn to_smtlib_line(&self) -> String {
        self.print(Dialect::SmtLib).replace("\n    ", " ")
    }
}

/// Prints a term in the requested dialect. Bodies are identical in both
/// dialects; only function headers differ (see [`FunDef::print`]).
pub fn print_term(t: &Term, _dialect: Dialect) -> String {
    t.to_string()
}

/// Resolution of names while reading terms.
pub trait Scope {
    fn var_sort(&self, name: &str) -> Option<Sort>;
    /// Resolves an application of a non-builtin function. `None` means unknown.
    fn apply(&self, name: &str, args: Vec<Term>, pos: Pos) -> Option<Result<Term, TermError>>;
}

/// Scope with variables only.
#[derive(Debug, Clone, Default)]
pub struct VarScope {
    pub vars: HashMap<String, Sort>,
}

impl VarScope {
    pub fn new(vars: impl IntoIterator<Item = (String, Sort)>) -> Self {
        VarScope {
            vars: vars.into_iter().collect(),
        }
    }
}

impl Scope for VarScope {
    fn var_sort(&self, name: &str) -> Option<Sort> {
        self.vars.get(name).copied()
    }

    fn apply(&self, _name: &str, _args: Vec<Term>, _pos: Pos) -> Option<Result<Term, TermError>> {
        None
    }
}

/// Reads terms from s-expressions, expanding `let` bindings.
pub struct TermReader {
    pub dialect: Dialect,
}

impl TermReader {
    pub fn smtlib() -> Self {
        TermReader {
            dialect: Dialect::SmtLib,
        }
    }

    pub fn lisp() -> Self {
        TermReader {
            dialect: Dialect::Lisp,
        }
    }

    pub fn read(&self, e: &SExpr, scope: &dyn Scope) -> Result<Term, TermError> {
        self.read_in(e, scope, &HashMap::new())
    }

    fn read_in(
        &self,
        e: &SExpr,
        scope: &dyn Scope,
        lets: &HashMap<String, Term>,
    ) -> Result<Term, TermError> {
        match &e.kind {
            SExprKind::Atom(atom) => self.read_atom(atom, e.pos, scope, lets),
            SExprKind::List(items) => {
                let Some(head) = items.first() else {
                    return Err(TermError::Parse(e.err("empty application")));
                };
                if let SExprKind::List(inner) = &head.kind {
                    // (_ bvN w) as a literal in head position is not an application.
                    if inner.first().and_then(SExpr::symbol) == Some("_") && items.len() == 1 {
                        return self.read_in(head, scope, lets);
                    }
                    if inner.first().and_then(SExpr::symbol) == Some("_") {
                        return Err(TermError::Unsupported {
                            what: format!("indexed operator {head}"),
                            pos: head.pos,
                        });
                    }
                    return Err(TermError::Parse(head.err("expected operator symbol")));
                }
                let name = head
                    .symbol()
                    .ok_or_else(|| TermError::Parse(head.err("expected operator symbol")))?;
                match name {
                    "_" => self.read_indexed_literal(items, e.pos),
                    "let" | "let*" => self.read_let(items, e.pos, scope, lets, name == "let*"),
                    _ => {
                        let args = items[1..]
                            .iter()
                            .map(|a| self.read_in(a, scope, lets))
                            .collect::<Result<Vec<_>, _>>()?;
                        self.apply(name, args, head.pos, scope)
                    }
                }
            }
        }
    }

    fn read_atom(
        &self,
        atom: &Atom,
        pos: Pos,
        scope: &dyn Scope,
        lets: &HashMap<String, Term>,
    ) -> Result<Term, TermError> {
        match atom {
            Atom::Numeral(n) => Ok(Term::Lit(Value::Int(n.parse().map_err(|_| {
                TermError::Parse(ParseError::new(pos, "bad numeral"))
            })?))),
            Atom::Hex(h) => {
                let width = 4 * h.len() as u32;
                if width > MAX_BV_WIDTH {
                    return Err(TermError::Unsupported {
                        what: format!("bit-vector width {width}"),
                        pos,
                    });
                }
                let bits = u128::from_str_radix(h, 16)
                    .map_err(|_| TermError::Parse(ParseError::new(pos, "bad hex literal")))?;
                Ok(Term::Lit(Value::bv(width, bits)))
            }
            Atom::Binary(b) => {
                let width = b.len() as u32;
                if width > MAX_BV_WIDTH {
                    return Err(TermError::Unsupported {
                        what: format!("bit-vector width {width}"),
                        pos,
                    });
                }
                let bits = u128::from_str_radix(b, 2)
                    .map_err(|_| TermError::Parse(ParseError::new(pos, "bad binary literal")))?;
                Ok(Term::Lit(Value::bv(width, bits)))
            }
            Atom::Symbol(s) => {
                if let Some(t) = lets.get(s) {
                    return Ok(t.clone());
                }
                match s.as_str() {
                    "true" => return Ok(Term::bool(true)),
                    "false" => return Ok(Term::bool(false)),
                    "t" if self.dialect == Dialect::Lisp && scope.var_sort("t").is_none() => {
                        return Ok(Term::bool(true))
                    }
                    "nil" if self.dialect == Dialect::Lisp && scope.var_sort("nil").is_none() => {
                        return Ok(Term::bool(false))
                    }
                    _ => {}
                }
                if let Some(sort) = scope.var_sort(s) {
                    return Ok(Term::var(s.clone(), sort));
                }
                // Nullary function application written as a bare symbol.
                if let Some(r) = scope.apply(s, Vec::new(), pos) {
                    return r;
                }
                if s.starts_with('-') && s.len() > 1 && s[1..].chars().all(|c| c.is_ascii_digit()) {
                    let n: BigInt = s.parse().expect("digits");
                    return Ok(Term::Lit(Value::Int(n)));
                }
                Err(TermError::UnboundVariable {
                    name: s.clone(),
                    pos,
                })
            }
            Atom::Decimal(_) | Atom::Str(_) | Atom::Keyword(_) => Err(TermError::Unsupported {
                what: "literal kind".to_string(),
                pos,
            }),
        }
    }

    fn read_indexed_literal(&self, items: &[SExpr], pos: Pos) -> Result<Term, TermError> {
        if let [_, name, width] = items {
            if let (Some(n), SExprKind::Atom(Atom::Numeral(w))) = (name.symbol(), &width.kind) {
                if let Some(digits) = n.strip_prefix("bv") {
                    let w: u32 = w
                        .parse()
                        .map_err(|_| TermError::Parse(ParseError::new(pos, "bad width")))?;
                    if w == 0 || w > MAX_BV_WIDTH {
                        return Err(TermError::Unsupported {
                            what: format!("bit-vector width {w}"),
                            pos,
                        });
                    }
                    let v: BigInt = digits
                        .parse()
                        .map_err(|_| TermError::Parse(ParseError::new(pos, "bad bv literal")))?;
                    let modulus = BigInt::from(1u8) << w;
                    let v = ((v % &modulus) + &modulus) % &modulus;
                    let bits = u128::try_from(v).expect("fits in width");
                    return Ok(Term::Lit(Value::bv(w, bits)));
                }
            }
        }
        Err(TermError::Unsupported {
            what: "indexed expression".to_string(),
            pos,
        })
    }

    fn read_let(
        &self,
        items: &[SExpr],
        pos: Pos,
        scope: &dyn Scope,
        lets: &HashMap<String, Term>,
        sequential: bool,
    ) -> Result<Term, TermError> {
        let (Some(bindings), Some(body)) = (items.get(1).and_then(SExpr::list), items.get(2)) else {
            return Err(TermError::Parse(ParseError::new(pos, "malformed let")));
        };
        if items.len() != 3 {
            return Err(TermError::Parse(ParseError::new(pos, "malformed let")));
        }
        let mut inner = lets.clone();
        for b in bindings {
            let pair = b.list().filter(|l| l.len() == 2);
            let (Some(name), Some(val)) = (
                pair.and_then(|p| p[0].symbol()),
                pair.map(|p| &p[1]),
            ) else {
                return Err(TermError::Parse(b.err("malformed let binding")));
            };
            let env = if sequential { &inner } else { lets };
            let v = self.read_in(val, scope, env)?;
            inner.insert(name.to_string(), v);
        }
        self.read_in(body, scope, &inner)
    }

    fn apply(&self, name: &str, args: Vec<Term>, pos: Pos, scope: &dyn Scope) -> Result<Term, TermError> {
        let name = match (self.dialect, name) {
            (Dialect::Lisp, "if") => "ite",
            (Dialect::Lisp, "/=") => {
                let eq = Term::app(Op::Eq, args).map_err(|source| TermError::Sort { source, pos })?;
                return Term::app(Op::Not, vec![eq]).map_err(|source| TermError::Sort { source, pos });
            }
            (_, n) => n,
        };
        // `(- n)` is how negative literals are printed; read it back as one.
        if let (Some(Op::Sub), [Term::Lit(Value::Int(n))]) = (Op::from_name(name), args.as_slice()) {
            if !n.is_negative() {
                return Ok(Term::Lit(Value::Int(-n)));
            }
        }
        if let Some(op) = Op::from_name(name) {
            return Term::app(op, args).map_err(|source| TermError::Sort { source, pos });
        }
        match scope.apply(name, args, pos) {
            Some(r) => r,
            None => Err(TermError::UnknownOperator {
                name: name.to_string(),
                pos,
            }),
        }
    }
}
