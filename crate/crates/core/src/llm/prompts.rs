use super::LlmError;
use crate::frontend::{Logic, SynthProblem};
use crate::interp::Counterexample;
use crate::term::Term;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    InitialSolve,
    Retry,
    ConvertToSmtlib,
    ExplainInvariant,
    IntegratedHelper,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PromptContext {
    /// Partial program with holes printed as `??`.
    pub partial: Option<String>,
    /// Most recently failed candidate and the input it failed on.
    pub last_failed: Option<(Term, Option<Counterexample>)>,
    /// The Lisp function to convert.
    pub lisp: Option<String>,
}

const RETRY: &str = "You are close to the right answer. Take another guess. You have to try something different, think harder. Write a different Lisp method that never violates the SMT-LIB constraints above again.";

const CONVERT: &str = "You are a good programming language converter. Convert the Lisp function to SMT-LIB:
Based on the Lisp code provided above, convert the 'defun' Lisp-like code to a corresponding SMT-LIB function. Use SMT-LIB syntax starting with (define-fun \nFollow these guidelines:
1. Only give me the function definition starting with '(define-fun'.
2. Pay attention to types. If there are bit-vector terms, they need to be of the same width.
3. Ensure the SMT-LIB function contains one and only one function definition starting with '(define-fun'.
4. Do not include any iterations, BitVec, or Int notations in the function body.
5. Use the assigned values from the Lisp code during translation.
6. Do not introduce any variables that do not exist in the Lisp function.
";

const LIA_RULES: &str = "Rules for SMT-LIB: +, -, *, ite, >, =, <, >=, <=, and, or, not, true, false.";
const BV_RULES: &str = "Rules for SMT-LIB: bvadd, bvsub, bvand, bvor, bvxor, bvshl, bvlshr, bvashr, bvnot, bvneg, bvule, bvult, bvuge, bvugt, ite, =, and, or, not, true, false.";

fn constraint_lines(p: &SynthProblem, out: &mut String) {
    for c in &p.constraints {
        out.push_str(&format!("(constraint {c}) \n"));
    }
}

/// The problem as shown to the model: logic, declarations, auxiliary
/// definitions and constraints, one command per line.
pub fn problem_text(p: &SynthProblem) -> String {
    let mut out = format!("(set-logic {}) \n", p.logic_name);
    for (n, s) in &p.universals {
        out.push_str(&format!("(declare-var {n} {s}) \n"));
    }
    for d in &p.defs {
        out.push_str(&format!("{} \n", d.to_smtlib_line()));
    }
    constraint_lines(p, &mut out);
    out.push_str("(check-synth)\n");
    out
}

pub fn render_prompt(kind: PromptKind, p: &SynthProblem, ctx: &PromptContext) -> Result<String, LlmError> {
    let header = p.target.header();
    let name = &p.target.name;
    Ok(match kind {
        PromptKind::InitialSolve => format!(
            "{}You are a good synthesizer. Do you know what \"{header}\" is doing? \n\
             Write only one Lisp-like method \"defun {name}\" without any built-in methods or arrays.\n\
             Requirements: \n\
             1. No built-in functions.\n\
             2. Never violate the SMT-LIB constraints above.\n\
             3. Pay attention to the define functions.\n\
             4. Ensure the response contains one and only one function.\n\
             5. Do not include any iterations, BitVec, or Int notations in the function body.\n\
             Write it correctly, or I will lose my job and 100 grandmothers will die. Don't disappoint me.\n\
             Write only one Lisp-like method \"defun {name}\" that never violates the SMT-LIB constraints above.",
            problem_text(p)
        ),
        PromptKind::Retry => RETRY.to_string(),
        PromptKind::ConvertToSmtlib => {
            let lisp = ctx.lisp.as_deref().ok_or(LlmError::MissingContext("the Lisp function"))?;
            let rules = if p.logic == Logic::Bv { BV_RULES } else { LIA_RULES };
            format!("{lisp}\n{CONVERT}{rules}")
        }
        PromptKind::ExplainInvariant => format!(
            "{}You are a good synthesizer. Before writing any code, explain step by step what the pre-condition, \
             the transition relation and the post-condition in the constraints above require of \"{header}\".",
            problem_text(p)
        ),
        PromptKind::IntegratedHelper => {
            let partial = ctx.partial.as_deref().ok_or(LlmError::MissingContext("a partial program"))?;
            let mut out = String::from(
                "You are teaching a student to write SMT-LIB. The student must write a function that satisfies the following constraints:\n",
            );
            constraint_lines(p, &mut out);
            out.push_str(&format!("So far, the student has written this code:\n{header}\n    {partial}\n"));
            if let Some((cand, cex)) = &ctx.last_failed {
                out.push_str(&format!(
                    "The student's last attempt was:\n{}\n",
                    p.candidate(cand.clone()).to_smtlib_line()
                ));
                if let Some(c) = cex {
                    out.push_str(&format!("It fails on the input {c}.\n"));
                }
            }
            out.push_str(
                "Can you suggest some helper functions for the student to use to complete this code and replace the ??\n\
                 You must print only the code and nothing else.",
            );
            out
        }
    })
}
