//! SMT-LIB v2 solver subprocess.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::SynthProblem;
use crate::interp::{Counterexample, Valuation};
use crate::sexpr::{parse_one, SExprKind};
use crate::term::{FunDef, Sort, Term, TermReader, Value, VarScope};

pub const DEFAULT_QUERY_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub path: String,
    pub args: Vec<String>,
    #[serde(with = "secs")]
    pub query_timeout: Duration,
    /// Log every query at debug level.
    pub log_queries: bool,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            path: "z3".into(),
            args: vec!["-in".into(), "-smt2".into()],
            query_timeout: DEFAULT_QUERY_TIMEOUT,
            log_queries: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Invalid(Counterexample),
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("cannot start solver `{path}`: {reason}")]
    Spawn { path: String, reason: String },
    #[error("solver crashed: {0}")]
    SolverCrashed(String),
    #[error("solver protocol error: {0}")]
    ProtocolError(String),
    #[error("solver query timed out")]
    Timeout,
}

struct Proc {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    stderr: Arc<Mutex<String>>,
}

impl Proc {
    fn spawn(cfg: &SolverConfig) -> Result<Proc, SolverError> {
        let mut child = Command::new(&cfg.path)
            .args(&cfg.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| SolverError::Spawn {
                path: cfg.path.clone(),
                reason: e.to_string(),
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut err_pipe = child.stderr.take().expect("piped stderr");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = stderr.clone();
        thread::spawn(move || {
            let mut buf = [0u8; 1024];
            while let Ok(n) = err_pipe.read(&mut buf) {
                if n == 0 {
                    break;
                }
                let mut s = sink.lock().unwrap();
                if s.len() < 4096 {
                    s.push_str(&String::from_utf8_lossy(&buf[..n]));
                }
            }
        });
        Ok(Proc {
            child,
            stdin,
            lines: rx,
            stderr,
        })
    }

    fn crashed(&mut self) -> SolverError {
        let _ = self.child.wait();
        let excerpt: String = self.stderr.lock().unwrap().chars().take(400).collect();
        SolverError::SolverCrashed(if excerpt.is_empty() {
            "process exited".into()
        } else {
            excerpt
        })
    }
}

impl Drop for Proc {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A long-lived solver process. Every query starts with `(reset)`; a query
/// that exceeds its timeout kills the process, which is restarted lazily.
pub struct Solver {
    cfg: SolverConfig,
    proc: Option<Proc>,
    calls: u64,
}

fn smt_sort(s: Sort) -> String {
    s.to_string()
}

fn conjunction(ts: &[Term]) -> String {
    match ts {
        [] => "true".into(),
        [t] => t.to_string(),
        _ => format!("(and {})", ts.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ")),
    }
}

impl Solver {
    pub fn new(cfg: SolverConfig) -> Solver {
        Solver {
            cfg,
            proc: None,
            calls: 0,
        }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Queries issued so far.
    pub fn calls(&self) -> u64 {
        self.calls
    }

    fn proc(&mut self) -> Result<&mut Proc, SolverError> {
        if self.proc.is_none() {
            self.proc = Some(Proc::spawn(&self.cfg)?);
        }
        Ok(self.proc.as_mut().unwrap())
    }

    fn send(&mut self, text: &str) -> Result<(), SolverError> {
        if self.cfg.log_queries {
            log::debug!("smt> {text}");
        }
        let p = self.proc()?;
        if p.stdin.write_all(text.as_bytes()).and_then(|_| p.stdin.flush()).is_err() {
            let e = p.crashed();
            self.proc = None;
            return Err(e);
        }
        Ok(())
    }

    fn read_line(&mut self, until: Instant) -> Result<String, SolverError> {
        let p = self.proc.as_mut().expect("process started");
        let wait = until.saturating_duration_since(Instant::now());
        match p.lines.recv_timeout(wait) {
            Ok(l) => Ok(l),
            Err(RecvTimeoutError::Timeout) => {
                self.proc = None;
                Err(SolverError::Timeout)
            }
            Err(RecvTimeoutError::Disconnected) => {
                let e = p.crashed();
                self.proc = None;
                Err(e)
            }
        }
    }

    /// Reads one complete s-expression or atom spanning possibly several lines.
    fn read_response(&mut self, until: Instant) -> Result<String, SolverError> {
        let mut text = String::new();
        let mut depth: i64 = 0;
        loop {
            let line = self.read_line(until)?;
            for c in line.chars() {
                match c {
                    '(' => depth += 1,
                    ')' => depth -= 1,
                    _ => {}
                }
            }
            if !text.is_empty() {
                text.push('\n');
            }
            text.push_str(&line);
            if depth <= 0 && !text.trim().is_empty() {
                return Ok(text);
            }
        }
    }

    /// Runs `script`, which must end in a single `(check-sat)`, then
    /// `get-value` for `terms` when the answer is `sat`.
    fn check(
        &mut self,
        script: &str,
        terms: &[String],
        timeout: Duration,
    ) -> Result<(String, Option<String>), SolverError> {
        self.calls += 1;
        let until = Instant::now() + timeout;
        let mut text = String::from("(reset)\n(set-option :produce-models true)\n");
        text.push_str(script);
        self.send(&text)?;
        let answer = self.read_response(until)?;
        let answer = answer.trim().to_string();
        if answer.starts_with("(error") {
            return Err(SolverError::ProtocolError(answer));
        }
        if answer != "sat" || terms.is_empty() {
            return Ok((answer, None));
        }
        self.send(&format!("(get-value ({}))\n", terms.join(" ")))?;
        let model = self.read_response(until)?;
        if model.trim_start().starts_with("(error") {
            return Err(SolverError::ProtocolError(model));
        }
        Ok((answer, Some(model)))
    }

    /// Checks `∃x. ¬φ[F ↦ candidate]`.
    pub fn verify(&mut self, candidate: &Term, p: &SynthProblem) -> Result<Verdict, SolverError> {
        self.verify_within(candidate, p, self.cfg.query_timeout)
    }

    pub fn verify_within(&mut self, candidate: &Term, p: &SynthProblem, timeout: Duration) -> Result<Verdict, SolverError> {
        if p.constraints.is_empty() {
            return Ok(Verdict::Valid);
        }
        let mut script = String::new();
        for (n, s) in &p.universals {
            script.push_str(&format!("(declare-fun {n} () {})\n", smt_sort(*s)));
        }
        let def = FunDef {
            name: p.target.name.clone(),
            params: p.target.params.clone(),
            ret: p.target.ret,
            body: candidate.clone(),
        };
        script.push_str(&def.to_smtlib_line());
        script.push('\n');
        script.push_str(&format!("(assert (not {}))\n(check-sat)\n", conjunction(&p.constraints)));
        let names: Vec<String> = p.universals.iter().map(|(n, _)| n.clone()).collect();
        let (answer, model) = match self.check(&script, &names, timeout) {
            Ok(r) => r,
            Err(SolverError::Timeout) => return Ok(Verdict::Unknown("timeout".into())),
            Err(e) => return Err(e),
        };
        match answer.as_str() {
            "unsat" => Ok(Verdict::Valid),
            "sat" => {
                let values = match model {
                    Some(m) => parse_model(&m, &p.universals)?,
                    None => Valuation::new(),
                };
                Ok(Verdict::Invalid(Counterexample::from_model(&p.universals, values)))
            }
            "unknown" => Ok(Verdict::Unknown("solver answered unknown".into())),
            other => Err(SolverError::ProtocolError(format!("unexpected answer `{other}`"))),
        }
    }

    /// Whether a closed Boolean term is valid.
    pub fn is_valid(&mut self, t: &Term) -> Result<Option<bool>, SolverError> {
        let (answer, _) = self.check(&format!("(assert (not {t}))\n(check-sat)\n"), &[], self.cfg.query_timeout)?;
        Ok(match answer.as_str() {
            "unsat" => Some(true),
            "sat" => Some(false),
            _ => None,
        })
    }

    /// The solver's value of `t` in the model fixing each variable to `v`.
    pub fn eval(&mut self, t: &Term, v: &Valuation) -> Result<Value, SolverError> {
        let mut script = String::new();
        for (n, s) in t.free_vars() {
            let val = v
                .get(&n)
                .ok_or_else(|| SolverError::ProtocolError(format!("no value for `{n}`")))?;
            script.push_str(&format!("(declare-fun {n} () {})\n(assert (= {n} {val}))\n", smt_sort(s)));
        }
        script.push_str("(check-sat)\n");
        let shown = t.to_string();
        let (answer, model) = self.check(&script, std::slice::from_ref(&shown), self.cfg.query_timeout)?;
        if answer != "sat" {
            return Err(SolverError::ProtocolError(format!("ground model query answered `{answer}`")));
        }
        let model = model.unwrap_or_default();
        let e = parse_one(&model).map_err(|e| SolverError::ProtocolError(e.to_string()))?;
        let pair = e
            .list()
            .and_then(|l| l.first())
            .and_then(|p| p.list())
            .filter(|p| p.len() == 2)
            .ok_or_else(|| SolverError::ProtocolError(format!("malformed get-value reply {model}")))?;
        read_value(&pair[1])
    }
}

fn read_value(e: &crate::sexpr::SExpr) -> Result<Value, SolverError> {
    match TermReader::smtlib().read(e, &VarScope::default()) {
        Ok(Term::Lit(v)) => Ok(v),
        Ok(other) => Err(SolverError::ProtocolError(format!("model value `{other}` is not a literal"))),
        Err(err) => Err(SolverError::ProtocolError(err.to_string())),
    }
}

/// Parses a `get-value` reply `((x v) ...)`.
pub fn parse_model(text: &str, universals: &[(String, Sort)]) -> Result<Valuation, SolverError> {
    let e = parse_one(text).map_err(|e| SolverError::ProtocolError(e.to_string()))?;
    let SExprKind::List(pairs) = &e.kind else {
        return Err(SolverError::ProtocolError(format!("expected a list, got {text}")));
    };
    let mut out = Valuation::new();
    for pair in pairs {
        let Some([name, value]) = pair.list() else {
            return Err(SolverError::ProtocolError(format!("malformed model entry {pair}")));
        };
        let name = name
            .symbol()
            .ok_or_else(|| SolverError::ProtocolError(format!("malformed model name {name}")))?
            .to_string();
        let value = read_value(value)?;
        if let Some((_, s)) = universals.iter().find(|(n, _)| *n == name) {
            if value.sort() != *s {
                return Err(SolverError::ProtocolError(format!("`{name}` has sort {s} but model value {value}")));
            }
        }
        out.insert(name, value);
    }
    Ok(out)
}
