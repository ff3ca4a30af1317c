//! External solver process driver.

use std::io::{BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::error::{Error, Result};

use super::model::{parse_assignment, parse_model, validate_assignment};
use super::problem::{ToleranceMode, VerificationProblem};
use super::sexpr::{parse_all, SExpr, Splitter};
use super::smt::Encoding;
use super::{Engine, Status, Verdict};

pub const DEFAULT_SOLVER_COMMAND: &str = "z3 -in -smt2";
pub const DEFAULT_TIMEOUT_SECS: u64 = 300;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub command: String,
    pub timeout_secs: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            command: DEFAULT_SOLVER_COMMAND.into(),
            timeout_secs: DEFAULT_TIMEOUT_SECS,
        }
    }
}

impl SolverConfig {
    pub fn new(command: impl Into<String>, timeout_secs: u64) -> Self {
        SolverConfig {
            command: command.into(),
            timeout_secs,
        }
    }

    fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    fn spawn(&self) -> Result<Child> {
        let mut parts = self.command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| Error::Solver("empty solver command".into()))?;
        Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Solver(format!("cannot start `{}`: {e}", self.command)))
    }

    /// Whether the configured executable can be started at all.
    pub fn available(&self) -> bool {
        run_solver("(check-sat)\n", self).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverOutcome {
    Sat(String),
    Unsat,
    /// Solver answered `unknown` or hit the timeout.
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverRun {
    pub outcome: SolverOutcome,
    pub elapsed: Duration,
}

/// Runs one script to completion and reads back the verdict and model.
pub fn run_solver(script: &str, config: &SolverConfig) -> Result<SolverRun> {
    let mut child = config.spawn()?;
    let start = Instant::now();
    let mut stdin = child.stdin.take().expect("piped stdin");
    let script = script.to_string();
    let writer = thread::spawn(move || {
        // A solver that exits early closes the pipe; that is reported via its output.
        let _ = stdin.write_all(script.as_bytes());
    });
    let stdout = child.stdout.take().expect("piped stdout");
    let stderr = child.stderr.take().expect("piped stderr");
    let reader = thread::spawn(move || read_all(stdout));
    let err_reader = thread::spawn(move || read_all(stderr));

    let status = child.wait_timeout(config.timeout())?;
    let elapsed = start.elapsed();
    if status.is_none() {
        let _ = child.kill();
        let _ = child.wait();
        let _ = writer.join();
        return Ok(SolverRun {
            outcome: SolverOutcome::Unknown(format!("timeout after {} s", config.timeout_secs)),
            elapsed,
        });
    }
    let _ = writer.join();
    let out = reader.join().expect("reader thread");
    let err = err_reader.join().expect("reader thread");
    let outcome = interpret(&out).map_err(|e| match e {
        Error::Solver(msg) if !err.trim().is_empty() => Error::Solver(format!("{msg}; stderr: {}", err.trim())),
        other => other,
    })?;
    Ok(SolverRun { outcome, elapsed })
}

fn read_all(mut r: impl Read) -> String {
    let mut s = String::new();
    let _ = r.read_to_string(&mut s);
    s
}

fn interpret(output: &str) -> Result<SolverOutcome> {
    let exprs = parse_all(output)?;
    let mut iter = exprs.iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::Solver("solver produced no output".into()))?;
    if let Some(msg) = error_message(first) {
        return Err(Error::Solver(msg));
    }
    match first.as_atom() {
        Some("sat") => {
            let model = iter
                .next()
                .map(|e| render(e))
                .unwrap_or_default();
            Ok(SolverOutcome::Sat(model))
        }
        Some("unsat") => Ok(SolverOutcome::Unsat),
        Some("unknown") => Ok(SolverOutcome::Unknown("solver returned unknown".into())),
        _ => Err(Error::Solver(format!("unexpected solver output: {}", output.trim()))),
    }
}

fn error_message(e: &SExpr) -> Option<String> {
    match e.as_list()? {
        [SExpr::Atom(head), SExpr::Str(msg)] if head == "error" => Some(msg.clone()),
        _ => None,
    }
}

fn render(e: &SExpr) -> String {
    match e {
        SExpr::Atom(a) => a.clone(),
        SExpr::Str(s) => format!("\"{}\"", s.replace('"', "\"\"")),
        SExpr::List(items) => format!(
            "({})",
            items.iter().map(render).collect::<Vec<_>>().join(" ")
        ),
    }
}

/// SMT verdict at one tolerance. `UNKNOWN` and timeouts become
/// `INCONCLUSIVE`; a SAT model must pass exact re-simulation.
pub fn smt_verify(problem: &VerificationProblem, mode: ToleranceMode, config: &SolverConfig) -> Result<Verdict> {
    let script = Encoding::from_problem(problem, mode).script();
    let run = run_solver(&script, config)?;
    let mut verdict = match run.outcome {
        SolverOutcome::Sat(model) => {
            let witness = parse_model(&model, problem, mode)?;
            let mut v = Verdict::new(Status::Consistent, Engine::Smt, Some(mode));
            v.witnesses.push(witness);
            v
        }
        SolverOutcome::Unsat => Verdict::new(Status::Inconsistent, Engine::Smt, Some(mode)),
        SolverOutcome::Unknown(reason) => {
            let mut v = Verdict::new(Status::Inconclusive, Engine::Smt, Some(mode));
            v.notices.push(format!("solver: {reason}"));
            v
        }
    };
    verdict.solve_seconds = Some(run.elapsed.as_secs_f64());
    Ok(verdict)
}

/// Long-lived interactive solver process, used for blocking-clause counting.
pub struct SmtSession {
    child: Child,
    stdin: ChildStdin,
    responses: Receiver<String>,
    timeout: Duration,
}

impl SmtSession {
    pub fn start(config: &SolverConfig) -> Result<Self> {
        let mut child = config.spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut splitter = Splitter::default();
            let mut buf = [0u8; 4096];
            let mut reader = BufReader::new(stdout);
            let mut pending = Vec::new();
            loop {
                let k = match reader.read(&mut buf) {
                    Ok(0) | Err(_) => break,
                    Ok(k) => k,
                };
                pending.extend_from_slice(&buf[..k]);
                let valid = match std::str::from_utf8(&pending) {
                    Ok(s) => s.len(),
                    Err(e) => e.valid_up_to(),
                };
                let text = String::from_utf8_lossy(&pending[..valid]).into_owned();
                pending.drain(..valid);
                for c in text.chars() {
                    if let Some(expr) = splitter.push(c) {
                        if tx.send(expr).is_err() {
                            return;
                        }
                    }
                }
            }
        });
        Ok(SmtSession {
            child,
            stdin,
            responses: rx,
            timeout: config.timeout(),
        })
    }

    pub fn send(&mut self, text: &str) -> Result<()> {
        self.stdin
            .write_all(text.as_bytes())
            .and_then(|_| self.stdin.write_all(b"\n"))
            .and_then(|_| self.stdin.flush())
            .map_err(|e| Error::Solver(format!("solver input closed: {e}")))
    }

    fn receive(&mut self, deadline: Instant) -> Result<Option<String>> {
        let wait = deadline.saturating_duration_since(Instant::now());
        match self.responses.recv_timeout(wait) {
            Ok(r) => {
                if let Some(msg) = parse_all(&r).ok().and_then(|e| e.first().and_then(error_message)) {
                    return Err(Error::Solver(msg));
                }
                Ok(Some(r))
            }
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(Error::Solver("solver exited unexpectedly".into())),
        }
    }

    /// `None` on timeout.
    pub fn check_sat(&mut self) -> Result<Option<SolverOutcome>> {
        self.send("(check-sat)")?;
        let deadline = Instant::now() + self.timeout;
        let Some(answer) = self.receive(deadline)? else {
            return Ok(None);
        };
        match answer.as_str() {
            "sat" => Ok(Some(SolverOutcome::Sat(String::new()))),
            "unsat" => Ok(Some(SolverOutcome::Unsat)),
            "unknown" => Ok(Some(SolverOutcome::Unknown("solver returned unknown".into()))),
            other => Err(Error::Solver(format!("unexpected solver answer: {other}"))),
        }
    }

    /// Values of the named integer variables in the current model.
    pub fn get_values(&mut self, names: &[String]) -> Result<Vec<i64>> {
        self.send(&format!("(get-value ({}))", names.join(" ")))?;
        let deadline = Instant::now() + self.timeout;
        let answer = self
            .receive(deadline)?
            .ok_or_else(|| Error::Solver("timeout waiting for get-value".into()))?;
        parse_assignment(&answer, names)
    }
}

impl Drop for SmtSession {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Counts distinct satisfying selections by repeated solving, blocking each
/// full assignment once found. `None` if the solver gave up before the last
/// `unsat`.
pub fn count_by_blocking(
    problem: &VerificationProblem,
    mode: ToleranceMode,
    config: &SolverConfig,
    limit: Option<u64>,
) -> Result<Option<u64>> {
    let encoding = Encoding::from_problem(problem, mode);
    let names = encoding.selection_names();
    let n = encoding.agents();
    let mut session = SmtSession::start(config)?;
    session.send(&encoding.declarations())?;
    let mut count = 0u64;
    loop {
        match session.check_sat()? {
            Some(SolverOutcome::Unsat) => return Ok(Some(count)),
            Some(SolverOutcome::Unknown(_)) | None => return Ok(None),
            Some(SolverOutcome::Sat(_)) => {}
        }
        let values = session.get_values(&names)?;
        let config = validate_assignment(&values, n, problem, mode)?;
        count += 1;
        if limit.is_some_and(|l| count >= l) {
            return Ok(Some(count));
        }
        let clause = names
            .iter()
            .zip(config.init_indices.iter().chain(&config.lambda_levels))
            .map(|(name, v)| format!("(= {name} {v})"))
            .collect::<Vec<_>>()
            .join(" ");
        session.send(&format!("(assert (not (and {clause})))"))?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z3() -> Option<SolverConfig> {
        let c = SolverConfig::new(DEFAULT_SOLVER_COMMAND, 30);
        c.available().then_some(c)
    }

    #[test]
    fn trivial_scripts() {
        let Some(c) = z3() else { return };
        assert_eq!(run_solver("(check-sat)", &c).unwrap().outcome, SolverOutcome::Sat(String::new()));
        assert_eq!(run_solver("(assert false)(check-sat)", &c).unwrap().outcome, SolverOutcome::Unsat);
    }

    #[test]
    fn solver_errors_surface() {
        let Some(c) = z3() else { return };
        assert!(run_solver("(assert (= x 1))(check-sat)", &c).is_err());
    }

    #[test]
    fn missing_executable_is_an_error() {
        let c = SolverConfig::new("definitely-not-a-solver-binary", 5);
        assert!(run_solver("(check-sat)", &c).is_err());
        assert!(!c.available());
    }

    #[test]
    fn interpret_outputs() {
        assert_eq!(interpret("unsat\n").unwrap(), SolverOutcome::Unsat);
        assert!(matches!(interpret("unknown").unwrap(), SolverOutcome::Unknown(_)));
        assert!(interpret("").is_err());
        assert!(interpret("(error \"boom\")").is_err());
        match interpret("sat\n(\n (define-fun a () Int 1)\n)").unwrap() {
            SolverOutcome::Sat(m) => assert_eq!(m, "((define-fun a () Int 1))"),
            other => panic!("{other:?}"),
        }
    }
}
