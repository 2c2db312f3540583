//! Line-oriented circuit text format.
//!
//! Metadata travels in `#! key=value` lines so that the files stay readable by
//! tools that treat every `#` line as a comment.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use super::{Circuit, Gate1, Gate2, ObservableSpec, Op};
use crate::pauli::Pauli;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UnknownOpcode(String),
    UndefinedRecord(String),
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    DuplicateRecord(String),
    DuplicateSite(u32),
}

impl std::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseErrorKind::Syntax(m) => write!(f, "syntax error: {m}"),
            ParseErrorKind::UnknownOpcode(o) => write!(f, "unknown opcode {o:?}"),
            ParseErrorKind::UndefinedRecord(l) => write!(f, "undefined record {l:?}"),
            ParseErrorKind::QubitOutOfRange { qubit, n_qubits } => {
                write!(f, "qubit {qubit} out of range (circuit has {n_qubits})")
            }
            ParseErrorKind::DuplicateRecord(l) => write!(f, "record {l:?} defined twice"),
            ParseErrorKind::DuplicateSite(s) => write!(f, "injection site {s} used twice"),
        }
    }
}

/// Parse failure with a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    col: usize,
}

struct Parser {
    line: usize,
    n_qubits: Option<usize>,
    circuit: Circuit,
    labels: HashMap<String, usize>,
    sites: HashSet<u32>,
    pending_obs: Vec<(usize, usize, Vec<String>, ObsForm)>,
}

enum ObsForm {
    Parity { negate: bool },
    Mean,
    Decoded(String),
}

fn tokenize(line: &str) -> Vec<Tok<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Tok {
                    text: &line[s..i],
                    col: line[..s].chars().count() + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Tok {
            text: &line[s..],
            col: line[..s].chars().count() + 1,
        });
    }
    out
}

fn valid_label(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '[' | ']' | '-' | ':'))
}

impl Parser {
    fn err(&self, col: usize, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.line,
            column: col,
            kind,
        }
    }

    fn syntax(&self, col: usize, msg: impl Into<String>) -> ParseError {
        self.err(col, ParseErrorKind::Syntax(msg.into()))
    }

    fn arity(&self, toks: &[Tok], n: usize, usage: &str) -> Result<(), ParseError> {
        if toks.len() != n {
            let col = toks.get(n).or(toks.last()).map_or(1, |t| t.col);
            return Err(self.syntax(col, format!("expected `{usage}`")));
        }
        Ok(())
    }

    fn qubit(&self, t: Tok) -> Result<usize, ParseError> {
        let q: usize = t
            .text
            .parse()
            .map_err(|_| self.syntax(t.col, format!("expected qubit index, found {:?}", t.text)))?;
        let n = self.n_qubits.unwrap_or(0);
        if q >= n {
            return Err(self.err(t.col, ParseErrorKind::QubitOutOfRange { qubit: q, n_qubits: n }));
        }
        Ok(q)
    }

    fn basis(&self, t: Tok) -> Result<Pauli, ParseError> {
        match t.text.to_ascii_uppercase().as_str() {
            "X" => Ok(Pauli::X),
            "Y" => Ok(Pauli::Y),
            "Z" => Ok(Pauli::Z),
            _ => Err(self.syntax(t.col, format!("expected basis X|Y|Z, found {:?}", t.text))),
        }
    }

    fn keyed<'a>(&self, t: Tok<'a>, key: &str) -> Result<&'a str, ParseError> {
        match t.text.split_once('=') {
            Some((k, v)) if k.eq_ignore_ascii_case(key) && !v.is_empty() => Ok(v),
            _ => Err(self.syntax(t.col, format!("expected `{key}=<value>`, found {:?}", t.text))),
        }
    }

    fn record(&self, label: &str, col: usize) -> Result<usize, ParseError> {
        self.labels
            .get(label)
            .copied()
            .ok_or_else(|| self.err(col, ParseErrorKind::UndefinedRecord(label.to_string())))
    }

    /// Parses `<label>==<0|1>` spread over one or more tokens.
    fn condition(&self, toks: &[Tok]) -> Result<(usize, bool), ParseError> {
        let Some(first) = toks.first() else {
            return Err(self.syntax(1, "missing condition `<label>==<0|1>`"));
        };
        let joined: String = toks.iter().map(|t| t.text).collect();
        let Some((label, bit)) = joined.split_once("==") else {
            return Err(self.syntax(first.col, "expected `<label>==<0|1>`"));
        };
        if !valid_label(label) {
            return Err(self.syntax(first.col, format!("invalid record label {label:?}")));
        }
        let value = match bit {
            "0" => false,
            "1" => true,
            _ => return Err(self.syntax(first.col, format!("condition bit must be 0 or 1, found {bit:?}"))),
        };
        Ok((self.record(label, first.col)?, value))
    }

    fn statement(&mut self, toks: &[Tok]) -> Result<(), ParseError> {
        let head = toks[0];
        let opcode = head.text.to_ascii_uppercase();
        if opcode == "QUBITS" {
            self.arity(toks, 2, "QUBITS <n>")?;
            if self.n_qubits.is_some() || !self.circuit.ops.is_empty() {
                return Err(self.syntax(head.col, "QUBITS must appear once, before any op"));
            }
            let n: usize = toks[1]
                .text
                .parse()
                .map_err(|_| self.syntax(toks[1].col, "expected qubit count"))?;
            self.n_qubits = Some(n);
            self.circuit.n_qubits = n;
            return Ok(());
        }
        let known = matches!(
            opcode.as_str(),
            "PREP" | "I" | "X" | "Y" | "Z" | "H" | "S" | "RY" | "RZ" | "CNOT" | "CZ" | "MEASURE"
                | "FEEDBACK" | "POSTSELECT" | "INJECT" | "OBS"
        );
        if !known {
            return Err(self.err(head.col, ParseErrorKind::UnknownOpcode(head.text.to_string())));
        }
        if self.n_qubits.is_none() {
            return Err(self.syntax(head.col, "first statement must be `QUBITS <n>`"));
        }
        let op = match opcode.as_str() {
            "PREP" => {
                self.arity(toks, 3, "PREP <X|Y|Z> <q>")?;
                Op::Prep {
                    basis: self.basis(toks[1])?,
                    qubit: self.qubit(toks[2])?,
                }
            }
            "I" | "X" | "Y" | "Z" | "H" | "S" => {
                self.arity(toks, 2, "<gate> <q>")?;
                let gate = match opcode.as_str() {
                    "I" => Gate1::I,
                    "X" => Gate1::X,
                    "Y" => Gate1::Y,
                    "Z" => Gate1::Z,
                    "H" => Gate1::H,
                    _ => Gate1::S,
                };
                Op::Gate1 {
                    gate,
                    qubit: self.qubit(toks[1])?,
                }
            }
            "RY" | "RZ" => {
                self.arity(toks, 3, "<RY|RZ> <q> theta=<float>")?;
                let qubit = self.qubit(toks[1])?;
                let v = self.keyed(toks[2], "theta")?;
                let theta: f64 = v
                    .parse()
                    .ok()
                    .filter(|x: &f64| x.is_finite())
                    .ok_or_else(|| self.syntax(toks[2].col, format!("invalid angle {v:?}")))?;
                let gate = if opcode == "RY" {
                    Gate1::Ry(theta)
                } else {
                    Gate1::Rz(theta)
                };
                Op::Gate1 { gate, qubit }
            }
            "CNOT" | "CZ" => {
                self.arity(toks, 3, "<CNOT|CZ> <a> <b>")?;
                let a = self.qubit(toks[1])?;
                let b = self.qubit(toks[2])?;
                if a == b {
                    return Err(self.syntax(toks[2].col, "two-qubit gate needs distinct qubits"));
                }
                let gate = if opcode == "CNOT" { Gate2::Cnot } else { Gate2::Cz };
                Op::Gate2 { gate, a, b }
            }
            "MEASURE" => {
                self.arity(toks, 5, "MEASURE <X|Y|Z> <q> -> <label>")?;
                let basis = self.basis(toks[1])?;
                let qubit = self.qubit(toks[2])?;
                if toks[3].text != "->" {
                    return Err(self.syntax(toks[3].col, "expected `->`"));
                }
                let label = toks[4].text;
                if !valid_label(label) {
                    return Err(self.syntax(toks[4].col, format!("invalid record label {label:?}")));
                }
                if self.labels.contains_key(label) {
                    return Err(self.err(toks[4].col, ParseErrorKind::DuplicateRecord(label.to_string())));
                }
                let record = self.circuit.records.len();
                self.circuit.records.push(label.to_string());
                self.labels.insert(label.to_string(), record);
                Op::Measure {
                    basis,
                    qubit,
                    record,
                }
            }
            "FEEDBACK" => {
                if toks.len() < 5 {
                    return Err(self.syntax(head.col, "expected `FEEDBACK <X|Y|Z> <q> IF <label>==<0|1>`"));
                }
                let pauli = self.basis(toks[1])?;
                let qubit = self.qubit(toks[2])?;
                if !toks[3].text.eq_ignore_ascii_case("IF") {
                    return Err(self.syntax(toks[3].col, "expected `IF`"));
                }
                let (record, value) = self.condition(&toks[4..])?;
                Op::Feedback {
                    pauli,
                    qubit,
                    record,
                    value,
                }
            }
            "POSTSELECT" => {
                if toks.len() < 2 {
                    return Err(self.syntax(head.col, "expected `POSTSELECT <label>==<0|1>`"));
                }
                let (record, value) = self.condition(&toks[1..])?;
                Op::PostSelect { record, value }
            }
            "INJECT" => {
                self.arity(toks, 3, "INJECT <q> site=<id>")?;
                let qubit = self.qubit(toks[1])?;
                let v = self.keyed(toks[2], "site")?;
                let site: u32 = v
                    .parse()
                    .map_err(|_| self.syntax(toks[2].col, format!("invalid site id {v:?}")))?;
                if !self.sites.insert(site) {
                    return Err(self.err(toks[2].col, ParseErrorKind::DuplicateSite(site)));
                }
                Op::Inject { qubit, site }
            }
            _ => return self.observable(toks),
        };
        self.circuit.ops.push(op);
        Ok(())
    }

    fn observable(&mut self, toks: &[Tok]) -> Result<(), ParseError> {
        let Some(kind) = toks.get(1) else {
            return Err(self.syntax(toks[0].col, "expected `OBS PARITY|MEAN|DECODED ...`"));
        };
        match kind.text.to_ascii_uppercase().as_str() {
            "DECODED" => {
                self.arity(toks, 3, "OBS DECODED <decoder_id>")?;
                if !valid_label(toks[2].text) {
                    return Err(self.syntax(toks[2].col, "invalid decoder id"));
                }
                let form = ObsForm::Decoded(toks[2].text.to_string());
                self.pending_obs.push((self.line, toks[2].col, Vec::new(), form));
            }
            form @ ("PARITY" | "MEAN") => {
                let mut labels = Vec::new();
                let mut negate = false;
                for t in &toks[2..] {
                    if let Some(v) = t.text.strip_prefix("sign=") {
                        if form != "PARITY" {
                            return Err(self.syntax(t.col, "sign applies to PARITY only"));
                        }
                        negate = match v {
                            "+1" | "1" => false,
                            "-1" => true,
                            _ => return Err(self.syntax(t.col, "sign must be +1 or -1")),
                        };
                    } else if valid_label(t.text) {
                        labels.push(t.text.to_string());
                    } else {
                        return Err(self.syntax(t.col, format!("invalid record label {:?}", t.text)));
                    }
                }
                if labels.is_empty() {
                    return Err(self.syntax(kind.col, "observable needs at least one record"));
                }
                let form = if form == "PARITY" {
                    ObsForm::Parity { negate }
                } else {
                    ObsForm::Mean
                };
                self.pending_obs.push((self.line, toks[2].col, labels, form));
            }
            _ => return Err(self.syntax(kind.col, format!("unknown observable kind {:?}", kind.text))),
        }
        Ok(())
    }
}

/// Parses circuit text into a validated [`Circuit`].
pub fn parse_circuit(text: &str) -> Result<Circuit, ParseError> {
    let mut p = Parser {
        line: 0,
        n_qubits: None,
        circuit: Circuit::default(),
        labels: HashMap::new(),
        sites: HashSet::new(),
        pending_obs: Vec::new(),
    };
    for (idx, raw) in text.lines().enumerate() {
        p.line = idx + 1;
        let trimmed = raw.trim_start();
        if let Some(meta) = trimmed.strip_prefix("#!") {
            let col = raw.len() - trimmed.len() + 3;
            let Some((k, v)) = meta.split_once('=') else {
                return Err(p.syntax(col, "metadata must be `#! key=value`"));
            };
            let k = k.trim();
            if k.is_empty() {
                return Err(p.syntax(col, "empty metadata key"));
            }
            p.circuit.metadata.insert(k.to_string(), v.trim().to_string());
            continue;
        }
        let body = raw.split('#').next().unwrap_or("");
        let toks = tokenize(body);
        if toks.is_empty() {
            continue;
        }
        p.statement(&toks)?;
    }
    if p.n_qubits.is_none() {
        return Err(ParseError {
            line: p.line.max(1),
            column: 1,
            kind: ParseErrorKind::Syntax("missing `QUBITS <n>`".into()),
        });
    }
    for (line, col, labels, form) in std::mem::take(&mut p.pending_obs) {
        p.line = line;
        let records = labels
            .iter()
            .map(|l| p.record(l, col))
            .collect::<Result<Vec<_>, _>>()?;
        p.circuit.observables.push(match form {
            ObsForm::Parity { negate } => ObservableSpec::Parity { records, negate },
            ObsForm::Mean => ObservableSpec::Mean { records },
            ObsForm::Decoded(decoder) => ObservableSpec::Decoded { decoder },
        });
    }
    debug_assert!(p.circuit.validate().is_ok());
    Ok(p.circuit)
}

/// Formats with 12 significant digits and trims trailing zeros.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.11e}");
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_zeros(&s).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mant))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn label<'a>(c: &'a Circuit, r: usize) -> &'a str {
    &c.records[r]
}

/// Canonical text: `QUBITS`, sorted metadata, ops, then observables.
pub fn serialize_circuit(c: &Circuit) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "QUBITS {}", c.n_qubits);
    for (k, v) in &c.metadata {
        let _ = writeln!(s, "#! {k}={v}");
    }
    for op in &c.ops {
        let _ = match *op {
            Op::Prep { basis, qubit } => writeln!(s, "PREP {basis} {qubit}"),
            Op::Gate1 { gate, qubit } => match gate {
                Gate1::I => writeln!(s, "I {qubit}"),
                Gate1::X => writeln!(s, "X {qubit}"),
                Gate1::Y => writeln!(s, "Y {qubit}"),
                Gate1::Z => writeln!(s, "Z {qubit}"),
                Gate1::H => writeln!(s, "H {qubit}"),
                Gate1::S => writeln!(s, "S {qubit}"),
                Gate1::Ry(t) => writeln!(s, "RY {qubit} theta={}", format_sig12(t)),
                Gate1::Rz(t) => writeln!(s, "RZ {qubit} theta={}", format_sig12(t)),
            },
            Op::Gate2 { gate, a, b } => match gate {
                Gate2::Cnot => writeln!(s, "CNOT {a} {b}"),
                Gate2::Cz => writeln!(s, "CZ {a} {b}"),
            },
            Op::Measure {
                basis,
                qubit,
                record,
            } => writeln!(s, "MEASURE {basis} {qubit} -> {}", label(c, record)),
            Op::Feedback {
                pauli,
                qubit,
                record,
                value,
            } => writeln!(
                s,
                "FEEDBACK {pauli} {qubit} IF {}=={}",
                label(c, record),
                value as u8
            ),
            Op::PostSelect { record, value } => {
                writeln!(s, "POSTSELECT {}=={}", label(c, record), value as u8)
            }
            Op::Inject { qubit, site } => writeln!(s, "INJECT {qubit} site={site}"),
        };
    }
    for obs in &c.observables {
        let labels = |rs: &[usize]| rs.iter().map(|&r| label(c, r)).collect::<Vec<_>>().join(" ");
        let _ = match obs {
            ObservableSpec::Parity { records, negate } => {
                let sign = if *negate { " sign=-1" } else { "" };
                writeln!(s, "OBS PARITY {}{sign}", labels(records))
            }
            ObservableSpec::Mean { records } => writeln!(s, "OBS MEAN {}", labels(records)),
            ObservableSpec::Decoded { decoder } => writeln!(s, "OBS DECODED {decoder}"),
        };
    }
    s
}
