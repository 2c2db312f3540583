//! Circuit IR for fault-tolerant circuits: mid-circuit measurement, classical
//! feedback, post-selection and tagged fault-injection sites.

mod text;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pauli::Pauli;

pub use text::{format_sig12, parse_circuit, serialize_circuit, ParseError, ParseErrorKind};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate1 {
    I,
    X,
    Y,
    Z,
    H,
    S,
    Ry(f64),
    Rz(f64),
}

impl Gate1 {
    /// Rotations are treated as non-Clifford regardless of angle.
    pub fn is_clifford(self) -> bool {
        !matches!(self, Gate1::Ry(_) | Gate1::Rz(_))
    }

    pub fn from_pauli(p: Pauli) -> Gate1 {
        match p {
            Pauli::I => Gate1::I,
            Pauli::X => Gate1::X,
            Pauli::Y => Gate1::Y,
            Pauli::Z => Gate1::Z,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate2 {
    Cnot,
    Cz,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Prep { basis: Pauli, qubit: usize },
    Gate1 { gate: Gate1, qubit: usize },
    Gate2 { gate: Gate2, a: usize, b: usize },
    Measure { basis: Pauli, qubit: usize, record: usize },
    /// Applies `pauli` on `qubit` when `record` reads `value`.
    Feedback { pauli: Pauli, qubit: usize, record: usize, value: bool },
    /// Keeps the shot only when `record` reads `value`.
    PostSelect { record: usize, value: bool },
    Inject { qubit: usize, site: u32 },
}

/// Operation classes that carry their own noise channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Prep,
    Gate1,
    Gate2,
    Measure,
}

impl Op {
    pub fn kind(&self) -> Option<OpKind> {
        match self {
            Op::Prep { .. } => Some(OpKind::Prep),
            Op::Gate1 { .. } => Some(OpKind::Gate1),
            Op::Gate2 { .. } => Some(OpKind::Gate2),
            Op::Measure { .. } => Some(OpKind::Measure),
            _ => None,
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Op::Prep { qubit, .. }
            | Op::Gate1 { qubit, .. }
            | Op::Measure { qubit, .. }
            | Op::Feedback { qubit, .. }
            | Op::Inject { qubit, .. } => vec![qubit],
            Op::Gate2 { a, b, .. } => vec![a, b],
            Op::PostSelect { .. } => vec![],
        }
    }

    pub fn is_clifford(&self) -> bool {
        match self {
            Op::Gate1 { gate, .. } => gate.is_clifford(),
            _ => true,
        }
    }
}

/// Observable evaluated from the measurement record of one shot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ObservableSpec {
    /// `sign · (−1)^(⊕ records)`.
    Parity { records: Vec<usize>, negate: bool },
    /// Average of `(−1)^bit` over the listed records.
    Mean { records: Vec<usize> },
    /// Logical parity corrected by a named decoder; resolved by the caller.
    Decoded { decoder: String },
}

impl ObservableSpec {
    pub fn records(&self) -> &[usize] {
        match self {
            ObservableSpec::Parity { records, .. } | ObservableSpec::Mean { records } => records,
            ObservableSpec::Decoded { .. } => &[],
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("op {op}: qubit {qubit} out of range (circuit has {n_qubits})")]
    QubitOutOfRange { op: usize, qubit: usize, n_qubits: usize },
    #[error("op {op}: record index {record} is not produced before use")]
    RecordNotProduced { op: usize, record: usize },
    #[error("record {0:?} defined twice")]
    DuplicateRecord(String),
    #[error("record {record} produced by {count} measurements")]
    RecordMultiplicity { record: usize, count: usize },
    #[error("injection site {0} used twice")]
    DuplicateSite(u32),
    #[error("op {op}: two-qubit gate acts twice on qubit {qubit}")]
    SameQubit { op: usize, qubit: usize },
    #[error("op {op}: {basis} is not a valid basis")]
    BadBasis { op: usize, basis: Pauli },
    #[error("observable references unknown record {0}")]
    UnknownObservableRecord(usize),
    #[error("unknown record label {0:?}")]
    UnknownLabel(String),
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Circuit {
    pub n_qubits: usize,
    pub ops: Vec<Op>,
    /// Record labels, indexed by record id, in production order.
    pub records: Vec<String>,
    pub observables: Vec<ObservableSpec>,
    pub metadata: BTreeMap<String, String>,
}

impl Circuit {
    pub fn validate(&self) -> Result<(), CircuitError> {
        let mut produced = vec![0usize; self.records.len()];
        let mut seen_labels = HashSet::new();
        for label in &self.records {
            if !seen_labels.insert(label.as_str()) {
                return Err(CircuitError::DuplicateRecord(label.clone()));
            }
        }
        let mut sites = HashSet::new();
        for (i, op) in self.ops.iter().enumerate() {
            for q in op.qubits() {
                if q >= self.n_qubits {
                    return Err(CircuitError::QubitOutOfRange {
                        op: i,
                        qubit: q,
                        n_qubits: self.n_qubits,
                    });
                }
            }
            match *op {
                Op::Gate2 { a, b, .. } if a == b => {
                    return Err(CircuitError::SameQubit { op: i, qubit: a })
                }
                Op::Prep { basis: Pauli::I, .. } | Op::Measure { basis: Pauli::I, .. } => {
                    return Err(CircuitError::BadBasis { op: i, basis: Pauli::I })
                }
                Op::Measure { record, .. } => {
                    if record >= produced.len() {
                        return Err(CircuitError::RecordNotProduced { op: i, record });
                    }
                    produced[record] += 1;
                }
                Op::Feedback { record, .. } | Op::PostSelect { record, .. } => {
                    if record >= produced.len() || produced[record] == 0 {
                        return Err(CircuitError::RecordNotProduced { op: i, record });
                    }
                }
                Op::Inject { site, .. } => {
                    if !sites.insert(site) {
                        return Err(CircuitError::DuplicateSite(site));
                    }
                }
                _ => {}
            }
        }
        for (record, &count) in produced.iter().enumerate() {
            if count != 1 {
                return Err(CircuitError::RecordMultiplicity { record, count });
            }
        }
        for obs in &self.observables {
            for &r in obs.records() {
                if r >= self.records.len() {
                    return Err(CircuitError::UnknownObservableRecord(r));
                }
            }
        }
        Ok(())
    }

    pub fn record_index(&self, label: &str) -> Option<usize> {
        self.records.iter().position(|l| l == label)
    }

    pub fn n_records(&self) -> usize {
        self.records.len()
    }

    pub fn n_measurements(&self) -> usize {
        self.ops.iter().filter(|o| matches!(o, Op::Measure { .. })).count()
    }

    pub fn has_feedback(&self) -> bool {
        self.ops.iter().any(|o| matches!(o, Op::Feedback { .. }))
    }

    pub fn has_postselection(&self) -> bool {
        self.ops.iter().any(|o| matches!(o, Op::PostSelect { .. }))
    }

    /// Op index of each injection site.
    pub fn site_ops(&self) -> HashMap<u32, usize> {
        self.ops
            .iter()
            .enumerate()
            .filter_map(|(i, op)| match op {
                Op::Inject { site, .. } => Some((*site, i)),
                _ => None,
            })
            .collect()
    }

    /// Index of the last non-Clifford op, if any.
    pub fn last_non_clifford(&self) -> Option<usize> {
        self.ops.iter().rposition(|op| !op.is_clifford())
    }

    pub fn fault_locations(&self, policy: LocationPolicy) -> Vec<Location> {
        fault_locations(self, policy)
    }
}

/// A place in the circuit where a stochastic Pauli fault may occur; identified
/// by the index of its op.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Location {
    pub op: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationPolicy {
    InjectionOnly,
    AllOps,
}

impl fmt::Display for LocationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocationPolicy::InjectionOnly => write!(f, "injection_only"),
            LocationPolicy::AllOps => write!(f, "all_ops"),
        }
    }
}

pub fn fault_locations(c: &Circuit, policy: LocationPolicy) -> Vec<Location> {
    c.ops
        .iter()
        .enumerate()
        .filter(|(_, op)| match op {
            Op::Inject { .. } => true,
            Op::Prep { .. } | Op::Gate1 { .. } | Op::Gate2 { .. } | Op::Measure { .. } => {
                policy == LocationPolicy::AllOps
            }
            Op::Feedback { .. } | Op::PostSelect { .. } => false,
        })
        .map(|(op, _)| Location { op })
        .collect()
}

/// Incremental construction of a validated [`Circuit`].
#[derive(Clone, Debug, Default)]
pub struct CircuitBuilder {
    c: Circuit,
}

impl CircuitBuilder {
    pub fn new(n_qubits: usize) -> Self {
        CircuitBuilder {
            c: Circuit {
                n_qubits,
                ..Default::default()
            },
        }
    }

    pub fn meta(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.c.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn op(&mut self, op: Op) -> &mut Self {
        self.c.ops.push(op);
        self
    }

    pub fn prep(&mut self, basis: Pauli, qubit: usize) -> &mut Self {
        self.op(Op::Prep { basis, qubit })
    }

    pub fn gate(&mut self, gate: Gate1, qubit: usize) -> &mut Self {
        self.op(Op::Gate1 { gate, qubit })
    }

    pub fn h(&mut self, qubit: usize) -> &mut Self {
        self.gate(Gate1::H, qubit)
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> &mut Self {
        self.op(Op::Gate2 {
            gate: Gate2::Cnot,
            a: control,
            b: target,
        })
    }

    pub fn cz(&mut self, a: usize, b: usize) -> &mut Self {
        self.op(Op::Gate2 {
            gate: Gate2::Cz,
            a,
            b,
        })
    }

    /// Adds a measurement and returns its record index.
    pub fn measure(&mut self, basis: Pauli, qubit: usize, label: impl Into<String>) -> usize {
        let record = self.c.records.len();
        self.c.records.push(label.into());
        self.c.ops.push(Op::Measure {
            basis,
            qubit,
            record,
        });
        record
    }

    pub fn feedback(&mut self, pauli: Pauli, qubit: usize, record: usize, value: bool) -> &mut Self {
        self.op(Op::Feedback {
            pauli,
            qubit,
            record,
            value,
        })
    }

    pub fn postselect(&mut self, record: usize, value: bool) -> &mut Self {
        self.op(Op::PostSelect { record, value })
    }

    pub fn inject(&mut self, qubit: usize, site: u32) -> &mut Self {
        self.op(Op::Inject { qubit, site })
    }

    pub fn observable(&mut self, obs: ObservableSpec) -> &mut Self {
        self.c.observables.push(obs);
        self
    }

    pub fn n_ops(&self) -> usize {
        self.c.ops.len()
    }

    pub fn build(self) -> Result<Circuit, CircuitError> {
        self.c.validate()?;
        Ok(self.c)
    }
}
