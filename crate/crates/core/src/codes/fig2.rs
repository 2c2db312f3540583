use super::{check_p, BuiltCode, CodeError, LogicalDef};
use crate::circuit::{CircuitBuilder, Gate1, ObservableSpec};
use crate::pauli::Pauli;

const ENCODE: [(usize, usize); 4] = [(0, 1), (2, 1), (2, 3), (4, 3)];

/// Five-qubit bit-flip example. Data qubits 0, 2, 4 start in RY(θ) states,
/// 1 and 3 hold the parities Z0Z2 and Z2Z4. Shots with a flipped Q3 parity
/// are discarded and Q0 is flipped back when Q1 reports an error.
pub fn build_fig2_example(theta0: f64, theta2: f64, theta4: f64, p: f64) -> Result<BuiltCode, CodeError> {
    check_p(p)?;
    let mut b = CircuitBuilder::new(5);
    b.meta("experiment", "fig2");
    for q in 0..5 {
        b.prep(Pauli::Z, q);
    }
    for (q, t) in [(0, theta0), (2, theta2), (4, theta4)] {
        b.gate(Gate1::Ry(t), q);
    }
    for (c, t) in ENCODE {
        b.cnot(c, t);
    }
    for (site, q) in [0usize, 2, 4].into_iter().enumerate() {
        b.inject(q, site as u32);
    }
    for (c, t) in ENCODE {
        b.cnot(c, t);
    }
    let m1 = b.measure(Pauli::Z, 1, "m1");
    let m3 = b.measure(Pauli::Z, 3, "m3");
    b.postselect(m3, false);
    b.feedback(Pauli::X, 0, m1, true);
    let m0 = b.measure(Pauli::Z, 0, "m0");
    b.observable(ObservableSpec::Parity {
        records: vec![m0],
        negate: false,
    });
    Ok(BuiltCode {
        name: "fig2".into(),
        circuit: b.build()?,
        detectors: Vec::new(),
        logical: LogicalDef {
            records: vec![m0],
            decoder: None,
            raw: ObservableSpec::Parity {
                records: vec![m0],
                negate: false,
            },
        },
        injection_layers: vec![vec![0, 1, 2]],
        background_sites: Vec::new(),
        d: 1,
        rounds: 1,
        basis: Pauli::Z,
        p,
    })
}
