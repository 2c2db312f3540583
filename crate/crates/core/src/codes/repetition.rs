use super::{check_p, BuiltCode, CodeError, Detector, LogicalDef};
use crate::circuit::{CircuitBuilder, ObservableSpec};
use crate::pauli::Pauli;

/// Bit-flip repetition memory on a line: data qubits at even indices,
/// syndrome qubits between them. Each of the `rounds` rounds injects on the
/// data, extracts neighbour parities, measures and resets the syndromes; a
/// final injection layer precedes the transversal data readout.
pub fn build_repetition(d: usize, rounds: usize, p: f64) -> Result<BuiltCode, CodeError> {
    if !matches!(d, 3 | 5 | 7) {
        return Err(CodeError::InvalidDistance(d));
    }
    if !(1..=4).contains(&rounds) {
        return Err(CodeError::InvalidRounds(rounds));
    }
    check_p(p)?;
    let data = |j: usize| 2 * j;
    let syn = |j: usize| 2 * j + 1;
    let n = 2 * d - 1;
    let mut b = CircuitBuilder::new(n);
    b.meta("experiment", "repetition").meta("d", d.to_string()).meta("M", rounds.to_string());
    for q in 0..n {
        b.prep(Pauli::Z, q);
    }
    let mut layers = Vec::with_capacity(rounds + 1);
    let mut syn_records: Vec<Vec<usize>> = Vec::with_capacity(rounds);
    for m in 0..rounds {
        let layer: Vec<u32> = (0..d).map(|j| (m * d + j) as u32).collect();
        for j in 0..d {
            b.inject(data(j), layer[j]);
        }
        layers.push(layer);
        for j in 0..d - 1 {
            b.cnot(data(j), syn(j));
        }
        for j in 0..d - 1 {
            b.cnot(data(j + 1), syn(j));
        }
        let recs: Vec<usize> = (0..d - 1).map(|j| b.measure(Pauli::Z, syn(j), format!("s{m}_{j}"))).collect();
        for j in 0..d - 1 {
            b.prep(Pauli::Z, syn(j));
        }
        syn_records.push(recs);
    }
    let layer: Vec<u32> = (0..d).map(|j| (rounds * d + j) as u32).collect();
    for j in 0..d {
        b.inject(data(j), layer[j]);
    }
    layers.push(layer);
    let data_records: Vec<usize> = (0..d).map(|j| b.measure(Pauli::Z, data(j), format!("d{j}"))).collect();

    let mut detectors = Vec::new();
    for (m, recs) in syn_records.iter().enumerate() {
        for (j, &r) in recs.iter().enumerate() {
            let records = if m == 0 { vec![r] } else { vec![syn_records[m - 1][j], r] };
            detectors.push(Detector {
                id: detectors.len(),
                records,
                expect: false,
            });
        }
    }
    let last = &syn_records[rounds - 1];
    for j in 0..d - 1 {
        detectors.push(Detector {
            id: detectors.len(),
            records: vec![data_records[j], data_records[j + 1], last[j]],
            expect: false,
        });
    }
    b.observable(ObservableSpec::Decoded { decoder: "mwpm".into() });
    // uncorrected reference: average of the data-qubit readouts
    let raw = ObservableSpec::Mean {
        records: data_records.clone(),
    };
    b.observable(raw.clone());
    Ok(BuiltCode {
        name: format!("repetition_d{d}_m{rounds}"),
        circuit: b.build()?,
        detectors,
        logical: LogicalDef {
            records: vec![data_records[0]],
            decoder: Some("mwpm".into()),
            raw,
        },
        injection_layers: layers,
        background_sites: Vec::new(),
        d,
        rounds,
        basis: Pauli::Z,
        p,
    })
}
