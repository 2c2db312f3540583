//! Distance-3 rotated surface code.
//!
//! Data qubits sit on a 3×3 grid, labelled so that D4 is the centre, D1-D4-D7
//! the middle column (support of X_L) and D3-D4-D5 the middle row (support of
//! Z_L):
//!
//! ```text
//!   D2  D1  D6
//!   D3  D4  D5
//!   D8  D7  D9
//! ```
//!
//! Plaquette (i, j) has corners (i, j), (i, j+1), (i+1, j), (i+1, j+1);
//! boundary plaquettes keep the corners that fall on the grid. X checks use
//! the corner order NW, NE, SW, SE and Z checks NW, SW, NE, SE, which keeps
//! every X/Z pair commuting through the interleaved CNOT layers.

use std::sync::OnceLock;

use super::{check_p, BuiltCode, CodeError, Detector, LogicalDef, LogicalStateSpec};
use crate::circuit::{Circuit, CircuitBuilder, Gate1, ObservableSpec, Op};
use crate::pauli::{Pauli, PauliMask};

pub const N_QUBITS: usize = 17;
/// First background site id; background site of qubit q is `BACKGROUND_BASE + q`.
pub const BACKGROUND_BASE: u32 = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct Stabilizer {
    pub name: &'static str,
    pub kind: Pauli,
    pub ancilla: usize,
    /// Data qubits in NW, NE, SW, SE order; `None` off the grid.
    pub corners: [Option<usize>; 4],
}

impl Stabilizer {
    pub fn support(&self) -> Vec<usize> {
        self.corners.iter().flatten().copied().collect()
    }

    /// Data qubits in CNOT schedule order.
    pub fn schedule(&self) -> [Option<usize>; 4] {
        let [nw, ne, sw, se] = self.corners;
        match self.kind {
            Pauli::X => [nw, ne, sw, se],
            _ => [nw, sw, ne, se],
        }
    }

    pub fn mask(&self) -> PauliMask {
        self.support()
            .into_iter()
            .fold(PauliMask::IDENTITY, |m, q| m.mul(PauliMask::single(q, self.kind)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceLayout {
    /// Grid position of data qubit `q` (qubit index = label − 1).
    pub positions: [(usize, usize); 9],
    pub stabilizers: Vec<Stabilizer>,
    pub x_logical: [usize; 3],
    pub z_logical: [usize; 3],
    /// Corner qubits that seed each X stabilizer during preparation, in
    /// X-stabilizer order.
    pub representatives: [usize; 4],
}

pub static SURFACE_LAYOUT: OnceLock<SurfaceLayout> = OnceLock::new();

impl SurfaceLayout {
    pub fn get() -> &'static SurfaceLayout {
        SURFACE_LAYOUT.get_or_init(Self::build)
    }

    fn build() -> SurfaceLayout {
        let positions = [(0, 1), (0, 0), (1, 0), (1, 1), (1, 2), (0, 2), (2, 1), (2, 0), (2, 2)];
        let at = |r: i32, c: i32| -> Option<usize> {
            if !(0..3).contains(&r) || !(0..3).contains(&c) {
                return None;
            }
            positions.iter().position(|&p| p == (r as usize, c as usize))
        };
        let plaquette = |i: i32, j: i32| [at(i, j), at(i, j + 1), at(i + 1, j), at(i + 1, j + 1)];
        let specs: [(&str, Pauli, i32, i32); 8] = [
            ("x1", Pauli::X, 0, 0),
            ("x2", Pauli::X, 1, 1),
            ("x3", Pauli::X, -1, 1),
            ("x4", Pauli::X, 2, 0),
            ("z1", Pauli::Z, 0, 1),
            ("z2", Pauli::Z, 1, 0),
            ("z3", Pauli::Z, 0, -1),
            ("z4", Pauli::Z, 1, 2),
        ];
        let stabilizers = specs
            .iter()
            .enumerate()
            .map(|(k, &(name, kind, i, j))| Stabilizer {
                name,
                kind,
                ancilla: 9 + k,
                corners: plaquette(i, j),
            })
            .collect();
        SurfaceLayout {
            positions,
            stabilizers,
            x_logical: [0, 3, 6],
            z_logical: [2, 3, 4],
            representatives: [1, 8, 5, 7],
        }
    }

    pub fn x_stabilizers(&self) -> impl Iterator<Item = &Stabilizer> {
        self.stabilizers.iter().filter(|s| s.kind == Pauli::X)
    }

    pub fn z_stabilizers(&self) -> impl Iterator<Item = &Stabilizer> {
        self.stabilizers.iter().filter(|s| s.kind == Pauli::Z)
    }

    pub fn stabilizer(&self, name: &str) -> &Stabilizer {
        self.stabilizers.iter().find(|s| s.name == name).expect("known stabilizer")
    }

    pub fn logical_mask(&self, kind: Pauli) -> PauliMask {
        let support = if kind == Pauli::X { self.x_logical } else { self.z_logical };
        support
            .iter()
            .fold(PauliMask::IDENTITY, |m, &q| m.mul(PauliMask::single(q, kind)))
    }
}

fn data_label(q: usize) -> String {
    format!("d{}", q + 1)
}

fn push_prep_fragment(b: &mut CircuitBuilder, spec: &LogicalStateSpec) -> Result<(), CodeError> {
    spec.validate()?;
    let lay = SurfaceLayout::get();
    let d4 = 3;
    let zero = matches!(spec, LogicalStateSpec::Zero);
    if !zero {
        let (a, bb) = spec.amplitudes();
        b.gate(Gate1::Ry(2.0 * bb.atan2(a)), d4);
    }
    for &q in &lay.representatives {
        b.h(q);
    }
    if !zero {
        // Copy D4 onto D1 and D7 through the Z-check ancillas between them.
        for (anc, target) in [(lay.stabilizer("z1").ancilla, 0), (lay.stabilizer("z2").ancilla, 6)] {
            b.cnot(d4, anc).cnot(anc, target).cnot(d4, anc);
        }
    }
    for (s, &rep) in lay.x_stabilizers().zip(&lay.representatives) {
        for q in s.support() {
            if q != rep {
                b.cnot(rep, q);
            }
        }
    }
    Ok(())
}

/// State-preparation fragment alone: α|0_L⟩ + β|1_L⟩ on the data qubits,
/// ancillas returned to |0⟩.
pub fn prep_logical_state_circuit(spec: &LogicalStateSpec) -> Result<Circuit, CodeError> {
    let mut b = CircuitBuilder::new(N_QUBITS);
    for q in 0..N_QUBITS {
        b.prep(Pauli::Z, q);
    }
    push_prep_fragment(&mut b, spec)?;
    Ok(b.build()?)
}

/// Full experiment: preparation, ancilla reset, a background layer on all
/// qubits, injection on the data, one parity-check round, a second injection
/// layer and transversal readout in `basis`.
pub fn build_surface_d3(spec: &LogicalStateSpec, basis: Pauli, p: f64) -> Result<BuiltCode, CodeError> {
    check_p(p)?;
    let lay = SurfaceLayout::get();
    let basis = if basis == Pauli::X { Pauli::X } else { Pauli::Z };
    let mut b = CircuitBuilder::new(N_QUBITS);
    b.meta("experiment", "surface")
        .meta("state", spec.name())
        .meta("basis", basis.letter().to_string());
    for q in 0..N_QUBITS {
        b.prep(Pauli::Z, q);
    }
    push_prep_fragment(&mut b, spec)?;
    for s in &lay.stabilizers {
        b.prep(Pauli::Z, s.ancilla);
    }
    let background: Vec<u32> = (0..N_QUBITS as u32).map(|q| BACKGROUND_BASE + q).collect();
    for (q, &site) in background.iter().enumerate() {
        b.inject(q, site);
    }
    let layer1: Vec<u32> = (0..9).collect();
    for q in 0..9 {
        b.inject(q, layer1[q]);
    }
    for s in lay.x_stabilizers() {
        b.h(s.ancilla);
    }
    for t in 0..4 {
        for s in &lay.stabilizers {
            if let Some(q) = s.schedule()[t] {
                if s.kind == Pauli::X {
                    b.cnot(s.ancilla, q);
                } else {
                    b.cnot(q, s.ancilla);
                }
            }
        }
    }
    for s in lay.x_stabilizers() {
        b.h(s.ancilla);
    }
    let syn: Vec<usize> = lay.stabilizers.iter().map(|s| b.measure(Pauli::Z, s.ancilla, s.name)).collect();
    let layer2: Vec<u32> = (9..18).collect();
    for q in 0..9 {
        b.inject(q, layer2[q]);
    }
    if basis == Pauli::X {
        for q in 0..9 {
            b.h(q);
        }
    }
    let data: Vec<usize> = (0..9).map(|q| b.measure(Pauli::Z, q, data_label(q))).collect();

    let mut detectors: Vec<Detector> = syn
        .iter()
        .map(|&r| Detector {
            id: 0,
            records: vec![r],
            expect: false,
        })
        .collect();
    for (k, s) in lay.stabilizers.iter().enumerate() {
        if s.kind == basis {
            let mut records = vec![syn[k]];
            records.extend(s.support().iter().map(|&q| data[q]));
            detectors.push(Detector {
                id: 0,
                records,
                expect: false,
            });
        }
    }
    for (i, det) in detectors.iter_mut().enumerate() {
        det.id = i;
    }
    let support = if basis == Pauli::X { lay.x_logical } else { lay.z_logical };
    let logical: Vec<usize> = support.iter().map(|&q| data[q]).collect();
    b.observable(ObservableSpec::Decoded { decoder: "mwpm".into() });
    b.observable(ObservableSpec::Parity {
        records: logical.clone(),
        negate: false,
    });
    let circuit = b.build()?;
    debug_assert!(circuit.ops.iter().filter(|o| matches!(o, Op::Inject { .. })).count() == 35);
    Ok(BuiltCode {
        name: format!("surface_d3_{}_{}", spec.name(), basis.letter().to_ascii_lowercase()),
        circuit,
        detectors,
        logical: LogicalDef {
            records: logical.clone(),
            decoder: Some("mwpm".into()),
            raw: ObservableSpec::Parity {
                records: logical,
                negate: false,
            },
        },
        injection_layers: vec![layer1, layer2],
        background_sites: background,
        d: 3,
        rounds: 1,
        basis,
        p,
    })
}
