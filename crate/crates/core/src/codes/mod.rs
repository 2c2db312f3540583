//! Circuit builders for the code experiments: the five-qubit feedback
//! example, repetition memories and the distance-3 rotated surface code.

mod fig2;
mod repetition;
mod surface;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, ObservableSpec, Op};
use crate::noise::{standard_injection, NoiseError, NoiseModel, PauliMixture, ScaleScope};
use crate::pauli::Pauli;

pub use fig2::build_fig2_example;
pub use repetition::build_repetition;
pub use surface::{build_surface_d3, prep_logical_state_circuit, Stabilizer, SurfaceLayout, BACKGROUND_BASE, SURFACE_LAYOUT};

/// Detectors are packed into a `u64` syndrome word.
pub const MAX_DETECTORS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodeError {
    #[error("distance must be 3, 5 or 7, got {0}")]
    InvalidDistance(usize),
    #[error("round count must be 1..=4, got {0}")]
    InvalidRounds(usize),
    #[error("logical amplitudes ({0}, {1}) are not normalized")]
    NotNormalized(f64, f64),
    #[error("injection probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

/// Parity of a record set that is fixed in the noiseless circuit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detector {
    pub id: usize,
    pub records: Vec<usize>,
    pub expect: bool,
}

/// How the logical value of a shot is read out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogicalDef {
    /// Records whose parity, corrected by the decoder, is the logical value.
    pub records: Vec<usize>,
    /// Decoder id; `None` means the circuit corrects itself (feedback).
    pub decoder: Option<String>,
    /// Observable read without correction for the reference curve.
    pub raw: ObservableSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LogicalStateSpec {
    Zero,
    Plus,
    Amplitudes(f64, f64),
}

impl LogicalStateSpec {
    pub fn validate(&self) -> Result<(), CodeError> {
        if let LogicalStateSpec::Amplitudes(a, b) = *self {
            if !((a * a + b * b) - 1.0).abs().le(&1e-10) {
                return Err(CodeError::NotNormalized(a, b));
            }
        }
        Ok(())
    }

    /// Real amplitudes (α, β) of α|0_L⟩ + β|1_L⟩.
    pub fn amplitudes(&self) -> (f64, f64) {
        match *self {
            LogicalStateSpec::Zero => (1.0, 0.0),
            LogicalStateSpec::Plus => (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
            LogicalStateSpec::Amplitudes(a, b) => (a, b),
        }
    }

    /// The cos(π/6)|0_L⟩ + sin(π/6)|1_L⟩ state of the Bloch-plane study.
    pub fn psi() -> Self {
        let t = std::f64::consts::FRAC_PI_6;
        LogicalStateSpec::Amplitudes(t.cos(), t.sin())
    }

    /// Ideal (⟨X_L⟩, ⟨Z_L⟩).
    pub fn bloch(&self) -> (f64, f64) {
        let (a, b) = self.amplitudes();
        (2.0 * a * b, a * a - b * b)
    }

    pub fn name(&self) -> String {
        match self {
            LogicalStateSpec::Zero => "zero".into(),
            LogicalStateSpec::Plus => "plus".into(),
            LogicalStateSpec::Amplitudes(a, b) => format!("amp({a},{b})"),
        }
    }
}

/// A code experiment: circuit, detectors, logical readout and site layout.
#[derive(Clone, Debug, PartialEq)]
pub struct BuiltCode {
    pub name: String,
    pub circuit: Circuit,
    pub detectors: Vec<Detector>,
    pub logical: LogicalDef,
    /// Injection site ids, one inner list per layer.
    pub injection_layers: Vec<Vec<u32>>,
    /// Sites carrying fixed (unscaled) noise only.
    pub background_sites: Vec<u32>,
    pub d: usize,
    pub rounds: usize,
    pub basis: Pauli,
    /// Unit injection probability.
    pub p: f64,
}

fn check_p(p: f64) -> Result<(), CodeError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(CodeError::InvalidProbability(p));
    }
    Ok(())
}

impl BuiltCode {
    pub fn injection_sites(&self) -> Vec<u32> {
        self.injection_layers.iter().flatten().copied().collect()
    }

    /// Op index of each injection site, in site-list order.
    pub fn injection_ops(&self) -> Vec<usize> {
        let ops = self.circuit.site_ops();
        self.injection_sites().iter().map(|s| ops[s]).collect()
    }

    pub fn n_injection_sites(&self) -> usize {
        self.injection_layers.iter().map(Vec::len).sum()
    }

    /// The same circuit with feedback and post-selection removed.
    pub fn uncorrected_circuit(&self) -> Circuit {
        let mut c = self.circuit.clone();
        c.ops.retain(|op| !matches!(op, Op::Feedback { .. } | Op::PostSelect { .. }));
        c
    }

    /// Fired-detector word of a shot.
    pub fn syndrome(&self, bits: u128) -> u64 {
        let mut s = 0u64;
        for (i, det) in self.detectors.iter().enumerate() {
            let parity = det.records.iter().fold(false, |acc, &r| acc ^ ((bits >> r) & 1 == 1));
            if parity != det.expect {
                s |= 1 << i;
            }
        }
        s
    }

    pub fn record_mask(records: &[usize]) -> u128 {
        records.iter().fold(0u128, |m, &r| m ^ (1u128 << r))
    }

    /// Parity bit of the logical records before correction.
    pub fn logical_parity(&self, bits: u128) -> bool {
        (bits & Self::record_mask(&self.logical.records)).count_ones() & 1 == 1
    }

    /// Uncorrected value of a shot in [-1, 1].
    pub fn raw_value(&self, bits: u128) -> f64 {
        let sign = |r: usize| if (bits >> r) & 1 == 1 { -1.0 } else { 1.0 };
        match &self.logical.raw {
            ObservableSpec::Parity { records, negate } => {
                let v = records.iter().map(|&r| sign(r)).product::<f64>();
                if *negate {
                    -v
                } else {
                    v
                }
            }
            ObservableSpec::Mean { records } => records.iter().map(|&r| sign(r)).sum::<f64>() / records.len() as f64,
            ObservableSpec::Decoded { .. } => unreachable!("raw readout is never decoded"),
        }
    }

    /// Injection on every site at probability `p` over `device`, with only
    /// the injected errors scaled.
    pub fn noise_model(&self, device: &NoiseModel) -> Result<NoiseModel, CodeError> {
        let mut m = device
            .clone()
            .with_scope(ScaleScope::InjectionOnly)
            .with_injection(self.injection_sites(), &standard_injection(self.p)?);
        m.r = 1.0;
        Ok(m)
    }

    /// Adds uniform single-qubit depolarizing noise on the background sites.
    pub fn with_background(&self, m: NoiseModel, p_dep: f64) -> Result<NoiseModel, CodeError> {
        Ok(m.with_background(self.background_sites.iter().copied(), &PauliMixture::depolarizing1(p_dep)?))
    }

    fn label_join(&self, records: &[usize]) -> String {
        records
            .iter()
            .map(|&r| self.circuit.records[r].as_str())
            .collect::<Vec<_>>()
            .join("^")
    }

    /// One `DET <id> = <label>^... expect <bit>` line per detector.
    pub fn detectors_text(&self) -> String {
        let mut out = String::new();
        for det in &self.detectors {
            out.push_str(&format!(
                "DET {} = {} expect {}\n",
                det.id,
                self.label_join(&det.records),
                u8::from(det.expect)
            ));
        }
        out
    }

    pub fn logical_line(&self) -> String {
        let raw = match &self.logical.raw {
            ObservableSpec::Mean { records } => format!("mean({})", self.label_join(records)),
            spec => self.label_join(spec.records()),
        };
        format!(
            "LOGICAL {} decoder={} raw={}",
            self.label_join(&self.logical.records),
            self.logical.decoder.as_deref().unwrap_or("none"),
            raw
        )
    }

    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "name": self.name,
            "d": self.d,
            "M": self.rounds,
            "basis": self.basis.letter().to_string(),
            "p": self.p,
            "n_qubits": self.circuit.n_qubits,
            "sites": self.injection_layers,
            "background_sites": self.background_sites,
            "detectors": self.detectors.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_spec_normalization() {
        assert!(LogicalStateSpec::Amplitudes(0.6, 0.8).validate().is_ok());
        assert!(LogicalStateSpec::Amplitudes(0.6, 0.7).validate().is_err());
        let (x, z) = LogicalStateSpec::psi().bloch();
        assert!((z - 0.5).abs() < 1e-12);
        assert!((x - 0.75f64.sqrt()).abs() < 1e-12);
    }
}
