//! Stochastic Pauli noise: mixtures bound to operation kinds and injection
//! sites, scaling `p → r·p`, device presets and seeded fault sampling.
//!
//! Gate and preparation noise act after the ideal operation, measurement noise
//! before it. Preparation and measurement mixtures are written in the Z frame
//! (an `X` term is a bit flip) and rotated into the operation's basis when
//! bound to a circuit.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, Location, LocationPolicy, Op, OpKind};
use crate::pauli::{Pauli, PauliError, PauliMask, PauliTerm};

/// Slack allowed when checking `r·total_p ≤ 1`.
const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("invalid probability {0}")]
    InvalidProbability(f64),
    #[error("mixture total probability {0} exceeds 1")]
    TotalExceedsOne(f64),
    #[error("identity listed as an error term")]
    IdentityTerm,
    #[error("mixture terms have mixed widths")]
    MixedWidths,
    #[error("invalid scale factor {0}")]
    InvalidScale(f64),
    #[error("scaling overflow: r={r} times total_p={total_p} exceeds 1 ({what})")]
    ScalingOverflow { r: f64, total_p: f64, what: String },
    #[error("unknown noise preset {0:?}")]
    UnknownPreset(String),
    #[error("op {op}: mixture of width {width} cannot act on {arity} qubit(s)")]
    Arity { op: usize, width: usize, arity: usize },
    #[error("site {0} has both a scaled and a background channel")]
    SiteConflict(u32),
    #[error(transparent)]
    Pauli(#[from] PauliError),
}

/// Probabilistic mixture of Pauli errors; identity carries the remainder.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "MixtureRepr", into = "MixtureRepr")]
pub struct PauliMixture {
    terms: Vec<(PauliTerm, f64)>,
    width: usize,
    /// Terms index circuit qubits directly instead of the operation's
    /// qubits; used for crosstalk-style errors.
    global: bool,
}

#[derive(Serialize, Deserialize)]
struct MixtureRepr {
    width: usize,
    #[serde(default)]
    global: bool,
    terms: BTreeMap<String, f64>,
}

impl TryFrom<MixtureRepr> for PauliMixture {
    type Error = NoiseError;

    fn try_from(r: MixtureRepr) -> Result<Self, NoiseError> {
        let terms = r
            .terms
            .into_iter()
            .map(|(k, p)| Ok((PauliTerm::parse_with_qubits(&k, r.width)?, p)))
            .collect::<Result<Vec<_>, NoiseError>>()?;
        let mut m = PauliMixture::new(r.width, terms)?;
        m.global = r.global;
        Ok(m)
    }
}

impl From<PauliMixture> for MixtureRepr {
    fn from(m: PauliMixture) -> Self {
        MixtureRepr {
            width: m.width,
            global: m.global,
            terms: m.terms.iter().map(|(t, p)| (t.to_string(), *p)).collect(),
        }
    }
}

fn check_prob(p: f64) -> Result<(), NoiseError> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(NoiseError::InvalidProbability(p));
    }
    Ok(())
}

impl PauliMixture {
    /// Builds a mixture over `width` local qubits. Zero-probability terms are
    /// dropped.
    pub fn new(width: usize, terms: Vec<(PauliTerm, f64)>) -> Result<Self, NoiseError> {
        let mut kept = Vec::with_capacity(terms.len());
        let mut total = 0.0;
        for (t, p) in terms {
            check_prob(p)?;
            if t.n_qubits() != width {
                return Err(NoiseError::MixedWidths);
            }
            if t.is_identity_up_to_phase() {
                return Err(NoiseError::IdentityTerm);
            }
            if p > 0.0 {
                total += p;
                kept.push((t.unsigned(), p));
            }
        }
        if total > 1.0 + PROB_EPS {
            return Err(NoiseError::TotalExceedsOne(total));
        }
        // canonical order so that serialization round-trips
        kept.sort_by_key(|(t, _)| t.to_string());
        Ok(PauliMixture {
            terms: kept,
            width,
            global: false,
        })
    }

    pub fn empty(width: usize) -> Self {
        PauliMixture {
            terms: Vec::new(),
            width,
            global: false,
        }
    }

    /// Marks the terms as acting on absolute circuit qubits.
    pub fn into_global(mut self) -> Self {
        self.global = true;
        self
    }

    pub fn is_global(&self) -> bool {
        self.global
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn terms(&self) -> &[(PauliTerm, f64)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_p(&self) -> f64 {
        self.terms.iter().map(|(_, p)| p).sum()
    }

    /// Every probability multiplied by `r`.
    pub fn scaled(&self, r: f64) -> Result<Self, NoiseError> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(NoiseError::InvalidScale(r));
        }
        let total = self.total_p();
        if r * total > 1.0 + PROB_EPS {
            return Err(NoiseError::ScalingOverflow {
                r,
                total_p: total,
                what: "mixture".into(),
            });
        }
        let mut out = self.clone();
        for (_, p) in &mut out.terms {
            *p *= r;
        }
        Ok(out)
    }

    /// Single-qubit depolarizing channel with total error probability `p`.
    pub fn depolarizing1(p: f64) -> Result<Self, NoiseError> {
        check_prob(p)?;
        let terms = Pauli::NON_IDENTITY
            .iter()
            .map(|&q| (PauliTerm::single(1, 0, q).unwrap(), p / 3.0))
            .collect();
        Self::new(1, terms)
    }

    /// Two-qubit depolarizing channel: 15 non-identity terms, `p/15` each.
    pub fn depolarizing2(p: f64) -> Result<Self, NoiseError> {
        check_prob(p)?;
        let mut terms = Vec::with_capacity(15);
        for a in [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z] {
            for b in [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z] {
                if a == Pauli::I && b == Pauli::I {
                    continue;
                }
                terms.push((PauliTerm::from_sparse(2, [(0, a), (1, b)]).unwrap(), p / 15.0));
            }
        }
        Self::new(2, terms)
    }

    /// Readout-style bit flip (`X` in the Z frame).
    pub fn bit_flip(p: f64) -> Result<Self, NoiseError> {
        check_prob(p)?;
        Self::new(1, vec![(PauliTerm::single(1, 0, Pauli::X).unwrap(), p)])
    }
}

/// Injection channel `{X: p/3, Y: p/3, Z: p/3}`.
pub fn standard_injection(p: f64) -> Result<PauliMixture, NoiseError> {
    PauliMixture::depolarizing1(p)
}

/// Which channels the factor `r` multiplies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleScope {
    #[default]
    All,
    /// Only injection-site channels; device noise stays at its calibrated
    /// rate, as in the hardware experiments.
    InjectionOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    #[serde(default)]
    pub opkinds: BTreeMap<OpKind, PauliMixture>,
    /// Scaled channels on injection sites.
    #[serde(default)]
    pub injection: BTreeMap<u32, PauliMixture>,
    /// Fixed channels on injection sites; never scaled.
    #[serde(default)]
    pub background: BTreeMap<u32, PauliMixture>,
    pub r: f64,
    #[serde(default)]
    pub scope: ScaleScope,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::ideal()
    }
}

/// Readout error rates of processor 1 for the two readout methods.
pub const PROCESSOR1_READOUT_METHOD_I: f64 = 0.0047;
pub const PROCESSOR1_READOUT_METHOD_II: f64 = 0.0087;

impl NoiseModel {
    pub fn ideal() -> Self {
        NoiseModel {
            opkinds: BTreeMap::new(),
            injection: BTreeMap::new(),
            background: BTreeMap::new(),
            r: 1.0,
            scope: ScaleScope::All,
        }
    }

    /// Depolarizing gate noise and readout bit flips with the given totals.
    pub fn device(p1: f64, p2: f64, readout: f64) -> Result<Self, NoiseError> {
        let mut m = Self::ideal();
        m.opkinds.insert(OpKind::Gate1, PauliMixture::depolarizing1(p1)?);
        m.opkinds.insert(OpKind::Gate2, PauliMixture::depolarizing2(p2)?);
        m.opkinds.insert(OpKind::Measure, PauliMixture::bit_flip(readout)?);
        m.opkinds.retain(|_, v| !v.is_empty());
        Ok(m)
    }

    pub fn is_ideal(&self) -> bool {
        self.opkinds.values().all(PauliMixture::is_empty)
            && self.injection.values().all(PauliMixture::is_empty)
            && self.background.values().all(PauliMixture::is_empty)
    }

    pub fn with_scope(mut self, scope: ScaleScope) -> Self {
        self.scope = scope;
        self
    }

    /// Binds `mixture` to each listed site as a scaled injection channel.
    pub fn with_injection(
        mut self,
        sites: impl IntoIterator<Item = u32>,
        mixture: &PauliMixture,
    ) -> Self {
        for s in sites {
            self.injection.insert(s, mixture.clone());
        }
        self
    }

    pub fn with_background(
        mut self,
        sites: impl IntoIterator<Item = u32>,
        mixture: &PauliMixture,
    ) -> Self {
        for s in sites {
            self.background.insert(s, mixture.clone());
        }
        self
    }

    /// Same model without injection channels.
    pub fn without_injection(&self) -> Self {
        let mut m = self.clone();
        m.injection.clear();
        m
    }

    pub fn opkind_scaled(&self) -> bool {
        self.scope == ScaleScope::All
    }

    /// Effective mixture for an op kind at the current `r`.
    pub fn effective_opkind(&self, kind: OpKind) -> Option<PauliMixture> {
        let m = self.opkinds.get(&kind)?;
        let r = if self.opkind_scaled() { self.r } else { 1.0 };
        Some(m.scaled(r).expect("validated at scaling time"))
    }

    fn check_scale(&self, r: f64) -> Result<(), NoiseError> {
        let check = |m: &PauliMixture, what: String| {
            let total = m.total_p();
            if r * total > 1.0 + PROB_EPS {
                return Err(NoiseError::ScalingOverflow {
                    r,
                    total_p: total,
                    what,
                });
            }
            Ok(())
        };
        if self.opkind_scaled() {
            for (k, m) in &self.opkinds {
                check(m, format!("{k:?}"))?;
            }
        }
        for (s, m) in &self.injection {
            check(m, format!("site {s}"))?;
        }
        for s in self.injection.keys() {
            if self.background.contains_key(s) {
                return Err(NoiseError::SiteConflict(*s));
            }
        }
        Ok(())
    }
}

/// Multiplies the scaled error probabilities of `m` by `r`.
pub fn scale_model(m: &NoiseModel, r: f64) -> Result<NoiseModel, NoiseError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(NoiseError::InvalidScale(r));
    }
    let new_r = m.r * r;
    m.check_scale(new_r)?;
    let mut out = m.clone();
    out.r = new_r;
    Ok(out)
}

/// Named device presets. `processor1` uses the Method I readout error.
pub fn device_preset(name: &str) -> Result<NoiseModel, NoiseError> {
    match name {
        "processor1" => NoiseModel::device(0.00085, 0.0056, PROCESSOR1_READOUT_METHOD_I),
        "processor1_method2" => NoiseModel::device(0.00085, 0.0056, PROCESSOR1_READOUT_METHOD_II),
        "processor2" => NoiseModel::device(0.00055, 0.0037, 0.0087),
        "ideal" => Ok(NoiseModel::ideal()),
        _ => Err(NoiseError::UnknownPreset(name.to_string())),
    }
}

/// One bound error channel at a circuit location. Probabilities are the
/// unscaled base values; the effective value is `base · r` when `scaled`.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub terms: Vec<(PauliMask, f64)>,
    pub scaled: bool,
    pub injection: bool,
}

impl Channel {
    pub fn total_base(&self) -> f64 {
        self.terms.iter().map(|(_, p)| p).sum()
    }

    pub fn factor(&self, r: f64) -> f64 {
        if self.scaled {
            r
        } else {
            1.0
        }
    }

    /// Draws the error for one execution, `None` meaning no error.
    pub fn sample<R: Rng + ?Sized>(&self, r: f64, rng: &mut R) -> Option<PauliMask> {
        let f = self.factor(r);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for &(m, p) in &self.terms {
            acc += p * f;
            if u < acc {
                return Some(m);
            }
        }
        None
    }
}

/// Channels of a model resolved against a circuit, indexed by op.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundNoise {
    pub channels: Vec<Option<Channel>>,
    pub r: f64,
}

/// Maps a Z-frame single-qubit letter into the frame of `basis`.
fn rotate_into_basis(p: Pauli, basis: Pauli) -> Pauli {
    match basis {
        Pauli::X => match p {
            Pauli::X => Pauli::Z,
            Pauli::Z => Pauli::X,
            other => other,
        },
        Pauli::Y => match p {
            Pauli::X => Pauli::Z,
            Pauli::Z => Pauli::Y,
            Pauli::Y => Pauli::X,
            Pauli::I => Pauli::I,
        },
        _ => p,
    }
}

fn bind_mixture(
    m: &PauliMixture,
    op_index: usize,
    op: &Op,
    n_qubits: usize,
) -> Result<Vec<(PauliMask, f64)>, NoiseError> {
    let qubits = op.qubits();
    let basis = match op {
        Op::Prep { basis, .. } | Op::Measure { basis, .. } => *basis,
        _ => Pauli::Z,
    };
    let mut out = Vec::with_capacity(m.terms.len());
    for (t, p) in &m.terms {
        let mut mask = PauliMask::IDENTITY;
        if m.global {
            if t.n_qubits() != n_qubits {
                return Err(NoiseError::Arity {
                    op: op_index,
                    width: t.n_qubits(),
                    arity: n_qubits,
                });
            }
            mask = PauliMask::from_term(t)?;
        } else {
            if t.n_qubits() != qubits.len() {
                return Err(NoiseError::Arity {
                    op: op_index,
                    width: t.n_qubits(),
                    arity: qubits.len(),
                });
            }
            for (local, &q) in qubits.iter().enumerate() {
                let letter = rotate_into_basis(t.get(local), basis);
                mask = mask.mul(PauliMask::single(q, letter));
            }
        }
        out.push((mask, *p));
    }
    Ok(out)
}

impl BoundNoise {
    pub fn bind(c: &Circuit, m: &NoiseModel) -> Result<Self, NoiseError> {
        m.check_scale(m.r)?;
        let mut channels = Vec::with_capacity(c.ops.len());
        for (i, op) in c.ops.iter().enumerate() {
            let (mix, scaled, injection) = match op {
                Op::Inject { site, .. } => match (m.injection.get(site), m.background.get(site)) {
                    (Some(_), Some(_)) => return Err(NoiseError::SiteConflict(*site)),
                    (Some(mx), None) => (Some(mx), true, true),
                    (None, Some(mx)) => (Some(mx), false, false),
                    (None, None) => (None, false, true),
                },
                _ => match op.kind() {
                    Some(k) => (m.opkinds.get(&k), m.opkind_scaled(), false),
                    None => (None, false, false),
                },
            };
            let ch = match mix {
                Some(mx) if !mx.is_empty() => Some(Channel {
                    terms: bind_mixture(mx, i, op, c.n_qubits)?,
                    scaled,
                    injection,
                }),
                _ => None,
            };
            channels.push(ch);
        }
        Ok(BoundNoise { channels, r: m.r })
    }

    pub fn channel(&self, op: usize) -> Option<&Channel> {
        self.channels.get(op).and_then(Option::as_ref)
    }

    /// Ops carrying a channel, in program order.
    pub fn noisy_ops(&self) -> impl Iterator<Item = (usize, &Channel)> + '_ {
        self.channels
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|c| (i, c)))
    }

    pub fn is_noiseless(&self) -> bool {
        self.channels.iter().all(Option::is_none)
    }
}

/// Assignment of Pauli errors to fault locations; absent means no error.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FaultConfig {
    pub assignment: BTreeMap<Location, PauliTerm>,
}

impl FaultConfig {
    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    /// `(op index, mask)` pairs for the simulators.
    pub fn masks(&self) -> Vec<(usize, PauliMask)> {
        self.assignment
            .iter()
            .map(|(l, t)| (l.op, PauliMask::from_term(t).expect("≤ 64 qubits")))
            .collect()
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Keyed seed derivation shared by every parallel worker.
pub fn derive_seed(experiment_seed: u64, instance_id: u64, shot_id: u64) -> u64 {
    let a = splitmix64(experiment_seed);
    let b = splitmix64(a ^ instance_id.wrapping_mul(0xD1B5_4A32_D192_ED03));
    splitmix64(b ^ shot_id.wrapping_mul(0xA24B_AED4_963E_E407))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws an independent error at every in-policy location.
pub fn sample_fault_config(
    c: &Circuit,
    m: &NoiseModel,
    policy: LocationPolicy,
    seed: u64,
) -> Result<FaultConfig, NoiseError> {
    let bound = BoundNoise::bind(c, m)?;
    let mut rng = rng_from_seed(seed);
    Ok(sample_bound(c, &bound, policy, &mut rng))
}

pub(crate) fn sample_bound<R: Rng + ?Sized>(
    c: &Circuit,
    bound: &BoundNoise,
    policy: LocationPolicy,
    rng: &mut R,
) -> FaultConfig {
    let mut cfg = FaultConfig::default();
    for loc in c.fault_locations(policy) {
        if let Some(ch) = bound.channel(loc.op) {
            if let Some(mask) = ch.sample(bound.r, rng) {
                cfg.assignment.insert(loc, mask.to_term(c.n_qubits));
            }
        }
    }
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CircuitBuilder;
    use proptest::prelude::*;

    fn probs(m: &PauliMixture) -> Vec<f64> {
        m.terms().iter().map(|(_, p)| *p).collect()
    }

    #[test]
    fn standard_injection_examples() {
        let m = standard_injection(0.088).unwrap();
        assert_eq!(probs(&m), vec![0.088 / 3.0; 3]);
        assert!(standard_injection(0.0).unwrap().is_empty());
        let m = standard_injection(0.036).unwrap();
        for p in probs(&m) {
            assert!((p - 0.012).abs() < 1e-15);
        }
        assert!(standard_injection(1.5).is_err());
        assert!(standard_injection(-0.1).is_err());
    }

    #[test]
    fn scaling_examples() {
        let base = NoiseModel::ideal().with_injection([0], &standard_injection(0.036).unwrap());
        let s = scale_model(&base, 3.0).unwrap();
        let b = BoundNoise::bind(
            &{
                let mut cb = CircuitBuilder::new(1);
                cb.inject(0, 0);
                cb.build().unwrap()
            },
            &s,
        )
        .unwrap();
        let ch = b.channel(0).unwrap();
        let eff: f64 = ch.terms.iter().map(|(_, p)| p * ch.factor(b.r)).sum();
        assert!((eff - 0.108).abs() < 1e-15);
        assert_eq!(scale_model(&base, 1.0).unwrap(), base);

        let heavy = NoiseModel::ideal().with_injection([0], &standard_injection(0.4).unwrap());
        assert!(matches!(
            scale_model(&heavy, 3.0),
            Err(NoiseError::ScalingOverflow { .. })
        ));
        assert!(scale_model(&heavy, 0.0).is_err());
    }

    #[test]
    fn presets() {
        let p1 = device_preset("processor1").unwrap();
        assert!((p1.opkinds[&OpKind::Gate1].total_p() - 0.00085).abs() < 1e-15);
        assert!((p1.opkinds[&OpKind::Gate2].total_p() - 0.0056).abs() < 1e-15);
        assert_eq!(p1.opkinds[&OpKind::Gate2].terms().len(), 15);
        assert!((p1.opkinds[&OpKind::Measure].total_p() - 0.0047).abs() < 1e-15);
        let p2 = device_preset("processor2").unwrap();
        assert!((p2.opkinds[&OpKind::Gate1].total_p() - 0.00055).abs() < 1e-15);
        assert!((p2.opkinds[&OpKind::Gate2].total_p() - 0.0037).abs() < 1e-15);
        assert!((p2.opkinds[&OpKind::Measure].total_p() - 0.0087).abs() < 1e-15);
        assert!(device_preset("ideal").unwrap().is_ideal());
        assert!(matches!(device_preset("nope"), Err(NoiseError::UnknownPreset(_))));
    }

    #[test]
    fn measurement_noise_rotates_with_basis() {
        let mut b = CircuitBuilder::new(1);
        b.measure(Pauli::X, 0, "a");
        let c = b.build().unwrap();
        let m = NoiseModel::device(0.0, 0.0, 0.1).unwrap();
        let bound = BoundNoise::bind(&c, &m).unwrap();
        assert_eq!(bound.channel(0).unwrap().terms[0].0, PauliMask::single(0, Pauli::Z));
    }

    #[test]
    fn json_round_trip() {
        let m = device_preset("processor1")
            .unwrap()
            .with_injection([0, 1], &standard_injection(0.036).unwrap())
            .with_scope(ScaleScope::InjectionOnly);
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"opkinds\"") && text.contains("\"injection\"") && text.contains("\"r\""));
        let back: NoiseModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn forced_and_ideal_draws() {
        let mut b = CircuitBuilder::new(2);
        b.inject(0, 0).inject(1, 1);
        let c = b.build().unwrap();
        let forced = PauliMixture::new(1, vec![(PauliTerm::single(1, 0, Pauli::X).unwrap(), 1.0)]).unwrap();
        let m = NoiseModel::ideal().with_injection([1], &forced);
        for seed in 0..20 {
            let cfg = sample_fault_config(&c, &m, LocationPolicy::InjectionOnly, seed).unwrap();
            assert_eq!(cfg.len(), 1);
            assert_eq!(cfg.assignment[&Location { op: 1 }].to_string(), "+X1");
            let empty = sample_fault_config(&c, &NoiseModel::ideal(), LocationPolicy::AllOps, seed).unwrap();
            assert!(empty.is_empty());
        }
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_eq!(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
        let mut seen = std::collections::HashSet::new();
        for i in 0..50 {
            for s in 0..50 {
                assert!(seen.insert(derive_seed(9, i, s)));
            }
        }
    }

    proptest! {
        #[test]
        fn scale_composition_is_exact(a in 0.1f64..3.0, b in 0.1f64..3.0, p in 0.0f64..0.1) {
            let m = NoiseModel::ideal().with_injection([0], &standard_injection(p).unwrap());
            let two = scale_model(&scale_model(&m, a).unwrap(), b).unwrap();
            let one = scale_model(&m, a * b).unwrap();
            prop_assert_eq!(two.r, one.r);
            prop_assert_eq!(two, one);
        }
    }
}
