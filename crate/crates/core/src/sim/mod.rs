//! Circuit execution under a noise model.
//!
//! Two routes share one interface. The state-vector route handles any
//! circuit up to [`MAX_QUBITS`]. The frame route enumerates the noiseless
//! circuit once and carries faults as Pauli frames; it applies whenever all
//! faults occur after the last non-Clifford gate, which holds for every code
//! experiment here. Shots with faults outside that region fall back to the
//! state vector, so both routes sample the same distribution.

mod frame;
pub mod statevector;
pub mod weight;

use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::circuit::{Circuit, LocationPolicy, ObservableSpec};
use crate::noise::{derive_seed, rng_from_seed, BoundNoise, NoiseError, NoiseModel};
use crate::pauli::PauliMask;

use frame::FrameProgram;
use statevector::{Dfs, ExactAcc, StateVector};
pub use weight::{Lin, LocFactors, Poly, Weight};

pub const MAX_QUBITS: usize = 24;
pub const MAX_RECORDS: usize = 128;
/// Measurement branches below this probability are dropped (exact) or never
/// chosen (trajectories).
pub const MIN_BRANCH_PROB: f64 = 1e-14;
pub const DEFAULT_BUDGET: u64 = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("capacity: {what} is {got}, limit {limit}")]
    Capacity { what: &'static str, got: usize, limit: usize },
    #[error("enumeration budget of {budget} branches exceeded")]
    BudgetExceeded { budget: u64 },
    #[error("no accepted shots (post-selection starvation)")]
    Starvation,
    #[error("observable {0:?} needs a decoder")]
    UnresolvedObservable(String),
    #[error("Born probabilities sum to {0}")]
    Normalization(f64),
    #[error("shots must be at least 1")]
    NoShots,
    #[error("exact route unavailable: {0}")]
    RouteUnavailable(&'static str),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

impl SimError {
    pub fn is_capacity(&self) -> bool {
        matches!(self, SimError::Capacity { .. } | SimError::BudgetExceeded { .. })
    }
}

/// Scalar function of the measurement record of one shot; record `i` is bit
/// `i`.
pub trait Observable: Sync {
    fn eval(&self, bits: u128) -> f64;
}

impl<F: Fn(u128) -> f64 + Sync> Observable for F {
    fn eval(&self, bits: u128) -> f64 {
        self(bits)
    }
}

/// Record-parity and record-mean observables.
#[derive(Clone, Debug)]
pub struct RecordObservable {
    mask: u128,
    sign: f64,
    mean_of: Option<Vec<usize>>,
}

impl RecordObservable {
    pub fn new(spec: &ObservableSpec) -> Result<Self, SimError> {
        match spec {
            ObservableSpec::Parity { records, negate } => Ok(RecordObservable {
                mask: records.iter().fold(0u128, |m, &r| m ^ (1u128 << r)),
                sign: if *negate { -1.0 } else { 1.0 },
                mean_of: None,
            }),
            ObservableSpec::Mean { records } => Ok(RecordObservable {
                mask: 0,
                sign: 1.0,
                mean_of: Some(records.clone()),
            }),
            ObservableSpec::Decoded { decoder } => Err(SimError::UnresolvedObservable(decoder.clone())),
        }
    }

    pub fn parity(records: &[usize]) -> Self {
        Self::new(&ObservableSpec::Parity {
            records: records.to_vec(),
            negate: false,
        })
        .unwrap()
    }
}

impl Observable for RecordObservable {
    fn eval(&self, bits: u128) -> f64 {
        match &self.mean_of {
            Some(rs) => rs.iter().map(|&r| if (bits >> r) & 1 == 1 { -1.0 } else { 1.0 }).sum::<f64>() / rs.len() as f64,
            None => {
                if (bits & self.mask).count_ones() & 1 == 1 {
                    -self.sign
                } else {
                    self.sign
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShotOutcome {
    pub bits: u128,
    pub accepted: bool,
}

impl ShotOutcome {
    pub fn bit(&self, record: usize) -> bool {
        (self.bits >> record) & 1 == 1
    }

    /// Bits keyed by record label.
    pub fn labeled<'a>(&self, c: &'a Circuit) -> Vec<(&'a str, bool)> {
        c.records.iter().enumerate().map(|(i, l)| (l.as_str(), self.bit(i))).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RawEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub acceptance_rate: f64,
    pub accepted: u64,
}

/// ⟨O⟩(r) as a ratio of polynomials in the noise factor; the denominator is
/// the acceptance probability and equals 1 without post-selection.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpectationPolynomial {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
    pub n_locations: usize,
}

impl ExpectationPolynomial {
    pub fn eval(&self, r: f64) -> f64 {
        Poly(self.num.clone()).eval(r) / Poly(self.den.clone()).eval(r)
    }

    /// Taylor coefficients a₀..a_N of ⟨O⟩(r) about r = 0. Exact polynomial
    /// coefficients whenever the denominator is constant.
    pub fn coeffs(&self) -> Vec<f64> {
        let n = self.num.len();
        let mut q = vec![0.0; n];
        for k in 0..n {
            let mut acc = self.num[k];
            for j in 1..=k {
                acc -= self.den[j] * q[k - j];
            }
            q[k] = acc / self.den[0];
        }
        q
    }

    pub fn ideal(&self) -> f64 {
        self.num[0] / self.den[0]
    }
}

/// Which exact engine to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    Auto,
    StateVector,
    Frame,
}

#[derive(Clone, Debug)]
struct Sampler {
    op: usize,
    total: f64,
    cumulative: Vec<(f64, PauliMask)>,
}

#[derive(Clone, Debug)]
struct Reference {
    outcomes: Vec<(u128, f64)>,
    cumulative: Vec<f64>,
}

impl Reference {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u128 {
        if self.outcomes.len() == 1 {
            return self.outcomes[0].0;
        }
        let total = *self.cumulative.last().unwrap();
        let u = rng.gen::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.outcomes[i.min(self.outcomes.len() - 1)].0
    }
}

/// A circuit bound to a noise model, ready to run.
#[derive(Debug)]
pub struct Simulator {
    circuit: Circuit,
    bound: BoundNoise,
    samplers: Vec<Sampler>,
    frame: FrameProgram,
    reference: OnceLock<Result<Reference, SimError>>,
    reference_budget: u64,
}

impl Simulator {
    pub fn new(c: &Circuit, m: &NoiseModel) -> Result<Self, SimError> {
        if c.n_qubits > MAX_QUBITS {
            return Err(SimError::Capacity {
                what: "qubit count",
                got: c.n_qubits,
                limit: MAX_QUBITS,
            });
        }
        if c.n_records() > MAX_RECORDS {
            return Err(SimError::Capacity {
                what: "record count",
                got: c.n_records(),
                limit: MAX_RECORDS,
            });
        }
        let bound = BoundNoise::bind(c, m)?;
        let samplers = bound
            .noisy_ops()
            .map(|(op, ch)| {
                let f = ch.factor(bound.r);
                let mut acc = 0.0;
                let cumulative = ch
                    .terms
                    .iter()
                    .map(|&(mask, p)| {
                        acc += p * f;
                        (acc, mask)
                    })
                    .collect();
                Sampler {
                    op,
                    total: acc,
                    cumulative,
                }
            })
            .filter(|s| s.total > 0.0)
            .collect();
        Ok(Simulator {
            circuit: c.clone(),
            frame: FrameProgram::compile(c),
            bound,
            samplers,
            reference: OnceLock::new(),
            reference_budget: DEFAULT_BUDGET,
        })
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn bound(&self) -> &BoundNoise {
        &self.bound
    }

    fn reference(&self) -> Result<&Reference, SimError> {
        self.reference
            .get_or_init(|| {
                let outcomes = statevector::outcome_distribution(
                    &self.circuit,
                    self.frame.reference_feedback_until,
                    self.reference_budget,
                )?;
                let mut acc = 0.0;
                let cumulative = outcomes
                    .iter()
                    .map(|(_, p)| {
                        acc += p;
                        acc
                    })
                    .collect();
                Ok(Reference {
                    outcomes,
                    cumulative,
                })
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Noiseless record distribution with frame-tracked feedback removed.
    pub fn reference_outcomes(&self) -> Result<Vec<(u128, f64)>, SimError> {
        Ok(self.reference()?.outcomes.clone())
    }

    /// Draws the faults of one shot; `forced` (sorted by op) replaces the
    /// channel at its op.
    fn sample_faults<R: Rng + ?Sized>(&self, forced: &[(usize, PauliMask)], rng: &mut R) -> Vec<(usize, PauliMask)> {
        let mut out = Vec::with_capacity(forced.len() + 4);
        let mut fi = 0;
        for s in &self.samplers {
            while fi < forced.len() && forced[fi].0 < s.op {
                out.push(forced[fi]);
                fi += 1;
            }
            if fi < forced.len() && forced[fi].0 == s.op {
                continue;
            }
            let u: f64 = rng.gen();
            if u < s.total {
                let k = s.cumulative.partition_point(|&(c, _)| c <= u);
                out.push((s.op, s.cumulative[k.min(s.cumulative.len() - 1)].1));
            }
        }
        out.extend_from_slice(&forced[fi..]);
        out
    }

    pub fn run_shot(&self, seed: u64) -> ShotOutcome {
        self.run_shot_with(&[], seed)
    }

    /// One shot with `forced` faults (sorted by op) on top of sampled noise.
    pub fn run_shot_with(&self, forced: &[(usize, PauliMask)], seed: u64) -> ShotOutcome {
        let mut rng = rng_from_seed(seed);
        let faults = self.sample_faults(forced, &mut rng);
        let frame_ok = faults.iter().all(|&(op, _)| self.frame.is_safe(op));
        if frame_ok {
            if let Ok(reference) = self.reference() {
                let base = reference.sample(&mut rng);
                let (flips, accepted) = self.frame.shot(&faults, base);
                return ShotOutcome {
                    bits: base ^ flips,
                    accepted,
                };
            }
        }
        let (bits, accepted) = statevector::trajectory(&self.circuit, &faults, None, &mut rng);
        ShotOutcome { bits, accepted }
    }

    /// Shot on the state-vector route only; used to cross-check the frame route.
    pub fn run_shot_statevector(&self, forced: &[(usize, PauliMask)], seed: u64) -> ShotOutcome {
        let mut rng = rng_from_seed(seed);
        let faults = self.sample_faults(forced, &mut rng);
        let (bits, accepted) = statevector::trajectory(&self.circuit, &faults, None, &mut rng);
        ShotOutcome { bits, accepted }
    }

    /// Mean of `obs` over accepted shots; shot `i` uses seed
    /// `derive_seed(seed, instance, i)`.
    pub fn estimate(
        &self,
        obs: &dyn Observable,
        forced: &[(usize, PauliMask)],
        shots: u64,
        seed: u64,
        instance: u64,
    ) -> Result<RawEstimate, SimError> {
        if shots == 0 {
            return Err(SimError::NoShots);
        }
        let values: Vec<Option<f64>> = (0..shots)
            .into_par_iter()
            .map(|i| {
                let o = self.run_shot_with(forced, derive_seed(seed, instance, i));
                o.accepted.then(|| obs.eval(o.bits))
            })
            .collect();
        let accepted: Vec<f64> = values.into_iter().flatten().collect();
        let n = accepted.len();
        if n == 0 {
            return Err(SimError::Starvation);
        }
        let mean = accepted.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = accepted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Ok(RawEstimate {
            mean,
            stderr,
            acceptance_rate: n as f64 / shots as f64,
            accepted: n as u64,
        })
    }

    /// Raw outcomes of `shots` shots; shot `i` uses seed
    /// `derive_seed(seed, instance, i)`.
    pub fn shots(&self, forced: &[(usize, PauliMask)], shots: u64, seed: u64, instance: u64) -> Vec<ShotOutcome> {
        (0..shots)
            .into_par_iter()
            .map(|i| self.run_shot_with(forced, derive_seed(seed, instance, i)))
            .collect()
    }

    /// Record flips caused by `faults` (sorted by op) relative to the
    /// noiseless run. Deterministic only when the circuit has no feedback
    /// after its last non-Clifford gate and every fault is frame-trackable.
    pub fn fault_flips(&self, faults: &[(usize, PauliMask)]) -> Result<u128, SimError> {
        if self.frame.has_frame_feedback {
            return Err(SimError::RouteUnavailable("feedback makes fault signatures branch-dependent"));
        }
        if !faults.iter().all(|&(op, _)| self.frame.is_safe(op)) {
            return Err(SimError::RouteUnavailable("fault before a non-Clifford gate"));
        }
        Ok(self.frame.shot(faults, 0).0)
    }

    fn frame_route_ok(&self, factors: &[Option<LocFactors>]) -> bool {
        factors
            .iter()
            .enumerate()
            .all(|(i, f)| f.is_none() || self.frame.is_safe(i))
    }

    fn exact_generic<W: Weight>(
        &self,
        obs: &dyn Observable,
        factors: &[Option<LocFactors>],
        len: usize,
        budget: u64,
        route: Route,
    ) -> Result<(W, W), SimError> {
        let use_frame = match route {
            Route::StateVector => false,
            Route::Frame => {
                if !self.frame_route_ok(factors) {
                    return Err(SimError::RouteUnavailable("fault before a non-Clifford gate"));
                }
                true
            }
            Route::Auto => self.frame_route_ok(factors),
        };
        if !use_frame {
            let mut dfs = Dfs {
                circuit: &self.circuit,
                factors,
                obs,
                budget,
                used: 0,
                acc: ExactAcc {
                    num: W::zero(len),
                    den: W::zero(len),
                },
                born_check: true,
            };
            dfs.run(0, StateVector::zero_state(self.circuit.n_qubits), 0, W::one(len))?;
            return Ok((dfs.acc.num, dfs.acc.den));
        }
        let reference = self.reference()?;
        let mut used = reference.outcomes.len() as u64;
        let mut num = W::zero(len);
        let mut den = W::zero(len);
        if self.frame.has_frame_feedback || self.frame.has_postselect {
            for &(base, p) in &reference.outcomes {
                let states = self.frame.enumerate::<W>(factors, base, len, budget, &mut used)?;
                for (flips, w) in states {
                    num.add_scaled(&w, p * obs.eval(base ^ flips));
                    den.add_scaled(&w, p);
                }
            }
        } else {
            let states = self.frame.enumerate::<W>(factors, 0, len, budget, &mut used)?;
            for (flips, w) in states {
                let f: f64 = reference.outcomes.iter().map(|&(base, p)| p * obs.eval(base ^ flips)).sum();
                num.add_scaled(&w, f);
                den.add_assign(&w);
            }
        }
        Ok((num, den))
    }

    /// Exact ⟨O⟩ with `forced` faults (sorted by op) replacing the channels
    /// at their ops.
    pub fn exact(
        &self,
        obs: &dyn Observable,
        forced: &[(usize, PauliMask)],
        budget: u64,
        route: Route,
    ) -> Result<f64, SimError> {
        let factors = weight::factor_table(&self.circuit, &self.bound, None, forced);
        let (num, den) = self.exact_generic::<f64>(obs, &factors, 1, budget, route)?;
        if den <= 0.0 {
            return Err(SimError::Starvation);
        }
        Ok(num / den)
    }

    /// ⟨O⟩ as a function of the factor multiplying the base probabilities of
    /// the scaled channels at `policy` locations. Other channels stay at the
    /// model's current rate.
    pub fn polynomial(
        &self,
        obs: &dyn Observable,
        policy: LocationPolicy,
        budget: u64,
        route: Route,
    ) -> Result<ExpectationPolynomial, SimError> {
        let factors = weight::factor_table(&self.circuit, &self.bound, Some(policy), &[]);
        let n = weight::variable_count(&factors);
        if n > 20 {
            return Err(SimError::Capacity {
                what: "variable fault locations",
                got: n,
                limit: 20,
            });
        }
        let (num, den) = self.exact_generic::<Poly>(obs, &factors, n + 1, budget, route)?;
        if den.0[0] <= 0.0 && den.0.iter().all(|&c| c == 0.0) {
            return Err(SimError::Starvation);
        }
        Ok(ExpectationPolynomial {
            num: num.0,
            den: den.0,
            n_locations: n,
        })
    }
}

/// One trajectory shot.
pub fn run_shot(c: &Circuit, m: &NoiseModel, seed: u64) -> Result<ShotOutcome, SimError> {
    Ok(Simulator::new(c, m)?.run_shot(seed))
}

/// Monte Carlo mean over accepted shots with its standard error.
pub fn estimate_raw(
    c: &Circuit,
    m: &NoiseModel,
    obs: &ObservableSpec,
    shots: u64,
    seed: u64,
) -> Result<RawEstimate, SimError> {
    let o = RecordObservable::new(obs)?;
    Simulator::new(c, m)?.estimate(&o, &[], shots, seed, 0)
}

/// Exact expectation by enumeration of measurement branches and faults.
pub fn exact_expectation(c: &Circuit, m: &NoiseModel, obs: &ObservableSpec, budget: u64) -> Result<f64, SimError> {
    let o = RecordObservable::new(obs)?;
    Simulator::new(c, m)?.exact(&o, &[], budget, Route::Auto)
}

pub fn expectation_polynomial(
    c: &Circuit,
    m: &NoiseModel,
    obs: &ObservableSpec,
    policy: LocationPolicy,
    budget: u64,
) -> Result<ExpectationPolynomial, SimError> {
    let o = RecordObservable::new(obs)?;
    Simulator::new(c, m)?.polynomial(&o, policy, budget, Route::Auto)
}
