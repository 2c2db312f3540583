//! Pauli-frame propagation on top of an exactly enumerated noiseless
//! reference.
//!
//! Every fault sits after the last non-Clifford gate, so the noisy state on
//! each reference branch equals the noiseless one up to a Pauli frame. The
//! frame flips measurement records; feedback after that point toggles the
//! frame by its Pauli when the actual (reference xor flip) bit matches.
//! Feedback before it is part of the reference itself.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::BuildHasherDefault;

use super::weight::{LocFactors, Weight};
use super::SimError;
use crate::circuit::{Circuit, Gate1, Gate2, Op};
use crate::pauli::{Pauli, PauliMask};

/// Deterministic hashing keeps floating-point merge order reproducible.
type DetMap<K, V> = HashMap<K, V, BuildHasherDefault<DefaultHasher>>;

#[derive(Clone, Copy, Debug)]
enum FOp {
    Nop,
    H(u32),
    S(u32),
    Cnot(u32, u32),
    Cz(u32, u32),
    Prep(u32),
    Measure { q: u32, basis: Pauli, record: u32 },
    Feedback { mask: PauliMask, record: u32, value: bool },
    PostSelect { record: u32, value: bool },
}

#[derive(Clone, Debug)]
pub(crate) struct FrameProgram {
    ops: Vec<FOp>,
    is_measure: Vec<bool>,
    /// Faults at ops with a smaller index cannot be tracked by the frame.
    pub first_safe: usize,
    /// Feedback ops up to and including this index are kept in the reference.
    pub reference_feedback_until: Option<usize>,
    pub has_frame_feedback: bool,
    pub has_postselect: bool,
}

#[inline]
fn bit(m: u64, q: u32) -> u64 {
    (m >> q) & 1
}

impl FrameProgram {
    pub fn compile(c: &Circuit) -> Self {
        let last_nc = c.last_non_clifford();
        let first_safe = last_nc.unwrap_or(0);
        let mut has_frame_feedback = false;
        let mut has_postselect = false;
        let ops = c
            .ops
            .iter()
            .enumerate()
            .map(|(i, op)| match *op {
                Op::Gate1 { gate, qubit } => match gate {
                    Gate1::H => FOp::H(qubit as u32),
                    Gate1::S => FOp::S(qubit as u32),
                    _ => FOp::Nop,
                },
                Op::Gate2 { gate, a, b } => match gate {
                    Gate2::Cnot => FOp::Cnot(a as u32, b as u32),
                    Gate2::Cz => FOp::Cz(a as u32, b as u32),
                },
                Op::Prep { qubit, .. } => FOp::Prep(qubit as u32),
                Op::Measure {
                    basis,
                    qubit,
                    record,
                } => FOp::Measure {
                    q: qubit as u32,
                    basis,
                    record: record as u32,
                },
                Op::Feedback {
                    pauli,
                    qubit,
                    record,
                    value,
                } => {
                    if last_nc.is_some_and(|k| i < k) {
                        FOp::Nop
                    } else {
                        has_frame_feedback = true;
                        FOp::Feedback {
                            mask: PauliMask::single(qubit, pauli),
                            record: record as u32,
                            value,
                        }
                    }
                }
                Op::PostSelect { record, value } => {
                    has_postselect = true;
                    FOp::PostSelect {
                        record: record as u32,
                        value,
                    }
                }
                Op::Inject { .. } => FOp::Nop,
            })
            .collect();
        FrameProgram {
            ops,
            is_measure: c.ops.iter().map(|o| matches!(o, Op::Measure { .. })).collect(),
            first_safe,
            reference_feedback_until: last_nc,
            has_frame_feedback,
            has_postselect,
        }
    }

    /// Whether a fault at `op` can be carried by the frame.
    pub fn is_safe(&self, op: usize) -> bool {
        op >= self.first_safe
    }

    /// Applies op `i`; returns false when a post-selection fails.
    #[inline]
    fn step(&self, i: usize, frame: &mut PauliMask, flips: &mut u128, reference: u128) -> bool {
        match self.ops[i] {
            FOp::Nop => {}
            FOp::H(q) => {
                let (x, z) = (bit(frame.x, q), bit(frame.z, q));
                frame.x ^= (x ^ z) << q;
                frame.z ^= (x ^ z) << q;
            }
            FOp::S(q) => frame.z ^= bit(frame.x, q) << q,
            FOp::Cnot(c, t) => {
                frame.x ^= bit(frame.x, c) << t;
                frame.z ^= bit(frame.z, t) << c;
            }
            FOp::Cz(a, b) => {
                let (xa, xb) = (bit(frame.x, a), bit(frame.x, b));
                frame.z ^= (xb << a) | (xa << b);
            }
            FOp::Prep(q) => {
                frame.x &= !(1u64 << q);
                frame.z &= !(1u64 << q);
            }
            FOp::Measure { q, basis, record } => {
                let p = frame.get(q as usize);
                frame.x &= !(1u64 << q);
                frame.z &= !(1u64 << q);
                if p.anticommutes(basis) {
                    *flips ^= 1u128 << record;
                    // one representative per coset keeps merged states small
                    let rep = if basis == Pauli::X { Pauli::Z } else { Pauli::X };
                    *frame = frame.mul(PauliMask::single(q as usize, rep));
                }
            }
            FOp::Feedback {
                mask,
                record,
                value,
            } => {
                let actual = ((reference ^ *flips) >> record) & 1 == 1;
                if actual == value {
                    *frame = frame.mul(mask);
                }
            }
            FOp::PostSelect { record, value } => {
                let actual = ((reference ^ *flips) >> record) & 1 == 1;
                if actual != value {
                    return false;
                }
            }
        }
        true
    }

    /// Runs one shot with fixed faults (sorted by op) on a reference branch.
    /// Returns the record flips and whether the shot is accepted.
    pub fn shot(&self, faults: &[(usize, PauliMask)], reference: u128) -> (u128, bool) {
        let mut frame = PauliMask::IDENTITY;
        let mut flips = 0u128;
        let mut accepted = true;
        let mut fi = 0;
        for i in 0..self.ops.len() {
            let mut fault = PauliMask::IDENTITY;
            while fi < faults.len() && faults[fi].0 == i {
                fault = fault.mul(faults[fi].1);
                fi += 1;
            }
            if self.is_measure[i] {
                frame = frame.mul(fault);
            }
            accepted &= self.step(i, &mut frame, &mut flips, reference);
            if !self.is_measure[i] {
                frame = frame.mul(fault);
            }
        }
        (flips, accepted)
    }

    /// Merged-state enumeration over fault assignments. Returns accepted
    /// weight per record-flip pattern, sorted by pattern.
    pub fn enumerate<W: Weight>(
        &self,
        factors: &[Option<LocFactors>],
        reference: u128,
        len: usize,
        budget: u64,
        used: &mut u64,
    ) -> Result<Vec<(u128, W)>, SimError> {
        let mut states: DetMap<(PauliMask, u128), W> = DetMap::default();
        states.insert((PauliMask::IDENTITY, 0), W::one(len));
        for i in 0..self.ops.len() {
            if self.is_measure[i] {
                if let Some(f) = &factors[i] {
                    states = expand(states, f, budget, used)?;
                }
            }
            let mut next: DetMap<(PauliMask, u128), W> = DetMap::default();
            next.reserve(states.len());
            for ((mut frame, mut flips), w) in states {
                if self.step(i, &mut frame, &mut flips, reference) {
                    match next.entry((frame, flips)) {
                        std::collections::hash_map::Entry::Occupied(mut e) => e.get_mut().add_assign(&w),
                        std::collections::hash_map::Entry::Vacant(e) => {
                            e.insert(w);
                        }
                    }
                }
            }
            states = next;
            if !self.is_measure[i] {
                if let Some(f) = &factors[i] {
                    states = expand(states, f, budget, used)?;
                }
            }
        }
        let mut by_flips: DetMap<u128, W> = DetMap::default();
        for ((_, flips), w) in states {
            match by_flips.entry(flips) {
                std::collections::hash_map::Entry::Occupied(mut e) => e.get_mut().add_assign(&w),
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(w);
                }
            }
        }
        let mut out: Vec<(u128, W)> = by_flips.into_iter().collect();
        out.sort_by_key(|e| e.0);
        Ok(out)
    }
}

fn expand<W: Weight>(
    states: DetMap<(PauliMask, u128), W>,
    f: &LocFactors,
    budget: u64,
    used: &mut u64,
) -> Result<DetMap<(PauliMask, u128), W>, SimError> {
    let branches = f.terms.len() as u64 + 1;
    *used += branches * states.len() as u64;
    if *used > budget {
        return Err(SimError::BudgetExceeded { budget });
    }
    let mut next: DetMap<(PauliMask, u128), W> = DetMap::default();
    next.reserve(states.len() * branches as usize);
    let mut push = |key: (PauliMask, u128), w: W| match next.entry(key) {
        std::collections::hash_map::Entry::Occupied(mut e) => e.get_mut().add_assign(&w),
        std::collections::hash_map::Entry::Vacant(e) => {
            e.insert(w);
        }
    };
    for ((frame, flips), w) in states {
        for &(mask, lin) in &f.terms {
            if !lin.is_zero() {
                push((frame.mul(mask), flips), w.mul_lin(lin));
            }
        }
        if !f.identity.is_zero() {
            push((frame, flips), w.mul_lin(f.identity));
        }
    }
    Ok(next)
}
