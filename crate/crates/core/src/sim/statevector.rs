//! Dense state-vector simulation: trajectories and exact depth-first
//! enumeration over measurement branches and fault assignments.

use num_complex::Complex64;
use rand::Rng;

use super::weight::{LocFactors, Weight};
use super::{Observable, SimError, MIN_BRANCH_PROB};
use crate::circuit::{Circuit, Gate1, Gate2, Op};
use crate::pauli::{Pauli, PauliMask};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Clone, Debug)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zero_state(n: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { n, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Calls `f(i0, i1)` for every index pair differing only in bit `q`.
    #[inline]
    fn pairs(&mut self, q: usize, mut f: impl FnMut(&mut [Complex64], usize, usize)) {
        let stride = 1usize << q;
        let len = self.amps.len();
        let mut base = 0;
        while base < len {
            for i0 in base..base + stride {
                f(&mut self.amps, i0, i0 + stride);
            }
            base += 2 * stride;
        }
    }

    fn apply_2x2(&mut self, q: usize, m: [[Complex64; 2]; 2]) {
        self.pairs(q, |a, i0, i1| {
            let (x, y) = (a[i0], a[i1]);
            a[i0] = m[0][0] * x + m[0][1] * y;
            a[i1] = m[1][0] * x + m[1][1] * y;
        });
    }

    pub fn apply_gate1(&mut self, g: Gate1, q: usize) {
        let i = Complex64::i();
        match g {
            Gate1::I => {}
            Gate1::X => self.pairs(q, |a, i0, i1| a.swap(i0, i1)),
            Gate1::Y => self.pairs(q, |a, i0, i1| {
                let (x, y) = (a[i0], a[i1]);
                a[i0] = -i * y;
                a[i1] = i * x;
            }),
            Gate1::Z => self.pairs(q, |a, _, i1| a[i1] = -a[i1]),
            Gate1::H => self.pairs(q, |a, i0, i1| {
                let (x, y) = (a[i0], a[i1]);
                a[i0] = (x + y) * FRAC_1_SQRT_2;
                a[i1] = (x - y) * FRAC_1_SQRT_2;
            }),
            Gate1::S => self.pairs(q, |a, _, i1| a[i1] *= i),
            Gate1::Ry(t) => {
                let (s, c) = (t / 2.0).sin_cos();
                let (c, s) = (Complex64::new(c, 0.0), Complex64::new(s, 0.0));
                self.apply_2x2(q, [[c, -s], [s, c]]);
            }
            Gate1::Rz(t) => {
                let e0 = Complex64::from_polar(1.0, -t / 2.0);
                let e1 = Complex64::from_polar(1.0, t / 2.0);
                self.pairs(q, |a, i0, i1| {
                    a[i0] *= e0;
                    a[i1] *= e1;
                });
            }
        }
    }

    fn apply_sdg(&mut self, q: usize) {
        let mi = -Complex64::i();
        self.pairs(q, |a, _, i1| a[i1] *= mi);
    }

    pub fn apply_gate2(&mut self, g: Gate2, a: usize, b: usize) {
        let (ma, mb) = (1usize << a, 1usize << b);
        match g {
            Gate2::Cnot => {
                for i in 0..self.amps.len() {
                    if i & ma != 0 && i & mb == 0 {
                        self.amps.swap(i, i | mb);
                    }
                }
            }
            Gate2::Cz => {
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    if i & ma != 0 && i & mb != 0 {
                        *amp = -*amp;
                    }
                }
            }
        }
    }

    pub fn apply_pauli(&mut self, m: PauliMask) {
        for q in 0..self.n {
            match m.get(q) {
                Pauli::I => {}
                Pauli::X => self.apply_gate1(Gate1::X, q),
                Pauli::Y => self.apply_gate1(Gate1::Y, q),
                Pauli::Z => self.apply_gate1(Gate1::Z, q),
            }
        }
    }

    /// Rotates `basis` eigenstates onto the computational basis.
    fn to_z_frame(&mut self, basis: Pauli, q: usize) {
        match basis {
            Pauli::X => self.apply_gate1(Gate1::H, q),
            Pauli::Y => {
                self.apply_sdg(q);
                self.apply_gate1(Gate1::H, q);
            }
            _ => {}
        }
    }

    fn from_z_frame(&mut self, basis: Pauli, q: usize) {
        match basis {
            Pauli::X => self.apply_gate1(Gate1::H, q),
            Pauli::Y => {
                self.apply_gate1(Gate1::H, q);
                self.apply_gate1(Gate1::S, q);
            }
            _ => {}
        }
    }

    pub fn prob_one(&self, q: usize) -> f64 {
        self.z_weights(q).1
    }

    /// Squared norms of the `q = 0` and `q = 1` halves.
    fn z_weights(&self, q: usize) -> (f64, f64) {
        let m = 1usize << q;
        let (mut w0, mut w1) = (0.0, 0.0);
        for (i, a) in self.amps.iter().enumerate() {
            if i & m != 0 {
                w1 += a.norm_sqr();
            } else {
                w0 += a.norm_sqr();
            }
        }
        (w0, w1)
    }

    /// Projects qubit `q` onto `bit` and renormalizes by the branch probability.
    fn project(&mut self, q: usize, bit: bool, prob: f64) {
        let m = 1usize << q;
        let scale = 1.0 / prob.sqrt();
        for (i, a) in self.amps.iter_mut().enumerate() {
            if ((i & m) != 0) == bit {
                *a *= scale;
            } else {
                *a = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Expectation of a Pauli string (ignoring phase), for tests and diagnostics.
    pub fn expectation(&self, p: PauliMask) -> f64 {
        let mut tmp = self.clone();
        tmp.apply_pauli(p);
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, b) in self.amps.iter().zip(&tmp.amps) {
            acc += a.conj() * b;
        }
        // Y = iXZ: apply_pauli applies X/Y/Z letters directly, so acc is real
        acc.re
    }
}

/// Outcome probabilities `(p0, p1)` of a `basis` measurement, after rotating
/// the state into the Z frame.
fn branch_probs(s: &mut StateVector, basis: Pauli, q: usize) -> (f64, f64) {
    s.to_z_frame(basis, q);
    s.z_weights(q)
}

fn finish_measure(s: &mut StateVector, basis: Pauli, q: usize, bit: bool, prob: f64) {
    s.project(q, bit, prob);
    s.from_z_frame(basis, q);
}

fn finish_prep(s: &mut StateVector, basis: Pauli, q: usize, bit: bool, prob: f64) {
    s.project(q, bit, prob);
    if bit {
        s.apply_gate1(Gate1::X, q);
    }
    s.from_z_frame(basis, q);
}

pub(crate) fn apply_unitary(s: &mut StateVector, op: &Op) {
    match *op {
        Op::Gate1 { gate, qubit } => s.apply_gate1(gate, qubit),
        Op::Gate2 { gate, a, b } => s.apply_gate2(gate, a, b),
        _ => {}
    }
}

#[inline]
fn get_bit(bits: u128, r: usize) -> bool {
    (bits >> r) & 1 == 1
}

/// Picks an outcome; a branch below the probability guard is never chosen.
fn sample_outcome<R: Rng + ?Sized>(p0: f64, p1: f64, rng: &mut R) -> (bool, f64) {
    if p1 < MIN_BRANCH_PROB {
        return (false, p0);
    }
    if p0 < MIN_BRANCH_PROB {
        return (true, p1);
    }
    let bit = rng.gen::<f64>() < p1;
    (bit, if bit { p1 } else { p0 })
}

/// One trajectory with every fault fixed in advance; `faults` is sorted by op.
pub(crate) fn trajectory<R: Rng + ?Sized>(
    c: &Circuit,
    faults: &[(usize, PauliMask)],
    skip_feedback_after: Option<usize>,
    rng: &mut R,
) -> (u128, bool) {
    let mut s = StateVector::zero_state(c.n_qubits);
    let mut bits = 0u128;
    let mut accepted = true;
    let mut fi = 0;
    for (i, op) in c.ops.iter().enumerate() {
        let mut fault = None;
        while fi < faults.len() && faults[fi].0 == i {
            let m = fault.get_or_insert(PauliMask::IDENTITY);
            *m = m.mul(faults[fi].1);
            fi += 1;
        }
        match *op {
            Op::Prep { basis, qubit } => {
                let (p0, p1) = branch_probs(&mut s, Pauli::Z, qubit);
                let (bit, p) = sample_outcome(p0, p1, rng);
                finish_prep(&mut s, basis, qubit, bit, p);
                if let Some(f) = fault {
                    s.apply_pauli(f);
                }
            }
            Op::Gate1 { .. } | Op::Gate2 { .. } | Op::Inject { .. } => {
                apply_unitary(&mut s, op);
                if let Some(f) = fault {
                    s.apply_pauli(f);
                }
            }
            Op::Measure {
                basis,
                qubit,
                record,
            } => {
                if let Some(f) = fault {
                    s.apply_pauli(f);
                }
                let (p0, p1) = branch_probs(&mut s, basis, qubit);
                let (bit, p) = sample_outcome(p0, p1, rng);
                finish_measure(&mut s, basis, qubit, bit, p);
                if bit {
                    bits |= 1u128 << record;
                }
            }
            Op::Feedback {
                pauli,
                qubit,
                record,
                value,
            } => {
                if skip_feedback_after.is_some_and(|k| i > k) {
                    continue;
                }
                if get_bit(bits, record) == value {
                    s.apply_pauli(PauliMask::single(qubit, pauli));
                }
            }
            Op::PostSelect { record, value } => {
                if get_bit(bits, record) != value {
                    accepted = false;
                }
            }
        }
    }
    (bits, accepted)
}

pub(crate) struct ExactAcc<W> {
    pub num: W,
    pub den: W,
}

pub(crate) struct Dfs<'a, W: Weight> {
    pub circuit: &'a Circuit,
    pub factors: &'a [Option<LocFactors>],
    pub obs: &'a dyn Observable,
    pub budget: u64,
    pub used: u64,
    pub acc: ExactAcc<W>,
    pub born_check: bool,
}

impl<W: Weight> Dfs<'_, W> {
    fn charge(&mut self) -> Result<(), SimError> {
        self.used += 1;
        if self.used > self.budget {
            return Err(SimError::BudgetExceeded {
                budget: self.budget,
            });
        }
        Ok(())
    }

    /// Branches over the fault factors of op `i`, continuing each branch with
    /// `k`.
    fn with_noise(
        &mut self,
        i: usize,
        s: StateVector,
        bits: u128,
        w: W,
        k: &mut dyn FnMut(&mut Self, StateVector, u128, W) -> Result<(), SimError>,
    ) -> Result<(), SimError> {
        let Some(f) = self.factors[i].as_ref() else {
            return k(self, s, bits, w);
        };
        let terms = f.terms.clone();
        let identity = f.identity;
        for (mask, lin) in terms {
            if lin.is_zero() {
                continue;
            }
            self.charge()?;
            let mut s2 = s.clone();
            s2.apply_pauli(mask);
            k(self, s2, bits, w.mul_lin(lin))?;
        }
        if !identity.is_zero() {
            self.charge()?;
            k(self, s, bits, w.mul_lin(identity))?;
        }
        Ok(())
    }

    pub fn run(&mut self, i: usize, s: StateVector, bits: u128, w: W) -> Result<(), SimError> {
        let c = self.circuit;
        if i == c.ops.len() {
            let v = self.obs.eval(bits);
            self.acc.num.add_scaled(&w, v);
            self.acc.den.add_assign(&w);
            return Ok(());
        }
        match c.ops[i] {
            Op::Prep { basis, qubit } => {
                let mut s = s;
                let (p0, p1) = branch_probs(&mut s, Pauli::Z, qubit);
                self.check_born(p0 + p1)?;
                for (bit, p) in [(false, p0), (true, p1)] {
                    if p < MIN_BRANCH_PROB {
                        continue;
                    }
                    self.charge()?;
                    let mut s2 = s.clone();
                    finish_prep(&mut s2, basis, qubit, bit, p);
                    let w2 = if p0 < MIN_BRANCH_PROB || p1 < MIN_BRANCH_PROB {
                        w.clone()
                    } else {
                        w.mul_scalar(p)
                    };
                    self.with_noise(i, s2, bits, w2, &mut |me, s, b, w| me.run(i + 1, s, b, w))?;
                }
                Ok(())
            }
            Op::Gate1 { .. } | Op::Gate2 { .. } | Op::Inject { .. } => {
                let mut s = s;
                apply_unitary(&mut s, &c.ops[i]);
                self.with_noise(i, s, bits, w, &mut |me, s, b, w| me.run(i + 1, s, b, w))
            }
            Op::Measure {
                basis,
                qubit,
                record,
            } => self.with_noise(i, s, bits, w, &mut |me, mut s, b, w| {
                let (p0, p1) = branch_probs(&mut s, basis, qubit);
                me.check_born(p0 + p1)?;
                let single = p0 < MIN_BRANCH_PROB || p1 < MIN_BRANCH_PROB;
                for (bit, p) in [(false, p0), (true, p1)] {
                    if p < MIN_BRANCH_PROB {
                        continue;
                    }
                    me.charge()?;
                    let mut s2 = s.clone();
                    finish_measure(&mut s2, basis, qubit, bit, p);
                    let b2 = if bit { b | (1u128 << record) } else { b };
                    let w2 = if single { w.clone() } else { w.mul_scalar(p) };
                    me.run(i + 1, s2, b2, w2)?;
                }
                Ok(())
            }),
            Op::Feedback {
                pauli,
                qubit,
                record,
                value,
            } => {
                let mut s = s;
                if get_bit(bits, record) == value {
                    s.apply_pauli(PauliMask::single(qubit, pauli));
                }
                self.run(i + 1, s, bits, w)
            }
            Op::PostSelect { record, value } => {
                if get_bit(bits, record) != value {
                    return Ok(());
                }
                self.run(i + 1, s, bits, w)
            }
        }
    }

    fn check_born(&self, total: f64) -> Result<(), SimError> {
        if self.born_check && (total - 1.0).abs() > 1e-12 {
            return Err(SimError::Normalization(total));
        }
        Ok(())
    }
}

/// Exact outcome distribution of a noiseless circuit, merged by record
/// string and sorted by it. `skip_feedback_after` removes feedback ops with
/// a larger index.
pub(crate) fn outcome_distribution(
    c: &Circuit,
    skip_feedback_after: Option<usize>,
    budget: u64,
) -> Result<Vec<(u128, f64)>, SimError> {
    let mut out = std::collections::HashMap::new();
    let mut used = 0u64;
    fn go(
        c: &Circuit,
        skip: Option<usize>,
        i: usize,
        mut s: StateVector,
        bits: u128,
        w: f64,
        out: &mut std::collections::HashMap<u128, f64>,
        used: &mut u64,
        budget: u64,
    ) -> Result<(), SimError> {
        let mut i = i;
        while i < c.ops.len() {
            match c.ops[i] {
                Op::Prep { basis, qubit } => {
                    let (p0, p1) = branch_probs(&mut s, Pauli::Z, qubit);
                    if p0 >= MIN_BRANCH_PROB && p1 >= MIN_BRANCH_PROB {
                        for (bit, p) in [(false, p0), (true, p1)] {
                            *used += 1;
                            if *used > budget {
                                return Err(SimError::BudgetExceeded { budget });
                            }
                            let mut s2 = s.clone();
                            finish_prep(&mut s2, basis, qubit, bit, p);
                            go(c, skip, i + 1, s2, bits, w * p, out, used, budget)?;
                        }
                        return Ok(());
                    }
                    let bit = p1 >= MIN_BRANCH_PROB;
                    finish_prep(&mut s, basis, qubit, bit, if bit { p1 } else { p0 });
                }
                Op::Measure {
                    basis,
                    qubit,
                    record,
                } => {
                    let (p0, p1) = branch_probs(&mut s, basis, qubit);
                    if p0 >= MIN_BRANCH_PROB && p1 >= MIN_BRANCH_PROB {
                        for (bit, p) in [(false, p0), (true, p1)] {
                            *used += 1;
                            if *used > budget {
                                return Err(SimError::BudgetExceeded { budget });
                            }
                            let mut s2 = s.clone();
                            finish_measure(&mut s2, basis, qubit, bit, p);
                            let b2 = if bit { bits | (1u128 << record) } else { bits };
                            go(c, skip, i + 1, s2, b2, w * p, out, used, budget)?;
                        }
                        return Ok(());
                    }
                    let bit = p1 >= MIN_BRANCH_PROB;
                    finish_measure(&mut s, basis, qubit, bit, if bit { p1 } else { p0 });
                    if bit {
                        return go(c, skip, i + 1, s, bits | (1u128 << record), w, out, used, budget);
                    }
                }
                Op::Feedback {
                    pauli,
                    qubit,
                    record,
                    value,
                } => {
                    if !skip.is_some_and(|k| i > k) && get_bit(bits, record) == value {
                        s.apply_pauli(PauliMask::single(qubit, pauli));
                    }
                }
                ref op => apply_unitary(&mut s, op),
            }
            i += 1;
        }
        *out.entry(bits).or_insert(0.0) += w;
        Ok(())
    }
    go(
        c,
        skip_feedback_after,
        0,
        StateVector::zero_state(c.n_qubits),
        0,
        1.0,
        &mut out,
        &mut used,
        budget,
    )?;
    let mut v: Vec<(u128, f64)> = out.into_iter().collect();
    v.sort_by_key(|e| e.0);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn single_qubit_gates() {
        let mut s = StateVector::zero_state(1);
        s.apply_gate1(Gate1::H, 0);
        assert!(close(s.expectation(PauliMask::single(0, Pauli::X)), 1.0));
        s.apply_gate1(Gate1::S, 0);
        assert!(close(s.expectation(PauliMask::single(0, Pauli::Y)), 1.0));
        let mut s = StateVector::zero_state(1);
        s.apply_gate1(Gate1::Ry(std::f64::consts::FRAC_PI_3), 0);
        assert!(close(s.expectation(PauliMask::single(0, Pauli::Z)), 0.5));
        assert!(close(s.expectation(PauliMask::single(0, Pauli::X)), 0.75f64.sqrt()));
    }

    #[test]
    fn bell_pair_correlations() {
        let mut s = StateVector::zero_state(2);
        s.apply_gate1(Gate1::H, 0);
        s.apply_gate2(Gate2::Cnot, 0, 1);
        let zz = PauliMask::single(0, Pauli::Z).mul(PauliMask::single(1, Pauli::Z));
        let xx = PauliMask::single(0, Pauli::X).mul(PauliMask::single(1, Pauli::X));
        assert!(close(s.expectation(zz), 1.0));
        assert!(close(s.expectation(xx), 1.0));
        assert!(close(s.prob_one(0), 0.5));
    }

    #[test]
    fn y_basis_round_trip() {
        let mut s = StateVector::zero_state(1);
        s.apply_gate1(Gate1::H, 0);
        s.apply_gate1(Gate1::S, 0);
        let (p0, p1) = branch_probs(&mut s, Pauli::Y, 0);
        assert!(close(p0, 1.0) && close(p1, 0.0));
        finish_measure(&mut s, Pauli::Y, 0, false, p0);
        assert!(close(s.expectation(PauliMask::single(0, Pauli::Y)), 1.0));
    }
}
