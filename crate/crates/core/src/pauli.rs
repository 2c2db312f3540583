//! Multi-qubit Pauli operators with exact `i`-power phase tracking.
//!
//! A [`PauliTerm`] is `i^phase · ⊗_q σ(x_q, z_q)` where `σ(1,0)=X`, `σ(1,1)=Y`,
//! `σ(0,1)=Z`. The masks are stored as 64-bit words so terms of any width work;
//! every circuit in this crate fits in a single word.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PauliError {
    #[error("qubit count mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error("qubit {qubit} out of range for {n_qubits}-qubit term")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error("invalid Pauli text {text:?}: {reason}")]
    Parse { text: String, reason: String },
}

/// Single-qubit Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const NON_IDENTITY: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn x_bit(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    pub fn z_bit(self) -> bool {
        matches!(self, Pauli::Z | Pauli::Y)
    }

    pub fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_letter(c: char) -> Option<Pauli> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    /// True when the two letters anticommute.
    pub fn anticommutes(self, other: Pauli) -> bool {
        (self.x_bit() & other.z_bit()) ^ (self.z_bit() & other.x_bit())
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct PauliTerm {
    phase: u8,
    x: Vec<u64>,
    z: Vec<u64>,
    n_qubits: usize,
}

fn words_for(n: usize) -> usize {
    n.div_ceil(64).max(1)
}

impl PauliTerm {
    pub fn identity(n_qubits: usize) -> Self {
        let w = words_for(n_qubits);
        PauliTerm {
            phase: 0,
            x: vec![0; w],
            z: vec![0; w],
            n_qubits,
        }
    }

    /// A single-qubit Pauli placed on `qubit` of an `n_qubits` register.
    pub fn single(n_qubits: usize, qubit: usize, p: Pauli) -> Result<Self, PauliError> {
        let mut t = Self::identity(n_qubits);
        t.set(qubit, p)?;
        Ok(t)
    }

    /// Builds a phase-free term from `(qubit, letter)` pairs.
    pub fn from_sparse(
        n_qubits: usize,
        entries: impl IntoIterator<Item = (usize, Pauli)>,
    ) -> Result<Self, PauliError> {
        let mut t = Self::identity(n_qubits);
        for (q, p) in entries {
            t.set(q, p)?;
        }
        Ok(t)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn phase_exp(&self) -> u8 {
        self.phase
    }

    pub fn with_phase(mut self, phase_exp: u8) -> Self {
        self.phase = phase_exp % 4;
        self
    }

    /// Drops the global phase.
    pub fn unsigned(&self) -> Self {
        self.clone().with_phase(0)
    }

    pub fn is_identity(&self) -> bool {
        self.phase == 0 && self.is_identity_up_to_phase()
    }

    pub fn is_identity_up_to_phase(&self) -> bool {
        self.x.iter().chain(self.z.iter()).all(|&w| w == 0)
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        if qubit >= self.n_qubits {
            return Pauli::I;
        }
        let (w, b) = (qubit / 64, qubit % 64);
        Pauli::from_bits((self.x[w] >> b) & 1 == 1, (self.z[w] >> b) & 1 == 1)
    }

    pub fn set(&mut self, qubit: usize, p: Pauli) -> Result<(), PauliError> {
        if qubit >= self.n_qubits {
            return Err(PauliError::QubitOutOfRange {
                qubit,
                n_qubits: self.n_qubits,
            });
        }
        let (w, b) = (qubit / 64, qubit % 64);
        let mask = 1u64 << b;
        self.x[w] = (self.x[w] & !mask) | if p.x_bit() { mask } else { 0 };
        self.z[w] = (self.z[w] & !mask) | if p.z_bit() { mask } else { 0 };
        Ok(())
    }

    pub fn x_words(&self) -> &[u64] {
        &self.x
    }

    pub fn z_words(&self) -> &[u64] {
        &self.z
    }

    /// Qubits where the term acts non-trivially, with their letters.
    pub fn support(&self) -> impl Iterator<Item = (usize, Pauli)> + '_ {
        (0..self.n_qubits)
            .map(move |q| (q, self.get(q)))
            .filter(|(_, p)| *p != Pauli::I)
    }

    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(x, z)| (x | z).count_ones() as usize)
            .sum()
    }

    fn check_dims(&self, other: &Self) -> Result<(), PauliError> {
        if self.n_qubits != other.n_qubits {
            return Err(PauliError::Dimension {
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        Ok(())
    }

    /// Parity of the symplectic product; 1 means the terms anticommute.
    fn symplectic(&self, other: &Self) -> u32 {
        let mut acc = 0u32;
        for w in 0..self.x.len() {
            acc += ((self.x[w] & other.z[w]) ^ (self.z[w] & other.x[w])).count_ones();
        }
        acc & 1
    }

    pub fn commutes(&self, other: &Self) -> Result<bool, PauliError> {
        self.check_dims(other)?;
        Ok(self.symplectic(other) == 0)
    }

    /// The product `self · other`, phase included.
    pub fn mul(&self, other: &Self) -> Result<Self, PauliError> {
        self.check_dims(other)?;
        let mut plus = 0u32;
        let mut minus = 0u32;
        let mut x = Vec::with_capacity(self.x.len());
        let mut z = Vec::with_capacity(self.x.len());
        for w in 0..self.x.len() {
            let (x1, z1, x2, z2) = (self.x[w], self.z[w], other.x[w], other.z[w]);
            let (ax, ay, az) = (x1 & !z1, x1 & z1, !x1 & z1);
            let (bx, by, bz) = (x2 & !z2, x2 & z2, !x2 & z2);
            // cyclic order X→Y→Z→X contributes +i, the reverse −i
            plus += ((ax & by) | (ay & bz) | (az & bx)).count_ones();
            minus += ((ax & bz) | (ay & bx) | (az & by)).count_ones();
            x.push(x1 ^ x2);
            z.push(z1 ^ z2);
        }
        let phase = (self.phase as u32 + other.phase as u32 + plus + 3 * minus) % 4;
        Ok(PauliTerm {
            phase: phase as u8,
            x,
            z,
            n_qubits: self.n_qubits,
        })
    }

    /// Parses text such as `+iX0Z3` onto a register of fixed width.
    pub fn parse_with_qubits(text: &str, n_qubits: usize) -> Result<Self, PauliError> {
        let parsed = parse_entries(text)?;
        let mut t = Self::identity(n_qubits);
        for (q, p) in parsed.entries {
            if t.get(q) != Pauli::I {
                return Err(PauliError::Parse {
                    text: text.into(),
                    reason: format!("qubit {q} listed twice"),
                });
            }
            t.set(q, p)?;
        }
        Ok(t.with_phase(parsed.phase))
    }
}

struct ParsedEntries {
    phase: u8,
    entries: Vec<(usize, Pauli)>,
}

fn parse_entries(text: &str) -> Result<ParsedEntries, PauliError> {
    let err = |reason: &str| PauliError::Parse {
        text: text.into(),
        reason: reason.into(),
    };
    let s = text.trim();
    let (neg, rest) = match s.as_bytes().first() {
        Some(b'+') => (false, &s[1..]),
        Some(b'-') => (true, &s[1..]),
        _ => (false, s),
    };
    let (imag, rest) = match rest.strip_prefix('i') {
        Some(r) => (true, r),
        None => (false, rest),
    };
    let phase = match (neg, imag) {
        (false, false) => 0,
        (false, true) => 1,
        (true, false) => 2,
        (true, true) => 3,
    };
    if rest == "I" || rest.is_empty() {
        if rest.is_empty() {
            return Err(err("empty operator"));
        }
        return Ok(ParsedEntries {
            phase,
            entries: vec![],
        });
    }
    let mut entries = Vec::new();
    let mut chars = rest.char_indices().peekable();
    while let Some((_, c)) = chars.next() {
        let p = Pauli::from_letter(c).ok_or_else(|| err("expected X, Y, Z or I"))?;
        let mut digits = String::new();
        while let Some(&(_, d)) = chars.peek() {
            if d.is_ascii_digit() {
                digits.push(d);
                chars.next();
            } else {
                break;
            }
        }
        if digits.is_empty() {
            return Err(err("missing qubit index"));
        }
        let q: usize = digits.parse().map_err(|_| err("bad qubit index"))?;
        if p != Pauli::I {
            entries.push((q, p));
        }
    }
    Ok(ParsedEntries { phase, entries })
}

impl FromStr for PauliTerm {
    type Err = PauliError;

    /// Parses with the register width set to one past the highest index.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parsed = parse_entries(s)?;
        let n = parsed.entries.iter().map(|(q, _)| q + 1).max().unwrap_or(1);
        PauliTerm::parse_with_qubits(s, n)
    }
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = ["+", "+i", "-", "-i"][self.phase as usize];
        write!(f, "{prefix}")?;
        if self.is_identity_up_to_phase() {
            return write!(f, "I");
        }
        for (q, p) in self.support() {
            write!(f, "{p}{q}")?;
        }
        Ok(())
    }
}

/// Phase-free Pauli on up to 64 qubits, packed as two masks. This is the
/// working representation of the simulators and the decoder.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliMask {
    pub x: u64,
    pub z: u64,
}

impl PauliMask {
    pub const IDENTITY: PauliMask = PauliMask { x: 0, z: 0 };

    pub fn single(qubit: usize, p: Pauli) -> Self {
        PauliMask {
            x: (p.x_bit() as u64) << qubit,
            z: (p.z_bit() as u64) << qubit,
        }
    }

    pub fn is_identity(self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn get(self, qubit: usize) -> Pauli {
        Pauli::from_bits((self.x >> qubit) & 1 == 1, (self.z >> qubit) & 1 == 1)
    }

    /// Product up to phase.
    pub fn mul(self, other: Self) -> Self {
        PauliMask {
            x: self.x ^ other.x,
            z: self.z ^ other.z,
        }
    }

    pub fn anticommutes(self, other: Self) -> bool {
        ((self.x & other.z) ^ (self.z & other.x)).count_ones() & 1 == 1
    }

    pub fn weight(self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn from_term(t: &PauliTerm) -> Result<Self, PauliError> {
        if t.n_qubits() > 64 {
            return Err(PauliError::QubitOutOfRange {
                qubit: t.n_qubits() - 1,
                n_qubits: 64,
            });
        }
        Ok(PauliMask {
            x: t.x_words()[0],
            z: t.z_words()[0],
        })
    }

    pub fn to_term(self, n_qubits: usize) -> PauliTerm {
        let mut t = PauliTerm::identity(n_qubits);
        for q in 0..n_qubits.min(64) {
            let p = self.get(q);
            if p != Pauli::I {
                t.set(q, p).expect("qubit in range");
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(s: &str, n: usize) -> PauliTerm {
        PauliTerm::parse_with_qubits(s, n).unwrap()
    }

    #[test]
    fn identity_times_z() {
        assert_eq!(t("I", 2).mul(&t("Z0", 2)).unwrap(), t("Z0", 2));
    }

    #[test]
    fn x_times_y_is_i_z() {
        let p = t("X0", 1).mul(&t("Y0", 1)).unwrap();
        assert_eq!(p, t("+iZ0", 1));
        assert_eq!(p.to_string(), "+iZ0");
    }

    #[test]
    fn involution() {
        let a = t("X0X1", 2);
        assert!(a.mul(&a).unwrap().is_identity());
    }

    #[test]
    fn commutation_examples() {
        assert!(!t("X0", 1).commutes(&t("Z0", 1)).unwrap());
        assert!(t("X0X1", 2).commutes(&t("Z0Z1", 2)).unwrap());
        assert!(t("I", 3).commutes(&t("X0Y1Z2", 3)).unwrap());
    }

    #[test]
    fn weights() {
        assert_eq!(t("I", 3).weight(), 0);
        assert_eq!(t("X0Z2", 3).weight(), 2);
        assert_eq!(t("Y1", 3).weight(), 1);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            t("X0", 1).mul(&t("X0", 2)),
            Err(PauliError::Dimension { .. })
        ));
        assert!(t("X0", 1).commutes(&t("X0", 2)).is_err());
    }

    #[test]
    fn text_round_trip() {
        for s in ["+iX0Z3", "-Y2", "-iI", "+I", "+X0Y1Z2"] {
            let p: PauliTerm = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("Q1".parse::<PauliTerm>().is_err());
        assert!("X".parse::<PauliTerm>().is_err());
    }

    #[test]
    fn wide_terms() {
        let a = PauliTerm::single(130, 129, Pauli::X).unwrap();
        let b = PauliTerm::single(130, 129, Pauli::Z).unwrap();
        assert!(!a.commutes(&b).unwrap());
        assert_eq!(a.mul(&b).unwrap().phase_exp(), 3);
    }

    fn arb_term(n: usize) -> impl Strategy<Value = PauliTerm> {
        (0u8..4, proptest::collection::vec(0u8..4, n)).prop_map(move |(ph, letters)| {
            let mut t = PauliTerm::identity(n);
            for (q, l) in letters.into_iter().enumerate() {
                t.set(q, [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][l as usize])
                    .unwrap();
            }
            t.with_phase(ph)
        })
    }

    fn arb_triple() -> impl Strategy<Value = (PauliTerm, PauliTerm, PauliTerm)> {
        (1usize..=8).prop_flat_map(|n| (arb_term(n), arb_term(n), arb_term(n)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn associative((a, b, c) in arb_triple()) {
            let left = a.mul(&b).unwrap().mul(&c).unwrap();
            let right = a.mul(&b.mul(&c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }

        #[test]
        fn swap_phase_matches_commutation((a, b, _c) in arb_triple()) {
            let ab = a.mul(&b).unwrap();
            let ba = b.mul(&a).unwrap();
            let anti = !a.commutes(&b).unwrap();
            let expected = if anti { (ba.phase_exp() + 2) % 4 } else { ba.phase_exp() };
            prop_assert_eq!(ab.phase_exp(), expected);
            prop_assert_eq!(ab.unsigned(), ba.unsigned());
            prop_assert_eq!(a.commutes(&b).unwrap(), ab == ba);
            prop_assert!(ab.weight() <= a.weight() + b.weight());
        }

        #[test]
        fn display_parse_round_trip(a in (1usize..=8).prop_flat_map(arb_term)) {
            let back = PauliTerm::parse_with_qubits(&a.to_string(), a.n_qubits()).unwrap();
            prop_assert_eq!(back, a);
        }
    }
}
