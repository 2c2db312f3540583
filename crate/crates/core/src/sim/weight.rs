//! Branch weights for exact enumeration: plain probabilities, or polynomials
//! in the noise factor `r`.

use crate::circuit::{Circuit, LocationPolicy};
use crate::noise::BoundNoise;
use crate::pauli::PauliMask;

/// Linear factor `c0 + c1·r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lin {
    pub c0: f64,
    pub c1: f64,
}

impl Lin {
    pub const ONE: Lin = Lin { c0: 1.0, c1: 0.0 };

    pub fn constant(c0: f64) -> Self {
        Lin { c0, c1: 0.0 }
    }

    pub fn is_zero(self) -> bool {
        self.c0 == 0.0 && self.c1 == 0.0
    }
}

pub trait Weight: Clone + Send + Sync {
    fn zero(len: usize) -> Self;
    fn one(len: usize) -> Self;
    fn mul_lin(&self, f: Lin) -> Self;
    fn mul_scalar(&self, x: f64) -> Self;
    fn add_assign(&mut self, other: &Self);
    fn add_scaled(&mut self, other: &Self, x: f64);
}

impl Weight for f64 {
    fn zero(_: usize) -> Self {
        0.0
    }
    fn one(_: usize) -> Self {
        1.0
    }
    fn mul_lin(&self, f: Lin) -> Self {
        debug_assert!(f.c1 == 0.0, "scalar weights take constant factors");
        self * f.c0
    }
    fn mul_scalar(&self, x: f64) -> Self {
        self * x
    }
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }
    fn add_scaled(&mut self, other: &Self, x: f64) {
        *self += other * x;
    }
}

/// Dense polynomial coefficients, lowest degree first; length fixed up front.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn eval(&self, r: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * r + c)
    }
}

impl Weight for Poly {
    fn zero(len: usize) -> Self {
        Poly(vec![0.0; len])
    }
    fn one(len: usize) -> Self {
        let mut v = vec![0.0; len];
        v[0] = 1.0;
        Poly(v)
    }
    fn mul_lin(&self, f: Lin) -> Self {
        let n = self.0.len();
        let mut out = vec![0.0; n];
        for k in 0..n {
            out[k] = f.c0 * self.0[k];
            if k > 0 {
                out[k] += f.c1 * self.0[k - 1];
            }
        }
        debug_assert!(f.c1 == 0.0 || self.0[n - 1] == 0.0, "polynomial overflow");
        Poly(out)
    }
    fn mul_scalar(&self, x: f64) -> Self {
        Poly(self.0.iter().map(|c| c * x).collect())
    }
    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }
    fn add_scaled(&mut self, other: &Self, x: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b * x;
        }
    }
}

/// Branch factors of one noisy location.
#[derive(Clone, Debug, PartialEq)]
pub struct LocFactors {
    pub identity: Lin,
    pub terms: Vec<(PauliMask, Lin)>,
}

impl LocFactors {
    pub fn forced(mask: PauliMask) -> Self {
        LocFactors {
            identity: Lin::constant(0.0),
            terms: vec![(mask, Lin::ONE)],
        }
    }
}

/// Per-op factors. `variable` selects the locations whose base
/// probabilities carry the polynomial variable; with `None` every channel is
/// a constant evaluated at the bound `r`.
pub fn factor_table(
    c: &Circuit,
    bound: &BoundNoise,
    variable: Option<LocationPolicy>,
    forced: &[(usize, PauliMask)],
) -> Vec<Option<LocFactors>> {
    let in_policy: Vec<bool> = match variable {
        Some(policy) => {
            let mut v = vec![false; c.ops.len()];
            for l in c.fault_locations(policy) {
                v[l.op] = true;
            }
            v
        }
        None => vec![false; c.ops.len()],
    };
    let mut table: Vec<Option<LocFactors>> = bound
        .channels
        .iter()
        .enumerate()
        .map(|(i, ch)| {
            let ch = ch.as_ref()?;
            let total = ch.total_base();
            if ch.scaled && in_policy[i] {
                Some(LocFactors {
                    identity: Lin { c0: 1.0, c1: -total },
                    terms: ch.terms.iter().map(|&(m, p)| (m, Lin { c0: 0.0, c1: p })).collect(),
                })
            } else {
                let f = ch.factor(bound.r);
                Some(LocFactors {
                    identity: Lin::constant(1.0 - total * f),
                    terms: ch.terms.iter().map(|&(m, p)| (m, Lin::constant(p * f))).collect(),
                })
            }
        })
        .collect();
    for &(op, mask) in forced {
        table[op] = Some(LocFactors::forced(mask));
    }
    table
}

/// Number of locations whose factors depend on `r`.
pub fn variable_count(table: &[Option<LocFactors>]) -> usize {
    table
        .iter()
        .flatten()
        .filter(|f| f.identity.c1 != 0.0 || f.terms.iter().any(|(_, l)| l.c1 != 0.0))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_linear_products() {
        let p = Poly::one(3).mul_lin(Lin { c0: 1.0, c1: -0.1 }).mul_lin(Lin { c0: 0.0, c1: 0.2 });
        assert_eq!(p.0, vec![0.0, 0.2, -0.020000000000000004]);
        assert!((p.eval(2.0) - (1.0 - 0.2) * 0.4).abs() < 1e-15);
    }
}
