//! Polynomial zero-noise extrapolation with a distance-aware fitting family.
//!
//! With effective distance d the fit is c + Σ a_j r^j over the K powers
//! j = ⌈d/2⌉, …, ⌈d/2⌉+K−1, so the lowest orders that error correction
//! already removes are not fitted. The extrapolated value is c = Σ b_k y_k.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::format_sig12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZneError {
    #[error("need {want} noise factors for K = {k}, got {got}")]
    PointCount { want: usize, got: usize, k: usize },
    #[error("noise factors must be positive and finite, got {0}")]
    BadFactor(f64),
    #[error("degenerate design: noise factors {0:?} give a singular system")]
    Degenerate(Vec<f64>),
    #[error("effective distance must be at least 1")]
    BadDistance,
    #[error("the point set must contain r = 1")]
    MissingBase,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub r: f64,
    pub value: f64,
    pub stderr: f64,
    pub shots: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZneResult {
    pub value: f64,
    pub coeffs: Vec<f64>,
    pub bias: f64,
    pub overhead: f64,
    pub d: usize,
    pub k: usize,
    pub rs: Vec<f64>,
}

/// Leading power ⌈d/2⌉ of the noise expansion.
pub fn leading_order(d: usize) -> usize {
    d.div_ceil(2)
}

/// Powers of r fitted for distance `d` and order `k`: 0, then k powers from
/// ⌈d/2⌉ upward.
pub fn fit_powers(d: usize, k: usize) -> Vec<i32> {
    let e = leading_order(d) as i32;
    std::iter::once(0).chain((0..k as i32).map(|j| e + j)).collect()
}

/// Design matrix with rows (1, r_i^e, r_i^(e+1), …).
pub fn design_matrix(rs: &[f64], d: usize, k: usize) -> DMatrix<f64> {
    let powers = fit_powers(d, k);
    DMatrix::from_fn(rs.len(), powers.len(), |i, j| rs[i].powi(powers[j]))
}

/// Coefficients b with Σ b_i y_i equal to the fitted constant term: the
/// first row of V⁻¹, found by an LU solve of Vᵀ b = e₀.
pub fn extrap_coeffs(rs: &[f64], d: usize, k: usize) -> Result<Vec<f64>, ZneError> {
    if d == 0 {
        return Err(ZneError::BadDistance);
    }
    if rs.len() != k + 1 {
        return Err(ZneError::PointCount {
            want: k + 1,
            got: rs.len(),
            k,
        });
    }
    if let Some(&r) = rs.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(ZneError::BadFactor(r));
    }
    for (i, a) in rs.iter().enumerate() {
        if rs[..i].contains(a) {
            return Err(ZneError::Degenerate(rs.to_vec()));
        }
    }
    let vt = design_matrix(rs, d, k).transpose();
    let mut e0 = DVector::zeros(k + 1);
    e0[0] = 1.0;
    let b = vt.lu().solve(&e0).ok_or_else(|| ZneError::Degenerate(rs.to_vec()))?;
    if b.iter().any(|x| !x.is_finite()) {
        return Err(ZneError::Degenerate(rs.to_vec()));
    }
    Ok(b.iter().copied().collect())
}

/// Extrapolated value from K+1 points, one of them at r = 1.
pub fn extrapolate(points: &[DataPoint], d: usize, k: usize) -> Result<f64, ZneError> {
    if !points.iter().any(|p| p.r == 1.0) {
        return Err(ZneError::MissingBase);
    }
    let rs: Vec<f64> = points.iter().map(|p| p.r).collect();
    let b = extrap_coeffs(&rs, d, k)?;
    Ok(b.iter().zip(points).map(|(b, p)| b * p.value).sum())
}

pub fn bias(value: f64, ideal: f64) -> f64 {
    (value - ideal).abs()
}

/// Variance ratio of the mitigated estimate to the raw one at r = 1 with the
/// same total shots, shots split in proportion to |b_k| and single-shot
/// variance 1 − ⟨O⟩² for a Pauli observable. `values[0]` is the r = 1 value.
pub fn sampling_overhead(values: &[f64], b: &[f64], n_total: f64) -> f64 {
    assert_eq!(values.len(), b.len(), "one coefficient per point");
    let l1: f64 = b.iter().map(|x| x.abs()).sum();
    let mut var_em = 0.0;
    for (&v, &bk) in values.iter().zip(b) {
        if bk == 0.0 {
            continue;
        }
        let n_k = bk.abs() / l1 * n_total;
        var_em += bk * bk * (1.0 - v * v).max(0.0) / n_k;
    }
    let var_raw = (1.0 - values[0] * values[0]).max(0.0) / n_total;
    var_em / var_raw
}

/// The same ratio with per-point single-shot variances taken from measured
/// standard errors (stderr² · shots) instead of the Pauli bound.
pub fn sampling_overhead_measured(points: &[DataPoint], b: &[f64]) -> f64 {
    let l1: f64 = b.iter().map(|x| x.abs()).sum();
    let single = |p: &DataPoint| p.stderr * p.stderr * p.shots as f64;
    let var_em: f64 = points
        .iter()
        .zip(b)
        .filter(|(_, &bk)| bk != 0.0)
        .map(|(p, &bk)| bk * bk * single(p) / (bk.abs() / l1))
        .sum();
    var_em / single(&points[0])
}

/// Full extrapolation of a point set whose first point is r = 1.
pub fn zne(points: &[DataPoint], d: usize, k: usize, ideal: f64) -> Result<ZneResult, ZneError> {
    if points.first().map(|p| p.r) != Some(1.0) {
        return Err(ZneError::MissingBase);
    }
    let rs: Vec<f64> = points.iter().map(|p| p.r).collect();
    let b = extrap_coeffs(&rs, d, k)?;
    let value = b.iter().zip(points).map(|(b, p)| b * p.value).sum();
    let values: Vec<f64> = points.iter().map(|p| p.value).collect();
    Ok(ZneResult {
        value,
        bias: bias(value, ideal),
        overhead: sampling_overhead(&values, &b, 1.0),
        coeffs: b,
        d,
        k,
        rs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub d: usize,
    pub k: usize,
    pub rs: Vec<f64>,
    pub delta: f64,
    pub eta: f64,
    pub delta0: f64,
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// δ and η for every choice of K points from the grid besides r = 1, for
/// each order in `ks`. Rows come in grid order, K ascending.
pub fn scan_delta_eta(grid: &[DataPoint], d: usize, ks: &[usize], ideal: f64) -> Result<Vec<ScanRow>, ZneError> {
    let base = *grid.iter().find(|p| p.r == 1.0).ok_or(ZneError::MissingBase)?;
    let others: Vec<DataPoint> = grid.iter().filter(|p| p.r != 1.0).copied().collect();
    let delta0 = bias(base.value, ideal);
    let mut rows = Vec::new();
    for &k in ks {
        let chunk: Vec<ScanRow> = subsets(others.len(), k)
            .par_iter()
            .map(|sub| {
                let pts: Vec<DataPoint> = std::iter::once(base).chain(sub.iter().map(|&i| others[i])).collect();
                let res = zne(&pts, d, k, ideal)?;
                Ok(ScanRow {
                    d,
                    k,
                    rs: res.rs,
                    delta: res.bias,
                    eta: res.overhead,
                    delta0,
                })
            })
            .collect::<Result<_, ZneError>>()?;
        rows.extend(chunk);
    }
    Ok(rows)
}

/// `d,K,r_subset,delta,eta,delta0`; the subset lists r₁…r_K joined by `;`.
pub fn write_scan_csv<W: Write>(w: W, rows: &[ScanRow]) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["d", "K", "r_subset", "delta", "eta", "delta0"])?;
    for row in rows {
        let subset = row.rs[1..].iter().map(|&r| format_sig12(r)).collect::<Vec<_>>().join(";");
        out.write_record([
            row.d.to_string(),
            row.k.to_string(),
            subset,
            format_sig12(row.delta),
            format_sig12(row.eta),
            format_sig12(row.delta0),
        ])?;
    }
    out.flush()
}
