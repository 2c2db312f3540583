//! Large-scale projection with a power-law logical error model: a memory
//! circuit of N logical operations, ZNE on its closed-form expectation, and
//! analytic bias bounds.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::format_sig12;
use crate::zne::{extrap_coeffs, leading_order, sampling_overhead, ZneError};

#[derive(Debug, Error)]
pub enum ScalingError {
    #[error("physical error rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("code distance must be odd and positive, got {0}")]
    BadDistance(usize),
    #[error("operation count must be at least 1")]
    BadCount,
    #[error(transparent)]
    Zne(#[from] ZneError),
    #[error("csv: {0}")]
    Io(#[from] std::io::Error),
}

pub const DEFAULT_PREFACTOR: f64 = 0.03;
pub const CALIBRATION_P: f64 = 1e-3;
pub const CALIBRATION_D: usize = 11;
pub const CALIBRATION_RATE: f64 = 2e-10;

/// P_L(p, d) = A·(p/p_th)^⌈d/2⌉, clamped to [0, 0.5].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogicalRateModel {
    pub a: f64,
    pub p_th: f64,
}

impl LogicalRateModel {
    /// Threshold fixed so that P_L(p, d) equals `rate` for the given prefactor.
    pub fn calibrated(a: f64, p: f64, d: usize, rate: f64) -> Self {
        let e = leading_order(d) as f64;
        Self {
            a,
            p_th: p * (a / rate).powf(1.0 / e),
        }
    }

    pub fn rate(&self, p: f64, d: usize) -> f64 {
        (self.a * (p / self.p_th).powi(leading_order(d) as i32)).clamp(0.0, 0.5)
    }
}

impl Default for LogicalRateModel {
    fn default() -> Self {
        Self::calibrated(DEFAULT_PREFACTOR, CALIBRATION_P, CALIBRATION_D, CALIBRATION_RATE)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemorySpec {
    pub n: f64,
    pub d: usize,
    pub p: f64,
    pub k: usize,
}

impl MemorySpec {
    pub fn validate(&self) -> Result<(), ScalingError> {
        if !(self.p.is_finite() && self.p > 0.0) {
            return Err(ScalingError::BadRate(self.p));
        }
        if self.d == 0 || self.d % 2 == 0 {
            return Err(ScalingError::BadDistance(self.d));
        }
        if !(self.n >= 1.0) {
            return Err(ScalingError::BadCount);
        }
        Ok(())
    }

    /// r_k = k^(1/⌈d/2⌉) for k = 1..K+1, so the leading-order rate grows as k.
    pub fn r_schedule(&self) -> Vec<f64> {
        let e = leading_order(self.d) as f64;
        (1..=self.k + 1).map(|k| (k as f64).powf(1.0 / e)).collect()
    }

    /// Total logical error rate N·P_L at noise factor r.
    pub fn p_tot(&self, model: &LogicalRateModel, r: f64) -> f64 {
        self.n * model.rate(r * self.p, self.d)
    }
}

/// ⟨O⟩(r) = [1 − 2P_L(rp)]^N.
pub fn memory_expectation(spec: &MemorySpec, model: &LogicalRateModel, r: f64) -> f64 {
    let pl = model.rate(r * spec.p, spec.d);
    if pl == 0.0 {
        return 1.0;
    }
    (spec.n * (-2.0 * pl).ln_1p()).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Projection {
    pub rs: Vec<f64>,
    pub values: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub mitigated: f64,
    pub delta: f64,
    pub delta0: f64,
    pub eta: f64,
}

impl Projection {
    pub fn delta_ratio(&self) -> f64 {
        self.delta / self.delta0
    }
}

/// ZNE on the analytic memory curve; the ideal value is 1.
pub fn projected_zne(spec: &MemorySpec, model: &LogicalRateModel) -> Result<Projection, ScalingError> {
    spec.validate()?;
    let rs = spec.r_schedule();
    let values: Vec<f64> = rs.iter().map(|&r| memory_expectation(spec, model, r)).collect();
    let coeffs = extrap_coeffs(&rs, spec.d, spec.k)?;
    let mitigated: f64 = coeffs.iter().zip(&values).map(|(b, y)| b * y).sum();
    Ok(Projection {
        delta: (mitigated - 1.0).abs(),
        delta0: (values[0] - 1.0).abs(),
        eta: sampling_overhead(&values, &coeffs, 1.0),
        rs,
        values,
        coeffs,
        mitigated,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BiasBounds {
    pub delta_tilde_0: f64,
    pub delta_tilde_1: f64,
}

/// δ̃₀ = e^{2P_tot(1)} − 1 and δ̃₁ = Σ|b_k|[e^{2P_tot(r_k)} − 1 − 2P_tot(r_k)]
/// for a unit-norm observable.
pub fn bias_bounds(spec: &MemorySpec, model: &LogicalRateModel, rs: &[f64], b: &[f64]) -> BiasBounds {
    let second = |x: f64| x.exp_m1() - x;
    BiasBounds {
        delta_tilde_0: (2.0 * spec.p_tot(model, 1.0)).exp_m1(),
        delta_tilde_1: rs
            .iter()
            .zip(b)
            .map(|(&r, bk)| bk.abs() * second(2.0 * spec.p_tot(model, r)))
            .sum(),
    }
}

/// δ̃₂ = 2N|Σ b_k Δ(r_k)| for a per-operation residual Δ(r) between the true
/// logical rate and its polynomial fit, identical for every operation.
pub fn delta_tilde_2(n: f64, rs: &[f64], b: &[f64], residual: impl Fn(f64) -> f64) -> f64 {
    2.0 * n * rs.iter().zip(b).map(|(&r, bk)| bk * residual(r)).sum::<f64>().abs()
}

/// Residual of the model's own rate against the fitted power family; zero
/// whenever the clamp is inactive.
pub fn model_residual(spec: &MemorySpec, model: &LogicalRateModel) -> impl Fn(f64) -> f64 {
    let (spec, model) = (*spec, *model);
    let unclamped = model.a * (spec.p / model.p_th).powi(leading_order(spec.d) as i32);
    move |r: f64| model.rate(r * spec.p, spec.d) - unclamped * r.powi(leading_order(spec.d) as i32)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub p: f64,
    pub d: usize,
    pub n: f64,
    pub k: usize,
    pub delta_ratio: f64,
    pub eta: f64,
    pub delta0: f64,
    pub delta_tilde_1: f64,
}

pub fn scaling_row(spec: &MemorySpec, model: &LogicalRateModel) -> Result<ScalingRow, ScalingError> {
    let proj = projected_zne(spec, model)?;
    let bounds = bias_bounds(spec, model, &proj.rs, &proj.coeffs);
    Ok(ScalingRow {
        p: spec.p,
        d: spec.d,
        n: spec.n,
        k: spec.k,
        delta_ratio: proj.delta_ratio(),
        eta: proj.eta,
        delta0: proj.delta0,
        delta_tilde_1: bounds.delta_tilde_1,
    })
}

/// Every combination of the given axes, in p, d, N, K order.
pub fn scaling_sweep(
    model: &LogicalRateModel,
    ps: &[f64],
    ds: &[usize],
    ns: &[f64],
    ks: &[usize],
) -> Result<Vec<ScalingRow>, ScalingError> {
    let mut specs = Vec::new();
    for &p in ps {
        for &d in ds {
            for &n in ns {
                for &k in ks {
                    specs.push(MemorySpec { n, d, p, k });
                }
            }
        }
    }
    specs.par_iter().map(|s| scaling_row(s, model)).collect()
}

pub fn write_scaling_csv<W: Write>(w: W, rows: &[ScalingRow]) -> Result<(), ScalingError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["p", "d", "N", "K", "delta_ratio", "eta", "delta0", "delta_tilde_1"])
        .map_err(std::io::Error::from)?;
    for r in rows {
        out.write_record([
            format_sig12(r.p),
            r.d.to_string(),
            format_sig12(r.n),
            r.k.to_string(),
            format_sig12(r.delta_ratio),
            format_sig12(r.eta),
            format_sig12(r.delta0),
            format_sig12(r.delta_tilde_1),
        ])
        .map_err(std::io::Error::from)?;
    }
    out.flush()?;
    Ok(())
}
