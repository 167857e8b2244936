//! Polynomial ReLU surrogate and its integer embedding into `F_P`.
//!
//! `h` is fitted on cosine values in `[-1, 1]`. On the raw dot product
//! `x = <g0, gi>` (about `q^2 cos`), the embedded polynomial is
//! `h_hat(x) = sum_j round(s h_j) q^{2(k-j)} x^j = q^{2k} s h(x / q^2) + err`,
//! so every coefficient is an integer. The common factor `s q^{2k}` scales
//! both aggregation sums and cancels in their quotient.

use nalgebra::{DMatrix, DVector};
use num_bigint::{BigInt, BigUint};
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldElement, PrimeField};

/// Relative threshold below which a fitted coefficient is treated as zero.
const ZERO_COEFF: f64 = 1e-9;
const MAX_SCALE_EXP: u32 = 18;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReluApprox {
    pub k: usize,
    /// `h_0..h_k`, lowest degree first.
    pub real_coeffs: Vec<f64>,
    pub interval: (f64, f64),
    pub nodes: usize,
    pub max_abs_error: f64,
    /// Whether the Chebyshev fallback grid was needed.
    pub chebyshev: bool,
}

impl ReluApprox {
    pub fn eval(&self, x: f64) -> f64 {
        self.real_coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + c)
    }

    /// `sum_j j |h_j|`, a Lipschitz bound on `[-1, 1]`.
    pub fn lipschitz(&self) -> f64 {
        self.real_coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| j as f64 * c.abs())
            .sum()
    }

    /// `(x, relu(x), h(x))` on an even grid.
    pub fn curve(&self, points: usize) -> Vec<(f64, f64, f64)> {
        let (lo, hi) = self.interval;
        grid(lo, hi, points)
            .into_iter()
            .map(|x| (x, x.max(0.0), self.eval(x)))
            .collect()
    }
}

fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![(lo + hi) / 2.0];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

fn chebyshev_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let mid = (lo + hi) / 2.0;
    let half = (hi - lo) / 2.0;
    (0..points)
        .map(|i| {
            let theta = std::f64::consts::PI * (2 * i + 1) as f64 / (2 * points) as f64;
            mid - half * theta.cos()
        })
        .collect()
}

fn least_squares(xs: &[f64], k: usize) -> Option<Vec<f64>> {
    let a = DMatrix::from_fn(xs.len(), k + 1, |i, j| xs[i].powi(j as i32));
    let b = DVector::from_iterator(xs.len(), xs.iter().map(|x| x.max(0.0)));
    let qr = a.qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..=k).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if max.is_nan() || max <= 0.0 || min / max < 1e-12 {
        return None;
    }
    let qtb = qr.q().transpose() * b;
    let sol = r.solve_upper_triangular(&qtb)?;
    Some(sol.iter().copied().collect())
}

/// Least-squares fit of ReLU by a degree-`k` polynomial on `nodes` even
/// points of a symmetric interval; falls back to Chebyshev points when the
/// system is ill-conditioned.
pub fn fit_relu(k: usize, interval: (f64, f64), nodes: usize) -> Result<ReluApprox> {
    let (lo, hi) = interval;
    if k < 1 {
        return Err(Error::Precondition(
            "ReLU degree k must be at least 1".into(),
        ));
    }
    if nodes < 10 * k {
        return Err(Error::Precondition(format!(
            "need at least {} nodes, got {nodes}",
            10 * k
        )));
    }
    if hi.is_nan() || hi <= 0.0 || !hi.is_finite() || (lo + hi).abs() > 1e-12 * hi {
        return Err(Error::Precondition(format!(
            "fit interval must be symmetric, got ({lo}, {hi})"
        )));
    }
    let (coeffs, chebyshev) = match least_squares(&grid(lo, hi, nodes), k) {
        Some(c) => (c, false),
        None => (
            least_squares(&chebyshev_grid(lo, hi, nodes), k).ok_or(Error::IllConditioned)?,
            true,
        ),
    };
    let mut approx = ReluApprox {
        k,
        real_coeffs: coeffs,
        interval,
        nodes,
        max_abs_error: 0.0,
        chebyshev,
    };
    // the kink at 0 is where the error usually peaks
    approx.max_abs_error = grid(lo, hi, 10 * nodes)
        .into_iter()
        .chain([0.0])
        .map(|x| (approx.eval(x) - x.max(0.0)).abs())
        .fold(0.0, f64::max);
    Ok(approx)
}

/// Integer and field coefficients of the embedded surrogate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmbeddedRelu {
    pub k: usize,
    pub q: u64,
    /// `s`, a power of ten.
    pub coeff_scale: u64,
    /// `round(s h_j)`.
    pub scaled_coeffs: Vec<i64>,
    /// `round(s h_j) q^{2(k-j)}`.
    pub int_coeffs: Vec<BigInt>,
    pub field_coeffs: Vec<FieldElement>,
}

impl EmbeddedRelu {
    /// `sum_j |round(s h_j)|`, the magnitude factor the field guards use.
    pub fn abs_sum(&self) -> BigUint {
        self.scaled_coeffs
            .iter()
            .map(|c| BigUint::from(c.unsigned_abs()))
            .sum()
    }

    /// `h_hat(x)` over the integers.
    pub fn eval_int(&self, x: &BigInt) -> BigInt {
        self.int_coeffs
            .iter()
            .rev()
            .fold(BigInt::zero(), |acc, c| acc * x + c)
    }

    /// `h_hat(x)` in the field.
    pub fn eval_field(&self, f: &PrimeField, x: &FieldElement) -> FieldElement {
        self.field_coeffs
            .iter()
            .rev()
            .fold(f.zero(), |acc, c| f.add(&f.mul(&acc, x), c))
    }

    /// `h_hat(x) / (s q^{2k})` as a real number.
    pub fn normalized(&self, value: &BigInt) -> f64 {
        let denom = BigUint::from(self.coeff_scale) * BigUint::from(self.q).pow(2 * self.k as u32);
        crate::quant::ratio_to_f64(value, &denom)
    }
}

/// Smallest power of ten giving every nonzero coefficient a relative
/// rounding error below `1e-3`.
pub fn choose_coeff_scale(coeffs: &[f64]) -> Result<u64> {
    let max = coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max);
    for e in 0..=MAX_SCALE_EXP {
        let s = 10f64.powi(e as i32);
        let ok = coeffs.iter().all(|&c| {
            if c.abs() <= ZERO_COEFF * max {
                return true;
            }
            let sc = s * c;
            let r = sc.round();
            r != 0.0 && ((r - sc) / sc).abs() < 1e-3
        });
        if ok {
            return Ok(10u64.pow(e));
        }
    }
    Err(Error::ParamsInfeasible(format!(
        "no coefficient scale up to 1e{MAX_SCALE_EXP} keeps rounding below 1e-3"
    )))
}

/// `(s, round(s h_j))`, with negligible coefficients zeroed.
pub fn scaled_coeffs(approx: &ReluApprox) -> Result<(u64, Vec<i64>)> {
    let s = choose_coeff_scale(&approx.real_coeffs)?;
    let max = approx
        .real_coeffs
        .iter()
        .map(|c| c.abs())
        .fold(0.0, f64::max);
    let scaled = approx
        .real_coeffs
        .iter()
        .map(|&c| {
            if c.abs() <= ZERO_COEFF * max {
                0
            } else {
                (c * s as f64).round() as i64
            }
        })
        .collect();
    Ok((s, scaled))
}

/// Embeds a fit made on `[-1, 1]` for dot products of `q`-quantized vectors.
pub fn embed_coeffs(approx: &ReluApprox, q: u64, f: &PrimeField) -> Result<EmbeddedRelu> {
    if (approx.interval.1 - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition(
            "embedding needs a fit on the cosine interval [-1, 1]".into(),
        ));
    }
    let (s, scaled) = scaled_coeffs(approx)?;
    let k = approx.k;
    let int_coeffs: Vec<BigInt> = scaled
        .iter()
        .enumerate()
        .map(|(j, &c)| BigInt::from(c) * BigInt::from(q).pow(2 * (k - j) as u32))
        .collect();
    let field_coeffs = int_coeffs.iter().map(|c| f.from_bigint(c)).collect();
    Ok(EmbeddedRelu {
        k,
        q,
        coeff_scale: s,
        scaled_coeffs: scaled,
        int_coeffs,
        field_coeffs,
    })
}

/// Worst-case `|h_hat(round(q^2 c)) / (s q^{2k}) - h(c)|` over `c` in `[-1, 1]`.
pub fn embedding_error_bound(approx: &ReluApprox, emb: &EmbeddedRelu) -> f64 {
    let q2 = (emb.q as f64).powi(2);
    approx.lipschitz() / (2.0 * q2) + (approx.k + 1) as f64 / (2.0 * emb.coeff_scale as f64)
}

/// Signed integer value of a field element known to be small.
pub fn lift_i128(f: &PrimeField, x: &FieldElement) -> Option<i128> {
    let v = f.lift(x);
    (v.abs().bits() < 127).then(|| v.to_i128()).flatten()
}
