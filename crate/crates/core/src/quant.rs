//! Normalization, stochastic quantization into `F_P`, and field-size guards.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive};
use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{FieldElement, PrimeField};

/// Tolerance on `|x| <= 1` for floating-point noise after normalization.
const RANGE_SLACK: f64 = 1e-9;

pub fn l2_norm(g: &[f64]) -> f64 {
    g.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `g / ||g||`.
pub fn normalize(g: &[f64]) -> Result<Vec<f64>> {
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(
            "update has a non-finite coordinate".into(),
        ));
    }
    let norm = l2_norm(g);
    if norm == 0.0 {
        return Err(Error::ZeroUpdate);
    }
    Ok(g.iter().map(|x| x / norm).collect())
}

/// Rounds `x` up with probability `x - floor(x)`, otherwise down.
pub fn stochastic_round<R: Rng + ?Sized>(x: f64, rng: &mut R) -> i64 {
    let lo = x.floor();
    let frac = x - lo;
    let up = frac > 0.0 && rng.gen::<f64>() < frac;
    lo as i64 + i64::from(up)
}

/// `phi(round_stochastic(q * x_j))` for each coordinate of a unit-range vector.
pub fn quantize<R: Rng + ?Sized>(
    f: &PrimeField,
    g: &[f64],
    q: u64,
    rng: &mut R,
) -> Result<Vec<FieldElement>> {
    if let Some(x) = g
        .iter()
        .find(|x| !x.is_finite() || x.abs() > 1.0 + RANGE_SLACK)
    {
        return Err(Error::Range(format!("coordinate {x} outside [-1, 1]")));
    }
    Ok(quantize_unchecked(f, &clamp_unit(g), q, rng))
}

fn clamp_unit(g: &[f64]) -> Vec<f64> {
    g.iter().map(|x| x.clamp(-1.0, 1.0)).collect()
}

/// As [`quantize`] but without the range check; models a dealer that feeds
/// out-of-range values into the protocol.
pub fn quantize_unchecked<R: Rng + ?Sized>(
    f: &PrimeField,
    g: &[f64],
    q: u64,
    rng: &mut R,
) -> Vec<FieldElement> {
    g.iter()
        .map(|&x| f.from_i64(stochastic_round(x * q as f64, rng)))
        .collect()
}

/// `phi^{-1}(v) / q`, rejecting magnitudes beyond `q`.
pub fn dequantize(f: &PrimeField, v: &FieldElement, q: u64) -> Result<f64> {
    let x = f.lift(v);
    if x.abs() > BigInt::from(q) {
        return Err(Error::WrapAroundDetected);
    }
    Ok(x.to_f64().expect("bounded by q") / q as f64)
}

/// `norm_g0 * (num / den) / q` for an aggregate quotient.
pub fn dequantize_rational(num: &BigInt, den: &BigUint, q: u64, norm_g0: f64) -> f64 {
    norm_g0 * ratio_to_f64(num, den) / q as f64
}

/// `num / den` without overflowing `f64` on large operands.
pub fn ratio_to_f64(num: &BigInt, den: &BigUint) -> f64 {
    fn top(x: &BigUint) -> (f64, i32) {
        let shift = x.bits().saturating_sub(60);
        (
            (x >> shift).to_f64().expect("at most 60 bits"),
            shift as i32,
        )
    }
    let (n, ne) = top(num.magnitude());
    let (d, de) = top(den);
    let r = n / d * 2f64.powi(ne - de);
    if num.is_negative() {
        -r
    } else {
        r
    }
}

/// Integer `||v||^2` of a quantized vector after centered lift.
pub fn lifted_norm_sq(f: &PrimeField, v: &[FieldElement]) -> BigInt {
    v.iter()
        .map(|x| {
            let y = f.lift(x);
            &y * &y
        })
        .sum()
}

/// Inputs to the field-size guards.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GuardInputs {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub q: u64,
    /// Magnitude multiplier of the integer ReLU coefficients (their absolute sum).
    pub scale: BigUint,
}

impl GuardInputs {
    /// `2 n d^k q^{2k+1} * scale + 1`.
    pub fn magnitude_bound(&self) -> BigUint {
        BigUint::from(2u32)
            * BigUint::from(self.n)
            * BigUint::from(self.d).pow(self.k as u32)
            * BigUint::from(self.q).pow(2 * self.k as u32 + 1)
            * &self.scale
            + BigUint::one()
    }

    /// `(B1, B2)`: bounds on `|Sigma1|` and on each `|Sigma2|` coordinate.
    pub fn rational_bounds(&self) -> (BigUint, BigUint) {
        let b1 = BigUint::from(self.n)
            * &self.scale
            * BigUint::from(self.d).pow(self.k as u32)
            * BigUint::from(self.q).pow(2 * self.k as u32);
        let b2 = &b1 * BigUint::from(self.q);
        (b1, b2)
    }

    /// Smallest integer `P` passing both guards.
    pub fn required_prime_lower_bound(&self) -> BigUint {
        let (b1, b2) = self.rational_bounds();
        let rr = BigUint::from(2u32) * b1 * b2 + BigUint::one();
        self.magnitude_bound().max(rr)
    }

    /// Checks (a) the magnitude bound and (b) `2 B1 B2 < P`.
    pub fn validate(&self, p: &BigUint) -> Result<()> {
        let magnitude = self.magnitude_bound();
        if *p < magnitude {
            return Err(Error::ParamsInfeasible(format!(
                "P >= 2 n d^k q^(2k+1) * scale + 1 violated: P = {p} < {magnitude}"
            )));
        }
        let (b1, b2) = self.rational_bounds();
        let rr = BigUint::from(2u32) * b1 * b2;
        if rr >= *p {
            return Err(Error::ParamsInfeasible(format!(
                "2 * B1 * B2 < P violated: 2 B1 B2 = {rr} >= P = {p}"
            )));
        }
        Ok(())
    }

    /// The smallest prime passing [`GuardInputs::validate`].
    pub fn select_prime(&self) -> PrimeField {
        PrimeField::smallest_prime_at_least(&self.required_prime_lower_bound())
    }
}
