//! Prime-field arithmetic and univariate polynomials over `F_P`.
//!
//! The modulus is arbitrary precision: the wrap-around guard for realistic
//! quantization parameters pushes `P` well past 2^300. A [`PrimeField`] is a
//! cheap shared handle; [`FieldElement`]s are bare residues and every
//! operation goes through the field handle.

use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A residue in `[0, P)`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct FieldElement(BigUint);

impl FieldElement {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Minimal big-endian encoding of the residue; zero encodes as the empty string.
    pub fn to_be_bytes(&self) -> Vec<u8> {
        if self.0.is_zero() {
            Vec::new()
        } else {
            self.0.to_bytes_be()
        }
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

struct FieldInner {
    modulus: BigUint,
    half: BigUint,
}

/// Handle to `F_P`. Cloning shares the modulus.
#[derive(Clone)]
pub struct PrimeField(Arc<FieldInner>);

impl fmt::Debug for PrimeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}", self.0.modulus)
    }
}

impl PartialEq for PrimeField {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.modulus == other.0.modulus
    }
}

impl Eq for PrimeField {}

impl PrimeField {
    /// Builds the field, checking primality with [`is_probable_prime`].
    pub fn new(modulus: BigUint) -> Result<Self> {
        if !is_probable_prime(&modulus) {
            return Err(Error::Precondition(format!("{modulus} is not prime")));
        }
        Ok(Self::new_unchecked(modulus))
    }

    pub fn new_unchecked(modulus: BigUint) -> Self {
        let half = &modulus >> 1u32;
        PrimeField(Arc::new(FieldInner { modulus, half }))
    }

    pub fn from_u64(p: u64) -> Result<Self> {
        Self::new(BigUint::from(p))
    }

    /// Smallest prime `>= bound`.
    pub fn smallest_prime_at_least(bound: &BigUint) -> Self {
        Self::new_unchecked(next_prime(bound))
    }

    pub fn modulus(&self) -> &BigUint {
        &self.0.modulus
    }

    pub fn bits(&self) -> u64 {
        self.0.modulus.bits()
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement(BigUint::zero())
    }

    pub fn one(&self) -> FieldElement {
        FieldElement(BigUint::one())
    }

    pub fn elem(&self, v: u64) -> FieldElement {
        FieldElement(BigUint::from(v) % &self.0.modulus)
    }

    pub fn from_biguint(&self, v: &BigUint) -> FieldElement {
        FieldElement(v % &self.0.modulus)
    }

    /// `phi`: signed integers to residues, negatives wrap to the top of the field.
    pub fn from_i64(&self, v: i64) -> FieldElement {
        self.from_bigint(&BigInt::from(v))
    }

    pub fn from_bigint(&self, v: &BigInt) -> FieldElement {
        let p = BigInt::from_biguint(Sign::Plus, self.0.modulus.clone());
        let r = v.mod_floor(&p);
        FieldElement(r.to_biguint().expect("mod_floor is non-negative"))
    }

    /// Centered lift `phi^-1`: residues above `P/2` map to negative integers.
    pub fn lift(&self, a: &FieldElement) -> BigInt {
        if a.0 > self.0.half {
            BigInt::from_biguint(Sign::Plus, a.0.clone())
                - BigInt::from_biguint(Sign::Plus, self.0.modulus.clone())
        } else {
            BigInt::from_biguint(Sign::Plus, a.0.clone())
        }
    }

    /// Decodes a minimal big-endian residue, rejecting out-of-range values.
    pub fn from_be_bytes(&self, bytes: &[u8]) -> Result<FieldElement> {
        let v = BigUint::from_bytes_be(bytes);
        if v >= self.0.modulus {
            return Err(Error::Wire(format!("residue {v} out of range")));
        }
        Ok(FieldElement(v))
    }

    pub fn add(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        let s = &a.0 + &b.0;
        if s >= self.0.modulus {
            FieldElement(s - &self.0.modulus)
        } else {
            FieldElement(s)
        }
    }

    pub fn sub(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        if a.0 >= b.0 {
            FieldElement(&a.0 - &b.0)
        } else {
            FieldElement(&self.0.modulus - &b.0 + &a.0)
        }
    }

    pub fn neg(&self, a: &FieldElement) -> FieldElement {
        if a.0.is_zero() {
            a.clone()
        } else {
            FieldElement(&self.0.modulus - &a.0)
        }
    }

    pub fn mul(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        FieldElement((&a.0 * &b.0) % &self.0.modulus)
    }

    pub fn square(&self, a: &FieldElement) -> FieldElement {
        self.mul(a, a)
    }

    pub fn pow(&self, a: &FieldElement, e: u64) -> FieldElement {
        FieldElement(a.0.modpow(&BigUint::from(e), &self.0.modulus))
    }

    /// Multiplicative inverse via Fermat.
    pub fn inv(&self, a: &FieldElement) -> Result<FieldElement> {
        if a.0.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let e = &self.0.modulus - BigUint::from(2u32);
        Ok(FieldElement(a.0.modpow(&e, &self.0.modulus)))
    }

    pub fn div(&self, a: &FieldElement, b: &FieldElement) -> Result<FieldElement> {
        Ok(self.mul(a, &self.inv(b)?))
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        FieldElement(rng.gen_biguint_below(&self.0.modulus))
    }

    pub fn random_vec<R: Rng + ?Sized>(&self, rng: &mut R, len: usize) -> Vec<FieldElement> {
        (0..len).map(|_| self.random(rng)).collect()
    }

    pub fn sum<'a, I: IntoIterator<Item = &'a FieldElement>>(&self, it: I) -> FieldElement {
        let mut acc = BigUint::zero();
        for x in it {
            acc += &x.0;
        }
        FieldElement(acc % &self.0.modulus)
    }

    /// `sum_i a_i * b_i` with a single final reduction.
    pub fn dot(&self, a: &[FieldElement], b: &[FieldElement]) -> FieldElement {
        debug_assert_eq!(a.len(), b.len());
        let mut acc = BigUint::zero();
        for (x, y) in a.iter().zip(b) {
            acc += &x.0 * &y.0;
        }
        FieldElement(acc % &self.0.modulus)
    }

    /// Inverts every element with one field inversion (Montgomery's trick).
    pub fn batch_inv(&self, xs: &[FieldElement]) -> Result<Vec<FieldElement>> {
        let mut prefix = Vec::with_capacity(xs.len());
        let mut acc = self.one();
        for x in xs {
            if x.is_zero() {
                return Err(Error::DivisionByZero);
            }
            prefix.push(acc.clone());
            acc = self.mul(&acc, x);
        }
        let mut inv_acc = self.inv(&acc)?;
        let mut out = vec![self.zero(); xs.len()];
        for i in (0..xs.len()).rev() {
            out[i] = self.mul(&inv_acc, &prefix[i]);
            inv_acc = self.mul(&inv_acc, &xs[i]);
        }
        Ok(out)
    }

    /// Solves `A x = b`, returning the solution with all free variables set
    /// to zero, or `None` when the system is inconsistent.
    pub fn solve_linear(
        &self,
        mut a: Vec<Vec<FieldElement>>,
        mut b: Vec<FieldElement>,
    ) -> Option<Vec<FieldElement>> {
        let rows = a.len();
        let cols = a.first().map_or(0, Vec::len);
        let mut pivot_cols = Vec::new();
        let mut r = 0;
        for c in 0..cols {
            if r == rows {
                break;
            }
            let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
                continue;
            };
            a.swap(r, p);
            b.swap(r, p);
            let inv = self.inv(&a[r][c]).expect("pivot is nonzero");
            for x in a[r][c..].iter_mut() {
                *x = self.mul(x, &inv);
            }
            b[r] = self.mul(&b[r], &inv);
            let pivot_row = a[r].clone();
            let pivot_rhs = b[r].clone();
            for i in 0..rows {
                if i == r || a[i][c].is_zero() {
                    continue;
                }
                let f = a[i][c].clone();
                for (x, y) in a[i][c..].iter_mut().zip(&pivot_row[c..]) {
                    *x = self.sub(x, &self.mul(&f, y));
                }
                b[i] = self.sub(&b[i], &self.mul(&f, &pivot_rhs));
            }
            pivot_cols.push(c);
            r += 1;
        }
        if b[r..].iter().any(|x| !x.is_zero()) {
            return None;
        }
        let mut x = vec![self.zero(); cols];
        for (row, &c) in pivot_cols.iter().enumerate() {
            x[c] = b[row].clone();
        }
        Some(x)
    }
}

/// Coefficients lowest degree first, trailing zeros trimmed.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct FieldPoly {
    coeffs: Vec<FieldElement>,
}

impl FieldPoly {
    pub fn new(mut coeffs: Vec<FieldElement>) -> Self {
        while coeffs.last().is_some_and(FieldElement::is_zero) {
            coeffs.pop();
        }
        FieldPoly { coeffs }
    }

    pub fn zero() -> Self {
        FieldPoly { coeffs: Vec::new() }
    }

    pub fn constant(c: FieldElement) -> Self {
        Self::new(vec![c])
    }

    pub fn coeffs(&self) -> &[FieldElement] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<FieldElement> {
        self.coeffs
    }

    /// Coefficient of `x^i` (zero past the end).
    pub fn coeff(&self, i: usize) -> FieldElement {
        self.coeffs.get(i).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// True when the polynomial is zero or its degree is at most `bound`.
    pub fn degree_at_most(&self, bound: usize) -> bool {
        self.degree().is_none_or(|d| d <= bound)
    }

    /// Horner evaluation.
    pub fn eval(&self, f: &PrimeField, x: &FieldElement) -> FieldElement {
        let mut acc = BigUint::zero();
        for c in self.coeffs.iter().rev() {
            acc = (acc * &x.0 + &c.0) % f.modulus();
        }
        FieldElement(acc)
    }

    pub fn add(&self, f: &PrimeField, other: &FieldPoly) -> FieldPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        FieldPoly::new(
            (0..n)
                .map(|i| f.add(&self.coeff(i), &other.coeff(i)))
                .collect(),
        )
    }

    pub fn sub(&self, f: &PrimeField, other: &FieldPoly) -> FieldPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        FieldPoly::new(
            (0..n)
                .map(|i| f.sub(&self.coeff(i), &other.coeff(i)))
                .collect(),
        )
    }

    pub fn scale(&self, f: &PrimeField, s: &FieldElement) -> FieldPoly {
        FieldPoly::new(self.coeffs.iter().map(|c| f.mul(c, s)).collect())
    }

    pub fn mul(&self, f: &PrimeField, other: &FieldPoly) -> FieldPoly {
        if self.is_zero() || other.is_zero() {
            return FieldPoly::zero();
        }
        let mut acc = vec![BigUint::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                acc[i + j] += &a.0 * &b.0;
            }
        }
        FieldPoly::new(
            acc.into_iter()
                .map(|v| FieldElement(v % f.modulus()))
                .collect(),
        )
    }

    /// `prod (x - r)` over the given roots.
    pub fn from_roots(f: &PrimeField, roots: &[FieldElement]) -> FieldPoly {
        let mut p = FieldPoly::constant(f.one());
        for r in roots {
            p = p.mul(f, &FieldPoly::new(vec![f.neg(r), f.one()]));
        }
        p
    }

    /// Long division; returns `(quotient, remainder)`.
    pub fn div_rem(&self, f: &PrimeField, divisor: &FieldPoly) -> Result<(FieldPoly, FieldPoly)> {
        let Some(dd) = divisor.degree() else {
            return Err(Error::DivisionByZero);
        };
        let lead_inv = f.inv(&divisor.coeffs[dd])?;
        let mut rem = self.coeffs.clone();
        if rem.len() <= dd {
            return Ok((FieldPoly::zero(), self.clone()));
        }
        let mut quot = vec![f.zero(); rem.len() - dd];
        for i in (0..quot.len()).rev() {
            let c = f.mul(&rem[i + dd], &lead_inv);
            if c.is_zero() {
                continue;
            }
            for (j, dc) in divisor.coeffs.iter().enumerate() {
                rem[i + j] = f.sub(&rem[i + j], &f.mul(&c, dc));
            }
            quot[i] = c;
        }
        rem.truncate(dd);
        Ok((FieldPoly::new(quot), FieldPoly::new(rem)))
    }
}

/// Lagrange interpolation: the unique polynomial of degree `< points.len()`
/// through all points.
pub fn poly_interp(f: &PrimeField, points: &[(FieldElement, FieldElement)]) -> Result<FieldPoly> {
    if points.is_empty() {
        return Err(Error::Precondition(
            "interpolation needs at least one point".into(),
        ));
    }
    let xs: Vec<FieldElement> = points.iter().map(|(x, _)| x.clone()).collect();
    let weights = barycentric_weights(f, &xs)?;
    let full = FieldPoly::from_roots(f, &xs);
    let mut acc = vec![BigUint::zero(); points.len()];
    for ((x, y), w) in points.iter().zip(&weights) {
        if y.is_zero() {
            continue;
        }
        // full / (z - x) by synthetic division
        let (basis, _) = synthetic_div(f, &full, x);
        let s = f.mul(y, w);
        for (a, c) in acc.iter_mut().zip(basis.coeffs()) {
            *a += &c.0 * &s.0;
        }
    }
    Ok(FieldPoly::new(
        acc.into_iter()
            .map(|v| FieldElement(v % f.modulus()))
            .collect(),
    ))
}

fn synthetic_div(f: &PrimeField, p: &FieldPoly, root: &FieldElement) -> (FieldPoly, FieldElement) {
    let c = p.coeffs();
    if c.is_empty() {
        return (FieldPoly::zero(), f.zero());
    }
    let mut out = vec![f.zero(); c.len() - 1];
    let mut carry = f.zero();
    for i in (0..c.len()).rev() {
        let v = f.add(&c[i], &f.mul(&carry, root));
        if i == 0 {
            return (FieldPoly::new(out), v);
        }
        out[i - 1] = v.clone();
        carry = v;
    }
    unreachable!()
}

/// `w_k = 1 / prod_{l != k} (x_k - x_l)`; fails on repeated nodes.
pub fn barycentric_weights(f: &PrimeField, xs: &[FieldElement]) -> Result<Vec<FieldElement>> {
    let mut dens = Vec::with_capacity(xs.len());
    for (k, xk) in xs.iter().enumerate() {
        let mut d = f.one();
        for (l, xl) in xs.iter().enumerate() {
            if l != k {
                let diff = f.sub(xk, xl);
                if diff.is_zero() {
                    return Err(Error::DuplicateNode);
                }
                d = f.mul(&d, &diff);
            }
        }
        dens.push(d);
    }
    f.batch_inv(&dens)
}

/// Coefficients `c_k` with `p(target) = sum_k c_k p(x_k)` for every
/// polynomial of degree `< xs.len()`.
pub fn lagrange_coefficients(
    f: &PrimeField,
    xs: &[FieldElement],
    target: &FieldElement,
) -> Result<Vec<FieldElement>> {
    let w = barycentric_weights(f, xs)?;
    if let Some(k) = xs.iter().position(|x| x == target) {
        let mut out = vec![f.zero(); xs.len()];
        out[k] = f.one();
        return Ok(out);
    }
    let diffs: Vec<FieldElement> = xs.iter().map(|x| f.sub(target, x)).collect();
    let inv_diffs = f.batch_inv(&diffs)?;
    let ell = diffs.iter().fold(f.one(), |acc, d| f.mul(&acc, d));
    Ok(w.iter()
        .zip(&inv_diffs)
        .map(|(wk, inv)| f.mul(&ell, &f.mul(wk, inv)))
        .collect())
}

/// Lifts `c` to the unique fraction `a / b` with `|a| <= num_bound` and
/// `0 < b <= den_bound`, using the half-extended Euclidean algorithm.
///
/// `2 * num_bound * den_bound < P` makes the answer unique. When that fails
/// and `den_bound` is small, the rectangle is searched exhaustively and a
/// unique hit is still returned; otherwise this is a precondition error.
pub fn rational_reconstruct(
    f: &PrimeField,
    c: &FieldElement,
    num_bound: &BigUint,
    den_bound: &BigUint,
) -> Result<(BigInt, BigUint)> {
    let two = BigUint::from(2u32);
    if &two * num_bound * den_bound >= *f.modulus() {
        return rational_search(f, c, num_bound, den_bound);
    }
    let n_bound = BigInt::from_biguint(Sign::Plus, num_bound.clone());
    let mut r0 = BigInt::from_biguint(Sign::Plus, f.modulus().clone());
    let mut r1 = BigInt::from_biguint(Sign::Plus, c.0.clone());
    let mut t0 = BigInt::zero();
    let mut t1 = BigInt::one();
    while r1 > n_bound {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        let t2 = &t0 - &q * &t1;
        r0 = std::mem::replace(&mut r1, r2);
        t0 = std::mem::replace(&mut t1, t2);
    }
    let (mut a, mut b) = (r1, t1);
    if b.is_negative() {
        a = -a;
        b = -b;
    }
    let b_u = b.to_biguint().ok_or(Error::ReconstructFailed)?;
    if b_u.is_zero() || b_u > *den_bound || a.abs() > n_bound || !a.gcd(&b).is_one() {
        return Err(Error::ReconstructFailed);
    }
    if f.mul(c, &f.from_biguint(&b_u)) != f.from_bigint(&a) {
        return Err(Error::ReconstructFailed);
    }
    Ok((a, b_u))
}

const SEARCH_LIMIT: u64 = 1 << 20;

fn rational_search(
    f: &PrimeField,
    c: &FieldElement,
    num_bound: &BigUint,
    den_bound: &BigUint,
) -> Result<(BigInt, BigUint)> {
    let ambiguous = || {
        Error::Precondition(format!(
            "rational reconstruction is ambiguous: 2*N*D >= P (N={num_bound}, D={den_bound})"
        ))
    };
    let d_max = u64::try_from(den_bound)
        .ok()
        .filter(|&d| d <= SEARCH_LIMIT)
        .ok_or_else(ambiguous)?;
    let p = BigInt::from_biguint(Sign::Plus, f.modulus().clone());
    let n = BigInt::from_biguint(Sign::Plus, num_bound.clone());
    let mut hit = None;
    for b in 1..=d_max {
        let r = BigInt::from_biguint(Sign::Plus, f.mul(c, &f.elem(b)).0);
        // smallest representative >= -N
        let mut a = &r - ((&r + &n) / &p) * &p;
        while a <= n {
            if a.gcd(&BigInt::from(b)).is_one() {
                if hit.is_some() {
                    return Err(ambiguous());
                }
                hit = Some((a.clone(), BigUint::from(b)));
            }
            a += &p;
        }
    }
    hit.ok_or(Error::ReconstructFailed)
}

const WITNESSES: [u32; 20] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
];

/// Miller-Rabin with a fixed witness schedule (the first twenty primes).
///
/// Deterministic for every input below 3.3e24 and reproducible above it.
pub fn is_probable_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for &w in &WITNESSES {
        let w = BigUint::from(w);
        if *n == w {
            return true;
        }
        if (n % &w).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    'witness: for &w in &WITNESSES {
        let mut x = BigUint::from(w).modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest probable prime `>= bound`.
pub fn next_prime(bound: &BigUint) -> BigUint {
    let two = BigUint::from(2u32);
    if *bound <= two {
        return two;
    }
    let mut c = bound.clone();
    if c.is_even() {
        c += 1u32;
    }
    while !is_probable_prime(&c) {
        c += 2u32;
    }
    c
}
