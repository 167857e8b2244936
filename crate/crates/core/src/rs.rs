//! Reed-Solomon error-and-erasure decoding (Berlekamp-Welch).

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::field::{poly_interp, FieldElement, FieldPoly, PrimeField};

/// Evaluations `(alpha, value)`; `None` marks an erasure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NoisyCodeword {
    pub entries: Vec<(FieldElement, Option<FieldElement>)>,
    pub degree_bound: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RsDecoded {
    pub poly: FieldPoly,
    /// Indices into `entries` whose value disagrees with `poly`.
    pub error_positions: Vec<usize>,
}

pub fn rs_decode(f: &PrimeField, cw: &NoisyCodeword, b_max: usize) -> Result<RsDecoded> {
    rs_decode_with_hint(f, cw, b_max, &BTreeSet::new())
}

/// As [`rs_decode`], first trying an interpolation that avoids `suspects`.
///
/// Any polynomial of degree `<= D` within distance `b_max` is the unique
/// answer, so the shortcut never changes the result.
pub fn rs_decode_with_hint(
    f: &PrimeField,
    cw: &NoisyCodeword,
    b_max: usize,
    suspects: &BTreeSet<usize>,
) -> Result<RsDecoded> {
    let d = cw.degree_bound;
    let present: Vec<(usize, &FieldElement, &FieldElement)> = cw
        .entries
        .iter()
        .enumerate()
        .filter_map(|(i, (x, y))| y.as_ref().map(|y| (i, x, y)))
        .collect();
    let needed = d + 2 * b_max + 1;
    if present.len() < needed {
        return Err(Error::InsufficientRedundancy {
            needed,
            available: present.len(),
        });
    }

    let trusted: Vec<_> = present
        .iter()
        .filter(|(i, _, _)| !suspects.contains(i))
        .take(d + 1)
        .collect();
    if trusted.len() == d + 1 {
        let pts: Vec<_> = trusted
            .iter()
            .map(|(_, x, y)| ((*x).clone(), (*y).clone()))
            .collect();
        let poly = poly_interp(f, &pts)?;
        if let Some(errs) = disagreements(f, &poly, &present, b_max) {
            return Ok(RsDecoded {
                poly,
                error_positions: errs,
            });
        }
    }

    let poly = berlekamp_welch(f, &present, d, b_max).ok_or(Error::DecodeFailure)?;
    let errs = disagreements(f, &poly, &present, b_max).ok_or(Error::DecodeFailure)?;
    Ok(RsDecoded {
        poly,
        error_positions: errs,
    })
}

fn disagreements(
    f: &PrimeField,
    poly: &FieldPoly,
    present: &[(usize, &FieldElement, &FieldElement)],
    b_max: usize,
) -> Option<Vec<usize>> {
    let mut errs = Vec::new();
    for (i, x, y) in present {
        if poly.eval(f, x) != **y {
            errs.push(*i);
            if errs.len() > b_max {
                return None;
            }
        }
    }
    Some(errs)
}

/// Solves `Q(x_i) = y_i E(x_i)` with `E` monic of degree `e` and `deg Q <= D + e`.
fn berlekamp_welch(
    f: &PrimeField,
    present: &[(usize, &FieldElement, &FieldElement)],
    d: usize,
    e: usize,
) -> Option<FieldPoly> {
    let q_len = d + e + 1;
    let mut rows = Vec::with_capacity(present.len());
    let mut rhs = Vec::with_capacity(present.len());
    for (_, x, y) in present {
        let mut powers = Vec::with_capacity(q_len);
        let mut p = f.one();
        for _ in 0..q_len {
            powers.push(p.clone());
            p = f.mul(&p, x);
        }
        let mut row = powers.clone();
        row.extend(powers[..e].iter().map(|xp| f.neg(&f.mul(y, xp))));
        rows.push(row);
        rhs.push(f.mul(y, &powers[e]));
    }
    let sol = f.solve_linear(rows, rhs)?;
    let q = FieldPoly::new(sol[..q_len].to_vec());
    let mut e_coeffs = sol[q_len..].to_vec();
    e_coeffs.push(f.one());
    let (quot, rem) = q.div_rem(f, &FieldPoly::new(e_coeffs)).ok()?;
    (rem.is_zero() && quot.degree_at_most(d)).then_some(quot)
}

/// Decodes every coordinate of a batch of vector shares evaluated at `xs`.
///
/// Returns one polynomial per coordinate and the union of error positions
/// (indices into `xs`). Positions found in one coordinate seed the shortcut
/// for the next.
pub fn rs_decode_vectors(
    f: &PrimeField,
    xs: &[FieldElement],
    shares: &[Option<&[FieldElement]>],
    degree_bound: usize,
    b_max: usize,
) -> Result<(Vec<FieldPoly>, BTreeSet<usize>)> {
    let len = shares.iter().flatten().map(|s| s.len()).max().unwrap_or(0);
    let mut suspects = BTreeSet::new();
    // a share of the wrong length counts as an error in every coordinate
    for (i, s) in shares.iter().enumerate() {
        if let Some(s) = s {
            if s.len() != len {
                suspects.insert(i);
            }
        }
    }
    let mut polys = Vec::with_capacity(len);
    for c in 0..len {
        let cw = NoisyCodeword {
            entries: xs
                .iter()
                .zip(shares)
                .map(|(x, s)| (x.clone(), s.and_then(|s| s.get(c).cloned())))
                .collect(),
            degree_bound,
        };
        let dec = rs_decode_with_hint(f, &cw, b_max, &suspects)?;
        suspects.extend(dec.error_positions);
        polys.push(dec.poly);
    }
    if suspects.len() > b_max {
        return Err(Error::DecodeFailure);
    }
    Ok((polys, suspects))
}
