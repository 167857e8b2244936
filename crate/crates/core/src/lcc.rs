//! Packed Lagrange coded sharing.
//!
//! A secret vector is cut into `m` sub-vectors placed at the data points
//! `beta_1..beta_m`; `t` uniform mask vectors sit at `beta_{m+1}..beta_{m+t}`.
//! Each coordinate gets its own degree-`(m+t-1)` interpolant and party `j`
//! receives its evaluation at `alpha_j`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{lagrange_coefficients, poly_interp, FieldElement, FieldPoly, PrimeField};
use crate::wire::{WireReader, WireWriter};

/// Party points `alpha_1..alpha_n` and data/mask points `beta_1..beta_{m+t}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalDomain {
    alphas: Vec<FieldElement>,
    betas: Vec<FieldElement>,
    m: usize,
    t: usize,
}

impl EvalDomain {
    pub fn new(alphas: Vec<FieldElement>, betas: Vec<FieldElement>, m: usize) -> Result<Self> {
        if m == 0 || betas.len() < m {
            return Err(Error::Domain(format!(
                "need at least m = {m} >= 1 beta points, got {}",
                betas.len()
            )));
        }
        let mut all: Vec<&FieldElement> = alphas.iter().chain(&betas).collect();
        all.sort();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("evaluation points are not distinct".into()));
        }
        let t = betas.len() - m;
        Ok(EvalDomain {
            alphas,
            betas,
            m,
            t,
        })
    }

    /// `alpha_j = j` and `beta_l = n + l`.
    pub fn standard(f: &PrimeField, n: usize, m: usize, t: usize) -> Result<Self> {
        let needed = (n + m + t) as u64;
        if f.modulus() <= &num_bigint::BigUint::from(needed) {
            return Err(Error::Domain(format!(
                "field too small for {needed} distinct points"
            )));
        }
        let alphas = (1..=n).map(|j| f.elem(j as u64)).collect();
        let betas = (1..=m + t).map(|l| f.elem((n + l) as u64)).collect();
        Self::new(alphas, betas, m)
    }

    pub fn n(&self) -> usize {
        self.alphas.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Degree of a fresh encoding polynomial, `m + t - 1`.
    pub fn lcc_degree(&self) -> usize {
        self.m + self.t - 1
    }

    pub fn alphas(&self) -> &[FieldElement] {
        &self.alphas
    }

    /// Point of party `id` (1-based).
    pub fn alpha(&self, id: usize) -> &FieldElement {
        &self.alphas[id - 1]
    }

    pub fn betas(&self) -> &[FieldElement] {
        &self.betas
    }

    pub fn data_points(&self) -> &[FieldElement] {
        &self.betas[..self.m]
    }

    /// `prod_{l <= m} (z - beta_l)`.
    pub fn data_vanishing_poly(&self, f: &PrimeField) -> FieldPoly {
        FieldPoly::from_roots(f, self.data_points())
    }

    /// `L[j][l]`: value at `alpha_j` of the Lagrange basis polynomial for `beta_l`.
    pub fn encoding_matrix(&self, f: &PrimeField) -> Result<Vec<Vec<FieldElement>>> {
        self.alphas
            .iter()
            .map(|a| lagrange_coefficients(f, &self.betas, a))
            .collect()
    }
}

/// One party's evaluation of a batch of encoding polynomials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedShare {
    pub owner: usize,
    pub values: Vec<FieldElement>,
    pub degree_bound: usize,
    pub source_tag: String,
}

impl PackedShare {
    pub fn new(owner: usize, values: Vec<FieldElement>, degree_bound: usize, tag: &str) -> Self {
        PackedShare {
            owner,
            values,
            degree_bound,
            source_tag: tag.to_string(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(source_tag, owner, degree_bound, count, values)`.
    pub fn encode(&self) -> Vec<u8> {
        let mut w = WireWriter::new();
        w.str(&self.source_tag)
            .u32(self.owner as u32)
            .u32(self.degree_bound as u32)
            .fe_vec(&self.values);
        w.finish()
    }

    pub fn decode(f: &PrimeField, bytes: &[u8]) -> Result<Self> {
        let mut r = WireReader::new(bytes);
        let source_tag = r.str()?;
        let owner = r.u32()? as usize;
        let degree_bound = r.u32()? as usize;
        let values = r.fe_vec(f)?;
        r.expect_end()?;
        Ok(PackedShare {
            owner,
            values,
            degree_bound,
            source_tag,
        })
    }
}

/// `m` data sub-vectors and `t` mask vectors, all of one length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretBundle {
    pub subvectors: Vec<Vec<FieldElement>>,
    pub masks: Vec<Vec<FieldElement>>,
}

impl SecretBundle {
    pub fn new(subvectors: Vec<Vec<FieldElement>>, masks: Vec<Vec<FieldElement>>) -> Result<Self> {
        let Some(len) = subvectors.first().map(Vec::len) else {
            return Err(Error::Shape(
                "secret bundle needs at least one sub-vector".into(),
            ));
        };
        if subvectors.iter().chain(&masks).any(|v| v.len() != len) {
            return Err(Error::Shape(
                "sub-vectors and masks differ in length".into(),
            ));
        }
        Ok(SecretBundle { subvectors, masks })
    }

    /// Zero-pads `values` to a multiple of `m`, splits it, and draws `t` masks.
    pub fn partition<R: Rng + ?Sized>(
        f: &PrimeField,
        values: &[FieldElement],
        m: usize,
        t: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let len = padded_slot_len(values.len(), m);
        let mut padded = values.to_vec();
        padded.resize(len * m, f.zero());
        let subvectors = padded.chunks(len.max(1)).map(<[_]>::to_vec).collect();
        let masks = (0..t).map(|_| f.random_vec(rng, len)).collect();
        Self::new(subvectors, masks)
    }

    /// Every data slot holds `s`; masks are uniform.
    pub fn replicated_scalar<R: Rng + ?Sized>(
        f: &PrimeField,
        s: &FieldElement,
        m: usize,
        t: usize,
        rng: &mut R,
    ) -> Self {
        SecretBundle {
            subvectors: vec![vec![s.clone()]; m],
            masks: (0..t).map(|_| vec![f.random(rng)]).collect(),
        }
    }

    pub fn slot_len(&self) -> usize {
        self.subvectors[0].len()
    }

    /// One encoding polynomial per coordinate.
    pub fn encoding_polys(&self, f: &PrimeField, domain: &EvalDomain) -> Result<Vec<FieldPoly>> {
        self.check_domain(domain)?;
        (0..self.slot_len())
            .map(|c| {
                let pts: Vec<_> = domain
                    .betas()
                    .iter()
                    .zip(self.subvectors.iter().chain(&self.masks))
                    .map(|(b, v)| (b.clone(), v[c].clone()))
                    .collect();
                poly_interp(f, &pts)
            })
            .collect()
    }

    fn check_domain(&self, domain: &EvalDomain) -> Result<()> {
        if self.subvectors.len() != domain.m() || self.masks.len() != domain.t() {
            return Err(Error::Domain(format!(
                "bundle has m={}, t={} but domain expects m={}, t={}",
                self.subvectors.len(),
                self.masks.len(),
                domain.m(),
                domain.t()
            )));
        }
        Ok(())
    }
}

/// Sub-vector length after zero padding `d` up to a multiple of `m`.
pub fn padded_slot_len(d: usize, m: usize) -> usize {
    d.div_ceil(m)
}

/// Shares of the unique degree-`(m+t-1)` interpolant of the bundle, one per party.
pub fn lcc_encode(
    f: &PrimeField,
    secret: &SecretBundle,
    domain: &EvalDomain,
    tag: &str,
) -> Result<Vec<PackedShare>> {
    secret.check_domain(domain)?;
    let basis = domain.encoding_matrix(f)?;
    let slots: Vec<&Vec<FieldElement>> = secret.subvectors.iter().chain(&secret.masks).collect();
    Ok(basis
        .iter()
        .enumerate()
        .map(|(j, row)| {
            let values = (0..secret.slot_len())
                .map(|c| {
                    let ys: Vec<FieldElement> = slots.iter().map(|s| s[c].clone()).collect();
                    f.dot(row, &ys)
                })
                .collect();
            PackedShare::new(j + 1, values, domain.lcc_degree(), tag)
        })
        .collect())
}

/// Shares of a polynomial equal to `s` at every data point.
pub fn replicate_scalar_encode<R: Rng + ?Sized>(
    f: &PrimeField,
    s: &FieldElement,
    domain: &EvalDomain,
    rng: &mut R,
    tag: &str,
) -> Result<Vec<PackedShare>> {
    let bundle = SecretBundle::replicated_scalar(f, s, domain.m(), domain.t(), rng);
    lcc_encode(f, &bundle, domain, tag)
}

fn broadcast_len(a: &PackedShare, b: &PackedShare) -> Result<usize> {
    match (a.len(), b.len()) {
        (x, y) if x == y => Ok(x),
        (1, y) => Ok(y),
        (x, 1) => Ok(x),
        (x, y) => Err(Error::Shape(format!(
            "lengths {x} and {y} do not broadcast"
        ))),
    }
}

fn at(v: &[FieldElement], i: usize) -> &FieldElement {
    if v.len() == 1 {
        &v[0]
    } else {
        &v[i]
    }
}

fn check_owner(a: &PackedShare, b: &PackedShare) -> Result<()> {
    if a.owner != b.owner {
        return Err(Error::Shape(format!(
            "shares belong to parties {} and {}",
            a.owner, b.owner
        )));
    }
    Ok(())
}

pub fn share_add(f: &PrimeField, a: &PackedShare, b: &PackedShare) -> Result<PackedShare> {
    check_owner(a, b)?;
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "lengths {} and {} differ",
            a.len(),
            b.len()
        )));
    }
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| f.add(x, y))
        .collect();
    Ok(PackedShare::new(
        a.owner,
        values,
        a.degree_bound.max(b.degree_bound),
        &a.source_tag,
    ))
}

/// Element-wise product; a length-1 share broadcasts over the other.
pub fn share_mul(f: &PrimeField, a: &PackedShare, b: &PackedShare) -> Result<PackedShare> {
    check_owner(a, b)?;
    let len = broadcast_len(a, b)?;
    let values = (0..len)
        .map(|i| f.mul(at(&a.values, i), at(&b.values, i)))
        .collect();
    Ok(PackedShare::new(
        a.owner,
        values,
        a.degree_bound + b.degree_bound,
        &a.source_tag,
    ))
}

/// Applies `h` (coefficients lowest first) to a scalar share.
pub fn apply_poly_to_share(
    f: &PrimeField,
    h: &[FieldElement],
    a: &PackedShare,
) -> Result<PackedShare> {
    if a.len() != 1 {
        return Err(Error::Shape(format!(
            "polynomial evaluation needs a scalar share, got length {}",
            a.len()
        )));
    }
    let k = h.len().saturating_sub(1);
    let value = FieldPoly::new(h.to_vec()).eval(f, &a.values[0]);
    Ok(PackedShare::new(
        a.owner,
        vec![value],
        k * a.degree_bound,
        &a.source_tag,
    ))
}

/// Interpolates each coordinate from the first `degree_bound + 1` shares.
pub fn decode_shares(
    f: &PrimeField,
    domain: &EvalDomain,
    shares: &[PackedShare],
) -> Result<Vec<FieldPoly>> {
    let Some(first) = shares.first() else {
        return Err(Error::InsufficientRedundancy {
            needed: 1,
            available: 0,
        });
    };
    let need = first.degree_bound + 1;
    if shares.len() < need {
        return Err(Error::InsufficientRedundancy {
            needed: need,
            available: shares.len(),
        });
    }
    let used = &shares[..need];
    (0..first.len())
        .map(|c| {
            let pts: Vec<_> = used
                .iter()
                .map(|s| (domain.alpha(s.owner).clone(), s.values[c].clone()))
                .collect();
            poly_interp(f, &pts)
        })
        .collect()
}

/// `out[l][c]` = coordinate `c` of the decoded polynomial at data point `beta_{l+1}`.
pub fn eval_at_data_points(
    f: &PrimeField,
    domain: &EvalDomain,
    polys: &[FieldPoly],
) -> Vec<Vec<FieldElement>> {
    domain
        .data_points()
        .iter()
        .map(|b| polys.iter().map(|p| p.eval(f, b)).collect())
        .collect()
}
