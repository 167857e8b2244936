//! One ByITFL aggregation round: share, norm check, compute, mask, reconstruct.
//!
//! Node 0 is the federator and parties are `1..=n`. Every cross-party value
//! travels through [`SimNet`], so the transcript holds exactly what each node
//! saw. With `D = m+t-1` the sharing degrees are:
//!
//! | quantity            | degree          |
//! |---------------------|-----------------|
//! | `g_i` shares        | `D`             |
//! | `<G0, g_i>` partial | `D + m - 1`     |
//! | converted `x_i`     | `D`             |
//! | `h(x_i)`, `Sigma1`  | `k D`           |
//! | `Sigma2`            | `(k+1) D`       |
//! | `lambda Sigma2`     | `(k+2) D`       |

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::adversary::{AttackKind, AttackSpec, DropoutSchedule};
use crate::error::{Error, Result};
use crate::field::{
    barycentric_weights, lagrange_coefficients, rational_reconstruct, FieldElement, FieldPoly,
    PrimeField,
};
use crate::lcc::{padded_slot_len, EvalDomain, SecretBundle};
use crate::net::{Inboxes, Message, MsgKind, Phase, SimNet, Transcript, FEDERATOR};
use crate::quant::{dequantize_rational, normalize, quantize, ratio_to_f64, GuardInputs};
use crate::relu::{embed_coeffs, fit_relu, scaled_coeffs, EmbeddedRelu, ReluApprox};
use crate::rng::{derive_rng, derive_seed, party_rng};
use crate::rs::rs_decode_vectors;
use crate::vss::{run_vss, Dealing, DealingShape, VssAdversary, VssOutcome, VssSession};
use crate::wire::{WireReader, WireWriter};

/// Grid size for the ReLU fit.
pub const FIT_NODES: usize = 1001;
/// Attempts at a nonzero `lambda Sigma1` before giving up.
pub const LAMBDA_ATTEMPTS: u32 = 3;
/// Plaintext guard: mean normalized trust below this is too small.
pub const LOW_TRUST_MEAN: f64 = 1e-3;
/// Secure guard: aggregate norm above this multiple of `||g0||` is rejected.
pub const LOW_TRUST_GAIN: f64 = 1e3;

/// `2b + (k+2)(m+t-1) + p_drop + 1`.
pub fn min_users(b: usize, k: usize, m: usize, t: usize, p_drop: usize) -> usize {
    2 * b + (k + 2) * (m + t - 1) + p_drop + 1
}

/// `2b + 2(m+t-1) + p_drop + 1`, what the norm check alone needs.
pub fn norm_check_min_users(b: usize, m: usize, t: usize, p_drop: usize) -> usize {
    2 * b + 2 * (m + t - 1) + p_drop + 1
}

/// User-facing protocol parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub n: usize,
    pub b: usize,
    pub t: usize,
    pub p_drop: usize,
    pub m: usize,
    pub k: usize,
    pub q: u64,
    pub epsilon: f64,
    /// Model dimension.
    pub d: usize,
    /// Field prime; the smallest admissible prime when `None`.
    pub prime: Option<BigUint>,
}

impl ParamSpec {
    pub fn new(n: usize, b: usize, t: usize, p_drop: usize, m: usize, k: usize, d: usize) -> Self {
        ParamSpec {
            n,
            b,
            t,
            p_drop,
            m,
            k,
            q: 1024,
            epsilon: 0.02,
            d,
            prime: None,
        }
    }

    /// Structural checks and the user-count bound.
    pub fn check(&self) -> Result<()> {
        if self.m < 1 || self.t < 1 || self.k < 1 || self.q < 1 || self.d < 1 || self.n < 1 {
            return Err(Error::ParamsInfeasible(format!(
                "need m, t, k, q, d, n >= 1 (m={}, t={}, k={}, q={}, d={}, n={})",
                self.m, self.t, self.k, self.q, self.d, self.n
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::ParamsInfeasible(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        let need = min_users(self.b, self.k, self.m, self.t, self.p_drop);
        if self.n < need {
            return Err(Error::ParamsInfeasible(format!(
                "n ≥ 2b+(k+2)(m+t−1)+p+1 violated: n = {} < {need} (b={}, k={}, m={}, t={}, p={})",
                self.n, self.b, self.k, self.m, self.t, self.p_drop
            )));
        }
        Ok(())
    }
}

/// Validated parameters with the field, evaluation points and embedded ReLU.
#[derive(Clone, Debug)]
pub struct ProtocolParams {
    pub spec: ParamSpec,
    pub field: PrimeField,
    pub domain: EvalDomain,
    pub relu: ReluApprox,
    pub embedded: EmbeddedRelu,
    pub guards: GuardInputs,
}

impl ProtocolParams {
    pub fn new(spec: ParamSpec) -> Result<Self> {
        let relu = fit_relu(spec.k, (-1.0, 1.0), FIT_NODES)?;
        Self::with_relu(spec, relu)
    }

    /// As [`ProtocolParams::new`] with a precomputed fit of degree `spec.k`.
    pub fn with_relu(spec: ParamSpec, relu: ReluApprox) -> Result<Self> {
        spec.check()?;
        Self::build(spec, relu)
    }

    /// Field, domain and ReLU embedding without the user-count bound, for
    /// evaluating the aggregation rule in plaintext at any `(n, b)`.
    pub fn plaintext(spec: ParamSpec, relu: ReluApprox) -> Result<Self> {
        let mut relaxed = spec.clone();
        relaxed.b = 0;
        relaxed.p_drop = 0;
        relaxed.n = relaxed.n.max(min_users(0, spec.k, spec.m, spec.t, 0));
        relaxed.check()?;
        Self::build(spec, relu)
    }

    fn build(spec: ParamSpec, relu: ReluApprox) -> Result<Self> {
        if relu.k != spec.k {
            return Err(Error::Precondition(format!(
                "ReLU fit has degree {} but k = {}",
                relu.k, spec.k
            )));
        }
        let (_, scaled) = scaled_coeffs(&relu)?;
        let guards = GuardInputs {
            n: spec.n,
            d: spec.d,
            k: spec.k,
            q: spec.q,
            scale: scaled.iter().map(|c| BigUint::from(c.unsigned_abs())).sum(),
        };
        let field = match &spec.prime {
            Some(p) => {
                let f = PrimeField::new(p.clone())?;
                guards.validate(f.modulus())?;
                f
            }
            None => guards.select_prime(),
        };
        let domain = EvalDomain::standard(&field, spec.n, spec.m, spec.t)?;
        let embedded = embed_coeffs(&relu, spec.q, &field)?;
        Ok(ProtocolParams {
            spec,
            field,
            domain,
            relu,
            embedded,
            guards,
        })
    }

    /// `D = m + t - 1`.
    pub fn lcc_degree(&self) -> usize {
        self.spec.m + self.spec.t - 1
    }

    /// Coordinates per sub-vector slot.
    pub fn slot_len(&self) -> usize {
        padded_slot_len(self.spec.d, self.spec.m)
    }

    /// Whether an integer squared norm passes `|norm - q^2| < eps q^2`.
    pub fn norm_ok(&self, norm_sq: &BigInt) -> bool {
        let q2 = BigInt::from(self.spec.q) * BigInt::from(self.spec.q);
        let dev = (norm_sq - &q2).abs();
        ratio_to_f64(&dev, q2.magnitude()) < self.spec.epsilon
    }
}

/// Inputs of one round: already-quantized updates and the public `g0`.
#[derive(Clone, Debug)]
pub struct RoundInput {
    pub round: u64,
    pub seed: u64,
    /// Quantized federator update, length `d`.
    pub g0: Vec<FieldElement>,
    pub g0_norm: f64,
    /// Party -> quantized update. Parties without an entry deal nothing.
    pub updates: BTreeMap<usize, Vec<FieldElement>>,
    /// Parties excluded in earlier rounds; they take no part.
    pub excluded: BTreeSet<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct RoundAdversary {
    pub attacks: Vec<AttackSpec>,
    pub dropouts: DropoutSchedule,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateResult {
    /// `||g0|| * (Sigma2 / Sigma1) / q` per coordinate.
    pub g: Vec<f64>,
    /// `Sigma2 / Sigma1` in the field, per coordinate.
    pub quotients: Vec<FieldElement>,
    /// The same quotients as reduced fractions.
    pub rationals: Vec<(BigInt, BigUint)>,
    /// The trust-denominator guard fired; callers should skip the update.
    pub low_trust: bool,
}

#[derive(Clone, Debug)]
pub struct RoundReport {
    pub round: u64,
    /// Parties that were never silent this round.
    pub live: BTreeSet<usize>,
    pub dropped: BTreeSet<usize>,
    /// Failed the norm check.
    pub excluded: BTreeSet<usize>,
    /// VSS disqualifications across all sessions, with reasons.
    pub disqualified: BTreeMap<usize, String>,
    pub contributors: BTreeSet<usize>,
    pub norms: BTreeMap<usize, BigInt>,
    /// Parties whose values the decoders had to correct.
    pub identified: BTreeSet<usize>,
    /// Decoded `lambda Sigma1` per data slot.
    pub masked_sigma1: Vec<FieldElement>,
    pub lambda_attempts: u32,
    pub aggregate: AggregateResult,
    pub timing_ms: Vec<(Phase, f64)>,
}

impl RoundReport {
    /// Parties to keep out of later rounds.
    pub fn flagged(&self) -> BTreeSet<usize> {
        self.excluded
            .iter()
            .chain(self.disqualified.keys())
            .copied()
            .collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "round": self.round,
            "live": self.live,
            "dropped": self.dropped,
            "excluded": self.excluded,
            "disqualified": self.disqualified,
            "contributors": self.contributors,
            "identified": self.identified,
            "norms": self.norms.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect::<BTreeMap<_, _>>(),
            "masked_sigma1": self.masked_sigma1.iter().map(|v| v.value().to_string()).collect::<Vec<_>>(),
            "lambda_attempts": self.lambda_attempts,
            "quotients": self.aggregate.rationals.iter().map(|(a, b)| format!("{a}/{b}")).collect::<Vec<_>>(),
            "aggregate": self.aggregate.g,
            "low_trust": self.aggregate.low_trust,
            "timing_ms": self.timing_ms.iter().map(|(p, t)| (p.as_str().to_string(), *t)).collect::<BTreeMap<_, _>>(),
        })
    }
}

fn abort(round: u64, phase: Phase) -> impl Fn(Error) -> Error {
    move |e| match e {
        e @ Error::Aborted { .. } => e,
        e => Error::Aborted {
            round,
            phase: phase.as_str().into(),
            source: Box::new(e),
        },
    }
}

struct Engine<'a> {
    p: &'a ProtocolParams,
    f: &'a PrimeField,
    round: u64,
    seed: u64,
    attacks: &'a [AttackSpec],
    dropouts: &'a DropoutSchedule,
    /// Parties taking part this round.
    roster: Vec<usize>,
    /// Error budget after removing known-bad parties.
    b_live: usize,
    net: SimNet,
    identified: BTreeSet<usize>,
    disqualified: BTreeMap<usize, String>,
    dropped: BTreeSet<usize>,
}

impl<'a> Engine<'a> {
    fn enter(&mut self, phase: Phase) {
        let silent: BTreeSet<usize> = self
            .dropouts
            .silent_at(self.round, phase)
            .into_iter()
            .filter(|j| self.roster.contains(j))
            .collect();
        self.dropped.extend(&silent);
        self.net.set_silent(silent);
    }

    fn active(&self) -> Vec<usize> {
        self.roster
            .iter()
            .copied()
            .filter(|&j| !self.net.is_silent(j))
            .collect()
    }

    fn roster_set(&self) -> BTreeSet<usize> {
        self.roster.iter().copied().collect()
    }

    fn attack(&self, party: usize, phase: Phase) -> Option<&AttackKind> {
        self.attacks
            .iter()
            .find(|a| a.kind.is_protocol_attack() && a.active_in(party, self.round, phase))
            .map(|a| &a.kind)
    }

    fn msg(
        &self,
        phase: Phase,
        sender: usize,
        receiver: Option<usize>,
        kind: MsgKind,
        payload: Vec<u8>,
    ) -> Message {
        Message {
            round: self.round,
            phase,
            sender,
            receiver,
            kind,
            payload,
        }
    }

    /// Applies a share-level attack to a value the party is about to send.
    fn tamper(&self, party: usize, phase: Phase, vals: Vec<FieldElement>) -> Vec<FieldElement> {
        match self.attack(party, phase) {
            Some(AttackKind::RandomShares) => {
                let mut rng = party_rng(self.seed, party, self.round, &format!("attack-{phase}"));
                self.f.random_vec(&mut rng, vals.len())
            }
            Some(AttackKind::WrongComputation) => {
                vals.iter().map(|v| self.f.add(v, &self.f.one())).collect()
            }
            _ => vals,
        }
    }

    fn vss_adversary(&self, phase: Phase) -> VssAdversary {
        let mut adv = VssAdversary::default();
        for &j in &self.roster {
            match self.attack(j, phase) {
                Some(AttackKind::RandomShares) => {
                    adv.random_checkpoints.insert(j);
                }
                Some(AttackKind::InconsistentDeal) => {
                    let victim = self
                        .roster
                        .iter()
                        .copied()
                        .find(|&v| v != j && self.attack(v, phase).is_none())
                        .or_else(|| self.roster.iter().copied().find(|&v| v != j));
                    if let Some(v) = victim {
                        adv.corrupt_rows.insert(j, v);
                    }
                }
                _ => {}
            }
        }
        adv
    }

    fn run_session(
        &mut self,
        phase: Phase,
        kind: MsgKind,
        shapes: Vec<DealingShape>,
        dealings: &BTreeMap<usize, Vec<Dealing>>,
        label: &str,
    ) -> Result<VssOutcome> {
        let session = VssSession {
            field: self.f,
            domain: &self.p.domain,
            round: self.round,
            phase,
            deal_kind: kind,
            shapes,
            b: self.b_live,
            participants: self.roster_set(),
            seed: derive_seed(self.seed, &["session", &self.round.to_string(), label]),
        };
        let adv = self.vss_adversary(phase);
        let out = run_vss(&mut self.net, &session, dealings, &adv)?;
        for (k, why) in &out.disqualified {
            self.disqualified
                .entry(*k)
                .or_insert_with(|| format!("{label}: {why}"));
        }
        Ok(out)
    }

    /// Vectors of `kind` received by `node` from roster parties; a vector of
    /// the wrong length marks its sender as identified and is dropped.
    fn collect(
        &mut self,
        inbox: &Inboxes,
        node: usize,
        kind: MsgKind,
        len: usize,
    ) -> BTreeMap<usize, Vec<FieldElement>> {
        let roster = self.roster_set();
        let mut out = BTreeMap::new();
        for m in inbox.of_kind(node, kind) {
            if !roster.contains(&m.sender) || out.contains_key(&m.sender) {
                continue;
            }
            let mut r = WireReader::new(&m.payload);
            match r.fe_vec(self.f).and_then(|v| r.expect_end().map(|_| v)) {
                Ok(v) if v.len() == len => {
                    out.insert(m.sender, v);
                }
                _ => {
                    self.identified.insert(m.sender);
                }
            }
        }
        out
    }

    /// Reed-Solomon decodes one polynomial per coordinate from roster shares.
    fn decode(
        &mut self,
        got: &BTreeMap<usize, Vec<FieldElement>>,
        range: std::ops::Range<usize>,
        degree: usize,
    ) -> Result<Vec<FieldPoly>> {
        if range.is_empty() {
            return Ok(Vec::new());
        }
        let xs: Vec<FieldElement> = self
            .roster
            .iter()
            .map(|&j| self.p.domain.alpha(j).clone())
            .collect();
        let shares: Vec<Option<&[FieldElement]>> = self
            .roster
            .iter()
            .map(|j| got.get(j).map(|v| &v[range.clone()]))
            .collect();
        let (polys, errs) = rs_decode_vectors(self.f, &xs, &shares, degree, self.b_live)?;
        self.identified
            .extend(errs.into_iter().map(|i| self.roster[i]));
        Ok(polys)
    }

    fn vanishing_at(&self, j: usize) -> FieldElement {
        self.p
            .domain
            .data_vanishing_poly(self.f)
            .eval(self.f, self.p.domain.alpha(j))
    }
}

fn random_poly<R: Rng + ?Sized>(f: &PrimeField, degree: usize, rng: &mut R) -> FieldPoly {
    FieldPoly::new(f.random_vec(rng, degree + 1))
}

fn encode_vec(v: &[FieldElement]) -> Vec<u8> {
    let mut w = WireWriter::new();
    w.fe_vec(v);
    w.finish()
}

/// Runs one round over a fresh network and returns its report and transcript.
pub fn run_round(
    params: &ProtocolParams,
    input: &RoundInput,
    adv: &RoundAdversary,
) -> Result<(RoundReport, Transcript)> {
    let spec = &params.spec;
    let f = &params.field;
    let round = input.round;
    if input.g0.len() != spec.d {
        return Err(Error::Shape(format!(
            "g0 has length {}, expected d = {}",
            input.g0.len(),
            spec.d
        )));
    }
    if let Some((i, u)) = input.updates.iter().find(|(_, u)| u.len() != spec.d) {
        return Err(Error::Shape(format!(
            "update of party {i} has length {}, expected {}",
            u.len(),
            spec.d
        )));
    }
    for a in &adv.attacks {
        a.validate(spec.n, spec.b, &adv.dropouts)?;
    }
    adv.dropouts.validate(spec.n, spec.p_drop)?;

    let roster: Vec<usize> = (1..=spec.n)
        .filter(|j| !input.excluded.contains(j))
        .collect();
    let mut e = Engine {
        p: params,
        f,
        round,
        seed: input.seed,
        attacks: &adv.attacks,
        dropouts: &adv.dropouts,
        b_live: spec.b.saturating_sub(spec.n - roster.len()),
        roster,
        net: SimNet::new(spec.n),
        identified: BTreeSet::new(),
        disqualified: BTreeMap::new(),
        dropped: BTreeSet::new(),
    };
    let dd = params.lcc_degree();
    let m = spec.m;
    let big_l = params.slot_len();
    let mut timing = Vec::new();

    // Share: g0 in the clear, then every update through VSS.
    let clock = Instant::now();
    e.enter(Phase::Share);
    let msg = e.msg(
        Phase::Share,
        FEDERATOR,
        None,
        MsgKind::Model,
        encode_vec(&input.g0),
    );
    e.net.send(msg);
    let inbox = e.net.deliver();
    let g0 = inbox
        .broadcasts(MsgKind::Model)
        .find(|m| m.sender == FEDERATOR)
        .map(|m| WireReader::new(&m.payload).fe_vec(f))
        .transpose()?
        .ok_or_else(|| Error::Wire("missing federator model broadcast".into()))?;
    let mut dealings = BTreeMap::new();
    for j in e.active() {
        let Some(u) = input.updates.get(&j) else {
            continue;
        };
        let mut rng = party_rng(input.seed, j, round, "share");
        let values = match e.attack(j, Phase::Share) {
            Some(AttackKind::RandomShares) => f.random_vec(&mut rng, u.len()),
            _ => u.clone(),
        };
        let bundle = SecretBundle::partition(f, &values, m, spec.t, &mut rng)?;
        let polys = bundle.encoding_polys(f, &params.domain)?;
        dealings.insert(j, vec![Dealing { tag: 0, polys }]);
    }
    let shapes = vec![DealingShape {
        tag: 0,
        degree: dd,
        coords: big_l,
    }];
    let share_out = e
        .run_session(Phase::Share, MsgKind::Deal, shapes, &dealings, "share")
        .map_err(abort(round, Phase::Share))?;
    let dealers: Vec<usize> = share_out.accepted_dealers(0).into_iter().collect();
    timing.push((Phase::Share, clock.elapsed().as_secs_f64() * 1e3));

    // NormCheck: re-randomized squared norms, decoded by the federator.
    let clock = Instant::now();
    e.enter(Phase::NormCheck);
    let (excluded, norms) =
        norm_check(&mut e, &share_out, &dealers).map_err(abort(round, Phase::NormCheck))?;
    let contributors: Vec<usize> = dealers
        .iter()
        .copied()
        .filter(|i| !excluded.contains(i))
        .collect();
    timing.push((Phase::NormCheck, clock.elapsed().as_secs_f64() * 1e3));
    if contributors.is_empty() {
        return Err(abort(round, Phase::Compute)(Error::LowTrustDenominator));
    }

    // Compute: convert <g0, g_i> to a fresh sharing, apply h, form the sums.
    let clock = Instant::now();
    e.enter(Phase::Compute);
    let sums =
        compute(&mut e, &share_out, &g0, &contributors).map_err(abort(round, Phase::Compute))?;
    timing.push((Phase::Compute, clock.elapsed().as_secs_f64() * 1e3));

    // Mask and Reconstruct, retried while some slot has lambda Sigma1 = 0.
    let mut mask_ms = 0.0;
    let mut rec_ms = 0.0;
    let mut attempt = 0;
    let (masked_sigma1, quotients) = loop {
        if attempt == LAMBDA_ATTEMPTS {
            return Err(abort(round, Phase::Reconstruct)(Error::LowTrustDenominator));
        }
        let clock = Instant::now();
        e.enter(Phase::Mask);
        let masked = mask(&mut e, &sums, attempt).map_err(abort(round, Phase::Mask))?;
        mask_ms += clock.elapsed().as_secs_f64() * 1e3;
        let clock = Instant::now();
        e.enter(Phase::Reconstruct);
        let rec = reconstruct(&mut e, &masked).map_err(abort(round, Phase::Reconstruct))?;
        rec_ms += clock.elapsed().as_secs_f64() * 1e3;
        attempt += 1;
        if let Some(r) = rec {
            break r;
        }
    };
    timing.push((Phase::Mask, mask_ms));
    timing.push((Phase::Reconstruct, rec_ms));

    let aggregate = finish_aggregate(params, &quotients, input.g0_norm, true)
        .map_err(abort(round, Phase::Reconstruct))?;
    let live = e
        .roster
        .iter()
        .copied()
        .filter(|j| !e.dropped.contains(j))
        .collect();
    let report = RoundReport {
        round,
        live,
        dropped: e.dropped.clone(),
        excluded,
        disqualified: e.disqualified.clone(),
        contributors: contributors.into_iter().collect(),
        norms,
        identified: e.identified.clone(),
        masked_sigma1,
        lambda_attempts: attempt,
        aggregate,
        timing_ms: timing,
    };
    Ok((report, e.net.into_transcript()))
}

fn norm_check(
    e: &mut Engine<'_>,
    share_out: &VssOutcome,
    dealers: &[usize],
) -> Result<(BTreeSet<usize>, BTreeMap<usize, BigInt>)> {
    let f = e.f;
    let dd = e.p.lcc_degree();
    let m = e.p.spec.m;
    if dealers.is_empty() {
        return Err(Error::InsufficientRedundancy {
            needed: 1,
            available: 0,
        });
    }
    let zdeg = 2 * dd - m;
    let mut dealings = BTreeMap::new();
    for j in e.active() {
        let mut rng = party_rng(e.seed, j, e.round, "zero-norm");
        let polys = (0..dealers.len())
            .map(|_| random_poly(f, zdeg, &mut rng))
            .collect();
        dealings.insert(j, vec![Dealing { tag: 0, polys }]);
    }
    let shapes = vec![DealingShape {
        tag: 0,
        degree: zdeg,
        coords: dealers.len(),
    }];
    let zc = e.run_session(
        Phase::NormCheck,
        MsgKind::ZeroContrib,
        shapes,
        &dealings,
        "zero-norm",
    )?;
    let zc_dealers = zc.accepted_dealers(0);

    for j in e.active() {
        let v = e.vanishing_at(j);
        let vals: Vec<FieldElement> = dealers
            .iter()
            .enumerate()
            .map(|(idx, &i)| {
                let sq = share_out
                    .share(j, i, 0)
                    .map(|s| f.sum(&s.iter().map(|x| f.square(x)).collect::<Vec<_>>()))
                    .unwrap_or_else(|| f.zero());
                let z = f.sum(
                    &zc_dealers
                        .iter()
                        .filter_map(|&k| zc.share(j, k, 0).map(|s| s[idx].clone()))
                        .collect::<Vec<_>>(),
                );
                f.add(&sq, &f.mul(&v, &z))
            })
            .collect();
        let vals = e.tamper(j, Phase::NormCheck, vals);
        let msg = e.msg(
            Phase::NormCheck,
            j,
            Some(FEDERATOR),
            MsgKind::NormShare,
            encode_vec(&vals),
        );
        e.net.send(msg);
    }
    let inbox = e.net.deliver();
    let got = e.collect(&inbox, FEDERATOR, MsgKind::NormShare, dealers.len());
    let polys = e.decode(&got, 0..dealers.len(), 2 * dd)?;
    let mut excluded = BTreeSet::new();
    let mut norms = BTreeMap::new();
    for (poly, &i) in polys.iter().zip(dealers) {
        let s = f.sum(
            &e.p.domain
                .data_points()
                .iter()
                .map(|b| poly.eval(f, b))
                .collect::<Vec<_>>(),
        );
        let norm = f.lift(&s);
        if !e.p.norm_ok(&norm) {
            excluded.insert(i);
        }
        norms.insert(i, norm);
    }
    let ex: Vec<usize> = excluded.iter().copied().collect();
    let mut w = WireWriter::new();
    w.usize_vec(&ex);
    let msg = e.msg(
        Phase::NormCheck,
        FEDERATOR,
        None,
        MsgKind::NormVerdict,
        w.finish(),
    );
    e.net.send(msg);
    let inbox = e.net.deliver();
    let verdict = inbox
        .broadcasts(MsgKind::NormVerdict)
        .find(|m| m.sender == FEDERATOR)
        .map(|m| WireReader::new(&m.payload).usize_vec())
        .transpose()?
        .unwrap_or_default();
    Ok((verdict.into_iter().collect(), norms))
}

/// Per-party shares of `Sigma1` (scalar) and `Sigma2` (length `L`).
struct Sums {
    sigma1: BTreeMap<usize, FieldElement>,
    sigma2: BTreeMap<usize, Vec<FieldElement>>,
}

fn compute(
    e: &mut Engine<'_>,
    share_out: &VssOutcome,
    g0: &[FieldElement],
    contributors: &[usize],
) -> Result<Sums> {
    let f = e.f;
    let p = e.p;
    let dd = p.lcc_degree();
    let m = p.spec.m;
    let big_l = p.slot_len();
    let dw = dd + m - 1;
    let mut g0_pad = g0.to_vec();
    g0_pad.resize(big_l * m, f.zero());
    let data = p.domain.data_points();

    // G0_c(alpha_j) for every party, G0 being the mask-free interpolant of g0.
    let g0_at = |j: usize| -> Result<Vec<FieldElement>> {
        let lc = lagrange_coefficients(f, data, p.domain.alpha(j))?;
        Ok((0..big_l)
            .map(|c| {
                f.sum(
                    &lc.iter()
                        .enumerate()
                        .map(|(l, w)| f.mul(w, &g0_pad[l * big_l + c]))
                        .collect::<Vec<_>>(),
                )
            })
            .collect())
    };

    // Sub-share w_i(alpha_j) = <G0(alpha_j), g_i(alpha_j)> as replicated scalars.
    let mut dealings = BTreeMap::new();
    for j in e.active() {
        let gj = g0_at(j)?;
        let mut rng = party_rng(e.seed, j, e.round, "subshare");
        let random = matches!(e.attack(j, Phase::Compute), Some(AttackKind::RandomShares));
        let mut polys = Vec::with_capacity(contributors.len());
        for &i in contributors {
            let w = match share_out.share(j, i, 0) {
                Some(s) if !random => f.dot(&gj, s),
                _ => f.random(&mut rng),
            };
            let bundle = SecretBundle::replicated_scalar(f, &w, m, p.spec.t, &mut rng);
            polys.extend(bundle.encoding_polys(f, &p.domain)?);
        }
        dealings.insert(j, vec![Dealing { tag: 0, polys }]);
    }
    let shapes = vec![DealingShape {
        tag: 0,
        degree: dd,
        coords: contributors.len(),
    }];
    let sub = e.run_session(
        Phase::Compute,
        MsgKind::Subshare,
        shapes,
        &dealings,
        "subshare",
    )?;
    let s_set: Vec<usize> = sub.accepted_dealers(0).into_iter().collect();
    let newly_bad = sub.disqualified.len();
    let b_conv = e.b_live.saturating_sub(newly_bad);
    let need = dw + 2 * b_conv + 1;
    if s_set.len() < need {
        return Err(Error::InsufficientRedundancy {
            needed: need,
            available: s_set.len(),
        });
    }

    // Parity checks H[r][j] = v_j x_j^r annihilate degree-dw codewords.
    let xs: Vec<FieldElement> = s_set.iter().map(|&j| p.domain.alpha(j).clone()).collect();
    let v = barycentric_weights(f, &xs)?;
    let rows = s_set.len() - dw - 1;
    let h: Vec<Vec<FieldElement>> = (0..rows)
        .map(|r| {
            xs.iter()
                .zip(&v)
                .map(|(x, vj)| f.mul(vj, &f.pow(x, r as u64)))
                .collect()
        })
        .collect();
    let sub_of = |k: usize, j: usize, i: usize| -> FieldElement {
        sub.share(k, j, 0)
            .map(|s| s[i].clone())
            .unwrap_or_else(|| f.zero())
    };

    // Syndromes of the sub-shared values, opened by broadcast.
    let nc = contributors.len();
    let mut errors: Vec<Vec<Vec<FieldElement>>> = vec![vec![vec![f.zero(); s_set.len()]; m]; nc];
    if rows > 0 {
        for k in e.active() {
            let mut vals = Vec::with_capacity(nc * rows);
            for i in 0..nc {
                for hr in &h {
                    let terms: Vec<FieldElement> = s_set
                        .iter()
                        .zip(hr)
                        .map(|(&j, hrj)| f.mul(hrj, &sub_of(k, j, i)))
                        .collect();
                    vals.push(f.sum(&terms));
                }
            }
            let vals = e.tamper(k, Phase::Compute, vals);
            let msg = e.msg(
                Phase::Compute,
                k,
                None,
                MsgKind::Syndrome,
                encode_vec(&vals),
            );
            e.net.send(msg);
        }
        let inbox = e.net.deliver();
        let got = e.collect(&inbox, FEDERATOR, MsgKind::Syndrome, nc * rows);
        let synd = e.decode(&got, 0..nc * rows, dd)?;
        for i in 0..nc {
            for (l, beta) in data.iter().enumerate() {
                let s: Vec<FieldElement> = (0..rows)
                    .map(|r| synd[i * rows + r].eval(f, beta))
                    .collect();
                if s.iter().all(FieldElement::is_zero) {
                    continue;
                }
                let y = f.solve_linear(h.clone(), s).ok_or(Error::DecodeFailure)?;
                let cw = crate::rs::NoisyCodeword {
                    entries: xs
                        .iter()
                        .cloned()
                        .zip(y.iter().cloned().map(Some))
                        .collect(),
                    degree_bound: dw,
                };
                let dec = crate::rs::rs_decode(f, &cw, b_conv)?;
                for (pos, x) in xs.iter().enumerate() {
                    errors[i][l][pos] = f.sub(&y[pos], &dec.poly.eval(f, x));
                }
                e.identified
                    .extend(dec.error_positions.iter().map(|&pos| s_set[pos]));
            }
        }
    }

    // Fresh degree-D replicated sharing of x_i from the first dw+1 sub-sharers.
    let tpos: Vec<usize> = (0..=dw).collect();
    let xt: Vec<FieldElement> = tpos.iter().map(|&pos| xs[pos].clone()).collect();
    let mut coef = vec![f.zero(); tpos.len()];
    for beta in data {
        for (c, w) in coef.iter_mut().zip(lagrange_coefficients(f, &xt, beta)?) {
            *c = f.add(c, &w);
        }
    }
    let mut sums = Sums {
        sigma1: BTreeMap::new(),
        sigma2: BTreeMap::new(),
    };
    for k in e.active() {
        let lb = lagrange_coefficients(f, p.domain.betas(), p.domain.alpha(k))?;
        let mut s1 = f.zero();
        let mut s2 = vec![f.zero(); big_l];
        for (i, &dealer) in contributors.iter().enumerate() {
            let mut x = f.zero();
            for (&pos, c) in tpos.iter().zip(&coef) {
                let corr = f.sum(
                    &(0..m)
                        .map(|l| f.mul(&errors[i][l][pos], &lb[l]))
                        .collect::<Vec<_>>(),
                );
                let val = f.sub(&sub_of(k, s_set[pos], i), &corr);
                x = f.add(&x, &f.mul(c, &val));
            }
            let hx = p.embedded.eval_field(f, &x);
            s1 = f.add(&s1, &hx);
            if let Some(g) = share_out.share(k, dealer, 0) {
                for (acc, gc) in s2.iter_mut().zip(g) {
                    *acc = f.add(acc, &f.mul(&hx, gc));
                }
            }
        }
        sums.sigma1.insert(k, s1);
        sums.sigma2.insert(k, s2);
    }
    Ok(sums)
}

/// Per-party `[lambda Sigma1, lambda Sigma2...]`, re-randomized.
fn mask(
    e: &mut Engine<'_>,
    sums: &Sums,
    attempt: u32,
) -> Result<BTreeMap<usize, Vec<FieldElement>>> {
    let f = e.f;
    let p = e.p;
    let dd = p.lcc_degree();
    let m = p.spec.m;
    let k = p.spec.k;
    let big_l = p.slot_len();
    let d1 = (k + 1) * dd - m;
    let d2 = (k + 2) * dd - m;
    let label = format!("lambda-{attempt}");
    let mut dealings = BTreeMap::new();
    for j in e.active() {
        let mut rng = party_rng(e.seed, j, e.round, &label);
        let lambda = match e.attack(j, Phase::Mask) {
            // a consistent sharing whose slots need not agree
            Some(AttackKind::RandomShares) => SecretBundle::new(
                (0..m).map(|_| vec![f.random(&mut rng)]).collect(),
                (0..p.spec.t).map(|_| vec![f.random(&mut rng)]).collect(),
            )?,
            _ => SecretBundle::replicated_scalar(f, &f.random(&mut rng), m, p.spec.t, &mut rng),
        };
        dealings.insert(
            j,
            vec![
                Dealing {
                    tag: 0,
                    polys: lambda.encoding_polys(f, &p.domain)?,
                },
                Dealing {
                    tag: 1,
                    polys: vec![random_poly(f, d1, &mut rng)],
                },
                Dealing {
                    tag: 2,
                    polys: (0..big_l).map(|_| random_poly(f, d2, &mut rng)).collect(),
                },
            ],
        );
    }
    let shapes = vec![
        DealingShape {
            tag: 0,
            degree: dd,
            coords: 1,
        },
        DealingShape {
            tag: 1,
            degree: d1,
            coords: 1,
        },
        DealingShape {
            tag: 2,
            degree: d2,
            coords: big_l,
        },
    ];
    let out = e.run_session(Phase::Mask, MsgKind::LambdaDeal, shapes, &dealings, &label)?;
    let mut masked = BTreeMap::new();
    for j in e.active() {
        let (Some(s1), Some(s2)) = (sums.sigma1.get(&j), sums.sigma2.get(&j)) else {
            continue;
        };
        let add_up = |tag: u8, len: usize| -> Vec<FieldElement> {
            let mut acc = vec![f.zero(); len];
            for dealer in out.accepted_dealers(tag) {
                if let Some(s) = out.share(j, dealer, tag) {
                    for (a, x) in acc.iter_mut().zip(s) {
                        *a = f.add(a, x);
                    }
                }
            }
            acc
        };
        let lam = add_up(0, 1).remove(0);
        let v = e.vanishing_at(j);
        let z1 = add_up(1, 1).remove(0);
        let z2 = add_up(2, big_l);
        let mut vals = Vec::with_capacity(1 + big_l);
        vals.push(f.add(&f.mul(&lam, s1), &f.mul(&v, &z1)));
        vals.extend(
            s2.iter()
                .zip(&z2)
                .map(|(x, z)| f.add(&f.mul(&lam, x), &f.mul(&v, z))),
        );
        masked.insert(j, vals);
    }
    Ok(masked)
}

/// Decodes the masked sums; `None` asks for a fresh `lambda`.
#[allow(clippy::type_complexity)]
fn reconstruct(
    e: &mut Engine<'_>,
    masked: &BTreeMap<usize, Vec<FieldElement>>,
) -> Result<Option<(Vec<FieldElement>, Vec<FieldElement>)>> {
    let f = e.f;
    let p = e.p;
    let dd = p.lcc_degree();
    let k = p.spec.k;
    let big_l = p.slot_len();
    for j in e.active() {
        let Some(vals) = masked.get(&j) else { continue };
        let vals = e.tamper(j, Phase::Reconstruct, vals.clone());
        let msg = e.msg(
            Phase::Reconstruct,
            j,
            Some(FEDERATOR),
            MsgKind::Masked,
            encode_vec(&vals),
        );
        e.net.send(msg);
    }
    let inbox = e.net.deliver();
    let got = e.collect(&inbox, FEDERATOR, MsgKind::Masked, 1 + big_l);
    let s1 = e.decode(&got, 0..1, (k + 1) * dd)?;
    let s2 = e.decode(&got, 1..1 + big_l, (k + 2) * dd)?;
    let data = p.domain.data_points();
    let ms1: Vec<FieldElement> = data.iter().map(|b| s1[0].eval(f, b)).collect();
    if ms1.iter().any(FieldElement::is_zero) {
        return Ok(None);
    }
    let inv = f.batch_inv(&ms1)?;
    let mut quotients = Vec::with_capacity(p.spec.d);
    'slots: for (l, beta) in data.iter().enumerate() {
        for poly in &s2 {
            if quotients.len() == p.spec.d {
                break 'slots;
            }
            quotients.push(f.mul(&poly.eval(f, beta), &inv[l]));
        }
    }
    Ok(Some((ms1, quotients)))
}

/// Lifts field quotients to fractions and the real aggregate.
///
/// `secure` selects the guard: the federator only sees the quotient, so the
/// secure guard bounds the aggregate's norm instead of `Sigma1`.
pub fn finish_aggregate(
    params: &ProtocolParams,
    quotients: &[FieldElement],
    g0_norm: f64,
    secure: bool,
) -> Result<AggregateResult> {
    let (b1, b2) = params.guards.rational_bounds();
    let q = params.spec.q;
    let rationals = quotients
        .iter()
        .map(|c| rational_reconstruct(&params.field, c, &b2, &b1))
        .collect::<Result<Vec<_>>>()?;
    let g: Vec<f64> = rationals
        .iter()
        .map(|(a, b)| dequantize_rational(a, b, q, g0_norm))
        .collect();
    let low_trust = secure && {
        let ratio: f64 = rationals
            .iter()
            .map(|(a, b)| ratio_to_f64(a, b).powi(2))
            .sum::<f64>()
            .sqrt()
            / q as f64;
        !ratio.is_finite() || ratio > LOW_TRUST_GAIN
    };
    Ok(AggregateResult {
        g,
        quotients: quotients.to_vec(),
        rationals,
        low_trust,
    })
}

/// Single-machine evaluation of the same aggregation on the same quantized
/// inputs, in exact integer arithmetic.
#[derive(Clone, Debug, PartialEq)]
pub struct PlainAggregate {
    pub norms: BTreeMap<usize, BigInt>,
    pub excluded: BTreeSet<usize>,
    pub trust: BTreeMap<usize, BigInt>,
    pub sigma1: BigInt,
    pub sigma2: Vec<BigInt>,
    pub aggregate: AggregateResult,
}

pub fn plaintext_aggregate(
    params: &ProtocolParams,
    g0: &[FieldElement],
    g0_norm: f64,
    updates: &BTreeMap<usize, Vec<FieldElement>>,
) -> Result<PlainAggregate> {
    let f = &params.field;
    let d = params.spec.d;
    let lift = |v: &[FieldElement]| -> Vec<BigInt> { v.iter().map(|x| f.lift(x)).collect() };
    let g0i = lift(g0);
    let mut norms = BTreeMap::new();
    let mut excluded = BTreeSet::new();
    let mut trust = BTreeMap::new();
    let mut sigma1 = BigInt::zero();
    let mut sigma2 = vec![BigInt::zero(); d];
    for (&i, u) in updates {
        let ui = lift(u);
        let norm: BigInt = ui.iter().map(|x| x * x).sum();
        let ok = params.norm_ok(&norm);
        norms.insert(i, norm);
        if !ok {
            excluded.insert(i);
            continue;
        }
        let x: BigInt = g0i.iter().zip(&ui).map(|(a, b)| a * b).sum();
        let hx = params.embedded.eval_int(&x);
        sigma1 += &hx;
        for (acc, c) in sigma2.iter_mut().zip(&ui) {
            *acc += &hx * c;
        }
        trust.insert(i, hx);
    }
    let scale = BigUint::from(params.embedded.coeff_scale)
        * BigUint::from(params.spec.q).pow(2 * params.spec.k as u32);
    let mean_trust = ratio_to_f64(&sigma1, &scale) / params.spec.n as f64;
    if sigma1.is_zero() {
        return Err(Error::LowTrustDenominator);
    }
    let den_sign = if sigma1.is_negative() {
        -BigInt::one()
    } else {
        BigInt::one()
    };
    let mut rationals = Vec::with_capacity(d);
    let mut quotients = Vec::with_capacity(d);
    let s1_inv = f.inv(&f.from_bigint(&sigma1))?;
    for s2 in &sigma2 {
        let g = s2.gcd(&sigma1);
        let num = s2 / &g * &den_sign;
        let den = (&sigma1 / &g * &den_sign).magnitude().clone();
        rationals.push((num, den));
        quotients.push(f.mul(&f.from_bigint(s2), &s1_inv));
    }
    let q = params.spec.q;
    let g: Vec<f64> = rationals
        .iter()
        .map(|(a, b)| dequantize_rational(a, b, q, g0_norm))
        .collect();
    Ok(PlainAggregate {
        norms,
        excluded,
        trust,
        sigma1,
        sigma2,
        aggregate: AggregateResult {
            g,
            quotients,
            rationals,
            low_trust: mean_trust.abs() < LOW_TRUST_MEAN,
        },
    })
}

/// Random round input: a unit `g0` and, for every party, `g0 + spread * noise`
/// renormalized, all quantized with per-party streams.
pub fn synthetic_input(
    params: &ProtocolParams,
    seed: u64,
    round: u64,
    spread: f64,
) -> Result<RoundInput> {
    let d = params.spec.d;
    let q = params.spec.q;
    let f = &params.field;
    let mut rng = derive_rng(seed, &["synthetic-input", &round.to_string()]);
    let unit = |rng: &mut rand_chacha::ChaCha20Rng| -> Result<Vec<f64>> {
        loop {
            let g: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            match normalize(&g) {
                Err(Error::ZeroUpdate) => continue,
                other => return other,
            }
        }
    };
    let base = unit(&mut rng)?;
    let g0 = quantize(
        f,
        &base,
        q,
        &mut party_rng(seed, FEDERATOR, round, "quantize"),
    )?;
    let mut updates = BTreeMap::new();
    for i in 1..=params.spec.n {
        let noise = unit(&mut rng)?;
        let mixed: Vec<f64> = base
            .iter()
            .zip(&noise)
            .map(|(a, b)| a + spread * b)
            .collect();
        let Ok(u) = normalize(&mixed) else { continue };
        updates.insert(
            i,
            quantize(f, &u, q, &mut party_rng(seed, i, round, "quantize"))?,
        );
    }
    Ok(RoundInput {
        round,
        seed: derive_seed(seed, &["protocol"]),
        g0,
        g0_norm: 1.0,
        updates,
        excluded: BTreeSet::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::Dropout;
    use crate::quant::{normalize, quantize};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn small(
        n: usize,
        b: usize,
        t: usize,
        p_drop: usize,
        m: usize,
        k: usize,
        d: usize,
    ) -> ProtocolParams {
        let mut spec = ParamSpec::new(n, b, t, p_drop, m, k, d);
        spec.q = 16;
        spec.epsilon = 0.3;
        ProtocolParams::new(spec).unwrap()
    }

    fn input(p: &ProtocolParams, seed: u64) -> RoundInput {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let d = p.spec.d;
        let unit = |rng: &mut ChaCha20Rng| {
            let g: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            normalize(&g).unwrap()
        };
        let base = unit(&mut rng);
        let g0 = quantize(&p.field, &base, p.spec.q, &mut rng).unwrap();
        let updates = (1..=p.spec.n)
            .map(|i| {
                let noise = unit(&mut rng);
                let mixed: Vec<f64> = base.iter().zip(&noise).map(|(a, b)| a + 0.5 * b).collect();
                let u = normalize(&mixed).unwrap();
                (i, quantize(&p.field, &u, p.spec.q, &mut rng).unwrap())
            })
            .collect();
        RoundInput {
            round: 0,
            seed,
            g0,
            g0_norm: 1.0,
            updates,
            excluded: BTreeSet::new(),
        }
    }

    #[test]
    fn min_users_examples() {
        assert_eq!(min_users(0, 0, 1, 1, 0), 3);
        assert_eq!(min_users(2, 2, 1, 2, 1), 14);
        assert_eq!(min_users(20, 6, 1, 1, 0), 49);
        assert_eq!(norm_check_min_users(1, 1, 1, 0), 5);
    }

    #[test]
    fn theorem_bound_is_enforced() {
        let spec = ParamSpec::new(13, 2, 2, 1, 1, 2, 4);
        let msg = spec.check().unwrap_err().to_string();
        assert!(msg.contains("n ≥ 2b+(k+2)(m+t−1)+p+1"), "{msg}");
        assert!(ParamSpec::new(14, 2, 2, 1, 1, 2, 4).check().is_ok());
    }

    #[test]
    fn honest_round_matches_plaintext() {
        for (m, t) in [(1, 1), (2, 1), (1, 2)] {
            let p = small(12, 1, t, 0, m, 2, 5);
            let inp = input(&p, 3 + m as u64);
            let (rep, tr) = run_round(&p, &inp, &RoundAdversary::default()).unwrap();
            let plain = plaintext_aggregate(&p, &inp.g0, 1.0, &inp.updates).unwrap();
            assert_eq!(
                rep.aggregate.quotients, plain.aggregate.quotients,
                "m={m} t={t}"
            );
            assert_eq!(rep.aggregate.rationals, plain.aggregate.rationals);
            assert!(rep.identified.is_empty());
            assert!(!tr.is_empty());
        }
    }

    #[test]
    fn byzantine_and_dropouts_do_not_change_the_quotient() {
        let p = small(12, 1, 1, 1, 1, 2, 4);
        let inp = input(&p, 9);
        let (honest, _) = run_round(&p, &inp, &RoundAdversary::default()).unwrap();
        for kind in [AttackKind::RandomShares, AttackKind::WrongComputation] {
            let adv = RoundAdversary {
                attacks: vec![AttackSpec::new(kind.clone(), [4]).from_phase(Phase::NormCheck)],
                dropouts: DropoutSchedule::new(vec![Dropout {
                    party: 7,
                    round: 0,
                    from_phase: Phase::Compute,
                }]),
            };
            let (rep, _) = run_round(&p, &inp, &adv).unwrap();
            assert_eq!(
                rep.aggregate.quotients, honest.aggregate.quotients,
                "{kind}"
            );
            assert!(
                rep.identified.is_subset(&BTreeSet::from([4])),
                "{kind}: {:?}",
                rep.identified
            );
            assert!(rep.identified.contains(&4));
        }
    }

    #[test]
    fn inconsistent_dealer_is_disqualified() {
        let p = small(10, 1, 1, 0, 1, 2, 3);
        let inp = input(&p, 5);
        let adv = RoundAdversary {
            attacks: vec![AttackSpec::new(AttackKind::InconsistentDeal, [2])],
            ..Default::default()
        };
        let (rep, _) = run_round(&p, &inp, &adv).unwrap();
        assert!(rep.disqualified.contains_key(&2));
        assert!(!rep.contributors.contains(&2));
        let mut rest = inp.updates.clone();
        rest.remove(&2);
        let plain = plaintext_aggregate(&p, &inp.g0, 1.0, &rest).unwrap();
        assert_eq!(rep.aggregate.quotients, plain.aggregate.quotients);
    }

    #[test]
    fn federator_sees_only_its_phases() {
        let p = small(10, 1, 1, 0, 1, 2, 3);
        let (_, tr) = run_round(&p, &input(&p, 1), &RoundAdversary::default()).unwrap();
        for e in tr.view_of(&BTreeSet::from([FEDERATOR])) {
            if !e.msg.is_broadcast() {
                assert!(
                    matches!(e.msg.phase, Phase::NormCheck | Phase::Reconstruct),
                    "{:?}",
                    e.msg.kind
                );
            }
        }
    }
}
