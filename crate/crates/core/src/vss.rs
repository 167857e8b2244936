//! Verifiable secret sharing over symmetric bivariate polynomials.
//!
//! A dealer hides its encoding polynomial `u(z)` (one per coordinate) as
//! `S(z, 0) = u(z)` in a symmetric `S(x, y)` of degree `D` in each variable.
//! Party `j` receives the row `f_j(x) = S(x, alpha_j)`; its induced share is
//! `f_j(0) = u(alpha_j)`. Rows are cross-checked pairwise
//! (`f_i(alpha_j) = f_j(alpha_i)`), conflicts are settled by public points
//! and row reveals, and a dealer is disqualified when it fails to answer, its
//! public answers contradict each other, or more than `b` rows had to be
//! revealed.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{FieldElement, FieldPoly, PrimeField};
use crate::lcc::EvalDomain;
use crate::net::{Message, MsgKind, Phase, SimNet};
use crate::rng::derive_rng;
use crate::wire::{WireReader, WireWriter};

/// `(dealer, tag)`.
pub type DealingId = (usize, u8);

/// Public shape of a dealing: every dealer in a session deals each shape once.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DealingShape {
    pub tag: u8,
    pub degree: usize,
    pub coords: usize,
}

/// A dealer's secret polynomials for one shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dealing {
    pub tag: u8,
    pub polys: Vec<FieldPoly>,
}

/// Coefficient matrix `c[a][b] = c[b][a]` with `c[a][0] = u_a`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetricBivariate {
    coeffs: Vec<Vec<FieldElement>>,
}

impl SymmetricBivariate {
    /// `free` fills `c[a][b]` for `1 <= a <= b <= degree` in row-major order.
    #[allow(clippy::needless_range_loop)]
    pub fn from_parts(
        f: &PrimeField,
        u: &FieldPoly,
        degree: usize,
        free: &[FieldElement],
    ) -> Result<Self> {
        if !u.degree_at_most(degree) {
            return Err(Error::Precondition(format!(
                "secret polynomial exceeds degree {degree}"
            )));
        }
        let need = degree * (degree + 1) / 2;
        if free.len() != need {
            return Err(Error::Shape(format!(
                "need {need} free coefficients, got {}",
                free.len()
            )));
        }
        let mut c = vec![vec![f.zero(); degree + 1]; degree + 1];
        for a in 0..=degree {
            c[a][0] = u.coeff(a);
            c[0][a] = u.coeff(a);
        }
        let mut it = free.iter();
        for a in 1..=degree {
            for b in a..=degree {
                let v = it.next().expect("counted above").clone();
                c[a][b] = v.clone();
                c[b][a] = v;
            }
        }
        Ok(SymmetricBivariate { coeffs: c })
    }

    pub fn random<R: Rng + ?Sized>(
        f: &PrimeField,
        u: &FieldPoly,
        degree: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let free = f.random_vec(rng, degree * (degree + 1) / 2);
        Self::from_parts(f, u, degree, &free)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `S(x, y)` at a point.
    pub fn eval(&self, f: &PrimeField, x: &FieldElement, y: &FieldElement) -> FieldElement {
        self.row(f, y).eval(f, x)
    }

    /// `S(x, y0)` as a polynomial in `x`.
    pub fn row(&self, f: &PrimeField, y0: &FieldElement) -> FieldPoly {
        FieldPoly::new(
            self.coeffs
                .iter()
                .map(|ca| FieldPoly::new(ca.clone()).eval(f, y0))
                .collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ComplaintKind {
    /// The peer's checkpoint disagrees with the accuser's row.
    Mismatch,
    /// No checkpoint arrived from the peer.
    Missing,
    /// The accuser's own row is absent or malformed.
    BadShare,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Complaint {
    pub dealer: usize,
    pub tag: u8,
    pub accuser: usize,
    pub peer: usize,
    pub kind: ComplaintKind,
}

/// Scripted misbehaviour inside a session.
#[derive(Clone, Debug, Default)]
pub struct VssAdversary {
    /// Dealer -> victim whose row gets `+1` on the constant coefficient.
    pub corrupt_rows: BTreeMap<usize, usize>,
    /// Dealers that sample `S` one degree too high.
    pub over_degree: BTreeSet<usize>,
    /// Parties sending uniformly random checkpoints.
    pub random_checkpoints: BTreeSet<usize>,
    /// Accuser -> peer: a bogus mismatch complaint against every dealing.
    pub false_complaints: BTreeMap<usize, usize>,
}

/// Static description of one VSS run.
#[derive(Clone, Debug)]
pub struct VssSession<'a> {
    pub field: &'a PrimeField,
    pub domain: &'a EvalDomain,
    pub round: u64,
    pub phase: Phase,
    pub deal_kind: MsgKind,
    pub shapes: Vec<DealingShape>,
    /// Maximum number of rows an honest dealer may have to reveal.
    pub b: usize,
    /// Parties taking part (dealing, checking, voting).
    pub participants: BTreeSet<usize>,
    pub seed: u64,
}

#[derive(Clone, Debug, Default)]
pub struct VssOutcome {
    pub accepted: BTreeSet<DealingId>,
    /// Dealer -> reason.
    pub disqualified: BTreeMap<usize, String>,
    /// Receiver -> dealing -> induced share vector.
    pub shares: BTreeMap<usize, BTreeMap<DealingId, Vec<FieldElement>>>,
    pub complaints: Vec<Complaint>,
    pub revealed: BTreeMap<DealingId, BTreeSet<usize>>,
}

impl VssOutcome {
    pub fn share(&self, receiver: usize, dealer: usize, tag: u8) -> Option<&[FieldElement]> {
        self.shares
            .get(&receiver)?
            .get(&(dealer, tag))
            .map(Vec::as_slice)
    }

    pub fn accepted_dealers(&self, tag: u8) -> BTreeSet<usize> {
        self.accepted
            .iter()
            .filter(|(_, t)| *t == tag)
            .map(|(d, _)| *d)
            .collect()
    }
}

struct DealerState {
    truth: BTreeMap<u8, Vec<SymmetricBivariate>>,
    sent: BTreeMap<(u8, usize), Vec<FieldPoly>>,
}

#[derive(Default)]
struct Dispute {
    points: BTreeMap<(usize, usize), Vec<FieldElement>>,
    revealed: BTreeMap<usize, Vec<FieldPoly>>,
    pending: BTreeSet<usize>,
    verdict: Option<String>,
}

fn pair(i: usize, j: usize) -> (usize, usize) {
    (i.min(j), i.max(j))
}

fn eval_rows(f: &PrimeField, rows: &[FieldPoly], x: &FieldElement) -> Vec<FieldElement> {
    rows.iter().map(|p| p.eval(f, x)).collect()
}

fn parse_or_none<T>(r: Result<T>) -> Option<T> {
    r.ok()
}

/// Runs one session of parallel dealings through `net`.
///
/// `dealings` maps each dealer to its secrets (one per shape). Parties the
/// network marks silent neither deal nor check.
pub fn run_vss(
    net: &mut SimNet,
    s: &VssSession<'_>,
    dealings: &BTreeMap<usize, Vec<Dealing>>,
    adv: &VssAdversary,
) -> Result<VssOutcome> {
    let f = s.field;
    let shape_of: BTreeMap<u8, DealingShape> = s.shapes.iter().map(|sh| (sh.tag, *sh)).collect();
    let msg = |sender: usize, receiver: Option<usize>, kind: MsgKind, payload: Vec<u8>| Message {
        round: s.round,
        phase: s.phase,
        sender,
        receiver,
        kind,
        payload,
    };

    // DEAL: announce tags by broadcast, send rows point to point.
    let mut dealers: BTreeMap<usize, DealerState> = BTreeMap::new();
    for (&k, ds) in dealings {
        if !s.participants.contains(&k) || net.is_silent(k) {
            continue;
        }
        let mut rng = derive_rng(
            s.seed,
            &[
                "vss",
                &s.round.to_string(),
                s.phase.as_str(),
                &k.to_string(),
            ],
        );
        let mut st = DealerState {
            truth: BTreeMap::new(),
            sent: BTreeMap::new(),
        };
        let mut announce = WireWriter::new();
        announce.u32(ds.len() as u32);
        for d in ds {
            let shape = shape_of
                .get(&d.tag)
                .ok_or_else(|| Error::Precondition(format!("unknown dealing tag {}", d.tag)))?;
            let degree = shape.degree + usize::from(adv.over_degree.contains(&k));
            let bivs = d
                .polys
                .iter()
                .map(|u| SymmetricBivariate::random(f, u, degree, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            announce.u8(d.tag);
            for &j in &s.participants {
                let mut rows: Vec<FieldPoly> =
                    bivs.iter().map(|sb| sb.row(f, s.domain.alpha(j))).collect();
                if adv.corrupt_rows.get(&k) == Some(&j) {
                    for r in rows.iter_mut() {
                        *r = r.add(f, &FieldPoly::constant(f.one()));
                    }
                }
                st.sent.insert((d.tag, j), rows);
            }
            st.truth.insert(d.tag, bivs);
        }
        net.send(msg(k, None, s.deal_kind, announce.finish()));
        for &j in &s.participants {
            let mut w = WireWriter::new();
            w.u32(ds.len() as u32);
            for d in ds {
                let rows = &st.sent[&(d.tag, j)];
                w.u8(d.tag).u32(rows.len() as u32);
                for r in rows {
                    w.poly(r);
                }
            }
            net.send(msg(k, Some(j), s.deal_kind, w.finish()));
        }
        dealers.insert(k, st);
    }
    let inbox = net.deliver();

    let mut announced: BTreeMap<usize, BTreeSet<u8>> = BTreeMap::new();
    for m in inbox.broadcasts(s.deal_kind) {
        if !s.participants.contains(&m.sender) {
            continue;
        }
        let mut r = WireReader::new(&m.payload);
        let tags = (|| -> Result<BTreeSet<u8>> {
            let c = r.u32()?;
            let mut t = BTreeSet::new();
            for _ in 0..c {
                t.insert(r.u8()?);
            }
            r.expect_end()?;
            Ok(t)
        })();
        // a garbled announcement still commits the dealer to every shape
        let tags = tags.unwrap_or_else(|_| shape_of.keys().copied().collect());
        announced.insert(m.sender, tags);
    }
    let announced_ids: BTreeSet<DealingId> = announced
        .iter()
        .flat_map(|(&k, tags)| tags.iter().map(move |&t| (k, t)))
        .filter(|(_, t)| shape_of.contains_key(t))
        .collect();

    // Each party's received rows.
    let mut rows: BTreeMap<usize, BTreeMap<DealingId, Vec<FieldPoly>>> = BTreeMap::new();
    for &j in &s.participants {
        let mut mine = BTreeMap::new();
        for m in inbox.of_kind(j, s.deal_kind) {
            if m.is_broadcast() || !announced.contains_key(&m.sender) {
                continue;
            }
            if let Some(parsed) = parse_or_none(parse_rows(f, &m.payload)) {
                for (tag, polys) in parsed {
                    let Some(shape) = shape_of.get(&tag) else {
                        continue;
                    };
                    if polys.len() == shape.coords
                        && polys.iter().all(|p| p.degree_at_most(shape.degree))
                    {
                        mine.insert((m.sender, tag), polys);
                    }
                }
            }
        }
        rows.insert(j, mine);
    }

    // CHECKPOINT
    let active: Vec<usize> = s
        .participants
        .iter()
        .copied()
        .filter(|&j| !net.is_silent(j))
        .collect();
    for &i in &active {
        let mut rng = derive_rng(
            s.seed,
            &[
                "vss-cp",
                &s.round.to_string(),
                s.phase.as_str(),
                &i.to_string(),
            ],
        );
        for &j in &s.participants {
            if j == i {
                continue;
            }
            let mut w = WireWriter::new();
            let mine = &rows[&i];
            w.u32(mine.len() as u32);
            for (&(k, tag), polys) in mine {
                let mut vals = eval_rows(f, polys, s.domain.alpha(j));
                if adv.random_checkpoints.contains(&i) {
                    vals = f.random_vec(&mut rng, vals.len());
                }
                w.u32(k as u32).u8(tag).fe_vec(&vals);
            }
            net.send(msg(i, Some(j), MsgKind::Checkpoint, w.finish()));
        }
    }
    let inbox = net.deliver();

    // COMPLAINT
    let active: Vec<usize> = active.into_iter().filter(|&j| !net.is_silent(j)).collect();
    for &j in &active {
        let mut received: BTreeMap<usize, BTreeMap<DealingId, Vec<FieldElement>>> = BTreeMap::new();
        for m in inbox.of_kind(j, MsgKind::Checkpoint) {
            if m.is_broadcast() || !s.participants.contains(&m.sender) {
                continue;
            }
            if let Some(cp) = parse_or_none(parse_checkpoints(f, &m.payload)) {
                received.insert(m.sender, cp);
            }
        }
        let mut complaints = Vec::new();
        for &(k, tag) in &announced_ids {
            let Some(own) = rows[&j].get(&(k, tag)) else {
                complaints.push(Complaint {
                    dealer: k,
                    tag,
                    accuser: j,
                    peer: j,
                    kind: ComplaintKind::BadShare,
                });
                continue;
            };
            for &i in &s.participants {
                if i == j {
                    continue;
                }
                let got = received.get(&i).and_then(|cp| cp.get(&(k, tag)));
                let kind = match got {
                    None => Some(ComplaintKind::Missing),
                    Some(v) if *v != eval_rows(f, own, s.domain.alpha(i)) => {
                        Some(ComplaintKind::Mismatch)
                    }
                    _ if adv.false_complaints.get(&j) == Some(&i) => Some(ComplaintKind::Mismatch),
                    _ => None,
                };
                if let Some(kind) = kind {
                    complaints.push(Complaint {
                        dealer: k,
                        tag,
                        accuser: j,
                        peer: i,
                        kind,
                    });
                }
            }
        }
        if !complaints.is_empty() {
            net.send(msg(
                j,
                None,
                MsgKind::Complaint,
                encode_complaints(&complaints),
            ));
        }
    }
    let inbox = net.deliver();
    let mut all_complaints = Vec::new();
    for m in inbox.broadcasts(MsgKind::Complaint) {
        if let Some(cs) = parse_or_none(parse_complaints(&m.payload)) {
            // an accuser can only speak for itself
            all_complaints.extend(
                cs.into_iter().filter(|c| {
                    c.accuser == m.sender && announced_ids.contains(&(c.dealer, c.tag))
                }),
            );
        }
    }

    // Open disputes from mismatches and bad shares; missing checkpoints are
    // recorded but need no public answer.
    let mut disputes: BTreeMap<DealingId, Dispute> = BTreeMap::new();
    let mut point_requests: BTreeMap<DealingId, BTreeSet<(usize, usize)>> = BTreeMap::new();
    for c in &all_complaints {
        let id = (c.dealer, c.tag);
        match c.kind {
            ComplaintKind::Mismatch => {
                point_requests
                    .entry(id)
                    .or_default()
                    .insert(pair(c.accuser, c.peer));
                disputes.entry(id).or_default();
            }
            ComplaintKind::BadShare => {
                disputes.entry(id).or_default().pending.insert(c.accuser);
            }
            ComplaintKind::Missing => {}
        }
    }

    let mut first = true;
    for _ in 0..=s.participants.len() + 1 {
        let needs_response = disputes.iter().any(|(id, d)| {
            d.verdict.is_none()
                && (!d.pending.is_empty() || (first && point_requests.contains_key(id)))
        });
        if !needs_response {
            break;
        }

        // RESPONSE: dealers publish requested points and rows.
        for (&k, st) in &dealers {
            if net.is_silent(k) {
                continue;
            }
            let mut pts = Vec::new();
            let mut reveals = Vec::new();
            for (&(dk, tag), d) in &disputes {
                if dk != k || d.verdict.is_some() {
                    continue;
                }
                if first {
                    for &(i, j) in point_requests.get(&(dk, tag)).into_iter().flatten() {
                        let v: Vec<_> = st.truth[&tag]
                            .iter()
                            .map(|sb| sb.eval(f, s.domain.alpha(i), s.domain.alpha(j)))
                            .collect();
                        pts.push((tag, i, j, v));
                    }
                }
                for &u in &d.pending {
                    if let Some(r) = st.sent.get(&(tag, u)) {
                        reveals.push((tag, u, r.clone()));
                    }
                }
            }
            if !pts.is_empty() || !reveals.is_empty() {
                net.send(msg(
                    k,
                    None,
                    MsgKind::Response,
                    encode_response(&pts, &reveals),
                ));
            }
        }
        let inbox = net.deliver();
        let mut answered: BTreeMap<usize, Response> = BTreeMap::new();
        for m in inbox.broadcasts(MsgKind::Response) {
            if let Some(r) = parse_or_none(parse_response(f, &m.payload)) {
                answered.insert(m.sender, r);
            }
        }

        // Public adjudication.
        for (&(k, tag), d) in disputes.iter_mut() {
            if d.verdict.is_some() {
                continue;
            }
            let shape = shape_of[&tag];
            let resp = answered.get(&k);
            if first {
                for &pr in point_requests.get(&(k, tag)).into_iter().flatten() {
                    match resp.and_then(|r| r.points.get(&(tag, pr))) {
                        Some(v) if v.len() == shape.coords => {
                            d.points.insert(pr, v.clone());
                        }
                        _ => d.verdict = Some(format!("no valid point for pair {pr:?}")),
                    }
                }
            }
            for u in std::mem::take(&mut d.pending) {
                match resp.and_then(|r| r.reveals.get(&(tag, u))) {
                    Some(r) => {
                        d.revealed.insert(u, r.clone());
                    }
                    None => d.verdict = Some(format!("row of party {u} not revealed")),
                }
            }
            if d.verdict.is_none() {
                d.verdict = check_public(f, s.domain, &shape, d, s.b).err();
            }
        }
        first = false;

        // VERDICT: parties flag dealings whose public data contradicts their row.
        let active: Vec<usize> = s
            .participants
            .iter()
            .copied()
            .filter(|&j| !net.is_silent(j))
            .collect();
        for &j in &active {
            let mut unhappy = Vec::new();
            for (&(k, tag), d) in &disputes {
                if d.verdict.is_some() || d.revealed.contains_key(&j) {
                    continue;
                }
                let Some(own) = rows[&j].get(&(k, tag)) else {
                    continue;
                };
                let bad_point = d.points.iter().any(|(&(a, c), v)| {
                    (a == j || c == j) && {
                        let other = if a == j { c } else { a };
                        eval_rows(f, own, s.domain.alpha(other)) != *v
                    }
                });
                let bad_row = d.revealed.iter().any(|(&u, r)| {
                    eval_rows(f, r, s.domain.alpha(j)) != eval_rows(f, own, s.domain.alpha(u))
                });
                if bad_point || bad_row {
                    unhappy.push((k, tag));
                }
            }
            if !unhappy.is_empty() {
                let mut w = WireWriter::new();
                w.u32(unhappy.len() as u32);
                for (k, tag) in unhappy {
                    w.u32(k as u32).u8(tag);
                }
                net.send(msg(j, None, MsgKind::Verdict, w.finish()));
            }
        }
        let inbox = net.deliver();
        let mut any_pending = false;
        for m in inbox.broadcasts(MsgKind::Verdict) {
            let Some(list) = parse_or_none(parse_verdict(&m.payload)) else {
                continue;
            };
            for id in list {
                if let Some(d) = disputes.get_mut(&id) {
                    if d.verdict.is_none() && !d.revealed.contains_key(&m.sender) {
                        d.pending.insert(m.sender);
                        any_pending = true;
                    }
                }
            }
        }
        if !any_pending {
            break;
        }
    }
    for d in disputes.values_mut() {
        if d.verdict.is_none() && !d.pending.is_empty() {
            d.verdict = Some("dispute did not settle".into());
        }
    }

    let mut out = VssOutcome {
        complaints: all_complaints,
        ..Default::default()
    };
    for (&(k, _), d) in &disputes {
        if let Some(reason) = &d.verdict {
            out.disqualified.entry(k).or_insert_with(|| reason.clone());
        }
    }
    for &(k, tag) in &announced_ids {
        if out.disqualified.contains_key(&k) {
            continue;
        }
        if announced[&k].len() != s.shapes.len() {
            out.disqualified
                .insert(k, "announced the wrong set of dealings".into());
            continue;
        }
        out.accepted.insert((k, tag));
    }
    out.accepted
        .retain(|(k, _)| !out.disqualified.contains_key(k));
    for &j in &s.participants {
        let mut mine = BTreeMap::new();
        for &id in &out.accepted {
            let d = disputes.get(&id);
            let row = d
                .and_then(|d| d.revealed.get(&j))
                .or_else(|| rows[&j].get(&id));
            if let Some(row) = row {
                mine.insert(id, eval_rows(f, row, &f.zero()));
            }
        }
        out.shares.insert(j, mine);
    }
    for (&id, d) in &disputes {
        if !d.revealed.is_empty() {
            out.revealed
                .insert(id, d.revealed.keys().copied().collect());
        }
    }
    Ok(out)
}

/// Checks a dispute's public data for internal consistency.
fn check_public(
    f: &PrimeField,
    domain: &EvalDomain,
    shape: &DealingShape,
    d: &Dispute,
    b: usize,
) -> std::result::Result<(), String> {
    if d.revealed.len() > b {
        return Err(format!(
            "{} rows revealed, more than b = {b}",
            d.revealed.len()
        ));
    }
    for (&u, r) in &d.revealed {
        if r.len() != shape.coords || r.iter().any(|p| !p.degree_at_most(shape.degree)) {
            return Err(format!("revealed row of party {u} is malformed"));
        }
    }
    for (&(i, j), v) in &d.points {
        for (a, c) in [(i, j), (j, i)] {
            if let Some(r) = d.revealed.get(&a) {
                if eval_rows(f, r, domain.alpha(c)) != *v {
                    return Err(format!(
                        "revealed row of party {a} contradicts point ({i},{j})"
                    ));
                }
            }
        }
    }
    for (&u, ru) in &d.revealed {
        for (&w, rw) in d.revealed.range(u + 1..) {
            if eval_rows(f, ru, domain.alpha(w)) != eval_rows(f, rw, domain.alpha(u)) {
                return Err(format!("revealed rows of parties {u} and {w} disagree"));
            }
        }
    }
    Ok(())
}

fn parse_rows(f: &PrimeField, bytes: &[u8]) -> Result<Vec<(u8, Vec<FieldPoly>)>> {
    let mut r = WireReader::new(bytes);
    let n = r.u32()?;
    let mut out = Vec::new();
    for _ in 0..n {
        let tag = r.u8()?;
        let c = r.u32()?;
        let mut polys = Vec::new();
        for _ in 0..c {
            polys.push(r.poly(f)?);
        }
        out.push((tag, polys));
    }
    r.expect_end()?;
    Ok(out)
}

fn parse_checkpoints(
    f: &PrimeField,
    bytes: &[u8],
) -> Result<BTreeMap<DealingId, Vec<FieldElement>>> {
    let mut r = WireReader::new(bytes);
    let n = r.u32()?;
    let mut out = BTreeMap::new();
    for _ in 0..n {
        let k = r.u32()? as usize;
        let tag = r.u8()?;
        out.insert((k, tag), r.fe_vec(f)?);
    }
    r.expect_end()?;
    Ok(out)
}

fn encode_complaints(cs: &[Complaint]) -> Vec<u8> {
    let mut w = WireWriter::new();
    w.u32(cs.len() as u32);
    for c in cs {
        let kind = match c.kind {
            ComplaintKind::Mismatch => 0,
            ComplaintKind::Missing => 1,
            ComplaintKind::BadShare => 2,
        };
        w.u32(c.dealer as u32)
            .u8(c.tag)
            .u32(c.accuser as u32)
            .u32(c.peer as u32)
            .u8(kind);
    }
    w.finish()
}

fn parse_complaints(bytes: &[u8]) -> Result<Vec<Complaint>> {
    let mut r = WireReader::new(bytes);
    let n = r.u32()?;
    let mut out = Vec::new();
    for _ in 0..n {
        let dealer = r.u32()? as usize;
        let tag = r.u8()?;
        let accuser = r.u32()? as usize;
        let peer = r.u32()? as usize;
        let kind = match r.u8()? {
            0 => ComplaintKind::Mismatch,
            1 => ComplaintKind::Missing,
            2 => ComplaintKind::BadShare,
            x => return Err(Error::Wire(format!("bad complaint kind {x}"))),
        };
        out.push(Complaint {
            dealer,
            tag,
            accuser,
            peer,
            kind,
        });
    }
    r.expect_end()?;
    Ok(out)
}

type PointKey = (u8, (usize, usize));

#[derive(Default)]
struct Response {
    points: BTreeMap<PointKey, Vec<FieldElement>>,
    reveals: BTreeMap<(u8, usize), Vec<FieldPoly>>,
}

fn encode_response(
    pts: &[(u8, usize, usize, Vec<FieldElement>)],
    reveals: &[(u8, usize, Vec<FieldPoly>)],
) -> Vec<u8> {
    let mut w = WireWriter::new();
    w.u32(pts.len() as u32);
    for (tag, i, j, v) in pts {
        w.u8(*tag).u32(*i as u32).u32(*j as u32).fe_vec(v);
    }
    w.u32(reveals.len() as u32);
    for (tag, u, rows) in reveals {
        w.u8(*tag).u32(*u as u32).u32(rows.len() as u32);
        for p in rows {
            w.poly(p);
        }
    }
    w.finish()
}

fn parse_response(f: &PrimeField, bytes: &[u8]) -> Result<Response> {
    let mut r = WireReader::new(bytes);
    let mut out = Response::default();
    for _ in 0..r.u32()? {
        let tag = r.u8()?;
        let i = r.u32()? as usize;
        let j = r.u32()? as usize;
        out.points.insert((tag, pair(i, j)), r.fe_vec(f)?);
    }
    for _ in 0..r.u32()? {
        let tag = r.u8()?;
        let u = r.u32()? as usize;
        let c = r.u32()?;
        let mut rows = Vec::new();
        for _ in 0..c {
            rows.push(r.poly(f)?);
        }
        out.reveals.insert((tag, u), rows);
    }
    r.expect_end()?;
    Ok(out)
}

fn parse_verdict(bytes: &[u8]) -> Result<Vec<DealingId>> {
    let mut r = WireReader::new(bytes);
    let mut out = Vec::new();
    for _ in 0..r.u32()? {
        let k = r.u32()? as usize;
        out.push((k, r.u8()?));
    }
    r.expect_end()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::poly_interp;
    use crate::lcc::SecretBundle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    struct Fixture {
        f: PrimeField,
        domain: EvalDomain,
        n: usize,
        secrets: BTreeMap<usize, Vec<FieldPoly>>,
    }

    fn fixture(n: usize, m: usize, t: usize, coords: usize) -> Fixture {
        let f = PrimeField::from_u64(1_000_003).unwrap();
        let domain = EvalDomain::standard(&f, n, m, t).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let secrets = (1..=n)
            .map(|k| {
                let vals = f.random_vec(&mut rng, coords * m);
                let b = SecretBundle::partition(&f, &vals, m, t, &mut rng).unwrap();
                (k, b.encoding_polys(&f, &domain).unwrap())
            })
            .collect();
        Fixture {
            f,
            domain,
            n,
            secrets,
        }
    }

    fn run(fx: &Fixture, b: usize, adv: &VssAdversary, silent: &[usize]) -> (VssOutcome, SimNet) {
        let mut net = SimNet::new(fx.n);
        net.set_silent(silent.iter().copied().collect());
        let coords = fx.secrets[&1].len();
        let session = VssSession {
            field: &fx.f,
            domain: &fx.domain,
            round: 0,
            phase: Phase::Share,
            deal_kind: MsgKind::Deal,
            shapes: vec![DealingShape {
                tag: 0,
                degree: fx.domain.lcc_degree(),
                coords,
            }],
            b,
            participants: (1..=fx.n).collect(),
            seed: 5,
        };
        let dealings = fx
            .secrets
            .iter()
            .map(|(&k, p)| {
                (
                    k,
                    vec![Dealing {
                        tag: 0,
                        polys: p.clone(),
                    }],
                )
            })
            .collect();
        let out = run_vss(&mut net, &session, &dealings, adv).unwrap();
        (out, net)
    }

    fn assert_on_secret(fx: &Fixture, out: &VssOutcome, dealer: usize, honest: &[usize]) {
        for &j in honest {
            let share = out.share(j, dealer, 0).unwrap();
            let want: Vec<_> = fx.secrets[&dealer]
                .iter()
                .map(|p| p.eval(&fx.f, fx.domain.alpha(j)))
                .collect();
            assert_eq!(share, &want[..], "dealer {dealer}, receiver {j}");
        }
    }

    #[test]
    fn honest_run_is_quiet() {
        let fx = fixture(6, 1, 1, 3);
        let (out, net) = run(&fx, 1, &VssAdversary::default(), &[]);
        assert!(out.complaints.is_empty());
        assert!(out.disqualified.is_empty());
        assert_eq!(out.accepted.len(), 6);
        for k in 1..=6 {
            assert_on_secret(&fx, &out, k, &(1..=6).collect::<Vec<_>>());
        }
        // deal, checkpoint, complaint barriers only
        assert_eq!(net.barrier(), 3);
    }

    #[test]
    fn corrupted_row_draws_complaints_and_disqualifies() {
        let fx = fixture(7, 1, 1, 2);
        let adv = VssAdversary {
            corrupt_rows: BTreeMap::from([(2, 3)]),
            ..Default::default()
        };
        let (out, _) = run(&fx, 1, &adv, &[]);
        assert!(out
            .complaints
            .iter()
            .any(|c| c.dealer == 2 && c.accuser == 3 && c.kind == ComplaintKind::Mismatch));
        assert!(out.complaints.iter().all(|c| c.dealer == 2));
        assert_eq!(
            out.disqualified.keys().copied().collect::<Vec<_>>(),
            vec![2]
        );
        assert!(!out.accepted.contains(&(2, 0)));
        assert_eq!(out.accepted.len(), 6);
    }

    #[test]
    fn over_degree_dealing_rejected() {
        let fx = fixture(8, 1, 1, 1);
        let adv = VssAdversary {
            over_degree: BTreeSet::from([4]),
            ..Default::default()
        };
        let (out, _) = run(&fx, 2, &adv, &[]);
        assert!(out
            .complaints
            .iter()
            .any(|c| c.dealer == 4 && c.kind == ComplaintKind::BadShare));
        assert!(out.disqualified.contains_key(&4));
        assert_eq!(out.disqualified.len(), 1);
    }

    #[test]
    fn forged_checkpoints_do_not_hurt_honest_dealers() {
        let fx = fixture(7, 2, 1, 2);
        let adv = VssAdversary {
            random_checkpoints: BTreeSet::from([5]),
            ..Default::default()
        };
        let (out, _) = run(&fx, 1, &adv, &[]);
        // every honest receiver complains about party 5 for every dealing
        assert!(out
            .complaints
            .iter()
            .all(|c| c.peer == 5 && c.kind == ComplaintKind::Mismatch));
        assert_eq!(out.complaints.len(), 7 * 6);
        assert!(out.disqualified.is_empty());
        for k in 1..=7 {
            assert_on_secret(&fx, &out, k, &[1, 2, 3, 4, 6, 7]);
        }
    }

    #[test]
    fn false_complaint_is_answered_by_a_point() {
        let fx = fixture(6, 1, 1, 1);
        let adv = VssAdversary {
            false_complaints: BTreeMap::from([(1, 2)]),
            ..Default::default()
        };
        let (out, _) = run(&fx, 1, &adv, &[]);
        assert_eq!(out.complaints.len(), 6);
        assert!(out.disqualified.is_empty());
        assert!(out.revealed.is_empty());
    }

    #[test]
    fn silent_peer_is_recorded_not_punished() {
        let fx = fixture(6, 1, 1, 1);
        let (out, _) = run(&fx, 1, &VssAdversary::default(), &[6]);
        assert!(out
            .complaints
            .iter()
            .all(|c| c.peer == 6 && c.kind == ComplaintKind::Missing));
        assert!(!out.complaints.is_empty());
        assert!(out.disqualified.is_empty());
        assert_eq!(out.accepted_dealers(0), (1..=5).collect());
    }

    #[test]
    fn soundness_after_acceptance() {
        // dealers 1 and 2 each corrupt a row, 3 forges checkpoints; whatever
        // is accepted must be consistent across the honest receivers
        let fx = fixture(9, 1, 2, 2);
        let adv = VssAdversary {
            corrupt_rows: BTreeMap::from([(1, 4), (2, 3)]),
            random_checkpoints: BTreeSet::from([3]),
            ..Default::default()
        };
        let (out, _) = run(&fx, 2, &adv, &[]);
        let honest: Vec<usize> = (4..=9).collect();
        for &(k, tag) in &out.accepted {
            for c in 0..2 {
                let pts: Vec<_> = honest
                    .iter()
                    .map(|&j| {
                        (
                            fx.domain.alpha(j).clone(),
                            out.share(j, k, tag).unwrap()[c].clone(),
                        )
                    })
                    .collect();
                let p = poly_interp(&fx.f, &pts).unwrap();
                assert!(p.degree_at_most(fx.domain.lcc_degree()));
            }
        }
        assert!(out.disqualified.contains_key(&1));
        assert!(out.disqualified.contains_key(&2));
    }

    #[test]
    fn single_receiver_view_is_secret_independent() {
        // D = 1 over F_11: the row of party 1 is (u0 + u1 a) + (u1 + c a) x;
        // enumerate the mask r and the free coefficient c
        let f = PrimeField::from_u64(11).unwrap();
        let domain = EvalDomain::standard(&f, 3, 1, 1).unwrap();
        let mut reference: Option<BTreeMap<Vec<FieldElement>, usize>> = None;
        for s in 0..11u64 {
            let mut hist = BTreeMap::new();
            for r in 0..11u64 {
                let b = SecretBundle::new(vec![vec![f.elem(s)]], vec![vec![f.elem(r)]]).unwrap();
                let u = b.encoding_polys(&f, &domain).unwrap().remove(0);
                for c in 0..11u64 {
                    let sb = SymmetricBivariate::from_parts(&f, &u, 1, &[f.elem(c)]).unwrap();
                    let row = sb.row(&f, domain.alpha(1));
                    let key = vec![row.coeff(0), row.coeff(1)];
                    *hist.entry(key).or_insert(0) += 1;
                }
            }
            assert_eq!(hist.len(), 121);
            if let Some(prev) = &reference {
                assert_eq!(prev, &hist);
            }
            reference = Some(hist);
        }
    }

    #[test]
    fn bivariate_symmetry_and_secret_line() {
        let f = PrimeField::from_u64(1_000_003).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let u = FieldPoly::new(f.random_vec(&mut rng, 4));
        let sb = SymmetricBivariate::random(&f, &u, 3, &mut rng).unwrap();
        for _ in 0..10 {
            let (x, y) = (f.random(&mut rng), f.random(&mut rng));
            assert_eq!(sb.eval(&f, &x, &y), sb.eval(&f, &y, &x));
            assert_eq!(sb.eval(&f, &x, &f.zero()), u.eval(&f, &x));
            assert_eq!(sb.row(&f, &y).eval(&f, &f.zero()), u.eval(&f, &y));
        }
        assert!(SymmetricBivariate::random(&f, &u, 2, &mut rng).is_err());
    }
}
