//! Deterministic synchronous network with ideal broadcast and a transcript.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::wire::{WireReader, WireWriter};

/// Node id of the federator; parties are `1..=n`.
pub const FEDERATOR: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Share,
    NormCheck,
    Compute,
    Mask,
    Reconstruct,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Share,
        Phase::NormCheck,
        Phase::Compute,
        Phase::Mask,
        Phase::Reconstruct,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Share => "share",
            Phase::NormCheck => "norm_check",
            Phase::Compute => "compute",
            Phase::Mask => "mask",
            Phase::Reconstruct => "reconstruct",
        }
    }

    pub fn parse(s: &str) -> Result<Phase> {
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown phase {s:?}")))
    }

    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(c: u8) -> Result<Phase> {
        Phase::ALL
            .get(c as usize)
            .copied()
            .ok_or_else(|| Error::Wire(format!("bad phase code {c}")))
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MsgKind {
    /// Public federator model update.
    Model,
    Deal,
    Checkpoint,
    Complaint,
    Response,
    Verdict,
    ZeroContrib,
    Subshare,
    LambdaDeal,
    Syndrome,
    NormShare,
    NormVerdict,
    Masked,
}

impl MsgKind {
    const ALL: [MsgKind; 13] = [
        MsgKind::Model,
        MsgKind::Deal,
        MsgKind::Checkpoint,
        MsgKind::Complaint,
        MsgKind::Response,
        MsgKind::Verdict,
        MsgKind::ZeroContrib,
        MsgKind::Subshare,
        MsgKind::LambdaDeal,
        MsgKind::Syndrome,
        MsgKind::NormShare,
        MsgKind::NormVerdict,
        MsgKind::Masked,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MsgKind::Model => "MODEL",
            MsgKind::Deal => "DEAL",
            MsgKind::Checkpoint => "CHECKPOINT",
            MsgKind::Complaint => "COMPLAINT",
            MsgKind::Response => "RESPONSE",
            MsgKind::Verdict => "VERDICT",
            MsgKind::ZeroContrib => "ZERO_CONTRIB",
            MsgKind::Subshare => "SUBSHARE",
            MsgKind::LambdaDeal => "LAMBDA_DEAL",
            MsgKind::Syndrome => "SYNDROME",
            MsgKind::NormShare => "NORM_SHARE",
            MsgKind::NormVerdict => "NORM_VERDICT",
            MsgKind::Masked => "MASKED",
        }
    }

    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(c: u8) -> Result<MsgKind> {
        Self::ALL
            .get(c as usize)
            .copied()
            .ok_or_else(|| Error::Wire(format!("bad message kind {c}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub round: u64,
    pub phase: Phase,
    pub sender: usize,
    /// `None` is a broadcast.
    pub receiver: Option<usize>,
    pub kind: MsgKind,
    pub payload: Vec<u8>,
}

impl Message {
    pub fn is_broadcast(&self) -> bool {
        self.receiver.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub barrier: u64,
    pub msg: Message,
}

const MAGIC: &[u8; 4] = b"BYTR";
const VERSION: u8 = 1;
const BROADCAST_CODE: u32 = u32::MAX;

/// Append-only delivery log.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every message received by some node of `nodes` (broadcasts included).
    pub fn view_of(&self, nodes: &BTreeSet<usize>) -> Vec<&TranscriptEntry> {
        if nodes.is_empty() {
            return Vec::new();
        }
        self.entries
            .iter()
            .filter(|e| e.msg.receiver.is_none_or(|r| nodes.contains(&r)))
            .collect()
    }

    pub fn total_payload_bytes(&self) -> usize {
        self.entries.iter().map(|e| e.msg.payload.len()).sum()
    }

    fn encode_entry(e: &TranscriptEntry) -> Vec<u8> {
        let mut w = WireWriter::new();
        w.u64(e.barrier)
            .u64(e.msg.round)
            .u8(e.msg.phase.code())
            .u32(e.msg.sender as u32)
            .u32(e.msg.receiver.map_or(BROADCAST_CODE, |r| r as u32))
            .u8(e.msg.kind.code())
            .bytes(&e.msg.payload);
        w.finish()
    }

    fn decode_entry(bytes: &[u8]) -> Result<TranscriptEntry> {
        let mut r = WireReader::new(bytes);
        let barrier = r.u64()?;
        let round = r.u64()?;
        let phase = Phase::from_code(r.u8()?)?;
        let sender = r.u32()? as usize;
        let receiver = match r.u32()? {
            BROADCAST_CODE => None,
            x => Some(x as usize),
        };
        let kind = MsgKind::from_code(r.u8()?)?;
        let payload = r.bytes()?.to_vec();
        r.expect_end()?;
        Ok(TranscriptEntry {
            barrier,
            msg: Message {
                round,
                phase,
                sender,
                receiver,
                kind,
                payload,
            },
        })
    }

    /// Binary log: magic, version, then one length-prefixed record per entry.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        for e in &self.entries {
            let rec = Self::encode_entry(e);
            out.extend_from_slice(&(rec.len() as u32).to_be_bytes());
            out.extend_from_slice(&rec);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 5 || &bytes[..4] != MAGIC || bytes[4] != VERSION {
            return Err(Error::Wire("not a transcript log".into()));
        }
        let mut pos = 5;
        let mut entries = Vec::new();
        while pos < bytes.len() {
            let len_bytes: [u8; 4] = bytes
                .get(pos..pos + 4)
                .and_then(|s| s.try_into().ok())
                .ok_or_else(|| Error::Wire("truncated record length".into()))?;
            let len = u32::from_be_bytes(len_bytes) as usize;
            pos += 4;
            let rec = bytes
                .get(pos..pos + len)
                .ok_or_else(|| Error::Wire("truncated record".into()))?;
            entries.push(Self::decode_entry(rec)?);
            pos += len;
        }
        Ok(Transcript { entries })
    }

    /// JSON index of the binary log: byte offset (past the length prefix),
    /// length and header of each record.
    pub fn index_json(&self) -> serde_json::Value {
        let mut offset = 5usize;
        let records: Vec<_> = self
            .entries
            .iter()
            .map(|e| {
                let len = Self::encode_entry(e).len();
                let rec = json!({
                    "offset": offset + 4,
                    "length": len,
                    "barrier": e.barrier,
                    "round": e.msg.round,
                    "phase": e.msg.phase.as_str(),
                    "sender": e.msg.sender,
                    "receiver": e.msg.receiver,
                    "kind": e.msg.kind.as_str(),
                    "payload_bytes": e.msg.payload.len(),
                });
                offset += 4 + len;
                rec
            })
            .collect();
        json!({ "format": "byitfl-transcript", "version": VERSION, "records": records })
    }
}

/// Messages delivered at one barrier, grouped per node.
#[derive(Debug, Default)]
pub struct Inboxes {
    msgs: Vec<Message>,
    by_node: Vec<Vec<usize>>,
}

impl Inboxes {
    pub fn inbox(&self, node: usize) -> impl Iterator<Item = &Message> {
        self.by_node
            .get(node)
            .into_iter()
            .flatten()
            .map(move |&i| &self.msgs[i])
    }

    /// Messages of a kind addressed (or broadcast) to `node`.
    pub fn of_kind(&self, node: usize, kind: MsgKind) -> impl Iterator<Item = &Message> {
        self.inbox(node).filter(move |m| m.kind == kind)
    }

    /// Broadcasts of a kind, in delivery order.
    pub fn broadcasts(&self, kind: MsgKind) -> impl Iterator<Item = &Message> {
        self.msgs
            .iter()
            .filter(move |m| m.is_broadcast() && m.kind == kind)
    }

    pub fn is_empty(&self) -> bool {
        self.msgs.is_empty()
    }
}

/// Synchronous network over nodes `0..=n` (node 0 is the federator).
#[derive(Debug)]
pub struct SimNet {
    nodes: usize,
    barrier: u64,
    outbox: Vec<Message>,
    silent: BTreeSet<usize>,
    transcript: Transcript,
}

impl SimNet {
    pub fn new(n: usize) -> Self {
        SimNet {
            nodes: n + 1,
            barrier: 0,
            outbox: Vec::new(),
            silent: BTreeSet::new(),
            transcript: Transcript::default(),
        }
    }

    pub fn parties(&self) -> usize {
        self.nodes - 1
    }

    /// Messages from silent nodes are discarded at send time.
    pub fn set_silent(&mut self, silent: BTreeSet<usize>) {
        self.silent = silent;
    }

    pub fn is_silent(&self, node: usize) -> bool {
        self.silent.contains(&node)
    }

    pub fn send(&mut self, msg: Message) {
        debug_assert!(msg.sender < self.nodes);
        if self.silent.contains(&msg.sender) {
            return;
        }
        if let Some(r) = msg.receiver {
            if r >= self.nodes {
                return;
            }
        }
        self.outbox.push(msg);
    }

    /// Delivers everything sent since the last barrier, in send order.
    pub fn deliver(&mut self) -> Inboxes {
        let msgs = std::mem::take(&mut self.outbox);
        let mut by_node = vec![Vec::new(); self.nodes];
        for (i, m) in msgs.iter().enumerate() {
            match m.receiver {
                Some(r) => by_node[r].push(i),
                None => by_node.iter_mut().for_each(|v| v.push(i)),
            }
        }
        let barrier = self.barrier;
        self.transcript
            .entries
            .extend(msgs.iter().map(|m| TranscriptEntry {
                barrier,
                msg: m.clone(),
            }));
        self.barrier += 1;
        Inboxes { msgs, by_node }
    }

    pub fn barrier(&self) -> u64 {
        self.barrier
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }
}
