//! Byzantine strategies and dropout schedules.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::Phase;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum AttackKind {
    TrimAttack,
    LabelFlip,
    ScaleUpdate(f64),
    RandomShares,
    InconsistentDeal,
    WrongComputation,
    SignFlip,
}

impl AttackKind {
    /// Corrupts the local dataset before training.
    pub fn is_data_attack(&self) -> bool {
        matches!(self, AttackKind::LabelFlip)
    }

    /// Replaces or transforms the model update.
    pub fn is_update_attack(&self) -> bool {
        matches!(
            self,
            AttackKind::TrimAttack | AttackKind::ScaleUpdate(_) | AttackKind::SignFlip
        )
    }

    /// Deviates from the secure aggregation protocol itself.
    pub fn is_protocol_attack(&self) -> bool {
        matches!(
            self,
            AttackKind::RandomShares | AttackKind::InconsistentDeal | AttackKind::WrongComputation
        )
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackKind::TrimAttack => f.write_str("trim"),
            AttackKind::LabelFlip => f.write_str("label_flip"),
            AttackKind::ScaleUpdate(x) => write!(f, "scale:{x}"),
            AttackKind::RandomShares => f.write_str("random_shares"),
            AttackKind::InconsistentDeal => f.write_str("inconsistent_deal"),
            AttackKind::WrongComputation => f.write_str("wrong_computation"),
            AttackKind::SignFlip => f.write_str("sign_flip"),
        }
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    /// Accepts the display names; `scale:<factor>` carries its factor.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        Ok(match s.as_str() {
            "trim" | "trim_attack" => AttackKind::TrimAttack,
            "label_flip" | "lf" => AttackKind::LabelFlip,
            "random_shares" => AttackKind::RandomShares,
            "inconsistent_deal" => AttackKind::InconsistentDeal,
            "wrong_computation" => AttackKind::WrongComputation,
            "sign_flip" => AttackKind::SignFlip,
            "scale" | "scale_update" => AttackKind::ScaleUpdate(2.0),
            other => {
                let factor = other
                    .strip_prefix("scale:")
                    .or_else(|| other.strip_prefix("scale_update:"))
                    .ok_or_else(|| Error::Config(format!("unknown attack {other:?}")))?;
                let x: f64 = factor
                    .parse()
                    .map_err(|_| Error::Config(format!("bad scale factor {factor:?}")))?;
                if !x.is_finite() {
                    return Err(Error::Config(format!("bad scale factor {factor:?}")));
                }
                AttackKind::ScaleUpdate(x)
            }
        })
    }
}

/// Who attacks, how, and when.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub members: BTreeSet<usize>,
    /// `None` means every round.
    pub rounds: Option<BTreeSet<u64>>,
    /// Protocol attacks start at this phase.
    pub from_phase: Phase,
}

impl AttackSpec {
    pub fn new(kind: AttackKind, members: impl IntoIterator<Item = usize>) -> Self {
        AttackSpec {
            kind,
            members: members.into_iter().collect(),
            rounds: None,
            from_phase: Phase::Share,
        }
    }

    pub fn from_phase(mut self, phase: Phase) -> Self {
        self.from_phase = phase;
        self
    }

    pub fn in_rounds(mut self, rounds: impl IntoIterator<Item = u64>) -> Self {
        self.rounds = Some(rounds.into_iter().collect());
        self
    }

    pub fn is_member(&self, party: usize) -> bool {
        self.members.contains(&party)
    }

    pub fn active(&self, party: usize, round: u64) -> bool {
        self.is_member(party) && self.rounds.as_ref().is_none_or(|r| r.contains(&round))
    }

    pub fn active_in(&self, party: usize, round: u64, phase: Phase) -> bool {
        self.active(party, round) && phase >= self.from_phase
    }

    /// Budget and disjointness checks.
    pub fn validate(&self, n: usize, b: usize, dropouts: &DropoutSchedule) -> Result<()> {
        if self.members.len() > b {
            return Err(Error::Config(format!(
                "{} attackers exceed the Byzantine budget b = {b}",
                self.members.len()
            )));
        }
        if let Some(&p) = self.members.iter().find(|&&p| p == 0 || p > n) {
            return Err(Error::Config(format!("attacker id {p} outside 1..={n}")));
        }
        if let Some(p) = dropouts.parties().intersection(&self.members).next() {
            return Err(Error::Config(format!(
                "party {p} is both attacker and dropout"
            )));
        }
        Ok(())
    }
}

/// `party` goes silent in `round` from `from_phase` onward.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dropout {
    pub party: usize,
    pub round: u64,
    pub from_phase: Phase,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropoutSchedule {
    pub entries: Vec<Dropout>,
}

impl DropoutSchedule {
    pub fn new(entries: Vec<Dropout>) -> Self {
        DropoutSchedule { entries }
    }

    pub fn parties(&self) -> BTreeSet<usize> {
        self.entries.iter().map(|d| d.party).collect()
    }

    pub fn silent_at(&self, round: u64, phase: Phase) -> BTreeSet<usize> {
        self.entries
            .iter()
            .filter(|d| d.round == round && phase >= d.from_phase)
            .map(|d| d.party)
            .collect()
    }

    /// At most `p_drop` parties silent in any single round.
    pub fn validate(&self, n: usize, p_drop: usize) -> Result<()> {
        let rounds: BTreeSet<u64> = self.entries.iter().map(|d| d.round).collect();
        for r in rounds {
            let count = self.silent_at(r, Phase::Reconstruct).len();
            if count > p_drop {
                return Err(Error::Config(format!(
                    "{count} dropouts in round {r} exceed p_drop = {p_drop}"
                )));
            }
        }
        if let Some(d) = self.entries.iter().find(|d| d.party == 0 || d.party > n) {
            return Err(Error::Config(format!(
                "dropout id {} outside 1..={n}",
                d.party
            )));
        }
        Ok(())
    }
}

/// `y -> C - 1 - y` on every label.
pub fn label_flip(labels: &mut [usize], classes: usize) -> Result<()> {
    if classes < 2 {
        return Err(Error::Unsupported(
            "label flipping needs a classification task".into(),
        ));
    }
    for y in labels.iter_mut() {
        if *y >= classes {
            return Err(Error::Range(format!("label {y} outside 0..{classes}")));
        }
        *y = classes - 1 - *y;
    }
    Ok(())
}

/// Full-knowledge trim attack: `mu_j - z * sigma_j * sign(mu_j)` per
/// coordinate with `z ~ U[3, 4]`, from the honest updates' mean and std.
pub fn trim_attack<R: Rng + ?Sized>(honest: &[Vec<f64>], rng: &mut R) -> Result<Vec<f64>> {
    let Some(d) = honest.first().map(Vec::len) else {
        return Err(Error::Shape("trim attack needs honest updates".into()));
    };
    let cnt = honest.len() as f64;
    let z: f64 = rng.gen_range(3.0..=4.0);
    Ok((0..d)
        .map(|j| {
            let mu = honest.iter().map(|g| g[j]).sum::<f64>() / cnt;
            let var = honest.iter().map(|g| (g[j] - mu).powi(2)).sum::<f64>() / cnt;
            let sign = if mu > 0.0 {
                1.0
            } else if mu < 0.0 {
                -1.0
            } else {
                0.0
            };
            mu - z * var.sqrt() * sign
        })
        .collect())
}

pub fn sign_flip(g: &[f64]) -> Vec<f64> {
    g.iter().map(|x| -x).collect()
}

pub fn scale_update(g: &[f64], factor: f64) -> Vec<f64> {
    g.iter().map(|x| x * factor).collect()
}
