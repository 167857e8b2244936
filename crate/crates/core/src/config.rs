//! Flat `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are rejected.

use std::collections::BTreeMap;

use crate::adversary::{AttackKind, Dropout, DropoutSchedule};
use crate::error::{Error, Result};
use crate::fl::{Architecture, DatasetSpec, TrainConfig};
use crate::net::Phase;

/// Environment variable that overrides `seed`.
pub const SEED_ENV: &str = "BYITFL_SEED";

pub const KEYS: &[&str] = &[
    "n",
    "b",
    "t",
    "p_drop",
    "m",
    "k",
    "q",
    "epsilon",
    "seed",
    "aggregator",
    "attack",
    "dataset",
    "rounds",
    "eta",
    "eta_u",
    "root_size",
    "attackers",
    "b_protocol",
    "local_iters",
    "arch",
    "dropouts",
    "dim",
    "classes",
    "separation",
    "samples_per_user",
    "test_size",
    "train_images",
    "train_labels",
    "test_images",
    "test_labels",
    "limit",
];

/// Splits text into an ordered key/value map.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
        let k = k.trim().to_string();
        if !KEYS.contains(&k.as_str()) {
            return Err(Error::Config(format!("line {}: unknown key {k:?}", no + 1)));
        }
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!(
                "line {}: duplicate key {k:?}",
                no + 1
            )));
        }
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

/// `party@round:phase` entries separated by commas, e.g. `3@0:mask`.
pub fn parse_dropouts(s: &str) -> Result<DropoutSchedule> {
    let mut entries = Vec::new();
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let bad = || Error::Config(format!("dropouts: bad entry {item:?}"));
        let (party, rest) = item.split_once('@').ok_or_else(bad)?;
        let (round, phase) = rest.split_once(':').unwrap_or((rest, "share"));
        entries.push(Dropout {
            party: party.parse().map_err(|_| bad())?,
            round: round.parse().map_err(|_| bad())?,
            from_phase: Phase::parse(phase)?,
        });
    }
    Ok(DropoutSchedule::new(entries))
}

/// Builds a [`TrainConfig`] on top of the defaults.
pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    let get = |k: &str| pairs.get(k).map(String::as_str);
    macro_rules! set {
        ($field:ident) => {
            if let Some(v) = get(stringify!($field)) {
                cfg.$field = num(stringify!($field), v)?;
            }
        };
    }
    set!(n);
    set!(b);
    set!(t);
    set!(p_drop);
    set!(m);
    set!(k);
    set!(q);
    set!(epsilon);
    set!(seed);
    set!(rounds);
    set!(eta);
    set!(eta_u);
    set!(root_size);
    set!(local_iters);
    if let Some(v) = get("attackers") {
        cfg.attackers = Some(num("attackers", v)?);
    }
    if let Some(v) = get("b_protocol") {
        cfg.b_protocol = Some(num("b_protocol", v)?);
    }
    if let Some(v) = get("aggregator") {
        cfg.aggregator = v.parse()?;
    }
    if let Some(v) = get("arch") {
        cfg.arch = v.parse::<Architecture>()?;
    }
    if let Some(v) = get("attack") {
        cfg.attack = match v {
            "none" | "" => None,
            other => Some(other.parse::<AttackKind>()?),
        };
    }
    if let Some(v) = get("dropouts") {
        cfg.dropouts = parse_dropouts(v)?;
    }
    cfg.dataset = match get("dataset").unwrap_or("synthetic") {
        "synthetic" => {
            let DatasetSpec::Synthetic {
                mut dim,
                mut classes,
                mut separation,
                mut samples_per_user,
                mut test_size,
            } = DatasetSpec::default()
            else {
                unreachable!("default dataset is synthetic")
            };
            if let Some(v) = get("dim") {
                dim = num("dim", v)?;
            }
            if let Some(v) = get("classes") {
                classes = num("classes", v)?;
            }
            if let Some(v) = get("separation") {
                separation = num("separation", v)?;
            }
            if let Some(v) = get("samples_per_user") {
                samples_per_user = num("samples_per_user", v)?;
            }
            if let Some(v) = get("test_size") {
                test_size = num("test_size", v)?;
            }
            DatasetSpec::Synthetic {
                dim,
                classes,
                separation,
                samples_per_user,
                test_size,
            }
        }
        "idx" => {
            let path = |k: &str| {
                get(k)
                    .map(str::to_string)
                    .ok_or_else(|| Error::Config(format!("dataset = idx needs {k}")))
            };
            DatasetSpec::Idx {
                train_images: path("train_images")?,
                train_labels: path("train_labels")?,
                test_images: path("test_images")?,
                test_labels: path("test_labels")?,
                limit: get("limit").map(|v| num("limit", v)).transpose()?,
            }
        }
        other => return Err(Error::Config(format!("unknown dataset {other:?}"))),
    };
    Ok(cfg)
}

/// Parses config text, then applies the seed override if given.
pub fn parse_config(text: &str, seed_override: Option<&str>) -> Result<TrainConfig> {
    let mut cfg = from_pairs(&parse_pairs(text)?)?;
    if let Some(s) = seed_override {
        cfg.seed = num(SEED_ENV, s.trim())?;
    }
    Ok(cfg)
}

/// Parses config text, honouring `BYITFL_SEED` from the environment.
pub fn load_config(text: &str) -> Result<TrainConfig> {
    let env = std::env::var(SEED_ENV).ok();
    parse_config(text, env.as_deref())
}

/// Renders a config back to the flat format.
pub fn to_text(cfg: &TrainConfig) -> String {
    let mut lines = vec![
        format!("n = {}", cfg.n),
        format!("b = {}", cfg.b),
        format!("t = {}", cfg.t),
        format!("p_drop = {}", cfg.p_drop),
        format!("m = {}", cfg.m),
        format!("k = {}", cfg.k),
        format!("q = {}", cfg.q),
        format!("epsilon = {}", cfg.epsilon),
        format!("seed = {}", cfg.seed),
        format!("aggregator = {}", cfg.aggregator),
        format!(
            "attack = {}",
            cfg.attack
                .as_ref()
                .map_or("none".to_string(), ToString::to_string)
        ),
        format!("rounds = {}", cfg.rounds),
        format!("eta = {}", cfg.eta),
        format!("eta_u = {}", cfg.eta_u),
        format!("root_size = {}", cfg.root_size),
        format!("local_iters = {}", cfg.local_iters),
        format!("arch = {}", cfg.arch),
    ];
    if let Some(a) = cfg.attackers {
        lines.push(format!("attackers = {a}"));
    }
    if let Some(b) = cfg.b_protocol {
        lines.push(format!("b_protocol = {b}"));
    }
    if !cfg.dropouts.entries.is_empty() {
        let items: Vec<String> = cfg
            .dropouts
            .entries
            .iter()
            .map(|d| format!("{}@{}:{}", d.party, d.round, d.from_phase.as_str()))
            .collect();
        lines.push(format!("dropouts = {}", items.join(",")));
    }
    match &cfg.dataset {
        DatasetSpec::Synthetic {
            dim,
            classes,
            separation,
            samples_per_user,
            test_size,
        } => lines.extend([
            "dataset = synthetic".to_string(),
            format!("dim = {dim}"),
            format!("classes = {classes}"),
            format!("separation = {separation}"),
            format!("samples_per_user = {samples_per_user}"),
            format!("test_size = {test_size}"),
        ]),
        DatasetSpec::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            limit,
        } => {
            lines.extend([
                "dataset = idx".to_string(),
                format!("train_images = {train_images}"),
                format!("train_labels = {train_labels}"),
                format!("test_images = {test_images}"),
                format!("test_labels = {test_labels}"),
            ]);
            if let Some(l) = limit {
                lines.push(format!("limit = {l}"));
            }
        }
    }
    lines.join("\n") + "\n"
}
