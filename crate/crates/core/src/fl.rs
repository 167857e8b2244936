//! Desk-scale federated training: models, datasets, aggregation rules and
//! the round loop that drives the secure protocol.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::adversary::{
    label_flip, scale_update, sign_flip, trim_attack, AttackKind, AttackSpec, DropoutSchedule,
};
use crate::error::{Error, Result};
use crate::field::FieldElement;
use crate::net::Transcript;
use crate::protocol::{
    plaintext_aggregate, run_round, ParamSpec, ProtocolParams, RoundAdversary, RoundInput,
    FIT_NODES, LOW_TRUST_MEAN,
};
use crate::quant::{l2_norm, normalize, quantize, quantize_unchecked};
use crate::relu::{fit_relu, ReluApprox};
use crate::rng::{derive_rng, derive_seed, party_rng};

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }
}

/// Gaussian blobs: class means at distance `separation` from the origin in
/// random directions, unit-variance noise.
pub fn synthetic_blobs<R: Rng + ?Sized>(
    samples: usize,
    dim: usize,
    classes: usize,
    separation: f64,
    means_rng: &mut R,
    rng: &mut R,
) -> Dataset {
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(means_rng)).collect();
            let norm = l2_norm(&v).max(f64::MIN_POSITIVE);
            v.iter().map(|x| x * separation / norm).collect()
        })
        .collect();
    let mut features = Vec::with_capacity(samples);
    let mut labels = Vec::with_capacity(samples);
    for _ in 0..samples {
        let y = rng.gen_range(0..classes);
        features.push(
            means[y]
                .iter()
                .map(|mu| mu + Distribution::<f64>::sample(&StandardNormal, rng))
                .collect(),
        );
        labels.push(y);
    }
    Dataset {
        features,
        labels,
        classes,
    }
}

/// Parses an IDX container (unsigned-byte payload): returns dimensions and data.
pub fn parse_idx(bytes: &[u8]) -> Result<(Vec<usize>, Vec<u8>)> {
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::Io("not an IDX file".into()));
    }
    if bytes[2] != 0x08 {
        return Err(Error::Unsupported(format!(
            "IDX element type 0x{:02x}",
            bytes[2]
        )));
    }
    let ndim = bytes[3] as usize;
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(Error::Io("truncated IDX header".into()));
    }
    let dims: Vec<usize> = (0..ndim)
        .map(|i| {
            let o = 4 + 4 * i;
            u32::from_be_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize
        })
        .collect();
    let count: usize = dims.iter().product();
    if bytes.len() != header + count {
        return Err(Error::Io(format!(
            "IDX payload has {} bytes, header promises {count}",
            bytes.len() - header
        )));
    }
    Ok((dims, bytes[header..].to_vec()))
}

/// Loads an image/label IDX pair, scaling pixels to `[0, 1]`; keeps the
/// first `limit` examples when given.
pub fn load_idx(images: &Path, labels: &Path, limit: Option<usize>) -> Result<Dataset> {
    let (idims, ipix) = parse_idx(&std::fs::read(images)?)?;
    let (ldims, lbl) = parse_idx(&std::fs::read(labels)?)?;
    if idims.is_empty() || ldims.len() != 1 || idims[0] != ldims[0] {
        return Err(Error::Shape(format!(
            "image dims {idims:?} do not match label dims {ldims:?}"
        )));
    }
    let per: usize = idims[1..].iter().product();
    let count = limit.map_or(idims[0], |l| l.min(idims[0]));
    let features = (0..count)
        .map(|i| {
            ipix[i * per..(i + 1) * per]
                .iter()
                .map(|&p| p as f64 / 255.0)
                .collect()
        })
        .collect();
    let labels: Vec<usize> = lbl[..count].iter().map(|&y| y as usize).collect();
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    Ok(Dataset {
        features,
        labels,
        classes,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    /// Multinomial logistic regression.
    Logistic,
    /// One `tanh` hidden layer.
    Mlp { hidden: usize },
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::Logistic => f.write_str("logistic"),
            Architecture::Mlp { hidden } => write!(f, "mlp:{hidden}"),
        }
    }
}

impl FromStr for Architecture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "logistic" => Ok(Architecture::Logistic),
            Some(("mlp", h)) => h
                .parse()
                .map(|hidden| Architecture::Mlp { hidden })
                .map_err(|_| Error::Config(format!("bad hidden width {h:?}"))),
            _ => Err(Error::Config(format!("unknown architecture {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub arch: Architecture,
    pub inputs: usize,
    pub classes: usize,
    pub w: Vec<f64>,
}

fn softmax_xent(logits: &[f64], y: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() - (logits[y] - max);
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[y] -= 1.0;
    (loss, grad)
}

impl Model {
    pub fn dim(arch: Architecture, inputs: usize, classes: usize) -> usize {
        match arch {
            Architecture::Logistic => classes * inputs + classes,
            Architecture::Mlp { hidden } => hidden * inputs + hidden + classes * hidden + classes,
        }
    }

    /// Logistic weights start at zero; MLP weights are scaled Gaussians.
    pub fn new<R: Rng + ?Sized>(
        arch: Architecture,
        inputs: usize,
        classes: usize,
        rng: &mut R,
    ) -> Self {
        let d = Self::dim(arch, inputs, classes);
        let w = match arch {
            Architecture::Logistic => vec![0.0; d],
            Architecture::Mlp { .. } => {
                let s = 1.0 / (inputs.max(1) as f64).sqrt();
                (0..d)
                    .map(|_| s * Distribution::<f64>::sample(&StandardNormal, rng))
                    .collect()
            }
        };
        Model {
            arch,
            inputs,
            classes,
            w,
        }
    }

    fn logits(&self, x: &[f64], hidden_out: Option<&mut Vec<f64>>) -> Vec<f64> {
        let (c, i) = (self.classes, self.inputs);
        let affine = |w: &[f64], b: &[f64], x: &[f64], rows: usize| -> Vec<f64> {
            (0..rows)
                .map(|r| {
                    b[r] + w[r * x.len()..(r + 1) * x.len()]
                        .iter()
                        .zip(x)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                })
                .collect()
        };
        match self.arch {
            Architecture::Logistic => affine(&self.w[..c * i], &self.w[c * i..], x, c),
            Architecture::Mlp { hidden: h } => {
                let (w1, rest) = self.w.split_at(h * i);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(c * h);
                let a: Vec<f64> = affine(w1, b1, x, h).iter().map(|z| z.tanh()).collect();
                let out = affine(w2, b2, &a, c);
                if let Some(hid) = hidden_out {
                    *hid = a;
                }
                out
            }
        }
    }

    /// Mean cross-entropy over `data` and its gradient.
    pub fn loss_grad(&self, data: &Dataset) -> (f64, Vec<f64>) {
        let (c, i) = (self.classes, self.inputs);
        let mut grad = vec![0.0; self.w.len()];
        let mut loss = 0.0;
        for (x, &y) in data.features.iter().zip(&data.labels) {
            let mut hid = Vec::new();
            let z = self.logits(x, Some(&mut hid));
            let (l, dz) = softmax_xent(&z, y);
            loss += l;
            match self.arch {
                Architecture::Logistic => {
                    for r in 0..c {
                        for (g, xv) in grad[r * i..(r + 1) * i].iter_mut().zip(x) {
                            *g += dz[r] * xv;
                        }
                        grad[c * i + r] += dz[r];
                    }
                }
                Architecture::Mlp { hidden: h } => {
                    let w2 = &self.w[h * i + h..h * i + h + c * h];
                    let (g1, rest) = grad.split_at_mut(h * i);
                    let (gb1, rest) = rest.split_at_mut(h);
                    let (g2, gb2) = rest.split_at_mut(c * h);
                    let mut da = vec![0.0; h];
                    for r in 0..c {
                        for u in 0..h {
                            g2[r * h + u] += dz[r] * hid[u];
                            da[u] += dz[r] * w2[r * h + u];
                        }
                        gb2[r] += dz[r];
                    }
                    for u in 0..h {
                        let dpre = da[u] * (1.0 - hid[u] * hid[u]);
                        for (g, xv) in g1[u * i..(u + 1) * i].iter_mut().zip(x) {
                            *g += dpre * xv;
                        }
                        gb1[u] += dpre;
                    }
                }
            }
        }
        let scale = 1.0 / data.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        (loss * scale, grad)
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let z = self.logits(x, None);
        z.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &v)| {
                if v > best.1 {
                    (k, v)
                } else {
                    best
                }
            })
            .0
    }

    pub fn accuracy(&self, data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = data
            .features
            .iter()
            .zip(&data.labels)
            .filter(|(x, &y)| self.predict(x) == y)
            .count();
        hits as f64 / data.len() as f64
    }
}

/// `iters` full-batch gradient steps from the current weights; returns
/// `w_i - w`.
pub fn local_update(model: &Model, data: &Dataset, eta_u: f64, iters: usize) -> Result<Vec<f64>> {
    let mut local = model.clone();
    for it in 0..iters {
        let (_, g) = local.loss_grad(data);
        if let Some(pos) = g.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient coordinate {pos} at local iteration {it}"
            )));
        }
        local
            .w
            .iter_mut()
            .zip(&g)
            .for_each(|(w, g)| *w -= eta_u * g);
    }
    Ok(local.w.iter().zip(&model.w).map(|(a, b)| a - b).collect())
}

pub fn aggregate_fedavg(updates: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = updates
        .first()
        .ok_or_else(|| Error::Precondition("no updates to average".into()))?;
    let mut acc = vec![0.0; first.len()];
    for u in updates {
        if u.len() != acc.len() {
            return Err(Error::Shape("updates differ in length".into()));
        }
        acc.iter_mut().zip(u).for_each(|(a, x)| *a += x);
    }
    let inv = 1.0 / updates.len() as f64;
    Ok(acc.into_iter().map(|a| a * inv).collect())
}

#[derive(Clone, Copy, Debug)]
pub enum TrustFn<'a> {
    Exact,
    Approx(&'a ReluApprox),
}

impl TrustFn<'_> {
    pub fn eval(&self, c: f64) -> f64 {
        match self {
            TrustFn::Exact => c.max(0.0),
            TrustFn::Approx(h) => h.eval(c),
        }
    }
}

/// `||g0|| * sum_i TS_i g_i / ||g_i|| / sum_i TS_i` with `TS_i = relu(cos)`.
pub fn aggregate_fltrust(updates: &[Vec<f64>], g0: &[f64], relu: TrustFn<'_>) -> Result<Vec<f64>> {
    let g0n = l2_norm(g0);
    let u0 = normalize(g0)?;
    let mut acc = vec![0.0; g0.len()];
    let mut total = 0.0;
    for u in updates {
        let Ok(ui) = normalize(u) else { continue };
        let cos: f64 = ui.iter().zip(&u0).map(|(a, b)| a * b).sum();
        let ts = relu.eval(cos);
        total += ts;
        acc.iter_mut().zip(&ui).for_each(|(a, x)| *a += ts * x);
    }
    if total.abs() < LOW_TRUST_MEAN * updates.len().max(1) as f64 {
        return Err(Error::LowTrustDenominator);
    }
    Ok(acc.into_iter().map(|a| g0n * a / total).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Aggregator {
    FedAvg,
    FltrustExact,
    FltrustApprox,
    ByitflSecure,
}

impl Aggregator {
    pub const ALL: [Aggregator; 4] = [
        Aggregator::FedAvg,
        Aggregator::FltrustExact,
        Aggregator::FltrustApprox,
        Aggregator::ByitflSecure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Aggregator::FedAvg => "fedavg",
            Aggregator::FltrustExact => "fltrust-exact",
            Aggregator::FltrustApprox => "fltrust-approx",
            Aggregator::ByitflSecure => "byitfl-secure",
        }
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Aggregator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Aggregator::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown aggregator {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DatasetSpec {
    Synthetic {
        dim: usize,
        classes: usize,
        separation: f64,
        samples_per_user: usize,
        test_size: usize,
    },
    Idx {
        train_images: String,
        train_labels: String,
        test_images: String,
        test_labels: String,
        /// Training examples to keep.
        limit: Option<usize>,
    },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synthetic {
            dim: 10,
            classes: 2,
            separation: 1.0,
            samples_per_user: 20,
            test_size: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n: usize,
    /// Byzantine budget of the protocol; also the default attacker count.
    pub b: usize,
    pub t: usize,
    pub p_drop: usize,
    pub m: usize,
    pub k: usize,
    pub q: u64,
    pub epsilon: f64,
    pub seed: u64,
    pub aggregator: Aggregator,
    pub attack: Option<AttackKind>,
    /// Number of attacking users when different from `b`.
    pub attackers: Option<usize>,
    /// Error budget the secure protocol runs with when different from `b`.
    pub b_protocol: Option<usize>,
    pub dataset: DatasetSpec,
    pub rounds: usize,
    pub eta: f64,
    pub eta_u: f64,
    pub root_size: usize,
    pub local_iters: usize,
    pub arch: Architecture,
    pub dropouts: DropoutSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n: 16,
            b: 0,
            t: 1,
            p_drop: 0,
            m: 1,
            k: 6,
            q: 1024,
            epsilon: 0.02,
            seed: 0,
            aggregator: Aggregator::FltrustApprox,
            attack: None,
            attackers: None,
            b_protocol: None,
            dataset: DatasetSpec::default(),
            rounds: 30,
            eta: 1.0,
            eta_u: 0.5,
            root_size: 100,
            local_iters: 1,
            arch: Architecture::Logistic,
            dropouts: DropoutSchedule::default(),
        }
    }
}

impl TrainConfig {
    pub fn attacker_count(&self) -> usize {
        if self.attack.is_none() {
            0
        } else {
            self.attackers.unwrap_or(self.b)
        }
    }

    /// Protocol parameters for model dimension `d`.
    pub fn param_spec(&self, d: usize) -> ParamSpec {
        ParamSpec {
            n: self.n,
            b: self.b_protocol.unwrap_or(self.b),
            t: self.t,
            p_drop: self.p_drop,
            m: self.m,
            k: self.k,
            q: self.q,
            epsilon: self.epsilon,
            d,
            prime: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub aggregator: String,
    pub attack: String,
    pub loss: f64,
    pub accuracy: f64,
    pub excluded_count: usize,
}

#[derive(Debug, Default)]
pub struct TrainOutput {
    pub metrics: Vec<RoundMetrics>,
    /// One JSON record per round.
    pub records: Vec<Value>,
    pub excluded: BTreeSet<usize>,
    pub attackers: BTreeSet<usize>,
    pub skipped_rounds: Vec<usize>,
    /// Transcript of the last secure round.
    pub transcript: Option<Transcript>,
    pub final_accuracy: f64,
}

/// Users' local datasets, the root dataset and the test set.
#[derive(Clone, Debug)]
pub struct FederatedData {
    pub users: Vec<Dataset>,
    pub root: Dataset,
    pub test: Dataset,
}

pub fn build_data(cfg: &TrainConfig) -> Result<FederatedData> {
    match &cfg.dataset {
        DatasetSpec::Synthetic {
            dim,
            classes,
            separation,
            samples_per_user,
            test_size,
        } => {
            let mut means = derive_rng(cfg.seed, &["blob-means"]);
            let mut rng = derive_rng(cfg.seed, &["blob-samples"]);
            let total = cfg.n * samples_per_user + cfg.root_size + test_size;
            let all = synthetic_blobs(total, *dim, *classes, *separation, &mut means, &mut rng);
            let idx: Vec<usize> = (0..total).collect();
            let users = idx[..cfg.n * samples_per_user]
                .chunks(*samples_per_user)
                .map(|c| all.subset(c))
                .collect();
            let r0 = cfg.n * samples_per_user;
            Ok(FederatedData {
                users,
                root: all.subset(&idx[r0..r0 + cfg.root_size]),
                test: all.subset(&idx[r0 + cfg.root_size..]),
            })
        }
        DatasetSpec::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            limit,
        } => {
            let train = load_idx(Path::new(train_images), Path::new(train_labels), *limit)?;
            let test = load_idx(Path::new(test_images), Path::new(test_labels), None)?;
            if train.len() < cfg.root_size + cfg.n {
                return Err(Error::Config(format!(
                    "{} training examples cannot feed {} users and a root set of {}",
                    train.len(),
                    cfg.n,
                    cfg.root_size
                )));
            }
            let mut rng = derive_rng(cfg.seed, &["idx-split"]);
            let perm = sample(&mut rng, train.len(), train.len()).into_vec();
            let root = train.subset(&perm[..cfg.root_size]);
            let rest = &perm[cfg.root_size..];
            let per = rest.len() / cfg.n;
            let users = rest
                .chunks(per)
                .take(cfg.n)
                .map(|c| train.subset(c))
                .collect();
            let classes = train.classes.max(test.classes);
            let fix = |mut d: Dataset| {
                d.classes = classes;
                d
            };
            Ok(FederatedData {
                users: users_with(classes, users),
                root: fix(root),
                test: fix(test),
            })
        }
    }
}

fn users_with(classes: usize, users: Vec<Dataset>) -> Vec<Dataset> {
    users
        .into_iter()
        .map(|mut d| {
            d.classes = classes;
            d
        })
        .collect()
}

/// Deterministic attacker placement.
pub fn choose_attackers(n: usize, count: usize, seed: u64) -> BTreeSet<usize> {
    let mut rng = derive_rng(seed, &["attackers"]);
    sample(&mut rng, n, count.min(n))
        .into_iter()
        .map(|i| i + 1)
        .collect()
}

/// Quantized federator update and user updates for one round.
pub struct QuantizedRound {
    pub g0: Vec<FieldElement>,
    pub g0_norm: f64,
    pub updates: BTreeMap<usize, Vec<FieldElement>>,
}

/// Normalizes and stochastically quantizes every update with per-party
/// streams, so the secure and plaintext paths see identical inputs.
/// `scale` lists users that inflate their normalized update before
/// quantizing. Zero updates are left out.
pub fn quantize_round(
    params: &ProtocolParams,
    seed: u64,
    round: u64,
    g0: &[f64],
    updates: &BTreeMap<usize, Vec<f64>>,
    scale: &BTreeMap<usize, f64>,
) -> Result<QuantizedRound> {
    let f = &params.field;
    let q = params.spec.q;
    let mut rng = party_rng(seed, 0, round, "quantize");
    let g0_norm = l2_norm(g0);
    let g0q = quantize(f, &normalize(g0)?, q, &mut rng)?;
    let mut out = BTreeMap::new();
    for (&i, u) in updates {
        let Ok(unit) = normalize(u) else { continue };
        let mut rng = party_rng(seed, i, round, "quantize");
        let v = match scale.get(&i) {
            Some(&s) => quantize_unchecked(f, &scale_update(&unit, s), q, &mut rng),
            None => quantize(f, &unit, q, &mut rng)?,
        };
        out.insert(i, v);
    }
    Ok(QuantizedRound {
        g0: g0q,
        g0_norm,
        updates: out,
    })
}

fn attack_label(cfg: &TrainConfig) -> String {
    cfg.attack
        .as_ref()
        .map_or_else(|| "none".to_string(), |a| a.to_string())
}

/// Runs `cfg.rounds` global iterations and records metrics per round.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutput> {
    train_with(cfg, None)
}

/// As [`train`], reusing a ReLU fit of degree `cfg.k`.
pub fn train_with(cfg: &TrainConfig, relu: Option<&ReluApprox>) -> Result<TrainOutput> {
    let mut data = build_data(cfg)?;
    let classes = data.test.classes.max(2);
    let inputs = data.test.dim();
    let mut init_rng = derive_rng(cfg.seed, &["model-init"]);
    let mut model = Model::new(cfg.arch, inputs, classes, &mut init_rng);
    let d = model.w.len();

    let attackers = choose_attackers(cfg.n, cfg.attacker_count(), cfg.seed);
    if let Some(AttackKind::LabelFlip) = cfg.attack {
        for &i in &attackers {
            label_flip(&mut data.users[i - 1].labels, classes)?;
        }
    }

    let fitted;
    let relu = match relu {
        Some(r) => r,
        None => {
            fitted = fit_relu(cfg.k, (-1.0, 1.0), FIT_NODES)?;
            &fitted
        }
    };
    let params = match cfg.aggregator {
        Aggregator::ByitflSecure => {
            Some(ProtocolParams::with_relu(cfg.param_spec(d), relu.clone())?)
        }
        Aggregator::FltrustApprox => {
            Some(ProtocolParams::plaintext(cfg.param_spec(d), relu.clone())?)
        }
        _ => None,
    };
    let protocol_attacks: Vec<AttackSpec> = match &cfg.attack {
        Some(kind) if kind.is_protocol_attack() => {
            vec![AttackSpec::new(kind.clone(), attackers.iter().copied())]
        }
        _ => Vec::new(),
    };

    let mut out = TrainOutput {
        attackers: attackers.clone(),
        ..Default::default()
    };
    let label = attack_label(cfg);
    for round in 0..cfg.rounds as u64 {
        let g0 = local_update(&model, &data.root, cfg.eta_u, cfg.local_iters)?;
        let mut updates = BTreeMap::new();
        for (i, ds) in data.users.iter().enumerate() {
            updates.insert(i + 1, local_update(&model, ds, cfg.eta_u, cfg.local_iters)?);
        }
        let mut scale = BTreeMap::new();
        if let Some(kind) = &cfg.attack {
            let honest: Vec<Vec<f64>> = updates
                .iter()
                .filter(|(i, _)| !attackers.contains(i))
                .map(|(_, u)| u.clone())
                .collect();
            for &i in &attackers {
                let mut rng = party_rng(cfg.seed, i, round, "update-attack");
                let own = &updates[&i];
                let forged = match kind {
                    AttackKind::TrimAttack => Some(trim_attack(&honest, &mut rng)?),
                    AttackKind::SignFlip => Some(sign_flip(own)),
                    AttackKind::ScaleUpdate(s) => {
                        scale.insert(i, *s);
                        Some(scale_update(own, *s))
                    }
                    _ => None,
                };
                if let Some(u) = forged {
                    updates.insert(i, u);
                }
            }
        }
        for i in &out.excluded {
            updates.remove(i);
        }

        let step: Option<Vec<f64>> = match cfg.aggregator {
            Aggregator::FedAvg => {
                let list: Vec<Vec<f64>> = updates.values().cloned().collect();
                Some(aggregate_fedavg(&list)?)
            }
            Aggregator::FltrustExact | Aggregator::FltrustApprox if params.is_none() => {
                let list: Vec<Vec<f64>> = updates.values().cloned().collect();
                match aggregate_fltrust(&list, &g0, TrustFn::Exact) {
                    Ok(g) => Some(g),
                    Err(Error::LowTrustDenominator) => None,
                    Err(e) => return Err(e),
                }
            }
            _ => {
                let params = params.as_ref().expect("built for quantized aggregators");
                match quantize_round(params, cfg.seed, round, &g0, &updates, &scale) {
                    Err(Error::ZeroUpdate) => None,
                    Err(e) => return Err(e),
                    Ok(qr) => {
                        if cfg.aggregator == Aggregator::ByitflSecure {
                            let input = RoundInput {
                                round,
                                seed: derive_seed(cfg.seed, &["protocol"]),
                                g0: qr.g0,
                                g0_norm: qr.g0_norm,
                                updates: qr.updates,
                                excluded: out.excluded.clone(),
                            };
                            let adv = RoundAdversary {
                                attacks: protocol_attacks.clone(),
                                dropouts: cfg.dropouts.clone(),
                            };
                            match run_round(params, &input, &adv) {
                                Ok((report, transcript)) => {
                                    out.records.push(report.to_json());
                                    out.excluded.extend(report.flagged());
                                    out.transcript = Some(transcript);
                                    (!report.aggregate.low_trust).then_some(report.aggregate.g)
                                }
                                Err(Error::Aborted { source, .. })
                                    if matches!(*source, Error::LowTrustDenominator) =>
                                {
                                    None
                                }
                                Err(e) => return Err(e),
                            }
                        } else {
                            match plaintext_aggregate(params, &qr.g0, qr.g0_norm, &qr.updates) {
                                Ok(plain) => {
                                    out.records.push(json!({
                                        "round": round,
                                        "excluded": plain.excluded,
                                        "sigma1": plain.sigma1.to_string(),
                                        "aggregate": plain.aggregate.g,
                                        "low_trust": plain.aggregate.low_trust,
                                    }));
                                    out.excluded.extend(&plain.excluded);
                                    (!plain.aggregate.low_trust).then_some(plain.aggregate.g)
                                }
                                Err(Error::LowTrustDenominator) => None,
                                Err(e) => return Err(e),
                            }
                        }
                    }
                }
            }
        };
        match step {
            // g_i = w_i - w points downhill, so the global step adds it
            Some(g) => model
                .w
                .iter_mut()
                .zip(&g)
                .for_each(|(w, g)| *w += cfg.eta * g),
            None => out.skipped_rounds.push(round as usize + 1),
        }
        if !matches!(
            cfg.aggregator,
            Aggregator::FltrustApprox | Aggregator::ByitflSecure
        ) {
            out.records
                .push(json!({ "round": round, "skipped": step_skipped(&out, round) }));
        }
        let (loss, _) = model.loss_grad(&data.test);
        out.metrics.push(RoundMetrics {
            round: round as usize + 1,
            aggregator: cfg.aggregator.to_string(),
            attack: label.clone(),
            loss,
            accuracy: model.accuracy(&data.test),
            excluded_count: out.excluded.len(),
        });
    }
    out.final_accuracy = out
        .metrics
        .last()
        .map_or_else(|| model.accuracy(&data.test), |m| m.accuracy);
    Ok(out)
}

fn step_skipped(out: &TrainOutput, round: u64) -> bool {
    out.skipped_rounds.contains(&(round as usize + 1))
}
