use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use byitfl::adversary::{AttackKind, AttackSpec};
use byitfl::config::{load_config, to_text};
use byitfl::fl::{choose_attackers, train, Aggregator, Model, TrainConfig, TrainOutput};
use byitfl::net::Transcript;
use byitfl::protocol::{
    min_users, plaintext_aggregate, run_round, synthetic_input, ProtocolParams, RoundAdversary,
    RoundReport,
};
use byitfl::quant::{dequantize, quantize_unchecked};
use byitfl::relu::fit_relu;
use byitfl::rng::party_rng;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

mod output;

use output::{write_json, write_metrics, write_transcript};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Core(#[from] byitfl::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
    #[error("replay diverged: {0}")]
    Diverged(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(byitfl::Error::ParamsInfeasible(_)) => 2,
            CliError::Diverged(_) => 3,
            _ => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Parser)]
#[command(
    name = "byitfl",
    version,
    about = "Byzantine-resilient secure aggregation experiments"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the user-count bound and pick the field prime.
    CheckParams(CheckParams),
    /// Least-squares polynomial fit of ReLU.
    FitRelu(FitRelu),
    /// One protocol round on synthetic updates.
    RunProtocol(RunProtocol),
    /// Federated training with the configured aggregator.
    Train(Train),
    /// Re-execute the run that produced a transcript and compare.
    Replay(Replay),
    /// Every attack against every aggregator.
    AttackBench(AttackBench),
}

#[derive(Args)]
struct ConfigArg {
    /// Flat `key = value` config; defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> CliResult<TrainConfig> {
        let text = match &self.config {
            Some(p) => read(p)?,
            None => String::new(),
        };
        Ok(load_config(&text)?)
    }
}

#[derive(Args)]
struct CheckParams {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    p_drop: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    q: Option<u64>,
    /// Model dimension; derived from the config's model when omitted.
    #[arg(long)]
    d: Option<usize>,
    /// Validate this prime instead of choosing one.
    #[arg(long)]
    prime: Option<String>,
    /// Only evaluate the user-count bound.
    #[arg(long)]
    no_prime: bool,
}

#[derive(Args)]
struct FitRelu {
    #[arg(long, default_value_t = 6)]
    k: usize,
    /// Symmetric interval `a,b`.
    #[arg(long, default_value = "-1,1", allow_hyphen_values = true)]
    interval: String,
    #[arg(long, default_value_t = byitfl::protocol::FIT_NODES)]
    nodes: usize,
    /// Rows in the curve CSV.
    #[arg(long, default_value_t = 201)]
    points: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RunProtocol {
    #[command(flatten)]
    config: ConfigArg,
    /// Noise added to the synthetic updates around `g0`.
    #[arg(long, default_value_t = 0.5)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    round: u64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct Train {
    #[command(flatten)]
    config: ConfigArg,
    /// Run several configs in parallel, each into `<out-dir>/<file stem>`.
    #[arg(long, num_args = 1.., conflicts_with = "config")]
    sweep: Vec<PathBuf>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct Replay {
    /// Binary transcript; its JSON index is expected alongside.
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    index: Option<PathBuf>,
}

#[derive(Args)]
struct AttackBench {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "none,trim,label_flip,sign_flip,scale:2"
    )]
    attacks: Vec<String>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "fedavg,fltrust-exact,fltrust-approx,byitfl-secure"
    )]
    aggregators: Vec<String>,
    #[arg(long, default_value = "bench")]
    out_dir: PathBuf,
}

fn model_dim(cfg: &TrainConfig) -> CliResult<usize> {
    use byitfl::fl::DatasetSpec;
    match &cfg.dataset {
        DatasetSpec::Synthetic { dim, classes, .. } => {
            Ok(Model::dim(cfg.arch, *dim, (*classes).max(2)))
        }
        DatasetSpec::Idx { .. } => {
            let data = byitfl::fl::build_data(cfg)?;
            Ok(Model::dim(
                cfg.arch,
                data.test.dim(),
                data.test.classes.max(2),
            ))
        }
    }
}

fn check_params(a: &CheckParams) -> CliResult<()> {
    let cfg = a.config.load()?;
    let d = match a.d {
        Some(d) => d,
        None => model_dim(&cfg)?,
    };
    let mut spec = cfg.param_spec(d);
    macro_rules! over {
        ($($f:ident),*) => { $(if let Some(v) = a.$f { spec.$f = v; })* };
    }
    over!(n, b, t, p_drop, m, k, q);
    if let Some(p) = &a.prime {
        spec.prime = Some(
            p.parse()
                .map_err(|_| CliError::Usage(format!("--prime: not an integer: {p}")))?,
        );
    }
    let need = min_users(spec.b, spec.k, spec.m, spec.t, spec.p_drop);
    println!(
        "min_users = {need} (2b+(k+2)(m+t-1)+p+1 with b={}, k={}, m={}, t={}, p={})",
        spec.b, spec.k, spec.m, spec.t, spec.p_drop
    );
    spec.check()?;
    println!("n = {}: OK", spec.n);
    if !a.no_prime {
        let params = ProtocolParams::new(spec)?;
        let p = params.field.modulus();
        println!("prime: {} bits", params.field.bits());
        println!("P = {p}");
        println!(
            "prime lower bound = {}",
            params.guards.required_prime_lower_bound()
        );
    }
    Ok(())
}

fn parse_interval(s: &str) -> CliResult<(f64, f64)> {
    let bad = || CliError::Usage(format!("--interval: expected a,b, got {s:?}"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

fn fit_relu_cmd(a: &FitRelu) -> CliResult<()> {
    let interval = parse_interval(&a.interval)?;
    let h = fit_relu(a.k, interval, a.nodes)?;
    fs::create_dir_all(&a.out_dir).map_err(|source| CliError::Io {
        path: a.out_dir.clone(),
        source,
    })?;
    let stem = format!("relu_k{}", a.k);
    let json_path = a.out_dir.join(format!("{stem}.json"));
    write_json(
        &json_path,
        &json!({
            "k": h.k,
            "interval": [h.interval.0, h.interval.1],
            "coefficients": h.real_coeffs,
            "max_abs_error": h.max_abs_error,
            "nodes": h.nodes,
            "chebyshev_fallback": h.chebyshev,
        }),
    )?;
    let csv_path = a.out_dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["x", "relu", "h"])?;
    for (x, r, hx) in h.curve(a.points) {
        w.write_record([x.to_string(), r.to_string(), hx.to_string()])?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: csv_path.clone(),
        source,
    })?;
    println!("k = {}, max_abs_error = {:.6e}", h.k, h.max_abs_error);
    println!("coefficients = {:?}", h.real_coeffs);
    println!("wrote {} and {}", json_path.display(), csv_path.display());
    Ok(())
}

/// The protocol round `run-protocol` executes, reproducible from the config.
fn protocol_round(
    cfg: &TrainConfig,
    spread: f64,
    round: u64,
) -> CliResult<(ProtocolParams, RoundReport, Transcript, Value)> {
    let d = model_dim(cfg)?;
    let params = ProtocolParams::new(cfg.param_spec(d))?;
    let mut input = synthetic_input(&params, cfg.seed, round, spread)?;
    let attackers = choose_attackers(cfg.n, cfg.attacker_count(), cfg.seed);
    let mut adv = RoundAdversary {
        attacks: Vec::new(),
        dropouts: cfg.dropouts.clone(),
    };
    match &cfg.attack {
        None => {}
        Some(kind) if kind.is_protocol_attack() => {
            adv.attacks
                .push(AttackSpec::new(kind.clone(), attackers.iter().copied()));
        }
        Some(AttackKind::ScaleUpdate(s)) => {
            for &i in &attackers {
                let Some(u) = input.updates.get(&i) else {
                    continue;
                };
                let scaled: Vec<f64> = u
                    .iter()
                    .map(|x| dequantize(&params.field, x, params.spec.q).map(|v| v * s))
                    .collect::<byitfl::Result<_>>()?;
                let mut rng = party_rng(cfg.seed, i, round, "scale");
                input.updates.insert(
                    i,
                    quantize_unchecked(&params.field, &scaled, params.spec.q, &mut rng),
                );
            }
        }
        Some(other) => {
            return Err(CliError::Usage(format!(
                "run-protocol supports protocol attacks and scale; {other} needs `train`"
            )))
        }
    }
    let (report, transcript) = run_round(&params, &input, &adv)?;
    let honest: std::collections::BTreeMap<_, _> = input
        .updates
        .iter()
        .filter(|(i, _)| report.contributors.contains(i) && !report.disqualified.contains_key(i))
        .map(|(i, u)| (*i, u.clone()))
        .collect();
    let oracle = plaintext_aggregate(&params, &input.g0, input.g0_norm, &honest)?;
    let matches = oracle.aggregate.quotients == report.aggregate.quotients;
    let extra = json!({
        "attackers": attackers,
        "oracle_match": matches,
        "prime_bits": params.field.bits(),
        "d": d,
    });
    Ok((params, report, transcript, extra))
}

fn mkdir(p: &Path) -> CliResult<()> {
    fs::create_dir_all(p).map_err(|source| CliError::Io {
        path: p.to_path_buf(),
        source,
    })
}

fn run_protocol(a: &RunProtocol) -> CliResult<()> {
    let cfg = a.config.load()?;
    let start = Instant::now();
    let (_, report, transcript, extra) = protocol_round(&cfg, a.spread, a.round)?;
    let wall = start.elapsed().as_secs_f64();
    mkdir(&a.out_dir)?;
    write_json(&a.out_dir.join("round.json"), &report.to_json())?;
    let meta = json!({
        "command": "run-protocol",
        "config": to_text(&cfg),
        "spread": a.spread,
        "round": a.round,
    });
    write_transcript(&a.out_dir, "transcript", &transcript, meta)?;
    write_json(
        &a.out_dir.join("summary.json"),
        &json!({
            "excluded": report.excluded,
            "disqualified": report.disqualified.keys().collect::<Vec<_>>(),
            "identified": report.identified,
            "dropped": report.dropped,
            "oracle_match": extra["oracle_match"],
            "attackers": extra["attackers"],
            "d": extra["d"],
            "prime_bits": extra["prime_bits"],
            "transcript_records": transcript.len(),
            "wall_time_s": wall,
        }),
    )?;
    println!("live = {:?}", report.live);
    println!("excluded = {:?}", report.excluded);
    println!(
        "disqualified = {:?}",
        report.disqualified.keys().collect::<Vec<_>>()
    );
    println!("identified = {:?}", report.identified);
    println!("oracle_match = {}", extra["oracle_match"]);
    println!(
        "aggregate[..4] = {:?}",
        &report.aggregate.g[..report.aggregate.g.len().min(4)]
    );
    println!(
        "wall time {wall:.2}s, {} transcript records",
        transcript.len()
    );
    Ok(())
}

fn train_one(cfg: &TrainConfig, out_dir: &Path) -> CliResult<(TrainOutput, f64)> {
    let start = Instant::now();
    let out = train(cfg)?;
    let wall = start.elapsed().as_secs_f64();
    mkdir(out_dir)?;
    fs::write(out_dir.join("config.txt"), to_text(cfg)).map_err(|source| CliError::Io {
        path: out_dir.join("config.txt"),
        source,
    })?;
    write_metrics(&out_dir.join("metrics.csv"), &out.metrics)?;
    let rounds = out_dir.join("rounds");
    mkdir(&rounds)?;
    for (i, rec) in out.records.iter().enumerate() {
        write_json(&rounds.join(format!("round_{:04}.json", i + 1)), rec)?;
    }
    if let Some(tr) = &out.transcript {
        let meta = json!({ "command": "train", "config": to_text(cfg) });
        write_transcript(out_dir, "transcript", tr, meta)?;
    }
    write_json(
        &out_dir.join("summary.json"),
        &json!({
            "final_accuracy": out.final_accuracy,
            "excluded": out.excluded,
            "attackers": out.attackers,
            "skipped_rounds": out.skipped_rounds,
            "aggregator": cfg.aggregator.as_str(),
            "rounds": cfg.rounds,
            "wall_time_s": wall,
        }),
    )?;
    Ok((out, wall))
}

fn train_cmd(a: &Train) -> CliResult<()> {
    if a.sweep.is_empty() {
        let cfg = a.config.load()?;
        let (out, wall) = train_one(&cfg, &a.out_dir)?;
        for m in &out.metrics {
            println!(
                "round {:>3}  loss {:.4}  acc {:.4}  excluded {}",
                m.round, m.loss, m.accuracy, m.excluded_count
            );
        }
        println!(
            "final accuracy {:.4}, excluded {:?}, {wall:.2}s",
            out.final_accuracy, out.excluded
        );
        return Ok(());
    }
    let jobs: Vec<(String, TrainConfig)> = a
        .sweep
        .iter()
        .map(|p| {
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".into());
            Ok((stem, load_config(&read(p)?)?))
        })
        .collect::<CliResult<_>>()?;
    let names: BTreeSet<&String> = jobs.iter().map(|(n, _)| n).collect();
    if names.len() != jobs.len() {
        return Err(CliError::Usage(
            "sweep configs must have distinct file names".into(),
        ));
    }
    let results: Vec<CliResult<(TrainOutput, f64)>> = jobs
        .par_iter()
        .map(|(name, cfg)| train_one(cfg, &a.out_dir.join(name)))
        .collect();
    mkdir(&a.out_dir)?;
    let mut w = csv::Writer::from_path(a.out_dir.join("sweep.csv"))?;
    w.write_record([
        "name",
        "aggregator",
        "attack",
        "final_accuracy",
        "excluded_count",
        "status",
    ])?;
    let mut failed = 0;
    for ((name, cfg), res) in jobs.iter().zip(results) {
        let attack = cfg
            .attack
            .as_ref()
            .map_or("none".to_string(), ToString::to_string);
        match res {
            Ok((out, _)) => {
                println!("{name}: final accuracy {:.4}", out.final_accuracy);
                w.write_record([
                    name.clone(),
                    cfg.aggregator.to_string(),
                    attack,
                    out.final_accuracy.to_string(),
                    out.excluded.len().to_string(),
                    "ok".into(),
                ])?;
            }
            Err(e) => {
                failed += 1;
                eprintln!("{name}: {e}");
                w.write_record([
                    name.clone(),
                    cfg.aggregator.to_string(),
                    attack,
                    String::new(),
                    String::new(),
                    e.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(|source| CliError::Io {
        path: a.out_dir.join("sweep.csv"),
        source,
    })?;
    if failed > 0 {
        return Err(CliError::Usage(format!(
            "{failed} of {} sweep runs failed",
            jobs.len()
        )));
    }
    Ok(())
}

fn replay(a: &Replay) -> CliResult<()> {
    let bytes = fs::read(&a.log).map_err(|source| CliError::Io {
        path: a.log.clone(),
        source,
    })?;
    let recorded = Transcript::from_bytes(&bytes)?;
    let index_path = a
        .index
        .clone()
        .unwrap_or_else(|| a.log.with_extension("json"));
    let index: Value = serde_json::from_str(&read(&index_path)?)?;
    let meta = &index["meta"];
    let cfg_text = meta["config"]
        .as_str()
        .ok_or_else(|| CliError::Usage(format!("{}: no recorded config", index_path.display())))?;
    let cfg = byitfl::config::parse_config(cfg_text, None)?;
    let fresh = match meta["command"].as_str() {
        Some("run-protocol") => {
            let spread = meta["spread"].as_f64().unwrap_or(0.5);
            let round = meta["round"].as_u64().unwrap_or(0);
            protocol_round(&cfg, spread, round)?.2
        }
        Some("train") => train(&cfg)?
            .transcript
            .ok_or_else(|| CliError::Diverged("re-run produced no transcript".into()))?,
        other => {
            return Err(CliError::Usage(format!(
                "unknown recorded command {other:?}"
            )))
        }
    };
    if fresh.to_bytes() == bytes {
        println!("replay OK: {} records identical", recorded.len());
        return Ok(());
    }
    let pos = recorded
        .entries()
        .iter()
        .zip(fresh.entries())
        .position(|(a, b)| a != b)
        .unwrap_or(recorded.len().min(fresh.len()));
    Err(CliError::Diverged(format!(
        "first difference at record {pos} (recorded {} records, re-run {})",
        recorded.len(),
        fresh.len()
    )))
}

fn attack_bench(a: &AttackBench) -> CliResult<()> {
    let base = a.config.load()?;
    let attacks: Vec<Option<AttackKind>> = a
        .attacks
        .iter()
        .map(|s| match s.as_str() {
            "none" => Ok(None),
            s => s.parse().map(Some),
        })
        .collect::<byitfl::Result<_>>()?;
    let aggregators: Vec<Aggregator> = a
        .aggregators
        .iter()
        .map(|s| s.parse())
        .collect::<byitfl::Result<_>>()?;
    let jobs: Vec<TrainConfig> = attacks
        .iter()
        .flat_map(|atk| {
            aggregators.iter().map(|agg| TrainConfig {
                attack: atk.clone(),
                aggregator: *agg,
                ..base.clone()
            })
        })
        .collect();
    let results: Vec<byitfl::Result<TrainOutput>> = jobs.par_iter().map(train).collect();
    mkdir(&a.out_dir)?;
    let mut bench = csv::Writer::from_path(a.out_dir.join("bench.csv"))?;
    bench.write_record([
        "attack",
        "aggregator",
        "final_accuracy",
        "excluded_count",
        "skipped_rounds",
        "status",
    ])?;
    let mut all = Vec::new();
    println!(
        "{:<14} {:<16} {:>9} {:>9}",
        "attack", "aggregator", "accuracy", "excluded"
    );
    for (cfg, res) in jobs.iter().zip(results) {
        let attack = cfg
            .attack
            .as_ref()
            .map_or("none".to_string(), ToString::to_string);
        match res {
            Ok(out) => {
                println!(
                    "{:<14} {:<16} {:>9.4} {:>9}",
                    attack,
                    cfg.aggregator.as_str(),
                    out.final_accuracy,
                    out.excluded.len()
                );
                bench.write_record([
                    attack,
                    cfg.aggregator.to_string(),
                    out.final_accuracy.to_string(),
                    out.excluded.len().to_string(),
                    out.skipped_rounds.len().to_string(),
                    "ok".into(),
                ])?;
                all.extend(out.metrics);
            }
            Err(e) => {
                println!("{:<14} {:<16} {e}", attack, cfg.aggregator.as_str());
                bench.write_record([
                    attack,
                    cfg.aggregator.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.to_string(),
                ])?;
            }
        }
    }
    bench.flush().map_err(|source| CliError::Io {
        path: a.out_dir.join("bench.csv"),
        source,
    })?;
    write_metrics(&a.out_dir.join("metrics.csv"), &all)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Command::CheckParams(a) => check_params(a),
        Command::FitRelu(a) => fit_relu_cmd(a),
        Command::RunProtocol(a) => run_protocol(a),
        Command::Train(a) => train_cmd(a),
        Command::Replay(a) => replay(a),
        Command::AttackBench(a) => attack_bench(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
