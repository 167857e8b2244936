use std::collections::BTreeSet;
use std::fs;

use byitfl::adversary::AttackKind;
use byitfl::config::parse_config;
use byitfl::fl::{train, Aggregator, DatasetSpec, TrainConfig};
use byitfl::net::Transcript;

fn convex(aggregator: Aggregator) -> TrainConfig {
    TrainConfig {
        n: 9,
        b: 0,
        aggregator,
        rounds: 20,
        eta: 0.2,
        eta_u: 0.2,
        seed: 5,
        dataset: DatasetSpec::Synthetic {
            dim: 3,
            classes: 2,
            separation: 2.0,
            samples_per_user: 200,
            test_size: 4000,
        },
        root_size: 400,
        ..TrainConfig::default()
    }
}

#[test]
fn honest_convex_training_does_not_increase_loss() {
    for agg in Aggregator::ALL {
        let out = train(&convex(agg)).unwrap();
        assert!(
            out.skipped_rounds.is_empty(),
            "{agg}: skipped {:?}",
            out.skipped_rounds
        );
        assert!(
            out.excluded.is_empty(),
            "{agg}: excluded {:?}",
            out.excluded
        );
        for w in out.metrics.windows(2) {
            assert!(
                w[1].loss <= w[0].loss + 1e-9,
                "{agg}: loss rose from {} to {} at round {}",
                w[0].loss,
                w[1].loss,
                w[1].round
            );
        }
    }
}

#[test]
fn secure_and_plaintext_approx_follow_the_same_trajectory() {
    let mut cfg = convex(Aggregator::FltrustApprox);
    cfg.rounds = 4;
    cfg.attack = Some(AttackKind::SignFlip);
    cfg.attackers = Some(2);
    let plain = train(&cfg).unwrap();
    cfg.aggregator = Aggregator::ByitflSecure;
    let secure = train(&cfg).unwrap();
    assert_eq!(plain.metrics.len(), secure.metrics.len());
    for (a, b) in plain.metrics.iter().zip(&secure.metrics) {
        assert_eq!(
            (a.loss, a.accuracy, a.excluded_count),
            (b.loss, b.accuracy, b.excluded_count)
        );
    }
    assert!(secure.transcript.is_some());
    assert!(plain.transcript.is_none());
}

fn untimed(records: &[serde_json::Value]) -> Vec<serde_json::Value> {
    records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.as_object_mut().unwrap().remove("timing_ms");
            r
        })
        .collect()
}

#[test]
fn training_is_deterministic_in_the_seed() {
    let mut cfg = convex(Aggregator::ByitflSecure);
    cfg.rounds = 2;
    let a = train(&cfg).unwrap();
    let b = train(&cfg).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(untimed(&a.records), untimed(&b.records));
    let (ta, tb) = (a.transcript.unwrap(), b.transcript.unwrap());
    assert_eq!(ta.to_bytes(), tb.to_bytes());
    assert_eq!(Transcript::from_bytes(&ta.to_bytes()).unwrap(), ta);

    cfg.seed += 1;
    let c = train(&cfg).unwrap();
    assert_ne!(a.metrics, c.metrics);
}

#[test]
fn scaled_attackers_are_excluded_by_the_norm_check() {
    let mut cfg = convex(Aggregator::ByitflSecure);
    cfg.b = 1;
    cfg.n = 11;
    cfg.rounds = 2;
    cfg.attack = Some(AttackKind::ScaleUpdate(3.0));
    let out = train(&cfg).unwrap();
    assert_eq!(out.attackers.len(), 1);
    assert_eq!(out.excluded, out.attackers);
    assert!(out.metrics.iter().all(|m| m.excluded_count == 1));
}

#[test]
fn dropout_beyond_budget_aborts_with_round() {
    let mut cfg = convex(Aggregator::ByitflSecure);
    cfg.rounds = 3;
    cfg = parse_config(
        &format!("{}dropouts = 4@1:mask\n", byitfl::config::to_text(&cfg)),
        None,
    )
    .unwrap();
    let err = train(&cfg).unwrap_err().to_string();
    assert!(err.contains("dropout") || err.contains("p_drop"), "{err}");
}

fn idx_file(dims: &[u32], body: &[u8]) -> Vec<u8> {
    let mut out = vec![0, 0, 0x08, dims.len() as u8];
    for d in dims {
        out.extend(d.to_be_bytes());
    }
    out.extend(body);
    out
}

#[test]
fn trains_on_idx_files() {
    let dir = tempfile::tempdir().unwrap();
    // 4x4 images: class 0 lights the left half, class 1 the right half
    let write = |stem: &str, count: usize| {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for s in 0..count {
            let label = (s % 2) as u8;
            labels.push(label);
            for px in 0..16 {
                let left = px % 4 < 2;
                images.push(if left == (label == 0) {
                    200 + (s % 50) as u8
                } else {
                    (s % 30) as u8
                });
            }
        }
        let img = dir.path().join(format!("{stem}-images"));
        let lab = dir.path().join(format!("{stem}-labels"));
        fs::write(&img, idx_file(&[count as u32, 4, 4], &images)).unwrap();
        fs::write(&lab, idx_file(&[count as u32], &labels)).unwrap();
        (img.display().to_string(), lab.display().to_string())
    };
    let (tri, trl) = write("train", 1000);
    let (tei, tel) = write("test", 200);
    let text = format!(
        "n = 9\nrounds = 5\naggregator = fltrust-exact\ndataset = idx\ntrain_images = {tri}\n\
         train_labels = {trl}\ntest_images = {tei}\ntest_labels = {tel}\n"
    );
    let out = train(&parse_config(&text, None).unwrap()).unwrap();
    assert_eq!(out.metrics.len(), 5);
    assert!(out.final_accuracy > 0.95, "accuracy {}", out.final_accuracy);
    assert_eq!(out.excluded, BTreeSet::new());
}
