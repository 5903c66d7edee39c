use ilm_core::engine::{generations_to_threshold_from, Replicate};
use ilm_core::io::records::{loss_rows, losses_csv, metrics_csv, MetricRow};
use ilm_core::{
    agreement, baseline_for, run_experiment, run_experiment_with, run_replicate, run_until_egood,
    AgentKind, AutoDirection, AutoMode, ExperimentConfig, GenerationRecord, LanguageTable, Loss,
    ReplicateOutcome,
};

fn small(model: AgentKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(model);
    cfg.n = 6;
    cfg.hidden = 6;
    cfg.bottleneck = 20;
    cfg.auto_size = 20;
    cfg.generations = 4;
    cfg.replicates = 4;
    cfg.epochs = 5;
    cfg.seed = 11;
    cfg
}

/// Wall-clock durations are the only nondeterministic field.
fn untimed(mut records: Vec<GenerationRecord>) -> Vec<GenerationRecord> {
    for r in &mut records {
        r.duration_ms = 0.0;
    }
    records
}

fn untimed_outcome(mut o: ReplicateOutcome) -> ReplicateOutcome {
    o.records = untimed(o.records);
    o
}

fn csv_bytes(cfg: &ExperimentConfig) -> (Vec<u8>, Vec<u8>) {
    let out = run_experiment(cfg).unwrap();
    let records = out.records();
    let rows: Vec<MetricRow> = records
        .iter()
        .map(|r| MetricRow::from_record(r, false))
        .collect();
    (
        metrics_csv(&rows).unwrap(),
        losses_csv(&loss_rows(&records)).unwrap(),
    )
}

#[test]
fn worker_count_does_not_change_output() {
    for model in [AgentKind::Oilm, AgentKind::Ailm, AgentKind::OneWay] {
        let mut cfg = small(model);
        cfg.workers = 1;
        let one = csv_bytes(&cfg);
        cfg.workers = 3;
        let three = csv_bytes(&cfg);
        assert_eq!(one, three, "{model:?}");
        assert_eq!(one, csv_bytes(&cfg), "{model:?} rerun");
    }
}

#[test]
fn single_replicate_experiment_is_run_replicate() {
    let mut cfg = small(AgentKind::Ailm);
    cfg.replicates = 1;
    let out = run_experiment(&cfg).unwrap();
    let direct = run_replicate(&cfg, &out.baseline, 0);
    let got: Vec<_> = out.replicates.into_iter().map(untimed_outcome).collect();
    assert_eq!(got, vec![untimed_outcome(direct)]);
}

#[test]
fn early_stop_is_a_prefix() {
    let cfg = small(AgentKind::Oilm);
    let full = run_experiment(&cfg).unwrap();
    let cut = run_experiment_with(&cfg, full.baseline.clone(), |g, _| g == 2).unwrap();
    for (a, b) in cut.replicates.iter().zip(&full.replicates) {
        assert_eq!(a.records.len(), 2);
        assert_eq!(untimed(a.records.clone()), untimed(b.records[..2].to_vec()));
    }
}

#[test]
fn mismatched_baseline_is_rejected() {
    let cfg = small(AgentKind::Oilm);
    let mut other = cfg.clone();
    other.n = 5;
    let b = baseline_for(&other).unwrap();
    assert!(run_experiment_with(&cfg, b, |_, _| false).is_err());
}

#[test]
fn stability_is_measured_against_the_previous_tutor() {
    // one-way agents score stability as agreement of consecutive tables
    let cfg = small(AgentKind::OneWay);
    let baseline = baseline_for(&cfg).unwrap();
    let mut rep = Replicate::new(&cfg, &baseline, 0).unwrap();
    for _ in 0..3 {
        let before = rep.tutor().clone();
        let rec = rep.step().unwrap();
        assert_eq!(rec.raw.s, agreement(&before, rep.tutor()).unwrap());
        assert_eq!(rec.generation, rep.generation());
    }
}

fn identity(n: usize) -> LanguageTable {
    LanguageTable::from_indices(n, (0..1u32 << n).collect()).unwrap()
}

#[test]
fn full_bottleneck_copies_a_compositional_tutor() {
    let mut cfg = ExperimentConfig::new(AgentKind::Oilm);
    cfg.n = 4;
    cfg.hidden = 4;
    cfg.bottleneck = 16;
    cfg.auto_size = 16;
    // the squared-error default copies this tutor in only a few runs at eta 1
    cfg.loss = Loss::CrossEntropy;
    let baseline = baseline_for(&cfg).unwrap();
    let tutor = LanguageTable::from_indices(4, (0..16u32).map(|m| m ^ 0b0101).collect()).unwrap();
    let good = (0..25)
        .filter(|&id| {
            let mut rep = Replicate::with_tutor(&cfg, &baseline, id, tutor.clone()).unwrap();
            rep.step().unwrap().raw.s >= 0.95
        })
        .count();
    assert!(good >= 20, "{good} of 25");
}

#[test]
fn injected_egood_tutor_meets_threshold_at_once() {
    let mut cfg = ExperimentConfig::new(AgentKind::Ailm);
    cfg.bottleneck = 75;
    cfg.auto_mode = AutoMode::Independent;
    cfg.auto_size = 225;
    cfg.gen_cap = 10;
    let baseline = baseline_for(&cfg).unwrap();
    for id in 0..4 {
        let g = generations_to_threshold_from(&cfg, &baseline, id, identity(8)).unwrap();
        assert!(matches!(g, Some(1 | 2)), "replicate {id}: {g:?}");
    }
}

#[test]
fn one_way_never_reaches_threshold() {
    let mut cfg = ExperimentConfig::new(AgentKind::OneWay);
    cfg.gen_cap = 25;
    cfg.replicates = 4;
    let out = run_until_egood(&cfg).unwrap();
    assert!(out.all_capped(), "{out:?}");
    assert_eq!(out.mean(), 25.0);
}

#[test]
fn autoencoder_model_reaches_threshold_in_finite_time() {
    let mut cfg = ExperimentConfig::new(AgentKind::Ailm);
    cfg.bottleneck = 75;
    cfg.auto_mode = AutoMode::Independent;
    cfg.auto_size = 225;
    cfg.auto_direction = AutoDirection::M2m;
    cfg.replicates = 4;
    cfg.gen_cap = 100;
    let out = run_until_egood(&cfg).unwrap();
    assert_eq!(out.capped(), 0, "{out:?}");
    assert!(out.mean() < 50.0, "{out:?}");
}
