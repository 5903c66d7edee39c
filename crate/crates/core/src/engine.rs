//! Generational loop, replicate fan-out, threshold runs and bottleneck sweeps.
//!
//! Every replicate draws from its own named random streams, derived from the
//! master seed, so results do not depend on scheduling or worker count.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::agents::{
    make_auto_set, make_bottleneck, Agent, AgentKind, AilmAgent, AutoDirection, AutoMode,
    OilmAgent, OneWayAgent, TrainLog,
};
use crate::error::{Error, Result};
use crate::lang::{space_size, LanguageTable, MAX_LEN};
use crate::metrics::{
    agent_stability, compositionality, estimate_baseline, expressivity, BaselineEstimate,
    MetricTriple,
};
use crate::neural::{Loss, TrainConfig};

/// Identifies the random generator and stream derivation in run metadata.
pub const RNG_ALGORITHM: &str = "chacha8(rand_chacha-0.9,seed_from_u64)+splitmix64-streams";

/// Named random streams of a replicate.
pub mod stream {
    pub const INIT: &str = "init";
    pub const BOTTLENECK: &str = "bottleneck";
    pub const SHUFFLE: &str = "shuffle";
    pub const AUTO_SET: &str = "auto_set";
    pub const AUTO: &str = "auto";
    pub const BASELINE: &str = "baseline";
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn tag_hash(tag: &str) -> u64 {
    // FNV-1a
    tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Child seed for `(master, replicate, tag)`. For a fixed master seed and tag
/// the map from replicate id to seed is a bijection.
pub fn derive_seed(master: u64, replicate: u64, tag: &str) -> u64 {
    let x = splitmix64(master) ^ splitmix64(replicate.wrapping_add(0x5851_F42D_4C95_7F2D));
    splitmix64(splitmix64(x) ^ tag_hash(tag))
}

pub fn stream_rng(master: u64, replicate: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, replicate, tag))
}

/// Everything needed to run one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: AgentKind,
    pub n: usize,
    pub hidden: usize,
    pub bottleneck: usize,
    pub auto_size: usize,
    pub auto_mode: AutoMode,
    pub auto_direction: AutoDirection,
    pub r: usize,
    pub eta: f64,
    pub epochs: usize,
    pub loss: Loss,
    pub generations: usize,
    pub replicates: usize,
    pub lambda: f64,
    pub seed: u64,
    /// Generation cap for threshold runs.
    pub gen_cap: usize,
    /// Worker threads for replicates; 0 uses the rayon default.
    pub workers: usize,
    pub allow_large_obversion: bool,
    /// Divides the autoencoder loss in loss plots; `None` means `r`.
    pub loss_divisor: Option<f64>,
}

impl ExperimentConfig {
    /// Defaults for a model: n = 8, bottleneck 50, shared auto set, r = 20,
    /// 20 epochs, 40 generations, 25 replicates, lambda 0.95, and a learning
    /// rate of 5.0 for the autoencoder model and 1.0 otherwise.
    pub fn new(model: AgentKind) -> Self {
        ExperimentConfig {
            model,
            n: 8,
            hidden: 8,
            bottleneck: 50,
            auto_size: 50,
            auto_mode: AutoMode::Shared,
            auto_direction: AutoDirection::M2m,
            r: 20,
            eta: default_eta(model),
            epochs: 20,
            loss: Loss::default(),
            generations: 40,
            replicates: 25,
            lambda: 0.95,
            seed: 1,
            gen_cap: 500,
            workers: 0,
            allow_large_obversion: false,
            loss_divisor: None,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            eta: self.eta,
            loss: self.loss,
            epochs: self.epochs,
        }
    }

    pub fn reporting_divisor(&self) -> f64 {
        match self.loss_divisor {
            Some(d) => d,
            None if self.r > 0 => self.r as f64,
            None => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_LEN {
            return Err(Error::config(
                "n",
                format!("{} must lie in [1, {MAX_LEN}]", self.n),
            ));
        }
        if self.hidden == 0 {
            return Err(Error::config("hidden", "must be at least 1"));
        }
        let total = space_size(self.n);
        if self.bottleneck == 0 || self.bottleneck > total {
            return Err(Error::config(
                "bottleneck",
                format!(
                    "{} must lie in [1, 2^{} = {total}]",
                    self.bottleneck, self.n
                ),
            ));
        }
        if self.model == AgentKind::Ailm {
            match self.auto_mode {
                AutoMode::Shared if self.auto_size != self.bottleneck => {
                    return Err(Error::config(
                        "auto_size",
                        format!(
                            "shared auto mode needs auto_size = bottleneck ({} != {})",
                            self.auto_size, self.bottleneck
                        ),
                    ));
                }
                AutoMode::Independent if self.auto_size == 0 || self.auto_size > total => {
                    return Err(Error::config(
                        "auto_size",
                        format!("{} must lie in [1, 2^{} = {total}]", self.auto_size, self.n),
                    ));
                }
                _ => {}
            }
        }
        if self.model == AgentKind::Oilm
            && self.n > crate::agents::OBVERSION_CAP
            && !self.allow_large_obversion
        {
            return Err(Error::config(
                "n",
                format!(
                    "oilm obversion at n = {} tabulates 2^{} (meaning, signal) probabilities; \
                     the limit is n = {} unless allow_large_obversion is set",
                    self.n,
                    2 * self.n,
                    crate::agents::OBVERSION_CAP
                ),
            ));
        }
        self.train_config().validate()?;
        if self.generations == 0 {
            return Err(Error::config("generations", "must be at least 1"));
        }
        if self.replicates == 0 {
            return Err(Error::config("replicates", "must be at least 1"));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::config(
                "lambda",
                format!("{} must lie in (0, 1)", self.lambda),
            ));
        }
        if self.gen_cap == 0 {
            return Err(Error::config("gen_cap", "must be at least 1"));
        }
        if let Some(d) = self.loss_divisor {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::config("loss_divisor", format!("{d} must be > 0")));
            }
        }
        Ok(())
    }
}

pub fn default_eta(model: AgentKind) -> f64 {
    match model {
        AgentKind::Ailm => 5.0,
        AgentKind::Oilm | AgentKind::OneWay => 1.0,
    }
}

/// Per-epoch mean losses of one pupil; `None` for networks the agent lacks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpochLosses {
    pub decoder: Option<Vec<f64>>,
    pub encoder: Option<Vec<f64>>,
    pub auto: Option<Vec<f64>>,
}

impl From<TrainLog> for EpochLosses {
    fn from(log: TrainLog) -> Self {
        EpochLosses {
            decoder: log.decoder,
            encoder: log.encoder,
            auto: log.auto,
        }
    }
}

impl EpochLosses {
    pub fn last_decoder(&self) -> Option<f64> {
        self.decoder.as_ref().and_then(|v| v.last().copied())
    }

    pub fn last_encoder(&self) -> Option<f64> {
        self.encoder.as_ref().and_then(|v| v.last().copied())
    }

    pub fn last_auto(&self) -> Option<f64> {
        self.auto.as_ref().and_then(|v| v.last().copied())
    }
}

/// Measurements of one generation of one replicate.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRecord {
    pub replicate: usize,
    /// 1-based; generation `g` is the pupil taught by generation `g - 1`.
    pub generation: usize,
    pub raw: MetricTriple,
    /// Bias-corrected, clamped at 0.
    pub corrected: MetricTriple,
    pub losses: EpochLosses,
    pub duration_ms: f64,
}

/// Sorts records by (replicate, generation).
pub fn sort_records(records: &mut [GenerationRecord]) {
    records.sort_by_key(|r| (r.replicate, r.generation));
}

static BASELINES: OnceLock<Mutex<HashMap<(AgentKind, usize, usize, u64, bool), BaselineEstimate>>> =
    OnceLock::new();

/// Baseline for the config's model and sizes, computed once per process.
pub fn baseline_for(cfg: &ExperimentConfig) -> Result<BaselineEstimate> {
    let key = (
        cfg.model,
        cfg.n,
        cfg.hidden,
        cfg.seed,
        cfg.allow_large_obversion,
    );
    let cache = BASELINES.get_or_init(Default::default);
    if let Some(b) = cache.lock().unwrap().get(&key) {
        return Ok(b.clone());
    }
    let mut rng = stream_rng(cfg.seed, 0, stream::BASELINE);
    let b = estimate_baseline(
        cfg.model,
        cfg.n,
        cfg.hidden,
        cfg.allow_large_obversion,
        &mut rng,
    )?;
    cache.lock().unwrap().insert(key, b.clone());
    Ok(b)
}

/// One chain of generations.
pub struct Replicate<'a> {
    cfg: &'a ExperimentConfig,
    baseline: &'a BaselineEstimate,
    id: usize,
    tutor: LanguageTable,
    generation: usize,
    init: ChaCha8Rng,
    bottleneck: ChaCha8Rng,
    shuffle: ChaCha8Rng,
    auto_set: ChaCha8Rng,
    auto: ChaCha8Rng,
}

impl<'a> Replicate<'a> {
    /// Starts from a naive tutor (an obverted untrained decoder for the
    /// obverter model, an untrained encoder otherwise).
    pub fn new(
        cfg: &'a ExperimentConfig,
        baseline: &'a BaselineEstimate,
        id: usize,
    ) -> Result<Self> {
        let mut rep = Self::with_streams(cfg, baseline, id, None)?;
        let first = Agent::naive(
            cfg.model,
            cfg.n,
            cfg.hidden,
            cfg.allow_large_obversion,
            &mut rep.init,
        )?;
        rep.tutor = first.language()?;
        Ok(rep)
    }

    /// Starts from a given tutor language.
    pub fn with_tutor(
        cfg: &'a ExperimentConfig,
        baseline: &'a BaselineEstimate,
        id: usize,
        tutor: LanguageTable,
    ) -> Result<Self> {
        if tutor.n() != cfg.n {
            return Err(Error::Dimension {
                expected: cfg.n,
                actual: tutor.n(),
            });
        }
        Self::with_streams(cfg, baseline, id, Some(tutor))
    }

    fn with_streams(
        cfg: &'a ExperimentConfig,
        baseline: &'a BaselineEstimate,
        id: usize,
        tutor: Option<LanguageTable>,
    ) -> Result<Self> {
        cfg.validate()?;
        let seed = cfg.seed;
        let rid = id as u64;
        Ok(Replicate {
            cfg,
            baseline,
            id,
            tutor: match tutor {
                Some(t) => t,
                None => LanguageTable::from_indices(cfg.n, vec![0; space_size(cfg.n)])?,
            },
            generation: 0,
            init: stream_rng(seed, rid, stream::INIT),
            bottleneck: stream_rng(seed, rid, stream::BOTTLENECK),
            shuffle: stream_rng(seed, rid, stream::SHUFFLE),
            auto_set: stream_rng(seed, rid, stream::AUTO_SET),
            auto: stream_rng(seed, rid, stream::AUTO),
        })
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn tutor(&self) -> &LanguageTable {
        &self.tutor
    }

    /// Teaches a fresh pupil, measures it against the current tutor, and
    /// promotes it.
    pub fn step(&mut self) -> Result<GenerationRecord> {
        let started = Instant::now();
        let cfg = self.cfg;
        let train = cfg.train_config();
        let b = make_bottleneck(&self.tutor, cfg.bottleneck, &mut self.bottleneck)?;
        let (pupil, log) = match cfg.model {
            AgentKind::Oilm => {
                let mut a = OilmAgent::naive(cfg.n, cfg.hidden, &mut self.init)?;
                let log = a.train(&b, &train, cfg.allow_large_obversion, &mut self.shuffle)?;
                (Agent::Oilm(a), log)
            }
            AgentKind::Ailm => {
                let mut a = AilmAgent::naive(cfg.n, cfg.hidden, &mut self.init)?;
                let auto = make_auto_set(
                    &self.tutor,
                    &b,
                    cfg.auto_mode,
                    cfg.auto_size,
                    &mut self.auto_set,
                )?;
                let log = a.train(
                    &b,
                    &auto,
                    cfg.r,
                    cfg.auto_direction,
                    &train,
                    &mut self.shuffle,
                    &mut self.auto,
                )?;
                (Agent::Ailm(a), log)
            }
            AgentKind::OneWay => {
                let mut a = OneWayAgent::naive(cfg.n, cfg.hidden, &mut self.init)?;
                let log = a.train(&b, &train, &mut self.shuffle)?;
                (Agent::OneWay(a), log)
            }
        };
        let lang = pupil.language()?;
        let raw = MetricTriple {
            x: expressivity(&lang),
            c: compositionality(&lang),
            s: agent_stability(&self.tutor, &pupil)?,
        };
        let corrected = self.baseline.correct(&raw)?;
        self.tutor = lang;
        self.generation += 1;
        Ok(GenerationRecord {
            replicate: self.id,
            generation: self.generation,
            raw,
            corrected,
            losses: log.into(),
            duration_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }
}

/// Records of one replicate; `failure` holds the diagnostic if it aborted.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub seed: u64,
    pub records: Vec<GenerationRecord>,
    pub failure: Option<String>,
}

pub fn run_replicate(
    cfg: &ExperimentConfig,
    baseline: &BaselineEstimate,
    replicate: usize,
) -> ReplicateOutcome {
    let mut out = ReplicateOutcome {
        replicate,
        seed: derive_seed(cfg.seed, replicate as u64, stream::INIT),
        records: Vec::with_capacity(cfg.generations),
        failure: None,
    };
    let result = Replicate::new(cfg, baseline, replicate).and_then(|mut rep| {
        for _ in 0..cfg.generations {
            out.records.push(rep.step()?);
        }
        Ok(())
    });
    if let Err(e) = result {
        log::warn!("replicate {replicate} aborted: {e}");
        out.failure = Some(e.to_string());
    }
    out
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))
}

/// All replicates of an experiment, ordered by replicate id.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub baseline: BaselineEstimate,
    pub replicates: Vec<ReplicateOutcome>,
}

impl ExperimentOutput {
    /// Records sorted by (replicate, generation).
    pub fn records(&self) -> Vec<GenerationRecord> {
        let mut all: Vec<_> = self
            .replicates
            .iter()
            .flat_map(|r| r.records.iter().cloned())
            .collect();
        sort_records(&mut all);
        all
    }

    pub fn failures(&self) -> impl Iterator<Item = (usize, &str)> {
        self.replicates
            .iter()
            .filter_map(|r| r.failure.as_deref().map(|f| (r.replicate, f)))
    }

    /// Mean corrected metrics per generation over replicates that reached it.
    pub fn mean_corrected(&self) -> Vec<MetricTriple> {
        mean_by_generation(&self.records(), |r| r.corrected)
    }

    pub fn mean_raw(&self) -> Vec<MetricTriple> {
        mean_by_generation(&self.records(), |r| r.raw)
    }
}

/// Element `g - 1` is the mean over records of generation `g`.
pub fn mean_by_generation<F>(records: &[GenerationRecord], pick: F) -> Vec<MetricTriple>
where
    F: Fn(&GenerationRecord) -> MetricTriple,
{
    let max_gen = records.iter().map(|r| r.generation).max().unwrap_or(0);
    let mut sums = vec![(MetricTriple::default(), 0usize); max_gen];
    for r in records {
        let (acc, count) = &mut sums[r.generation - 1];
        let v = pick(r);
        acc.x += v.x;
        acc.c += v.c;
        acc.s += v.s;
        *count += 1;
    }
    sums.into_iter()
        .map(|(acc, count)| {
            let k = count.max(1) as f64;
            MetricTriple {
                x: acc.x / k,
                c: acc.c / k,
                s: acc.s / k,
            }
        })
        .collect()
}

/// Runs every replicate; failures are recorded per replicate without
/// stopping the others.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let baseline = baseline_for(cfg)?;
    run_experiment_with(cfg, baseline, |_, _| false)
}

/// Runs all replicates in lockstep with a supplied baseline. After each
/// generation `stop(generation, records_of_that_generation)` is consulted and
/// the run ends early when it returns true. The records produced are a prefix
/// of the full run's.
pub fn run_experiment_with<F>(
    cfg: &ExperimentConfig,
    baseline: BaselineEstimate,
    mut stop: F,
) -> Result<ExperimentOutput>
where
    F: FnMut(usize, &[GenerationRecord]) -> bool,
{
    cfg.validate()?;
    if (baseline.kind, baseline.n, baseline.hidden) != (cfg.model, cfg.n, cfg.hidden) {
        return Err(Error::config(
            "baseline",
            format!(
                "estimated for {} n={} hidden={}, config is {} n={} hidden={}",
                baseline.kind.name(),
                baseline.n,
                baseline.hidden,
                cfg.model.name(),
                cfg.n,
                cfg.hidden
            ),
        ));
    }
    let mut outcomes: Vec<ReplicateOutcome> = (0..cfg.replicates)
        .map(|id| ReplicateOutcome {
            replicate: id,
            seed: derive_seed(cfg.seed, id as u64, stream::INIT),
            records: Vec::with_capacity(cfg.generations),
            failure: None,
        })
        .collect();
    let pool = pool(cfg.workers)?;
    let made: Vec<Result<Replicate<'_>>> = pool.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|id| Replicate::new(cfg, &baseline, id))
            .collect()
    });
    let mut reps: Vec<Option<Replicate<'_>>> = made
        .into_iter()
        .zip(&mut outcomes)
        .map(|(made, out)| match made {
            Ok(rep) => Some(rep),
            Err(e) => {
                fail(out, e);
                None
            }
        })
        .collect();
    for g in 1..=cfg.generations {
        let stepped: Vec<Option<Result<GenerationRecord>>> = pool.install(|| {
            reps.par_iter_mut()
                .map(|rep| rep.as_mut().map(Replicate::step))
                .collect()
        });
        let mut fresh = Vec::with_capacity(stepped.len());
        for ((slot, out), res) in reps.iter_mut().zip(&mut outcomes).zip(stepped) {
            match res {
                Some(Ok(rec)) => {
                    fresh.push(rec.clone());
                    out.records.push(rec);
                }
                Some(Err(e)) => {
                    fail(out, e);
                    *slot = None;
                }
                None => {}
            }
        }
        if stop(g, &fresh) {
            break;
        }
    }
    Ok(ExperimentOutput {
        config: cfg.clone(),
        baseline,
        replicates: outcomes,
    })
}

fn fail(out: &mut ReplicateOutcome, e: Error) {
    log::warn!("replicate {} aborted: {e}", out.replicate);
    out.failure = Some(e.to_string());
}

/// Mean of the corrected metrics over one generation's records.
pub fn mean_corrected_of(records: &[GenerationRecord]) -> MetricTriple {
    let k = records.len().max(1) as f64;
    let mut m = MetricTriple::default();
    for r in records {
        m.x += r.corrected.x;
        m.c += r.corrected.c;
        m.s += r.corrected.s;
    }
    MetricTriple {
        x: m.x / k,
        c: m.c / k,
        s: m.s / k,
    }
}

/// First generation at which every corrected metric exceeds `lambda`, or
/// `None` when the cap is reached first.
pub fn generations_to_threshold(
    cfg: &ExperimentConfig,
    baseline: &BaselineEstimate,
    replicate: usize,
) -> Result<Option<usize>> {
    let mut rep = Replicate::new(cfg, baseline, replicate)?;
    until_from(&mut rep, cfg)
}

fn until_from(rep: &mut Replicate<'_>, cfg: &ExperimentConfig) -> Result<Option<usize>> {
    while rep.generation() < cfg.gen_cap {
        let rec = rep.step()?;
        if rec.corrected.exceeds(cfg.lambda) {
            return Ok(Some(rec.generation));
        }
    }
    Ok(None)
}

/// Threshold run starting from a given tutor language.
pub fn generations_to_threshold_from(
    cfg: &ExperimentConfig,
    baseline: &BaselineEstimate,
    replicate: usize,
    tutor: LanguageTable,
) -> Result<Option<usize>> {
    let mut rep = Replicate::with_tutor(cfg, baseline, replicate, tutor)?;
    until_from(&mut rep, cfg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct UntilOutcome {
    pub cap: usize,
    /// Per replicate; `None` when capped.
    pub generations: Vec<Option<usize>>,
}

impl UntilOutcome {
    /// Mean generations, counting capped replicates at the cap.
    pub fn mean(&self) -> f64 {
        let total: usize = self.generations.iter().map(|g| g.unwrap_or(self.cap)).sum();
        total as f64 / self.generations.len().max(1) as f64
    }

    pub fn capped(&self) -> usize {
        self.generations.iter().filter(|g| g.is_none()).count()
    }

    pub fn all_capped(&self) -> bool {
        self.capped() == self.generations.len()
    }
}

pub fn run_until_egood(cfg: &ExperimentConfig) -> Result<UntilOutcome> {
    cfg.validate()?;
    let baseline = baseline_for(cfg)?;
    let generations = pool(cfg.workers)?.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|id| generations_to_threshold(cfg, &baseline, id))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(UntilOutcome {
        cap: cfg.gen_cap,
        generations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares of `y` on `x`; `None` with fewer than two distinct
/// `x` values.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    let k = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub n: usize,
    pub bottleneck: usize,
    pub auto_size: usize,
    pub outcome: UntilOutcome,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestBottleneck {
    pub n: usize,
    pub bottleneck: usize,
    pub mean_generations: f64,
    /// Mean generations one away from the best size, averaged over the
    /// neighbours that were swept.
    pub neighbor_mean: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub best: Vec<BestBottleneck>,
    /// Lengths left out of the fit because every point hit the cap.
    pub excluded: Vec<usize>,
    pub fit: Option<LinearFit>,
}

/// How the auto set size follows the bottleneck in a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AutoScaling {
    /// Use the template's mode and size unchanged (shared mode tracks the bottleneck).
    Template,
    /// Independent auto set of `factor` times the bottleneck, capped at `2^n`.
    Multiple(usize),
}

/// For each `n` and each bottleneck size from `sizes(n)`, runs threshold
/// replicates; picks the size with the fewest mean generations per `n` and
/// fits a line through the best sizes.
pub fn sweep_bottleneck<F>(
    template: &ExperimentConfig,
    ns: &[usize],
    sizes: F,
    scaling: AutoScaling,
) -> Result<SweepResult>
where
    F: Fn(usize) -> Vec<usize>,
{
    if ns.is_empty() {
        return Err(Error::config("n", "sweep needs at least one length"));
    }
    let mut points = Vec::new();
    let mut best = Vec::new();
    let mut excluded = Vec::new();
    for &n in ns {
        let column = sizes(n);
        if column.is_empty() {
            return Err(Error::config(
                "bottleneck",
                format!("no sizes to sweep for n = {n}"),
            ));
        }
        let mut col_points = Vec::with_capacity(column.len());
        for &b in &column {
            let mut cfg = template.clone();
            cfg.n = n;
            cfg.hidden = if template.hidden == template.n {
                n
            } else {
                template.hidden
            };
            cfg.bottleneck = b;
            match scaling {
                AutoScaling::Template => {
                    if cfg.auto_mode == AutoMode::Shared {
                        cfg.auto_size = b;
                    }
                }
                AutoScaling::Multiple(k) => {
                    cfg.auto_mode = AutoMode::Independent;
                    cfg.auto_size = (k * b).min(space_size(n));
                }
            }
            let outcome = run_until_egood(&cfg)?;
            log::info!(
                "sweep n={n} bottleneck={b}: mean {:.2} generations ({} capped)",
                outcome.mean(),
                outcome.capped()
            );
            col_points.push(SweepPoint {
                n,
                bottleneck: b,
                auto_size: cfg.auto_size,
                outcome,
            });
        }
        if col_points.iter().all(|p| p.outcome.all_capped()) {
            log::warn!("n = {n}: every bottleneck size hit the cap; left out of the fit");
            excluded.push(n);
        } else {
            let winner = col_points
                .iter()
                .min_by(|a, b| a.outcome.mean().total_cmp(&b.outcome.mean()))
                .unwrap();
            let neighbors: Vec<f64> = col_points
                .iter()
                .filter(|p| {
                    p.bottleneck + 1 == winner.bottleneck || p.bottleneck == winner.bottleneck + 1
                })
                .map(|p| p.outcome.mean())
                .collect();
            best.push(BestBottleneck {
                n,
                bottleneck: winner.bottleneck,
                mean_generations: winner.outcome.mean(),
                neighbor_mean: (!neighbors.is_empty())
                    .then(|| neighbors.iter().sum::<f64>() / neighbors.len() as f64),
            });
        }
        points.extend(col_points);
    }
    let fit = linear_fit(
        &best
            .iter()
            .map(|b| (b.n as f64, b.bottleneck as f64))
            .collect::<Vec<_>>(),
    );
    Ok(SweepResult {
        points,
        best,
        excluded,
        fit,
    })
}
