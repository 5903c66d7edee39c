//! The three agent kinds and their training protocols.
//!
//! * [`OilmAgent`]: a decoder network plus an encoder table obtained by
//!   obversion of that decoder.
//! * [`AilmAgent`]: encoder and decoder networks, trained on the bottleneck
//!   pairs and jointly as an autoencoder.
//! * [`OneWayAgent`]: an encoder network only.

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::lang::{enumerate_space, space_size, BitVector, LanguageTable};
use crate::neural::{chain_step, Mlp, TrainConfig};

/// Largest `n` obversion accepts without an explicit override; the
/// probability table has `2^(2n)` entries.
pub const OBVERSION_CAP: usize = 13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AgentKind {
    Oilm,
    Ailm,
    OneWay,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Oilm => "oilm",
            AgentKind::Ailm => "ailm",
            AgentKind::OneWay => "oneway",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "oilm" => Some(AgentKind::Oilm),
            "ailm" => Some(AgentKind::Ailm),
            "oneway" | "one_way" => Some(AgentKind::OneWay),
            _ => None,
        }
    }
}

/// How the autoencoder's meanings relate to the bottleneck.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum AutoMode {
    /// The autoencoder sees exactly the bottleneck meanings.
    #[default]
    Shared,
    /// Meanings are sampled separately from the whole meaning space.
    Independent,
}

impl AutoMode {
    pub fn name(self) -> &'static str {
        match self {
            AutoMode::Shared => "shared",
            AutoMode::Independent => "independent",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "shared" => Some(AutoMode::Shared),
            "independent" => Some(AutoMode::Independent),
            _ => None,
        }
    }
}

/// Which chain the unsupervised steps train.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum AutoDirection {
    /// `dec(enc(m))` toward `m`.
    #[default]
    M2m,
    /// `enc(dec(s))` toward `s`, on tutor signals.
    S2s,
    /// Alternates the two chains step by step, starting with `M2m`.
    Both,
}

impl AutoDirection {
    pub fn name(self) -> &'static str {
        match self {
            AutoDirection::M2m => "m2m",
            AutoDirection::S2s => "s2s",
            AutoDirection::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "m2m" => Some(AutoDirection::M2m),
            "s2s" => Some(AutoDirection::S2s),
            "both" => Some(AutoDirection::Both),
            _ => None,
        }
    }
}

/// Anything that can turn a meaning into a signal.
pub trait Encode {
    fn n(&self) -> usize;
    fn encode(&self, meaning: BitVector) -> Result<BitVector>;
}

impl Encode for LanguageTable {
    fn n(&self) -> usize {
        LanguageTable::n(self)
    }

    fn encode(&self, meaning: BitVector) -> Result<BitVector> {
        if meaning.len() != LanguageTable::n(self) {
            return Err(Error::Dimension {
                expected: LanguageTable::n(self),
                actual: meaning.len(),
            });
        }
        Ok(self.signal(meaning))
    }
}

/// Meaning-signal pairs a tutor presents to its pupil.
#[derive(Clone, Debug, PartialEq)]
pub struct BottleneckSet {
    pairs: Vec<(BitVector, BitVector)>,
}

impl BottleneckSet {
    pub fn pairs(&self) -> &[(BitVector, BitVector)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn meanings(&self) -> impl Iterator<Item = BitVector> + '_ {
        self.pairs.iter().map(|p| p.0)
    }
}

/// `size` distinct meanings drawn uniformly, each paired with the tutor's signal.
pub fn make_bottleneck<E, R>(tutor: &E, size: usize, rng: &mut R) -> Result<BottleneckSet>
where
    E: Encode + ?Sized,
    R: Rng + ?Sized,
{
    let n = tutor.n();
    let meanings = sample_meanings(n, size, "bottleneck", rng)?;
    let pairs = meanings
        .into_iter()
        .map(|m| Ok((m, tutor.encode(m)?)))
        .collect::<Result<_>>()?;
    Ok(BottleneckSet { pairs })
}

fn sample_meanings<R: Rng + ?Sized>(
    n: usize,
    size: usize,
    key: &str,
    rng: &mut R,
) -> Result<Vec<BitVector>> {
    let total = space_size(n);
    if size == 0 || size > total {
        return Err(Error::config(
            key,
            format!("size {size} must lie in [1, 2^{n} = {total}]"),
        ));
    }
    index::sample(rng, total, size)
        .into_iter()
        .map(|k| BitVector::from_index(n, k as u32))
        .collect()
}

/// Meanings (and their tutor signals) used for unsupervised training.
#[derive(Clone, Debug, PartialEq)]
pub struct AutoSet {
    meanings: Vec<BitVector>,
    signals: Vec<BitVector>,
    mode: AutoMode,
}

impl AutoSet {
    pub fn meanings(&self) -> &[BitVector] {
        &self.meanings
    }

    /// Tutor encodings of [`AutoSet::meanings`], used by signal-to-signal training.
    pub fn signals(&self) -> &[BitVector] {
        &self.signals
    }

    pub fn mode(&self) -> AutoMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.meanings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meanings.is_empty()
    }
}

/// Builds the auto set. In shared mode `size` is ignored and the bottleneck
/// meanings are reused; in independent mode `size` distinct meanings are drawn.
pub fn make_auto_set<E, R>(
    tutor: &E,
    bottleneck: &BottleneckSet,
    mode: AutoMode,
    size: usize,
    rng: &mut R,
) -> Result<AutoSet>
where
    E: Encode + ?Sized,
    R: Rng + ?Sized,
{
    let meanings = match mode {
        AutoMode::Shared => bottleneck.meanings().collect(),
        AutoMode::Independent => sample_meanings(tutor.n(), size, "auto_size", rng)?,
    };
    let signals = meanings
        .iter()
        .map(|&m| tutor.encode(m))
        .collect::<Result<_>>()?;
    Ok(AutoSet {
        meanings,
        signals,
        mode,
    })
}

/// For every meaning, the signal the decoder considers most likely to carry
/// it; exact ties go to the lowest signal index.
pub fn obvert(decoder: &Mlp, allow_large: bool) -> Result<LanguageTable> {
    let n = decoder.n_in();
    if decoder.n_out() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: decoder.n_out(),
        });
    }
    if n > OBVERSION_CAP && !allow_large {
        return Err(Error::config(
            "n",
            format!(
                "obversion at n = {n} needs a table of 2^{} entries; \
                 the limit is n = {OBVERSION_CAP}",
                2 * n
            ),
        ));
    }
    let size = space_size(n);
    let mut best_p = vec![f64::NEG_INFINITY; size];
    let mut best_s = vec![0u32; size];
    // prefix[level][k]: running product over the first `level` components for
    // meanings whose leading bits are k. Same multiplication order as the
    // per-pair product, so the values are identical.
    let mut levels: Vec<Vec<f64>> = (0..=n).map(|l| vec![0.0; 1 << l]).collect();
    levels[0][0] = 1.0;
    let mut scratch = vec![0.0; decoder.scratch_len()];
    let mut x = vec![0.0; n];
    for s in enumerate_space(n)? {
        s.write_reals(&mut x);
        let (hidden, out) = scratch.split_at_mut(decoder.n_hidden());
        decoder.forward_into(&x, hidden, &mut out[..n]);
        let p = &out[..n];
        for (i, &pi) in p.iter().enumerate() {
            let (lo, hi) = levels.split_at_mut(i + 1);
            let prev = &lo[i];
            let next = &mut hi[0];
            for (k, &v) in prev.iter().enumerate() {
                next[2 * k] = v * (1.0 - pi);
                next[2 * k + 1] = v * pi;
            }
        }
        for (m, &v) in levels[n].iter().enumerate() {
            if v > best_p[m] {
                best_p[m] = v;
                best_s[m] = s.index();
            }
        }
    }
    LanguageTable::from_indices(n, best_s)
}

/// Step counts for one epoch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepCounts {
    pub decoder: usize,
    pub encoder: usize,
    pub auto: usize,
}

/// Per-epoch losses (summed over the epoch, divided by the bottleneck size)
/// and step counts from one training run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub decoder: Option<Vec<f64>>,
    pub encoder: Option<Vec<f64>>,
    pub auto: Option<Vec<f64>>,
    pub steps: Vec<StepCounts>,
}

fn embed_pairs(bottleneck: &BottleneckSet) -> Vec<(Vec<f64>, Vec<f64>)> {
    bottleneck
        .pairs()
        .iter()
        .map(|(m, s)| (m.to_reals(), s.to_reals()))
        .collect()
}

fn check_bottleneck(bottleneck: &BottleneckSet, n: usize) -> Result<()> {
    if bottleneck.is_empty() {
        return Err(Error::config("bottleneck", "bottleneck set is empty"));
    }
    if let Some((m, _)) = bottleneck
        .pairs()
        .iter()
        .find(|(m, s)| m.len() != n || s.len() != n)
    {
        return Err(Error::Dimension {
            expected: n,
            actual: m.len(),
        });
    }
    Ok(())
}

/// Decode through a network: `decide(forward(net, signal))`.
fn network_map(net: &Mlp, v: BitVector) -> Result<BitVector> {
    if v.len() != net.n_in() {
        return Err(Error::Dimension {
            expected: net.n_in(),
            actual: v.len(),
        });
    }
    let mut scratch = vec![0.0; net.scratch_len()];
    Ok(net.decide_with(&v.to_reals(), &mut scratch))
}

/// Tabulates `decide(forward(net, m))` over every input.
pub fn network_language(net: &Mlp) -> Result<LanguageTable> {
    let n = net.n_in();
    if net.n_out() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: net.n_out(),
        });
    }
    LanguageTable::from_indices(n, net.tabulate_decisions()?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OilmAgent {
    decoder: Mlp,
    encoder_table: Option<LanguageTable>,
}

impl OilmAgent {
    pub fn naive<R: Rng + ?Sized>(n: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        Ok(OilmAgent {
            decoder: Mlp::init_glorot(n, hidden, n, rng)?,
            encoder_table: None,
        })
    }

    pub fn from_decoder(decoder: Mlp) -> Self {
        OilmAgent {
            decoder,
            encoder_table: None,
        }
    }

    pub fn n(&self) -> usize {
        self.decoder.n_in()
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    pub fn encoder_table(&self) -> Option<&LanguageTable> {
        self.encoder_table.as_ref()
    }

    pub fn obvert(&mut self, allow_large: bool) -> Result<&LanguageTable> {
        let table = obvert(&self.decoder, allow_large)?;
        Ok(self.encoder_table.insert(table))
    }

    /// Trains the decoder on signal-to-meaning examples, one SGD step per pair,
    /// in a fresh random order each epoch, then obverts it.
    pub fn train<R: Rng + ?Sized>(
        &mut self,
        bottleneck: &BottleneckSet,
        cfg: &TrainConfig,
        allow_large_obversion: bool,
        rng: &mut R,
    ) -> Result<TrainLog> {
        check_bottleneck(bottleneck, self.n())?;
        let mut examples = embed_pairs(bottleneck);
        let mut log = TrainLog {
            decoder: Some(Vec::with_capacity(cfg.epochs)),
            ..TrainLog::default()
        };
        let norm = examples.len() as f64;
        for _ in 0..cfg.epochs {
            examples.shuffle(rng);
            let mut total = 0.0;
            let mut counts = StepCounts::default();
            for (m, s) in &examples {
                total += self.decoder.sgd_step(s, m, cfg)?;
                counts.decoder += 1;
            }
            log.decoder.as_mut().unwrap().push(total / norm);
            log.steps.push(counts);
        }
        self.obvert(allow_large_obversion)?;
        Ok(log)
    }

    /// Table lookup; fails before the agent has obverted.
    pub fn encode(&self, meaning: BitVector) -> Result<BitVector> {
        self.encoder_table
            .as_ref()
            .ok_or_else(|| Error::State("encoder used before obversion".into()))?
            .encode(meaning)
    }

    pub fn decode(&self, signal: BitVector) -> Result<BitVector> {
        network_map(&self.decoder, signal)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AilmAgent {
    encoder: Mlp,
    decoder: Mlp,
}

impl AilmAgent {
    /// Fresh encoder and decoder; the encoder is drawn first.
    pub fn naive<R: Rng + ?Sized>(n: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let encoder = Mlp::init_glorot(n, hidden, n, rng)?;
        let decoder = Mlp::init_glorot(n, hidden, n, rng)?;
        Ok(AilmAgent { encoder, decoder })
    }

    pub fn from_networks(encoder: Mlp, decoder: Mlp) -> Result<Self> {
        if encoder.n_out() != decoder.n_in() || encoder.n_in() != decoder.n_out() {
            return Err(Error::Dimension {
                expected: encoder.n_out(),
                actual: decoder.n_in(),
            });
        }
        Ok(AilmAgent { encoder, decoder })
    }

    pub fn n(&self) -> usize {
        self.encoder.n_in()
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    /// Per epoch: two independently shuffled copies of the bottleneck; for
    /// each position one decoder step (copy 1, signal to meaning), one encoder
    /// step (copy 2, meaning to signal), then `r` autoencoder steps on inputs
    /// drawn uniformly with replacement from the auto set.
    pub fn train<R1, R2>(
        &mut self,
        bottleneck: &BottleneckSet,
        auto: &AutoSet,
        r: usize,
        direction: AutoDirection,
        cfg: &TrainConfig,
        shuffle_rng: &mut R1,
        auto_rng: &mut R2,
    ) -> Result<TrainLog>
    where
        R1: Rng + ?Sized,
        R2: Rng + ?Sized,
    {
        check_bottleneck(bottleneck, self.n())?;
        if r > 0 && auto.is_empty() {
            return Err(Error::config("auto_size", "auto set is empty"));
        }
        let mut copy1 = embed_pairs(bottleneck);
        let mut copy2 = copy1.clone();
        let auto_meanings: Vec<Vec<f64>> = auto.meanings().iter().map(|m| m.to_reals()).collect();
        let auto_signals: Vec<Vec<f64>> = auto.signals().iter().map(|s| s.to_reals()).collect();
        let norm = copy1.len() as f64;
        let mut log = TrainLog {
            decoder: Some(Vec::with_capacity(cfg.epochs)),
            encoder: Some(Vec::with_capacity(cfg.epochs)),
            auto: Some(Vec::with_capacity(cfg.epochs)),
            steps: Vec::with_capacity(cfg.epochs),
        };
        for _ in 0..cfg.epochs {
            copy1.shuffle(shuffle_rng);
            copy2.shuffle(shuffle_rng);
            let (mut dec_total, mut enc_total, mut auto_total) = (0.0, 0.0, 0.0);
            let mut counts = StepCounts::default();
            for ((m1, s1), (m2, s2)) in copy1.iter().zip(&copy2) {
                dec_total += self.decoder.sgd_step(s1, m1, cfg)?;
                counts.decoder += 1;
                enc_total += self.encoder.sgd_step(m2, s2, cfg)?;
                counts.encoder += 1;
                for t in 0..r {
                    let k = auto_rng.random_range(0..auto_meanings.len());
                    let signal_side = match direction {
                        AutoDirection::M2m => false,
                        AutoDirection::S2s => true,
                        AutoDirection::Both => t % 2 == 1,
                    };
                    auto_total += if signal_side {
                        let s = &auto_signals[k];
                        chain_step(&mut self.decoder, &mut self.encoder, s, s, cfg)?
                    } else {
                        let m = &auto_meanings[k];
                        chain_step(&mut self.encoder, &mut self.decoder, m, m, cfg)?
                    };
                    counts.auto += 1;
                }
            }
            log.decoder.as_mut().unwrap().push(dec_total / norm);
            log.encoder.as_mut().unwrap().push(enc_total / norm);
            log.auto.as_mut().unwrap().push(auto_total / norm);
            log.steps.push(counts);
        }
        Ok(log)
    }

    pub fn encode(&self, meaning: BitVector) -> Result<BitVector> {
        network_map(&self.encoder, meaning)
    }

    pub fn decode(&self, signal: BitVector) -> Result<BitVector> {
        network_map(&self.decoder, signal)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OneWayAgent {
    encoder: Mlp,
}

impl OneWayAgent {
    pub fn naive<R: Rng + ?Sized>(n: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        Ok(OneWayAgent {
            encoder: Mlp::init_glorot(n, hidden, n, rng)?,
        })
    }

    pub fn n(&self) -> usize {
        self.encoder.n_in()
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    /// Meaning-to-signal SGD, one step per pair, shuffled each epoch.
    pub fn train<R: Rng + ?Sized>(
        &mut self,
        bottleneck: &BottleneckSet,
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Result<TrainLog> {
        check_bottleneck(bottleneck, self.n())?;
        let mut examples = embed_pairs(bottleneck);
        let norm = examples.len() as f64;
        let mut log = TrainLog {
            encoder: Some(Vec::with_capacity(cfg.epochs)),
            ..TrainLog::default()
        };
        for _ in 0..cfg.epochs {
            examples.shuffle(rng);
            let mut total = 0.0;
            let mut counts = StepCounts::default();
            for (m, s) in &examples {
                total += self.encoder.sgd_step(m, s, cfg)?;
                counts.encoder += 1;
            }
            log.encoder.as_mut().unwrap().push(total / norm);
            log.steps.push(counts);
        }
        Ok(log)
    }

    pub fn encode(&self, meaning: BitVector) -> Result<BitVector> {
        network_map(&self.encoder, meaning)
    }
}

/// Any of the three agent kinds.
#[derive(Clone, Debug, PartialEq)]
pub enum Agent {
    Oilm(OilmAgent),
    Ailm(AilmAgent),
    OneWay(OneWayAgent),
}

impl Agent {
    /// A freshly initialized agent. O-ILM agents are obverted immediately so
    /// that an untrained agent can act as the first tutor.
    pub fn naive<R: Rng + ?Sized>(
        kind: AgentKind,
        n: usize,
        hidden: usize,
        allow_large_obversion: bool,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(match kind {
            AgentKind::Oilm => {
                let mut a = OilmAgent::naive(n, hidden, rng)?;
                a.obvert(allow_large_obversion)?;
                Agent::Oilm(a)
            }
            AgentKind::Ailm => Agent::Ailm(AilmAgent::naive(n, hidden, rng)?),
            AgentKind::OneWay => Agent::OneWay(OneWayAgent::naive(n, hidden, rng)?),
        })
    }

    pub fn kind(&self) -> AgentKind {
        match self {
            Agent::Oilm(_) => AgentKind::Oilm,
            Agent::Ailm(_) => AgentKind::Ailm,
            Agent::OneWay(_) => AgentKind::OneWay,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Agent::Oilm(a) => a.n(),
            Agent::Ailm(a) => a.n(),
            Agent::OneWay(a) => a.n(),
        }
    }

    /// The agent's encoder as a table over every meaning.
    pub fn language(&self) -> Result<LanguageTable> {
        match self {
            Agent::Oilm(a) => a
                .encoder_table()
                .cloned()
                .ok_or_else(|| Error::State("encoder used before obversion".into())),
            Agent::Ailm(a) => network_language(a.encoder()),
            Agent::OneWay(a) => network_language(a.encoder()),
        }
    }

    /// The decoder network, for the kinds that have one.
    pub fn decoder(&self) -> Option<&Mlp> {
        match self {
            Agent::Oilm(a) => Some(a.decoder()),
            Agent::Ailm(a) => Some(a.decoder()),
            Agent::OneWay(_) => None,
        }
    }

    pub fn decode(&self, signal: BitVector) -> Result<BitVector> {
        match self {
            Agent::Oilm(a) => a.decode(signal),
            Agent::Ailm(a) => a.decode(signal),
            Agent::OneWay(_) => Err(Error::State("one-way agents have no decoder".into())),
        }
    }
}

impl Encode for Agent {
    fn n(&self) -> usize {
        Agent::n(self)
    }

    fn encode(&self, meaning: BitVector) -> Result<BitVector> {
        match self {
            Agent::Oilm(a) => a.encode(meaning),
            Agent::Ailm(a) => a.encode(meaning),
            Agent::OneWay(a) => a.encode(meaning),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{pair_probability, Loss};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(eta: f64) -> TrainConfig {
        TrainConfig {
            eta,
            loss: Loss::CrossEntropy,
            epochs: 20,
        }
    }

    fn identity(n: usize) -> LanguageTable {
        LanguageTable::from_indices(n, (0..space_size(n) as u32).collect()).unwrap()
    }

    #[test]
    fn constant_decoder_obverts_to_signal_zero() {
        let dec = Mlp::zeros(3, 3, 3).unwrap();
        let t = obvert(&dec, false).unwrap();
        assert!(t.indices().iter().all(|&s| s == 0));
    }

    #[test]
    fn embedding_decoder_obverts_to_identity() {
        // Large weights make forward(s) approximately the embedding of s.
        let n = 2;
        let mut dec = Mlp::zeros(n, n, n).unwrap();
        let mut p = vec![0.0; dec.num_params()];
        // w_ih = 20 I, b_h = -10, w_ho = 20 I, b_o = -10
        p[0] = 20.0;
        p[3] = 20.0;
        p[4] = -10.0;
        p[5] = -10.0;
        p[6] = 20.0;
        p[9] = 20.0;
        p[10] = -10.0;
        p[11] = -10.0;
        dec.set_params(&p).unwrap();
        assert_eq!(obvert(&dec, false).unwrap(), identity(n));
    }

    #[test]
    fn obversion_cap() {
        let dec = Mlp::zeros(14, 2, 14).unwrap();
        let err = obvert(&dec, false).unwrap_err();
        assert!(err.to_string().contains("2^28"), "{err}");
    }

    #[test]
    fn obvert_matches_double_loop_n3() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let dec = Mlp::init_glorot(3, 3, 3, &mut rng).unwrap();
        let table = obvert(&dec, false).unwrap();
        for m in enumerate_space(3).unwrap() {
            let mut best = (f64::NEG_INFINITY, 0);
            for s in enumerate_space(3).unwrap() {
                let p = pair_probability(&dec.forward(&s).unwrap(), &m).unwrap();
                if p > best.0 {
                    best = (p, s.index());
                }
            }
            assert_eq!(table.indices()[m.index() as usize], best.1);
        }
    }

    #[test]
    fn bottleneck_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lang = identity(4);
        let full = make_bottleneck(&lang, 16, &mut rng).unwrap();
        let mut ms: Vec<u32> = full.meanings().map(|m| m.index()).collect();
        ms.sort_unstable();
        assert_eq!(ms, (0..16).collect::<Vec<_>>());
        assert_eq!(make_bottleneck(&lang, 1, &mut rng).unwrap().len(), 1);
        for size in 1..=16 {
            let b = make_bottleneck(&lang, size, &mut rng).unwrap();
            let mut ms: Vec<u32> = b.meanings().map(|m| m.index()).collect();
            ms.sort_unstable();
            ms.dedup();
            assert_eq!(ms.len(), size);
            assert!(b.pairs().iter().all(|(m, s)| lang.signal(*m) == *s));
        }
        assert!(make_bottleneck(&lang, 17, &mut rng).is_err());
        assert!(make_bottleneck(&lang, 0, &mut rng).is_err());
    }

    #[test]
    fn auto_set_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let lang = identity(5);
        let b = make_bottleneck(&lang, 6, &mut rng).unwrap();
        let shared = make_auto_set(&lang, &b, AutoMode::Shared, 999, &mut rng).unwrap();
        assert_eq!(
            shared.meanings(),
            b.meanings().collect::<Vec<_>>().as_slice()
        );
        let ind = make_auto_set(&lang, &b, AutoMode::Independent, 20, &mut rng).unwrap();
        assert_eq!(ind.len(), 20);
        assert_eq!(ind.signals(), ind.meanings());
    }

    #[test]
    fn oilm_presentation_counts_and_single_pair_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let lang = identity(4);
        let b = make_bottleneck(&lang, 1, &mut rng).unwrap();
        let mut agent = OilmAgent::naive(4, 4, &mut rng).unwrap();
        let log = agent.train(&b, &cfg(1.0), false, &mut rng).unwrap();
        assert_eq!(log.steps.len(), 20);
        assert!(log
            .steps
            .iter()
            .all(|c| c.decoder == 1 && c.encoder == 0 && c.auto == 0));
        let (m, s) = b.pairs()[0];
        let p = agent.decoder().forward(&s).unwrap();
        assert!(pair_probability(&p, &m).unwrap() > 0.9);

        let b = make_bottleneck(&lang, 9, &mut rng).unwrap();
        let mut agent = OilmAgent::naive(4, 4, &mut rng).unwrap();
        let log = agent.train(&b, &cfg(1.0), false, &mut rng).unwrap();
        assert!(log.steps.iter().all(|c| c.decoder == 9));
        for m in enumerate_space(4).unwrap() {
            assert_eq!(
                agent.encode(m).unwrap().index(),
                agent.encoder_table().unwrap().indices()[m.index() as usize]
            );
        }
    }

    #[test]
    fn oilm_encode_before_obversion_is_state_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = OilmAgent::naive(3, 3, &mut rng).unwrap();
        let m = BitVector::zeros(3).unwrap();
        assert!(matches!(a.encode(m), Err(Error::State(_))));
    }

    #[test]
    fn ailm_step_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut auto_rng = ChaCha8Rng::seed_from_u64(13);
        let lang = identity(4);
        let b = make_bottleneck(&lang, 5, &mut rng).unwrap();
        let a = make_auto_set(&lang, &b, AutoMode::Shared, 5, &mut rng).unwrap();
        for (r, dir) in [
            (3, AutoDirection::M2m),
            (0, AutoDirection::M2m),
            (4, AutoDirection::Both),
        ] {
            let mut agent = AilmAgent::naive(4, 4, &mut rng).unwrap();
            let log = agent
                .train(&b, &a, r, dir, &cfg(5.0), &mut rng, &mut auto_rng)
                .unwrap();
            assert_eq!(log.steps.len(), 20);
            for c in &log.steps {
                assert_eq!(
                    *c,
                    StepCounts {
                        decoder: 5,
                        encoder: 5,
                        auto: 5 * r
                    }
                );
            }
        }
    }

    #[test]
    fn zero_weight_encoder_speaks_all_zero() {
        let agent =
            AilmAgent::from_networks(Mlp::zeros(4, 4, 4).unwrap(), Mlp::zeros(4, 4, 4).unwrap())
                .unwrap();
        for m in enumerate_space(4).unwrap() {
            assert_eq!(agent.encode(m).unwrap().index(), 0);
        }
    }

    #[test]
    fn autoencoder_updates_shared_networks() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let mut auto_rng = ChaCha8Rng::seed_from_u64(31);
        let lang = identity(3);
        let b = make_bottleneck(&lang, 2, &mut rng).unwrap();
        let a = make_auto_set(&lang, &b, AutoMode::Shared, 2, &mut rng).unwrap();
        let mut agent = AilmAgent::naive(3, 3, &mut rng).unwrap();
        let m = [1.0, 1.0, 0.0];
        let before = agent
            .decoder()
            .forward_reals(&agent.encoder().forward_reals(&m).unwrap())
            .unwrap();
        agent
            .train(
                &b,
                &a,
                2,
                AutoDirection::M2m,
                &TrainConfig {
                    epochs: 1,
                    ..cfg(5.0)
                },
                &mut rng,
                &mut auto_rng,
            )
            .unwrap();
        let after = agent
            .decoder()
            .forward_reals(&agent.encoder().forward_reals(&m).unwrap())
            .unwrap();
        assert_ne!(before, after);
    }

    #[test]
    fn one_way_counts_and_no_decoder() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let lang = identity(4);
        let b = make_bottleneck(&lang, 7, &mut rng).unwrap();
        let mut agent = OneWayAgent::naive(4, 4, &mut rng).unwrap();
        let log = agent.train(&b, &cfg(1.0), &mut rng).unwrap();
        assert!(log.steps.iter().all(|c| c.encoder == 7 && c.decoder == 0));
        let agent = Agent::OneWay(agent);
        assert!(agent.decoder().is_none());
        assert!(agent.decode(BitVector::zeros(4).unwrap()).is_err());
    }

    #[test]
    fn naive_agents_are_reproducible() {
        for kind in [AgentKind::Oilm, AgentKind::Ailm, AgentKind::OneWay] {
            let a = Agent::naive(kind, 5, 5, false, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
            let b = Agent::naive(kind, 5, 5, false, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn training_does_not_touch_tutor() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let tutor = Agent::naive(AgentKind::Oilm, 4, 4, false, &mut rng).unwrap();
        let snapshot = tutor.clone();
        let b = make_bottleneck(&tutor, 8, &mut rng).unwrap();
        let mut pupil = OilmAgent::naive(4, 4, &mut rng).unwrap();
        pupil.train(&b, &cfg(1.0), false, &mut rng).unwrap();
        assert_eq!(tutor, snapshot);
    }
}
