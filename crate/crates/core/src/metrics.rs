//! Expressivity, compositionality and stability of materialized languages,
//! and the naive-agent baseline used to correct them.

use rand::Rng;

use crate::agents::{network_language, Agent, AgentKind};
use crate::error::{Error, Result};
use crate::lang::{space_size, LanguageTable};
use crate::neural::Mlp;

/// Naive agents averaged for the expressivity and compositionality baselines.
pub const BASELINE_AGENTS: usize = 40;
/// Naive pairs averaged for the stability baseline.
pub const BASELINE_PAIRS: usize = 20;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricTriple {
    pub x: f64,
    pub c: f64,
    pub s: f64,
}

impl MetricTriple {
    /// True when all three values strictly exceed `lambda`.
    pub fn exceeds(&self, lambda: f64) -> bool {
        self.x > lambda && self.c > lambda && self.s > lambda
    }

    pub fn min(&self) -> f64 {
        self.x.min(self.c).min(self.s)
    }
}

/// Fraction of the signal space used by the language.
pub fn expressivity(lang: &LanguageTable) -> f64 {
    let size = space_size(lang.n());
    let mut seen = vec![false; size];
    let mut distinct = 0usize;
    for &s in lang.indices() {
        let slot = &mut seen[s as usize];
        if !*slot {
            *slot = true;
            distinct += 1;
        }
    }
    distinct as f64 / size as f64
}

/// Binary entropy (bits) of `k` successes out of `total`, symmetric in
/// `k <-> total - k` down to the last bit.
fn count_entropy(k: u64, total: u64) -> f64 {
    let lo = k.min(total - k) as f64 / total as f64;
    let hi = k.max(total - k) as f64 / total as f64;
    let term = |p: f64| if p == 0.0 { 0.0 } else { -p * p.log2() };
    term(lo) + term(hi)
}

/// `counts[i * n + j]`: meanings with fact `i` set whose signal has word `j` set.
fn fact_word_counts(lang: &LanguageTable) -> Vec<u64> {
    let n = lang.n();
    let size = space_size(n);
    let words = size.div_ceil(64);
    // One bitset over meanings per word position.
    let mut word_sets = vec![vec![0u64; words]; n];
    for (m, &s) in lang.indices().iter().enumerate() {
        for (j, set) in word_sets.iter_mut().enumerate() {
            if (s >> (n - 1 - j)) & 1 == 1 {
                set[m / 64] |= 1 << (m % 64);
            }
        }
    }
    const LOW_MASKS: [u64; 6] = [
        0xAAAA_AAAA_AAAA_AAAA,
        0xCCCC_CCCC_CCCC_CCCC,
        0xF0F0_F0F0_F0F0_F0F0,
        0xFF00_FF00_FF00_FF00,
        0xFFFF_0000_FFFF_0000,
        0xFFFF_FFFF_0000_0000,
    ];
    let mut counts = vec![0u64; n * n];
    for i in 0..n {
        let shift = n - 1 - i;
        for (j, set) in word_sets.iter().enumerate() {
            let mut total = 0u64;
            for (w, &bits) in set.iter().enumerate() {
                let mask = if shift < 6 {
                    LOW_MASKS[shift]
                } else if ((w * 64) >> shift) & 1 == 1 {
                    u64::MAX
                } else {
                    0
                };
                total += (bits & mask).count_ones() as u64;
            }
            counts[i * n + j] = total;
        }
    }
    counts
}

/// Entropies `h[i * n + j]` of word `j` given that fact `i` is set.
pub fn conditional_entropies(lang: &LanguageTable) -> Vec<f64> {
    let n = lang.n();
    let conditioned = (space_size(n) / 2) as u64;
    fact_word_counts(lang)
        .into_iter()
        .map(|k| count_entropy(k, conditioned))
        .collect()
}

/// Compositionality: each fact selects the word(s) of minimal conditional
/// entropy (all ties kept); each word scores the smallest entropy among the
/// selections naming it, or 1 if never selected; the result is one minus the
/// mean word score.
pub fn compositionality(lang: &LanguageTable) -> f64 {
    let n = lang.n();
    let h = conditional_entropies(lang);
    let mut word_score = vec![f64::INFINITY; n];
    for i in 0..n {
        let row = &h[i * n..(i + 1) * n];
        let best = row.iter().cloned().fold(f64::INFINITY, f64::min);
        for (j, &v) in row.iter().enumerate() {
            if v == best {
                word_score[j] = word_score[j].min(v);
            }
        }
    }
    let total: f64 = word_score
        .iter()
        .map(|&v| if v.is_finite() { v } else { 1.0 })
        .sum();
    1.0 - total / n as f64
}

/// Fraction of meanings recovered when `encoder_lang`'s signals are decoded
/// by `decode`.
pub fn stability<F>(encoder_lang: &LanguageTable, mut decode: F) -> f64
where
    F: FnMut(u32) -> u32,
{
    let n = encoder_lang.n();
    let size = space_size(n);
    // Degenerate languages reuse few signals; decode each one once.
    let mut memo = vec![u32::MAX; size];
    let mut hits = 0usize;
    for (m, &s) in encoder_lang.indices().iter().enumerate() {
        let slot = &mut memo[s as usize];
        if *slot == u32::MAX {
            *slot = decode(s);
        }
        if *slot as usize == m {
            hits += 1;
        }
    }
    hits as f64 / size as f64
}

/// Stability against a decoder network `decide(forward(decoder, s))`.
pub fn network_stability(encoder_lang: &LanguageTable, decoder: &Mlp) -> Result<f64> {
    let n = encoder_lang.n();
    if decoder.n_in() != n || decoder.n_out() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: decoder.n_in(),
        });
    }
    let size = space_size(n);
    let mut seen = vec![false; size];
    let distinct = encoder_lang
        .indices()
        .iter()
        .filter(|&&s| !std::mem::replace(&mut seen[s as usize], true))
        .count();
    // Past a few percent of the space, tabulating every input is cheaper.
    if distinct > size / 16 {
        let table = decoder.tabulate_decisions()?;
        return Ok(stability(encoder_lang, |s| table[s as usize]));
    }
    let mut scratch = vec![0.0; decoder.scratch_len()];
    let mut x = vec![0.0; n];
    Ok(stability(encoder_lang, |s| {
        for (i, v) in x.iter_mut().enumerate() {
            *v = ((s >> (n - 1 - i)) & 1) as f64;
        }
        decoder.decide_with(&x, &mut scratch).index()
    }))
}

/// Fraction of meanings two languages encode identically. Used in place of
/// stability for agents without a decoder.
pub fn agreement(a: &LanguageTable, b: &LanguageTable) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::Dimension {
            expected: a.n(),
            actual: b.n(),
        });
    }
    let same = a
        .indices()
        .iter()
        .zip(b.indices())
        .filter(|(x, y)| x == y)
        .count();
    Ok(same as f64 / space_size(a.n()) as f64)
}

/// Stability of `speaker`'s language as understood by `listener`.
pub fn agent_stability(speaker_lang: &LanguageTable, listener: &Agent) -> Result<f64> {
    match listener {
        Agent::OneWay(a) => agreement(speaker_lang, &network_language(a.encoder())?),
        other => network_stability(
            speaker_lang,
            other
                .decoder()
                .expect("agents other than one-way have decoders"),
        ),
    }
}

/// `(y - y0) / (1 - y0)`, clamped below at 0.
pub fn bias_correct(y: f64, y0: f64) -> Result<f64> {
    Ok(bias_correct_unclamped(y, y0)?.max(0.0))
}

pub fn bias_correct_unclamped(y: f64, y0: f64) -> Result<f64> {
    if y0 >= 1.0 || y0.is_nan() {
        return Err(Error::DegenerateBaseline(y0));
    }
    Ok((y - y0) / (1.0 - y0))
}

/// Mean metric values of naive agents.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineEstimate {
    pub kind: AgentKind,
    pub n: usize,
    pub hidden: usize,
    pub x0: f64,
    pub c0: f64,
    pub s0: f64,
    pub agents: usize,
    pub pairs: usize,
}

impl BaselineEstimate {
    pub fn correct(&self, raw: &MetricTriple) -> Result<MetricTriple> {
        Ok(MetricTriple {
            x: bias_correct(raw.x, self.x0)?,
            c: bias_correct(raw.c, self.c0)?,
            s: bias_correct(raw.s, self.s0)?,
        })
    }
}

/// Averages raw metrics over [`BASELINE_AGENTS`] naive agents; stability
/// over [`BASELINE_PAIRS`] disjoint pairs `(2k, 2k + 1)` of those agents, the
/// first speaking and the second listening.
pub fn estimate_baseline<R: Rng + ?Sized>(
    kind: AgentKind,
    n: usize,
    hidden: usize,
    allow_large_obversion: bool,
    rng: &mut R,
) -> Result<BaselineEstimate> {
    let mut langs = Vec::with_capacity(BASELINE_AGENTS);
    let mut agents = Vec::with_capacity(BASELINE_AGENTS);
    for _ in 0..BASELINE_AGENTS {
        let agent = Agent::naive(kind, n, hidden, allow_large_obversion, rng)?;
        langs.push(agent.language()?);
        agents.push(agent);
    }
    let x0 = langs.iter().map(expressivity).sum::<f64>() / BASELINE_AGENTS as f64;
    let c0 = langs.iter().map(compositionality).sum::<f64>() / BASELINE_AGENTS as f64;
    let mut s_total = 0.0;
    for k in 0..BASELINE_PAIRS {
        let speaker = &langs[2 * k];
        s_total += match &agents[2 * k + 1] {
            Agent::OneWay(_) => agreement(speaker, &langs[2 * k + 1])?,
            listener => agent_stability(speaker, listener)?,
        };
    }
    Ok(BaselineEstimate {
        kind,
        n,
        hidden,
        x0,
        c0,
        s0: s_total / BASELINE_PAIRS as f64,
        agents: BASELINE_AGENTS,
        pairs: BASELINE_PAIRS,
    })
}
