//! Synthetic tone-language corpus generator.
//!
//! Each syllable contour is built additively:
//!
//! ```text
//! f0[i] = mean + range * T[tone][i]              tone template
//!       - slope * (syllable position in phrase)  phrase declination
//!       + e * g(word) * (0.4 * range * T[tone][i] + 10)   word emphasis
//!       + noise_std * z[i]                        Gaussian noise
//! ```
//!
//! where `e` is 1 for syllables of emphasised words and `g` is
//! [`word_emphasis_gain`]. Values are clamped to [51, 599] Hz and rounded to
//! 9 significant digits so that the corpus file round-trips exactly.
//!
//! Three independent random streams are derived from the seed: one for the
//! lexicon and utterance structure, one for the emphasis draws and one for
//! noise. Changing `emphasis_probability` therefore only changes which words
//! are emphasised, never the structure or the noise.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{
    Corpus, CorpusError, FeatureDef, FeatureKind, FeatureSchema, FeatureValue, Level, PhraseSpan,
    SyllableRecord, UtteranceRecord, Word,
};
use crate::textio::round_sig9;
use crate::{Contour, CONTOUR_LEN};

/// Four lexical tones plus the neutral tone (id 5): high level, rising,
/// fall-rise, falling, short mid-low neutral. Units are multiples of the
/// speaker range around the speaker mean.
pub const MANDARIN_TEMPLATES: [[f64; CONTOUR_LEN]; 5] = [
    [0.8, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8],
    [-0.4, -0.35, -0.28, -0.18, -0.05, 0.1, 0.26, 0.42, 0.57, 0.7],
    [-0.3, -0.45, -0.58, -0.68, -0.74, -0.75, -0.7, -0.6, -0.45, -0.28],
    [0.9, 0.85, 0.75, 0.6, 0.42, 0.22, 0.02, -0.18, -0.38, -0.55],
    [0.0, -0.02, -0.04, -0.06, -0.08, -0.1, -0.12, -0.14, -0.16, -0.18],
];

/// Six lexical tones plus the neutral tone (id 7): high level, high rising,
/// mid level, low falling, low rising, low level, neutral.
pub const CANTONESE_TEMPLATES: [[f64; CONTOUR_LEN]; 7] = [
    [0.8, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8],
    [-0.3, -0.3, -0.25, -0.15, 0.0, 0.15, 0.3, 0.45, 0.6, 0.7],
    [0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2],
    [-0.4, -0.45, -0.5, -0.56, -0.62, -0.68, -0.74, -0.8, -0.86, -0.9],
    [-0.55, -0.56, -0.55, -0.5, -0.43, -0.35, -0.27, -0.2, -0.14, -0.1],
    [-0.35, -0.35, -0.35, -0.35, -0.35, -0.35, -0.35, -0.35, -0.35, -0.35],
    [0.0, -0.02, -0.04, -0.06, -0.08, -0.1, -0.12, -0.14, -0.16, -0.18],
];

/// Template table for a tone inventory; entry `k - 1` belongs to tone id `k`.
pub fn tone_templates(tone_count: u8) -> Option<&'static [[f64; CONTOUR_LEN]]> {
    match tone_count {
        4 => Some(&MANDARIN_TEMPLATES),
        6 => Some(&CANTONESE_TEMPLATES),
        _ => None,
    }
}

pub fn neutral_tone(tone_count: u8) -> u8 {
    tone_count + 1
}

/// Lexical emphasis strength of a word, in [0.5, 1.5].
pub fn word_emphasis_gain(surface: u32) -> f64 {
    0.5 + ((u64::from(surface) * 7919) % 101) as f64 / 100.0
}

const EMPHASIS_SHAPE_GAIN: f64 = 0.4;
const EMPHASIS_OFFSET_HZ: f64 = 10.0;
const F0_FLOOR_HZ: f64 = 51.0;
const F0_CEIL_HZ: f64 = 599.0;

pub const LEXICON_SIZE: usize = 200;
const MONOSYLLABLES: usize = 20;

const CONSONANTS: [&str; 22] = [
    "none", "b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h", "j", "q", "x", "zh", "ch", "sh", "r", "z", "c", "s",
];
const VOWELS: [&str; 15] = [
    "a", "o", "e", "i", "u", "v", "ai", "ei", "ao", "ou", "an", "en", "ang", "eng", "ong",
];
const POS_TAGS: [&str; 10] = ["n", "v", "a", "d", "p", "c", "u", "m", "q", "r"];
const ACCENTS: [&str; 3] = ["none", "H", "L"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_utterances: usize,
    /// Lexical tones, 4 (Mandarin-like) or 6 (Cantonese-like); a neutral tone
    /// is always added.
    pub tone_count: u8,
    /// Inclusive range.
    pub syllables_per_utterance: (usize, usize),
    /// Inclusive range; capped by the number of words in the utterance.
    pub phrases_per_utterance: (usize, usize),
    pub speaker_mean_hz: f64,
    pub speaker_range_hz: f64,
    /// Hz lost per syllable from the start of each phrase.
    pub declination_slope: f64,
    pub emphasis_probability: f64,
    pub noise_std_hz: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_utterances: 1000,
            tone_count: 4,
            syllables_per_utterance: (6, 14),
            phrases_per_utterance: (1, 3),
            speaker_mean_hz: 220.0,
            speaker_range_hz: 60.0,
            declination_slope: 2.0,
            emphasis_probability: 0.3,
            noise_std_hz: 5.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: &str| Err(CorpusError::InvalidConfig(m.to_string()));
        if tone_templates(self.tone_count).is_none() {
            return bad("tone_count must be 4 or 6");
        }
        if self.n_utterances < 1 {
            return bad("n_utterances must be at least 1");
        }
        let (smin, smax) = self.syllables_per_utterance;
        if smin < 1 || smin > smax {
            return bad("syllables_per_utterance must satisfy 1 <= min <= max");
        }
        let (pmin, pmax) = self.phrases_per_utterance;
        if pmin < 1 || pmin > pmax {
            return bad("phrases_per_utterance must satisfy 1 <= min <= max");
        }
        if !(self.speaker_mean_hz.is_finite() && self.speaker_mean_hz > 0.0) {
            return bad("speaker_mean_hz must be positive");
        }
        if !(self.speaker_range_hz.is_finite() && self.speaker_range_hz >= 0.0) {
            return bad("speaker_range_hz must be non-negative");
        }
        if !self.declination_slope.is_finite() {
            return bad("declination_slope must be finite");
        }
        if !(0.0..=1.0).contains(&self.emphasis_probability) {
            return bad("emphasis_probability must lie in [0, 1]");
        }
        if !(self.noise_std_hz.is_finite() && self.noise_std_hz >= 0.0) {
            return bad("noise_std_hz must be non-negative");
        }
        Ok(())
    }
}

struct LexSyllable {
    consonant: usize,
    vowel: usize,
    tone: u8,
}

struct LexWord {
    syllables: Vec<LexSyllable>,
    pos: usize,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn build_lexicon(rng: &mut ChaCha8Rng, tone_count: u8) -> Vec<LexWord> {
    let neutral = neutral_tone(tone_count);
    (0..LEXICON_SIZE)
        .map(|w| {
            let n = if w < MONOSYLLABLES {
                1
            } else {
                match rng.random_range(0..10) {
                    0..=2 => 1,
                    3..=7 => 2,
                    _ => 3,
                }
            };
            let syllables = (0..n)
                .map(|k| {
                    let tone = if k > 0 && rng.random_bool(0.15) {
                        neutral
                    } else {
                        rng.random_range(1..=tone_count)
                    };
                    LexSyllable {
                        consonant: rng.random_range(0..CONSONANTS.len()),
                        vowel: rng.random_range(0..VOWELS.len()),
                        tone,
                    }
                })
                .collect();
            LexWord {
                syllables,
                pos: rng.random_range(0..POS_TAGS.len()),
            }
        })
        .collect()
}

fn syllable_name(consonant: usize, vowel: usize) -> String {
    if consonant == 0 {
        VOWELS[vowel].to_string()
    } else {
        format!("{}{}", CONSONANTS[consonant], VOWELS[vowel])
    }
}

fn phone_count(consonant: usize, vowel: usize) -> usize {
    let v = VOWELS[vowel];
    1 + usize::from(consonant != 0) + usize::from(v.ends_with('n') || v.ends_with("ng"))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Feature inventory of generated corpora.
pub fn synthetic_schema(tone_count: u8) -> FeatureSchema {
    let cat = |name: &str, level, values: Vec<String>| FeatureDef {
        name: name.into(),
        level,
        kind: FeatureKind::Categorical(values),
    };
    let num = |name: &str, level, max: f64| FeatureDef {
        name: name.into(),
        level,
        kind: FeatureKind::Numeric { min: 0.0, max },
    };
    let mut names = Vec::new();
    for c in 0..CONSONANTS.len() {
        for v in 0..VOWELS.len() {
            names.push(syllable_name(c, v));
        }
    }
    let mut tones = vec!["none".to_string()];
    tones.extend((1..=neutral_tone(tone_count)).map(|t| t.to_string()));
    let mut pos = vec!["none".to_string()];
    pos.extend(strings(&POS_TAGS));
    let words: Vec<String> = (0..LEXICON_SIZE).map(|w| format!("w{w}")).collect();

    use Level::*;
    let entries = vec![
        cat("vowel", Phone, strings(&VOWELS)),
        cat("consonant", Phone, strings(&CONSONANTS)),
        cat("syl_name", Syllable, names),
        num("duration", Syllable, 2.0),
        num("phones_cur", Syllable, 8.0),
        num("phones_prev", Syllable, 8.0),
        num("phones_next", Syllable, 8.0),
        cat("tone_prev", Syllable, tones.clone()),
        cat("tone_cur", Syllable, tones.clone()),
        cat("tone_next", Syllable, tones),
        num("syls_from_prev_accent", Syllable, 1000.0),
        num("syls_to_next_accent", Syllable, 1000.0),
        num("accented_cur", Syllable, 1.0),
        num("accented_prev", Syllable, 1.0),
        num("accented_next", Syllable, 1.0),
        cat("accent_cur", Syllable, strings(&ACCENTS)),
        cat("accent_prev", Syllable, strings(&ACCENTS)),
        cat("accent_next", Syllable, strings(&ACCENTS)),
        num("break_cur", Syllable, 4.0),
        num("break_prev", Syllable, 4.0),
        num("break_next", Syllable, 4.0),
        cat("pos_cur", Word, pos.clone()),
        cat("pos_prev", Word, pos.clone()),
        cat("pos_next", Word, pos),
        num("word_pos_in_utt", Word, 1000.0),
        num("syl_pos_in_word", Word, 16.0),
        cat("word_id", Word, words),
        num("phrase_pos_in_utt", Phrase, 1000.0),
        num("phrases_in_utt", Phrase, 1000.0),
        num("syls_in_phrase", Phrase, 1000.0),
        num("stressed_from_phrase_start", Phrase, 1000.0),
        num("stressed_to_phrase_end", Phrase, 1000.0),
        num("accented_from_phrase_start", Phrase, 1000.0),
        num("accented_to_phrase_end", Phrase, 1000.0),
        num("syl_pos_in_phrase", Phrase, 1000.0),
    ];
    // names and value sets above are fixed and valid
    FeatureSchema::new(entries).expect("synthetic schema is valid")
}

/// Per-syllable structural facts an utterance is built from.
struct SylPlan {
    consonant: usize,
    vowel: usize,
    tone: u8,
    word: usize,
    pos_in_word: usize,
    word_len: usize,
    phrase: usize,
    pos_in_phrase: usize,
    accented: bool,
    duration: f64,
}

impl SylPlan {
    fn stressed(&self, neutral: u8) -> bool {
        self.pos_in_word == 0 && self.tone != neutral
    }

    fn accent_label(&self) -> u32 {
        match (self.accented, self.pos_in_word) {
            (false, _) => 0,
            (true, 0) => 1,
            (true, _) => 2,
        }
    }
}

pub fn generate_synthetic(config: &SynthConfig) -> Result<Corpus, CorpusError> {
    config.validate()?;
    let templates = tone_templates(config.tone_count).expect("validated");
    let neutral = neutral_tone(config.tone_count);
    let schema = synthetic_schema(config.tone_count);

    let mut structure = stream(config.seed, 1);
    let mut emphasis = stream(config.seed, 2);
    let mut noise = stream(config.seed, 3);
    let lexicon = build_lexicon(&mut structure, config.tone_count);

    let (smin, smax) = config.syllables_per_utterance;
    let (pmin, pmax) = config.phrases_per_utterance;
    let mut utterances = Vec::with_capacity(config.n_utterances);

    for u in 0..config.n_utterances {
        let n_syl = structure.random_range(smin..=smax);
        let mut word_ids = Vec::new();
        let mut remaining = n_syl;
        while remaining > 0 {
            // monosyllables guarantee termination
            let w = loop {
                let w = structure.random_range(0..LEXICON_SIZE);
                if lexicon[w].syllables.len() <= remaining {
                    break w;
                }
            };
            remaining -= lexicon[w].syllables.len();
            word_ids.push(w);
        }
        let n_words = word_ids.len();
        let n_phr = structure.random_range(pmin..=pmax).min(n_words);
        let mut cuts: Vec<usize> = if n_phr > 1 {
            index::sample(&mut structure, n_words - 1, n_phr - 1)
                .into_iter()
                .map(|c| c + 1)
                .collect()
        } else {
            Vec::new()
        };
        cuts.sort_unstable();
        let emphasized: Vec<bool> = (0..n_words)
            .map(|_| emphasis.random::<f64>() < config.emphasis_probability)
            .collect();

        // word -> phrase assignment
        let mut word_phrase = vec![0; n_words];
        for (w, p) in word_phrase.iter_mut().enumerate() {
            *p = cuts.iter().filter(|&&c| c <= w).count();
        }

        let mut plan: Vec<SylPlan> = Vec::with_capacity(n_syl);
        for (w, &lex) in word_ids.iter().enumerate() {
            let entry = &lexicon[lex];
            for (k, s) in entry.syllables.iter().enumerate() {
                let jitter = structure.random_range(-0.03..0.03);
                let mut duration = 0.16 + 0.03 * phone_count(s.consonant, s.vowel) as f64 + jitter;
                if s.tone == neutral {
                    duration -= 0.06;
                }
                plan.push(SylPlan {
                    consonant: s.consonant,
                    vowel: s.vowel,
                    tone: s.tone,
                    word: w,
                    pos_in_word: k,
                    word_len: entry.syllables.len(),
                    phrase: word_phrase[w],
                    pos_in_phrase: 0,
                    accented: emphasized[w],
                    duration: round_sig9(duration),
                });
            }
        }
        let mut phrases: Vec<PhraseSpan> = Vec::with_capacity(n_phr);
        for (t, p) in plan.iter().enumerate() {
            if phrases.len() == p.phrase {
                phrases.push(PhraseSpan { start: t, end: t + 1 });
            } else {
                phrases[p.phrase].end = t + 1;
            }
        }
        for span in &phrases {
            for (j, t) in (span.start..span.end).enumerate() {
                plan[t].pos_in_phrase = j;
            }
        }

        let words: Vec<Word> = word_ids
            .iter()
            .map(|&w| Word {
                surface: w as u32,
                pos: POS_TAGS[lexicon[w].pos].to_string(),
            })
            .collect();

        let syllables = (0..n_syl)
            .map(|t| {
                let p = &plan[t];
                let template = &templates[usize::from(p.tone) - 1];
                let gain = word_emphasis_gain(word_ids[p.word] as u32);
                let mut contour: Contour = [0.0; CONTOUR_LEN];
                for (i, c) in contour.iter_mut().enumerate() {
                    let z: f64 = noise.sample(StandardNormal);
                    let base = config.speaker_mean_hz + config.speaker_range_hz * template[i];
                    let declination = -config.declination_slope * p.pos_in_phrase as f64;
                    let residual = if p.accented {
                        gain * (EMPHASIS_SHAPE_GAIN * config.speaker_range_hz * template[i] + EMPHASIS_OFFSET_HZ)
                    } else {
                        0.0
                    };
                    let v = base + declination + residual + config.noise_std_hz * z;
                    *c = round_sig9(v.clamp(F0_FLOOR_HZ, F0_CEIL_HZ));
                }
                SyllableRecord {
                    tone: p.tone,
                    features: syllable_features(&plan, t, &word_ids, &lexicon, &phrases, neutral),
                    contour,
                    word_index: p.word,
                    phrase_index: p.phrase,
                }
            })
            .collect();

        utterances.push(UtteranceRecord {
            id: format!("utt{u:05}"),
            syllables,
            words,
            phrases,
        });
    }

    Ok(Corpus {
        schema,
        tone_inventory: (1..=neutral).collect(),
        utterances,
    })
}

fn syllable_features(
    plan: &[SylPlan],
    t: usize,
    word_ids: &[usize],
    lexicon: &[LexWord],
    phrases: &[PhraseSpan],
    neutral: u8,
) -> Vec<FeatureValue> {
    use FeatureValue::{Cat, Num};
    let n = plan.len();
    let p = &plan[t];
    let prev = t.checked_sub(1).map(|i| &plan[i]);
    let next = plan.get(t + 1);
    let flag = |b: bool| Num(if b { 1.0 } else { 0.0 });
    let break_after = |i: usize| -> f64 {
        let s = &plan[i];
        if i + 1 == n {
            4.0
        } else if plan[i + 1].phrase != s.phrase {
            3.0
        } else if s.pos_in_word + 1 == s.word_len {
            1.0
        } else {
            0.0
        }
    };
    let from_prev_accent = (0..t).rev().find(|&i| plan[i].accented).map_or(0, |i| t - i);
    let to_next_accent = (t + 1..n).find(|&i| plan[i].accented).map_or(0, |i| i - t);
    let span = phrases[p.phrase];
    let count_in = |range: std::ops::Range<usize>, pred: &dyn Fn(&SylPlan) -> bool| {
        Num(range.filter(|&i| pred(&plan[i])).count() as f64)
    };
    let stressed = |s: &SylPlan| s.stressed(neutral);
    let accented = |s: &SylPlan| s.accented;
    let word_pos_tag = |w: Option<usize>| Cat(w.map_or(0, |w| lexicon[word_ids[w]].pos as u32 + 1));
    let syl_index = (p.consonant * VOWELS.len() + p.vowel) as u32;

    vec![
        Cat(p.vowel as u32),
        Cat(p.consonant as u32),
        Cat(syl_index),
        Num(p.duration),
        Num(phone_count(p.consonant, p.vowel) as f64),
        Num(prev.map_or(0.0, |q| phone_count(q.consonant, q.vowel) as f64)),
        Num(next.map_or(0.0, |q| phone_count(q.consonant, q.vowel) as f64)),
        Cat(prev.map_or(0, |q| u32::from(q.tone))),
        Cat(u32::from(p.tone)),
        Cat(next.map_or(0, |q| u32::from(q.tone))),
        Num(from_prev_accent as f64),
        Num(to_next_accent as f64),
        flag(p.accented),
        flag(prev.is_some_and(|q| q.accented)),
        flag(next.is_some_and(|q| q.accented)),
        Cat(p.accent_label()),
        Cat(prev.map_or(0, SylPlan::accent_label)),
        Cat(next.map_or(0, SylPlan::accent_label)),
        Num(break_after(t)),
        Num(if t == 0 { 4.0 } else { break_after(t - 1) }),
        Num(if t + 1 < n { break_after(t + 1) } else { 4.0 }),
        word_pos_tag(Some(p.word)),
        word_pos_tag(p.word.checked_sub(1)),
        word_pos_tag(Some(p.word + 1).filter(|&w| w < word_ids.len())),
        Num(p.word as f64),
        Num(p.pos_in_word as f64),
        Cat(word_ids[p.word] as u32),
        Num(p.phrase as f64),
        Num(phrases.len() as f64),
        Num(span.len() as f64),
        count_in(span.start..t, &stressed),
        count_in(t + 1..span.end, &stressed),
        count_in(span.start..t, &accented),
        count_in(t + 1..span.end, &accented),
        Num(p.pos_in_phrase as f64),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> SynthConfig {
        SynthConfig {
            n_utterances: 20,
            noise_std_hz: 0.0,
            emphasis_probability: 0.0,
            declination_slope: 0.0,
            seed: 3,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let c = SynthConfig {
            n_utterances: 15,
            seed: 42,
            ..SynthConfig::default()
        };
        assert_eq!(generate_synthetic(&c).unwrap(), generate_synthetic(&c).unwrap());
        let other = SynthConfig { seed: 43, ..c };
        assert_ne!(generate_synthetic(&other).unwrap(), generate_synthetic(&c).unwrap());
    }

    #[test]
    fn exact_syllable_count() {
        let c = generate_synthetic(&SynthConfig {
            n_utterances: 10,
            syllables_per_utterance: (5, 5),
            ..SynthConfig::default()
        })
        .unwrap();
        assert_eq!(c.syllable_count(), 50);
    }

    #[test]
    fn falling_tone_strictly_decreasing() {
        for tone_count in [4u8, 6] {
            // tone 4 is the falling tone in both inventories
            let falling = 4;
            let c = generate_synthetic(&SynthConfig { tone_count, ..quiet() }).unwrap();
            let templates = tone_templates(tone_count).unwrap();
            let mut seen = 0;
            for s in c.utterances.iter().flat_map(|u| &u.syllables) {
                if s.tone == falling {
                    seen += 1;
                    assert!(s.contour.windows(2).all(|w| w[1] < w[0]), "{:?}", s.contour);
                    // closed form: mean + range * template
                    for i in 0..CONTOUR_LEN {
                        let want = 220.0 + 60.0 * templates[3][i];
                        assert!((s.contour[i] - want).abs() < 1e-6);
                    }
                }
            }
            assert!(seen > 0);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        for c in [
            SynthConfig { tone_count: 5, ..quiet() },
            SynthConfig { syllables_per_utterance: (6, 3), ..quiet() },
            SynthConfig { phrases_per_utterance: (2, 1), ..quiet() },
            SynthConfig { emphasis_probability: 1.5, ..quiet() },
            SynthConfig { noise_std_hz: -1.0, ..quiet() },
            SynthConfig { n_utterances: 0, ..quiet() },
        ] {
            assert!(matches!(generate_synthetic(&c), Err(CorpusError::InvalidConfig(_))), "{c:?}");
        }
    }

    #[test]
    fn records_satisfy_invariants() {
        let c = generate_synthetic(&SynthConfig {
            n_utterances: 50,
            seed: 9,
            ..SynthConfig::default()
        })
        .unwrap();
        c.validate().unwrap();
        for s in c.utterances.iter().flat_map(|u| &u.syllables) {
            assert!(s.contour.iter().all(|&v| v > 50.0 && v < 600.0));
        }
    }
}
