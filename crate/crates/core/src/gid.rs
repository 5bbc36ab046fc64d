//! Word-level gender identification.
//!
//! A sparse-feature averaged multi-class perceptron behind a small predict
//! contract, so a stronger contextual classifier can replace it without
//! touching the rest of the pipeline. Features hash to stable 64-bit ids with
//! FNV-1a, which keeps models reproducible across runs and platforms.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, SENTENCE_START};
use crate::error::{Error, Result};
use crate::labels::{segment_enclitic, EncliticTable, WordLabel};

/// Bump when the feature template changes; serialized models carry it and
/// refuse to load under a different template.
pub const FEATURE_TEMPLATE_VERSION: u32 = 1;

const SENTENCE_END: &str = "</s>";
const LABELS: usize = WordLabel::COUNT;

fn fnv1a64(text: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Sparse feature counts keyed by hashed id, sorted for deterministic
/// iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(Vec<(u64, f64)>);

impl FeatureVector {
    fn from_names(names: impl IntoIterator<Item = String>) -> FeatureVector {
        let mut merged: BTreeMap<u64, f64> = BTreeMap::new();
        for name in names {
            *merged.entry(fnv1a64(&name)).or_insert(0.0) += 1.0;
        }
        FeatureVector(merged.into_iter().collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.0.iter().copied()
    }

    pub fn contains_name(&self, name: &str) -> bool {
        let id = fnv1a64(name);
        self.0.binary_search_by_key(&id, |(k, _)| *k).is_ok()
    }
}

/// Turns a (sentence, position) into sparse features: the word itself,
/// character prefixes and suffixes up to length 4, neighbor words, the
/// enclitic match class and a coarse position bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureExtractor {
    table: EncliticTable,
    pub template_version: u32,
}

impl FeatureExtractor {
    pub fn new(table: EncliticTable) -> FeatureExtractor {
        FeatureExtractor { table, template_version: FEATURE_TEMPLATE_VERSION }
    }

    pub fn extract(&self, sentence: &[String], position: usize) -> FeatureVector {
        let word = sentence[position].as_str();
        let chars: Vec<char> = word.chars().collect();
        let mut names = vec!["bias".to_string(), format!("w={word}")];
        for n in 1..=4usize.min(chars.len()) {
            let prefix: String = chars[..n].iter().collect();
            let suffix: String = chars[chars.len() - n..].iter().collect();
            names.push(format!("p{n}={prefix}"));
            names.push(format!("s{n}={suffix}"));
        }
        let prev = if position == 0 { SENTENCE_START } else { sentence[position - 1].as_str() };
        let next = sentence.get(position + 1).map(String::as_str).unwrap_or(SENTENCE_END);
        names.push(format!("prev={prev}"));
        names.push(format!("next={next}"));
        let (_, entry) = segment_enclitic(word, &self.table);
        let class = entry.map(|e| e.class.to_string()).unwrap_or_else(|| "none".to_string());
        names.push(format!("encl={class}"));
        let bucket = if sentence.len() <= 1 {
            0
        } else {
            position * 5 / sentence.len()
        };
        names.push(format!("pos={bucket}"));
        FeatureVector::from_names(names)
    }
}

/// A trained gender identification model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GidModel {
    pub extractor: FeatureExtractor,
    /// feature id -> one weight per label, inventory order.
    weights: BTreeMap<u64, Vec<f64>>,
}

/// Trains an averaged perceptron on the input renderings of the corpus.
/// Example order is reshuffled per epoch from the seed; the result is
/// bit-reproducible.
pub fn train_gid(
    corpus: &Corpus,
    table: &EncliticTable,
    epochs: usize,
    seed: u64,
) -> Result<GidModel> {
    let extractor = FeatureExtractor::new(table.clone());
    let mut examples: Vec<(FeatureVector, usize)> = Vec::new();
    for example in &corpus.examples {
        let sentence: Vec<String> =
            example.input.iter().map(|t| t.surface.clone()).collect();
        for (i, token) in example.input.iter().enumerate() {
            examples.push((extractor.extract(&sentence, i), token.label().index()));
        }
    }
    if examples.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let epochs = epochs.max(1);

    let mut table_w: HashMap<u64, Entry> = HashMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut step: u64 = 0;

    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &idx in &order {
            step += 1;
            let (fv, gold) = &examples[idx];
            let guess = predict_from_entries(&table_w, fv);
            if guess != *gold {
                for (id, count) in fv.iter() {
                    let entry = table_w.entry(id).or_insert_with(|| Entry {
                        w: [0.0; LABELS],
                        acc: [0.0; LABELS],
                        last: [0; LABELS],
                    });
                    for (label, delta) in [(*gold, count), (guess, -count)] {
                        entry.acc[label] += entry.w[label] * (step - entry.last[label]) as f64;
                        entry.last[label] = step;
                        entry.w[label] += delta;
                    }
                }
            }
        }
    }

    let total = step as f64;
    let mut weights = BTreeMap::new();
    for (id, mut entry) in table_w {
        let mut averaged = vec![0.0; LABELS];
        let mut nonzero = false;
        for label in 0..LABELS {
            entry.acc[label] += entry.w[label] * (step - entry.last[label]) as f64;
            averaged[label] = entry.acc[label] / total;
            nonzero |= averaged[label] != 0.0;
        }
        if nonzero {
            weights.insert(id, averaged);
        }
    }
    Ok(GidModel { extractor, weights })
}

struct Entry {
    w: [f64; LABELS],
    acc: [f64; LABELS],
    last: [u64; LABELS],
}

fn predict_from_entries(weights: &HashMap<u64, Entry>, fv: &FeatureVector) -> usize {
    let mut scores = [0.0f64; LABELS];
    for (id, count) in fv.iter() {
        if let Some(entry) = weights.get(&id) {
            for (s, w) in scores.iter_mut().zip(entry.w.iter()) {
                *s += w * count;
            }
        }
    }
    argmax_first(&scores)
}

/// Ties resolve to the lowest inventory index, so an all-zero model predicts
/// `B+B`.
fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

impl GidModel {
    /// One label per token, pure and deterministic.
    pub fn predict_labels(&self, sentence: &[String]) -> Vec<WordLabel> {
        (0..sentence.len())
            .map(|i| {
                let fv = self.extractor.extract(sentence, i);
                let mut scores = [0.0f64; LABELS];
                for (id, count) in fv.iter() {
                    if let Some(row) = self.weights.get(&id) {
                        for (s, w) in scores.iter_mut().zip(row.iter()) {
                            *s += w * count;
                        }
                    }
                }
                WordLabel::from_index(argmax_first(&scores))
            })
            .collect()
    }

    pub fn feature_count(&self) -> usize {
        self.weights.len()
    }

    /// A deserialized model is usable only under the feature template it was
    /// trained with.
    pub fn check_template(&self) -> Result<()> {
        if self.extractor.template_version != FEATURE_TEMPLATE_VERSION {
            return Err(Error::ModelFormat(format!(
                "feature template {} unsupported (expected {})",
                self.extractor.template_version, FEATURE_TEMPLATE_VERSION
            )));
        }
        Ok(())
    }
}
