//! Neural rewriter: a character-level encoder-decoder transducer with
//! additive attention, conditioned on the target word label through a control
//! token prepended to the input characters.
//!
//! For a pair (word w, target 1F+B) the model consumes the sequence
//! `<1F+B> w₁ w₂ … </s>` and is trained to emit the target word's characters.
//! Inference runs a width-configurable beam and keeps the k best hypotheses.

mod beam;
mod net;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::RewritePair;
use crate::error::{Error, Result};
use crate::labels::WordLabel;
use crate::rewrite::{Candidate, CandidateSet, Provenance};

/// Training and decoding configuration. The defaults document the reference
/// setup; tests shrink them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuralConfig {
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub dropout: f64,
    pub beam_width: usize,
    pub kbest: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Scheduled-sampling probability of feeding the model's own previous
    /// prediction instead of the gold character.
    pub sample_prob: f64,
    pub clip_norm: f64,
    /// When false, inputs containing characters unseen in training are
    /// rejected by the pipeline instead of being mapped to the unknown
    /// character.
    pub open_vocab: bool,
    /// Decode length allowance beyond the input character count.
    pub max_extra_len: usize,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        NeuralConfig {
            embedding_dim: 128,
            hidden_dim: 256,
            num_layers: 2,
            dropout: 0.2,
            beam_width: 10,
            kbest: 3,
            epochs: 50,
            learning_rate: 5e-4,
            sample_prob: 0.3,
            clip_norm: 1.0,
            open_vocab: true,
            max_extra_len: 8,
        }
    }
}

/// Character vocabulary: BOS/EOS/UNK, the 25 label control tokens, then the
/// characters observed in training. Control tokens are multi-character
/// strings and therefore disjoint from surface characters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    items: Vec<String>,
    pub(crate) bos: usize,
    pub(crate) eos: usize,
    pub(crate) unk: usize,
    first_char: usize,
}

impl Vocab {
    fn build(chars: &BTreeSet<char>) -> Vocab {
        let mut items = vec!["<bos>".to_string(), "</s>".to_string(), "<unk>".to_string()];
        for label in WordLabel::all() {
            items.push(format!("<{label}>"));
        }
        let first_char = items.len();
        for c in chars {
            items.push(c.to_string());
        }
        Vocab { items, bos: 0, eos: 1, unk: 2, first_char }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn control_id(&self, label: WordLabel) -> usize {
        3 + label.index()
    }

    fn char_id(&self, c: char) -> Option<usize> {
        let key = c.to_string();
        self.items[self.first_char..]
            .binary_search(&key)
            .ok()
            .map(|i| i + self.first_char)
    }

    /// Token ids the beam may emit: EOS and surface characters.
    pub(crate) fn decodable(&self, id: usize) -> bool {
        id == self.eos || id >= self.first_char
    }

    fn encode_word(&self, word: &str) -> Vec<usize> {
        word.chars().map(|c| self.char_id(c).unwrap_or(self.unk)).collect()
    }

    fn decode(&self, ids: &[usize]) -> String {
        ids.iter()
            .filter(|&&id| id >= self.first_char)
            .map(|&id| self.items[id].as_str())
            .collect()
    }
}

/// A trained neural rewriter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralRewriterModel {
    pub config: NeuralConfig,
    vocab: Vocab,
    params: net::Params,
    /// Mean per-token training loss after each epoch.
    pub training_loss: Vec<f64>,
}

struct Adam {
    m: net::Params,
    v: net::Params,
    step: u64,
}

impl Adam {
    fn new(template: &net::Params) -> Adam {
        Adam { m: template.zeros_like(), v: template.zeros_like(), step: 0 }
    }

    fn update(&mut self, params: &mut net::Params, grads: &mut net::Params, lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.step += 1;
        let t = self.step as f64;
        let corr1 = 1.0 - B1.powf(t);
        let corr2 = 1.0 - B2.powf(t);
        let p_slices = params.tensors_mut();
        let g_slices = grads.tensors_mut();
        let m_slices = self.m.tensors_mut();
        let v_slices = self.v.tensors_mut();
        for (((p, g), m), v) in p_slices.into_iter().zip(g_slices).zip(m_slices).zip(v_slices) {
            for i in 0..p.len() {
                m[i] = B1 * m[i] + (1.0 - B1) * g[i];
                v[i] = B2 * v[i] + (1.0 - B2) * g[i] * g[i];
                let m_hat = m[i] / corr1;
                let v_hat = v[i] / corr2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + EPS);
            }
        }
    }
}

fn clip_gradients(grads: &mut net::Params, max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let slices = grads.tensors_mut();
    let sq: f64 = slices.iter().flat_map(|s| s.iter()).map(|v| v * v).sum();
    let norm = sq.sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for s in slices {
            for v in s.iter_mut() {
                *v *= scale;
            }
        }
    }
}

/// Trains the transducer on (control token ++ source characters) -> target
/// characters, one Adam update per example, deterministically for a given
/// seed.
pub fn train_neuralr(
    pairs: &[RewritePair],
    config: &NeuralConfig,
    seed: u64,
) -> Result<NeuralRewriterModel> {
    if pairs.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if config.num_layers == 0 || config.num_layers > 2 {
        return Err(Error::InvalidValue(format!(
            "num_layers must be 1 or 2, got {}",
            config.num_layers
        )));
    }
    let mut chars = BTreeSet::new();
    for pair in pairs {
        chars.extend(pair.source.chars());
        chars.extend(pair.target_surface.chars());
    }
    let vocab = Vocab::build(&chars);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = net::Params::new(
        &mut rng,
        vocab.len(),
        config.embedding_dim,
        config.hidden_dim,
        config.num_layers,
    );

    let encoded: Vec<(Vec<usize>, Vec<usize>)> = pairs
        .iter()
        .map(|pair| {
            let mut input = vec![vocab.control_id(pair.target_label)];
            input.extend(vocab.encode_word(&pair.source));
            input.push(vocab.eos);
            let mut target = vocab.encode_word(&pair.target_surface);
            target.push(vocab.eos);
            (input, target)
        })
        .collect();

    let mut adam = Adam::new(&params);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut training_loss = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut tokens = 0usize;
        for &i in &order {
            let (input, target) = &encoded[i];
            let pass = net::forward(
                &params,
                input,
                target,
                vocab.bos,
                config.dropout,
                config.sample_prob,
                Some(&mut rng),
            );
            epoch_loss += pass.loss;
            tokens += pass.target_len;
            let mut grads = params.zeros_like();
            net::backward(&params, &pass, &mut grads);
            clip_gradients(&mut grads, config.clip_norm);
            adam.update(&mut params, &mut grads, config.learning_rate);
        }
        training_loss.push(epoch_loss / tokens.max(1) as f64);
    }

    Ok(NeuralRewriterModel { config: config.clone(), vocab, params, training_loss })
}

impl NeuralRewriterModel {
    /// The k best gender alternatives for `word` under `target`, from a
    /// width-`beam_width` beam, scored by length-normalized log probability.
    /// Always produces candidates; unseen characters map to the unknown
    /// symbol.
    pub fn kbest(&self, word: &str, target: WordLabel) -> CandidateSet {
        let mut input = vec![self.vocab.control_id(target)];
        input.extend(self.vocab.encode_word(word));
        input.push(self.vocab.eos);
        let max_len = word.chars().count() + self.config.max_extra_len;
        let finished =
            beam::beam_search(&self.params, &self.vocab, &input, self.config.beam_width, max_len);
        let mut seen = BTreeSet::new();
        let mut candidates = Vec::new();
        for hyp in finished {
            let surface = self.vocab.decode(&hyp.tokens);
            if surface.is_empty() || !seen.insert(surface.clone()) {
                continue;
            }
            candidates.push(Candidate {
                surface,
                score: hyp.score,
                provenance: Provenance::NeuralR,
            });
            if candidates.len() == self.config.kbest {
                break;
            }
        }
        if candidates.is_empty() {
            // Degenerate beams (empty-only outputs) fall back to the input.
            return CandidateSet::pass_through(word);
        }
        CandidateSet::from_candidates(candidates)
    }

    /// Checks that every character of `word` is in the model vocabulary; used
    /// by the pipeline when the config forbids an open vocabulary.
    pub fn check_known(&self, word: &str) -> Result<()> {
        for c in word.chars() {
            if self.vocab.char_id(c).is_none() {
                return Err(Error::UnknownCharacter(c));
            }
        }
        Ok(())
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab.len()
    }
}
