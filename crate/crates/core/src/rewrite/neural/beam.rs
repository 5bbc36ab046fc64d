//! Deterministic beam search over the trained transducer.

use ndarray::Array1;

use super::net::Params;
use super::Vocab;

struct Hypothesis {
    tokens: Vec<usize>,
    log_prob: f64,
    states: Vec<Array1<f64>>,
}

pub(crate) struct Finished {
    pub tokens: Vec<usize>,
    /// Length-normalized log probability (per generated token, EOS included).
    pub score: f64,
}

/// Expands a width-`beam_width` beam until enough hypotheses finish, then
/// returns them ranked by normalized score. Hypotheses still alive at
/// `max_len` are force-finished.
pub(crate) fn beam_search(
    params: &Params,
    vocab: &Vocab,
    input_ids: &[usize],
    beam_width: usize,
    max_len: usize,
) -> Vec<Finished> {
    let enc = super::net::encode(params, input_ids, 0.0, None);
    let enc_proj: Vec<Array1<f64>> = enc.memory.iter().map(|m| m.dot(&params.attn_u)).collect();
    let layers = params.decoder.len();
    let mut init_states = Vec::with_capacity(layers);
    for l in 0..layers {
        let pre = enc.final_states[l].dot(&params.bridge_w[l]) + &params.bridge_b[l];
        init_states.push(pre.mapv(f64::tanh));
    }

    let mut live = vec![Hypothesis { tokens: Vec::new(), log_prob: 0.0, states: init_states }];
    let mut done: Vec<Finished> = Vec::new();

    for _ in 0..max_len {
        if live.is_empty() || done.len() >= beam_width {
            break;
        }
        let mut expansions: Vec<(f64, usize, usize)> = Vec::new(); // (score, hyp, token)
        let mut stepped: Vec<(Vec<Array1<f64>>, Array1<f64>)> = Vec::new();
        for hyp in &live {
            let prev = hyp.tokens.last().copied().unwrap_or(vocab.bos);
            let (new_states, cache) = super::net::decode_step(
                params,
                &enc.memory,
                &enc_proj,
                &hyp.states,
                prev,
                0.0,
                &mut None,
            );
            let log_probs = cache.probs_view().mapv(|p| p.max(f64::MIN_POSITIVE).ln());
            stepped.push((new_states, log_probs));
        }
        for (i, hyp) in live.iter().enumerate() {
            let log_probs = &stepped[i].1;
            for token in 0..log_probs.len() {
                if !vocab.decodable(token) {
                    continue;
                }
                expansions.push((hyp.log_prob + log_probs[token], i, token));
            }
        }
        // Deterministic pruning: score desc, then hypothesis order, then
        // token id.
        expansions.sort_by(|a, b| {
            b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)).then_with(|| a.2.cmp(&b.2))
        });
        expansions.truncate(beam_width);
        let mut next = Vec::with_capacity(expansions.len());
        for (score, i, token) in expansions {
            let mut tokens = live[i].tokens.clone();
            tokens.push(token);
            if token == vocab.eos {
                done.push(Finished { score: score / tokens.len() as f64, tokens });
            } else {
                next.push(Hypothesis {
                    tokens,
                    log_prob: score,
                    states: stepped[i].0.clone(),
                });
            }
        }
        live = next;
    }
    for hyp in live {
        let len = (hyp.tokens.len() + 1) as f64;
        done.push(Finished { tokens: hyp.tokens, score: hyp.log_prob / len });
    }
    done.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.tokens.cmp(&b.tokens)));
    done
}
