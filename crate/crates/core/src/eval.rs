//! Evaluation harness: orthographic normalization, edit extraction, MaxMatch
//! precision/recall/F-beta, corpus BLEU and error attribution.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::labels::WordLabel;
use crate::rewrite::CandidateSet;

/// Character-level orthographic normalization map.
///
/// The mapping must be idempotent: image characters are fixed points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalizationTable {
    map: BTreeMap<char, char>,
}

impl NormalizationTable {
    pub fn new(map: BTreeMap<char, char>) -> Result<Self> {
        for target in map.values() {
            if map.contains_key(target) {
                return Err(Error::TableFormat(format!(
                    "normalization image `{target}` is itself remapped"
                )));
            }
        }
        Ok(NormalizationTable { map })
    }

    /// Alif variants to bare Alif, Alif-Maqsura to Ya, Ta-Marbuta to Ha.
    pub fn default_table() -> NormalizationTable {
        let map = BTreeMap::from([
            ('\u{0622}', '\u{0627}'), // آ
            ('\u{0623}', '\u{0627}'), // أ
            ('\u{0625}', '\u{0627}'), // إ
            ('\u{0671}', '\u{0627}'), // ٱ
            ('\u{0649}', '\u{064A}'), // ى -> ي
            ('\u{0629}', '\u{0647}'), // ة -> ه
        ]);
        NormalizationTable::new(map).unwrap()
    }

    pub fn normalize_char(&self, c: char) -> char {
        self.map.get(&c).copied().unwrap_or(c)
    }
}

/// Per-character normalization; preserves length in characters.
pub fn normalize_text(text: &str, table: &NormalizationTable) -> String {
    text.chars().map(|c| table.normalize_char(c)).collect()
}

fn normalize_tokens(tokens: &[String], table: &NormalizationTable) -> Vec<String> {
    tokens.iter().map(|t| normalize_text(t, table)).collect()
}

/// One phrase edit: replace source tokens in `[start, end)` with `replacement`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edit {
    pub start: usize,
    pub end: usize,
    pub replacement: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AlignOp {
    Match,
    Substitute,
    Delete,
    Insert,
}

/// Extracts the edits turning `source` into `hypothesis`.
///
/// Equal-length inputs (the aligned-corpus case) yield single-token
/// substitutions at differing positions. Otherwise a minimal-cost token
/// alignment with unit costs is computed and adjacent non-match operations are
/// merged into phrase edits.
pub fn extract_edits(source: &[String], hypothesis: &[String]) -> Vec<Edit> {
    if source.len() == hypothesis.len() {
        return source
            .iter()
            .zip(hypothesis)
            .enumerate()
            .filter(|(_, (s, h))| s != h)
            .map(|(i, (_, h))| Edit { start: i, end: i + 1, replacement: vec![h.clone()] })
            .collect();
    }
    let ops = align(source, hypothesis);
    merge_ops(&ops, hypothesis)
}

/// Levenshtein alignment with a fixed backtrace preference (match/substitute,
/// then delete, then insert) so tied minimal alignments resolve
/// deterministically.
fn align(source: &[String], hypothesis: &[String]) -> Vec<(AlignOp, usize, usize)> {
    let n = source.len();
    let m = hypothesis.len();
    let mut dist = vec![vec![0u32; m + 1]; n + 1];
    for i in 0..=n {
        dist[i][0] = i as u32;
    }
    for j in 0..=m {
        dist[0][j] = j as u32;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = dist[i - 1][j - 1] + u32::from(source[i - 1] != hypothesis[j - 1]);
            let del = dist[i - 1][j] + 1;
            let ins = dist[i][j - 1] + 1;
            dist[i][j] = sub.min(del).min(ins);
        }
    }
    let mut ops = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dist[i][j];
        if i > 0 && j > 0 {
            let cost = u32::from(source[i - 1] != hypothesis[j - 1]);
            if dist[i - 1][j - 1] + cost == here {
                let op = if cost == 0 { AlignOp::Match } else { AlignOp::Substitute };
                ops.push((op, i - 1, j - 1));
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dist[i - 1][j] + 1 == here {
            ops.push((AlignOp::Delete, i - 1, j));
            i -= 1;
            continue;
        }
        ops.push((AlignOp::Insert, i, j - 1));
        j -= 1;
    }
    ops.reverse();
    ops
}

fn merge_ops(ops: &[(AlignOp, usize, usize)], hypothesis: &[String]) -> Vec<Edit> {
    let mut edits: Vec<Edit> = Vec::new();
    let mut run: Option<(usize, usize, Vec<String>)> = None;
    for &(op, i, j) in ops {
        match op {
            AlignOp::Match => {
                if let Some((start, end, replacement)) = run.take() {
                    edits.push(Edit { start, end, replacement });
                }
            }
            AlignOp::Substitute | AlignOp::Delete | AlignOp::Insert => {
                let (src_lo, src_hi) = match op {
                    AlignOp::Insert => (i, i),
                    _ => (i, i + 1),
                };
                let entry = run.get_or_insert((src_lo, src_hi, Vec::new()));
                entry.0 = entry.0.min(src_lo);
                entry.1 = entry.1.max(src_hi);
                if op != AlignOp::Delete {
                    entry.2.push(hypothesis[j].clone());
                }
            }
        }
    }
    if let Some((start, end, replacement)) = run {
        edits.push(Edit { start, end, replacement });
    }
    edits
}

/// MaxMatch scoring result over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M2Result {
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
    pub matched: u64,
    pub system_count: u64,
    pub gold_count: u64,
}

/// F-beta from precision and recall; 0 when the denominator vanishes.
pub fn f_beta(p: f64, r: f64, beta: f64) -> Result<f64> {
    for (name, v) in [("precision", p), ("recall", r)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidValue(format!("{name} {v} outside [0,1]")));
        }
    }
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::InvalidValue(format!("beta {beta}")));
    }
    let b2 = beta * beta;
    let denom = b2 * p + r;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 + b2) * p * r / denom)
}

/// MaxMatch scorer: maximally matches system edits against gold edits from one
/// or more references per sentence and reports precision, recall and F₀.₅.
///
/// Per sentence the reference maximizing the matched-edit count is chosen
/// (ties: larger gold-edit count, then the first reference). With no system
/// edits precision is 1.0; with no gold edits recall is 1.0.
pub fn m2_score(
    sources: &[Vec<String>],
    hypotheses: &[Vec<String>],
    references: &[Vec<Vec<String>>],
    normalization: Option<&NormalizationTable>,
) -> Result<M2Result> {
    if sources.len() != hypotheses.len() || sources.len() != references.len() {
        return Err(Error::LengthMismatch(format!(
            "{} sources, {} hypotheses, {} reference sets",
            sources.len(),
            hypotheses.len(),
            references.len()
        )));
    }
    let idx: Vec<usize> = (0..sources.len()).collect();
    let per_sentence: Vec<(u64, u64, u64)> = exec::map_ordered(&idx, |&i| {
        sentence_counts(&sources[i], &hypotheses[i], &references[i], normalization)
    });
    let (mut matched, mut system_count, mut gold_count) = (0u64, 0u64, 0u64);
    for (m, s, g) in per_sentence {
        matched += m;
        system_count += s;
        gold_count += g;
    }
    let precision = if system_count == 0 { 1.0 } else { matched as f64 / system_count as f64 };
    let recall = if gold_count == 0 { 1.0 } else { matched as f64 / gold_count as f64 };
    Ok(M2Result {
        precision,
        recall,
        f_beta: f_beta(precision, recall, 0.5)?,
        matched,
        system_count,
        gold_count,
    })
}

fn sentence_counts(
    source: &[String],
    hypothesis: &[String],
    references: &[Vec<String>],
    normalization: Option<&NormalizationTable>,
) -> (u64, u64, u64) {
    let (source, hypothesis, references) = match normalization {
        Some(t) => (
            normalize_tokens(source, t),
            normalize_tokens(hypothesis, t),
            references.iter().map(|r| normalize_tokens(r, t)).collect::<Vec<_>>(),
        ),
        None => (source.to_vec(), hypothesis.to_vec(), references.to_vec()),
    };
    let system: HashSet<Edit> = extract_edits(&source, &hypothesis).into_iter().collect();
    // Choose the reference maximizing matched edits.
    let mut best: Option<(u64, u64)> = None;
    for reference in &references {
        let gold = extract_edits(&source, reference);
        let matched = gold.iter().filter(|e| system.contains(e)).count() as u64;
        let gold_count = gold.len() as u64;
        let better = match best {
            None => true,
            Some((bm, bg)) => matched > bm || (matched == bm && gold_count > bg),
        };
        if better {
            best = Some((matched, gold_count));
        }
    }
    let (matched, gold_count) = best.unwrap_or((0, 0));
    (matched, system.len() as u64, gold_count)
}

const BLEU_MAX_ORDER: usize = 4;

/// Corpus BLEU in [0, 100]: geometric mean of modified n-gram precisions for
/// n = 1..4 with a brevity penalty.
///
/// Zero-precision counts for n >= 2 are smoothed as (m+1)/(t+1); orders with
/// no hypothesis n-grams are skipped. The effective reference length per
/// sentence is the closest to the hypothesis (ties favor the shorter).
pub fn bleu_corpus(hypotheses: &[Vec<String>], references: &[Vec<Vec<String>>]) -> Result<f64> {
    if hypotheses.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if hypotheses.len() != references.len() {
        return Err(Error::LengthMismatch(format!(
            "{} hypotheses, {} reference sets",
            hypotheses.len(),
            references.len()
        )));
    }
    let idx: Vec<usize> = (0..hypotheses.len()).collect();
    let stats: Vec<([u64; BLEU_MAX_ORDER], [u64; BLEU_MAX_ORDER], u64, u64)> =
        exec::map_ordered(&idx, |&i| bleu_sentence_stats(&hypotheses[i], &references[i]));

    let mut matches = [0u64; BLEU_MAX_ORDER];
    let mut totals = [0u64; BLEU_MAX_ORDER];
    let (mut hyp_len, mut ref_len) = (0u64, 0u64);
    for (m, t, h, r) in stats {
        for n in 0..BLEU_MAX_ORDER {
            matches[n] += m[n];
            totals[n] += t[n];
        }
        hyp_len += h;
        ref_len += r;
    }

    let mut log_sum = 0.0;
    let mut used = 0usize;
    for n in 0..BLEU_MAX_ORDER {
        let order = n + 1;
        if totals[n] == 0 {
            continue;
        }
        let p = if matches[n] == 0 && order >= 2 {
            (matches[n] + 1) as f64 / (totals[n] + 1) as f64
        } else {
            matches[n] as f64 / totals[n] as f64
        };
        if p == 0.0 {
            return Ok(0.0);
        }
        log_sum += p.ln();
        used += 1;
    }
    if used == 0 {
        return Ok(0.0);
    }
    let bp = if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };
    Ok(100.0 * bp * (log_sum / used as f64).exp())
}

fn bleu_sentence_stats(
    hypothesis: &[String],
    references: &[Vec<String>],
) -> ([u64; BLEU_MAX_ORDER], [u64; BLEU_MAX_ORDER], u64, u64) {
    let mut matches = [0u64; BLEU_MAX_ORDER];
    let mut totals = [0u64; BLEU_MAX_ORDER];
    for n in 1..=BLEU_MAX_ORDER {
        let hyp_counts = ngram_counts(hypothesis, n);
        totals[n - 1] = hyp_counts.values().sum();
        let mut max_ref: HashMap<&[String], u64> = HashMap::new();
        for reference in references {
            for (gram, count) in ngram_counts(reference, n) {
                let slot = max_ref.entry(gram).or_insert(0);
                *slot = (*slot).max(count);
            }
        }
        matches[n - 1] = hyp_counts
            .iter()
            .map(|(gram, count)| (*count).min(max_ref.get(gram).copied().unwrap_or(0)))
            .sum();
    }
    let hyp_len = hypothesis.len() as u64;
    let ref_len = references
        .iter()
        .map(|r| r.len() as u64)
        .min_by_key(|&len| {
            (u64::abs_diff(len, hyp_len), len)
        })
        .unwrap_or(0);
    (matches, totals, hyp_len, ref_len)
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for i in 0..=tokens.len() - n {
            *counts.entry(&tokens[i..i + n]).or_insert(0) += 1;
        }
    }
    counts
}

/// Per-stage error attribution counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorAttribution {
    pub gid: u64,
    pub rewrite: u64,
    pub select: u64,
}

impl ErrorAttribution {
    pub fn total(&self) -> u64 {
        self.gid + self.rewrite + self.select
    }
}

/// Attributes each erroneous output position to the stage that caused it:
/// a wrong predicted label is a GID error; a candidate set missing the gold
/// word is a Rewrite error; otherwise the selector picked wrong.
pub fn attribute_errors(
    source: &[String],
    gold_labels: &[WordLabel],
    predicted_labels: &[WordLabel],
    candidates: &BTreeMap<usize, CandidateSet>,
    selected: &[String],
    gold_output: &[String],
) -> Result<ErrorAttribution> {
    let len = source.len();
    for (name, l) in [
        ("gold labels", gold_labels.len()),
        ("predicted labels", predicted_labels.len()),
        ("selected output", selected.len()),
        ("gold output", gold_output.len()),
    ] {
        if l != len {
            return Err(Error::LengthMismatch(format!("{name}: {l} vs {len} source tokens")));
        }
    }
    let mut counts = ErrorAttribution::default();
    for i in 0..len {
        if selected[i] == gold_output[i] {
            continue;
        }
        if predicted_labels[i] != gold_labels[i] {
            counts.gid += 1;
        } else {
            let covered = match candidates.get(&i) {
                Some(set) => set.candidates.iter().any(|c| c.surface == gold_output[i]),
                // No candidate set means the word was left unchanged.
                None => source[i] == gold_output[i],
            };
            if covered {
                counts.select += 1;
            } else {
                counts.rewrite += 1;
            }
        }
    }
    Ok(counts)
}
