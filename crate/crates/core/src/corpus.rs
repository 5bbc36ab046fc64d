//! Data model and ingestion for 5-way word-aligned parallel gender corpora,
//! annotation extension, and extraction of training pairs for the rewriters.
//!
//! On disk a corpus is five parallel TSV files (the input rendering plus one
//! per sentence target), one token per line as `surface<TAB>coarse<TAB>extended`
//! with trailing empty label columns omitted, and a blank line between
//! sentences.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{
    needs_rewrite, required_word_target, segment_enclitic, EncliticTable, GenderSlot,
    SentenceTarget, WordLabel,
};

/// Reserved sentence-start context marker; never a valid token surface.
pub const SENTENCE_START: &str = "<s>";

/// One token with its optional coarse and extended gender labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub coarse: Option<GenderSlot>,
    pub extended: Option<WordLabel>,
}

impl Token {
    pub fn new(surface: impl Into<String>) -> Token {
        Token { surface: surface.into(), coarse: None, extended: None }
    }

    pub fn with_coarse(surface: impl Into<String>, coarse: GenderSlot) -> Token {
        Token { surface: surface.into(), coarse: Some(coarse), extended: None }
    }

    /// The extended label, falling back to promoting the coarse label and
    /// finally to `B+B`.
    pub fn label(&self) -> WordLabel {
        self.extended.unwrap_or_else(|| {
            self.coarse
                .map(|c| WordLabel::new(c, GenderSlot::Invariant))
                .unwrap_or(WordLabel::B_B)
        })
    }
}

/// Fixed-size association from each of the four sentence targets to a value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerTarget<T>(pub [T; 4]);

impl<T> PerTarget<T> {
    pub fn build(mut f: impl FnMut(SentenceTarget) -> T) -> PerTarget<T> {
        PerTarget(SentenceTarget::ALL.map(&mut f))
    }

    pub fn get(&self, target: SentenceTarget) -> &T {
        &self.0[target.index()]
    }

    pub fn get_mut(&mut self, target: SentenceTarget) -> &mut T {
        &mut self.0[target.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (SentenceTarget, &T)> {
        SentenceTarget::ALL.into_iter().zip(self.0.iter())
    }
}

/// A 5-way word-aligned sentence: the input rendering plus the rendering for
/// each sentence target. All five token sequences have identical length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelExample {
    pub input: Vec<Token>,
    pub targets: PerTarget<Vec<Token>>,
}

impl ParallelExample {
    pub fn len(&self) -> usize {
        self.input.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_empty()
    }

    fn check_alignment(&self, sentence: usize) -> Result<()> {
        for (target, tokens) in self.targets.iter() {
            if tokens.len() != self.input.len() {
                return Err(Error::Alignment {
                    sentence,
                    detail: format!(
                        "target {target} has {} tokens, input has {}",
                        tokens.len(),
                        self.input.len()
                    ),
                });
            }
        }
        Ok(())
    }

    /// All five renderings at one aligned position: input first, then the
    /// four targets in order.
    fn column(&self, position: usize) -> [&Token; 5] {
        [
            &self.input[position],
            &self.targets.0[0][position],
            &self.targets.0[1][position],
            &self.targets.0[2][position],
            &self.targets.0[3][position],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

/// An ordered collection of parallel examples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub examples: Vec<ParallelExample>,
    pub split: Split,
}

impl Corpus {
    pub fn new(examples: Vec<ParallelExample>, split: Split) -> Corpus {
        Corpus { examples, split }
    }

    /// Checks the 1-to-1 alignment invariant on every example.
    pub fn validate_alignment(&self) -> Result<()> {
        for (i, ex) in self.examples.iter().enumerate() {
            ex.check_alignment(i)?;
        }
        Ok(())
    }

    /// Checks that in each target rendering every extended label is already
    /// compatible with that target.
    pub fn validate_label_compatibility(&self) -> Result<()> {
        for (i, ex) in self.examples.iter().enumerate() {
            for (target, tokens) in ex.targets.iter() {
                for (j, tok) in tokens.iter().enumerate() {
                    if let Some(label) = tok.extended {
                        if needs_rewrite(label, target) {
                            return Err(Error::Alignment {
                                sentence: i,
                                detail: format!(
                                    "token {j} of target {target} carries incompatible label {label}"
                                ),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_alignment()?;
        self.validate_label_compatibility()
    }
}

/// The five files holding one corpus split.
#[derive(Debug, Clone)]
pub struct CorpusPaths {
    pub input: PathBuf,
    pub targets: PerTarget<PathBuf>,
}

impl CorpusPaths {
    /// Standard layout inside a directory: `input.tsv` and
    /// `target-<tag>.tsv` for each sentence target.
    pub fn in_dir(dir: &Path) -> CorpusPaths {
        CorpusPaths {
            input: dir.join("input.tsv"),
            targets: PerTarget::build(|t| dir.join(format!("target-{}.tsv", t.file_tag()))),
        }
    }

    #[cfg(test)]
    fn all(&self) -> Vec<&Path> {
        let mut v = vec![self.input.as_path()];
        v.extend(self.targets.0.iter().map(PathBuf::as_path));
        v
    }
}

fn parse_token_line(line: &str) -> Result<Token> {
    let mut cols = line.split('\t');
    let surface = cols.next().unwrap_or_default();
    if surface.is_empty() {
        return Err(Error::CorpusFormat("empty token surface".to_string()));
    }
    if surface.chars().any(char::is_whitespace) {
        return Err(Error::CorpusFormat(format!("surface `{surface}` contains whitespace")));
    }
    if surface == SENTENCE_START {
        return Err(Error::CorpusFormat(format!("surface `{surface}` is reserved")));
    }
    let coarse_col = cols.next();
    let extended_col = cols.next();
    if cols.next().is_some() {
        return Err(Error::CorpusFormat(format!("too many columns in `{line}`")));
    }
    if coarse_col == Some("") && extended_col.is_none() {
        return Err(Error::CorpusFormat(format!("dangling empty label column in `{line}`")));
    }
    let coarse = match coarse_col {
        None | Some("") => None,
        Some(text) => Some(text.parse::<GenderSlot>()?),
    };
    let extended = match extended_col {
        None | Some("") => None,
        Some(text) => Some(text.parse::<WordLabel>()?),
    };
    Ok(Token { surface: surface.to_string(), coarse, extended })
}

fn format_token_line(out: &mut String, token: &Token) {
    out.push_str(&token.surface);
    match (token.coarse, token.extended) {
        (None, None) => {}
        (coarse, None) => {
            out.push('\t');
            if let Some(c) = coarse {
                let _ = write!(out, "{c}");
            }
        }
        (coarse, Some(e)) => {
            out.push('\t');
            if let Some(c) = coarse {
                let _ = write!(out, "{c}");
            }
            let _ = write!(out, "\t{e}");
        }
    }
    out.push('\n');
}

fn parse_rendering_file(path: &Path) -> Result<Vec<Vec<Token>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut sentences = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    for line in text.lines() {
        if line.is_empty() {
            if !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
            continue;
        }
        current.push(parse_token_line(line)?);
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    Ok(sentences)
}

/// Reads the five parallel files into a corpus, enforcing the 1-to-1
/// alignment invariant.
pub fn parse_corpus(paths: &CorpusPaths, split: Split) -> Result<Corpus> {
    let input = parse_rendering_file(&paths.input)?;
    let mut targets: Vec<Vec<Vec<Token>>> = Vec::with_capacity(4);
    for path in paths.targets.0.iter() {
        targets.push(parse_rendering_file(path)?);
    }
    for (t, rendering) in SentenceTarget::ALL.iter().zip(&targets) {
        if rendering.len() != input.len() {
            return Err(Error::Alignment {
                sentence: input.len().min(rendering.len()),
                detail: format!(
                    "target {t} has {} sentences, input has {}",
                    rendering.len(),
                    input.len()
                ),
            });
        }
    }
    let mut examples = Vec::with_capacity(input.len());
    for (i, input_sentence) in input.into_iter().enumerate() {
        let example = ParallelExample {
            input: input_sentence,
            targets: PerTarget([
                targets[0][i].clone(),
                targets[1][i].clone(),
                targets[2][i].clone(),
                targets[3][i].clone(),
            ]),
        };
        example.check_alignment(i)?;
        examples.push(example);
    }
    Ok(Corpus::new(examples, split))
}

/// Serializes a corpus back to the five-file layout. Inverse of
/// [`parse_corpus`] on well-formed input.
pub fn write_corpus(corpus: &Corpus, paths: &CorpusPaths) -> Result<()> {
    let render = |pick: &dyn Fn(&ParallelExample) -> &Vec<Token>| {
        let mut out = String::new();
        for (i, ex) in corpus.examples.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            for token in pick(ex) {
                format_token_line(&mut out, token);
            }
        }
        out
    };
    let write = |path: &Path, text: String| -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    };
    write(&paths.input, render(&|ex| &ex.input))?;
    for (target, path) in paths.targets.iter() {
        write(path, render(&move |ex| ex.targets.get(target)))?;
    }
    Ok(())
}

/// Derives extended labels from coarse labels, the enclitic table and the
/// parallel renderings.
///
/// For every aligned 5-tuple of a gendered word: the enclitic slot comes from
/// the table when the word ends with a gender-marking enclitic, otherwise it
/// is `B`; the base slot is `B` when the stem is identical across all five
/// renderings and otherwise inherits the rendering's coarse slot. Words
/// without a gendered coarse label stay `B+B`.
pub fn extend_annotations(example: &ParallelExample, table: &EncliticTable) -> ParallelExample {
    let mut out = example.clone();
    for position in 0..example.len() {
        let column = example.column(position);
        let stems: Vec<&str> = column
            .iter()
            .map(|tok| segment_enclitic(&tok.surface, table).0)
            .collect();
        let stems_identical = stems.windows(2).all(|w| w[0] == w[1]);
        let extended_for = |tok: &Token| -> WordLabel {
            let coarse = match tok.coarse {
                Some(c) if c.is_marked() => c,
                _ => return WordLabel::B_B,
            };
            let (_, entry) = segment_enclitic(&tok.surface, table);
            let enclitic = match entry {
                Some(e) if e.class.is_marked() => e.class,
                _ => GenderSlot::Invariant,
            };
            let base = if stems_identical { GenderSlot::Invariant } else { coarse };
            WordLabel::new(base, enclitic)
        };
        out.input[position].extended = Some(extended_for(column[0]));
        for (t, tok) in column.iter().enumerate().skip(1) {
            out.targets.0[t - 1][position].extended = Some(extended_for(tok));
        }
    }
    out
}

/// Extracts one rewrite pair per (aligned position, target rendering) whose
/// input label is incompatible with that target.
///
/// The pair records the input word, its preceding input word (or the
/// sentence-start marker), the aligned target surface and the required label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewritePair {
    pub source: String,
    pub prev: String,
    pub target_surface: String,
    pub target_label: WordLabel,
}

pub fn extract_rewrite_pairs(corpus: &Corpus) -> Vec<RewritePair> {
    let mut pairs = Vec::new();
    for example in &corpus.examples {
        for position in 0..example.len() {
            let token = &example.input[position];
            let label = token.label();
            for (target, rendering) in example.targets.iter() {
                let required = required_word_target(label, target);
                if required == label {
                    continue;
                }
                let prev = if position == 0 {
                    SENTENCE_START.to_string()
                } else {
                    example.input[position - 1].surface.clone()
                };
                pairs.push(RewritePair {
                    source: token.surface.clone(),
                    prev,
                    target_surface: rendering[position].surface.clone(),
                    target_label: required,
                });
            }
        }
    }
    pairs
}

/// Corpus-level counting statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub sentences: u64,
    pub words: u64,
    pub label_counts: BTreeMap<String, u64>,
    pub gendered_words: u64,
    pub gendered_word_fraction: f64,
    pub invariant_word_fraction: f64,
    pub gendered_sentences: u64,
    pub gendered_sentence_fraction: f64,
    pub invariant_sentence_fraction: f64,
}

/// Exact counts over the input renderings; fractions pair up to sum to 1.
pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut stats = CorpusStats {
        sentences: 0,
        words: 0,
        label_counts: BTreeMap::new(),
        gendered_words: 0,
        gendered_word_fraction: 0.0,
        invariant_word_fraction: 0.0,
        gendered_sentences: 0,
        gendered_sentence_fraction: 0.0,
        invariant_sentence_fraction: 0.0,
    };
    for example in &corpus.examples {
        stats.sentences += 1;
        let mut sentence_gendered = false;
        for token in &example.input {
            stats.words += 1;
            let label = token.label();
            *stats.label_counts.entry(label.to_string()).or_insert(0) += 1;
            if label.is_gendered() {
                stats.gendered_words += 1;
                sentence_gendered = true;
            }
        }
        if sentence_gendered {
            stats.gendered_sentences += 1;
        }
    }
    if stats.words > 0 {
        stats.gendered_word_fraction = stats.gendered_words as f64 / stats.words as f64;
        stats.invariant_word_fraction = 1.0 - stats.gendered_word_fraction;
    }
    if stats.sentences > 0 {
        stats.gendered_sentence_fraction = stats.gendered_sentences as f64 / stats.sentences as f64;
        stats.invariant_sentence_fraction = 1.0 - stats.gendered_sentence_fraction;
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::SLOT_1F;
    use std::fs;
    use tempfile::TempDir;

    fn sentence(words: &[(&str, &str)]) -> Vec<Token> {
        words
            .iter()
            .map(|(w, c)| Token {
                surface: w.to_string(),
                coarse: Some(c.parse().unwrap()),
                extended: None,
            })
            .collect()
    }

    fn write_file(path: &Path, text: &str) {
        fs::write(path, text).unwrap();
    }

    fn toy_files(dir: &Path) -> CorpusPaths {
        let paths = CorpusPaths::in_dir(dir);
        write_file(&paths.input, "سعيدة\t1F\nجدا\tB\n");
        write_file(paths.targets.get("1M/2M".parse().unwrap()), "سعيد\t1M\nجدا\tB\n");
        write_file(paths.targets.get("1F/2M".parse().unwrap()), "سعيدة\t1F\nجدا\tB\n");
        write_file(paths.targets.get("1M/2F".parse().unwrap()), "سعيد\t1M\nجدا\tB\n");
        write_file(paths.targets.get("1F/2F".parse().unwrap()), "سعيدة\t1F\nجدا\tB\n");
        paths
    }

    #[test]
    fn parse_five_equal_files() {
        let dir = TempDir::new().unwrap();
        let paths = toy_files(dir.path());
        let corpus = parse_corpus(&paths, Split::Train).unwrap();
        assert_eq!(corpus.examples.len(), 1);
        assert_eq!(corpus.examples[0].len(), 2);
        corpus.validate_alignment().unwrap();
    }

    #[test]
    fn token_length_mismatch_reports_sentence() {
        let dir = TempDir::new().unwrap();
        let paths = toy_files(dir.path());
        // Four sentences; the fourth target rendering drops a token in
        // sentence 3.
        let ok = "a\tB\n\na\tB\n\na\tB\n\na\tB\nb\tB\n";
        let bad = "a\tB\n\na\tB\n\na\tB\n\na\tB\n";
        write_file(&paths.input, ok);
        for (_, p) in paths.targets.iter() {
            write_file(p, ok);
        }
        write_file(paths.targets.get("1F/2F".parse().unwrap()), bad);
        match parse_corpus(&paths, Split::Train) {
            Err(Error::Alignment { sentence, .. }) => assert_eq!(sentence, 3),
            other => panic!("expected alignment error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_label_rejected() {
        let dir = TempDir::new().unwrap();
        let paths = toy_files(dir.path());
        write_file(&paths.input, "a\t2X\n");
        assert!(matches!(
            parse_corpus(&paths, Split::Train),
            Err(Error::MalformedLabel { .. })
        ));
    }

    #[test]
    fn roundtrip_is_byte_identical() {
        let dir = TempDir::new().unwrap();
        let paths = toy_files(dir.path());
        let corpus = parse_corpus(&paths, Split::Train).unwrap();
        let out = TempDir::new().unwrap();
        let out_paths = CorpusPaths::in_dir(out.path());
        write_corpus(&corpus, &out_paths).unwrap();
        for (a, b) in paths.all().iter().zip(out_paths.all()) {
            assert_eq!(fs::read_to_string(a).unwrap(), fs::read_to_string(b).unwrap());
        }
        let reparsed = parse_corpus(&out_paths, Split::Train).unwrap();
        assert_eq!(reparsed, corpus);
    }

    fn example_from(sentences: [Vec<Token>; 5]) -> ParallelExample {
        let [input, a, b, c, d] = sentences;
        ParallelExample { input, targets: PerTarget([a, b, c, d]) }
    }

    #[test]
    fn extend_enclitic_only_variation() {
        // Stem identical everywhere; only the second-person enclitic varies.
        let table = EncliticTable::default_table();
        let ex = example_from([
            sentence(&[("أحبكن", "2F")]),
            sentence(&[("أحبكم", "2M")]),
            sentence(&[("أحبكم", "2M")]),
            sentence(&[("أحبكن", "2F")]),
            sentence(&[("أحبكن", "2F")]),
        ]);
        let ext = extend_annotations(&ex, &table);
        assert_eq!(ext.input[0].extended.unwrap().to_string(), "B+2F");
        assert_eq!(ext.targets.0[0][0].extended.unwrap().to_string(), "B+2M");
    }

    #[test]
    fn extend_stem_variation_without_enclitic() {
        let table = EncliticTable::default_table();
        let ex = example_from([
            sentence(&[("سعيدة", "1F")]),
            sentence(&[("سعيد", "1M")]),
            sentence(&[("سعيدة", "1F")]),
            sentence(&[("سعيد", "1M")]),
            sentence(&[("سعيدة", "1F")]),
        ]);
        let ext = extend_annotations(&ex, &table);
        assert_eq!(ext.input[0].extended.unwrap().to_string(), "1F+B");
        assert_eq!(ext.targets.0[0][0].extended.unwrap().to_string(), "1M+B");
    }

    #[test]
    fn extend_invariant_tuple_stays_b() {
        let table = EncliticTable::default_table();
        let row = sentence(&[("جدا", "B")]);
        let ex = example_from([row.clone(), row.clone(), row.clone(), row.clone(), row]);
        let ext = extend_annotations(&ex, &table);
        assert_eq!(ext.input[0].extended.unwrap(), WordLabel::B_B);
    }

    #[test]
    fn extend_is_idempotent() {
        let table = EncliticTable::default_table();
        let ex = example_from([
            sentence(&[("سعيدة", "1F"), ("أحبكن", "2F")]),
            sentence(&[("سعيد", "1M"), ("أحبكم", "2M")]),
            sentence(&[("سعيدة", "1F"), ("أحبكم", "2M")]),
            sentence(&[("سعيد", "1M"), ("أحبكن", "2F")]),
            sentence(&[("سعيدة", "1F"), ("أحبكن", "2F")]),
        ]);
        let once = extend_annotations(&ex, &table);
        let twice = extend_annotations(&once, &table);
        assert_eq!(once, twice);
    }

    #[test]
    fn rewrite_pairs_match_required_targets() {
        let table = EncliticTable::default_table();
        let ex = example_from([
            sentence(&[("سعيدة", "1F"), ("جدا", "B")]),
            sentence(&[("سعيد", "1M"), ("جدا", "B")]),
            sentence(&[("سعيدة", "1F"), ("جدا", "B")]),
            sentence(&[("سعيد", "1M"), ("جدا", "B")]),
            sentence(&[("سعيدة", "1F"), ("جدا", "B")]),
        ]);
        let corpus = Corpus::new(vec![extend_annotations(&ex, &table)], Split::Train);
        let pairs = extract_rewrite_pairs(&corpus);
        // The 1F word needs a rewrite for the two 1M targets only.
        assert_eq!(pairs.len(), 2);
        for pair in &pairs {
            assert_eq!(pair.source, "سعيدة");
            assert_eq!(pair.prev, SENTENCE_START);
            assert_eq!(pair.target_surface, "سعيد");
            assert_eq!(pair.target_label.to_string(), "1M+B");
        }
        let input_label = corpus.examples[0].input[0].label();
        for (pair, target) in pairs.iter().zip(["1M/2M", "1M/2F"]) {
            let t: SentenceTarget = target.parse().unwrap();
            assert_eq!(pair.target_label, required_word_target(input_label, t));
        }
    }

    #[test]
    fn all_invariant_corpus_yields_no_pairs() {
        let table = EncliticTable::default_table();
        let row = sentence(&[("جدا", "B"), ("جدا", "B")]);
        let ex = example_from([row.clone(), row.clone(), row.clone(), row.clone(), row]);
        let corpus = Corpus::new(vec![extend_annotations(&ex, &table)], Split::Train);
        assert!(extract_rewrite_pairs(&corpus).is_empty());
    }

    #[test]
    fn first_word_uses_start_marker() {
        let table = EncliticTable::default_table();
        let ex = example_from([
            sentence(&[("جدا", "B"), ("سعيدة", "1F")]),
            sentence(&[("جدا", "B"), ("سعيد", "1M")]),
            sentence(&[("جدا", "B"), ("سعيدة", "1F")]),
            sentence(&[("جدا", "B"), ("سعيد", "1M")]),
            sentence(&[("جدا", "B"), ("سعيدة", "1F")]),
        ]);
        let corpus = Corpus::new(vec![extend_annotations(&ex, &table)], Split::Train);
        let pairs = extract_rewrite_pairs(&corpus);
        assert!(pairs.iter().all(|p| p.prev == "جدا"));
    }

    #[test]
    fn stats_on_empty_and_toy() {
        let empty = Corpus::new(vec![], Split::Dev);
        let s = corpus_stats(&empty);
        assert_eq!((s.sentences, s.words, s.gendered_words), (0, 0, 0));

        let table = EncliticTable::default_table();
        let gendered = example_from([
            sentence(&[("سعيدة", "1F")]),
            sentence(&[("سعيد", "1M")]),
            sentence(&[("سعيدة", "1F")]),
            sentence(&[("سعيد", "1M")]),
            sentence(&[("سعيدة", "1F")]),
        ]);
        let plain_row = sentence(&[("جدا", "B")]);
        let plain = example_from([
            plain_row.clone(),
            plain_row.clone(),
            plain_row.clone(),
            plain_row.clone(),
            plain_row,
        ]);
        let corpus = Corpus::new(
            vec![extend_annotations(&gendered, &table), extend_annotations(&plain, &table)],
            Split::Train,
        );
        let s = corpus_stats(&corpus);
        assert_eq!(s.sentences, 2);
        assert_eq!(s.gendered_sentences, 1);
        assert!((s.gendered_sentence_fraction - 0.5).abs() < 1e-12);
        assert!(
            (s.gendered_sentence_fraction + s.invariant_sentence_fraction - 1.0).abs() < 1e-9
        );
        assert!((s.gendered_word_fraction + s.invariant_word_fraction - 1.0).abs() < 1e-9);
    }

    #[test]
    fn label_compatibility_validation() {
        let ex = example_from([
            sentence(&[("سعيدة", "1F")]),
            sentence(&[("سعيد", "1M")]),
            sentence(&[("سعيدة", "1F")]),
            sentence(&[("سعيد", "1M")]),
            sentence(&[("سعيدة", "1F")]),
        ]);
        let table = EncliticTable::default_table();
        let good = Corpus::new(vec![extend_annotations(&ex, &table)], Split::Train);
        good.validate().unwrap();

        let mut bad = good.clone();
        // Claim a feminine base in the 1M/2M rendering.
        bad.examples[0].targets.0[0][0].extended =
            Some(WordLabel::new(SLOT_1F, GenderSlot::Invariant));
        assert!(bad.validate().is_err());
    }
}
