//! Deterministic toy-corpus builders shared by the test suites and benches.
//! Not part of the public API surface.
#![doc(hidden)]

use std::path::Path;

use crate::corpus::{CorpusPaths, PerTarget};
use crate::labels::{Gender, SentenceTarget};
use crate::rewrite::NeuralConfig;

/// Writes a shape-varied five-file toy corpus under `dir` and returns its
/// paths. First-person words rewrite `a -> o`, second-person words
/// `ki -> ko`; sentence shapes rotate so no position is always gendered.
pub fn build_toy_corpus(dir: &Path, sentences: usize) -> CorpusPaths {
    enum Row {
        First(String),
        Second(String),
        Pad(String),
    }
    std::fs::create_dir_all(dir).unwrap();
    let paths = CorpusPaths::in_dir(dir);
    let mut input = String::new();
    let mut targets = PerTarget::build(|_| String::new());
    for i in 0..sentences {
        let f = format!("fw{}", i % 7);
        let s = format!("sw{}", i % 5);
        let p1 = format!("pad{}", i % 3);
        let p2 = format!("pad{}", (i + 1) % 3);
        let p3 = format!("pad{}", (i + 2) % 3);
        let rows = match i % 4 {
            0 => vec![Row::First(f), Row::Pad(p1), Row::Second(s)],
            1 => vec![Row::Pad(p1), Row::First(f), Row::Pad(p2)],
            2 => vec![Row::Pad(p1), Row::Pad(p2), Row::Pad(p3)],
            _ => vec![Row::Second(s), Row::Pad(p1), Row::First(f)],
        };
        let sep = if i == 0 { "" } else { "\n" };
        input.push_str(sep);
        for row in &rows {
            // The input convention is feminine for both persons.
            let line = match row {
                Row::First(st) => format!("{st}a\t1F\n"),
                Row::Second(st) => format!("{st}ki\t2F\n"),
                Row::Pad(w) => format!("{w}\tB\n"),
            };
            input.push_str(&line);
        }
        for (target, out) in SentenceTarget::ALL.into_iter().zip(targets.0.iter_mut()) {
            out.push_str(sep);
            for row in &rows {
                let line = match row {
                    Row::First(st) => match target.first {
                        Gender::Masculine => format!("{st}o\t1M\n"),
                        Gender::Feminine => format!("{st}a\t1F\n"),
                    },
                    Row::Second(st) => match target.second {
                        Gender::Masculine => format!("{st}ko\t2M\n"),
                        Gender::Feminine => format!("{st}ki\t2F\n"),
                    },
                    Row::Pad(w) => format!("{w}\tB\n"),
                };
                out.push_str(&line);
            }
        }
    }
    std::fs::write(&paths.input, input).unwrap();
    for (target, path) in paths.targets.iter() {
        std::fs::write(path, targets.get(target)).unwrap();
    }
    paths
}

/// A neural configuration small enough for tests that still memorizes the
/// toy corpus.
pub fn fast_neural_config() -> NeuralConfig {
    NeuralConfig {
        embedding_dim: 12,
        hidden_dim: 16,
        num_layers: 1,
        dropout: 0.0,
        beam_width: 4,
        kbest: 3,
        epochs: 4,
        learning_rate: 5e-3,
        sample_prob: 0.0,
        ..NeuralConfig::default()
    }
}
