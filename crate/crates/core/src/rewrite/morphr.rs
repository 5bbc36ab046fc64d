//! Morphological rewriter: a training-free rule table over stems and
//! pronominal enclitics.
//!
//! The table has three parts. Suffix rules rewrite a stem ending for a given
//! base-slot change; lexical exceptions replace whole base forms and take
//! precedence over suffix rules; the enclitic map supplies the alternative
//! enclitic forms. A word the table cannot rewrite passes through unchanged.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::labels::{parse_enclitic_line, segment_enclitic, EncliticTable, GenderSlot, WordLabel};
use crate::rewrite::{Candidate, CandidateSet, Provenance};

/// Rewrites stems ending in `match_suffix` (empty matches any stem) for one
/// base-slot change, substituting `replacement` for the matched ending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuffixRule {
    pub match_suffix: String,
    pub source: GenderSlot,
    pub target: GenderSlot,
    pub replacement: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MorphRuleTable {
    /// Longest-match-first; every applicable rule fires.
    suffix_rules: Vec<SuffixRule>,
    /// (base form, target slot) -> replacement; beats suffix rules.
    lexical: BTreeMap<(String, GenderSlot), String>,
    enclitics: EncliticTable,
}

const DEFAULT_RULES: &str = include_str!("../data/morph_rules.tsv");

impl MorphRuleTable {
    pub fn new(
        mut suffix_rules: Vec<SuffixRule>,
        lexical: BTreeMap<(String, GenderSlot), String>,
        enclitics: EncliticTable,
    ) -> Result<Self> {
        for rule in &suffix_rules {
            if !rule.source.is_marked() || !rule.target.is_marked() {
                return Err(Error::TableFormat(
                    "suffix rule slots must be gendered".to_string(),
                ));
            }
        }
        suffix_rules.sort_by(|a, b| {
            b.match_suffix
                .chars()
                .count()
                .cmp(&a.match_suffix.chars().count())
                .then_with(|| a.match_suffix.cmp(&b.match_suffix))
                .then_with(|| a.replacement.cmp(&b.replacement))
        });
        Ok(MorphRuleTable { suffix_rules, lexical, enclitics })
    }

    /// The built-in starter table reconstructed from the common suffix,
    /// lexical and enclitic change patterns.
    pub fn default_table() -> MorphRuleTable {
        MorphRuleTable::from_tsv_str(DEFAULT_RULES)
            .expect("built-in morphological rule table is well formed")
    }

    pub fn enclitics(&self) -> &EncliticTable {
        &self.enclitics
    }

    /// Parses the sectioned TSV format with `[suffix]`, `[lexical]` and
    /// `[enclitic]` sections, one rule per line, `#` comments allowed.
    pub fn from_tsv_str(text: &str) -> Result<Self> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Suffix,
            Lexical,
            Enclitic,
        }
        let mut section = Section::None;
        let mut suffix_rules = Vec::new();
        let mut lexical = BTreeMap::new();
        let mut enclitic_entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fail = |msg: String| Error::TableFormat(format!("line {}: {msg}", lineno + 1));
            match line {
                "[suffix]" => {
                    section = Section::Suffix;
                    continue;
                }
                "[lexical]" => {
                    section = Section::Lexical;
                    continue;
                }
                "[enclitic]" => {
                    section = Section::Enclitic;
                    continue;
                }
                _ => {}
            }
            let cols: Vec<&str> = line.split('\t').collect();
            match section {
                Section::None => return Err(fail("rule outside any section".to_string())),
                Section::Suffix => {
                    // The trailing replacement column may be omitted when
                    // empty (a bare strip rule).
                    if cols.len() != 3 && cols.len() != 4 {
                        return Err(fail(format!("expected 4 columns, got {}", cols.len())));
                    }
                    suffix_rules.push(SuffixRule {
                        match_suffix: cols[0].to_string(),
                        source: cols[1].parse()?,
                        target: cols[2].parse()?,
                        replacement: cols.get(3).unwrap_or(&"").to_string(),
                    });
                }
                Section::Lexical => {
                    if cols.len() != 3 {
                        return Err(fail(format!("expected 3 columns, got {}", cols.len())));
                    }
                    let slot: GenderSlot = cols[1].parse()?;
                    if !slot.is_marked() {
                        return Err(fail("lexical target slot must be gendered".to_string()));
                    }
                    lexical.insert((cols[0].to_string(), slot), cols[2].to_string());
                }
                Section::Enclitic => {
                    enclitic_entries.push(parse_enclitic_line(line).map_err(|e| fail(e.to_string()))?);
                }
            }
        }
        MorphRuleTable::new(suffix_rules, lexical, EncliticTable::new(enclitic_entries)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv_str(&text)
    }

    /// All rewrites of `word` from `source` to `target`: the enclitic map
    /// handles an enclitic slot change, lexical exceptions or suffix rules
    /// handle a base slot change, composed when both change. Every applicable
    /// suffix rule fires, scored 1/rank in firing order. Any required change
    /// the table cannot express makes the word pass through.
    pub fn candidates(&self, word: &str, source: WordLabel, target: WordLabel) -> CandidateSet {
        let (stem, entry) = segment_enclitic(word, &self.enclitics);
        let need_base = source.base != target.base;
        let need_enclitic = source.enclitic != target.enclitic;
        if !need_base && !need_enclitic {
            return CandidateSet::pass_through(word);
        }

        let enclitic_form: &str = if need_enclitic {
            let alt = entry.and_then(|e| e.alternatives.get(&target.enclitic));
            match alt {
                Some(form) => form,
                None => return CandidateSet::pass_through(word),
            }
        } else {
            entry.map(|e| e.suffix.as_str()).unwrap_or("")
        };

        let bases: Vec<(String, usize)> = if need_base {
            if let Some(replacement) = self.lexical.get(&(stem.to_string(), target.base)) {
                vec![(replacement.clone(), 1)]
            } else {
                let mut fired = Vec::new();
                for rule in &self.suffix_rules {
                    if rule.source != source.base || rule.target != target.base {
                        continue;
                    }
                    if !stem.ends_with(rule.match_suffix.as_str()) {
                        continue;
                    }
                    let root = &stem[..stem.len() - rule.match_suffix.len()];
                    let rewritten = format!("{root}{}", rule.replacement);
                    if rewritten.is_empty() {
                        continue;
                    }
                    fired.push((rewritten, fired.len() + 1));
                }
                if fired.is_empty() {
                    return CandidateSet::pass_through(word);
                }
                fired
            }
        } else {
            vec![(stem.to_string(), 1)]
        };

        let mut best: BTreeMap<String, f64> = BTreeMap::new();
        for (base, rank) in &bases {
            let surface = format!("{base}{enclitic_form}");
            let score = 1.0 / *rank as f64;
            let slot = best.entry(surface).or_insert(score);
            *slot = slot.max(score);
        }
        CandidateSet::from_candidates(
            best.into_iter()
                .map(|(surface, score)| Candidate {
                    surface,
                    score,
                    provenance: Provenance::MorphR,
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(s: &str) -> WordLabel {
        s.parse().unwrap()
    }

    #[test]
    fn default_table_parses() {
        let t = MorphRuleTable::default_table();
        assert!(!t.suffix_rules.is_empty());
        assert!(!t.lexical.is_empty());
    }

    #[test]
    fn enclitic_swap_keeps_stem() {
        let t = MorphRuleTable::default_table();
        // 2M plural enclitic to its 2F form; stem untouched.
        let set = t.candidates("أحبكم", label("B+2M"), label("B+2F"));
        assert!(!set.pass_through);
        assert_eq!(set.candidates[0].surface, "أحبكن");
        assert!((set.candidates[0].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn feminine_suffix_rule_applies() {
        let t = MorphRuleTable::default_table();
        // 1M -> 1F by appending the feminine suffix.
        let set = t.candidates("سعيد", label("1M+B"), label("1F+B"));
        assert!(!set.pass_through);
        assert!(set.candidates.iter().any(|c| c.surface == "سعيدة"));
        // And back, stripping it.
        let set = t.candidates("سعيدة", label("1F+B"), label("1M+B"));
        assert!(set.candidates.iter().any(|c| c.surface == "سعيد"));
    }

    #[test]
    fn uncovered_base_change_passes_through() {
        let t = MorphRuleTable::default_table();
        // Latin word with no matching suffix for an F -> M change.
        let set = t.candidates("hello", label("1F+B"), label("1M+B"));
        assert!(set.pass_through);
        assert_eq!(set.candidates[0].surface, "hello");
    }

    #[test]
    fn lexical_exception_beats_suffix_rules() {
        let enclitics = EncliticTable::default_table();
        let rules = vec![SuffixRule {
            match_suffix: String::new(),
            source: "1M".parse().unwrap(),
            target: "1F".parse().unwrap(),
            replacement: "X".to_string(),
        }];
        let mut lexical = BTreeMap::new();
        lexical.insert(("فتى".to_string(), "1F".parse().unwrap()), "فتاة".to_string());
        let t = MorphRuleTable::new(rules, lexical, enclitics).unwrap();
        let set = t.candidates("فتى", label("1M+B"), label("1F+B"));
        assert_eq!(set.candidates.len(), 1);
        assert_eq!(set.candidates[0].surface, "فتاة");
    }

    #[test]
    fn multiple_rules_fire_with_rank_scores() {
        let enclitics = EncliticTable::default_table();
        let mk = |m: &str, r: &str| SuffixRule {
            match_suffix: m.to_string(),
            source: "2M".parse().unwrap(),
            target: "2F".parse().unwrap(),
            replacement: r.to_string(),
        };
        let t = MorphRuleTable::new(vec![mk("", "a"), mk("", "b")], BTreeMap::new(), enclitics)
            .unwrap();
        let set = t.candidates("w", label("2M+B"), label("2F+B"));
        assert_eq!(set.candidates.len(), 2);
        assert!((set.candidates[0].score - 1.0).abs() < 1e-12);
        assert!((set.candidates[1].score - 0.5).abs() < 1e-12);
    }

    #[test]
    fn base_and_enclitic_change_compose() {
        let t = MorphRuleTable::default_table();
        let set = t.candidates("سعيدكم", label("1M+2M"), label("1F+2F"));
        assert!(!set.pass_through);
        assert!(set.candidates.iter().any(|c| c.surface == "سعيدةكن"));
    }

    #[test]
    fn enclitic_change_without_entry_passes_through() {
        let t = MorphRuleTable::default_table();
        let set = t.candidates("hello", label("B+2M"), label("B+2F"));
        assert!(set.pass_through);
    }

    #[test]
    fn sections_parse_and_bad_lines_fail() {
        let text = "[suffix]\nة\t1F\t1M\t\n[lexical]\nفتى\t1F\tفتاة\n[enclitic]\nكم\t2M\talt:2M=كم,2F=كن\n";
        let t = MorphRuleTable::from_tsv_str(text).unwrap();
        assert_eq!(t.suffix_rules.len(), 1);
        assert_eq!(t.lexical.len(), 1);
        assert!(MorphRuleTable::from_tsv_str("x\tB\tB\t\n").is_err());
        assert!(MorphRuleTable::from_tsv_str("[suffix]\nة\t1F\n").is_err());
    }
}
