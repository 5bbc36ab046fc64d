//! The gender-label algebra: slots, word labels, sentence targets, enclitic
//! segmentation, and the compatibility logic that decides which words need
//! rewriting and to what.
//!
//! A word carries two independent gender slots, one for its base form and one
//! for an attached pronominal enclitic. Each slot is either invariant (`B`) or
//! marked for a grammatical person (1st or 2nd) and gender (M or F), giving
//! five slot values and 25 word labels. A sentence-level target fixes the
//! desired gender for both persons.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Grammatical gender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gender {
    Masculine,
    Feminine,
}

impl Gender {
    pub fn letter(self) -> char {
        match self {
            Gender::Masculine => 'M',
            Gender::Feminine => 'F',
        }
    }
}

/// Grammatical person of a user reference (speaker or listener).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Person {
    First,
    Second,
}

impl Person {
    pub fn digit(self) -> char {
        match self {
            Person::First => '1',
            Person::Second => '2',
        }
    }
}

/// One gender slot: invariant/ambiguous (`B`) or marked for person and gender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GenderSlot {
    Invariant,
    Marked(Person, Gender),
}

pub const SLOT_1M: GenderSlot = GenderSlot::Marked(Person::First, Gender::Masculine);
pub const SLOT_1F: GenderSlot = GenderSlot::Marked(Person::First, Gender::Feminine);
pub const SLOT_2M: GenderSlot = GenderSlot::Marked(Person::Second, Gender::Masculine);
pub const SLOT_2F: GenderSlot = GenderSlot::Marked(Person::Second, Gender::Feminine);

impl GenderSlot {
    /// All five slot values in inventory order (`B` first).
    pub const ALL: [GenderSlot; 5] = [GenderSlot::Invariant, SLOT_1M, SLOT_1F, SLOT_2M, SLOT_2F];

    pub fn person(self) -> Option<Person> {
        match self {
            GenderSlot::Invariant => None,
            GenderSlot::Marked(p, _) => Some(p),
        }
    }

    pub fn gender(self) -> Option<Gender> {
        match self {
            GenderSlot::Invariant => None,
            GenderSlot::Marked(_, g) => Some(g),
        }
    }

    pub fn is_marked(self) -> bool {
        !matches!(self, GenderSlot::Invariant)
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|s| *s == self).unwrap()
    }
}

impl fmt::Display for GenderSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenderSlot::Invariant => f.write_str("B"),
            GenderSlot::Marked(p, g) => write!(f, "{}{}", p.digit(), g.letter()),
        }
    }
}

impl FromStr for GenderSlot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "B" => Ok(GenderSlot::Invariant),
            "1M" => Ok(SLOT_1M),
            "1F" => Ok(SLOT_1F),
            "2M" => Ok(SLOT_2M),
            "2F" => Ok(SLOT_2F),
            _ => Err(Error::MalformedLabel {
                text: s.to_string(),
                reason: "unknown gender slot".to_string(),
            }),
        }
    }
}

/// Word-level gender label: base form slot plus pronominal enclitic slot.
///
/// Serialized as `<base>+<enclitic>`, e.g. `1F+2M`. There are exactly 25
/// distinct labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WordLabel {
    pub base: GenderSlot,
    pub enclitic: GenderSlot,
}

impl WordLabel {
    pub const COUNT: usize = 25;

    pub const fn new(base: GenderSlot, enclitic: GenderSlot) -> Self {
        WordLabel { base, enclitic }
    }

    /// The fully invariant label `B+B`.
    pub const B_B: WordLabel = WordLabel::new(GenderSlot::Invariant, GenderSlot::Invariant);

    /// All 25 labels in inventory order, base-major, `B+B` first.
    pub fn all() -> impl Iterator<Item = WordLabel> {
        GenderSlot::ALL
            .into_iter()
            .flat_map(|b| GenderSlot::ALL.into_iter().map(move |e| WordLabel::new(b, e)))
    }

    /// Position of this label in the fixed inventory order.
    pub fn index(self) -> usize {
        self.base.index() * GenderSlot::ALL.len() + self.enclitic.index()
    }

    pub fn from_index(idx: usize) -> WordLabel {
        let n = GenderSlot::ALL.len();
        WordLabel::new(GenderSlot::ALL[idx / n], GenderSlot::ALL[idx % n])
    }

    pub fn is_gendered(self) -> bool {
        self.base.is_marked() || self.enclitic.is_marked()
    }

    /// Collapses the label pair back to a single coarse slot: the base slot if
    /// marked, otherwise the enclitic slot.
    pub fn coarse(self) -> GenderSlot {
        if self.base.is_marked() {
            self.base
        } else {
            self.enclitic
        }
    }
}

impl fmt::Display for WordLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.base, self.enclitic)
    }
}

impl FromStr for WordLabel {
    type Err = Error;

    /// Parses `<base>+<enclitic>` or a bare coarse slot, which promotes to
    /// `(slot, B)`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('+') {
            Some((base, enclitic)) => {
                Ok(WordLabel::new(base.parse()?, enclitic.parse()?))
            }
            None => Ok(WordLabel::new(s.parse()?, GenderSlot::Invariant)),
        }
    }
}

/// Serializes label-like types as their display strings so they can key JSON
/// maps.
macro_rules! serde_as_display_fromstr {
    ($ty:ty) => {
        impl serde::Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> serde::Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

serde_as_display_fromstr!(GenderSlot);
serde_as_display_fromstr!(WordLabel);
serde_as_display_fromstr!(SentenceTarget);

/// Desired sentence-level gender context: the speaker's and listener's gender.
///
/// Exactly four values exist, written `1M/2M`, `1F/2M`, `1M/2F`, `1F/2F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SentenceTarget {
    pub first: Gender,
    pub second: Gender,
}

impl SentenceTarget {
    pub const ALL: [SentenceTarget; 4] = [
        SentenceTarget { first: Gender::Masculine, second: Gender::Masculine },
        SentenceTarget { first: Gender::Feminine, second: Gender::Masculine },
        SentenceTarget { first: Gender::Masculine, second: Gender::Feminine },
        SentenceTarget { first: Gender::Feminine, second: Gender::Feminine },
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|t| *t == self).unwrap()
    }

    /// Filename-safe form, e.g. `1M2M`.
    pub fn file_tag(self) -> String {
        format!("1{}2{}", self.first.letter(), self.second.letter())
    }
}

impl fmt::Display for SentenceTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "1{}/2{}", self.first.letter(), self.second.letter())
    }
}

impl FromStr for SentenceTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::MalformedLabel {
            text: s.to_string(),
            reason: "expected a sentence target like 1M/2M".to_string(),
        };
        let (first, second) = s.split_once('/').ok_or_else(err)?;
        match (first.parse::<GenderSlot>(), second.parse::<GenderSlot>()) {
            (Ok(GenderSlot::Marked(Person::First, f)), Ok(GenderSlot::Marked(Person::Second, s))) => {
                Ok(SentenceTarget { first: f, second: s })
            }
            _ => Err(err()),
        }
    }
}

/// The word label a word must carry to be compatible with `target`.
///
/// Each slot maps independently: `B` stays `B`; a marked slot keeps its person
/// and takes the target gender for that person.
pub fn required_word_target(label: WordLabel, target: SentenceTarget) -> WordLabel {
    let map_slot = |slot: GenderSlot| match slot {
        GenderSlot::Invariant => GenderSlot::Invariant,
        GenderSlot::Marked(Person::First, _) => GenderSlot::Marked(Person::First, target.first),
        GenderSlot::Marked(Person::Second, _) => GenderSlot::Marked(Person::Second, target.second),
    };
    WordLabel::new(map_slot(label.base), map_slot(label.enclitic))
}

/// Whether a word labeled `label` must be rewritten to fit `target`.
pub fn needs_rewrite(label: WordLabel, target: SentenceTarget) -> bool {
    required_word_target(label, target) != label
}

/// One enclitic-table entry: a suffix form, its gender class, and the
/// alternative forms used when the enclitic slot must change gender.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EncliticEntry {
    pub suffix: String,
    /// `B` marks gender-invariant or orthographically ambiguous enclitics.
    pub class: GenderSlot,
    pub alternatives: BTreeMap<GenderSlot, String>,
}

/// Table of pronominal enclitic suffixes, matched longest-first.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EncliticTable {
    entries: Vec<EncliticEntry>,
}

const DEFAULT_ENCLITICS: &str = include_str!("data/enclitics.tsv");

impl EncliticTable {
    pub fn new(mut entries: Vec<EncliticEntry>) -> Result<Self> {
        for e in &entries {
            if e.suffix.is_empty() {
                return Err(Error::TableFormat("empty enclitic suffix".to_string()));
            }
        }
        // Longest-first match order; ties resolved lexicographically so the
        // table order is canonical.
        entries.sort_by(|a, b| {
            b.suffix
                .chars()
                .count()
                .cmp(&a.suffix.chars().count())
                .then_with(|| a.suffix.cmp(&b.suffix))
        });
        for pair in entries.windows(2) {
            if pair[0].suffix == pair[1].suffix {
                return Err(Error::TableFormat(format!(
                    "duplicate enclitic suffix `{}`",
                    pair[0].suffix
                )));
            }
        }
        Ok(EncliticTable { entries })
    }

    /// The built-in table: first-person forms (gender-invariant) plus
    /// second-person singular, dual and plural forms.
    pub fn default_table() -> EncliticTable {
        EncliticTable::from_tsv_str(DEFAULT_ENCLITICS)
            .expect("built-in enclitic table is well formed")
    }

    pub fn entries(&self) -> &[EncliticEntry] {
        &self.entries
    }

    /// Parses the TSV table format:
    /// `suffix<TAB>slot-class<TAB>alt:1M=...,1F=...,2M=...,2F=...`
    /// with `#` comment lines; the alternatives column may be empty or absent.
    pub fn from_tsv_str(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches(['\r', '\n']);
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            entries.push(parse_enclitic_line(line).map_err(|e| {
                Error::TableFormat(format!("line {}: {e}", lineno + 1))
            })?);
        }
        EncliticTable::new(entries)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv_str(&text)
    }
}

pub(crate) fn parse_enclitic_line(line: &str) -> Result<EncliticEntry> {
    let mut cols = line.split('\t');
    let suffix = cols.next().unwrap_or_default();
    let class = cols
        .next()
        .ok_or_else(|| Error::TableFormat("missing slot class column".to_string()))?;
    let alt_col = cols.next().unwrap_or_default();
    if cols.next().is_some() {
        return Err(Error::TableFormat("too many columns".to_string()));
    }
    if suffix.is_empty() {
        return Err(Error::TableFormat("empty suffix".to_string()));
    }
    let class: GenderSlot = class.parse()?;
    let mut alternatives = BTreeMap::new();
    if !alt_col.is_empty() {
        let body = alt_col
            .strip_prefix("alt:")
            .ok_or_else(|| Error::TableFormat("alternatives column must start with `alt:`".to_string()))?;
        for pair in body.split(',') {
            if pair.is_empty() {
                continue;
            }
            let (slot, form) = pair
                .split_once('=')
                .ok_or_else(|| Error::TableFormat(format!("bad alternative `{pair}`")))?;
            let slot: GenderSlot = slot.parse()?;
            if !slot.is_marked() {
                return Err(Error::TableFormat("alternative slot must be gendered".to_string()));
            }
            if !form.is_empty() {
                alternatives.insert(slot, form.to_string());
            }
        }
    }
    Ok(EncliticEntry { suffix: suffix.to_string(), class, alternatives })
}

/// Splits a word into `(stem, matched enclitic entry)` using the longest
/// matching table suffix. Whole-word matches are rejected: a word is never a
/// bare enclitic, so the stem is always non-empty.
pub fn segment_enclitic<'w, 't>(
    word: &'w str,
    table: &'t EncliticTable,
) -> (&'w str, Option<&'t EncliticEntry>) {
    for entry in &table.entries {
        if word.len() > entry.suffix.len() && word.ends_with(entry.suffix.as_str()) {
            return (&word[..word.len() - entry.suffix.len()], Some(entry));
        }
    }
    (word, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_extended_label() {
        let l: WordLabel = "1F+2M".parse().unwrap();
        assert_eq!(l, WordLabel::new(SLOT_1F, SLOT_2M));
    }

    #[test]
    fn parse_bare_coarse_label_promotes() {
        let l: WordLabel = "B".parse().unwrap();
        assert_eq!(l, WordLabel::B_B);
        let l: WordLabel = "2F".parse().unwrap();
        assert_eq!(l, WordLabel::new(SLOT_2F, GenderSlot::Invariant));
    }

    #[test]
    fn parse_rejects_unknown_slots_and_arity() {
        assert!("3M+B".parse::<WordLabel>().is_err());
        assert!("1F+2M+B".parse::<WordLabel>().is_err());
        assert!("".parse::<WordLabel>().is_err());
        assert!("1f+B".parse::<WordLabel>().is_err());
    }

    #[test]
    fn exactly_25_labels_and_roundtrip() {
        let all: Vec<WordLabel> = WordLabel::all().collect();
        assert_eq!(all.len(), WordLabel::COUNT);
        for (i, l) in all.iter().enumerate() {
            assert_eq!(l.index(), i);
            assert_eq!(WordLabel::from_index(i), *l);
            let reparsed: WordLabel = l.to_string().parse().unwrap();
            assert_eq!(reparsed, *l);
        }
        assert_eq!(all[0], WordLabel::B_B);
    }

    #[test]
    fn slot_person_gender_none_iff_invariant() {
        for slot in GenderSlot::ALL {
            assert_eq!(slot.person().is_none(), slot == GenderSlot::Invariant);
            assert_eq!(slot.gender().is_none(), slot == GenderSlot::Invariant);
        }
    }

    #[test]
    fn four_sentence_targets_roundtrip() {
        assert_eq!(SentenceTarget::ALL.len(), 4);
        for t in SentenceTarget::ALL {
            let reparsed: SentenceTarget = t.to_string().parse().unwrap();
            assert_eq!(reparsed, t);
        }
        assert!("1M/3F".parse::<SentenceTarget>().is_err());
        assert!("2M/1M".parse::<SentenceTarget>().is_err());
    }

    fn target(s: &str) -> SentenceTarget {
        s.parse().unwrap()
    }

    fn label(s: &str) -> WordLabel {
        s.parse().unwrap()
    }

    #[test]
    fn required_target_maps_slots_independently() {
        assert_eq!(required_word_target(label("1F+B"), target("1M/2M")), label("1M+B"));
        assert_eq!(required_word_target(label("B+2F"), target("1M/2F")), label("B+2F"));
        assert_eq!(required_word_target(label("1M+2M"), target("1F/2F")), label("1F+2F"));
    }

    #[test]
    fn needs_rewrite_examples() {
        for t in SentenceTarget::ALL {
            assert!(!needs_rewrite(WordLabel::B_B, t));
        }
        assert!(needs_rewrite(label("1F+B"), target("1M/2M")));
        assert!(!needs_rewrite(label("2M+B"), target("1F/2M")));
    }

    #[test]
    fn required_target_is_idempotent_and_compatible() {
        for l in WordLabel::all() {
            for t in SentenceTarget::ALL {
                let once = required_word_target(l, t);
                assert_eq!(required_word_target(once, t), once);
                assert!(!needs_rewrite(once, t));
            }
        }
    }

    #[test]
    fn default_table_segments_second_person_plural() {
        let table = EncliticTable::default_table();
        // A verb carrying the 2M-plural enclitic.
        let (stem, entry) = segment_enclitic("أحبكم", &table);
        assert_eq!(stem, "أحب");
        let entry = entry.expect("suffix match");
        assert_eq!(entry.suffix, "كم");
        assert_eq!(entry.class, SLOT_2M);
        assert_eq!(entry.alternatives.get(&SLOT_2F).map(String::as_str), Some("كن"));
    }

    #[test]
    fn no_table_suffix_returns_word_unchanged() {
        let table = EncliticTable::default_table();
        let (stem, entry) = segment_enclitic("hello", &table);
        assert_eq!(stem, "hello");
        assert!(entry.is_none());
    }

    #[test]
    fn whole_word_enclitic_matches_are_rejected() {
        let table = EncliticTable::default_table();
        for entry in table.entries() {
            // Each enclitic form fed in as a standalone word: a shorter
            // entry may match inside it, but never the whole word, so the
            // stem stays non-empty.
            let (stem, m) = segment_enclitic(&entry.suffix, &table);
            assert!(!stem.is_empty());
            match m {
                None => assert_eq!(stem, entry.suffix),
                Some(m) => {
                    assert!(m.suffix.len() < entry.suffix.len());
                    assert_eq!(format!("{stem}{}", m.suffix), entry.suffix);
                }
            }
        }
    }

    #[test]
    fn longest_suffix_wins() {
        let table = EncliticTable::default_table();
        // ..ني matches the 2-char first-person form, not the bare ي.
        let (stem, entry) = segment_enclitic("ساعدني", &table);
        assert_eq!(entry.unwrap().suffix, "ني");
        assert_eq!(stem, "ساعد");
    }

    #[test]
    fn duplicate_suffix_rejected() {
        let text = "كم\t2M\t\nكم\t2F\t";
        assert!(EncliticTable::from_tsv_str(text).is_err());
    }

    #[test]
    fn table_parses_comments_and_empty_alts() {
        let text = "# comment\nكم\t2M\talt:2M=كم,2F=كن\nي\tB\n";
        let t = EncliticTable::from_tsv_str(text).unwrap();
        assert_eq!(t.entries().len(), 2);
    }

    proptest! {
        #[test]
        fn segmentation_reconstructs_word(word in "\\p{Arabic}{1,8}") {
            let table = EncliticTable::default_table();
            let (stem, entry) = segment_enclitic(&word, &table);
            let suffix = entry.map(|e| e.suffix.as_str()).unwrap_or("");
            prop_assert_eq!(format!("{stem}{suffix}"), word);
        }

        #[test]
        fn rewrite_target_compatibility(base in 0usize..5, encl in 0usize..5, t in 0usize..4) {
            let l = WordLabel::new(GenderSlot::ALL[base], GenderSlot::ALL[encl]);
            let target = SentenceTarget::ALL[t];
            prop_assert!(!needs_rewrite(required_word_target(l, target), target));
        }
    }
}
