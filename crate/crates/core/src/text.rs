//! Tokenization, capped vocabularies, document encoding and sparse region
//! vectors.

use std::collections::HashMap;
use std::fmt;

use crate::error::{contract, Error, Result};
use crate::par::{self, Execution};

/// Splits raw text into lowercase tokens.
///
/// The two-character sequence `\n` (backslash, `n`) counts as whitespace.
/// Tokens are maximal runs of alphanumeric characters; any other
/// non-whitespace character becomes a token of its own.
pub fn tokenize(raw: &str) -> Vec<String> {
    let text = raw.replace("\\n", " ").to_lowercase();
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            word.push(c);
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            tokens.push(c.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VocabKind {
    Word,
    /// Contiguous 1-, 2- and 3-grams, keyed by their tokens joined with a space.
    Ngram123,
}

impl VocabKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VocabKind::Word => "word",
            VocabKind::Ngram123 => "ngram123",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "word" => Some(VocabKind::Word),
            "ngram123" => Some(VocabKind::Ngram123),
            _ => None,
        }
    }
}

impl fmt::Display for VocabKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Frequency-ranked map from items to dense ids.
///
/// Ids follow (frequency descending, item ascending), so id 0 is the most
/// frequent item.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    kind: VocabKind,
    entries: Vec<(String, u64)>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from already-ranked entries, checking the ranking.
    pub fn from_entries(kind: VocabKind, entries: Vec<(String, u64)>) -> Result<Self> {
        for (i, w) in entries.windows(2).enumerate() {
            let ((a, fa), (b, fb)) = (&w[0], &w[1]);
            if fa < fb || (fa == fb && a >= b) {
                return Err(Error::Data(format!(
                    "vocabulary entries {i} and {} are out of rank order",
                    i + 1
                )));
            }
        }
        if entries.len() > u32::MAX as usize {
            return Err(Error::Data("vocabulary too large".into()));
        }
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (tok, _))| (tok.clone(), i as u32))
            .collect();
        Ok(Vocabulary {
            kind,
            entries,
            index,
        })
    }

    pub fn kind(&self) -> VocabKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, item: &str) -> Option<u32> {
        self.index.get(item).copied()
    }

    pub fn item(&self, id: u32) -> Option<&str> {
        self.entries.get(id as usize).map(|(t, _)| t.as_str())
    }

    pub fn frequency(&self, id: u32) -> Option<u64> {
        self.entries.get(id as usize).map(|(_, f)| *f)
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }
}

fn ngram_key(tokens: &[String]) -> String {
    tokens.join(" ")
}

fn count_items(docs: &[Vec<String>], kind: VocabKind) -> HashMap<String, u64> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for doc in docs {
        match kind {
            VocabKind::Word => {
                for t in doc {
                    *counts.entry(t.clone()).or_default() += 1;
                }
            }
            VocabKind::Ngram123 => {
                for n in 1..=3 {
                    for gram in doc.windows(n) {
                        *counts.entry(ngram_key(gram)).or_default() += 1;
                    }
                }
            }
        }
    }
    counts
}

/// Keeps the `cap` most frequent items of `corpus`.
///
/// Ties in frequency are broken by ascending item string, which makes the
/// result independent of corpus chunking and hash ordering.
pub fn build_vocab(corpus: &[Vec<String>], kind: VocabKind, cap: usize) -> Result<Vocabulary> {
    build_vocab_with(Execution::default(), corpus, kind, cap)
}

pub fn build_vocab_with(
    exec: Execution,
    corpus: &[Vec<String>],
    kind: VocabKind,
    cap: usize,
) -> Result<Vocabulary> {
    if cap == 0 {
        return Err(contract("vocabulary cap must be at least 1"));
    }
    let partials = par::map_chunks(exec, corpus, 512, |docs| count_items(docs, kind));
    let mut counts: HashMap<String, u64> = HashMap::new();
    for partial in partials {
        for (item, n) in partial {
            *counts.entry(item).or_default() += n;
        }
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
    ranked.sort_unstable_by(|(a, fa), (b, fb)| fb.cmp(fa).then_with(|| a.cmp(b)));
    ranked.truncate(cap);
    Vocabulary::from_entries(kind, ranked)
}

#[derive(Debug, Clone, PartialEq)]
enum TokenIds {
    Words(Vec<Option<u32>>),
    /// Per position, ids of the 1-, 2- and 3-gram starting there.
    Ngrams(Vec<[Option<u32>; 3]>),
}

/// A labelled document mapped onto one vocabulary; `None` marks OOV.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDocument {
    pub label: usize,
    vocab_size: usize,
    ids: TokenIds,
}

impl EncodedDocument {
    /// Builds a word-kind encoding directly from ids.
    pub fn from_word_ids(label: usize, vocab_size: usize, ids: Vec<Option<u32>>) -> Result<Self> {
        if let Some(bad) = ids.iter().flatten().find(|&&id| id as usize >= vocab_size) {
            return Err(contract(format!("token id {bad} >= vocabulary size {vocab_size}")));
        }
        Ok(EncodedDocument {
            label,
            vocab_size,
            ids: TokenIds::Words(ids),
        })
    }

    pub fn len(&self) -> usize {
        match &self.ids {
            TokenIds::Words(v) => v.len(),
            TokenIds::Ngrams(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> VocabKind {
        match self.ids {
            TokenIds::Words(_) => VocabKind::Word,
            TokenIds::Ngrams(_) => VocabKind::Ngram123,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Id of the single token at `pos`; positions past the end read as OOV.
    pub fn token(&self, pos: usize) -> Option<u32> {
        match &self.ids {
            TokenIds::Words(v) => v.get(pos).copied().flatten(),
            TokenIds::Ngrams(v) => v.get(pos).and_then(|s| s[0]),
        }
    }

    /// Id of the `n`-gram (1 ≤ n ≤ 3) starting at `pos`, for n-gram encodings.
    pub fn ngram(&self, pos: usize, n: usize) -> Option<u32> {
        match &self.ids {
            TokenIds::Words(v) if n == 1 => v.get(pos).copied().flatten(),
            TokenIds::Words(_) => None,
            TokenIds::Ngrams(v) => v.get(pos).and_then(|s| s[n - 1]),
        }
    }

    pub fn token_ids(&self) -> Vec<Option<u32>> {
        (0..self.len()).map(|i| self.token(i)).collect()
    }
}

/// Maps tokens onto `vocab`. Length is preserved; unknown items become OOV.
pub fn encode(tokens: &[String], vocab: &Vocabulary, label: usize) -> EncodedDocument {
    let ids = match vocab.kind {
        VocabKind::Word => TokenIds::Words(tokens.iter().map(|t| vocab.id(t)).collect()),
        VocabKind::Ngram123 => TokenIds::Ngrams(
            (0..tokens.len())
                .map(|i| {
                    let mut slot = [None; 3];
                    for n in 1..=3 {
                        if i + n <= tokens.len() {
                            slot[n - 1] = vocab.id(&ngram_key(&tokens[i..i + n]));
                        }
                    }
                    slot
                })
                .collect(),
        ),
    };
    EncodedDocument {
        label,
        vocab_size: vocab.len(),
        ids,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Representation {
    /// One one-hot block of size V per region slot; position-sensitive.
    ConcatOneHot,
    /// Word counts over the region.
    BowWord,
    /// Counts of the {1,2,3}-grams lying fully inside the region.
    BowNgram123,
}

impl Representation {
    pub fn as_str(self) -> &'static str {
        match self {
            Representation::ConcatOneHot => "concat",
            Representation::BowWord => "bow-word",
            Representation::BowNgram123 => "bow-ngram123",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "concat" | "concat-one-hot" => Some(Representation::ConcatOneHot),
            "bow" | "bow-word" => Some(Representation::BowWord),
            "ngram" | "bow-ngram123" => Some(Representation::BowNgram123),
            _ => None,
        }
    }

    /// Vocabulary kind this representation reads from.
    pub fn vocab_kind(self) -> VocabKind {
        match self {
            Representation::BowNgram123 => VocabKind::Ngram123,
            _ => VocabKind::Word,
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionSpec {
    pub representation: Representation,
    pub region_size: usize,
    pub vocab_size: usize,
}

impl RegionSpec {
    pub fn new(representation: Representation, region_size: usize, vocab_size: usize) -> Result<Self> {
        if region_size == 0 || vocab_size == 0 {
            return Err(contract("region size and vocabulary size must be positive"));
        }
        Ok(RegionSpec {
            representation,
            region_size,
            vocab_size,
        })
    }

    pub fn input_dim(&self) -> usize {
        match self.representation {
            Representation::ConcatOneHot => self.region_size * self.vocab_size,
            _ => self.vocab_size,
        }
    }

    /// Number of stride-1 regions in a document of `len` tokens, after
    /// right-padding short documents to the region size.
    pub fn region_count(&self, len: usize) -> usize {
        len.max(self.region_size) - self.region_size + 1
    }

    pub(crate) fn check_doc(&self, doc: &EncodedDocument) -> Result<()> {
        if doc.vocab_size != self.vocab_size {
            return Err(contract(format!(
                "document encoded against {} items, region spec expects {}",
                doc.vocab_size, self.vocab_size
            )));
        }
        if self.representation == Representation::BowNgram123 && doc.kind() != VocabKind::Ngram123 {
            return Err(contract("bow-ngram123 regions need an n-gram encoded document"));
        }
        Ok(())
    }
}

/// Nonzero entries of one region's input vector, indices strictly increasing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRegionVector {
    dim: usize,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseRegionVector {
    /// Sorts `pairs` by index and sums duplicates.
    pub fn from_pairs(dim: usize, mut pairs: Vec<(u32, f64)>) -> Result<Self> {
        pairs.sort_unstable_by_key(|&(i, _)| i);
        let mut indices: Vec<u32> = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if i as usize >= dim {
                return Err(contract(format!("sparse index {i} out of dimension {dim}")));
            }
            if indices.last() == Some(&i) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        Ok(SparseRegionVector {
            dim,
            indices,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i as usize] = v;
        }
        out
    }
}

/// Region vector at `pos`, which must be a valid region start for `doc`.
pub fn region_vector(doc: &EncodedDocument, pos: usize, spec: &RegionSpec) -> Result<SparseRegionVector> {
    let last = doc.len().saturating_sub(spec.region_size);
    if pos > last {
        return Err(contract(format!(
            "region position {pos} out of range 0..={last} (length {}, region size {})",
            doc.len(),
            spec.region_size
        )));
    }
    spec.check_doc(doc)?;
    Ok(region_vector_padded(doc, pos, spec))
}

/// Like [`region_vector`] but any start is accepted; tokens past the end of
/// the document are padding and contribute nothing. Assumes `check_doc`.
pub(crate) fn region_vector_padded(doc: &EncodedDocument, pos: usize, spec: &RegionSpec) -> SparseRegionVector {
    let p = spec.region_size;
    let v = spec.vocab_size;
    let mut pairs = Vec::with_capacity(p);
    match spec.representation {
        Representation::ConcatOneHot => {
            for slot in 0..p {
                if let Some(t) = doc.token(pos + slot) {
                    pairs.push(((slot * v) as u32 + t, 1.0));
                }
            }
        }
        Representation::BowWord => {
            for i in pos..pos + p {
                if let Some(t) = doc.token(i) {
                    pairs.push((t, 1.0));
                }
            }
        }
        Representation::BowNgram123 => {
            for i in pos..pos + p {
                for n in 1..=3.min(pos + p - i) {
                    if let Some(t) = doc.ngram(i, n) {
                        pairs.push((t, 1.0));
                    }
                }
            }
        }
    }
    // Indices are built in range, so this cannot fail.
    SparseRegionVector::from_pairs(spec.input_dim(), pairs).expect("region index in range")
}

/// All region vectors of `doc` in position order.
pub fn region_vectors(doc: &EncodedDocument, spec: &RegionSpec) -> Result<Vec<SparseRegionVector>> {
    spec.check_doc(doc)?;
    Ok((0..spec.region_count(doc.len()))
        .map(|pos| region_vector_padded(doc, pos, spec))
        .collect())
}
