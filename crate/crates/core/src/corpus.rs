//! Bag-of-words corpora, vocabularies and their on-disk formats.
//!
//! Two formats are supported:
//!
//! * `line-tokens`: UTF-8 text, one document per line, whitespace separated
//!   tokens. Document ids are the zero-based line positions. The vocabulary
//!   is built in first-appearance order unless a `<stem>.vocab` sidecar is
//!   present, in which case it fixes term ids and every token must be in it.
//! * `sparse-triplets`: CSV `doc_id,term_id,count` with a vocabulary sidecar
//!   (`<stem>.vocab`, one term per line, line number = term id).
//!
//! Binary outcome labels, when present, live in a `<stem>.labels.csv`
//! sidecar with columns `doc_id,label` for either format.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms<I, S>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary::new();
        for term in terms {
            let term = term.into();
            if vocab.index.contains_key(&term) {
                return Err(Error::invalid(format!("duplicate term {term:?}")));
            }
            vocab.insert(&term);
        }
        Ok(vocab)
    }

    /// Returns the id of `term`, adding it if unseen.
    pub fn insert(&mut self, term: &str) -> usize {
        if let Some(&id) = self.index.get(term) {
            return id;
        }
        let id = self.terms.len();
        self.terms.push(term.to_owned());
        self.index.insert(term.to_owned(), id);
        id
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: usize) -> &str {
        &self.terms[id]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Sparse term counts for one document, sorted by term id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Document {
    counts: Vec<(usize, u32)>,
}

impl Document {
    /// Builds a document from `(term, count)` pairs. Repeated terms are
    /// summed and zero counts dropped.
    pub fn from_counts<I: IntoIterator<Item = (usize, u32)>>(pairs: I) -> Self {
        let mut counts: Vec<(usize, u32)> = pairs.into_iter().filter(|&(_, c)| c > 0).collect();
        counts.sort_unstable_by_key(|&(t, _)| t);
        counts.dedup_by(|next, kept| {
            if next.0 == kept.0 {
                kept.1 += next.1;
                true
            } else {
                false
            }
        });
        Document { counts }
    }

    pub fn from_tokens<I: IntoIterator<Item = usize>>(tokens: I) -> Self {
        Self::from_counts(tokens.into_iter().map(|t| (t, 1)))
    }

    pub fn counts(&self) -> &[(usize, u32)] {
        &self.counts
    }

    pub fn count(&self, term: usize) -> u32 {
        self.counts
            .binary_search_by_key(&term, |&(t, _)| t)
            .map(|i| self.counts[i].1)
            .unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.iter().map(|&(_, c)| c as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    vocabulary: Vocabulary,
    documents: Vec<Document>,
    doc_ids: Vec<String>,
    labels: Option<Vec<u8>>,
}

impl Corpus {
    pub fn new(
        vocabulary: Vocabulary,
        documents: Vec<Document>,
        doc_ids: Vec<String>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::NoDocuments);
        }
        if doc_ids.len() != documents.len() {
            return Err(Error::invalid(format!(
                "{} doc ids for {} documents",
                doc_ids.len(),
                documents.len()
            )));
        }
        let v = vocabulary.len();
        for (doc, id) in documents.iter().zip(&doc_ids) {
            if doc.is_empty() {
                return Err(Error::EmptyDocument(id.clone()));
            }
            if let Some(&(term, _)) = doc.counts.last() {
                if term >= v {
                    return Err(Error::UnknownTerm { term, vocab: v });
                }
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != documents.len() {
                return Err(Error::invalid(format!(
                    "{} labels for {} documents",
                    labels.len(),
                    documents.len()
                )));
            }
            if labels.iter().any(|&l| l > 1) {
                return Err(Error::invalid("labels must be 0 or 1"));
            }
        }
        Ok(Corpus {
            vocabulary,
            documents,
            doc_ids,
            labels,
        })
    }

    /// Corpus with ids `"0".."D-1"`.
    pub fn with_default_ids(vocabulary: Vocabulary, documents: Vec<Document>) -> Result<Self> {
        let ids = (0..documents.len()).map(|i| i.to_string()).collect();
        Self::new(vocabulary, documents, ids, None)
    }

    pub fn with_labels(self, labels: Vec<u8>) -> Result<Self> {
        Corpus::new(self.vocabulary, self.documents, self.doc_ids, Some(labels))
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn num_docs(&self) -> usize {
        self.documents.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn total_tokens(&self) -> usize {
        self.documents.iter().map(Document::len).sum()
    }

    /// Corpus-wide count per term id.
    pub fn term_frequencies(&self) -> Vec<u64> {
        let mut freq = vec![0u64; self.vocab_size()];
        for doc in &self.documents {
            for &(t, c) in doc.counts() {
                freq[t] += u64::from(c);
            }
        }
        freq
    }

    /// Hex SHA-256 over a canonical encoding of terms, ids, counts and labels.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for term in self.vocabulary.terms() {
            h.update((term.len() as u64).to_le_bytes());
            h.update(term.as_bytes());
        }
        for (doc, id) in self.documents.iter().zip(&self.doc_ids) {
            h.update((id.len() as u64).to_le_bytes());
            h.update(id.as_bytes());
            h.update((doc.counts.len() as u64).to_le_bytes());
            for &(t, c) in doc.counts() {
                h.update((t as u64).to_le_bytes());
                h.update(c.to_le_bytes());
            }
        }
        if let Some(labels) = &self.labels {
            h.update(labels);
        }
        hex(&h.finalize())
    }

    /// Deletes `n` vocabulary terms chosen uniformly without replacement.
    ///
    /// Surviving terms keep their relative order and are renumbered densely.
    /// Documents left empty are dropped and listed in the result.
    pub fn remove_words(&self, n: usize, seed: u64) -> Result<WordRemoval> {
        let v = self.vocab_size();
        if n >= v {
            return Err(Error::invalid(format!(
                "cannot remove {n} words from a vocabulary of {v}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut removed_ids = rand::seq::index::sample(&mut rng, v, n).into_vec();
        removed_ids.sort_unstable();

        let mut remap = vec![usize::MAX; v];
        let mut vocabulary = Vocabulary::new();
        let mut next = 0;
        for (old, slot) in remap.iter_mut().enumerate() {
            if removed_ids.binary_search(&old).is_err() {
                *slot = next;
                vocabulary.insert(self.vocabulary.term(old));
                next += 1;
            }
        }

        let mut documents = Vec::with_capacity(self.num_docs());
        let mut doc_ids = Vec::with_capacity(self.num_docs());
        let mut labels = self.labels.as_ref().map(|_| Vec::new());
        let mut dropped_docs = Vec::new();
        for (i, doc) in self.documents.iter().enumerate() {
            let counts: Vec<(usize, u32)> = doc
                .counts()
                .iter()
                .filter(|&&(t, _)| remap[t] != usize::MAX)
                .map(|&(t, c)| (remap[t], c))
                .collect();
            if counts.is_empty() {
                dropped_docs.push(self.doc_ids[i].clone());
                continue;
            }
            documents.push(Document { counts });
            doc_ids.push(self.doc_ids[i].clone());
            if let (Some(out), Some(src)) = (labels.as_mut(), self.labels.as_ref()) {
                out.push(src[i]);
            }
        }
        if !dropped_docs.is_empty() {
            log::warn!(
                "word removal emptied {} document(s); they were dropped",
                dropped_docs.len()
            );
        }
        let removed_terms = removed_ids
            .iter()
            .map(|&t| self.vocabulary.term(t).to_owned())
            .collect();
        Ok(WordRemoval {
            corpus: Corpus::new(vocabulary, documents, doc_ids, labels)?,
            removed_terms,
            dropped_docs,
        })
    }
}

/// Output of [`Corpus::remove_words`].
#[derive(Debug, Clone)]
pub struct WordRemoval {
    pub corpus: Corpus,
    pub removed_terms: Vec<String>,
    pub dropped_docs: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    LineTokens,
    SparseTriplets,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line-tokens" => Ok(CorpusFormat::LineTokens),
            "sparse-triplets" => Ok(CorpusFormat::SparseTriplets),
            other => Err(Error::invalid(format!("unknown corpus format {other:?}"))),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusFormat::LineTokens => "line-tokens",
            CorpusFormat::SparseTriplets => "sparse-triplets",
        })
    }
}

pub fn vocab_path(path: &Path) -> PathBuf {
    path.with_extension("vocab")
}

pub fn labels_path(path: &Path) -> PathBuf {
    path.with_extension("labels.csv")
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let corpus = match format {
        CorpusFormat::LineTokens => read_line_tokens(path)?,
        CorpusFormat::SparseTriplets => read_triplets(path)?,
    };
    let labels = labels_path(path);
    if labels.exists() {
        let labels = read_labels(&labels, corpus.doc_ids())?;
        corpus.with_labels(labels)
    } else {
        Ok(corpus)
    }
}

pub fn save_corpus(corpus: &Corpus, path: &Path, format: CorpusFormat) -> Result<()> {
    match format {
        CorpusFormat::LineTokens => write_line_tokens(corpus, path)?,
        CorpusFormat::SparseTriplets => write_triplets(corpus, path)?,
    }
    if let Some(labels) = corpus.labels() {
        let path = labels_path(path);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["doc_id", "label"])?;
        for (id, l) in corpus.doc_ids().iter().zip(labels) {
            w.write_record([id.as_str(), &l.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn read_line_tokens(path: &Path) -> Result<Corpus> {
    let vpath = vocab_path(path);
    let fixed = vpath.exists();
    let mut vocabulary = if fixed { read_vocab(&vpath)? } else { Vocabulary::new() };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut documents = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let mut ids = Vec::new();
        for tok in line.split_whitespace() {
            ids.push(match vocabulary.id(tok) {
                Some(id) => id,
                None if fixed => {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("term {tok:?} is not in {}", vpath.display()),
                    })
                }
                None => vocabulary.insert(tok),
            });
        }
        let doc = Document::from_tokens(ids);
        if doc.is_empty() {
            return Err(Error::EmptyDocument(i.to_string()));
        }
        documents.push(doc);
    }
    Corpus::with_default_ids(vocabulary, documents)
}

fn write_line_tokens(corpus: &Corpus, path: &Path) -> Result<()> {
    let vocab = corpus.vocabulary();
    if let Some(bad) = vocab
        .terms()
        .iter()
        .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
    {
        return Err(Error::invalid(format!(
            "term {bad:?} cannot be written in line-tokens format"
        )));
    }
    write_vocab(&vocab_path(path), vocab)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for doc in corpus.documents() {
        let mut first = true;
        for &(t, c) in doc.counts() {
            for _ in 0..c {
                if !first {
                    w.write_all(b" ").map_err(|e| Error::io(path, e))?;
                }
                w.write_all(vocab.term(t).as_bytes()).map_err(|e| Error::io(path, e))?;
                first = false;
            }
        }
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_vocab(path: &Path) -> Result<Vocabulary> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut terms = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        terms.push(line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Vocabulary::from_terms(terms)
}

fn write_vocab(path: &Path, vocab: &Vocabulary) -> Result<()> {
    if let Some(bad) = vocab.terms().iter().find(|t| t.contains(['\n', '\r'])) {
        return Err(Error::invalid(format!(
            "term {bad:?} cannot be written to a vocabulary file"
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for term in vocab.terms() {
        writeln!(w, "{term}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_triplets(path: &Path) -> Result<Corpus> {
    let vocabulary = read_vocab(&vocab_path(path))?;
    let v = vocabulary.len();

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse {
                line: 1,
                message: format!("{other:?}"),
            },
        })?;
    let mut position: HashMap<String, usize> = HashMap::new();
    let mut doc_ids: Vec<String> = Vec::new();
    let mut pairs: Vec<Vec<(usize, u32)>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let malformed = |message: String| Error::Parse { line, message };
        if record.len() != 3 {
            return Err(malformed(format!("expected 3 fields, found {}", record.len())));
        }
        let doc = record[0].to_owned();
        let term: usize = record[1]
            .trim()
            .parse()
            .map_err(|_| malformed(format!("bad term id {:?}", &record[1])))?;
        let count: u32 = record[2]
            .trim()
            .parse()
            .map_err(|_| malformed(format!("bad count {:?}", &record[2])))?;
        if count == 0 {
            return Err(malformed("count must be at least 1".into()));
        }
        if term >= v {
            return Err(Error::UnknownTerm { term, vocab: v });
        }
        let slot = *position.entry(doc.clone()).or_insert_with(|| {
            doc_ids.push(doc);
            pairs.push(Vec::new());
            pairs.len() - 1
        });
        if pairs[slot].iter().any(|&(t, _)| t == term) {
            return Err(malformed(format!("duplicate entry for term {term}")));
        }
        pairs[slot].push((term, count));
    }
    let documents = pairs.into_iter().map(Document::from_counts).collect();
    Corpus::new(vocabulary, documents, doc_ids, None)
}

fn write_triplets(corpus: &Corpus, path: &Path) -> Result<()> {
    write_vocab(&vocab_path(path), corpus.vocabulary())?;

    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::invalid(format!("{other:?}")),
    })?;
    w.write_record(["doc_id", "term_id", "count"])?;
    for (doc, id) in corpus.documents().iter().zip(corpus.doc_ids()) {
        for &(t, c) in doc.counts() {
            w.write_record([id.as_str(), &t.to_string(), &c.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_labels(path: &Path, doc_ids: &[String]) -> Result<Vec<u8>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut by_id: HashMap<String, u8> = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let label = match record.get(1).map(str::trim) {
            Some("0") => 0,
            Some("1") => 1,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("label must be 0 or 1, found {other:?}"),
                })
            }
        };
        by_id.insert(record[0].to_owned(), label);
    }
    doc_ids
        .iter()
        .map(|id| {
            by_id
                .get(id)
                .copied()
                .ok_or_else(|| Error::invalid(format!("no label for document {id}")))
        })
        .collect()
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
