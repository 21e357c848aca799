//! Streaming readers for UCI bag-of-words corpora.
//!
//! The `docword` text format is three header lines (document count `D`,
//! dictionary size `W`, triple count `NNZ`) followed by one
//! `docID wordID count` triple per line, 1-based ids, documents contiguous
//! and in non-decreasing `docID` order. Readers deliver one callback per
//! document with its sparse entries; memory stays proportional to the
//! largest single document, never to the corpus.
//!
//! A binary triple cache with identical logical content accelerates
//! repeated passes; both representations support splitting into byte
//! ranges aligned to document boundaries so shards can stream in parallel
//! and merge deterministically.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::{Error, Result};

/// 64-bit FNV-1a over a whole file; keys the stats and triple caches.
pub fn content_hash(path: &Path) -> Result<u64> {
    let mut file = File::open(path).map_err(|e| Error::file(path, e.to_string()))?;
    let mut state: u64 = 0xcbf2_9ce4_8422_2325;
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        for &b in &buf[..n] {
            state ^= b as u64;
            state = state.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    Ok(state)
}

/// Totals of one streaming pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PassSummary {
    /// Documents delivered to the callback (documents with no triples do
    /// not appear in the file and are not counted here).
    pub docs_seen: u64,
    /// Triples consumed.
    pub triples: u64,
    /// Largest per-document entry count observed.
    pub max_doc_len: usize,
    /// Final capacity of the reused per-document buffer; bounded by the
    /// largest document, not by the corpus.
    pub peak_buffer: usize,
}

/// Handle to a disk-resident `docword` file (header parsed and first data
/// record validated; triples are re-streamed on every pass).
#[derive(Debug, Clone)]
pub struct BagOfWordsCorpus {
    path: PathBuf,
    pub num_docs: u64,
    pub num_words: u32,
    pub nnz: u64,
    data_offset: u64,
}

fn parse_header_value<T: std::str::FromStr>(
    path: &Path,
    line_no: u64,
    line: &str,
    what: &str,
) -> Result<T> {
    line.trim()
        .parse::<T>()
        .map_err(|_| Error::format(path, line_no, format!("invalid {what}: {:?}", line.trim())))
}

fn parse_triple(path: &Path, line_no: u64, line: &str) -> Result<(u64, u32, u32)> {
    let mut it = line.split_ascii_whitespace();
    let doc = it
        .next()
        .and_then(|s| s.parse::<u64>().ok())
        .ok_or_else(|| Error::format(path, line_no, "expected docID"))?;
    let word = it
        .next()
        .and_then(|s| s.parse::<u32>().ok())
        .ok_or_else(|| Error::format(path, line_no, "expected wordID"))?;
    let count = it
        .next()
        .and_then(|s| s.parse::<u32>().ok())
        .ok_or_else(|| Error::format(path, line_no, "expected count"))?;
    if it.next().is_some() {
        return Err(Error::format(path, line_no, "trailing fields on triple"));
    }
    Ok((doc, word, count))
}

impl BagOfWordsCorpus {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::file(&path, e.to_string()))?;
        let mut reader = BufReader::new(file);
        let mut line = String::new();
        let mut offset = 0u64;

        let mut header = [0u64; 3];
        for (k, what) in ["document count", "dictionary size", "triple count"]
            .iter()
            .enumerate()
        {
            line.clear();
            let n = reader.read_line(&mut line)?;
            if n == 0 {
                return Err(Error::format(&path, k as u64 + 1, format!("missing {what}")));
            }
            offset += n as u64;
            header[k] = parse_header_value(&path, k as u64 + 1, &line, what)?;
            if header[k] == 0 {
                return Err(Error::format(&path, k as u64 + 1, format!("{what} must be positive")));
            }
        }
        let (num_docs, num_words, nnz) = (header[0], header[1], header[2]);
        if num_words > u32::MAX as u64 {
            return Err(Error::format(&path, 2, "dictionary size out of range"));
        }
        let num_words = num_words as u32;

        // validate the first data record up front
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            return Err(Error::format(&path, 4, "missing first triple"));
        }
        let (doc, word, count) = parse_triple(&path, 4, &line)?;
        let corpus = BagOfWordsCorpus {
            path,
            num_docs,
            num_words,
            nnz,
            data_offset: offset,
        };
        corpus.check_triple(4, doc, word, count)?;
        Ok(corpus)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn check_triple(&self, line_no: u64, doc: u64, word: u32, count: u32) -> Result<()> {
        if doc == 0 || doc > self.num_docs {
            return Err(Error::format(
                &self.path,
                line_no,
                format!("docID {doc} outside 1..={}", self.num_docs),
            ));
        }
        if word == 0 || word > self.num_words {
            return Err(Error::format(
                &self.path,
                line_no,
                format!("wordID {word} outside 1..={}", self.num_words),
            ));
        }
        if count == 0 {
            return Err(Error::format(&self.path, line_no, "count must be at least 1"));
        }
        Ok(())
    }

    /// One full pass; the callback receives each document's id and sparse
    /// `(wordID, count)` entries in file order. The consumed triple count
    /// must equal the header's `NNZ`.
    pub fn stream_documents(&self, f: impl FnMut(u32, &[(u32, u32)])) -> Result<PassSummary> {
        let summary = self.stream_range(self.data_offset, u64::MAX, f)?;
        if summary.triples != self.nnz {
            return Err(Error::format(
                &self.path,
                0,
                format!(
                    "triple count mismatch: header declares {}, file holds {}",
                    self.nnz, summary.triples
                ),
            ));
        }
        Ok(summary)
    }

    /// Streams documents whose triples lie in `[start, end)` bytes; the
    /// bounds must align to document boundaries (see [`Self::shard_ranges`]).
    pub fn stream_range(
        &self,
        start: u64,
        end: u64,
        mut f: impl FnMut(u32, &[(u32, u32)]),
    ) -> Result<PassSummary> {
        let file = File::open(&self.path).map_err(|e| Error::file(&self.path, e.to_string()))?;
        let mut reader = BufReader::new(file);
        reader.seek(SeekFrom::Start(start))?;
        let counting_lines = start == self.data_offset;
        let mut line_no: u64 = 3; // header lines; only meaningful for full passes
        let mut pos = start;

        let mut line = String::new();
        let mut current_doc: u64 = 0;
        let mut entries: Vec<(u32, u32)> = Vec::new();
        let mut summary = PassSummary {
            docs_seen: 0,
            triples: 0,
            max_doc_len: 0,
            peak_buffer: 0,
        };

        loop {
            if pos >= end {
                break;
            }
            line.clear();
            let n = reader.read_line(&mut line)?;
            if n == 0 {
                break;
            }
            pos += n as u64;
            line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let report_line = if counting_lines { line_no } else { 0 };
            let (doc, word, count) = parse_triple(&self.path, report_line, &line)?;
            self.check_triple(report_line, doc, word, count)?;
            if doc < current_doc {
                return Err(Error::format(
                    &self.path,
                    report_line,
                    format!("docID decreased from {current_doc} to {doc}"),
                ));
            }
            if doc != current_doc {
                if current_doc != 0 {
                    summary.docs_seen += 1;
                    summary.max_doc_len = summary.max_doc_len.max(entries.len());
                    f(current_doc as u32, &entries);
                }
                current_doc = doc;
                entries.clear();
            }
            entries.push((word, count));
            summary.triples += 1;
        }
        if current_doc != 0 {
            summary.docs_seen += 1;
            summary.max_doc_len = summary.max_doc_len.max(entries.len());
            f(current_doc as u32, &entries);
        }
        summary.peak_buffer = entries.capacity();
        Ok(summary)
    }

    /// Splits the triple section into at most `shards` byte ranges aligned
    /// to document boundaries. Concatenating the ranges in order restores
    /// the full pass exactly.
    pub fn shard_ranges(&self, shards: usize) -> Result<Vec<(u64, u64)>> {
        let file_len = std::fs::metadata(&self.path)
            .map_err(|e| Error::file(&self.path, e.to_string()))?
            .len();
        if shards <= 1 || file_len <= self.data_offset {
            return Ok(vec![(self.data_offset, file_len)]);
        }
        let mut file = File::open(&self.path).map_err(|e| Error::file(&self.path, e.to_string()))?;
        let span = file_len - self.data_offset;
        let mut cuts = vec![self.data_offset];
        for k in 1..shards {
            let target = self.data_offset + span * k as u64 / shards as u64;
            if let Some(cut) = self.next_document_boundary(&mut file, target, file_len)? {
                if cut > *cuts.last().unwrap() && cut < file_len {
                    cuts.push(cut);
                }
            }
        }
        cuts.push(file_len);
        Ok(cuts.windows(2).map(|w| (w[0], w[1])).collect())
    }

    /// First byte offset at or after `target` where a new document starts.
    fn next_document_boundary(
        &self,
        file: &mut File,
        target: u64,
        file_len: u64,
    ) -> Result<Option<u64>> {
        let mut reader = BufReader::new(&mut *file);
        reader.seek(SeekFrom::Start(target))?;
        let mut pos = target;
        let mut line = String::new();
        // skip the (possibly partial) line containing `target`
        if target > self.data_offset {
            let n = reader.read_line(&mut line)?;
            if n == 0 {
                return Ok(None);
            }
            pos += n as u64;
        }
        let mut prev_doc: Option<u64> = None;
        loop {
            if pos >= file_len {
                return Ok(None);
            }
            line.clear();
            let n = reader.read_line(&mut line)?;
            if n == 0 {
                return Ok(None);
            }
            if !line.trim().is_empty() {
                let (doc, _, _) = parse_triple(&self.path, 0, &line)?;
                match prev_doc {
                    None => prev_doc = Some(doc),
                    Some(p) if doc != p => return Ok(Some(pos)),
                    Some(_) => {}
                }
            }
            pos += n as u64;
        }
    }
}

/// Dictionary tokens, 1-indexed by word id.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
}

impl Vocabulary {
    pub fn token(&self, id: u32) -> &str {
        &self.tokens[(id - 1) as usize]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// One token per line; the count must match the corpus dictionary size.
pub fn load_vocab(path: impl AsRef<Path>, expected_words: u32) -> Result<Vocabulary> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e.to_string()))?;
    let mut tokens = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let token = line.trim();
        if token.is_empty() {
            return Err(Error::format(path, k as u64 + 1, "empty token"));
        }
        tokens.push(token.to_string());
    }
    if tokens.len() != expected_words as usize {
        return Err(Error::file(
            path,
            format!(
                "vocabulary holds {} tokens but the corpus declares {expected_words} words",
                tokens.len()
            ),
        ));
    }
    Ok(Vocabulary { tokens })
}

const TRIPLE_MAGIC: &[u8; 8] = b"SPCATRPL";
const TRIPLE_VERSION: u32 = 1;
const TRIPLE_HEADER_LEN: u64 = 8 + 4 + 8 + 4 + 8 + 8;
const TRIPLE_RECORD_LEN: u64 = 12;

/// Compiled binary mirror of a `docword` file (same logical triples, no
/// parsing on re-read), keyed by the source file's content hash.
#[derive(Debug, Clone)]
pub struct TripleCache {
    path: PathBuf,
    pub num_docs: u64,
    pub num_words: u32,
    pub nnz: u64,
    pub source_hash: u64,
}

/// Incremental cache writer; feed documents in stream order.
pub struct TripleCacheWriter {
    path: PathBuf,
    out: BufWriter<File>,
    written: u64,
    declared: u64,
}

impl TripleCacheWriter {
    pub fn create(path: impl AsRef<Path>, corpus: &BagOfWordsCorpus, source_hash: u64) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::file(&path, e.to_string()))?;
        let mut out = BufWriter::new(file);
        out.write_all(TRIPLE_MAGIC)?;
        out.write_all(&TRIPLE_VERSION.to_le_bytes())?;
        out.write_all(&corpus.num_docs.to_le_bytes())?;
        out.write_all(&corpus.num_words.to_le_bytes())?;
        out.write_all(&corpus.nnz.to_le_bytes())?;
        out.write_all(&source_hash.to_le_bytes())?;
        Ok(TripleCacheWriter {
            path,
            out,
            written: 0,
            declared: corpus.nnz,
        })
    }

    pub fn add_document(&mut self, doc: u32, entries: &[(u32, u32)]) -> Result<()> {
        for &(word, count) in entries {
            self.out.write_all(&doc.to_le_bytes())?;
            self.out.write_all(&word.to_le_bytes())?;
            self.out.write_all(&count.to_le_bytes())?;
            self.written += 1;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        if self.written != self.declared {
            // leave no partial cache behind
            drop(self.out);
            let _ = std::fs::remove_file(&self.path);
            return Err(Error::file(
                &self.path,
                format!("cache wrote {} of {} declared triples", self.written, self.declared),
            ));
        }
        Ok(())
    }
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

impl TripleCache {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::file(&path, e.to_string()))?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| Error::file(&path, "truncated cache header"))?;
        if &magic != TRIPLE_MAGIC {
            return Err(Error::file(&path, "not a triple cache (bad magic)"));
        }
        let version = read_u32(&mut r)?;
        if version != TRIPLE_VERSION {
            return Err(Error::file(&path, format!("unsupported cache version {version}")));
        }
        let num_docs = read_u64(&mut r)?;
        let num_words = read_u32(&mut r)?;
        let nnz = read_u64(&mut r)?;
        let source_hash = read_u64(&mut r)?;
        let expect = TRIPLE_HEADER_LEN + nnz * TRIPLE_RECORD_LEN;
        let actual = std::fs::metadata(&path)?.len();
        if actual != expect {
            return Err(Error::file(
                &path,
                format!("cache length {actual} does not match {nnz} records"),
            ));
        }
        Ok(TripleCache {
            path,
            num_docs,
            num_words,
            nnz,
            source_hash,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn stream_documents(&self, f: impl FnMut(u32, &[(u32, u32)])) -> Result<PassSummary> {
        self.stream_records(0, self.nnz, f)
    }

    /// Streams the record range `[first, last)`; bounds must align to
    /// document boundaries.
    pub fn stream_records(
        &self,
        first: u64,
        last: u64,
        mut f: impl FnMut(u32, &[(u32, u32)]),
    ) -> Result<PassSummary> {
        let file = File::open(&self.path).map_err(|e| Error::file(&self.path, e.to_string()))?;
        let mut r = BufReader::new(file);
        r.seek(SeekFrom::Start(TRIPLE_HEADER_LEN + first * TRIPLE_RECORD_LEN))?;
        let mut current_doc: u32 = 0;
        let mut entries: Vec<(u32, u32)> = Vec::new();
        let mut summary = PassSummary {
            docs_seen: 0,
            triples: 0,
            max_doc_len: 0,
            peak_buffer: 0,
        };
        for _ in first..last {
            let doc = read_u32(&mut r)?;
            let word = read_u32(&mut r)?;
            let count = read_u32(&mut r)?;
            if doc != current_doc {
                if current_doc != 0 {
                    summary.docs_seen += 1;
                    summary.max_doc_len = summary.max_doc_len.max(entries.len());
                    f(current_doc, &entries);
                }
                current_doc = doc;
                entries.clear();
            }
            entries.push((word, count));
            summary.triples += 1;
        }
        if current_doc != 0 {
            summary.docs_seen += 1;
            summary.max_doc_len = summary.max_doc_len.max(entries.len());
            f(current_doc, &entries);
        }
        summary.peak_buffer = entries.capacity();
        Ok(summary)
    }

    /// Record ranges aligned to document boundaries, for parallel shards.
    pub fn shard_records(&self, shards: usize) -> Result<Vec<(u64, u64)>> {
        if shards <= 1 || self.nnz == 0 {
            return Ok(vec![(0, self.nnz)]);
        }
        let file = File::open(&self.path).map_err(|e| Error::file(&self.path, e.to_string()))?;
        let mut r = BufReader::new(file);
        let doc_of = |r: &mut BufReader<File>, rec: u64| -> Result<u32> {
            r.seek(SeekFrom::Start(TRIPLE_HEADER_LEN + rec * TRIPLE_RECORD_LEN))?;
            Ok(read_u32(r)?)
        };
        let mut cuts = vec![0u64];
        for k in 1..shards {
            let mut rec = self.nnz * k as u64 / shards as u64;
            if rec == 0 {
                continue;
            }
            let prev = doc_of(&mut r, rec - 1)?;
            // advance to the first record of the next document
            while rec < self.nnz && doc_of(&mut r, rec)? == prev {
                rec += 1;
            }
            if rec > *cuts.last().unwrap() && rec < self.nnz {
                cuts.push(rec);
            }
        }
        cuts.push(self.nnz);
        Ok(cuts.windows(2).map(|w| (w[0], w[1])).collect())
    }
}

/// A corpus behind either representation.
#[derive(Debug, Clone)]
pub enum CorpusSource {
    Text(BagOfWordsCorpus),
    Cache(TripleCache),
}

impl CorpusSource {
    pub fn num_docs(&self) -> u64 {
        match self {
            CorpusSource::Text(c) => c.num_docs,
            CorpusSource::Cache(c) => c.num_docs,
        }
    }

    pub fn num_words(&self) -> u32 {
        match self {
            CorpusSource::Text(c) => c.num_words,
            CorpusSource::Cache(c) => c.num_words,
        }
    }

    pub fn nnz(&self) -> u64 {
        match self {
            CorpusSource::Text(c) => c.nnz,
            CorpusSource::Cache(c) => c.nnz,
        }
    }

    pub fn stream_documents(&self, f: impl FnMut(u32, &[(u32, u32)])) -> Result<PassSummary> {
        match self {
            CorpusSource::Text(c) => c.stream_documents(f),
            CorpusSource::Cache(c) => c.stream_documents(f),
        }
    }

    /// Opaque shard descriptors for [`Self::stream_shard`].
    pub fn shards(&self, shards: usize) -> Result<Vec<(u64, u64)>> {
        match self {
            CorpusSource::Text(c) => c.shard_ranges(shards),
            CorpusSource::Cache(c) => c.shard_records(shards),
        }
    }

    pub fn stream_shard(
        &self,
        shard: (u64, u64),
        f: impl FnMut(u32, &[(u32, u32)]),
    ) -> Result<PassSummary> {
        match self {
            CorpusSource::Text(c) => c.stream_range(shard.0, shard.1, f),
            CorpusSource::Cache(c) => c.stream_records(shard.0, shard.1, f),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn fixture(dir: &Path, name: &str, content: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    const SMALL: &str = "3\n4\n5\n1 2 3\n1 4 1\n2 1 2\n3 2 1\n3 3 2\n";

    #[test]
    fn parses_header_and_streams_documents() {
        let dir = tempfile::tempdir().unwrap();
        let path = fixture(dir.path(), "docword.txt", SMALL);
        let corpus = BagOfWordsCorpus::open(&path).unwrap();
        assert_eq!(corpus.num_docs, 3);
        assert_eq!(corpus.num_words, 4);
        assert_eq!(corpus.nnz, 5);

        let mut seen = Vec::new();
        let summary = corpus
            .stream_documents(|doc, entries| seen.push((doc, entries.to_vec())))
            .unwrap();
        assert_eq!(summary.docs_seen, 3);
        assert_eq!(summary.triples, 5);
        assert_eq!(
            seen,
            vec![
                (1, vec![(2, 3), (4, 1)]),
                (2, vec![(1, 2)]),
                (3, vec![(2, 1), (3, 2)]),
            ]
        );
    }

    #[test]
    fn empty_file_fails_at_line_one() {
        let dir = tempfile::tempdir().unwrap();
        let path = fixture(dir.path(), "empty.txt", "");
        match BagOfWordsCorpus::open(&path) {
            Err(Error::Format { line: 1, .. }) => {}
            other => panic!("expected line-1 format error, got {other:?}"),
        }
    }

    #[test]
    fn word_id_out_of_range_is_reported_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = fixture(dir.path(), "bad.txt", "2\n3\n2\n1 2 1\n2 9 1\n");
        let corpus = BagOfWordsCorpus::open(&path).unwrap();
        match corpus.stream_documents(|_, _| {}) {
            Err(Error::Format { line: 5, message, .. }) => {
                assert!(message.contains("wordID 9"), "{message}");
            }
            other => panic!("expected format error at line 5, got {other:?}"),
        }
    }

    #[test]
    fn decreasing_doc_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = fixture(dir.path(), "order.txt", "2\n3\n3\n2 1 1\n1 2 1\n1 3 1\n");
        let corpus = BagOfWordsCorpus::open(&path).unwrap();
        assert!(matches!(
            corpus.stream_documents(|_, _| {}),
            Err(Error::Format { line: 5, .. })
        ));
    }

    #[test]
    fn triple_count_mismatch_detected_at_eof() {
        let dir = tempfile::tempdir().unwrap();
        let path = fixture(dir.path(), "short.txt", "2\n3\n4\n1 1 1\n2 2 1\n");
        let corpus = BagOfWordsCorpus::open(&path).unwrap();
        match corpus.stream_documents(|_, _| {}) {
            Err(Error::Format { message, .. }) => {
                assert!(message.contains("mismatch"), "{message}");
            }
            other => panic!("expected mismatch, got {other:?}"),
        }
    }

    #[test]
    fn sharded_ranges_reassemble_the_full_pass() {
        let dir = tempfile::tempdir().unwrap();
        // 8 documents of varying length
        let mut text = String::from("8\n5\n16\n");
        let mut doc = 1;
        for k in 0..16 {
            if k % 2 == 0 && k > 0 {
                doc += 1;
            }
            text.push_str(&format!("{doc} {} {}\n", k % 5 + 1, k + 1));
        }
        let path = fixture(dir.path(), "sharded.txt", &text);
        let corpus = BagOfWordsCorpus::open(&path).unwrap();

        let mut whole = Vec::new();
        corpus
            .stream_documents(|d, e| whole.push((d, e.to_vec())))
            .unwrap();

        for shards in [2usize, 3, 5] {
            let ranges = corpus.shard_ranges(shards).unwrap();
            let mut stitched = Vec::new();
            let mut triples = 0;
            for r in &ranges {
                let s = corpus
                    .stream_range(r.0, r.1, |d, e| stitched.push((d, e.to_vec())))
                    .unwrap();
                triples += s.triples;
            }
            assert_eq!(stitched, whole, "{shards} shards");
            assert_eq!(triples, corpus.nnz);
        }
    }

    #[test]
    fn vocab_length_checked() {
        let dir = tempfile::tempdir().unwrap();
        let good = fixture(dir.path(), "vocab4.txt", "alpha\nbeta\ngamma\ndelta\n");
        let v = load_vocab(&good, 4).unwrap();
        assert_eq!(v.token(2), "beta");
        let bad = fixture(dir.path(), "vocab3.txt", "alpha\nbeta\ngamma\n");
        assert!(load_vocab(&bad, 4).is_err());
    }

    #[test]
    fn triple_cache_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = fixture(dir.path(), "docword.txt", SMALL);
        let corpus = BagOfWordsCorpus::open(&path).unwrap();
        let hash = content_hash(&path).unwrap();

        let cache_path = dir.path().join("triples.bin");
        let mut writer = TripleCacheWriter::create(&cache_path, &corpus, hash).unwrap();
        corpus
            .stream_documents(|doc, entries| {
                writer.add_document(doc, entries).unwrap();
            })
            .unwrap();
        writer.finish().unwrap();

        let cache = TripleCache::open(&cache_path).unwrap();
        assert_eq!(cache.num_docs, 3);
        assert_eq!(cache.source_hash, hash);

        let mut from_text = Vec::new();
        corpus
            .stream_documents(|d, e| from_text.push((d, e.to_vec())))
            .unwrap();
        let mut from_cache = Vec::new();
        cache
            .stream_documents(|d, e| from_cache.push((d, e.to_vec())))
            .unwrap();
        assert_eq!(from_text, from_cache);

        // sharded cache reads agree too
        let ranges = cache.shard_records(3).unwrap();
        let mut stitched = Vec::new();
        for r in ranges {
            cache
                .stream_records(r.0, r.1, |d, e| stitched.push((d, e.to_vec())))
                .unwrap();
        }
        assert_eq!(stitched, from_text);
    }

    #[test]
    fn two_passes_are_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = fixture(dir.path(), "docword.txt", SMALL);
        let corpus = BagOfWordsCorpus::open(&path).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        corpus.stream_documents(|d, e| a.push((d, e.to_vec()))).unwrap();
        corpus.stream_documents(|d, e| b.push((d, e.to_vec()))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn content_hash_is_stable_and_sensitive() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = fixture(dir.path(), "a.txt", SMALL);
        let p2 = fixture(dir.path(), "b.txt", SMALL);
        let p3 = fixture(dir.path(), "c.txt", "3\n4\n5\n1 2 3\n1 4 1\n2 1 2\n3 2 1\n3 3 3\n");
        assert_eq!(content_hash(&p1).unwrap(), content_hash(&p2).unwrap());
        assert_ne!(content_hash(&p1).unwrap(), content_hash(&p3).unwrap());
    }
}
