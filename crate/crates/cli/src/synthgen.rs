//! Synthetic bag-of-words corpora with planted high-variance topics, used
//! to exercise the full pipeline end to end.
//!
//! Topic `t` owns the `words_per_topic` consecutive word ids starting at
//! `t * words_per_topic + 1`. Every document belongs to one topic (round
//! robin over documents) and counts all of that topic's words at a shared
//! per-document amplitude, so words within a topic are perfectly correlated
//! across the corpus while words of different topics never co-occur.
//! Topic amplitudes decrease with the topic index, ordering the extracted
//! components. A sprinkle of count-1 background words keeps the rest of the
//! dictionary occupied at variance several orders of magnitude below any
//! topic word.

use std::io::Write;
use std::path::{Path, PathBuf};

use spca_core::rng::SplitMix64;

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct PlantedCorpusSpec {
    pub dictionary: u32,
    pub documents: u64,
    pub topics: usize,
    pub words_per_topic: usize,
    pub background_words_per_doc: usize,
    pub seed: u64,
}

impl Default for PlantedCorpusSpec {
    fn default() -> Self {
        PlantedCorpusSpec {
            dictionary: 2000,
            documents: 10_000,
            topics: 5,
            words_per_topic: 5,
            background_words_per_doc: 10,
            seed: 17,
        }
    }
}

pub struct PlantedCorpus {
    pub docword_path: PathBuf,
    pub vocab_path: PathBuf,
    /// Word ids of each planted topic, ascending within a topic.
    pub topic_words: Vec<Vec<u32>>,
}

/// Writes `docword.txt` and `vocab.txt` under `dir`; deterministic per seed.
pub fn generate_planted(spec: &PlantedCorpusSpec, dir: &Path) -> Result<PlantedCorpus> {
    let topic_span = spec.topics * spec.words_per_topic;
    if topic_span as u64 >= spec.dictionary as u64 {
        return Err(Error::Usage(
            "dictionary too small for the requested topics".into(),
        ));
    }
    if spec.documents == 0 || spec.topics == 0 || spec.words_per_topic == 0 {
        return Err(Error::Usage("empty corpus requested".into()));
    }

    let mut rng = SplitMix64::new(spec.seed);
    let mut triples: Vec<(u64, u32, u32)> = Vec::new();
    for doc in 1..=spec.documents {
        let topic = ((doc - 1) % spec.topics as u64) as usize;
        // shared amplitude: perfectly correlated counts inside the topic
        let base = 20 - 2 * topic as u32;
        let amplitude = base + rng.next_below(7) as u32;
        for w in 0..spec.words_per_topic {
            let word = (topic * spec.words_per_topic + w) as u32 + 1;
            triples.push((doc, word, amplitude));
        }
        let background_span = spec.dictionary - topic_span as u32;
        let mut seen = Vec::with_capacity(spec.background_words_per_doc);
        while seen.len() < spec.background_words_per_doc {
            let word = topic_span as u32 + 1 + rng.next_below(background_span as u64) as u32;
            if !seen.contains(&word) {
                seen.push(word);
            }
        }
        seen.sort_unstable();
        for word in seen {
            triples.push((doc, word, 1));
        }
    }

    let docword_path = dir.join("docword.txt");
    let file = std::fs::File::create(&docword_path)
        .map_err(|e| Error::file(&docword_path, e.to_string()))?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "{}", spec.documents)?;
    writeln!(out, "{}", spec.dictionary)?;
    writeln!(out, "{}", triples.len())?;
    for (d, w, c) in &triples {
        writeln!(out, "{d} {w} {c}")?;
    }
    out.flush()?;

    let vocab_path = dir.join("vocab.txt");
    let file = std::fs::File::create(&vocab_path)
        .map_err(|e| Error::file(&vocab_path, e.to_string()))?;
    let mut out = std::io::BufWriter::new(file);
    for id in 1..=spec.dictionary {
        let topic = (id as usize - 1) / spec.words_per_topic;
        if (id as usize) <= topic_span {
            writeln!(out, "topic{}_word{}", topic, (id as usize - 1) % spec.words_per_topic)?;
        } else {
            writeln!(out, "noise{id}")?;
        }
    }
    out.flush()?;

    let topic_words = (0..spec.topics)
        .map(|t| {
            (0..spec.words_per_topic)
                .map(|w| (t * spec.words_per_topic + w) as u32 + 1)
                .collect()
        })
        .collect();
    Ok(PlantedCorpus {
        docword_path,
        vocab_path,
        topic_words,
    })
}
