//! Pipeline orchestration: corpus passes (optionally sharded across
//! threads), cached statistics, the screen/solve/deflate component loop,
//! and the report/trace artifacts the CLI emits.
//!
//! Thread-count invariance: shard accumulation merges in shard order, and
//! with the default identity count transform every partial sum is an exact
//! integer in f64, so results are bit-identical for any `threads` value.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use spca_core::covariance::{CovarianceMatrix, GramAccumulator};
use spca_core::screening::{FeatureStats, VarianceAccumulator};
use spca_core::solver::{self, LambdaSearch, SolverConfig, SparseComponent};

use crate::corpus::{
    content_hash, BagOfWordsCorpus, CorpusSource, PassSummary, TripleCache, TripleCacheWriter,
    Vocabulary,
};
use crate::{stats_io, Error, Result};

/// Per-feature count transform applied before accumulation (identity by
/// default; the screening guarantee is tied to the transformed values).
pub type CountTransform = fn(u32, u32) -> f64;

pub fn identity_transform(_id: u32, count: u32) -> f64 {
    count as f64
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub threads: usize,
    pub cache_dir: Option<PathBuf>,
    pub epsilon: f64,
    pub max_sweeps: usize,
    pub sweep_tol: f64,
    pub support_threshold: f64,
    /// Accepted cardinality window half-width for the penalty search.
    pub slack: usize,
    pub max_solves: usize,
    pub grid_points: usize,
    /// Features materialized per component round (highest variance first).
    pub working_cap: usize,
    /// Hard ceiling on any dense covariance order.
    pub storage_cap: usize,
    pub transform: CountTransform,
    /// Write zeros instead of wall-clock fields, for byte-reproducible runs.
    pub no_timing: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            threads: 1,
            cache_dir: None,
            epsilon: 1e-4,
            max_sweeps: 20,
            sweep_tol: 1e-6,
            support_threshold: solver::DEFAULT_SUPPORT_THRESHOLD,
            slack: 2,
            max_solves: 30,
            grid_points: 8,
            working_cap: 2000,
            storage_cap: 20_000,
            transform: identity_transform,
            no_timing: false,
        }
    }
}

impl PipelineOptions {
    pub fn solver_config(&self, lambda: f64) -> SolverConfig {
        let mut c = SolverConfig::new(lambda);
        c.epsilon = self.epsilon;
        c.max_sweeps = self.max_sweeps;
        c.sweep_tol = self.sweep_tol;
        c
    }

    fn search(&self, target: usize) -> LambdaSearch {
        LambdaSearch {
            target,
            slack: self.slack,
            max_solves: self.max_solves,
            grid_points: self.grid_points,
            support_threshold: self.support_threshold,
        }
    }
}

/// Streams every document once, sharded across up to `threads` workers,
/// reducing into per-shard accumulators merged in shard order.
fn shard_reduce<A: Send>(
    source: &CorpusSource,
    threads: usize,
    transform: CountTransform,
    make: impl Fn() -> A + Sync,
    add: impl Fn(&mut A, u32, &[(u32, f64)]) + Sync,
) -> Result<(Vec<A>, PassSummary)> {
    let shards = source.shards(threads.max(1))?;
    let results: Vec<Result<(A, PassSummary)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = shards
            .iter()
            .map(|&range| {
                let make = &make;
                let add = &add;
                scope.spawn(move || -> Result<(A, PassSummary)> {
                    let mut acc = make();
                    let mut scratch: Vec<(u32, f64)> = Vec::new();
                    let summary = source.stream_shard(range, |doc, entries| {
                        scratch.clear();
                        scratch.extend(entries.iter().map(|&(id, c)| (id, transform(id, c))));
                        add(&mut acc, doc, &scratch);
                    })?;
                    Ok((acc, summary))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("corpus shard worker panicked"))
            .collect()
    });

    let mut accs = Vec::with_capacity(results.len());
    let mut total = PassSummary {
        docs_seen: 0,
        triples: 0,
        max_doc_len: 0,
        peak_buffer: 0,
    };
    for r in results {
        let (acc, summary) = r?;
        total.docs_seen += summary.docs_seen;
        total.triples += summary.triples;
        total.max_doc_len = total.max_doc_len.max(summary.max_doc_len);
        total.peak_buffer = total.peak_buffer.max(summary.peak_buffer);
        accs.push(acc);
    }
    if total.triples != source.nnz() {
        return Err(Error::Usage(format!(
            "pass consumed {} triples but the corpus declares {}",
            total.triples,
            source.nnz()
        )));
    }
    Ok((accs, total))
}

/// Per-feature moments over the whole corpus (absent entries are zeros).
pub fn compute_stats(source: &CorpusSource, opts: &PipelineOptions) -> Result<FeatureStats> {
    let w = source.num_words() as usize;
    let (accs, _) = shard_reduce(
        source,
        opts.threads,
        opts.transform,
        || VarianceAccumulator::new(w),
        |acc, _doc, entries| {
            acc.add_document(entries)
                .expect("word ids validated by the corpus reader");
        },
    )?;
    let mut merged: Option<VarianceAccumulator> = None;
    for acc in accs {
        match &mut merged {
            None => merged = Some(acc),
            Some(m) => m.merge(&acc)?,
        }
    }
    Ok(merged.expect("at least one shard").finalize(source.num_docs())?)
}

/// Reduced covariance over `kept` (original ids), streamed from the corpus.
pub fn gram_reduced(
    source: &CorpusSource,
    kept: &[u32],
    opts: &PipelineOptions,
) -> Result<CovarianceMatrix> {
    if kept.is_empty() {
        return Err(spca_core::Error::EmptyReducedProblem.into());
    }
    if kept.len() > opts.storage_cap {
        return Err(Error::Usage(format!(
            "reduced problem of order {} exceeds the dense storage cap {}",
            kept.len(),
            opts.storage_cap
        )));
    }
    for &id in kept {
        if id == 0 || id > source.num_words() {
            return Err(spca_core::Error::UnknownFeature { id }.into());
        }
    }
    let (accs, _) = shard_reduce(
        source,
        opts.threads,
        opts.transform,
        || GramAccumulator::new(kept).expect("kept validated above"),
        |acc, _doc, entries| acc.add_document(entries),
    )?;
    let mut merged: Option<GramAccumulator> = None;
    for acc in accs {
        match &mut merged {
            None => merged = Some(acc),
            Some(m) => m.merge(&acc)?,
        }
    }
    Ok(merged
        .expect("at least one shard")
        .finalize(source.num_docs())?)
}

/// A corpus opened together with its statistics (cache-aware).
pub struct CorpusStats {
    pub source: CorpusSource,
    pub stats: FeatureStats,
    pub hash: u64,
    pub stats_from_cache: bool,
}

fn stats_cache_path(dir: &Path, hash: u64) -> PathBuf {
    dir.join(format!("{hash:016x}.stats"))
}

fn triple_cache_path(dir: &Path, hash: u64) -> PathBuf {
    dir.join(format!("{hash:016x}.triples"))
}

/// Opens a corpus, reusing (or building) the stats and triple caches under
/// `opts.cache_dir` keyed by the file's content hash.
pub fn open_with_stats(corpus_path: &Path, opts: &PipelineOptions) -> Result<CorpusStats> {
    let Some(dir) = &opts.cache_dir else {
        let corpus = BagOfWordsCorpus::open(corpus_path)?;
        let source = CorpusSource::Text(corpus);
        let stats = compute_stats(&source, opts)?;
        return Ok(CorpusStats {
            source,
            stats,
            hash: 0,
            stats_from_cache: false,
        });
    };

    std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e.to_string()))?;
    let hash = content_hash(corpus_path)?;
    let triples = triple_cache_path(dir, hash);
    let cached_source = TripleCache::open(&triples)
        .ok()
        .filter(|c| c.source_hash == hash)
        .map(CorpusSource::Cache);

    let stats_path = stats_cache_path(dir, hash);
    if let Ok((stats, cached_hash)) = stats_io::read_stats(&stats_path) {
        if cached_hash == hash {
            let source = match cached_source {
                Some(s) => s,
                None => CorpusSource::Text(BagOfWordsCorpus::open(corpus_path)?),
            };
            if stats.num_features() == source.num_words() as usize
                && stats.num_docs() == source.num_docs()
            {
                return Ok(CorpusStats {
                    source,
                    stats,
                    hash,
                    stats_from_cache: true,
                });
            }
        }
    }

    // cold start: one pass builds the triple cache and the moments together
    let corpus = BagOfWordsCorpus::open(corpus_path)?;
    let mut acc = VarianceAccumulator::new(corpus.num_words as usize);
    let mut writer = TripleCacheWriter::create(&triples, &corpus, hash)?;
    let mut write_err: Option<Error> = None;
    let mut scratch: Vec<(u32, f64)> = Vec::new();
    let transform = opts.transform;
    corpus.stream_documents(|doc, entries| {
        if write_err.is_some() {
            return;
        }
        if let Err(e) = writer.add_document(doc, entries) {
            write_err = Some(e);
            return;
        }
        scratch.clear();
        scratch.extend(entries.iter().map(|&(id, c)| (id, transform(id, c))));
        acc.add_document(&scratch)
            .expect("word ids validated by the corpus reader");
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    writer.finish()?;
    let stats = acc.finalize(corpus.num_docs)?;
    stats_io::write_stats(&stats_path, &stats, hash)?;
    let source = CorpusSource::Cache(TripleCache::open(&triples)?);
    Ok(CorpusStats {
        source,
        stats,
        hash,
        stats_from_cache: false,
    })
}

// ----- reports -----

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportComponent {
    pub index: usize,
    pub support: Vec<u32>,
    /// Resolved tokens, empty when no vocabulary was given.
    pub tokens: Vec<String>,
    pub weights: Vec<f64>,
    pub explained_variance: f64,
    pub cardinality: usize,
    pub lambda: f64,
    pub phi: f64,
    pub sweeps: usize,
    /// Solves spent by the penalty search for this component.
    pub solves: usize,
    pub wall_seconds: f64,
    pub hit_target_window: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScreeningRound {
    pub round: usize,
    /// Active dictionary size entering the round.
    pub original_n: usize,
    /// Features materialized in the reduced covariance.
    pub reduced_n: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PipelineReport {
    pub documents: u64,
    pub dictionary_size: u32,
    pub components: Vec<ReportComponent>,
    pub screening: Vec<ScreeningRound>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
}

impl PipelineReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Usage(format!("invalid report JSON: {e}")))
    }

    /// Aligned text table, one block per component.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        for c in &self.components {
            out.push_str(&format!(
                "component {} ({} words, lambda {:.6}, explained variance {:.6}{}{})\n",
                c.index,
                c.cardinality,
                c.lambda,
                c.explained_variance,
                if c.hit_target_window { "" } else { ", off target" },
                if c.degenerate { ", degenerate" } else { "" },
            ));
            let width = c
                .tokens
                .iter()
                .map(|t| t.len())
                .chain(std::iter::once(12))
                .max()
                .unwrap_or(12);
            for (k, &id) in c.support.iter().enumerate() {
                let label = if c.tokens.is_empty() {
                    format!("feature {id}")
                } else {
                    c.tokens[k].clone()
                };
                out.push_str(&format!("  {label:<width$}  {:+.6}\n", c.weights[k]));
            }
        }
        if let Some(w) = &self.warning {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }
}

/// Full screen/search/solve/deflate loop.
pub fn run_components(
    corpus_path: &Path,
    vocab: Option<&Vocabulary>,
    k: usize,
    cardinality: usize,
    opts: &PipelineOptions,
) -> Result<PipelineReport> {
    let cs = open_with_stats(corpus_path, opts)?;
    run_components_from(&cs, vocab, k, cardinality, opts)
}

/// Component loop over an already-opened corpus.
pub fn run_components_from(
    cs: &CorpusStats,
    vocab: Option<&Vocabulary>,
    k: usize,
    cardinality: usize,
    opts: &PipelineOptions,
) -> Result<PipelineReport> {
    if k < 1 || cardinality < 1 {
        return Err(Error::Usage(
            "component count and target cardinality must be at least 1".into(),
        ));
    }
    if let Some(v) = vocab {
        if v.len() != cs.source.num_words() as usize {
            return Err(Error::Usage(format!(
                "vocabulary holds {} tokens but the corpus declares {} words",
                v.len(),
                cs.source.num_words()
            )));
        }
    }
    let w = cs.source.num_words();
    let mut active = vec![true; w as usize + 1];
    let mut components = Vec::new();
    let mut screening = Vec::new();
    let mut warning: Option<String> = None;

    for round in 0..k {
        let original_n = (1..=w).filter(|&id| active[id as usize]).count();
        let working: Vec<u32> = cs
            .stats
            .sorted_order()
            .iter()
            .copied()
            .filter(|&id| active[id as usize] && cs.stats.variance(id) > 0.0)
            .take(opts.working_cap.min(opts.storage_cap))
            .collect();
        if working.is_empty() {
            warning = Some(format!(
                "dictionary exhausted after {} of {k} components",
                components.len()
            ));
            break;
        }

        let started = Instant::now();
        let sigma = gram_reduced(&cs.source, &working, opts)?;
        let outcome = solver::search_lambda(
            &sigma,
            &opts.search(cardinality),
            &opts.solver_config(0.0),
        )?;
        let sweeps = outcome
            .probes
            .iter()
            .find(|p| p.lambda == outcome.lambda && p.component.is_some())
            .map(|p| p.sweeps)
            .unwrap_or(0);
        let wall_seconds = if opts.no_timing {
            0.0
        } else {
            started.elapsed().as_secs_f64()
        };

        let comp = outcome.component;
        for &id in &comp.support {
            active[id as usize] = false;
        }
        let tokens = match vocab {
            Some(v) => comp.support.iter().map(|&id| v.token(id).to_string()).collect(),
            None => Vec::new(),
        };
        // order of the problem the accepted solve actually ran on (safe
        // elimination at the accepted penalty)
        let reduced_n = working
            .iter()
            .filter(|&&id| cs.stats.variance(id) > outcome.lambda)
            .count();
        // a uniform loading is only suspicious when nothing was eliminated:
        // the whole active dictionary loading equally means no structure
        let degenerate = comp.degenerate && comp.cardinality >= working.len();
        components.push(ReportComponent {
            index: round + 1,
            support: comp.support,
            tokens,
            weights: comp.weights,
            explained_variance: comp.explained_variance,
            cardinality: comp.cardinality,
            lambda: outcome.lambda,
            phi: comp.phi_estimate,
            sweeps,
            solves: outcome.probes.len(),
            wall_seconds,
            hit_target_window: outcome.hit_window,
            degenerate,
        });
        screening.push(ScreeningRound {
            round: round + 1,
            original_n,
            reduced_n,
            lambda: outcome.lambda,
        });
    }

    Ok(PipelineReport {
        documents: cs.source.num_docs(),
        dictionary_size: w,
        components,
        screening,
        warning,
    })
}

// ----- single solve with trace -----

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TraceRow {
    pub sweep: usize,
    pub cumulative_row_updates: u64,
    pub objective: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolveReport {
    pub support: Vec<u32>,
    pub weights: Vec<f64>,
    pub explained_variance: f64,
    pub cardinality: usize,
    pub lambda: f64,
    pub phi: f64,
    pub sweeps: usize,
    pub original_n: usize,
    pub reduced_n: usize,
    pub degenerate: bool,
}

pub struct SolveRun {
    pub report: SolveReport,
    pub trace: Vec<TraceRow>,
}

/// Screens the matrix diagonal at `lambda`, solves the reduced problem and
/// extracts the component, recording the per-sweep convergence trace.
pub fn run_solve(
    cov: &CovarianceMatrix,
    lambda: f64,
    opts: &PipelineOptions,
) -> Result<SolveRun> {
    if !(lambda >= 0.0) {
        return Err(Error::Usage("lambda must be nonnegative".into()));
    }
    let keep: Vec<usize> = (0..cov.order())
        .filter(|&i| cov.values().get(i, i) > lambda)
        .collect();
    if keep.is_empty() {
        return Err(spca_core::Error::LambdaEliminatesAll {
            lambda,
            max_variance: cov.max_diag(),
        }
        .into());
    }
    let reduced = cov.restrict(&keep)?;
    let config = opts.solver_config(lambda);
    let started = Instant::now();
    let no_timing = opts.no_timing;
    let mut trace = Vec::new();
    let solution = solver::solve_with_observer(&reduced, &config, |info| {
        trace.push(TraceRow {
            sweep: info.sweep,
            cumulative_row_updates: info.row_updates,
            objective: info.objective,
            wall_seconds: if no_timing {
                0.0
            } else {
                started.elapsed().as_secs_f64()
            },
        });
    })?;
    let component = solver::extract_component(
        &solution.z,
        &reduced,
        opts.support_threshold,
        lambda,
        solution.phi,
    )?;
    let report = SolveReport {
        support: component.support,
        weights: component.weights,
        explained_variance: component.explained_variance,
        cardinality: component.cardinality,
        lambda,
        phi: solution.phi,
        sweeps: solution.state.sweeps_done(),
        original_n: cov.order(),
        reduced_n: reduced.order(),
        // only meaningful when screening removed nothing: everything
        // loading equally then says the matrix has no preferred direction
        degenerate: component.degenerate && reduced.order() == cov.order(),
    };
    Ok(SolveRun { report, trace })
}

// ----- CSV artifacts -----

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("sweep,cumulative_row_updates,objective,wall_seconds\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.sweep, r.cumulative_row_updates, r.objective, r.wall_seconds
        ));
    }
    out
}

/// Sorted variance profile: `rank,feature_id,variance`, descending.
pub fn variance_csv(stats: &FeatureStats) -> String {
    let mut out = String::from("rank,feature_id,variance\n");
    for (rank, &id) in stats.sorted_order().iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", rank + 1, id, stats.variance(id)));
    }
    out
}

/// Extracted component as emitted by `spca solve` (wrapper for callers that
/// need the core type).
pub fn component_of(report: &SolveReport) -> SparseComponent {
    SparseComponent {
        support: report.support.clone(),
        weights: report.weights.clone(),
        explained_variance: report.explained_variance,
        cardinality: report.cardinality,
        lambda_used: report.lambda,
        phi_estimate: report.phi,
        degenerate: report.degenerate,
    }
}
