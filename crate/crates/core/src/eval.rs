//! Error rates, inference timing, and the vocabulary-size independence
//! benchmark.

use std::fmt;
use std::hint::black_box;
use std::time::Instant;

use crate::error::{contract, Error, Result};
use crate::kernels;
use crate::model::{Example, Mode, ModelTemplate, PreparedDoc, ShallowModel};
use crate::par::{self, Execution};
use crate::random;
use crate::text::{EncodedDocument, Representation, VocabKind, Vocabulary};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n_docs: usize,
    pub n_errors: usize,
    pub error_rate_percent: f64,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<usize>>,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        1.0 - self.n_errors as f64 / self.n_docs as f64
    }

    fn from_pairs(num_classes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut confusion = vec![vec![0; num_classes]; num_classes];
        let mut n_docs = 0;
        let mut n_errors = 0;
        for (truth, pred) in pairs {
            if truth >= num_classes {
                return Err(Error::Data(format!("label {truth} out of range for {num_classes} classes")));
            }
            confusion[truth][pred] += 1;
            n_docs += 1;
            n_errors += usize::from(truth != pred);
        }
        if n_docs == 0 {
            return Err(Error::Data("empty test set".into()));
        }
        Ok(EvalReport {
            n_docs,
            n_errors,
            error_rate_percent: 100.0 * n_errors as f64 / n_docs as f64,
            confusion,
        })
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n_docs={}", self.n_docs)?;
        writeln!(f, "n_errors={}", self.n_errors)?;
        writeln!(f, "error_rate_percent={:.4}", self.error_rate_percent)?;
        for (c, row) in self.confusion.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(usize::to_string).collect();
            writeln!(f, "confusion_{c}={}", cells.join(","))?;
        }
        Ok(())
    }
}

pub fn evaluate(model: &ShallowModel, test: &[Example]) -> Result<EvalReport> {
    evaluate_with(Execution::default(), model, test)
}

pub fn evaluate_with(exec: Execution, model: &ShallowModel, test: &[Example]) -> Result<EvalReport> {
    let preds = par::map(exec, test, |ex| -> Result<(usize, usize)> {
        let doc = model.prepare(ex)?;
        Ok((ex.label, model.predict(&doc)?))
    });
    EvalReport::from_pairs(model.num_classes(), preds.into_iter().collect::<Result<Vec<_>>>()?)
}

pub fn evaluate_prepared(exec: Execution, model: &ShallowModel, test: &[PreparedDoc]) -> Result<EvalReport> {
    let preds = par::map(exec, test, |doc| -> Result<(usize, usize)> { Ok((doc.label, model.predict(doc)?)) });
    EvalReport::from_pairs(model.num_classes(), preds.into_iter().collect::<Result<Vec<_>>>()?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub n_docs: usize,
    pub repetitions: usize,
    /// Median over repetitions of the time spent in forward passes.
    pub total_seconds: f64,
    pub docs_per_second: f64,
    /// Time spent building region vectors, outside the timed section.
    pub prepare_seconds: f64,
    pub rep_seconds: Vec<f64>,
}

impl fmt::Display for TimingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n_docs={}", self.n_docs)?;
        writeln!(f, "repetitions={}", self.repetitions)?;
        writeln!(f, "total_seconds={:.6}", self.total_seconds)?;
        writeln!(f, "docs_per_second={:.1}", self.docs_per_second)?;
        writeln!(f, "prepare_seconds_excluded={:.6}", self.prepare_seconds)
    }
}

pub(crate) fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Times inference forward passes over pre-materialized documents on the
/// calling thread. Vocabulary lookups and region-vector construction happen
/// before this is called and are not part of the measurement.
pub fn time_inference(model: &ShallowModel, docs: &[PreparedDoc], repetitions: usize) -> Result<TimingReport> {
    let reps = repetitions.max(1);
    let mut rep_seconds = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        for doc in docs {
            black_box(model.forward(black_box(doc), Mode::Infer)?.logits);
        }
        rep_seconds.push(start.elapsed().as_secs_f64());
    }
    let total_seconds = median(&rep_seconds);
    Ok(TimingReport {
        n_docs: docs.len(),
        repetitions: reps,
        total_seconds,
        docs_per_second: if total_seconds > 0.0 { docs.len() as f64 / total_seconds } else { f64::INFINITY },
        prepare_seconds: 0.0,
        rep_seconds,
    })
}

/// [`time_inference`] on encoded examples, reporting the excluded
/// preparation time separately.
pub fn time_inference_examples(model: &ShallowModel, examples: &[Example], repetitions: usize) -> Result<TimingReport> {
    let start = Instant::now();
    let docs = examples.iter().map(|ex| model.prepare(ex)).collect::<Result<Vec<_>>>()?;
    let prepare_seconds = start.elapsed().as_secs_f64();
    let mut report = time_inference(model, &docs, repetitions)?;
    report.prepare_seconds = prepare_seconds;
    Ok(report)
}

/// Forward pass that expands each region into a dense input vector and
/// multiplies by every column of `W`. Produces the same logits as
/// [`ShallowModel::forward`] for base models, at `O(d · n)` per region;
/// used only as a timing control.
pub fn dense_forward(model: &ShallowModel, doc: &PreparedDoc) -> Result<Vec<f64>> {
    if !model.tvs.is_empty() {
        return Err(contract("dense control supports base models only"));
    }
    let d = model.dim();
    let k = model.pooling_k;
    let w = &model.base.weight;
    let r_total = doc.regions();
    let mut pooled = vec![f64::NEG_INFINITY; k * d];
    let mut x = vec![0.0; w.cols()];
    let mut h = vec![0.0; d];
    for u in 0..k {
        let unit = crate::model::pooling_unit(u, r_total, k);
        if unit.is_empty() {
            pooled[u * d..(u + 1) * d].fill(0.0);
        }
        for r in unit {
            x.fill(0.0);
            for (j, v) in doc.base[r].iter() {
                x[j as usize] = v;
            }
            h.copy_from_slice(&model.base.bias);
            for (j, &xj) in x.iter().enumerate() {
                let col = w.column(j);
                for (hc, wc) in h.iter_mut().zip(col) {
                    *hc += wc * xj;
                }
            }
            kernels::relu_in_place(&mut h);
            for (p, &v) in pooled[u * d..(u + 1) * d].iter_mut().zip(&h) {
                *p = p.max(v);
            }
        }
    }
    let mut logits = model.top_b.clone();
    model.top_w.matvec_acc(&pooled, &mut logits);
    Ok(logits)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceReport {
    pub vocab_small: usize,
    pub vocab_large: usize,
    pub nnz_per_region: usize,
    pub sparse_small_seconds: f64,
    pub sparse_large_seconds: f64,
    /// `sparse_large / sparse_small`
    pub ratio: f64,
    pub dense_small_seconds: f64,
    pub dense_large_seconds: f64,
    pub dense_ratio: f64,
}

impl fmt::Display for IndependenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "vocab_small={}", self.vocab_small)?;
        writeln!(f, "vocab_large={}", self.vocab_large)?;
        writeln!(f, "nnz_per_region={}", self.nnz_per_region)?;
        writeln!(f, "sparse_small_seconds={:.3e}", self.sparse_small_seconds)?;
        writeln!(f, "sparse_large_seconds={:.3e}", self.sparse_large_seconds)?;
        writeln!(f, "ratio={:.3}", self.ratio)?;
        writeln!(f, "dense_small_seconds={:.3e}", self.dense_small_seconds)?;
        writeln!(f, "dense_large_seconds={:.3e}", self.dense_large_seconds)?;
        writeln!(f, "dense_ratio={:.3}", self.dense_ratio)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceConfig {
    pub dim: usize,
    pub region_size: usize,
    pub vocab_small: usize,
    pub vocab_large: usize,
    /// Token ids in `[0, vocab_small)`; the same pattern is spread over the
    /// large vocabulary so both documents have identical nonzero counts.
    pub pattern: Vec<u32>,
    pub repetitions: usize,
    /// Forward passes per timed repetition.
    pub inner: usize,
    pub dense_repetitions: usize,
    pub seed: u64,
}

impl Default for IndependenceConfig {
    fn default() -> Self {
        IndependenceConfig {
            dim: 500,
            region_size: 3,
            vocab_small: 1_000,
            vocab_large: 100_000,
            pattern: (0..100u32).map(|i| (i * 37 + 11) % 1_000).collect(),
            repetitions: 100,
            inner: 5,
            dense_repetitions: 3,
            seed: 1,
        }
    }
}

/// Vocabulary of `n` synthetic items in valid rank order.
pub fn synthetic_vocab(n: usize) -> Vocabulary {
    let entries = (0..n).map(|i| (format!("w{i:09}"), (n - i) as u64)).collect();
    Vocabulary::from_entries(VocabKind::Word, entries).expect("ranked by construction")
}

struct BenchModel {
    model: ShallowModel,
    doc: PreparedDoc,
    control_doc: PreparedDoc,
}

fn bench_model(cfg: &IndependenceConfig, vocab_size: usize) -> Result<BenchModel> {
    let spread = (vocab_size / cfg.vocab_small).max(1) as u32;
    let ids: Vec<Option<u32>> = cfg.pattern.iter().map(|&t| Some(t * spread)).collect();
    let template = ModelTemplate::new(synthetic_vocab(vocab_size), Representation::ConcatOneHot, cfg.dim, 2);
    let mut model = template.instantiate(cfg.region_size, 1)?;
    // Only the columns the document reads are given values; the rest stay
    // as untouched zero pages.
    let mut rng = random::rng_for(cfg.seed, 0, 0);
    let mut cols: Vec<usize> = Vec::new();
    for slot in 0..cfg.region_size {
        for id in ids.iter().flatten() {
            cols.push(slot * vocab_size + *id as usize);
        }
    }
    cols.sort_unstable();
    cols.dedup();
    for c in cols {
        random::fill_gaussian(model.base.weight.column_mut(c), 0.01, &mut rng);
    }
    random::fill_gaussian(model.top_w.as_mut_slice(), 0.01, &mut rng);
    let enc = EncodedDocument::from_word_ids(0, vocab_size, ids.clone())?;
    let doc = model.prepare(&Example { label: 0, views: vec![enc] })?;
    let short = EncodedDocument::from_word_ids(0, vocab_size, ids[..cfg.region_size.min(ids.len())].to_vec())?;
    let control_doc = model.prepare(&Example { label: 0, views: vec![short] })?;
    Ok(BenchModel { model, doc, control_doc })
}

fn time_median<F: FnMut() -> Result<()>>(reps: usize, inner: usize, mut f: F) -> Result<f64> {
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps.max(1) {
        let start = Instant::now();
        for _ in 0..inner.max(1) {
            f()?;
        }
        times.push(start.elapsed().as_secs_f64() / inner.max(1) as f64);
    }
    Ok(median(&times))
}

/// Median forward time of one document under a small and a large
/// vocabulary with identical nonzeros per region, for the sparse model and
/// for the dense control.
pub fn vocab_independence_bench(cfg: &IndependenceConfig) -> Result<IndependenceReport> {
    if cfg.pattern.iter().any(|&t| t as usize >= cfg.vocab_small) || cfg.vocab_large < cfg.vocab_small {
        return Err(contract("pattern ids must lie in the small vocabulary, which must not exceed the large one"));
    }
    let models = [bench_model(cfg, cfg.vocab_small)?, bench_model(cfg, cfg.vocab_large)?];
    let nnz = models[1].doc.base.iter().map(|x| x.nnz()).max().unwrap_or(0);
    for bm in &models {
        bm.model.forward(&bm.doc, Mode::Infer)?;
    }
    // Small and large runs alternate so that background noise hits both.
    let mut times = [
        Vec::with_capacity(cfg.repetitions),
        Vec::with_capacity(cfg.repetitions),
    ];
    for _ in 0..cfg.repetitions.max(1) {
        for (bm, t) in models.iter().zip(times.iter_mut()) {
            t.push(time_median(1, cfg.inner, || {
                black_box(bm.model.forward(black_box(&bm.doc), Mode::Infer)?);
                Ok(())
            })?);
        }
    }
    let sparse = [median(&times[0]), median(&times[1])];
    let mut dense = [0.0; 2];
    for (bm, d) in models.iter().zip(dense.iter_mut()) {
        *d = time_median(cfg.dense_repetitions, 1, || {
            black_box(dense_forward(&bm.model, black_box(&bm.control_doc))?);
            Ok(())
        })?;
        // The control sees a single region; scale to the full document.
        *d *= bm.doc.regions() as f64 / bm.control_doc.regions() as f64;
    }
    Ok(IndependenceReport {
        vocab_small: cfg.vocab_small,
        vocab_large: cfg.vocab_large,
        nnz_per_region: nnz,
        sparse_small_seconds: sparse[0],
        sparse_large_seconds: sparse[1],
        ratio: sparse[1] / sparse[0],
        dense_small_seconds: dense[0],
        dense_large_seconds: dense[1],
        dense_ratio: dense[1] / dense[0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::build_vocab;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn constant_model(classes: usize) -> ShallowModel {
        let vocab = build_vocab(&[toks("a b c")], VocabKind::Word, 10).unwrap();
        let t = ModelTemplate::new(vocab, Representation::BowWord, 2, classes);
        let mut m = t.instantiate(1, 1).unwrap();
        m.top_b[0] = 1.0;
        m
    }

    #[test]
    fn error_rate_examples() {
        let m = constant_model(3);
        let all_zero: Vec<Example> = (0..4).map(|_| m.encode(&toks("a b"), 0)).collect();
        assert_eq!(evaluate(&m, &all_zero).unwrap().error_rate_percent, 0.0);

        let mut one_wrong = all_zero.clone();
        one_wrong[2].label = 1;
        one_wrong[2].views[0].label = 1;
        let r = evaluate(&m, &one_wrong).unwrap();
        assert_eq!(r.error_rate_percent, 25.0);
        assert_eq!(r.confusion[1][0], 1);

        let balanced: Vec<Example> = (0..30).map(|i| m.encode(&toks("c"), i % 3)).collect();
        let r = evaluate(&m, &balanced).unwrap();
        assert!((r.error_rate_percent - 200.0 / 3.0).abs() < 1e-9);
        for (c, row) in r.confusion.iter().enumerate() {
            assert_eq!(row.iter().sum::<usize>(), 10, "class {c}");
        }
        assert!(evaluate(&m, &[]).is_err());
    }

    #[test]
    fn median_is_robust() {
        assert_eq!(median(&[3.0, 1.0, 100.0]), 3.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), 2.5);
    }

    #[test]
    fn single_forward_is_timed() {
        let m = constant_model(2);
        let doc = m.prepare(&m.encode(&toks("a b c"), 0)).unwrap();
        let r = time_inference(&m, &[doc], 1).unwrap();
        assert_eq!(r.n_docs, 1);
        assert_eq!(r.rep_seconds.len(), 1);
        assert!(r.total_seconds > 0.0);
    }

    #[test]
    fn dense_control_matches_sparse_forward() {
        let cfg = IndependenceConfig {
            dim: 16,
            vocab_small: 50,
            vocab_large: 50,
            pattern: vec![1, 5, 7, 49, 0, 3],
            ..IndependenceConfig::default()
        };
        let mut bm = bench_model(&cfg, 50).unwrap();
        bm.model.pooling_k = 1;
        let a = bm.model.logits(&bm.doc).unwrap();
        let b = dense_forward(&bm.model, &bm.doc).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_vocabularies_time_alike() {
        let cfg = IndependenceConfig {
            dim: 64,
            vocab_small: 200,
            vocab_large: 200,
            pattern: (0..40).collect(),
            repetitions: 31,
            ..IndependenceConfig::default()
        };
        let r = vocab_independence_bench(&cfg).unwrap();
        assert!(r.ratio > 0.5 && r.ratio < 2.0, "{r}");
    }
}
