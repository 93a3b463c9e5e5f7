//! Two-view ("tv") region embeddings.
//!
//! A tv-embedding `relu(W x + b)` is trained, ignoring document labels, to
//! predict the words of the regions adjacent to `x` through a disposable
//! linear head. The loss is a weighted square loss that only looks at the
//! target words plus `m` uniformly sampled negatives per example, so the
//! per-example cost does not depend on the word vocabulary size.

use crate::error::{contract, Error, Result};
use crate::kernels::{self, axpy, dot, ColMatrix, SparseColumns};
use crate::model::RegionEmbedding;
use crate::par::{self, Execution};
use crate::random;
use crate::text::{self, EncodedDocument, RegionSpec, SparseRegionVector, VocabKind};

use rand::Rng;

const GRAD_CHUNK: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct TvConfig {
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// Sampled negatives per example.
    pub negatives: usize,
    pub init_std: f64,
    pub exec: Execution,
}

impl Default for TvConfig {
    fn default() -> Self {
        TvConfig {
            seed: 1,
            epochs: 10,
            lr: 0.1,
            momentum: 0.9,
            batch_size: 100,
            negatives: 50,
            init_std: 0.01,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvExample {
    pub input: SparseRegionVector,
    /// Distinct in-vocabulary word ids of the adjacent regions, ascending.
    pub targets: Vec<u32>,
}

/// Words of `[pos − p, pos) ∪ [pos + p, pos + 2p)` clipped to the document.
fn adjacent_words(words: &EncodedDocument, pos: usize, p: usize) -> Vec<u32> {
    let len = words.len();
    let left = pos.saturating_sub(p)..pos.min(len);
    let right = (pos + p).min(len)..(pos + 2 * p).min(len);
    let mut ids: Vec<u32> = left.chain(right).filter_map(|i| words.token(i)).collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

fn check_views(input: &EncodedDocument, words: &EncodedDocument, spec: &RegionSpec) -> Result<()> {
    spec.check_doc(input)?;
    if words.kind() != VocabKind::Word {
        return Err(contract("tv targets must be encoded against a word vocabulary"));
    }
    if input.len() != words.len() {
        return Err(contract("tv input and target views differ in length"));
    }
    Ok(())
}

/// Training pairs for every region position of one document; positions
/// whose adjacent regions hold no in-vocabulary word are skipped.
pub fn make_tv_examples(input: &EncodedDocument, words: &EncodedDocument, spec: &RegionSpec) -> Result<Vec<TvExample>> {
    check_views(input, words, spec)?;
    Ok((0..spec.region_count(input.len()))
        .filter_map(|pos| {
            let targets = adjacent_words(words, pos, spec.region_size);
            (!targets.is_empty()).then(|| TvExample {
                input: text::region_vector_padded(input, pos, spec),
                targets,
            })
        })
        .collect())
}

/// `Σ_j w_j (pred_j − target_j)²` over the weighted dimensions only.
///
/// `targets` lists the dimensions whose target is 1; `weights` the nonzero
/// weights. Returns the loss and the gradient on the weighted dimensions.
pub fn weighted_square_loss(pred: &[f64], targets: &[u32], weights: &[(u32, f64)]) -> Result<(f64, Vec<(u32, f64)>)> {
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(weights.len());
    for &(j, w) in weights {
        let p = *pred
            .get(j as usize)
            .ok_or_else(|| contract(format!("weighted dimension {j} out of range {}", pred.len())))?;
        let t = if targets.contains(&j) { 1.0 } else { 0.0 };
        let (l, g) = square_term(p, t, w);
        loss += l;
        grad.push((j, g));
    }
    Ok((loss, grad))
}

#[inline]
fn square_term(pred: f64, target: f64, weight: f64) -> (f64, f64) {
    let diff = pred - target;
    (weight * diff * diff, 2.0 * weight * diff)
}

/// `m` distinct ids from `[0, vocab_size)` outside `targets` (sorted),
/// uniformly without replacement; all of them when fewer remain.
pub fn sample_negatives<R: Rng>(targets: &[u32], vocab_size: usize, m: usize, rng: &mut R) -> Vec<u32> {
    let free = vocab_size - targets.len();
    if free <= m {
        return (0..vocab_size as u32).filter(|j| targets.binary_search(j).is_err()).collect();
    }
    if m * 4 > free {
        let pool: Vec<u32> = (0..vocab_size as u32).filter(|j| targets.binary_search(j).is_err()).collect();
        return rand::seq::index::sample(rng, pool.len(), m).into_iter().map(|i| pool[i]).collect();
    }
    let mut out = Vec::with_capacity(m);
    while out.len() < m {
        let j = rng.random_range(0..vocab_size as u32);
        if targets.binary_search(&j).is_err() && !out.contains(&j) {
            out.push(j);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvOutcome {
    pub embedding: RegionEmbedding,
    /// Mean per-example loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

struct TvParams {
    emb: RegionEmbedding,
    head: ColMatrix,
    head_b: Vec<f64>,
}

struct TvGrads {
    w: SparseColumns,
    b: Vec<f64>,
    head: SparseColumns,
    head_b: Vec<f64>,
    loss: f64,
}

impl TvGrads {
    fn zeros(d: usize, v: usize) -> Self {
        TvGrads {
            w: SparseColumns::new(d),
            b: vec![0.0; d],
            head: SparseColumns::new(d),
            head_b: vec![0.0; v],
            loss: 0.0,
        }
    }

    fn add_assign(&mut self, o: &TvGrads) {
        self.w.add_assign(&o.w);
        axpy(1.0, &o.b, &mut self.b);
        self.head.add_assign(&o.head);
        axpy(1.0, &o.head_b, &mut self.head_b);
        self.loss += o.loss;
    }
}

impl TvParams {
    /// Adds one example's gradient to `g`.
    fn accumulate(&self, ex: &TvExample, negatives: &[u32], g: &mut TvGrads) -> Result<()> {
        let d = self.emb.dim();
        let h = self.emb.apply(&ex.input)?;
        let mut grad_h = vec![0.0; d];
        let dims = ex.targets.iter().map(|&j| (j, 1.0)).chain(negatives.iter().map(|&j| (j, 0.0)));
        for (j, target) in dims {
            let col = self.head.column(j as usize);
            let pred = dot(col, &h) + self.head_b[j as usize];
            let (l, gj) = square_term(pred, target, 1.0);
            g.loss += l;
            axpy(gj, &h, g.head.column_mut(j));
            g.head_b[j as usize] += gj;
            axpy(gj, col, &mut grad_h);
        }
        let grad_z = kernels::relu_grad(&h, &grad_h);
        kernels::sparse_affine_grad(&grad_z, &ex.input, &mut g.w, &mut g.b)
    }
}

/// Fits a tv-embedding of dimension `d_tv` over `spec`.
///
/// `inputs[i]` is document `i` encoded for `spec`; `words[i]` the same
/// document against the word vocabulary that defines the targets. Labels
/// are ignored.
pub fn train_tv(
    inputs: &[EncodedDocument],
    words: &[EncodedDocument],
    spec: &RegionSpec,
    d_tv: usize,
    config: &TvConfig,
) -> Result<TvOutcome> {
    if inputs.len() != words.len() {
        return Err(contract("tv input and target corpora differ in size"));
    }
    if config.negatives == 0 || config.batch_size == 0 {
        return Err(contract("tv training needs at least one negative and a positive batch size"));
    }
    let vocab_size = match words.first() {
        Some(w) => w.vocab_size(),
        None => return Err(Error::NoTvExamples),
    };
    let mut positions: Vec<(u32, u32)> = Vec::new();
    for (i, (input, w)) in inputs.iter().zip(words).enumerate() {
        check_views(input, w, spec)?;
        if w.vocab_size() != vocab_size {
            return Err(contract("target documents use different word vocabularies"));
        }
        for pos in 0..spec.region_count(input.len()) {
            if !adjacent_words(w, pos, spec.region_size).is_empty() {
                positions.push((i as u32, pos as u32));
            }
        }
    }
    if positions.is_empty() {
        return Err(Error::NoTvExamples);
    }

    let mut params = TvParams {
        emb: init_embedding(spec, d_tv, config.init_std, config.seed)?,
        head: ColMatrix::zeros(d_tv, vocab_size),
        head_b: vec![0.0; vocab_size],
    };
    let mut rng = random::rng_for(config.seed, 1, 0);
    random::fill_gaussian(params.head.as_mut_slice(), config.init_std, &mut rng);
    random::fill_gaussian(&mut params.head_b, config.init_std, &mut rng);

    let mut v_w = ColMatrix::zeros(d_tv, spec.input_dim());
    let mut v_b = vec![0.0; d_tv];
    let mut v_head = ColMatrix::zeros(d_tv, vocab_size);
    let mut v_head_b = vec![0.0; vocab_size];

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let order = random::permutation(positions.len(), &mut random::rng_for(config.seed, 2, epoch as u64));
        let mut epoch_loss = 0.0;
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            let base = batch_no * config.batch_size;
            let items: Vec<(usize, usize)> = batch.iter().enumerate().map(|(i, &o)| (base + i, o)).collect();
            let partials = par::map_chunks(config.exec, &items, GRAD_CHUNK, |chunk| -> Result<TvGrads> {
                let mut g = TvGrads::zeros(d_tv, vocab_size);
                for &(slot, o) in chunk {
                    let (doc, pos) = positions[o];
                    let (input, w) = (&inputs[doc as usize], &words[doc as usize]);
                    let ex = TvExample {
                        input: text::region_vector_padded(input, pos as usize, spec),
                        targets: adjacent_words(w, pos as usize, spec.region_size),
                    };
                    let mut rng = random::rng_for(config.seed, 3 + epoch as u64, slot as u64);
                    let negatives = sample_negatives(&ex.targets, vocab_size, config.negatives, &mut rng);
                    params.accumulate(&ex, &negatives, &mut g)?;
                }
                Ok(g)
            });
            let mut total = TvGrads::zeros(d_tv, vocab_size);
            for p in partials {
                total.add_assign(&p?);
            }
            if !total.loss.is_finite() {
                return Err(Error::NonFinite {
                    epoch: epoch + 1,
                    batch: batch_no + 1,
                });
            }
            epoch_loss += total.loss;
            let scale = 1.0 / batch.len() as f64;
            total.w.scale(scale);
            total.b.iter_mut().for_each(|x| *x *= scale);
            total.head.scale(scale);
            total.head_b.iter_mut().for_each(|x| *x *= scale);

            let (lr, mu) = (config.lr, config.momentum);
            kernels::momentum_step_sparse(&mut params.emb.weight, &mut v_w, &total.w, lr, mu)?;
            kernels::momentum_step(&mut params.emb.bias, &mut v_b, &total.b, lr, mu)?;
            kernels::momentum_step_sparse(&mut params.head, &mut v_head, &total.head, lr, mu)?;
            kernels::momentum_step(&mut params.head_b, &mut v_head_b, &total.head_b, lr, mu)?;
        }
        let mean = epoch_loss / positions.len() as f64;
        log::info!("tv epoch={} loss={mean:.6}", epoch + 1);
        epoch_losses.push(mean);
    }
    Ok(TvOutcome {
        embedding: params.emb,
        epoch_losses,
    })
}

/// The Gaussian starting point [`train_tv`] uses for `seed`.
pub fn init_embedding(spec: &RegionSpec, d_tv: usize, std: f64, seed: u64) -> Result<RegionEmbedding> {
    let mut emb = RegionEmbedding::zeros(*spec, 0, d_tv)?;
    let mut rng = random::rng_for(seed, 0, 0);
    random::fill_gaussian(emb.weight.as_mut_slice(), std, &mut rng);
    random::fill_gaussian(&mut emb.bias, std, &mut rng);
    Ok(emb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{build_vocab, encode, Representation, VocabKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ids(xs: &[u32]) -> Vec<Option<u32>> {
        xs.iter().map(|&x| Some(x)).collect()
    }

    #[test]
    fn adjacency_examples() {
        let d = EncodedDocument::from_word_ids(0, 10, ids(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9])).unwrap();
        let spec = RegionSpec::new(Representation::BowWord, 5, 10).unwrap();
        let exs = make_tv_examples(&d, &d, &spec).unwrap();
        assert_eq!(exs.len(), 6);
        assert_eq!(exs[2].input.indices(), &[2, 3, 4, 5, 6]);
        assert_eq!(exs[2].targets, vec![0, 1, 7, 8, 9]);

        let short = EncodedDocument::from_word_ids(0, 10, ids(&[0, 1, 2, 3, 4])).unwrap();
        assert!(make_tv_examples(&short, &short, &spec).unwrap().is_empty());

        let corpus = vec![vec!["a", "b", "c", "d"].into_iter().map(String::from).collect::<Vec<_>>()];
        let v = build_vocab(&corpus, VocabKind::Word, 10).unwrap();
        let d = encode(&corpus[0], &v, 0);
        let spec = RegionSpec::new(Representation::BowWord, 1, v.len()).unwrap();
        let exs = make_tv_examples(&d, &d, &spec).unwrap();
        let want: Vec<u32> = ["a", "c"].iter().map(|w| v.id(w).unwrap()).collect();
        assert_eq!(exs[1].targets, want);
    }

    #[test]
    fn square_loss_examples() {
        let (l, g) = weighted_square_loss(&[0.5], &[0], &[(0, 2.0)]).unwrap();
        assert_eq!(l, 0.5);
        assert_eq!(g, vec![(0, -2.0)]);
        let (l, g) = weighted_square_loss(&[0.3, 0.9], &[1], &[]).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.is_empty());
        let (l, _) = weighted_square_loss(&[1.0, 0.0, 7.0], &[0], &[(0, 1.0), (1, 3.0)]).unwrap();
        assert_eq!(l, 0.0);
        assert!(weighted_square_loss(&[1.0], &[0], &[(4, 1.0)]).is_err());
    }

    #[test]
    fn square_loss_grad_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = 1e-5;
        for _ in 0..50 {
            let pred: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
            let targets = vec![1, 4];
            let weights = vec![(1, 1.0), (2, 0.5), (4, 2.0), (6, 1.5)];
            let (_, grad) = weighted_square_loss(&pred, &targets, &weights).unwrap();
            for &(j, g) in &grad {
                let mut p = pred.clone();
                p[j as usize] += h;
                let mut m = pred.clone();
                m[j as usize] -= h;
                let fd = (weighted_square_loss(&p, &targets, &weights).unwrap().0
                    - weighted_square_loss(&m, &targets, &weights).unwrap().0)
                    / (2.0 * h);
                assert!((g - fd).abs() / g.abs().max(fd.abs()).max(1e-6) < 1e-6);
            }
        }
    }

    #[test]
    fn negatives_avoid_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let targets = vec![0, 3, 7];
            let n = sample_negatives(&targets, 40, 10, &mut rng);
            assert_eq!(n.len(), 10);
            let mut s = n.clone();
            s.sort();
            s.dedup();
            assert_eq!(s.len(), 10);
            assert!(n.iter().all(|j| *j < 40 && !targets.contains(j)));
        }
        assert_eq!(sample_negatives(&[1], 4, 10, &mut rng), vec![0, 2, 3]);
        assert_eq!(sample_negatives(&[1], 8, 6, &mut rng).len(), 6);
    }

    fn markov_corpus(n_docs: usize, len: usize, vocab: u32, seed: u64) -> Vec<EncodedDocument> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_docs)
            .map(|_| {
                let start = rng.random_range(0..vocab);
                let doc = (0..len as u32).map(|i| Some((start + i) % vocab)).collect();
                EncodedDocument::from_word_ids(rng.random_range(0..2), vocab as usize, doc).unwrap()
            })
            .collect()
    }

    #[test]
    fn zero_learning_rate_keeps_initialization() {
        let docs = markov_corpus(20, 12, 30, 1);
        let spec = RegionSpec::new(Representation::BowWord, 2, 30).unwrap();
        let cfg = TvConfig {
            lr: 0.0,
            epochs: 2,
            negatives: 5,
            ..TvConfig::default()
        };
        let out = train_tv(&docs, &docs, &spec, 4, &cfg).unwrap();
        assert_eq!(out.embedding, init_embedding(&spec, 4, 0.01, cfg.seed).unwrap());
    }

    #[test]
    fn training_is_reproducible_and_label_blind() {
        let docs = markov_corpus(30, 15, 25, 2);
        let spec = RegionSpec::new(Representation::BowWord, 3, 25).unwrap();
        let cfg = TvConfig {
            epochs: 2,
            negatives: 5,
            batch_size: 16,
            ..TvConfig::default()
        };
        let a = train_tv(&docs, &docs, &spec, 6, &cfg).unwrap();
        let b = train_tv(&docs, &docs, &spec, 6, &cfg).unwrap();
        assert_eq!(a, b);
        let relabeled: Vec<EncodedDocument> = docs
            .iter()
            .map(|d| {
                let mut d = d.clone();
                d.label += 7;
                d
            })
            .collect();
        let c = train_tv(&relabeled, &relabeled, &spec, 6, &cfg).unwrap();
        assert_eq!(a, c);
        let seq = train_tv(&docs, &docs, &spec, 6, &TvConfig { exec: Execution::Sequential, ..cfg }).unwrap();
        assert_eq!(a, seq);
    }

    #[test]
    fn loss_decreases_on_markov_corpus() {
        let docs = markov_corpus(100, 20, 40, 3);
        let spec = RegionSpec::new(Representation::BowWord, 3, 40).unwrap();
        let cfg = TvConfig {
            epochs: 5,
            negatives: 10,
            lr: 0.5,
            init_std: 0.1,
            ..TvConfig::default()
        };
        let out = train_tv(&docs, &docs, &spec, 8, &cfg).unwrap();
        assert!(out.epoch_losses[4] < out.epoch_losses[0], "{:?}", out.epoch_losses);
    }

    #[test]
    fn empty_streams_are_errors() {
        let spec = RegionSpec::new(Representation::BowWord, 5, 10).unwrap();
        assert!(matches!(train_tv(&[], &[], &spec, 4, &TvConfig::default()), Err(Error::NoTvExamples)));
        let short = EncodedDocument::from_word_ids(0, 10, ids(&[1, 2, 3])).unwrap();
        let r = train_tv(std::slice::from_ref(&short), std::slice::from_ref(&short), &spec, 4, &TvConfig::default());
        assert!(matches!(r, Err(Error::NoTvExamples)));
    }
}
