//! Supervised training: holdout split, mini-batch SGD with classical
//! momentum, one-step learning-rate decay, dropout and top-layer L2, and
//! grid model selection on validation error.

use std::fmt;
use std::time::Instant;

use crate::error::{contract, Error, Result};
use crate::eval;
use crate::kernels::{self, ColMatrix, DenseMatrix};
use crate::model::{Example, Gradients, Mode, ModelTemplate, PreparedDoc, ShallowModel};
use crate::par::{self, Execution};
use crate::random;

/// Documents per gradient work unit. Fixed so the reduction order, and
/// therefore the trained weights, do not depend on the thread count.
const GRAD_CHUNK: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Last epoch run at the initial learning rate.
    pub decay_epoch: usize,
    pub decay_factor: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub init_std: f64,
    pub dropout: f64,
    pub top_l2: f64,
    pub initial_lr: f64,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            decay_epoch: 24,
            decay_factor: 0.1,
            momentum: 0.9,
            batch_size: 100,
            init_std: 0.01,
            dropout: 0.5,
            top_l2: 0.0001,
            initial_lr: 0.1,
            seed: 1,
            exec: Execution::default(),
        }
    }
}

impl TrainConfig {
    /// Longer schedule for small training sets.
    pub fn small_data() -> Self {
        TrainConfig {
            epochs: 100,
            decay_epoch: 80,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.decay_epoch == 0 || self.decay_epoch > self.epochs {
            return Err(Error::Config(format!(
                "need 1 <= decay_epoch ({}) <= epochs ({})",
                self.decay_epoch, self.epochs
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must be in [0, 1)".into()));
        }
        let non_negative = [
            ("decay_factor", self.decay_factor),
            ("momentum", self.momentum),
            ("init_std", self.init_std),
            ("top_l2", self.top_l2),
            ("initial_lr", self.initial_lr),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

/// Learning rate for 1-based `epoch`: the initial rate through
/// `decay_epoch`, multiplied by `decay_factor` afterwards.
pub fn lr_at_epoch(config: &TrainConfig, epoch: usize) -> f64 {
    if epoch <= config.decay_epoch {
        config.initial_lr
    } else {
        config.initial_lr * config.decay_factor
    }
}

/// Validation size used when none is configured: 10,000 documents for
/// training sets above 100,000, otherwise 10%.
pub fn default_holdout(n: usize) -> usize {
    if n > 100_000 {
        10_000
    } else {
        n / 10
    }
}

/// Seeded shuffle; the last `n_holdout` items become the validation set.
pub fn holdout_split<T: Clone>(data: &[T], n_holdout: usize, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if n_holdout >= data.len() {
        return Err(Error::Data(format!(
            "cannot hold out {n_holdout} of {} documents",
            data.len()
        )));
    }
    let order = random::permutation(data.len(), &mut random::rng_for(seed, 0xB01D, 0));
    let cut = data.len() - n_holdout;
    let train = order[..cut].iter().map(|&i| data[i].clone()).collect();
    let valid = order[cut..].iter().map(|&i| data[i].clone()).collect();
    Ok((train, valid))
}

/// Momentum buffers for every trainable parameter of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Momentum {
    base_w: ColMatrix,
    base_b: Vec<f64>,
    fusion: Vec<DenseMatrix>,
    top_w: DenseMatrix,
    top_b: Vec<f64>,
}

impl Momentum {
    pub fn zeros(model: &ShallowModel) -> Self {
        Momentum {
            base_w: ColMatrix::zeros(model.base.weight.rows(), model.base.weight.cols()),
            base_b: vec![0.0; model.dim()],
            fusion: model
                .tvs
                .iter()
                .map(|t| DenseMatrix::zeros(t.fusion.rows(), t.fusion.cols()))
                .collect(),
            top_w: DenseMatrix::zeros(model.top_w.rows(), model.top_w.cols()),
            top_b: vec![0.0; model.num_classes()],
        }
    }

    /// One classical momentum step over all trainable parameters.
    /// tv-embeddings are not touched.
    pub fn step(&mut self, model: &mut ShallowModel, grads: &Gradients, lr: f64, momentum: f64) -> Result<()> {
        if self.fusion.len() != model.tvs.len() || grads.fusion.len() != model.tvs.len() {
            return Err(contract("momentum state does not match the model"));
        }
        kernels::momentum_step_sparse(&mut model.base.weight, &mut self.base_w, &grads.base_w, lr, momentum)?;
        kernels::momentum_step(&mut model.base.bias, &mut self.base_b, &grads.base_b, lr, momentum)?;
        for ((tv, v), g) in model.tvs.iter_mut().zip(&mut self.fusion).zip(&grads.fusion) {
            kernels::momentum_step(tv.fusion.as_mut_slice(), v.as_mut_slice(), g.as_slice(), lr, momentum)?;
        }
        kernels::momentum_step(model.top_w.as_mut_slice(), self.top_w.as_mut_slice(), grads.top_w.as_slice(), lr, momentum)?;
        kernels::momentum_step(&mut model.top_b, &mut self.top_b, &grads.top_b, lr, momentum)
    }
}

/// Draws every trainable parameter from N(0, std²); tv-embeddings keep
/// their values.
pub fn initialize(model: &mut ShallowModel, std: f64, seed: u64) {
    let mut rng = random::rng_for(seed, 0x1A17, 0);
    random::fill_gaussian(model.base.weight.as_mut_slice(), std, &mut rng);
    random::fill_gaussian(&mut model.base.bias, std, &mut rng);
    for tv in &mut model.tvs {
        random::fill_gaussian(tv.fusion.as_mut_slice(), std, &mut rng);
    }
    random::fill_gaussian(model.top_w.as_mut_slice(), std, &mut rng);
    random::fill_gaussian(&mut model.top_b, std, &mut rng);
}

fn l2_penalty(model: &ShallowModel, lambda: f64) -> f64 {
    lambda * model.top_w.as_slice().iter().map(|w| w * w).sum::<f64>()
}

/// Prints a float with at most 10 significant digits, dropping trailing zeros.
struct Short(f64);

impl fmt::Display for Short {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = format!("{:.9e}", self.0);
        let back: f64 = s.parse().map_err(|_| fmt::Error)?;
        write!(f, "{back}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    /// Mean cross-entropy plus the top-layer L2 penalty.
    pub train_loss: f64,
    /// Validation error in percent, when a validation set exists.
    pub val_error: Option<f64>,
    pub elapsed_seconds: f64,
}

impl fmt::Display for EpochMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "epoch={} lr={} train_loss={:.6} val_error=", self.epoch, Short(self.lr), self.train_loss)?;
        match self.val_error {
            Some(e) => write!(f, "{e:.4}")?,
            None => f.write_str("na")?,
        }
        write!(f, " elapsed={:.3}", self.elapsed_seconds)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: ShallowModel,
    pub metrics: Vec<EpochMetrics>,
}

/// Gradient and summed loss of a mini-batch, reduced in document order.
fn batch_gradient(
    model: &ShallowModel,
    docs: &[PreparedDoc],
    batch: &[(u64, usize)],
    exec: Execution,
) -> Result<(Gradients, f64)> {
    let partials = par::map_chunks(exec, batch, GRAD_CHUNK, |chunk| -> Result<(Gradients, f64)> {
        let mut g = Gradients::zeros(model);
        let mut loss = 0.0;
        for &(dropout_seed, i) in chunk {
            loss += model.loss_and_grad(&docs[i], Mode::Train { seed: dropout_seed }, &mut g)?;
        }
        Ok((g, loss))
    });
    let mut total = Gradients::zeros(model);
    let mut loss = 0.0;
    for p in partials {
        let (g, l) = p?;
        total.add_assign(&g);
        loss += l;
    }
    Ok((total, loss))
}

pub fn prepare_all(exec: Execution, model: &ShallowModel, examples: &[Example]) -> Result<Vec<PreparedDoc>> {
    par::map(exec, examples, |ex| model.prepare(ex)).into_iter().collect()
}

/// Trains `model` from a fresh Gaussian initialization. Its tv-embeddings
/// must already be trained; they stay frozen.
pub fn train(mut model: ShallowModel, config: &TrainConfig, train_set: &[Example], valid: &[Example]) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    model.dropout = config.dropout;
    model.validate()?;
    initialize(&mut model, config.init_std, config.seed);

    let docs = prepare_all(config.exec, &model, train_set)?;
    let valid_docs = prepare_all(config.exec, &model, valid)?;
    let n = docs.len();
    let mut momentum = Momentum::zeros(&model);
    let mut metrics = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let start = Instant::now();
        let lr = lr_at_epoch(config, epoch);
        let order = random::permutation(n, &mut random::rng_for(config.seed, 0x5EED, epoch as u64));
        let mut xent_sum = 0.0;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<(u64, usize)> = idx
                .iter()
                .enumerate()
                .map(|(j, &i)| {
                    let slot = (b * config.batch_size + j) as u64;
                    (random::mix_seed(config.seed, epoch as u64, slot), i)
                })
                .collect();
            let (mut grads, loss) = batch_gradient(&model, &docs, &batch, config.exec)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite { epoch, batch: b + 1 });
            }
            xent_sum += loss;
            grads.scale(1.0 / batch.len() as f64);
            if config.top_l2 > 0.0 {
                kernels::axpy(2.0 * config.top_l2, model.top_w.as_slice(), grads.top_w.as_mut_slice());
            }
            momentum.step(&mut model, &grads, lr, config.momentum)?;
        }
        let train_loss = xent_sum / n as f64 + l2_penalty(&model, config.top_l2);
        if !train_loss.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                batch: n.div_ceil(config.batch_size),
            });
        }
        let val_error = if valid_docs.is_empty() {
            None
        } else {
            Some(eval::evaluate_prepared(config.exec, &model, &valid_docs)?.error_rate_percent)
        };
        let m = EpochMetrics {
            epoch,
            lr,
            train_loss,
            val_error,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        };
        log::info!("{m}");
        metrics.push(m);
    }
    Ok(TrainOutcome { model, metrics })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionGrid {
    pub region_sizes: Vec<usize>,
    pub pooling_ks: Vec<usize>,
    pub initial_lrs: Vec<f64>,
}

impl SelectionGrid {
    pub const DEFAULT_LRS: [f64; 4] = [0.25, 0.1, 0.05, 0.01];

    /// Sentiment tasks pool the whole document into one unit.
    pub fn sentiment() -> Self {
        SelectionGrid {
            region_sizes: vec![3, 5],
            pooling_ks: vec![1],
            initial_lrs: Self::DEFAULT_LRS.to_vec(),
        }
    }

    pub fn topic() -> Self {
        SelectionGrid {
            region_sizes: vec![3, 5],
            pooling_ks: vec![1, 10],
            initial_lrs: Self::DEFAULT_LRS.to_vec(),
        }
    }

    /// Grid points ordered by (region size, k, lr), all ascending.
    pub fn points(&self) -> Vec<(usize, usize, f64)> {
        let mut sizes = self.region_sizes.clone();
        sizes.sort_unstable();
        sizes.dedup();
        let mut ks = self.pooling_ks.clone();
        ks.sort_unstable();
        ks.dedup();
        let mut lrs = self.initial_lrs.clone();
        lrs.sort_by(f64::total_cmp);
        lrs.dedup();
        let mut out = Vec::new();
        for &p in &sizes {
            for &k in &ks {
                for &lr in &lrs {
                    out.push((p, k, lr));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub region_size: usize,
    pub pooling_k: usize,
    pub initial_lr: f64,
    pub val_error: Option<f64>,
    pub final_train_loss: f64,
}

impl GridResult {
    /// Selection criterion: validation error, or final training loss
    /// when there is no validation data.
    pub fn score(&self) -> f64 {
        self.val_error.unwrap_or(self.final_train_loss)
    }
}

impl fmt::Display for GridResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "region_size={} pooling_k={} lr={} val_error=",
            self.region_size, self.pooling_k, self.initial_lr
        )?;
        match self.val_error {
            Some(e) => write!(f, "{e:.4}")?,
            None => f.write_str("na")?,
        }
        write!(f, " train_loss={:.6}", self.final_train_loss)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub model: ShallowModel,
    pub metrics: Vec<EpochMetrics>,
    pub report: Vec<GridResult>,
    /// Index into `report` of the chosen point.
    pub best: usize,
}

/// Trains one model per grid point and keeps the one with the lowest
/// validation error, preferring smaller region size, then smaller k, then
/// smaller learning rate on ties. Without validation data the final
/// training loss is used instead.
pub fn select_model(
    grid: &SelectionGrid,
    template: &ModelTemplate,
    config: &TrainConfig,
    train_set: &[Example],
    valid: &[Example],
) -> Result<Selection> {
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::Config("empty selection grid".into()));
    }
    if valid.is_empty() {
        log::warn!("no validation data; selecting on final training loss");
    }
    let mut report = Vec::with_capacity(points.len());
    let mut best: Option<(usize, f64, TrainOutcome)> = None;
    for (i, &(p, k, lr)) in points.iter().enumerate() {
        let model = template.instantiate(p, k)?;
        let cfg = TrainConfig {
            initial_lr: lr,
            ..config.clone()
        };
        let outcome = train(model, &cfg, train_set, valid)?;
        let last = outcome.metrics.last().expect("at least one epoch");
        let result = GridResult {
            region_size: p,
            pooling_k: k,
            initial_lr: lr,
            val_error: last.val_error,
            final_train_loss: last.train_loss,
        };
        log::info!("grid {result}");
        let score = result.score();
        report.push(result);
        if best.as_ref().is_none_or(|(_, s, _)| score < *s) {
            best = Some((i, score, outcome));
        }
    }
    let (best, _, outcome) = best.expect("non-empty grid");
    debug_assert_eq!(best, first_minimum(&report.iter().map(GridResult::score).collect::<Vec<_>>()));
    Ok(Selection {
        model: outcome.model,
        metrics: outcome.metrics,
        report,
        best,
    })
}

/// Index of the first smallest score.
fn first_minimum(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s < scores[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{build_vocab, Representation, VocabKind};
    use crate::RegionEmbedding;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn metrics_are_one_line_records() {
        let m = EpochMetrics {
            epoch: 25,
            lr: 0.1 * 0.1,
            train_loss: 0.5,
            val_error: None,
            elapsed_seconds: 1.25,
        };
        assert_eq!(m.to_string(), "epoch=25 lr=0.01 train_loss=0.500000 val_error=na elapsed=1.250");
    }

    #[test]
    fn lr_schedule_steps_once() {
        let c = TrainConfig {
            initial_lr: 0.5,
            ..TrainConfig::default()
        };
        assert_eq!(lr_at_epoch(&c, 24), 0.5);
        assert_eq!(lr_at_epoch(&c, 25), 0.5 * 0.1);
        let s = TrainConfig {
            initial_lr: 0.5,
            ..TrainConfig::small_data()
        };
        assert_eq!(lr_at_epoch(&s, 80), 0.5);
        assert_eq!(lr_at_epoch(&s, 81), 0.05);
        let lrs: Vec<f64> = (1..=s.epochs).map(|e| lr_at_epoch(&s, e)).collect();
        assert_eq!(lrs.windows(2).filter(|w| w[1] < w[0]).count(), 1);
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            decay_epoch: 31,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn holdout_examples() {
        let data: Vec<u32> = (0..100).collect();
        let (t, v) = holdout_split(&data, 10, 3).unwrap();
        assert_eq!((t.len(), v.len()), (90, 10));
        let mut all: Vec<u32> = t.iter().chain(&v).copied().collect();
        all.sort();
        assert_eq!(all, data);
        assert_eq!(holdout_split(&data, 10, 3).unwrap(), (t, v));
        let (t, v) = holdout_split(&data, 0, 3).unwrap();
        assert_eq!((t.len(), v.len()), (100, 0));
        assert!(holdout_split(&data, 100, 3).is_err());
        assert_eq!(default_holdout(120_000), 10_000);
        assert_eq!(default_holdout(5_000), 500);
    }

    fn small_task() -> (ModelTemplate, Vec<Example>) {
        let texts = ["good fine nice", "bad awful poor", "nice good", "poor bad", "fine", "awful"];
        let labels = [0, 1, 0, 1, 0, 1];
        let corpus: Vec<Vec<String>> = texts.iter().map(|t| toks(t)).collect();
        let vocab = build_vocab(&corpus, VocabKind::Word, 100).unwrap();
        let template = ModelTemplate::new(vocab.clone(), Representation::ConcatOneHot, 8, 2);
        let examples = corpus
            .iter()
            .zip(labels)
            .map(|(c, l)| crate::model::encode_views(&template.vocabs, c, l))
            .collect();
        (template, examples)
    }

    fn quick(lr: f64) -> TrainConfig {
        TrainConfig {
            epochs: 4,
            decay_epoch: 3,
            batch_size: 4,
            initial_lr: lr,
            init_std: 0.1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_lr_keeps_initialization() {
        let (template, ex) = small_task();
        let cfg = quick(0.0);
        let out = train(template.instantiate(2, 1).unwrap(), &cfg, &ex, &[]).unwrap();
        let mut init = template.instantiate(2, 1).unwrap();
        initialize(&mut init, cfg.init_std, cfg.seed);
        assert_eq!(out.model, init);
    }

    #[test]
    fn training_is_deterministic_across_execution_modes() {
        let (template, ex) = small_task();
        let a = train(template.instantiate(2, 2).unwrap(), &quick(0.1), &ex, &ex[..2]).unwrap();
        let b = train(template.instantiate(2, 2).unwrap(), &quick(0.1), &ex, &ex[..2]).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(
            a.metrics.iter().map(|m| m.train_loss).collect::<Vec<_>>(),
            b.metrics.iter().map(|m| m.train_loss).collect::<Vec<_>>()
        );
        let seq = TrainConfig {
            exec: Execution::Sequential,
            ..quick(0.1)
        };
        let c = train(template.instantiate(2, 2).unwrap(), &seq, &ex, &ex[..2]).unwrap();
        assert_eq!(a.model, c.model);
        assert!(a.metrics.iter().all(|m| m.train_loss.is_finite() && m.val_error.is_some()));
    }

    #[test]
    fn divergence_is_reported() {
        let (template, ex) = small_task();
        let cfg = TrainConfig {
            initial_lr: 1e200,
            ..quick(0.0)
        };
        let err = train(template.instantiate(2, 1).unwrap(), &cfg, &ex, &[]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }), "{err}");
    }

    #[test]
    fn tv_embeddings_stay_frozen() {
        let (mut template, ex) = small_task();
        let vocab = template.vocabs[0].clone();
        let spec = crate::RegionSpec::new(Representation::BowWord, 3, vocab.len()).unwrap();
        let mut emb = RegionEmbedding::zeros(spec, 0, 3).unwrap();
        emb.weight.as_mut_slice().iter_mut().enumerate().for_each(|(i, w)| *w = (i as f64 * 0.37).sin());
        emb.bias = vec![0.1, -0.1, 0.2];
        template.add_tv(&vocab, emb.clone()).unwrap();
        assert_eq!(template.vocabs.len(), 1);
        let out = train(template.instantiate(2, 1).unwrap(), &quick(0.2), &ex, &[]).unwrap();
        assert_eq!(out.model.tvs[0].embedding, emb);
        assert_ne!(out.model.tvs[0].fusion, template.instantiate(2, 1).unwrap().tvs[0].fusion);
    }

    #[test]
    fn l2_only_reaches_top_weights() {
        let (template, ex) = small_task();
        let mut model = template.instantiate(2, 1).unwrap();
        initialize(&mut model, 0.3, 5);
        let docs = prepare_all(Execution::Sequential, &model, &ex).unwrap();
        let batch: Vec<(u64, usize)> = (0..docs.len()).map(|i| (i as u64, i)).collect();
        let (g, _) = batch_gradient(&model, &docs, &batch, Execution::Sequential).unwrap();
        let (g2, _) = batch_gradient(&model, &docs, &batch, Execution::Parallel).unwrap();
        assert_eq!(g, g2);
        // The penalty is added by the trainer on top_w alone; every other
        // gradient is the data term unchanged.
        let mut with_l2 = g.clone();
        kernels::axpy(2.0 * 1e-4, model.top_w.as_slice(), with_l2.top_w.as_mut_slice());
        assert_eq!(with_l2.base_w, g.base_w);
        assert_eq!(with_l2.base_b, g.base_b);
        assert_eq!(with_l2.top_b, g.top_b);
        assert_ne!(with_l2.top_w, g.top_w);
    }

    #[test]
    fn selection_grid_behaviour() {
        let (template, ex) = small_task();
        let single = SelectionGrid {
            region_sizes: vec![2],
            pooling_ks: vec![1],
            initial_lrs: vec![0.1],
        };
        let s = select_model(&single, &template, &quick(0.1), &ex, &ex).unwrap();
        assert_eq!(s.report.len(), 1);
        assert_eq!(s.model.base.spec.region_size, 2);

        let two = SelectionGrid {
            region_sizes: vec![3, 2],
            pooling_ks: vec![1],
            initial_lrs: vec![0.0, 0.3],
        };
        let s = select_model(&two, &template, &quick(0.0), &ex, &ex).unwrap();
        assert_eq!(s.report.len(), 4);
        assert_eq!(s.report[0].region_size, 2);
        let scores: Vec<f64> = s.report.iter().map(|r| r.val_error.unwrap()).collect();
        assert_eq!(s.best, first_minimum(&scores));
        assert_eq!(s.model.base.spec.region_size, s.report[s.best].region_size);

        let empty = SelectionGrid {
            region_sizes: vec![],
            pooling_ks: vec![1],
            initial_lrs: vec![0.1],
        };
        assert!(select_model(&empty, &template, &quick(0.1), &ex, &ex).is_err());
    }

    #[test]
    fn ties_go_to_the_earliest_point() {
        assert_eq!(first_minimum(&[2.0, 1.0, 1.0]), 1);
        assert_eq!(first_minimum(&[0.5, 0.5]), 0);
    }

    #[test]
    fn grid_points_are_ordered() {
        let g = SelectionGrid {
            region_sizes: vec![5, 3],
            pooling_ks: vec![10, 1],
            initial_lrs: vec![0.1, 0.01],
        };
        let pts = g.points();
        assert_eq!(pts.len(), 8);
        assert_eq!(pts[0], (3, 1, 0.01));
        assert_eq!(pts[7], (5, 10, 0.1));
        assert_eq!(SelectionGrid::sentiment().pooling_ks, vec![1]);
        assert_eq!(SelectionGrid::topic().pooling_ks, vec![1, 10]);
    }
}
