//! The shallow word-level CNN.
//!
//! Each region position `r` of a document is embedded as
//!
//! ```text
//! h_r = relu(W x_r + Σ_i F_i e_i(x_r^(i)) + b)
//! ```
//!
//! where `x_r` is the sparse base representation of the region, `e_i` is the
//! i-th frozen tv-embedding applied to its own representation of the region
//! starting at the same position, and `F_i` its trainable fusion matrix. The
//! `h_r` are max-pooled into `k` contiguous units, concatenated, passed
//! through dropout (training only) and a linear top layer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{contract, Result};
use crate::kernels::{self, axpy, ColMatrix, DenseMatrix, SparseColumns};
use crate::text::{self, EncodedDocument, RegionSpec, Representation, SparseRegionVector, Vocabulary};

/// Feature-map count of the base region embedding.
pub const DEFAULT_DIM: usize = 500;
pub const DEFAULT_TV_DIM: usize = 300;
pub const DEFAULT_DROPOUT: f64 = 0.5;

const NO_REGION: u32 = u32::MAX;

/// `relu(W x + b)` over one sparse region representation.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionEmbedding {
    pub spec: RegionSpec,
    /// Index of the vocabulary (in the owning model) the spec reads from.
    pub vocab: usize,
    pub weight: ColMatrix,
    pub bias: Vec<f64>,
}

impl RegionEmbedding {
    pub fn zeros(spec: RegionSpec, vocab: usize, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(contract("embedding dimension must be at least 1"));
        }
        Ok(RegionEmbedding {
            spec,
            vocab,
            weight: ColMatrix::zeros(dim, spec.input_dim()),
            bias: vec![0.0; dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.bias.len()
    }

    /// Writes `relu(W x + b)` into `out`.
    pub fn apply_into(&self, x: &SparseRegionVector, out: &mut [f64]) -> Result<()> {
        kernels::sparse_affine_into(&self.weight, &self.bias, x, out)?;
        kernels::relu_in_place(out);
        Ok(())
    }

    pub fn apply(&self, x: &SparseRegionVector) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    pub fn parameter_count(&self) -> u64 {
        (self.weight.rows() * self.weight.cols() + self.bias.len()) as u64
    }
}

/// A frozen tv-embedding plus the trainable matrix that fuses its output
/// into the base region vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TvEmbedding {
    pub embedding: RegionEmbedding,
    /// `dim × d_tv`
    pub fusion: DenseMatrix,
}

/// One document encoded against every vocabulary a model uses.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub label: usize,
    pub views: Vec<EncodedDocument>,
}

impl Example {
    pub fn len(&self) -> usize {
        self.views.first().map_or(0, EncodedDocument::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn encode_views(vocabs: &[Vocabulary], tokens: &[String], label: usize) -> Example {
    Example {
        label,
        views: vocabs.iter().map(|v| text::encode(tokens, v, label)).collect(),
    }
}

/// Region vectors of a document, materialized ahead of the forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDoc {
    pub label: usize,
    pub base: Vec<SparseRegionVector>,
    /// Per tv, one vector per base region position.
    pub tvs: Vec<Vec<SparseRegionVector>>,
}

impl PreparedDoc {
    pub fn regions(&self) -> usize {
        self.base.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Infer,
    /// Dropout active, mask drawn from `seed`.
    Train { seed: u64 },
}

/// Activations kept by [`ShallowModel::forward`] for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub logits: Vec<f64>,
    /// Pooled region vectors, `k · dim`, before dropout.
    pub pooled: Vec<f64>,
    /// Region position that produced each pooled value.
    argmax: Vec<u32>,
    /// Per pooled entry, 0 or the inverted-dropout scale.
    mask: Option<Vec<f64>>,
    /// Top-layer input after dropout.
    top_input: Vec<f64>,
}

/// Gradients of every trainable parameter. tv-embeddings have none.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub base_w: SparseColumns,
    pub base_b: Vec<f64>,
    pub fusion: Vec<DenseMatrix>,
    pub top_w: DenseMatrix,
    pub top_b: Vec<f64>,
}

impl Gradients {
    pub fn zeros(model: &ShallowModel) -> Self {
        Gradients {
            base_w: SparseColumns::new(model.dim()),
            base_b: vec![0.0; model.dim()],
            fusion: model
                .tvs
                .iter()
                .map(|t| DenseMatrix::zeros(t.fusion.rows(), t.fusion.cols()))
                .collect(),
            top_w: DenseMatrix::zeros(model.top_w.rows(), model.top_w.cols()),
            top_b: vec![0.0; model.top_b.len()],
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        self.base_w.add_assign(&other.base_w);
        axpy(1.0, &other.base_b, &mut self.base_b);
        for (a, b) in self.fusion.iter_mut().zip(&other.fusion) {
            axpy(1.0, b.as_slice(), a.as_mut_slice());
        }
        axpy(1.0, other.top_w.as_slice(), self.top_w.as_mut_slice());
        axpy(1.0, &other.top_b, &mut self.top_b);
    }

    pub fn scale(&mut self, a: f64) {
        self.base_w.scale(a);
        self.base_b.iter_mut().for_each(|v| *v *= a);
        for f in &mut self.fusion {
            f.as_mut_slice().iter_mut().for_each(|v| *v *= a);
        }
        self.top_w.as_mut_slice().iter_mut().for_each(|v| *v *= a);
        self.top_b.iter_mut().for_each(|v| *v *= a);
    }
}

/// Parameter layout of a model, enough to count parameters without
/// allocating any weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelShape {
    pub base_input_dim: usize,
    pub dim: usize,
    /// `(input_dim, d_tv)` per tv-embedding.
    pub tvs: Vec<(usize, usize)>,
    pub pooling_k: usize,
    pub num_classes: usize,
}

impl ModelShape {
    pub fn parameter_count(&self) -> u64 {
        let (n, d, k, c) = (
            self.base_input_dim as u64,
            self.dim as u64,
            self.pooling_k as u64,
            self.num_classes as u64,
        );
        let base = n * d + d;
        let tvs: u64 = self
            .tvs
            .iter()
            .map(|&(n_tv, d_tv)| {
                let (n_tv, d_tv) = (n_tv as u64, d_tv as u64);
                n_tv * d_tv + d_tv + d * d_tv
            })
            .sum();
        base + tvs + c * d * k + c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShallowModel {
    pub vocabs: Vec<Vocabulary>,
    pub base: RegionEmbedding,
    pub tvs: Vec<TvEmbedding>,
    pub pooling_k: usize,
    /// `num_classes × (dim · pooling_k)`
    pub top_w: DenseMatrix,
    pub top_b: Vec<f64>,
    pub dropout: f64,
}

impl ShallowModel {
    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn num_classes(&self) -> usize {
        self.top_b.len()
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape {
            base_input_dim: self.base.spec.input_dim(),
            dim: self.dim(),
            tvs: self
                .tvs
                .iter()
                .map(|t| (t.embedding.spec.input_dim(), t.embedding.dim()))
                .collect(),
            pooling_k: self.pooling_k,
            num_classes: self.num_classes(),
        }
    }

    /// Checks internal consistency (shapes, vocabulary references).
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        let check_emb = |e: &RegionEmbedding| -> Result<()> {
            let vocab = self
                .vocabs
                .get(e.vocab)
                .ok_or_else(|| contract(format!("embedding refers to missing vocabulary {}", e.vocab)))?;
            if vocab.len() != e.spec.vocab_size || vocab.kind() != e.spec.representation.vocab_kind() {
                return Err(contract("embedding spec does not match its vocabulary"));
            }
            if e.weight.cols() != e.spec.input_dim() || e.weight.rows() != e.bias.len() || e.bias.is_empty() {
                return Err(contract("embedding weight shape mismatch"));
            }
            Ok(())
        };
        check_emb(&self.base)?;
        for tv in &self.tvs {
            check_emb(&tv.embedding)?;
            if tv.fusion.rows() != d || tv.fusion.cols() != tv.embedding.dim() {
                return Err(contract("fusion matrix shape mismatch"));
            }
        }
        if self.pooling_k == 0 {
            return Err(contract("pooling k must be at least 1"));
        }
        if self.top_w.cols() != d * self.pooling_k || self.top_w.rows() != self.top_b.len() || self.top_b.is_empty() {
            return Err(contract("top layer shape mismatch"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(contract("dropout rate must be in [0, 1)"));
        }
        Ok(())
    }

    pub fn encode(&self, tokens: &[String], label: usize) -> Example {
        encode_views(&self.vocabs, tokens, label)
    }

    /// Materializes all region vectors of `ex`.
    pub fn prepare(&self, ex: &Example) -> Result<PreparedDoc> {
        if ex.views.len() != self.vocabs.len() {
            return Err(contract(format!(
                "example has {} views, model has {} vocabularies",
                ex.views.len(),
                self.vocabs.len()
            )));
        }
        let len = ex.len();
        if ex.views.iter().any(|v| v.len() != len) {
            return Err(contract("example views differ in length"));
        }
        let base = text::region_vectors(&ex.views[self.base.vocab], &self.base.spec)?;
        let r = base.len();
        let tvs = self
            .tvs
            .iter()
            .map(|tv| {
                let spec = &tv.embedding.spec;
                let view = &ex.views[tv.embedding.vocab];
                spec.check_doc(view)?;
                Ok((0..r).map(|pos| text::region_vector_padded(view, pos, spec)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedDoc {
            label: ex.label,
            base,
            tvs,
        })
    }

    fn check_prepared(&self, doc: &PreparedDoc) -> Result<()> {
        if doc.base.is_empty() {
            return Err(contract("document has no regions"));
        }
        if doc.tvs.len() != self.tvs.len() || doc.tvs.iter().any(|t| t.len() != doc.base.len()) {
            return Err(contract("prepared document does not match the model's tv-embeddings"));
        }
        if doc.base[0].dim() != self.base.spec.input_dim() {
            return Err(contract("prepared document does not match the base region spec"));
        }
        Ok(())
    }

    /// Fused, rectified region vector `h_r` written into `out`.
    fn region_into(&self, doc: &PreparedDoc, r: usize, tv_buf: &mut [Vec<f64>], out: &mut [f64]) -> Result<()> {
        kernels::sparse_affine_into(&self.base.weight, &self.base.bias, &doc.base[r], out)?;
        for (i, tv) in self.tvs.iter().enumerate() {
            tv.embedding.apply_into(&doc.tvs[i][r], &mut tv_buf[i])?;
            tv.fusion.matvec_acc(&tv_buf[i], out);
        }
        kernels::relu_in_place(out);
        Ok(())
    }

    /// The `k · dim` pooled document vector with the region behind each entry.
    fn pool(&self, doc: &PreparedDoc) -> Result<(Vec<f64>, Vec<u32>)> {
        let d = self.dim();
        let k = self.pooling_k;
        let r_total = doc.regions();
        let mut pooled = vec![0.0; k * d];
        let mut argmax = vec![NO_REGION; k * d];
        let mut h = vec![0.0; d];
        let mut tv_buf: Vec<Vec<f64>> = self.tvs.iter().map(|t| vec![0.0; t.embedding.dim()]).collect();
        for u in 0..k {
            let unit = pooling_unit(u, r_total, k);
            let best = &mut pooled[u * d..(u + 1) * d];
            let arg = &mut argmax[u * d..(u + 1) * d];
            for r in unit {
                self.region_into(doc, r, &mut tv_buf, &mut h)?;
                for c in 0..d {
                    // Strict comparison keeps the earliest position on ties.
                    if arg[c] == NO_REGION || h[c] > best[c] {
                        best[c] = h[c];
                        arg[c] = r as u32;
                    }
                }
            }
        }
        Ok((pooled, argmax))
    }

    pub fn forward(&self, doc: &PreparedDoc, mode: Mode) -> Result<ForwardCache> {
        self.check_prepared(doc)?;
        let (pooled, argmax) = self.pool(doc)?;
        let (mask, top_input) = match mode {
            Mode::Train { seed } if self.dropout > 0.0 => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let scale = 1.0 / (1.0 - self.dropout);
                let mask: Vec<f64> = (0..pooled.len())
                    .map(|_| if rng.random::<f64>() < self.dropout { 0.0 } else { scale })
                    .collect();
                let input = pooled.iter().zip(&mask).map(|(v, m)| v * m).collect();
                (Some(mask), input)
            }
            _ => (None, pooled.clone()),
        };
        let mut logits = self.top_b.clone();
        self.top_w.matvec_acc(&top_input, &mut logits);
        Ok(ForwardCache {
            logits,
            pooled,
            argmax,
            mask,
            top_input,
        })
    }

    pub fn logits(&self, doc: &PreparedDoc) -> Result<Vec<f64>> {
        Ok(self.forward(doc, Mode::Infer)?.logits)
    }

    /// Most likely class; ties go to the lowest index.
    pub fn predict(&self, doc: &PreparedDoc) -> Result<usize> {
        Ok(kernels::argmax(&self.logits(doc)?))
    }

    /// Accumulates into `grads` the gradient of a loss whose gradient with
    /// respect to the logits is `grad_logits`.
    pub fn backward(
        &self,
        doc: &PreparedDoc,
        cache: &ForwardCache,
        grad_logits: &[f64],
        grads: &mut Gradients,
    ) -> Result<()> {
        let d = self.dim();
        if grad_logits.len() != self.num_classes()
            || cache.pooled.len() != d * self.pooling_k
            || cache.argmax.iter().any(|&r| r != NO_REGION && r as usize >= doc.regions())
        {
            return Err(contract("forward cache does not match this model and document"));
        }
        self.check_prepared(doc)?;

        grads.top_w.add_outer(1.0, grad_logits, &cache.top_input);
        axpy(1.0, grad_logits, &mut grads.top_b);
        let mut grad_top_in = vec![0.0; cache.top_input.len()];
        self.top_w.t_matvec_acc(grad_logits, &mut grad_top_in);

        // Route each pooled gradient to the region that won the max. A zero
        // pooled value means relu was inactive there, so nothing flows.
        let mut routed: Vec<(u32, u32, f64)> = Vec::new();
        for (idx, &g) in grad_top_in.iter().enumerate() {
            let g = match &cache.mask {
                Some(m) => g * m[idx],
                None => g,
            };
            let r = cache.argmax[idx];
            if g == 0.0 || r == NO_REGION || cache.pooled[idx] <= 0.0 {
                continue;
            }
            routed.push((r, (idx % d) as u32, g));
        }
        routed.sort_by_key(|&(r, c, _)| (r, c));

        let mut tv_buf: Vec<Vec<f64>> = self.tvs.iter().map(|t| vec![0.0; t.embedding.dim()]).collect();
        for group in routed.chunk_by(|a, b| a.0 == b.0) {
            let r = group[0].0 as usize;
            for (j, xv) in doc.base[r].iter() {
                let col = grads.base_w.column_mut(j);
                for &(_, c, g) in group {
                    col[c as usize] += g * xv;
                }
            }
            for &(_, c, g) in group {
                grads.base_b[c as usize] += g;
            }
            for (i, tv) in self.tvs.iter().enumerate() {
                tv.embedding.apply_into(&doc.tvs[i][r], &mut tv_buf[i])?;
                for &(_, c, g) in group {
                    axpy(g, &tv_buf[i], grads.fusion[i].row_mut(c as usize));
                }
            }
        }
        Ok(())
    }

    /// Forward, softmax cross-entropy and backward for one document.
    /// Returns the loss; gradients are added to `grads`.
    pub fn loss_and_grad(&self, doc: &PreparedDoc, mode: Mode, grads: &mut Gradients) -> Result<f64> {
        let cache = self.forward(doc, mode)?;
        let xent = kernels::softmax_xent(&cache.logits, doc.label)?;
        self.backward(doc, &cache, &xent.grad_logits, grads)?;
        Ok(xent.loss)
    }
}

/// Region positions covered by pooling unit `u` of `k` over `regions` positions.
pub fn pooling_unit(u: usize, regions: usize, k: usize) -> std::ops::Range<usize> {
    (u * regions / k)..((u + 1) * regions / k)
}

pub fn count_parameters(model: &ShallowModel) -> u64 {
    model.shape().parameter_count()
}

/// Everything needed to instantiate models of varying region size and
/// pooling: vocabularies, base representation, frozen tv-embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTemplate {
    pub vocabs: Vec<Vocabulary>,
    pub base_vocab: usize,
    pub base_representation: Representation,
    pub dim: usize,
    pub num_classes: usize,
    pub tvs: Vec<RegionEmbedding>,
    pub dropout: f64,
}

impl ModelTemplate {
    pub fn new(base_vocab: Vocabulary, representation: Representation, dim: usize, num_classes: usize) -> Self {
        ModelTemplate {
            vocabs: vec![base_vocab],
            base_vocab: 0,
            base_representation: representation,
            dim,
            num_classes,
            tvs: Vec::new(),
            dropout: DEFAULT_DROPOUT,
        }
    }

    /// Index of `vocab` among the template's vocabularies, adding it if new.
    pub fn vocab_index(&mut self, vocab: &Vocabulary) -> usize {
        match self.vocabs.iter().position(|v| v == vocab) {
            Some(i) => i,
            None => {
                self.vocabs.push(vocab.clone());
                self.vocabs.len() - 1
            }
        }
    }

    /// Adds a frozen tv-embedding reading from `vocab`.
    pub fn add_tv(&mut self, vocab: &Vocabulary, mut embedding: RegionEmbedding) -> Result<()> {
        if vocab.len() != embedding.spec.vocab_size || vocab.kind() != embedding.spec.representation.vocab_kind() {
            return Err(contract("tv-embedding does not match its vocabulary"));
        }
        embedding.vocab = self.vocab_index(vocab);
        self.tvs.push(embedding);
        Ok(())
    }

    /// A model with zero trainable weights; the trainer initializes them.
    pub fn instantiate(&self, region_size: usize, pooling_k: usize) -> Result<ShallowModel> {
        let vocab = &self.vocabs[self.base_vocab];
        if vocab.is_empty() {
            return Err(contract("base vocabulary is empty"));
        }
        if vocab.kind() != self.base_representation.vocab_kind() {
            return Err(contract("base representation does not match the base vocabulary"));
        }
        let spec = RegionSpec::new(self.base_representation, region_size, vocab.len())?;
        let base = RegionEmbedding::zeros(spec, self.base_vocab, self.dim)?;
        let tvs = self
            .tvs
            .iter()
            .map(|e| TvEmbedding {
                embedding: e.clone(),
                fusion: DenseMatrix::zeros(self.dim, e.dim()),
            })
            .collect();
        let model = ShallowModel {
            vocabs: self.vocabs.clone(),
            base,
            tvs,
            pooling_k,
            top_w: DenseMatrix::zeros(self.num_classes, self.dim * pooling_k),
            top_b: vec![0.0; self.num_classes],
            dropout: self.dropout,
        };
        model.validate()?;
        Ok(model)
    }
}
