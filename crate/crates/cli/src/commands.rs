use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::Path;

use wordcnn::container::{self, StoredEmbedding};
use wordcnn::eval::{self, IndependenceConfig};
use wordcnn::model::{encode_views, Example};
use wordcnn::text::{build_vocab_with, encode, tokenize, RegionSpec, VocabKind};
use wordcnn::train::{self, EpochMetrics, TrainOutcome};
use wordcnn::tv::train_tv;
use wordcnn::{dataset, Error, ModelTemplate, Result, RunConfig, ShallowModel, Vocabulary};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::NonFinite { .. } => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

/// A tokenized corpus with 0-based labels.
struct Corpus {
    labels: Vec<usize>,
    tokens: Vec<Vec<String>>,
}

fn load_corpus(path: Option<&Path>, key: &str) -> Result<Corpus> {
    let path = path.ok_or_else(|| Error::Config(format!("{key} is not set")))?;
    let records = dataset::load_csv(path)?;
    if records.is_empty() {
        return Err(Error::Data(format!("{} holds no documents", path.display())));
    }
    Ok(Corpus {
        labels: records.iter().map(|r| r.class_index()).collect(),
        tokens: records.iter().map(|r| tokenize(&r.text())).collect(),
    })
}

fn load_vocab(cfg: &RunConfig, kind: VocabKind) -> Result<Vocabulary> {
    let path = cfg.vocab_path(kind);
    if !path.exists() {
        return Err(Error::Data(format!("{} not found; run `wordcnn vocab` first", path.display())));
    }
    container::load_vocab(&path)
}

fn ensure_work_dir(cfg: &RunConfig) -> Result<()> {
    Ok(fs::create_dir_all(&cfg.work_dir)?)
}

pub fn vocab(cfg: &RunConfig) -> Result<()> {
    let corpus = load_corpus(cfg.train_data.as_deref(), "train_data")?;
    ensure_work_dir(cfg)?;
    for kind in cfg.vocab_kinds() {
        let vocab = build_vocab_with(cfg.execution(), &corpus.tokens, kind, cfg.vocab_size(kind))?;
        let path = cfg.vocab_path(kind);
        container::save_vocab(&path, &vocab)?;
        println!("vocab kind={kind} size={} path={}", vocab.len(), path.display());
    }
    Ok(())
}

pub fn tv_train(cfg: &RunConfig, only: Option<usize>) -> Result<()> {
    if cfg.tvs.is_empty() {
        return Err(Error::Config("no tv-embeddings configured (set tvs)".into()));
    }
    if let Some(i) = only.filter(|&i| i >= cfg.tvs.len()) {
        return Err(Error::Config(format!("--index {i} out of range for {} tvs", cfg.tvs.len())));
    }
    let corpus = load_corpus(cfg.train_data.as_deref(), "train_data")?;
    let words = load_vocab(cfg, VocabKind::Word)?;
    let word_docs: Vec<_> = corpus.tokens.iter().map(|t| encode(t, &words, 0)).collect();
    ensure_work_dir(cfg)?;
    for (i, tv) in cfg.tvs.iter().enumerate() {
        if only.is_some_and(|o| o != i) {
            continue;
        }
        let kind = tv.representation.vocab_kind();
        let vocab = if kind == VocabKind::Word {
            words.clone()
        } else {
            load_vocab(cfg, kind)?
        };
        let inputs: Vec<_> = if kind == VocabKind::Word {
            word_docs.clone()
        } else {
            corpus.tokens.iter().map(|t| encode(t, &vocab, 0)).collect()
        };
        let spec = RegionSpec::new(tv.representation, tv.region_size, vocab.len())?;
        let outcome = train_tv(&inputs, &word_docs, &spec, tv.dim, &cfg.tv_config(i))?;
        for (e, loss) in outcome.epoch_losses.iter().enumerate() {
            println!("tv={i} epoch={} loss={loss:.6}", e + 1);
        }
        let path = cfg.tv_path(i);
        container::save_embedding(
            &path,
            &StoredEmbedding {
                vocab,
                embedding: outcome.embedding,
            },
        )?;
        println!("tv={i} spec={tv} path={}", path.display());
    }
    Ok(())
}

/// Vocabularies and frozen tv-embeddings for the configured model.
fn template(cfg: &RunConfig, num_classes: usize) -> Result<ModelTemplate> {
    let base_vocab = load_vocab(cfg, cfg.base_repr.vocab_kind())?;
    let mut template = ModelTemplate::new(base_vocab, cfg.base_repr, cfg.dim, num_classes);
    template.dropout = cfg.dropout;
    for (i, tv) in cfg.tvs.iter().enumerate() {
        let path = cfg.tv_path(i);
        if !path.exists() {
            return Err(Error::Data(format!("{} not found; run `wordcnn tv-train` first", path.display())));
        }
        let stored = container::load_embedding(&path)?;
        let spec = stored.embedding.spec;
        if spec.representation != tv.representation || spec.region_size != tv.region_size || stored.embedding.dim() != tv.dim {
            return Err(Error::Data(format!("{} does not match tv spec {tv}", path.display())));
        }
        template.add_tv(&stored.vocab, stored.embedding)?;
    }
    Ok(template)
}

fn num_classes(cfg: &RunConfig, corpus: &Corpus) -> Result<usize> {
    let seen = corpus.labels.iter().max().map_or(0, |m| m + 1);
    match cfg.num_classes {
        Some(c) if seen > c => Err(Error::Data(format!("label {seen} exceeds num_classes = {c}"))),
        Some(c) => Ok(c),
        None if seen < 2 => Err(Error::Data("training labels cover fewer than 2 classes".into())),
        None => Ok(seen),
    }
}

fn examples(template: &ModelTemplate, corpus: &Corpus) -> Vec<Example> {
    corpus
        .tokens
        .iter()
        .zip(&corpus.labels)
        .map(|(t, &l)| encode_views(&template.vocabs, t, l))
        .collect()
}

/// Training examples split into (train, validation) by the holdout rule.
fn prepare_training(cfg: &RunConfig) -> Result<(ModelTemplate, Vec<Example>, Vec<Example>)> {
    let corpus = load_corpus(cfg.train_data.as_deref(), "train_data")?;
    let template = template(cfg, num_classes(cfg, &corpus)?)?;
    let all = examples(&template, &corpus);
    let n_holdout = cfg.holdout.unwrap_or_else(|| train::default_holdout(all.len()));
    let (train_set, valid) = train::holdout_split(&all, n_holdout, cfg.seed)?;
    log::info!("train={} valid={}", train_set.len(), valid.len());
    Ok((template, train_set, valid))
}

fn write_metrics(cfg: &RunConfig, lines: &[String]) -> Result<()> {
    for l in lines {
        println!("{l}");
    }
    container::write_atomic(&cfg.metrics_path(), |w| {
        for l in lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })
}

fn save_model(cfg: &RunConfig, model: &ShallowModel) -> Result<()> {
    let path = cfg.model_path();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    container::save_model(&path, model)?;
    println!("model={} parameters={}", path.display(), wordcnn::count_parameters(model));
    Ok(())
}

fn metric_lines(metrics: &[EpochMetrics]) -> Vec<String> {
    metrics.iter().map(ToString::to_string).collect()
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let (template, train_set, valid) = prepare_training(cfg)?;
    ensure_work_dir(cfg)?;
    let model = template.instantiate(cfg.region_size, cfg.pooling_k)?;
    let TrainOutcome { model, metrics } = train::train(model, &cfg.train_config(), &train_set, &valid)?;
    write_metrics(cfg, &metric_lines(&metrics))?;
    save_model(cfg, &model)
}

pub fn select(cfg: &RunConfig) -> Result<()> {
    let (template, train_set, valid) = prepare_training(cfg)?;
    ensure_work_dir(cfg)?;
    let s = train::select_model(&cfg.grid(), &template, &cfg.train_config(), &train_set, &valid)?;
    let mut lines: Vec<String> = s.report.iter().map(|r| format!("grid {r}")).collect();
    lines.push(format!("best {}", s.report[s.best]));
    lines.extend(metric_lines(&s.metrics));
    write_metrics(cfg, &lines)?;
    save_model(cfg, &s.model)
}

fn load_model(cfg: &RunConfig) -> Result<ShallowModel> {
    let path = cfg.model_path();
    if !path.exists() {
        return Err(Error::Data(format!("model {} not found", path.display())));
    }
    container::load_model(&path)
}

pub fn eval(cfg: &RunConfig) -> Result<()> {
    let model = load_model(cfg)?;
    let corpus = load_corpus(cfg.test_data.as_deref(), "test_data")?;
    if let Some(&l) = corpus.labels.iter().find(|&&l| l >= model.num_classes()) {
        return Err(Error::Data(format!("test label {} outside the model's {} classes", l + 1, model.num_classes())));
    }
    let test: Vec<Example> = corpus.tokens.iter().zip(&corpus.labels).map(|(t, &l)| model.encode(t, l)).collect();
    let report = eval::evaluate_with(cfg.execution(), &model, &test)?;
    print!("{report}");
    Ok(())
}

pub fn predict(cfg: &RunConfig) -> Result<()> {
    let model = load_model(cfg)?;
    let stdin = io::stdin();
    let mut out = BufWriter::new(io::stdout().lock());
    for line in stdin.lock().lines() {
        let doc = model.prepare(&model.encode(&tokenize(&line?), 0))?;
        writeln!(out, "{}", model.predict(&doc)?)?;
    }
    out.flush()?;
    Ok(())
}

pub fn bench(cfg: &RunConfig, skip_independence: bool) -> Result<()> {
    if cfg.test_data.is_some() {
        let model = load_model(cfg)?;
        let corpus = load_corpus(cfg.test_data.as_deref(), "test_data")?;
        let test: Vec<Example> = corpus
            .tokens
            .iter()
            .map(|t| model.encode(t, 0))
            .collect();
        let report = eval::time_inference_examples(&model, &test, cfg.bench_repetitions)?;
        print!("{report}");
    } else {
        log::info!("test_data not set; skipping inference timing");
    }
    if !skip_independence {
        let report = eval::vocab_independence_bench(&IndependenceConfig {
            seed: cfg.seed,
            ..IndependenceConfig::default()
        })?;
        print!("{report}");
    }
    Ok(())
}

pub fn params(cfg: &RunConfig) -> Result<()> {
    let classes = cfg
        .num_classes
        .ok_or_else(|| Error::Config("params needs num_classes".into()))?;
    println!("{}", cfg.shape(classes)?.parameter_count());
    Ok(())
}

pub fn show_config(cfg: &RunConfig) -> Result<()> {
    print!("{cfg}");
    Ok(())
}
