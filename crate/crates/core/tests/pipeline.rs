use proptest::prelude::*;

use wordcnn::container;
use wordcnn::eval;
use wordcnn::model::encode_views;
use wordcnn::text::{build_vocab, tokenize, RegionSpec};
use wordcnn::train::{self, TrainConfig};
use wordcnn::tv::{self, TvConfig};
use wordcnn::{Example, Execution, ModelTemplate, Representation, ShallowModel, VocabKind};

fn corpus() -> Vec<(Vec<String>, usize)> {
    let lines = [
        ("what a great and moving film", 1),
        ("great acting and a great story", 1),
        ("the plot was dull and slow", 0),
        ("a dull film with bad acting", 0),
        ("moving story , great cast", 1),
        ("slow , bad and dull", 0),
        ("I loved this great film !", 1),
        ("bad bad bad", 0),
    ];
    lines.iter().map(|(t, l)| (tokenize(t), *l)).collect()
}

fn template(with_tv: bool) -> (ModelTemplate, Vec<Example>) {
    let docs = corpus();
    let tokens: Vec<Vec<String>> = docs.iter().map(|(t, _)| t.clone()).collect();
    let words = build_vocab(&tokens, VocabKind::Word, 100).unwrap();
    let mut t = ModelTemplate::new(words.clone(), Representation::ConcatOneHot, 12, 2);
    if with_tv {
        let grams = build_vocab(&tokens, VocabKind::Ngram123, 100).unwrap();
        let spec = RegionSpec::new(Representation::BowNgram123, 3, grams.len()).unwrap();
        let inputs: Vec<_> = tokens.iter().map(|t| wordcnn::text::encode(t, &grams, 0)).collect();
        let targets: Vec<_> = tokens.iter().map(|t| wordcnn::text::encode(t, &words, 0)).collect();
        let out = tv::train_tv(&inputs, &targets, &spec, 4, &TvConfig::default()).unwrap();
        t.add_tv(&grams, out.embedding).unwrap();
    }
    let examples = docs.iter().map(|(d, l)| encode_views(&t.vocabs, d, *l)).collect();
    (t, examples)
}

fn trained(with_tv: bool, exec: Execution) -> ShallowModel {
    let (t, examples) = template(with_tv);
    let cfg = TrainConfig {
        epochs: 20,
        decay_epoch: 15,
        batch_size: 3,
        initial_lr: 0.25,
        init_std: 0.1,
        exec,
        ..TrainConfig::default()
    };
    train::train(t.instantiate(2, 2).unwrap(), &cfg, &examples, &[]).unwrap().model
}

fn bytes(m: &ShallowModel) -> Vec<u8> {
    let mut b = Vec::new();
    container::write_model(&mut b, m).unwrap();
    b
}

#[test]
fn training_fits_a_small_corpus() {
    let (_, examples) = template(false);
    let model = trained(false, Execution::Parallel);
    let report = eval::evaluate(&model, &examples).unwrap();
    assert_eq!(report.n_errors, 0, "{report}");
}

#[test]
fn execution_modes_agree_bitwise() {
    for with_tv in [false, true] {
        let a = trained(with_tv, Execution::Parallel);
        let b = trained(with_tv, Execution::Sequential);
        assert_eq!(bytes(&a), bytes(&b));
        let (_, examples) = template(with_tv);
        assert_eq!(
            eval::evaluate_with(Execution::Parallel, &a, &examples).unwrap(),
            eval::evaluate_with(Execution::Sequential, &a, &examples).unwrap()
        );
    }
}

#[test]
fn saved_models_keep_their_vocabularies() {
    let model = trained(true, Execution::Parallel);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.swcn");
    container::save_model(&path, &model).unwrap();
    let loaded = container::load_model(&path).unwrap();
    for (doc, _) in corpus() {
        let a = model.logits(&model.prepare(&model.encode(&doc, 0)).unwrap()).unwrap();
        let b = loaded.logits(&loaded.prepare(&loaded.encode(&doc, 0)).unwrap()).unwrap();
        assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }
    assert_eq!(bytes(&loaded), bytes(&model));
}

#[test]
fn loaded_csv_feeds_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, "\"2\",\"Great\",\"film\\nreally\"\n\"1\",\"Dull\",\"\"\"bad\"\" film\"\n").unwrap();
    let records = wordcnn::dataset::load_csv(&path).unwrap();
    let tokens: Vec<Vec<String>> = records.iter().map(|r| tokenize(&r.text())).collect();
    assert_eq!(tokens[0], ["great", "film", "really"]);
    assert_eq!(tokens[1], ["dull", "\"", "bad", "\"", "film"]);
    assert_eq!(records.iter().map(|r| r.class_index()).collect::<Vec<_>>(), [1, 0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn container_round_trip_is_exact(
        seed in any::<u64>(),
        p in 1usize..4,
        k in 1usize..4,
        std in 0.0f64..2.0,
        repr in prop::sample::select(vec![Representation::ConcatOneHot, Representation::BowWord, Representation::BowNgram123]),
    ) {
        let docs = corpus();
        let tokens: Vec<Vec<String>> = docs.iter().map(|(t, _)| t.clone()).collect();
        let vocab = build_vocab(&tokens, repr.vocab_kind(), 50).unwrap();
        let t = ModelTemplate::new(vocab, repr, 5, 3);
        let mut m = t.instantiate(p, k).unwrap();
        train::initialize(&mut m, std, seed);
        let mut buf = Vec::new();
        container::write_model(&mut buf, &m).unwrap();
        let back = container::read_model(&buf[..]).unwrap();
        let mut again = Vec::new();
        container::write_model(&mut again, &back).unwrap();
        prop_assert_eq!(buf, again);
        prop_assert_eq!(back, m);
    }

    #[test]
    fn truncated_containers_are_rejected(cut in 0usize..400) {
        let (t, _) = template(false);
        let m = t.instantiate(2, 1).unwrap();
        let mut buf = Vec::new();
        container::write_model(&mut buf, &m).unwrap();
        let cut = cut.min(buf.len() - 1);
        prop_assert!(container::read_model(&buf[..cut]).is_err());
    }
}
