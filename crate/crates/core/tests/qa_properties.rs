use hearingkit_core::corpus::Utterance;
use hearingkit_core::qa::{
    classify_qa, score_confusion, train_qa, LabeledText, QaClass, QaHyper, Source,
};
use hearingkit_core::synth::{labeled_corpus, synth_qa_rows, SynthSpec};
use proptest::prelude::*;

fn small_corpus() -> Vec<LabeledText> {
    let mut rows = synth_qa_rows(Source::Ama, 30, 3);
    rows.extend(synth_qa_rows(Source::UkParl, 30, 4));
    rows
}

#[test]
fn same_seed_same_model() {
    let rows = small_corpus();
    let h = QaHyper { epochs: 50, ..QaHyper::default() };
    assert_eq!(train_qa(&rows, h).unwrap(), train_qa(&rows, h).unwrap());
}

#[test]
fn duplicating_examples_leaves_probabilities_unchanged() {
    let rows = small_corpus();
    let doubled: Vec<LabeledText> = rows.iter().flat_map(|r| [r.clone(), r.clone()]).collect();
    let h = QaHyper { epochs: 60, l2: 0.0, ..QaHyper::default() };
    let a = train_qa(&rows, h).unwrap().model;
    let b = train_qa(&doubled, h).unwrap().model;
    assert_eq!(a.vocabulary, b.vocabulary);
    for probe in [
        "What is the status of the audit?",
        "We completed it last month.",
        "Thank you, Mr. Chairman.",
    ] {
        let (pa, pb) = (a.probability(probe), b.probability(probe));
        assert!((pa - pb).abs() < 1e-9, "{probe}: {pa} vs {pb}");
        assert_eq!(classify_qa(&a, probe).0, classify_qa(&b, probe).0);
    }
}

#[test]
fn loss_never_increases_at_the_stable_rate() {
    let rows = small_corpus();
    let probe = train_qa(&rows, QaHyper { epochs: 0, ..QaHyper::default() }).unwrap();
    let h = QaHyper {
        epochs: 80,
        learning_rate: probe.stable_learning_rate,
        ..QaHyper::default()
    };
    let t = train_qa(&rows, h).unwrap();
    assert_eq!(t.loss_history.len(), 81);
    for w in t.loss_history.windows(2) {
        assert!(w[1] <= w[0] + 1e-15, "{} -> {}", w[0], w[1]);
    }
}

fn class() -> impl Strategy<Value = QaClass> {
    prop_oneof![Just(QaClass::Question), Just(QaClass::Answer)]
}

proptest! {
    #[test]
    fn accuracy_is_one_minus_hamming(pairs in prop::collection::vec((class(), class()), 1..200)) {
        let (pred, truth): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let c = score_confusion(&pred, &truth).unwrap();
        let hamming = pred.iter().zip(&truth).filter(|(p, t)| p != t).count() as f64 / truth.len() as f64;
        prop_assert!((c.accuracy() - (1.0 - hamming)).abs() < 1e-12);
        prop_assert_eq!(c.total(), truth.len());
    }
}

#[test]
fn pairs_are_strictly_interleaved() {
    let spec = SynthSpec { hearings: 12, ..SynthSpec::default() };
    let corpus = labeled_corpus(&spec, 8).unwrap();
    assert!(!corpus.pairs.is_empty());
    for h in &corpus.hearings {
        let seq = |id: &str| -> u32 {
            h.utterances
                .iter()
                .find(|u: &&Utterance| u.utterance_id == id)
                .map(|u| u.sequence_no)
                .unwrap()
        };
        let pairs: Vec<(u32, u32)> = corpus
            .pairs
            .iter()
            .filter(|p| p.question_utterance_id.starts_with(&format!("{}-u", h.meta.hearing_id)))
            .map(|p| (seq(&p.question_utterance_id), seq(&p.answer_utterance_id)))
            .collect();
        for w in pairs.windows(2) {
            assert!(w[0].0 < w[1].0 && w[0].1 < w[1].1, "{:?}", w);
            // The next question comes after the previous answer.
            assert!(w[0].1 < w[1].0);
        }
        assert!(pairs.iter().all(|(q, a)| q < a));
    }
}
