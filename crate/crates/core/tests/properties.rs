//! Property tests for the invariants of each module.

use std::collections::HashSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stancemt::corpus::{Sentiment, TweetRecord};
use stancemt::harness::metrics::metrics;
use stancemt::harness::split::{oversample_minority, stratified_kfold};
use stancemt::model::layers::{self, Dense};
use stancemt::model::{Model, ModelConfig, Vocabulary};
use stancemt::sentiment::{majority_vote, score_lexicon, SentimentEnsemble, SentimentLexicon};
use stancemt::stance::{self, NodeOrder, PropagationConfig, SeedSet};
use stancemt::text::TextPipeline;
use stancemt::topics::{self, TopicDocument, TopicModel};
use stancemt_tensor::{Array, Tape};

mod common;
use common::{oracle_propagate, run_propagation, run_propagation_capped};

const PIECES: &[&str] = &[
    "the", "Climate", "is", "CHANGING", "not", "very", "good", "hoax", "#ClimateChangeIsReal", "#climatehoax",
    "@user", "RT", "https://t.co/abc", "www.example.org", "ice!!", "melting,", "running", "generously", "2020",
    "sea-level", "don't", "wonderful", "terrible", "cc", "ons", "xyzqq", "علم", "😀",
];

fn tweet_text() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(PIECES), 0..16).prop_map(|w| w.join(" "))
}

fn weighted_graph(max_nodes: usize) -> impl Strategy<Value = (Vec<Vec<u32>>, Vec<Option<f64>>)> {
    (2..=max_nodes).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        (
            prop::collection::vec(0u32..=3, pairs),
            prop::collection::vec(prop::sample::select(vec![None, None, Some(-1.0), Some(1.0)]), n),
        )
            .prop_map(move |(edges, mut seeds)| {
                let mut w = vec![vec![0; n]; n];
                let mut e = edges.into_iter();
                for a in 0..n {
                    for b in a + 1..n {
                        let x = e.next().unwrap();
                        w[a][b] = x;
                        w[b][a] = x;
                    }
                }
                if seeds.iter().all(Option::is_none) {
                    seeds[0] = Some(-1.0);
                }
                (w, seeds)
            })
    })
}

fn sentiment() -> impl Strategy<Value = Sentiment> {
    prop::sample::select(Sentiment::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tokenize_is_idempotent_and_clean(text in tweet_text()) {
        let p = TextPipeline::bundled();
        let once = p.tokenize(&text);
        prop_assert_eq!(&once, &p.tokenize(&text));
        let again = p.tokenize(&once.tokens.join(" "));
        prop_assert_eq!(&again.tokens, &once.tokens);
        for t in &once.tokens {
            prop_assert!(!p.is_stopword(t), "stopword {}", t);
            prop_assert!(!t.contains("http") && !t.contains("www") && !t.starts_with('@') && !t.starts_with('#'), "{}", t);
        }
    }

    #[test]
    fn propagation_matches_oracle_on_small_graphs((w, seeds) in weighted_graph(8), gamma in 1u32..4) {
        let got = run_propagation(&w, &seeds, gamma, NodeOrder::Insertion);
        prop_assert_eq!(&got, &oracle_propagate(&w, &seeds, gamma as u64));
        prop_assert_eq!(&got, &run_propagation(&w, &seeds, gamma, NodeOrder::Insertion));
        for s in got.iter().flatten() {
            prop_assert!((-1.0..=1.0).contains(s));
        }
    }

    #[test]
    fn propagation_is_sign_symmetric((w, seeds) in weighted_graph(12), gamma in 1u32..6) {
        let flipped: Vec<Option<f64>> = seeds.iter().map(|s| s.map(|x| -x)).collect();
        let a = run_propagation(&w, &seeds, gamma, NodeOrder::Lexicographic);
        let b = run_propagation(&w, &flipped, gamma, NodeOrder::Lexicographic);
        prop_assert_eq!(b, a.iter().map(|s| s.map(|x| -x)).collect::<Vec<_>>());
    }

    #[test]
    fn labeled_set_grows_with_rounds((w, seeds) in weighted_graph(10), gamma in 1u32..4) {
        let mut prev: Vec<bool> = seeds.iter().map(Option::is_some).collect();
        for rounds in 0..12 {
            let now: Vec<bool> = run_propagation_capped(&w, &seeds, gamma, NodeOrder::Insertion, rounds)
                .iter()
                .map(Option::is_some)
                .collect();
            for (p, n) in prev.iter().zip(&now) {
                prop_assert!(!p || *n, "a node lost its label at round {}", rounds);
            }
            prev = now;
        }
    }

    #[test]
    fn tweet_labels_swap_with_seed_sets(tags in prop::collection::vec(prop::collection::vec(0usize..8, 1..4), 1..25)) {
        let corpus: Vec<TweetRecord> = tags
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut r = TweetRecord::new(format!("t{i}"), "");
                r.hashtags = t.iter().map(|x| format!("h{x}")).collect();
                r
            })
            .collect();
        let seeds = SeedSet::new(["h0", "h1"], ["h2"]).unwrap();
        let cfg = PropagationConfig::default();
        let mut a = corpus.clone();
        let mut b = corpus;
        stance::annotate(&mut a, &seeds, &cfg);
        stance::annotate(&mut b, &seeds.swapped(), &cfg);
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.stance_score.map(|s| -s), y.stance_score);
            prop_assert_eq!(x.stance_label.map(|l| l.index()), y.stance_label.map(|l| 1 - l.index()));
        }
    }

    #[test]
    fn majority_vote_is_permutation_invariant(a in sentiment(), b in sentiment(), c in sentiment()) {
        let v = majority_vote([a, b, c]);
        for p in [[a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            prop_assert_eq!(majority_vote(p), v);
        }
    }

    #[test]
    fn lexicon_scores_are_bounded(text in tweet_text(), extra in prop::collection::vec(prop::sample::select(vec!["good", "great", "bad", "horrible", "very", "not", "extremely"]), 0..40)) {
        let mut words = TextPipeline::bundled().words(&text);
        words.extend(extra.iter().map(|s| s.to_string()));
        let s = score_lexicon(&words, SentimentLexicon::bundled());
        prop_assert!((-1.0..=1.0).contains(&s));
        for s in SentimentEnsemble::default().scores(&words) {
            prop_assert!((-1.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn lexicon_free_text_is_neutral(text in tweet_text()) {
        let ens = SentimentEnsemble::default();
        let words: Vec<String> = TextPipeline::bundled().words(&text).into_iter().filter(|w| !ens.bears(w)).collect();
        prop_assert_eq!(ens.scores(&words), [0.0; 3]);
        prop_assert_eq!(ens.vote(&words).final_label, Sentiment::Neutral);
    }

    #[test]
    fn topic_features_are_bounded_and_reproducible(
        docs in prop::collection::vec(prop::collection::vec(prop::sample::select(vec!["ice", "melt", "tax", "hoax", "sea", "heat", "snow", "cold"]), 1..6), 4..20),
        k in 1usize..4,
        m in 1usize..4,
        p in 1usize..5,
        seed in any::<u64>(),
    ) {
        let docs: Vec<TopicDocument> = docs
            .into_iter()
            .enumerate()
            .map(|(i, d)| TopicDocument { id: format!("d{i}"), tokens: d.into_iter().map(String::from).collect() })
            .collect();
        let vocab = docs.iter().flat_map(|d| d.tokens.iter()).collect::<HashSet<_>>().len();
        if k > vocab {
            prop_assert!(topics::fit_baseline(&docs, k, seed).is_err());
            return Ok(());
        }
        let model: TopicModel = topics::fit_baseline(&docs, k, seed).unwrap();
        prop_assert_eq!(&model, &topics::fit_baseline(&docs, k, seed).unwrap());
        for d in &docs {
            let row = &model.doc_topic[&d.id];
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let f = topics::top_words(&model, &d.id, m, p).unwrap();
            prop_assert!(f.words.len() <= m * p);
            prop_assert_eq!(f.words.iter().collect::<HashSet<_>>().len(), f.words.len());
            prop_assert_eq!(&f, &topics::top_words(&model, &d.id, m, p).unwrap());
        }
    }

    #[test]
    fn kfold_partitions_and_oversampling_only_duplicates(
        sizes in prop::collection::vec(5usize..40, 2..4),
        k in 2usize..6,
        seed in any::<u64>(),
    ) {
        let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &n)| vec![c; n]).collect();
        let folds = stratified_kfold(&labels, k, seed).unwrap();
        let mut seen = vec![0; labels.len()];
        for f in &folds {
            f.test.iter().for_each(|&i| seen[i] += 1);
            let mut all: Vec<usize> = f.train.iter().chain(&f.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        }
        prop_assert!(seen.iter().all(|&c| c == 1));

        let two: Vec<usize> = labels.iter().map(|&l| l.min(1)).collect();
        let fold = &folds[0];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let balanced = oversample_minority(&fold.train, &two, &mut rng).unwrap();
        prop_assert_eq!(&balanced[..fold.train.len()], &fold.train[..]);
        let distinct: HashSet<usize> = balanced.iter().copied().collect();
        prop_assert_eq!(distinct, fold.train.iter().copied().collect::<HashSet<_>>());
        let c0 = balanced.iter().filter(|&&i| two[i] == 0).count();
        prop_assert_eq!(2 * c0, balanced.len());
    }

    #[test]
    fn metrics_are_consistent(pairs in prop::collection::vec((0usize..3, 0usize..3), 0..=20)) {
        let (pred, gold): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let m = metrics(&pred, &gold, 3).unwrap();
        prop_assert!((0.0..=1.0).contains(&m.accuracy));
        prop_assert!((0.0..=1.0).contains(&m.macro_f1));
        prop_assert_eq!(m.confusion.iter().flatten().sum::<usize>(), gold.len());
        for c in 0..3 {
            let seen = pred.contains(&c) || gold.contains(&c);
            prop_assert_eq!(m.per_class_f1[c].is_some(), seen);
        }
    }

    #[test]
    fn equal_shared_inputs_give_equal_task_branches(seed in any::<u64>(), n in 1usize..6, d_a in 1usize..5, d_s in 1usize..5) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut arr = |r: usize, c: usize| Array::new(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let (a, wg, bg, wp, bp, wq, bq, wk, bk, wv, bv) =
            (arr(n, d_a), arr(d_a, d_s), arr(1, d_s), arr(d_a, d_s), arr(1, d_s), arr(d_a, d_s), arr(1, d_s), arr(d_a, d_s), arr(1, d_s), arr(d_a, d_s), arr(1, d_s));
        let mut tape = Tape::new();
        let a_d = tape.constant(a.clone());
        let a_s = tape.constant(a);
        let shared = layers::shared_average(&mut tape, a_d, a_s).unwrap();
        let dense = |tape: &mut Tape, w: &Array, b: &Array| Dense { w: tape.constant(w.clone()), b: tape.constant(b.clone()) };
        let (gate_d, gate_s) = (dense(&mut tape, &wg, &bg), dense(&mut tape, &wg, &bg));
        let (query_d, query_s) = (dense(&mut tape, &wq, &bq), dense(&mut tape, &wq, &bq));
        let proj = dense(&mut tape, &wp, &bp);
        let key = dense(&mut tape, &wk, &bk);
        let value = dense(&mut tape, &wv, &bv);
        let g_d = layers::gate_cell(&mut tape, shared, &gate_d, &proj).unwrap().output;
        let g_s = layers::gate_cell(&mut tape, shared, &gate_s, &proj).unwrap().output;
        let p_d = layers::spia(&mut tape, a_d, shared, &query_d, &key, &value).unwrap().output;
        let p_s = layers::spia(&mut tape, a_s, shared, &query_s, &key, &value).unwrap().output;
        prop_assert_eq!(tape.value(g_d).data(), tape.value(g_s).data());
        prop_assert_eq!(tape.value(p_d).data(), tape.value(p_s).data());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn sp_mt_forward_is_reproducible(seed in any::<u64>(), words in prop::collection::vec(prop::sample::select(vec!["ice", "melt", "tax", "hoax"]), 1..6)) {
        let vocab = Vocabulary::build(words.iter().copied());
        let config = ModelConfig { d: 6, d_l: 3, d_a: 3, d_s: 3, ..ModelConfig::default() };
        let a = Model::new(config.clone(), vocab.clone(), seed, None).unwrap();
        let b = Model::new(config, vocab, seed, None).unwrap();
        let ex = a.example(&words, &words[..1], None, None);
        let (la, lb) = (a.logits(&ex).unwrap(), b.logits(&ex).unwrap());
        prop_assert_eq!(la.stance, lb.stance);
        prop_assert_eq!(la.sentiment, lb.sentiment);
    }
}
