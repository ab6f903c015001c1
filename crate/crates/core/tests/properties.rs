mod common;

use proptest::collection::vec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shakg::autodiff::{row_softmax, GradStore, Graph, Matrix, ParameterStore};
use shakg::decoder::argmax;
use shakg::encoders::{encode_score, split_words, Vocabulary};
use shakg::env::miniquest_vocabulary;
use shakg::kg::{partition, PartitionStrategy, PLAYER};
use shakg::trace::{aggregate_attention, Aggregation};
use shakg::trainer::{parse_kv, read_checkpoint, write_checkpoint, TrainConfig, KEYS};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    vec(-30.0f64..30.0, rows * cols).prop_map(move |d| Matrix::from_vec(rows, cols, d))
}

fn sized_matrix() -> impl Strategy<Value = Matrix> {
    (1usize..8, 1usize..8).prop_flat_map(|(r, c)| matrix(r, c))
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions(m in sized_matrix()) {
        let p = row_softmax(&m);
        for r in 0..p.rows() {
            let s: f64 = p.row_slice(r).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(p.row_slice(r).iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn softmax_ignores_row_shifts(m in sized_matrix(), shift in -50.0f64..50.0) {
        let a = row_softmax(&m);
        let b = row_softmax(&m.map(|x| x + shift));
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_is_linear(w in matrix(3, 4), x in matrix(4, 2), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut store = ParameterStore::new(0);
        let wid = store.add("w", w).unwrap();
        let grads_of = |store: &ParameterStore, ca: f64, cb: f64| {
            let mut g = Graph::new(store);
            let w = g.param(wid);
            let x = g.constant(x.clone());
            let y = g.matmul(w, x).unwrap();
            let t = g.tanh(y).unwrap();
            let f = g.sum_all(t).unwrap();
            let sq = g.mul(y, y).unwrap();
            let h = g.sum_all(sq).unwrap();
            let fa = g.scalar_mul(f, ca).unwrap();
            let hb = g.scalar_mul(h, cb).unwrap();
            let loss = g.add(fa, hb).unwrap();
            let mut grads = GradStore::zeros_like(store);
            g.backward(loss, &mut grads).unwrap();
            grads.get(wid).clone()
        };
        let combined = grads_of(&store, a, b);
        let f = grads_of(&store, 1.0, 0.0);
        let h = grads_of(&store, 0.0, 1.0);
        for i in 0..combined.len() {
            let expect = a * f.data()[i] + b * h.data()[i];
            prop_assert!((combined.data()[i] - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn aggregation_gives_probability_vectors(m in (1usize..120, 1usize..6).prop_flat_map(|(r, c)| matrix(r, c)), which in 0usize..9) {
        let alpha = row_softmax(&m);
        let v = aggregate_attention(&alpha, Aggregation::ALL[which]);
        prop_assert_eq!(v.len(), alpha.cols());
        prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(v.iter().all(|&x| x > 0.0 && x < 1.0 || alpha.cols() == 1));
    }

    #[test]
    fn top_k_past_the_row_count_clamps(m in (1usize..10, 2usize..5).prop_flat_map(|(r, c)| matrix(r, c))) {
        let a = aggregate_attention(&m, Aggregation::TopSum(50));
        let b = aggregate_attention(&m, Aggregation::Sum);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn every_partition_covers_its_source(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kg = common::random_kg(&mut rng);
        for strategy in PartitionStrategy::ALL {
            let set = partition(&kg, strategy);
            prop_assert_eq!(set.parts.len(), strategy.num_parts());
            let source = if strategy == PartitionStrategy::NoHistory { kg.latest() } else { kg.edges() };
            prop_assert_eq!(&set.union(), source);
        }
        let full = partition(&kg, PartitionStrategy::Full);
        prop_assert!(full.parts[3].edges.iter().all(|t| !t.involves(PLAYER)));
    }

    #[test]
    fn tokenizer_round_trips_known_words(ids in vec(2usize..75, 0..20)) {
        let vocab = miniquest_vocabulary();
        let text = vocab.detokenize(&ids);
        prop_assert_eq!(vocab.tokenize(&text), ids);
    }

    #[test]
    fn split_words_is_idempotent(text in "[a-zA-Z ,.!'-]{0,40}") {
        let once = split_words(&text);
        let twice = split_words(&once.join(" "));
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn vocabulary_file_round_trips(words in vec("[a-z]{1,8}", 0..30)) {
        let v = Vocabulary::from_tokens(&words);
        prop_assert_eq!(Vocabulary::parse(&v.to_file_string()).unwrap(), v);
    }

    #[test]
    fn score_bits_decode_back(score in -40000i64..40000) {
        let bits = encode_score(score);
        prop_assert!(bits.iter().all(|&b| b == 0.0 || b == 1.0));
        let magnitude: i64 = bits[..15].iter().enumerate().map(|(i, &b)| (b as i64) << i).sum();
        prop_assert_eq!(magnitude, score.abs().min(32767));
        prop_assert_eq!(bits[15] == 1.0, score < 0);
    }

    #[test]
    fn argmax_picks_the_first_maximum(v in vec(-5i32..5, 1..20)) {
        let p: Vec<f64> = v.iter().map(|&x| x as f64).collect();
        let i = argmax(&p);
        let max = p.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert_eq!(i, p.iter().position(|&x| x == max).unwrap());
    }

    #[test]
    fn config_round_trips(seed in any::<u64>(), lr in 1e-6f64..1.0, envs in 1usize..64, gamma in 0.01f64..1.0) {
        let mut c = TrainConfig { seed, lr, num_envs: envs, gamma, ..TrainConfig::default() };
        c.threads = Some(envs);
        let mut back = TrainConfig::default();
        for (k, v) in parse_kv(&c.to_kv_string()).unwrap() {
            back.set(&k, &v).unwrap();
        }
        prop_assert_eq!(back, c);
        prop_assert_eq!(KEYS.len(), 17);
    }

    #[test]
    fn checkpoint_bytes_round_trip(values in vec(vec(any::<f64>(), 1..12), 1..6), hash in any::<u64>(), seed in any::<u64>()) {
        let mut store = ParameterStore::new(0);
        for (i, v) in values.iter().enumerate() {
            store.add(&format!("p{i}"), Matrix::row(v)).unwrap();
        }
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &store, hash, seed).unwrap();
        let (header, records) = read_checkpoint(&mut bytes.as_slice()).unwrap();
        prop_assert_eq!(header.config_hash, hash);
        prop_assert_eq!(header.seed, seed);
        prop_assert_eq!(records.len(), values.len());
        for ((name, m), (i, v)) in records.iter().zip(values.iter().enumerate()) {
            prop_assert_eq!(name, &format!("p{i}"));
            let got: Vec<u64> = m.data().iter().map(|x| x.to_bits()).collect();
            let want: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
            prop_assert_eq!(got, want);
        }
    }
}
