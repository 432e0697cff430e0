use advdoc_core::corpus::{documents_to_text, parse_documents};
use advdoc_core::eval::{
    cosine, embeddings_from_tsv, embeddings_to_tsv, precision_at_fraction, retrieve,
};
use advdoc_core::nn::{leaky, Parameters};
use advdoc_core::{BinaryBow, DaeParams, EmbeddingSet, EnergyNorm, LabeledDoc, Matrix, Rng};
use proptest::prelude::*;

fn vec_of(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

fn pair(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max).prop_flat_map(|n| (vec_of(n), vec_of(n)))
}

fn embedding_set(
    max_rows: usize,
    dim: usize,
    labels: usize,
) -> impl Strategy<Value = EmbeddingSet> {
    (1..=max_rows).prop_flat_map(move |n| {
        (vec_of(n * dim), prop::collection::vec(0..labels, n)).prop_map(move |(data, l)| {
            EmbeddingSet::new(Matrix::from_vec(n, dim, data).unwrap(), l).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn cosine_is_symmetric_and_bounded((a, b) in pair(8)) {
        let ab = cosine(&a, &b).unwrap();
        let ba = cosine(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&ab));
    }

    #[test]
    fn cosine_ignores_positive_scale((a, b) in pair(8), s in 0.01f64..100.0) {
        let scaled: Vec<f64> = a.iter().map(|x| x * s).collect();
        let c0 = cosine(&a, &b).unwrap();
        let c1 = cosine(&scaled, &b).unwrap();
        prop_assert!((c0 - c1).abs() < 1e-12, "{} vs {}", c0, c1);
    }

    #[test]
    fn precision_is_a_probability(q in embedding_set(6, 3, 3), pool in embedding_set(20, 3, 3), f in 0.001f64..=1.0) {
        let p = precision_at_fraction(&q, &pool, f).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn retrieve_returns_distinct_ids_in_score_order(pool in embedding_set(20, 3, 2), q in vec_of(3), k in 1usize..20) {
        let k = k.min(pool.len());
        let ids = retrieve(&q, &pool, k).unwrap();
        prop_assert_eq!(ids.len(), k);
        let scores: Vec<f64> = ids.iter().map(|&i| cosine(&q, pool.h.row(i)).unwrap()).collect();
        prop_assert!(scores.windows(2).all(|w| w[0] >= w[1]));
        let mut sorted = ids.clone();
        sorted.sort();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), k);
    }

    #[test]
    fn energies_are_nonnegative(seed in any::<u64>(), rows in 1usize..5, v in 1usize..12, hd in 1usize..6, mean in any::<bool>()) {
        let mut rng = Rng::seed_from_u64(seed);
        let mut dae = DaeParams::init(v, hd, 0.02, &mut rng);
        let flat: Vec<f64> = dae.flatten().iter().map(|_| 3.0 * rng.normal()).collect();
        dae.assign_flat(&flat);
        let x = rng.normal_matrix(rows, v);
        let norm = if mean { EnergyNorm::Mean } else { EnergyNorm::Sum };
        let pass = dae.forward(&x, None, norm).unwrap();
        prop_assert!(pass.energies.iter().all(|&e| e >= 0.0));
    }

    #[test]
    fn leaky_relu_is_monotone(a in -1e6f64..1e6, b in -1e6f64..1e6, slope in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(leaky(lo, slope) <= leaky(hi, slope));
    }

    #[test]
    fn documents_text_round_trips(docs in prop::collection::vec((0usize..4, prop::collection::btree_set(0usize..30, 0..10)), 0..8)) {
        let docs: Vec<LabeledDoc> = docs
            .into_iter()
            .map(|(label, ids)| LabeledDoc { bow: BinaryBow::from_ids(ids.into_iter().collect(), 30).unwrap(), label })
            .collect();
        let text = documents_to_text(&docs);
        let back = parse_documents(&text, 30, Some(4)).unwrap();
        prop_assert_eq!(back, docs);
    }

    #[test]
    fn embedding_tsv_round_trips(set in embedding_set(6, 4, 5)) {
        let back = embeddings_from_tsv(&embeddings_to_tsv(&set)).unwrap();
        prop_assert_eq!(back, set);
    }
}
