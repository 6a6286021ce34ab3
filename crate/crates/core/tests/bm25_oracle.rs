mod common;

use atk_core::retrieval::{search, search_many, Index, RetrieverConfig};
use common::{bm25_case, naive_bm25};
use proptest::prelude::*;

fn config() -> RetrieverConfig {
    RetrieverConfig {
        k_final: 20,
        ..RetrieverConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn index_matches_naive_scorer((docs, query) in bm25_case()) {
        let index = Index::build(&docs).unwrap();
        let got = search(&index, &query, &config());
        let want = naive_bm25(&docs, &query);
        prop_assert_eq!(got.docids().collect::<Vec<_>>(), want.iter().map(|d| d.0).collect::<Vec<_>>());
        for (g, (_, w)) in got.docs.iter().zip(&want) {
            prop_assert!((g.score - w).abs() <= 1e-9, "{} vs {}", g.score, w);
        }
    }

    #[test]
    fn batched_search_matches_single((docs, query) in bm25_case()) {
        let index = Index::build(&docs).unwrap();
        let queries = vec![query.clone(), format!("{query} w0"), "w1".to_string()];
        let batch = search_many(&index, &queries, &config());
        for (q, r) in queries.iter().zip(batch) {
            prop_assert_eq!(r, search(&index, q, &config()));
        }
    }
}
