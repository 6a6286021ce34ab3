mod common;

use atk_core::trace::TraceStore;
use common::arbitrary_trace;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn write_then_read_is_identity(trace in arbitrary_trace()) {
        let dir = tempfile::tempdir().unwrap();
        let store = TraceStore::create(dir.path()).unwrap();
        store.write_trace(&trace).unwrap();
        prop_assert_eq!(store.read_trace(&trace.qid).unwrap(), trace.clone());
        prop_assert!(store.validate().unwrap().is_empty());
        prop_assert!(store.write_trace(&trace).is_err());
    }
}
