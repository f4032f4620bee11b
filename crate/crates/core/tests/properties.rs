//! Invariants checked on randomly drawn models.

mod common;

use common::props::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn column_sums_of_truncated_operators(m in model(), n in 1usize..40, t in 0.0..3.0f64) {
        check_column_sums(&m, n, t)?;
    }

    #[test]
    fn log_norm_of_shifted_operator(m in model(), t in 0.0..2.0f64) {
        check_log_norm(&m, t)?;
    }

    #[test]
    fn truncation_difference_reconstruction(
        m in model(),
        n in 1usize..30,
        t in 0.0..2.0f64,
        raw in prop::collection::vec(0.0..1.0f64, 31),
    ) {
        check_reconstruction(&m, n, t, &raw)?;
    }

    #[test]
    fn tv_bound_nonincreasing_in_level(
        m in model(),
        ratio in 1.05..2.5f64,
        k in (1.0..3.0f64, 0.1..3.0f64, 1.0..3.0f64, 0.1..3.0f64),
        t in 0.0..20.0f64,
    ) {
        check_tv_monotone(&m, ratio, k, t)?;
    }

    #[test]
    fn envelopes_certify_themselves(
        f in time_part(3.0),
        shift in 0.05..1.0f64,
        pairs in prop::collection::vec((0.0..2.0f64, 0.0..3.0f64), 40),
    ) {
        check_envelope(&f, shift, &pairs)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rk4_error_shrinks_at_fourth_order(m in smooth_model(), k in 0usize..4) {
        check_rk4_order(&m, k)?;
    }

    #[test]
    fn simulation_independent_of_thread_count(m in model(), seed in any::<u64>()) {
        check_seed_determinism(&m, seed)?;
    }
}
