use proptest::prelude::*;
use proxlab::envelope::EnvelopeEstimate;
use proxlab::riesz::{self, DeltaSeq};
use proxlab::seqcore::{self, FamilySpec};
use proxlab::BigIndex;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn bigindex_order_matches_log2(a in 1u64..1 << 40, ea in 0u64..300, b in 1u64..1 << 40, eb in 0u64..300) {
        let x = BigIndex::mul_pow2(a, ea);
        let y = BigIndex::mul_pow2(b, eb);
        let (lx, ly) = (x.log2(), y.log2());
        if (lx - ly).abs() > 1e-9 {
            prop_assert_eq!(x < y, lx < ly);
        }
        prop_assert_eq!(x.cmp(&y), y.cmp(&x).reverse());
    }

    #[test]
    fn bigindex_small_roundtrip(n in 0u64..u64::MAX) {
        prop_assert_eq!(BigIndex::from_u64(n).to_u64(), Some(n));
    }

    #[test]
    fn count_below_is_monotone(fam in prop::sample::select(vec!["gevrey:1", "gevrey:0.5", "example_a", "example_b", "m_q:2", "m_alpha_beta:1:2"]),
                               a in 0.0f64..60.0, d in 0.0f64..20.0) {
        let s = seqcore::make_family(&FamilySpec::parse_short(fam).unwrap()).unwrap();
        prop_assert!(s.count_below(a) <= s.count_below(a + d));
    }

    #[test]
    fn riesz_blockwise_matches_direct(p in 2u64..3000) {
        let d = DeltaSeq::two_valued();
        let fast = riesz::riesz_mean(&d, &BigIndex::from_u64(p)).unwrap();
        let slow = riesz::riesz_mean_direct(&d, p);
        prop_assert!((fast - slow).abs() <= 1e-12 * slow.abs().max(1.0), "p={} {} vs {}", p, fast, slow);
    }

    #[test]
    fn envelope_tails_are_monotone(ys in prop::collection::vec(-5.0f64..5.0, 40..200)) {
        let n = ys.len();
        let pts: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, &y)| (16.0 * i as f64 / n as f64, y)).collect();
        let e = EnvelopeEstimate::build_x("s", &pts, &seqcore::geometric_cutoffs(16.0), false);
        for w in e.tail_inf.windows(2) {
            prop_assert!(w[0].0 <= w[1].0);
        }
        for w in e.tail_sup.windows(2) {
            prop_assert!(w[0].0 >= w[1].0);
        }
        prop_assert!(e.global_inf.0 <= e.global_sup.0);
    }
}
