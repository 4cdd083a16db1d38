use std::f64::consts::FRAC_PI_8;

use proptest::prelude::*;
use statrs::distribution::{Binomial, DiscreteCDF};

use smoney::adversary::{self, CheatStrategy, ClaimPair};
use smoney::bb84::ChannelModel;
use smoney::coordination::CoordinationParams;

fn breidbart(m: usize) -> CheatStrategy {
    CheatStrategy::IntermediateBasis {
        theta: FRAC_PI_8,
        claims: ClaimPair::single_bit(m).unwrap(),
    }
}

#[test]
fn intermediate_basis_count_matches_exact_probability() {
    let params = CoordinationParams::new(256, 1, 0.10).unwrap();
    let r = adversary::run_double_spend(&breidbart(1), &params, &ChannelModel::noiseless(), 10_000, 32).unwrap();
    assert_eq!(r.bound_kind, "exact_individual");
    assert!((r.analytical_bound - 0.004_287_721_908_591_976).abs() < 1e-9);
    let expected = r.analytical_bound * r.trials as f64;
    let sd = (expected * (1.0 - r.analytical_bound)).sqrt();
    assert!(
        (r.successes as f64 - expected).abs() <= 3.0 * sd,
        "{} successes, {expected:.1} ± {sd:.1} expected",
        r.successes
    );
    assert!(r.within_bound());
}

#[test]
fn success_is_monotone_in_gamma() {
    // shared seed: every trial sees the same pulses and outcomes at each γ,
    // so a trial that passes at γ also passes at any larger γ
    let mut last = 0;
    for gamma in [0.05, 0.10, 0.125, 0.15, 0.175, 0.20, 0.25] {
        let params = CoordinationParams::new(128, 1, gamma).unwrap();
        let r = adversary::run_double_spend(&breidbart(1), &params, &ChannelModel::noiseless(), 2_000, 11).unwrap();
        assert!(r.successes >= last, "γ={gamma}: {} < {last}", r.successes);
        last = r.successes;
    }
    assert!(last > 1_500);
}

#[test]
fn other_strategies_never_double_spend() {
    let channel = ChannelModel::new(0.05, 0.0).unwrap();
    for m in [1, 2] {
        let params = CoordinationParams::new(96, m, 0.10).unwrap();
        let claims = ClaimPair::single_bit(m).unwrap();
        for s in [
            CheatStrategy::SingleBasis { claims: claims.clone() },
            CheatStrategy::RandomGuess { claims: claims.clone() },
            CheatStrategy::DoubleUnveilSameY { claims: claims.clone() },
        ] {
            let r = adversary::run_double_spend(&s, &params, &channel, 5_000, 3).unwrap();
            assert_eq!(r.successes, 0, "{} M={m}", s.name());
            assert_eq!(r.bound_kind, "chernoff_heuristic");
            assert!(r.within_bound());
        }
    }
}

#[test]
fn more_contested_bits_are_harder() {
    let params = CoordinationParams::new(64, 2, 0.20).unwrap();
    let one = CheatStrategy::IntermediateBasis {
        theta: FRAC_PI_8,
        claims: ClaimPair::new("00".parse().unwrap(), "01".parse().unwrap()).unwrap(),
    };
    let two = CheatStrategy::IntermediateBasis {
        theta: FRAC_PI_8,
        claims: ClaimPair::new("00".parse().unwrap(), "11".parse().unwrap()).unwrap(),
    };
    let channel = ChannelModel::noiseless();
    let r1 = adversary::run_double_spend(&one, &params, &channel, 4_000, 8).unwrap();
    let r2 = adversary::run_double_spend(&two, &params, &channel, 4_000, 8).unwrap();
    for r in [&r1, &r2] {
        let se = (r.analytical_bound * (1.0 - r.analytical_bound) / r.trials as f64).sqrt();
        assert!(
            (r.empirical_probability - r.analytical_bound).abs() <= 3.0 * se,
            "{r:?}"
        );
    }
    assert!(r2.analytical_bound < r1.analytical_bound);
}

#[test]
fn estimates_are_reproducible_across_thread_counts() {
    let params = CoordinationParams::new(64, 1, 0.15).unwrap();
    let channel = ChannelModel::noiseless();
    let a = adversary::run_double_spend(&breidbart(1), &params, &channel, 500, 99).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| adversary::run_double_spend(&breidbart(1), &params, &channel, 500, 99).unwrap());
    assert_eq!(a, b);
}

#[test]
fn tail_agrees_with_statrs() {
    for &(k, gamma, p) in &[
        (64usize, 0.1, 0.5),
        (200, 0.15, 0.146),
        (500, 0.3, 0.25),
        (1000, 0.12, 0.1),
    ] {
        let limit = (gamma * k as f64 + 1e-9).floor() as u64;
        let reference = Binomial::new(p, k as u64).unwrap().cdf(limit);
        let got = adversary::exact_binomial_tail(k, gamma, p).unwrap();
        assert!(
            (got - reference).abs() <= 1e-9 * reference.max(1e-300) + 1e-15,
            "k={k}: {got} vs {reference}"
        );
    }
}

proptest! {
    #[test]
    fn tail_is_a_probability(k in 0usize..400, gamma in 0.0f64..0.5, p in 0.0f64..=1.0) {
        let t = adversary::exact_binomial_tail(k, gamma, p).unwrap();
        prop_assert!((0.0..=1.0).contains(&t));
    }

    #[test]
    fn tail_grows_with_gamma_and_shrinks_with_p(k in 1usize..300, g in 0.0f64..0.45, dg in 0.0f64..0.05, p in 0.01f64..0.9, dp in 0.0f64..0.09) {
        let base = adversary::exact_binomial_tail(k, g, p).unwrap();
        prop_assert!(adversary::exact_binomial_tail(k, g + dg, p).unwrap() >= base - 1e-12);
        prop_assert!(adversary::exact_binomial_tail(k, g, p + dp).unwrap() <= base + 1e-12);
    }

    #[test]
    fn binding_bound_dominates_the_half_group_tail(half in 1usize..500, gamma in 0.0f64..0.5) {
        // Hoeffding: P(Bin(k, 1/2) ≤ γk) ≤ exp(−2k(1/2 − γ)²)
        let tail = adversary::exact_binomial_tail(half, gamma, 0.5).unwrap();
        prop_assert!(tail <= adversary::binding_bound(2 * half, gamma) * (1.0 + 1e-9));
    }
}
