use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use smoney::bb84::{self, Basis, ChannelModel, Label, PulseDescription};
use smoney::coordination::{self, CoordinationParams, InstanceId};
use smoney::BitString;

fn chi2_critical(df: f64) -> f64 {
    ChiSquared::new(df).unwrap().inverse_cdf(0.999)
}

fn pulse(r: bool, s: Basis) -> PulseDescription {
    PulseDescription {
        label: Label::new(1, 1),
        r,
        s,
    }
}

#[test]
fn projective_outcomes_follow_born_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let samples = 20_000;
    for _ in 0..12 {
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let p = pulse(
            rng.random(),
            if rng.random() {
                Basis::Hadamard
            } else {
                Basis::Computational
            },
        );
        let state = bb84::statevector(&p);
        let (p0, p1) = bb84::projective_probabilities(&state, theta);
        assert!((p0 + p1 - 1.0).abs() < 1e-12);
        let ones = (0..samples)
            .filter(|_| bb84::measure_projective(&state, theta, &mut rng).unwrap())
            .count() as f64;
        let zeros = samples as f64 - ones;
        let chi2 = [(zeros, p0), (ones, p1)]
            .iter()
            .filter(|(_, q)| *q > 1e-12)
            .map(|(obs, q)| (obs - q * samples as f64).powi(2) / (q * samples as f64))
            .sum::<f64>();
        assert!(chi2 < chi2_critical(1.0), "θ={theta} p0={p0}: {zeros}/{samples}");
    }
}

#[test]
fn honest_and_projective_paths_agree_on_bb84_bases() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let noiseless = ChannelModel::noiseless();
    let samples = 20_000;
    for r in [false, true] {
        for s in [Basis::Computational, Basis::Hadamard] {
            for (basis, theta) in [
                (Basis::Computational, 0.0),
                (Basis::Hadamard, std::f64::consts::FRAC_PI_4),
            ] {
                let p = pulse(r, s);
                let honest = (0..samples)
                    .filter(|_| bb84::measure_bb84(&p, basis, &noiseless, &mut rng))
                    .count();
                let quantum = (0..samples)
                    .filter(|_| bb84::measure_projective(&bb84::statevector(&p), theta, &mut rng).unwrap())
                    .count();
                if s == basis {
                    assert_eq!(honest, if r { samples } else { 0 });
                    assert_eq!(quantum, honest);
                } else {
                    // both fair coins: difference of two Bin(N, 1/2) has sd √(N/2)
                    let sd = (samples as f64 / 2.0).sqrt();
                    assert!(
                        (honest as f64 - quantum as f64).abs() < 4.0 * sd,
                        "{honest} vs {quantum}"
                    );
                }
            }
        }
    }
}

#[test]
fn wrong_basis_outcomes_are_uniform_in_pairs() {
    // outcomes of consecutive wrong-basis measurements: all four pairs equally likely
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut counts = [0f64; 4];
    let noiseless = ChannelModel::noiseless();
    let samples = 40_000;
    for _ in 0..samples {
        let a = bb84::measure_bb84(
            &pulse(false, Basis::Computational),
            Basis::Hadamard,
            &noiseless,
            &mut rng,
        );
        let b = bb84::measure_bb84(
            &pulse(true, Basis::Hadamard),
            Basis::Computational,
            &noiseless,
            &mut rng,
        );
        counts[a as usize * 2 + b as usize] += 1.0;
    }
    let e = samples as f64 / 4.0;
    let chi2: f64 = counts.iter().map(|c| (c - e).powi(2) / e).sum();
    assert!(chi2 < chi2_critical(3.0), "{counts:?}");
}

#[test]
fn loss_rate_matches_channel() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let r = BitString::random(4000, &mut rng);
    let s = BitString::random(4000, &mut rng);
    let pulses = bb84::prepare_pulses(&r, &s, 1000, 4).unwrap();
    for p_loss in [0.0, 0.1, 0.5, 0.9] {
        let channel = ChannelModel::new(p_loss, 0.0).unwrap();
        let received = bb84::transmit(&pulses, &channel, &mut rng).len() as f64;
        let expected = 4000.0 * (1.0 - p_loss);
        let sd = (4000.0 * p_loss * (1.0 - p_loss)).sqrt();
        assert!(
            (received - expected).abs() <= 4.0 * sd + 1e-9,
            "loss {p_loss}: {received}"
        );
    }
}

/// Number of received pulses in the first bit group, and how many of them
/// the issuer prepared in the computational basis.
fn receipt_statistics(x: &BitString, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = CoordinationParams::new(32, x.len(), 0.1).unwrap();
    let (mut issuer, pulses) = coordination::issuer_init(InstanceId(seed), params, &mut rng);
    let channel = ChannelModel::new(0.3, 0.02).unwrap();
    let received = bb84::transmit(&pulses, &channel, &mut rng);
    let commit = coordination::user_commit(
        issuer.instance,
        pulses.iter().filter(|p| received.contains(&p.label)),
        x,
        &channel,
        &mut rng,
    )
    .unwrap();
    issuer.register_receipt(commit.received_labels.clone()).unwrap();
    let labels = issuer.received_labels().unwrap();
    let group: Vec<&Label> = labels.iter().filter(|l| l.k == 1).collect();
    let computational = group
        .iter()
        .filter(|l| issuer.prepared(***l).1 == Basis::Computational)
        .count();
    (group.len(), computational)
}

#[test]
fn receipts_do_not_depend_on_the_committed_string() {
    let zeros: BitString = "000".parse().unwrap();
    let ones: BitString = "111".parse().unwrap();
    // same seed: identical issuer-visible data
    for seed in 0..200 {
        assert_eq!(receipt_statistics(&zeros, seed), receipt_statistics(&ones, seed));
    }

    // independent seeds: permutation test on the computational share of receipts
    let samples = 10_000u64;
    let a: Vec<f64> = (0..samples).map(|s| receipt_statistics(&zeros, s).1 as f64).collect();
    let b: Vec<f64> = (0..samples)
        .map(|s| receipt_statistics(&ones, s + samples).1 as f64)
        .collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let observed = (mean(&a) - mean(&b)).abs();
    let mut pooled: Vec<f64> = a.iter().chain(&b).copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rounds = 500;
    let mut as_extreme = 0;
    for _ in 0..rounds {
        rand::seq::SliceRandom::shuffle(pooled.as_mut_slice(), &mut rng);
        let (x, y) = pooled.split_at(samples as usize);
        if (mean(x) - mean(y)).abs() >= observed {
            as_extreme += 1;
        }
    }
    let p_value = (as_extreme + 1) as f64 / (rounds + 1) as f64;
    assert!(p_value > 0.001, "p = {p_value}");
}
