use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use smoney::bb84::ChannelModel;
use smoney::coordination::CoordinationParams;
use smoney::spacetime::{Event, NetworkLayout};
use smoney::token::{
    self, Bank, HmacKey, PointId, PresentationRejection, PresentationSet, PresentationVerdict, SegmentRef, TokenError,
    User,
};
use smoney::BitString;

fn p(s: &str) -> PointId {
    PointId::from(s)
}

fn layout() -> NetworkLayout {
    NetworkLayout::new(1)
        .unwrap()
        .with("S", Event::at(0.0, 0.0))
        .unwrap()
        .with("A", Event::at(1.0, 0.0))
        .unwrap()
        .with("D", Event::at(2.0, 0.0))
        .unwrap()
        .with("late", Event::at(9.0, 0.0))
        .unwrap()
        .with("side", Event::at(1.0, 20.0))
        .unwrap()
        .with("Q_0", Event::at(10.0, -6.0))
        .unwrap()
        .with("Q_1", Event::at(10.0, 6.0))
        .unwrap()
        // in the future of Q_0 only
        .with("Q_0_after", Event::at(30.0, -10.0))
        .unwrap()
}

fn world(pool: usize, seed: u64) -> (Bank, User, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bank = Bank::new(layout());
    let mut user = User::new("alice", HmacKey::derive(seed, "alice"));
    bank.register_user(user.id().clone(), user.key().clone());
    let params = CoordinationParams::new(48, 1, 0.1).unwrap();
    token::setup_user(
        &mut bank,
        &mut user,
        pool,
        params,
        &ChannelModel::noiseless(),
        &p("S"),
        &mut rng,
    )
    .unwrap();
    (bank, user, rng)
}

fn pair() -> PresentationSet {
    PresentationSet::full(1, "Q_").unwrap()
}

#[test]
fn segments_are_never_reused() {
    let (mut bank, mut user, _) = world(5, 1);
    let mut used = BTreeSet::new();
    for _ in 0..5 {
        let (t, _) = token::acquire_token(&mut bank, &mut user, pair(), &p("A"), None).unwrap();
        for &pos in &t.segment.positions {
            assert!(used.insert((t.segment.instance, pos)));
        }
    }
    assert_eq!(user.free_bits(), 0);
    let err = token::acquire_token(&mut bank, &mut user, pair(), &p("A"), None).unwrap_err();
    assert!(
        matches!(
            err,
            TokenError::PoolExhausted {
                needed: 1,
                available: 0,
                ..
            }
        ),
        "{err}"
    );

    // the bank refuses a segment it has already allocated, whatever the user claims
    let (instance, pos) = *used.iter().next().unwrap();
    let reuse = SegmentRef {
        instance,
        positions: vec![pos],
    };
    let err = bank
        .register_acquisition(user.id(), pair(), reuse, &p("A"), None)
        .unwrap_err();
    assert!(matches!(err, TokenError::SegmentReused { .. }), "{err}");
}

#[test]
fn acquisition_needs_every_presentation_point_in_its_future() {
    let (mut bank, mut user, _) = world(2, 2);
    let err = token::acquire_token(&mut bank, &mut user, pair(), &p("side"), None).unwrap_err();
    assert_eq!(err.code(), "causal");
    // nothing was allocated by the failed attempt
    assert_eq!(user.free_bits(), 2);
}

#[test]
fn pool_must_be_set_up_in_the_acquisition_past() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bank = Bank::new(layout());
    let mut user = User::new("bob", HmacKey::derive(3, "bob"));
    bank.register_user(user.id().clone(), user.key().clone());
    let params = CoordinationParams::new(48, 1, 0.1).unwrap();
    token::setup_user(
        &mut bank,
        &mut user,
        2,
        params,
        &ChannelModel::noiseless(),
        &p("D"),
        &mut rng,
    )
    .unwrap();
    let err = token::acquire_token(&mut bank, &mut user, pair(), &p("A"), None).unwrap_err();
    assert!(matches!(err, TokenError::PoolExhausted { available: 0, .. }), "{err}");
}

#[test]
fn decisions_follow_custody() {
    let (mut bank, mut user, _) = world(2, 4);
    let (mut t, _) = token::acquire_token(&mut bank, &mut user, pair(), &p("D"), None).unwrap();
    let zero: BitString = "0".parse().unwrap();
    // A is before D, where the token was acquired
    let err = token::decide(&mut bank, &user, &mut t, &zero, &p("A")).unwrap_err();
    assert_eq!(err.code(), "causal");
    // late is after D but not in the past of Q_0 / Q_1
    let err = token::decide(&mut bank, &user, &mut t, &zero, &p("late")).unwrap_err();
    assert_eq!(err.code(), "causal");
    assert!(t.is_undecided());
    token::decide(&mut bank, &user, &mut t, &zero, &p("D")).unwrap();
    let err = token::decide(&mut bank, &user, &mut t, &zero, &p("D")).unwrap_err();
    assert_eq!(err.code(), "already_decided");
}

#[test]
fn spent_notice_reaches_later_agents() {
    let (mut bank, mut user, _) = world(1, 5);
    let set = PresentationSet::new(
        [("0".parse().unwrap(), p("Q_0")), ("1".parse().unwrap(), p("Q_0_after"))]
            .into_iter()
            .collect(),
    )
    .unwrap();
    let (mut t, _) = token::acquire_token(&mut bank, &mut user, set, &p("A"), None).unwrap();
    token::decide(&mut bank, &user, &mut t, &"0".parse().unwrap(), &p("D")).unwrap();
    let first = token::present(&user, &mut t, &p("Q_0")).unwrap();
    assert!(bank.validate_presentation(t.id, &p("Q_0"), &first).unwrap().is_accept());
    // replaying the same unveil at the same agent
    assert_eq!(
        bank.validate_presentation(t.id, &p("Q_0"), &first).unwrap(),
        PresentationVerdict::Reject(PresentationRejection::AlreadySpent)
    );
    let second = token::present(&user, &mut t, &p("Q_0_after")).unwrap();
    assert_eq!(
        bank.validate_presentation(t.id, &p("Q_0_after"), &second).unwrap(),
        PresentationVerdict::Reject(PresentationRejection::AlreadySpent)
    );
}

#[test]
fn transfer_rules() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut bank = Bank::new(layout());
    let params = CoordinationParams::new(48, 1, 0.1).unwrap();
    let mut users: Vec<User> = ["a", "b", "c"]
        .iter()
        .map(|id| User::new(*id, HmacKey::derive(6, id)))
        .collect();
    for u in users.iter_mut() {
        bank.register_user(u.id().clone(), u.key().clone());
        token::setup_user(&mut bank, u, 2, params, &ChannelModel::noiseless(), &p("S"), &mut rng).unwrap();
    }
    let (mut t, _) = token::acquire_token(&mut bank, &mut users[0], pair(), &p("A"), None).unwrap();

    // only the owner's key produces an acceptable signature
    let (left, right) = users.split_at_mut(1);
    let mut by_b = right[0].sign_transfer(&t, right[1].id(), &p("D"), None);
    by_b.payload.from = left[0].id().clone();
    let err = token::transfer(&mut bank, &mut t, &by_b, &mut right[1]).unwrap_err();
    assert_eq!(err.code(), "authentication");

    // a transfer signed for another recipient is not usable by a third party
    let to_b = left[0].sign_transfer(&t, right[0].id(), &p("D"), None);
    let err = token::transfer(&mut bank, &mut t, &to_b, &mut right[1]).unwrap_err();
    assert_eq!(err.code(), "message_mismatch");

    token::transfer(&mut bank, &mut t, &to_b, &mut right[0]).unwrap();
    assert_eq!(t.owner(), right[0].id());
    // the previous owner can no longer act on it
    let err = token::decide(&mut bank, &left[0], &mut t, &"1".parse().unwrap(), &p("D")).unwrap_err();
    assert_eq!(err.code(), "not_owner");
    token::decide(&mut bank, &right[0], &mut t, &"1".parse().unwrap(), &p("D")).unwrap();
    let msg = token::present(&right[0], &mut t, &p("Q_1")).unwrap();
    assert!(bank.validate_presentation(t.id, &p("Q_1"), &msg).unwrap().is_accept());
}

#[test]
fn three_dimensional_layout() {
    let layout = NetworkLayout::new(3)
        .unwrap()
        .with("S", Event::new(0.0, vec![0.0, 0.0, 0.0]).unwrap())
        .unwrap()
        .with("D", Event::new(1.0, vec![0.0, 0.0, 0.0]).unwrap())
        .unwrap()
        .with("Q_00", Event::new(10.0, vec![5.0, 0.0, 0.0]).unwrap())
        .unwrap()
        .with("Q_01", Event::new(10.0, vec![-5.0, 0.0, 0.0]).unwrap())
        .unwrap()
        .with("Q_10", Event::new(10.0, vec![0.0, 5.0, 0.0]).unwrap())
        .unwrap()
        .with("Q_11", Event::new(10.0, vec![0.0, 0.0, 5.0]).unwrap())
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bank = Bank::new(layout);
    let mut user = User::new("u", HmacKey::derive(7, "u"));
    bank.register_user(user.id().clone(), user.key().clone());
    let params = CoordinationParams::new(48, 1, 0.1).unwrap();
    token::setup_user(
        &mut bank,
        &mut user,
        2,
        params,
        &ChannelModel::noiseless(),
        &p("S"),
        &mut rng,
    )
    .unwrap();
    let (mut t, _) = token::acquire_token(
        &mut bank,
        &mut user,
        PresentationSet::full(2, "Q_").unwrap(),
        &p("S"),
        None,
    )
    .unwrap();
    let b: BitString = "10".parse().unwrap();
    token::decide(&mut bank, &user, &mut t, &b, &p("D")).unwrap();
    for q in ["Q_00", "Q_01", "Q_10", "Q_11"] {
        let msg = token::present(&user, &mut t, &p(q)).unwrap();
        let verdict = bank.validate_presentation(t.id, &p(q), &msg).unwrap();
        assert_eq!(verdict.is_accept(), q == "Q_10", "{q}: {verdict:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn honest_tokens_redeem_only_at_their_label(m in 1usize..=3, seed in any::<u64>(), b_index in 0usize..8) {
        let b = BitString::from_index(b_index % (1 << m), m);
        let mut layout = NetworkLayout::new(1).unwrap().with("S", Event::at(0.0, 0.0)).unwrap();
        let set = PresentationSet::full(m, "Q_").unwrap();
        for (i, (_, q)) in set.iter().enumerate() {
            layout.insert(q.as_str(), Event::at(20.0, -12.0 + 4.0 * i as f64)).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bank = Bank::new(layout);
        let mut user = User::new("u", HmacKey::derive(seed, "u"));
        bank.register_user(user.id().clone(), user.key().clone());
        let params = CoordinationParams::new(40, 1, 0.1).unwrap();
        token::setup_user(&mut bank, &mut user, m, params, &ChannelModel::noiseless(), &p("S"), &mut rng).unwrap();
        let (mut t, _) = token::acquire_token(&mut bank, &mut user, set.clone(), &p("S"), None).unwrap();
        let msg = token::decide(&mut bank, &user, &mut t, &b, &p("S")).unwrap();
        let x = user.segment_bits(&t.segment).unwrap();
        let mask: BitString = msg.masks.iter().map(|&(_, bit)| bit).collect();
        prop_assert_eq!(&mask, &(&x ^ &b));
        for (label, q) in set.iter() {
            let present = token::present(&user, &mut t, q).unwrap();
            let verdict = bank.validate_presentation(t.id, q, &present).unwrap();
            prop_assert_eq!(verdict.is_accept(), *label == b);
        }
    }
}
