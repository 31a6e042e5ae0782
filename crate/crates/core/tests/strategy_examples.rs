mod common;

use common::*;
use exitgame::problem::*;
use exitgame::simulator::solo_path_x;
use exitgame::solver::Convention;
use exitgame::strategy::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn zero_cost_feedback_plays_the_first_control() {
    let p = zero_game();
    for conv in [Convention::Lower, Convention::Upper] {
        let v = solved(&p, &[5, 5], 0.1, 1e-12, conv);
        let fx = feedback_strategy(&p, &v, Player::X, 0.1).unwrap();
        let beta = ControlSignal::constant(0.1, &[1.0], 12).unwrap();
        let alpha = fx.respond((&[0.5], &[0.5]), &beta).unwrap();
        assert_eq!(fx.kind(), StrategyKind::Feedback);
        assert!(alpha.samples().iter().all(|a| a == &vec![-1.0]));
    }
}

#[test]
fn eikonal_feedback_heads_for_the_nearest_face() {
    let p = eikonal(0.0);
    let v = solved(&p, &[101, 3], 0.005, 1e-10, Convention::Lower);
    let fx = feedback_strategy(&p, &v, Player::X, 0.005).unwrap();
    let beta = ControlSignal::constant(0.005, &[0.0], 10).unwrap();
    let alpha = fx.respond((&[0.3], &[0.0]), &beta).unwrap();
    assert!(alpha.samples().iter().all(|a| a == &vec![-1.0]));
    let alpha = fx.respond((&[0.7], &[0.0]), &beta).unwrap();
    assert_eq!(alpha.at(0), &[1.0]);
}

#[test]
fn feedback_needs_a_solved_grid() {
    let p = zero_game();
    assert!(feedback_strategy(&p, &grid(&p, &[3, 3]), Player::X, 0.1).is_err());
}

fn slow_lipschitz() -> GameProblem {
    GameProblem::new(
        unit(),
        unit(),
        Dynamics::new(XDrift::Decoupled(drift(|_, a| a.to_vec())), drift(|_, b| b.to_vec()), 1e-12, 1.0).unwrap(),
        scalars(&[-1.0, 1.0]),
        scalars(&[-1.0, 1.0]),
        Costs::constant(0.0, 0.0, 0.0, 0.0, 1.0).unwrap(),
    )
    .unwrap()
}

#[test]
fn epsilon_of_equal_points_is_zero() {
    let sp = SonerParams::auto(0.25, 1.0, 0.0).unwrap();
    assert_eq!(epsilon_bound(&pursuit(), &[0.3], &[0.3], &sp, Player::Y), 0.0);
}

#[test]
fn epsilon_without_state_dependence_is_the_distance() {
    let sp = SonerParams::auto(0.25, 1.0, 0.0).unwrap();
    let e = epsilon_bound(&slow_lipschitz(), &[0.3], &[0.4], &sp, Player::X);
    assert!((e - 0.1).abs() < 1e-12);
}

#[test]
fn epsilon_grows_with_the_gronwall_factor() {
    let sp = SonerParams::auto(0.5, 1.0, 0.0).unwrap();
    let e = epsilon_bound(&pursuit(), &[0.3], &[0.4], &sp, Player::Y);
    assert!((e - 0.5f64.exp() * 0.1).abs() < 1e-12);
}

/// `y' = b + sin(2y)/2` on (0, 1): Lipschitz constant 1.
fn wavy_y() -> GameProblem {
    GameProblem::new(
        unit(),
        unit(),
        Dynamics::new(
            XDrift::Decoupled(drift(|_, a| a.to_vec())),
            drift(|y, b| vec![b[0] + 0.5 * (2.0 * y[0]).sin()]),
            1.0,
            1.5,
        )
        .unwrap(),
        scalars(&[-1.0, 1.0]),
        scalars(&[-1.0, 0.0, 1.0]),
        Costs::constant(0.0, 0.0, 0.0, 0.0, 1.0).unwrap(),
    )
    .unwrap()
}

#[test]
fn sampled_epsilon_never_exceeds_the_bound() {
    let p = wavy_y();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let gronwall = SonerParams::auto(0.25, 1.0, 0.0).unwrap();
    for _ in 0..200 {
        let y1 = [rng.random_range(0.0..=1.0)];
        let y2 = [(y1[0] + rng.random_range(-0.1..0.1f64)).clamp(0.0, 1.0)];
        let probes = (0..4)
            .map(|_| ControlSignal::random(&mut rng, p.controls_b(), 0.01, 25, 8))
            .collect();
        let sampled = SonerParams {
            eps_mode: EpsMode::Sampled { probes },
            ..gronwall.clone()
        };
        let s = epsilon_bound(&p, &y1, &y2, &sampled, Player::Y);
        let g = epsilon_bound(&p, &y1, &y2, &gronwall, Player::Y);
        assert!(s <= g + 1e-12, "{s} > {g} at {y1:?}, {y2:?}");
    }
}

#[test]
fn tuning_without_contact_is_the_identity() {
    let p = pursuit();
    let sp = SonerParams::auto(0.25, 1.0, 0.0).unwrap();
    let beta = ControlSignal::new(0.01, (0..40).map(|k| vec![if k % 2 == 0 { 1.0 } else { -1.0 }]).collect()).unwrap();
    let t = tune_control_detailed(&p, &beta, &[0.45], &[0.5], &sp).unwrap();
    assert_eq!(t.signal, beta);
    assert_eq!(t.inserted, 0);
}

#[test]
fn tuning_with_zero_epsilon_is_the_identity() {
    let p = pursuit();
    let sp = SonerParams::auto(0.25, 1.0, 0.0).unwrap();
    let beta = ControlSignal::constant(0.01, &[1.0], 80).unwrap();
    assert_eq!(tune_control(&p, &beta, &[0.7], &[0.7], &sp).unwrap(), beta);
}

#[test]
fn tuning_inserts_inward_steps_when_the_copy_hits_the_face() {
    let p = pursuit();
    let sp = SonerParams::auto(0.25, 1.0, 0.0).unwrap();
    let beta = ControlSignal::constant(0.01, &[1.0], 20).unwrap();
    let t = tune_control_detailed(&p, &beta, &[0.8], &[0.9], &sp).unwrap();
    let n = insertion_steps(sp.k_gain, 0.25f64.exp() * 0.1, 0.01);
    assert_eq!(t.inserted, n);
    assert_eq!(t.signal.len(), 20 + n);
    assert_eq!(t.insert_at, vec![9]);
    assert!((t.signal.at(9)[0] + 1.0).abs() < 1e-15);
    // the original controls are replayed after the insertion
    assert_eq!(t.signal.at(9 + n), &[1.0]);
}

#[test]
fn tuned_strategy_with_equal_starts_is_unchanged() {
    let p = pursuit();
    let sp = SonerParams::auto(0.25, 1.0, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let alpha = ControlSignal::random(&mut rng, p.controls_a(), 0.01, 150, 10);
    let gamma = StrategyMap::open_loop(Player::X, alpha);
    let ts = tune_strategy(&p, &gamma, (&[0.4], &[0.4]), (&[0.6], &[0.6]), &sp, &sp).unwrap();
    assert_eq!(ts.map().kind(), StrategyKind::Tuned);
    for _ in 0..20 {
        let beta = ControlSignal::random(&mut rng, p.controls_b(), 0.01, 150, 10);
        let r = ts.respond_full(&beta).unwrap();
        assert_eq!(r.beta_tilde.signal, beta);
        assert_eq!(r.alpha_tilde.signal, r.alpha);
        assert_eq!(r.alpha, gamma.respond((&[0.4], &[0.6]), &beta).unwrap());
    }
}

#[test]
fn margin_below_disturbance_is_rejected() {
    assert!(matches!(SonerParams::auto(0.25, 0.5, 0.5), Err(exitgame::GameError::MarginTooSmall { .. })));
    assert!(SonerParams::auto(0.0, 1.0, 0.0).is_err());
}

#[test]
fn tuned_copy_outlives_the_original() {
    let p = pursuit();
    let sp = SonerParams::auto(0.25, 1.0, 0.0).unwrap();
    let dt = 0.01;
    let steps = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let x2 = [rng.random_range(0.0..=1.0)];
        let x1 = [(x2[0] + rng.random_range(-0.05..0.05f64)).clamp(0.0, 1.0)];
        let y = [rng.random_range(0.0..=1.0)];
        let gamma = StrategyMap::open_loop(Player::X, ControlSignal::random(&mut rng, p.controls_a(), dt, steps, 20));
        let ts = tune_strategy(&p, &gamma, (&x1, &x2), (&y, &y), &sp, &sp).unwrap();
        let beta = ControlSignal::random(&mut rng, p.controls_b(), dt, steps, 20);
        let r = ts.respond_full(&beta).unwrap();
        let horizon = steps as f64 * dt;
        let tuned = solo_path_x(&p, &x1, &r.alpha_tilde.signal, &beta, steps);
        let original = solo_path_x(&p, &x2, &r.alpha, &r.beta_tilde.signal, steps);
        let (t1, t2) = (tuned.exit_or(horizon), original.exit_or(horizon));
        assert!(t1 >= t2 - dt - 1e-12, "{t1} < {t2} from {x1:?} / {x2:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tuned_and_feedback_maps_are_non_anticipating(seed in any::<u64>(), k in 0usize..60, x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
        let p = pursuit();
        let dt = 0.05;
        let v = solved(&p, &[21, 21], dt, 1e-9, Convention::Lower);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b1 = ControlSignal::random(&mut rng, p.controls_b(), dt, 60, 6);
        let tail = ControlSignal::random(&mut rng, p.controls_b(), dt, 60, 6);
        let samples = (0..60).map(|j| if j <= k { b1.at(j).to_vec() } else { tail.at(j).to_vec() }).collect();
        let b2 = ControlSignal::new(dt, samples).unwrap();
        let fb = feedback_strategy(&p, &v, Player::X, dt).unwrap();
        let sp = SonerParams::auto(0.25, 1.0, 0.0).unwrap();
        let x2 = (x + 0.03).min(1.0);
        let tuned = tune_strategy(&p, &fb, (&[x], &[x2]), (&[y], &[y]), &sp, &sp).unwrap().map();
        for map in [fb, tuned] {
            let r1 = map.respond((&[x], &[y]), &b1).unwrap();
            let r2 = map.respond((&[x], &[y]), &b2).unwrap();
            prop_assert!(r1.agrees_with(&r2, k + 1), "{:?} differs at {:?}", map.kind(), r1.first_difference(&r2));
        }
    }

    #[test]
    fn tuned_length_counts_inserted_steps(seed in any::<u64>(), y1 in 0.0f64..=1.0, d in -0.1f64..0.1) {
        let p = pursuit();
        let sp = SonerParams::auto(0.25, 1.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let beta = ControlSignal::random(&mut rng, p.controls_b(), 0.01, 100, 15);
        let y2 = (y1 + d).clamp(0.0, 1.0);
        let t = tune_control_detailed(&p, &beta, &[y1], &[y2], &sp).unwrap();
        prop_assert_eq!(t.signal.len(), beta.len() + t.inserted);
        let per_leg = insertion_steps(sp.k_gain, 0.25f64.exp() * (y1 - y2).abs(), 0.01);
        prop_assert_eq!(t.inserted, per_leg * t.insert_at.len());
        let legs: Vec<usize> = t.insert_at.iter().map(|&k| (k as f64 * 0.01 / 0.25 + 1e-9).floor() as usize).collect();
        prop_assert!(legs.windows(2).all(|w| w[0] < w[1]));
    }
}
