use chrono::{Duration, NaiveDate, NaiveDateTime};
use csgp_hedge::hedge::{
    expected_loss, optimize_positions, HedgeTerms, Loss, OptimizerOptions, Position, ScenarioSet,
    V_MAX, V_MIN,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

// Monday 2018-01-08 00:00; hours 0..7 are off-peak, 7..19 peak.
fn start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2018, 1, 8)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap()
}

fn scenarios(seed: u64, hours: impl Iterator<Item = i64>, n: usize) -> ScenarioSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = hours
        .map(|h| {
            let s = (0..n).map(|_| rng.random_range(20.0..90.0)).collect();
            let l = (0..n).map(|_| rng.random_range(0.3..0.9)).collect();
            (start() + Duration::hours(h), s, l)
        })
        .collect();
    ScenarioSet::from_draws(draws).unwrap()
}

fn random_position(rng: &mut ChaCha8Rng) -> Position {
    Position::new(rng.random_range(V_MIN..V_MAX), rng.random_range(0.0..V_MAX))
}

fn midpoint_gap(sc: &ScenarioSet, terms: &HedgeTerms, a: Position, b: Position) -> f64 {
    let loss = Loss::exponential();
    let m = Position::new(0.5 * (a.v_base + b.v_base), 0.5 * (a.v_peak + b.v_peak));
    let fa = expected_loss(sc, a, terms, loss).unwrap();
    let fb = expected_loss(sc, b, terms, loss).unwrap();
    let fm = expected_loss(sc, m, terms, loss).unwrap();
    fm - 0.5 * (fa + fb)
}

// Off-peak payoffs are affine in the position, so the loss is convex there.
#[test]
fn off_peak_loss_is_convex() {
    let terms = HedgeTerms::new(45.0, 60.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..50 {
        let sc = scenarios(seed, 0..7, 200);
        let (a, b) = (random_position(&mut rng), random_position(&mut rng));
        let gap = midpoint_gap(&sc, &terms, a, b);
        assert!(gap <= 1e-12, "seed {seed}: gap {gap}");
    }
}

// Peak and off-peak prices around different levels, load correlated with
// price.
fn correlated_scenarios(seed: u64, hours: i64, n: usize) -> ScenarioSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = (0..hours)
        .map(|h| {
            let t = start() + Duration::hours(h);
            let level = if (7..19).contains(&(h % 24)) {
                55.0
            } else {
                36.0
            };
            let (mut s, mut l) = (Vec::new(), Vec::new());
            for _ in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                let e: f64 = rng.sample(StandardNormal);
                s.push(level + 15.0 * z);
                l.push(0.6 + 0.08 * (0.6 * z + 0.8 * e));
            }
            (t, s, l)
        })
        .collect();
    ScenarioSet::from_draws(draws).unwrap()
}

// The peak payoff depends on the position through F~ as well, which breaks
// midpoint convexity for some pairs. Kept as a record of the stricter claim;
// run with --ignored to see it fail.
#[test]
#[ignore]
fn convexity_midpoint_inequality() {
    let terms = HedgeTerms::new(45.0, 55.0).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..10 {
        let sc = correlated_scenarios(500 + seed, 50, 500);
        let mut rng = ChaCha8Rng::seed_from_u64(550 + seed);
        for _ in 0..10 {
            let (a, b) = (random_position(&mut rng), random_position(&mut rng));
            worst = worst.max(midpoint_gap(&sc, &terms, a, b));
        }
    }
    assert!(worst <= 1e-9, "worst midpoint gap {worst}");
}

#[test]
fn optimum_beats_random_positions() {
    let terms = HedgeTerms::new(45.0, 60.0).unwrap();
    let sc = scenarios(2, 0..48, 100);
    let loss = Loss::exponential();
    let opt = optimize_positions(&sc, &terms, loss, &OptimizerOptions::default()).unwrap();
    let p = opt.position;
    assert!((V_MIN..=V_MAX).contains(&p.v_base) && (0.0..=V_MAX).contains(&p.v_peak));
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let q = random_position(&mut rng);
        assert!(opt.loss <= expected_loss(&sc, q, &terms, loss).unwrap() + 1e-12);
    }
}

#[test]
fn optimizer_is_deterministic() {
    let terms = HedgeTerms::new(40.0, 52.0).unwrap();
    let sc = scenarios(4, 0..30, 80);
    let run = || {
        optimize_positions(
            &sc,
            &terms,
            Loss::exponential(),
            &OptimizerOptions::default(),
        )
        .unwrap()
        .position
    };
    assert_eq!(run(), run());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // Shifting every off-peak load by c shifts the optimal base volume by c
    // when base volume is the only thing that matters.
    #[test]
    fn off_peak_optimum_translates(seed in 0u64..1000, c in -0.2f64..0.2) {
        // forward at the mean draw keeps the optimum away from the box edges
        let terms = HedgeTerms::new(55.0, 60.0).unwrap();
        let sc = scenarios(seed, 0..7, 60);
        let shifted = ScenarioSet::new(
            sc.hours()
                .iter()
                .cloned()
                .map(|mut h| {
                    h.load.iter_mut().for_each(|l| *l += c);
                    h
                })
                .collect(),
        )
        .unwrap();
        let opts = OptimizerOptions::default();
        let a = optimize_positions(&sc, &terms, Loss::exponential(), &opts).unwrap();
        let b = optimize_positions(&shifted, &terms, Loss::exponential(), &opts).unwrap();
        // only interior optima translate
        let inside = |v: f64| v > V_MIN + 1e-3 && v < V_MAX - 1e-3;
        prop_assume!(inside(a.position.v_base) && inside(b.position.v_base));
        prop_assert!((b.position.v_base - a.position.v_base - c).abs() < 1e-4,
            "{} vs {} + {c}", b.position.v_base, a.position.v_base);
    }
}
