//! Simulators checked against the SHS solution and against each other.

use aoswake::analyze as analyze_reexport;
use aoswake::desim::{record_path, simulate, simulate_generic, SimConfig, SimEvent};
use aoswake::policies::{analyze, build, phase_fractions, PolicyKind, PolicyParams};
use aoswake::shs::ShsModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const K: f64 = 3.0;

fn config(horizon: f64, batches: usize, seed: u64) -> SimConfig {
    SimConfig {
        horizon,
        warmup: horizon / 100.0,
        seed,
        batches,
        ..SimConfig::default()
    }
}

fn random_params(rng: &mut ChaCha8Rng) -> PolicyParams {
    let mut lu = || rng.random_range(0.3f64.ln()..3.0f64.ln()).exp();
    let (lambda, mu, d, theta, s) = (lu(), lu(), lu(), lu(), lu());
    PolicyParams {
        lambda,
        mu,
        d,
        theta,
        s,
        n: rng.random_range(1..=4),
        ..PolicyParams::default()
    }
}

fn random_model(rng: &mut ChaCha8Rng) -> ShsModel {
    let n = rng.random_range(3..=6);
    let mut m = ShsModel::new();
    for q in 0..n {
        let growth = if rng.random_bool(0.6) { 1.0 } else { 0.0 };
        m.add_state(format!("q{q}"), growth, rng.random_range(0.0..2.0));
    }
    for q in 0..n {
        let reset = if q == 0 || rng.random_bool(0.3) {
            0.0
        } else {
            1.0
        };
        m.add_transition(q, (q + 1) % n, rng.random_range(0.3..3.0), reset);
    }
    for _ in 0..n {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            let reset = if rng.random_bool(0.5) { 0.0 } else { 1.0 };
            m.add_transition(a, b, rng.random_range(0.3..3.0), reset);
        }
    }
    m
}

#[test]
fn reexported_analyze_is_the_policy_analyze() {
    let p = PolicyParams::default();
    let a = analyze(PolicyKind::MultiSleep, &p).unwrap();
    let b = analyze_reexport(PolicyKind::MultiSleep, &p).unwrap();
    assert_eq!(a.avg_aos, b.avg_aos);
}

#[test]
fn physical_matches_unit_spot_values() {
    let p = PolicyParams::default();
    let cfg = config(2e5, 20, 11);
    for (kind, aos, power) in [
        (PolicyKind::NPolicy, 0.8, 0.6),
        (PolicyKind::MultiSleep, 7.0 / 6.0, 0.5),
    ] {
        let sim = simulate(kind, &p, &cfg).unwrap();
        assert!(
            sim.avg_aos.agrees_with(aos, K),
            "{kind} aos {:?}",
            sim.avg_aos
        );
        assert!(
            sim.avg_power.agrees_with(power, K),
            "{kind} power {:?}",
            sim.avg_power
        );
    }
}

#[test]
fn generic_matches_n_policy_unit() {
    let built = build(PolicyKind::NPolicy, &PolicyParams::default()).unwrap();
    let sim = simulate_generic(&built.model, &config(2e5, 20, 5)).unwrap();
    assert!(sim.avg_aos.agrees_with(0.8, K), "{:?}", sim.avg_aos);
    assert!(sim.avg_power.agrees_with(0.6, K), "{:?}", sim.avg_power);
}

#[test]
fn generic_matches_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..12 {
        let m = random_model(&mut rng);
        let exact = aoswake::policies::analyze_model(&m).unwrap();
        let sim = simulate_generic(&m, &config(5e4, 20, 100 + i)).unwrap();
        assert!(
            sim.avg_aos.agrees_with(exact.avg_aos, K),
            "model {i}: {:?} vs {}",
            sim.avg_aos,
            exact.avg_aos
        );
        assert!(
            sim.avg_power.agrees_with(exact.avg_power, K),
            "model {i} power"
        );
    }
}

#[test]
fn zero_growth_gives_zero_age() {
    let mut m = ShsModel::new();
    m.add_state("a", 0.0, 1.0);
    m.add_state("b", 0.0, 0.0);
    m.add_transition(0, 1, 1.0, 0.0);
    m.add_transition(1, 0, 2.0, 1.0);
    let sim = simulate_generic(&m, &config(1e4, 4, 1)).unwrap();
    assert_eq!(sim.avg_aos.mean, 0.0);
    assert_eq!(sim.avg_aos.std_err, 0.0);
}

#[test]
fn physical_matches_generic_on_random_tuples() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for kind in PolicyKind::ALL {
        for i in 0..20 {
            let p = random_params(&mut rng);
            let cfg = config(2e4, 20, 1000 + i);
            let physical = simulate(kind, &p, &cfg).unwrap();
            let generic = simulate_generic(&build(kind, &p).unwrap().model, &cfg).unwrap();
            let z_aos = physical
                .avg_aos
                .z_score(generic.avg_aos.mean, generic.avg_aos.std_err);
            let z_power = physical
                .avg_power
                .z_score(generic.avg_power.mean, generic.avg_power.std_err);
            assert!(z_aos <= K, "{kind} {p}: aos z = {z_aos}");
            assert!(z_power <= K, "{kind} {p}: power z = {z_power}");
        }
    }
}

#[test]
fn sample_path_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for kind in PolicyKind::ALL {
        for i in 0..5 {
            let p = random_params(&mut rng);
            let records = record_path(kind, &p, &config(500.0, 2, i), 1_000_000).unwrap();
            assert!(records.len() > 10);
            for w in records.windows(2) {
                let (a, b) = (w[0], w[1]);
                assert!(b.aos >= 0.0);
                assert!(b.time >= a.time);
                let dt = b.time - a.time;
                if b.aos < a.aos - 1e-9 && dt < 1e-12 {
                    assert_eq!(
                        b.event,
                        SimEvent::ServiceCompletion,
                        "{kind}: drop at {b:?}"
                    );
                    assert_eq!(b.aos, 0.0);
                } else if dt > 1e-9 {
                    let slope = (b.aos - a.aos) / dt;
                    assert!(
                        slope.abs() < 1e-6 || (slope - 1.0).abs() < 1e-6,
                        "{kind}: slope {slope} between {a:?} and {b:?}"
                    );
                }
            }
        }
    }
}

#[test]
fn phase_fractions_match_stationary_mass() {
    let p = PolicyParams {
        lambda: 0.7,
        mu: 1.5,
        d: 0.8,
        theta: 0.6,
        s: 1.3,
        n: 3,
        ..PolicyParams::default()
    };
    for kind in PolicyKind::ALL {
        let built = build(kind, &p).unwrap();
        let exact = analyze(kind, &p).unwrap();
        let sim = simulate(kind, &p, &config(1e5, 20, 3)).unwrap();
        let total: f64 = sim.per_phase_time_fraction.values().map(|e| e.mean).sum();
        assert!(
            (total - 1.0).abs() <= 1e-9,
            "{kind}: fractions sum to {total}"
        );
        for (class, mass) in phase_fractions(&built, &exact.pi) {
            let est = sim
                .per_phase_time_fraction
                .get(class.as_str())
                .copied()
                .unwrap_or(aoswake::desim::Estimate {
                    mean: 0.0,
                    std_err: 0.0,
                });
            assert!(
                est.agrees_with(mass, K),
                "{kind} {class:?}: {est:?} vs {mass}"
            );
        }
    }
}

#[test]
fn simulation_is_deterministic() {
    let p = PolicyParams {
        lambda: 2.0,
        ..PolicyParams::default()
    };
    let cfg = config(1e4, 4, 42);
    for kind in PolicyKind::ALL {
        assert_eq!(
            simulate(kind, &p, &cfg).unwrap(),
            simulate(kind, &p, &cfg).unwrap()
        );
    }
    let m = build(PolicyKind::NPolicy, &p).unwrap().model;
    assert_eq!(
        simulate_generic(&m, &cfg).unwrap(),
        simulate_generic(&m, &cfg).unwrap()
    );
    let other = simulate(PolicyKind::NPolicy, &p, &SimConfig { seed: 43, ..cfg }).unwrap();
    assert_ne!(other, simulate(PolicyKind::NPolicy, &p, &cfg).unwrap());
}

#[test]
fn vanishing_traffic_sleeps_with_no_age() {
    let p = PolicyParams {
        lambda: 1e-6,
        ..PolicyParams::default()
    };
    for kind in PolicyKind::ALL {
        let exact = analyze(kind, &p).unwrap();
        assert!(exact.avg_aos < 1e-5, "{kind}: {}", exact.avg_aos);
        let sim = simulate(kind, &p, &config(1e4, 4, 8)).unwrap();
        assert!(sim.avg_aos.mean < 1e-3, "{kind}: {:?}", sim.avg_aos);
        // Almost all time is spent asleep (or, for single-sleep, idling after a wake-up).
        assert!(exact.avg_power < 0.51);
    }
}

#[test]
fn warmup_insensitivity() {
    let p = PolicyParams {
        lambda: 2.0,
        ..PolicyParams::default()
    };
    let mut z_total = 0.0;
    let seeds = 6;
    for seed in 0..seeds {
        let short = SimConfig {
            horizon: 2e4,
            warmup: 100.0,
            seed,
            batches: 10,
            ..SimConfig::default()
        };
        let long = SimConfig {
            warmup: 200.0,
            ..short
        };
        let a = simulate(PolicyKind::SingleSleep, &p, &short).unwrap();
        let b = simulate(PolicyKind::SingleSleep, &p, &long).unwrap();
        z_total += (a.avg_aos.mean - b.avg_aos.mean).abs() / a.avg_aos.std_err;
    }
    assert!(
        z_total / (seeds as f64) < 1.0,
        "mean shift {} s.e.",
        z_total / seeds as f64
    );
}

#[test]
fn invalid_configs_are_rejected() {
    let p = PolicyParams::default();
    for bad in [
        SimConfig {
            horizon: 0.0,
            ..SimConfig::default()
        },
        SimConfig {
            warmup: 2e6,
            ..SimConfig::default()
        },
        SimConfig {
            batches: 1,
            ..SimConfig::default()
        },
    ] {
        let err = simulate(PolicyKind::NPolicy, &p, &bad).unwrap_err();
        assert!(err.is_input_error(), "{err}");
    }
    let tight = SimConfig {
        event_cap: 10.0,
        ..SimConfig::default()
    };
    assert!(matches!(
        simulate(PolicyKind::NPolicy, &p, &tight),
        Err(aoswake::Error::EventBudget { .. })
    ));
}
