//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Run with `cargo test -p aoswake --test acceptance`. The verdict lines go
//! straight to stdout so they show up even when the harness captures output.

use std::io::Write;
use std::time::{Duration, Instant};

use aoswake::desim::{record_path, simulate, SimConfig, SimEvent};
use aoswake::policies::{analyze, analyze_model, closed_form, PolicyKind, PolicyParams};
use aoswake::shs::{solve_correlation, solve_stationary};
use aoswake::sweep::{preset, run_sweep, SweptParam, TradeoffPoint};
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{arb_kind, arb_model, arb_params, log_uniform, rel_close};

fn verdict(criterion: u32, title: &str, failures: &[String], detail: &str) {
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "{status} criterion {criterion}: {title} ({detail})").unwrap();
    for f in failures.iter().take(8) {
        writeln!(out, "    {f}").unwrap();
    }
    if failures.len() > 8 {
        writeln!(out, "    ... {} more", failures.len() - 8).unwrap();
    }
    out.flush().unwrap();
    assert!(
        failures.is_empty(),
        "criterion {criterion} failed: {} issue(s)",
        failures.len()
    );
}

fn within(elapsed: Duration, limit: Duration, failures: &mut Vec<String>) {
    if elapsed > limit {
        failures.push(format!("runtime {elapsed:.2?} exceeds {limit:.0?}"));
    }
}

#[test]
fn criterion_1_closed_form_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let lu = |rng: &mut ChaCha8Rng| rng.random_range(0.1f64.ln()..10.0f64.ln()).exp();
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst = [0.0f64; 3];
    let mut mismatched = [0usize; 3];
    for _ in 0..1000 {
        let p = PolicyParams {
            lambda: lu(&mut rng),
            mu: lu(&mut rng),
            d: lu(&mut rng),
            theta: lu(&mut rng),
            s: lu(&mut rng),
            n: rng.random_range(1..=8),
            ..PolicyParams::default()
        };
        for (i, kind) in PolicyKind::ALL.into_iter().enumerate() {
            let shs = analyze(kind, &p).unwrap();
            let cf = closed_form(kind, &p).unwrap();
            let err_aos = (shs.avg_aos - cf.avg_aos).abs() / cf.avg_aos.abs();
            let err_power = (shs.avg_power - cf.avg_power).abs() / cf.avg_power.abs();
            let err = err_aos.max(err_power);
            worst[i] = worst[i].max(err);
            if err > 1e-9 {
                mismatched[i] += 1;
                failures.push(format!(
                    "{kind} {p}: aos {} vs printed {} (rel {err_aos:.2e}), power rel {err_power:.2e}",
                    shs.avg_aos, cf.avg_aos
                ));
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(5), &mut failures);
    let detail = format!(
        "1000 tuples, max rel err n-policy {:.1e} [{} off], single-sleep {:.1e} [{} off], multi-sleep {:.1e} [{} off], {:.2?}",
        worst[0],
        mismatched[0],
        worst[1],
        mismatched[1],
        worst[2],
        mismatched[2],
        start.elapsed()
    );
    verdict(
        1,
        "SHS solve matches printed closed forms within 1e-9",
        &failures,
        &detail,
    );
}

#[test]
fn criterion_2_simulation_agreement() {
    let fig7 = preset("fig7").unwrap().remove(0).spec;
    let config = SimConfig {
        horizon: 1e6,
        batches: 10,
        ..SimConfig::default()
    };
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst_z = 0.0f64;
    let mut worst_rel = 0.0f64;
    for lambda in [0.5, 1.0, 2.0, 10.0] {
        let p = PolicyParams {
            lambda,
            ..fig7.fixed
        };
        for kind in PolicyKind::ALL {
            let exact = analyze(kind, &p).unwrap();
            let sim = simulate(kind, &p, &config).unwrap();
            for (what, est, target) in [
                ("aos", sim.avg_aos, exact.avg_aos),
                ("power", sim.avg_power, exact.avg_power),
            ] {
                let z = est.z_score(target, 0.0);
                let rel = (est.mean - target).abs() / target.abs();
                worst_z = worst_z.max(z);
                worst_rel = worst_rel.max(rel);
                if z > 3.0 || rel > 0.01 {
                    failures.push(format!(
                        "{kind} lambda={lambda} {what}: sim {} +- {} vs {target} (z {z:.2}, rel {rel:.2e})",
                        est.mean, est.std_err
                    ));
                }
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(120), &mut failures);
    let detail = format!(
        "12 points, max z {worst_z:.2}, max rel {worst_rel:.2e}, {:.2?}",
        start.elapsed()
    );
    verdict(
        2,
        "simulation agrees with analysis within 3 s.e. and 1%",
        &failures,
        &detail,
    );
}

#[test]
fn criterion_3_spot_values() {
    let p = PolicyParams::default();
    let config = SimConfig {
        horizon: 1e6,
        batches: 10,
        ..SimConfig::default()
    };
    let mut failures = Vec::new();
    // 7/6 is what substituting the unit tuple into the printed multi-sleep
    // expression yields: 7 unit terms over a denominator of 6.
    for (kind, aos, power) in [
        (PolicyKind::NPolicy, 0.8, 0.6),
        (PolicyKind::MultiSleep, 7.0 / 6.0, 0.5),
    ] {
        let cf = closed_form(kind, &p).unwrap();
        let shs = analyze(kind, &p).unwrap();
        let sim = simulate(kind, &p, &config).unwrap();
        for (path, a, e) in [
            ("closed form", cf.avg_aos, cf.avg_power),
            ("SHS solve", shs.avg_aos, shs.avg_power),
        ] {
            if !rel_close(a, aos, 1e-12) || !rel_close(e, power, 1e-12) {
                failures.push(format!("{kind} {path}: ({a}, {e}) vs ({aos}, {power})"));
            }
        }
        if !sim.avg_aos.agrees_with(aos, 3.0) || !sim.avg_power.agrees_with(power, 3.0) {
            failures.push(format!(
                "{kind} simulation: aos {:?}, power {:?} vs ({aos}, {power})",
                sim.avg_aos, sim.avg_power
            ));
        }
    }
    verdict(
        3,
        "spot values n-policy (0.8, 0.6), multi-sleep (7/6, 0.5) on all three paths",
        &failures,
        "closed form and SHS to 1e-12, simulation within 3 s.e.",
    );
}

#[test]
fn criterion_4_baseline_limit() {
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let mut shs_gap = 0.0f64;
    for lambda in [0.5, 1.0, 2.0] {
        for mu in [0.5, 1.0, 2.0] {
            let p = PolicyParams {
                lambda,
                mu,
                d: 1e-9,
                theta: 1e-9,
                n: 1,
                ..PolicyParams::default()
            };
            let target = lambda / (lambda + mu);
            let cf = closed_form(PolicyKind::NPolicy, &p).unwrap();
            let err = (cf.avg_aos - target).abs();
            worst = worst.max(err);
            if err > 1e-6 {
                failures.push(format!(
                    "lambda={lambda} mu={mu}: {} vs {target}",
                    cf.avg_aos
                ));
            }
            // The SHS solve converges to lambda/(mu(lambda+mu)) instead.
            let shs = analyze(PolicyKind::NPolicy, &p).unwrap();
            shs_gap = shs_gap.max((shs.avg_aos - target / mu).abs());
        }
    }
    let detail = format!(
        "printed n-policy age, max abs err {worst:.1e}; SHS solve vs lambda/(mu(lambda+mu)) max abs err {shs_gap:.1e}"
    );
    verdict(
        4,
        "n-policy age tends to lambda/(lambda+mu) as d, theta -> 0",
        &failures,
        &detail,
    );
}

fn series(points: &[TradeoffPoint], kind: PolicyKind) -> Vec<&TradeoffPoint> {
    points.iter().filter(|p| p.policy == kind).collect()
}

fn strictly_increasing(xs: impl Iterator<Item = f64>) -> bool {
    let xs: Vec<f64> = xs.collect();
    xs.windows(2).all(|w| w[1] > w[0])
}

fn strictly_decreasing(xs: impl Iterator<Item = f64>) -> bool {
    let xs: Vec<f64> = xs.collect();
    xs.windows(2).all(|w| w[1] < w[0])
}

/// Rises to an interior maximum, then falls.
fn rises_then_falls(xs: &[f64]) -> bool {
    let Some((peak, _)) = xs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) else {
        return false;
    };
    peak > 0
        && peak + 1 < xs.len()
        && xs[..=peak].windows(2).all(|w| w[1] >= w[0])
        && xs[peak..].windows(2).all(|w| w[1] <= w[0])
}

fn lambda_of(tag: &str) -> f64 {
    tag.rsplit("lambda").next().unwrap().parse().unwrap()
}

#[test]
fn criterion_5_figure_properties() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut checks = 0usize;
    let mut check = |ok: bool, what: String| {
        checks += 1;
        if !ok {
            failures.push(what);
        }
    };

    // Trade-off against lambda.
    let fig7 = run_sweep(&preset("fig7").unwrap()[0].spec).unwrap();
    for kind in PolicyKind::ALL {
        let s = series(&fig7, kind);
        check(
            strictly_increasing(s.iter().map(|p| p.avg_power)),
            format!("fig7 {kind}: power not strictly increasing in lambda"),
        );
        if kind != PolicyKind::NPolicy {
            let aos: Vec<f64> = s.iter().map(|p| p.avg_aos).collect();
            check(
                rises_then_falls(&aos),
                format!("fig7 {kind}: age not rise-then-fall in lambda"),
            );
        }
    }
    let at_100: Vec<&TradeoffPoint> = fig7.iter().filter(|p| p.swept_value == 100.0).collect();
    check(
        at_100.len() == 3,
        "fig7: lambda=100 missing from grid".into(),
    );
    for a in &at_100 {
        for b in &at_100 {
            if a.policy < b.policy {
                let ra = (a.avg_aos - b.avg_aos).abs() / a.avg_aos.max(b.avg_aos);
                let rp = (a.avg_power - b.avg_power).abs() / a.avg_power.max(b.avg_power);
                check(
                    ra <= 0.02 && rp <= 0.02,
                    format!(
                        "fig7 lambda=100 {} vs {}: age rel {ra:.3e}, power rel {rp:.3e}",
                        a.policy, b.policy
                    ),
                );
            }
        }
    }

    // Idle timeout d.
    for sweep in preset("fig8").unwrap() {
        let pts = run_sweep(&sweep.spec).unwrap();
        for kind in PolicyKind::ALL {
            let s = series(&pts, kind);
            check(
                strictly_increasing(s.iter().map(|p| p.avg_power)),
                format!("fig8 {} {kind}: power not increasing in d", sweep.tag),
            );
            check(
                strictly_decreasing(s.iter().map(|p| p.avg_aos)),
                format!("fig8 {} {kind}: age not decreasing in d", sweep.tag),
            );
        }
    }

    // Wake-up time theta.
    for sweep in preset("fig9").unwrap() {
        let pts = run_sweep(&sweep.spec).unwrap();
        for kind in PolicyKind::ALL {
            check(
                strictly_increasing(series(&pts, kind).iter().map(|p| p.avg_aos)),
                format!("fig9 {} {kind}: age not increasing in theta", sweep.tag),
            );
        }
    }

    // Threshold N and sleep period s.
    for sweep in preset("fig10").unwrap() {
        let pts = run_sweep(&sweep.spec).unwrap();
        let lambda = lambda_of(&sweep.tag);
        let kinds: Vec<PolicyKind> = match sweep.spec.param {
            SweptParam::N => vec![PolicyKind::NPolicy],
            _ => vec![PolicyKind::SingleSleep, PolicyKind::MultiSleep],
        };
        for &kind in &kinds {
            let s = series(&pts, kind);
            check(
                strictly_decreasing(s.iter().map(|p| p.avg_power))
                    && strictly_increasing(s.iter().map(|p| p.avg_aos)),
                format!(
                    "fig10 {} {kind}: larger {} does not trade energy for age",
                    sweep.tag, sweep.spec.param
                ),
            );
        }
        if sweep.spec.param == SweptParam::S && lambda >= 10.0 {
            let single = series(&pts, PolicyKind::SingleSleep);
            let multi = series(&pts, PolicyKind::MultiSleep);
            let mut worst = 0.0f64;
            for (a, b) in single.iter().zip(&multi) {
                let ra = (a.avg_aos - b.avg_aos).abs() / a.avg_aos.max(b.avg_aos);
                let rp = (a.avg_power - b.avg_power).abs() / a.avg_power.max(b.avg_power);
                worst = worst.max(ra).max(rp);
            }
            check(
                worst <= 0.01,
                format!(
                    "fig10 lambda={lambda}: single vs multi-sleep differ by up to {:.2}%",
                    worst * 100.0
                ),
            );
        }
    }

    within(start.elapsed(), Duration::from_secs(30), &mut failures);
    let detail = format!("{checks} checks, {:.2?}", start.elapsed());
    verdict(
        5,
        "qualitative figure properties on preset sweeps",
        &failures,
        &detail,
    );
}

#[test]
fn criterion_6_structural_invariants() {
    let mut failures = Vec::new();
    let mut run = |name: &str, result: Result<(), String>| {
        if let Err(e) = result {
            failures.push(format!("{name}: {e}"));
        }
    };
    let runner = || TestRunner::new(Config::with_cases(500));
    let fail = |msg: String| TestCaseError::fail(msg);

    run(
        "stationary normalization and nonnegativity",
        runner()
            .run(&arb_model(), |m| {
                let pi = solve_stationary(&m).map_err(|e| fail(e.to_string()))?;
                let sum: f64 = pi.as_slice().iter().sum();
                if (sum - 1.0).abs() > 1e-12 || pi.as_slice().iter().any(|&x| x < 0.0) {
                    return Err(fail(format!("pi {:?}", pi.as_slice())));
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    run(
        "correlation nonnegativity",
        runner()
            .run(&arb_model(), |m| {
                let pi = solve_stationary(&m).map_err(|e| fail(e.to_string()))?;
                let v = solve_correlation(&m, &pi).map_err(|e| fail(e.to_string()))?;
                if v.as_slice().iter().any(|&x| x < -1e-14) {
                    return Err(fail(format!("v {:?}", v.as_slice())));
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    run(
        "self-loop invariance",
        runner()
            .run(&(arb_model(), 0usize..6, 0.1f64..10.0), |(m, q, rate)| {
                let mut looped = m.clone();
                looped.add_transition(q % m.state_count(), q % m.state_count(), rate, 1.0);
                let a = analyze_model(&m).map_err(|e| fail(e.to_string()))?;
                let b = analyze_model(&looped).map_err(|e| fail(e.to_string()))?;
                let pi_gap =
                    a.pi.as_slice()
                        .iter()
                        .zip(b.pi.as_slice())
                        .fold(0.0f64, |g, (x, y)| g.max((x - y).abs()));
                if pi_gap > 1e-12 || (a.avg_aos - b.avg_aos).abs() > 1e-12 * a.avg_aos.max(1.0) {
                    return Err(fail(format!(
                        "pi gap {pi_gap:e}, age {} vs {}",
                        a.avg_aos, b.avg_aos
                    )));
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    run(
        "rate-rescaling covariance",
        runner()
            .run(&(arb_model(), log_uniform(0.01, 100.0)), |(m, c)| {
                let a = analyze_model(&m).map_err(|e| fail(e.to_string()))?;
                let b = analyze_model(&m.with_scaled_rates(c)).map_err(|e| fail(e.to_string()))?;
                let pi_gap =
                    a.pi.as_slice()
                        .iter()
                        .zip(b.pi.as_slice())
                        .fold(0.0f64, |g, (x, y)| g.max((x - y).abs()));
                let expected = a.avg_aos / c;
                if pi_gap > 1e-10 || (b.avg_aos - expected).abs() > 1e-9 * expected.max(1e-12) {
                    return Err(fail(format!("c={c}: age {} vs {expected}", b.avg_aos)));
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    run(
        "sample-path slope and resets",
        TestRunner::new(Config::with_cases(60))
            .run(
                &(arb_kind(), arb_params(), 0u64..1000),
                |(kind, p, seed)| {
                    let config = SimConfig {
                        horizon: 200.0,
                        warmup: 0.0,
                        seed,
                        batches: 2,
                        ..SimConfig::default()
                    };
                    let path = record_path(kind, &p, &config, 1_000_000)
                        .map_err(|e| fail(e.to_string()))?;
                    for w in path.windows(2) {
                        let (a, b) = (w[0], w[1]);
                        let dt = b.time - a.time;
                        if b.aos < 0.0 || dt < 0.0 {
                            return Err(fail(format!("{kind}: bad record {b:?}")));
                        }
                        if b.aos < a.aos - 1e-9 {
                            if dt > 1e-12 || b.event != SimEvent::ServiceCompletion || b.aos != 0.0
                            {
                                return Err(fail(format!("{kind}: drop {a:?} -> {b:?}")));
                            }
                        } else if dt > 1e-9 {
                            let slope = (b.aos - a.aos) / dt;
                            if slope.abs() > 1e-6 && (slope - 1.0).abs() > 1e-6 {
                                return Err(fail(format!("{kind}: slope {slope} at {b:?}")));
                            }
                        }
                    }
                    Ok(())
                },
            )
            .map_err(|e| e.to_string()),
    );
    verdict(
        6,
        "structural invariants over randomized models and parameters",
        &failures,
        "500 random models per SHS property, 60 random sample paths",
    );
}
