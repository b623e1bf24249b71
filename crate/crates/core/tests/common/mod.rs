//! Strategies shared by the property and acceptance suites.
#![allow(dead_code)]

use aoswake::policies::{PolicyKind, PolicyParams};
use aoswake::shs::ShsModel;
use proptest::prelude::*;

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(f64::MIN_POSITIVE)
}

/// A random strongly connected model with 3..=6 states, binary growth and
/// binary resets with at least one reset to zero.
pub fn arb_model() -> impl Strategy<Value = ShsModel> {
    (3usize..=6).prop_flat_map(|n| {
        let ring = prop::collection::vec((0.1f64..10.0, any::<bool>()), n);
        let extra = prop::collection::vec((0..n, 0..n, 0.1f64..10.0, any::<bool>()), 0..=2 * n);
        let growth = prop::collection::vec(any::<bool>(), n);
        let powers = prop::collection::vec(0.0f64..2.0, n);
        (Just(n), ring, extra, growth, powers).prop_map(|(n, ring, extra, growth, powers)| {
            let mut m = ShsModel::new();
            for q in 0..n {
                m.add_state(
                    format!("q{q}"),
                    if growth[q] { 1.0 } else { 0.0 },
                    powers[q],
                );
            }
            for (q, &(rate, keep)) in ring.iter().enumerate() {
                // The ring's first edge always resets so the age is renewed.
                let reset = if q == 0 || !keep { 0.0 } else { 1.0 };
                m.add_transition(q, (q + 1) % n, rate, reset);
            }
            for &(from, to, rate, keep) in &extra {
                if from != to {
                    m.add_transition(from, to, rate, if keep { 1.0 } else { 0.0 });
                }
            }
            m
        })
    })
}

pub fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

pub fn arb_params() -> impl Strategy<Value = PolicyParams> {
    (
        prop::array::uniform5(log_uniform(0.1, 10.0)),
        1u32..=8,
        prop::array::uniform4(0.0f64..2.0),
    )
        .prop_map(
            |([lambda, mu, d, theta, s], n, [pb, pi, ps, pw])| PolicyParams {
                lambda,
                mu,
                d,
                theta,
                s,
                n,
                p_busy: pb,
                p_idle: pi,
                p_sleep: ps,
                p_wake: pw,
            },
        )
}

pub fn arb_kind() -> impl Strategy<Value = PolicyKind> {
    prop::sample::select(PolicyKind::ALL.to_vec())
}
