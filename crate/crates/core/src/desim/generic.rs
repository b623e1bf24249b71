use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use super::{run_batches, Replication, SimConfig, SimEstimate};
use crate::error::{Error, Result};
use crate::shs::{validate_model, ShsModel};

/// Simulates an SHS model directly: competing exponential clocks on the
/// outgoing transitions, age growing at the state's slope and multiplied by
/// the reset coefficient of each fired transition. Starts in index 0 with
/// zero age.
pub fn simulate_generic(model: &ShsModel, config: &SimConfig) -> Result<SimEstimate> {
    let diags = validate_model(model);
    if !diags.is_empty() {
        return Err(Error::InvalidModel(diags));
    }
    config.validate()?;
    let out = model.outgoing_rates();
    config.check_budget(out.iter().copied().fold(0.0, f64::max))?;

    let n = model.state_count();
    let ann = model.annotations_by_index();
    let labels = model.labels_by_index();
    let mut outgoing: Vec<Vec<(f64, usize, f64)>> = vec![Vec::new(); n];
    for t in model.transitions() {
        outgoing[t.from].push((t.rate, t.to, t.reset));
    }

    run_batches(config, |_, rng| {
        replicate(config, &out, &outgoing, &ann, &labels, rng)
    })
}

fn replicate(
    config: &SimConfig,
    out: &[f64],
    outgoing: &[Vec<(f64, usize, f64)>],
    ann: &[crate::shs::StateAnnotation],
    labels: &[String],
    mut rng: ChaCha8Rng,
) -> Result<Replication> {
    let (warmup, horizon) = (config.warmup, config.horizon);
    let limit = config.event_limit();
    let mut time_in = vec![0.0; out.len()];
    let (mut q, mut x, mut now) = (0usize, 0.0f64, 0.0f64);
    let (mut area, mut energy) = (0.0, 0.0);
    let mut events = 0u64;

    while now < horizon {
        let hold: f64 = rng.sample::<f64, _>(Exp1) / out[q];
        let end = (now + hold).min(horizon);
        let slope = ann[q].growth;
        let a = now.max(warmup);
        if end > a {
            // Age is linear on [now, end]: x(t) = x + slope (t - now).
            let xa = x + slope * (a - now);
            let xb = x + slope * (end - now);
            area += 0.5 * (xa + xb) * (end - a);
            energy += ann[q].power * (end - a);
            time_in[q] += end - a;
        }
        x += slope * (end - now);
        now = end;
        if now >= horizon {
            break;
        }

        events += 1;
        if events > limit {
            return Err(Error::EventBudget {
                needed: events as f64,
                cap: config.event_cap,
            });
        }
        let mut pick = rng.random::<f64>() * out[q];
        let mut chosen = outgoing[q]
            .last()
            .copied()
            .expect("validated: no absorbing state");
        for &edge in &outgoing[q] {
            if pick < edge.0 {
                chosen = edge;
                break;
            }
            pick -= edge.0;
        }
        let (_, to, reset) = chosen;
        x *= reset;
        q = to;
    }

    let measured = config.measured_time();
    Ok(Replication {
        aos: area / measured,
        power: energy / measured,
        fractions: labels
            .iter()
            .zip(&time_in)
            .map(|(l, t)| (l.clone(), t / measured))
            .collect(),
        events,
    })
}
