use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::{run_batches, Replication, SimConfig, SimEstimate};
use crate::error::{Error, Result};
use crate::policies::{PhaseClass, PolicyKind, PolicyParams};

/// Server state of the physical system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ServerPhase {
    Busy,
    /// Idle after a service completion; falls asleep when the idle timer expires.
    Idle,
    /// Idle after a wake-up that found no packet; waits for an arrival.
    IdlePostWake,
    /// Asleep with `queued` arrivals so far (only `queued > 0` matters
    /// outside the N-policy).
    Sleep {
        queued: u32,
    },
    WakeUp {
        has_packet: bool,
    },
}

impl ServerPhase {
    pub fn class(self) -> PhaseClass {
        match self {
            ServerPhase::Busy => PhaseClass::Busy,
            ServerPhase::Idle | ServerPhase::IdlePostWake => PhaseClass::Idle,
            ServerPhase::Sleep { .. } => PhaseClass::Sleep,
            ServerPhase::WakeUp { .. } => PhaseClass::WakeUp,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ServerPhase::Busy => "busy",
            ServerPhase::Idle => "idle",
            ServerPhase::IdlePostWake => "idle-post-wake",
            ServerPhase::Sleep { .. } => "sleep",
            ServerPhase::WakeUp { .. } => "wake-up",
        }
    }
}

/// Tracks the earliest source update the monitor has not seen yet.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SyncTracker {
    /// Generation time of the first update since the last refresh, if any.
    pub unsynced_since: Option<f64>,
    pub last_refresh: f64,
}

impl SyncTracker {
    pub fn on_update(&mut self, t: f64) {
        self.unsynced_since.get_or_insert(t);
    }

    pub fn on_refresh(&mut self, t: f64) {
        self.unsynced_since = None;
        self.last_refresh = t;
    }

    pub fn aos(&self, t: f64) -> f64 {
        self.unsynced_since.map_or(0.0, |u| (t - u).max(0.0))
    }

    /// Exact integral of the age over `[a, b]`, assuming no event inside.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match self.unsynced_since {
            Some(u) => 0.5 * ((a - u) + (b - u)) * (b - a),
            None => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimEvent {
    Start,
    ServiceCompletion,
    PhaseTimer,
    Arrival,
    End,
}

/// One point of a recorded sample path. Linear interpolation between
/// consecutive records reproduces the path exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub time: f64,
    pub aos: f64,
    pub phase: &'static str,
    pub event: SimEvent,
}

/// Pending event times; index order is the tie-break priority.
#[derive(Default)]
struct Calendar {
    slots: [Option<f64>; 3],
}

impl Calendar {
    const ORDER: [SimEvent; 3] = [
        SimEvent::ServiceCompletion,
        SimEvent::PhaseTimer,
        SimEvent::Arrival,
    ];

    fn slot(event: SimEvent) -> usize {
        match event {
            SimEvent::ServiceCompletion => 0,
            SimEvent::PhaseTimer => 1,
            SimEvent::Arrival => 2,
            SimEvent::Start | SimEvent::End => unreachable!("not a calendar event"),
        }
    }

    fn schedule(&mut self, event: SimEvent, at: f64) {
        self.slots[Self::slot(event)] = Some(at);
    }

    fn cancel(&mut self, event: SimEvent) {
        self.slots[Self::slot(event)] = None;
    }

    fn pop(&mut self) -> Option<(f64, SimEvent)> {
        let mut best: Option<(f64, usize)> = None;
        for (i, slot) in self.slots.iter().enumerate() {
            if let Some(t) = *slot {
                if best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, i));
                }
            }
        }
        let (t, i) = best?;
        self.slots[i] = None;
        Some((t, Self::ORDER[i]))
    }
}

struct Replicator<'a> {
    kind: PolicyKind,
    params: &'a PolicyParams,
    config: &'a SimConfig,
    rng: ChaCha8Rng,
    now: f64,
    phase: ServerPhase,
    sync: SyncTracker,
    calendar: Calendar,
    aos_area: f64,
    energy: f64,
    phase_time: [f64; 4],
    events: u64,
    path: Option<(&'a mut Vec<PathRecord>, usize)>,
}

impl<'a> Replicator<'a> {
    fn exp(&mut self, mean: f64) -> f64 {
        let x: f64 = self.rng.sample(Exp1);
        x * mean
    }

    fn power(&self) -> f64 {
        match self.phase.class() {
            PhaseClass::Busy => self.params.p_busy,
            PhaseClass::Idle => self.params.p_idle,
            PhaseClass::Sleep => self.params.p_sleep,
            PhaseClass::WakeUp => self.params.p_wake,
        }
    }

    fn record(&mut self, event: SimEvent) {
        if let Some((records, cap)) = self.path.as_mut() {
            if records.len() < *cap {
                records.push(PathRecord {
                    time: self.now,
                    aos: self.sync.aos(self.now),
                    phase: self.phase.label(),
                    event,
                });
            }
        }
    }

    /// Accumulates the measured part of `[now, to]` in the current phase.
    fn advance(&mut self, to: f64) {
        let a = self.now.max(self.config.warmup);
        let b = to.min(self.config.horizon);
        if b > a {
            self.aos_area += self.sync.integral(a, b);
            let dt = b - a;
            self.energy += self.power() * dt;
            self.phase_time[self.phase.class() as usize] += dt;
        }
        self.now = to;
    }

    fn enter(&mut self, phase: ServerPhase) {
        self.phase = phase;
        let p = self.params;
        match phase {
            ServerPhase::Busy => {
                self.calendar.cancel(SimEvent::PhaseTimer);
                let dt = self.exp(1.0 / p.mu);
                self.calendar
                    .schedule(SimEvent::ServiceCompletion, self.now + dt);
            }
            ServerPhase::Idle => {
                let dt = self.exp(p.d);
                self.calendar.schedule(SimEvent::PhaseTimer, self.now + dt);
            }
            ServerPhase::IdlePostWake => self.calendar.cancel(SimEvent::PhaseTimer),
            ServerPhase::Sleep { .. } => match self.kind {
                // Woken by the N-th arrival, not by a timer.
                PolicyKind::NPolicy => self.calendar.cancel(SimEvent::PhaseTimer),
                PolicyKind::SingleSleep | PolicyKind::MultiSleep => {
                    let dt = self.exp(p.s);
                    self.calendar.schedule(SimEvent::PhaseTimer, self.now + dt);
                }
            },
            ServerPhase::WakeUp { .. } => {
                let dt = self.exp(p.theta);
                self.calendar.schedule(SimEvent::PhaseTimer, self.now + dt);
            }
        }
    }

    fn on_arrival(&mut self) {
        self.sync.on_update(self.now);
        let dt = self.exp(1.0 / self.params.lambda);
        self.calendar.schedule(SimEvent::Arrival, self.now + dt);
        match self.phase {
            // Preemption: the newest packet replaces the one in service.
            ServerPhase::Busy => self.enter(ServerPhase::Busy),
            ServerPhase::Idle | ServerPhase::IdlePostWake => self.enter(ServerPhase::Busy),
            ServerPhase::Sleep { queued } => {
                let queued = queued.saturating_add(1);
                if self.kind == PolicyKind::NPolicy && queued >= self.params.n {
                    self.enter(ServerPhase::WakeUp { has_packet: true });
                } else {
                    self.phase = ServerPhase::Sleep { queued };
                }
            }
            ServerPhase::WakeUp { .. } => {
                self.phase = ServerPhase::WakeUp { has_packet: true };
            }
        }
    }

    fn on_completion(&mut self) {
        self.sync.on_refresh(self.now);
        self.enter(ServerPhase::Idle);
    }

    fn on_timer(&mut self) {
        match (self.phase, self.kind) {
            (ServerPhase::Idle, _) => self.enter(ServerPhase::Sleep { queued: 0 }),
            (ServerPhase::Sleep { queued }, PolicyKind::SingleSleep) => {
                self.enter(ServerPhase::WakeUp {
                    has_packet: queued > 0,
                })
            }
            (ServerPhase::Sleep { queued }, PolicyKind::MultiSleep) => {
                if queued > 0 {
                    self.enter(ServerPhase::WakeUp { has_packet: true })
                } else {
                    self.enter(ServerPhase::Sleep { queued: 0 })
                }
            }
            (ServerPhase::WakeUp { has_packet: true }, _) => self.enter(ServerPhase::Busy),
            (ServerPhase::WakeUp { has_packet: false }, _) => self.enter(ServerPhase::IdlePostWake),
            (phase, kind) => unreachable!("timer fired in {phase:?} under {kind}"),
        }
    }

    fn run(mut self) -> Result<Replication> {
        let dt = self.exp(1.0 / self.params.lambda);
        self.calendar.schedule(SimEvent::Arrival, dt);
        self.enter(ServerPhase::Idle);
        self.record(SimEvent::Start);

        let limit = self.config.event_limit();
        while let Some((t, event)) = self.calendar.pop() {
            if t > self.config.horizon {
                break;
            }
            self.events += 1;
            if self.events > limit {
                return Err(Error::EventBudget {
                    needed: self.events as f64,
                    cap: self.config.event_cap,
                });
            }
            self.advance(t);
            let aos_before = self.sync.aos(t);
            let phase_before = self.phase.label();
            match event {
                SimEvent::Arrival => self.on_arrival(),
                SimEvent::ServiceCompletion => self.on_completion(),
                SimEvent::PhaseTimer => self.on_timer(),
                SimEvent::Start | SimEvent::End => unreachable!(),
            }
            if self.sync.aos(t) != aos_before {
                if let Some((records, cap)) = self.path.as_mut() {
                    if records.len() < *cap {
                        records.push(PathRecord {
                            time: t,
                            aos: aos_before,
                            phase: phase_before,
                            event,
                        });
                    }
                }
            }
            self.record(event);
        }
        self.advance(self.config.horizon);
        self.record(SimEvent::End);

        let measured = self.config.measured_time();
        Ok(Replication {
            aos: self.aos_area / measured,
            power: self.energy / measured,
            fractions: PhaseClass::ALL
                .iter()
                .map(|c| {
                    (
                        c.as_str().to_string(),
                        self.phase_time[*c as usize] / measured,
                    )
                })
                .collect(),
            events: self.events,
        })
    }
}

fn max_rate(p: &PolicyParams) -> f64 {
    p.lambda + p.mu + 1.0 / p.d + 1.0 / p.theta + 1.0 / p.s
}

fn replicate(
    kind: PolicyKind,
    params: &PolicyParams,
    config: &SimConfig,
    rng: ChaCha8Rng,
    path: Option<(&mut Vec<PathRecord>, usize)>,
) -> Result<Replication> {
    Replicator {
        kind,
        params,
        config,
        rng,
        now: 0.0,
        phase: ServerPhase::Idle,
        sync: SyncTracker::default(),
        calendar: Calendar::default(),
        aos_area: 0.0,
        energy: 0.0,
        phase_time: [0.0; 4],
        events: 0,
        path,
    }
    .run()
}

fn check(params: &PolicyParams, config: &SimConfig) -> Result<()> {
    params.validate()?;
    config.validate()?;
    config.check_budget(max_rate(params))
}

/// Simulates the physical server and estimates average AoS and power.
pub fn simulate(
    kind: PolicyKind,
    params: &PolicyParams,
    config: &SimConfig,
) -> Result<SimEstimate> {
    check(params, config)?;
    run_batches(config, |_, rng| replicate(kind, params, config, rng, None))
}

/// Like [`simulate`], also returning up to `max_records` sample-path records
/// from the first replication.
pub fn simulate_with_path(
    kind: PolicyKind,
    params: &PolicyParams,
    config: &SimConfig,
    max_records: usize,
) -> Result<(SimEstimate, Vec<PathRecord>)> {
    let estimate = simulate(kind, params, config)?;
    let records = record_path(kind, params, config, max_records)?;
    Ok((estimate, records))
}

/// Sample path of replication 0 of `config`, truncated to `max_records`.
pub fn record_path(
    kind: PolicyKind,
    params: &PolicyParams,
    config: &SimConfig,
    max_records: usize,
) -> Result<Vec<PathRecord>> {
    params.validate()?;
    if !(config.horizon > 0.0 && config.horizon.is_finite()) {
        return Err(Error::InvalidConfig("horizon must be positive".into()));
    }
    config.check_budget(max_rate(params))?;
    let mut records = Vec::new();
    replicate(
        kind,
        params,
        config,
        config.rng(0),
        Some((&mut records, max_records)),
    )?;
    Ok(records)
}
