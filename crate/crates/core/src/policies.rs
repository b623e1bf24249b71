//! Wake-up policies: SHS model builders and closed-form results.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shs::{
    average_aos, average_power, solve_correlation, solve_stationary, ShsModel,
    StationaryDistribution,
};

/// Largest N-policy threshold the model builder accepts.
pub const MAX_N: u32 = 10_000;

/// System parameters shared by all policies.
///
/// Durations (`d`, `theta`, `s`) are means of exponential periods; the
/// corresponding transition rates are their reciprocals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyParams {
    /// Packet arrival rate.
    pub lambda: f64,
    /// Service rate.
    pub mu: f64,
    /// Mean idle duration before the server falls asleep.
    pub d: f64,
    /// Mean wake-up duration.
    pub theta: f64,
    /// Mean sleep-period duration (single- and multi-sleep).
    pub s: f64,
    /// Arrival threshold for the N-policy.
    pub n: u32,
    pub p_busy: f64,
    pub p_idle: f64,
    pub p_sleep: f64,
    pub p_wake: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu: 1.0,
            d: 1.0,
            theta: 1.0,
            s: 1.0,
            n: 1,
            p_busy: 1.0,
            p_idle: 0.5,
            p_sleep: 0.0,
            p_wake: 0.5,
        }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("d", self.d),
            ("theta", self.theta),
            ("s", self.s),
        ];
        for (param, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParams {
                    param,
                    value,
                    reason: "must be positive and finite",
                });
            }
        }
        if self.n < 1 {
            return Err(Error::InvalidParams {
                param: "n",
                value: self.n as f64,
                reason: "must be at least 1",
            });
        }
        let powers = [
            ("p_busy", self.p_busy),
            ("p_idle", self.p_idle),
            ("p_sleep", self.p_sleep),
            ("p_wake", self.p_wake),
        ];
        for (param, value) in powers {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::InvalidParams {
                    param,
                    value,
                    reason: "must be nonnegative and finite",
                });
            }
        }
        Ok(())
    }

    fn power(&self, class: PhaseClass) -> f64 {
        match class {
            PhaseClass::Busy => self.p_busy,
            PhaseClass::Idle => self.p_idle,
            PhaseClass::Sleep => self.p_sleep,
            PhaseClass::WakeUp => self.p_wake,
        }
    }

    pub fn min_power(&self) -> f64 {
        self.p_busy
            .min(self.p_idle)
            .min(self.p_sleep)
            .min(self.p_wake)
    }

    pub fn max_power(&self) -> f64 {
        self.p_busy
            .max(self.p_idle)
            .max(self.p_sleep)
            .max(self.p_wake)
    }
}

impl fmt::Display for PolicyParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "lambda={} mu={} d={} theta={} s={} n={} powers=(B {}, I {}, S {}, W {})",
            self.lambda,
            self.mu,
            self.d,
            self.theta,
            self.s,
            self.n,
            self.p_busy,
            self.p_idle,
            self.p_sleep,
            self.p_wake
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    NPolicy,
    SingleSleep,
    MultiSleep,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [
        PolicyKind::NPolicy,
        PolicyKind::SingleSleep,
        PolicyKind::MultiSleep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::NPolicy => "n-policy",
            PolicyKind::SingleSleep => "single-sleep",
            PolicyKind::MultiSleep => "multi-sleep",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "n-policy" | "npolicy" | "n" => Ok(PolicyKind::NPolicy),
            "single-sleep" | "singlesleep" | "single" => Ok(PolicyKind::SingleSleep),
            "multi-sleep" | "multisleep" | "multi" => Ok(PolicyKind::MultiSleep),
            other => Err(format!("unknown policy `{other}`")),
        }
    }
}

/// Physical server phase a model state belongs to; each phase has one power level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseClass {
    Busy,
    Idle,
    Sleep,
    WakeUp,
}

impl PhaseClass {
    pub const ALL: [PhaseClass; 4] = [
        PhaseClass::Busy,
        PhaseClass::Idle,
        PhaseClass::Sleep,
        PhaseClass::WakeUp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PhaseClass::Busy => "busy",
            PhaseClass::Idle => "idle",
            PhaseClass::Sleep => "sleep",
            PhaseClass::WakeUp => "wake-up",
        }
    }
}

impl fmt::Display for PhaseClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticalResult {
    pub avg_aos: f64,
    pub avg_power: f64,
    /// Stationary distribution in the builder's state order.
    pub pi: StationaryDistribution,
}

/// A built model together with the phase class of every state (by index).
#[derive(Clone, Debug)]
pub struct PolicyModel {
    pub model: ShsModel,
    pub phases: Vec<PhaseClass>,
}

struct Builder<'a> {
    params: &'a PolicyParams,
    model: ShsModel,
    phases: Vec<PhaseClass>,
}

impl<'a> Builder<'a> {
    fn new(params: &'a PolicyParams) -> Self {
        Self {
            params,
            model: ShsModel::new(),
            phases: Vec::new(),
        }
    }

    fn state(&mut self, label: impl Into<String>, grows: bool, phase: PhaseClass) -> usize {
        self.phases.push(phase);
        let growth = if grows { 1.0 } else { 0.0 };
        self.model
            .add_state(label, growth, self.params.power(phase))
    }

    fn edge(&mut self, from: usize, to: usize, rate: f64) {
        self.model.add_transition(from, to, rate, 1.0);
    }

    fn finish(self) -> PolicyModel {
        PolicyModel {
            model: self.model,
            phases: self.phases,
        }
    }
}

/// States `B, ID, SL, 1, ..., N`; state `N` is the wake-up phase.
pub fn build_n_policy(params: &PolicyParams) -> Result<PolicyModel> {
    params.validate()?;
    if params.n > MAX_N {
        return Err(Error::InvalidParams {
            param: "n",
            value: params.n as f64,
            reason: "exceeds the model builder limit of 10000",
        });
    }
    let p = params;
    let mut b = Builder::new(p);
    let busy = b.state("B", true, PhaseClass::Busy);
    let idle = b.state("ID", false, PhaseClass::Idle);
    let sleep = b.state("SL", false, PhaseClass::Sleep);
    let counts: Vec<usize> = (1..=p.n)
        .map(|k| {
            let phase = if k == p.n {
                PhaseClass::WakeUp
            } else {
                PhaseClass::Sleep
            };
            b.state(k.to_string(), true, phase)
        })
        .collect();

    b.model.add_transition(busy, idle, p.mu, 0.0);
    b.edge(idle, busy, p.lambda);
    b.edge(idle, sleep, 1.0 / p.d);
    let mut prev = sleep;
    for &k in &counts {
        b.edge(prev, k, p.lambda);
        prev = k;
    }
    b.edge(prev, busy, 1.0 / p.theta);
    Ok(b.finish())
}

/// States `SL, SL1, WK, WK1, B, ID0, ID`.
pub fn build_single_sleep(params: &PolicyParams) -> Result<PolicyModel> {
    params.validate()?;
    let p = params;
    let mut b = Builder::new(p);
    let sl = b.state("SL", false, PhaseClass::Sleep);
    let sl1 = b.state("SL1", true, PhaseClass::Sleep);
    let wk = b.state("WK", false, PhaseClass::WakeUp);
    let wk1 = b.state("WK1", true, PhaseClass::WakeUp);
    let busy = b.state("B", true, PhaseClass::Busy);
    let id0 = b.state("ID0", false, PhaseClass::Idle);
    let id = b.state("ID", false, PhaseClass::Idle);

    b.edge(sl, sl1, p.lambda);
    b.edge(sl, wk, 1.0 / p.s);
    b.edge(sl1, wk1, 1.0 / p.s);
    b.edge(wk, wk1, p.lambda);
    b.edge(wk, id0, 1.0 / p.theta);
    b.edge(wk1, busy, 1.0 / p.theta);
    b.edge(id0, busy, p.lambda);
    b.model.add_transition(busy, id, p.mu, 0.0);
    b.edge(id, busy, p.lambda);
    b.edge(id, sl, 1.0 / p.d);
    Ok(b.finish())
}

/// States `SL, SL1, WK, B, ID`, with the `SL -> SL` self-loop for a new sleep period.
pub fn build_multi_sleep(params: &PolicyParams) -> Result<PolicyModel> {
    params.validate()?;
    let p = params;
    let mut b = Builder::new(p);
    let sl = b.state("SL", false, PhaseClass::Sleep);
    let sl1 = b.state("SL1", true, PhaseClass::Sleep);
    // The wake-up phase always carries a packet under this policy.
    let wk = b.state("WK", true, PhaseClass::WakeUp);
    let busy = b.state("B", true, PhaseClass::Busy);
    let id = b.state("ID", false, PhaseClass::Idle);

    b.edge(sl, sl1, p.lambda);
    b.edge(sl, sl, 1.0 / p.s);
    b.edge(sl1, wk, 1.0 / p.s);
    b.edge(wk, busy, 1.0 / p.theta);
    b.model.add_transition(busy, id, p.mu, 0.0);
    b.edge(id, busy, p.lambda);
    b.edge(id, sl, 1.0 / p.d);
    Ok(b.finish())
}

pub fn build(kind: PolicyKind, params: &PolicyParams) -> Result<PolicyModel> {
    match kind {
        PolicyKind::NPolicy => build_n_policy(params),
        PolicyKind::SingleSleep => build_single_sleep(params),
        PolicyKind::MultiSleep => build_multi_sleep(params),
    }
}

/// Closed-form average AoS, average power and stationary distribution, as
/// printed for each policy.
///
/// The N-policy AoS is evaluated exactly as printed, including its
/// `(1 + d*lambda)/mu` numerator term. That term should read
/// `(1 + d*lambda)/mu^2` (see [`n_policy_aos_rederived`]); the two agree
/// only when `mu = 1`.
pub fn closed_form(kind: PolicyKind, params: &PolicyParams) -> Result<AnalyticalResult> {
    params.validate()?;
    Ok(match kind {
        PolicyKind::NPolicy => n_policy_closed_form(params),
        PolicyKind::SingleSleep => single_sleep_closed_form(params),
        PolicyKind::MultiSleep => multi_sleep_closed_form(params),
    })
}

fn n_policy_normalizer(p: &PolicyParams) -> f64 {
    let (l, m, d, th, n) = (p.lambda, p.mu, p.d, p.theta, p.n as f64);
    1.0 / (n / l + 1.0 / m + th + d * (1.0 + l / m))
}

fn n_policy_closed_form(p: &PolicyParams) -> AnalyticalResult {
    let (l, m, d, th, n) = (p.lambda, p.mu, p.d, p.theta, p.n as f64);
    let a = n_policy_normalizer(p);

    let mut pi = vec![a * (1.0 + d * l) / m, a * d];
    // SL, 1, ..., N-1 share A/lambda; N holds A*theta.
    pi.extend(std::iter::repeat_n(a / l, p.n as usize));
    pi.push(a * th);

    let avg_aos = ((1.0 + d * l) / m
        + th / m
        + th * th
        + n * (n - 1.0) / (2.0 * l * l)
        + (n - 1.0) / l * (th + 1.0 / m))
        * a;
    let avg_power =
        ((1.0 + d * l) / m * p.p_busy + d * p.p_idle + n / l * p.p_sleep + th * p.p_wake) * a;
    AnalyticalResult {
        avg_aos,
        avg_power,
        pi: StationaryDistribution { pi },
    }
}

/// N-policy average AoS obtained by solving the correlation equations of
/// the N-policy chain by hand.
///
/// `v_ID = v_SL = 0`, `v_k = k A / lambda^2` for `k < N`,
/// `v_N = A theta^2 + (N-1) A theta / lambda` and
/// `v_B = A ((1 + d lambda)/mu + theta + (N-1)/lambda) / mu`, whose sum is
/// the printed expression with `(1 + d lambda)/mu` replaced by
/// `(1 + d lambda)/mu^2`.
pub fn n_policy_aos_rederived(params: &PolicyParams) -> Result<f64> {
    params.validate()?;
    let p = params;
    let (l, m, d, th, n) = (p.lambda, p.mu, p.d, p.theta, p.n as f64);
    let a = n_policy_normalizer(p);
    Ok(((1.0 + d * l) / (m * m)
        + th / m
        + th * th
        + n * (n - 1.0) / (2.0 * l * l)
        + (n - 1.0) / l * (th + 1.0 / m))
        * a)
}

/// The single-sleep normalizer `B`.
pub fn single_sleep_b(p: &PolicyParams) -> f64 {
    let (l, m, d, s, th) = (p.lambda, p.mu, p.d, p.s, p.theta);
    m + l
        + d * s * th * l.powi(4)
        + (d + s + th) * (l * l + m * l + s * th * m * l.powi(3))
        + (s * s + th * th + 2.0 * s * th + d * s + d * th) * m * l * l
        + (d * s + s * th + th * d) * l.powi(3)
}

/// The single-sleep AoS numerator polynomial `C`.
pub fn single_sleep_c(p: &PolicyParams) -> f64 {
    let (l, m, d, s, th) = (p.lambda, p.mu, p.d, p.s, p.theta);
    (m * m * l * l * s * th + m * l) * (s * s + s * th + th * th)
        + m * m * l * (s.powi(3) + s * s * th + s * th * th + th.powi(3))
        + m * l * l * s * th * (s + th)
        + l.powi(3) * d * s * th
        + l * l * (d * s + s * th + th * d)
        + l * (d + s + th)
        + 1.0
}

/// `D = lambda (s lambda + 1)(theta lambda + 1)`.
pub fn single_sleep_d(p: &PolicyParams) -> f64 {
    let (l, s, th) = (p.lambda, p.s, p.theta);
    l * (s * l + 1.0) * (th * l + 1.0)
}

fn single_sleep_closed_form(p: &PolicyParams) -> AnalyticalResult {
    let (l, m, d, s, th) = (p.lambda, p.mu, p.d, p.s, p.theta);
    let big_b = single_sleep_b(p);
    let big_c = single_sleep_c(p);
    let big_d = single_sleep_d(p);

    let pi = vec![
        s * m * l * (th * l + 1.0),
        s * s * m * l * l * (th * l + 1.0),
        th * m * l,
        th * m * l * l * (s + th + s * th * l),
        l * (d * l + 1.0) * (s * l + 1.0) * (th * l + 1.0),
        m,
        d * m * l * (s * l + 1.0) * (th * l + 1.0),
    ]
    .into_iter()
    .map(|x| x / big_b)
    .collect();

    let avg_aos = l * big_c / (m * big_b);
    let avg_power = (s * p.p_sleep
        + th * p.p_wake
        + (d + 1.0 / big_d) * p.p_idle
        + (d * l + 1.0) / m * p.p_busy)
        / (big_b / (m * big_d));
    AnalyticalResult {
        avg_aos,
        avg_power,
        pi: StationaryDistribution { pi },
    }
}

fn multi_sleep_closed_form(p: &PolicyParams) -> AnalyticalResult {
    let (l, m, d, s, th) = (p.lambda, p.mu, p.d, p.s, p.theta);
    let denom = m + l + d * l * l + d * m * l + s * m * l + th * m * l;
    let e = 1.0 / denom;
    let pi = vec![
        e * m,
        e * s * m * l,
        e * th * m * l,
        e * l * (1.0 + d * l),
        e * d * m * l,
    ];
    let avg_aos = l
        * (s * s * m * m + s * th * m * m + s * m + th * th * m * m + th * m + d * l + 1.0)
        / (m * denom);
    let avg_power = (m * (s * l + 1.0) * p.p_sleep
        + th * m * l * p.p_wake
        + l * (d * l + 1.0) * p.p_busy
        + d * m * l * p.p_idle)
        / denom;
    AnalyticalResult {
        avg_aos,
        avg_power,
        pi: StationaryDistribution { pi },
    }
}

/// Builds the policy model and solves it with the generic SHS engine.
pub fn analyze(kind: PolicyKind, params: &PolicyParams) -> Result<AnalyticalResult> {
    let built = build(kind, params)?;
    analyze_model(&built.model)
}

pub fn analyze_model(model: &ShsModel) -> Result<AnalyticalResult> {
    let pi = solve_stationary(model)?;
    let v = solve_correlation(model, &pi)?;
    Ok(AnalyticalResult {
        avg_aos: average_aos(&v),
        avg_power: average_power(&pi, model),
        pi,
    })
}

/// Sums a stationary distribution over the phase classes of a built model.
pub fn phase_fractions(built: &PolicyModel, pi: &StationaryDistribution) -> [(PhaseClass, f64); 4] {
    PhaseClass::ALL.map(|class| {
        let mass = built
            .phases
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == class)
            .map(|(q, _)| pi.get(q))
            .sum();
        (class, mass)
    })
}
