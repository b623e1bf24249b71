//! Stochastic hybrid system engine for a scalar age process.
//!
//! A model is a finite continuous-time Markov chain whose states carry an
//! age-growth flag and a power level, and whose transitions carry a rate and
//! an age reset coefficient. While the chain sits in state `q` the age grows
//! with slope `growth(q)`; when transition `l` fires the age is multiplied by
//! `reset(l)`.
//!
//! The stationary distribution `pi` solves the balance equations
//! `pi_q * out(q) = sum_{l into q} rate(l) * pi_{from(l)}` with `sum pi = 1`,
//! and the age correlation vector `v` (with `v_q = E[age * 1{state = q}]`)
//! solves
//!
//! ```text
//! v_q * out(q) = growth(q) * pi_q + sum_{l into q} rate(l) * reset(l) * v_{from(l)}
//! ```
//!
//! The long-run average age is `sum_q v_q` and the average power is
//! `sum_q pi_q * power(q)`.

use std::collections::VecDeque;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries in `[-NEGATIVE_TOLERANCE, 0)` are treated as round-off and clamped.
pub const NEGATIVE_TOLERANCE: f64 = 1e-14;
/// Residual tolerance for the balance and correlation equations, relative to
/// the largest transition rate.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateId {
    pub index: usize,
    pub label: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateAnnotation {
    /// Age slope in this state, 0 or 1.
    pub growth: f64,
    /// Energy per unit time.
    pub power: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub id: StateId,
    pub annotation: StateAnnotation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// Index of the source state.
    pub from: usize,
    /// Index of the target state.
    pub to: usize,
    pub rate: f64,
    /// Age multiplier applied on firing, 0 or 1.
    pub reset: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ShsModel {
    states: Vec<State>,
    transitions: Vec<Transition>,
}

impl ShsModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a model from raw parts without checking anything; run
    /// [`validate_model`] before trusting it.
    pub fn from_parts(states: Vec<State>, transitions: Vec<Transition>) -> Self {
        Self {
            states,
            transitions,
        }
    }

    /// Appends a state whose index is its position, returning the index.
    pub fn add_state(&mut self, label: impl Into<String>, growth: f64, power: f64) -> usize {
        let index = self.states.len();
        self.states.push(State {
            id: StateId {
                index,
                label: label.into(),
            },
            annotation: StateAnnotation { growth, power },
        });
        index
    }

    pub fn add_transition(&mut self, from: usize, to: usize, rate: f64, reset: f64) {
        self.transitions.push(Transition {
            from,
            to,
            rate,
            reset,
        });
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    /// Looks up a state by its label.
    pub fn state(&self, label: &str) -> Option<&State> {
        self.states.iter().find(|s| s.id.label == label)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.state(label).map(|s| s.id.index)
    }

    /// Annotation of the state with the given index.
    pub fn annotation(&self, index: usize) -> Option<StateAnnotation> {
        self.states
            .iter()
            .find(|s| s.id.index == index)
            .map(|s| s.annotation)
    }

    /// A copy with every transition rate multiplied by `factor`.
    pub fn with_scaled_rates(&self, factor: f64) -> Self {
        let mut scaled = self.clone();
        for t in &mut scaled.transitions {
            t.rate *= factor;
        }
        scaled
    }

    /// A copy with the given transitions removed.
    pub fn without_transitions(&self, keep: impl Fn(&Transition) -> bool) -> Self {
        Self {
            states: self.states.clone(),
            transitions: self.transitions.iter().copied().filter(keep).collect(),
        }
    }

    /// Sum of outgoing rates per state index (self-loops included).
    pub fn outgoing_rates(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.states.len()];
        for t in &self.transitions {
            out[t.from] += t.rate;
        }
        out
    }

    pub fn max_rate(&self) -> f64 {
        self.transitions.iter().map(|t| t.rate).fold(0.0, f64::max)
    }

    /// Per-index annotations, in index order. Only meaningful for a valid model.
    pub(crate) fn annotations_by_index(&self) -> Vec<StateAnnotation> {
        let mut out = vec![
            StateAnnotation {
                growth: 0.0,
                power: 0.0
            };
            self.states.len()
        ];
        for s in &self.states {
            out[s.id.index] = s.annotation;
        }
        out
    }

    /// Per-index labels, in index order. Only meaningful for a valid model.
    pub fn labels_by_index(&self) -> Vec<String> {
        let mut out = vec![String::new(); self.states.len()];
        for s in &self.states {
            out[s.id.index] = s.id.label.clone();
        }
        out
    }
}

/// One violated model invariant.
#[derive(Clone, Debug, PartialEq)]
pub enum Diagnostic {
    EmptyModel,
    IndexOutOfRange { index: usize, count: usize },
    DuplicateIndex { index: usize },
    NonBinaryGrowth { state: usize, growth: f64 },
    NegativePower { state: usize, power: f64 },
    DanglingState { transition: usize, index: usize },
    NonpositiveRate { transition: usize, rate: f64 },
    NonBinaryReset { transition: usize, reset: f64 },
    AbsorbingState { state: usize },
    UnreachableState { state: usize },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::EmptyModel => write!(f, "empty model"),
            Diagnostic::IndexOutOfRange { index, count } => {
                write!(f, "state index {index} out of range for {count} states")
            }
            Diagnostic::DuplicateIndex { index } => write!(f, "duplicate state index {index}"),
            Diagnostic::NonBinaryGrowth { state, growth } => {
                write!(f, "non-binary growth {growth} on state {state}")
            }
            Diagnostic::NegativePower { state, power } => {
                write!(f, "negative power {power} on state {state}")
            }
            Diagnostic::DanglingState { transition, index } => {
                write!(f, "dangling state id {index} in transition {transition}")
            }
            Diagnostic::NonpositiveRate { transition, rate } => {
                write!(f, "nonpositive rate {rate} on transition {transition}")
            }
            Diagnostic::NonBinaryReset { transition, reset } => {
                write!(f, "non-binary reset {reset} on transition {transition}")
            }
            Diagnostic::AbsorbingState { state } => write!(f, "absorbing state {state}"),
            Diagnostic::UnreachableState { state } => {
                write!(
                    f,
                    "unreachable state {state} (chain not strongly connected)"
                )
            }
        }
    }
}

fn is_binary(x: f64) -> bool {
    x == 0.0 || x == 1.0
}

/// Checks every model invariant and returns one diagnostic per violation.
pub fn validate_model(model: &ShsModel) -> Vec<Diagnostic> {
    let n = model.states.len();
    let mut diags = Vec::new();
    if n == 0 {
        diags.push(Diagnostic::EmptyModel);
        return diags;
    }

    let mut seen = vec![false; n];
    for s in &model.states {
        let index = s.id.index;
        if index >= n {
            diags.push(Diagnostic::IndexOutOfRange { index, count: n });
        } else if std::mem::replace(&mut seen[index], true) {
            diags.push(Diagnostic::DuplicateIndex { index });
        }
        if !is_binary(s.annotation.growth) {
            diags.push(Diagnostic::NonBinaryGrowth {
                state: index,
                growth: s.annotation.growth,
            });
        }
        if !(s.annotation.power >= 0.0 && s.annotation.power.is_finite()) {
            diags.push(Diagnostic::NegativePower {
                state: index,
                power: s.annotation.power,
            });
        }
    }
    let indices_ok = seen.iter().all(|&b| b);

    let mut has_out = vec![false; n];
    let mut forward = vec![Vec::new(); n];
    let mut backward = vec![Vec::new(); n];
    let mut edges_ok = true;
    for (l, t) in model.transitions.iter().enumerate() {
        for index in [t.from, t.to] {
            if index >= n {
                diags.push(Diagnostic::DanglingState {
                    transition: l,
                    index,
                });
                edges_ok = false;
            }
        }
        if !(t.rate > 0.0 && t.rate.is_finite()) {
            diags.push(Diagnostic::NonpositiveRate {
                transition: l,
                rate: t.rate,
            });
        }
        if !is_binary(t.reset) {
            diags.push(Diagnostic::NonBinaryReset {
                transition: l,
                reset: t.reset,
            });
        }
        if t.from < n && t.to < n {
            has_out[t.from] = true;
            forward[t.from].push(t.to);
            backward[t.to].push(t.from);
        }
    }

    for (state, _) in has_out.iter().enumerate().filter(|(_, &b)| !b) {
        diags.push(Diagnostic::AbsorbingState { state });
    }

    if indices_ok && edges_ok {
        let fwd = reachable(&forward, 0);
        let bwd = reachable(&backward, 0);
        for state in 0..n {
            if !(fwd[state] && bwd[state]) {
                diags.push(Diagnostic::UnreachableState { state });
            }
        }
    }
    diags
}

fn reachable(adjacency: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; adjacency.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(q) = queue.pop_front() {
        for &next in &adjacency[q] {
            if !seen[next] {
                seen[next] = true;
                queue.push_back(next);
            }
        }
    }
    seen
}

fn ensure_valid(model: &ShsModel) -> Result<()> {
    let diags = validate_model(model);
    if diags.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidModel(diags))
    }
}

/// Stationary probabilities indexed by state index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    pub pi: Vec<f64>,
}

impl StationaryDistribution {
    pub fn get(&self, index: usize) -> f64 {
        self.pi[index]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pi
    }

    /// `max_q |pi_q out(q) - sum_{l into q} rate(l) pi_{from(l)}|`.
    pub fn balance_residual(&self, model: &ShsModel) -> f64 {
        let out = model.outgoing_rates();
        let mut r: Vec<f64> = self.pi.iter().zip(&out).map(|(p, o)| p * o).collect();
        for t in model.transitions() {
            r[t.to] -= t.rate * self.pi[t.from];
        }
        r.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Age correlation vector `v_q = E[age * 1{state = q}]`, indexed by state index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationVector {
    pub v: Vec<f64>,
}

impl CorrelationVector {
    pub fn get(&self, index: usize) -> f64 {
        self.v[index]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.v
    }

    /// Max-norm residual of the correlation equations.
    pub fn residual(&self, model: &ShsModel, pi: &StationaryDistribution) -> f64 {
        let out = model.outgoing_rates();
        let ann = model.annotations_by_index();
        let mut r: Vec<f64> = (0..self.v.len())
            .map(|q| self.v[q] * out[q] - ann[q].growth * pi.pi[q])
            .collect();
        for t in model.transitions() {
            r[t.to] -= t.rate * t.reset * self.v[t.from];
        }
        r.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

fn lu_solve(matrix: DMatrix<f64>, rhs: DVector<f64>, what: &str) -> Result<Vec<f64>> {
    let x = matrix
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem(format!("{what}: zero pivot")))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem(format!(
            "{what}: non-finite solution"
        )));
    }
    Ok(x.iter().copied().collect())
}

/// Clamps round-off negatives to zero; anything more negative than the
/// tolerance (scaled by `scale`) is an error.
fn clamp_nonnegative(x: &mut [f64], scale: f64, what: &str) -> Result<()> {
    let floor = -NEGATIVE_TOLERANCE * scale.max(1.0);
    for (q, value) in x.iter_mut().enumerate() {
        if *value < floor {
            return Err(Error::SingularSystem(format!(
                "{what}: entry {q} = {value:e} is negative"
            )));
        }
        if *value < 0.0 {
            *value = 0.0;
        }
    }
    Ok(())
}

/// Solves the balance equations with the last one replaced by normalization.
pub fn solve_stationary(model: &ShsModel) -> Result<StationaryDistribution> {
    ensure_valid(model)?;
    let n = model.state_count();
    let out = model.outgoing_rates();

    let mut a = DMatrix::<f64>::zeros(n, n);
    for q in 0..n {
        a[(q, q)] += out[q];
    }
    for t in model.transitions() {
        a[(t.to, t.from)] -= t.rate;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;

    let mut pi = lu_solve(a, b, "stationary distribution")?;
    clamp_nonnegative(&mut pi, 1.0, "stationary distribution")?;
    let total: f64 = pi.iter().sum();
    if !(total > 0.0) {
        return Err(Error::SingularSystem(
            "stationary distribution: zero mass".into(),
        ));
    }
    pi.iter_mut().for_each(|p| *p /= total);

    let dist = StationaryDistribution { pi };
    let residual = dist.balance_residual(model);
    if residual > RESIDUAL_TOLERANCE * model.max_rate().max(1.0) {
        return Err(Error::SingularSystem(format!(
            "stationary distribution: balance residual {residual:e}"
        )));
    }
    let total: f64 = dist.pi.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::SingularSystem(format!(
            "stationary distribution sums to {total}"
        )));
    }
    Ok(dist)
}

/// Solves the age correlation equations given the stationary distribution.
pub fn solve_correlation(
    model: &ShsModel,
    pi: &StationaryDistribution,
) -> Result<CorrelationVector> {
    ensure_valid(model)?;
    let n = model.state_count();
    if pi.pi.len() != n {
        return Err(Error::SingularSystem(format!(
            "distribution has {} entries for {n} states",
            pi.pi.len()
        )));
    }
    // Without a reset-to-zero transition the system is the (singular) generator.
    if model.transitions().iter().all(|t| t.reset != 0.0) {
        return Err(Error::SingularSystem(
            "correlation: no transition resets the age, solution is not unique".into(),
        ));
    }

    let out = model.outgoing_rates();
    let ann = model.annotations_by_index();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for q in 0..n {
        a[(q, q)] += out[q];
    }
    for t in model.transitions() {
        a[(t.to, t.from)] -= t.rate * t.reset;
    }
    let b = DVector::from_iterator(n, (0..n).map(|q| ann[q].growth * pi.pi[q]));

    let mut v = lu_solve(a, b, "correlation")?;
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    clamp_nonnegative(&mut v, scale, "correlation")?;

    let corr = CorrelationVector { v };
    let residual = corr.residual(model, pi);
    let tol = RESIDUAL_TOLERANCE * model.max_rate().max(1.0) * scale.max(1.0);
    if residual > tol {
        return Err(Error::SingularSystem(format!(
            "correlation: residual {residual:e} exceeds {tol:e}"
        )));
    }
    Ok(corr)
}

/// Long-run average age: the sum of the correlation vector.
pub fn average_aos(v: &CorrelationVector) -> f64 {
    v.v.iter().sum()
}

/// Long-run average power: `sum_q pi_q * power(q)`.
pub fn average_power(pi: &StationaryDistribution, model: &ShsModel) -> f64 {
    model
        .states()
        .iter()
        .map(|s| pi.pi[s.id.index] * s.annotation.power)
        .sum()
}
