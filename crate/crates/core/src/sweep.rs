//! Parameter sweeps producing age-energy trade-off points, CSV output and
//! the named figure presets.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::desim::{simulate, SimConfig};
use crate::error::{Error, Result};
use crate::policies::{analyze, PolicyKind, PolicyParams};

pub const CSV_HEADER: [&str; 8] = [
    "policy",
    "swept_param",
    "swept_value",
    "avg_aos",
    "avg_power",
    "source",
    "aos_se",
    "power_se",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweptParam {
    Lambda,
    D,
    Theta,
    S,
    N,
}

impl SweptParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweptParam::Lambda => "lambda",
            SweptParam::D => "d",
            SweptParam::Theta => "theta",
            SweptParam::S => "s",
            SweptParam::N => "n",
        }
    }

    /// Whether sweeping this parameter makes sense for `kind`.
    pub fn applies_to(self, kind: PolicyKind) -> bool {
        match self {
            SweptParam::S => kind != PolicyKind::NPolicy,
            SweptParam::N => kind == PolicyKind::NPolicy,
            _ => true,
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &PolicyParams, value: f64) -> Result<PolicyParams> {
        let mut p = *base;
        match self {
            SweptParam::Lambda => p.lambda = value,
            SweptParam::D => p.d = value,
            SweptParam::Theta => p.theta = value,
            SweptParam::S => p.s = value,
            SweptParam::N => {
                if !(value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64) {
                    return Err(Error::InvalidParams {
                        param: "n",
                        value,
                        reason: "must be a positive integer",
                    });
                }
                p.n = value as u32;
            }
        }
        Ok(p)
    }
}

impl fmt::Display for SweptParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweptParam {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lambda" => Ok(SweptParam::Lambda),
            "d" => Ok(SweptParam::D),
            "theta" => Ok(SweptParam::Theta),
            "s" => Ok(SweptParam::S),
            "n" => Ok(SweptParam::N),
            other => Err(format!("unknown sweep parameter `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridScale {
    #[serde(alias = "lin")]
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepValues {
    List(Vec<f64>),
    Grid {
        min: f64,
        max: f64,
        count: usize,
        scale: GridScale,
    },
}

impl SweepValues {
    pub fn log(min: f64, max: f64, count: usize) -> Self {
        SweepValues::Grid {
            min,
            max,
            count,
            scale: GridScale::Log,
        }
    }

    /// Expanded values, ascending.
    pub fn values(&self) -> Result<Vec<f64>> {
        let mut values = match self {
            SweepValues::List(v) => v.clone(),
            &SweepValues::Grid {
                min,
                max,
                count,
                scale,
            } => {
                if count == 0 || !(min <= max) {
                    return Err(Error::InvalidSweep(format!(
                        "grid needs count >= 1 and min <= max, got ({min}, {max}, {count})"
                    )));
                }
                if scale == GridScale::Log && !(min > 0.0) {
                    return Err(Error::InvalidSweep("log grid needs min > 0".into()));
                }
                if count == 1 {
                    vec![min]
                } else {
                    let steps = (count - 1) as f64;
                    (0..count)
                        .map(|i| {
                            let f = i as f64 / steps;
                            // Endpoints are exact so `max` can be looked up by value.
                            if i == 0 {
                                return min;
                            }
                            if i + 1 == count {
                                return max;
                            }
                            match scale {
                                GridScale::Linear => min + (max - min) * f,
                                GridScale::Log => (min.ln() + (max.ln() - min.ln()) * f).exp(),
                            }
                        })
                        .collect()
                }
            }
        };
        if values.is_empty() {
            return Err(Error::InvalidSweep("no sweep values".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSweep("non-finite sweep value".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(values)
    }
}

impl FromStr for SweepValues {
    type Err = String;

    /// `min:max:count[:lin|log]` or a comma-separated list.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            if !(3..=4).contains(&parts.len()) {
                return Err(format!("grid `{s}` must be min:max:count[:lin|log]"));
            }
            let scale = match parts.get(3).map(|p| p.trim()) {
                None | Some("log") => GridScale::Log,
                Some("lin") | Some("linear") => GridScale::Linear,
                Some(other) => return Err(format!("unknown grid scale `{other}`")),
            };
            Ok(SweepValues::Grid {
                min: num(parts[0])?,
                max: num(parts[1])?,
                count: parts[2]
                    .trim()
                    .parse()
                    .map_err(|e| format!("`{}`: {e}", parts[2]))?,
                scale,
            })
        } else {
            s.split(',')
                .map(num)
                .collect::<Result<_, _>>()
                .map(SweepValues::List)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Analytical,
    Simulate,
    Both,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "analytical" | "analytic" => Ok(Mode::Analytical),
            "simulate" | "simulated" | "sim" => Ok(Mode::Simulate),
            "both" => Ok(Mode::Both),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub policies: Vec<PolicyKind>,
    pub param: SweptParam,
    pub values: SweepValues,
    #[serde(default)]
    pub fixed: PolicyParams,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub sim: SimConfig,
}

fn default_mode() -> Mode {
    Mode::Analytical
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Analytical,
    Simulated,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Analytical => "analytical",
            Source::Simulated => "simulated",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub policy: PolicyKind,
    pub swept_param: SweptParam,
    pub swept_value: f64,
    pub avg_aos: f64,
    pub avg_power: f64,
    pub source: Source,
    pub aos_se: Option<f64>,
    pub power_se: Option<f64>,
}

fn at_point(kind: PolicyKind, params: &PolicyParams, err: Error) -> Error {
    Error::AtPoint {
        point: format!("{kind} {params}"),
        source: Box::new(err),
    }
}

/// Evaluates one parameter tuple in the requested mode(s). The analytical
/// point comes first.
pub fn run_point(
    kind: PolicyKind,
    params: &PolicyParams,
    mode: Mode,
    sim: &SimConfig,
    swept: (SweptParam, f64),
) -> Result<Vec<TradeoffPoint>> {
    let (swept_param, swept_value) = swept;
    let mut points = Vec::with_capacity(2);
    if matches!(mode, Mode::Analytical | Mode::Both) {
        let r = analyze(kind, params).map_err(|e| at_point(kind, params, e))?;
        points.push(TradeoffPoint {
            policy: kind,
            swept_param,
            swept_value,
            avg_aos: r.avg_aos,
            avg_power: r.avg_power,
            source: Source::Analytical,
            aos_se: None,
            power_se: None,
        });
    }
    if matches!(mode, Mode::Simulate | Mode::Both) {
        let r = simulate(kind, params, sim).map_err(|e| at_point(kind, params, e))?;
        points.push(TradeoffPoint {
            policy: kind,
            swept_param,
            swept_value,
            avg_aos: r.avg_aos.mean,
            avg_power: r.avg_power.mean,
            source: Source::Simulated,
            aos_se: Some(r.avg_aos.std_err),
            power_se: Some(r.avg_power.std_err),
        });
    }
    Ok(points)
}

/// SplitMix64 finalizer, used to derive per-point seeds.
fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Every applicable (policy, value) pair, ordered by policy then value.
pub fn expand(spec: &SweepSpec) -> Result<Vec<(PolicyKind, PolicyParams, f64)>> {
    if spec.policies.is_empty() {
        return Err(Error::InvalidSweep("empty policy set".into()));
    }
    let values = spec.values.values()?;
    let mut policies = spec.policies.clone();
    policies.sort();
    policies.dedup();
    let mut out = Vec::new();
    for kind in policies.into_iter().filter(|k| spec.param.applies_to(*k)) {
        for &value in &values {
            let params = spec
                .param
                .apply(&spec.fixed, value)
                .and_then(|p| p.validate().map(|_| p))
                .map_err(|e| at_point(kind, &spec.fixed, e))?;
            out.push((kind, params, value));
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidSweep(format!(
            "sweeping `{}` applies to none of the selected policies",
            spec.param
        )));
    }
    Ok(out)
}

/// Runs the sweep. Points are independent; the output order is fixed by
/// [`expand`] and simulation seeds derive from (spec seed, point index).
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<TradeoffPoint>> {
    let jobs = expand(spec)?;
    if matches!(spec.mode, Mode::Simulate | Mode::Both) {
        spec.sim.validate()?;
    }
    let eval = |(i, (kind, params, value)): (usize, &(PolicyKind, PolicyParams, f64))| {
        let sim = SimConfig {
            seed: mix_seed(spec.sim.seed, i as u64),
            ..spec.sim
        };
        run_point(*kind, params, spec.mode, &sim, (spec.param, *value))
    };
    #[cfg(feature = "parallel")]
    let results: Vec<Result<Vec<TradeoffPoint>>> = {
        use rayon::prelude::*;
        jobs.par_iter().enumerate().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<Vec<TradeoffPoint>>> = jobs.iter().enumerate().map(eval).collect();

    let mut points = Vec::new();
    for r in results {
        points.extend(r?);
    }
    Ok(points)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes points as CSV. Floats use Rust's shortest round-trip formatting.
pub fn write_csv<W: Write>(points: &[TradeoffPoint], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for p in points {
        w.write_record([
            p.policy.as_str().to_string(),
            p.swept_param.as_str().to_string(),
            p.swept_value.to_string(),
            p.avg_aos.to_string(),
            p.avg_power.to_string(),
            p.source.as_str().to_string(),
            fmt_opt(p.aos_se),
            fmt_opt(p.power_se),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(points: &[TradeoffPoint], destination: &Path) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidSweep("no points to write".into()));
    }
    let file = File::create(destination).map_err(|source| Error::Io {
        path: destination.to_path_buf(),
        source,
    })?;
    write_csv(points, file).map_err(|source| Error::Csv {
        path: destination.to_path_buf(),
        source,
    })
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<TradeoffPoint>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(|e| Error::CsvFormat {
        row: 0,
        reason: e.to_string(),
    })?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::CsvFormat {
            row: 0,
            reason: format!("unexpected header {header:?}"),
        });
    }
    let mut points = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 1;
        let bad = |reason: String| Error::CsvFormat { row, reason };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |j: usize| {
            rec[j]
                .parse::<f64>()
                .map_err(|e| bad(format!("column {j}: {e}")))
        };
        let opt = |j: usize| {
            if rec[j].is_empty() {
                Ok(None)
            } else {
                num(j).map(Some)
            }
        };
        points.push(TradeoffPoint {
            policy: rec[0].parse().map_err(bad)?,
            swept_param: rec[1].parse().map_err(bad)?,
            swept_value: num(2)?,
            avg_aos: num(3)?,
            avg_power: num(4)?,
            source: match &rec[5] {
                "analytical" => Source::Analytical,
                "simulated" => Source::Simulated,
                other => return Err(bad(format!("unknown source `{other}`"))),
            },
            aos_se: opt(6)?,
            power_se: opt(7)?,
        });
    }
    Ok(points)
}

/// A gnuplot script drawing one (E[P], AoS) curve per policy and source.
/// The points are inlined as datablocks; `csv_name` is recorded in a comment.
pub fn gnuplot_script(csv_name: &str, points: &[TradeoffPoint], title: &str) -> String {
    let mut series: Vec<(PolicyKind, Source)> = Vec::new();
    for p in points {
        if !series.contains(&(p.policy, p.source)) {
            series.push((p.policy, p.source));
        }
    }
    let block = |kind: PolicyKind, source: Source| {
        format!("${}_{}", kind.as_str().replace('-', "_"), source.as_str())
    };
    let mut s = format!("# data: {csv_name}\n");
    for &(kind, source) in &series {
        s.push_str(&format!("{} << EOD\n", block(kind, source)));
        for p in points
            .iter()
            .filter(|p| p.policy == kind && p.source == source)
        {
            s.push_str(&format!(
                "{} {} {}\n",
                p.avg_power, p.avg_aos, p.swept_value
            ));
        }
        s.push_str("EOD\n");
    }
    s.push_str(&format!("set title '{title}'\n"));
    s.push_str("set xlabel 'average energy consumption E[P]'\n");
    s.push_str("set ylabel 'average AoS'\n");
    s.push_str("set grid\n");
    let plots: Vec<String> = series
        .iter()
        .map(|&(kind, source)| {
            let style = match source {
                Source::Analytical => "with linespoints",
                Source::Simulated => "with points pt 6",
            };
            format!(
                "{} using 1:2 {style} title '{} ({})'",
                block(kind, source),
                kind.as_str(),
                source.as_str()
            )
        })
        .collect();
    s.push_str("plot ");
    s.push_str(&plots.join(", \\\n     "));
    s.push('\n');
    s
}

/// One named sweep of a preset; presets with several λ values have one
/// entry per λ.
#[derive(Clone, Debug)]
pub struct PresetSweep {
    pub tag: String,
    pub spec: SweepSpec,
}

/// Figure parameter sets: `fig7` (λ sweep), `fig8` (d), `fig9` (θ), `fig10` (N and s).
pub fn preset(name: &str) -> Option<Vec<PresetSweep>> {
    let base = PolicyParams::default();
    let all = PolicyKind::ALL.to_vec();
    let spec = |param, values, lambda: f64, policies: Vec<PolicyKind>| SweepSpec {
        policies,
        param,
        values,
        fixed: PolicyParams { lambda, ..base },
        mode: Mode::Analytical,
        sim: SimConfig::default(),
    };
    let per_lambda = |param, lambdas: &[f64], values: SweepValues, policies: &[PolicyKind]| {
        lambdas
            .iter()
            .map(|&l| PresetSweep {
                tag: format!("{param}_lambda{l}"),
                spec: spec(param, values.clone(), l, policies.to_vec()),
            })
            .collect::<Vec<_>>()
    };
    match name {
        "fig7" => Some(vec![PresetSweep {
            tag: "lambda".into(),
            spec: spec(
                SweptParam::Lambda,
                SweepValues::log(0.1, 100.0, 25),
                1.0,
                all,
            ),
        }]),
        "fig8" => Some(per_lambda(
            SweptParam::D,
            &[0.5, 2.0],
            SweepValues::log(0.1, 10.0, 13),
            &all,
        )),
        "fig9" => Some(per_lambda(
            SweptParam::Theta,
            &[0.5, 2.0],
            SweepValues::log(0.1, 10.0, 13),
            &all,
        )),
        "fig10" => {
            let lambdas = [0.5, 2.0, 10.0, 100.0];
            let mut sweeps = per_lambda(
                SweptParam::N,
                &lambdas,
                SweepValues::List((1..=10).map(f64::from).collect()),
                &[PolicyKind::NPolicy],
            );
            sweeps.extend(per_lambda(
                SweptParam::S,
                &lambdas,
                SweepValues::log(0.1, 10.0, 13),
                &[PolicyKind::SingleSleep, PolicyKind::MultiSleep],
            ));
            Some(sweeps)
        }
        _ => None,
    }
}

pub const PRESET_NAMES: [&str; 4] = ["fig7", "fig8", "fig9", "fig10"];
