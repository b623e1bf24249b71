//! `aoswake`: analytical and simulated age/energy evaluation of sleep/wake-up
//! policies, single points or sweeps, with CSV output.
//!
//! Exit codes: 0 on success, 2 on invalid configuration, 1 on runtime error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aoswake::desim::{record_path, write_path_csv, SimConfig};
use aoswake::sweep::{
    emit_csv, gnuplot_script, preset, run_point, run_sweep, Mode, SweepSpec, SweepValues,
    SweptParam, TradeoffPoint, PRESET_NAMES,
};
use aoswake::{Error, PolicyKind, PolicyParams};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aoswake", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the SHS model of one parameter tuple.
    Analyze(PointArgs),
    /// Simulate one parameter tuple.
    Simulate {
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Write the first replication's sample path (time,aos,phase_label) here.
        #[arg(long)]
        dump_path: Option<PathBuf>,
        /// Maximum number of sample-path rows.
        #[arg(long, default_value_t = 100_000)]
        dump_limit: usize,
    },
    /// Sweep one parameter over a grid.
    Sweep {
        /// JSON sweep specification; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated policies (n-policy, single-sleep, multi-sleep).
        #[arg(long, value_delimiter = ',')]
        policy: Vec<PolicyKind>,
        /// Swept parameter: lambda, d, theta, s or n.
        #[arg(long)]
        sweep: Option<SweptParam>,
        /// `min:max:count[:lin|log]` or a comma-separated list.
        #[arg(long)]
        grid: Option<SweepValues>,
        #[arg(long)]
        mode: Option<Mode>,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a gnuplot script next to the CSV.
        #[arg(long)]
        gnuplot: bool,
    },
    /// Run a named figure preset (fig7, fig8, fig9, fig10).
    Preset {
        name: String,
        #[arg(long)]
        mode: Option<Mode>,
        #[command(flatten)]
        sim: SimArgs,
        /// CSV path; multi-sweep presets add a `_<tag>` suffix per sweep.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        gnuplot: bool,
    },
}

#[derive(Args)]
struct PointArgs {
    /// Policies to evaluate (default: all).
    #[arg(long, value_delimiter = ',')]
    policy: Vec<PolicyKind>,
    /// JSON file with system parameters; flags override it.
    #[arg(long)]
    params: Option<PathBuf>,
    #[command(flatten)]
    overrides: ParamArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Default)]
struct ParamArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    p_busy: Option<f64>,
    #[arg(long)]
    p_idle: Option<f64>,
    #[arg(long)]
    p_sleep: Option<f64>,
    #[arg(long)]
    p_wake: Option<f64>,
}

impl ParamArgs {
    fn apply(&self, mut p: PolicyParams) -> PolicyParams {
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut p.lambda, self.lambda);
        set(&mut p.mu, self.mu);
        set(&mut p.d, self.d);
        set(&mut p.theta, self.theta);
        set(&mut p.s, self.s);
        set(&mut p.p_busy, self.p_busy);
        set(&mut p.p_idle, self.p_idle);
        set(&mut p.p_sleep, self.p_sleep);
        set(&mut p.p_wake, self.p_wake);
        if let Some(n) = self.n {
            p.n = n;
        }
        p
    }
}

#[derive(Args, Default)]
struct SimArgs {
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    warmup: Option<f64>,
    #[arg(long)]
    batches: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl SimArgs {
    fn apply(&self, mut c: SimConfig) -> SimConfig {
        if let Some(h) = self.horizon {
            c.horizon = h;
            // Keep the default warm-up admissible for short horizons.
            if self.warmup.is_none() && c.warmup >= h {
                c.warmup = h / 10.0;
            }
        }
        if let Some(w) = self.warmup {
            c.warmup = w;
        }
        if let Some(b) = self.batches {
            c.batches = b;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        c
    }
}

enum CliError {
    Input(String),
    Runtime(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_params(args: &PointArgs) -> Result<PolicyParams, CliError> {
    let base = match &args.params {
        Some(path) => read_json(path)?,
        None => PolicyParams::default(),
    };
    Ok(args.overrides.apply(base))
}

fn policies_or_all(policies: &[PolicyKind]) -> Vec<PolicyKind> {
    if policies.is_empty() {
        PolicyKind::ALL.to_vec()
    } else {
        policies.to_vec()
    }
}

fn print_points(points: &[TradeoffPoint]) {
    println!(
        "{:<13} {:>6} {:>12} {:>14} {:>14} {:>11} {:>11}",
        "policy", "param", "value", "avg_aos", "avg_power", "aos_se", "power_se"
    );
    for p in points {
        let se = |x: Option<f64>| x.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<13} {:>6} {:>12.6} {:>14.9} {:>14.9} {:>11} {:>11}",
            p.policy.as_str(),
            p.swept_param.as_str(),
            p.swept_value,
            p.avg_aos,
            p.avg_power,
            se(p.aos_se),
            se(p.power_se),
        );
    }
}

fn write_outputs(
    points: &[TradeoffPoint],
    out: Option<&Path>,
    gnuplot: bool,
    title: &str,
) -> Result<(), CliError> {
    let Some(out) = out else {
        print_points(points);
        return Ok(());
    };
    emit_csv(points, out)?;
    eprintln!("wrote {} rows to {}", points.len(), out.display());
    if gnuplot {
        let script_path = out.with_extension("gp");
        let csv_name = out
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        fs::write(&script_path, gnuplot_script(&csv_name, points, title))
            .map_err(|e| CliError::Runtime(format!("{}: {e}", script_path.display())))?;
        eprintln!("wrote {}", script_path.display());
    }
    Ok(())
}

fn point_rows(
    args: &PointArgs,
    mode: Mode,
    sim: &SimConfig,
) -> Result<(PolicyParams, Vec<TradeoffPoint>), CliError> {
    let params = load_params(args)?;
    let mut points = Vec::new();
    for kind in policies_or_all(&args.policy) {
        points.extend(run_point(
            kind,
            &params,
            mode,
            sim,
            (SweptParam::Lambda, params.lambda),
        )?);
    }
    Ok((params, points))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze(args) => {
            let (_, points) = point_rows(&args, Mode::Analytical, &SimConfig::default())?;
            write_outputs(&points, args.out.as_deref(), false, "analysis")
        }
        Command::Simulate {
            point,
            sim,
            dump_path,
            dump_limit,
        } => {
            let config = sim.apply(SimConfig::default());
            config.validate()?;
            let (params, points) = point_rows(&point, Mode::Simulate, &config)?;
            write_outputs(&points, point.out.as_deref(), false, "simulation")?;
            if let Some(path) = dump_path {
                let kind = policies_or_all(&point.policy)[0];
                let records = record_path(kind, &params, &config, dump_limit)?;
                write_path_csv(&records, &path)?;
                eprintln!("wrote {} path rows to {}", records.len(), path.display());
            }
            Ok(())
        }
        Command::Sweep {
            config,
            policy,
            sweep,
            grid,
            mode,
            params,
            sim,
            out,
            gnuplot,
        } => {
            let mut spec = match config {
                Some(path) => read_json::<SweepSpec>(&path)?,
                None => SweepSpec {
                    policies: PolicyKind::ALL.to_vec(),
                    param: sweep.ok_or_else(|| {
                        CliError::Input("either --config or --sweep is required".into())
                    })?,
                    values: grid.clone().ok_or_else(|| {
                        CliError::Input("either --config or --grid is required".into())
                    })?,
                    fixed: PolicyParams::default(),
                    mode: Mode::Analytical,
                    sim: SimConfig::default(),
                },
            };
            if !policy.is_empty() {
                spec.policies = policy;
            }
            if let Some(p) = sweep {
                spec.param = p;
            }
            if let Some(g) = grid {
                spec.values = g;
            }
            if let Some(m) = mode {
                spec.mode = m;
            }
            spec.fixed = params.apply(spec.fixed);
            spec.sim = sim.apply(spec.sim);
            let points = run_sweep(&spec)?;
            let title = format!("trade-off vs {}", spec.param);
            write_outputs(&points, out.as_deref(), gnuplot, &title)
        }
        Command::Preset {
            name,
            mode,
            sim,
            out,
            gnuplot,
        } => {
            let sweeps = preset(&name).ok_or_else(|| {
                CliError::Input(format!(
                    "unknown preset `{name}` (expected one of {})",
                    PRESET_NAMES.join(", ")
                ))
            })?;
            let single = sweeps.len() == 1;
            for mut s in sweeps {
                if let Some(m) = mode {
                    s.spec.mode = m;
                }
                s.spec.sim = sim.apply(s.spec.sim);
                let points = run_sweep(&s.spec)?;
                let path = out.as_ref().map(|o| {
                    if single {
                        o.clone()
                    } else {
                        suffixed(o, &s.tag)
                    }
                });
                if path.is_none() {
                    println!("# {name} {}", s.tag);
                }
                write_outputs(
                    &points,
                    path.as_deref(),
                    gnuplot,
                    &format!("{name} {}", s.tag),
                )?;
            }
            Ok(())
        }
    }
}

fn suffixed(path: &Path, tag: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = path
        .extension()
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_default();
    path.with_file_name(format!("{stem}_{tag}{ext}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
