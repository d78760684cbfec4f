//! `qagent`: command-line front end of the learning-agent simulator.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qagent_core::detector::{pg, DetectionModel, DetectorParams};
use qagent_core::harness::{self, format_float, ExperimentConfig};
use qagent_core::learner::iterations_to_reach;
use qagent_core::modes::{default_horizon, make_exponential_mode, overlap_exponential_closed_form, overlap_quadrature};
use qagent_core::rng::{context_tag, RngStreamKey};
use qagent_core::thermo::{self, absorption_probability};
use qagent_core::{BathParams, Error, ModeParams, Overlap};

#[derive(Parser, Debug)]
#[command(name = "qagent", version, about = "Single-photon versus coherent-pulse learning agent simulator")]
struct Cli {
    /// Experiment config file (sectioned key = value).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override `run.seed`.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Override `run.output_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Format of results printed to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the overlap Γ between a control mode and the true mode.
    Overlap(OverlapArgs),
    /// Print the ground-state (click) probabilities of both detectors.
    Detect(DetectArgs),
    /// Run the learning sweep of the config and write one CSV per pair.
    Learn,
    /// Print work, free energy and heat of one detection.
    Thermo(ThermoArgs),
    /// Validate the closed forms against the master-equation oracles.
    Oracle,
    /// Run a canned experiment.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Figure {
    Fig2,
    Fig4,
}

#[derive(Args, Debug)]
struct ModeArgs {
    /// Control linewidth γ.
    #[arg(long, allow_hyphen_values = true)]
    gamma: f64,
    /// Control detuning Δ.
    #[arg(long, allow_hyphen_values = true)]
    delta: f64,
    /// True linewidth γ_T (defaults to `world.gamma_t`).
    #[arg(long, allow_hyphen_values = true)]
    gamma_t: Option<f64>,
    /// True detuning Δ_T (defaults to `world.delta_t`).
    #[arg(long, allow_hyphen_values = true)]
    delta_t: Option<f64>,
}

#[derive(Args, Debug)]
struct OverlapArgs {
    #[command(flatten)]
    mode: ModeArgs,
    /// Also integrate the overlap numerically with this many points.
    #[arg(long)]
    quadrature: Option<usize>,
}

#[derive(Args, Debug)]
struct DetectArgs {
    /// Overlap Γ; alternatively give the control mode.
    #[arg(long, conflicts_with_all = ["gamma", "delta"])]
    overlap: Option<f64>,
    /// Control linewidth γ
    #[arg(long, allow_hyphen_values = true, requires = "delta")]
    gamma: Option<f64>,
    /// Control detuning Δ
    #[arg(long, allow_hyphen_values = true, requires = "gamma")]
    delta: Option<f64>,
    /// Sensor Boltzmann factor μ_σ (`inf` for zero temperature); defaults
    /// to every `world.mu_sigma`.
    #[arg(long)]
    mu: Option<f64>,
}

#[derive(Args, Debug)]
struct ThermoArgs {
    /// Absorption probability; alternatively give an overlap and a model.
    #[arg(long, conflicts_with_all = ["overlap", "model"])]
    p_abs: Option<f64>,
    /// Overlap Γ between control and signal modes
    #[arg(long, requires = "model")]
    overlap: Option<f64>,
    /// Detector model: `quantum` or `classical`
    #[arg(long)]
    model: Option<String>,
    /// Boltzmann factor μ (`inf` for zero temperature).
    #[arg(long)]
    mu: f64,
    /// Also estimate ΔF by Monte Carlo with this many trials.
    #[arg(long)]
    trials: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => harness::load_config(p)?,
        None => ExperimentConfig::default(),
    };
    apply_overrides(cli, &mut cfg);
    Ok(cfg)
}

fn apply_overrides(cli: &Cli, cfg: &mut ExperimentConfig) {
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.run.output_dir = o.clone();
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match &cli.command {
        Command::Overlap(a) => overlap(&cli, a),
        Command::Detect(a) => detect(&cli, a),
        Command::Thermo(a) => thermo_cmd(&cli, a),
        Command::Learn => {
            let cfg = load(&cli)?;
            learn(&cli, &cfg)
        }
        Command::Reproduce { figure } => {
            if cli.config.is_some() {
                return Err(Error::Config("`reproduce` runs a canned config; drop --config or use `learn`".into()));
            }
            let mut cfg = match figure {
                Figure::Fig2 => ExperimentConfig::fig2(),
                Figure::Fig4 => ExperimentConfig::fig4(),
            };
            apply_overrides(&cli, &mut cfg);
            learn(&cli, &cfg)
        }
        Command::Oracle => oracle(&cli),
    }
}

/// Print rows either as CSV (header plus rows) or as a JSON array.
fn emit(format: Format, header: &[&str], rows: &[Vec<Value>]) {
    let mut text = String::new();
    match format {
        Format::Csv => {
            text.push_str(&header.join(","));
            text.push('\n');
            for r in rows {
                let cells: Vec<String> = r.iter().map(csv_cell).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
        }
        Format::Json => {
            let objs: Vec<Value> = rows
                .iter()
                .map(|r| Value::Object(header.iter().map(|h| h.to_string()).zip(r.iter().cloned()).collect()))
                .collect();
            text = serde_json::to_string_pretty(&objs).expect("rows serialize");
            text.push('\n');
        }
    }
    // a closed pipe (e.g. `| head`) is not an error for us
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => format_float(n.as_f64().expect("f64 number")),
        Value::Number(n) => n.to_string(),
        Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn float(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(format!("{x}"))
    }
}

fn truth(cfg: &ExperimentConfig, m: &ModeArgs) -> Result<(ModeParams, ModeParams), Error> {
    let control = ModeParams::new(m.gamma, m.delta)?;
    let signal = ModeParams::new(m.gamma_t.unwrap_or(cfg.f_true.gamma), m.delta_t.unwrap_or(cfg.f_true.delta))?;
    Ok((control, signal))
}

fn overlap(cli: &Cli, a: &OverlapArgs) -> Result<ExitCode, Error> {
    let cfg = load(cli)?;
    let (control, signal) = truth(&cfg, &a.mode)?;
    let closed = overlap_exponential_closed_form(control, signal)?.value();
    let mut header = vec!["gamma", "delta", "gamma_t", "delta_t", "overlap"];
    let mut row = vec![float(control.gamma), float(control.delta), float(signal.gamma), float(signal.delta), float(closed)];
    if let Some(n) = a.quadrature {
        let q = overlap_quadrature(
            &make_exponential_mode(control)?,
            &make_exponential_mode(signal)?,
            default_horizon(control, signal),
            n,
        )?;
        header.push("overlap_quadrature");
        row.push(float(q.value()));
    }
    emit(cli.format, &header, &[row]);
    Ok(ExitCode::SUCCESS)
}

fn detect(cli: &Cli, a: &DetectArgs) -> Result<ExitCode, Error> {
    let cfg = load(cli)?;
    let overlap = match (a.overlap, a.gamma, a.delta) {
        (Some(g), _, _) => Overlap::new(g)?,
        (None, Some(g), Some(d)) => overlap_exponential_closed_form(ModeParams::new(g, d)?, cfg.f_true)?,
        _ => return Err(Error::Config("give --overlap or both --gamma and --delta".into())),
    };
    let baths = match a.mu {
        Some(mu) => vec![BathParams::new(mu)?],
        None => cfg.temperatures.clone(),
    };
    let mut rows = Vec::new();
    for bath in baths {
        let det = DetectorParams { bath, ..cfg.detector };
        det.validate()?;
        rows.push(vec![
            float(overlap.value()),
            float(bath.mu()),
            float(det.chi),
            float(pg(DetectionModel::Quantum, overlap, &det)?),
            float(pg(DetectionModel::Classical, overlap, &det)?),
        ]);
    }
    emit(cli.format, &["overlap", "mu_sigma", "chi", "pg_quantum", "pg_classical"], &rows);
    Ok(ExitCode::SUCCESS)
}

fn thermo_cmd(cli: &Cli, a: &ThermoArgs) -> Result<ExitCode, Error> {
    let cfg = load(cli)?;
    let bath = BathParams::new(a.mu)?;
    let p_abs = match (a.p_abs, a.overlap, &a.model) {
        (Some(p), _, _) => p,
        (None, Some(g), Some(m)) => {
            let model: DetectionModel = m.parse()?;
            absorption_probability(model, Overlap::new(g)?, &cfg.detector.with_bath(bath))
        }
        _ => return Err(Error::Config("give --p-abs or both --overlap and --model".into())),
    };
    let scaled = thermo::scaled(p_abs, bath)?;
    let mut header = vec!["p_abs", "mu", "w_avg_scaled", "df_scaled", "q_scaled"];
    let mut row = vec![
        float(p_abs),
        float(a.mu),
        float(scaled.w_avg_scaled),
        float(scaled.df_scaled),
        float(scaled.q_scaled),
    ];
    if !bath.is_zero_temperature() {
        let s = thermo::summarize(p_abs, a.mu)?;
        header.extend(["w_avg", "df", "q"]);
        row.extend([float(s.w_avg), float(s.df), float(s.q)]);
        if let Some(n) = a.trials {
            let mut rng = RngStreamKey::new(cfg.run.seed, context_tag("cli/thermo")).stream();
            let est = thermo::jarzynski_monte_carlo(p_abs, a.mu, n, &mut rng)?;
            header.extend(["df_monte_carlo", "df_std_error"]);
            row.extend([float(est.estimate), float(est.std_error)]);
        }
    } else if a.trials.is_some() {
        return Err(Error::Config("Monte Carlo needs a finite --mu".into()));
    }
    emit(cli.format, &header, &[row]);
    Ok(ExitCode::SUCCESS)
}

fn learn(cli: &Cli, cfg: &ExperimentConfig) -> Result<ExitCode, Error> {
    let out = harness::run_scenario(cfg)?;
    let rows: Vec<Vec<Value>> = out
        .files
        .iter()
        .zip(&out.results)
        .map(|(f, r)| {
            let last = r.records.last().expect("at least one record");
            vec![
                json!(f.path.display().to_string()),
                json!(f.kind.name()),
                json!(f.mu_sigma),
                json!(f.rows),
                iterations_to_reach(&r.records, 0.05).map_or(Value::Null, |i| json!(i)),
                float(last.dist_norm),
                float(last.p_e_model),
            ]
        })
        .collect();
    emit(
        cli.format,
        &["file", "kind", "mu_sigma", "rows", "iterations_to_0.05", "final_dist_norm", "final_p_e_model"],
        &rows,
    );
    eprintln!("manifest: {}", out.manifest.display());
    Ok(ExitCode::SUCCESS)
}

fn oracle(cli: &Cli) -> Result<ExitCode, Error> {
    let cfg = load(cli)?;
    let report = harness::run_oracle_validation(&cfg)?;
    let paths = harness::write_oracle_report(&cfg, &report)?;
    let opt = |x: Option<f64>| x.map_or(Value::Null, float);
    let rows: Vec<Vec<Value>> = report
        .cases
        .iter()
        .map(|c| {
            vec![
                serde_json::to_value(c.case).expect("case serializes"),
                json!(c.model.name()),
                float(c.kappa),
                float(c.chi_eff),
                opt(c.dev_quadrature),
                opt(c.dev_closed),
                json!(if c.pass { "pass" } else { "FAIL" }),
                c.error.clone().map_or(Value::Null, Value::String),
            ]
        })
        .collect();
    emit(
        cli.format,
        &["case", "model", "kappa", "chi_eff", "dev_quadrature", "dev_closed", "status", "error"],
        &rows,
    );
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
    eprintln!(
        "sweep strictly decreasing: {}; overall: {}",
        report.sweep_decreasing,
        if report.pass { "pass" } else { "FAIL" }
    );
    Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(2) })
}
