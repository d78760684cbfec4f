//! Experiment configuration.
//!
//! The file format is sectioned `key = value` text (the TOML subset of
//! tables holding numbers, strings and flat arrays):
//!
//! ```toml
//! [world]
//! gamma_t = 1.0
//! delta_t = 2.0
//! mu_sigma = [inf, 2.0, 1.0]
//!
//! [detector]
//! chi = 1.0
//! eta = 1.0
//! kappa = 1000.0
//!
//! [agent]
//! kinds = ["quantum", "classical"]
//! gamma0 = 3.0
//! delta0 = -1.0
//! gamma_bounds = [0.1, 5.0]
//! delta_bounds = [-5.0, 5.0]
//! learning_rate = 0.01
//! shots = 1000
//! fd_step = 0.01
//! backend = "analytic"
//! update_sign = "descent"
//! # seconds_per_shot = 1e-6
//!
//! [run]
//! iterations = 600
//! seed = 42
//! output_dir = "out"
//!
//! [oracle]
//! kappa = [100.0, 1000.0, 10000.0]
//! reference_kappa = 1000.0
//! cavity_kappa = [100.0, 1000.0]
//! chi = 0.01
//! n_max = 6
//! t_max = 40.0
//! # steps = 800000
//! ```
//!
//! Every key is optional. Unknown sections or keys are rejected.

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::detector::{DetectionModel, DetectorParams};
use crate::error::{Error, Result};
use crate::learner::{AgentConfig, Bounds, GradientBackend, UpdateSign, WorldConfig};
use crate::modes::ModeParams;
use crate::source::BathParams;

const SCHEMA: &[(&str, &[&str])] = &[
    ("world", &["gamma_t", "delta_t", "mu_sigma"]),
    ("detector", &["chi", "eta", "kappa"]),
    (
        "agent",
        &[
            "kinds",
            "gamma0",
            "delta0",
            "gamma_bounds",
            "delta_bounds",
            "learning_rate",
            "shots",
            "fd_step",
            "backend",
            "update_sign",
            "seconds_per_shot",
        ],
    ),
    ("run", &["iterations", "seed", "output_dir"]),
    ("oracle", &["kappa", "reference_kappa", "cavity_kappa", "chi", "n_max", "t_max", "steps"]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub iterations: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

/// Settings of the master-equation validation sweep. The control amplitude
/// is fixed by `chi` at `reference_kappa`, so the effective absorption
/// efficiency `4ηA²/κ` falls as `κ` grows.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub kappa: Vec<f64>,
    pub reference_kappa: f64,
    pub cavity_kappa: Vec<f64>,
    pub chi: f64,
    pub n_max: usize,
    pub t_max: f64,
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub f_true: ModeParams,
    pub detector: DetectorParams,
    pub agents: Vec<AgentConfig>,
    pub temperatures: Vec<BathParams>,
    pub run: RunConfig,
    pub oracle: OracleConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        parse_config("").expect("defaults are valid")
    }
}

impl ExperimentConfig {
    /// Learning curves of both agents at `μ_σ ∈ {∞, 2, 1}`.
    pub fn fig2() -> Self {
        Self::default()
    }

    /// Work and free-energy traces of the single-photon agent at
    /// `μ_σ ∈ {∞, 2, 1}`.
    pub fn fig4() -> Self {
        parse_config("[agent]\nkinds = [\"quantum\"]\n").expect("canned config is valid")
    }

    /// The world seen by the agents at one sensor temperature.
    pub fn world_at(&self, bath: BathParams) -> WorldConfig {
        WorldConfig { f_true: self.f_true, detector: self.detector.with_bath(bath) }
    }

    /// The configuration in the input grammar; parsing it back gives an
    /// equal config.
    pub fn to_toml_string(&self) -> String {
        let mut root = Table::new();
        let mut world = Table::new();
        world.insert("gamma_t".into(), self.f_true.gamma.into());
        world.insert("delta_t".into(), self.f_true.delta.into());
        world.insert("mu_sigma".into(), floats(self.temperatures.iter().map(|b| b.mu())));
        root.insert("world".into(), world.into());

        let mut det = Table::new();
        det.insert("chi".into(), self.detector.chi.into());
        det.insert("eta".into(), self.detector.eta.into());
        det.insert("kappa".into(), self.detector.kappa.into());
        root.insert("detector".into(), det.into());

        let a = &self.agents[0];
        let mut agent = Table::new();
        agent.insert(
            "kinds".into(),
            Value::Array(self.agents.iter().map(|a| Value::from(a.kind.name())).collect()),
        );
        agent.insert("gamma0".into(), a.f0.gamma.into());
        agent.insert("delta0".into(), a.f0.delta.into());
        agent.insert("gamma_bounds".into(), floats([a.bounds.gamma.0, a.bounds.gamma.1]));
        agent.insert("delta_bounds".into(), floats([a.bounds.delta.0, a.bounds.delta.1]));
        agent.insert("learning_rate".into(), a.learning_rate.into());
        agent.insert("shots".into(), (a.shots as i64).into());
        agent.insert("fd_step".into(), a.fd_step.into());
        let backend = match a.gradient_backend {
            GradientBackend::Analytic => "analytic",
            GradientBackend::Empirical => "empirical",
        };
        agent.insert("backend".into(), backend.into());
        let sign = match a.update_sign {
            UpdateSign::Descent => "descent",
            UpdateSign::Printed => "printed",
        };
        agent.insert("update_sign".into(), sign.into());
        if let Some(s) = a.seconds_per_shot {
            agent.insert("seconds_per_shot".into(), s.into());
        }
        root.insert("agent".into(), agent.into());

        let mut run = Table::new();
        run.insert("iterations".into(), (self.run.iterations as i64).into());
        run.insert("seed".into(), seed_value(self.run.seed));
        run.insert("output_dir".into(), self.run.output_dir.to_string_lossy().into_owned().into());
        root.insert("run".into(), run.into());

        let o = &self.oracle;
        let mut oracle = Table::new();
        oracle.insert("kappa".into(), floats(o.kappa.iter().copied()));
        oracle.insert("reference_kappa".into(), o.reference_kappa.into());
        oracle.insert("cavity_kappa".into(), floats(o.cavity_kappa.iter().copied()));
        oracle.insert("chi".into(), o.chi.into());
        oracle.insert("n_max".into(), (o.n_max as i64).into());
        oracle.insert("t_max".into(), o.t_max.into());
        if let Some(s) = o.steps {
            oracle.insert("steps".into(), (s as i64).into());
        }
        root.insert("oracle".into(), oracle.into());
        toml::to_string(&root).expect("tables of scalars serialize")
    }
}

fn floats(xs: impl IntoIterator<Item = f64>) -> Value {
    Value::Array(xs.into_iter().map(Value::from).collect())
}

fn seed_value(seed: u64) -> Value {
    match i64::try_from(seed) {
        Ok(s) => s.into(),
        Err(_) => seed.to_string().into(),
    }
}

/// Read and validate a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Parse and validate config text, applying defaults for missing keys.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let root: Table = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map(|s| line_column(text, s.start)).unwrap_or((0, 0));
        Error::Parse { line, column, message: e.message().trim().to_string() }
    })?;
    check_schema(&root)?;
    let section = |name: &'static str| Reader { section: name, table: root.get(name).and_then(Value::as_table) };
    let world = section("world");
    let detector = section("detector");
    let agent = section("agent");
    let run = section("run");
    let oracle = section("oracle");

    let gamma_t = world.f64("gamma_t", 1.0)?;
    world.require(gamma_t > 0.0 && gamma_t.is_finite(), "gamma_t", "must be finite and positive")?;
    let delta_t = world.f64("delta_t", 2.0)?;
    world.require(delta_t.is_finite(), "delta_t", "must be finite")?;
    let f_true = ModeParams { gamma: gamma_t, delta: delta_t };

    let mus = world.f64_list("mu_sigma", &[f64::INFINITY, 2.0, 1.0])?;
    world.require(!mus.is_empty(), "mu_sigma", "needs at least one temperature")?;
    let temperatures = mus
        .iter()
        .map(|&m| BathParams::new(m).map_err(|e| world.invalid("mu_sigma", e)))
        .collect::<Result<Vec<_>>>()?;

    let chi = detector.f64("chi", 1.0)?;
    detector.require(chi > 0.0 && chi <= 1.0, "chi", "must lie in (0, 1]")?;
    let eta = detector.f64("eta", 1.0)?;
    detector.require(eta > 0.0 && eta <= 1.0, "eta", "must lie in (0, 1]")?;
    let kappa = detector.f64("kappa", 1000.0)?;
    detector.require(kappa > 0.0 && kappa.is_finite(), "kappa", "must be finite and positive")?;
    let det = DetectorParams { eta, kappa, chi, bath: temperatures[0] };

    let kinds = agent.str_list("kinds", &["quantum", "classical"])?;
    agent.require(!kinds.is_empty(), "kinds", "needs at least one agent kind")?;
    let kinds = kinds
        .iter()
        .map(|k| k.parse::<DetectionModel>().map_err(|e| agent.invalid("kinds", e)))
        .collect::<Result<Vec<_>>>()?;
    for (i, k) in kinds.iter().enumerate() {
        agent.require(!kinds[..i].contains(k), "kinds", "lists an agent kind twice")?;
    }
    let gb = agent.pair("gamma_bounds", (0.1, 5.0))?;
    agent.require(gb.0 > 0.0 && gb.0 < gb.1 && gb.1.is_finite(), "gamma_bounds", "needs 0 < lo < hi")?;
    let db = agent.pair("delta_bounds", (-5.0, 5.0))?;
    agent.require(db.0 < db.1 && db.0.is_finite() && db.1.is_finite(), "delta_bounds", "needs lo < hi")?;
    let bounds = Bounds { gamma: gb, delta: db };
    let gamma0 = agent.f64("gamma0", 3.0)?;
    agent.require(gb.0 <= gamma0 && gamma0 <= gb.1, "gamma0", "must lie within gamma_bounds")?;
    let delta0 = agent.f64("delta0", -1.0)?;
    agent.require(db.0 <= delta0 && delta0 <= db.1, "delta0", "must lie within delta_bounds")?;
    world.require(gb.0 <= gamma_t && gamma_t <= gb.1, "gamma_t", "must lie within agent.gamma_bounds")?;
    world.require(db.0 <= delta_t && delta_t <= db.1, "delta_t", "must lie within agent.delta_bounds")?;

    let learning_rate = agent.f64("learning_rate", AgentConfig::DEFAULT_LEARNING_RATE)?;
    agent.require(learning_rate >= 0.0 && learning_rate.is_finite(), "learning_rate", "must be finite and nonnegative")?;
    let shots = agent.usize("shots", AgentConfig::DEFAULT_SHOTS)?;
    agent.require(shots >= 1, "shots", "must be at least 1")?;
    let fd_step = agent.f64("fd_step", AgentConfig::DEFAULT_FD_STEP)?;
    agent.require(fd_step > 0.0 && fd_step < 0.5, "fd_step", "must lie in (0, 0.5)")?;
    let backend = agent
        .string("backend", "analytic")?
        .parse::<GradientBackend>()
        .map_err(|e| agent.invalid("backend", e))?;
    let update_sign = match agent.string("update_sign", "descent")?.as_str() {
        "descent" => UpdateSign::Descent,
        "printed" => UpdateSign::Printed,
        other => return Err(agent.invalid("update_sign", format!("unknown value `{other}` (expected descent or printed)"))),
    };
    let seconds_per_shot = agent.optional_f64("seconds_per_shot")?;
    if let Some(s) = seconds_per_shot {
        agent.require(s > 0.0 && s.is_finite(), "seconds_per_shot", "must be finite and positive")?;
        agent.require(
            learning_rate < 1.0 / (shots as f64 * s),
            "learning_rate",
            "must stay below 1/(shots * seconds_per_shot)",
        )?;
    }

    let iterations = run.usize("iterations", AgentConfig::DEFAULT_ITERATIONS)?;
    let seed = run.u64("seed", 42)?;
    let output_dir = PathBuf::from(run.string("output_dir", "out")?);
    run.require(!output_dir.as_os_str().is_empty(), "output_dir", "must not be empty")?;

    let agents = kinds
        .into_iter()
        .map(|kind| AgentConfig {
            kind,
            f0: ModeParams { gamma: gamma0, delta: delta0 },
            bounds,
            learning_rate,
            shots,
            fd_step,
            max_iterations: iterations,
            gradient_backend: backend,
            update_sign,
            seconds_per_shot,
        })
        .collect();

    let kappas = oracle.f64_list("kappa", &[100.0, 1000.0, 10_000.0])?;
    oracle.require(!kappas.is_empty() && kappas.iter().all(|&k| k > 0.0 && k.is_finite()), "kappa", "needs positive finite values")?;
    let reference_kappa = oracle.f64("reference_kappa", 1000.0)?;
    oracle.require(reference_kappa > 0.0 && reference_kappa.is_finite(), "reference_kappa", "must be finite and positive")?;
    let cavity_kappa = oracle.f64_list("cavity_kappa", &[100.0, 1000.0])?;
    oracle.require(cavity_kappa.iter().all(|&k| k > 0.0 && k.is_finite()), "cavity_kappa", "needs positive finite values")?;
    let oracle_chi = oracle.f64("chi", 0.01)?;
    oracle.require(oracle_chi > 0.0 && oracle_chi <= 1.0, "chi", "must lie in (0, 1]")?;
    let n_max = oracle.usize("n_max", 6)?;
    oracle.require(n_max >= 1, "n_max", "must be at least 1")?;
    let t_max = oracle.f64("t_max", 40.0)?;
    oracle.require(t_max > 0.0 && t_max.is_finite(), "t_max", "must be finite and positive")?;
    let steps = oracle.optional_usize("steps")?;
    oracle.require(steps != Some(0), "steps", "must be at least 1")?;

    Ok(ExperimentConfig {
        f_true,
        detector: det,
        agents,
        temperatures,
        run: RunConfig { iterations, seed, output_dir },
        oracle: OracleConfig { kappa: kappas, reference_kappa, cavity_kappa, chi: oracle_chi, n_max, t_max, steps },
    })
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn check_schema(root: &Table) -> Result<()> {
    for (name, value) in root {
        let Some((_, keys)) = SCHEMA.iter().find(|(s, _)| s == name) else {
            let known: Vec<&str> = SCHEMA.iter().map(|(s, _)| *s).collect();
            return Err(Error::validation(name.as_str(), format!("unknown section (known: {})", known.join(", "))));
        };
        let Some(table) = value.as_table() else {
            return Err(Error::validation(name.as_str(), "must be a [section]"));
        };
        for key in table.keys() {
            if !keys.contains(&key.as_str()) {
                return Err(Error::validation(
                    format!("{name}.{key}"),
                    format!("unknown key (known in [{name}]: {})", keys.join(", ")),
                ));
            }
        }
    }
    Ok(())
}

struct Reader<'a> {
    section: &'static str,
    table: Option<&'a Table>,
}

impl Reader<'_> {
    fn invalid(&self, key: &str, msg: impl std::fmt::Display) -> Error {
        Error::validation(format!("{}.{key}", self.section), msg.to_string())
    }

    fn require(&self, ok: bool, key: &str, msg: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(self.invalid(key, msg))
        }
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn number(&self, key: &str, v: &Value) -> Result<f64> {
        match v {
            Value::Float(x) => Ok(*x),
            Value::Integer(i) => Ok(*i as f64),
            _ => Err(self.invalid(key, format!("expected a number, got {}", v.type_str()))),
        }
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64> {
        self.get(key).map_or(Ok(default), |v| self.number(key, v))
    }

    fn optional_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(|v| self.number(key, v)).transpose()
    }

    fn integer(&self, key: &str, v: &Value) -> Result<u64> {
        match v {
            Value::Integer(i) if *i >= 0 => Ok(*i as u64),
            Value::String(s) => s.parse().map_err(|_| self.invalid(key, format!("`{s}` is not a nonnegative integer"))),
            _ => Err(self.invalid(key, "expected a nonnegative integer")),
        }
    }

    fn u64(&self, key: &str, default: u64) -> Result<u64> {
        self.get(key).map_or(Ok(default), |v| self.integer(key, v))
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.u64(key, default as u64)? as usize)
    }

    fn optional_usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key).map(|v| self.integer(key, v).map(|x| x as usize)).transpose()
    }

    fn string(&self, key: &str, default: &str) -> Result<String> {
        match self.get(key) {
            None => Ok(default.to_string()),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(v) => Err(self.invalid(key, format!("expected a string, got {}", v.type_str()))),
        }
    }

    fn array(&self, key: &str) -> Result<Option<&Vec<Value>>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) => Ok(Some(a)),
            Some(v) => Err(self.invalid(key, format!("expected an array, got {}", v.type_str()))),
        }
    }

    fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.array(key)? {
            None => Ok(default.to_vec()),
            Some(a) => a.iter().map(|v| self.number(key, v)).collect(),
        }
    }

    fn str_list(&self, key: &str, default: &[&str]) -> Result<Vec<String>> {
        match self.array(key)? {
            None => Ok(default.iter().map(|s| s.to_string()).collect()),
            Some(a) => a
                .iter()
                .map(|v| v.as_str().map(str::to_string).ok_or_else(|| self.invalid(key, "expected an array of strings")))
                .collect(),
        }
    }

    fn pair(&self, key: &str, default: (f64, f64)) -> Result<(f64, f64)> {
        match self.array(key)? {
            None => Ok(default),
            Some(a) if a.len() == 2 => Ok((self.number(key, &a[0])?, self.number(key, &a[1])?)),
            Some(_) => Err(self.invalid(key, "expected [lo, hi]")),
        }
    }
}
