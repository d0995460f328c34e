//! Scenario configuration: a TOML key/value file merged with flag overrides.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    FirstVariation,
    SecondVariation,
    FSpace,
    #[serde(rename = "kahler-fixed-J", alias = "kahler-fixed-j")]
    #[value(name = "kahler-fixed-J", alias = "kahler-fixed-j")]
    KahlerFixedJ,
    KahlerMain,
    RicciVariation,
    MetricSpace,
    Adjoints,
    JOde,
    ComplexDecomposition,
}

impl ScenarioName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FirstVariation => "first-variation",
            Self::SecondVariation => "second-variation",
            Self::FSpace => "f-space",
            Self::KahlerFixedJ => "kahler-fixed-J",
            Self::KahlerMain => "kahler-main",
            Self::RicciVariation => "ricci-variation",
            Self::MetricSpace => "metric-space",
            Self::Adjoints => "adjoints",
            Self::JOde => "j-ode",
            Self::ComplexDecomposition => "complex-decomposition",
        }
    }

    /// Default `(m, N)`.
    pub fn default_grid(self) -> (usize, usize) {
        match self {
            Self::MetricSpace | Self::Adjoints | Self::JOde => (2, 16),
            _ => (2, 32),
        }
    }

    /// Default size of the metric perturbation (or of the potential's Hessian
    /// for the Kahler suites).
    pub fn default_amplitude(self) -> f64 {
        match self {
            Self::RicciVariation => 0.05,
            _ => 0.1,
        }
    }
}

/// Contents of a config file; every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: Option<ScenarioName>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub amplitude: Option<f64>,
    pub max_freq: Option<usize>,
    pub fd_steps: Option<Vec<f64>>,
    pub ode_steps: Option<usize>,
    pub tol_scale: Option<f64>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).context("invalid config")
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text)
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scenario: Option<ScenarioName>,
    pub seed: Option<u64>,
    pub grid: Option<(Option<usize>, usize)>,
    pub tol_scale: Option<f64>,
}

/// Fully resolved configuration, echoed in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: ScenarioName,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub samples: usize,
    pub amplitude: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_freq: Option<usize>,
    pub fd_steps: Vec<f64>,
    pub ode_steps: usize,
    pub tol_scale: f64,
    pub tolerances: BTreeMap<String, f64>,
}

impl ScenarioConfig {
    pub fn defaults(scenario: ScenarioName) -> Self {
        let (m, n) = scenario.default_grid();
        Self {
            scenario,
            m,
            n,
            seed: 0,
            samples: 3,
            amplitude: scenario.default_amplitude(),
            max_freq: None,
            fd_steps: wlab::variations::DEFAULT_STEPS.to_vec(),
            ode_steps: 200,
            tol_scale: 1.0,
            tolerances: BTreeMap::new(),
        }
    }

    pub fn resolve(file: ConfigFile, flags: Overrides) -> anyhow::Result<Self> {
        let Some(scenario) = flags.scenario.or(file.scenario) else {
            bail!("no scenario given (use --scenario or the `scenario` key)");
        };
        let mut cfg = Self::defaults(scenario);
        cfg.m = file.m.unwrap_or(cfg.m);
        cfg.n = file.n.unwrap_or(cfg.n);
        cfg.seed = file.seed.unwrap_or(cfg.seed);
        cfg.samples = file.samples.unwrap_or(cfg.samples);
        cfg.amplitude = file.amplitude.unwrap_or(cfg.amplitude);
        cfg.max_freq = file.max_freq;
        cfg.fd_steps = file.fd_steps.unwrap_or(cfg.fd_steps);
        cfg.ode_steps = file.ode_steps.unwrap_or(cfg.ode_steps);
        cfg.tol_scale = file.tol_scale.unwrap_or(cfg.tol_scale);
        cfg.tolerances = file.tolerances;
        if let Some(seed) = flags.seed {
            cfg.seed = seed;
        }
        if let Some((m, n)) = flags.grid {
            cfg.m = m.unwrap_or(cfg.m);
            cfg.n = n;
        }
        if let Some(t) = flags.tol_scale {
            cfg.tol_scale = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        wlab::grid::PeriodicGrid::new(self.m, self.n)?;
        if self.samples == 0 {
            bail!("samples must be positive");
        }
        if !(self.amplitude > 0.0 && self.amplitude < 1.0 / self.m as f64) {
            bail!("amplitude must lie in (0, 1/m) to keep metrics positive");
        }
        if let Some(k) = self.max_freq {
            if k == 0 || 2 * k >= self.n {
                bail!("max_freq must lie in 1..N/2");
            }
        }
        if self.fd_steps.len() < 2
            || self.fd_steps.iter().any(|h| !(*h > 0.0))
            || self.fd_steps.windows(2).any(|w| w[1] >= w[0])
        {
            bail!("fd_steps needs at least two positive, strictly decreasing steps");
        }
        if self.ode_steps == 0 {
            bail!("ode_steps must be positive");
        }
        if !(self.tol_scale > 0.0) {
            bail!("tol_scale must be positive");
        }
        if let Some((k, t)) = self.tolerances.iter().find(|(_, t)| !(**t >= 0.0)) {
            bail!("tolerance `{k}` must be non-negative, got {t}");
        }
        Ok(())
    }

    pub fn grid(&self) -> wlab::grid::PeriodicGrid {
        wlab::grid::PeriodicGrid::new(self.m, self.n).expect("validated")
    }
}

/// Parses `N` or `MxN`.
pub fn parse_grid(s: &str) -> Result<(Option<usize>, usize), String> {
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("bad grid `{s}`: {e}"));
    match s.split_once(['x', 'X']) {
        Some((m, n)) => Ok((Some(parse(m)?), parse(n)?)),
        None => Ok((None, parse(s)?)),
    }
}
