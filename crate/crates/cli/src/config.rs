//! Flat key-value experiment configuration with one section per concern.
//!
//! Files look like:
//!
//! ```text
//! [experiment]
//! model = latent
//! d = 500
//! alpha = 1.0
//! gamma = 0.5
//! eps_tilde = 0.5,1.0,2.0
//!
//! [sweep]
//! axis = alpha
//! grid = 0.5,1.0,2.0
//! ```
//!
//! Defaults reproduce the standard desk-scale protocol: lambda = 1e-3,
//! d = 500, 10 repetitions, solver tolerance 1e-5.

use advlim::state_evolution::{Link, Loss, SolverSettings};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Parsed sections: section -> key -> raw value.
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = "experiment".to_string();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let Some(name) = name.strip_suffix(']') else {
                    return err(format!("line {}: unterminated section header", lineno + 1));
                };
                current = name.trim().to_lowercase();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!("line {}: expected key = value", lineno + 1));
            };
            sections
                .entry(current.clone())
                .or_default()
                .insert(key.trim().to_lowercase(), value.trim().to_string());
        }
        Ok(RawConfig { sections })
    }

    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(|s| s.as_str())
    }

    fn f64(&self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => parse_f64(v)
                .ok_or_else(|| ConfigError(format!("{section}.{key}: bad number '{v}'"))),
        }
    }

    fn f64_opt(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => parse_f64(v)
                .map(Some)
                .ok_or_else(|| ConfigError(format!("{section}.{key}: bad number '{v}'"))),
        }
    }

    fn usize(&self, section: &str, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError(format!("{section}.{key}: bad integer '{v}'"))),
        }
    }

    fn u64(&self, section: &str, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError(format!("{section}.{key}: bad integer '{v}'"))),
        }
    }

    fn grid(&self, section: &str, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.get(section, key) {
            None => Ok(default.to_vec()),
            Some(v) => parse_grid(v).ok_or_else(|| {
                ConfigError(format!(
                    "{section}.{key}: expected comma list or lo:hi:count, got '{v}'"
                ))
            }),
        }
    }
}

/// Numbers accept `inf` for unbounded exponents.
pub fn parse_f64(v: &str) -> Option<f64> {
    match v.to_lowercase().as_str() {
        "inf" | "infinity" => Some(f64::INFINITY),
        other => other.parse().ok(),
    }
}

/// `a,b,c` or an inclusive linspace `lo:hi:count`.
pub fn parse_grid(v: &str) -> Option<Vec<f64>> {
    if v.contains(':') {
        let parts: Vec<&str> = v.split(':').collect();
        if parts.len() != 3 {
            return None;
        }
        let lo: f64 = parts[0].trim().parse().ok()?;
        let hi: f64 = parts[1].trim().parse().ok()?;
        let count: usize = parts[2].trim().parse().ok()?;
        if count == 0 {
            return None;
        }
        if count == 1 {
            return Some(vec![lo]);
        }
        let step = (hi - lo) / (count - 1) as f64;
        return Some((0..count).map(|i| lo + step * i as f64).collect());
    }
    let vals: Option<Vec<f64>> = v.split(',').map(|s| parse_f64(s.trim())).collect();
    vals.filter(|g| !g.is_empty())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    WellSpecified,
    Latent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    None,
    Alpha,
    Psi,
    Gamma,
    Lambda,
    Radius,
}

#[derive(Debug, Clone, Copy)]
pub enum MetricModeCfg {
    Plugin,
    MonteCarlo(usize),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub seed: u64,
    pub d: usize,
    pub repetitions: usize,
    pub alpha: f64,
    pub psi: f64,
    pub lambda: f64,
    pub r: f64,
    pub loss: Loss,
    pub link: Link,
    pub q_att: f64,
    pub eps_tilde: Vec<f64>,
    pub metric_mode: MetricModeCfg,
    pub solver: SolverSettings,
    pub sweep_axis: SweepAxis,
    pub sweep_grid: Vec<f64>,
    /// when the config pinned gamma rather than psi, alpha sweeps hold gamma
    pub gamma_pinned: bool,
    // existence protocol
    pub exist_m: f64,
    pub exist_q_att: Vec<f64>,
    pub exist_d: Vec<usize>,
    pub exist_eps: Vec<f64>,
    pub exist_p_over_d: f64,
    pub exist_samples: usize,
    // tuning
    pub tunables: advlim::state_evolution::Tunables,
    pub objective: advlim::metrics::TuneObjective,
}

impl ExperimentConfig {
    pub fn gamma(&self) -> f64 {
        1.0 / (self.alpha * self.psi)
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let raw = RawConfig::parse(text)?;
        let model = match raw.get("experiment", "model").unwrap_or("latent") {
            "latent" => ModelKind::Latent,
            "wellspec" | "well-specified" | "wellspecified" => ModelKind::WellSpecified,
            other => return err(format!("unknown model '{other}'")),
        };
        let alpha = raw.f64("experiment", "alpha", 1.0)?;
        let (psi, gamma_pinned) = match (
            raw.f64_opt("experiment", "psi")?,
            raw.f64_opt("experiment", "gamma")?,
        ) {
            (Some(_), Some(_)) => return err("give either psi or gamma, not both"),
            (Some(psi), None) => (psi, false),
            (None, Some(gamma)) => (1.0 / (alpha * gamma), true),
            (None, None) => (2.0, false),
        };
        let loss = match raw.get("experiment", "loss").unwrap_or("logistic") {
            "logistic" => Loss::Logistic,
            "hinge" => Loss::Hinge,
            other => return err(format!("unknown loss '{other}'")),
        };
        let link = match raw.get("experiment", "link").unwrap_or("sign") {
            "sign" => Link::Sign,
            other => match other.strip_prefix("probit:").and_then(parse_f64) {
                Some(var) if var >= 0.0 => Link::Probit { noise_var: var },
                _ => return err(format!("unknown link '{other}' (use sign or probit:VAR)")),
            },
        };
        let metric_mode = match raw.get("experiment", "metric_mode").unwrap_or("plugin") {
            "plugin" => MetricModeCfg::Plugin,
            other => match other
                .strip_prefix("montecarlo:")
                .map(|n| n.parse::<usize>())
            {
                Some(Ok(n)) if n > 0 => MetricModeCfg::MonteCarlo(n),
                _ => return err(format!("unknown metric_mode '{other}'")),
            },
        };
        let solver = SolverSettings {
            damping: raw.f64("solver", "damping", 0.7)?,
            tol: raw.f64("solver", "tol", 1e-5)?,
            max_iter: raw.usize("solver", "max_iter", 2000)?,
            ..SolverSettings::default()
        };
        let sweep_axis = match raw.get("sweep", "axis").unwrap_or("none") {
            "none" => SweepAxis::None,
            "alpha" => SweepAxis::Alpha,
            "psi" => SweepAxis::Psi,
            "gamma" => SweepAxis::Gamma,
            "lambda" => SweepAxis::Lambda,
            "r" => SweepAxis::Radius,
            other => return err(format!("unknown sweep axis '{other}'")),
        };
        let sweep_grid = raw.grid("sweep", "grid", &[1.0])?;
        if sweep_grid.is_empty() {
            return err("sweep grid must be nonempty");
        }
        if sweep_grid.windows(2).any(|w| w[1] <= w[0]) {
            return err("sweep grid must be strictly increasing");
        }
        let eps_tilde = raw.grid("experiment", "eps_tilde", &[0.5, 1.0, 2.0])?;
        if eps_tilde.iter().any(|&e| e < 0.0) {
            return err("eps_tilde grid must be nonnegative");
        }
        if eps_tilde.windows(2).any(|w| w[1] <= w[0]) {
            return err("eps_tilde grid must be strictly increasing");
        }
        let repetitions = raw.usize("experiment", "repetitions", 10)?;
        if repetitions == 0 {
            return err("repetitions must be >= 1");
        }
        let objective_eps = raw.f64("tune", "objective_eps", 0.5)?;
        let q_att = raw.f64("experiment", "q_att", f64::INFINITY)?;
        let objective = match raw.get("tune", "objective").unwrap_or("rob_cns") {
            "clean" => advlim::metrics::TuneObjective::Clean,
            "rob" => advlim::metrics::TuneObjective::Robust {
                eps_tilde: objective_eps,
                q_att,
            },
            "rob_cns" => advlim::metrics::TuneObjective::RobustConsistent {
                eps_tilde: objective_eps,
                q_att,
            },
            "bnd_cns" => advlim::metrics::TuneObjective::BoundaryConsistent {
                eps_tilde: objective_eps,
                q_att,
            },
            other => return err(format!("unknown tune objective '{other}'")),
        };
        let tunables = match raw.get("tune", "tunables").unwrap_or("lambda") {
            "lambda" => advlim::state_evolution::Tunables::Lambda,
            "r" | "radius" => advlim::state_evolution::Tunables::Radius,
            "lambda,r" | "r,lambda" | "both" => advlim::state_evolution::Tunables::Both,
            other => return err(format!("unknown tunables '{other}'")),
        };
        let exist_d: Vec<usize> = raw
            .grid("existence", "d_list", &[10.0])?
            .iter()
            .map(|&v| v as usize)
            .collect();
        let cfg = ExperimentConfig {
            model,
            gamma_pinned,
            seed: raw.u64("experiment", "seed", 42)?,
            d: raw.usize("experiment", "d", 500)?,
            repetitions,
            alpha,
            psi,
            lambda: raw.f64("experiment", "lambda", 1e-3)?,
            r: raw.f64("experiment", "r", 0.0)?,
            loss,
            link,
            q_att,
            eps_tilde,
            metric_mode,
            solver,
            sweep_axis,
            sweep_grid,
            exist_m: raw.f64("existence", "m", 0.5)?,
            exist_q_att: raw.grid("existence", "q_att_list", &[1.5, 2.0, 3.0, f64::INFINITY])?,
            exist_d,
            exist_eps: raw.grid("existence", "eps", &{
                (1..=12).map(|i| 0.125 * i as f64).collect::<Vec<_>>()
            })?,
            exist_p_over_d: raw.f64("existence", "p_over_d", 2.0)?,
            exist_samples: raw.usize("existence", "samples", 1000)?,
            tunables,
            objective,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.alpha > 0.0) || !(self.psi > 0.0) {
            return err("alpha and psi must be positive");
        }
        if !(self.lambda >= 0.0) || !(self.r >= 0.0) {
            return err("lambda and r must be nonnegative");
        }
        if !(self.q_att > 1.0) {
            return err("q_att must lie in (1, inf]");
        }
        if self.d == 0 {
            return err("d must be >= 1");
        }
        if self.exist_samples == 0 {
            return err("existence samples must be >= 1");
        }
        Ok(())
    }

    /// Copy with one sweep-axis value applied.
    pub fn at_sweep_value(&self, value: f64) -> Self {
        let mut c = self.clone();
        match self.sweep_axis {
            SweepAxis::None => {}
            SweepAxis::Alpha => {
                let gamma = self.gamma();
                c.alpha = value;
                if self.gamma_pinned {
                    c.psi = 1.0 / (value * gamma);
                }
            }
            SweepAxis::Psi => c.psi = value,
            SweepAxis::Gamma => c.psi = 1.0 / (c.alpha * value),
            SweepAxis::Lambda => c.lambda = value,
            SweepAxis::Radius => c.r = value,
        }
        c
    }

    pub fn sweep_values(&self) -> Vec<f64> {
        match self.sweep_axis {
            SweepAxis::None => vec![f64::NAN],
            _ => self.sweep_grid.clone(),
        }
    }

    pub fn latent_config(&self) -> advlim::state_evolution::LatentModelConfig {
        let mut c = advlim::state_evolution::LatentModelConfig::new(
            self.alpha,
            self.psi,
            self.lambda,
            self.r,
            self.loss,
            self.link,
        );
        c.s_dual = 1.0;
        c
    }

    pub fn axis_name(&self) -> &'static str {
        match self.sweep_axis {
            SweepAxis::None => "none",
            SweepAxis::Alpha => "alpha",
            SweepAxis::Psi => "psi",
            SweepAxis::Gamma => "gamma",
            SweepAxis::Lambda => "lambda",
            SweepAxis::Radius => "r",
        }
    }
}
