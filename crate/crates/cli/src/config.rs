//! Run configuration: command-line flags layered over an optional TOML file
//! layered over the documented defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tfclock_core::metrology::{linspace, MIN_GRID_POINTS};
use tfclock_core::scan::DEFAULT_GRID_POINTS;
use tfclock_core::{InitialState, IntegratorConfig, ProtocolMode, ProtocolParams, PulseConvention, Scheme};

/// A mistake in how the tool was invoked rather than a numerical failure.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Parses a lower-case enum name the same way the config file does.
fn parse_name<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

/// Settings shared by every scan subcommand. All fields are optional so that
/// flags, file and defaults can be layered.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// TOML file with the same keys as the flags (snake_case); flags win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Total atom numbers (even), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n_atoms: Option<Vec<u32>>,
    /// Spin-mixing rate (negative).
    #[arg(long, allow_hyphen_values = true)]
    pub c2: Option<f64>,
    /// Quadratic Zeeman energy at the start of the forward sweep.
    #[arg(long, allow_hyphen_values = true)]
    pub q0: Option<f64>,
    /// Quadratic Zeeman energy at the end of the forward sweep.
    #[arg(long, allow_hyphen_values = true)]
    pub qf: Option<f64>,
    /// Sweep rates |dq/dt|, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub beta: Option<Vec<f64>>,
    /// Interrogation time.
    #[arg(long)]
    pub big_t: Option<f64>,
    /// Lower end of the detuning grid.
    #[arg(long, allow_hyphen_values = true)]
    pub delta_min: Option<f64>,
    /// Upper end of the detuning grid.
    #[arg(long, allow_hyphen_values = true)]
    pub delta_max: Option<f64>,
    /// Number of detuning points (odd, >= 5).
    #[arg(long)]
    pub delta_points: Option<usize>,
    /// Detection-noise widths in atoms, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sigma: Option<Vec<f64>>,
    /// `dynamic` or `analytic_adiabatic`.
    #[arg(long, value_parser = parse_name::<ProtocolMode>)]
    pub mode: Option<ProtocolMode>,
    /// Pulse phase convention: `appendix` or `main_text`.
    #[arg(long, value_parser = parse_name::<PulseConvention>)]
    pub convention: Option<PulseConvention>,
    /// Input state of the forward sweep: `ground_state` or `polar_fock`.
    #[arg(long, value_parser = parse_name::<InitialState>)]
    pub initial_state: Option<InitialState>,
    /// Integrator: `magnus4` or `rk4`.
    #[arg(long, value_parser = parse_name::<Scheme>)]
    pub scheme: Option<Scheme>,
    /// Integrator step tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Settings {
    pub fn load_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Field-wise `self` where set, otherwise `fallback`.
    pub fn or(self, fallback: Settings) -> Settings {
        Settings {
            config: self.config.or(fallback.config),
            n_atoms: self.n_atoms.or(fallback.n_atoms),
            c2: self.c2.or(fallback.c2),
            q0: self.q0.or(fallback.q0),
            qf: self.qf.or(fallback.qf),
            beta: self.beta.or(fallback.beta),
            big_t: self.big_t.or(fallback.big_t),
            delta_min: self.delta_min.or(fallback.delta_min),
            delta_max: self.delta_max.or(fallback.delta_max),
            delta_points: self.delta_points.or(fallback.delta_points),
            sigma: self.sigma.or(fallback.sigma),
            mode: self.mode.or(fallback.mode),
            convention: self.convention.or(fallback.convention),
            initial_state: self.initial_state.or(fallback.initial_state),
            scheme: self.scheme.or(fallback.scheme),
            tol: self.tol.or(fallback.tol),
            workers: self.workers.or(fallback.workers),
            out: self.out.or(fallback.out),
        }
    }
}

/// Per-subcommand defaults for the scan axes.
#[derive(Debug, Clone)]
pub struct AxisDefaults {
    pub n_atoms: Vec<u32>,
    pub beta: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl Default for AxisDefaults {
    fn default() -> Self {
        Self { n_atoms: vec![10], beta: vec![0.01], sigma: vec![0.0] }
    }
}

/// Symmetric detuning grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.min, self.max, self.points)
    }
}

/// A fully resolved run: every value is explicit and is written to the
/// metadata of each output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub n_atoms: Vec<u32>,
    pub beta: Vec<f64>,
    pub sigma: Vec<f64>,
    pub c2: f64,
    pub q0: f64,
    pub qf: f64,
    pub big_t: f64,
    pub grid: GridSpec,
    pub mode: ProtocolMode,
    pub convention: PulseConvention,
    pub initial_state: InitialState,
    pub integrator: IntegratorConfig,
    pub workers: Option<usize>,
    pub out: PathBuf,
}

impl RunConfig {
    /// Layers flags over the config file over the defaults and validates the
    /// result. Errors here are usage errors.
    pub fn resolve(flags: Settings, axes: AxisDefaults) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => Settings::load_file(path)?,
            None => Settings::default(),
        };
        let s = flags.or(file);
        let defaults = ProtocolParams::default();
        let big_t = s.big_t.unwrap_or(defaults.big_t);
        ensure!(big_t > 0.0 && big_t.is_finite(), "big-t must be positive, got {big_t}");
        let half = std::f64::consts::FRAC_PI_2 / big_t;
        let grid = GridSpec {
            min: s.delta_min.unwrap_or(-half),
            max: s.delta_max.unwrap_or(half),
            points: s.delta_points.unwrap_or(DEFAULT_GRID_POINTS),
        };
        let integrator = IntegratorConfig {
            scheme: s.scheme.unwrap_or(defaults.integrator.scheme),
            step_tolerance: s.tol.unwrap_or(defaults.integrator.step_tolerance),
            ..defaults.integrator
        };
        let cfg = Self {
            n_atoms: s.n_atoms.unwrap_or(axes.n_atoms),
            beta: s.beta.unwrap_or(axes.beta),
            sigma: s.sigma.unwrap_or(axes.sigma),
            c2: s.c2.unwrap_or(defaults.c2),
            q0: s.q0.unwrap_or(defaults.q0),
            qf: s.qf.unwrap_or(defaults.qf),
            big_t,
            grid,
            mode: s.mode.unwrap_or(defaults.mode),
            convention: s.convention.unwrap_or(defaults.pulse_convention),
            initial_state: s.initial_state.unwrap_or(defaults.initial_state),
            integrator,
            workers: s.workers,
            out: s.out.unwrap_or_else(|| PathBuf::from(".")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let g = &self.grid;
        ensure!(g.points > 0, "empty detuning grid");
        ensure!(
            g.points >= MIN_GRID_POINTS && g.points % 2 == 1,
            "delta-points must be odd and at least {MIN_GRID_POINTS}, got {}",
            g.points
        );
        ensure!(
            g.min.is_finite() && g.max.is_finite() && g.min < g.max,
            "invalid detuning range [{}, {}]",
            g.min,
            g.max
        );
        ensure!(g.min == -g.max, "detuning grid must be symmetric about zero, got [{}, {}]", g.min, g.max);
        ensure!(!self.n_atoms.is_empty(), "n-atoms list is empty");
        ensure!(!self.beta.is_empty(), "beta list is empty");
        ensure!(!self.sigma.is_empty(), "sigma list is empty");
        if let Some(bad) = self.sigma.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            bail!("sigma must be finite and non-negative, got {bad}");
        }
        ensure!(self.workers != Some(0), "workers must be at least 1");
        for &n in &self.n_atoms {
            for &beta in &self.beta {
                self.params(n, beta).validate().with_context(|| format!("N = {n}, beta = {beta}"))?;
            }
        }
        Ok(())
    }

    pub fn params(&self, n_total: u32, beta: f64) -> ProtocolParams {
        ProtocolParams {
            n_total,
            c2: self.c2,
            q0: self.q0,
            qf: self.qf,
            beta,
            big_t: self.big_t,
            delta: 0.0,
            pulse_convention: self.convention,
            mode: self.mode,
            initial_state: self.initial_state,
            integrator: self.integrator,
        }
    }

    /// The single value of a list that this subcommand does not sweep.
    pub fn single<T: Copy>(values: &[T], name: &str) -> Result<T> {
        match values {
            [v] => Ok(*v),
            _ => Err(UsageError(format!("this subcommand takes a single {name}, got {}", values.len())).into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let cfg = RunConfig::resolve(Settings::default(), AxisDefaults::default()).unwrap();
        assert_eq!(cfg.n_atoms, vec![10]);
        assert_eq!(cfg.grid.points, 201);
        assert_eq!(cfg.grid.min, -cfg.grid.max);
        assert_eq!(cfg.params(10, 0.01), ProtocolParams::default());
    }

    #[test]
    fn flags_override_file() {
        let file: Settings = toml::from_str("n_atoms = [4, 6]\nbig_t = 50.0\nmode = \"analytic_adiabatic\"").unwrap();
        let flags = Settings { big_t: Some(20.0), ..Default::default() };
        let s = flags.or(file);
        assert_eq!(s.n_atoms, Some(vec![4, 6]));
        assert_eq!(s.big_t, Some(20.0));
        assert_eq!(s.mode, Some(ProtocolMode::AnalyticAdiabatic));
    }

    #[test]
    fn unknown_file_keys_rejected() {
        assert!(toml::from_str::<Settings>("n_atom = [4]").is_err());
    }

    #[test]
    fn invalid_runs_rejected() {
        let bad = [
            Settings { delta_points: Some(0), ..Default::default() },
            Settings { delta_points: Some(10), ..Default::default() },
            Settings { delta_min: Some(-0.01), delta_max: Some(0.02), ..Default::default() },
            Settings { n_atoms: Some(vec![7]), ..Default::default() },
            Settings { sigma: Some(vec![-1.0]), ..Default::default() },
            Settings { workers: Some(0), ..Default::default() },
        ];
        for s in bad {
            assert!(RunConfig::resolve(s.clone(), AxisDefaults::default()).is_err(), "{s:?}");
        }
    }

    #[test]
    fn enum_names() {
        assert_eq!(parse_name::<ProtocolMode>("analytic-adiabatic"), Ok(ProtocolMode::AnalyticAdiabatic));
        assert_eq!(parse_name::<Scheme>("rk4"), Ok(Scheme::Rk4));
        assert!(parse_name::<PulseConvention>("sideways").is_err());
    }
}
