//! Run configuration: TOML file, command-line overrides, defaults.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use prnls_core::{Grid, PhysicalParams};
use serde::{Deserialize, Serialize};

pub const OUTPUT_DIR_ENV: &str = "PRNLS_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "prnls-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    GroundState,
    Solve,
    Sweep,
    RateSweep,
    IdentityCheck,
    Certify,
    SymbolCheck,
    NormProbe,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::GroundState,
        Command::Solve,
        Command::Sweep,
        Command::RateSweep,
        Command::IdentityCheck,
        Command::Certify,
        Command::SymbolCheck,
        Command::NormProbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::GroundState => "ground-state",
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::RateSweep => "rate-sweep",
            Command::IdentityCheck => "identity-check",
            Command::Certify => "certify",
            Command::SymbolCheck => "symbol-check",
            Command::NormProbe => "norm-probe",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL.into_iter().find(|c| c.name() == s).with_context(|| format!("unknown command {s:?}"))
    }
}

/// Raw file layout; every section and key is optional except `params.n` and `params.p`.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<Command>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub params: Option<ParamsSection>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub tolerances: TolerancesSection,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub probe: ProbeSection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub m: Option<f64>,
    pub mu: Option<f64>,
    pub c: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub points: Option<usize>,
    pub half_width: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesSection {
    pub ground_state: Option<f64>,
    pub linear: Option<f64>,
    pub step: Option<f64>,
    pub residual: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub c_min: Option<f64>,
    pub c_max: Option<f64>,
    pub rungs: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub runs: Option<usize>,
    pub max_iter: Option<usize>,
    pub trials: Option<usize>,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub ground_state: f64,
    pub linear: f64,
    pub step: f64,
    pub residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { ground_state: 1e-12, linear: 1e-10, step: 1e-10, residual: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sweep {
    pub c_min: f64,
    pub c_max: f64,
    pub rungs: usize,
}

impl Sweep {
    /// Geometric ladder from `c_min` to `c_max` inclusive.
    pub fn ladder(&self) -> Vec<f64> {
        if self.rungs == 1 {
            return vec![self.c_min];
        }
        let ratio = (self.c_max / self.c_min).ln() / (self.rungs - 1) as f64;
        (0..self.rungs)
            .map(|k| if k + 1 == self.rungs { self.c_max } else { self.c_min * (ratio * k as f64).exp() })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    /// Seeded runs for `certify`.
    pub runs: usize,
    pub max_iter: usize,
    /// Random fields per `(c, q)` for `norm-probe`.
    pub trials: usize,
    /// Log-uniform samples per `c` for `symbol-check`.
    pub samples: usize,
}

impl Default for Probe {
    fn default() -> Self {
        Self { runs: 50, max_iter: 300, trials: 10, samples: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub n: usize,
    pub p: f64,
    pub m: f64,
    pub mu: f64,
    pub c: Option<f64>,
    pub points: usize,
    pub half_width: f64,
    pub tolerances: Tolerances,
    pub sweep: Option<Sweep>,
    pub probe: Probe,
    pub output_dir: PathBuf,
    pub seed: u64,
}

/// Values given on the command line; they win over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub command: Option<Command>,
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub m: Option<f64>,
    pub mu: Option<f64>,
    pub c: Option<f64>,
    pub points: Option<usize>,
    pub half_width: Option<f64>,
    pub tol_gs: Option<f64>,
    pub tol_lin: Option<f64>,
    pub tol_step: Option<f64>,
    pub tol_residual: Option<f64>,
    pub c_min: Option<f64>,
    pub c_max: Option<f64>,
    pub rungs: Option<usize>,
    pub runs: Option<usize>,
    pub max_iter: Option<usize>,
    pub trials: Option<usize>,
    pub samples: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

pub fn parse_file(text: &str) -> Result<FileConfig> {
    toml::from_str(text).map_err(|e| anyhow::anyhow!("invalid config: {}", e.message()).context(render_span(text, &e)))
}

fn render_span(text: &str, e: &toml::de::Error) -> String {
    match e.span() {
        Some(span) => {
            let line = text[..span.start].matches('\n').count() + 1;
            format!("config line {line}")
        }
        None => "config".to_string(),
    }
}

/// Parses and validates a complete configuration from file text alone.
#[cfg_attr(not(test), allow(dead_code))]
pub fn parse_config(text: &str) -> Result<RunConfig> {
    resolve(parse_file(text)?, Overrides::default(), None)
}

fn positive(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        bail!("{name} must be > 0, got {value}")
    }
}

pub fn resolve(file: FileConfig, cli: Overrides, env_dir: Option<PathBuf>) -> Result<RunConfig> {
    let params = file.params.clone().unwrap_or_default();
    let command = match (cli.command, file.command) {
        (Some(a), Some(b)) if a != b => bail!("config file says command = {b:?} but {a} was requested"),
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => bail!("missing required key `command`"),
    };
    let n = cli.n.or(params.n).context("missing required key `params.n`")?;
    let p = cli.p.or(params.p).context("missing required key `params.p`")?;
    if !(1..=3).contains(&n) {
        bail!("params.n must be 1, 2 or 3, got {n}");
    }
    if !(p.is_finite() && p > 1.0) {
        bail!("params.p out of range: p > 1 required, got {p}");
    }
    let m = positive("params.m", cli.m.or(params.m).unwrap_or(0.5))?;
    let mu = positive("params.mu", cli.mu.or(params.mu).unwrap_or(1.0))?;
    let c = cli.c.or(params.c).map(|c| positive("params.c", c)).transpose()?;

    let default_grid = Grid::default_for(n)?;
    let points = cli.points.or(file.grid.points).unwrap_or(default_grid.points());
    let half_width = cli.half_width.or(file.grid.half_width).unwrap_or(default_grid.half_width());
    Grid::new(n, points, half_width).context("invalid [grid]")?;

    let d = Tolerances::default();
    let t = &file.tolerances;
    let tolerances = Tolerances {
        ground_state: positive("tolerances.ground_state", cli.tol_gs.or(t.ground_state).unwrap_or(d.ground_state))?,
        linear: positive("tolerances.linear", cli.tol_lin.or(t.linear).unwrap_or(d.linear))?,
        step: positive("tolerances.step", cli.tol_step.or(t.step).unwrap_or(d.step))?,
        residual: positive("tolerances.residual", cli.tol_residual.or(t.residual).unwrap_or(d.residual))?,
    };

    let file_sweep = file.sweep.clone().unwrap_or_default();
    let want_sweep = file.sweep.is_some() || cli.c_min.is_some() || cli.c_max.is_some() || cli.rungs.is_some();
    let sweep = if want_sweep {
        let c_min = positive("sweep.c_min", cli.c_min.or(file_sweep.c_min).context("missing required key `sweep.c_min`")?)?;
        let rungs = cli.rungs.or(file_sweep.rungs).unwrap_or(4);
        if rungs == 0 {
            bail!("sweep.rungs must be >= 1");
        }
        let c_max = match cli.c_max.or(file_sweep.c_max) {
            Some(v) => positive("sweep.c_max", v)?,
            None => c_min * 2f64.powi(rungs as i32 - 1),
        };
        if c_max < c_min || (rungs > 1 && c_max == c_min) {
            bail!("sweep.c_max ({c_max}) must exceed sweep.c_min ({c_min})");
        }
        Some(Sweep { c_min, c_max, rungs })
    } else {
        None
    };
    if command == Command::RateSweep {
        match sweep {
            Some(s) if s.rungs >= 4 => {}
            Some(s) => bail!("rate-sweep needs sweep.rungs >= 4, got {}", s.rungs),
            None => bail!("rate-sweep needs a [sweep] section"),
        }
    }
    if command == Command::Sweep && sweep.is_none() {
        bail!("sweep needs a [sweep] section or --c-min");
    }

    let dp = Probe::default();
    let probe = Probe {
        runs: cli.runs.or(file.probe.runs).unwrap_or(dp.runs),
        max_iter: cli.max_iter.or(file.probe.max_iter).unwrap_or(dp.max_iter),
        trials: cli.trials.or(file.probe.trials).unwrap_or(dp.trials),
        samples: cli.samples.or(file.probe.samples).unwrap_or(dp.samples),
    };
    if probe.trials == 0 || probe.samples == 0 || probe.max_iter == 0 {
        bail!("probe.trials, probe.samples and probe.max_iter must be >= 1");
    }

    let output_dir = cli
        .output_dir
        .or(file.output_dir)
        .or(env_dir)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    let seed = cli.seed.or(file.seed).unwrap_or(0);

    let config = RunConfig {
        command,
        n,
        p,
        m,
        mu,
        c,
        points,
        half_width,
        tolerances,
        sweep,
        probe,
        output_dir,
        seed,
    };
    if matches!(command, Command::Solve | Command::IdentityCheck | Command::Certify) && config.c.is_none() {
        if !(command == Command::IdentityCheck && config.sweep.is_some()) {
            bail!("{command} needs params.c");
        }
    }
    Ok(config)
}

impl RunConfig {
    pub fn grid(&self) -> Grid {
        Grid::new(self.n, self.points, self.half_width).expect("validated in resolve")
    }

    pub fn physical(&self, c: f64) -> Result<PhysicalParams> {
        Ok(PhysicalParams::new(self.n, self.p, self.m, self.mu, c)?)
    }

    pub fn require_c(&self) -> Result<f64> {
        self.c.with_context(|| format!("{} needs params.c", self.command))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "command = \"solve\"\n[params]\nn = 2\np = 3.0\nc = 16.0\n";

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.command, Command::Solve);
        assert_eq!((cfg.n, cfg.p, cfg.c), (2, 3.0, Some(16.0)));
        assert_eq!((cfg.m, cfg.mu), (0.5, 1.0));
        assert_eq!((cfg.points, cfg.half_width), (256, 20.0));
        assert_eq!(cfg.tolerances, Tolerances::default());
        assert_eq!(cfg.seed, 0);
        assert!(cfg.sweep.is_none());
    }

    #[test]
    fn range_error_for_small_p() {
        let err = parse_config("command = \"solve\"\n[params]\nn = 2\np = 0.5\nc = 16.0\n").unwrap_err();
        assert!(format!("{err:#}").contains("p > 1"), "{err:#}");
    }

    #[test]
    fn unknown_key_is_named() {
        for text in [format!("{MINIMAL}foo = 1\n"), format!("foo = 1\n{MINIMAL}")] {
            let err = parse_config(&text).unwrap_err();
            assert!(format!("{err:#}").contains("foo"), "{err:#}");
        }
    }

    #[test]
    fn missing_required_keys() {
        let err = parse_config("command = \"solve\"\n[params]\np = 3.0\nc = 1.0\n").unwrap_err();
        assert!(format!("{err:#}").contains("params.n"));
        let err = parse_config("command = \"solve\"\n[params]\nn = 2\np = 3.0\n").unwrap_err();
        assert!(format!("{err:#}").contains("params.c"));
    }

    #[test]
    fn rate_sweep_needs_four_rungs() {
        let base = "command = \"rate-sweep\"\n[params]\nn = 2\np = 3.0\n[sweep]\nc_min = 8.0\n";
        assert!(parse_config(&format!("{base}rungs = 3\n")).is_err());
        let cfg = parse_config(&format!("{base}rungs = 4\n")).unwrap();
        assert_eq!(cfg.sweep.unwrap().ladder(), vec![8.0, 16.0, 32.0, 64.0]);
    }

    #[test]
    fn cli_overrides_file_and_env() {
        let file = parse_file(MINIMAL).unwrap();
        let cli = Overrides { c: Some(32.0), seed: Some(9), ..Default::default() };
        let cfg = resolve(file.clone(), cli, Some(PathBuf::from("/tmp/env"))).unwrap();
        assert_eq!(cfg.c, Some(32.0));
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/env"));
        let clash = Overrides { command: Some(Command::Sweep), ..Default::default() };
        assert!(resolve(file, clash, None).is_err());
    }

    #[test]
    fn ladder_endpoints() {
        let s = Sweep { c_min: 4.0, c_max: 256.0, rungs: 7 };
        let l = s.ladder();
        assert_eq!(l.len(), 7);
        assert_eq!(l[0], 4.0);
        assert_eq!(l[6], 256.0);
        assert!((l[3] - 32.0).abs() < 1e-12);
    }

    #[test]
    fn echo_is_valid_toml() {
        let cfg = parse_config(MINIMAL).unwrap();
        let text = cfg.to_toml();
        assert!(text.contains("command = \"solve\""));
        assert!(text.parse::<toml::Table>().is_ok());
    }
}
