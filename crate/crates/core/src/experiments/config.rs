use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    TraceDecay,
    DeltaScaling,
    Convergence,
    TheoremRatio,
    IdentitySuite,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        Self::TraceDecay,
        Self::DeltaScaling,
        Self::Convergence,
        Self::TheoremRatio,
        Self::IdentitySuite,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::TraceDecay => "trace-decay",
            Self::DeltaScaling => "delta-scaling",
            Self::Convergence => "convergence",
            Self::TheoremRatio => "theorem-ratio",
            Self::IdentitySuite => "identity-suite",
        }
    }

    /// Whether results depend on random trials, making `seed` mandatory.
    pub fn uses_trials(&self) -> bool {
        matches!(self, Self::DeltaScaling | Self::TheoremRatio)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

/// Geometric radius grid `[lo, hi]` with `per_octave` points per doubling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusGridSpec {
    pub lo: f64,
    /// `None` means `√(2Λ)`.
    pub hi: Option<f64>,
    pub per_octave: usize,
}

/// A `(λ, ρ, m, R)` tuple of the subordination identity.
pub type SubordinationTuple = [f64; 4];

/// Default subordination sweep; includes non-integer orders and a negative `ρ`.
pub const DEFAULT_TUPLES: [SubordinationTuple; 5] = [
    [1.0, 0.0, 1.0, 2.0],
    [1.5, 0.4, 2.0, 3.0],
    [0.7, -0.3, 0.5, 1.0],
    [2.25, 1.1, 3.0, 3.5],
    [3.3, 0.75, 0.4, 5.0],
];

/// Every parameter of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub deltas: Vec<f64>,
    pub max_eigenvalue: usize,
    pub grid_m: usize,
    pub radii: RadiusGridSpec,
    /// `t`-grid points per octave; `None` uses the density derived from `δ`.
    pub t_per_octave: Option<usize>,
    pub symbol: String,
    pub trials: usize,
    pub seed: Option<u64>,
    /// Eigenvalues `k` for the trace study.
    pub eigenvalues: Vec<usize>,
    /// Subordination tuples for the identity suite.
    pub tuples: Vec<SubordinationTuple>,
    pub bmo_half_width: f64,
    pub bmo_levels: u32,
    pub output: Option<PathBuf>,
    pub parallel: bool,
}

fn default_band(n: usize) -> usize {
    if n == 1 {
        257
    } else {
        66
    }
}

fn dyadic_deltas(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 2f64.powi(-k)).collect()
}

impl ExperimentConfig {
    /// Defaults for `experiment` in dimension `n`.
    pub fn defaults(experiment: ExperimentKind, n: usize) -> Self {
        let band = default_band(n);
        let mut cfg = Self {
            experiment,
            n,
            alpha: 0.0,
            lambda: 1.0,
            deltas: dyadic_deltas(3, 7),
            max_eigenvalue: band,
            grid_m: 2 * band,
            radii: RadiusGridSpec {
                lo: 1.0,
                hi: None,
                per_octave: 8,
            },
            t_per_octave: None,
            symbol: "sin".into(),
            trials: 20,
            seed: None,
            eigenvalues: Vec::new(),
            tuples: DEFAULT_TUPLES.to_vec(),
            bmo_half_width: 32.0,
            bmo_levels: if n == 1 { 10 } else { 6 },
            output: None,
            parallel: false,
        };
        match experiment {
            ExperimentKind::TraceDecay => {
                cfg.alpha = 2.0;
                cfg.eigenvalues = if n == 1 {
                    vec![65, 129, 257, 513, 1025]
                } else {
                    vec![64, 80, 96, 112, 128]
                };
            }
            ExperimentKind::DeltaScaling => {}
            ExperimentKind::Convergence => {
                cfg.radii = RadiusGridSpec {
                    lo: 4.0,
                    hi: Some(64.0),
                    per_octave: 1,
                };
            }
            ExperimentKind::TheoremRatio => {
                cfg.alpha = 0.5;
                cfg.trials = 50;
            }
            ExperimentKind::IdentitySuite => {
                cfg.deltas = vec![2f64.powi(-5)];
            }
        }
        cfg
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("invalid {what} '{value}' for key '{key}'"));
        let float = |v: &str| v.trim().parse::<f64>().map_err(|_| bad("number"));
        let count = |v: &str| v.trim().parse::<usize>().map_err(|_| bad("integer"));
        match key {
            "experiment" => self.experiment = value.parse()?,
            "n" => {
                let n = count(value)?;
                let d = Self::defaults(self.experiment, n);
                if self.max_eigenvalue == default_band(self.n) {
                    self.max_eigenvalue = d.max_eigenvalue;
                    self.grid_m = d.grid_m;
                }
                if self.eigenvalues == Self::defaults(self.experiment, self.n).eigenvalues {
                    self.eigenvalues = d.eigenvalues;
                }
                if self.bmo_levels == Self::defaults(self.experiment, self.n).bmo_levels {
                    self.bmo_levels = d.bmo_levels;
                }
                self.n = n;
            }
            "alpha" => self.alpha = float(value)?,
            "lambda" => self.lambda = float(value)?,
            "deltas" => self.deltas = list(value, float)?,
            "band" | "max_eigenvalue" => {
                let band = count(value)?;
                if self.grid_m == 2 * self.max_eigenvalue {
                    self.grid_m = 2 * band;
                }
                self.max_eigenvalue = band;
            }
            "grid_m" => self.grid_m = count(value)?,
            "r_min" => self.radii.lo = float(value)?,
            "r_max" => self.radii.hi = Some(float(value)?),
            "r_per_octave" => self.radii.per_octave = count(value)?,
            "t_per_octave" => self.t_per_octave = Some(count(value)?),
            "symbol" | "b" => self.symbol = value.trim().to_string(),
            "trials" => self.trials = count(value)?,
            "seed" => self.seed = Some(value.trim().parse().map_err(|_| bad("seed"))?),
            "eigenvalues" | "ks" => self.eigenvalues = list(value, count)?,
            "tuple" => {
                let v = list(value, float)?;
                let t: SubordinationTuple = v.try_into().map_err(|_| bad("tuple (expected lambda,rho,m,R)"))?;
                self.tuples = vec![t];
            }
            "bmo_half_width" => self.bmo_half_width = float(value)?,
            "bmo_levels" => self.bmo_levels = value.trim().parse().map_err(|_| bad("integer"))?,
            "output" => self.output = Some(PathBuf::from(value.trim())),
            "parallel" => {
                self.parallel = match value.trim() {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(bad("boolean")),
                }
            }
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies every `key=value` line of a config file. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", no + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    /// Whether this is the single-tuple mode of the identity suite.
    pub fn single_tuple(&self) -> bool {
        self.experiment == ExperimentKind::IdentitySuite && self.tuples.len() == 1
    }

    /// Checks every constraint of the experiment up front.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n == 0 || self.n > 3 {
            return fail(format!("n must be 1, 2 or 3, got {}", self.n));
        }
        if !self.alpha.is_finite() || !self.lambda.is_finite() {
            return fail("alpha and lambda must be finite".into());
        }
        if self.lambda < 0.0 {
            return fail(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if self.experiment.uses_trials() {
            if self.seed.is_none() {
                return fail(format!("{} needs an explicit seed", self.experiment));
            }
            if self.trials == 0 {
                return fail("trial count must be positive".into());
            }
        }
        let needs_band = !matches!(
            self.experiment,
            ExperimentKind::TraceDecay | ExperimentKind::IdentitySuite
        );
        if needs_band {
            if self.max_eigenvalue < self.n {
                return fail(format!("band {} holds no eigenvalue", self.max_eigenvalue));
            }
            if self.grid_m < 2 * self.max_eigenvalue {
                return fail(format!(
                    "grid_m = {} cannot resolve the working band 2*{}",
                    self.grid_m, self.max_eigenvalue
                ));
            }
            if !(self.radii.lo > 0.0) || self.radii.per_octave == 0 {
                return fail("radius grid needs r_min > 0 and r_per_octave >= 1".into());
            }
            if self.radii.hi.is_some_and(|h| !(h >= self.radii.lo)) {
                return fail("r_max must be >= r_min".into());
            }
            if !(self.bmo_half_width > 0.0) || self.bmo_levels == 0 {
                return fail("BMO estimate needs a positive half width and level count".into());
            }
        }
        if let Some(d) = self.deltas.iter().find(|d| !(**d > 0.0 && **d < 0.5)) {
            return fail(format!("every delta must lie in (0, 1/2), got {d}"));
        }
        match self.experiment {
            ExperimentKind::TraceDecay => {
                if !(self.alpha > 1.0) {
                    return fail(format!("trace-decay needs alpha > 1, got {}", self.alpha));
                }
                if self.eigenvalues.len() < 2 || self.eigenvalues.contains(&0) {
                    return fail("trace-decay needs at least two eigenvalues k >= 1".into());
                }
            }
            ExperimentKind::DeltaScaling => {
                if self.deltas.len() < 4 {
                    return fail("delta-scaling needs at least 4 deltas".into());
                }
                let ratios: Vec<f64> = self.deltas.windows(2).map(|w| w[1] / w[0]).collect();
                if ratios
                    .iter()
                    .any(|r| (r - ratios[0]).abs() > 1e-9 * ratios[0].abs() || *r == 1.0)
                {
                    return fail("delta list must be geometric".into());
                }
                if !(self.alpha >= 0.0) {
                    return fail(format!("alpha must be >= 0, got {}", self.alpha));
                }
            }
            ExperimentKind::Convergence | ExperimentKind::TheoremRatio => {
                if !(self.alpha >= 0.0 && self.alpha < self.n as f64) {
                    return fail(format!(
                        "alpha must lie in [0, n) = [0, {}), got {}",
                        self.n, self.alpha
                    ));
                }
            }
            ExperimentKind::IdentitySuite => {
                if self.tuples.is_empty() {
                    return fail("identity-suite needs at least one tuple".into());
                }
            }
        }
        Ok(())
    }
}

fn list<T>(value: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value.split(',').filter(|s| !s.trim().is_empty()).map(parse).collect()
}
