//! Command-line configuration and its validation.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use walkrange_core::cocycle::{parse_base, CocycleSpec};
use walkrange_core::estimators::{
    default_checkpoints, ExperimentPlan, Statistic, DEFAULT_MEMORY_CAP, DEFAULT_SEED,
};
use walkrange_core::law::{parse_law, StepLaw};
use walkrange_core::quadrature::QuadratureSettings;
use walkrange_core::{GroupDescriptor, GroupElement, GroupKind};

/// A usage problem tied to the flag that caused it.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError {
    pub flag: String,
    pub message: String,
}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid value for {}: {}", self.flag, self.message)
    }
}

impl std::error::Error for UsageError {}

fn usage(flag: &str, e: impl std::fmt::Display) -> UsageError {
    UsageError {
        flag: flag.to_string(),
        message: e.to_string(),
    }
}

#[derive(Parser, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[command(
    name = "walkrange",
    version,
    about = "Range, boundary and Folner statistics of random walks and cocycles on Z^d, F2 and H3"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads (default: hardware count); affects speed only.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// More progress output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Command {
    /// Monte Carlo ensemble of trajectories, reported per checkpoint.
    Simulate(SimulateArgs),
    /// Green function, potential kernel and hitting constants by quadrature.
    Analytic(AnalyticArgs),
    /// Regular-variation index of a statistic from a simulate CSV.
    Fit(FitArgs),
    /// Runs the acceptance suite; exits nonzero if any check fails.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// z1, z2, z3, f2 or heis.
    #[arg(long)]
    pub group: String,

    /// srw, zeta:<alpha>, cauchy, lazy:<rho>:<law> or atoms:<file>.
    #[arg(long, default_value = "srw")]
    pub law: String,

    /// bernoulli or rotation:<theta>:<beta>:<x0> (theta may be `golden`).
    #[arg(long, default_value = "bernoulli")]
    pub base: String,

    /// Largest checkpoint.
    #[arg(long)]
    pub steps: u64,

    /// Comma-separated checkpoints; default ceil(1000 * 1.5^k) below
    /// --steps, then --steps.
    #[arg(long)]
    pub checkpoints: Option<String>,

    #[arg(long)]
    pub reps: u64,

    /// Comma-separated statistics: range, size, boundary, bratio,
    /// vboundary:<v>, folner:<g>, escape:<g>, avoid:<g>, backescape:<g>.
    #[arg(long, default_value = "range")]
    pub stats: String,

    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Also drive the backward walk (needed by backescape).
    #[arg(long)]
    pub two_sided: bool,

    /// Horizon for infinite-time events (default: --steps).
    #[arg(long)]
    pub horizon: Option<u64>,

    /// Visited sites allowed per trajectory.
    #[arg(long, default_value_t = DEFAULT_MEMORY_CAP)]
    pub memory_cap: usize,

    /// Output file, .csv or .json (default: CSV on stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    /// Green function G(g) of a transient lattice walk.
    Green,
    /// Potential kernel a(j) of a recurrent lattice walk.
    Akernel,
    /// Two-point taboo pair for the set {0, j}.
    Taboo2,
    /// Slope of the return sums against log n.
    Gamma,
    /// Hitting constants c_j and d_j.
    Hitconst,
}

impl Quantity {
    pub fn token(self) -> &'static str {
        match self {
            Quantity::Green => "green",
            Quantity::Akernel => "akernel",
            Quantity::Taboo2 => "taboo2",
            Quantity::Gamma => "gamma",
            Quantity::Hitconst => "hitconst",
        }
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticArgs {
    /// z1, z2 or z3.
    #[arg(long)]
    pub group: String,

    #[arg(long, default_value = "srw")]
    pub law: String,

    #[arg(long, value_enum)]
    pub quantity: Quantity,

    /// Group element (not used by gamma).
    #[arg(long, allow_hyphen_values = true)]
    pub arg: Option<String>,

    /// Gauss-Legendre points per axis per cell.
    #[arg(long, default_value_t = QuadratureSettings::default().resolution)]
    pub resolution: usize,

    /// Half-width of the cube excluded around the singularity.
    #[arg(long, default_value_t = QuadratureSettings::default().epsilon)]
    pub epsilon: f64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArgs {
    /// CSV written by `simulate`.
    #[arg(long = "in")]
    pub input: PathBuf,

    /// Statistic name, with `:<element>` where it takes one.
    #[arg(long)]
    pub statistic: String,

    /// Checkpoint window `<nmin>:<nmax>` (default: all).
    #[arg(long)]
    pub range: Option<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TierArg {
    Quick,
    Full,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "quick")]
    pub tier: TierArg,

    /// Also write the summary as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum ParseOutcome {
    Config(RunConfig),
    /// `--help` or `--version` text, or a clap usage error, ready to print.
    Clap(clap::Error),
    Usage(UsageError),
}

/// Parses and validates `argv` (including the program name).
pub fn parse_args<I, T>(argv: I) -> ParseOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match RunConfig::try_parse_from(argv) {
        Err(e) => ParseOutcome::Clap(e),
        Ok(c) => match c.validate() {
            Ok(()) => ParseOutcome::Config(c),
            Err(e) => ParseOutcome::Usage(e),
        },
    }
}

fn group_of(flag: &str, token: &str) -> Result<GroupDescriptor, UsageError> {
    token
        .parse::<GroupKind>()
        .map(GroupDescriptor::new)
        .map_err(|e| usage(flag, e))
}

/// Splits a statistic list on commas, re-attaching the coordinates of Z^d
/// element literals (`vboundary:1,0,folner:0,1` is two statistics).
pub fn split_stats(list: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for part in list.split(',').map(str::trim) {
        let continues = part.starts_with(|c: char| c.is_ascii_digit() || c == '-');
        match out.last_mut() {
            Some(prev) if continues && prev.contains(':') => {
                prev.push(',');
                prev.push_str(part);
            }
            _ => out.push(part.to_string()),
        }
    }
    out.retain(|s| !s.is_empty());
    out
}

fn parse_u64_list(flag: &str, s: &str) -> Result<Vec<u64>, UsageError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| usage(flag, format!("`{t}` is not a step count")))
        })
        .collect()
}

impl SimulateArgs {
    pub fn plan(&self, threads: Option<usize>) -> Result<ExperimentPlan, UsageError> {
        let group = group_of("--group", &self.group)?;
        if self.steps == 0 {
            return Err(usage("--steps", "must be positive"));
        }
        if self.reps == 0 {
            return Err(usage("--reps", "must be positive"));
        }
        if self.horizon == Some(0) {
            return Err(usage("--horizon", "must be positive"));
        }
        let checkpoints = match &self.checkpoints {
            None => default_checkpoints(self.steps),
            Some(s) => {
                let mut c = parse_u64_list("--checkpoints", s)?;
                if c.iter().any(|&n| n == 0 || n > self.steps) {
                    return Err(usage("--checkpoints", "checkpoints must lie in 1..=--steps"));
                }
                c.push(self.steps);
                c.sort_unstable();
                c.dedup();
                c
            }
        };
        let law: Option<StepLaw> = if self.base == "bernoulli" {
            Some(parse_law(&self.law, group).map_err(|e| usage("--law", e))?)
        } else {
            None
        };
        let n_max = self.horizon.unwrap_or(0).max(self.steps);
        let spec: CocycleSpec =
            parse_base(&self.base, group, law, n_max).map_err(|e| usage("--base", e))?;
        let stats = split_stats(&self.stats)
            .iter()
            .map(|t| Statistic::parse(t, group))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| usage("--stats", e))?;
        if !self.two_sided && stats.iter().any(|s| matches!(s, Statistic::BackEscape(_))) {
            return Err(usage("--stats", "backescape needs --two-sided"));
        }
        let plan = ExperimentPlan::new(spec, stats, checkpoints, self.reps, self.seed)
            .map_err(|e| usage("--stats", e))?
            .with_horizon(self.horizon)
            .map_err(|e| usage("--horizon", e))?
            .with_memory_cap(self.memory_cap)
            .with_threads(threads);
        Ok(plan)
    }
}

/// A validated analytic request.
#[derive(Debug, Clone)]
pub struct AnalyticRequest {
    pub law: StepLaw,
    pub quantity: Quantity,
    pub element: Option<GroupElement>,
    pub settings: QuadratureSettings,
}

impl AnalyticArgs {
    pub fn request(&self) -> Result<AnalyticRequest, UsageError> {
        let group = group_of("--group", &self.group)?;
        if group.kind.lattice_dim().is_none() {
            return Err(usage("--group", "analytic quantities need z1, z2 or z3"));
        }
        let law = parse_law(&self.law, group).map_err(|e| usage("--law", e))?;
        let element = match (&self.arg, self.quantity) {
            (_, Quantity::Gamma) => None,
            (None, q) => return Err(usage("--arg", format!("{} needs an element", q.token()))),
            (Some(a), _) => Some(group.parse_element(a).map_err(|e| usage("--arg", e))?),
        };
        if self.resolution == 0 {
            return Err(usage("--resolution", "must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(usage("--epsilon", "must lie in (0, 1)"));
        }
        Ok(AnalyticRequest {
            law,
            quantity: self.quantity,
            element,
            settings: QuadratureSettings {
                resolution: self.resolution,
                epsilon: self.epsilon,
                ..QuadratureSettings::default()
            },
        })
    }
}

impl FitArgs {
    /// `(name, element label, n window)`.
    pub fn selection(&self) -> Result<(String, String, (u64, u64)), UsageError> {
        let (name, element) = match self.statistic.split_once(':') {
            Some((n, e)) => (n.to_string(), e.to_string()),
            None => (self.statistic.clone(), String::new()),
        };
        if name.is_empty() {
            return Err(usage("--statistic", "empty statistic name"));
        }
        let window = match &self.range {
            None => (0, u64::MAX),
            Some(r) => {
                let (a, b) = r
                    .split_once(':')
                    .ok_or_else(|| usage("--range", format!("expected <nmin>:<nmax>, got `{r}`")))?;
                let p = |s: &str| {
                    s.trim()
                        .parse::<u64>()
                        .map_err(|_| usage("--range", format!("`{s}` is not a step count")))
                };
                let (a, b) = (p(a)?, p(b)?);
                if a > b {
                    return Err(usage("--range", "nmin exceeds nmax"));
                }
                (a, b)
            }
        };
        Ok((name, element, window))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), UsageError> {
        if self.threads == Some(0) {
            return Err(usage("--threads", "must be positive"));
        }
        match &self.command {
            Command::Simulate(s) => s.plan(self.threads).map(|_| ()),
            Command::Analytic(a) => a.request().map(|_| ()),
            Command::Fit(f) => f.selection().map(|_| ()),
            Command::Verify(_) => Ok(()),
        }
    }

    /// Command line that parses back to this configuration.
    pub fn to_args(&self) -> Vec<String> {
        let mut flags: Vec<(&str, String)> = Vec::new();
        let mut switches: Vec<&str> = Vec::new();
        let sub = match &self.command {
            Command::Simulate(s) => {
                flags.push(("--group", s.group.clone()));
                flags.push(("--law", s.law.clone()));
                flags.push(("--base", s.base.clone()));
                flags.push(("--steps", s.steps.to_string()));
                flags.extend(s.checkpoints.clone().map(|c| ("--checkpoints", c)));
                flags.push(("--reps", s.reps.to_string()));
                flags.push(("--stats", s.stats.clone()));
                flags.push(("--seed", s.seed.to_string()));
                flags.extend(s.horizon.map(|h| ("--horizon", h.to_string())));
                flags.push(("--memory-cap", s.memory_cap.to_string()));
                flags.extend(s.out.as_ref().map(|o| ("--out", o.display().to_string())));
                if s.two_sided {
                    switches.push("--two-sided");
                }
                "simulate"
            }
            Command::Analytic(a) => {
                flags.push(("--group", a.group.clone()));
                flags.push(("--law", a.law.clone()));
                flags.push(("--quantity", a.quantity.token().into()));
                flags.extend(a.arg.clone().map(|x| ("--arg", x)));
                flags.push(("--resolution", a.resolution.to_string()));
                flags.push(("--epsilon", format!("{:?}", a.epsilon)));
                "analytic"
            }
            Command::Fit(f) => {
                flags.push(("--in", f.input.display().to_string()));
                flags.push(("--statistic", f.statistic.clone()));
                flags.extend(f.range.clone().map(|r| ("--range", r)));
                "fit"
            }
            Command::Verify(t) => {
                let tier = match t.tier {
                    TierArg::Quick => "quick",
                    TierArg::Full => "full",
                };
                flags.push(("--tier", tier.into()));
                flags.extend(t.out.as_ref().map(|o| ("--out", o.display().to_string())));
                "verify"
            }
        };
        flags.extend(self.threads.map(|t| ("--threads", t.to_string())));
        let mut v = vec!["walkrange".to_string(), sub.to_string()];
        v.extend(flags.into_iter().map(|(k, val)| format!("{k}={val}")));
        v.extend(switches.into_iter().map(String::from));
        v.extend((0..self.verbose).map(|_| "-v".to_string()));
        v
    }
}
