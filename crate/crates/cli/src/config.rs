//! Instance settings from flags, an optional TOML file and defaults.
//!
//! Precedence is flag, then file, then default. Defaults are the canonical
//! instance: logarithmic values with lambda 1 and r_min 2, two publishers
//! with two reports each, T = 3 and T_pub = 1.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use prrr_core::game::{GameConfig, StrategyProfile};
use prrr_core::parse::{publisher_label, publisher_strategy, validator_strategy};
use prrr_core::protocol::EpochConfig;
use prrr_core::rvalue::RandomValueSpec;
use prrr_core::types::PublisherId;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Log,
    Polarized,
}

/// Random-value function flags.
#[derive(Debug, Clone, Default, Args)]
pub struct SpecArgs {
    /// Random-value family.
    #[arg(long = "fn", value_enum)]
    pub family: Option<Family>,
    /// Rate of the logarithmic family.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Probability of the high value in the polarized family.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub rmin: Option<f64>,
    /// High value of the polarized family.
    #[arg(long)]
    pub rmax: Option<f64>,
}

/// Game instance flags.
#[derive(Debug, Clone, Default, Args)]
pub struct InstanceArgs {
    /// TOML file with instance settings; flags override it.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// Reports per publisher, e.g. `2,2`.
    #[arg(long, value_delimiter = ',')]
    pub publishers: Option<Vec<u32>>,
    /// Steps in the epoch.
    #[arg(long)]
    pub t_total: Option<u64>,
    /// Step at which reports become publishable.
    #[arg(long)]
    pub t_pub: Option<u64>,
}

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(rename = "fn")]
    pub family: Option<Family>,
    pub lambda: Option<f64>,
    pub p: Option<f64>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub publishers: Option<Vec<u32>>,
    pub t_total: Option<u64>,
    pub t_pub: Option<u64>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    /// Publisher label (`p0`, `p1`, ...) to strategy string.
    #[serde(default)]
    pub strategies: BTreeMap<String, String>,
    pub validator: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn load_file(instance: &InstanceArgs) -> Result<FileConfig> {
    match &instance.config {
        Some(path) => FileConfig::load(path),
        None => Ok(FileConfig::default()),
    }
}

pub fn build_spec(args: &SpecArgs, file: &FileConfig) -> Result<RandomValueSpec> {
    let family = args.family.or(file.family).unwrap_or(Family::Log);
    let r_min = args.rmin.or(file.r_min).unwrap_or(2.0);
    let spec = match family {
        Family::Log => {
            if args.p.or(file.p).is_some() || args.rmax.or(file.r_max).is_some() {
                bail!("--p and --rmax apply to the polarized family only");
            }
            RandomValueSpec::logarithmic(args.lambda.or(file.lambda).unwrap_or(1.0), r_min)?
        }
        Family::Polarized => {
            if args.lambda.or(file.lambda).is_some() {
                bail!("--lambda applies to the log family only");
            }
            let p = args.p.or(file.p).ok_or_else(|| anyhow!("the polarized family needs --p"))?;
            let r_max = args.rmax.or(file.r_max).ok_or_else(|| anyhow!("the polarized family needs --rmax"))?;
            RandomValueSpec::polarized(p, r_min, r_max)?
        }
    };
    Ok(spec)
}

pub fn build_game(spec: RandomValueSpec, instance: &InstanceArgs, file: &FileConfig, seed: u64) -> Result<GameConfig> {
    let counts = instance.publishers.clone().or_else(|| file.publishers.clone()).unwrap_or_else(|| vec![2, 2]);
    build_game_with(spec, instance, file, &counts, seed)
}

pub fn build_game_with(
    spec: RandomValueSpec,
    instance: &InstanceArgs,
    file: &FileConfig,
    counts: &[u32],
    seed: u64,
) -> Result<GameConfig> {
    if counts.is_empty() {
        bail!("--publishers needs at least one publisher");
    }
    let t_total = instance.t_total.or(file.t_total).unwrap_or(3);
    let t_pub = instance.t_pub.or(file.t_pub).unwrap_or(1);
    let epoch = EpochConfig::new(t_total, t_pub, spec)?;
    Ok(GameConfig::new(epoch, counts, seed)?)
}

/// Strategy profile from `p1=...` assignments, file entries first.
pub fn build_profile(
    cfg: &GameConfig,
    assignments: &[String],
    validator: Option<&str>,
    file: &FileConfig,
) -> Result<(StrategyProfile, BTreeMap<PublisherId, String>)> {
    let mut chosen = BTreeMap::new();
    for (label, text) in &file.strategies {
        chosen.insert(publisher_label(label)?, text.clone());
    }
    for a in assignments {
        let (label, text) =
            a.split_once('=').ok_or_else(|| anyhow!("--strategy expects pJ=NAME[:k=v,...], got {a:?}"))?;
        chosen.insert(publisher_label(label)?, text.to_string());
    }
    let mut profile = StrategyProfile::honest(cfg);
    for (j, text) in &chosen {
        if !cfg.roster.contains(j) {
            bail!("no publisher {j} in an instance with {} publishers", cfg.roster.len());
        }
        profile = profile.with_publisher(*j, publisher_strategy(text, cfg.epoch.window())?);
    }
    if let Some(v) = validator.or(file.validator.as_deref()) {
        profile = profile.with_validator(validator_strategy(v)?);
    }
    Ok((profile, chosen))
}

/// Short human-readable instance label used in CSV rows.
pub fn describe(cfg: &GameConfig) -> String {
    let spec = match cfg.spec() {
        RandomValueSpec::Logarithmic { lambda, r_min } => format!("log(lambda={lambda};r_min={r_min})"),
        RandomValueSpec::Polarized { p, r_min, r_max } => format!("polarized(p={p};r_min={r_min};r_max={r_max})"),
    };
    let counts: Vec<String> = cfg.roster.iter().map(|&p| cfg.report_count(p).to_string()).collect();
    format!("{spec} reports={} T={} T_pub={}", counts.join("x"), cfg.epoch.t_total, cfg.epoch.t_pub)
}
