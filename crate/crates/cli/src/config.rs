//! Run configuration: defaults, `key = value` config files and flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

/// Inclusive year range, written `FROM:TO` (or `FROM-TO`, or a single year).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearRange {
    pub from: i32,
    pub to: i32,
}

impl YearRange {
    pub fn contains(&self, year: i32) -> bool {
        (self.from..=self.to).contains(&year)
    }
}

impl FromStr for YearRange {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (from, to) = match s.split_once(':').or_else(|| s.split_once('-')) {
            Some((a, b)) => (a.trim().parse()?, b.trim().parse()?),
            None => {
                let y = s.parse()?;
                (y, y)
            }
        };
        if from > to {
            bail!("year range {s} runs backwards");
        }
        Ok(Self { from, to })
    }
}

impl fmt::Display for YearRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.from, self.to)
    }
}

fn parse_ranges(s: &str) -> Result<Vec<YearRange>> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(YearRange::from_str).collect()
}

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// key = value file with the same names as the flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dyadic trade CSV (year,importer,exporter,value)
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Inclusive range FROM:TO; defaults to every year in the data
    #[arg(long, global = true)]
    pub years: Option<String>,
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    #[arg(long, global = true)]
    pub stop_fraction: Option<f64>,
    #[arg(long, global = true)]
    pub import_scale: Option<f64>,
    #[arg(long, global = true)]
    pub export_scale: Option<f64>,
    #[arg(long, global = true)]
    pub drop_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub report_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub null_trials: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated year ranges left out of the analysis
    #[arg(long, global = true)]
    pub exclude_years: Option<String>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data_path: PathBuf,
    pub years: Option<YearRange>,
    pub iterations: usize,
    pub stop_fraction: f64,
    pub import_scale: f64,
    pub export_scale: f64,
    pub drop_threshold: f64,
    pub report_threshold: f64,
    /// `None` means the per-command default (50 for `mea`, 100 for `perturb`).
    pub null_trials: Option<usize>,
    pub seed: u64,
    pub exclude_years: Vec<YearRange>,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn new(data_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_path: data_path.into(),
            years: None,
            iterations: tradeshock_core::DEFAULT_ITERATIONS,
            stop_fraction: 0.5,
            import_scale: 0.7,
            export_scale: 0.95,
            drop_threshold: 0.01,
            report_threshold: 0.005,
            null_trials: None,
            seed: 0,
            exclude_years: Vec::new(),
            output_dir: output_dir.into(),
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            bail!("iterations must be at least 1");
        }
        if !(self.stop_fraction > 0.0 && self.stop_fraction <= 1.0) {
            bail!("stop fraction must lie in (0, 1]");
        }
        for (name, v) in [("import scale", self.import_scale), ("export scale", self.export_scale)] {
            if !(0.0..=1.0).contains(&v) {
                bail!("{name} must lie in [0, 1]");
            }
        }
        if !(0.0..1.0).contains(&self.drop_threshold) {
            bail!("drop threshold must lie in [0, 1)");
        }
        if !self.report_threshold.is_finite() {
            bail!("report threshold must be finite");
        }
        if matches!(self.null_trials, Some(n) if n < 2) {
            bail!("null trials must be at least 2");
        }
        if self.threads == Some(0) {
            bail!("threads must be at least 1");
        }
        Ok(())
    }

    pub fn is_excluded(&self, year: i32) -> bool {
        self.exclude_years.iter().any(|r| r.contains(year))
    }

    /// Defaults, overlaid by the config file (if any), overlaid by flags.
    pub fn resolve(args: &ConfigArgs) -> Result<Self> {
        let mut merged = ConfigArgs::default();
        if let Some(path) = &args.config {
            merged = read_config_file(path)?;
        }
        overlay(&mut merged, args);

        let data = merged
            .data
            .clone()
            .ok_or_else(|| anyhow!("no data file given (use --data or `data =` in the config file)"))?;
        let mut cfg = RunConfig::new(data, merged.out.clone().unwrap_or_else(|| PathBuf::from("out")));
        if let Some(y) = &merged.years {
            cfg.years = Some(y.parse().with_context(|| format!("bad --years `{y}`"))?);
        }
        if let Some(v) = merged.iterations {
            cfg.iterations = v;
        }
        if let Some(v) = merged.stop_fraction {
            cfg.stop_fraction = v;
        }
        if let Some(v) = merged.import_scale {
            cfg.import_scale = v;
        }
        if let Some(v) = merged.export_scale {
            cfg.export_scale = v;
        }
        if let Some(v) = merged.drop_threshold {
            cfg.drop_threshold = v;
        }
        if let Some(v) = merged.report_threshold {
            cfg.report_threshold = v;
        }
        cfg.null_trials = merged.null_trials;
        if let Some(v) = merged.seed {
            cfg.seed = v;
        }
        if let Some(v) = &merged.exclude_years {
            cfg.exclude_years = parse_ranges(v).with_context(|| format!("bad --exclude-years `{v}`"))?;
        }
        cfg.threads = merged.threads;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn overlay(base: &mut ConfigArgs, top: &ConfigArgs) {
    macro_rules! take {
        ($($f:ident),*) => {
            $(if top.$f.is_some() { base.$f = top.$f.clone(); })*
        };
    }
    take!(
        data,
        years,
        iterations,
        stop_fraction,
        import_scale,
        export_scale,
        drop_threshold,
        report_threshold,
        null_trials,
        seed,
        exclude_years,
        out,
        threads
    );
}

fn read_config_file(path: &Path) -> Result<ConfigArgs> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config_text(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Relative paths in a config file resolve against the file's directory.
pub fn parse_config_text(text: &str, base_dir: &Path) -> Result<ConfigArgs> {
    let mut args = ConfigArgs::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected `key = value`", lineno + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"').to_string();
        let ctx = || format!("config line {}: bad value for `{key}`", lineno + 1);
        match key.as_str() {
            "data" => args.data = Some(base_dir.join(&value)),
            "out" => args.out = Some(base_dir.join(&value)),
            "years" => args.years = Some(value),
            "iterations" => args.iterations = Some(value.parse().with_context(ctx)?),
            "stop-fraction" => args.stop_fraction = Some(value.parse().with_context(ctx)?),
            "import-scale" => args.import_scale = Some(value.parse().with_context(ctx)?),
            "export-scale" => args.export_scale = Some(value.parse().with_context(ctx)?),
            "drop-threshold" => args.drop_threshold = Some(value.parse().with_context(ctx)?),
            "report-threshold" => args.report_threshold = Some(value.parse().with_context(ctx)?),
            "null-trials" => args.null_trials = Some(value.parse().with_context(ctx)?),
            "seed" => args.seed = Some(value.parse().with_context(ctx)?),
            "exclude-years" => args.exclude_years = Some(value),
            "threads" => args.threads = Some(value.parse().with_context(ctx)?),
            other => bail!("config line {}: unknown key `{other}`", lineno + 1),
        }
    }
    Ok(args)
}
