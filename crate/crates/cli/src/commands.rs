//! Year-by-year orchestration of the experiments and the files they write.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Subcommand;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tradeshock_core::experiments::{trial_seed, DEFAULT_NULL_TRIALS};
use tradeshock_core::{
    connectance, derive_model, income, linear_fit, link_scan, matrix_series, max_trade_deficit,
    max_trade_surplus, max_vulnerability, mea, null_band, parse_dyadic_csv, perturbation_scan, quadratic_fit,
    ExperimentError, FitError, FitResult, ImportMatrix, IngestDiagnostics, LinkImpact, MeaResult, NullBand,
    PerturbationTable,
};

use crate::config::{RunConfig, YearRange};
use crate::report::{line_chart, num, opt, pct, sha256_hex, write_output, OutputFile, Series, Table};

/// Null trials for the vulnerability band when none are configured.
pub const DEFAULT_PERTURB_NULL_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Parse the data file and report what was kept and dropped
    IngestCheck,
    /// Maximal extinction analysis with null-model bands
    Mea,
    /// Node perturbation scan: power and vulnerability percentages
    Perturb,
    /// Link removal impacts
    Links,
    /// Network metrics per year and fits across years
    Metrics,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::IngestCheck => "ingest-check",
            Command::Mea => "mea",
            Command::Perturb => "perturb",
            Command::Links => "links",
            Command::Metrics => "metrics",
        }
    }
}

/// A year whose computation failed, in whole or in part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearFailure {
    pub year: i32,
    pub stage: String,
    pub error: String,
}

impl YearFailure {
    fn new(year: i32, stage: &str, error: impl ToString) -> Self {
        Self { year, stage: stage.to_string(), error: error.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearSummary {
    pub year: i32,
    pub nodes: usize,
    pub links: usize,
    pub total_trade: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config: RunConfig,
    pub input: InputInfo,
    pub diagnostics: IngestDiagnostics,
    pub years: Vec<YearSummary>,
    pub years_excluded: Vec<i32>,
    pub failures: Vec<YearFailure>,
    /// Null-model trials that failed without sinking their band.
    pub null_trial_failures: Vec<YearFailure>,
    pub stages: Vec<StageTiming>,
    pub outputs: Vec<OutputFile>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
}

impl RunOutcome {
    /// 0 on full success, 2 when some year failed.
    pub fn exit_code(&self) -> u8 {
        if self.manifest.failures.is_empty() {
            0
        } else {
            2
        }
    }
}

struct Dataset {
    input: InputInfo,
    diagnostics: IngestDiagnostics,
    matrices: Vec<ImportMatrix>,
    excluded: Vec<i32>,
}

fn load(cfg: &RunConfig) -> Result<Dataset> {
    let bytes =
        std::fs::read(&cfg.data_path).with_context(|| format!("reading {}", cfg.data_path.display()))?;
    let (records, mut diagnostics) = parse_dyadic_csv(bytes.as_slice())?;
    let range = match cfg.years {
        Some(r) => r,
        None => {
            let from = records.iter().map(|r| r.year).min();
            let to = records.iter().map(|r| r.year).max();
            match (from, to) {
                (Some(from), Some(to)) => YearRange { from, to },
                _ => bail!("{} holds no usable trade records", cfg.data_path.display()),
            }
        }
    };
    let series = matrix_series(&records, range.from, range.to)?;
    diagnostics.years_empty = series.years_empty;
    let (excluded, matrices): (Vec<_>, Vec<_>) =
        series.matrices.into_iter().partition(|m| cfg.is_excluded(m.year()));
    Ok(Dataset {
        input: InputInfo {
            path: cfg.data_path.display().to_string(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        },
        diagnostics,
        matrices,
        excluded: excluded.iter().map(ImportMatrix::year).collect(),
    })
}

fn summarize(m: &ImportMatrix) -> YearSummary {
    YearSummary {
        year: m.year(),
        nodes: m.n(),
        links: m.values().iter().filter(|&&v| v > 0.0).count(),
        total_trade: m.total(),
    }
}

/// Null models of year `year` draw from this seed, so every year gets its
/// own reproducible stream.
pub fn year_seed(seed: u64, year: i32) -> u64 {
    trial_seed(seed, year as i64 as u64)
}

struct Emitted {
    outputs: Vec<OutputFile>,
    failures: Vec<YearFailure>,
    null_trial_failures: Vec<YearFailure>,
}

impl Emitted {
    fn new() -> Self {
        Self { outputs: Vec::new(), failures: Vec::new(), null_trial_failures: Vec::new() }
    }

    fn band_failures(&mut self, year: i32, band: &NullBand) {
        for (t, e) in &band.failures {
            self.null_trial_failures.push(YearFailure::new(year, &band.statistic, format!("trial {t}: {e}")));
        }
    }
}

/// Runs one subcommand end to end: load, compute, write, manifest.
pub fn run(command: Command, cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().context("starting worker pool")?;
    pool.install(|| execute(command, cfg))
}

fn execute(command: Command, cfg: &RunConfig) -> Result<RunOutcome> {
    let mut stages = Vec::new();
    let clock = Instant::now();
    let data = load(cfg)?;
    stages.push(StageTiming { stage: "load".into(), seconds: clock.elapsed().as_secs_f64() });

    let clock = Instant::now();
    let dir = cfg.output_dir.as_path();
    let emitted = match command {
        Command::IngestCheck => ingest_check(dir, &data)?,
        Command::Mea => cmd_mea(dir, cfg, &data.matrices)?,
        Command::Perturb => cmd_perturb(dir, cfg, &data.matrices)?,
        Command::Links => cmd_links(dir, cfg, &data.matrices)?,
        Command::Metrics => cmd_metrics(dir, cfg, &data.matrices)?,
    };
    stages.push(StageTiming { stage: command.name().into(), seconds: clock.elapsed().as_secs_f64() });

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command,
        config: cfg.clone(),
        input: data.input,
        diagnostics: data.diagnostics,
        years: data.matrices.iter().map(summarize).collect(),
        years_excluded: data.excluded,
        failures: emitted.failures,
        null_trial_failures: emitted.null_trial_failures,
        stages,
        outputs: emitted.outputs,
    };
    let json = serde_json::to_vec_pretty(&manifest)?;
    let path = dir.join("manifest.json");
    std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
    Ok(RunOutcome { manifest })
}

fn ingest_check(dir: &Path, data: &Dataset) -> Result<Emitted> {
    #[derive(Serialize)]
    struct Report<'a> {
        diagnostics: &'a IngestDiagnostics,
        years: Vec<YearSummary>,
        years_excluded: &'a [i32],
    }
    let report = Report {
        diagnostics: &data.diagnostics,
        years: data.matrices.iter().map(summarize).collect(),
        years_excluded: &data.excluded,
    };
    let mut out = Emitted::new();
    out.outputs.push(write_output(dir, "diagnostics.json", &serde_json::to_vec_pretty(&report)?)?);
    Ok(out)
}

fn band_cells(band: Option<&NullBand>, observed: f64, f: fn(f64) -> String) -> Vec<String> {
    match band {
        Some(b) => {
            vec![f(b.mean), f(b.min), f(b.max), f(b.q05), f(b.q95), b.is_significant(observed).to_string()]
        }
        None => vec![String::new(); 6],
    }
}

fn band_series(points: &[(i32, f64, Option<NullBand>)]) -> Vec<Series> {
    let pick = |f: fn(&NullBand) -> f64| -> Vec<(f64, f64)> {
        points.iter().map(|(y, _, b)| (f64::from(*y), b.as_ref().map(f).unwrap_or(f64::NAN))).collect()
    };
    vec![
        Series::new(
            "observed",
            points.iter().map(|(y, v, _)| (f64::from(*y), *v)).collect(),
            "#1f4e9c",
            false,
        ),
        Series::new("null mean", pick(|b| b.mean), "#777777", false),
        Series::new("null 5%", pick(|b| b.q05), "#777777", true),
        Series::new("null 95%", pick(|b| b.q95), "#777777", true),
    ]
}

struct MeaYear {
    year: i32,
    result: Result<(MeaResult, Vec<f64>), ExperimentError>,
    band: Option<Result<NullBand, ExperimentError>>,
}

fn cmd_mea(dir: &Path, cfg: &RunConfig, matrices: &[ImportMatrix]) -> Result<Emitted> {
    let trials = cfg.null_trials.unwrap_or(DEFAULT_NULL_TRIALS);
    let (k, stop) = (cfg.iterations, cfg.stop_fraction);
    let years: Vec<MeaYear> = matrices
        .par_iter()
        .map(|m| {
            let result = mea(m, k, stop).and_then(|r| {
                let model = derive_model(m);
                let base = income(m, &model)?;
                Ok((r, base.as_slice().to_vec()))
            });
            let band = result.is_ok().then(|| {
                let stat = |x: &ImportMatrix| mea(x, k, stop).map(|r| r.robustness);
                null_band(m, "robustness", stat, trials, year_seed(cfg.seed, m.year()))
            });
            MeaYear { year: m.year(), result, band }
        })
        .collect();

    let mut out = Emitted::new();
    let mut series = Table::new(&[
        "year",
        "robustness",
        "null_mean",
        "null_min",
        "null_max",
        "null_q05",
        "null_q95",
        "significant",
    ])?;
    let mut detail = Table::new(&["year", "rank", "country", "pow", "cumulative_income_fraction"])?;
    let mut plotted = Vec::new();
    for y in years {
        let (r, base) = match y.result {
            Ok(v) => v,
            Err(e) => {
                out.failures.push(YearFailure::new(y.year, "mea", e));
                continue;
            }
        };
        let band = match y.band {
            Some(Ok(b)) => {
                out.band_failures(y.year, &b);
                Some(b)
            }
            Some(Err(e)) => {
                out.failures.push(YearFailure::new(y.year, "robustness null band", e));
                None
            }
            None => None,
        };
        let mut row = vec![y.year.to_string(), num(r.robustness)];
        row.extend(band_cells(band.as_ref(), r.robustness, num));
        series.row(&row)?;

        let total: f64 = base.iter().sum();
        let mut removed = 0.0;
        for (rank, (&i, &pow)) in r.deleted_indices.iter().zip(&r.pow_at_step).enumerate() {
            removed += base[i];
            detail.row([
                y.year.to_string(),
                (rank + 1).to_string(),
                r.deletion_order[rank].clone(),
                num(pow),
                num(removed / total),
            ])?;
        }
        plotted.push((y.year, r.robustness, band));
    }
    out.outputs.push(write_output(dir, "robustness_timeseries.csv", &series.into_bytes()?)?);
    out.outputs.push(write_output(dir, "mea_detail.csv", &detail.into_bytes()?)?);
    let svg = line_chart("Robustness", "year", "robustness", &band_series(&plotted));
    out.outputs.push(write_output(dir, "robustness.svg", svg.as_bytes())?);
    Ok(out)
}

/// Descending by value; equal values keep label order.
fn ranking(values: &[f64]) -> Vec<(usize, f64)> {
    let mut order: Vec<(usize, f64)> = values.iter().copied().enumerate().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1));
    order
}

fn cmd_perturb(dir: &Path, cfg: &RunConfig, matrices: &[ImportMatrix]) -> Result<Emitted> {
    let trials = cfg.null_trials.unwrap_or(DEFAULT_PERTURB_NULL_TRIALS);
    let (a, b, k, thr) = (cfg.import_scale, cfg.export_scale, cfg.iterations, cfg.drop_threshold);
    let scan = move |m: &ImportMatrix| perturbation_scan(m, &derive_model(m), a, b, k, thr);
    type YearScan =
        (i32, Result<PerturbationTable, ExperimentError>, Option<Result<NullBand, ExperimentError>>);
    let years: Vec<YearScan> = matrices
        .par_iter()
        .map(|m| {
            let table = scan(m);
            let band = table.is_ok().then(|| {
                let stat = |x: &ImportMatrix| scan(x).and_then(|t| max_vulnerability(&t)).map(|(_, v)| v);
                null_band(m, "max vulnerability", stat, trials, year_seed(cfg.seed, m.year()))
            });
            (m.year(), table, band)
        })
        .collect();

    let mut out = Emitted::new();
    let mut table_out = Table::new(&["year", "country", "power_percentage", "vulnerability_percentage"])?;
    let mut vuln = Table::new(&[
        "year",
        "country",
        "max_vulnerability",
        "null_mean",
        "null_min",
        "null_max",
        "null_q05",
        "null_q95",
        "significant",
    ])?;
    let mut power_rank = Table::new(&["year", "rank", "country", "power_percentage"])?;
    let mut vuln_rank = Table::new(&["year", "rank", "country", "vulnerability_percentage"])?;
    for (year, table, band) in years {
        let t = match table {
            Ok(t) => t,
            Err(e) => {
                out.failures.push(YearFailure::new(year, "perturb", e));
                continue;
            }
        };
        for (i, e) in t.row_errors.iter().enumerate() {
            if let Some(e) = e {
                out.failures.push(YearFailure::new(
                    year,
                    "perturb",
                    format!("shocking {}: {e}", t.labels[i]),
                ));
            }
        }
        for i in 0..t.n() {
            table_out.row([
                year.to_string(),
                t.labels[i].clone(),
                pct(t.power_percentage[i]),
                pct(t.vulnerability_percentage[i]),
            ])?;
        }
        for (rank, (i, v)) in ranking(&t.power_percentage).into_iter().enumerate() {
            power_rank.row([year.to_string(), (rank + 1).to_string(), t.labels[i].clone(), pct(v)])?;
        }
        for (rank, (i, v)) in ranking(&t.vulnerability_percentage).into_iter().enumerate() {
            vuln_rank.row([year.to_string(), (rank + 1).to_string(), t.labels[i].clone(), pct(v)])?;
        }
        let (country, max) = match max_vulnerability(&t) {
            Ok(v) => v,
            Err(e) => {
                out.failures.push(YearFailure::new(year, "perturb", e));
                continue;
            }
        };
        let band = match band {
            Some(Ok(b)) => {
                out.band_failures(year, &b);
                Some(b)
            }
            Some(Err(e)) => {
                out.failures.push(YearFailure::new(year, "vulnerability null band", e));
                None
            }
            None => None,
        };
        let mut row = vec![year.to_string(), country, pct(max)];
        row.extend(band_cells(band.as_ref(), max, pct));
        vuln.row(&row)?;
    }
    out.outputs.push(write_output(dir, "perturbation.csv", &table_out.into_bytes()?)?);
    out.outputs.push(write_output(dir, "vulnerability_timeseries.csv", &vuln.into_bytes()?)?);
    out.outputs.push(write_output(dir, "power_ranking.csv", &power_rank.into_bytes()?)?);
    out.outputs.push(write_output(dir, "vulnerability_ranking.csv", &vuln_rank.into_bytes()?)?);
    Ok(out)
}

fn cmd_links(dir: &Path, cfg: &RunConfig, matrices: &[ImportMatrix]) -> Result<Emitted> {
    let k = cfg.iterations;
    let years: Vec<(i32, Result<Vec<LinkImpact>, ExperimentError>)> = matrices
        .par_iter()
        .map(|m| (m.year(), link_scan(m, &derive_model(m), k, f64::NEG_INFINITY)))
        .collect();

    let cutoff = -100.0 * cfg.report_threshold;
    let mut out = Emitted::new();
    let mut ranked = Table::new(&["year", "rank", "country_a", "country_b", "impact", "weighted_impact"])?;
    let mut maxima = Table::new(&["year", "country_a", "country_b", "impact", "weighted_impact"])?;
    let mut plotted = Vec::new();
    for (year, rows) in years {
        let rows = match rows {
            Ok(r) => r,
            Err(e) => {
                out.failures.push(YearFailure::new(year, "links", e));
                continue;
            }
        };
        for (rank, l) in rows.iter().filter(|l| l.impact <= cutoff).enumerate() {
            ranked.row([
                year.to_string(),
                (rank + 1).to_string(),
                l.label_i.clone(),
                l.label_j.clone(),
                pct(l.impact),
                num(l.weighted_impact),
            ])?;
        }
        match rows.first() {
            Some(l) => {
                maxima.row([
                    year.to_string(),
                    l.label_i.clone(),
                    l.label_j.clone(),
                    pct(l.impact),
                    num(l.weighted_impact),
                ])?;
                plotted.push((f64::from(year), -l.impact));
            }
            None => out.failures.push(YearFailure::new(year, "links", "network has no links")),
        }
    }
    out.outputs.push(write_output(dir, "link_impacts.csv", &ranked.into_bytes()?)?);
    out.outputs.push(write_output(dir, "max_link_timeseries.csv", &maxima.into_bytes()?)?);
    let svg = line_chart(
        "Income removed by the most damaging link",
        "year",
        "% of world income",
        &[Series::new("max link impact", plotted, "#9c1f1f", false)],
    );
    out.outputs.push(write_output(dir, "link_impact.svg", svg.as_bytes())?);
    Ok(out)
}

struct MetricsYear {
    year: i32,
    nodes: usize,
    connectance: f64,
    deficit: (String, f64),
    surplus: (String, f64),
    total_income: Result<f64, ExperimentError>,
    robustness: Result<f64, ExperimentError>,
    max_link: Result<Option<f64>, ExperimentError>,
}

/// One year's inputs to the cross-year fits.
struct Sample {
    year: i32,
    connectance: f64,
    deficit: f64,
    robustness: Option<f64>,
    max_link: Option<f64>,
}

fn cmd_metrics(dir: &Path, cfg: &RunConfig, matrices: &[ImportMatrix]) -> Result<Emitted> {
    let (k, stop) = (cfg.iterations, cfg.stop_fraction);
    let years: Vec<MetricsYear> = matrices
        .par_iter()
        .map(|m| {
            let model = derive_model(m);
            MetricsYear {
                year: m.year(),
                nodes: m.n(),
                connectance: connectance(m),
                deficit: max_trade_deficit(m),
                surplus: max_trade_surplus(m),
                total_income: income(m, &model).map(|v| v.sum()).map_err(Into::into),
                robustness: mea(m, k, stop).map(|r| r.robustness),
                max_link: link_scan(m, &model, k, f64::NEG_INFINITY)
                    .map(|rows| rows.first().map(|l| l.impact)),
            }
        })
        .collect();

    let mut out = Emitted::new();
    let mut table = Table::new(&[
        "year",
        "nodes",
        "connectance",
        "max_deficit_country",
        "max_deficit",
        "max_surplus_country",
        "max_surplus",
        "total_income",
        "robustness",
        "max_link_impact",
    ])?;
    let mut samples: Vec<Sample> = Vec::new();
    for y in years {
        let mut ok = |r: Result<f64, ExperimentError>, stage: &str| match r {
            Ok(v) => Some(v),
            Err(e) => {
                out.failures.push(YearFailure::new(y.year, stage, e));
                None
            }
        };
        let total = ok(y.total_income, "income");
        let robustness = ok(y.robustness, "mea");
        let max_link = match y.max_link {
            Ok(v) => v,
            Err(e) => {
                out.failures.push(YearFailure::new(y.year, "links", e));
                None
            }
        };
        table.row([
            y.year.to_string(),
            y.nodes.to_string(),
            num(y.connectance),
            y.deficit.0.clone(),
            num(y.deficit.1),
            y.surplus.0.clone(),
            num(y.surplus.1),
            opt(total, num),
            opt(robustness, num),
            opt(max_link, pct),
        ])?;
        samples.push(Sample {
            year: y.year,
            connectance: y.connectance,
            deficit: y.deficit.1,
            robustness,
            max_link,
        });
    }

    let mut fits = Table::new(&[
        "fit",
        "model",
        "n",
        "year_from",
        "year_to",
        "intercept",
        "slope",
        "quadratic",
        "r_squared",
        "p_value",
        "status",
    ])?;
    type Pick = fn(&Sample) -> Option<(f64, f64)>;
    let specs: [(&str, &str, Pick); 3] = [
        ("robustness_vs_connectance", "linear", |s| s.robustness.map(|r| (s.connectance, r))),
        ("robustness_vs_max_deficit", "linear", |s| s.robustness.map(|r| (s.deficit, r))),
        ("max_link_impact_vs_connectance", "quadratic", |s| s.max_link.map(|l| (s.connectance, l))),
    ];
    for (name, model, pick) in specs {
        let used: Vec<(i32, (f64, f64))> =
            samples.iter().filter_map(|s| pick(s).map(|p| (s.year, p))).collect();
        let x: Vec<f64> = used.iter().map(|u| u.1 .0).collect();
        let y: Vec<f64> = used.iter().map(|u| u.1 .1).collect();
        let fit: Result<FitResult, FitError> =
            if model == "linear" { linear_fit(&x, &y) } else { quadratic_fit(&x, &y) };
        let (from, to) = match (used.first(), used.last()) {
            (Some(f), Some(l)) => (f.0.to_string(), l.0.to_string()),
            _ => (String::new(), String::new()),
        };
        let mut row = vec![name.to_string(), model.to_string(), used.len().to_string(), from, to];
        match fit {
            Ok(f) => {
                let c = |i: usize| f.coefficients.get(i).copied().map(num).unwrap_or_default();
                row.extend([c(0), c(1), c(2), num(f.r_squared), num(f.p_value), "ok".to_string()]);
            }
            Err(e) => {
                row.extend(vec![String::new(); 5]);
                row.push(format!("skipped: {e}"));
            }
        }
        fits.row(&row)?;
    }
    out.outputs.push(write_output(dir, "metrics_timeseries.csv", &table.into_bytes()?)?);
    out.outputs.push(write_output(dir, "fits.csv", &fits.into_bytes()?)?);
    Ok(out)
}
