//! Command implementations: configuration resolution, computation and
//! output files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use lockstack::baselines::Method;
use lockstack::experiments::{
    overfit_gaps, run_demo, run_nonnested, run_overfit, run_sample, DemoConfig, NonnestedConfig, OverfitConfig,
    SampleConfig, SampleSource,
};
use lockstack::grid::GridDensity;
use lockstack::io;
use lockstack::models::ScenarioConfig;
use lockstack::numeric::{argmax, mean, variance};
use lockstack::optimizer::{fit_locking, fit_quacking, LockingOptions, QuackingOptions};
use lockstack::pooling::{ObjectiveCoefficients, DEFAULT_ALPHA};
use lockstack::predictive::{ScoreOptions, ScoreTable};
use lockstack::sampler::ModeBoundReport;

use crate::manifest::RunManifest;
use crate::svg::{boxplot, line_panels, Panel, Series};
use crate::{Cli, Command, Global, DEFAULT_SEED, EXIT_INVARIANT, EXIT_PARTIAL};

#[derive(Debug, Args)]
pub struct NonnestedArgs {
    /// Scenario preset, 1 to 4.
    #[arg(long, default_value_t = 1)]
    pub scenario: u8,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Posterior draws per model.
    #[arg(long, short = 'S')]
    pub draws: Option<usize>,
    /// Nelder–Mead starts for quacking.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Nodes of the normalization grid.
    #[arg(long)]
    pub grid_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OverfitArgs {
    /// Comma-separated numbers of covariates.
    #[arg(long, value_delimiter = ',')]
    pub p_list: Option<Vec<usize>>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, short = 'S')]
    pub draws: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Comma-separated pooling weights.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub weights: Option<Vec<f64>>,
    /// Comma-separated superposition phases (radians).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub hi: Option<f64>,
    #[arg(long)]
    pub grid_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Fit the two normal models to this scenario instead of using the
    /// configured Gaussian components.
    #[arg(long)]
    pub scenario: Option<u8>,
    #[arg(long)]
    pub replication: Option<usize>,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub grid_size: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Locking,
    Quacking,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Evaluation-table CSV (`model_id,draw_id,point_id,log_lik,dlog_lik,d2log_lik`).
    #[arg(long)]
    pub table: std::path::PathBuf,
    #[arg(long, value_enum)]
    pub method: Option<FitMethod>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub method: FitMethod,
    pub alpha: f64,
    pub restarts: usize,
    pub seed: u64,
    pub score: ScoreOptions,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            method: FitMethod::Locking,
            alpha: DEFAULT_ALPHA,
            restarts: 10,
            seed: DEFAULT_SEED,
            score: ScoreOptions::default(),
        }
    }
}

/// What a command found beyond hard errors.
#[derive(Debug, Default)]
struct Outcome {
    warnings: Vec<String>,
    violations: Vec<String>,
    failures: Vec<String>,
}

impl Outcome {
    fn exit_code(&self) -> u8 {
        for w in &self.warnings {
            eprintln!("warning: {w}");
        }
        for f in &self.failures {
            eprintln!("error: {f}");
        }
        for v in &self.violations {
            eprintln!("invariant violated: {v}");
        }
        if !self.violations.is_empty() {
            EXIT_INVARIANT
        } else if !self.failures.is_empty() {
            EXIT_PARTIAL
        } else {
            0
        }
    }
}

/// Deep-merge `patch` into `base`; objects merge key by key, anything else
/// replaces.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

/// Drop nulls so unset flags do not override anything.
fn prune(v: Value) -> Value {
    match v {
        Value::Object(m) => Value::Object(
            m.into_iter()
                .filter(|(_, v)| !v.is_null())
                .map(|(k, v)| (k, prune(v)))
                .filter(|(_, v)| !matches!(v, Value::Object(m) if m.is_empty()))
                .collect(),
        ),
        other => other,
    }
}

/// Defaults, then the config file, then command-line flags.
fn resolve<T: Serialize + DeserializeOwned>(base: T, global: &Global, flags: Value) -> Result<T> {
    let mut value = serde_json::to_value(base)?;
    if let Some(path) = &global.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: toml::Value = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        merge(&mut value, serde_json::to_value(file)?);
    }
    merge(&mut value, prune(flags));
    serde_json::from_value(value).context("invalid configuration")
}

struct Output<'a> {
    dir: &'a Path,
    manifest: RunManifest,
}

impl Output<'_> {
    fn file(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        Ok(BufWriter::new(
            File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        ))
    }

    fn tag(&self) -> String {
        self.manifest.tag()
    }

    fn text(&self, name: &str, body: &str) -> Result<()> {
        let mut f = self.file(name)?;
        f.write_all(body.as_bytes())?;
        f.flush()?;
        Ok(())
    }

    fn json(&self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.text(name, &body)
    }

    /// Plain numeric CSV with the manifest comment.
    fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut body = format!("# {}\n{}\n", self.tag(), header.join(","));
        for r in rows {
            body.push_str(&r.join(","));
            body.push('\n');
        }
        self.text(name, &body)
    }
}

pub fn run(cli: &Cli) -> Result<u8> {
    let g = &cli.global;
    let seed = g.seed;
    let (name, config): (&str, Value) = match &cli.command {
        Command::Nonnested(a) => {
            let base = NonnestedConfig {
                scenario: ScenarioConfig::preset(a.scenario)?,
                ..Default::default()
            };
            let flags = json!({
                "scenario": {
                    "replications": a.replications,
                    "n_train": a.n_train,
                    "n_test": a.n_test,
                    "seed": seed,
                },
                "draws": a.draws,
                "quack_restarts": a.restarts,
                "grid_size": a.grid_size,
                "score": { "loo": g.loo_override() },
            });
            let cfg: NonnestedConfig = resolve(base, g, flags)?;
            cfg.validate()?;
            ("nonnested", json!({ "scenario_id": a.scenario, "settings": cfg }))
        }
        Command::Overfit(a) => {
            let base = OverfitConfig {
                seed: DEFAULT_SEED,
                ..Default::default()
            };
            let flags = json!({
                "p_list": a.p_list,
                "iterations": a.iterations,
                "n": a.n,
                "draws": a.draws,
                "warmup": a.warmup,
                "seed": seed,
            });
            let cfg: OverfitConfig = resolve(base, g, flags)?;
            cfg.validate()?;
            ("overfit", serde_json::to_value(cfg)?)
        }
        Command::DemoOperators(a) => {
            let flags = json!({
                "weights": a.weights,
                "alphas": a.alphas,
                "lo": a.lo,
                "hi": a.hi,
                "grid_size": a.grid_size,
            });
            let cfg: DemoConfig = resolve(DemoConfig::default(), g, flags)?;
            cfg.validate()?;
            ("demo-operators", serde_json::to_value(cfg)?)
        }
        Command::SampleLocked(a) => {
            let mut base = SampleConfig::default();
            if let Some(id) = a.scenario {
                base.model = SampleSource::Scenario {
                    scenario: id,
                    replication: a.replication.unwrap_or(0),
                    draws: lockstack::experiments::DEFAULT_DRAWS,
                };
            }
            let flags = json!({
                "n_samples": a.n_samples,
                "grid_size": a.grid_size,
                "seed": seed,
            });
            let cfg: SampleConfig = resolve(base, g, flags)?;
            cfg.validate()?;
            ("sample-locked", serde_json::to_value(cfg)?)
        }
        Command::Score(a) => {
            let flags = json!({
                "method": a.method,
                "alpha": a.alpha,
                "restarts": a.restarts,
                "seed": seed,
                "score": { "loo": g.loo_override() },
            });
            let cfg: ScoreConfig = resolve(ScoreConfig::default(), g, flags)?;
            if !(cfg.alpha >= 1.0) {
                bail!("alpha must be >= 1, got {}", cfg.alpha);
            }
            if !a.table.exists() {
                bail!("evaluation table {} does not exist", a.table.display());
            }
            ("score", json!({ "table": a.table, "settings": cfg }))
        }
    };

    let root_seed = root_seed_of(&config);
    let manifest = RunManifest::start(name, config.clone(), root_seed);
    if g.dry_run {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "command": name,
                "config": config,
                "root_seed": root_seed,
                "manifest_hash": manifest.hash,
            }))?
        );
        return Ok(0);
    }

    fs::create_dir_all(&g.out).with_context(|| format!("creating {}", g.out.display()))?;
    let mut out = Output { dir: &g.out, manifest };
    let clock = Instant::now();
    let outcome = match &cli.command {
        Command::Nonnested(a) => nonnested(&out, a.scenario, serde_json::from_value(config["settings"].clone())?)?,
        Command::Overfit(_) => overfit(&out, serde_json::from_value(config)?)?,
        Command::DemoOperators(_) => demo(&out, serde_json::from_value(config)?)?,
        Command::SampleLocked(_) => sample(&out, serde_json::from_value(config)?)?,
        Command::Score(a) => score(&out, &a.table, serde_json::from_value(config["settings"].clone())?)?,
    };
    out.manifest.finish(clock.elapsed().as_secs_f64());
    out.json("manifest.json", &out.manifest)?;
    eprintln!("wrote results to {} ({})", g.out.display(), out.tag());
    Ok(outcome.exit_code())
}

fn root_seed_of(config: &Value) -> u64 {
    [
        &config["settings"]["scenario"]["seed"],
        &config["settings"]["seed"],
        &config["seed"],
    ]
    .into_iter()
    .find_map(Value::as_u64)
    .unwrap_or(DEFAULT_SEED)
}

fn fmt(v: f64) -> String {
    io::format_float(v)
}

fn nonnested(out: &Output, scenario: u8, cfg: NonnestedConfig) -> Result<Outcome> {
    let mut outcome = Outcome::default();
    let mut ok = Vec::new();
    for (r, res) in run_nonnested(&cfg).into_iter().enumerate() {
        match res {
            Ok(x) => ok.push(x),
            Err(e) => outcome.failures.push(format!("replication {r}: {e}")),
        }
    }
    io::write_results(out.file("results.csv")?, Some(&out.tag()), scenario, &ok)?;

    let mut summary = Vec::new();
    let mut w1_groups = Vec::new();
    let mut score_groups = Vec::new();
    for m in Method::ALL {
        let w1: Vec<f64> = ok.iter().map(|r| r.report(m).weights[0]).collect();
        let ls: Vec<f64> = ok.iter().map(|r| r.report(m).test_log_score).collect();
        let hs: Vec<f64> = ok.iter().map(|r| r.report(m).test_hyva_score).collect();
        let sd = |v: &[f64]| if v.len() > 1 { variance(v).sqrt() } else { 0.0 };
        if !ok.is_empty() {
            summary.push(vec![
                m.name().to_string(),
                fmt(mean(&w1)),
                fmt(sd(&w1)),
                fmt(mean(&ls)),
                fmt(sd(&ls)),
                fmt(mean(&hs)),
                fmt(sd(&hs)),
            ]);
        }
        w1_groups.push((m.name().to_string(), w1));
        score_groups.push((m.name().to_string(), ls));
    }
    out.csv(
        "weights_summary.csv",
        &[
            "method",
            "mean_w1",
            "sd_w1",
            "mean_test_log_score",
            "sd_test_log_score",
            "mean_test_hyva_score",
            "sd_test_hyva_score",
        ],
        &summary,
    )?;
    let tag = out.tag();
    out.text(
        "fig_weights.svg",
        &boxplot(&tag, &format!("Scenario {scenario}: weight on model 1"), "w1", &w1_groups),
    )?;
    out.text(
        "fig_log_scores.svg",
        &boxplot(&tag, &format!("Scenario {scenario}: test log score"), "log score", &score_groups),
    )?;

    let mut diagnostics = Vec::new();
    for r in &ok {
        if r.flagged_cells > 0 {
            outcome.warnings.push(format!(
                "replication {}: {} cells with Pareto k above threshold",
                r.replication, r.flagged_cells
            ));
        }
        if !r.locking_fit.converged {
            outcome
                .warnings
                .push(format!("replication {}: locking fit did not converge", r.replication));
        }
        if !r.quacking_fit.converged {
            outcome
                .warnings
                .push(format!("replication {}: quacking fit did not converge", r.replication));
        }
        if r.max_edge_ratio > 1e-8 {
            outcome.warnings.push(format!(
                "replication {}: normalization grid truncates mass (edge ratio {:.2e})",
                r.replication, r.max_edge_ratio
            ));
        }
        let ml = argmax(r.report(Method::MlSelect).weights.as_slice());
        if argmax(r.report(Method::Bma).weights.as_slice()) != ml {
            outcome.violations.push(format!(
                "replication {}: BMA mode disagrees with marginal-likelihood selection",
                r.replication
            ));
        }
        for rep in &r.reports {
            if !(rep.test_log_score.is_finite() && rep.test_hyva_score.is_finite()) {
                outcome.violations.push(format!(
                    "replication {}: {} produced a non-finite test score",
                    r.replication, rep.method
                ));
            }
        }
        diagnostics.push(json!({
            "replication": r.replication,
            "flagged_cells": r.flagged_cells,
            "loo_max_pareto_k": r.loo.max_pareto_k,
            "locking": { "converged": r.locking_fit.converged, "iterations": r.locking_fit.iterations, "gradient_norm": r.locking_fit.gradient_norm },
            "quacking": { "converged": r.quacking_fit.converged, "iterations": r.quacking_fit.iterations, "gradient_norm": r.quacking_fit.gradient_norm, "params": r.quacking_fit.weights },
            "max_edge_ratio": r.max_edge_ratio,
        }));
    }
    out.json("diagnostics.json", &json!({ "manifest": out.manifest.hash, "replications": diagnostics }))?;
    Ok(outcome)
}

fn overfit(out: &Output, cfg: OverfitConfig) -> Result<Outcome> {
    let mut outcome = Outcome::default();
    let rows = run_overfit(&cfg)?;
    io::write_overfit(out.file("overfit.csv")?, Some(&out.tag()), &rows)?;
    for r in &rows {
        if !(r.insample_lpd >= r.loo_lpd) {
            outcome.violations.push(format!(
                "p={} iter={}: in-sample log score {} below leave-one-out {}",
                r.p, r.iter, r.insample_lpd, r.loo_lpd
            ));
        }
    }
    let gaps = overfit_gaps(&rows);
    let means = |p: usize, f: fn(&lockstack::experiments::OverfitRow) -> f64| {
        mean(&rows.iter().filter(|r| r.p == p).map(f).collect::<Vec<_>>())
    };
    let summary: Vec<Vec<String>> = gaps
        .iter()
        .map(|&(p, lg, hg)| {
            vec![
                p.to_string(),
                fmt(means(p, |r| r.insample_lpd)),
                fmt(means(p, |r| r.loo_lpd)),
                fmt(means(p, |r| r.insample_hyva)),
                fmt(means(p, |r| r.loo_hyva)),
                fmt(lg),
                fmt(hg),
            ]
        })
        .collect();
    out.csv(
        "overfit_summary.csv",
        &[
            "p",
            "mean_insample_lpd",
            "mean_loo_lpd",
            "mean_insample_hyva",
            "mean_loo_hyva",
            "lpd_gap",
            "abs_hyva_gap",
        ],
        &summary,
    )?;
    let series = |f: fn(&lockstack::experiments::OverfitRow) -> f64| -> Vec<(f64, f64)> {
        gaps.iter().map(|&(p, _, _)| (p as f64, means(p, f))).collect()
    };
    let panels = [
        Panel {
            title: "Log score".into(),
            xlabel: "number of covariates p".into(),
            ylabel: "mean total log predictive density".into(),
            series: vec![
                Series::new("in-sample", series(|r| r.insample_lpd)),
                Series::new("leave-one-out", series(|r| r.loo_lpd)).dashed(),
            ],
        },
        Panel {
            title: "Hyvärinen score".into(),
            xlabel: "number of covariates p".into(),
            ylabel: "mean total Hyvärinen score".into(),
            series: vec![
                Series::new("in-sample", series(|r| r.insample_hyva)),
                Series::new("leave-one-out", series(|r| r.loo_hyva)).dashed(),
            ],
        },
    ];
    out.text("overfit.svg", &line_panels(&out.tag(), &panels))?;
    Ok(outcome)
}

fn grid_points(g: &GridDensity) -> Vec<(f64, f64)> {
    g.xs().into_iter().zip(g.densities()).collect()
}

fn demo(out: &Output, cfg: DemoConfig) -> Result<Outcome> {
    let mut outcome = Outcome::default();
    let res = run_demo(&cfg)?;
    let names: Vec<String> = (1..=res.components.len()).map(|j| format!("component_{j}")).collect();
    let mut grids: Vec<(&str, &GridDensity)> = names.iter().map(String::as_str).zip(&res.components).collect();
    grids.extend([
        ("mixture", &res.mixture),
        ("locking", &res.locking),
        ("superposition", &res.superposition),
    ]);
    io::write_grids(out.file("grids.csv")?, Some(&out.tag()), &grids)?;
    let alphas: Vec<String> = cfg.alphas.iter().map(|a| format!("{a:.3}")).collect();
    let mut series: Vec<Series> = names
        .iter()
        .zip(&res.components)
        .map(|(n, g)| Series::new(n.clone(), grid_points(g)).dashed())
        .collect();
    series.push(Series::new("mixture", grid_points(&res.mixture)));
    series.push(Series::new("locking", grid_points(&res.locking)));
    series.push(Series::new(
        format!("superposition ({})", alphas.join(", ")),
        grid_points(&res.superposition),
    ));
    let panel = Panel {
        title: "Pooling operators".into(),
        xlabel: "y".into(),
        ylabel: "density".into(),
        series,
    };
    out.text("demo.svg", &line_panels(&out.tag(), &[panel]))?;
    match &res.mode_bound {
        ModeBoundReport::Skipped { reason } => outcome.warnings.push(format!("mode bound check skipped: {reason}")),
        report if report.holds() == Some(false) => {
            outcome.violations.push(format!("locked mode outside the component modes: {report:?}"))
        }
        _ => {}
    }
    out.json("mode_bound.json", &json!({ "manifest": out.manifest.hash, "report": res.mode_bound }))?;
    Ok(outcome)
}

fn sample(out: &Output, cfg: SampleConfig) -> Result<Outcome> {
    let mut outcome = Outcome::default();
    let res = run_sample(&cfg)?;
    io::write_samples(out.file("samples.csv")?, Some(&out.tag()), &res.sample)?;
    let names: Vec<String> = (1..=res.components.len()).map(|j| format!("component_{j}")).collect();
    let mut grids: Vec<(&str, &GridDensity)> = vec![("kde", &res.kde)];
    grids.extend(names.iter().map(String::as_str).zip(&res.components));
    if let Some(t) = &res.truth {
        grids.push(("truth", t));
    }
    io::write_grids(out.file("density.csv")?, Some(&out.tag()), &grids)?;

    let moments = res.sample.moments();
    let flagged = res.sample.flagged();
    if flagged {
        outcome.warnings.push(format!(
            "Pareto k = {:.3} exceeds 0.7; importance-sampling estimates are unreliable",
            res.sample.pareto_k.unwrap_or(f64::NAN)
        ));
    }
    out.json(
        "diagnostics.json",
        &json!({
            "manifest": out.manifest.hash,
            "pareto_k": res.sample.pareto_k,
            "ess": res.sample.ess,
            "flagged": flagged,
            "weights": res.weights,
            "moments": moments,
            "exact_moments": res.exact_moments.map(|(m, v)| json!({ "mean": m, "var": v })),
        }),
    )?;
    let mut series = vec![Series::new("locked (weighted KDE)", grid_points(&res.kde))];
    series.extend(
        names
            .iter()
            .zip(&res.components)
            .map(|(n, g)| Series::new(n.clone(), grid_points(g)).dashed()),
    );
    if let Some(t) = &res.truth {
        series.push(Series::new("data-generating", grid_points(t)));
    }
    let panel = Panel {
        title: format!("Locked predictive (ESS {:.0} of {})", res.sample.ess, res.sample.len()),
        xlabel: "y".into(),
        ylabel: "density".into(),
        series,
    };
    out.text("sampled.svg", &line_panels(&out.tag(), &[panel]))?;
    Ok(outcome)
}

fn score(out: &Output, table: &Path, cfg: ScoreConfig) -> Result<Outcome> {
    let mut outcome = Outcome::default();
    let file = File::open(table).with_context(|| format!("opening {}", table.display()))?;
    let (ids, tensor) = io::read_eval_table(std::io::BufReader::new(file))?;
    let scores = ScoreTable::from_tensor(&tensor, cfg.score);
    let coeffs = ObjectiveCoefficients::from_table(&scores);
    let fit = match cfg.method {
        FitMethod::Locking => fit_locking(
            &coeffs,
            &LockingOptions {
                alpha: cfg.alpha,
                ..Default::default()
            },
        )?,
        FitMethod::Quacking => fit_quacking(
            &coeffs,
            &QuackingOptions {
                alpha: cfg.alpha,
                restarts: cfg.restarts,
                seed: cfg.seed,
                ..Default::default()
            },
        )?,
    };
    if !fit.converged {
        outcome.warnings.push(format!(
            "weight fit did not converge (gradient norm {:.3e})",
            fit.gradient_norm
        ));
    }
    if scores.flagged() > 0 {
        outcome
            .warnings
            .push(format!("{} cells with Pareto k above threshold", scores.flagged()));
    }
    out.json("fit.json", &json!({ "models": ids, "fit": fit }))?;
    let totals_h = scores.total_hyva();
    let totals_l = scores.total_log_density();
    let rows: Vec<Vec<String>> = ids
        .iter()
        .enumerate()
        .map(|(k, id)| {
            let flagged = (0..scores.points).filter(|&i| scores.get(k, i).flagged()).count();
            vec![id.clone(), fmt(totals_h[k]), fmt(totals_l[k]), flagged.to_string()]
        })
        .collect();
    out.csv(
        "model_scores.csv",
        &["model_id", "total_hyva", "total_log_density", "flagged_cells"],
        &rows,
    )?;
    Ok(outcome)
}
