use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use lili::clustering::{cluster, coleaf_counts, prune_single_group, TraversalOrder};
use lili::data::{generate_synthetic, load_csv, preprocess, Confounding, Dataset, Effect, Schema, SyntheticSpec};
use lili::estimate::{l1_ate_loss, overall_ate, pehe, ClusterSummary};
use lili::forest::{fit_forest, forest_estimate};
use lili::seed::derive_seed;
use lili::tolerance::{default_regime_grid, regime_classify, tolerance_threshold, ToleranceFn};
use lili::tree::TreeParams;
use lili::tune::{read_sweep_csv, select, sweep_with, write_sweep_csv, Selection};

use crate::config::{parse_effect, parse_grid, parse_schema, ConfigFile};
use crate::{Cli, Command, DataFlags, ForestFlags, RegimeArgs, RunArgs, SweepArgs, SynthArgs, SyntheticFlags};

/// Seed stream for synthetic data drawn from the master seed.
const DATA_STREAM: u64 = 1 << 32;
/// Seed stream for the shuffled traversal order.
const ORDER_STREAM: u64 = (1 << 32) + 1;

pub fn run(cli: Cli) -> Result<()> {
    let cfg = ConfigFile::load(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(args) => synth(&cfg, args),
        Command::Estimate(args) => estimate(&cfg, args),
        Command::Baseline(args) => baseline(&cfg, args),
        Command::Sweep(args) => run_sweep(&cfg, args),
        Command::Regime(args) => regime(&cfg, args),
    }
}

fn out_dir(cfg: &ConfigFile, flag: Option<PathBuf>) -> Result<PathBuf> {
    let dir = cfg.pick_or(flag, "out", PathBuf::from("."))?;
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn synthetic_spec(cfg: &ConfigFile, flags: SyntheticFlags) -> Result<Option<SyntheticSpec>> {
    let n = cfg.pick(flags.n, "n")?;
    let d = cfg.pick(flags.d, "d")?;
    let (n, d) = match (n, d) {
        (None, None) => return Ok(None),
        (Some(n), Some(d)) => (n, d),
        _ => bail!("a synthetic dataset needs both --n and --d"),
    };
    let effect = match cfg.pick(flags.effect, "effect")? {
        Some(s) => parse_effect(&s)?,
        None => Effect::Constant { tau: 2.0 },
    };
    let confounding = match cfg.pick_or(flags.confounding, "confounding", "none".to_string())?.as_str() {
        "none" => Confounding::None,
        "linear" => Confounding::Linear,
        other => bail!("confounding must be none or linear, got `{other}`"),
    };
    let spec = SyntheticSpec {
        n,
        d,
        effect,
        confounding,
        noise_sd: cfg.pick_or(flags.noise_sd, "noise-sd", 1.0)?,
        lipschitz_outcome: !cfg.switch(flags.non_lipschitz, "non-lipschitz")?,
        shared_value_features: cfg.pick_or(flags.shared_features, "shared-features", 0)?,
    };
    spec.validate()?;
    Ok(Some(spec))
}

#[derive(Serialize)]
struct Truth<'a> {
    ate: f64,
    seed: u64,
    spec: &'a SyntheticSpec,
}

fn synth(cfg: &ConfigFile, args: SynthArgs) -> Result<()> {
    let spec = synthetic_spec(cfg, args.synthetic)?.ok_or_else(|| anyhow!("synth needs --n and --d"))?;
    let seed = cfg.pick_or(args.seed, "seed", 0)?;
    let data = generate_synthetic(&spec, derive_seed(seed, DATA_STREAM))?;
    let dir = out_dir(cfg, args.out)?;
    data.dataset.write_csv(&dir.join("data.csv"))?;
    write_json(&dir.join("truth.json"), &Truth { ate: data.true_ate, seed, spec: &spec })?;
    println!("true ate {}", data.true_ate);
    Ok(())
}

/// Loads (or generates) the dataset and applies preprocessing.
fn dataset(cfg: &ConfigFile, flags: DataFlags, seed: u64) -> Result<Dataset> {
    let path: Option<PathBuf> = cfg.pick(flags.data, "data")?;
    let spec = synthetic_spec(cfg, flags.synthetic)?;
    let raw = match (path, spec) {
        (Some(_), Some(_)) => bail!("--data and a synthetic spec are mutually exclusive"),
        (None, None) => bail!("no dataset: pass --data or a synthetic spec (--n, --d)"),
        (Some(path), None) => {
            let schema = match cfg.pick(flags.schema, "schema")? {
                Some(s) => parse_schema(&s)?,
                None => Schema::default(),
            };
            load_csv(&path, &schema).with_context(|| format!("loading {}", path.display()))?
        }
        (None, Some(spec)) => generate_synthetic(&spec, derive_seed(seed, DATA_STREAM))?.dataset,
    };
    Ok(preprocess(&raw))
}

struct ForestSettings {
    params: TreeParams,
    k: usize,
    tolerance: ToleranceFn,
    order_name: String,
    seed: u64,
}

impl ForestSettings {
    fn resolve(cfg: &ConfigFile, flags: ForestFlags) -> Result<Self> {
        let defaults = TreeParams::default();
        let params = TreeParams {
            alpha: cfg.pick(flags.alpha, "alpha")?,
            min_leaf: cfg.pick_or(flags.min_leaf, "min-leaf", defaults.min_leaf)?,
            pi: cfg.pick_or(flags.pi, "pi", defaults.pi)?,
            subsample_ratio: cfg.pick_or(flags.subsample, "subsample", defaults.subsample_ratio)?,
            honesty: cfg.switch(flags.honesty, "honesty")?,
        };
        params.validate()?;
        let tolerance = cfg.pick_or(flags.tolerance, "tolerance", "sqrt".to_string())?.parse()?;
        let order_name = cfg.pick_or(flags.order, "order", "row".to_string())?;
        if order_name != "row" && order_name != "seeded-shuffle" {
            bail!("order must be row or seeded-shuffle, got `{order_name}`");
        }
        Ok(Self {
            params,
            k: cfg.pick_or(flags.k, "k", 50)?,
            tolerance,
            order_name,
            seed: cfg.pick_or(flags.seed, "seed", 0)?,
        })
    }

    fn order(&self) -> TraversalOrder {
        if self.order_name == "row" {
            TraversalOrder::Row
        } else {
            TraversalOrder::SeededShuffle(derive_seed(self.seed, ORDER_STREAM))
        }
    }

    fn effective_alpha(&self, n: usize) -> f64 {
        self.params
            .alpha
            .unwrap_or(self.params.min_leaf as f64 / self.params.subsample_size(n) as f64)
    }
}

#[derive(Serialize)]
struct Summary {
    method: &'static str,
    n: usize,
    d: usize,
    k: usize,
    min_leaf: usize,
    alpha: f64,
    pi: f64,
    subsample: f64,
    honesty: bool,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    tolerance: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    order: Option<String>,
    overall_ate: f64,
    available_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    cluster_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    true_ate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    l1_ate_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pehe: Option<f64>,
}

impl Summary {
    fn new(method: &'static str, ds: &Dataset, s: &ForestSettings) -> Self {
        Self {
            method,
            n: ds.n(),
            d: ds.d(),
            k: s.k,
            min_leaf: s.params.min_leaf,
            alpha: s.effective_alpha(ds.n()),
            pi: s.params.pi,
            subsample: s.params.subsample_ratio,
            honesty: s.params.honesty,
            seed: s.seed,
            tolerance: None,
            threshold: None,
            order: None,
            overall_ate: 0.0,
            available_fraction: 0.0,
            cluster_count: None,
            true_ate: None,
            l1_ate_loss: None,
            pehe: None,
        }
    }
}

#[derive(Serialize)]
struct ReportFile<'a> {
    summary: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    clusters: Option<&'a [ClusterSummary]>,
}

fn true_ate(ds: &Dataset) -> Result<Option<f64>> {
    if ds.counterfactual().is_none() {
        return Ok(None);
    }
    let (y1, y0) = ds.potential_outcomes()?;
    Ok(Some(y1.iter().zip(&y0).map(|(a, b)| a - b).sum::<f64>() / y1.len() as f64))
}

fn estimate(cfg: &ConfigFile, args: RunArgs) -> Result<()> {
    let settings = ForestSettings::resolve(cfg, args.forest)?;
    let ds = dataset(cfg, args.data, settings.seed)?;
    let export = cfg.pick(args.export_counts, "export-counts")?;
    let dir = out_dir(cfg, args.out)?;

    let threshold = tolerance_threshold(settings.k, &settings.tolerance)?;
    let forest = fit_forest(&ds, settings.k, &settings.params, settings.seed)?;
    let counts = coleaf_counts(&forest, &ds)?;
    match export.as_deref() {
        None => {}
        Some("dense") => counts.write_dense(&dir.join("coleaf_counts.csv"))?,
        Some("triplets") => counts.write_triplets(&dir.join("coleaf_counts.csv"))?,
        Some(other) => bail!("export-counts must be dense or triplets, got `{other}`"),
    }
    let raw = cluster(&counts, threshold, &settings.order().permutation(ds.n()))?;
    let clustering = prune_single_group(raw, ds.treatment());
    if clustering.is_empty() {
        bail!(
            "no cluster holds both treated and control instances; \
             try a larger --min-leaf or a smaller --k"
        );
    }
    let (ate, mut report) = overall_ate(&clustering, &ds)?;
    report.attach_losses(&ds)?;

    let mut summary = Summary::new("lili", &ds, &settings);
    summary.tolerance = Some(settings.tolerance.to_string());
    summary.threshold = Some(threshold);
    summary.order = Some(settings.order_name.clone());
    summary.overall_ate = ate;
    summary.available_fraction = report.available_fraction;
    summary.cluster_count = Some(report.cluster_count);
    summary.true_ate = true_ate(&ds)?;
    summary.l1_ate_loss = report.l1_ate_loss;
    summary.pehe = report.pehe;
    write_json(
        &dir.join("report.json"),
        &ReportFile {
            summary,
            clusters: Some(&report.per_cluster),
        },
    )?;

    let mut w = csv::Writer::from_path(dir.join("clusters.csv"))?;
    w.write_record(["id", "size", "treated", "control", "cate", "weight"])?;
    for c in &report.per_cluster {
        w.serialize((c.id, c.size, c.treated, c.control, c.cate, c.weight))?;
    }
    w.flush()?;

    let membership = clustering.membership();
    let mut w = csv::Writer::from_path(dir.join("ite.csv"))?;
    w.write_record(["index", "ite", "cluster"])?;
    for (i, ite) in report.per_instance_ite.iter().enumerate() {
        w.serialize((i, ite, membership[i]))?;
    }
    w.flush()?;

    println!(
        "ate {ate} clusters {} available {}",
        report.cluster_count, report.available_fraction
    );
    Ok(())
}

fn baseline(cfg: &ConfigFile, args: RunArgs) -> Result<()> {
    let settings = ForestSettings::resolve(cfg, args.forest)?;
    let ds = dataset(cfg, args.data, settings.seed)?;
    let dir = out_dir(cfg, args.out)?;
    let forest = fit_forest(&ds, settings.k, &settings.params, settings.seed)?;
    let est = forest_estimate(&forest, &ds)?;
    let filled: Vec<f64> = est.per_instance_ite.iter().map(|v| v.unwrap_or(est.ate)).collect();
    let defined = est.per_instance_ite.iter().filter(|v| v.is_some()).count();

    let mut summary = Summary::new("forest", &ds, &settings);
    summary.overall_ate = est.ate;
    summary.available_fraction = defined as f64 / ds.n() as f64;
    summary.true_ate = true_ate(&ds)?;
    if let Some(truth) = summary.true_ate {
        let (y1, y0) = ds.potential_outcomes()?;
        summary.l1_ate_loss = Some(l1_ate_loss(est.ate, truth));
        summary.pehe = Some(pehe(&filled, &y1, &y0)?);
    }
    write_json(&dir.join("report.json"), &ReportFile { summary, clusters: None })?;

    let mut w = csv::Writer::from_path(dir.join("ite.csv"))?;
    w.write_record(["index", "ite", "defined"])?;
    for (i, (v, raw)) in filled.iter().zip(&est.per_instance_ite).enumerate() {
        w.serialize((i, v, raw.is_some()))?;
    }
    w.flush()?;
    println!("ate {} defined {defined}", est.ate);
    Ok(())
}

#[derive(Serialize)]
struct SelectionFile {
    min_available: f64,
    selected: Option<Selection>,
}

fn run_sweep(cfg: &ConfigFile, args: SweepArgs) -> Result<()> {
    let min_available = cfg.pick_or(args.min_available, "min-available", 0.8)?;
    if !(min_available > 0.0 && min_available <= 1.0) {
        bail!("min-available must lie in (0, 1]");
    }
    let dir = out_dir(cfg, args.out)?;
    let records = match cfg.pick(args.records, "records")? {
        Some(path) => read_sweep_csv(&path).with_context(|| format!("reading {}", path.display()))?,
        None => {
            let l_grid = parse_grid(
                &cfg.pick(args.l_grid, "l-grid")?
                    .ok_or_else(|| anyhow!("sweep needs --l-grid"))?,
            )?;
            let k_grid = parse_grid(&cfg.pick_or(args.k_grid, "k-grid", "50".to_string())?)?;
            let settings = ForestSettings::resolve(cfg, args.forest)?;
            let ds = dataset(cfg, args.data, settings.seed)?;
            let records = sweep_with(
                &ds,
                &l_grid,
                &k_grid,
                &settings.tolerance,
                settings.seed,
                &settings.params,
                settings.order(),
            )?;
            write_sweep_csv(&records, &dir.join("sweep.csv"), cfg.switch(args.timing, "timing")?)?;
            records
        }
    };
    let selected = select(&records, min_available);
    match &selected {
        Some(s) if s.warning => eprintln!(
            "warning: no configuration reaches available fraction {min_available}; \
             chose the most available one"
        ),
        Some(_) => {}
        None => eprintln!("warning: no grid point produced an estimate"),
    }
    if let Some(s) = &selected {
        println!("selected l {} k {}", s.l, s.k);
    }
    write_json(&dir.join("selection.json"), &SelectionFile { min_available, selected })
}

#[derive(Serialize)]
struct RegimeFile {
    tolerance: String,
    p: f64,
    k_grid: Vec<usize>,
    regime: String,
}

fn regime(cfg: &ConfigFile, args: RegimeArgs) -> Result<()> {
    let tolerance: ToleranceFn = cfg.pick_or(args.tolerance, "tolerance", "sqrt".to_string())?.parse()?;
    let p = cfg.pick_or(args.p, "p", 0.9)?;
    if !(p > 0.0 && p < 1.0) {
        bail!("p must lie in (0, 1)");
    }
    let k_grid = match cfg.pick(args.k_grid, "k-grid")? {
        Some(s) => parse_grid(&s)?,
        None => default_regime_grid(),
    };
    if k_grid.len() < 3 || k_grid.windows(2).any(|w| w[0] >= w[1]) {
        bail!("k-grid must be increasing with at least three values");
    }
    let regime = regime_classify(&tolerance, p, &k_grid);
    println!("{regime}");
    if let Some(out) = cfg.pick(args.out, "out")? {
        let dir = out_dir(cfg, Some(out))?;
        write_json(
            &dir.join("regime.json"),
            &RegimeFile {
                tolerance: tolerance.to_string(),
                p,
                k_grid,
                regime: regime.to_string(),
            },
        )?;
    }
    Ok(())
}
