//! One function per subcommand. Each reads its inputs through the recorder,
//! so checksums, stage timings and outputs all land in the manifest.

use std::fs::File;
use std::io::{BufReader, Cursor};
use std::path::{Path, PathBuf};

use activenet::graph::{build_subgraph, DirectedGraph, GraphError, GraphView};
use activenet::heavytail::{fit_report, Bootstrap, FitReport, TailSample};
use activenet::ingest::{ingest_tweets, parse_edges, ActivityTable, IngestStats};
use activenet::metrics::{
    compute_node_metrics, summarize, sweep_graph, write_sweep_csv, GraphSummary, MetricColumns,
    NodeMetricOptions,
};
use activenet::regress::{
    choose, describe, fit_polynomial, fit_tobit, grid_over, prediction_band, select_model,
    Describe, ModelChoice, TobitModel, UnivariateFit,
};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::manifest::{sha256_hex, Recorder};

/// Bumped whenever the cache layout or graph construction changes.
const CACHE_VERSION: &str = "graph-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ingest,
    Sweep,
    Analyze,
    FitDist,
    Regress,
    ExportEdges,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Sweep => "sweep",
            Command::Analyze => "analyze",
            Command::FitDist => "fit-dist",
            Command::Regress => "regress",
            Command::ExportEdges => "export-edges",
        }
    }
}

pub fn run(cmd: Command, cfg: &PipelineConfig, rec: &mut Recorder) -> Result<()> {
    match cmd {
        Command::Ingest => ingest(cfg, rec),
        Command::Sweep => sweep(cfg, rec),
        Command::Analyze => analyze(cfg, rec),
        Command::FitDist => fit_dist(cfg, rec),
        Command::Regress => regress(cfg, rec),
        Command::ExportEdges => export_edges(cfg, rec),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(|f| BufReader::with_capacity(1 << 20, f))
        .map_err(|e| CliError::at(path, e))
}

#[derive(Serialize)]
struct IngestReport<'a> {
    keyword: &'a str,
    lang: &'a str,
    strict_lang: bool,
    #[serde(flatten)]
    stats: IngestStats,
    users: usize,
}

fn read_tweets(cfg: &PipelineConfig, path: &Path) -> Result<(ActivityTable, IngestStats)> {
    let format = cfg.tweet_format()?;
    let spec = cfg.filter()?;
    ingest_tweets(open(path)?, format, &spec).map_err(|e| CliError::at(path, e))
}

fn ingest(cfg: &PipelineConfig, rec: &mut Recorder) -> Result<()> {
    let path = cfg.required(&cfg.tweets, "tweets")?.to_path_buf();
    rec.input(&path)?;
    let (table, stats) = rec.stage("ingest", |_| read_tweets(cfg, &path))?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv).expect("in-memory write");
    rec.output("activity.csv", &csv)?;
    rec.json(
        "ingest_stats.json",
        &IngestReport {
            keyword: &cfg.keyword,
            lang: &cfg.lang,
            strict_lang: cfg.strict_lang,
            stats,
            users: table.len(),
        },
    )
}

/// Activity from `--activity` when given, otherwise from the tweets.
fn activity_source(cfg: &PipelineConfig) -> Result<(PathBuf, bool)> {
    match (&cfg.activity, &cfg.tweets) {
        (Some(a), _) => Ok((a.clone(), true)),
        (None, Some(t)) => Ok((t.clone(), false)),
        (None, None) => Err(CliError::input(
            "missing required input --tweets (or --activity)",
        )),
    }
}

fn load_activity(cfg: &PipelineConfig, path: &Path, is_table: bool) -> Result<ActivityTable> {
    if is_table {
        ActivityTable::read_csv(open(path)?).map_err(|e| CliError::at(path, e))
    } else {
        read_tweets(cfg, path).map(|(t, _)| t)
    }
}

/// Graph on every user with AF >= 1, restricted per threshold afterwards.
/// Cached under the output directory, keyed by input checksums and every
/// setting that shapes the graph.
fn base_graph(cfg: &PipelineConfig, rec: &mut Recorder) -> Result<DirectedGraph> {
    let (act_path, is_table) = activity_source(cfg)?;
    let edge_path = cfg.required(&cfg.edges, "edges")?.to_path_buf();
    let act_digest = rec.input(&act_path)?;
    let edge_digest = rec.input(&edge_path)?;
    let key = sha256_hex(
        format!(
            "{CACHE_VERSION}|{act_digest}|{is_table}|{edge_digest}|{}|{}|{}|{}|{}",
            cfg.tweet_format, cfg.edge_format, cfg.keyword, cfg.lang, cfg.strict_lang
        )
        .as_bytes(),
    );
    let cache_path = rec.out_dir().join("cache").join(format!("{}.graph", &key[..32]));
    if cfg.cache && cache_path.exists() {
        let hit = rec.stage("load-cache", |_| {
            Ok(DirectedGraph::read_cache(open(&cache_path)?).ok())
        })?;
        if let Some(g) = hit {
            rec.cache(&cache_path)?;
            return Ok(g);
        }
    }
    let activity = rec.stage("activity", |_| load_activity(cfg, &act_path, is_table))?;
    let edges = rec.stage("edges", |_| {
        parse_edges(open(&edge_path)?, cfg.edge_format()?).map_err(|e| CliError::at(&edge_path, e))
    })?;
    let g = rec.stage("build", |_| match build_subgraph(&edges.records, &activity, 1) {
        Ok(g) => Ok(g),
        Err(GraphError::EmptyThreshold(_)) => {
            Err(CliError::analysis("build", "no user has a relevant tweet"))
        }
        Err(e) => Err(CliError::analysis("build", e)),
    })?;
    if cfg.cache {
        let mut buf = Vec::new();
        g.write_cache(&mut buf).expect("in-memory write");
        let dir = cache_path.parent().expect("cache dir");
        std::fs::create_dir_all(dir).map_err(|e| CliError::at(dir, e))?;
        std::fs::write(&cache_path, &buf).map_err(|e| CliError::at(&cache_path, e))?;
        rec.cache(&cache_path)?;
    }
    Ok(g)
}

fn sweep(cfg: &PipelineConfig, rec: &mut Recorder) -> Result<()> {
    let base = base_graph(cfg, rec)?;
    let rows = rec.stage("sweep", |_| {
        Ok(sweep_graph(&base, &cfg.thresholds, cfg.distances))
    })?;
    let mut csv = Vec::new();
    write_sweep_csv(&rows, &mut csv).expect("in-memory write");
    rec.output("sweep.csv", &csv)
}

fn subgraph(base: &DirectedGraph, t: u64) -> Result<DirectedGraph> {
    base.restrict(t).map_err(|e| CliError::analysis("subgraph", e))
}

fn export_edges(cfg: &PipelineConfig, rec: &mut Recorder) -> Result<()> {
    let base = base_graph(cfg, rec)?;
    let t = cfg.threshold;
    let g = rec.stage("subgraph", |_| subgraph(&base, t))?;
    let mut csv = Vec::new();
    g.write_edge_csv(&mut csv).expect("in-memory write");
    rec.output(&format!("edges_af{t}.csv"), &csv)
}

#[derive(Serialize)]
struct AnalysisSummary {
    threshold: u64,
    subgraph: GraphSummary,
    betweenness: String,
    betweenness_normalized: bool,
    eigen_converged: bool,
    eigen_iterations: usize,
    eigenvalue: f64,
}

fn analyze(cfg: &PipelineConfig, rec: &mut Recorder) -> Result<()> {
    let base = base_graph(cfg, rec)?;
    let t = cfg.threshold;
    let g = rec.stage("subgraph", |_| subgraph(&base, t))?;
    drop(base);
    let summary = rec.stage("summary", |_| Ok(summarize(&g, t, true)))?;
    let lcc = g.largest_component();
    drop(g);
    let opts = NodeMetricOptions {
        betweenness: cfg.betweenness_mode()?,
        normalized_betweenness: cfg.normalized,
    };
    let table = rec.stage("metrics", |_| {
        compute_node_metrics(&lcc, &opts).map_err(|e| CliError::analysis("metrics", e))
    })?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv).expect("in-memory write");
    rec.output("node_metrics.csv", &csv)?;
    rec.json(
        "summary.json",
        &AnalysisSummary {
            threshold: t,
            subgraph: summary,
            betweenness: cfg.betweenness.clone(),
            betweenness_normalized: cfg.normalized,
            eigen_converged: table.eigen_converged,
            eigen_iterations: table.eigen_iterations,
            eigenvalue: table.eigenvalue,
        },
    )?;
    // Downstream stages read the CSV back, so they see exactly what
    // `fit-dist` and `regress` would see on the written file.
    let cols =
        MetricColumns::read_csv(Cursor::new(csv)).map_err(|e| CliError::analysis("metrics", e))?;
    let datasets = ["af", "deg", "in_deg", "out_deg"];
    rec.stage("fits", |rec| fit_columns(cfg, rec, &cols, &datasets))?;
    rec.stage("regress", |rec| regression(cfg, rec, &cols))
}

fn read_metrics(cfg: &PipelineConfig, rec: &mut Recorder) -> Result<MetricColumns> {
    let path = cfg.required(&cfg.metrics, "metrics")?.to_path_buf();
    rec.input(&path)?;
    MetricColumns::read_csv(open(&path)?).map_err(|e| CliError::at(&path, e))
}

fn column<'a>(cols: &'a MetricColumns, name: &str) -> Result<&'a [f64]> {
    cols.get(name).ok_or_else(|| {
        CliError::input(format!(
            "column `{name}` not found (have: {})",
            cols.names.join(", ")
        ))
    })
}

fn fit_dist(cfg: &PipelineConfig, rec: &mut Recorder) -> Result<()> {
    let cols = read_metrics(cfg, rec)?;
    rec.stage("fits", |rec| fit_columns(cfg, rec, &cols, &[cfg.column.as_str()]))
}

#[derive(Serialize)]
struct DatasetError {
    dataset: String,
    error: String,
}

#[derive(Serialize)]
struct FitOutput {
    reports: Vec<FitReport>,
    errors: Vec<DatasetError>,
}

/// Positive finite values; discrete when every one is integral.
fn tail_sample(values: &[f64]) -> std::result::Result<TailSample, String> {
    let v: Vec<f64> = values
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > 0.0)
        .collect();
    let sample = if v.iter().all(|x| x.fract() == 0.0) {
        TailSample::discrete(&v.iter().map(|&x| x as u64).collect::<Vec<_>>())
    } else {
        TailSample::continuous(&v)
    };
    sample.map_err(|e| e.to_string())
}

fn fit_columns(
    cfg: &PipelineConfig,
    rec: &mut Recorder,
    cols: &MetricColumns,
    names: &[&str],
) -> Result<()> {
    let families = cfg.family_list()?;
    let bootstrap = (cfg.bootstrap > 0).then_some(Bootstrap {
        resamples: cfg.bootstrap,
        seed: cfg.seed,
    });
    let mut out = FitOutput {
        reports: Vec::new(),
        errors: Vec::new(),
    };
    for &name in names {
        let values = column(cols, name)?;
        let result = tail_sample(values).and_then(|s| {
            fit_report(name, &s, &families, None, bootstrap).map_err(|e| e.to_string())
        });
        match result {
            Ok(r) => out.reports.push(r),
            Err(error) => out.errors.push(DatasetError {
                dataset: name.to_string(),
                error,
            }),
        }
    }
    rec.json("fit_report.json", &out)
}

fn regress(cfg: &PipelineConfig, rec: &mut Recorder) -> Result<()> {
    let cols = read_metrics(cfg, rec)?;
    rec.stage("regress", |rec| regression(cfg, rec, &cols))
}

#[derive(Serialize)]
struct Univariate {
    regressor: String,
    linear: UnivariateFit,
    quadratic: UnivariateFit,
    choice: ModelChoice,
    band_file: String,
}

#[derive(Serialize)]
struct RegressionOutput {
    dependent: String,
    censor: f64,
    n: usize,
    /// Rows dropped for a missing value in any used column.
    n_dropped: usize,
    describe: Vec<Describe>,
    tobit: TobitModel,
    univariate: Vec<Univariate>,
}

fn regression(cfg: &PipelineConfig, rec: &mut Recorder, cols: &MetricColumns) -> Result<()> {
    let y_all = column(cols, &cfg.dependent)?;
    let x_all = cfg
        .regressors
        .iter()
        .map(|r| column(cols, r))
        .collect::<Result<Vec<_>>>()?;
    let keep: Vec<usize> = (0..y_all.len())
        .filter(|&i| y_all[i].is_finite() && x_all.iter().all(|x| x[i].is_finite()))
        .collect();
    let y: Vec<f64> = keep.iter().map(|&i| y_all[i]).collect();
    let xs: Vec<Vec<f64>> = x_all
        .iter()
        .map(|x| keep.iter().map(|&i| x[i]).collect())
        .collect();
    let fail = |e: activenet::regress::RegressError| CliError::analysis("regress", e);

    let mut summary = Vec::new();
    summary.extend(describe(&cfg.dependent, &y));
    for (name, x) in cfg.regressors.iter().zip(&xs) {
        summary.extend(describe(name, x));
    }
    let censor = cfg.censor_point();
    let tobit = fit_tobit(&y, &xs, &cfg.regressors, censor).map_err(fail)?;

    let mut univariate = Vec::new();
    for (name, x) in cfg.regressors.iter().zip(&xs) {
        let linear = fit_polynomial(&y, x, 1).map_err(fail)?;
        let quadratic = fit_polynomial(&y, x, 2).map_err(fail)?;
        let choice = select_model(&linear, &quadratic);
        let band = prediction_band(
            choose(&linear, &quadratic),
            &grid_over(x, cfg.band_points),
            0.95,
        );
        let band_file = format!("band_{name}.csv");
        let mut csv = Vec::new();
        band.write_csv(&mut csv).expect("in-memory write");
        rec.output(&band_file, &csv)?;
        univariate.push(Univariate {
            regressor: name.clone(),
            linear,
            quadratic,
            choice,
            band_file,
        });
    }
    rec.json(
        "regression.json",
        &RegressionOutput {
            dependent: cfg.dependent.clone(),
            censor,
            n: y.len(),
            n_dropped: y_all.len() - y.len(),
            describe: summary,
            tobit,
            univariate,
        },
    )
}
