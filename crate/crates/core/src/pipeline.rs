//! End-to-end analysis: metrics, single-factor densities, bi- and tri-factor
//! clustering, graph statistics, and the files that record them.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{self, EdgeWeighting, InteractionGraph, RwcConfig, RwcResult};
use crate::metrics::{self, LdWeighting, MetricOptions, UserMetricVector};
use crate::model::{self, InputFormat, InteractionDataset};
use crate::stats::{self, kde::DEFAULT_GRID_SIZE, ClusteringResult, KScore, KdeProfile, KmeansConfig, Points};

pub const SCHEMA_VERSION: &str = "1.0.0";
pub const TOOL_NAME: &str = "polar";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// JSON Schema describing `report.json`.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub walks_per_side: usize,
    pub max_steps: usize,
    /// `None` picks `max(1, ⌈5% of side size⌉)` per side.
    pub k_authoritative: Option<usize>,
}

impl Default for GraphConfig {
    fn default() -> Self {
        let d = RwcConfig::default();
        Self {
            walks_per_side: d.walks_per_side,
            max_steps: d.max_steps,
            k_authoritative: d.k_authoritative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub positive_community: String,
    pub seed: u64,
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub ld_weighting: LdWeighting,
    pub kde_grid_size: usize,
    pub graph: GraphConfig,
}

impl AnalysisConfig {
    pub fn new(positive_community: impl Into<String>, seed: u64) -> Self {
        let km = KmeansConfig::default();
        Self {
            positive_community: positive_community.into(),
            seed,
            k_min: 2,
            k_max: 10,
            restarts: km.restarts,
            max_iters: km.max_iters,
            tol: km.tol,
            ld_weighting: LdWeighting::default(),
            kde_grid_size: DEFAULT_GRID_SIZE,
            graph: GraphConfig::default(),
        }
    }

    pub fn kmeans(&self) -> KmeansConfig {
        KmeansConfig {
            restarts: self.restarts,
            max_iters: self.max_iters,
            tol: self.tol,
            seed: self.seed,
        }
    }

    pub fn rwc(&self) -> RwcConfig {
        RwcConfig {
            k_authoritative: self.graph.k_authoritative,
            walks_per_side: self.graph.walks_per_side,
            max_steps: self.graph.max_steps,
            seed: self.seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k_min < 2 || self.k_max < self.k_min {
            return Err(Error::InvalidConfig(format!(
                "k range {}..{} must satisfy 2 <= min <= max",
                self.k_min, self.k_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub format: InputFormat,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_users: usize,
    pub n_sources: usize,
    pub n_communities: usize,
    pub n_interactions: u64,
    pub volume_per_community: BTreeMap<String, u64>,
    /// Users with interactions in more than one community.
    pub cross_community_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Self {
        Self {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeFinding {
    pub multimodal: bool,
    pub bandwidth: f64,
    pub maxima: Vec<f64>,
    pub minima: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpearmanSection {
    pub a: String,
    pub b: String,
    pub coefficient: f64,
    pub displacement_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSection {
    pub features: Vec<String>,
    pub k: usize,
    pub silhouette: f64,
    pub davies_bouldin: f64,
    pub per_k: BTreeMap<String, KScore>,
    pub skipped_k: BTreeMap<String, String>,
    pub centroids: Vec<Vec<f64>>,
    pub cluster_sizes: Vec<usize>,
}

impl ClusteringSection {
    fn new(features: &[String], r: &ClusteringResult) -> Self {
        Self {
            features: features.to_vec(),
            k: r.k,
            silhouette: r.silhouette,
            davies_bouldin: r.davies_bouldin,
            per_k: r.per_k_scores.iter().map(|(k, s)| (k.to_string(), *s)).collect(),
            skipped_k: r.skipped_k.iter().map(|(k, s)| (k.to_string(), s.clone())).collect(),
            centroids: r.centroids.clone(),
            cluster_sizes: r.cluster_sizes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideSizes {
    pub x: usize,
    pub y: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSection {
    /// Always `"bipartite user-source"`; no projection is taken.
    pub graph: String,
    pub n_nodes: usize,
    pub n_edges: usize,
    /// Edge weighting used for community detection and modularity.
    pub detection_weighting: EdgeWeighting,
    /// Edge weighting used by the random walks.
    pub walk_weighting: EdgeWeighting,
    /// Modularity at the greedy optimum.
    pub modularity: f64,
    pub n_communities: usize,
    /// Modularity of the two-sided partition used for RWC.
    pub modularity_two_sides: f64,
    pub side_sizes: SideSizes,
    pub rwc: f64,
    pub rwc_detail: RwcResult,
    pub resampled_walks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: String,
    pub tool: ToolInfo,
    pub input: Option<InputInfo>,
    pub config: AnalysisConfig,
    pub dataset: DatasetSummary,
    pub metrics: BTreeMap<String, Summary>,
    pub kde: BTreeMap<String, Option<KdeFinding>>,
    pub spearman: Option<SpearmanSection>,
    pub clustering: BTreeMap<String, ClusteringSection>,
    pub graph: GraphSection,
    pub warnings: Vec<String>,
}

/// Features of one factor analysis and its selected clustering.
#[derive(Debug, Clone)]
pub struct FactorAnalysis {
    pub name: &'static str,
    pub features: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub result: ClusteringResult,
}

/// Everything an analysis produces, before it is written out.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: AnalysisReport,
    pub metrics: Vec<UserMetricVector>,
    pub factors: Vec<FactorAnalysis>,
    pub kde: BTreeMap<String, KdeProfile>,
    pub communities: Vec<String>,
}

/// Graph statistics of a dataset: modularity of the greedy optimum on the
/// unweighted bipartite graph, then RWC with count-weighted walks over the
/// detected two-sided split.
pub fn graph_statistics(ds: &InteractionDataset, rwc_cfg: &RwcConfig) -> Result<GraphSection> {
    let g = InteractionGraph::build(ds);
    let detection_weighting = EdgeWeighting::Binary;
    let detected = graph::greedy_modularity(&g.reweighted(detection_weighting))?;
    let (x, y) = detected.partition.sizes();
    let r = graph::rwc(&g, &detected.partition, rwc_cfg)?;
    Ok(GraphSection {
        graph: "bipartite user-source".into(),
        n_nodes: g.n_nodes(),
        n_edges: g.n_edges(),
        detection_weighting,
        walk_weighting: EdgeWeighting::Counts,
        modularity: detected.modularity,
        n_communities: detected.n_communities,
        modularity_two_sides: detected.modularity_two_sides,
        side_sizes: SideSizes { x, y },
        rwc: r.rwc,
        resampled_walks: r.resampled_walks,
        rwc_detail: r,
    })
}

fn summarize_dataset(ds: &InteractionDataset) -> DatasetSummary {
    let volumes = ds.community_volumes();
    let cross = (0..ds.n_users())
        .filter(|&u| ds.community_totals(u).iter().filter(|&&c| c > 0).count() > 1)
        .count();
    DatasetSummary {
        n_users: ds.n_users(),
        n_sources: ds.n_sources(),
        n_communities: ds.n_communities(),
        n_interactions: volumes.iter().sum(),
        volume_per_community: ds.communities().iter().cloned().zip(volumes).collect(),
        cross_community_fraction: cross as f64 / ds.n_users() as f64,
    }
}

fn check_unit_cube(name: &str, rows: &[Vec<f64>]) -> Result<()> {
    if rows.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Inconsistent(format!("{name} features fall outside [0, 1]")));
    }
    Ok(())
}

/// Run the full analysis on a two-community dataset.
pub fn analyze(ds: &InteractionDataset, cfg: &AnalysisConfig, input: Option<InputInfo>) -> Result<Analysis> {
    cfg.validate()?;
    if ds.n_communities() != 2 {
        return Err(Error::Unsupported(format!(
            "the analysis needs exactly 2 communities, dataset has {}",
            ds.n_communities()
        )));
    }
    let pos = ds.community_index(&cfg.positive_community)?;
    let communities = ds.communities().to_vec();
    let negative = communities[1 - pos].clone();
    let mut warnings = Vec::new();

    let opts = MetricOptions {
        positive_community: Some(cfg.positive_community.clone()),
        ld_weighting: cfg.ld_weighting,
    };
    let mv = metrics::compute_all(ds, &opts)?;
    log::info!("computed metrics for {} users", mv.len());

    let column = |f: &dyn Fn(&UserMetricVector) -> f64| mv.iter().map(f).collect::<Vec<f64>>();
    let rho = column(&|m| m.rho);
    let ld = column(&|m| m.ld);
    let h_op = column(&|m| m.h_op);
    let h_so = column(&|m| m.h_so);
    let h_pm = column(&|m| m.h_op_oriented.expect("positive community set"));
    let h_so_pos = column(&|m| m.h_so_per_community[&cfg.positive_community]);
    let h_so_neg = column(&|m| m.h_so_per_community[&negative]);

    let mut summaries = BTreeMap::new();
    for (name, v) in [
        ("rho", &rho),
        ("ld", &ld),
        ("h_op", &h_op),
        ("h_so", &h_so),
        ("h_op_oriented", &h_pm),
        (format!("h_so_{}", cfg.positive_community).as_str(), &h_so_pos),
        (format!("h_so_{negative}").as_str(), &h_so_neg),
    ] {
        summaries.insert(name.to_string(), Summary::of(v));
    }
    let ld_raw = column(&|m| m.ld_raw);
    summaries.insert("ld_raw".into(), Summary::of(&ld_raw));

    let mut kde_findings = BTreeMap::new();
    let mut kde_profiles = BTreeMap::new();
    for (name, values) in [("rho", &rho), ("ld", &ld)] {
        match stats::kde(values, cfg.kde_grid_size) {
            Ok(p) => {
                kde_findings.insert(
                    name.to_string(),
                    Some(KdeFinding {
                        multimodal: stats::is_multimodal(&p),
                        bandwidth: p.bandwidth,
                        maxima: p.maxima_locations(),
                        minima: p.minima_locations(),
                    }),
                );
                kde_profiles.insert(name.to_string(), p);
            }
            Err(Error::Degenerate(msg)) => {
                log::warn!("KDE on {name} skipped: {msg}");
                warnings.push(format!("kde {name}: {msg}"));
                kde_findings.insert(name.to_string(), None);
            }
            Err(e) => return Err(e),
        }
    }

    let spearman = match metrics::spearman(&ld, &h_so) {
        Ok(r) => Some(SpearmanSection {
            a: "ld".into(),
            b: "h_so".into(),
            coefficient: r.coefficient,
            displacement_fraction: r.displacement_fraction,
        }),
        Err(Error::Degenerate(msg)) => {
            warnings.push(format!("spearman ld/h_so: {msg}"));
            None
        }
        Err(e) => return Err(e),
    };

    let n = ds.n_users();
    if n < 3 {
        return Err(Error::Degenerate(format!("clustering needs at least 3 users, dataset has {n}")));
    }
    let k_max = cfg.k_max.min(n - 1);
    if k_max < cfg.k_max {
        warnings.push(format!("k range capped at {k_max} by the number of users"));
    }
    let k_range: RangeInclusive<usize> = cfg.k_min..=k_max;
    if k_range.is_empty() {
        return Err(Error::InvalidConfig(format!("k range is empty for {n} users")));
    }
    let km = cfg.kmeans();

    type FactorSet<'a> = (&'static str, Vec<String>, Vec<&'a Vec<f64>>);
    let factor_sets: [FactorSet; 3] = [
        ("single", vec!["rho".into(), "ld".into()], vec![&rho, &ld]),
        ("bi", vec!["h_op".into(), "h_so".into()], vec![&h_op, &h_so]),
        (
            "tri",
            vec![
                "h_op_oriented".into(),
                format!("h_so_{}", cfg.positive_community),
                format!("h_so_{negative}"),
            ],
            vec![&h_pm, &h_so_pos, &h_so_neg],
        ),
    ];
    let mut factors = Vec::new();
    let mut clustering = BTreeMap::new();
    for (name, features, cols) in factor_sets {
        let values: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        check_unit_cube(name, &values)?;
        let points = Points::from_rows(&values)?;
        let result = stats::select_k(&points, k_range.clone(), &km)?;
        log::info!("{name}-factor clustering: k = {}, silhouette {:.3}", result.k, result.silhouette);
        for (k, why) in &result.skipped_k {
            warnings.push(format!("{name}-factor k = {k} skipped: {why}"));
        }
        clustering.insert(name.to_string(), ClusteringSection::new(&features, &result));
        factors.push(FactorAnalysis {
            name,
            features,
            values,
            result,
        });
    }

    let graph = graph_statistics(ds, &cfg.rwc())?;
    log::info!("graph: modularity {:.3}, rwc {:.3}", graph.modularity, graph.rwc);

    let report = AnalysisReport {
        schema_version: SCHEMA_VERSION.into(),
        tool: ToolInfo {
            name: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
        },
        input,
        config: cfg.clone(),
        dataset: summarize_dataset(ds),
        metrics: summaries,
        kde: kde_findings,
        spearman,
        clustering,
        graph,
        warnings,
    };
    Ok(Analysis {
        report,
        metrics: mv,
        factors,
        kde: kde_profiles,
        communities,
    })
}

/// Read an input file, keeping its digest for the report.
pub fn load_input(path: impl AsRef<Path>, format: InputFormat) -> Result<(InteractionDataset, InputInfo)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let records = match format {
        InputFormat::Csv => model::read_csv(bytes.as_slice())?,
        InputFormat::Jsonl => model::read_jsonl(BufReader::new(bytes.as_slice()))?,
    };
    let ds = InteractionDataset::from_records(records)?;
    let info = InputInfo {
        format,
        sha256: hex::encode(Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    };
    Ok((ds, info))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Serialize a report as pretty JSON with a trailing newline.
pub fn report_json(report: &AnalysisReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

/// Write `report.json`, `report.schema.json`, `metrics.csv`,
/// `clusters_<factor>.csv` and `kde_<metric>.csv` into `dir`.
pub fn write_outputs(analysis: &Analysis, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join("report.json");
    std::fs::write(&path, report_json(&analysis.report)?).map_err(|e| Error::io(&path, e))?;
    let path = dir.join("report.schema.json");
    std::fs::write(&path, REPORT_SCHEMA).map_err(|e| Error::io(&path, e))?;

    let path = dir.join("metrics.csv");
    let mut w = create(&path)?;
    metrics::write_csv(&mut w, &analysis.communities, &analysis.metrics)?;
    finish(w, &path)?;

    for f in &analysis.factors {
        let path = dir.join(format!("clusters_{}.csv", f.name));
        let mut w = csv::Writer::from_writer(create(&path)?);
        let mut header = vec!["user_id".to_string()];
        header.extend(f.features.iter().cloned());
        header.push("cluster".into());
        w.write_record(&header)?;
        for ((m, row), c) in analysis.metrics.iter().zip(&f.values).zip(&f.result.assignments) {
            let mut rec = vec![m.user_id.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            rec.push(c.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }

    for (name, p) in &analysis.kde {
        let path = dir.join(format!("kde_{name}.csv"));
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record(["x", "density"])?;
        for (x, d) in p.grid.iter().zip(&p.density) {
            w.write_record([x.to_string(), d.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Load, analyze and write everything for one input file.
pub fn run_analyze(
    input: impl AsRef<Path>,
    format: InputFormat,
    cfg: &AnalysisConfig,
    out_dir: impl AsRef<Path>,
) -> Result<AnalysisReport> {
    let (ds, info) = load_input(input, format)?;
    let analysis = analyze(&ds, cfg, Some(info))?;
    write_outputs(&analysis, out_dir)?;
    Ok(analysis.report)
}
