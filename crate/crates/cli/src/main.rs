//! `polar`: individual polarization analysis from user–source interactions.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polar_core::metrics::{self, MetricOptions};
use polar_core::pipeline::{self, AnalysisConfig};
use polar_core::synth::{self, SynthConfig};
use polar_core::{Error, InputFormat, InteractionDataset, LdWeighting, RwcConfig};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_DEGENERATE: u8 = 4;

#[derive(Parser)]
#[command(name = "polar", version, about = "Individual polarization metrics, behavioral clustering and graph polarization statistics")]
#[command(after_help = "Log verbosity is read from POLAR_LOG (error, warn, info, debug, trace).")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full analysis and write report.json plus plot-ready CSVs.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic dataset with ground-truth classes.
    Synth(SynthArgs),
    /// Compute per-user metrics only.
    Metrics(MetricsArgs),
    /// Compute modularity and random-walk controversy; prints JSON.
    Graph(GraphArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

impl From<Format> for InputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => InputFormat::Csv,
            Format::Jsonl => InputFormat::Jsonl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LdMode {
    Proportions,
    RawCounts,
}

impl From<LdMode> for LdWeighting {
    fn from(m: LdMode) -> Self {
        match m {
            LdMode::Proportions => LdWeighting::Proportions,
            LdMode::RawCounts => LdWeighting::RawCounts,
        }
    }
}

#[derive(Args)]
struct InputArgs {
    /// Interaction file with user_id, source_id, community_id and optional count.
    #[arg(long)]
    input: PathBuf,
    /// Input format; guessed from the file extension when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl InputArgs {
    fn format(&self) -> InputFormat {
        self.format
            .map(Into::into)
            .unwrap_or_else(|| InputFormat::from_path(&self.input))
    }

    fn load(&self) -> polar_core::Result<InteractionDataset> {
        InteractionDataset::ingest(&self.input, self.format())
    }
}

#[derive(Args)]
struct WalkArgs {
    /// Random walks started per side.
    #[arg(long, default_value_t = RwcConfig::default().walks_per_side)]
    walks: usize,
    /// Authoritative nodes per side [default: max(1, ceil(5% of side size))].
    #[arg(long)]
    k_auth: Option<usize>,
    /// Steps after which a walk is abandoned and restarted.
    #[arg(long, default_value_t = RwcConfig::default().max_steps)]
    max_steps: usize,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Community mapped towards 1 by the oriented opinion metric.
    #[arg(long)]
    positive_community: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Candidate cluster counts, as A..B (inclusive).
    #[arg(long, default_value = "2..10", value_parser = parse_k_range)]
    k_range: (usize, usize),
    /// k-means restarts per candidate k.
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    #[arg(long, value_enum, default_value = "proportions")]
    ld_weighting: LdMode,
    #[command(flatten)]
    walks: WalkArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Built-in profile.
    #[arg(long, value_parser = ["paper"], conflicts_with = "config", required_unless_present = "config")]
    profile: Option<String>,
    /// JSON generator config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed of the profile or config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Enables the oriented opinion column (two-community data only).
    #[arg(long)]
    positive_community: Option<String>,
    #[arg(long, value_enum, default_value = "proportions")]
    ld_weighting: LdMode,
    /// Output CSV file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GraphArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    walks: WalkArgs,
    /// Output JSON file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_k_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, got `{s}`"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("bad lower bound: {e}"))?;
    let b: usize = b.trim().trim_start_matches('=').parse().map_err(|e| format!("bad upper bound: {e}"))?;
    if a < 2 || b < a {
        return Err(format!("k range {a}..{b} must satisfy 2 <= A <= B"));
    }
    Ok((a, b))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) => EXIT_USAGE,
        Error::Degenerate(_) => EXIT_DEGENERATE,
        _ => EXIT_DATA,
    }
}

fn write_text(out: Option<&Path>, text: &str) -> polar_core::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => match std::io::stdout().write_all(text.as_bytes()) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            r => r.map_err(|e| Error::io("<stdout>", e)),
        },
    }
}

fn analyze(args: AnalyzeArgs) -> polar_core::Result<()> {
    let mut cfg = AnalysisConfig::new(args.positive_community, args.seed);
    (cfg.k_min, cfg.k_max) = args.k_range;
    cfg.restarts = args.restarts;
    cfg.ld_weighting = args.ld_weighting.into();
    cfg.graph.walks_per_side = args.walks.walks;
    cfg.graph.k_authoritative = args.walks.k_auth;
    cfg.graph.max_steps = args.walks.max_steps;
    let report = pipeline::run_analyze(&args.input.input, args.input.format(), &cfg, &args.out)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let tri = &report.clustering["tri"];
    println!(
        "{} users; tri-factor k = {} (silhouette {:.3}); modularity {:.3}; RWC {:.3}; report in {}",
        report.dataset.n_users,
        tri.k,
        tri.silhouette,
        report.graph.modularity,
        report.graph.rwc,
        args.out.join("report.json").display()
    );
    Ok(())
}

fn synth_cmd(args: SynthArgs) -> polar_core::Result<()> {
    let mut cfg = match (&args.profile, &args.config) {
        (_, Some(path)) => SynthConfig::from_json_file(path)?,
        _ => synth::paper_profile(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let (ds, truth) = synth::generate(&cfg)?;
    let path = synth::write_outputs(&args.out, &cfg, &ds, &truth, args.format.into())?;
    println!(
        "{} users, {} sources written to {}",
        ds.n_users(),
        ds.n_sources(),
        path.display()
    );
    Ok(())
}

fn metrics_cmd(args: MetricsArgs) -> polar_core::Result<()> {
    let ds = args.input.load()?;
    let opts = MetricOptions {
        positive_community: args.positive_community,
        ld_weighting: args.ld_weighting.into(),
    };
    let v = metrics::compute_all(&ds, &opts)?;
    let mut buf = Vec::new();
    metrics::write_csv(&mut buf, ds.communities(), &v)?;
    write_text(args.out.as_deref(), &String::from_utf8(buf).expect("CSV output is UTF-8"))
}

fn graph_cmd(args: GraphArgs) -> polar_core::Result<()> {
    let ds = args.input.load()?;
    let cfg = RwcConfig {
        k_authoritative: args.walks.k_auth,
        walks_per_side: args.walks.walks,
        max_steps: args.walks.max_steps,
        seed: args.seed,
    };
    let stats = pipeline::graph_statistics(&ds, &cfg)?;
    let mut text = serde_json::to_string_pretty(&stats)?;
    text.push('\n');
    write_text(args.out.as_deref(), &text)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("POLAR_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Synth(a) => synth_cmd(a),
        Command::Metrics(a) => metrics_cmd(a),
        Command::Graph(a) => graph_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
