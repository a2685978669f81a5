//! `hwnas` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use hwnas::analysis::{layer_ops, network_cost, stem_op, FeatureOptions};
use hwnas::arch::{self, derive_shapes, Layout, NetworkSpec};
use hwnas::controller::DEFAULT_LEARNING_RATE;
use hwnas::cost::{self, BenchmarkRecord, DeviceSimulator, LatencyModel, DEFAULT_RIDGE_LAMBDA};
use hwnas::report::{ablation_csv, scatter_svg, Point};
use hwnas::search::{
    ablation_report, run_search, AblationMethod, LatencySource, QualityNoise, SearchConfig, SyntheticOracle,
};
use hwnas::space::{self, HardwareAdaptation, SpaceDefinition, SpaceSpec, SpaceVariant};
use hwnas::tucker::{self, ConvKernel};
use hwnas::NasError;

const ENUM_CAP_VAR: &str = "NAS_ENUM_CAP";

#[derive(Parser, Debug)]
#[command(name = "hwnas", version, about = "Hardware-aware architecture search over IBN, Fused and Tucker layers")]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Inspect, size or enumerate a search space.
    Space {
        #[command(subcommand)]
        action: SpaceAction,
    },
    /// Per-layer MAdds and parameter counts of an architecture.
    Analyze {
        #[arg(long)]
        arch: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulated benchmarks.
    Bench {
        #[command(subcommand)]
        action: BenchAction,
    },
    /// Latency model fitting and evaluation.
    Cost {
        #[command(subcommand)]
        action: CostAction,
    },
    /// Architecture search.
    Search {
        #[command(subcommand)]
        action: SearchAction,
    },
    /// Tucker-2 decomposition.
    Decomp {
        #[command(subcommand)]
        action: DecompAction,
    },
    /// Export an architecture to another format.
    Export {
        #[command(subcommand)]
        action: ExportAction,
    },
}

#[derive(Subcommand, Debug)]
enum SpaceAction {
    /// Decisions and their choices, as JSON.
    Inspect(SpaceArgs),
    /// Number of architectures.
    Size(SpaceArgs),
    /// Every decision vector, one per line, in lexicographic order.
    Enumerate(SpaceArgs),
}

#[derive(Subcommand, Debug)]
enum BenchAction {
    /// Sample architectures and simulate their latency.
    Generate {
        #[command(flatten)]
        space: SpaceArgs,
        /// Built-in profile name or profile file.
        #[arg(long)]
        device: String,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        /// Overrides the profile's multiplicative noise.
        #[arg(long)]
        noise: Option<f64>,
        /// Output directory (architectures plus benchmarks.csv).
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum CostAction {
    /// Fit a latency model on a benchmarks.csv (or the directory holding it).
    Fit {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        bench: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RIDGE_LAMBDA)]
        lambda: f64,
        /// Fraction of records held out for evaluation.
        #[arg(long, default_value_t = 0.0)]
        holdout: f64,
        #[arg(long)]
        channel_bands: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a model on a benchmarks.csv.
    Eval {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        bench: PathBuf,
        /// Per-record predictions as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Exhaustive,
    Controller,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// `linear`, `affinity`, or a JSON oracle file.
    #[arg(long, default_value = "linear")]
    oracle: String,
    /// Seed of the linear oracle's bucket weights.
    #[arg(long, default_value_t = 0)]
    oracle_seed: u64,
    /// Gaussian noise on quality estimates.
    #[arg(long, default_value_t = 0.0)]
    quality_noise: f64,
    /// Draw fresh quality noise per evaluation instead of once per architecture.
    #[arg(long)]
    iid_noise: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, default_value_t = 5000)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    samples_per_step: usize,
    #[arg(long, default_value_t = -0.3, allow_hyphen_values = true)]
    tau: f64,
    /// Latency budget in ms; defaults to the median of 256 random samples.
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
    lr: f64,
    #[arg(long, default_value_t = 1)]
    log_every: usize,
}

#[derive(Subcommand, Debug)]
enum SearchAction {
    /// Controller search; writes log, best architecture, DOT, CSV and SVG.
    Run {
        #[command(flatten)]
        space: SpaceArgs,
        /// Built-in profile name or profile file.
        #[arg(long, conflicts_with = "model")]
        device: Option<String>,
        /// Fitted latency model to use instead of a simulator.
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        oracle: OracleArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Best architecture per (space variant, device).
    Ablation {
        /// Built-in layout name or layout file.
        #[arg(long, default_value = "toy2block")]
        layout: String,
        #[arg(long, value_delimiter = ',', default_value = "ibn,ibn_fused,ibn_fused_tucker")]
        variants: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "cpu_sim,accel_sim,dsp_sim")]
        devices: Vec<String>,
        #[arg(long, value_enum, default_value = "exhaustive")]
        method: MethodArg,
        #[command(flatten)]
        oracle: OracleArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum DecompAction {
    /// Reconstruction error and MAdds ratio over a grid of ranks.
    Demo {
        /// Kernel file (text or binary); a random kernel is used when absent.
        #[arg(long)]
        kernel: Option<PathBuf>,
        /// Shape of the random kernel: K,C1,C2.
        #[arg(long, value_delimiter = ',', default_value = "3,16,16")]
        shape: Vec<usize>,
        /// Feature map side used for the MAdds ratio.
        #[arg(long, default_value_t = 16)]
        resolution: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum ExportAction {
    /// Graphviz rendering of an architecture.
    Dot {
        #[arg(long)]
        arch: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct SpaceArgs {
    /// Space definition file; overrides the other space flags.
    #[arg(long = "space")]
    space_file: Option<PathBuf>,
    #[arg(long, default_value = "ibn_fused_tucker")]
    variant: String,
    #[arg(long, default_value = "neutral")]
    adaptation: String,
    /// Built-in layout name or layout file.
    #[arg(long, default_value = "toy2")]
    layout: String,
}

struct Invocation {
    seed: u64,
    args: Vec<String>,
}

impl Invocation {
    fn meta(&self) -> serde_json::Value {
        json!({
            "tool": "hwnas",
            "version": env!("CARGO_PKG_VERSION"),
            "invocation": self.args,
            "seed": self.seed,
        })
    }

    fn comment(&self) -> String {
        format!("# hwnas {} seed={} | {}\n", env!("CARGO_PKG_VERSION"), self.seed, self.args.join(" "))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let inv = Invocation {
        seed: cli.seed,
        args: std::env::args().collect(),
    };
    match run(cli.command, &inv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = match err.downcast_ref::<NasError>() {
                Some(e) => e.code(),
                None if err.chain().any(|c| c.is::<std::io::Error>()) => "io",
                None => "error",
            };
            let message = format!("{err:#}").replace('\n', " ");
            eprintln!("{}", json!({ "error": code, "message": message }));
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command, inv: &Invocation) -> Result<()> {
    match cmd {
        Command::Space { action } => cmd_space(action),
        Command::Analyze { arch, out } => cmd_analyze(&arch, out.as_deref(), inv),
        Command::Bench {
            action:
                BenchAction::Generate {
                    space,
                    device,
                    n,
                    noise,
                    out,
                },
        } => cmd_bench(&space, &device, n, noise, &out, inv),
        Command::Cost { action } => cmd_cost(action, inv),
        Command::Search { action } => cmd_search(action, inv),
        Command::Decomp {
            action:
                DecompAction::Demo {
                    kernel,
                    shape,
                    resolution,
                    out,
                },
        } => cmd_decomp(kernel.as_deref(), &shape, resolution, out.as_deref(), inv),
        Command::Export {
            action: ExportAction::Dot { arch, out },
        } => {
            let net = read_arch(&arch)?;
            let dot = format!("// {}", inv.comment().trim_start_matches("# ")) + &arch::export_dot(&net);
            emit(out.as_deref(), &dot)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn say(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => say(text),
    }
}

fn read_arch(path: &Path) -> Result<NetworkSpec> {
    arch::deserialize(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn resolve_layout(name: &str, base: Option<&Path>) -> Result<Layout> {
    if let Some(l) = Layout::builtin(name) {
        return Ok(l);
    }
    let path = match base {
        Some(dir) => dir.join(name),
        None => PathBuf::from(name),
    };
    Layout::from_json(&read(&path)?).with_context(|| format!("in {}", path.display()))
}

fn resolve_device(name: &str) -> Result<DeviceSimulator> {
    if let Some(d) = DeviceSimulator::builtin(name) {
        return Ok(d);
    }
    let path = Path::new(name);
    if !path.exists() {
        bail!(NasError::Config(format!("unknown device {name:?} (not a built-in profile or file)")));
    }
    DeviceSimulator::from_json(&read(path)?).with_context(|| format!("in {name}"))
}

fn build_space(args: &SpaceArgs) -> Result<SpaceSpec> {
    let mut spec = match &args.space_file {
        Some(path) => {
            let def = SpaceDefinition::from_json(&read(path)?).with_context(|| format!("in {}", path.display()))?;
            let layout = resolve_layout(&def.layout_ref, path.parent())?;
            def.build(&layout)?
        }
        None => {
            let variant = SpaceVariant::parse(&args.variant)
                .ok_or_else(|| NasError::Config(format!("unknown variant {:?}", args.variant)))?;
            let adaptation = HardwareAdaptation::parse(&args.adaptation)
                .ok_or_else(|| NasError::Config(format!("unknown adaptation {:?}", args.adaptation)))?;
            space::build_space(variant, adaptation, &resolve_layout(&args.layout, None)?)?
        }
    };
    if let Ok(cap) = std::env::var(ENUM_CAP_VAR) {
        spec.enumeration_cap = cap
            .trim()
            .parse()
            .map_err(|_| NasError::Config(format!("{ENUM_CAP_VAR} must be an integer, got {cap:?}")))?;
    }
    Ok(spec)
}

fn cmd_space(action: SpaceAction) -> Result<()> {
    match action {
        SpaceAction::Size(args) => {
            say(&format!("{}\n", space::space_size(&build_space(&args)?)))?;
        }
        SpaceAction::Inspect(args) => {
            let spec = build_space(&args)?;
            let decisions: Vec<_> = spec
                .decisions
                .iter()
                .map(|d| {
                    json!({
                        "id": d.id,
                        "scope": format!("{:?}", d.scope),
                        "choices": d.choices.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let doc = json!({
                "space": spec.describe(),
                "size": space::space_size(&spec).to_string(),
                "enumeration_cap": spec.enumeration_cap,
                "decisions": decisions,
            });
            say(&format!("{}\n", serde_json::to_string_pretty(&doc)?))?;
        }
        SpaceAction::Enumerate(args) => {
            let spec = build_space(&args)?;
            let mut out = String::new();
            for dv in space::enumerate(&spec)? {
                out.push_str(&dv.to_string());
                out.push('\n');
            }
            say(&out)?;
        }
    }
    Ok(())
}

fn csv_string(inv: &Invocation, header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?;
    Ok(inv.comment() + &body)
}

fn cmd_analyze(path: &Path, out: Option<&Path>, inv: &Invocation) -> Result<()> {
    let net = read_arch(path)?;
    let trace = derive_shapes(&net)?;
    let cost = network_cost(&net)?;
    let stem = stem_op(&net, trace.stem.out_height, trace.stem.out_width);
    let mut rows = vec![vec![
        "stem".into(),
        String::new(),
        String::new(),
        "conv3x3".into(),
        trace.stem.c_in.to_string(),
        trace.stem.c_out.to_string(),
        arch::STEM_STRIDE.to_string(),
        format!("{}x{}", trace.stem.height, trace.stem.width),
        stem.madds.to_string(),
        stem.params.to_string(),
    ]];
    for (i, ((b, l, layer), shape)) in net.layers().zip(&trace.layers).enumerate() {
        let ops = layer_ops(layer, shape.height, shape.width)?;
        rows.push(vec![
            i.to_string(),
            b.to_string(),
            l.to_string(),
            layer.kind.key(),
            layer.c_in.to_string(),
            layer.c_out.to_string(),
            layer.stride.to_string(),
            format!("{}x{}", shape.height, shape.width),
            ops.iter().map(|o| o.madds).sum::<u64>().to_string(),
            ops.iter().map(|o| o.params).sum::<u64>().to_string(),
        ]);
    }
    let mut total = vec![String::new(); 10];
    total[0] = "total".into();
    total[8] = cost.total_madds.to_string();
    total[9] = cost.total_params.to_string();
    rows.push(total);
    let header = ["layer", "block", "index", "kind", "c_in", "c_out", "stride", "input", "madds", "params"];
    emit(out, &csv_string(inv, &header, rows)?)
}

fn cmd_bench(
    args: &SpaceArgs,
    device: &str,
    n: usize,
    noise: Option<f64>,
    out: &Path,
    inv: &Invocation,
) -> Result<()> {
    let spec = build_space(args)?;
    let mut dev = resolve_device(device)?;
    if let Some(sigma) = noise {
        dev = dev.with_noise(sigma);
    }
    dev.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(inv.seed);
    let records = cost::generate_benchmarks(&spec, &dev, n, &mut rng)?;
    let archs = out.join("archs");
    fs::create_dir_all(&archs).with_context(|| format!("creating {}", archs.display()))?;
    let mut rows = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let name = format!("archs/arch_{i:05}.json");
        write(&out.join(&name), &arch::serialize_with_meta(&r.arch, Some(inv.meta())))?;
        rows.push(vec![name, r.latency_ms.to_string()]);
    }
    write(&out.join("benchmarks.csv"), &csv_string(inv, &["arch_file", "latency_ms"], rows)?)?;
    eprintln!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}

fn read_benchmarks(path: &Path) -> Result<Vec<(String, BenchmarkRecord)>> {
    let joined;
    let path = if path.is_dir() {
        joined = path.join("benchmarks.csv");
        joined.as_path()
    } else {
        path
    };
    let base = path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.with_context(|| format!("{} record {}", path.display(), i + 1))?;
        let (Some(file), Some(lat)) = (row.get(0), row.get(1)) else {
            bail!(NasError::Parse {
                line: i + 2,
                column: 1,
                message: "expected arch_file,latency_ms".into()
            });
        };
        let latency_ms: f64 = lat.trim().parse().map_err(|_| NasError::Parse {
            line: i + 2,
            column: 2,
            message: format!("bad latency {lat:?}"),
        })?;
        let arch = read_arch(&base.join(file))?;
        out.push((file.to_string(), BenchmarkRecord { arch, latency_ms }));
    }
    Ok(out)
}

fn cmd_cost(action: CostAction, inv: &Invocation) -> Result<()> {
    match action {
        CostAction::Fit {
            space,
            bench,
            lambda,
            holdout,
            channel_bands,
            out,
        } => {
            if !(0.0..1.0).contains(&holdout) {
                bail!(NasError::Config("holdout must be in [0, 1)".into()));
            }
            let spec = build_space(&space)?;
            let mut records: Vec<BenchmarkRecord> = read_benchmarks(&bench)?.into_iter().map(|(_, r)| r).collect();
            records.shuffle(&mut ChaCha8Rng::seed_from_u64(inv.seed));
            let n_hold = (records.len() as f64 * holdout).round() as usize;
            let (held, train) = records.split_at(n_hold);
            let opts = FeatureOptions { channel_bands };
            let mut model = cost::fit(train, &spec, lambda, opts)?;
            if !held.is_empty() {
                model.holdout_r2 = Some(cost::r2(&model, held, &spec)?);
            }
            model.meta = Some(inv.meta());
            write(&out, &model.to_json())?;
            say(&format!(
                "{}\n",
                json!({ "train_records": train.len(), "holdout_records": held.len(),
                        "train_r2": model.train_r2, "holdout_r2": model.holdout_r2 })
            ))?;
        }
        CostAction::Eval {
            space,
            model,
            bench,
            out,
        } => {
            let spec = build_space(&space)?;
            let model = LatencyModel::from_json(&read(&model)?).with_context(|| format!("in {}", model.display()))?;
            let records = read_benchmarks(&bench)?;
            let mut predicted = Vec::with_capacity(records.len());
            let mut rows = Vec::with_capacity(records.len());
            for (file, r) in &records {
                let p = cost::predict(&model, &r.arch, &spec).with_context(|| file.clone())?;
                predicted.push(p);
                rows.push(vec![file.clone(), r.latency_ms.to_string(), p.to_string()]);
            }
            let actual: Vec<f64> = records.iter().map(|(_, r)| r.latency_ms).collect();
            if let Some(out) = out {
                write(
                    &out,
                    &csv_string(inv, &["arch_file", "latency_ms", "predicted_ms"], rows)?,
                )?;
            }
            say(&format!(
                "{}\n",
                json!({ "records": records.len(), "r2": cost::r2_score(&predicted, &actual) })
            ))?;
        }
    }
    Ok(())
}

fn resolve_oracle(args: &OracleArgs) -> Result<SyntheticOracle> {
    let oracle = match args.oracle.as_str() {
        "linear" => SyntheticOracle::linear_feature(args.oracle_seed),
        "affinity" => SyntheticOracle::affinity(),
        path => {
            let p = Path::new(path);
            SyntheticOracle::from_json(&read(p)?).with_context(|| format!("in {path}"))?
        }
    };
    Ok(if args.quality_noise > 0.0 {
        oracle.with_noise(args.quality_noise)
    } else {
        oracle
    })
}

fn search_config(run: &RunArgs, oracle: &OracleArgs, seed: u64) -> SearchConfig {
    SearchConfig {
        steps: run.steps,
        samples_per_step: run.samples_per_step,
        tau: run.tau,
        budget_ms: run.budget,
        seed,
        log_every: run.log_every,
        quality_noise: if oracle.iid_noise {
            QualityNoise::Iid
        } else {
            QualityNoise::PerArchitecture
        },
        learning_rate: run.lr,
    }
}

fn cmd_search(action: SearchAction, inv: &Invocation) -> Result<()> {
    match action {
        SearchAction::Run {
            space,
            device,
            model,
            oracle,
            run,
            out,
        } => {
            let spec = build_space(&space)?;
            let latency = match (device, model) {
                (_, Some(m)) => LatencySource::Model(
                    LatencyModel::from_json(&read(&m)?).with_context(|| format!("in {}", m.display()))?,
                ),
                (Some(d), None) => LatencySource::Simulator(resolve_device(&d)?),
                (None, None) => bail!(NasError::Config("one of --device or --model is required".into())),
            };
            let cfg = search_config(&run, &oracle, inv.seed);
            let q = resolve_oracle(&oracle)?;
            let (best, mut log) = run_search(&spec, &q, &latency, &cfg)?;
            log.header.meta = Some(inv.meta());

            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write(&out.join("search_log.ndjson"), &log.to_ndjson())?;
            write(&out.join("best_arch.json"), &arch::serialize_with_meta(&best, Some(inv.meta())))?;
            let dot = format!("// {}", inv.comment().trim_start_matches("# ")) + &arch::export_dot(&best);
            write(&out.join("best_arch.dot"), &dot)?;

            let rows = log
                .steps
                .iter()
                .map(|s| {
                    vec![
                        s.step.to_string(),
                        s.dv.to_string(),
                        s.quality.to_string(),
                        s.latency_ms.to_string(),
                        s.reward.to_string(),
                    ]
                })
                .collect();
            write(
                &out.join("samples.csv"),
                &csv_string(inv, &["step", "dv", "quality", "latency_ms", "reward"], rows)?,
            )?;
            let points: Vec<Point> = log
                .steps
                .iter()
                .map(|s| Point {
                    label: format!("step {} {}", s.step, s.dv),
                    latency_ms: s.latency_ms,
                    score: s.reward,
                })
                .collect();
            write(&out.join("samples.svg"), &scatter_svg(&points, "reward vs latency"))?;
            say(&format!("{}\n", serde_json::to_string(&log.final_arch)?))?;
        }
        SearchAction::Ablation {
            layout,
            variants,
            devices,
            method,
            oracle,
            run,
            out,
        } => {
            let layout = resolve_layout(&layout, None)?;
            let variants = variants
                .iter()
                .map(|v| SpaceVariant::parse(v).ok_or_else(|| NasError::Config(format!("unknown variant {v:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let devices = devices.iter().map(|d| resolve_device(d)).collect::<Result<Vec<_>>>()?;
            let cfg = search_config(&run, &oracle, inv.seed);
            let q = resolve_oracle(&oracle)?;
            let method = match method {
                MethodArg::Exhaustive => AblationMethod::Exhaustive,
                MethodArg::Controller => AblationMethod::Controller,
            };
            let rows = ablation_report(&variants, &devices, &layout, &q, &cfg, method)?;
            let text = inv.comment() + &ablation_csv(&rows);
            write(&out, &text)?;
            let points: Vec<Point> = rows
                .iter()
                .map(|r| Point {
                    label: format!("{} on {}", r.space.name(), r.device),
                    latency_ms: r.latency_ms,
                    score: r.reward,
                })
                .collect();
            write(&out.with_extension("svg"), &scatter_svg(&points, "ablation: reward vs latency"))?;
            say(&ablation_csv(&rows))?;
        }
    }
    Ok(())
}

fn cmd_decomp(
    kernel: Option<&Path>,
    shape: &[usize],
    resolution: usize,
    out: Option<&Path>,
    inv: &Invocation,
) -> Result<()> {
    let kernel = match kernel {
        Some(p) => {
            let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            ConvKernel::parse(&bytes).with_context(|| format!("in {}", p.display()))?
        }
        None => {
            let [k, c1, c2] = shape else {
                bail!(NasError::Config("--shape takes K,C1,C2".into()));
            };
            ConvKernel::random(*k, *c1, *c2, &mut ChaCha8Rng::seed_from_u64(inv.seed))?
        }
    };
    let grid = |c: usize| -> Vec<usize> {
        let mut r: Vec<usize> = (0..)
            .map(|i| 1usize << i)
            .take_while(|&x| x < c)
            .chain([c.div_ceil(4), c.div_ceil(2), (3 * c).div_ceil(4), c])
            .filter(|&x| x >= 1)
            .collect();
        r.sort_unstable();
        r.dedup();
        r
    };
    let mut rows = Vec::new();
    for r1 in grid(kernel.c_in) {
        for r2 in grid(kernel.c_out) {
            let f = tucker::tucker2(&kernel, r1, r2)?;
            let err = tucker::rel_error(&kernel, &f)?;
            let ratio = tucker::madds_savings(kernel.c_in, kernel.c_out, kernel.kernel, r1, r2, resolution, resolution);
            rows.push(vec![r1.to_string(), r2.to_string(), format!("{err:.6e}"), format!("{ratio:.6}")]);
        }
    }
    emit(out, &csv_string(inv, &["r1", "r2", "rel_error", "madds_ratio"], rows)?)
}
