//! The `tactile-evalkit` command line.
//!
//! Reports go to stdout (or `--out`), diagnostics to stderr. Exit codes:
//! 0 on success, 2 for usage or input errors, 1 for internal failures.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::baseline::{self, fid, fit_gaussian, image};
use crate::embedding::{load_any, EmbeddingSet};
use crate::error::Error;
use crate::kernel::MmdConfig;
use crate::leakage::{self, audit_split, make_noleak_split, split_to_lists};
use crate::meta::{load_meta, partition_by_class, write_meta, MetaTable};
use crate::metrics::{self, SplitStrategy};
use crate::report::{file_digest, MetricReport};
use crate::synth::{self, generate_scenario, run_leak_study, Scenario, ScenarioSpec};

pub const THREADS_ENV: &str = "TACTILE_EVALKIT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "tactile-evalkit",
    version,
    about = "Embedding-based evaluation for generative tactile models"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonFlags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonFlags {
    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Fixed Gaussian kernel bandwidth.
    #[arg(long, global = true, conflicts_with = "median", allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Median-heuristic bandwidth (the default).
    #[arg(long, global = true)]
    pub median: bool,
    /// Seed for random splits and synthetic data [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of random half splits.
    #[arg(long, global = true, default_value_t = 5)]
    pub splits: usize,
    #[arg(long, global = true, value_enum, default_value_t = SplitMode::Random)]
    pub split_mode: SplitMode,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads (default: all cores). Falls back to TACTILE_EVALKIT_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Timing information on stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitMode {
    Random,
    Interleave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    CsvSummary,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// TMMD and its reference-free variants.
    #[command(subcommand)]
    Metrics(MetricsCmd),
    /// FID, SSIM, PSNR, retrieval and k-NN baselines.
    #[command(subcommand)]
    Baseline(BaselineCmd),
    /// Check a tagged train/test split for leakage.
    Audit(AuditArgs),
    /// Video-grouped train/test split.
    Split(SplitArgs),
    /// Write a synthetic scenario to disk.
    Synth(SynthArgs),
    /// Compare a frame-interleaved split with a video-grouped one.
    Study(StudyArgs),
}

#[derive(Debug, Subcommand)]
pub enum MetricsCmd {
    /// Unbiased MMD² between generated and reference embeddings
    Tmmd(PairArgs),
    /// MMD² between random halves of the generated set
    Itmmd(GeneratedArgs),
    /// Per-class half-split MMD², averaged over classes
    Citmmd(ClassArgs),
    /// Class diversity score from the divergence matrix
    Dtmmd(ClassArgs),
    /// Same estimator as tmmd, reported as a generic embedding MMD
    EmbeddingMmd(PairArgs),
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[arg(long)]
    pub generated: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
}

#[derive(Debug, Args)]
pub struct GeneratedArgs {
    #[arg(long)]
    pub generated: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClassArgs {
    #[arg(long)]
    pub generated: PathBuf,
    #[arg(long)]
    pub meta: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum BaselineCmd {
    /// Fréchet distance between two embedding files
    Fid(AbArgs),
    /// SSIM between two PNG images
    Ssim(AbArgs),
    /// PSNR between two PNG images
    Psnr(AbArgs),
    /// Top-k cross-modal retrieval accuracy
    Retrieval(RetrievalArgs),
    /// k-NN classification accuracy
    Knn(KnnArgs),
}

#[derive(Debug, Args)]
pub struct AbArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
}

#[derive(Debug, Args)]
pub struct RetrievalArgs {
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub gallery: PathBuf,
    /// JSONL of {"query": id, "gallery": id}; identity pairing when omitted.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 5])]
    pub k: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct KnnArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Metadata holding the class labels of both sets.
    #[arg(long)]
    pub meta: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub meta: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = leakage::DEFAULT_TAU)]
    pub tau: f64,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub meta: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub test_frac: f64,
    /// Balance per-class test fractions as well.
    #[arg(long)]
    pub stratify: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    #[arg(long, default_value_t = 8)]
    pub videos_per_class: usize,
    #[arg(long, default_value_t = 30)]
    pub frames_per_video: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.97)]
    pub rho: f64,
    #[arg(long, default_value_t = 3.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
}

impl ScenarioArgs {
    fn spec(&self, scenario: Scenario, seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            scenario,
            classes: self.classes,
            videos_per_class: self.videos_per_class,
            frames_per_video: self.frames_per_video,
            dim: self.dim,
            rho: self.rho,
            separation: self.separation,
            noise_scale: self.noise_scale,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Clean,
    Collapse,
    Leakage,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Clean => Scenario::Clean,
            ScenarioArg::Collapse => Scenario::Collapse,
            ScenarioArg::Leakage => Scenario::Leakage,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = ScenarioArg::Clean)]
    pub scenario: ScenarioArg,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub spec: ScenarioArgs,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long, default_value_t = synth::DEFAULT_TEST_FRACTION)]
    pub test_frac: f64,
    #[command(flatten)]
    pub spec: ScenarioArgs,
}

/// An error with the flag it relates to, when there is one.
#[derive(Debug)]
pub struct CliError {
    pub flag: Option<&'static str>,
    pub error: Error,
}

impl From<Error> for CliError {
    fn from(error: Error) -> Self {
        Self { flag: None, error }
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        if self.error.is_validation() {
            2
        } else {
            1
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.flag {
            Some(flag) => write!(f, "--{flag}: {}", self.error),
            None => write!(f, "{}", self.error),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

trait Flagged<T> {
    fn flag(self, flag: &'static str) -> CliResult<T>;
}

impl<T> Flagged<T> for crate::Result<T> {
    fn flag(self, flag: &'static str) -> CliResult<T> {
        self.map_err(|error| CliError {
            flag: Some(flag),
            error,
        })
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Never panics.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| execute(&cli, stderr)));
    match outcome {
        Ok(Ok(report)) => match emit(&cli.common, &report, stdout) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                e.exit_code()
            }
        },
        Ok(Err(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
        Err(_) => {
            let _ = writeln!(stderr, "error: internal failure");
            1
        }
    }
}

fn thread_count(flags: &CommonFlags) -> CliResult<usize> {
    if let Some(n) = flags.threads {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError {
            flag: Some("threads"),
            error: Error::InvalidArgument(format!("{THREADS_ENV}={v:?} is not a thread count")),
        }),
        Err(_) => Ok(0),
    }
}

fn execute(cli: &Cli, stderr: &mut dyn Write) -> CliResult<MetricReport> {
    let threads = thread_count(&cli.common)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let start = Instant::now();
    let report = pool.install(|| dispatch(cli))?;
    if cli.common.verbose {
        let _ = writeln!(
            stderr,
            "{} finished in {:.3} s on {} threads",
            report.metric,
            start.elapsed().as_secs_f64(),
            pool.current_num_threads()
        );
    }
    Ok(report)
}

fn emit(flags: &CommonFlags, report: &MetricReport, stdout: &mut dyn Write) -> CliResult<()> {
    let text = match flags.format {
        Format::Json => report.to_json(),
        Format::CsvSummary => report.to_csv_summary(),
    };
    match &flags.out {
        Some(path) => fs::write(path, text)
            .map_err(|source| Error::File {
                path: path.clone(),
                source,
            })
            .flag("out"),
        None => stdout.write_all(text.as_bytes()).map_err(|e| Error::Io(e).into()),
    }
}

fn dispatch(cli: &Cli) -> CliResult<MetricReport> {
    let flags = &cli.common;
    match &cli.command {
        Command::Metrics(cmd) => run_metrics(cmd, flags),
        Command::Baseline(cmd) => run_baseline(cmd, flags),
        Command::Audit(a) => run_audit(a),
        Command::Split(a) => run_split(a, flags),
        Command::Synth(a) => run_synth(a, flags),
        Command::Study(a) => run_study(a, flags),
    }
}

fn mmd_config(flags: &CommonFlags) -> CliResult<MmdConfig> {
    match flags.sigma {
        Some(s) => MmdConfig::fixed(s).flag("sigma"),
        None => Ok(MmdConfig::median()),
    }
}

fn strategy(flags: &CommonFlags) -> CliResult<SplitStrategy> {
    match flags.split_mode {
        SplitMode::Interleave => Ok(SplitStrategy::Interleave),
        SplitMode::Random if flags.splits == 0 => Err(CliError {
            flag: Some("splits"),
            error: Error::InvalidArgument("at least one split is required".into()),
        }),
        SplitMode::Random => Ok(SplitStrategy::SeededRandom {
            seed: flags.seed.unwrap_or(0),
            repeats: flags.splits,
        }),
    }
}

fn embeddings(path: &Path, flag: &'static str, inputs: &mut Vec<(&'static str, PathBuf)>) -> CliResult<EmbeddingSet> {
    inputs.push((flag, path.to_owned()));
    load_any(path).flag(flag)
}

fn meta(path: &Path, flag: &'static str, inputs: &mut Vec<(&'static str, PathBuf)>) -> CliResult<MetaTable> {
    inputs.push((flag, path.to_owned()));
    load_meta(path).flag(flag)
}

fn with_inputs(mut report: MetricReport, inputs: &[(&'static str, PathBuf)]) -> CliResult<MetricReport> {
    for (flag, path) in inputs {
        report.add_input(path).flag(flag)?;
    }
    Ok(report)
}

fn run_metrics(cmd: &MetricsCmd, flags: &CommonFlags) -> CliResult<MetricReport> {
    let cfg = mmd_config(flags)?;
    let mut inputs = Vec::new();
    let report = match cmd {
        MetricsCmd::Tmmd(a) | MetricsCmd::EmbeddingMmd(a) => {
            let g = embeddings(&a.generated, "generated", &mut inputs)?;
            let r = embeddings(&a.reference, "reference", &mut inputs)?;
            if matches!(cmd, MetricsCmd::Tmmd(_)) {
                metrics::tmmd(&g, &r, &cfg)?
            } else {
                metrics::embedding_mmd(&g, &r, &cfg)?
            }
        }
        MetricsCmd::Itmmd(a) => {
            let g = embeddings(&a.generated, "generated", &mut inputs)?;
            metrics::i_tmmd(&g, &cfg, &strategy(flags)?).flag("generated")?
        }
        MetricsCmd::Citmmd(a) | MetricsCmd::Dtmmd(a) => {
            let g = embeddings(&a.generated, "generated", &mut inputs)?;
            let m = meta(&a.meta, "meta", &mut inputs)?;
            let p = partition_by_class(&g, &m).flag("meta")?;
            let s = strategy(flags)?;
            if matches!(cmd, MetricsCmd::Citmmd(_)) {
                metrics::ci_tmmd(&g, &p, &cfg, &s)?
            } else {
                metrics::d_tmmd(&g, &p, &cfg, &s)?
            }
        }
    };
    with_inputs(report, &inputs)
}

#[derive(Deserialize)]
struct PairRecord {
    query: String,
    gallery: String,
}

fn read_pairs(path: &Path) -> crate::Result<HashMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|source| Error::File {
        path: path.into(),
        source,
    })?;
    let mut pairs = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: PairRecord = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
            line: i + 1,
            message: e.to_string(),
        })?;
        if pairs.insert(rec.query.clone(), rec.gallery).is_some() {
            return Err(Error::MalformedRecord {
                line: i + 1,
                message: format!("query {:?} is paired twice", rec.query),
            });
        }
    }
    Ok(pairs)
}

fn labels(set: &EmbeddingSet, m: &MetaTable) -> crate::Result<Vec<String>> {
    set.ids()
        .iter()
        .map(|id| {
            m.get(id)
                .ok_or_else(|| Error::MissingSample(id.clone()))?
                .class_label
                .clone()
                .ok_or_else(|| Error::InvalidArgument(format!("sample {id:?} has no class label")))
        })
        .collect()
}

fn run_baseline(cmd: &BaselineCmd, _flags: &CommonFlags) -> CliResult<MetricReport> {
    let mut inputs = Vec::new();
    let report = match cmd {
        BaselineCmd::Fid(ab) => {
            let a = embeddings(&ab.a, "a", &mut inputs)?;
            let b = embeddings(&ab.b, "b", &mut inputs)?;
            let fa = fit_gaussian(&a).flag("a")?;
            let fb = fit_gaussian(&b).flag("b")?;
            MetricReport::new("fid", fid(&fa, &fb)?)
                .with_extra("n_a", fa.n)
                .with_extra("n_b", fb.n)
                .with_extra("dim", fa.dim())
        }
        BaselineCmd::Ssim(ab) | BaselineCmd::Psnr(ab) => {
            inputs.push(("a", ab.a.clone()));
            inputs.push(("b", ab.b.clone()));
            let a = image::load_png(&ab.a).flag("a")?;
            let b = image::load_png(&ab.b).flag("b")?;
            let report = if matches!(cmd, BaselineCmd::Ssim(_)) {
                MetricReport::new("ssim", baseline::ssim(&a, &b)?)
                    .with_extra("window", image::SSIM_WINDOW)
                    .with_extra("window_sigma", image::SSIM_SIGMA)
            } else {
                MetricReport::new("psnr", baseline::psnr(&a, &b)?).with_extra("mse", image::mse(&a, &b)?)
            };
            report.with_extra("width", a.width()).with_extra("height", a.height())
        }
        BaselineCmd::Retrieval(r) => {
            let q = embeddings(&r.queries, "queries", &mut inputs)?;
            let g = embeddings(&r.gallery, "gallery", &mut inputs)?;
            let pairing = match &r.pairs {
                Some(p) => {
                    inputs.push(("pairs", p.clone()));
                    read_pairs(p).flag("pairs")?
                }
                None => q.ids().iter().map(|id| (id.clone(), id.clone())).collect(),
            };
            let res = baseline::retrieval_topk(&q, &g, &pairing, &r.k).flag("k")?;
            let first = r.k.first().copied().unwrap_or(1);
            let mut report = MetricReport::new("retrieval", res.accuracy_at.get(&first).copied().unwrap_or(f64::NAN));
            for (k, acc) in &res.accuracy_at {
                report = report.with_extra(&format!("top{k}"), acc);
            }
            report.with_extra("ranks", &res.ranks)
        }
        BaselineCmd::Knn(a) => {
            let train = embeddings(&a.train, "train", &mut inputs)?;
            let test = embeddings(&a.test, "test", &mut inputs)?;
            let m = meta(&a.meta, "meta", &mut inputs)?;
            let tl = labels(&train, &m).flag("meta")?;
            let sl = labels(&test, &m).flag("meta")?;
            let acc = baseline::knn_probe(&train, &tl, &test, &sl, a.k).flag("k")?;
            MetricReport::new("knn", acc)
                .with_extra("k", a.k)
                .with_extra("train_samples", train.len())
                .with_extra("test_samples", test.len())
        }
    };
    with_inputs(report, &inputs)
}

fn run_audit(a: &AuditArgs) -> CliResult<MetricReport> {
    let mut inputs = Vec::new();
    let m = meta(&a.meta, "meta", &mut inputs)?;
    let e = match &a.embeddings {
        Some(p) => Some(embeddings(p, "embeddings", &mut inputs)?),
        None => None,
    };
    let report = audit_split(&m, e.as_ref(), a.tau).map_err(|error| CliError {
        flag: Some(match error {
            Error::ThresholdOutOfRange(_) => "tau",
            Error::MissingSample(_) => "embeddings",
            _ => "meta",
        }),
        error,
    })?;
    with_inputs(report.to_report(), &inputs)
}

fn out_file(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .map_err(|source| Error::File {
            path: dir.into(),
            source,
        })
        .flag("out-dir")
}

/// Digests of files a command wrote, keyed by file name.
fn outputs(paths: &[PathBuf]) -> CliResult<BTreeMap<String, String>> {
    paths
        .iter()
        .map(|p| {
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok((name, file_digest(p).flag("out-dir")?))
        })
        .collect()
}

fn run_split(a: &SplitArgs, flags: &CommonFlags) -> CliResult<MetricReport> {
    let mut inputs = Vec::new();
    let m = meta(&a.meta, "meta", &mut inputs)?;
    let seed = flags.seed.unwrap_or(0);
    let assignment = make_noleak_split(&m, a.test_frac, seed, a.stratify).flag("test-frac")?;
    let (train, test) = split_to_lists(&assignment);
    create_dir(&a.out_dir)?;
    let paths = [out_file(&a.out_dir, "train.txt"), out_file(&a.out_dir, "test.txt")];
    leakage::write_id_list(&paths[0], &train).flag("out-dir")?;
    leakage::write_id_list(&paths[1], &test).flag("out-dir")?;
    let report = assignment.to_report().with_extra("outputs", outputs(&paths)?);
    with_inputs(report, &inputs)
}

fn run_synth(a: &SynthArgs, flags: &CommonFlags) -> CliResult<MetricReport> {
    let spec = a.spec.spec(a.scenario.into(), flags.seed.unwrap_or(0));
    let out = generate_scenario(&spec)?;
    create_dir(&a.out_dir)?;
    let paths = [
        out_file(&a.out_dir, "embeddings.temb"),
        out_file(&a.out_dir, "meta.jsonl"),
        out_file(&a.out_dir, "generated.temb"),
    ];
    out.embeddings.write_temb(&paths[0]).flag("out-dir")?;
    write_meta(&out.meta, &paths[1]).flag("out-dir")?;
    out.generator_outputs.write_temb(&paths[2]).flag("out-dir")?;
    Ok(MetricReport::new("synth", out.embeddings.len() as f64)
        .with_extra("spec", &spec)
        .with_extra("samples", out.embeddings.len())
        .with_extra("generated_samples", out.generator_outputs.len())
        .with_extra("outputs", outputs(&paths)?))
}

fn run_study(a: &StudyArgs, flags: &CommonFlags) -> CliResult<MetricReport> {
    let seed = flags.seed.unwrap_or(0);
    let spec = a.spec.spec(Scenario::Clean, seed);
    let study = run_leak_study(&spec, a.test_frac, seed)?;
    Ok(study.to_report())
}

/// Runs the command line of the current process; used by the binary.
pub fn main_exit_code() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
