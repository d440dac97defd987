//! `tsrec` command-line front end.
//!
//! Exit codes: 0 success, 1 other failure, 2 recommendation inapplicable,
//! 64 usage error, 65 malformed input data, 74 I/O error.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use tsrec::augment::{AugmentationKind, Method};
use tsrec::contrastive::{benchmark_run, BenchmarkConfig, EncoderConfig, TrainConfig};
use tsrec::dataset::{LabeledDataset, TimeSeries};
use tsrec::rankings::{realworld_truth, RankedAugmentations, SyntheticTable};
use tsrec::recommend::{
    component_similarities, fixture_by_name, recall_at_k, recommend, SimilarityMode, SimilarityOptions,
    DEFAULT_THRESHOLD, REALWORLD_FIXTURES,
};
use tsrec::stl::{dataset_profile, default_periods, stl_decompose_with, StlConfig};
use tsrec::synthgen::{gen_dataset, sample_seed, DatasetId, SynthConfig, DEFAULT_SEED};
use tsrec::Error;

const EXIT_INAPPLICABLE: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_IO: u8 = 74;

#[derive(Debug, Parser)]
#[command(name = "tsrec", version, about = "Augmentation recommendation for contrastive time-series learning")]
struct Cli {
    /// Base seed of every random stream.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic benchmark dataset (CSV plus JSON sidecar).
    Synth(SynthArgs),
    /// Apply one augmentation to every sample of a dataset.
    Augment(AugmentArgs),
    /// STL-decompose every sample at one period.
    Decompose(DecomposeArgs),
    /// Recommend augmentations for a dataset or a shipped profile.
    Recommend(RecommendArgs),
    /// Rank augmentations by contrastive pretraining on a labelled dataset.
    Benchmark(BenchmarkArgs),
    /// Recall@1..=K of a recommendation against a ground-truth ranking.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Dataset identifier, A1 through D3.
    #[arg(long)]
    dataset: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    samples_per_class: usize,
    #[arg(long, default_value_t = 100)]
    len: usize,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Augmentation method name, e.g. jitter, resize, freq_mask.
    #[arg(long)]
    aug: String,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lo: Option<f64>,
    #[arg(long)]
    hi: Option<f64>,
    #[arg(long)]
    per_step: bool,
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long)]
    crop_fraction: Option<f64>,
    #[arg(long)]
    mask_fraction: Option<f64>,
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    period: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Zero-based sample indices to write; all samples when omitted.
    #[arg(long, value_delimiter = ',')]
    samples: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    SampleAverage,
    MeanProfile,
}

#[derive(Debug, Args)]
struct RecommendArgs {
    #[arg(long = "in", conflicts_with = "profile", required_unless_present = "profile")]
    input: Option<PathBuf>,
    /// Shipped real-world profile (HAR, PTB, FD, MP, ElecD, SPX500).
    #[arg(long)]
    profile: Option<String>,
    /// Candidate periods; defaults to len/2, len/4, len/8, len/16.
    #[arg(long, value_delimiter = ',')]
    periods: Option<Vec<usize>>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, value_enum, default_value_t = Mode::SampleAverage)]
    mode: Mode,
    /// Use signed rather than absolute cosine similarity.
    #[arg(long)]
    signed: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Augmentations to compare; all eight when omitted.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    jobs: Option<usize>,
    /// Start from the desk-scale training preset instead of the defaults.
    #[arg(long)]
    desk_scale: bool,
    #[arg(long)]
    pretrain_epochs: Option<usize>,
    #[arg(long)]
    finetune_epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    head_learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    label_ratio: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// A recommendation report or a JSON array of method names.
    #[arg(long)]
    recommended: PathBuf,
    /// A JSON list of tie groups, a benchmark report, or a ranking file
    /// (with --dataset). Defaults to the shipped real-world rankings.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tsrec: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Inapplicable { .. } => EXIT_INAPPLICABLE,
        Error::Config(_) => EXIT_USAGE,
        Error::Csv { .. } | Error::Shape(_) | Error::Json(_) | Error::Stratification(_) => EXIT_DATA,
        Error::Io(_) => EXIT_IO,
        _ => 1,
    }
}

fn run(cli: Cli) -> tsrec::Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Synth(a) => synth(a, seed),
        Command::Augment(a) => augment(a, seed),
        Command::Decompose(a) => decompose(a),
        Command::Recommend(a) => recommend_cmd(a),
        Command::Benchmark(a) => benchmark(a, seed),
        Command::Evaluate(a) => evaluate(a),
    }
}

fn print_json<T: Serialize>(v: &T) -> tsrec::Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> tsrec::Result<()> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, v)?;
    writeln!(f)?;
    Ok(())
}

fn synth(a: SynthArgs, seed: u64) -> tsrec::Result<()> {
    let id: DatasetId = a.dataset.parse()?;
    let cfg = SynthConfig {
        sample_len: a.len,
        samples_per_class: a.samples_per_class,
        seed,
        ..SynthConfig::default()
    };
    gen_dataset(id, &cfg)?.data.save(&a.out)
}

fn augmentation_kind(a: &AugmentArgs) -> tsrec::Result<AugmentationKind> {
    let method: Method = a.aug.parse()?;
    let mut kind = method
        .default_kind()
        .ok_or_else(|| Error::Config(format!("{method} is not an augmentation")))?;
    match &mut kind {
        AugmentationKind::Jitter { sigma } => *sigma = a.sigma.unwrap_or(*sigma),
        AugmentationKind::Scale { lo, hi, per_step } => {
            *lo = a.lo.unwrap_or(*lo);
            *hi = a.hi.unwrap_or(*hi);
            *per_step |= a.per_step;
        }
        AugmentationKind::Permute { num_segments } => *num_segments = a.segments.unwrap_or(*num_segments),
        AugmentationKind::Resize { crop_fraction } => *crop_fraction = a.crop_fraction.unwrap_or(*crop_fraction),
        AugmentationKind::TimeMask { mask_fraction } | AugmentationKind::FreqMask { mask_fraction } => {
            *mask_fraction = a.mask_fraction.unwrap_or(*mask_fraction)
        }
        AugmentationKind::Flip | AugmentationKind::TimeNeighbor => {}
    }
    kind.validate()?;
    Ok(kind)
}

fn augment(a: AugmentArgs, seed: u64) -> tsrec::Result<()> {
    let kind = augmentation_kind(&a)?;
    let ds = LabeledDataset::load(&a.input)?;
    let samples = ds
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, 0xA116, i));
            Ok(TimeSeries {
                values: kind.apply(&s.values, &mut rng)?,
                ..s.clone()
            })
        })
        .collect::<tsrec::Result<Vec<_>>>()?;
    let mut meta = ds.metadata.clone();
    meta.name = format!("{}+{}", meta.name, a.aug);
    let out = LabeledDataset::new(samples, ds.labels.clone(), meta)?;
    match a.out {
        Some(p) => out.save(&p),
        None => out.write_csv(io::stdout().lock()),
    }
}

fn decompose(a: DecomposeArgs) -> tsrec::Result<()> {
    let ds = LabeledDataset::load(&a.input)?;
    let cfg = StlConfig::default();
    let idx: Vec<usize> = a.samples.unwrap_or_else(|| (0..ds.len()).collect());
    if let Some(&bad) = idx.iter().find(|&&i| i >= ds.len()) {
        return Err(Error::Config(format!("sample {bad} out of range 0..{}", ds.len())));
    }
    fs::create_dir_all(&a.out_dir)?;
    let width = ds.len().saturating_sub(1).to_string().len();
    for i in idx {
        let x = &ds.samples[i].values;
        let d = stl_decompose_with(x, a.period, &cfg)?;
        let f = fs::File::create(a.out_dir.join(format!("decomposition_{i:0width$}.csv")))?;
        d.write_csv(x, io::BufWriter::new(f))?;
    }
    let profile = dataset_profile(&ds, &[a.period], &cfg)?;
    write_json(&a.out_dir.join("profile.json"), &profile)
}

fn recommend_cmd(a: RecommendArgs) -> tsrec::Result<()> {
    let table = SyntheticTable::canonical()?;
    let report = match (&a.profile, &a.input) {
        (Some(name), _) => {
            let fx = fixture_by_name(name).ok_or_else(|| {
                let known: Vec<&str> = REALWORLD_FIXTURES.iter().map(|f| f.name).collect();
                Error::Config(format!("unknown profile {name:?}; known: {}", known.join(", ")))
            })?;
            fx.report()?
        }
        (None, Some(path)) => {
            let ds = LabeledDataset::load(path)?;
            let periods = a.periods.clone().unwrap_or_else(|| default_periods(ds.sample_len()));
            let profile = dataset_profile(&ds, &periods, &StlConfig::default())?;
            let opts = SimilarityOptions {
                mode: match a.mode {
                    Mode::SampleAverage => SimilarityMode::SampleAverage,
                    Mode::MeanProfile => SimilarityMode::MeanProfile,
                },
                orientation_free: !a.signed,
            };
            component_similarities(&profile, &opts)?
        }
        (None, None) => return Err(Error::Config("either --in or --profile is required".into())),
    };
    let rec = recommend(&report, &table, a.k, a.threshold)?;
    match a.format {
        Format::Json => print_json(&rec),
        Format::Csv => {
            let mut out = io::stdout().lock();
            writeln!(out, "rank,method")?;
            for (i, m) in rec.top_k.iter().enumerate() {
                writeln!(out, "{},{}", i + 1, m)?;
            }
            Ok(())
        }
    }
}

fn benchmark(a: BenchmarkArgs, seed: u64) -> tsrec::Result<()> {
    let ds = LabeledDataset::load(&a.input)?;
    let methods: Vec<Method> = match &a.methods {
        Some(ms) => ms.iter().map(|m| m.parse()).collect::<tsrec::Result<_>>()?,
        None => Method::AUGMENTATIONS.to_vec(),
    };
    let mut train = if a.desk_scale {
        TrainConfig::desk_scale(seed)
    } else {
        TrainConfig {
            seed,
            ..TrainConfig::default()
        }
    };
    train.repeats = a.repeats;
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = a.$field { train.$field = v; })* };
    }
    set!(pretrain_epochs, finetune_epochs, learning_rate, head_learning_rate, batch_size, label_ratio, temperature);
    let bench = BenchmarkConfig {
        encoder: EncoderConfig {
            seed,
            ..EncoderConfig::default()
        },
        train,
        pair_overrides: BTreeMap::new(),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = a.jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let report = pool.install(|| benchmark_run(&ds, &methods, &bench))?;
    match a.out {
        Some(p) => write_json(&p, &report),
        None => print_json(&report),
    }
}

fn read_json(path: &Path) -> tsrec::Result<Value> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

fn methods_from(v: &Value, what: &str) -> tsrec::Result<Vec<Method>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Shape(format!("{what}: expected an array of method names")))?;
    arr.iter()
        .map(|m| {
            m.as_str()
                .ok_or_else(|| Error::Shape(format!("{what}: method names must be strings")))?
                .parse()
        })
        .collect()
}

fn groups_from(v: &Value, what: &str) -> tsrec::Result<Vec<Vec<Method>>> {
    v.as_array()
        .ok_or_else(|| Error::Shape(format!("{what}: expected a list of tie groups")))?
        .iter()
        .map(|g| methods_from(g, what))
        .collect()
}

fn load_truth(a: &EvaluateArgs) -> tsrec::Result<RankedAugmentations> {
    let need_dataset = || Error::Config("--dataset is required to pick a ranking".into());
    let Some(path) = &a.truth else {
        let name = a.dataset.as_ref().ok_or_else(need_dataset)?;
        let all = realworld_truth()?;
        return all
            .into_iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, r)| r)
            .ok_or_else(|| Error::Config(format!("no shipped ranking for {name:?}")));
    };
    let v = read_json(path)?;
    let what = path.display().to_string();
    let groups = if let Some(tg) = v.get("tie_groups") {
        groups_from(tg, &what)?
    } else if let Some(rankings) = v.get("rankings") {
        let name = a.dataset.as_ref().ok_or_else(need_dataset)?;
        let obj = rankings
            .as_object()
            .ok_or_else(|| Error::Shape(format!("{what}: rankings must be an object")))?;
        let (_, g) = obj
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Config(format!("{what} has no ranking for {name:?}")))?;
        groups_from(g, &what)?
    } else {
        groups_from(&v, &what)?
    };
    RankedAugmentations::from_groups(what, &groups)
}

#[derive(Debug, Serialize)]
struct RecallAt {
    k: usize,
    recall: f64,
}

#[derive(Debug, Serialize)]
struct Evaluation {
    recommended: Vec<Method>,
    truth_order: Vec<Method>,
    recall: Vec<RecallAt>,
}

fn evaluate(a: EvaluateArgs) -> tsrec::Result<()> {
    let v = read_json(&a.recommended)?;
    let what = a.recommended.display().to_string();
    let recommended = match v.get("top_k") {
        Some(top) => methods_from(top, &what)?,
        None => methods_from(&v, &what)?,
    };
    let truth = load_truth(&a)?;
    let recall = (1..=a.k)
        .map(|k| Ok(RecallAt { k, recall: recall_at_k(&recommended, &truth, k)? }))
        .collect::<tsrec::Result<Vec<_>>>()?;
    let eval = Evaluation {
        recommended,
        truth_order: truth.strict_order(),
        recall,
    };
    match a.format {
        Format::Json => print_json(&eval),
        Format::Csv => {
            let mut out = io::stdout().lock();
            writeln!(out, "k,recall")?;
            for r in &eval.recall {
                writeln!(out, "{},{}", r.k, r.recall)?;
            }
            Ok(())
        }
    }
}
