//! `removal-eval` command-line interface.

mod commands;
mod exit;
mod meta;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use removal_eval::features::{Backend, DEFAULT_INPUT_EDGE, DEFAULT_NEURAL_DIM};
use removal_eval::svm::SvmConfig;
use serde::Serialize;

use crate::exit::Failure;

#[derive(Debug, Parser, Serialize)]
#[command(name = "removal-eval", version, about = "Evaluate object removers against target-class-free comparison sets")]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "REMOVAL_EVAL_THREADS")]
    #[serde(skip)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Extract features from a directory of PNGs or a manifest.
    Extract(ExtractArgs),
    /// Build query and comparison manifests from COCO-format annotations.
    SelectSets(SelectArgs),
    /// Write dilated masks for every row of a manifest.
    Dilate(DilateArgs),
    /// Compute Fréchet distance and SVM unseparability (plus optional paired metrics).
    Eval(EvalArgs),
    /// Relative standard deviation of the metrics over query subsamples.
    Rsd(RsdArgs),
    /// Render a synthetic paired benchmark.
    Synth(SynthArgs),
    /// Rank remover reports per metric.
    Rank(RankArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendArg {
    Toy,
    Neural,
    Precomputed,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Toy => Backend::Toy,
            BackendArg::Neural => Backend::Neural,
            BackendArg::Precomputed => Backend::Precomputed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleArg {
    Query,
    Comparison,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtractArgs {
    /// Directory of PNG images; ids are file stems.
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    pub images: Option<PathBuf>,
    /// Manifest whose rows select the images.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Keep only manifest rows with this role.
    #[arg(long, requires = "manifest")]
    pub role: Option<RoleArg>,
    /// Keep only manifest rows with this variant.
    #[arg(long, requires = "manifest")]
    pub variant: Option<String>,
    /// Keep only manifest rows with this kernel size.
    #[arg(long, requires = "manifest")]
    pub kernel: Option<u32>,
    #[arg(long, value_enum, default_value = "toy")]
    pub backend: BackendArg,
    /// ONNX model (neural) or feature container (precomputed).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_INPUT_EDGE)]
    pub input_edge: u32,
    #[arg(long, default_value_t = DEFAULT_NEURAL_DIM)]
    pub output_dim: usize,
    /// Declare whether the images may show target-class objects.
    #[arg(long)]
    pub contains_target: Option<bool>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    /// Category name or numeric id.
    #[arg(long)]
    pub category: String,
    #[arg(long, default_value_t = 0.05)]
    pub min_cov: f64,
    #[arg(long, default_value_t = 0.4)]
    pub max_cov: f64,
    /// Directory the annotation file names are relative to.
    #[arg(long, default_value = ".")]
    pub images_root: PathBuf,
    /// Write undilated class masks of query images here.
    #[arg(long)]
    pub mask_dir: Option<PathBuf>,
    /// Ignore crowd regions when building masks.
    #[arg(long)]
    pub exclude_crowd: bool,
    #[arg(long)]
    pub out_query: PathBuf,
    #[arg(long)]
    pub out_comparison: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DilateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = removal_eval::dataset::DEFAULT_KERNELS)]
    pub kernels: Vec<u32>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SvmArgs {
    /// Hinge-loss weight; the regularizer is 1/(c·n).
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 200)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

impl SvmArgs {
    pub fn config(&self, seed: u64) -> SvmConfig {
        SvmConfig {
            c: self.c,
            max_epochs: self.max_epochs,
            tol: self.tol,
            seed,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long)]
    pub comparison: PathBuf,
    /// Report FID*/U-IDS*; requires a comparison set free of target-class objects.
    #[arg(long)]
    pub starred: bool,
    /// Override the comparison set's declared target-class content.
    #[arg(long)]
    pub comparison_contains_target: Option<bool>,
    /// Remover label (defaults to the query file stem).
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long)]
    pub kernel: Option<u32>,
    #[arg(long, requires = "max_cov")]
    pub min_cov: Option<f64>,
    #[arg(long, requires = "min_cov")]
    pub max_cov: Option<f64>,
    #[command(flatten)]
    pub svm: SvmArgs,
    /// Seed for the SVM's example order.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `query_id,real_id` CSV; adds P-IDS.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Real-side features for P-IDS (defaults to the comparison features).
    #[arg(long, requires = "pairs")]
    pub pairs_real: Option<PathBuf>,
    /// `id,reference,candidate` CSV of PNGs; adds PSNR and SSIM.
    #[arg(long)]
    pub image_pairs: Option<PathBuf>,
    /// `id,distance` CSV of externally computed LPIPS values.
    #[arg(long)]
    pub lpips: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "f64")]
    pub precision: Precision,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RsdArgs {
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long)]
    pub comparison: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    /// Subsamples per size (at least 2).
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(2..))]
    pub iterations: u32,
    /// Seed for subsampling and the SVM's example order.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub comparison_contains_target: Option<bool>,
    #[command(flatten)]
    pub svm: SvmArgs,
    #[arg(long, value_enum, default_value = "f64")]
    pub precision: Precision,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub n_scenes: usize,
    /// Extra scenes emitted under the comparison role.
    #[arg(long, default_value_t = 0)]
    pub comparison_scenes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 128)]
    pub width: u32,
    #[arg(long, default_value_t = 128)]
    pub height: u32,
    #[arg(long, default_value_t = 2)]
    pub min_objects: u32,
    #[arg(long, default_value_t = 6)]
    pub max_objects: u32,
    #[arg(long, default_value_t = 10)]
    pub min_size: u32,
    #[arg(long, default_value_t = 40)]
    pub max_size: u32,
    #[arg(long, default_value_t = 0.5)]
    pub target_fraction: f64,
    #[arg(long, default_value_t = 0.4)]
    pub max_coverage: f64,
    #[arg(long, value_delimiter = ',', default_value = "gt_paste,mean_fill,noise_fill,no_removal")]
    pub methods: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = removal_eval::dataset::DEFAULT_KERNELS)]
    pub kernels: Vec<u32>,
}

#[derive(Debug, Args, Serialize)]
pub struct RankArgs {
    /// MetricReport JSON files.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| Failure::new(exit::ENVIRONMENT, format!("cannot start thread pool: {e}")))?;
    let echo = serde_json::to_value(&cli).expect("arguments serialize");
    pool.install(|| match &cli.command {
        Command::Extract(a) => commands::extract(a, &echo),
        Command::SelectSets(a) => commands::select_sets(a, &echo),
        Command::Dilate(a) => commands::dilate(a, &echo),
        Command::Eval(a) => commands::eval(a, &echo),
        Command::Rsd(a) => commands::rsd(a, &echo),
        Command::Synth(a) => commands::synth(a),
        Command::Rank(a) => commands::rank(a),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
