//! The `mfrpn` command line.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{self, ModelKind, NormSource, Profile, RunConfig};
use crate::data::{
    compute_stats, gen_synthetic_mf, load_dataset, normalize, write_dataset, Dataset, NormStats,
    SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::io_util;
use crate::matrix::Matrix;
use crate::metrics::{
    grouped_metrics, read_report_json, uncertainty_error_diagnostics, write_comparison_csv,
    write_report_csv, write_report_json, Binning, Grouping, R2Mode,
};
use crate::mf::{self, load_mf_ensemble, save_mf_ensemble, train_mf_ensemble};
use crate::rpn::{
    load_ensemble, save_ensemble, train_deterministic_baseline, train_sf_ensemble, Ensemble,
    LossTrace, PredictiveEnsemble,
};

pub const RUN_FILE: &str = "run.toml";
pub const LOSS_FILE: &str = "loss_trace.csv";

#[derive(Debug, Parser)]
#[command(name = "mfrpn", version, about = "Multi-fidelity randomized prior network ensembles")]
pub struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic low/high-fidelity training and test datasets.
    Gen(GenArgs),
    /// Train a model and write its checkpoint directory.
    Train(TrainArgs),
    /// Score a checkpoint on a test dataset.
    Eval(EvalArgs),
    /// Join several eval reports into one comparison table.
    Report(ReportArgs),
    /// Print the manifest or configuration of an artifact.
    Inspect(InspectArgs),
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected a:b, got {s:?}"))?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad number {a:?}"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad number {b:?}"))?;
    Ok((a, b))
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value = "forrester")]
    pub family: String,
    #[arg(long, default_value_t = 200)]
    pub lf_n: usize,
    #[arg(long, default_value_t = 20)]
    pub hf_n: usize,
    #[arg(long, default_value_t = 100)]
    pub test_n: usize,
    #[arg(long, env = config::SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = parse_range, default_value = "0:1.2")]
    pub lf_range: (f64, f64),
    #[arg(long, value_parser = parse_range, default_value = "0:0.7")]
    pub hf_range: (f64, f64),
    #[arg(long, value_parser = parse_range, default_value = "0.7:1.2")]
    pub test_range: (f64, f64),
    /// Number of output columns (tiled copies with seeded coefficients).
    #[arg(long, default_value_t = 1)]
    pub width: usize,
    /// Gaussian noise on training targets.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// `grid` or `random` input placement.
    #[arg(long, default_value = "grid")]
    pub sampling: String,
    /// Low-fidelity weight on the high-fidelity function.
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub lf_scale: f64,
    /// Low-fidelity linear trend coefficient.
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    pub lf_trend: f64,
    /// Low-fidelity constant offset.
    #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
    pub lf_offset: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite existing files.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub lf: Option<PathBuf>,
    #[arg(long)]
    pub hf: Option<PathBuf>,
    #[arg(long)]
    pub members: Option<usize>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Comma-separated hidden widths for every network.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub prior_scale: Option<f64>,
    /// `lf-stats` or `hf-stats`.
    #[arg(long)]
    pub normalization: Option<String>,
    /// Checkpoint directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Threads used for member-level parallelism.
    #[arg(long, env = config::JOBS_ENV)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Test dataset manifest (raw, unnormalized).
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated list of global, lon-lat, pressure-lat, temporal.
    #[arg(long, value_delimiter = ',', default_value = "global")]
    pub grouping: Vec<String>,
    /// Show negative R² as 0 in the CSV tables.
    #[arg(long)]
    pub clip_negative_r2: bool,
    /// Score the low-fidelity heads of an mf-rpn checkpoint.
    #[arg(long)]
    pub extract_lf: bool,
    /// Name used in report files; defaults to the model kind.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub crps_samples: Option<usize>,
    #[arg(long)]
    pub crps_seed: Option<u64>,
    /// Time steps per daily average.
    #[arg(long)]
    pub daily_window: Option<usize>,
    /// Score every time step even for climate data.
    #[arg(long, conflicts_with = "daily_window")]
    pub no_daily: bool,
    /// Also write per-sample predictions and spread.
    #[arg(long)]
    pub dump_predictions: bool,
    /// Bins per axis of the uncertainty/error histogram.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long)]
    pub equal_count_bins: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Eval report files (`*.json`), one per model, in column order.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub path: PathBuf,
}

/// Time steps per daily average for climate data scored without an explicit window.
pub const CLIMATE_DAILY_WINDOW: usize = 48;

pub fn main() -> i32 {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.kind().exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Report(a) => cmd_report(&a),
        Command::Inspect(a) => cmd_inspect(&a),
    }
}

fn refuse_existing(paths: &[PathBuf], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    if let Some(p) = paths.iter().find(|p| p.exists()) {
        return Err(Error::InvalidConfig(format!(
            "{} already exists; pass --force to overwrite",
            p.display()
        )));
    }
    Ok(())
}

pub fn cmd_gen(a: &GenArgs) -> Result<()> {
    let spec = SyntheticSpec {
        family: serde_plain(&a.family, "family")?,
        lf_n: a.lf_n,
        hf_n: a.hf_n,
        test_n: a.test_n,
        lf_range: a.lf_range,
        hf_range: a.hf_range,
        test_range: a.test_range,
        output_width: a.width,
        noise_std: a.noise,
        sampling: serde_plain(&a.sampling, "sampling")?,
        lf_scale: a.lf_scale,
        lf_trend: a.lf_trend,
        lf_offset: a.lf_offset,
    };
    let names = ["lf_train.json", "hf_train.json", "hf_test.json", "lf_stats.json"];
    let paths: Vec<PathBuf> = names.iter().map(|n| a.out.join(n)).collect();
    refuse_existing(&paths, a.force)?;
    let sets = gen_synthetic_mf(&spec, a.seed)?;
    write_dataset(&sets.lf_train, &paths[0])?;
    write_dataset(&sets.hf_train, &paths[1])?;
    write_dataset(&sets.hf_test, &paths[2])?;
    compute_stats(&sets.lf_train)?.save(&paths[3])?;
    for p in &paths {
        println!("{}", p.display());
    }
    Ok(())
}

fn serde_plain<T: serde::de::DeserializeOwned>(s: &str, what: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Error::InvalidConfig(format!("unknown {what} {s:?}")))
}

/// The resolved configuration for `train`: profile, file, environment, flags.
pub fn resolve_train_config(a: &TrainArgs) -> Result<RunConfig> {
    let profile = a.profile.as_deref().map(str::parse::<Profile>).transpose()?;
    let mut cfg = RunConfig::load(a.config.as_deref(), profile)?;
    cfg.apply_env()?;
    if let Some(m) = &a.model {
        cfg.model = m.parse()?;
    }
    if let Some(p) = &a.lf {
        cfg.data.lf = Some(p.clone());
    }
    if let Some(p) = &a.hf {
        cfg.data.hf = Some(p.clone());
    }
    if let Some(n) = a.members {
        cfg.train.members = n;
    }
    if let Some(s) = a.steps {
        cfg.train.steps = s;
    }
    if let Some(s) = a.seed {
        cfg.train.ensemble_seed = s;
    }
    if let Some(lr) = a.lr {
        cfg.train.adam.base_lr = lr;
    }
    if let Some(h) = &a.hidden {
        cfg.train.hidden_dims = h.clone();
        cfg.train.hf_hidden_dims = h.clone();
    }
    if let Some(b) = a.prior_scale {
        cfg.train.prior_scale = b;
    }
    if let Some(n) = &a.normalization {
        cfg.normalization = Some(n.parse::<NormSource>()?);
    }
    cfg.normalization = Some(cfg.normalization_source());
    cfg.validate()?;
    Ok(cfg)
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start {n} worker threads: {e}")))?
            .install(f),
        None => f(),
    }
}

fn write_loss_traces(path: &Path, traces: &[LossTrace]) -> Result<()> {
    let mut out = String::from("member,step,loss,lf_term,hf_term\n");
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for t in traces {
        for p in &t.points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                t.member,
                p.step,
                p.loss,
                opt(p.lf_term),
                opt(p.hf_term)
            ));
        }
    }
    io_util::write(path, out.as_bytes())
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = resolve_train_config(a)?;
    refuse_existing(&[a.out.join(RUN_FILE)], a.force)?;
    let jobs = a.jobs.or(config::jobs_from_env()?);
    let hf_raw = load_dataset(cfg.data.hf.as_ref().expect("validated"))?;
    let lf_raw = cfg.data.lf.as_ref().map(|p| load_dataset(p)).transpose()?;
    let source = match cfg.normalization_source() {
        NormSource::LfStats => lf_raw.as_ref().expect("validated"),
        NormSource::HfStats => &hf_raw,
    };
    let stats = compute_stats(source)?;
    if !stats.degenerate_features().is_empty() {
        log::warn!("degenerate features: {:?}", stats.degenerate_features());
    }
    let hf = normalize(&hf_raw, &stats)?;
    log::info!(
        "training {} ({} members, {} steps) on {} high-fidelity samples",
        cfg.model,
        cfg.train.members,
        cfg.train.steps,
        hf.len()
    );
    let traces = match cfg.model {
        ModelKind::MfRpn => {
            let lf = normalize(lf_raw.as_ref().expect("validated"), &stats)?;
            let ens = with_jobs(jobs, || train_mf_ensemble(&lf, &hf, &cfg.train))?;
            save_mf_ensemble(&ens, &a.out, Some(&stats))?;
            ens.loss_traces
        }
        ModelKind::SfHfRpn => {
            let ens = with_jobs(jobs, || train_sf_ensemble(&hf, &cfg.train))?;
            save_ensemble(&ens, &a.out, Some(&stats))?;
            ens.loss_traces
        }
        ModelKind::Deterministic => {
            let ens = train_deterministic_baseline(&hf, &cfg.train)?;
            save_ensemble(&ens, &a.out, Some(&stats))?;
            ens.loss_traces
        }
    };
    write_loss_traces(&a.out.join(LOSS_FILE), &traces)?;
    cfg.save(&a.out.join(RUN_FILE))?;
    println!("{}", a.out.display());
    Ok(())
}

/// A checkpoint loaded for prediction, with the statistics it was trained under.
pub struct LoadedModel {
    pub name: String,
    pub run: RunConfig,
    pub stats: NormStats,
    kind: Loaded,
}

enum Loaded {
    Single(Ensemble),
    Multi(mf::MfEnsemble),
}

impl LoadedModel {
    pub fn open(dir: &Path, extract_lf: bool) -> Result<Self> {
        let run = RunConfig::read(&dir.join(RUN_FILE))?;
        let (kind, stats, name) = match (run.model, extract_lf) {
            (ModelKind::MfRpn, false) => {
                let (e, s) = load_mf_ensemble(dir)?;
                (Loaded::Multi(e), s, "mf-rpn")
            }
            (ModelKind::MfRpn, true) => {
                let (e, s) = load_mf_ensemble(dir)?;
                (Loaded::Single(mf::extract_lf_model(&e)?), s, "lf-rpn")
            }
            (other, true) => {
                return Err(Error::InvalidConfig(format!(
                    "--extract-lf needs an mf-rpn checkpoint, {} is {other}",
                    dir.display()
                )))
            }
            (other, false) => {
                let (e, s) = load_ensemble(dir)?;
                (Loaded::Single(e), s, other.as_str())
            }
        };
        let stats = stats.ok_or_else(|| {
            Error::load(dir, "checkpoint carries no normalization statistics")
        })?;
        Ok(Self {
            name: name.to_string(),
            run,
            stats,
            kind,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.stats.input_names.len()
    }

    pub fn output_dim(&self) -> usize {
        self.stats.output_names.len()
    }

    pub fn member_count(&self) -> usize {
        match &self.kind {
            Loaded::Single(e) => e.len(),
            Loaded::Multi(e) => e.len(),
        }
    }

    /// Member predictions for a raw dataset, in physical units.
    pub fn predict(&self, dataset: &Dataset) -> Result<PredictiveEnsemble> {
        let schema = dataset.schema();
        let ins: Vec<String> = schema.input_features.iter().map(|f| f.name.clone()).collect();
        let outs: Vec<String> = schema.output_features.iter().map(|f| f.name.clone()).collect();
        if ins != self.stats.input_names || outs != self.stats.output_names {
            return Err(Error::Schema(format!(
                "checkpoint schema {:?} has inputs {:?} and outputs {:?}; dataset schema {:?} has inputs {:?} and outputs {:?}",
                self.stats.schema, self.stats.input_names, self.stats.output_names, schema.name, ins, outs
            )));
        }
        if !dataset.is_raw() {
            return Err(Error::InvalidState(format!(
                "dataset {:?} is already normalized; evaluation expects raw data",
                dataset.name
            )));
        }
        self.predict_inputs(dataset.inputs())
    }

    /// Member predictions for raw inputs laid out in the checkpoint's feature order.
    pub fn predict_inputs(&self, inputs: &Matrix) -> Result<PredictiveEnsemble> {
        if inputs.cols() != self.stats.input_names.len() {
            return Err(Error::Shape(format!(
                "model takes {} input features, got {}",
                self.stats.input_names.len(),
                inputs.cols()
            )));
        }
        let x = self.stats.normalize_inputs(inputs)?;
        let normalized = match &self.kind {
            Loaded::Single(e) => e.predict(&x)?,
            Loaded::Multi(e) => e.predict(&x)?.hf,
        };
        let members = normalized
            .member_outputs
            .iter()
            .map(|m| self.stats.denormalize_outputs(m))
            .collect::<Result<Vec<Matrix>>>()?;
        PredictiveEnsemble::from_members(members)
    }
}

fn write_predictions(path: &Path, dataset: &Dataset, pred: &PredictiveEnsemble) -> Result<()> {
    let mut header: Vec<String> = dataset.axes().iter().map(|a| a.name.clone()).collect();
    for f in &dataset.schema().output_features {
        header.push(format!("{}:target", f.name));
        header.push(format!("{}:mean", f.name));
        header.push(format!("{}:sigma", f.name));
    }
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..dataset.len() {
        let mut cells: Vec<String> = dataset
            .sample_coords(i)
            .iter()
            .zip(dataset.axes())
            .map(|(&k, a)| a.values[k as usize].to_string())
            .collect();
        for j in 0..dataset.targets().cols() {
            cells.push(dataset.targets().get(i, j).to_string());
            cells.push(pred.mean.get(i, j).to_string());
            cells.push(pred.sigma.get(i, j).to_string());
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    io_util::write(path, out.as_bytes())
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let groupings = a
        .grouping
        .iter()
        .map(|g| g.parse::<Grouping>())
        .collect::<Result<Vec<_>>>()?;
    let model = LoadedModel::open(&a.checkpoint, a.extract_lf)?;
    let dataset = load_dataset(&a.data)?;
    let pred = model.predict(&dataset)?;

    let mut mc = model.run.metrics.clone();
    if a.clip_negative_r2 {
        mc.r2_mode = R2Mode::Clipped;
    }
    if let Some(n) = a.crps_samples {
        mc.crps_samples = n;
    }
    if let Some(s) = a.crps_seed {
        mc.crps_seed = s;
    }
    if a.no_daily {
        mc.daily_window = None;
    } else if a.daily_window.is_some() {
        mc.daily_window = a.daily_window;
    } else if mc.daily_window.is_none() && dataset.schema().name == "climate" {
        mc.daily_window = Some(CLIMATE_DAILY_WINDOW);
    }
    let name = a.name.clone().unwrap_or_else(|| model.name.clone());
    for g in groupings {
        let report = grouped_metrics(&name, &dataset, &pred, g, &mc)?;
        let stem = format!("{name}.{g}");
        write_report_csv(&report, &a.out.join(format!("{stem}.csv")))?;
        write_report_json(&report, &a.out.join(format!("{stem}.json")))?;
        println!("{}", a.out.join(format!("{stem}.csv")).display());
    }

    let binning = if a.equal_count_bins { Binning::EqualCount } else { Binning::EqualWidth };
    let mut diagnostics = serde_json::Map::new();
    for (j, f) in dataset.schema().output_features.iter().enumerate() {
        let sigma = pred.sigma.col(j);
        let err: Vec<f64> = pred
            .mean
            .col(j)
            .iter()
            .zip(dataset.targets().col(j))
            .map(|(p, y)| (p - y).abs())
            .collect();
        let value = match uncertainty_error_diagnostics(&sigma, &err, a.bins, binning) {
            Ok(d) => serde_json::to_value(d).map_err(|e| Error::InvalidState(e.to_string()))?,
            Err(Error::InsufficientData { .. }) => serde_json::Value::Null,
            Err(e) => return Err(e),
        };
        diagnostics.insert(f.name.clone(), value);
    }
    io_util::write_json(&a.out.join(format!("{name}.diagnostics.json")), &diagnostics)?;
    if a.dump_predictions {
        write_predictions(&a.out.join(format!("{name}.predictions.csv")), &dataset, &pred)?;
    }
    Ok(())
}

pub fn cmd_report(a: &ReportArgs) -> Result<()> {
    let reports = a
        .reports
        .iter()
        .map(|p| read_report_json(p))
        .collect::<Result<Vec<_>>>()?;
    write_comparison_csv(&reports, &a.out)?;
    println!("{}", a.out.display());
    Ok(())
}

const MANIFESTS: [&str; 3] = ["mf_ensemble.toml", "ensemble.toml", RUN_FILE];

pub fn cmd_inspect(a: &InspectArgs) -> Result<()> {
    let files: Vec<PathBuf> = if a.path.is_dir() {
        let found: Vec<PathBuf> = MANIFESTS
            .iter()
            .map(|m| a.path.join(m))
            .filter(|p| p.is_file())
            .collect();
        if found.is_empty() {
            return Err(Error::load(&a.path, "no manifest found in directory"));
        }
        found
    } else {
        vec![a.path.clone()]
    };
    for f in files {
        let text = String::from_utf8(io_util::read(&f)?)
            .map_err(|_| Error::format(&f, "not a text manifest"))?;
        println!("== {}", f.display());
        print!("{text}");
        if !text.ends_with('\n') {
            println!();
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn train_args(extra: &[&str]) -> TrainArgs {
        let mut argv = vec!["mfrpn", "train", "--out", "unused"];
        argv.extend_from_slice(extra);
        match Cli::try_parse_from(argv).unwrap().command {
            Command::Train(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn later_sources_override_earlier_ones() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "profile = \"desk\"\nmodel = \"sf-hf-rpn\"\n[data]\nhf = \"hf.toml\"\n[train]\nensemble_seed = \"3\"\nsteps = 77\nmembers = 5\n",
        )
        .unwrap();
        let p = path.to_str().unwrap();

        let file_only = resolve_train_config(&train_args(&["--config", p])).unwrap();
        assert_eq!(file_only.train.steps, 77);
        assert_eq!(file_only.train.members, 5);
        assert_eq!(file_only.data.hf, Some(dir.path().join("hf.toml")));

        std::env::set_var(config::SEED_ENV, "9");
        let env = resolve_train_config(&train_args(&["--config", p]));
        let flags = resolve_train_config(&train_args(&["--config", p, "--seed", "11", "--steps", "5"]));
        std::env::remove_var(config::SEED_ENV);
        assert_eq!(env.unwrap().train.ensemble_seed, 9);
        let flags = flags.unwrap();
        assert_eq!(flags.train.ensemble_seed, 11);
        assert_eq!(flags.train.steps, 5);
        assert_eq!(flags.train.members, 5);
        assert_eq!(file_only.train.ensemble_seed, 3);
    }

    #[test]
    fn ranges_parse() {
        assert_eq!(parse_range("-1:2.5"), Ok((-1.0, 2.5)));
        assert!(parse_range("3").is_err());
        assert!(parse_range("2:x").is_err());
    }
}
