//! Command-line front end: simulate, train, predict, evaluate, undersample.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::em::{fit, EmConfig, ZitModel};
use crate::error::{Error, Result};
use crate::io::{
    load_csv, load_features, load_model, load_with_schema, save_model, undersample_rows, write_dataset_csv,
    write_rows_csv, write_text_atomic, CsvOptions,
};
use crate::metrics::{evaluate_model, GiniWeighting};
use crate::profile::{fit_profile, ZetaGrid};
use crate::simulation::{make_dataset, ExposureLaw, SimulationDesign};
use crate::tweedie::PowerParam;

#[derive(Debug, Parser)]
#[command(name = "zit", version, about = "Zero-inflated Tweedie boosting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset and its ground truth.
    Simulate(SimulateArgs),
    /// Fit a model at one power or over a grid of powers.
    Train(TrainArgs),
    /// Per-row mean, dispersion, zero-state probability and pure premium.
    Predict(PredictArgs),
    /// Hold-out metrics and the ordered Lorenz curve.
    Evaluate(EvaluateArgs),
    /// Keep all zero rows and a fraction of the positive ones.
    Undersample(UndersampleArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExposureChoice {
    Unit,
    Uniform,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub p: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.5)]
    pub zeta: f64,
    /// Expected share of zero responses; without it the mean zero-state
    /// probability is 0.3.
    #[arg(long)]
    pub target_zero_rate: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub mu_scale: f64,
    #[arg(long, default_value_t = 0.3)]
    pub phi_scale: f64,
    #[arg(long, default_value_t = 0.5)]
    pub pi_scale: f64,
    #[arg(long, value_enum, default_value_t = ExposureChoice::Unit)]
    pub exposure: ExposureChoice,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "y")]
    pub target: String,
    /// Exposure column; exposures are 1.0 without it.
    #[arg(long)]
    pub exposure: Option<String>,
    /// Comma-separated categorical columns.
    #[arg(long, value_delimiter = ',')]
    pub categoricals: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, conflicts_with = "zeta_grid")]
    pub zeta: Option<f64>,
    /// Power grid as start:stop:step.
    #[arg(long)]
    pub zeta_grid: Option<String>,
    #[arg(long, default_value_t = 50)]
    pub em_iters: usize,
    #[arg(long, default_value_t = 25)]
    pub trees_per_step: usize,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 31)]
    pub max_leaves: usize,
    #[arg(long, default_value_t = 20)]
    pub min_leaf_count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub model_out: PathBuf,
    /// Where to write the power-profile table.
    #[arg(long)]
    pub profile_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightingChoice {
    Exposure,
    Count,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub metrics_out: PathBuf,
    #[arg(long)]
    pub lorenz_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = WeightingChoice::Exposure)]
    pub gini_weighting: WeightingChoice,
}

#[derive(Debug, Args)]
pub struct UndersampleArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "y")]
    pub target: String,
    #[arg(long)]
    pub keep_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parse `argv`, run the command and map failures to a one-line message.
pub fn main_with_args<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", chain(&e));
            ExitCode::FAILURE
        }
    }
}

fn chain(e: &Error) -> String {
    let mut msg = e.to_string();
    let mut source = std::error::Error::source(e);
    while let Some(s) = source {
        let text = s.to_string();
        if !msg.contains(&text) {
            msg.push_str(": ");
            msg.push_str(&text);
        }
        source = s.source();
    }
    msg.replace('\n', " ")
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Undersample(a) => undersample(a),
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let zeta = PowerParam::new(a.zeta)?;
    let design = SimulationDesign {
        p: a.p,
        mu_scale: a.mu_scale,
        phi_scale: a.phi_scale,
        pi_scale: a.pi_scale,
        seed: a.seed,
        ..SimulationDesign::default()
    };
    let truth = match a.target_zero_rate {
        Some(rate) => design.truth_functions_for_zero_rate(zeta, rate)?,
        None => design.truth_functions()?,
    };
    let exposure = match a.exposure {
        ExposureChoice::Unit => ExposureLaw::Unit,
        ExposureChoice::Uniform => ExposureLaw::uniform_default(),
    };
    // the data stream gets its own seed so it does not replay the design draws
    let (data, table) = make_dataset(a.n, &truth, zeta, exposure, a.seed.wrapping_add(0x9e37_79b9_7f4a_7c15))?;
    write_dataset_csv(&a.out, &data)?;
    if let Some(path) = a.truth {
        let rows = table.iter().map(|r| {
            vec![
                r.mu.to_string(),
                r.phi.to_string(),
                r.pi.to_string(),
                r.exposure.to_string(),
                r.pure_premium().to_string(),
            ]
        });
        write_rows_csv(path, &["mu", "phi", "pi", "w", "pure_premium"], rows)?;
    }
    Ok(())
}

fn em_config(a: &TrainArgs) -> EmConfig {
    let mut config = EmConfig {
        max_em_iterations: a.em_iters,
        trees_per_m_step: a.trees_per_step,
        ..EmConfig::default()
    };
    for b in [&mut config.boost_pi, &mut config.boost_mu, &mut config.boost_phi] {
        b.learning_rate = a.learning_rate;
        b.max_leaves = a.max_leaves;
        b.min_leaf_count = a.min_leaf_count;
        b.seed = a.seed;
    }
    config
}

fn parse_grid(text: &str) -> Result<ZetaGrid> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::invalid(format!("power grid {text:?} is not start:stop:step")))?;
    match parts.as_slice() {
        [start, stop, step] => ZetaGrid::range(*start, *stop, *step),
        _ => Err(Error::invalid(format!("power grid {text:?} is not start:stop:step"))),
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let options = CsvOptions {
        target: a.data.target.clone(),
        exposure: a.data.exposure.clone(),
        categoricals: a.data.categoricals.clone(),
        ..CsvOptions::default()
    };
    let data = load_csv(&a.data.data, &options)?;
    let config = em_config(&a);
    let model = match (&a.zeta, &a.zeta_grid) {
        (Some(z), None) => fit(&data, PowerParam::new(*z)?, &config)?,
        (None, grid) => {
            let grid = match grid {
                Some(g) => parse_grid(g)?,
                None => ZetaGrid::default(),
            };
            let profile = fit_profile(&data, &grid, &config)?;
            if let Some(path) = &a.profile_out {
                let rows = profile
                    .table
                    .iter()
                    .map(|r| vec![r.zeta.to_string(), r.loglik.to_string()]);
                write_rows_csv(path, &["zeta", "loglik"], rows)?;
            }
            profile.best_model
        }
        (Some(_), Some(_)) => return Err(Error::invalid("--zeta and --zeta-grid cannot be combined")),
    };
    for w in &model.training_meta.warnings {
        eprintln!("warning: {w}");
    }
    save_model(&model, &a.model_out)
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let (features, _) = load_features(&a.data, &model.schema)?;
    let scores = model.score_matrix(&features)?;
    let rows = scores.iter().map(|s| {
        let (mu, phi, pi) = (s.mu(), s.phi(), s.pi());
        vec![mu.to_string(), phi.to_string(), pi.to_string(), ((1.0 - pi) * mu).to_string()]
    });
    write_rows_csv(&a.out, &["mu", "phi", "pi", "pure_premium"], rows)
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let model: ZitModel = load_model(&a.model)?;
    let data = load_with_schema(&a.data, &model.schema)?;
    let weighting = match a.gini_weighting {
        WeightingChoice::Exposure => GiniWeighting::Exposure,
        WeightingChoice::Count => GiniWeighting::Count,
    };
    let report = evaluate_model(&model, &data, weighting)?;
    write_text_atomic(&a.metrics_out, &report.to_key_value())?;
    if let Some(path) = a.lorenz_out {
        let rows = report
            .lorenz
            .iter()
            .map(|p| vec![p.premium_share.to_string(), p.loss_share.to_string()]);
        write_rows_csv(path, &["premium_share", "loss_share"], rows)?;
    }
    Ok(())
}

fn undersample(a: UndersampleArgs) -> Result<()> {
    let mut reader = crate::io::csv::open(&a.data)?;
    let headers = reader.headers()?.clone();
    let t = headers
        .iter()
        .position(|h| h.trim() == a.target)
        .ok_or_else(|| input_error(&a.data, format!("missing column {:?}", a.target)))?;
    let mut records = Vec::new();
    let mut target = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let raw = rec.get(t).unwrap_or("").trim();
        let y: f64 = raw.parse().map_err(|_| Error::Row {
            path: a.data.clone(),
            line,
            message: format!("response {raw:?} is not a number"),
        })?;
        target.push(y);
        records.push(rec);
    }
    let keep = undersample_rows(&target, a.keep_fraction, a.seed)?;
    let header: Vec<&str> = headers.iter().collect();
    let rows = keep.into_iter().map(|i| records[i].iter().map(str::to_string).collect());
    write_rows_csv(&a.out, &header, rows)
}

fn input_error(path: &Path, message: String) -> Error {
    Error::Input {
        path: path.to_path_buf(),
        message,
    }
}
