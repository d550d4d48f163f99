use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use inflow_bias::metrics::PctBiasDefinition;
use inflow_bias::parp::EstimationMethod;
use inflow_bias::report::{published, SUMMARY_HORIZONS};
use inflow_bias::run::{self, load_inputs, PointForecastMode, RunConfig};
use inflow_bias::{Error, ForecasterSpec, YearMonth};

/// Environment variable overriding the output directory.
const OUTPUT_ENV: &str = "INFLOW_BIAS_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "inflow-bias",
    version,
    about = "Forecast bias evaluation for periodic inflow models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a forecaster's models at one origin and print them as JSON.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Last month of data used, YYYY-MM (defaults to the end of the data).
        #[arg(long)]
        origin: Option<YearMonth>,
    },
    /// Generate joint scenarios at one origin and write them as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        origin: Option<YearMonth>,
        /// Steps to simulate (defaults to `simulation_horizon`).
        #[arg(long)]
        steps: Option<usize>,
        /// Output file; `-` writes to stdout.
        #[arg(long, default_value = "scenarios.csv")]
        out: PathBuf,
    },
    /// Rolling-origin evaluation of every configured forecaster.
    Backtest {
        #[command(flatten)]
        common: Common,
        /// Worker threads (default: all cores). Results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Rebuild bias and summary tables from a finished run's error files.
    Report {
        /// Directory holding `manifest.json` and `errors_*.csv`.
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long, value_enum)]
        pct_bias: Option<PctArg>,
        /// Print the published reference values next to the summaries.
        #[arg(long)]
        published: bool,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `LABEL=path` or `path`; repeatable, replaces the config's list.
    #[arg(long = "data")]
    data: Vec<String>,
    /// Forecaster such as `windowed_parpa:J=30`; repeatable.
    #[arg(long = "forecaster")]
    forecasters: Vec<String>,
    #[arg(long)]
    span_start: Option<YearMonth>,
    #[arg(long)]
    span_end: Option<YearMonth>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    scenarios: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    estimation_lag: Option<usize>,
    #[arg(long)]
    max_order: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, value_enum)]
    point_forecast: Option<PointArg>,
    #[arg(long, value_enum)]
    pct_bias: Option<PctArg>,
    #[arg(long)]
    min_training_months: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    YuleWalker,
    LeastSquares,
}

#[derive(Clone, Copy, ValueEnum)]
enum PointArg {
    ScenarioMean,
    Deterministic,
}

#[derive(Clone, Copy, ValueEnum)]
enum PctArg {
    RatioOfMeans,
    MeanOfRatios,
}

impl From<PctArg> for PctBiasDefinition {
    fn from(p: PctArg) -> Self {
        match p {
            PctArg::RatioOfMeans => PctBiasDefinition::RatioOfMeans,
            PctArg::MeanOfRatios => PctBiasDefinition::MeanOfRatios,
        }
    }
}

impl Common {
    /// Config file, then flags, then the output-directory environment variable.
    fn resolve(&self) -> inflow_bias::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if !self.data.is_empty() {
            c.data = self.data.clone();
        }
        if !self.forecasters.is_empty() {
            c.forecasters = self.forecasters.clone();
        }
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    c.$field = v;
                }
            )*};
        }
        set!(
            span_start,
            span_end,
            horizon,
            scenarios,
            seed,
            estimation_lag,
            max_order,
            min_training_months,
            output_dir
        );
        if let Some(m) = self.method {
            c.method = match m {
                MethodArg::YuleWalker => EstimationMethod::YuleWalker,
                MethodArg::LeastSquares => EstimationMethod::LeastSquares,
            };
        }
        if let Some(p) = self.point_forecast {
            c.point_forecast = match p {
                PointArg::ScenarioMean => PointForecastMode::ScenarioMean,
                PointArg::Deterministic => PointForecastMode::Deterministic,
            };
        }
        if let Some(p) = self.pct_bias {
            c.pct_bias = p.into();
        }
        if let Some(dir) = std::env::var_os(OUTPUT_ENV) {
            c.output_dir = PathBuf::from(dir);
        }
        Ok(c)
    }

    fn single_forecaster(&self, config: &RunConfig) -> inflow_bias::Result<ForecasterSpec> {
        let specs = config.forecaster_specs()?;
        match specs.as_slice() {
            [one] => Ok(one.clone()),
            _ => Err(Error::Config(format!(
                "exactly one forecaster is needed here, got {}",
                specs.len()
            ))),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn execute(command: Command) -> inflow_bias::Result<()> {
    match command {
        Command::Fit { common, origin } => {
            let config = common.resolve()?;
            let spec = common.single_forecaster(&config)?;
            let (series, _) = load_inputs(&config)?;
            let origin = origin.unwrap_or_else(|| common_end(&series));
            let fits = run::fit_at_origin(&config, &series, &spec, origin)?;
            let models: Vec<_> = series
                .iter()
                .zip(&fits)
                .map(|(s, (m, _, _))| serde_json::json!({ "subsystem": s.label(), "origin": origin, "model": m }))
                .collect();
            let mut out = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, &models)?;
            writeln!(out)?;
        }
        Command::Simulate {
            common,
            origin,
            steps,
            out,
        } => {
            let config = common.resolve()?;
            config.validate()?;
            let spec = common.single_forecaster(&config)?;
            let (series, _) = load_inputs(&config)?;
            let origin = origin.unwrap_or_else(|| common_end(&series));
            let steps = steps.unwrap_or(config.simulation_horizon);
            let panel = run::simulate_at_origin(&config, &series, &spec, origin, steps, config.scenarios)?;
            if out.as_os_str() == "-" {
                panel.write_csv(std::io::stdout().lock())?;
            } else {
                let path = if out.is_relative() {
                    config.output_dir.join(&out)
                } else {
                    out
                };
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent)?;
                }
                panel.write_csv(fs::File::create(&path)?)?;
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Backtest { common, threads } => {
            let config = common.resolve()?;
            let outcome = match threads {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?
                    .install(|| run::run(&config))?,
                None => run::run(&config)?,
            };
            for r in &outcome.results {
                if !r.failures.is_empty() {
                    eprintln!("{}: {} origins skipped", r.spec.slug(), r.failures.len());
                }
            }
            print_summaries(&config.output_dir, false)?;
        }
        Command::Report {
            run_dir,
            pct_bias,
            published,
        } => {
            let files = run::rerender(&run_dir, pct_bias.map(Into::into))?;
            run::write_all(&run_dir, &files)?;
            print_summaries(&run_dir, published)?;
        }
    }
    Ok(())
}

/// Latest month present in every series.
fn common_end(series: &[inflow_bias::MonthlySeries]) -> YearMonth {
    series.iter().map(|s| s.end()).min().expect("at least one series")
}

fn print_summaries(dir: &Path, with_published: bool) -> inflow_bias::Result<()> {
    let mut names: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("summary_") && n.ends_with(".csv"))
        .collect();
    names.sort();
    let mut out = std::io::stdout().lock();
    for name in names {
        let sub = &name["summary_".len()..name.len() - ".csv".len()];
        writeln!(out, "== {sub} (average GW) ==")?;
        out.write_all(&fs::read(dir.join(&name))?)?;
        if with_published {
            if let Some(rows) = published(sub) {
                writeln!(out, "-- published reference values --")?;
                let ks: Vec<String> = SUMMARY_HORIZONS.iter().map(|k| format!("k{k}")).collect();
                writeln!(out, "forecaster,{},cumulative", ks.join(","))?;
                for r in rows {
                    let b: Vec<String> = r.bias.iter().map(|v| v.to_string()).collect();
                    writeln!(out, "{},{},{}", r.model, b.join(","), r.cumulative)?;
                }
            }
        }
    }
    Ok(())
}
