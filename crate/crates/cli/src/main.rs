use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use decovid_cli::{run, CliResult, PipelineConfig};

#[derive(Parser)]
#[command(name = "decovid", version, about = "COVID-adjusted factors, uncertainty and VARs for monthly macro panels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Fitted COVID components and the adjusted panel
    Decovid,
    /// Factors, variance shares and correlations with pre-outbreak factors
    Factors,
    /// Diffusion-index forecast errors and selected predictors
    Forecast,
    /// Uncertainty indices of the unadjusted and adjusted panels
    Uncertainty,
    /// Impulse responses, bootstrap bands and a shock table
    Var,
    /// Synthetic panel and COVID counts with known factors
    Simulate,
}

/// Flags override the config file, which overrides the defaults.
#[derive(Args)]
struct Opts {
    /// `key = value` settings file (a run manifest also works)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, env = "DECOVID_OUT")]
    out: Option<String>,
    /// FRED-MD style macro panel
    #[arg(long = "macro", global = true)]
    macro_path: Option<String>,
    /// FRED-MD style financial panel
    #[arg(long, global = true)]
    financial: Option<String>,
    /// covidtracking national daily history
    #[arg(long, global = true)]
    covid: Option<String>,
    /// Adjustment design (1-4)
    #[arg(long, global = true)]
    model: Option<String>,
    /// COVID indicator: H, P or D
    #[arg(long, global = true)]
    kind: Option<String>,
    /// Number of lagged COVID growth terms
    #[arg(long, global = true)]
    q: Option<String>,
    /// Macro factors
    #[arg(long, global = true)]
    r_m: Option<String>,
    /// Financial factors
    #[arg(long, global = true)]
    r_f: Option<String>,
    /// VAR lag order
    #[arg(long, global = true)]
    p: Option<String>,
    /// Largest response horizon
    #[arg(long, global = true)]
    horizon: Option<String>,
    /// Bootstrap replications (0 skips bands)
    #[arg(long, global = true)]
    reps: Option<String>,
    /// Band coverage
    #[arg(long, global = true)]
    level: Option<String>,
    /// Master seed
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Last month before the outbreak (yyyy-mm)
    #[arg(long, global = true)]
    last_pre_covid: Option<String>,
    #[arg(long, global = true)]
    sample_start: Option<String>,
    #[arg(long, global = true)]
    sample_end: Option<String>,
    /// Rank of the imputation model
    #[arg(long, global = true)]
    em_rank: Option<String>,
    /// Minimum observations for a series to stay in the panel
    #[arg(long, global = true)]
    min_obs: Option<String>,
    /// Forecast horizon
    #[arg(long, global = true)]
    forecast_h: Option<String>,
    #[arg(long, global = true)]
    p_y: Option<String>,
    #[arg(long, global = true)]
    p_w: Option<String>,
    /// Screening t-statistic
    #[arg(long, global = true)]
    threshold: Option<String>,
    /// Comma-separated VAR variables in recursive order
    #[arg(long, global = true)]
    var_series: Option<String>,
    #[arg(long, global = true)]
    sim_n: Option<String>,
    #[arg(long, global = true)]
    sim_t: Option<String>,
    #[arg(long, global = true)]
    sim_t0: Option<String>,
    #[arg(long, global = true)]
    sim_r: Option<String>,
}

impl Opts {
    fn resolve(&self) -> CliResult<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        if let Some(file) = &self.config {
            cfg.apply_file(file)?;
        }
        let flags = [
            ("out", &self.out),
            ("macro", &self.macro_path),
            ("financial", &self.financial),
            ("covid", &self.covid),
            ("model", &self.model),
            ("kind", &self.kind),
            ("q", &self.q),
            ("r_m", &self.r_m),
            ("r_f", &self.r_f),
            ("p", &self.p),
            ("horizon", &self.horizon),
            ("reps", &self.reps),
            ("level", &self.level),
            ("seed", &self.seed),
            ("last_pre_covid", &self.last_pre_covid),
            ("sample_start", &self.sample_start),
            ("sample_end", &self.sample_end),
            ("em_rank", &self.em_rank),
            ("min_obs", &self.min_obs),
            ("forecast_h", &self.forecast_h),
            ("p_y", &self.p_y),
            ("p_w", &self.p_w),
            ("threshold", &self.threshold),
            ("var_series", &self.var_series),
            ("sim_n", &self.sim_n),
            ("sim_t", &self.sim_t),
            ("sim_t0", &self.sim_t0),
            ("sim_r", &self.sim_r),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli.opts.resolve().and_then(|cfg| match cli.command {
        Command::Decovid => run::run_decovid(&cfg),
        Command::Factors => run::run_factors(&cfg),
        Command::Forecast => run::run_forecast(&cfg),
        Command::Uncertainty => run::run_uncertainty(&cfg),
        Command::Var => run::run_var(&cfg),
        Command::Simulate => run::run_simulate(&cfg),
    });
    match result {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            for f in &out.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
