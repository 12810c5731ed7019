use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use obm_sgd::harness::config::{rep_seed, SeedDomain};
use obm_sgd::harness::{
    estimate_ground_truth, fit_slope, load_or_estimate, read_metrics, run_experiment,
    write_metrics, write_raw, ExperimentConfig, GroundTruth, StreamKind, TruthMode,
};
use obm_sgd::inference::ci;
use obm_sgd::{run, LeadIn, ObjectiveKind, Result};

#[derive(Parser)]
#[command(
    name = "obm-sgd",
    version,
    about = "Truncated SGD with online batch-means inference"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the ground truth (θ*, Σ) and write it as JSON.
    Truth {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "truth.json")]
        out: PathBuf,
    },
    /// Run replicated experiments and write the metrics CSV.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Ground-truth cache; reused when its config hash matches.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Metrics CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-replication CSV.
        #[arg(long)]
        raw_out: Option<PathBuf>,
    },
    /// Fit the log-log slope of a metrics CSV.
    Slope { metrics: PathBuf },
    /// One short run printing θ̄, Σ̂ and the interval for vᵀθ.
    Demo {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Iid,
    Ar1,
    StateDep,
    Agents,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    LinearSq,
    LogisticL2,
}

#[derive(Clone, Copy, ValueEnum)]
enum LeadInArg {
    GrowingBlock,
    AnchorAtOne,
    Strict,
}

#[derive(Clone, Copy, ValueEnum)]
enum TruthArg {
    MonteCarlo,
    Analytic,
}

/// Each flag overrides the matching field of `--config`.
#[derive(Args)]
struct ConfigArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    objective: Option<ObjectiveArg>,
    #[arg(long)]
    reg: Option<f64>,
    #[arg(long, value_enum)]
    stream: Option<KindArg>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    csv_path: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n_iters: Option<u64>,
    #[arg(long)]
    n_reps: Option<usize>,
    #[arg(long)]
    n_truth_reps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<u64>>,
    #[arg(long)]
    n_checkpoints: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    d0: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long)]
    growth: Option<f64>,
    #[arg(long)]
    batch_c: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_enum)]
    lead_in: Option<LeadInArg>,
    #[arg(long)]
    burn_in: Option<u64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    v: Option<Vec<f64>>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long, value_enum)]
    truth_mode: Option<TruthArg>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_json_file(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(x) = self.$field.clone() {
                    c.$field = x;
                }
            )*};
        }
        set!(
            reg,
            d,
            n_iters,
            n_reps,
            n_truth_reps,
            n_checkpoints,
            seed,
            eta0,
            a,
            d0,
            b,
            r0,
            growth,
            batch_c,
            burn_in,
            level
        );
        if let Some(o) = self.objective {
            c.objective = match o {
                ObjectiveArg::LinearSq => ObjectiveKind::LinearSq,
                ObjectiveArg::LogisticL2 => ObjectiveKind::LogisticL2,
            };
        }
        if let Some(k) = self.stream {
            c.stream.kind = match k {
                KindArg::Iid => StreamKind::Iid,
                KindArg::Ar1 => StreamKind::Ar1,
                KindArg::StateDep => StreamKind::StateDep,
                KindArg::Agents => StreamKind::Agents,
            };
        }
        if let Some(l) = self.lead_in {
            c.lead_in = match l {
                LeadInArg::GrowingBlock => LeadIn::GrowingBlock,
                LeadInArg::AnchorAtOne => LeadIn::AnchorAtOne,
                LeadInArg::Strict => LeadIn::Strict,
            };
        }
        if let Some(t) = self.truth_mode {
            c.truth = match t {
                TruthArg::MonteCarlo => TruthMode::MonteCarlo,
                TruthArg::Analytic => TruthMode::Analytic,
            };
        }
        if let Some(x) = self.rho {
            c.stream.rho = x;
        }
        if let Some(x) = self.eps {
            c.stream.eps = x;
        }
        if let Some(x) = self.sigma {
            c.stream.sigma = x;
        }
        if let Some(p) = &self.csv_path {
            c.stream.csv_path = Some(p.clone());
        }
        if self.beta.is_some() {
            c.beta = self.beta;
        }
        if self.checkpoints.is_some() {
            c.checkpoints = self.checkpoints.clone();
        }
        if self.v.is_some() {
            c.v = self.v.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn truth_for(cfg: &ExperimentConfig, cache: Option<&Path>) -> Result<GroundTruth> {
    match cache {
        Some(p) => load_or_estimate(cfg, p),
        None => Ok(estimate_ground_truth(cfg)?.truth),
    }
}

fn demo(cfg: &ExperimentConfig) -> Result<()> {
    let model = cfg.model()?;
    let mut stream = model
        .source
        .instantiate(rep_seed(cfg.seed, SeedDomain::Run, 0))?;
    let trace = run(
        &model.objective,
        &mut stream,
        model.theta0.clone(),
        cfg.n_iters,
        &[cfg.n_iters],
        &model.settings,
    )?;
    let snap = &trace.snapshots[0];
    let interval = ci(
        &snap.theta_bar,
        &snap.sigma_hat,
        &model.v,
        snap.n_averaged(),
        cfg.level,
    )?;
    let mut out = io::stdout().lock();
    writeln!(out, "iterations   {}", cfg.n_iters)?;
    writeln!(out, "truncations  {}", trace.n_truncations)?;
    writeln!(out, "theta_bar    {:?}", snap.theta_bar.as_slice())?;
    writeln!(out, "sigma_hat")?;
    for row in snap.sigma_hat.sigma_hat.row_iter() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:12.6}")).collect();
        writeln!(out, "  {}", cells.join(" "))?;
    }
    writeln!(
        out,
        "{:.0}% CI for v'theta: [{:.6}, {:.6}]",
        100.0 * cfg.level,
        interval.lo,
        interval.hi
    )?;
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Truth { cfg, out } => {
            let cfg = cfg.resolve()?;
            let report = estimate_ground_truth(&cfg)?;
            report.truth.save(&out)?;
            eprintln!(
                "wrote {} ({} reps, theta SE {:?}, relative SE of sigma {:.4})",
                out.display(),
                report.truth.reps,
                report.theta_se,
                report.sigma_rel_se
            );
        }
        Command::Run {
            cfg,
            truth,
            out,
            raw_out,
        } => {
            let cfg = cfg.resolve()?;
            let truth = truth_for(&cfg, truth.as_deref())?;
            let result = run_experiment(&cfg, &truth)?;
            match out {
                Some(p) => write_metrics(&result.rows, create(&p)?)?,
                None => write_metrics(&result.rows, io::stdout().lock())?,
            }
            if let Some(p) = raw_out {
                write_raw(&result.raw, create(&p)?)?;
            }
        }
        Command::Slope { metrics } => {
            let rows = read_metrics(File::open(&metrics)?)?;
            let fit = fit_slope(&rows)?;
            println!("slope {:.6}", fit.slope);
            println!("intercept {:.6}", fit.intercept);
            println!("r2 {:.6}", fit.r2);
        }
        Command::Demo { cfg } => demo(&cfg.resolve()?)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
