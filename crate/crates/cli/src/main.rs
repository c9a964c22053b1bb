//! `llbar`: command-line driver for the solver and its verification harness.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use llbar::estimates::{bihari_tstar, HolderNorm, LEDGER_HEADER};
use llbar::experiments::{self, scales_linearly};
use llbar::inequality::write_reports;
use llbar::{load_config, Error, RunConfig};

/// `println!` that ignores a closed stdout, e.g. when piped into `head`.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(name = "llbar", version, about = "Landau-Lifshitz-Baryakhtar Galerkin solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration.
    config: PathBuf,
    /// Replace a configuration entry, e.g. `integrator.dt=5e-4`.
    #[arg(long = "override", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, Failure> {
        Ok(load_config(&self.config, &self.overrides)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configuration, writing the ledger and snapshots.
    Run(ConfigArgs),
    /// Check the discrete calculus identities on random fields of the configured grid.
    VerifyIdentities {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Sample the functional inequalities on random fields of the configured grid.
    VerifyInequalities {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Compare terminal states across doubling bands.
    Converge {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        bands: Vec<usize>,
        /// Final time; defaults to the configured `t_end`.
        #[arg(long)]
        tend: Option<f64>,
        #[arg(long, default_value_t = 10.0)]
        min_ratio: f64,
    },
    /// Hölder quotient in time at a snapshot cadence and half of it.
    Holder {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        exponent: f64,
        #[arg(long, default_value_t = HolderNorm::L2)]
        norm: HolderNorm,
        /// Steps between coarse samples (even).
        #[arg(long, default_value_t = 10)]
        cadence: usize,
        #[arg(long, default_value_t = 0.1)]
        max_change: f64,
    },
    /// Continuous dependence on the initial datum.
    Depend {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        delta: Vec<f64>,
        /// Allowed multiple of the Gronwall envelope.
        #[arg(long, default_value_t = 1.0)]
        c_margin: f64,
        /// Allowed spread of the difference-to-delta slopes.
        #[arg(long, default_value_t = 3.0)]
        linear_factor: f64,
    },
    /// Existence horizon `(y0 + c)^-4 / 4`.
    Tstar {
        /// Configuration providing `y0 = |grad u0|^2` when `--y0` is absent.
        config: Option<PathBuf>,
        #[arg(long = "override", value_name = "SECTION.KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        y0: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        c: f64,
    },
}

/// Terminal outcome of a subcommand other than success.
enum Failure {
    Core(Error),
    Assertion(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> (u8, &'static str) {
        match self {
            Failure::Assertion(_) => (4, "assertion"),
            Failure::Core(e) => match e {
                Error::BlowUp { .. } | Error::NonFiniteState { .. } => (3, "blowup"),
                Error::Io { .. } | Error::Csv(_) | Error::Snapshot(_) => (5, "io"),
                Error::Config(_) => (2, "config"),
                _ => (2, "invalid"),
            },
        }
    }

    fn detail(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Assertion(v) => v.join("; "),
        }
    }
}

fn threads() -> Result<usize, Failure> {
    match std::env::var("LLBAR_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(vec![format!("LLBAR_THREADS: expected a positive integer, got {v:?}")]).into()),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn create_report(dir: &Path, name: &str) -> Result<csv::Writer<File>, Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn finish_report(mut w: csv::Writer<File>, dir: &Path, name: &str) -> Result<(), Failure> {
    w.flush().map_err(|e| Error::io(dir.join(name), e))?;
    Ok(())
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn assert_all(failures: Vec<String>) -> Result<(), Failure> {
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assertion(failures))
    }
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run(args) => {
            let cfg = args.load()?;
            let summary = llbar::run(&cfg)?;
            say!(
                "steps {}  ledger rows {}  snapshots {}",
                summary.steps,
                summary.ledger_rows,
                summary.snapshots.len()
            );
            let values = summary.terminal.values();
            say!("{:<14} {:.16e}", LEDGER_HEADER[0], summary.terminal.t);
            for (name, v) in LEDGER_HEADER[1..].iter().zip(values) {
                say!("{name:<14} {v:.16e}");
            }
            Ok(())
        }
        Command::VerifyIdentities { cfg, samples } => {
            let cfg = cfg.load()?;
            let checks = experiments::verify_identities(&cfg.grid, &cfg.band, cfg.seed(), samples)?;
            let dir = &cfg.output.dir;
            let mut w = create_report(dir, "identities.csv")?;
            w.write_record(["identity", "samples", "max_error", "tolerance", "witness_seed"])
                .map_err(Error::from)?;
            let mut failures = Vec::new();
            for c in &checks {
                say!("{c}");
                w.write_record([
                    c.id.to_string(),
                    c.samples.to_string(),
                    fmt_num(c.max_error),
                    fmt_num(c.tolerance),
                    c.witness_seed.to_string(),
                ])
                .map_err(Error::from)?;
                if !c.passed() {
                    failures.push(format!(
                        "{}: error {:.3e} exceeds {:.0e} (witness seed {})",
                        c.id, c.max_error, c.tolerance, c.witness_seed
                    ));
                }
            }
            finish_report(w, dir, "identities.csv")?;
            assert_all(failures)
        }
        Command::VerifyInequalities { cfg, samples } => {
            let cfg = cfg.load()?;
            let reports = experiments::verify_inequalities(&cfg.grid, &cfg.band, cfg.seed(), samples, threads()?)?;
            let dir = &cfg.output.dir;
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join("inequalities.csv");
            write_reports(File::create(&path).map_err(|e| Error::io(&path, e))?, &reports)?;
            let mut failures = Vec::new();
            for r in &reports {
                say!("{r}");
                if !r.passed() {
                    failures.push(format!(
                        "{}: max ratio {:.6e} over bound {:?} with {} violations (witness seed {})",
                        r.id, r.max_ratio, r.constant, r.violations, r.witness_seed
                    ));
                }
            }
            assert_all(failures)
        }
        Command::Converge {
            cfg,
            bands,
            tend,
            min_ratio,
        } => {
            let cfg = cfg.load()?;
            let t_end = tend.unwrap_or(cfg.policy.t_end);
            let report = experiments::converge(&cfg, &bands, t_end)?;
            let dir = &cfg.output.dir;
            let mut w = create_report(dir, "convergence.csv")?;
            w.write_record(["band", "next_band", "l2_difference", "ratio"])
                .map_err(Error::from)?;
            for (i, d) in report.diffs.iter().enumerate() {
                let ratio = if i > 0 {
                    fmt_num(report.ratios[i - 1])
                } else {
                    String::new()
                };
                say!(
                    "N = {:>4} vs {:>4}  |u_N - u_2N| = {:.6e}  ratio {ratio}",
                    bands[i],
                    bands[i + 1],
                    d
                );
                w.write_record([bands[i].to_string(), bands[i + 1].to_string(), fmt_num(*d), ratio])
                    .map_err(Error::from)?;
            }
            finish_report(w, dir, "convergence.csv")?;
            if report.passed(min_ratio) {
                Ok(())
            } else {
                Err(Failure::Assertion(vec![format!(
                    "band convergence: ratios {:?} below {min_ratio} (differences {:?}, seed {})",
                    report.ratios,
                    report.diffs,
                    cfg.seed()
                )]))
            }
        }
        Command::Holder {
            cfg,
            exponent,
            norm,
            cadence,
            max_change,
        } => {
            let cfg = cfg.load()?;
            let c = experiments::holder(&cfg, exponent, norm, cadence)?;
            let dir = &cfg.output.dir;
            let mut w = create_report(dir, "holder.csv")?;
            w.write_record(["cadence", "exponent", "norm", "sup_quotient", "pairs"])
                .map_err(Error::from)?;
            for (k, r) in [(cadence, c.coarse), (cadence / 2, c.fine)] {
                say!(
                    "cadence {k:>5}  {norm} quotient at {exponent} = {:.6e} over {} pairs",
                    r.sup_quotient,
                    r.pair_count
                );
                w.write_record([
                    k.to_string(),
                    exponent.to_string(),
                    norm.to_string(),
                    fmt_num(r.sup_quotient),
                    r.pair_count.to_string(),
                ])
                .map_err(Error::from)?;
            }
            finish_report(w, dir, "holder.csv")?;
            say!("relative change {:.3e}", c.relative_change());
            if c.passed(max_change) {
                Ok(())
            } else {
                Err(Failure::Assertion(vec![format!(
                    "Hölder quotient changed by {:.3e} (limit {max_change}) under refinement (seed {})",
                    c.relative_change(),
                    cfg.seed()
                )]))
            }
        }
        Command::Depend {
            cfg,
            delta,
            c_margin,
            linear_factor,
        } => {
            let cfg = cfg.load()?;
            let r = experiments::depend(&cfg, &delta)?;
            let linear = scales_linearly(&r, linear_factor);
            let dir = &cfg.output.dir;
            let mut w = create_report(dir, "dependence.csv")?;
            w.write_record(["delta", "terminal_diff", "gronwall_factor", "margin"])
                .map_err(Error::from)?;
            for i in 0..r.deltas.len() {
                say!(
                    "delta {:.3e}  |u - v|(T) {:.6e}  envelope factor {:.6e}  margin {:.6e}",
                    r.deltas[i],
                    r.terminal_diffs[i],
                    r.gronwall_factors[i],
                    r.margins[i]
                );
                w.write_record([r.deltas[i], r.terminal_diffs[i], r.gronwall_factors[i], r.margins[i]].map(fmt_num))
                    .map_err(Error::from)?;
            }
            finish_report(w, dir, "dependence.csv")?;
            say!("linear scaling {linear}");
            let mut failures = Vec::new();
            if !linear {
                failures.push(format!(
                    "linear scaling: differences {:?} for deltas {:?} spread beyond factor {linear_factor} (seed {})",
                    r.terminal_diffs,
                    r.deltas,
                    cfg.seed()
                ));
            }
            if !r.is_finite() || !r.within(c_margin) {
                failures.push(format!(
                    "Gronwall envelope: max margin {:.6e} exceeds {c_margin} (seed {})",
                    r.max_margin(),
                    cfg.seed()
                ));
            }
            assert_all(failures)
        }
        Command::Tstar {
            config,
            overrides,
            y0,
            c,
        } => {
            let t = match (y0, config) {
                (Some(y0), _) => bihari_tstar(y0, c)?,
                (None, Some(path)) => experiments::tstar_for(&load_config(&path, &overrides)?, c)?,
                (None, None) => {
                    return Err(Error::InvalidParameter("tstar needs --y0 or a configuration".into()).into())
                }
            };
            say!("{t}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let detail: Vec<&str> = msg
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:"))
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!("error[usage]: {}", detail.join(" ").trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, tag) = f.code();
            eprintln!("error[{tag}]: {}", f.detail().replace('\n', " "));
            ExitCode::from(code)
        }
    }
}
