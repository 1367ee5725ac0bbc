use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use critx::analysis::{self, Report};
use critx::cache;
use critx::config::{GridSpec, ModelKind, SweepConfig};
use critx::sweep::run_sweep;
use critx::CliError;
use critx_core::eigen::{LanczosOptions, SolveOptions};
use critx_core::fidelity::DrivenModel;
use critx_core::scaling::{CollapseOptions, DEFAULT_KT_HALF_WIDTH};
use critx_core::tfim_oracle::DEFAULT_DENSITY_SITES;

#[derive(Parser)]
#[command(name = "critx", version, about = "Fidelity-susceptibility sweeps and finite-size scaling")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute FS curves and write one curve file per (L, U).
    Sweep(SweepArgs),
    /// FS at a single coupling for every (L, U) of the configuration.
    Fs {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Driving-parameter value.
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
    },
    /// Fits over curve files.
    Analyze {
        #[command(subcommand)]
        what: AnalyzeCmd,
    },
    /// Inspect or clear the point cache.
    Cache {
        #[command(subcommand)]
        what: CacheCmd,
    },
}

#[derive(Args, Default)]
struct SweepArgs {
    /// JSON configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    /// System sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    sites: Option<Vec<u32>>,
    /// Filling N/L as a fraction, e.g. 2/3.
    #[arg(long)]
    filling: Option<String>,
    #[arg(long)]
    n_up: Option<u32>,
    #[arg(long)]
    n_dn: Option<u32>,
    /// Interaction strengths, comma separated.
    #[arg(long, value_delimiter = ',')]
    u: Option<Vec<f64>>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    h: Option<f64>,
    #[arg(long)]
    driving: Option<String>,
    /// range:a:b:n, list:x,y,..., or two-tier:a:b[:coarse:fine:window].
    #[arg(long)]
    grid: Option<String>,
    /// finite_difference, spectral_sum or linear_response.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    lanczos_tol: Option<f64>,
    #[arg(long)]
    solve_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

impl SweepArgs {
    fn resolve(&self) -> Result<SweepConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                SweepConfig::from_json(&text)?
            }
            None => SweepConfig::default(),
        };
        if let Some(m) = &self.model {
            c.model = ModelKind::parse(m)?;
        }
        if let Some(v) = &self.sites {
            c.sites = v.clone();
        }
        if let Some(v) = &self.filling {
            c.filling = Some(v.clone());
        }
        if self.n_up.is_some() || self.n_dn.is_some() {
            c.n_up = self.n_up;
            c.n_dn = self.n_dn;
        }
        if let Some(v) = &self.u {
            c.u = v.clone();
        }
        if let Some(v) = self.lambda {
            c.lambda = v;
        }
        if let Some(v) = self.h {
            c.h = v;
        }
        if let Some(v) = &self.driving {
            c.driving = Some(v.clone());
        }
        if let Some(v) = &self.grid {
            c.grid = GridSpec::parse(v)?;
        }
        if let Some(v) = &self.method {
            c.method = v.clone();
        }
        if let Some(v) = self.delta {
            c.delta = v;
        }
        if let Some(v) = self.lanczos_tol {
            c.lanczos_tol = v;
        }
        if let Some(v) = self.solve_tol {
            c.solve_tol = v;
        }
        if let Some(v) = self.max_iter {
            c.max_iter = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.output {
            c.output = v.clone();
        }
        if let Some(v) = self.workers {
            c.workers = v;
        }
        Ok(c)
    }
}

#[derive(Subcommand)]
enum AnalyzeCmd {
    /// Peak location and height per curve.
    Peak {
        files: Vec<PathBuf>,
        /// Re-evaluate χ at the vertex up to this many times (max 3).
        #[arg(long, default_value_t = 0)]
        refine: usize,
        #[arg(long, default_value = "critx-analysis")]
        out: PathBuf,
    },
    /// Data collapse for ν, μ, α, A and B.
    Collapse {
        files: Vec<PathBuf>,
        /// ν search bracket lo:hi; defaults to 1:4, or -1:0.5 at half filling.
        #[arg(long, allow_hyphen_values = true)]
        bracket: Option<String>,
        /// height:<fraction of χ_max> or parameter:<half-width in t>.
        #[arg(long, default_value = "height:0.5")]
        window: String,
        #[arg(long, default_value_t = 6)]
        neighbors: usize,
        #[arg(long, default_value = "critx-analysis")]
        out: PathBuf,
    },
    /// Joint fit of a + b L + c L^(-1/2) (t - t_max)^2 near the peaks.
    Ktform {
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_KT_HALF_WIDTH)]
        half_width: f64,
        #[arg(long, default_value = "critx-analysis")]
        out: PathBuf,
    },
    /// t_max(L) extrapolated in L^-2 (with an L^-1 comparison).
    TcLandau {
        files: Vec<PathBuf>,
        #[arg(long, default_value = "critx-analysis")]
        out: PathBuf,
    },
    /// Steepest-descent points extrapolated in 1/L, one estimate per U.
    TcKt {
        files: Vec<PathBuf>,
        #[arg(long, default_value = "critx-analysis")]
        out: PathBuf,
    },
    /// Exact Ising FS table and density exponent.
    Oracle {
        #[arg(long, default_value_t = 64)]
        sites: u32,
        /// range:a:b:n or list:x,y,...
        #[arg(long, default_value = "range:0.5:1.5:101")]
        lambda_grid: String,
        /// λ window lo:hi for the density exponent.
        #[arg(long, default_value = "1.05:1.5")]
        window: String,
        #[arg(long, default_value_t = DEFAULT_DENSITY_SITES)]
        density_sites: u32,
        #[arg(long, default_value = "critx-analysis")]
        out: PathBuf,
    },
    /// α + 2β + γ against 3 with β = 1/8.
    Relation {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        alpha_se: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 0.0)]
        gamma_se: f64,
        #[arg(long, default_value = "critx-analysis")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum CacheCmd {
    /// List cached curves and their point counts.
    Ls,
    /// Delete the cache, or one curve's entries.
    Clear {
        #[arg(long)]
        key: Option<String>,
    },
}

fn pair(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Config(format!("'{s}' is not lo:hi"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
}

fn emit(report: Report, out: &PathBuf) -> Result<(), CliError> {
    let files = report.write(out)?;
    println!("{}", serde_json::to_string_pretty(&report.result).map_err(|e| CliError::Io(e.to_string()))?);
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Sweep(args) => {
            let cfg = args.resolve()?;
            let outcome = run_sweep(&cfg, &cache::cache_root())?;
            for c in &outcome.curves {
                println!(
                    "{}\t{} rows\t{} computed\t{} cached\t{} failed",
                    c.path.display(),
                    c.file.rows.len(),
                    c.computed,
                    c.cached,
                    c.failures.len()
                );
            }
            if outcome.failures() > 0 {
                return Err(CliError::Solver(format!("{} point(s) failed; see curve headers", outcome.failures())));
            }
            Ok(())
        }
        Cmd::Fs { sweep, x } => {
            let cfg = sweep.resolve()?;
            let method = cfg.method()?;
            let mut failed = 0;
            for job in cfg.jobs()? {
                let lanczos = LanczosOptions {
                    tol: cfg.lanczos_tol,
                    max_iter: cfg.max_iter,
                    seed: cfg.seed,
                    ..LanczosOptions::default()
                };
                let solve = SolveOptions { tol: cfg.solve_tol, ..SolveOptions::default() };
                let model = DrivenModel::new(job.params.clone(), job.tag)
                    .map_err(|e| CliError::Config(e.to_string()))?
                    .with_options(lanczos, solve);
                match model.fs(x, method, cfg.delta) {
                    Ok(p) => println!(
                        "{}",
                        serde_json::json!({
                            "curve": job.label(), "x": p.x, "chi": p.chi, "method": p.method.as_str(),
                            "delta_used": p.delta_used, "raw": p.raw, "residual": p.residual, "iterations": p.iterations,
                        })
                    ),
                    Err(e) => {
                        failed += 1;
                        eprintln!("{}: {e}", job.label());
                    }
                }
            }
            if failed > 0 {
                return Err(CliError::Solver(format!("{failed} point(s) failed")));
            }
            Ok(())
        }
        Cmd::Analyze { what } => match what {
            AnalyzeCmd::Peak { files, refine, out } => emit(analysis::peak_report(&analysis::load_all(&files)?, refine)?, &out),
            AnalyzeCmd::Collapse { files, bracket, window, neighbors, out } => {
                let curves = analysis::load_all(&files)?;
                let half = curves.first().and_then(|c| c.file.get("filling")).is_some_and(|f| f == "1" || f == "1/1");
                let mut opts = if half { CollapseOptions::kt() } else { CollapseOptions::landau() };
                if let Some(b) = bracket {
                    opts.nu_bracket = pair(&b)?;
                }
                opts.window = analysis::parse_window(&window)?;
                opts.neighbors = neighbors;
                emit(analysis::collapse_report(&curves, &opts)?, &out)
            }
            AnalyzeCmd::Ktform { files, half_width, out } => {
                emit(analysis::ktform_report(&analysis::load_all(&files)?, half_width)?, &out)
            }
            AnalyzeCmd::TcLandau { files, out } => emit(analysis::tc_landau_report(&analysis::load_all(&files)?)?, &out),
            AnalyzeCmd::TcKt { files, out } => emit(analysis::tc_kt_report(&analysis::load_all(&files)?)?, &out),
            AnalyzeCmd::Oracle { sites, lambda_grid, window, density_sites, out } => {
                let grid = GridSpec::parse(&lambda_grid)?;
                grid.validate()?;
                let lambdas = critx::sweep::grid_points(&grid);
                emit(analysis::oracle_report(sites, &lambdas, pair(&window)?, density_sites)?, &out)
            }
            AnalyzeCmd::Relation { alpha, alpha_se, gamma, gamma_se, out } => {
                emit(analysis::relation_report(alpha, alpha_se, gamma, gamma_se), &out)
            }
        },
        Cmd::Cache { what } => {
            let root = cache::cache_root();
            match what {
                CacheCmd::Ls => {
                    for (k, n, d) in cache::list(&root)? {
                        println!("{k}\t{n} points\t{d}");
                    }
                }
                CacheCmd::Clear { key } => {
                    let n = cache::clear(&root, key.as_deref())?;
                    println!("removed {n} curve(s) from {}", root.display());
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // Usage errors are configuration errors (exit 1), not clap's default 2.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("critx: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
