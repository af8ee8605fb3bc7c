use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use lie_barrier::analytic::{barrier_level, greeks, price, surface, PriceQuery, Region};
use lie_barrier::fd::{self, GridSpec};
use lie_barrier::mc::{self, McConfig, SurvivalMode};
use lie_barrier::oracle::{self, OracleComparison, StudyReport};
use lie_barrier::verify::{self, SuiteConfig, Tolerances, VerifyReport};
use lie_barrier::MarketParams;

mod config;
mod output;

use config::ConfigFile;
use output::{csv, table, Format, Style};

#[derive(Debug, Parser)]
#[command(
    name = "lie-barrier",
    version,
    about = "Moving-barrier call pricer with FD and Monte Carlo oracles"
)]
struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true, env = "BARRIER_LIE_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Print 17 significant digits instead of 6.
    #[arg(long, global = true)]
    full_precision: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form price, region, greeks and barrier level.
    Price {
        #[command(flatten)]
        market: MarketArgs,
        #[command(flatten)]
        point: PointArgs,
    },
    /// Run the invariant check suite.
    Verify {
        #[command(flatten)]
        market: MarketArgs,
        /// Run the suite for each alpha in start:stop:step.
        #[arg(long, value_name = "START:STOP:STEP", allow_hyphen_values = true)]
        alpha_sweep: Option<String>,
        /// Tolerance override: a number for every check, or CHECK=VALUE.
        #[arg(long, value_name = "TOL")]
        tol: Vec<String>,
    },
    /// Compare the closed form with the FD and Monte Carlo oracles.
    Oracle {
        #[command(flatten)]
        market: MarketArgs,
        #[command(flatten)]
        point: PointArgs,
        /// Which oracles to run
        #[arg(long, value_enum, default_value_t = Mode::Both)]
        mode: Mode,
        #[command(flatten)]
        fd: FdArgs,
        #[command(flatten)]
        mc: McArgs,
        /// Run an FD convergence study over --grids.
        #[arg(long)]
        study: bool,
    },
    /// Write CSV data for plotting.
    Emit {
        #[command(flatten)]
        market: MarketArgs,
        /// Analytic surface, FD grid or MC batch series
        #[arg(long, value_enum)]
        kind: EmitKind,
        /// Destination CSV file
        #[arg(long, short)]
        output: PathBuf,
        #[command(flatten)]
        fd: FdArgs,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        point: PointArgs,
        /// Surface spot range and node counts.
        #[arg(long, default_value_t = 50.0)]
        spot_min: f64,
        #[arg(long, default_value_t = 200.0)]
        spot_max: f64,
        #[arg(long, default_value_t = 31)]
        n_spot: usize,
        #[arg(long, default_value_t = 11)]
        n_times: usize,
        /// Keep every STRIDE-th FD node and level.
        #[arg(long, default_value_t = 10)]
        stride: usize,
        /// Number of cumulative MC batches.
        #[arg(long, default_value_t = 20)]
        batches: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Fd,
    Mc,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EmitKind {
    Surface,
    Fd,
    Mc,
}

#[derive(Debug, Args)]
struct MarketArgs {
    /// Strike K
    #[arg(long)]
    strike: Option<f64>,
    /// Risk-free rate r.
    #[arg(long)]
    rate: Option<f64>,
    /// Volatility sigma.
    #[arg(long)]
    vol: Option<f64>,
    /// Maturity T in years
    #[arg(long)]
    maturity: Option<f64>,
}

#[derive(Debug, Args)]
struct PointArgs {
    /// Spot S
    #[arg(long)]
    spot: Option<f64>,
    /// Calendar time p in [0, T].
    #[arg(long)]
    time: Option<f64>,
}

#[derive(Debug, Args)]
struct FdArgs {
    /// Comma-separated square grid sizes for --study.
    #[arg(long, value_delimiter = ',')]
    grids: Option<Vec<usize>>,
    /// FD space intervals
    #[arg(long)]
    n_space: Option<usize>,
    /// FD time steps
    #[arg(long)]
    n_time: Option<usize>,
    /// Upper edge of the FD grid in barrier-relative log space
    #[arg(long)]
    xi_max: Option<f64>,
}

#[derive(Debug, Args)]
struct McArgs {
    /// Monte Carlo paths
    #[arg(long)]
    paths: Option<usize>,
    /// Monitoring steps per path
    #[arg(long)]
    steps: Option<usize>,
    /// Monte Carlo seed
    #[arg(long)]
    seed: Option<u64>,
    /// Discrete monitoring without the Brownian-bridge correction.
    #[arg(long)]
    no_bridge: bool,
    /// Kill paths with the crossing probability instead of weighting.
    #[arg(long)]
    binary: bool,
}

enum Failure {
    /// Bad input: exit 2.
    Usage(String),
    /// A check or agreement criterion failed: exit 1.
    Check,
}

impl From<lie_barrier::Error> for Failure {
    fn from(e: lie_barrier::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<String> for Failure {
    fn from(e: String) -> Self {
        Failure::Usage(e)
    }
}

type CliResult = Result<(), Failure>;

/// Values resolved by precedence: flags, then the config file, then defaults.
struct Resolver {
    file: ConfigFile,
}

impl Resolver {
    fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, String>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.file.get(key),
        }
    }

    fn or<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, String>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    /// Market parameters; without `defaults` every one must be given.
    fn market(&self, a: &MarketArgs, defaults: bool) -> Result<MarketParams, Failure> {
        let d = MarketParams::default();
        let need = |v: Option<f64>, name: &str, flag: &str, default: f64| -> Result<f64, Failure> {
            match (v, defaults) {
                (Some(v), _) => Ok(v),
                (None, true) => Ok(default),
                (None, false) => Err(Failure::Usage(format!(
                    "{name} is required: pass --{flag} or set '{flag}' in the config file"
                ))),
            }
        };
        let r = need(self.pick(a.rate, "rate")?, "rate r", "rate", d.r())?;
        let sigma = need(self.pick(a.vol, "vol")?, "volatility sigma", "vol", d.sigma())?;
        let k = need(self.pick(a.strike, "strike")?, "strike K", "strike", d.strike())?;
        let t = need(
            self.pick(a.maturity, "maturity")?,
            "maturity T",
            "maturity",
            d.maturity(),
        )?;
        Ok(MarketParams::new(r, sigma, k, t)?)
    }

    fn grid(&self, a: &FdArgs) -> Result<GridSpec, String> {
        let d = GridSpec::default();
        Ok(GridSpec {
            xi_max: self.or(a.xi_max, "xi_max", d.xi_max)?,
            n_space: self.or(a.n_space, "n_space", d.n_space)?,
            n_time: self.or(a.n_time, "n_time", d.n_time)?,
        })
    }

    fn study_grids(&self, a: &FdArgs, xi_max: f64) -> Result<Vec<GridSpec>, String> {
        let sizes = match &a.grids {
            Some(g) => g.clone(),
            None => match self.file.raw("grids") {
                Some(raw) => raw
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<usize>()
                            .map_err(|e| format!("config key 'grids' = '{raw}': {e}"))
                    })
                    .collect::<Result<_, _>>()?,
                None => vec![100, 200, 400],
            },
        };
        Ok(sizes
            .into_iter()
            .map(|n| GridSpec {
                xi_max,
                ..GridSpec::square(n)
            })
            .collect())
    }

    fn mc(&self, a: &McArgs) -> Result<McConfig, String> {
        let d = McConfig::default();
        Ok(McConfig {
            n_paths: self.or(a.paths, "paths", d.n_paths)?,
            n_steps: self.or(a.steps, "steps", d.n_steps)?,
            seed: self.or(a.seed, "seed", d.seed)?,
            bridge_correction: !a.no_bridge,
            survival: if a.binary {
                SurvivalMode::Binary
            } else {
                SurvivalMode::Weighted
            },
        })
    }
}

fn emit_text(s: &str) {
    print!("{s}");
}

fn emit_json(style: &Style, v: serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(&style.round_json(v)).expect("serialisable")
    );
}

fn cmd_price(res: &Resolver, style: &Style, market: &MarketArgs, point: &PointArgs) -> CliResult {
    let m = res.market(market, false)?;
    let spot = res
        .pick(point.spot, "spot")?
        .ok_or_else(|| Failure::Usage("spot S is required: pass --spot or set 'spot' in the config file".into()))?;
    let time = res.or(point.time, "time", 0.0)?;
    let q = PriceQuery::new(spot, time);
    let r = price(&q, &m)?;
    let level = barrier_level(time, &m)?;
    let g = (r.region == Region::Interior).then(|| greeks(&q, &m)).transpose()?;
    let n = |x: f64| style.num(x);
    match style.format {
        Format::Text => {
            let mut rows = vec![
                vec!["value".into(), n(r.value)],
                vec!["region".into(), r.region.to_string()],
                vec!["barrier".into(), n(level)],
            ];
            if let Some(g) = g {
                rows.push(vec!["delta".into(), n(g.delta)]);
                rows.push(vec!["gamma".into(), n(g.gamma)]);
                rows.push(vec!["theta".into(), n(g.theta)]);
            }
            emit_text(&table(&["quantity", "value"], &rows));
        }
        Format::Json => emit_json(
            style,
            json!({"spot": spot, "time": time, "value": r.value, "region": r.region, "barrier": level, "greeks": g}),
        ),
        Format::Csv => {
            let opt = |x: Option<f64>| x.map(n).unwrap_or_default();
            emit_text(&csv(
                &["spot", "time", "value", "region", "barrier", "delta", "gamma", "theta"],
                &[vec![
                    n(spot),
                    n(time),
                    n(r.value),
                    r.region.to_string(),
                    n(level),
                    opt(g.map(|g| g.delta)),
                    opt(g.map(|g| g.gamma)),
                    opt(g.map(|g| g.theta)),
                ]],
            ))
        }
    }
    Ok(())
}

fn tolerances(specs: &[String]) -> Result<Tolerances, Failure> {
    let mut tol = Tolerances::default();
    for spec in specs {
        match spec.split_once('=') {
            Some((name, value)) => {
                let v = value
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Failure::Usage(format!("--tol {spec}: {e}")))?;
                tol.set(name.trim(), v)?;
            }
            None => {
                let v = spec
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Failure::Usage(format!("--tol {spec}: {e}")))?;
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Failure::Usage(format!("--tol must be finite and >= 0, got {v}")));
                }
                tol = Tolerances::uniform(v);
            }
        }
    }
    Ok(tol)
}

fn print_verify(style: &Style, reports: &[VerifyReport]) {
    let n = |x: f64| style.num(x);
    match style.format {
        Format::Text => {
            for rep in reports {
                println!(
                    "alpha = {} (r = {}, sigma = {}, K = {}, T = {})",
                    n(rep.alpha),
                    n(rep.market.r()),
                    n(rep.market.sigma()),
                    n(rep.market.strike()),
                    n(rep.market.maturity())
                );
                let rows: Vec<Vec<String>> = rep
                    .checks
                    .iter()
                    .map(|c| {
                        vec![
                            if c.passed { "PASS" } else { "FAIL" }.into(),
                            c.name.into(),
                            n(c.measured),
                            n(c.tolerance),
                            c.detail.clone(),
                        ]
                    })
                    .collect();
                emit_text(&table(&["status", "check", "measured", "tolerance", "detail"], &rows));
                println!(
                    "max residual {}; {}/{} checks passed\n",
                    n(rep.max_residual()),
                    rep.checks.len() - rep.failures(),
                    rep.checks.len()
                );
            }
        }
        Format::Json => emit_json(style, serde_json::to_value(reports).expect("serialisable")),
        Format::Csv => {
            let rows: Vec<Vec<String>> = reports
                .iter()
                .flat_map(|rep| {
                    rep.checks.iter().map(move |c| {
                        vec![
                            n(rep.alpha),
                            c.name.into(),
                            n(c.measured),
                            n(c.tolerance),
                            c.passed.to_string(),
                        ]
                    })
                })
                .collect();
            emit_text(&csv(&["alpha", "check", "measured", "tolerance", "passed"], &rows));
        }
    }
}

fn cmd_verify(res: &Resolver, style: &Style, market: &MarketArgs, sweep: Option<&str>, tol: &[String]) -> CliResult {
    let m = res.market(market, true)?;
    let tol = tolerances(tol)?;
    let cfg = SuiteConfig::default();
    let reports = match sweep {
        Some(spec) => verify::run_sweep(&verify::parse_sweep(spec)?, &m, &tol, &cfg)?,
        None => vec![verify::run_suite(&m, &tol, &cfg)],
    };
    print_verify(style, &reports);
    if reports.iter().all(VerifyReport::passed) {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn print_comparison(style: &Style, c: &OracleComparison) {
    let n = |x: f64| style.num(x);
    let mut rows = vec![vec![
        "analytic".to_string(),
        n(c.analytic),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
    ]];
    if let Some(f) = c.fd {
        rows.push(vec![
            "fd".into(),
            n(f.value),
            n(f.abs_error),
            n(f.rel_error),
            String::new(),
            pass(f.passed),
        ]);
    }
    if let Some(m) = c.mc {
        rows.push(vec![
            "mc".into(),
            n(m.value),
            n(m.abs_error),
            n(m.rel_error),
            n(m.std_error),
            pass(m.passed),
        ]);
    }
    let header = ["method", "value", "abs_error", "rel_error", "std_error", "agreement"];
    match style.format {
        Format::Text => {
            println!("spot = {}, time = {}", n(c.spot), n(c.time));
            emit_text(&table(&header, &rows));
        }
        Format::Csv => emit_text(&csv(&header, &rows)),
        Format::Json => emit_json(style, serde_json::to_value(c).expect("serialisable")),
    }
}

fn pass(ok: bool) -> String {
    if ok { "pass" } else { "fail" }.into()
}

fn print_study(style: &Style, s: &StudyReport) {
    let n = |x: f64| style.num(x);
    let rows: Vec<Vec<String>> = s
        .table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.grid.n_space.to_string(),
                r.grid.n_time.to_string(),
                n(r.grid.dxi()),
                n(r.max_error),
                r.order.map(n).unwrap_or_default(),
            ]
        })
        .collect();
    let header = ["n_space", "n_time", "dxi", "max_error", "order"];
    match style.format {
        Format::Text => {
            emit_text(&table(&header, &rows));
            println!(
                "observed order {} ({})",
                s.order.map(n).unwrap_or_else(|| "n/a".into()),
                if s.passed { "pass" } else { "fail" }
            );
        }
        Format::Csv => emit_text(&csv(&header, &rows)),
        Format::Json => emit_json(style, serde_json::to_value(s).expect("serialisable")),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_oracle(
    res: &Resolver,
    style: &Style,
    market: &MarketArgs,
    point: &PointArgs,
    mode: Mode,
    fd_args: &FdArgs,
    mc_args: &McArgs,
    study: bool,
) -> CliResult {
    let m = res.market(market, true)?;
    let grid = res.grid(fd_args)?;
    grid.validate()?;
    let mut ok = true;
    if study {
        let report = oracle::study(&m, &res.study_grids(fd_args, grid.xi_max)?)?;
        print_study(style, &report);
        ok &= report.passed;
        if mode == Mode::Fd {
            return if ok { Ok(()) } else { Err(Failure::Check) };
        }
    }
    let spot = res.or(point.spot, "spot", 110.0)?;
    let time = res.or(point.time, "time", 0.0)?;
    let mc_cfg = res.mc(mc_args)?;
    let use_fd = matches!(mode, Mode::Fd | Mode::Both);
    let use_mc = matches!(mode, Mode::Mc | Mode::Both);
    let c = oracle::compare(spot, time, &m, use_fd.then_some(&grid), use_mc.then_some(&mc_cfg))?;
    print_comparison(style, &c);
    ok &= c.passed();
    if ok {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn io_context(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Usage(format!("writing {}: {e}", path.display()))
}

fn cmd_emit(res: &Resolver, style: &Style, cmd: &Command) -> CliResult {
    let Command::Emit {
        market,
        kind,
        output,
        fd: fd_args,
        mc: mc_args,
        point,
        spot_min,
        spot_max,
        n_spot,
        n_times,
        stride,
        batches,
    } = cmd
    else {
        unreachable!("dispatched on Emit");
    };
    let m = res.market(market, true)?;
    let ctx = io_context(output);
    let rows = match kind {
        EmitKind::Surface => {
            let nodes = surface(&m, *spot_min, *spot_max, *n_spot, *n_times)?;
            let mut w = create(output)?;
            writeln!(w, "S,p,V,region").map_err(&ctx)?;
            for node in &nodes {
                writeln!(
                    w,
                    "{},{},{},{}",
                    style.num(node.spot),
                    style.num(node.time),
                    style.num(node.result.value),
                    node.result.region
                )
                .map_err(&ctx)?;
            }
            w.flush().map_err(&ctx)?;
            nodes.len()
        }
        EmitKind::Fd => {
            let sol = fd::solve(&m, &res.grid(fd_args)?)?;
            let mut w = create(output)?;
            sol.write_csv(&mut w, *stride).map_err(&ctx)?;
            w.flush().map_err(&ctx)?;
            sol.values.len().div_ceil((*stride).max(1)) * sol.xi.len().div_ceil((*stride).max(1))
        }
        EmitKind::Mc => {
            let spot = res.or(point.spot, "spot", 110.0)?;
            let run = mc::simulate_run(spot, &m, &res.mc(mc_args)?)?;
            let mut w = create(output)?;
            run.write_batch_csv(&mut w, *batches).map_err(&ctx)?;
            w.flush().map_err(&ctx)?;
            run.batch_series(*batches).len()
        }
    };
    if style.format == Format::Json {
        emit_json(style, json!({"output": output, "rows": rows}));
    } else {
        println!("wrote {rows} rows to {}", output.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let res = Resolver { file };
    let style = Style {
        format: cli.format,
        digits: if cli.full_precision { 17 } else { 6 },
    };
    match &cli.command {
        Command::Price { market, point } => cmd_price(&res, &style, market, point),
        Command::Verify {
            market,
            alpha_sweep,
            tol,
        } => cmd_verify(&res, &style, market, alpha_sweep.as_deref(), tol),
        Command::Oracle {
            market,
            point,
            mode,
            fd,
            mc,
            study,
        } => cmd_oracle(&res, &style, market, point, *mode, fd, mc, *study),
        cmd @ Command::Emit { .. } => cmd_emit(&res, &style, cmd),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
