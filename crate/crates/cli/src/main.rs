//! Command-line front end: optimize designs, compute confidence bounds, sweep
//! radii, evaluate designs, and run discrimination simulations.
//!
//! Exit status: 0 on success, 2 on configuration or parse errors, 3 on
//! numerical failures.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use deltadesign::io::{
    fmt_f64, read_design_csv, render_bound_report, write_batch_csv, write_bound_report,
    write_design_csv, write_design_meta, write_hit_rate_csv, DesignMeta,
};
use deltadesign::model::ENZYME_SIGMA;
use deltadesign::sim::run_batches;
use deltadesign::{
    batch_hit_rates, bound_iterative, bound_lp, delta_r, kl_exchange, sweep_r, ErrorKind,
    ErrorModel, SimConfig,
};

use config::{load_problem, parse_radius, FileConfig, ProblemSpec};

#[derive(Parser)]
#[command(name = "deltadesign", version, about = "Exact designs for discriminating rival nonlinear regression models")]
struct Cli {
    /// JSON configuration file; command-line flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for generated files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for simulations and search restarts (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ProblemArgs {
    /// Built-in problem name (`motivating` or `enzyme`); a config file may
    /// define the problem instead.
    #[arg(long)]
    problem: Option<String>,
    /// Grid override for the enzyme problem, e.g. 31x41.
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Args, Clone)]
struct SearchArgs {
    /// Restarts of the exchange search.
    #[arg(long)]
    restarts: Option<usize>,
    /// Seed of the search (and simulation) random streams.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Search a delta_r-optimal exact design of size n.
    Optimize {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Design size.
        #[arg(long)]
        n: Option<usize>,
        /// Confidence radius (a number, or `inf`).
        #[arg(long)]
        r: Option<String>,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Compute an upper confidence bound for the radius.
    Bound {
        #[command(flatten)]
        problem: ProblemArgs,
        /// `iterative` or `lp`.
        #[arg(long)]
        method: Option<String>,
        /// Design size (iterative method).
        #[arg(long)]
        n: Option<usize>,
        /// Initial radius of the iterative method.
        #[arg(long = "r-ini")]
        r_ini: Option<f64>,
        /// Growth ratio of the iterative method (> 1).
        #[arg(long)]
        q: Option<f64>,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Optimal designs over a list of radii.
    Sweep {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        n: Option<usize>,
        /// Comma-separated ascending radii, e.g. 0.01,0.1,0.2.
        #[arg(long = "r-list")]
        r_list: Option<String>,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Evaluate delta_r for a design read from CSV.
    Eval {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Design CSV (coordinates + count).
        #[arg(long = "design-file")]
        design_file: PathBuf,
        #[arg(long)]
        r: Option<String>,
        /// Match the design against the problem's grid instead of evaluating
        /// it on its own support.
        #[arg(long)]
        on_grid: bool,
    },
    /// Monte-Carlo hit rates of designs under the likelihood-ratio rule.
    Simulate {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Radii whose optimal designs are simulated, e.g. 1,5,15.
        #[arg(long = "r-list")]
        r_list: Option<String>,
        /// External designs CSV-file list (evaluated on their own support).
        #[arg(long = "designs-file")]
        designs_file: Vec<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        /// Replicates per true model.
        #[arg(long = "N", alias = "replicates")]
        replicates: Option<usize>,
        /// Comma-separated perturbation levels, e.g. 0,1,5.
        #[arg(long = "c-list")]
        c_list: Option<String>,
        /// Error kind: `normal` or `lognormal`.
        #[arg(long)]
        error: Option<String>,
        /// Base error standard deviation.
        #[arg(long)]
        sigma: Option<f64>,
        /// Standard-deviation inflation factor.
        #[arg(long)]
        inflation: Option<f64>,
        /// Batched mode: number of batches (0 = off).
        #[arg(long)]
        batches: Option<usize>,
        /// Replicates per batch in batched mode.
        #[arg(long = "batch-size")]
        batch_size: Option<usize>,
        #[command(flatten)]
        search: SearchArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = classify(&e);
            ExitCode::from(code)
        }
    }
}

/// 2 for configuration/parse problems, 3 for numerical failures.
fn classify(e: &anyhow::Error) -> u8 {
    use deltadesign::Error as E;
    match e.downcast_ref::<E>() {
        Some(E::InvalidArgument(_) | E::NotFound(_) | E::Parse(_) | E::Io(_)) => 2,
        Some(
            E::NumericDomain(_) | E::SolverFailure(_) | E::FitFailure(_) | E::EnumerationGuard { .. },
        ) => 3,
        None => 2,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let file: FileConfig = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let out_dir = cli.out.clone().or_else(|| file.output.clone()).unwrap_or_else(|| PathBuf::from("."));

    match cli.command {
        Command::Optimize { problem, n, r, search } => {
            let problem = load_problem(&file, &problem.problem, &problem.grid)?;
            let n = n.or(file.n).ok_or_else(|| missing("--n"))?;
            let r = resolve_radius(r.as_deref(), file.r.clone())?;
            let config = file.search_config(n, r, &search);
            let result = kl_exchange(&problem, &config)?;
            let design_path = out_dir.join("design.csv");
            write_design_csv(&design_path, problem.space(), &result.design)?;
            write_design_meta(
                &out_dir.join("design.meta.json"),
                &DesignMeta {
                    r,
                    n,
                    value: result.value,
                    value_sq: result.value_sq,
                    seed: config.seed,
                },
            )?;
            println!("value: {}", fmt_f64(result.value));
            println!("value_sq: {}", fmt_f64(result.value_sq));
            println!("support points: {}", result.design.support_size());
            println!("criterion evaluations: {}", result.evaluations);
            println!("design written to {}", design_path.display());
            Ok(())
        }
        Command::Bound { problem, method, n, r_ini, q, search } => {
            let problem = load_problem(&file, &problem.problem, &problem.grid)?;
            let method = method.or(file.bound_method.clone()).ok_or_else(|| missing("--method"))?;
            let result = match method.as_str() {
                "lp" => bound_lp(&problem)?,
                "iterative" => {
                    let n = n.or(file.n).ok_or_else(|| missing("--n"))?;
                    let r_ini = r_ini.or(file.r_ini).ok_or_else(|| missing("--r-ini"))?;
                    let q = q.or(file.q).ok_or_else(|| missing("--q"))?;
                    let config = file.search_config(n, f64::INFINITY, &search);
                    let o_inf = kl_exchange(&problem, &config)?.value;
                    bound_iterative(&problem, n, o_inf, r_ini, q, &config)?
                }
                other => {
                    return Err(deltadesign::Error::InvalidArgument(format!(
                        "unknown bound method {other:?} (use `iterative` or `lp`)"
                    ))
                    .into())
                }
            };
            let report = render_bound_report(&result);
            print!("{report}");
            write_bound_report(&out_dir.join("bound.txt"), &result)?;
            Ok(())
        }
        Command::Sweep { problem, n, r_list, search } => {
            let problem = load_problem(&file, &problem.problem, &problem.grid)?;
            let n = n.or(file.n).ok_or_else(|| missing("--n"))?;
            let rs = resolve_radius_list(r_list.as_deref(), file.r_list.clone())?;
            let base = file.search_config(n, 0.0, &search);
            let results = sweep_r(&problem, n, &rs, &base)?;
            let mut summary = String::from("r,value,value_sq,support_points,design_file\n");
            for (i, (r, res)) in results.iter().enumerate() {
                let name = format!("design_r{i}.csv");
                write_design_csv(&out_dir.join(&name), problem.space(), &res.design)?;
                write_design_meta(
                    &out_dir.join(format!("design_r{i}.meta.json")),
                    &DesignMeta {
                        r: *r,
                        n,
                        value: res.value,
                        value_sq: res.value_sq,
                        seed: base.seed,
                    },
                )?;
                summary.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt_f64(*r),
                    fmt_f64(res.value),
                    fmt_f64(res.value_sq),
                    res.design.support_size(),
                    name
                ));
            }
            std::fs::write(out_dir.join("sweep.csv"), &summary)?;
            print!("{summary}");
            Ok(())
        }
        Command::Eval { problem, design_file, r, on_grid } => {
            let problem = load_problem(&file, &problem.problem, &problem.grid)?;
            let r = resolve_radius(r.as_deref(), file.r.clone())?;
            let (space, design) =
                read_design_csv(&design_file, if on_grid { Some(problem.space()) } else { None })?;
            let problem = if on_grid { problem } else { problem.with_space(space)? };
            let value = delta_r(&problem, &design, r)?;
            println!("r: {}", fmt_f64(r));
            println!("n: {}", design.n());
            println!("value: {}", fmt_f64(value));
            println!("value_sq: {}", fmt_f64(value * value));
            Ok(())
        }
        Command::Simulate {
            problem,
            r_list,
            designs_file,
            n,
            replicates,
            c_list,
            error,
            sigma,
            inflation,
            batches,
            batch_size,
            search,
        } => {
            let problem = load_problem(&file, &problem.problem, &problem.grid)?;
            let replicates = replicates.or(file.replicates).ok_or_else(|| missing("--N"))?;
            let sigma = sigma.or(file.sigma).unwrap_or(ENZYME_SIGMA);
            let inflation = inflation.or(file.inflation).unwrap_or(1.0);
            let kind = match error.or(file.error_kind.clone()).as_deref() {
                None | Some("normal") => ErrorKind::NormalAdditive,
                Some("lognormal") => ErrorKind::LognormalRescaled,
                Some(other) => {
                    return Err(deltadesign::Error::InvalidArgument(format!(
                        "unknown error kind {other:?} (use `normal` or `lognormal`)"
                    ))
                    .into())
                }
            };
            let seed = search.seed.or(file.seed).unwrap_or(0);
            let cs: Vec<f64> = match c_list.as_deref() {
                Some(s) => parse_list(s)?,
                None => file.c_list.clone().unwrap_or_else(|| vec![0.0]),
            };

            // Designs: optimal designs per radius on the problem grid, plus
            // external files evaluated on their own support.
            let mut on_grid: Vec<(String, deltadesign::ExactDesign)> = Vec::new();
            if let Some(rl) = r_list.as_deref().map(parse_list).transpose()?.or(file.r_list.clone())
            {
                let n = n.or(file.n).ok_or_else(|| missing("--n"))?;
                for (i, &r) in rl.iter().enumerate() {
                    let config = file.search_config(n, r, &search);
                    let res = kl_exchange(&problem, &config)?;
                    write_design_csv(
                        &out_dir.join(format!("sim_design_delta{}.csv", i + 1)),
                        problem.space(),
                        &res.design,
                    )?;
                    on_grid.push((format!("delta{}(r={r})", i + 1), res.design));
                }
            }
            let error_model = ErrorModel { kind, sigma, inflation };
            let base = SimConfig::new(replicates, seed, error_model);
            let grid: Vec<(f64, f64)> = cs.iter().map(|&c| (c, inflation)).collect();

            let mut all_cells = Vec::new();
            if !on_grid.is_empty() {
                all_cells.extend(batch_hit_rates(&problem, &on_grid, &grid, &base)?);
            }
            for path in &designs_file {
                let (space, design) = read_design_csv(path, None)?;
                let own_problem = problem.with_space(space)?;
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "external".into());
                all_cells.extend(batch_hit_rates(
                    &own_problem,
                    &[(name, design)],
                    &grid,
                    &base,
                )?);
            }
            if all_cells.is_empty() {
                return Err(deltadesign::Error::InvalidArgument(
                    "nothing to simulate: give --r-list (with --n) or --designs-file".into(),
                )
                .into());
            }
            write_hit_rate_csv(&out_dir.join("hit_rates.csv"), &all_cells)?;
            for cell in &all_cells {
                match &cell.report {
                    Some(rep) => println!(
                        "{} c={} k={}: model0-true {:.2}% model1-true {:.2}% (failures {}/{})",
                        cell.design,
                        cell.perturbation_c,
                        cell.inflation,
                        100.0 * rep.hit_rate(0),
                        100.0 * rep.hit_rate(1),
                        rep.fit_failures0,
                        rep.fit_failures1,
                    ),
                    None => println!(
                        "{} c={} k={}: FAILED ({})",
                        cell.design,
                        cell.perturbation_c,
                        cell.inflation,
                        cell.failure.as_deref().unwrap_or("unknown")
                    ),
                }
            }

            // Batched mode for distribution summaries.
            let batches = batches.or(file.batches).unwrap_or(0);
            if batches > 0 {
                let batch_size = batch_size.or(file.batch_size).unwrap_or(100);
                for (name, design) in &on_grid {
                    let rates = run_batches(&problem, design, &base, batches, batch_size)?;
                    let safe: String =
                        name.chars().map(|c| if c.is_alphanumeric() { c } else { '_' }).collect();
                    write_batch_csv(&out_dir.join(format!("batches_{safe}.csv")), &rates)?;
                }
            }
            println!("hit-rate table written to {}", out_dir.join("hit_rates.csv").display());
            Ok(())
        }
    }
}

fn missing(flag: &str) -> anyhow::Error {
    deltadesign::Error::InvalidArgument(format!("{flag} is required (flag or config key)")).into()
}

fn resolve_radius(flag: Option<&str>, from_file: Option<String>) -> anyhow::Result<f64> {
    let s = flag
        .map(str::to_owned)
        .or(from_file)
        .ok_or_else(|| missing("--r"))?;
    Ok(parse_radius(&s)?)
}

fn resolve_radius_list(flag: Option<&str>, from_file: Option<Vec<f64>>) -> anyhow::Result<Vec<f64>> {
    match flag {
        Some(s) => Ok(parse_list(s)?),
        None => from_file.ok_or_else(|| missing("--r-list")).map_err(Into::into),
    }
}

fn parse_list(s: &str) -> deltadesign::Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Err(deltadesign::Error::InvalidArgument("empty list".into()));
    }
    s.split(',').map(|t| parse_radius(t.trim())).collect()
}
