//! The `potpda` command line: argument definitions, configuration
//! resolution and one handler per subcommand. Every handler prints a JSON
//! summary on stdout and writes its files under `--out`.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use potpda::bounds::check_theorem;
use potpda::dataset::{read_dataset, write_dataset};
use potpda::measures::PdaDataset;
use potpda::pot::{entropic_partial_ot, exact_partial_ot, SolverConfig};
use potpda::synthbench::{
    compare_schemes, generate_pda_task, sensitivity_sweep, write_histogram_csv, write_results_csv, write_sweep_csv,
    SweepParam,
};
use potpda::warmpot::{outlier_share, scheme_weights, train, unit_scaled_weights, write_trace_csv, ModelParams};
use potpda::weights::{histogram, Scheme, HISTOGRAM_BINS};
use serde_json::{json, Value};

use config::RunConfig;

/// Exit code 2 for usage errors, 1 for computation failures.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Compute(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Compute(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<potpda::Error> for CliError {
    fn from(e: potpda::Error) -> Self {
        use potpda::Error as E;
        match e {
            E::InvalidParameter { .. }
            | E::DimensionMismatch { .. }
            | E::NegativeMass { .. }
            | E::NonFiniteCost { .. }
            | E::Infeasible { .. }
            | E::TooLarge { .. }
            | E::EmptyMeasure
            | E::Dataset(_) => CliError::Usage(e.to_string()),
            other => CliError::Compute(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Compute(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "potpda", version, about = "Partial optimal transport for partial domain adaptation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Key-value configuration file (`key = value` lines, `#` comments).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Random seed; overrides `seed` from files.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Preset: default, imagenet-caltech-like or synthetic-bench.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Extra `key=value` overrides, applied after all files.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolveMethod {
    Exact,
    Entropic,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one partial OT problem given masses and a cost matrix.
    Solve {
        /// Source masses, one value per line or comma-separated.
        #[arg(long)]
        a: PathBuf,
        /// Target masses.
        #[arg(long)]
        b: PathBuf,
        /// Cost matrix as headerless CSV, one row per source atom.
        #[arg(long)]
        cost: PathBuf,
        /// Mass to transport.
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "exact")]
        method: SolveMethod,
        /// Entropic regularization strength.
        #[arg(long)]
        eps: Option<f64>,
        /// Entropic iteration limit.
        #[arg(long)]
        max_iter: Option<usize>,
        /// Entropic stopping tolerance.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Source weights of one scheme on a dataset.
    Weights {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        scheme: Option<String>,
        /// Trained parameters (`params.json`); identity features and a zero head otherwise.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Check a bound on random instances.
    BoundCheck {
        #[arg(long)]
        theorem: u8,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 30)]
        max_n: usize,
    },
    /// Train a model on a dataset file.
    Train {
        #[arg(long)]
        data: PathBuf,
    },
    /// Compare weighting schemes over paired seeds on a synthetic task.
    Bench {
        /// Task/training key-value file, merged after `--config`.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "warmpot,uniform")]
        schemes: Vec<String>,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        /// Also run a sensitivity sweep over this parameter.
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8,1.0")]
        grid: Vec<f64>,
    },
    /// Sensitivity of WARMPOT accuracy to `alpha_max` or `beta`.
    Sweep {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8,1.0")]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        seeds: usize,
    },
    /// Write a synthetic task as a dataset file.
    Generate {
        /// Leave out the hidden target labels.
        #[arg(long)]
        no_hidden: bool,
    },
}

/// Resolves the configuration from `--config`, an optional extra file,
/// `--preset`, `--set` and `--seed`, in that order of precedence (last wins).
pub fn resolve_config(global: &GlobalArgs, extra: Option<&Path>) -> Result<RunConfig, CliError> {
    let mut files = Vec::new();
    for path in global.config.iter().map(PathBuf::as_path).chain(extra) {
        files.extend(config::read_file(path)?);
    }
    let mut flags = Vec::new();
    if let Some(p) = &global.preset {
        flags.push(("preset".to_string(), p.clone()));
    }
    for kv in &global.overrides {
        let (k, v) =
            kv.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        flags.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(s) = global.seed {
        flags.push(("seed".to_string(), s.to_string()));
    }
    config::resolve(&files, &flags)
}

fn out_dir(global: &GlobalArgs) -> Result<&Path, CliError> {
    fs::create_dir_all(&global.out).map_err(|e| io_err(&global.out, e))?;
    Ok(&global.out)
}

fn write_echo(dir: &Path, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let path = dir.join("config.txt");
    fs::write(&path, config::echo(cfg)).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// Headerless numeric CSV: one row per line.
pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let bad = |e: &dyn std::fmt::Display| CliError::Usage(format!("{}: {e}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(&e))?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| bad(&e))?;
        let row = rec
            .iter()
            .filter(|f| !f.is_empty())
            .map(|f| f.parse::<f64>().map_err(|_| bad(&format!("`{f}` is not a number"))))
            .collect::<Result<Vec<_>, _>>()?;
        if !row.is_empty() {
            rows.push(row);
        }
    }
    Ok(rows)
}

fn read_vector(path: &Path) -> Result<Vec<f64>, CliError> {
    Ok(read_matrix(path)?.into_iter().flatten().collect())
}

fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for row in m.rows() {
        w.write_record(row.iter().map(f64::to_string)).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_single_histogram(path: &Path, normalized: &[f64]) -> Result<(), CliError> {
    let counts = histogram(normalized, HISTOGRAM_BINS);
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let mut put = |rec: [String; 3]| w.write_record(rec).map_err(|e| io_err(path, e));
    put(["bin_lo".into(), "bin_hi".into(), "count".into()])?;
    for (b, c) in counts.iter().enumerate() {
        let n = HISTOGRAM_BINS as f64;
        put([(b as f64 / n).to_string(), ((b + 1) as f64 / n).to_string(), c.to_string()])?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Compute(e.to_string()))?;
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn load_dataset(path: &Path) -> Result<PdaDataset, CliError> {
    read_dataset(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn parse_scheme(s: &str) -> Result<Scheme, CliError> {
    s.parse().map_err(|e: potpda::Error| CliError::Usage(e.to_string()))
}

fn seed_list(first: u64, n: usize) -> Result<Vec<u64>, CliError> {
    if n == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    Ok((0..n as u64).map(|i| first.wrapping_add(i)).collect())
}

/// Runs one command and returns the JSON summary printed on stdout.
pub fn run(cli: &Cli) -> Result<Value, CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Solve { a, b, cost, alpha, method, eps, max_iter, tol } => {
            let a = read_vector(a)?;
            let b = read_vector(b)?;
            let rows = read_matrix(cost)?;
            let ncols = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != ncols) {
                return Err(CliError::Usage("cost rows have different lengths".into()));
            }
            let c = Array2::from_shape_vec((rows.len(), ncols), rows.concat())
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let dir = out_dir(g)?;
            let defaults = SolverConfig::default();
            let (plan, converged, iterations, eps) = match method {
                SolveMethod::Exact => (exact_partial_ot(&a, &b, &c, *alpha)?.0, true, None, None),
                SolveMethod::Entropic => {
                    let cfg = SolverConfig {
                        eps: eps.unwrap_or(defaults.eps),
                        max_iter: max_iter.unwrap_or(defaults.max_iter),
                        tol: tol.unwrap_or(defaults.tol),
                    };
                    let r = entropic_partial_ot(&a, &b, &c, *alpha, &cfg)?;
                    (r.plan, r.converged, Some(r.iterations), Some(r.eps))
                }
            };
            let plan_path = dir.join("plan.csv");
            write_matrix(&plan_path, &plan.matrix)?;
            Ok(json!({
                "method": format!("{method:?}").to_lowercase(),
                "cost": plan.cost(&c),
                "converged": converged,
                "iterations": iterations,
                "eps": eps,
                "mass": plan.total_mass(),
                "plan_path": plan_path,
            }))
        }
        Command::Weights { data, scheme, params } => {
            let mut cfg = resolve_config(g, None)?;
            if let Some(s) = scheme {
                cfg.train.scheme = parse_scheme(s)?;
            }
            let data = load_dataset(data)?;
            let params = match params {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                    serde_json::from_str::<ModelParams>(&text)
                        .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
                }
                None => {
                    let (d, k) = (data.input_dim(), data.num_classes().max(1));
                    ModelParams { wf: Array2::eye(d), wg: Array2::zeros((k, d)), bias: vec![0.0; k] }
                }
            };
            let weights = scheme_weights(&params, &data, &cfg.train)?;
            let normalized = unit_scaled_weights(&weights, cfg.train.beta)?;
            let share = outlier_share(&weights.values, &data)?;
            let dir = out_dir(g)?;
            let hist = dir.join("weights_hist.csv");
            write_single_histogram(&hist, &normalized)?;
            let summary = json!({
                "scheme": weights.scheme.name(),
                "values": weights.values,
                "normalized": normalized,
                "total": weights.total(),
                "outlier_share": share,
                "histogram_path": hist,
            });
            write_json(&dir.join("weights.json"), &summary)?;
            Ok(summary)
        }
        Command::BoundCheck { theorem, trials, max_n } => {
            if *theorem != 1 && *theorem != 2 {
                return Err(CliError::Usage(format!("--theorem must be 1 or 2, got {theorem}")));
            }
            let seed = resolve_config(g, None)?.train.seed;
            let s = check_theorem(*theorem, *trials, seed, *max_n)?;
            let dir = out_dir(g)?;
            let path = dir.join("reports.csv");
            let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
            for r in &s.reports {
                w.serialize(r).map_err(|e| io_err(&path, e))?;
            }
            w.flush().map_err(|e| io_err(&path, e))?;
            Ok(json!({
                "theorem": s.theorem,
                "trials": s.trials,
                "violations": s.violations,
                "max_slack": s.max_slack,
                "min_slack": s.min_slack,
                "reports_path": path,
            }))
        }
        Command::Train { data } => {
            let cfg = resolve_config(g, None)?;
            let data = load_dataset(data)?;
            let r = train(&data, &cfg.train)?;
            let dir = out_dir(g)?;
            let config_path = write_echo(dir, &cfg)?;
            let trace_path = dir.join("trace.csv");
            write_trace_csv(&r.trace, &trace_path)?;
            let params_path = dir.join("params.json");
            write_json(&params_path, &r.params)?;
            let hist = dir.join("weights_hist.csv");
            write_single_histogram(&hist, &r.normalized_weights)?;
            let last = r.trace.last();
            Ok(json!({
                "iterations": r.trace.len(),
                "final_alpha": last.map(|t| t.alpha),
                "final_objective": last.map(|t| t.objective),
                "target_accuracy": r.target_accuracy,
                "outlier_share": r.outlier_share,
                "trace_path": trace_path,
                "params_path": params_path,
                "histogram_path": hist,
                "config_path": config_path,
            }))
        }
        Command::Bench { spec, schemes, seeds, sweep, grid } => {
            let cfg = resolve_config(g, spec.as_deref())?;
            let schemes = schemes.iter().map(|s| parse_scheme(s)).collect::<Result<Vec<_>, _>>()?;
            let sweep = sweep.as_deref().map(str::parse::<SweepParam>).transpose()?;
            let seeds = seed_list(cfg.train.seed, *seeds)?;
            let bench = compare_schemes(&cfg.task, &cfg.train, &schemes, &seeds)?;
            let dir = out_dir(g)?;
            write_echo(dir, &cfg)?;
            let results = dir.join("results.csv");
            write_results_csv(&bench, &results)?;
            let hist = dir.join("weights_hist.csv");
            write_histogram_csv(&bench, &hist)?;
            let sweep_path = match sweep {
                Some(param) => {
                    let rows = sensitivity_sweep(&cfg.task, &cfg.train, param, grid, &seeds)?;
                    let path = dir.join("sweep.csv");
                    write_sweep_csv(param, &rows, &path)?;
                    Some(path)
                }
                None => None,
            };
            let summaries: Vec<Value> = bench
                .schemes
                .iter()
                .map(|s| {
                    json!({
                        "scheme": s.scheme.name(),
                        "mean_accuracy": s.mean_accuracy,
                        "std_accuracy": s.std_accuracy,
                        "mean_outlier_share": s.mean_outlier_share,
                        "failures": s.failures(),
                    })
                })
                .collect();
            Ok(json!({
                "seeds": seeds,
                "outlier_sample_share": bench.outlier_sample_share,
                "schemes": summaries,
                "results_path": results,
                "histogram_path": hist,
                "sweep_path": sweep_path,
            }))
        }
        Command::Sweep { spec, param, grid, seeds } => {
            let cfg = resolve_config(g, spec.as_deref())?;
            let param: SweepParam = param.parse()?;
            let seeds = seed_list(cfg.train.seed, *seeds)?;
            let rows = sensitivity_sweep(&cfg.task, &cfg.train, param, grid, &seeds)?;
            let dir = out_dir(g)?;
            write_echo(dir, &cfg)?;
            let path = dir.join("sweep.csv");
            write_sweep_csv(param, &rows, &path)?;
            Ok(json!({ "rows": rows, "sweep_path": path }))
        }
        Command::Generate { no_hidden } => {
            let cfg = resolve_config(g, None)?;
            let mut data = generate_pda_task(&cfg.task)?;
            if *no_hidden {
                data.target_labels_hidden = None;
            }
            let dir = out_dir(g)?;
            let path = dir.join("task.csv");
            write_dataset(&path, &data)?;
            Ok(json!({ "path": path, "n_s": data.n_source(), "n_t": data.n_target(), "d": data.input_dim() }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes() {
        let usage: CliError = potpda::Error::Infeasible { alpha: 2.0, available: 1.0 }.into();
        assert_eq!(usage.exit_code(), 2);
        let compute: CliError = potpda::Error::Solver("x".into()).into();
        assert_eq!(compute.exit_code(), 1);
    }

    #[test]
    fn matrix_reader_accepts_rows_and_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        fs::write(&p, "1, 2\n3,4\n\n").unwrap();
        assert_eq!(read_matrix(&p).unwrap(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        fs::write(&p, "0.5\n0.25\n").unwrap();
        assert_eq!(read_vector(&p).unwrap(), vec![0.5, 0.25]);
        fs::write(&p, "1,x\n").unwrap();
        assert!(matches!(read_matrix(&p), Err(CliError::Usage(_))));
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
