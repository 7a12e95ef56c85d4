//! `smlab space|op|suite|report`: build spaces and operators from a config file, run
//! named suites, and aggregate their reports.
//!
//! Exit codes: 0 pass, 1 fail, 2 configuration error, 3 resource or budget error.

pub mod build;
pub mod config;
pub mod output;
pub mod suites;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use smlab::estimates::report::f17;
use smlab::estimates::write_atomic;
use smlab::metric_space::{doubling_ratio, volume_profile, volume_profile_fit};
use smlab::norms::{norm_ptop_with, PNormOptions};

use build::{build_space, space_section, OperatorPool};
use config::Config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] smlab::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use smlab::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::Budget { .. }) => 3,
            CliError::Core(
                E::Config(_) | E::InvalidArgument(_) | E::NotNonNegative { .. } | E::Pole(_) | E::Undefined(_) | E::Cache(_),
            ) => 2,
            CliError::Core(_) | CliError::Io(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "smlab", about = "Spectral multiplier laboratory on finite metric-measure spaces")]
pub struct Cli {
    /// Experiment file with [space], [operator], [run] and [suite.<name>] sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `[run] out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for grid-point parallelism.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed for randomized norm lower bounds (overrides `[run] seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Point and eigensolver budget (overrides `[run] budget`).
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Summarise the space: size, mass, diameter, doubling ratio, volume profile.
    Space,
    /// Build the operator and summarise its spectrum.
    Op,
    /// Run one suite, or every configured suite with `all`.
    Suite { name: String },
    /// Aggregate the suite reports of a run directory.
    Report { run_dir: Option<PathBuf> },
}

/// Resolved `[run]` settings merged with the flags.
struct Run {
    out: PathBuf,
    seed: Option<u64>,
    budget: Option<usize>,
}

fn load(cli: &Cli) -> Result<(Config, Run), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let cfg = Config::load(path)?;
    for s in &cfg.sections {
        let known = ["space", "operator", "run"].contains(&s.name.as_str())
            || s.name.starts_with("space.")
            || s.name.starts_with("suite.");
        if !known {
            return Err(CliError::Config(format!("line {}: unknown section [{}]", s.line, s.name)));
        }
    }
    let run = cfg.section("run");
    if let Some(r) = run {
        r.allow(&["out", "seed", "jobs", "budget", "pnorm_p", "pnorm_t"])?;
    }
    let out = match (&cli.out, run.and_then(|r| r.str_opt("out"))) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => cfg.resolve(o),
        (None, None) => PathBuf::from("smlab-out"),
    };
    let seed = match cli.seed {
        Some(s) => Some(s),
        None => run.map(|r| r.usize_opt("seed")).transpose()?.flatten().map(|s| s as u64),
    };
    let budget = match cli.budget {
        Some(b) => Some(b),
        None => run.map(|r| r.usize_opt("budget")).transpose()?.flatten(),
    };
    let jobs = match cli.jobs {
        Some(j) => Some(j),
        None => run.map(|r| r.usize_opt("jobs")).transpose()?.flatten(),
    };
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    Ok((cfg, Run { out, seed, budget }))
}

fn radii(h: f64, hi: f64, n: usize) -> Vec<f64> {
    if hi <= h {
        return vec![h];
    }
    (0..n).map(|k| h * (hi / h).powf(k as f64 / (n - 1) as f64)).collect()
}

fn cmd_space(cfg: &Config, run: &Run, say: &mut String) -> Result<i32, CliError> {
    let sec = space_section(cfg, "space")?;
    let space = build_space(sec, run.budget)?;
    let h = space.max_edge_length();
    let diam = space.diameter();
    let rs = radii(h, diam / 2.0, 8);
    let dr = doubling_ratio(&space, &rs)?;
    let mut fields = vec![
        ("points", space.len() as f64),
        ("total_mass", space.total_mass()),
        ("diameter", diam),
        ("doubling_ratio", dr),
    ];
    let profile_grid = radii(h, diam, 16);
    let crossover = match sec.f64_opt("profile_crossover")? {
        Some(c) => Some(c),
        None if sec.str_opt("kind") == Some("ends") => Some(sec.usize("torus_side")? as f64 * sec.f64_or("h", 1.0)?),
        None => None,
    };
    let samples = match crossover {
        Some(c) => {
            let vp = volume_profile_fit(&space, &profile_grid, c)?;
            fields.extend([("crossover_radius", c), ("n_small", vp.n_small), ("n_large", vp.n_large), ("profile_residual", vp.fit_residual)]);
            vp.samples
        }
        None => volume_profile(&space, &profile_grid),
    };
    std::fs::create_dir_all(&run.out)?;
    let mut csv = String::from("r,sup_volume,argmax_point\n");
    for s in &samples {
        let _ = writeln!(csv, "{},{},{}", f17(s.r), f17(s.sup_volume), s.argmax_point);
    }
    write_atomic(&run.out.join("space_volume_profile.csv"), csv.as_bytes())?;
    let mut json = format!("{{\n  \"space_hash\": {}", output::json_string(&space.content_hash()));
    for (k, v) in &fields {
        let _ = write!(json, ",\n  \"{k}\": {}", f17(*v));
    }
    json.push_str("\n}\n");
    write_atomic(&run.out.join("space.summary.json"), json.as_bytes())?;
    for (k, v) in &fields {
        let _ = writeln!(say, "{k:<18} {v}");
    }
    Ok(0)
}

fn cmd_op(cfg: &Config, run: &Run, say: &mut String) -> Result<i32, CliError> {
    let mut pool = OperatorPool::new(cfg, run.budget);
    let built = pool.get("space")?;
    let op = &built.op;
    let vals = op.eigenvalues()?;
    let mut fields: Vec<(String, f64)> = vec![
        ("points".into(), op.len() as f64),
        ("min_eigenvalue".into(), vals[0]),
        ("max_eigenvalue".into(), *vals.last().unwrap()),
        ("tol_psd".into(), op.tol_psd()?),
        ("self_adjointness_defect".into(), op.self_adjointness_defect()),
    ];
    if built.spec.is_some() {
        let eps = cfg.section("operator").map(|s| s.f64_or("subcritical_eps", 0.1)).transpose()?.unwrap_or(0.1);
        let sc = smlab::operators::check_subcritical(op, eps)?;
        fields.push(("subcritical_eps".into(), eps));
        fields.push(("subcritical_min_eig".into(), sc.min_eig));
        fields.push(("subcritical_pass".into(), if sc.pass { 1.0 } else { 0.0 }));
    }
    if let Some(r) = cfg.section("run") {
        if let Some(ps) = r.list_opt("pnorm_p")? {
            let seed = run.seed.ok_or_else(|| {
                CliError::Config(format!("line {}: pnorm_p draws random test vectors and needs a seed", r.line_of("pnorm_p")))
            })?;
            let t = r.f64_or("pnorm_t", 1.0)?;
            let k = smlab::calculus::heat_kernel(op, t)?;
            for p in ps {
                let iv = norm_ptop_with(&k, p, PNormOptions { seed, ..PNormOptions::default() })?;
                fields.push((format!("heat_norm_p{p}_lower"), iv.lower));
                fields.push((format!("heat_norm_p{p}_upper"), iv.upper));
            }
        }
    }
    std::fs::create_dir_all(&run.out)?;
    let mut csv = String::from("index,lambda\n");
    for (i, v) in vals.iter().enumerate() {
        let _ = writeln!(csv, "{i},{}", f17(*v));
    }
    write_atomic(&run.out.join("op_eigenvalues.csv"), csv.as_bytes())?;
    let mut json = format!("{{\n  \"space_hash\": {}", output::json_string(&op.space().content_hash()));
    for (k, v) in &fields {
        let _ = write!(json, ",\n  \"{k}\": {}", f17(*v));
    }
    json.push_str("\n}\n");
    write_atomic(&run.out.join("op.summary.json"), json.as_bytes())?;
    for (k, v) in &fields {
        let _ = writeln!(say, "{k:<26} {v}");
    }
    Ok(0)
}

fn cmd_suite(cfg: &Config, run: &Run, name: &str, say: &mut String) -> Result<i32, CliError> {
    let names = if name == "all" { cfg.suite_names() } else { vec![name.to_string()] };
    if names.is_empty() {
        return Err(CliError::Config("no [suite.<name>] sections to run".into()));
    }
    let mut pool = OperatorPool::new(cfg, run.budget);
    let mut code = 0;
    for n in names {
        let mut report = suites::run_suite(cfg, &n, &mut pool, &run.out)?;
        if let Some(seed) = run.seed {
            report.labels.insert("seed".into(), seed.to_string());
        }
        output::write_suite(&run.out, &report)?;
        say.push_str(&output::describe_report(&report));
        if !report.pass {
            code = 1;
        }
    }
    Ok(code)
}

fn cmd_report(dir: &Path, say: &mut String, warn: &mut String) -> Result<i32, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Config(format!("run directory {} does not exist", dir.display())));
    }
    let rows = output::collect(dir)?;
    if rows.is_empty() {
        warn.push_str(&format!("warning: no suite reports in {}\n", dir.display()));
    }
    write_atomic(&dir.join("report.summary.json"), output::summary_json(&rows).as_bytes())?;
    say.push_str(&output::summary_table(&rows));
    Ok(if rows.iter().all(output::Row::ok) { 0 } else { 1 })
}

/// Output of one invocation, for callers that capture instead of printing.
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn execute(cli: &Cli) -> Outcome {
    let mut say = String::new();
    let mut warn = String::new();
    let res = match &cli.command {
        Command::Report { run_dir } => match run_dir.clone().or_else(|| cli.out.clone()) {
            Some(d) => cmd_report(&d, &mut say, &mut warn),
            None => load(cli).and_then(|(_, run)| cmd_report(&run.out, &mut say, &mut warn)),
        },
        cmd => load(cli).and_then(|(cfg, run)| match cmd {
            Command::Space => cmd_space(&cfg, &run, &mut say),
            Command::Op => cmd_op(&cfg, &run, &mut say),
            Command::Suite { name } => cmd_suite(&cfg, &run, name, &mut say),
            Command::Report { .. } => unreachable!(),
        }),
    };
    let code = match res {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(warn, "error: {e}");
            e.exit_code()
        }
    };
    Outcome { code, stdout: say, stderr: warn }
}

/// Parses `args` (program name first) and runs; usage errors exit with 2.
pub fn run_args<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            Outcome { code, stdout: if code == 0 { e.to_string() } else { String::new() }, stderr: if code == 0 { String::new() } else { e.to_string() } }
        }
    }
}
