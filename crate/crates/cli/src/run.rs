//! Experiment drivers behind the subcommands.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use biot_core::analysis::{infsup_estimate, kernel_probe_for, write_error_csv};
use biot_core::assembly::assemble_system;
use biot_core::experiments::{run_sweep_point, write_iterations_csv, SweepKind, SweepPoint, SweepRow};
use biot_core::mandel::{derive_mandel, run_mandel, write_mandel_csv, MandelConfig, MandelInputs};
use biot_core::manufactured::{run_manufactured, ManufacturedProblem};
use biot_core::mesh::Mesh;
use biot_core::params::{beta_value, BetaStrategy, SplitConfig};
use biot_core::solver::Scheme;
use biot_core::spaces::Discretization;

use crate::config::{ConvergeOptions, InfSupOptions, MandelOptions, SweepOptions};

pub const JOBS_VAR: &str = "BIOT_JOBS";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Solver(biot_core::Error),
    Io(PathBuf, io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Solver(_) | CliError::Io(..) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Solver(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl From<biot_core::Error> for CliError {
    fn from(e: biot_core::Error) -> CliError {
        use biot_core::Error as E;
        match e {
            E::InvalidArgument(m) | E::Unsupported(m) | E::Config(m) => CliError::Usage(m),
            other => CliError::Solver(other),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Usage(msg.into()))
}

fn strategy(name: &str) -> Result<BetaStrategy> {
    Ok(BetaStrategy::parse(name)?)
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<()> {
    let io_err = |e| CliError::Io(path.to_path_buf(), e);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    body(&mut w).and_then(|_| w.flush()).map_err(io_err)
}

/// Parallel job cap: `BIOT_JOBS` if set, otherwise the available cores.
pub fn job_limit() -> Result<usize> {
    match std::env::var(JOBS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => usage(format!("{JOBS_VAR} must be a positive integer, got '{v}'")),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs `f` over `items` on at most `jobs` threads, keeping input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.min(items.len()).max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                out.lock().unwrap()[i] = Some(r);
            });
        }
    });
    out.into_inner().unwrap().into_iter().map(|r| r.unwrap()).collect()
}

pub fn converge(opts: ConvergeOptions, out_dir: &Path, jobs: usize) -> Result<PathBuf> {
    let k = opts.k.unwrap_or(1);
    let levels = opts.levels.unwrap_or(4);
    let n0 = opts.n0.unwrap_or(4);
    let dt = opts.dt.unwrap_or(0.25);
    let steps = opts.steps.unwrap_or(4);
    if levels < 2 || n0 == 0 || steps == 0 {
        return usage("converge needs at least two levels, n0 >= 1 and steps >= 1");
    }
    let problem = ManufacturedProblem::from_gammas(opts.gamma1.unwrap_or(1.0), opts.gamma2.unwrap_or(1.0));
    problem.params.validate()?;
    let scheme = match &opts.beta {
        None => Scheme::Monolithic,
        Some(name) => Scheme::Split(SplitConfig {
            beta: beta_value(strategy(name)?, &problem.params),
            tol: opts.tol.unwrap_or(SplitConfig::default().tol),
            ..SplitConfig::default()
        }),
    };
    if let Scheme::Split(c) = scheme {
        c.validate()?;
    }
    let ns: Vec<usize> = (0..levels).map(|l| n0 << l).collect();
    let runs = parallel_map(&ns, jobs, |&n| run_manufactured(&problem, n, k, dt, steps, scheme));
    let mut reports = Vec::new();
    for (run, n) in runs.into_iter().zip(&ns) {
        let run = run?;
        if opts.dump_matrix.unwrap_or(false) {
            let sys = assemble_system(&run.disc, &problem.params, dt, &problem.essential())?;
            let m = sys.monolithic_matrix();
            write_file(&out_dir.join(format!("matrix_n{n}_k{k}.mtx")), |w| m.write_matrix_market(w))?;
        }
        reports.push(run.report);
    }
    let path = out_dir.join("errors.csv");
    write_file(&path, |w| write_error_csv(w, &reports))?;
    Ok(path)
}

pub fn sweep(kind: SweepKind, opts: SweepOptions, out_dir: &Path, jobs: usize) -> Result<(PathBuf, Vec<SweepRow>)> {
    let k = opts.k.unwrap_or(1);
    let values = opts.values.clone().unwrap_or_else(|| kind.default_values());
    let strategies = match &opts.strategies {
        Some(names) => names.iter().map(|s| strategy(s)).collect::<Result<Vec<_>>>()?,
        None => kind.default_strategies(),
    };
    if values.is_empty() || strategies.is_empty() {
        return usage("sweep needs at least one value and one strategy");
    }
    if values.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return usage("sweep values must be positive and finite");
    }
    let mut points = Vec::new();
    for &g in &values {
        for &s in &strategies {
            let mut p = SweepPoint::new(kind, g, k, s);
            p.n = opts.n.unwrap_or(p.n);
            p.dt = opts.dt.unwrap_or(p.dt);
            p.n_steps = opts.steps.unwrap_or(p.n_steps);
            p.tol = opts.tol.unwrap_or(p.tol);
            p.max_iter = opts.max_iter.unwrap_or(p.max_iter);
            if p.n == 0 || p.n_steps == 0 || !(p.dt > 0.0) {
                return usage("sweep needs n >= 1, steps >= 1 and dt > 0");
            }
            SplitConfig { tol: p.tol, max_iter: p.max_iter, ..SplitConfig::default() }.validate()?;
            points.push(p);
        }
    }
    let rows = parallel_map(&points, jobs, run_sweep_point).into_iter().collect::<biot_core::Result<Vec<_>>>()?;
    let path = out_dir.join("iterations.csv");
    write_file(&path, |w| write_iterations_csv(w, &rows))?;
    Ok((path, rows))
}

/// Returns the CSV path and, for split runs, the average iteration count.
pub fn mandel(opts: MandelOptions, out_dir: &Path) -> Result<(PathBuf, Option<f64>)> {
    let gamma3 = opts.gamma3.unwrap_or(1.0);
    let defaults = MandelConfig::default();
    let dt = opts.dt.unwrap_or(defaults.dt);
    let t_end = opts.t_end.unwrap_or(defaults.dt * defaults.n_steps as f64);
    if !(dt > 0.0 && t_end >= dt) {
        return usage("mandel needs dt > 0 and t-end >= dt");
    }
    let scheme = match &opts.beta {
        None => Scheme::Monolithic,
        Some(name) => {
            let params = derive_mandel(MandelInputs::default().scaled(gamma3))?;
            let cfg = SplitConfig {
                beta: beta_value(strategy(name)?, &params.physical()),
                tol: opts.tol.unwrap_or(SplitConfig::default().tol),
                max_iter: opts.max_iter.unwrap_or(SplitConfig::default().max_iter),
                ..SplitConfig::default()
            };
            cfg.validate()?;
            Scheme::Split(cfg)
        }
    };
    let config = MandelConfig {
        gamma3,
        k: opts.k.unwrap_or(defaults.k),
        nx: opts.nx.unwrap_or(defaults.nx),
        ny: opts.ny.unwrap_or(defaults.ny),
        dt,
        n_steps: (t_end / dt).round() as usize,
        scheme,
        sample_times: opts.times.unwrap_or(defaults.sample_times),
        sample_x: opts.x.unwrap_or(defaults.sample_x),
    };
    if config.sample_x.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return usage("sample abscissae must lie in [0, 1]");
    }
    let run = run_mandel(&config)?;
    let path = out_dir.join("mandel.csv");
    write_file(&path, |w| write_mandel_csv(w, &run.problem.params, &run.samples))?;
    Ok((path, (!run.stats.counts.is_empty()).then(|| run.stats.average())))
}

pub fn infsup(opts: InfSupOptions, out_dir: &Path, jobs: usize) -> Result<PathBuf> {
    let k = opts.k.unwrap_or(1);
    let levels = opts.levels.unwrap_or_else(|| vec![2, 4, 8]);
    if levels.is_empty() || levels.contains(&0) {
        return usage("infsup needs a nonempty list of positive mesh sizes");
    }
    let rows = parallel_map(&levels, jobs, |&n| -> Result<String> {
        let disc = Discretization::new(Mesh::build_structured(n, n, 1.0, 1.0)?, k)?;
        let inf = infsup_estimate(&disc)?;
        let ker = kernel_probe_for(&disc)?;
        Ok(format!(
            "{n},{},{k},{},{},{},{},{},{},{},{},{}",
            1.0 / n as f64,
            inf.beta,
            inf.beta_flow,
            inf.beta_pressure,
            inf.beta_elastic,
            ker.dim_h,
            ker.dim_h_expected,
            ker.dim_k,
            ker.dim_k_expected,
            ker.matches_characterization(1e-10)
        ))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let path = out_dir.join("infsup.csv");
    write_file(&path, |w| {
        writeln!(w, "n,h,k,beta,beta_flow,beta_pressure,beta_elastic,dim_h,dim_h_expected,dim_k,dim_k_expected,kernel_ok")?;
        rows.iter().try_for_each(|r| writeln!(w, "{r}"))
    })?;
    Ok(path)
}
