use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use latspec::antialias::{self, BuildOptions, CacheStatus, DEFAULT_CANDIDATE_BUDGET};
use latspec::diagnostics::{self, PowerIteration};
use latspec::experiments::{self, estimate_memory_bytes, ExperimentConfig, Problem, CACHE_DIR_ENV};
use latspec::lattice::{self, PRESETS};
use latspec::operators::make_potential;
use latspec::{cbc_construct, selftest, PotentialKind, Rank1Lattice, ReportFormat, Snapshot};

/// Dimension from which runs need `--large`.
const LARGE_DIM: usize = 6;

#[derive(Parser)]
#[command(name = "latspec", version, about = "Rank-1 lattice spectral solver for the semiclassical Schrödinger equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or inspect lattices.
    #[command(subcommand)]
    Lattice(LatticeCommand),
    /// Anti-aliasing set construction.
    #[command(subcommand)]
    Aaset(AasetCommand),
    /// Evolve the Gaussian initial state and write a snapshot.
    Solve(SolveArgs),
    /// Temporal convergence study against a fine-step reference.
    Converge(ConvergeArgs),
    /// Dense operator diagnostics at desk scale.
    #[command(subcommand)]
    Diagnose(DiagnoseCommand),
    /// Run the built-in property checks.
    Selftest {
        /// Only run checks whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
    },
}

#[derive(Subcommand)]
enum LatticeCommand {
    /// Construct a generating vector component by component.
    Gen {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        n: u64,
        /// Write the lattice JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Describe a lattice.
    Info {
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Also list the first K points.
        #[arg(long, default_value_t = 0)]
        points: u64,
    },
    /// List the named presets.
    Presets,
}

#[derive(Subcommand)]
enum AasetCommand {
    /// Build (or load) the anti-aliasing set and store it in the cache.
    Build {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        /// Maximum number of enumerated candidate frequencies.
        #[arg(long, default_value_t = DEFAULT_CANDIDATE_BUDGET)]
        budget: u64,
        #[arg(long)]
        large: bool,
    },
}

#[derive(Args, Clone, Default)]
struct LatticeArgs {
    /// Named lattice (see `lattice presets`).
    #[arg(long)]
    preset: Option<String>,
    /// Lattice JSON file with fields d, n, z.
    #[arg(long, conflicts_with = "preset")]
    lattice_file: Option<PathBuf>,
    #[arg(long, conflicts_with_all = ["preset", "lattice_file"], requires = "z")]
    n: Option<u64>,
    /// Comma-separated generating vector.
    #[arg(long, value_delimiter = ',', requires = "n")]
    z: Option<Vec<u64>>,
}

impl LatticeArgs {
    fn is_set(&self) -> bool {
        self.preset.is_some() || self.lattice_file.is_some() || self.n.is_some()
    }

    fn resolve(&self) -> Result<Rank1Lattice> {
        if let Some(name) = &self.preset {
            return Ok(Rank1Lattice::preset(name)?);
        }
        if let Some(path) = &self.lattice_file {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return Ok(Rank1Lattice::from_json(&text)?);
        }
        match (self.n, &self.z) {
            (Some(n), Some(z)) => Ok(Rank1Lattice::new(z.clone(), n)?),
            _ => bail!("specify a lattice with --preset, --lattice-file or --n/--z"),
        }
    }

    /// Writes the lattice selection into a config, replacing what it had.
    fn apply(&self, config: &mut ExperimentConfig) -> Result<()> {
        if !self.is_set() {
            return Ok(());
        }
        config.preset = self.preset.clone();
        config.n = None;
        config.z = None;
        if self.preset.is_none() {
            let l = self.resolve()?;
            config.n = Some(l.n());
            config.z = Some(l.generator().to_vec());
        }
        Ok(())
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    lattice: LatticeArgs,
    #[arg(long, default_value = "v2")]
    potential: PotentialKind,
    #[arg(long, default_value = "s9odr6a")]
    scheme: String,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Time advanced by this run.
    #[arg(long, default_value_t = 1.0)]
    final_time: f64,
    #[arg(long)]
    steps: u64,
    /// Continue from this snapshot instead of the Gaussian.
    #[arg(long)]
    initial: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    large: bool,
}

#[derive(Args)]
struct ConvergeArgs {
    /// JSON config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    lattice: LatticeArgs,
    #[arg(long)]
    potential: Option<PotentialKind>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    final_time: Option<f64>,
    #[arg(long)]
    reference_steps: Option<u64>,
    /// Comma-separated step counts.
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<u64>>,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    /// Report path; stdout when neither this nor the config names one.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    large: bool,
}

#[derive(Subcommand)]
enum DiagnoseCommand {
    /// Scaled commutator norms over a sweep of lattice sizes.
    Commutator {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, value_delimiter = ',', default_value = "64,256,1024")]
        n_values: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        p: u32,
        #[arg(long, default_value = "v1")]
        potential: PotentialKind,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        /// Use a deliberately non-minimal anti-aliasing set.
        #[arg(long)]
        contrast: bool,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
        /// Write the JSON report here as well as printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the dense potential operator with its circulant form.
    Circulant {
        #[command(flatten)]
        lattice: LatticeArgs,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Lattice(cmd) => lattice_cmd(cmd)?,
        Command::Aaset(AasetCommand::Build {
            lattice,
            cache_dir,
            budget,
            large,
        }) => aaset_build(&lattice, cache_dir, budget, large)?,
        Command::Solve(args) => solve(args)?,
        Command::Converge(args) => converge(args)?,
        Command::Diagnose(cmd) => diagnose(cmd)?,
        Command::Selftest { filter } => return Ok(run_selftest(filter.as_deref())),
    }
    Ok(ExitCode::SUCCESS)
}

/// Flag, then environment, then config file.
fn cache_dir(flag: Option<PathBuf>, config: Option<&Path>) -> Option<PathBuf> {
    flag.or_else(|| std::env::var_os(CACHE_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| config.map(Path::to_path_buf))
}

fn large_gate(lattice: &Rank1Lattice, large: bool) -> Result<()> {
    if lattice.dim() < LARGE_DIM {
        return Ok(());
    }
    let bytes = estimate_memory_bytes(lattice.dim(), lattice.n());
    eprintln!(
        "d = {}, n = {}: estimated peak memory {:.2} GiB",
        lattice.dim(),
        lattice.n(),
        bytes as f64 / (1u64 << 30) as f64
    );
    if !large {
        bail!("runs with d >= {LARGE_DIM} need --large");
    }
    Ok(())
}

fn describe_cache(status: &CacheStatus) {
    match status {
        CacheStatus::Disabled => {}
        CacheStatus::Hit(p) => eprintln!("anti-aliasing set loaded from {}", p.display()),
        CacheStatus::Built(p) => eprintln!("anti-aliasing set cached at {}", p.display()),
        CacheStatus::Rebuilt { path, reason } => {
            eprintln!("warning: rebuilt {} ({reason})", path.display())
        }
    }
}

fn lattice_cmd(cmd: LatticeCommand) -> Result<()> {
    match cmd {
        LatticeCommand::Gen { dim, n, out } => {
            let start = Instant::now();
            let l = cbc_construct(dim, n)?;
            eprintln!("constructed in {:.2}s", start.elapsed().as_secs_f64());
            let json = l.to_json();
            match out {
                Some(path) => fs::write(&path, json + "\n")?,
                None => println!("{json}"),
            }
        }
        LatticeCommand::Info { lattice, points } => {
            let l = lattice.resolve()?;
            println!("d            {}", l.dim());
            println!("n            {}", l.n());
            println!("z            {:?}", l.generator());
            println!("fingerprint  {:016x}", l.fingerprint());
            println!("korobov e^2  {:.6e}", lattice::korobov_worst_case_error2(&l));
            for k in 0..points.min(l.n()) {
                let p = l.point(k)?;
                println!("p_{k:<10} {:?}", p.coords());
            }
        }
        LatticeCommand::Presets => {
            for (name, n, z) in PRESETS {
                println!("{name:<10} d={} n={n} z={z:?}", z.len());
            }
        }
    }
    Ok(())
}

fn aaset_build(lattice: &LatticeArgs, flag: Option<PathBuf>, budget: u64, large: bool) -> Result<()> {
    let l = lattice.resolve()?;
    large_gate(&l, large)?;
    let dir = cache_dir(flag, None).context("aaset build needs --cache-dir or LATSPEC_CACHE_DIR")?;
    let start = Instant::now();
    let (aa, status) = antialias::load_or_build(&l, Some(&dir), BuildOptions { candidate_budget: budget })?;
    describe_cache(&status);
    println!("records      {}", aa.len());
    println!("max |h|^2    {}", aa.max_norm2());
    println!("sha256       {}", aa.content_hash());
    println!("seconds      {:.3}", start.elapsed().as_secs_f64());
    println!("path         {}", antialias::cache_path(&dir, &l).display());
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let mut config = ExperimentConfig {
        potential: args.potential,
        scheme: args.scheme,
        epsilon: args.epsilon,
        final_time: args.final_time,
        sweep_steps: Vec::new(),
        ..ExperimentConfig::default()
    };
    args.lattice.apply(&mut config)?;
    if args.steps == 0 {
        bail!("--steps must be positive");
    }
    large_gate(&config.lattice()?, args.large)?;
    let dir = cache_dir(args.cache_dir, None);
    let mut problem = Problem::from_config(&config, dir.as_deref())?;
    describe_cache(&problem.cache_status);
    if let Some(path) = &args.initial {
        let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        problem.initial = Snapshot::read_from(BufReader::new(file))?.into_state(Arc::clone(&problem.aa))?;
    }
    let start = Instant::now();
    let state = problem.solve(args.steps, args.final_time)?;
    Snapshot::from(&state).write_to(BufWriter::new(fs::File::create(&args.out)?))?;
    println!("time         {}", state.time);
    println!("l2 norm      {:.16}", state.l2_norm());
    println!("seconds      {:.3}", start.elapsed().as_secs_f64());
    println!("snapshot     {}", args.out.display());
    Ok(())
}

fn converge(args: ConvergeArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    args.lattice.apply(&mut config)?;
    if let Some(v) = args.potential {
        config.potential = v;
    }
    if let Some(v) = args.scheme {
        config.scheme = v;
    }
    if let Some(v) = args.epsilon {
        config.epsilon = v;
    }
    if let Some(v) = args.final_time {
        config.final_time = v;
    }
    if let Some(v) = args.reference_steps {
        config.reference_steps = v;
    }
    if let Some(v) = args.sweep {
        config.sweep_steps = v;
    }
    if let Some(v) = args.output {
        config.output = Some(v);
    }
    if let Some(v) = args.cache_dir.clone() {
        config.cache_dir = Some(v);
    }
    config.validate()?;
    large_gate(&config.lattice()?, args.large)?;

    let dir = cache_dir(args.cache_dir, config.cache_dir.as_deref());
    let start = Instant::now();
    let report = experiments::run_convergence_in(&config, dir.as_deref())?;
    eprintln!("finished in {:.1}s", start.elapsed().as_secs_f64());
    match report.order {
        Some(p) => eprintln!("fitted order {p:.3} on {} rows", report.fitted_rows()),
        None => eprintln!("order not fitted ({} usable rows)", report.fitted_rows()),
    }
    match &config.output {
        Some(path) => experiments::emit(&report, args.format, path)?,
        None => io::stdout().write_all(experiments::render(&report, args.format).as_bytes())?,
    }
    Ok(())
}

fn diagnose(cmd: DiagnoseCommand) -> Result<()> {
    match cmd {
        DiagnoseCommand::Commutator {
            dim,
            n_values,
            p,
            potential,
            epsilon,
            contrast,
            max_iter,
            out,
        } => {
            let cases = n_values
                .iter()
                .map(|&n| {
                    let l = cbc_construct(dim, n)?;
                    let aa = antialias::build(&l)?;
                    let aa = if contrast { diagnostics::shifted_antialiasing_set(&aa)? } else { aa };
                    Ok((aa, make_potential(potential, &l)?))
                })
                .collect::<latspec::Result<Vec<_>>>()?;
            let opts = PowerIteration {
                max_iter,
                ..PowerIteration::default()
            };
            let report = diagnostics::commutator_sweep(&cases, p, epsilon, opts)?;
            let json = report.to_json();
            println!("{json}");
            eprintln!("growth factor {:.3}", report.growth());
            if let Some(path) = out {
                fs::write(path, json + "\n")?;
            }
        }
        DiagnoseCommand::Circulant { lattice } => {
            let l = lattice.resolve()?;
            let aa = antialias::build(&l)?;
            let pf = make_potential(PotentialKind::SmoothV1, &l)?;
            let dev = diagnostics::circulant_check(&aa, &pf)?;
            println!("max deviation {dev:.3e}");
        }
    }
    Ok(())
}

fn run_selftest(filter: Option<&str>) -> ExitCode {
    let outcomes = selftest::run(filter);
    let mut failed = 0;
    for o in &outcomes {
        let tag = if o.passed { "ok  " } else { "FAIL" };
        println!("{tag} {:<24} {:>7.2}s  {}", o.name, o.seconds, o.detail);
        failed += usize::from(!o.passed);
    }
    println!("{} checks, {failed} failed", outcomes.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
