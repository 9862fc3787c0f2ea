use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use invsde::definition::{InitialStates, SystemDefinition};
use invsde::expr::Expr;
use invsde::fmt_sig;
use invsde::harness::{
    self, catalog, convergence_study, export_report, CatalogEntry, ReportFormat, RunConfig,
};
use invsde::simulate::{simulate_trajectory, Integrator, SimConfig};
use invsde::synthesis::render::render;
use invsde::synthesis::{invariance_residuals, sample_points, Interpretation, SdeSystem};

/// Largest invariance residual `verify` accepts.
const VERIFY_TOL: f64 = 1e-8;
const DEFAULT_SEED: u64 = 2024;

#[derive(Parser)]
#[command(name = "invsde", version, about = "Synthesize, simulate and check SDEs with a first integral")]
struct Cli {
    /// Worker threads for Monte-Carlo runs (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the synthesized drift and diffusion in both interpretations.
    Synth {
        /// System definition (JSON).
        file: PathBuf,
        /// Write a hand-entered definition of the synthesized system here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Interpretation of the definition written by `--out`.
        #[arg(long, value_enum, default_value_t = InterpArg::Stratonovich)]
        interpretation: InterpArg,
    },
    /// Simulate trajectories and write one CSV per trajectory.
    Simulate {
        /// Definition file or catalog name.
        system: String,
        #[arg(long)]
        integrator: Option<Integrator>,
        #[arg(long, default_value_t = 0.01)]
        h: f64,
        #[command(flatten)]
        seed: SeedArg,
        /// Number of trajectories.
        #[arg(long, default_value_t = 1)]
        traj: u64,
        #[command(flatten)]
        start: StartArgs,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check the invariance conditions at random points.
    Verify {
        /// Definition file or catalog name.
        system: String,
        #[arg(long, default_value_t = 1000)]
        points: usize,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Monte-Carlo convergence study of the invariant drift.
    Converge {
        /// Definition file or catalog name.
        system: String,
        #[arg(long)]
        integrator: Option<Integrator>,
        /// Comma-separated, strictly decreasing step sizes.
        #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3")]
        h_ladder: Vec<f64>,
        /// Trajectories per rung.
        #[arg(long = "R", default_value_t = 1000)]
        r: usize,
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        start: StartArgs,
        /// Write the full-precision report here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
    },
    /// Browse the built-in systems.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    List,
    Show { name: String },
}

#[derive(Args)]
struct SeedArg {
    /// Master seed.
    #[arg(long, env = "INVSDE_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct StartArgs {
    /// Which listed initial state to start from (0-based).
    #[arg(long, default_value_t = 0)]
    x0_index: usize,
    /// Explicit initial state, comma-separated; overrides `--x0-index`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum InterpArg {
    Ito,
    Stratonovich,
}

impl From<InterpArg> for Interpretation {
    fn from(a: InterpArg) -> Self {
        match a {
            InterpArg::Ito => Interpretation::Ito,
            InterpArg::Stratonovich => Interpretation::Stratonovich,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

enum Failure {
    /// Exit 2: bad input, configuration or usage.
    Usage(String),
    /// Exit 1: the check or run itself failed.
    Check(String),
}

type CliResult = Result<(), Failure>;

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

/// A system plus the run defaults that come with it.
struct Loaded {
    name: String,
    system: SdeSystem,
    initial_states: Vec<Vec<f64>>,
    t0: f64,
    t_end: Option<f64>,
    integrators: Vec<Integrator>,
    entry: Option<CatalogEntry>,
}

impl Loaded {
    fn default_integrator(&self) -> Integrator {
        self.integrators[0]
    }

    fn start(&self, args: &StartArgs) -> Result<Vec<f64>, Failure> {
        if let Some(x) = &args.x0 {
            return Ok(x.clone());
        }
        match self.initial_states.get(args.x0_index) {
            Some(x) => Ok(x.clone()),
            None if self.initial_states.is_empty() => {
                Err(usage(format!("{} lists no initial state; pass --x0", self.name)))
            }
            None => Err(usage(format!(
                "--x0-index {} out of range: {} lists {} initial states",
                args.x0_index,
                self.name,
                self.initial_states.len()
            ))),
        }
    }

    fn run_config(&self, integrator: Integrator, x0: Vec<f64>) -> Result<RunConfig, Failure> {
        let t_end = self
            .t_end
            .ok_or_else(|| usage(format!("{} does not give a final time `T`", self.name)))?;
        Ok(RunConfig {
            system: Some(self.name.clone()),
            integrator,
            x0,
            t0: self.t0,
            t_end,
        })
    }
}

fn load_definition(path: &Path) -> Result<SystemDefinition, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    SystemDefinition::from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// A path to a definition file, or else a catalog name.
fn load(spec: &str) -> Result<Loaded, Failure> {
    let path = Path::new(spec);
    if path.is_file() {
        let def = load_definition(path)?;
        let system = def.build().map_err(|e| usage(format!("{spec}: {e}")))?;
        let integrators = if system.s() == 1 {
            vec![Integrator::Milstein, Integrator::Artemiev, Integrator::Euler]
        } else {
            vec![Integrator::Euler]
        };
        return Ok(Loaded {
            name: path.file_stem().map_or(spec.into(), |s| s.to_string_lossy().into_owned()),
            initial_states: def.initial_states(),
            t0: def.t0.unwrap_or(0.0),
            t_end: def.t_end,
            system,
            integrators,
            entry: None,
        });
    }
    if spec.ends_with(".json") {
        return Err(usage(format!("{spec}: no such file")));
    }
    let entry = catalog::find(spec).map_err(usage)?;
    Ok(Loaded {
        name: entry.name.to_string(),
        system: entry.system.clone(),
        initial_states: entry.initial_states.clone(),
        t0: entry.t0,
        t_end: Some(entry.t_end),
        integrators: entry.integrators.clone(),
        entry: Some(entry),
    })
}

fn print_vector(label: &str, v: &[Expr]) {
    println!("{label}:");
    for (i, e) in v.iter().enumerate() {
        println!("  [{}] {e}", i + 1);
    }
}

fn cmd_synth(file: &Path, out: Option<&Path>, interp: Interpretation) -> CliResult {
    let def = load_definition(file)?;
    if !def.is_synthesized() {
        return Err(usage("`synth` needs a synthesized definition (`M` + `u`)"));
    }
    let synth = def.synthesizer().map_err(usage)?;
    let r = render(&synth).map_err(usage)?;
    println!("M = {}", synth.spec.first_integral());
    println!("n = {}, s = {}, basis = {:?}", synth.n(), synth.s(), synth.spec.kind());
    print_vector("Stratonovich drift a", &r.stratonovich_drift);
    print_vector("Ito drift f = a + Sigma", &r.ito_drift);
    print_vector("Sigma", &r.correction);
    for (l, col) in r.diffusion.iter().enumerate() {
        print_vector(&format!("sigma column {}", l + 1), col);
    }
    if let Some(out) = out {
        let drift = match interp {
            Interpretation::Ito => r.ito_drift.clone(),
            Interpretation::Stratonovich => r.stratonovich_drift.clone(),
        };
        let hand = SystemDefinition {
            n: synth.n(),
            s: Some(synth.s()),
            m: Some(synth.spec.first_integral().clone()),
            interpretation: Some(interp),
            drift: Some(drift),
            diffusion: Some(r.diffusion),
            x0: def.x0.clone(),
            t0: def.t0,
            t_end: def.t_end,
            ..Default::default()
        };
        fs::write(out, hand.to_json() + "\n")
            .map_err(|e| Failure::Check(format!("{}: {e}", out.display())))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    system: &str,
    integrator: Option<Integrator>,
    h: f64,
    seed: u64,
    traj: u64,
    start: &StartArgs,
    out: &Path,
) -> CliResult {
    if traj == 0 {
        return Err(usage("--traj must be at least 1"));
    }
    let loaded = load(system)?;
    let integrator = integrator.unwrap_or_else(|| loaded.default_integrator());
    let x0 = loaded.start(start)?;
    let run = loaded.run_config(integrator, x0)?;
    invsde::simulate::prepare(&loaded.system, integrator).map_err(usage)?;
    fs::create_dir_all(out).map_err(|e| usage(format!("{}: {e}", out.display())))?;
    let mut aborted = 0;
    for r in 0..traj {
        let cfg = SimConfig {
            t0: run.t0,
            t_end: run.t_end,
            h,
            x0: run.x0.clone(),
            integrator,
            seed,
            trajectory_index: r,
        };
        match simulate_trajectory(&loaded.system, &cfg) {
            Ok(tr) => {
                let file = out.join(format!("{}_{}_seed{seed}_traj{r}.csv", loaded.name, integrator));
                fs::write(&file, tr.to_csv()).map_err(|e| Failure::Check(format!("{}: {e}", file.display())))?;
                let drift = tr
                    .invariant
                    .as_ref()
                    .map(|m| format!(", |M(T) - M(t0)| = {}", fmt_sig((m[m.len() - 1] - m[0]).abs())))
                    .unwrap_or_default();
                println!("trajectory {r}: {}{drift}", file.display());
            }
            Err(e @ invsde::simulate::SimError::Aborted { .. }) => {
                aborted += 1;
                eprintln!("trajectory {r} aborted: {e}");
            }
            Err(e) => return Err(usage(e)),
        }
    }
    if aborted > 0 {
        return Err(Failure::Check(format!("{aborted} of {traj} trajectories aborted")));
    }
    Ok(())
}

fn cmd_verify(system: &str, points: usize, seed: u64) -> CliResult {
    if points == 0 {
        return Err(usage("--points must be at least 1"));
    }
    let loaded = load(system)?;
    let m = loaded
        .system
        .first_integral()
        .cloned()
        .ok_or_else(|| usage(format!("{}: no first integral `M` to verify against", loaded.name)))?;
    let (centers, radius) = if loaded.initial_states.is_empty() {
        (vec![vec![0.0; loaded.system.n()]], 1.0)
    } else {
        (loaded.initial_states.clone(), 0.5)
    };
    let t1 = loaded.t_end.unwrap_or(loaded.t0 + 1.0);
    let pts = sample_points(&centers, radius, (loaded.t0, t1), points, seed);
    let rep = invariance_residuals(&loaded.system, &m, &pts);
    println!("points:                 {points}");
    println!("max diffusion residual: {}", fmt_sig(rep.max_diffusion));
    println!("max drift residual:     {}", fmt_sig(rep.max_drift));
    println!("evaluation failures:    {}", rep.failures);
    if let Some(p) = rep.points.iter().find(|p| p.error.is_some()) {
        println!("first failure at t = {}, x = {:?}: {}", fmt_sig(p.t), p.x, p.error.as_deref().unwrap_or(""));
    }
    if rep.passes(VERIFY_TOL) {
        println!("invariant (tolerance {})", fmt_sig(VERIFY_TOL));
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "not invariant: max residual {} exceeds {}",
            fmt_sig(rep.max()),
            fmt_sig(VERIFY_TOL)
        )))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_converge(
    system: &str,
    integrator: Option<Integrator>,
    ladder: &[f64],
    r: usize,
    seed: u64,
    start: &StartArgs,
    out: Option<&Path>,
    format: FormatArg,
) -> CliResult {
    let loaded = load(system)?;
    let integrator = integrator.unwrap_or_else(|| loaded.default_integrator());
    let x0 = loaded.start(start)?;
    let run = loaded.run_config(integrator, x0)?;
    let table = convergence_study(&loaded.system, &run, ladder, r, seed).map_err(|e| match e {
        harness::HarnessError::TooManyAborts { .. } | harness::HarnessError::Sim(invsde::simulate::SimError::Aborted { .. }) => {
            Failure::Check(e.to_string())
        }
        _ => usage(e),
    })?;
    println!(
        "{} / {integrator}, x0 = {:?}, T = {}, seed = {seed}",
        loaded.name,
        run.x0,
        fmt_sig(run.t_end)
    );
    println!("{:>10} {:>6} {:>12} {:>12} {:>6} {:>8} {:>12}", "h", "R", "epsilon", "stderr", "aborts", "order", "reference");
    for (i, row) in table.rows.iter().enumerate() {
        let order = if i == 0 { String::new() } else { fmt_sig(table.orders[i - 1]) };
        let reference = loaded
            .entry
            .as_ref()
            .filter(|_| start.x0.is_none())
            .and_then(|e| e.reference(integrator, start.x0_index, row.h))
            .map(fmt_sig)
            .unwrap_or_default();
        println!(
            "{:>10} {:>6} {:>12} {:>12} {:>6} {:>8} {:>12}",
            fmt_sig(row.h),
            row.trajectories,
            fmt_sig(row.epsilon),
            fmt_sig(row.stderr),
            row.aborts,
            order,
            reference
        );
    }
    if let Some(out) = out {
        let fmt = match format {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        };
        fs::write(out, export_report(&table, fmt)).map_err(|e| Failure::Check(format!("{}: {e}", out.display())))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn entry_definition(e: &CatalogEntry) -> SystemDefinition {
    let synth = e.system.provenance().expect("catalog systems are synthesized");
    let mut def = SystemDefinition::from_synthesizer(synth, e.system.interpretation());
    def.x0 = Some(InitialStates::Many(e.initial_states.clone()));
    def.t0 = Some(e.t0);
    def.t_end = Some(e.t_end);
    def
}

fn cmd_catalog(action: &CatalogAction) -> CliResult {
    match action {
        CatalogAction::List => {
            for e in catalog::catalog() {
                println!("{:<20} {}", e.name, e.summary);
            }
        }
        CatalogAction::Show { name } => {
            let e = catalog::find(name).map_err(usage)?;
            println!("{} — {}", e.name, e.summary);
            println!("first integral: M = {}", e.first_integral);
            let names: Vec<_> = e.integrators.iter().map(|i| i.name()).collect();
            println!("integrators: {} (default {})", names.join(", "), e.default_integrator());
            for note in &e.notes {
                println!("{note}");
            }
            for r in &e.references {
                println!(
                    "reference: {} x0#{} h = {}: epsilon = {}",
                    r.integrator,
                    r.x0,
                    fmt_sig(r.h),
                    fmt_sig(r.epsilon)
                );
            }
            println!("definition:");
            println!("{}", entry_definition(&e).to_json());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(usage)?;
    }
    match &cli.command {
        Command::Synth { file, out, interpretation } => {
            cmd_synth(file, out.as_deref(), (*interpretation).into())
        }
        Command::Simulate { system, integrator, h, seed, traj, start, out } => {
            cmd_simulate(system, *integrator, *h, seed.seed, *traj, start, out)
        }
        Command::Verify { system, points, seed } => cmd_verify(system, *points, seed.seed),
        Command::Converge { system, integrator, h_ladder, r, seed, start, out, format } => cmd_converge(
            system,
            *integrator,
            h_ladder,
            *r,
            seed.seed,
            start,
            out.as_deref(),
            *format,
        ),
        Command::Catalog { action } => cmd_catalog(action),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
