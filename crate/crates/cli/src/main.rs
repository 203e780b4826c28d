//! `ise`: run case configurations, audit system dimensions, check dumped
//! systems against the vertex hull, and compute Monte Carlo envelopes.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ise_core::analysis::contains_range_with_slack;
use ise_core::case::{
    audit_dimensions, case_envelope, prepare_case, render_audit, run_case, write_envelope_report, write_reports,
    CaseConfig,
};
use ise_core::ise::{parse_system, ModelVariant};
use ise_core::solvers::{hull_oracle, SolveOptions, SolverRegistry};
use ise_core::IntervalVector;

#[derive(Parser, Debug)]
#[command(name = "ise", version, about = "Interval state estimation for three-phase feeders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a case: truth, measurements, assembly, solvers and reports.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Also write the assembled system as a triplet dump.
        #[arg(long)]
        dump_system: bool,
    },
    /// Report n, m and m+n next to the reference dimensions.
    Audit {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Vertex hull of a dumped system, optionally checked against a solver.
    Oracle {
        system: PathBuf,
        /// Solver whose enclosure must contain the hull.
        #[arg(long)]
        solver: Option<String>,
        /// Write the hull as CSV (index, lo, hi) into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo envelope only.
    Mc {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Replaces the configured solver list; repeat for several.
    #[arg(long = "solver")]
    solvers: Vec<String>,
    /// Model variant I, II, III or IV.
    #[arg(long)]
    model: Option<ModelVariant>,
    #[arg(long)]
    line_uncertainty: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, cfg: &mut CaseConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if !self.solvers.is_empty() {
            cfg.solvers = self.solvers.clone();
        }
        if let Some(t) = self.trials {
            cfg.mc_trials = t;
            // An explicit count replaces any `mc:N` entry.
            for s in cfg.solvers.iter_mut() {
                if s.to_ascii_lowercase().starts_with("mc:") {
                    *s = "mc".into();
                }
            }
        }
        if let Some(m) = self.model {
            cfg.model = Some(m);
        }
        if let Some(f) = self.line_uncertainty {
            cfg.line_uncertainty = f;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        cfg.validate()?;
        Ok(())
    }
}

fn load(path: &Path, overrides: &Overrides) -> Result<CaseConfig> {
    let mut cfg = CaseConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    overrides.apply(&mut cfg)?;
    Ok(cfg)
}

fn out_dir(cfg: &CaseConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("out").join(&cfg.id))
}

fn run(config: &Path, overrides: &Overrides, dump_system: bool) -> Result<ExitCode> {
    let mut cfg = load(config, overrides)?;
    cfg.dump_system |= dump_system;
    let outcome = run_case(&cfg)?;
    let p = &outcome.prepared;
    println!(
        "model {:?}: n = {}, m1 = {}, m2 = {}, dimension {}{}",
        p.system.variant,
        p.system.n,
        p.system.m1,
        p.system.m2,
        p.system.dim(),
        if p.jacobian.h.is_thin() { "" } else { ", interval H" }
    );
    print!("{}", outcome.comparison.render());
    let dir = out_dir(&cfg);
    for path in write_reports(&outcome, &dir)? {
        println!("wrote {}", path.display());
    }
    if outcome.failures.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    for (method, err) in &outcome.failures {
        eprintln!("error: {method}: {err}");
    }
    Ok(ExitCode::FAILURE)
}

fn audit(config: &Path, overrides: &Overrides) -> Result<ExitCode> {
    let cfg = load(config, overrides)?;
    print!("{}", render_audit(&audit_dimensions(&cfg)?));
    Ok(ExitCode::SUCCESS)
}

fn oracle(system: &Path, solver: Option<&str>, out: Option<&Path>) -> Result<ExitCode> {
    let text = std::fs::read_to_string(system).with_context(|| format!("reading {}", system.display()))?;
    let (a, b) = parse_system(&text).with_context(|| format!("parsing {}", system.display()))?;
    let hull = hull_oracle(&a, &b)?;
    for (i, x) in hull.iter().enumerate() {
        println!("{i} {:?} {:?}", x.lo(), x.hi());
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("hull.csv");
        let mut s = String::from("index,lo,hi\n");
        for (i, x) in hull.iter().enumerate() {
            s += &format!("{i},{:?},{:?}\n", x.lo(), x.hi());
        }
        std::fs::write(&path, s)?;
        println!("wrote {}", path.display());
    }
    let Some(name) = solver else {
        return Ok(ExitCode::SUCCESS);
    };
    let registry = SolverRegistry::with_defaults();
    let report = registry.get(name)?.solve(&a, &b, &SolveOptions::default())?;
    let ok = contained(&report.solution, &hull);
    println!(
        "{}: {} after {} iterations",
        report.method,
        if ok { "contains the hull" } else { "does NOT contain the hull" },
        report.iterations
    );
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn contained(x: &IntervalVector, hull: &IntervalVector) -> bool {
    let lo: Vec<f64> = hull.iter().map(|v| v.lo()).collect();
    let hi: Vec<f64> = hull.iter().map(|v| v.hi()).collect();
    contains_range_with_slack(x, &lo, &hi, ise_core::analysis::CONTAINMENT_SLACK)
        .iter()
        .all(|&b| b)
}

fn mc(config: &Path, overrides: &Overrides) -> Result<ExitCode> {
    let cfg = load(config, overrides)?;
    let trials = overrides.trials.unwrap_or_else(|| cfg.effective_mc_trials());
    if trials == 0 {
        bail!("the envelope needs at least one trial (set mc_trials or --trials)");
    }
    let p = prepare_case(&cfg)?;
    let env = case_envelope(&p, trials, cfg.seed)?;
    println!(
        "{} trials ({} failed), seed {}, {:.3} s",
        env.trials,
        env.failed,
        env.seed,
        env.total_time().as_secs_f64()
    );
    for path in write_envelope_report(&p, &env, &out_dir(&cfg))? {
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            config,
            overrides,
            dump_system,
        } => run(config, overrides, *dump_system),
        Command::Audit { config, overrides } => audit(config, overrides),
        Command::Oracle { system, solver, out } => oracle(system, solver.as_deref(), out.as_deref()),
        Command::Mc { config, overrides } => mc(config, overrides),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
