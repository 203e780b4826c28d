//! Case documents and the end-to-end pipeline: truth, measurements,
//! assembly, enclosure, Monte Carlo and reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    bound_rows, compare_methods, contains_range_with_slack, mc_envelope, write_bounds_csv, write_envelope_csv,
    AccuracyReport, Comparison, McEnvelope, McSetup, MethodSummary, CONTAINMENT_SLACK,
};
use crate::estimator::{
    build_jacobian, bus_phases, states_from_truth, states_to_bus_voltage_intervals,
    IntervalVoltages, JacobianSystem,
};
use crate::interval::IntervalVector;
use crate::ise::{assemble, dump_system, extract_states, IseSystem, ModelVariant};
use crate::measurement::{
    build_weights, build_z1, build_z2, MeasurementModel, MeasurementSet, WeightMatrix,
};
use crate::network::{apply_line_uncertainty, balanced_reduction, load_feeder_file, Feeder, Phase};
use crate::solvers::{SolveOptions, SolverRegistry, SolverReport};
use crate::truth::{
    dg_midpoints, dg_output_at, slack_phasors, solve_power_flow, synthesize_measurements, DgMode,
    ErrorSpec, NoiseMode, Placements, SynthesisOptions, TrueState, TruthError,
};
use crate::Error;

/// Tolerance of the point estimator inside Monte Carlo trials.
pub const MC_WLS_TOL: f64 = 1e-8;

/// True output of one DG unit: a value in kW or one of `lo`, `mid`, `hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DgTruth {
    Kw(f64),
    Named(String),
}

fn one() -> f64 {
    1.0
}
fn default_solvers() -> Vec<String> {
    vec!["mko".into()]
}
fn default_eps() -> f64 {
    1e-4
}
fn default_zero_sigma() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub id: String,
    /// Feeder document, relative to the config file's directory.
    pub feeder: PathBuf,
    /// Slack voltage magnitude in p.u.
    #[serde(default = "one")]
    pub v_slack: f64,
    /// Collapse to a single-phase positive-sequence equivalent.
    #[serde(default)]
    pub balanced: bool,
    #[serde(default)]
    pub placements: Placements,
    #[serde(default)]
    pub error_spec: ErrorSpec,
    #[serde(default)]
    pub noise: NoiseMode,
    #[serde(default)]
    pub dg_mode: DgMode,
    /// Per-unit overrides of the true DG output; others sit mid-interval.
    #[serde(default)]
    pub dg_truth: BTreeMap<String, DgTruth>,
    /// Relative half-width of every line parameter interval.
    #[serde(default)]
    pub line_uncertainty: f64,
    /// Inferred from the inputs when absent.
    #[serde(default)]
    pub model: Option<ModelVariant>,
    /// Registry names, plus `mc` for the Monte Carlo envelope.
    #[serde(default = "default_solvers")]
    pub solvers: Vec<String>,
    #[serde(default)]
    pub mc_trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_zero_sigma")]
    pub zero_injection_sigma: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Also write the assembled system as a triplet dump.
    #[serde(default)]
    pub dump_system: bool,
}

impl CaseConfig {
    /// Read a config; the feeder path is resolved against the config's
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<CaseConfig, Error> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg: CaseConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if cfg.feeder.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.feeder = dir.join(&cfg.feeder);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(0.0..0.5).contains(&self.line_uncertainty) {
            return Err(Error::Config(format!(
                "line_uncertainty must lie in [0, 0.5), got {}",
                self.line_uncertainty
            )));
        }
        if !(self.v_slack > 0.0 && self.v_slack.is_finite()) {
            return Err(Error::Config(format!(
                "v_slack must be positive, got {}",
                self.v_slack
            )));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::Config(format!(
                "eps must be non-negative, got {}",
                self.eps
            )));
        }
        let reg = SolverRegistry::with_defaults();
        for s in &self.solvers {
            if let Some(trials) = mc_entry(s) {
                let trials = trials?.unwrap_or(self.mc_trials);
                if trials == 0 {
                    return Err(Error::Config("solver 'mc' needs mc_trials > 0".into()));
                }
            } else if s.eq_ignore_ascii_case("lp") {
                return Err(Error::Config(
                    "the LP-based enclosure is not provided; it cannot represent interval line parameters either".into(),
                ));
            } else {
                reg.get(s)?;
            }
        }
        Ok(())
    }

    pub fn wants_mc(&self) -> bool {
        self.solvers.iter().any(|s| mc_entry(s).is_some())
    }

    /// Trial count for the envelope: an `mc:N` entry wins over `mc_trials`.
    pub fn effective_mc_trials(&self) -> usize {
        self.solvers
            .iter()
            .find_map(|s| mc_entry(s).and_then(|t| t.ok().flatten()))
            .unwrap_or(self.mc_trials)
    }
}

/// `mc` gives `Some(Ok(None))`, `mc:N` gives `Some(Ok(Some(N)))`, anything
/// else `None`.
fn mc_entry(s: &str) -> Option<Result<Option<usize>, Error>> {
    let lower = s.to_ascii_lowercase();
    if lower == "mc" {
        return Some(Ok(None));
    }
    let n = lower.strip_prefix("mc:")?;
    Some(
        n.trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("bad trial count in solver entry {s:?}"))),
    )
}

/// Everything up to the assembled interval system.
#[derive(Debug, Clone)]
pub struct PreparedCase {
    pub config: CaseConfig,
    /// Point line parameters; the truth is solved on this feeder.
    pub nominal: Feeder,
    /// The estimator's feeder: interval lines when uncertainty is set.
    pub feeder: Feeder,
    pub truth: TrueState,
    pub measurements: MeasurementSet,
    pub model: MeasurementModel,
    pub jacobian: JacobianSystem,
    pub weights: WeightMatrix,
    pub system: IseSystem,
    pub at: Vec<(usize, Phase)>,
    pub truth_vmag: Vec<f64>,
    pub truth_states: Vec<f64>,
    pub time_assembly: Duration,
}

fn dg_truth(f: &Feeder, overrides: &BTreeMap<String, DgTruth>) -> Result<Vec<(f64, f64)>, Error> {
    let mut dg = dg_midpoints(f);
    for (id, t) in overrides {
        let k =
            f.dg.iter()
                .position(|u| &u.id == id)
                .ok_or_else(|| Error::Config(format!("dg_truth names unknown DG unit {id:?}")))?;
        let iv = f.dg[k].p_kw;
        let p = match t {
            DgTruth::Kw(v) => *v,
            DgTruth::Named(s) => match s.as_str() {
                "lo" => iv.lo(),
                "mid" => iv.midpoint(),
                "hi" => iv.hi(),
                _ => {
                    return Err(Error::Config(format!(
                        "dg_truth for {id}: expected a number, lo, mid or hi"
                    )))
                }
            },
        };
        if !iv.contains_point(p) {
            return Err(TruthError::DgOutOfRange {
                id: id.clone(),
                value: p,
                lo: iv.lo(),
                hi: iv.hi(),
            }
            .into());
        }
        dg[k] = dg_output_at(f, k, p);
    }
    Ok(dg)
}

/// Variant matching the inputs: interval lines and DG output intervals.
pub fn infer_variant(interval_lines: bool, dg_intervals: bool) -> ModelVariant {
    match (interval_lines, dg_intervals) {
        (false, false) => ModelVariant::I,
        (false, true) => ModelVariant::II,
        (true, false) => ModelVariant::III,
        (true, true) => ModelVariant::IV,
    }
}

/// Load the feeder, solve the truth, draw measurements and assemble.
pub fn prepare_case(cfg: &CaseConfig) -> Result<PreparedCase, Error> {
    cfg.validate()?;
    let mut nominal = load_feeder_file(&cfg.feeder)?;
    if cfg.balanced {
        nominal = balanced_reduction(&nominal);
    }
    let dg = dg_truth(&nominal, &cfg.dg_truth)?;
    let truth = solve_power_flow(&nominal, &dg, slack_phasors(cfg.v_slack))?;
    let opts = SynthesisOptions {
        spec: cfg.error_spec,
        noise: cfg.noise,
        seed: cfg.seed,
        dg_mode: cfg.dg_mode,
        zero_injection_sigma: cfg.zero_injection_sigma,
    };
    let measurements = synthesize_measurements(&nominal, &truth, &cfg.placements, &opts)?;
    let feeder = if cfg.line_uncertainty > 0.0 {
        apply_line_uncertainty(&nominal, cfg.line_uncertainty)?
    } else {
        nominal.clone()
    };

    let t0 = Instant::now();
    let model = MeasurementModel::new(&feeder, &measurements)?;
    let jacobian = build_jacobian(&feeder, &model)?;
    let weights = build_weights(&model)?;
    let (z1, z2) = (build_z1(&model), build_z2(&model));
    let variant = cfg
        .model
        .unwrap_or_else(|| infer_variant(!jacobian.h.is_thin(), model.m2 > 0));
    let system = assemble(variant, &jacobian, &z1, &z2, &weights)?;
    let time_assembly = t0.elapsed();

    let at = bus_phases(&nominal);
    let truth_vmag = at
        .iter()
        .map(|&(b, p)| truth.voltage_magnitude(b, p))
        .collect();
    let truth_states = states_from_truth(&truth, &nominal, &jacobian.index);
    Ok(PreparedCase {
        config: cfg.clone(),
        nominal,
        feeder,
        truth,
        measurements,
        model,
        jacobian,
        weights,
        system,
        at,
        truth_vmag,
        truth_states,
        time_assembly,
    })
}

/// One enclosure method applied to a prepared case.
#[derive(Debug, Clone)]
pub struct MethodResult {
    pub report: SolverReport,
    pub states: IntervalVector,
    pub voltages: IntervalVoltages,
    pub accuracy: AccuracyReport,
    /// Truth state vector inside the state intervals.
    pub states_contain_truth: bool,
}

impl MethodResult {
    /// Magnitude intervals contain the envelope's extremes everywhere.
    pub fn contains_envelope(&self, mc: &McEnvelope) -> bool {
        contains_range_with_slack(
            &self.voltages.mag,
            &mc.vmag_min,
            &mc.vmag_max,
            CONTAINMENT_SLACK,
        )
        .iter()
        .all(|&b| b)
    }

    pub fn contains_state_envelope(&self, mc: &McEnvelope) -> bool {
        contains_range_with_slack(
            &self.states,
            &mc.state_min,
            &mc.state_max,
            CONTAINMENT_SLACK,
        )
        .iter()
        .all(|&b| b)
    }
}

/// Run one registered method. The midpoint inverse comes from the system's
/// block structure and is charged to the method's initial time.
pub fn solve_method(
    p: &PreparedCase,
    registry: &SolverRegistry,
    name: &str,
) -> Result<MethodResult, Error> {
    let solver = registry.get(name)?;
    let t0 = Instant::now();
    let c = p.system.midpoint_inverse()?;
    let t_c = t0.elapsed();
    let opts = SolveOptions {
        eps: p.config.eps,
        preconditioner: Some(Arc::new(c)),
        ..SolveOptions::default()
    };
    let mut report = solver.solve(&p.system.a, &p.system.b, &opts)?;
    report.time_initial += t_c;
    let states = extract_states(&report.solution, &p.system)?;
    let voltages = states_to_bus_voltage_intervals(&states, &p.feeder, &p.jacobian.index)?;
    let accuracy = AccuracyReport::new(
        &voltages.at,
        &voltages.re,
        &voltages.im,
        &voltages.mag,
        &p.truth_vmag,
    )?;
    let states_contain_truth = states.contains_points(&p.truth_states);
    Ok(MethodResult {
        report,
        states,
        voltages,
        accuracy,
        states_contain_truth,
    })
}

pub fn mc_setup(p: &PreparedCase) -> McSetup {
    McSetup {
        feeder: p.feeder.clone(),
        measurements: p.measurements.clone(),
        wls_tol: MC_WLS_TOL,
    }
}

/// Monte Carlo envelope over the case's inputs.
pub fn case_envelope(p: &PreparedCase, trials: usize, seed: u64) -> Result<McEnvelope, Error> {
    Ok(mc_envelope(&mc_setup(p), trials, seed)?)
}

#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub prepared: PreparedCase,
    pub methods: Vec<(String, MethodResult)>,
    /// Methods that returned an error, with its message.
    pub failures: Vec<(String, String)>,
    pub mc: Option<McEnvelope>,
    pub comparison: Comparison,
}

pub fn run_case(cfg: &CaseConfig) -> Result<CaseOutcome, Error> {
    let prepared = prepare_case(cfg)?;
    let registry = SolverRegistry::with_defaults();
    let mut methods = Vec::new();
    let mut failures = Vec::new();
    for name in cfg.solvers.iter().filter(|s| mc_entry(s).is_none()) {
        let name = name.to_ascii_lowercase();
        match solve_method(&prepared, &registry, &name) {
            Ok(r) => methods.push((name, r)),
            Err(e @ Error::Solver(_)) => failures.push((name, e.to_string())),
            Err(e) => return Err(e),
        }
    }
    let mc = if cfg.wants_mc() {
        Some(case_envelope(&prepared, cfg.effective_mc_trials(), cfg.seed)?)
    } else {
        None
    };
    let mut rows: Vec<MethodSummary> = methods
        .iter()
        .map(|(name, r)| MethodSummary {
            case_id: cfg.id.clone(),
            method: name.clone(),
            accuracy: Some(r.accuracy.clone()),
            iterations: r.report.iterations,
            time_initial: r.report.time_initial,
            time_per_iteration: r.report.time_per_iteration(),
            time_total: r.report.total_time(),
            truth_contained: Some(r.accuracy.all_truth_contained()),
            mc_contained: mc.as_ref().map(|e| r.contains_envelope(e)),
        })
        .collect();
    if let Some(e) = &mc {
        rows.push(MethodSummary {
            case_id: cfg.id.clone(),
            method: format!("mc{}", e.trials),
            accuracy: None,
            iterations: e.trials - e.failed,
            time_initial: Duration::ZERO,
            time_per_iteration: e.total_time() / e.trials.max(1) as u32,
            time_total: e.total_time(),
            truth_contained: None,
            mc_contained: None,
        });
    }
    let comparison = compare_methods(&rows)?;
    Ok(CaseOutcome {
        prepared,
        methods,
        failures,
        mc,
        comparison,
    })
}

/// Deterministic part of a case report.
#[derive(Debug, Clone, Serialize)]
struct Summary<'a> {
    case: &'a str,
    feeder: &'a str,
    model: ModelVariant,
    n: usize,
    m1: usize,
    m2: usize,
    dimension: usize,
    interval_line_parameters: bool,
    methods: Vec<MethodEntry<'a>>,
    failed_methods: Vec<FailureEntry<'a>>,
    monte_carlo: Option<McEntry>,
}

#[derive(Debug, Clone, Serialize)]
struct FailureEntry<'a> {
    method: &'a str,
    error: &'a str,
}

#[derive(Debug, Clone, Serialize)]
struct MethodEntry<'a> {
    method: &'a str,
    iterations: usize,
    beta: Option<f64>,
    alpha: Option<f64>,
    q1: f64,
    #[serde(rename = "q2_max_over_states")]
    q2: f64,
    width_sums: crate::analysis::WidthSums,
    truth_contained: bool,
    states_contain_truth: bool,
    mc_contained: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
struct McEntry {
    trials: usize,
    failed: usize,
    seed: u64,
}

#[derive(Debug, Clone, Serialize)]
struct Timing<'a> {
    method: &'a str,
    assembly_s: f64,
    initial_s: f64,
    per_iteration_s: f64,
    total_s: f64,
}

/// Write `<method>_bounds.csv`, `summary.json`, `timing.json` and, when
/// asked, `system.txt`. All but `timing.json` are byte-identical across
/// reruns with the same config.
pub fn write_reports(o: &CaseOutcome, dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let p = &o.prepared;
    let mut written = Vec::new();
    for (name, r) in &o.methods {
        let path = dir.join(format!("{name}_bounds.csv"));
        let file = std::fs::File::create(&path).map_err(io)?;
        write_bounds_csv(
            file,
            &bound_rows(
                &p.nominal,
                &p.at,
                &r.voltages.mag,
                &p.truth_vmag,
                o.mc.as_ref(),
            ),
        )?;
        written.push(path);
    }
    let summary = Summary {
        case: &p.config.id,
        feeder: &p.nominal.name,
        model: p.system.variant,
        n: p.system.n,
        m1: p.system.m1,
        m2: p.system.m2,
        dimension: p.system.dim(),
        interval_line_parameters: !p.jacobian.h.is_thin(),
        methods: o
            .methods
            .iter()
            .map(|(name, r)| MethodEntry {
                method: name,
                iterations: r.report.iterations,
                beta: r.report.beta,
                alpha: r.report.alpha,
                q1: r.accuracy.q1,
                q2: r.accuracy.q2,
                width_sums: r.accuracy.width_sums,
                truth_contained: r.accuracy.all_truth_contained(),
                states_contain_truth: r.states_contain_truth,
                mc_contained: o.mc.as_ref().map(|e| r.contains_envelope(e)),
            })
            .collect(),
        failed_methods: o
            .failures
            .iter()
            .map(|(method, error)| FailureEntry { method, error })
            .collect(),
        monte_carlo: o.mc.as_ref().map(|e| McEntry {
            trials: e.trials,
            failed: e.failed,
            seed: e.seed,
        }),
    };
    let path = dir.join("summary.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&summary).expect("serializable") + "\n",
    )
    .map_err(io)?;
    written.push(path);

    let mut timing: Vec<Timing> = o
        .methods
        .iter()
        .map(|(name, r)| Timing {
            method: name,
            assembly_s: p.time_assembly.as_secs_f64(),
            initial_s: r.report.time_initial.as_secs_f64(),
            per_iteration_s: r.report.time_per_iteration().as_secs_f64(),
            total_s: r.report.total_time().as_secs_f64(),
        })
        .collect();
    if let Some(e) = &o.mc {
        timing.push(Timing {
            method: "mc",
            assembly_s: 0.0,
            initial_s: 0.0,
            per_iteration_s: e.total_time().as_secs_f64() / e.trials.max(1) as f64,
            total_s: e.total_time().as_secs_f64(),
        });
    }
    let path = dir.join("timing.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&timing).expect("serializable") + "\n",
    )
    .map_err(io)?;
    written.push(path);

    if p.config.dump_system {
        let path = dir.join("system.txt");
        std::fs::write(&path, dump_system(&p.system.a, &p.system.b)).map_err(io)?;
        written.push(path);
    }
    Ok(written)
}

/// Reference dimensions of the 123-bus study: full three-phase and balanced.
pub const REFERENCE_FULL: (usize, usize, usize) = (714, 888, 1602);
pub const REFERENCE_BALANCED: (usize, usize, usize) = (238, 296, 534);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionAudit {
    pub label: String,
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
    pub m: usize,
    pub total: usize,
    pub reference: (usize, usize, usize),
    pub slack_phases: usize,
    pub branch_phases: usize,
    /// Measurement rows per channel class.
    pub rows_by_class: BTreeMap<String, usize>,
    pub explanation: String,
}

fn audit_one(
    cfg: &CaseConfig,
    label: &str,
    reference: (usize, usize, usize),
) -> Result<DimensionAudit, Error> {
    let p = prepare_case(cfg)?;
    let f = &p.nominal;
    let slack_phases = f.buses[f.slack].phases.len();
    let branch_phases = f.branch_phase_count();
    let mut rows_by_class = BTreeMap::new();
    for spec in &p.model.rows {
        *rows_by_class
            .entry(format!("{:?}", p.model.channels[spec.channel].class))
            .or_insert(0) += 1;
    }
    let (n, m) = (p.system.n, p.system.m());
    let (rn, rm, rt) = reference;
    let explanation = if (n, m, n + m) == reference {
        "matches the reference".to_string()
    } else {
        let mut parts = Vec::new();
        if n != rn {
            let implied = (rn - 2 * slack_phases.min(rn / 2)) / 2;
            let per_branch = slack_phases.max(1);
            let three = f.branches.iter().filter(|b| b.phases.len() == 3).count();
            let mut s = format!(
                "n = 2*{slack_phases} slack phases + 2*{branch_phases} branch phases = {n}; the reference {rn} \
                 implies {implied} branch phases, a difference of {}",
                branch_phases as i64 - implied as i64
            );
            if per_branch == 1 {
                s += &format!(", from {} branches against {implied}", f.branches.len());
            } else if implied % per_branch == 0 {
                s += &format!(
                    ". {implied} = {per_branch} x {} as if every branch carried all {per_branch} phases; the \
                     conversion has {} branches, {three} of them three-phase, and keeps the one- and two-phase \
                     laterals",
                    implied / per_branch,
                    f.branches.len()
                );
            }
            parts.push(s);
        }
        if m != rm {
            parts.push(format!(
                "m = {m} rows ({}) against {rm}: every non-slack bus-phase carries one complex injection row \
                 (load pseudo-measurement, zero injection or DG), so m tracks the phase count and the meter \
                 placement",
                rows_by_class
                    .iter()
                    .map(|(k, v)| format!("{k} {v}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ));
        }
        parts.push(format!("m + n = {} against {rt}", n + m));
        parts.join("; ")
    };
    Ok(DimensionAudit {
        label: label.into(),
        n,
        m1: p.system.m1,
        m2: p.system.m2,
        m,
        total: n + m,
        reference,
        slack_phases,
        branch_phases,
        rows_by_class,
        explanation,
    })
}

/// Write `mc_envelope.csv` and `mc_summary.json` for an envelope-only run.
pub fn write_envelope_report(p: &PreparedCase, env: &McEnvelope, dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let csv_path = dir.join("mc_envelope.csv");
    let file = std::fs::File::create(&csv_path).map_err(io)?;
    write_envelope_csv(file, &p.nominal, &p.at, &p.truth_vmag, env)?;
    let json_path = dir.join("mc_summary.json");
    let summary = serde_json::json!({
        "case": p.config.id,
        "trials": env.trials,
        "failed": env.failed,
        "seed": env.seed,
    });
    std::fs::write(
        &json_path,
        serde_json::to_string_pretty(&summary).expect("serializable") + "\n",
    )
    .map_err(io)?;
    Ok(vec![csv_path, json_path])
}

/// System dimensions of a case and of its balanced reduction, next to the
/// reference values.
pub fn audit_dimensions(cfg: &CaseConfig) -> Result<Vec<DimensionAudit>, Error> {
    let mut full = cfg.clone();
    full.balanced = false;
    let mut bal = cfg.clone();
    bal.balanced = true;
    Ok(vec![
        audit_one(&full, "three-phase", REFERENCE_FULL)?,
        audit_one(&bal, "balanced", REFERENCE_BALANCED)?,
    ])
}

pub fn render_audit(rows: &[DimensionAudit]) -> String {
    let mut s = format!(
        "{:<12} {:>6} {:>6} {:>6} {:>6} {:>8} {:>10} {:>10} {:>10}\n",
        "system", "n", "m1", "m2", "m", "m+n", "ref n", "ref m", "ref m+n"
    );
    for r in rows {
        s += &format!(
            "{:<12} {:>6} {:>6} {:>6} {:>6} {:>8} {:>10} {:>10} {:>10}\n",
            r.label, r.n, r.m1, r.m2, r.m, r.total, r.reference.0, r.reference.1, r.reference.2
        );
    }
    if let [full, bal] = rows {
        s += &format!(
            "balanced / three-phase: n {:.3}, m {:.3}, m+n {:.3}\n",
            bal.n as f64 / full.n as f64,
            bal.m as f64 / full.m as f64,
            bal.total as f64 / full.total as f64
        );
    }
    for r in rows {
        s += &format!("{}: {}\n", r.label, r.explanation);
    }
    s
}
