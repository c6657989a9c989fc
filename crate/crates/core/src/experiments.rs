//! Experiment runners behind the command-line tool: figure data, single
//! simulations, steady states, the g2m threshold scan and the self-check.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::algebra::{DensityMatrix, Operator, Picture, PureState};
use crate::bath::{instantaneous_frequencies, rates, BathError, BathParams, ProtocolSnapshot, XI_SQ_FLOOR};
use crate::checks::{self, CheckResult, CheckStatus};
use crate::config::{ConfigError, ExperimentConfig, InitialState};
use crate::controls::{AnsatzProtocol, ControlError, Protocol, ProtocolParams};
use crate::dynamics::{
    adiabatic_steady_populations, build_generator, dfs_check, evolve, steady_state, DynamicsError, EvolutionOptions,
    Target, Trajectory,
};
use crate::invariant::{eigensystem, Drive, InvariantError};
use crate::ode::linspace;

pub const CSV_HEADER: &str = "t,fidelity,log10_infidelity,f,J,gamma32,gamma24,alpha32,alpha24,trace_defect,min_eig";

/// Floor for the log10 infidelity column.
pub const LOG10_FLOOR: f64 = -16.0;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Bath(#[from] BathError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("no sign change of min_t alpha32 for g2m in [{lo}, {hi}] (values {at_lo:e}, {at_hi:e})")]
    NoSignChange { lo: f64, hi: f64, at_lo: f64, at_hi: f64 },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl From<InvariantError> for ExperimentError {
    fn from(e: InvariantError) -> Self {
        ExperimentError::Dynamics(e.into())
    }
}

impl ExperimentError {
    /// 1 for invalid input, 2 for failed checks and numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::Control(_) | ExperimentError::Io { .. } => 1,
            ExperimentError::Bath(_) => 1,
            ExperimentError::Dynamics(
                DynamicsError::Domain { .. } | DynamicsError::Control(_) | DynamicsError::Bath(_),
            ) => 1,
            _ => 2,
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> ExperimentError {
    ExperimentError::Io { path: path.display().to_string(), message: e.to_string() }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ResultRow {
    pub t: f64,
    pub fidelity: f64,
    pub log10_infidelity: f64,
    pub f: f64,
    pub j: f64,
    pub gamma32: f64,
    pub gamma24: f64,
    pub alpha32: f64,
    pub alpha24: f64,
    pub trace_defect: f64,
    pub min_eig: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub name: String,
    pub rows: Vec<ResultRow>,
}

pub fn log10_infidelity(fidelity: f64) -> f64 {
    (1.0 - fidelity).max(0.0).log10().max(LOG10_FLOOR)
}

impl ResultTable {
    /// Needs a trajectory that was run with a fidelity target.
    pub fn from_trajectory(name: &str, traj: &Trajectory) -> Self {
        let fid = traj.fidelity.clone().unwrap_or_else(|| vec![f64::NAN; traj.times.len()]);
        let rows = traj
            .records
            .iter()
            .zip(fid)
            .map(|(r, fidelity)| ResultRow {
                t: r.t,
                fidelity,
                log10_infidelity: log10_infidelity(fidelity),
                f: r.fields.f,
                j: r.fields.j,
                gamma32: r.rates.gamma32(),
                gamma24: r.rates.gamma24(),
                alpha32: r.rates.frequencies.alpha32(),
                alpha24: r.rates.frequencies.alpha24,
                trace_defect: r.diagnostics.trace_defect,
                min_eig: r.diagnostics.min_eigenvalue,
            })
            .collect();
        Self { name: name.to_string(), rows }
    }

    pub fn final_fidelity(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.fidelity)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 + self.rows.len() * 260);
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let cols = [
                r.t,
                r.fidelity,
                r.log10_infidelity,
                r.f,
                r.j,
                r.gamma32,
                r.gamma24,
                r.alpha32,
                r.alpha24,
                r.trace_defect,
                r.min_eig,
            ];
            for (k, v) in cols.iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{v:.16e}");
            }
            s.push('\n');
        }
        s
    }

    /// Writes `<dir>/<name>.csv`.
    pub fn write_csv(&self, dir: &Path) -> Result<PathBuf, ExperimentError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let path = dir.join(format!("{}.csv", self.name));
        std::fs::write(&path, self.to_csv()).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ThresholdEstimate {
    pub threshold: f64,
    pub bracket: (f64, f64),
    pub width: f64,
}

/// Machine-readable run summary written next to the CSV files.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct RunSummary {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub final_fidelities: BTreeMap<String, f64>,
    pub threshold: Option<ThresholdEstimate>,
    pub checks: Vec<CheckResult>,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
}

impl RunSummary {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Self { command: command.into(), config: cfg.to_pairs(), ..Self::default() }
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn write(&mut self, dir: &Path) -> Result<PathBuf, ExperimentError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let path = dir.join(format!("{}_summary.json", self.command));
        self.files.push(path.display().to_string());
        let text = serde_json::to_string_pretty(self).expect("summary serializes");
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    fn add_table(&mut self, table: &ResultTable, dir: Option<&Path>) -> Result<(), ExperimentError> {
        self.final_fidelities.insert(table.name.clone(), table.final_fidelity());
        if let Some(d) = dir {
            self.files.push(table.write_csv(d)?.display().to_string());
        }
        Ok(())
    }
}

pub fn protocol(cfg: &ExperimentConfig) -> Result<AnsatzProtocol, ExperimentError> {
    Ok(AnsatzProtocol::new(cfg.protocol)?)
}

/// Initial state and the state its fidelity is measured against.
pub fn initial_and_target(cfg: &ExperimentConfig, p: &dyn Protocol) -> Result<(PureState, Target), ExperimentError> {
    let e0 = eigensystem(&p.g(0.0))?;
    Ok(match cfg.initial_state {
        InitialState::Psi3 => (e0.states[2], Target::Eigenstate(3)),
        InitialState::Psi4 => (e0.states[3], Target::Eigenstate(3)),
        InitialState::Ket00 => (PureState::ket00(), Target::Fixed(PureState::bell_minus())),
        InitialState::Custom(s) => (s, Target::Fixed(PureState::bell_minus())),
    })
}

fn run_series(
    p: &dyn Protocol,
    bath: &BathParams,
    grid: usize,
    start: PureState,
    target: Target,
    closed: bool,
) -> Result<Trajectory, DynamicsError> {
    let opts =
        EvolutionOptions { closed_system: closed, target: Some(target), ..EvolutionOptions::new(p.duration(), grid) };
    evolve(&DensityMatrix::pure(&start, Picture::Schroedinger), p, bath, &opts)
}

fn warnings_of(name: &str, traj: &Trajectory) -> Vec<String> {
    traj.warnings.iter().map(|w| format!("{name}: t = {}: {}", w.t, w.message)).collect()
}

/// One series: (table name, initial state, target, bath, closed).
type Series = (String, PureState, Target, BathParams, bool);

/// Runs independent series on scoped threads, in order.
fn run_parallel(
    p: &dyn Protocol,
    grid: usize,
    series: Vec<Series>,
) -> Result<Vec<(ResultTable, Trajectory)>, ExperimentError> {
    let results: Vec<Result<Trajectory, DynamicsError>> = std::thread::scope(|s| {
        let handles: Vec<_> = series
            .iter()
            .map(|(_, start, target, bath, closed)| {
                s.spawn(move || run_series(p, bath, grid, *start, *target, *closed))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("series thread panicked")).collect()
    });
    series
        .iter()
        .zip(results)
        .map(|((name, ..), r)| {
            let traj = r?;
            Ok((ResultTable::from_trajectory(name, &traj), traj))
        })
        .collect()
}

pub fn simulate(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(RunSummary, Trajectory), ExperimentError> {
    let p = protocol(cfg)?;
    let (start, target) = initial_and_target(cfg, &p)?;
    let traj = run_series(&p, &cfg.bath, cfg.grid, start, target, cfg.closed_system)?;
    let mut summary = RunSummary::new("simulate", cfg);
    let table = ResultTable::from_trajectory(&format!("simulate_{}", cfg.initial_state.name()), &traj);
    summary.warnings = warnings_of(&table.name, &traj);
    summary.add_table(&table, out)?;
    Ok((summary, traj))
}

/// Infidelity curves for psi3(0) open, |00> open and |00> closed. Every
/// table also carries the fields and rates along the protocol.
pub fn run_figure1(
    cfg: &ExperimentConfig,
    out: Option<&Path>,
) -> Result<(RunSummary, Vec<ResultTable>), ExperimentError> {
    let p = protocol(cfg)?;
    cfg.bath.validate()?;
    let psi3 = eigensystem(&p.g(0.0))?.states[2];
    let bell = Target::Fixed(PureState::bell_minus());
    let series = vec![
        ("fig1_psi3_open".to_string(), psi3, Target::Eigenstate(3), cfg.bath, false),
        ("fig1_ket00_open".to_string(), PureState::ket00(), bell, cfg.bath, false),
        ("fig1_ket00_closed".to_string(), PureState::ket00(), bell, cfg.bath, true),
    ];
    finish("figure1", cfg, &p, series, out)
}

/// psi3(0) and psi4(0) with and without the Lamb shift, at T = 0.
pub fn run_figure2(
    cfg: &ExperimentConfig,
    out: Option<&Path>,
) -> Result<(RunSummary, Vec<ResultTable>), ExperimentError> {
    if cfg.bath.temperature != 0.0 {
        return Err(BathError::UnsupportedTemperature(cfg.bath.temperature).into());
    }
    let p = protocol(cfg)?;
    let e0 = eigensystem(&p.g(0.0))?;
    let mut series = Vec::new();
    for (label, start) in [("psi3", e0.states[2]), ("psi4", e0.states[3])] {
        for lamb in [true, false] {
            let bath = BathParams { include_lamb_shift: lamb, ..cfg.bath };
            let name = format!("fig2_{label}_lamb_{}", if lamb { "on" } else { "off" });
            series.push((name, start, Target::Eigenstate(3), bath, false));
        }
    }
    finish("figure2", cfg, &p, series, out)
}

fn finish(
    command: &str,
    cfg: &ExperimentConfig,
    p: &AnsatzProtocol,
    series: Vec<Series>,
    out: Option<&Path>,
) -> Result<(RunSummary, Vec<ResultTable>), ExperimentError> {
    let results = run_parallel(p, cfg.grid, series)?;
    let mut summary = RunSummary::new(command, cfg);
    let mut tables = Vec::new();
    for (table, traj) in results {
        summary.warnings.extend(warnings_of(&table.name, &traj));
        summary.add_table(&table, out)?;
        tables.push(table);
    }
    Ok((summary, tables))
}

/// min over t in [0, T] of alpha32 for the given protocol parameters.
/// Instants where the 3-2 coupling vanishes carry no transition and are
/// skipped (alpha32 is 0/0 there).
pub fn min_alpha32(params: &ProtocolParams, samples: usize) -> Result<f64, ExperimentError> {
    let p = AnsatzProtocol::new(*params)?;
    let mut lowest = f64::INFINITY;
    for t in linspace(0.0, p.duration(), samples) {
        let f = instantaneous_frequencies(&ProtocolSnapshot::new(t, p.g(t), p.fields(t)))?;
        if f.xi23_sq > XI_SQ_FLOOR {
            lowest = lowest.min(f.alpha32());
        }
    }
    Ok(lowest)
}

/// Locates the smallest g2m in [lo, hi] where min_t alpha32 reaches zero:
/// a coarse scan with `resolution` points (run concurrently), then
/// bisection on the first bracketing interval.
pub fn scan_alpha_sign(
    cfg: &ExperimentConfig,
    lo: f64,
    hi: f64,
    resolution: usize,
) -> Result<ThresholdEstimate, ExperimentError> {
    if !(lo > 0.0 && hi > lo && resolution >= 2) {
        return Err(ControlError::Domain {
            name: "g2m range",
            value: lo,
            reason: "need 0 < lo < hi and resolution >= 2",
        }
        .into());
    }
    let samples = cfg.grid.max(2001);
    let eval = |g2m: f64| min_alpha32(&ProtocolParams { g2m, ..cfg.protocol }, samples);
    let points = linspace(lo, hi, resolution);
    let workers = std::thread::available_parallelism().map_or(4, |n| n.get()).min(points.len());
    let chunk = points.len().div_ceil(workers);
    let values: Vec<Result<f64, ExperimentError>> = std::thread::scope(|s| {
        let handles: Vec<_> =
            points.chunks(chunk).map(|c| s.spawn(move || c.iter().map(|&g| eval(g)).collect::<Vec<_>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("scan thread panicked")).collect()
    });
    let values: Vec<f64> = values.into_iter().collect::<Result<_, _>>()?;
    let Some(k) = values.windows(2).position(|w| w[0] > 0.0 && w[1] <= 0.0) else {
        return Err(ExperimentError::NoSignChange { lo, hi, at_lo: values[0], at_hi: values[values.len() - 1] });
    };
    let (mut a, mut b) = (points[k], points[k + 1]);
    while b - a > 1e-7 * b.max(1.0) {
        let m = 0.5 * (a + b);
        if eval(m)? > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(ThresholdEstimate { threshold: 0.5 * (a + b), bracket: (a, b), width: b - a })
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct SteadyReport {
    pub t: f64,
    /// Populations of psi1..psi4 at time t.
    pub populations: [f64; 4],
    pub null_space_dim: usize,
    pub residual: f64,
    pub n32: f64,
    pub n24: f64,
    /// Detailed-balance populations of psi2..psi4 when neither channel is
    /// reversed.
    pub detailed_balance: Option<[f64; 3]>,
    pub max_deviation: Option<f64>,
}

/// Steady state of the dissipator frozen at time `t`, built on the
/// instantaneous invariant eigenstates (the coherent part is left out).
pub fn steady(cfg: &ExperimentConfig, t: f64) -> Result<SteadyReport, ExperimentError> {
    let p = protocol(cfg)?;
    if !(0.0..=p.duration()).contains(&t) {
        return Err(ControlError::Domain { name: "t", value: t, reason: "outside [0, T]" }.into());
    }
    let r = rates(&ProtocolSnapshot::new(t, p.g(t), p.fields(t)), &cfg.bath)?;
    let frame = eigensystem(&p.g(t))?.states;
    let terms = build_generator(t, &r, &frame, &Operator::zeros(), Picture::Interaction, false)?;
    let ss = steady_state(&terms.liouvillian())?;
    let populations = std::array::from_fn(|k| ss.rho.population(&frame[k]));
    let (n32, n24) = (r.channels[0].n_thermal, r.channels[1].n_thermal);
    let balanced = !r.reversal() && r.channels.iter().all(|c| c.is_active());
    let detailed_balance = if balanced { Some(adiabatic_steady_populations(n32, n24)?) } else { None };
    let max_deviation =
        detailed_balance.map(|d| d.iter().enumerate().map(|(k, v)| (v - populations[k + 1]).abs()).fold(0.0, f64::max));
    Ok(SteadyReport {
        t,
        populations,
        null_space_dim: ss.null_space_dim,
        residual: ss.residual,
        n32,
        n24,
        detailed_balance,
        max_deviation,
    })
}

/// Runs the consistency suite for `cfg`. Failures are reported in the
/// result rather than as errors.
pub fn selfcheck(cfg: &ExperimentConfig) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut bath = cfg.bath;
    match bath.validate() {
        Ok(()) => out.push(CheckResult::bound("bath-scope", 0.0, 0.0, "bath parameters accepted")),
        Err(e) => {
            let expected = matches!(e, BathError::UnsupportedTemperature(_));
            out.push(CheckResult {
                name: "bath-scope".into(),
                status: if expected { CheckStatus::ExpectedFail } else { CheckStatus::Fail },
                value: bath.temperature,
                tolerance: 0.0,
                detail: format!("{e}; remaining checks run without the Lamb shift"),
            });
            if !expected {
                return out;
            }
            bath.include_lamb_shift = false;
        }
    }
    let p = match AnsatzProtocol::new(cfg.protocol) {
        Ok(p) => {
            out.push(CheckResult::bound("admissibility", 0.0, 0.0, "g6^2 > 0 on [0, T]"));
            p
        }
        Err(e) => {
            out.push(CheckResult::failed("admissibility", e.to_string()));
            return out;
        }
    };
    let points = cfg.grid.clamp(2, 401);
    let mut push = |name: &str, r: Result<Vec<CheckResult>, DynamicsError>| match r {
        Ok(v) => out.extend(v),
        Err(e) => out.push(CheckResult::failed(name, e.to_string())),
    };
    let bound = CheckResult::bound;

    push(
        "lri",
        checks::lri_residuals(&p, points).map(|r| {
            vec![
                bound(
                    "lri-finite-difference",
                    r.finite_difference,
                    1e-5,
                    "invariance residual, finite-difference derivative",
                ),
                bound("lri-co-integrated", r.co_integrated, 1e-8, "invariance residual, co-integrated derivative"),
                bound("lri-eigenvalue-drift", r.eigenvalue_drift, 1e-8, "|lambda3(t) - lambda3(0)|"),
            ]
        }),
    );
    push(
        "propagator-oracle",
        checks::propagator_defect(&p, points).map(|d| vec![bound("propagator-oracle", d, 1e-6, "|U_LR - U_direct|")]),
    );
    let two = |temperature: f64, lamb: bool| {
        let b = BathParams { temperature, include_lamb_shift: lamb, ..bath };
        checks::two_picture_defect(&p, &b, &PureState::ket00(), points)
    };
    push(
        "two-picture-T0",
        two(0.0, bath.include_lamb_shift).map(|d| vec![bound("two-picture-T0", d, 1e-6, "temperature 0")]),
    );
    push("two-picture-T1", two(1.0, false).map(|d| vec![bound("two-picture-T1", d, 1e-6, "temperature 1")]));
    push(
        "steady-state",
        eigensystem(&p.g(0.0)).map_err(DynamicsError::from).and_then(|e| checks::steady_state_oracle(&e)).map(|o| {
            vec![
                bound(
                    "steady-state-balance",
                    o.population_error,
                    1e-8,
                    "detailed balance over N32, N24 in {0, 0.1, 1, 10}",
                ),
                bound("steady-state-dark", o.psi3_projector_error, 1e-8, "N = 0 steady state vs psi3 projector"),
                CheckResult::exceeds(
                    "steady-state-transposed",
                    (o.transposed_sum - 1.0).abs(),
                    1e-3,
                    format!("transposed denominator is not normalized (sums to {})", o.transposed_sum),
                ),
            ]
        }),
    );
    push(
        "dark-state",
        checks::dark_state_summary(&p, &bath, points).map(|d| {
            vec![
                bound("dark-state-no-lamb", d.infidelity_without_lamb, 1e-6, "max infidelity to psi3(t)"),
                bound("dark-state-lamb", d.infidelity_with_lamb, 1e-6, "max infidelity to psi3(t), Lamb shift on"),
                bound("dark-state-conditions", d.condition_residual, 1e-10, "jump and drift eigen-conditions"),
            ]
        }),
    );
    let dfs_bath = BathParams { include_lamb_shift: false, ..bath };
    push(
        "dfs",
        dfs_check(&p, &dfs_bath, points).map(|d| {
            vec![
                bound("dfs-psi1-fidelity", d.psi1_fidelity_defect, d.tolerance, "psi1(0) stays in psi1(t)"),
                bound("dfs-psi1-population", d.psi1_population_drift, d.tolerance, "psi1 population conserved"),
                bound("dfs-j0", d.j0_leakage, d.tolerance, "J = 0 sector conserved"),
                bound("dfs-f0", d.f0_stationarity_defect, d.tolerance, "f = 0 sector conserved"),
            ]
        }),
    );
    push(
        "transition-identities",
        checks::transition_identities(&p, 16).map(|t| {
            vec![
                bound("xi-sum", t.xi_sum_defect, 1e-10, "xi23^2 + xi24^2 = 4"),
                bound("alpha-theta", t.alpha_theta_defect, 1e-6, "alpha_mn = -d theta_mn / dt"),
            ]
        }),
    );
    push(
        "special-functions",
        checks::special_function_errors().map(|s| {
            vec![
                bound("ei-accuracy", s.ei, 1e-10, "Ei relative error on [1e-4, 100]"),
                bound("lamb-shift-quadrature", s.lamb_shift, 1e-4, "S(alpha) vs principal-value quadrature"),
            ]
        }),
    );
    out
}

pub fn run_selfcheck(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunSummary, ExperimentError> {
    let mut summary = RunSummary::new("selfcheck", cfg);
    summary.checks = selfcheck(cfg);
    if let Some(d) = out {
        summary.write(d)?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig { grid: 41, ..ExperimentConfig::default() }
    }

    #[test]
    fn csv_layout() {
        let (s, traj) = simulate(&small(), None).unwrap();
        let table = ResultTable::from_trajectory("x", &traj);
        let csv = table.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 11);
        assert_eq!(row[0], "0.0000000000000000e0");
        assert_eq!(csv.lines().count(), 42);
        assert!(table.rows.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(s.final_fidelities.len(), 1);
    }

    #[test]
    fn log10_clamp() {
        assert_eq!(log10_infidelity(1.0), LOG10_FLOOR);
        assert!((log10_infidelity(0.9) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn figure1_has_three_series() {
        let (s, tables) = run_figure1(&small(), None).unwrap();
        assert_eq!(tables.len(), 3);
        let closed = &tables[2];
        assert!((closed.final_fidelity() - 0.9).abs() < 5e-3);
        assert!(tables[1].rows.iter().all(|r| r.gamma32 >= 0.0 && r.gamma24 >= 0.0));
        assert_eq!(s.final_fidelities.len(), 3);
    }

    #[test]
    fn figure2_requires_zero_temperature() {
        let cfg = ExperimentConfig { bath: BathParams { temperature: 0.5, ..BathParams::default() }, ..small() };
        assert!(matches!(run_figure2(&cfg, None), Err(ExperimentError::Bath(_))));
    }

    #[test]
    fn alpha32_sign_examples() {
        let base = ProtocolParams::default();
        assert!(min_alpha32(&base, 401).unwrap() > 0.0);
        assert!(min_alpha32(&ProtocolParams { g2m: 1.0, ..base }, 401).unwrap() < 0.0);
    }

    #[test]
    fn scan_without_sign_change() {
        let err = scan_alpha_sign(&small(), 0.02, 0.1, 5).unwrap_err();
        assert!(matches!(err, ExperimentError::NoSignChange { .. }));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn selfcheck_scope_rejection_is_expected() {
        let cfg = ExperimentConfig {
            grid: 21,
            bath: BathParams { temperature: 1.0, include_lamb_shift: true, ..BathParams::default() },
            ..ExperimentConfig::default()
        };
        let checks = selfcheck(&cfg);
        assert_eq!(checks[0].status, CheckStatus::ExpectedFail);
    }

    #[test]
    fn selfcheck_reports_inadmissible_time() {
        let cfg = ExperimentConfig { protocol: ProtocolParams { g2m: 5.0, ..ProtocolParams::default() }, ..small() };
        let checks = selfcheck(&cfg);
        let last = checks.last().unwrap();
        assert_eq!(last.name, "admissibility");
        assert_eq!(last.status, CheckStatus::Fail);
        assert!(last.detail.contains("t ="), "{}", last.detail);
    }
}
