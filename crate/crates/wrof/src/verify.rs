//! Invariant suites over seeded random instances.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use wrof_core::flows::{iterate_regularization, multiscale, FlowOptions, ScaleSchedule};
use wrof_core::oracle::{
    brute_force_wrof, brute_force_wrof_with, enumerate_transport, segment_candidates, OracleReport,
};
use wrof_core::wrof::{extended_potential, extremality_gap};
use wrof_core::{
    check_energy_identity, in_ball, lipschitz_ratio, sandwich_bounds, solve_transport, solve_wrof,
    CostKind, Error,
};

use crate::error::{CliError, Result};
use crate::instances::{self, Instance, InstanceShape};

/// Atom cap for the oracle suite; its joint program grows with `n * m`.
pub const ORACLE_MAX_ATOMS: usize = 6;
/// Extra segment points per pair in the candidate-support sweep.
pub const SWEEP_POINTS: usize = 10;
pub const FLOW_STAGES: usize = 8;
pub const ITERATE_STAGES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Identities,
    Oracle,
    Flows,
    All,
}

impl Suite {
    fn parts(self) -> &'static [Suite] {
        match self {
            Suite::All => &[Suite::Identities, Suite::Oracle, Suite::Flows],
            Suite::Identities => &[Suite::Identities],
            Suite::Oracle => &[Suite::Oracle],
            Suite::Flows => &[Suite::Flows],
        }
    }

    fn default_max_atoms(self) -> usize {
        match self {
            Suite::Oracle => ORACLE_MAX_ATOMS,
            _ => instances::DEFAULT_MAX_ATOMS,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value <= tolerance`.
    fn at_most(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self {
            name,
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }

    fn holds(name: &'static str, ok: bool) -> Self {
        Self {
            name,
            value: if ok { 0.0 } else { 1.0 },
            tolerance: 0.0,
            passed: ok,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Passed,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceResult {
    pub suite: Suite,
    #[serde(flatten)]
    pub shape: InstanceShape,
    pub status: Status,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub instances: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub results: Vec<InstanceResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn line(&self) -> String {
        format!(
            "suite {:?}: {} passed, {} failed, {} skipped",
            self.suite, self.passed, self.failed, self.skipped
        )
        .to_lowercase()
    }
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub suite: Suite,
    pub instances: usize,
    pub seed: u64,
    /// Overrides the per-suite atom cap.
    pub max_atoms: Option<usize>,
    pub threads: Option<usize>,
}

/// Worker count: `WROF_THREADS` if set and positive, else all cores.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("WROF_THREADS")
        .ok()?
        .trim()
        .parse::<usize>()
        .ok()
        .filter(|&t| t > 0)
}

pub fn run(config: &VerifyConfig) -> Result<VerifyReport> {
    if config.instances == 0 {
        return Err(CliError::EmptySuite);
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = config.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;

    let mut results = Vec::new();
    for &suite in config.suite.parts() {
        let max_atoms = config.max_atoms.unwrap_or(suite.default_max_atoms());
        let part: Vec<InstanceResult> = pool.install(|| {
            (0..config.instances)
                .into_par_iter()
                .map(|index| run_instance(suite, config.seed, index, max_atoms))
                .collect()
        });
        results.extend(part);
    }
    let count = |s| results.iter().filter(|r| r.status == s).count();
    Ok(VerifyReport {
        suite: config.suite,
        seed: config.seed,
        instances: config.instances,
        passed: count(Status::Passed),
        failed: count(Status::Failed),
        skipped: count(Status::Skipped),
        results,
    })
}

pub fn run_instance(suite: Suite, seed: u64, index: usize, max_atoms: usize) -> InstanceResult {
    let (instance, mut rng) = instances::generate_with_rng(seed, index, max_atoms);
    let mut oracle = None;
    let outcome = match suite {
        Suite::Identities => identities(&instance),
        Suite::Oracle => oracle_checks(&instance, &mut rng, &mut oracle),
        Suite::Flows => flows(&instance),
        Suite::All => unreachable!("expanded by run"),
    };
    let (status, checks, note) = match outcome {
        Ok(checks) => {
            let status = if checks.iter().all(|c| c.passed) {
                Status::Passed
            } else {
                Status::Failed
            };
            (status, checks, None)
        }
        Err(Error::BudgetExceeded { size, limit }) => (
            Status::Skipped,
            Vec::new(),
            Some(format!("oracle budget exceeded: size {size} > {limit}")),
        ),
        Err(e) => (Status::Failed, Vec::new(), Some(e.to_string())),
    };
    InstanceResult {
        suite,
        shape: instance.shape(),
        status,
        checks,
        oracle,
        note,
    }
}

fn identities(inst: &Instance) -> wrof_core::Result<Vec<Check>> {
    let (mu, nu, lambda) = (&inst.mu, &inst.nu, inst.lambda);
    let mut checks = Vec::new();

    let mut gap = 0.0f64;
    let mut marginal = 0.0f64;
    for kind in [
        CostKind::Quadratic,
        CostKind::Euclidean,
        CostKind::Huber(lambda),
    ] {
        let plan = solve_transport(mu, nu, kind)?;
        gap = gap.max(plan.duality_gap(mu, nu));
        marginal = marginal.max(plan.marginal_error(mu, nu));
    }
    checks.push(Check::at_most("duality_gap", gap, 1e-8));
    checks.push(Check::at_most("marginal_error", marginal, 1e-9));

    let sol = solve_wrof(mu, nu, lambda)?;
    let huber = sol.huber_plan.value;
    checks.push(Check::at_most(
        "value_identity",
        (sol.value - huber).abs() / (1.0 + huber.abs()),
        1e-8,
    ));
    checks.push(Check::at_most(
        "displacement_excess",
        sol.max_displacement - lambda,
        1e-9,
    ));
    let dichotomy = if sol.within_ball() {
        sol.rho == *nu
    } else {
        sol.divergence > 0.0
    };
    checks.push(Check::holds("dichotomy", dichotomy));
    let bounds = sandwich_bounds(&sol, mu, nu)?;
    let excess = (sol.divergence - bounds.upper).max(bounds.lower - sol.divergence);
    checks.push(Check::at_most("sandwich_excess", excess, 1e-8));
    checks.push(Check::holds(
        "rho_in_ball",
        in_ball(mu, &sol.rho, lambda, 1e-8)?,
    ));
    checks.push(Check::at_most(
        "extremality_gap",
        extremality_gap(&sol, mu, nu)?,
        1e-6,
    ));
    if nu.len() >= 2 {
        let (on_nu, _) = extended_potential(&sol, mu, nu)?;
        let ratio = lipschitz_ratio(&on_nu, nu.points())?;
        checks.push(Check::at_most(
            "dual_lipschitz_excess",
            ratio - lambda,
            1e-8,
        ));
    }
    Ok(checks)
}

fn oracle_checks(
    inst: &Instance,
    rng: &mut impl Rng,
    report: &mut Option<OracleReport>,
) -> wrof_core::Result<Vec<Check>> {
    let (mu, nu, lambda) = (&inst.mu, &inst.nu, inst.lambda);
    let mut checks = Vec::new();

    let base = brute_force_wrof(mu, nu, lambda)?;
    let sol = solve_wrof(mu, nu, lambda)?;
    let r = OracleReport::new(inst.index, &base, sol.value);
    checks.push(Check::at_most(
        "oracle_gap",
        r.gap,
        wrof_core::oracle::CERTIFY_TOL,
    ));
    *report = Some(r);

    let extra = segment_candidates(mu, nu, SWEEP_POINTS, || rng.gen::<f64>())?;
    let swept = brute_force_wrof_with(mu, nu, lambda, Some(&extra))?;
    checks.push(Check::at_most(
        "sweep_improvement",
        (base.value - swept.value) / (1.0 + base.value.abs()),
        1e-9,
    ));

    for kind in [
        CostKind::Quadratic,
        CostKind::Euclidean,
        CostKind::Huber(lambda),
    ] {
        match enumerate_transport(mu, nu, kind) {
            Ok(exact) => {
                let main = solve_transport(mu, nu, kind)?.value;
                checks.push(Check::at_most(
                    "enumeration_gap",
                    (main - exact).abs(),
                    1e-9,
                ));
            }
            Err(Error::BudgetExceeded { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(checks)
}

fn flows(inst: &Instance) -> wrof_core::Result<Vec<Check>> {
    let (mu, nu, lambda) = (&inst.mu, &inst.nu, inst.lambda);
    let options = FlowOptions::default();
    let mut checks = Vec::new();

    let ms = multiscale(mu, nu, lambda, FLOW_STAGES, &options)?;
    let ledger = &ms.ledger;
    let residual = check_energy_identity(ledger);
    checks.push(Check::at_most(
        "energy_residual",
        residual,
        1e-7 * (1.0 + ledger.total_left),
    ));
    let telescoping = ledger
        .stages
        .iter()
        .map(|s| s.telescoping_error() / (1.0 + 0.5 * s.w2sq_before))
        .fold(0.0, f64::max);
    checks.push(Check::at_most("telescoping_error", telescoping, 1e-8));
    checks.push(Check::holds(
        "rate_bound",
        ledger.stages.iter().all(|s| s.rate_holds()),
    ));

    let schedule = ScaleSchedule::constant(lambda, ITERATE_STAGES)?;
    let reg = iterate_regularization(mu, nu, &schedule, &options)?;
    checks.push(Check::at_most(
        "w1_increase",
        reg.trace.max_increase(),
        1e-9,
    ));
    checks.push(Check::at_most(
        "diameter_violation",
        reg.trace.max_diameter_violation(),
        1e-9,
    ));
    Ok(checks)
}
