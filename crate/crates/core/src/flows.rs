//! Iterated WROF: iterative regularization towards `nu`, and multiscale
//! transport towards `mu` with its energy ledger.

use alloc::vec::Vec;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{BoxDomain, DiscreteMeasure};
use crate::transport::{check_lambda, w1, w2_squared};
use crate::wrof::{solve_wrof, split_masses};

pub const DEFAULT_ATOM_BUDGET: usize = 100_000;
pub const DEFAULT_MULTISCALE_STAGES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum ScheduleRule {
    Halving { initial: f64, stages: usize },
    Constant { lambda: f64, stages: usize },
    Custom,
}

/// Step sizes `lambda_0, lambda_1, ...`, all positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleSchedule {
    values: Vec<f64>,
    rule: ScheduleRule,
}

impl ScaleSchedule {
    /// `lambda_{n+1} = lambda_n / 2`.
    pub fn halving(initial: f64, stages: usize) -> Result<Self> {
        check_lambda(initial)?;
        let mut values = Vec::with_capacity(stages);
        let mut l = initial;
        for _ in 0..stages {
            values.push(l);
            l /= 2.0;
        }
        Self::checked(values, ScheduleRule::Halving { initial, stages })
    }

    pub fn constant(lambda: f64, stages: usize) -> Result<Self> {
        check_lambda(lambda)?;
        Self::checked(
            alloc::vec![lambda; stages],
            ScheduleRule::Constant { lambda, stages },
        )
    }

    pub fn custom(values: Vec<f64>) -> Result<Self> {
        Self::checked(values, ScheduleRule::Custom)
    }

    fn checked(values: Vec<f64>, rule: ScheduleRule) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySchedule);
        }
        for &v in &values {
            check_lambda(v)?;
        }
        Ok(Self { values, rule })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rule(&self) -> &ScheduleRule {
        &self.rule
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowOptions {
    /// Abort once an iterate has more atoms than this.
    pub atom_budget: usize,
    /// Stop iterative regularization once `W1(mu_n, nu)` is at most this.
    pub early_stop: Option<f64>,
    /// Domain used for the diameter bound; defaults to the bounding box of
    /// both supports.
    pub domain: Option<BoxDomain>,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            atom_budget: DEFAULT_ATOM_BUDGET,
            early_stop: None,
            domain: None,
        }
    }
}

fn check_budget(m: &DiscreteMeasure, limit: usize) -> Result<()> {
    if m.len() > limit {
        return Err(Error::AtomBudgetExceeded {
            atoms: m.len(),
            limit,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationStage {
    pub n: usize,
    pub lambda_n: f64,
    /// `W1(mu_n, nu)`
    pub w1_to_nu: f64,
    /// Huber-plan mass moved farther than `lambda_n` at this stage.
    pub mass_large_n: f64,
    /// `W1(mu_{n+1}, nu)`
    pub w1_after: f64,
    /// `mass_large_n * diam(domain)`
    pub diameter_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationTrace {
    pub diameter: f64,
    pub stages: Vec<IterationStage>,
}

impl IterationTrace {
    /// Largest increase of `W1(mu_n, nu)` from one stage to the next.
    pub fn max_increase(&self) -> f64 {
        self.stages
            .iter()
            .map(|s| s.w1_after - s.w1_to_nu)
            .fold(0.0, f64::max)
    }

    /// Largest excess of `W1(mu_{n+1}, nu)` over the diameter bound.
    pub fn max_diameter_violation(&self) -> f64 {
        self.stages
            .iter()
            .map(|s| s.w1_after - s.diameter_bound)
            .fold(0.0, f64::max)
    }

    pub fn final_w1(&self) -> Option<f64> {
        self.stages.last().map(|s| s.w1_after)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regularization {
    pub trace: IterationTrace,
    /// `mu_0, mu_1, ..., mu_N`.
    pub measures: Vec<DiscreteMeasure>,
}

/// `mu_{n+1} = argmin_rho W2^2(rho, mu_n) / 2 + lambda_n W1(rho, nu)`.
pub fn iterate_regularization(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    schedule: &ScaleSchedule,
    options: &FlowOptions,
) -> Result<Regularization> {
    if schedule.is_empty() {
        return Err(Error::EmptySchedule);
    }
    let domain = match &options.domain {
        Some(d) => d.clone(),
        None => BoxDomain::bounding(&[mu, nu])?,
    };
    let diameter = domain.diameter();

    let mut measures = alloc::vec![mu.clone()];
    let mut stages = Vec::with_capacity(schedule.len());
    let mut current_w1 = w1(mu, nu)?;
    for (n, &lambda) in schedule.values().iter().enumerate() {
        if options.early_stop.is_some_and(|tol| current_w1 <= tol) {
            break;
        }
        let current = measures.last().expect("nonempty");
        let solution = solve_wrof(current, nu, lambda)?;
        let split = split_masses(&solution.huber_plan, current, nu, lambda)?;
        check_budget(&solution.rho, options.atom_budget)?;
        stages.push(IterationStage {
            n,
            lambda_n: lambda,
            w1_to_nu: current_w1,
            mass_large_n: split.mass_large,
            w1_after: solution.w1_rho_nu,
            diameter_bound: split.mass_large * diameter,
        });
        current_w1 = solution.w1_rho_nu;
        measures.push(solution.rho);
    }
    Ok(Regularization {
        trace: IterationTrace { diameter, stages },
        measures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerStage {
    pub n: usize,
    pub lambda_n: f64,
    /// `W2^2(mu, nu_n)`
    pub w2sq_before: f64,
    /// `D_{lambda_n}(nu_n, nu_{n+1})`
    pub divergence_n: f64,
    /// `lambda_n W1(nu_n, nu_{n+1})`
    pub w1_term: f64,
    /// `W2^2(mu, nu_{n+1})`
    pub w2sq_after: f64,
    /// `2^(-2(n+1)+2) lambda_0^2`, the bound on `w2sq_after`.
    pub rate_bound: f64,
}

impl LedgerStage {
    /// `|W2^2_before / 2 - D - lambda W1 - W2^2_after / 2|`
    pub fn telescoping_error(&self) -> f64 {
        (0.5 * self.w2sq_before - self.divergence_n - self.w1_term - 0.5 * self.w2sq_after).abs()
    }

    pub fn rate_holds(&self) -> bool {
        self.w2sq_after <= self.rate_bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyLedger {
    pub lambda0: f64,
    pub stages: Vec<LedgerStage>,
    /// `W2^2(mu, nu) / 2`
    pub total_left: f64,
    /// `total_left - sum(D_n + lambda_n W1_n) - W2^2(mu, nu_N) / 2`
    pub residual: f64,
}

impl EnergyLedger {
    /// `W2^2(mu, nu_N) / 2`, the part of the energy not yet resolved.
    pub fn tail(&self) -> f64 {
        self.stages
            .last()
            .map_or(self.total_left, |s| 0.5 * s.w2sq_after)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Multiscale {
    /// `nu_0 = nu, nu_1, ..., nu_N`.
    pub measures: Vec<DiscreteMeasure>,
    pub ledger: EnergyLedger,
}

/// `nu_{n+1} = argmin_rho W2^2(rho, mu) / 2 + lambda_n W1(rho, nu_n)` with
/// `lambda_n = lambda0 / 2^n`.
pub fn multiscale(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    lambda0: f64,
    stages: usize,
    options: &FlowOptions,
) -> Result<Multiscale> {
    let schedule = ScaleSchedule::halving(lambda0, stages)?;
    let mut measures = alloc::vec![nu.clone()];
    let mut rows = Vec::with_capacity(stages);
    let total_w2sq = w2_squared(mu, nu)?;
    let mut w2sq_before = total_w2sq;
    for (n, &lambda) in schedule.values().iter().enumerate() {
        let current = measures.last().expect("nonempty");
        let solution = solve_wrof(mu, current, lambda)?;
        check_budget(&solution.rho, options.atom_budget)?;
        rows.push(LedgerStage {
            n,
            lambda_n: lambda,
            w2sq_before,
            divergence_n: solution.divergence,
            w1_term: lambda * solution.w1_rho_nu,
            w2sq_after: solution.w2sq_mu_rho,
            rate_bound: libm::ldexp(lambda0 * lambda0, -2 * n as i32),
        });
        w2sq_before = solution.w2sq_mu_rho;
        measures.push(solution.rho);
    }

    let total_left = 0.5 * total_w2sq;
    let resolved: f64 = rows.iter().map(|s| s.divergence_n + s.w1_term).sum();
    let tail = rows.last().map_or(total_left, |s| 0.5 * s.w2sq_after);
    let ledger = EnergyLedger {
        lambda0,
        stages: rows,
        total_left,
        residual: total_left - resolved - tail,
    };
    Ok(Multiscale { measures, ledger })
}

/// Magnitude of the energy identity residual.
pub fn check_energy_identity(ledger: &EnergyLedger) -> f64 {
    let resolved: f64 = ledger
        .stages
        .iter()
        .map(|s| s.divergence_n + s.w1_term)
        .sum();
    (ledger.total_left - resolved - ledger.tail()).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn dirac(x: f64) -> DiscreteMeasure {
        DiscreteMeasure::dirac(&[x]).unwrap()
    }

    #[test]
    fn schedules() {
        let h = ScaleSchedule::halving(2.0, 4).unwrap();
        assert_eq!(h.values(), &[2.0, 1.0, 0.5, 0.25]);
        assert_eq!(
            ScaleSchedule::constant(1.0, 0).unwrap_err(),
            Error::EmptySchedule
        );
        assert_eq!(
            ScaleSchedule::custom(vec![1.0, -1.0]).unwrap_err(),
            Error::NonPositiveLambda(-1.0)
        );
    }

    #[test]
    fn regularization_far_pair() {
        let sched = ScaleSchedule::constant(1.0, 5).unwrap();
        let run = iterate_regularization(&dirac(0.0), &dirac(3.0), &sched, &FlowOptions::default())
            .unwrap();
        let w1s: Vec<f64> = run.trace.stages.iter().map(|s| s.w1_to_nu).collect();
        assert_eq!(w1s, vec![3.0, 2.0, 1.0, 0.0, 0.0]);
        let large: Vec<f64> = run.trace.stages.iter().map(|s| s.mass_large_n).collect();
        assert_eq!(large, vec![1.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(run.measures[3], dirac(3.0));
        assert_eq!(run.trace.max_diameter_violation(), 0.0);
    }

    #[test]
    fn regularization_one_big_step() {
        let sched = ScaleSchedule::constant(4.0, 1).unwrap();
        let run = iterate_regularization(&dirac(0.0), &dirac(3.0), &sched, &FlowOptions::default())
            .unwrap();
        assert_eq!(run.measures[1], dirac(3.0));
    }

    #[test]
    fn regularization_early_stop() {
        let sched = ScaleSchedule::constant(1.0, 10).unwrap();
        let opts = FlowOptions {
            early_stop: Some(1e-12),
            ..FlowOptions::default()
        };
        let run = iterate_regularization(&dirac(0.0), &dirac(3.0), &sched, &opts).unwrap();
        assert_eq!(run.trace.stages.len(), 3);
    }

    #[test]
    fn multiscale_hand_example() {
        let run = multiscale(&dirac(4.0), &dirac(0.0), 2.0, 3, &FlowOptions::default()).unwrap();
        assert_eq!(run.measures[1], dirac(2.0));
        assert_eq!(run.measures[2], dirac(3.0));
        assert_eq!(run.measures[3], dirac(3.5));
        let s0 = &run.ledger.stages[0];
        assert_eq!(0.5 * s0.w2sq_before, 8.0);
        assert_eq!(s0.divergence_n, 2.0);
        assert_eq!(s0.w1_term, 4.0);
        assert_eq!(0.5 * s0.w2sq_after, 2.0);
        assert!(run.ledger.stages.iter().all(LedgerStage::rate_holds));
        assert!(check_energy_identity(&run.ledger) < 1e-12);
        assert_eq!(run.ledger.total_left, 8.0);
    }

    #[test]
    fn multiscale_within_reach_keeps_nu() {
        // |mu - nu| <= lambda_n leaves nu_n untouched until the scale drops
        // below the remaining distance.
        let run = multiscale(&dirac(1.0), &dirac(0.0), 2.0, 3, &FlowOptions::default()).unwrap();
        assert_eq!(run.measures[1], dirac(0.0));
        assert_eq!(run.measures[2], dirac(0.0));
        assert_eq!(run.measures[3], dirac(0.5));
        assert_eq!(run.ledger.stages[0].divergence_n, 0.0);
        assert_eq!(run.ledger.stages[0].w1_term, 0.0);
        assert_eq!(check_energy_identity(&run.ledger), 0.0);
    }

    #[test]
    fn atom_budget() {
        let mu = DiscreteMeasure::uniform(vec![vec![0.0], vec![0.1]]).unwrap();
        let nu = DiscreteMeasure::new(vec![vec![5.0], vec![6.0]], vec![0.3, 0.7]).unwrap();
        let opts = FlowOptions {
            atom_budget: 1,
            ..FlowOptions::default()
        };
        let err = multiscale(&mu, &nu, 1.0, 2, &opts).unwrap_err();
        assert!(matches!(err, Error::AtomBudgetExceeded { limit: 1, .. }));
    }
}
