//! Serializable reports for every command.

use serde::Serialize;
use wrof_core::flows::{EnergyLedger, IterationTrace};
use wrof_core::{
    sandwich_bounds, split_masses, DiscreteMeasure, SandwichBounds, SplitMasses, TransportPlan,
    WrofSolution,
};

use crate::error::Result;
use crate::format::{float, to_csv};

#[derive(Debug, Clone, Serialize)]
pub struct PlanSummary {
    pub value: f64,
    pub dual_value: f64,
    pub duality_gap: f64,
    pub marginal_error: f64,
    /// Number of nonzero plan entries.
    pub sparsity: usize,
}

#[derive(Serialize)]
pub struct PlanReport<'a> {
    pub summary: PlanSummary,
    pub plan: &'a TransportPlan,
}

pub fn plan_report<'a>(
    plan: &'a TransportPlan,
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
) -> PlanReport<'a> {
    PlanReport {
        summary: PlanSummary {
            value: plan.value,
            dual_value: plan.dual_value(source, target),
            duality_gap: plan.duality_gap(source, target),
            marginal_error: plan.marginal_error(source, target),
            sparsity: plan.entries.len(),
        },
        plan,
    }
}

impl PlanSummary {
    pub fn line(&self) -> String {
        format!(
            "value {} duality_gap {:e} sparsity {}",
            self.value, self.duality_gap, self.sparsity
        )
    }
}

#[derive(Serialize)]
pub struct WrofReport<'a> {
    pub lambda: f64,
    pub value: f64,
    pub w2sq_mu_rho: f64,
    pub w1_rho_nu: f64,
    pub w2sq_nu_mu: f64,
    pub divergence: f64,
    pub max_displacement: f64,
    pub within_ball: bool,
    pub sandwich: SandwichBounds,
    pub split: SplitMasses,
    pub rho: &'a DiscreteMeasure,
    pub huber_plan: &'a TransportPlan,
}

pub fn wrof_report<'a>(
    sol: &'a WrofSolution,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<WrofReport<'a>> {
    Ok(WrofReport {
        lambda: sol.lambda,
        value: sol.value,
        w2sq_mu_rho: sol.w2sq_mu_rho,
        w1_rho_nu: sol.w1_rho_nu,
        w2sq_nu_mu: sol.w2sq_nu_mu,
        divergence: sol.divergence,
        max_displacement: sol.max_displacement,
        within_ball: sol.within_ball(),
        sandwich: sandwich_bounds(sol, mu, nu)?,
        split: split_masses(&sol.huber_plan, mu, nu, sol.lambda)?,
        rho: &sol.rho,
        huber_plan: &sol.huber_plan,
    })
}

impl WrofReport<'_> {
    pub fn line(&self) -> String {
        format!(
            "value {} divergence {} w1_rho_nu {} max_displacement {}",
            self.value, self.divergence, self.w1_rho_nu, self.max_displacement
        )
    }
}

/// `(displacement, mass)` rows, one per Huber-plan entry, for histograms.
pub fn displacement_csv(sol: &WrofSolution) -> String {
    to_csv(
        &["displacement", "mass"],
        sol.displacements
            .iter()
            .map(|d| vec![float(d.step), float(d.mass)]),
    )
}

pub fn trace_csv(trace: &IterationTrace) -> String {
    to_csv(
        &[
            "n",
            "lambda_n",
            "w1_to_nu",
            "mass_large_n",
            "w1_after",
            "diameter_bound",
        ],
        trace.stages.iter().map(|s| {
            vec![
                s.n.to_string(),
                float(s.lambda_n),
                float(s.w1_to_nu),
                float(s.mass_large_n),
                float(s.w1_after),
                float(s.diameter_bound),
            ]
        }),
    )
}

pub fn ledger_csv(ledger: &EnergyLedger) -> String {
    to_csv(
        &[
            "n",
            "lambda_n",
            "w2sq_before",
            "divergence_n",
            "w1_term",
            "w2sq_after",
            "rate_bound",
        ],
        ledger.stages.iter().map(|s| {
            vec![
                s.n.to_string(),
                float(s.lambda_n),
                float(s.w2sq_before),
                float(s.divergence_n),
                float(s.w1_term),
                float(s.w2sq_after),
                float(s.rate_bound),
            ]
        }),
    )
}

#[derive(Serialize)]
pub struct LedgerReport<'a> {
    #[serde(flatten)]
    pub ledger: &'a EnergyLedger,
    pub tail: f64,
    pub identity_error: f64,
}
