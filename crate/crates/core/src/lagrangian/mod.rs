//! The relaxed problem: per-SBS backhaul capacity constraints moved into the
//! objective with multipliers `λ_i`, the fixed-deployment connection
//! heuristic, and subgradient multiplier updates.

mod assign;
mod path_state;

pub use assign::{assign_connections, assign_with_stage, attach_mas, ban_coverage, AssignOutcome, MaStage};
pub use path_state::{Move, MoveEval, Path, PathState};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, Node, Solution};

/// Nonnegative multipliers, one per SBS site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Multipliers(pub Vec<f64>);

impl Multipliers {
    pub fn zeros(n_sbs: usize) -> Self {
        Self(vec![0.0; n_sbs])
    }

    pub fn validate(&self, n_sbs: usize) -> Result<()> {
        if self.0.len() != n_sbs {
            return Err(Error::InvalidParams(format!("expected {n_sbs} multipliers, got {}", self.0.len())));
        }
        if self.0.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidParams("multipliers must be finite and nonnegative".into()));
        }
        Ok(())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Relaxed objective value with its per-node contributions.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxedValue {
    pub v: f64,
    /// BAN benefits `m_k`.
    pub m: Vec<f64>,
    /// SBS contributions `n_i'`.
    pub n_prime: Vec<f64>,
}

/// Walks up the SBS parents of `i`, returning SBS ancestors (nearest first)
/// and the node at the top of the chain, if any.
fn sbs_ancestors(sol: &Solution, i: usize) -> Result<Vec<usize>> {
    let parents = &sol.plan.sbs_parent;
    let mut out = Vec::new();
    let mut cur = i;
    while let Some(Node::Sbs(p)) = parents[cur] {
        if p == i || out.len() > parents.len() {
            return Err(Error::Integrity(format!("backhaul cycle through sbs {i}")));
        }
        out.push(p);
        cur = p;
    }
    Ok(out)
}

/// `V = S + θM − Σ m_k + Σ n_i' − θ Σ x_jm` using the path-based form of the
/// SBS terms.
pub fn relaxed_objective(sol: &Solution, lambda: &[f64], inst: &Instance) -> Result<RelaxedValue> {
    let n_sbs = inst.n_sbs();
    if lambda.len() != n_sbs {
        return Err(Error::InvalidParams("multiplier length mismatch".into()));
    }
    let mut m = vec![0.0; inst.n_ban()];
    for node in sol.plan.cover.iter().flatten() {
        if let Node::Ban(k) = node {
            m[*k] += 1.0;
        }
    }
    let r = sol.plan.sbs_coverage(n_sbs);
    let mut n_prime = vec![0.0; n_sbs];
    for i in 0..n_sbs {
        let prefix: f64 = sbs_ancestors(sol, i)?.iter().map(|p| lambda[*p]).sum();
        let mut term = (prefix + lambda[i] - 1.0) * r[i] as f64;
        match sol.plan.sbs_parent[i] {
            Some(Node::Ban(k)) => m[k] += lambda[i] * inst.tables.ban_sbs_limit[k][i] as f64,
            Some(Node::Sbs(p)) => term -= lambda[i] * inst.tables.sbs_sbs_limit[p][i] as f64,
            None => {}
        }
        n_prime[i] = term;
    }
    let served = sol.plan.machine_ma.iter().filter(|j| j.is_some()).count() as f64;
    let v = inst.worst_fc() - m.iter().sum::<f64>() + n_prime.iter().sum::<f64>() - inst.theta * served;
    Ok(RelaxedValue { v, m, n_prime })
}

/// The relaxed objective evaluated from the original variables: coverage,
/// routed relay traffic and link limits, without the path substitution.
pub fn relaxed_objective_direct(sol: &Solution, lambda: &[f64], inst: &Instance) -> Result<f64> {
    let flows = crate::model::routing_flows(sol)?;
    let n_sbs = inst.n_sbs();
    let r = sol.plan.sbs_coverage(n_sbs);
    let mut relayed = vec![0u32; n_sbs];
    for flow in &flows {
        for pair in flow.windows(2) {
            if let (Node::Sbs(a), Node::Sbs(_)) = (pair[0], pair[1]) {
                relayed[a] += 1;
            }
        }
    }
    let ban_cov = sol.plan.cover.iter().filter(|c| matches!(c, Some(Node::Ban(_)))).count() as f64;
    let served = sol.plan.machine_ma.iter().filter(|j| j.is_some()).count() as f64;
    let mut v = inst.worst_fc() - ban_cov - inst.theta * served;
    for i in 0..n_sbs {
        let limit = sol.plan.sbs_parent[i].map(|p| inst.link_limit(p, i) as f64).unwrap_or(0.0);
        v += (lambda[i] - 1.0) * r[i] as f64 + lambda[i] * (relayed[i] as f64 - limit);
    }
    Ok(v)
}

/// Violation of each SBS's backhaul capacity constraint: load minus the
/// subarea limit of its incoming link.
pub fn subgradient(sol: &Solution, inst: &Instance) -> Result<Vec<f64>> {
    let loads = sol.plan.sbs_loads()?;
    Ok((0..inst.n_sbs())
        .map(|i| {
            let limit = sol.plan.sbs_parent[i].map(|p| inst.link_limit(p, i)).unwrap_or(0);
            loads[i] as f64 - limit as f64
        })
        .collect())
}

/// Projected subgradient step with the classic Polyak-type step length
/// `step_scale · (upper − lower) / ‖g‖²`.
pub fn subgradient_update(
    lambda: &Multipliers,
    sol: &Solution,
    inst: &Instance,
    best_upper: f64,
    best_lower: f64,
    step_scale: f64,
) -> Result<Multipliers> {
    let g = subgradient(sol, inst)?;
    let norm2: f64 = g.iter().map(|x| x * x).sum();
    if norm2 == 0.0 {
        return Ok(lambda.clone());
    }
    let t = step_scale * (best_upper - best_lower).max(0.0) / norm2;
    Ok(Multipliers(lambda.0.iter().zip(&g).map(|(l, gi)| (l + t * gi).max(0.0)).collect()))
}

/// Like [`subgradient_update`] with an explicit step length.
pub fn subgradient_step(lambda: &Multipliers, sol: &Solution, inst: &Instance, t: f64) -> Result<Multipliers> {
    let g = subgradient(sol, inst)?;
    Ok(Multipliers(lambda.0.iter().zip(&g).map(|(l, gi)| (l + t * gi).max(0.0)).collect()))
}
