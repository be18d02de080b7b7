//! The ε-constraint outer loop: Lagrangian rounds with tabu-solved relaxed
//! problems, lower-bound collection, a two-level nondominated search inside
//! a cost window, and front maintenance.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{max_coverage, max_machines};
use crate::lagrangian::{relaxed_objective, subgradient_update, AssignOutcome, Multipliers};
use crate::model::{
    check_feasibility, cost, dominates, ConnectionPlan, objectives, Deployment, Instance, Node, ObjectiveVector, Solution, TOL,
};
use crate::tabu::{neighborhood, solve_relaxed_with, DeployMove, Evaluator, Level, SearchParams, TabuState};

/// Which relaxed solution seeds the nondominated search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartRule {
    /// The round with the largest relaxed value.
    MaxValue,
    /// The round with the smallest relaxed value.
    MinValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveParams {
    /// Tabu search for the relaxed problem.
    pub search: SearchParams,
    /// Outer and inner iterations of the nondominated search.
    pub nd_t1: usize,
    pub nd_t2: usize,
    /// Lagrangian rounds `N_max,L` per budget.
    pub n_max_l: usize,
    /// Budget decrement `Δc`.
    pub delta_c: f64,
    /// Window width `Δε`; defaults to the largest single-site cost.
    pub delta_eps: Option<f64>,
    pub step_scale: f64,
    /// Non-improving rounds before the step scale is halved.
    pub step_patience: usize,
    pub start_rule: StartRule,
    /// Starting budget; defaults to the cost of every site.
    pub epsilon_0: Option<f64>,
    /// Stop after this many budgets.
    pub max_iterations: Option<usize>,
    /// Trial backhaul forests per candidate when improving coverage by
    /// reparenting SBSs; zero disables it.
    pub polish_budget: usize,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            search: SearchParams::default(),
            nd_t1: 10,
            nd_t2: 12,
            n_max_l: 10,
            delta_c: 1.0,
            delta_eps: None,
            step_scale: 1.0,
            step_patience: 5,
            start_rule: StartRule::MaxValue,
            epsilon_0: None,
            max_iterations: None,
            polish_budget: 64,
        }
    }
}

impl SolveParams {
    /// Search budgets large enough to be near-exhaustive on tiny instances.
    pub fn generous() -> Self {
        Self {
            search: SearchParams { n_t1: 50, n_t2: 50, ..SearchParams::default() },
            nd_t1: 50,
            nd_t2: 50,
            n_max_l: 10,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        if !(self.delta_c > 0.0 && self.delta_c.is_finite()) {
            return Err(Error::InvalidParams("delta_c must be positive".into()));
        }
        if self.delta_eps.is_some_and(|d| !(d >= 0.0 && d.is_finite())) {
            return Err(Error::InvalidParams("delta_eps must be nonnegative".into()));
        }
        if self.n_max_l == 0 || self.nd_t1 == 0 || self.nd_t2 == 0 || self.step_patience == 0 {
            return Err(Error::InvalidParams("round and iteration counts must be positive".into()));
        }
        if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            return Err(Error::InvalidParams("step_scale must be positive".into()));
        }
        if self.epsilon_0.is_some_and(|e| !e.is_finite()) {
            return Err(Error::InvalidParams("epsilon_0 must be finite".into()));
        }
        Ok(())
    }
}

/// A feasible nondominated solution with the budget it was found under.
#[derive(Clone, Debug, PartialEq)]
pub struct FrontEntry {
    pub solution: Solution,
    pub objectives: ObjectiveVector,
    pub epsilon: f64,
}

impl FrontEntry {
    pub fn pair(&self) -> (f64, f64) {
        self.objectives.pair()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub epsilon: f64,
    /// Lower-bound estimate on the best `f_c` with cost at most `epsilon`.
    pub bound: f64,
    /// Largest relaxed incumbent value over the Lagrangian rounds.
    pub relaxed_max: f64,
    #[serde(rename = "heuristic_bound")]
    pub heuristic: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub entries: Vec<BoundEntry>,
    /// True when any bound came from a heuristic inner solve.
    pub heuristic_bound: bool,
}

impl BoundSet {
    pub fn at(&self, epsilon: f64) -> Option<&BoundEntry> {
        self.entries.iter().find(|b| (b.epsilon - epsilon).abs() <= TOL)
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    /// Nondominated entries by increasing cost.
    pub front: Vec<FrontEntry>,
    pub bounds: BoundSet,
    /// Budgets visited, in order.
    pub epsilons: Vec<f64>,
    pub epsilon_0: f64,
    /// Relaxed-objective evaluations across all tabu searches.
    pub relaxed_evaluations: usize,
    /// Distinct deployments repaired into feasible candidates.
    pub candidate_evaluations: usize,
}

/// Next budget: the cost of the best solution found within `epsilon`
/// minus `delta_c`, or `epsilon - delta_c` when there is none.
pub fn update_epsilon(best_cost: Option<f64>, epsilon: f64, delta_c: f64) -> f64 {
    best_cost.map_or(epsilon, |c| c.min(epsilon)) - delta_c
}

/// Turns a connection-heuristic outcome into a feasible solution: SBSs or
/// MAs without a backhaul parent are closed, coverage is re-solved exactly
/// for the resulting backhaul forest (respecting every link limit), machine
/// assignments likewise when rates are uniform, and stations that end up
/// serving nothing are closed.
pub fn repair(outcome: &AssignOutcome, inst: &Instance, polish_budget: usize) -> Solution {
    let mut sol = outcome.solution.clone();
    let dep = &mut sol.deployment;
    let plan = &mut sol.plan;
    if polish_budget > 0 {
        polish_forest(inst, dep, plan, polish_budget);
    }
    for i in 0..inst.n_sbs() {
        if dep.y[i] && plan.sbs_parent[i].is_none() {
            dep.y[i] = false;
        }
    }
    for j in 0..inst.n_ma() {
        if dep.w[j] && plan.ma_parent[j].is_none() {
            dep.w[j] = false;
            for m in plan.machine_ma.iter_mut().filter(|m| **m == Some(j)) {
                *m = None;
            }
        }
    }
    let (cover, _) = max_coverage(inst, dep, &plan.sbs_parent);
    plan.cover = cover;
    let caps: Option<Vec<usize>> =
        (0..inst.n_ma()).map(|j| plan.ma_parent[j].map_or(Some(0), |k| inst.ma_machine_cap(k, j))).collect();
    if let Some(caps) = caps {
        plan.machine_ma = max_machines(inst, &caps).0;
    }

    loop {
        let mut changed = false;
        let r = plan.sbs_coverage(inst.n_sbs());
        for i in 0..inst.n_sbs() {
            let has_child = plan.sbs_parent.contains(&Some(Node::Sbs(i)));
            if dep.y[i] && r[i] == 0 && !has_child {
                dep.y[i] = false;
                plan.sbs_parent[i] = None;
                changed = true;
            }
        }
        for j in 0..inst.n_ma() {
            if dep.w[j] && !plan.machine_ma.contains(&Some(j)) {
                dep.w[j] = false;
                plan.ma_parent[j] = None;
                changed = true;
            }
        }
        for k in 0..inst.n_ban() {
            let used = plan.cover.contains(&Some(Node::Ban(k)))
                || plan.sbs_parent.contains(&Some(Node::Ban(k)))
                || plan.ma_parent.contains(&Some(k));
            if dep.z[k] && !used {
                dep.z[k] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    sol
}

/// Hop count of every SBS whose parent chain reaches a BAN, or `None`
/// when the parents contain a cycle.
fn hop_counts(parents: &[Option<Node>]) -> Option<Vec<Option<usize>>> {
    let n = parents.len();
    let mut hops: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    for start in 0..n {
        let mut chain = Vec::new();
        let mut cur = start;
        let base = loop {
            if done[cur] {
                break hops[cur];
            }
            if chain.contains(&cur) {
                return None;
            }
            chain.push(cur);
            match parents[cur] {
                Some(Node::Ban(_)) => break Some(0),
                Some(Node::Sbs(p)) => cur = p,
                None => break None,
            }
        };
        for (depth, c) in chain.iter().rev().enumerate() {
            hops[*c] = base.map(|b| b + depth + 1);
            done[*c] = true;
        }
    }
    Some(hops)
}

fn station_options(dep: &Deployment) -> Vec<Node> {
    dep.bans().map(Node::Ban).chain(dep.sbss().map(Node::Sbs)).collect()
}

/// Number of subareas within reach of a deployed BAN or of a deployed SBS
/// that has at least one possible backhaul parent.
fn coverage_ceiling(inst: &Instance, dep: &Deployment) -> u32 {
    let options = station_options(dep);
    let mut reachable = vec![false; inst.n_subareas()];
    for node in &options {
        let linked = match node {
            Node::Ban(_) => true,
            Node::Sbs(i) => options.iter().any(|p| inst.link_exists(*p, *i)),
        };
        if linked {
            for s in inst.station_reach(*node) {
                reachable[*s as usize] = true;
            }
        }
    }
    reachable.iter().filter(|r| **r).count() as u32
}

/// First-improvement reparenting of deployed SBSs, keeping the forest
/// within hop and slot limits, while the exact coverage count improves.
/// At most `budget` trial forests are evaluated.
fn polish_forest(inst: &Instance, dep: &Deployment, plan: &mut ConnectionPlan, budget: usize) {
    let n_b = inst.scenario.n_b as usize;
    let mut slots = vec![0usize; inst.n_ban()];
    for k in plan.ma_parent.iter().flatten() {
        slots[*k] += 1;
    }
    let mut parents = plan.sbs_parent.clone();
    let mut best = max_coverage(inst, dep, &parents).1;
    let mut left = budget;
    let options = station_options(dep);
    let ceiling = coverage_ceiling(inst, dep);
    let mut improved = true;
    while improved && left > 0 && best < ceiling {
        improved = false;
        for i in dep.sbss() {
            for &p in &options {
                if left == 0 || best >= ceiling {
                    break;
                }
                if parents[i] == Some(p) || !inst.link_exists(p, i) {
                    continue;
                }
                let mut trial = parents.clone();
                trial[i] = Some(p);
                let Some(hops) = hop_counts(&trial) else { continue };
                if hops.iter().any(|h| h.is_some_and(|h| h > inst.hop_limit())) {
                    continue;
                }
                let mut used = slots.clone();
                for q in trial.iter().flatten() {
                    if let Node::Ban(k) = q {
                        used[*k] += 1;
                    }
                }
                if used.iter().any(|u| *u > n_b) {
                    continue;
                }
                left -= 1;
                let (_, covered) = max_coverage(inst, dep, &trial);
                if covered > best {
                    best = covered;
                    parents = trial;
                    improved = true;
                    if best == ceiling {
                        break;
                    }
                }
            }
        }
    }
    plan.sbs_parent = parents;
}

/// The global nondominated set on `(f1, f_c)`.
#[derive(Clone, Debug, Default)]
pub struct Front {
    entries: Vec<FrontEntry>,
}

impl Front {
    /// Inserts `entry` unless an existing entry dominates or equals it;
    /// entries it dominates are removed. Returns whether it was inserted.
    pub fn merge(&mut self, entry: FrontEntry) -> bool {
        let p = entry.pair();
        if self.entries.iter().any(|e| dominates(e.pair(), p) || e.pair() == p) {
            return false;
        }
        self.entries.retain(|e| !dominates(p, e.pair()));
        let at = self.entries.partition_point(|e| e.objectives.f1 < p.0);
        self.entries.insert(at, entry);
        true
    }

    pub fn entries(&self) -> &[FrontEntry] {
        &self.entries
    }

    /// Best `f_c` over entries costing at most `epsilon`.
    pub fn best_within(&self, epsilon: f64) -> Option<&FrontEntry> {
        self.entries.iter().filter(|e| e.objectives.f1 <= epsilon + TOL).min_by(|a, b| {
            a.objectives.fc.total_cmp(&b.objectives.fc).then(a.objectives.f1.total_cmp(&b.objectives.f1))
        })
    }

    pub fn into_entries(self) -> Vec<FrontEntry> {
        self.entries
    }
}

/// Memoized feasible-candidate evaluation for one budget.
struct Candidates<'e, 'a> {
    eval: &'e mut Evaluator<'a>,
    seen: HashMap<Deployment, ObjectiveVector>,
    repaired: usize,
    polish_budget: usize,
}

impl Candidates<'_, '_> {
    /// Objectives of the repaired version of `dep`; newly seen candidates
    /// are merged into `front`.
    fn score(&mut self, dep: &Deployment, epsilon: f64, front: &mut Front) -> ObjectiveVector {
        if let Some(o) = self.seen.get(dep) {
            return *o;
        }
        let inst = self.eval.instance();
        let out = self.eval.outcome(dep);
        let mut sol = repair(&out, inst, 0);
        let mut obj = objectives(&sol, inst);
        if self.polish_budget > 0 {
            let ceiling = coverage_ceiling(inst, &out.solution.deployment);
            let reachable_fc = (inst.n_subareas() as u32).saturating_sub(ceiling) as f64 + inst.theta * obj.f3 as f64;
            let hopeless = front.entries().iter().any(|e| e.objectives.f1 <= obj.f1 && e.objectives.fc <= reachable_fc);
            if obj.f2 + ceiling > inst.n_subareas() as u32 && !hopeless {
                sol = repair(&out, inst, self.polish_budget);
                obj = objectives(&sol, inst);
            }
        }
        self.repaired += 1;
        if check_feasibility(&sol, inst, None).is_empty() {
            let entry = FrontEntry { solution: sol, objectives: obj, epsilon };
            front.merge(entry);
        } else {
            debug_assert!(false, "repair produced an infeasible solution");
        }
        self.seen.insert(dep.clone(), obj);
        obj
    }
}

struct RoundRecord {
    lambda: Vec<f64>,
    value: f64,
    deployment: Deployment,
}

/// Traces the cost/coverage Pareto front with the ε-constraint method,
/// returning the nondominated solutions found and per-budget lower bounds.
pub fn solve(inst: &Instance, params: &SolveParams) -> Result<SolveOutcome> {
    params.validate()?;
    let sc = &inst.scenario;
    let epsilon_0 = params.epsilon_0.unwrap_or_else(|| sc.total_cost());
    let delta_eps = params.delta_eps.unwrap_or_else(|| sc.max_site_cost());
    let min_ban = sc.min_ban_cost();

    let mut front = Front::default();
    let empty = Solution::empty(inst);
    front.merge(FrontEntry { objectives: objectives(&empty, inst), solution: empty, epsilon: epsilon_0 });

    let mut eval = Evaluator::new(inst, &vec![0.0; inst.n_sbs()]);
    let mut relaxed_evaluations = 0;
    let mut candidate_evaluations = 0;
    let mut epsilons = Vec::new();
    let mut rounds_per_eps: Vec<(f64, Vec<RoundRecord>)> = Vec::new();
    let mut epsilon = epsilon_0;

    while min_ban.is_some_and(|m| epsilon >= m - TOL) {
        if params.max_iterations.is_some_and(|n| epsilons.len() >= n) {
            break;
        }
        epsilons.push(epsilon);

        let mut lambda = Multipliers::zeros(inst.n_sbs());
        let mut rounds: Vec<RoundRecord> = Vec::new();
        let mut scale = params.step_scale;
        let mut best_v = f64::NEG_INFINITY;
        let mut stall = 0;
        for t_l in 0..params.n_max_l {
            eval.set_lambda(lambda.as_slice());
            let search = SearchParams { seed: params.search.seed.wrapping_add(t_l as u64), ..params.search.clone() };
            let out = solve_relaxed_with(&mut eval, epsilon, &search, None)?;
            relaxed_evaluations += out.evaluations;
            rounds.push(RoundRecord {
                lambda: lambda.0.clone(),
                value: out.value,
                deployment: out.solution.deployment.clone(),
            });
            if out.value > best_v + TOL {
                best_v = out.value;
                stall = 0;
            } else {
                stall += 1;
                if stall >= params.step_patience {
                    scale /= 2.0;
                    stall = 0;
                }
            }
            let upper = front.best_within(epsilon).map_or(inst.worst_fc(), |e| e.objectives.fc);
            let gap_floor = 1e-3 * upper.abs().max(1.0);
            let target = out.value.min(upper - gap_floor);
            lambda = subgradient_update(&lambda, &out.solution, inst, upper, target, scale)?;
        }

        let pick = match params.start_rule {
            StartRule::MaxValue => rounds.iter().enumerate().max_by(|a, b| a.1.value.total_cmp(&b.1.value).then(b.0.cmp(&a.0))),
            StartRule::MinValue => rounds.iter().enumerate().min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0))),
        }
        .map(|(n, _)| n)
        .expect("at least one round");
        eval.set_lambda(&rounds[pick].lambda);
        let start = rounds[pick].deployment.clone();

        let mut cands = Candidates { eval: &mut eval, seen: HashMap::new(), repaired: 0, polish_budget: params.polish_budget };
        nondominated_search(&mut cands, inst, params, epsilon, delta_eps, start, &mut front);
        candidate_evaluations += cands.repaired;

        rounds_per_eps.push((epsilon, rounds));
        let best = front.best_within(epsilon).map(|e| e.objectives.f1);
        let next = update_epsilon(best, epsilon, params.delta_c);
        debug_assert!(next < epsilon);
        epsilon = next;
    }

    let bounds = tighten_bounds(inst, &front, &rounds_per_eps)?;
    Ok(SolveOutcome {
        front: front.into_entries(),
        bounds,
        epsilons,
        epsilon_0,
        relaxed_evaluations,
        candidate_evaluations,
    })
}

/// Per budget, each round's bound is the smallest relaxed value known under
/// its multipliers: the tabu incumbent or any feasible front entry within
/// the budget. The reported bound is the largest over rounds.
fn tighten_bounds(inst: &Instance, front: &Front, rounds: &[(f64, Vec<RoundRecord>)]) -> Result<BoundSet> {
    let mut set = BoundSet { entries: Vec::new(), heuristic_bound: !rounds.is_empty() };
    for (eps, recs) in rounds {
        let within: Vec<&FrontEntry> = front.entries().iter().filter(|e| e.objectives.f1 <= eps + TOL).collect();
        let mut bound = f64::NEG_INFINITY;
        let mut relaxed_max = f64::NEG_INFINITY;
        for r in recs {
            let mut v = r.value;
            for e in &within {
                v = v.min(relaxed_objective(&e.solution, &r.lambda, inst)?.v);
            }
            bound = bound.max(v);
            relaxed_max = relaxed_max.max(r.value);
        }
        set.entries.push(BoundEntry { epsilon: *eps, bound, relaxed_max, heuristic: true });
    }
    Ok(set)
}

#[allow(clippy::too_many_arguments)]
fn nondominated_search(
    cands: &mut Candidates<'_, '_>,
    inst: &Instance,
    params: &SolveParams,
    epsilon: f64,
    delta_eps: f64,
    start: Deployment,
    front: &mut Front,
) {
    let lo = epsilon - delta_eps;
    let mut tabu = TabuState::new(inst);
    let mut dep = start;
    cands.score(&dep, epsilon, front);
    let mut inner_clock = 0;
    for t1 in 0..params.nd_t1 {
        if let Some((mv, next)) = window_step(cands, &dep, Level::Ban, epsilon, lo, front, &tabu, t1) {
            tabu.forbid(&mv, t1, params.search.tenure_1);
            dep = next;
        }
        for _ in 0..params.nd_t2 {
            if let Some((mv, next)) = window_step(cands, &dep, Level::SbsMa, epsilon, lo, front, &tabu, inner_clock) {
                tabu.forbid(&mv, inner_clock, params.search.tenure_2);
                dep = next;
            }
            inner_clock += 1;
        }
    }
}

/// Scores the neighborhood and picks the best non-tabu candidate by `f_c`
/// inside the window, falling back to the whole budget-feasible
/// neighborhood when the window is empty.
#[allow(clippy::too_many_arguments)]
fn window_step(
    cands: &mut Candidates<'_, '_>,
    dep: &Deployment,
    level: Level,
    epsilon: f64,
    lo: f64,
    front: &mut Front,
    tabu: &TabuState,
    clock: usize,
) -> Option<(DeployMove, Deployment)> {
    let inst = cands.eval.instance();
    let mut in_window: Option<(f64, f64, usize)> = None;
    let mut fallback: Option<(f64, f64, usize)> = None;
    let moves = neighborhood(dep, level, epsilon, inst);
    let mut next = Vec::with_capacity(moves.len());
    for (n, mv) in moves.iter().enumerate() {
        let d = mv.apply(dep);
        let obj = cands.score(&d, epsilon, front);
        let f1 = cost(&d, &inst.scenario);
        next.push(d);
        if tabu.is_tabu(mv, clock) {
            continue;
        }
        let key = (obj.fc, f1, n);
        let better = |cur: &Option<(f64, f64, usize)>| cur.is_none_or(|(fc, c, _)| obj.fc < fc || (obj.fc == fc && f1 < c));
        if f1 >= lo - TOL {
            if better(&in_window) {
                in_window = Some(key);
            }
        } else if better(&fallback) {
            fallback = Some(key);
        }
    }
    let (_, _, n) = in_window.or(fallback)?;
    Some((moves[n], next.swap_remove(n)))
}

/// One row of the gap table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub epsilon: f64,
    pub best_fc: f64,
    pub bound: f64,
    /// `best_fc / bound`, absent when the bound is not positive.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub rows: Vec<GapRow>,
    pub max_ratio: Option<f64>,
    /// Budgets whose bound was not positive.
    pub omitted: Vec<f64>,
    pub heuristic_bound: bool,
}

/// Ratio of the best feasible `f_c` within each budget to its bound.
pub fn gap_report(front: &[FrontEntry], bounds: &BoundSet) -> GapReport {
    let points: Vec<(f64, f64)> = front.iter().map(FrontEntry::pair).collect();
    gap_table(&points, bounds)
}

/// [`gap_report`] over bare `(f1, f_c)` points.
pub fn gap_table(points: &[(f64, f64)], bounds: &BoundSet) -> GapReport {
    let mut rows = Vec::new();
    let mut omitted = Vec::new();
    for b in &bounds.entries {
        let best = points.iter().filter(|p| p.0 <= b.epsilon + TOL).map(|p| p.1).reduce(f64::min);
        let Some(best_fc) = best else { continue };
        let ratio = if b.bound > 0.0 {
            Some(best_fc / b.bound)
        } else {
            omitted.push(b.epsilon);
            None
        };
        rows.push(GapRow { epsilon: b.epsilon, best_fc, bound: b.bound, ratio });
    }
    let max_ratio = rows.iter().filter_map(|r| r.ratio).reduce(f64::max);
    GapReport { rows, max_ratio, omitted, heuristic_bound: bounds.heuristic_bound }
}

/// One line of the front CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontRow {
    pub epsilon: f64,
    pub f1: f64,
    pub f2: u32,
    pub f3: u32,
    pub fc: f64,
    pub bound: Option<f64>,
    pub heuristic_bound: bool,
    pub solution_file: String,
    pub source: String,
}

pub fn front_rows(front: &[FrontEntry], bounds: &BoundSet, files: &[String], source: &str) -> Vec<FrontRow> {
    front
        .iter()
        .enumerate()
        .map(|(n, e)| FrontRow {
            epsilon: e.epsilon,
            f1: e.objectives.f1,
            f2: e.objectives.f2,
            f3: e.objectives.f3,
            fc: e.objectives.fc,
            bound: bounds.at(e.epsilon).map(|b| b.bound),
            heuristic_bound: bounds.heuristic_bound,
            solution_file: files.get(n).cloned().unwrap_or_default(),
            source: source.to_string(),
        })
        .collect()
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: serde::de::DeserializeOwned, R: std::io::Read>(input: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::assign_connections;
    use crate::oracle::Oracle;
    use crate::scenario::{generate_scenario, GenParams, Point};
    use crate::testutil::tiny;

    fn quick() -> SolveParams {
        SolveParams {
            search: SearchParams { n_t1: 4, n_t2: 6, tenure_1: 2, tenure_2: 3, ..Default::default() },
            nd_t1: 4,
            nd_t2: 6,
            n_max_l: 3,
            ..Default::default()
        }
    }

    #[test]
    fn epsilon_update_examples() {
        assert_eq!(update_epsilon(Some(30.0), 40.0, 1.0), 29.0);
        assert_eq!(update_epsilon(None, 40.0, 1.0), 39.0);
        assert_eq!(update_epsilon(Some(32.0), 40.0, 0.5), 31.5);
    }

    #[test]
    fn gap_examples() {
        let inst = tiny(1, 1, 0, 0, 0);
        let mk = |f1: f64, fc: f64| FrontEntry {
            solution: Solution::empty(&inst),
            objectives: ObjectiveVector { f1, f2: fc as u32, f3: 0, fc },
            epsilon: f1,
        };
        let b = |epsilon: f64, bound: f64| BoundEntry { epsilon, bound, relaxed_max: bound, heuristic: true };
        let bounds = BoundSet { entries: vec![b(10.0, 100.0), b(20.0, 50.0), b(5.0, 0.0)], heuristic_bound: true };
        let front = vec![mk(10.0, 199.0), mk(20.0, 50.0)];
        let r = gap_report(&front, &bounds);
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0].ratio, Some(1.99));
        assert_eq!(r.rows[1].ratio, Some(1.0));
        assert_eq!(r.max_ratio, Some(1.99));
        let empty: Vec<FrontEntry> = Vec::new();
        assert!(gap_report(&empty, &bounds).rows.is_empty());
        let zero = BoundSet { entries: vec![b(12.0, 0.0)], heuristic_bound: true };
        assert_eq!(gap_report(&front, &zero).omitted, vec![12.0]);
    }

    #[test]
    fn front_merge_keeps_nondominated() {
        let inst = tiny(1, 1, 0, 0, 0);
        let mk = |f1: f64, fc: f64| FrontEntry {
            solution: Solution::empty(&inst),
            objectives: ObjectiveVector { f1, f2: 0, f3: 0, fc },
            epsilon: 0.0,
        };
        let mut f = Front::default();
        assert!(f.merge(mk(0.0, 10.0)));
        assert!(f.merge(mk(5.0, 6.0)));
        assert!(!f.merge(mk(6.0, 6.0)));
        assert!(!f.merge(mk(5.0, 6.0)));
        assert!(f.merge(mk(4.0, 6.0)));
        assert_eq!(f.entries().iter().map(|e| e.pair()).collect::<Vec<_>>(), vec![(0.0, 10.0), (4.0, 6.0)]);
    }

    #[test]
    fn single_ban_instance() {
        let mut p = GenParams::tiny(0, 0, 0, 0);
        p.explicit_ban_sites = Some(vec![Point::new(25.0, 25.0)]);
        p.explicit_sbs_sites = Some(vec![]);
        p.explicit_ma_sites = Some(vec![]);
        let inst = Instance::new(generate_scenario(&p, 0).unwrap());
        let out = solve(&inst, &quick()).unwrap();
        let k = inst.tables.ban_reach[0].len() as f64;
        let pts: Vec<(f64, f64)> = out.front.iter().map(|e| e.pair()).collect();
        assert_eq!(pts, vec![(0.0, inst.worst_fc()), (10.0, inst.worst_fc() - k)]);
        assert_eq!(out.epsilons, vec![10.0]);
    }

    #[test]
    fn epsilon_sequence_and_front_invariants() {
        for seed in 0..4 {
            let inst = tiny(seed, 2, 4, 2, 20);
            let params = quick();
            let out = solve(&inst, &params).unwrap();
            assert!(out.epsilons.windows(2).all(|w| w[1] < w[0]));
            let min_ban = inst.scenario.min_ban_cost().unwrap();
            assert!(out.epsilons.len() as f64 <= (out.epsilon_0 - min_ban) / params.delta_c + 1.0);
            for a in &out.front {
                assert!(check_feasibility(&a.solution, &inst, None).is_empty());
                assert_eq!(objectives(&a.solution, &inst), a.objectives);
                for b in &out.front {
                    assert!(!dominates(a.pair(), b.pair()));
                }
            }
            assert!(out.front.windows(2).all(|w| w[0].objectives.f1 < w[1].objectives.f1 && w[0].objectives.fc > w[1].objectives.fc));
            for b in &out.bounds.entries {
                let best = out.front.iter().filter(|e| e.objectives.f1 <= b.epsilon + TOL).map(|e| e.objectives.fc).fold(f64::INFINITY, f64::min);
                assert!(b.bound <= best + 1e-9);
            }
        }
    }

    #[test]
    fn front_points_are_never_better_than_exact() {
        for seed in 0..4 {
            let inst = tiny(seed, 2, 3, 2, 20);
            let oracle = Oracle::new(&inst).unwrap();
            let out = solve(&inst, &quick()).unwrap();
            for e in &out.front {
                assert!(oracle.optimum(e.objectives.f1).fc <= e.objectives.fc + 1e-9);
            }
        }
    }

    #[test]
    fn repair_output_is_feasible() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(8);
        for seed in 0..30 {
            let inst = tiny(seed, 3, 5, 3, 30);
            let dep = crate::testutil::random_deployment(&inst, &mut rng);
            let lambda: Vec<f64> = (0..inst.n_sbs()).map(|i| (i as f64) * 0.3).collect();
            let sol = repair(&assign_connections(&dep, &lambda, &inst), &inst, 64);
            assert!(check_feasibility(&sol, &inst, None).is_empty(), "seed {seed}");
            assert!(cost(&sol.deployment, &inst.scenario) <= cost(&dep, &inst.scenario));
        }
    }

    #[test]
    fn front_csv_round_trip() {
        let inst = tiny(2, 2, 2, 1, 10);
        let out = solve(&inst, &quick()).unwrap();
        let files: Vec<String> = (0..out.front.len()).map(|n| format!("solution_{n:03}.json")).collect();
        let rows = front_rows(&out.front, &out.bounds, &files, "heuristic");
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("epsilon,f1,f2,f3,fc,bound,heuristic_bound,solution_file,source"));
        let back: Vec<FrontRow> = read_csv(&buf[..]).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn deterministic() {
        let inst = tiny(6, 2, 4, 2, 20);
        let a = solve(&inst, &quick()).unwrap();
        let b = solve(&inst, &quick()).unwrap();
        assert_eq!(a.front, b.front);
        assert_eq!(a.bounds, b.bounds);
    }

    #[test]
    fn theta_zero_makes_fc_equal_f2() {
        let inst = tiny(3, 2, 3, 2, 20).with_theta(0.0);
        let out = solve(&inst, &quick()).unwrap();
        assert!(out.front.iter().all(|e| e.objectives.fc == e.objectives.f2 as f64));
    }
}
