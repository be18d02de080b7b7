//! Exhaustive solvers for tiny instances: exact budgeted optima, exact
//! relaxed optima and exact Pareto fronts.
//!
//! Human-type and machine-type coverage interact only through BAN slots, so
//! each deployment is solved as two independent enumerations (backhaul
//! forests for SBSs, parent choices for MAs) joined on slot usage. For a
//! fixed forest the best coverage is a max-flow problem.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{max_coverage, max_machines};
use crate::model::{cost, dominates, objectives, ConnectionPlan, Deployment, Instance, Node, Solution, TOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleLimits {
    pub max_ban: usize,
    pub max_sbs: usize,
    pub max_ma: usize,
    pub max_subareas: usize,
    pub max_machines: usize,
    /// Hard cap on enumerated forests and parent assignments.
    pub max_states: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self { max_ban: 3, max_sbs: 5, max_ma: 3, max_subareas: 25, max_machines: 30, max_states: 100_000_000 }
    }
}

impl OracleLimits {
    pub fn check(&self, inst: &Instance) -> Result<()> {
        let over = |what: &str, n: usize, max: usize| {
            if n > max {
                Err(Error::OracleRefused(format!("{n} {what} exceeds the limit of {max}")))
            } else {
                Ok(())
            }
        };
        over("BAN sites", inst.n_ban(), self.max_ban)?;
        over("SBS sites", inst.n_sbs(), self.max_sbs)?;
        over("MA sites", inst.n_ma(), self.max_ma)?;
        over("subareas", inst.n_subareas(), self.max_subareas)?;
        over("machines", inst.n_machines(), self.max_machines)?;
        if inst.n_machines() > 0 && inst.n_ma() > 0 && inst.ma_machine_cap(0, 0).is_none() {
            return Err(Error::OracleRefused("machine rates must be uniform".into()));
        }
        Ok(())
    }
}

/// One nondominated point of the exact front with a witness solution.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactPoint {
    pub f1: f64,
    pub f2: u32,
    pub f3: u32,
    pub fc: f64,
    pub solution: Solution,
}

impl ExactPoint {
    pub fn pair(&self) -> (f64, f64) {
        (self.f1, self.fc)
    }
}

type Slots = Vec<u32>;

#[derive(Clone, Debug)]
struct Forest {
    parents: Vec<Option<Node>>,
    slots: Slots,
    /// Best number of covered subareas under link limits.
    covered: u32,
}

#[derive(Clone, Debug)]
struct MaChoice {
    parents: Vec<Option<usize>>,
    slots: Slots,
    served: u32,
}

/// Best deployment-level outcome under the original constraints.
#[derive(Clone, Copy, Debug)]
struct DeploymentBest {
    f1: f64,
    f2: u32,
    f3: u32,
    fc: f64,
    forest: usize,
    ma: usize,
}

fn mask_to_bits(mask: u32, n: usize) -> Vec<bool> {
    (0..n).map(|b| mask & (1 << b) != 0).collect()
}

fn fits(a: &Slots, b: &Slots, n_b: u32) -> bool {
    a.iter().zip(b).all(|(x, y)| x + y <= n_b)
}

/// Precomputed exhaustive tables for one instance.
pub struct Oracle<'a> {
    inst: &'a Instance,
    forests: HashMap<(u32, u32), Vec<Forest>>,
    mas: HashMap<(u32, u32), Vec<MaChoice>>,
    best: Vec<(Deployment, Option<DeploymentBest>)>,
    /// Forests and MA parent assignments enumerated.
    pub states: u64,
}

impl<'a> Oracle<'a> {
    pub fn new(inst: &'a Instance) -> Result<Self> {
        Self::with_limits(inst, &OracleLimits::default())
    }

    pub fn with_limits(inst: &'a Instance, limits: &OracleLimits) -> Result<Self> {
        limits.check(inst)?;
        let (nb, ns, nm) = (inst.n_ban(), inst.n_sbs(), inst.n_ma());
        let y_masks: Vec<u32> = if inst.sbs_allowed() { (0..1u32 << ns).collect() } else { vec![0] };
        let mut oracle = Self { inst, forests: HashMap::new(), mas: HashMap::new(), best: Vec::new(), states: 0 };

        let mut bound = 0u64;
        for z in 0..1u32 << nb {
            for y in &y_masks {
                bound = bound.saturating_add(oracle.forest_bound(z, *y));
            }
            bound = bound.saturating_add((z.count_ones() as u64 + 1).saturating_pow(nm as u32) << nm);
        }
        if bound > limits.max_states {
            return Err(Error::OracleRefused(format!("{bound} enumeration states exceed {}", limits.max_states)));
        }

        for z in 0..1u32 << nb {
            for y in &y_masks {
                let forests = oracle.enumerate_forests(z, *y);
                oracle.forests.insert((z, *y), forests);
            }
            for w in 0..1u32 << nm {
                let choices = oracle.enumerate_mas(z, w);
                oracle.mas.insert((z, w), choices);
            }
        }
        for z in 0..1u32 << nb {
            for y in &y_masks {
                for w in 0..1u32 << nm {
                    let dep = Deployment { z: mask_to_bits(z, nb), y: mask_to_bits(*y, ns), w: mask_to_bits(w, nm) };
                    let best = oracle.best_for(z, *y, w, &dep);
                    oracle.best.push((dep, best));
                }
            }
        }
        Ok(oracle)
    }

    fn parent_options(&self, z: u32, y: u32, i: usize) -> Vec<Node> {
        let inst = self.inst;
        let mut opts: Vec<Node> =
            (0..inst.n_ban()).filter(|k| z & (1 << k) != 0).map(Node::Ban).filter(|n| inst.link_exists(*n, i)).collect();
        opts.extend((0..inst.n_sbs()).filter(|p| y & (1 << p) != 0).map(Node::Sbs).filter(|n| inst.link_exists(*n, i)));
        opts
    }

    fn forest_bound(&self, z: u32, y: u32) -> u64 {
        (0..self.inst.n_sbs())
            .filter(|i| y & (1 << i) != 0)
            .map(|i| self.parent_options(z, y, i).len() as u64)
            .fold(1u64, |acc, n| acc.saturating_mul(n))
    }

    fn enumerate_forests(&mut self, z: u32, y: u32) -> Vec<Forest> {
        let inst = self.inst;
        let ns = inst.n_sbs();
        let members: Vec<usize> = (0..ns).filter(|i| y & (1 << i) != 0).collect();
        let options: Vec<Vec<Node>> = members.iter().map(|i| self.parent_options(z, y, *i)).collect();
        let dep = Deployment { z: mask_to_bits(z, inst.n_ban()), y: mask_to_bits(y, ns), w: vec![false; inst.n_ma()] };
        let mut out = Vec::new();
        let mut parents = vec![None; ns];
        self.forest_rec(&members, &options, 0, &mut parents, &dep, &mut out);
        out
    }

    /// Assigns parents in index order; once all are known, cycles and
    /// over-long chains are rejected.
    fn forest_rec(
        &mut self,
        members: &[usize],
        options: &[Vec<Node>],
        at: usize,
        parents: &mut Vec<Option<Node>>,
        dep: &Deployment,
        out: &mut Vec<Forest>,
    ) {
        if at == members.len() {
            self.states += 1;
            let hop_limit = self.inst.hop_limit();
            for i in members {
                let mut hops = 0;
                let mut cur = *i;
                loop {
                    hops += 1;
                    if hops > hop_limit {
                        return;
                    }
                    match parents[cur] {
                        Some(Node::Ban(_)) => break,
                        Some(Node::Sbs(p)) => cur = p,
                        None => return,
                    }
                }
            }
            let mut slots = vec![0u32; self.inst.n_ban()];
            for i in members {
                if let Some(Node::Ban(k)) = parents[*i] {
                    slots[k] += 1;
                }
            }
            if slots.iter().any(|s| *s > self.inst.scenario.n_b) {
                return;
            }
            let (_, covered) = max_coverage(self.inst, dep, parents);
            out.push(Forest { parents: parents.clone(), slots, covered });
            return;
        }
        let i = members[at];
        for opt in &options[at] {
            parents[i] = Some(*opt);
            self.forest_rec(members, options, at + 1, parents, dep, out);
        }
        parents[i] = None;
    }

    fn enumerate_mas(&mut self, z: u32, w: u32) -> Vec<MaChoice> {
        let inst = self.inst;
        let members: Vec<usize> = (0..inst.n_ma()).filter(|j| w & (1 << j) != 0).collect();
        let options: Vec<Vec<usize>> = members
            .iter()
            .map(|j| (0..inst.n_ban()).filter(|k| z & (1 << k) != 0 && inst.ma_link_exists(*k, *j)).collect())
            .collect();
        let mut out = Vec::new();
        let mut parents = vec![None; inst.n_ma()];
        let mut idx = vec![0usize; members.len()];
        if options.iter().any(|o| o.is_empty()) {
            return out;
        }
        loop {
            self.states += 1;
            for (n, j) in members.iter().enumerate() {
                parents[*j] = Some(options[n][idx[n]]);
            }
            let mut slots = vec![0u32; inst.n_ban()];
            for k in parents.iter().flatten() {
                slots[*k] += 1;
            }
            if slots.iter().all(|s| *s <= inst.scenario.n_b) {
                let caps = self.ma_caps(&parents);
                let (_, served) = max_machines(inst, &caps);
                out.push(MaChoice { parents: parents.clone(), slots, served });
            }
            let mut n = 0;
            loop {
                if n == members.len() {
                    return out;
                }
                idx[n] += 1;
                if idx[n] < options[n].len() {
                    break;
                }
                idx[n] = 0;
                n += 1;
            }
        }
    }

    fn ma_caps(&self, parents: &[Option<usize>]) -> Vec<usize> {
        parents
            .iter()
            .enumerate()
            .map(|(j, k)| k.and_then(|k| self.inst.ma_machine_cap(k, j)).unwrap_or(0))
            .collect()
    }

    fn best_for(&self, z: u32, y: u32, w: u32, dep: &Deployment) -> Option<DeploymentBest> {
        let inst = self.inst;
        let forests = &self.forests[&(z, y)];
        let mas = &self.mas[&(z, w)];
        let n_b = inst.scenario.n_b;
        let f1 = cost(dep, &inst.scenario);
        let mut best: Option<DeploymentBest> = None;
        for (fi, f) in forests.iter().enumerate() {
            for (mi, m) in mas.iter().enumerate() {
                if !fits(&f.slots, &m.slots, n_b) {
                    continue;
                }
                let f2 = inst.n_subareas() as u32 - f.covered;
                let f3 = inst.n_machines() as u32 - m.served;
                let fc = f2 as f64 + inst.theta * f3 as f64;
                if best.is_none_or(|b| fc < b.fc) {
                    best = Some(DeploymentBest { f1, f2, f3, fc, forest: fi, ma: mi });
                }
            }
        }
        best
    }

    fn witness(&self, dep: &Deployment, b: &DeploymentBest) -> Solution {
        let inst = self.inst;
        let key = |bits: &[bool]| bits.iter().enumerate().fold(0u32, |m, (i, on)| if *on { m | 1 << i } else { m });
        let (z, y, w) = (key(&dep.z), key(&dep.y), key(&dep.w));
        let forest = &self.forests[&(z, y)][b.forest];
        let ma = &self.mas[&(z, w)][b.ma];
        let (cover, _) = max_coverage(inst, dep, &forest.parents);
        let (machine_ma, _) = max_machines(inst, &self.ma_caps(&ma.parents));
        let plan = ConnectionPlan {
            cover,
            sbs_parent: forest.parents.clone(),
            ma_parent: ma.parents.clone(),
            machine_ma,
        };
        Solution { deployment: dep.clone(), plan }
    }

    /// The exact nondominated `(f1, f_c)` set, one witness per point, by
    /// increasing cost.
    pub fn front(&self) -> Vec<ExactPoint> {
        let mut pts: Vec<(f64, f64, usize)> = self
            .best
            .iter()
            .enumerate()
            .filter_map(|(n, (_, b))| b.map(|b| (b.f1, b.fc, n)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut out: Vec<ExactPoint> = Vec::new();
        for (f1, fc, n) in pts {
            if out.last().is_some_and(|p| !(fc < p.fc)) {
                continue;
            }
            let (dep, b) = &self.best[n];
            let b = b.expect("filtered");
            out.push(ExactPoint { f1, f2: b.f2, f3: b.f3, fc, solution: self.witness(dep, &b) });
        }
        debug_assert!(out.iter().all(|a| out.iter().all(|b| !dominates(a.pair(), b.pair()))));
        out
    }

    /// Exact optimum of the budgeted problem: least `f_c` with `f1 ≤ ε`.
    pub fn optimum(&self, epsilon: f64) -> ExactPoint {
        let mut best: Option<(f64, f64, usize)> = None;
        for (n, (_, b)) in self.best.iter().enumerate() {
            let Some(b) = b else { continue };
            if b.f1 > epsilon + TOL {
                continue;
            }
            if best.is_none_or(|(fc, f1, _)| b.fc < fc || (b.fc == fc && b.f1 < f1)) {
                best = Some((b.fc, b.f1, n));
            }
        }
        let (_, _, n) = best.expect("the empty deployment is always feasible");
        let (dep, b) = &self.best[n];
        let b = b.expect("feasible");
        ExactPoint { f1: b.f1, f2: b.f2, f3: b.f3, fc: b.fc, solution: self.witness(dep, &b) }
    }

    /// Exact minimum of the relaxed objective over deployments with
    /// `f1 ≤ ε` and all connection structures.
    pub fn relaxed_optimum(&self, lambda: &[f64], epsilon: f64) -> Result<f64> {
        let inst = self.inst;
        if lambda.len() != inst.n_sbs() || lambda.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidParams("multipliers must be nonnegative, one per SBS site".into()));
        }
        let n_b = inst.scenario.n_b;
        let mut htc_cache: HashMap<(u32, u32), Vec<(Slots, f64)>> = HashMap::new();
        let key = |bits: &[bool]| bits.iter().enumerate().fold(0u32, |m, (i, on)| if *on { m | 1 << i } else { m });
        let mut best = f64::INFINITY;
        for (dep, _) in &self.best {
            if cost(dep, &inst.scenario) > epsilon + TOL {
                continue;
            }
            let (z, y, w) = (key(&dep.z), key(&dep.y), key(&dep.w));
            let htc = htc_cache.entry((z, y)).or_insert_with(|| self.relaxed_htc(z, y, lambda));
            for (hs, hv) in htc.iter() {
                for m in &self.mas[&(z, w)] {
                    if !fits(hs, &m.slots, n_b) {
                        continue;
                    }
                    let v = inst.worst_fc() + hv - inst.theta * m.served as f64;
                    if v < best {
                        best = v;
                    }
                }
            }
        }
        Ok(best)
    }

    /// Best relaxed subarea term per BAN-slot usage vector: each subarea
    /// independently takes the cheapest station in range, `-1 + Σ λ` over
    /// the SBSs its traffic crosses, or stays uncovered.
    fn relaxed_htc(&self, z: u32, y: u32, lambda: &[f64]) -> Vec<(Slots, f64)> {
        let inst = self.inst;
        let ns = inst.n_sbs();
        let mut best: HashMap<Slots, f64> = HashMap::new();
        let mut gain = vec![0.0f64; inst.n_subareas()];
        let mut coef = vec![0.0f64; ns];
        for f in &self.forests[&(z, y)] {
            gain.fill(0.0);
            for k in (0..inst.n_ban()).filter(|k| z & (1 << k) != 0) {
                for s in &inst.tables.ban_reach[k] {
                    gain[*s as usize] = -1.0;
                }
            }
            let mut link_term = 0.0;
            for i in (0..ns).filter(|i| y & (1 << i) != 0) {
                let mut c = lambda[i];
                let mut cur = i;
                while let Some(Node::Sbs(p)) = f.parents[cur] {
                    c += lambda[p];
                    cur = p;
                }
                coef[i] = c - 1.0;
                let parent = f.parents[i].expect("forests attach every member");
                link_term -= lambda[i] * inst.link_limit(parent, i) as f64;
                for s in &inst.tables.sbs_reach[i] {
                    let g = &mut gain[*s as usize];
                    if coef[i] < *g {
                        *g = coef[i];
                    }
                }
            }
            let v = gain.iter().sum::<f64>() + link_term;
            let e = best.entry(f.slots.clone()).or_insert(f64::INFINITY);
            if v < *e {
                *e = v;
            }
        }
        best.into_iter().collect()
    }
}

/// Exact Pareto front of a tiny instance.
pub fn exact_front(inst: &Instance) -> Result<Vec<ExactPoint>> {
    Ok(Oracle::new(inst)?.front())
}

/// Exact optimum of the budgeted problem at `epsilon`.
pub fn exact_optimum(inst: &Instance, epsilon: f64) -> Result<ExactPoint> {
    Ok(Oracle::new(inst)?.optimum(epsilon))
}

/// Exact optimum of the relaxed problem at `epsilon` under `lambda`.
pub fn exact_relaxed_optimum(inst: &Instance, lambda: &[f64], epsilon: f64) -> Result<f64> {
    Oracle::new(inst)?.relaxed_optimum(lambda, epsilon)
}

/// Classifies each oracle point against a heuristic front.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agreement {
    /// The heuristic found the same `(f1, f_c)` point.
    Match,
    /// Not found, but some heuristic point is dominated by it.
    Dominated,
    /// Not found and nothing comparable on the heuristic front.
    Missed,
}

pub fn classify(oracle_point: (f64, f64), heuristic: &[(f64, f64)]) -> Agreement {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
    if heuristic.iter().any(|h| close(h.0, oracle_point.0) && close(h.1, oracle_point.1)) {
        Agreement::Match
    } else if heuristic.iter().any(|h| h.0 >= oracle_point.0 - 1e-9 && h.1 >= oracle_point.1 - 1e-9) {
        Agreement::Dominated
    } else {
        Agreement::Missed
    }
}

/// Whether two fronts hold the same `(f1, f_c)` points.
pub fn same_points(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
    let close = |x: &(f64, f64), y: &(f64, f64)| (x.0 - y.0).abs() <= 1e-9 && (x.1 - y.1).abs() <= 1e-9;
    a.len() == b.len() && a.iter().all(|x| b.iter().any(|y| close(x, y))) && b.iter().all(|y| a.iter().any(|x| close(x, y)))
}

/// Objectives of a witness, recomputed from the solution.
pub fn witness_objectives(point: &ExactPoint, inst: &Instance) -> (f64, f64) {
    objectives(&point.solution, inst).pair()
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::lagrangian::assign_connections;
    use crate::model::check_feasibility;
    use crate::scenario::{generate_scenario, GenParams, Point};
    use crate::testutil::tiny;

    #[test]
    fn zero_sites_single_point() {
        let inst = tiny(1, 0, 0, 0, 12);
        let front = exact_front(&inst).unwrap();
        assert_eq!(front.len(), 1);
        assert_eq!(front[0].pair(), (0.0, inst.worst_fc()));
    }

    #[test]
    fn one_ban_two_points() {
        let mut p = GenParams::tiny(0, 0, 0, 10);
        p.explicit_ban_sites = Some(vec![Point::new(25.0, 25.0)]);
        p.explicit_sbs_sites = Some(vec![]);
        p.explicit_ma_sites = Some(vec![]);
        let inst = Instance::new(generate_scenario(&p, 4).unwrap());
        let k = inst.tables.ban_reach[0].len() as f64;
        let front = exact_front(&inst).unwrap();
        let pts: Vec<(f64, f64)> = front.iter().map(|p| p.pair()).collect();
        assert_eq!(pts, vec![(0.0, inst.worst_fc()), (10.0, inst.worst_fc() - k)]);
    }

    #[test]
    fn refuses_large_instances() {
        let inst = tiny(1, 4, 2, 1, 10);
        assert!(matches!(Oracle::new(&inst), Err(Error::OracleRefused(_))));
        let mut sc = tiny(1, 1, 1, 1, 5).scenario;
        sc.machines[0].rate *= 2.0;
        assert!(matches!(Oracle::new(&Instance::new(sc)), Err(Error::OracleRefused(_))));
        let inst = tiny(1, 2, 3, 2, 10);
        let strict = OracleLimits { max_states: 10, ..Default::default() };
        assert!(matches!(Oracle::with_limits(&inst, &strict), Err(Error::OracleRefused(_))));
    }

    #[test]
    fn witnesses_are_feasible_and_consistent() {
        for seed in 0..8 {
            let inst = tiny(seed, 2, 3, 2, 20);
            let oracle = Oracle::new(&inst).unwrap();
            let front = oracle.front();
            for p in &front {
                assert!(check_feasibility(&p.solution, &inst, None).is_empty());
                assert_eq!(witness_objectives(p, &inst), p.pair());
            }
            for w in front.windows(2) {
                assert!(w[0].f1 < w[1].f1 && w[0].fc > w[1].fc);
            }
        }
    }

    #[test]
    fn heuristic_solutions_never_beat_the_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for seed in 0..8 {
            let inst = tiny(seed, 2, 3, 2, 20);
            let oracle = Oracle::new(&inst).unwrap();
            for _ in 0..20 {
                let dep = crate::testutil::random_deployment(&inst, &mut rng);
                let out = assign_connections(&dep, &vec![0.0; inst.n_sbs()], &inst);
                if !check_feasibility(&out.solution, &inst, None).is_empty() {
                    continue;
                }
                let f = objectives(&out.solution, &inst);
                assert!(oracle.optimum(f.f1).fc <= f.fc + 1e-9);
            }
        }
    }

    #[test]
    fn weak_duality_and_zero_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..4 {
            let inst = tiny(seed, 2, 3, 2, 20);
            let oracle = Oracle::new(&inst).unwrap();
            assert_eq!(oracle.relaxed_optimum(&[0.5, 0.5, 0.5], 0.0).unwrap(), inst.worst_fc());
            for _ in 0..20 {
                let eps = rng.gen_range(0.0..inst.scenario.total_cost());
                let lambda: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..3.0)).collect();
                let relaxed = oracle.relaxed_optimum(&lambda, eps).unwrap();
                let exact = oracle.optimum(eps).fc;
                assert!(relaxed <= exact + 1e-9, "{relaxed} > {exact}");
            }
        }
    }

    #[test]
    fn zero_multipliers_collapse_when_links_are_slack() {
        let mut p = GenParams::tiny(2, 3, 1, 10);
        p.radio.user_density_per_m2 = 1e-9;
        for seed in 0..4 {
            let inst = Instance::new(generate_scenario(&p, seed).unwrap());
            let oracle = Oracle::new(&inst).unwrap();
            for eps in [10.0, 12.0, 15.0, 30.0] {
                let relaxed = oracle.relaxed_optimum(&[0.0; 3], eps).unwrap();
                assert!((relaxed - oracle.optimum(eps).fc).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn classification() {
        let h = [(0.0, 10.0), (10.0, 4.0)];
        assert_eq!(classify((10.0, 4.0), &h), Agreement::Match);
        assert_eq!(classify((9.0, 4.0), &h), Agreement::Dominated);
        assert_eq!(classify((11.0, 2.0), &h), Agreement::Missed);
        assert!(same_points(&h, &[(10.0, 4.0), (0.0, 10.0)]));
        assert!(!same_points(&h, &[(10.0, 4.0)]));
    }
}
