//! Two-level tabu search over the deployment variables for the relaxed
//! problem: BAN sites form the outer level, SBS and MA sites the inner one.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::{assign_with_stage, attach_mas, ban_coverage, AssignOutcome, MaStage};
use crate::model::{cost, Deployment, Instance, Node, Solution, TOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchParams {
    /// Outer (BAN) iterations `N_t1`.
    pub n_t1: usize,
    /// Inner (SBS/MA) iterations `N_t2` per outer iteration.
    pub n_t2: usize,
    /// Sites re-deployed by a diversification restart.
    pub n_div: usize,
    /// Cap on swap moves generated per iteration; `None` keeps them all.
    pub n_swap: Option<usize>,
    pub tenure_1: usize,
    pub tenure_2: usize,
    pub seed: u64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self { n_t1: 10, n_t2: 12, n_div: 2, n_swap: None, tenure_1: 7, tenure_2: 10, seed: 0 }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.into()));
        if self.n_t1 == 0 || self.n_t2 == 0 || self.n_div == 0 || self.tenure_1 == 0 || self.tenure_2 == 0 {
            return bad("search iteration counts, tenures and n_div must be positive");
        }
        if self.n_swap == Some(0) {
            return bad("n_swap must be positive when set");
        }
        if self.n_t1 > 1 && self.tenure_1 >= self.n_t1 {
            return bad("tenure_1 must be below n_t1");
        }
        if self.n_t2 > 1 && self.tenure_2 >= self.n_t2 {
            return bad("tenure_2 must be below n_t2");
        }
        Ok(())
    }
}

/// A candidate site of any role.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    Ban(usize),
    Sbs(usize),
    Ma(usize),
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Site::Ban(k) => write!(f, "ban:{k}"),
            Site::Sbs(i) => write!(f, "sbs:{i}"),
            Site::Ma(j) => write!(f, "ma:{j}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DeployMove {
    Open(Site),
    Close(Site),
    Swap { close: Site, open: Site },
}

impl DeployMove {
    pub fn sites(&self) -> impl Iterator<Item = Site> {
        let (a, b) = match *self {
            DeployMove::Open(s) | DeployMove::Close(s) => (s, None),
            DeployMove::Swap { close, open } => (close, Some(open)),
        };
        std::iter::once(a).chain(b)
    }

    pub fn apply(&self, dep: &Deployment) -> Deployment {
        let mut out = dep.clone();
        let set = |d: &mut Deployment, s: Site, v: bool| match s {
            Site::Ban(k) => d.z[k] = v,
            Site::Sbs(i) => d.y[i] = v,
            Site::Ma(j) => d.w[j] = v,
        };
        match *self {
            DeployMove::Open(s) => set(&mut out, s, true),
            DeployMove::Close(s) => set(&mut out, s, false),
            DeployMove::Swap { close, open } => {
                set(&mut out, close, false);
                set(&mut out, open, true);
            }
        }
        out
    }
}

impl fmt::Display for DeployMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeployMove::Open(s) => write!(f, "open {s}"),
            DeployMove::Close(s) => write!(f, "close {s}"),
            DeployMove::Swap { close, open } => write!(f, "swap {close}->{open}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    Ban,
    SbsMa,
}

/// Cheapest-first initial deployment within budget `epsilon`: BANs while the
/// next one fits, then SBS/MA sites, stopping at the first that does not fit.
pub fn initial_deployment(inst: &Instance, epsilon: f64) -> Deployment {
    let sc = &inst.scenario;
    let mut dep = Deployment::empty(inst);
    let mut f1 = 0.0;
    let cheapest = |sites: &mut dyn Iterator<Item = (Site, f64)>| {
        sites.fold(None, |best: Option<(Site, f64)>, (s, c)| match best {
            Some((_, bc)) if bc <= c => best,
            _ => Some((s, c)),
        })
    };
    loop {
        let ban = cheapest(&mut (0..inst.n_ban()).filter(|k| !dep.z[*k]).map(|k| (Site::Ban(k), sc.ban_sites[k].cost)));
        if let Some((s, c)) = ban {
            if f1 + c <= epsilon + TOL {
                dep = DeployMove::Open(s).apply(&dep);
                f1 += c;
                continue;
            }
        }
        let sbs = (0..inst.n_sbs())
            .filter(|i| !dep.y[*i] && inst.sbs_allowed())
            .map(|i| (Site::Sbs(i), sc.sbs_sites[i].cost));
        let ma = (0..inst.n_ma()).filter(|j| !dep.w[*j]).map(|j| (Site::Ma(j), sc.ma_sites[j].cost));
        match cheapest(&mut sbs.chain(ma)) {
            Some((s, c)) if f1 + c <= epsilon + TOL => {
                dep = DeployMove::Open(s).apply(&dep);
                f1 += c;
            }
            _ => break,
        }
    }
    dep
}

fn site_cost(inst: &Instance, s: Site) -> f64 {
    let sc = &inst.scenario;
    match s {
        Site::Ban(k) => sc.ban_sites[k].cost,
        Site::Sbs(i) => sc.sbs_sites[i].cost,
        Site::Ma(j) => sc.ma_sites[j].cost,
    }
}

/// Every open, close and same-role swap move at `level` whose result costs
/// at most `epsilon`, ordered opens, closes, swaps, each by site index.
pub fn neighborhood(dep: &Deployment, level: Level, epsilon: f64, inst: &Instance) -> Vec<DeployMove> {
    let groups: Vec<Vec<(Site, bool)>> = match level {
        Level::Ban => vec![(0..inst.n_ban()).map(|k| (Site::Ban(k), dep.z[k])).collect()],
        Level::SbsMa => {
            let sbs = if inst.sbs_allowed() {
                (0..inst.n_sbs()).map(|i| (Site::Sbs(i), dep.y[i])).collect()
            } else {
                Vec::new()
            };
            vec![sbs, (0..inst.n_ma()).map(|j| (Site::Ma(j), dep.w[j])).collect()]
        }
    };
    let base = cost(dep, &inst.scenario);
    let fits = |delta: f64| base + delta <= epsilon + TOL;
    let mut opens = Vec::new();
    let mut closes = Vec::new();
    let mut swaps = Vec::new();
    for group in &groups {
        for (s, on) in group {
            if *on {
                closes.push(DeployMove::Close(*s));
            } else if fits(site_cost(inst, *s)) {
                opens.push(DeployMove::Open(*s));
            }
        }
        for (c, c_on) in group {
            if !c_on {
                continue;
            }
            for (o, o_on) in group {
                if !o_on && fits(site_cost(inst, *o) - site_cost(inst, *c)) {
                    swaps.push(DeployMove::Swap { close: *c, open: *o });
                }
            }
        }
    }
    opens.extend(closes);
    opens.extend(swaps);
    opens
}

/// Short-term memory: per-site tabu expiries and deployment frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct TabuState {
    t1: Vec<usize>,
    t2_sbs: Vec<usize>,
    t2_ma: Vec<usize>,
    pub freq_ban: Vec<u64>,
    pub freq_sbs: Vec<u64>,
    pub freq_ma: Vec<u64>,
}

impl TabuState {
    pub fn new(inst: &Instance) -> Self {
        Self {
            t1: vec![0; inst.n_ban()],
            t2_sbs: vec![0; inst.n_sbs()],
            t2_ma: vec![0; inst.n_ma()],
            freq_ban: vec![0; inst.n_ban()],
            freq_sbs: vec![0; inst.n_sbs()],
            freq_ma: vec![0; inst.n_ma()],
        }
    }

    fn slot(&mut self, s: Site) -> &mut usize {
        match s {
            Site::Ban(k) => &mut self.t1[k],
            Site::Sbs(i) => &mut self.t2_sbs[i],
            Site::Ma(j) => &mut self.t2_ma[j],
        }
    }

    /// A site is tabu while the clock is below its expiry.
    pub fn is_tabu_site(&self, s: Site, clock: usize) -> bool {
        let exp = match s {
            Site::Ban(k) => self.t1[k],
            Site::Sbs(i) => self.t2_sbs[i],
            Site::Ma(j) => self.t2_ma[j],
        };
        clock < exp
    }

    pub fn is_tabu(&self, mv: &DeployMove, clock: usize) -> bool {
        mv.sites().any(|s| self.is_tabu_site(s, clock))
    }

    pub fn forbid(&mut self, mv: &DeployMove, clock: usize, tenure: usize) {
        for s in mv.sites() {
            *self.slot(s) = clock + tenure;
        }
    }

    pub fn clear_inner(&mut self) {
        self.t2_sbs.fill(0);
        self.t2_ma.fill(0);
    }

    pub fn record(&mut self, dep: &Deployment) {
        for k in dep.bans() {
            self.freq_ban[k] += 1;
        }
        for i in dep.sbss() {
            self.freq_sbs[i] += 1;
        }
        for j in dep.mas() {
            self.freq_ma[j] += 1;
        }
    }
}

const STAGE_CACHE_LIMIT: usize = 2048;
const VALUE_CACHE_LIMIT: usize = 1 << 18;

/// Relaxed-objective evaluation of deployments with the connection heuristic,
/// memoizing BAN coverage, MA attachment and whole-deployment values.
pub struct Evaluator<'a> {
    inst: &'a Instance,
    lambda: Vec<f64>,
    ban_cover: HashMap<Vec<bool>, Vec<Option<Node>>>,
    ma: HashMap<(Vec<bool>, Vec<bool>), MaStage>,
    values: HashMap<Deployment, f64>,
    pub evaluations: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(inst: &'a Instance, lambda: &[f64]) -> Self {
        Self {
            inst,
            lambda: lambda.to_vec(),
            ban_cover: HashMap::new(),
            ma: HashMap::new(),
            values: HashMap::new(),
            evaluations: 0,
        }
    }

    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Switches multipliers, keeping the multiplier-independent caches.
    pub fn set_lambda(&mut self, lambda: &[f64]) {
        if self.lambda != lambda {
            self.lambda = lambda.to_vec();
            self.values.clear();
        }
    }

    pub fn outcome(&mut self, dep: &Deployment) -> AssignOutcome {
        let inst = self.inst;
        if self.ban_cover.len() >= STAGE_CACHE_LIMIT {
            self.ban_cover.clear();
        }
        if self.ma.len() >= STAGE_CACHE_LIMIT {
            self.ma.clear();
        }
        if self.values.len() >= VALUE_CACHE_LIMIT {
            self.values.clear();
        }
        let cover = self.ban_cover.entry(dep.z.clone()).or_insert_with(|| ban_coverage(dep, inst));
        let ma = self.ma.entry((dep.z.clone(), dep.w.clone())).or_insert_with(|| attach_mas(dep, inst));
        self.evaluations += 1;
        let out = assign_with_stage(dep, &self.lambda, inst, cover, ma);
        self.values.insert(dep.clone(), out.value);
        out
    }

    pub fn value(&mut self, dep: &Deployment) -> f64 {
        if let Some(v) = self.values.get(dep) {
            return *v;
        }
        self.outcome(dep).value
    }
}

/// One row of the optional iteration trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub outer_iter: usize,
    pub inner_iter: usize,
    pub v_candidate_best: f64,
    pub v_b: f64,
    #[serde(rename = "move")]
    pub mv: String,
    pub tabu_hits: usize,
    pub diversified: bool,
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct RelaxedSolve {
    pub solution: Solution,
    /// Best relaxed value `V_B`.
    pub value: f64,
    /// Deployed SBSs the connection heuristic could not attach in `solution`.
    pub unattached: Vec<usize>,
    /// `V_B` after each inner/outer step; nonincreasing.
    pub incumbent_trace: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub evaluations: usize,
}

struct Search<'e, 'a> {
    eval: &'e mut Evaluator<'a>,
    params: &'e SearchParams,
    epsilon: f64,
    rng: ChaCha8Rng,
    tabu: TabuState,
    best: Deployment,
    v_best: f64,
    incumbent: Vec<f64>,
    trace: Vec<TraceRow>,
}

impl Search<'_, '_> {
    fn candidates(&mut self, dep: &Deployment, level: Level) -> Vec<DeployMove> {
        let mut moves = neighborhood(dep, level, self.epsilon, self.eval.instance());
        if let Some(cap) = self.params.n_swap {
            let first_swap = moves.iter().position(|m| matches!(m, DeployMove::Swap { .. })).unwrap_or(moves.len());
            let n_swaps = moves.len() - first_swap;
            if n_swaps > cap {
                let mut keep = sample(&mut self.rng, n_swaps, cap).into_vec();
                keep.sort_unstable();
                let swaps: Vec<DeployMove> = keep.iter().map(|i| moves[first_swap + i]).collect();
                moves.truncate(first_swap);
                moves.extend(swaps);
            }
        }
        moves
    }

    /// One tabu step at `level`: returns the chosen move (if any), the best
    /// candidate value, tabu hits and whether every candidate was tabu.
    fn step(
        &mut self,
        dep: &Deployment,
        level: Level,
        clock: usize,
    ) -> (Option<(DeployMove, Deployment)>, f64, usize, bool) {
        let moves = self.candidates(dep, level);
        if moves.is_empty() {
            return (None, f64::INFINITY, 0, false);
        }
        let mut best_any: Option<(f64, usize)> = None;
        let mut best_free: Option<(f64, usize)> = None;
        let mut hits = 0;
        let mut next = Vec::with_capacity(moves.len());
        for (n, mv) in moves.iter().enumerate() {
            let d = mv.apply(dep);
            let v = self.eval.value(&d);
            next.push(d);
            if best_any.is_none_or(|(bv, _)| v < bv) {
                best_any = Some((v, n));
            }
            if self.tabu.is_tabu(mv, clock) {
                hits += 1;
            } else if best_free.is_none_or(|(bv, _)| v < bv) {
                best_free = Some((v, n));
            }
        }
        let (v_any, n_any) = best_any.expect("non-empty neighborhood");
        if v_any < self.v_best {
            self.v_best = v_any;
            self.best = next[n_any].clone();
            return (Some((moves[n_any], next.swap_remove(n_any))), v_any, hits, false);
        }
        match best_free {
            Some((_, n)) => (Some((moves[n], next.swap_remove(n))), v_any, hits, false),
            None => (None, v_any, hits, true),
        }
    }

    /// Opens up to `n_div` of the least-deployed closed SBS/MA sites, closing
    /// random deployed ones when the budget would otherwise be exceeded.
    fn diversify(&mut self, dep: &Deployment) -> Deployment {
        let inst = self.eval.instance();
        let mut closed: Vec<(u64, Site)> = Vec::new();
        if inst.sbs_allowed() {
            closed.extend((0..inst.n_sbs()).filter(|i| !dep.y[*i]).map(|i| (self.tabu.freq_sbs[i], Site::Sbs(i))));
        }
        closed.extend((0..inst.n_ma()).filter(|j| !dep.w[*j]).map(|j| (self.tabu.freq_ma[j], Site::Ma(j))));
        closed.sort();
        let mut out = dep.clone();
        for (_, s) in closed.into_iter().take(self.params.n_div) {
            let c = site_cost(inst, s);
            let mut f1 = cost(&out, &inst.scenario);
            loop {
                if f1 + c <= self.epsilon + TOL {
                    out = DeployMove::Open(s).apply(&out);
                    break;
                }
                let open: Vec<Site> =
                    out.sbss().map(Site::Sbs).chain(out.mas().map(Site::Ma)).filter(|o| *o != s).collect();
                if open.is_empty() {
                    break;
                }
                let victim = open[self.rng.gen_range(0..open.len())];
                out = DeployMove::Close(victim).apply(&out);
                f1 = cost(&out, &inst.scenario);
            }
        }
        out
    }

    fn note(&mut self, outer: usize, inner: usize, cand: f64, mv: Option<DeployMove>, hits: usize, div: bool) {
        self.incumbent.push(self.v_best);
        self.trace.push(TraceRow {
            outer_iter: outer,
            inner_iter: inner,
            v_candidate_best: cand,
            v_b: self.v_best,
            mv: mv.map(|m| m.to_string()).unwrap_or_default(),
            tabu_hits: hits,
            diversified: div,
        });
    }

    fn run(&mut self, start: Deployment) -> Deployment {
        let mut dep = start;
        let mut inner_clock = 0;
        for t1 in 0..self.params.n_t1 {
            let (chosen, cand, hits, _) = self.step(&dep, Level::Ban, t1);
            let mv = chosen.as_ref().map(|(m, _)| *m);
            if let Some((mv, next)) = chosen {
                dep = next;
                self.tabu.forbid(&mv, t1, self.params.tenure_1);
            }
            self.tabu.record(&dep);
            self.note(t1, 0, cand, mv, hits, false);

            for t2 in 0..self.params.n_t2 {
                let (chosen, cand, hits, all_tabu) = self.step(&dep, Level::SbsMa, inner_clock);
                let mv = chosen.as_ref().map(|(m, _)| *m);
                if all_tabu {
                    dep = self.diversify(&dep);
                    self.tabu.clear_inner();
                    let v = self.eval.value(&dep);
                    if v < self.v_best {
                        self.v_best = v;
                        self.best = dep.clone();
                    }
                } else if let Some((mv, next)) = chosen {
                    dep = next;
                    self.tabu.forbid(&mv, inner_clock, self.params.tenure_2);
                }
                inner_clock += 1;
                self.tabu.record(&dep);
                self.note(t1, t2 + 1, cand, mv, hits, all_tabu);
            }
        }
        self.best.clone()
    }
}

/// Runs the two-level tabu search for the relaxed problem at budget
/// `epsilon` under multipliers `lambda`, returning the best deployment found
/// with its connection plan and relaxed value.
pub fn solve_relaxed(inst: &Instance, epsilon: f64, lambda: &[f64], params: &SearchParams) -> Result<RelaxedSolve> {
    let mut eval = Evaluator::new(inst, lambda);
    solve_relaxed_with(&mut eval, epsilon, params, None)
}

/// [`solve_relaxed`] with a caller-owned evaluator and optional start.
pub fn solve_relaxed_with(
    eval: &mut Evaluator<'_>,
    epsilon: f64,
    params: &SearchParams,
    start: Option<Deployment>,
) -> Result<RelaxedSolve> {
    params.validate()?;
    let inst = eval.instance();
    if eval.lambda.len() != inst.n_sbs() {
        return Err(Error::InvalidParams("multiplier length mismatch".into()));
    }
    let start = match start {
        Some(d) if cost(&d, &inst.scenario) <= epsilon + TOL => d,
        _ => initial_deployment(inst, epsilon),
    };
    let v0 = eval.value(&start);
    let before = eval.evaluations;
    let mut search = Search {
        eval,
        params,
        epsilon,
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        tabu: TabuState::new(inst),
        best: start.clone(),
        v_best: v0,
        incumbent: vec![v0],
        trace: Vec::new(),
    };
    let best = search.run(start);
    let (v_best, incumbent_trace, trace) = (search.v_best, search.incumbent, search.trace);
    let out = eval.outcome(&best);
    debug_assert!((out.value - v_best).abs() < 1e-9);
    Ok(RelaxedSolve {
        solution: out.solution,
        value: out.value,
        unattached: out.unattached,
        incumbent_trace,
        trace,
        evaluations: eval.evaluations - before,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, GenParams};
    use crate::testutil::tiny;

    #[test]
    fn initial_deployment_examples() {
        let inst = tiny(4, 3, 4, 2, 10);
        assert_eq!(initial_deployment(&inst, 0.0), Deployment::empty(&inst));
        let min_ban = inst.scenario.min_ban_cost().unwrap();
        let one = initial_deployment(&inst, min_ban);
        assert_eq!(one.count(), 1);
        assert_eq!(one.bans().count(), 1);
        assert_eq!(initial_deployment(&inst, inst.scenario.total_cost()), Deployment::full(&inst));
        for eps in [0.5, 10.0, 12.0, 17.5, 31.0, 40.0] {
            let d = initial_deployment(&inst, eps);
            assert!(cost(&d, &inst.scenario) <= eps + TOL);
        }
    }

    #[test]
    fn neighborhood_counts_match_enumeration() {
        let inst = tiny(7, 3, 5, 3, 10);
        let dep = Deployment::from_indices(&inst, &[1], &[0, 2], &[1]);
        let eps = 100.0;
        let ban = neighborhood(&dep, Level::Ban, eps, &inst);
        assert_eq!(ban.len(), 2 + 1 + 2);
        let inner = neighborhood(&dep, Level::SbsMa, eps, &inst);
        let (opens, closes, swaps) = (3 + 2, 2 + 1, 2 * 3 + 2);
        assert_eq!(inner.len(), opens + closes + swaps);
        assert!(inner.iter().all(|m| m.sites().all(|s| !matches!(s, Site::Ban(_)))));

        let full = Deployment::full(&inst);
        assert!(neighborhood(&full, Level::SbsMa, eps, &inst).iter().all(|m| matches!(m, DeployMove::Close(_))));
        let empty = Deployment::empty(&inst);
        assert!(neighborhood(&empty, Level::Ban, eps, &inst).iter().all(|m| matches!(m, DeployMove::Open(_))));
    }

    #[test]
    fn neighborhood_respects_budget() {
        let inst = tiny(9, 3, 5, 3, 10);
        let dep = Deployment::from_indices(&inst, &[0], &[0], &[]);
        let f1 = cost(&dep, &inst.scenario);
        for mv in neighborhood(&dep, Level::SbsMa, f1, &inst) {
            assert!(cost(&mv.apply(&dep), &inst.scenario) <= f1 + TOL, "{mv}");
        }
        assert!(neighborhood(&dep, Level::Ban, f1, &inst).iter().all(|m| !matches!(m, DeployMove::Open(_))));
    }

    #[test]
    fn tabu_expiry() {
        let inst = tiny(1, 2, 2, 1, 0);
        let mut t = TabuState::new(&inst);
        let mv = DeployMove::Swap { close: Site::Sbs(0), open: Site::Sbs(1) };
        t.forbid(&mv, 3, 2);
        assert!(t.is_tabu(&mv, 4));
        assert!(t.is_tabu(&DeployMove::Open(Site::Sbs(1)), 4));
        assert!(!t.is_tabu(&mv, 5));
        t.forbid(&mv, 10, 5);
        t.clear_inner();
        assert!(!t.is_tabu(&mv, 11));
    }

    #[test]
    fn tiny_budget_gives_worst_value() {
        let inst = tiny(2, 2, 3, 2, 20);
        let lambda = vec![0.3; inst.n_sbs()];
        let eps = inst.scenario.min_ban_cost().unwrap() - 0.5;
        let out = solve_relaxed(&inst, eps, &lambda, &SearchParams::default()).unwrap();
        assert_eq!(out.value, inst.worst_fc() - 0.0);
        assert!(out.solution.deployment.bans().next().is_none());
    }

    #[test]
    fn incumbent_is_monotone_and_within_budget() {
        for seed in 0..6 {
            let inst = tiny(seed, 2, 4, 2, 25);
            let lambda = vec![0.2; inst.n_sbs()];
            let eps = 16.0;
            let params = SearchParams { n_t1: 4, n_t2: 6, tenure_1: 2, tenure_2: 3, ..Default::default() };
            let out = solve_relaxed(&inst, eps, &lambda, &params).unwrap();
            assert!(out.incumbent_trace.windows(2).all(|w| w[1] <= w[0]));
            assert!(cost(&out.solution.deployment, &inst.scenario) <= eps + TOL);
            assert_eq!(out.value, *out.incumbent_trace.last().unwrap());
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let inst = tiny(11, 3, 5, 3, 30);
        let lambda = vec![0.5; inst.n_sbs()];
        let params = SearchParams { n_t1: 3, n_t2: 5, n_swap: Some(3), tenure_1: 2, tenure_2: 3, seed: 9, ..Default::default() };
        let a = solve_relaxed(&inst, 20.0, &lambda, &params).unwrap();
        let b = solve_relaxed(&inst, 20.0, &lambda, &params).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.solution, b.solution);
    }

    #[test]
    fn more_outer_iterations_never_worse() {
        let inst = tiny(5, 3, 5, 3, 30);
        let lambda = vec![0.4; inst.n_sbs()];
        let short = SearchParams { n_t1: 3, n_t2: 4, tenure_1: 2, tenure_2: 3, ..Default::default() };
        let long = SearchParams { n_t1: 6, ..short.clone() };
        let a = solve_relaxed(&inst, 22.0, &lambda, &short).unwrap();
        let b = solve_relaxed(&inst, 22.0, &lambda, &long).unwrap();
        assert!(b.value <= a.value);
        assert_eq!(&b.incumbent_trace[..a.incumbent_trace.len()], &a.incumbent_trace[..]);
    }

    #[test]
    fn diversification_fires_when_inner_neighborhood_is_tabu() {
        let mut p = GenParams::tiny(1, 1, 0, 0);
        p.sbs_cost = 1.0;
        let inst = Instance::new(generate_scenario(&p, 3).unwrap());
        let params = SearchParams { n_t1: 1, n_t2: 6, tenure_1: 1, tenure_2: 5, ..Default::default() };
        let out = solve_relaxed(&inst, 100.0, &[0.0], &params).unwrap();
        assert!(out.trace.iter().any(|r| r.diversified));
    }

    #[test]
    fn params_validation() {
        assert!(SearchParams::default().validate().is_ok());
        assert!(SearchParams { n_t1: 0, ..Default::default() }.validate().is_err());
        assert!(SearchParams { n_swap: Some(0), ..Default::default() }.validate().is_err());
        assert!(SearchParams { tenure_2: 50, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn trace_csv_has_header() {
        let inst = tiny(3, 2, 2, 1, 5);
        let params = SearchParams { n_t1: 2, n_t2: 2, tenure_1: 1, tenure_2: 1, ..Default::default() };
        let out = solve_relaxed(&inst, 15.0, &vec![0.0; inst.n_sbs()], &params).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&out.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("outer_iter,inner_iter,v_candidate_best,v_b,move,tabu_hits,diversified"));
        assert_eq!(text.lines().count(), 1 + 2 * 3);
    }
}
