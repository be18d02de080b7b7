//! Decision variables, objectives, feasibility checking and dominance.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{derive_tables, DerivedTables, Scenario};

/// Slack used when comparing real-valued quantities against limits.
pub const TOL: f64 = 1e-9;

/// A station that can cover subareas or act as a backhaul parent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Ban(usize),
    Sbs(usize),
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Ban(k) => write!(f, "ban:{k}"),
            Node::Sbs(i) => write!(f, "sbs:{i}"),
        }
    }
}

impl FromStr for Node {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Integrity(format!("malformed node reference `{s}`"));
        let (kind, idx) = s.split_once(':').ok_or_else(bad)?;
        let idx: usize = idx.parse().map_err(|_| bad())?;
        match kind {
            "ban" => Ok(Node::Ban(idx)),
            "sbs" => Ok(Node::Sbs(idx)),
            _ => Err(bad()),
        }
    }
}

/// Comparison backhaul models.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Restriction {
    /// Multi-hop wireless backhaul with the scenario's relay limit.
    #[default]
    None,
    /// Only fiber-fed stations: SBS sites are never deployed.
    FiberOnly,
    /// SBSs attach directly to a BAN over one wireless hop.
    SingleHop,
}

impl fmt::Display for Restriction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Restriction::None => "none",
            Restriction::FiberOnly => "fiber-only",
            Restriction::SingleHop => "single-hop",
        })
    }
}

/// A scenario bundled with its derived tables and the coverage weight.
#[derive(Clone, Debug)]
pub struct Instance {
    pub scenario: Scenario,
    pub tables: DerivedTables,
    pub theta: f64,
    pub restriction: Restriction,
}

impl Instance {
    pub fn new(scenario: Scenario) -> Self {
        let tables = derive_tables(&scenario);
        let theta = scenario.radio.htc_mtc_weight;
        Self { scenario, tables, theta, restriction: Restriction::None }
    }

    /// Uses cached tables, refusing them if they were derived from a
    /// different scenario.
    pub fn with_tables(scenario: Scenario, tables: DerivedTables) -> Result<Self> {
        if !tables.matches(&scenario) {
            return Err(Error::Integrity("derived tables belong to a different scenario".into()));
        }
        let theta = scenario.radio.htc_mtc_weight;
        Ok(Self { scenario, tables, theta, restriction: Restriction::None })
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn restricted(mut self, restriction: Restriction) -> Self {
        self.restriction = restriction;
        if restriction != Restriction::None {
            self.scenario.n_relays = 0;
        }
        self
    }

    pub fn n_ban(&self) -> usize {
        self.scenario.ban_sites.len()
    }

    pub fn n_sbs(&self) -> usize {
        self.scenario.sbs_sites.len()
    }

    pub fn n_ma(&self) -> usize {
        self.scenario.ma_sites.len()
    }

    pub fn n_subareas(&self) -> usize {
        self.tables.num_subareas()
    }

    pub fn n_machines(&self) -> usize {
        self.scenario.machines.len()
    }

    /// Maximum number of hops between a BAN and any SBS.
    pub fn hop_limit(&self) -> usize {
        self.scenario.n_relays as usize + 1
    }

    pub fn sbs_allowed(&self) -> bool {
        self.restriction != Restriction::FiberOnly
    }

    /// `S + θM`, the coverage objective of an empty plan.
    pub fn worst_fc(&self) -> f64 {
        self.n_subareas() as f64 + self.theta * self.n_machines() as f64
    }

    /// Subarea capacity `N_{parent,i}` of the backhaul link into SBS `i`.
    pub fn link_limit(&self, parent: Node, i: usize) -> u32 {
        match parent {
            Node::Ban(k) => self.tables.ban_sbs_limit[k][i],
            Node::Sbs(p) => self.tables.sbs_sbs_limit[p][i],
        }
    }

    /// Whether a backhaul link from `parent` into SBS `i` exists, i.e. has
    /// positive capacity.
    pub fn link_exists(&self, parent: Node, i: usize) -> bool {
        match parent {
            Node::Ban(k) => self.tables.ban_sbs_capacity[k][i] > 0.0,
            Node::Sbs(p) => p != i && self.tables.sbs_sbs_capacity[p][i] > 0.0,
        }
    }

    pub fn ma_link_exists(&self, k: usize, j: usize) -> bool {
        self.tables.ban_ma_capacity[k][j] > 0.0
    }

    /// Number of machines MA `j` may serve when attached to BAN `k`.
    pub fn ma_machine_cap(&self, k: usize, j: usize) -> Option<usize> {
        let rates: Vec<f64> = self.scenario.machines.iter().map(|m| m.rate).collect();
        let rate = *rates.first()?;
        if rates.iter().any(|r| *r != rate) {
            return None;
        }
        let n_j = self.scenario.radio.machine_limit as usize;
        let demand = rate * self.scenario.radio.compression_ratio;
        if demand <= 0.0 {
            return Some(n_j);
        }
        let by_capacity = ((self.tables.ban_ma_capacity[k][j] + TOL) / demand).floor();
        Some(n_j.min(by_capacity.min(usize::MAX as f64) as usize))
    }

    pub fn station_reach(&self, node: Node) -> &[u32] {
        match node {
            Node::Ban(k) => &self.tables.ban_reach[k],
            Node::Sbs(i) => &self.tables.sbs_reach[i],
        }
    }

    pub fn station_pos(&self, node: Node) -> crate::scenario::Point {
        match node {
            Node::Ban(k) => self.scenario.ban_sites[k].pos(),
            Node::Sbs(i) => self.scenario.sbs_sites[i].pos(),
        }
    }
}

/// Which candidate sites are deployed: `z` for BANs, `y` for SBSs and `w`
/// for MAs.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Deployment {
    pub z: Vec<bool>,
    pub y: Vec<bool>,
    pub w: Vec<bool>,
}

impl Deployment {
    pub fn empty(inst: &Instance) -> Self {
        Self { z: vec![false; inst.n_ban()], y: vec![false; inst.n_sbs()], w: vec![false; inst.n_ma()] }
    }

    pub fn full(inst: &Instance) -> Self {
        Self { z: vec![true; inst.n_ban()], y: vec![inst.sbs_allowed(); inst.n_sbs()], w: vec![true; inst.n_ma()] }
    }

    pub fn from_indices(inst: &Instance, bans: &[usize], sbss: &[usize], mas: &[usize]) -> Self {
        let mut d = Self::empty(inst);
        bans.iter().for_each(|k| d.z[*k] = true);
        sbss.iter().for_each(|i| d.y[*i] = true);
        mas.iter().for_each(|j| d.w[*j] = true);
        d
    }

    pub fn matches(&self, inst: &Instance) -> bool {
        self.z.len() == inst.n_ban() && self.y.len() == inst.n_sbs() && self.w.len() == inst.n_ma()
    }

    pub fn bans(&self) -> impl Iterator<Item = usize> + '_ {
        self.z.iter().enumerate().filter(|(_, b)| **b).map(|(k, _)| k)
    }

    pub fn sbss(&self) -> impl Iterator<Item = usize> + '_ {
        self.y.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }

    pub fn mas(&self) -> impl Iterator<Item = usize> + '_ {
        self.w.iter().enumerate().filter(|(_, b)| **b).map(|(j, _)| j)
    }

    pub fn is_deployed(&self, node: Node) -> bool {
        match node {
            Node::Ban(k) => self.z.get(k).copied().unwrap_or(false),
            Node::Sbs(i) => self.y.get(i).copied().unwrap_or(false),
        }
    }

    pub fn count(&self) -> usize {
        self.bans().count() + self.sbss().count() + self.mas().count()
    }
}

/// Deployment cost `f1`, summed in site order.
pub fn cost(deployment: &Deployment, scenario: &Scenario) -> f64 {
    let mut total = 0.0;
    for (on, site) in deployment.z.iter().zip(&scenario.ban_sites) {
        if *on {
            total += site.cost;
        }
    }
    for (on, site) in deployment.y.iter().zip(&scenario.sbs_sites) {
        if *on {
            total += site.cost;
        }
    }
    for (on, site) in deployment.w.iter().zip(&scenario.ma_sites) {
        if *on {
            total += site.cost;
        }
    }
    total
}

/// Connections among stations, subareas and machines.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConnectionPlan {
    /// Coverer of each subarea.
    pub cover: Vec<Option<Node>>,
    /// Backhaul parent of each SBS.
    pub sbs_parent: Vec<Option<Node>>,
    /// Serving BAN of each MA.
    pub ma_parent: Vec<Option<usize>>,
    /// Serving MA of each machine.
    pub machine_ma: Vec<Option<usize>>,
}

impl ConnectionPlan {
    pub fn empty(inst: &Instance) -> Self {
        Self {
            cover: vec![None; inst.n_subareas()],
            sbs_parent: vec![None; inst.n_sbs()],
            ma_parent: vec![None; inst.n_ma()],
            machine_ma: vec![None; inst.n_machines()],
        }
    }

    /// `r_i`: number of subareas covered by each SBS.
    pub fn sbs_coverage(&self, n_sbs: usize) -> Vec<u32> {
        let mut r = vec![0u32; n_sbs];
        for node in self.cover.iter().flatten() {
            if let Node::Sbs(i) = node {
                if let Some(slot) = r.get_mut(*i) {
                    *slot += 1;
                }
            }
        }
        r
    }

    /// SBS ancestors of `i`, nearest first, and the BAN the chain ends at.
    /// Fails on a cycle or a chain that stops at an SBS without parent.
    pub fn chain_to_ban(&self, i: usize) -> Result<(Vec<usize>, usize)> {
        let mut ancestors = Vec::new();
        let mut cur = i;
        for _ in 0..=self.sbs_parent.len() {
            match self.sbs_parent.get(cur).copied().flatten() {
                Some(Node::Ban(k)) => return Ok((ancestors, k)),
                Some(Node::Sbs(p)) => {
                    if p == i || ancestors.contains(&p) {
                        return Err(Error::Integrity(format!("backhaul cycle through sbs {i}")));
                    }
                    ancestors.push(p);
                    cur = p;
                }
                None => return Err(Error::Integrity(format!("sbs {i} has no path to a BAN"))),
            }
        }
        Err(Error::Integrity(format!("backhaul cycle through sbs {i}")))
    }

    /// Backhaul load of every SBS: subareas it covers plus those routed
    /// through it. Requires an acyclic parent structure.
    pub fn sbs_loads(&self) -> Result<Vec<u32>> {
        let n = self.sbs_parent.len();
        let r = self.sbs_coverage(n);
        let mut load = r.clone();
        for i in 0..n {
            if r[i] == 0 {
                continue;
            }
            let mut seen = 0;
            let mut cur = i;
            while let Some(Node::Sbs(p)) = self.sbs_parent[cur] {
                seen += 1;
                if seen > n {
                    return Err(Error::Integrity(format!("backhaul cycle through sbs {i}")));
                }
                load[p] += r[i];
                cur = p;
            }
        }
        Ok(load)
    }

    pub fn ban_children(&self, k: usize) -> usize {
        self.sbs_parent.iter().filter(|p| **p == Some(Node::Ban(k))).count()
            + self.ma_parent.iter().filter(|p| **p == Some(k)).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub deployment: Deployment,
    pub plan: ConnectionPlan,
}

impl Solution {
    pub fn empty(inst: &Instance) -> Self {
        Self { deployment: Deployment::empty(inst), plan: ConnectionPlan::empty(inst) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub f1: f64,
    pub f2: u32,
    pub f3: u32,
    pub fc: f64,
}

impl ObjectiveVector {
    pub fn pair(&self) -> (f64, f64) {
        (self.f1, self.fc)
    }
}

pub fn objectives(solution: &Solution, inst: &Instance) -> ObjectiveVector {
    let covered = solution.plan.cover.iter().filter(|c| c.is_some()).count();
    let served = solution.plan.machine_ma.iter().filter(|c| c.is_some()).count();
    let f2 = (inst.n_subareas() - covered.min(inst.n_subareas())) as u32;
    let f3 = (inst.n_machines() - served.min(inst.n_machines())) as u32;
    ObjectiveVector {
        f1: cost(&solution.deployment, &inst.scenario),
        f2,
        f3,
        fc: f2 as f64 + inst.theta * f3 as f64,
    }
}

/// Pareto dominance on `(f1, f_c)`.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
}

/// For every subarea, the node sequence its data follows from the BAN to the
/// covering SBS. Subareas covered by a BAN or not covered get an empty flow.
pub fn routing_flows(solution: &Solution) -> Result<Vec<Vec<Node>>> {
    let mut chains: BTreeMap<usize, Vec<Node>> = BTreeMap::new();
    let mut flows = Vec::with_capacity(solution.plan.cover.len());
    for cover in &solution.plan.cover {
        let flow = match cover {
            Some(Node::Sbs(i)) => {
                if let Some(chain) = chains.get(i) {
                    chain.clone()
                } else {
                    let (ancestors, k) = solution.plan.chain_to_ban(*i)?;
                    let mut chain = vec![Node::Ban(k)];
                    chain.extend(ancestors.iter().rev().map(|p| Node::Sbs(*p)));
                    chain.push(Node::Sbs(*i));
                    chains.insert(*i, chain.clone());
                    chain
                }
            }
            _ => Vec::new(),
        };
        flows.push(flow);
    }
    Ok(flows)
}

/// A broken constraint, identified by a stable id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub id: String,
    pub detail: String,
}

impl Violation {
    fn new(id: &str, detail: impl Into<String>) -> Self {
        Self { id: id.to_string(), detail: detail.into() }
    }
}

pub mod violation_ids {
    pub const DIMENSION: &str = "dimension";
    pub const DEPLOYED_ONLY: &str = "deployed-only";
    pub const COVERAGE_DISTANCE: &str = "coverage-distance";
    pub const BAN_SLOTS: &str = "ban-slots";
    pub const LINK_RANGE: &str = "link-range";
    pub const SBS_BACKHAUL: &str = "sbs-backhaul";
    pub const ROUTING: &str = "routing";
    pub const HOP_LIMIT: &str = "hop-limit";
    pub const SBS_CAPACITY: &str = "sbs-capacity";
    pub const MACHINE_DISTANCE: &str = "machine-distance";
    pub const MA_MACHINE_LIMIT: &str = "ma-machine-limit";
    pub const MA_BACKHAUL: &str = "ma-backhaul";
    pub const MA_CAPACITY: &str = "ma-capacity";
    pub const BUDGET: &str = "budget";
    pub const RESTRICTION: &str = "restriction";
}

/// Every violated constraint of the (transformed) planning problem, with an
/// optional budget cap on `f1`. An empty list means the solution is feasible.
pub fn check_feasibility(solution: &Solution, inst: &Instance, epsilon: Option<f64>) -> Vec<Violation> {
    use violation_ids::*;
    let mut out = Vec::new();
    let dep = &solution.deployment;
    let plan = &solution.plan;
    let sc = &inst.scenario;
    let t = &inst.tables;

    if !dep.matches(inst)
        || plan.cover.len() != inst.n_subareas()
        || plan.sbs_parent.len() != inst.n_sbs()
        || plan.ma_parent.len() != inst.n_ma()
        || plan.machine_ma.len() != inst.n_machines()
    {
        out.push(Violation::new(DIMENSION, "solution dimensions do not match the scenario"));
        return out;
    }
    let node_ok = |n: Node| match n {
        Node::Ban(k) => k < inst.n_ban(),
        Node::Sbs(i) => i < inst.n_sbs(),
    };

    for (s, cover) in plan.cover.iter().enumerate() {
        let Some(node) = *cover else { continue };
        if !node_ok(node) || !dep.is_deployed(node) {
            out.push(Violation::new(DEPLOYED_ONLY, format!("subarea {s} covered by undeployed {node}")));
            continue;
        }
        let radius = match node {
            Node::Ban(k) => t.ban_radius[k],
            Node::Sbs(i) => t.sbs_radius[i],
        };
        let d = inst.station_pos(node).distance(t.subarea_centers[s]);
        if d > radius + TOL {
            out.push(Violation::new(
                COVERAGE_DISTANCE,
                format!("subarea {s} is {d:.2} m from {node}, beyond its {radius:.2} m range"),
            ));
        }
    }

    for (i, parent) in plan.sbs_parent.iter().enumerate() {
        match parent {
            Some(p) => {
                if !dep.y[i] {
                    out.push(Violation::new(DEPLOYED_ONLY, format!("undeployed sbs {i} has a backhaul parent")));
                }
                if !node_ok(*p) || !dep.is_deployed(*p) {
                    out.push(Violation::new(DEPLOYED_ONLY, format!("sbs {i} served by undeployed {p}")));
                }
                if *p == Node::Sbs(i) {
                    out.push(Violation::new(ROUTING, format!("sbs {i} is its own parent")));
                } else if node_ok(*p) && !inst.link_exists(*p, i) {
                    out.push(Violation::new(LINK_RANGE, format!("no usable backhaul link from {p} to sbs {i}")));
                }
            }
            None if dep.y[i] => {
                out.push(Violation::new(SBS_BACKHAUL, format!("deployed sbs {i} has no backhaul parent")));
            }
            None => {}
        }
    }
    if !inst.sbs_allowed() {
        for i in dep.sbss() {
            out.push(Violation::new(RESTRICTION, format!("sbs {i} deployed under the fiber-only model")));
        }
    }

    for (j, parent) in plan.ma_parent.iter().enumerate() {
        match parent {
            Some(k) => {
                if !dep.w[j] {
                    out.push(Violation::new(DEPLOYED_ONLY, format!("undeployed ma {j} has a backhaul link")));
                }
                if *k >= inst.n_ban() || !dep.z[*k] {
                    out.push(Violation::new(DEPLOYED_ONLY, format!("ma {j} served by undeployed ban {k}")));
                } else if !inst.ma_link_exists(*k, j) {
                    out.push(Violation::new(LINK_RANGE, format!("no usable backhaul link from ban {k} to ma {j}")));
                }
            }
            None if dep.w[j] => {
                out.push(Violation::new(MA_BACKHAUL, format!("deployed ma {j} has no backhaul link")));
            }
            None => {}
        }
    }

    for k in 0..inst.n_ban() {
        let used = plan.ban_children(k);
        if used > sc.n_b as usize {
            out.push(Violation::new(BAN_SLOTS, format!("ban {k} serves {used} stations, limit {}", sc.n_b)));
        }
    }

    // Routing, hops and capacities only make sense on a rooted forest.
    let r = plan.sbs_coverage(inst.n_sbs());
    let mut rooted = vec![false; inst.n_sbs()];
    for i in 0..inst.n_sbs() {
        if plan.sbs_parent[i].is_none() {
            continue;
        }
        match plan.chain_to_ban(i) {
            Ok((ancestors, _)) => {
                rooted[i] = true;
                let hops = ancestors.len() + 1;
                if hops > inst.hop_limit() {
                    out.push(Violation::new(
                        HOP_LIMIT,
                        format!("sbs {i} is {hops} hops from its BAN, limit {}", inst.hop_limit()),
                    ));
                }
            }
            Err(e) => out.push(Violation::new(ROUTING, e.to_string())),
        }
    }
    for (i, ri) in r.iter().enumerate() {
        if *ri > 0 && !rooted[i] && plan.sbs_parent[i].is_none() && dep.y[i] {
            out.push(Violation::new(ROUTING, format!("subareas covered by sbs {i} cannot reach a BAN")));
        }
    }
    if rooted.iter().zip(&plan.sbs_parent).all(|(ok, p)| *ok || p.is_none()) {
        if let Ok(loads) = plan.sbs_loads() {
            for i in 0..inst.n_sbs() {
                let Some(parent) = plan.sbs_parent[i] else { continue };
                if !node_ok(parent) {
                    continue;
                }
                let limit = inst.link_limit(parent, i);
                if loads[i] > limit {
                    out.push(Violation::new(
                        SBS_CAPACITY,
                        format!("sbs {i} carries {} subareas, link from {parent} supports {limit}", loads[i]),
                    ));
                }
            }
        }
    }

    let mut ma_count = vec![0usize; inst.n_ma()];
    let mut ma_demand = vec![0.0f64; inst.n_ma()];
    for (m, ma) in plan.machine_ma.iter().enumerate() {
        let Some(j) = *ma else { continue };
        if j >= inst.n_ma() || !dep.w[j] {
            out.push(Violation::new(DEPLOYED_ONLY, format!("machine {m} served by undeployed ma {j}")));
            continue;
        }
        ma_count[j] += 1;
        ma_demand[j] += sc.machines[m].rate * sc.radio.compression_ratio;
        let d = sc.ma_sites[j].pos().distance(sc.machines[m].pos());
        if d > sc.radio.ma_range_m + TOL {
            out.push(Violation::new(MACHINE_DISTANCE, format!("machine {m} is {d:.2} m from ma {j}")));
        }
    }
    for j in 0..inst.n_ma() {
        if ma_count[j] > sc.radio.machine_limit as usize {
            out.push(Violation::new(
                MA_MACHINE_LIMIT,
                format!("ma {j} serves {} machines, limit {}", ma_count[j], sc.radio.machine_limit),
            ));
        }
        if ma_count[j] > 0 {
            let cap = plan.ma_parent[j].filter(|k| *k < inst.n_ban()).map(|k| t.ban_ma_capacity[k][j]).unwrap_or(0.0);
            if ma_demand[j] > cap * (1.0 + TOL) + TOL {
                out.push(Violation::new(
                    MA_CAPACITY,
                    format!("ma {j} demand {:.0} bps exceeds backhaul {:.0} bps", ma_demand[j], cap),
                ));
            }
        }
    }

    if let Some(eps) = epsilon {
        let f1 = cost(dep, sc);
        if f1 > eps + TOL {
            out.push(Violation::new(BUDGET, format!("cost {f1} exceeds budget {eps}")));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeploymentDoc {
    pub bans: Vec<usize>,
    pub sbss: Vec<usize>,
    pub mas: Vec<usize>,
}

/// On-disk form of a [`Solution`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionDoc {
    pub deployment: DeploymentDoc,
    pub cover: BTreeMap<usize, String>,
    pub parents: BTreeMap<usize, String>,
    pub ma_links: BTreeMap<usize, usize>,
    pub machines: BTreeMap<usize, usize>,
    pub objectives: ObjectiveVector,
}

impl Solution {
    pub fn to_doc(&self, inst: &Instance) -> SolutionDoc {
        let d = &self.deployment;
        let p = &self.plan;
        SolutionDoc {
            deployment: DeploymentDoc { bans: d.bans().collect(), sbss: d.sbss().collect(), mas: d.mas().collect() },
            cover: p.cover.iter().enumerate().filter_map(|(s, n)| n.map(|n| (s, n.to_string()))).collect(),
            parents: p.sbs_parent.iter().enumerate().filter_map(|(i, n)| n.map(|n| (i, n.to_string()))).collect(),
            ma_links: p.ma_parent.iter().enumerate().filter_map(|(j, k)| k.map(|k| (j, k))).collect(),
            machines: p.machine_ma.iter().enumerate().filter_map(|(m, j)| j.map(|j| (m, j))).collect(),
            objectives: objectives(self, inst),
        }
    }

    /// Rebuilds a solution, rejecting indices outside the scenario.
    pub fn from_doc(doc: &SolutionDoc, inst: &Instance) -> Result<Self> {
        let range = |what: &str, idx: usize, len: usize| {
            if idx < len {
                Ok(idx)
            } else {
                Err(Error::Integrity(format!("{what} index {idx} out of range (have {len})")))
            }
        };
        let node = |text: &str| -> Result<Node> {
            let n: Node = text.parse()?;
            match n {
                Node::Ban(k) => range("ban", k, inst.n_ban()).map(Node::Ban),
                Node::Sbs(i) => range("sbs", i, inst.n_sbs()).map(Node::Sbs),
            }
        };
        let mut deployment = Deployment::empty(inst);
        for k in &doc.deployment.bans {
            deployment.z[range("ban", *k, inst.n_ban())?] = true;
        }
        for i in &doc.deployment.sbss {
            deployment.y[range("sbs", *i, inst.n_sbs())?] = true;
        }
        for j in &doc.deployment.mas {
            deployment.w[range("ma", *j, inst.n_ma())?] = true;
        }
        let mut plan = ConnectionPlan::empty(inst);
        for (s, n) in &doc.cover {
            plan.cover[range("subarea", *s, inst.n_subareas())?] = Some(node(n)?);
        }
        for (i, n) in &doc.parents {
            plan.sbs_parent[range("sbs", *i, inst.n_sbs())?] = Some(node(n)?);
        }
        for (j, k) in &doc.ma_links {
            plan.ma_parent[range("ma", *j, inst.n_ma())?] = Some(range("ban", *k, inst.n_ban())?);
        }
        for (m, j) in &doc.machines {
            plan.machine_ma[range("machine", *m, inst.n_machines())?] = Some(range("ma", *j, inst.n_ma())?);
        }
        Ok(Self { deployment, plan })
    }

    pub fn to_json(&self, inst: &Instance) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc(inst))?)
    }

    pub fn from_json(text: &str, inst: &Instance) -> Result<Self> {
        let doc: SolutionDoc = serde_json::from_str(text)?;
        Self::from_doc(&doc, inst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, GenParams, Point};
    use proptest::prelude::*;

    fn line_instance() -> Instance {
        let mut p = GenParams::tiny(0, 0, 0, 0);
        p.width = 60.0;
        p.height = 10.0;
        p.explicit_ban_sites = Some(vec![Point::new(5.0, 5.0)]);
        p.explicit_sbs_sites = Some(vec![Point::new(20.0, 5.0), Point::new(35.0, 5.0), Point::new(50.0, 5.0)]);
        p.explicit_ma_sites = Some(vec![Point::new(30.0, 5.0)]);
        p.n_relays = 1;
        Instance::new(generate_scenario(&p, 0).unwrap())
    }

    fn ids(v: &[Violation]) -> Vec<&str> {
        v.iter().map(|x| x.id.as_str()).collect()
    }

    #[test]
    fn cost_of_large_preset_counts() {
        let inst = Instance::new(generate_scenario(&GenParams::paper_fig2(), 1).unwrap());
        let d = Deployment::from_indices(&inst, &[0, 1, 2, 3], &(0..18).collect::<Vec<_>>(), &(0..7).collect::<Vec<_>>());
        assert_eq!(cost(&d, &inst.scenario), 65.0);
        assert_eq!(cost(&Deployment::empty(&inst), &inst.scenario), 0.0);
        let mut more = d.clone();
        more.y[30] = true;
        assert_eq!(cost(&more, &inst.scenario) - cost(&d, &inst.scenario), inst.scenario.sbs_sites[30].cost);
    }

    #[test]
    fn empty_solution_objectives_and_feasibility() {
        let inst = line_instance();
        let sol = Solution::empty(&inst);
        let o = objectives(&sol, &inst);
        assert_eq!(o.f1, 0.0);
        assert_eq!(o.f2 as usize, inst.n_subareas());
        assert_eq!(o.fc, inst.worst_fc());
        assert!(check_feasibility(&sol, &inst, Some(0.0)).is_empty());
    }

    #[test]
    fn theta_zero_reduces_to_f2() {
        let inst = Instance::new(generate_scenario(&GenParams::tiny(1, 1, 1, 10), 3).unwrap()).with_theta(0.0);
        let o = objectives(&Solution::empty(&inst), &inst);
        assert_eq!(o.fc, o.f2 as f64);
    }

    #[test]
    fn dominance_examples() {
        assert!(!dominates((10.0, 5.0), (10.0, 5.0)));
        assert!(dominates((9.0, 5.0), (10.0, 5.0)));
        assert!(!dominates((9.0, 6.0), (10.0, 5.0)));
    }

    #[test]
    fn unparented_sbs_is_flagged() {
        let inst = line_instance();
        let mut sol = Solution::empty(&inst);
        sol.deployment.y[0] = true;
        assert_eq!(ids(&check_feasibility(&sol, &inst, None)), vec!["sbs-backhaul"]);
    }

    #[test]
    fn chain_flows_and_hop_limit() {
        let inst = line_instance();
        let mut sol = Solution::empty(&inst);
        sol.deployment = Deployment::from_indices(&inst, &[0], &[0, 1, 2], &[]);
        sol.plan.sbs_parent = vec![Some(Node::Ban(0)), Some(Node::Sbs(0)), Some(Node::Sbs(1))];
        let s = 3;
        sol.plan.cover[s] = Some(Node::Sbs(1));
        let flows = routing_flows(&sol).unwrap();
        assert_eq!(flows[s], vec![Node::Ban(0), Node::Sbs(0), Node::Sbs(1)]);
        assert!(flows[0].is_empty());
        let v = check_feasibility(&sol, &inst, None);
        assert_eq!(ids(&v), vec!["hop-limit"], "{v:?}");
    }

    #[test]
    fn cycles_are_routing_errors() {
        let inst = line_instance();
        let mut sol = Solution::empty(&inst);
        sol.deployment = Deployment::from_indices(&inst, &[0], &[0, 1], &[]);
        sol.plan.sbs_parent = vec![Some(Node::Sbs(1)), Some(Node::Sbs(0)), None];
        sol.plan.cover[3] = Some(Node::Sbs(1));
        assert!(routing_flows(&sol).is_err());
        assert!(ids(&check_feasibility(&sol, &inst, None)).contains(&"routing"));
    }

    #[test]
    fn budget_and_slot_violations() {
        let mut inst = line_instance();
        inst.scenario.n_b = 1;
        let mut sol = Solution::empty(&inst);
        sol.deployment = Deployment::from_indices(&inst, &[0], &[0], &[0]);
        sol.plan.sbs_parent[0] = Some(Node::Ban(0));
        sol.plan.ma_parent[0] = Some(0);
        let v = check_feasibility(&sol, &inst, Some(5.0));
        assert_eq!(ids(&v), vec!["ban-slots", "budget"]);
    }

    #[test]
    fn solution_json_round_trip() {
        let inst = line_instance();
        let mut sol = Solution::empty(&inst);
        sol.deployment = Deployment::from_indices(&inst, &[0], &[0], &[0]);
        sol.plan.sbs_parent[0] = Some(Node::Ban(0));
        sol.plan.ma_parent[0] = Some(0);
        sol.plan.cover[0] = Some(Node::Ban(0));
        sol.plan.cover[1] = Some(Node::Sbs(0));
        let text = sol.to_json(&inst).unwrap();
        assert_eq!(Solution::from_json(&text, &inst).unwrap(), sol);
        let bad = text.replace("\"sbs:0\"", "\"sbs:9\"");
        assert!(Solution::from_json(&bad, &inst).is_err());
    }

    proptest! {
        #[test]
        fn dominance_is_a_strict_partial_order(
            a in (0u8..5, 0u8..5), b in (0u8..5, 0u8..5), c in (0u8..5, 0u8..5)
        ) {
            let f = |p: (u8, u8)| (p.0 as f64, p.1 as f64);
            let (a, b, c) = (f(a), f(b), f(c));
            prop_assert!(!dominates(a, a));
            prop_assert!(!(dominates(a, b) && dominates(b, a)));
            if dominates(a, b) && dominates(b, c) {
                prop_assert!(dominates(a, c));
            }
        }
    }
}
