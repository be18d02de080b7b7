use super::path_state::{Move, PathState};
use crate::model::{ConnectionPlan, Deployment, Instance, Node, Solution, TOL};

/// Result of the fixed-deployment connection heuristic.
#[derive(Clone, Debug, PartialEq)]
pub struct AssignOutcome {
    pub solution: Solution,
    /// Relaxed objective of `solution`.
    pub value: f64,
    /// Deployed SBSs left without a backhaul parent.
    pub unattached: Vec<usize>,
}

/// MA attachments, which depend only on the deployed BANs and MAs.
#[derive(Clone, Debug, PartialEq)]
pub struct MaStage {
    pub ma_parent: Vec<Option<usize>>,
    pub machine_ma: Vec<Option<usize>>,
    /// BAN slots consumed by MA links.
    pub slots: Vec<u32>,
    pub served: usize,
}

/// Each subarea in range of a deployed BAN is covered by the nearest one.
pub fn ban_coverage(dep: &Deployment, inst: &Instance) -> Vec<Option<Node>> {
    let centers = &inst.tables.subarea_centers;
    let mut best: Vec<Option<(f64, usize)>> = vec![None; centers.len()];
    for k in dep.bans() {
        let pos = inst.scenario.ban_sites[k].pos();
        for s in &inst.tables.ban_reach[k] {
            let d = pos.distance(centers[*s as usize]);
            let slot = &mut best[*s as usize];
            if slot.is_none_or(|(bd, _)| d < bd) {
                *slot = Some((d, k));
            }
        }
    }
    best.into_iter().map(|b| b.map(|(_, k)| Node::Ban(k))).collect()
}

/// Machines MA `j` would pick up from BAN `k`: nearest uncovered machines in
/// range, within the per-MA machine limit and the MA's backhaul capacity.
fn ma_pick(inst: &Instance, j: usize, k: usize, taken: &[Option<usize>], out: Option<&mut Vec<usize>>) -> usize {
    let radio = &inst.scenario.radio;
    let cap_bps = inst.tables.ban_ma_capacity[k][j];
    let limit = radio.machine_limit as usize;
    let mut load = 0.0;
    let mut n = 0;
    let mut out = out;
    for m in &inst.tables.ma_reach[j] {
        if n >= limit {
            break;
        }
        let m = *m as usize;
        if taken[m].is_some() {
            continue;
        }
        let demand = inst.scenario.machines[m].rate * radio.compression_ratio;
        if load + demand > cap_bps * (1.0 + TOL) + TOL {
            continue;
        }
        load += demand;
        n += 1;
        if let Some(buf) = out.as_mut() {
            buf.push(m);
        }
    }
    n
}

/// Greedy MA-to-BAN attachment: repeatedly link the (MA, BAN) pair that
/// covers the most machines, retiring BANs whose slots are used up.
pub fn attach_mas(dep: &Deployment, inst: &Instance) -> MaStage {
    let n_b = inst.scenario.n_b;
    let mut stage = MaStage {
        ma_parent: vec![None; inst.n_ma()],
        machine_ma: vec![None; inst.n_machines()],
        slots: vec![0; inst.n_ban()],
        served: 0,
    };
    let mut waiting: Vec<usize> = dep.mas().collect();
    let mut open: Vec<usize> = dep.bans().filter(|_| n_b > 0).collect();
    let mut picked = Vec::new();
    while !waiting.is_empty() && !open.is_empty() {
        let mut best: Option<(usize, usize, usize)> = None;
        for (wi, j) in waiting.iter().enumerate() {
            for (ki, k) in open.iter().enumerate() {
                if !inst.ma_link_exists(*k, *j) {
                    continue;
                }
                let cov = ma_pick(inst, *j, *k, &stage.machine_ma, None);
                if best.is_none_or(|(c, _, _)| cov > c) {
                    best = Some((cov, wi, ki));
                }
            }
        }
        let Some((_, wi, ki)) = best else { break };
        let (j, k) = (waiting[wi], open[ki]);
        picked.clear();
        ma_pick(inst, j, k, &stage.machine_ma, Some(&mut picked));
        for m in &picked {
            stage.machine_ma[*m] = Some(j);
        }
        stage.served += picked.len();
        stage.ma_parent[j] = Some(k);
        stage.slots[k] += 1;
        waiting.remove(wi);
        if stage.slots[k] >= n_b {
            open.remove(ki);
        }
    }
    stage
}

/// The connection heuristic for a fixed deployment, reusing precomputed BAN
/// coverage and MA attachments.
pub fn assign_with_stage(
    dep: &Deployment,
    lambda: &[f64],
    inst: &Instance,
    ban_cover: &[Option<Node>],
    ma: &MaStage,
) -> AssignOutcome {
    let ban_covered = ban_cover.iter().filter(|c| c.is_some()).count();
    let v0 = inst.worst_fc() - ban_covered as f64 - inst.theta * ma.served as f64;
    let mut state = PathState::new(inst, lambda, ban_cover.to_vec(), ma.slots.clone(), v0);

    let bans: Vec<usize> = dep.bans().collect();
    let mut pending: Vec<usize> = if inst.sbs_allowed() { dep.sbss().collect() } else { Vec::new() };
    let mut attached: Vec<usize> = Vec::new();
    while !pending.is_empty() {
        let mut best: Option<(f64, usize, Move)> = None;
        for (pi, i) in pending.iter().enumerate() {
            let i = *i;
            let consider = |mv: Move, best: &mut Option<(f64, usize, Move)>| {
                if let Some(d) = state.delta(mv) {
                    if best.is_none_or(|(bd, _, _)| d < bd) {
                        *best = Some((d, pi, mv));
                    }
                }
            };
            for k in &bans {
                consider(Move::AttachBan { i, k: *k }, &mut best);
            }
            for p in &attached {
                consider(Move::InsertBefore { i, p: *p }, &mut best);
                consider(Move::InsertAfter { i, p: *p }, &mut best);
            }
        }
        let Some((_, pi, mv)) = best else { break };
        state.apply(mv);
        let i = pending.remove(pi);
        let at = attached.partition_point(|x| *x < i);
        attached.insert(at, i);
    }

    let mut plan = ConnectionPlan {
        cover: Vec::new(),
        sbs_parent: vec![None; inst.n_sbs()],
        ma_parent: ma.ma_parent.clone(),
        machine_ma: ma.machine_ma.clone(),
    };
    state.write_plan(&mut plan);
    AssignOutcome {
        solution: Solution { deployment: dep.clone(), plan },
        value: state.value,
        unattached: pending,
    }
}

/// Connection heuristic for a fixed deployment under multipliers `lambda`:
/// nearest-BAN coverage, greedy MA attachment, then SBSs attached one at a
/// time by the smallest exact relaxed-objective change.
pub fn assign_connections(dep: &Deployment, lambda: &[f64], inst: &Instance) -> AssignOutcome {
    let cover = ban_coverage(dep, inst);
    let ma = attach_mas(dep, inst);
    assign_with_stage(dep, lambda, inst, &cover, &ma)
}
