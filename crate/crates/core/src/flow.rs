//! Exact coverage assignments for a fixed backhaul structure via max flow.

use std::collections::BTreeMap;

use petgraph::algo::dinics;
use petgraph::graph::{DiGraph, EdgeIndex};

use crate::model::{Deployment, Instance, Node};

/// Largest set of subareas the rooted stations of `parents` can cover, with
/// every SBS link carrying at most its subarea limit. Returns the coverage
/// assignment and the number covered.
pub(crate) fn max_coverage(inst: &Instance, dep: &Deployment, parents: &[Option<Node>]) -> (Vec<Option<Node>>, u32) {
    let n_s = inst.n_subareas();
    let n_sbs = inst.n_sbs();
    let rooted = rooted_sbs(parents, n_sbs);
    let mut cover = vec![None; n_s];
    let mut direct = 0;
    for k in dep.bans() {
        for s in &inst.tables.ban_reach[k] {
            if cover[*s as usize].is_none() {
                cover[*s as usize] = Some(Node::Ban(k));
                direct += 1;
            }
        }
    }
    let mut live: Vec<bool> = (0..n_sbs).map(|i| dep.y[i] && rooted[i]).collect();
    loop {
        let dead: Vec<usize> =
            (0..n_sbs).filter(|i| live[*i] && matches!(parents[*i], Some(Node::Sbs(p)) if !live[p])).collect();
        if dead.is_empty() {
            break;
        }
        for i in dead {
            live[i] = false;
        }
    }
    let active: Vec<usize> = (0..n_sbs).filter(|i| live[*i]).collect();
    let targets = Targets::build(n_s, active.iter().enumerate().map(|(t, i)| {
        (t, inst.tables.sbs_reach[*i].iter().map(|s| *s as usize).filter(|s| cover[*s].is_none()))
    }));
    let mut position = vec![usize::MAX; n_sbs];
    for (t, i) in active.iter().enumerate() {
        position[*i] = t;
    }
    let upstream: Vec<Upstream> = active
        .iter()
        .map(|i| match parents[*i] {
            Some(Node::Sbs(p)) => Upstream::Target(position[p], inst.link_limit(Node::Sbs(p), *i)),
            Some(Node::Ban(k)) => Upstream::Sink(inst.link_limit(Node::Ban(k), *i)),
            None => unreachable!(),
        })
        .collect();
    let (assign, value) = grouped_flow(&targets, &upstream);
    for (s, t) in assign.into_iter().enumerate() {
        if let Some(t) = t {
            cover[s] = Some(Node::Sbs(active[t]));
        }
    }
    (cover, direct + value)
}

/// Largest machine assignment for fixed MA parents when every MA's machine
/// allowance is known (`caps[j]`, zero for MAs without a parent).
pub(crate) fn max_machines(inst: &Instance, caps: &[usize]) -> (Vec<Option<usize>>, u32) {
    let targets = Targets::build(
        inst.n_machines(),
        (0..caps.len()).filter(|j| caps[*j] > 0).map(|j| (j, inst.tables.ma_reach[j].iter().map(|m| *m as usize))),
    );
    let upstream: Vec<Upstream> = caps.iter().map(|c| Upstream::Sink(*c as u32)).collect();
    grouped_flow(&targets, &upstream)
}

/// Target lists of every item, stored contiguously in increasing target
/// order.
struct Targets {
    offsets: Vec<usize>,
    data: Vec<usize>,
}

impl Targets {
    /// `lists` yields, in increasing target order, each target with the
    /// items it can take.
    fn build<I, L>(n_items: usize, lists: L) -> Self
    where
        I: Iterator<Item = usize> + Clone,
        L: Iterator<Item = (usize, I)> + Clone,
    {
        let mut offsets = vec![0usize; n_items + 1];
        for (_, items) in lists.clone() {
            for item in items {
                offsets[item + 1] += 1;
            }
        }
        for i in 0..n_items {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut data = vec![0usize; offsets[n_items]];
        for (t, items) in lists {
            for item in items {
                data[fill[item]] = t;
                fill[item] += 1;
            }
        }
        Self { offsets, data }
    }

    fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    fn of(&self, item: usize) -> &[usize] {
        &self.data[self.offsets[item]..self.offsets[item + 1]]
    }
}

/// Where a target's accepted items go next, and the capacity of that edge.
enum Upstream {
    Sink(u32),
    Target(usize, u32),
}

/// Assigns items to targets (each item to at most one of `targets[item]`)
/// maximizing the number assigned, where the targets form a forest rooted at
/// the sink with capacitated edges. Items with the same target set are
/// merged into one node before solving.
fn grouped_flow(targets: &Targets, upstream: &[Upstream]) -> (Vec<Option<usize>>, u32) {
    let mut assign = vec![None; targets.len()];
    let mut groups: BTreeMap<&[usize], Vec<usize>> = BTreeMap::new();
    for item in 0..targets.len() {
        let t = targets.of(item);
        if !t.is_empty() {
            groups.entry(t).or_default().push(item);
        }
    }
    if groups.is_empty() {
        return (assign, 0);
    }
    let n_links: usize = groups.keys().map(|k| k.len() + 1).sum();
    let mut g: DiGraph<(), u32> = DiGraph::with_capacity(groups.len() + upstream.len() + 2, n_links + upstream.len());
    let src = g.add_node(());
    let sink = g.add_node(());
    let nodes: Vec<_> = (0..upstream.len()).map(|_| g.add_node(())).collect();
    for (t, up) in upstream.iter().enumerate() {
        match *up {
            Upstream::Sink(cap) => g.add_edge(nodes[t], sink, cap),
            Upstream::Target(p, cap) => g.add_edge(nodes[t], nodes[p], cap),
        };
    }
    let mut links: Vec<(EdgeIndex, usize, usize)> = Vec::new();
    let members: Vec<&Vec<usize>> = groups.values().collect();
    for (gi, (set, items)) in groups.iter().enumerate() {
        let node = g.add_node(());
        g.add_edge(src, node, items.len() as u32);
        for t in set.iter() {
            links.push((g.add_edge(node, nodes[*t], items.len() as u32), gi, *t));
        }
    }
    let (value, flows) = dinics(&g, src, sink);
    let mut next = vec![0usize; members.len()];
    for (e, gi, t) in links {
        for _ in 0..flows[e.index()] {
            assign[members[gi][next[gi]]] = Some(t);
            next[gi] += 1;
        }
    }
    (assign, value)
}

/// SBSs whose parent chain ends at a BAN.
pub(crate) fn rooted_sbs(parents: &[Option<Node>], n_sbs: usize) -> Vec<bool> {
    let mut state = vec![0u8; n_sbs];
    for start in 0..n_sbs {
        let mut chain = Vec::new();
        let mut cur = start;
        let ok = loop {
            match state[cur] {
                1 => break true,
                2 => break false,
                _ => {}
            }
            if chain.contains(&cur) {
                break false;
            }
            chain.push(cur);
            match parents[cur] {
                Some(Node::Ban(_)) => break true,
                Some(Node::Sbs(p)) if p < n_sbs => cur = p,
                _ => break false,
            }
        };
        for c in chain {
            state[c] = if ok { 1 } else { 2 };
        }
    }
    state.into_iter().map(|s| s == 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_feasibility, ConnectionPlan, Solution};
    use crate::testutil::tiny;

    #[test]
    fn rooted_detection() {
        let parents = vec![Some(Node::Ban(0)), Some(Node::Sbs(0)), Some(Node::Sbs(3)), Some(Node::Sbs(2)), None];
        assert_eq!(rooted_sbs(&parents, 5), vec![true, true, false, false, false]);
    }

    #[test]
    fn ban_only_coverage_counts_reachable_subareas() {
        let inst = tiny(2, 2, 0, 0, 0);
        let dep = Deployment::from_indices(&inst, &[0, 1], &[], &[]);
        let (cover, n) = max_coverage(&inst, &dep, &[]);
        let mut reach: Vec<u32> = inst.tables.ban_reach[0].iter().chain(&inst.tables.ban_reach[1]).copied().collect();
        reach.sort();
        reach.dedup();
        assert_eq!(n as usize, reach.len());
        assert_eq!(cover.iter().filter(|c| c.is_some()).count(), reach.len());
    }

    #[test]
    fn flow_coverage_is_feasible() {
        for seed in 0..20 {
            let inst = tiny(seed, 2, 3, 0, 0);
            let dep = Deployment::from_indices(&inst, &[0], &[0, 1, 2], &[]);
            let parents: Vec<Option<Node>> = (0..3)
                .map(|i| if i == 0 { Some(Node::Ban(0)) } else { Some(Node::Sbs(i - 1)) })
                .collect();
            if (0..3).any(|i| !inst.link_exists(parents[i].unwrap(), i)) {
                continue;
            }
            let (cover, _) = max_coverage(&inst, &dep, &parents);
            let mut plan = ConnectionPlan::empty(&inst);
            plan.cover = cover;
            plan.sbs_parent = parents;
            let sol = Solution { deployment: dep, plan };
            let v = check_feasibility(&sol, &inst, None);
            assert!(v.iter().all(|v| v.id == "hop-limit"), "{v:?}");
        }
    }
}
