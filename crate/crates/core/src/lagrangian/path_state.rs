use crate::model::{ConnectionPlan, Instance, Node};

/// A backhaul chain `k, i_1, …, i_q` hanging off BAN `k`; `i_n` sits at hop `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Path {
    pub ban: usize,
    pub nodes: Vec<usize>,
}

/// Candidate attachment of an unattached SBS `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    /// New path: BAN `k` serves `i` directly.
    AttachBan { i: usize, k: usize },
    /// `i` is placed between `p` and the node one hop above it.
    InsertBefore { i: usize, p: usize },
    /// `i` is placed between `p` and the node one hop below it (if any).
    InsertAfter { i: usize, p: usize },
}

impl Move {
    pub fn sbs(&self) -> usize {
        match *self {
            Move::AttachBan { i, .. } | Move::InsertBefore { i, .. } | Move::InsertAfter { i, .. } => i,
        }
    }
}

/// Full effect of a move: objective change, subareas taken by the new SBS
/// and downstream SBSs whose coverage is released.
#[derive(Clone, Debug, PartialEq)]
pub struct MoveEval {
    pub delta: f64,
    pub take: Vec<u32>,
    pub zeroed: Vec<usize>,
}

/// Path bookkeeping for the connection heuristic: chains per BAN, each
/// SBS's position, coverage and the running relaxed objective.
#[derive(Clone, Debug)]
pub struct PathState<'a> {
    inst: &'a Instance,
    lambda: &'a [f64],
    pub paths: Vec<Path>,
    /// `(path, index)` of each attached SBS; its hop is `index + 1`.
    pub pos: Vec<Option<(usize, usize)>>,
    pub cover: Vec<Option<Node>>,
    pub covered_by: Vec<Vec<u32>>,
    pub ban_slots: Vec<u32>,
    pub value: f64,
}

impl<'a> PathState<'a> {
    /// Starts from fixed BAN coverage and slot usage with every SBS detached.
    pub fn new(inst: &'a Instance, lambda: &'a [f64], cover: Vec<Option<Node>>, ban_slots: Vec<u32>, value: f64) -> Self {
        Self {
            inst,
            lambda,
            paths: Vec::new(),
            pos: vec![None; inst.n_sbs()],
            cover,
            covered_by: vec![Vec::new(); inst.n_sbs()],
            ban_slots,
            value,
        }
    }

    pub fn is_attached(&self, i: usize) -> bool {
        self.pos[i].is_some()
    }

    /// Hop number `h_i`.
    pub fn hop(&self, i: usize) -> Option<usize> {
        self.pos[i].map(|(_, idx)| idx + 1)
    }

    /// `L_{P_i}`, the deepest hop on `i`'s path.
    pub fn path_len(&self, i: usize) -> Option<usize> {
        self.pos[i].map(|(p, _)| self.paths[p].nodes.len())
    }

    /// SBSs on `i`'s path closer to the BAN.
    pub fn predecessors(&self, i: usize) -> &[usize] {
        match self.pos[i] {
            Some((p, idx)) => &self.paths[p].nodes[..idx],
            None => &[],
        }
    }

    /// SBSs on `i`'s path farther from the BAN.
    pub fn successors(&self, i: usize) -> &[usize] {
        match self.pos[i] {
            Some((p, idx)) => &self.paths[p].nodes[idx + 1..],
            None => &[],
        }
    }

    /// The node at hop `n` of `i`'s path (hop 0 is the BAN).
    pub fn node_at_hop(&self, i: usize, n: usize) -> Option<Node> {
        let (p, _) = self.pos[i]?;
        let path = &self.paths[p];
        if n == 0 {
            Some(Node::Ban(path.ban))
        } else {
            path.nodes.get(n - 1).map(|s| Node::Sbs(*s))
        }
    }

    pub fn parent(&self, i: usize) -> Option<Node> {
        self.node_at_hop(i, self.hop(i)? - 1)
    }

    /// `r_i`.
    pub fn r(&self, i: usize) -> u32 {
        self.covered_by[i].len() as u32
    }

    fn free_for(&self, s: u32, zeroed: &[usize]) -> bool {
        match self.cover[s as usize] {
            None => true,
            Some(Node::Sbs(d)) => zeroed.contains(&d),
            Some(Node::Ban(_)) => false,
        }
    }

    /// Nearest-first reachable subareas available to `i`, capped at `cap`.
    fn count_take(&self, i: usize, cap: u32, zeroed: &[usize], out: Option<&mut Vec<u32>>) -> u32 {
        let mut n = 0;
        let reach = &self.inst.tables.sbs_reach[i];
        match out {
            Some(buf) => {
                for s in reach {
                    if n >= cap {
                        break;
                    }
                    if self.free_for(*s, zeroed) {
                        buf.push(*s);
                        n += 1;
                    }
                }
            }
            None => {
                for s in reach {
                    if n >= cap {
                        break;
                    }
                    if self.free_for(*s, zeroed) {
                        n += 1;
                    }
                }
            }
        }
        n
    }

    fn eval_inner(&self, mv: Move, mut record: Option<(&mut Vec<u32>, &mut Vec<usize>)>) -> Option<f64> {
        let inst = self.inst;
        let lambda = self.lambda;
        let i = mv.sbs();
        if self.is_attached(i) || !inst.sbs_allowed() {
            return None;
        }
        let li = lambda[i];
        let (new_parent, prefix, downstream, child_rewire): (Node, f64, &[usize], Option<(usize, Node)>) = match mv {
            Move::AttachBan { k, .. } => {
                if self.ban_slots[k] >= inst.scenario.n_b || !inst.link_exists(Node::Ban(k), i) {
                    return None;
                }
                (Node::Ban(k), 0.0, &[], None)
            }
            Move::InsertBefore { p, .. } => {
                let (path, idx) = self.pos[p]?;
                let nodes = &self.paths[path].nodes;
                if nodes.len() >= inst.hop_limit() {
                    return None;
                }
                let q = if idx == 0 { Node::Ban(self.paths[path].ban) } else { Node::Sbs(nodes[idx - 1]) };
                if !inst.link_exists(q, i) || !inst.link_exists(Node::Sbs(i), p) {
                    return None;
                }
                let prefix: f64 = nodes[..idx].iter().map(|n| lambda[*n]).sum();
                (q, prefix, &nodes[idx..], Some((p, q)))
            }
            Move::InsertAfter { p, .. } => {
                let (path, idx) = self.pos[p]?;
                let nodes = &self.paths[path].nodes;
                if nodes.len() >= inst.hop_limit() {
                    return None;
                }
                let prefix: f64 = nodes[..=idx].iter().map(|n| lambda[*n]).sum();
                let rewire = nodes.get(idx + 1).map(|c| (*c, Node::Sbs(p)));
                if !inst.link_exists(Node::Sbs(p), i) || rewire.is_some_and(|(c, _)| !inst.link_exists(Node::Sbs(i), c)) {
                    return None;
                }
                (Node::Sbs(p), prefix, &nodes[idx + 1..], rewire)
            }
        };

        let mut delta = 0.0;
        // Downstream SBSs gain `λ_i` in their path coefficient; those whose
        // coefficient turns positive drop their coverage.
        let mut zeroed_local: Vec<usize> = Vec::new();
        let mut run = prefix + li;
        for d in downstream {
            let rd = self.r(*d) as f64;
            let old_coef = run - li + lambda[*d] - 1.0;
            let new_coef = old_coef + li;
            if new_coef > 0.0 && rd > 0.0 {
                delta -= old_coef * rd;
                zeroed_local.push(*d);
            } else {
                delta += li * rd;
            }
            run += lambda[*d];
        }

        let coef_i = prefix + li - 1.0;
        let cap = inst.link_limit(new_parent, i);
        let taken = if coef_i > 0.0 {
            0
        } else {
            match record.as_mut() {
                Some((take, _)) => self.count_take(i, cap, &zeroed_local, Some(take)),
                None => self.count_take(i, cap, &zeroed_local, None),
            }
        };
        delta += coef_i * taken as f64;

        delta -= li * cap as f64;
        if let Some((c, old_parent)) = child_rewire {
            delta += lambda[c] * (inst.link_limit(old_parent, c) as f64 - inst.link_limit(Node::Sbs(i), c) as f64);
        }
        if let Some((_, zeroed)) = record {
            *zeroed = zeroed_local;
        }
        Some(delta)
    }

    /// Exact relaxed-objective change of `mv`, or `None` when the move is not
    /// available (BAN slots exhausted, hop limit reached, `i` attached).
    pub fn delta(&self, mv: Move) -> Option<f64> {
        self.eval_inner(mv, None)
    }

    pub fn evaluate(&self, mv: Move) -> Option<MoveEval> {
        let mut take = Vec::new();
        let mut zeroed = Vec::new();
        let delta = self.eval_inner(mv, Some((&mut take, &mut zeroed)))?;
        Some(MoveEval { delta, take, zeroed })
    }

    /// Applies `mv`; returns the objective change, or `None` if unavailable.
    pub fn apply(&mut self, mv: Move) -> Option<f64> {
        let eval = self.evaluate(mv)?;
        for d in &eval.zeroed {
            for s in std::mem::take(&mut self.covered_by[*d]) {
                self.cover[s as usize] = None;
            }
        }
        let i = mv.sbs();
        for s in &eval.take {
            self.cover[*s as usize] = Some(Node::Sbs(i));
        }
        self.covered_by[i] = eval.take;
        match mv {
            Move::AttachBan { k, .. } => {
                self.ban_slots[k] += 1;
                self.paths.push(Path { ban: k, nodes: vec![i] });
                self.pos[i] = Some((self.paths.len() - 1, 0));
            }
            Move::InsertBefore { p, .. } | Move::InsertAfter { p, .. } => {
                let (path, idx) = self.pos[p].expect("evaluated move has an attached anchor");
                let at = if matches!(mv, Move::InsertBefore { .. }) { idx } else { idx + 1 };
                self.paths[path].nodes.insert(at, i);
                for (n, node) in self.paths[path].nodes.iter().enumerate().skip(at) {
                    self.pos[*node] = Some((path, n));
                }
            }
        }
        self.value += eval.delta;
        Some(eval.delta)
    }

    /// Writes coverage and parents into `plan` (MA fields are left alone).
    pub fn write_plan(&self, plan: &mut ConnectionPlan) {
        plan.cover.clone_from(&self.cover);
        for i in 0..self.pos.len() {
            plan.sbs_parent[i] = self.parent(i);
        }
    }

    /// Checks the bookkeeping against a parent-forest reconstruction.
    pub fn is_consistent(&self) -> bool {
        let mut plan = ConnectionPlan::empty(self.inst);
        self.write_plan(&mut plan);
        for i in 0..self.pos.len() {
            match (self.pos[i], plan.chain_to_ban(i)) {
                (None, Err(_)) => {}
                (Some((path, idx)), Ok((ancestors, k))) => {
                    if k != self.paths[path].ban || ancestors.len() != idx {
                        return false;
                    }
                    let mut pred: Vec<usize> = ancestors;
                    pred.reverse();
                    if pred != self.predecessors(i) {
                        return false;
                    }
                }
                _ => return false,
            }
            let covered = self.cover.iter().filter(|c| **c == Some(Node::Sbs(i))).count();
            if covered != self.covered_by[i].len() {
                return false;
            }
        }
        true
    }
}
