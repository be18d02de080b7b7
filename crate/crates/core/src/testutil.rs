use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{ConnectionPlan, Deployment, Instance, Node, Solution};
use crate::scenario::{generate_scenario, GenParams};

pub fn tiny(seed: u64, n_ban: usize, n_sbs: usize, n_ma: usize, n_machines: usize) -> Instance {
    Instance::new(generate_scenario(&GenParams::tiny(n_ban, n_sbs, n_ma, n_machines), seed).unwrap())
}

pub fn random_deployment<R: Rng>(inst: &Instance, rng: &mut R) -> Deployment {
    Deployment {
        z: (0..inst.n_ban()).map(|_| rng.gen_bool(0.6)).collect(),
        y: (0..inst.n_sbs()).map(|_| rng.gen_bool(0.6)).collect(),
        w: (0..inst.n_ma()).map(|_| rng.gen_bool(0.6)).collect(),
    }
}

/// A random acyclic plan touching only deployed stations; capacity, hop and
/// slot limits are ignored.
pub fn random_solution<R: Rng>(inst: &Instance, rng: &mut R) -> Solution {
    let deployment = random_deployment(inst, rng);
    let mut plan = ConnectionPlan::empty(inst);
    let bans: Vec<usize> = deployment.bans().collect();
    let mut sbss: Vec<usize> = deployment.sbss().collect();
    sbss.shuffle(rng);
    let mut placed: Vec<usize> = Vec::new();
    if !bans.is_empty() {
        for i in sbss {
            let pick = rng.gen_range(0..bans.len() + placed.len());
            plan.sbs_parent[i] =
                Some(if pick < bans.len() { Node::Ban(bans[pick]) } else { Node::Sbs(placed[pick - bans.len()]) });
            placed.push(i);
        }
    }
    for s in 0..inst.n_subareas() {
        let mut options: Vec<Node> = Vec::new();
        for k in &bans {
            if inst.tables.ban_reach[*k].contains(&(s as u32)) {
                options.push(Node::Ban(*k));
            }
        }
        for i in &placed {
            if inst.tables.sbs_reach[*i].contains(&(s as u32)) {
                options.push(Node::Sbs(*i));
            }
        }
        if !options.is_empty() && rng.gen_bool(0.8) {
            plan.cover[s] = Some(*options.choose(rng).unwrap());
        }
    }
    if !bans.is_empty() {
        for j in deployment.mas() {
            plan.ma_parent[j] = Some(*bans.choose(rng).unwrap());
        }
    }
    for m in 0..inst.n_machines() {
        let options: Vec<usize> =
            deployment.mas().filter(|j| inst.tables.ma_reach[*j].contains(&(m as u32))).collect();
        if !options.is_empty() && rng.gen_bool(0.8) {
            plan.machine_ma[m] = Some(*options.choose(rng).unwrap());
        }
    }
    Solution { deployment, plan }
}
