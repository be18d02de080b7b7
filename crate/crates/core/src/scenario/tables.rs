use serde::{Deserialize, Serialize};

use super::{LinkClass, Point, Role, Scenario};

/// Precomputed radio-derived inputs shared by every solver.
///
/// Index conventions: `k` BAN sites, `i`/`p` SBS sites, `j` MA sites, `s`
/// subareas (row-major), `m` machines. Reach lists are sorted nearest-first
/// with ties broken by index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedTables {
    pub scenario_hash: String,
    pub subarea_centers: Vec<Point>,
    pub ban_radius: Vec<f64>,
    pub sbs_radius: Vec<f64>,
    pub ban_reach: Vec<Vec<u32>>,
    pub sbs_reach: Vec<Vec<u32>>,
    /// `C_ki`, indexed `[k][i]`.
    pub ban_sbs_capacity: Vec<Vec<f64>>,
    /// `C_pi`, indexed `[p][i]`; the diagonal is zero.
    pub sbs_sbs_capacity: Vec<Vec<f64>>,
    /// `C_kj`, indexed `[k][j]`.
    pub ban_ma_capacity: Vec<Vec<f64>>,
    /// `N_ki`, indexed `[k][i]`.
    pub ban_sbs_limit: Vec<Vec<u32>>,
    /// `N_pi`, indexed `[p][i]`.
    pub sbs_sbs_limit: Vec<Vec<u32>>,
    pub ma_reach: Vec<Vec<u32>>,
    pub machine_limit: u32,
}

/// Links shorter than this are evaluated at this length.
const MIN_LINK_DISTANCE: f64 = 1e-3;

fn sorted_reach(origin: Point, radius: f64, targets: &[Point]) -> Vec<u32> {
    let mut hits: Vec<(f64, u32)> = targets
        .iter()
        .enumerate()
        .filter_map(|(idx, t)| {
            let d = origin.distance(*t);
            (d <= radius).then_some((d, idx as u32))
        })
        .collect();
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    hits.into_iter().map(|(_, idx)| idx).collect()
}

pub fn derive_tables(scenario: &Scenario) -> DerivedTables {
    let radio = &scenario.radio;
    let centers = scenario.subarea_centers();
    let diag = scenario.diagonal();
    let subarea_area = scenario.subarea_side * scenario.subarea_side;
    let s_count = centers.len() as u32;

    let ban_pos: Vec<Point> = scenario.ban_sites.iter().map(|s| s.pos()).collect();
    let sbs_pos: Vec<Point> = scenario.sbs_sites.iter().map(|s| s.pos()).collect();
    let ma_pos: Vec<Point> = scenario.ma_sites.iter().map(|s| s.pos()).collect();
    let machine_pos: Vec<Point> = scenario.machines.iter().map(|m| m.pos()).collect();

    // Radii depend only on the role's radio parameters.
    let ban_r = radio.coverage_radius(LinkClass::Access, Role::Ban, diag);
    let sbs_r = radio.coverage_radius(LinkClass::Access, Role::Sbs, diag);
    let ban_radius = vec![ban_r; ban_pos.len()];
    let sbs_radius = vec![sbs_r; sbs_pos.len()];

    let ban_reach = ban_pos.iter().map(|p| sorted_reach(*p, ban_r, &centers)).collect();
    let sbs_reach = sbs_pos.iter().map(|p| sorted_reach(*p, sbs_r, &centers)).collect();

    let capacity = |a: Point, b: Point, role: Role| {
        radio
            .capacity_at_distance(a.distance(b).max(MIN_LINK_DISTANCE), LinkClass::Backhaul, role)
            .expect("positive link distance")
    };
    let ban_sbs_capacity: Vec<Vec<f64>> =
        ban_pos.iter().map(|k| sbs_pos.iter().map(|i| capacity(*k, *i, Role::Ban)).collect()).collect();
    let sbs_sbs_capacity: Vec<Vec<f64>> = sbs_pos
        .iter()
        .enumerate()
        .map(|(p, pp)| {
            sbs_pos
                .iter()
                .enumerate()
                .map(|(i, ip)| if p == i { 0.0 } else { capacity(*pp, *ip, Role::Sbs) })
                .collect()
        })
        .collect();
    let ban_ma_capacity =
        ban_pos.iter().map(|k| ma_pos.iter().map(|j| capacity(*j, *k, Role::Ma)).collect()).collect();

    let limit = |c: f64| radio.subarea_capacity_limit(c, subarea_area, s_count);
    let ban_sbs_limit = ban_sbs_capacity.iter().map(|row| row.iter().map(|c| limit(*c)).collect()).collect();
    let sbs_sbs_limit = sbs_sbs_capacity
        .iter()
        .enumerate()
        .map(|(p, row)| row.iter().enumerate().map(|(i, c)| if p == i { 0 } else { limit(*c) }).collect())
        .collect();

    let ma_reach = ma_pos.iter().map(|j| sorted_reach(*j, radio.ma_range_m, &machine_pos)).collect();

    DerivedTables {
        scenario_hash: scenario.content_hash(),
        subarea_centers: centers,
        ban_radius,
        sbs_radius,
        ban_reach,
        sbs_reach,
        ban_sbs_capacity,
        sbs_sbs_capacity,
        ban_ma_capacity,
        ban_sbs_limit,
        sbs_sbs_limit,
        ma_reach,
        machine_limit: radio.machine_limit,
    }
}

impl DerivedTables {
    pub fn num_subareas(&self) -> usize {
        self.subarea_centers.len()
    }

    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Whether the cached tables belong to `scenario`.
    pub fn matches(&self, scenario: &Scenario) -> bool {
        self.scenario_hash == scenario.content_hash()
    }
}
