//! Planning instances: geometry, radio parameters, seeded generation and the
//! derived tables consumed by the solvers.

mod radio;
mod tables;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use radio::{
    poisson_tail_above, shannon_rate, LinkClass, LosState, PathlossParams, RadioConfig, Role,
    MIN_BACKHAUL_SNR_DB,
};
pub use tables::{derive_tables, DerivedTables};

use crate::error::{Error, Result};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub w: f64,
    pub h: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub x: f64,
    pub y: f64,
    pub cost: f64,
}

impl Site {
    pub fn pos(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Machine {
    pub x: f64,
    pub y: f64,
    /// Uplink data rate in bps.
    pub rate: f64,
}

impl Machine {
    pub fn pos(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// An immutable planning instance. Field names form the on-disk JSON schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub version: u32,
    pub area: Area,
    pub radio: RadioConfig,
    pub ban_sites: Vec<Site>,
    pub sbs_sites: Vec<Site>,
    pub ma_sites: Vec<Site>,
    pub machines: Vec<Machine>,
    pub subarea_side: f64,
    /// Backhaul slots per BAN (SBS children plus MA links).
    pub n_b: u32,
    /// Maximum number of relaying SBSs between a BAN and an SBS.
    pub n_relays: u32,
}

impl Scenario {
    pub fn grid_dims(&self) -> (usize, usize) {
        let cols = (self.area.w / self.subarea_side).ceil() as usize;
        let rows = (self.area.h / self.subarea_side).ceil() as usize;
        (cols, rows)
    }

    pub fn num_subareas(&self) -> usize {
        let (c, r) = self.grid_dims();
        c * r
    }

    pub fn num_machines(&self) -> usize {
        self.machines.len()
    }

    /// Subarea centres in row-major order. Cells clipped by the area border
    /// use the midpoint of the clipped cell.
    pub fn subarea_centers(&self) -> Vec<Point> {
        let (cols, rows) = self.grid_dims();
        let side = self.subarea_side;
        let mut out = Vec::with_capacity(cols * rows);
        for r in 0..rows {
            let y0 = r as f64 * side;
            let y1 = ((r + 1) as f64 * side).min(self.area.h);
            for c in 0..cols {
                let x0 = c as f64 * side;
                let x1 = ((c + 1) as f64 * side).min(self.area.w);
                out.push(Point::new(0.5 * (x0 + x1), 0.5 * (y0 + y1)));
            }
        }
        out
    }

    pub fn diagonal(&self) -> f64 {
        self.area.w.hypot(self.area.h)
    }

    /// Sum of all site costs, the loosest useful budget.
    pub fn total_cost(&self) -> f64 {
        self.ban_sites.iter().chain(&self.sbs_sites).chain(&self.ma_sites).map(|s| s.cost).sum()
    }

    pub fn min_ban_cost(&self) -> Option<f64> {
        self.ban_sites.iter().map(|s| s.cost).reduce(f64::min)
    }

    pub fn max_site_cost(&self) -> f64 {
        self.ban_sites
            .iter()
            .chain(&self.sbs_sites)
            .chain(&self.ma_sites)
            .map(|s| s.cost)
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCENARIO_VERSION {
            return Err(Error::InvalidScenario(format!("unsupported version {}", self.version)));
        }
        if !(self.area.w > 0.0 && self.area.h > 0.0 && self.area.w.is_finite() && self.area.h.is_finite()) {
            return Err(Error::InvalidScenario("area must have positive finite size".into()));
        }
        if !(self.subarea_side > 0.0 && self.subarea_side.is_finite()) {
            return Err(Error::InvalidScenario("subarea_side must be positive".into()));
        }
        self.radio.validate()?;
        let inside = |x: f64, y: f64| x >= 0.0 && y >= 0.0 && x <= self.area.w && y <= self.area.h;
        for (role, sites) in [("ban_sites", &self.ban_sites), ("sbs_sites", &self.sbs_sites), ("ma_sites", &self.ma_sites)] {
            for (idx, s) in sites.iter().enumerate() {
                if !inside(s.x, s.y) {
                    return Err(Error::InvalidScenario(format!("{role}[{idx}] lies outside the area")));
                }
                if !(s.cost > 0.0 && s.cost.is_finite()) {
                    return Err(Error::InvalidScenario(format!("{role}[{idx}] must have a positive cost")));
                }
            }
        }
        for (idx, m) in self.machines.iter().enumerate() {
            if !inside(m.x, m.y) {
                return Err(Error::InvalidScenario(format!("machines[{idx}] lies outside the area")));
            }
            if !(m.rate >= 0.0 && m.rate.is_finite()) {
                return Err(Error::InvalidScenario(format!("machines[{idx}] has an invalid rate")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and validates a scenario document. Missing or mistyped fields
    /// are reported by path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|err| Error::Schema {
            field: schema_field(&err),
            message: err.inner().to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// SHA-256 over the canonical (compact) JSON encoding.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

fn schema_field(err: &serde_path_to_error::Error<serde_json::Error>) -> String {
    let path = err.path().to_string();
    let msg = err.inner().to_string();
    // A missing field is reported against its parent; name the field itself.
    if let Some(rest) = msg.strip_prefix("missing field `") {
        if let Some(end) = rest.find('`') {
            let name = &rest[..end];
            return if path == "." { name.to_string() } else { format!("{path}.{name}") };
        }
    }
    path
}

/// Parameters for [`generate_scenario`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub width: f64,
    pub height: f64,
    pub n_ban: usize,
    pub n_sbs: usize,
    pub n_ma: usize,
    pub n_machines: usize,
    pub machine_rate_bps: f64,
    pub ban_cost: f64,
    pub sbs_cost: f64,
    pub ma_cost: f64,
    pub subarea_side: f64,
    pub n_b: u32,
    pub n_relays: u32,
    pub radio: RadioConfig,
    /// Explicit site coordinates; when set they replace the uniform draw for
    /// that role and its count is taken from the list.
    #[serde(default)]
    pub explicit_ban_sites: Option<Vec<Point>>,
    #[serde(default)]
    pub explicit_sbs_sites: Option<Vec<Point>>,
    #[serde(default)]
    pub explicit_ma_sites: Option<Vec<Point>>,
}

impl GenParams {
    /// 400 m x 400 m, 5/40/20 candidate sites, 2000 machines, costs 10/1/1.
    pub fn paper_fig2() -> Self {
        Self {
            width: 400.0,
            height: 400.0,
            n_ban: 5,
            n_sbs: 40,
            n_ma: 20,
            n_machines: 2000,
            machine_rate_bps: 10e3,
            ban_cost: 10.0,
            sbs_cost: 1.0,
            ma_cost: 1.0,
            subarea_side: 10.0,
            n_b: 5,
            n_relays: 2,
            radio: RadioConfig::default(),
            explicit_ban_sites: None,
            explicit_sbs_sites: None,
            explicit_ma_sites: None,
        }
    }

    /// A small instance within the exhaustive oracle's limits.
    pub fn tiny(n_ban: usize, n_sbs: usize, n_ma: usize, n_machines: usize) -> Self {
        Self {
            width: 50.0,
            height: 50.0,
            n_ban,
            n_sbs,
            n_ma,
            n_machines,
            ..Self::paper_fig2()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::InvalidParams("zero-size area".into()));
        }
        if !(self.subarea_side > 0.0) {
            return Err(Error::InvalidParams("subarea_side must be positive".into()));
        }
        for (name, c) in [("ban_cost", self.ban_cost), ("sbs_cost", self.sbs_cost), ("ma_cost", self.ma_cost)] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive")));
            }
        }
        if !(self.machine_rate_bps >= 0.0) {
            return Err(Error::InvalidParams("machine_rate_bps must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Builds a scenario deterministically from `seed`: sites and machines are
/// drawn uniformly over the area unless explicit coordinates are given.
pub fn generate_scenario(params: &GenParams, seed: u64) -> Result<Scenario> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (params.width, params.height);
    let mut draw = |n: usize, explicit: &Option<Vec<Point>>, cost: f64| -> Vec<Site> {
        match explicit {
            Some(points) => points.iter().map(|p| Site { x: p.x, y: p.y, cost }).collect(),
            None => (0..n)
                .map(|_| Site { x: rng.gen_range(0.0..w), y: rng.gen_range(0.0..h), cost })
                .collect(),
        }
    };
    let ban_sites = draw(params.n_ban, &params.explicit_ban_sites, params.ban_cost);
    let sbs_sites = draw(params.n_sbs, &params.explicit_sbs_sites, params.sbs_cost);
    let ma_sites = draw(params.n_ma, &params.explicit_ma_sites, params.ma_cost);
    let machines = (0..params.n_machines)
        .map(|_| Machine { x: rng.gen_range(0.0..w), y: rng.gen_range(0.0..h), rate: params.machine_rate_bps })
        .collect();
    let scenario = Scenario {
        version: SCENARIO_VERSION,
        area: Area { w, h },
        radio: params.radio.clone(),
        ban_sites,
        sbs_sites,
        ma_sites,
        machines,
        subarea_side: params.subarea_side,
        n_b: params.n_b,
        n_relays: params.n_relays,
    };
    scenario.validate()?;
    Ok(scenario)
}
