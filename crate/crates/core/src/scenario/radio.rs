//! Radio abstractions: log-distance pathloss with lognormal shadowing,
//! exponential LOS probability, access outage and backhaul capacity.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Below this effective SNR a backhaul link is treated as unusable.
pub const MIN_BACKHAUL_SNR_DB: f64 = -20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkClass {
    Access,
    Backhaul,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LosState {
    Los,
    Nlos,
}

/// Transmitting station role, used to pick the transmit power.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Ban,
    Sbs,
    /// Machine aggregator transmitting its aggregated uplink towards a BAN.
    Ma,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathlossParams {
    pub exponent: f64,
    pub shadowing_std_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub carrier_frequency_hz: f64,
    pub wavelength_m: f64,
    pub reference_distance_m: f64,
    pub access_los: PathlossParams,
    pub access_nlos: PathlossParams,
    pub backhaul_los: PathlossParams,
    pub backhaul_nlos: PathlossParams,
    /// LOS probability decay, `p_los(d) = exp(-beta * d)`.
    pub blockage_beta: f64,
    pub tx_power_ban_dbm: f64,
    pub tx_power_sbs_dbm: f64,
    pub tx_power_ma_dbm: f64,
    pub access_bandwidth_hz: f64,
    pub backhaul_bandwidth_hz: f64,
    pub noise_power_dbm: f64,
    pub snr_threshold_db: f64,
    pub access_outage: f64,
    pub backhaul_outage: f64,
    pub user_density_per_m2: f64,
    pub per_user_rate_bps: f64,
    pub compression_ratio: f64,
    pub htc_mtc_weight: f64,
    pub machine_limit: u32,
    pub ma_range_m: f64,
}

impl Default for RadioConfig {
    /// 73 GHz defaults.
    fn default() -> Self {
        let carrier = 73e9;
        Self {
            carrier_frequency_hz: carrier,
            wavelength_m: SPEED_OF_LIGHT / carrier,
            reference_distance_m: 1.0,
            access_los: PathlossParams { exponent: 2.0, shadowing_std_db: 5.2 },
            access_nlos: PathlossParams { exponent: 3.3, shadowing_std_db: 7.6 },
            backhaul_los: PathlossParams { exponent: 2.0, shadowing_std_db: 4.2 },
            backhaul_nlos: PathlossParams { exponent: 2.9, shadowing_std_db: 7.0 },
            blockage_beta: 0.046,
            tx_power_ban_dbm: 30.0,
            tx_power_sbs_dbm: 30.0,
            tx_power_ma_dbm: 30.0,
            access_bandwidth_hz: 1e9,
            backhaul_bandwidth_hz: 1e9,
            noise_power_dbm: -74.0,
            snr_threshold_db: -10.0,
            access_outage: 0.1,
            backhaul_outage: 0.1,
            user_density_per_m2: 200.0 / 1e6,
            per_user_rate_bps: 100e6,
            compression_ratio: 1.0,
            htc_mtc_weight: 0.5,
            machine_limit: 600,
            ma_range_m: 100.0,
        }
    }
}

/// Standard normal CDF evaluated at `(x - mean) / std`; a zero deviation
/// degenerates to the step `x >= mean`.
fn gaussian_cdf(x: f64, mean: f64, std: f64) -> f64 {
    if std <= 0.0 {
        return if x >= mean { 1.0 } else { 0.0 };
    }
    0.5 * erfc(-(x - mean) / (std * std::f64::consts::SQRT_2))
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("carrier_frequency_hz", self.carrier_frequency_hz),
            ("wavelength_m", self.wavelength_m),
            ("reference_distance_m", self.reference_distance_m),
            ("blockage_beta", self.blockage_beta),
            ("tx_power_ban_dbm", self.tx_power_ban_dbm),
            ("tx_power_sbs_dbm", self.tx_power_sbs_dbm),
            ("tx_power_ma_dbm", self.tx_power_ma_dbm),
            ("access_bandwidth_hz", self.access_bandwidth_hz),
            ("backhaul_bandwidth_hz", self.backhaul_bandwidth_hz),
            ("noise_power_dbm", self.noise_power_dbm),
            ("snr_threshold_db", self.snr_threshold_db),
            ("user_density_per_m2", self.user_density_per_m2),
            ("per_user_rate_bps", self.per_user_rate_bps),
            ("htc_mtc_weight", self.htc_mtc_weight),
            ("ma_range_m", self.ma_range_m),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::InvalidScenario(format!("radio.{name} is not finite")));
            }
        }
        for (name, p) in [
            ("access_los", self.access_los),
            ("access_nlos", self.access_nlos),
            ("backhaul_los", self.backhaul_los),
            ("backhaul_nlos", self.backhaul_nlos),
        ] {
            if !p.exponent.is_finite() || !(p.shadowing_std_db >= 0.0 && p.shadowing_std_db.is_finite()) {
                return Err(Error::InvalidScenario(format!("radio.{name} has invalid parameters")));
            }
        }
        if self.carrier_frequency_hz <= 0.0 || self.wavelength_m <= 0.0 || self.reference_distance_m <= 0.0 {
            return Err(Error::InvalidScenario(
                "carrier frequency, wavelength and reference distance must be positive".into(),
            ));
        }
        let expected = SPEED_OF_LIGHT / self.carrier_frequency_hz;
        if ((self.wavelength_m - expected) / expected).abs() > 1e-3 {
            return Err(Error::InvalidScenario(format!(
                "wavelength {} m inconsistent with carrier (expected {expected} m)",
                self.wavelength_m
            )));
        }
        for (name, p) in [("access_outage", self.access_outage), ("backhaul_outage", self.backhaul_outage)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidScenario(format!("radio.{name} must lie in (0, 1)")));
            }
        }
        if !(self.compression_ratio > 0.0 && self.compression_ratio <= 1.0) {
            return Err(Error::InvalidScenario("radio.compression_ratio must lie in (0, 1]".into()));
        }
        for (name, v) in [
            ("blockage_beta", self.blockage_beta),
            ("htc_mtc_weight", self.htc_mtc_weight),
            ("user_density_per_m2", self.user_density_per_m2),
            ("per_user_rate_bps", self.per_user_rate_bps),
            ("access_bandwidth_hz", self.access_bandwidth_hz),
            ("backhaul_bandwidth_hz", self.backhaul_bandwidth_hz),
            ("ma_range_m", self.ma_range_m),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidScenario(format!("radio.{name} must be nonnegative")));
            }
        }
        Ok(())
    }

    pub fn pathloss_params(&self, class: LinkClass, los: LosState) -> PathlossParams {
        match (class, los) {
            (LinkClass::Access, LosState::Los) => self.access_los,
            (LinkClass::Access, LosState::Nlos) => self.access_nlos,
            (LinkClass::Backhaul, LosState::Los) => self.backhaul_los,
            (LinkClass::Backhaul, LosState::Nlos) => self.backhaul_nlos,
        }
    }

    pub fn tx_power_dbm(&self, role: Role) -> f64 {
        match role {
            Role::Ban => self.tx_power_ban_dbm,
            Role::Sbs => self.tx_power_sbs_dbm,
            Role::Ma => self.tx_power_ma_dbm,
        }
    }

    pub fn bandwidth_hz(&self, class: LinkClass) -> f64 {
        match class {
            LinkClass::Access => self.access_bandwidth_hz,
            LinkClass::Backhaul => self.backhaul_bandwidth_hz,
        }
    }

    /// Free-space loss at the reference distance, `20 log10(4 pi d0 / lambda)`.
    pub fn reference_loss_db(&self) -> f64 {
        20.0 * (4.0 * std::f64::consts::PI * self.reference_distance_m / self.wavelength_m).log10()
    }

    /// Mean pathloss in dB. Shadowing is handled analytically by the callers.
    pub fn pathloss(&self, d: f64, class: LinkClass, los: LosState) -> Result<f64> {
        if !(d > 0.0) {
            return Err(Error::Domain(format!("pathloss distance must be positive, got {d}")));
        }
        let n = self.pathloss_params(class, los).exponent;
        Ok(self.reference_loss_db() + 10.0 * n * (d / self.reference_distance_m).log10())
    }

    pub fn los_probability(&self, d: f64) -> f64 {
        (-self.blockage_beta * d).exp()
    }

    /// Median SNR in dB for one LOS state: `tx - pathloss(d) - noise`.
    pub fn mean_snr_db(&self, d: f64, class: LinkClass, los: LosState, role: Role) -> Result<f64> {
        Ok(self.tx_power_dbm(role) - self.pathloss(d, class, los)? - self.noise_power_dbm)
    }

    /// `P(SNR <= x)` for the LOS/NLOS mixture at distance `d`.
    pub fn snr_cdf(&self, x_db: f64, d: f64, class: LinkClass, role: Role) -> Result<f64> {
        let p_los = self.los_probability(d);
        let los = self.pathloss_params(class, LosState::Los);
        let nlos = self.pathloss_params(class, LosState::Nlos);
        let mu_los = self.mean_snr_db(d, class, LosState::Los, role)?;
        let mu_nlos = self.mean_snr_db(d, class, LosState::Nlos, role)?;
        Ok(p_los * gaussian_cdf(x_db, mu_los, los.shadowing_std_db)
            + (1.0 - p_los) * gaussian_cdf(x_db, mu_nlos, nlos.shadowing_std_db))
    }

    /// Probability that the SNR at distance `d` does not exceed the threshold.
    pub fn outage_probability(&self, d: f64, class: LinkClass, role: Role) -> Result<f64> {
        self.snr_cdf(self.snr_threshold_db, d, class, role)
    }

    /// Largest distance whose outage stays within the access target, found
    /// by bisection to 1 cm and capped at `cap_m`. Zero when nothing qualifies.
    pub fn coverage_radius(&self, class: LinkClass, role: Role, cap_m: f64) -> f64 {
        let target = self.access_outage;
        let ok = |d: f64| self.outage_probability(d, class, role).map(|p| p <= target).unwrap_or(false);
        if cap_m <= 0.0 {
            return 0.0;
        }
        if ok(cap_m) {
            return cap_m;
        }
        let smallest = 1e-6_f64.min(cap_m);
        if !ok(smallest) {
            return 0.0;
        }
        let (mut lo, mut hi) = (smallest, cap_m);
        while hi - lo > 1e-3 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// SNR (dB) exceeded with probability `1 - p_ob`, i.e. the `p_ob`
    /// quantile of the shadowed LOS/NLOS mixture.
    pub fn reliable_snr_db(&self, d: f64, class: LinkClass, role: Role) -> Result<f64> {
        let q = self.backhaul_outage;
        let mut lo = -400.0;
        let mut hi = 400.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.snr_cdf(mid, d, class, role)? >= q {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-10 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Shannon rate at the reliable SNR for a link of length `d`.
    pub fn capacity_at_distance(&self, d: f64, class: LinkClass, role: Role) -> Result<f64> {
        let bandwidth = self.bandwidth_hz(class);
        if bandwidth <= 0.0 {
            return Ok(0.0);
        }
        let snr_db = self.reliable_snr_db(d, class, role)?;
        Ok(shannon_rate(bandwidth, snr_db))
    }

    pub fn backhaul_capacity(
        &self,
        parent: super::Point,
        child: super::Point,
        class: LinkClass,
        role: Role,
    ) -> Result<f64> {
        self.capacity_at_distance(parent.distance(child), class, role)
    }

    /// Largest number of subareas (at most `max_subareas`) whose aggregate
    /// Poisson user demand exceeds `capacity_bps` with probability at most
    /// the backhaul outage target.
    pub fn subarea_capacity_limit(&self, capacity_bps: f64, subarea_area_m2: f64, max_subareas: u32) -> u32 {
        let users_per_subarea = self.user_density_per_m2 * subarea_area_m2;
        let rate = self.per_user_rate_bps;
        if rate <= 0.0 || users_per_subarea <= 0.0 {
            return max_subareas;
        }
        let max_users = (capacity_bps.max(0.0) / rate).floor();
        let ok = |n: u32| poisson_tail_above(n as f64 * users_per_subarea, max_users) <= self.backhaul_outage;
        // Tail probability is nondecreasing in n.
        if ok(max_subareas) {
            return max_subareas;
        }
        let (mut lo, mut hi) = (0u32, max_subareas);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

/// `B log2(1 + SNR)`; zero below [`MIN_BACKHAUL_SNR_DB`].
pub fn shannon_rate(bandwidth_hz: f64, snr_db: f64) -> f64 {
    if snr_db < MIN_BACKHAUL_SNR_DB || bandwidth_hz <= 0.0 {
        return 0.0;
    }
    bandwidth_hz * (1.0 + 10f64.powf(snr_db / 10.0)).log2()
}

/// `P(K > k_max)` for `K ~ Poisson(mean)` by exact summation of the pmf.
pub fn poisson_tail_above(mean: f64, k_max: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    if !k_max.is_finite() {
        return 0.0;
    }
    let k_max = k_max.max(-1.0) as i64;
    if k_max < 0 {
        return 1.0;
    }
    // Sum the body in log space to stay stable for large means.
    let mut log_term = -mean;
    let mut cdf = log_term.exp();
    for k in 1..=k_max {
        log_term += mean.ln() - (k as f64).ln();
        cdf += log_term.exp();
    }
    (1.0 - cdf).max(0.0)
}
