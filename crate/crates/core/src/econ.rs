//! Cost and quality model of a single edge server: model quality as a
//! function of training rounds, the three energy terms, and the per-entity
//! utilities built on top of them.
//!
//! Units: energies are Joules, data sizes are bits (1 MB = 8e6 bits),
//! transmit power is dBm and converted to Watts before use. Utilities are
//! dimensionless cost units.

use serde::{Deserialize, Serialize};

use crate::error::{ContractError, Result};

/// Bits in one (decimal) megabyte.
pub const BITS_PER_MB: f64 = 8.0e6;

/// Convergence hyperparameters of the strongly convex training loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityHyper {
    /// Step size, must lie in `(0, 2 / lipschitz)`.
    pub delta: f64,
    pub lipschitz: f64,
    pub strong_convexity: f64,
}

impl Default for QualityHyper {
    fn default() -> Self {
        Self {
            delta: 0.02,
            lipschitz: 8.0,
            strong_convexity: 2.0,
        }
    }
}

impl QualityHyper {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lipschitz.is_finite()
            && self.lipschitz > 0.0
            && self.strong_convexity.is_finite()
            && self.strong_convexity > 0.0
            && self.delta > 0.0
            && self.delta < 2.0 / self.lipschitz;
        if ok {
            Ok(())
        } else {
            Err(ContractError::InvalidHyper(format!(
                "need L > 0, eps > 0 and 0 < delta < 2/L (delta={}, L={}, eps={})",
                self.delta, self.lipschitz, self.strong_convexity
            )))
        }
    }

    /// Exponent coefficient `a = (2 - L delta) delta eps / 2`, so that
    /// quality is `1 - 2^(-a T)`.
    pub fn rate(&self) -> f64 {
        (2.0 - self.lipschitz * self.delta) * self.delta * self.strong_convexity / 2.0
    }
}

/// Hardware and cost parameters of one edge server.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeProfile {
    pub hw_const: f64,
    /// CPU cycles per bit for perceiving feature data.
    pub cycles_perceive: f64,
    /// CPU cycles per bit for creating agent modules.
    pub cycles_create: f64,
    /// Effective switched capacitance.
    pub switch_cap: f64,
    pub cpu_hz: f64,
    pub tx_power_dbm: f64,
    pub data_feature_bits: f64,
    pub data_agent_bits: f64,
    pub link_rate_bps: f64,
    /// Cost per Joule.
    pub unit_energy_cost: f64,
}

impl Default for EdgeProfile {
    fn default() -> Self {
        Self {
            hw_const: 1e-23,
            cycles_perceive: 100.0,
            cycles_create: 120.0,
            switch_cap: 1e-16,
            cpu_hz: 64e6,
            tx_power_dbm: 20.0,
            data_feature_bits: BITS_PER_MB,
            data_agent_bits: 10.0 * BITS_PER_MB,
            link_rate_bps: 1e6,
            unit_energy_cost: 0.5,
        }
    }
}

impl EdgeProfile {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("hw_const", self.hw_const),
            ("cycles_perceive", self.cycles_perceive),
            ("cycles_create", self.cycles_create),
            ("switch_cap", self.switch_cap),
            ("cpu_hz", self.cpu_hz),
            ("data_feature_bits", self.data_feature_bits),
            ("data_agent_bits", self.data_agent_bits),
            ("link_rate_bps", self.link_rate_bps),
            ("unit_energy_cost", self.unit_energy_cost),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ContractError::InvalidProfile(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if self.link_rate_bps <= 0.0 {
            return Err(ContractError::InvalidProfile(
                "link_rate_bps must be positive".into(),
            ));
        }
        if !(0.0..=60.0).contains(&self.tx_power_dbm) {
            return Err(ContractError::InvalidProfile(format!(
                "tx_power_dbm must lie in [0, 60], got {}",
                self.tx_power_dbm
            )));
        }
        Ok(())
    }

    /// Transmit power in Watts.
    pub fn tx_power_watts(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }
}

/// Linear cost coefficients of an edge server's utility `theta R - c T - E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostCoeffs {
    /// Cost per training round.
    pub c: f64,
    /// Round-independent cost (perception plus upload).
    pub e_fixed: f64,
}

impl CostCoeffs {
    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0 && self.e_fixed.is_finite() && self.e_fixed >= 0.0)
        {
            return Err(ContractError::InvalidMarket(format!(
                "cost coefficients need c > 0 and E >= 0 (c={}, E={})",
                self.c, self.e_fixed
            )));
        }
        Ok(())
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Quality `1 - 2^(-a T)` of an agent module trained for `rounds` rounds.
pub fn model_quality(rounds: f64, hyper: &QualityHyper) -> Result<f64> {
    hyper.validate()?;
    check_rounds(rounds)?;
    Ok(quality_unchecked(rounds, hyper.rate()))
}

#[inline]
pub(crate) fn quality_unchecked(rounds: f64, rate: f64) -> f64 {
    1.0 - (-rounds * rate).exp2()
}

pub fn energy_perception(profile: &EdgeProfile) -> f64 {
    profile.hw_const * profile.cycles_perceive * profile.data_feature_bits * profile.cpu_hz.powi(2)
}

pub fn energy_creation(profile: &EdgeProfile, rounds: f64) -> Result<f64> {
    check_rounds(rounds)?;
    Ok(profile.switch_cap * rounds * profile.cycles_create * profile.cpu_hz.powi(2))
}

pub fn energy_upload(profile: &EdgeProfile) -> Result<f64> {
    if !(profile.link_rate_bps > 0.0) {
        return Err(ContractError::InvalidProfile(
            "link_rate_bps must be positive".into(),
        ));
    }
    Ok(profile.tx_power_watts() * profile.data_agent_bits / profile.link_rate_bps)
}

/// Sum of the three energy terms for a given number of rounds.
pub fn energy_total(profile: &EdgeProfile, rounds: f64) -> Result<f64> {
    Ok(energy_perception(profile) + energy_creation(profile, rounds)? + energy_upload(profile)?)
}

pub fn cost_coeffs(profile: &EdgeProfile) -> Result<CostCoeffs> {
    profile.validate()?;
    let sigma = profile.unit_energy_cost;
    Ok(CostCoeffs {
        c: sigma * profile.switch_cap * profile.cycles_create * profile.cpu_hz.powi(2),
        e_fixed: sigma * (energy_perception(profile) + energy_upload(profile)?),
    })
}

/// Utility `theta R - c T - E` of an edge server.
pub fn es_utility(theta: f64, reward: f64, rounds: f64, costs: &CostCoeffs) -> f64 {
    theta * reward - costs.c * rounds - costs.e_fixed
}

fn check_rounds(rounds: f64) -> Result<()> {
    if rounds.is_finite() && rounds >= 0.0 {
        Ok(())
    } else {
        Err(ContractError::NegativeRounds(rounds))
    }
}
