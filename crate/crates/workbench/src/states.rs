//! States files: one market per CSV row, `alpha` and `beta` followed by the
//! flattened state vector. Values are written with round-trip precision so
//! a file reproduces its states exactly.

use std::path::Path;

use dyncontract_core::contract::{MarketState, TypeLadder};
use dyncontract_core::econ::{cost_coeffs, EdgeProfile, QualityHyper};
use dyncontract_core::mdp::{state_dim, EnvState};

use crate::error::{Error, Result};
use crate::table::Table;

pub fn header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = ["alpha", "beta", "n_servers", "k", "sigma", "power_dbm", "rate_mbps", "e_cloud"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for name in ["p1", "theta1", "theta2"] {
        h.extend((0..k).map(|i| format!("{name}_{i}")));
    }
    for r in 0..k {
        h.extend((0..k).map(|j| format!("p2_{r}_{j}")));
    }
    h
}

pub fn to_table(states: &[EnvState]) -> Result<Table> {
    let k = states.first().map_or(0, |s| s.market.k());
    let mut t = Table { header: header(k), rows: Vec::new() };
    for s in states {
        if s.market.k() != k {
            return Err(Error::Input("all states in a file must have the same number of types".into()));
        }
        let mut row = vec![s.market.alpha.to_string(), s.market.beta.to_string()];
        row.extend(s.vector.iter().map(|v| v.to_string()));
        t.rows.push(row);
    }
    Ok(t)
}

/// Rebuilds a state from one row. Profile fields that the vector does not
/// carry come from `base`.
pub fn from_row(row: &[f64], base: &EdgeProfile, hyper: &QualityHyper) -> Result<EnvState> {
    let bad = |m: String| Error::Input(format!("states file: {m}"));
    if row.len() < 4 {
        return Err(bad("row too short".into()));
    }
    let k = row[3];
    if !(k >= 1.0 && k.fract() == 0.0) {
        return Err(bad(format!("k must be a positive integer, got {k}")));
    }
    let k = k as usize;
    if row.len() != 2 + state_dim(k) {
        return Err(bad(format!("expected {} columns for k = {k}, got {}", 2 + state_dim(k), row.len())));
    }
    let (alpha, beta, v) = (row[0], row[1], &row[2..]);
    if !(v[0] >= 1.0 && v[0].fract() == 0.0) {
        return Err(bad(format!("n_servers must be a positive integer, got {}", v[0])));
    }
    let profile = EdgeProfile { unit_energy_cost: v[2], tx_power_dbm: v[3], link_rate_bps: v[4] * 1e6, ..*base };
    profile.validate().map_err(|e| bad(e.to_string()))?;
    let block = |i: usize| v[6 + i * k..6 + (i + 1) * k].to_vec();
    let p2 = (0..k).map(|r| v[6 + 3 * k + r * k..6 + 3 * k + (r + 1) * k].to_vec()).collect();
    let market = MarketState {
        n_servers: v[0] as usize,
        ladder: TypeLadder { p1: block(0), theta1: block(1), theta2: block(2), p2 },
        costs: cost_coeffs(&profile).map_err(|e| bad(e.to_string()))?,
        hyper: *hyper,
        alpha,
        beta,
        sigma: v[2],
        e_cloud: v[5],
    };
    market.validate().map_err(|e| bad(e.to_string()))?;
    EnvState::new(market, profile).map_err(|e| bad(e.to_string()))
}

pub fn read(path: &Path, base: &EdgeProfile, hyper: &QualityHyper) -> Result<Vec<EnvState>> {
    let mut rd = csv::Reader::from_path(path)
        .map_err(|e| Error::Input(format!("cannot read states file {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| Error::Input(format!("states file row {}: {e}", i + 1)))?;
        let vals = rec
            .iter()
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Input(format!("states file row {}: {e}", i + 1)))?;
        out.push(from_row(&vals, base, hyper)?);
    }
    if out.is_empty() {
        return Err(Error::Input(format!("states file {} has no rows", path.display())));
    }
    Ok(out)
}
